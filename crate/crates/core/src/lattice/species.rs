use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Configuration, LatticeError, Topology};

/// Kind of a second-class particle. Typed labels come from the four-process coupling, where a
/// site carries the pair (disagreement of the stationary pair, disagreement of the extremal pair).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SecondType {
    Untyped,
    /// (0, 2)
    One,
    /// (2, 2)
    Two,
    /// (1, 2)
    Three,
    /// (2, 1)
    Four,
    /// (1, 1) created by a collision of types three and four.
    Five,
}

impl SecondType {
    pub fn number(self) -> Option<u8> {
        match self {
            SecondType::Untyped => None,
            SecondType::One => Some(1),
            SecondType::Two => Some(2),
            SecondType::Three => Some(3),
            SecondType::Four => Some(4),
            SecondType::Five => Some(5),
        }
    }

    pub fn from_number(k: u8) -> Option<Self> {
        match k {
            1 => Some(SecondType::One),
            2 => Some(SecondType::Two),
            3 => Some(SecondType::Three),
            4 => Some(SecondType::Four),
            5 => Some(SecondType::Five),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Empty,
    First,
    Second(SecondType),
}

impl Label {
    pub fn is_second(self) -> bool {
        matches!(self, Label::Second(_))
    }

    /// Occupation bits `[b1, b2, b3, b4]` of the four coupled processes behind a typed label:
    /// `(b1, b2)` is the extremal pair, `(b3, b4)` the stationary pair.
    pub fn component_bits(self) -> Option<[bool; 4]> {
        let bits = match self {
            Label::Empty => [false; 4],
            Label::First | Label::Second(SecondType::Five) => [true; 4],
            Label::Second(SecondType::One) => [true, false, false, false],
            Label::Second(SecondType::Two) => [true, false, true, false],
            Label::Second(SecondType::Three) => [true, false, true, true],
            Label::Second(SecondType::Four) => [true, true, true, false],
            Label::Second(SecondType::Untyped) => return None,
        };
        Some(bits)
    }

    /// Inverse of [`Label::component_bits`]; `(1,1,1,1)` maps to a first-class particle.
    pub fn from_component_bits(bits: [bool; 4]) -> Option<Self> {
        let label = match bits {
            [false, false, false, false] => Label::Empty,
            [true, true, true, true] => Label::First,
            [true, false, false, false] => Label::Second(SecondType::One),
            [true, false, true, false] => Label::Second(SecondType::Two),
            [true, false, true, true] => Label::Second(SecondType::Three),
            [true, true, true, false] => Label::Second(SecondType::Four),
            _ => return None,
        };
        Some(label)
    }

    /// Priority rank; higher passes lower. Types three and four share a rank and meet through
    /// the collision rule instead.
    fn rank(self) -> u8 {
        match self {
            Label::Empty => 0,
            Label::Second(SecondType::One) => 1,
            Label::Second(SecondType::Two) => 2,
            Label::Second(SecondType::Three) | Label::Second(SecondType::Four) => 3,
            Label::Second(SecondType::Untyped) => 3,
            Label::Second(SecondType::Five) => 4,
            Label::First => 5,
        }
    }

    /// Update of an edge holding `(left, right)` when its clock rings with uniform `u`.
    /// The left content moves right if it has higher priority and `u <= p`, left if lower and
    /// `u > p`. A three next to a four becomes a two and a five, the five on the left when
    /// `u > p`.
    pub fn edge_update(left: Label, right: Label, u: f64, p: f64) -> (Label, Label) {
        use SecondType::{Five, Four, Three, Two};
        let collision = matches!((left, right), (Label::Second(Three), Label::Second(Four)) | (Label::Second(Four), Label::Second(Three)));
        if collision {
            let (two, five) = (Label::Second(Two), Label::Second(Five));
            return if u <= p { (two, five) } else { (five, two) };
        }
        let (l, r) = (left.rank(), right.rank());
        if (l > r && u <= p) || (l < r && u > p) {
            (right, left)
        } else {
            (left, right)
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Label::Empty => "·",
            Label::First => "1",
            Label::Second(SecondType::Untyped) => "2",
            Label::Second(SecondType::One) => "2₁",
            Label::Second(SecondType::Two) => "2₂",
            Label::Second(SecondType::Three) => "2₃",
            Label::Second(SecondType::Four) => "2₄",
            Label::Second(SecondType::Five) => "2₅",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiSpeciesConfiguration {
    pub topology: Topology,
    pub sites: Vec<Label>,
}

impl MultiSpeciesConfiguration {
    pub fn new(topology: Topology, sites: Vec<Label>) -> Self {
        assert_eq!(sites.len(), topology.len(), "label count must match the window");
        Self { topology, sites }
    }

    pub fn segment(sites: Vec<Label>) -> Self {
        Self::new(Topology::Segment(sites.len()), sites)
    }

    pub fn get(&self, x: i64) -> Label {
        self.sites[(x - self.topology.first_site()) as usize]
    }

    pub fn set(&mut self, x: i64, label: Label) {
        let i = (x - self.topology.first_site()) as usize;
        self.sites[i] = label;
    }

    pub fn second_class_count(&self) -> usize {
        self.sites.iter().filter(|l| l.is_second()).count()
    }

    pub fn count_type(&self, t: SecondType) -> usize {
        self.sites.iter().filter(|&&l| l == Label::Second(t)).count()
    }

    /// Rebuild a typed configuration from the four coupled occupation words, marking
    /// `(1,1,1,1)` sites listed in `fives` as type five.
    pub fn from_components(components: [&Configuration; 4], fives: &[bool]) -> Result<Self, LatticeError> {
        let topology = components[0].topology();
        let mut sites = Vec::with_capacity(topology.len());
        for (i, x) in components[0].sites().enumerate() {
            let bits = [components[0].get(x), components[1].get(x), components[2].get(x), components[3].get(x)];
            let label = Label::from_component_bits(bits).ok_or(LatticeError::UntypedSecond(x))?;
            let label =
                if label == Label::First && fives.get(i).copied().unwrap_or(false) { Label::Second(SecondType::Five) } else { label };
            sites.push(label);
        }
        Ok(Self { topology, sites })
    }
}

impl fmt::Display for MultiSpeciesConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.sites {
            f.write_str(l.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for MultiSpeciesConfiguration {
    type Err = LatticeError;

    /// Parses the symbols written by `Display` (`.` is accepted for an empty site).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut sites = Vec::new();
        let mut chars = s.chars().peekable();
        while let Some(ch) = chars.next() {
            let label = match ch {
                '·' | '.' | '0' => Label::Empty,
                '1' => Label::First,
                '2' => {
                    let sub = chars.peek().and_then(|&c| match c {
                        '₁' => Some(1),
                        '₂' => Some(2),
                        '₃' => Some(3),
                        '₄' => Some(4),
                        '₅' => Some(5),
                        _ => None,
                    });
                    match sub {
                        Some(k) => {
                            chars.next();
                            Label::Second(SecondType::from_number(k).expect("subscript in 1..=5"))
                        }
                        None => Label::Second(SecondType::Untyped),
                    }
                }
                other => return Err(LatticeError::Parse(other)),
            };
            sites.push(label);
        }
        Ok(Self::segment(sites))
    }
}

/// Site-wise disagreement of two coupled configurations.
pub fn disagreement(eta: &Configuration, zeta: &Configuration) -> Result<MultiSpeciesConfiguration, LatticeError> {
    eta.same_topology(zeta)?;
    let sites = eta
        .sites()
        .map(|x| match (eta.get(x), zeta.get(x)) {
            (true, true) => Label::First,
            (false, false) => Label::Empty,
            _ => Label::Second(SecondType::Untyped),
        })
        .collect();
    Ok(MultiSpeciesConfiguration { topology: eta.topology(), sites })
}
