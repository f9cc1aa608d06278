//! Configurations on finite windows, height functions, partial orders and the
//! projections onto the integer line used by the blocking arguments.

mod blocking;
mod projection;
mod species;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use blocking::{blocking_marginal, sample_blocking_measure, BLOCKING_TAIL_TOL};
pub use projection::{project_chi_star, project_xi_star, CensoredEdges, Projection};
pub use species::{disagreement, Label, MultiSpeciesConfiguration, SecondType};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("topology mismatch: {0:?} vs {1:?}")]
    TopologyMismatch(Topology, Topology),
    #[error("operation needs a segment, got {0:?}")]
    NeedsSegment(Topology),
    #[error("operation needs a line window, got {0:?}")]
    NeedsLine(Topology),
    #[error("site {site} outside {topology:?}")]
    OutOfRange { site: i64, topology: Topology },
    #[error("projection spans [{lo}, {hi}] which exceeds the window; grow the window")]
    WindowOverflow { lo: i64, hi: i64 },
    #[error("window of half-width {w} too small: tail mass {mass:e} above tolerance")]
    WindowTooSmall { w: i64, mass: f64 },
    #[error("requires p in (1/2, 1), got {0}")]
    BadBias(f64),
    #[error("untyped second-class particle at site {0}")]
    UntypedSecond(i64),
    #[error("typed second-class particle at site {0} where untyped labels are expected")]
    TypedSecond(i64),
    #[error("invalid character `{0}` in configuration string")]
    Parse(char),
    #[error("h* needs one closed boundary (alpha = gamma = 0) and beta + delta > 0")]
    HStarRegime,
}

/// Geometry of a finite site window.
///
/// Outside a half-line window every site is empty. Outside a line window sites to the left
/// are empty and sites to the right are occupied, so balanced configurations stay balanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topology {
    Segment(usize),
    HalfLineWindow(usize),
    LineWindow { lo: i64, hi: i64 },
}

impl Topology {
    /// Symmetric line window `-w..=w`.
    pub fn line(w: i64) -> Self {
        Topology::LineWindow { lo: -w, hi: w }
    }

    pub fn first_site(&self) -> i64 {
        match *self {
            Topology::Segment(_) | Topology::HalfLineWindow(_) => 1,
            Topology::LineWindow { lo, .. } => lo,
        }
    }

    pub fn last_site(&self) -> i64 {
        match *self {
            Topology::Segment(n) | Topology::HalfLineWindow(n) => n as i64,
            Topology::LineWindow { hi, .. } => hi,
        }
    }

    pub fn len(&self) -> usize {
        (self.last_site() - self.first_site() + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.first_site() && x <= self.last_site()
    }

    /// Occupation of sites outside the window, if it is defined.
    pub fn outside_value(&self, x: i64) -> Option<bool> {
        match *self {
            Topology::Segment(_) => None,
            Topology::HalfLineWindow(_) => (x > self.last_site()).then_some(false),
            Topology::LineWindow { lo, hi } => {
                if x < lo {
                    Some(false)
                } else if x > hi {
                    Some(true)
                } else {
                    None
                }
            }
        }
    }
}

/// Occupancy word, bit-packed.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    topology: Topology,
    words: Vec<u64>,
}

impl Configuration {
    pub fn empty(topology: Topology) -> Self {
        Self { topology, words: vec![0; topology.len().div_ceil(64)] }
    }

    pub fn full(topology: Topology) -> Self {
        let mut c = Self::empty(topology);
        for x in topology.first_site()..=topology.last_site() {
            c.set(x, true);
        }
        c
    }

    pub fn from_bits(topology: Topology, bits: &[u8]) -> Self {
        assert_eq!(bits.len(), topology.len(), "bit count must match the window");
        let mut c = Self::empty(topology);
        for (i, &b) in bits.iter().enumerate() {
            c.set(topology.first_site() + i as i64, b != 0);
        }
        c
    }

    /// Segment configuration from the binary index convention: site 1 is the least significant bit.
    pub fn from_index(n: usize, index: usize) -> Self {
        let mut c = Self::empty(Topology::Segment(n));
        c.words[0] = index as u64;
        c
    }

    /// Inverse of [`Configuration::from_index`]; only meaningful for windows of at most 64 sites.
    pub fn index(&self) -> usize {
        self.words.first().copied().unwrap_or(0) as usize
    }

    /// Ground state of `A_n` restricted to the window: occupied exactly to the right of `n`.
    pub fn ground_state(topology: Topology, n: i64) -> Self {
        let mut c = Self::empty(topology);
        for x in topology.first_site()..=topology.last_site() {
            c.set(x, x > n);
        }
        c
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn len(&self) -> usize {
        self.topology.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topology.is_empty()
    }

    #[inline]
    fn slot(&self, x: i64) -> usize {
        debug_assert!(self.topology.contains(x), "site {x} outside {:?}", self.topology);
        (x - self.topology.first_site()) as usize
    }

    /// Occupation of a site inside the window. Panics outside it.
    #[inline]
    pub fn get(&self, x: i64) -> bool {
        let i = self.slot(x);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    /// Occupation including the deterministic outside of half-line and line windows.
    pub fn get_ext(&self, x: i64) -> Option<bool> {
        if self.topology.contains(x) {
            Some(self.get(x))
        } else {
            self.topology.outside_value(x)
        }
    }

    #[inline]
    pub fn set(&mut self, x: i64, value: bool) {
        let i = self.slot(x);
        let mask = 1u64 << (i & 63);
        if value {
            self.words[i >> 6] |= mask;
        } else {
            self.words[i >> 6] &= !mask;
        }
    }

    pub fn sites(&self) -> std::ops::RangeInclusive<i64> {
        self.topology.first_site()..=self.topology.last_site()
    }

    pub fn bits(&self) -> Vec<u8> {
        self.sites().map(|x| self.get(x) as u8).collect()
    }

    pub fn particle_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Leftmost occupied site. On a line window the occupied outside counts, so this is never
    /// `None` there.
    pub fn leftmost_particle(&self) -> Option<i64> {
        let inside = self.sites().find(|&x| self.get(x));
        match self.topology {
            Topology::LineWindow { hi, .. } => Some(inside.unwrap_or(hi + 1)),
            _ => inside,
        }
    }

    /// Rightmost empty site, with the same outside convention as [`Configuration::leftmost_particle`].
    pub fn rightmost_hole(&self) -> Option<i64> {
        let inside = self.sites().rev().find(|&x| !self.get(x));
        match self.topology {
            Topology::LineWindow { lo, .. } => Some(inside.unwrap_or(lo - 1)),
            Topology::HalfLineWindow(_) => None,
            Topology::Segment(_) => inside,
        }
    }

    /// The unique `n` with the configuration in `A_n`.
    pub fn blocking_index(&self) -> Result<i64, LatticeError> {
        match self.topology {
            Topology::LineWindow { lo, .. } => {
                let holes = (self.len() - self.particle_count()) as i64;
                Ok(lo - 1 + holes)
            }
            t => Err(LatticeError::NeedsLine(t)),
        }
    }

    fn same_topology(&self, other: &Self) -> Result<(), LatticeError> {
        if self.topology == other.topology {
            Ok(())
        } else {
            Err(LatticeError::TopologyMismatch(self.topology, other.topology))
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for x in self.sites() {
            f.write_str(if self.get(x) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Configuration({:?}, {})", self.topology, self)
    }
}

impl FromStr for Configuration {
    type Err = LatticeError;

    /// Parses a segment configuration such as `0110`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|ch| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(LatticeError::Parse(other)),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        Ok(Self::from_bits(Topology::Segment(bits.len()), &bits))
    }
}

/// Height profile `h(0..=2N)` of a segment configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightProfile {
    pub values: Vec<i64>,
}

/// Height function of a segment configuration: the walk reads the segment left to right and
/// then its particle-hole mirror right to left, so it returns to zero at `2N`.
pub fn height_function(eta: &Configuration) -> Result<HeightProfile, LatticeError> {
    let n = match eta.topology() {
        Topology::Segment(n) => n as i64,
        t => return Err(LatticeError::NeedsSegment(t)),
    };
    let mut values = Vec::with_capacity(2 * n as usize + 1);
    let mut h = 0i64;
    values.push(0);
    for i in 1..=2 * n {
        let up = if i <= n { eta.get(i) } else { !eta.get(2 * n + 1 - i) };
        h += if up { 1 } else { -1 };
        values.push(h);
    }
    Ok(HeightProfile { values })
}

/// Height function centred by its equilibrium mean for one closed boundary. The mean is the
/// tent `min(x, 2N - x) * (delta - beta) / (delta + beta)`, which vanishes at both ends.
pub fn h_star(eta: &Configuration, beta: f64, delta: f64) -> Result<Vec<f64>, LatticeError> {
    if beta + delta <= 0.0 {
        return Err(LatticeError::HStarRegime);
    }
    let h = height_function(eta)?;
    let n2 = h.values.len() as i64 - 1;
    let slope = (delta - beta) / (delta + beta);
    Ok(h.values.iter().enumerate().map(|(x, &v)| v as f64 - (x as i64).min(n2 - x as i64) as f64 * slope).collect())
}

/// Outcome of comparing two configurations in a partial order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dominance {
    Ge,
    Le,
    Eq,
    Incomparable,
}

impl Dominance {
    fn from_flags(some_greater: bool, some_less: bool) -> Self {
        match (some_greater, some_less) {
            (false, false) => Dominance::Eq,
            (true, false) => Dominance::Ge,
            (false, true) => Dominance::Le,
            (true, true) => Dominance::Incomparable,
        }
    }

    /// `Ge` or `Eq`.
    pub fn is_ge(self) -> bool {
        matches!(self, Dominance::Ge | Dominance::Eq)
    }

    pub fn is_le(self) -> bool {
        matches!(self, Dominance::Le | Dominance::Eq)
    }
}

pub fn compare_componentwise(eta: &Configuration, zeta: &Configuration) -> Result<Dominance, LatticeError> {
    eta.same_topology(zeta)?;
    let (mut gt, mut lt) = (false, false);
    for (a, b) in eta.words.iter().zip(&zeta.words) {
        gt |= a & !b != 0;
        lt |= b & !a != 0;
    }
    Ok(Dominance::from_flags(gt, lt))
}

/// Prefix-sum order. On a segment this is the height order; on a line window the sums start
/// at the (empty) left outside.
pub fn compare_height(eta: &Configuration, zeta: &Configuration) -> Result<Dominance, LatticeError> {
    eta.same_topology(zeta)?;
    let (mut gt, mut lt) = (false, false);
    let mut diff = 0i64;
    for x in eta.sites() {
        diff += eta.get(x) as i64 - zeta.get(x) as i64;
        gt |= diff > 0;
        lt |= diff < 0;
    }
    Ok(Dominance::from_flags(gt, lt))
}

/// Pointwise minimum and maximum of height profiles, mapped back to configurations.
pub fn height_meet_join(eta: &Configuration, zeta: &Configuration) -> Result<(Configuration, Configuration), LatticeError> {
    eta.same_topology(zeta)?;
    let topology = eta.topology();
    let mut lo = Configuration::empty(topology);
    let mut hi = Configuration::empty(topology);
    let (mut se, mut sz, mut prev_lo, mut prev_hi) = (0i64, 0i64, 0i64, 0i64);
    for x in eta.sites() {
        se += eta.get(x) as i64;
        sz += zeta.get(x) as i64;
        let (m, j) = (se.min(sz), se.max(sz));
        lo.set(x, m > prev_lo);
        hi.set(x, j > prev_hi);
        prev_lo = m;
        prev_hi = j;
    }
    Ok((lo, hi))
}
