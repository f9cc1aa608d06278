use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Configuration, Label, LatticeError, MultiSpeciesConfiguration, SecondType, Topology};

/// A set of line edges; edge `x` joins sites `x` and `x + 1`. Besides the listed edges, every
/// edge `<= below` and every edge `>= from` is censored when those bounds are present.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensoredEdges {
    pub edges: BTreeSet<i64>,
    pub below: Option<i64>,
    pub from: Option<i64>,
}

impl CensoredEdges {
    pub fn contains(&self, edge: i64) -> bool {
        self.edges.contains(&edge) || self.below.is_some_and(|b| edge <= b) || self.from.is_some_and(|f| edge >= f)
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty() && self.below.is_none() && self.from.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub config: Configuration,
    pub censored: CensoredEdges,
    /// The balanced set `A_n` the projection lives in.
    pub offset: i64,
    /// Sites `first_kept..=last_kept` hold the projected sequence; outside are extensions.
    pub first_kept: i64,
    pub last_kept: i64,
}

/// Places `seq` at `k+1..=k+m` with `k = offset - holes(seq)`, which puts the result in
/// `A_offset`. Empty to the left, occupied to the right.
fn embed(seq: &[bool], offset: i64, window: Topology) -> Result<(Configuration, i64), LatticeError> {
    let (lo, hi) = match window {
        Topology::LineWindow { lo, hi } => (lo, hi),
        t => return Err(LatticeError::NeedsLine(t)),
    };
    let holes = seq.iter().filter(|&&b| !b).count() as i64;
    let k = offset - holes;
    let (first, last) = (k + 1, k + seq.len() as i64);
    // One extension site on each side must be visible.
    if first - 1 < lo || last + 1 > hi {
        return Err(LatticeError::WindowOverflow { lo: first - 1, hi: last + 1 });
    }
    let mut config = Configuration::empty(window);
    for x in lo..=hi {
        let v = if x < first {
            false
        } else if x > last {
            true
        } else {
            seq[(x - first) as usize]
        };
        config.set(x, v);
    }
    Ok((config, k))
}

/// Kept positions (in the source) and the merged-edge flags between consecutive kept sites.
fn merged_after(positions: &[i64]) -> Vec<bool> {
    positions.windows(2).map(|w| w[1] != w[0] + 1).collect()
}

/// Projection of a disagreement configuration onto the line: empty sites are deleted, second
/// class particles become holes, first class particles stay. The censored set lists the
/// merged edges only; edges at or beyond `last_kept` touch the artificial right extension and
/// must also be frozen when the projection is run as a dynamics.
pub fn project_xi_star(xi: &MultiSpeciesConfiguration, window: Topology, offset: i64) -> Result<Projection, LatticeError> {
    let first_site = xi.topology.first_site();
    let mut positions = Vec::new();
    let mut seq = Vec::new();
    for (i, &l) in xi.sites.iter().enumerate() {
        match l {
            Label::Empty => {}
            Label::First => {
                positions.push(first_site + i as i64);
                seq.push(true);
            }
            Label::Second(_) => {
                positions.push(first_site + i as i64);
                seq.push(false);
            }
        }
    }
    let (config, k) = embed(&seq, offset, window)?;
    let mut censored = CensoredEdges::default();
    for (j, merged) in merged_after(&positions).into_iter().enumerate() {
        if merged {
            censored.edges.insert(k + 1 + j as i64);
        }
    }
    Ok(Projection { config, censored, offset, first_kept: k + 1, last_kept: k + seq.len() as i64 })
}

/// Projection used for the four-process coupling. Sites that are empty or first class are
/// deleted, the exit record `v` is prepended, types one to three become holes and types four
/// and five particles. Only non-merged edges between consecutive kept sites stay open.
pub fn project_chi_star(chi: &MultiSpeciesConfiguration, v: &[bool], window: Topology, offset: i64) -> Result<Projection, LatticeError> {
    let first_site = chi.topology.first_site();
    let mut positions = Vec::new();
    let mut seq: Vec<bool> = v.to_vec();
    for (i, &l) in chi.sites.iter().enumerate() {
        let x = first_site + i as i64;
        match l {
            Label::Empty | Label::First => {}
            Label::Second(SecondType::Untyped) => return Err(LatticeError::UntypedSecond(x)),
            Label::Second(t) => {
                positions.push(x);
                seq.push(matches!(t, SecondType::Four | SecondType::Five));
            }
        }
    }
    let (config, k) = embed(&seq, offset, window)?;
    let start = k + v.len() as i64; // last site before the kept block
    let mut censored = CensoredEdges { below: Some(start), from: Some(k + seq.len() as i64), ..Default::default() };
    for (j, merged) in merged_after(&positions).into_iter().enumerate() {
        if merged {
            censored.edges.insert(start + 1 + j as i64);
        }
    }
    Ok(Projection { config, censored, offset, first_kept: k + 1, last_kept: k + seq.len() as i64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(s: &str) -> MultiSpeciesConfiguration {
        s.parse().unwrap()
    }

    fn window_string(c: &Configuration, from: i64, to: i64) -> String {
        (from..=to).map(|x| if c.get(x) { '1' } else { '0' }).collect()
    }

    #[test]
    fn xi_all_first_is_ground_state() {
        let p = project_xi_star(&ms("1111"), Topology::line(10), 0).unwrap();
        assert_eq!(p.config, Configuration::ground_state(Topology::line(10), 0));
        assert!(p.censored.is_empty());
    }

    #[test]
    fn xi_single_second() {
        let p = project_xi_star(&ms("2111"), Topology::line(10), 0).unwrap();
        // One hole, placed at the origin, particles from site 1 on.
        assert_eq!(p.config, Configuration::ground_state(Topology::line(10), 0));
        assert_eq!((p.first_kept, p.last_kept), (0, 3));
        assert_eq!(p.config.blocking_index().unwrap(), 0);
    }

    #[test]
    fn xi_figure_example() {
        // Second, second, first, empty, second, first, empty, first.
        let xi = ms("221·21·1");
        let p = project_xi_star(&xi, Topology::line(10), 0).unwrap();
        assert_eq!((p.first_kept, p.last_kept), (-2, 3));
        assert_eq!(window_string(&p.config, -4, 5), "0000101111");
        // Merged edges sit between the 3rd/4th and 5th/6th kept sites.
        assert_eq!(p.censored.edges.iter().copied().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(p.config.blocking_index().unwrap(), 0);
    }

    #[test]
    fn chi_examples() {
        let p = project_chi_star(&ms("2₃12₄"), &[], Topology::line(6), 0).unwrap();
        assert_eq!(window_string(&p.config, -2, 3), "000111");
        assert_eq!((p.first_kept, p.last_kept), (0, 1));
        assert!(p.censored.contains(0) && p.censored.contains(-1) && p.censored.contains(1));

        let all_first = project_chi_star(&ms("1111"), &[], Topology::line(6), 0).unwrap();
        assert_eq!(all_first.config, Configuration::ground_state(Topology::line(6), 0));

        // Third, second, empty, fourth, first, first-type, fifth with exits (0, 1).
        let chi = ms("2₃2₂·2₄12₁2₅");
        let p = project_chi_star(&chi, &[false, true], Topology::line(12), 0).unwrap();
        let seq: String = (p.first_kept..=p.last_kept).map(|x| if p.config.get(x) { '1' } else { '0' }).collect();
        assert_eq!(seq, "0100101");
        let open: Vec<i64> = (p.first_kept - 1..=p.last_kept).filter(|&e| !p.censored.contains(e)).collect();
        // Kept chi sites occupy the last five positions; of their four inner edges, the ones
        // across the deleted empty and first-class sites are merged.
        let base = p.first_kept + 2;
        assert_eq!(open, vec![base, base + 3]);
        assert!(project_chi_star(&ms("2"), &[], Topology::line(4), 0).is_err());
    }

    #[test]
    fn overflow_detected() {
        assert!(matches!(project_xi_star(&ms("2222"), Topology::line(3), 0), Err(LatticeError::WindowOverflow { .. })));
    }
}
