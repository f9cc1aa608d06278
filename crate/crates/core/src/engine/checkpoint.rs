//! Binary snapshot of an ensemble. Little-endian throughout, after the magic header `XLAB1`.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use super::clock::{ClockId, ClockKind, ClockState, ClockStream};
use super::{BoundaryCounts, CensoringSchedule, EngineError, Ensemble, Rates};
use crate::lattice::{CensoredEdges, Configuration, Topology};
use crate::params::BoundaryParams;

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"XLAB1";

#[derive(Default)]
struct Out(Vec<u8>);

impl Out {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u128(&mut self, v: u128) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fn opt_i64(&mut self, v: Option<i64>) {
        match v {
            Some(x) => {
                self.u8(1);
                self.i64(x);
            }
            None => self.u8(0),
        }
    }
    fn params(&mut self, p: &BoundaryParams) {
        for v in [p.p, p.alpha, p.beta, p.gamma, p.delta] {
            self.f64(v);
        }
    }
}

struct In<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn corrupt(what: &str) -> EngineError {
    EngineError::Checkpoint(format!("truncated or corrupt {what}"))
}

impl<'a> In<'a> {
    fn take<const K: usize>(&mut self, what: &str) -> Result<[u8; K], EngineError> {
        let end = self.pos + K;
        let bytes = self.buf.get(self.pos..end).ok_or_else(|| corrupt(what))?;
        self.pos = end;
        Ok(bytes.try_into().expect("length checked"))
    }
    fn u8(&mut self, what: &str) -> Result<u8, EngineError> {
        Ok(self.take::<1>(what)?[0])
    }
    fn u64(&mut self, what: &str) -> Result<u64, EngineError> {
        Ok(u64::from_le_bytes(self.take(what)?))
    }
    fn len(&mut self, what: &str) -> Result<usize, EngineError> {
        let n = self.u64(what)?;
        // Every stored element takes at least one byte.
        if n as usize > self.buf.len() {
            return Err(corrupt(what));
        }
        Ok(n as usize)
    }
    fn i64(&mut self, what: &str) -> Result<i64, EngineError> {
        Ok(i64::from_le_bytes(self.take(what)?))
    }
    fn u128(&mut self, what: &str) -> Result<u128, EngineError> {
        Ok(u128::from_le_bytes(self.take(what)?))
    }
    fn f64(&mut self, what: &str) -> Result<f64, EngineError> {
        Ok(f64::from_bits(u64::from_le_bytes(self.take(what)?)))
    }
    fn opt_i64(&mut self, what: &str) -> Result<Option<i64>, EngineError> {
        match self.u8(what)? {
            0 => Ok(None),
            1 => Ok(Some(self.i64(what)?)),
            _ => Err(corrupt(what)),
        }
    }
    fn params(&mut self) -> Result<BoundaryParams, EngineError> {
        let mut v = [0.0; 5];
        for x in v.iter_mut() {
            *x = self.f64("parameters")?;
        }
        Ok(BoundaryParams { p: v[0], alpha: v[1], beta: v[2], gamma: v[3], delta: v[4] })
    }
}

impl Ensemble {
    /// Writes the full state, including the position of every clock's random stream, so that
    /// a restored ensemble continues exactly as this one would.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut o = Out::default();
        o.0.extend_from_slice(CHECKPOINT_MAGIC);
        match self.topology {
            Topology::Segment(n) => {
                o.u8(0);
                o.u64(n as u64);
            }
            Topology::HalfLineWindow(n) => {
                o.u8(1);
                o.u64(n as u64);
            }
            Topology::LineWindow { lo, hi } => {
                o.u8(2);
                o.i64(lo);
                o.i64(hi);
            }
        }
        o.f64(self.time);
        o.u64(self.events);
        for v in [self.max.alpha, self.max.gamma, self.max.delta, self.max.beta] {
            o.f64(v);
        }
        o.u64(self.replicas.len() as u64);
        for ((c, p), k) in self.replicas.iter().zip(&self.params).zip(&self.counts) {
            o.params(p);
            for v in [k.entered_left, k.exited_left, k.entered_right, k.exited_right] {
                o.u64(v);
            }
            o.0.extend(c.bits());
        }
        match self.pair {
            Some((i, j, n)) => {
                o.u8(1);
                for v in [i, j, n] {
                    o.u64(v as u64);
                }
            }
            None => o.u8(0),
        }
        o.u64(self.censoring.pieces.len() as u64);
        for (start, set) in &self.censoring.pieces {
            o.f64(*start);
            o.opt_i64(set.below);
            o.opt_i64(set.from);
            o.u64(set.edges.len() as u64);
            for &e in &set.edges {
                o.i64(e);
            }
        }
        o.u64(self.stream.seed());
        let clocks = self.stream.snapshot();
        o.u64(clocks.len() as u64);
        for c in clocks {
            o.i64(c.id.edge);
            o.u8(match c.id.kind {
                ClockKind::Edge => 0,
                ClockKind::Fill => 1,
                ClockKind::Clear => 2,
            });
            o.f64(c.rate);
            o.u128(c.word_pos);
            match c.next {
                Some(t) => {
                    o.u8(1);
                    o.f64(t);
                }
                None => o.u8(0),
            }
        }
        w.write_all(&o.0)
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self, EngineError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| EngineError::Checkpoint(e.to_string()))?;
        if !buf.starts_with(CHECKPOINT_MAGIC) {
            return Err(EngineError::Checkpoint("missing XLAB1 header".into()));
        }
        let mut i = In { buf: &buf, pos: CHECKPOINT_MAGIC.len() };
        let topology = match i.u8("topology")? {
            0 => Topology::Segment(i.u64("topology")? as usize),
            1 => Topology::HalfLineWindow(i.u64("topology")? as usize),
            2 => Topology::LineWindow { lo: i.i64("topology")?, hi: i.i64("topology")? },
            _ => return Err(corrupt("topology")),
        };
        if topology.len() > buf.len() {
            return Err(corrupt("topology"));
        }
        let time = i.f64("time")?;
        let events = i.u64("event count")?;
        let max = Rates { alpha: i.f64("rates")?, gamma: i.f64("rates")?, delta: i.f64("rates")?, beta: i.f64("rates")? };
        let n = i.len("replicas")?;
        let (mut replicas, mut params, mut counts) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..n {
            params.push(i.params()?);
            counts.push(BoundaryCounts {
                entered_left: i.u64("counts")?,
                exited_left: i.u64("counts")?,
                entered_right: i.u64("counts")?,
                exited_right: i.u64("counts")?,
            });
            let end = i.pos + topology.len();
            let bits = buf.get(i.pos..end).ok_or_else(|| corrupt("configuration"))?;
            if bits.iter().any(|&b| b > 1) {
                return Err(corrupt("configuration"));
            }
            replicas.push(Configuration::from_bits(topology, bits));
            i.pos = end;
        }
        if replicas.is_empty() {
            return Err(EngineError::NoReplicas);
        }
        let pair = match i.u8("pair")? {
            0 => None,
            1 => {
                let (a, b, c) = (i.u64("pair")? as usize, i.u64("pair")? as usize, i.u64("pair")? as usize);
                if a >= n || b >= n {
                    return Err(corrupt("pair"));
                }
                Some((a, b, c))
            }
            _ => return Err(corrupt("pair")),
        };
        let mut censoring = CensoringSchedule::none();
        for _ in 0..i.len("censoring")? {
            let start = i.f64("censoring")?;
            let below = i.opt_i64("censoring")?;
            let from = i.opt_i64("censoring")?;
            let mut edges = BTreeSet::new();
            for _ in 0..i.len("censoring")? {
                edges.insert(i.i64("censoring")?);
            }
            censoring.pieces.push((start, CensoredEdges { edges, below, from }));
        }
        let seed = i.u64("seed")?;
        let mut states = Vec::new();
        for _ in 0..i.len("clocks")? {
            let edge = i.i64("clock")?;
            let kind = match i.u8("clock")? {
                0 => ClockKind::Edge,
                1 => ClockKind::Fill,
                2 => ClockKind::Clear,
                _ => return Err(corrupt("clock")),
            };
            let rate = i.f64("clock")?;
            let word_pos = i.u128("clock")?;
            let next = match i.u8("clock")? {
                0 => None,
                1 => Some(i.f64("clock")?),
                _ => return Err(corrupt("clock")),
            };
            states.push(ClockState { id: ClockId { edge, kind }, rate, word_pos, next });
        }
        if !states.windows(2).all(|w| w[0].id < w[1].id) {
            return Err(corrupt("clock order"));
        }
        if i.pos != buf.len() {
            return Err(EngineError::Checkpoint("trailing bytes".into()));
        }
        Ok(Self {
            topology,
            replicas,
            params,
            max,
            stream: ClockStream::restore(seed, &states),
            time,
            censoring,
            changed: vec![false; n],
            counts,
            pair,
            events,
        })
    }
}
