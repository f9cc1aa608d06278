//! Named experiment presets with seeded replica farms, and their CSV and JSON outputs.

mod presets;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EngineError;
use crate::exact::ExactError;
use crate::lattice::LatticeError;
use crate::observables::ObservableError;
use crate::params::{BoundaryParams, ParamError};
use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown preset `{0}`; run `xlab list` for the catalog")]
    UnknownPreset(String),
    #[error("replica count must be positive")]
    NoReplicas,
    #[error("invalid spec: {0}")]
    BadSpec(String),
    #[error("config: {0}")]
    Config(String),
    #[error("preset {preset}, replica {replica} (seed {seed}): {source}")]
    Run {
        preset: String,
        replica: usize,
        seed: u64,
        #[source]
        source: EngineError,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// One experiment. `sizes` are segment lengths, window widths or distances depending on the
/// preset; `horizon` is the simulated time (or the time cap for hitting-time presets);
/// `options` holds preset-specific numeric knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<BoundaryParams>,
    pub sizes: Vec<usize>,
    pub replicas: usize,
    pub horizon: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub options: BTreeMap<String, f64>,
}

/// Partial spec read from a config file; present keys replace the preset defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecOverrides {
    pub preset: Option<String>,
    pub params: Option<BoundaryParams>,
    pub sizes: Option<Vec<usize>>,
    pub replicas: Option<usize>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub options: BTreeMap<String, f64>,
}

impl SpecOverrides {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }
}

impl ExperimentSpec {
    /// The preset's default spec, which reproduces its acceptance run.
    pub fn preset_default(name: &str) -> Result<Self> {
        let info = find_preset(name)?;
        Ok(Self {
            preset: info.name.to_string(),
            params: None,
            sizes: info.sizes.to_vec(),
            replicas: info.replicas,
            horizon: info.horizon,
            seed: 1,
            out: None,
            options: BTreeMap::new(),
        })
    }

    pub fn apply(mut self, o: SpecOverrides) -> Result<Self> {
        if let Some(p) = o.preset {
            if p != self.preset {
                return Err(HarnessError::Config(format!("config names preset `{p}` but `{}` was requested", self.preset)));
            }
        }
        if o.params.is_some() {
            self.params = o.params;
        }
        if let Some(s) = o.sizes {
            self.sizes = s;
        }
        if let Some(r) = o.replicas {
            self.replicas = r;
        }
        if let Some(h) = o.horizon {
            self.horizon = h;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if o.out.is_some() {
            self.out = o.out;
        }
        self.options.extend(o.options);
        Ok(self)
    }

    pub fn option(&self, key: &str, default: f64) -> f64 {
        self.options.get(key).copied().unwrap_or(default)
    }

    fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(HarnessError::NoReplicas);
        }
        if self.sizes.is_empty() {
            return Err(HarnessError::BadSpec("sizes is empty".into()));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(HarnessError::BadSpec(format!("horizon {}", self.horizon)));
        }
        if let Some(p) = &self.params {
            p.validate()?;
        }
        Ok(())
    }

    /// Seed of replica `index` of the sub-experiment `tag`.
    pub fn replica_seed(&self, tag: &str, index: usize) -> u64 {
        derive_seed(self.seed, &format!("{}/{tag}", self.preset), index as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    /// `None` for descriptive metrics without a pass rule.
    pub pass: Option<bool>,
    /// Acceptance criterion this metric feeds.
    pub criterion: u32,
}

impl Metric {
    pub fn info(criterion: u32, name: impl Into<String>, value: f64) -> Self {
        Self { name: name.into(), value, stderr: None, target: None, pass: None, criterion }
    }

    pub fn check(criterion: u32, name: impl Into<String>, value: f64, pass: bool) -> Self {
        Self { pass: Some(pass), ..Self::info(criterion, name, value) }
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_stderr(mut self, stderr: f64) -> Self {
        self.stderr = Some(stderr);
        self
    }
}

/// A table written as one CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub preset: String,
    pub inputs: ExperimentSpec,
    pub metrics: Vec<Metric>,
    /// Written as CSV files beside the summary.
    #[serde(default, skip_serializing)]
    pub series: Vec<Series>,
    /// Kept out of the summary so that reruns stay byte-identical.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl ResultRecord {
    /// False if any metric with a pass rule failed.
    pub fn passed(&self) -> bool {
        self.metrics.iter().all(|m| m.pass != Some(false))
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn metrics_for(&self, criterion: u32) -> impl Iterator<Item = &Metric> {
        self.metrics.iter().filter(move |m| m.criterion == criterion)
    }

    pub fn summary_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes `summary.json` and one CSV per series into `dir`, creating it if needed.
    pub fn write_outputs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let summary = dir.join("summary.json");
        fs::File::create(&summary)?.write_all(self.summary_json()?.as_bytes())?;
        written.push(summary);
        for s in &self.series {
            let path = dir.join(format!("{}.csv", s.name));
            fs::File::create(&path)?.write_all(s.to_csv().as_bytes())?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Catalog entry. `sizes`, `replicas` and `horizon` are the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    pub criteria: &'static [u32],
    pub result: &'static str,
    pub sizes: &'static [usize],
    pub replicas: usize,
    pub horizon: f64,
}

const CATALOG: &[PresetInfo] = &[
    PresetInfo {
        name: "product-measure",
        criteria: &[1],
        result: "on the curve a*b = 1 the stationary law is Bernoulli product with density 1/(1+a)",
        sizes: &[2, 3, 4, 5, 6, 7, 8],
        replicas: 1,
        horizon: 0.0,
    },
    PresetInfo {
        name: "reversible-measure",
        criteria: &[2],
        result: "with the left end closed the stationary law is reversible with an explicit weight",
        sizes: &[2, 3, 4, 5, 6, 7, 8],
        replicas: 1,
        horizon: 0.0,
    },
    PresetInfo {
        name: "flux-phase-sweep",
        criteria: &[3],
        result: "long-run current (2p-1)/4 at maximal current, (2p-1)m/(1+m)^2 with m = max(a, b) otherwise",
        sizes: &[200],
        replicas: 1,
        horizon: 2e5,
    },
    PresetInfo {
        name: "halfline-current",
        criteria: &[4],
        result: "current into the half-line tends to (2p-1) max(a,1)/(max(a,1)+1)^2",
        sizes: &[500],
        replicas: 200,
        horizon: 800.0,
    },
    PresetInfo {
        name: "cutoff-one-blocked",
        criteria: &[5],
        result: "with one blocked entry the mixing time is N (max(b,1)+1)^2/((2p-1) max(b,1)) to leading order",
        sizes: &[500, 1000],
        replicas: 100,
        horizon: 1e6,
    },
    PresetInfo {
        name: "shock-front",
        criteria: &[5],
        result: "a block of particles empties through the right end as a shock travelling at linear speed",
        sizes: &[1000],
        replicas: 4,
        horizon: 1e5,
    },
    PresetInfo {
        name: "reverse-bias-scaling",
        criteria: &[6],
        result: "against the bias ln t_mix grows linearly in N with slope ln(p/(1-p))/2 when both ends can empty",
        sizes: &[6, 7, 8, 9, 10, 11, 12],
        replicas: 1,
        horizon: 0.0,
    },
    PresetInfo {
        name: "wilson-bounds",
        criteria: &[7],
        result: "symmetric bulk: t_mix is N^2 ln N / pi^2 with both ends open and 4 N^2 ln N / pi^2 with one end closed",
        sizes: &[32, 64, 128, 256, 512, 1024],
        replicas: 1,
        horizon: 0.0,
    },
    PresetInfo {
        name: "triple-point-bound",
        criteria: &[8],
        result: "at the triple point t_mix is at most of order N^3, via the gap of the symmetrized chain",
        sizes: &[4, 5, 6, 7, 8, 9, 10],
        replicas: 1,
        horizon: 0.0,
    },
    PresetInfo {
        name: "monotone-coupling",
        criteria: &[9],
        result: "the grand coupling preserves the componentwise and height orders under ordered boundary rates",
        sizes: &[20],
        replicas: 1000,
        horizon: 100.0,
    },
    PresetInfo {
        name: "censoring",
        criteria: &[10],
        result: "suppressing updates on a fixed schedule never brings the law from the full state closer to equilibrium",
        sizes: &[4, 5],
        replicas: 1,
        horizon: 8.0,
    },
    PresetInfo {
        name: "blocking-confinement",
        criteria: &[11],
        result: "from the ground state on the line, leaving [-x, x] takes time growing like (p/(1-p))^x",
        sizes: &[4, 5, 6, 7, 8],
        replicas: 10_000,
        horizon: 1e9,
    },
    PresetInfo {
        name: "kac-return",
        criteria: &[12],
        result: "mean return time equals 1/(stationary weight * exit rate)",
        sizes: &[4],
        replicas: 20_000,
        horizon: 0.0,
    },
    PresetInfo {
        name: "four-process",
        criteria: &[13],
        result: "in the high density phase the second-class current at the left end forces the extremal pair to couple",
        sizes: &[100],
        replicas: 200,
        horizon: 1e6,
    },
];

pub fn list_presets() -> &'static [PresetInfo] {
    CATALOG
}

fn find_preset(name: &str) -> Result<&'static PresetInfo> {
    CATALOG.iter().find(|p| p.name == name).ok_or_else(|| HarnessError::UnknownPreset(name.to_string()))
}

/// Runs a preset and, if `spec.out` is set, writes its outputs there.
pub fn run_preset(spec: &ExperimentSpec) -> Result<ResultRecord> {
    find_preset(&spec.preset)?;
    spec.validate()?;
    let start = Instant::now();
    let (metrics, series) = presets::dispatch(spec)?;
    let record = ResultRecord {
        preset: spec.preset.clone(),
        inputs: ExperimentSpec { out: None, ..spec.clone() },
        metrics,
        series,
        wall_clock: start.elapsed(),
    };
    if let Some(dir) = &spec.out {
        record.write_outputs(dir)?;
    }
    Ok(record)
}

/// Four-process coupling in the high density phase over `replicas` independent runs.
pub fn run_four_process_coupling(params: BoundaryParams, n: usize, replicas: usize, horizon: f64, seed: u64) -> Result<ResultRecord> {
    let spec =
        ExperimentSpec { params: Some(params), sizes: vec![n], replicas, horizon, seed, ..ExperimentSpec::preset_default("four-process")? };
    run_preset(&spec)
}

/// Runs `f(index, seed)` for every replica in parallel and returns the results in index order.
/// The first failing replica (by index) determines the error, tagged with its seed.
fn farm<T, F>(spec: &ExperimentSpec, tag: &str, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    let results: Vec<_> = (0..count)
        .into_par_iter()
        .map(|i| {
            let seed = spec.replica_seed(tag, i);
            f(i, seed).map_err(|e| {
                let source = match e {
                    HarnessError::Engine(source) | HarnessError::Observable(ObservableError::Engine(source)) => source,
                    other => return other,
                };
                HarnessError::Run { preset: spec.preset.clone(), replica: i, seed, source }
            })
        })
        .collect();
    results.into_iter().collect()
}

/// Mean and standard error of the mean.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_invariants() {
        let names: Vec<&str> = list_presets().iter().map(|p| p.name).collect();
        assert!(names.contains(&"reverse-bias-scaling"));
        assert!(names.contains(&"triple-point-bound"));
        assert!(list_presets().iter().all(|p| !p.criteria.is_empty()));
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
    }

    #[test]
    fn zero_replicas_rejected() {
        let spec = ExperimentSpec { replicas: 0, ..ExperimentSpec::preset_default("flux-phase-sweep").unwrap() };
        assert!(matches!(run_preset(&spec), Err(HarnessError::NoReplicas)));
    }

    #[test]
    fn unknown_preset_rejected() {
        assert!(matches!(ExperimentSpec::preset_default("nope"), Err(HarnessError::UnknownPreset(_))));
        let spec = ExperimentSpec { preset: "nope".into(), ..ExperimentSpec::preset_default("censoring").unwrap() };
        assert!(matches!(run_preset(&spec), Err(HarnessError::UnknownPreset(_))));
    }

    #[test]
    fn overrides_apply() {
        let o = SpecOverrides::from_json(r#"{"sizes": [3], "options": {"eps": 0.1}}"#).unwrap();
        let spec = ExperimentSpec::preset_default("censoring").unwrap().apply(o).unwrap();
        assert_eq!(spec.sizes, vec![3]);
        assert_eq!(spec.option("eps", 0.25), 0.1);
        assert!(SpecOverrides::from_json(r#"{"sized": [3]}"#).is_err());
        let other = SpecOverrides { preset: Some("kac-return".into()), ..Default::default() };
        assert!(ExperimentSpec::preset_default("censoring").unwrap().apply(other).is_err());
    }

    #[test]
    fn series_csv() {
        let mut s = Series::new("x", &["t", "value", "stderr"]);
        s.push(vec![0.5, 1.0, 0.25]);
        assert_eq!(s.to_csv(), "t,value,stderr\n0.5,1,0.25\n");
    }

    #[test]
    fn mean_and_error() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
