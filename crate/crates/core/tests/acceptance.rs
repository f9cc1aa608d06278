//! Runs every preset at its default spec and reports one verdict per acceptance criterion.
//! Heavy: expect on the order of fifteen minutes on a few cores.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use xlab_core::harness::{list_presets, run_preset, ExperimentSpec, ResultRecord, SpecOverrides};

fn describe(record: &ResultRecord, criterion: u32) -> String {
    let failed: Vec<String> = record
        .metrics_for(criterion)
        .filter(|m| m.pass == Some(false))
        .map(|m| match m.target {
            Some(t) => format!("{}={:.4} (target {t})", m.name, m.value),
            None => format!("{}={:.4}", m.name, m.value),
        })
        .collect();
    let checked = record.metrics_for(criterion).filter(|m| m.pass.is_some()).count();
    if failed.is_empty() {
        format!("{}: {checked} checks", record.preset)
    } else {
        format!("{}: failed {}", record.preset, failed.join(", "))
    }
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        out.insert(entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path()).unwrap());
    }
    out
}

/// Same spec twice, into two directories; every file must match byte for byte.
fn rerun_identical(preset: &str, replicas: Option<usize>) -> Result<usize, String> {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut contents = Vec::new();
    for d in &dirs {
        let spec = ExperimentSpec::preset_default(preset)
            .and_then(|s| s.apply(SpecOverrides { replicas, out: Some(d.path().to_path_buf()), ..Default::default() }))
            .map_err(|e| e.to_string())?;
        run_preset(&spec).map_err(|e| e.to_string())?;
        contents.push(dir_bytes(d.path()));
    }
    if contents[0] != contents[1] {
        return Err(format!("{preset}: outputs differ"));
    }
    Ok(contents[0].len())
}

#[test]
fn all_criteria() {
    let mut verdicts: BTreeMap<u32, Vec<(bool, String)>> = BTreeMap::new();
    for info in list_presets() {
        let spec = ExperimentSpec::preset_default(info.name).unwrap();
        let start = Instant::now();
        let record = match run_preset(&spec) {
            Ok(r) => r,
            Err(e) => {
                for &c in info.criteria {
                    verdicts.entry(c).or_default().push((false, format!("{}: error {e}", info.name)));
                }
                continue;
            }
        };
        eprintln!("{} finished in {:.1?}", info.name, start.elapsed());
        for &c in info.criteria {
            let ok = record.metrics_for(c).all(|m| m.pass != Some(false)) && record.metrics_for(c).any(|m| m.pass.is_some());
            verdicts.entry(c).or_default().push((ok, describe(&record, c)));
        }
    }

    let mut files = 0;
    let mut det_ok = true;
    let mut det_notes = Vec::new();
    for (preset, replicas) in [
        ("product-measure", None),
        ("censoring", None),
        ("monotone-coupling", Some(50)),
        ("kac-return", Some(2000)),
        ("shock-front", None),
        ("halfline-current", Some(6)),
        ("four-process", Some(3)),
    ] {
        match rerun_identical(preset, replicas) {
            Ok(n) => files += n,
            Err(e) => {
                det_ok = false;
                det_notes.push(e);
            }
        }
    }
    let note = if det_ok { format!("{files} files identical across reruns") } else { det_notes.join("; ") };
    verdicts.entry(14).or_default().push((det_ok, note));

    let mut failed = Vec::new();
    for c in 1..=14u32 {
        let entries = verdicts.get(&c).cloned().unwrap_or_default();
        let ok = !entries.is_empty() && entries.iter().all(|(ok, _)| *ok);
        let detail: Vec<String> = entries.into_iter().map(|(_, d)| d).collect();
        println!("criterion {c:>2}: {} | {}", if ok { "PASS" } else { "FAIL" }, detail.join(" | "));
        if !ok {
            failed.push(c);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
