//! CSV files exchanged by the subcommands.
//!
//! All files are headered, UTF-8, LF-terminated, with floats written to nine
//! significant digits.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use bptrack::{GroundTruth, Measurement, MeasurementFrame, TargetState};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// `x` to nine significant digits, in the shortest of fixed or scientific
/// notation (like C's `%.9g`).
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    let sci = format!("{x:.8e}");
    // Rounding may carry into the next decade, e.g. 9.999999999 -> 1.0e1.
    let exp = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse::<i32>().ok())
        .unwrap_or(exp);
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let (mantissa, e) = sci.split_once('e').expect("scientific format");
        format!("{}e{}", trim_zeros(mantissa.to_string()), e)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// One measurement, or an empty scan of sensor `s` at time `n` when range
/// and bearing are blank. Every scan appears at least once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRow {
    pub run: usize,
    pub n: usize,
    pub s: usize,
    pub range_m: Option<f64>,
    pub bearing_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub run: usize,
    pub n: usize,
    pub target: usize,
    pub p1: f64,
    pub p2: f64,
    pub v1: f64,
    pub v2: f64,
}

/// Per-run, per-step tracking result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run: usize,
    pub n: usize,
    pub ospa: f64,
    pub card_est: usize,
    pub card_true: usize,
    pub step_ms: f64,
}

/// Monte Carlo average at one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MospaRow {
    pub n: usize,
    pub mospa: f64,
    pub mean_card_est: f64,
    pub mean_card_true: f64,
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_frames<W: Write>(out: W, rows: &[FrameRow]) -> Result<(), CliError> {
    write_rows(
        out,
        &["run", "n", "s", "range_m", "bearing_deg"],
        rows.iter().map(|r| {
            let opt = |v: Option<f64>| v.map(fmt_sig).unwrap_or_default();
            vec![r.run.to_string(), r.n.to_string(), r.s.to_string(), opt(r.range_m), opt(r.bearing_deg)]
        }),
    )
}

pub fn write_truth<W: Write>(out: W, rows: &[TruthRow]) -> Result<(), CliError> {
    write_rows(
        out,
        &["run", "n", "target", "p1", "p2", "v1", "v2"],
        rows.iter().map(|r| {
            vec![
                r.run.to_string(),
                r.n.to_string(),
                r.target.to_string(),
                fmt_sig(r.p1),
                fmt_sig(r.p2),
                fmt_sig(r.v1),
                fmt_sig(r.v2),
            ]
        }),
    )
}

pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> Result<(), CliError> {
    write_rows(
        out,
        &["run", "n", "ospa", "card_est", "card_true", "step_ms"],
        rows.iter().map(|r| {
            vec![
                r.run.to_string(),
                r.n.to_string(),
                fmt_sig(r.ospa),
                r.card_est.to_string(),
                r.card_true.to_string(),
                fmt_sig(r.step_ms),
            ]
        }),
    )
}

pub fn write_mospa<W: Write>(out: W, rows: &[MospaRow]) -> Result<(), CliError> {
    write_rows(
        out,
        &["n", "mospa", "mean_card_est", "mean_card_true"],
        rows.iter().map(|r| {
            vec![r.n.to_string(), fmt_sig(r.mospa), fmt_sig(r.mean_card_est), fmt_sig(r.mean_card_true)]
        }),
    )
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(input: R, what: &str) -> Result<Vec<T>, CliError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| CliError::Data(format!("{what} record {}: {e}", i + 1))))
        .collect()
}

pub fn read_frames<R: Read>(input: R) -> Result<Vec<FrameRow>, CliError> {
    read_rows(input, "frame")
}

pub fn read_truth<R: Read>(input: R) -> Result<Vec<TruthRow>, CliError> {
    read_rows(input, "truth")
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<ResultRow>, CliError> {
    read_rows(input, "result")
}

pub fn frame_rows(run: usize, n: usize, frame: &MeasurementFrame) -> Vec<FrameRow> {
    frame
        .iter()
        .enumerate()
        .flat_map(|(s, zs)| {
            let empty = zs.is_empty().then_some(FrameRow {
                run,
                n,
                s,
                range_m: None,
                bearing_deg: None,
            });
            zs.iter()
                .map(move |z| FrameRow {
                    run,
                    n,
                    s,
                    range_m: Some(z.range),
                    bearing_deg: Some(z.bearing),
                })
                .chain(empty)
        })
        .collect()
}

pub fn truth_rows(run: usize, truth: &GroundTruth) -> Vec<TruthRow> {
    (1..=truth.num_steps())
        .flat_map(|n| {
            truth.at(n).iter().map(move |(id, x)| TruthRow {
                run,
                n,
                target: *id,
                p1: x.p1,
                p2: x.p2,
                v1: x.v1,
                v2: x.v2,
            })
        })
        .collect()
}

/// Groups frame rows into per-run scan sequences of `n_steps` frames with
/// `num_sensors` sensors each. Every scan of every run must be present.
pub fn assemble_frames(
    rows: &[FrameRow],
    n_steps: usize,
    num_sensors: usize,
) -> Result<BTreeMap<usize, Vec<MeasurementFrame>>, CliError> {
    let mut runs: BTreeMap<usize, Vec<MeasurementFrame>> = BTreeMap::new();
    let mut seen: BTreeMap<usize, Vec<bool>> = BTreeMap::new();
    for r in rows {
        if r.s >= num_sensors {
            return Err(CliError::Data(format!(
                "frame row (run {}, n {}) refers to sensor {} but the configuration has {num_sensors} sensors",
                r.run, r.n, r.s
            )));
        }
        if r.n == 0 || r.n > n_steps {
            return Err(CliError::Data(format!("frame row time {} outside 1..={n_steps}", r.n)));
        }
        seen.entry(r.run).or_insert_with(|| vec![false; n_steps * num_sensors])[(r.n - 1) * num_sensors + r.s] = true;
        let frames = runs
            .entry(r.run)
            .or_insert_with(|| vec![MeasurementFrame::empty(num_sensors); n_steps]);
        match (r.range_m, r.bearing_deg) {
            (Some(range), Some(bearing)) => {
                let z = Measurement::new(range, bearing).map_err(|e| CliError::Data(e.to_string()))?;
                frames[r.n - 1].sensor_mut(r.s).push(z);
            }
            (None, None) => {}
            _ => {
                return Err(CliError::Data(format!(
                    "frame row (run {}, n {}, s {}) has only one of range and bearing",
                    r.run, r.n, r.s
                )))
            }
        }
    }
    for (run, flags) in &seen {
        if let Some(i) = flags.iter().position(|f| !f) {
            return Err(CliError::Data(format!(
                "run {run} has no record for scan n {} of sensor {}",
                i / num_sensors + 1,
                i % num_sensors
            )));
        }
    }
    Ok(runs)
}

/// Groups truth rows into per-run ground truth over `n_steps` steps.
pub fn assemble_truth(rows: &[TruthRow], n_steps: usize) -> Result<BTreeMap<usize, GroundTruth>, CliError> {
    let mut runs: BTreeMap<usize, Vec<Vec<(usize, TargetState)>>> = BTreeMap::new();
    for r in rows {
        if r.n == 0 || r.n > n_steps {
            return Err(CliError::Data(format!("truth row time {} outside 1..={n_steps}", r.n)));
        }
        runs.entry(r.run).or_insert_with(|| vec![Vec::new(); n_steps])[r.n - 1]
            .push((r.target, TargetState::new(r.p1, r.p2, r.v1, r.v2)));
    }
    Ok(runs.into_iter().map(|(k, v)| (k, GroundTruth::new(v))).collect())
}
