use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::SweepSpec;
use super::sweep::ResultRow;
use crate::Result;

pub const CSV_HEADER: [&str; 10] = [
    "scheme",
    "param_name",
    "param_value",
    "esr",
    "min_common_rate",
    "private_sum_rate",
    "mc_stderr",
    "n_trials",
    "n_drops",
    "skipped_singular",
];

/// 17 significant digits, enough to round-trip any `f64`.
fn full_precision(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the rows as CSV with a header line. Timing is left out so that
/// identical runs produce identical bytes.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.scheme.as_str().to_string(),
            r.param_name.clone(),
            full_precision(r.param_value),
            full_precision(r.esr),
            full_precision(r.min_common_rate),
            full_precision(r.private_sum_rate),
            full_precision(r.mc_stderr),
            r.n_trials.to_string(),
            r.n_drops.to_string(),
            r.skipped_singular.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// JSON document: the sweep that was run followed by its rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub spec: SweepSpec,
    pub rows: Vec<ResultRow>,
}

pub fn write_json<W: Write>(spec: &SweepSpec, rows: &[ResultRow], mut out: W) -> Result<()> {
    let doc = SweepOutput { spec: spec.clone(), rows: rows.to_vec() };
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    Ok(())
}
