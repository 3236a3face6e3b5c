use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ChannelModel, SweepParameter, SweepSpec, SystemConfig};
use crate::asymptotics::{ergodic_common_rate, ergodic_private_rate, AsymptoticParams};
use crate::channel::{drop_users, estimation_error_variance, noise_power, ChannelStats};
use crate::precoding::{PowerSplit, Scheme};
use crate::rng::{stream, Purpose, StreamKey};
use crate::rsma::{ergodic_rates_sweep, ErgodicReport, LinkConfig};
use crate::specfun::DEFAULT_TOL;
use crate::summation::{CompensatedSum, Moments};
use crate::Result;

/// Ergodic rates of one scheme at one grid point, averaged over user drops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub param_name: String,
    pub param_value: f64,
    /// `min_common_rate + private_sum_rate`.
    pub esr: f64,
    pub min_common_rate: f64,
    pub private_sum_rate: f64,
    /// Trial-level standard error of the ESR for one drop, spread across drops otherwise.
    pub mc_stderr: f64,
    pub n_trials: usize,
    /// Drops that contributed to the averages.
    pub n_drops: usize,
    pub skipped_singular: usize,
    /// Per-user average of the ergodic common rates.
    pub mean_common_rate: f64,
    /// Mean over trials of the instantaneous sum rate.
    pub esr_instantaneous: f64,
    /// Large-system prediction, for matched-filter schemes on the symmetric channel.
    pub asymptotic_esr: Option<f64>,
    /// Seconds spent on the grid-point group this row belongs to.
    pub wall_time_s: f64,
}

/// Channel statistics and noise powers of drop `drop`.
fn drop_stats(cfg: &SystemConfig, drop: usize) -> Result<(ChannelStats, Vec<f64>)> {
    let err = match cfg.training_symbols {
        Some(n) => estimation_error_variance(cfg.pt, n)?,
        None => 0.0,
    };
    match cfg.channel {
        ChannelModel::Symmetric { beta, sigma2 } => {
            Ok((ChannelStats::symmetric(cfg.antennas, cfg.users, beta, err)?, vec![sigma2; cfg.users]))
        }
        ChannelModel::MacroCell(cell) => {
            let mut rng = stream(cfg.seed, Purpose::Drops, drop as u64, 0);
            let radii = drop_users(cfg.users, cell.r_in, cell.r_out, &mut rng)?;
            let beta = radii.iter().map(|&r| cell.pathloss(r)).collect();
            let stats = ChannelStats::new(beta, vec![err; cfg.users], cfg.antennas)?;
            let sigma2 = noise_power(cell.noise_density_dbm_hz, cell.bandwidth_hz)?;
            Ok((stats, vec![sigma2; cfg.users]))
        }
    }
}

fn drop_reports(
    cfg: &SystemConfig,
    scheme: Scheme,
    drop: usize,
    rhos: &[PowerSplit],
    trials: usize,
) -> Result<Option<Vec<ErgodicReport>>> {
    let (stats, sigma2) = drop_stats(cfg, drop)?;
    let link = LinkConfig {
        scheme,
        pt: cfg.pt,
        sigma2,
        rzf_reg: cfg.rzf_reg,
        normalization_trials: cfg.normalization_trials,
        key: StreamKey::new(cfg.seed, drop as u64),
    };
    match ergodic_rates_sweep(&link, &stats, rhos, trials) {
        Ok(r) => Ok(Some(r)),
        Err(e) if e.is_singular() => Ok(None),
        Err(e) => Err(e),
    }
}

fn asymptotic_esr(cfg: &SystemConfig, scheme: Scheme, rho: PowerSplit) -> Result<Option<f64>> {
    let ChannelModel::Symmetric { sigma2, .. } = cfg.channel else {
        return Ok(None);
    };
    if !scheme.is_matched_filter() {
        return Ok(None);
    }
    let (stats, _) = drop_stats(cfg, 0)?;
    let p = AsymptoticParams::from_stats(&stats, 0, sigma2, cfg.pt, rho)?;
    Ok(Some(ergodic_common_rate(&p, DEFAULT_TOL)? + cfg.users as f64 * ergodic_private_rate(&p)))
}

/// Rows for every power split in `rhos` at the operating point `cfg`.
fn evaluate(
    spec: &SweepSpec,
    cfg: &SystemConfig,
    scheme: Scheme,
    rhos: &[PowerSplit],
    values: &[f64],
) -> Result<Vec<ResultRow>> {
    let start = Instant::now();
    let per_drop: Vec<Option<Vec<ErgodicReport>>> = (0..spec.drops)
        .into_par_iter()
        .map(|d| drop_reports(cfg, scheme, d, rhos, spec.trials_per_point))
        .collect::<Result<_>>()?;
    let kept: Vec<&Vec<ErgodicReport>> = per_drop.iter().flatten().collect();
    let skipped = per_drop.len() - kept.len();
    let wall = start.elapsed().as_secs_f64();

    rhos.iter()
        .zip(values)
        .enumerate()
        .map(|(i, (&rho, &value))| {
            let (mut min_common, mut private, mut mean_common, mut inst) = Default::default();
            let mut esr = Moments::default();
            for reports in &kept {
                let r = &reports[i];
                CompensatedSum::add(&mut min_common, r.min_common);
                CompensatedSum::add(&mut private, r.private_sum);
                CompensatedSum::add(&mut mean_common, r.mean_common());
                CompensatedSum::add(&mut inst, r.esr_instantaneous);
                esr.push(r.esr);
            }
            let n = kept.len() as f64;
            let (min_common, private_sum): (f64, f64) = (min_common.value() / n, private.value() / n);
            let mc_stderr = match kept.as_slice() {
                [only] => only[i].esr_stderr,
                _ => esr.std_error(),
            };
            Ok(ResultRow {
                scheme,
                param_name: spec.swept_parameter.as_str().to_string(),
                param_value: value,
                esr: min_common + private_sum,
                min_common_rate: min_common,
                private_sum_rate: private_sum,
                mc_stderr,
                n_trials: spec.trials_per_point,
                n_drops: kept.len(),
                skipped_singular: skipped,
                mean_common_rate: mean_common.value() / n,
                esr_instantaneous: inst.value() / n,
                asymptotic_esr: asymptotic_esr(cfg, scheme, rho)?,
                wall_time_s: wall,
            })
        })
        .collect()
}

/// Evaluates every grid point for every scheme.
///
/// Rows come out grouped by grid point, then scheme. A power-split sweep
/// reuses the same fading realizations for every split.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let groups: Vec<(SystemConfig, Vec<f64>)> = if spec.swept_parameter == SweepParameter::Rho {
        vec![(spec.fixed.clone(), spec.grid.clone())]
    } else {
        spec.grid.iter().map(|&v| Ok((spec.fixed.at(spec.swept_parameter, v)?, vec![v]))).collect::<Result<_>>()?
    };
    let mut rows = Vec::new();
    for (cfg, values) in &groups {
        let rhos: Vec<PowerSplit> = if spec.swept_parameter == SweepParameter::Rho {
            values.iter().map(|&r| PowerSplit::new(r)).collect::<Result<_>>()?
        } else {
            vec![PowerSplit::new(cfg.rho)?]
        };
        let mut by_scheme: Vec<Vec<ResultRow>> =
            spec.schemes.iter().map(|&s| evaluate(spec, cfg, s, &rhos, values)).collect::<Result<_>>()?;
        for i in 0..values.len() {
            for scheme_rows in &mut by_scheme {
                rows.push(scheme_rows[i].clone());
            }
        }
    }
    Ok(rows)
}
