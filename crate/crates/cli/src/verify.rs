use clap::Args;
use rsma_core::asymptotics::{
    convergence_in_distribution_test, private_rate_concentration_test, shifted_gain_mgf_test, ConvergenceConfig,
};
use rsma_core::channel::ChannelStats;
use rsma_core::precoding::PowerSplit;

#[derive(Args)]
pub struct VerifyArgs {
    /// Channel realizations per antenna count in the convergence checks.
    #[arg(long, default_value_t = 5000)]
    samples: usize,
    /// Samples in the MGF check.
    #[arg(long, default_value_t = 1_000_000)]
    mgf_samples: usize,
    /// Largest KS distance accepted at the biggest array.
    #[arg(long, default_value_t = 0.05)]
    ks_limit: f64,
    /// Relative tolerance for the private-rate mean and the MGF.
    #[arg(long, default_value_t = 0.02)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn report(name: &str, pass: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

pub fn run(args: &VerifyArgs) -> anyhow::Result<bool> {
    let cfg = ConvergenceConfig {
        theta: 5.0,
        antennas: vec![40, 100, 200, 400],
        beta: 1.0,
        sigma2: 1.0,
        pt: 10.0,
        rho: PowerSplit::new(0.5)?,
        training_symbols: Some(10),
        n_samples: args.samples,
        seed: args.seed,
    };
    let mut all = true;

    let ks: Vec<f64> = convergence_in_distribution_test(&cfg)?.iter().map(|p| p.ks).collect();
    let last = *ks.last().unwrap_or(&f64::NAN);
    all &= report("common-rate KS distances decrease", strictly_decreasing(&ks), format!("{ks:.4?}"));
    all &= report("common-rate KS distance at L=400", last < args.ks_limit, format!("{last:.4} < {}", args.ks_limit));

    let conc = private_rate_concentration_test(&cfg)?;
    let sd: Vec<f64> = conc.iter().map(|p| p.std_dev).collect();
    all &= report("private-rate spread decreases", strictly_decreasing(&sd), format!("{sd:.4?}"));
    if let Some(p) = conc.last() {
        let rel = (p.mean - p.limit).abs() / p.limit;
        all &= report(
            "private-rate mean at L=400",
            rel < args.rel_tol,
            format!("mean {:.4} vs limit {:.4}, rel {rel:.4}", p.mean, p.limit),
        );
    }

    let stats = ChannelStats::symmetric(500, 100, 1.0, 0.0)?;
    let mgf = shifted_gain_mgf_test(&stats, 0, args.mgf_samples, &[0.1, 0.25], args.seed)?;
    for p in &mgf.points {
        all &= report(
            &format!("shifted-gain MGF at t={}", p.t),
            p.discrepancy < args.rel_tol,
            format!(
                "empirical {:.4} vs limit {:.4} (finite-L exact {:.4}), rel {:.4}",
                p.empirical, p.limit, p.finite_size, p.discrepancy
            ),
        );
    }
    Ok(all)
}
