//! All five policies on paired seeds, aggregated as mean ± standard error.
//!
//! cargo run --release --example compare_policies

use moccas::metrics::{aggregate_trials, TrialSummary};
use moccas::synthetic::{calibrate_thresholds, make_pool, make_smooth_problem};
use moccas::{run, MocConfig, PolicyKind, ProblemKind, SearchSpace};

fn main() -> moccas::Result<()> {
    let problem = make_smooth_problem(ProblemKind::Blobs, 4, 3, 0)?;
    let pool = make_pool(&problem, 3000, 1)?.with_noise_std(0.01);
    let thresholds = calibrate_thresholds(&pool, 0.3)?;

    println!("{:>12} {:>16} {:>10} {:>8} {:>8}", "policy", "AUP", "positives", "fill", "T@30");
    for policy in PolicyKind::ALL {
        let trials: Vec<TrialSummary> = (0..3)
            .map(|seed| {
                let config = MocConfig {
                    thresholds: thresholds.clone(),
                    budget: 60,
                    seed,
                    t_at: vec![30],
                    ..MocConfig::default()
                };
                run(policy, SearchSpace::Pool(&pool), &config).map(|r| r.summary)
            })
            .collect::<moccas::Result<_>>()?;
        let s = aggregate_trials(&trials);
        let t30 = &s.t_at[&30];
        println!(
            "{policy:>12} {:>9.1} ± {:<5.1} {:>10.1} {:>8.3} {:>8}",
            s.aup.mean,
            s.aup.se,
            s.positives.mean,
            s.fill.mean,
            t30.mean.map_or(">budget".into(), |m| format!("{m:.1}"))
        );
    }
    Ok(())
}
