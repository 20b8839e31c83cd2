//! MOC-CAS on a synthetic candidate pool, printing the per-iteration log.
//!
//! cargo run --release --example pool_search

use moccas::synthetic::{calibrate_thresholds, make_pool, make_smooth_problem};
use moccas::{run, MocConfig, PolicyKind, ProblemKind, SearchSpace};

fn main() -> moccas::Result<()> {
    let problem = make_smooth_problem(ProblemKind::Blobs, 3, 2, 11)?;
    let pool = make_pool(&problem, 2000, 12)?.with_noise_std(0.01);
    let thresholds = calibrate_thresholds(&pool, 0.25)?;
    println!("thresholds {thresholds:.3?}");

    let config = MocConfig {
        thresholds,
        budget: 40,
        n_init: 10,
        ..MocConfig::default()
    };
    let result = run(PolicyKind::MocCas, SearchSpace::Pool(&pool), &config)?;
    println!("  t  id     feasible  P   fill    acq");
    for rec in &result.records {
        println!(
            "{:>3}  {:<6} {:<9} {:<3} {:.3}   {}",
            rec.t,
            rec.chosen_id.as_deref().unwrap_or("-"),
            rec.feasible,
            rec.positives,
            rec.fill,
            rec.acq_value.map_or("warm start".into(), |v| format!("{v:.2e}"))
        );
    }
    println!("AUP {}", result.summary.aup);
    Ok(())
}
