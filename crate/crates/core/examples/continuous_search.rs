//! Continuous mode: each query maximizes the soft acquisition over the input
//! box by multi-start projected gradient ascent.
//!
//! cargo run --release --example continuous_search

use moccas::synthetic::{calibrate_thresholds, make_pool, make_smooth_problem};
use moccas::{run, MocConfig, PolicyKind, ProblemKind, SearchSpace};

fn main() -> moccas::Result<()> {
    let problem = make_smooth_problem(ProblemKind::Ridges, 2, 2, 4)?;
    // thresholds from a probe sample, the search itself never sees it
    let probe = make_pool(&problem, 5000, 5)?;
    let config = MocConfig {
        thresholds: calibrate_thresholds(&probe, 0.2)?,
        budget: 30,
        n_init: 8,
        n_starts: 6,
        max_steps: 40,
        ..MocConfig::default()
    };
    for policy in [PolicyKind::Random, PolicyKind::MocCas] {
        let res = run(policy, SearchSpace::Continuous(&problem), &config)?;
        println!(
            "{policy:>8}: positives {:>2}/{}  AUP {:>4}  fill {:.3}  covered {:.4}",
            res.summary.final_positives,
            res.records.len(),
            res.summary.aup,
            res.summary.final_fill,
            res.summary.final_covered
        );
    }
    Ok(())
}
