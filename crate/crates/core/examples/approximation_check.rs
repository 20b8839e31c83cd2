//! Gap between hard and soft acquisition as the feasibility margin grows.
//!
//! cargo run --release --example approximation_check

use moccas::check::{run_check, CheckConfig};

fn main() -> moccas::Result<()> {
    let config = CheckConfig {
        objectives: vec![2, 4],
        prior_counts: vec![5],
        repeats: 1,
        ..CheckConfig::default()
    };
    let report = run_check(&config)?;
    let mut current = usize::MAX;
    for p in &report.points {
        if p.instance != current {
            current = p.instance;
            println!("\ninstance {} (m={}, {} priors)", p.instance, p.objectives, p.priors);
            println!("  margin/λ   hard/V    soft/V    gap");
        }
        println!(
            "  {:>7.1}   {:.5}   {:.5}   {:.1e}",
            p.margin,
            p.hard / p.volume,
            p.soft / p.volume,
            p.gap
        );
    }
    for s in &report.sweeps {
        println!("instance {}: spearman(margin, gap) = {:.3}", s.instance, s.spearman);
    }
    for c in &report.overlap_cases {
        println!("m={}: centre on a prior, hard {:.1e}, soft {:.3e}", c.objectives, c.hard, c.soft);
    }
    println!("passed: {}", report.passed());
    Ok(())
}
