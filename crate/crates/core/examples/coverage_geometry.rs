//! Covered volume, new coverage of a candidate ball, and fill distance in a
//! 2-objective feasible box.
//!
//! cargo run --example coverage_geometry

use moccas::geometry::{
    ball_volume, build_reference, covered_volume, fill_distance, new_coverage_hard, FeasibleRegion, OutcomeSet,
    ReferenceMode,
};

fn main() -> moccas::Result<()> {
    let region = FeasibleRegion::new(vec![0.3, 0.3], vec![1.0, 1.0])?;
    let r = 0.1;
    let n_mc = 100_000;
    let mut outcomes = OutcomeSet::new();
    let reference = build_reference(&region, ReferenceMode::Grid { density: 33 })?;
    println!("feasible box volume {:.3}, ball volume {:.5}", region.box_volume(), ball_volume(2, r));

    for y in [[0.5, 0.5], [0.55, 0.5], [0.9, 0.4], [0.2, 0.2], [0.7, 0.8]] {
        let gain = new_coverage_hard(&region, &outcomes, &y, r, n_mc, 1)?;
        outcomes.push(y.to_vec())?;
        println!(
            "add {:?}: new coverage {:.5}  total covered {:.5}  fill {:.3}",
            y,
            gain,
            covered_volume(&region, &outcomes, r, n_mc, 1),
            fill_distance(&region, &outcomes, &reference)?
        );
    }
    Ok(())
}
