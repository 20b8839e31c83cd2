//! The soft acquisition against the Monte-Carlo hard one as the predicted
//! outcome moves from infeasible, across the threshold, to near a previous
//! observation.
//!
//! cargo run --example soft_vs_hard

use moccas::acquisition::{hard_from_ucb, novelty_weighted, p_sat, soft_from_ucb, OverlapWeight, SoftAcqParams};
use moccas::geometry::{ball_volume, FeasibleRegion, OutcomeSet};

fn main() -> moccas::Result<()> {
    let r = 0.05;
    let tau = vec![0.5, 0.5];
    let params = SoftAcqParams::new(r, r / 2.0, tau.clone())?.with_overlap(OverlapWeight::BallMass);
    let region = FeasibleRegion::new(tau, vec![1.0, 1.0])?;
    let prior = OutcomeSet::from_points(vec![vec![0.8, 0.7]])?;
    let v = ball_volume(2, r);

    println!("   U1     p_sat  novelty   soft/V   hard/V");
    for i in 0..=16 {
        let u = [0.4 + 0.025 * i as f64, 0.7];
        let gate = p_sat(&u, &params)?.value;
        let nov = novelty_weighted(&u, &prior, r, params.overlap)?.value;
        let soft = soft_from_ucb(&u, &params, &prior)?.value;
        let hard = hard_from_ucb(&u, r, &prior, &region, 50_000, 3)?;
        println!("{:.3}   {gate:.3}   {nov:.4}   {:.4}   {:.4}", u[0], soft / v, hard / v);
    }
    Ok(())
}
