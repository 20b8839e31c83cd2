use proptest::prelude::*;

use moccas::acquisition::{p_sat, soft_from_ucb, tie_break, Scored, SoftAcqParams};
use moccas::geometry::{covered_volume, FeasibleRegion, OutcomeSet};
use moccas::linalg::{cholesky, extend_factor};
use moccas::metrics::{positives_series, FillTracker};

fn spd(n: usize, entries: &[f64]) -> Vec<Vec<f64>> {
    // W^T W + I
    let w: Vec<Vec<f64>> = (0..n).map(|i| entries[i * n..(i + 1) * n].to_vec()).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| w[k][i] * w[k][j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

proptest! {
    #[test]
    fn incremental_factor_equals_batch(n in 2usize..10, entries in prop::collection::vec(-1.0f64..1.0, 100)) {
        let a = spd(n, &entries);
        let batch = cholesky(&a, 0.0).unwrap();
        let mut inc = cholesky(&[a[0][..1].to_vec()], 0.0).unwrap();
        for k in 1..n {
            inc = extend_factor(&inc, &a[k][..k], a[k][k]).unwrap();
        }
        for i in 0..n {
            for j in 0..=i {
                prop_assert!((inc.get(i, j) - batch.get(i, j)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn positives_never_decrease(flags in prop::collection::vec(any::<bool>(), 0..200)) {
        let s = positives_series(&flags);
        prop_assert_eq!(s.len(), flags.len());
        prop_assert!(s.windows(2).all(|w| w[1] >= w[0] && w[1] - w[0] <= 1));
    }

    #[test]
    fn coverage_grows_and_fill_shrinks(points in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..25)) {
        let region = FeasibleRegion::new(vec![0.2, 0.2], vec![1.0, 1.0]).unwrap();
        let reference: Vec<Vec<f64>> = (0..8).flat_map(|i| (0..8).map(move |j| vec![0.2 + 0.1 * i as f64, 0.2 + 0.1 * j as f64])).collect();
        let mut fill = FillTracker::new(reference);
        let mut z = OutcomeSet::new();
        let (mut last_cov, mut last_fill) = (0.0, f64::INFINITY);
        for (a, b) in points {
            z.push(vec![a, b]).unwrap();
            fill.add(&[a, b]);
            let cov = covered_volume(&region, &z, 0.1, 2000, 5);
            prop_assert!(cov >= last_cov);
            prop_assert!(fill.value() <= last_fill);
            last_cov = cov;
            last_fill = fill.value();
        }
    }

    #[test]
    fn p_sat_is_a_monotone_probability(u in prop::collection::vec(-2.0f64..2.0, 1..5), shift in 0.0f64..1.0) {
        let params = SoftAcqParams::new(0.1, 0.05, vec![0.0; u.len()]).unwrap();
        let a = p_sat(&u, &params).unwrap();
        let moved: Vec<f64> = u.iter().map(|v| v + shift).collect();
        let b = p_sat(&moved, &params).unwrap();
        prop_assert!((0.0..=1.0).contains(&a.value));
        prop_assert!(b.value >= a.value);
        prop_assert!(a.grad.iter().all(|g| *g >= 0.0));
    }

    #[test]
    fn soft_value_never_exceeds_ball_volume(u in prop::collection::vec(0.0f64..1.0, 1..5), r in 0.02f64..0.3) {
        let m = u.len();
        let params = SoftAcqParams::new(r, r / 2.0, vec![0.3; m]).unwrap();
        let prior = OutcomeSet::from_points(vec![vec![0.5; m]]).unwrap();
        let v = soft_from_ucb(&u, &params, &prior).unwrap().value;
        prop_assert!(v <= moccas::geometry::ball_volume(m, r) + 1e-15);
    }

    #[test]
    fn tie_break_picks_a_top_value(values in prop::collection::vec(0.0f64..1.0, 1..30)) {
        let cands: Vec<Scored> = values
            .iter()
            .enumerate()
            .map(|(i, v)| Scored { index: i, value: *v, ucb: vec![*v, 1.0 - *v] })
            .collect();
        let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let pick = tie_break(&cands, &OutcomeSet::new(), 1e-9).unwrap();
        prop_assert!(values[pick] >= best - 1e-9);
    }
}
