use proptest::prelude::*;
use qrl_core::env::{discretize_value, mountain_car_step, MountainCarState, POSITION_RANGE, VELOCITY_RANGE};
use qrl_core::nn::{cosine_lr, softplus, softplus_inverse};
use qrl_core::oracle::{
    check_quasimetric, floyd_warshall, minplus_closure, shortest_paths, DiscreteMdpGraph, DistanceMatrix,
};
use qrl_core::quasimetric::{iqe_component_distance, iqe_maxmean};
use qrl_core::rng::seeded;
use qrl_core::td::sample_horizon;

/// Union length by checking every elementary segment between endpoints.
fn union_length(u: &[f64], v: &[f64]) -> f64 {
    let mut pts: Vec<f64> = u.iter().chain(v).copied().collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2)
        .filter(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            u.iter().zip(v).any(|(&a, &b)| a <= mid && mid <= b)
        })
        .map(|w| w[1] - w[0])
        .sum()
}

fn vec_pair(m: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    let x = || prop::collection::vec(prop_oneof![-5.0f64..5.0, (-4i32..4).prop_map(f64::from)], m);
    (x(), x())
}

fn graph() -> impl Strategy<Value = DiscreteMdpGraph> {
    (1usize..14).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n, 0u32..10), 0..4 * n)
            .prop_map(move |edges| DiscreteMdpGraph::new(n, edges.into_iter().map(|(a, b, c)| (a, b, f64::from(c)))).unwrap())
    })
}

fn cost_matrix() -> impl Strategy<Value = DistanceMatrix> {
    (1usize..9).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(0u32..20, n), n).prop_map(|rows| {
            let rows: Vec<Vec<f64>> = rows
                .into_iter()
                .enumerate()
                .map(|(i, r)| r.into_iter().enumerate().map(|(j, c)| if i == j { 0.0 } else { f64::from(c) }).collect())
                .collect();
            DistanceMatrix::from_rows(&rows).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn iqe_component_matches_union_length((u, v) in vec_pair(6)) {
        let d = iqe_component_distance(&u, &v).unwrap();
        let lo: Vec<f64> = u.clone();
        let hi: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a.max(*b)).collect();
        prop_assert!((d - union_length(&lo, &hi)).abs() < 1e-9);
    }

    #[test]
    fn iqe_component_is_a_quasimetric((u, v) in vec_pair(5), (w, _) in vec_pair(5)) {
        let d = |a: &[f64], b: &[f64]| iqe_component_distance(a, b).unwrap();
        prop_assert_eq!(d(&u, &u), 0.0);
        prop_assert!(d(&u, &v) >= 0.0);
        prop_assert!(d(&u, &w) <= d(&u, &v) + d(&v, &w) + 1e-9);
    }

    #[test]
    fn maxmean_lies_between_mean_and_max(ds in prop::collection::vec(0.0f64..10.0, 1..9), mix in -6.0f64..6.0) {
        let out = iqe_maxmean(&ds, mix).unwrap();
        let max = ds.iter().copied().fold(0.0, f64::max);
        let mean = ds.iter().sum::<f64>() / ds.len() as f64;
        prop_assert!(out >= mean - 1e-12 && out <= max + 1e-12);
    }

    #[test]
    fn softplus_bounds(x in -500.0f64..500.0, beta in 0.01f64..10.0) {
        let s = softplus(x, beta);
        prop_assert!(s >= x.max(0.0));
        prop_assert!(s - x.max(0.0) <= core::f64::consts::LN_2 / beta + 1e-12);
    }

    #[test]
    fn softplus_inverse_round_trips(y in 1e-6f64..60.0) {
        let back = softplus(softplus_inverse(y), 1.0);
        prop_assert!((back - y).abs() <= 1e-9 * y.max(1.0));
    }

    #[test]
    fn cosine_lr_within_base(total in 1u64..10_000, frac in 0.0f64..=1.0, base in 1e-6f64..1.0) {
        let step = (frac * total as f64) as u64;
        let lr = cosine_lr(step, total, base).unwrap();
        prop_assert!((0.0..=base).contains(&lr));
        if step < total {
            prop_assert!(cosine_lr(step + 1, total, base).unwrap() <= lr);
        }
    }

    #[test]
    fn horizon_is_at_least_one(p in 1e-3f64..=1.0, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let h = sample_horizon(p, &mut rng).unwrap();
        prop_assert!(h >= 1);
        if p == 1.0 {
            prop_assert_eq!(h, 1);
        }
    }

    #[test]
    fn dijkstra_agrees_with_floyd_warshall(g in graph()) {
        let goals: Vec<usize> = (0..g.num_nodes()).collect();
        let sp = shortest_paths(&g, &goals);
        let fw = floyd_warshall(&g);
        prop_assert_eq!(sp.as_slice(), fw.as_slice());
        prop_assert!(check_quasimetric(&fw, 0.0).unwrap().is_empty());
    }

    #[test]
    fn closure_is_an_idempotent_quasimetric_below_costs(c in cost_matrix()) {
        let d = minplus_closure(&c).unwrap();
        prop_assert!(check_quasimetric(&d, 0.0).unwrap().is_empty());
        prop_assert!(d.as_slice().iter().zip(c.as_slice()).all(|(a, b)| a <= b));
        let again = minplus_closure(&d).unwrap();
        prop_assert_eq!(again.as_slice(), d.as_slice());
    }

    #[test]
    fn discretization_snaps_to_a_bin(x in -2.0f64..2.0, bins in 2usize..300) {
        let (lo, hi) = POSITION_RANGE;
        let (center, k) = discretize_value(x, lo, hi, bins);
        prop_assert!(k < bins);
        prop_assert!((lo..=hi).contains(&center));
        prop_assert_eq!(discretize_value(center, lo, hi, bins), (center, k));
    }

    #[test]
    fn mountain_car_stays_in_bounds(
        p in POSITION_RANGE.0..=POSITION_RANGE.1,
        v in VELOCITY_RANGE.0..=VELOCITY_RANGE.1,
        a in 0usize..3,
    ) {
        let (next, r) = mountain_car_step(MountainCarState::new(p, v), a).unwrap();
        prop_assert_eq!(r, -1.0);
        prop_assert!((POSITION_RANGE.0..=POSITION_RANGE.1).contains(&next.position));
        prop_assert!((VELOCITY_RANGE.0..=VELOCITY_RANGE.1).contains(&next.velocity));
        if next.position == POSITION_RANGE.0 {
            prop_assert!(next.velocity >= 0.0);
        }
    }
}

#[test]
fn invalid_action_is_rejected() {
    assert!(mountain_car_step(MountainCarState::new(0.0, 0.0), 3).is_err());
}
