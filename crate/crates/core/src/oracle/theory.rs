use alloc::vec::Vec;

use rand::Rng;

use super::paths::floyd_warshall_in_place;
use super::{DiscreteMdpGraph, DistanceMatrix};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Violation {
    Diagonal { i: usize, value: f64 },
    Negative { i: usize, j: usize, value: f64 },
    /// `D[i][k] > D[i][j] + D[j][k] + slack`.
    Triangle { i: usize, j: usize, k: usize },
}

fn require_square(d: &DistanceMatrix) -> Result<()> {
    if d.is_square() {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            context: "square distance matrix",
            expected: d.rows(),
            found: d.cols(),
        })
    }
}

/// Every way `d` fails to be a quasimetric; empty iff it is one within `slack`.
pub fn check_quasimetric(d: &DistanceMatrix, slack: f64) -> Result<Vec<Violation>> {
    require_square(d)?;
    let n = d.rows();
    let mut out = Vec::new();
    for i in 0..n {
        if d.get(i, i) != 0.0 {
            out.push(Violation::Diagonal { i, value: d.get(i, i) });
        }
        for j in 0..n {
            if d.get(i, j) < 0.0 {
                out.push(Violation::Negative { i, j, value: d.get(i, j) });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            let dij = d.get(i, j);
            if dij.is_infinite() {
                continue;
            }
            for k in 0..n {
                if d.get(i, k) > dij + d.get(j, k) + slack {
                    out.push(Violation::Triangle { i, j, k });
                }
            }
        }
    }
    Ok(out)
}

/// The MDP whose optimal cost-to-go is `d`: actions pick the next state
/// directly and cost `d(s, s')`. Infinite entries get no edge.
pub fn mdp_from_quasimetric(d: &DistanceMatrix) -> Result<DiscreteMdpGraph> {
    let violations = check_quasimetric(d, 0.0)?;
    if !violations.is_empty() {
        return Err(Error::NotQuasimetric(violations.len()));
    }
    let n = d.rows();
    let edges = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter_map(|(i, j)| {
        let c = d.get(i, j);
        (i != j && c.is_finite()).then_some((i, j, c))
    });
    DiscreteMdpGraph::new(n, edges)
}

/// All-pairs shortest paths of the complete graph with the given costs.
pub fn minplus_closure(costs: &DistanceMatrix) -> Result<DistanceMatrix> {
    require_square(costs)?;
    for i in 0..costs.rows() {
        if costs.get(i, i) != 0.0 {
            return Err(Error::OutOfRange(alloc::format!("nonzero diagonal at {i}")));
        }
        if let Some(j) = costs.row(i).iter().position(|&c| c < 0.0 || c.is_nan()) {
            return Err(Error::OutOfRange(alloc::format!("invalid cost at ({i}, {j})")));
        }
    }
    let mut d = costs.clone();
    floyd_warshall_in_place(&mut d);
    Ok(d)
}

/// Min-plus closure of a cost matrix holding `gammas[e] * cost_e` on each
/// graph edge (minimum over parallel edges) and `non_edge` elsewhere.
pub fn feasible_quasimetric_with_scales(
    graph: &DiscreteMdpGraph,
    gammas: &[f64],
    non_edge: &dyn Fn(usize, usize) -> f64,
) -> Result<DistanceMatrix> {
    crate::error::check_len("edge scales", graph.edges().len(), gammas.len())?;
    let n = graph.num_nodes();
    let mut c = DistanceMatrix::filled(n, n, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                c.set(i, j, non_edge(i, j));
            }
        }
    }
    let mut is_edge = alloc::vec![false; n * n];
    for (e, &g) in graph.edges().iter().zip(gammas) {
        if e.from == e.to {
            continue;
        }
        let v = g * e.cost;
        let slot = e.from * n + e.to;
        if !is_edge[slot] || v < c.get(e.from, e.to) {
            c.set(e.from, e.to, v);
            is_edge[slot] = true;
        }
    }
    minplus_closure(&c)
}

/// A random quasimetric satisfying every edge constraint `d(u, v) ≤ cost`:
/// edges are scaled by `γ ~ U[0, 1]` and non-edges get random large values
/// in `[M, 2M]` with `M` the largest finite entry of `d_star`.
pub fn feasible_quasimetric_sample(
    d_star: &DistanceMatrix,
    graph: &DiscreteMdpGraph,
    seed: u64,
) -> Result<DistanceMatrix> {
    require_square(d_star)?;
    crate::error::check_len("d_star size", graph.num_nodes(), d_star.rows())?;
    let mut rng = rng::seeded(seed);
    let gammas: Vec<f64> = graph.edges().iter().map(|_| rng.random::<f64>()).collect();
    let big = d_star
        .as_slice()
        .iter()
        .copied()
        .filter(|x| x.is_finite())
        .fold(1.0f64, f64::max);
    let n = graph.num_nodes();
    let large: Vec<f64> = (0..n * n).map(|_| big * (1.0 + rng.random::<f64>())).collect();
    feasible_quasimetric_with_scales(graph, &gammas, &|i, j| large[i * n + j])
}

/// Cost-to-go of a deterministic goal-conditioned policy: number of steps
/// until `g` is reached, `+∞` if the rollout cycles first.
pub fn on_policy_costs(
    n: usize,
    step: impl Fn(usize, usize) -> usize,
    policy: impl Fn(usize, usize) -> usize,
) -> DistanceMatrix {
    let mut d = DistanceMatrix::filled(n, n, f64::INFINITY);
    for s in 0..n {
        for g in 0..n {
            let mut cur = s;
            let mut cost = 0.0;
            let mut seen = alloc::vec![false; n];
            while cur != g && !seen[cur] {
                seen[cur] = true;
                cur = step(cur, policy(cur, g));
                cost += 1.0;
            }
            if cur == g {
                d.set(s, g, cost);
            }
        }
    }
    d
}

/// Three states on a cycle with a self-loop action and a "next" action; the
/// policy always moves on except from state 0 towards state 2, where it
/// stays put. Its cost-to-go has `d(0, 2) = ∞ > d(0, 1) + d(1, 2) = 2`.
pub fn three_cycle_counterexample() -> DistanceMatrix {
    const SELF: usize = 0;
    const NEXT: usize = 1;
    on_policy_costs(
        3,
        |s, a| if a == NEXT { (s + 1) % 3 } else { s },
        |s, g| if (s, g) == (0, 2) { SELF } else { NEXT },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::shortest_paths;
    use alloc::vec;

    fn dm(rows: &[&[f64]]) -> DistanceMatrix {
        DistanceMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn detects_single_triangle_violation() {
        let inf = f64::INFINITY;
        let d = dm(&[&[0.0, 5.0, 7.0], &[inf, 0.0, 1.0], &[inf, inf, 0.0]]);
        let v = check_quasimetric(&d, 0.0).unwrap();
        assert_eq!(v, vec![Violation::Triangle { i: 0, j: 1, k: 2 }]);
    }

    #[test]
    fn symmetric_metric_passes() {
        let d = dm(&[&[0.0, 1.0, 2.0], &[1.0, 0.0, 1.0], &[2.0, 1.0, 0.0]]);
        assert!(check_quasimetric(&d, 0.0).unwrap().is_empty());
    }

    #[test]
    fn reports_diagonal_and_negative_entries() {
        let d = dm(&[&[0.5, -1.0], &[1.0, 0.0]]);
        let v = check_quasimetric(&d, 0.0).unwrap();
        assert!(v.contains(&Violation::Diagonal { i: 0, value: 0.5 }));
        assert!(v.contains(&Violation::Negative { i: 0, j: 1, value: -1.0 }));
    }

    #[test]
    fn closure_fixtures() {
        let d = dm(&[&[0.0, 5.0], &[1.0, 0.0]]);
        assert_eq!(minplus_closure(&d).unwrap(), d);
        assert!(minplus_closure(&dm(&[&[1.0, 0.0], &[0.0, 0.0]])).is_err());
        let c = dm(&[&[0.0, 1.0, 9.0], &[9.0, 0.0, 1.0], &[1.0, 9.0, 0.0]]);
        let q = minplus_closure(&c).unwrap();
        assert_eq!(q.row(0), &[0.0, 1.0, 2.0]);
        assert_eq!(minplus_closure(&q).unwrap(), q);
    }

    #[test]
    fn round_trip_through_constructed_mdp() {
        let c = dm(&[&[0.0, 3.0, 1.0], &[2.0, 0.0, 4.0], &[6.0, 1.0, 0.0]]);
        let q = minplus_closure(&c).unwrap();
        let g = mdp_from_quasimetric(&q).unwrap();
        assert_eq!(shortest_paths(&g, &[0, 1, 2]), q);
        assert!(matches!(
            mdp_from_quasimetric(&three_cycle_counterexample()),
            Err(Error::NotQuasimetric(_))
        ));
    }

    #[test]
    fn on_policy_fixture_values() {
        let d = three_cycle_counterexample();
        assert_eq!(d.get(0, 1), 1.0);
        assert_eq!(d.get(1, 2), 1.0);
        assert!(d.get(0, 2).is_infinite());
        let v = check_quasimetric(&d, 0.0).unwrap();
        assert!(v.contains(&Violation::Triangle { i: 0, j: 1, k: 2 }));
    }

    #[test]
    fn feasible_extremes() {
        let g = DiscreteMdpGraph::new(3, [(0, 1, 1.0), (1, 2, 2.0), (2, 0, 1.0)]).unwrap();
        let star = shortest_paths(&g, &[0, 1, 2]);
        let inf = |_: usize, _: usize| f64::INFINITY;
        assert_eq!(feasible_quasimetric_with_scales(&g, &[1.0; 3], &inf).unwrap(), star);
        let zero = feasible_quasimetric_with_scales(&g, &[0.0; 3], &inf).unwrap();
        assert!(zero.as_slice().iter().all(|&x| x == 0.0));
    }
}
