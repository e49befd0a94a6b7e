//! Property tests of the association loop, tracker stages, metrics and
//! resampling.

use bptrack::association::{association_marginals, iterate_association, run_association, BetaTable};
use bptrack::evaluation::{exact_association_marginals, optimal_assignment, ospa, OspaParams};
use bptrack::model::linear::{RandomWalk, ScalarState};
use bptrack::rng::stream;
use bptrack::tracker::{predict, resample, update, PlanEntry, PotentialTargetBelief};
use bptrack::MeasurementFrame;
use proptest::prelude::*;

fn beta_table(max_k: usize, max_m: usize) -> impl Strategy<Value = BetaTable> {
    (1..=max_k, 0..=max_m).prop_flat_map(|(k, m)| {
        prop::collection::vec(prop::collection::vec(0.01f64..10.0, m + 1), k)
            .prop_map(|rows| BetaTable::new(rows).unwrap())
    })
}

fn bp_marginals(beta: &BetaTable) -> Vec<Vec<f64>> {
    let eta = iterate_association(beta, 1000, 1e-10).unwrap();
    association_marginals(beta, &eta)
}

fn point_set(max: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec(prop::array::uniform2(-300.0f64..300.0), 0..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn marginals_are_pmfs(beta in beta_table(5, 5)) {
        for row in bp_marginals(&beta) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn row_scaling_leaves_marginals_unchanged(
        beta in beta_table(4, 4),
        scales in prop::collection::vec(1e-6f64..1e6, 4),
    ) {
        let scaled = BetaTable::new(
            beta.rows().iter().zip(&scales).map(|(r, s)| r.iter().map(|v| v * s).collect()).collect(),
        ).unwrap();
        for (a, b) in bp_marginals(&beta).iter().zip(&bp_marginals(&scaled)) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
    }

    /// With a single measurement or a single target the association graph is
    /// a tree and the marginals are exact.
    #[test]
    fn exact_on_trees(beta in beta_table(4, 1), single in beta_table(1, 6)) {
        for table in [&beta, &single] {
            let exact = exact_association_marginals(table).unwrap();
            for (a, b) in bp_marginals(table).iter().zip(&exact) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn association_converges(beta in beta_table(3, 3)) {
        let state = run_association(&beta, 1000, 1e-6).unwrap();
        prop_assert!(state.residual < 1e-6);
    }

    #[test]
    fn ospa_metric_axioms(x in point_set(5), y in point_set(5), z in point_set(5)) {
        let p = OspaParams::default();
        let (dxy, dyx) = (ospa(&x, &y, &p), ospa(&y, &x, &p));
        prop_assert!((dxy - dyx).abs() < 1e-9);
        prop_assert!((0.0..=200.0).contains(&dxy));
        prop_assert!(ospa(&x, &x, &p) < 1e-12);
        prop_assert!(dxy <= ospa(&x, &z, &p) + ospa(&z, &y, &p) + 1e-9);
        if x.is_empty() != y.is_empty() {
            prop_assert_eq!(dxy, 200.0);
        }
        let p2 = OspaParams { order: 2.0, ..p };
        prop_assert!(ospa(&x, &y, &p2) <= ospa(&x, &z, &p2) + ospa(&z, &y, &p2) + 1e-9);
    }

    #[test]
    fn assignment_is_no_worse_than_identity(cost in prop::collection::vec(prop::collection::vec(0.0f64..50.0, 6), 1..6)) {
        let a = optimal_assignment(&cost);
        let identity: f64 = (0..cost.len()).map(|i| cost[i][i]).sum();
        prop_assert!(a.cost <= identity + 1e-12);
        let mut cols: Vec<usize> = a.pairs.iter().map(|p| p.1).collect();
        cols.dedup();
        prop_assert_eq!(cols.len(), cost.len());
    }

    #[test]
    fn prediction_normalization(
        pe in 0.0f64..1.0,
        ps in 0.0f64..1.0,
        pb in 0.0f64..1.0,
        j in 1usize..40,
        births in 1usize..40,
        seed in any::<u64>(),
    ) {
        let belief = PotentialTargetBelief::new(
            (0..j).map(|i| ScalarState(i as f64)).collect(),
            vec![pe / j as f64; j],
        );
        let entry = PlanEntry {
            birth_probability: pb,
            survival_probability: ps,
            birth_particles: vec![ScalarState(0.0); births],
        };
        let p = predict(&belief, &RandomWalk { std: 1.0 }, &entry, &mut stream(seed, &[])).unwrap();
        let expected = ps * pe + pb * (1.0 - pe);
        prop_assert!((p.existence_probability() - expected).abs() < 1e-12);
        prop_assert!(p.weights().iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn updated_existence_is_a_probability(
        weights in prop::collection::vec(0.0f64..0.02, 1..50),
        zs in prop::collection::vec(-20.0f64..20.0, 0..4),
        pd in 0.0f64..0.99,
        eta in prop::collection::vec(0.01f64..1.0, 4),
    ) {
        let sensor = bptrack::model::linear::LinearSensor {
            noise_std: 1.0,
            detection_probability: pd,
            clutter_mean: 1.0,
            clutter_lo: -20.0,
            clutter_hi: 20.0,
        };
        let belief = PotentialTargetBelief::new(
            (0..weights.len()).map(|i| ScalarState(i as f64 - 25.0)).collect(),
            weights,
        );
        let entry = PlanEntry { birth_probability: 0.0, survival_probability: 1.0, birth_particles: vec![] };
        let p = predict(&belief, &RandomWalk { std: 0.0 }, &entry, &mut stream(0, &[])).unwrap();
        let mut row = vec![1.0];
        row.extend_from_slice(&eta[..zs.len()]);
        let frame = MeasurementFrame::new(vec![zs]);
        let b = update(p, &[&row], &frame, &[sensor]).unwrap();
        let pe = b.existence_probability();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&pe));
    }

    #[test]
    fn resampling_preserves_existence(
        weights in prop::collection::vec(0.0f64..1.0, 1..200),
        pe in 1e-6f64..1.0,
        count in 1usize..500,
        seed in any::<u64>(),
    ) {
        let total: f64 = weights.iter().sum();
        prop_assume!(total > 0.0);
        let belief = PotentialTargetBelief::new(
            (0..weights.len()).map(|i| ScalarState(i as f64)).collect(),
            weights.iter().map(|w| w / total * pe).collect(),
        );
        let r = resample(&belief, count, &mut stream(seed, &[])).unwrap();
        prop_assert_eq!(r.len(), count);
        prop_assert!((r.existence_probability() - pe).abs() < 1e-12 * count as f64);
        prop_assert!(r.states().iter().all(|x| belief.weights()[x.0 as usize] > 0.0));
    }
}

/// Systematic resampling keeps each particle between `floor(J w / Σw)` and
/// `ceil(J w / Σw)` times.
#[test]
fn systematic_resampling_counts() {
    let weights = [0.05, 0.3, 0.0, 0.15, 0.25, 0.25];
    let belief = PotentialTargetBelief::new((0..6).map(|i| ScalarState(i as f64)).collect(), weights.to_vec());
    for seed in 0..50 {
        let r = resample(&belief, 40, &mut stream(seed, &[])).unwrap();
        for (i, w) in weights.iter().enumerate() {
            let c = r.states().iter().filter(|x| x.0 as usize == i).count() as f64;
            let expected = 40.0 * w;
            assert!(c >= expected.floor() && c <= expected.ceil(), "particle {i}: {c} vs {expected}");
        }
    }
}

#[test]
fn association_converges_within_200_iterations() {
    use rand::Rng;
    let mut rng = stream(21, &[]);
    for _ in 0..1000 {
        let k = rng.random_range(1..=8);
        let m = rng.random_range(0..=8);
        let rows = (0..k).map(|_| (0..=m).map(|_| 1.0 - rng.random::<f64>()).collect()).collect();
        let state = run_association(&BetaTable::new(rows).unwrap(), 200, 1e-6).unwrap();
        assert!(state.residual < 1e-6, "K={k} M={m}: residual {}", state.residual);
    }
}

#[test]
fn measurement_side_marginals_sum_to_one() {
    let beta = BetaTable::new(vec![vec![0.3, 1.0, 0.2], vec![0.5, 0.4, 2.0], vec![1.0, 0.1, 0.1]]).unwrap();
    let state = run_association(&beta, 100, 1e-9).unwrap();
    for p in state.measurement_marginals() {
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
