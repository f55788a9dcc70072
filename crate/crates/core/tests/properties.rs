use phasecap::critical::{classify, Verdict};
use phasecap::fiber::{uniform_levels, weight_table, WeightRow, WeightTable};
use phasecap::field::{sample_phase, Grid, PhaseModel};
use phasecap::fullcap::{ball_mask, fibered_energy};
use phasecap::oracles::{radial_capacity, ModelKind, ModelSpec};
use phasecap::reduced::{optimal_profile, reduced_capacity, resistance, series_residual};
use proptest::prelude::*;

fn table_strategy() -> impl Strategy<Value = WeightTable> {
    (1.2f64..4.0, prop::collection::vec((0.01f64..0.3, -0.6f64..0.6), 4..60)).prop_map(|(p, steps)| {
        let mut t = 0.0;
        let mut log_a = 0.0;
        let rows = steps
            .into_iter()
            .map(|(dt, da)| {
                t += dt;
                log_a += da;
                let a = f64::exp(log_a);
                WeightRow { t, s: a, a, w: a }
            })
            .collect();
        WeightTable::new(p, rows).unwrap()
    })
}

fn scaled(table: &WeightTable, c: f64) -> WeightTable {
    let rows = table.rows.iter().map(|r| WeightRow { a: r.a * c, ..*r }).collect();
    WeightTable::new(table.p, rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn capacity_is_linear_in_the_weight(table in table_strategy(), c in 0.01f64..100.0) {
        let (a, b) = table.span();
        let c0 = reduced_capacity(&table, a, b).unwrap().capacity;
        let c1 = reduced_capacity(&scaled(&table, c), a, b).unwrap().capacity;
        prop_assert!((c1 / (c * c0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn narrowing_the_interval_raises_capacity(table in table_strategy(), i in 0usize..1000, j in 0usize..1000) {
        let t = table.levels();
        let n = t.len();
        let (lo, hi) = (i % (n - 1), j % (n - 1));
        let (lo, hi) = (lo.min(hi), lo.max(hi) + 1);
        let whole = reduced_capacity(&table, t[0], t[n - 1]).unwrap().capacity;
        let part = reduced_capacity(&table, t[lo], t[hi]).unwrap().capacity;
        prop_assert!(part >= whole * (1.0 - 1e-12));
    }

    #[test]
    fn resistance_adds_over_knots(table in table_strategy(), k in 1usize..1000) {
        let t = table.levels();
        let n = t.len();
        let c = t[1 + k % (n - 2)];
        let r = resistance(&table, t[0], t[n - 1]).unwrap();
        prop_assert!(series_residual(&table, t[0], c, t[n - 1]).unwrap() <= 8.0 * f64::EPSILON * r);
    }

    #[test]
    fn optimal_profile_is_a_monotone_transition(table in table_strategy()) {
        let (a, b) = table.span();
        let v = optimal_profile(&table, a, b).unwrap();
        prop_assert_eq!(v.eval(a), 0.0);
        prop_assert_eq!(v.eval(b), 1.0);
        prop_assert!(v.values().windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn classify_is_monotone_in_nu(alpha in 0.0f64..0.999, nu in 0.0f64..3.0, extra in 0.0f64..3.0, p in 1.05f64..6.0) {
        let low = classify(alpha, nu, p).unwrap();
        let high = classify(alpha, nu + extra, p).unwrap();
        prop_assert!(high.criterion >= low.criterion);
        if low.verdict == Verdict::Supercritical {
            prop_assert_eq!(high.verdict, Verdict::Supercritical);
        }
    }

    #[test]
    fn ball_masks_grow_with_radius(r in 0.0f64..0.6, dr in 0.0f64..0.4, cx in 0.0f64..1.0) {
        let grid = Grid::from_extent(vec![17, 17], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let small = ball_mask(&grid, &[cx, 0.5], r);
        let big = ball_mask(&grid, &[cx, 0.5], r + dr);
        prop_assert!(small.iter().zip(&big).all(|(s, b)| !s || *b));
    }

    #[test]
    fn radial_capacity_falls_as_the_outer_plate_recedes(p in 1.1f64..5.0, rf in 1.05f64..5.0, grow in 1.01f64..3.0) {
        let cap = |rf: f64| radial_capacity(&ModelSpec::new(ModelKind::Radial { n: 2, r_e: 1.0, r_f: rf }, p).unwrap()).unwrap();
        prop_assert!(cap(rf * grow) < cap(rf));
    }
}

#[test]
fn three_dimensional_slab() {
    let grid = Grid::from_extent(vec![33, 9, 9], &[-0.2, 0.0, 0.0], &[1.2, 2.0, 0.5]).unwrap();
    let theta = sample_phase(&PhaseModel::Planar { axis: 0 }, &grid).unwrap();
    let table = weight_table(&theta, 2.5, &uniform_levels(0.0, 1.0, 64), None).unwrap();
    let cap = reduced_capacity(&table, 0.0, 1.0).unwrap().capacity;
    assert!((cap - 1.0).abs() < 1e-9, "slab cross-section 2 × 0.5 gives {cap}");
}

#[test]
fn kinked_profile_defect_shrinks_under_refinement() {
    let residual = |n: usize, levels: usize| {
        let grid = Grid::from_extent(vec![n, n], &[-3.2, -3.2], &[3.2, 3.2]).unwrap();
        let theta = sample_phase(&PhaseModel::Radial { center: vec![0.0, 0.0] }, &grid).unwrap();
        let e = std::f64::consts::E;
        let table = weight_table(&theta, 2.0, &uniform_levels(1.0, e, levels), None).unwrap();
        let v = optimal_profile(&table, 1.0, e).unwrap();
        fibered_energy(&theta, &v, 2.0).unwrap().residual
    };
    let (coarse, fine) = (residual(129, 512), residual(257, 1024));
    assert!(fine < coarse, "{coarse} -> {fine}");
    assert!(coarse < 0.02);
}
