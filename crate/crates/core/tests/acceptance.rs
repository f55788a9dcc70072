//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::{E, PI};
use std::time::Instant;

use phasecap::critical::{analyze, classify, fit_exponent, local_resistance, Verdict};
use phasecap::fiber::{geometric_levels, uniform_levels, weight_table, WeightRow, WeightTable};
use phasecap::field::{sample_phase, Grid, LevelPair, PhaseModel, ScalarField};
use phasecap::fullcap::{
    ball_mask, compare_bound, compose, fibered_energy, polarization_gap, tangential_decompose, ConstraintSet,
    MinimizeOptions, Plates,
};
use phasecap::oracles::{monomial_exponent, planar_capacity, radial_capacity, ModelKind, ModelSpec};
use phasecap::reduced::{
    linear_profile_comparison, optimal_profile, reduced_capacity, reduced_energy, reparametrize_table, resistance,
    series_residual, Profile,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs()
}

fn lv(a: f64, b: f64) -> LevelPair {
    LevelPair::new(a, b).unwrap()
}

fn planar_field(dims: Vec<usize>, lo: &[f64], hi: &[f64]) -> ScalarField {
    sample_phase(&PhaseModel::Planar { axis: 0 }, &Grid::from_extent(dims, lo, hi).unwrap()).unwrap()
}

fn radial_field(n: usize, half: f64) -> ScalarField {
    let grid = Grid::from_extent(vec![n, n], &[-half, -half], &[half, half]).unwrap();
    sample_phase(&PhaseModel::Radial { center: vec![0.0, 0.0] }, &grid).unwrap()
}

fn monomial_field(dims: Vec<usize>, gamma: f64) -> ScalarField {
    let grid = Grid::from_extent(dims, &[-1.0, 0.0], &[1.0, 1.0]).unwrap();
    sample_phase(&PhaseModel::Monomial { gamma, axis: 0 }, &grid).unwrap()
}

fn planar_exactness() -> Outcome {
    let theta = planar_field(vec![129, 65], &[-0.25, 0.0], &[1.25, 1.0]);
    let mut lines = Vec::new();
    let mut ok = true;
    for p in [1.5, 2.0, 3.0] {
        let start = Instant::now();
        let oracle = planar_capacity(&ModelSpec::new(ModelKind::Planar { area: 1.0, a: 0.0, b: 1.0 }, p).unwrap()).unwrap();
        let (r, _) = compare_bound(&theta, lv(0.0, 1.0), &MinimizeOptions::new(p), &Plates::Truncated { outer: None }, 512)
            .map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        let red = r.capacity_reduced.unwrap();
        let (er, ef, eg) = (rel(red, oracle), rel(r.capacity_full, oracle), r.gap.unwrap().abs() / red);
        ok &= er <= 0.01 && ef <= 0.02 && eg <= 0.02 && secs < 30.0 && r.converged;
        lines.push(format!("p={p}: reduced err {er:.1e}, full err {ef:.1e}, gap {eg:.1e}, {secs:.2}s"));
    }
    check(ok, lines.join("; "))
}

fn radial_log_regime() -> Outcome {
    let theta = radial_field(257, 3.2);
    let opts = MinimizeOptions::new(2.0);
    let (r, _) = compare_bound(&theta, lv(1.0, E), &opts, &Plates::Truncated { outer: Some(E + 0.2) }, 2048)
        .map_err(|e| e.to_string())?;
    let (er, ef) = (rel(r.capacity_reduced.unwrap(), 2.0 * PI), rel(r.capacity_full, 2.0 * PI));
    check(
        er <= 0.01 && ef <= 0.03 && r.converged,
        format!("reduced {:.6} (err {er:.1e}), full {:.6} (err {ef:.1e}) vs 2π", r.capacity_reduced.unwrap(), r.capacity_full),
    )
}

fn radial_power_regime() -> Outcome {
    let theta = radial_field(257, 4.2);
    let table = weight_table(&theta, 3.0, &uniform_levels(1.0, 4.0, 2048), None).map_err(|e| e.to_string())?;
    let red = reduced_capacity(&table, 1.0, 4.0).map_err(|e| e.to_string())?.capacity;
    let oracle = radial_capacity(&ModelSpec::new(ModelKind::Radial { n: 2, r_e: 1.0, r_f: 4.0 }, 3.0).unwrap()).unwrap();
    let er = rel(red, PI / 2.0);
    let mut worst: f64 = 0.0;
    for (n, rf) in [(2usize, 4.0), (2, E), (3, 2.5)] {
        let at = |p: f64| radial_capacity(&ModelSpec::new(ModelKind::Radial { n, r_e: 1.0, r_f: rf }, p).unwrap()).unwrap();
        let mid = at(n as f64);
        worst = worst.max(rel(at(n as f64 - 1e-6), mid)).max(rel(at(n as f64 + 1e-6), mid));
    }
    check(
        er <= 0.01 && rel(oracle, PI / 2.0) < 1e-12 && worst <= 1e-4,
        format!("reduced {red:.6} (err {er:.1e}) vs π/2; branch jump at p = n ± 1e-6: {worst:.1e}"),
    )
}

fn monomial_exponent_check() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for gamma in [2.0, 3.0] {
        let theta = monomial_field(vec![1025, 5], gamma);
        let mut levels = vec![0.0];
        levels.extend(geometric_levels(0.0, 0.25, 12));
        let table = weight_table(&theta, 2.0, &levels, None).map_err(|e| e.to_string())?;
        let fit = fit_exponent(&table, 0.0, 0.25).map_err(|e| e.to_string())?;
        let target = monomial_exponent(gamma, 2.0);
        let r = local_resistance(&table, 0.0, 0.25).map_err(|e| e.to_string())?;
        let verdict = classify(1.0 - 1.0 / gamma, 0.0, 2.0).map_err(|e| e.to_string())?.verdict;
        let fitted = analyze(&table, 0.0, 0.25).map_err(|e| e.to_string())?.verdict;
        ok &= (fit.slope - target).abs() <= 0.05
            && r.is_finite()
            && verdict == Verdict::Transmissive
            && fitted == Verdict::Transmissive;
        lines.push(format!("γ={gamma}: slope {:.4} (target {target:.4}), local R {r:.4}, {verdict:?}", fit.slope));
    }
    check(ok, lines.join("; "))
}

/// Random table with a strictly increasing level grid and a positive, rough weight.
fn random_table(rng: &mut ChaCha8Rng) -> WeightTable {
    let n = rng.gen_range(6..160);
    let p = rng.gen_range(1.2..4.0);
    let mut t = rng.gen_range(-2.0..2.0);
    let mut log_a: f64 = rng.gen_range(-2.0..2.0);
    let rows = (0..n)
        .map(|_| {
            t += rng.gen_range(0.001..0.2);
            log_a += rng.gen_range(-0.5..0.5);
            let a = log_a.exp();
            WeightRow { t, s: a, a, w: a }
        })
        .collect();
    WeightTable::new(p, rows).unwrap()
}

fn random_profile(rng: &mut ChaCha8Rng, a: f64, b: f64) -> Profile {
    let m = rng.gen_range(1..40);
    let mut knots: Vec<f64> = (0..m).map(|_| rng.gen_range(a..b)).collect();
    knots.push(a);
    knots.push(b);
    knots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    knots.dedup();
    let mut incr: Vec<f64> = (1..knots.len())
        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..1.0) })
        .collect();
    if incr.iter().all(|&x| x == 0.0) {
        incr[0] = 1.0;
    }
    let total: f64 = incr.iter().sum();
    let mut values = vec![0.0];
    let mut acc = 0.0;
    for (i, d) in incr.iter().enumerate() {
        acc += d;
        values.push(if i + 2 == knots.len() { 1.0 } else { (acc / total).min(1.0) });
    }
    Profile::new(knots, values).unwrap()
}

fn optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut worst_eq, mut worst_beat): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let table = random_table(&mut rng);
        let (lo, hi) = table.span();
        let a = rng.gen_range(lo..lo + 0.3 * (hi - lo));
        let b = rng.gen_range(hi - 0.3 * (hi - lo)..hi);
        let cap = reduced_capacity(&table, a, b).map_err(|e| e.to_string())?.capacity;
        let opt = optimal_profile(&table, a, b).map_err(|e| e.to_string())?;
        worst_eq = worst_eq.max(rel(reduced_energy(&opt, &table).map_err(|e| e.to_string())?, cap));
        for _ in 0..200 {
            let v = random_profile(&mut rng, a, b);
            let e = reduced_energy(&v, &table).map_err(|e| e.to_string())?;
            worst_beat = worst_beat.max((cap - e) / cap);
        }
    }
    check(
        worst_eq <= 1e-8 && worst_beat <= 1e-8,
        format!("50 tables: max |E(v*) - cap|/cap = {worst_eq:.1e}; 10000 profiles: max undercut {worst_beat:.1e}"),
    )
}

fn comparison_matrix() -> Outcome {
    let planar = planar_field(vec![129, 65], &[-0.25, 0.0], &[1.25, 1.0]);
    let radial = radial_field(129, 3.2);
    let monomial = monomial_field(vec![129, 65], 2.0);
    let disks = ConstraintSet::new(
        ball_mask(&planar.grid, &[0.0, 0.5], 0.1),
        ball_mask(&planar.grid, &[1.0, 0.5], 0.1),
    )
    .unwrap();
    let cases: Vec<(&str, &ScalarField, LevelPair, Plates)> = vec![
        ("planar", &planar, lv(0.0, 1.0), Plates::Truncated { outer: None }),
        ("planar-inner", &planar, lv(0.1, 0.9), Plates::Truncated { outer: None }),
        ("radial", &radial, lv(1.0, E), Plates::Truncated { outer: Some(E + 0.2) }),
        ("monomial", &monomial, lv(0.04, 0.25), Plates::Truncated { outer: None }),
        ("mismatched", &planar, lv(0.1, 0.9), Plates::Custom(disks)),
    ];
    let mut count = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for p in [1.5, 2.0, 3.0] {
        for (name, theta, levels, plates) in &cases {
            count += 1;
            match compare_bound(theta, *levels, &MinimizeOptions::new(p), plates, 512) {
                Ok((r, _)) => {
                    let red = r.capacity_reduced.unwrap();
                    worst = worst.max((r.capacity_full - red) / red);
                    if !r.converged {
                        failures.push(format!("{name} p={p} did not converge"));
                    }
                }
                Err(e) => failures.push(format!("{name} p={p}: {e}")),
            }
        }
    }
    check(
        failures.is_empty() && count >= 12,
        format!("{count} cases, max (full - reduced)/reduced = {worst:.2e}{}", if failures.is_empty() { String::new() } else { format!("; {}", failures.join(", ")) }),
    )
}

fn threshold() -> Outcome {
    let mut levels = vec![0.0];
    levels.extend(geometric_levels(0.0, 0.5, 30));
    let mut mismatches = Vec::new();
    for k in 1..=20 {
        let s = k as f64 / 10.0;
        let table = WeightTable::synthetic(2.0, &levels, |t| t.powf(s)).unwrap();
        let cap = reduced_capacity(&table, 0.0, 0.5).map_err(|e| e.to_string())?.capacity;
        let r = local_resistance(&table, 0.0, 0.5).map_err(|e| e.to_string())?;
        let verdict = analyze(&table, 0.0, 0.5).map_err(|e| e.to_string())?.verdict;
        let cap_ok = if s >= 1.0 { cap == 0.0 } else { cap > 0.0 };
        let match_ok = r.is_finite() == (verdict == Verdict::Transmissive);
        if !(cap_ok && match_ok) {
            mismatches.push(format!("s={s}: cap {cap}, R {r}, {verdict:?}"));
        }
    }
    check(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "20 exponents s = 0.1..2.0: cap = 0 exactly iff s ≥ 1, finiteness of R matches the verdict".into()
        } else {
            mismatches.join("; ")
        },
    )
}

fn structural() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    let mut tables: Vec<WeightTable> = (0..30).map(|_| random_table(&mut rng)).collect();
    let radial = radial_field(257, 3.2);
    let radial_table = weight_table(&radial, 2.0, &uniform_levels(1.0, E, 4096), None).map_err(|e| e.to_string())?;
    let planar = planar_field(vec![129, 65], &[-0.25, 0.0], &[1.25, 1.0]);
    tables.push(weight_table(&planar, 3.0, &uniform_levels(0.0, 1.0, 4096), None).map_err(|e| e.to_string())?);
    tables.push(radial_table.clone());

    let mut worst_series: f64 = 0.0;
    let mut worst_excess = f64::INFINITY;
    for t in &tables {
        let (a, b) = t.span();
        let r = resistance(t, a, b).map_err(|e| e.to_string())?;
        for row in t.rows.iter().skip(1).take(t.rows.len() - 2) {
            worst_series = worst_series.max(series_residual(t, a, row.t, b).map_err(|e| e.to_string())? / r);
        }
        worst_excess = worst_excess.min(linear_profile_comparison(t, a, b).map_err(|e| e.to_string())?.excess);
    }

    let mut worst_reparam: f64 = 0.0;
    for t in [&radial_table, &tables[tables.len() - 2]] {
        let (a, b) = t.span();
        let phi: Vec<f64> = t.levels().iter().map(|x| x * x * x + x).collect();
        let moved = reparametrize_table(t, &phi).map_err(|e| e.to_string())?;
        let c0 = reduced_capacity(t, a, b).map_err(|e| e.to_string())?.capacity;
        let c1 = reduced_capacity(&moved, a * a * a + a, b * b * b + b).map_err(|e| e.to_string())?.capacity;
        worst_reparam = worst_reparam.max(rel(c1, c0));
    }

    let mut worst_const: f64 = 0.0;
    for (c, p) in [(1.0, 2.0), (0.37, 1.5), (12.5, 3.0), (2.0, 4.5)] {
        let t = WeightTable::synthetic(p, &uniform_levels(-1.0, 2.0, 301), |_| c).unwrap();
        let cmp = linear_profile_comparison(&t, -1.0, 2.0).map_err(|e| e.to_string())?;
        worst_const = worst_const.max(cmp.excess.abs() / cmp.capacity);
    }
    check(
        worst_series <= 16.0 * f64::EPSILON && worst_reparam <= 1e-6 && worst_excess >= 0.0 && worst_const <= 1e-10,
        format!(
            "series residual ≤ {worst_series:.1e}·R at every knot of {} tables; reparam change {worst_reparam:.1e}; min excess {worst_excess:.2e}; constant-table excess {worst_const:.1e}",
            tables.len()
        ),
    )
}

fn smoothstep(a: f64, b: f64, n: usize) -> Profile {
    let knots = uniform_levels(a, b, n);
    let values = knots
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if i + 1 == n {
                1.0
            } else {
                let s = (t - a) / (b - a);
                s * s * (3.0 - 2.0 * s)
            }
        })
        .collect();
    Profile::new(knots, values).unwrap()
}

fn coarea() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    type Build = fn(usize) -> ScalarField;
    let models: [(&str, Build, f64, f64); 3] = [
        ("planar", |n| planar_field(vec![n, n], &[0.0, 0.0], &[1.0, 1.0]), 0.1, 0.9),
        ("radial", |n| radial_field(n, 3.2), 1.0, E),
        ("monomial", |n| monomial_field(vec![n, n], 2.0), 0.04, 0.25),
    ];
    for (name, build, a, b) in models {
        let coarse = fibered_energy(&build(129), &smoothstep(a, b, 512), 2.0).map_err(|e| e.to_string())?;
        let fine = fibered_energy(&build(257), &smoothstep(a, b, 1024), 2.0).map_err(|e| e.to_string())?;
        ok &= coarse.residual <= 1e-2 && fine.residual < coarse.residual;
        lines.push(format!("{name}: {:.1e} → {:.1e}", coarse.residual, fine.residual));
    }
    check(ok, lines.join("; "))
}

fn quadratic_identities() -> Outcome {
    let planar = planar_field(vec![129, 65], &[-0.25, 0.0], &[1.25, 1.0]);
    let opts = MinimizeOptions::new(2.0);

    let plates = Plates::Truncated { outer: None };
    let cs = plates.build(&planar, lv(0.0, 1.0)).map_err(|e| e.to_string())?;
    let (r, table) = compare_bound(&planar, lv(0.0, 1.0), &opts, &plates, 512).map_err(|e| e.to_string())?;
    let u_f = compose(&planar, &optimal_profile(&table, 0.0, 1.0).map_err(|e| e.to_string())?);
    let pol = polarization_gap(&u_f, &r.minimizer, &cs).map_err(|e| e.to_string())?;

    let disks = ConstraintSet::new(ball_mask(&planar.grid, &[0.0, 0.5], 0.1), ball_mask(&planar.grid, &[1.0, 0.5], 0.1)).unwrap();
    let (r, table) = compare_bound(&planar, lv(0.1, 0.9), &opts, &Plates::Custom(disks.clone()), 512).map_err(|e| e.to_string())?;
    let u_f = compose(&planar, &optimal_profile(&table, 0.1, 0.9).map_err(|e| e.to_string())?);
    let mis = polarization_gap(&u_f, &r.minimizer, &disks).map_err(|e| e.to_string())?;
    let split = tangential_decompose(&r.minimizer, &planar, 1e-12).map_err(|e| e.to_string())?;
    let bound = mis.energy_gap - (split.tangential - 0.01 * split.total());

    let radial = radial_field(257, 3.2);
    let (r, _) = compare_bound(&radial, lv(1.0, E), &opts, &Plates::Truncated { outer: Some(E + 0.2) }, 2048)
        .map_err(|e| e.to_string())?;
    let rs = tangential_decompose(&r.minimizer, &radial, 1e-12).map_err(|e| e.to_string())?;
    let frac = rs.tangential / rs.total();
    check(
        pol.residual <= 0.01 && bound >= 0.0 && frac <= 0.01,
        format!(
            "planar polarization residual {:.1e}; mismatched gap {:.4} vs tangential {:.4}; radial tangential share {frac:.1e}",
            pol.residual, mis.energy_gap, split.tangential
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("planar exactness", planar_exactness),
        ("radial log regime", radial_log_regime),
        ("radial power regime", radial_power_regime),
        ("monomial exponent", monomial_exponent_check),
        ("reduced optimality", optimality),
        ("fibered upper bound", comparison_matrix),
        ("transmissibility threshold", threshold),
        ("structural identities", structural),
        ("coarea consistency", coarea),
        ("quadratic identities", quadratic_identities),
    ];
    let total = Instant::now();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed in {:.1}s", criteria.len() - failed, total.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
