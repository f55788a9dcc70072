//! Local analysis of the weight near a critical level `t0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fiber::{Region, WeightTable};
use crate::field::{gradient, ScalarField};
use crate::reduced::{self, FLOOR_A};

/// Minimum number of usable rows for a log-log fit.
pub const MIN_FIT_ROWS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalProfileFit {
    pub t0: f64,
    pub delta: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub rows: usize,
}

fn log_log_fit(t0: f64, delta: f64, pts: Vec<(f64, f64)>) -> Result<LocalProfileFit> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("window length must be positive, got {delta}")));
    }
    if pts.len() < MIN_FIT_ROWS {
        return Err(Error::TooFewRows(pts.len(), MIN_FIT_ROWS));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|&(t, _)| (t - t0).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|&(_, y)| y.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("fit window has a single abscissa".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(LocalProfileFit { t0, delta, slope, intercept: my - slope * mx, r_squared, rows: pts.len() })
}

fn window_rows<'a>(table: &'a WeightTable, t0: f64, delta: f64) -> impl Iterator<Item = &'a crate::fiber::WeightRow> {
    table.rows.iter().filter(move |r| r.t > t0 && r.t <= t0 + delta)
}

/// Least-squares slope of `log A` against `log(t - t0)` over `(t0, t0 + δ]`.
pub fn fit_exponent(table: &WeightTable, t0: f64, delta: f64) -> Result<LocalProfileFit> {
    let pts = window_rows(table, t0, delta).filter(|r| r.a > FLOOR_A).map(|r| (r.t, r.a)).collect();
    log_log_fit(t0, delta, pts)
}

/// Same fit for the fiber size `S`, which yields `ν`.
pub fn fit_size_exponent(table: &WeightTable, t0: f64, delta: f64) -> Result<LocalProfileFit> {
    let pts = window_rows(table, t0, delta).filter(|r| r.s > FLOOR_A).map(|r| (r.t, r.s)).collect();
    log_log_fit(t0, delta, pts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Transmissive,
    Supercritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub alpha: f64,
    pub nu: f64,
    pub p: f64,
    /// `α + ν/(p-1)`.
    pub criterion: f64,
    pub verdict: Verdict,
}

pub fn classify(alpha: f64, nu: f64, p: f64) -> Result<Classification> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("α must lie in [0, 1), got {alpha}")));
    }
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::InvalidParameter(format!("ν must be finite and nonnegative, got {nu}")));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("p must be in (1, ∞), got {p}")));
    }
    let criterion = alpha + nu / (p - 1.0);
    let verdict = if criterion < 1.0 { Verdict::Transmissive } else { Verdict::Supercritical };
    Ok(Classification { alpha, nu, p, criterion, verdict })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeReport {
    pub t0: f64,
    pub delta: f64,
    pub alpha: f64,
    pub nu: f64,
    pub p: f64,
    pub criterion: f64,
    pub verdict: Verdict,
    /// NaN (and omitted from JSON) when no weight table was given.
    #[serde(serialize_with = "crate::report::ser_f64", skip_serializing_if = "crate::report::is_nan")]
    pub local_resistance: f64,
    /// Fitted exponent of `A`, when the exponents came from the table.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
}

impl RegimeReport {
    pub fn new(t0: f64, delta: f64, c: Classification, local_resistance: f64) -> Self {
        Self {
            t0,
            delta,
            alpha: c.alpha,
            nu: c.nu,
            p: c.p,
            criterion: c.criterion,
            verdict: c.verdict,
            local_resistance,
            slope: None,
        }
    }
}

/// Fits `s` from `A` and `ν` from `S`, separates `α = (s - ν)/(p-1)` and classifies.
///
/// A slightly negative separated `α` (fit noise) is clamped to 0.
pub fn analyze(table: &WeightTable, t0: f64, delta: f64) -> Result<RegimeReport> {
    let s = fit_exponent(table, t0, delta)?.slope;
    let nu = fit_size_exponent(table, t0, delta)?.slope.max(0.0);
    let alpha = ((s - nu) / (table.p - 1.0)).max(0.0);
    let c = classify(alpha, nu, table.p)?;
    let mut report = RegimeReport::new(t0, delta, c, local_resistance(table, t0, delta)?);
    report.slope = Some(s);
    Ok(report)
}

/// `∫_{t0}^{t0+δ} A^{-1/(p-1)}` with the reduced quadrature; `+∞` when divergent.
pub fn local_resistance(table: &WeightTable, t0: f64, delta: f64) -> Result<f64> {
    reduced::resistance(table, t0, t0 + delta)
}

/// Reduced capacity of `(t0, t0 + δ)` for each `δ`.
pub fn supercritical_vanishing(table: &WeightTable, t0: f64, deltas: &[f64]) -> Result<Vec<f64>> {
    deltas
        .iter()
        .map(|&d| Ok(reduced::reduced_capacity(table, t0, t0 + d)?.capacity))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LojasiewiczCheck {
    pub holds: bool,
    /// Smallest `|∇θ| - c0 |θ - t0|^α` over the region.
    pub worst_margin: f64,
    pub witness_node: usize,
    pub witness: [f64; 3],
}

/// Checks `|∇θ| ≥ c0 |θ - t0|^α` at every node of the region.
pub fn lojasiewicz_check(field: &ScalarField, region: &Region, t0: f64, alpha: f64, c0: f64) -> Result<LojasiewiczCheck> {
    if !(0.0..1.0).contains(&alpha) || !(c0 > 0.0) {
        return Err(Error::InvalidParameter(format!("need α in [0, 1) and c0 > 0, got α={alpha}, c0={c0}")));
    }
    let grid = &field.grid;
    let grad = gradient(field);
    let mut worst: Option<(f64, usize)> = None;
    for idx in 0..grid.node_count() {
        let x = grid.node_coords(idx);
        if !region.contains(&x[..grid.ndim()]) {
            continue;
        }
        let margin = grad.norm_at(idx) - c0 * (field.values[idx] - t0).abs().powf(alpha);
        if worst.map_or(true, |(m, _)| margin < m) {
            worst = Some((margin, idx));
        }
    }
    let (worst_margin, witness_node) = worst.ok_or(Error::EmptyRegion)?;
    // round-off allowance relative to the gradient scale
    let slack = 1e-12 * grad.max_norm().max(1.0);
    Ok(LojasiewiczCheck {
        holds: worst_margin >= -slack,
        worst_margin,
        witness_node,
        witness: grid.node_coords(witness_node),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{geometric_levels, uniform_levels};
    use crate::field::{sample_phase, Grid, PhaseModel};

    fn power_table(t0: f64, s: f64, c: f64) -> WeightTable {
        let levels = geometric_levels(t0, 0.5, 24);
        WeightTable::synthetic(2.0, &levels, |t| c * (t - t0).powf(s)).unwrap()
    }

    #[test]
    fn fit_examples() {
        let f = fit_exponent(&power_table(0.3, 2.0, 1.0), 0.3, 0.5).unwrap();
        assert!((f.slope - 2.0).abs() < 0.01);
        assert!(f.r_squared > 0.999);
        let f = fit_exponent(&power_table(0.0, 0.0, 4.0), 0.0, 0.5).unwrap();
        assert!(f.slope.abs() < 1e-12);
        for c in [1e-3, 1.0, 250.0] {
            let f = fit_exponent(&power_table(0.0, 0.7, c), 0.0, 0.5).unwrap();
            assert!((f.slope - 0.7).abs() < 0.007);
        }
        let short = WeightTable::synthetic(2.0, &uniform_levels(0.0, 1.0, 5), |t| t).unwrap();
        assert!(matches!(fit_exponent(&short, 0.0, 1.0), Err(Error::TooFewRows(4, 8))));
    }

    #[test]
    fn classify_examples() {
        let c = classify(0.5, 0.0, 2.0).unwrap();
        assert_eq!((c.criterion, c.verdict), (0.5, Verdict::Transmissive));
        for p in [1.1, 2.0, 7.0] {
            assert_eq!(classify(0.0, 0.0, p).unwrap().verdict, Verdict::Transmissive);
        }
        let c = classify(0.5, 0.5, 2.0).unwrap();
        assert_eq!((c.criterion, c.verdict), (1.0, Verdict::Supercritical));
        assert!(classify(1.0, 0.0, 2.0).is_err());
        assert!(classify(-0.1, 0.0, 2.0).is_err());
    }

    #[test]
    fn local_resistance_examples() {
        let t = WeightTable::synthetic(2.0, &uniform_levels(0.0, 1.0, 11), |_| 1.0).unwrap();
        assert!((local_resistance(&t, 0.2, 0.3).unwrap() - 0.3).abs() < 1e-15);
        let mut levels: Vec<f64> = (0..1200).map(|j| 0.3 * 1.02f64.powi(-j)).collect();
        levels.push(0.0);
        levels.reverse();
        let t = WeightTable::synthetic(2.0, &levels, |t| t.sqrt()).unwrap();
        let r = local_resistance(&t, 0.0, 0.3).unwrap();
        assert!((r / (2.0 * 0.3f64.sqrt()) - 1.0).abs() < 1e-3);
        let t = WeightTable::synthetic(2.0, &levels, |t| t).unwrap();
        assert_eq!(local_resistance(&t, 0.0, 0.3).unwrap(), f64::INFINITY);
    }

    #[test]
    fn vanishing_examples() {
        let levels: Vec<f64> = std::iter::once(0.0).chain(uniform_levels(1e-4, 0.5, 2000)).collect();
        let lin = WeightTable::synthetic(2.0, &levels, |t| t).unwrap();
        assert!(supercritical_vanishing(&lin, 0.0, &[0.4, 0.2, 0.1]).unwrap().iter().all(|&c| c == 0.0));
        let one = WeightTable::synthetic(2.0, &levels, |_| 1.0).unwrap();
        let caps = supercritical_vanishing(&one, 0.0, &[0.4, 0.2, 0.1]).unwrap();
        for (c, d) in caps.iter().zip([0.4, 0.2, 0.1]) {
            assert!((c * d - 1.0).abs() < 1e-12);
        }
        let sq = WeightTable::synthetic(2.0, &levels, |t| t.sqrt()).unwrap();
        let caps = supercritical_vanishing(&sq, 0.0, &[0.4, 0.1]).unwrap();
        assert!(caps.iter().all(|&c| c > 0.0));
        assert!((caps[0] * 2.0 * 0.4f64.sqrt() - 1.0).abs() < 2e-2);
    }

    #[test]
    fn analyze_synthetic_regimes() {
        // S = A for synthetic tables, so ν carries the whole exponent
        let mut levels = vec![0.0];
        levels.extend(geometric_levels(0.0, 0.5, 24));
        let t = WeightTable::synthetic(2.0, &levels, |t| t).unwrap();
        let r = analyze(&t, 0.0, 0.5).unwrap();
        assert_eq!((r.verdict, r.local_resistance), (Verdict::Supercritical, f64::INFINITY));
        let t = WeightTable::synthetic(2.0, &levels, |t| t.powf(0.4)).unwrap();
        let r = analyze(&t, 0.0, 0.5).unwrap();
        assert_eq!(r.verdict, Verdict::Transmissive);
        assert!(r.local_resistance.is_finite());
    }

    #[test]
    fn lojasiewicz_examples() {
        let grid = Grid::from_extent(vec![65, 9], &[-1.0, 0.0], &[1.0, 1.0]).unwrap();
        let theta = sample_phase(&PhaseModel::Monomial { gamma: 2.0, axis: 0 }, &grid).unwrap();
        let region = Region::new(vec![-0.25, 0.0], vec![0.25, 1.0]).unwrap();
        assert!(lojasiewicz_check(&theta, &region, 0.0, 0.5, 1.9).unwrap().holds);
        let fail = lojasiewicz_check(&theta, &region, 0.0, 0.5, 2.1).unwrap();
        assert!(!fail.holds);
        assert!(fail.witness[0].abs() <= 0.25);
        let planar = sample_phase(&PhaseModel::Planar { axis: 0 }, &grid).unwrap();
        assert!(lojasiewicz_check(&planar, &region, 0.0, 0.0, 1.0).unwrap().holds);
        let empty = Region::new(vec![5.0, 5.0], vec![6.0, 6.0]).unwrap();
        assert!(matches!(lojasiewicz_check(&planar, &empty, 0.0, 0.0, 1.0), Err(Error::EmptyRegion)));
    }
}
