//! The one-dimensional reduced problem in the level variable.
//!
//! Everything here works on a [`WeightTable`] and shares one discretization:
//! the interval `[a, b]` is cut at the table levels into panels, and each panel
//! carries its resistance `r_i = ∫ A^{-1/(p-1)}` (trapezoid rule on the
//! knots). Energies read the weight on a panel as the constant
//! `Ā_i = (r_i / h_i)^{-(p-1)}`, i.e. the midpoint value of `A` when
//! `A^{-1/(p-1)}` is linear across the panel. With this pairing the discrete
//! problem keeps the continuum structure: the explicit profile attains
//! `R^{1-p}` exactly, Hölder bounds every other piecewise-linear profile from
//! below, and resistances add over knots.
//!
//! A level where `A` vanishes (at or below [`FLOOR_A`]) is treated as a
//! power-law zero: the panel touching it is integrated against the power law
//! through the next two table rows, which is finite exactly when the local
//! exponent `s` satisfies `s/(p-1) < 1`. A panel with vanishing weight at both
//! ends has infinite resistance.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fiber::{WeightRow, WeightTable};

/// Weights at or below this value count as vanishing.
pub const FLOOR_A: f64 = 1e-30;
/// Relative tolerance for the equality case of the linear-profile comparison.
pub const TOL_EQ: f64 = 1e-10;
/// Tail exponents within this distance of 1 count as divergent (log growth).
pub const CRITICAL_SLACK: f64 = 1e-9;

/// Monotone piecewise-linear profile `v` with `v(a) = 0` and `v(b) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl Profile {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(Error::InvalidParameter("profile needs at least two knots and one value per knot".into()));
        }
        if let Some(i) = knots.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::NotIncreasing(i + 1));
        }
        if values[0] != 0.0 || values[values.len() - 1] != 1.0 {
            return Err(Error::InvalidParameter("profile must start at 0 and end at 1".into()));
        }
        if let Some(i) = values.windows(2).position(|w| !(w[1] >= w[0])) {
            return Err(Error::InvalidParameter(format!("profile decreases at knot {}", i + 1)));
        }
        Ok(Self { knots, values })
    }

    /// The affine profile on the given knots.
    pub fn linear(knots: Vec<f64>) -> Result<Self> {
        let (a, b) = (knots[0], knots[knots.len() - 1]);
        let n = knots.len();
        let values = knots
            .iter()
            .enumerate()
            .map(|(i, &t)| if i + 1 == n { 1.0 } else { (t - a) / (b - a) })
            .collect();
        Self::new(knots, values)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn a(&self) -> f64 {
        self.knots[0]
    }

    pub fn b(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Truncated extension: 0 below `a`, 1 above `b`, piecewise linear between.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.a() {
            return 0.0;
        }
        if t >= self.b() {
            return 1.0;
        }
        let i = self.knots.partition_point(|&k| k <= t) - 1;
        let (t0, t1) = (self.knots[i], self.knots[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Largest slope over the knot intervals.
    pub fn lipschitz(&self) -> f64 {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,v\n");
        for (t, v) in self.knots.iter().zip(&self.values) {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }
}

/// Power-law model of `A^{-1/(p-1)}` next to a zero of the weight:
/// `B(d) = b1 · (d / d1)^{-q}` at distance `d` from the zero.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Tail {
    b1: f64,
    d1: f64,
    q: f64,
}

impl Tail {
    /// `∫_0^len B(d) dd`, finite only for `q < 1`.
    fn integral(&self, len: f64) -> f64 {
        if self.q >= 1.0 - CRITICAL_SLACK {
            return f64::INFINITY;
        }
        self.b1 * self.d1.powf(self.q) * len.powf(1.0 - self.q) / (1.0 - self.q)
    }

    /// `∫_0^len min(B(d), k) dd`.
    fn truncated_integral(&self, len: f64, k: f64) -> f64 {
        let c = self.b1 * self.d1.powf(self.q);
        let q = self.q;
        let antider = |lo: f64, hi: f64| {
            if q == 1.0 {
                c * (hi / lo).ln()
            } else {
                c * (hi.powf(1.0 - q) - lo.powf(1.0 - q)) / (1.0 - q)
            }
        };
        if q == 0.0 {
            return c.min(k) * len;
        }
        let b_end = c * len.powf(-q);
        let dk = (c / k).powf(1.0 / q);
        if q > 0.0 {
            if b_end >= k {
                k * len
            } else {
                k * dk + antider(dk, len)
            }
        } else if b_end <= k {
            c * len.powf(1.0 - q) / (1.0 - q)
        } else {
            c * dk.powf(1.0 - q) / (1.0 - q) + k * (len - dk)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Panel {
    lo: f64,
    hi: f64,
    /// `A^{-1/(p-1)}` at the two ends (infinite where the weight vanishes).
    b_lo: f64,
    b_hi: f64,
    /// Power-law tail when exactly one end vanishes; `at_lo` tells which.
    tail: Option<(Tail, bool)>,
    resistance: f64,
}

impl Panel {
    fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Effective constant weight on the panel.
    fn weight(&self, p: f64) -> f64 {
        if self.resistance.is_infinite() {
            0.0
        } else {
            (self.resistance / self.width()).powf(-(p - 1.0))
        }
    }

    fn truncated_resistance(&self, k: f64) -> f64 {
        match self.tail {
            Some((tail, _)) => tail.truncated_integral(self.width(), k),
            None => 0.5 * self.width() * (self.b_lo.min(k) + self.b_hi.min(k)),
        }
    }
}

fn resistance_density(a: f64, p: f64) -> f64 {
    if a <= FLOOR_A {
        f64::INFINITY
    } else {
        a.powf(-1.0 / (p - 1.0))
    }
}

/// Weight at `t` by linear interpolation of the table rows.
fn weight_at(rows: &[WeightRow], t: f64) -> f64 {
    let i = rows.partition_point(|r| r.t <= t);
    if i == 0 {
        return rows[0].a;
    }
    if i == rows.len() {
        return rows[rows.len() - 1].a;
    }
    let (r0, r1) = (&rows[i - 1], &rows[i]);
    if r0.t == t {
        return r0.a;
    }
    r0.a + (r1.a - r0.a) * (t - r0.t) / (r1.t - r0.t)
}

/// Power law through the first two table rows beyond a zero at `z` in direction `dir`.
fn fit_tail(rows: &[WeightRow], z: f64, rightward: bool, p: f64) -> Option<Tail> {
    let (r1, r2) = if rightward {
        let i = rows.partition_point(|r| r.t <= z);
        (rows.get(i)?, rows.get(i + 1)?)
    } else {
        let i = rows.partition_point(|r| r.t < z);
        if i < 2 {
            return None;
        }
        (&rows[i - 1], &rows[i - 2])
    };
    if r1.a <= FLOOR_A || r2.a <= FLOOR_A {
        return None;
    }
    let (d1, d2) = ((r1.t - z).abs(), (r2.t - z).abs());
    let s = (r2.a / r1.a).ln() / (d2 / d1).ln();
    Some(Tail { b1: resistance_density(r1.a, p), d1, q: s / (p - 1.0) })
}

fn check_span(table: &WeightTable, a: f64, b: f64) -> Result<()> {
    let (lo, hi) = table.span();
    if !(a < b) || a < lo || b > hi {
        return Err(Error::IntervalOutsideSpan { a, b, lo, hi });
    }
    Ok(())
}

fn panels(table: &WeightTable, a: f64, b: f64) -> Result<Vec<Panel>> {
    check_span(table, a, b)?;
    let p = table.p;
    let rows = &table.rows;
    let mut pts = vec![(a, weight_at(rows, a))];
    pts.extend(rows.iter().filter(|r| r.t > a && r.t < b).map(|r| (r.t, r.a)));
    pts.push((b, weight_at(rows, b)));
    let out = pts
        .windows(2)
        .map(|w| {
            let ((t0, a0), (t1, a1)) = (w[0], w[1]);
            let (b_lo, b_hi) = (resistance_density(a0, p), resistance_density(a1, p));
            let h = t1 - t0;
            let (tail, resistance) = match (b_lo.is_finite(), b_hi.is_finite()) {
                (true, true) => (None, 0.5 * h * (b_lo + b_hi)),
                (false, false) => (None, f64::INFINITY),
                (false, true) => match fit_tail(rows, t0, true, p) {
                    Some(tl) => (Some((tl, true)), tl.integral(h)),
                    None => (None, f64::INFINITY),
                },
                (true, false) => match fit_tail(rows, t1, false, p) {
                    Some(tl) => (Some((tl, false)), tl.integral(h)),
                    None => (None, f64::INFINITY),
                },
            };
            Panel { lo: t0, hi: t1, b_lo, b_hi, tail, resistance }
        })
        .collect();
    Ok(out)
}

/// Compensated sum, so that resistances add over knots up to a few ulps.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    if sum.is_finite() {
        sum + carry
    } else {
        sum
    }
}

fn total(panels: &[Panel]) -> f64 {
    compensated_sum(panels.iter().map(|p| p.resistance))
}

/// `R = ∫_a^b A^{-1/(p-1)} dt`; `f64::INFINITY` flags divergence.
pub fn resistance(table: &WeightTable, a: f64, b: f64) -> Result<f64> {
    Ok(total(&panels(table, a, b)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Finite,
    Divergent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedReport {
    pub p: f64,
    pub a: f64,
    pub b: f64,
    /// `f64::INFINITY` when divergent.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub resistance: f64,
    pub capacity: f64,
    pub branch: Branch,
    /// Number of quadrature points on `[a, b]`.
    pub levels: usize,
}

/// `cap = R^{1-p}`, with `cap = 0` when `R = +∞`.
pub fn reduced_capacity(table: &WeightTable, a: f64, b: f64) -> Result<ReducedReport> {
    let ps = panels(table, a, b)?;
    let r = total(&ps);
    let (capacity, branch) = if r.is_finite() {
        (r.powf(1.0 - table.p), Branch::Finite)
    } else {
        (0.0, Branch::Divergent)
    };
    Ok(ReducedReport { p: table.p, a, b, resistance: r, capacity, branch, levels: ps.len() + 1 })
}

fn cumulative_profile(ps: &[Panel], per_panel: impl Fn(&Panel) -> f64, total: f64) -> Result<Profile> {
    let mut knots = vec![ps[0].lo];
    let mut values = vec![0.0];
    let mut acc = 0.0;
    for (i, p) in ps.iter().enumerate() {
        acc += per_panel(p);
        knots.push(p.hi);
        values.push(if i + 1 == ps.len() { 1.0 } else { (acc / total).min(1.0) });
    }
    Profile::new(knots, values)
}

/// `v_*(t) = R(a,t) / R(a,b)` on the quadrature points.
pub fn optimal_profile(table: &WeightTable, a: f64, b: f64) -> Result<Profile> {
    let ps = panels(table, a, b)?;
    let r = total(&ps);
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::NoMinimizer(r));
    }
    cumulative_profile(&ps, |p| p.resistance, r)
}

/// `∫ |v'|^p A dt` over the profile's interval.
pub fn reduced_energy(profile: &Profile, table: &WeightTable) -> Result<f64> {
    let p = table.p;
    let ps = panels(table, profile.a(), profile.b())?;
    let mut energy = 0.0;
    for panel in &ps {
        let weight = panel.weight(p);
        if weight == 0.0 {
            continue;
        }
        // breakpoints: panel ends plus profile knots inside
        let mut cuts = vec![panel.lo];
        cuts.extend(profile.knots().iter().copied().filter(|&k| k > panel.lo && k < panel.hi));
        cuts.push(panel.hi);
        let mut integral = 0.0;
        for w in cuts.windows(2) {
            let h = w[1] - w[0];
            let slope = (profile.eval(w[1]) - profile.eval(w[0])) / h;
            integral += slope.abs().powf(p) * h;
        }
        energy += weight * integral;
    }
    Ok(energy)
}

/// `v_k(t) = ∫_a^t min(B, k) / c_k` with `B = A^{-1/(p-1)}`.
pub fn truncated_profile(table: &WeightTable, a: f64, b: f64, k: f64) -> Result<Profile> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation level must be positive, got {k}")));
    }
    let ps = panels(table, a, b)?;
    let ck: f64 = ps.iter().map(|p| p.truncated_resistance(k)).sum();
    if !(ck > 0.0) {
        return Err(Error::ZeroNormalization);
    }
    cumulative_profile(&ps, |p| p.truncated_resistance(k), ck)
}

/// Normalization constant `c_k` of [`truncated_profile`].
pub fn truncated_normalization(table: &WeightTable, a: f64, b: f64, k: f64) -> Result<f64> {
    Ok(panels(table, a, b)?.iter().map(|p| p.truncated_resistance(k)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearComparison {
    pub linear_energy: f64,
    pub capacity: f64,
    pub excess: f64,
    /// Excess within [`TOL_EQ`] of zero (constant-weight case).
    pub equality: bool,
}

/// Energy of the affine profile against the reduced capacity.
pub fn linear_profile_comparison(table: &WeightTable, a: f64, b: f64) -> Result<LinearComparison> {
    let report = reduced_capacity(table, a, b)?;
    let knots: Vec<f64> = {
        let mut k = vec![a];
        k.extend(table.rows.iter().map(|r| r.t).filter(|&t| t > a && t < b));
        k.push(b);
        k
    };
    let linear_energy = reduced_energy(&Profile::linear(knots)?, table)?;
    let cap = report.capacity;
    let mut excess = linear_energy - cap;
    let tol = TOL_EQ * cap.max(linear_energy);
    if excess < 0.0 && excess >= -tol {
        // round-off in the equality case
        excess = 0.0;
    }
    Ok(LinearComparison { linear_energy, capacity: cap, excess, equality: excess.abs() <= tol })
}

/// `|R(a,b) - R(a,c) - R(c,b)|`; `c` must be a table level.
pub fn series_residual(table: &WeightTable, a: f64, c: f64, b: f64) -> Result<f64> {
    if !table.rows.iter().any(|r| r.t == c) {
        return Err(Error::NotAKnot(c));
    }
    if !(a < c && c < b) {
        return Err(Error::InvalidParameter(format!("need a < c < b, got ({a}, {c}, {b})")));
    }
    let whole = resistance(table, a, b)?;
    let left = resistance(table, a, c)?;
    let right = resistance(table, c, b)?;
    if whole.is_infinite() && (left + right).is_infinite() {
        return Ok(0.0);
    }
    Ok((whole - left - right).abs())
}

/// Weight table of `φ∘θ` given samples `φ(t_i)` at the table levels.
///
/// Levels move to `φ(t_i)`, `A` picks up `φ'^{p-1}` and `w` is divided by `φ'`,
/// with `φ'` from centered difference quotients (one-sided at the ends).
pub fn reparametrize_table(table: &WeightTable, phi: &[f64]) -> Result<WeightTable> {
    let n = table.rows.len();
    if phi.len() != n || n < 2 {
        return Err(Error::InvalidParameter("need one φ sample per table row (at least two)".into()));
    }
    if let Some(i) = phi.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NotIncreasing(i + 1));
    }
    let t = table.levels();
    let rows = (0..n)
        .map(|i| {
            let (l, r) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let dphi = (phi[r] - phi[l]) / (t[r] - t[l]);
            let row = table.rows[i];
            WeightRow { t: phi[i], s: row.s, a: dphi.powf(table.p - 1.0) * row.a, w: row.w / dphi }
        })
        .collect();
    WeightTable::new(table.p, rows)
}

/// Capacity bounds from envelopes `γ_lo ≤ Γ ≤ γ_hi` and `m ≤ S ≤ M` sampled on `levels`.
pub fn two_sided_bounds(
    gamma_lo: &[f64],
    gamma_hi: &[f64],
    m: &[f64],
    big_m: &[f64],
    levels: &[f64],
    p: f64,
) -> Result<(f64, f64)> {
    let n = levels.len();
    if [gamma_lo.len(), gamma_hi.len(), m.len(), big_m.len()].iter().any(|&l| l != n) {
        return Err(Error::InvalidParameter("envelopes must be sampled on the level grid".into()));
    }
    for i in 0..n {
        if !(0.0 <= gamma_lo[i] && gamma_lo[i] <= gamma_hi[i] && 0.0 <= m[i] && m[i] <= big_m[i]) {
            return Err(Error::EnvelopeOrder(i));
        }
    }
    let bound = |g: &[f64], s: &[f64]| -> Result<f64> {
        let rows = (0..n)
            .map(|i| {
                let a = g[i].powf(p - 1.0) * s[i];
                WeightRow { t: levels[i], s: s[i], a, w: a }
            })
            .collect();
        let table = WeightTable::new(p, rows)?;
        Ok(reduced_capacity(&table, levels[0], levels[n - 1])?.capacity)
    };
    Ok((bound(gamma_lo, m)?, bound(gamma_hi, big_m)?))
}

/// Largest relative deviation of `A` from `Γ^{p-1} S` over the rows.
pub fn eikonal_check(table: &WeightTable, gamma: &[f64]) -> Result<f64> {
    if gamma.len() != table.rows.len() {
        return Err(Error::InvalidParameter("Γ must be sampled at every table level".into()));
    }
    if let Some(i) = gamma.iter().position(|&g| !(g >= 0.0)) {
        return Err(Error::InvalidParameter(format!("Γ is negative at sample {i}")));
    }
    Ok(table
        .rows
        .iter()
        .zip(gamma)
        .map(|(r, g)| (r.a - g.powf(table.p - 1.0) * r.s).abs() / r.a.max(FLOOR_A))
        .fold(0.0, f64::max))
}
