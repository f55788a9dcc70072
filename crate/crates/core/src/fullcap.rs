//! Full relative p-capacity on the grid and the comparison with the reduced problem.
//!
//! The discrete energy is `Σ_cells (|∇u|² + ε²)^{p/2} · vol` with the
//! cell-centered gradient (average of the edge differences along each axis).
//! The solver, the fibered energies and the tangential split all use this
//! one operator.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fiber::{extract_fiber, uniform_levels, weight_table, WeightTable};
use crate::field::{check_admissible_levels, plate_masks, Grid, LevelPair, PhaseModel, ScalarField, MAX_DIM};
use crate::reduced::{self, Profile};

pub const DEFAULT_TOL_REL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 20_000;
pub const ARMIJO: f64 = 1e-4;
/// Fixed-size chunks keep the parallel reductions bit-reproducible.
const CHUNK: usize = 4096;

/// Nodes held at 0 (`E`) and at 1 (`F`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    zero: Vec<bool>,
    one: Vec<bool>,
}

impl ConstraintSet {
    pub fn new(zero: Vec<bool>, one: Vec<bool>) -> Result<Self> {
        if zero.len() != one.len() {
            return Err(Error::InvalidConstraints("masks have different lengths".into()));
        }
        if zero.iter().zip(&one).any(|(z, o)| *z && *o) {
            return Err(Error::InvalidConstraints("masks overlap".into()));
        }
        if !zero.iter().any(|&z| z) || !one.iter().any(|&o| o) {
            return Err(Error::InvalidConstraints("both masks must be nonempty".into()));
        }
        Ok(Self { zero, one })
    }

    pub fn zero_mask(&self) -> &[bool] {
        &self.zero
    }

    pub fn one_mask(&self) -> &[bool] {
        &self.one
    }

    pub fn len(&self) -> usize {
        self.zero.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zero.is_empty()
    }

    /// Prescribed value at a node, if any.
    pub fn value(&self, i: usize) -> Option<f64> {
        if self.zero[i] {
            Some(0.0)
        } else if self.one[i] {
            Some(1.0)
        } else {
            None
        }
    }

    pub fn free_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.value(i).is_none()).count()
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.len() != grid.node_count() {
            return Err(Error::InvalidConstraints(format!(
                "masks cover {} nodes, grid has {}",
                self.len(),
                grid.node_count()
            )));
        }
        Ok(())
    }
}

/// Nodes inside the closed ball of radius `radius` around `center`.
pub fn ball_mask(grid: &Grid, center: &[f64], radius: f64) -> Vec<bool> {
    let n = grid.ndim();
    (0..grid.node_count())
        .map(|i| {
            let x = grid.node_coords(i);
            (0..n).map(|k| (x[k] - center[k]).powi(2)).sum::<f64>() <= radius * radius
        })
        .collect()
}

/// How the plates of a comparison run are built from the phase.
#[derive(Debug, Clone, PartialEq)]
pub enum Plates {
    /// `E = {θ ≤ a}`, `F = {θ ≥ b}`; the levels must be admissible.
    Strict,
    /// Same masks without the boundary requirement, optionally cutting the
    /// outer plate to `{b ≤ θ ≤ outer}`. For phases whose plates reach the box.
    Truncated { outer: Option<f64> },
    /// Given masks, which must sit inside `{θ ≤ a}` and `{θ ≥ b}`.
    Custom(ConstraintSet),
}

impl Plates {
    pub fn build(&self, theta: &ScalarField, levels: LevelPair) -> Result<ConstraintSet> {
        match self {
            Plates::Strict => {
                let report = check_admissible_levels(theta, levels);
                if !report.admissible {
                    return Err(Error::NotAdmissible(report.to_string()));
                }
                let (e, f) = plate_masks(theta, levels);
                ConstraintSet::new(e, f)
            }
            Plates::Truncated { outer } => {
                let (e, mut f) = plate_masks(theta, levels);
                if let Some(c) = outer {
                    if !(*c > levels.b) {
                        return Err(Error::InvalidParameter(format!("outer cut {c} must exceed b = {}", levels.b)));
                    }
                    for (m, &v) in f.iter_mut().zip(&theta.values) {
                        *m &= v <= *c;
                    }
                }
                ConstraintSet::new(e, f).map_err(|err| match err {
                    Error::InvalidConstraints(msg) => Error::NotAdmissible(msg),
                    other => other,
                })
            }
            Plates::Custom(set) => {
                set.check_grid(&theta.grid)?;
                for (i, &v) in theta.values.iter().enumerate() {
                    if (set.zero[i] && v > levels.a) || (set.one[i] && v < levels.b) {
                        return Err(Error::InvalidConstraints(format!(
                            "node {i} with θ = {v} lies outside its plate level set"
                        )));
                    }
                }
                Ok(set.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub p: f64,
    pub eps_reg: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
}

impl MinimizeOptions {
    /// Defaults: `ε = 1e-8` for `p < 2`, 0 otherwise.
    pub fn new(p: f64) -> Self {
        Self { p, eps_reg: if p < 2.0 { 1e-8 } else { 0.0 }, tol_rel: DEFAULT_TOL_REL, max_iter: DEFAULT_MAX_ITER }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must be in (1, ∞), got {}", self.p)));
        }
        if !(self.tol_rel > 0.0) || !(self.eps_reg >= 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter("need tol_rel > 0, eps_reg ≥ 0 and max_iter ≥ 1".into()));
        }
        Ok(())
    }

    /// Slack allowed in `full ≤ reduced`, relative to the reduced capacity.
    pub fn tol_compare(&self) -> f64 {
        1e-6 + 2.0 * self.tol_rel
    }
}

/// The discrete p-Dirichlet energy on a grid.
#[derive(Debug, Clone)]
pub struct DiscreteEnergy {
    grid: Grid,
    p: f64,
    eps2: f64,
    cells: Vec<[usize; 1 << MAX_DIM]>,
    corners: usize,
    /// `1 / (2^{n-1} h_k)`: turns corner sums into averaged differences.
    scale: [f64; MAX_DIM],
    vol: f64,
}

impl DiscreteEnergy {
    pub fn new(grid: &Grid, p: f64, eps_reg: f64) -> Self {
        let n = grid.ndim();
        let cells = (0..grid.cell_count()).map(|c| grid.cell_nodes(c).0).collect();
        let mut scale = [0.0; MAX_DIM];
        for k in 0..n {
            scale[k] = 1.0 / ((1usize << (n - 1)) as f64 * grid.spacing()[k]);
        }
        Self { grid: grid.clone(), p, eps2: eps_reg * eps_reg, cells, corners: 1 << n, scale, vol: grid.cell_volume() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cell_gradient(&self, u: &[f64], cell: usize) -> [f64; MAX_DIM] {
        let n = self.grid.ndim();
        let mut g = [0.0; MAX_DIM];
        for (corner, &node) in self.cells[cell][..self.corners].iter().enumerate() {
            let v = u[node];
            for (k, gk) in g.iter_mut().enumerate().take(n) {
                if corner & (1 << k) != 0 {
                    *gk += v;
                } else {
                    *gk -= v;
                }
            }
        }
        for k in 0..n {
            g[k] *= self.scale[k];
        }
        g
    }

    fn density(&self, s: f64) -> f64 {
        let x = s + self.eps2;
        if self.p == 2.0 {
            x
        } else {
            x.powf(0.5 * self.p)
        }
    }

    /// Sum of a per-cell quantity in fixed chunks, added in order.
    fn cell_sum(&self, f: impl Fn(usize) -> f64 + Sync) -> f64 {
        let idx: Vec<usize> = (0..self.cells.len()).collect();
        let parts: Vec<f64> = idx.par_chunks(CHUNK).map(|ch| ch.iter().map(|&c| f(c)).sum::<f64>()).collect();
        parts.iter().sum()
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        let n = self.grid.ndim();
        self.vol
            * self.cell_sum(|c| {
                let g = self.cell_gradient(u, c);
                self.density(g[..n].iter().map(|x| x * x).sum())
            })
    }

    /// Energy with `ε = 0`.
    pub fn unregularized(&self, u: &[f64]) -> f64 {
        let plain = Self { eps2: 0.0, ..self.clone() };
        plain.energy(u)
    }

    /// `∂E/∂u` at every node.
    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let n = self.grid.ndim();
        let p = self.p;
        let flux: Vec<[f64; MAX_DIM]> = (0..self.cells.len())
            .into_par_iter()
            .with_min_len(CHUNK)
            .map(|c| {
                let g = self.cell_gradient(u, c);
                let x = g[..n].iter().map(|v| v * v).sum::<f64>() + self.eps2;
                let factor = if x == 0.0 {
                    0.0
                } else if p == 2.0 {
                    2.0 * self.vol
                } else {
                    p * x.powf(0.5 * p - 1.0) * self.vol
                };
                let mut f = [0.0; MAX_DIM];
                for k in 0..n {
                    f[k] = factor * g[k] * self.scale[k];
                }
                f
            })
            .collect();
        let cd = self.grid.cell_dims();
        let mut cstride = [0usize; MAX_DIM];
        let mut acc = 1;
        for k in (0..n).rev() {
            cstride[k] = acc;
            acc *= cd[k];
        }
        (0..self.grid.node_count())
            .into_par_iter()
            .with_min_len(CHUNK)
            .map(|node| {
                let m = self.grid.multi_index(node);
                let mut total = 0.0;
                'corner: for corner in 0..self.corners {
                    let mut cell = 0;
                    for k in 0..n {
                        let up = corner & (1 << k) != 0;
                        // the node is corner `corner` of the cell whose lower corner is m - bits
                        let ci = if up {
                            if m[k] == 0 {
                                continue 'corner;
                            }
                            m[k] - 1
                        } else {
                            if m[k] >= cd[k] {
                                continue 'corner;
                            }
                            m[k]
                        };
                        cell += ci * cstride[k];
                    }
                    let f = &flux[cell];
                    for k in 0..n {
                        if corner & (1 << k) != 0 {
                            total += f[k];
                        } else {
                            total -= f[k];
                        }
                    }
                }
                total
            })
            .collect()
    }
}

/// Unregularized discrete energy of a field.
pub fn dirichlet_energy(u: &ScalarField, p: f64) -> f64 {
    DiscreteEnergy::new(&u.grid, p, 0.0).energy(&u.values)
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityReport {
    pub p: f64,
    pub capacity_full: f64,
    /// Present once the reduced problem has been solved for comparison.
    pub capacity_reduced: Option<f64>,
    /// `reduced - full`, with sign.
    pub gap: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub tol: f64,
    pub grid: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_ok: Option<bool>,
    pub final_rel_decrease: f64,
    #[serde(skip)]
    pub minimizer: ScalarField,
    #[serde(skip)]
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let parts: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    parts.iter().sum()
}

fn axpy(u: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    u.iter().zip(d).map(|(x, y)| x + alpha * y).collect()
}

/// Minimizes the discrete energy with the constrained nodes held fixed.
///
/// Free nodes start from `clamp((θ - a)/(b - a), 0, 1)` when a phase is given,
/// else from 0.5. Nonlinear conjugate gradients (Polak–Ribière, restarted every
/// `⌈√n_free⌉` steps) with a quadratic-interpolation trial step and halving
/// backtracking under the Armijo condition.
pub fn p_capacity(
    grid: &Grid,
    constraints: &ConstraintSet,
    opts: &MinimizeOptions,
    phase: Option<(&ScalarField, LevelPair)>,
) -> Result<CapacityReport> {
    opts.validate()?;
    constraints.check_grid(grid)?;
    let n_nodes = grid.node_count();
    let op = DiscreteEnergy::new(grid, opts.p, opts.eps_reg);
    let free: Vec<bool> = (0..n_nodes).map(|i| constraints.value(i).is_none()).collect();
    let mut u: Vec<f64> = (0..n_nodes)
        .map(|i| match (constraints.value(i), phase) {
            (Some(v), _) => v,
            (None, Some((theta, lv))) => ((theta.values[i] - lv.a) / lv.width()).clamp(0.0, 1.0),
            (None, None) => 0.5,
        })
        .collect();
    let n_free = free.iter().filter(|&&f| f).count();
    let restart = ((n_free as f64).sqrt().ceil() as usize).max(1);

    let masked_gradient = |u: &[f64]| {
        let mut g = op.gradient(u);
        for (gi, &f) in g.iter_mut().zip(&free) {
            if !f {
                *gi = 0.0;
            }
        }
        g
    };

    let mut energy = op.energy(&u);
    let mut history = vec![energy];
    let mut g = masked_gradient(&u);
    let mut d: Vec<f64> = g.iter().map(|x| -x).collect();
    let mut gg = dot(&g, &g);
    let mut step = {
        let dmax = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if dmax > 0.0 { 0.1 / dmax } else { 1.0 }
    };
    let mut iterations = 0;
    let mut converged = n_free == 0 || gg == 0.0;
    let mut final_rel = 0.0;
    let mut since_restart = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            d = g.iter().map(|x| -x).collect();
            slope = -gg;
            since_restart = 0;
        }
        // trial step, then the minimizer of the interpolating parabola
        let trial_e = op.energy(&axpy(&u, step, &d));
        let curv = (trial_e - energy - slope * step) / (step * step);
        let mut alpha = if curv > 0.0 { -slope / (2.0 * curv) } else { 2.0 * step };
        let mut next = axpy(&u, alpha, &d);
        let mut next_e = op.energy(&next);
        if trial_e < next_e && trial_e <= energy + ARMIJO * step * slope {
            alpha = step;
            next = axpy(&u, alpha, &d);
            next_e = trial_e;
        }
        let mut accepted = next_e <= energy + ARMIJO * alpha * slope;
        while !accepted && alpha > 1e-30 {
            alpha *= 0.5;
            next = axpy(&u, alpha, &d);
            next_e = op.energy(&next);
            accepted = next_e <= energy + ARMIJO * alpha * slope;
        }
        if !accepted {
            if since_restart == 0 {
                // steepest descent cannot make progress: stationary to round-off
                converged = true;
                break;
            }
            d = g.iter().map(|x| -x).collect();
            since_restart = 0;
            continue;
        }
        final_rel = if energy > 0.0 { (energy - next_e) / energy } else { 0.0 };
        u = next;
        energy = next_e;
        history.push(energy);
        step = alpha;
        if final_rel < opts.tol_rel {
            converged = true;
            break;
        }
        let g_new = masked_gradient(&u);
        let gg_new = dot(&g_new, &g_new);
        if gg_new == 0.0 {
            converged = true;
            break;
        }
        since_restart += 1;
        let beta = if since_restart >= restart {
            since_restart = 0;
            0.0
        } else {
            ((gg_new - dot(&g_new, &g)) / gg).max(0.0)
        };
        for (di, gi) in d.iter_mut().zip(&g_new) {
            *di = -gi + beta * *di;
        }
        g = g_new;
        gg = gg_new;
    }

    // truncation to [0, 1], kept only when it does not raise the discrete energy
    let clamped: Vec<f64> = u.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    if clamped != u && op.energy(&clamped) <= energy {
        u = clamped;
    }
    let capacity_full = op.unregularized(&u);
    Ok(CapacityReport {
        p: opts.p,
        capacity_full,
        capacity_reduced: None,
        gap: None,
        iterations,
        converged,
        tol: opts.tol_rel,
        grid: grid.dims().to_vec(),
        bound_ok: None,
        final_rel_decrease: final_rel,
        minimizer: ScalarField::new(grid.clone(), u, "u_star")?,
        history,
    })
}

/// `u = ṽ∘θ` node by node.
pub fn compose(theta: &ScalarField, profile: &Profile) -> ScalarField {
    let values = theta.values.iter().map(|&t| profile.eval(t)).collect();
    ScalarField { grid: theta.grid.clone(), values, name: "fibered".into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberedEnergy {
    pub grid_energy: f64,
    pub reduced_energy: f64,
    /// `|grid - reduced| / reduced`.
    pub residual: f64,
}

/// Grid energy of `ṽ∘θ` against the reduced energy of `v` on the weight table at the profile knots.
pub fn fibered_energy(theta: &ScalarField, profile: &Profile, p: f64) -> Result<FiberedEnergy> {
    let table = weight_table(theta, p, profile.knots(), None)?;
    let grid_energy = dirichlet_energy(&compose(theta, profile), p);
    let reduced_energy = reduced::reduced_energy(profile, &table)?;
    let residual = (grid_energy - reduced_energy).abs() / reduced_energy.abs().max(f64::MIN_POSITIVE);
    Ok(FiberedEnergy { grid_energy, reduced_energy, residual })
}

/// Full capacity against the reduced capacity of `(a, b)` computed on `level_count` levels.
pub fn compare_bound(
    theta: &ScalarField,
    levels: LevelPair,
    opts: &MinimizeOptions,
    plates: &Plates,
    level_count: usize,
) -> Result<(CapacityReport, WeightTable)> {
    let constraints = plates.build(theta, levels)?;
    let table = weight_table(theta, opts.p, &uniform_levels(levels.a, levels.b, level_count.max(2)), None)?;
    let reduced = reduced::reduced_capacity(&table, levels.a, levels.b)?.capacity;
    let mut report = p_capacity(&theta.grid, &constraints, opts, Some((theta, levels)))?;
    let tol = opts.tol_compare() * reduced;
    report.capacity_reduced = Some(reduced);
    report.gap = Some(reduced - report.capacity_full);
    report.bound_ok = Some(report.capacity_full <= reduced + tol);
    if report.bound_ok == Some(false) {
        return Err(Error::ComparisonViolation { full: report.capacity_full, reduced, tol });
    }
    Ok((report, table))
}

/// Mean of `u` over each node plane orthogonal to `axis` (trapezoid weights).
pub fn transverse_average(u: &ScalarField, axis: usize) -> Result<Vec<f64>> {
    let grid = &u.grid;
    if axis >= grid.ndim() {
        return Err(Error::DimensionMismatch { expected: grid.ndim(), got: axis + 1 });
    }
    let dims = grid.dims();
    let mut sums = vec![0.0; dims[axis]];
    let mut weights = vec![0.0; dims[axis]];
    for (idx, &v) in u.values.iter().enumerate() {
        let m = grid.multi_index(idx);
        let w: f64 = (0..grid.ndim())
            .filter(|&k| k != axis)
            .map(|k| if m[k] == 0 || m[k] + 1 == dims[k] { 0.5 } else { 1.0 })
            .product();
        sums[m[axis]] += w * v;
        weights[m[axis]] += w;
    }
    Ok(sums.iter().zip(&weights).map(|(s, w)| s / w).collect())
}

/// Mean of `u` over the spheres `|x - center| = r`, using the fiber meshes of the radial phase.
pub fn spherical_average(u: &ScalarField, center: &[f64], radii: &[f64]) -> Result<Vec<f64>> {
    let grid = &u.grid;
    let n = grid.ndim();
    if center.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: center.len() });
    }
    let reach = (0..n).map(|k| (center[k] - grid.lo(k)).min(grid.hi(k) - center[k])).fold(f64::INFINITY, f64::min);
    let phase = crate::field::sample_phase(&PhaseModel::Radial { center: center.to_vec() }, grid)?;
    radii
        .iter()
        .map(|&r| {
            if !(r > 0.0 && r < reach) {
                return Err(Error::InvalidParameter(format!("radius {r} is not inside the box (reach {reach})")));
            }
            let mesh = extract_fiber(&phase, r, None)?;
            let (mut num, mut den) = (0.0, 0.0);
            for e in &mesh.elements {
                num += e.measure * u.interpolate(&e.barycenter[..n]);
                den += e.measure;
            }
            if den == 0.0 {
                return Err(Error::InvalidParameter(format!("empty sphere at radius {r}")));
            }
            Ok(num / den)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TangentialSplit {
    /// `∫ (∇u · ν)²` with `ν = ∇θ/|∇θ|`.
    pub normal: f64,
    /// `∫ |∇u - (∇u · ν) ν|²`.
    pub tangential: f64,
    /// Measure of the cells skipped because `|∇θ| ≤ floor_grad`.
    pub excluded_measure: f64,
}

impl TangentialSplit {
    pub fn total(&self) -> f64 {
        self.normal + self.tangential
    }
}

/// Splits the cell gradients of `u` along and across the cell gradients of `θ`.
pub fn tangential_decompose(u: &ScalarField, theta: &ScalarField, floor_grad: f64) -> Result<TangentialSplit> {
    if u.grid != theta.grid {
        return Err(Error::InvalidField("u and θ live on different grids".into()));
    }
    let n = u.grid.ndim();
    let op = DiscreteEnergy::new(&u.grid, 2.0, 0.0);
    let vol = u.grid.cell_volume();
    let (mut normal, mut tangential, mut excluded) = (0.0, 0.0, 0.0);
    for c in 0..u.grid.cell_count() {
        let gu = op.cell_gradient(&u.values, c);
        let gt = op.cell_gradient(&theta.values, c);
        let norm = gt[..n].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= floor_grad {
            excluded += vol;
            continue;
        }
        let along: f64 = (0..n).map(|k| gu[k] * gt[k] / norm).sum();
        let total: f64 = gu[..n].iter().map(|x| x * x).sum();
        normal += along * along * vol;
        tangential += (total - along * along).max(0.0) * vol;
    }
    Ok(TangentialSplit { normal, tangential, excluded_measure: excluded })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolarizationGap {
    /// `E(u_f) - E(u_*)`.
    pub energy_gap: f64,
    /// `∫ |∇(u_f - u_*)|²`.
    pub difference_energy: f64,
    /// `|energy_gap - difference_energy|` relative to the larger of the two.
    pub residual: f64,
}

/// Quadratic identity `E(u_f) - E(u_*) = ∫|∇(u_f - u_*)|²` on the discrete energy (p = 2).
pub fn polarization_gap(u_f: &ScalarField, u_star: &ScalarField, constraints: &ConstraintSet) -> Result<PolarizationGap> {
    if u_f.grid != u_star.grid {
        return Err(Error::InvalidField("fields live on different grids".into()));
    }
    constraints.check_grid(&u_f.grid)?;
    for i in 0..constraints.len() {
        if let Some(v) = constraints.value(i) {
            if u_f.values[i] != v || u_star.values[i] != v {
                return Err(Error::ConstraintMismatch(i));
            }
        }
    }
    let op = DiscreteEnergy::new(&u_f.grid, 2.0, 0.0);
    let energy_gap = op.energy(&u_f.values) - op.energy(&u_star.values);
    let diff: Vec<f64> = u_f.values.iter().zip(&u_star.values).map(|(a, b)| a - b).collect();
    let difference_energy = op.energy(&diff);
    let scale = energy_gap.abs().max(difference_energy);
    let residual = if scale == 0.0 { 0.0 } else { (energy_gap - difference_energy).abs() / scale };
    Ok(PolarizationGap { energy_gap, difference_energy, residual })
}
