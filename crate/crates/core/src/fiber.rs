//! Level-set fibers and the per-level integrals built on them.
//!
//! A fiber `Σ_t = θ^{-1}(t)` is approximated by marching squares in 2-D and by
//! marching tetrahedra over the six-tetrahedron split of each cube in 3-D, with
//! linear interpolation along edges. Each element carries its measure and the
//! gradient norm of the phase at its barycenter, interpolated from the node
//! gradient field. Sums over elements run in ascending cell order so tables do
//! not depend on how levels were scheduled across threads.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{gradient, Grid, ScalarField, VectorField, MAX_DIM};

/// Relative nudge applied to a level that coincides with a node value.
pub const LEVEL_NUDGE: f64 = 1e-9;
/// Gradient floor relative to the Lipschitz estimate; below it `1/|∇θ|` counts as infinite.
pub const GRAD_FLOOR: f64 = 1e-12;

type Point = [f64; MAX_DIM];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberElement {
    /// `H^{n-1}` size of the element (length in 2-D, area in 3-D).
    pub measure: f64,
    /// Interpolated `|∇θ|` at the barycenter.
    pub grad_norm: f64,
    pub cell: usize,
    pub component: usize,
    pub barycenter: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberMesh {
    /// Requested level.
    pub level: f64,
    /// Level actually extracted (differs from `level` when nudged).
    pub extracted_level: f64,
    pub nudged: bool,
    pub elements: Vec<FiberElement>,
    pub component_count: usize,
    /// Gradient floor in force for this extraction.
    pub floor_grad: f64,
}

impl FiberMesh {
    pub fn empty(level: f64, floor_grad: f64) -> Self {
        Self {
            level,
            extracted_level: level,
            nudged: false,
            elements: Vec::new(),
            component_count: 0,
            floor_grad,
        }
    }

    pub fn min_grad(&self) -> f64 {
        self.elements.iter().map(|e| e.grad_norm).fold(f64::INFINITY, f64::min)
    }

    pub fn max_grad(&self) -> f64 {
        self.elements.iter().map(|e| e.grad_norm).fold(0.0, f64::max)
    }
}

/// Axis-aligned box used to localize fibers.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidParameter("region bounds must have matching lengths".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::InvalidParameter("region needs lo < hi on every axis".into()));
        }
        Ok(Self { lo, hi })
    }

    /// Region intersected with the grid box; `None` if the intersection is empty.
    pub fn clip_to(&self, grid: &Grid) -> Option<Region> {
        let n = grid.ndim();
        if self.lo.len() != n {
            return None;
        }
        let lo: Vec<f64> = (0..n).map(|k| self.lo[k].max(grid.lo(k))).collect();
        let hi: Vec<f64> = (0..n).map(|k| self.hi[k].min(grid.hi(k))).collect();
        Region::new(lo, hi).ok()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.lo.iter().zip(&self.hi).zip(x).all(|((l, h), v)| v >= l && v <= h)
    }

    fn whole(grid: &Grid) -> Region {
        let n = grid.ndim();
        Region { lo: (0..n).map(|k| grid.lo(k)).collect(), hi: (0..n).map(|k| grid.hi(k)).collect() }
    }
}

/// Precomputed state for repeated extraction on one field.
pub struct FiberExtractor<'a> {
    field: &'a ScalarField,
    grad: VectorField,
    sorted_values: Vec<f64>,
    cell_range: Vec<(f64, f64)>,
    min: f64,
    max: f64,
    floor_grad: f64,
}

impl<'a> FiberExtractor<'a> {
    pub fn new(field: &'a ScalarField) -> Self {
        let grad = gradient(field);
        let lip = grad.max_norm();
        let mut sorted_values = field.values.clone();
        sorted_values.sort_by(f64::total_cmp);
        let grid = &field.grid;
        let cell_range = (0..grid.cell_count())
            .map(|c| {
                let (nodes, k) = grid.cell_nodes(c);
                nodes[..k].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(field.values[i]), hi.max(field.values[i]))
                })
            })
            .collect();
        let (min, max) = field.min_max();
        Self { field, grad, sorted_values, cell_range, min, max, floor_grad: GRAD_FLOOR * lip }
    }

    pub fn field(&self) -> &ScalarField {
        self.field
    }

    pub fn gradient(&self) -> &VectorField {
        &self.grad
    }

    pub fn floor_grad(&self) -> f64 {
        self.floor_grad
    }

    pub fn value_range(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    fn nudge(&self, t: f64) -> (f64, bool) {
        let eps = LEVEL_NUDGE * (self.max - self.min);
        let mut t_eff = t;
        let mut nudged = false;
        // a single shift can land on another node value only for pathological value sets
        for _ in 0..8 {
            let pos = self.sorted_values.partition_point(|&v| v < t_eff - eps);
            let close = self.sorted_values.get(pos).is_some_and(|&v| (v - t_eff).abs() < eps);
            if !close {
                break;
            }
            t_eff += eps;
            nudged = true;
        }
        (t_eff, nudged)
    }

    /// Extract `Σ_t`, optionally restricted to `region`.
    ///
    /// Levels equal to the extreme values of the field yield an empty mesh: the
    /// fiber there is either a critical set of the phase or lies on the boundary.
    pub fn extract(&self, t: f64, region: Option<&Region>) -> Result<FiberMesh> {
        if !(t >= self.min && t <= self.max) {
            return Err(Error::LevelOutOfRange { level: t, min: self.min, max: self.max });
        }
        if t == self.min || t == self.max {
            return Ok(FiberMesh::empty(t, self.floor_grad));
        }
        let grid = &self.field.grid;
        let clip = match region {
            Some(r) => match r.clip_to(grid) {
                Some(c) => c,
                None => return Err(Error::EmptyRegion),
            },
            None => Region::whole(grid),
        };
        let (t_eff, nudged) = self.nudge(t);
        let mut raw: Vec<RawElement> = Vec::new();
        for (cell, &(lo, hi)) in self.cell_range.iter().enumerate() {
            if lo < t_eff && t_eff < hi {
                match grid.ndim() {
                    2 => self.march_square(cell, t_eff, &mut raw),
                    _ => self.march_cube(cell, t_eff, &mut raw),
                }
            }
        }
        let (labels, component_count) = label_components(&raw);
        let mut elements = Vec::with_capacity(raw.len());
        for (el, &component) in raw.iter().zip(&labels) {
            if let Some((measure, barycenter)) = clip_element(&el.verts[..el.nverts], grid.ndim(), &clip) {
                if measure > 0.0 {
                    let grad_norm = self.grad.interpolate_norm(&barycenter[..grid.ndim()]);
                    elements.push(FiberElement { measure, grad_norm, cell: el.cell, component, barycenter });
                }
            }
        }
        Ok(FiberMesh {
            level: t,
            extracted_level: t_eff,
            nudged,
            elements,
            component_count,
            floor_grad: self.floor_grad,
        })
    }

    fn edge_vertex(&self, a: usize, b: usize, t: f64) -> (Point, (usize, usize)) {
        let grid = &self.field.grid;
        let (va, vb) = (self.field.values[a], self.field.values[b]);
        let s = (t - va) / (vb - va);
        let (xa, xb) = (grid.node_coords(a), grid.node_coords(b));
        let mut p = [0.0; MAX_DIM];
        for k in 0..grid.ndim() {
            p[k] = xa[k] + s * (xb[k] - xa[k]);
        }
        (p, (a.min(b), a.max(b)))
    }

    fn march_square(&self, cell: usize, t: f64, out: &mut Vec<RawElement>) {
        let grid = &self.field.grid;
        let (nodes, _) = grid.cell_nodes(cell);
        // counter-clockwise corners: (0,0) (1,0) (1,1) (0,1); corner bit k selects +1 on axis k
        let ring = [nodes[0b00], nodes[0b01], nodes[0b11], nodes[0b10]];
        let above: [bool; 4] = std::array::from_fn(|i| self.field.values[ring[i]] > t);
        let crossing = |e: usize| above[e] != above[(e + 1) % 4];
        let crossed: Vec<usize> = (0..4).filter(|&e| crossing(e)).collect();
        let mut emit = |e1: usize, e2: usize| {
            let (p1, k1) = self.edge_vertex(ring[e1], ring[(e1 + 1) % 4], t);
            let (p2, k2) = self.edge_vertex(ring[e2], ring[(e2 + 1) % 4], t);
            out.push(RawElement::segment(cell, [p1, p2], [k1, k2]));
        };
        match crossed.len() {
            2 => emit(crossed[0], crossed[1]),
            4 => {
                let center = ring.iter().map(|&i| self.field.values[i]).sum::<f64>() / 4.0;
                // corners on the center's side stay connected; the others are cut off
                let center_above = center > t;
                for corner in 0..4 {
                    if above[corner] != center_above {
                        emit((corner + 3) % 4, corner);
                    }
                }
            }
            _ => {}
        }
    }

    fn march_cube(&self, cell: usize, t: f64, out: &mut Vec<RawElement>) {
        let grid = &self.field.grid;
        let (nodes, _) = grid.cell_nodes(cell);
        const PERMS: [[usize; 3]; 6] =
            [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for perm in PERMS {
            let c1 = 1 << perm[0];
            let c2 = c1 | (1 << perm[1]);
            let tet = [nodes[0], nodes[c1], nodes[c2], nodes[7]];
            let above: [bool; 4] = std::array::from_fn(|i| self.field.values[tet[i]] > t);
            let (up, down): (Vec<usize>, Vec<usize>) = (0..4).partition(|&i| above[i]);
            let v = |i: usize, j: usize| self.edge_vertex(tet[i], tet[j], t);
            match (up.len(), down.len()) {
                (1, 3) | (3, 1) => {
                    let (lone, rest) = if up.len() == 1 { (up[0], &down) } else { (down[0], &up) };
                    let (p0, k0) = v(lone, rest[0]);
                    let (p1, k1) = v(lone, rest[1]);
                    let (p2, k2) = v(lone, rest[2]);
                    out.push(RawElement::triangle(cell, [p0, p1, p2], [k0, k1, k2]));
                }
                (2, 2) => {
                    let (a, b, c, d) = (up[0], up[1], down[0], down[1]);
                    let (pac, kac) = v(a, c);
                    let (pad, kad) = v(a, d);
                    let (pbd, kbd) = v(b, d);
                    let (pbc, kbc) = v(b, c);
                    out.push(RawElement::triangle(cell, [pac, pad, pbd], [kac, kad, kbd]));
                    out.push(RawElement::triangle(cell, [pac, pbd, pbc], [kac, kbd, kbc]));
                }
                _ => {}
            }
        }
    }
}

struct RawElement {
    cell: usize,
    verts: [Point; 3],
    keys: [(usize, usize); 3],
    nverts: usize,
}

impl RawElement {
    fn segment(cell: usize, p: [Point; 2], k: [(usize, usize); 2]) -> Self {
        Self { cell, verts: [p[0], p[1], [0.0; MAX_DIM]], keys: [k[0], k[1], k[1]], nverts: 2 }
    }

    fn triangle(cell: usize, verts: [Point; 3], keys: [(usize, usize); 3]) -> Self {
        Self { cell, verts, keys, nverts: 3 }
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Connected components through shared edge vertices; labels follow first appearance.
fn label_components(raw: &[RawElement]) -> (Vec<usize>, usize) {
    let mut vertex_id: HashMap<(usize, usize), usize> = HashMap::new();
    let mut parent: Vec<usize> = Vec::new();
    let mut first_vertex = Vec::with_capacity(raw.len());
    for el in raw {
        let mut ids = [0usize; 3];
        for (slot, key) in ids.iter_mut().zip(&el.keys[..el.nverts]) {
            *slot = *vertex_id.entry(*key).or_insert_with(|| {
                parent.push(parent.len());
                parent.len() - 1
            });
        }
        for &id in &ids[1..el.nverts] {
            let (ra, rb) = (find(&mut parent, ids[0]), find(&mut parent, id));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        first_vertex.push(ids[0]);
    }
    let mut label_of_root: HashMap<usize, usize> = HashMap::new();
    let labels = first_vertex
        .into_iter()
        .map(|v| {
            let root = find(&mut parent, v);
            let next = label_of_root.len();
            *label_of_root.entry(root).or_insert(next)
        })
        .collect();
    (labels, label_of_root.len())
}

/// Clip a segment (2-D) or triangle (3-D) to a box; returns measure and barycenter of the clipped piece.
fn clip_element(verts: &[Point], ndim: usize, region: &Region) -> Option<(f64, Point)> {
    let mut poly: Vec<Point> = verts.to_vec();
    for k in 0..ndim {
        poly = clip_half_space(&poly, k, region.lo[k], true);
        poly = clip_half_space(&poly, k, region.hi[k], false);
        if poly.is_empty() {
            return None;
        }
    }
    if verts.len() == 2 {
        // a clipped segment stays a two-point chain
        if poly.len() < 2 {
            return None;
        }
        let (a, b) = (poly[0], poly[poly.len() - 1]);
        let len = dist(&a, &b);
        let mut c = [0.0; MAX_DIM];
        for k in 0..MAX_DIM {
            c[k] = 0.5 * (a[k] + b[k]);
        }
        Some((len, c))
    } else {
        if poly.len() < 3 {
            return None;
        }
        let mut area = 0.0;
        let mut c = [0.0; MAX_DIM];
        for i in 1..poly.len() - 1 {
            let a = tri_area(&poly[0], &poly[i], &poly[i + 1]);
            area += a;
            for k in 0..MAX_DIM {
                c[k] += a * (poly[0][k] + poly[i][k] + poly[i + 1][k]) / 3.0;
            }
        }
        if area > 0.0 {
            for v in c.iter_mut() {
                *v /= area;
            }
        } else {
            c = poly[0];
        }
        Some((area, c))
    }
}

/// Sutherland-Hodgman step against `x_axis >= bound` (`keep_above`) or `x_axis <= bound`.
/// Segments are passed as open two-point chains and handled without wraparound.
fn clip_half_space(poly: &[Point], axis: usize, bound: f64, keep_above: bool) -> Vec<Point> {
    let inside = |p: &Point| if keep_above { p[axis] >= bound } else { p[axis] <= bound };
    let cut = |p: &Point, q: &Point| {
        let s = (bound - p[axis]) / (q[axis] - p[axis]);
        let mut r = [0.0; MAX_DIM];
        for k in 0..MAX_DIM {
            r[k] = p[k] + s * (q[k] - p[k]);
        }
        r[axis] = bound;
        r
    };
    if poly.len() == 2 {
        let (a, b) = (&poly[0], &poly[1]);
        return match (inside(a), inside(b)) {
            (true, true) => poly.to_vec(),
            (true, false) => vec![*a, cut(a, b)],
            (false, true) => vec![cut(a, b), *b],
            (false, false) => Vec::new(),
        };
    }
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let cur = &poly[i];
        let prev = &poly[(i + poly.len() - 1) % poly.len()];
        match (inside(prev), inside(cur)) {
            (true, true) => out.push(*cur),
            (true, false) => out.push(cut(prev, cur)),
            (false, true) => {
                out.push(cut(prev, cur));
                out.push(*cur);
            }
            (false, false) => {}
        }
    }
    out
}

fn dist(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn tri_area(a: &Point, b: &Point, c: &Point) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let cx = u[1] * v[2] - u[2] * v[1];
    let cy = u[2] * v[0] - u[0] * v[2];
    let cz = u[0] * v[1] - u[1] * v[0];
    0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
}

pub fn extract_fiber(field: &ScalarField, t: f64, region: Option<&Region>) -> Result<FiberMesh> {
    FiberExtractor::new(field).extract(t, region)
}

/// `S_θ(t)`: total measure of the fiber.
pub fn fiber_size(mesh: &FiberMesh) -> f64 {
    mesh.elements.iter().map(|e| e.measure).sum()
}

/// Per-component energy weights, each summed in ascending cell order.
pub fn component_weights(mesh: &FiberMesh, p: f64) -> Vec<f64> {
    let mut out = vec![0.0; mesh.component_count];
    for e in &mesh.elements {
        out[e.component] += e.grad_norm.powf(p - 1.0) * e.measure;
    }
    // components fully clipped away carry no weight and are dropped
    let mut seen = vec![false; mesh.component_count];
    for e in &mesh.elements {
        seen[e.component] = true;
    }
    out.into_iter().zip(seen).filter_map(|(w, s)| s.then_some(w)).collect()
}

/// `A_{p,θ}(t)`: integral of `|∇θ|^{p-1}` over the fiber. Defined as the ordered sum of
/// [`component_weights`], so the two agree bit for bit.
pub fn energy_weight(mesh: &FiberMesh, p: f64) -> f64 {
    component_weights(mesh, p).iter().fold(0.0, |acc, w| acc + w)
}

/// `w_θ(t)`: integral of `1/|∇θ|` over the fiber, `+∞` if any element sits below the gradient floor.
pub fn pushforward_weight(mesh: &FiberMesh) -> f64 {
    let mut w = 0.0;
    for e in &mesh.elements {
        if e.grad_norm <= mesh.floor_grad {
            return f64::INFINITY;
        }
        w += e.measure / e.grad_norm;
    }
    w
}

/// `ρ = A / w`, the fiber mean of `|∇θ|^p` against the pushforward.
pub fn fiber_mean_energy(mesh: &FiberMesh, p: f64) -> Result<f64> {
    let w = pushforward_weight(mesh);
    if !w.is_finite() || w <= 0.0 {
        return Err(Error::UndefinedDecomposition(w));
    }
    Ok(energy_weight(mesh, p) / w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightRow {
    pub t: f64,
    /// Fiber size.
    pub s: f64,
    /// Energy weight.
    pub a: f64,
    /// Pushforward weight; `f64::INFINITY` is the infinite flag.
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    pub p: f64,
    pub rows: Vec<WeightRow>,
    /// Levels nudged during extraction, as human-readable notes.
    pub notes: Vec<String>,
}

impl WeightTable {
    pub fn new(p: f64, rows: Vec<WeightRow>) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must exceed 1, got {p}")));
        }
        if rows.is_empty() {
            return Err(Error::InvalidParameter("weight table has no rows".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if !r.t.is_finite() || !(r.s >= 0.0) || !(r.a >= 0.0) || !r.a.is_finite() || !(r.w >= 0.0) {
                return Err(Error::InvalidParameter(format!("row {i} has invalid entries")));
            }
            if i > 0 && !(r.t > rows[i - 1].t) {
                return Err(Error::NotIncreasing(i));
            }
        }
        Ok(Self { p, rows, notes: Vec::new() })
    }

    /// Table from a prescribed weight, read as if `|∇θ| ≡ 1` on every fiber (so `S = w = A`).
    pub fn synthetic(p: f64, levels: &[f64], weight: impl Fn(f64) -> f64) -> Result<Self> {
        let rows = levels
            .iter()
            .map(|&t| {
                let a = weight(t);
                WeightRow { t, s: a, a, w: a }
            })
            .collect();
        Self::new(p, rows)
    }

    pub fn levels(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.a).collect()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.rows[0].t, self.rows[self.rows.len() - 1].t)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,S,A,w\n");
        for r in &self.rows {
            let w = if r.w.is_infinite() { "inf".to_string() } else { r.w.to_string() };
            let _ = writeln!(out, "{},{},{},{}", r.t, r.s, r.a, w);
        }
        out
    }

    pub fn from_csv(p: f64, text: &str, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format { path: path.to_path_buf(), reason };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "t,S,A,w" => {}
            _ => return Err(bad("expected header `t,S,A,w`".into())),
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(bad(format!("row {i}: expected 4 columns")));
            }
            let num = |s: &str| -> Result<f64> {
                if s == "inf" {
                    Ok(f64::INFINITY)
                } else {
                    s.parse::<f64>().map_err(|e| bad(format!("row {i}: `{s}`: {e}")))
                }
            };
            rows.push(WeightRow { t: num(cols[0])?, s: num(cols[1])?, a: num(cols[2])?, w: num(cols[3])? });
        }
        Self::new(p, rows)
    }
}

/// Tabulate `S`, `A`, `w` over a strictly increasing level grid.
///
/// Levels are processed in parallel; each row depends only on its own level, so
/// the table is identical to a sequential run.
pub fn weight_table(field: &ScalarField, p: f64, levels: &[f64], region: Option<&Region>) -> Result<WeightTable> {
    let ex = FiberExtractor::new(field);
    weight_table_with(&ex, p, levels, region)
}

pub fn weight_table_with(ex: &FiberExtractor<'_>, p: f64, levels: &[f64], region: Option<&Region>) -> Result<WeightTable> {
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("p must exceed 1, got {p}")));
    }
    if let Some(i) = levels.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NotIncreasing(i + 1));
    }
    let meshes: Vec<FiberMesh> = levels
        .par_iter()
        .map(|&t| ex.extract(t, region))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(levels.len());
    let mut notes = Vec::new();
    for mesh in &meshes {
        let s = fiber_size(mesh);
        let a = energy_weight(mesh, p);
        let w = pushforward_weight(mesh);
        if !mesh.elements.is_empty() {
            let lo = mesh.min_grad().powf(p - 1.0) * s;
            let hi = mesh.max_grad().powf(p - 1.0) * s;
            let slack = 1e-12 * hi.max(1e-300);
            debug_assert!(lo - slack <= a && a <= hi + slack, "two-sided weight bound violated");
        }
        if mesh.nudged {
            notes.push(format!("level {} nudged to {}", mesh.level, mesh.extracted_level));
        }
        rows.push(WeightRow { t: mesh.level, s, a, w });
    }
    let mut table = WeightTable::new(p, rows)?;
    table.notes = notes;
    Ok(table)
}

/// Uniform level grid of `count` points on `[a, b]` inclusive.
pub fn uniform_levels(a: f64, b: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2, "need at least two levels");
    let h = (b - a) / (count - 1) as f64;
    (0..count).map(|i| if i + 1 == count { b } else { a + i as f64 * h }).collect()
}

/// Levels `t0 + delta * 2^{-j}` for `j = count-1, ..., 0`, increasing.
pub fn geometric_levels(t0: f64, delta: f64, count: usize) -> Vec<f64> {
    (0..count).rev().map(|j| t0 + delta * 0.5f64.powi(j as i32)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoareaCheck {
    pub volume_side: f64,
    pub level_side: f64,
    pub residual: f64,
}

/// Compare `∫_Ω |g(θ)|^p |∇θ|^p` with `∫ |g(t)|^p A_{p,θ}(t) dt`.
///
/// The volume side is the tensor trapezoid rule on the nodes; the level side is the
/// midpoint rule with `level_count` levels over the value range of `θ`.
pub fn coarea_check(field: &ScalarField, p: f64, probe: &(dyn Fn(f64) -> f64 + Sync), level_count: usize) -> Result<CoareaCheck> {
    let ex = FiberExtractor::new(field);
    let grid = &field.grid;
    let grad = ex.gradient();
    let mut volume_side = 0.0;
    for i in 0..grid.node_count() {
        let m = grid.multi_index(i);
        let mut wt = grid.cell_volume();
        for k in 0..grid.ndim() {
            if m[k] == 0 || m[k] + 1 == grid.dims()[k] {
                wt *= 0.5;
            }
        }
        let g = probe(field.values[i]).abs().powf(p);
        if g != 0.0 {
            volume_side += wt * g * grad.norm_at(i).powf(p);
        }
    }
    let (lo, hi) = ex.value_range();
    let h = (hi - lo) / level_count as f64;
    let levels: Vec<f64> = (0..level_count).map(|j| lo + (j as f64 + 0.5) * h).collect();
    let table = weight_table_with(&ex, p, &levels, None)?;
    let level_side: f64 = table
        .rows
        .iter()
        .map(|r| {
            let g = probe(r.t).abs().powf(p);
            if g == 0.0 { 0.0 } else { g * r.a * h }
        })
        .sum();
    let scale = volume_side.abs().max(level_side.abs());
    let residual = if scale == 0.0 { 0.0 } else { (volume_side - level_side).abs() / scale };
    Ok(CoareaCheck { volume_side, level_side, residual })
}
