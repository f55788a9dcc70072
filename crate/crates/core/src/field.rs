//! Phase fields on uniform Cartesian grids.
//!
//! Values live at grid nodes, stored row-major with the last axis varying
//! fastest. Between nodes a field is read by multilinear interpolation, the
//! same convention the fiber extraction uses along cell edges.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Maximum number of axes supported by the grid code.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    dims: Vec<usize>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
}

impl Grid {
    pub fn new(dims: Vec<usize>, spacing: Vec<f64>, origin: Vec<f64>) -> Result<Self> {
        let n = dims.len();
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::InvalidGrid(format!("{n} axes; only 2 or 3 are supported")));
        }
        if spacing.len() != n || origin.len() != n {
            return Err(Error::InvalidGrid(
                "dims, spacing and origin must have the same length".into(),
            ));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidGrid(format!("axis with {d} nodes; need at least 2")));
        }
        if spacing.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidGrid("spacing must be positive and finite".into()));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { dims, spacing, origin })
    }

    /// Grid with `dims[k]` nodes spanning the closed interval `[lo[k], hi[k]]` per axis.
    pub fn from_extent(dims: Vec<usize>, lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != dims.len() || hi.len() != dims.len() {
            return Err(Error::InvalidGrid("extent must match the number of axes".into()));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidGrid("need at least 2 nodes per axis".into()));
        }
        let spacing = dims
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(&d, (&l, &h))| (h - l) / (d - 1) as f64)
            .collect();
        Self::new(dims, spacing, lo.to_vec())
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.dims.iter().map(|d| d - 1).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Lower corner of the box along `axis`.
    pub fn lo(&self, axis: usize) -> f64 {
        self.origin[axis]
    }

    /// Upper corner of the box along `axis`.
    pub fn hi(&self, axis: usize) -> f64 {
        self.origin[axis] + (self.dims[axis] - 1) as f64 * self.spacing[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.ndim()).map(|k| self.hi(k) - self.lo(k)).product()
    }

    /// Linear stride of each axis in the node array.
    pub fn strides(&self) -> [usize; MAX_DIM] {
        let mut s = [0; MAX_DIM];
        let mut acc = 1;
        for k in (0..self.ndim()).rev() {
            s[k] = acc;
            acc *= self.dims[k];
        }
        s
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        let s = self.strides();
        multi.iter().enumerate().map(|(k, &i)| i * s[k]).sum()
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        for k in (0..self.ndim()).rev() {
            m[k] = idx % self.dims[k];
            idx /= self.dims[k];
        }
        m
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.spacing[axis]
    }

    pub fn node_coords(&self, idx: usize) -> [f64; MAX_DIM] {
        let m = self.multi_index(idx);
        let mut x = [0.0; MAX_DIM];
        for k in 0..self.ndim() {
            x[k] = self.coord(k, m[k]);
        }
        x
    }

    /// True for nodes on the outermost layer, which stands in for the boundary of the box.
    pub fn is_boundary(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        (0..self.ndim()).any(|k| m[k] == 0 || m[k] + 1 == self.dims[k])
    }

    /// Cell dims (nodes minus one per axis).
    pub fn cell_dims(&self) -> [usize; MAX_DIM] {
        let mut c = [1; MAX_DIM];
        for k in 0..self.ndim() {
            c[k] = self.dims[k] - 1;
        }
        c
    }

    /// Lower-corner node multi-index of a cell given its linear index.
    pub fn cell_corner(&self, cell: usize) -> [usize; MAX_DIM] {
        let cd = self.cell_dims();
        let mut m = [0; MAX_DIM];
        let mut c = cell;
        for k in (0..self.ndim()).rev() {
            m[k] = c % cd[k];
            c /= cd[k];
        }
        m
    }

    /// Node indices of the 2^n corners of a cell; bit k of the corner number selects +1 along axis k.
    pub fn cell_nodes(&self, cell: usize) -> ([usize; 1 << MAX_DIM], usize) {
        let base = self.cell_corner(cell);
        let s = self.strides();
        let n = self.ndim();
        let b = self.index(&base[..n]);
        let mut out = [0; 1 << MAX_DIM];
        for (c, slot) in out.iter_mut().enumerate().take(1 << n) {
            let mut idx = b;
            for k in 0..n {
                if c & (1 << k) != 0 {
                    idx += s[k];
                }
            }
            *slot = idx;
        }
        (out, 1 << n)
    }

    /// Locate a point: per-axis cell index and fractional offset in [0,1].
    /// Points outside the box are clamped onto it.
    pub fn locate(&self, x: &[f64]) -> ([usize; MAX_DIM], [f64; MAX_DIM]) {
        let mut cell = [0; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for k in 0..self.ndim() {
            let u = (x[k] - self.origin[k]) / self.spacing[k];
            let i = (u.floor().max(0.0) as usize).min(self.dims[k] - 2);
            cell[k] = i;
            frac[k] = (u - i as f64).clamp(0.0, 1.0);
        }
        (cell, frac)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.ndim()).all(|k| x[k] >= self.lo(k) && x[k] <= self.hi(k))
    }

    fn multilinear(&self, x: &[f64], sample: impl Fn(usize) -> f64) -> f64 {
        let n = self.ndim();
        let (cell, frac) = self.locate(x);
        let s = self.strides();
        let base = self.index(&cell[..n]);
        let mut acc = 0.0;
        for c in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = base;
            for k in 0..n {
                if c & (1 << k) != 0 {
                    w *= frac[k];
                    idx += s[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w != 0.0 {
                acc += w * sample(idx);
            }
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub name: String,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidField(format!(
                "{} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values, name: name.into() })
    }

    /// Build a field by evaluating `f` at every node.
    pub fn from_fn(grid: Grid, name: impl Into<String>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let n = grid.ndim();
        let values = (0..grid.node_count())
            .map(|i| f(&grid.node_coords(i)[..n]))
            .collect();
        Self::new(grid, values, name)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn interpolate(&self, x: &[f64]) -> f64 {
        self.grid.multilinear(x, |i| self.values[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.ndim() {
            return Err(Error::DimensionMismatch { expected: grid.ndim(), got: components.len() });
        }
        for c in &components {
            if c.len() != grid.node_count() || c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidField("vector component has wrong length or non-finite values".into()));
            }
        }
        Ok(Self { grid, components })
    }

    pub fn norm_at(&self, idx: usize) -> f64 {
        self.components.iter().map(|c| c[idx] * c[idx]).sum::<f64>().sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.grid.node_count()).map(|i| self.norm_at(i)).fold(0.0, f64::max)
    }

    /// Multilinear interpolation of each component at `x`.
    pub fn interpolate(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        for (k, c) in self.components.iter().enumerate() {
            out[k] = self.grid.multilinear(x, |i| c[i]);
        }
        out
    }

    /// Norm of the interpolated vector at `x`.
    pub fn interpolate_norm(&self, x: &[f64]) -> f64 {
        let v = self.interpolate(x);
        v.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// Analytic and file-backed phases.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseModel {
    /// `θ(x) = x_axis`.
    Planar { axis: usize },
    /// `θ(x) = |x - center|`.
    Radial { center: Vec<f64> },
    /// `θ(x) = |x_axis|^gamma` with `gamma > 1`.
    Monomial { gamma: f64, axis: usize },
    File { path: PathBuf },
}

impl PhaseModel {
    pub fn validate(&self, ndim: usize) -> Result<()> {
        match self {
            PhaseModel::Planar { axis } | PhaseModel::Monomial { axis, .. } if *axis >= ndim => {
                Err(Error::InvalidParameter(format!("axis {axis} out of range for {ndim}-D grid")))
            }
            PhaseModel::Monomial { gamma, .. } if !(*gamma > 1.0 && gamma.is_finite()) => {
                Err(Error::InvalidParameter(format!("monomial exponent must exceed 1, got {gamma}")))
            }
            PhaseModel::Radial { center } if center.len() != ndim => {
                Err(Error::DimensionMismatch { expected: ndim, got: center.len() })
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            PhaseModel::Planar { .. } => "planar".into(),
            PhaseModel::Radial { .. } => "radial".into(),
            PhaseModel::Monomial { .. } => "monomial".into(),
            PhaseModel::File { path } => path.display().to_string(),
        }
    }

    /// Point evaluation for the analytic kinds; `None` for file-backed phases.
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        match self {
            PhaseModel::Planar { axis } => Some(x[*axis]),
            PhaseModel::Radial { center } => Some(
                x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt(),
            ),
            PhaseModel::Monomial { gamma, axis } => Some(x[*axis].abs().powf(*gamma)),
            PhaseModel::File { .. } => None,
        }
    }
}

/// A pair of levels `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelPair {
    pub a: f64,
    pub b: f64,
}

impl LevelPair {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("levels must satisfy a < b, got ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }
}

pub fn sample_phase(model: &PhaseModel, grid: &Grid) -> Result<ScalarField> {
    model.validate(grid.ndim())?;
    if let PhaseModel::File { path } = model {
        let field = read_field(path)?;
        if field.grid.ndim() != grid.ndim() {
            return Err(Error::DimensionMismatch { expected: grid.ndim(), got: field.grid.ndim() });
        }
        return Ok(field);
    }
    ScalarField::from_fn(grid.clone(), model.name(), |x| model.eval(x).unwrap_or(f64::NAN))
}

/// Node gradient: central differences inside, one-sided second-order stencils on the outer layer.
pub fn gradient(field: &ScalarField) -> VectorField {
    let grid = &field.grid;
    let n = grid.ndim();
    let s = grid.strides();
    let u = &field.values;
    let components = (0..n)
        .map(|k| {
            let h = grid.spacing()[k];
            let d = grid.dims()[k];
            (0..grid.node_count())
                .map(|idx| {
                    let i = grid.multi_index(idx)[k];
                    let at = |off: isize| u[(idx as isize + off * s[k] as isize) as usize];
                    if d == 2 {
                        if i == 0 { (at(1) - at(0)) / h } else { (at(0) - at(-1)) / h }
                    } else if i == 0 {
                        (4.0 * (at(1) - at(0)) - (at(2) - at(0))) / (2.0 * h)
                    } else if i + 1 == d {
                        (4.0 * (at(0) - at(-1)) - (at(0) - at(-2))) / (2.0 * h)
                    } else {
                        (at(1) - at(-1)) / (2.0 * h)
                    }
                })
                .collect()
        })
        .collect();
    VectorField { grid: grid.clone(), components }
}

/// Node masks of the plates `E_a = {θ ≤ a}` and `F_b = {θ ≥ b}`.
pub fn plate_masks(field: &ScalarField, levels: LevelPair) -> (Vec<bool>, Vec<bool>) {
    let e = field.values.iter().map(|&v| v <= levels.a).collect();
    let f = field.values.iter().map(|&v| v >= levels.b).collect();
    (e, f)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub a: f64,
    pub b: f64,
    /// Range of θ over the outer node layer.
    pub boundary_min: f64,
    pub boundary_max: f64,
    pub boundary_inside: bool,
    pub e_nonempty: bool,
    pub f_nonempty: bool,
    pub admissible: bool,
}

impl std::fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "levels ({}, {}): boundary θ in [{}, {}] ({}), E_a {}, F_b {}",
            self.a,
            self.b,
            self.boundary_min,
            self.boundary_max,
            if self.boundary_inside { "inside (a,b)" } else { "not inside (a,b)" },
            if self.e_nonempty { "nonempty" } else { "empty" },
            if self.f_nonempty { "nonempty" } else { "empty" },
        )
    }
}

pub fn check_admissible_levels(field: &ScalarField, levels: LevelPair) -> AdmissibilityReport {
    let grid = &field.grid;
    let (mut bmin, mut bmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &v) in field.values.iter().enumerate() {
        if grid.is_boundary(i) {
            bmin = bmin.min(v);
            bmax = bmax.max(v);
        }
    }
    let boundary_inside = levels.a < bmin && bmax < levels.b;
    let e_nonempty = field.values.iter().any(|&v| v <= levels.a);
    let f_nonempty = field.values.iter().any(|&v| v >= levels.b);
    AdmissibilityReport {
        a: levels.a,
        b: levels.b,
        boundary_min: bmin,
        boundary_max: bmax,
        boundary_inside,
        e_nonempty,
        f_nonempty,
        admissible: boundary_inside && e_nonempty && f_nonempty,
    }
}

const FILE_MAGIC: &str = "PHASEFIELD v1";

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Text encoding of a field. `f64` display is the shortest representation that round-trips.
pub fn encode_field(field: &ScalarField) -> String {
    let g = &field.grid;
    let mut out = String::with_capacity(24 * field.values.len() + 64);
    let _ = writeln!(out, "{FILE_MAGIC}");
    let _ = writeln!(out, "{}", g.ndim());
    let _ = writeln!(out, "{}", join(g.dims()));
    let _ = writeln!(out, "{}", join(g.spacing()));
    let _ = writeln!(out, "{}", join(g.origin()));
    for v in &field.values {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn decode_field(text: &str, name: &str, path: &Path) -> Result<ScalarField> {
    let bad = |reason: String| Error::Format { path: path.to_path_buf(), reason };
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| bad(format!("missing {what}")));
    if next("header")? != FILE_MAGIC {
        return Err(bad("expected `PHASEFIELD v1` header".into()));
    }
    let ndim: usize = next("dimension count")?
        .parse()
        .map_err(|e| bad(format!("dimension count: {e}")))?;
    fn parse_row<T: std::str::FromStr>(line: &str, n: usize) -> std::result::Result<Vec<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        let v = line
            .split_whitespace()
            .map(|t| t.parse::<T>().map_err(|e| format!("`{t}`: {e}")))
            .collect::<std::result::Result<Vec<T>, String>>()?;
        if v.len() != n {
            return Err(format!("expected {n} entries, found {}", v.len()));
        }
        Ok(v)
    }
    let dims = parse_row::<usize>(next("dims")?, ndim).map_err(|e| bad(format!("dims: {e}")))?;
    let spacing = parse_row::<f64>(next("spacing")?, ndim).map_err(|e| bad(format!("spacing: {e}")))?;
    let origin = parse_row::<f64>(next("origin")?, ndim).map_err(|e| bad(format!("origin: {e}")))?;
    let grid = Grid::new(dims, spacing, origin)?;
    let values = lines
        .map(|l| l.parse::<f64>().map_err(|e| bad(format!("value `{l}`: {e}"))))
        .collect::<Result<Vec<f64>>>()?;
    ScalarField::new(grid, values, name).map_err(|e| bad(e.to_string()))
}

pub fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    fs::write(path, encode_field(field))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    let text = fs::read_to_string(path)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    decode_field(&text, &name, path)
}
