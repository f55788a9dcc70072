//! Command-line front end.
//!
//! Settings come from flags, then from an optional flat `key = value` config
//! file, then from per-model defaults. Exit codes: 0 ok, 1 runtime failure,
//! 2 usage, 3 inadmissible levels, 4 solver did not converge.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::critical::{self, RegimeReport};
use crate::error::Error;
use crate::fiber::{geometric_levels, uniform_levels, weight_table, Region, WeightTable};
use crate::field::{read_field, sample_phase, write_field, Grid, LevelPair, PhaseModel, ScalarField};
use crate::fullcap::{self, ball_mask, ConstraintSet, MinimizeOptions, Plates};
use crate::oracles::{self, ModelKind, ModelSpec};
use crate::reduced::{self, reduced_capacity};
use crate::report::{ser_f64, to_json};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ADMISSIBILITY: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "phasecap", version, about = "Phase-reduced p-capacity: weight tables, reduced and full capacities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate fiber size, energy weight and pushforward weight (CSV `t,S,A,w`)
    Weight(Opts),
    /// Reduced resistance and capacity of a level interval (JSON)
    Reduce(Opts),
    /// Full capacity by energy minimization, compared with the reduced bound (JSON)
    Fullcap(Opts),
    /// Local regime at a critical level (JSON)
    Classify(Opts),
    /// Fibered defect, tangential energy and polarization identity, p = 2 only (JSON)
    Defect(Opts),
    /// Closed-form values for the planar, radial and monomial models (JSON)
    Model(Opts),
}

#[derive(Debug, Clone, Default, Args)]
struct Opts {
    /// Flat `key = value` file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Phase model: planar, radial, monomial or file
    #[arg(long)]
    model: Option<String>,
    /// Field file for `--model file`
    #[arg(long)]
    input: Option<PathBuf>,
    /// Weight table CSV (`t,S,A,w`) used instead of a field
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// Number of levels
    #[arg(long)]
    levels: Option<usize>,
    /// Nodes per axis, `NX[,NY[,NZ]]`
    #[arg(long)]
    grid: Option<String>,
    /// Box, `lo..hi,lo..hi[,lo..hi]`
    #[arg(long)]
    extent: Option<String>,
    /// Localizing box, `lo..hi,...`
    #[arg(long)]
    region: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Axis of the planar and monomial phases
    #[arg(long)]
    axis: Option<usize>,
    /// Center of the radial phase, `x,y[,z]`
    #[arg(long)]
    center: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative energy decrease that stops the solver
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Plate construction: strict or truncated
    #[arg(long)]
    plates: Option<String>,
    /// Cut the outer plate to `b ≤ θ ≤ outer`
    #[arg(long)]
    outer: Option<f64>,
    /// Zero plate as a ball, `x,y[,z],r` (use with --f-disk)
    #[arg(long)]
    e_disk: Option<String>,
    /// One plate as a ball, `x,y[,z],r`
    #[arg(long)]
    f_disk: Option<String>,
    /// Write the optimal profile as CSV `t,v`
    #[arg(long)]
    emit_profile: Option<PathBuf>,
    /// Write the full minimizer in the field file format
    #[arg(long)]
    save_minimizer: Option<PathBuf>,
    /// Reparametrize the levels before reducing: `cubic` is t ↦ t³ + t
    #[arg(long)]
    reparam: Option<String>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotAdmissible(_) => EXIT_ADMISSIBILITY,
            Error::Io(_) | Error::ComparisonViolation { .. } | Error::NoMinimizer(_) => EXIT_FAILURE,
            _ => EXIT_USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn parse_config(path: &Path) -> CliResult<HashMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("{}:{}: expected `key = value`", path.display(), n + 1)))?;
        map.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(map)
}

fn fill<T: FromStr>(slot: &mut Option<T>, map: &mut HashMap<String, String>, key: &str) -> CliResult<()>
where
    T::Err: std::fmt::Display,
{
    if let Some(raw) = map.remove(key) {
        if slot.is_none() {
            *slot = Some(raw.parse().map_err(|e| Failure::usage(format!("config key `{key}`: {e}")))?);
        }
    }
    Ok(())
}

impl Opts {
    /// Fills unset options from the config file.
    fn merge_config(mut self) -> CliResult<Self> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let mut m = parse_config(&path)?;
        fill(&mut self.model, &mut m, "model")?;
        fill(&mut self.input, &mut m, "input")?;
        fill(&mut self.table, &mut m, "table")?;
        fill(&mut self.p, &mut m, "p")?;
        fill(&mut self.a, &mut m, "a")?;
        fill(&mut self.b, &mut m, "b")?;
        fill(&mut self.levels, &mut m, "levels")?;
        fill(&mut self.grid, &mut m, "grid")?;
        fill(&mut self.extent, &mut m, "extent")?;
        fill(&mut self.region, &mut m, "region")?;
        fill(&mut self.gamma, &mut m, "gamma")?;
        fill(&mut self.axis, &mut m, "axis")?;
        fill(&mut self.center, &mut m, "center")?;
        fill(&mut self.out, &mut m, "out")?;
        fill(&mut self.tol, &mut m, "tol")?;
        fill(&mut self.max_iter, &mut m, "max_iter")?;
        fill(&mut self.plates, &mut m, "plates")?;
        fill(&mut self.outer, &mut m, "outer")?;
        fill(&mut self.e_disk, &mut m, "e_disk")?;
        fill(&mut self.f_disk, &mut m, "f_disk")?;
        fill(&mut self.emit_profile, &mut m, "emit_profile")?;
        fill(&mut self.save_minimizer, &mut m, "save_minimizer")?;
        fill(&mut self.reparam, &mut m, "reparam")?;
        fill(&mut self.t0, &mut m, "t0")?;
        fill(&mut self.delta, &mut m, "delta")?;
        fill(&mut self.alpha, &mut m, "alpha")?;
        fill(&mut self.nu, &mut m, "nu")?;
        if let Some(k) = m.keys().min() {
            return Err(Failure::usage(format!("unknown config key `{k}` in {}", path.display())));
        }
        Ok(self)
    }

    fn p(&self) -> f64 {
        self.p.unwrap_or(2.0)
    }
}

fn parse_list(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| Failure::usage(format!("{what}: `{x}`: {e}"))))
        .collect()
}

fn parse_ranges(s: &str, what: &str) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for part in s.split(',') {
        let (l, h) = part
            .split_once("..")
            .ok_or_else(|| Failure::usage(format!("{what}: expected `lo..hi`, got `{part}`")))?;
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| Failure::usage(format!("{what}: `{x}`: {e}")));
        lo.push(num(l)?);
        hi.push(num(h)?);
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Planar,
    Radial,
    Monomial,
    File,
}

/// Resolved input: a sampled phase plus the level pair and model defaults.
struct Setup {
    kind: Kind,
    theta: ScalarField,
    levels: LevelPair,
}

fn kind_of(opts: &Opts) -> CliResult<Kind> {
    match (opts.model.as_deref(), &opts.input) {
        (None, None) => Err(Failure::usage("missing input: pass --model planar|radial|monomial or --model file --input PATH")),
        (None, Some(_)) | (Some("file"), Some(_)) => Ok(Kind::File),
        (Some("file"), None) => Err(Failure::usage("--model file needs --input PATH")),
        (Some(_), Some(_)) => Err(Failure::usage("give exactly one input source: an analytic --model or --input")),
        (Some("planar"), None) => Ok(Kind::Planar),
        (Some("radial"), None) => Ok(Kind::Radial),
        (Some("monomial"), None) => Ok(Kind::Monomial),
        (Some(m), None) => Err(Failure::usage(format!("unknown model `{m}` (planar, radial, monomial, file)"))),
    }
}

fn default_levels(kind: Kind) -> (f64, f64) {
    match kind {
        Kind::Planar => (0.0, 1.0),
        Kind::Radial => (1.0, std::f64::consts::E),
        Kind::Monomial => (0.04, 0.25),
        Kind::File => (0.0, 1.0),
    }
}

fn setup(opts: &Opts, classify: bool) -> CliResult<Setup> {
    let kind = kind_of(opts)?;
    let (da, db) = default_levels(kind);
    let levels = LevelPair::new(opts.a.unwrap_or(da), opts.b.unwrap_or(db))?;
    let theta = if kind == Kind::File {
        let path = opts.input.as_ref().expect("file kind has an input");
        read_field(path)?
    } else {
        let (dims_default, ext_default) = match kind {
            Kind::Planar => ("129,65", "-0.25..1.25,0..1"),
            Kind::Radial => ("129,129", "-3.2..3.2,-3.2..3.2"),
            _ if classify => ("1025,5", "-1..1,0..1"),
            _ => ("129,65", "-1..1,0..1"),
        };
        let dims: Vec<usize> = opts
            .grid
            .as_deref()
            .unwrap_or(dims_default)
            .split(',')
            .map(|x| x.trim().parse::<usize>().map_err(|e| Failure::usage(format!("--grid: `{x}`: {e}"))))
            .collect::<CliResult<_>>()?;
        let (lo, hi) = parse_ranges(opts.extent.as_deref().unwrap_or(ext_default), "--extent")?;
        if lo.len() != dims.len() {
            return Err(Failure::usage(format!("--grid has {} axes but --extent has {}", dims.len(), lo.len())));
        }
        let grid = Grid::from_extent(dims, &lo, &hi)?;
        let axis = opts.axis.unwrap_or(0);
        let model = match kind {
            Kind::Planar => PhaseModel::Planar { axis },
            Kind::Monomial => PhaseModel::Monomial { gamma: opts.gamma.unwrap_or(2.0), axis },
            _ => PhaseModel::Radial {
                center: match &opts.center {
                    Some(c) => parse_list(c, "--center")?,
                    None => vec![0.0; grid.ndim()],
                },
            },
        };
        sample_phase(&model, &grid)?
    };
    Ok(Setup { kind, theta, levels })
}

fn region(opts: &Opts) -> CliResult<Option<Region>> {
    opts.region
        .as_deref()
        .map(|s| {
            let (lo, hi) = parse_ranges(s, "--region")?;
            Ok(Region::new(lo, hi)?)
        })
        .transpose()
}

fn level_count(opts: &Opts, default: usize) -> CliResult<usize> {
    let n = opts.levels.unwrap_or(default);
    if n < 2 {
        return Err(Failure::usage("--levels must be at least 2"));
    }
    Ok(n)
}

fn minimize_options(opts: &Opts) -> CliResult<MinimizeOptions> {
    let mut m = MinimizeOptions::new(opts.p());
    if let Some(t) = opts.tol {
        m.tol_rel = t;
    }
    if let Some(k) = opts.max_iter {
        m.max_iter = k;
    }
    m.validate()?;
    Ok(m)
}

fn parse_ball(s: &str, ndim: usize, what: &str) -> CliResult<(Vec<f64>, f64)> {
    let v = parse_list(s, what)?;
    if v.len() != ndim + 1 {
        return Err(Failure::usage(format!("{what}: expected {} numbers (center and radius)", ndim + 1)));
    }
    Ok((v[..ndim].to_vec(), v[ndim]))
}

fn plates(opts: &Opts, s: &Setup) -> CliResult<Plates> {
    match (&opts.e_disk, &opts.f_disk) {
        (Some(e), Some(f)) => {
            let grid = &s.theta.grid;
            let (ce, re) = parse_ball(e, grid.ndim(), "--e-disk")?;
            let (cf, rf) = parse_ball(f, grid.ndim(), "--f-disk")?;
            return Ok(Plates::Custom(ConstraintSet::new(ball_mask(grid, &ce, re), ball_mask(grid, &cf, rf))?));
        }
        (None, None) => {}
        _ => return Err(Failure::usage("--e-disk and --f-disk go together")),
    }
    let default = match s.kind {
        Kind::File => "strict",
        _ => "truncated",
    };
    match opts.plates.as_deref().unwrap_or(default) {
        "strict" => Ok(Plates::Strict),
        "truncated" => {
            let outer = opts.outer.or(if s.kind == Kind::Radial { Some(s.levels.b + 0.2) } else { None });
            Ok(Plates::Truncated { outer })
        }
        other => Err(Failure::usage(format!("unknown plate mode `{other}` (strict, truncated)"))),
    }
}

fn emit(opts: &Opts, text: &str) -> CliResult<()> {
    match &opts.out {
        Some(path) => fs::write(path, text).map_err(|e| Failure { code: EXIT_FAILURE, message: format!("{}: {e}", path.display()) }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure { code: EXIT_FAILURE, message: format!("{}: {e}", path.display()) })
}

fn read_table(path: &Path, p: f64) -> CliResult<WeightTable> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read table {}: {e}", path.display())))?;
    Ok(WeightTable::from_csv(p, &text, path)?)
}

fn cmd_weight(opts: &Opts) -> CliResult<i32> {
    let s = setup(opts, false)?;
    let levels = uniform_levels(s.levels.a, s.levels.b, level_count(opts, 256)?);
    let table = weight_table(&s.theta, opts.p(), &levels, region(opts)?.as_ref())?;
    for note in &table.notes {
        eprintln!("note: {note}");
    }
    emit(opts, &table.to_csv())?;
    Ok(EXIT_OK)
}

fn cubic(t: f64) -> f64 {
    t * t * t + t
}

fn cmd_reduce(opts: &Opts) -> CliResult<i32> {
    let p = opts.p();
    let (mut table, mut a, mut b) = match &opts.table {
        Some(path) => {
            if opts.model.is_some() || opts.input.is_some() {
                return Err(Failure::usage("give exactly one input source: --table or a field"));
            }
            let t = read_table(path, p)?;
            let (lo, hi) = t.span();
            let (a, b) = (opts.a.unwrap_or(lo), opts.b.unwrap_or(hi));
            (t, a, b)
        }
        None => {
            let s = setup(opts, false)?;
            let levels = uniform_levels(s.levels.a, s.levels.b, level_count(opts, 2048)?);
            (weight_table(&s.theta, p, &levels, region(opts)?.as_ref())?, s.levels.a, s.levels.b)
        }
    };
    match opts.reparam.as_deref() {
        None => {}
        Some("cubic") => {
            let phi: Vec<f64> = table.levels().iter().map(|&t| cubic(t)).collect();
            table = reduced::reparametrize_table(&table, &phi)?;
            a = cubic(a);
            b = cubic(b);
        }
        Some(other) => return Err(Failure::usage(format!("unknown reparametrization `{other}` (cubic)"))),
    }
    let report = reduced_capacity(&table, a, b)?;
    write_profile(opts, &table, a, b)?;
    emit(opts, &to_json(&report))?;
    Ok(EXIT_OK)
}

fn write_profile(opts: &Opts, table: &WeightTable, a: f64, b: f64) -> CliResult<()> {
    if let Some(path) = &opts.emit_profile {
        match reduced::optimal_profile(table, a, b) {
            Ok(v) => write_file(path, &v.to_csv())?,
            Err(e) => eprintln!("warning: no profile written: {e}"),
        }
    }
    Ok(())
}

fn finish_capacity(opts: &Opts, report: &fullcap::CapacityReport) -> CliResult<i32> {
    if let Some(path) = &opts.save_minimizer {
        write_field(path, &report.minimizer)?;
    }
    if !report.converged {
        eprintln!("warning: solver stopped after {} iterations without meeting the tolerance", report.iterations);
        return Ok(EXIT_NO_CONVERGENCE);
    }
    Ok(EXIT_OK)
}

fn cmd_fullcap(opts: &Opts) -> CliResult<i32> {
    let s = setup(opts, false)?;
    let plates = plates(opts, &s)?;
    let (report, table) = fullcap::compare_bound(&s.theta, s.levels, &minimize_options(opts)?, &plates, level_count(opts, 1024)?)?;
    write_profile(opts, &table, s.levels.a, s.levels.b)?;
    emit(opts, &to_json(&report))?;
    finish_capacity(opts, &report)
}

fn cmd_classify(opts: &Opts) -> CliResult<i32> {
    let p = opts.p();
    let t0 = opts.t0.unwrap_or(0.0);
    let delta = opts.delta.unwrap_or(0.25);
    if !(delta > 0.0) {
        return Err(Failure::usage("--delta must be positive"));
    }
    let has_input = opts.table.is_some() || opts.model.is_some() || opts.input.is_some();
    let table = if let Some(path) = &opts.table {
        Some(read_table(path, p)?)
    } else if has_input {
        let s = setup(opts, true)?;
        let mut levels = vec![t0];
        levels.extend(geometric_levels(t0, delta, level_count(opts, 12)?));
        Some(weight_table(&s.theta, p, &levels, region(opts)?.as_ref())?)
    } else {
        None
    };
    let report: RegimeReport = match (opts.alpha, opts.nu) {
        (Some(alpha), Some(nu)) => {
            let c = critical::classify(alpha, nu, p)?;
            let r = match &table {
                Some(t) => critical::local_resistance(t, t0, delta)?,
                None => f64::NAN,
            };
            RegimeReport::new(t0, delta, c, r)
        }
        (None, None) => match &table {
            Some(t) => critical::analyze(t, t0, delta)?,
            None => return Err(Failure::usage("missing input: pass --alpha and --nu, --table PATH or a field")),
        },
        _ => return Err(Failure::usage("--alpha and --nu go together")),
    };
    emit(opts, &to_json(&report))?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct DefectReport {
    p: f64,
    capacity_full: f64,
    capacity_reduced: f64,
    /// Reduced minus full capacity.
    gap: f64,
    /// Grid energy of the fibered competitor.
    fibered_energy: f64,
    /// Fibered competitor energy minus minimizer energy.
    energy_gap: f64,
    difference_energy: f64,
    polarization_residual: f64,
    tangential: f64,
    normal: f64,
    tangential_fraction: f64,
    /// `energy_gap ≥ tangential - 1% of the total energy`.
    tangential_bound_ok: bool,
    converged: bool,
    grid: Vec<usize>,
    #[serde(serialize_with = "ser_f64")]
    excluded_measure: f64,
}

fn cmd_defect(opts: &Opts) -> CliResult<i32> {
    if opts.p() != 2.0 {
        return Err(Failure::usage("defect needs --p 2: the polarization identity is quadratic"));
    }
    let s = setup(opts, false)?;
    let plates = plates(opts, &s)?;
    let constraints = plates.build(&s.theta, s.levels)?;
    let (report, table) = fullcap::compare_bound(&s.theta, s.levels, &minimize_options(opts)?, &plates, level_count(opts, 1024)?)?;
    let profile = reduced::optimal_profile(&table, s.levels.a, s.levels.b)?;
    let u_f = fullcap::compose(&s.theta, &profile);
    let pol = fullcap::polarization_gap(&u_f, &report.minimizer, &constraints)?;
    let split = fullcap::tangential_decompose(&report.minimizer, &s.theta, crate::fiber::GRAD_FLOOR)?;
    let total = split.total();
    let out = DefectReport {
        p: 2.0,
        capacity_full: report.capacity_full,
        capacity_reduced: report.capacity_reduced.unwrap_or(f64::NAN),
        gap: report.gap.unwrap_or(f64::NAN),
        fibered_energy: fullcap::dirichlet_energy(&u_f, 2.0),
        energy_gap: pol.energy_gap,
        difference_energy: pol.difference_energy,
        polarization_residual: pol.residual,
        tangential: split.tangential,
        normal: split.normal,
        tangential_fraction: if total > 0.0 { split.tangential / total } else { 0.0 },
        tangential_bound_ok: pol.energy_gap >= split.tangential - 0.01 * total,
        converged: report.converged,
        grid: report.grid.clone(),
        excluded_measure: split.excluded_measure,
    };
    emit(opts, &to_json(&out))?;
    finish_capacity(opts, &report)
}

#[derive(Serialize)]
struct ModelReport {
    model: &'static str,
    p: f64,
    a: f64,
    b: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    capacity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exponent: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    weights: Vec<[f64; 2]>,
}

fn cmd_model(opts: &Opts) -> CliResult<i32> {
    let kind = kind_of(opts)?;
    let p = opts.p();
    let (da, db) = default_levels(kind);
    let (a, b) = (opts.a.unwrap_or(da), opts.b.unwrap_or(db));
    let ext = |default: &str| parse_ranges(opts.extent.as_deref().unwrap_or(default), "--extent");
    let cross_section = |lo: &[f64], hi: &[f64], axis: usize| -> f64 {
        (0..lo.len()).filter(|&k| k != axis).map(|k| hi[k] - lo[k]).product()
    };
    let axis = opts.axis.unwrap_or(0);
    let report = match kind {
        Kind::Planar => {
            let (lo, hi) = ext("-0.25..1.25,0..1")?;
            let spec = ModelSpec::new(ModelKind::Planar { area: cross_section(&lo, &hi, axis), a, b }, p)?;
            ModelReport { model: "planar", p, a, b, capacity: Some(oracles::planar_capacity(&spec)?), exponent: None, weights: vec![] }
        }
        Kind::Radial => {
            let n = match &opts.grid {
                Some(g) => g.split(',').count(),
                None => opts.extent.as_deref().map_or(2, |e| e.split(',').count()),
            };
            let spec = ModelSpec::new(ModelKind::Radial { n, r_e: a, r_f: b }, p)?;
            ModelReport { model: "radial", p, a, b, capacity: Some(oracles::radial_capacity(&spec)?), exponent: None, weights: vec![] }
        }
        Kind::Monomial => {
            let (lo, hi) = ext("-1..1,0..1")?;
            let gamma = opts.gamma.unwrap_or(2.0);
            let spec = ModelSpec::new(ModelKind::Monomial { gamma, area: cross_section(&lo, &hi, axis), window: (a, b) }, p)?;
            let weights = uniform_levels(a, b, level_count(opts, 5)?)
                .into_iter()
                .filter(|&t| t > 0.0)
                .map(|t| Ok([t, oracles::monomial_weight(&spec, t)?]))
                .collect::<CliResult<_>>()?;
            ModelReport { model: "monomial", p, a, b, capacity: None, exponent: Some(oracles::monomial_exponent(gamma, p)), weights }
        }
        Kind::File => return Err(Failure::usage("model needs an analytic model (planar, radial, monomial)")),
    };
    emit(opts, &to_json(&report))?;
    Ok(EXIT_OK)
}

fn dispatch(cli: Cli) -> CliResult<i32> {
    let (cmd, opts): (fn(&Opts) -> CliResult<i32>, Opts) = match cli.command {
        Command::Weight(o) => (cmd_weight, o),
        Command::Reduce(o) => (cmd_reduce, o),
        Command::Fullcap(o) => (cmd_fullcap, o),
        Command::Classify(o) => (cmd_classify, o),
        Command::Defect(o) => (cmd_defect, o),
        Command::Model(o) => (cmd_model, o),
    };
    let opts = opts.merge_config()?;
    if let Some(p) = opts.p {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Failure::usage(format!("--p must be in (1, ∞), got {p}")));
        }
    }
    cmd(&opts)
}

/// Runs the CLI on the given arguments and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            if f.code == EXIT_USAGE {
                eprintln!("run `phasecap help` for usage");
            }
            f.code
        }
    }
}
