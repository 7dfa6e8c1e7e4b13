//! Convergence studies over the (ε, Δt) plane on two stiff test problems.
//!
//! The "exact" solution of every cell is the same scheme run at `dt_ref`
//! (default 10⁻⁶). Each coarse Δt is snapped to a multiple of `dt_ref`, so
//! every coarse time lies on the reference grid and the reference run only
//! stores the states the coarse grids need.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read as _, Write as _};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{integrate_with, DEFAULT_SPOT_CHECK_SEED, IntegrationError, PartitionedProblem, SplitSystem, StepperConfig, TimeGrid, Trajectory};
use crate::svg::{self, Axis, Marker, Plot, Series};
use crate::tableau::ButcherDoubleTableau;

pub const DEFAULT_T_END: f64 = 5.0;
/// The reduced van der Pol solution reaches the fold x = 1 at t ≈ 0.81.
pub const VANDERPOL_T_END: f64 = 0.5;
pub const DEFAULT_DT_REF: f64 = 1e-6;
pub const ERROR_FLOOR: f64 = 1e-11;
pub const R2_THRESHOLD: f64 = 0.98;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("coarse time {0} is not on the reference grid")]
    GridMismatch(f64),
    #[error("trajectories have different dimensions ({0} vs {1})")]
    Dimension(usize, usize),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error("reference run failed: {0}")]
    Reference(String),
    #[error("unknown {kind} `{value}`")]
    Unknown { kind: &'static str, value: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemId {
    Pareschi,
    Vanderpol,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialCondition {
    Equilibrium,
    Perturbed,
}

impl std::str::FromStr for ProblemId {
    type Err = ExperimentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pareschi" => Ok(ProblemId::Pareschi),
            "vanderpol" => Ok(ProblemId::Vanderpol),
            _ => Err(ExperimentError::Unknown {
                kind: "problem",
                value: s.into(),
            }),
        }
    }
}

impl std::str::FromStr for InitialCondition {
    type Err = ExperimentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "equilibrium" => Ok(InitialCondition::Equilibrium),
            "perturbed" => Ok(InitialCondition::Perturbed),
            _ => Err(ExperimentError::Unknown {
                kind: "initial condition",
                value: s.into(),
            }),
        }
    }
}

impl ProblemId {
    pub fn default_t_end(self) -> f64 {
        match self {
            ProblemId::Pareschi => DEFAULT_T_END,
            ProblemId::Vanderpol => VANDERPOL_T_END,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ProblemId::Pareschi => "pareschi",
            ProblemId::Vanderpol => "vanderpol",
        }
    }
}

impl InitialCondition {
    pub fn label(self) -> &'static str {
        match self {
            InitialCondition::Equilibrium => "equilibrium",
            InitialCondition::Perturbed => "perturbed",
        }
    }
}

/// `x' = −y`, `y' = (sin x − y)/ε + x`; the `+x` term is non-stiff.
#[derive(Debug, Clone, Copy)]
pub struct Pareschi;

impl SplitSystem for Pareschi {
    fn dim(&self) -> usize {
        2
    }
    fn flux(&self, u: &[f64], out: &mut [f64]) {
        out[0] = -u[1];
        out[1] = u[0];
    }
    fn relaxation(&self, u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = u[0].sin() - u[1];
    }
    fn relaxation_jacobian(&self, u: &[f64], out: &mut [f64]) -> bool {
        out.copy_from_slice(&[0.0, 0.0, u[0].cos(), -1.0]);
        true
    }
}

/// `x' = y`, `y' = ((1 − x²) y − x)/ε`.
#[derive(Debug, Clone, Copy)]
pub struct VanDerPol;

impl SplitSystem for VanDerPol {
    fn dim(&self) -> usize {
        2
    }
    fn flux(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[1];
        out[1] = 0.0;
    }
    fn relaxation(&self, u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = (1.0 - u[0] * u[0]) * u[1] - u[0];
    }
    fn relaxation_jacobian(&self, u: &[f64], out: &mut [f64]) -> bool {
        out.copy_from_slice(&[0.0, 0.0, -2.0 * u[0] * u[1] - 1.0, 1.0 - u[0] * u[0]]);
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestProblem {
    pub problem: ProblemId,
    pub ic: InitialCondition,
}

impl TestProblem {
    pub fn new(problem: ProblemId, ic: InitialCondition) -> Self {
        TestProblem { problem, ic }
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.problem.label(), self.ic.label())
    }

    pub fn initial_state(&self) -> [f64; 2] {
        match (self.problem, self.ic) {
            (ProblemId::Pareschi, InitialCondition::Equilibrium) => [std::f64::consts::FRAC_PI_2, 1.0],
            (ProblemId::Pareschi, InitialCondition::Perturbed) => [std::f64::consts::FRAC_PI_2, 0.5],
            (ProblemId::Vanderpol, InitialCondition::Equilibrium) => [2.0, -2.0 / 3.0],
            (ProblemId::Vanderpol, InitialCondition::Perturbed) => [2.0, -1.0],
        }
    }

    pub fn system(&self) -> Arc<dyn SplitSystem> {
        match self.problem {
            ProblemId::Pareschi => Arc::new(Pareschi),
            ProblemId::Vanderpol => Arc::new(VanDerPol),
        }
    }

    pub fn partitioned(&self, eps: f64) -> Result<PartitionedProblem, IntegrationError> {
        self.partitioned_seeded(eps, DEFAULT_SPOT_CHECK_SEED)
    }

    pub fn partitioned_seeded(&self, eps: f64, seed: u64) -> Result<PartitionedProblem, IntegrationError> {
        PartitionedProblem::with_seed(self.system(), eps, vec![false, true], seed)
    }

    /// `R(U⁰)`, zero for equilibrium data.
    pub fn initial_residual(&self) -> f64 {
        let mut r = [0.0; 2];
        self.system().relaxation(&self.initial_state(), &mut r);
        r[1]
    }
}

/// `E = sqrt(Σ_i h_i |x^i − x(t_i)|²)` per component, `h_i` the length of
/// the step ending at `t_i`. The reference must contain every coarse time.
pub fn l2_error(coarse: &Trajectory, reference: &Trajectory) -> Result<Vec<f64>, ExperimentError> {
    if coarse.dim != reference.dim {
        return Err(ExperimentError::Dimension(coarse.dim, reference.dim));
    }
    let mut acc = vec![0.0; coarse.dim];
    let mut cursor = 0;
    for k in 0..coarse.len() {
        let t = coarse.times[k];
        let tol = 1e-9 * t.abs().max(1.0);
        while cursor < reference.len() && reference.times[cursor] < t - tol {
            cursor += 1;
        }
        if cursor >= reference.len() || (reference.times[cursor] - t).abs() > tol {
            return Err(ExperimentError::GridMismatch(t));
        }
        if k == 0 {
            continue;
        }
        let h = t - coarse.times[k - 1];
        for (a, (x, r)) in acc.iter_mut().zip(coarse.state(k).iter().zip(reference.state(cursor))) {
            *a += h * (x - r) * (x - r);
        }
    }
    Ok(acc.into_iter().map(f64::sqrt).collect())
}

/// Grid specification: comma-separated numbers and
/// `log:LO:HI:PER_DECADE` ranges, e.g. `0,log:1e-8:1:5`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, ExperimentError> {
    let bad = |m: &str| ExperimentError::Grid(format!("{m} in `{spec}`"));
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some(rest) = item.strip_prefix("log:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(bad("expected log:LO:HI:PER_DECADE"));
            }
            let lo: f64 = parts[0].parse().map_err(|_| bad("bad LO"))?;
            let hi: f64 = parts[1].parse().map_err(|_| bad("bad HI"))?;
            let per: usize = parts[2].parse().map_err(|_| bad("bad PER_DECADE"))?;
            if !(lo > 0.0 && hi >= lo && per > 0) {
                return Err(bad("need 0 < LO ≤ HI and PER_DECADE > 0"));
            }
            out.extend(logspace(lo, hi, per));
        } else {
            let v: f64 = item.parse().map_err(|_| bad("bad number"))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad("values must be finite and non-negative"));
            }
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(bad("empty grid"));
    }
    Ok(out)
}

/// `lo … hi` with `per_decade` points per decade, endpoints included.
pub fn logspace(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    let n = ((b - a) * per_decade as f64).round() as usize;
    if n == 0 {
        return vec![lo];
    }
    (0..=n).map(|k| 10f64.powf(a + (b - a) * k as f64 / n as f64)).collect()
}

pub fn default_eps_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(logspace(1e-8, 1.0, 5));
    g
}

pub fn default_dt_grid() -> Vec<f64> {
    logspace(1e-4, 1.0, 10)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub eps_grid: Vec<f64>,
    pub dt_grid: Vec<f64>,
    /// `None` takes the problem's default.
    pub t_end: Option<f64>,
    pub dt_ref: f64,
    pub stepper: StepperConfig,
    pub error_floor: f64,
    pub r2_threshold: f64,
    /// Directory for cached reference samples.
    pub cache_dir: Option<PathBuf>,
    /// Seed of the stiff-mask spot check.
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            eps_grid: default_eps_grid(),
            dt_grid: default_dt_grid(),
            t_end: None,
            dt_ref: DEFAULT_DT_REF,
            stepper: StepperConfig::default(),
            error_floor: ERROR_FLOOR,
            r2_threshold: R2_THRESHOLD,
            cache_dir: None,
            seed: DEFAULT_SPOT_CHECK_SEED,
        }
    }
}

impl SweepConfig {
    pub fn t_end_for(&self, problem: ProblemId) -> f64 {
        self.t_end.unwrap_or_else(|| problem.default_t_end())
    }
}

/// Least-squares window on Δt for a design order.
pub fn fit_window(design_order: u8) -> (f64, f64) {
    if design_order >= 3 {
        (1e-3, 1.0)
    } else {
        (1e-4, 1.0)
    }
}

struct SnappedGrid {
    /// Step ratio `Δt / dt_ref` for every coarse Δt.
    ratios: Vec<usize>,
    ref_steps: usize,
}

fn snap(cfg: &SweepConfig, t_end: f64) -> Result<SnappedGrid, ExperimentError> {
    if !(cfg.dt_ref > 0.0 && t_end > 0.0) {
        return Err(ExperimentError::Grid("dt_ref and t_end must be positive".into()));
    }
    let ref_steps_f = t_end / cfg.dt_ref;
    let ref_steps = ref_steps_f.round();
    if (ref_steps_f - ref_steps).abs() > 1e-6 {
        return Err(ExperimentError::Grid(format!("dt_ref {} does not divide t_end {}", cfg.dt_ref, t_end)));
    }
    let ref_steps = ref_steps as usize;
    let mut ratios = Vec::with_capacity(cfg.dt_grid.len());
    for &dt in &cfg.dt_grid {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ExperimentError::Grid(format!("Δt must be positive, got {dt}")));
        }
        let m = ((dt / cfg.dt_ref).round() as usize).clamp(1, ref_steps);
        // Steps beyond t_end collapse onto one single-step run.
        if !ratios.contains(&m) {
            ratios.push(m);
        }
    }
    Ok(SnappedGrid { ratios, ref_steps })
}

/// Reference grid indices of every coarse time.
fn coarse_indices(ratio: usize, ref_steps: usize) -> impl Iterator<Item = usize> {
    let full = ref_steps / ratio;
    let partial = ref_steps % ratio != 0;
    (0..=full).map(move |k| k * ratio).chain(partial.then_some(ref_steps))
}

/// Reference states at selected grid indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSamples {
    pub dt_ref: f64,
    pub indices: Vec<usize>,
    /// Row-major `indices.len() × dim`.
    pub states: Vec<f64>,
    pub dim: usize,
}

impl ReferenceSamples {
    fn lookup(&self, index: usize) -> Option<&[f64]> {
        self.indices
            .binary_search(&index)
            .ok()
            .map(|k| &self.states[k * self.dim..(k + 1) * self.dim])
    }

    fn write_to(&self, path: &Path) -> io::Result<()> {
        let mut buf = Vec::with_capacity(16 + self.indices.len() * (8 + 8 * self.dim));
        buf.extend_from_slice(&(self.indices.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.dim as u64).to_le_bytes());
        for (k, idx) in self.indices.iter().enumerate() {
            buf.extend_from_slice(&(*idx as u64).to_le_bytes());
            for x in &self.states[k * self.dim..(k + 1) * self.dim] {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        let tmp = path.with_extension("tmp");
        fs::File::create(&tmp)?.write_all(&buf)?;
        fs::rename(tmp, path)
    }

    fn read_from(path: &Path, dt_ref: f64, expected: &[usize]) -> Option<Self> {
        let mut buf = Vec::new();
        fs::File::open(path).ok()?.read_to_end(&mut buf).ok()?;
        let word = |k: usize| -> Option<[u8; 8]> { buf.get(8 * k..8 * k + 8)?.try_into().ok() };
        let n = u64::from_le_bytes(word(0)?) as usize;
        let dim = u64::from_le_bytes(word(1)?) as usize;
        if n != expected.len() || buf.len() != 16 + n * 8 * (1 + dim) {
            return None;
        }
        let mut indices = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n * dim);
        for k in 0..n {
            let base = 2 + k * (1 + dim);
            indices.push(u64::from_le_bytes(word(base)?) as usize);
            for c in 0..dim {
                states.push(f64::from_le_bytes(word(base + 1 + c)?));
            }
        }
        (indices == expected).then_some(ReferenceSamples {
            dt_ref,
            indices,
            states,
            dim,
        })
    }
}

/// FNV-1a over the index list, for cache file names.
/// FNV-1a over the sample indices and the solver settings.
fn fingerprint(indices: &[usize], stepper: &StepperConfig) -> u64 {
    let settings = serde_json::to_vec(stepper).unwrap_or_default();
    let bytes = indices.iter().flat_map(|i| (*i as u64).to_le_bytes()).chain(settings);
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| match c {
            'a'..='z' | 'A'..='Z' | '0'..='9' | '-' => c,
            '\'' => 'p',
            _ => '_',
        })
        .collect()
}

/// Runs the reference and keeps the requested samples, with an optional
/// on-disk cache.
pub fn reference_samples(
    t: &ButcherDoubleTableau,
    problem: &TestProblem,
    eps: f64,
    dt_ref: f64,
    t_end: f64,
    indices: &[usize],
    stepper: &StepperConfig,
    cache_dir: Option<&Path>,
) -> Result<ReferenceSamples, ExperimentError> {
    let cache_path = cache_dir.map(|d| {
        d.join(format!(
            "{}_{}_eps{:e}_ref{:e}_T{:e}_{:016x}.bin",
            slug(t.name()),
            problem.label(),
            eps,
            dt_ref,
            t_end,
            fingerprint(indices, stepper)
        ))
    });
    if let Some(p) = &cache_path {
        if let Some(r) = ReferenceSamples::read_from(p, dt_ref, indices) {
            return Ok(r);
        }
    }
    let p = problem.partitioned(eps)?;
    let grid = TimeGrid::new(dt_ref, t_end)?;
    let mut states = Vec::with_capacity(indices.len() * 2);
    let mut cursor = 0;
    integrate_with(t, &p, &problem.initial_state(), &grid, stepper, |k, _, u, _| {
        if cursor < indices.len() && indices[cursor] == k {
            states.extend_from_slice(u);
            cursor += 1;
        }
    })
    .map_err(|e| ExperimentError::Reference(e.to_string()))?;
    let r = ReferenceSamples {
        dt_ref,
        indices: indices.to_vec(),
        states,
        dim: 2,
    };
    if let (Some(path), Some(dir)) = (&cache_path, cache_dir) {
        fs::create_dir_all(dir)?;
        r.write_to(path)?;
    }
    Ok(r)
}

#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub eps: f64,
    pub dt: f64,
    /// Per component; NaN when the run failed.
    pub error: Vec<f64>,
    pub failure: Option<String>,
    pub max_stage_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
    pub well_defined: bool,
}

/// Least-squares slope of `log₁₀E` against `log₁₀Δt`.
pub fn fit_rate(points: &[(f64, f64)], r2_threshold: f64) -> RateFit {
    let n = points.len();
    let undefined = RateFit {
        rate: f64::NAN,
        r_squared: f64::NAN,
        points: n,
        well_defined: false,
    };
    if n < 2 {
        return undefined;
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx <= 1e-24 {
        return undefined;
    }
    let rate = sxy / sxx;
    let r_squared = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { f64::NAN };
    RateFit {
        rate,
        r_squared,
        points: n,
        well_defined: n >= 3 && r_squared >= r2_threshold,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub eps: f64,
    pub fits: Vec<RateFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportMeta {
    pub t_end: f64,
    pub dt_ref: f64,
    pub fit_window: (f64, f64),
    pub error_floor: f64,
    pub r2_threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub scheme: String,
    pub design_order: u8,
    pub problem: TestProblem,
    pub eps: Vec<f64>,
    /// Snapped Δt values.
    pub dt: Vec<f64>,
    /// Row-major by ε.
    pub cells: Vec<Cell>,
    pub rates: Vec<RateRow>,
    pub meta: ReportMeta,
}

pub const COMPONENTS: [&str; 2] = ["x", "y"];

impl ConvergenceReport {
    pub fn cell(&self, eps_index: usize, dt_index: usize) -> &Cell {
        &self.cells[eps_index * self.dt.len() + dt_index]
    }

    pub fn row(&self, eps_index: usize) -> &[Cell] {
        &self.cells[eps_index * self.dt.len()..(eps_index + 1) * self.dt.len()]
    }

    pub fn failures(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.failure.is_some())
    }

    pub fn rate(&self, eps_index: usize, component: usize) -> &RateFit {
        &self.rates[eps_index].fits[component]
    }

    pub fn min_error(&self) -> f64 {
        self.cells
            .iter()
            .flat_map(|c| c.error.iter().copied())
            .filter(|e| e.is_finite())
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV columns `eps, dt, err_x, err_y, newton_fail`.
    pub fn write_surface_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "eps,dt,err_x,err_y,newton_fail")?;
        for c in &self.cells {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{}",
                c.eps,
                c.dt,
                c.error[0],
                c.error[1],
                u8::from(c.failure.is_some())
            )?;
        }
        Ok(())
    }

    /// CSV columns `eps, rate_x, rate_y, r2_x, r2_y, well_defined_x, well_defined_y`.
    pub fn write_rates_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "eps,rate_x,rate_y,r2_x,r2_y,well_defined_x,well_defined_y")?;
        for r in &self.rates {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                r.eps,
                r.fits[0].rate,
                r.fits[1].rate,
                r.fits[0].r_squared,
                r.fits[1].r_squared,
                u8::from(r.fits[0].well_defined),
                u8::from(r.fits[1].well_defined)
            )?;
        }
        Ok(())
    }

    /// Rate against ε; ε = 0 sits one decade left of the smallest positive ε.
    pub fn rates_svg(&self) -> String {
        let positive: Vec<f64> = self.eps.iter().copied().filter(|e| *e > 0.0).collect();
        let lo = positive.iter().copied().fold(f64::INFINITY, f64::min).log10();
        let hi = positive.iter().copied().fold(f64::NEG_INFINITY, f64::max).log10();
        let (lo, hi) = if lo.is_finite() { (lo, hi.max(lo + 1.0)) } else { (-1.0, 0.0) };
        let xpos = |e: f64| if e > 0.0 { e.log10() } else { lo - 1.0 };
        let series = |k: usize, color: &str, marker: Marker| {
            let pts = self.rates.iter().map(|r| (xpos(r.eps), r.fits[k].rate)).collect();
            Series::new(format!("rate {}", COMPONENTS[k]), pts, color, marker)
        };
        let all: Vec<f64> = self.rates.iter().flat_map(|r| r.fits.iter().map(|f| f.rate)).filter(|x| x.is_finite()).collect();
        let ymax = all.iter().copied().fold(f64::from(self.design_order) + 1.0, f64::max).ceil();
        let ymin = all.iter().copied().fold(0.0, f64::min).floor();
        svg::render(&Plot {
            title: format!("{} {}", self.scheme, self.problem.label()),
            x: Axis::new(lo - 1.5, hi + 0.5, "ε (leftmost point: ε = 0)").log10(),
            y: Axis::new(ymin, ymax, "convergence rate"),
            series: vec![series(0, "blue", Marker::Diamond), series(1, "green", Marker::Circle)],
        })
    }

    /// log-log error curves of one component, one line per ε row.
    pub fn errors_svg(&self, component: usize) -> String {
        let finite: Vec<f64> = self
            .cells
            .iter()
            .map(|c| c.error[component])
            .filter(|e| e.is_finite() && *e > 0.0)
            .map(f64::log10)
            .collect();
        let ymin = finite.iter().copied().fold(f64::INFINITY, f64::min).floor();
        let ymax = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
        let (ymin, ymax) = if ymin.is_finite() { (ymin, ymax.max(ymin + 1.0)) } else { (-1.0, 0.0) };
        let (color, marker) = if component == 0 { ("blue", Marker::Diamond) } else { ("green", Marker::Circle) };
        let series = (0..self.eps.len())
            .map(|i| {
                let pts = self
                    .row(i)
                    .iter()
                    .map(|c| (c.dt.log10(), if c.error[component] > 0.0 { c.error[component].log10() } else { f64::NAN }))
                    .collect();
                Series::new(format!("ε={:.0e}", self.eps[i]), pts, color, marker)
            })
            .collect();
        let dts: Vec<f64> = self.dt.iter().map(|d| d.log10()).collect();
        svg::render(&Plot {
            title: format!("{} {} E_{}", self.scheme, self.problem.label(), COMPONENTS[component]),
            x: Axis::new(dts.iter().copied().fold(f64::INFINITY, f64::min), dts.iter().copied().fold(f64::NEG_INFINITY, f64::max), "Δt").log10(),
            y: Axis::new(ymin, ymax, "L2 error").log10(),
            series,
        })
    }

    /// Heat map of `log₁₀E` over (log ε, log Δt) with the `Δt = ε` line.
    pub fn surface_svg(&self, component: usize) -> String {
        let rows: Vec<usize> = (0..self.eps.len()).filter(|&i| self.eps[i] > 0.0).collect();
        let ys: Vec<f64> = rows.iter().map(|&i| self.eps[i].log10()).collect();
        let xs: Vec<f64> = self.dt.iter().map(|d| d.log10()).collect();
        let values: Vec<Vec<f64>> = rows
            .iter()
            .map(|&i| self.row(i).iter().map(|c| c.error[component].log10()).collect())
            .collect();
        if xs.is_empty() || ys.is_empty() {
            return svg::render(&Plot {
                title: "empty".into(),
                x: Axis::new(0.0, 1.0, ""),
                y: Axis::new(0.0, 1.0, ""),
                series: Vec::new(),
            });
        }
        let (x0, x1) = (xs[0].min(xs[xs.len() - 1]), xs[0].max(xs[xs.len() - 1]));
        let (y0, y1) = (ys[0].min(ys[ys.len() - 1]), ys[0].max(ys[ys.len() - 1]));
        let pad = |a: f64, b: f64, n: usize| if n > 1 { 0.5 * (b - a) / (n - 1) as f64 } else { 0.5 };
        let (px, py) = (pad(x0, x1, xs.len()), pad(y0, y1, ys.len()));
        let lo = x0.max(y0);
        let hi = x1.min(y1);
        let overlay = (hi > lo).then_some(((lo, lo), (hi, hi)));
        svg::heatmap_svg(
            &format!("{} {} log10 E_{}", self.scheme, self.problem.label(), COMPONENTS[component]),
            Axis::new(x0 - px, x1 + px, "Δt").log10(),
            Axis::new(y0 - py, y1 + py, "ε").log10(),
            &xs,
            &ys,
            &values,
            overlay,
        )
    }
}

fn run_row(
    t: &ButcherDoubleTableau,
    problem: &TestProblem,
    eps: f64,
    cfg: &SweepConfig,
    grid: &SnappedGrid,
    t_end: f64,
) -> Vec<Cell> {
    let dts: Vec<f64> = grid.ratios.iter().map(|&m| m as f64 * cfg.dt_ref).collect();
    let mut needed: Vec<usize> = grid.ratios.iter().flat_map(|&m| coarse_indices(m, grid.ref_steps)).collect();
    needed.sort_unstable();
    needed.dedup();
    let failed = |msg: String| -> Vec<Cell> {
        dts.iter()
            .map(|&dt| Cell {
                eps,
                dt,
                error: vec![f64::NAN; 2],
                failure: Some(msg.clone()),
                max_stage_iterations: 0,
            })
            .collect()
    };
    let reference = match reference_samples(t, problem, eps, cfg.dt_ref, t_end, &needed, &cfg.stepper, cfg.cache_dir.as_deref()) {
        Ok(r) => r,
        Err(e) => return failed(e.to_string()),
    };
    let p = match problem.partitioned_seeded(eps, cfg.seed) {
        Ok(p) => p,
        Err(e) => return failed(e.to_string()),
    };
    grid.ratios
        .iter()
        .zip(&dts)
        .map(|(&m, &dt)| {
            let mut acc = [0.0f64; 2];
            let mut prev_t = 0.0;
            let mut mismatch = false;
            let result = TimeGrid::new(dt, t_end).map_err(ExperimentError::from).and_then(|g| {
                let full = g.full_steps;
                integrate_with(t, &p, &problem.initial_state(), &g, &cfg.stepper, |k, time, u, _| {
                    if k == 0 {
                        return;
                    }
                    let idx = if k <= full { k * m } else { grid.ref_steps };
                    let Some(r) = reference.lookup(idx) else {
                        mismatch = true;
                        return;
                    };
                    let h = time - prev_t;
                    prev_t = time;
                    for c in 0..2 {
                        acc[c] += h * (u[c] - r[c]) * (u[c] - r[c]);
                    }
                })
                .map_err(ExperimentError::from)
            });
            match result {
                Ok(_) if mismatch => Cell {
                    eps,
                    dt,
                    error: vec![f64::NAN; 2],
                    failure: Some(ExperimentError::GridMismatch(dt).to_string()),
                    max_stage_iterations: 0,
                },
                Ok(max_iter) => {
                    let error: Vec<f64> = acc.iter().map(|a| a.sqrt()).collect();
                    let failure = error.iter().any(|e| !e.is_finite()).then(|| "non-finite error".to_string());
                    Cell {
                        eps,
                        dt,
                        error,
                        failure,
                        max_stage_iterations: max_iter,
                    }
                }
                Err(e) => Cell {
                    eps,
                    dt,
                    error: vec![f64::NAN; 2],
                    failure: Some(e.to_string()),
                    max_stage_iterations: 0,
                },
            }
        })
        .collect()
}

fn fit_row(cells: &[Cell], window: (f64, f64), cfg: &SweepConfig) -> Vec<RateFit> {
    (0..2)
        .map(|c| {
            let pts: Vec<(f64, f64)> = cells
                .iter()
                .filter(|cell| cell.failure.is_none())
                .filter(|cell| cell.dt >= window.0 * (1.0 - 1e-9) && cell.dt <= window.1 * (1.0 + 1e-9))
                .filter(|cell| cell.error[c].is_finite() && cell.error[c] >= cfg.error_floor)
                .map(|cell| (cell.dt, cell.error[c]))
                .collect();
            fit_rate(&pts, cfg.r2_threshold)
        })
        .collect()
}

/// Error surface and per-ε rates. Rows run in parallel; cell failures are
/// recorded, not fatal.
pub fn sweep(t: &ButcherDoubleTableau, problem: TestProblem, cfg: &SweepConfig) -> Result<ConvergenceReport, ExperimentError> {
    if cfg.eps_grid.is_empty() || cfg.dt_grid.is_empty() {
        return Err(ExperimentError::Grid("ε and Δt grids must be non-empty".into()));
    }
    if cfg.eps_grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(ExperimentError::Grid("ε values must be finite and non-negative".into()));
    }
    let t_end = cfg.t_end_for(problem.problem);
    let grid = snap(cfg, t_end)?;
    let rows: Vec<Vec<Cell>> = cfg
        .eps_grid
        .par_iter()
        .map(|&eps| run_row(t, &problem, eps, cfg, &grid, t_end))
        .collect();
    let window = fit_window(t.design_order());
    let rates = cfg
        .eps_grid
        .iter()
        .zip(&rows)
        .map(|(&eps, cells)| RateRow {
            eps,
            fits: fit_row(cells, window, cfg),
        })
        .collect();
    Ok(ConvergenceReport {
        scheme: t.name().to_string(),
        design_order: t.design_order(),
        problem,
        eps: cfg.eps_grid.clone(),
        dt: grid.ratios.iter().map(|&m| m as f64 * cfg.dt_ref).collect(),
        cells: rows.into_iter().flatten().collect(),
        rates,
        meta: ReportMeta {
            t_end,
            dt_ref: cfg.dt_ref,
            fit_window: window,
            error_floor: cfg.error_floor,
            r2_threshold: cfg.r2_threshold,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RidgeRow {
    pub eps: f64,
    /// Largest interior local maximum of the row, or the global maximum
    /// when the row has none.
    pub dt_star: Option<f64>,
    pub global_dt_star: Option<f64>,
    /// `dt_star` is an interior local maximum.
    pub interior: bool,
    /// `|log₁₀Δt* − log₁₀ε|`.
    pub distance: Option<f64>,
    /// No maximum: the row is constant or has no finite errors.
    pub flat: bool,
}

/// Per-ε ridge location for one component. Along a row the error usually
/// grows towards the largest Δt, so the ridge shows up as an interior
/// local maximum rather than the global one.
pub fn ridge_locus(report: &ConvergenceReport, component: usize) -> Vec<RidgeRow> {
    (0..report.eps.len())
        .map(|i| {
            let eps = report.eps[i];
            let e: Vec<f64> = report.row(i).iter().map(|c| c.error[component]).collect();
            let finite: Vec<f64> = e.iter().copied().filter(|v| v.is_finite()).collect();
            let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
            if finite.is_empty() || max - min <= 1e-14 * max.abs().max(f64::MIN_POSITIVE) {
                return RidgeRow {
                    eps,
                    dt_star: None,
                    global_dt_star: None,
                    interior: false,
                    distance: None,
                    flat: true,
                };
            }
            let global = e.iter().position(|&v| v == max).unwrap();
            let local = (1..e.len().saturating_sub(1))
                .filter(|&k| e[k].is_finite() && e[k] >= e[k - 1] && e[k] >= e[k + 1] && e[k] > e[k - 1].min(e[k + 1]))
                .max_by(|&a, &b| e[a].total_cmp(&e[b]));
            let k = local.unwrap_or(global);
            let dt_star = report.dt[k];
            RidgeRow {
                eps,
                dt_star: Some(dt_star),
                global_dt_star: Some(report.dt[global]),
                interior: local.is_some(),
                distance: (eps > 0.0).then(|| (dt_star.log10() - eps.log10()).abs()),
                flat: false,
            }
        })
        .collect()
}

/// Median ridge distance over rows with `lo ≤ ε ≤ hi`.
pub fn median_ridge_distance(rows: &[RidgeRow], lo: f64, hi: f64) -> Option<f64> {
    let mut d: Vec<f64> = rows
        .iter()
        .filter(|r| r.eps >= lo * (1.0 - 1e-9) && r.eps <= hi * (1.0 + 1e-9))
        .filter_map(|r| r.distance)
        .collect();
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    Some(if n % 2 == 1 { d[n / 2] } else { 0.5 * (d[n / 2 - 1] + d[n / 2]) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl std::str::FromStr for FigureId {
    type Err = ExperimentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig2" => Ok(FigureId::Fig2),
            "fig3" => Ok(FigureId::Fig3),
            "fig4" => Ok(FigureId::Fig4),
            "fig5" => Ok(FigureId::Fig5),
            "fig6" => Ok(FigureId::Fig6),
            _ => Err(ExperimentError::Unknown {
                kind: "figure",
                value: s.into(),
            }),
        }
    }
}

impl FigureId {
    pub const ALL: [FigureId; 5] = [FigureId::Fig2, FigureId::Fig3, FigureId::Fig4, FigureId::Fig5, FigureId::Fig6];

    pub fn label(self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
        }
    }

    /// fig2 shows error surfaces; fig3–fig6 the rate curves.
    pub fn problem(self) -> TestProblem {
        use InitialCondition::*;
        use ProblemId::*;
        match self {
            FigureId::Fig2 | FigureId::Fig3 => TestProblem::new(Pareschi, Equilibrium),
            FigureId::Fig4 => TestProblem::new(Pareschi, Perturbed),
            FigureId::Fig5 => TestProblem::new(Vanderpol, Equilibrium),
            FigureId::Fig6 => TestProblem::new(Vanderpol, Perturbed),
        }
    }
}

/// Writes every report's CSV and SVG files for one figure under
/// `out/<fig>/`; returns the written paths.
pub fn write_figure(fig: FigureId, reports: &[ConvergenceReport], out: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let mut files = Vec::new();
    if reports.is_empty() {
        return Ok(files);
    }
    let dir = out.join(fig.label());
    fs::create_dir_all(&dir)?;
    let mut put = |name: String, bytes: Vec<u8>| -> io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        files.push(path);
        Ok(())
    };
    for r in reports {
        let stem = slug(&r.scheme);
        let mut surface = Vec::new();
        r.write_surface_csv(&mut surface)?;
        put(format!("{stem}_surface.csv"), surface)?;
        let mut rates = Vec::new();
        r.write_rates_csv(&mut rates)?;
        put(format!("{stem}_rates.csv"), rates)?;
        if fig == FigureId::Fig2 {
            for c in 0..2 {
                put(format!("{stem}_surface_{}.svg", COMPONENTS[c]), r.surface_svg(c).into_bytes())?;
            }
        } else {
            put(format!("{stem}_rates.svg"), r.rates_svg().into_bytes())?;
            for c in 0..2 {
                put(format!("{stem}_errors_{}.svg", COMPONENTS[c]), r.errors_svg(c).into_bytes())?;
            }
        }
    }
    Ok(files)
}

/// Sweeps every scheme for the figure's configuration and writes the files.
pub fn run_figure(
    fig: FigureId,
    schemes: &[ButcherDoubleTableau],
    cfg: &SweepConfig,
    out: &Path,
) -> Result<(Vec<ConvergenceReport>, Vec<PathBuf>), ExperimentError> {
    let reports = schemes
        .iter()
        .map(|t| sweep(t, fig.problem(), cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let files = write_figure(fig, &reports, out)?;
    Ok((reports, files))
}

/// Shares sweeps between figures that use the same configuration.
#[derive(Default)]
pub struct SweepCache {
    reports: Mutex<BTreeMap<(String, ProblemId, InitialCondition), Arc<ConvergenceReport>>>,
}

impl SweepCache {
    pub fn get_or_run(
        &self,
        t: &ButcherDoubleTableau,
        problem: TestProblem,
        cfg: &SweepConfig,
    ) -> Result<Arc<ConvergenceReport>, ExperimentError> {
        let key = (t.name().to_string(), problem.problem, problem.ic);
        if let Some(r) = self.reports.lock().unwrap().get(&key) {
            return Ok(r.clone());
        }
        let r = Arc::new(sweep(t, problem, cfg)?);
        self.reports.lock().unwrap().insert(key, r.clone());
        Ok(r)
    }
}
