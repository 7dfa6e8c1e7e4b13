//! One-step IMEX Runge-Kutta integration of `∂t U = F(U) + R(U)/ε`.
//!
//! Stage `i` is solved in ε-scaled form on the stiff components:
//!
//! ```text
//! ε (U⁽ⁱ⁾ − U* ) − Δt Σ_{j<i} a_ij R_j − Δt a_ii R(U⁽ⁱ⁾) = 0,
//! U* = Uⁿ + Δt Σ_{j<i} b_ij F_j
//! ```
//!
//! and `U⁽ⁱ⁾ = U*` on the non-stiff components (where `R ≡ 0`). The form
//! stays well posed at ε = 0, which is what the ASI schemes are built for:
//! `Uⁿ⁺¹ = U⁽ˢ⁾` and no division by ε ever happens.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::solve_in_place;
use crate::tableau::{ButcherDoubleTableau, NumericTableau};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("scheme `{0}` is not in all-stages-implicit form")]
    NotAsi(String),
    #[error("stiffness parameter must be finite and non-negative, got {0}")]
    InvalidEpsilon(f64),
    #[error("standard form divides by ε in its final assembly; ε = 0 requires an ASI scheme")]
    ZeroEpsilonStandardForm,
    #[error("step size must be finite and non-negative, got {0}")]
    InvalidStep(f64),
    #[error("final time must be finite and non-negative, got {0}")]
    InvalidFinalTime(f64),
    #[error("stage {stage}: Newton iteration did not converge in {iterations} iterations (last update {last_update:e})")]
    NewtonNonConvergence { stage: usize, iterations: usize, last_update: f64 },
    #[error("stage {stage}: singular stage Jacobian")]
    SingularJacobian { stage: usize },
    #[error("stage {stage}: non-finite state")]
    NonFinite { stage: usize },
    #[error("stage {stage}: zero diagonal with implicit history cannot be solved at ε = 0")]
    DegenerateStage { stage: usize },
    #[error("state has {got} components, problem expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("relaxation term is nonzero on non-stiff component {component} (|R| = {value:e})")]
    StiffMaskViolation { component: usize, value: f64 },
    #[error("invalid stepper configuration: {0}")]
    Config(String),
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<IntegrationError>,
    },
}

/// The split right-hand side. `relaxation` returns `R(U)` without the
/// `1/ε` factor.
pub trait SplitSystem: Send + Sync {
    fn dim(&self) -> usize;
    fn flux(&self, u: &[f64], out: &mut [f64]);
    fn relaxation(&self, u: &[f64], out: &mut [f64]);
    /// Row-major `∂R/∂U`; returns `false` when no analytic Jacobian exists.
    fn relaxation_jacobian(&self, _u: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

/// A split system with its stiffness parameter and stiff-component mask.
#[derive(Clone)]
pub struct PartitionedProblem {
    system: Arc<dyn SplitSystem>,
    epsilon: f64,
    stiff: Vec<bool>,
    stiff_index: Vec<usize>,
}

impl fmt::Debug for PartitionedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartitionedProblem")
            .field("dim", &self.system.dim())
            .field("epsilon", &self.epsilon)
            .field("stiff", &self.stiff)
            .finish()
    }
}

const MASK_SPOT_CHECKS: usize = 16;
pub const DEFAULT_SPOT_CHECK_SEED: u64 = 0x5eed;

impl PartitionedProblem {
    /// Builds the problem and spot-checks that `R` vanishes on every
    /// non-stiff component at a few random states.
    pub fn new(system: Arc<dyn SplitSystem>, epsilon: f64, stiff: Vec<bool>) -> Result<Self, IntegrationError> {
        Self::with_seed(system, epsilon, stiff, DEFAULT_SPOT_CHECK_SEED)
    }

    pub fn with_seed(system: Arc<dyn SplitSystem>, epsilon: f64, stiff: Vec<bool>, seed: u64) -> Result<Self, IntegrationError> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(IntegrationError::InvalidEpsilon(epsilon));
        }
        let n = system.dim();
        if stiff.len() != n {
            return Err(IntegrationError::DimensionMismatch {
                expected: n,
                got: stiff.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = vec![0.0; n];
        let mut r = vec![0.0; n];
        for _ in 0..MASK_SPOT_CHECKS {
            u.iter_mut().for_each(|x| *x = rng.gen_range(-2.0..2.0));
            system.relaxation(&u, &mut r);
            for (k, (&value, &is_stiff)) in r.iter().zip(&stiff).enumerate() {
                if !is_stiff && value != 0.0 {
                    return Err(IntegrationError::StiffMaskViolation {
                        component: k,
                        value: value.abs(),
                    });
                }
            }
        }
        let stiff_index = stiff.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i).collect();
        Ok(PartitionedProblem {
            system,
            epsilon,
            stiff,
            stiff_index,
        })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self, IntegrationError> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(IntegrationError::InvalidEpsilon(epsilon));
        }
        let mut p = self.clone();
        p.epsilon = epsilon;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn stiff_mask(&self) -> &[bool] {
        &self.stiff
    }

    pub fn system(&self) -> &dyn SplitSystem {
        self.system.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    /// Analytic `∂R/∂U` when the system provides one, forward differences
    /// otherwise.
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StepperConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_iterations: usize,
    pub jacobian: JacobianMode,
    /// Relative step of the difference quotient, times `max(1, |u_k|)`.
    pub fd_scale: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            rtol: 1e-13,
            atol: 1e-14,
            max_iterations: 100,
            jacobian: JacobianMode::Analytic,
            fd_scale: f64::EPSILON.sqrt(),
        }
    }
}

impl StepperConfig {
    pub fn check(&self) -> Result<(), IntegrationError> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(IntegrationError::Config("tolerances must be positive".into()));
        }
        if self.max_iterations < 1 {
            return Err(IntegrationError::Config("max_iterations must be at least 1".into()));
        }
        if !(self.fd_scale > 0.0) {
            return Err(IntegrationError::Config("fd_scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub newton_iterations: usize,
    pub max_stage_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assembly {
    /// `Uⁿ⁺¹ = U⁽ˢ⁾`.
    LastStage,
    /// `Uⁿ⁺¹ = Uⁿ + Δt Σ wᵢ Rᵢ/ε + Δt Σ ωᵢ Fᵢ`.
    Weights,
}

/// Reusable stage workspace for one tableau and one problem.
pub struct Stepper<'a> {
    tab: &'a NumericTableau,
    problem: &'a PartitionedProblem,
    cfg: StepperConfig,
    assembly: Assembly,
    n: usize,
    f_stage: Vec<f64>,
    r_stage: Vec<f64>,
    need_f: Vec<bool>,
    need_r: Vec<bool>,
    base: Vec<f64>,
    hist: Vec<f64>,
    u: Vec<f64>,
    r_tmp: Vec<f64>,
    r_shift: Vec<f64>,
    u_shift: Vec<f64>,
    jac_full: Vec<f64>,
    jac: Vec<f64>,
    delta: Vec<f64>,
    stage_values: Option<Vec<f64>>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        t: &'a ButcherDoubleTableau,
        problem: &'a PartitionedProblem,
        cfg: StepperConfig,
        assembly: Assembly,
    ) -> Result<Self, IntegrationError> {
        cfg.check()?;
        if assembly == Assembly::LastStage && !t.is_asi() {
            return Err(IntegrationError::NotAsi(t.name().to_string()));
        }
        if assembly == Assembly::Weights && problem.epsilon == 0.0 {
            return Err(IntegrationError::ZeroEpsilonStandardForm);
        }
        let tab = t.numeric();
        let s = tab.stages;
        let n = problem.dim();
        let m = problem.stiff_index.len();
        let need_f = (0..s)
            .map(|j| (j + 1..s).any(|i| tab.b(i, j) != 0.0) || (assembly == Assembly::Weights && tab.omega[j] != 0.0))
            .collect();
        let need_r = (0..s)
            .map(|j| (j + 1..s).any(|i| tab.a(i, j) != 0.0) || (assembly == Assembly::Weights && tab.w[j] != 0.0))
            .collect();
        Ok(Stepper {
            tab,
            problem,
            cfg,
            assembly,
            n,
            f_stage: vec![0.0; s * n],
            r_stage: vec![0.0; s * n],
            need_f,
            need_r,
            base: vec![0.0; n],
            hist: vec![0.0; n],
            u: vec![0.0; n],
            r_tmp: vec![0.0; n],
            r_shift: vec![0.0; n],
            u_shift: vec![0.0; n],
            jac_full: vec![0.0; n * n],
            jac: vec![0.0; m * m],
            delta: vec![0.0; m],
            stage_values: None,
        })
    }

    /// Keep every stage value of the most recent step (see
    /// [`Stepper::stage_values`]).
    pub fn record_stages(&mut self, on: bool) {
        self.stage_values = on.then(|| vec![0.0; self.tab.stages * self.n]);
    }

    /// Stage values of the last step, row `i` = `U⁽ⁱ⁾`.
    pub fn stage_values(&self) -> Option<&[f64]> {
        self.stage_values.as_deref()
    }

    pub fn step(&mut self, u_n: &[f64], dt: f64, out: &mut [f64]) -> Result<StepStats, IntegrationError> {
        let n = self.n;
        if u_n.len() != n || out.len() != n {
            return Err(IntegrationError::DimensionMismatch {
                expected: n,
                got: u_n.len().min(out.len()),
            });
        }
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(IntegrationError::InvalidStep(dt));
        }
        if dt == 0.0 {
            out.copy_from_slice(u_n);
            return Ok(StepStats::default());
        }
        let s = self.tab.stages;
        let eps = self.problem.epsilon;
        let sys = self.problem.system.as_ref();
        let mut stats = StepStats::default();

        for i in 0..s {
            for k in 0..n {
                let mut acc = 0.0;
                let mut hist = 0.0;
                for j in 0..i {
                    acc += self.tab.b(i, j) * self.f_stage[j * n + k];
                    hist += self.tab.a(i, j) * self.r_stage[j * n + k];
                }
                self.base[k] = u_n[k] + dt * acc;
                self.hist[k] = dt * hist;
            }
            self.u.copy_from_slice(&self.base);
            let aii = self.tab.a(i, i);
            let has_history = (0..i).any(|j| self.tab.a(i, j) != 0.0);
            if aii == 0.0 {
                if has_history {
                    if eps == 0.0 {
                        return Err(IntegrationError::DegenerateStage { stage: i + 1 });
                    }
                    for &k in &self.problem.stiff_index {
                        self.u[k] = self.base[k] + self.hist[k] / eps;
                    }
                }
            } else if !self.problem.stiff_index.is_empty() {
                let iters = self.newton(i, dt * aii)?;
                stats.newton_iterations += iters;
                stats.max_stage_iterations = stats.max_stage_iterations.max(iters);
            }
            if self.u.iter().any(|x| !x.is_finite()) {
                return Err(IntegrationError::NonFinite { stage: i + 1 });
            }
            if self.need_f[i] {
                sys.flux(&self.u, &mut self.f_stage[i * n..(i + 1) * n]);
            }
            if self.need_r[i] {
                sys.relaxation(&self.u, &mut self.r_stage[i * n..(i + 1) * n]);
            }
            if let Some(sv) = self.stage_values.as_mut() {
                sv[i * n..(i + 1) * n].copy_from_slice(&self.u);
            }
        }

        match self.assembly {
            Assembly::LastStage => out.copy_from_slice(&self.u),
            Assembly::Weights => {
                for k in 0..n {
                    let mut acc = 0.0;
                    for i in 0..s {
                        acc += dt * self.tab.w[i] * self.r_stage[i * n + k] / eps + dt * self.tab.omega[i] * self.f_stage[i * n + k];
                    }
                    out[k] = u_n[k] + acc;
                }
                if out.iter().any(|x| !x.is_finite()) {
                    return Err(IntegrationError::NonFinite { stage: s + 1 });
                }
            }
        }
        Ok(stats)
    }

    /// Newton iteration on the stiff block of stage `stage`, starting from
    /// the explicit prediction held in `self.u`.
    fn newton(&mut self, stage: usize, h_diag: f64) -> Result<usize, IntegrationError> {
        let n = self.n;
        let eps = self.problem.epsilon;
        let idx = &self.problem.stiff_index;
        let m = idx.len();
        let sys = self.problem.system.as_ref();
        let mut last_update = f64::INFINITY;

        for iter in 1..=self.cfg.max_iterations {
            sys.relaxation(&self.u, &mut self.r_tmp);
            for (row, &k) in idx.iter().enumerate() {
                self.delta[row] = -(eps * (self.u[k] - self.base[k]) - self.hist[k] - h_diag * self.r_tmp[k]);
            }
            self.relaxation_jacobian();
            for (row, &k) in idx.iter().enumerate() {
                for (col, &l) in idx.iter().enumerate() {
                    let ident = if row == col { eps } else { 0.0 };
                    self.jac[row * m + col] = ident - h_diag * self.jac_full[k * n + l];
                }
            }
            if solve_in_place(&mut self.jac, &mut self.delta, m).is_err() {
                return Err(IntegrationError::SingularJacobian { stage: stage + 1 });
            }
            let mut converged = true;
            last_update = 0.0;
            for (row, &k) in idx.iter().enumerate() {
                let d = self.delta[row];
                if !d.is_finite() {
                    return Err(IntegrationError::NonFinite { stage: stage + 1 });
                }
                self.u[k] += d;
                last_update = last_update.max(d.abs());
                if d.abs() > self.cfg.atol + self.cfg.rtol * self.u[k].abs() {
                    converged = false;
                }
            }
            if converged {
                return Ok(iter);
            }
        }
        Err(IntegrationError::NewtonNonConvergence {
            stage: stage + 1,
            iterations: self.cfg.max_iterations,
            last_update,
        })
    }

    /// Fills `jac_full` with `∂R/∂U` at `self.u`; `r_tmp` must hold `R(u)`.
    fn relaxation_jacobian(&mut self) {
        let n = self.n;
        let sys = self.problem.system.as_ref();
        if self.cfg.jacobian == JacobianMode::Analytic && sys.relaxation_jacobian(&self.u, &mut self.jac_full) {
            return;
        }
        for &l in &self.problem.stiff_index {
            self.u_shift.copy_from_slice(&self.u);
            let h = self.cfg.fd_scale * self.u[l].abs().max(1.0);
            self.u_shift[l] += h;
            let h = self.u_shift[l] - self.u[l];
            sys.relaxation(&self.u_shift, &mut self.r_shift);
            for k in 0..n {
                self.jac_full[k * n + l] = (self.r_shift[k] - self.r_tmp[k]) / h;
            }
        }
    }
}

/// One ASI step: `Uⁿ⁺¹ = U⁽ˢ⁾`. Valid for every ε ≥ 0.
pub fn step_asi(
    t: &ButcherDoubleTableau,
    p: &PartitionedProblem,
    u_n: &[f64],
    dt: f64,
    cfg: &StepperConfig,
) -> Result<Vec<f64>, IntegrationError> {
    let mut stepper = Stepper::new(t, p, *cfg, Assembly::LastStage)?;
    let mut out = vec![0.0; u_n.len()];
    stepper.step(u_n, dt, &mut out)?;
    Ok(out)
}

/// One standard-form step with the explicit final assembly. ASI tableaux
/// are accepted and use their last rows as weights. Requires ε > 0.
pub fn step_standard(
    t: &ButcherDoubleTableau,
    p: &PartitionedProblem,
    u_n: &[f64],
    dt: f64,
    cfg: &StepperConfig,
) -> Result<Vec<f64>, IntegrationError> {
    let mut stepper = Stepper::new(t, p, *cfg, Assembly::Weights)?;
    let mut out = vec![0.0; u_n.len()];
    stepper.step(u_n, dt, &mut out)?;
    Ok(out)
}

/// Uniform grid on `[0, t_end]`: full steps of `dt`, plus one shortened
/// final step when `dt` does not divide `t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub t_end: f64,
    pub full_steps: usize,
    pub last_step: Option<f64>,
}

impl TimeGrid {
    pub fn new(dt: f64, t_end: f64) -> Result<Self, IntegrationError> {
        if !(t_end.is_finite() && t_end >= 0.0) {
            return Err(IntegrationError::InvalidFinalTime(t_end));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(IntegrationError::InvalidStep(dt));
        }
        let ratio = t_end / dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            return Ok(TimeGrid {
                dt,
                t_end,
                full_steps: nearest as usize,
                last_step: None,
            });
        }
        let full = ratio.floor() as usize;
        Ok(TimeGrid {
            dt,
            t_end,
            full_steps: full,
            last_step: Some(t_end - full as f64 * dt),
        })
    }

    pub fn steps(&self) -> usize {
        self.full_steps + usize::from(self.last_step.is_some())
    }

    /// Time of grid point `k` (`k = steps()` is `t_end`).
    pub fn time(&self, k: usize) -> f64 {
        if k >= self.steps() {
            self.t_end
        } else {
            k as f64 * self.dt
        }
    }

    pub fn step_size(&self, k: usize) -> f64 {
        if k < self.full_steps {
            self.dt
        } else {
            self.last_step.unwrap_or(self.dt)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    /// Row-major, `times.len() × dim`.
    pub states: Vec<f64>,
    /// Newton iterations spent in each step (entry 0 belongs to `U⁰`).
    pub newton_iterations: Vec<usize>,
    pub max_stage_iterations: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// CSV with columns `t, U_1..U_n, newton_iters`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t")?;
        for k in 1..=self.dim {
            write!(w, ",U_{k}")?;
        }
        writeln!(w, ",newton_iters")?;
        for k in 0..self.len() {
            write!(w, "{:.16e}", self.times[k])?;
            for x in self.state(k) {
                write!(w, ",{x:.16e}")?;
            }
            writeln!(w, ",{}", self.newton_iterations[k])?;
        }
        Ok(())
    }
}

fn assembly_for(t: &ButcherDoubleTableau) -> Assembly {
    if t.is_asi() {
        Assembly::LastStage
    } else {
        Assembly::Weights
    }
}

/// Integrates over `[0, t_end]` and calls `observe(k, t_k, U^k, iters)` for
/// every grid point, including `k = 0`.
pub fn integrate_with<F>(
    t: &ButcherDoubleTableau,
    p: &PartitionedProblem,
    u0: &[f64],
    grid: &TimeGrid,
    cfg: &StepperConfig,
    mut observe: F,
) -> Result<usize, IntegrationError>
where
    F: FnMut(usize, f64, &[f64], usize),
{
    if u0.len() != p.dim() {
        return Err(IntegrationError::DimensionMismatch {
            expected: p.dim(),
            got: u0.len(),
        });
    }
    let mut stepper = Stepper::new(t, p, *cfg, assembly_for(t))?;
    let mut u = u0.to_vec();
    let mut next = vec![0.0; u0.len()];
    observe(0, 0.0, &u, 0);
    let mut max_stage = 0;
    for k in 0..grid.steps() {
        let stats = stepper
            .step(&u, grid.step_size(k), &mut next)
            .map_err(|e| IntegrationError::AtStep {
                step: k + 1,
                source: Box::new(e),
            })?;
        max_stage = max_stage.max(stats.max_stage_iterations);
        std::mem::swap(&mut u, &mut next);
        observe(k + 1, grid.time(k + 1), &u, stats.newton_iterations);
    }
    Ok(max_stage)
}

/// Full trajectory on the uniform grid. ASI tableaux advance in ASI form,
/// others in standard form.
pub fn integrate(
    t: &ButcherDoubleTableau,
    p: &PartitionedProblem,
    u0: &[f64],
    dt: f64,
    t_end: f64,
    cfg: &StepperConfig,
) -> Result<Trajectory, IntegrationError> {
    let n = u0.len();
    if t_end == 0.0 {
        if n != p.dim() {
            return Err(IntegrationError::DimensionMismatch { expected: p.dim(), got: n });
        }
        return Ok(Trajectory {
            dim: n,
            dt,
            times: vec![0.0],
            states: u0.to_vec(),
            newton_iterations: vec![0],
            max_stage_iterations: 0,
        });
    }
    let grid = TimeGrid::new(dt, t_end)?;
    let points = grid.steps() + 1;
    let mut times = Vec::with_capacity(points);
    let mut states = Vec::with_capacity(points * n);
    let mut iters = Vec::with_capacity(points);
    let max_stage_iterations = integrate_with(t, p, u0, &grid, cfg, |_, time, u, it| {
        times.push(time);
        states.extend_from_slice(u);
        iters.push(it);
    })?;
    Ok(Trajectory {
        dim: n,
        dt,
        times,
        states,
        newton_iterations: iters,
        max_stage_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::*;

    /// `U' = λ_E U + λ_I U / ε` on one component.
    struct Linear {
        lambda_e: f64,
        lambda_i: f64,
    }

    impl SplitSystem for Linear {
        fn dim(&self) -> usize {
            1
        }
        fn flux(&self, u: &[f64], out: &mut [f64]) {
            out[0] = self.lambda_e * u[0];
        }
        fn relaxation(&self, u: &[f64], out: &mut [f64]) {
            out[0] = self.lambda_i * u[0];
        }
    }

    struct Leaky;

    impl SplitSystem for Leaky {
        fn dim(&self) -> usize {
            2
        }
        fn flux(&self, _u: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
        fn relaxation(&self, u: &[f64], out: &mut [f64]) {
            out[0] = 1e-3 * u[1];
            out[1] = -u[1];
        }
    }

    fn linear(lambda_e: f64, lambda_i: f64, eps: f64) -> PartitionedProblem {
        PartitionedProblem::new(Arc::new(Linear { lambda_e, lambda_i }), eps, vec![true]).unwrap()
    }

    #[test]
    fn mask_violation_is_detected() {
        let err = PartitionedProblem::new(Arc::new(Leaky), 1.0, vec![false, true]).unwrap_err();
        assert!(matches!(err, IntegrationError::StiffMaskViolation { component: 0, .. }));
        assert!(PartitionedProblem::new(Arc::new(Leaky), -1.0, vec![true, true]).is_err());
    }

    #[test]
    fn imex_euler_backward_step() {
        let t = get_scheme(EULER_IMEX).unwrap();
        let p = linear(0.0, -1.0, 1.0);
        let u = step_standard(&t, &p, &[3.0], 1.0, &StepperConfig::default()).unwrap();
        assert_eq!(u, vec![1.5]);
    }

    #[test]
    fn standard_form_rejects_zero_epsilon() {
        let t = get_scheme(EULER_IMEX).unwrap();
        let p = linear(0.0, -1.0, 0.0);
        let err = step_standard(&t, &p, &[1.0], 0.1, &StepperConfig::default()).unwrap_err();
        assert_eq!(err, IntegrationError::ZeroEpsilonStandardForm);
        assert!(matches!(
            step_asi(&t, &p, &[1.0], 0.1, &StepperConfig::default()),
            Err(IntegrationError::NotAsi(_))
        ));
    }

    #[test]
    fn zero_step_is_identity() {
        let t = get_scheme(ASI_SSP_432).unwrap();
        let p = linear(0.7, -3.0, 0.5);
        let u = step_asi(&t, &p, &[1.234567], 0.0, &StepperConfig::default()).unwrap();
        assert_eq!(u, vec![1.234567]);
    }

    #[test]
    fn standard_and_asi_agree_for_stiffly_accurate_weights() {
        let cfg = StepperConfig::default();
        for name in CATALOG {
            let t = get_scheme(name).unwrap();
            let ts = t.with_weights_from_last_rows();
            let p = linear(0.3, -2.0, 0.25);
            let a = step_asi(&t, &p, &[1.0], 0.2, &cfg).unwrap()[0];
            let b = step_standard(&ts, &p, &[1.0], 0.2, &cfg).unwrap()[0];
            assert!((a - b).abs() <= 1e-14, "{name}: {a} vs {b}");
        }
    }

    #[test]
    fn finite_difference_jacobian_matches_analytic_path() {
        let t = get_scheme(ASI_SSP_643).unwrap();
        let p = linear(-0.5, -4.0, 1e-3);
        let mut cfg = StepperConfig::default();
        let a = step_asi(&t, &p, &[0.8], 0.05, &cfg).unwrap()[0];
        cfg.jacobian = JacobianMode::FiniteDifference;
        let b = step_asi(&t, &p, &[0.8], 0.05, &cfg).unwrap()[0];
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn time_grid_shortens_last_step() {
        let g = TimeGrid::new(0.3, 1.0).unwrap();
        assert_eq!(g.full_steps, 3);
        assert!((g.last_step.unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(g.time(4), 1.0);
        let g = TimeGrid::new(0.1, 5.0).unwrap();
        assert_eq!((g.full_steps, g.last_step), (50, None));
        assert!(TimeGrid::new(0.0, 1.0).is_err());
    }

    #[test]
    fn trajectory_shape_and_csv() {
        let t = get_scheme(ASI_SSP_432).unwrap();
        let p = linear(0.0, -1.0, 1.0);
        let cfg = StepperConfig::default();
        let traj = integrate(&t, &p, &[1.0], 0.25, 1.0, &cfg).unwrap();
        assert_eq!(traj.len(), 5);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,U_1,newton_iters\n"));
        assert_eq!(text.lines().count(), 6);
        let empty = integrate(&t, &p, &[1.0], 0.25, 0.0, &cfg).unwrap();
        assert_eq!(empty.len(), 1);
        assert_eq!(empty.state(0), &[1.0]);
    }

    #[test]
    fn deterministic_trajectories() {
        let t = get_scheme(ASI_SSP_5P53).unwrap();
        let p = linear(0.4, -7.0, 1e-2);
        let cfg = StepperConfig::default();
        let a = integrate(&t, &p, &[1.0], 0.01, 1.0, &cfg).unwrap();
        let b = integrate(&t, &p, &[1.0], 0.01, 1.0, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn step_errors_carry_step_index() {
        // λ_I > 0 makes the first stage Jacobian singular when Δt a11 λ_I = ε.
        let t = get_scheme(BACKWARD_EULER_CHAIN).unwrap();
        let p = linear(0.0, 4.0, 1.0);
        let err = integrate(&t, &p, &[1.0], 0.5, 1.0, &StepperConfig::default()).unwrap_err();
        match err {
            IntegrationError::AtStep { step, source } => {
                assert_eq!(step, 1);
                assert_eq!(*source, IntegrationError::SingularJacobian { stage: 1 });
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
