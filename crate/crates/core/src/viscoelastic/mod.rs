//! Coupled solver for the full viscoelastic model in mild-weak form: the
//! pressure evolves parabolically,
//! `du/dt = (1/Q)(div(alpha (grad u + zeta)) - beta kappa(u))`,
//! while the state obeys the mild integral identity
//! `phi(t) = phi_0 + Q u_0 - Q u(t) - int_0^t beta(phi) kappa(u) ds`.
//!
//! Each backward Euler step is coupled to the mild update by an inner Picard
//! loop driven to a tight tolerance, so the discrete mild identity is an
//! enforced invariant rather than an approximation. A global fixed-point
//! operator over whole trajectories is provided as an independent route to
//! the same discrete solution, and a 1D spectral Galerkin solver acts as a
//! cross-discretization reference.
//!
//! The log-transformed variant integrates the substituted state variable and
//! emits porosities through the inverse transform, which keeps them in
//! `(0, 1)` by construction.

pub mod galerkin;

use crate::elliptic::{EllipticError, EllipticProblem};
use crate::grid::{jump_faces, Field, GridError, Partition};
use crate::model::{inverse_log_transform, CoefficientSet, ModelError, Variant};
use crate::norms::{self, NormError, SeriesField, TimeSeries};
use crate::report::{RunReport, StepStats, Termination};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ViscoError {
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "inner coupling did not reach {tol} at step {step} (achieved {achieved}); reduce the time step"
    )]
    InnerNoConvergence { step: usize, tol: f64, achieved: f64 },
    #[error("Galerkin integration became unstable at t = {0}; increase substeps")]
    GalerkinUnstable(f64),
    #[error("the Galerkin reference supports 1D grids only")]
    OneDimensionalOnly,
}

/// Configuration of a coupled viscoelastic run.
#[derive(Debug, Clone)]
pub struct ViscoRunConfig {
    /// Coefficients with `Q > 0` and a viscoelastic variant.
    pub coeffs: CoefficientSet,
    /// Initial state: porosity, or the transformed variable for the
    /// log-transformed variant.
    pub state0: Field,
    pub u0: Field,
    pub horizon: f64,
    pub steps: usize,
    /// Per-step Picard tolerance on the state (enforces the mild identity).
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// Global fixed-point tolerance and iteration cap.
    pub xi_tol: f64,
    pub xi_max_iter: usize,
    /// Hölder exponent for diagnostics.
    pub gamma: f64,
    pub partition: Option<Partition>,
    pub eps_min: f64,
    pub r_max: f64,
    /// Newton tolerance of the backward Euler solves.
    pub elliptic_tol: f64,
    pub jump_threshold: Option<f64>,
    /// Track contraction also in the piecewise parabolic Hölder norm
    /// (coarse grids only).
    pub holder_diagnostics: bool,
}

impl ViscoRunConfig {
    pub fn new(
        coeffs: CoefficientSet,
        state0: Field,
        u0: Field,
        horizon: f64,
        steps: usize,
    ) -> ViscoRunConfig {
        ViscoRunConfig {
            eps_min: coeffs.eps,
            r_max: coeffs.r,
            coeffs,
            state0,
            u0,
            horizon,
            steps,
            inner_tol: 1e-10,
            inner_max_iter: 30,
            xi_tol: 1e-10,
            xi_max_iter: 60,
            gamma: 0.5,
            partition: None,
            elliptic_tol: 1e-12,
            jump_threshold: None,
            holder_diagnostics: false,
        }
    }

    pub fn validate(&self) -> Result<(), ViscoError> {
        self.coeffs
            .validate()
            .map_err(|e| ViscoError::InvalidConfig(format!("{e}")))?;
        if self.coeffs.variant.is_viscous() || !(self.coeffs.q > 0.0) {
            return Err(ViscoError::InvalidConfig(format!(
                "coupled run requires a viscoelastic variant with Q > 0, got {} with Q = {}",
                self.coeffs.variant.name(),
                self.coeffs.q
            )));
        }
        if !(self.horizon > 0.0) || self.steps == 0 {
            return Err(ViscoError::InvalidConfig(format!(
                "need horizon > 0 and steps >= 1, got T = {}, N = {}",
                self.horizon, self.steps
            )));
        }
        if self.state0.grid() != self.u0.grid() {
            return Err(GridError::GridMismatch.into());
        }
        self.state0.validate_finite()?;
        self.u0.validate_finite()?;
        let (lo, hi) = (self.state0.min(), self.state0.max());
        if !(lo > self.coeffs.eps) || !(hi < self.coeffs.r) {
            return Err(ViscoError::InvalidConfig(format!(
                "initial state range [{lo}, {hi}] must lie strictly inside ({}, {})",
                self.coeffs.eps, self.coeffs.r
            )));
        }
        // piecewise Hölder analogue of the contraction hypothesis
        if let Some(partition) = &self.partition {
            let norm =
                norms::piecewise_spatial_holder_norm(&self.state0, self.gamma, partition)?;
            if !(norm < self.coeffs.r) {
                return Err(ViscoError::InvalidConfig(format!(
                    "piecewise Hölder norm of the initial state ({norm}) must be < R = {}",
                    self.coeffs.r
                )));
            }
        }
        Ok(())
    }

    /// Physical porosity from the state variable.
    fn emit_phi(&self, state: &Field) -> Result<Field, ViscoError> {
        match self.coeffs.variant {
            Variant::LogTransformed => {
                let mut out = state.clone();
                for v in out.values_mut() {
                    *v = inverse_log_transform(*v)?;
                }
                Ok(out)
            }
            _ => Ok(state.clone()),
        }
    }
}

/// Running data of the mild integral identity.
#[derive(Debug, Clone)]
pub struct MildHistory {
    /// `phi_0 + Q u_0`, the conserved combination.
    base: Field,
    /// Trapezoid accumulation of `beta(phi) kappa(u)` up to the current node.
    integral: Field,
    /// Relaxation rate at the current node.
    last_rate: Field,
}

impl MildHistory {
    /// History at `t = 0`.
    pub fn initial(config: &ViscoRunConfig) -> Result<MildHistory, ViscoError> {
        let base = config.state0.axpy(config.coeffs.q, &config.u0)?;
        let rate0 = rate(&config.state0, &config.u0, &config.coeffs)?;
        Ok(MildHistory {
            base,
            integral: Field::constant(config.state0.grid(), 0.0),
            last_rate: rate0,
        })
    }

    /// Recomputes the accumulated integral from a series, for audits.
    pub fn integral_from_series(
        series: &TimeSeries,
        coeffs: &CoefficientSet,
    ) -> Result<Field, ViscoError> {
        let mut acc = Field::constant(series.grid(), 0.0);
        let mut prev = rate(series.phi_at(0), series.u_at(0), coeffs)?;
        for k in 1..series.len() {
            let cur = rate(series.phi_at(k), series.u_at(k), coeffs)?;
            let dt = series.times()[k] - series.times()[k - 1];
            let sum = prev.axpy(1.0, &cur)?;
            acc = acc.axpy(0.5 * dt, &sum)?;
            prev = cur;
        }
        Ok(acc)
    }
}

/// `beta(state) kappa(u)` cellwise.
fn rate(state: &Field, u: &Field, coeffs: &CoefficientSet) -> Result<Field, ModelError> {
    let mut out = Field::constant(state.grid(), 0.0);
    for i in 0..state.len() {
        out.values_mut()[i] = coeffs.beta(state.values()[i])? * coeffs.kappa(u.values()[i]);
    }
    Ok(out)
}

/// Backward Euler solve of the pressure equation with coefficients frozen at
/// `state`: `(Q/tau) u + A u + beta kappa(u) - g = (Q/tau) u_prev`.
fn backward_euler_pressure(
    state: &Field,
    u_prev: &Field,
    tau: f64,
    coeffs: &CoefficientSet,
    tol: f64,
    warm: Option<&Field>,
) -> Result<Field, ViscoError> {
    let grid = state.grid();
    let q_over_tau = coeffs.q / tau;
    let mut alpha = Field::constant(grid, 0.0);
    let mut beta = Field::constant(grid, 0.0);
    let mut zx = Field::constant(grid, 0.0);
    let mut zy = Field::constant(grid, 0.0);
    for i in 0..grid.num_cells() {
        let x = state.values()[i];
        alpha.values_mut()[i] = coeffs.alpha(x)?;
        beta.values_mut()[i] = coeffs.beta(x)?;
        let z = coeffs.zeta(x)?;
        zx.values_mut()[i] = z[0];
        zy.values_mut()[i] = z[1];
    }
    let zeta =
        crate::grid::vector_to_faces(&zx, if grid.dim() == 2 { Some(&zy) } else { None })?;
    let reaction = Field::constant(grid, q_over_tau);
    let source = u_prev.map(|v| q_over_tau * v);
    let problem = EllipticProblem::with_reaction_and_source(
        &alpha,
        beta,
        zeta,
        coeffs.kappa_law(),
        reaction,
        source,
    )?
    .with_tol(tol);
    Ok(problem.solve(warm.or(Some(u_prev)))?.u)
}

/// One coupled step: inner Picard between the backward Euler pressure solve
/// and the mild state update, iterated until the state increment drops below
/// `inner_tol`.
///
/// Returns the new pressure, the new state, the updated history and the
/// recomputed mild-identity residual of the accepted step.
pub fn parabolic_step(
    u_prev: &Field,
    state_prev: &Field,
    history: &MildHistory,
    tau: f64,
    config: &ViscoRunConfig,
    step_index: usize,
) -> Result<(Field, Field, MildHistory, f64), ViscoError> {
    let coeffs = &config.coeffs;
    let mut state_star = state_prev.clone();
    let mut u_new = u_prev.clone();
    let mut converged = false;
    let mut achieved = f64::INFINITY;
    for _ in 0..config.inner_max_iter {
        u_new = backward_euler_pressure(
            &state_star,
            u_prev,
            tau,
            coeffs,
            config.elliptic_tol,
            Some(&u_new),
        )?;
        let w_new = rate(&state_star, &u_new, coeffs)?;
        // state = base - Q u - [I_k + tau/2 (w_k + w_new)]
        let mut state_new = history.base.axpy(-coeffs.q, &u_new)?;
        state_new = state_new.axpy(-1.0, &history.integral)?;
        state_new = state_new.axpy(-0.5 * tau, &history.last_rate)?;
        state_new = state_new.axpy(-0.5 * tau, &w_new)?;
        let delta = norms::lp_norm(&state_new.axpy(-1.0, &state_star)?, f64::INFINITY)?;
        state_star = state_new;
        achieved = delta;
        if delta <= config.inner_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ViscoError::InnerNoConvergence {
            step: step_index,
            tol: config.inner_tol,
            achieved,
        });
    }
    // close the bookkeeping on the accepted state and report the residual
    let w_acc = rate(&state_star, &u_new, coeffs)?;
    let mut integral = history.integral.axpy(0.5 * tau, &history.last_rate)?;
    integral = integral.axpy(0.5 * tau, &w_acc)?;
    let mut identity = state_star.axpy(coeffs.q, &u_new)?;
    identity = identity.axpy(1.0, &integral)?;
    identity = identity.axpy(-1.0, &history.base)?;
    let residual = norms::lp_norm(&identity, f64::INFINITY)?;
    let new_history =
        MildHistory { base: history.base.clone(), integral, last_rate: w_acc };
    Ok((u_new, state_star, new_history, residual))
}

fn step_stats(
    t: f64,
    phi: &Field,
    u: &Field,
    rate_field: &Field,
    jump_threshold: Option<f64>,
) -> StepStats {
    StepStats {
        t,
        phi_inf: norms::lp_norm(phi, f64::INFINITY).expect("inf"),
        phi_min: phi.min(),
        phi_bv: norms::bv_norm(phi),
        u_inf: norms::lp_norm(u, f64::INFINITY).expect("inf"),
        u_w12: norms::w12_norm(u),
        rate_inf: norms::lp_norm(rate_field, f64::INFINITY).expect("inf"),
        jump_face_count: jump_threshold.map(|th| jump_faces(phi, th).len()).unwrap_or(0),
    }
}

/// Runs `N` coupled steps; the emitted series carries physical porosities
/// (`1 - exp(-lambda)` for the log-transformed variant) paired with pressures.
pub fn run_viscoelastic(config: &ViscoRunConfig) -> Result<(TimeSeries, RunReport), ViscoError> {
    config.validate()?;
    let tau = config.horizon / config.steps as f64;
    let mut report = RunReport::new();
    let mut history = MildHistory::initial(config)?;
    let mut state = config.state0.clone();
    let mut u = config.u0.clone();

    let phi_emit = config.emit_phi(&state)?;
    let mut series = TimeSeries::new(phi_emit.clone(), u.clone())?;
    report
        .steps
        .push(step_stats(0.0, &phi_emit, &u, &history.last_rate, config.jump_threshold));
    report.cbar_estimate = report.steps[0].rate_inf;

    for k in 0..config.steps {
        let (u_new, state_new, history_new, residual) =
            parabolic_step(&u, &state, &history, tau, config, k)?;
        report.mild_residual_max = report.mild_residual_max.max(residual);
        let t_next = (k + 1) as f64 * tau;
        if state_new.min() < config.eps_min || state_new.max() > config.r_max {
            report.bound_violation = true;
            report.termination = Termination::BoundExit { t_exit: t_next };
            report.achieved_t = k as f64 * tau;
            return Ok((series, report));
        }
        u = u_new;
        state = state_new;
        history = history_new;
        let phi_emit = config.emit_phi(&state)?;
        series.push(t_next, phi_emit.clone(), u.clone())?;
        report.steps.push(step_stats(
            t_next,
            &phi_emit,
            &u,
            &history.last_rate,
            config.jump_threshold,
        ));
        report.cbar_estimate =
            report.cbar_estimate.max(report.steps.last().expect("pushed").rate_inf);
    }
    report.achieved_t = config.horizon;
    report.termination = Termination::Horizon;
    Ok((series, report))
}

/// One full parabolic sweep with the state series frozen: backward Euler over
/// all nodes, coefficients taken at the end of each step.
fn parabolic_sweep(
    states: &[Field],
    times: &[f64],
    u0: &Field,
    config: &ViscoRunConfig,
) -> Result<Vec<Field>, ViscoError> {
    let mut out = Vec::with_capacity(states.len());
    out.push(u0.clone());
    let mut u = u0.clone();
    for k in 1..states.len() {
        let tau = times[k] - times[k - 1];
        u = backward_euler_pressure(
            &states[k],
            &u,
            tau,
            &config.coeffs,
            config.elliptic_tol,
            None,
        )?;
        out.push(u.clone());
    }
    Ok(out)
}

/// One application of the global fixed-point operator on a state trajectory:
/// a frozen-coefficient parabolic sweep followed by the mild update.
///
/// Input and output are *state* trajectories stored in the `phi` slot of the
/// series; pressures of the sweep ride along in the `u` slot.
pub fn xi_apply(series: &TimeSeries, config: &ViscoRunConfig) -> Result<TimeSeries, ViscoError> {
    let n = series.len();
    let states: Vec<Field> = (0..n).map(|k| series.phi_at(k).clone()).collect();
    let pressures = parabolic_sweep(&states, series.times(), &config.u0, config)?;
    let base = config.state0.axpy(config.coeffs.q, &config.u0)?;

    let mut rates: Vec<Field> = Vec::with_capacity(n);
    for k in 0..n {
        rates.push(rate(&states[k], &pressures[k], &config.coeffs)?);
    }
    let mut acc = Field::constant(series.grid(), 0.0);
    let mut out = TimeSeries::new(config.state0.clone(), pressures[0].clone())?;
    for k in 1..n {
        let dt = series.times()[k] - series.times()[k - 1];
        let sum = rates[k - 1].axpy(1.0, &rates[k])?;
        acc = acc.axpy(0.5 * dt, &sum)?;
        let mut next = base.axpy(-config.coeffs.q, &pressures[k])?;
        next = next.axpy(-1.0, &acc)?;
        out.push(series.times()[k], next, pressures[k].clone())?;
    }
    Ok(out)
}

/// Iterates the global operator from the constant-in-time initial state.
///
/// Contraction factors are recorded in `C([0,T]; L^inf)` (and in the
/// piecewise parabolic Hölder norm when requested on coarse grids). Two
/// consecutive non-contracting sweeps terminate the run with a
/// non-contraction diagnostic.
pub fn xi_solve(config: &ViscoRunConfig) -> Result<(TimeSeries, RunReport), ViscoError> {
    config.validate()?;
    let mut current = TimeSeries::new(config.state0.clone(), config.u0.clone())?;
    for k in 1..=config.steps {
        let t = config.horizon * k as f64 / config.steps as f64;
        current.push(t, config.state0.clone(), config.u0.clone())?;
    }

    let mut report = RunReport::new();
    let mut prev_increment: Option<f64> = None;
    let mut consecutive_expansions = 0usize;
    let mut converged = false;

    for _ in 0..config.xi_max_iter {
        let next = xi_apply(&current, config)?;
        // iterate left the admissible set: horizon too large to contract
        let exited = (0..next.len()).any(|k| {
            next.phi_at(k).min() < config.eps_min || next.phi_at(k).max() > config.r_max
        });
        if exited {
            report.termination = Termination::NonContraction;
            report.achieved_t = config.horizon;
            let emitted = emit_series(&current, config)?;
            fill_rows(&mut report, &emitted, config)?;
            return Ok((emitted, report));
        }
        let increment = next.c_linf_distance(&current, SeriesField::Phi)?;
        if let Some(prev) = prev_increment {
            if prev > 0.0 {
                let q = increment / prev;
                report.contraction.push(q);
                if q >= 1.0 {
                    consecutive_expansions += 1;
                    if consecutive_expansions >= 2 {
                        report.termination = Termination::NonContraction;
                        report.achieved_t = config.horizon;
                        let emitted = emit_series(&next, config)?;
                        fill_rows(&mut report, &emitted, config)?;
                        return Ok((emitted, report));
                    }
                } else {
                    consecutive_expansions = 0;
                }
            }
        }
        prev_increment = Some(increment);
        current = next;
        if increment <= config.xi_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        report.termination = Termination::NonContraction;
    } else {
        report.termination = Termination::Horizon;
    }
    report.achieved_t = config.horizon;

    // fixed-point residual of the mild identity at the final trajectory
    let integral = MildHistory::integral_from_series(&current, &config.coeffs)?;
    let base = config.state0.axpy(config.coeffs.q, &config.u0)?;
    let last = current.len() - 1;
    let mut identity = current.phi_at(last).axpy(config.coeffs.q, current.u_at(last))?;
    identity = identity.axpy(1.0, &integral)?;
    identity = identity.axpy(-1.0, &base)?;
    report.mild_residual_max = norms::lp_norm(&identity, f64::INFINITY)?;

    let emitted = emit_series(&current, config)?;
    fill_rows(&mut report, &emitted, config)?;
    Ok((emitted, report))
}

fn emit_series(state_series: &TimeSeries, config: &ViscoRunConfig) -> Result<TimeSeries, ViscoError> {
    if config.coeffs.variant != Variant::LogTransformed {
        return Ok(state_series.clone());
    }
    let mut out = TimeSeries::new(
        config.emit_phi(state_series.phi_at(0))?,
        state_series.u_at(0).clone(),
    )?;
    for k in 1..state_series.len() {
        out.push(
            state_series.times()[k],
            config.emit_phi(state_series.phi_at(k))?,
            state_series.u_at(k).clone(),
        )?;
    }
    Ok(out)
}

fn fill_rows(
    report: &mut RunReport,
    series: &TimeSeries,
    config: &ViscoRunConfig,
) -> Result<(), ViscoError> {
    report.steps.clear();
    for k in 0..series.len() {
        let r = rate(series.phi_at(k), series.u_at(k), &config.coeffs)
            .unwrap_or_else(|_| Field::constant(series.grid(), 0.0));
        report.steps.push(step_stats(
            series.times()[k],
            series.phi_at(k),
            series.u_at(k),
            &r,
            config.jump_threshold,
        ));
    }
    Ok(())
}

/// Report of the pressure sup-bound diagnostic: the smallest constant making
/// `sup |u(t)| <= sup |u0| + C (int_0^t ||u||_L2^2 ds)^(1/2)` hold at every
/// node.
#[derive(Debug, Clone, Copy)]
pub struct SupBoundReport {
    pub c_hat: f64,
    pub sup_u0: f64,
    pub feasible: bool,
}

pub fn sup_bound_check(series: &TimeSeries) -> Result<SupBoundReport, ViscoError> {
    let sup_u0 = norms::lp_norm(series.u_at(0), f64::INFINITY)?;
    let mut acc = 0.0f64;
    let mut prev_sq = {
        let l2 = norms::lp_norm(series.u_at(0), 2.0)?;
        l2 * l2
    };
    let mut c_hat = 0.0f64;
    let mut feasible = true;
    for k in 1..series.len() {
        let l2 = norms::lp_norm(series.u_at(k), 2.0)?;
        let sq = l2 * l2;
        let dt = series.times()[k] - series.times()[k - 1];
        acc += 0.5 * dt * (prev_sq + sq);
        prev_sq = sq;
        let excess = norms::lp_norm(series.u_at(k), f64::INFINITY)? - sup_u0;
        if excess > 0.0 {
            let denom = crate::math::sqrt(acc);
            if denom > 0.0 {
                c_hat = c_hat.max(excess / denom);
            } else {
                feasible = false;
            }
        }
    }
    Ok(SupBoundReport { c_hat, sup_u0, feasible })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::math;

    fn visco_coeffs() -> CoefficientSet {
        CoefficientSet {
            variant: Variant::SmallPorosity,
            q: 1.0,
            eps: 0.01,
            r: 0.9,
            ..CoefficientSet::default()
        }
    }

    fn bump(grid: Grid, base: f64, amp: f64) -> Field {
        Field::from_fn(grid, |x| {
            let s = (x[0] - 0.5) / 0.15;
            base + amp * math::exp(-s * s)
        })
    }

    #[test]
    fn zero_data_run_stays_zero() {
        let g = Grid::new_1d(1.0, 16).unwrap();
        let coeffs = CoefficientSet { f: [0.0, 0.0], ..visco_coeffs() };
        let state0 = Field::constant(g, 0.2);
        let u0 = Field::constant(g, 0.0);
        let config = ViscoRunConfig::new(coeffs, state0.clone(), u0, 0.2, 8);
        let (series, report) = run_viscoelastic(&config).unwrap();
        assert_eq!(report.termination, Termination::Horizon);
        for k in 0..series.len() {
            assert!(norms::lp_norm(series.u_at(k), f64::INFINITY).unwrap() <= 1e-11);
            let d = series.phi_at(k).axpy(-1.0, &state0).unwrap();
            assert!(norms::lp_norm(&d, f64::INFINITY).unwrap() <= 1e-10);
        }
        assert!(report.mild_residual_max <= config.inner_tol);
    }

    #[test]
    fn heat_equation_oracle_backward_euler() {
        // frozen state phi = 1 with b0 = 0, f = 0: the pressure sweep is the
        // pure heat equation, u(t) = exp(-pi^2 t) sin(pi x)
        let pi = core::f64::consts::PI;
        let g = Grid::new_1d(1.0, 128).unwrap();
        let coeffs = CoefficientSet {
            b0: 0.0,
            f: [0.0, 0.0],
            eps: 0.5,
            r: 1.5,
            ..visco_coeffs()
        };
        let state0 = Field::constant(g, 1.0);
        let u0 = Field::from_fn(g, |x| math::sin(pi * x[0]));
        let t_end = 0.1;
        let n = 256;
        let config = ViscoRunConfig::new(coeffs, state0.clone(), u0.clone(), t_end, n);
        let mut frozen = TimeSeries::new(state0.clone(), u0.clone()).unwrap();
        for k in 1..=n {
            frozen
                .push(t_end * k as f64 / n as f64, state0.clone(), u0.clone())
                .unwrap();
        }
        let series = xi_apply(&frozen, &config).unwrap();
        let exact = Field::from_fn(g, |x| math::exp(-pi * pi * t_end) * math::sin(pi * x[0]));
        let err = series.u_at(n).axpy(-1.0, &exact).unwrap();
        let e = norms::lp_norm(&err, f64::INFINITY).unwrap();
        assert!(e < 4e-3, "heat oracle error {e}");
        // pure diffusion: L2 of u nonincreasing
        let mut prev = f64::INFINITY;
        for k in 0..series.len() {
            let l2 = norms::lp_norm(series.u_at(k), 2.0).unwrap();
            assert!(l2 <= prev + 1e-12);
            prev = l2;
        }
        // sup bound diagnostic feasible with finite constant
        let sb = sup_bound_check(&series).unwrap();
        assert!(sb.feasible && sb.c_hat.is_finite());
    }

    #[test]
    fn backward_euler_self_convergence_first_order() {
        let g = Grid::new_1d(1.0, 32).unwrap();
        let coeffs = visco_coeffs();
        let state0 = bump(g, 0.2, 0.05);
        let u0 = Field::constant(g, 0.0);
        let t_end = 0.05;
        let mut gaps = Vec::new();
        let mut prev: Option<TimeSeries> = None;
        for n in [8usize, 16, 32] {
            let config = ViscoRunConfig::new(coeffs, state0.clone(), u0.clone(), t_end, n);
            let (series, _) = run_viscoelastic(&config).unwrap();
            if let Some(p) = &prev {
                // compare at the coarse nodes
                let mut worst = 0.0f64;
                for k in 0..p.len() {
                    let t = p.times()[k];
                    let j = series.index_at(t).expect("nested node");
                    let d = p.phi_at(k).axpy(-1.0, series.phi_at(j)).unwrap();
                    worst = worst.max(norms::lp_norm(&d, f64::INFINITY).unwrap());
                }
                gaps.push(worst);
            }
            prev = Some(series);
        }
        let ratio = gaps[0] / gaps[1];
        assert!(ratio > 1.5 && ratio < 2.7, "gaps {gaps:?}");
    }

    #[test]
    fn mild_identity_enforced_every_step() {
        let g = Grid::new_1d(1.0, 24).unwrap();
        let coeffs = CoefficientSet { c1: 0.25, ..visco_coeffs() };
        let state0 = bump(g, 0.2, 0.05);
        let u0 = Field::from_fn(g, |x| 0.1 * math::sin(2.0 * core::f64::consts::PI * x[0]));
        let config = ViscoRunConfig::new(coeffs, state0, u0, 0.1, 16);
        let (series, report) = run_viscoelastic(&config).unwrap();
        assert!(report.mild_residual_max <= config.inner_tol, "{}", report.mild_residual_max);
        // audit: recompute the integral from the stored snapshots
        let integral = MildHistory::integral_from_series(&series, &config.coeffs).unwrap();
        let base = config.state0.axpy(config.coeffs.q, &config.u0).unwrap();
        let last = series.len() - 1;
        let mut identity = series.phi_at(last).axpy(config.coeffs.q, series.u_at(last)).unwrap();
        identity = identity.axpy(1.0, &integral).unwrap();
        identity = identity.axpy(-1.0, &base).unwrap();
        assert!(norms::lp_norm(&identity, f64::INFINITY).unwrap() <= 10.0 * config.inner_tol);
    }

    #[test]
    fn xi_apply_ignores_relaxation_free_input() {
        // b0 = 0, u0 = 0, f = 0: P(phi) = 0 and Xi[phi] = phi0
        let g = Grid::new_1d(1.0, 12).unwrap();
        let coeffs = CoefficientSet { b0: 0.0, f: [0.0, 0.0], ..visco_coeffs() };
        let state0 = Field::constant(g, 0.25);
        let u0 = Field::constant(g, 0.0);
        let mut config = ViscoRunConfig::new(coeffs, state0.clone(), u0.clone(), 0.3, 5);
        config.xi_tol = 1e-13;
        let mut input = TimeSeries::new(state0.clone(), u0.clone()).unwrap();
        for k in 1..=5 {
            input
                .push(
                    0.3 * k as f64 / 5.0,
                    state0.map(|v| v + 0.01 * k as f64),
                    u0.clone(),
                )
                .unwrap();
        }
        let out = xi_apply(&input, &config).unwrap();
        for k in 0..out.len() {
            let d = out.phi_at(k).axpy(-1.0, &state0).unwrap();
            assert!(norms::lp_norm(&d, f64::INFINITY).unwrap() <= 1e-11);
        }
    }

    #[test]
    fn xi_solve_agrees_with_stepwise_solver() {
        let g = Grid::new_1d(1.0, 24).unwrap();
        let coeffs = visco_coeffs();
        let state0 = bump(g, 0.2, 0.04);
        let u0 = Field::constant(g, 0.0);
        let mut config = ViscoRunConfig::new(coeffs, state0, u0, 0.05, 8);
        config.inner_tol = 1e-11;
        config.xi_tol = 1e-11;
        config.elliptic_tol = 1e-13;
        let (step_series, _) = run_viscoelastic(&config).unwrap();
        let (xi_series, xi_report) = xi_solve(&config).unwrap();
        assert_eq!(xi_report.termination, Termination::Horizon);
        let gap = step_series.c_linf_distance(&xi_series, SeriesField::Phi).unwrap();
        assert!(gap <= 10.0 * config.inner_tol, "gap {gap}");
        if let Some(q) = xi_report.mean_contraction() {
            assert!(q < 1.0);
        }
    }

    #[test]
    fn log_transformed_run_emits_porosities_in_unit_interval() {
        let g = Grid::new_1d(1.0, 24).unwrap();
        let coeffs = CoefficientSet {
            variant: Variant::LogTransformed,
            q: 1.0,
            eps: 0.01,
            r: 2.0,
            ..CoefficientSet::default()
        };
        // lambda0 corresponding to phi0 around 0.2
        let state0 = bump(g, 0.2, 0.05).map(|p| crate::model::log_transform(p).unwrap());
        let u0 = Field::constant(g, 0.0);
        let config = ViscoRunConfig::new(coeffs, state0, u0, 0.05, 8);
        let (series, report) = run_viscoelastic(&config).unwrap();
        assert_eq!(report.termination, Termination::Horizon);
        for k in 0..series.len() {
            for &v in series.phi_at(k).values() {
                assert!(v > 0.0 && v < 1.0, "emitted porosity {v} outside (0,1)");
            }
        }
    }

    #[test]
    fn variant_gap_shrinks_with_porosity_scale() {
        // matched small-porosity and log-transformed runs from the same data
        let g = Grid::new_1d(1.0, 24).unwrap();
        let mut gaps = Vec::new();
        let scales = [1.0, 0.5, 0.25];
        for scale in scales {
            let base = 0.05 * scale;
            let amp = 0.02 * scale;
            let phi0 = bump(g, base, amp);
            let u0 = Field::constant(g, 0.0);
            let sp = CoefficientSet {
                variant: Variant::SmallPorosity,
                eps: 1e-6,
                r: 0.9,
                ..visco_coeffs()
            };
            let lt = CoefficientSet { variant: Variant::LogTransformed, ..sp };
            let config_sp = ViscoRunConfig::new(sp, phi0.clone(), u0.clone(), 0.1, 16);
            let (series_sp, _) = run_viscoelastic(&config_sp).unwrap();
            let lambda0 = phi0.map(|p| crate::model::log_transform(p).unwrap());
            let config_lt = ViscoRunConfig::new(lt, lambda0, u0, 0.1, 16);
            let (series_lt, _) = run_viscoelastic(&config_lt).unwrap();
            gaps.push(series_sp.c_linf_distance(&series_lt, SeriesField::Phi).unwrap());
        }
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "gaps not monotone: {gaps:?}");
        // observed order in the porosity scale
        let order01 = math::ln(gaps[0] / gaps[1]) / math::ln(2.0);
        let order12 = math::ln(gaps[1] / gaps[2]) / math::ln(2.0);
        assert!(order01 >= 0.8 && order12 >= 0.8, "orders {order01}, {order12}");
    }

    #[test]
    fn pressure_has_no_persistent_jump_faces() {
        // phi keeps its jump; the face jumps of u shrink with the mesh
        let theta = 0.075; // half the 0.15 initial porosity jump
        let mut u_jumps = Vec::new();
        for cells in [64usize, 128, 256, 512, 1024] {
            let g = Grid::new_1d(1.0, cells).unwrap();
            let partition = crate::grid::Partition::from_regions(
                g,
                &[crate::grid::Region::Box { x0: 0.3, x1: 0.6, y0: -1.0, y1: 2.0 }],
            )
            .unwrap();
            let phi0 = crate::grid::make_piecewise_initial(
                &partition,
                &[
                    (1, crate::grid::ValueRule::Constant(0.3)),
                    (2, crate::grid::ValueRule::Constant(0.15)),
                ],
            )
            .unwrap();
            let config =
                ViscoRunConfig::new(visco_coeffs(), phi0, Field::constant(g, 0.0), 0.4, 8);
            let (series, _) = run_viscoelastic(&config).unwrap();
            let last = series.len() - 1;
            // phi still jumps at the interface
            assert!(!jump_faces(series.phi_at(last), theta).is_empty());
            // u never does
            assert!(jump_faces(series.u_at(last), theta).is_empty());
            let u = series.u_at(last);
            let mut worst = 0.0f64;
            for i in 1..g.num_cells() {
                worst = worst.max((u.values()[i] - u.values()[i - 1]).abs());
            }
            u_jumps.push(worst);
        }
        // the interface reaction layer resolves slowly, but the trend is
        // unambiguous: u's largest face jump vanishes under refinement
        assert!(
            u_jumps.windows(2).all(|w| w[1] < w[0]),
            "u face jumps not monotone under refinement: {u_jumps:?}"
        );
        assert!(
            *u_jumps.last().unwrap() < 0.3 * u_jumps[0],
            "u face jumps do not decay under refinement: {u_jumps:?}"
        );
    }

    #[test]
    fn holder_discrepancy_doubles_with_the_perturbation() {
        // continuous dependence: doubling the initial perturbation doubles
        // the discrepancy in the summed piecewise parabolic Hölder norm
        let g = Grid::new_1d(1.0, 24).unwrap();
        let partition = crate::grid::Partition::uniform(g);
        let base = ViscoRunConfig::new(
            visco_coeffs(),
            bump(g, 0.2, 0.05),
            Field::constant(g, 0.0),
            0.1,
            10,
        );
        let (reference, _) = run_viscoelastic(&base).unwrap();
        let discrepancy = |delta: f64| {
            let config =
                ViscoRunConfig { state0: base.state0.map(|v| v + delta), ..base.clone() };
            let (perturbed, _) = run_viscoelastic(&config).unwrap();
            let mut diff =
                TimeSeries::new(
                    reference.phi_at(0).axpy(-1.0, perturbed.phi_at(0)).unwrap(),
                    Field::constant(g, 0.0),
                )
                .unwrap();
            for k in 1..reference.len() {
                diff.push(
                    reference.times()[k],
                    reference.phi_at(k).axpy(-1.0, perturbed.phi_at(k)).unwrap(),
                    Field::constant(g, 0.0),
                )
                .unwrap();
            }
            norms::piecewise_parabolic_holder_norm(
                &diff,
                SeriesField::Phi,
                0,
                base.gamma,
                &partition,
            )
            .unwrap()
        };
        let d1 = discrepancy(5e-4);
        let d2 = discrepancy(1e-3);
        let ratio = d2 / d1;
        assert!((1.5..=2.5).contains(&ratio), "doubling ratio {ratio}");
    }

    #[test]
    fn sup_bound_constant_stable_under_refinement() {
        let mut constants = Vec::new();
        for cells in [32usize, 64] {
            let g = Grid::new_1d(1.0, cells).unwrap();
            let config = ViscoRunConfig::new(
                visco_coeffs(),
                bump(g, 0.2, 0.05),
                Field::from_fn(g, |x| 0.05 * math::sin(core::f64::consts::PI * x[0])),
                0.2,
                32,
            );
            let (series, _) = run_viscoelastic(&config).unwrap();
            let sb = sup_bound_check(&series).unwrap();
            assert!(sb.feasible);
            constants.push(sb.c_hat);
        }
        let rel = (constants[0] - constants[1]).abs() / constants[1].abs().max(1e-12);
        assert!(rel <= 0.20, "sup-bound constant moved {rel} under refinement: {constants:?}");
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let g = Grid::new_1d(1.0, 8).unwrap();
        let u0 = Field::constant(g, 0.0);
        // viscous variant rejected
        let mut c = visco_coeffs();
        c.variant = Variant::ViscousSmall;
        let bad = ViscoRunConfig::new(c, Field::constant(g, 0.2), u0.clone(), 0.1, 4);
        assert!(matches!(bad.validate(), Err(ViscoError::InvalidConfig(_))));
        // Q = 0 rejected
        let mut c2 = visco_coeffs();
        c2.q = 0.0;
        let bad2 = ViscoRunConfig::new(c2, Field::constant(g, 0.2), u0, 0.1, 4);
        assert!(matches!(bad2.validate(), Err(ViscoError::InvalidConfig(_))));
    }
}
