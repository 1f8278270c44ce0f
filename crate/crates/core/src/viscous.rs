//! Time integration of the viscous limit (`Q = 0`): at each instant the
//! pressure solves the elliptic balance, and the porosity follows the
//! pointwise relaxation law `d phi/dt = -beta(phi) kappa(u)` (times `1-phi`
//! for the full-model variant).
//!
//! Two routes to the same solution are provided: the explicit Euler scheme
//! (stable in `BV`, first order) and Picard iteration of the mild integral
//! operator, which contracts for small horizons. The safe-horizon selector
//! picks the largest time for which an a priori rate bound keeps the
//! porosity inside its admissible range; leaving that range is a meaningful
//! outcome (the blow-up alternative), reported rather than thrown.

use crate::elliptic::{EllipticError, EllipticProblem};
use crate::grid::{jump_faces, Field, GridError};
use crate::model::{CoefficientSet, ModelError};
use crate::norms::{self, NormError, SeriesField, TimeSeries};
use crate::report::{RunReport, StepStats, Termination};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ViscousError {
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
    #[error("initial porosity touches the admissible bounds; no safe horizon exists")]
    ZeroMargin,
}

/// How the viscous solution is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ViscousMode {
    #[default]
    Euler,
    Picard,
}

/// Configuration of a viscous run.
#[derive(Debug, Clone)]
pub struct ViscousRunConfig {
    pub coeffs: CoefficientSet,
    pub phi0: Field,
    /// Time horizon `T`.
    pub horizon: f64,
    /// Step count `N` (uniform grid `t_k = k T / N`).
    pub steps: usize,
    pub mode: ViscousMode,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Safety monitor: stop once `min phi < eps_min`.
    pub eps_min: f64,
    /// Safety monitor: stop once `max phi > r_max`.
    pub r_max: f64,
    /// Test hook: replaces the elliptic solve by a constant pressure.
    pub frozen_u: Option<f64>,
    pub elliptic_tol: f64,
    /// Faces with `|jump| > threshold` are counted in the report.
    pub jump_threshold: Option<f64>,
}

impl ViscousRunConfig {
    pub fn new(coeffs: CoefficientSet, phi0: Field, horizon: f64, steps: usize) -> ViscousRunConfig {
        ViscousRunConfig {
            eps_min: coeffs.eps,
            r_max: coeffs.r,
            coeffs,
            phi0,
            horizon,
            steps,
            mode: ViscousMode::Euler,
            picard_tol: 1e-8,
            picard_max_iter: 40,
            frozen_u: None,
            elliptic_tol: 1e-12,
            jump_threshold: None,
        }
    }

    pub fn validate(&self) -> Result<(), ViscousError> {
        self.coeffs
            .validate()
            .map_err(|e| ViscousError::InvalidConfig(format!("{e}")))?;
        if !self.coeffs.variant.is_viscous() {
            return Err(ViscousError::InvalidConfig(format!(
                "viscous run requires a viscous variant, got {}",
                self.coeffs.variant.name()
            )));
        }
        if !(self.horizon > 0.0) || self.steps == 0 {
            return Err(ViscousError::InvalidConfig(format!(
                "need horizon > 0 and steps >= 1, got T = {}, N = {}",
                self.horizon, self.steps
            )));
        }
        let (lo, hi) = (self.phi0.min(), self.phi0.max());
        if !(lo > self.coeffs.eps) || !(hi < self.coeffs.r) {
            return Err(ViscousError::InvalidConfig(format!(
                "initial porosity range [{lo}, {hi}] must lie strictly inside ({}, {})",
                self.coeffs.eps, self.coeffs.r
            )));
        }
        self.phi0.validate_finite()?;
        Ok(())
    }
}

/// Pointwise relaxation rate `beta(phi) kappa(u)`, with the `(1-phi)` factor
/// in the full-model variant.
pub(crate) fn relaxation_rate(
    phi: &Field,
    u: &Field,
    coeffs: &CoefficientSet,
) -> Result<Field, ModelError> {
    let mut rate = Field::constant(phi.grid(), 0.0);
    let uses_full = coeffs.variant == crate::model::Variant::ViscousFull;
    for i in 0..phi.len() {
        let p = phi.values()[i];
        let mut r = coeffs.beta(p)? * coeffs.kappa(u.values()[i]);
        if uses_full {
            r *= 1.0 - p;
        }
        rate.values_mut()[i] = r;
    }
    Ok(rate)
}

/// Pressure at a porosity state: the elliptic solve, or the frozen override.
fn pressure_at(
    phi: &Field,
    coeffs: &CoefficientSet,
    frozen_u: Option<f64>,
    tol: f64,
    warm: Option<&Field>,
) -> Result<Field, ViscousError> {
    match frozen_u {
        Some(c) => Ok(Field::constant(phi.grid(), c)),
        None => {
            let problem = EllipticProblem::from_state(coeffs, phi)?.with_tol(tol);
            Ok(problem.solve(warm)?.u)
        }
    }
}

/// One explicit Euler step: solves the pressure at `phi_k` and updates
/// `phi_{k+1} = phi_k - tau * beta(phi_k) kappa(u_k)` cellwise.
pub fn euler_step(
    phi_k: &Field,
    tau: f64,
    coeffs: &CoefficientSet,
) -> Result<(Field, Field), ViscousError> {
    let u = pressure_at(phi_k, coeffs, None, 1e-12, None)?;
    let rate = relaxation_rate(phi_k, &u, coeffs)?;
    let phi_next = phi_k.axpy(-tau, &rate)?;
    Ok((phi_next, u))
}

fn step_stats(
    t: f64,
    phi: &Field,
    u: &Field,
    rate: &Field,
    jump_threshold: Option<f64>,
) -> StepStats {
    StepStats {
        t,
        phi_inf: norms::lp_norm(phi, f64::INFINITY).expect("inf"),
        phi_min: phi.min(),
        phi_bv: norms::bv_norm(phi),
        u_inf: norms::lp_norm(u, f64::INFINITY).expect("inf"),
        u_w12: norms::w12_norm(u),
        rate_inf: norms::lp_norm(rate, f64::INFINITY).expect("inf"),
        jump_face_count: jump_threshold.map(|th| jump_faces(phi, th).len()).unwrap_or(0),
    }
}

/// Explicit Euler over the uniform grid `t_k = k T / N`.
///
/// The returned series holds the step sequence (the piecewise constant
/// interpolant data); a piecewise linear reconstruction between the stamps is
/// the continuous interpolant of the scheme. Stops early with the achieved
/// horizon when the porosity leaves `[eps_min, r_max]`.
pub fn run_euler(config: &ViscousRunConfig) -> Result<(TimeSeries, RunReport), ViscousError> {
    config.validate()?;
    let tau = config.horizon / config.steps as f64;
    let mut report = RunReport::new();
    let mut phi = config.phi0.clone();
    let mut warm: Option<Field> = None;

    let u0 = pressure_at(&phi, &config.coeffs, config.frozen_u, config.elliptic_tol, None)?;
    let mut series = TimeSeries::new(phi.clone(), u0.clone())?;
    let mut u = u0;

    for k in 0..config.steps {
        let rate = relaxation_rate(&phi, &u, &config.coeffs)?;
        report
            .steps
            .push(step_stats(k as f64 * tau, &phi, &u, &rate, config.jump_threshold));
        report.cbar_estimate = report
            .cbar_estimate
            .max(norms::lp_norm(&rate, f64::INFINITY).expect("inf"));

        let phi_next = phi.axpy(-tau, &rate)?;
        let t_next = (k + 1) as f64 * tau;
        if phi_next.min() < config.eps_min || phi_next.max() > config.r_max {
            report.bound_violation = true;
            report.termination = Termination::BoundExit { t_exit: t_next };
            report.achieved_t = k as f64 * tau;
            return Ok((series, report));
        }
        phi = phi_next;
        u = pressure_at(&phi, &config.coeffs, config.frozen_u, config.elliptic_tol, warm.as_ref())?;
        warm = Some(u.clone());
        series.push(t_next, phi.clone(), u.clone())?;
    }
    let rate = relaxation_rate(&phi, &u, &config.coeffs)?;
    report
        .steps
        .push(step_stats(config.horizon, &phi, &u, &rate, config.jump_threshold));
    report.cbar_estimate = report
        .cbar_estimate
        .max(norms::lp_norm(&rate, f64::INFINITY).expect("inf"));
    report.achieved_t = config.horizon;
    report.termination = Termination::Horizon;
    Ok((series, report))
}

/// The mild integral operator: `Lambda[phi](t_k) = phi_0 - int_0^{t_k}
/// beta(phi) kappa(E(phi)) ds` by trapezoid quadrature on the stored nodes.
///
/// The returned series pairs each `Lambda[phi](t_k)` with the pressure
/// `E(phi(t_k))` of the *input* series; at a fixed point the two are
/// consistent.
pub fn picard_lambda(
    series: &TimeSeries,
    coeffs: &CoefficientSet,
) -> Result<TimeSeries, ViscousError> {
    lambda_apply(series, coeffs, None, 1e-12)
}

fn lambda_apply(
    series: &TimeSeries,
    coeffs: &CoefficientSet,
    frozen_u: Option<f64>,
    elliptic_tol: f64,
) -> Result<TimeSeries, ViscousError> {
    let phi0 = series.phi_at(0).clone();
    let n = series.len();
    let mut warm: Option<Field> = None;
    let mut rates: Vec<Field> = Vec::with_capacity(n);
    let mut pressures: Vec<Field> = Vec::with_capacity(n);
    for k in 0..n {
        let u = pressure_at(series.phi_at(k), coeffs, frozen_u, elliptic_tol, warm.as_ref())?;
        rates.push(relaxation_rate(series.phi_at(k), &u, coeffs)?);
        warm = Some(u.clone());
        pressures.push(u);
    }
    let mut acc = Field::constant(series.grid(), 0.0);
    let mut out = TimeSeries::new(phi0.clone(), pressures[0].clone())?;
    for k in 1..n {
        let dt = series.times()[k] - series.times()[k - 1];
        let sum = rates[k - 1].axpy(1.0, &rates[k])?;
        acc = acc.axpy(0.5 * dt, &sum)?;
        out.push(series.times()[k], phi0.axpy(-1.0, &acc)?, pressures[k].clone())?;
    }
    Ok(out)
}

/// Picard iteration `phi <- Lambda[phi]` from the constant-in-time initial
/// guess.
///
/// Records the contraction factors `q_j`; two consecutive `q_j >= 1` abort
/// the iteration with a non-contraction termination (pick a smaller horizon).
pub fn picard_solve(config: &ViscousRunConfig) -> Result<(TimeSeries, RunReport), ViscousError> {
    config.validate()?;
    let grid = config.phi0.grid();
    let u_placeholder = Field::constant(grid, 0.0);
    let mut current = TimeSeries::new(config.phi0.clone(), u_placeholder.clone())?;
    for k in 1..=config.steps {
        let t = config.horizon * k as f64 / config.steps as f64;
        current.push(t, config.phi0.clone(), u_placeholder.clone())?;
    }

    let mut report = RunReport::new();
    let mut prev_increment: Option<f64> = None;
    let mut consecutive_expansions = 0usize;
    let mut converged = false;

    for _ in 0..config.picard_max_iter {
        let next = lambda_apply(&current, &config.coeffs, config.frozen_u, config.elliptic_tol)?;
        // an iterate leaving the admissible set means the horizon is too
        // large for the contraction argument; report, don't throw
        let exited = (0..next.len()).any(|k| {
            next.phi_at(k).min() < config.eps_min || next.phi_at(k).max() > config.r_max
        });
        if exited {
            report.termination = Termination::NonContraction;
            report.achieved_t = config.horizon;
            fill_report_rows(&mut report, &current, &config.coeffs, config.jump_threshold)?;
            return Ok((current, report));
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
                        fill_report_rows(&mut report, &next, &config.coeffs, config.jump_threshold)?;
                        return Ok((next, report));
                    }
                } else {
                    consecutive_expansions = 0;
                }
            }
        }
        prev_increment = Some(increment);
        current = next;
        if increment <= config.picard_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        report.termination = Termination::NonContraction;
        report.achieved_t = config.horizon;
        fill_report_rows(&mut report, &current, &config.coeffs, config.jump_threshold)?;
        return Ok((current, report));
    }

    // refresh the pressures so the pairs (phi, E(phi)) are consistent
    let refreshed = refresh_pressures(&current, config)?;
    report.termination = Termination::Horizon;
    report.achieved_t = config.horizon;
    fill_report_rows(&mut report, &refreshed, &config.coeffs, config.jump_threshold)?;
    Ok((refreshed, report))
}

fn refresh_pressures(
    series: &TimeSeries,
    config: &ViscousRunConfig,
) -> Result<TimeSeries, ViscousError> {
    let u0 = pressure_at(
        series.phi_at(0),
        &config.coeffs,
        config.frozen_u,
        config.elliptic_tol,
        None,
    )?;
    let mut out = TimeSeries::new(series.phi_at(0).clone(), u0.clone())?;
    let mut warm = Some(u0);
    for k in 1..series.len() {
        let u = pressure_at(
            series.phi_at(k),
            &config.coeffs,
            config.frozen_u,
            config.elliptic_tol,
            warm.as_ref(),
        )?;
        out.push(series.times()[k], series.phi_at(k).clone(), u.clone())?;
        warm = Some(u);
    }
    Ok(out)
}

fn fill_report_rows(
    report: &mut RunReport,
    series: &TimeSeries,
    coeffs: &CoefficientSet,
    jump_threshold: Option<f64>,
) -> Result<(), ViscousError> {
    report.steps.clear();
    for k in 0..series.len() {
        let rate = relaxation_rate(series.phi_at(k), series.u_at(k), coeffs)?;
        report.steps.push(step_stats(
            series.times()[k],
            series.phi_at(k),
            series.u_at(k),
            &rate,
            jump_threshold,
        ));
        report.cbar_estimate = report
            .cbar_estimate
            .max(norms::lp_norm(&rate, f64::INFINITY).expect("inf"));
    }
    Ok(())
}

/// Largest horizon for which the a priori rate bound keeps `phi` inside
/// `[eps, R]`, from sampled rates at `phi0` and 8 random admissible
/// perturbations, with a 1.5 safety factor on the sampled maximum.
pub fn select_safe_horizon<R: Rng + ?Sized>(
    phi0: &Field,
    coeffs: &CoefficientSet,
    rng: &mut R,
    cap: f64,
    frozen_u: Option<f64>,
) -> Result<f64, ViscousError> {
    let lo_margin = phi0.min() - coeffs.eps;
    let hi_margin = coeffs.r - phi0.max();
    if !(lo_margin > 0.0 && hi_margin > 0.0) {
        return Err(ViscousError::ZeroMargin);
    }
    let mut cbar = 0.0f64;
    let mut probe = |phi: &Field| -> Result<(), ViscousError> {
        let u = pressure_at(phi, coeffs, frozen_u, 1e-10, None)?;
        let rate = relaxation_rate(phi, &u, coeffs)?;
        cbar = cbar.max(norms::lp_norm(&rate, f64::INFINITY).expect("inf"));
        Ok(())
    };
    probe(phi0)?;
    let width = 0.5 * lo_margin.min(hi_margin);
    for _ in 0..8 {
        let mut phi = phi0.clone();
        for v in phi.values_mut() {
            *v = (*v + rng.gen_range(-width..width)).clamp(coeffs.eps, coeffs.r);
        }
        probe(&phi)?;
    }
    cbar *= 1.5;
    if cbar == 0.0 {
        return Ok(cap);
    }
    Ok((lo_margin / cbar).min(hi_margin / cbar).min(cap))
}

/// Outcome of the blow-up continuation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlowupOutcome {
    /// Bounds were left at this time.
    BlowUp { t_max: f64 },
    /// No blow-up within the time cap.
    NoBlowupWithinCap { t_reached: f64 },
}

/// Runs safe-horizon windows back to back, restarting from each final state,
/// until the porosity leaves `[eps_min, r_max]`, the margins vanish, or the
/// accumulated time exceeds `total_cap`.
pub fn continue_to_blowup<R: Rng + ?Sized>(
    config: &ViscousRunConfig,
    window_cap: f64,
    total_cap: f64,
    rng: &mut R,
) -> Result<(BlowupOutcome, TimeSeries, RunReport), ViscousError> {
    config.validate()?;
    let margin_floor = 1e-9 * total_cap;
    let mut accumulated = 0.0f64;
    let mut phi = config.phi0.clone();
    let mut global: Option<TimeSeries> = None;
    let mut report = RunReport::new();

    loop {
        if accumulated >= total_cap {
            report.termination = Termination::Horizon;
            report.achieved_t = accumulated;
            let series = global.expect("at least one window ran");
            return Ok((
                BlowupOutcome::NoBlowupWithinCap { t_reached: accumulated },
                series,
                report,
            ));
        }
        let horizon =
            match select_safe_horizon(&phi, &config.coeffs, rng, window_cap, config.frozen_u) {
                Ok(t) => t.min(total_cap - accumulated),
                Err(ViscousError::ZeroMargin) => {
                    // margins exhausted: the continuation alternative fires
                    report.termination = Termination::BoundExit { t_exit: accumulated };
                    report.bound_violation = true;
                    report.achieved_t = accumulated;
                    let series = match global {
                        Some(s) => s,
                        None => return Err(ViscousError::ZeroMargin),
                    };
                    return Ok((BlowupOutcome::BlowUp { t_max: accumulated }, series, report));
                }
                Err(e) => return Err(e),
            };
        if horizon <= margin_floor {
            report.termination = Termination::BoundExit { t_exit: accumulated };
            report.bound_violation = true;
            report.achieved_t = accumulated;
            let series = match global {
                Some(s) => s,
                None => return Err(ViscousError::ZeroMargin),
            };
            return Ok((BlowupOutcome::BlowUp { t_max: accumulated }, series, report));
        }

        let window_config = ViscousRunConfig { phi0: phi.clone(), horizon, ..config.clone() };
        let (series, window_report) = run_euler(&window_config)?;

        // splice the window into the global series (shifted stamps)
        match &mut global {
            None => {
                let mut g = TimeSeries::new(series.phi_at(0).clone(), series.u_at(0).clone())?;
                for k in 1..series.len() {
                    g.push(series.times()[k], series.phi_at(k).clone(), series.u_at(k).clone())?;
                }
                global = Some(g);
                report.steps.push(window_report.steps[0]);
            }
            Some(g) => {
                for k in 1..series.len() {
                    g.push(
                        accumulated + series.times()[k],
                        series.phi_at(k).clone(),
                        series.u_at(k).clone(),
                    )?;
                }
            }
        }
        for row in &window_report.steps[1..] {
            let mut shifted = *row;
            shifted.t += accumulated;
            report.steps.push(shifted);
        }
        report.cbar_estimate = report.cbar_estimate.max(window_report.cbar_estimate);

        match window_report.termination {
            Termination::BoundExit { t_exit } => {
                report.termination = Termination::BoundExit { t_exit: accumulated + t_exit };
                report.bound_violation = true;
                report.achieved_t = accumulated + window_report.achieved_t;
                let series = global.expect("window spliced");
                return Ok((
                    BlowupOutcome::BlowUp { t_max: accumulated + t_exit },
                    series,
                    report,
                ));
            }
            _ => {
                accumulated += window_report.achieved_t;
                phi = series.phi_at(series.len() - 1).clone();
            }
        }
    }
}
