//! Per-run diagnostics shared by the viscous and viscoelastic integrators.

use alloc::string::String;
use alloc::vec::Vec;

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    /// Reached the requested horizon.
    Horizon,
    /// State left the monitored bounds; carries the exit time.
    BoundExit { t_exit: f64 },
    /// Fixed-point iteration stopped contracting.
    NonContraction,
    /// Solver failure; carries a description.
    Error(String),
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::Horizon => "horizon",
            Termination::BoundExit { .. } => "bound-exit",
            Termination::NonContraction => "non-contraction",
            Termination::Error(_) => "error",
        }
    }
}

/// One row of per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub t: f64,
    pub phi_inf: f64,
    pub phi_min: f64,
    pub phi_bv: f64,
    pub u_inf: f64,
    pub u_w12: f64,
    /// Sup of the relaxation rate `|beta(phi) kappa(u)|` at this step.
    pub rate_inf: f64,
    pub jump_face_count: usize,
}

/// Diagnostics of one time-integration run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub steps: Vec<StepStats>,
    pub termination: Termination,
    /// Contraction factors `q_j` of a fixed-point solve, when applicable.
    pub contraction: Vec<f64>,
    /// Running estimate of the uniform rate bound.
    pub cbar_estimate: f64,
    pub bound_violation: bool,
    /// Achieved horizon (last valid time).
    pub achieved_t: f64,
    /// Worst mild-identity residual across accepted steps (coupled runs).
    pub mild_residual_max: f64,
}

impl RunReport {
    pub fn new() -> RunReport {
        RunReport {
            steps: Vec::new(),
            termination: Termination::Horizon,
            contraction: Vec::new(),
            cbar_estimate: 0.0,
            bound_violation: false,
            achieved_t: 0.0,
            mild_residual_max: 0.0,
        }
    }

    /// Geometric mean of the recorded contraction factors.
    pub fn mean_contraction(&self) -> Option<f64> {
        if self.contraction.is_empty() {
            return None;
        }
        let log_sum: f64 = self.contraction.iter().map(|q| crate::math::ln(*q)).sum();
        Some(crate::math::exp(log_sum / self.contraction.len() as f64))
    }
}

impl Default for RunReport {
    fn default() -> Self {
        Self::new()
    }
}
