//! Damped Newton energy minimization for the instantaneous pressure balance
//! `div(alpha(phi) (grad u + zeta(phi))) - beta(phi) kappa(u) = 0` with
//! homogeneous Dirichlet data.
//!
//! The discrete problem is the gradient of a strictly convex energy
//!
//! `J(u) = 1/2 <A u, u> + sum_c beta_c V(u_c) h^d - <g, u> h^d`
//!
//! with `A` the SPD flux stencil, `V' = kappa` and `g` the discrete
//! divergence of the face field `abar * zeta`. Since `kappa' > 0` under the
//! structural assumptions, the Newton Jacobian `A + diag(beta kappa'(u))` is
//! SPD, and Armijo backtracking on `J` gives global convergence. Inner linear
//! solves use Jacobi-preconditioned CG with a loose, residual-driven
//! tolerance so early Newton steps are not oversolved.

use crate::grid::{
    assemble_operator, divergence, face_coefficients, FaceAveraging, FaceField, Field, Grid,
    GridError, LinearMap, StencilOperator,
};
use crate::model::{CoefficientSet, KappaLaw, ModelError};
use crate::norms;
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EllipticError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("potential quadrature did not converge at u = {0}")]
    Quadrature(f64),
    #[error("Newton did not reach tol {tol} in {iters} iterations (residual {achieved})")]
    NewtonMaxIter { iters: usize, tol: f64, achieved: f64 },
    #[error("line search failed at Newton iteration {iter}; structural assumptions violated?")]
    LineSearchFailed { iter: usize },
    #[error("conjugate gradient stalled after {iters} iterations (residual {achieved})")]
    CgStalled { iters: usize, achieved: f64 },
}

/// Discrete semilinear elliptic problem, ready to solve.
#[derive(Debug, Clone)]
pub struct EllipticProblem {
    grid: Grid,
    beta: Field,
    zeta: FaceField,
    kappa: KappaLaw,
    /// `A` including any linear reaction.
    op: StencilOperator,
    /// Discrete divergence of `abar * zeta` plus any extra source.
    rhs: Vec<f64>,
    /// Mesh-weighted L2 of the face drift `abar * zeta`.
    source_l2: f64,
    /// Mesh-weighted L2 residual target.
    pub tol: f64,
    pub max_newton: usize,
    pub max_cg: usize,
    /// Flag threshold for `||u||_W12 / ||alpha zeta||_L2`.
    pub w12_ratio_ceiling: f64,
}

/// Result of one elliptic solve.
#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub u: Field,
    /// Final mesh-weighted L2 residual.
    pub residual_norm: f64,
    /// `J` at the initial iterate and after each accepted Newton step.
    pub energy_trace: Vec<f64>,
    pub newton_iters: usize,
    pub cg_iters_total: usize,
}

/// Report of the uniform-bound diagnostic.
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    pub u_inf: f64,
    pub u_w12: f64,
    /// `||alpha(phi) zeta(phi)||_L2` (face-based).
    pub source_l2: f64,
    pub ratio: f64,
    pub exceeded: bool,
}

impl EllipticProblem {
    /// Assembles a problem from explicit coefficient fields.
    ///
    /// `alpha > 0` and `beta >= 0` cellwise; `zeta` is a face field, either
    /// averaged from cell data or a manufactured override.
    pub fn new(
        alpha: &Field,
        beta: Field,
        zeta: FaceField,
        kappa: KappaLaw,
        averaging: FaceAveraging,
    ) -> Result<EllipticProblem, EllipticError> {
        Self::build(alpha, beta, zeta, kappa, averaging, None, None)
    }

    /// Evaluates the coefficient fields of `coeffs` at `state` and assembles.
    pub fn from_state(coeffs: &CoefficientSet, state: &Field) -> Result<EllipticProblem, EllipticError> {
        let grid = state.grid();
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
        let zeta = crate::grid::vector_to_faces(&zx, if grid.dim() == 2 { Some(&zy) } else { None })?;
        Self::build(&alpha, beta, zeta, coeffs.kappa_law(), FaceAveraging::Harmonic, None, None)
    }

    /// Adds `reaction * u - source` to the residual; used by the backward
    /// Euler steps of the parabolic solver.
    pub(crate) fn with_reaction_and_source(
        alpha: &Field,
        beta: Field,
        zeta: FaceField,
        kappa: KappaLaw,
        reaction: Field,
        source: Field,
    ) -> Result<EllipticProblem, EllipticError> {
        Self::build(
            alpha,
            beta,
            zeta,
            kappa,
            FaceAveraging::Harmonic,
            Some(reaction),
            Some(source),
        )
    }

    fn build(
        alpha: &Field,
        beta: Field,
        zeta: FaceField,
        kappa: KappaLaw,
        averaging: FaceAveraging,
        reaction: Option<Field>,
        source: Option<Field>,
    ) -> Result<EllipticProblem, EllipticError> {
        let grid = alpha.grid();
        if beta.grid() != grid || zeta.grid() != grid {
            return Err(GridError::GridMismatch.into());
        }
        for (i, &b) in beta.values().iter().enumerate() {
            if b < 0.0 {
                return Err(GridError::NegativeReaction { idx: i, value: b }.into());
            }
        }
        let op = match (&reaction, averaging) {
            (Some(r), FaceAveraging::Harmonic) => assemble_operator(alpha, r)?,
            (Some(r), _) => {
                let faces = face_coefficients(alpha, averaging)?;
                StencilOperator::from_faces(faces, r.values().to_vec())
            }
            (None, _) => {
                let faces = face_coefficients(alpha, averaging)?;
                StencilOperator::from_faces(faces, vec![0.0; grid.num_cells()])
            }
        };

        // g = div(abar * zeta) (+ extra source), and its face L2 for reports
        let abar = op.face_coefficients();
        let mut drift = FaceField::zeros(grid);
        let mut source_sq = 0.0;
        for axis in 0..grid.dim() {
            let a = abar.axis(axis);
            let z = zeta.axis(axis);
            let d = drift.axis_mut(axis);
            let weight = grid.cell_measure();
            let n = d.len();
            let walls_per_line = 2;
            let lines = if axis == 0 { grid.cells()[1] } else { grid.cells()[0] };
            let _ = walls_per_line;
            let _ = lines;
            for i in 0..n {
                d[i] = a[i] * z[i];
                source_sq += weight * d[i] * d[i];
            }
        }
        let mut rhs = divergence(&drift).values().to_vec();
        if let Some(s) = &source {
            for (r, v) in rhs.iter_mut().zip(s.values().iter()) {
                *r += v;
            }
        }

        Ok(EllipticProblem {
            grid,
            beta,
            zeta,
            kappa,
            op,
            rhs,
            source_l2: crate::math::sqrt(source_sq),
            tol: 1e-10,
            max_newton: 50,
            max_cg: 50_000,
            w12_ratio_ceiling: 1e3,
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn zeta(&self) -> &FaceField {
        &self.zeta
    }

    /// Residual `R(u) = A u + beta kappa(u) - g` per cell.
    pub fn residual_into(&self, u: &[f64], out: &mut [f64]) {
        self.op.apply(u, out);
        for i in 0..out.len() {
            out[i] += self.beta.values()[i] * self.kappa.kappa(u[i]) - self.rhs[i];
        }
    }

    /// Floating point resolution of the residual at `u`: the weighted norm of
    /// the per-cell magnitude sums times the unit roundoff. Residuals below a
    /// small multiple of this are numerically zero.
    fn residual_floor(&self, u: &[f64], scratch: &mut [f64]) -> f64 {
        self.op.apply_magnitude(u, scratch);
        for i in 0..scratch.len() {
            scratch[i] +=
                (self.beta.values()[i] * self.kappa.kappa(u[i])).abs() + self.rhs[i].abs();
        }
        self.weighted_norm(scratch) * f64::EPSILON
    }

    fn weighted_norm(&self, r: &[f64]) -> f64 {
        let s: f64 = r.iter().map(|v| v * v).sum();
        crate::math::sqrt(s * self.grid.cell_measure())
    }

    /// The convex energy whose gradient (scaled by `h^d`) is the residual.
    pub fn energy(&self, u: &Field) -> Result<f64, EllipticError> {
        Ok(self.energy_with_scale(u)?.0)
    }

    /// Energy plus the sum of term magnitudes, which bounds the floating
    /// point resolution of energy differences.
    fn energy_with_scale(&self, u: &Field) -> Result<(f64, f64), EllipticError> {
        if u.grid() != self.grid {
            return Err(GridError::GridMismatch.into());
        }
        let measure = self.grid.cell_measure();
        let n = self.grid.num_cells();
        let uv = u.values();
        let mut au = vec![0.0; n];
        self.op.apply(uv, &mut au);
        let mut quad = 0.0;
        let mut pot = 0.0;
        let mut lin = 0.0;
        let mut mag = 0.0;
        for i in 0..n {
            let q = 0.5 * uv[i] * au[i];
            quad += q;
            let v = self
                .kappa
                .potential(uv[i])
                .ok_or(EllipticError::Quadrature(uv[i]))?;
            let p = self.beta.values()[i] * v;
            pot += p;
            let l = self.rhs[i] * uv[i];
            lin += l;
            mag += q.abs() + p.abs() + l.abs();
        }
        Ok(((quad + pot - lin) * measure, mag * measure))
    }

    /// Damped Newton on the energy; `warm_start` defaults to zero.
    pub fn solve(&self, warm_start: Option<&Field>) -> Result<EllipticSolution, EllipticError> {
        let n = self.grid.num_cells();
        let measure = self.grid.cell_measure();
        let mut u = match warm_start {
            Some(w) => {
                if w.grid() != self.grid {
                    return Err(GridError::GridMismatch.into());
                }
                w.clone()
            }
            None => Field::constant(self.grid, 0.0),
        };
        let mut residual = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        self.residual_into(u.values(), &mut residual);
        let mut res_norm = self.weighted_norm(&residual);
        let mut floor = self.residual_floor(u.values(), &mut scratch);
        let (mut energy, mut energy_scale) = self.energy_with_scale(&u)?;
        let mut trace = vec![energy];
        let mut prev_res = f64::INFINITY;
        let mut cg_total = 0usize;
        let mut iters = 0usize;

        while res_norm > self.tol.max(8.0 * floor) {
            if iters >= self.max_newton {
                return Err(EllipticError::NewtonMaxIter {
                    iters,
                    tol: self.tol,
                    achieved: res_norm,
                });
            }
            // Jacobian A + diag(beta kappa'(u)): SPD since kappa' > 0
            let extra: Vec<f64> = (0..n)
                .map(|i| self.beta.values()[i] * self.kappa.kappa_prime(u.values()[i]))
                .collect();
            let jac = DiagAugmented { base: &self.op, extra: &extra };
            // Eisenstat-Walker-style forcing, floored at 1e-2 * tol
            let eta = if prev_res.is_finite() {
                (0.5 * res_norm / prev_res).clamp(1e-4, 1e-2)
            } else {
                1e-2
            };
            let inner_target = (eta * res_norm).max(1e-2 * self.tol);
            let neg_r: Vec<f64> = residual.iter().map(|v| -v).collect();
            let mut delta = vec![0.0; n];
            let cg_iters = pcg(&jac, &neg_r, &mut delta, inner_target, measure, self.max_cg)?;
            cg_total += cg_iters;

            let dir_deriv: f64 =
                residual.iter().zip(delta.iter()).map(|(r, d)| r * d).sum::<f64>() * measure;
            if !(dir_deriv < 0.0) {
                return Err(EllipticError::LineSearchFailed { iter: iters });
            }

            // Armijo on the energy while the predicted decrease is resolvable
            // in floating point; below that, fall back to residual reduction
            // (the Newton direction also descends |R|^2 for SPD Jacobians).
            let resolvable = -dir_deriv > 1e-11 * (energy_scale + 1e-300);
            let mut accepted = None;
            if resolvable {
                let mut step = 1.0;
                for _ in 0..40 {
                    let trial = scaled_step(&u, &delta, step);
                    let (trial_energy, trial_scale) = self.energy_with_scale(&trial)?;
                    if trial_energy <= energy + 1e-4 * step * dir_deriv {
                        accepted = Some((trial, trial_energy, trial_scale, true));
                        break;
                    }
                    if -step * dir_deriv <= 1e-11 * (trial_scale + 1e-300) {
                        break;
                    }
                    step *= 0.5;
                }
            }
            if accepted.is_none() {
                let mut step = 1.0;
                let mut scratch = vec![0.0; n];
                for _ in 0..40 {
                    let trial = scaled_step(&u, &delta, step);
                    self.residual_into(trial.values(), &mut scratch);
                    if self.weighted_norm(&scratch) <= 0.99 * res_norm {
                        accepted = Some((trial, energy, energy_scale, false));
                        break;
                    }
                    step *= 0.5;
                }
            }
            let (new_u, new_energy, new_scale, log_energy) = match accepted {
                Some(step) => step,
                // no direction descends: if the residual sits at the floating
                // point floor of its own evaluation, that is convergence
                None if res_norm <= 64.0 * floor => break,
                None => return Err(EllipticError::LineSearchFailed { iter: iters }),
            };
            u = new_u;
            energy = new_energy;
            energy_scale = new_scale;
            if log_energy {
                trace.push(energy);
            }
            self.residual_into(u.values(), &mut residual);
            prev_res = res_norm;
            res_norm = self.weighted_norm(&residual);
            floor = self.residual_floor(u.values(), &mut scratch);
            iters += 1;
        }

        debug_assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        Ok(EllipticSolution {
            u,
            residual_norm: res_norm,
            energy_trace: trace,
            newton_iters: iters,
            cg_iters_total: cg_total,
        })
    }

    /// Reports `||u||_inf`, `||u||_W12` and their ratio to the drift L2.
    pub fn uniform_bound_check(&self, solution: &EllipticSolution) -> BoundCheck {
        let u_inf = norms::lp_norm(&solution.u, f64::INFINITY).expect("inf is valid");
        let u_w12 = norms::w12_norm(&solution.u);
        let ratio = if self.source_l2 > 0.0 {
            u_w12 / self.source_l2
        } else if u_w12 == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        BoundCheck {
            u_inf,
            u_w12,
            source_l2: self.source_l2,
            ratio,
            exceeded: ratio > self.w12_ratio_ceiling,
        }
    }
}

fn scaled_step(u: &Field, delta: &[f64], step: f64) -> Field {
    let mut trial = u.clone();
    for (tv, dv) in trial.values_mut().iter_mut().zip(delta.iter()) {
        *tv += step * dv;
    }
    trial
}

struct DiagAugmented<'a> {
    base: &'a StencilOperator,
    extra: &'a [f64],
}

impl LinearMap for DiagAugmented<'_> {
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        self.base.apply(u, out);
        for i in 0..out.len() {
            out[i] += self.extra[i] * u[i];
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = self.base.diagonal();
        for (dv, ev) in d.iter_mut().zip(self.extra.iter()) {
            *dv += ev;
        }
        d
    }

    fn size(&self) -> usize {
        self.base.size()
    }
}

/// Jacobi-preconditioned conjugate gradients; `x` starts at zero.
///
/// Stops when the mesh-weighted residual drops below `target`. Reductions are
/// plain sequential sums, so results are bit-reproducible.
fn pcg(
    map: &impl LinearMap,
    b: &[f64],
    x: &mut [f64],
    target: f64,
    measure: f64,
    max_iter: usize,
) -> Result<usize, EllipticError> {
    let n = map.size();
    let diag = map.diagonal();
    let wfac = crate::math::sqrt(measure);
    let mut r = b.to_vec();
    let norm = |v: &[f64]| -> f64 {
        crate::math::sqrt(v.iter().map(|y| y * y).sum::<f64>()) * wfac
    };
    if norm(&r) <= target {
        return Ok(0);
    }
    let mut z: Vec<f64> = r.iter().zip(diag.iter()).map(|(rv, dv)| rv / dv).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for iter in 1..=max_iter {
        map.apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(ap.iter()).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(EllipticError::CgStalled { iters: iter, achieved: norm(&r) });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= target {
            return Ok(iter);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(EllipticError::CgStalled { iters: max_iter, achieved: norm(&r) })
}
