//! 1D spectral Galerkin reference for the parabolic pressure equation with a
//! frozen state trajectory.
//!
//! The ansatz space is spanned by sine modes, orthonormal in `L2(0, L)` and
//! orthogonal in `W^{1,2}_0`. Testing the weak form against the modes turns
//! the PDE into the dense ODE system
//!
//! `d' = g(t) - A(t) d - B(t, d) d`
//!
//! with stiffness `A^{jk} = int (alpha/Q) w_j' w_k'`, relaxation
//! `B^{jk} = int (beta/Q) / sigma(u_N) w_j w_k` and load
//! `g^k = -int (alpha/Q) zeta w_k'` (the divergence moved onto the test
//! function). Coefficients are integrated cellwise by Gauss quadrature with
//! the state piecewise constant per cell; the ODE runs under classic RK4.
//! This path is dense and 1D-only: its role is a cross-discretization
//! oracle, not production.

use super::{ViscoError, ViscoRunConfig};
use crate::grid::{Field, Grid};
use crate::math;
use crate::model::CoefficientSet;
use crate::norms::TimeSeries;
use alloc::vec;
use alloc::vec::Vec;

/// Parameters of the Galerkin reference solver.
#[derive(Debug, Clone, Copy)]
pub struct GalerkinConfig {
    /// Number of sine modes (keep modest; the system is dense).
    pub modes: usize,
    /// RK4 substeps across the whole horizon.
    pub substeps: usize,
}

impl GalerkinConfig {
    pub fn new(modes: usize, substeps: usize) -> GalerkinConfig {
        GalerkinConfig { modes, substeps }
    }
}

/// Initial data for the mode coefficients.
pub enum GalerkinInitial<'a> {
    /// `L2` projection of a grid field (cellwise quadrature).
    FromField(&'a Field),
    /// Mode coefficients given directly.
    Coefficients(Vec<f64>),
}

/// Quadrature and basis tables shared by all assemblies.
struct Workspace {
    grid: Grid,
    modes: usize,
    /// Quadrature points (cells x 8) and weights.
    points: Vec<f64>,
    weights: Vec<f64>,
    /// Basis values `w_j(x_q)`, laid out `q * modes + j`.
    basis: Vec<f64>,
    /// Basis derivatives `w_j'(x_q)`.
    dbasis: Vec<f64>,
    /// Per-cell stiffness blocks `int_cell w_j' w_k'`.
    cell_stiffness: Vec<f64>,
}

impl Workspace {
    fn new(grid: Grid, modes: usize) -> Workspace {
        let n = grid.num_cells();
        let h = grid.spacing()[0];
        let length = grid.extents()[0];
        let nq = n * 8;
        let mut points = vec![0.0; nq];
        let mut weights = vec![0.0; nq];
        for c in 0..n {
            let a = c as f64 * h;
            for g in 0..8 {
                points[c * 8 + g] = a + 0.5 * h * (1.0 + math::GL8_NODES[g]);
                weights[c * 8 + g] = 0.5 * h * math::GL8_WEIGHTS[g];
            }
        }
        let scale = math::sqrt(2.0 / length);
        let mut basis = vec![0.0; nq * modes];
        let mut dbasis = vec![0.0; nq * modes];
        for q in 0..nq {
            for j in 0..modes {
                let k = (j + 1) as f64 * core::f64::consts::PI / length;
                basis[q * modes + j] = scale * math::sin(k * points[q]);
                dbasis[q * modes + j] = scale * k * math::cos(k * points[q]);
            }
        }
        let mut cell_stiffness = vec![0.0; n * modes * modes];
        for c in 0..n {
            for j in 0..modes {
                for k in j..modes {
                    let mut acc = 0.0;
                    for g in 0..8 {
                        let q = c * 8 + g;
                        acc += weights[q] * dbasis[q * modes + j] * dbasis[q * modes + k];
                    }
                    cell_stiffness[(c * modes + j) * modes + k] = acc;
                    cell_stiffness[(c * modes + k) * modes + j] = acc;
                }
            }
        }
        Workspace { grid, modes, points, weights, basis, dbasis, cell_stiffness }
    }

    fn cell_of_point(&self, q: usize) -> usize {
        q / 8
    }
}

/// `L2` projection of a scalar function onto the first `modes` sine modes.
pub fn project_function<F: Fn(f64) -> f64>(
    f: F,
    grid: Grid,
    modes: usize,
) -> Result<Vec<f64>, ViscoError> {
    if grid.dim() != 1 {
        return Err(ViscoError::OneDimensionalOnly);
    }
    let ws = Workspace::new(grid, modes);
    let mut d = vec![0.0; modes];
    for q in 0..ws.points.len() {
        let fv = f(ws.points[q]);
        for j in 0..modes {
            d[j] += ws.weights[q] * fv * ws.basis[q * ws.modes + j];
        }
    }
    Ok(d)
}

fn project_field(field: &Field, ws: &Workspace) -> Vec<f64> {
    let mut d = vec![0.0; ws.modes];
    for q in 0..ws.points.len() {
        let fv = field.values()[ws.cell_of_point(q)];
        for j in 0..ws.modes {
            d[j] += ws.weights[q] * fv * ws.basis[q * ws.modes + j];
        }
    }
    d
}

/// Synthesizes mode coefficients back onto cell centers.
pub fn synthesize(d: &[f64], grid: Grid) -> Field {
    let length = grid.extents()[0];
    let scale = math::sqrt(2.0 / length);
    Field::from_fn(grid, |x| {
        let mut acc = 0.0;
        for (j, dj) in d.iter().enumerate() {
            let k = (j + 1) as f64 * core::f64::consts::PI / length;
            acc += dj * scale * math::sin(k * x[0]);
        }
        acc
    })
}

/// Coefficient snapshot at one time: `alpha/Q`, `beta/Q` and `alpha zeta / Q`
/// per cell, from the linear-in-time interpolation of the state series.
fn coefficients_at(
    t: f64,
    series: &TimeSeries,
    coeffs: &CoefficientSet,
    grid: Grid,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), ViscoError> {
    let times = series.times();
    let n = grid.num_cells();
    // clamped linear interpolation between the bracketing snapshots
    let (k0, k1, w) = if t <= times[0] {
        (0, 0, 0.0)
    } else if t >= times[times.len() - 1] {
        (times.len() - 1, times.len() - 1, 0.0)
    } else {
        let mut k = 1;
        while times[k] < t {
            k += 1;
        }
        let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
        (k - 1, k, w)
    };
    let inv_q = 1.0 / coeffs.q;
    let mut qalpha = vec![0.0; n];
    let mut qbeta = vec![0.0; n];
    let mut qdrift = vec![0.0; n];
    for i in 0..n {
        let s0 = series.phi_at(k0).values()[i];
        let s1 = series.phi_at(k1).values()[i];
        let s = s0 + w * (s1 - s0);
        let a = coeffs.alpha(s)?;
        qalpha[i] = a * inv_q;
        qbeta[i] = coeffs.beta(s)? * inv_q;
        qdrift[i] = a * coeffs.zeta(s)?[0] * inv_q;
    }
    Ok((qalpha, qbeta, qdrift))
}

fn assemble_rhs(
    d: &[f64],
    qalpha: &[f64],
    qbeta: &[f64],
    qdrift: &[f64],
    coeffs: &CoefficientSet,
    ws: &Workspace,
    out: &mut [f64],
) {
    let m = ws.modes;
    // stiffness action: (A d)_k = sum_c qalpha_c (S_c d)_k
    let mut ad = vec![0.0; m];
    for c in 0..ws.grid.num_cells() {
        let a = qalpha[c];
        if a == 0.0 {
            continue;
        }
        let block = &ws.cell_stiffness[c * m * m..(c + 1) * m * m];
        for j in 0..m {
            let dj = d[j];
            if dj == 0.0 {
                continue;
            }
            let row = &block[j * m..(j + 1) * m];
            for k in 0..m {
                ad[k] += a * row[k] * dj;
            }
        }
    }
    // relaxation action and load, pointwise over quadrature nodes
    let mut bd = vec![0.0; m];
    let mut g = vec![0.0; m];
    for q in 0..ws.points.len() {
        let c = ws.cell_of_point(q);
        let b = qbeta[c];
        let basis_row = &ws.basis[q * m..(q + 1) * m];
        let dbasis_row = &ws.dbasis[q * m..(q + 1) * m];
        if b != 0.0 {
            let mut u_q = 0.0;
            for j in 0..m {
                u_q += d[j] * basis_row[j];
            }
            let weight = ws.weights[q] * b / coeffs.sigma(u_q);
            let w_u = weight * u_q;
            for k in 0..m {
                bd[k] += w_u * basis_row[k];
            }
        }
        let drift = qdrift[c];
        if drift != 0.0 {
            let wd = ws.weights[q] * drift;
            for k in 0..m {
                g[k] -= wd * dbasis_row[k];
            }
        }
    }
    for k in 0..m {
        out[k] = g[k] - ad[k] - bd[k];
    }
}

/// Integrates the Galerkin ODE system along the state trajectory and returns
/// pressure snapshots at the trajectory's time stamps (states copied over).
pub fn galerkin_reference(
    state_series: &TimeSeries,
    u0: GalerkinInitial<'_>,
    gconfig: &GalerkinConfig,
    config: &ViscoRunConfig,
) -> Result<TimeSeries, ViscoError> {
    let grid = state_series.grid();
    if grid.dim() != 1 {
        return Err(ViscoError::OneDimensionalOnly);
    }
    if gconfig.modes == 0 || gconfig.substeps == 0 {
        return Err(ViscoError::InvalidConfig("need modes >= 1 and substeps >= 1".into()));
    }
    let coeffs = &config.coeffs;
    let ws = Workspace::new(grid, gconfig.modes);
    let mut d = match u0 {
        GalerkinInitial::FromField(f) => project_field(f, &ws),
        GalerkinInitial::Coefficients(c) => {
            if c.len() != gconfig.modes {
                return Err(ViscoError::InvalidConfig(alloc::format!(
                    "expected {} mode coefficients, got {}",
                    gconfig.modes,
                    c.len()
                )));
            }
            c
        }
    };

    let horizon = state_series.horizon();
    let dt_target = horizon / gconfig.substeps as f64;
    let m = gconfig.modes;
    let mut out = TimeSeries::new(state_series.phi_at(0).clone(), synthesize(&d, grid))?;

    let mut k1 = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    let mut stage = vec![0.0; m];

    for node in 1..state_series.len() {
        let t0 = state_series.times()[node - 1];
        let t1 = state_series.times()[node];
        let span = t1 - t0;
        let nsub = (math::ceil(span / dt_target) as usize).max(1);
        let dt = span / nsub as f64;
        for s in 0..nsub {
            let t = t0 + s as f64 * dt;
            let (a0, b0, g0) = coefficients_at(t, state_series, coeffs, grid)?;
            let (ah, bh, gh) = coefficients_at(t + 0.5 * dt, state_series, coeffs, grid)?;
            let (a1, b1, g1) = coefficients_at(t + dt, state_series, coeffs, grid)?;

            assemble_rhs(&d, &a0, &b0, &g0, coeffs, &ws, &mut k1);
            for i in 0..m {
                stage[i] = d[i] + 0.5 * dt * k1[i];
            }
            assemble_rhs(&stage, &ah, &bh, &gh, coeffs, &ws, &mut k2);
            for i in 0..m {
                stage[i] = d[i] + 0.5 * dt * k2[i];
            }
            assemble_rhs(&stage, &ah, &bh, &gh, coeffs, &ws, &mut k3);
            for i in 0..m {
                stage[i] = d[i] + dt * k3[i];
            }
            assemble_rhs(&stage, &a1, &b1, &g1, coeffs, &ws, &mut k4);
            for i in 0..m {
                d[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                if !d[i].is_finite() {
                    return Err(ViscoError::GalerkinUnstable(t));
                }
            }
        }
        out.push(t1, state_series.phi_at(node).clone(), synthesize(&d, grid))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;
    use crate::norms;

    fn heat_setup(n_cells: usize) -> (Grid, ViscoRunConfig, TimeSeries) {
        let grid = Grid::new_1d(1.0, n_cells).unwrap();
        let coeffs = CoefficientSet {
            variant: Variant::SmallPorosity,
            b0: 0.0,
            f: [0.0, 0.0],
            q: 1.0,
            eps: 0.5,
            r: 1.5,
            ..CoefficientSet::default()
        };
        let state0 = Field::constant(grid, 1.0);
        let u0 = Field::from_fn(grid, |x| math::sin(core::f64::consts::PI * x[0]));
        let config = ViscoRunConfig::new(coeffs, state0.clone(), u0, 0.1, 10);
        // frozen trajectory: constant state at the nodes
        let mut series = TimeSeries::new(state0.clone(), Field::constant(grid, 0.0)).unwrap();
        for k in 1..=10 {
            series
                .push(0.1 * k as f64 / 10.0, state0.clone(), Field::constant(grid, 0.0))
                .unwrap();
        }
        (grid, config, series)
    }

    #[test]
    fn heat_mode_decays_analytically() {
        // single-mode system decouples: d1(t) = exp(-pi^2 t) d1(0)
        let pi = core::f64::consts::PI;
        let (grid, config, series) = heat_setup(64);
        let d0 = project_function(|x| math::sin(pi * x), grid, 8).unwrap();
        assert!((d0[0] - math::sqrt(0.5)).abs() < 1e-12);
        for c in &d0[1..] {
            assert!(c.abs() < 1e-12);
        }
        let gconfig = GalerkinConfig::new(8, 1000);
        let out = galerkin_reference(
            &series,
            GalerkinInitial::Coefficients(d0.clone()),
            &gconfig,
            &config,
        )
        .unwrap();
        let exact = Field::from_fn(grid, |x| math::exp(-pi * pi * 0.1) * math::sin(pi * x[0]));
        let err = out.u_at(out.len() - 1).axpy(-1.0, &exact).unwrap();
        assert!(
            norms::lp_norm(&err, f64::INFINITY).unwrap() < 1e-6,
            "galerkin heat error {}",
            norms::lp_norm(&err, f64::INFINITY).unwrap()
        );
    }

    #[test]
    fn orthogonal_initial_data_projects_to_zero() {
        // u0 = sin(5 pi x) with only 4 retained modes: zero projection
        let pi = core::f64::consts::PI;
        let grid = Grid::new_1d(1.0, 64).unwrap();
        let d = project_function(|x| math::sin(5.0 * pi * x), grid, 4).unwrap();
        for c in &d {
            assert!(c.abs() < 1e-10, "leaked coefficient {c}");
        }
    }

    #[test]
    fn matches_finite_difference_on_coupled_setup() {
        // frozen-state parabolic solve vs spectral reference
        let pi = core::f64::consts::PI;
        let grid = Grid::new_1d(1.0, 64).unwrap();
        let coeffs = CoefficientSet {
            variant: Variant::SmallPorosity,
            c1: 0.25,
            a0: 1.0,
            n: 3.0,
            b0: 1.0,
            m: 1.0,
            q: 1.0,
            f: [1.0, 0.0],
            eps: 0.01,
            r: 0.9,
            ..CoefficientSet::default()
        };
        let state0 = Field::from_fn(grid, |x| {
            let s = (x[0] - 0.5) / 0.2;
            0.25 + 0.05 * math::exp(-s * s)
        });
        let u0 = Field::from_fn(grid, |x| 0.05 * math::sin(pi * x[0]));
        let mut config = ViscoRunConfig::new(coeffs, state0, u0.clone(), 0.2, 64);
        config.inner_tol = 1e-11;
        let (series, _) = super::super::run_viscoelastic(&config).unwrap();
        let gconfig = GalerkinConfig::new(24, 256);
        let reference =
            galerkin_reference(&series, GalerkinInitial::FromField(&u0), &gconfig, &config)
                .unwrap();
        // relative L2(L2) difference
        let weights = series.trapezoid_weights();
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..series.len() {
            let diff = series.u_at(k).axpy(-1.0, reference.u_at(k)).unwrap();
            let dn = norms::lp_norm(&diff, 2.0).unwrap();
            let un = norms::lp_norm(series.u_at(k), 2.0).unwrap();
            num += weights[k] * dn * dn;
            den += weights[k] * un * un;
        }
        let rel = math::sqrt(num / den);
        assert!(rel <= 5e-2, "relative L2(L2) difference {rel}");
    }
}
