//! Discrete functionals mirroring the analysis spaces: `L^p`, `BV`,
//! `W^{1,2}` and parabolic Hölder norms on labeled subdomains.
//!
//! Total variation is the face-jump sum scaled by `h^{d-1}` (anisotropic TV),
//! which is exact for axis-aligned step data. Hölder norms are exhaustive
//! pair maxima and therefore size-guarded; they are diagnostics, not inner
//! loops.

use crate::grid::{Field, Grid, Partition};
use crate::math;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("invalid exponent p = {0}; need p >= 1 or infinity")]
    BadExponent(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
    #[error("invalid time series: {0}")]
    BadSeries(String),
    #[error("zero denominator in Lipschitz ratio")]
    ZeroDenominator,
    #[error("subdomain scan of {points} space-time points exceeds the guard of {guard}")]
    SizeGuard { points: usize, guard: usize },
    #[error("Hölder exponent gamma = {0} outside (0, 1)")]
    BadGamma(f64),
}

/// `(sum |v_i|^p h^d)^(1/p)`; `max |v_i|` for `p = infinity`.
pub fn lp_norm(field: &Field, p: f64) -> Result<f64, NormError> {
    if p == f64::INFINITY {
        return Ok(field.values().iter().fold(0.0, |acc, v| acc.max(v.abs())));
    }
    if !(p >= 1.0) {
        return Err(NormError::BadExponent(p));
    }
    let measure = field.grid().cell_measure();
    let sum: f64 = field.values().iter().map(|v| math::pow(v.abs(), p)).sum();
    Ok(math::pow(sum * measure, 1.0 / p))
}

/// Total variation: face jumps weighted by the face area `h^{d-1}`.
pub fn tv_seminorm(field: &Field) -> f64 {
    let grid = field.grid();
    let v = field.values();
    let [nx, ny] = grid.cells();
    let mut tv = 0.0;
    let area_x = grid.face_area(0);
    for iy in 0..ny {
        for ix in 1..nx {
            tv += (v[grid.index(ix, iy)] - v[grid.index(ix - 1, iy)]).abs() * area_x;
        }
    }
    if grid.dim() == 2 {
        let area_y = grid.face_area(1);
        for iy in 1..ny {
            for ix in 0..nx {
                tv += (v[grid.index(ix, iy)] - v[grid.index(ix, iy - 1)]).abs() * area_y;
            }
        }
    }
    tv
}

/// `L^1 + TV`.
pub fn bv_norm(field: &Field) -> f64 {
    lp_norm(field, 1.0).expect("p = 1 is valid") + tv_seminorm(field)
}

/// `sqrt(L2^2 + sum over interior faces of |face gradient|^2 h^d)`.
pub fn w12_norm(field: &Field) -> f64 {
    let grid = field.grid();
    let v = field.values();
    let [nx, ny] = grid.cells();
    let measure = grid.cell_measure();
    let l2_sq: f64 = v.iter().map(|x| x * x).sum::<f64>() * measure;
    let mut grad_sq = 0.0;
    let hx = grid.spacing()[0];
    for iy in 0..ny {
        for ix in 1..nx {
            let g = (v[grid.index(ix, iy)] - v[grid.index(ix - 1, iy)]) / hx;
            grad_sq += g * g * measure;
        }
    }
    if grid.dim() == 2 {
        let hy = grid.spacing()[1];
        for iy in 1..ny {
            for ix in 0..nx {
                let g = (v[grid.index(ix, iy)] - v[grid.index(ix, iy - 1)]) / hy;
                grad_sq += g * g * measure;
            }
        }
    }
    math::sqrt(l2_sq + grad_sq)
}

/// Time-stamped sequence of `(phi, u)` snapshots on one grid.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    times: Vec<f64>,
    phi: Vec<Field>,
    u: Vec<Field>,
}

/// Selects which snapshot component a functional acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesField {
    Phi,
    U,
}

impl TimeSeries {
    /// Starts a series at `t = 0`.
    pub fn new(phi0: Field, u0: Field) -> Result<TimeSeries, NormError> {
        if phi0.grid() != u0.grid() {
            return Err(NormError::GridMismatch);
        }
        Ok(TimeSeries { times: alloc::vec![0.0], phi: alloc::vec![phi0], u: alloc::vec![u0] })
    }

    pub fn push(&mut self, t: f64, phi: Field, u: Field) -> Result<(), NormError> {
        if phi.grid() != self.grid() || u.grid() != self.grid() {
            return Err(NormError::GridMismatch);
        }
        let last = *self.times.last().expect("series never empty");
        if !(t > last) {
            return Err(NormError::BadSeries(format!(
                "time stamps must increase strictly: {t} after {last}"
            )));
        }
        self.times.push(t);
        self.phi.push(phi);
        self.u.push(u);
        Ok(())
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.phi[0].grid()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.times.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("series never empty")
    }

    #[inline]
    pub fn phi_at(&self, k: usize) -> &Field {
        &self.phi[k]
    }

    #[inline]
    pub fn u_at(&self, k: usize) -> &Field {
        &self.u[k]
    }

    pub fn field_at(&self, which: SeriesField, k: usize) -> &Field {
        match which {
            SeriesField::Phi => &self.phi[k],
            SeriesField::U => &self.u[k],
        }
    }

    /// Replaces the pressure snapshot at index `k`.
    pub fn set_u(&mut self, k: usize, u: Field) {
        self.u[k] = u;
    }

    /// Trapezoid quadrature weights over the stored stamps.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.times.len();
        let mut w = alloc::vec![0.0; n];
        if n == 1 {
            return w;
        }
        for k in 0..n {
            let lo = if k == 0 { self.times[0] } else { self.times[k - 1] };
            let hi = if k + 1 == n { self.times[n - 1] } else { self.times[k + 1] };
            w[k] = 0.5 * (hi - lo);
        }
        w
    }

    /// Index of the snapshot at time `t` (match within `1e-12 * (1 + |t|)`).
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * (1.0 + t.abs());
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// The sub-series of snapshots `0..=k`.
    pub fn prefix(&self, k: usize) -> Result<TimeSeries, NormError> {
        if k >= self.len() {
            return Err(NormError::BadSeries(format!(
                "prefix {k} out of range for {} snapshots",
                self.len()
            )));
        }
        Ok(TimeSeries {
            times: self.times[..=k].to_vec(),
            phi: self.phi[..=k].to_vec(),
            u: self.u[..=k].to_vec(),
        })
    }

    /// `max_k lp_norm(field(t_k), inf)`: the `C([0,T]; L^inf)` norm.
    pub fn c_linf(&self, which: SeriesField) -> f64 {
        (0..self.len())
            .map(|k| lp_norm(self.field_at(which, k), f64::INFINITY).expect("inf is valid"))
            .fold(0.0, f64::max)
    }

    /// `C([0,T]; L^inf)` distance between two series on identical stamps.
    pub fn c_linf_distance(&self, other: &TimeSeries, which: SeriesField) -> Result<f64, NormError> {
        self.check_same_stamps(other)?;
        let mut worst = 0.0f64;
        for k in 0..self.len() {
            let a = self.field_at(which, k);
            let b = other.field_at(which, k);
            let d = a.axpy(-1.0, b).map_err(|_| NormError::GridMismatch)?;
            worst = worst.max(lp_norm(&d, f64::INFINITY)?);
        }
        Ok(worst)
    }

    fn check_same_stamps(&self, other: &TimeSeries) -> Result<(), NormError> {
        if self.len() != other.len() {
            return Err(NormError::BadSeries(format!(
                "series lengths differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        for (a, b) in self.times.iter().zip(other.times.iter()) {
            if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                return Err(NormError::BadSeries(format!("stamps differ: {a} vs {b}")));
            }
        }
        Ok(())
    }
}

const HOLDER_GUARD: usize = 20_000;

/// One-sided gradient at `cell` along `axis` staying inside the label.
fn one_sided_gradient(
    grid: &Grid,
    values: &[f64],
    partition: &Partition,
    cell: usize,
    axis: usize,
) -> f64 {
    let (ix, iy) = grid.coords(cell);
    let [nx, ny] = grid.cells();
    let label = partition.label_of(cell);
    let h = grid.spacing()[axis];
    let (fwd, bwd) = match axis {
        0 => (
            (ix + 1 < nx).then(|| grid.index(ix + 1, iy)),
            (ix > 0).then(|| grid.index(ix - 1, iy)),
        ),
        _ => (
            (iy + 1 < ny).then(|| grid.index(ix, iy + 1)),
            (iy > 0).then(|| grid.index(ix, iy - 1)),
        ),
    };
    if let Some(f) = fwd {
        if partition.label_of(f) == label {
            return (values[f] - values[cell]) / h;
        }
    }
    if let Some(b) = bwd {
        if partition.label_of(b) == label {
            return (values[cell] - values[b]) / h;
        }
    }
    0.0
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    math::sqrt(dx * dx + dy * dy)
}

/// Exhaustive-max evaluation of the parabolic Hölder norm of one snapshot
/// component, restricted to the cells carrying `label`.
///
/// `k = 0` sums the sup term and the two quotient terms (space at exponent
/// `gamma`, time at `gamma/2`); `k = 1` adds the gradient sup, the spatial
/// quotient of the gradient and uses time exponents `(1+gamma)/2` for the
/// function and `gamma/2` for the gradient. Gradients are one-sided inside
/// the subdomain so interface jumps never pollute them.
pub fn parabolic_holder_norm(
    series: &TimeSeries,
    which: SeriesField,
    k: usize,
    gamma: f64,
    partition: &Partition,
    label: u32,
) -> Result<f64, NormError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(NormError::BadGamma(gamma));
    }
    if series.len() < 2 {
        return Err(NormError::BadSeries("need at least 2 snapshots".into()));
    }
    if partition.grid() != series.grid() {
        return Err(NormError::GridMismatch);
    }
    let cells = partition.cells_with_label(label);
    let points = cells.len() * series.len();
    if points > HOLDER_GUARD {
        return Err(NormError::SizeGuard { points, guard: HOLDER_GUARD });
    }
    if cells.is_empty() {
        return Ok(0.0);
    }
    let grid = series.grid();
    let n_t = series.len();
    let n_c = cells.len();

    // snapshot values restricted to the subdomain, and gradients for k = 1
    let mut vals = alloc::vec![0.0f64; n_t * n_c];
    let mut grads: Vec<[f64; 2]> = alloc::vec![[0.0; 2]; if k >= 1 { n_t * n_c } else { 0 }];
    for ti in 0..n_t {
        let f = series.field_at(which, ti);
        for (ci, &cell) in cells.iter().enumerate() {
            vals[ti * n_c + ci] = f.values()[cell];
            if k >= 1 {
                let gx = one_sided_gradient(&grid, f.values(), partition, cell, 0);
                let gy = if grid.dim() == 2 {
                    one_sided_gradient(&grid, f.values(), partition, cell, 1)
                } else {
                    0.0
                };
                grads[ti * n_c + ci] = [gx, gy];
            }
        }
    }

    let centers: Vec<[f64; 2]> = cells.iter().map(|&c| grid.cell_center(c)).collect();
    let times = series.times();

    let mut sup = 0.0f64;
    for v in vals.iter() {
        sup = sup.max(v.abs());
    }

    let mut space_q = 0.0f64; // Hölder quotient of u (k=0) or of grad u (k=1)
    for ti in 0..n_t {
        for a in 0..n_c {
            for b in (a + 1)..n_c {
                let dist = euclid(centers[a], centers[b]);
                if dist == 0.0 {
                    continue;
                }
                let num = if k == 0 {
                    (vals[ti * n_c + a] - vals[ti * n_c + b]).abs()
                } else {
                    euclid(grads[ti * n_c + a], grads[ti * n_c + b])
                };
                space_q = space_q.max(num / math::pow(dist, gamma));
            }
        }
    }

    let u_time_exp = if k == 0 { 0.5 * gamma } else { 0.5 * (1.0 + gamma) };
    let mut u_time_q = 0.0f64;
    let mut grad_time_q = 0.0f64;
    let mut grad_sup = 0.0f64;
    if k >= 1 {
        for g in grads.iter() {
            grad_sup = grad_sup.max(math::sqrt(g[0] * g[0] + g[1] * g[1]));
        }
    }
    for ci in 0..n_c {
        for t1 in 0..n_t {
            for t2 in (t1 + 1)..n_t {
                let dt = (times[t2] - times[t1]).abs();
                let du = (vals[t2 * n_c + ci] - vals[t1 * n_c + ci]).abs();
                u_time_q = u_time_q.max(du / math::pow(dt, u_time_exp));
                if k >= 1 {
                    let dg = euclid(grads[t2 * n_c + ci], grads[t1 * n_c + ci]);
                    grad_time_q = grad_time_q.max(dg / math::pow(dt, 0.5 * gamma));
                }
            }
        }
    }

    Ok(if k == 0 {
        sup + space_q + u_time_q
    } else {
        sup + grad_sup + space_q + u_time_q + grad_time_q
    })
}

/// Spatial Hölder norm `sup |u| + sup |u(x1)-u(x2)|/|x1-x2|^gamma` of one
/// field restricted to a label (the `t = 0` slice of the parabolic norm).
pub fn spatial_holder_norm(
    field: &Field,
    gamma: f64,
    partition: &Partition,
    label: u32,
) -> Result<f64, NormError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(NormError::BadGamma(gamma));
    }
    if partition.grid() != field.grid() {
        return Err(NormError::GridMismatch);
    }
    let cells = partition.cells_with_label(label);
    if cells.len() > HOLDER_GUARD {
        return Err(NormError::SizeGuard { points: cells.len(), guard: HOLDER_GUARD });
    }
    let grid = field.grid();
    let v = field.values();
    let mut sup = 0.0f64;
    let mut quot = 0.0f64;
    for (i, &a) in cells.iter().enumerate() {
        sup = sup.max(v[a].abs());
        let ca = grid.cell_center(a);
        for &b in cells.iter().skip(i + 1) {
            let dist = euclid(ca, grid.cell_center(b));
            if dist > 0.0 {
                quot = quot.max((v[a] - v[b]).abs() / math::pow(dist, gamma));
            }
        }
    }
    Ok(sup + quot)
}

/// Sum over all labels of [`spatial_holder_norm`].
pub fn piecewise_spatial_holder_norm(
    field: &Field,
    gamma: f64,
    partition: &Partition,
) -> Result<f64, NormError> {
    let mut total = 0.0;
    for label in 1..=partition.subdomains() {
        total += spatial_holder_norm(field, gamma, partition, label)?;
    }
    Ok(total)
}

/// Sum over all labels of [`parabolic_holder_norm`].
pub fn piecewise_parabolic_holder_norm(
    series: &TimeSeries,
    which: SeriesField,
    k: usize,
    gamma: f64,
    partition: &Partition,
) -> Result<f64, NormError> {
    let mut total = 0.0;
    for label in 1..=partition.subdomains() {
        total += parabolic_holder_norm(series, which, k, gamma, partition, label)?;
    }
    Ok(total)
}

/// Which norm a Lipschitz ratio is measured in.
#[derive(Debug, Clone, Copy)]
pub enum RatioNorm<'a> {
    Linf,
    /// Sum over subdomains of the spatial Hölder norm.
    PiecewiseHolder { gamma: f64, partition: &'a Partition },
}

/// `||u1 - u2|| / ||phi1 - phi2||` in the requested norm.
pub fn lipschitz_ratio(
    u1: &Field,
    u2: &Field,
    phi1: &Field,
    phi2: &Field,
    norm: RatioNorm<'_>,
) -> Result<f64, NormError> {
    let du = u1.axpy(-1.0, u2).map_err(|_| NormError::GridMismatch)?;
    let dphi = phi1.axpy(-1.0, phi2).map_err(|_| NormError::GridMismatch)?;
    let (num, den) = match norm {
        RatioNorm::Linf => (lp_norm(&du, f64::INFINITY)?, lp_norm(&dphi, f64::INFINITY)?),
        RatioNorm::PiecewiseHolder { gamma, partition } => (
            piecewise_spatial_holder_norm(&du, gamma, partition)?,
            piecewise_spatial_holder_norm(&dphi, gamma, partition)?,
        ),
    };
    if den == 0.0 {
        return Err(NormError::ZeroDenominator);
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn lp_basics() {
        let g = Grid::new_1d(1.0, 4).unwrap();
        let f = Field::constant(g, -2.5);
        assert_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 2.5);
        assert!(lp_norm(&f, 0.5).is_err());

        // [3,-4,0,0] with h = 0.5 -> L1 = 3.5
        let g2 = Grid::new_1d(2.0, 4).unwrap();
        let f2 = Field::from_values(g2, alloc::vec![3.0, -4.0, 0.0, 0.0]).unwrap();
        assert!((lp_norm(&f2, 1.0).unwrap() - 3.5).abs() < 1e-15);
    }

    #[test]
    fn l2_matches_independent_summation() {
        use rand::{Rng, SeedableRng};
        let g = Grid::new_2d([1.0, 1.0], [7, 5]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let mut f = Field::constant(g, 0.0);
        for v in f.values_mut() {
            *v = rng.gen_range(-3.0..3.0);
        }
        let mut acc = 0.0;
        for i in (0..f.len()).rev() {
            acc += f.values()[i] * f.values()[i] * g.cell_measure();
        }
        assert!((lp_norm(&f, 2.0).unwrap() - math::sqrt(acc)).abs() < 1e-12);
    }

    #[test]
    fn tv_of_constant_and_step() {
        let g = Grid::new_1d(3.0, 5).unwrap();
        assert_eq!(tv_seminorm(&Field::constant(g, 1.7)), 0.0);
        let step = Field::from_values(g, alloc::vec![0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((tv_seminorm(&step) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tv_of_sampled_line() {
        // v(x) = s*x on (0,1): N-1 equal increments of s/N
        let s = -2.5f64;
        for n in [8usize, 32, 101] {
            let g = Grid::new_1d(1.0, n).unwrap();
            let f = Field::from_fn(g, |x| s * x[0]);
            let expect = s.abs() * ((n - 1) as f64) / n as f64;
            assert!((tv_seminorm(&f) - expect).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn bv_norm_axioms_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let g = Grid::new_1d(1.0, 16).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let mut a = Field::constant(g, 0.0);
            let mut b = Field::constant(g, 0.0);
            for v in a.values_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            for v in b.values_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let sum = a.axpy(1.0, &b).unwrap();
            assert!(bv_norm(&sum) <= bv_norm(&a) + bv_norm(&b) + 1e-12);
            let t: f64 = rng.gen_range(-3.0..3.0);
            let scaled = a.map(|v| t * v);
            assert!((bv_norm(&scaled) - t.abs() * bv_norm(&a)).abs() < 1e-12);
        }
    }

    #[test]
    fn w12_of_affine_approaches_one() {
        let g = Grid::new_1d(1.0, 512).unwrap();
        let f = Field::from_fn(g, |x| x[0]);
        let grad_part_sq = w12_norm(&f) * w12_norm(&f) - {
            let l2 = lp_norm(&f, 2.0).unwrap();
            l2 * l2
        };
        assert!((grad_part_sq - 511.0 / 512.0).abs() < 1e-10);
        assert_eq!(w12_norm(&Field::constant(g, 0.0)), 0.0);
    }

    #[test]
    fn lp_monotone_in_p_after_normalizing() {
        use rand::{Rng, SeedableRng};
        let g = Grid::new_1d(2.0, 9).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut f = Field::constant(g, 0.0);
        for v in f.values_mut() {
            *v = rng.gen_range(-2.0..2.0);
        }
        let vol = 2.0;
        let n1 = lp_norm(&f, 1.0).unwrap() / vol;
        let n2 = lp_norm(&f, 2.0).unwrap() / math::sqrt(vol);
        let ninf = lp_norm(&f, f64::INFINITY).unwrap();
        assert!(n1 <= n2 + 1e-12 && n2 <= ninf + 1e-12);
    }

    #[test]
    fn series_validation() {
        let g = Grid::new_1d(1.0, 4).unwrap();
        let f = Field::constant(g, 0.1);
        let mut s = TimeSeries::new(f.clone(), f.clone()).unwrap();
        s.push(0.5, f.clone(), f.clone()).unwrap();
        assert!(s.push(0.5, f.clone(), f.clone()).is_err());
        assert_eq!(s.len(), 2);
        let w = s.trapezoid_weights();
        assert!((w[0] - 0.25).abs() < 1e-15 && (w[1] - 0.25).abs() < 1e-15);
        assert_eq!(s.index_at(0.5), Some(1));
        assert_eq!(s.index_at(0.25), None);
    }

    fn constant_series(g: Grid, c: f64, nt: usize, horizon: f64) -> TimeSeries {
        let f = Field::constant(g, c);
        let mut s = TimeSeries::new(f.clone(), f.clone()).unwrap();
        for k in 1..nt {
            let t = horizon * k as f64 / (nt - 1) as f64;
            s.push(t, f.clone(), f.clone()).unwrap();
        }
        s
    }

    #[test]
    fn holder_norm_of_constant_is_its_magnitude() {
        let g = Grid::new_1d(1.0, 8).unwrap();
        let p = Partition::uniform(g);
        let s = constant_series(g, -3.0, 5, 1.0);
        for k in [0usize, 1] {
            let n = parabolic_holder_norm(&s, SeriesField::Phi, k, 0.5, &p, 1).unwrap();
            assert!((n - 3.0).abs() < 1e-14, "k = {k}: {n}");
        }
    }

    #[test]
    fn holder_norm_of_linear_in_time() {
        // f(t,x) = t on [0,T]: k=0 norm = T + T^(1-gamma/2)
        let g = Grid::new_1d(1.0, 4).unwrap();
        let p = Partition::uniform(g);
        let big_t = 2.0;
        let nt = 9;
        let f0 = Field::constant(g, 0.0);
        let mut s = TimeSeries::new(f0.clone(), f0.clone()).unwrap();
        for k in 1..nt {
            let t = big_t * k as f64 / (nt - 1) as f64;
            s.push(t, Field::constant(g, t), f0.clone()).unwrap();
        }
        let gamma = 0.5;
        let n = parabolic_holder_norm(&s, SeriesField::Phi, 0, gamma, &p, 1).unwrap();
        let expect = big_t + math::pow(big_t, 1.0 - gamma / 2.0);
        assert!((n - expect).abs() < 1e-12, "{n} vs {expect}");
    }

    #[test]
    fn holder_norm_spatial_term_of_linear_profile() {
        // f(t,x) = x on (0,1): quotient -> max-separation^(1-gamma) -> 1
        let gamma = 0.5;
        let mut prev_gap = f64::INFINITY;
        for n in [16usize, 32, 64] {
            let g = Grid::new_1d(1.0, n).unwrap();
            let p = Partition::uniform(g);
            let f = Field::from_fn(g, |x| x[0]);
            let zero = Field::constant(g, 0.0);
            let mut s = TimeSeries::new(f.clone(), zero.clone()).unwrap();
            s.push(1.0, f.clone(), zero.clone()).unwrap();
            let norm = parabolic_holder_norm(&s, SeriesField::Phi, 0, gamma, &p, 1).unwrap();
            // exhaustive pair-scan oracle
            let mut brute_sup = 0.0f64;
            let mut brute_q = 0.0f64;
            for i in 0..n {
                brute_sup = brute_sup.max(f.values()[i].abs());
                for j in (i + 1)..n {
                    let xi = g.cell_center(i)[0];
                    let xj = g.cell_center(j)[0];
                    brute_q = brute_q.max(
                        (f.values()[i] - f.values()[j]).abs() / math::pow((xi - xj).abs(), gamma),
                    );
                }
            }
            assert!((norm - (brute_sup + brute_q)).abs() < 1e-12);
            let gap = (brute_q - 1.0).abs();
            assert!(gap < prev_gap + 1e-15);
            prev_gap = gap;
        }
    }

    #[test]
    fn holder_size_guard_trips() {
        let g = Grid::new_2d([1.0, 1.0], [64, 64]).unwrap();
        let p = Partition::uniform(g);
        let s = constant_series(g, 1.0, 6, 1.0);
        let e = parabolic_holder_norm(&s, SeriesField::Phi, 0, 0.5, &p, 1).unwrap_err();
        assert!(matches!(e, NormError::SizeGuard { .. }));
    }

    #[test]
    fn time_integral_estimate_holds_empirically() {
        // ||int_0^t f ds|| <= (1 + T^(gamma/2)) T^(1-gamma/2) ||f||
        use rand::{Rng, SeedableRng};
        let g = Grid::new_1d(1.0, 6).unwrap();
        let p = Partition::uniform(g);
        let gamma = 0.5;
        let big_t = 0.8;
        let nt = 7;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let c: f64 = rng.gen_range(0.5..2.0);
            let zero = Field::constant(g, 0.0);
            let snap =
                |t: f64| Field::from_fn(g, |x| a * math::sin(c * t + 2.0 * x[0]) + b * x[0] * t);
            let mut fs = TimeSeries::new(snap(0.0), zero.clone()).unwrap();
            for k in 1..nt {
                let t = big_t * k as f64 / (nt - 1) as f64;
                fs.push(t, snap(t), zero.clone()).unwrap();
            }
            // integral series by trapezoid accumulation
            let mut acc = Field::constant(g, 0.0);
            let mut gs = TimeSeries::new(acc.clone(), zero.clone()).unwrap();
            for k in 1..nt {
                let dt = fs.times()[k] - fs.times()[k - 1];
                let mid = fs.phi_at(k - 1).axpy(1.0, fs.phi_at(k)).unwrap();
                acc = acc.axpy(0.5 * dt, &mid).unwrap();
                gs.push(fs.times()[k], acc.clone(), zero.clone()).unwrap();
            }
            let nf = parabolic_holder_norm(&fs, SeriesField::Phi, 0, gamma, &p, 1).unwrap();
            let ng = parabolic_holder_norm(&gs, SeriesField::Phi, 0, gamma, &p, 1).unwrap();
            let bound =
                (1.0 + math::pow(big_t, gamma / 2.0)) * math::pow(big_t, 1.0 - gamma / 2.0) * nf;
            assert!(ng <= bound * (1.0 + 1e-12), "{ng} vs bound {bound}");
        }
    }

    #[test]
    fn vanishing_initial_data_estimate() {
        // for f with f(0,.) = 0 and grad f(0,.) = 0:
        // ||f||_{C^{0,gamma}} <= max{2, C} T^{gamma/2} ||f||_{C^{1,gamma}}
        use rand::{Rng, SeedableRng};
        let g = Grid::new_1d(1.0, 8).unwrap();
        let p = Partition::uniform(g);
        let gamma = 0.5;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        for big_t in [0.25, 0.5, 1.0] {
            let a: f64 = rng.gen_range(0.5..2.0);
            let b: f64 = rng.gen_range(0.5..3.0);
            let profile = move |x: f64| a * math::sin(b * x) + 0.3 * x;
            let zero = Field::constant(g, 0.0);
            let nt = 9;
            let mut s = TimeSeries::new(zero.clone(), zero.clone()).unwrap();
            for k in 1..nt {
                let t = big_t * k as f64 / (nt - 1) as f64;
                s.push(t, Field::from_fn(g, |x| t * profile(x[0])), zero.clone()).unwrap();
            }
            let n0 = parabolic_holder_norm(&s, SeriesField::Phi, 0, gamma, &p, 1).unwrap();
            let n1 = parabolic_holder_norm(&s, SeriesField::Phi, 1, gamma, &p, 1).unwrap();
            let bound = 2.0f64.max(1.0) * math::pow(big_t, gamma / 2.0) * n1;
            assert!(n0 <= bound, "T = {big_t}: {n0} vs bound {bound}");
        }
    }

    #[test]
    fn lipschitz_ratio_basics() {
        let g = Grid::new_1d(1.0, 5).unwrap();
        let u = Field::constant(g, 1.0);
        let phi = Field::constant(g, 0.2);
        let phi2 = Field::constant(g, 0.3);
        assert!(matches!(
            lipschitz_ratio(&u, &u, &phi, &phi, RatioNorm::Linf),
            Err(NormError::ZeroDenominator)
        ));
        let r = lipschitz_ratio(&u, &u, &phi, &phi2, RatioNorm::Linf).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn volpert_chain_rule_discrete() {
        use rand::{Rng, SeedableRng};
        let g = Grid::new_1d(1.0, 24).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let coeffs = crate::model::CoefficientSet::default();
        for _ in 0..100 {
            let mut phi = Field::constant(g, 0.0);
            for v in phi.values_mut() {
                *v = rng.gen_range(0.05..0.8);
            }
            let hi = phi.max();
            // F = alpha: Lipschitz constant = max alpha' on the attained range
            let lip_alpha = coeffs.a0 * coeffs.n * math::pow(hi, coeffs.n - 1.0);
            let alpha_phi = phi.map(|x| coeffs.alpha(x).unwrap());
            assert!(tv_seminorm(&alpha_phi) <= lip_alpha * tv_seminorm(&phi) + 1e-12);
            // F = beta
            let lip_beta = coeffs.b0 * coeffs.m * math::pow(hi, coeffs.m - 1.0);
            let beta_phi = phi.map(|x| coeffs.beta(x).unwrap());
            assert!(tv_seminorm(&beta_phi) <= lip_beta * tv_seminorm(&phi) + 1e-12);
            // F = kappa composed with a constant shift
            let lo = phi.min();
            let shift = rng.gen_range(-1.0..1.0);
            let c =
                crate::model::CoefficientSet { c1: 0.25, ..crate::model::CoefficientSet::default() };
            let rep = c.validate_assumptions(&crate::model::ProbeSpec {
                lo: lo + shift - 1.0,
                hi: hi + shift + 1.0,
                samples: 20_000,
            });
            let kappa_phi = phi.map(|x| c.kappa(x + shift));
            assert!(
                tv_seminorm(&kappa_phi)
                    <= rep.lipschitz_constant() * tv_seminorm(&phi) * (1.0 + 1e-6) + 1e-12
            );
        }
    }
}
