//! Coefficient laws of the porosity–pressure models.
//!
//! The permeability `alpha` and bulk-viscosity coefficient `beta` follow
//! Carman–Kozeny-type power laws `a0*x^n`, `b0*x^m`. Decompaction weakening is
//! modeled by the smoothed-step viscosity factor
//! `sigma(v) = c0*(1 - c1*(1 + tanh(-v/c2)))`, and the relaxation term of all
//! models is driven by the rescaled pressure `kappa(v) = v/sigma(v)`.
//!
//! Four variants of one structural family are supported; they differ only in
//! the state variable and in how `alpha`, `beta` and the drift `zeta` are
//! evaluated from it.

use crate::math;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid coefficient set: {0}")]
    InvalidCoefficients(String),
    #[error("state value {value} outside the domain of {law}")]
    DomainError { law: &'static str, value: f64 },
    #[error("porosity {0} outside (0, 1)")]
    PorosityRange(f64),
    #[error("log-transformed state {0} must be positive")]
    LambdaRange(f64),
}

/// Which member of the model family a run integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Small-porosity viscoelastic model: state `phi`, `zeta = f`.
    SmallPorosity,
    /// Log-transformed full model: state `lambda = -log(1-phi)`.
    LogTransformed,
    /// Viscous limit of the small-porosity model.
    ViscousSmall,
    /// Viscous limit of the full model; carries `(1-phi)` factors.
    ViscousFull,
}

impl Variant {
    pub fn is_viscous(self) -> bool {
        matches!(self, Variant::ViscousSmall | Variant::ViscousFull)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::SmallPorosity => "small-porosity",
            Variant::LogTransformed => "log-transformed",
            Variant::ViscousSmall => "viscous-small",
            Variant::ViscousFull => "viscous-full",
        }
    }
}

/// All physical and structural parameters of a run.
///
/// `eps` and `r` bound the admissible range of the state variable (`phi`, or
/// `lambda` for [`Variant::LogTransformed`]); the well-posedness theory only
/// applies while the state stays strictly inside `[eps, r]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet {
    /// Permeability prefactor (> 0).
    pub a0: f64,
    /// Permeability exponent (>= 1).
    pub n: f64,
    /// Bulk-viscosity prefactor (> 0).
    pub b0: f64,
    /// Viscosity exponent (>= 1).
    pub m: f64,
    /// Base effective viscosity (> 0).
    pub c0: f64,
    /// Weakening amplitude, in [0, 1/2).
    pub c1: f64,
    /// Weakening pressure scale (> 0).
    pub c2: f64,
    /// Inverse compressibility 1/K (>= 0; 0 selects the viscous limit).
    pub q: f64,
    /// Constant body force; only the first `d` components are used.
    pub f: [f64; 2],
    pub variant: Variant,
    /// Admissible lower bound of the state variable (> 0).
    pub eps: f64,
    /// Admissible upper bound of the state variable (> eps).
    pub r: f64,
}

impl Default for CoefficientSet {
    /// The analysis never prescribes numbers; these defaults are plain
    /// engineering choices (unit prefactors, no weakening, unit body force).
    fn default() -> Self {
        CoefficientSet {
            a0: 1.0,
            n: 3.0,
            b0: 1.0,
            m: 1.0,
            c0: 1.0,
            c1: 0.0,
            c2: 1.0,
            q: 1.0,
            f: [1.0, 0.0],
            variant: Variant::SmallPorosity,
            eps: 0.01,
            r: 0.99,
        }
    }
}

impl CoefficientSet {
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut problems: Vec<String> = Vec::new();
        if !(self.a0 > 0.0) {
            problems.push(format!("a0 = {} must be > 0", self.a0));
        }
        // b0 = 0 is the meaningful degenerate case beta == 0
        if !(self.b0 >= 0.0) {
            problems.push(format!("b0 = {} must be >= 0", self.b0));
        }
        if !(self.c0 > 0.0) {
            problems.push(format!("c0 = {} must be > 0", self.c0));
        }
        if !(self.c2 > 0.0) {
            problems.push(format!("c2 = {} must be > 0", self.c2));
        }
        if !(self.n >= 1.0) {
            problems.push(format!("n = {} must be >= 1", self.n));
        }
        if !(self.m >= 1.0) {
            problems.push(format!("m = {} must be >= 1", self.m));
        }
        if !(0.0..0.5).contains(&self.c1) {
            problems.push(format!(
                "c1 = {} outside [0, 0.5): sigma lower bound c0*(1-2*c1) would vanish",
                self.c1
            ));
        }
        if !(self.q >= 0.0) {
            problems.push(format!("Q = {} must be >= 0", self.q));
        }
        if !(self.eps > 0.0 && self.r > self.eps) {
            problems.push(format!(
                "admissible bounds require 0 < eps < R, got eps = {}, R = {}",
                self.eps, self.r
            ));
        }
        if self.variant.is_viscous() && self.q != 0.0 {
            // Q is simply ignored in the viscous limit; not an error.
        }
        if !self.variant.is_viscous() && !(self.q > 0.0) {
            problems.push(format!(
                "viscoelastic variant {} requires Q > 0, got {}",
                self.variant.name(),
                self.q
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ModelError::InvalidCoefficients(problems.join("; ")))
        }
    }

    /// Decompaction-weakening viscosity factor; total on all of `R`.
    ///
    /// Values lie in `[c0*(1-2*c1), c0]`.
    #[inline]
    pub fn sigma(&self, v: f64) -> f64 {
        self.c0 * (1.0 - self.c1 * (1.0 + math::tanh(-v / self.c2)))
    }

    /// Exact derivative of [`Self::sigma`]; nonnegative.
    #[inline]
    pub fn sigma_prime(&self, v: f64) -> f64 {
        let t = math::tanh(-v / self.c2);
        self.c0 * self.c1 / self.c2 * (1.0 - t * t)
    }

    /// Rescaled pressure `kappa(v) = v / sigma(v)`.
    #[inline]
    pub fn kappa(&self, v: f64) -> f64 {
        v / self.sigma(v)
    }

    /// Analytic derivative `kappa'(v) = 1/sigma - v*sigma'/sigma^2`.
    ///
    /// Strictly positive for valid parameters; Newton Jacobians rely on the
    /// analytic form rather than differencing.
    #[inline]
    pub fn kappa_prime(&self, v: f64) -> f64 {
        let s = self.sigma(v);
        1.0 / s - v * self.sigma_prime(v) / (s * s)
    }

    /// The pressure law in a standalone form usable by the elliptic solver.
    pub fn kappa_law(&self) -> KappaLaw {
        if self.c1 == 0.0 {
            KappaLaw::Linear { inv_c0: 1.0 / self.c0 }
        } else {
            KappaLaw::Tanh { c0: self.c0, c1: self.c1, c2: self.c2 }
        }
    }

    /// Permeability coefficient as a function of the state variable.
    #[inline]
    pub fn alpha(&self, x: f64) -> Result<f64, ModelError> {
        let phi = self.state_to_porosity_like(x, "alpha")?;
        Ok(self.a0 * math::pow(phi, self.n))
    }

    /// Relaxation coefficient as a function of the state variable.
    #[inline]
    pub fn beta(&self, x: f64) -> Result<f64, ModelError> {
        let phi = self.state_to_porosity_like(x, "beta")?;
        Ok(self.b0 * math::pow(phi, self.m))
    }

    /// Drift vector entering the flux, `alpha(state) * (grad u + zeta)`.
    #[inline]
    pub fn zeta(&self, x: f64) -> Result<[f64; 2], ModelError> {
        if x <= 0.0 {
            return Err(ModelError::DomainError { law: "zeta", value: x });
        }
        let scale = match self.variant {
            Variant::SmallPorosity | Variant::ViscousSmall => 1.0,
            Variant::LogTransformed => math::exp(-x),
            Variant::ViscousFull => 1.0 - x,
        };
        Ok([scale * self.f[0], scale * self.f[1]])
    }

    /// Converts the state variable to the argument of the power laws.
    #[inline]
    fn state_to_porosity_like(&self, x: f64, law: &'static str) -> Result<f64, ModelError> {
        if x <= 0.0 {
            return Err(ModelError::DomainError { law, value: x });
        }
        Ok(match self.variant {
            Variant::LogTransformed => 1.0 - math::exp(-x),
            _ => x,
        })
    }

    /// Samples the structural assumptions and reports bounds and violations.
    ///
    /// `sigma`, `sigma'` and `kappa'` are sampled on the probe interval;
    /// `alpha` and `beta` on the admissible state range `[eps, r]`. The
    /// Lipschitz constant estimate `c_L` is the sampled maximum of `kappa'`.
    /// Failures are reported in the verdict, never thrown.
    pub fn validate_assumptions(&self, probe: &ProbeSpec) -> StructuralReport {
        let mut sigma_inf = f64::INFINITY;
        let mut sigma_sup = f64::NEG_INFINITY;
        let mut kp_inf = f64::INFINITY;
        let mut kp_sup = f64::NEG_INFINITY;
        let mut sigma_prime_min = f64::INFINITY;
        let n = probe.samples.max(2);
        for i in 0..n {
            let v = probe.lo + (probe.hi - probe.lo) * (i as f64) / ((n - 1) as f64);
            let s = self.sigma(v);
            let kp = self.kappa_prime(v);
            sigma_inf = sigma_inf.min(s);
            sigma_sup = sigma_sup.max(s);
            kp_inf = kp_inf.min(kp);
            kp_sup = kp_sup.max(kp);
            sigma_prime_min = sigma_prime_min.min(self.sigma_prime(v));
        }
        let mut alpha_min = f64::INFINITY;
        let mut beta_min = f64::INFINITY;
        let range_samples = 2048;
        for i in 0..range_samples {
            let x = self.eps + (self.r - self.eps) * (i as f64) / ((range_samples - 1) as f64);
            if let Ok(a) = self.alpha(x) {
                alpha_min = alpha_min.min(a);
            }
            if let Ok(b) = self.beta(x) {
                beta_min = beta_min.min(b);
            }
        }
        let beta_nonneg = beta_min >= 0.0;

        let mut reasons: Vec<String> = Vec::new();
        if let Err(e) = self.validate() {
            reasons.push(format!("{e}"));
        }
        if !(sigma_inf > 0.0) {
            reasons.push(format!("inf sigma = {sigma_inf} is not positive"));
        }
        if sigma_prime_min < -1e-14 {
            reasons.push(format!("sigma' attains {sigma_prime_min} < 0"));
        }
        if !(kp_inf > 0.0) {
            reasons.push(format!("inf kappa' = {kp_inf} is not positive"));
        }
        if !(alpha_min > 0.0) {
            reasons.push(format!("min alpha on [eps, R] = {alpha_min} is not positive"));
        }
        if !beta_nonneg {
            reasons.push(format!("beta attains {beta_min} < 0 on [eps, R]"));
        }

        StructuralReport {
            sigma_inf,
            sigma_sup,
            kappa_prime_inf: kp_inf,
            kappa_prime_sup: kp_sup,
            alpha_min_on_range: alpha_min,
            beta_nonneg,
            pass: reasons.is_empty(),
            reasons,
        }
    }
}

/// Probe interval for [`CoefficientSet::validate_assumptions`].
///
/// The analytic bounds are taken over all of `R`, but the tails of `tanh` are
/// flat, so a bounded probe suffices.
#[derive(Debug, Clone, Copy)]
pub struct ProbeSpec {
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec { lo: -50.0, hi: 50.0, samples: 100_000 }
    }
}

/// Sampled bounds of the structural coefficient assumptions.
#[derive(Debug, Clone)]
pub struct StructuralReport {
    pub sigma_inf: f64,
    pub sigma_sup: f64,
    pub kappa_prime_inf: f64,
    /// Sampled Lipschitz constant of `kappa` (`c_L`).
    pub kappa_prime_sup: f64,
    pub alpha_min_on_range: f64,
    pub beta_nonneg: bool,
    pub pass: bool,
    pub reasons: Vec<String>,
}

impl StructuralReport {
    /// `c_L`, the sampled Lipschitz constant of `kappa`.
    pub fn lipschitz_constant(&self) -> f64 {
        self.kappa_prime_sup
    }
}

/// `lambda = -log(1 - phi)` for `phi` in (0, 1).
pub fn log_transform(phi: f64) -> Result<f64, ModelError> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(ModelError::PorosityRange(phi));
    }
    Ok(-math::ln(1.0 - phi))
}

/// `phi = 1 - exp(-lambda)` for `lambda > 0`.
pub fn inverse_log_transform(lambda: f64) -> Result<f64, ModelError> {
    if !(lambda > 0.0) {
        return Err(ModelError::LambdaRange(lambda));
    }
    Ok(1.0 - math::exp(-lambda))
}

/// Pressure law handle for the elliptic/parabolic solvers.
///
/// Separating the two cases keeps the potential `V(u) = int_0^u kappa` exact
/// when the viscosity factor is constant and quadrature-based otherwise.
#[derive(Debug, Clone, Copy)]
pub enum KappaLaw {
    /// `sigma == c0`: `kappa(v) = v/c0`.
    Linear { inv_c0: f64 },
    /// Full decompaction-weakening law.
    Tanh { c0: f64, c1: f64, c2: f64 },
}

impl KappaLaw {
    #[inline]
    pub fn kappa(&self, v: f64) -> f64 {
        match *self {
            KappaLaw::Linear { inv_c0 } => v * inv_c0,
            KappaLaw::Tanh { c0, c1, c2 } => {
                v / (c0 * (1.0 - c1 * (1.0 + math::tanh(-v / c2))))
            }
        }
    }

    #[inline]
    pub fn kappa_prime(&self, v: f64) -> f64 {
        match *self {
            KappaLaw::Linear { inv_c0 } => inv_c0,
            KappaLaw::Tanh { c0, c1, c2 } => {
                let t = math::tanh(-v / c2);
                let s = c0 * (1.0 - c1 * (1.0 + t));
                let sp = c0 * c1 / c2 * (1.0 - t * t);
                1.0 / s - v * sp / (s * s)
            }
        }
    }

    /// Antiderivative `V(v) = int_0^v kappa(s) ds`.
    ///
    /// Closed form in the linear case, adaptive Gauss–Legendre to 1e-12
    /// relative otherwise. `None` signals quadrature non-convergence.
    pub fn potential(&self, v: f64) -> Option<f64> {
        match *self {
            KappaLaw::Linear { inv_c0 } => Some(0.5 * v * v * inv_c0),
            KappaLaw::Tanh { .. } => self.potential_quadrature(v),
        }
    }

    /// Quadrature path of [`Self::potential`], exposed for cross-checks.
    pub fn potential_quadrature(&self, v: f64) -> Option<f64> {
        if v == 0.0 {
            return Some(0.0);
        }
        let law = *self;
        math::adaptive_gl(&|s| law.kappa(s), 0.0, v, 1e-12)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs(c0: f64, c1: f64, c2: f64) -> CoefficientSet {
        CoefficientSet { c0, c1, c2, ..CoefficientSet::default() }
    }

    #[test]
    fn sigma_constant_when_no_weakening() {
        let c = coeffs(1.0, 0.0, 1.0);
        for v in [-7.5, -0.1, 0.0, 3.0, 42.0] {
            assert_eq!(c.sigma(v), 1.0);
        }
    }

    #[test]
    fn sigma_midpoint_and_limits() {
        let c = coeffs(1.0, 0.25, 1.0);
        assert!((c.sigma(0.0) - 0.75).abs() < 1e-15);
        assert!((c.sigma(-1e3) - 0.5).abs() < 1e-12);
        assert!((c.sigma(1e3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_with_constant_sigma() {
        let c = coeffs(2.0, 0.0, 1.0);
        assert!((c.kappa(3.0) - 1.5).abs() < 1e-15);
        assert!((c.kappa_prime(3.0) - 0.5).abs() < 1e-15);
        assert_eq!(c.kappa(0.0), 0.0);
    }

    #[test]
    fn kappa_prime_matches_central_differences() {
        // finite-difference oracle, h = 1e-5
        let c = coeffs(1.0, 0.25, 1.0);
        let h = 1e-5;
        for v in [-2.0, 0.0, 2.0] {
            let fd = (c.kappa(v + h) - c.kappa(v - h)) / (2.0 * h);
            assert!(
                (c.kappa_prime(v) - fd).abs() < 1e-8,
                "kappa' mismatch at v={v}: analytic {} vs fd {fd}",
                c.kappa_prime(v)
            );
        }
    }

    #[test]
    fn power_law_coefficients() {
        let mut c = CoefficientSet::default();
        c.a0 = 1.0;
        c.n = 3.0;
        assert!((c.alpha(0.5).unwrap() - 0.125).abs() < 1e-15);
        c.b0 = 2.0;
        c.m = 1.0;
        assert!((c.beta(0.3).unwrap() - 0.6).abs() < 1e-15);
        assert!(c.alpha(0.0).is_err());
        assert!(c.alpha(-0.1).is_err());
    }

    #[test]
    fn log_transformed_maps() {
        let mut c = CoefficientSet::default();
        c.variant = Variant::LogTransformed;
        c.a0 = 1.0;
        c.n = 3.0;
        c.f = [1.0, 0.0];
        let lambda = math::ln(2.0);
        let z = c.zeta(lambda).unwrap();
        assert!((z[0] - 0.5).abs() < 1e-15);
        assert!((c.alpha(lambda).unwrap() - 0.125).abs() < 1e-14);
        assert!(c.alpha(0.0).is_err());
    }

    #[test]
    fn viscous_full_zeta_carries_one_minus_phi() {
        let mut c = CoefficientSet::default();
        c.variant = Variant::ViscousFull;
        c.f = [2.0, 0.0];
        let z = c.zeta(0.25).unwrap();
        assert!((z[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn log_transform_round_trip() {
        assert!((log_transform(0.5).unwrap() - core::f64::consts::LN_2).abs() < 1e-15);
        let phi = 0.123;
        let back = inverse_log_transform(log_transform(phi).unwrap()).unwrap();
        assert!((back - phi).abs() < 1e-14);
        assert!(log_transform(0.0).is_err());
        assert!(log_transform(1.0).is_err());
        assert!(inverse_log_transform(0.0).is_err());
    }

    #[test]
    fn assumptions_pass_for_valid_weakening() {
        let c = coeffs(1.0, 0.25, 1.0);
        let rep = c.validate_assumptions(&ProbeSpec::default());
        assert!(rep.pass, "reasons: {:?}", rep.reasons);
        assert!((rep.sigma_inf - 0.5).abs() < 1e-9);
        assert!((rep.sigma_sup - 1.0).abs() < 1e-9);
        assert!(rep.kappa_prime_inf > 0.0);
    }

    #[test]
    fn assumptions_fail_at_c1_half() {
        let c = coeffs(1.0, 0.5, 1.0);
        let rep = c.validate_assumptions(&ProbeSpec::default());
        assert!(!rep.pass);
        assert!(rep.sigma_inf <= 0.0 || !rep.reasons.is_empty());
    }

    #[test]
    fn sampled_lipschitz_matches_dense_scan() {
        // dense sampling oracle on [-10, 10]
        let c = coeffs(1.0, 0.25, 1.0);
        let rep = c.validate_assumptions(&ProbeSpec { lo: -10.0, hi: 10.0, samples: 10_000 });
        let mut brute = f64::NEG_INFINITY;
        let n = 200_000;
        for i in 0..n {
            let v = -10.0 + 20.0 * (i as f64) / ((n - 1) as f64);
            brute = brute.max(c.kappa_prime(v));
        }
        assert!((rep.kappa_prime_sup - brute).abs() < 1e-3);
    }

    #[test]
    fn kappa_is_lipschitz_with_sampled_constant() {
        use rand::{Rng, SeedableRng};
        let c = coeffs(1.3, 0.3, 0.7);
        let rep = c.validate_assumptions(&ProbeSpec::default());
        let c_l = rep.lipschitz_constant();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let v1: f64 = rng.gen_range(-50.0..50.0);
            let v2: f64 = rng.gen_range(-50.0..50.0);
            let lhs = (c.kappa(v1) - c.kappa(v2)).abs();
            assert!(lhs <= c_l * (v1 - v2).abs() * (1.0 + 1e-6) + 1e-12);
        }
    }

    #[test]
    fn sigma_bounds_and_monotonicity_sampled() {
        let c = coeffs(2.0, 0.4, 0.5);
        let lo = 2.0 * (1.0 - 2.0 * 0.4);
        let n = 4001;
        for i in 0..n {
            let v = -20.0 + 40.0 * (i as f64) / ((n - 1) as f64);
            let s = c.sigma(v);
            assert!(s >= lo - 1e-12 && s <= 2.0 + 1e-12);
            let h = 1e-6;
            assert!(c.sigma(v + h) - c.sigma(v - h) >= -1e-12);
        }
    }

    #[test]
    fn potential_quadrature_matches_closed_form() {
        let linear = KappaLaw::Linear { inv_c0: 1.0 };
        // same law expressed through the quadrature path
        let tanh_flat = KappaLaw::Tanh { c0: 1.0, c1: 0.0, c2: 1.0 };
        for v in [-2.0, 1.0, 5.0] {
            let exact = linear.potential(v).unwrap();
            let quad = tanh_flat.potential_quadrature(v).unwrap();
            assert!((exact - quad).abs() <= 1e-11 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn validate_rejects_bad_ranges() {
        let mut c = CoefficientSet::default();
        c.c1 = 0.6;
        let err = c.validate().unwrap_err();
        assert!(format!("{err}").contains("sigma lower bound"));
        let mut c2 = CoefficientSet::default();
        c2.eps = 0.5;
        c2.r = 0.4;
        assert!(c2.validate().is_err());
    }
}
