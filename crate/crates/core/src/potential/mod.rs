//! Potentials `f` of target densities `exp(-f)`: value and subgradient
//! oracles, their smoothness profile, and the quadratically regularized
//! potential `g = f + (mu/2)|x - x0|^2`.

mod zoo;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist_sq, dot, norm, sub};

pub use zoo::{
    make_dead_zone, make_gaussian, make_hinge_sum, make_l1, make_power_norm, make_quad_plus_l1,
    make_zero, Gaussian, HingeSum, L1Norm, PowerNorm, QuadPlusL1, TargetSpec, Zero,
};

/// Hölder/Lipschitz constants bounding subgradient variation:
/// `|f'(u) - f'(v)| <= l_alpha |u - v|^alpha + l_one |u - v|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessProfile {
    pub alpha: f64,
    pub l_alpha: f64,
    pub l_one: f64,
    /// Strong-convexity modulus of `f` itself (0 when not strongly convex).
    pub lambda_strong: f64,
}

impl SmoothnessProfile {
    pub fn new(alpha: f64, l_alpha: f64, l_one: f64, lambda_strong: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        for (name, v) in [("l_alpha", l_alpha), ("l_one", l_one), ("lambda_strong", lambda_strong)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self {
            alpha,
            l_alpha,
            l_one,
            lambda_strong,
        })
    }

    pub fn semi_smooth(alpha: f64, l_alpha: f64) -> Result<Self> {
        Self::new(alpha, l_alpha, 0.0, 0.0)
    }

    /// At least one coefficient is positive, so step-size rules are defined.
    pub fn is_usable(&self) -> bool {
        self.l_alpha > 0.0 || self.l_one > 0.0
    }

    pub fn is_composite(&self) -> bool {
        self.l_alpha > 0.0 && self.l_one > 0.0
    }

    /// Right-hand side of the subgradient-variation inequality at distance `r`.
    pub fn variation_bound(&self, r: f64) -> f64 {
        self.l_alpha * r.powf(self.alpha) + self.l_one * r
    }

    /// Upper bound on the linearization error `f(u) - f(v) - <f'(v), u - v>` at `|u - v| = r`.
    pub fn linearization_bound(&self, r: f64) -> f64 {
        self.l_alpha / (self.alpha + 1.0) * r.powf(self.alpha + 1.0) + 0.5 * self.l_one * r * r
    }
}

/// A known global minimizer of `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimizer {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Convex potential with a first-order oracle.
///
/// Oracles take points of length [`Potential::dim`]; callers are expected to
/// check dimensions at their public boundary (see [`RegularizedTarget`]).
/// Implementations must be pure: no interior caching, no call counters.
pub trait Potential: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Some element of the subdifferential. At kinks this is the element
    /// closest to zero-inclusion (0 for `|.|`), so bundle models stay
    /// deterministic.
    fn subgradient(&self, x: &[f64]) -> Vec<f64>;

    fn profile(&self) -> SmoothnessProfile;

    /// `argmin_z f(z) + |z - y|^2 / (2 eta)` when a closed form exists.
    fn prox(&self, _eta: f64, _y: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn has_prox(&self) -> bool {
        false
    }

    fn minimizer(&self) -> Option<Minimizer> {
        None
    }

    /// `E |x - x_min|^4` under `exp(-f)` when known analytically.
    fn fourth_moment(&self) -> Option<f64> {
        None
    }

    /// Exact draw from `exp(-f)` when the density is directly samplable.
    fn sample_exact(&self, _rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        None
    }

    /// Coordinates along `axis` where `f` has an axis-aligned kink.
    /// Quadrature splits its panels there.
    fn kinks(&self, _axis: usize) -> Vec<f64> {
        Vec::new()
    }
}

/// `g = f + (mu/2) |x - center|^2`.
#[derive(Debug, Clone)]
pub struct RegularizedTarget {
    pub base: Arc<dyn Potential>,
    pub mu: f64,
    pub center: Vec<f64>,
}

impl RegularizedTarget {
    pub fn new(base: Arc<dyn Potential>, mu: f64, center: Vec<f64>) -> Result<Self> {
        check_dim(base.dim(), center.len())?;
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be finite and >= 0, got {mu}")));
        }
        Ok(Self { base, mu, center })
    }

    /// `g = f` (no regularization).
    pub fn plain(base: Arc<dyn Potential>) -> Self {
        let center = vec![0.0; base.dim()];
        Self {
            base,
            mu: 0.0,
            center,
        }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn eval_g(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.value(x))
    }

    pub fn subgrad_g(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.subgradient(x))
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        let reg = if self.mu > 0.0 {
            0.5 * self.mu * dist_sq(x, &self.center)
        } else {
            0.0
        };
        self.base.value(x) + reg
    }

    pub(crate) fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.base.subgradient(x);
        if self.mu > 0.0 {
            for ((si, xi), ci) in s.iter_mut().zip(x).zip(&self.center) {
                *si += self.mu * (xi - ci);
            }
        }
        s
    }

    /// `prox_{eta g}(y)` from the prox of `f` via the shift identity
    /// `prox_{eta g}(y) = prox_{eta_mu f}(eta_mu (mu x0 + y / eta))`.
    pub fn prox(&self, eta: f64, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), y.len())?;
        if !self.base.has_prox() {
            return Err(Error::MissingProx(self.base.name().to_string()));
        }
        let (eta_eff, shifted) = if self.mu > 0.0 {
            let eta_mu = eta / (1.0 + eta * self.mu);
            let c: Vec<f64> = y
                .iter()
                .zip(&self.center)
                .map(|(yi, ci)| eta_mu * (self.mu * ci + yi / eta))
                .collect();
            (eta_mu, c)
        } else {
            (eta, y.to_vec())
        };
        self.base
            .prox(eta_eff, &shifted)
            .ok_or_else(|| Error::MissingProx(self.base.name().to_string()))
    }
}

/// Outcome of [`validate_profile`].
#[derive(Debug, Clone, Serialize)]
pub struct ProfileReport {
    pub n_pairs: usize,
    /// `max(|f'(u) - f'(v)| - bound(|u - v|))` over sampled pairs.
    pub max_variation_violation: f64,
    /// `max(f(u) + <f'(u), v - u> - f(v))` over sampled ordered pairs.
    pub max_convexity_violation: f64,
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
    pub passed: bool,
}

/// Absolute tolerance used by [`validate_profile`].
pub const PROFILE_TOL: f64 = 1e-8;

/// Uniform draw from the Euclidean ball of the given radius.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    let mut z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm(&z).max(f64::MIN_POSITIVE);
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    z.iter_mut().for_each(|v| *v *= r / n);
    z
}

/// Empirically checks the declared profile and convexity on `n_pairs`
/// random pairs drawn uniformly from the ball of `radius`.
pub fn validate_profile<R: Rng + ?Sized>(
    p: &dyn Potential,
    profile: &SmoothnessProfile,
    n_pairs: usize,
    radius: f64,
    rng: &mut R,
) -> Result<ProfileReport> {
    if n_pairs == 0 {
        return Err(Error::invalid("n_pairs must be >= 1"));
    }
    let d = p.dim();
    let mut worst_var = f64::NEG_INFINITY;
    let mut worst_cvx = f64::NEG_INFINITY;
    let mut worst_pair = None;
    for _ in 0..n_pairs {
        let u = sample_ball(rng, d, radius);
        let v = sample_ball(rng, d, radius);
        let gu = p.subgradient(&u);
        let gv = p.subgradient(&v);
        let r = dist_sq(&u, &v).sqrt();
        let var = norm(&sub(&gu, &gv)) - profile.variation_bound(r);
        let (fu, fv) = (p.value(&u), p.value(&v));
        let cvx_uv = fu + dot(&gu, &sub(&v, &u)) - fv;
        let cvx_vu = fv + dot(&gv, &sub(&u, &v)) - fu;
        if var > worst_var {
            worst_var = var;
            worst_pair = Some((u.clone(), v.clone()));
        }
        worst_cvx = worst_cvx.max(cvx_uv).max(cvx_vu);
    }
    Ok(ProfileReport {
        n_pairs,
        max_variation_violation: worst_var.max(0.0),
        max_convexity_violation: worst_cvx.max(0.0),
        passed: worst_var <= PROFILE_TOL && worst_cvx <= PROFILE_TOL,
        worst_pair,
    })
}

/// Maximum violation of the prox stationarity inequality
/// `f(w) >= f(z) + <(y - z)/eta, w - z>` over `n` random `w` in a ball around `z`.
pub fn prox_stationarity_violation<R: Rng + ?Sized>(
    p: &dyn Potential,
    eta: f64,
    y: &[f64],
    n: usize,
    radius: f64,
    rng: &mut R,
) -> Option<f64> {
    let z = p.prox(eta, y)?;
    let fz = p.value(&z);
    let sg: Vec<f64> = y.iter().zip(&z).map(|(yi, zi)| (yi - zi) / eta).collect();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n {
        let off = sample_ball(rng, p.dim(), radius);
        let w: Vec<f64> = z.iter().zip(&off).map(|(a, b)| a + b).collect();
        let viol = fz + dot(&sg, &off) - p.value(&w);
        worst = worst.max(viol);
    }
    Some(worst)
}
