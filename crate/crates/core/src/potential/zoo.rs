//! Test potentials with known analytic structure.

use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Minimizer, Potential, SmoothnessProfile};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, norm_sq, soft_threshold};

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn positive_dim(d: usize) -> Result<()> {
    if d == 0 {
        Err(Error::invalid("dimension must be >= 1"))
    } else {
        Ok(())
    }
}

#[inline]
fn sign_or_zero(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `f(x) = scale * |x|_1`.
#[derive(Debug, Clone)]
pub struct L1Norm {
    dim: usize,
    scale: f64,
}

pub fn make_l1(dim: usize, scale: f64) -> Result<L1Norm> {
    positive_dim(dim)?;
    positive("scale", scale)?;
    Ok(L1Norm { dim, scale })
}

impl L1Norm {
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl Potential for L1Norm {
    fn name(&self) -> &str {
        "l1"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.scale * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.scale * sign_or_zero(v)).collect()
    }

    fn profile(&self) -> SmoothnessProfile {
        // subgradients live in scale * [-1, 1]^d, whose diameter is 2 scale sqrt(d)
        SmoothnessProfile {
            alpha: 0.0,
            l_alpha: 2.0 * self.scale * (self.dim as f64).sqrt(),
            l_one: 0.0,
            lambda_strong: 0.0,
        }
    }

    fn prox(&self, eta: f64, y: &[f64]) -> Option<Vec<f64>> {
        Some(y.iter().map(|&v| soft_threshold(v, eta * self.scale)).collect())
    }

    fn has_prox(&self) -> bool {
        true
    }

    fn minimizer(&self) -> Option<Minimizer> {
        Some(Minimizer {
            x: vec![0.0; self.dim],
            value: 0.0,
        })
    }

    fn fourth_moment(&self) -> Option<f64> {
        // coordinates are iid Laplace(1/scale): E x^2 = 2/s^2, E x^4 = 24/s^4
        let d = self.dim as f64;
        let s4 = self.scale.powi(4);
        Some((24.0 * d + 4.0 * d * (d - 1.0)) / s4)
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(
            (0..self.dim)
                .map(|_| {
                    let e = -(1.0 - rng.random::<f64>()).ln() / self.scale;
                    if rng.random::<bool>() {
                        e
                    } else {
                        -e
                    }
                })
                .collect(),
        )
    }

    fn kinks(&self, _axis: usize) -> Vec<f64> {
        vec![0.0]
    }
}

/// `f(x) = c / (alpha + 1) * |x|^(alpha + 1)` (Euclidean norm).
#[derive(Debug, Clone)]
pub struct PowerNorm {
    dim: usize,
    alpha: f64,
    c: f64,
}

pub fn make_power_norm(dim: usize, alpha: f64, c: f64) -> Result<PowerNorm> {
    positive_dim(dim)?;
    positive("c", c)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(PowerNorm { dim, alpha, c })
}

impl Potential for PowerNorm {
    fn name(&self) -> &str {
        "power_norm"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.c / (self.alpha + 1.0) * norm(x).powf(self.alpha + 1.0)
    }

    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        let r = norm(x);
        if r == 0.0 {
            return vec![0.0; self.dim];
        }
        let k = self.c * r.powf(self.alpha - 1.0);
        x.iter().map(|v| k * v).collect()
    }

    fn profile(&self) -> SmoothnessProfile {
        // x -> |x|^(alpha-1) x is (alpha, 2^(1-alpha))-Hölder
        SmoothnessProfile {
            alpha: self.alpha,
            l_alpha: self.c * 2f64.powf(1.0 - self.alpha),
            l_one: 0.0,
            lambda_strong: if self.alpha == 1.0 { self.c } else { 0.0 },
        }
    }

    fn prox(&self, eta: f64, y: &[f64]) -> Option<Vec<f64>> {
        // radial: z = y * r / |y| with r + eta c r^alpha = |y|
        let ny = norm(y);
        if ny == 0.0 {
            return Some(vec![0.0; self.dim]);
        }
        let k = eta * self.c;
        let r = if self.alpha == 0.0 {
            (ny - k).max(0.0)
        } else if self.alpha == 1.0 {
            ny / (1.0 + k)
        } else {
            let phi = |r: f64| r + k * r.powf(self.alpha) - ny;
            let (mut lo, mut hi) = (0.0f64, ny);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if phi(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= f64::EPSILON * hi {
                    break;
                }
            }
            0.5 * (lo + hi)
        };
        Some(y.iter().map(|v| v * r / ny).collect())
    }

    fn has_prox(&self) -> bool {
        true
    }

    fn minimizer(&self) -> Option<Minimizer> {
        Some(Minimizer {
            x: vec![0.0; self.dim],
            value: 0.0,
        })
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        if self.alpha != 1.0 {
            return None;
        }
        let sd = 1.0 / self.c.sqrt();
        Some((0..self.dim).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect())
    }

    fn kinks(&self, _axis: usize) -> Vec<f64> {
        if self.alpha < 1.0 {
            vec![0.0]
        } else {
            Vec::new()
        }
    }
}

/// `f(x) = (1/2) sum q_i x_i^2 + scale * |x|_1`.
#[derive(Debug, Clone)]
pub struct QuadPlusL1 {
    q: Vec<f64>,
    scale: f64,
}

pub fn make_quad_plus_l1(q: Vec<f64>, scale: f64) -> Result<QuadPlusL1> {
    positive_dim(q.len())?;
    positive("scale", scale)?;
    for &v in &q {
        positive("q_ii", v)?;
    }
    Ok(QuadPlusL1 { q, scale })
}

impl Potential for QuadPlusL1 {
    fn name(&self) -> &str {
        "quad_plus_l1"
    }

    fn dim(&self) -> usize {
        self.q.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.q)
            .map(|(v, q)| 0.5 * q * v * v + self.scale * v.abs())
            .sum()
    }

    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.q)
            .map(|(&v, q)| q * v + self.scale * sign_or_zero(v))
            .collect()
    }

    fn profile(&self) -> SmoothnessProfile {
        let qmax = self.q.iter().cloned().fold(0.0, f64::max);
        let qmin = self.q.iter().cloned().fold(f64::INFINITY, f64::min);
        SmoothnessProfile {
            alpha: 0.0,
            l_alpha: 2.0 * self.scale * (self.q.len() as f64).sqrt(),
            l_one: qmax,
            lambda_strong: qmin,
        }
    }

    fn prox(&self, eta: f64, y: &[f64]) -> Option<Vec<f64>> {
        Some(
            y.iter()
                .zip(&self.q)
                .map(|(&v, q)| soft_threshold(v, eta * self.scale) / (1.0 + eta * q))
                .collect(),
        )
    }

    fn has_prox(&self) -> bool {
        true
    }

    fn minimizer(&self) -> Option<Minimizer> {
        Some(Minimizer {
            x: vec![0.0; self.q.len()],
            value: 0.0,
        })
    }

    fn kinks(&self, _axis: usize) -> Vec<f64> {
        vec![0.0]
    }
}

/// `f(x) = sum_k max(0, <a_k, x> - b_k)`.
#[derive(Debug, Clone)]
pub struct HingeSum {
    dim: usize,
    planes: Vec<(Vec<f64>, f64)>,
    l_zero: f64,
    minimizer: Option<Minimizer>,
}

pub fn make_hinge_sum(dim: usize, planes: Vec<(Vec<f64>, f64)>) -> Result<HingeSum> {
    positive_dim(dim)?;
    if planes.is_empty() {
        return Err(Error::invalid("hinge sum needs at least one plane"));
    }
    for (a, b) in &planes {
        if a.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: a.len(),
            });
        }
        if !b.is_finite() || a.iter().any(|v| !v.is_finite()) || norm_sq(a) == 0.0 {
            return Err(Error::invalid("hinge plane normals must be finite and nonzero"));
        }
    }
    let l_zero = hinge_diameter(&planes);
    Ok(HingeSum {
        dim,
        planes,
        l_zero,
        minimizer: None,
    })
}

/// Sum over axes of the dead-zone penalty `max(0, |x_i| - width)`, with its
/// planes `+-e_i`.
pub fn make_dead_zone(dim: usize, width: f64) -> Result<HingeSum> {
    positive_dim(dim)?;
    if !(width >= 0.0 && width.is_finite()) {
        return Err(Error::invalid(format!("width must be >= 0, got {width}")));
    }
    let mut planes = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut a = vec![0.0; dim];
            a[i] = s;
            planes.push((a, width));
        }
    }
    let mut h = make_hinge_sum(dim, planes)?;
    h.minimizer = Some(Minimizer {
        x: vec![0.0; dim],
        value: 0.0,
    });
    Ok(h)
}

/// Upper bound on the diameter of `{sum_k s_k a_k : s in [0,1]^K}`: the
/// maximum of `|sum e_k a_k|` over sign vectors `e`, enumerated when small.
fn hinge_diameter(planes: &[(Vec<f64>, f64)]) -> f64 {
    let k = planes.len();
    if k > 16 {
        return planes.iter().map(|(a, _)| norm(a)).sum();
    }
    let dim = planes[0].0.len();
    let mut best = 0.0f64;
    let mut acc = vec![0.0; dim];
    for mask in 0u32..(1u32 << k) {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for (j, (a, _)) in planes.iter().enumerate() {
            let s = if mask & (1 << j) != 0 { 1.0 } else { -1.0 };
            for (ai, ci) in a.iter().zip(acc.iter_mut()) {
                *ci += s * ai;
            }
        }
        best = best.max(norm(&acc));
    }
    best
}

impl Potential for HingeSum {
    fn name(&self) -> &str {
        "hinge"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.planes
            .iter()
            .map(|(a, b)| (dot(a, x) - b).max(0.0))
            .sum()
    }

    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        for (a, b) in &self.planes {
            // on the hinge itself 0 is a valid weight
            if dot(a, x) - b > 0.0 {
                for (si, ai) in s.iter_mut().zip(a) {
                    *si += ai;
                }
            }
        }
        s
    }

    fn profile(&self) -> SmoothnessProfile {
        SmoothnessProfile {
            alpha: 0.0,
            l_alpha: self.l_zero,
            l_one: 0.0,
            lambda_strong: 0.0,
        }
    }

    fn minimizer(&self) -> Option<Minimizer> {
        self.minimizer.clone()
    }

    fn kinks(&self, axis: usize) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .planes
            .iter()
            .filter(|(a, _)| a.iter().enumerate().all(|(i, v)| i == axis || *v == 0.0))
            .map(|(a, b)| b / a[axis])
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

/// `f(x) = (1/2) sum p_i x_i^2`, a centered Gaussian with diagonal precision.
#[derive(Debug, Clone)]
pub struct Gaussian {
    precision: Vec<f64>,
}

pub fn make_gaussian(precision: Vec<f64>) -> Result<Gaussian> {
    positive_dim(precision.len())?;
    for &p in &precision {
        positive("precision", p)?;
    }
    Ok(Gaussian { precision })
}

impl Gaussian {
    pub fn precision(&self) -> &[f64] {
        &self.precision
    }
}

impl Potential for Gaussian {
    fn name(&self) -> &str {
        "gaussian"
    }

    fn dim(&self) -> usize {
        self.precision.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.precision).map(|(v, p)| 0.5 * p * v * v).sum()
    }

    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.precision).map(|(v, p)| p * v).collect()
    }

    fn profile(&self) -> SmoothnessProfile {
        let pmax = self.precision.iter().cloned().fold(0.0, f64::max);
        let pmin = self.precision.iter().cloned().fold(f64::INFINITY, f64::min);
        SmoothnessProfile {
            alpha: 1.0,
            l_alpha: 0.0,
            l_one: pmax,
            lambda_strong: pmin,
        }
    }

    fn prox(&self, eta: f64, y: &[f64]) -> Option<Vec<f64>> {
        Some(y.iter().zip(&self.precision).map(|(v, p)| v / (1.0 + eta * p)).collect())
    }

    fn has_prox(&self) -> bool {
        true
    }

    fn minimizer(&self) -> Option<Minimizer> {
        Some(Minimizer {
            x: vec![0.0; self.precision.len()],
            value: 0.0,
        })
    }

    fn fourth_moment(&self) -> Option<f64> {
        let var: Vec<f64> = self.precision.iter().map(|p| 1.0 / p).collect();
        let s: f64 = var.iter().sum();
        let s2: f64 = var.iter().map(|v| v * v).sum();
        // E(sum x_i^2)^2 = sum 3 v_i^2 + sum_{i != j} v_i v_j
        Some(2.0 * s2 + s * s)
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(
            self.precision
                .iter()
                .map(|p| rng.sample::<f64, _>(StandardNormal) / p.sqrt())
                .collect(),
        )
    }
}

/// `f = 0`. Not a probability potential on its own, but a useful degenerate
/// RGO target: every proposal is accepted.
#[derive(Debug, Clone)]
pub struct Zero {
    dim: usize,
}

pub fn make_zero(dim: usize) -> Result<Zero> {
    positive_dim(dim)?;
    Ok(Zero { dim })
}

impl Potential for Zero {
    fn name(&self) -> &str {
        "zero"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn subgradient(&self, _x: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    fn profile(&self) -> SmoothnessProfile {
        SmoothnessProfile {
            alpha: 1.0,
            l_alpha: 0.0,
            l_one: 0.0,
            lambda_strong: 0.0,
        }
    }

    fn prox(&self, _eta: f64, y: &[f64]) -> Option<Vec<f64>> {
        Some(y.to_vec())
    }

    fn has_prox(&self) -> bool {
        true
    }
}

fn default_one() -> f64 {
    1.0
}

/// Zoo potential selected by name plus a parameter table, as read from a run
/// config (`name = "l1"`, `dim = 5`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    L1 {
        dim: usize,
        #[serde(default = "default_one")]
        scale: f64,
    },
    PowerNorm {
        dim: usize,
        alpha: f64,
        #[serde(default = "default_one")]
        c: f64,
    },
    QuadPlusL1 {
        q: Vec<f64>,
        #[serde(default = "default_one")]
        scale: f64,
    },
    /// Dead-zone hinge sum `sum_i max(0, |x_i| - width)`.
    Hinge {
        dim: usize,
        #[serde(default = "default_one")]
        width: f64,
    },
    Gaussian {
        precision: Vec<f64>,
    },
    Zero {
        dim: usize,
    },
}

impl TargetSpec {
    pub const NAMES: [&'static str; 6] =
        ["l1", "power_norm", "quad_plus_l1", "hinge", "gaussian", "zero"];

    pub fn build(&self) -> Result<Arc<dyn Potential>> {
        Ok(match self {
            TargetSpec::L1 { dim, scale } => Arc::new(make_l1(*dim, *scale)?),
            TargetSpec::PowerNorm { dim, alpha, c } => Arc::new(make_power_norm(*dim, *alpha, *c)?),
            TargetSpec::QuadPlusL1 { q, scale } => Arc::new(make_quad_plus_l1(q.clone(), *scale)?),
            TargetSpec::Hinge { dim, width } => Arc::new(make_dead_zone(*dim, *width)?),
            TargetSpec::Gaussian { precision } => Arc::new(make_gaussian(precision.clone())?),
            TargetSpec::Zero { dim } => Arc::new(make_zero(*dim)?),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetSpec::L1 { dim, .. }
            | TargetSpec::PowerNorm { dim, .. }
            | TargetSpec::Hinge { dim, .. }
            | TargetSpec::Zero { dim } => *dim,
            TargetSpec::QuadPlusL1 { q, .. } => q.len(),
            TargetSpec::Gaussian { precision } => precision.len(),
        }
    }
}
