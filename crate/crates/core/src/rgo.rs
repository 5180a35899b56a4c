//! Restricted Gaussian oracle: draws from `exp(-g_y^eta)` by rejection
//! sampling against the Gaussian envelope `h1`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bundle::{prox_bundle_with, BundleOptions, ProxObjective, DEFAULT_MAX_DUAL_ITER, DEFAULT_MAX_ITER};
use crate::error::{Error, Result};
use crate::linalg::{dist, dist_sq};
use crate::potential::SmoothnessProfile;

/// Default guard on rejected proposals per call.
pub const DEFAULT_MAX_REJECTIONS: u64 = 1_000_000;

/// Largest tolerated `h1(X) - g_y^eta(X)` before the envelope is declared
/// broken.
pub const ENVELOPE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RgoMode {
    /// Proposal centered at the exact prox point.
    Exact,
    /// Proposal centered at the bundle model minimizer.
    Bundle,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RgoConfig {
    pub eta: f64,
    pub delta: f64,
    pub mode: RgoMode,
    pub max_rejections: u64,
    pub bundle_max_iter: usize,
}

impl RgoConfig {
    pub fn new(eta: f64, delta: f64, mode: RgoMode) -> Self {
        Self {
            eta,
            delta,
            mode,
            max_rejections: DEFAULT_MAX_REJECTIONS,
            bundle_max_iter: DEFAULT_MAX_ITER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if self.mode == RgoMode::Bundle && !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!(
                "delta must be positive in bundle mode, got {}",
                self.delta
            )));
        }
        if self.bundle_max_iter == 0 {
            return Err(Error::invalid("bundle_max_iter must be >= 1"));
        }
        Ok(())
    }

    /// Tolerance that actually enters the envelope: 0 in exact mode.
    pub fn effective_delta(&self) -> f64 {
        match self.mode {
            RgoMode::Exact => 0.0,
            RgoMode::Bundle => self.delta,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RgoSample {
    pub x: Vec<f64>,
    /// Rejected proposals before acceptance.
    pub rejections: u64,
    /// Bundle iterations `J` (0 in exact mode).
    pub bundle_iters: usize,
    /// Proposal mean.
    pub center: Vec<f64>,
    /// Constant term of `h1`.
    pub h1_offset: f64,
    /// Subgradient queries to `f`.
    pub subgrad_calls: usize,
    /// Value queries to `f`, envelope tests included.
    pub value_calls: usize,
}

impl RgoSample {
    pub fn proposals(&self) -> u64 {
        self.rejections + 1
    }
}

/// Proposal envelope `h1(x) = |x - center|^2 / (2 eta_mu) + offset`.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeH1 {
    pub center: Vec<f64>,
    pub offset: f64,
    pub eta_mu: f64,
}

impl EnvelopeH1 {
    pub fn eval(&self, x: &[f64]) -> f64 {
        dist_sq(x, &self.center) / (2.0 * self.eta_mu) + self.offset
    }

    /// `ln of the integral of exp(-h1)`.
    pub fn log_mass(&self) -> f64 {
        let d = self.center.len() as f64;
        0.5 * d * (2.0 * std::f64::consts::PI * self.eta_mu).ln() - self.offset
    }
}

pub fn envelope_h1(center: Vec<f64>, offset: f64, eta_mu: f64) -> Result<EnvelopeH1> {
    if !(eta_mu > 0.0) {
        return Err(Error::invalid(format!("eta_mu must be positive, got {eta_mu}")));
    }
    Ok(EnvelopeH1 { center, offset, eta_mu })
}

/// Analysis majorant
/// `h2(x) = L_a/(a+1) |x - x*|^(a+1) + |x - x*|^2 / (2 eta_mu_l1) + g_y^eta(x*)`.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeH2 {
    pub xstar: Vec<f64>,
    pub value_at_xstar: f64,
    pub profile: SmoothnessProfile,
    pub eta_mu_l1: f64,
}

impl EnvelopeH2 {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = dist(x, &self.xstar);
        let a = self.profile.alpha;
        let power = if self.profile.l_alpha > 0.0 {
            self.profile.l_alpha / (a + 1.0) * r.powf(a + 1.0)
        } else {
            0.0
        };
        power + r * r / (2.0 * self.eta_mu_l1) + self.value_at_xstar
    }
}

pub fn envelope_h2(xstar: Vec<f64>, value_at_xstar: f64, profile: SmoothnessProfile, obj: &ProxObjective) -> EnvelopeH2 {
    EnvelopeH2 {
        xstar,
        value_at_xstar,
        profile,
        eta_mu_l1: obj.eta_mu_l1(),
    }
}

/// The envelope `h1` for `obj` in the given mode, together with the bundle
/// iteration and oracle counts spent building it.
pub fn build_envelope(obj: &ProxObjective, cfg: &RgoConfig) -> Result<(EnvelopeH1, usize, usize, usize)> {
    cfg.validate()?;
    let eta_mu = obj.eta_mu();
    match cfg.mode {
        RgoMode::Exact => {
            let xs = obj.prox_point()?;
            let offset = obj.value(&xs);
            Ok((envelope_h1(xs, offset, eta_mu)?, 0, 0, 1))
        }
        RgoMode::Bundle => {
            let r = prox_bundle_with(
                obj,
                &BundleOptions {
                    delta: cfg.delta,
                    max_iter: cfg.bundle_max_iter,
                    max_dual_iter: DEFAULT_MAX_DUAL_ITER,
                },
            )?;
            let offset = r.best_value - cfg.delta;
            Ok((
                envelope_h1(r.x_model, offset, eta_mu)?,
                r.iterations,
                r.oracle_calls,
                r.value_calls,
            ))
        }
    }
}

/// One RGO draw. The envelope is built once and reused for every proposal.
pub fn rgo_sample<R: Rng + ?Sized>(obj: &ProxObjective, cfg: &RgoConfig, rng: &mut R) -> Result<RgoSample> {
    let (h1, bundle_iters, subgrad_calls, value_calls) = build_envelope(obj, cfg)?;
    let (x, rejections, tests) = sample_from_envelope(obj, &h1, cfg.max_rejections, rng)?;
    Ok(RgoSample {
        x,
        rejections,
        bundle_iters,
        center: h1.center,
        h1_offset: h1.offset,
        subgrad_calls,
        value_calls: value_calls + tests,
    })
}

/// Rejection loop against a given minorant `h1` of `g_y^eta`. Returns the
/// accepted point, the rejection count and the number of objective values
/// computed.
pub fn sample_from_envelope<R: Rng + ?Sized>(
    obj: &ProxObjective,
    h1: &EnvelopeH1,
    max_rejections: u64,
    rng: &mut R,
) -> Result<(Vec<f64>, u64, usize)> {
    let sd = h1.eta_mu.sqrt();
    let mut x = vec![0.0; obj.dim()];
    let mut rejections = 0u64;
    loop {
        for (xi, ci) in x.iter_mut().zip(&h1.center) {
            let z: f64 = rng.sample(StandardNormal);
            *xi = ci + sd * z;
        }
        let log_ratio = h1.eval(&x) - obj.value(&x);
        if log_ratio > ENVELOPE_TOL {
            return Err(Error::EnvelopeViolation { log_ratio });
        }
        // 1 - U lies in (0, 1], so its log is finite
        let u: f64 = 1.0 - rng.random::<f64>();
        if u.ln() <= log_ratio {
            return Ok((x, rejections, rejections as usize + 1));
        }
        rejections += 1;
        if rejections >= max_rejections {
            return Err(Error::MaxRejections {
                max_rejections,
                center: h1.center.clone(),
            });
        }
    }
}

/// Which bound applies to a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundRegime {
    SemiSmooth,
    Smooth,
    Composite,
}

impl BoundRegime {
    pub fn of(profile: &SmoothnessProfile) -> Self {
        match (profile.l_alpha > 0.0, profile.l_one > 0.0) {
            (_, false) => Self::SemiSmooth,
            (false, true) => Self::Smooth,
            (true, true) => Self::Composite,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RejectionBound {
    /// Expected proposals per accepted sample; `+inf` when the step condition fails.
    pub expected_proposals: f64,
    pub regime: BoundRegime,
    pub condition_holds: bool,
    /// Largest admissible `eta_mu`.
    pub eta_mu_max: f64,
}

/// Largest `eta_mu` under which the rejection bounds hold:
/// `(a+1)^(2/(a+1)) / ((2 L_a)^(2/(a+1)) d)` for the semi-smooth part and
/// `1 / (L1 d)` for the smooth part.
pub fn eta_mu_limit(profile: &SmoothnessProfile, dim: usize) -> f64 {
    let d = dim as f64;
    let mut lim = f64::INFINITY;
    if profile.l_alpha > 0.0 {
        let p = 2.0 / (profile.alpha + 1.0);
        lim = lim.min((profile.alpha + 1.0).powf(p) / ((2.0 * profile.l_alpha).powf(p) * d));
    }
    if profile.l_one > 0.0 {
        lim = lim.min(1.0 / (profile.l_one * d));
    }
    lim
}

/// Relative slack on the step condition so that parameters chosen exactly at
/// the limit are not rejected by rounding.
const CONDITION_RTOL: f64 = 1e-12;

/// Expected proposals bound: 2 (exact, semi-smooth), `2 e^delta` (bundle,
/// semi-smooth), `e^(1/2 + delta)` (smooth) or `2 e^(1/2 + delta)` (composite).
pub fn rejection_bound(cfg: &RgoConfig, eta_mu: f64, profile: &SmoothnessProfile, dim: usize) -> RejectionBound {
    let regime = BoundRegime::of(profile);
    let eta_mu_max = eta_mu_limit(profile, dim);
    let condition_holds = eta_mu <= eta_mu_max * (1.0 + CONDITION_RTOL);
    let delta = cfg.effective_delta();
    let expected_proposals = if !condition_holds {
        f64::INFINITY
    } else {
        match regime {
            BoundRegime::SemiSmooth => 2.0 * delta.exp(),
            BoundRegime::Smooth => (0.5 + delta).exp(),
            BoundRegime::Composite => 2.0 * (0.5 + delta).exp(),
        }
    };
    RejectionBound {
        expected_proposals,
        regime,
        condition_holds,
        eta_mu_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_gaussian, make_l1, make_zero, Potential, RegularizedTarget};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn abs_obj(eta: f64, y: f64) -> ProxObjective {
        let f = Arc::new(make_l1(1, 1.0).unwrap());
        ProxObjective::new(RegularizedTarget::plain(f), eta, vec![y]).unwrap()
    }

    #[test]
    fn h1_examples() {
        let h = envelope_h1(vec![0.0], 0.0, 1.0).unwrap();
        assert_eq!(h.eval(&[0.0]), 0.0);
        let obj = abs_obj(0.5, 2.0);
        let (h, j, _, _) = build_envelope(&obj, &RgoConfig::new(0.5, 0.1, RgoMode::Exact)).unwrap();
        assert_eq!((h.center[0], h.offset, j), (1.5, 1.75, 0));
        let (h, j, _, _) = build_envelope(&obj, &RgoConfig::new(0.5, 0.1, RgoMode::Bundle)).unwrap();
        assert_eq!(h.center[0], 1.5);
        assert!((h.offset - 1.65).abs() < 1e-14);
        assert_eq!(j, 1);
        assert!(envelope_h1(vec![0.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn h2_examples() {
        let obj = abs_obj(0.5, 2.0);
        let p = obj.target.base.profile();
        let h2 = envelope_h2(vec![1.5], 1.75, p, &obj);
        assert_eq!(h2.eval(&[1.5]), 1.75);
        // no power term: h2 is h1 at x*
        let z: Arc<dyn Potential> = Arc::new(make_zero(2).unwrap());
        let obj = ProxObjective::new(RegularizedTarget::plain(z.clone()), 0.7, vec![1.0, -1.0]).unwrap();
        let h2 = envelope_h2(vec![1.0, -1.0], 0.0, z.profile(), &obj);
        let h1 = envelope_h1(vec![1.0, -1.0], 0.0, obj.eta_mu()).unwrap();
        for x in [[0.0, 0.0], [3.0, 1.0]] {
            assert!((h2.eval(&x) - h1.eval(&x)).abs() < 1e-12);
        }
        // alpha = 1: pure quadratic with curvature 1/eta_mu_l1 + L_1
        let g: Arc<dyn Potential> = Arc::new(make_gaussian(vec![2.0]).unwrap());
        let obj = ProxObjective::new(RegularizedTarget::plain(g.clone()), 0.5, vec![1.0]).unwrap();
        let h2 = envelope_h2(vec![0.5], 0.0, g.profile(), &obj);
        assert!((h2.eval(&[1.5]) - 0.5 / obj.eta_mu_l1()).abs() < 1e-14);
    }

    #[test]
    fn zero_potential_accepts_every_proposal() {
        let z: Arc<dyn Potential> = Arc::new(make_zero(3).unwrap());
        let obj = ProxObjective::new(RegularizedTarget::plain(z), 0.4, vec![1.0, 2.0, 3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for mode in [RgoMode::Exact, RgoMode::Bundle] {
            for _ in 0..200 {
                let s = rgo_sample(&obj, &RgoConfig::new(0.4, 0.1, mode), &mut rng).unwrap();
                // bundle mode lowers h1 by delta, so rejections are possible there
                if mode == RgoMode::Exact {
                    assert_eq!(s.rejections, 0);
                }
                assert_eq!(s.center, vec![1.0, 2.0, 3.0]);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let obj = abs_obj(0.25, 2.0);
        let cfg = RgoConfig::new(0.25, 0.25, RgoMode::Bundle);
        let a = rgo_sample(&obj, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = rgo_sample(&obj, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.rejections, b.rejections);
    }

    #[test]
    fn invalid_configs() {
        assert!(RgoConfig::new(0.0, 0.1, RgoMode::Exact).validate().is_err());
        assert!(RgoConfig::new(1.0, 0.0, RgoMode::Bundle).validate().is_err());
        assert!(RgoConfig::new(1.0, 0.0, RgoMode::Exact).validate().is_ok());
    }

    #[test]
    fn broken_envelope_is_reported() {
        let obj = abs_obj(0.5, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // an offset above the minimum value cannot minorize g
        let h = envelope_h1(vec![1.5], 10.0, obj.eta_mu()).unwrap();
        let err = sample_from_envelope(&obj, &h, 100, &mut rng).unwrap_err();
        assert!(matches!(err, Error::EnvelopeViolation { log_ratio } if log_ratio > 1.0));
    }

    #[test]
    fn max_rejections_guard() {
        // huge step on a steep potential makes acceptance rare
        let f = Arc::new(make_l1(20, 50.0).unwrap());
        let obj = ProxObjective::new(RegularizedTarget::plain(f), 100.0, vec![3.0; 20]).unwrap();
        let cfg = RgoConfig {
            max_rejections: 3,
            ..RgoConfig::new(100.0, 0.1, RgoMode::Exact)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let err = (0..50).find_map(|_| rgo_sample(&obj, &cfg, &mut rng).err()).unwrap();
        assert!(matches!(err, Error::MaxRejections { max_rejections: 3, .. }));
    }

    #[test]
    fn rejection_bound_examples() {
        let l1 = SmoothnessProfile::semi_smooth(0.0, 2.0).unwrap();
        let exact = RgoConfig::new(0.25, 0.3, RgoMode::Exact);
        let b = rejection_bound(&exact, 1.0 / 16.0, &l1, 1);
        assert_eq!(b.expected_proposals, 2.0);
        assert!(b.condition_holds);
        let bundle0 = RgoConfig::new(0.25, 0.0, RgoMode::Bundle);
        assert_eq!(rejection_bound(&bundle0, 1.0 / 16.0, &l1, 1).expected_proposals, 2.0);
        let comp = SmoothnessProfile::new(0.0, 1.0, 1.0, 0.0).unwrap();
        let b = rejection_bound(&RgoConfig::new(0.01, 0.1, RgoMode::Bundle), 0.01, &comp, 2);
        assert!((b.expected_proposals - 2.0 * 0.6f64.exp()).abs() < 1e-15);
        assert!((b.expected_proposals - 3.644).abs() < 1e-3);
        let smooth = SmoothnessProfile::new(1.0, 0.0, 1.0, 1.0).unwrap();
        let b = rejection_bound(&RgoConfig::new(1.0, 0.0, RgoMode::Exact), 1.0, &smooth, 1);
        assert_eq!(b.regime, BoundRegime::Smooth);
        assert!((b.expected_proposals - 0.5f64.exp()).abs() < 1e-15);
        // violated step condition
        let b = rejection_bound(&exact, 1.0, &l1, 1);
        assert!(!b.condition_holds && b.expected_proposals.is_infinite());
    }
}
