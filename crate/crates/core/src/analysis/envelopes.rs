//! Checks that the RGO envelopes bracket `g_y^eta` and that acceptance rates
//! match their quadrature values.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::quadrature::{QuadOptions, QuadratureDensity};
use crate::bundle::ProxObjective;
use crate::error::{Error, Result};
use crate::rgo::{EnvelopeH1, EnvelopeH2};

/// Slack allowed in the sandwich inequalities.
pub const SANDWICH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AcceptanceOracle {
    /// `∫ exp(-g_y^eta) / ∫ exp(-h1)`.
    pub ratio: f64,
    pub log_z_target: f64,
    pub log_z_envelope: f64,
    pub violation: bool,
}

/// Acceptance probability of the rejection step, by quadrature (d <= 2).
pub fn acceptance_probability_oracle(obj: &ProxObjective, h1: &EnvelopeH1) -> Result<AcceptanceOracle> {
    let d = obj.dim();
    if d > 2 {
        return Err(Error::Unsupported(format!("acceptance oracle needs d <= 2, got {d}")));
    }
    let kinks: Vec<Vec<f64>> = (0..d).map(|k| obj.target.base.kinks(k)).collect();
    let q = QuadratureDensity::from_fn(d, |x| obj.value(x), &h1.center, &kinks, QuadOptions::for_dim(d))?;
    let log_z_envelope = h1.log_mass();
    let ratio = (q.log_normalizer - log_z_envelope).exp();
    Ok(AcceptanceOracle {
        ratio,
        log_z_target: q.log_normalizer,
        log_z_envelope,
        violation: ratio > 1.0 + 1e-8,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub probes: usize,
    /// `min (g_y^eta - h1)` over probes.
    pub min_slack_h1: f64,
    /// `min (h2 - g_y^eta)`, when `h2` was supplied.
    pub min_slack_h2: Option<f64>,
    pub violations: usize,
    pub pass: bool,
}

impl SandwichReport {
    pub fn merge(&mut self, o: &SandwichReport) {
        self.probes += o.probes;
        self.min_slack_h1 = self.min_slack_h1.min(o.min_slack_h1);
        self.min_slack_h2 = match (self.min_slack_h2, o.min_slack_h2) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.violations += o.violations;
        self.pass &= o.pass;
    }

    pub fn empty() -> Self {
        Self {
            probes: 0,
            min_slack_h1: f64::INFINITY,
            min_slack_h2: None,
            violations: 0,
            pass: true,
        }
    }
}

/// Evaluates `h1 <= g_y^eta <= h2` at `probes` Gaussian points around the
/// proposal center with per-coordinate scale `5 sqrt(eta)`.
pub fn sandwich_suite<R: Rng + ?Sized>(
    obj: &ProxObjective,
    h1: &EnvelopeH1,
    h2: Option<&EnvelopeH2>,
    probes: usize,
    rng: &mut R,
) -> SandwichReport {
    let sd = 5.0 * obj.eta.sqrt();
    let mut min1 = f64::INFINITY;
    let mut min2 = f64::INFINITY;
    let mut violations = 0;
    let mut x = vec![0.0; obj.dim()];
    for _ in 0..probes {
        for (xi, ci) in x.iter_mut().zip(&h1.center) {
            let z: f64 = rng.sample(StandardNormal);
            *xi = ci + sd * z;
        }
        let g = obj.value(&x);
        let s1 = g - h1.eval(&x);
        min1 = min1.min(s1);
        let mut bad = s1 < -SANDWICH_TOL;
        if let Some(h2) = h2 {
            let s2 = h2.eval(&x) - g;
            min2 = min2.min(s2);
            bad |= s2 < -SANDWICH_TOL;
        }
        violations += bad as usize;
    }
    SandwichReport {
        probes,
        min_slack_h1: min1,
        min_slack_h2: h2.map(|_| min2),
        violations,
        pass: violations == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_l1, make_quad_plus_l1, make_zero, Potential, RegularizedTarget};
    use crate::rgo::{build_envelope, envelope_h2, RgoConfig, RgoMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn obj_for(f: Arc<dyn Potential>, mu: f64, eta: f64, y: Vec<f64>) -> ProxObjective {
        let d = f.dim();
        ProxObjective::new(RegularizedTarget::new(f, mu, vec![0.0; d]).unwrap(), eta, y).unwrap()
    }

    #[test]
    fn zero_potential_has_unit_acceptance_and_zero_slack() {
        let obj = obj_for(Arc::new(make_zero(1).unwrap()), 0.0, 0.5, vec![1.0]);
        let (h1, ..) = build_envelope(&obj, &RgoConfig::new(0.5, 0.1, RgoMode::Exact)).unwrap();
        // the flat potential is not normalizable, but g_y^eta is
        let a = acceptance_probability_oracle(&obj, &h1).unwrap();
        assert!((a.ratio - 1.0).abs() < 1e-8);
        let h2 = envelope_h2(h1.center.clone(), h1.offset, obj.target.base.profile(), &obj);
        let r = sandwich_suite(&obj, &h1, Some(&h2), 100, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(r.pass);
        assert!(r.min_slack_h1.abs() < 1e-12 && r.min_slack_h2.unwrap().abs() < 1e-12);
    }

    #[test]
    fn abs_acceptance_bounds() {
        let obj = obj_for(Arc::new(make_l1(1, 1.0).unwrap()), 0.0, 0.25, vec![2.0]);
        let (h1, ..) = build_envelope(&obj, &RgoConfig::new(0.25, 0.25, RgoMode::Exact)).unwrap();
        let a = acceptance_probability_oracle(&obj, &h1).unwrap();
        assert!(a.ratio >= 0.5 && !a.violation, "{}", a.ratio);
        let (h1b, ..) = build_envelope(&obj, &RgoConfig::new(0.25, 0.25, RgoMode::Bundle)).unwrap();
        let b = acceptance_probability_oracle(&obj, &h1b).unwrap();
        assert!(b.ratio >= (-0.25f64).exp() / 2.0 && b.ratio <= 1.0);
    }

    #[test]
    fn sandwich_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let obj = obj_for(Arc::new(make_l1(1, 1.0).unwrap()), 0.0, 0.25, vec![2.0]);
        let (h1, ..) = build_envelope(&obj, &RgoConfig::new(0.25, 0.25, RgoMode::Exact)).unwrap();
        let h2 = envelope_h2(h1.center.clone(), h1.offset, obj.target.base.profile(), &obj);
        assert!(sandwich_suite(&obj, &h1, Some(&h2), 1000, &mut rng).pass);

        let f: Arc<dyn Potential> = Arc::new(make_quad_plus_l1(vec![1.0, 3.0], 0.5).unwrap());
        let obj = obj_for(f.clone(), 0.2, 0.1, vec![1.0, -2.0]);
        let xs = obj.prox_point().unwrap();
        let h2 = envelope_h2(xs.clone(), obj.value(&xs), f.profile(), &obj);
        for mode in [RgoMode::Exact, RgoMode::Bundle] {
            let (h1, ..) = build_envelope(&obj, &RgoConfig::new(0.1, 0.05, mode)).unwrap();
            assert!(sandwich_suite(&obj, &h1, Some(&h2), 1000, &mut rng).pass);
        }
    }

    #[test]
    fn too_high_envelope_is_flagged() {
        let obj = obj_for(Arc::new(make_l1(1, 1.0).unwrap()), 0.0, 0.25, vec![2.0]);
        let h1 = crate::rgo::envelope_h1(vec![1.75], 5.0, obj.eta_mu()).unwrap();
        let r = sandwich_suite(&obj, &h1, None, 100, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(!r.pass && r.violations > 0);
        assert!(acceptance_probability_oracle(&obj, &h1).unwrap().violation);
    }
}
