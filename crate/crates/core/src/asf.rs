//! Alternating sampling framework: Gibbs sampling on
//! `pi(x, y) ∝ exp(-g(x) - |x - y|^2 / (2 eta))`, plus the parameter rules
//! for `eta`, `delta` and `mu`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::ProxObjective;
use crate::error::{check_dim, Error, Result};
use crate::linalg::dist_sq;
use crate::potential::{Potential, RegularizedTarget, SmoothnessProfile};
use crate::rgo::{rgo_sample, RgoConfig, RgoMode, DEFAULT_MAX_REJECTIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    SemiSmooth,
    Composite,
    StronglyConvex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub eta: f64,
    pub delta: f64,
    pub mu: f64,
    pub center_x0: Vec<f64>,
    pub n_iters: usize,
    pub seed: u64,
    pub target_eps: f64,
    pub regime: Regime,
    pub mode: RgoMode,
    pub max_rejections: u64,
    pub bundle_max_iter: usize,
}

impl ChainConfig {
    pub fn new(eta: f64, delta: f64, n_iters: usize, seed: u64, dim: usize) -> Self {
        Self {
            eta,
            delta,
            mu: 0.0,
            center_x0: vec![0.0; dim],
            n_iters,
            seed,
            target_eps: 0.0,
            regime: Regime::SemiSmooth,
            mode: RgoMode::Bundle,
            max_rejections: DEFAULT_MAX_REJECTIONS,
            bundle_max_iter: crate::bundle::DEFAULT_MAX_ITER,
        }
    }

    pub fn rgo(&self) -> RgoConfig {
        RgoConfig {
            eta: self.eta,
            delta: self.delta,
            mode: self.mode,
            max_rejections: self.max_rejections,
            bundle_max_iter: self.bundle_max_iter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rgo().validate()?;
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be >= 0, got {}", self.mu)));
        }
        Ok(())
    }

    pub fn target(&self, f: Arc<dyn Potential>) -> Result<RegularizedTarget> {
        RegularizedTarget::new(f, self.mu, self.center_x0.clone())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub rejections: u64,
    pub bundle_iters: usize,
    pub subgrad_calls: usize,
    pub value_calls: usize,
}

impl std::ops::AddAssign for StepDiagnostics {
    fn add_assign(&mut self, o: Self) {
        self.rejections += o.rejections;
        self.bundle_iters += o.bundle_iters;
        self.subgrad_calls += o.subgrad_calls;
        self.value_calls += o.value_calls;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainTrace {
    /// `x_0, ..., x_K`.
    pub iterates: Vec<Vec<f64>>,
    /// `y_0, ..., y_{K-1}`.
    pub aux: Vec<Vec<f64>>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub config: ChainConfig,
}

impl ChainTrace {
    pub fn totals(&self) -> StepDiagnostics {
        let mut t = StepDiagnostics::default();
        for d in &self.diagnostics {
            t += *d;
        }
        t
    }

    pub fn last(&self) -> &[f64] {
        self.iterates.last().expect("trace holds the initial point")
    }
}

/// One Gibbs sweep: `y = x + sqrt(eta) z`, then `x' ~ RGO(y)`.
pub fn asf_step<R: Rng + ?Sized>(
    target: &RegularizedTarget,
    x: &[f64],
    rgo: &RgoConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>, StepDiagnostics)> {
    check_dim(target.dim(), x.len())?;
    let s = rgo.eta.sqrt();
    let y: Vec<f64> = x
        .iter()
        .map(|xi| {
            let z: f64 = rng.sample(StandardNormal);
            xi + s * z
        })
        .collect();
    let obj = ProxObjective::new(target.clone(), rgo.eta, y)?;
    let out = rgo_sample(&obj, rgo, rng)?;
    let diag = StepDiagnostics {
        rejections: out.rejections,
        bundle_iters: out.bundle_iters,
        subgrad_calls: out.subgrad_calls,
        value_calls: out.value_calls,
    };
    Ok((obj.y, out.x, diag))
}

/// Runs `cfg.n_iters` sweeps from `x_init` with a generator seeded by `cfg.seed`.
pub fn run_chain(f: Arc<dyn Potential>, cfg: &ChainConfig, x_init: &[f64]) -> Result<ChainTrace> {
    cfg.validate()?;
    let target = cfg.target(f)?;
    check_dim(target.dim(), x_init.len())?;
    let rgo = cfg.rgo();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut iterates = Vec::with_capacity(cfg.n_iters + 1);
    let mut aux = Vec::with_capacity(cfg.n_iters);
    let mut diagnostics = Vec::with_capacity(cfg.n_iters);
    iterates.push(x_init.to_vec());
    for _ in 0..cfg.n_iters {
        let (y, x, d) = asf_step(&target, iterates.last().unwrap(), &rgo, &mut rng)?;
        aux.push(y);
        iterates.push(x);
        diagnostics.push(d);
    }
    Ok(ChainTrace {
        iterates,
        aux,
        diagnostics,
        config: cfg.clone(),
    })
}

/// Final iterate of a chain without storing the path.
pub fn run_chain_final(
    target: &RegularizedTarget,
    cfg: &ChainConfig,
    x_init: &[f64],
) -> Result<(Vec<f64>, StepDiagnostics)> {
    let rgo = cfg.rgo();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = x_init.to_vec();
    let mut total = StepDiagnostics::default();
    for _ in 0..cfg.n_iters {
        let (_, next, d) = asf_step(target, &x, &rgo, &mut rng)?;
        x = next;
        total += d;
    }
    Ok((x, total))
}

/// Runs `n` independent chains on a pool of `workers` threads (0 = rayon
/// default). Chain `i` is seeded with `cfg.seed + i`.
pub fn run_chains(
    f: Arc<dyn Potential>,
    cfg: &ChainConfig,
    x_init: &[f64],
    n: usize,
    workers: usize,
) -> Result<Vec<ChainTrace>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut c = cfg.clone();
                c.seed = cfg.seed.wrapping_add(i as u64);
                run_chain(f.clone(), &c, x_init)
            })
            .collect()
    })
}

/// Final iterates of `n` independent replicas, chain `i` seeded with
/// `cfg.seed + i`.
pub fn run_replicas(
    f: Arc<dyn Potential>,
    cfg: &ChainConfig,
    x_init: &[f64],
    n: usize,
    workers: usize,
) -> Result<(Vec<Vec<f64>>, StepDiagnostics)> {
    cfg.validate()?;
    let target = cfg.target(f)?;
    check_dim(target.dim(), x_init.len())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let out: Result<Vec<_>> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut c = cfg.clone();
                c.seed = cfg.seed.wrapping_add(i as u64);
                run_chain_final(&target, &c, x_init)
            })
            .collect()
    });
    let mut total = StepDiagnostics::default();
    let xs = out?
        .into_iter()
        .map(|(x, d)| {
            total += d;
            x
        })
        .collect();
    Ok((xs, total))
}

fn delta_rule(alpha: f64, d: usize) -> f64 {
    if alpha >= 1.0 {
        // the exponent of delta vanishes; any delta works, 1 keeps bounds O(1)
        1.0
    } else {
        (d as f64).powf(-(alpha + 1.0) / (1.0 - alpha))
    }
}

fn semismooth_eta(alpha: f64, l_alpha: f64, d: usize) -> f64 {
    let p = 2.0 / (alpha + 1.0);
    (alpha + 1.0).powf(p) / ((2.0 * l_alpha).powf(p) * d as f64)
}

/// `delta^((1-a)/(a+1)) = 1/d`, `eta = (a+1)^(2/(a+1)) / ((2 L_a)^(2/(a+1)) d)`.
pub fn select_params_semismooth(profile: &SmoothnessProfile, d: usize) -> Result<(f64, f64)> {
    if !(profile.l_alpha > 0.0) {
        return Err(Error::invalid("semi-smooth parameter rule needs l_alpha > 0"));
    }
    if d == 0 {
        return Err(Error::invalid("dimension must be >= 1"));
    }
    Ok((semismooth_eta(profile.alpha, profile.l_alpha, d), delta_rule(profile.alpha, d)))
}

/// `eta = min(semi-smooth eta, 1/(L1 d))` over the parts that are present.
pub fn select_params_composite(profile: &SmoothnessProfile, d: usize) -> Result<(f64, f64)> {
    if !profile.is_usable() {
        return Err(Error::invalid("composite parameter rule needs l_alpha > 0 or l_one > 0"));
    }
    if d == 0 {
        return Err(Error::invalid("dimension must be >= 1"));
    }
    let mut eta = f64::INFINITY;
    if profile.l_alpha > 0.0 {
        eta = eta.min(semismooth_eta(profile.alpha, profile.l_alpha, d));
    }
    if profile.l_one > 0.0 {
        eta = eta.min(1.0 / (profile.l_one * d as f64));
    }
    Ok((eta, delta_rule(profile.alpha, d)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    /// `M4 = E |X - x_min|^4` under `exp(-f)`.
    pub m4: f64,
    pub x_min: Vec<f64>,
    /// `|x0 - x_min|^2`.
    pub dist_sq: f64,
    /// How `m4` was obtained.
    pub source: String,
}

impl MomentEstimate {
    /// Uses analytic metadata, else quadrature for `d <= 2`, else averages
    /// `|X - x_min|^4` over `pilot` final iterates of chains run with `pilot_cfg`
    /// (a heuristic: the chain targets the regularized density).
    pub fn for_potential(
        f: &Arc<dyn Potential>,
        x0: &[f64],
        pilot: Option<(&ChainConfig, usize)>,
    ) -> Result<Self> {
        check_dim(f.dim(), x0.len())?;
        let x_min = f
            .minimizer()
            .ok_or_else(|| Error::Unsupported(format!("{} has no known minimizer", f.name())))?
            .x;
        let dist_sq = dist_sq(x0, &x_min);
        if let Some(m4) = f.fourth_moment() {
            return Ok(Self { m4, x_min, dist_sq, source: "analytic".into() });
        }
        if f.dim() <= 2 {
            let q = crate::analysis::QuadratureDensity::for_potential(f.as_ref())?;
            let m4 = q.expectation(|x| dist_sq_pow2(x, &x_min));
            return Ok(Self { m4, x_min, dist_sq, source: "quadrature".into() });
        }
        let (cfg, n) = pilot.ok_or_else(|| {
            Error::Unsupported(format!("{}: fourth moment needs a pilot run in d > 2", f.name()))
        })?;
        let (xs, _) = run_replicas(f.clone(), cfg, &x_min, n, 0)?;
        let m4 = xs.iter().map(|x| dist_sq_pow2(x, &x_min)).sum::<f64>() / n.max(1) as f64;
        Ok(Self { m4, x_min, dist_sq, source: "pilot-chain".into() })
    }
}

fn dist_sq_pow2(a: &[f64], b: &[f64]) -> f64 {
    let r2 = dist_sq(a, b);
    r2 * r2
}

/// `mu = eps / (sqrt(2) (sqrt(M4) + |x0 - x_min|^2))`.
pub fn select_mu(eps: f64, m: &MomentEstimate) -> Result<f64> {
    if !(eps > 0.0) || !(m.m4 >= 0.0) {
        return Err(Error::invalid("select_mu needs eps > 0 and m4 >= 0"));
    }
    Ok(eps / (std::f64::consts::SQRT_2 * (m.m4.sqrt() + m.dist_sq)))
}

/// Iteration count from the KL contraction `H_k <= H_0 / (1 + mu eta)^(2k)`,
/// targeting KL `eps^2 / 2` so that Pinsker gives TV `<= eps / 2`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterationCount {
    pub k: usize,
    pub h0: f64,
    pub kl_target: f64,
    pub contraction: f64,
}

pub fn chain_length(mu: f64, eta: f64, eps: f64, h0: f64) -> Result<IterationCount> {
    if !(mu > 0.0 && eta > 0.0 && eps > 0.0 && h0 > 0.0) {
        return Err(Error::invalid("chain_length needs mu, eta, eps, h0 > 0"));
    }
    let kl_target = 0.5 * eps * eps;
    let contraction = (1.0 + mu * eta).ln();
    let k = if h0 <= kl_target {
        0
    } else {
        ((h0 / kl_target).ln() / (2.0 * contraction)).ceil() as usize
    };
    Ok(IterationCount { k, h0, kl_target, contraction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_gaussian, make_l1, make_zero};

    #[test]
    fn semismooth_rule_examples() {
        let p = SmoothnessProfile::semi_smooth(1.0, 1.0).unwrap();
        let (eta, delta) = select_params_semismooth(&p, 4).unwrap();
        assert!((eta - 0.25).abs() < 1e-15);
        assert_eq!(delta, 1.0);
        let p = SmoothnessProfile::semi_smooth(0.0, 1.0).unwrap();
        assert_eq!(select_params_semismooth(&p, 1).unwrap(), (0.25, 1.0));
        let p = SmoothnessProfile::semi_smooth(0.5, 1.0).unwrap();
        let (eta, delta) = select_params_semismooth(&p, 16).unwrap();
        assert!((delta - 16f64.powi(-3)).abs() < 1e-18);
        assert!((eta - 1.5f64.powf(4.0 / 3.0) / (2f64.powf(4.0 / 3.0) * 16.0)).abs() < 1e-15);
        let p = SmoothnessProfile::new(1.0, 0.0, 1.0, 0.0).unwrap();
        assert!(select_params_semismooth(&p, 1).is_err());
    }

    #[test]
    fn composite_rule_examples() {
        let p = SmoothnessProfile::new(1.0, 0.0, 1.0, 0.0).unwrap();
        assert!((select_params_composite(&p, 10).unwrap().0 - 0.1).abs() < 1e-16);
        let p = SmoothnessProfile::semi_smooth(0.5, 3.0).unwrap();
        assert_eq!(select_params_composite(&p, 7).unwrap(), select_params_semismooth(&p, 7).unwrap());
        let p = SmoothnessProfile::new(0.0, 2.0, 4.0, 0.0).unwrap();
        assert_eq!(select_params_composite(&p, 2).unwrap().0, 1.0 / 32.0);
    }

    #[test]
    fn mu_rule_examples() {
        let m = MomentEstimate { m4: 4.0, x_min: vec![0.0], dist_sq: 0.0, source: String::new() };
        assert!((select_mu(0.1, &m).unwrap() - 0.035355339059327376).abs() < 1e-15);
        let far = MomentEstimate { dist_sq: 1e12, ..m };
        assert!(select_mu(0.1, &far).unwrap() < 1e-13);
        let f: Arc<dyn Potential> = Arc::new(make_l1(1, 1.0).unwrap());
        let m = MomentEstimate::for_potential(&f, &[0.0], None).unwrap();
        assert!((m.m4 - 24.0).abs() < 1e-12);
        assert!((select_mu(0.2, &m).unwrap() - 0.2 / (2f64.sqrt() * 24f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn chain_length_laplace() {
        let mu = 0.2 / (2f64.sqrt() * 24f64.sqrt());
        let k = chain_length(mu, 1.0 / 16.0, 0.2, 1.0).unwrap();
        assert_eq!(k.k, ((50f64).ln() / (2.0 * (1.0 + mu / 16.0).ln())).ceil() as usize);
        assert!(chain_length(0.0, 1.0, 0.2, 1.0).is_err());
    }

    #[test]
    fn zero_iterations_returns_initial_point() {
        let f: Arc<dyn Potential> = Arc::new(make_l1(2, 1.0).unwrap());
        let cfg = ChainConfig::new(0.1, 0.1, 0, 3, 2);
        let t = run_chain(f, &cfg, &[1.0, 2.0]).unwrap();
        assert_eq!(t.iterates, vec![vec![1.0, 2.0]]);
        assert!(t.aux.is_empty());
    }

    #[test]
    fn replay_is_bit_identical() {
        let f: Arc<dyn Potential> = Arc::new(make_l1(3, 1.0).unwrap());
        let cfg = ChainConfig::new(0.05, 0.2, 25, 11, 3);
        let a = run_chain(f.clone(), &cfg, &[0.0; 3]).unwrap();
        let b = run_chain(f, &cfg, &[0.0; 3]).unwrap();
        assert_eq!(a.iterates, b.iterates);
        assert_eq!(a.aux, b.aux);
        assert_eq!(a.diagnostics, b.diagnostics);
        let tot = a.totals();
        assert_eq!(tot.subgrad_calls, a.diagnostics.iter().map(|d| d.subgrad_calls).sum::<usize>());
    }

    #[test]
    fn parallel_chains_match_sequential() {
        let f: Arc<dyn Potential> = Arc::new(make_gaussian(vec![1.0, 2.0]).unwrap());
        let cfg = ChainConfig::new(0.2, 0.5, 10, 100, 2);
        let par = run_chains(f.clone(), &cfg, &[0.0, 0.0], 4, 2).unwrap();
        for (i, t) in par.iter().enumerate() {
            let mut c = cfg.clone();
            c.seed = 100 + i as u64;
            assert_eq!(t.iterates, run_chain(f.clone(), &c, &[0.0, 0.0]).unwrap().iterates);
        }
        let (fin, _) = run_replicas(f, &cfg, &[0.0, 0.0], 4, 2).unwrap();
        for (t, x) in par.iter().zip(&fin) {
            assert_eq!(t.last(), x.as_slice());
        }
    }

    #[test]
    fn bad_inputs() {
        let f: Arc<dyn Potential> = Arc::new(make_zero(1).unwrap());
        let mut cfg = ChainConfig::new(0.1, 0.1, 1, 0, 1);
        assert!(run_chain(f.clone(), &cfg, &[0.0, 0.0]).is_err());
        cfg.mu = -1.0;
        assert!(run_chain(f, &cfg, &[0.0]).is_err());
    }
}
