//! Run configuration: a TOML file with `[target]`, `[regime]`, `[chain]` and
//! `[output]` sections, resolved into concrete sampler parameters.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::asf::{
    chain_length, select_mu, select_params_composite, select_params_semismooth, ChainConfig, IterationCount,
    MomentEstimate, Regime,
};
use crate::error::{Error, Result};
use crate::potential::{Potential, SmoothnessProfile, TargetSpec};
use crate::rgo::{rejection_bound, RejectionBound, RgoConfig, RgoMode, DEFAULT_MAX_REJECTIONS};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "PROXSAMPLE_OUT";
/// Output directory when neither the config nor the environment sets one.
pub const DEFAULT_OUT_DIR: &str = "proxsample-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSection {
    pub kind: Regime,
    #[serde(default = "default_mode")]
    pub mode: RgoMode,
    /// Target accuracy; drives `mu` and the chain length.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Choose `mu` from `eps` (ignored in the strongly convex regime).
    #[serde(default = "default_true")]
    pub regularize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Initial KL divergence used for the chain length; defaults to `d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    /// `K`; derived from the KL contraction when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_iters: Option<usize>,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_init: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_x0: Option<Vec<f64>>,
    #[serde(default = "default_max_rejections")]
    pub max_rejections: u64,
    #[serde(default = "default_bundle_max_iter")]
    pub bundle_max_iter: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub target: TargetSpec,
    pub regime: RegimeSection,
    #[serde(default = "ChainSection::default")]
    pub chain: ChainSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_mode() -> RgoMode {
    RgoMode::Bundle
}
fn default_eps() -> f64 {
    0.2
}
fn default_true() -> bool {
    true
}
fn default_chains() -> usize {
    4
}
fn default_seed() -> u64 {
    1
}
fn default_max_rejections() -> u64 {
    DEFAULT_MAX_REJECTIONS
}
fn default_bundle_max_iter() -> usize {
    crate::bundle::DEFAULT_MAX_ITER
}

impl Default for ChainSection {
    fn default() -> Self {
        Self {
            n_iters: None,
            chains: default_chains(),
            seed: default_seed(),
            workers: 0,
            x_init: None,
            center_x0: None,
            max_rejections: default_max_rejections(),
            bundle_max_iter: default_bundle_max_iter(),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            target: TargetSpec::L1 { dim: 1, scale: 1.0 },
            regime: RegimeSection {
                kind: Regime::SemiSmooth,
                mode: default_mode(),
                eps: default_eps(),
                regularize: true,
                eta: None,
                delta: None,
                mu: None,
                h0: None,
            },
            chain: ChainSection::default(),
            output: OutputSection::default(),
        }
    }
}

/// Concrete parameters derived from a config, with the constants behind them.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedRun {
    pub target_name: String,
    pub dim: usize,
    pub profile: SmoothnessProfile,
    pub regime: Regime,
    pub eta: f64,
    pub delta: f64,
    pub mu: f64,
    pub eta_mu: f64,
    pub eta_mu_l1: f64,
    pub rejection_bound: RejectionBound,
    /// Derived chain length and its constants (absent when not derivable).
    pub iteration_count: Option<IterationCount>,
    pub moments: Option<MomentEstimate>,
    pub n_iters: usize,
    pub chains: usize,
    pub seeds: Vec<u64>,
    pub x_init: Vec<f64>,
    pub chain: ChainConfig,
}

impl RunConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&s).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Output directory: config value, else `$PROXSAMPLE_OUT`, else the default.
    pub fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        let f: Arc<dyn Potential> = self.target.build()?;
        self.resolve_with(&f)
    }

    pub fn resolve_with(&self, f: &Arc<dyn Potential>) -> Result<ResolvedRun> {
        let d = f.dim();
        let profile = f.profile();
        let r = &self.regime;
        if !(r.eps > 0.0) {
            return Err(Error::Config(format!("regime.eps must be positive, got {}", r.eps)));
        }
        if self.chain.chains == 0 {
            return Err(Error::Config("chain.chains must be >= 1".into()));
        }
        let rule = match r.kind {
            Regime::SemiSmooth => select_params_semismooth(&profile, d),
            Regime::Composite | Regime::StronglyConvex => select_params_composite(&profile, d),
        };
        let (eta, delta) = match (r.eta, r.delta) {
            (Some(e), Some(dl)) => (e, dl),
            _ => {
                let (e, dl) = rule.map_err(|e| Error::Config(format!("{e}; set regime.eta and regime.delta")))?;
                (r.eta.unwrap_or(e), r.delta.unwrap_or(dl))
            }
        };
        let x_min = f.minimizer().map(|m| m.x);
        let center = match &self.chain.center_x0 {
            Some(c) => c.clone(),
            None => x_min.clone().unwrap_or_else(|| vec![0.0; d]),
        };
        if center.len() != d {
            return Err(Error::Config(format!("chain.center_x0 has length {}, target has d = {d}", center.len())));
        }
        let regularize = r.regularize && r.kind != Regime::StronglyConvex;
        let (mu, moments) = match r.mu {
            Some(mu) => (mu, None),
            None if regularize => {
                let m = MomentEstimate::for_potential(f, &center, None)
                    .map_err(|e| Error::Config(format!("{e}; set regime.mu")))?;
                (select_mu(r.eps, &m)?, Some(m))
            }
            None => (0.0, None),
        };
        let modulus = mu + profile.lambda_strong;
        let h0 = r.h0.unwrap_or(d as f64);
        let iteration_count = if modulus > 0.0 {
            Some(chain_length(modulus, eta, r.eps, h0)?)
        } else {
            None
        };
        let n_iters = match (self.chain.n_iters, iteration_count) {
            (Some(k), _) => k,
            (None, Some(c)) => c.k,
            (None, None) => {
                return Err(Error::Config(
                    "no contraction (mu = 0 and no strong convexity); set chain.n_iters".into(),
                ))
            }
        };
        let x_init = match &self.chain.x_init {
            Some(x) => x.clone(),
            None => x_min.unwrap_or_else(|| vec![0.0; d]),
        };
        if x_init.len() != d {
            return Err(Error::Config(format!("chain.x_init has length {}, target has d = {d}", x_init.len())));
        }
        let chain = ChainConfig {
            eta,
            delta,
            mu,
            center_x0: center,
            n_iters,
            seed: self.chain.seed,
            target_eps: r.eps,
            regime: r.kind,
            mode: r.mode,
            max_rejections: self.chain.max_rejections,
            bundle_max_iter: self.chain.bundle_max_iter,
        };
        chain.validate()?;
        let eta_mu = eta / (1.0 + eta * mu);
        let eta_mu_l1 = eta / (1.0 + eta * mu + eta * profile.l_one);
        let rgo = RgoConfig { eta, delta, mode: r.mode, max_rejections: chain.max_rejections, bundle_max_iter: chain.bundle_max_iter };
        Ok(ResolvedRun {
            target_name: f.name().to_string(),
            dim: d,
            profile,
            regime: r.kind,
            eta,
            delta,
            mu,
            eta_mu,
            eta_mu_l1,
            rejection_bound: rejection_bound(&rgo, eta_mu, &profile, d),
            iteration_count,
            moments,
            n_iters,
            chains: self.chain.chains,
            seeds: (0..self.chain.chains as u64).map(|i| self.chain.seed.wrapping_add(i)).collect(),
            x_init,
            chain,
        })
    }
}

impl ResolvedRun {
    /// Human-readable parameter table.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let mut row = |k: &str, v: String| s.push_str(&format!("{k:<22} {v}\n"));
        row("target", format!("{} (d = {})", self.target_name, self.dim));
        row("regime", format!("{:?}", self.regime));
        row(
            "profile",
            format!(
                "alpha = {}, L_alpha = {}, L1 = {}, lambda = {}",
                self.profile.alpha, self.profile.l_alpha, self.profile.l_one, self.profile.lambda_strong
            ),
        );
        row("eta", self.eta.to_string());
        row("delta", self.delta.to_string());
        row("mu", self.mu.to_string());
        row("eta_mu", self.eta_mu.to_string());
        row("eta_mu_l1", self.eta_mu_l1.to_string());
        row(
            "rejection_bound",
            format!(
                "{} ({:?}, step condition {}; eta_mu max {})",
                self.rejection_bound.expected_proposals,
                self.rejection_bound.regime,
                if self.rejection_bound.condition_holds { "holds" } else { "VIOLATED" },
                self.rejection_bound.eta_mu_max
            ),
        );
        if let Some(m) = &self.moments {
            row("M4", format!("{} ({}); |x0 - x_min|^2 = {}", m.m4, m.source, m.dist_sq));
        }
        match &self.iteration_count {
            Some(c) => row(
                "K (derived)",
                format!(
                    "{} = ceil(ln(H0 / KL) / (2 ln(1 + (mu + lambda) eta))) with H0 = {}, KL = eps^2/2 = {}, ln(1 + (mu + lambda) eta) = {}",
                    c.k, c.h0, c.kl_target, c.contraction
                ),
            ),
            None => row("K (derived)", "n/a (no contraction)".into()),
        }
        row("K (used)", self.n_iters.to_string());
        row("chains", format!("{} (seeds {}..={})", self.chains, self.seeds[0], self.seeds[self.seeds.len() - 1]));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(s: &str) -> RunConfig {
        RunConfig::from_toml(s).unwrap()
    }

    #[test]
    fn defaults_round_trip() {
        let d = RunConfig::default();
        let back = cfg(&d.to_toml());
        assert_eq!(back, d);
    }

    #[test]
    fn semi_smooth_abs_parameters() {
        // L0 = 1 in the sense of a scale-1/2 l1 (diameter 1)
        let c = cfg("[target]\nname = \"l1\"\ndim = 1\nscale = 0.5\n[regime]\nkind = \"semi-smooth\"\nregularize = false\n[chain]\nn_iters = 5\n");
        let r = c.resolve().unwrap();
        assert_eq!((r.eta, r.delta, r.mu), (0.25, 1.0, 0.0));
        assert_eq!(r.n_iters, 5);
    }

    #[test]
    fn composite_smooth_parameters() {
        let c = cfg("[target]\nname = \"gaussian\"\nprecision = [1,1,1,1,1,1,1,1,1,1]\n[regime]\nkind = \"composite\"\nregularize = false\n[chain]\nn_iters = 3\n");
        let r = c.resolve().unwrap();
        assert!((r.eta - 0.1).abs() < 1e-16);
    }

    #[test]
    fn strongly_convex_echoes_zero_mu() {
        let c = cfg("[target]\nname = \"gaussian\"\nprecision = [2.0]\n[regime]\nkind = \"strongly-convex\"\n");
        let r = c.resolve().unwrap();
        assert_eq!(r.mu, 0.0);
        assert_eq!(r.profile.lambda_strong, 2.0);
        assert!(r.iteration_count.is_some());
        assert!(r.table().contains("lambda = 2"));
    }

    #[test]
    fn laplace_derived_chain_length() {
        let r = RunConfig::default().resolve().unwrap();
        assert_eq!(r.eta, 1.0 / 16.0);
        assert!((r.mu - 0.2 / (2f64.sqrt() * 24f64.sqrt())).abs() < 1e-15);
        assert_eq!(r.n_iters, 1086);
        assert_eq!(r.seeds, vec![1, 2, 3, 4]);
    }

    #[test]
    fn config_errors() {
        let e = RunConfig::from_toml("[target]\nname = \"bogus\"\ndim = 1\n[regime]\nkind = \"semi-smooth\"\n").unwrap_err();
        let msg = e.to_string();
        for n in TargetSpec::NAMES {
            assert!(msg.contains(n), "{msg}");
        }
        assert!(e.is_usage());
        assert!(RunConfig::from_toml("[target]\nname = \"l1\"\ndim = 1\n[regime]\nkind = \"semi-smooth\"\nbogus = 1\n").is_err());
        let c = cfg("[target]\nname = \"hinge\"\ndim = 3\n[regime]\nkind = \"semi-smooth\"\nregularize = false\n");
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
        let c = cfg("[target]\nname = \"l1\"\ndim = 2\n[regime]\nkind = \"semi-smooth\"\n[chain]\nx_init = [0.0]\n");
        assert!(c.resolve().is_err());
    }

    #[test]
    fn out_dir_precedence() {
        let mut c = RunConfig::default();
        c.output.dir = Some(PathBuf::from("/tmp/x"));
        assert_eq!(c.out_dir(), PathBuf::from("/tmp/x"));
    }
}
