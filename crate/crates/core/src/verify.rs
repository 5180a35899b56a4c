//! Verification suites. Each check compares a measured quantity against the
//! bound it must respect; suites aggregate checks into a pass/fail report.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::analysis::{
    acceptance_probability_oracle, check_prop_key_bound, ks_one_sample, ks_two_sample, prop_key_grid,
    sandwich_suite, tv_hist, wendel_check, QuadOptions, QuadratureDensity, SandwichReport, KsResult,
};
use crate::asf::{
    asf_step, chain_length, run_replicas, select_mu, select_params_composite, select_params_semismooth,
    ChainConfig, MomentEstimate,
};
use crate::bundle::{iteration_bound, prox_bundle, t1_upper_bound, ProxObjective, DEFAULT_MAX_ITER};
use crate::error::{Error, Result};
use crate::potential::{
    make_dead_zone, make_gaussian, make_l1, make_power_norm, make_quad_plus_l1, Potential, RegularizedTarget,
    SmoothnessProfile,
};
use crate::rgo::{build_envelope, envelope_h2, rejection_bound, rgo_sample, RgoConfig, RgoMode};

/// Significance level of every KS test.
pub const KS_LEVEL: f64 = 0.01;
/// End-to-end TV target plus histogram-estimator slack.
pub const TV_TARGET: f64 = 0.2 + 0.03;
/// Median bundle iteration count allowed at the default step sizes.
pub const MEDIAN_J_MAX: f64 = 10.0;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    /// Passes iff `value <= threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
            detail: detail.into(),
        }
    }

    /// Passes iff `value >= threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value >= threshold,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: value={:.6} threshold={:.6} {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.threshold,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl SuiteReport {
    pub fn new(suite: Suite, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self {
            suite: suite.to_string(),
            checks,
            pass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Suite {
    Sandwich,
    PropKey,
    AcceptanceBounds,
    BundleBounds,
    Stationarity,
    TvDecay,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Sandwich,
        Suite::PropKey,
        Suite::AcceptanceBounds,
        Suite::BundleBounds,
        Suite::Stationarity,
        Suite::TvDecay,
    ];
    pub const NAMES: [&'static str; 7] = [
        "sandwich",
        "prop-key",
        "acceptance-bounds",
        "bundle-bounds",
        "stationarity",
        "tv-decay",
        "all",
    ];

    /// Parses a selector; `all` expands to every suite.
    pub fn parse_selector(s: &str) -> Result<Vec<Suite>> {
        if s == "all" {
            return Ok(Self::ALL.to_vec());
        }
        Ok(vec![s.parse()?])
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Sandwich => "sandwich",
            Suite::PropKey => "prop-key",
            Suite::AcceptanceBounds => "acceptance-bounds",
            Suite::BundleBounds => "bundle-bounds",
            Suite::Stationarity => "stationarity",
            Suite::TvDecay => "tv-decay",
        };
        f.write_str(s)
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown suite `{s}`; available: {}", Self::NAMES.join(", "))))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Worker threads for replica runs (0 = all cores).
    pub workers: usize,
    /// Multiplier on sample sizes; 1 is the full-size run.
    pub scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            workers: 0,
            scale: 1.0,
        }
    }
}

impl VerifyOptions {
    fn n(&self, full: usize) -> usize {
        ((full as f64 * self.scale).ceil() as usize).max(1)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(1_000_003).wrapping_add(stream))
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Sandwich => sandwich_checks(opts)?,
        Suite::PropKey => prop_key_checks()?,
        Suite::AcceptanceBounds => {
            let mut c = rejection_checks_semismooth(opts)?;
            c.extend(rejection_checks_smooth_composite(opts)?);
            c.extend(acceptance_oracle_checks()?);
            c
        }
        Suite::BundleBounds => {
            let mut c = bundle_iteration_checks(opts)?;
            c.extend(bundle_dimension_checks(opts)?);
            c.extend(bundle_trace_checks(opts)?);
            c
        }
        Suite::Stationarity => {
            let mut c = stationarity_checks(opts)?;
            c.extend(mode_equivalence_checks(opts)?);
            c.extend(rgo_unbiased_checks(opts)?);
            c
        }
        Suite::TvDecay => {
            let mut c = vec![tv_end_to_end(opts)?];
            c.extend(tv_trend_checks(opts)?);
            c
        }
    };
    Ok(SuiteReport::new(suite, checks))
}

/// Verification zoo in dimension `d` (normalizable targets only).
pub fn verification_zoo(d: usize) -> Result<Vec<Arc<dyn Potential>>> {
    let spread = |lo: f64, hi: f64| -> Vec<f64> {
        (0..d)
            .map(|i| if d == 1 { hi } else { lo + (hi - lo) * i as f64 / (d - 1) as f64 })
            .collect()
    };
    Ok(vec![
        Arc::new(make_l1(d, 1.0)?),
        Arc::new(make_power_norm(d, 0.0, 1.0)?),
        Arc::new(make_power_norm(d, 0.5, 1.0)?),
        Arc::new(make_quad_plus_l1(spread(0.5, 2.0), 1.0)?),
        Arc::new(make_dead_zone(d, 1.0)?),
        Arc::new(make_gaussian(spread(0.5, 2.0))?),
    ])
}

/// Default `(eta, delta)` for a profile: the semi-smooth rule when there is
/// no smooth part, else the composite rule.
pub fn default_params(profile: &SmoothnessProfile, d: usize) -> Result<(f64, f64)> {
    if profile.l_one == 0.0 {
        select_params_semismooth(profile, d)
    } else {
        select_params_composite(profile, d)
    }
}

/// A prox center `y = x + sqrt(eta) z` with `x` from the target when it can
/// be sampled exactly, else `x ~ N(0, 4 I)`.
fn draw_center(f: &dyn Potential, eta: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let x = f
        .sample_exact(rng as &mut dyn RngCore)
        .unwrap_or_else(|| (0..f.dim()).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect());
    x.iter()
        .map(|v| v + eta.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mean proposals per accepted sample over `n` RGO calls vs the bound, with
/// 3 standard errors of slack.
fn rejection_check(
    label: &str,
    f: Arc<dyn Potential>,
    eta: f64,
    delta: f64,
    mode: RgoMode,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Check> {
    let d = f.dim();
    let target = RegularizedTarget::plain(f.clone());
    let cfg = RgoConfig::new(eta, delta, mode);
    let bound = rejection_bound(&cfg, eta, &f.profile(), d);
    let mut props = Vec::with_capacity(n);
    for _ in 0..n {
        let y = draw_center(f.as_ref(), eta, rng);
        let obj = ProxObjective::new(target.clone(), eta, y)?;
        props.push(rgo_sample(&obj, &cfg, rng)?.proposals() as f64);
    }
    let (m, sd) = mean_sd(&props);
    let slack = 3.0 * sd / (n as f64).sqrt();
    let mut c = Check::at_most(
        format!("{label} {} d={d} {:?}", f.name(), mode).to_lowercase(),
        m,
        bound.expected_proposals + slack,
        format!(
            "mean proposals over {n} calls; bound {:.4} + 3se {:.4}; eta={eta:.3e} delta={:.3e}",
            bound.expected_proposals,
            slack,
            cfg.effective_delta()
        ),
    );
    c.pass &= bound.condition_holds;
    Ok(c)
}

/// l1 targets in d ∈ {1, 5, 20}: proposals ≤ 2 (exact) and ≤ 2e^δ (bundle).
pub fn rejection_checks_semismooth(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = opts.rng(1);
    let mut out = Vec::new();
    for d in [1usize, 5, 20] {
        let f: Arc<dyn Potential> = Arc::new(make_l1(d, 1.0)?);
        let (eta, delta) = select_params_semismooth(&f.profile(), d)?;
        for mode in [RgoMode::Exact, RgoMode::Bundle] {
            out.push(rejection_check("rejections", f.clone(), eta, delta, mode, opts.n(10_000), &mut rng)?);
        }
    }
    Ok(out)
}

/// Gaussian (d ∈ {1, 10}) and quad+l1 (d ∈ {2, 10}) targets with
/// `eta_mu <= 1/(L1 d)`: proposals ≤ e^(1/2+δ) and ≤ 2e^(1/2+δ).
pub fn rejection_checks_smooth_composite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = opts.rng(2);
    let mut out = Vec::new();
    for d in [1usize, 10] {
        let f: Arc<dyn Potential> = Arc::new(make_gaussian(vec![1.0; d])?);
        let (eta, delta) = select_params_composite(&f.profile(), d)?;
        for mode in [RgoMode::Exact, RgoMode::Bundle] {
            out.push(rejection_check("rejections", f.clone(), eta, delta, mode, opts.n(10_000), &mut rng)?);
        }
    }
    for d in [2usize, 10] {
        let f: Arc<dyn Potential> = Arc::new(make_quad_plus_l1(vec![1.0; d], 1.0)?);
        let (eta, delta) = select_params_composite(&f.profile(), d)?;
        for mode in [RgoMode::Exact, RgoMode::Bundle] {
            out.push(rejection_check("rejections", f.clone(), eta, delta, mode, opts.n(10_000), &mut rng)?);
        }
    }
    Ok(out)
}

/// Quadrature acceptance probabilities against their lower bounds.
pub fn acceptance_oracle_checks() -> Result<Vec<Check>> {
    let abs: Arc<dyn Potential> = Arc::new(make_l1(1, 1.0)?);
    let obj = ProxObjective::new(RegularizedTarget::plain(abs), 0.25, vec![2.0])?;
    let mut out = Vec::new();
    let (h1, ..) = build_envelope(&obj, &RgoConfig::new(0.25, 0.25, RgoMode::Exact))?;
    let a = acceptance_probability_oracle(&obj, &h1)?;
    out.push(Check::at_least("acceptance |x| exact", a.ratio, 0.5, "quadrature ratio, eta=0.25 y=2"));
    let (h1, ..) = build_envelope(&obj, &RgoConfig::new(0.25, 0.25, RgoMode::Bundle))?;
    let a = acceptance_probability_oracle(&obj, &h1)?;
    out.push(Check::at_least(
        "acceptance |x| bundle",
        a.ratio,
        (-0.25f64).exp() / 2.0,
        "quadrature ratio, eta=0.25 y=2 delta=0.25",
    ));
    let g: Arc<dyn Potential> = Arc::new(make_gaussian(vec![1.0])?);
    let obj = ProxObjective::new(RegularizedTarget::plain(g), 1.0, vec![0.7])?;
    let (h1, ..) = build_envelope(&obj, &RgoConfig::new(1.0, 0.0, RgoMode::Exact))?;
    let a = acceptance_probability_oracle(&obj, &h1)?;
    out.push(Check::at_least(
        "acceptance gaussian exact",
        a.ratio,
        (-0.5f64).exp(),
        "quadrature ratio, eta=1 d=1",
    ));
    for c in &mut out {
        c.pass &= c.value <= 1.0 + 1e-8;
    }
    Ok(out)
}

fn iteration_stats(
    f: &Arc<dyn Potential>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, usize, f64)> {
    let d = f.dim();
    let profile = f.profile();
    let (eta, delta) = default_params(&profile, d)?;
    let target = RegularizedTarget::plain(f.clone());
    let mut js = Vec::with_capacity(n);
    let mut over = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n {
        let y = draw_center(f.as_ref(), eta, rng);
        let obj = ProxObjective::new(target.clone(), eta, y)?;
        let r = prox_bundle(&obj, delta, DEFAULT_MAX_ITER)?;
        let j0 = iteration_bound(&profile, obj.eta_mu(), delta, r.t1());
        if r.iterations > j0 {
            over += 1;
        }
        worst = worst.max(r.iterations as f64 - j0 as f64);
        js.push(r.iterations as f64);
    }
    Ok((js, over, worst))
}

/// Measured `J <= j0(t1)` on every zoo target (d = 5), plus median `J <= 10`.
pub fn bundle_iteration_checks(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = opts.rng(3);
    let mut out = Vec::new();
    for f in verification_zoo(5)? {
        let n = opts.n(1_000);
        let (mut js, over, worst) = iteration_stats(&f, n, &mut rng)?;
        out.push(Check::at_most(
            format!("bundle j<=j0 {} alpha={} d=5", f.name(), f.profile().alpha),
            over as f64,
            0.0,
            format!("draws exceeding the bound out of {n}; max J - j0 = {worst}"),
        ));
        let med = median(&mut js);
        out.push(Check::at_most(
            format!("bundle median j {} alpha={} d=5", f.name(), f.profile().alpha),
            med,
            MEDIAN_J_MAX,
            format!("max J = {}", js.last().copied().unwrap_or(0.0)),
        ));
    }
    Ok(out)
}

/// Median `J` stays O(1) for l1 as d grows over {1, 5, 20, 100}.
pub fn bundle_dimension_checks(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = opts.rng(4);
    let mut out = Vec::new();
    for d in [1usize, 5, 20, 100] {
        let f: Arc<dyn Potential> = Arc::new(make_l1(d, 1.0)?);
        let n = opts.n(1_000);
        let (mut js, over, _) = iteration_stats(&f, n, &mut rng)?;
        let med = median(&mut js);
        let mut c = Check::at_most(
            format!("bundle median j l1 d={d}"),
            med,
            MEDIAN_J_MAX,
            format!("{over} of {n} draws exceed j0"),
        );
        c.pass &= over == 0;
        out.push(c);
    }
    Ok(out)
}

/// Gap-trace invariants: descent recursion, the per-step linearization bound
/// and the `t1` bound, with a tight tolerance `delta = 1e-3` and `mu > 0`.
pub fn bundle_trace_checks(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = opts.rng(5);
    let mut out = Vec::new();
    for f in verification_zoo(3)? {
        let d = f.dim();
        let profile = f.profile();
        let (eta, _) = default_params(&profile, d)?;
        let eta = 4.0 * eta;
        let target = RegularizedTarget::new(f.clone(), 0.1, vec![0.5; d])?;
        let (mut descent, mut lin, mut t1) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for _ in 0..opts.n(200) {
            let y = draw_center(f.as_ref(), eta, &mut rng);
            let obj = ProxObjective::new(target.clone(), eta, y)?;
            let r = prox_bundle(&obj, 1e-3, DEFAULT_MAX_ITER)?;
            let em = obj.eta_mu();
            for w in r.trace.windows(2) {
                descent = descent.max(w[1].gap + w[1].step * w[1].step / (2.0 * em) - w[0].gap);
            }
            for rec in &r.trace {
                lin = lin.max(rec.gap - profile.linearization_bound(rec.step));
            }
            t1 = t1.max(r.t1() - t1_upper_bound(&obj));
        }
        out.push(Check::at_most(format!("bundle descent {}", f.name()), descent, 1e-9, "max t_{j+1} + |dx|^2/(2 eta_mu) - t_j"));
        out.push(Check::at_most(format!("bundle step bound {}", f.name()), lin, 1e-10, "max t_j - linearization bound"));
        out.push(Check::at_most(format!("bundle t1 bound {}", f.name()), t1, 1e-10, "max t_1 - bound"));
    }
    Ok(out)
}

pub fn prop_key_checks() -> Result<Vec<Check>> {
    let grid = prop_key_grid();
    let r = check_prop_key_bound(&grid)?;
    let failures = r.points.iter().filter(|p| !p.pass).count();
    let mut out = vec![Check::at_least(
        "prop-key worst ratio",
        r.worst_ratio,
        1.0 - crate::analysis::PROP_KEY_RTOL,
        format!("{} grid points, {failures} failures", grid.len()),
    )];
    out[0].pass &= grid.len() >= 50;
    let w = wendel_check(&[0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0, 1e4], &[0.01, 0.25, 0.5, 0.75, 0.99])?;
    out.push(Check::at_most(
        "wendel",
        w.points.iter().filter(|p| !p.pass).count() as f64,
        0.0,
        format!("{} (t, s) pairs", w.points.len()),
    ));
    Ok(out)
}

/// `h1 <= g_y^eta <= h2` over the zoo in d ∈ {1, 2, 5}; `h2` wherever the
/// exact prox point is available.
pub fn sandwich_checks(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = opts.rng(6);
    let mut out = Vec::new();
    let mut total = SandwichReport::empty();
    for d in [1usize, 2, 5] {
        for f in verification_zoo(d)? {
            let profile = f.profile();
            let (eta, delta) = default_params(&profile, d)?;
            let x0: Vec<f64> = (0..d).map(|i| 0.3 * i as f64).collect();
            let target = RegularizedTarget::new(f.clone(), 0.05, x0)?;
            let mut rep = SandwichReport::empty();
            for _ in 0..opts.n(20) {
                let y = draw_center(f.as_ref(), eta, &mut rng);
                let obj = ProxObjective::new(target.clone(), eta, y)?;
                let h2 = if f.has_prox() {
                    let xs = obj.prox_point()?;
                    Some(envelope_h2(xs.clone(), obj.value(&xs), profile, &obj))
                } else {
                    None
                };
                let modes: &[RgoMode] = if f.has_prox() { &[RgoMode::Exact, RgoMode::Bundle] } else { &[RgoMode::Bundle] };
                for &mode in modes {
                    let (h1, ..) = build_envelope(&obj, &RgoConfig::new(eta, delta, mode))?;
                    // one probe budget per target and dimension regardless of modes
                    let probes = 300 / modes.len();
                    rep.merge(&sandwich_suite(&obj, &h1, h2.as_ref(), probes, &mut rng));
                }
            }
            total.merge(&rep);
            if !rep.pass {
                out.push(Check::at_most(
                    format!("sandwich {} d={d}", f.name()),
                    rep.violations as f64,
                    0.0,
                    format!("min slack h1 {:.3e} h2 {:?}", rep.min_slack_h1, rep.min_slack_h2),
                ));
            }
        }
    }
    let mut c = Check::at_most(
        "sandwich zoo violations",
        total.violations as f64,
        0.0,
        format!(
            "{} probes; min slack h1 {:.3e}, h2 {:.3e}",
            total.probes,
            total.min_slack_h1,
            total.min_slack_h2.unwrap_or(f64::NAN)
        ),
    );
    c.pass &= total.probes as f64 >= 1e5 * opts.scale.min(1.0);
    out.insert(0, c);
    Ok(out)
}

fn normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

fn laplace_cdf(t: f64) -> f64 {
    if t < 0.0 {
        0.5 * t.exp()
    } else {
        1.0 - 0.5 * (-t).exp()
    }
}

fn ks_check(name: String, r: KsResult, n: usize) -> Check {
    Check::at_least(name, r.p_value, KS_LEVEL, format!("KS statistic {:.5}, n={n}", r.statistic))
}

/// Stationary start, one Gibbs sweep, KS against the target.
pub fn stationarity_checks(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let targets: Vec<(Arc<dyn Potential>, fn(f64) -> f64)> = vec![
        (Arc::new(make_gaussian(vec![1.0])?), normal_cdf),
        (Arc::new(make_l1(1, 1.0)?), laplace_cdf),
    ];
    for (k, (f, cdf)) in targets.into_iter().enumerate() {
        let (eta, delta) = default_params(&f.profile(), 1)?;
        let target = RegularizedTarget::plain(f.clone());
        for mode in [RgoMode::Exact, RgoMode::Bundle] {
            let mut rng = opts.rng(10 + 2 * k as u64 + (mode == RgoMode::Bundle) as u64);
            let cfg = RgoConfig::new(eta, delta, mode);
            let n = opts.n(100_000);
            let mut xs = Vec::with_capacity(n);
            for _ in 0..n {
                let x0 = f.sample_exact(&mut rng as &mut dyn RngCore).expect("exact sampler");
                let (_, x1, _) = asf_step(&target, &x0, &cfg, &mut rng)?;
                xs.push(x1[0]);
            }
            let r = ks_one_sample(&xs, cdf)?;
            out.push(ks_check(format!("stationary {} {:?}", f.name(), mode).to_lowercase(), r, n));
        }
    }
    Ok(out)
}

/// Exact and bundle RGO draws on 1D l1 agree in distribution.
pub fn mode_equivalence_checks(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let f: Arc<dyn Potential> = Arc::new(make_l1(1, 1.0)?);
    let target = RegularizedTarget::plain(f);
    let mut out = Vec::new();
    for (k, y) in [0.1, 2.0].into_iter().enumerate() {
        let obj = ProxObjective::new(target.clone(), 0.25, vec![y])?;
        let n = opts.n(100_000);
        let draw = |mode, stream| -> Result<Vec<f64>> {
            let mut rng = opts.rng(stream);
            let cfg = RgoConfig::new(0.25, 0.25, mode);
            (0..n).map(|_| Ok(rgo_sample(&obj, &cfg, &mut rng)?.x[0])).collect()
        };
        let a = draw(RgoMode::Exact, 20 + 2 * k as u64)?;
        let b = draw(RgoMode::Bundle, 21 + 2 * k as u64)?;
        out.push(ks_check(format!("mode equivalence l1 y={y}"), ks_two_sample(&a, &b)?, n));
    }
    Ok(out)
}

/// RGO draws match the quadrature CDF of `exp(-g_y^eta)`.
pub fn rgo_unbiased_checks(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let cases: Vec<(Arc<dyn Potential>, f64, f64, f64)> = vec![
        (Arc::new(make_l1(1, 1.0)?), 0.25, 0.25, 2.0),
        (Arc::new(make_power_norm(1, 0.5, 1.0)?), 0.5, 0.1, -1.0),
        (Arc::new(make_dead_zone(1, 1.0)?), 1.0, 0.5, 1.5),
    ];
    for (k, (f, eta, delta, y)) in cases.into_iter().enumerate() {
        let obj = ProxObjective::new(RegularizedTarget::new(f.clone(), 0.1, vec![0.0])?, eta, vec![y])?;
        let truth = QuadratureDensity::from_fn(1, |x| obj.value(x), &[y], &[f.kinks(0)], QuadOptions::for_dim(1))?;
        let mut rng = opts.rng(30 + k as u64);
        let cfg = RgoConfig::new(eta, delta, RgoMode::Bundle);
        let n = opts.n(100_000);
        let xs: Vec<f64> = (0..n).map(|_| Ok(rgo_sample(&obj, &cfg, &mut rng)?.x[0])).collect::<Result<_>>()?;
        let r = ks_one_sample(&xs, |t| truth.cdf_at(t).unwrap_or(f64::NAN))?;
        out.push(ks_check(format!("rgo unbiased {} y={y}", f.name()), r, n));
    }
    Ok(out)
}

/// End-to-end TV on the 1D Laplace target with regularization `mu` chosen
/// for `eps = 0.2`, the default `(eta, delta)` and the contraction-derived chain length.
pub fn tv_end_to_end(opts: &VerifyOptions) -> Result<Check> {
    let eps = 0.2;
    let f: Arc<dyn Potential> = Arc::new(make_l1(1, 1.0)?);
    let x0 = vec![0.0];
    let m = MomentEstimate::for_potential(&f, &x0, None)?;
    let mu = select_mu(eps, &m)?;
    let (eta, delta) = select_params_semismooth(&f.profile(), 1)?;
    let k = chain_length(mu, eta, eps, 1.0)?;
    let mut cfg = ChainConfig::new(eta, delta, k.k, opts.seed, 1);
    cfg.mu = mu;
    cfg.center_x0 = x0.clone();
    cfg.target_eps = eps;
    let n = opts.n(10_000);
    let workers = if opts.workers == 0 { 16 } else { opts.workers };
    let (xs, _) = run_replicas(f.clone(), &cfg, &m.x_min, n, workers)?;
    let truth = QuadratureDensity::for_potential(f.as_ref())?;
    let r = tv_hist(&xs, &truth, &|x: &[f64]| f.value(x), None)?;
    Ok(Check::at_most(
        "tv end-to-end laplace",
        r.tv,
        TV_TARGET,
        format!(
            "{n} replicas, K={}, mu={mu:.5}, eta={eta}, delta={delta}, bins={}",
            k.k, r.bins
        ),
    ))
}

/// TV to the target every 10 sweeps from a far start on a strongly convex
/// 1D target is non-increasing up to 3 noise scales, and decreases overall.
pub fn tv_trend_checks(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let f: Arc<dyn Potential> = Arc::new(make_quad_plus_l1(vec![0.1], 1.0)?);
    let (eta, delta) = select_params_composite(&f.profile(), 1)?;
    let truth = QuadratureDensity::for_potential(f.as_ref())?;
    let n = opts.n(10_000);
    let start = vec![20.0];
    let mut tvs = Vec::new();
    let mut noise = Vec::new();
    for block in 0..=20 {
        let cfg = ChainConfig::new(eta, delta, 10 * block, opts.seed.wrapping_add(7_777), 1);
        let (xs, _) = run_replicas(f.clone(), &cfg, &start, n, opts.workers)?;
        let r = tv_hist(&xs, &truth, &|x: &[f64]| f.value(x), None)?;
        tvs.push(r.tv);
        noise.push(r.noise_scale);
    }
    let mut worst = f64::NEG_INFINITY;
    for i in 1..tvs.len() {
        worst = worst.max(tvs[i] - tvs[i - 1] - 3.0 * noise[i].max(noise[i - 1]));
    }
    Ok(vec![
        Check::at_most(
            "tv trend non-increasing",
            worst,
            0.0,
            format!("max TV increase beyond 3 noise scales; TV every 10 sweeps: {}", fmt_list(&tvs)),
        ),
        Check::at_most(
            "tv trend decrease",
            tvs[tvs.len() - 1],
            0.5 * tvs[0],
            format!("final TV vs half the initial TV ({:.4})", tvs[0]),
        ),
    ])
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}
