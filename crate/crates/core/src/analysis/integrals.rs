//! The modified Gaussian integral
//! `I = (2 π^(d/2) / Γ(d/2)) ∫_0^∞ exp(-r²/(2η) - a r^(α+1)) r^(d-1) dr`
//! and the log-gamma inequality it relies on.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_W: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GAUSS_W: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// G7-K15 on `[a, b]`: (Kronrod estimate, |Kronrod - Gauss|).
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = KRONROD_W[7] * fc;
    let mut g = GAUSS_W[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += KRONROD_W[i] * s;
        if i % 2 == 1 {
            g += GAUSS_W[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod integration to relative tolerance `rtol`.
pub fn integrate_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, rtol: f64) -> f64 {
    let mut stack = vec![(a, b, gk15(&f, a, b))];
    let mut total = 0.0;
    let mut done = Vec::new();
    let whole = stack[0].2 .0.abs();
    while let Some((lo, hi, (v, e))) = stack.pop() {
        if e <= rtol * whole.max(1e-300) * ((hi - lo) / (b - a)).max(1e-3) || hi - lo < 1e-12 * (b - a) {
            done.push(v);
            continue;
        }
        let mid = 0.5 * (lo + hi);
        stack.push((lo, mid, gk15(&f, lo, mid)));
        stack.push((mid, hi, gk15(&f, mid, hi)));
    }
    done.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    for v in done {
        total += v;
    }
    total
}

/// `ln I` for the modified Gaussian integral.
pub fn log_modified_gaussian_integral(alpha: f64, eta: f64, a: f64, d: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) || !(eta > 0.0 && eta.is_finite()) || !(a >= 0.0 && a.is_finite()) || d == 0 {
        return Err(Error::invalid(format!(
            "modified Gaussian integral needs alpha in [0,1], eta > 0, a >= 0, d >= 1 (got {alpha}, {eta}, {a}, {d})"
        )));
    }
    let df = d as f64;
    let p = alpha + 1.0;
    let log_phi = |r: f64| -> f64 {
        let base = -r * r / (2.0 * eta) - a * r.powf(p);
        if d == 1 {
            base
        } else if r == 0.0 {
            f64::NEG_INFINITY
        } else {
            base + (df - 1.0) * r.ln()
        }
    };
    // locate the mode of log_phi on a coarse scale, then scale the integrand by it
    let scale = (eta * df).sqrt().max(eta.sqrt());
    let mut peak = 0.0;
    let mut best = log_phi(0.0);
    let steps = 4000;
    for i in 1..=steps {
        let r = 20.0 * scale * i as f64 / steps as f64;
        let v = log_phi(r);
        if v > best {
            best = v;
            peak = r;
        }
    }
    // the tail beyond r_max is below exp(-60) relative to the peak
    let mut r_max = peak + scale;
    while log_phi(r_max) - best > -60.0 {
        r_max += scale;
    }
    let integrand = |r: f64| (log_phi(r) - best).exp();
    let mut s = 0.0;
    let pts = [0.0, 0.5 * peak, peak, 0.5 * (peak + r_max), r_max];
    for w in pts.windows(2) {
        if w[1] > w[0] {
            s += integrate_adaptive(integrand, w[0], w[1], 1e-12);
        }
    }
    let log_sphere = std::f64::consts::LN_2 + 0.5 * df * std::f64::consts::PI.ln() - ln_gamma(0.5 * df);
    Ok(log_sphere + best + s.ln())
}

pub fn modified_gaussian_integral(alpha: f64, eta: f64, a: f64, d: usize) -> Result<f64> {
    Ok(log_modified_gaussian_integral(alpha, eta, a, d)?.exp())
}

/// Largest `a` with `2 a (η d)^((α+1)/2) <= 1`.
pub fn boundary_a(alpha: f64, eta: f64, d: usize) -> f64 {
    1.0 / (2.0 * (eta * d as f64).powf(0.5 * (alpha + 1.0)))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PropKeyPoint {
    pub alpha: f64,
    pub eta: f64,
    pub a: f64,
    pub d: usize,
    /// `I / ((2πη)^(d/2) / 2)`.
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropKeyReport {
    pub points: Vec<PropKeyPoint>,
    pub worst_ratio: f64,
    pub all_pass: bool,
}

/// Relative tolerance on `I >= (2πη)^(d/2) / 2`.
pub const PROP_KEY_RTOL: f64 = 1e-6;

/// Checks `I >= (2πη)^(d/2) / 2` on points satisfying `2a(ηd)^((α+1)/2) <= 1`.
pub fn check_prop_key_bound(grid: &[(f64, f64, f64, usize)]) -> Result<PropKeyReport> {
    let mut points = Vec::with_capacity(grid.len());
    for &(alpha, eta, a, d) in grid {
        let lhs = 2.0 * a * (eta * d as f64).powf(0.5 * (alpha + 1.0));
        if lhs > 1.0 + 1e-12 {
            return Err(Error::invalid(format!(
                "grid point (alpha={alpha}, eta={eta}, a={a}, d={d}) violates the step condition: {lhs} > 1"
            )));
        }
        let log_i = log_modified_gaussian_integral(alpha, eta, a, d)?;
        let log_bound = 0.5 * d as f64 * (2.0 * std::f64::consts::PI * eta).ln() - std::f64::consts::LN_2;
        let ratio = (log_i - log_bound).exp();
        points.push(PropKeyPoint {
            alpha,
            eta,
            a,
            d,
            ratio,
            pass: ratio >= 1.0 - PROP_KEY_RTOL,
        });
    }
    let worst_ratio = points.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
    let all_pass = points.iter().all(|p| p.pass);
    Ok(PropKeyReport { points, worst_ratio, all_pass })
}

/// The default grid: α ∈ {0, .25, .5, .75, 1}, d ∈ {1, 2, 5, 10, 20} and
/// a ∈ {0, half-boundary, boundary}, with η from the semi-smooth rule for
/// `L_α = 1`.
pub fn prop_key_grid() -> Vec<(f64, f64, f64, usize)> {
    let mut g = Vec::new();
    for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
        for d in [1usize, 2, 5, 10, 20] {
            let p = 2.0 / (alpha + 1.0);
            let eta = (alpha + 1.0f64).powf(p) / (2f64.powf(p) * d as f64);
            let ab = boundary_a(alpha, eta, d);
            for a in [0.0, 0.5 * ab, ab] {
                g.push((alpha, eta, a, d));
            }
        }
    }
    g
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WendelPoint {
    pub t: f64,
    pub s: f64,
    pub lower: f64,
    pub ratio: f64,
    pub upper: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WendelReport {
    pub points: Vec<WendelPoint>,
    pub all_pass: bool,
}

/// `t^(1-s) <= Γ(t+1)/Γ(t+s) <= (t+s)^(1-s)` for `t > 0`, `0 < s < 1`.
pub fn wendel_check(ts: &[f64], ss: &[f64]) -> Result<WendelReport> {
    let mut points = Vec::new();
    for &t in ts {
        for &s in ss {
            if !(t > 0.0) || !(s > 0.0 && s < 1.0) {
                return Err(Error::invalid(format!("Wendel check needs t > 0, 0 < s < 1 (got t={t}, s={s})")));
            }
            let ratio = (ln_gamma(t + 1.0) - ln_gamma(t + s)).exp();
            let lower = t.powf(1.0 - s);
            let upper = (t + s).powf(1.0 - s);
            let tol = 1e-10;
            points.push(WendelPoint {
                t,
                s,
                lower,
                ratio,
                upper,
                pass: lower <= ratio * (1.0 + tol) && ratio <= upper * (1.0 + tol),
            });
        }
    }
    let all_pass = points.iter().all(|p| p.pass);
    Ok(WendelReport { points, all_pass })
}
