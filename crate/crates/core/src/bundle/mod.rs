//! Proximal bundle subroutine: computes a `delta`-solution of
//! `min_x g(x) + |x - y|^2 / (2 eta)` from subgradient queries only, by
//! minimizing a growing cutting-plane model of `f` plus the exact quadratic
//! terms.

mod qp;

use serde::Serialize;

pub use qp::project_simplex;
use qp::{DualProblem, ProxQuadratic};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist, dist_sq, dot, norm};
use crate::potential::{Potential, RegularizedTarget, SmoothnessProfile};

/// Default cap on bundle iterations.
pub const DEFAULT_MAX_ITER: usize = 1_000;
/// Default cap on dual projected-gradient iterations per model solve.
pub const DEFAULT_MAX_DUAL_ITER: usize = 100_000;

/// `g_y^eta(x) = g(x) + |x - y|^2 / (2 eta)` for a fixed center `y`.
#[derive(Debug, Clone)]
pub struct ProxObjective {
    pub target: RegularizedTarget,
    pub eta: f64,
    pub y: Vec<f64>,
}

impl ProxObjective {
    pub fn new(target: RegularizedTarget, eta: f64, y: Vec<f64>) -> Result<Self> {
        check_dim(target.dim(), y.len())?;
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be positive, got {eta}")));
        }
        Ok(Self { target, eta, y })
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    /// `eta / (1 + eta mu)`: inverse strong-convexity modulus of `g_y^eta`.
    pub fn eta_mu(&self) -> f64 {
        self.eta / (1.0 + self.eta * self.target.mu)
    }

    /// `eta / (1 + eta mu + eta L1)`.
    pub fn eta_mu_l1(&self) -> f64 {
        let l1 = self.target.base.profile().l_one;
        self.eta / (1.0 + self.eta * self.target.mu + self.eta * l1)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.target.value(x) + dist_sq(x, &self.y) / (2.0 * self.eta)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.value(x))
    }

    /// The exact minimizer `prox_{eta g}(y)`, when `f` has a closed-form prox.
    pub fn prox_point(&self) -> Result<Vec<f64>> {
        self.target.prox(self.eta, &self.y)
    }

    fn quadratic(&self) -> ProxQuadratic<'_> {
        ProxQuadratic {
            mu: self.target.mu,
            x0: &self.target.center,
            eta: self.eta,
            y: &self.y,
            eta_mu: self.eta_mu(),
        }
    }
}

/// Linearization `u -> f_val + <slope, u - anchor>` of `f` at `anchor`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CuttingPlane {
    pub anchor: Vec<f64>,
    pub f_val: f64,
    pub slope: Vec<f64>,
}

impl CuttingPlane {
    pub fn at(f: &dyn Potential, anchor: &[f64]) -> Self {
        Self {
            anchor: anchor.to_vec(),
            f_val: f.value(anchor),
            slope: f.subgradient(anchor),
        }
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        self.f_val + dot(&self.slope, u) - dot(&self.slope, &self.anchor)
    }

    fn offset(&self) -> f64 {
        self.f_val - dot(&self.slope, &self.anchor)
    }
}

/// The cutting-plane model `f_j = max_i plane_i`.
pub fn model_value(planes: &[CuttingPlane], u: &[f64]) -> f64 {
    planes.iter().map(|p| p.eval(u)).fold(f64::NEG_INFINITY, f64::max)
}

/// Solution of the proximal model subproblem.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSolution {
    /// Minimizer `x_j` of the model objective `g_j^eta`.
    pub x: Vec<f64>,
    /// `g_j^eta(x_j)`.
    pub value: f64,
    /// Dual value: a certified lower bound on `min g_j^eta` with
    /// `g_j^eta(u) >= dual + |u - x_j|^2 / (2 eta_mu)` for every `u`.
    pub dual: f64,
    pub weights: Vec<f64>,
    pub dual_iterations: usize,
}

impl ModelSolution {
    pub fn duality_gap(&self) -> f64 {
        self.value - self.dual
    }
}

/// Model objective `g_j^eta(u) = f_j(u) + (mu/2)|u - x0|^2 + |u - y|^2/(2 eta)`.
pub fn model_objective(planes: &[CuttingPlane], obj: &ProxObjective, u: &[f64]) -> f64 {
    model_value(planes, u) + obj.quadratic().eval(u)
}

fn solve_model(
    planes: &[CuttingPlane],
    obj: &ProxObjective,
    tol: f64,
    warm: Option<&[f64]>,
    max_dual_iter: usize,
) -> Result<ModelSolution> {
    if planes.is_empty() {
        return Err(Error::invalid("model subproblem needs at least one cutting plane"));
    }
    for p in planes {
        check_dim(obj.dim(), p.slope.len())?;
    }
    let offsets: Vec<f64> = planes.iter().map(CuttingPlane::offset).collect();
    let slopes: Vec<&[f64]> = planes.iter().map(|p| p.slope.as_slice()).collect();
    let problem = DualProblem {
        offsets: &offsets,
        slopes: &slopes,
        quad: obj.quadratic(),
    };
    let sol = problem.solve(warm, tol, max_dual_iter)?;
    Ok(ModelSolution {
        x: sol.x,
        value: sol.primal,
        dual: sol.dual,
        weights: sol.weights,
        dual_iterations: sol.iterations,
    })
}

/// Duality-gap tolerance for the model solve given a bundle tolerance `delta`.
pub fn model_tolerance(delta: f64) -> f64 {
    (delta / 100.0).min(1e-10)
}

/// Minimizes `g_j^eta` exactly (to duality gap `<= 1e-10`).
pub fn solve_model_subproblem(planes: &[CuttingPlane], obj: &ProxObjective) -> Result<ModelSolution> {
    solve_model(planes, obj, 1e-10, None, DEFAULT_MAX_DUAL_ITER)
}

#[derive(Debug, Clone, Copy)]
pub struct BundleOptions {
    pub delta: f64,
    pub max_iter: usize,
    pub max_dual_iter: usize,
}

impl BundleOptions {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            max_iter: DEFAULT_MAX_ITER,
            max_dual_iter: DEFAULT_MAX_DUAL_ITER,
        }
    }
}

/// One row of the gap trace: `(j, t_j, |x_j - x_{j-1}|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapRecord {
    pub j: usize,
    pub gap: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BundleResult {
    /// `x_J`, minimizer of the final model objective.
    pub x_model: Vec<f64>,
    /// `x~_J`, best iterate for the true objective.
    pub x_best: Vec<f64>,
    /// `g_y^eta(x~_J)`.
    pub best_value: f64,
    /// Certified lower bound on `g_J^eta(x_J)` (dual value of the final solve).
    pub model_value: f64,
    /// `J`.
    pub iterations: usize,
    /// `t_J = g_y^eta(x~_J) - g_J^eta(x_J)`.
    pub gap: f64,
    /// Subgradient queries to `f`.
    pub oracle_calls: usize,
    /// Value queries to `f`.
    pub value_calls: usize,
    pub trace: Vec<GapRecord>,
    pub planes: Vec<CuttingPlane>,
}

impl BundleResult {
    /// Measured `t_1`.
    pub fn t1(&self) -> f64 {
        self.trace.first().map_or(0.0, |r| r.gap)
    }

    /// Gap trace as CSV rows `j,t_j,step`, header included.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("j,t_j,step\n");
        for r in &self.trace {
            s.push_str(&format!("{},{},{}\n", r.j, r.gap, r.step));
        }
        s
    }
}

/// Runs the bundle subroutine to a `delta`-solution.
pub fn prox_bundle(obj: &ProxObjective, delta: f64, max_iter: usize) -> Result<BundleResult> {
    prox_bundle_with(
        obj,
        &BundleOptions {
            delta,
            max_iter,
            max_dual_iter: DEFAULT_MAX_DUAL_ITER,
        },
    )
}

pub fn prox_bundle_with(obj: &ProxObjective, opts: &BundleOptions) -> Result<BundleResult> {
    let delta = opts.delta;
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    if opts.max_iter == 0 {
        return Err(Error::invalid("max_iter must be >= 1"));
    }
    let f = obj.target.base.as_ref();
    let tol = model_tolerance(delta);

    // x_0 = x~_0 = y, C_1 = {y}
    let mut planes = vec![CuttingPlane::at(f, &obj.y)];
    let mut oracle_calls = 1;
    let mut value_calls = 1;
    let mut x_prev = obj.y.clone();
    let mut x_best = obj.y.clone();
    let mut best_value = obj.value(&obj.y);
    let mut trace = Vec::new();
    let mut weights: Option<Vec<f64>> = None;

    for j in 1..=opts.max_iter {
        let sol = solve_model(&planes, obj, tol, weights.as_deref(), opts.max_dual_iter)?;
        let xj = sol.x;
        let gxj = obj.value(&xj);
        value_calls += 1;
        // ties keep the previous best iterate
        if gxj < best_value {
            best_value = gxj;
            x_best.clone_from(&xj);
        }
        let gap = best_value - sol.dual;
        trace.push(GapRecord {
            j,
            gap,
            step: dist(&xj, &x_prev),
        });
        if gap <= delta {
            return Ok(BundleResult {
                x_model: xj,
                x_best,
                best_value,
                model_value: sol.dual,
                iterations: j,
                gap,
                oracle_calls,
                value_calls,
                trace,
                planes,
            });
        }
        if j == opts.max_iter {
            return Err(Error::BundleMaxIter {
                max_iter: opts.max_iter,
                last: Box::new(BundleResult {
                    x_model: xj,
                    x_best,
                    best_value,
                    model_value: sol.dual,
                    iterations: j,
                    gap,
                    oracle_calls,
                    value_calls,
                    trace,
                    planes,
                }),
            });
        }
        planes.push(CuttingPlane::at(f, &xj));
        oracle_calls += 1;
        let mut w = sol.weights;
        w.push(0.0);
        weights = Some(w);
        x_prev = xj;
    }
    unreachable!("loop returns on termination or at max_iter")
}

/// Upper bound on `t_1` from the first linearization at `y`:
/// `L_a eta_mu^(a+1) / (a+1) |v|^(a+1) + L1 eta_mu^2 / 2 |v|^2` with
/// `v = f'(y) + mu (y - x0)`.
pub fn t1_upper_bound(obj: &ProxObjective) -> f64 {
    let v = obj.target.subgradient(&obj.y);
    let r = obj.eta_mu() * norm(&v);
    obj.target.base.profile().linearization_bound(r)
}

/// Iteration count after which `t_j <= delta` is guaranteed, given the
/// measured `t_1`.
///
/// Semi-smooth profiles (`l_one = 0`) use
/// `1 + ceil((1 + c)/c * log(t1/delta))` with
/// `c = ((a+1)/L_a)^(2/(a+1)) delta^((1-a)/(a+1)) / (2 eta_mu)`.
/// Profiles with `l_one > 0` use
/// `1 + ceil([1 + eta_mu (L1 + L_a^(2/(a+1)) / ((a+1) delta)^((1-a)/(a+1)))] log(2 t1/delta))`.
pub fn iteration_bound(profile: &SmoothnessProfile, eta_mu: f64, delta: f64, t1: f64) -> usize {
    if t1 <= delta {
        return 1;
    }
    let a = profile.alpha;
    let p = 2.0 / (a + 1.0);
    let q = (1.0 - a) / (a + 1.0);
    if profile.l_one == 0.0 {
        if profile.l_alpha == 0.0 {
            // linear f: the first model is exact
            return 1;
        }
        let c = ((a + 1.0) / profile.l_alpha).powf(p) * delta.powf(q) / (2.0 * eta_mu);
        1 + ((1.0 + c) / c * (t1 / delta).ln()).ceil().max(0.0) as usize
    } else {
        let k = profile.l_one + profile.l_alpha.powf(p) / ((a + 1.0) * delta).powf(q);
        1 + ((1.0 + eta_mu * k) * (2.0 * t1 / delta).ln()).ceil().max(0.0) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_gaussian, make_l1, make_power_norm, make_quad_plus_l1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn abs_obj(eta: f64, y: f64) -> ProxObjective {
        let f = Arc::new(make_l1(1, 1.0).unwrap());
        ProxObjective::new(RegularizedTarget::plain(f), eta, vec![y]).unwrap()
    }

    fn grid_min_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> (f64, f64) {
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .map(|x| (x, f(x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    }

    #[test]
    fn single_plane_solution_is_gradient_step() {
        let obj = abs_obj(0.5, 2.0);
        let planes = vec![CuttingPlane::at(obj.target.base.as_ref(), &[2.0])];
        let sol = solve_model_subproblem(&planes, &obj).unwrap();
        assert!((sol.x[0] - 1.5).abs() < 1e-14);
        let (gx, _) = grid_min_1d(|u| model_objective(&planes, &obj, &[u]), -4.0, 4.0, 80_000);
        assert!((gx - 1.5).abs() < 1e-4);
    }

    #[test]
    fn symmetric_planes_through_origin() {
        let obj = abs_obj(1.0, 0.0);
        let f = obj.target.base.clone();
        let planes = vec![CuttingPlane::at(f.as_ref(), &[1.0]), CuttingPlane::at(f.as_ref(), &[-1.0])];
        let sol = solve_model_subproblem(&planes, &obj).unwrap();
        assert!(sol.x[0].abs() < 1e-9);
        assert!(sol.value.abs() < 1e-9);
        assert!(sol.duality_gap() <= 1e-10);
    }

    #[test]
    fn regularized_quadratic_linearization() {
        let f = Arc::new(make_power_norm(2, 1.0, 1.0).unwrap());
        let t = RegularizedTarget::new(f.clone(), 1.0, vec![0.0, 0.0]).unwrap();
        let obj = ProxObjective::new(t, 1.0, vec![1.0, 0.0]).unwrap();
        let planes = vec![CuttingPlane::at(f.as_ref(), &[1.0, 0.0])];
        let sol = solve_model_subproblem(&planes, &obj).unwrap();
        assert!(sol.x[0].abs() < 1e-14 && sol.x[1].abs() < 1e-14);
        // dense grid cross-check
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=400 {
            for k in 0..=400 {
                let u = [-1.0 + i as f64 * 0.005, -1.0 + k as f64 * 0.005];
                let v = model_objective(&planes, &obj, &u);
                if v < best.0 {
                    best = (v, u[0], u[1]);
                }
            }
        }
        assert!(best.1.abs() < 0.006 && best.2.abs() < 0.006);
    }

    #[test]
    fn empty_planes_are_rejected() {
        let obj = abs_obj(1.0, 0.0);
        assert!(solve_model_subproblem(&[], &obj).is_err());
    }

    #[test]
    fn bundle_abs_example_terminates_in_one_step() {
        let obj = abs_obj(0.5, 2.0);
        let r = prox_bundle(&obj, 0.1, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.iterations, 1);
        assert!((r.x_model[0] - 1.5).abs() < 1e-14);
        assert!((r.x_best[0] - 1.5).abs() < 1e-14);
        assert!(r.gap.abs() < 1e-14);
        assert!((r.best_value - 1.75).abs() < 1e-14);
    }

    #[test]
    fn bundle_at_smooth_minimizer() {
        let f = Arc::new(make_power_norm(3, 1.0, 1.0).unwrap());
        for eta in [0.1, 1.0, 10.0] {
            let obj = ProxObjective::new(RegularizedTarget::plain(f.clone()), eta, vec![0.0; 3]).unwrap();
            let r = prox_bundle(&obj, 1e-3, DEFAULT_MAX_ITER).unwrap();
            assert_eq!(r.iterations, 1);
            assert_eq!(r.x_model, vec![0.0; 3]);
            assert_eq!(r.gap, 0.0);
        }
    }

    #[test]
    fn bad_arguments() {
        let obj = abs_obj(0.5, 2.0);
        assert!(prox_bundle(&obj, 0.0, 10).is_err());
        assert!(prox_bundle(&obj, 0.1, 0).is_err());
        let f = Arc::new(make_l1(1, 1.0).unwrap());
        assert!(ProxObjective::new(RegularizedTarget::plain(f.clone()), 0.0, vec![0.0]).is_err());
        assert!(ProxObjective::new(RegularizedTarget::plain(f), 1.0, vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn max_iter_error_carries_last_result() {
        let f = Arc::new(make_power_norm(2, 0.5, 3.0).unwrap());
        let obj = ProxObjective::new(RegularizedTarget::plain(f), 50.0, vec![3.0, -2.0]).unwrap();
        match prox_bundle(&obj, 1e-9, 2) {
            Err(Error::BundleMaxIter { max_iter, last }) => {
                assert_eq!(max_iter, 2);
                assert_eq!(last.iterations, 2);
                assert!(last.gap > 1e-9);
            }
            other => panic!("expected max-iter error, got {other:?}"),
        }
    }

    #[test]
    fn delta_solution_against_exact_prox() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pots: Vec<Arc<dyn Potential>> = vec![
            Arc::new(make_l1(3, 1.0).unwrap()),
            Arc::new(make_power_norm(2, 0.5, 1.0).unwrap()),
            Arc::new(make_quad_plus_l1(vec![1.0, 2.0], 0.5).unwrap()),
            Arc::new(make_gaussian(vec![2.0, 0.5, 1.0]).unwrap()),
        ];
        for f in pots {
            for _ in 0..20 {
                let d = f.dim();
                let y: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
                let x0: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let t = RegularizedTarget::new(f.clone(), 0.3, x0).unwrap();
                let obj = ProxObjective::new(t, 0.7, y).unwrap();
                let xs = obj.prox_point().unwrap();
                let delta = 1e-3;
                let r = prox_bundle(&obj, delta, DEFAULT_MAX_ITER).unwrap();
                assert!(r.gap <= delta && r.gap >= -1e-12);
                let sub = r.best_value - obj.value(&xs);
                assert!(sub <= delta + 1e-12 && sub >= -1e-12, "{}: {sub}", f.name());
            }
        }
    }

    #[test]
    fn trace_csv_format() {
        let obj = abs_obj(0.5, 2.0);
        let r = prox_bundle(&obj, 0.1, 10).unwrap();
        assert_eq!(r.trace_csv(), "j,t_j,step\n1,0,0.5\n");
    }

    #[test]
    fn iteration_bound_examples() {
        let p = SmoothnessProfile::semi_smooth(0.0, 2.0).unwrap();
        assert_eq!(iteration_bound(&p, 0.1, 0.5, 0.4), 1);
        // c = (1/2)^2 * 0.5 / 0.2 = 0.625; (1+c)/c = 2.6; log(2) = 0.693 -> 2
        assert_eq!(iteration_bound(&p, 0.1, 0.5, 1.0), 3);
        let p = SmoothnessProfile::new(1.0, 0.0, 4.0, 0.0).unwrap();
        // (1 + 0.1*4) * log(4) = 1.94 -> ceil 2, +1
        assert_eq!(iteration_bound(&p, 0.1, 0.5, 1.0), 3);
    }
}
