//! Exact proximal step on a cutting-plane model, solved through its dual:
//! a concave quadratic over the probability simplex.
//!
//! For planes `l_i(u) = a_i + <s_i, u>` and weights `w` on the simplex, the
//! Lagrangian `L(u, w) = sum w_i l_i(u) + (mu/2)|u - x0|^2 + |u - y|^2/(2 eta)`
//! is minimized at `u(w) = eta_mu (mu x0 + y/eta - S w)`, and the dual value
//! is `D(w) = L(u(w), w)`. Its gradient is `(l_i(u(w)))_i`, and the duality
//! gap at `w` is `max_i l_i(u) - sum_i w_i l_i(u)`.

use crate::error::{Error, Result};
use crate::linalg::dist_sq;

/// Euclidean projection onto `{w >= 0, sum w = 1}` (sort-and-threshold).
pub fn project_simplex(v: &mut [f64]) {
    let n = v.len();
    if n == 0 {
        return;
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// The quadratic part of the proximal model objective.
#[derive(Debug, Clone)]
pub(crate) struct ProxQuadratic<'a> {
    pub mu: f64,
    pub x0: &'a [f64],
    pub eta: f64,
    pub y: &'a [f64],
    pub eta_mu: f64,
}

impl ProxQuadratic<'_> {
    pub fn eval(&self, u: &[f64]) -> f64 {
        let reg = if self.mu > 0.0 {
            0.5 * self.mu * dist_sq(u, self.x0)
        } else {
            0.0
        };
        reg + dist_sq(u, self.y) / (2.0 * self.eta)
    }

    /// Unconstrained minimizer `eta_mu (mu x0 + y / eta)`.
    pub fn center(&self) -> Vec<f64> {
        self.y
            .iter()
            .zip(self.x0)
            .map(|(yi, ci)| self.eta_mu * (self.mu * ci + yi / self.eta))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DualSolution {
    pub x: Vec<f64>,
    pub weights: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
    pub iterations: usize,
}

pub(crate) struct DualProblem<'a> {
    /// Plane offsets `a_i`.
    pub offsets: &'a [f64],
    /// Plane slopes `s_i`.
    pub slopes: &'a [&'a [f64]],
    pub quad: ProxQuadratic<'a>,
}

struct Eval {
    x: Vec<f64>,
    plane_vals: Vec<f64>,
    dual: f64,
    primal: f64,
    gap: f64,
}

impl DualProblem<'_> {
    fn eval(&self, center: &[f64], w: &[f64]) -> Eval {
        let mut x = center.to_vec();
        for (wi, s) in w.iter().zip(self.slopes) {
            if *wi != 0.0 {
                for (xk, sk) in x.iter_mut().zip(s.iter()) {
                    *xk -= self.quad.eta_mu * wi * sk;
                }
            }
        }
        let plane_vals: Vec<f64> = self
            .offsets
            .iter()
            .zip(self.slopes)
            .map(|(a, s)| a + crate::linalg::dot(s, &x))
            .collect();
        let q = self.quad.eval(&x);
        let max = plane_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let avg: f64 = w.iter().zip(&plane_vals).map(|(a, b)| a * b).sum();
        Eval {
            x,
            dual: avg + q,
            primal: max + q,
            gap: (max - avg).max(0.0),
            plane_vals,
        }
    }

    /// Upper bound on the Lipschitz constant of the dual gradient:
    /// `eta_mu * lambda_max(S^T S)`, bounded by the smaller of the Frobenius
    /// norm and the Gershgorin row bound of the Gram matrix.
    fn lipschitz(&self) -> f64 {
        let m = self.slopes.len();
        let mut frob = 0.0;
        let mut gersh = 0.0f64;
        for i in 0..m {
            let mut row = 0.0;
            for j in 0..m {
                let g = crate::linalg::dot(self.slopes[i], self.slopes[j]);
                frob += g * g;
                row += g.abs();
            }
            gersh = gersh.max(row);
        }
        self.quad.eta_mu * frob.sqrt().min(gersh)
    }

    /// Exact maximizer of the dual restricted to the support of `w`, found by
    /// solving the KKT system `eta_mu G_AA w_A + theta 1 = b_A`, `sum w_A = 1`.
    /// Returns `None` when the system is singular or the solution leaves the
    /// simplex.
    fn polish(&self, b: &[f64], w: &[f64]) -> Option<Vec<f64>> {
        let active: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
        let k = active.len();
        if k == 0 {
            return None;
        }
        let n = k + 1;
        let mut a = vec![0.0; n * (n + 1)];
        for (r, &i) in active.iter().enumerate() {
            for (c, &j) in active.iter().enumerate() {
                a[r * (n + 1) + c] = self.quad.eta_mu * crate::linalg::dot(self.slopes[i], self.slopes[j]);
            }
            a[r * (n + 1) + k] = 1.0;
            a[r * (n + 1) + n] = b[i];
        }
        for c in 0..k {
            a[k * (n + 1) + c] = 1.0;
        }
        a[k * (n + 1) + n] = 1.0;
        let sol = gauss_solve(&mut a, n)?;
        if sol[..k].iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return None;
        }
        let mut out = vec![0.0; w.len()];
        for (r, &i) in active.iter().enumerate() {
            out[i] = sol[r];
        }
        let s: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= s);
        Some(out)
    }

    /// Accelerated projected gradient ascent with gradient-based restart,
    /// interleaved with exact solves on the current support.
    pub fn solve(&self, warm: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<DualSolution> {
        let m = self.offsets.len();
        assert!(m > 0, "dual problem needs at least one plane");
        let center = self.quad.center();
        // b_i = l_i(center), the linear part of the dual
        let b = self.eval(&center, &vec![0.0; m]).plane_vals;
        let mut w: Vec<f64> = match warm {
            Some(w0) if w0.len() == m => w0.to_vec(),
            _ => vec![1.0 / m as f64; m],
        };
        project_simplex(&mut w);

        let lip = self.lipschitz();
        let step = if lip > 0.0 { 1.0 / lip } else { 1.0 };

        let mut cur = self.eval(&center, &w);
        let mut best = (w.clone(), cur);
        let mut v = w.clone();
        let mut t = 1.0f64;
        let mut iterations = 0;

        let consider = |best: &mut (Vec<f64>, Eval), w: &[f64], e: Eval| {
            if e.gap < best.1.gap || (e.gap == best.1.gap && e.dual > best.1.dual) {
                *best = (w.to_vec(), e);
            }
        };

        loop {
            let scale = best.1.plane_vals.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let floor = 16.0 * f64::EPSILON * (1.0 + scale);
            if best.1.gap <= tol.max(floor) {
                break;
            }
            if iterations >= max_iter {
                return Err(Error::SolverNonConvergence {
                    iterations,
                    gap: best.1.gap,
                    best: best.1.x,
                });
            }
            if iterations % 16 == 0 {
                if let Some(p) = self.polish(&b, &w) {
                    let e = self.eval(&center, &p);
                    consider(&mut best, &p, e);
                    if best.1.gap <= tol.max(floor) {
                        break;
                    }
                }
            }
            iterations += 1;

            let at_v = self.eval(&center, &v);
            let mut next: Vec<f64> = v
                .iter()
                .zip(&at_v.plane_vals)
                .map(|(vi, gi)| vi + step * gi)
                .collect();
            project_simplex(&mut next);

            // restart when the step opposes the momentum direction
            let dot_restart: f64 = at_v
                .plane_vals
                .iter()
                .zip(next.iter().zip(&w))
                .map(|(g, (n, o))| g * (n - o))
                .sum();
            let t_next = if dot_restart < 0.0 {
                1.0
            } else {
                0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
            };
            let beta = (t - 1.0) / t_next;
            v = next
                .iter()
                .zip(&w)
                .map(|(n, o)| n + beta * (n - o))
                .collect();
            t = t_next;
            w = next;
            cur = self.eval(&center, &w);
            consider(&mut best, &w, cur);
        }

        let (weights, e) = best;
        Ok(DualSolution {
            x: e.x,
            weights,
            primal: e.primal,
            dual: e.dual,
            iterations,
        })
    }
}

/// Gaussian elimination with partial pivoting on an `n x (n+1)` augmented
/// matrix stored row-major.
fn gauss_solve(a: &mut [f64], n: usize) -> Option<Vec<f64>> {
    let w = n + 1;
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * w + col].abs().total_cmp(&a[j * w + col].abs()))?;
        if a[piv * w + col].abs() <= 1e-13 * scale {
            return None;
        }
        if piv != col {
            for k in 0..w {
                a.swap(piv * w + k, col * w + k);
            }
        }
        for r in col + 1..n {
            let factor = a[r * w + col] / a[col * w + col];
            if factor != 0.0 {
                for k in col..w {
                    a[r * w + k] -= factor * a[col * w + k];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = a[r * w + n];
        for k in r + 1..n {
            acc -= a[r * w + k] * x[k];
        }
        x[r] = acc / a[r * w + r];
    }
    Some(x)
}
