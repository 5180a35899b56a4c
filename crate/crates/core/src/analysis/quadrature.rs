//! Deterministic quadrature ground truth for densities `exp(-f)` in one or
//! two dimensions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::Potential;

/// Grid bounds are placed where `f` exceeds its anchor value by this much.
pub const DEFAULT_RISE: f64 = 40.0;

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rise: f64,
    /// Target number of Simpson intervals per axis.
    pub intervals: usize,
}

impl QuadOptions {
    pub fn for_dim(dim: usize) -> Self {
        Self {
            rise: DEFAULT_RISE,
            intervals: if dim == 1 { 20_000 } else { 2_000 },
        }
    }

    pub fn refined(self) -> Self {
        Self {
            intervals: self.intervals * 2,
            ..self
        }
    }
}

/// Nodes and composite-Simpson weights on one axis, with every breakpoint on
/// an even node.
#[derive(Debug, Clone, Serialize)]
pub struct AxisGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AxisGrid {
    pub fn new(lo: f64, hi: f64, breaks: &[f64], intervals: usize) -> Self {
        let mut pts = vec![lo];
        let mut inner: Vec<f64> = breaks.iter().copied().filter(|b| *b > lo && *b < hi).collect();
        inner.sort_by(f64::total_cmp);
        inner.dedup();
        pts.extend(inner);
        pts.push(hi);
        let width = hi - lo;
        let mut nodes = vec![lo];
        let mut weights = vec![0.0];
        for seg in pts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let mut n = ((b - a) / width * intervals as f64).ceil() as usize;
            n = n.max(2);
            n += n % 2;
            let h = (b - a) / n as f64;
            for i in 1..=n {
                let x = if i == n { b } else { a + h * i as f64 };
                nodes.push(x);
                weights.push(0.0);
            }
            let base = nodes.len() - 1 - n;
            for i in 0..=n {
                let c = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                weights[base + i] += c * h / 3.0;
            }
        }
        Self { nodes, weights }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuadratureDensity {
    pub dim: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub axes: Vec<AxisGrid>,
    /// `f` at the tensor nodes (row-major, first axis slowest).
    pub log_density: Vec<f64>,
    /// Minimum of `f` over the nodes; values are stored unshifted.
    pub shift: f64,
    /// `ln Z` with `Z = ∫ exp(-f)`.
    pub log_normalizer: f64,
    /// Normalized CDF at the axis nodes (1D only).
    #[serde(skip)]
    pub cdf: Option<Vec<f64>>,
}

fn bound_search<F: Fn(&[f64]) -> f64>(f: &F, anchor: &[f64], axis: usize, dir: f64, rise: f64) -> Result<f64> {
    let f0 = f(anchor);
    let mut x = anchor.to_vec();
    let mut step = 0.25;
    loop {
        x[axis] = anchor[axis] + dir * step;
        if f(&x) - f0 >= rise {
            return Ok(x[axis]);
        }
        step *= 1.25;
        if step > 1e8 {
            return Err(Error::Unsupported(
                "density is not normalizable on a finite grid".into(),
            ));
        }
    }
}

impl QuadratureDensity {
    /// Builds the grid for `exp(-f)` around `anchor` with axis breakpoints
    /// `kinks[axis]`.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(
        dim: usize,
        f: F,
        anchor: &[f64],
        kinks: &[Vec<f64>],
        opts: QuadOptions,
    ) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Unsupported(format!("quadrature needs d <= 2, got {dim}")));
        }
        crate::error::check_dim(dim, anchor.len())?;
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        let mut axes = Vec::with_capacity(dim);
        for k in 0..dim {
            let a = bound_search(&f, anchor, k, -1.0, opts.rise)?;
            let b = bound_search(&f, anchor, k, 1.0, opts.rise)?;
            let mut breaks = kinks.get(k).cloned().unwrap_or_default();
            breaks.push(anchor[k]);
            axes.push(AxisGrid::new(a, b, &breaks, opts.intervals));
            lo.push(a);
            hi.push(b);
        }
        let log_density: Vec<f64> = if dim == 1 {
            axes[0].nodes.iter().map(|x| f(&[*x])).collect()
        } else {
            let mut v = Vec::with_capacity(axes[0].nodes.len() * axes[1].nodes.len());
            for x in &axes[0].nodes {
                for y in &axes[1].nodes {
                    v.push(f(&[*x, *y]));
                }
            }
            v
        };
        let shift = log_density.iter().copied().fold(f64::INFINITY, f64::min);
        if !shift.is_finite() {
            return Err(Error::invalid("potential is not finite on the quadrature grid"));
        }
        let mut q = Self {
            dim,
            lo,
            hi,
            axes,
            log_density,
            shift,
            log_normalizer: 0.0,
            cdf: None,
        };
        let mass = q.weighted_sum(|_, _| 1.0);
        if !(mass > 0.0) {
            return Err(Error::invalid("density has no mass on its grid"));
        }
        q.log_normalizer = mass.ln() - shift;
        if dim == 1 {
            q.cdf = Some(q.build_cdf());
        }
        Ok(q)
    }

    /// Ground truth for `exp(-f)` of a zoo potential.
    pub fn for_potential(f: &dyn Potential) -> Result<Self> {
        Self::for_potential_with(f, QuadOptions::for_dim(f.dim()))
    }

    pub fn for_potential_with(f: &dyn Potential, opts: QuadOptions) -> Result<Self> {
        let d = f.dim();
        let anchor = f.minimizer().map_or_else(|| vec![0.0; d], |m| m.x);
        let kinks: Vec<Vec<f64>> = (0..d).map(|k| f.kinks(k)).collect();
        Self::from_fn(d, |x| f.value(x), &anchor, &kinks, opts)
    }

    /// `Σ w exp(-(f - shift)) φ` over the tensor grid.
    fn weighted_sum(&self, phi: impl Fn(usize, &[f64]) -> f64) -> f64 {
        let mut acc = 0.0;
        if self.dim == 1 {
            let ax = &self.axes[0];
            for (i, (x, w)) in ax.nodes.iter().zip(&ax.weights).enumerate() {
                acc += w * (self.shift - self.log_density[i]).exp() * phi(i, &[*x]);
            }
        } else {
            let (ax, ay) = (&self.axes[0], &self.axes[1]);
            let ny = ay.nodes.len();
            for (i, (x, wx)) in ax.nodes.iter().zip(&ax.weights).enumerate() {
                for (j, (y, wy)) in ay.nodes.iter().zip(&ay.weights).enumerate() {
                    let k = i * ny + j;
                    acc += wx * wy * (self.shift - self.log_density[k]).exp() * phi(k, &[*x, *y]);
                }
            }
        }
        acc
    }

    pub fn normalizer(&self) -> f64 {
        self.log_normalizer.exp()
    }

    /// `E φ(X)` under the normalized density.
    pub fn expectation(&self, phi: impl Fn(&[f64]) -> f64) -> f64 {
        let z = (self.log_normalizer + self.shift).exp();
        self.weighted_sum(|_, x| phi(x)) / z
    }

    /// Total normalized mass on the grid (1 up to rounding by construction;
    /// exposed for self-checks).
    pub fn total_mass(&self) -> f64 {
        self.expectation(|_| 1.0)
    }

    fn density_at_node(&self, i: usize) -> f64 {
        (-self.log_density[i] - self.log_normalizer).exp()
    }

    fn build_cdf(&self) -> Vec<f64> {
        let x = &self.axes[0].nodes;
        let n = x.len();
        let p: Vec<f64> = (0..n).map(|i| self.density_at_node(i)).collect();
        let mut c = vec![0.0; n];
        // nodes come in Simpson triples with a shared even node
        let mut i = 0;
        while i + 2 < n {
            let h = x[i + 1] - x[i];
            let h2 = x[i + 2] - x[i + 1];
            if (h - h2).abs() > 1e-9 * h.abs().max(h2.abs()) {
                // segment boundary fell on an odd node; cannot happen by construction
                c[i + 1] = c[i] + 0.5 * h * (p[i] + p[i + 1]);
                i += 1;
                continue;
            }
            c[i + 1] = c[i] + h / 12.0 * (5.0 * p[i] + 8.0 * p[i + 1] - p[i + 2]);
            c[i + 2] = c[i] + h / 3.0 * (p[i] + 4.0 * p[i + 1] + p[i + 2]);
            i += 2;
        }
        let total = c[n - 1];
        c.iter_mut().for_each(|v| *v /= total);
        c
    }

    fn cdf_nodes(&self) -> Result<&[f64]> {
        self.cdf
            .as_deref()
            .ok_or_else(|| Error::Unsupported("CDF is only available in 1D".into()))
    }

    /// Normalized CDF, 0 and 1 outside the grid. Between nodes the density
    /// is integrated as a linear interpolant.
    pub fn cdf_at(&self, t: f64) -> Result<f64> {
        let c = self.cdf_nodes()?;
        let x = &self.axes[0].nodes;
        if t <= x[0] {
            return Ok(0.0);
        }
        if t >= x[x.len() - 1] {
            return Ok(1.0);
        }
        let k = x.partition_point(|v| *v <= t);
        let (x0, x1) = (x[k - 1], x[k]);
        let (p0, p1) = (self.density_at_node(k - 1), self.density_at_node(k));
        let s = (t - x0) / (x1 - x0);
        let partial = (t - x0) * (p0 + 0.5 * s * (p1 - p0));
        // rescale so that the segment integrates to the tabulated increment
        let seg = 0.5 * (x1 - x0) * (p0 + p1);
        let inc = c[k] - c[k - 1];
        let v = if seg > 0.0 { c[k - 1] + partial / seg * inc } else { c[k - 1] };
        Ok(v.clamp(c[k - 1], c[k]))
    }

    /// Inverse of `cdf_at`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        let c = self.cdf_nodes()?;
        let x = &self.axes[0].nodes;
        let p = p.clamp(0.0, 1.0);
        let k = c.partition_point(|v| *v < p).clamp(1, c.len() - 1);
        if c[k] <= c[k - 1] {
            return Ok(x[k]);
        }
        // bisection on the within-segment CDF
        let (mut lo, mut hi) = (x[k - 1], x[k]);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.cdf_at(mid)? < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Probability of the axis-aligned box `[lo, hi]` (2D), by a fresh
    /// tensor Simpson rule inside the box using `f` directly.
    pub fn box_probability<F: Fn(&[f64]) -> f64>(&self, f: &F, lo: &[f64], hi: &[f64], n: usize) -> f64 {
        let n = (n.max(2) + 1) / 2 * 2;
        let gx = AxisGrid::new(lo[0], hi[0], &[], n);
        if self.dim == 1 {
            return gx
                .nodes
                .iter()
                .zip(&gx.weights)
                .map(|(x, w)| w * (-f(&[*x]) - self.log_normalizer).exp())
                .sum();
        }
        let gy = AxisGrid::new(lo[1], hi[1], &[], n);
        let mut acc = 0.0;
        for (x, wx) in gx.nodes.iter().zip(&gx.weights) {
            for (y, wy) in gy.nodes.iter().zip(&gy.weights) {
                acc += wx * wy * (-f(&[*x, *y]) - self.log_normalizer).exp();
            }
        }
        acc
    }
}
