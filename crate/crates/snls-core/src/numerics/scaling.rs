//! Weighted scaling degree at the origin by parabolic rescaling.
//!
//! A kernel `u` is paired with `f_λ(t,x) = λ^{-3} f(t/λ², x/λ)`; for
//! `u(λ²t, λx) ~ λ^{-s} u(t,x)` the pairing scales as `λ^{-s}`, so `s` is
//! minus the slope of `log|⟨u, f_λ⟩|` against `log λ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::kernel::KernelGrid;
use super::lattice::{Cutoff, LatticeSpec, SignConvention};
use super::NumericsError;

pub const DEFAULT_SCALES: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

/// Fit residual (max deviation in `log|pairing|`) above which the
/// estimate is flagged unreliable.
pub const RESIDUAL_THRESHOLD: f64 = 0.1;

#[derive(Clone, Copy, Debug)]
pub enum ScalingKernel<'a> {
    Grid(&'a KernelGrid),
    /// Pointwise product of two grids on the same lattice.
    Product(&'a KernelGrid, &'a KernelGrid),
    /// Constant sampled with the steps `(Δt, Δx)`.
    Constant { value: Complex64, dt: f64, dx: f64 },
}

impl ScalingKernel<'_> {
    fn steps(&self) -> (f64, f64) {
        match self {
            ScalingKernel::Grid(g) | ScalingKernel::Product(g, _) => (g.spec.dt(), g.spec.dx()),
            ScalingKernel::Constant { dt, dx, .. } => (*dt, *dx),
        }
    }

    fn at(&self, n: i64, j: i64) -> Complex64 {
        match self {
            ScalingKernel::Grid(g) => g.get(n, j),
            ScalingKernel::Product(a, b) => a.get(n, j) * b.get(n, j),
            ScalingKernel::Constant { value, .. } => *value,
        }
    }
}

/// Unscaled probe `f`, a bump in `(t, x)` offsets from the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub center_t: f64,
    pub center_x: f64,
    pub radius_t: f64,
    pub radius_x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingEstimate {
    pub estimate: f64,
    pub fit_residual: f64,
    pub reliable: bool,
    /// `(λ, |⟨u, f_λ⟩|)`.
    pub pairings: Vec<(f64, f64)>,
}

/// Lattice for the kernel scaling runs: fine enough that `f_{1/8}` is
/// resolved, wide enough that `f_1` stays inside the causal cone of the
/// band-limited kernel.
pub fn scaling_lattice() -> LatticeSpec {
    let nt = 2400;
    let t_max = 0.06;
    LatticeSpec {
        d: 1,
        t_max,
        lx: 64.0,
        nt,
        nx: 8192,
        epsilon: t_max / nt as f64,
        sign: SignConvention::Plus,
        chi: Cutoff::zero(),
    }
}

/// Probe matched to [`scaling_lattice`].
pub fn default_probe(spec: &LatticeSpec) -> Probe {
    Probe { center_t: 0.6 * spec.t_max, center_x: 0.0, radius_t: 0.4 * spec.t_max, radius_x: 0.5 }
}

fn pairing(kernel: &ScalingKernel<'_>, p: &Probe, lambda: f64) -> Complex64 {
    let (dt, dx) = kernel.steps();
    let cut = Cutoff { center_t: p.center_t, center_x: p.center_x, radius_t: p.radius_t, radius_x: p.radius_x, plateau: 0.0 };
    let l2 = lambda * lambda;
    let n0 = ((l2 * (p.center_t - p.radius_t)) / dt).floor().max(0.0) as i64;
    let n1 = ((l2 * (p.center_t + p.radius_t)) / dt).ceil() as i64;
    let j0 = ((lambda * (p.center_x - p.radius_x)) / dx).floor() as i64;
    let j1 = ((lambda * (p.center_x + p.radius_x)) / dx).ceil() as i64;
    let mut sum = Complex64::new(0.0, 0.0);
    for n in n0..=n1 {
        let t = n as f64 * dt / l2;
        for j in j0..=j1 {
            let w = cut.value(t, j as f64 * dx / lambda);
            if w != 0.0 {
                sum += w * kernel.at(n, j);
            }
        }
    }
    sum * dt * dx / (l2 * lambda)
}

/// Least-squares slope and max residual of `y` against `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let res = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).abs()).fold(0.0, f64::max);
    (slope, icpt, res)
}

pub fn scaling_degree_estimate(
    kernel: &ScalingKernel<'_>,
    probe: &Probe,
    scales: &[f64],
) -> Result<ScalingEstimate, NumericsError> {
    if scales.len() < 4 {
        return Err(NumericsError::InvalidSpec("at least 4 dyadic scales are required".into()));
    }
    if let ScalingKernel::Product(a, b) = kernel {
        if a.spec != b.spec {
            return Err(NumericsError::InvalidSpec("product kernels must share a lattice".into()));
        }
    }
    let pairings: Vec<(f64, f64)> = scales.iter().map(|&l| (l, pairing(kernel, probe, l).norm())).collect();
    let xs: Vec<f64> = pairings.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairings.iter().map(|p| p.1.ln()).collect();
    let (slope, _, res) = fit_line(&xs, &ys);
    let estimate = -slope;
    Ok(ScalingEstimate { estimate, fit_residual: res, reliable: res.is_finite() && res < RESIDUAL_THRESHOLD, pairings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_kernel_has_degree_zero() {
        let spec = scaling_lattice();
        let k = ScalingKernel::Constant { value: Complex64::new(2.0, -1.0), dt: spec.dt(), dx: spec.dx() };
        let e = scaling_degree_estimate(&k, &default_probe(&spec), &DEFAULT_SCALES).unwrap();
        assert!(e.estimate.abs() < 0.1, "{e:?}");
        assert!(e.reliable);
    }

    #[test]
    fn fit_line_recovers_slope() {
        let (s, c, r) = fit_line(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((s - 2.0).abs() < 1e-12 && (c - 1.0).abs() < 1e-12 && r < 1e-12);
    }
}
