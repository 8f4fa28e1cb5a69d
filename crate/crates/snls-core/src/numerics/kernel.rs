//! Spectral propagation, kernel samples, `Q` and the coinciding-point
//! coefficient `C̄`.
//!
//! DFT convention: `v̂_k = Σ_j v_j e^{−ikx_j}`. The lattice kernel is
//! `K(t, x) = Lx⁻¹ Σ_k e^{ikx − iσk²t}` for `t > 0` and the discrete delta
//! at `t = 0`. Time integrals use the causal trapezoid rule: weight ½ on
//! the equal-time term, 1 on earlier terms.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::lattice::{Field, LatticeSpec, TestFunction};
use super::NumericsError;

/// Closed form `Θ(t)(4πit)^{-d/2} exp(−|x|²/(4it))`.
pub fn closed_form_g(d: u32, t: f64, r2: f64) -> Complex64 {
    if t <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let i = Complex64::i();
    (4.0 * std::f64::consts::PI * i * t).powf(-(d as f64) / 2.0) * (-r2 / (4.0 * i * t)).exp()
}

/// Closed form with the time shifted to `t − iδ`: equals the spectral sum
/// damped by `e^{−δk²}`.
pub fn damped_closed_form_g(t: f64, x: f64, delta: f64) -> Complex64 {
    let z = Complex64::new(delta, t);
    (4.0 * std::f64::consts::PI * z).powf(-0.5) * (-(x * x) / (4.0 * z)).exp()
}

/// Largest off-origin residual of `L = i∂t ± Δ` applied to the closed form
/// at the grid points of `spec` with `t ≥ T/4`, by fourth-order finite
/// differences. Near zero identifies the convention under which the
/// closed form is the kernel.
pub fn sign_residual(spec: &LatticeSpec) -> f64 {
    // The time phase varies fastest, so it gets the finer step.
    let (ht, h) = (1e-4, 1e-3);
    let g = |t: f64, x: f64| closed_form_g(1, t, x * x);
    let d1 = |f: &dyn Fn(f64) -> Complex64, s: f64| (f(s - 2.0 * ht) - 8.0 * f(s - ht) + 8.0 * f(s + ht) - f(s + 2.0 * ht)) / (12.0 * ht);
    let d2 = |f: &dyn Fn(f64) -> Complex64, s: f64| {
        (-f(s - 2.0 * h) + 16.0 * f(s - h) - 30.0 * f(s) + 16.0 * f(s + h) - f(s + 2.0 * h)) / (12.0 * h * h)
    };
    let sigma = spec.sign.sigma();
    let mut worst: f64 = 0.0;
    for n in (spec.nt / 4)..spec.nt {
        let t = spec.t(n);
        for j in 1..spec.nx {
            // Centered offsets in (−Lx/2, Lx/2].
            let x = if spec.x(j) > spec.lx / 2.0 { spec.x(j) - spec.lx } else { spec.x(j) };
            let dt = d1(&|s| g(s, x), t);
            let dxx = d2(&|s| g(t, s), x);
            let r = Complex64::i() * dt + sigma * dxx;
            worst = worst.max(r.norm());
        }
    }
    worst
}

/// FFT plans and per-step phases for one lattice.
#[derive(Clone)]
pub struct Propagator {
    pub spec: LatticeSpec,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `e^{−iσk²Δt}` per DFT bin.
    step: Vec<Complex64>,
    pub chi: Field,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator").field("spec", &self.spec).finish()
    }
}

impl Propagator {
    pub fn new(spec: &LatticeSpec) -> Result<Propagator, NumericsError> {
        spec.require_1d()?;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(spec.nx);
        let inv = planner.plan_fft_inverse(spec.nx);
        let sigma = spec.sign.sigma();
        let step = (0..spec.nx)
            .map(|j| {
                let k = spec.wavenumber(j);
                Complex64::from_polar(1.0, -sigma * k * k * spec.dt())
            })
            .collect();
        Ok(Propagator { spec: *spec, fwd, inv, step, chi: spec.chi_field() })
    }

    fn dft(&self, v: &mut [Complex64]) {
        self.fwd.process(v);
    }

    /// Inverse DFT including the `1/nx` normalization.
    fn idft(&self, v: &mut [Complex64]) {
        self.inv.process(v);
        let s = 1.0 / self.spec.nx as f64;
        v.iter_mut().for_each(|z| *z *= s);
    }

    /// `(G⋆s)(t_n,x) = Σ_{m≤n} ΔtΔx w_{n−m} K(t_n−t_m, x−z) s(t_m, z)`.
    pub fn forward(&self, s: &Field) -> Field {
        let (nt, nx) = (self.spec.nt, self.spec.nx);
        let dt = self.spec.dt();
        let mut out = Field::zeros(nt, nx);
        let mut acc = vec![Complex64::new(0.0, 0.0); nx];
        let mut buf = vec![Complex64::new(0.0, 0.0); nx];
        for n in 0..nt {
            buf.copy_from_slice(s.row(n));
            self.dft(&mut buf);
            for k in 0..nx {
                acc[k] = acc[k] * self.step[k] + buf[k];
            }
            let row = out.row_mut(n);
            for k in 0..nx {
                row[k] = dt * (acc[k] - 0.5 * buf[k]);
            }
            self.idft(row);
        }
        out
    }

    /// Adjoint sum `(G*f)(t_m,z) = Σ_{n≥m} ΔtΔx w_{n−m} K(t_n−t_m, x−z) f(t_n, x)`.
    pub fn adjoint(&self, f: &Field) -> Field {
        let (nt, nx) = (self.spec.nt, self.spec.nx);
        let dt = self.spec.dt();
        let mut out = Field::zeros(nt, nx);
        let mut acc = vec![Complex64::new(0.0, 0.0); nx];
        let mut buf = vec![Complex64::new(0.0, 0.0); nx];
        for n in (0..nt).rev() {
            buf.copy_from_slice(f.row(n));
            self.dft(&mut buf);
            for k in 0..nx {
                acc[k] = acc[k] * self.step[k] + buf[k];
            }
            let row = out.row_mut(n);
            for k in 0..nx {
                row[k] = dt * (acc[k] - 0.5 * buf[k]);
            }
            self.idft(row);
        }
        out
    }

    /// `G_χ⋆s` with the cutoff at the source point.
    pub fn g_chi(&self, s: &Field) -> Field {
        self.forward(&self.chi.mul(s))
    }

    /// Circular spatial convolution `Σ_z Δx a(x−z) b(z)` of two rows.
    fn convolve_rows(&self, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let mut fa = a.to_vec();
        let mut fb = b.to_vec();
        self.dft(&mut fa);
        self.dft(&mut fb);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x *= y;
        }
        self.idft(&mut fa);
        let dx = self.spec.dx();
        fa.iter_mut().for_each(|z| *z *= dx);
        fa
    }

    /// Row of kernel samples `K(mΔt, x_j)`.
    pub fn kernel_row(&self, m: usize) -> Vec<Complex64> {
        let nx = self.spec.nx;
        if m == 0 {
            let mut v = vec![Complex64::new(0.0, 0.0); nx];
            v[0] = Complex64::new(1.0 / self.spec.dx(), 0.0);
            return v;
        }
        let sigma = self.spec.sign.sigma();
        let t = self.spec.t(m);
        let mut v: Vec<Complex64> = (0..nx)
            .map(|j| {
                let k = self.spec.wavenumber(j);
                Complex64::from_polar(1.0, -sigma * k * k * t)
            })
            .collect();
        self.inv.process(&mut v);
        let s = 1.0 / self.spec.lx;
        v.iter_mut().for_each(|z| *z *= s);
        v
    }

    /// `Σ_{m ≥ m_min} Δt w_m² Σ_z Δx |K(mΔt, y−z)|² χ(t_y − mΔt, z)²`.
    pub fn coinciding_sum(&self, m_min: usize, m_max: Option<usize>) -> Field {
        let (nt, nx) = (self.spec.nt, self.spec.nx);
        let dt = self.spec.dt();
        let chi2 = self.chi.mul(&self.chi);
        let mut out = Field::zeros(nt, nx);
        let upper = m_max.unwrap_or(nt - 1).min(nt - 1);
        for m in m_min..=upper {
            let k = self.kernel_row(m);
            let k2: Vec<Complex64> = k.iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
            let w = if m == 0 { 0.5 } else { 1.0 };
            for n in m..nt {
                let src = chi2.row(n - m);
                if src.iter().all(|z| z.re == 0.0) {
                    continue;
                }
                let conv = self.convolve_rows(&k2, src);
                let row = out.row_mut(n);
                for j in 0..nx {
                    row[j] += dt * w * w * Complex64::new(conv[j].re, 0.0);
                }
            }
        }
        out
    }
}

/// Which kernel a grid holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    G,
    Gbar,
}

/// Samples `K(t_n, x_j)` for time offsets `n ≥ 0` and space offsets
/// `|j| ≤ j_half`; negative time offsets read as zero.
#[derive(Clone, Debug)]
pub struct KernelGrid {
    pub spec: LatticeSpec,
    pub kind: KernelKind,
    pub j_half: usize,
    data: Vec<Complex64>,
}

impl KernelGrid {
    pub fn width(&self) -> usize {
        2 * self.j_half + 1
    }

    pub fn get(&self, n: i64, j: i64) -> Complex64 {
        if n < 0 || n as usize >= self.spec.nt || j.unsigned_abs() as usize > self.j_half {
            return Complex64::new(0.0, 0.0);
        }
        self.data[n as usize * self.width() + (j + self.j_half as i64) as usize]
    }

    pub fn conj(&self) -> KernelGrid {
        let kind = match self.kind {
            KernelKind::G => KernelKind::Gbar,
            KernelKind::Gbar => KernelKind::G,
        };
        KernelGrid { spec: self.spec, kind, j_half: self.j_half, data: self.data.iter().map(|z| z.conj()).collect() }
    }
}

/// Lattice samples of `G` (or `Ḡ` when `bar`), spatial offsets limited to
/// `|x| ≤ x_half` when given.
pub fn kernel_g_window(spec: &LatticeSpec, bar: bool, x_half: Option<f64>) -> Result<KernelGrid, NumericsError> {
    let p = Propagator::new(spec)?;
    let j_half = match x_half {
        Some(h) => ((h / spec.dx()).floor() as usize).min(spec.nx / 2),
        None => spec.nx / 2,
    };
    let width = 2 * j_half + 1;
    let mut data = Vec::with_capacity(spec.nt * width);
    for n in 0..spec.nt {
        let row = p.kernel_row(n);
        for jj in 0..width {
            let j = jj as i64 - j_half as i64;
            let z = row[j.rem_euclid(spec.nx as i64) as usize];
            data.push(if bar { z.conj() } else { z });
        }
    }
    Ok(KernelGrid { spec: *spec, kind: if bar { KernelKind::Gbar } else { KernelKind::G }, j_half, data })
}

pub fn kernel_g(spec: &LatticeSpec, bar: bool) -> Result<KernelGrid, NumericsError> {
    kernel_g_window(spec, bar, None)
}

/// `Q(x₁,x₂) = Σ_z ΔtΔx G_χ(x₁,z) conj(G_χ(x₂,z))` paired with test
/// functions.
#[derive(Clone, Debug)]
pub struct QKernel {
    pub prop: Propagator,
}

pub fn kernel_q(spec: &LatticeSpec) -> Result<QKernel, NumericsError> {
    Ok(QKernel { prop: Propagator::new(spec)? })
}

impl QKernel {
    /// `Q(f₁⊗f₂) = Σ_z ΔtΔx χ² (G*f₁) conj(G*f̄₂)`.
    pub fn pair(&self, f1: &Field, f2: &Field) -> Complex64 {
        let b1 = self.prop.adjoint(f1);
        let b2 = self.prop.adjoint(&f2.conj()).conj();
        let chi2 = self.prop.chi.mul(&self.prop.chi);
        b1.mul(&b2).pair(&chi2, &self.prop.spec)
    }

    pub fn pair_tf(&self, f1: &TestFunction, f2: &TestFunction) -> Complex64 {
        self.pair(&f1.field, &f2.field)
    }

    /// Pointwise `Q(x₁, ·)` paired with `f₂`, as a field in `x₁`.
    pub fn apply_right(&self, f2: &Field) -> Field {
        let b2 = self.prop.adjoint(&f2.conj()).conj();
        let chi2 = self.prop.chi.mul(&self.prop.chi);
        self.prop.forward(&chi2.mul(&b2))
    }
}

/// How the coinciding-point product `G·Ḡ` is extended across `t = t′`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// Drop time separations below `ε`.
    #[default]
    EpsilonCut,
    /// `ε`-cut with the fitted `B·log ε` trend removed.
    EpsilonCutLogsub,
}

/// `C̄(y) = Σ_{t_y−t_z ≥ ε} ΔtΔx |K(y−z)|² χ(z)²` for the chosen extension.
/// The kernel is real, so the `C` grid coincides with `C̄`.
pub fn coeff_c(spec: &LatticeSpec, ext: Extension) -> Result<Field, NumericsError> {
    let p = Propagator::new(spec)?;
    coeff_c_with(&p, ext)
}

pub fn coeff_c_with(p: &Propagator, ext: Extension) -> Result<Field, NumericsError> {
    let m0 = p.spec.epsilon_steps();
    match ext {
        EpsilonCut => Ok(p.coinciding_sum(m0, None)),
        EpsilonCutLogsub => {
            // Sums over the dyadic shells [m0·2^j, m0·2^{j+1}) give C̄ at
            // ε·2^j by accumulation from the far end.
            let levels = 4;
            let mut shells = Vec::with_capacity(levels);
            for j in 0..levels {
                let lo = m0 << j;
                let hi = if j + 1 < levels { Some((m0 << (j + 1)) - 1) } else { None };
                if lo >= p.spec.nt {
                    return Err(NumericsError::InvalidSpec("epsilon too large for the log fit".into()));
                }
                shells.push(p.coinciding_sum(lo, hi));
            }
            let mut cum = vec![shells[levels - 1].clone()];
            for j in (0..levels - 1).rev() {
                let next = cum[0].add(&shells[j]);
                cum.insert(0, next);
            }
            let logs: Vec<f64> = (0..levels).map(|j| (p.spec.epsilon * f64::from(1u32 << j)).ln()).collect();
            let lmean = logs.iter().sum::<f64>() / levels as f64;
            let sxx: f64 = logs.iter().map(|l| (l - lmean).powi(2)).sum();
            let mut out = cum[0].clone();
            for i in 0..out.data.len() {
                let ys: Vec<f64> = cum.iter().map(|c| c.data[i].re).collect();
                let ymean = ys.iter().sum::<f64>() / levels as f64;
                let sxy: f64 = logs.iter().zip(&ys).map(|(l, y)| (l - lmean) * (y - ymean)).sum();
                let b = sxy / sxx;
                out.data[i] = Complex64::new(ys[0] - b * logs[0], 0.0);
            }
            Ok(out)
        }
    }
}

use Extension::{EpsilonCut, EpsilonCutLogsub};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::lattice::{BumpParams, SignConvention};

    fn small() -> LatticeSpec {
        let mut s = LatticeSpec::reference();
        s.nt = 64;
        s.nx = 64;
        s.epsilon = 2.0 * s.dt();
        s
    }

    #[test]
    fn sign_selection() {
        let plus = LatticeSpec::reference();
        assert!(sign_residual(&plus) < 1e-6, "{}", sign_residual(&plus));
        let mut minus = plus;
        minus.sign = SignConvention::Minus;
        assert!(sign_residual(&minus) > 1e-2);
    }

    #[test]
    fn damped_spectral_sum_matches_closed_form() {
        let mut s = LatticeSpec::reference();
        s.nx = 1024;
        let delta = 0.01;
        let (t, x) = (0.3, 1.0);
        let sum: Complex64 = (0..s.nx)
            .map(|j| {
                let k = s.wavenumber(j);
                Complex64::from_polar((-delta * k * k).exp(), k * x - k * k * t)
            })
            .sum::<Complex64>()
            / s.lx;
        let images: Complex64 = (-20..=20).map(|m| damped_closed_form_g(t, x + m as f64 * s.lx, delta)).sum();
        assert!((sum - images).norm() < 1e-10, "{sum} vs {images}");
    }

    #[test]
    fn kernel_grid_is_causal_and_conjugate() {
        let s = small();
        let g = kernel_g(&s, false).unwrap();
        let gb = kernel_g(&s, true).unwrap();
        for j in -5..=5 {
            assert_eq!(g.get(-1, j), Complex64::new(0.0, 0.0));
            for n in 0..s.nt as i64 {
                assert_eq!(gb.get(n, j), g.get(n, j).conj());
            }
        }
        assert_eq!(g.conj().get(3, 2), gb.get(3, 2));
    }

    #[test]
    fn forward_matches_direct_sum() {
        let s = small();
        let p = Propagator::new(&s).unwrap();
        let g = kernel_g(&s, false).unwrap();
        let src = Field::from_fn(&s, |t, x| Complex64::new((t * 3.0).sin() * (x).cos(), t * x));
        let fast = p.forward(&src);
        let (n, j) = (20usize, 7usize);
        let mut direct = Complex64::new(0.0, 0.0);
        for m in 0..=n {
            let w = if m == n { 0.5 } else { 1.0 };
            for z in 0..s.nx {
                let mut off = (j as i64 - z as i64).rem_euclid(s.nx as i64);
                if off > s.nx as i64 / 2 {
                    off -= s.nx as i64;
                }
                direct += s.cell() * w * g.get((n - m) as i64, off) * src.get(m, z);
            }
        }
        assert!((fast.get(n, j) - direct).norm() < 1e-9 * direct.norm().max(1.0));
    }

    #[test]
    fn adjoint_identity() {
        let s = small();
        let p = Propagator::new(&s).unwrap();
        let a = Field::from_fn(&s, |t, x| Complex64::new((t * 5.0).cos(), x.sin()));
        let b = Field::from_fn(&s, |t, x| Complex64::new(x.cos() * t, (2.0 * t).sin()));
        let lhs = a.pair(&p.forward(&b), &s);
        let rhs = p.adjoint(&a).pair(&b, &s);
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
    }

    #[test]
    fn q_is_hermitian() {
        let s = small();
        let q = kernel_q(&s).unwrap();
        let f1 = TestFunction::bump(&s, &BumpParams { center_t: 0.3, center_x: 3.0, radius_t: 0.1, radius_x: 0.6, plateau: 0.0, amplitude: 1.0 });
        let f2 = TestFunction::bump(&s, &BumpParams { center_t: 0.6, center_x: 3.5, radius_t: 0.15, radius_x: 0.5, plateau: 0.0, amplitude: 1.0 });
        let a = q.pair_tf(&f1, &f2);
        let b = q.pair_tf(&f2, &f1);
        assert!((a - b.conj()).norm() < 1e-10);
        assert!(a.norm() > 1e-6);
        let via_field = f1.field.pair(&q.apply_right(&f2.field), &s);
        assert!((via_field - a).norm() < 1e-10);
    }

    #[test]
    fn zero_cutoff_kills_c() {
        let mut s = small();
        s.chi = crate::numerics::lattice::Cutoff::zero();
        let c = coeff_c(&s, Extension::EpsilonCut).unwrap();
        assert_eq!(c.max_abs(), 0.0);
    }

    #[test]
    fn c_is_real_and_nonnegative() {
        let s = small();
        let c = coeff_c(&s, Extension::EpsilonCut).unwrap();
        assert!(c.data.iter().all(|z| z.im == 0.0 && z.re >= 0.0));
        assert!(c.max_abs() > 0.0);
        let l = coeff_c(&s, Extension::EpsilonCutLogsub).unwrap();
        assert!(l.data.iter().all(|z| z.im == 0.0));
        assert!(l.sub(&c).max_abs() > 0.0);
    }
}
