//! Localized Fourier decay of `f·G` along rays in `(ω, k)`.
//!
//! `G` is taken in closed form at complex time `t − iδ` (the spectral sum
//! damped by `e^{−δk²}`) and cut by `Θ(t)`, with `Θ(0) = ½`. The damping
//! keeps the kernel resolved on the window; the jump at `t = 0` is
//! untouched.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::kernel::damped_closed_form_g;
use super::lattice::{BumpParams, Cutoff};
use super::scaling::fit_line;

/// Square `n × n` sampling window around a base point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayWindow {
    pub n: usize,
    pub t_center: f64,
    pub x_center: f64,
    pub t_half: f64,
    pub x_half: f64,
    pub damping: f64,
}

impl DecayWindow {
    /// 256² window of half-widths `0.5 × 2` centred at `(0, x0)`.
    pub fn around(x0: f64) -> DecayWindow {
        DecayWindow { n: 256, t_center: 0.0, x_center: x0, t_half: 0.5, x_half: 2.0, damping: 2e-3 }
    }

    fn dt(&self) -> f64 {
        2.0 * self.t_half / self.n as f64
    }

    fn dx(&self) -> f64 {
        2.0 * self.x_half / self.n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    /// Covector direction `(ω̂, k̂)`.
    pub direction: (f64, f64),
    /// Fitted `p` in `|F| ~ R^{-p}`.
    pub exponent: f64,
    /// Points above the noise floor used in the fit.
    pub points: usize,
    /// `p ≥ 3` on the tested range.
    pub rapid: bool,
}

/// Smallest ray index used in the fit.
const R_MIN: usize = 4;
/// Rays stop once the `ω` index passes this fraction of Nyquist: beyond it
/// the lattice transform of the jump at `t = 0` falls off like `cot(θ/2)`
/// rather than `1/θ`. The damped kernel is resolved in `x`, so `k` runs
/// up to Nyquist.
const BAND: f64 = 0.25;
/// Floor relative to the largest transform magnitude.
const FLOOR: f64 = 1e-11;

/// Transform `F(ω_m, k_l) = Σ ΔtΔx e^{−iωt − ikx} f·G`, FFT-ordered.
pub fn localized_transform(w: &DecayWindow, f: &BumpParams) -> Vec<Complex64> {
    let n = w.n;
    let (dt, dx) = (w.dt(), w.dx());
    let cut = Cutoff { center_t: f.center_t, center_x: f.center_x, radius_t: f.radius_t, radius_x: f.radius_x, plateau: f.plateau };
    let mut h = vec![Complex64::new(0.0, 0.0); n * n];
    for a in 0..n {
        let t = w.t_center - w.t_half + a as f64 * dt;
        for b in 0..n {
            let x = w.x_center - w.x_half + b as f64 * dx;
            let fv = f.amplitude * cut.value(t, x);
            if fv == 0.0 || t < -0.5 * dt {
                continue;
            }
            let g = damped_closed_form_g(t.max(0.0), x, w.damping);
            let theta = if t.abs() < 0.5 * dt { 0.5 } else { 1.0 };
            h[a * n + b] = fv * theta * g * dt * dx;
        }
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    for row in h.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for b in 0..n {
        for a in 0..n {
            col[a] = h[a * n + b];
        }
        fft.process(&mut col);
        for a in 0..n {
            h[a * n + b] = col[a];
        }
    }
    h
}

/// Fitted decay exponent of `f·G` along each direction.
pub fn directional_decay_test(w: &DecayWindow, f: &BumpParams, directions: &[(f64, f64)]) -> Vec<DecayRow> {
    let n = w.n;
    let big = localized_transform(w, f);
    let peak = big.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let dw = 2.0 * std::f64::consts::PI / (n as f64 * w.dt());
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * w.dx());
    directions
        .iter()
        .map(|&(om, k)| {
            let norm = (om * om + k * k).sqrt();
            let (om, k) = (om / norm, k / norm);
            // One ray step advances the dominant index by one.
            let step = (om.abs() / dw).max(k.abs() / dk).recip();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            let m_max = (n / 2) as f64 * BAND;
            for r in 1..n / 2 {
                let rr = r as f64 * step;
                let m = (rr * om / dw).round() as i64;
                let l = (rr * k / dk).round() as i64;
                if m.unsigned_abs() as f64 > m_max {
                    break;
                }
                let z = big[m.rem_euclid(n as i64) as usize * n + l.rem_euclid(n as i64) as usize].norm();
                if z <= FLOOR * peak {
                    break;
                }
                if r >= R_MIN {
                    xs.push(rr.ln());
                    ys.push(z.ln());
                }
            }
            let exponent = if xs.len() >= 3 { -fit_line(&xs, &ys).0 } else { f64::INFINITY };
            DecayRow { direction: (om, k), exponent, points: xs.len(), rapid: exponent >= 3.0 }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_gaussian_decays_rapidly() {
        // Far from the origin in time G is smooth, so every direction decays fast.
        let w = DecayWindow { t_center: 0.75, ..DecayWindow::around(0.0) };
        let f = BumpParams { center_t: 0.75, center_x: 0.0, radius_t: 0.2, radius_x: 1.0, plateau: 0.0, amplitude: 1.0 };
        for row in directional_decay_test(&w, &f, &[(0.0, 1.0), (1.0, 0.0), (-1.0, 0.0)]) {
            assert!(row.rapid, "{row:?}");
        }
    }
}
