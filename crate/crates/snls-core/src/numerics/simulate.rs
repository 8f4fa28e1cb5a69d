//! Monte Carlo oracles for the linear and the one-iterate nonlinear
//! equation.
//!
//! Realization `r` draws its noise from a ChaCha stream keyed by
//! `(seed, r)`, so results do not depend on thread scheduling; per-sample
//! values are reduced in index order.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimate::{Accumulator, Estimate};
use super::kernel::{coeff_c_with, Extension, Propagator};
use super::lattice::{Field, LatticeSpec, TestFunction};
use super::NumericsError;

pub const MIN_REALIZATIONS: usize = 100;

/// Complex white noise on the grid: independent real and imaginary parts,
/// `E[ξξ̄] = (ΔtΔx)⁻¹`, `E[ξξ] = 0`.
pub fn noise_field(spec: &LatticeSpec, seed: u64, realization: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(realization);
    let s = (2.0 * spec.cell()).sqrt().recip();
    let data = (0..spec.nt * spec.nx)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(a * s, b * s)
        })
        .collect();
    Field { nt: spec.nt, nx: spec.nx, data }
}

/// `φ(f) = Σ ΔtΔx f φ`.
fn apply(f: &TestFunction, phi: &Field, spec: &LatticeSpec) -> Complex64 {
    f.field.pair(phi, spec)
}

/// `φ̄(f) = Σ ΔtΔx f φ̄`.
fn apply_bar(f: &TestFunction, phi: &Field, spec: &LatticeSpec) -> Complex64 {
    f.field.pair(&phi.conj(), spec)
}

fn check_n(n_real: usize) -> Result<(), NumericsError> {
    if n_real < MIN_REALIZATIONS {
        return Err(NumericsError::TooFewRealizations { min: MIN_REALIZATIONS, got: n_real });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearReport {
    /// `E[φ(f₁)φ̄(f₂)]` per pair.
    pub covariance: Vec<Estimate>,
    /// `E[φ(f₁)φ(f₂)]` per pair.
    pub pseudo_covariance: Vec<Estimate>,
    /// `E[φ(f₁)]` per pair.
    pub mean: Vec<Estimate>,
}

/// Samples `φ = G_χ⋆ξ` and estimates covariances on the given pairs.
pub fn simulate_linear(
    spec: &LatticeSpec,
    n_real: usize,
    observables: &[(TestFunction, TestFunction)],
    seed: u64,
) -> Result<LinearReport, NumericsError> {
    check_n(n_real)?;
    let prop = Propagator::new(spec)?;
    let samples: Vec<Vec<[Complex64; 3]>> = (0..n_real as u64)
        .into_par_iter()
        .map(|r| {
            let phi = prop.g_chi(&noise_field(spec, seed, r));
            observables
                .iter()
                .map(|(f1, f2)| {
                    let a = apply(f1, &phi, spec);
                    [a * apply_bar(f2, &phi, spec), a * apply(f2, &phi, spec), a]
                })
                .collect()
        })
        .collect();
    let mut acc = vec![[Accumulator::new(), Accumulator::new(), Accumulator::new()]; observables.len()];
    for s in &samples {
        for (a, v) in acc.iter_mut().zip(s) {
            for i in 0..3 {
                a[i].push(v[i]);
            }
        }
    }
    Ok(LinearReport {
        covariance: acc.iter().map(|a| a[0].estimate()).collect(),
        pseudo_covariance: acc.iter().map(|a| a[1].estimate()).collect(),
        mean: acc.iter().map(|a| a[2].estimate()).collect(),
    })
}

/// One Picard iterate `ψ = φ + λ G_χ⋆(φ̄φ² − 2δφ)` with `φ = G_χ⋆ξ`.
///
/// `δ = Q(y,y) − C̄(y)` removes the part of the lattice coinciding-point
/// value `Q(y,y)` that the chosen extension discards, so the Monte Carlo
/// product and the diagram evaluation use the same `C̄`.
#[derive(Clone, Debug)]
pub struct FirstOrderSimulator {
    pub prop: Propagator,
    pub cbar: Field,
    delta: Field,
    pub seed: u64,
}

/// Per-realization pieces of `ψ(f₁)ψ̄(f₂)` in powers of `λ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardSample {
    /// `φ(f₁)φ̄(f₂)`.
    pub c0: Complex64,
    /// `u(f₁)φ̄(f₂) + φ(f₁)ū(f₂)`.
    pub c1: Complex64,
    /// `u(f₁)ū(f₂)`.
    pub c2: Complex64,
    /// `φ(f₁)` and `u(f₁)`.
    pub phi1: Complex64,
    pub u1: Complex64,
}

impl PicardSample {
    pub fn two_point(&self, lambda: f64) -> Complex64 {
        self.c0 + lambda * self.c1 + lambda * lambda * self.c2
    }

    pub fn mean(&self, lambda: f64) -> Complex64 {
        self.phi1 + lambda * self.u1
    }
}

impl FirstOrderSimulator {
    pub fn new(spec: &LatticeSpec, ext: Extension, seed: u64) -> Result<FirstOrderSimulator, NumericsError> {
        let prop = Propagator::new(spec)?;
        let cbar = coeff_c_with(&prop, ext)?;
        let delta = prop.coinciding_sum(0, None).sub(&cbar);
        Ok(FirstOrderSimulator { prop, cbar, delta, seed })
    }

    pub fn sample(&self, r: u64, f1: &TestFunction, f2: &TestFunction) -> PicardSample {
        let spec = &self.prop.spec;
        let phi = self.prop.g_chi(&noise_field(spec, self.seed, r));
        let mut n = Field::zeros(spec.nt, spec.nx);
        for i in 0..n.data.len() {
            let p = phi.data[i];
            n.data[i] = p.norm_sqr() * p - 2.0 * self.delta.data[i] * p;
        }
        let u = self.prop.g_chi(&n);
        let (p1, u1) = (apply(f1, &phi, spec), apply(f1, &u, spec));
        let (pb2, ub2) = (apply_bar(f2, &phi, spec), apply_bar(f2, &u, spec));
        PicardSample { c0: p1 * pb2, c1: u1 * pb2 + p1 * ub2, c2: u1 * ub2, phi1: p1, u1 }
    }

    pub fn samples(&self, n_real: usize, f1: &TestFunction, f2: &TestFunction) -> Result<Vec<PicardSample>, NumericsError> {
        check_n(n_real)?;
        Ok((0..n_real as u64).into_par_iter().map(|r| self.sample(r, f1, f2)).collect())
    }

    /// `E[ψ(f₁)ψ̄(f₂)]` at coupling `λ`.
    pub fn two_point(&self, lambda: f64, n_real: usize, f1: &TestFunction, f2: &TestFunction) -> Result<Estimate, NumericsError> {
        Ok(self.samples(n_real, f1, f2)?.iter().map(|s| s.two_point(lambda)).collect::<Accumulator>().estimate())
    }
}

/// `E[ψ(f₁)ψ̄(f₂)]` for one Picard iterate at coupling `λ`.
pub fn simulate_first_order(
    spec: &LatticeSpec,
    lambda: f64,
    n_real: usize,
    f1: &TestFunction,
    f2: &TestFunction,
    ext: Extension,
    seed: u64,
) -> Result<Estimate, NumericsError> {
    FirstOrderSimulator::new(spec, ext, seed)?.two_point(lambda, n_real, f1, f2)
}

/// Finite differences in `λ` on common random numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub lambda: f64,
    /// `(E(λ) − E(0))/λ`.
    pub forward: Estimate,
    /// `(E(λ) − E(−λ))/(2λ)`.
    pub central: Estimate,
    /// `E[ψ(f₁)]` at `λ`.
    pub mean: Estimate,
}

pub fn slope_reports(samples: &[PicardSample], lambdas: &[f64]) -> Vec<SlopeReport> {
    lambdas
        .iter()
        .map(|&l| {
            let fwd: Accumulator = samples.iter().map(|s| (s.two_point(l) - s.two_point(0.0)) / l).collect();
            let cen: Accumulator = samples.iter().map(|s| (s.two_point(l) - s.two_point(-l)) / (2.0 * l)).collect();
            let mean: Accumulator = samples.iter().map(|s| s.mean(l)).collect();
            SlopeReport { lambda: l, forward: fwd.estimate(), central: cen.estimate(), mean: mean.estimate() }
        })
        .collect()
}
