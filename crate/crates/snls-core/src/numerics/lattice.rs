//! Periodic space-time lattice, cutoff and grid fields.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Sign in `L = i∂t ± Δ`. Under `Plus` a Fourier mode evolves as
/// `e^{ikx − ik²t}`, which is the convention under which the closed-form
/// kernel `(4πit)^{-1/2} e^{-x²/(4it)}` is annihilated by `L` off the origin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignConvention {
    #[default]
    Plus,
    Minus,
}

impl SignConvention {
    /// `σ` in the mode factor `e^{−iσk²t}`.
    pub fn sigma(self) -> f64 {
        match self {
            SignConvention::Plus => 1.0,
            SignConvention::Minus => -1.0,
        }
    }
}

/// Smooth bump `χ(t,x) = b((t−t₀)/r_t)·b((x−x₀)/r_x)`, with `b = 1` on
/// `|s| ≤ plateau` and `b = 0` for `|s| ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub center_t: f64,
    pub center_x: f64,
    pub radius_t: f64,
    pub radius_x: f64,
    pub plateau: f64,
}

/// `C^∞` step from 1 at `u ≤ 0` to 0 at `u ≥ 1`.
fn smooth_step_down(u: f64) -> f64 {
    if u <= 0.0 {
        return 1.0;
    }
    if u >= 1.0 {
        return 0.0;
    }
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    b / (a + b)
}

/// One-dimensional plateau bump on `[-1, 1]`.
pub fn bump(s: f64, plateau: f64) -> f64 {
    let s = s.abs();
    if s >= 1.0 {
        return 0.0;
    }
    if s <= plateau {
        return 1.0;
    }
    smooth_step_down((s - plateau) / (1.0 - plateau))
}

impl Cutoff {
    pub fn zero() -> Cutoff {
        Cutoff { center_t: 0.0, center_x: 0.0, radius_t: 0.0, radius_x: 0.0, plateau: 0.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.radius_t <= 0.0 || self.radius_x <= 0.0
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        bump((t - self.center_t) / self.radius_t, self.plateau) * bump((x - self.center_x) / self.radius_x, self.plateau)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Spatial dimension; lattice operations support `d = 1`.
    pub d: u32,
    /// Time horizon `T`; grid times are `nΔt`, `Δt = T/nt`.
    pub t_max: f64,
    /// Spatial period; grid points are `jΔx`, `Δx = Lx/nx`.
    pub lx: f64,
    pub nt: usize,
    pub nx: usize,
    /// Coinciding-time regulator, at least one time step.
    pub epsilon: f64,
    pub sign: SignConvention,
    pub chi: Cutoff,
}

impl LatticeSpec {
    /// The reference lattice: `T = 1`, `Lx = 2π`, `nt = nx = 128`.
    pub fn reference() -> LatticeSpec {
        let lx = 2.0 * std::f64::consts::PI;
        LatticeSpec {
            d: 1,
            t_max: 1.0,
            lx,
            nt: 128,
            nx: 128,
            epsilon: 2.0 / 128.0,
            sign: SignConvention::Plus,
            chi: Cutoff { center_t: 0.5, center_x: lx / 2.0, radius_t: 0.45, radius_x: 2.5, plateau: 0.3 },
        }
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        if self.d == 0 || self.d > 3 {
            return Err(NumericsError::UnsupportedDimension(self.d));
        }
        if self.nt < 8 || self.nx < 8 {
            return Err(NumericsError::InvalidSpec("nt and nx must be at least 8".into()));
        }
        if !(self.t_max > 0.0 && self.lx > 0.0) {
            return Err(NumericsError::InvalidSpec("T and Lx must be positive".into()));
        }
        if self.epsilon < self.dt() * (1.0 - 1e-9) {
            return Err(NumericsError::InvalidSpec(format!(
                "epsilon {} is below the time step {}",
                self.epsilon,
                self.dt()
            )));
        }
        let c = &self.chi;
        if !c.is_zero() {
            let inside = c.center_t - c.radius_t >= 0.0
                && c.center_t + c.radius_t <= self.t_max - self.dt()
                && c.center_x - c.radius_x >= 0.0
                && c.center_x + c.radius_x < self.lx;
            if !inside {
                return Err(NumericsError::InvalidSpec("cutoff support leaves the grid".into()));
            }
            if !(0.0..1.0).contains(&c.plateau) {
                return Err(NumericsError::InvalidSpec("cutoff plateau must lie in [0, 1)".into()));
            }
        }
        Ok(())
    }

    pub fn require_1d(&self) -> Result<(), NumericsError> {
        self.validate()?;
        if self.d != 1 {
            return Err(NumericsError::UnsupportedDimension(self.d));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.nt as f64
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    /// Space-time cell volume `ΔtΔx`.
    pub fn cell(&self) -> f64 {
        self.dt() * self.dx()
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    /// Wave number of DFT bin `j`, in FFT order.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.nx as i64;
        let j = j as i64;
        let m = if j < (n + 1) / 2 { j } else { j - n };
        2.0 * std::f64::consts::PI * m as f64 / self.lx
    }

    /// Number of whole time steps covered by `epsilon`.
    pub fn epsilon_steps(&self) -> usize {
        (self.epsilon / self.dt()).round().max(1.0) as usize
    }

    pub fn chi_field(&self) -> Field {
        Field::from_fn(self, |t, x| Complex64::new(self.chi.value(t, x), 0.0))
    }
}

/// Complex samples on the `nt × nx` grid, time-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub nt: usize,
    pub nx: usize,
    pub data: Vec<Complex64>,
}

impl Field {
    pub fn zeros(nt: usize, nx: usize) -> Field {
        Field { nt, nx, data: vec![Complex64::new(0.0, 0.0); nt * nx] }
    }

    pub fn from_fn(spec: &LatticeSpec, f: impl Fn(f64, f64) -> Complex64) -> Field {
        let mut data = Vec::with_capacity(spec.nt * spec.nx);
        for n in 0..spec.nt {
            for j in 0..spec.nx {
                data.push(f(spec.t(n), spec.x(j)));
            }
        }
        Field { nt: spec.nt, nx: spec.nx, data }
    }

    pub fn row(&self, n: usize) -> &[Complex64] {
        &self.data[n * self.nx..(n + 1) * self.nx]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [Complex64] {
        &mut self.data[n * self.nx..(n + 1) * self.nx]
    }

    pub fn get(&self, n: usize, j: usize) -> Complex64 {
        self.data[n * self.nx + j]
    }

    pub fn conj(&self) -> Field {
        Field { nt: self.nt, nx: self.nx, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn mul(&self, o: &Field) -> Field {
        Field { nt: self.nt, nx: self.nx, data: self.data.iter().zip(&o.data).map(|(a, b)| a * b).collect() }
    }

    pub fn add(&self, o: &Field) -> Field {
        Field { nt: self.nt, nx: self.nx, data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &Field) -> Field {
        Field { nt: self.nt, nx: self.nx, data: self.data.iter().zip(&o.data).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, c: Complex64) -> Field {
        Field { nt: self.nt, nx: self.nx, data: self.data.iter().map(|a| a * c).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `Σ ΔtΔx f·g` without conjugation.
    pub fn pair(&self, o: &Field, spec: &LatticeSpec) -> Complex64 {
        self.data.iter().zip(&o.data).map(|(a, b)| a * b).sum::<Complex64>() * spec.cell()
    }
}

/// Box `[t0, t1] × [x0, x1]` outside of which a test function vanishes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    pub x1: f64,
}

/// Real bump test function sampled on the lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub field: Field,
    pub support: SupportBox,
}

/// Parameters of a bump test function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpParams {
    pub center_t: f64,
    pub center_x: f64,
    pub radius_t: f64,
    pub radius_x: f64,
    #[serde(default)]
    pub plateau: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl TestFunction {
    pub fn bump(spec: &LatticeSpec, p: &BumpParams) -> TestFunction {
        let c = Cutoff { center_t: p.center_t, center_x: p.center_x, radius_t: p.radius_t, radius_x: p.radius_x, plateau: p.plateau };
        TestFunction {
            field: Field::from_fn(spec, |t, x| Complex64::new(p.amplitude * c.value(t, x), 0.0)),
            support: SupportBox {
                t0: p.center_t - p.radius_t,
                t1: p.center_t + p.radius_t,
                x0: p.center_x - p.radius_x,
                x1: p.center_x + p.radius_x,
            },
        }
    }

    pub fn conj(&self) -> TestFunction {
        TestFunction { field: self.field.conj(), support: self.support }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_shape() {
        assert_eq!(bump(0.0, 0.3), 1.0);
        assert_eq!(bump(0.3, 0.3), 1.0);
        assert_eq!(bump(1.0, 0.3), 0.0);
        let mid = bump(0.65, 0.3);
        assert!(mid > 0.0 && mid < 1.0);
        assert!((bump(-0.5, 0.3) - bump(0.5, 0.3)).abs() < 1e-15);
    }

    #[test]
    fn reference_is_valid() {
        let s = LatticeSpec::reference();
        s.validate().unwrap();
        assert_eq!(s.epsilon_steps(), 2);
        assert!((s.wavenumber(127) + 1.0).abs() < 1e-12);
        assert!((s.wavenumber(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs() {
        let mut s = LatticeSpec::reference();
        s.d = 4;
        assert_eq!(s.validate(), Err(NumericsError::UnsupportedDimension(4)));
        let mut s = LatticeSpec::reference();
        s.epsilon = s.dt() / 2.0;
        assert!(s.validate().is_err());
        let mut s = LatticeSpec::reference();
        s.chi.radius_x = 10.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn test_function_vanishes_outside_support() {
        let s = LatticeSpec::reference();
        let p = BumpParams { center_t: 0.4, center_x: 3.0, radius_t: 0.1, radius_x: 0.5, plateau: 0.0, amplitude: 1.0 };
        let f = TestFunction::bump(&s, &p);
        for n in 0..s.nt {
            for j in 0..s.nx {
                let (t, x) = (s.t(n), s.x(j));
                let inside = t > f.support.t0 && t < f.support.t1 && x > f.support.x0 && x < f.support.x1;
                if !inside {
                    assert_eq!(f.field.get(n, j), Complex64::new(0.0, 0.0));
                }
            }
        }
    }
}
