//! Symbolic and numerical engine for the stochastic nonlinear Schrödinger
//! equation with complex white noise.
//!
//! The symbolic side manipulates polynomial functionals of two independent
//! fields `Φ`, `Φ̄`, their `Q`-deformed products, the perturbative solution
//! and its counterterms. The numerical side evaluates the resulting kernel
//! diagrams on a periodic lattice and checks them against Monte Carlo.

pub mod acceptance;
pub mod algebra;
pub mod cli;
pub mod config;
pub mod deformation;
pub mod diagram;
pub mod numerics;
pub mod oracle;
pub mod perturbation;
pub mod power_counting;

pub use algebra::{Atom, Body, Coeff, Expr, Generator, Grading, Monomial, Token};
pub use deformation::{bullet_product, deformed_product, gamma, gamma_dot, MultiExpr};
pub use diagram::{Decoration, Diagram, EdgeKind};

