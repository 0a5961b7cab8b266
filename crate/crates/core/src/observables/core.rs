//! Smooth functions on the range of a levee's projection.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jet::{CoreScalar, Jet};
use crate::model::PotentialSpec;

/// A function `g: ℝᵈ → ℂ` composed with a linear projection to form a levee.
#[derive(Clone, Debug)]
pub enum SmoothCore {
    /// `exp(-Σ y_i²)`.
    Gaussian { arity: usize },
    /// `(Σ_j c_j Π_i y_i^{e_ji}) exp(-Σ y_i²)`.
    PolyGaussian {
        arity: usize,
        terms: Vec<(Complex64, Vec<u32>)>,
    },
    /// `1/(iλ - y)` on a one-dimensional range.
    Resolvent { lambda: f64 },
    Constant { value: Complex64 },
    /// Product of cores acting on consecutive blocks of arguments.
    Product(Vec<SmoothCore>),
    /// A real pair potential read through its arguments.
    Potential(Arc<PotentialSpec>),
}

impl SmoothCore {
    pub fn arity(&self) -> usize {
        match self {
            SmoothCore::Gaussian { arity } | SmoothCore::PolyGaussian { arity, .. } => *arity,
            SmoothCore::Resolvent { .. } => 1,
            SmoothCore::Constant { .. } => 0,
            SmoothCore::Product(fs) => fs.iter().map(|f| f.arity()).sum(),
            SmoothCore::Potential(v) => v.dim(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            SmoothCore::Gaussian { .. } => "gaussian",
            SmoothCore::PolyGaussian { .. } => "poly_gaussian",
            SmoothCore::Resolvent { .. } => "resolvent",
            SmoothCore::Constant { .. } => "constant",
            SmoothCore::Product(_) => "product",
            SmoothCore::Potential(_) => "potential",
        }
    }

    /// Schwartz class on its range: Gaussian-type cores and products of them.
    pub fn is_schwartz(&self) -> bool {
        match self {
            SmoothCore::Gaussian { .. } | SmoothCore::PolyGaussian { .. } => true,
            SmoothCore::Product(fs) => {
                !fs.is_empty()
                    && fs.iter().all(|f| f.is_schwartz() || matches!(f, SmoothCore::Constant { .. }))
                    && fs.iter().any(|f| f.is_schwartz())
            }
            _ => false,
        }
    }

    /// Continuous and vanishing at infinity on its range.
    pub fn vanishes_at_infinity(&self) -> bool {
        match self {
            SmoothCore::Gaussian { .. } | SmoothCore::PolyGaussian { .. } | SmoothCore::Resolvent { .. } => {
                true
            }
            SmoothCore::Constant { value } => *value == Complex64::new(0.0, 0.0),
            SmoothCore::Product(fs) => fs.iter().all(|f| {
                f.vanishes_at_infinity() || matches!(f, SmoothCore::Constant { .. })
            }) && fs.iter().any(|f| f.vanishes_at_infinity()),
            SmoothCore::Potential(v) => v.support_radius().is_some(),
        }
    }

    pub fn contains_resolvent(&self) -> bool {
        match self {
            SmoothCore::Resolvent { .. } => true,
            SmoothCore::Product(fs) => fs.iter().any(|f| f.contains_resolvent()),
            _ => false,
        }
    }

    /// Whether derivatives of every order can be evaluated exactly.
    pub fn is_analytic(&self) -> bool {
        match self {
            SmoothCore::Product(fs) => fs.iter().all(|f| f.is_analytic()),
            SmoothCore::Potential(v) => v.is_analytic(),
            _ => true,
        }
    }

    /// Evaluates on generic scalars; `unit` is a constant one of the right shape.
    pub fn eval_generic<S: CoreScalar>(&self, y: &[S], unit: &S) -> Result<S> {
        if y.len() != self.arity() {
            return Err(Error::DimensionMismatch {
                expected: self.arity(),
                got: y.len(),
            });
        }
        let c = |v: f64| Complex64::new(v, 0.0);
        match self {
            SmoothCore::Gaussian { .. } => Ok(gaussian_factor(y, unit)),
            SmoothCore::PolyGaussian { terms, .. } => {
                let mut poly = unit.lift(c(0.0));
                for (coef, exps) in terms {
                    let mut mono = unit.lift(*coef);
                    for (yi, e) in y.iter().zip(exps) {
                        if *e > 0 {
                            mono = mono.mul(&yi.powi(*e));
                        }
                    }
                    poly = poly.add(&mono);
                }
                Ok(poly.mul(&gaussian_factor(y, unit)))
            }
            SmoothCore::Resolvent { lambda } => {
                let denom = unit.lift(Complex64::new(0.0, *lambda)).sub(&y[0]);
                Ok(denom.recip())
            }
            SmoothCore::Constant { value } => Ok(unit.lift(*value)),
            SmoothCore::Product(fs) => {
                let mut acc = unit.clone();
                let mut at = 0;
                for f in fs {
                    let a = f.arity();
                    acc = acc.mul(&f.eval_generic(&y[at..at + a], unit)?);
                    at += a;
                }
                Ok(acc)
            }
            SmoothCore::Potential(v) => v.eval_scalar(y),
        }
    }

    pub fn eval(&self, y: &[f64]) -> Result<Complex64> {
        if let SmoothCore::Potential(v) = self {
            return Ok(Complex64::new(v.eval(y), 0.0));
        }
        let args: Vec<Complex64> = y.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.eval_generic(&args, &Complex64::new(1.0, 0.0))
    }

    /// Exact gradient, obtained from first-order jets.
    pub fn grad(&self, y: &[f64]) -> Result<Vec<Complex64>> {
        let d = y.len();
        if let SmoothCore::Potential(v) = self {
            let mut g = vec![0.0; d];
            v.grad(y, &mut g);
            return Ok(g.into_iter().map(|x| Complex64::new(x, 0.0)).collect());
        }
        let args: Vec<Jet> = (0..d).map(|i| Jet::variable(d, 1, i, y[i])).collect();
        let unit = Jet::constant(d, 1, Complex64::new(1.0, 0.0));
        let j = self.eval_generic(&args, &unit)?;
        Ok((0..d).map(|i| j.coeffs()[1 + i]).collect())
    }

    /// Closed-form bound on `sup ‖∇g‖`, when one is known.
    pub fn grad_sup_bound(&self) -> Option<f64> {
        match self {
            // 2|y| e^{-|y|²} peaks at |y|² = 1/2
            SmoothCore::Gaussian { .. } => Some(2f64.sqrt() * (-0.5f64).exp()),
            SmoothCore::Resolvent { lambda } => Some(1.0 / (lambda * lambda)),
            SmoothCore::Constant { .. } => Some(0.0),
            SmoothCore::Potential(v) => v.grad_sup(),
            SmoothCore::Product(fs) if fs.len() == 1 => fs[0].grad_sup_bound(),
            _ => None,
        }
    }
}

fn gaussian_factor<S: CoreScalar>(y: &[S], unit: &S) -> S {
    let mut acc = unit.lift(Complex64::new(0.0, 0.0));
    for v in y {
        acc = acc.add(&v.mul(v));
    }
    acc.scale(Complex64::new(-1.0, 0.0)).exp()
}
