//! Pair potentials with declared regularity constants.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::mollify::GridPotential;
use crate::error::{Error, Result};
use crate::jet::CoreScalar;

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

#[derive(Clone)]
pub(crate) enum PotentialKind {
    Zero,
    /// `A (1 - |x|²/r²)^k` inside the ball of radius `r`, zero outside.
    PolyBump {
        amplitude: f64,
        radius: f64,
        exponent: u32,
    },
    /// `A exp(-|x|² / 2σ²)`.
    Gaussian { amplitude: f64, width: f64 },
    Shifted {
        base: Arc<PotentialSpec>,
        offset: Vec<f64>,
    },
    /// `x ↦ base(-x)`.
    Reflected(Arc<PotentialSpec>),
    Grid(Arc<GridPotential>),
    Custom {
        name: &'static str,
        eval: Arc<EvalFn>,
        grad: Arc<GradFn>,
    },
}

impl fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialKind::Zero => write!(f, "Zero"),
            PotentialKind::PolyBump {
                amplitude,
                radius,
                exponent,
            } => write!(f, "PolyBump({amplitude}, {radius}, {exponent})"),
            PotentialKind::Gaussian { amplitude, width } => {
                write!(f, "Gaussian({amplitude}, {width})")
            }
            PotentialKind::Shifted { base, offset } => write!(f, "Shifted({base:?}, {offset:?})"),
            PotentialKind::Reflected(b) => write!(f, "Reflected({b:?})"),
            PotentialKind::Grid(g) => write!(f, "Grid(m = {})", g.m),
            PotentialKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// A pair potential `V: ℝⁿ → ℝ` together with its declared constants.
///
/// `grad_sup` bounds `‖∇V‖_∞` and `grad_lipschitz` bounds the Lipschitz
/// constant of `∇V`. Both are inputs (the built-in families fill them in
/// from closed forms); they are checked by sampling, never trusted blindly.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    pub(crate) kind: PotentialKind,
    dim: usize,
    grad_sup: Option<f64>,
    grad_lipschitz: Option<f64>,
    support_radius: Option<f64>,
    support_center: Vec<f64>,
}

impl PotentialSpec {
    fn with_kind(kind: PotentialKind, dim: usize) -> Self {
        PotentialSpec {
            kind,
            dim,
            grad_sup: None,
            grad_lipschitz: None,
            support_radius: None,
            support_center: vec![0.0; dim],
        }
    }

    /// The zero interaction.
    pub fn zero(dim: usize) -> Self {
        let mut s = Self::with_kind(PotentialKind::Zero, dim);
        s.grad_sup = Some(0.0);
        s.grad_lipschitz = Some(0.0);
        s
    }

    /// Compactly supported bump `A (1 - |x|²/r²)^k_+` with `k ≥ 2`.
    pub fn poly_bump(dim: usize, amplitude: f64, radius: f64, exponent: u32) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bump radius must be positive, got {radius}"
            )));
        }
        if exponent < 2 {
            return Err(Error::InvalidArgument(format!(
                "bump exponent must be at least 2 for a Lipschitz gradient, got {exponent}"
            )));
        }
        if !amplitude.is_finite() {
            return Err(Error::InvalidArgument("bump amplitude must be finite".into()));
        }
        let k = exponent as f64;
        let a = amplitude.abs();
        let u2 = 1.0 / (2.0 * k - 1.0);
        let grad_sup = a * (2.0 * k / radius) * u2.sqrt() * (1.0 - u2).powi(exponent as i32 - 1);
        let mut hess = 0.0f64;
        let n = 20_000;
        for i in 0..=n {
            let v = i as f64 / n as f64;
            let radial = ((1.0 - v).powi(exponent as i32 - 2) * (1.0 - (2.0 * k - 1.0) * v)).abs();
            let tangential = (1.0 - v).powi(exponent as i32 - 1);
            hess = hess.max(radial).max(tangential);
        }
        let lipschitz = 2.0 * k * a / (radius * radius) * hess * (1.0 + 1e-6);
        let mut s = Self::with_kind(
            PotentialKind::PolyBump {
                amplitude,
                radius,
                exponent,
            },
            dim,
        );
        s.grad_sup = Some(grad_sup * (1.0 + 1e-12));
        s.grad_lipschitz = Some(lipschitz);
        s.support_radius = Some(radius);
        Ok(s)
    }

    /// Gaussian `A exp(-|x|²/2σ²)`: smooth, vanishing at infinity, not compact.
    pub fn gaussian(dim: usize, amplitude: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) || !amplitude.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gaussian needs finite amplitude and positive width, got ({amplitude}, {width})"
            )));
        }
        let a = amplitude.abs();
        let mut s = Self::with_kind(PotentialKind::Gaussian { amplitude, width }, dim);
        s.grad_sup = Some(a / width * (-0.5f64).exp() * (1.0 + 1e-12));
        s.grad_lipschitz = Some(a / (width * width) * (1.0 + 1e-12));
        Ok(s)
    }

    /// A user-supplied potential. Constants must be declared separately.
    pub fn custom<E, G>(dim: usize, name: &'static str, eval: E, grad: G) -> Self
    where
        E: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self::with_kind(
            PotentialKind::Custom {
                name,
                eval: Arc::new(eval),
                grad: Arc::new(grad),
            },
            dim,
        )
    }

    pub(crate) fn from_grid(grid: Arc<GridPotential>) -> Self {
        let dim = grid.dim;
        let mut s = Self::with_kind(PotentialKind::Grid(grid.clone()), dim);
        s.grad_sup = Some(grid.grad_sup);
        s.grad_lipschitz = Some(grid.grad_lipschitz);
        s.support_radius = Some(grid.support_radius);
        s.support_center = grid.center.clone();
        s
    }

    pub fn with_grad_sup(mut self, value: f64) -> Self {
        self.grad_sup = Some(value);
        self
    }

    pub fn with_grad_lipschitz(mut self, value: f64) -> Self {
        self.grad_lipschitz = Some(value);
        self
    }

    pub fn with_support_radius(mut self, radius: f64) -> Self {
        self.support_radius = Some(radius);
        self
    }

    /// `x ↦ V(x - offset)`. Constants and radius carry over; the support
    /// center moves by `offset`.
    pub fn shifted(&self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: offset.len(),
            });
        }
        let mut s = Self::with_kind(
            PotentialKind::Shifted {
                base: Arc::new(self.clone()),
                offset: offset.to_vec(),
            },
            self.dim,
        );
        s.grad_sup = self.grad_sup;
        s.grad_lipschitz = self.grad_lipschitz;
        s.support_radius = self.support_radius;
        s.support_center = self
            .support_center
            .iter()
            .zip(offset)
            .map(|(c, o)| c + o)
            .collect();
        Ok(s)
    }

    /// `x ↦ V(-x)`, the potential seen from the other end of a pair.
    pub fn reflected(&self) -> Self {
        let mut s = Self::with_kind(PotentialKind::Reflected(Arc::new(self.clone())), self.dim);
        s.grad_sup = self.grad_sup;
        s.grad_lipschitz = self.grad_lipschitz;
        s.support_radius = self.support_radius;
        s.support_center = self.support_center.iter().map(|c| -c).collect();
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grad_sup(&self) -> Option<f64> {
        self.grad_sup
    }

    pub fn grad_lipschitz(&self) -> Option<f64> {
        self.grad_lipschitz
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    pub fn support_center(&self) -> &[f64] {
        &self.support_center
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            PotentialKind::Zero => true,
            PotentialKind::Shifted { base, .. } => base.is_zero(),
            PotentialKind::Reflected(b) => b.is_zero(),
            PotentialKind::Grid(g) => g.is_zero(),
            PotentialKind::PolyBump { amplitude, .. } | PotentialKind::Gaussian { amplitude, .. } => {
                *amplitude == 0.0
            }
            PotentialKind::Custom { .. } => false,
        }
    }

    /// Short family label used in reports.
    pub fn family(&self) -> &'static str {
        match &self.kind {
            PotentialKind::Zero => "zero",
            PotentialKind::PolyBump { .. } => "poly_bump",
            PotentialKind::Gaussian { .. } => "gaussian",
            PotentialKind::Shifted { base, .. } | PotentialKind::Reflected(base) => base.family(),
            PotentialKind::Grid(_) => "mollified",
            PotentialKind::Custom { name, .. } => name,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::PolyBump {
                amplitude,
                radius,
                exponent,
            } => {
                let u = norm2(x) / (radius * radius);
                if u >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - u).powi(*exponent as i32)
                }
            }
            PotentialKind::Gaussian { amplitude, width } => {
                amplitude * (-norm2(x) / (2.0 * width * width)).exp()
            }
            PotentialKind::Shifted { base, offset } => {
                let y: smallvec::SmallVec<[f64; 3]> =
                    x.iter().zip(offset).map(|(a, b)| a - b).collect();
                base.eval(&y)
            }
            PotentialKind::Reflected(base) => {
                let y: smallvec::SmallVec<[f64; 3]> = x.iter().map(|a| -a).collect();
                base.eval(&y)
            }
            PotentialKind::Grid(g) => g.eval(x),
            PotentialKind::Custom { eval, .. } => eval(x),
        }
    }

    /// Writes `∇V(x)` into `out`.
    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            PotentialKind::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            PotentialKind::PolyBump {
                amplitude,
                radius,
                exponent,
            } => {
                let r2 = radius * radius;
                let u = norm2(x) / r2;
                if u >= 1.0 {
                    out.iter_mut().for_each(|o| *o = 0.0);
                } else {
                    let k = *exponent as f64;
                    let c = -amplitude * k * (1.0 - u).powi(*exponent as i32 - 1) * 2.0 / r2;
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = c * xi;
                    }
                }
            }
            PotentialKind::Gaussian { amplitude, width } => {
                let s2 = width * width;
                let c = -amplitude * (-norm2(x) / (2.0 * s2)).exp() / s2;
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = c * xi;
                }
            }
            PotentialKind::Shifted { base, offset } => {
                let y: smallvec::SmallVec<[f64; 3]> =
                    x.iter().zip(offset).map(|(a, b)| a - b).collect();
                base.grad(&y, out);
            }
            PotentialKind::Reflected(base) => {
                let y: smallvec::SmallVec<[f64; 3]> = x.iter().map(|a| -a).collect();
                base.grad(&y, out);
                out.iter_mut().for_each(|o| *o = -*o);
            }
            PotentialKind::Grid(g) => g.grad(x, out),
            PotentialKind::Custom { grad, .. } => grad(x, out),
        }
    }

    /// Whether [`eval_scalar`](Self::eval_scalar) supports this family.
    pub fn is_analytic(&self) -> bool {
        match &self.kind {
            PotentialKind::Zero | PotentialKind::PolyBump { .. } | PotentialKind::Gaussian { .. } => {
                true
            }
            PotentialKind::Shifted { base, .. } | PotentialKind::Reflected(base) => {
                base.is_analytic()
            }
            PotentialKind::Grid(_) | PotentialKind::Custom { .. } => false,
        }
    }

    /// Evaluates the potential on generic scalars (complex numbers or jets).
    ///
    /// The bump is piecewise polynomial; the branch is chosen from the real
    /// part of the base point, which is exact for jets as long as the
    /// requested derivative order does not exceed the bump exponent.
    pub fn eval_scalar<S: CoreScalar>(&self, x: &[S]) -> Result<S> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let one = Complex64::new(1.0, 0.0);
        match &self.kind {
            PotentialKind::Zero => Ok(x[0].lift(Complex64::new(0.0, 0.0))),
            PotentialKind::PolyBump {
                amplitude,
                radius,
                exponent,
            } => {
                let u = sum_squares(x).scale(Complex64::new(1.0 / (radius * radius), 0.0));
                if u.value().re >= 1.0 {
                    Ok(x[0].lift(Complex64::new(0.0, 0.0)))
                } else {
                    let base = u.lift(one).sub(&u);
                    Ok(base.powi(*exponent).scale(Complex64::new(*amplitude, 0.0)))
                }
            }
            PotentialKind::Gaussian { amplitude, width } => {
                let arg = sum_squares(x).scale(Complex64::new(-1.0 / (2.0 * width * width), 0.0));
                Ok(arg.exp().scale(Complex64::new(*amplitude, 0.0)))
            }
            PotentialKind::Shifted { base, offset } => {
                let y: Vec<S> = x
                    .iter()
                    .zip(offset)
                    .map(|(a, o)| a.sub(&a.lift(Complex64::new(*o, 0.0))))
                    .collect();
                base.eval_scalar(&y)
            }
            PotentialKind::Reflected(base) => {
                let y: Vec<S> = x.iter().map(|a| a.scale(-one)).collect();
                base.eval_scalar(&y)
            }
            PotentialKind::Grid(_) => Err(Error::NonAnalyticPotential("mollified")),
            PotentialKind::Custom { name, .. } => Err(Error::NonAnalyticPotential(name)),
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn sum_squares<S: CoreScalar>(x: &[S]) -> S {
    let mut acc = x[0].mul(&x[0]);
    for v in &x[1..] {
        acc = acc.add(&v.mul(v));
    }
    acc
}

/// `x ↦ V(x - offset)`; see [`PotentialSpec::shifted`].
pub fn shifted_potential(base: &PotentialSpec, offset: &[f64]) -> Result<PotentialSpec> {
    base.shifted(offset)
}
