//! Truncated multivariate Taylor polynomials ("jets").
//!
//! A jet of order `r` in `v` variables stores every Taylor coefficient of
//! total degree at most `r`. Monomials are laid out in graded order, so the
//! coefficients of a lower-order truncation are a prefix of the full vector.
//! Arithmetic is exact forward-mode differentiation: nested Poisson brackets
//! are evaluated by differentiating jets, never by finite differences.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

/// Monomial table shared by all jets with the same `(nvars, order)`.
#[derive(Debug)]
pub struct JetLayout {
    nvars: usize,
    order: usize,
    exponents: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    products: Vec<(u32, u32, u32)>,
    // raise[var][i] = index of monomial i * x_var, for i in the order-1 prefix
    raise: Vec<Vec<u32>>,
}

impl JetLayout {
    fn build(nvars: usize, order: usize) -> Self {
        let mut exponents = Vec::new();
        let mut degree_start = Vec::with_capacity(order + 2);
        for deg in 0..=order {
            degree_start.push(exponents.len());
            let mut cur = vec![0u8; nvars];
            push_degree(&mut exponents, &mut cur, 0, deg);
        }
        degree_start.push(exponents.len());
        let index: HashMap<Vec<u8>, usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();

        let degree = |e: &[u8]| e.iter().map(|&x| x as usize).sum::<usize>();
        let mut products = Vec::new();
        for (i, a) in exponents.iter().enumerate() {
            let da = degree(a);
            for (j, b) in exponents.iter().enumerate().take(degree_start[order - da + 1]) {
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((i as u32, j as u32, index[&sum] as u32));
            }
        }

        let lower = if order == 0 { 0 } else { degree_start[order] };
        let raise = (0..nvars)
            .map(|v| {
                exponents[..lower]
                    .iter()
                    .map(|e| {
                        let mut r = e.clone();
                        r[v] += 1;
                        index[&r] as u32
                    })
                    .collect()
            })
            .collect();

        JetLayout {
            nvars,
            order,
            exponents,
            index,
            products,
            raise,
        }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }
}

// Emits all exponent vectors of total degree `left` for variables `pos..`,
// in lexicographically decreasing order of the leading variables.
fn push_degree(out: &mut Vec<Vec<u8>>, cur: &mut [u8], pos: usize, left: usize) {
    if pos + 1 == cur.len() {
        cur[pos] = left as u8;
        out.push(cur.to_vec());
        cur[pos] = 0;
        return;
    }
    if cur.is_empty() {
        if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k as u8;
        push_degree(out, cur, pos + 1, left - k);
    }
    cur[pos] = 0;
}

/// Returns the cached layout for `(nvars, order)`.
pub fn layout(nvars: usize, order: usize) -> Arc<JetLayout> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetLayout>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry((nvars, order))
        .or_insert_with(|| Arc::new(JetLayout::build(nvars, order)))
        .clone()
}

/// A truncated Taylor polynomial with complex coefficients.
#[derive(Clone, Debug)]
pub struct Jet {
    layout: Arc<JetLayout>,
    coeffs: Vec<Complex64>,
}

impl Jet {
    pub fn zero(nvars: usize, order: usize) -> Self {
        let layout = layout(nvars, order);
        let coeffs = vec![Complex64::new(0.0, 0.0); layout.len()];
        Jet { layout, coeffs }
    }

    pub fn constant(nvars: usize, order: usize, value: Complex64) -> Self {
        let mut j = Self::zero(nvars, order);
        j.coeffs[0] = value;
        j
    }

    /// The coordinate function `x_var` expanded around `value`.
    pub fn variable(nvars: usize, order: usize, var: usize, value: f64) -> Self {
        let mut j = Self::constant(nvars, order, Complex64::new(value, 0.0));
        if order > 0 {
            j.coeffs[1 + var] = Complex64::new(1.0, 0.0);
        }
        j
    }

    /// A real affine function `c + Σ a_v x_v` (only nonzero slopes listed).
    pub fn affine(nvars: usize, order: usize, value: f64, slopes: &[(usize, f64)]) -> Self {
        let mut j = Self::constant(nvars, order, Complex64::new(value, 0.0));
        if order > 0 {
            for &(v, a) in slopes {
                j.coeffs[1 + v] += Complex64::new(a, 0.0);
            }
        }
        j
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn value(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Taylor coefficient of the monomial with the given exponents.
    pub fn coeff(&self, exponents: &[u8]) -> Complex64 {
        self.layout
            .index
            .get(exponents)
            .map(|&i| self.coeffs[i])
            .unwrap_or_default()
    }

    /// First partial derivative `∂/∂x_var`, as a jet of one lower order.
    pub fn derivative(&self, var: usize) -> Jet {
        let order = self.order();
        if order == 0 {
            return Jet::zero(self.nvars(), 0);
        }
        let out_layout = layout(self.nvars(), order - 1);
        let raise = &self.layout.raise[var];
        let coeffs = (0..out_layout.len())
            .map(|i| {
                let r = raise[i] as usize;
                let k = self.layout.exponents[r][var] as f64;
                self.coeffs[r] * k
            })
            .collect();
        Jet {
            layout: out_layout,
            coeffs,
        }
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let l = layout(self.nvars(), order);
        let coeffs = self.coeffs[..l.len()].to_vec();
        Jet { layout: l, coeffs }
    }

    pub fn scale(&self, c: Complex64) -> Jet {
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|x| x * c).collect(),
        }
    }

    fn aligned<'a>(&'a self, other: &'a Jet) -> (Jet, Jet) {
        let order = self.order().min(other.order());
        (self.truncate(order), other.truncate(order))
    }

    fn mul_jet(&self, other: &Jet) -> Jet {
        if self.order() != other.order() {
            let (a, b) = self.aligned(other);
            return a.mul_jet(&b);
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len()];
        for &(i, j, k) in &self.layout.products {
            out[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Jet {
            layout: self.layout.clone(),
            coeffs: out,
        }
    }

    /// Applies the power series `Σ_k a_k (x - x0)^k` with `a_0 = f(x0)`.
    fn compose_series(&self, series: &[Complex64]) -> Jet {
        let mut nil = self.clone();
        nil.coeffs[0] = Complex64::new(0.0, 0.0);
        let mut out = Jet::constant(self.nvars(), self.order(), series[0]);
        let mut power = Jet::constant(self.nvars(), self.order(), Complex64::new(1.0, 0.0));
        for a in series.iter().skip(1) {
            power = power.mul_jet(&nil);
            out = &out + &power.scale(*a);
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut fact = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                fact *= k as f64;
            }
            series.push(e / fact);
        }
        self.compose_series(&series)
    }

    pub fn recip(&self) -> Jet {
        let x0 = self.value();
        let inv = x0.inv();
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut term = inv;
        for _ in 0..=self.order() {
            series.push(term);
            term *= -inv;
        }
        self.compose_series(&series)
    }

    pub fn powi(&self, k: u32) -> Jet {
        let mut result = Jet::constant(self.nvars(), self.order(), Complex64::new(1.0, 0.0));
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        result
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let (a, b) = self.aligned(rhs);
        Jet {
            layout: a.layout.clone(),
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let (a, b) = self.aligned(rhs);
        Jet {
            layout: a.layout.clone(),
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect(),
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

/// Scalar operations needed to evaluate smooth cores and potentials.
///
/// Implemented for plain complex numbers (pointwise evaluation) and for
/// [`Jet`] (evaluation together with derivatives).
pub trait CoreScalar: Clone {
    /// A constant with the same shape as `self`.
    fn lift(&self, c: Complex64) -> Self;
    fn value(&self) -> Complex64;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn scale(&self, c: Complex64) -> Self;
    fn exp(&self) -> Self;
    fn recip(&self) -> Self;
    fn powi(&self, k: u32) -> Self;
}

impl CoreScalar for Complex64 {
    fn lift(&self, c: Complex64) -> Self {
        c
    }
    fn value(&self) -> Complex64 {
        *self
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, c: Complex64) -> Self {
        self * c
    }
    fn exp(&self) -> Self {
        Complex64::exp(*self)
    }
    fn recip(&self) -> Self {
        self.inv()
    }
    fn powi(&self, k: u32) -> Self {
        Complex64::powu(self, k)
    }
}

impl CoreScalar for Jet {
    fn lift(&self, c: Complex64) -> Self {
        Jet::constant(self.nvars(), self.order(), c)
    }
    fn value(&self) -> Complex64 {
        self.coeffs[0]
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, c: Complex64) -> Self {
        Jet::scale(self, c)
    }
    fn exp(&self) -> Self {
        Jet::exp(self)
    }
    fn recip(&self) -> Self {
        Jet::recip(self)
    }
    fn powi(&self, k: u32) -> Self {
        Jet::powi(self, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn layout_sizes_are_binomial() {
        assert_eq!(layout(4, 4).len(), 70);
        assert_eq!(layout(3, 0).len(), 1);
        assert_eq!(layout(2, 3).len(), 10);
        assert_eq!(layout(0, 3).len(), 1);
    }

    #[test]
    fn product_of_variables() {
        let x = Jet::variable(2, 3, 0, 2.0);
        let y = Jet::variable(2, 3, 1, -1.0);
        let p = &(&x * &x) * &y;
        assert!((p.value() - c(-4.0)).norm() < 1e-15);
        assert!((p.coeff(&[1, 0]) - c(-4.0)).norm() < 1e-15);
        assert!((p.coeff(&[0, 1]) - c(4.0)).norm() < 1e-15);
        assert!((p.coeff(&[1, 1]) - c(4.0)).norm() < 1e-15);
        assert!((p.coeff(&[2, 1]) - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn exp_matches_taylor_series() {
        let x = Jet::variable(1, 5, 0, 0.3);
        let e = x.exp();
        let mut fact = 1.0;
        for k in 0..=5u8 {
            if k > 0 {
                fact *= k as f64;
            }
            assert!((e.coeff(&[k]) - c(0.3f64.exp() / fact)).norm() < 1e-14);
        }
    }

    #[test]
    fn recip_times_self_is_one() {
        let x = Jet::affine(2, 4, 1.5, &[(0, 0.7), (1, -0.2)]);
        let q = x.exp().scale(Complex64::new(0.0, 1.0));
        let one = &q * &q.recip();
        assert!((one.value() - c(1.0)).norm() < 1e-14);
        for v in &one.coeffs()[1..] {
            assert!(v.norm() < 1e-13);
        }
    }

    #[test]
    fn derivative_lowers_order() {
        let x = Jet::variable(2, 3, 0, 1.0);
        let y = Jet::variable(2, 3, 1, 2.0);
        let f = &(&x * &x) * &y; // x^2 y
        let fx = f.derivative(0); // 2xy
        assert_eq!(fx.order(), 2);
        assert!((fx.value() - c(4.0)).norm() < 1e-15);
        assert!((fx.coeff(&[0, 1]) - c(2.0)).norm() < 1e-15);
        assert!((fx.coeff(&[1, 1]) - c(2.0)).norm() < 1e-15);
        let fy = f.derivative(1); // x^2
        assert!((fy.value() - c(1.0)).norm() < 1e-15);
        assert!((fy.coeff(&[2, 0]) - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn powi_agrees_with_repeated_product() {
        let x = Jet::affine(3, 3, 0.4, &[(0, 1.0), (2, 2.0)]);
        let a = x.powi(5);
        let mut b = x.lift(c(1.0));
        for _ in 0..5 {
            b = &b * &x;
        }
        for (u, v) in a.coeffs().iter().zip(b.coeffs()) {
            assert!((u - v).norm() < 1e-13);
        }
    }
}
