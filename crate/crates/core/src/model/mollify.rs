//! Smoothing of pair potentials by convolution with a scaled bump kernel.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::potential::PotentialSpec;
use crate::error::{Error, Result};
use crate::par;
use crate::quadrature::{gamma_half_integer, simpson};

/// Grid used to tabulate a mollified potential.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MollifyGrid {
    /// Node spacing along every axis.
    pub spacing: f64,
    /// Half-width of the tabulated box around the support center; required
    /// when the base potential has no declared support radius.
    #[serde(default)]
    pub half_extent: Option<f64>,
}

/// Normalisation constant `c` making `c exp(-1/(1-|x|²))` integrate to one.
pub fn bump_normalization(dim: usize) -> f64 {
    static CACHE: OnceLock<std::sync::Mutex<Vec<(usize, f64)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(&(_, c)) = guard.iter().find(|(d, _)| *d == dim) {
        return c;
    }
    let surface = 2.0 * PI.powf(dim as f64 / 2.0) / gamma_half_integer(dim);
    let radial = simpson(
        |r| {
            if r >= 1.0 {
                0.0
            } else {
                r.powi(dim as i32 - 1) * (-1.0 / (1.0 - r * r)).exp()
            }
        },
        0.0,
        1.0,
        20_000,
    );
    let c = 1.0 / (surface * radial);
    guard.push((dim, c));
    c
}

/// The standard mollifier `h(x) = c exp(-1/(1-|x|²))` on the unit ball.
pub fn standard_bump(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2 >= 1.0 {
        0.0
    } else {
        bump_normalization(x.len()) * (-1.0 / (1.0 - r2)).exp()
    }
}

/// `h_m(x) = mⁿ h(mx)` and its gradient.
fn scaled_bump_with_grad(x: &[f64], m: f64, grad: &mut [f64]) -> f64 {
    let n = x.len();
    let r2: f64 = x.iter().map(|v| v * v).sum::<f64>() * m * m;
    if r2 >= 1.0 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        return 0.0;
    }
    let d = 1.0 - r2;
    let value = bump_normalization(n) * m.powi(n as i32) * (-1.0 / d).exp();
    // ∂/∂x_i exp(-1/(1 - m²|x|²)) = exp(..) * (-2 m² x_i / d²)
    for (g, xi) in grad.iter_mut().zip(x) {
        *g = value * (-2.0 * m * m * xi / (d * d));
    }
    value
}

/// A potential tabulated on a regular grid with multilinear interpolation.
#[derive(Debug)]
pub struct GridPotential {
    pub(crate) dim: usize,
    pub(crate) m: u32,
    pub(crate) center: Vec<f64>,
    pub(crate) spacing: f64,
    /// Nodes per axis; node `i` sits at `center + (i - half) * spacing`.
    pub(crate) per_axis: usize,
    pub(crate) half: usize,
    pub(crate) values: Vec<f64>,
    pub(crate) grads: Vec<f64>,
    pub(crate) grad_sup: f64,
    pub(crate) grad_lipschitz: f64,
    pub(crate) support_radius: f64,
}

impl GridPotential {
    pub(crate) fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    fn node_point(&self, flat: usize) -> Vec<f64> {
        let mut idx = flat;
        let mut x = vec![0.0; self.dim];
        for d in (0..self.dim).rev() {
            let i = idx % self.per_axis;
            idx /= self.per_axis;
            x[d] = self.center[d] + (i as f64 - self.half as f64) * self.spacing;
        }
        x
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.per_axis + i)
    }

    /// Cell and local weights for `x`, or `None` outside the table.
    fn locate(&self, x: &[f64]) -> Option<(Vec<usize>, Vec<f64>)> {
        let mut base = Vec::with_capacity(self.dim);
        let mut frac = Vec::with_capacity(self.dim);
        for d in 0..self.dim {
            let s = (x[d] - self.center[d]) / self.spacing + self.half as f64;
            if !(s >= 0.0 && s <= (self.per_axis - 1) as f64) {
                return None;
            }
            let i = (s.floor() as usize).min(self.per_axis - 2);
            base.push(i);
            frac.push(s - i as f64);
        }
        Some((base, frac))
    }

    fn interpolate(&self, x: &[f64], data: &[f64], width: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let Some((base, frac)) = self.locate(x) else {
            return;
        };
        let mut idx = vec![0usize; self.dim];
        for corner in 0..(1usize << self.dim) {
            let mut w = 1.0;
            for d in 0..self.dim {
                let bit = (corner >> d) & 1;
                idx[d] = base[d] + bit;
                w *= if bit == 1 { frac[d] } else { 1.0 - frac[d] };
            }
            if w == 0.0 {
                continue;
            }
            let f = self.flat(&idx) * width;
            for (o, v) in out.iter_mut().zip(&data[f..f + width]) {
                *o += w * v;
            }
        }
    }

    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        let mut out = [0.0];
        self.interpolate(x, &self.values, 1, &mut out);
        out[0]
    }

    pub(crate) fn grad(&self, x: &[f64], out: &mut [f64]) {
        self.interpolate(x, &self.grads, self.dim, out);
    }

    /// Grid nodes with their tabulated gradient, for error studies.
    pub fn nodes(&self) -> impl Iterator<Item = (Vec<f64>, &[f64])> + '_ {
        (0..self.values.len()).map(move |i| (self.node_point(i), &self.grads[i * self.dim..(i + 1) * self.dim]))
    }

    /// Riemann sum of the tabulated values (exact for the discrete convolution).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing.powi(self.dim as i32)
    }
}

/// Mollifies `base` with `h_m` and tabulates the result on a grid.
///
/// The convolution `h_m ∗ V` and its gradient `∇h_m ∗ V` are computed by a
/// discrete sum over kernel offsets, with kernel weights normalised so that
/// they sum to exactly one.
pub fn mollify(base: &PotentialSpec, m: u32, grid: &MollifyGrid) -> Result<PotentialSpec> {
    let n = base.dim();
    if m == 0 {
        return Err(Error::InvalidArgument("mollifier scale m must be positive".into()));
    }
    let h = grid.spacing;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {h}")));
    }
    let mf = m as f64;
    let kernel_radius = 1.0 / mf;
    let across = 2.0 * kernel_radius / h;
    if across < 4.0 {
        return Err(Error::UnderResolvedMollifier { points: across });
    }
    let extent = match (base.support_radius(), grid.half_extent) {
        (_, Some(e)) => e,
        (Some(r), None) => r + kernel_radius,
        (None, None) => {
            return Err(Error::InvalidArgument(
                "base potential has no support radius; grid half_extent is required".into(),
            ))
        }
    };
    let center = base.support_center().to_vec();
    let half = (extent / h).ceil() as usize + 1;
    let per_axis = 2 * half + 1;
    let total = per_axis.checked_pow(n as u32).filter(|t| *t <= 50_000_000).ok_or_else(|| {
        Error::InvalidArgument(format!("mollifier grid too large: {per_axis}^{n} nodes"))
    })?;

    // Kernel offsets o*h with |o*h| < 1/m.
    let k_half = (kernel_radius / h).ceil() as i64;
    let k_axis = (2 * k_half + 1) as usize;
    let mut offsets: Vec<Vec<f64>> = Vec::new();
    let mut weights = Vec::new();
    let mut dweights: Vec<f64> = Vec::new();
    let mut g = vec![0.0; n];
    for flat in 0..k_axis.pow(n as u32) {
        let mut rem = flat;
        let mut o = vec![0.0; n];
        for d in (0..n).rev() {
            o[d] = ((rem % k_axis) as i64 - k_half) as f64 * h;
            rem /= k_axis;
        }
        let w = scaled_bump_with_grad(&o, mf, &mut g);
        if w > 0.0 {
            offsets.push(o);
            weights.push(w);
            dweights.extend_from_slice(&g);
        }
    }
    let total_weight: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total_weight);
    dweights.iter_mut().for_each(|w| *w /= total_weight);

    let mut tab = GridPotential {
        dim: n,
        m,
        center,
        spacing: h,
        per_axis,
        half,
        values: Vec::new(),
        grads: Vec::new(),
        grad_sup: 0.0,
        grad_lipschitz: 0.0,
        support_radius: base.support_radius().map_or(extent, |r| r + kernel_radius),
    };

    let rows = par::map_indexed(total, |i| {
        let x = tab.node_point(i);
        let mut y = vec![0.0; n];
        let mut value = 0.0;
        let mut grad = vec![0.0; n];
        for (j, o) in offsets.iter().enumerate() {
            for d in 0..n {
                y[d] = x[d] - o[d];
            }
            let v = base.eval(&y);
            if v == 0.0 {
                continue;
            }
            value += weights[j] * v;
            for d in 0..n {
                grad[d] += dweights[j * n + d] * v;
            }
        }
        (value, grad)
    });
    let mut values = Vec::with_capacity(total);
    let mut grads = Vec::with_capacity(total * n);
    for (v, g) in rows {
        values.push(v);
        grads.extend(g);
    }
    tab.values = values;
    tab.grads = grads;

    tab.grad_sup = (0..total)
        .map(|i| norm(&tab.grads[i * n..(i + 1) * n]))
        .fold(0.0, f64::max);
    tab.grad_lipschitz = interpolant_lipschitz(&tab);

    Ok(PotentialSpec::from_grid(Arc::new(tab)))
}

// Inside a cell, column d of the interpolant's Jacobian is a convex
// combination of the 2^(n-1) edge differences along axis d, so the Jacobian
// is a convex combination of matrices built from one edge per axis.
fn interpolant_lipschitz(tab: &GridPotential) -> f64 {
    let n = tab.dim;
    let per_axis = tab.per_axis;
    let cells_axis = per_axis - 1;
    let cells = cells_axis.pow(n as u32);
    let edges = 1usize << (n - 1);
    let bounds = par::map_indexed(cells, |cell| {
        let mut base = vec![0usize; n];
        let mut rem = cell;
        for d in (0..n).rev() {
            base[d] = rem % cells_axis;
            rem /= cells_axis;
        }
        // diffs[d][e] = (G(corner_e + e_d) - G(corner_e)) / h
        let mut diffs = vec![vec![vec![0.0; n]; edges]; n];
        let mut idx = vec![0usize; n];
        for d in 0..n {
            for e in 0..edges {
                let mut bit = 0;
                for a in 0..n {
                    if a == d {
                        idx[a] = base[a];
                    } else {
                        idx[a] = base[a] + ((e >> bit) & 1);
                        bit += 1;
                    }
                }
                let i = tab.flat(&idx);
                idx[d] += 1;
                let j = tab.flat(&idx);
                for c in 0..n {
                    diffs[d][e][c] = (tab.grads[j * n + c] - tab.grads[i * n + c]) / tab.spacing;
                }
            }
        }
        let mut best = 0.0f64;
        let choices = edges.pow(n as u32);
        let mut cols: Vec<&[f64]> = Vec::with_capacity(n);
        for choice in 0..choices {
            cols.clear();
            let mut rem = choice;
            for d in 0..n {
                cols.push(&diffs[d][rem % edges]);
                rem /= edges;
            }
            best = best.max(operator_norm(&cols));
        }
        best
    });
    bounds.into_iter().fold(0.0, f64::max)
}

// Largest singular value of the matrix with the given columns (an upper
// bound for more than two columns).
fn operator_norm(cols: &[&[f64]]) -> f64 {
    let n = cols.len();
    if n == 1 {
        return norm(cols[0]);
    }
    let gram: Vec<f64> = (0..n * n)
        .map(|ij| {
            let (i, j) = (ij / n, ij % n);
            cols[i].iter().zip(cols[j]).map(|(a, b)| a * b).sum()
        })
        .collect();
    if n == 2 {
        let (a, b, d) = (gram[0], gram[1], gram[3]);
        let top = 0.5 * (a + d) + (0.25 * (a - d) * (a - d) + b * b).sqrt();
        return top.sqrt();
    }
    // Gershgorin: the largest row sum bounds the top eigenvalue of the Gram matrix.
    let row_max = (0..n)
        .map(|i| (0..n).map(|j| gram[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    row_max.sqrt()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl PotentialSpec {
    /// The tabulated grid behind a mollified potential.
    pub fn grid(&self) -> Option<&GridPotential> {
        match &self.kind {
            super::potential::PotentialKind::Grid(g) => Some(g),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_integrates_to_one() {
        for dim in 1..=3 {
            let c = bump_normalization(dim);
            assert!(c > 0.0);
        }
        // 1D: ∫_{-1}^{1} exp(-1/(1-x²)) dx ≈ 0.443993816
        assert!((1.0 / bump_normalization(1) - 0.443_993_816).abs() < 1e-8);
        let v = simpson(|x| standard_bump(&[x]), -1.0, 1.0, 20_000);
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_base_stays_zero() {
        let base = PotentialSpec::zero(1).with_support_radius(1.0);
        let m = mollify(&base, 4, &MollifyGrid { spacing: 0.01, half_extent: None }).unwrap();
        assert!(m.is_zero());
        assert_eq!(m.eval(&[0.3]), 0.0);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let base = PotentialSpec::poly_bump(1, 1.0, 1.0, 3).unwrap();
        let err = mollify(&base, 32, &MollifyGrid { spacing: 0.02, half_extent: None }).unwrap_err();
        assert!(err.to_string().contains("under-resolved mollifier"));
    }

    #[test]
    fn mass_is_preserved() {
        let base = PotentialSpec::poly_bump(1, 1.0, 1.0, 3).unwrap();
        let exact = simpson(|x| base.eval(&[x]), -1.0, 1.0, 20_000);
        for m in [4, 8] {
            let s = mollify(&base, m, &MollifyGrid { spacing: 1e-3, half_extent: None }).unwrap();
            let integral = s.grid().unwrap().integral();
            assert!((integral - exact).abs() < 1e-6, "m={m}: {integral} vs {exact}");
            assert!((s.support_radius().unwrap() - (1.0 + 1.0 / m as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn two_dimensional_gradient_tracks_base() {
        let base = PotentialSpec::poly_bump(2, 1.0, 1.0, 3).unwrap();
        let s = mollify(&base, 8, &MollifyGrid { spacing: 0.02, half_extent: None }).unwrap();
        let mut g = [0.0; 2];
        let mut gb = [0.0; 2];
        s.grad(&[0.3, -0.2], &mut g);
        base.grad(&[0.3, -0.2], &mut gb);
        assert!((g[0] - gb[0]).abs() < 0.05 && (g[1] - gb[1]).abs() < 0.05);
        assert!(s.grad_sup().unwrap() <= base.grad_sup().unwrap() * 1.05);
        assert!(s.grad_lipschitz().unwrap() <= base.grad_lipschitz().unwrap() * 1.05);
    }
}
