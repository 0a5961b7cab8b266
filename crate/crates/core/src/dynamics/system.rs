//! Dense per-region representation used by the integrators.

use std::sync::Arc;

use crate::error::Result;
use crate::model::{LatticeModel, PairSet, PotentialSpec, Region};

/// Site parameters and interacting pairs of a region, indexed densely.
pub(crate) struct DenseSystem {
    pub region: Region,
    pub dim: usize,
    pub mass: Vec<f64>,
    pub nu: Vec<f64>,
    pub freq: Vec<f64>,
    pub impedance: Vec<f64>,
    pub pairs: Vec<(usize, usize, Arc<PotentialSpec>)>,
    /// Whether a kick-free splitting may merge its rotations.
    pub fuse_free: bool,
}

impl DenseSystem {
    pub fn new(model: &LatticeModel, region: &Region, pairs: &PairSet) -> Result<Self> {
        model.check_region(region)?;
        model.check_pairs(region, pairs)?;
        let mut mass = Vec::with_capacity(region.len());
        let mut nu = Vec::with_capacity(region.len());
        for s in region.iter() {
            let p = model.site(s)?;
            mass.push(p.mass);
            nu.push(p.nu);
        }
        let freq = mass.iter().zip(&nu).map(|(m, n)| (n / m).sqrt()).collect();
        let impedance = mass.iter().zip(&nu).map(|(m, n)| (n * m).sqrt()).collect();
        let pairs = pairs
            .iter()
            .filter_map(|p| {
                let v = model.potential(*p).ok()?;
                if v.is_zero() {
                    return None;
                }
                Some((
                    region.position(p.k).expect("checked"),
                    region.position(p.l).expect("checked"),
                    v.clone(),
                ))
            })
            .collect();
        Ok(DenseSystem {
            region: region.clone(),
            dim: model.dim_n(),
            mass,
            nu,
            freq,
            impedance,
            pairs,
            fuse_free: true,
        })
    }

    pub fn len(&self) -> usize {
        self.region.len() * self.dim
    }

    pub fn is_free(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Writes `∇_q V_N(q)` into `out`.
    pub fn potential_gradient(&self, q: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let n = self.dim;
        let mut x = [0.0f64; 8];
        let mut g = [0.0f64; 8];
        let mut xv = Vec::new();
        let mut gv = Vec::new();
        for (i, j, v) in &self.pairs {
            let (x, g): (&mut [f64], &mut [f64]) = if n <= 8 {
                (&mut x[..n], &mut g[..n])
            } else {
                xv.resize(n, 0.0);
                gv.resize(n, 0.0);
                (&mut xv[..], &mut gv[..])
            };
            for d in 0..n {
                x[d] = q[i * n + d] - q[j * n + d];
            }
            v.grad(x, g);
            for d in 0..n {
                out[i * n + d] += g[d];
                out[j * n + d] -= g[d];
            }
        }
    }

    pub fn energy(&self, p: &[f64], q: &[f64]) -> f64 {
        let n = self.dim;
        let mut h = 0.0;
        for s in 0..self.region.len() {
            for d in 0..n {
                let (pp, qq) = (p[s * n + d], q[s * n + d]);
                h += pp * pp / (2.0 * self.mass[s]) + self.nu[s] * qq * qq / 2.0;
            }
        }
        let mut x = vec![0.0; n];
        for (i, j, v) in &self.pairs {
            for d in 0..n {
                x[d] = q[i * n + d] - q[j * n + d];
            }
            h += v.eval(&x);
        }
        h
    }

    /// Exact harmonic rotation by time `t`.
    pub fn rotate(&self, p: &mut [f64], q: &mut [f64], t: f64) {
        let n = self.dim;
        for s in 0..self.region.len() {
            let (c, sn) = ((self.freq[s] * t).cos(), (self.freq[s] * t).sin());
            self.rotate_site(p, q, s, n, c, sn);
        }
    }

    #[inline]
    pub fn rotate_site(&self, p: &mut [f64], q: &mut [f64], s: usize, n: usize, c: f64, sn: f64) {
        let z = self.impedance[s];
        for d in 0..n {
            let (pp, qq) = (p[s * n + d], q[s * n + d]);
            q[s * n + d] = qq * c + pp / z * sn;
            p[s * n + d] = -z * qq * sn + pp * c;
        }
    }
}
