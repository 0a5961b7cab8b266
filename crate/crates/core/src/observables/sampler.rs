use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Evaluate;
use crate::error::{Error, Result};
use crate::model::{LatticeModel, Site};
use crate::par;
use crate::phase_space::State;

/// Box, resolution and seed for sup-norm estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSpec {
    /// Every coordinate ranges over `[-half_width, half_width]`.
    pub half_width: f64,
    /// Grid nodes per axis; odd so that the origin is a node.
    pub grid_per_axis: usize,
    pub max_grid_points: usize,
    pub random_samples: usize,
    pub seed: u64,
    /// Sites spanned by the box; defaults to the observables' sites.
    pub sites: Option<Vec<Site>>,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec {
            half_width: 6.0,
            grid_per_axis: 9,
            max_grid_points: 50_000,
            random_samples: 2_000,
            seed: 0,
            sites: None,
        }
    }
}

/// Outcome of a sup-norm estimate, with its provenance.
#[derive(Clone, Debug, Serialize)]
pub struct SupEstimate {
    pub value: f64,
    #[serde(skip)]
    pub argmax: State,
    pub grid_points: usize,
    pub random_samples: usize,
    pub half_width: f64,
    pub seed: u64,
    pub sites: Vec<Site>,
}

/// A fixed list of sample states, reusable across many observables.
#[derive(Clone, Debug)]
pub struct SamplePlan {
    pub states: Vec<State>,
    pub grid_points: usize,
    pub random_samples: usize,
    pub half_width: f64,
    pub seed: u64,
    pub sites: Vec<Site>,
}

fn axis(g: usize, b: f64) -> Vec<f64> {
    if g <= 1 {
        return vec![0.0];
    }
    (0..g).map(|i| -b + 2.0 * b * i as f64 / (g - 1) as f64).collect()
}

impl SamplePlan {
    /// Builds the sample set over `sites`, gridding `focus` coordinates first
    /// when the full grid would exceed the point budget.
    pub fn new(spec: &SamplerSpec, sites: &BTreeSet<Site>, focus: &BTreeSet<Site>, dim: usize) -> Result<Self> {
        if !(spec.half_width > 0.0) || spec.grid_per_axis == 0 {
            return Err(Error::InvalidArgument("sampler needs a positive box and grid".into()));
        }
        let sites: Vec<Site> = match &spec.sites {
            Some(s) => s.iter().copied().collect::<BTreeSet<_>>().into_iter().collect(),
            None => sites.iter().copied().collect(),
        };
        let ncoord = 2 * dim * sites.len();
        let b = spec.half_width;
        let build = |coords: &[f64]| {
            let mut st = State::new();
            for (i, s) in sites.iter().enumerate() {
                let base = 2 * dim * i;
                st.insert(*s, &coords[base..base + dim], &coords[base + dim..base + 2 * dim]);
            }
            st
        };

        // choose which coordinates to grid and how finely
        let fits = |g: usize, d: usize| (g as f64).powi(d as i32) <= spec.max_grid_points as f64;
        let mut g = spec.grid_per_axis;
        let gridded: Vec<usize> = if fits(g, ncoord) {
            (0..ncoord).collect()
        } else {
            let focus_coords: Vec<usize> = sites
                .iter()
                .enumerate()
                .filter(|(_, s)| focus.contains(s))
                .flat_map(|(i, _)| 2 * dim * i..2 * dim * (i + 1))
                .collect();
            let mut k = focus_coords.len();
            while k > 0 && !fits(3, k) {
                k -= 1;
            }
            while g > 3 && !fits(g, k) {
                g -= 2;
            }
            focus_coords[..k].to_vec()
        };

        let nodes = axis(g, b);
        let total = if gridded.is_empty() { 1 } else { g.pow(gridded.len() as u32) };
        let mut states = Vec::with_capacity(total + spec.random_samples);
        let mut coords = vec![0.0; ncoord];
        for mut idx in 0..total {
            for &c in &gridded {
                coords[c] = nodes[idx % g];
                idx /= g;
            }
            states.push(build(&coords));
        }

        // Latin hypercube: one stratum per sample along every coordinate
        let n = spec.random_samples;
        if n > 0 && ncoord > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let perms: Vec<Vec<usize>> = (0..ncoord)
                .map(|_| {
                    let mut p: Vec<usize> = (0..n).collect();
                    p.shuffle(&mut rng);
                    p
                })
                .collect();
            for i in 0..n {
                for (c, perm) in perms.iter().enumerate() {
                    let u: f64 = rng.gen();
                    coords[c] = -b + 2.0 * b * (perm[i] as f64 + u) / n as f64;
                }
                states.push(build(&coords));
            }
        }

        Ok(SamplePlan {
            states,
            grid_points: total,
            random_samples: if ncoord > 0 { n } else { 0 },
            half_width: b,
            seed: spec.seed,
            sites,
        })
    }

    /// Plan spanning the sites of the given observables.
    pub fn for_observables(spec: &SamplerSpec, obs: &[&dyn Evaluate], model: &LatticeModel) -> Result<Self> {
        let sites: BTreeSet<Site> = obs.iter().flat_map(|f| f.sites()).collect();
        let focus: BTreeSet<Site> = obs.iter().flat_map(|f| f.focus_sites()).collect();
        Self::new(spec, &sites, &focus, model.dim_n())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Values of `f` at every sample, in plan order.
    pub fn values(&self, f: &dyn Evaluate) -> Result<Vec<num_complex::Complex64>> {
        par::map_slice(&self.states, |s| f.evaluate(s)).into_iter().collect()
    }

    /// `max |f - g|` over the plan; ties go to the earliest sample.
    pub fn sup_distance(&self, f: &dyn Evaluate, g: &dyn Evaluate) -> Result<SupEstimate> {
        let diffs: Vec<f64> = par::map_slice(&self.states, |s| Ok((f.evaluate(s)? - g.evaluate(s)?).norm()))
            .into_iter()
            .collect::<Result<_>>()?;
        Ok(self.estimate(&diffs))
    }

    /// Packages a precomputed list of per-sample deviations.
    pub fn estimate(&self, diffs: &[f64]) -> SupEstimate {
        let mut best = 0;
        for (i, d) in diffs.iter().enumerate() {
            if *d > diffs[best] || d.is_nan() {
                best = i;
                if d.is_nan() {
                    break;
                }
            }
        }
        SupEstimate {
            value: diffs.get(best).copied().unwrap_or(0.0),
            argmax: self.states.get(best).cloned().unwrap_or_default(),
            grid_points: self.grid_points,
            random_samples: self.random_samples,
            half_width: self.half_width,
            seed: self.seed,
            sites: self.sites.clone(),
        }
    }
}

/// Estimates `‖f - g‖_∞` on the sampler box over the union of both supports.
pub fn sup_distance(
    f: &dyn Evaluate,
    g: &dyn Evaluate,
    sampler: &SamplerSpec,
    model: &LatticeModel,
) -> Result<SupEstimate> {
    SamplePlan::for_observables(sampler, &[f, g], model)?.sup_distance(f, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{LinearFunctional, Observable};
    use num_complex::Complex64;

    fn model() -> LatticeModel {
        LatticeModel::builder(1).site(0, 1.0, 1.0).site(1, 1.0, 1.0).build().unwrap()
    }

    #[test]
    fn identical_observables_are_at_distance_zero() {
        let f = Observable::gaussian(vec![LinearFunctional::p(0, 0)]);
        let e = sup_distance(&f, &f, &SamplerSpec::default(), &model()).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn constants_differ_by_their_gap() {
        let a = Observable::constant(Complex64::new(2.0, 0.0));
        let b = Observable::constant(Complex64::new(-0.5, 1.0));
        let e = sup_distance(&a, &b, &SamplerSpec::default(), &model()).unwrap();
        assert!((e.value - (2.5f64.powi(2) + 1.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_against_zero_peaks_at_one() {
        let f = Observable::gaussian(vec![LinearFunctional::p(0, 0), LinearFunctional::q(1, 0)]);
        let z = Observable::constant(Complex64::new(0.0, 0.0));
        let e = sup_distance(&f, &z, &SamplerSpec::default(), &model()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-9);
        assert_eq!((e.argmax.p(0, 0), e.argmax.q(1, 0)), (0.0, 0.0));
    }

    #[test]
    fn plans_are_deterministic_and_respect_the_budget() {
        let spec = SamplerSpec {
            max_grid_points: 1000,
            random_samples: 50,
            ..SamplerSpec::default()
        };
        let sites: BTreeSet<Site> = (0..4).collect();
        let focus: BTreeSet<Site> = [1].into_iter().collect();
        let a = SamplePlan::new(&spec, &sites, &focus, 1).unwrap();
        let b = SamplePlan::new(&spec, &sites, &focus, 1).unwrap();
        assert!(a.grid_points <= 1000);
        assert_eq!(a.grid_points, 81);
        assert_eq!(a.states, b.states);
        for s in &a.states {
            assert!(s.entries().all(|(_, v)| v.p.iter().chain(&v.q).all(|x| x.abs() <= 6.0)));
        }
    }
}
