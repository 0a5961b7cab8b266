//! Time two free oscillators spend close to each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LatticeModel, SiteParams, Site};
use crate::par;
use crate::phase_space::State;

/// Closed-form free trajectory of `q_k(t) - q_l(t)` along one axis.
#[derive(Clone, Copy)]
struct RelativeAxis {
    // q_k(t) - q_l(t) = ak cos(wk t) + bk sin(wk t) - al cos(wl t) - bl sin(wl t)
    ak: f64,
    bk: f64,
    al: f64,
    bl: f64,
}

fn axes(k: SiteParams, l: SiteParams, pk: &[f64], qk: &[f64], pl: &[f64], ql: &[f64]) -> Vec<RelativeAxis> {
    (0..qk.len())
        .map(|d| RelativeAxis {
            ak: qk[d],
            bk: pk[d] / k.impedance(),
            al: ql[d],
            bl: pl[d] / l.impedance(),
        })
        .collect()
}

fn fraction(wk: f64, wl: f64, axes: &[RelativeAxis], r: f64, samples: usize) -> f64 {
    let r2 = r * r;
    let inside = (0..samples)
        .filter(|i| {
            let t = (*i as f64 + 0.5) / samples as f64;
            let (ck, sk, cl, sl) = ((wk * t).cos(), (wk * t).sin(), (wl * t).cos(), (wl * t).sin());
            let d2: f64 = axes
                .iter()
                .map(|a| {
                    let x = a.ak * ck + a.bk * sk - a.al * cl - a.bl * sl;
                    x * x
                })
                .sum();
            d2 <= r2
        })
        .count();
    inside as f64 / samples as f64
}

/// Fraction of `t ∈ [0, 1]` with `‖q⁰_k(t) - q⁰_l(t)‖ ≤ R` under the free flow,
/// by midpoint rule on `samples` cells.
pub fn occupation_fraction(
    model: &LatticeModel,
    k: Site,
    l: Site,
    state: &State,
    r: f64,
    samples: usize,
) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    if samples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "occupation quadrature needs at least 1000 samples, got {samples}"
        )));
    }
    if k == l {
        return Err(Error::SameSite(k));
    }
    let (sk, sl) = (model.site(k)?, model.site(l)?);
    let n = model.dim_n();
    let get = |s: Site| -> (Vec<f64>, Vec<f64>) {
        (
            (0..n).map(|d| state.p(s, d)).collect(),
            (0..n).map(|d| state.q(s, d)).collect(),
        )
    };
    let ((pk, qk), (pl, ql)) = (get(k), get(l));
    let ax = axes(sk, sl, &pk, &qk, &pl, &ql);
    Ok(fraction(sk.frequency(), sl.frequency(), &ax, r, samples))
}

/// Search parameters for [`estimate_d`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DSearch {
    pub directions: usize,
    pub seed: u64,
    /// Quadrature cells per occupation estimate.
    pub samples: usize,
    /// Relative bracket width at which bisection stops.
    pub rel_tol: f64,
}

impl Default for DSearch {
    fn default() -> Self {
        DSearch {
            directions: 64,
            seed: 0,
            samples: 10_000,
            rel_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DEstimate {
    pub d: f64,
    /// `ε ≥ 1`: every radius qualifies and `d = 0` by convention.
    pub vacuous: bool,
    pub equal_frequencies: bool,
    pub directions: usize,
    pub seed: u64,
    pub samples: usize,
    /// Largest sampled occupation fraction at the returned radius.
    pub max_fraction: f64,
}

/// Initial data for one direction, scaled to norm `radius`.
///
/// Equal frequencies: the direction lives in relative coordinates
/// `(Δv, Δq)` and is realised with site `l` at rest at the origin.
/// Unequal frequencies: the direction is a unit vector in `(p_k, p_l, q_k, q_l)`.
#[derive(Clone)]
pub struct DirectionFamily {
    k: Site,
    l: Site,
    mk: f64,
    n: usize,
    equal: bool,
    dirs: Vec<Vec<f64>>,
}

impl DirectionFamily {
    pub fn new(model: &LatticeModel, k: Site, l: Site, count: usize, seed: u64) -> Result<Self> {
        if k == l {
            return Err(Error::SameSite(k));
        }
        let (sk, sl) = (model.site(k)?, model.site(l)?);
        let rk = sk.nu / sk.mass;
        let rl = sl.nu / sl.mass;
        let equal = (rk - rl).abs() <= 1e-12 * rk.max(rl);
        let n = model.dim_n();
        let width = if equal { 2 * n } else { 4 * n };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dirs = (0..count)
            .map(|_| loop {
                let v: Vec<f64> = (0..width).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    break v.into_iter().map(|x| x / norm).collect();
                }
            })
            .collect();
        Ok(DirectionFamily {
            k,
            l,
            mk: sk.mass,
            n,
            equal,
            dirs,
        })
    }

    pub fn is_equal_frequency(&self) -> bool {
        self.equal
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn state(&self, i: usize, radius: f64) -> State {
        let v = &self.dirs[i];
        let n = self.n;
        let s: Vec<f64> = v.iter().map(|x| x * radius).collect();
        if self.equal {
            let p: Vec<f64> = s[..n].iter().map(|dv| dv * self.mk).collect();
            State::new()
                .with(self.k, &p, &s[n..])
                .with(self.l, &vec![0.0; n], &vec![0.0; n])
        } else {
            State::new()
                .with(self.k, &s[..n], &s[2 * n..3 * n])
                .with(self.l, &s[n..2 * n], &s[3 * n..])
        }
    }
}

/// Smallest radius `D` (to `rel_tol`) at which every sampled direction
/// spends a fraction of `[0, 1]` below `ε` within distance `R`.
///
/// Along a fixed direction the relative trajectory scales linearly with the
/// radius, so each occupation fraction is non-increasing in `D` and the
/// bisection is well posed.
pub fn estimate_d(
    model: &LatticeModel,
    k: Site,
    l: Site,
    r: f64,
    eps: f64,
    search: &DSearch,
) -> Result<DEstimate> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    let family = DirectionFamily::new(model, k, l, search.directions, search.seed)?;
    let report = |d: f64, vacuous: bool, max_fraction: f64| DEstimate {
        d,
        vacuous,
        equal_frequencies: family.is_equal_frequency(),
        directions: search.directions,
        seed: search.seed,
        samples: search.samples,
        max_fraction,
    };
    if eps >= 1.0 {
        return Ok(report(0.0, true, 1.0));
    }
    let max_fraction = |d: f64| -> Result<f64> {
        let idx: Vec<usize> = (0..family.len()).collect();
        let fr = par::map_slice(&idx, |&i| {
            occupation_fraction(model, k, l, &family.state(i, d), r, search.samples)
        });
        fr.into_iter().try_fold(0.0f64, |m, f| Ok(m.max(f?)))
    };

    let mut hi = 1.0;
    let mut hi_frac = max_fraction(hi)?;
    let mut lo;
    if hi_frac < eps {
        let mut probe = 0.5;
        loop {
            let f = max_fraction(probe)?;
            if f >= eps {
                lo = probe;
                break;
            }
            hi = probe;
            hi_frac = f;
            probe *= 0.5;
            if probe < 1e-300 {
                return Ok(report(0.0, false, hi_frac));
            }
        }
    } else {
        loop {
            lo = hi;
            hi *= 2.0;
            hi_frac = max_fraction(hi)?;
            if hi_frac < eps {
                break;
            }
            if hi > 1e18 {
                return Err(Error::InvalidArgument(format!(
                    "occupation fraction stays above ε = {eps} up to radius {hi}"
                )));
            }
        }
    }
    while hi - lo > search.rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        let f = max_fraction(mid)?;
        if f < eps {
            hi = mid;
            hi_frac = f;
        } else {
            lo = mid;
        }
    }
    Ok(report(hi, false, hi_frac))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(nu_l: f64) -> LatticeModel {
        LatticeModel::builder(1)
            .site(0, 1.0, 1.0)
            .site(1, 1.0, nu_l)
            .build()
            .unwrap()
    }

    #[test]
    fn coincident_sites_always_occupy() {
        let m = pair(1.0);
        let w = State::new().with(0, &[0.3], &[0.7]).with(1, &[0.3], &[0.7]);
        assert_eq!(occupation_fraction(&m, 0, 1, &w, 0.1, 1000).unwrap(), 1.0);
    }

    #[test]
    fn large_relative_amplitude_never_occupies() {
        let m = pair(1.0);
        // relative coordinate: 10 cos(t + 0.2) stays above 10 cos(1.2) > 3
        let w = State::new()
            .with(0, &[-10.0 * 0.2f64.sin()], &[10.0 * 0.2f64.cos()])
            .with(1, &[0.0], &[0.0]);
        assert_eq!(occupation_fraction(&m, 0, 1, &w, 1.0, 5000).unwrap(), 0.0);
    }

    #[test]
    fn fraction_matches_fine_quadrature() {
        let m = pair(4.0);
        let w = State::new().with(0, &[0.8], &[1.1]).with(1, &[-0.4], &[0.2]);
        let coarse = occupation_fraction(&m, 0, 1, &w, 1.2, 10_000).unwrap();
        let fine = occupation_fraction(&m, 0, 1, &w, 1.2, 1_000_000).unwrap();
        assert!((coarse - fine).abs() < 1e-3);
        assert!(fine > 0.0 && fine < 1.0);
    }

    #[test]
    fn bad_arguments() {
        let m = pair(1.0);
        let w = State::new();
        assert!(occupation_fraction(&m, 0, 1, &w, 0.0, 1000).is_err());
        assert!(occupation_fraction(&m, 0, 1, &w, 1.0, 10).is_err());
        let d = estimate_d(&m, 0, 1, 1.0, 1.5, &DSearch::default()).unwrap();
        assert!(d.vacuous && d.d == 0.0);
    }
}
