//! Finite-support phase-space points and the linear maps acting on them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::model::{LatticeModel, PairSet, Region, Site};

pub type Coords = SmallVec<[f64; 3]>;

/// Momentum and position of one site.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SiteVector {
    pub p: Coords,
    pub q: Coords,
}

/// A phase-space point `ω = (p, q)` with finite support.
///
/// Sites that are not stored are at the origin.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct State {
    entries: BTreeMap<Site, SiteVector>,
}

impl State {
    pub fn new() -> Self {
        State::default()
    }

    /// Builder-style insertion.
    pub fn with(mut self, site: Site, p: &[f64], q: &[f64]) -> Self {
        self.insert(site, p, q);
        self
    }

    pub fn insert(&mut self, site: Site, p: &[f64], q: &[f64]) {
        assert_eq!(p.len(), q.len(), "p and q must have the same dimension");
        self.entries.insert(
            site,
            SiteVector {
                p: Coords::from_slice(p),
                q: Coords::from_slice(q),
            },
        );
    }

    pub fn get(&self, site: Site) -> Option<&SiteVector> {
        self.entries.get(&site)
    }

    pub fn entries(&self) -> impl Iterator<Item = (Site, &SiteVector)> + '_ {
        self.entries.iter().map(|(s, v)| (*s, v))
    }

    pub fn support(&self) -> Region {
        self.entries.keys().copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn p(&self, site: Site, d: usize) -> f64 {
        self.entries.get(&site).and_then(|v| v.p.get(d).copied()).unwrap_or(0.0)
    }

    pub fn q(&self, site: Site, d: usize) -> f64 {
        self.entries.get(&site).and_then(|v| v.q.get(d).copied()).unwrap_or(0.0)
    }

    /// Euclidean norm over all stored coordinates.
    pub fn norm(&self) -> f64 {
        self.entries
            .values()
            .flat_map(|v| v.p.iter().chain(v.q.iter()))
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// `a·self + other`, supported on the union of supports.
    pub fn axpy(&self, a: f64, other: &State) -> State {
        let mut out = other.clone();
        for (s, v) in &self.entries {
            let e = out.entries.entry(*s).or_insert_with(|| SiteVector {
                p: Coords::from_elem(0.0, v.p.len()),
                q: Coords::from_elem(0.0, v.q.len()),
            });
            for (o, x) in e.p.iter_mut().zip(&v.p) {
                *o += a * x;
            }
            for (o, x) in e.q.iter_mut().zip(&v.q) {
                *o += a * x;
            }
        }
        out
    }

    /// `‖self - other‖`.
    pub fn distance(&self, other: &State) -> f64 {
        self.axpy(-1.0, other).norm()
    }

    pub fn project_region(&self, region: &Region) -> State {
        State {
            entries: self
                .entries
                .iter()
                .filter(|(s, _)| region.contains(**s))
                .map(|(s, v)| (*s, v.clone()))
                .collect(),
        }
    }

    pub fn check_support(&self, region: &Region) -> Result<()> {
        match self.entries.keys().find(|s| !region.contains(**s)) {
            Some(s) => Err(Error::SupportOutsideRegion(*s)),
            None => Ok(()),
        }
    }

    /// Dense `(p, q)` vectors over `region`, site-major with `dim` entries per site.
    pub fn to_dense(&self, region: &Region, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_support(region)?;
        let mut p = vec![0.0; region.len() * dim];
        let mut q = vec![0.0; region.len() * dim];
        for (s, v) in &self.entries {
            if v.p.len() != dim || v.q.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.p.len(),
                });
            }
            let i = region.position(*s).expect("support checked") * dim;
            p[i..i + dim].copy_from_slice(&v.p);
            q[i..i + dim].copy_from_slice(&v.q);
        }
        Ok((p, q))
    }

    /// Inverse of [`to_dense`](Self::to_dense); every site of `region` is stored.
    pub fn from_dense(region: &Region, dim: usize, p: &[f64], q: &[f64]) -> State {
        let mut s = State::new();
        for (i, site) in region.iter().enumerate() {
            s.insert(site, &p[i * dim..(i + 1) * dim], &q[i * dim..(i + 1) * dim]);
        }
        s
    }
}

/// `π_Λ ω`.
pub fn project_region(state: &State, region: &Region) -> State {
    state.project_region(region)
}

pub fn state_norm(state: &State) -> f64 {
    state.norm()
}

/// `a·x + y`.
pub fn state_axpy(a: f64, x: &State, y: &State) -> State {
    x.axpy(a, y)
}

/// Relative velocity and separation `(p_k/m_k - p_l/m_l, q_k - q_l)`.
pub fn rel_coords(state: &State, k: Site, l: Site, model: &LatticeModel) -> Result<(Coords, Coords)> {
    if k == l {
        return Err(Error::SameSite(k));
    }
    let (mk, ml) = (model.mass(k)?, model.mass(l)?);
    let n = model.dim_n();
    let v = (0..n).map(|d| state.p(k, d) / mk - state.p(l, d) / ml).collect();
    let x = (0..n).map(|d| state.q(k, d) - state.q(l, d)).collect();
    Ok((v, x))
}

/// Blocks of a region under the interaction graph of `pairs`.
///
/// Every connected component whose sites share one frequency ratio `ν/m`
/// becomes a class; components mixing frequencies are merged into `lambda0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentPartition {
    pub lambda0: Region,
    pub classes: Vec<Region>,
}

const FREQ_RTOL: f64 = 1e-12;

fn same_frequency(a: f64, b: f64) -> bool {
    (a - b).abs() <= FREQ_RTOL * a.abs().max(b.abs())
}

pub fn partition_components(
    model: &LatticeModel,
    region: &Region,
    pairs: &PairSet,
) -> Result<ComponentPartition> {
    model.check_region(region)?;
    for p in pairs {
        if !region.contains(p.k) || !region.contains(p.l) {
            return Err(Error::PairOutsideRegion(p.k, p.l));
        }
    }
    let n = region.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for p in pairs {
        let a = find(&mut parent, region.position(p.k).expect("checked"));
        let b = find(&mut parent, region.position(p.l).expect("checked"));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut comps: BTreeMap<usize, Vec<Site>> = BTreeMap::new();
    for (i, s) in region.iter().enumerate() {
        let r = find(&mut parent, i);
        comps.entry(r).or_default().push(s);
    }
    let mut lambda0 = Vec::new();
    let mut classes = Vec::new();
    for sites in comps.into_values() {
        let ratios: Vec<f64> = sites
            .iter()
            .map(|s| model.site(*s).map(|p| p.nu / p.mass))
            .collect::<Result<_>>()?;
        if ratios.iter().all(|r| same_frequency(*r, ratios[0])) {
            classes.push(Region::new(sites)?);
        } else {
            lambda0.extend(sites);
        }
    }
    classes.sort_by_key(|c| c.sites()[0]);
    Ok(ComponentPartition {
        lambda0: Region::new(lambda0)?,
        classes,
    })
}

/// Splits `ω` into its relative part `s` and centre-of-mass part `t`.
///
/// On each class, `t` has equal velocities `p_k/m_k = Σp/|m|` and equal
/// positions `Σ m q/|m|`; `s = ω - t` then has zero total momentum and zero
/// mass-weighted position. Both vanish identically on `lambda0` for `t`.
pub fn project_st(
    state: &State,
    partition: &ComponentPartition,
    model: &LatticeModel,
) -> Result<(State, State)> {
    let covered: Region = partition
        .classes
        .iter()
        .flat_map(|c| c.iter())
        .chain(partition.lambda0.iter())
        .collect();
    state.check_support(&covered)?;
    let n = model.dim_n();
    let mut t = State::new();
    for class in &partition.classes {
        if class.sites().iter().all(|s| state.get(*s).is_none()) {
            continue;
        }
        let masses: Vec<f64> = class.iter().map(|s| model.mass(s)).collect::<Result<_>>()?;
        let total: f64 = masses.iter().sum();
        let mut psum = vec![0.0; n];
        let mut qcm = vec![0.0; n];
        for (s, m) in class.iter().zip(&masses) {
            for d in 0..n {
                psum[d] += state.p(s, d);
                qcm[d] += m * state.q(s, d);
            }
        }
        qcm.iter_mut().for_each(|x| *x /= total);
        for (s, m) in class.iter().zip(&masses) {
            let p: Coords = psum.iter().map(|x| m * x / total).collect();
            t.insert(s, &p, &qcm);
        }
    }
    let s = t.axpy(-1.0, &state.project_region(&covered));
    Ok((s, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Pair, PotentialSpec};

    fn model(freqs: &[(f64, f64)], bonds: &[(usize, usize)]) -> LatticeModel {
        let mut b = LatticeModel::builder(2);
        for (i, (m, nu)) in freqs.iter().enumerate() {
            b = b.site(i, *m, *nu);
        }
        for (k, l) in bonds {
            b = b.interaction(*k, *l, PotentialSpec::gaussian(2, 0.1, 1.0).unwrap());
        }
        b.build().unwrap()
    }

    fn pairs(list: &[(usize, usize)]) -> PairSet {
        list.iter().map(|(a, b)| Pair::new(*a, *b).unwrap()).collect()
    }

    #[test]
    fn projection_restricts_support() {
        let w = State::new().with(1, &[1.0], &[2.0]).with(2, &[3.0], &[4.0]);
        let r = Region::new([1]).unwrap();
        let p = project_region(&w, &r);
        assert_eq!(p.support(), r);
        assert_eq!(p.get(1), w.get(1));
        assert_eq!(project_region(&p, &r), p);
        assert!(project_region(&w, &Region::new([7]).unwrap()).is_empty());
    }

    #[test]
    fn rel_coords_arithmetic() {
        let m = LatticeModel::builder(1)
            .site(0, 2.0, 1.0)
            .site(1, 4.0, 1.0)
            .build()
            .unwrap();
        let w = State::new().with(0, &[2.0], &[1.5]).with(1, &[4.0], &[1.5]);
        let (v, x) = rel_coords(&w, 0, 1, &m).unwrap();
        assert_eq!((v[0], x[0]), (0.0, 0.0));
        let w = State::new().with(0, &[1.0], &[0.5]).with(1, &[3.0], &[2.0]);
        let (v1, x1) = rel_coords(&w, 0, 1, &m).unwrap();
        let (v2, x2) = rel_coords(&w, 1, 0, &m).unwrap();
        assert_eq!((v1[0], x1[0]), (-v2[0], -x2[0]));
        assert!(rel_coords(&w, 0, 0, &m).is_err());
    }

    #[test]
    fn norm_and_axpy() {
        assert_eq!(state_norm(&State::new()), 0.0);
        let w = State::new().with(3, &[3.0, 0.0], &[0.0, 4.0]);
        assert_eq!(state_norm(&w), 5.0);
        assert_eq!(state_axpy(-1.0, &w, &w).norm(), 0.0);
    }

    #[test]
    fn partition_examples() {
        let r = Region::range(0, 1);
        let eq = model(&[(1.0, 1.0), (2.0, 2.0)], &[(0, 1)]);
        let p = partition_components(&eq, &r, &pairs(&[(0, 1)])).unwrap();
        assert!(p.lambda0.is_empty());
        assert_eq!(p.classes, vec![r.clone()]);

        let ne = model(&[(1.0, 1.0), (1.0, 2.0)], &[(0, 1)]);
        let p = partition_components(&ne, &r, &pairs(&[(0, 1)])).unwrap();
        assert_eq!(p.lambda0, r);
        assert!(p.classes.is_empty());

        let four = model(
            &[(1.0, 1.0), (1.0, 1.0), (1.0, 2.0), (1.0, 2.0)],
            &[(0, 1), (2, 3)],
        );
        let p = partition_components(&four, &Region::range(0, 3), &pairs(&[(0, 1), (2, 3)])).unwrap();
        assert!(p.lambda0.is_empty());
        assert_eq!(p.classes, vec![Region::range(0, 1), Region::range(2, 3)]);
    }

    #[test]
    fn st_projection_examples() {
        let m = model(&[(1.0, 1.0), (1.0, 1.0)], &[(0, 1)]);
        let part = partition_components(&m, &Region::range(0, 1), &pairs(&[(0, 1)])).unwrap();
        let w = State::new()
            .with(0, &[1.0, 0.0], &[0.3, 0.1])
            .with(1, &[3.0, 0.0], &[-0.2, 0.4]);
        let (s, t) = project_st(&w, &part, &m).unwrap();
        assert_eq!(t.get(0).unwrap().p.as_slice(), &[2.0, 0.0]);
        assert_eq!(t.get(1).unwrap().p.as_slice(), &[2.0, 0.0]);
        assert!(s.axpy(1.0, &t).distance(&w) < 1e-15);

        let in_t = State::new()
            .with(0, &[1.0, 2.0], &[0.5, 0.5])
            .with(1, &[1.0, 2.0], &[0.5, 0.5]);
        let (s, t) = project_st(&in_t, &part, &m).unwrap();
        assert!(s.norm() < 1e-15);
        assert!(t.distance(&in_t) < 1e-15);

        let mixed = model(&[(1.0, 1.0), (1.0, 3.0)], &[(0, 1)]);
        let part = partition_components(&mixed, &Region::range(0, 1), &pairs(&[(0, 1)])).unwrap();
        let (s, t) = project_st(&w, &part, &mixed).unwrap();
        assert!(t.norm() == 0.0);
        assert!(s.distance(&w) == 0.0);
    }
}
