//! Lattice sites, masses, force constants and pair interactions.

mod mollify;
mod potential;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mollify::{bump_normalization, mollify, standard_bump, GridPotential, MollifyGrid};
pub use potential::{shifted_potential, PotentialSpec};
pub use validate::{
    validate_assumptions, Condition, ConditionResult, SampleSpec, ValidationReport, Witness,
};

/// Index of a lattice site.
pub type Site = usize;

/// An unordered pair of distinct sites, stored with `k < l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair {
    pub k: Site,
    pub l: Site,
}

impl Pair {
    pub fn new(a: Site, b: Site) -> Result<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Pair { k: a, l: b }),
            std::cmp::Ordering::Greater => Ok(Pair { k: b, l: a }),
            std::cmp::Ordering::Equal => Err(Error::SameSite(a)),
        }
    }

    pub fn contains(&self, s: Site) -> bool {
        self.k == s || self.l == s
    }

    /// The other end of the pair, if `s` is one of its ends.
    pub fn other(&self, s: Site) -> Option<Site> {
        if s == self.k {
            Some(self.l)
        } else if s == self.l {
            Some(self.k)
        } else {
            None
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.k, self.l)
    }
}

/// A set of interacting pairs (the `N` of a truncated Hamiltonian).
pub type PairSet = BTreeSet<Pair>;

/// A finite set of sites, kept sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    sites: Vec<Site>,
}

impl Region {
    /// Builds a region, rejecting duplicates.
    pub fn new<I: IntoIterator<Item = Site>>(sites: I) -> Result<Self> {
        let mut v: Vec<Site> = sites.into_iter().collect();
        v.sort_unstable();
        if let Some(w) = v.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateSite(w[0]));
        }
        Ok(Region { sites: v })
    }

    pub fn empty() -> Self {
        Region::default()
    }

    /// Sites `lo..=hi`.
    pub fn range(lo: Site, hi: Site) -> Self {
        Region {
            sites: (lo..=hi).collect(),
        }
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn iter(&self) -> impl Iterator<Item = Site> + '_ {
        self.sites.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, s: Site) -> bool {
        self.sites.binary_search(&s).is_ok()
    }

    /// Position of `s` in the sorted site list.
    pub fn position(&self, s: Site) -> Option<usize> {
        self.sites.binary_search(&s).ok()
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.sites.iter().all(|s| other.contains(*s))
    }

    pub fn union(&self, other: &Region) -> Region {
        let set: BTreeSet<Site> = self.iter().chain(other.iter()).collect();
        Region {
            sites: set.into_iter().collect(),
        }
    }
}

impl FromIterator<Site> for Region {
    fn from_iter<I: IntoIterator<Item = Site>>(iter: I) -> Self {
        let set: BTreeSet<Site> = iter.into_iter().collect();
        Region {
            sites: set.into_iter().collect(),
        }
    }
}

/// Mass and force constant of one site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteParams {
    pub mass: f64,
    pub nu: f64,
}

impl SiteParams {
    /// Angular frequency `√(ν/m)` of the free oscillator.
    pub fn frequency(&self) -> f64 {
        (self.nu / self.mass).sqrt()
    }

    /// `√(νm)`, the ratio between momentum and position amplitudes.
    pub fn impedance(&self) -> f64 {
        (self.nu * self.mass).sqrt()
    }
}

/// The potential attached to an unordered pair.
///
/// `forward` is evaluated at `q_k - q_l` with `k < l`. When the model was
/// built from an explicit `(l, k)` declaration as well, it is kept in
/// `reverse` so the symmetry condition can be checked against real data.
#[derive(Clone, Debug)]
pub struct Interaction {
    pub forward: Arc<PotentialSpec>,
    pub reverse: Option<Arc<PotentialSpec>>,
}

/// Sites with masses and force constants plus pairwise interactions.
#[derive(Clone, Debug)]
pub struct LatticeModel {
    dim_n: usize,
    sites: BTreeMap<Site, SiteParams>,
    interactions: BTreeMap<Pair, Interaction>,
    neighbors: BTreeMap<Site, Vec<Site>>,
    global_c: f64,
}

impl LatticeModel {
    pub fn builder(dim_n: usize) -> LatticeModelBuilder {
        LatticeModelBuilder {
            dim_n,
            sites: BTreeMap::new(),
            interactions: BTreeMap::new(),
            declared_from: BTreeMap::new(),
            global_c: None,
            error: None,
        }
    }

    /// Sites `0..len` on a line with identical bonds between neighbours.
    /// `global_C` is set to twice the bond's `grad_sup`.
    pub fn chain(len: usize, mass: f64, nu: f64, bond: &PotentialSpec) -> Result<Self> {
        let mut b = LatticeModel::builder(bond.dim());
        for s in 0..len {
            b = b.site(s, mass, nu);
        }
        for s in 1..len {
            b = b.interaction(s - 1, s, bond.clone());
        }
        let c = 2.0 * bond.grad_sup().unwrap_or(f64::INFINITY);
        b.global_c(c).build()
    }

    pub fn dim_n(&self) -> usize {
        self.dim_n
    }

    pub fn global_c(&self) -> f64 {
        self.global_c
    }

    pub fn site_ids(&self) -> impl Iterator<Item = Site> + '_ {
        self.sites.keys().copied()
    }

    pub fn all_sites(&self) -> Region {
        self.site_ids().collect()
    }

    pub fn site(&self, s: Site) -> Result<SiteParams> {
        self.sites.get(&s).copied().ok_or(Error::UnknownSite(s))
    }

    pub fn has_site(&self, s: Site) -> bool {
        self.sites.contains_key(&s)
    }

    pub fn mass(&self, s: Site) -> Result<f64> {
        Ok(self.site(s)?.mass)
    }

    pub fn nu(&self, s: Site) -> Result<f64> {
        Ok(self.site(s)?.nu)
    }

    pub fn interactions(&self) -> impl Iterator<Item = (Pair, &Interaction)> + '_ {
        self.interactions.iter().map(|(p, i)| (*p, i))
    }

    pub fn interaction(&self, pair: Pair) -> Option<&Interaction> {
        self.interactions.get(&pair)
    }

    /// The potential of `pair` as a function of `q_k - q_l` (`k < l`).
    pub fn potential(&self, pair: Pair) -> Result<&Arc<PotentialSpec>> {
        self.interactions
            .get(&pair)
            .map(|i| &i.forward)
            .ok_or(Error::NoInteraction(pair.k, pair.l))
    }

    /// Sites sharing an interaction with `s`, sorted.
    pub fn neighbors(&self, s: Site) -> &[Site] {
        self.neighbors.get(&s).map_or(&[], |v| v.as_slice())
    }

    /// All interacting pairs with both ends inside `region`.
    pub fn internal_pairs(&self, region: &Region) -> PairSet {
        let mut out = PairSet::new();
        for s in region.iter() {
            for &t in self.neighbors(s) {
                if s < t && region.contains(t) {
                    out.insert(Pair { k: s, l: t });
                }
            }
        }
        out
    }

    /// Checks that every site of `region` exists.
    pub fn check_region(&self, region: &Region) -> Result<()> {
        match region.iter().find(|s| !self.has_site(*s)) {
            Some(s) => Err(Error::UnknownSite(s)),
            None => Ok(()),
        }
    }

    /// Checks that every pair lies inside `region` and carries an interaction.
    pub fn check_pairs(&self, region: &Region, pairs: &PairSet) -> Result<()> {
        for p in pairs {
            if !region.contains(p.k) || !region.contains(p.l) {
                return Err(Error::PairOutsideRegion(p.k, p.l));
            }
            if !self.interactions.contains_key(p) {
                return Err(Error::NoInteraction(p.k, p.l));
            }
        }
        Ok(())
    }

    /// Row sum `Σ_l ‖∇V_kl‖_∞` over neighbours `l` accepted by `keep`.
    /// Missing constants count as infinite.
    pub fn grad_row_sum<F: Fn(Site) -> bool>(&self, k: Site, keep: F) -> f64 {
        self.neighbors(k)
            .iter()
            .filter(|l| keep(**l))
            .map(|&l| {
                self.interactions[&Pair::new(k, l).expect("neighbours are distinct")]
                    .forward
                    .grad_sup()
                    .unwrap_or(f64::INFINITY)
            })
            .sum()
    }

    /// Row sum of declared gradient Lipschitz constants.
    pub fn lipschitz_row_sum<F: Fn(Site) -> bool>(&self, k: Site, keep: F) -> f64 {
        self.neighbors(k)
            .iter()
            .filter(|l| keep(**l))
            .map(|&l| {
                self.interactions[&Pair::new(k, l).expect("neighbours are distinct")]
                    .forward
                    .grad_lipschitz()
                    .unwrap_or(f64::INFINITY)
            })
            .sum()
    }
}

/// Incremental construction of a [`LatticeModel`].
///
/// Errors are deferred to [`build`](Self::build) so calls can be chained.
pub struct LatticeModelBuilder {
    dim_n: usize,
    sites: BTreeMap<Site, SiteParams>,
    interactions: BTreeMap<Pair, Interaction>,
    declared_from: BTreeMap<Pair, Site>,
    global_c: Option<f64>,
    error: Option<Error>,
}

impl LatticeModelBuilder {
    fn fail(mut self, e: Error) -> Self {
        if self.error.is_none() {
            self.error = Some(e);
        }
        self
    }

    pub fn site(mut self, id: Site, mass: f64, nu: f64) -> Self {
        for (what, value) in [("mass", mass), ("force constant", nu)] {
            if !(value > 0.0 && value.is_finite()) {
                return self.fail(Error::NonPositive {
                    site: id,
                    what,
                    value,
                });
            }
        }
        if self.sites.insert(id, SiteParams { mass, nu }).is_some() {
            return self.fail(Error::DuplicateSite(id));
        }
        self
    }

    /// Attaches `v`, read as a function of `q_a - q_b`.
    ///
    /// Declaring both `(a, b)` and `(b, a)` keeps the second declaration as
    /// the explicit reverse potential of the pair.
    pub fn interaction(mut self, a: Site, b: Site, v: PotentialSpec) -> Self {
        if v.dim() != self.dim_n {
            let expected = self.dim_n;
            return self.fail(Error::DimensionMismatch {
                expected,
                got: v.dim(),
            });
        }
        let pair = match Pair::new(a, b) {
            Ok(p) => p,
            Err(e) => return self.fail(e),
        };
        // orient as a function of q_k - q_l
        let oriented = Arc::new(if a == pair.k { v } else { v.reflected() });
        let first = self.declared_from.get(&pair).copied();
        let has_reverse = self.interactions.get(&pair).map(|i| i.reverse.is_some());
        match (first, has_reverse) {
            (Some(f), Some(false)) if f != a => {
                if let Some(existing) = self.interactions.get_mut(&pair) {
                    existing.reverse = Some(oriented);
                }
                self
            }
            (_, Some(_)) => self.fail(Error::InvalidArgument(format!(
                "pair {pair} declared more than twice or twice in the same orientation"
            ))),
            (_, None) => {
                self.interactions.insert(
                    pair,
                    Interaction {
                        forward: oriented,
                        reverse: None,
                    },
                );
                self.declared_from.insert(pair, a);
                self
            }
        }
    }

    pub fn global_c(mut self, c: f64) -> Self {
        self.global_c = Some(c);
        self
    }

    pub fn build(self) -> Result<LatticeModel> {
        if let Some(e) = self.error {
            return Err(e);
        }
        if self.dim_n == 0 {
            return Err(Error::InvalidArgument("dim_n must be positive".into()));
        }
        let mut neighbors: BTreeMap<Site, Vec<Site>> = BTreeMap::new();
        for p in self.interactions.keys() {
            for s in [p.k, p.l] {
                if !self.sites.contains_key(&s) {
                    return Err(Error::UnknownSite(s));
                }
            }
            neighbors.entry(p.k).or_default().push(p.l);
            neighbors.entry(p.l).or_default().push(p.k);
        }
        neighbors.values_mut().for_each(|v| v.sort_unstable());
        let global_c = match self.global_c {
            Some(c) if c >= 0.0 => c,
            Some(c) => {
                return Err(Error::InvalidArgument(format!(
                    "global_C must be non-negative, got {c}"
                )))
            }
            None => 0.0,
        };
        Ok(LatticeModel {
            dim_n: self.dim_n,
            sites: self.sites,
            interactions: self.interactions,
            neighbors,
            global_c,
        })
    }
}

/// `max_{k∈Λ} Σ_{l∈Λ} ‖∇V_kl‖_∞`, the summability constant restricted to a region.
pub fn interaction_constant(model: &LatticeModel, region: &Region) -> f64 {
    region
        .iter()
        .map(|k| model.grad_row_sum(k, |l| region.contains(l)))
        .fold(0.0, f64::max)
}

/// Conservative Lipschitz constant of the Hamiltonian vector field on `region`:
/// `max(max 1/m_k, max ν_k + 2 max_k Σ_l Lip(∇V_kl))`.
pub fn vector_field_lipschitz(model: &LatticeModel, region: &Region) -> Result<f64> {
    let mut inv_mass = 0.0f64;
    let mut nu = 0.0f64;
    let mut lip = 0.0f64;
    for k in region.iter() {
        let p = model.site(k)?;
        inv_mass = inv_mass.max(1.0 / p.mass);
        nu = nu.max(p.nu);
        lip = lip.max(model.lipschitz_row_sum(k, |l| region.contains(l)));
    }
    Ok(inv_mass.max(nu + 2.0 * lip))
}

/// Bound on `‖∇V_N‖_∞` for the pairs in `pairs`: the Euclidean norm of the
/// per-site row sums of declared `grad_sup`.
pub fn potential_gradient_bound(model: &LatticeModel, pairs: &PairSet) -> f64 {
    let mut rows: BTreeMap<Site, f64> = BTreeMap::new();
    for p in pairs {
        let g = model
            .interaction(*p)
            .and_then(|i| i.forward.grad_sup())
            .unwrap_or(f64::INFINITY);
        *rows.entry(p.k).or_default() += g;
        *rows.entry(p.l).or_default() += g;
    }
    rows.values().map(|r| r * r).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bond(g: f64) -> PotentialSpec {
        PotentialSpec::poly_bump(1, 1.0, 1.0, 3).unwrap().with_grad_sup(g)
    }

    #[test]
    fn region_rejects_duplicates() {
        assert!(matches!(Region::new([1, 2, 1]), Err(Error::DuplicateSite(1))));
        let r = Region::new([3, 1, 2]).unwrap();
        assert_eq!(r.sites(), &[1, 2, 3]);
        assert!(Region::new([]).unwrap().is_empty());
    }

    #[test]
    fn nonpositive_parameters_are_rejected() {
        let e = LatticeModel::builder(1).site(0, 1.0, 0.0).build().unwrap_err();
        assert!(matches!(e, Error::NonPositive { site: 0, .. }));
        let e = LatticeModel::builder(1).site(0, -1.0, 1.0).build().unwrap_err();
        assert!(matches!(e, Error::NonPositive { .. }));
    }

    #[test]
    fn interaction_constant_on_chain() {
        let m = LatticeModel::chain(3, 1.0, 1.0, &bond(0.3)).unwrap();
        let c = interaction_constant(&m, &m.all_sites());
        assert!((c - 0.6).abs() < 1e-15);
        let none = LatticeModel::builder(1).site(0, 1.0, 1.0).build().unwrap();
        assert_eq!(interaction_constant(&none, &none.all_sites()), 0.0);
        assert_eq!(interaction_constant(&m, &Region::empty()), 0.0);
    }

    #[test]
    fn interaction_constant_on_square_grid() {
        let side = 3;
        let id = |x: usize, y: usize| x * side + y;
        let mut b = LatticeModel::builder(1);
        for x in 0..side {
            for y in 0..side {
                b = b.site(id(x, y), 1.0, 1.0);
            }
        }
        let mut bonds = Vec::new();
        for x in 0..side {
            for y in 0..side {
                if x + 1 < side {
                    bonds.push((id(x, y), id(x + 1, y)));
                }
                if y + 1 < side {
                    bonds.push((id(x, y), id(x, y + 1)));
                }
            }
        }
        for &(a, c) in &bonds {
            b = b.interaction(a, c, bond(0.1));
        }
        let m = b.global_c(0.4).build().unwrap();
        // brute force: count bonds touching each site
        let brute = (0..side * side)
            .map(|s| bonds.iter().filter(|(a, c)| *a == s || *c == s).count() as f64 * 0.1)
            .fold(0.0, f64::max);
        let c = interaction_constant(&m, &m.all_sites());
        assert!((c - brute).abs() < 1e-15);
        assert!((c - 0.4).abs() < 1e-15);
    }

    #[test]
    fn reversed_declaration_is_reflected() {
        let v = PotentialSpec::gaussian(1, 1.0, 1.0).unwrap().shifted(&[0.5]).unwrap();
        let m = LatticeModel::builder(1)
            .site(0, 1.0, 1.0)
            .site(1, 1.0, 1.0)
            .interaction(1, 0, v.clone())
            .build()
            .unwrap();
        let f = m.potential(Pair::new(0, 1).unwrap()).unwrap();
        // stored as a function of q_0 - q_1 = -(q_1 - q_0)
        assert_eq!(f.eval(&[-0.7]), v.eval(&[0.7]));
    }
}
