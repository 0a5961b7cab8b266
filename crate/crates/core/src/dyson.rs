//! Interaction-picture evolution and its truncated Dyson series.
//!
//! With `V_u = V ∘ π_pos ∘ Φᵘ_{H⁰}` the interaction-picture observable
//! `γᵗ(f) = f ∘ Φ^{-t}_{H⁰} ∘ Φᵗ_{H_Λ}` solves `∂_t γᵗ(f) = γᵗ({f, V_t})`
//! (standard bracket), which iterates to
//!
//! ```text
//! γᵗ(f) = f + Σ_n ∫_{0<u_n<…<u_1<t} {…{{f, V_{u_1}}, V_{u_2}}…, V_{u_n}} du.
//! ```
//!
//! Each bracket with `V` splits into one term per interacting pair touching
//! the current support, which gives the index sets of [`enumerate_terms`].

use std::collections::BTreeSet;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::model::{interaction_constant, LatticeModel, Pair, PairSet, Region, Site};
use crate::observables::{
    pullback, Chart, Evaluate, FlowDescriptor, Levee, LinearFunctional, Observable, SmoothCore,
};
use crate::par;
use crate::phase_space::State;
use crate::quadrature::gauss_legendre;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DysonConfig {
    /// Support of the observable.
    pub lambda0: Region,
    /// Region whose internal interactions drive the evolution.
    pub lambda: Region,
    pub order: usize,
    /// Gauss–Legendre nodes per time level.
    pub quadrature_points: usize,
    pub t: f64,
}

impl DysonConfig {
    pub fn new(lambda0: Region, lambda: Region, order: usize, t: f64) -> Self {
        DysonConfig {
            lambda0,
            lambda,
            order,
            quadrature_points: 8,
            t,
        }
    }
}

/// One index vector of the series: the pairs bracketed in, innermost first.
///
/// Each step is stored as `(k, l)` with `k` already in the support built by
/// the previous steps (the smaller end when both are).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TermIndex {
    pub pairs: Vec<(Site, Site)>,
}

impl TermIndex {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sites(&self) -> BTreeSet<Site> {
        self.pairs.iter().flat_map(|&(k, l)| [k, l]).collect()
    }
}

/// `2 max(1, max_k max(√(ν_k m_k), 1/√(ν_k m_k)))` over the region.
///
/// The rotated difference `q_k(t) - q_l(t)` mixes in momenta with weight at
/// most `1/√(ν m)` and positions with weight one, which bounds the gradient
/// of the evolved potential by this multiple of the original one.
pub fn c0_constant(model: &LatticeModel, region: &Region) -> Result<f64> {
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut worst = 1.0f64;
    for s in region.iter() {
        let z = model.site(s)?.impedance();
        worst = worst.max(z).max(1.0 / z);
    }
    Ok(2.0 * worst)
}

/// `t₀ = 1/(C₀ |Λ₀| C)`; infinite when the region has no interactions.
pub fn dyson_radius(model: &LatticeModel, lambda0: &Region, region: &Region) -> Result<f64> {
    if lambda0.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let c = interaction_constant(model, region);
    if c == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (c0_constant(model, region)? * lambda0.len() as f64 * c))
}

/// `r = |t| C₀ |Λ₀| C`, the ratio of the geometric majorant.
pub fn dyson_ratio(model: &LatticeModel, lambda0: &Region, region: &Region, t: f64) -> Result<f64> {
    if lambda0.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let c = interaction_constant(model, region);
    if c == 0.0 {
        return Ok(0.0);
    }
    Ok(t.abs() * c0_constant(model, region)? * lambda0.len() as f64 * c)
}

/// `r^M / (1 - r)`; multiply by `‖∇f‖_∞` for the remainder after order `M - 1`.
pub fn tail_bound(model: &LatticeModel, lambda0: &Region, region: &Region, t: f64, from_order: usize) -> Result<f64> {
    let r = dyson_ratio(model, lambda0, region, t)?;
    if r >= 1.0 {
        return Err(Error::OutsideDysonRadius(r));
    }
    Ok(r.powi(from_order as i32) / (1.0 - r))
}

fn evolved_difference(model: &LatticeModel, k: Site, l: Site, t: f64) -> Result<Vec<LinearFunctional>> {
    (0..model.dim_n())
        .map(|d| {
            LinearFunctional::q(k, d)
                .term(l, crate::observables::Component::Q, d, -1.0)
                .free_pullback(model, t)
        })
        .collect()
}

/// `V_kl ∘ π_pos ∘ Φᵗ_{H⁰}` as a levee with rotated projection functionals.
pub fn time_evolved_potential(model: &LatticeModel, k: Site, l: Site, t: f64) -> Result<Observable> {
    let pair = Pair::new(k, l)?;
    let v = model.potential(pair)?.clone();
    Observable::levee(evolved_difference(model, pair.k, pair.l, t)?, SmoothCore::Potential(v))
}

fn active_neighbors<'a>(model: &'a LatticeModel, lambda: &'a Region, s: Site) -> impl Iterator<Item = Site> + 'a {
    model.neighbors(s).iter().copied().filter(move |&l| {
        lambda.contains(l)
            && model
                .potential(Pair { k: s.min(l), l: s.max(l) })
                .map(|v| !v.is_zero())
                .unwrap_or(false)
    })
}

/// Index vectors of length `n`: every step brackets with a nonzero pair
/// inside `lambda` that touches `lambda0` or a site reached earlier.
/// Returned in lexicographic order.
pub fn enumerate_terms(model: &LatticeModel, lambda0: &Region, lambda: &Region, n: usize) -> Result<Vec<TermIndex>> {
    if n == 0 {
        return Err(Error::InvalidArgument("term order must be at least 1".into()));
    }
    check_nested(lambda0, lambda)?;
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(n);
    let support: BTreeSet<Site> = lambda0.iter().collect();
    extend_terms(model, lambda, &support, n, &mut prefix, &mut out);
    Ok(out)
}

fn extend_terms(
    model: &LatticeModel,
    lambda: &Region,
    support: &BTreeSet<Site>,
    n: usize,
    prefix: &mut Vec<(Site, Site)>,
    out: &mut Vec<TermIndex>,
) {
    if prefix.len() == n {
        out.push(TermIndex { pairs: prefix.clone() });
        return;
    }
    let mut steps: BTreeSet<(Site, Site)> = BTreeSet::new();
    for &s in support {
        for l in active_neighbors(model, lambda, s) {
            let k = if support.contains(&l) { s.min(l) } else { s };
            steps.insert((k, if k == s { l } else { s }));
        }
    }
    for (k, l) in steps {
        prefix.push((k, l));
        let mut next = support.clone();
        next.insert(l);
        extend_terms(model, lambda, &next, n, prefix, out);
        prefix.pop();
    }
}

fn check_nested(inner: &Region, outer: &Region) -> Result<()> {
    match inner.iter().find(|s| !outer.contains(*s)) {
        Some(s) => Err(Error::NotNested(s)),
        None => Ok(()),
    }
}

/// Partial sum of the Dyson series, evaluable pointwise.
///
/// Each term is integrated over the time simplex by iterated Gauss–Legendre
/// rules, and its nested brackets are exact derivatives of Taylor jets.
#[derive(Clone, Debug)]
pub struct DysonSeries {
    model: Arc<LatticeModel>,
    f: Observable,
    cfg: DysonConfig,
    terms: Vec<TermIndex>,
    radius: f64,
}

impl DysonSeries {
    pub fn config(&self) -> &DysonConfig {
        &self.cfg
    }

    pub fn terms(&self) -> &[TermIndex] {
        &self.terms
    }

    pub fn observable(&self) -> &Observable {
        &self.f
    }

    /// `t₀` of the underlying regions.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Whether `|t| < t₀`, where the series is known to converge.
    pub fn within_radius(&self) -> bool {
        self.cfg.t.abs() < self.radius
    }

    /// Partial sums for orders `0..=M` at `state`.
    pub fn partial_sums(&self, state: &State) -> Result<Vec<Complex64>> {
        self.partial_sums_with(state, self.cfg.quadrature_points)
    }

    /// Partial sums using `points` quadrature nodes per time level.
    pub fn partial_sums_with(&self, state: &State, points: usize) -> Result<Vec<Complex64>> {
        if points == 0 {
            return Err(Error::InvalidArgument("need at least one quadrature point".into()));
        }
        let rule = gauss_legendre(points);
        let contributions = par::map_slice(&self.terms, |term| self.term_value(term, state, &rule));
        let mut by_order = vec![Complex64::new(0.0, 0.0); self.cfg.order + 1];
        by_order[0] = self.f.evaluate(state)?;
        for (term, c) in self.terms.iter().zip(contributions) {
            by_order[term.len()] += c?;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        Ok(by_order
            .into_iter()
            .map(|c| {
                acc += c;
                acc
            })
            .collect())
    }

    /// The order-`M` value and `|value(q) - value(2q)|` as a quadrature error estimate.
    pub fn evaluate_with_error(&self, state: &State) -> Result<(Complex64, f64)> {
        let q = self.cfg.quadrature_points;
        let coarse = *self.partial_sums_with(state, q)?.last().expect("order 0 present");
        let fine = *self.partial_sums_with(state, 2 * q)?.last().expect("order 0 present");
        Ok((coarse, (coarse - fine).norm()))
    }

    fn term_value(&self, term: &TermIndex, state: &State, rule: &(Vec<f64>, Vec<f64>)) -> Result<Complex64> {
        let n = term.len();
        let mut sites = self.f.sites();
        sites.extend(term.sites());
        let chart = Chart::new(sites, self.model.dim_n());
        let base = self.f.jet(&chart, state, n)?;
        self.level(term, 0, self.cfg.t, Complex64::new(1.0, 0.0), &base, &chart, state, rule)
    }

    #[allow(clippy::too_many_arguments)]
    fn level(
        &self,
        term: &TermIndex,
        j: usize,
        upper: f64,
        weight: Complex64,
        inner: &Jet,
        chart: &Chart,
        state: &State,
        rule: &(Vec<f64>, Vec<f64>),
    ) -> Result<Complex64> {
        let n = term.len();
        let (k, l) = term.pairs[j];
        let pair = Pair::new(k, l)?;
        let core = SmoothCore::Potential(self.model.potential(pair)?.clone());
        let mut sum = Complex64::new(0.0, 0.0);
        for (x, w) in rule.0.iter().zip(&rule.1) {
            let u = upper * x;
            let wu = weight * (upper * w);
            let v = Levee {
                projection: evolved_difference(&self.model, pair.k, pair.l, u)?,
                core: core.clone(),
            }
            .jet(chart, state, n - j)?;
            // {B, V} in the standard convention is Σ ∂_p V ∂_q B - ∂_q V ∂_p B
            let b = chart.bracket_on(&v, inner, &[pair.k, pair.l]);
            sum += if j + 1 == n {
                wu * b.value()
            } else {
                self.level(term, j + 1, u, wu, &b, chart, state, rule)?
            };
        }
        Ok(sum)
    }
}

impl Evaluate for DysonSeries {
    fn evaluate(&self, state: &State) -> Result<Complex64> {
        Ok(*self.partial_sums(state)?.last().expect("order 0 present"))
    }

    fn sites(&self) -> BTreeSet<Site> {
        let mut s = self.f.sites();
        for t in &self.terms {
            s.extend(t.sites());
        }
        s
    }

    fn focus_sites(&self) -> BTreeSet<Site> {
        self.f.sites()
    }
}

/// The order-`M` truncation of `γᵗ(f)` on `cfg.lambda`.
///
/// `f` must be built from Schwartz-class levees supported in `cfg.lambda0`
/// and every potential in `cfg.lambda` must be analytic. Times outside the
/// Dyson radius are accepted; check [`DysonSeries::within_radius`].
pub fn gamma_truncated(model: &LatticeModel, f: &Observable, cfg: &DysonConfig) -> Result<DysonSeries> {
    if cfg.lambda0.is_empty() {
        return Err(Error::EmptyRegion);
    }
    check_nested(&cfg.lambda0, &cfg.lambda)?;
    model.check_region(&cfg.lambda)?;
    if f.has_numeric_flow() {
        return Err(Error::NonAnalyticFlow);
    }
    for c in f.cores() {
        if !(c.is_schwartz() || matches!(c, SmoothCore::Constant { .. })) {
            return Err(Error::NotSchwartz(c.family()));
        }
    }
    if let Some(s) = f.sites().into_iter().find(|s| !cfg.lambda0.contains(*s)) {
        return Err(Error::SupportOutsideRegion(s));
    }
    for p in model.internal_pairs(&cfg.lambda) {
        let v = model.potential(p)?;
        if !v.is_zero() && !v.is_analytic() {
            return Err(Error::NonAnalyticPotential(v.family()));
        }
    }
    let mut terms = Vec::new();
    for n in 1..=cfg.order {
        terms.extend(enumerate_terms(model, &cfg.lambda0, &cfg.lambda, n)?);
    }
    Ok(DysonSeries {
        model: Arc::new(model.clone()),
        f: f.clone(),
        cfg: cfg.clone(),
        terms,
        radius: dyson_radius(model, &cfg.lambda0, &cfg.lambda)?,
    })
}

/// `γᵗ(f) = f ∘ Φ^{-t}_{H⁰} ∘ Φᵗ_{H_N}` with the interacting flow integrated numerically.
pub fn gamma_direct(
    model: &LatticeModel,
    f: &Observable,
    lambda: &Region,
    pairs: &PairSet,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<Observable> {
    model.check_pairs(lambda, pairs)?;
    let model = Arc::new(model.clone());
    let unwound = pullback(f, &FlowDescriptor::free(model.clone()), -t)?;
    let flow = Arc::new(FlowDescriptor::Interacting {
        model,
        region: lambda.clone(),
        pairs: pairs.clone(),
        cfg: *cfg,
    });
    pullback(&unwound, &flow, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialSpec;

    fn chain(len: usize) -> LatticeModel {
        let v = PotentialSpec::poly_bump(1, 0.3, 3.0, 6).unwrap();
        LatticeModel::chain(len, 1.0, 1.0, &v).unwrap()
    }

    #[test]
    fn c0_examples() {
        let m = chain(3);
        assert_eq!(c0_constant(&m, &m.all_sites()).unwrap(), 2.0);
        let m = LatticeModel::builder(1).site(0, 1.0, 4.0).build().unwrap();
        assert_eq!(c0_constant(&m, &m.all_sites()).unwrap(), 4.0);
        assert!(c0_constant(&m, &Region::empty()).is_err());
    }

    #[test]
    fn radius_scales_inversely_with_support() {
        let m = chain(3);
        let all = m.all_sites();
        let one = dyson_radius(&m, &Region::new([1]).unwrap(), &all).unwrap();
        let two = dyson_radius(&m, &Region::new([0, 1]).unwrap(), &all).unwrap();
        assert!((one - 2.0 * two).abs() < 1e-15);
        let free = LatticeModel::builder(1).site(0, 1.0, 1.0).build().unwrap();
        assert!(dyson_radius(&free, &free.all_sites(), &free.all_sites()).unwrap().is_infinite());
    }

    #[test]
    fn tail_bound_is_geometric() {
        let m = chain(2);
        let all = m.all_sites();
        let l0 = Region::new([0]).unwrap();
        let t0 = dyson_radius(&m, &l0, &all).unwrap();
        let b3 = tail_bound(&m, &l0, &all, t0 / 2.0, 3).unwrap();
        assert!((b3 - 0.25).abs() < 1e-12);
        let b4 = tail_bound(&m, &l0, &all, t0 / 2.0, 4).unwrap();
        assert!((b3 / b4 - 2.0).abs() < 1e-12);
        let e = tail_bound(&m, &l0, &all, 1.5 * t0, 1).unwrap_err();
        assert!(e.to_string().starts_with("outside Dyson radius"));
    }

    #[test]
    fn enumeration_on_a_three_site_chain() {
        let m = chain(3);
        let mid = Region::new([1]).unwrap();
        let all = m.all_sites();
        let one = enumerate_terms(&m, &mid, &all, 1).unwrap();
        assert_eq!(one.iter().map(|t| t.pairs.clone()).collect::<Vec<_>>(), vec![vec![(1, 0)], vec![(1, 2)]]);
        let two = enumerate_terms(&m, &mid, &all, 2).unwrap();
        let got: Vec<Vec<(Site, Site)>> = two.iter().map(|t| t.pairs.clone()).collect();
        assert_eq!(
            got,
            vec![
                vec![(1, 0), (0, 1)],
                vec![(1, 0), (1, 2)],
                vec![(1, 2), (1, 0)],
                vec![(1, 2), (1, 2)],
            ]
        );
        let free = LatticeModel::builder(1).site(0, 1.0, 1.0).site(1, 1.0, 1.0).build().unwrap();
        assert!(enumerate_terms(&free, &Region::new([0]).unwrap(), &free.all_sites(), 1).unwrap().is_empty());
    }

    #[test]
    fn evolved_potential_at_time_zero_and_full_period() {
        let m = chain(2);
        let w = State::new().with(0, &[0.4], &[0.3]).with(1, &[-0.2], &[-0.5]);
        let v = model_value(&m, &w);
        for t in [0.0, 2.0 * std::f64::consts::PI] {
            let e = time_evolved_potential(&m, 0, 1, t).unwrap().evaluate(&w).unwrap();
            assert!((e.re - v).abs() < 1e-14);
        }
        assert!(time_evolved_potential(&chain(3), 0, 2, 0.0).is_err());
    }

    fn model_value(m: &LatticeModel, w: &State) -> f64 {
        m.potential(Pair::new(0, 1).unwrap()).unwrap().eval(&[w.q(0, 0) - w.q(1, 0)])
    }

    #[test]
    fn order_zero_and_free_models_return_f() {
        let f = Observable::gaussian(vec![LinearFunctional::q(0, 0), LinearFunctional::p(0, 0)]);
        let w = State::new().with(0, &[0.2], &[-0.7]).with(1, &[0.1], &[0.3]);
        let m = chain(2);
        let cfg = DysonConfig::new(Region::new([0]).unwrap(), m.all_sites(), 0, 0.1);
        let g = gamma_truncated(&m, &f, &cfg).unwrap();
        assert_eq!(g.evaluate(&w).unwrap(), f.evaluate(&w).unwrap());
        let zero = LatticeModel::builder(1)
            .site(0, 1.0, 1.0)
            .site(1, 1.0, 1.0)
            .interaction(0, 1, PotentialSpec::zero(1))
            .build()
            .unwrap();
        let cfg = DysonConfig::new(Region::new([0]).unwrap(), zero.all_sites(), 3, 0.7);
        let g = gamma_truncated(&zero, &f, &cfg).unwrap();
        assert!(g.terms().is_empty());
        assert_eq!(g.evaluate(&w).unwrap(), f.evaluate(&w).unwrap());
        let d = gamma_direct(&zero, &f, &zero.all_sites(), &zero.internal_pairs(&zero.all_sites()), 0.7, &IntegratorConfig::default())
            .unwrap();
        assert!((d.evaluate(&w).unwrap() - f.evaluate(&w).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn non_schwartz_observables_are_rejected() {
        let m = chain(2);
        let h = crate::observables::resolvent(LinearFunctional::q(0, 0), 1.0).unwrap();
        let cfg = DysonConfig::new(Region::new([0]).unwrap(), m.all_sites(), 2, 0.1);
        assert!(matches!(gamma_truncated(&m, &h, &cfg), Err(Error::NotSchwartz(_))));
    }

    #[test]
    fn short_time_series_agrees_with_direct_evolution() {
        let m = chain(2);
        let f = Observable::gaussian(vec![LinearFunctional::q(0, 0), LinearFunctional::p(0, 0).term(0, crate::observables::Component::Q, 0, 0.5)]);
        let w = State::new().with(0, &[0.3], &[0.2]).with(1, &[-0.4], &[-0.6]);
        let t = 0.05;
        let cfg = DysonConfig::new(Region::new([0]).unwrap(), m.all_sites(), 3, t);
        let series = gamma_truncated(&m, &f, &cfg).unwrap();
        let direct = gamma_direct(&m, &f, &m.all_sites(), &m.internal_pairs(&m.all_sites()), t, &IntegratorConfig::oracle(1e-13))
            .unwrap();
        let a = series.evaluate(&w).unwrap();
        let b = direct.evaluate(&w).unwrap();
        assert!((a - b).norm() < 1e-7, "{a} vs {b}");
        let sums = series.partial_sums(&w).unwrap();
        assert!((sums[1] - b).norm() < (sums[0] - b).norm());
    }
}
