//! Levee observables, Poisson brackets, pullbacks and sup-norm estimates.

mod core;
mod sampler;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{flow, free_flow, IntegratorConfig};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::model::{LatticeModel, PairSet, Region, Site};
use crate::phase_space::State;

pub use self::core::SmoothCore;
pub use sampler::{sup_distance, SamplePlan, SamplerSpec, SupEstimate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    P,
    Q,
}

/// One coefficient of a linear functional on phase space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalTerm {
    pub site: Site,
    pub component: Component,
    pub index: usize,
    pub coeff: f64,
}

/// A finitely supported linear functional `ω ↦ Σ a·p_{k,i} + b·q_{k,i}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearFunctional {
    coeffs: BTreeMap<(Site, Component, usize), f64>,
}

impl LinearFunctional {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `coeff` to the coefficient of the given coordinate.
    pub fn term(mut self, site: Site, component: Component, index: usize, coeff: f64) -> Self {
        *self.coeffs.entry((site, component, index)).or_insert(0.0) += coeff;
        self
    }

    pub fn p(site: Site, index: usize) -> Self {
        Self::new().term(site, Component::P, index, 1.0)
    }

    pub fn q(site: Site, index: usize) -> Self {
        Self::new().term(site, Component::Q, index, 1.0)
    }

    pub fn from_terms<'a, I: IntoIterator<Item = &'a FunctionalTerm>>(terms: I) -> Self {
        terms.into_iter().fold(Self::new(), |f, t| {
            f.term(t.site, t.component, t.index, t.coeff)
        })
    }

    pub fn terms(&self) -> impl Iterator<Item = FunctionalTerm> + '_ {
        self.coeffs.iter().map(|(&(site, component, index), &coeff)| FunctionalTerm {
            site,
            component,
            index,
            coeff,
        })
    }

    pub fn coeff(&self, site: Site, component: Component, index: usize) -> f64 {
        self.coeffs.get(&(site, component, index)).copied().unwrap_or(0.0)
    }

    pub fn sites(&self) -> BTreeSet<Site> {
        self.coeffs.keys().map(|k| k.0).collect()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.coeffs.keys().map(|k| k.2).max()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.values().map(|c| c * c).sum()
    }

    pub fn apply(&self, state: &State) -> f64 {
        self.coeffs
            .iter()
            .map(|(&(s, c, i), a)| {
                a * match c {
                    Component::P => state.p(s, i),
                    Component::Q => state.q(s, i),
                }
            })
            .sum()
    }

    /// The functional `ℓ ∘ Φᵗ_{H⁰}`, in closed form.
    pub fn free_pullback(&self, model: &LatticeModel, t: f64) -> Result<Self> {
        self.free_pullback_within(model, t, None)
    }

    /// Like [`free_pullback`](Self::free_pullback), but sites outside
    /// `region` are left in place.
    pub fn free_pullback_within(&self, model: &LatticeModel, t: f64, region: Option<&Region>) -> Result<Self> {
        let mut out = BTreeMap::new();
        let keys: BTreeSet<(Site, usize)> = self.coeffs.keys().map(|k| (k.0, k.2)).collect();
        for (s, i) in keys {
            if region.is_some_and(|r| !r.contains(s)) {
                for c in [Component::P, Component::Q] {
                    if let Some(a) = self.coeffs.get(&(s, c, i)) {
                        out.insert((s, c, i), *a);
                    }
                }
                continue;
            }
            let sp = model.site(s)?;
            let (c, sn) = ((sp.frequency() * t).cos(), (sp.frequency() * t).sin());
            let z = sp.impedance();
            let a = self.coeff(s, Component::P, i);
            let b = self.coeff(s, Component::Q, i);
            let pa = a * c + b * sn / z;
            let qb = -a * z * sn + b * c;
            if pa != 0.0 {
                out.insert((s, Component::P, i), pa);
            }
            if qb != 0.0 {
                out.insert((s, Component::Q, i), qb);
            }
        }
        Ok(LinearFunctional { coeffs: out })
    }

    /// Affine jet of the functional around `state` in `chart` coordinates.
    pub fn jet(&self, chart: &Chart, state: &State, order: usize) -> Jet {
        let slopes: Vec<(usize, f64)> = self
            .coeffs
            .iter()
            .filter_map(|(&(s, c, i), &a)| chart.var(s, c, i).map(|v| (v, a)))
            .collect();
        Jet::affine(chart.nvars(), order, self.apply(state), &slopes)
    }
}

/// Coordinates `(p, q)` of a finite set of sites, numbered for jets.
#[derive(Clone, Debug)]
pub struct Chart {
    sites: Vec<Site>,
    dim: usize,
}

impl Chart {
    pub fn new<I: IntoIterator<Item = Site>>(sites: I, dim: usize) -> Self {
        let set: BTreeSet<Site> = sites.into_iter().collect();
        Chart {
            sites: set.into_iter().collect(),
            dim,
        }
    }

    pub fn nvars(&self) -> usize {
        2 * self.dim * self.sites.len()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn var(&self, site: Site, component: Component, index: usize) -> Option<usize> {
        if index >= self.dim {
            return None;
        }
        let pos = self.sites.binary_search(&site).ok()?;
        Some(match component {
            Component::P => pos * 2 * self.dim + index,
            Component::Q => pos * 2 * self.dim + self.dim + index,
        })
    }

    /// `Σ_{k,i} ∂_{p_{k,i}} a ∂_{q_{k,i}} b - ∂_{q_{k,i}} a ∂_{p_{k,i}} b` over the given sites.
    pub fn bracket_on(&self, a: &Jet, b: &Jet, sites: &[Site]) -> Jet {
        let order = a.order().min(b.order()).saturating_sub(1);
        let mut acc = Jet::zero(self.nvars(), order);
        for &s in sites {
            for i in 0..self.dim {
                let (Some(vp), Some(vq)) = (self.var(s, Component::P, i), self.var(s, Component::Q, i)) else {
                    continue;
                };
                let t1 = &a.derivative(vp) * &b.derivative(vq);
                let t2 = &a.derivative(vq) * &b.derivative(vp);
                acc = &acc + &(&t1 - &t2);
            }
        }
        acc
    }

    /// Bracket over every site of the chart.
    pub fn bracket(&self, a: &Jet, b: &Jet) -> Jet {
        self.bracket_on(a, b, &self.sites.clone())
    }
}

/// `g ∘ π` for a linear projection `π = (ℓ_1, …, ℓ_d)`.
#[derive(Clone, Debug)]
pub struct Levee {
    pub projection: Vec<LinearFunctional>,
    pub core: SmoothCore,
}

impl Levee {
    pub fn new(projection: Vec<LinearFunctional>, core: SmoothCore) -> Result<Self> {
        if projection.len() != core.arity() {
            return Err(Error::DimensionMismatch {
                expected: core.arity(),
                got: projection.len(),
            });
        }
        Ok(Levee { projection, core })
    }

    fn args(&self, state: &State) -> Vec<f64> {
        self.projection.iter().map(|l| l.apply(state)).collect()
    }

    pub fn jet(&self, chart: &Chart, state: &State, order: usize) -> Result<Jet> {
        let args: Vec<Jet> = self.projection.iter().map(|l| l.jet(chart, state, order)).collect();
        let unit = Jet::constant(chart.nvars(), order, Complex64::new(1.0, 0.0));
        self.core.eval_generic(&args, &unit)
    }
}

/// A flow along which observables are pulled back.
#[derive(Clone, Debug)]
pub enum FlowDescriptor {
    Free {
        model: Arc<LatticeModel>,
    },
    Interacting {
        model: Arc<LatticeModel>,
        region: Region,
        pairs: PairSet,
        cfg: IntegratorConfig,
    },
}

impl FlowDescriptor {
    pub fn free(model: Arc<LatticeModel>) -> Arc<Self> {
        Arc::new(FlowDescriptor::Free { model })
    }

    /// The flow of `H_Λ` with every internal pair (free boundary conditions).
    pub fn local(model: Arc<LatticeModel>, region: Region, cfg: IntegratorConfig) -> Arc<Self> {
        let pairs = model.internal_pairs(&region);
        Arc::new(FlowDescriptor::Interacting {
            model,
            region,
            pairs,
            cfg,
        })
    }

    pub fn model(&self) -> &Arc<LatticeModel> {
        match self {
            FlowDescriptor::Free { model } | FlowDescriptor::Interacting { model, .. } => model,
        }
    }

    /// Applies `Φᵗ`. Sites outside an interacting region do not move.
    pub fn apply(&self, state: &State, t: f64) -> Result<State> {
        match self {
            FlowDescriptor::Free { model } => free_flow(model, state, t),
            FlowDescriptor::Interacting {
                model,
                region,
                pairs,
                cfg,
            } => {
                let inside = state.project_region(region);
                let moved = flow(model, region, pairs, &inside, t, cfg)?;
                let mut out = moved;
                for (s, v) in state.entries() {
                    if !region.contains(s) {
                        out.insert(s, &v.p, &v.q);
                    }
                }
                Ok(out)
            }
        }
    }

    fn is_free(&self) -> bool {
        match self {
            FlowDescriptor::Free { .. } => true,
            FlowDescriptor::Interacting { pairs, .. } => pairs.is_empty(),
        }
    }

    /// Sites moved by the flow, when it does not act on every site.
    fn region(&self) -> Option<&Region> {
        match self {
            FlowDescriptor::Free { .. } => None,
            FlowDescriptor::Interacting { region, .. } => Some(region),
        }
    }
}

/// Something that can be evaluated at phase-space points.
pub trait Evaluate: Sync {
    fn evaluate(&self, state: &State) -> Result<Complex64>;
    /// Sites whose coordinates can influence the value.
    fn sites(&self) -> BTreeSet<Site>;
    /// Sites read directly by the outermost projection; samplers grid these first.
    fn focus_sites(&self) -> BTreeSet<Site> {
        self.sites()
    }
}

/// Complex-valued observable built from levees.
#[derive(Clone, Debug)]
pub enum Observable {
    Levee(Levee),
    /// `{f, g}`, with `{f, g} = Σ ∂_p f ∂_q g - ∂_q f ∂_p g`.
    Bracket(Box<Observable>, Box<Observable>),
    Product(Vec<Observable>),
    Sum(Vec<(Complex64, Observable)>),
    /// `f ∘ Φᵗ`, kept unevaluated for numerical flows.
    Pullback {
        inner: Box<Observable>,
        flow: Arc<FlowDescriptor>,
        t: f64,
    },
}

impl Observable {
    pub fn levee(projection: Vec<LinearFunctional>, core: SmoothCore) -> Result<Self> {
        Ok(Observable::Levee(Levee::new(projection, core)?))
    }

    pub fn constant(value: Complex64) -> Self {
        Observable::Levee(Levee {
            projection: Vec::new(),
            core: SmoothCore::Constant { value },
        })
    }

    /// `exp(-Σ ℓ_i(ω)²)`.
    pub fn gaussian(projection: Vec<LinearFunctional>) -> Self {
        let arity = projection.len();
        Observable::Levee(Levee {
            projection,
            core: SmoothCore::Gaussian { arity },
        })
    }

    pub fn as_levee(&self) -> Option<&Levee> {
        match self {
            Observable::Levee(l) => Some(l),
            _ => None,
        }
    }

    /// Whether any numerical (interacting) pullback occurs in the tree.
    pub fn has_numeric_flow(&self) -> bool {
        match self {
            Observable::Levee(_) => false,
            Observable::Bracket(a, b) => a.has_numeric_flow() || b.has_numeric_flow(),
            Observable::Product(fs) => fs.iter().any(|f| f.has_numeric_flow()),
            Observable::Sum(fs) => fs.iter().any(|(_, f)| f.has_numeric_flow()),
            Observable::Pullback { .. } => true,
        }
    }

    /// Levee cores appearing in the tree.
    pub fn cores(&self) -> Vec<&SmoothCore> {
        match self {
            Observable::Levee(l) => vec![&l.core],
            Observable::Bracket(a, b) => a.cores().into_iter().chain(b.cores()).collect(),
            Observable::Product(fs) => fs.iter().flat_map(|f| f.cores()).collect(),
            Observable::Sum(fs) => fs.iter().flat_map(|(_, f)| f.cores()).collect(),
            Observable::Pullback { inner, .. } => inner.cores(),
        }
    }

    fn max_index(&self) -> usize {
        match self {
            Observable::Levee(l) => l.projection.iter().filter_map(|f| f.max_index()).max().unwrap_or(0),
            Observable::Bracket(a, b) => a.max_index().max(b.max_index()),
            Observable::Product(fs) => fs.iter().map(|f| f.max_index()).max().unwrap_or(0),
            Observable::Sum(fs) => fs.iter().map(|(_, f)| f.max_index()).max().unwrap_or(0),
            Observable::Pullback { inner, flow, .. } => inner.max_index().max(flow.model().dim_n() - 1),
        }
    }

    /// Taylor jet of the observable around `state`.
    pub fn jet(&self, chart: &Chart, state: &State, order: usize) -> Result<Jet> {
        match self {
            Observable::Levee(l) => l.jet(chart, state, order),
            Observable::Bracket(a, b) => {
                let ja = a.jet(chart, state, order + 1)?;
                let jb = b.jet(chart, state, order + 1)?;
                Ok(chart.bracket(&ja, &jb))
            }
            Observable::Product(fs) => {
                let mut acc = Jet::constant(chart.nvars(), order, Complex64::new(1.0, 0.0));
                for f in fs {
                    acc = &acc * &f.jet(chart, state, order)?;
                }
                Ok(acc)
            }
            Observable::Sum(fs) => {
                let mut acc = Jet::zero(chart.nvars(), order);
                for (c, f) in fs {
                    acc = &acc + &f.jet(chart, state, order)?.scale(*c);
                }
                Ok(acc)
            }
            Observable::Pullback { .. } => Err(Error::NonAnalyticFlow),
        }
    }

    /// Gradient bound `‖∇f‖_∞ ≤ sup‖∇g‖ · ‖π‖_F` for a single levee.
    pub fn grad_bound(&self) -> Option<f64> {
        match self {
            Observable::Levee(l) => {
                let g = l.core.grad_sup_bound()?;
                let frob = l.projection.iter().map(|f| f.norm_sq()).sum::<f64>().sqrt();
                Some(g * frob)
            }
            _ => None,
        }
    }
}

impl Evaluate for Observable {
    fn evaluate(&self, state: &State) -> Result<Complex64> {
        match self {
            Observable::Levee(l) => l.core.eval(&l.args(state)),
            Observable::Bracket(..) => {
                let chart = Chart::new(self.sites(), self.max_index() + 1);
                Ok(self.jet(&chart, state, 0)?.value())
            }
            Observable::Product(fs) => fs
                .iter()
                .try_fold(Complex64::new(1.0, 0.0), |acc, f| Ok(acc * f.evaluate(state)?)),
            Observable::Sum(fs) => fs
                .iter()
                .try_fold(Complex64::new(0.0, 0.0), |acc, (c, f)| Ok(acc + c * f.evaluate(state)?)),
            Observable::Pullback { inner, flow, t } => inner.evaluate(&flow.apply(state, *t)?),
        }
    }

    fn sites(&self) -> BTreeSet<Site> {
        match self {
            Observable::Levee(l) => l.projection.iter().flat_map(|f| f.sites()).collect(),
            Observable::Bracket(a, b) => a.sites().union(&b.sites()).copied().collect(),
            Observable::Product(fs) => fs.iter().flat_map(|f| f.sites()).collect(),
            Observable::Sum(fs) => fs.iter().flat_map(|(_, f)| f.sites()).collect(),
            Observable::Pullback { inner, flow, .. } => {
                let mut s = inner.sites();
                if let FlowDescriptor::Interacting { region, .. } = flow.as_ref() {
                    // only the connected part of the region can reach the inner sites
                    s.extend(region.iter());
                }
                s
            }
        }
    }

    fn focus_sites(&self) -> BTreeSet<Site> {
        match self {
            Observable::Pullback { inner, .. } => inner.focus_sites(),
            Observable::Bracket(a, b) => a.focus_sites().union(&b.focus_sites()).copied().collect(),
            Observable::Product(fs) => fs.iter().flat_map(|f| f.focus_sites()).collect(),
            Observable::Sum(fs) => fs.iter().flat_map(|(_, f)| f.focus_sites()).collect(),
            Observable::Levee(_) => self.sites(),
        }
    }
}

/// Evaluates `f` at `ω`.
pub fn eval_observable(f: &Observable, state: &State) -> Result<Complex64> {
    f.evaluate(state)
}

/// The classical resolvent `h_x^λ(ω) = 1/(iλ - x·ω)`.
pub fn resolvent(x: LinearFunctional, lambda: f64) -> Result<Observable> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("resolvent needs λ ≠ 0, got {lambda}")));
    }
    Observable::levee(vec![x], SmoothCore::Resolvent { lambda })
}

/// `{f, g}` as a new observable.
///
/// Brackets are evaluated by exact differentiation, so both arguments must
/// be built from levees and free-flow pullbacks only.
pub fn poisson(f: &Observable, g: &Observable) -> Result<Observable> {
    if f.has_numeric_flow() || g.has_numeric_flow() {
        return Err(Error::NonAnalyticFlow);
    }
    for c in f.cores().into_iter().chain(g.cores()) {
        if !c.is_analytic() {
            return Err(Error::NonAnalyticPotential(c.family()));
        }
    }
    Ok(Observable::Bracket(Box::new(f.clone()), Box::new(g.clone())))
}

/// `f ∘ Φᵗ`.
///
/// Free-flow pullbacks are carried out symbolically by rotating projection
/// functionals, which keeps levees levees. Interacting pullbacks are stored
/// and applied at evaluation time.
pub fn pullback(f: &Observable, flow: &Arc<FlowDescriptor>, t: f64) -> Result<Observable> {
    if t == 0.0 {
        return Ok(f.clone());
    }
    if flow.is_free() {
        return free_pullback(f, flow, t);
    }
    Ok(Observable::Pullback {
        inner: Box::new(f.clone()),
        flow: flow.clone(),
        t,
    })
}

fn free_pullback(f: &Observable, flow: &Arc<FlowDescriptor>, t: f64) -> Result<Observable> {
    let model = flow.model();
    Ok(match f {
        Observable::Levee(l) => Observable::Levee(Levee {
            projection: l
                .projection
                .iter()
                .map(|p| p.free_pullback_within(model, t, flow.region()))
                .collect::<Result<_>>()?,
            core: l.core.clone(),
        }),
        // the free flow is symplectic, so it commutes with brackets
        Observable::Bracket(a, b) => Observable::Bracket(
            Box::new(free_pullback(a, flow, t)?),
            Box::new(free_pullback(b, flow, t)?),
        ),
        Observable::Product(fs) => {
            Observable::Product(fs.iter().map(|g| free_pullback(g, flow, t)).collect::<Result<_>>()?)
        }
        Observable::Sum(fs) => Observable::Sum(
            fs.iter()
                .map(|(c, g)| Ok((*c, free_pullback(g, flow, t)?)))
                .collect::<Result<_>>()?,
        ),
        Observable::Pullback { .. } => Observable::Pullback {
            inner: Box::new(f.clone()),
            flow: flow.clone(),
            t,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialSpec;

    fn unit_model(n: usize) -> Arc<LatticeModel> {
        let mut b = LatticeModel::builder(1);
        for s in 0..n {
            b = b.site(s, 1.0, 1.0);
        }
        Arc::new(b.build().unwrap())
    }

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn constant_and_gaussian_values() {
        let w = State::new().with(0, &[0.7], &[0.0]);
        assert_eq!(Observable::constant(c(2.5)).evaluate(&w).unwrap(), c(2.5));
        let g = Observable::gaussian(vec![LinearFunctional::q(0, 0)]);
        assert_eq!(g.evaluate(&w).unwrap(), c(1.0));
    }

    #[test]
    fn resolvent_examples() {
        let x = LinearFunctional::q(0, 0).term(1, Component::P, 0, 1.0);
        let h = resolvent(x, 1.0).unwrap();
        let w = State::new().with(0, &[0.0], &[0.25]).with(1, &[0.75], &[0.0]);
        assert!((h.evaluate(&w).unwrap() - Complex64::new(-0.5, -0.5)).norm() < 1e-15);
        let z = resolvent(LinearFunctional::new(), 4.0).unwrap();
        assert!((z.evaluate(&w).unwrap() - Complex64::new(0.0, -0.25)).norm() < 1e-15);
        assert!(resolvent(LinearFunctional::q(0, 0), 0.0).is_err());
    }

    #[test]
    fn bracket_of_momentum_and_position_gaussians() {
        let f = Observable::gaussian(vec![LinearFunctional::p(0, 0)]);
        let g = Observable::gaussian(vec![LinearFunctional::q(0, 0)]);
        let b = poisson(&f, &g).unwrap();
        for (p, q) in [(0.3, -0.4), (1.1, 0.2), (-0.5, -0.9)] {
            let w = State::new().with(0, &[p], &[q]);
            let expect = 4.0 * p * q * (-p * p - q * q).exp();
            assert!((b.evaluate(&w).unwrap() - c(expect)).norm() < 1e-14);
        }
        let ff = poisson(&f, &f).unwrap();
        assert!(ff.evaluate(&State::new().with(0, &[0.3], &[0.1])).unwrap().norm() < 1e-15);
    }

    #[test]
    fn disjoint_brackets_vanish() {
        let f = Observable::gaussian(vec![LinearFunctional::p(0, 0), LinearFunctional::q(0, 0)]);
        let g = Observable::gaussian(vec![LinearFunctional::q(1, 0)]);
        let w = State::new().with(0, &[0.3], &[0.1]).with(1, &[0.2], &[0.5]);
        assert_eq!(poisson(&f, &g).unwrap().evaluate(&w).unwrap(), c(0.0));
    }

    #[test]
    fn numeric_pullbacks_cannot_be_bracketed() {
        let v = PotentialSpec::poly_bump(1, 0.3, 1.0, 3).unwrap();
        let m = Arc::new(LatticeModel::chain(2, 1.0, 1.0, &v).unwrap());
        let flow = FlowDescriptor::local(m.clone(), m.all_sites(), IntegratorConfig::default());
        let f = Observable::gaussian(vec![LinearFunctional::q(0, 0)]);
        let pf = pullback(&f, &flow, 0.5).unwrap();
        let e = poisson(&pf, &f).unwrap_err();
        assert_eq!(e.to_string(), "bracket requires analytic flows");
    }

    #[test]
    fn free_pullback_of_radial_gaussian_is_invariant() {
        let m = unit_model(1);
        let f = Observable::gaussian(vec![LinearFunctional::p(0, 0), LinearFunctional::q(0, 0)]);
        let g = pullback(&f, &FlowDescriptor::free(m), 0.8).unwrap();
        for w in [State::new().with(0, &[0.3], &[1.2]), State::new().with(0, &[-0.7], &[0.1])] {
            assert!((g.evaluate(&w).unwrap() - f.evaluate(&w).unwrap()).norm() < 1e-15);
        }
        assert_eq!(pullback(&f, &FlowDescriptor::free(unit_model(1)), 0.0).unwrap().as_levee().unwrap().projection,
            f.as_levee().unwrap().projection);
    }

    #[test]
    fn pullback_matches_flowing_the_state() {
        let m = Arc::new(
            LatticeModel::builder(1)
                .site(0, 2.0, 0.5)
                .site(1, 0.5, 3.0)
                .build()
                .unwrap(),
        );
        let f = Observable::gaussian(vec![
            LinearFunctional::p(0, 0).term(1, Component::Q, 0, 0.4),
            LinearFunctional::q(1, 0),
        ]);
        let flow = FlowDescriptor::free(m.clone());
        let g = pullback(&f, &flow, 1.3).unwrap();
        let w = State::new().with(0, &[0.2], &[0.9]).with(1, &[-0.4], &[0.3]);
        let direct = f.evaluate(&free_flow(&m, &w, 1.3).unwrap()).unwrap();
        assert!((g.evaluate(&w).unwrap() - direct).norm() < 1e-14);
    }
}
