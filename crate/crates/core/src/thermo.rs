//! Local dynamics on growing regions: Cauchy gaps and strong continuity.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::model::{potential_gradient_bound, vector_field_lipschitz, LatticeModel, PairSet, Region, Site};
use crate::observables::{pullback, Evaluate, FlowDescriptor, Observable, SamplePlan, SamplerSpec, SmoothCore, SupEstimate};

/// An increasing sequence of regions `Λ₀ ⊆ Λ₁ ⊆ ⋯ ⊆ Λ_K`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionNet {
    regions: Vec<Region>,
    strict: Vec<bool>,
}

impl RegionNet {
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        if regions.is_empty() || regions.iter().any(|r| r.is_empty()) {
            return Err(Error::EmptyRegion);
        }
        let mut strict = Vec::with_capacity(regions.len() - 1);
        for w in regions.windows(2) {
            check_nested(&w[0], &w[1])?;
            strict.push(w[0].len() < w[1].len());
        }
        Ok(RegionNet { regions, strict })
    }

    /// Balls `[center - r, center + r]` of a chain, clipped at zero.
    pub fn intervals(center: Site, radii: &[usize]) -> Result<Self> {
        Self::new(
            radii
                .iter()
                .map(|&r| Region::range(center.saturating_sub(r), center + r))
                .collect(),
        )
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    /// Whether each step `Λ_j ⊆ Λ_{j+1}` is a proper inclusion.
    pub fn strict(&self) -> &[bool] {
        &self.strict
    }

    pub fn largest(&self) -> &Region {
        self.regions.last().expect("nets are nonempty")
    }
}

fn check_nested(inner: &Region, outer: &Region) -> Result<()> {
    match inner.iter().find(|s| !outer.contains(*s)) {
        Some(s) => Err(Error::NotNested(s)),
        None => Ok(()),
    }
}

/// `α_Λᵗ(f) = f ∘ Φᵗ_{H_Λ}` with every pair internal to `Λ` switched on.
pub fn alpha(model: &LatticeModel, region: &Region, f: &Observable, t: f64, cfg: &IntegratorConfig) -> Result<Observable> {
    model.check_region(region)?;
    let flow = FlowDescriptor::local(Arc::new(model.clone()), region.clone(), *cfg);
    pullback(f, &flow, t)
}

fn plan_over(spec: &SamplerSpec, region: &Region, focus: BTreeSet<Site>, model: &LatticeModel) -> Result<SamplePlan> {
    let sites: BTreeSet<Site> = region.iter().chain(focus.iter().copied()).collect();
    SamplePlan::new(spec, &sites, &focus, model.dim_n())
}

fn deviations(a: &[Complex64], b: &[Complex64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).collect()
}

/// Estimate of `‖α_Λᵗ(f) - α_{Λ'}ᵗ(f)‖_∞` over a box spanning `Λ'`.
#[allow(clippy::too_many_arguments)]
pub fn cauchy_gap(
    model: &LatticeModel,
    lambda: &Region,
    lambda_prime: &Region,
    f: &Observable,
    t: f64,
    sampler: &SamplerSpec,
    cfg: &IntegratorConfig,
) -> Result<SupEstimate> {
    check_nested(lambda, lambda_prime)?;
    let small = alpha(model, lambda, f, t, cfg)?;
    let large = alpha(model, lambda_prime, f, t, cfg)?;
    let plan = plan_over(sampler, lambda_prime, f.focus_sites(), model)?;
    plan.sup_distance(&small, &large)
}

/// Gaps along a region net, all measured on one sample set spanning `Λ_K`.
#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub region_sizes: Vec<usize>,
    /// `‖α_{Λ_j} f - α_{Λ_{j+1}} f‖` for consecutive regions.
    pub successive: Vec<SupEstimate>,
    /// `‖α_{Λ_j} f - α_{Λ_K} f‖` for every `j < K`.
    pub cumulative: Vec<SupEstimate>,
}

pub fn convergence_sweep(
    model: &LatticeModel,
    net: &RegionNet,
    f: &Observable,
    t: f64,
    sampler: &SamplerSpec,
    cfg: &IntegratorConfig,
) -> Result<SweepReport> {
    let plan = plan_over(sampler, net.largest(), f.focus_sites(), model)?;
    let values: Vec<Vec<Complex64>> = net
        .regions()
        .iter()
        .map(|r| plan.values(&alpha(model, r, f, t, cfg)?))
        .collect::<Result<_>>()?;
    let last = values.last().expect("nets are nonempty");
    Ok(SweepReport {
        region_sizes: net.regions().iter().map(|r| r.len()).collect(),
        successive: values
            .windows(2)
            .map(|w| plan.estimate(&deviations(&w[0], &w[1])))
            .collect(),
        cumulative: values[..values.len() - 1]
            .iter()
            .map(|v| plan.estimate(&deviations(v, last)))
            .collect(),
    })
}

/// Measured `‖α_{Λ_K}ᵗ(f) - f‖` next to the Gronwall envelope `ε + L c t e^{t c₁}`.
#[derive(Clone, Debug, Serialize)]
pub struct ContinuityProfile {
    pub times: Vec<f64>,
    pub gaps: Vec<f64>,
    /// `‖α_Λᵗ(f) - f‖` on the inner region, measured on the same samples.
    pub epsilon: Vec<f64>,
    pub envelope: Vec<f64>,
    /// Bound on `‖∇(V_{Λ_K} - V_Λ)‖_∞`.
    pub c: f64,
    /// Lipschitz constant of the vector field on `Λ_K`.
    pub c1: f64,
    /// Bound on `‖∇f‖_∞` converting a flow gap into an observable gap.
    pub grad_f: f64,
    /// Set when `f` has a resolvent core, which only decays along its own direction.
    pub resolvent_warning: bool,
    pub half_width: f64,
    pub grid_points: usize,
    pub random_samples: usize,
    pub seed: u64,
}

/// Strong-continuity profile of `t ↦ α_{Λ_K}ᵗ(f)` for a levee `f` on `lambda`.
///
/// `f` must be a single levee whose core vanishes at infinity, or a constant,
/// and every interaction in `Λ_K` must declare a finite range.
#[allow(clippy::too_many_arguments)]
pub fn strong_continuity_probe(
    model: &LatticeModel,
    f: &Observable,
    lambda: &Region,
    net: &RegionNet,
    t_grid: &[f64],
    sampler: &SamplerSpec,
    cfg: &IntegratorConfig,
) -> Result<ContinuityProfile> {
    let levee = f
        .as_levee()
        .ok_or_else(|| Error::InvalidArgument("strong continuity needs a single levee observable".into()))?;
    let constant = matches!(levee.core, SmoothCore::Constant { .. });
    if !constant && !levee.core.vanishes_at_infinity() {
        return Err(Error::InvalidArgument(format!(
            "core family `{}` does not vanish at infinity",
            levee.core.family()
        )));
    }
    let outer = net.largest();
    check_nested(lambda, outer)?;
    let outer_pairs = model.internal_pairs(outer);
    for p in &outer_pairs {
        if model.potential(*p)?.support_radius().is_none() {
            return Err(Error::InfiniteRange(p.k, p.l));
        }
    }
    let inner_pairs = model.internal_pairs(lambda);
    let boundary: PairSet = outer_pairs.difference(&inner_pairs).copied().collect();
    let c = potential_gradient_bound(model, &boundary);
    let c1 = vector_field_lipschitz(model, outer)?;
    let grad_f = f.grad_bound().unwrap_or(f64::INFINITY);

    let plan = plan_over(sampler, outer, f.focus_sites(), model)?;
    let base = plan.values(f)?;
    let mut gaps = Vec::with_capacity(t_grid.len());
    let mut epsilon = Vec::with_capacity(t_grid.len());
    let mut envelope = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let outer_vals = plan.values(&alpha(model, outer, f, t, cfg)?)?;
        let inner_vals = plan.values(&alpha(model, lambda, f, t, cfg)?)?;
        let gap = plan.estimate(&deviations(&outer_vals, &base)).value;
        let eps = plan.estimate(&deviations(&inner_vals, &base)).value;
        let drift = if c == 0.0 || grad_f == 0.0 {
            0.0
        } else {
            grad_f * c * t.abs() * (t.abs() * c1).exp()
        };
        gaps.push(gap);
        epsilon.push(eps);
        envelope.push(eps + drift);
    }
    Ok(ContinuityProfile {
        times: t_grid.to_vec(),
        gaps,
        epsilon,
        envelope,
        c,
        c1,
        grad_f,
        resolvent_warning: levee.core.contains_resolvent(),
        half_width: plan.half_width,
        grid_points: plan.grid_points,
        random_samples: plan.random_samples,
        seed: plan.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{resolvent, LinearFunctional};
    use crate::PotentialSpec;

    fn chain(len: usize) -> LatticeModel {
        let v = PotentialSpec::poly_bump(1, 0.3, 3.0, 6).unwrap();
        LatticeModel::chain(len, 1.0, 1.0, &v).unwrap()
    }

    fn small_sampler() -> SamplerSpec {
        SamplerSpec {
            grid_per_axis: 5,
            max_grid_points: 200,
            random_samples: 100,
            ..SamplerSpec::default()
        }
    }

    fn gauss_at(s: Site) -> Observable {
        Observable::gaussian(vec![LinearFunctional::p(s, 0), LinearFunctional::q(s, 0)])
    }

    #[test]
    fn nets_must_increase() {
        let a = Region::new([1]).unwrap();
        let b = Region::new([0, 1, 2]).unwrap();
        let net = RegionNet::new(vec![a.clone(), b.clone(), b.clone()]).unwrap();
        assert_eq!(net.strict(), &[true, false]);
        assert!(matches!(RegionNet::new(vec![b, a]), Err(Error::NotNested(0))));
    }

    #[test]
    fn alpha_trivial_cases() {
        let m = chain(3);
        let f = gauss_at(1);
        let cfg = IntegratorConfig::default();
        let w = crate::State::new().with(1, &[0.3], &[0.4]);
        let a0 = alpha(&m, &m.all_sites(), &f, 0.0, &cfg).unwrap();
        assert_eq!(a0.evaluate(&w).unwrap(), f.evaluate(&w).unwrap());
        let one = Observable::constant(Complex64::new(1.0, 0.0));
        assert_eq!(alpha(&m, &m.all_sites(), &one, 0.7, &cfg).unwrap().evaluate(&w).unwrap(), Complex64::new(1.0, 0.0));
        let isolated = alpha(&m, &Region::new([1]).unwrap(), &f, 0.7, &cfg).unwrap();
        assert!(isolated.as_levee().is_some());
    }

    #[test]
    fn gaps_vanish_for_equal_or_decoupled_regions() {
        let m = chain(3);
        let f = gauss_at(0);
        let cfg = IntegratorConfig::default();
        let r = Region::new([0, 1]).unwrap();
        assert_eq!(cauchy_gap(&m, &r, &r, &f, 1.0, &small_sampler(), &cfg).unwrap().value, 0.0);
        let m = LatticeModel::builder(1)
            .site(0, 1.0, 1.0)
            .site(1, 1.0, 2.0)
            .site(2, 1.0, 1.0)
            .interaction(0, 1, PotentialSpec::poly_bump(1, 0.3, 3.0, 6).unwrap())
            .build()
            .unwrap();
        let g = cauchy_gap(&m, &r, &m.all_sites(), &f, 1.0, &small_sampler(), &cfg).unwrap();
        assert!(g.value < 1e-12);
        assert!(cauchy_gap(&m, &m.all_sites(), &r, &f, 1.0, &small_sampler(), &cfg).is_err());
    }

    #[test]
    fn continuity_probe_trivial_cases() {
        let m = chain(5);
        let net = RegionNet::intervals(2, &[0, 1, 2]).unwrap();
        let cfg = IntegratorConfig::strang(1e-2);
        let inner = Region::new([2]).unwrap();
        let one = Observable::constant(Complex64::new(1.0, 0.0));
        let p = strong_continuity_probe(&m, &one, &inner, &net, &[0.0, 0.5], &small_sampler(), &cfg).unwrap();
        assert_eq!(p.gaps, vec![0.0, 0.0]);
        let f = gauss_at(2);
        let p = strong_continuity_probe(&m, &f, &inner, &net, &[0.0, 0.25, 0.5], &small_sampler(), &cfg).unwrap();
        assert_eq!(p.gaps[0], 0.0);
        for (g, e) in p.gaps.iter().zip(&p.envelope) {
            assert!(g <= e);
        }
        let h = resolvent(LinearFunctional::q(2, 0), 1.0).unwrap();
        let p = strong_continuity_probe(&m, &h, &inner, &net, &[0.1], &small_sampler(), &cfg).unwrap();
        assert!(p.resolvent_warning);
    }

    #[test]
    fn continuity_probe_requires_finite_range() {
        let v = PotentialSpec::gaussian(1, 0.2, 1.0).unwrap();
        let m = LatticeModel::chain(3, 1.0, 1.0, &v).unwrap();
        let net = RegionNet::new(vec![m.all_sites()]).unwrap();
        let e = strong_continuity_probe(&m, &gauss_at(1), &Region::new([1]).unwrap(), &net, &[0.1], &small_sampler(), &IntegratorConfig::default());
        assert!(matches!(e, Err(Error::InfiniteRange(0, 1))));
    }
}
