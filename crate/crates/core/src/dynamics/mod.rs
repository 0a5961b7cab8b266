//! Free and interacting Hamiltonian flows and the flow-comparison tools.

mod occupation;
mod rk;
mod splitting;
mod system;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LatticeModel, Pair, PairSet, Region};
use crate::phase_space::{rel_coords, State};

pub use occupation::{estimate_d, occupation_fraction, DEstimate, DSearch, DirectionFamily};
pub(crate) use system::DenseSystem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    StrangSplitting,
    OracleRk,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Splitting step size.
    pub step: f64,
    /// Tolerance of the adaptive reference integrator.
    pub oracle_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::StrangSplitting,
            step: 1e-3,
            oracle_tol: 1e-10,
        }
    }
}

impl IntegratorConfig {
    pub fn strang(step: f64) -> Self {
        IntegratorConfig {
            method: Method::StrangSplitting,
            step,
            ..Default::default()
        }
    }

    pub fn oracle(tol: f64) -> Self {
        IntegratorConfig {
            method: Method::OracleRk,
            oracle_tol: tol,
            ..Default::default()
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.step > 0.0) || !(self.oracle_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step and oracle_tol must be positive, got {} and {}",
                self.step, self.oracle_tol
            )));
        }
        Ok(())
    }
}

/// Closed-form flow of the free Hamiltonian: every site rotates in its own
/// phase plane with frequency `√(ν/m)`.
pub fn free_flow(model: &LatticeModel, state: &State, t: f64) -> Result<State> {
    let mut out = State::new();
    for (s, v) in state.entries() {
        let sp = model.site(s)?;
        let (c, sn) = ((sp.frequency() * t).cos(), (sp.frequency() * t).sin());
        let z = sp.impedance();
        let p: Vec<f64> = v.p.iter().zip(&v.q).map(|(p, q)| -z * q * sn + p * c).collect();
        let q: Vec<f64> = v.p.iter().zip(&v.q).map(|(p, q)| q * c + p / z * sn).collect();
        out.insert(s, &p, &q);
    }
    Ok(out)
}

fn step_count(t: f64, step: f64) -> usize {
    ((t.abs() / step).ceil() as usize).max(1)
}

/// Flow of `H_N = H⁰_Λ + Σ_{kl∈N} V_kl` on region `Λ` for time `t`.
pub fn flow(
    model: &LatticeModel,
    region: &Region,
    pairs: &PairSet,
    state: &State,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<State> {
    flow_with(model, region, pairs, state, t, cfg, true)
}

fn flow_with(
    model: &LatticeModel,
    region: &Region,
    pairs: &PairSet,
    state: &State,
    t: f64,
    cfg: &IntegratorConfig,
    fuse_free: bool,
) -> Result<State> {
    cfg.check()?;
    let mut sys = DenseSystem::new(model, region, pairs)?;
    sys.fuse_free = fuse_free;
    let (mut p, mut q) = state.to_dense(region, model.dim_n())?;
    if t != 0.0 {
        match cfg.method {
            Method::StrangSplitting => {
                let n = step_count(t, cfg.step);
                splitting::strang(&sys, &mut p, &mut q, t / n as f64, n, 0.0, 0, |_, _, _| {})?;
            }
            Method::OracleRk => rk::dopri5(&sys, &mut p, &mut q, t, cfg.oracle_tol)?,
        }
    }
    Ok(State::from_dense(region, model.dim_n(), &p, &q))
}

/// One recorded point of a trajectory.
#[derive(Clone, Debug)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: State,
    pub energy: f64,
}

/// Splitting trajectory recorded every `record_every` steps (plus `t = 0`).
pub fn flow_trajectory(
    model: &LatticeModel,
    region: &Region,
    pairs: &PairSet,
    state: &State,
    t: f64,
    cfg: &IntegratorConfig,
    record_every: usize,
) -> Result<Vec<TrajectoryPoint>> {
    cfg.check()?;
    let sys = DenseSystem::new(model, region, pairs)?;
    let n = model.dim_n();
    let (mut p, mut q) = state.to_dense(region, n)?;
    let mut out = vec![TrajectoryPoint {
        t: 0.0,
        state: State::from_dense(region, n, &p, &q),
        energy: sys.energy(&p, &q),
    }];
    if t == 0.0 {
        return Ok(out);
    }
    let steps = step_count(t, cfg.step);
    let every = record_every.clamp(1, steps);
    let mut last = 0;
    splitting::strang(&sys, &mut p, &mut q, t / steps as f64, steps, 0.0, every, |tt, p, q| {
        last += every;
        out.push(TrajectoryPoint {
            t: tt,
            state: State::from_dense(region, n, p, q),
            energy: sys.energy(p, q),
        });
    })?;
    if last < steps {
        out.push(TrajectoryPoint {
            t,
            state: State::from_dense(region, n, &p, &q),
            energy: sys.energy(&p, &q),
        });
    }
    Ok(out)
}

/// `H_N(ω)`, each interacting pair counted once.
pub fn energy(model: &LatticeModel, region: &Region, pairs: &PairSet, state: &State) -> Result<f64> {
    let sys = DenseSystem::new(model, region, pairs)?;
    let (p, q) = state.to_dense(region, model.dim_n())?;
    Ok(sys.energy(&p, &q))
}

/// `e^{Ct} (gap0 + phi_integral)`, the Gronwall estimate with a pre-discounted
/// forcing integral.
pub fn gronwall_bound(c: f64, gap0: f64, phi_integral: f64, t: f64) -> f64 {
    (c * t).exp() * (gap0 + phi_integral)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowGapReport {
    /// `‖Φᵗ_{H_N}(ω) - Φᵗ_{H_{N∖kl}}(ω)‖`.
    pub gap: f64,
    /// Norm of the relative coordinates of the dropped pair at `t = 0`.
    pub rel_separation: f64,
    /// Free-flow occupation fraction of the dropped pair on `[0, 1]`.
    pub occupation: f64,
    /// Radius used for the occupation fraction.
    pub radius: f64,
}

/// Compares the flow with and without the pair `drop`.
///
/// The occupation radius is the dropped potential's support radius, or 1
/// when it has none.
pub fn flow_gap(
    model: &LatticeModel,
    region: &Region,
    pairs: &PairSet,
    drop: Pair,
    state: &State,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<FlowGapReport> {
    if !pairs.contains(&drop) {
        return Err(Error::InvalidArgument(format!("pair {drop} is not in N")));
    }
    // both flows take identical steps, so the gap only reflects the dropped pair
    let full = flow_with(model, region, pairs, state, t, cfg, false)?;
    let mut reduced_pairs = pairs.clone();
    reduced_pairs.remove(&drop);
    let reduced = flow_with(model, region, &reduced_pairs, state, t, cfg, false)?;
    let (v, x) = rel_coords(state, drop.k, drop.l, model)?;
    let rel_separation = v.iter().chain(x.iter()).map(|a| a * a).sum::<f64>().sqrt();
    let radius = model.potential(drop)?.support_radius().unwrap_or(1.0);
    let occupation = occupation_fraction(model, drop.k, drop.l, state, radius, 10_000)?;
    Ok(FlowGapReport {
        gap: full.distance(&reduced),
        rel_separation,
        occupation,
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialSpec;
    use std::f64::consts::PI;

    fn single(m: f64, nu: f64) -> LatticeModel {
        LatticeModel::builder(1).site(0, m, nu).build().unwrap()
    }

    #[test]
    fn quarter_rotation() {
        let m = single(1.0, 1.0);
        let w = free_flow(&m, &State::new().with(0, &[0.0], &[1.0]), PI / 2.0).unwrap();
        assert!((w.p(0, 0) + 1.0).abs() < 1e-15);
        assert!(w.q(0, 0).abs() < 1e-15);
    }

    #[test]
    fn full_period_returns() {
        let m = single(1.0, 4.0);
        let w0 = State::new().with(0, &[0.3], &[-1.2]);
        let w = free_flow(&m, &w0, PI).unwrap();
        assert!(w.distance(&w0) < 1e-14);
    }

    #[test]
    fn single_site_energy() {
        let m = single(2.0, 8.0);
        let r = m.all_sites();
        let e = energy(&m, &r, &PairSet::new(), &State::new().with(0, &[2.0], &[1.0])).unwrap();
        assert_eq!(e, 5.0);
        assert_eq!(energy(&m, &r, &PairSet::new(), &State::new()).unwrap(), 0.0);
    }

    #[test]
    fn empty_pair_set_is_free_flow() {
        let m = LatticeModel::builder(2)
            .site(0, 1.0, 2.0)
            .site(1, 0.5, 3.0)
            .build()
            .unwrap();
        let w0 = State::new().with(0, &[0.1, 0.2], &[0.3, -0.4]).with(1, &[1.0, 0.0], &[0.0, 1.0]);
        let a = flow(&m, &m.all_sites(), &PairSet::new(), &w0, 3.7, &IntegratorConfig::default()).unwrap();
        let b = free_flow(&m, &w0, 3.7).unwrap();
        assert!(a.distance(&b) < 1e-14);
    }

    #[test]
    fn oracle_matches_free_flow() {
        let m = single(0.7, 1.3);
        let w0 = State::new().with(0, &[0.4], &[0.9]);
        let a = flow(&m, &m.all_sites(), &PairSet::new(), &w0, 2.0, &IntegratorConfig::oracle(1e-12)).unwrap();
        let b = free_flow(&m, &w0, 2.0).unwrap();
        assert!(a.distance(&b) < 1e-9);
    }

    #[test]
    fn pairs_outside_region_are_rejected() {
        let v = PotentialSpec::poly_bump(1, 0.2, 1.0, 3).unwrap();
        let m = LatticeModel::chain(3, 1.0, 1.0, &v).unwrap();
        let pairs: PairSet = [Pair::new(1, 2).unwrap()].into();
        let r = Region::range(0, 1);
        let e = flow(&m, &r, &pairs, &State::new(), 1.0, &IntegratorConfig::default()).unwrap_err();
        assert!(matches!(e, Error::PairOutsideRegion(1, 2)));
    }

    #[test]
    fn zero_potential_gives_zero_gap() {
        let m = LatticeModel::builder(1)
            .site(0, 1.0, 1.0)
            .site(1, 1.0, 1.0)
            .interaction(0, 1, PotentialSpec::zero(1))
            .build()
            .unwrap();
        let pairs: PairSet = [Pair::new(0, 1).unwrap()].into();
        let w = State::new().with(0, &[0.3], &[0.1]).with(1, &[0.0], &[0.2]);
        let r = flow_gap(&m, &m.all_sites(), &pairs, Pair::new(0, 1).unwrap(), &w, 2.0, &IntegratorConfig::default())
            .unwrap();
        assert_eq!(r.gap, 0.0);
        let r0 = flow_gap(&m, &m.all_sites(), &pairs, Pair::new(0, 1).unwrap(), &w, 0.0, &IntegratorConfig::default())
            .unwrap();
        assert_eq!(r0.gap, 0.0);
    }

    #[test]
    fn gronwall_arithmetic() {
        assert_eq!(gronwall_bound(2.0, 0.0, 0.0, 1.0), 0.0);
        assert_eq!(gronwall_bound(0.0, 0.25, 0.5, 3.0), 0.75);
    }

    #[test]
    fn trajectory_records_endpoints() {
        let v = PotentialSpec::poly_bump(1, 0.3, 2.0, 4).unwrap();
        let m = LatticeModel::chain(2, 1.0, 1.0, &v).unwrap();
        let pairs = m.internal_pairs(&m.all_sites());
        let w = State::new().with(0, &[0.5], &[0.0]).with(1, &[0.0], &[0.3]);
        let cfg = IntegratorConfig::strang(0.01);
        let tr = flow_trajectory(&m, &m.all_sites(), &pairs, &w, 1.0, &cfg, 30).unwrap();
        assert_eq!(tr.first().unwrap().t, 0.0);
        assert!((tr.last().unwrap().t - 1.0).abs() < 1e-12);
        let end = flow(&m, &m.all_sites(), &pairs, &w, 1.0, &cfg).unwrap();
        assert!(tr.last().unwrap().state.distance(&end) < 1e-15);
    }
}
