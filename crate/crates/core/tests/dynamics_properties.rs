use latflow_core::dynamics::{energy, flow, flow_gap, free_flow, gronwall_bound, IntegratorConfig};
use latflow_core::model::vector_field_lipschitz;
use latflow_core::phase_space::{partition_components, project_st};
use latflow_core::{LatticeModel, Pair, PotentialSpec, State};
use proptest::prelude::*;

fn bump() -> PotentialSpec {
    PotentialSpec::poly_bump(1, 0.3, 3.0, 6).unwrap()
}

fn pair_model(m1: f64, nu1: f64) -> LatticeModel {
    LatticeModel::builder(1)
        .site(0, 1.0, 1.0)
        .site(1, m1, nu1)
        .interaction(0, 1, bump())
        .build()
        .unwrap()
}

fn two_site_state(c: &[f64]) -> State {
    State::new().with(0, &[c[0]], &[c[1]]).with(1, &[c[2]], &[c[3]])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn free_flow_composes(
        m in 0.25f64..4.0, nu in 0.25f64..4.0,
        c in prop::collection::vec(-3.0f64..3.0, 6),
        s in -5.0f64..5.0, t in -5.0f64..5.0,
    ) {
        let model = LatticeModel::builder(3).site(7, m, nu).build().unwrap();
        let w = State::new().with(7, &c[..3], &c[3..]);
        let a = free_flow(&model, &free_flow(&model, &w, s).unwrap(), t).unwrap();
        let b = free_flow(&model, &w, s + t).unwrap();
        prop_assert!(a.distance(&b) <= 1e-12);
    }

    #[test]
    fn splitting_is_reversible(
        m1 in 0.5f64..2.0, nu1 in 0.5f64..2.0,
        c in prop::collection::vec(-1.5f64..1.5, 4),
        t in 0.1f64..2.0,
    ) {
        let model = pair_model(m1, nu1);
        let region = model.all_sites();
        let pairs = model.internal_pairs(&region);
        let step = 1e-2;
        let cfg = IntegratorConfig::strang(step);
        let w = two_site_state(&c);
        let back = flow(&model, &region, &pairs, &flow(&model, &region, &pairs, &w, t, &cfg).unwrap(), -t, &cfg).unwrap();
        prop_assert!(back.distance(&w) <= 10.0 * step * step * t);
    }

    #[test]
    fn energy_error_is_second_order(c in prop::collection::vec(-1.5f64..1.5, 4)) {
        let model = pair_model(1.3, 0.7);
        let region = model.all_sites();
        let pairs = model.internal_pairs(&region);
        let w = two_site_state(&c);
        let e0 = energy(&model, &region, &pairs, &w).unwrap();
        let err = |h: f64| {
            let end = flow(&model, &region, &pairs, &w, 10.0, &IntegratorConfig::strang(h)).unwrap();
            (energy(&model, &region, &pairs, &end).unwrap() - e0).abs()
        };
        let (coarse, fine) = (err(0.04), err(0.02));
        // states whose energy error is already at rounding level carry no order information
        prop_assume!(coarse > 1e-11);
        prop_assert!(coarse / fine >= 3.0, "{} vs {}", coarse, fine);
    }

    #[test]
    fn centre_of_mass_and_relative_parts_intertwine(c in prop::collection::vec(-2.0f64..2.0, 6)) {
        let model = LatticeModel::builder(1)
            .site(0, 1.0, 2.0).site(1, 2.0, 4.0).site(2, 0.5, 1.0)
            .interaction(0, 1, bump()).interaction(1, 2, bump())
            .build().unwrap();
        let region = model.all_sites();
        let pairs = model.internal_pairs(&region);
        let part = partition_components(&model, &region, &pairs).unwrap();
        let cfg = IntegratorConfig::strang(1e-2);
        let w = State::new().with(0, &[c[0]], &[c[1]]).with(1, &[c[2]], &[c[3]]).with(2, &[c[4]], &[c[5]]);
        let moved = flow(&model, &region, &pairs, &w, 1.0, &cfg).unwrap();
        let (s0, t0) = project_st(&w, &part, &model).unwrap();
        let (s1, t1) = project_st(&moved, &part, &model).unwrap();
        prop_assert!(t1.distance(&free_flow(&model, &t0, 1.0).unwrap()) <= 1e-10);
        prop_assert!(s1.distance(&flow(&model, &region, &pairs, &s0, 1.0, &cfg).unwrap()) <= 1e-10);
    }

    #[test]
    fn dropped_pair_gap_obeys_gronwall(c in prop::collection::vec(-3.0f64..3.0, 4)) {
        let model = pair_model(1.0, 1.0);
        let region = model.all_sites();
        let pairs = model.internal_pairs(&region);
        let w = two_site_state(&c);
        let report = flow_gap(&model, &region, &pairs, Pair::new(0, 1).unwrap(), &w, 1.0, &IntegratorConfig::strang(1e-3)).unwrap();
        // the reduced flow is free, so the forcing is √2 |V'| while the free pair sits in the support
        let forcing = 2f64.sqrt() * bump().grad_sup().unwrap() * report.occupation;
        let lip = vector_field_lipschitz(&model, &region).unwrap();
        prop_assert!(report.gap <= gronwall_bound(lip, 0.0, forcing, 1.0) * (1.0 + 1e-3) + 1e-9);
    }
}

#[test]
fn oracle_and_splitting_agree_on_a_longer_chain() {
    let model = LatticeModel::chain(6, 1.0, 1.5, &bump()).unwrap();
    let region = model.all_sites();
    let pairs = model.internal_pairs(&region);
    let mut w = State::new();
    for s in 0..6 {
        w.insert(s, &[0.2 * s as f64 - 0.5], &[0.3 * (s as f64).sin()]);
    }
    let a = flow(&model, &region, &pairs, &w, 2.0, &IntegratorConfig::strang(2e-4)).unwrap();
    let b = flow(&model, &region, &pairs, &w, 2.0, &IntegratorConfig::oracle(1e-11)).unwrap();
    assert!(a.distance(&b) < 1e-6);
}
