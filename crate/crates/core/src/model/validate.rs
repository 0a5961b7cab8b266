//! Sampling-based checks of the standing assumptions on a model.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LatticeModel, Pair, PotentialSpec, Region};
use crate::error::{Error, Result};
use crate::par;

/// Sampling parameters for [`validate_assumptions`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleSpec {
    /// Half-width of the sampling box for potentials without compact support.
    pub half_width: f64,
    /// Samples per pair.
    pub samples: usize,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            half_width: 6.0,
            samples: 10_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// `V_kl(x) = V_lk(-x)`.
    PairSymmetry,
    /// `V_kl ∈ C¹₀` with `‖∇V_kl‖_∞ ≤ grad_sup`.
    BoundedGradient,
    /// `∇V_kl` Lipschitz with the declared constant.
    LipschitzGradient,
    /// `sup_k Σ_l ‖∇V_kl‖_∞ ≤ global_C`.
    Summability,
    /// `sup_k max(m_k ν_k, 1/(m_k ν_k)) < ∞`.
    UniformFrequencies,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::PairSymmetry => "(i) pair symmetry",
            Condition::BoundedGradient => "(ii) bounded gradient, vanishing at infinity",
            Condition::LipschitzGradient => "(iii) Lipschitz gradient",
            Condition::Summability => "(iv) summable gradients",
            Condition::UniformFrequencies => "(v) uniform mass-frequency bounds",
        };
        f.write_str(s)
    }
}

/// A point at which a condition was found to fail, or its worst case.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Witness {
    pub pair: Option<Pair>,
    pub site: Option<usize>,
    pub point: Vec<f64>,
    pub observed: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition: Condition,
    pub passed: bool,
    pub detail: String,
    /// Worst observed case (failing point when `passed` is false).
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub conditions: Vec<ConditionResult>,
    pub notes: Vec<String>,
    pub samples_per_pair: usize,
    pub seed: u64,
    pub half_width: f64,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn get(&self, c: Condition) -> Option<&ConditionResult> {
        self.conditions.iter().find(|r| r.condition == c)
    }
}

const SYMMETRY_TOL: f64 = 1e-12;
const DECAY_RATIO: f64 = 1e-3;

struct PairCheck {
    pair: Pair,
    symmetry: Witness,
    gradient: Witness,
    decay_ok: bool,
    decay: Witness,
    lipschitz: Witness,
}

fn sample_box(v: &PotentialSpec, half_width: f64) -> (Vec<f64>, f64) {
    match v.support_radius() {
        Some(r) => (v.support_center().to_vec(), r * 1.1),
        None => (vec![0.0; v.dim()], half_width),
    }
}

fn check_pair(
    pair: Pair,
    forward: &PotentialSpec,
    reverse: &PotentialSpec,
    spec: &SampleSpec,
    seed: u64,
) -> Result<PairCheck> {
    let grad_sup = forward
        .grad_sup()
        .ok_or(Error::MissingConstant(pair.k, pair.l, "grad_sup"))?;
    let lip = forward
        .grad_lipschitz()
        .ok_or(Error::MissingConstant(pair.k, pair.l, "grad_lipschitz"))?;
    let n = forward.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (center, half) = sample_box(forward, spec.half_width);

    let empty = |bound| Witness {
        pair: Some(pair),
        site: None,
        point: Vec::new(),
        observed: 0.0,
        bound,
    };
    let mut sym = empty(SYMMETRY_TOL);
    let mut grad = empty(grad_sup);
    let mut lipw = empty(lip);
    let mut global_max = 0.0f64;
    let mut shell_max = 0.0f64;
    let mut shell_point = Vec::new();
    let mut outside_max = 0.0f64;

    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut neg = vec![0.0; n];
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    for i in 0..spec.samples {
        for d in 0..n {
            x[d] = center[d] + rng.gen_range(-half..=half);
            neg[d] = -x[d];
        }
        let v = forward.eval(&x);
        let diff = (v - reverse.eval(&neg)).abs();
        if diff > sym.observed {
            sym.observed = diff;
            sym.point = x.clone();
        }

        forward.grad(&x, &mut gx);
        let gn = norm(&gx);
        if gn > grad.observed {
            grad.observed = gn;
            grad.point = x.clone();
        }

        // alternate nearby and far partners for the Lipschitz quotient
        let scale = if i % 2 == 0 { 1e-3 * half } else { half };
        for d in 0..n {
            y[d] = x[d] + rng.gen_range(-scale..=scale);
        }
        forward.grad(&y, &mut gy);
        let dxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dxy > 0.0 {
            let dg: f64 = gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let q = dg / dxy;
            if q > lipw.observed {
                lipw.observed = q;
                lipw.point = x.clone();
            }
        }

        let dist: f64 = x
            .iter()
            .zip(&center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            .sqrt();
        global_max = global_max.max(v.abs());
        match forward.support_radius() {
            Some(r) if dist > r => outside_max = outside_max.max(v.abs()),
            Some(_) => {}
            None if dist >= 0.9 * half => {
                if v.abs() > shell_max {
                    shell_max = v.abs();
                    shell_point = x.clone();
                }
            }
            None => {}
        }
    }

    let (decay_ok, decay) = if forward.support_radius().is_some() {
        (
            outside_max == 0.0,
            Witness {
                pair: Some(pair),
                site: None,
                point: Vec::new(),
                observed: outside_max,
                bound: 0.0,
            },
        )
    } else {
        let bound = (DECAY_RATIO * global_max).max(1e-12);
        (
            shell_max <= bound,
            Witness {
                pair: Some(pair),
                site: None,
                point: shell_point,
                observed: shell_max,
                bound,
            },
        )
    };

    Ok(PairCheck {
        pair,
        symmetry: sym,
        gradient: grad,
        decay_ok,
        decay,
        lipschitz: lipw,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Checks the five standing assumptions on the part of `model` inside `region`.
///
/// Conditions on potentials are tested by sampling each internal pair in
/// its support box (or in `[-half_width, half_width]ⁿ` when the support is
/// not compact). Decay at infinity is only observable inside the box; the
/// report notes this.
pub fn validate_assumptions(
    model: &LatticeModel,
    region: &Region,
    spec: &SampleSpec,
) -> Result<ValidationReport> {
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    model.check_region(region)?;
    let pairs: Vec<Pair> = model.internal_pairs(region).into_iter().collect();

    for p in &pairs {
        let v = model.potential(*p)?;
        if v.grad_sup().is_none() {
            return Err(Error::MissingConstant(p.k, p.l, "grad_sup"));
        }
        if v.grad_lipschitz().is_none() {
            return Err(Error::MissingConstant(p.k, p.l, "grad_lipschitz"));
        }
    }

    let checks = par::map_indexed(pairs.len(), |i| {
        let p = pairs[i];
        let inter = model.interaction(p).expect("internal pair has an interaction");
        // the reverse view is V_lk as a function of q_l - q_k
        let reverse = match &inter.reverse {
            Some(r) => r.reflected(),
            None => inter.forward.reflected(),
        };
        let seed = spec
            .seed
            .wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        check_pair(p, &inter.forward, &reverse, spec, seed)
    });
    let checks: Vec<PairCheck> = checks.into_iter().collect::<Result<_>>()?;

    let mut conditions = Vec::new();
    let mut notes = Vec::new();

    let worst = |f: &dyn Fn(&PairCheck) -> &Witness, pass: &dyn Fn(&Witness) -> bool| {
        let mut failing = checks.iter().map(f).find(|w| !pass(w)).cloned();
        let passed = failing.is_none();
        if failing.is_none() {
            failing = checks
                .iter()
                .map(f)
                .max_by(|a, b| (a.observed - a.bound).total_cmp(&(b.observed - b.bound)))
                .cloned();
        }
        (passed, failing)
    };

    let (passed, witness) = worst(&|c| &c.symmetry, &|w| w.observed <= w.bound);
    let explicit = pairs
        .iter()
        .filter(|p| model.interaction(**p).is_some_and(|i| i.reverse.is_some()))
        .count();
    conditions.push(ConditionResult {
        condition: Condition::PairSymmetry,
        passed,
        detail: format!(
            "{} pairs sampled ({explicit} with an explicit reverse declaration)",
            pairs.len()
        ),
        witness,
    });

    let grad_ok = |w: &Witness| w.observed <= w.bound * (1.0 + 1e-9) + 1e-15;
    let (gpass, gwit) = worst(&|c| &c.gradient, &grad_ok);
    let decay_pass = checks.iter().all(|c| c.decay_ok);
    let decay_wit = checks.iter().find(|c| !c.decay_ok).map(|c| c.decay.clone());
    let passed = gpass && decay_pass;
    conditions.push(ConditionResult {
        condition: Condition::BoundedGradient,
        passed,
        detail: if decay_pass {
            "sampled gradient norms within declared grad_sup; decay observed inside the sampling box".into()
        } else {
            "potential does not decay inside the sampling box".into()
        },
        witness: if gpass { decay_wit.or(gwit) } else { gwit },
    });
    if checks.iter().any(|c| model.potential(c.pair).map_or(false, |v| v.support_radius().is_none())) {
        notes.push(format!(
            "decay at infinity is only checked inside [-{0}, {0}]^n for non-compact potentials",
            spec.half_width
        ));
    }

    let (passed, witness) = worst(&|c| &c.lipschitz, &grad_ok);
    conditions.push(ConditionResult {
        condition: Condition::LipschitzGradient,
        passed,
        detail: "sampled gradient difference quotients within declared grad_lipschitz".into(),
        witness,
    });

    let global_c = model.global_c();
    let mut row_witness: Option<Witness> = None;
    for k in region.iter() {
        let row = model.grad_row_sum(k, |l| region.contains(l));
        let w = Witness {
            pair: None,
            site: Some(k),
            point: Vec::new(),
            observed: row,
            bound: global_c,
        };
        let replace = match &row_witness {
            None => true,
            Some(b) => row > b.observed,
        };
        if replace {
            row_witness = Some(w);
        }
    }
    let passed = row_witness
        .as_ref()
        .is_none_or(|w| w.observed <= global_c * (1.0 + 1e-12));
    conditions.push(ConditionResult {
        condition: Condition::Summability,
        passed,
        detail: format!("largest row sum of declared grad_sup against global_C = {global_c}"),
        witness: row_witness,
    });

    let mut freq_witness: Option<Witness> = None;
    for k in region.iter() {
        let p = model.site(k)?;
        let mn = p.mass * p.nu;
        let v = mn.max(1.0 / mn);
        if freq_witness.as_ref().is_none_or(|w| v > w.observed) {
            freq_witness = Some(Witness {
                pair: None,
                site: Some(k),
                point: Vec::new(),
                observed: v,
                bound: f64::INFINITY,
            });
        }
    }
    let passed = freq_witness.as_ref().is_some_and(|w| w.observed.is_finite());
    conditions.push(ConditionResult {
        condition: Condition::UniformFrequencies,
        passed,
        detail: "max over region of max(m ν, 1/(m ν))".into(),
        witness: freq_witness,
    });

    Ok(ValidationReport {
        conditions,
        notes,
        samples_per_pair: spec.samples,
        seed: spec.seed,
        half_width: spec.half_width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SampleSpec {
        SampleSpec {
            half_width: 4.0,
            samples: 2_000,
            seed: 7,
        }
    }

    #[test]
    fn chain_with_tight_global_constant_fails_summability() {
        let bond = PotentialSpec::poly_bump(1, 0.1, 1.0, 3).unwrap().with_grad_sup(0.3);
        let m = LatticeModel::builder(1)
            .site(0, 1.0, 1.0)
            .site(1, 1.0, 1.0)
            .site(2, 1.0, 1.0)
            .interaction(0, 1, bond.clone())
            .interaction(1, 2, bond)
            .global_c(0.5)
            .build()
            .unwrap();
        let r = validate_assumptions(&m, &m.all_sites(), &spec()).unwrap();
        let iv = r.get(Condition::Summability).unwrap();
        assert!(!iv.passed);
        let w = iv.witness.as_ref().unwrap();
        assert_eq!(w.site, Some(1));
        assert!((w.observed - 0.6).abs() < 1e-15);
    }

    #[test]
    fn shifted_pairs_satisfy_symmetry() {
        let base = PotentialSpec::gaussian(2, 1.0, 0.7).unwrap();
        let m = LatticeModel::builder(2)
            .site(0, 1.0, 1.0)
            .site(1, 2.0, 0.5)
            .interaction(0, 1, base.shifted(&[0.4, -0.3]).unwrap())
            .interaction(1, 0, base.shifted(&[-0.4, 0.3]).unwrap())
            .global_c(1.0)
            .build()
            .unwrap();
        let r = validate_assumptions(&m, &m.all_sites(), &spec()).unwrap();
        assert!(r.all_passed(), "{r:#?}");
        assert!(!r.notes.is_empty());
    }

    #[test]
    fn mismatched_reverse_is_caught() {
        let base = PotentialSpec::gaussian(1, 1.0, 0.7).unwrap();
        let m = LatticeModel::builder(1)
            .site(0, 1.0, 1.0)
            .site(1, 1.0, 1.0)
            .interaction(0, 1, base.shifted(&[0.4]).unwrap())
            .interaction(1, 0, base.shifted(&[0.4]).unwrap())
            .global_c(1.0)
            .build()
            .unwrap();
        let r = validate_assumptions(&m, &m.all_sites(), &spec()).unwrap();
        assert!(!r.get(Condition::PairSymmetry).unwrap().passed);
    }

    #[test]
    fn understated_constants_fail() {
        let v = PotentialSpec::poly_bump(1, 1.0, 1.0, 2)
            .unwrap()
            .with_grad_sup(0.5)
            .with_grad_lipschitz(1.0);
        let m = LatticeModel::builder(1)
            .site(0, 1.0, 1.0)
            .site(1, 1.0, 1.0)
            .interaction(0, 1, v)
            .global_c(1.0)
            .build()
            .unwrap();
        let r = validate_assumptions(&m, &m.all_sites(), &spec()).unwrap();
        assert!(!r.get(Condition::BoundedGradient).unwrap().passed);
        assert!(!r.get(Condition::LipschitzGradient).unwrap().passed);
    }

    #[test]
    fn empty_region_and_missing_constants_are_errors() {
        let m = LatticeModel::builder(1).site(0, 1.0, 1.0).build().unwrap();
        assert!(matches!(
            validate_assumptions(&m, &Region::empty(), &spec()),
            Err(Error::EmptyRegion)
        ));
        let v = PotentialSpec::custom(1, "quadratic_well", |x| -x[0] * x[0], |x, g| g[0] = -2.0 * x[0]);
        let m = LatticeModel::builder(1)
            .site(0, 1.0, 1.0)
            .site(3, 1.0, 1.0)
            .interaction(0, 3, v)
            .build()
            .unwrap();
        let e = validate_assumptions(&m, &m.all_sites(), &spec()).unwrap_err();
        assert!(matches!(e, Error::MissingConstant(0, 3, "grad_sup")));
    }
}
