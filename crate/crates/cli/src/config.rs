//! JSON configuration files: experiment specs, models, observables and states.

use std::path::{Path, PathBuf};

use latflow_core::dynamics::IntegratorConfig;
use latflow_core::model::{mollify, MollifyGrid};
use latflow_core::observables::{FunctionalTerm, LinearFunctional, Observable, SamplerSpec, SmoothCore};
use latflow_core::{LatticeModel, Pair, PairSet, PotentialSpec, Region, Site, State};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::value::RawValue;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Kind {
    Validate,
    Simulate,
    Occupation,
    FlowGap,
    #[serde(rename = "estimate_D")]
    #[value(name = "estimate_D")]
    EstimateD,
    DysonCompare,
    ThermoSweep,
    Continuity,
    MollifyStudy,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Validate => "validate",
            Kind::Simulate => "simulate",
            Kind::Occupation => "occupation",
            Kind::FlowGap => "flow_gap",
            Kind::EstimateD => "estimate_D",
            Kind::DysonCompare => "dyson_compare",
            Kind::ThermoSweep => "thermo_sweep",
            Kind::Continuity => "continuity",
            Kind::MollifyStudy => "mollify_study",
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec<'a> {
    kind: Kind,
    model_ref: Option<PathBuf>,
    #[serde(borrow)]
    params: &'a RawValue,
    output: Option<PathBuf>,
    #[serde(default)]
    seed: u64,
}

/// A parsed experiment file. `params` stays raw until the kind is known.
pub struct ExperimentSpec {
    pub kind: Kind,
    pub model_ref: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub path: PathBuf,
    pub text: String,
    params_offset: usize,
    params_len: usize,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_error(path: &Path, text: &str, e: &serde_json::Error, base: usize) -> CliError {
    // serde_json reports positions relative to the parsed slice
    let (line, column) = if base == 0 {
        (e.line(), e.column())
    } else {
        let (bl, bc) = line_col(text, base);
        if e.line() <= 1 {
            (bl, bc + e.column().saturating_sub(1))
        } else {
            (bl + e.line() - 1, e.column())
        }
    };
    let message = e.to_string();
    let message = match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message,
    };
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Parses a whole JSON file, reporting errors with line and column.
pub fn parse_file<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, &text, &e, 0))
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read_text(path)?;
        let raw: RawSpec = serde_json::from_str(&text).map_err(|e| parse_error(path, &text, &e, 0))?;
        let params_offset = raw.params.get().as_ptr() as usize - text.as_ptr() as usize;
        let params_len = raw.params.get().len();
        Ok(ExperimentSpec {
            kind: raw.kind,
            model_ref: raw.model_ref,
            output: raw.output,
            seed: raw.seed,
            path: path.to_path_buf(),
            params_offset,
            params_len,
            text,
        })
    }

    /// Kind-specific parameters, with errors located in the spec file.
    pub fn params<T: DeserializeOwned>(&self) -> CliResult<T> {
        let slice = &self.text[self.params_offset..self.params_offset + self.params_len];
        serde_json::from_str(slice).map_err(|e| parse_error(&self.path, &self.text, &e, self.params_offset))
    }

    /// Resolves a path given in the spec relative to the spec's directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::from_str(&self.text).unwrap_or(serde_json::Value::Null)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    PolyBump {
        amplitude: f64,
        radius: f64,
        exponent: u32,
        #[serde(default)]
        offset: Option<Vec<f64>>,
    },
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        offset: Option<Vec<f64>>,
    },
    Mollified {
        base: Box<PotentialConfig>,
        m: u32,
        spacing: f64,
        #[serde(default)]
        half_extent: Option<f64>,
    },
}

impl PotentialConfig {
    pub fn build(&self, dim: usize) -> CliResult<PotentialSpec> {
        let shift = |v: PotentialSpec, offset: &Option<Vec<f64>>| match offset {
            Some(o) => v.shifted(o),
            None => Ok(v),
        };
        Ok(match self {
            PotentialConfig::Zero => PotentialSpec::zero(dim),
            PotentialConfig::PolyBump {
                amplitude,
                radius,
                exponent,
                offset,
            } => shift(PotentialSpec::poly_bump(dim, *amplitude, *radius, *exponent)?, offset)?,
            PotentialConfig::Gaussian {
                amplitude,
                width,
                offset,
            } => shift(PotentialSpec::gaussian(dim, *amplitude, *width)?, offset)?,
            PotentialConfig::Mollified {
                base,
                m,
                spacing,
                half_extent,
            } => mollify(
                &base.build(dim)?,
                *m,
                &MollifyGrid {
                    spacing: *spacing,
                    half_extent: *half_extent,
                },
            )?,
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    pub id: Site,
    pub mass: f64,
    pub nu: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    pub k: Site,
    pub l: Site,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub grad_sup: Option<f64>,
    #[serde(default)]
    pub grad_lipschitz: Option<f64>,
    #[serde(default)]
    pub support_radius: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim_n: usize,
    pub sites: Vec<SiteConfig>,
    #[serde(default)]
    pub interactions: Vec<InteractionConfig>,
    #[serde(default, rename = "global_C")]
    pub global_c: Option<f64>,
}

impl ModelConfig {
    pub fn build(&self) -> CliResult<LatticeModel> {
        let mut b = LatticeModel::builder(self.dim_n);
        for s in &self.sites {
            b = b.site(s.id, s.mass, s.nu);
        }
        for i in &self.interactions {
            let mut v = i.potential.build(self.dim_n)?;
            if let Some(g) = i.grad_sup {
                v = v.with_grad_sup(g);
            }
            if let Some(g) = i.grad_lipschitz {
                v = v.with_grad_lipschitz(g);
            }
            if let Some(r) = i.support_radius {
                v = v.with_support_radius(r);
            }
            b = b.interaction(i.k, i.l, v);
        }
        if let Some(c) = self.global_c {
            b = b.global_c(c);
        }
        Ok(b.build()?)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoreConfig {
    Gaussian,
    PolyGaussian { terms: Vec<PolyTerm> },
    Resolvent { lambda: f64 },
    Constant { value: [f64; 2] },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub coeff: [f64; 2],
    pub exponents: Vec<u32>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    #[serde(default)]
    pub projection: Vec<Vec<FunctionalTerm>>,
    pub core: CoreConfig,
}

impl ObservableConfig {
    pub fn build(&self) -> CliResult<Observable> {
        let projection: Vec<LinearFunctional> =
            self.projection.iter().map(|f| LinearFunctional::from_terms(f)).collect();
        let arity = projection.len();
        let core = match &self.core {
            CoreConfig::Gaussian => SmoothCore::Gaussian { arity },
            CoreConfig::PolyGaussian { terms } => SmoothCore::PolyGaussian {
                arity,
                terms: terms
                    .iter()
                    .map(|t| (Complex64::new(t.coeff[0], t.coeff[1]), t.exponents.clone()))
                    .collect(),
            },
            CoreConfig::Resolvent { lambda } => {
                let mut it = projection.into_iter();
                let x = match (it.next(), it.next()) {
                    (Some(x), None) => x,
                    _ => return Err(CliError::Validation("a resolvent takes exactly one functional".into())),
                };
                return Ok(latflow_core::observables::resolvent(x, *lambda)?);
            }
            CoreConfig::Constant { value } => SmoothCore::Constant {
                value: Complex64::new(value[0], value[1]),
            },
        };
        Ok(Observable::levee(projection, core)?)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteState {
    pub site: Site,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

pub fn build_state(entries: &[SiteState], model: &LatticeModel) -> CliResult<State> {
    let mut w = State::new();
    for e in entries {
        model.site(e.site)?;
        for v in [&e.p, &e.q] {
            if v.len() != model.dim_n() {
                return Err(latflow_core::Error::DimensionMismatch {
                    expected: model.dim_n(),
                    got: v.len(),
                }
                .into());
            }
        }
        w.insert(e.site, &e.p, &e.q);
    }
    Ok(w)
}

/// Interacting pairs: `"all"` internal pairs, `"none"`, or an explicit list.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum PairsConfig {
    Named(String),
    List(Vec<[Site; 2]>),
}

impl Default for PairsConfig {
    fn default() -> Self {
        PairsConfig::Named("all".into())
    }
}

impl PairsConfig {
    pub fn build(&self, model: &LatticeModel, region: &Region) -> CliResult<PairSet> {
        match self {
            PairsConfig::Named(n) if n == "all" => Ok(model.internal_pairs(region)),
            PairsConfig::Named(n) if n == "none" => Ok(PairSet::new()),
            PairsConfig::Named(n) => Err(CliError::Validation(format!(
                "pairs must be \"all\", \"none\" or a list, got \"{n}\""
            ))),
            PairsConfig::List(list) => {
                let pairs: PairSet = list.iter().map(|[a, b]| Pair::new(*a, *b)).collect::<Result<_, _>>()?;
                model.check_pairs(region, &pairs)?;
                Ok(pairs)
            }
        }
    }
}

/// A list of sites, or every site of the model when absent.
pub fn build_region(sites: &Option<Vec<Site>>, model: &LatticeModel) -> CliResult<Region> {
    let region = match sites {
        Some(s) => Region::new(s.iter().copied())?,
        None => model.all_sites(),
    };
    if region.is_empty() {
        return Err(latflow_core::Error::EmptyRegion.into());
    }
    model.check_region(&region)?;
    Ok(region)
}

pub fn sampler_with_seed(s: &Option<SamplerSpec>, seed: u64) -> SamplerSpec {
    let mut out = s.clone().unwrap_or_default();
    out.seed = seed;
    out
}

pub fn integrator(c: &Option<IntegratorConfig>) -> IntegratorConfig {
    c.unwrap_or_default()
}
