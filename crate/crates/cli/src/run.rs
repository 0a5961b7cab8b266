//! One function per experiment kind.

use latflow_core::dynamics::{
    estimate_d, flow, flow_gap, flow_trajectory, free_flow, occupation_fraction, DSearch, IntegratorConfig, Method,
};
use latflow_core::dyson::{dyson_radius, gamma_direct, gamma_truncated, tail_bound, DysonConfig};
use latflow_core::model::{mollify, validate_assumptions, MollifyGrid, SampleSpec, ValidationReport};
use latflow_core::observables::{Evaluate, SamplePlan, SamplerSpec};
use latflow_core::thermo::{convergence_sweep, strong_continuity_probe, RegionNet};
use latflow_core::{LatticeModel, Pair, Region, Site, State};
use serde::{Deserialize, Serialize};

use crate::config::{
    build_region, build_state, integrator, parse_file, sampler_with_seed, ExperimentSpec, Kind, ModelConfig,
    ObservableConfig, PairsConfig, PotentialConfig, SiteState,
};
use crate::error::{CliError, CliResult};
use crate::output::{num, OutDir, Table};

/// Everything a kind needs besides its own parameters.
pub struct Context<'a> {
    pub spec: &'a ExperimentSpec,
    pub model: Option<LatticeModel>,
    pub out: OutDir,
}

impl Context<'_> {
    fn model(&self) -> CliResult<&LatticeModel> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Validation(format!("`{}` needs a model_ref", self.spec.kind.name())))
    }
}

pub fn load_model(spec: &ExperimentSpec) -> CliResult<Option<LatticeModel>> {
    match &spec.model_ref {
        Some(p) => {
            let cfg: ModelConfig = parse_file(&spec.resolve(p))?;
            Ok(Some(cfg.build()?))
        }
        None => Ok(None),
    }
}

pub fn dispatch(ctx: &mut Context) -> CliResult<()> {
    if ctx.spec.kind != Kind::Validate {
        if let Some(model) = &ctx.model {
            let spec = SampleSpec {
                seed: ctx.spec.seed,
                ..SampleSpec::default()
            };
            let report = validate_assumptions(model, &model.all_sites(), &spec)?;
            require_passed(&report)?;
        }
    }
    match ctx.spec.kind {
        Kind::Validate => validate(ctx),
        Kind::Simulate => simulate(ctx),
        Kind::Occupation => occupation(ctx),
        Kind::FlowGap => gap(ctx),
        Kind::EstimateD => estimate(ctx),
        Kind::DysonCompare => dyson_compare(ctx),
        Kind::ThermoSweep => thermo_sweep(ctx),
        Kind::Continuity => continuity(ctx),
        Kind::MollifyStudy => mollify_study(ctx),
    }
}

fn require_passed(report: &ValidationReport) -> CliResult<()> {
    let failed: Vec<String> = report
        .conditions
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.condition, c.detail))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failed.join("; ")))
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::StrangSplitting => "strang_splitting",
        Method::OracleRk => "oracle_rk",
    }
}

fn scale_state(w: &State, s: f64) -> State {
    let mut out = State::new();
    for (site, v) in w.entries() {
        let p: Vec<f64> = v.p.iter().map(|x| x * s).collect();
        let q: Vec<f64> = v.q.iter().map(|x| x * s).collect();
        out.insert(site, &p, &q);
    }
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ValidateParams {
    #[serde(default)]
    region: Option<Vec<Site>>,
    #[serde(default)]
    half_width: Option<f64>,
    #[serde(default)]
    samples: Option<usize>,
}

fn validate(ctx: &mut Context) -> CliResult<()> {
    let p: ValidateParams = ctx.spec.params()?;
    let model = ctx.model()?;
    let region = build_region(&p.region, model)?;
    let defaults = SampleSpec::default();
    let spec = SampleSpec {
        half_width: p.half_width.unwrap_or(defaults.half_width),
        samples: p.samples.unwrap_or(defaults.samples),
        seed: ctx.spec.seed,
    };
    let report = validate_assumptions(model, &region, &spec)?;
    ctx.out.json("validation.json", &report)?;
    require_passed(&report)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateParams {
    state: Vec<SiteState>,
    t: f64,
    #[serde(default)]
    region: Option<Vec<Site>>,
    #[serde(default)]
    pairs: PairsConfig,
    #[serde(default)]
    integrator: Option<IntegratorConfig>,
    #[serde(default = "one")]
    record_every: usize,
}

fn one() -> usize {
    1
}

fn simulate(ctx: &mut Context) -> CliResult<()> {
    let p: SimulateParams = ctx.spec.params()?;
    let model = ctx.model()?;
    let region = build_region(&p.region, model)?;
    let pairs = p.pairs.build(model, &region)?;
    let cfg = integrator(&p.integrator);
    let w = build_state(&p.state, model)?;
    w.check_support(&region)?;

    let points: Vec<(f64, State)> = match cfg.method {
        Method::StrangSplitting => flow_trajectory(model, &region, &pairs, &w, p.t, &cfg, p.record_every)?
            .into_iter()
            .map(|tp| (tp.t, tp.state))
            .collect(),
        Method::OracleRk => {
            let stride = cfg.step * p.record_every.max(1) as f64;
            let n = ((p.t.abs() / stride).ceil() as usize).max(1);
            (0..=n)
                .map(|i| {
                    let t = p.t * i as f64 / n as f64;
                    Ok((t, flow(model, &region, &pairs, &w, t, &cfg)?))
                })
                .collect::<CliResult<_>>()?
        }
    };

    let dim = model.dim_n();
    let mut header = vec!["t".to_string(), "energy".to_string()];
    for prefix in ["", "free_"] {
        for s in region.iter() {
            for c in ["p", "q"] {
                for d in 0..dim {
                    header.push(format!("{prefix}{c}_{s}_{d}"));
                }
            }
        }
    }
    header.extend(["method", "step", "seed"].map(String::from));
    let mut table = Table::new(&header);
    for (t, state) in points {
        let reference = free_flow(model, &w, t)?;
        let mut row = vec![num(t), num(latflow_core::dynamics::energy(model, &region, &pairs, &state)?)];
        for st in [&state, &reference] {
            for s in region.iter() {
                for d in 0..dim {
                    row.push(num(st.p(s, d)));
                }
                for d in 0..dim {
                    row.push(num(st.q(s, d)));
                }
            }
        }
        row.push(method_name(cfg.method).to_string());
        row.push(num(cfg.step));
        row.push(ctx.spec.seed.to_string());
        table.push(row);
    }
    ctx.out.table("trajectory.csv", &table)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OccupationParams {
    k: Site,
    l: Site,
    radius: f64,
    state: Vec<SiteState>,
    scales: Vec<f64>,
    #[serde(default = "default_cells")]
    samples: usize,
}

fn default_cells() -> usize {
    10_000
}

fn occupation(ctx: &mut Context) -> CliResult<()> {
    let p: OccupationParams = ctx.spec.params()?;
    let model = ctx.model()?;
    let w = build_state(&p.state, model)?;
    let mut table = Table::new(&["scale", "fraction", "radius", "samples", "seed"]);
    for &s in &p.scales {
        let fraction = occupation_fraction(model, p.k, p.l, &scale_state(&w, s), p.radius, p.samples)?;
        table.push(vec![
            num(s),
            num(fraction),
            num(p.radius),
            p.samples.to_string(),
            ctx.spec.seed.to_string(),
        ]);
    }
    ctx.out.table("occupation.csv", &table)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowGapParams {
    drop: [Site; 2],
    state: Vec<SiteState>,
    scales: Vec<f64>,
    t: f64,
    #[serde(default)]
    region: Option<Vec<Site>>,
    #[serde(default)]
    pairs: PairsConfig,
    #[serde(default)]
    integrator: Option<IntegratorConfig>,
}

fn gap(ctx: &mut Context) -> CliResult<()> {
    let p: FlowGapParams = ctx.spec.params()?;
    let model = ctx.model()?;
    let region = build_region(&p.region, model)?;
    let pairs = p.pairs.build(model, &region)?;
    let cfg = integrator(&p.integrator);
    let drop = Pair::new(p.drop[0], p.drop[1])?;
    let w = build_state(&p.state, model)?;
    let mut table = Table::new(&["scale", "gap", "rel_separation", "occupation", "radius", "t", "method", "step", "seed"]);
    for &s in &p.scales {
        let r = flow_gap(model, &region, &pairs, drop, &scale_state(&w, s), p.t, &cfg)?;
        table.push(vec![
            num(s),
            num(r.gap),
            num(r.rel_separation),
            num(r.occupation),
            num(r.radius),
            num(p.t),
            method_name(cfg.method).to_string(),
            num(cfg.step),
            ctx.spec.seed.to_string(),
        ]);
    }
    ctx.out.table("flow_gap.csv", &table)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimateParams {
    k: Site,
    l: Site,
    radius: f64,
    eps: f64,
    #[serde(default)]
    search: Option<DSearch>,
}

fn estimate(ctx: &mut Context) -> CliResult<()> {
    let p: EstimateParams = ctx.spec.params()?;
    let model = ctx.model()?;
    let mut search = p.search.unwrap_or_default();
    search.seed = ctx.spec.seed;
    let est = estimate_d(model, p.k, p.l, p.radius, p.eps, &search)?;
    ctx.out.json("estimate_D.json", &est)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DysonParams {
    observable: ObservableConfig,
    lambda0: Vec<Site>,
    #[serde(default)]
    lambda: Option<Vec<Site>>,
    max_order: usize,
    #[serde(default)]
    t: Option<f64>,
    /// Time as a fraction of the Dyson radius, used when `t` is absent.
    #[serde(default)]
    t_fraction: Option<f64>,
    #[serde(default)]
    quadrature_points: Option<usize>,
    #[serde(default = "default_oracle_tol")]
    oracle_tol: f64,
    #[serde(default)]
    sampler: Option<SamplerSpec>,
}

fn default_oracle_tol() -> f64 {
    1e-12
}

#[derive(Serialize)]
struct DysonRow {
    order: usize,
    term_count: usize,
    t: f64,
    t0: f64,
    tail_bound: Option<f64>,
    sampled_max_error: f64,
    quadrature_error_estimate: f64,
}

#[derive(Serialize)]
struct DysonReport {
    rows: Vec<DysonRow>,
    grid_points: usize,
    random_samples: usize,
    half_width: f64,
    seed: u64,
    oracle_tol: f64,
}

fn dyson_compare(ctx: &mut Context) -> CliResult<()> {
    let p: DysonParams = ctx.spec.params()?;
    let model = ctx.model()?;
    let f = p.observable.build()?;
    let lambda0 = build_region(&Some(p.lambda0.clone()), model)?;
    let lambda = build_region(&p.lambda, model)?;
    let t0 = dyson_radius(model, &lambda0, &lambda)?;
    let t = match (p.t, p.t_fraction) {
        (Some(t), _) => t,
        (None, Some(frac)) if t0.is_finite() => frac * t0,
        _ => return Err(CliError::Validation("dyson_compare needs `t`, or `t_fraction` with a finite radius".into())),
    };
    let mut cfg = DysonConfig::new(lambda0.clone(), lambda.clone(), p.max_order, t);
    if let Some(q) = p.quadrature_points {
        cfg.quadrature_points = q;
    }
    let series = gamma_truncated(model, &f, &cfg)?;
    let direct = gamma_direct(
        model,
        &f,
        &lambda,
        &model.internal_pairs(&lambda),
        t,
        &IntegratorConfig::oracle(p.oracle_tol),
    )?;
    let sampler = sampler_with_seed(&p.sampler, ctx.spec.seed);
    let plan = SamplePlan::new(&sampler, &lambda.iter().collect(), &series.focus_sites(), model.dim_n())?;
    let q = cfg.quadrature_points;
    let exact = plan.values(&direct)?;
    let mut max_err = vec![0.0f64; p.max_order + 1];
    let mut quad_err = vec![0.0f64; p.max_order + 1];
    for (w, e) in plan.states.iter().zip(&exact) {
        let coarse = series.partial_sums_with(w, q)?;
        let fine = series.partial_sums_with(w, 2 * q)?;
        for m in 0..=p.max_order {
            max_err[m] = max_err[m].max((coarse[m] - e).norm());
            quad_err[m] = quad_err[m].max((coarse[m] - fine[m]).norm());
        }
    }
    let rows = (0..=p.max_order)
        .map(|m| DysonRow {
            order: m,
            term_count: if m == 0 {
                1
            } else {
                series.terms().iter().filter(|term| term.len() == m).count()
            },
            t,
            t0,
            tail_bound: tail_bound(model, &lambda0, &lambda, t, m + 1)
                .ok()
                .map(|b| b * f.grad_bound().unwrap_or(f64::INFINITY)),
            sampled_max_error: max_err[m],
            quadrature_error_estimate: quad_err[m],
        })
        .collect();
    let report = DysonReport {
        rows,
        grid_points: plan.grid_points,
        random_samples: plan.random_samples,
        half_width: plan.half_width,
        seed: plan.seed,
        oracle_tol: p.oracle_tol,
    };
    ctx.out.json("dyson_compare.json", &report)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NetConfig {
    Intervals { center: Site, radii: Vec<usize> },
    Regions { regions: Vec<Vec<Site>> },
}

impl NetConfig {
    fn build(&self, model: &LatticeModel) -> CliResult<RegionNet> {
        let net = match self {
            NetConfig::Intervals { center, radii } => RegionNet::intervals(*center, radii)?,
            NetConfig::Regions { regions } => RegionNet::new(
                regions
                    .iter()
                    .map(|r| Region::new(r.iter().copied()))
                    .collect::<Result<_, _>>()?,
            )?,
        };
        model.check_region(net.largest())?;
        Ok(net)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepParams {
    observable: ObservableConfig,
    net: NetConfig,
    times: Vec<f64>,
    #[serde(default)]
    integrator: Option<IntegratorConfig>,
    #[serde(default)]
    sampler: Option<SamplerSpec>,
}

fn thermo_sweep(ctx: &mut Context) -> CliResult<()> {
    let p: SweepParams = ctx.spec.params()?;
    let model = ctx.model()?;
    let f = p.observable.build()?;
    let net = p.net.build(model)?;
    let cfg = integrator(&p.integrator);
    let sampler = sampler_with_seed(&p.sampler, ctx.spec.seed);
    let mut table = Table::new(&[
        "region_size",
        "next_region_size",
        "t",
        "successive_gap",
        "gap_to_largest",
        "box",
        "grid_points",
        "random_samples",
        "seed",
    ]);
    for &t in &p.times {
        let r = convergence_sweep(model, &net, &f, t, &sampler, &cfg)?;
        for (j, (succ, cum)) in r.successive.iter().zip(&r.cumulative).enumerate() {
            table.push(vec![
                r.region_sizes[j].to_string(),
                r.region_sizes[j + 1].to_string(),
                num(t),
                num(succ.value),
                num(cum.value),
                num(succ.half_width),
                succ.grid_points.to_string(),
                succ.random_samples.to_string(),
                succ.seed.to_string(),
            ]);
        }
    }
    ctx.out.table("thermo_sweep.csv", &table)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ContinuityParams {
    observable: ObservableConfig,
    lambda: Vec<Site>,
    net: NetConfig,
    times: Vec<f64>,
    #[serde(default)]
    integrator: Option<IntegratorConfig>,
    #[serde(default)]
    sampler: Option<SamplerSpec>,
}

#[derive(Serialize)]
struct ContinuityConstants {
    c: f64,
    c1: f64,
    grad_f: f64,
    resolvent_warning: bool,
    largest_region_size: usize,
}

fn continuity(ctx: &mut Context) -> CliResult<()> {
    let p: ContinuityParams = ctx.spec.params()?;
    let model = ctx.model()?;
    let f = p.observable.build()?;
    let lambda = build_region(&Some(p.lambda.clone()), model)?;
    let net = p.net.build(model)?;
    let cfg = integrator(&p.integrator);
    let sampler = sampler_with_seed(&p.sampler, ctx.spec.seed);
    let prof = strong_continuity_probe(model, &f, &lambda, &net, &p.times, &sampler, &cfg)?;
    if prof.resolvent_warning {
        eprintln!("warning: the observable has a resolvent core, which decays only along its own direction");
    }
    let mut table = Table::new(&[
        "region_size",
        "t",
        "gap",
        "epsilon",
        "envelope",
        "box",
        "grid_points",
        "random_samples",
        "seed",
    ]);
    for i in 0..prof.times.len() {
        table.push(vec![
            net.largest().len().to_string(),
            num(prof.times[i]),
            num(prof.gaps[i]),
            num(prof.epsilon[i]),
            num(prof.envelope[i]),
            num(prof.half_width),
            prof.grid_points.to_string(),
            prof.random_samples.to_string(),
            prof.seed.to_string(),
        ]);
    }
    ctx.out.table("continuity.csv", &table)?;
    ctx.out.json(
        "continuity_constants.json",
        &ContinuityConstants {
            c: prof.c,
            c1: prof.c1,
            grad_f: prof.grad_f,
            resolvent_warning: prof.resolvent_warning,
            largest_region_size: net.largest().len(),
        },
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MollifyParams {
    potential: PotentialConfig,
    #[serde(default)]
    dim: Option<usize>,
    m: Vec<u32>,
    grid: MollifyGrid,
}

fn mollify_study(ctx: &mut Context) -> CliResult<()> {
    let p: MollifyParams = ctx.spec.params()?;
    let dim = p.dim.or(ctx.model.as_ref().map(|m| m.dim_n())).unwrap_or(1);
    let base = p.potential.build(dim)?;
    let mut table = Table::new(&["m", "grad_sup", "grad_lipschitz", "max_grad_error", "support_radius", "spacing"]);
    for &m in &p.m {
        let smooth = mollify(&base, m, &p.grid)?;
        let table_nodes = smooth
            .grid()
            .ok_or_else(|| CliError::Other("mollified potential has no tabulated grid".into()))?;
        let mut exact = vec![0.0; dim];
        let mut err = 0.0f64;
        for (x, g) in table_nodes.nodes() {
            base.grad(&x, &mut exact);
            let d = g.iter().zip(&exact).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            err = err.max(d);
        }
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        table.push(vec![
            m.to_string(),
            opt(smooth.grad_sup()),
            opt(smooth.grad_lipschitz()),
            num(err),
            opt(smooth.support_radius()),
            num(p.grid.spacing),
        ]);
    }
    ctx.out.table("mollify_study.csv", &table)
}

