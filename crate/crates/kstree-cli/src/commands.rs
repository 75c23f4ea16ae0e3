//! One function per subcommand. Library errors carry the stage that raised them.

use std::f64::consts::PI;

use serde::Serialize;
use serde_json::{json, Value};

use kstree::critical_sets::{is_member, CriticalSetId};
use kstree::graph_spectra::{assemble_with, rank_deficiency, ChannelMask, GraphEigenpair};
use kstree::moment_control::{
    build_biorthogonal, compute_targets_modal, control_from_targets, critical_notes, modal_combination, project,
    ControlSignal, Synthesis, TargetOptions,
};
use kstree::pde_sim::{simulate_modal, verify_null, SimState, VerificationReport};
use kstree::scalar_spectra::{spectrum_with, ScalarProblemId};
use kstree::tree_model::IntervalVariant;
use kstree::{GraphFunction, Model, Parallelism, StarTreeConfig};

use crate::emit::{header, num, Artifact, Outcome};
use crate::experiment::{ExperimentSpec, InitialData};
use crate::{CliError, Format};

pub struct Context {
    pub spec: ExperimentSpec,
    pub format: Option<Format>,
    pub par: Parallelism,
    /// Per-edge grid size for dumping the reconstructed state.
    pub dump_grid: Option<usize>,
}

fn stage(name: &'static str) -> impl Fn(kstree::Error) -> CliError {
    move |source| CliError::Stage { stage: name, source }
}

fn is_csv(ctx: &Context, default: Format) -> bool {
    ctx.format.unwrap_or(default) == Format::Csv
}

fn channel_mask(ctx: &Context) -> Result<ChannelMask, CliError> {
    let cfg = &ctx.spec.config;
    match (&ctx.spec.channels, ctx.spec.inactive.is_empty()) {
        (Some(_), false) => Err(CliError::Input("--channels and --inactive are mutually exclusive".into())),
        (Some(bits), true) => ChannelMask::from_bits(cfg, bits).map_err(stage("channels")),
        (None, _) => ChannelMask::with_inactive(cfg, &ctx.spec.inactive).map_err(stage("channels")),
    }
}

fn initial_data(ctx: &Context, eps: &[GraphEigenpair]) -> Result<GraphFunction, CliError> {
    let cfg = &ctx.spec.config;
    let total: usize = eps.iter().map(|e| e.multiplicity).sum();
    let coeffs = match &ctx.spec.y0 {
        InitialData::Zero => return Ok(GraphFunction::zero(cfg.num_edges)),
        InitialData::Basis(c) => c.clone(),
        InitialData::UnitMix(count) => vec![1.0; count.unwrap_or(total)],
    };
    modal_combination(cfg, eps, &coeffs).map_err(stage("initial data"))
}

pub fn spectrum(ctx: &Context, problems: &str, count: usize) -> Result<Outcome, CliError> {
    let ids = if problems.eq_ignore_ascii_case("all") {
        ScalarProblemId::ALL.to_vec()
    } else {
        problems
            .split(',')
            .map(|p| ScalarProblemId::parse(p.trim()).map_err(stage("spectrum")))
            .collect::<Result<Vec<_>, _>>()?
    };
    #[derive(Serialize)]
    struct Row {
        problem: &'static str,
        index: usize,
        branch: &'static str,
        sigma: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
        value_at_l: f64,
        dxx_at_l: f64,
    }
    let mut rows = Vec::new();
    for id in ids {
        for ep in spectrum_with(id, &ctx.spec.config, count, ctx.par).map_err(stage("spectrum"))? {
            rows.push(Row {
                problem: id.name(),
                index: ep.index,
                branch: ep.params.branch.name(),
                sigma: ep.params.sigma,
                alpha: ep.params.alpha,
                beta: ep.params.beta,
                gamma: ep.params.gamma,
                value_at_l: ep.traces.value_at_l,
                dxx_at_l: ep.traces.dxx_at_l,
            });
        }
    }
    if is_csv(ctx, Format::Csv) {
        let h = header(&["problem", "index", "branch", "sigma", "alpha", "beta", "gamma", "value_at_L", "dxx_at_L"]);
        let body = rows.iter().map(|r| {
            vec![
                r.problem.to_string(),
                r.index.to_string(),
                r.branch.to_string(),
                num(r.sigma),
                num(r.alpha),
                num(r.beta),
                num(r.gamma),
                num(r.value_at_l),
                num(r.dxx_at_l),
            ]
        });
        Ok(Outcome::single(Artifact::csv("spectrum.csv", &h, body)?))
    } else {
        Ok(Outcome::single(Artifact::json("spectrum.json", &rows)?))
    }
}

pub fn critical(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.spec.config;
    let rows: Vec<Value> = CriticalSetId::ALL
        .into_iter()
        .map(|set| {
            let m = is_member(set, cfg.lambda, cfg.edge_length);
            json!({
                "set": set.name(),
                "member": m.member,
                "witness": m.witness.map(|(a, b)| vec![a, b]),
                "scaled_value": m.scaled_value,
                "component": m.component.map(|c| c.name()),
            })
        })
        .collect();
    if is_csv(ctx, Format::Json) {
        let h = header(&["set", "member", "witness_1", "witness_2", "scaled_value"]);
        let body = CriticalSetId::ALL.into_iter().map(|set| {
            let m = is_member(set, cfg.lambda, cfg.edge_length);
            let (a, b) = m.witness.map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
            vec![set.name().to_string(), m.member.to_string(), a, b, num(m.scaled_value)]
        });
        Ok(Outcome::single(Artifact::csv("critical.csv", &h, body)?))
    } else {
        let report = json!({ "lambda": cfg.lambda, "length": cfg.edge_length, "sets": rows });
        Ok(Outcome::single(Artifact::json("critical.json", &report)?))
    }
}

fn eigenspaces_json(cfg: &StarTreeConfig, eps: &[GraphEigenpair]) -> Result<Value, CliError> {
    let list = eps
        .iter()
        .enumerate()
        .map(|(index, ep)| {
            let mut v = serde_json::to_value(ep).map_err(|e| CliError::Input(e.to_string()))?;
            v["index"] = json!(index);
            v["coupling_defect"] = json!(ep.coupling_defect());
            Ok(v)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(json!({ "config": cfg.to_json_value(), "eigenspaces": list }))
}

pub fn assemble(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.spec.config;
    let eps = assemble_with(cfg, ctx.spec.modes, ctx.par).map_err(stage("assemble"))?;
    if is_csv(ctx, Format::Json) {
        let h = header(&[
            "index", "sigma", "multiplicity", "origin", "basis", "edge", "value_at_L", "dx_at_L", "dxx_at_L",
            "dxxx_at_L", "value_at_0", "dx_at_0", "dxx_at_0", "dxxx_at_0",
        ]);
        let mut rows = Vec::new();
        for (index, ep) in eps.iter().enumerate() {
            for (i, per_edge) in ep.edge_traces.iter().enumerate() {
                for (k, t) in per_edge.iter().enumerate() {
                    rows.push(vec![
                        index.to_string(),
                        num(ep.sigma),
                        ep.multiplicity.to_string(),
                        format!("{:?}", ep.origin),
                        i.to_string(),
                        (k + 1).to_string(),
                        num(t.value_at_l),
                        num(t.dx_at_l),
                        num(t.dxx_at_l),
                        num(t.dxxx_at_l),
                        num(t.value_at_0),
                        num(t.dx_at_0),
                        num(t.dxx_at_0),
                        num(t.dxxx_at_0),
                    ]);
                }
            }
        }
        Ok(Outcome::single(Artifact::csv("eigenspaces.csv", &h, rows)?))
    } else {
        Ok(Outcome::single(Artifact::json("eigenspaces.json", &eigenspaces_json(cfg, &eps)?)?))
    }
}

pub fn biorthogonal(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.spec.config;
    let eps = assemble_with(cfg, ctx.spec.modes, ctx.par).map_err(stage("assemble"))?;
    let sigmas: Vec<f64> = eps.iter().map(|e| e.sigma).collect();
    let family = build_biorthogonal(&sigmas, cfg.horizon).map_err(stage("biorthogonal"))?;
    if is_csv(ctx, Format::Json) {
        let h = header(&["n", "i", "sigma_i", "coefficient"]);
        let rows = family.coeffs.iter().enumerate().flat_map(|(n, row)| {
            let sigmas = &family.sigmas;
            row.iter().enumerate().map(move |(i, c)| vec![n.to_string(), i.to_string(), num(sigmas[i]), num(*c)])
        });
        Ok(Outcome::single(Artifact::csv("biorthogonal.csv", &h, rows.collect::<Vec<_>>())?))
    } else {
        Ok(Outcome::single(Artifact::json("biorthogonal.json", &family_json(&family))?))
    }
}

fn family_json(family: &kstree::moment_control::BiorthogonalFamily) -> Value {
    json!({
        "sigmas": family.sigmas,
        "horizon": family.horizon,
        "gram_condition": family.gram_condition,
        "biorthogonality_defect": family.biorthogonality_defect(),
        "coefficients": family.coeffs,
    })
}

/// Assemble, project, targets, biorthogonal family, control.
fn synthesis_chain(ctx: &Context, mask: &ChannelMask) -> Result<(Synthesis, GraphFunction), CliError> {
    let cfg = &ctx.spec.config;
    let eps = assemble_with(cfg, ctx.spec.modes, ctx.par).map_err(stage("assemble"))?;
    let y0 = initial_data(ctx, &eps)?;
    let coords = project(cfg, &y0, &eps).map_err(stage("project"))?;
    let opts = TargetOptions { route_b: ctx.spec.route_b };
    let targets = compute_targets_modal(cfg, &eps, &coords, mask, opts).map_err(stage("targets"))?;
    let family = build_biorthogonal(&targets.sigmas(), cfg.horizon).map_err(stage("biorthogonal"))?;
    let control = control_from_targets(&family, &targets, mask).map_err(stage("control"))?;
    let synthesis = Synthesis { eigenpairs: eps, targets, family, control, critical: critical_notes(cfg) };
    Ok((synthesis, y0))
}

fn synthesis_json(ctx: &Context, s: &Synthesis) -> Value {
    json!({
        "config": ctx.spec.config.to_json_value(),
        "modes": ctx.spec.modes,
        "channels": s.control.channels,
        "active": s.control.active,
        "targets": s.targets,
        "gram_condition": s.family.gram_condition,
        "biorthogonality_defect": s.family.biorthogonality_defect(),
        "moment_defect": s.moment_defect(),
        "control": s.control,
        "critical": s.critical.iter().map(|c| json!({"set": c.set.name(), "witness": c.witness})).collect::<Vec<_>>(),
    })
}

fn control_samples(control: &ControlSignal, points: usize) -> Result<Artifact, CliError> {
    let mut h = vec!["t".to_string()];
    h.extend(control.channels.iter().cloned());
    let rows = control.samples(points).into_iter().map(|(t, v)| {
        let mut row = vec![num(t)];
        row.extend(v.into_iter().map(num));
        row
    });
    Artifact::csv("controls.csv", &h, rows.collect::<Vec<_>>())
}

pub fn synthesize(ctx: &Context) -> Result<Outcome, CliError> {
    let mask = channel_mask(ctx)?;
    let (s, _) = synthesis_chain(ctx, &mask)?;
    let json = Artifact::json("synthesis.json", &synthesis_json(ctx, &s))?;
    let csv = control_samples(&s.control, ctx.spec.samples)?;
    let primary = usize::from(is_csv(ctx, Format::Json));
    Ok(Outcome { artifacts: vec![json, csv], primary, refusal: None })
}

fn trajectory(state: &SimState) -> Result<Artifact, CliError> {
    let mut rows = Vec::new();
    for (t, modal) in state.times.iter().zip(&state.modal) {
        for (n, y) in modal.iter().enumerate() {
            rows.push(vec![num(*t), n.to_string(), num(*y)]);
        }
    }
    Artifact::csv("trajectory.csv", &header(&["t", "mode", "coefficient"]), rows)
}

fn state_dump(cfg: &StarTreeConfig, state: &SimState, grid: usize) -> Result<Artifact, CliError> {
    let mut rows = Vec::new();
    for (s, t) in state.times.iter().enumerate() {
        for edge in 0..cfg.num_edges {
            for j in 0..grid {
                let x = if grid == 1 { 0.0 } else { cfg.edge_length * j as f64 / (grid - 1) as f64 };
                rows.push(vec![num(*t), (edge + 1).to_string(), num(x), num(state.reconstruct(cfg, s, edge, x, 0))]);
            }
        }
    }
    Artifact::csv("state.csv", &header(&["t", "edge", "x", "y"]), rows)
}

fn run_simulation(
    ctx: &Context,
    y0: &GraphFunction,
    control: &ControlSignal,
) -> Result<(SimState, VerificationReport), CliError> {
    let cfg = &ctx.spec.config;
    let sim_modes = ctx.spec.simulation_modes();
    let eps = assemble_with(cfg, sim_modes, ctx.par).map_err(stage("simulate"))?;
    let coords = project(cfg, y0, &eps).map_err(stage("simulate"))?;
    let state = simulate_modal(cfg, eps, &coords, control, ctx.spec.steps, ctx.par).map_err(stage("simulate"))?;
    let report = verify_null(cfg, &state, ctx.spec.modes.min(sim_modes)).map_err(stage("verify"))?;
    Ok((state, report))
}

pub fn simulate(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.spec.config;
    let mask = channel_mask(ctx)?;
    let mut artifacts = Vec::new();
    let (control, y0) = if ctx.spec.zero_control {
        let eps = assemble_with(cfg, ctx.spec.modes, ctx.par).map_err(stage("assemble"))?;
        (ControlSignal::zero(&mask, cfg.horizon), initial_data(ctx, &eps)?)
    } else {
        let (s, y0) = synthesis_chain(ctx, &mask)?;
        artifacts.push(Artifact::json("synthesis.json", &synthesis_json(ctx, &s))?);
        artifacts.push(control_samples(&s.control, ctx.spec.samples)?);
        (s.control, y0)
    };
    let (state, report) = run_simulation(ctx, &y0, &control)?;
    artifacts.push(Artifact::json("report.json", &report)?);
    artifacts.push(trajectory(&state)?);
    if let Some(k) = ctx.dump_grid {
        artifacts.push(state_dump(cfg, &state, k)?);
    }
    let name = if is_csv(ctx, Format::Json) { "trajectory.csv" } else { "report.json" };
    let primary = artifacts.iter().position(|a| a.name == name).expect("artifact present");
    Ok(Outcome { artifacts, primary, refusal: None })
}

/// Full chain with every intermediate persisted; a failed verdict is a refusal.
pub fn verify(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.spec.config;
    let mask = channel_mask(ctx)?;
    let (s, y0) = synthesis_chain(ctx, &mask)?;
    let (state, report) = run_simulation(ctx, &y0, &s.control)?;
    let mut artifacts = vec![
        Artifact::json("report.json", &report)?,
        Artifact::json("eigenspaces.json", &eigenspaces_json(cfg, &s.eigenpairs)?)?,
        Artifact::json("targets.json", &s.targets)?,
        Artifact::json("biorthogonal.json", &family_json(&s.family))?,
        Artifact::json("synthesis.json", &synthesis_json(ctx, &s))?,
        control_samples(&s.control, ctx.spec.samples)?,
        trajectory(&state)?,
    ];
    if let Some(k) = ctx.dump_grid {
        artifacts.push(state_dump(cfg, &state, k)?);
    }
    let refusal = (!report.passed).then(|| {
        json!({
            "status": "refused",
            "code": "verification_failed",
            "stage": "verify",
            "message": format!(
                "max retained residual {:.3e} exceeds {:.1e}",
                report.max_residual, report.tolerance
            ),
            "detail": report,
        })
    });
    let primary = if is_csv(ctx, Format::Json) { 6 } else { 0 };
    Ok(Outcome { artifacts, primary, refusal })
}

pub fn obstruct(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.spec.config;
    let mask = channel_mask(ctx)?;
    let eps = assemble_with(cfg, ctx.spec.modes, ctx.par).map_err(stage("assemble"))?;
    let y0 = initial_data(ctx, &eps)?;
    let coords = project(cfg, &y0, &eps).map_err(stage("project"))?;
    let opts = TargetOptions { route_b: ctx.spec.route_b };
    compute_targets_modal(cfg, &eps, &coords, &mask, opts).map_err(stage("targets"))?;
    let ranks = eps
        .iter()
        .enumerate()
        .map(|(index, ep)| {
            let r = rank_deficiency(ep, cfg, &mask).map_err(stage("targets"))?;
            Ok(json!({
                "index": index,
                "sigma": ep.sigma,
                "multiplicity": ep.multiplicity,
                "rank": r.rank,
                "deficiency": r.deficiency,
            }))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = json!({
        "obstructed": false,
        "config": cfg.to_json_value(),
        "channels": mask.names(),
        "active": mask.active,
        "eigenspaces": ranks,
    });
    Ok(Outcome::single(Artifact::json("obstruction.json", &report)?))
}

/// Both single-interval systems at λ ∈ {1, π²/4 + 0.1, π²/4}; only runs outside N₃ must succeed.
pub fn interval_demo(ctx: &Context) -> Result<Outcome, CliError> {
    let base = &ctx.spec.config;
    let mut runs = Vec::new();
    let mut all_required_pass = true;
    for variant in [IntervalVariant::NeumannPair, IntervalVariant::DirichletPair] {
        for lambda in [1.0, PI * PI / 4.0 + 0.1, PI * PI / 4.0] {
            let cfg = StarTreeConfig::interval(variant, base.edge_length, lambda, base.horizon).map_err(stage("config"))?;
            let in_n3 = is_member(CriticalSetId::N3, lambda, cfg.edge_length).member;
            let sub = Context {
                spec: ExperimentSpec {
                    config: cfg,
                    inactive: Vec::new(),
                    channels: None,
                    zero_control: false,
                    ..ctx.spec.clone()
                },
                format: None,
                par: ctx.par,
                dump_grid: None,
            };
            let mask = ChannelMask::all(&cfg);
            let result = synthesis_chain(&sub, &mask).and_then(|(s, y0)| run_simulation(&sub, &y0, &s.control));
            let model = Model::Interval(variant).label();
            let entry = match result {
                Ok((_, r)) => {
                    all_required_pass &= in_n3 || r.passed;
                    json!({
                        "model": model,
                        "lambda": lambda,
                        "in_n3": in_n3,
                        "status": if r.passed { "passed" } else { "failed" },
                        "max_residual": r.max_residual,
                        "tail_estimate": r.tail_estimate,
                    })
                }
                Err(CliError::Stage { stage, source }) if source.is_refusal() || in_n3 => {
                    all_required_pass &= in_n3;
                    json!({
                        "model": model,
                        "lambda": lambda,
                        "in_n3": in_n3,
                        "status": "refused",
                        "stage": stage,
                        "code": source.code(),
                        "message": source.to_string(),
                    })
                }
                Err(e) => return Err(e),
            };
            runs.push(entry);
        }
    }
    let refusal = (!all_required_pass).then(|| {
        json!({
            "status": "refused",
            "code": "verification_failed",
            "stage": "interval-demo",
            "message": "a run outside N3 did not reach the null state",
        })
    });
    if is_csv(ctx, Format::Json) {
        let h = header(&["model", "lambda", "in_n3", "status", "max_residual"]);
        let rows = runs.iter().map(|r| {
            vec![
                r["model"].as_str().unwrap_or_default().to_string(),
                num(r["lambda"].as_f64().unwrap_or(f64::NAN)),
                r["in_n3"].to_string(),
                r["status"].as_str().unwrap_or_default().to_string(),
                r["max_residual"].as_f64().map(num).unwrap_or_default(),
            ]
        });
        let a = Artifact::csv("interval_demo.csv", &h, rows.collect::<Vec<_>>())?;
        return Ok(Outcome { artifacts: vec![a], primary: 0, refusal });
    }
    let a = Artifact::json("interval_demo.json", &json!({ "runs": runs }))?;
    Ok(Outcome { artifacts: vec![a], primary: 0, refusal })
}
