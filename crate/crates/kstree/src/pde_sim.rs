//! Forward simulation of the controlled system by boundary lifting and exact
//! modal integration.
//!
//! With `y = z + Σ_c Q_c u_c`, the remainder solves the homogeneous problem with
//! source `−Σ_c (Q_c u_c′ + (λQ_c″ + Q_c⁗) u_c)`. Each mode obeys
//! `z_n′ = −σ_n z_n − Σ_c (q_{nc} u_c′ + r_{nc} u_c)` with `q = ⟨Q_c, φ_n⟩` and
//! `r = ⟨λQ_c″ + Q_c⁗, φ_n⟩`; controls are exponential sums, so the
//! variation-of-constants integral is evaluated in closed form.

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph_spectra::{assemble_with, Channel, ChannelKind, ChannelMask, GraphEigenpair};
use crate::moment_control::{exp_integral, project, ControlSignal};
use crate::parallel::Parallelism;
use crate::quadrature::edge_rule;
use crate::tree_model::{EdgeFunction, GraphFunction, StarTreeConfig};

/// Boundary point carrying the control data and the prescribed derivative orders.
fn lifting_conditions(kind: ChannelKind) -> (bool, [usize; 2], [f64; 2]) {
    match kind {
        ChannelKind::U => (false, [0, 1], [0.0, 1.0]),
        ChannelKind::A => (false, [1, 3], [1.0, 0.0]),
        ChannelKind::B => (false, [1, 3], [0.0, 1.0]),
        ChannelKind::NeumannSlope => (true, [1, 3], [1.0, 0.0]),
        ChannelKind::NeumannThird => (true, [1, 3], [0.0, 1.0]),
        ChannelKind::DirichletValue => (true, [0, 2], [1.0, 0.0]),
        ChannelKind::DirichletCurvature => (true, [0, 2], [0.0, 1.0]),
    }
}

/// `d^o/ds^o s^p` at `s`.
fn monomial_derivative(p: u32, o: usize, s: f64) -> f64 {
    if o as u32 > p {
        return 0.0;
    }
    let falling: f64 = (0..o as u32).map(|k| (p - k) as f64).product();
    falling * s.powi((p - o as u32) as i32)
}

/// `c₄ s⁴ + c₅ s⁵` matching two derivative values at `s = L`.
fn quartic_quintic(length: f64, orders: [usize; 2], values: [f64; 2]) -> [f64; 2] {
    let m = Matrix2::from_fn(|i, j| monomial_derivative(4 + j as u32, orders[i], length));
    let c = m.lu().solve(&Vector2::new(values[0], values[1])).expect("lifting interpolation is unisolvent");
    [c[0], c[1]]
}

/// Lifting profile of a channel on its edge. All derivatives through order 3
/// vanish at the uncontrolled end.
pub fn lifting(cfg: &StarTreeConfig, channel: &Channel) -> EdgeFunction {
    let l = cfg.edge_length;
    let (at_zero, orders, values) = lifting_conditions(channel.kind);
    if !at_zero {
        let [c4, c5] = quartic_quintic(l, orders, values);
        return EdgeFunction::polynomial(&[0.0, 0.0, 0.0, 0.0, c4, c5]);
    }
    // Q(x) = R(L − x) and d/dx = −d/ds
    let signed = [values[0] * sign(orders[0]), values[1] * sign(orders[1])];
    let [c4, c5] = quartic_quintic(l, orders, signed);
    let mut coeffs = [0.0; 6];
    for (p, c) in [(4u32, c4), (5u32, c5)] {
        for k in 0..=p {
            let binom = (0..k).fold(1.0, |acc, i| acc * (p - i) as f64 / (i + 1) as f64);
            coeffs[k as usize] += c * binom * l.powi((p - k) as i32) * sign(k as usize);
        }
    }
    EdgeFunction::polynomial(&coeffs)
}

fn sign(order: usize) -> f64 {
    if order.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `λQ″ + Q⁗`.
pub fn lifted_operator(cfg: &StarTreeConfig, q: &EdgeFunction) -> EdgeFunction {
    q.derivative(2).scaled(cfg.lambda).add(&q.derivative(4))
}

/// Projections `q = ⟨Q_c, φ⟩` and `r = ⟨λQ_c″ + Q_c⁗, φ⟩` for every basis function
/// (rows, flattened over eigenspaces) and channel (columns).
#[derive(Clone, Debug, Serialize)]
pub struct LiftedSource {
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

pub fn lifted_source(cfg: &StarTreeConfig, eigenpairs: &[GraphEigenpair], mask: &ChannelMask) -> LiftedSource {
    let lifts: Vec<(usize, EdgeFunction, EdgeFunction)> = mask
        .channels
        .iter()
        .map(|c| {
            let q = lifting(cfg, c);
            let aq = lifted_operator(cfg, &q);
            (c.edge, q, aq)
        })
        .collect();
    let l = cfg.edge_length;
    let mut q = Vec::new();
    let mut r = Vec::new();
    for ep in eigenpairs {
        for b in &ep.basis {
            q.push(lifts.iter().map(|(e, lq, _)| lq.inner_product(&b.components[*e], l)).collect());
            r.push(lifts.iter().map(|(e, _, aq)| aq.inner_product(&b.components[*e], l)).collect());
        }
    }
    LiftedSource { q, r }
}

/// Modal trajectory of a simulation, flattened over the bases of the eigenspaces.
#[derive(Clone, Debug, Serialize)]
pub struct SimState {
    pub horizon: f64,
    pub channels: Vec<String>,
    /// Eigenvalue of each modal coordinate.
    pub sigmas: Vec<f64>,
    /// Eigenspace index of each modal coordinate.
    pub eigenspace: Vec<usize>,
    pub times: Vec<f64>,
    /// `y_n(t)` at each sample time.
    pub modal: Vec<Vec<f64>>,
    /// `z_n(t)` at each sample time.
    pub remainder: Vec<Vec<f64>>,
    /// `u_c(t)` at each sample time.
    pub controls: Vec<Vec<f64>>,
    pub initial_modal: Vec<f64>,
    /// `y_n(T)`.
    pub final_modal: Vec<f64>,
    /// `z_n(T)`.
    pub final_remainder: Vec<f64>,
    pub final_controls: Vec<f64>,
    pub source: LiftedSource,
    #[serde(skip)]
    pub eigenpairs: Vec<GraphEigenpair>,
    #[serde(skip)]
    pub mask: Option<ChannelMask>,
}

impl SimState {
    pub fn time(&self) -> f64 {
        self.horizon
    }

    /// Number of eigenspaces covered.
    pub fn num_modes(&self) -> usize {
        self.eigenpairs.len()
    }

    /// `∂ₓᵒ y(t_k, x)` on `edge` from the truncated expansion plus liftings.
    pub fn reconstruct(&self, cfg: &StarTreeConfig, sample: usize, edge: usize, x: f64, order: usize) -> f64 {
        self.evaluate(cfg, &self.remainder[sample], &self.controls[sample], edge, x, order)
    }

    /// `∂ₓᵒ y(T, x)`.
    pub fn reconstruct_final(&self, cfg: &StarTreeConfig, edge: usize, x: f64, order: usize) -> f64 {
        self.evaluate(cfg, &self.final_remainder, &self.final_controls, edge, x, order)
    }

    fn evaluate(&self, cfg: &StarTreeConfig, z: &[f64], u: &[f64], edge: usize, x: f64, order: usize) -> f64 {
        let basis = self.eigenpairs.iter().flat_map(|e| e.basis.iter());
        let mut v: f64 = basis.zip(z).map(|(b, zn)| zn * b.eval(edge, x, order)).sum();
        if let Some(mask) = &self.mask {
            for (c, ch) in mask.channels.iter().enumerate() {
                if ch.edge == edge && u[c] != 0.0 {
                    v += u[c] * lifting(cfg, ch).eval(x, order);
                }
            }
        }
        v
    }

    /// `‖y(t_k)‖` of the modal part, `(Σ y_n²)^{1/2}`.
    pub fn modal_norm(&self, sample: usize) -> f64 {
        self.modal[sample].iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn simulate(
    cfg: &StarTreeConfig,
    y0: &GraphFunction,
    controls: &ControlSignal,
    num_modes: usize,
    steps: usize,
) -> Result<SimState> {
    simulate_with(cfg, y0, controls, num_modes, steps, Parallelism::default())
}

pub fn simulate_with(
    cfg: &StarTreeConfig,
    y0: &GraphFunction,
    controls: &ControlSignal,
    num_modes: usize,
    steps: usize,
    par: Parallelism,
) -> Result<SimState> {
    if num_modes == 0 {
        return Err(Error::InvalidInput("num_modes must be >= 1".into()));
    }
    let eigenpairs = assemble_with(cfg, num_modes, par)?;
    let coords = project(cfg, y0, &eigenpairs)?;
    simulate_modal(cfg, eigenpairs, &coords, controls, steps, par)
}

/// Simulation from eigenspace coordinates of y₀.
pub fn simulate_modal(
    cfg: &StarTreeConfig,
    eigenpairs: Vec<GraphEigenpair>,
    coords: &[Vec<f64>],
    controls: &ControlSignal,
    steps: usize,
    par: Parallelism,
) -> Result<SimState> {
    let full = ChannelMask::all(cfg);
    if controls.channels != full.names() {
        return Err(Error::InvalidInput(format!(
            "control channels {:?} do not match the model channels {:?}",
            controls.channels,
            full.names()
        )));
    }
    if (controls.horizon - cfg.horizon).abs() > 1e-12 * cfg.horizon {
        return Err(Error::InvalidInput("control horizon differs from the configuration".into()));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("steps must be >= 1".into()));
    }
    if coords.len() != eigenpairs.len() || coords.iter().zip(&eigenpairs).any(|(c, e)| c.len() != e.multiplicity) {
        return Err(Error::InvalidInput("initial coordinates do not match the eigenspaces".into()));
    }
    let mask = ChannelMask { channels: full.channels.clone(), active: controls.active.clone() };
    let source = lifted_source(cfg, &eigenpairs, &mask);
    let mut sigmas = Vec::new();
    let mut eigenspace = Vec::new();
    let mut y0 = Vec::new();
    for (k, (ep, c)) in eigenpairs.iter().zip(coords).enumerate() {
        for &v in c {
            sigmas.push(ep.sigma);
            eigenspace.push(k);
            y0.push(v);
        }
    }
    let t_end = cfg.horizon;
    let nch = controls.num_channels();
    let u0: Vec<f64> = (0..nch).map(|c| controls.eval(c, 0.0)).collect();
    let integrator = ModalIntegrator::new(controls, &source, &sigmas, &y0, &u0);
    let times: Vec<f64> = (0..=steps).map(|k| if k == steps { t_end } else { t_end * k as f64 / steps as f64 }).collect();
    let samples: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = par.map(&times, |&t| integrator.state(t));
    let (final_remainder, final_modal, final_controls) = integrator.state(t_end);
    let mut modal = Vec::with_capacity(times.len());
    let mut remainder = Vec::with_capacity(times.len());
    let mut ctrl = Vec::with_capacity(times.len());
    for (z, y, u) in samples {
        remainder.push(z);
        modal.push(y);
        ctrl.push(u);
    }
    Ok(SimState {
        horizon: t_end,
        channels: controls.channels.clone(),
        sigmas,
        eigenspace,
        times,
        modal,
        remainder,
        controls: ctrl,
        initial_modal: y0,
        final_modal,
        final_remainder,
        final_controls,
        source,
        eigenpairs,
        mask: Some(mask),
    })
}

struct ModalIntegrator<'a> {
    controls: &'a ControlSignal,
    source: &'a LiftedSource,
    sigmas: &'a [f64],
    z0: Vec<f64>,
    /// `κ_{n,i} = −Σ_c g_{ci}(σ_i q_{nc} + r_{nc})`.
    kappa: Vec<Vec<f64>>,
}

impl<'a> ModalIntegrator<'a> {
    fn new(controls: &'a ControlSignal, source: &'a LiftedSource, sigmas: &'a [f64], y0: &[f64], u0: &[f64]) -> Self {
        let nch = controls.num_channels();
        let z0 = (0..sigmas.len())
            .map(|n| y0[n] - (0..nch).map(|c| source.q[n][c] * u0[c]).sum::<f64>())
            .collect();
        let kappa = (0..sigmas.len())
            .map(|n| {
                (0..controls.sigmas.len())
                    .map(|i| {
                        let si = controls.sigmas[i];
                        -(0..nch)
                            .map(|c| controls.coefficients[c][i] * (si * source.q[n][c] + source.r[n][c]))
                            .sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        ModalIntegrator { controls, source, sigmas, z0, kappa }
    }

    /// `(z(t), y(t), u(t))`.
    fn state(&self, t: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let c = self.controls;
        let nch = c.num_channels();
        let u: Vec<f64> = (0..nch).map(|k| c.eval(k, t)).collect();
        let mut z = Vec::with_capacity(self.sigmas.len());
        let mut y = Vec::with_capacity(self.sigmas.len());
        for (n, &s) in self.sigmas.iter().enumerate() {
            let mut zn = (-s * t).exp() * self.z0[n];
            for (i, &si) in c.sigmas.iter().enumerate() {
                zn += self.kappa[n][i] * (-si * (c.horizon - t)).exp() * exp_integral(s + si, t);
            }
            let lift: f64 = (0..nch).map(|k| self.source.q[n][k] * u[k]).sum();
            z.push(zn);
            y.push(zn + lift);
        }
        (z, y, u)
    }
}

/// Null-control verdict on the retained modes of a terminal state.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    /// Number of eigenspaces checked.
    pub retained: usize,
    pub sigmas: Vec<f64>,
    /// `|⟨y(T), φ_n⟩|` per basis function of the retained eigenspaces.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// `e^{−σ_n T}|⟨y₀, φ_n⟩|`, the same residuals without control.
    pub uncontrolled_residuals: Vec<f64>,
    pub uncontrolled_norm: f64,
    /// Uncontrolled residual of the basis function with the smallest σ.
    pub slowest_uncontrolled: f64,
    /// `‖y(T) − P y(T)‖`, P the projection on the retained eigenspaces.
    pub tail_estimate: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Residual bound for a successful null-control run.
pub const NULL_TOLERANCE: f64 = 1e-6;

pub fn verify_null(cfg: &StarTreeConfig, state: &SimState, retained: usize) -> Result<VerificationReport> {
    if retained == 0 || retained > state.num_modes() {
        return Err(Error::InvalidInput(format!(
            "retained must be between 1 and {}, got {retained}",
            state.num_modes()
        )));
    }
    let count = state.eigenspace.iter().take_while(|&&k| k < retained).count();
    let residuals: Vec<f64> = state.final_modal[..count].iter().map(|v| v.abs()).collect();
    let uncontrolled_residuals: Vec<f64> = (0..count)
        .map(|n| ((-state.sigmas[n] * state.horizon).exp() * state.initial_modal[n]).abs())
        .collect();
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    let uncontrolled_norm = uncontrolled_residuals.iter().map(|v| v * v).sum::<f64>().sqrt();
    let slowest_uncontrolled = uncontrolled_residuals.first().copied().unwrap_or(0.0);
    let tail_estimate = tail(cfg, state, count);
    Ok(VerificationReport {
        retained,
        sigmas: state.sigmas[..count].to_vec(),
        residuals,
        max_residual,
        uncontrolled_residuals,
        uncontrolled_norm,
        slowest_uncontrolled,
        tail_estimate,
        tolerance: NULL_TOLERANCE,
        passed: max_residual < NULL_TOLERANCE,
    })
}

fn tail(cfg: &StarTreeConfig, state: &SimState, count: usize) -> f64 {
    let basis: Vec<&GraphFunction> = state.eigenpairs.iter().flat_map(|e| e.basis.iter()).collect();
    let rule = edge_rule();
    let mut acc = 0.0;
    for edge in 0..cfg.num_edges {
        for (x, w) in rule.mapped(0.0, cfg.edge_length) {
            let full = state.reconstruct_final(cfg, edge, x, 0);
            let proj: f64 = (0..count).map(|n| state.final_modal[n] * basis[n].eval(edge, x, 0)).sum();
            acc += w * (full - proj).powi(2);
        }
    }
    acc.sqrt()
}

/// `⟨y₀, q(0)⟩ − Σ_c ∫₀ᵀ u_c(t) τ_c(q(t)) dt` for the backward adjoint solution with
/// `q(T) = qT`, over the first `num_modes` eigenspaces. Equals `⟨y(T), qT⟩` on
/// those modes.
pub fn duality_check(
    cfg: &StarTreeConfig,
    y0: &GraphFunction,
    controls: &ControlSignal,
    q_t: &GraphFunction,
    num_modes: usize,
) -> Result<f64> {
    let eigenpairs = assemble_with(cfg, num_modes, Parallelism::default())?;
    let y = project(cfg, y0, &eigenpairs)?;
    let q = project(cfg, q_t, &eigenpairs)?;
    let mask = ChannelMask::all(cfg);
    if controls.channels != mask.names() {
        return Err(Error::InvalidInput("control channels do not match the model".into()));
    }
    let mut defect = 0.0;
    for (k, ep) in eigenpairs.iter().enumerate() {
        let full = crate::graph_spectra::full_trace_matrix(ep, cfg, &mask)?;
        let decay = (-ep.sigma * cfg.horizon).exp();
        for i in 0..ep.multiplicity {
            let forced: f64 = (0..mask.len()).map(|c| full[(i, c)] * controls.moment(c, ep.sigma)).sum();
            defect += q[k][i] * (decay * y[k][i] - forced);
        }
    }
    Ok(defect)
}
