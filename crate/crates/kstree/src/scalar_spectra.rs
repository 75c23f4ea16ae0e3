//! Eigenpairs of the scalar problems `λf″ + f⁗ = σf` on `(0, L)`.
//!
//! | problem | conditions at 0        | conditions at L       |
//! |---------|------------------------|-----------------------|
//! | P1      | `f′ = f‴ = 0`          | `f = f′ = 0`          |
//! | P2      | `f = f″ = 0`           | `f = f′ = 0`          |
//! | E1      | `f′ = f‴ = 0`          | `f′ = f‴ = 0`         |
//! | E2      | `f = f″ = 0`           | `f′ = f‴ = 0`         |
//!
//! For `σ > 0` write `β² − α² = λ`, `σ = α²β²`; for `σ < 0` write
//! `β² + γ² = λ`, `σ = −β²γ²` with `γ < β`. E1/E2 are solved in closed form,
//! P1/P2 by bisection on stabilized transcendental equations.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::critical_sets::{is_member, CriticalSetId};
use crate::error::{Error, Result};
use crate::parallel::Parallelism;
use crate::tree_model::{EdgeFunction, StarTreeConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScalarProblemId {
    P1,
    P2,
    E1,
    E2,
}

impl ScalarProblemId {
    pub const ALL: [ScalarProblemId; 4] = [Self::P1, Self::P2, Self::E1, Self::E2];

    pub fn name(self) -> &'static str {
        match self {
            Self::P1 => "P1",
            Self::P2 => "P2",
            Self::E1 => "E1",
            Self::E2 => "E2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "P1" | "p1" => Ok(Self::P1),
            "P2" | "p2" => Ok(Self::P2),
            "E1" | "e1" => Ok(Self::E1),
            "E2" | "e2" => Ok(Self::E2),
            _ => Err(Error::InvalidInput(format!("unknown scalar problem {s:?}"))),
        }
    }

    /// Derivative orders of the two conditions at x = 0 and at x = L.
    fn conditions(self) -> ([usize; 2], [usize; 2]) {
        match self {
            Self::P1 => ([1, 3], [0, 1]),
            Self::P2 => ([0, 2], [0, 1]),
            Self::E1 => ([1, 3], [1, 3]),
            Self::E2 => ([0, 2], [1, 3]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Positive,
    Zero,
    Negative,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Positive => "positive",
            Branch::Zero => "zero",
            Branch::Negative => "negative",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub sigma: f64,
    pub branch: Branch,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Traces {
    pub value_at_0: f64,
    pub dx_at_0: f64,
    pub dxx_at_0: f64,
    pub dxxx_at_0: f64,
    pub value_at_l: f64,
    pub dx_at_l: f64,
    pub dxx_at_l: f64,
    pub dxxx_at_l: f64,
}

impl Traces {
    pub fn of(f: &EdgeFunction, length: f64) -> Self {
        Traces {
            value_at_0: f.eval(0.0, 0),
            dx_at_0: f.eval(0.0, 1),
            dxx_at_0: f.eval(0.0, 2),
            dxxx_at_0: f.eval(0.0, 3),
            value_at_l: f.eval(length, 0),
            dx_at_l: f.eval(length, 1),
            dxx_at_l: f.eval(length, 2),
            dxxx_at_l: f.eval(length, 3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarEigenpair {
    pub problem: ScalarProblemId,
    /// Bracket index n for P1/P2 positive roots, the integer n of the closed
    /// form for E1/E2, the discovery order for P1/P2 negative roots.
    pub index: usize,
    pub params: SpectralParams,
    /// L²(0, L)-normalized.
    pub eigenfunction: EdgeFunction,
    pub traces: Traces,
}

impl ScalarEigenpair {
    pub fn sigma(&self) -> f64 {
        self.params.sigma
    }

    /// Residuals of the four boundary conditions.
    pub fn boundary_residuals(&self, length: f64) -> [f64; 4] {
        let (at0, at_l) = self.problem.conditions();
        let f = &self.eigenfunction;
        [f.eval(0.0, at0[0]), f.eval(0.0, at0[1]), f.eval(length, at_l[0]), f.eval(length, at_l[1])]
    }

    /// max over 20 interior points of |λf″ + f⁗ − σf|.
    pub fn ode_residual(&self, lambda: f64, length: f64) -> f64 {
        let f = &self.eigenfunction;
        (1..=20)
            .map(|i| {
                let x = length * i as f64 / 21.0;
                (lambda * f.eval(x, 2) + f.eval(x, 4) - self.params.sigma * f.eval(x, 0)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Two eigenvalues coincide iff `|σᵢ − σⱼ| < MULTIPLICITY_TOL·(1 + |σᵢ|)`.
pub const MULTIPLICITY_TOL: f64 = 1e-8;

pub fn same_eigenvalue(a: f64, b: f64) -> bool {
    (a - b).abs() < MULTIPLICITY_TOL * (1.0 + a.abs())
}

/// Groups a σ-sorted list into runs of equal eigenvalues.
pub fn cluster(pairs: Vec<ScalarEigenpair>) -> Vec<Vec<ScalarEigenpair>> {
    let mut out: Vec<Vec<ScalarEigenpair>> = Vec::new();
    for p in pairs {
        match out.last_mut() {
            Some(last) if same_eigenvalue(last[0].sigma(), p.sigma()) => last.push(p),
            _ => out.push(vec![p]),
        }
    }
    out
}

const BISECTION_CAP: usize = 200;

/// Bisection for a sign change of `f` on `[lo, hi]`.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Numerical(format!("no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..BISECTION_CAP {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE) || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numerical(format!(
        "bisection did not converge after {BISECTION_CAP} steps on bracket [{lo}, {hi}]"
    )))
}

fn alpha_of(beta: f64, lambda: f64) -> f64 {
    let r = lambda.sqrt();
    ((beta - r).max(0.0) * (beta + r)).sqrt()
}

/// tanh(aL)/a with its limit L at a = 0.
fn tanh_ratio(a: f64, length: f64) -> f64 {
    let t = a * length;
    if t < 1e-6 {
        length * (1.0 - t * t / 3.0)
    } else {
        t.tanh() / a
    }
}

/// sin(gL)/g with its limit L at g = 0.
fn sin_ratio(g: f64, length: f64) -> f64 {
    let t = g * length;
    if t.abs() < 1e-6 {
        length * (1.0 - t * t / 6.0)
    } else {
        t.sin() / g
    }
}

/// P1, σ > 0: Ψ = cos βx + C cosh αx needs β sin βL + α tanh(αL) cos βL = 0.
fn p1_positive_equation(beta: f64, lambda: f64, length: f64) -> f64 {
    let a = alpha_of(beta, lambda);
    beta * (beta * length).sin() + a * (a * length).tanh() * (beta * length).cos()
}

/// P2, σ > 0: β tanh(αL) cos βL − α sin βL = 0, divided by α so that the
/// degenerate α = 0 endpoint is not a root.
fn p2_positive_equation(beta: f64, lambda: f64, length: f64) -> f64 {
    let a = alpha_of(beta, lambda);
    beta * tanh_ratio(a, length) * (beta * length).cos() - (beta * length).sin()
}

/// P1, σ < 0. Ψ′(0) = Ψ‴(0) = 0 leaves Ψ = C₁ cos βx + C₃ cos γx (the sine
/// system has determinant βγ(β² − γ²) ≠ 0); Ψ(L) = Ψ′(L) = 0 then gives
/// det [[cos βL, cos γL], [β sin βL, γ sin γL]] = γ sin γL cos βL − β cos γL sin βL.
fn p1_negative_equation(gamma: f64, lambda: f64, length: f64) -> f64 {
    let beta = (lambda - gamma * gamma).sqrt();
    gamma * (gamma * length).sin() * (beta * length).cos() - beta * (gamma * length).cos() * (beta * length).sin()
}

/// P2, σ < 0. Φ(0) = Φ″(0) = 0 leaves Φ = C₂ sin βx + C₄ sin γx; Φ(L) = Φ′(L) = 0
/// gives β sin γL cos βL − γ cos γL sin βL = 0, divided here by γ to remove the
/// trivial root at γ = 0.
fn p2_negative_equation(gamma: f64, lambda: f64, length: f64) -> f64 {
    let beta = (lambda - gamma * gamma).sqrt();
    beta * sin_ratio(gamma, length) * (beta * length).cos() - (gamma * length).cos() * (beta * length).sin()
}

/// Normalizes, fixes the sign and records traces.
fn finalize(problem: ScalarProblemId, index: usize, params: SpectralParams, raw: EdgeFunction, length: f64) -> Result<ScalarEigenpair> {
    let norm = raw.norm(length);
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Numerical(format!("{} eigenfunction at σ = {} has zero norm", problem.name(), params.sigma)));
    }
    let mut f = raw.scaled(1.0 / norm);
    let dxx = f.eval(length, 2);
    let val = f.eval(length, 0);
    let flip = if dxx.abs() > 1e-8 {
        dxx < 0.0
    } else if val.abs() > 1e-8 {
        val < 0.0
    } else {
        f.terms().first().is_some_and(|t| t.coefficient < 0.0)
    };
    if flip {
        f = f.scaled(-1.0);
    }
    let traces = Traces::of(&f, length);
    Ok(ScalarEigenpair { problem, index, params, eigenfunction: f, traces })
}

fn positive_params(alpha: f64, beta: f64) -> SpectralParams {
    SpectralParams { sigma: alpha * alpha * beta * beta, branch: Branch::Positive, alpha, beta, gamma: 0.0 }
}

fn negative_params(beta: f64, gamma: f64) -> SpectralParams {
    SpectralParams { sigma: -beta * beta * gamma * gamma, branch: Branch::Negative, alpha: 0.0, beta, gamma }
}

fn zero_params(lambda: f64) -> SpectralParams {
    SpectralParams { sigma: 0.0, branch: Branch::Zero, alpha: 0.0, beta: lambda.sqrt(), gamma: 0.0 }
}

/// Root of the P1/P2 positive equation in the bracket `βL ∈ (nπ − π/2, nπ + π/2)`,
/// restricted to `β > √λ`. At most one root exists per bracket.
pub fn bracket_root(problem: ScalarProblemId, cfg: &StarTreeConfig, n: usize) -> Result<Option<ScalarEigenpair>> {
    let (lambda, length) = (cfg.lambda, cfg.edge_length);
    let equation: fn(f64, f64, f64) -> f64 = match problem {
        ScalarProblemId::P1 => p1_positive_equation,
        ScalarProblemId::P2 => p2_positive_equation,
        _ => return Err(Error::InvalidInput("bracketed roots exist only for P1 and P2".into())),
    };
    let nf = n as f64;
    let hi = (nf * PI + 0.5 * PI) / length;
    let lo = ((nf * PI - 0.5 * PI) / length).max(lambda.sqrt());
    if hi <= lo {
        return Ok(None);
    }
    let f = |b: f64| equation(b, lambda, length);
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 || flo.signum() == fhi.signum() {
        return Ok(None);
    }
    let beta = bisect(f, lo, hi).map_err(|e| Error::Numerical(format!("{} bracket n = {n}: {e}", problem.name())))?;
    let alpha = alpha_of(beta, lambda);
    let raw = if problem == ScalarProblemId::P1 {
        EdgeFunction::cos(1.0, beta).add(&EdgeFunction::cosh_normalized(-(beta * length).cos(), alpha, length))
    } else {
        EdgeFunction::sin(1.0, beta).add(&EdgeFunction::sinh_normalized(-(beta * length).sin(), alpha, length))
    };
    finalize(problem, n, positive_params(alpha, beta), raw, length).map(Some)
}

/// First `count` positive eigenvalues in increasing order.
pub fn positive_eigenvalues(problem: ScalarProblemId, cfg: &StarTreeConfig, count: usize) -> Result<Vec<ScalarEigenpair>> {
    positive_eigenvalues_with(problem, cfg, count, Parallelism::default())
}

pub fn positive_eigenvalues_with(problem: ScalarProblemId, cfg: &StarTreeConfig, count: usize, par: Parallelism) -> Result<Vec<ScalarEigenpair>> {
    if count == 0 {
        return Err(Error::InvalidInput("count must be >= 1".into()));
    }
    let (lambda, length) = (cfg.lambda, cfg.edge_length);
    let kmin = lambda.sqrt() * length / PI;
    match problem {
        ScalarProblemId::E1 | ScalarProblemId::E2 => {
            let odd = problem == ScalarProblemId::E2;
            let mut out = Vec::with_capacity(count);
            let mut n = 0usize;
            while out.len() < count {
                let k = closed_form_frequency(odd, n, length);
                if k * k > lambda * (1.0 + ZERO_SNAP) {
                    let alpha = alpha_of(k, lambda);
                    let mut params = positive_params(alpha, k);
                    params.sigma = k * k * (k * k - lambda);
                    out.push(finalize(problem, n, params, closed_form_raw(odd, k), length)?);
                }
                n += 1;
            }
            Ok(out)
        }
        ScalarProblemId::P1 | ScalarProblemId::P2 => {
            let first = (kmin + 0.5).floor() as usize;
            let mut out = Vec::with_capacity(count);
            let mut next = first;
            while out.len() < count {
                let batch = count - out.len() + 1;
                let found = par.map_range(batch, |i| bracket_root(problem, cfg, next + i));
                for r in found {
                    if let Some(p) = r? {
                        if out.len() < count {
                            out.push(p);
                        }
                    }
                }
                next += batch;
            }
            Ok(out)
        }
    }
}

/// Relative tolerance for deciding that a closed-form frequency satisfies k² = λ.
const ZERO_SNAP: f64 = 1e-9;

fn closed_form_frequency(odd: bool, n: usize, length: f64) -> f64 {
    if odd {
        (2 * n + 1) as f64 * PI / (2.0 * length)
    } else {
        n as f64 * PI / length
    }
}

fn closed_form_raw(odd: bool, k: f64) -> EdgeFunction {
    if odd {
        EdgeFunction::sin(1.0, k)
    } else {
        EdgeFunction::cos(1.0, k)
    }
}

/// σ = 0 eigenpairs: none, one, or two (E1 with λ ∈ N₂).
pub fn zero_eigenvalue(problem: ScalarProblemId, cfg: &StarTreeConfig) -> Result<Vec<ScalarEigenpair>> {
    let (lambda, length) = (cfg.lambda, cfg.edge_length);
    let p = zero_params(lambda);
    match problem {
        ScalarProblemId::E1 => {
            let mut out = vec![finalize(problem, 0, p, EdgeFunction::monomial(1.0, 0), length)?];
            let m = is_member(CriticalSetId::N2, lambda, length);
            if let Some((k, _)) = m.witness {
                let beta = k as f64 * PI / length;
                let mut pp = p;
                pp.beta = beta;
                out.push(finalize(problem, k as usize, pp, EdgeFunction::cos(1.0, beta), length)?);
            }
            Ok(out)
        }
        ScalarProblemId::E2 => {
            let m = is_member(CriticalSetId::N3, lambda, length);
            match m.witness {
                Some((n, _)) => {
                    let beta = (2 * n + 1) as f64 * PI / (2.0 * length);
                    let mut pp = p;
                    pp.beta = beta;
                    Ok(vec![finalize(problem, n as usize, pp, EdgeFunction::sin(1.0, beta), length)?])
                }
                None => Ok(Vec::new()),
            }
        }
        ScalarProblemId::P1 | ScalarProblemId::P2 => zero_by_determinant(problem, cfg),
    }
}

/// Row-scaled determinant tolerance for the σ = 0 boundary matrix.
pub const ZERO_DETERMINANT_TOL: f64 = 1e-10;

/// Boundary matrix of the σ = 0 general solution `C₁ + C₂x + C₃ cos kx + C₄ sin kx`,
/// `k = √λ`, with each row scaled to unit length.
pub fn zero_boundary_matrix(problem: ScalarProblemId, cfg: &StarTreeConfig) -> Matrix4<f64> {
    let (lambda, length) = (cfg.lambda, cfg.edge_length);
    let k = lambda.sqrt();
    let basis = [
        EdgeFunction::monomial(1.0, 0),
        EdgeFunction::monomial(1.0, 1),
        EdgeFunction::cos(1.0, k),
        EdgeFunction::sin(1.0, k),
    ];
    let (at0, at_l) = problem.conditions();
    let rows = [(0.0, at0[0]), (0.0, at0[1]), (length, at_l[0]), (length, at_l[1])];
    let mut m = Matrix4::zeros();
    for (i, &(x, d)) in rows.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            m[(i, j)] = b.eval(x, d);
        }
        let n = m.row(i).norm();
        if n > 0.0 {
            m.row_mut(i).scale_mut(1.0 / n);
        }
    }
    m
}

fn zero_by_determinant(problem: ScalarProblemId, cfg: &StarTreeConfig) -> Result<Vec<ScalarEigenpair>> {
    let m = zero_boundary_matrix(problem, cfg);
    if m.determinant().abs() >= ZERO_DETERMINANT_TOL {
        return Ok(Vec::new());
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("svd failed".into()))?;
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let c: Vector4<f64> = v_t.row(imin).transpose();
    let k = cfg.lambda.sqrt();
    let raw = EdgeFunction::linear_combination(&[
        (c[0], &EdgeFunction::monomial(1.0, 0)),
        (c[1], &EdgeFunction::monomial(1.0, 1)),
        (c[2], &EdgeFunction::cos(1.0, k)),
        (c[3], &EdgeFunction::sin(1.0, k)),
    ]);
    Ok(vec![finalize(problem, 0, zero_params(cfg.lambda), raw, cfg.edge_length)?])
}

/// Negative eigenpairs in increasing σ; a double eigenvalue appears twice with equal σ.
pub fn negative_eigenvalues(problem: ScalarProblemId, cfg: &StarTreeConfig) -> Result<Vec<ScalarEigenpair>> {
    let (lambda, length) = (cfg.lambda, cfg.edge_length);
    match problem {
        ScalarProblemId::E1 | ScalarProblemId::E2 => {
            let odd = problem == ScalarProblemId::E2;
            let (set, start) = if odd { (CriticalSetId::Nodd, 0) } else { (CriticalSetId::N1, 1) };
            let double = is_member(set, lambda, length).witness;
            let mut out = Vec::new();
            let mut n = start;
            loop {
                let k = closed_form_frequency(odd, n, length);
                if k * k >= lambda * (1.0 - ZERO_SNAP) {
                    break;
                }
                let other = (lambda - k * k).sqrt();
                let (beta, gamma) = if k >= other { (k, other) } else { (other, k) };
                let mut params = negative_params(beta, gamma);
                params.sigma = k * k * (k * k - lambda);
                if let Some((a, b)) = double {
                    let (ka, kb) = (closed_form_frequency(odd, a as usize, length), closed_form_frequency(odd, b as usize, length));
                    if n == a as usize || n == b as usize {
                        // exact coincidence: σ = −k_a² k_b² for both members
                        params.sigma = -ka * ka * kb * kb;
                        params.beta = kb;
                        params.gamma = ka;
                    }
                }
                out.push(finalize(problem, n, params, closed_form_raw(odd, k), length)?);
                n += 1;
            }
            out.sort_by(|a, b| a.sigma().total_cmp(&b.sigma()).then(a.index.cmp(&b.index)));
            Ok(out)
        }
        ScalarProblemId::P1 | ScalarProblemId::P2 => negative_by_scan(problem, cfg),
    }
}

/// Threshold of the double-root safeguard on the determinant and its derivative.
pub const DOUBLE_ROOT_TOL: f64 = 1e-9;

/// Sign scan in γ over `(0, √(λ/2))` with bisection refinement.
fn negative_by_scan(problem: ScalarProblemId, cfg: &StarTreeConfig) -> Result<Vec<ScalarEigenpair>> {
    let (lambda, length) = (cfg.lambda, cfg.edge_length);
    let equation: fn(f64, f64, f64) -> f64 = match problem {
        ScalarProblemId::P1 => p1_negative_equation,
        _ => p2_negative_equation,
    };
    let f = |g: f64| equation(g, lambda, length);
    let gmax = (0.5 * lambda).sqrt();
    // γ = β at γmax is a degenerate solution of both equations, not an eigenvalue
    let (lo, hi) = (gmax * 1e-9, gmax * (1.0 - 1e-6));
    let nodes = 2000usize.max((400.0 * length * lambda.sqrt()).ceil() as usize);
    let h = (hi - lo) / nodes as f64;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev = (lo, f(lo));
    for i in 1..=nodes {
        let g = lo + h * i as f64;
        let v = f(g);
        if prev.1 == 0.0 {
            roots.push(prev.0);
        } else if v != 0.0 && v.signum() != prev.1.signum() {
            roots.push(bisect(f, prev.0, g)?);
        } else if v.abs() < DOUBLE_ROOT_TOL && i < nodes {
            let slope = (f(g + 0.5 * h) - f(g - 0.5 * h)) / h;
            if slope.abs() < DOUBLE_ROOT_TOL {
                // suspected double root: refine |f| by golden-section minimization
                let gm = golden_min(|x| f(x).abs(), g - h, g + h);
                if f(gm).abs() < 1e-12 && !roots.iter().any(|r| (r - gm).abs() < h) {
                    roots.push(gm);
                }
            }
        }
        prev = (g, v);
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * gmax);
    let mut out = Vec::with_capacity(roots.len());
    for (i, gamma) in roots.into_iter().enumerate() {
        let beta = (lambda - gamma * gamma).sqrt();
        let (bl, gl) = (beta * length, gamma * length);
        let (r1, r2, basis): ([f64; 2], [f64; 2], [EdgeFunction; 2]) = if problem == ScalarProblemId::P1 {
            (
                [bl.cos(), gl.cos()],
                [beta * bl.sin(), gamma * gl.sin()],
                [EdgeFunction::cos(1.0, beta), EdgeFunction::cos(1.0, gamma)],
            )
        } else {
            (
                [bl.sin(), gl.sin()],
                [beta * bl.cos(), gamma * gl.cos()],
                [EdgeFunction::sin(1.0, beta), EdgeFunction::sin(1.0, gamma)],
            )
        };
        // null vector of the better-conditioned boundary row
        let n1 = r1[0].hypot(r1[1]);
        let n2 = r2[0].hypot(r2[1]);
        let r = if n1 >= n2 { r1 } else { r2 };
        let raw = EdgeFunction::linear_combination(&[(r[1], &basis[0]), (-r[0], &basis[1])]);
        out.push(finalize(problem, i, negative_params(beta, gamma), raw, length)?);
    }
    out.sort_by(|a, b| a.sigma().total_cmp(&b.sigma()));
    Ok(out)
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()) {
            break;
        }
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    0.5 * (a + b)
}

/// All negative and zero eigenpairs plus the first `positive_count` positive ones, sorted.
pub fn spectrum(problem: ScalarProblemId, cfg: &StarTreeConfig, positive_count: usize) -> Result<Vec<ScalarEigenpair>> {
    spectrum_with(problem, cfg, positive_count, Parallelism::default())
}

pub fn spectrum_with(problem: ScalarProblemId, cfg: &StarTreeConfig, positive_count: usize, par: Parallelism) -> Result<Vec<ScalarEigenpair>> {
    let mut all = negative_eigenvalues(problem, cfg)?;
    all.extend(zero_eigenvalue(problem, cfg)?);
    if positive_count > 0 {
        all.extend(positive_eigenvalues_with(problem, cfg, positive_count, par)?);
    }
    all.sort_by(|a, b| a.sigma().total_cmp(&b.sigma()).then(a.index.cmp(&b.index)));
    Ok(all)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsymptoticCheck {
    pub beta_n: f64,
    pub predicted: f64,
    pub deviation: f64,
}

/// Compares the root in bracket n with `nπ/L ∓ π/(4L)` (− for P1, + for P2).
pub fn asymptotic_check(problem: ScalarProblemId, cfg: &StarTreeConfig, n: usize) -> Result<AsymptoticCheck> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    let sign = match problem {
        ScalarProblemId::P1 => -1.0,
        ScalarProblemId::P2 => 1.0,
        _ => return Err(Error::InvalidInput("asymptotics are defined for P1 and P2".into())),
    };
    let l = cfg.edge_length;
    let root = bracket_root(problem, cfg, n)?
        .ok_or_else(|| Error::Numerical(format!("no {} root in bracket {n}", problem.name())))?;
    let predicted = n as f64 * PI / l + sign * PI / (4.0 * l);
    let beta_n = root.params.beta;
    Ok(AsymptoticCheck { beta_n, predicted, deviation: (beta_n - predicted).abs() })
}
