//! Moment method: biorthogonal families to `{e^{−σₙt}}` on (0, T), per-eigenvalue
//! moment targets and boundary controls as exponential sums.
//!
//! Projecting the controlled equation on an eigenfunction φ gives
//! `d/dt ⟨y, φ⟩ = −σ⟨y, φ⟩ − Σ_c τ_c(φ) u_c`, so `y(T) = 0` on the eigenspace iff
//! `Σ_c τ_c(φ_i) μ_c = e^{−σT} ⟨y₀, φ_i⟩` with `μ_c = ∫₀ᵀ u_c(T−t) e^{−σt} dt`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::critical_sets::{is_member, CriticalSetId};
use crate::error::{Error, Result, UncontrollableDirection};
use crate::graph_spectra::{
    assemble_with, full_trace_matrix, left_null_space, ChannelKind, ChannelMask, GraphEigenpair, Origin, RANK_TOL,
};
use crate::parallel::Parallelism;
use crate::scalar_spectra::same_eigenvalue;
use crate::tree_model::{GraphFunction, Model, StarTreeConfig};

/// Largest number of distinct exponents in a family.
pub const MAX_MODES: usize = 16;
/// Gram condition numbers above this are refused.
pub const CONDITION_LIMIT: f64 = 1e14;
/// Relative residual above which a solved moment system is rejected.
pub const TARGET_RESIDUAL_TOL: f64 = 1e-8;

/// `∫₀ᵗ e^{−s r} dr`, equal to `t` at `s = 0`.
pub fn exp_integral(s: f64, t: f64) -> f64 {
    if s == 0.0 {
        t
    } else {
        -(-s * t).exp_m1() / s
    }
}

/// `ψₙ(t) = Σⱼ Aₙⱼ e^{−σⱼt}` with `∫₀ᵀ ψₙ e^{−σⱼt} dt = δₙⱼ`.
#[derive(Clone, Debug, Serialize)]
pub struct BiorthogonalFamily {
    pub sigmas: Vec<f64>,
    pub horizon: f64,
    /// Row n holds the coefficients of ψₙ.
    pub coeffs: Vec<Vec<f64>>,
    pub gram_condition: f64,
}

/// `Gᵢⱼ = ∫₀ᵀ e^{−(σᵢ+σⱼ)t} dt`.
pub fn gram_matrix(sigmas: &[f64], horizon: f64) -> DMatrix<f64> {
    let m = sigmas.len();
    DMatrix::from_fn(m, m, |i, j| exp_integral(sigmas[i] + sigmas[j], horizon))
}

pub fn build_biorthogonal(sigmas: &[f64], horizon: f64) -> Result<BiorthogonalFamily> {
    let m = sigmas.len();
    if m == 0 || m > MAX_MODES {
        return Err(Error::InvalidInput(format!("need 1 to {MAX_MODES} exponents, got {m}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    if let Some(s) = sigmas.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidInput(format!("exponent {s} is not finite")));
    }
    for w in sigmas.windows(2) {
        if same_eigenvalue(w[0], w[1]) {
            return Err(Error::DuplicateExponent(w[1]));
        }
        if w[1] < w[0] {
            return Err(Error::InvalidInput("exponents must be strictly increasing".into()));
        }
    }
    let g = gram_matrix(sigmas, horizon);
    let eig = SymmetricEigen::new(g.clone()).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let finite = g.iter().all(|v| v.is_finite()) && eig.iter().all(|v| v.is_finite());
    let gram_condition = if finite && lo > 0.0 { hi / lo } else { f64::INFINITY };
    let refuse = || Error::Conditioning { condition: gram_condition, limit: CONDITION_LIMIT };
    if gram_condition > CONDITION_LIMIT {
        return Err(refuse());
    }
    let d = DMatrix::from_diagonal(&DVector::from_iterator(m, (0..m).map(|i| 1.0 / g[(i, i)].sqrt())));
    let scaled = &d * &g * &d;
    let chol = scaled.cholesky().ok_or_else(refuse)?;
    // G Aᵀ = I with G = D⁻¹ Ĝ D⁻¹, so Aᵀ = D Ĝ⁻¹ D
    let mut at = &d * chol.solve(&d);
    let residual = DMatrix::identity(m, m) - &g * &at;
    at += &d * chol.solve(&(&d * residual));
    let coeffs = (0..m).map(|n| (0..m).map(|j| at[(j, n)]).collect()).collect();
    Ok(BiorthogonalFamily { sigmas: sigmas.to_vec(), horizon, coeffs, gram_condition })
}

impl BiorthogonalFamily {
    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn psi(&self, n: usize, t: f64) -> f64 {
        self.coeffs[n].iter().zip(&self.sigmas).map(|(a, s)| a * (-s * t).exp()).sum()
    }

    /// `∫₀ᵀ ψₙ(t) e^{−s t} dt` in closed form.
    pub fn moment(&self, n: usize, s: f64) -> f64 {
        self.coeffs[n].iter().zip(&self.sigmas).map(|(a, sj)| a * exp_integral(sj + s, self.horizon)).sum()
    }

    /// `max |∫ψₙ e^{−σⱼt} − δₙⱼ|` from the closed-form moments.
    pub fn biorthogonality_defect(&self) -> f64 {
        let m = self.len();
        let mut worst: f64 = 0.0;
        for n in 0..m {
            for j in 0..m {
                let delta = if n == j { 1.0 } else { 0.0 };
                worst = worst.max((self.moment(n, self.sigmas[j]) - delta).abs());
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TargetOptions {
    /// Route difference-type eigenvalues through the b-channels instead of the a-channels.
    pub route_b: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Route {
    /// Zero initial data on this eigenspace.
    Zero,
    /// Whole target on the first active channel.
    Direct,
    /// Equal share on every active channel.
    EqualSplit,
    /// One 2×2 system shared by all active edges.
    SharedPair,
    /// `M⁻¹` applied to the raw difference-basis targets.
    Bidiagonal,
    /// Per-edge 2×2 systems followed by `M⁻¹`.
    BidiagonalPair,
    /// Minimum-norm least-squares solution.
    MinimumNorm,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeTarget {
    /// Position in the assembled spectrum.
    pub index: usize,
    pub sigma: f64,
    pub multiplicity: usize,
    /// `⟨y₀, φᵢ⟩` in the orthonormal eigenspace basis.
    pub coordinates: Vec<f64>,
    /// `μ_c = ∫₀ᵀ u_c(T−t) e^{−σt} dt` for every channel; zero on inactive ones.
    pub moments: Vec<f64>,
    pub route: Route,
    /// `‖Tμ − e^{−σT}y‖ / ‖e^{−σT}y‖`.
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentTargets {
    pub channels: Vec<String>,
    pub active: Vec<bool>,
    pub horizon: f64,
    pub modes: Vec<ModeTarget>,
}

impl MomentTargets {
    pub fn sigmas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.sigma).collect()
    }
}

/// Coordinates of `y` in every assembled eigenspace.
pub fn project(cfg: &StarTreeConfig, y: &GraphFunction, eigenpairs: &[GraphEigenpair]) -> Result<Vec<Vec<f64>>> {
    if y.num_edges() != cfg.num_edges {
        return Err(Error::InvalidInput(format!(
            "initial datum has {} components, expected {}",
            y.num_edges(),
            cfg.num_edges
        )));
    }
    eigenpairs.iter().map(|ep| ep.coordinates(y, cfg)).collect()
}

/// `Σ cᵢ φᵢ` over the flattened bases of `eigenpairs`; missing coefficients are zero.
pub fn modal_combination(cfg: &StarTreeConfig, eigenpairs: &[GraphEigenpair], coefficients: &[f64]) -> Result<GraphFunction> {
    let basis: Vec<&GraphFunction> = eigenpairs.iter().flat_map(|e| e.basis.iter()).collect();
    if coefficients.len() > basis.len() {
        return Err(Error::InvalidInput(format!(
            "{} coefficients for {} basis functions",
            coefficients.len(),
            basis.len()
        )));
    }
    let parts: Vec<(f64, &GraphFunction)> = coefficients.iter().copied().zip(basis).collect();
    GraphFunction::linear_combination(&parts, cfg.num_edges)
}

/// Splits a flat coefficient list into per-eigenspace coordinates.
pub fn split_coefficients(eigenpairs: &[GraphEigenpair], coefficients: &[f64]) -> Result<Vec<Vec<f64>>> {
    let total: usize = eigenpairs.iter().map(|e| e.multiplicity).sum();
    if coefficients.len() > total {
        return Err(Error::InvalidInput(format!("{} coefficients for {total} basis functions", coefficients.len())));
    }
    let mut out = Vec::with_capacity(eigenpairs.len());
    let mut pos = 0;
    for ep in eigenpairs {
        out.push((0..ep.multiplicity).map(|i| coefficients.get(pos + i).copied().unwrap_or(0.0)).collect());
        pos += ep.multiplicity;
    }
    Ok(out)
}

pub fn compute_targets(
    cfg: &StarTreeConfig,
    y0: &GraphFunction,
    eigenpairs: &[GraphEigenpair],
    mask: &ChannelMask,
    opts: TargetOptions,
) -> Result<MomentTargets> {
    let coords = project(cfg, y0, eigenpairs)?;
    compute_targets_modal(cfg, eigenpairs, &coords, mask, opts)
}

/// Targets from eigenspace coordinates of the initial datum.
pub fn compute_targets_modal(
    cfg: &StarTreeConfig,
    eigenpairs: &[GraphEigenpair],
    coords: &[Vec<f64>],
    mask: &ChannelMask,
    opts: TargetOptions,
) -> Result<MomentTargets> {
    if coords.len() != eigenpairs.len() {
        return Err(Error::InvalidInput("one coordinate vector per eigenspace required".into()));
    }
    let modes = eigenpairs
        .iter()
        .zip(coords)
        .enumerate()
        .map(|(index, (ep, y))| mode_target(cfg, index, ep, y, mask, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentTargets { channels: mask.names(), active: mask.active.clone(), horizon: cfg.horizon, modes })
}

fn mode_target(
    cfg: &StarTreeConfig,
    index: usize,
    ep: &GraphEigenpair,
    y: &[f64],
    mask: &ChannelMask,
    opts: TargetOptions,
) -> Result<ModeTarget> {
    if y.len() != ep.multiplicity {
        return Err(Error::InvalidInput(format!("eigenspace {index} needs {} coordinates", ep.multiplicity)));
    }
    let full = full_trace_matrix(ep, cfg, mask)?;
    let active = mask.active_indices();
    let t = DMatrix::from_fn(ep.multiplicity, active.len(), |i, j| full[(i, active[j])]);
    let report = left_null_space(&t);
    if report.deficiency > 0 {
        return Err(Error::Uncontrollable(Box::new(null_direction(ep, index, y, &report))));
    }
    let decay = (-ep.sigma * cfg.horizon).exp();
    let rhs: Vec<f64> = y.iter().map(|v| decay * v).collect();
    let mut moments = vec![0.0; mask.len()];
    let route = if rhs.iter().all(|&v| v == 0.0) {
        Route::Zero
    } else {
        match closed_form(cfg, ep, &full, mask, &rhs, opts) {
            Some((route, mu)) => {
                moments = mu;
                route
            }
            None => {
                let mu = minimum_norm(&t, &rhs);
                for (j, &c) in active.iter().enumerate() {
                    moments[c] = mu[j];
                }
                Route::MinimumNorm
            }
        }
    };
    let scale = rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let unit = if scale > 0.0 { scale } else { 1.0 };
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|r| (r / unit).powi(2)).sum::<f64>().sqrt();
    let misfit = norm(&mut (0..ep.multiplicity)
        .map(|i| (0..mask.len()).map(|c| full[(i, c)] * moments[c]).sum::<f64>() - rhs[i]));
    let size = norm(&mut rhs.iter().copied());
    let residual = if size > 0.0 { misfit / size } else { misfit };
    if residual.is_nan() || residual > TARGET_RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "moment system at sigma = {} solved with relative residual {residual:.3e}",
            ep.sigma
        )));
    }
    Ok(ModeTarget {
        index,
        sigma: ep.sigma,
        multiplicity: ep.multiplicity,
        coordinates: y.to_vec(),
        moments,
        route,
        residual,
    })
}

fn null_direction(ep: &GraphEigenpair, index: usize, y: &[f64], report: &crate::graph_spectra::RankReport) -> UncontrollableDirection {
    let m = ep.multiplicity;
    let mut p = vec![0.0; m];
    for nv in &report.null_directions {
        let c: f64 = nv.iter().zip(y).map(|(a, b)| a * b).sum();
        for i in 0..m {
            p[i] += c * nv[i];
        }
    }
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let np = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut direction = if ny > 0.0 && np > 1e-12 * ny { p.iter().map(|v| v / np).collect() } else { report.null_directions[0].clone() };
    // fix the sign: largest component positive
    let big = direction.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
    if big < 0.0 {
        direction.iter_mut().for_each(|v| *v = -*v);
    }
    let n_edges = ep.profile.first().map_or(0, |p| p.weights.len());
    let mut edge_profile = vec![vec![0.0; n_edges]; ep.scalars.len()];
    for (i, prof) in ep.profile.iter().enumerate() {
        for (e, w) in edge_profile[prof.scalar].iter_mut().zip(&prof.weights) {
            *e += direction[i] * w;
        }
    }
    UncontrollableDirection {
        sigma: ep.sigma,
        index,
        multiplicity: m,
        rank: report.rank,
        direction,
        edge_profile,
    }
}

fn minimum_norm(t: &DMatrix<f64>, rhs: &[f64]) -> Vec<f64> {
    let svd = t.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors");
    let vt = svd.v_t.as_ref().expect("right singular vectors");
    let s = &svd.singular_values;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let b = DVector::from_column_slice(rhs);
    let mut x = DVector::zeros(t.ncols());
    for k in 0..s.len() {
        if s[k] > RANK_TOL * smax {
            let c = u.column(k).dot(&b) / s[k];
            x += vt.row(k).transpose() * c;
        }
    }
    x.iter().copied().collect()
}

/// `μ_k = Σ_{l ≥ k} v_l`, the inverse of the bidiagonal difference matrix.
fn upper_ones(v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    let mut acc = 0.0;
    for l in (0..v.len()).rev() {
        acc += v[l];
        out[l] = acc;
    }
    out
}

/// `⟨y, Φ(e_l − e_{l+1})/√2⟩` for the basis functions of scalar `j`.
fn raw_difference_targets(ep: &GraphEigenpair, rhs: &[f64], j: usize, n: usize) -> Vec<f64> {
    (0..n - 1)
        .map(|l| {
            ep.profile
                .iter()
                .zip(rhs)
                .filter(|(p, _)| p.scalar == j)
                .map(|(p, r)| r * (p.weights[l] - p.weights[l + 1]) / std::f64::consts::SQRT_2)
                .sum()
        })
        .collect()
}

fn is_zero_trace(v: f64, scale: f64) -> bool {
    v.abs() <= RANK_TOL * scale
}

/// Closed-form constructions when only the last edge is uncontrolled.
fn closed_form(
    cfg: &StarTreeConfig,
    ep: &GraphEigenpair,
    full: &DMatrix<f64>,
    mask: &ChannelMask,
    rhs: &[f64],
    opts: TargetOptions,
) -> Option<(Route, Vec<f64>)> {
    let n = cfg.num_edges;
    let nch = mask.len();
    let mut mu = vec![0.0; nch];
    let scale = full.amax().max(f64::MIN_POSITIVE);
    if let Model::Interval(_) = cfg.model {
        if ep.multiplicity != 1 || !mask.active.iter().all(|&a| a) {
            return None;
        }
        let nonzero: Vec<usize> = (0..nch).filter(|&c| !is_zero_trace(full[(0, c)], scale)).collect();
        for &c in &nonzero {
            mu[c] = rhs[0] / (nonzero.len() as f64 * full[(0, c)]);
        }
        let route = if nonzero.len() == 1 { Route::Direct } else { Route::EqualSplit };
        return Some((route, mu));
    }
    let last_edge_only = mask.channels.iter().zip(&mask.active).all(|(c, &a)| a == (c.edge + 1 != n));
    if !last_edge_only || ep.origin == Origin::Mixed {
        return None;
    }
    let l = cfg.edge_length;
    let lam = cfg.lambda;
    let col = |edge: usize, kind: ChannelKind| mask.channels.iter().position(|c| c.edge == edge && c.kind == kind).unwrap();
    let sqrt2 = std::f64::consts::SQRT_2;
    match (cfg.model, ep.origin, ep.scalars.len()) {
        (Model::ModelI, Origin::SumProblem, 1) => {
            mu[col(0, ChannelKind::U)] = rhs[0] / full[(0, col(0, ChannelKind::U))];
            Some((Route::Direct, mu))
        }
        (Model::ModelI, Origin::DifferenceProblem, 1) => {
            let phi_xx = ep.scalars[0].eigenfunction.eval(l, 2);
            let v: Vec<f64> = raw_difference_targets(ep, rhs, 0, n).iter().map(|y| sqrt2 * y / phi_xx).collect();
            for (k, m) in upper_ones(&v).into_iter().enumerate() {
                mu[col(k, ChannelKind::U)] = m;
            }
            Some((Route::Bidiagonal, mu))
        }
        (Model::ModelII, Origin::SumProblem, 1) => {
            let (ta, tb) = (full[(0, col(0, ChannelKind::A))], full[(0, col(0, ChannelKind::B))]);
            let share: Vec<(ChannelKind, f64)> = [(ChannelKind::A, ta), (ChannelKind::B, tb)]
                .into_iter()
                .filter(|(_, t)| !is_zero_trace(*t, scale))
                .collect();
            let parts = (share.len() * (n - 1)) as f64;
            for k in 0..n - 1 {
                for &(kind, t) in &share {
                    mu[col(k, kind)] = rhs[0] / (parts * t);
                }
            }
            Some((Route::EqualSplit, mu))
        }
        (Model::ModelII, Origin::SumProblem, 2) => {
            let a = DMatrix::from_fn(2, 2, |i, j| {
                let kind = if j == 0 { ChannelKind::A } else { ChannelKind::B };
                full[(i, col(0, kind))]
            });
            let b = DVector::from_iterator(2, rhs.iter().map(|r| r / (n - 1) as f64));
            let x = a.lu().solve(&b)?;
            for k in 0..n - 1 {
                mu[col(k, ChannelKind::A)] = x[0];
                mu[col(k, ChannelKind::B)] = x[1];
            }
            Some((Route::SharedPair, mu))
        }
        (Model::ModelII, Origin::DifferenceProblem, 1) => {
            let f = &ep.scalars[0].eigenfunction;
            let (a, b) = (lam * f.eval(l, 0) + f.eval(l, 2), f.eval(l, 0));
            let tscale = a.abs().max(b.abs());
            let use_b = (opts.route_b && !is_zero_trace(b, tscale)) || is_zero_trace(a, tscale);
            let (kind, t) = if use_b { (ChannelKind::B, b) } else { (ChannelKind::A, a) };
            let v: Vec<f64> = raw_difference_targets(ep, rhs, 0, n).iter().map(|y| sqrt2 * y / t).collect();
            for (k, m) in upper_ones(&v).into_iter().enumerate() {
                mu[col(k, kind)] = m;
            }
            Some((Route::Bidiagonal, mu))
        }
        (Model::ModelII, Origin::DifferenceProblem, 2) => {
            let rows: Vec<[f64; 2]> = ep
                .scalars
                .iter()
                .map(|s| {
                    let f = &s.eigenfunction;
                    [lam * f.eval(l, 0) + f.eval(l, 2), f.eval(l, 0)]
                })
                .collect();
            let a = DMatrix::from_fn(2, 2, |i, j| rows[i][j]);
            let lu = a.lu();
            let y0 = raw_difference_targets(ep, rhs, 0, n);
            let y1 = raw_difference_targets(ep, rhs, 1, n);
            let mut abar = vec![0.0; n - 1];
            let mut bbar = vec![0.0; n - 1];
            for k in 0..n - 1 {
                let x = lu.solve(&DVector::from_vec(vec![sqrt2 * y0[k], sqrt2 * y1[k]]))?;
                abar[k] = x[0];
                bbar[k] = x[1];
            }
            for (k, (ma, mb)) in upper_ones(&abar).into_iter().zip(upper_ones(&bbar)).enumerate() {
                mu[col(k, ChannelKind::A)] = ma;
                mu[col(k, ChannelKind::B)] = mb;
            }
            Some((Route::BidiagonalPair, mu))
        }
        _ => None,
    }
}

/// `u_c(t) = Σᵢ g_{ci} e^{−σᵢ(T−t)}` per channel.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControlSignal {
    pub channels: Vec<String>,
    pub active: Vec<bool>,
    pub sigmas: Vec<f64>,
    pub horizon: f64,
    /// `coefficients[c][i]`.
    pub coefficients: Vec<Vec<f64>>,
}

impl ControlSignal {
    pub fn zero(mask: &ChannelMask, horizon: f64) -> Self {
        ControlSignal {
            channels: mask.names(),
            active: mask.active.clone(),
            sigmas: Vec::new(),
            horizon,
            coefficients: vec![Vec::new(); mask.len()],
        }
    }

    /// Inactive channels must carry zero coefficients.
    pub fn new(mask: &ChannelMask, sigmas: Vec<f64>, horizon: f64, coefficients: Vec<Vec<f64>>) -> Result<Self> {
        if coefficients.len() != mask.len() || coefficients.iter().any(|c| c.len() != sigmas.len()) {
            return Err(Error::InvalidInput("control coefficients do not match channels and exponents".into()));
        }
        for (c, row) in coefficients.iter().enumerate() {
            if !mask.active[c] && row.iter().any(|&v| v != 0.0) {
                return Err(Error::InvalidInput(format!("inactive channel {} carries a nonzero control", mask.channels[c].name())));
            }
        }
        Ok(ControlSignal { channels: mask.names(), active: mask.active.clone(), sigmas, horizon, coefficients })
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn eval(&self, channel: usize, t: f64) -> f64 {
        self.coefficients[channel]
            .iter()
            .zip(&self.sigmas)
            .map(|(g, s)| g * (-s * (self.horizon - t)).exp())
            .sum()
    }

    pub fn derivative(&self, channel: usize, t: f64) -> f64 {
        self.coefficients[channel]
            .iter()
            .zip(&self.sigmas)
            .map(|(g, s)| g * s * (-s * (self.horizon - t)).exp())
            .sum()
    }

    /// `∫₀ᵀ u_c(T−t) e^{−s t} dt` in closed form.
    pub fn moment(&self, channel: usize, s: f64) -> f64 {
        self.coefficients[channel]
            .iter()
            .zip(&self.sigmas)
            .map(|(g, si)| g * exp_integral(si + s, self.horizon))
            .sum()
    }

    pub fn is_identically_zero(&self, channel: usize) -> bool {
        self.coefficients[channel].iter().all(|&g| g == 0.0)
    }

    /// Values of every channel at `points` uniform times on [0, T].
    pub fn samples(&self, points: usize) -> Vec<(f64, Vec<f64>)> {
        let points = points.max(2);
        (0..points)
            .map(|i| {
                let t = self.horizon * i as f64 / (points - 1) as f64;
                (t, (0..self.num_channels()).map(|c| self.eval(c, t)).collect())
            })
            .collect()
    }
}

/// Control whose moments against the family's exponents are `targets`.
pub fn control_from_targets(family: &BiorthogonalFamily, targets: &MomentTargets, mask: &ChannelMask) -> Result<ControlSignal> {
    let m = family.len();
    if targets.modes.len() != m {
        return Err(Error::InvalidInput("targets and family have different sizes".into()));
    }
    let coefficients = (0..mask.len())
        .map(|c| {
            if !mask.active[c] {
                return vec![0.0; m];
            }
            // u_c(T − s) = Σₙ μ_{n,c} ψₙ(s)
            (0..m).map(|j| (0..m).map(|n| family.coeffs[n][j] * targets.modes[n].moments[c]).sum()).collect()
        })
        .collect();
    ControlSignal::new(mask, family.sigmas.clone(), family.horizon, coefficients)
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalNote {
    pub set: CriticalSetId,
    pub witness: Option<(u64, u64)>,
}

/// Critical sets containing λ, in the order N₀ … N_mixt.
pub fn critical_notes(cfg: &StarTreeConfig) -> Vec<CriticalNote> {
    CriticalSetId::ALL
        .into_iter()
        .filter_map(|set| {
            let m = is_member(set, cfg.lambda, cfg.edge_length);
            m.member.then_some(CriticalNote { set, witness: m.witness })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Synthesis {
    pub eigenpairs: Vec<GraphEigenpair>,
    pub targets: MomentTargets,
    pub family: BiorthogonalFamily,
    pub control: ControlSignal,
    pub critical: Vec<CriticalNote>,
}

impl Synthesis {
    /// Largest mismatch between the control's closed-form moments and the targets,
    /// relative to the largest target.
    pub fn moment_defect(&self) -> f64 {
        let scale = self.targets.modes.iter().flat_map(|m| m.moments.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
        let mut worst: f64 = 0.0;
        for mode in &self.targets.modes {
            for (c, &target) in mode.moments.iter().enumerate() {
                worst = worst.max((self.control.moment(c, mode.sigma) - target).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }
}

pub fn synthesize(
    cfg: &StarTreeConfig,
    y0: &GraphFunction,
    num_modes: usize,
    mask: &ChannelMask,
    opts: TargetOptions,
) -> Result<Synthesis> {
    synthesize_with(cfg, y0, num_modes, mask, opts, Parallelism::default())
}

pub fn synthesize_with(
    cfg: &StarTreeConfig,
    y0: &GraphFunction,
    num_modes: usize,
    mask: &ChannelMask,
    opts: TargetOptions,
    par: Parallelism,
) -> Result<Synthesis> {
    check_modes(num_modes)?;
    let eigenpairs = assemble_with(cfg, num_modes, par)?;
    let coords = project(cfg, y0, &eigenpairs)?;
    synthesize_modal(cfg, eigenpairs, &coords, mask, opts)
}

/// Synthesis from already assembled eigenspaces and coordinates of y₀ in them.
pub fn synthesize_modal(
    cfg: &StarTreeConfig,
    eigenpairs: Vec<GraphEigenpair>,
    coords: &[Vec<f64>],
    mask: &ChannelMask,
    opts: TargetOptions,
) -> Result<Synthesis> {
    check_modes(eigenpairs.len())?;
    let targets = compute_targets_modal(cfg, &eigenpairs, coords, mask, opts)?;
    let family = build_biorthogonal(&targets.sigmas(), cfg.horizon)?;
    let control = control_from_targets(&family, &targets, mask)?;
    Ok(Synthesis { eigenpairs, targets, family, control, critical: critical_notes(cfg) })
}

fn check_modes(num_modes: usize) -> Result<()> {
    if num_modes == 0 || num_modes > MAX_MODES {
        return Err(Error::InvalidInput(format!("modes must be between 1 and {MAX_MODES}, got {num_modes}")));
    }
    Ok(())
}

/// Targets for the single-interval systems, both boundary controls at x = 0.
pub fn interval_mode_targets(cfg: &StarTreeConfig, y0: &GraphFunction, num_modes: usize) -> Result<MomentTargets> {
    if !matches!(cfg.model, Model::Interval(_)) {
        return Err(Error::InvalidInput("interval targets need an interval configuration".into()));
    }
    check_modes(num_modes)?;
    let eigenpairs = assemble_with(cfg, num_modes, Parallelism::default())?;
    compute_targets(cfg, y0, &eigenpairs, &ChannelMask::all(cfg), TargetOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_spectra::assemble;
    use crate::quadrature::oracle_rule;
    use crate::tree_model::IntervalVariant;
    use std::f64::consts::PI;

    #[test]
    fn exp_integral_limits() {
        assert_eq!(exp_integral(0.0, 2.0), 2.0);
        assert!((exp_integral(1e-12, 2.0) - 2.0).abs() < 1e-11);
        assert!((exp_integral(3.0, 1.0) - (1.0 - (-3.0f64).exp()) / 3.0).abs() < 1e-16);
        assert!((exp_integral(-2.0, 1.0) - ((2.0f64).exp() - 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn two_exponent_family() {
        let f = build_biorthogonal(&[1.0, 2.0], 1.0).unwrap();
        let g = gram_matrix(&[1.0, 2.0], 1.0);
        assert!((g[(0, 1)] - (1.0 - (-3.0f64).exp()) / 3.0).abs() < 1e-16);
        let q = oracle_rule();
        for n in 0..2 {
            for (j, s) in [1.0f64, 2.0].iter().enumerate() {
                let v = q.integrate(0.0, 1.0, |t| f.psi(n, t) * (-s * t).exp());
                assert!((v - if n == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_exponent_family() {
        let f = build_biorthogonal(&[0.0], 2.0).unwrap();
        assert!((f.coeffs[0][0] - 0.5).abs() < 1e-15);
        assert!((f.psi(0, 1.3) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn family_errors() {
        assert!(matches!(build_biorthogonal(&[1.0, 1.0], 1.0), Err(Error::DuplicateExponent(_))));
        assert!(matches!(build_biorthogonal(&[2.0, 1.0], 1.0), Err(Error::InvalidInput(_))));
        assert!(matches!(build_biorthogonal(&[], 1.0), Err(Error::InvalidInput(_))));
        let many: Vec<f64> = (0..16).map(|k| k as f64 * 0.01).collect();
        assert!(matches!(build_biorthogonal(&many, 1.0), Err(Error::Conditioning { .. })));
    }

    #[test]
    fn bidiagonal_inverse() {
        // M = I − superdiagonal for N = 4
        let v = [1.0, 2.0, 3.0];
        let mu = upper_ones(&v);
        assert_eq!(mu, vec![6.0, 5.0, 3.0]);
        for l in 0..3 {
            let next = if l + 1 < 3 { mu[l + 1] } else { 0.0 };
            assert_eq!(mu[l] - next, v[l]);
        }
    }

    fn model(m: Model, lambda: f64) -> StarTreeConfig {
        StarTreeConfig::new(3, 1.0, lambda, m, 1.0).unwrap()
    }

    #[test]
    fn model_one_first_mode_uses_first_channel() {
        let cfg = model(Model::ModelI, 1.0);
        let eps = assemble(&cfg, 3).unwrap();
        let mask = ChannelMask::with_inactive(&cfg, &["u3"]).unwrap();
        let y0 = eps[0].basis[0].clone();
        let t = compute_targets(&cfg, &y0, &eps, &mask, TargetOptions::default()).unwrap();
        let m0 = &t.modes[0];
        assert_eq!(m0.route, Route::Direct);
        let psi = &eps[0].scalars[0].eigenfunction;
        // the basis function is Ψ/√3 per edge, so ⟨y₀, (Ψ,Ψ,Ψ)⟩ = √3
        let expected = 3f64.sqrt() * (-eps[0].sigma).exp() / psi.eval(1.0, 2);
        assert!(((m0.moments[0] - expected) / expected).abs() < 1e-12);
        assert_eq!(&m0.moments[1..], &[0.0, 0.0]);
        assert!(t.modes[1..].iter().all(|m| m.moments.iter().all(|v| v.abs() < 1e-12)));
    }

    #[test]
    fn closed_forms_agree_with_minimum_norm_residuals() {
        for (m, lambda, inactive) in [
            (Model::ModelI, 1.0, vec!["u3"]),
            (Model::ModelII, 1.0, vec!["a3", "b3"]),
            (Model::ModelII, PI * PI, vec!["a3", "b3"]),
            (Model::ModelII, 2.5 * PI * PI, vec!["a3", "b3"]),
            (Model::ModelII, 5.0 * PI * PI, vec!["a3", "b3"]),
        ] {
            let cfg = model(m, lambda);
            let eps = assemble(&cfg, 5).unwrap();
            let mask = ChannelMask::with_inactive(&cfg, &inactive).unwrap();
            let coeffs: Vec<Vec<f64>> = eps.iter().map(|e| (0..e.multiplicity).map(|i| 1.0 + i as f64).collect()).collect();
            let t = compute_targets_modal(&cfg, &eps, &coeffs, &mask, TargetOptions::default()).unwrap();
            for mode in &t.modes {
                assert!(mode.residual < 1e-12, "{m:?} {lambda} {:?} {}", mode.route, mode.residual);
                assert_ne!(mode.route, Route::MinimumNorm);
            }
        }
    }

    #[test]
    fn overflowing_gram_is_refused() {
        match build_biorthogonal(&[-2000.0, -1900.0], 1.0) {
            Err(Error::Conditioning { condition, .. }) => assert!(condition.is_infinite()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn route_b_option() {
        let cfg = model(Model::ModelII, 1.0);
        let eps = assemble(&cfg, 3).unwrap();
        let mask = ChannelMask::with_inactive(&cfg, &["a3", "b3"]).unwrap();
        let coeffs: Vec<Vec<f64>> = eps.iter().map(|e| vec![1.0; e.multiplicity]).collect();
        let a = compute_targets_modal(&cfg, &eps, &coeffs, &mask, TargetOptions { route_b: false }).unwrap();
        let b = compute_targets_modal(&cfg, &eps, &coeffs, &mask, TargetOptions { route_b: true }).unwrap();
        let diff = a.modes.iter().position(|m| m.multiplicity == 2).unwrap();
        // a1 b1 a2 b2 a3 b3
        assert!(a.modes[diff].moments[1] == 0.0 && a.modes[diff].moments[0] != 0.0);
        assert!(b.modes[diff].moments[0] == 0.0 && b.modes[diff].moments[1] != 0.0);
    }

    #[test]
    fn obstruction_is_refused_with_direction() {
        let cfg = model(Model::ModelI, 1.0);
        let eps = assemble(&cfg, 3).unwrap();
        let mask = ChannelMask::with_inactive(&cfg, &["u1", "u2"]).unwrap();
        let k = eps.iter().position(|e| e.multiplicity == 2).unwrap();
        let phi = &eps[k].scalars[0].eigenfunction;
        let y0 = GraphFunction::new(vec![phi.clone(), phi.scaled(-1.0), crate::tree_model::EdgeFunction::zero()]);
        match compute_targets(&cfg, &y0, &eps, &mask, TargetOptions::default()) {
            Err(Error::Uncontrollable(d)) => {
                assert_eq!(d.index, k);
                let w = &d.edge_profile[0];
                assert!(w[2].abs() < 1e-12 && (w[0] + w[1]).abs() < 1e-12 && w[0] > 0.0);
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn synthesized_moments_match_quadrature() {
        let cfg = model(Model::ModelI, 1.0);
        let mask = ChannelMask::with_inactive(&cfg, &["u3"]).unwrap();
        let eps = assemble(&cfg, 6).unwrap();
        let coeffs: Vec<f64> = vec![1.0; 6];
        let y0 = modal_combination(&cfg, &eps, &coeffs).unwrap();
        let syn = synthesize(&cfg, &y0, 6, &mask, TargetOptions::default()).unwrap();
        assert!(syn.control.is_identically_zero(2));
        let q = oracle_rule();
        // relative to the largest target
        let scale = syn.targets.modes.iter().flat_map(|m| m.moments.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
        for mode in &syn.targets.modes {
            for c in 0..2 {
                let v = q.integrate(0.0, 1.0, |t| syn.control.eval(c, 1.0 - t) * (-mode.sigma * t).exp());
                let target = mode.moments[c];
                assert!((v - target).abs() / scale < 1e-6, "sigma {} channel {c}: {v} vs {target}", mode.sigma);
            }
        }
    }

    #[test]
    fn single_mode_control_is_scaled_psi() {
        let cfg = model(Model::ModelI, 1.0);
        let mask = ChannelMask::with_inactive(&cfg, &["u3"]).unwrap();
        let eps = assemble(&cfg, 1).unwrap();
        let y0 = eps[0].basis[0].clone();
        let syn = synthesize(&cfg, &y0, 1, &mask, TargetOptions::default()).unwrap();
        let c = syn.targets.modes[0].moments[0];
        for t in [0.0, 0.3, 1.0] {
            assert!((syn.control.eval(0, t) - c * syn.family.psi(0, 1.0 - t)).abs() < 1e-12 * c.abs().max(1.0));
        }
    }

    #[test]
    fn interval_targets() {
        let cfg = StarTreeConfig::interval(IntervalVariant::NeumannPair, 1.0, 1.0, 1.0).unwrap();
        let eps = assemble(&cfg, 4).unwrap();
        let y0 = modal_combination(&cfg, &eps, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        let t = interval_mode_targets(&cfg, &y0, 4).unwrap();
        let pos = t.modes.iter().find(|m| m.sigma > 0.0).unwrap();
        assert_eq!(pos.route, Route::EqualSplit);
        let cfg = StarTreeConfig::interval(IntervalVariant::DirichletPair, 1.0, PI * PI / 4.0, 1.0).unwrap();
        let eps = assemble(&cfg, 4).unwrap();
        let y0 = modal_combination(&cfg, &eps, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        let t = interval_mode_targets(&cfg, &y0, 4).unwrap();
        let zero = t.modes.iter().find(|m| m.sigma == 0.0).unwrap();
        assert_eq!(zero.route, Route::Direct);
        assert_eq!(zero.moments[0], 0.0);
        let cfg = StarTreeConfig::interval(IntervalVariant::DirichletPair, 1.0, 1.0, 1.0).unwrap();
        assert!(assemble(&cfg, 4).unwrap().iter().all(|e| e.sigma != 0.0));
    }
}
