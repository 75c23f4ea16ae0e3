//! Eigenspaces of the tree operator and the boundary traces that drive the
//! moment problem.
//!
//! Every eigenfunction on the tree factors edge-wise as `w_k · f(x)` with `f`
//! a scalar eigenfunction. Sum-type functions use `w = (1, …, 1)/√N` and come
//! from P1 (model I) or E1 (model II); difference-type functions use an
//! orthonormal basis of `{w : Σ w_k = 0}` and come from P2 or E2.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::parallel::Parallelism;
use crate::scalar_spectra::{cluster, spectrum_with, ScalarEigenpair, ScalarProblemId};
use crate::tree_model::{GraphFunction, IntervalVariant, Model, StarTreeConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Origin {
    SumProblem,
    DifferenceProblem,
    Mixed,
}

/// Traces of one basis function on one edge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EdgeTraces {
    pub value_at_l: f64,
    pub dx_at_l: f64,
    pub dxx_at_l: f64,
    pub dxxx_at_l: f64,
    pub lambda_value_plus_dxx_at_l: f64,
    pub value_at_0: f64,
    pub dx_at_0: f64,
    pub dxx_at_0: f64,
    pub dxxx_at_0: f64,
    pub lambda_value_plus_dxx_at_0: f64,
    pub lambda_dx_plus_dxxx_at_0: f64,
}

/// Basis function `i` equals `scalars[scalar]` times `weights` edge-wise.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasisProfile {
    pub scalar: usize,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphEigenpair {
    pub sigma: f64,
    pub multiplicity: usize,
    #[serde(skip)]
    pub basis: Vec<GraphFunction>,
    pub origin: Origin,
    /// `edge_traces[i][k]`: basis function i, edge k.
    pub edge_traces: Vec<Vec<EdgeTraces>>,
    #[serde(skip)]
    pub scalars: Vec<ScalarEigenpair>,
    pub profile: Vec<BasisProfile>,
    pub warnings: Vec<String>,
}

impl GraphEigenpair {
    /// Coordinates `⟨y, φ_i⟩` of `y` in the orthonormal basis.
    pub fn coordinates(&self, y: &GraphFunction, cfg: &StarTreeConfig) -> Result<Vec<f64>> {
        self.basis.iter().map(|b| b.inner_product(y, cfg.edge_length)).collect()
    }

    /// Largest violation of the four vertex coupling conditions over the basis.
    pub fn coupling_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for tr in &self.edge_traces {
            if tr.len() < 2 {
                continue;
            }
            let v0 = tr[0].value_at_0;
            let d20 = tr[0].dxx_at_0;
            for t in tr {
                worst = worst.max((t.value_at_0 - v0).abs()).max((t.dxx_at_0 - d20).abs());
            }
            worst = worst.max(tr.iter().map(|t| t.dx_at_0).sum::<f64>().abs());
            worst = worst.max(tr.iter().map(|t| t.dxxx_at_0).sum::<f64>().abs());
        }
        worst
    }

    /// Gram matrix of the basis in L²(Γ).
    pub fn gram(&self, cfg: &StarTreeConfig) -> DMatrix<f64> {
        let m = self.multiplicity;
        DMatrix::from_fn(m, m, |i, j| self.basis[i].inner_product(&self.basis[j], cfg.edge_length).unwrap_or(f64::NAN))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ChannelKind {
    /// Model I slope control, trace `φ_xx(L)`.
    U,
    /// Model II slope control, trace `λφ(L) + φ_xx(L)`.
    A,
    /// Model II third-derivative control, trace `φ(L)`.
    B,
    /// Interval `y_x(0) = u¹`, trace `−(λφ(0) + φ_xx(0))`.
    NeumannSlope,
    /// Interval `y_xxx(0) = u²`, trace `−φ(0)`.
    NeumannThird,
    /// Interval `y(0) = u¹`, trace `λφ_x(0) + φ_xxx(0)`.
    DirichletValue,
    /// Interval `y_xx(0) = u²`, trace `φ_x(0)`.
    DirichletCurvature,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Channel {
    pub edge: usize,
    pub kind: ChannelKind,
}

impl Channel {
    pub fn name(&self) -> String {
        let prefix = match self.kind {
            ChannelKind::U => "u",
            ChannelKind::A => "a",
            ChannelKind::B => "b",
            ChannelKind::NeumannSlope | ChannelKind::DirichletValue => return "u1".into(),
            ChannelKind::NeumannThird | ChannelKind::DirichletCurvature => return "u2".into(),
        };
        format!("{prefix}{}", self.edge + 1)
    }

    /// The functional τ with `d/dt ⟨y, φ⟩ = −σ⟨y, φ⟩ − Σ τ(φ)·u`.
    pub fn trace(&self, t: &EdgeTraces) -> f64 {
        match self.kind {
            ChannelKind::U => t.dxx_at_l,
            ChannelKind::A => t.lambda_value_plus_dxx_at_l,
            ChannelKind::B => t.value_at_l,
            ChannelKind::NeumannSlope => -t.lambda_value_plus_dxx_at_0,
            ChannelKind::NeumannThird => -t.value_at_0,
            ChannelKind::DirichletValue => t.lambda_dx_plus_dxxx_at_0,
            ChannelKind::DirichletCurvature => t.dx_at_0,
        }
    }
}

impl EdgeTraces {
    fn of(f: &crate::tree_model::EdgeFunction, lambda: f64, length: f64) -> Self {
        let v = f.eval(length, 0);
        let dxx = f.eval(length, 2);
        EdgeTraces {
            value_at_l: v,
            dx_at_l: f.eval(length, 1),
            dxx_at_l: dxx,
            dxxx_at_l: f.eval(length, 3),
            lambda_value_plus_dxx_at_l: lambda * v + dxx,
            value_at_0: f.eval(0.0, 0),
            dx_at_0: f.eval(0.0, 1),
            dxx_at_0: f.eval(0.0, 2),
            dxxx_at_0: f.eval(0.0, 3),
            lambda_value_plus_dxx_at_0: lambda * f.eval(0.0, 0) + f.eval(0.0, 2),
            lambda_dx_plus_dxxx_at_0: lambda * f.eval(0.0, 1) + f.eval(0.0, 3),
        }
    }
}

/// Which channels are active; inactive channels carry identically zero controls.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelMask {
    pub channels: Vec<Channel>,
    pub active: Vec<bool>,
}

impl ChannelMask {
    /// All channels of the model, in the order u1…uN, or a1 b1 a2 b2 …, or u1 u2.
    pub fn all(cfg: &StarTreeConfig) -> Self {
        let channels: Vec<Channel> = match cfg.model {
            Model::ModelI => (0..cfg.num_edges).map(|edge| Channel { edge, kind: ChannelKind::U }).collect(),
            Model::ModelII => (0..cfg.num_edges)
                .flat_map(|edge| [Channel { edge, kind: ChannelKind::A }, Channel { edge, kind: ChannelKind::B }])
                .collect(),
            Model::Interval(IntervalVariant::NeumannPair) => vec![
                Channel { edge: 0, kind: ChannelKind::NeumannSlope },
                Channel { edge: 0, kind: ChannelKind::NeumannThird },
            ],
            Model::Interval(IntervalVariant::DirichletPair) => vec![
                Channel { edge: 0, kind: ChannelKind::DirichletValue },
                Channel { edge: 0, kind: ChannelKind::DirichletCurvature },
            ],
        };
        let active = vec![true; channels.len()];
        ChannelMask { channels, active }
    }

    /// Deactivates channels by name (`u3`, `a2`, `b1`, …).
    pub fn with_inactive<S: AsRef<str>>(cfg: &StarTreeConfig, names: &[S]) -> Result<Self> {
        let mut mask = Self::all(cfg);
        for name in names {
            let name = name.as_ref();
            let i = mask
                .channels
                .iter()
                .position(|c| c.name() == name)
                .ok_or_else(|| Error::InvalidInput(format!("unknown channel {name:?} for model {}", cfg.model.label())))?;
            mask.active[i] = false;
        }
        Ok(mask)
    }

    /// Parses a string of `0`/`1` flags in channel order.
    pub fn from_bits(cfg: &StarTreeConfig, bits: &str) -> Result<Self> {
        let mut mask = Self::all(cfg);
        let flags: Vec<char> = bits.chars().filter(|c| !c.is_whitespace()).collect();
        if flags.len() != mask.channels.len() {
            return Err(Error::InvalidInput(format!(
                "channel mask needs {} flags, got {:?}",
                mask.channels.len(),
                bits
            )));
        }
        for (i, c) in flags.iter().enumerate() {
            mask.active[i] = match c {
                '1' => true,
                '0' => false,
                _ => return Err(Error::InvalidInput(format!("channel mask flag {c:?} is not 0 or 1"))),
            };
        }
        Ok(mask)
    }

    pub fn bits(&self) -> String {
        self.active.iter().map(|&a| if a { '1' } else { '0' }).collect()
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.channels.len()).filter(|&i| self.active[i]).collect()
    }

    pub fn inactive_names(&self) -> Vec<String> {
        (0..self.channels.len()).filter(|&i| !self.active[i]).map(|i| self.channels[i].name()).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.channels.iter().map(Channel::name).collect()
    }

    fn check(&self, cfg: &StarTreeConfig) -> Result<()> {
        if self.channels != Self::all(cfg).channels {
            return Err(Error::InvalidInput("channel mask does not match the configuration".into()));
        }
        Ok(())
    }
}

/// The sum-type and difference-type scalar problems of a model.
fn problems(model: Model) -> (Option<ScalarProblemId>, Option<ScalarProblemId>) {
    match model {
        Model::ModelI => (Some(ScalarProblemId::P1), Some(ScalarProblemId::P2)),
        Model::ModelII => (Some(ScalarProblemId::E1), Some(ScalarProblemId::E2)),
        Model::Interval(IntervalVariant::NeumannPair) => (Some(ScalarProblemId::E1), None),
        Model::Interval(IntervalVariant::DirichletPair) => (None, Some(ScalarProblemId::E2)),
    }
}

/// Orthonormal basis of `{w ∈ ℝᴺ : Σ w = 0}` from `e_l − e_{l+1}` by Gram–Schmidt
/// with one reorthogonalization pass.
pub fn difference_vectors(n: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(n.saturating_sub(1));
    for l in 0..n.saturating_sub(1) {
        let mut v = DVector::zeros(n);
        v[l] = 1.0;
        v[l + 1] = -1.0;
        for _ in 0..2 {
            for q in &out {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let nv = v.norm();
        out.push(v / nv);
    }
    out.into_iter().map(|v| v.iter().copied().collect()).collect()
}

/// First `num_distinct` distinct eigenvalues of the tree operator, increasing.
pub fn assemble(cfg: &StarTreeConfig, num_distinct: usize) -> Result<Vec<GraphEigenpair>> {
    assemble_with(cfg, num_distinct, Parallelism::default())
}

pub fn assemble_with(cfg: &StarTreeConfig, num_distinct: usize, par: Parallelism) -> Result<Vec<GraphEigenpair>> {
    if num_distinct == 0 {
        return Err(Error::InvalidInput("num_distinct must be >= 1".into()));
    }
    let (sum, diff) = problems(cfg.model);
    if matches!(cfg.model, Model::Interval(_)) && cfg.num_edges != 1 {
        return Err(Error::InvalidInput("interval models have one edge".into()));
    }
    // (is_difference, pair)
    let mut tagged: Vec<(bool, ScalarEigenpair)> = Vec::new();
    for (is_diff, p) in [(false, sum), (true, diff)] {
        if let Some(p) = p {
            for s in spectrum_with(p, cfg, num_distinct, par)? {
                tagged.push((is_diff, s));
            }
        }
    }
    tagged.sort_by(|a, b| a.1.sigma().total_cmp(&b.1.sigma()));
    // cluster on σ, then order members: sum-type first, by index
    let sorted: Vec<ScalarEigenpair> = tagged.iter().map(|t| t.1.clone()).collect();
    let kinds: Vec<bool> = tagged.iter().map(|t| t.0).collect();
    let mut groups: Vec<Vec<(bool, ScalarEigenpair)>> = Vec::new();
    let mut pos = 0;
    for c in cluster(sorted) {
        let mut g: Vec<(bool, ScalarEigenpair)> = c.into_iter().enumerate().map(|(i, s)| (kinds[pos + i], s)).collect();
        pos += g.len();
        g.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.index.cmp(&b.1.index)));
        groups.push(g);
    }
    groups.truncate(num_distinct);
    if groups.len() < num_distinct {
        return Err(Error::Numerical(format!("found only {} distinct eigenvalues", groups.len())));
    }
    Ok(par.map(&groups, |g| eigenspace(cfg, g)))
}

fn eigenspace(cfg: &StarTreeConfig, members: &[(bool, ScalarEigenpair)]) -> GraphEigenpair {
    let n = cfg.num_edges;
    let uniform = vec![1.0 / (n as f64).sqrt(); n];
    let diffs = difference_vectors(n);
    let mut profile = Vec::new();
    let mut scalars = Vec::new();
    for (j, (is_diff, s)) in members.iter().enumerate() {
        scalars.push(s.clone());
        if n == 1 {
            profile.push(BasisProfile { scalar: j, weights: vec![1.0] });
        } else if *is_diff {
            profile.extend(diffs.iter().map(|w| BasisProfile { scalar: j, weights: w.clone() }));
        } else {
            profile.push(BasisProfile { scalar: j, weights: uniform.clone() });
        }
    }
    let has_sum = members.iter().any(|m| !m.0);
    let has_diff = members.iter().any(|m| m.0);
    let origin = match (has_sum, has_diff) {
        (true, true) => Origin::Mixed,
        (false, true) => Origin::DifferenceProblem,
        _ => Origin::SumProblem,
    };
    let mut warnings = Vec::new();
    if origin == Origin::Mixed {
        warnings.push(format!(
            "sum-type and difference-type eigenvalues collide at sigma = {} (lambda = {})",
            members[0].1.sigma(),
            cfg.lambda
        ));
    }
    let basis: Vec<GraphFunction> = profile
        .iter()
        .map(|p| GraphFunction::weighted(&scalars[p.scalar].eigenfunction, &p.weights))
        .collect();
    let edge_traces = profile
        .iter()
        .map(|p| {
            let base = EdgeTraces::of(&scalars[p.scalar].eigenfunction, cfg.lambda, cfg.edge_length);
            p.weights.iter().map(|&w| scale_traces(&base, w)).collect()
        })
        .collect();
    GraphEigenpair {
        sigma: members[0].1.sigma(),
        multiplicity: basis.len(),
        basis,
        origin,
        edge_traces,
        scalars,
        profile,
        warnings,
    }
}

fn scale_traces(t: &EdgeTraces, w: f64) -> EdgeTraces {
    EdgeTraces {
        value_at_l: w * t.value_at_l,
        dx_at_l: w * t.dx_at_l,
        dxx_at_l: w * t.dxx_at_l,
        dxxx_at_l: w * t.dxxx_at_l,
        lambda_value_plus_dxx_at_l: w * t.lambda_value_plus_dxx_at_l,
        value_at_0: w * t.value_at_0,
        dx_at_0: w * t.dx_at_0,
        dxx_at_0: w * t.dxx_at_0,
        dxxx_at_0: w * t.dxxx_at_0,
        lambda_value_plus_dxx_at_0: w * t.lambda_value_plus_dxx_at_0,
        lambda_dx_plus_dxxx_at_0: w * t.lambda_dx_plus_dxxx_at_0,
    }
}

/// `m × |channels|` matrix of traces for every channel, active or not.
pub fn full_trace_matrix(ep: &GraphEigenpair, cfg: &StarTreeConfig, mask: &ChannelMask) -> Result<DMatrix<f64>> {
    mask.check(cfg)?;
    Ok(DMatrix::from_fn(ep.multiplicity, mask.len(), |i, j| {
        let ch = mask.channels[j];
        ch.trace(&ep.edge_traces[i][ch.edge])
    }))
}

/// `m × (active channels)` trace matrix: row i, column j is the trace of basis
/// function i for the j-th active channel.
pub fn trace_matrix(ep: &GraphEigenpair, cfg: &StarTreeConfig, mask: &ChannelMask) -> Result<DMatrix<f64>> {
    let full = full_trace_matrix(ep, cfg, mask)?;
    let cols = mask.active_indices();
    Ok(DMatrix::from_fn(ep.multiplicity, cols.len(), |i, j| full[(i, cols[j])]))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub rank: usize,
    pub deficiency: usize,
    /// Orthonormal basis of the left null space, in basis coordinates.
    pub null_directions: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
}

/// Singular values below `RANK_TOL · s_max` count as zero.
pub const RANK_TOL: f64 = 1e-8;

/// Numerical rank of `t` and an orthonormal basis of its left null space.
pub fn left_null_space(t: &DMatrix<f64>) -> RankReport {
    let m = t.nrows();
    // pad to at least m columns so the SVD returns a full set of left vectors
    let cols = t.ncols().max(m).max(1);
    let mut padded = DMatrix::zeros(m, cols);
    padded.view_mut((0, 0), (m, t.ncols())).copy_from(t);
    let svd = padded.svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = s.iter().copied().fold(0.0, f64::max);
    let keep: Vec<bool> = s.iter().map(|&v| smax > 0.0 && v > RANK_TOL * smax).collect();
    let rank = keep.iter().filter(|&&k| k).count();
    let null_directions = (0..s.len().min(m))
        .filter(|&i| !keep[i])
        .map(|i| u.column(i).iter().copied().collect())
        .collect();
    let mut singular_values: Vec<f64> = s.into_iter().take(t.ncols().min(m)).collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    RankReport { rank, deficiency: m - rank, null_directions, singular_values }
}

/// Position `n₀` of the first positive eigenvalue in the assembled spectrum.
pub fn first_positive_index(eigenpairs: &[GraphEigenpair]) -> Option<usize> {
    eigenpairs.iter().position(|e| e.sigma > 0.0)
}

pub fn rank_deficiency(ep: &GraphEigenpair, cfg: &StarTreeConfig, mask: &ChannelMask) -> Result<RankReport> {
    Ok(left_null_space(&trace_matrix(ep, cfg, mask)?))
}

/// `det [[λφ(L) + φ″(L), φ(L)], [λφ̃(L) + φ̃″(L), φ̃(L)]]` for the two closed-form
/// scalar functions of a double eigenvalue, each rescaled to the raw form
/// `cos(βx)` or `sin(βx)` and ordered by increasing β.
pub fn raw_trace_determinant(ep: &GraphEigenpair, cfg: &StarTreeConfig) -> Option<f64> {
    let mut raws: Vec<(f64, crate::tree_model::EdgeFunction)> = Vec::new();
    for s in &ep.scalars {
        let terms = s.eigenfunction.terms();
        if terms.len() != 1 {
            return None;
        }
        raws.push((terms[0].frequency, s.eigenfunction.scaled(1.0 / terms[0].coefficient)));
    }
    if raws.len() != 2 {
        return None;
    }
    raws.sort_by(|a, b| a.0.total_cmp(&b.0));
    let l = cfg.edge_length;
    let row = |f: &crate::tree_model::EdgeFunction| [cfg.lambda * f.eval(l, 0) + f.eval(l, 2), f.eval(l, 0)];
    let (r1, r2) = (row(&raws[0].1), row(&raws[1].1));
    Some(r1[0] * r2[1] - r1[1] * r2[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg(model: Model, n: usize, lambda: f64) -> StarTreeConfig {
        StarTreeConfig::new(n, 1.0, lambda, model, 1.0).unwrap()
    }

    #[test]
    fn positive_spectrum_alternates_from_first_positive_index() {
        use crate::scalar_spectra::{positive_eigenvalues, ScalarProblemId};
        for lambda in [1.0, 30.0, 60.0] {
            let c = cfg(Model::ModelI, 3, lambda);
            let eps = assemble(&c, 40).unwrap();
            let n0 = first_positive_index(&eps).unwrap();
            let p1 = positive_eigenvalues(ScalarProblemId::P1, &c, 10).unwrap();
            let p2 = positive_eigenvalues(ScalarProblemId::P2, &c, 10).unwrap();
            for n in 0..10 {
                assert_eq!(eps[n0 + 2 * n].sigma, p1[n].sigma(), "λ = {lambda}, n = {n}");
                assert_eq!(eps[n0 + 2 * n + 1].sigma, p2[n].sigma(), "λ = {lambda}, n = {n}");
            }
            assert_eq!(n0 > 0, lambda > 20.0, "λ = {lambda}, n₀ = {n0}");
        }
    }

    #[test]
    fn difference_vectors_are_orthonormal() {
        for n in 2..7 {
            let v = difference_vectors(n);
            assert_eq!(v.len(), n - 1);
            for i in 0..n - 1 {
                assert!(v[i].iter().sum::<f64>().abs() < 1e-14);
                for j in 0..n - 1 {
                    let d: f64 = v[i].iter().zip(&v[j]).map(|(a, b)| a * b).sum();
                    assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn model_one_multiplicities() {
        let c = cfg(Model::ModelI, 3, 1.0);
        let eps = assemble(&c, 6).unwrap();
        for ep in &eps {
            match ep.origin {
                Origin::SumProblem => assert_eq!(ep.multiplicity, 1),
                Origin::DifferenceProblem => assert_eq!(ep.multiplicity, 2),
                Origin::Mixed => panic!("no collisions expected"),
            }
            assert!(ep.coupling_defect() < 1e-9);
            let g = ep.gram(&c);
            assert!((g - DMatrix::identity(ep.multiplicity, ep.multiplicity)).amax() < 1e-10);
        }
        assert!(eps.windows(2).all(|w| w[0].sigma < w[1].sigma));
    }

    #[test]
    fn model_two_zero_eigenvalue_on_n2() {
        let c = cfg(Model::ModelII, 3, PI * PI);
        let eps = assemble(&c, 3).unwrap();
        let z = eps.iter().find(|e| e.sigma == 0.0).unwrap();
        assert_eq!(z.multiplicity, 2);
        assert_eq!(z.origin, Origin::SumProblem);
        let g = z.gram(&c);
        assert!((g - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn model_two_two_edges() {
        let c = cfg(Model::ModelII, 2, 1.0);
        for ep in assemble(&c, 5).unwrap() {
            assert_eq!(ep.multiplicity, 1);
            if ep.origin == Origin::DifferenceProblem {
                let w = &ep.profile[0].weights;
                assert!((w[0] - 1.0 / 2f64.sqrt()).abs() < 1e-15 && (w[1] + w[0]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mixed_collision_is_reported() {
        // λ = 5π²/4 ∈ N₄: cos(πx) and sin(πx/2) share σ = −π⁴/4 on L = 1
        let c = cfg(Model::ModelII, 3, 5.0 * PI * PI / 4.0);
        let eps = assemble(&c, 4).unwrap();
        let mixed: Vec<_> = eps.iter().filter(|e| e.origin == Origin::Mixed).collect();
        assert_eq!(mixed.len(), 1);
        assert_eq!(mixed[0].multiplicity, 3);
        assert!(!mixed[0].warnings.is_empty());
    }

    #[test]
    fn simple_trace_row_is_uniform() {
        let c = cfg(Model::ModelI, 4, 1.0);
        let ep = &assemble(&c, 1).unwrap()[0];
        let t = trace_matrix(ep, &c, &ChannelMask::all(&c)).unwrap();
        let psi = ep.scalars[0].traces.dxx_at_l;
        for j in 0..4 {
            assert!((t[(0, j)] - psi / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn masks_parse() {
        let c = cfg(Model::ModelII, 3, 1.0);
        let m = ChannelMask::with_inactive(&c, &["a3", "b3"]).unwrap();
        assert_eq!(m.bits(), "111100");
        assert_eq!(ChannelMask::from_bits(&c, "111100").unwrap(), m);
        assert!(ChannelMask::from_bits(&c, "1111").is_err());
        assert!(ChannelMask::with_inactive(&c, &["u3"]).is_err());
        assert_eq!(m.inactive_names(), vec!["a3".to_string(), "b3".to_string()]);
    }

    #[test]
    fn obstruction_direction_model_one() {
        let c = cfg(Model::ModelI, 3, 1.0);
        let mask = ChannelMask::with_inactive(&c, &["u1", "u2"]).unwrap();
        let ep = assemble(&c, 3).unwrap().into_iter().find(|e| e.multiplicity == 2).unwrap();
        let r = rank_deficiency(&ep, &c, &mask).unwrap();
        assert_eq!(r.deficiency, 1);
        // direction corresponds to edge weights ∝ (1, −1, 0)
        let d = &r.null_directions[0];
        let w: Vec<f64> = (0..3).map(|k| d[0] * ep.profile[0].weights[k] + d[1] * ep.profile[1].weights[k]).collect();
        assert!(w[2].abs() < 1e-12 && (w[0] + w[1]).abs() < 1e-12);
        let full = rank_deficiency(&ep, &c, &ChannelMask::all(&c)).unwrap();
        assert_eq!(full.deficiency, 0);
    }

    #[test]
    fn step_two_determinant() {
        let l = 1.0;
        let c = cfg(Model::ModelII, 3, 2.5 * PI * PI);
        let ep = assemble(&c, 2).unwrap().into_iter().find(|e| e.multiplicity == 4).unwrap();
        let d = raw_trace_determinant(&ep, &c).unwrap();
        let (bn, bm) = (PI / (2.0 * l), 3.0 * PI / (2.0 * l));
        let expected = -(bm * bm - bn * bn);
        assert!(((d - expected) / expected).abs() < 1e-9);
    }

    #[test]
    fn interval_assembly() {
        let c = StarTreeConfig::interval(IntervalVariant::DirichletPair, 1.0, PI * PI / 4.0, 1.0).unwrap();
        let eps = assemble(&c, 3).unwrap();
        assert_eq!(eps[0].sigma, 0.0);
        let t = trace_matrix(&eps[0], &c, &ChannelMask::all(&c)).unwrap();
        // λφ_x(0) + φ_xxx(0) vanishes on the σ = 0 mode
        assert!(t[(0, 0)].abs() < 1e-12);
        assert!(t[(0, 1)].abs() > 0.1);
    }
}
