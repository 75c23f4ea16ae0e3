//! Configuration of the star tree and exact calculus on its edges.
//!
//! Edge functions are finite sums of `c·cos(kx)`, `c·sin(kx)`, `c·cosh(kx)`,
//! `c·sinh(kx)` and `c·x^p`. Derivatives, point values and L² inner products
//! over `(0, L)` are evaluated in closed form.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary actuation used on a single interval (N = 1), controls at x = 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntervalVariant {
    /// `y_x(0) = u¹`, `y_xxx(0) = u²`, Neumann-type conditions at x = L.
    NeumannPair,
    /// `y(0) = u¹`, `y_xx(0) = u²`, Neumann-type conditions at x = L.
    DirichletPair,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    /// `y(L) = 0`, `y_x(L) = u` on every external vertex.
    ModelI,
    /// `y_x(L) = a`, `y_xxx(L) = b` on every external vertex.
    ModelII,
    /// Single interval with both controls at one end.
    Interval(IntervalVariant),
}

impl Model {
    pub fn label(&self) -> &'static str {
        match self {
            Model::ModelI => "I",
            Model::ModelII => "II",
            Model::Interval(IntervalVariant::NeumannPair) => "interval-neumann",
            Model::Interval(IntervalVariant::DirichletPair) => "interval-dirichlet",
        }
    }
}

/// N edges of common length L joined at one interior vertex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StarTreeConfig {
    pub num_edges: usize,
    pub edge_length: f64,
    pub lambda: f64,
    pub model: Model,
    pub horizon: f64,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    edges: usize,
    length: f64,
    lambda: f64,
    model: String,
    horizon: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl StarTreeConfig {
    pub fn new(num_edges: usize, edge_length: f64, lambda: f64, model: Model, horizon: f64) -> Result<Self> {
        match model {
            Model::Interval(_) if num_edges != 1 => {
                return Err(Error::InvalidInput("interval models have exactly one edge".into()))
            }
            Model::ModelI | Model::ModelII if num_edges < 2 => {
                return Err(Error::InvalidInput(format!("a star tree needs N >= 2 edges, got {num_edges}")))
            }
            _ => {}
        }
        check_positive("edge length", edge_length)?;
        check_positive("lambda", lambda)?;
        check_positive("horizon", horizon)?;
        Ok(StarTreeConfig { num_edges, edge_length, lambda, model, horizon })
    }

    pub fn interval(variant: IntervalVariant, edge_length: f64, lambda: f64, horizon: f64) -> Result<Self> {
        Self::new(1, edge_length, lambda, Model::Interval(variant), horizon)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.num_edges, self.edge_length, lambda, self.model, self.horizon)
    }

    /// Parses `{"edges", "length", "lambda", "model", "horizon"}` with `model` one of
    /// `"I"`, `"II"`, `"interval-neumann"`, `"interval-dirichlet"`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        Self::from_json_value(raw)
    }

    pub fn from_value(value: &serde_json::Value) -> Result<Self> {
        let raw: RawConfig = serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        Self::from_json_value(raw)
    }

    fn from_json_value(raw: RawConfig) -> Result<Self> {
        let model = match raw.model.as_str() {
            "I" => Model::ModelI,
            "II" => Model::ModelII,
            "interval-neumann" => Model::Interval(IntervalVariant::NeumannPair),
            "interval-dirichlet" => Model::Interval(IntervalVariant::DirichletPair),
            other => {
                return Err(Error::InvalidInput(format!(
                    "config.model: expected \"I\", \"II\", \"interval-neumann\" or \"interval-dirichlet\", got {other:?}"
                )))
            }
        };
        Self::new(raw.edges, raw.length, raw.lambda, model, raw.horizon)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "edges": self.num_edges,
            "length": self.edge_length,
            "lambda": self.lambda,
            "model": self.model.label(),
            "horizon": self.horizon,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TermKind {
    Monomial,
    Cos,
    Sin,
    Cosh,
    Sinh,
}

/// One term `coefficient · e^{-log_scale} · kind(frequency · x)`; for
/// monomials `frequency` is the integer power and `log_scale` is zero.
///
/// The scale lets `cosh(αx)/cosh(αL)` be stored without forming `cosh(αL)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coefficient: f64,
    pub kind: TermKind,
    pub frequency: f64,
    pub log_scale: f64,
}

impl Term {
    pub fn new(coefficient: f64, kind: TermKind, frequency: f64) -> Self {
        Term { coefficient, kind, frequency, log_scale: 0.0 }
    }

    fn power(&self) -> usize {
        self.frequency as usize
    }

    fn eval(&self, x: f64, order: usize) -> f64 {
        let k = self.frequency;
        let s = self.log_scale;
        let c = self.coefficient;
        match self.kind {
            TermKind::Monomial => {
                let p = self.power();
                if order > p {
                    return 0.0;
                }
                let mut factor = 1.0;
                for j in 0..order {
                    factor *= (p - j) as f64;
                }
                c * factor * x.powi((p - order) as i32)
            }
            TermKind::Cos | TermKind::Sin => {
                let kx = k * x;
                let phase = if self.kind == TermKind::Cos { order % 4 } else { (order + 3) % 4 };
                let v = match phase {
                    0 => kx.cos(),
                    1 => -kx.sin(),
                    2 => -kx.cos(),
                    _ => kx.sin(),
                };
                c * k.powi(order as i32) * v * (-s).exp()
            }
            TermKind::Cosh | TermKind::Sinh => {
                let even = (self.kind == TermKind::Cosh) == order.is_multiple_of(2);
                let e_plus = (k * x - s).exp();
                let e_minus = (-k * x - s).exp();
                let v = if even { 0.5 * (e_plus + e_minus) } else { 0.5 * (e_plus - e_minus) };
                c * k.powi(order as i32) * v
            }
        }
    }

    fn derivative(&self) -> Option<Term> {
        let k = self.frequency;
        let mut t = *self;
        match self.kind {
            TermKind::Monomial => {
                let p = self.power();
                if p == 0 {
                    return None;
                }
                t.coefficient *= p as f64;
                t.frequency = (p - 1) as f64;
            }
            TermKind::Cos => {
                t.kind = TermKind::Sin;
                t.coefficient *= -k;
            }
            TermKind::Sin => {
                t.kind = TermKind::Cos;
                t.coefficient *= k;
            }
            TermKind::Cosh => {
                t.kind = TermKind::Sinh;
                t.coefficient *= k;
            }
            TermKind::Sinh => {
                t.kind = TermKind::Cosh;
                t.coefficient *= k;
            }
        }
        Some(t)
    }

    /// Complex exponential atoms `c · x^p · e^{z x + b}` summing to the term.
    fn atoms(&self) -> Vec<Atom> {
        let c = self.coefficient;
        let k = self.frequency;
        let b = -self.log_scale;
        let i = Complex64::i();
        match self.kind {
            TermKind::Monomial => vec![Atom { c: Complex64::new(c, 0.0), p: self.power(), z: Complex64::new(0.0, 0.0), b }],
            TermKind::Cos => vec![
                Atom { c: Complex64::new(0.5 * c, 0.0), p: 0, z: i * k, b },
                Atom { c: Complex64::new(0.5 * c, 0.0), p: 0, z: -i * k, b },
            ],
            TermKind::Sin => vec![
                Atom { c: Complex64::new(0.0, -0.5 * c), p: 0, z: i * k, b },
                Atom { c: Complex64::new(0.0, 0.5 * c), p: 0, z: -i * k, b },
            ],
            TermKind::Cosh => vec![
                Atom { c: Complex64::new(0.5 * c, 0.0), p: 0, z: Complex64::new(k, 0.0), b },
                Atom { c: Complex64::new(0.5 * c, 0.0), p: 0, z: Complex64::new(-k, 0.0), b },
            ],
            TermKind::Sinh => vec![
                Atom { c: Complex64::new(0.5 * c, 0.0), p: 0, z: Complex64::new(k, 0.0), b },
                Atom { c: Complex64::new(-0.5 * c, 0.0), p: 0, z: Complex64::new(-k, 0.0), b },
            ],
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Atom {
    c: Complex64,
    p: usize,
    z: Complex64,
    b: f64,
}

/// ∫₀ᴸ x^p e^{z x + b} dx.
fn atom_integral(p: usize, z: Complex64, b: f64, length: f64) -> Complex64 {
    let zl = z * length;
    if zl.norm() <= p as f64 + 1.0 {
        // power series of e^{zx}, convergent for every z
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(length.powi(p as i32 + 1) / (p as f64 + 1.0), 0.0);
        let base = length.powi(p as i32 + 1);
        for k in 1..200 {
            term *= zl / k as f64;
            let add = term * base / (p + k + 1) as f64;
            sum += add;
            if add.norm() <= 1e-17 * sum.norm() {
                break;
            }
        }
        return sum * b.exp();
    }
    let end = (zl + b).exp();
    let mut j = (end - Complex64::new(b.exp(), 0.0)) / z;
    let mut lp = 1.0;
    for q in 1..=p {
        lp *= length;
        j = (end * lp - j * q as f64) / z;
    }
    j
}

/// Real function on `[0, L]` given as a finite sum of closed-form terms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeFunction {
    terms: Vec<Term>,
}

/// Relative tolerance for merging equal-frequency terms.
pub const MERGE_TOLERANCE: f64 = 1e-12;

fn same_frequency(a: f64, b: f64) -> bool {
    (a - b).abs() <= MERGE_TOLERANCE * a.abs().max(b.abs())
}

impl EdgeFunction {
    pub fn zero() -> Self {
        EdgeFunction { terms: Vec::new() }
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        let mut f = EdgeFunction { terms };
        f.canonicalize();
        f
    }

    pub fn cos(c: f64, k: f64) -> Self {
        Self::from_terms(vec![Term::new(c, TermKind::Cos, k)])
    }

    pub fn sin(c: f64, k: f64) -> Self {
        Self::from_terms(vec![Term::new(c, TermKind::Sin, k)])
    }

    pub fn cosh(c: f64, k: f64) -> Self {
        Self::from_terms(vec![Term::new(c, TermKind::Cosh, k)])
    }

    pub fn sinh(c: f64, k: f64) -> Self {
        Self::from_terms(vec![Term::new(c, TermKind::Sinh, k)])
    }

    /// `c · cosh(kx) / cosh(kL)`, stored without overflow.
    pub fn cosh_normalized(c: f64, k: f64, length: f64) -> Self {
        let a = (k * length).abs();
        let s = a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2;
        Self::from_terms(vec![Term { coefficient: c, kind: TermKind::Cosh, frequency: k, log_scale: s }])
    }

    /// `c · sinh(kx) / sinh(kL)` for `k > 0`, stored without overflow.
    pub fn sinh_normalized(c: f64, k: f64, length: f64) -> Self {
        let a = k * length;
        let s = if a < 20.0 { a.sinh().ln() } else { a + (-(-2.0 * a).exp()).ln_1p() - std::f64::consts::LN_2 };
        Self::from_terms(vec![Term { coefficient: c, kind: TermKind::Sinh, frequency: k, log_scale: s }])
    }

    pub fn monomial(c: f64, power: u32) -> Self {
        Self::from_terms(vec![Term::new(c, TermKind::Monomial, power as f64)])
    }

    /// Polynomial `Σ coeffs[p] x^p`.
    pub fn polynomial(coeffs: &[f64]) -> Self {
        Self::from_terms(
            coeffs
                .iter()
                .enumerate()
                .map(|(p, &c)| Term::new(c, TermKind::Monomial, p as f64))
                .collect(),
        )
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn canonicalize(&mut self) {
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for mut t in self.terms.drain(..) {
            if t.coefficient == 0.0 {
                continue;
            }
            if t.frequency < 0.0 {
                t.frequency = -t.frequency;
                if matches!(t.kind, TermKind::Sin | TermKind::Sinh) {
                    t.coefficient = -t.coefficient;
                }
            }
            if t.kind == TermKind::Monomial {
                assert!(t.frequency.fract() == 0.0, "monomial powers must be integers");
            } else if t.frequency == 0.0 {
                match t.kind {
                    TermKind::Cos | TermKind::Cosh => {
                        t = Term::new(t.coefficient * (-t.log_scale).exp(), TermKind::Monomial, 0.0);
                    }
                    _ => continue,
                }
            }
            if t.kind == TermKind::Monomial && t.log_scale != 0.0 {
                t.coefficient *= (-t.log_scale).exp();
                t.log_scale = 0.0;
            }
            if let Some(o) = out.iter_mut().find(|o| o.kind == t.kind && same_frequency(o.frequency, t.frequency)) {
                // keep the smaller scale so the merged coefficient stays bounded
                if t.log_scale < o.log_scale {
                    std::mem::swap(o, &mut t);
                }
                o.coefficient += t.coefficient * (o.log_scale - t.log_scale).exp();
            } else {
                out.push(t);
            }
        }
        out.retain(|t| t.coefficient != 0.0);
        out.sort_by(|a, b| a.kind.cmp(&b.kind).then(a.frequency.total_cmp(&b.frequency)));
        self.terms = out;
    }

    /// Derivative of the given order at `x`, no range checks.
    pub fn eval(&self, x: f64, order: usize) -> f64 {
        self.terms.iter().map(|t| t.eval(x, order)).sum()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x, 0)
    }

    /// Checked evaluation on `[0, length]` for derivative orders 0..=4.
    pub fn evaluate(&self, x: f64, order: usize, length: f64) -> Result<f64> {
        if order > 4 {
            return Err(Error::Domain(format!("derivative order {order} outside 0..=4")));
        }
        let slack = 1e-12 * length.max(1.0);
        if !(x >= -slack && x <= length + slack) {
            return Err(Error::Domain(format!("x = {x} outside [0, {length}]")));
        }
        Ok(self.eval(x, order))
    }

    pub fn derivative(&self, order: usize) -> EdgeFunction {
        let mut terms = self.terms.clone();
        for _ in 0..order {
            terms = terms.iter().filter_map(Term::derivative).collect();
        }
        Self::from_terms(terms)
    }

    pub fn scaled(&self, c: f64) -> EdgeFunction {
        Self::from_terms(
            self.terms
                .iter()
                .map(|t| Term { coefficient: t.coefficient * c, ..*t })
                .collect(),
        )
    }

    pub fn add(&self, other: &EdgeFunction) -> EdgeFunction {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self::from_terms(terms)
    }

    /// `Σ cᵢ fᵢ`.
    pub fn linear_combination(parts: &[(f64, &EdgeFunction)]) -> EdgeFunction {
        let mut terms = Vec::new();
        for (c, f) in parts {
            terms.extend(f.terms.iter().map(|t| Term { coefficient: t.coefficient * c, ..*t }));
        }
        Self::from_terms(terms)
    }

    /// Closed-form ∫₀ᴸ f g dx.
    pub fn inner_product(&self, other: &EdgeFunction, length: f64) -> f64 {
        let a: Vec<Atom> = self.terms.iter().flat_map(Term::atoms).collect();
        let b: Vec<Atom> = other.terms.iter().flat_map(Term::atoms).collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for u in &a {
            for v in &b {
                acc += u.c * v.c * atom_integral(u.p + v.p, u.z + v.z, u.b + v.b, length);
            }
        }
        acc.re
    }

    pub fn norm(&self, length: f64) -> f64 {
        self.inner_product(self, length).max(0.0).sqrt()
    }
}

/// Free-function form of [`EdgeFunction::evaluate`].
pub fn evaluate(f: &EdgeFunction, x: f64, derivative_order: usize, length: f64) -> Result<f64> {
    f.evaluate(x, derivative_order, length)
}

/// Free-function form of [`EdgeFunction::inner_product`].
pub fn inner_product(f: &EdgeFunction, g: &EdgeFunction, length: f64) -> f64 {
    f.inner_product(g, length)
}

/// Function on the tree: one [`EdgeFunction`] per edge, x = 0 at the interior vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFunction {
    pub components: Vec<EdgeFunction>,
}

impl GraphFunction {
    pub fn new(components: Vec<EdgeFunction>) -> Self {
        GraphFunction { components }
    }

    pub fn zero(num_edges: usize) -> Self {
        GraphFunction { components: vec![EdgeFunction::zero(); num_edges] }
    }

    /// `(w₁ f, …, w_N f)`.
    pub fn weighted(f: &EdgeFunction, weights: &[f64]) -> Self {
        GraphFunction { components: weights.iter().map(|&w| f.scaled(w)).collect() }
    }

    pub fn num_edges(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, edge: usize, x: f64, order: usize) -> f64 {
        self.components[edge].eval(x, order)
    }

    pub fn scaled(&self, c: f64) -> Self {
        GraphFunction { components: self.components.iter().map(|f| f.scaled(c)).collect() }
    }

    pub fn add(&self, other: &GraphFunction) -> Result<Self> {
        check_edges(self, other)?;
        Ok(GraphFunction {
            components: self.components.iter().zip(&other.components).map(|(a, b)| a.add(b)).collect(),
        })
    }

    /// `Σ cᵢ Fᵢ` over graph functions with a common edge count.
    pub fn linear_combination(parts: &[(f64, &GraphFunction)], num_edges: usize) -> Result<Self> {
        let mut components = Vec::with_capacity(num_edges);
        for k in 0..num_edges {
            let mut edge_parts = Vec::with_capacity(parts.len());
            for (c, g) in parts {
                if g.num_edges() != num_edges {
                    return Err(Error::InvalidInput("component count mismatch".into()));
                }
                edge_parts.push((*c, &g.components[k]));
            }
            components.push(EdgeFunction::linear_combination(&edge_parts));
        }
        Ok(GraphFunction { components })
    }

    pub fn inner_product(&self, other: &GraphFunction, length: f64) -> Result<f64> {
        check_edges(self, other)?;
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.inner_product(b, length))
            .sum())
    }

    pub fn norm(&self, length: f64) -> f64 {
        self.components.iter().map(|f| f.inner_product(f, length)).sum::<f64>().max(0.0).sqrt()
    }
}

fn check_edges(a: &GraphFunction, b: &GraphFunction) -> Result<()> {
    if a.num_edges() != b.num_edges() {
        return Err(Error::InvalidInput(format!(
            "component count mismatch: {} vs {}",
            a.num_edges(),
            b.num_edges()
        )));
    }
    Ok(())
}

/// L²(Γ) inner product; both functions must have `cfg.num_edges` components.
pub fn graph_inner_product(f: &GraphFunction, g: &GraphFunction, cfg: &StarTreeConfig) -> Result<f64> {
    if f.num_edges() != cfg.num_edges || g.num_edges() != cfg.num_edges {
        return Err(Error::InvalidInput(format!(
            "expected {} components, got {} and {}",
            cfg.num_edges,
            f.num_edges(),
            g.num_edges()
        )));
    }
    f.inner_product(g, cfg.edge_length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::oracle_rule;

    #[test]
    fn cos_second_derivative_at_zero() {
        let f = EdgeFunction::cos(1.0, 2.0);
        assert_eq!(f.evaluate(0.0, 2, 1.0).unwrap(), -4.0);
    }

    #[test]
    fn lifting_polynomial_slope() {
        // (x/L)^4 (x - L) = x^5/L^4 - x^4/L^3
        let l = 1.7f64;
        let p = EdgeFunction::polynomial(&[0.0, 0.0, 0.0, 0.0, -1.0 / l.powi(3), 1.0 / l.powi(4)]);
        assert!((p.evaluate(l, 1, l).unwrap() - 1.0).abs() < 1e-14);
        assert!(p.evaluate(l, 0, l).unwrap().abs() < 1e-14);
        for d in 0..4 {
            assert_eq!(p.evaluate(0.0, d, l).unwrap(), 0.0);
        }
    }

    #[test]
    fn sinh_third_derivative_against_finite_differences() {
        let f = EdgeFunction::sinh(1.0, 1.0);
        let h = 1e-5;
        let x = 1.0;
        // central difference of the second derivative, step 1e-5
        let fd = (f.eval(x + h, 2) - f.eval(x - h, 2)) / (2.0 * h);
        let exact = f.evaluate(1.0, 3, 1.0).unwrap();
        assert!((exact - 1f64.cosh()).abs() < 1e-14);
        assert!(((fd - exact) / exact).abs() < 1e-6);
    }

    #[test]
    fn domain_errors() {
        let f = EdgeFunction::cos(1.0, 1.0);
        assert!(f.evaluate(1.5, 0, 1.0).is_err());
        assert!(f.evaluate(-0.1, 0, 1.0).is_err());
        assert!(f.evaluate(0.5, 5, 1.0).is_err());
    }

    #[test]
    fn cos_pi_norm() {
        let f = EdgeFunction::cos(1.0, std::f64::consts::PI);
        assert!((f.inner_product(&f, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn monomial_times_sine_matches_oracle() {
        let f = EdgeFunction::monomial(1.0, 2);
        let g = EdgeFunction::sin(1.0, 3.0);
        let exact = f.inner_product(&g, 2.0);
        let q = oracle_rule().integrate(0.0, 2.0, |x| x * x * (3.0 * x).sin());
        assert!((exact - q).abs() < 1e-10, "{exact} vs {q}");
    }

    #[test]
    fn scaled_hyperbolics_do_not_overflow() {
        let l = 2.0;
        let k = 400.0;
        let f = EdgeFunction::cosh_normalized(1.0, k, l);
        // the scale carries the rounding of kL, about 1e-13 relative here
        assert!((f.eval(l, 0) - 1.0).abs() < 1e-12);
        assert!((f.eval(l, 1) - k * (k * l).tanh()).abs() < 1e-9);
        // ∫ cosh²(kx)/cosh²(kL) ≈ 1/(2k) for large kL
        let n2 = f.inner_product(&f, l);
        assert!((n2 - (1.0 / (2.0 * k) + l / 2.0 / (k * l).cosh().powi(2))).abs() < 1e-14);
        let g = EdgeFunction::sinh_normalized(1.0, k, l);
        assert!((g.eval(l, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_forms() {
        let f = EdgeFunction::from_terms(vec![
            Term::new(1.0, TermKind::Cos, -2.0),
            Term::new(2.0, TermKind::Cos, 2.0),
            Term::new(1.0, TermKind::Sin, 0.0),
            Term::new(3.0, TermKind::Cosh, 0.0),
            Term::new(1.0, TermKind::Sinh, -1.0),
        ]);
        assert_eq!(
            f.terms(),
            &[
                Term::new(3.0, TermKind::Monomial, 0.0),
                Term::new(3.0, TermKind::Cos, 2.0),
                Term::new(-1.0, TermKind::Sinh, 1.0)
            ]
        );
        let z = EdgeFunction::cos(1.0, 1.0).add(&EdgeFunction::cos(-1.0, 1.0));
        assert!(z.is_zero());
        assert_eq!(z.norm(1.0), 0.0);
    }

    #[test]
    fn derivative_function_matches_pointwise() {
        let f = EdgeFunction::linear_combination(&[
            (0.3, &EdgeFunction::cos(1.0, 2.5)),
            (-1.1, &EdgeFunction::sinh_normalized(1.0, 3.0, 1.0)),
            (2.0, &EdgeFunction::polynomial(&[1.0, 0.0, -2.0, 0.5])),
        ]);
        for d in 0..=4 {
            let fd = f.derivative(d);
            for x in [0.0, 0.2, 0.77, 1.0] {
                assert!((fd.eval(x, 0) - f.eval(x, d)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn graph_inner_products() {
        let pi = std::f64::consts::PI;
        let cfg = StarTreeConfig::new(3, 1.0, 1.0, Model::ModelI, 1.0).unwrap();
        let f = GraphFunction::weighted(&EdgeFunction::cos(1.0, pi), &[1.0, 1.0, 1.0]);
        assert!((graph_inner_product(&f, &f, &cfg).unwrap() - 1.5).abs() < 1e-14);
        let phi = EdgeFunction::sin(1.0, 2.0).add(&EdgeFunction::monomial(0.5, 1));
        let a = GraphFunction::weighted(&phi, &[1.0, -1.0, 0.0]);
        let b = GraphFunction::weighted(&phi, &[0.0, 1.0, -1.0]);
        let lhs = graph_inner_product(&a, &b, &cfg).unwrap();
        assert!((lhs + phi.inner_product(&phi, 1.0)).abs() < 1e-14);
        assert!(graph_inner_product(&a, &GraphFunction::zero(2), &cfg).is_err());
    }

    #[test]
    fn config_json() {
        let cfg = StarTreeConfig::from_json(r#"{"edges":3,"length":1.0,"lambda":1.0,"model":"II","horizon":2.0}"#).unwrap();
        assert_eq!(cfg.model, Model::ModelII);
        assert_eq!(cfg.horizon, 2.0);
        assert!(StarTreeConfig::from_json(r#"{"edges":3,"length":1.0,"lambda":1.0,"model":"II","horizon":2.0,"x":1}"#).is_err());
        assert!(StarTreeConfig::from_json(r#"{"edges":1,"length":1.0,"lambda":1.0,"model":"I","horizon":2.0}"#).is_err());
        assert!(StarTreeConfig::from_json(r#"{"edges":3,"length":-1.0,"lambda":1.0,"model":"I","horizon":2.0}"#).is_err());
        assert!(StarTreeConfig::from_json(r#"{"edges":3,"length":1.0,"lambda":1.0,"model":"III","horizon":2.0}"#).is_err());
        let back = StarTreeConfig::from_value(&cfg.to_json_value()).unwrap();
        assert_eq!(back, cfg);
    }
}
