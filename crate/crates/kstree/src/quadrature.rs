//! Gauss–Legendre quadrature.
//!
//! The library computes every integral in closed form; quadrature is used for
//! the tail estimate of the simulator and as an independent oracle in tests.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::parallel::Parallelism;

/// Nodes and weights on [-1, 1], nodes increasing.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Legendre P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        Self::with_policy(n, Parallelism::default())
    }

    pub fn with_policy(n: usize, par: Parallelism) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let nf = n as f64;
        let half = n.div_ceil(2);
        // Tricomi initial guesses, refined by Newton on the recurrence.
        let roots = par.map_range(half, |i| {
            let k = (i + 1) as f64;
            let theta = PI * (4.0 * k - 1.0) / (4.0 * nf + 2.0);
            let mut x = (1.0 - 1.0 / (8.0 * nf * nf) + 1.0 / (8.0 * nf * nf * nf)) * theta.cos();
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1e-300) {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        });
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for (i, &(x, w)) in roots.iter().enumerate() {
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
            nodes[i] = -x;
            weights[i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// ∫_a^b f(x) dx.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let c = 0.5 * (b - a);
        let m = 0.5 * (b + a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(m + c * x);
        }
        acc * c
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (b - a);
        let m = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (m + c * x, w * c))
    }
}

/// Shared 10⁴-node rule used by oracle checks.
pub fn oracle_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(10_000))
}

/// Shared 64-node rule used for per-edge tail estimates.
pub fn edge_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 64, 301] {
            let g = GaussLegendre::new(n);
            let s: f64 = g.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n = {n}: {s}");
        }
    }

    #[test]
    fn exact_for_polynomials() {
        let g = GaussLegendre::new(6);
        // degree 11 is the limit for 6 nodes
        let v = g.integrate(0.0, 2.0, |x| x.powi(11));
        assert!((v - 2f64.powi(12) / 12.0).abs() < 1e-10);
    }

    #[test]
    fn nodes_are_symmetric_and_sorted() {
        let g = GaussLegendre::new(101);
        for i in 0..101 {
            assert!((g.nodes[i] + g.nodes[100 - i]).abs() < 1e-15);
            if i > 0 {
                assert!(g.nodes[i] > g.nodes[i - 1]);
            }
        }
    }

    #[test]
    fn oscillatory_integral() {
        let g = GaussLegendre::new(200);
        let v = g.integrate(0.0, 3.0, |x| (40.0 * x).cos());
        assert!((v - (120.0f64).sin() / 40.0).abs() < 1e-13);
    }

    #[test]
    fn sequential_and_parallel_rules_match() {
        let a = GaussLegendre::with_policy(257, Parallelism::Sequential);
        let b = GaussLegendre::with_policy(257, Parallelism::Parallel);
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.weights, b.weights);
    }
}
