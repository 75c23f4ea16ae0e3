//! The exceptional values of λ at which boundary traces of eigenfunctions vanish.
//!
//! With `s = 4L²λ/π²`:
//!
//! * N₁: `s = (2m)² + (2n)²`, `1 ≤ m < n`
//! * N₂: `s = (2m)²`, `m ≥ 1`
//! * N₃: `s = (2n+1)²`, `n ≥ 0`
//! * N₄: `s = (2m)² + (2n+1)²`, `m ≥ 1`, `n ≥ 0`
//! * N_odd: `s = (2m+1)² + (2n+1)²`, `0 ≤ m < n`
//! * N_mixt = N₃ ∪ N₄
//!
//! N₀ does not depend on L: `λ/π² = m² + n²`, `1 ≤ m < n`, same parity.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriticalSetId {
    N0,
    N1,
    N2,
    N3,
    N4,
    Nodd,
    Nmixt,
}

impl CriticalSetId {
    pub const ALL: [CriticalSetId; 7] = [Self::N0, Self::N1, Self::N2, Self::N3, Self::N4, Self::Nodd, Self::Nmixt];

    pub fn name(self) -> &'static str {
        match self {
            Self::N0 => "N0",
            Self::N1 => "N1",
            Self::N2 => "N2",
            Self::N3 => "N3",
            Self::N4 => "N4",
            Self::Nodd => "Nodd",
            Self::Nmixt => "Nmixt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(s))
    }

    fn is_l_free(self) -> bool {
        self == Self::N0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    /// Integers reproducing λ; single-index sets report `(index, 0)`.
    pub witness: Option<(u64, u64)>,
    /// `4L²λ/π²`, or `λ/π²` for N₀.
    pub scaled_value: f64,
    /// For N_mixt: which of N₃, N₄ matched.
    pub component: Option<CriticalSetId>,
}

/// Relative tolerance on the scaled value.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

pub fn scaled_value(set: CriticalSetId, lambda: f64, length: f64) -> f64 {
    if set.is_l_free() {
        lambda / (PI * PI)
    } else {
        4.0 * length * length * lambda / (PI * PI)
    }
}

fn close(a: f64, target: f64) -> bool {
    (a - target).abs() <= MEMBERSHIP_TOL * target.abs().max(1.0)
}

/// Integer square root if `v` is within tolerance of a perfect square.
fn square_root_of(v: f64, scale: f64) -> Option<u64> {
    if v < -MEMBERSHIP_TOL * scale {
        return None;
    }
    let r = v.max(0.0).sqrt().round() as u64;
    if ((r * r) as f64 - v).abs() <= MEMBERSHIP_TOL * scale.max(1.0) {
        Some(r)
    } else {
        None
    }
}

/// Exact integer search for a witness, first in lexicographic order.
pub fn is_member(set: CriticalSetId, lambda: f64, length: f64) -> Membership {
    let s = scaled_value(set, lambda, length);
    let none = Membership { member: false, witness: None, scaled_value: s, component: None };
    if !(s.is_finite() && s > 0.0) {
        return none;
    }
    let bound = s.sqrt().ceil() as u64 + 1;
    let found = |w: (u64, u64)| Membership { member: true, witness: Some(w), scaled_value: s, component: None };
    match set {
        CriticalSetId::N0 => {
            for m in 1..=bound {
                if let Some(n) = square_root_of(s - (m * m) as f64, s) {
                    if n > m && (n - m) % 2 == 0 {
                        return found((m, n));
                    }
                }
            }
            none
        }
        CriticalSetId::N1 => {
            for m in 1..=bound {
                if let Some(r) = square_root_of(s - (4 * m * m) as f64, s) {
                    if r % 2 == 0 && r / 2 > m {
                        return found((m, r / 2));
                    }
                }
            }
            none
        }
        CriticalSetId::N2 => match square_root_of(s, s) {
            Some(r) if r >= 2 && r % 2 == 0 && close((r * r) as f64, s) => found((r / 2, 0)),
            _ => none,
        },
        CriticalSetId::N3 => match square_root_of(s, s) {
            Some(r) if r % 2 == 1 && close((r * r) as f64, s) => found(((r - 1) / 2, 0)),
            _ => none,
        },
        CriticalSetId::N4 => {
            for m in 1..=bound {
                if let Some(r) = square_root_of(s - (4 * m * m) as f64, s) {
                    if r % 2 == 1 {
                        return found((m, (r - 1) / 2));
                    }
                }
            }
            none
        }
        CriticalSetId::Nodd => {
            for m in 0..=bound {
                let a = 2 * m + 1;
                if let Some(r) = square_root_of(s - (a * a) as f64, s) {
                    if r % 2 == 1 && (r - 1) / 2 > m {
                        return found((m, (r - 1) / 2));
                    }
                }
            }
            none
        }
        CriticalSetId::Nmixt => {
            for part in [CriticalSetId::N3, CriticalSetId::N4] {
                let m = is_member(part, lambda, length);
                if m.member {
                    return Membership { component: Some(part), ..m };
                }
            }
            none
        }
    }
}

/// Sorted, de-duplicated elements `≤ cutoff`, in units of λ.
pub fn enumerate(set: CriticalSetId, length: f64, cutoff: f64) -> Vec<f64> {
    if cutoff.is_nan() || cutoff <= 0.0 {
        return Vec::new();
    }
    let unit = if set.is_l_free() { PI * PI } else { PI * PI / (4.0 * length * length) };
    let smax = cutoff / unit * (1.0 + 1e-12);
    let bound = smax.sqrt().ceil() as u64 + 1;
    let mut scaled: Vec<u64> = Vec::new();
    let mut push = |v: u64| {
        if v as f64 <= smax {
            scaled.push(v)
        }
    };
    match set {
        CriticalSetId::N0 => {
            for m in 1..=bound {
                for n in (m + 2..=bound).step_by(2) {
                    push(m * m + n * n);
                }
            }
        }
        CriticalSetId::N1 => {
            for m in 1..=bound {
                for n in m + 1..=bound {
                    push(4 * (m * m + n * n));
                }
            }
        }
        CriticalSetId::N2 => (1..=bound).for_each(|m| push(4 * m * m)),
        CriticalSetId::N3 => (0..=bound).for_each(|n| push((2 * n + 1) * (2 * n + 1))),
        CriticalSetId::N4 => {
            for m in 1..=bound {
                for n in 0..=bound {
                    push(4 * m * m + (2 * n + 1) * (2 * n + 1));
                }
            }
        }
        CriticalSetId::Nodd => {
            for m in 0..=bound {
                for n in m + 1..=bound {
                    push((2 * m + 1) * (2 * m + 1) + (2 * n + 1) * (2 * n + 1));
                }
            }
        }
        CriticalSetId::Nmixt => {
            let mut v = enumerate(CriticalSetId::N3, length, cutoff);
            v.extend(enumerate(CriticalSetId::N4, length, cutoff));
            return sorted_unique(v);
        }
    }
    scaled.sort_unstable();
    scaled.dedup();
    scaled.into_iter().map(|v| v as f64 * unit).collect()
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= MEMBERSHIP_TOL * b.abs());
    v
}

/// Checks N₁ ∪ N_odd = N₀/(4L²) on all elements below `cutoff`.
pub fn verify_partition_identity(length: f64, cutoff: f64) -> bool {
    let mut lhs = enumerate(CriticalSetId::N1, length, cutoff);
    lhs.extend(enumerate(CriticalSetId::Nodd, length, cutoff));
    let lhs = sorted_unique(lhs);
    let scale = 4.0 * length * length;
    let rhs: Vec<f64> = enumerate(CriticalSetId::N0, length, cutoff * scale).into_iter().map(|v| v / scale).collect();
    let rhs = sorted_unique(rhs);
    lhs.len() == rhs.len() && lhs.iter().zip(&rhs).all(|(a, b)| (a - b).abs() <= MEMBERSHIP_TOL * b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n0_examples() {
        let m = is_member(CriticalSetId::N0, 10.0 * PI * PI, 3.7);
        assert!(m.member);
        assert_eq!(m.witness, Some((1, 3)));
        assert!(!is_member(CriticalSetId::N0, 2.0 * PI * PI, 1.0).member);
    }

    #[test]
    fn n0_non_membership_by_brute_force() {
        // no 1 ≤ m < n ≤ 3 of equal parity has m² + n² = 2
        let hits = (1..=3u64)
            .flat_map(|m| (m + 1..=3).map(move |n| (m, n)))
            .filter(|(m, n)| (n - m) % 2 == 0 && m * m + n * n == 2)
            .count();
        assert_eq!(hits, 0);
    }

    #[test]
    fn n1_example() {
        let l = 1.9;
        let m = is_member(CriticalSetId::N1, 5.0 * PI * PI / (l * l), l);
        assert_eq!(m.witness, Some((1, 2)));
        assert!((m.scaled_value - 20.0).abs() < 1e-12);
    }

    #[test]
    fn single_index_sets() {
        let l = 1.0;
        assert_eq!(is_member(CriticalSetId::N2, PI * PI, l).witness, Some((1, 0)));
        assert_eq!(is_member(CriticalSetId::N3, PI * PI / 4.0, l).witness, Some((0, 0)));
        assert_eq!(is_member(CriticalSetId::N3, 9.0 * PI * PI / 4.0, l).witness, Some((1, 0)));
        assert!(!is_member(CriticalSetId::N3, PI * PI, l).member);
        assert!(!is_member(CriticalSetId::N2, 1.0, l).member);
        let m = is_member(CriticalSetId::Nmixt, 5.0 * PI * PI / 4.0, l);
        assert_eq!(m.component, Some(CriticalSetId::N4));
        assert_eq!(m.witness, Some((1, 0)));
        assert_eq!(is_member(CriticalSetId::Nodd, 2.5 * PI * PI, l).witness, Some((0, 1)));
    }

    #[test]
    fn enumeration_examples() {
        let pi2 = PI * PI;
        let n3 = enumerate(CriticalSetId::N3, 1.0, 25.0);
        assert_eq!(n3.len(), 2);
        assert!((n3[0] - pi2 / 4.0).abs() < 1e-12 && (n3[1] - 9.0 * pi2 / 4.0).abs() < 1e-12);
        let n2 = enumerate(CriticalSetId::N2, 1.0, 15.0);
        assert_eq!(n2.len(), 1);
        assert!((n2[0] - pi2).abs() < 1e-12);
        let n4 = enumerate(CriticalSetId::N4, 1.0, 100.0);
        assert!((n4[0] - 5.0 * pi2 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn partition_identity() {
        assert!(verify_partition_identity(1.0, 100.0 * PI * PI));
        assert!(verify_partition_identity(2.0, 50.0));
        assert!(verify_partition_identity(1.0, 1.0));
        assert!(enumerate(CriticalSetId::N1, 1.0, 1.0).is_empty());
    }

    #[test]
    fn enumerated_elements_are_members() {
        for set in CriticalSetId::ALL {
            let v = enumerate(set, 1.3, 400.0);
            assert!(v.windows(2).all(|w| w[0] < w[1]));
            for x in v {
                let m = is_member(set, x, 1.3);
                assert!(m.member, "{set:?} {x}");
            }
        }
    }
}
