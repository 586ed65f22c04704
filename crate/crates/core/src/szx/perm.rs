// SPDX-License-Identifier: Apache-2.0

//! Wire permutations used when instantiating families.
//!
//! A permutation is stored as a vector `p` with `p[i]` the position that
//! wire `i` is sent to. Instance-major ("interleaved") orderings list every
//! part of the first instance before the second instance; part-major
//! ("grouped") orderings list every instance of the first part first.

use std::fmt;

use crate::nat::{NatEnv, NatError, NatExpr};

/// `σ[interleaved] = grouped` for per-instance part widths `counts[inst][part]`.
pub fn build_sigma_parts(counts: &[Vec<u64>]) -> Vec<usize> {
    let parts = counts.first().map_or(0, Vec::len);
    assert!(counts.iter().all(|c| c.len() == parts), "ragged part counts");
    // Start offset of every (part, inst) block in the grouped order.
    let mut grouped_start = vec![vec![0usize; counts.len()]; parts];
    let mut pos = 0usize;
    for (j, starts) in grouped_start.iter_mut().enumerate() {
        for (i, c) in counts.iter().enumerate() {
            starts[i] = pos;
            pos += c[j] as usize;
        }
    }
    let mut sigma = Vec::with_capacity(pos);
    for (i, c) in counts.iter().enumerate() {
        for (j, &width) in c.iter().enumerate() {
            let start = grouped_start[j][i];
            sigma.extend(start..start + width as usize);
        }
    }
    sigma
}

/// σ for the two-part gather `v(n) + w(n)` instantiated over `list`.
pub fn build_sigma(list: &[u64], v: impl Fn(u64) -> u64, w: impl Fn(u64) -> u64) -> Vec<usize> {
    let counts: Vec<Vec<u64>> = list.iter().map(|&n| vec![v(n), w(n)]).collect();
    build_sigma_parts(&counts)
}

/// Regroups `n` interleaved blocks `A C B C` (widths `a c b c`) into
/// `A^n C^n B^n C^n`. `τ[i]` is the grouped position of interleaved wire `i`.
pub fn build_tau(n: u64, a: u64, b: u64, c: u64) -> Vec<usize> {
    let k = a + c + b + c;
    let total = n * k;
    let n1 = n.saturating_sub(1);
    (0..total)
        .map(|i| {
            let r = i % k;
            let q = i / k;
            let g = if r < a {
                r + a * q
            } else if r < a + c {
                r + c * q + a * n1
            } else if r < a + c + b {
                r + b * q + (a + c) * n1
            } else {
                r + c * q + (a + c + b) * n1
            };
            g as usize
        })
        .collect()
}

pub fn identity(n: usize) -> Vec<usize> {
    (0..n).collect()
}

pub fn is_identity(p: &[usize]) -> bool {
    p.iter().enumerate().all(|(i, &x)| i == x)
}

pub fn is_bijection(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    for &x in p {
        if x >= p.len() || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

pub fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x] = i;
    }
    inv
}

/// `then ∘ first`: wire `i` goes to `then[first[i]]`.
pub fn compose(first: &[usize], then: &[usize]) -> Vec<usize> {
    first.iter().map(|&x| then[x]).collect()
}

/// Block-diagonal sum: each block acts on its own contiguous range.
pub fn direct_sum(blocks: &[Vec<usize>]) -> Vec<usize> {
    let mut out = Vec::new();
    for b in blocks {
        let off = out.len();
        out.extend(b.iter().map(|x| x + off));
    }
    out
}

/// Symbolic permutation on a family diagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PermSpec {
    Explicit(Vec<usize>),
    /// The accumulating-map regrouping, see [`build_tau`].
    Tau {
        n: NatExpr,
        a: NatExpr,
        b: NatExpr,
        c: NatExpr,
    },
}

impl PermSpec {
    pub fn eval(&self, env: &NatEnv) -> Result<Vec<usize>, NatError> {
        match self {
            PermSpec::Explicit(p) => Ok(p.clone()),
            PermSpec::Tau { n, a, b, c } => {
                Ok(build_tau(n.eval(env)?, a.eval(env)?, b.eval(env)?, c.eval(env)?))
            }
        }
    }

    pub fn len_expr(&self) -> NatExpr {
        match self {
            PermSpec::Explicit(p) => NatExpr::Const(p.len() as u64),
            PermSpec::Tau { n, a, b, c } => NatExpr::mul(
                n.clone(),
                NatExpr::add(
                    NatExpr::add(a.clone(), c.clone()),
                    NatExpr::add(b.clone(), c.clone()),
                ),
            ),
        }
    }
}

impl fmt::Display for PermSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PermSpec::Explicit(p) => write!(f, "{p:?}"),
            PermSpec::Tau { n, a, b, c } => write!(f, "tau({n}; {a}, {b}, {c})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_examples() {
        assert_eq!(build_sigma(&[1, 1], |_| 1, |_| 1), vec![0, 2, 1, 3]);
        assert_eq!(build_sigma(&[], |_| 1, |_| 1), Vec::<usize>::new());
        assert_eq!(build_sigma(&[5], |_| 2, |_| 1), vec![0, 1, 2]);
    }

    #[test]
    fn tau_examples() {
        assert_eq!(build_tau(2, 1, 1, 1), vec![0, 2, 4, 6, 1, 3, 5, 7]);
        assert!(is_identity(&build_tau(1, 2, 1, 3)));
        assert!(build_tau(0, 1, 1, 1).is_empty());
    }

    #[test]
    fn tau_is_sigma_of_four_parts() {
        for n in 0..4 {
            for (a, b, c) in [(1, 1, 1), (2, 0, 1), (0, 3, 2), (1, 2, 0)] {
                let counts = vec![vec![a, c, b, c]; n as usize];
                assert_eq!(build_tau(n, a, b, c), build_sigma_parts(&counts));
            }
        }
    }

    #[test]
    fn algebra() {
        let p = vec![2, 0, 1];
        assert!(is_identity(&compose(&p, &invert(&p))));
        assert_eq!(direct_sum(&[vec![1, 0], vec![0]]), vec![1, 0, 2]);
        assert!(!is_bijection(&[0, 0]));
    }
}
