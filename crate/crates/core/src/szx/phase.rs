// SPDX-License-Identifier: Apache-2.0

//! Spider phases as exact rational multiples of a full turn.

use std::fmt;

use crate::nat::{NatEnv, NatError, NatExpr};

/// `2π · num / den`, kept in lowest terms with `0 <= num < den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phase {
    num: u64,
    den: u64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Phase {
    pub const ZERO: Phase = Phase { num: 0, den: 1 };
    pub const HALF: Phase = Phase { num: 1, den: 2 };

    /// `2π · num / den`. Panics if `den == 0`.
    pub fn turns(num: i64, den: u64) -> Phase {
        assert!(den > 0, "phase denominator must be positive");
        let d = den as i128;
        let n = (num as i128).rem_euclid(d) as u64;
        let g = gcd(n, den).max(1);
        Phase {
            num: n / g,
            den: den / g,
        }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn radians(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.num == 0 {
            f.write_str("0")
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// How a rotation parameter `m` maps to an angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RotationConvention {
    /// `Rz @m` rotates by `2π/m`.
    #[default]
    TwoPi,
    /// `Rz @m` rotates by `π/m`.
    Pi,
}

impl RotationConvention {
    /// Denominator of the turn fraction for parameter `m`.
    pub fn denominator(self, m: NatExpr) -> NatExpr {
        match self {
            RotationConvention::TwoPi => m,
            RotationConvention::Pi => NatExpr::mul(NatExpr::Const(2), m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhaseError {
    ZeroDenominator(String),
    Nat(NatError),
    Length { expected: u64, found: u64 },
}

impl fmt::Display for PhaseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseError::ZeroDenominator(e) => write!(f, "rotation by a zero denominator `{e}`"),
            PhaseError::Nat(e) => write!(f, "{e}"),
            PhaseError::Length { expected, found } => {
                write!(f, "phase vector of length {found} on a spider of multiplicity {expected}")
            }
        }
    }
}

impl From<NatError> for PhaseError {
    fn from(e: NatError) -> Self {
        PhaseError::Nat(e)
    }
}

/// A single symbolic phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhaseExpr {
    Const(Phase),
    /// `2π · sign / den`.
    Turn { negative: bool, den: NatExpr },
}

impl PhaseExpr {
    pub fn eval(&self, env: &NatEnv) -> Result<Phase, PhaseError> {
        match self {
            PhaseExpr::Const(p) => Ok(*p),
            PhaseExpr::Turn { negative, den } => {
                let d = den.eval(env)?;
                if d == 0 {
                    return Err(PhaseError::ZeroDenominator(den.to_string()));
                }
                Ok(Phase::turns(if *negative { -1 } else { 1 }, d))
            }
        }
    }
}

impl fmt::Display for PhaseExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseExpr::Const(p) => write!(f, "{p}"),
            PhaseExpr::Turn { negative, den } => {
                write!(f, "{}1/({den})", if *negative { "-" } else { "" })
            }
        }
    }
}

/// Phase vectors of scalable spiders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhaseVec {
    List(Vec<PhaseExpr>),
    Uniform(PhaseExpr, NatExpr),
    Concat(Vec<PhaseVec>),
}

impl PhaseVec {
    pub fn single(p: PhaseExpr) -> Self {
        PhaseVec::List(vec![p])
    }

    pub fn zeros(len: NatExpr) -> Self {
        PhaseVec::Uniform(PhaseExpr::Const(Phase::ZERO), len)
    }

    pub fn len_expr(&self) -> NatExpr {
        match self {
            PhaseVec::List(v) => NatExpr::Const(v.len() as u64),
            PhaseVec::Uniform(_, n) => n.clone(),
            PhaseVec::Concat(vs) => vs
                .iter()
                .map(PhaseVec::len_expr)
                .fold(NatExpr::Const(0), NatExpr::add),
        }
    }

    pub fn eval(&self, env: &NatEnv) -> Result<Vec<Phase>, PhaseError> {
        match self {
            PhaseVec::List(v) => v.iter().map(|p| p.eval(env)).collect(),
            PhaseVec::Uniform(p, n) => {
                let n = n.eval(env)?;
                if n == 0 {
                    return Ok(vec![]);
                }
                Ok(vec![p.eval(env)?; n as usize])
            }
            PhaseVec::Concat(vs) => {
                let mut out = Vec::new();
                for v in vs {
                    out.extend(v.eval(env)?);
                }
                Ok(out)
            }
        }
    }

    pub fn free_vars(&self) -> std::collections::BTreeSet<String> {
        let mut out = std::collections::BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            PhaseVec::List(v) => {
                for p in v {
                    if let PhaseExpr::Turn { den, .. } = p {
                        out.extend(den.free_vars());
                    }
                }
            }
            PhaseVec::Uniform(p, n) => {
                if let PhaseExpr::Turn { den, .. } = p {
                    out.extend(den.free_vars());
                }
                out.extend(n.free_vars());
            }
            PhaseVec::Concat(vs) => vs.iter().for_each(|v| v.collect(out)),
        }
    }
}

impl fmt::Display for PhaseVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseVec::List(v) => {
                let items: Vec<String> = v.iter().map(|p| p.to_string()).collect();
                write!(f, "[{}]", items.join(", "))
            }
            PhaseVec::Uniform(p, n) => write!(f, "[{p}]*({n})"),
            PhaseVec::Concat(vs) => {
                let items: Vec<String> = vs.iter().map(|p| p.to_string()).collect();
                f.write_str(&items.join(" ++ "))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowest_terms() {
        assert_eq!(Phase::turns(2, 4), Phase::HALF);
        assert_eq!(Phase::turns(-1, 4), Phase::turns(3, 4));
        assert_eq!(Phase::turns(4, 4), Phase::ZERO);
    }

    #[test]
    fn symbolic_turns() {
        let mut env = NatEnv::new();
        env.insert("m".into(), crate::nat::ParamVal::Nat(8));
        let p = PhaseExpr::Turn {
            negative: true,
            den: NatExpr::var("m"),
        };
        assert_eq!(p.eval(&env).unwrap(), Phase::turns(7, 8));
        let v = PhaseVec::Concat(vec![PhaseVec::single(p), PhaseVec::zeros(NatExpr::Const(2))]);
        assert_eq!(v.eval(&env).unwrap().len(), 3);
    }
}
