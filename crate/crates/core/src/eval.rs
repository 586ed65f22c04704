// SPDX-License-Identifier: Apache-2.0

//! Evaluation of parameter-level terms to naturals, lists and closures.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::nat::{NatEnv, NatError, ParamVal};
use crate::syntax::{build, Prim, Term, TermKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamValue {
    Nat(u64),
    List(Vec<u64>),
    Closure {
        var: String,
        body: Term,
        env: Env,
    },
}

pub type Env = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound parameter `{0}`")]
    Unbound(String),
    #[error("expected {expected}, found {found}")]
    Shape { expected: &'static str, found: String },
    #[error("cannot destructure an empty list")]
    EmptyList,
    #[error(transparent)]
    Arith(#[from] NatError),
    #[error("`{0}` is not a parameter-level term")]
    NotEvaluable(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Nat(n) => write!(f, "{n}"),
            ParamValue::List(xs) => {
                let items: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
                write!(f, "[{}]", items.join(","))
            }
            ParamValue::Closure { var, .. } => write!(f, "<closure \\'{var}>"),
        }
    }
}

impl ParamValue {
    fn kind(&self) -> String {
        match self {
            ParamValue::Nat(n) => format!("natural {n}"),
            ParamValue::List(xs) => format!("list of length {}", xs.len()),
            ParamValue::Closure { .. } => "closure".to_string(),
        }
    }

    pub fn as_nat(&self) -> Result<u64, EvalError> {
        match self {
            ParamValue::Nat(n) => Ok(*n),
            other => Err(EvalError::Shape {
                expected: "a natural",
                found: other.kind(),
            }),
        }
    }

    pub fn as_list(&self) -> Result<&[u64], EvalError> {
        match self {
            ParamValue::List(xs) => Ok(xs),
            other => Err(EvalError::Shape {
                expected: "a list",
                found: other.kind(),
            }),
        }
    }

    /// JSON scalar, array, or a string for closures.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            ParamValue::Nat(n) => serde_json::json!(n),
            ParamValue::List(xs) => serde_json::json!(xs),
            ParamValue::Closure { .. } => serde_json::Value::String(self.to_string()),
        }
    }
}

impl From<&ParamVal> for ParamValue {
    fn from(v: &ParamVal) -> Self {
        match v {
            ParamVal::Nat(n) => ParamValue::Nat(*n),
            ParamVal::List(xs) => ParamValue::List(xs.clone()),
        }
    }
}

pub fn env_from_nat_env(env: &NatEnv) -> Env {
    env.iter().map(|(k, v)| (k.clone(), v.into())).collect()
}

/// Evaluates a term of evaluable type under a parameter environment.
pub fn eval(term: &Term, env: &Env) -> Result<ParamValue, EvalError> {
    match &term.kind {
        TermKind::Var(x) => env.get(x).cloned().ok_or_else(|| EvalError::Unbound(x.clone())),
        TermKind::Num(n) => Ok(ParamValue::Nat(*n)),
        TermKind::Nil(_) => Ok(ParamValue::List(vec![])),
        TermKind::Arith(op, a, b) => {
            let a = eval(a, env)?.as_nat()?;
            let b = eval(b, env)?.as_nat()?;
            Ok(ParamValue::Nat(op.apply(a, b)?))
        }
        TermKind::Cons(h, t) => {
            let h = eval(h, env)?.as_nat()?;
            let mut xs = vec![h];
            xs.extend_from_slice(eval(t, env)?.as_list()?);
            Ok(ParamValue::List(xs))
        }
        TermKind::PLam { var, body, .. } => Ok(ParamValue::Closure {
            var: var.clone(),
            body: (**body).clone(),
            env: env.clone(),
        }),
        TermKind::PApp(f, a) => {
            if let Some(v) = eval_prim_spine(term, env)? {
                return Ok(v);
            }
            let arg = eval(a, env)?;
            apply(eval(f, env)?, arg)
        }
        TermKind::Prim(Prim::Range) => Ok(closure_of(
            &["%lo", "%hi"],
            build::papp(
                build::papp(build::prim(Prim::Range), build::var("%lo")),
                build::var("%hi"),
            ),
        )),
        TermKind::Prim(Prim::Reverse) => Ok(closure_of(
            &["%xs"],
            build::papp(build::prim(Prim::Reverse), build::var("%xs")),
        )),
        TermKind::Ifz { guard, then, els } => {
            if eval(guard, env)?.as_nat()? == 0 {
                eval(then, env)
            } else {
                eval(els, env)
            }
        }
        TermKind::For { index, list, body } => {
            let items = eval(list, env)?.as_list()?.to_vec();
            let mut out = Vec::with_capacity(items.len());
            let mut inner = env.clone();
            for k in items {
                inner.insert(index.clone(), ParamValue::Nat(k));
                out.push(eval(body, &inner)?.as_nat()?);
            }
            Ok(ParamValue::List(out))
        }
        TermKind::LetCons {
            head,
            tail,
            bound,
            body,
            ..
        } => {
            let xs = eval(bound, env)?.as_list()?.to_vec();
            let (h, t) = xs.split_first().ok_or(EvalError::EmptyList)?;
            let mut inner = env.clone();
            inner.insert(head.clone(), ParamValue::Nat(*h));
            inner.insert(tail.clone(), ParamValue::List(t.to_vec()));
            eval(body, &inner)
        }
        _ => Err(EvalError::NotEvaluable(crate::parser::pretty_print(term))),
    }
}

fn closure_of(vars: &[&str], body: Term) -> ParamValue {
    let body = vars[1..]
        .iter()
        .rev()
        .fold(body, |b, v| build::plam(v, b));
    ParamValue::Closure {
        var: vars[0].to_string(),
        body,
        env: Env::new(),
    }
}

fn apply(f: ParamValue, arg: ParamValue) -> Result<ParamValue, EvalError> {
    match f {
        ParamValue::Closure { var, body, mut env } => {
            env.insert(var, arg);
            eval(&body, &env)
        }
        other => Err(EvalError::Shape {
            expected: "a closure",
            found: other.kind(),
        }),
    }
}

/// Saturated `range @n @m` and `reverse @V`.
fn eval_prim_spine(term: &Term, env: &Env) -> Result<Option<ParamValue>, EvalError> {
    let mut args = Vec::new();
    let mut head = term;
    while let TermKind::PApp(f, a) = &head.kind {
        args.push(&**a);
        head = f;
    }
    args.reverse();
    match (&head.kind, args.as_slice()) {
        (TermKind::Prim(Prim::Range), [lo, hi]) => {
            let lo = eval(lo, env)?.as_nat()?;
            let hi = eval(hi, env)?.as_nat()?;
            Ok(Some(ParamValue::List((lo..hi.max(lo)).collect())))
        }
        (TermKind::Prim(Prim::Reverse), [xs]) => {
            let mut xs = eval(xs, env)?.as_list()?.to_vec();
            xs.reverse();
            Ok(Some(ParamValue::List(xs)))
        }
        _ => Ok(None),
    }
}

/// Whether two terms evaluate to the same value. Closures are compared by
/// applying both to every argument in `probe`.
pub fn eval_preserved_by_step(before: &Term, after: &Term, env: &Env) -> bool {
    let probe: Vec<ParamValue> = (0..5).map(ParamValue::Nat).collect();
    match (eval(before, env), eval(after, env)) {
        (Ok(a), Ok(b)) => same_value(a, b, &probe, 3),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

fn same_value(a: ParamValue, b: ParamValue, probe: &[ParamValue], depth: u32) -> bool {
    match (&a, &b) {
        (ParamValue::Closure { .. }, ParamValue::Closure { .. }) => {
            if depth == 0 {
                return true;
            }
            probe.iter().all(|p| {
                match (apply(a.clone(), p.clone()), apply(b.clone(), p.clone())) {
                    (Ok(x), Ok(y)) => same_value(x, y, probe, depth - 1),
                    (Err(_), Err(_)) => true,
                    _ => false,
                }
            })
        }
        _ => a == b,
    }
}
