// SPDX-License-Identifier: Apache-2.0

//! End-to-end drivers: source text to checked definitions, families,
//! concrete diagrams and channels.

use std::collections::BTreeMap;
use std::fmt;

use crate::eval::{eval, EvalError, ParamValue};
use crate::nat::{NatEnv, NatExpr, ParamVal};
use crate::oracle::{self, CpMap, OracleError};
use crate::parser::{parse_program, ParseError};
use crate::reduce::{self, ReduceError};
use crate::syntax::{build, nat_to_term, Term, Type};
use crate::szx::{self, Concrete, Diagram, InstantiateError, RotationConvention};
use crate::translate::{translate_def, TranslateError, TranslateOptions, Translation};
use crate::typecheck::{check_program, CheckedDef, TypeError};

/// Failure of one pipeline stage, displayed with the stage name first.
#[derive(Debug, Clone, PartialEq)]
pub enum PipelineError {
    Parse(ParseError),
    Type(TypeError),
    Translate(TranslateError),
    Params(String),
    Instantiate(InstantiateError),
    Oracle(OracleError),
    Eval(EvalError),
    Reduce(ReduceError),
}

impl PipelineError {
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Parse(_) => "parse",
            PipelineError::Type(_) => "type",
            PipelineError::Translate(_) => "translate",
            PipelineError::Params(_) => "params",
            PipelineError::Instantiate(_) => "instantiate",
            PipelineError::Oracle(_) => "oracle",
            PipelineError::Eval(_) => "eval",
            PipelineError::Reduce(_) => "reduce",
        }
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            PipelineError::Parse(e) => e.to_string(),
            PipelineError::Type(e) => e.to_string(),
            PipelineError::Translate(e) => e.to_string(),
            PipelineError::Params(m) => m.clone(),
            PipelineError::Instantiate(e) => e.to_string(),
            PipelineError::Oracle(e) => e.to_string(),
            PipelineError::Eval(e) => e.to_string(),
            PipelineError::Reduce(e) => e.to_string(),
        };
        write!(f, "{} error: {msg}", self.stage())
    }
}

impl std::error::Error for PipelineError {}

impl From<ParseError> for PipelineError {
    fn from(e: ParseError) -> Self {
        PipelineError::Parse(e)
    }
}

impl From<TypeError> for PipelineError {
    fn from(e: TypeError) -> Self {
        PipelineError::Type(e)
    }
}

impl From<TranslateError> for PipelineError {
    fn from(e: TranslateError) -> Self {
        PipelineError::Translate(e)
    }
}

impl From<InstantiateError> for PipelineError {
    fn from(e: InstantiateError) -> Self {
        PipelineError::Instantiate(e)
    }
}

impl From<OracleError> for PipelineError {
    fn from(e: OracleError) -> Self {
        PipelineError::Oracle(e)
    }
}

impl From<EvalError> for PipelineError {
    fn from(e: EvalError) -> Self {
        PipelineError::Eval(e)
    }
}

impl From<ReduceError> for PipelineError {
    fn from(e: ReduceError) -> Self {
        PipelineError::Reduce(e)
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

/// Parses and checks a program, returning every definition and the index
/// of the entry (`entry` if given, else the program's default).
pub fn check_source(src: &str, entry: Option<&str>) -> Result<(Vec<CheckedDef>, usize)> {
    let mut prog = parse_program(src)?;
    if let Some(name) = entry {
        prog = prog.with_entry(name)?;
    }
    let defs = check_program(&prog)?;
    let idx = prog.entry;
    Ok((defs, idx))
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub entry: CheckedDef,
    pub translation: Translation,
    pub options: TranslateOptions,
}

pub fn compile_source(src: &str, entry: Option<&str>, options: TranslateOptions) -> Result<Compiled> {
    let (defs, idx) = check_source(src, entry)?;
    let entry = defs[idx].clone();
    let translation = translate_def(&entry, options)?;
    Ok(Compiled {
        entry,
        translation,
        options,
    })
}

/// Parses `name=value` assignments, where a value is a natural or a
/// bracketed, comma-separated list of naturals.
pub fn parse_assignment(s: &str) -> std::result::Result<(String, ParamVal), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, found `{s}`"))?;
    let name = name.trim().to_string();
    let value = value.trim();
    let parse_nat = |t: &str| {
        t.trim()
            .parse::<u64>()
            .map_err(|_| format!("`{t}` is not a natural number"))
    };
    if let Some(inner) = value.strip_prefix('[').and_then(|v| v.strip_suffix(']')) {
        let items = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner.split(',').map(parse_nat).collect::<std::result::Result<_, _>>()?
        };
        Ok((name, ParamVal::List(items)))
    } else {
        Ok((name, ParamVal::Nat(parse_nat(value)?)))
    }
}

/// Checks that `values` assigns every parameter a value of the right shape,
/// including list lengths.
pub fn param_env(params: &[(String, Type)], values: &BTreeMap<String, ParamVal>) -> Result<NatEnv> {
    let mut env = NatEnv::new();
    for (name, ty) in params {
        let Some(v) = values.get(name) else {
            return Err(PipelineError::Params(format!("no value for parameter `{name}`")));
        };
        match (ty, v) {
            (Type::Nat, ParamVal::Nat(_)) => {}
            (Type::Vec(_, len), ParamVal::List(xs)) => {
                let want = len
                    .eval(&env)
                    .map_err(|e| PipelineError::Params(e.to_string()))?;
                if want != xs.len() as u64 {
                    return Err(PipelineError::Params(format!(
                        "parameter `{name}` needs a list of length {want}, found {}",
                        xs.len()
                    )));
                }
            }
            _ => {
                return Err(PipelineError::Params(format!(
                    "parameter `{name}` of type `{ty}` cannot take the value {v:?}"
                )))
            }
        }
        env.insert(name.clone(), v.clone());
    }
    for name in values.keys() {
        if !params.iter().any(|(p, _)| p == name) {
            return Err(PipelineError::Params(format!("unknown parameter `{name}`")));
        }
    }
    Ok(env)
}

/// Instantiates the family, simplifying unless asked not to.
pub fn instantiate(t: &Translation, env: &NatEnv, simplify: bool) -> Result<Diagram<Concrete>> {
    let d = szx::instantiate(&t.diagram, env)?;
    Ok(if simplify { szx::simplify(&d) } else { d })
}

/// The channel denoted by the instantiated diagram.
pub fn diagram_channel(t: &Translation, env: &NatEnv, max_qubits: usize) -> Result<CpMap> {
    let d = instantiate(t, env, true)?;
    Ok(oracle::interpret(&d, max_qubits)?)
}

fn value_term(v: &ParamVal) -> Term {
    match v {
        ParamVal::Nat(n) => build::num(*n),
        ParamVal::List(xs) => xs
            .iter()
            .rev()
            .fold(build::nil(Type::Nat), |acc, &x| build::cons(build::num(x), acc)),
    }
}

/// `ty` with every size evaluated under `env`.
pub fn concrete_type(ty: &Type, env: &NatEnv) -> Result<Type> {
    let err = |e: crate::nat::NatError| PipelineError::Params(e.to_string());
    Ok(match ty {
        Type::Tensor(a, b) => Type::tensor(concrete_type(a, env)?, concrete_type(b, env)?),
        Type::Lolli(a, b) => Type::lolli(concrete_type(a, env)?, concrete_type(b, env)?),
        Type::Vec(a, n) => Type::vec(concrete_type(a, env)?, NatExpr::Const(n.eval(env).map_err(err)?)),
        other => other.clone(),
    })
}

/// The channel obtained by reducing the entry definition on token inputs
/// and simulating the extracted circuit.
pub fn reduction_channel(c: &Compiled, env: &NatEnv) -> Result<CpMap> {
    let mut term = c.entry.body.clone();
    for (p, _) in &c.translation.params {
        term = build::papp(term, value_term(&env[p]));
    }
    let mut inputs = Vec::new();
    for (x, ty) in &c.translation.inputs {
        term = build::app(term, build::var(x));
        inputs.push((x.clone(), concrete_type(ty, env)?));
    }
    let circuit = oracle::extract_circuit(&term, &inputs, c.options.convention)?;
    Ok(circuit.to_cpmap()?)
}

/// The dependent binders at the front of `ty`.
pub fn leading_params(ty: &Type) -> Vec<(String, Type)> {
    let mut out = Vec::new();
    let mut cur = ty;
    while let Type::Pi { var, dom, body } = cur {
        out.push((var.clone(), (**dom).clone()));
        cur = body;
    }
    out
}

/// The entry body applied to the leading parameters that have values, in
/// order, stopping at the first one without.
pub fn apply_params(def: &CheckedDef, values: &BTreeMap<String, ParamVal>) -> Result<Term> {
    let params = leading_params(&def.ty);
    for name in values.keys() {
        if !params.iter().any(|(p, _)| p == name) {
            return Err(PipelineError::Params(format!("unknown parameter `{name}`")));
        }
    }
    let mut term = def.body.clone();
    for (p, _) in &params {
        match values.get(p) {
            Some(v) => term = build::papp(term, value_term(v)),
            None => break,
        }
    }
    Ok(term)
}

/// Evaluates an evaluable entry with every parameter supplied.
pub fn evaluate(def: &CheckedDef, values: &BTreeMap<String, ParamVal>) -> Result<ParamValue> {
    if def.ty.classify() != Some(crate::syntax::Classification::Evaluable) {
        return Err(EvalError::NotEvaluable(format!("{} : {}", def.name, def.ty)).into());
    }
    param_env(&leading_params(&def.ty), values)?;
    Ok(eval(&apply_params(def, values)?, &Default::default())?)
}

/// Normal form of the entry applied to the given parameters, with every
/// intermediate term when `trace` is set.
pub fn reduce_entry(def: &CheckedDef, values: &BTreeMap<String, ParamVal>, trace: bool) -> Result<Vec<Term>> {
    let term = apply_params(def, values)?;
    if trace {
        Ok(reduce::trace(&term, reduce::DEFAULT_FUEL)?)
    } else {
        Ok(vec![reduce::normalize(&term, reduce::DEFAULT_FUEL)?])
    }
}

/// A size as a term, for callers building applications by hand.
pub fn size_term(e: &NatExpr) -> Term {
    nat_to_term(e)
}

/// Both routes and their normalized Frobenius distance.
#[derive(Debug, Clone)]
pub struct Verification {
    pub diagram: CpMap,
    pub reduction: CpMap,
    pub distance: f64,
}

pub fn verify(c: &Compiled, env: &NatEnv, max_qubits: usize) -> Result<Verification> {
    let diagram = diagram_channel(&c.translation, env, max_qubits)?;
    let reduction = reduction_channel(c, env)?;
    let distance = oracle::cpm_distance_mod_scalar(&reduction, &diagram);
    Ok(Verification {
        diagram,
        reduction,
        distance,
    })
}

/// Rotation convention from its command-line name.
pub fn parse_convention(s: &str) -> std::result::Result<RotationConvention, String> {
    match s {
        "2pi" | "two-pi" => Ok(RotationConvention::TwoPi),
        "pi" => Ok(RotationConvention::Pi),
        other => Err(format!("unknown rotation convention `{other}` (use 2pi or pi)")),
    }
}
