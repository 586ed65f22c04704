// SPDX-License-Identifier: Apache-2.0

//! Circuits read off the reduction of a program, and their density-matrix
//! simulation.
//!
//! Inputs are replaced by token variables naming qubit wires. Reduction then
//! runs with a hook that turns every saturated gate, rotation, `meas` or
//! `new` application into a circuit operation on those wires and hands back
//! the output tokens.

use num_complex::Complex64;

use crate::reduce::{normalize_with, spine, Arg, DEFAULT_FUEL};
use crate::syntax::build;
use crate::syntax::{Gate, Term, TermKind, Type};
use crate::szx::{Color, Phase, RotationConvention};

use super::cpm::CpMap;
use super::OracleError;

#[derive(Debug, Clone, PartialEq)]
pub enum CircuitOp {
    H(usize),
    Cnot { control: usize, target: usize },
    Rotate { wire: usize, color: Color, phase: Phase },
    /// Measurement in the computational basis, keeping the outcome.
    Decohere(usize),
    /// Prepares a fresh wire in `|0>` or `|1>`.
    Allocate { wire: usize, one: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    /// Wires `0..inputs` carry the input state; later wires start in `|0>`.
    pub inputs: usize,
    pub wires: usize,
    pub ops: Vec<CircuitOp>,
    pub outputs: Vec<usize>,
}

const TOKEN: &str = "%w";

fn token(w: usize) -> Term {
    build::var(&format!("{TOKEN}{w}"))
}

fn token_wire(t: &Term) -> Option<usize> {
    match &t.kind {
        TermKind::Var(x) => x.strip_prefix(TOKEN)?.parse().ok(),
        _ => None,
    }
}

struct Recorder {
    wires: usize,
    ops: Vec<CircuitOp>,
    convention: RotationConvention,
    error: Option<String>,
}

impl Recorder {
    fn fresh(&mut self) -> usize {
        self.wires += 1;
        self.wires - 1
    }

    /// Wire holding the value of a qubit or bit argument.
    fn wire_of(&mut self, t: &Term) -> Result<usize, String> {
        if let Some(w) = token_wire(t) {
            return Ok(w);
        }
        match &t.kind {
            TermKind::Bit(b) => {
                let wire = self.fresh();
                self.ops.push(CircuitOp::Allocate { wire, one: *b });
                Ok(wire)
            }
            _ => {
                let r = self.apply(t)?;
                token_wire(&r).ok_or_else(|| {
                    format!("`{}` does not produce a single wire", crate::parser::pretty_print(t))
                })
            }
        }
    }

    fn apply(&mut self, t: &Term) -> Result<Term, String> {
        let (head, args) = spine(t);
        let states: Vec<&Term> = args
            .iter()
            .filter_map(|a| match a {
                Arg::State(s) => Some(*s),
                Arg::Param(_) => None,
            })
            .collect();
        match (&head.kind, states.as_slice()) {
            (TermKind::Gate(Gate::H), [q]) => {
                let w = self.wire_of(q)?;
                self.ops.push(CircuitOp::H(w));
                Ok(token(w))
            }
            (TermKind::Gate(Gate::Cnot), [c, x]) => {
                let control = self.wire_of(c)?;
                let target = self.wire_of(x)?;
                self.ops.push(CircuitOp::Cnot { control, target });
                Ok(build::pair(token(control), token(target)))
            }
            (TermKind::Meas, [q]) | (TermKind::New, [q]) => {
                let w = self.wire_of(q)?;
                self.ops.push(CircuitOp::Decohere(w));
                Ok(token(w))
            }
            (TermKind::Rot(r), [q]) => {
                let m = match args.first() {
                    Some(Arg::Param(p)) => match p.kind {
                        TermKind::Num(m) => m,
                        _ => return Err("rotation parameter is not a numeral".into()),
                    },
                    _ => return Err("rotation without a parameter".into()),
                };
                let den = match self.convention {
                    RotationConvention::TwoPi => m,
                    RotationConvention::Pi => 2 * m,
                };
                if den == 0 {
                    return Err("rotation by a zero denominator".into());
                }
                let w = self.wire_of(q)?;
                let color = if r.name().starts_with("Rz") {
                    Color::Z
                } else {
                    Color::X
                };
                self.ops.push(CircuitOp::Rotate {
                    wire: w,
                    color,
                    phase: Phase::turns(r.sign(), den),
                });
                Ok(token(w))
            }
            _ => Err(format!(
                "cannot run `{}` as a gate",
                crate::parser::pretty_print(t)
            )),
        }
    }
}

/// Token structure standing for an input of type `ty`.
fn input_value(ty: &Type, next: &mut usize) -> Result<Term, String> {
    Ok(match ty {
        Type::Qubit | Type::Bit => {
            *next += 1;
            token(*next - 1)
        }
        Type::Unit => build::unit(),
        Type::Tensor(a, b) => {
            let l = input_value(a, next)?;
            build::pair(l, input_value(b, next)?)
        }
        Type::Vec(a, n) => {
            let n = n
                .as_const()
                .ok_or_else(|| format!("input length `{n}` is not a number"))?;
            let items: Vec<Term> = (0..n).map(|_| input_value(a, next)).collect::<Result<_, _>>()?;
            items
                .into_iter()
                .rev()
                .fold(build::nil((**a).clone()), |acc, x| build::cons(x, acc))
        }
        other => return Err(format!("inputs of type `{other}` are not supported")),
    })
}

fn collect_outputs(t: &Term, rec: &mut Recorder, out: &mut Vec<usize>) -> Result<(), String> {
    if let Some(w) = token_wire(t) {
        out.push(w);
        return Ok(());
    }
    match &t.kind {
        TermKind::Unit | TermKind::Nil(_) => Ok(()),
        TermKind::Pair(a, b) | TermKind::Cons(a, b) => {
            collect_outputs(a, rec, out)?;
            collect_outputs(b, rec, out)
        }
        TermKind::Bit(_) | TermKind::App(..) => {
            let w = rec.wire_of(t)?;
            out.push(w);
            Ok(())
        }
        _ => Err(format!(
            "result `{}` is not a quantum value",
            crate::parser::pretty_print(t)
        )),
    }
}

/// Reduces `body` with its free state variables bound to input wires and
/// records the resulting circuit. Sizes in `inputs` must be numerals.
pub fn extract_circuit(
    body: &Term,
    inputs: &[(String, Type)],
    convention: RotationConvention,
) -> Result<Circuit, OracleError> {
    let mut next = 0;
    let mut term = body.clone();
    for (name, ty) in inputs {
        let v = input_value(ty, &mut next).map_err(OracleError::Extraction)?;
        term = term.subst(name, &v);
    }
    let mut rec = Recorder {
        wires: next,
        ops: Vec::new(),
        convention,
        error: None,
    };
    let result = {
        let mut hook = |t: &Term| -> Option<Term> {
            if rec.error.is_some() {
                return None;
            }
            match rec.apply(t) {
                Ok(r) => Some(r),
                Err(e) => {
                    rec.error = Some(e);
                    None
                }
            }
        };
        normalize_with(&term, DEFAULT_FUEL, &mut hook)
    };
    if let Some(e) = rec.error.take() {
        return Err(OracleError::Extraction(e));
    }
    let normal = result.map_err(|e| OracleError::Extraction(e.to_string()))?;
    let mut outputs = Vec::new();
    collect_outputs(&normal, &mut rec, &mut outputs).map_err(OracleError::Extraction)?;
    Ok(Circuit {
        inputs: next,
        wires: rec.wires,
        ops: rec.ops,
        outputs,
    })
}

/// Dense density matrix on `wires` qubits, wire 0 most significant.
struct Density {
    wires: usize,
    data: Vec<Complex64>,
}

impl Density {
    fn dim(&self) -> usize {
        1 << self.wires
    }

    fn mask(&self, w: usize) -> usize {
        1 << (self.wires - 1 - w)
    }

    fn unitary1(&mut self, w: usize, u: [[Complex64; 2]; 2]) {
        let dim = self.dim();
        let m = self.mask(w);
        // Rows: ρ ← Uρ.
        for col in 0..dim {
            for r0 in (0..dim).filter(|r| r & m == 0) {
                let (a, b) = (self.data[r0 * dim + col], self.data[(r0 | m) * dim + col]);
                self.data[r0 * dim + col] = u[0][0] * a + u[0][1] * b;
                self.data[(r0 | m) * dim + col] = u[1][0] * a + u[1][1] * b;
            }
        }
        // Columns: ρ ← ρU†.
        for row in 0..dim {
            for c0 in (0..dim).filter(|c| c & m == 0) {
                let (a, b) = (self.data[row * dim + c0], self.data[row * dim + (c0 | m)]);
                self.data[row * dim + c0] = a * u[0][0].conj() + b * u[0][1].conj();
                self.data[row * dim + (c0 | m)] = a * u[1][0].conj() + b * u[1][1].conj();
            }
        }
    }

    fn permute(&mut self, f: impl Fn(usize) -> usize) {
        let dim = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                out[f(r) * dim + f(c)] = self.data[r * dim + c];
            }
        }
        self.data = out;
    }

    fn apply(&mut self, op: &CircuitOp) {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        match op {
            CircuitOp::H(w) => self.unitary1(*w, [[h, h], [h, -h]]),
            // Fresh wires start in |0>, so allocation only has to flip.
            CircuitOp::Allocate { wire, one } => {
                if *one {
                    let m = self.mask(*wire);
                    self.permute(|x| x ^ m);
                }
            }
            CircuitOp::Cnot { control, target } => {
                let (mc, mt) = (self.mask(*control), self.mask(*target));
                self.permute(|x| if x & mc != 0 { x ^ mt } else { x });
            }
            CircuitOp::Rotate { wire, color, phase } => {
                let e = Complex64::from_polar(1.0, phase.radians());
                match color {
                    Color::Z => self.unitary1(*wire, [[one, zero], [zero, e]]),
                    Color::X => {
                        let p = (one + e) * 0.5;
                        let q = (one - e) * 0.5;
                        self.unitary1(*wire, [[p, q], [q, p]])
                    }
                }
            }
            CircuitOp::Decohere(w) => {
                let dim = self.dim();
                let m = self.mask(*w);
                for r in 0..dim {
                    for c in 0..dim {
                        if (r ^ c) & m != 0 {
                            self.data[r * dim + c] = zero;
                        }
                    }
                }
            }
        }
    }
}

/// Largest number of wires the simulator accepts.
pub const MAX_SIMULATED_WIRES: usize = 12;

impl Circuit {
    /// The channel from the input wires to the output wires, in order.
    /// Wires missing from the outputs are traced out.
    pub fn to_cpmap(&self) -> Result<CpMap, OracleError> {
        if self.wires > MAX_SIMULATED_WIRES {
            return Err(OracleError::TooManyQubits {
                qubits: self.wires,
                limit: MAX_SIMULATED_WIRES,
            });
        }
        let n_in = self.inputs;
        let n_out = self.outputs.len();
        let rest: Vec<usize> = (0..self.wires).filter(|w| !self.outputs.contains(w)).collect();
        let in_dim = 1usize << n_in;
        let out_dim = 1usize << n_out;
        let cols = in_dim * in_dim;
        let mut data = vec![Complex64::new(0.0, 0.0); out_dim * out_dim * cols];
        let shift = self.wires - n_in;
        for i in 0..in_dim {
            for i2 in 0..in_dim {
                let mut rho = Density {
                    wires: self.wires,
                    data: vec![Complex64::new(0.0, 0.0); 1 << (2 * self.wires)],
                };
                let dim = rho.dim();
                rho.data[(i << shift) * dim + (i2 << shift)] = Complex64::new(1.0, 0.0);
                for op in &self.ops {
                    rho.apply(op);
                }
                let col = i * in_dim + i2;
                for r in 0..dim {
                    for c in 0..dim {
                        let v = rho.data[r * dim + c];
                        if v == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        if rest.iter().any(|&w| (r ^ c) & rho.mask(w) != 0) {
                            continue;
                        }
                        let pick = |x: usize| {
                            self.outputs
                                .iter()
                                .fold(0usize, |acc, &w| (acc << 1) | ((x & rho.mask(w) != 0) as usize))
                        };
                        let row = pick(r) * out_dim + pick(c);
                        data[row * cols + col] += v;
                    }
                }
            }
        }
        Ok(CpMap {
            inputs: n_in,
            outputs: n_out,
            data,
        })
    }
}

/// Density-matrix simulation of `c` as a channel.
pub fn simulate_circuit(c: &Circuit) -> Result<CpMap, OracleError> {
    c.to_cpmap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_term;

    #[test]
    fn bell_pair_circuit() {
        let t = parse_term("let a (*) b = CNOT (H x) y in a (*) b").unwrap();
        let c = extract_circuit(
            &t,
            &[("x".into(), Type::Qubit), ("y".into(), Type::Qubit)],
            RotationConvention::TwoPi,
        )
        .unwrap();
        assert_eq!(
            c.ops,
            vec![CircuitOp::H(0), CircuitOp::Cnot { control: 0, target: 1 }]
        );
        assert_eq!(c.outputs, vec![0, 1]);
        let m = c.to_cpmap().unwrap();
        // |00><00| goes to the Bell state, whose corner entries are 1/2.
        assert!((m.get(0, 0).re - 0.5).abs() < 1e-12);
        assert!((m.get(15, 0).re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fresh_bits_and_measurement() {
        let t = parse_term("meas (new #1)").unwrap();
        let c = extract_circuit(&t, &[], RotationConvention::TwoPi).unwrap();
        assert_eq!(
            c.ops,
            vec![
                CircuitOp::Allocate { wire: 0, one: true },
                CircuitOp::Decohere(0),
                CircuitOp::Decohere(0)
            ]
        );
        let m = simulate_circuit(&c).unwrap();
        assert_eq!(m.outputs, 1);
        assert!((m.get(3, 0).re - 1.0).abs() < 1e-12);
    }
}
