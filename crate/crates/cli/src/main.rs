// SPDX-License-Identifier: Apache-2.0

//! Command-line driver: check, evaluate, reduce, compile, instantiate,
//! simulate and verify programs.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use szxc::nat::ParamVal;
use szxc::oracle::{self, CpMap};
use szxc::parser::pretty_print;
use szxc::pipeline::{self, PipelineError};
use szxc::szx::{emit, RotationConvention};
use szxc::translate::TranslateOptions;

#[derive(Parser, Debug)]
#[command(name = "szxc", version, about = "Compile quantum lambda programs to scalable ZX diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Program source file.
    file: PathBuf,
    /// Definition to use instead of the program's default entry.
    #[arg(long)]
    entry: Option<String>,
    /// Parameter binding such as `n=3` or `xs=[1,2]`. Repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = pipeline::parse_assignment)]
    params: Vec<(String, ParamVal)>,
    /// Phase of `Rz @m`: a full turn or half a turn divided by m.
    #[arg(long, value_name = "2pi|pi", default_value = "2pi", value_parser = pipeline::parse_convention)]
    rz_convention: RotationConvention,
}

#[derive(Args, Debug)]
struct Limits {
    /// Largest number of input plus output qubits to simulate.
    #[arg(long, env = "SZXC_MAX_QUBITS", default_value_t = oracle::DEFAULT_MAX_QUBITS)]
    max_qubits: usize,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Emit {
    Json,
    Dot,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Route {
    /// Interpret the instantiated diagram.
    Diagram,
    /// Reduce the program and simulate the recorded circuit.
    Circuit,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Typecheck every definition and print its type.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate an entry whose result is a natural or a list of naturals.
    Eval {
        #[command(flatten)]
        common: Common,
    },
    /// Print the normal form of the entry.
    Reduce {
        #[command(flatten)]
        common: Common,
        /// Print every intermediate term.
        #[arg(long)]
        trace: bool,
    },
    /// Emit the diagram family of the entry.
    Compile {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "json")]
        emit: Emit,
    },
    /// Emit the concrete diagram at the given parameters.
    Instantiate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "json")]
        emit: Emit,
        #[arg(long)]
        no_simplify: bool,
    },
    /// Print the channel denoted by the entry at the given parameters.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        limits: Limits,
        #[arg(long, value_enum, default_value = "diagram")]
        route: Route,
        #[arg(long)]
        no_simplify: bool,
    },
    /// Compare the compiled diagram with the reduced program's circuit.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        limits: Limits,
        /// Largest accepted normalized Frobenius distance.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
}

enum Failure {
    User(String),
    Mismatch(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::User(e.to_string())
    }
}

fn load(common: &Common) -> Result<String, Failure> {
    std::fs::read_to_string(&common.file)
        .map_err(|e| Failure::User(format!("io error: {}: {e}", common.file.display())))
}

fn values(common: &Common) -> BTreeMap<String, ParamVal> {
    common.params.iter().cloned().collect()
}

fn compile(common: &Common) -> Result<pipeline::Compiled, Failure> {
    let src = load(common)?;
    let opts = TranslateOptions {
        convention: common.rz_convention,
    };
    Ok(pipeline::compile_source(&src, common.entry.as_deref(), opts)?)
}

fn cpmap_json(m: &CpMap) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| [m.get(r, c).re, m.get(r, c).im]).collect())
        .collect();
    json!({ "inputs": m.inputs, "outputs": m.outputs, "matrix": rows })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Check { common } => {
            let src = load(&common)?;
            let (defs, _) = pipeline::check_source(&src, common.entry.as_deref())?;
            for d in defs {
                println!("{} : {}", d.name, d.ty);
            }
        }
        Command::Eval { common } => {
            let src = load(&common)?;
            let (defs, idx) = pipeline::check_source(&src, common.entry.as_deref())?;
            let v = pipeline::evaluate(&defs[idx], &values(&common))?;
            println!("{v}");
        }
        Command::Reduce { common, trace } => {
            let src = load(&common)?;
            let (defs, idx) = pipeline::check_source(&src, common.entry.as_deref())?;
            for t in pipeline::reduce_entry(&defs[idx], &values(&common), trace)? {
                println!("{}", pretty_print(&t));
            }
        }
        Command::Compile { common, emit } => {
            let c = compile(&common)?;
            let d = &c.translation.diagram;
            match emit {
                Emit::Json => println!("{}", emit::to_json_string(d)),
                Emit::Dot => print!("{}", emit::to_dot(d)),
            }
        }
        Command::Instantiate {
            common,
            emit,
            no_simplify,
        } => {
            let c = compile(&common)?;
            let env = pipeline::param_env(&c.translation.params, &values(&common))?;
            let d = pipeline::instantiate(&c.translation, &env, !no_simplify)?;
            match emit {
                Emit::Json => println!("{}", emit::to_json_string(&d)),
                Emit::Dot => print!("{}", emit::to_dot(&d)),
            }
        }
        Command::Simulate {
            common,
            limits,
            route,
            no_simplify,
        } => {
            let c = compile(&common)?;
            let env = pipeline::param_env(&c.translation.params, &values(&common))?;
            let m = match route {
                Route::Diagram => {
                    let d = pipeline::instantiate(&c.translation, &env, !no_simplify)?;
                    oracle::interpret(&d, limits.max_qubits).map_err(PipelineError::from)?
                }
                Route::Circuit => pipeline::reduction_channel(&c, &env)?,
            };
            println!("{}", cpmap_json(&m));
        }
        Command::Verify {
            common,
            limits,
            tolerance,
        } => {
            let c = compile(&common)?;
            let env = pipeline::param_env(&c.translation.params, &values(&common))?;
            let v = pipeline::verify(&c, &env, limits.max_qubits)?;
            let line = format!("residual {:e} (tolerance {:e})", v.distance, tolerance);
            if v.distance <= tolerance {
                println!("ok: {line}");
            } else {
                return Err(Failure::Mismatch(format!("verification failed: {line}")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors are user errors; 2 is reserved for failed verification.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    // Deep terms recurse deeply in the checker and reducer.
    let worker = std::thread::Builder::new()
        .stack_size(256 << 20)
        .spawn(move || run(cli))
        .expect("spawn worker thread");
    match worker.join() {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::User(msg))) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Ok(Err(Failure::Mismatch(msg))) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
        Err(_) => ExitCode::from(1),
    }
}
