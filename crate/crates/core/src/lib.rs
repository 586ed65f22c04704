// SPDX-License-Identifier: Apache-2.0

//! Compiler from a linear, size-indexed quantum lambda calculus to families
//! of scalable ZX diagrams, with a density-matrix reference semantics.

pub mod nat;
pub mod syntax;
pub mod parser;
pub mod typecheck;
pub mod eval;
pub mod reduce;
pub mod szx;
pub mod oracle;
pub mod translate;
pub mod pipeline;
