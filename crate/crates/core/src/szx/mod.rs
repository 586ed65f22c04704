// SPDX-License-Identifier: Apache-2.0

//! Scalable ZX diagrams: families, instantiation and simplification.

pub mod emit;
pub mod graph;
pub mod instantiate;
pub mod perm;
pub mod phase;
pub mod simplify;

pub use graph::{Color, Concrete, Diagram, Edge, Family, FamilyBox, NodeId, NodeKind, PortRef};
pub use instantiate::{instantiate, instantiate_box, InstantiateError};
pub use phase::{Phase, PhaseExpr, PhaseVec, RotationConvention};
pub use simplify::{simplify, simplify_with_stats, SimplifyStats};
