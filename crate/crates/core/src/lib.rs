//! Triangle decompositions by randomised algebraic construction, plus counting
//! tools for Steiner triple systems and designs.

pub mod chain;
pub mod completion;
pub mod counting;
pub mod error;
pub mod gf2lin;
pub mod graph;
pub mod greedy;
pub mod hole;
pub mod numeric;
pub mod pipeline;
pub mod rng;
pub mod shuffle;
pub mod template;
pub mod typicality;

pub use chain::{boundary, verify_decomposition, Chain, IntGraph, Matching, TriangleVec};
pub use error::{Error, Result, Stage};
pub use gf2lin::FieldElem;
pub use graph::{Edge, Graph, Triple};
pub use template::{Template, TemplateMode};
