//! Concept-blending suggestion engine.
//!
//! Given a pop-culture domain (a plot summary turned into a knowledge base)
//! and a product term, the engine finds connecting concepts with three
//! strategies and expands each concept into pop-culture and product scenes
//! with image references.

pub mod association;
pub mod diagnostics;
pub mod eval;
mod fsutil;
pub mod kb;
pub mod llm;
pub mod semantic;
pub mod service;
pub mod stage1;
pub mod stage2;
pub mod text;
