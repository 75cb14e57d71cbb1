//! Compiles the guide in `book/` as documentation tests, so every code
//! snippet in the book is checked against the current API by
//! `cargo test --doc`. The items below exist only under `cfg(doctest)`
//! and carry no runtime code.

#[doc = include_str!("../../../book/src/introduction.md")]
pub struct Introduction;

#[doc = include_str!("../../../book/src/meshes.md")]
pub struct Meshes;

#[doc = include_str!("../../../book/src/forward-models.md")]
pub struct ForwardModels;

#[doc = include_str!("../../../book/src/bfem.md")]
pub struct Bfem;

#[doc = include_str!("../../../book/src/rmfem.md")]
pub struct Rmfem;

#[doc = include_str!("../../../book/src/statfem.md")]
pub struct Statfem;

#[doc = include_str!("../../../book/src/inference.md")]
pub struct Inference;

#[doc = include_str!("../../../book/src/experiments.md")]
pub struct Experiments;
