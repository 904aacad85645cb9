//! Doc-test shim for the guide under `book/`.
//!
//! mdBook renders the chapters but cannot compile their code blocks
//! against this workspace, so each chapter is also included here as the
//! documentation of an empty module. `cargo test --doc` then runs every
//! `rust` fence in the book as a doctest, and a snippet that drifts out
//! of sync with the library fails the build. One module per chapter keeps
//! failure reports traceable to the Markdown file they came from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/corpus.md")]
pub mod corpus {}

#[doc = include_str!("../../../book/src/emotion.md")]
pub mod emotion {}

#[doc = include_str!("../../../book/src/augmentation.md")]
pub mod augmentation {}

#[doc = include_str!("../../../book/src/style.md")]
pub mod style {}

#[doc = include_str!("../../../book/src/contrastive.md")]
pub mod contrastive {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
