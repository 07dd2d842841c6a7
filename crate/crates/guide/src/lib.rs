//! The book chapters, included as documentation so that `cargo test` runs
//! every code block in them.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/pseudo_responses.md")]
pub mod pseudo_responses {}

#[doc = include_str!("../../../book/src/local_linear_opg.md")]
pub mod local_linear_opg {}

#[doc = include_str!("../../../book/src/adaptive_opg.md")]
pub mod adaptive_opg {}

#[doc = include_str!("../../../book/src/margins.md")]
pub mod margins {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
