//! The chapters of `book/` as module docs, so `cargo test --doc` runs every
//! snippet in the book against the current library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/images.md")]
pub mod images {}
#[doc = include_str!("../../../book/src/prior.md")]
pub mod prior {}
#[doc = include_str!("../../../book/src/network.md")]
pub mod network {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/map.md")]
pub mod map {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
