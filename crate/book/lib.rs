//! Every chapter of the guide is attached to a module below so that
//! `cargo test` runs its Rust listings as doc-tests.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/relaxation.md")]
pub mod relaxation {}
#[doc = include_str!("src/solver.md")]
pub mod solver {}
#[doc = include_str!("src/distributed.md")]
pub mod distributed {}
#[doc = include_str!("src/velocity.md")]
pub mod velocity {}
#[doc = include_str!("src/scenarios.md")]
pub mod scenarios {}
#[doc = include_str!("src/experiments.md")]
pub mod experiments {}
#[doc = include_str!("src/formats.md")]
pub mod formats {}
