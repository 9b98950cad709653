//! Runs the code listings of the guide in `book/` as doc-tests.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}

#[doc = include_str!("../../../book/src/density.md")]
pub mod density {}

#[doc = include_str!("../../../book/src/modes.md")]
pub mod modes {}

#[doc = include_str!("../../../book/src/setdist.md")]
pub mod setdist {}

#[doc = include_str!("../../../book/src/selectors.md")]
pub mod selectors {}

#[doc = include_str!("../../../book/src/pilots.md")]
pub mod pilots {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
