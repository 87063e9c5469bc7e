//! The guide's chapters as doc-tests, so every snippet in `book/` compiles and runs.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}

#[doc = include_str!("../../../book/src/matching.md")]
pub mod matching {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/splits.md")]
pub mod splits {}

#[doc = include_str!("../../../book/src/pseudolabel.md")]
pub mod pseudolabel {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
