//! The guide in `book/`, compiled as documentation so its examples run as
//! doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/annotations.md")]
pub mod annotations {}

#[doc = include_str!("../../../book/src/features.md")]
pub mod features {}

#[doc = include_str!("../../../book/src/detector.md")]
pub mod detector {}

#[doc = include_str!("../../../book/src/alignment.md")]
pub mod alignment {}

#[doc = include_str!("../../../book/src/bootstrap.md")]
pub mod bootstrap {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
