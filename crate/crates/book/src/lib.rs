//! Runs the listings of the guide in `book/` as doctests, one module per
//! chapter so failures point at their chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/spectral.md")]
pub mod spectral {}

#[doc = include_str!("../../../book/src/noise.md")]
pub mod noise {}

#[doc = include_str!("../../../book/src/time-stepping.md")]
pub mod time_stepping {}

#[doc = include_str!("../../../book/src/mittag-leffler.md")]
pub mod mittag_leffler {}

#[doc = include_str!("../../../book/src/convergence.md")]
pub mod convergence {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
