// The guide lives in book/src as plain mdbook chapters. Including each one
// as a module's docs lets `cargo test --doc` run every snippet, and a
// failure names the chapter it came from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}
#[doc = include_str!("../../../book/src/quantization.md")]
pub mod quantization {}
#[doc = include_str!("../../../book/src/fidelity.md")]
pub mod fidelity {}
#[doc = include_str!("../../../book/src/dot_product.md")]
pub mod dot_product {}
#[doc = include_str!("../../../book/src/cost.md")]
pub mod cost {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
