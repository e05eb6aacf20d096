//! Polar subcodes, affine post-transformations, factor-graph relaxation and
//! belief-propagation list decoding.
//!
//! The crate is organized bottom-up:
//!
//! - [`gf2`]: dense bit-packed matrices over GF(2).
//! - [`construction`]: polar transform, information sets, CRC embedding and
//!   the canonical [`SubcodeSpec`](construction::SubcodeSpec).
//! - [`transform`]: affine permutations, post-transformed constraints and relaxation.
//! - [`bp`]: flooding BP over a (permuted, relaxed) polar factor graph joined
//!   with the outer constraint graph.
//! - [`ensemble`]: list decoding over several graphs with candidate selection.
//! - [`scl`]: successive cancellation list baseline with dynamic frozen bits.
//! - [`sim`]: BPSK/AWGN Monte-Carlo harness and the latency model.

pub mod bp;
pub mod construction;
pub mod ensemble;
mod error;
pub mod gf2;
pub mod scl;
pub mod sim;
pub mod transform;

pub use error::Error;
