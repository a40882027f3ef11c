//! Energy-concealment compressive-sensing encryption.
//!
//! Plaintext blocks are padded with an energy-concealing entry so every
//! encrypted block carries the same public energy, then measured with a
//! one-time sensing matrix drawn from a keyed shift-register stream. Decoding
//! runs sparse recovery over a combined DCT + identity dictionary. The
//! `attacks` module contains the cryptanalysis toolkit (superincreasing
//! plaintext matrix recovery, sequence counting, Berlekamp-Massey, leak
//! probes) and `harness` the experiment runner behind the `conceal` CLI.

pub mod error;
pub mod seedmix;

pub mod keystream;
pub mod codec;
pub mod attacks;
pub mod recovery;
pub mod sensing;

pub use error::{Error, Result};
pub use keystream::{Key, RegisterKind, RegisterSpec, SymbolGenerator, SymbolSequence};
