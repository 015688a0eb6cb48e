//! Capacity-achieving T-private information retrieval with optimal
//! sub-packetization L = d * n^(M-1), where d = gcd(N, T) and n = N / d.
//!
//! The crate provides the finite-field and MDS building blocks, the
//! parameter derivation for any (N, T, M), the retrieval scheme itself,
//! a verification harness (rank audits, privacy distribution tests, rate
//! measurement), and a TCP client/server pair that runs the scheme as a
//! real multi-server protocol.

pub mod error;
pub mod field;
pub mod mds;
pub mod net;
pub mod params;
pub mod scheme;
pub mod verify;

pub use error::{Error, Result};
