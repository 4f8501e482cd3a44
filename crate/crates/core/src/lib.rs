//! Finite-volume Gibbs kernels for lattice spin systems on ℤᵈ with unbounded
//! spins and unbounded random pair couplings J_xy σ(x)σ(y), together with
//! numerical checks of the integrability, continuity and thermodynamic
//! estimates that hold for them.

pub mod bounds;
pub mod disorder;
pub mod error;
pub mod gibbs;
pub mod lattice;
pub mod single_spin;
pub mod stats;
pub mod thermo;
pub mod weights;

pub use error::{Error, Result};

use sha2::{Digest, Sha256};

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn digest_hex(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
