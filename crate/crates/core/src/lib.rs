//! Simulation of entanglement-witness measurements that need no shared
//! reference frame.
//!
//! Alice holds the first particle of an unknown state `rho` together with
//! one half of a spin-zero singlet shared with Bob. She only tests whether
//! her two particles are in the spin-zero sector and sends Bob the one-bit
//! result. Bob then measures `W` or a deformed `W^(1)` depending on the bit.
//! Because the singlet and Alice's test are rotation invariant, the
//! estimate of `Tr(W rho)` does not depend on how the two labs are oriented.
//!
//! - [`tensor`]: dense complex matrices, Kronecker products, partial traces.
//! - [`spin`]: spin-j operators, rotations, the singlet and its projectors.
//! - [`states`]: density matrices, witnesses, PPT test, standard families.
//! - [`teleport`]: the two-outcome teleportation and witness transform.
//! - [`circuits`]: a qudit circuit that prepares and detects the singlet.
//! - [`sampling`]: seeded shot-level estimation.
//! - [`locc`]: Alice/Bob sessions over in-process or TCP transports.
//! - [`sources`]: named states/witnesses and the matrix file format.
//! - [`checks`]: the analytic identity suite.

pub mod checks;
pub mod circuits;
pub mod error;
pub mod locc;
pub mod record;
pub mod sampling;
pub mod sources;
pub mod spin;
pub mod states;
pub mod teleport;
pub mod tensor;

pub use error::{Error, Result};
