//! Optimal discrimination of quantum channels.
//!
//! * [`tensor`]: operators on labelled tensor-product spaces, Choi/Kraus
//!   conversions and the link product.
//! * [`channels`]: parametrized qubit channel families and derived
//!   discrimination instances.
//! * [`sdp`]: a dense interior-point SDP solver.
//! * [`tester`]: exact optimal discrimination over all adaptive strategies.
//! * [`seesaw`]: tooth-by-tooth optimization of adaptive strategies with a
//!   finite ancilla, for many channel uses.
//! * [`metrology`]: Fisher-information bounds on the discrimination error.
//! * [`experiments`]: scenario configuration, batch runs and result output.

pub mod channels;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod metrology;
pub mod sdp;
pub mod seesaw;
pub mod tensor;
pub mod tester;

pub use error::{Error, Result};
