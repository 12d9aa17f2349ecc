//! Quantized system identification with a deterministic error bound and
//! LMI-based guaranteed-cost robust control.
//!
//! The pipeline mirrored by the `qsid` binary:
//! open-loop data -> memoryless scalar quantization -> least-squares
//! identification -> worst-case error bound `rho` -> robust state-feedback
//! synthesis certified for every admissible model error within `rho`.

pub mod error;
pub mod error_bound;
pub mod experiment;
pub mod io;
pub mod lmi;
pub mod mat;
pub mod model;
pub mod plot;
pub mod quantizer;
pub mod simulation;
pub mod synthesis;
pub mod sysid;

pub use error::{Error, Result};
pub use mat::{Mat, Vector};
