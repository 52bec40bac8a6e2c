//! Operational quasiprobabilities for sequential quadrature measurements of light.

pub mod circuit;
pub mod engine;
pub mod error;
pub mod hermite;
pub mod heterodyne;
pub mod io;
pub mod negativity;
pub mod quadrature;
pub mod sampling;
pub mod states;

pub use error::{OqcvError, Result};
pub use hermite::{CharacteristicTensor, HermiteDegree};
pub use heterodyne::{GridSpec, OqcvSlice};
pub use negativity::{NegativityOptions, NegativityResult, SweepTable};
pub use sampling::{Binning, EmpiricalW, SampleBatch, SampleMode};
pub use states::{PFunctionMixture, PhasePoint, State, StateFamily};
