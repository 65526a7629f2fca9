//! Morse index of Sturm–Liouville operators
//! `L u = -(P u' + Q u)' + Qᵀ u' + R u` on the real line, computed by
//! counting conjugate points of the unstable Lagrangian bundle, with
//! Maslov-type index tools, a finite element oracle, and an application
//! to traveling waves of gradient reaction–diffusion systems.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod chebyshev;
pub mod coefficient;
pub mod crossings;
pub mod error;
pub mod flows;
pub mod indices;
pub mod io;
pub mod linalg;
pub mod morse;
pub mod oracle;
pub mod scalar;
pub mod sturm;
pub mod symplectic;
pub mod waves;

pub use error::{Error, Result};
pub use morse::{morse_index, MorseConfig};
pub use oracle::DiscretizationConfig;
pub use flows::PropagationConfig;
pub use scalar::Real;

pub type Problem = sturm::SturmLiouvilleProblem<f64>;
pub type Frame = symplectic::LagrangianFrame<f64>;
pub type Coefficient = coefficient::Coefficient<f64>;
pub type Profile = coefficient::Profile<f64>;
pub type FramePath = flows::FramePath<f64>;
pub type MorseResult = morse::MorseResult<f64>;
pub type ReactionSystem = waves::ReactionSystem<f64>;
pub type WaveProfile = waves::WaveProfile<f64>;
pub type WaveAnalysis = waves::WaveAnalysis<f64>;
