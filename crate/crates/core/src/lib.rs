//! Numerical lab for operator-valued Fourier analysis in two dimensions.
//!
//! Matrix algebra `M_n` with normalized trace ([`ncmat`]), rational quantum tori
//! ([`qtorus`]), operator-valued grids with Fourier multipliers ([`optorus`]),
//! the dyadic/angular decomposition of the Bochner-Riesz symbol ([`multilab`]),
//! Kakeya-type averages ([`kakeya`]), square and maximal norms ([`sqmax`]),
//! the analytic interpolation constant ([`interp`]) and an experiment harness
//! ([`harness`]).
//!
//! The matrix and grid layers are generic over [`Real`]; the aliases below fix
//! the common choices.

pub mod error;
pub mod harness;
pub mod interp;
pub mod io;
pub mod kakeya;
pub mod multilab;
pub mod ncmat;
pub mod optorus;
pub mod qtorus;
pub mod rng;
pub mod scalar;
pub mod sqmax;
pub mod stats;
pub mod tolerances;

pub use error::{LabError, Result};
pub use scalar::Real;

pub type MatElem64 = ncmat::MatElem<f64>;
pub type MatElem32 = ncmat::MatElem<f32>;
pub type OpGrid64 = optorus::OpGrid<f64>;
pub type OpGrid32 = optorus::OpGrid<f32>;
pub type QTorusPoly64 = qtorus::QTorusPoly<f64>;
pub type QTorusPoly32 = qtorus::QTorusPoly<f32>;
