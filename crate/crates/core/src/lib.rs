//! Numerical gluing construction of complete constant positive scalar curvature
//! conformal metrics on `R^N` minus a finite set of points.

pub mod error;
pub mod exterior;
pub mod field;
pub mod gluing;
pub mod grid;
pub mod harmonics;
pub mod interior;
pub mod nonlinear;
pub mod ode;
pub mod approx;
pub mod balance;
pub mod config;
pub mod delaunay;
pub mod quad;
pub mod verify;

pub use error::{Error, Result};
