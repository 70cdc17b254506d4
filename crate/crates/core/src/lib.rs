//! Numerical toolkit for Finsler comparison geometry.
//!
//! The crate models chart-based Finsler structures and provides, on top of
//! a single generically-differentiable norm evaluator:
//!
//! * fiberwise tensors: fundamental tensor, Cartan tensor, Legendre
//!   transform, reversibility ([`norm`]);
//! * spray, Chern connection, curvature operator, flag/Ricci curvature,
//!   Busemann-Hausdorff density, S-curvature, tangential curvature and a
//!   Berwald detector ([`curvature`]);
//! * geodesic integration, forward distances, rays, closed geodesics, and
//!   forward/backward angles by two independent routes ([`geodesics`]);
//! * ball/annulus volumes, comparison volumes, the annuli volume-comparison
//!   check, and volume-growth estimation ([`measure`]);
//! * rotationally symmetric model surfaces, comparison triangles, and
//!   Toponogov-type checks ([`comparison`]);
//! * a registry of seven concrete fixtures to run all of it on
//!   ([`fixtures`]).

pub mod comparison;
pub mod curvature;
pub mod dual;
pub mod error;
pub mod fixtures;
pub mod geodesics;
pub mod linalg;
pub mod measure;
pub mod norm;
pub mod quadrature;
pub(crate) mod tensor;

pub use error::{Error, Result};
pub use norm::{
    Covector, FinslerStructure, FundamentalTensor, SampleSpec, SmoothNorm, TangentVector,
    Tolerances,
};
