//! Special functions and quadrature primitives shared by every other module.

pub mod gamma;
pub mod linalg;
pub mod quad;
pub mod series;

pub use gamma::upper_incomplete_gamma;
pub use quad::{
    adaptive_integrate, integrate_real_line, integrate_semi_infinite, EndpointTransform,
    QuadResult, QuadratureSpec,
};
pub use series::{cauchy_taylor_coefficients, truncated_exp, ComplexSeries};
