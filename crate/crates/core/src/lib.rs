//! All-stages-implicit strong-stability-preserving IMEX Runge-Kutta schemes
//! for stiff relaxation systems `∂t U = F(U) + R(U)/ε`, together with the
//! analyzers used to characterize them: order conditions, linear stability
//! regions, absolute monotonicity radii, and (ε, Δt) convergence studies.

pub mod catalog;
pub mod contour;
pub mod exact;
pub mod experiments;
pub mod integrator;
pub mod linalg;
pub mod monotonicity;
pub mod order;
pub mod stability;
pub mod svg;
pub mod tableau;

pub use catalog::{get_scheme, FamilyId, ParametricFamily};
pub use exact::Surd;
pub use tableau::{validate, ButcherDoubleTableau, Coef, TableauError, ValidationReport};
