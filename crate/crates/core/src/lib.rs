pub mod curvature;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod residual;
pub mod sphere;
pub mod stationary;
