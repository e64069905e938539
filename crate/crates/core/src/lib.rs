pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod laplacian;
pub mod mesh;
pub mod metrics;
pub mod segment;
pub mod proxy;
pub mod abstraction;
pub mod lm;
pub mod transform;
pub mod skinning;
pub mod diffusion;
pub mod stylize;
pub mod transfer;
pub mod engine;
