pub mod app;
pub mod banded;
pub mod config;
pub mod convolution;
pub mod dispersion;
pub mod expr;
pub mod field;
pub mod kernels;
pub mod modes;
pub mod oracle;
pub mod perturbation;
pub mod plot;
