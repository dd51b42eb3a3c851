//! Spherical online SGD for single-index estimation.
//!
//! The crate is generic over the scalar type through [`scalar::Real`]; the
//! aliases at the bottom fix it to `f64` or `f32`.

pub mod activation;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod hermite;
pub mod models;
pub mod scalar;
pub mod sphere;
pub mod theory;

pub use activation::Activation;
pub use error::{Error, Result};
pub use hermite::{HermiteProfile, PopulationProfile};
pub use models::{Family, ModelSpec, Sample};
pub use scalar::Real;
pub use sphere::UnitVector;

pub type UnitVector64 = UnitVector<f64>;
pub type UnitVector32 = UnitVector<f32>;
pub type Profile64 = PopulationProfile<f64>;
pub type Profile32 = PopulationProfile<f32>;
