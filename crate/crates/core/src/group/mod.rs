//! Free products of finite groups and free abelian groups.

mod ball;
mod element;
mod factor;

pub use ball::{
    ball, relative_sphere, word_ball_layers, IndexedBall, Metric, SphereCensus, WordSpheres,
    OUTSIDE,
};
pub use element::{FreeProduct, GroupElement, RelGeodesic};
pub use factor::{FactorElement, FactorKind, FactorSpec, FiniteGroup, MAX_FINITE_ORDER, MAX_RANK};
