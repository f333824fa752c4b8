//! Numerical verification engine for paraquaternionic Hermitian geometry.
//!
//! Fields are evaluable maps over a single coordinate chart; every derivative
//! is a central finite difference. On top of that substrate the crate provides
//! Levi-Civita connections and curvature, the paraquaternion algebra, the
//! classification of metric/structure pairs, semi-Riemannian submersions with
//! their O'Neill tensors, Sasaki lifts to tangent bundles, and a JSON scenario
//! runner tying all checks together.

pub mod algebra;
pub mod catalog;
pub mod connection;
pub mod error;
pub mod expr;
pub mod sasaki;
pub mod scenario;
pub mod structure;
pub mod submersion;
pub mod tensor;

pub use error::{GeometryError, Result};
pub use tensor::{FdConfig, ManifoldSpec, Point, TensorField};

use rayon::prelude::*;

/// Maximum of a fallible per-point quantity. Order-independent, so parallel
/// evaluation gives the same answer as a sequential loop.
pub(crate) fn par_max<F>(pts: &[Point], f: F) -> Result<f64>
where
    F: Fn(&Point) -> Result<f64> + Sync,
{
    let values: Vec<Result<f64>> = pts.par_iter().map(&f).collect();
    values
        .into_iter()
        .try_fold(0.0_f64, |acc, v| Ok(acc.max(v?)))
}

/// Fallible per-point map; output order follows `pts`.
pub(crate) fn par_map<T, F>(pts: &[Point], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Point) -> Result<T> + Sync,
{
    let values: Vec<Result<T>> = pts.par_iter().map(&f).collect();
    values.into_iter().collect()
}
