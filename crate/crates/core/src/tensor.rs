//! Charts, points, evaluable tensor fields and central finite differences.
//!
//! Every field is an opaque map from chart coordinates to a flat, row-major
//! component array of length `dim^(r+s)`. Contravariant indices come first,
//! so a (1,1)-field stores `T^k_j` at `k * dim + j` and reads back as the
//! matrix acting on column vectors.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GeometryError, Result};

/// Default central-difference step, in coordinate units.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Margin kept between sampled points and the domain boundary.
pub const SAMPLE_MARGIN: f64 = 10.0 * DEFAULT_STEP;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// A single global coordinate chart with a closed sampling box.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldSpec {
    name: String,
    coord_names: Vec<String>,
    domain: Vec<Interval>,
}

impl ManifoldSpec {
    pub fn new(
        name: impl Into<String>,
        coord_names: Vec<String>,
        domain: Vec<Interval>,
    ) -> Result<Arc<Self>> {
        let name = name.into();
        if coord_names.is_empty() {
            return Err(GeometryError::InvalidChart(format!(
                "chart `{name}` has dimension 0"
            )));
        }
        if coord_names.len() != domain.len() {
            return Err(GeometryError::InvalidChart(format!(
                "chart `{name}`: {} coordinate names but {} intervals",
                coord_names.len(),
                domain.len()
            )));
        }
        for (i, a) in coord_names.iter().enumerate() {
            if coord_names[..i].contains(a) {
                return Err(GeometryError::InvalidChart(format!(
                    "chart `{name}`: duplicate coordinate `{a}`"
                )));
            }
        }
        if let Some(bad) = domain
            .iter()
            .position(|iv| !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo < iv.hi))
        {
            return Err(GeometryError::InvalidChart(format!(
                "chart `{name}`: interval for `{}` is empty",
                coord_names[bad]
            )));
        }
        Ok(Arc::new(Self {
            name,
            coord_names,
            domain,
        }))
    }

    /// Chart with coordinates `x1..xn` over the cube `[-half, half]^n`.
    pub fn cube(name: impl Into<String>, dim: usize, half: f64) -> Result<Arc<Self>> {
        let names = (1..=dim).map(|i| format!("x{i}")).collect();
        Self::new(name, names, vec![Interval::new(-half, half); dim])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.coord_names.len()
    }

    pub fn coord_names(&self) -> &[String] {
        &self.coord_names
    }

    pub fn domain(&self) -> &[Interval] {
        &self.domain
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.len() == self.dim()
            && coords
                .iter()
                .zip(&self.domain)
                .all(|(x, iv)| iv.contains(*x))
    }
}

/// A point of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    chart: Arc<ManifoldSpec>,
    coords: Vec<f64>,
}

impl Point {
    pub fn new(chart: &Arc<ManifoldSpec>, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != chart.dim() {
            return Err(GeometryError::InvalidArgument(format!(
                "point has {} coordinates, chart `{}` has dimension {}",
                coords.len(),
                chart.name(),
                chart.dim()
            )));
        }
        Ok(Self {
            chart: Arc::clone(chart),
            coords,
        })
    }

    pub fn chart(&self) -> &Arc<ManifoldSpec> {
        &self.chart
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn in_domain(&self) -> bool {
        self.chart.contains(&self.coords)
    }

    /// The point displaced by `delta` along coordinate `k`.
    pub fn shifted(&self, k: usize, delta: f64) -> Self {
        let mut coords = self.coords.clone();
        coords[k] += delta;
        Self {
            chart: Arc::clone(&self.chart),
            coords,
        }
    }

    pub(crate) fn check_domain(&self) -> Result<()> {
        if self.in_domain() {
            Ok(())
        } else {
            Err(GeometryError::OutOfDomain {
                chart: self.chart.name().to_string(),
                coords: self.coords.clone(),
            })
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.chart.name(), self.coords)
    }
}

type ComponentFn = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;

/// An evaluable (r,s)-tensor field over one chart.
#[derive(Clone)]
pub struct TensorField {
    chart: Arc<ManifoldSpec>,
    contravariant: usize,
    covariant: usize,
    label: String,
    components: Arc<ComponentFn>,
}

impl fmt::Debug for TensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TensorField")
            .field("label", &self.label)
            .field("chart", &self.chart.name())
            .field("rank", &(self.contravariant, self.covariant))
            .finish()
    }
}

impl TensorField {
    pub fn new<F>(
        chart: &Arc<ManifoldSpec>,
        contravariant: usize,
        covariant: usize,
        label: impl Into<String>,
        components: F,
    ) -> Self
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        Self {
            chart: Arc::clone(chart),
            contravariant,
            covariant,
            label: label.into(),
            components: Arc::new(components),
        }
    }

    /// Rank-2 field built from a matrix-valued map (row index = first index).
    pub fn from_matrix_fn<F>(
        chart: &Arc<ManifoldSpec>,
        contravariant: usize,
        covariant: usize,
        label: impl Into<String>,
        f: F,
    ) -> Self
    where
        F: Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    {
        debug_assert_eq!(contravariant + covariant, 2);
        Self::new(chart, contravariant, covariant, label, move |x| {
            let m = f(x)?;
            Ok(matrix_to_row_major(&m))
        })
    }

    pub fn constant_matrix(
        chart: &Arc<ManifoldSpec>,
        contravariant: usize,
        covariant: usize,
        label: impl Into<String>,
        m: DMatrix<f64>,
    ) -> Self {
        let flat = matrix_to_row_major(&m);
        Self::new(chart, contravariant, covariant, label, move |_| {
            Ok(flat.clone())
        })
    }

    pub fn scalar<F>(chart: &Arc<ManifoldSpec>, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(chart, 0, 0, label, move |x| Ok(vec![f(x)]))
    }

    pub fn identity(chart: &Arc<ManifoldSpec>) -> Self {
        let n = chart.dim();
        Self::constant_matrix(chart, 1, 1, "I", DMatrix::identity(n, n))
    }

    pub fn chart(&self) -> &Arc<ManifoldSpec> {
        &self.chart
    }

    pub fn rank(&self) -> (usize, usize) {
        (self.contravariant, self.covariant)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Number of components, `dim^(r+s)`.
    pub fn component_count(&self) -> usize {
        self.chart
            .dim()
            .pow((self.contravariant + self.covariant) as u32)
    }

    /// Evaluates the components at `p`.
    pub fn eval(&self, p: &Point) -> Result<Vec<f64>> {
        if p.chart().as_ref() != self.chart.as_ref() {
            return Err(GeometryError::InvalidArgument(format!(
                "point on chart `{}` passed to field `{}` on chart `{}`",
                p.chart().name(),
                self.label,
                self.chart.name()
            )));
        }
        p.check_domain()?;
        let values = (self.components)(p.coords())?;
        let expected = self.component_count();
        if values.len() != expected {
            return Err(GeometryError::ShapeError {
                label: self.label.clone(),
                expected,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite {
                label: self.label.clone(),
            });
        }
        Ok(values)
    }

    /// Evaluates a rank-2 field as a matrix.
    pub fn eval_matrix(&self, p: &Point) -> Result<DMatrix<f64>> {
        if self.contravariant + self.covariant != 2 {
            return Err(GeometryError::InvalidArgument(format!(
                "field `{}` has rank ({},{}), not a matrix field",
                self.label, self.contravariant, self.covariant
            )));
        }
        let n = self.chart.dim();
        let v = self.eval(p)?;
        Ok(DMatrix::from_row_slice(n, n, &v))
    }

    /// Pointwise linear combination `a*self + b*other`.
    pub fn combine(&self, a: f64, other: &TensorField, b: f64) -> Result<TensorField> {
        if self.rank() != other.rank() || self.chart != other.chart {
            return Err(GeometryError::InvalidArgument(format!(
                "cannot combine `{}` and `{}`",
                self.label, other.label
            )));
        }
        let (f, g) = (Arc::clone(&self.components), Arc::clone(&other.components));
        let label = format!("{a}*{} + {b}*{}", self.label, other.label);
        Ok(Self::new(
            &self.chart,
            self.contravariant,
            self.covariant,
            label,
            move |x| {
                let (u, v) = (f(x)?, g(x)?);
                Ok(u.iter().zip(&v).map(|(p, q)| a * p + b * q).collect())
            },
        ))
    }
}

pub(crate) fn matrix_to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

/// Finite-difference scheme. Only the second-order central stencil exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FdScheme {
    #[default]
    Central2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    step: f64,
    scheme: FdScheme,
}

impl FdConfig {
    pub fn new(step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(GeometryError::InvalidArgument(format!(
                "finite-difference step must be positive, got {step}"
            )));
        }
        Ok(Self {
            step,
            scheme: FdScheme::Central2,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn scheme(&self) -> FdScheme {
        self.scheme
    }

    /// Central difference of an arbitrary vector-valued map along coordinate `k`.
    pub fn central<F>(&self, p: &Point, k: usize, mut f: F) -> Result<Vec<f64>>
    where
        F: FnMut(&Point) -> Result<Vec<f64>>,
    {
        let h = self.step;
        let plus = f(&p.shifted(k, h))?;
        let minus = f(&p.shifted(k, -h))?;
        let inv = 1.0 / (2.0 * h);
        Ok(plus
            .iter()
            .zip(&minus)
            .map(|(a, b)| (a - b) * inv)
            .collect())
    }

    /// Central difference of a matrix-valued map along coordinate `k`.
    pub fn central_matrix<F>(&self, p: &Point, k: usize, mut f: F) -> Result<DMatrix<f64>>
    where
        F: FnMut(&Point) -> Result<DMatrix<f64>>,
    {
        let h = self.step;
        let plus = f(&p.shifted(k, h))?;
        let minus = f(&p.shifted(k, -h))?;
        Ok((plus - minus) / (2.0 * h))
    }
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            scheme: FdScheme::Central2,
        }
    }
}

/// Evaluates `field` at `p`.
pub fn eval_field(field: &TensorField, p: &Point) -> Result<Vec<f64>> {
    field.eval(p)
}

/// Central difference `(F(p + h e_k) - F(p - h e_k)) / 2h`, shape preserved.
pub fn fd_partial(field: &TensorField, p: &Point, k: usize, cfg: &FdConfig) -> Result<Vec<f64>> {
    if k >= p.dim() {
        return Err(GeometryError::InvalidArgument(format!(
            "coordinate index {k} out of range for dimension {}",
            p.dim()
        )));
    }
    cfg.central(p, k, |q| field.eval(q))
}

/// Deterministic uniform sample strictly inside the domain box, at least
/// [`SAMPLE_MARGIN`] away from every face.
pub fn sample_points(spec: &Arc<ManifoldSpec>, count: usize, seed: u64) -> Result<Vec<Point>> {
    if count == 0 {
        return Err(GeometryError::InvalidArgument(
            "sample count must be at least 1".into(),
        ));
    }
    let margin = SAMPLE_MARGIN;
    if spec.domain().iter().any(|iv| iv.hi - iv.lo <= 2.0 * margin) {
        return Err(GeometryError::EmptyDomain { margin });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let coords = spec
                .domain()
                .iter()
                .map(|iv| rng.gen_range((iv.lo + margin)..=(iv.hi - margin)))
                .collect();
            Point::new(spec, coords)
        })
        .collect()
}

/// Largest absolute entry of a matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest absolute entry of a slice.
pub fn max_abs_slice(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn r4() -> Arc<ManifoldSpec> {
        ManifoldSpec::cube("R4", 4, 5.0).unwrap()
    }

    #[test]
    fn identity_field_evaluates_to_identity() {
        let c = r4();
        let p = Point::new(&c, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let m = TensorField::identity(&c).eval_matrix(&p).unwrap();
        assert_eq!(m, DMatrix::identity(4, 4));
    }

    #[test]
    fn polynomial_scalar() {
        let c = r4();
        let f = TensorField::scalar(&c, "x1*x2", |x| x[0] * x[1]);
        let p = Point::new(&c, vec![2.0, 3.0, 0.0, 0.0]).unwrap();
        assert_eq!(f.eval(&p).unwrap(), vec![6.0]);
    }

    #[test]
    fn constant_metric_field() {
        let c = r4();
        let eta = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0]));
        let g = TensorField::constant_matrix(&c, 0, 2, "eta", eta.clone());
        let p = Point::new(&c, vec![0.3, -0.2, 0.5, 0.1]).unwrap();
        assert_eq!(g.eval_matrix(&p).unwrap(), eta);
    }

    #[test]
    fn out_of_domain_and_shape_errors() {
        let c = ManifoldSpec::cube("box", 4, 1.0).unwrap();
        let f = TensorField::scalar(&c, "one", |_| 1.0);
        let p = Point::new(&c, vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(f.eval(&p), Err(GeometryError::OutOfDomain { .. })));

        let bad = TensorField::new(&c, 1, 1, "bad", |_| Ok(vec![0.0; 3]));
        let q = Point::new(&c, vec![0.0; 4]).unwrap();
        assert!(matches!(
            bad.eval(&q),
            Err(GeometryError::ShapeError {
                expected: 16,
                got: 3,
                ..
            })
        ));
    }

    #[test]
    fn fd_partial_quadratic_and_sine() {
        let c = r4();
        let cfg = FdConfig::default();
        let sq = TensorField::scalar(&c, "x1^2", |x| x[0] * x[0]);
        let p = Point::new(&c, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(
            fd_partial(&sq, &p, 0, &cfg).unwrap()[0],
            2.0,
            epsilon = 1e-6
        );

        let s = TensorField::scalar(&c, "sin", |x| x[0].sin());
        let o = Point::new(&c, vec![0.0; 4]).unwrap();
        // analytic derivative cos(0)
        assert_abs_diff_eq!(
            fd_partial(&s, &o, 0, &cfg).unwrap()[0],
            0.0_f64.cos(),
            epsilon = 1e-6
        );
    }

    #[test]
    fn fd_partial_of_constant_is_exactly_zero() {
        let c = r4();
        let f = TensorField::constant_matrix(
            &c,
            1,
            1,
            "K",
            DMatrix::from_fn(4, 4, |i, j| (i * 4 + j) as f64 * 0.37),
        );
        let p = Point::new(&c, vec![0.3, -1.1, 2.0, 0.7]).unwrap();
        for k in 0..4 {
            assert!(fd_partial(&f, &p, k, &FdConfig::default())
                .unwrap()
                .iter()
                .all(|v| *v == 0.0));
        }
    }

    #[test]
    fn fd_partial_near_boundary_fails() {
        let c = ManifoldSpec::cube("box", 4, 1.0).unwrap();
        let f = TensorField::scalar(&c, "x1", |x| x[0]);
        let p = Point::new(&c, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            fd_partial(&f, &p, 0, &FdConfig::default()),
            Err(GeometryError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic_and_respects_margin() {
        let c = ManifoldSpec::cube("box", 4, 1.0).unwrap();
        let a = sample_points(&c, 5, 7).unwrap();
        let b = sample_points(&c, 5, 7).unwrap();
        assert_eq!(a, b);
        for p in &a {
            for x in p.coords() {
                assert!(x.abs() <= 1.0 - SAMPLE_MARGIN);
            }
        }
        assert!(sample_points(&c, 0, 7).is_err());
        let tiny = ManifoldSpec::cube("tiny", 2, 0.005).unwrap();
        assert!(matches!(
            sample_points(&tiny, 3, 1),
            Err(GeometryError::EmptyDomain { .. })
        ));
    }

    #[test]
    fn chart_invariants() {
        assert!(ManifoldSpec::new("e", vec![], vec![]).is_err());
        assert!(ManifoldSpec::new(
            "dup",
            vec!["a".into(), "a".into()],
            vec![Interval::new(0.0, 1.0); 2]
        )
        .is_err());
        assert!(
            ManifoldSpec::new("empty", vec!["a".into()], vec![Interval::new(1.0, 1.0)]).is_err()
        );
    }

    #[test]
    fn fd_config_rejects_nonpositive_step() {
        assert!(FdConfig::new(0.0).is_err());
        assert!(FdConfig::new(-1e-3).is_err());
        assert_eq!(FdConfig::new(2e-3).unwrap().step(), 2e-3);
    }
}
