//! JSON scenario configuration and its validation into geometry objects.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Deserialize;

use super::error::ScenarioError;
use crate::algebra::LocalBasisTriple;
use crate::catalog;
use crate::connection::MetricField;
use crate::expr::{parse_expr, BoundExpr};
use crate::sasaki::{build_tangent_bundle, TangentBundle};
use crate::structure::ProductStructureField;
use crate::submersion::SubmersionMap;
use crate::tensor::{FdConfig, Interval, ManifoldSpec, Point, TensorField};

pub const DEFAULT_SAMPLE_COUNT: usize = 50;
pub const DEFAULT_FIBER_COUNT: usize = 5;

type Matrix = Vec<Vec<String>>;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MetricSpec {
    /// `neutral`, `euclidean` or `conformal`.
    Catalog(String),
    Components(Matrix),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum TripleSpec {
    /// `standard` or `scaled-j1`.
    Catalog(String),
    /// Standard triple rotated in the (J₁,J₂)-plane by an angle expression.
    Rotated { rotated: String },
    /// Component matrices `J^k_j`, row `k`, column `j`.
    Explicit { j1: Matrix, j2: Matrix, j3: Matrix },
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RotatingSpec {
    pub coord: String,
    pub rate: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ProductSpec {
    /// `split`: `P₁ - P₂`.
    Catalog(String),
    Rotating {
        rotating: RotatingSpec,
    },
    Components(Matrix),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub coords: Option<Vec<String>>,
    #[serde(default)]
    pub domain: Option<Vec<[f64; 2]>>,
    pub metric: MetricSpec,
    #[serde(default)]
    pub signature: Option<[usize; 2]>,
    #[serde(default)]
    pub triple: Option<TripleSpec>,
    /// Second basis of the same structure, used by `lhpk-witness`.
    #[serde(default)]
    pub alt_triple: Option<TripleSpec>,
    #[serde(default)]
    pub product_structure: Option<ProductSpec>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ManifoldRef {
    /// Reuses the manifold of a shipped fixture.
    Fixture(String),
    Inline(Box<ManifoldConfig>),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    /// Source coordinates as expressions in the curve parameter `t ∈ [0, 1]`.
    pub curve: Vec<String>,
    #[serde(default)]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SubmersionConfig {
    #[serde(default)]
    pub label: Option<String>,
    pub target: ManifoldConfig,
    pub components: Vec<String>,
    #[serde(default)]
    pub fiber: Option<FiberConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    #[default]
    Pass,
    Fail,
    Error,
}

impl Expectation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Expectation::Pass => "pass",
            Expectation::Fail => "fail",
            Expectation::Error => "error",
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub name: String,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub expect: Expectation,
    /// Expected error name when `expect` is `error`.
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub anchor: Option<String>,
    /// Overrides the scenario sample size for this check.
    #[serde(default)]
    pub points: Option<usize>,
    /// Explicit evaluation point; replaces the sample when present.
    #[serde(default)]
    pub at: Option<Vec<f64>>,
    /// Expected class for `classify`.
    #[serde(default)]
    pub class: Option<String>,
    /// Expected 1-form matrix `ω_a(∂_i)` (3 rows).
    #[serde(default)]
    pub omega: Option<Vec<Vec<f64>>>,
    /// Expected signature `(p, q)`.
    #[serde(default)]
    pub signature: Option<[usize; 2]>,
    /// Expected equivalence flags.
    #[serde(default)]
    pub flags: Option<[bool; 3]>,
    /// `pinned` (default) or `negated`.
    #[serde(default)]
    pub convention: Option<String>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_count() -> usize {
    DEFAULT_SAMPLE_COUNT
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            count: DEFAULT_SAMPLE_COUNT,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FdSettings {
    pub step: f64,
}

/// The scenario file as written.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    pub name: String,
    #[serde(default)]
    pub anchor: String,
    #[serde(default)]
    pub description: Option<String>,
    pub manifold: ManifoldRef,
    #[serde(default)]
    pub submersion: Option<SubmersionConfig>,
    #[serde(default)]
    pub sasaki: bool,
    #[serde(default)]
    pub u_domain: Option<Vec<[f64; 2]>>,
    /// Fibre of the bundle projection, as fibre coordinates in `t`.
    #[serde(default)]
    pub sasaki_fiber: Option<FiberConfig>,
    pub checks: Vec<CheckConfig>,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub fd: Option<FdSettings>,
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub points: Option<usize>,
}

/// A materialized manifold with its fields.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub chart: Arc<ManifoldSpec>,
    pub metric: MetricField,
    pub triple: Option<LocalBasisTriple>,
    pub alt_triple: Option<LocalBasisTriple>,
    pub product: Option<ProductStructureField>,
}

impl Geometry {
    pub fn triple(&self) -> Result<&LocalBasisTriple, ScenarioError> {
        self.triple.as_ref().ok_or_else(|| {
            ScenarioError::validation("manifold.triple", "this check needs a triple")
        })
    }
}

#[derive(Debug, Clone)]
pub struct BuiltSubmersion {
    pub map: SubmersionMap,
    pub target: Geometry,
    pub fiber: Option<Vec<Point>>,
}

/// Validated scenario with every catalog reference expanded.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub raw: RawScenario,
    pub name: String,
    pub anchor: String,
    /// Geometry checks run on: the bundle when `sasaki` is set.
    pub geometry: Geometry,
    pub submersion: Option<BuiltSubmersion>,
    pub bundle: Option<TangentBundle>,
    pub checks: Vec<CheckConfig>,
    pub sample: SampleConfig,
    pub fd: FdConfig,
}

impl ScenarioConfig {
    pub fn dim(&self) -> usize {
        self.geometry.chart.dim()
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    load_scenario_with(path, &Overrides::default())
}

pub fn load_scenario_with(
    path: impl AsRef<Path>,
    overrides: &Overrides,
) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text, overrides)
}

pub fn parse_scenario(text: &str, overrides: &Overrides) -> Result<ScenarioConfig, ScenarioError> {
    let raw: RawScenario =
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    validate(raw, overrides)
}

fn bind(src: &str, coords: &[String], field: &str) -> Result<BoundExpr, ScenarioError> {
    parse_expr(src)
        .and_then(|e| e.bind(coords))
        .map_err(|e| ScenarioError::Expr {
            field: field.to_string(),
            source: e,
        })
}

fn bind_matrix(
    m: &Matrix,
    n: usize,
    coords: &[String],
    field: &str,
) -> Result<Vec<BoundExpr>, ScenarioError> {
    if m.len() != n {
        return Err(ScenarioError::validation(
            field,
            format!("expected {n} rows, got {}", m.len()),
        ));
    }
    let mut out = Vec::with_capacity(n * n);
    for (r, row) in m.iter().enumerate() {
        if row.len() != n {
            return Err(ScenarioError::validation(
                format!("{field}[{r}]"),
                format!("expected {n} columns, got {}", row.len()),
            ));
        }
        for (c, src) in row.iter().enumerate() {
            out.push(bind(src, coords, &format!("{field}[{r}][{c}]"))?);
        }
    }
    Ok(out)
}

fn expr_field(
    chart: &Arc<ManifoldSpec>,
    contravariant: usize,
    covariant: usize,
    label: &str,
    entries: Vec<BoundExpr>,
) -> TensorField {
    let n = chart.dim();
    let tag = label.to_string();
    TensorField::from_matrix_fn(
        chart,
        contravariant,
        covariant,
        label.to_string(),
        move |x| {
            let mut m = DMatrix::zeros(n, n);
            for (idx, e) in entries.iter().enumerate() {
                m[(idx / n, idx % n)] = e
                    .eval(x)
                    .map_err(|err| crate::GeometryError::Evaluation(format!("{tag}: {err}")))?;
            }
            Ok(m)
        },
    )
}

fn build_chart(m: &ManifoldConfig, field: &str) -> Result<Arc<ManifoldSpec>, ScenarioError> {
    let dim = match (&m.dim, &m.coords, &m.domain) {
        (Some(d), _, _) => *d,
        (None, Some(c), _) => c.len(),
        (None, None, Some(d)) => d.len(),
        (None, None, None) => {
            return Err(ScenarioError::validation(
                field,
                "give one of dim, coords or domain",
            ))
        }
    };
    let coords = m
        .coords
        .clone()
        .unwrap_or_else(|| (1..=dim).map(|i| format!("x{i}")).collect());
    if coords.len() != dim {
        return Err(ScenarioError::validation(
            format!("{field}.coords"),
            format!("expected {dim} names, got {}", coords.len()),
        ));
    }
    let domain: Vec<Interval> = match &m.domain {
        Some(d) if d.len() != dim => {
            return Err(ScenarioError::validation(
                format!("{field}.domain"),
                format!("expected {dim} intervals, got {}", d.len()),
            ))
        }
        Some(d) => d.iter().map(|[a, b]| Interval::new(*a, *b)).collect(),
        None => vec![Interval::new(-1.0, 1.0); dim],
    };
    let name = m.name.clone().unwrap_or_else(|| format!("R{dim}"));
    ManifoldSpec::new(name, coords, domain)
        .map_err(|e| ScenarioError::validation(field, e.to_string()))
}

fn build_metric(
    chart: &Arc<ManifoldSpec>,
    m: &ManifoldConfig,
    field: &str,
) -> Result<MetricField, ScenarioError> {
    let n = chart.dim();
    let field = format!("{field}.metric");
    let metric = match &m.metric {
        MetricSpec::Catalog(name) => match name.as_str() {
            "neutral" if n.is_multiple_of(2) => catalog::neutral_metric(chart),
            "euclidean" => catalog::euclidean_metric(chart),
            "conformal" if n.is_multiple_of(2) => catalog::conformal_metric(chart),
            other => {
                return Err(ScenarioError::validation(
                    field,
                    format!("unknown catalog metric `{other}` for dimension {n}"),
                ))
            }
        },
        MetricSpec::Components(rows) => {
            let entries = bind_matrix(rows, n, chart.coord_names(), &field)?;
            MetricField::new(expr_field(chart, 0, 2, "g", entries))
                .map_err(|e| ScenarioError::validation(&field, e.to_string()))?
        }
    };
    Ok(match m.signature {
        Some([p, q]) => metric.with_signature_hint((p, q)),
        None => metric,
    })
}

fn build_triple(
    chart: &Arc<ManifoldSpec>,
    t: &TripleSpec,
    field: &str,
) -> Result<LocalBasisTriple, ScenarioError> {
    let n = chart.dim();
    let coords = chart.coord_names();
    match t {
        TripleSpec::Catalog(name) => {
            if !n.is_multiple_of(4) {
                return Err(ScenarioError::validation(
                    field,
                    format!("catalog triples need dimension 4m, got {n}"),
                ));
            }
            match name.as_str() {
                "standard" => Ok(catalog::standard_triple(chart)),
                "scaled-j1" => Ok(catalog::scaled_j1_triple(chart)),
                other => Err(ScenarioError::validation(
                    field,
                    format!("unknown catalog triple `{other}`"),
                )),
            }
        }
        TripleSpec::Rotated { rotated } => {
            if !n.is_multiple_of(4) {
                return Err(ScenarioError::validation(
                    field,
                    format!("catalog triples need dimension 4m, got {n}"),
                ));
            }
            let angle = bind(rotated, coords, &format!("{field}.rotated"))?;
            let probe = chart
                .domain()
                .iter()
                .map(|iv| 0.5 * (iv.lo + iv.hi))
                .collect::<Vec<_>>();
            angle.eval(&probe).map_err(|e| ScenarioError::Expr {
                field: format!("{field}.rotated"),
                source: e,
            })?;
            let label = angle.source().to_string();
            Ok(catalog::rotated_triple_by(chart, &label, move |x| {
                angle.eval(x).unwrap_or(f64::NAN)
            }))
        }
        TripleSpec::Explicit { j1, j2, j3 } => {
            let mut fields = Vec::with_capacity(3);
            for (a, m) in [j1, j2, j3].into_iter().enumerate() {
                let f = format!("{field}.j{}", a + 1);
                let entries = bind_matrix(m, n, coords, &f)?;
                fields.push(expr_field(chart, 1, 1, &format!("J{}", a + 1), entries));
            }
            let [a, b, c]: [TensorField; 3] = fields.try_into().expect("three");
            LocalBasisTriple::new(a, b, c)
                .map_err(|e| ScenarioError::validation(field, e.to_string()))
        }
    }
}

fn build_product(
    chart: &Arc<ManifoldSpec>,
    p: &ProductSpec,
    field: &str,
) -> Result<ProductStructureField, ScenarioError> {
    let n = chart.dim();
    let f = match p {
        ProductSpec::Catalog(name) if name == "split" && n.is_multiple_of(2) => {
            catalog::split_product_structure(chart)
        }
        ProductSpec::Catalog(name) => {
            return Err(ScenarioError::validation(
                field,
                format!("unknown catalog product structure `{name}`"),
            ))
        }
        ProductSpec::Rotating { rotating } => {
            let coord = chart
                .coord_names()
                .iter()
                .position(|c| *c == rotating.coord)
                .ok_or_else(|| {
                    ScenarioError::validation(
                        format!("{field}.rotating.coord"),
                        format!("no coordinate `{}`", rotating.coord),
                    )
                })?;
            if !n.is_multiple_of(2) {
                return Err(ScenarioError::validation(
                    field,
                    "rotating product structure needs even dimension",
                ));
            }
            catalog::rotating_product_structure(chart, coord, rotating.rate)
        }
        ProductSpec::Components(rows) => {
            let entries = bind_matrix(rows, n, chart.coord_names(), field)?;
            expr_field(chart, 1, 1, "F", entries)
        }
    };
    Ok(catalog::product_structure(f))
}

fn build_geometry(m: &ManifoldConfig, field: &str) -> Result<Geometry, ScenarioError> {
    let chart = build_chart(m, field)?;
    let metric = build_metric(&chart, m, field)?;
    let triple = m
        .triple
        .as_ref()
        .map(|t| build_triple(&chart, t, &format!("{field}.triple")))
        .transpose()?;
    let alt_triple = m
        .alt_triple
        .as_ref()
        .map(|t| build_triple(&chart, t, &format!("{field}.alt_triple")))
        .transpose()?;
    let product = m
        .product_structure
        .as_ref()
        .map(|p| build_product(&chart, p, &format!("{field}.product_structure")))
        .transpose()?;
    Ok(Geometry {
        chart,
        metric,
        triple,
        alt_triple,
        product,
    })
}

fn fiber_points(
    fiber: &FiberConfig,
    chart: &Arc<ManifoldSpec>,
    prefix: &[f64],
    field: &str,
) -> Result<Vec<Point>, ScenarioError> {
    let n = chart.dim();
    if prefix.len() + fiber.curve.len() != n {
        return Err(ScenarioError::validation(
            format!("{field}.curve"),
            format!(
                "expected {} expressions, got {}",
                n - prefix.len(),
                fiber.curve.len()
            ),
        ));
    }
    let t = ["t".to_string()];
    let exprs: Vec<BoundExpr> = fiber
        .curve
        .iter()
        .enumerate()
        .map(|(i, s)| bind(s, &t, &format!("{field}.curve[{i}]")))
        .collect::<Result<_, _>>()?;
    let count = fiber.count.unwrap_or(DEFAULT_FIBER_COUNT).max(2);
    (0..count)
        .map(|k| {
            let tv = k as f64 / (count - 1) as f64;
            let mut coords = prefix.to_vec();
            for (i, e) in exprs.iter().enumerate() {
                coords.push(e.eval(&[tv]).map_err(|err| ScenarioError::Expr {
                    field: format!("{field}.curve[{i}]"),
                    source: err,
                })?);
            }
            Point::new(chart, coords).map_err(|e| ScenarioError::validation(field, e.to_string()))
        })
        .collect()
}

fn resolve_manifold(m: &ManifoldRef) -> Result<ManifoldConfig, ScenarioError> {
    match m {
        ManifoldRef::Inline(c) => Ok((**c).clone()),
        ManifoldRef::Fixture(name) => {
            let text = super::fixtures::fixture(name).ok_or_else(|| {
                ScenarioError::validation("manifold", format!("no shipped fixture `{name}`"))
            })?;
            let raw: RawScenario =
                serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
            resolve_manifold(&raw.manifold)
        }
    }
}

pub fn validate(raw: RawScenario, overrides: &Overrides) -> Result<ScenarioConfig, ScenarioError> {
    let step = overrides
        .step
        .or(raw.fd.map(|f| f.step))
        .unwrap_or(crate::tensor::DEFAULT_STEP);
    let fd =
        FdConfig::new(step).map_err(|e| ScenarioError::validation("fd.step", e.to_string()))?;
    let mut sample = raw.sample;
    if let Some(seed) = overrides.seed {
        sample.seed = seed;
    }
    if let Some(count) = overrides.points {
        sample.count = count;
    }
    if sample.count == 0 {
        return Err(ScenarioError::validation(
            "sample.count",
            "must be positive",
        ));
    }
    if raw.checks.is_empty() {
        return Err(ScenarioError::validation("checks", "no checks requested"));
    }
    for (i, c) in raw.checks.iter().enumerate() {
        if super::checks::lookup(&c.name).is_none() {
            return Err(ScenarioError::validation(
                format!("checks[{i}].name"),
                format!("unknown check `{}`", c.name),
            ));
        }
        if let Some(t) = c.tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(ScenarioError::validation(
                    format!("checks[{i}].tol"),
                    "must be positive",
                ));
            }
        }
    }

    let manifold = resolve_manifold(&raw.manifold)?;
    let base = build_geometry(&manifold, "manifold")?;

    let (geometry, submersion, bundle) = if raw.sasaki {
        if raw.submersion.is_some() {
            return Err(ScenarioError::validation(
                "submersion",
                "not allowed together with sasaki",
            ));
        }
        let t = base.triple()?.clone();
        let u_box = match &raw.u_domain {
            Some(d) if d.len() != base.chart.dim() => {
                return Err(ScenarioError::validation(
                    "u_domain",
                    format!("expected {} intervals", base.chart.dim()),
                ))
            }
            Some(d) => Some(d.iter().map(|[a, b]| Interval::new(*a, *b)).collect()),
            None => None,
        };
        let bundle = build_tangent_bundle(&base.metric, &t, u_box, &fd)?;
        let fiber = match &raw.sasaki_fiber {
            Some(f) => {
                let centre: Vec<f64> = base
                    .chart
                    .domain()
                    .iter()
                    .map(|iv| 0.5 * (iv.lo + iv.hi))
                    .collect();
                Some(fiber_points(
                    f,
                    &bundle.spec.chart,
                    &centre,
                    "sasaki_fiber",
                )?)
            }
            None => None,
        };
        let geometry = Geometry {
            chart: Arc::clone(&bundle.spec.chart),
            metric: bundle.metric.clone(),
            triple: Some(bundle.triple.clone()),
            alt_triple: None,
            product: None,
        };
        let sub = BuiltSubmersion {
            map: bundle.pi.clone(),
            target: base,
            fiber,
        };
        (geometry, Some(sub), Some(bundle))
    } else {
        let sub = match &raw.submersion {
            None => None,
            Some(s) => {
                let target = build_geometry(&s.target, "submersion.target")?;
                if s.components.len() != target.chart.dim() {
                    return Err(ScenarioError::validation(
                        "submersion.components",
                        format!(
                            "expected {} expressions, got {}",
                            target.chart.dim(),
                            s.components.len()
                        ),
                    ));
                }
                let comps: Vec<BoundExpr> = s
                    .components
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        bind(
                            c,
                            base.chart.coord_names(),
                            &format!("submersion.components[{i}]"),
                        )
                    })
                    .collect::<Result<_, _>>()?;
                let label = s.label.clone().unwrap_or_else(|| "pi".into());
                let map = SubmersionMap::new(&base.chart, &target.chart, label, move |x| {
                    comps
                        .iter()
                        .map(|e| {
                            e.eval(x)
                                .map_err(|err| crate::GeometryError::Evaluation(err.to_string()))
                        })
                        .collect()
                });
                let fiber = s
                    .fiber
                    .as_ref()
                    .map(|f| fiber_points(f, &base.chart, &[], "submersion.fiber"))
                    .transpose()?;
                Some(BuiltSubmersion { map, target, fiber })
            }
        };
        (base, sub, None)
    };

    Ok(ScenarioConfig {
        name: raw.name.clone(),
        anchor: raw.anchor.clone(),
        checks: raw.checks.clone(),
        raw,
        geometry,
        submersion,
        bundle,
        sample,
        fd,
    })
}
