//! Built-in charts, metrics, triples, product structures and maps used by the
//! shipped scenarios and the test suites.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::algebra::{AtlasChart, AtlasOverlap, LocalBasisTriple, StructureAtlas, TransitionMap};
use crate::connection::MetricField;
use crate::error::{GeometryError, Result};
use crate::structure::ProductStructureField;
use crate::submersion::SubmersionMap;
use crate::tensor::{Interval, ManifoldSpec, Point, TensorField};

pub fn r4_chart() -> Arc<ManifoldSpec> {
    ManifoldSpec::cube("R4", 4, 1.0).expect("valid chart")
}

pub fn r8_chart() -> Arc<ManifoldSpec> {
    ManifoldSpec::cube("R8", 8, 1.0).expect("valid chart")
}

/// `diag(1, 1, -1, -1)` repeated over each 4-block.
pub fn neutral_matrix(dim: usize) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_fn(
        dim,
        |i, _| {
            if i % 4 < 2 {
                1.0
            } else {
                -1.0
            }
        },
    ))
}

pub fn neutral_metric(chart: &Arc<ManifoldSpec>) -> MetricField {
    let n = chart.dim();
    MetricField::new(TensorField::constant_matrix(
        chart,
        0,
        2,
        "eta",
        neutral_matrix(n),
    ))
    .expect("rank (0,2)")
    .with_signature_hint((n / 2, n / 2))
}

pub fn euclidean_metric(chart: &Arc<ManifoldSpec>) -> MetricField {
    let n = chart.dim();
    MetricField::new(TensorField::constant_matrix(
        chart,
        0,
        2,
        "delta",
        DMatrix::identity(n, n),
    ))
    .expect("rank (0,2)")
}

/// `c · η`, a constant rescaling of the neutral metric.
pub fn scaled_neutral_metric(chart: &Arc<ManifoldSpec>, c: f64) -> MetricField {
    let n = chart.dim();
    MetricField::new(TensorField::constant_matrix(
        chart,
        0,
        2,
        format!("{c}*eta"),
        neutral_matrix(n) * c,
    ))
    .expect("rank (0,2)")
}

/// `e^{2x¹} η`: conformally flat, not flat.
pub fn conformal_metric(chart: &Arc<ManifoldSpec>) -> MetricField {
    let eta = neutral_matrix(chart.dim());
    MetricField::new(TensorField::from_matrix_fn(
        chart,
        0,
        2,
        "exp(2*x1)*eta",
        move |x| Ok(&eta * (2.0 * x[0]).exp()),
    ))
    .expect("rank (0,2)")
}

/// Standard constant matrices on ℝ^{4m}: per 4-block, `J₃` maps e₁→e₂, e₂→-e₁,
/// e₃→-e₄, e₄→e₃; `J₁` swaps e₁↔e₃ and e₂↔e₄; `J₂ = J₁J₃`.
pub fn standard_matrices(dim: usize) -> [DMatrix<f64>; 3] {
    let mut j1 = DMatrix::zeros(dim, dim);
    let mut j3 = DMatrix::zeros(dim, dim);
    for b in (0..dim / 4).map(|k| 4 * k) {
        j3[(b + 1, b)] = 1.0;
        j3[(b, b + 1)] = -1.0;
        j3[(b + 3, b + 2)] = -1.0;
        j3[(b + 2, b + 3)] = 1.0;
        j1[(b + 2, b)] = 1.0;
        j1[(b, b + 2)] = 1.0;
        j1[(b + 3, b + 1)] = 1.0;
        j1[(b + 1, b + 3)] = 1.0;
    }
    let j2 = &j1 * &j3;
    [j1, j2, j3]
}

pub fn standard_triple(chart: &Arc<ManifoldSpec>) -> LocalBasisTriple {
    let [a, b, c] = standard_matrices(chart.dim());
    LocalBasisTriple::new(
        TensorField::constant_matrix(chart, 1, 1, "J1", a),
        TensorField::constant_matrix(chart, 1, 1, "J2", b),
        TensorField::constant_matrix(chart, 1, 1, "J3", c),
    )
    .expect("standard triple")
}

/// Standard triple rotated in the (J₁,J₂)-plane by `angle(x)`:
/// `J₁' = cos θ J₁ + sin θ J₂`, `J₂' = -sin θ J₁ + cos θ J₂`, `J₃' = J₃`.
pub fn rotated_triple_by<F>(chart: &Arc<ManifoldSpec>, label: &str, angle: F) -> LocalBasisTriple
where
    F: Fn(&[f64]) -> f64 + Send + Sync + Clone + 'static,
{
    let [j1, j2, j3] = standard_matrices(chart.dim());
    let (a1, a2, b1, b2) = (j1.clone(), j2.clone(), j1, j2);
    let (t1, t2) = (angle.clone(), angle);
    LocalBasisTriple::new(
        TensorField::from_matrix_fn(chart, 1, 1, format!("J1[{label}]"), move |x| {
            let (s, c) = t1(x).sin_cos();
            Ok(&a1 * c + &a2 * s)
        }),
        TensorField::from_matrix_fn(chart, 1, 1, format!("J2[{label}]"), move |x| {
            let (s, c) = t2(x).sin_cos();
            Ok(&b1 * (-s) + &b2 * c)
        }),
        TensorField::constant_matrix(chart, 1, 1, "J3", j3),
    )
    .expect("rotated triple")
}

/// Standard triple rotated by the angle `x^{coord+1}`.
pub fn rotated_triple(chart: &Arc<ManifoldSpec>, coord: usize) -> LocalBasisTriple {
    let label = chart.coord_names()[coord].clone();
    rotated_triple_by(chart, &label, move |x| x[coord])
}

/// `Q J_a Q⁻¹` for a constant invertible `Q`.
pub fn conjugated_triple(t: &LocalBasisTriple, q: &DMatrix<f64>) -> Result<LocalBasisTriple> {
    let qinv = q
        .clone()
        .try_inverse()
        .ok_or_else(|| GeometryError::InvalidArgument("conjugating matrix is singular".into()))?;
    let chart = Arc::clone(t.chart());
    let members: Vec<TensorField> = (0..3)
        .map(|a| {
            let (src, q, qinv, chart2) =
                (t.j(a).clone(), q.clone(), qinv.clone(), Arc::clone(&chart));
            TensorField::from_matrix_fn(&chart, 1, 1, format!("Q J{} Q^-1", a + 1), move |x| {
                let p = Point::new(&chart2, x.to_vec())?;
                Ok(&q * src.eval_matrix(&p)? * &qinv)
            })
        })
        .collect();
    let [a, b, c]: [TensorField; 3] = members.try_into().expect("three");
    LocalBasisTriple::new(a, b, c)
}

/// Standard triple with `J₁` scaled pointwise by `1 + x¹`; violates the algebra.
pub fn scaled_j1_triple(chart: &Arc<ManifoldSpec>) -> LocalBasisTriple {
    let [j1, j2, j3] = standard_matrices(chart.dim());
    LocalBasisTriple::new(
        TensorField::from_matrix_fn(chart, 1, 1, "(1+x1)J1", move |x| Ok(&j1 * (1.0 + x[0]))),
        TensorField::constant_matrix(chart, 1, 1, "J2", j2),
        TensorField::constant_matrix(chart, 1, 1, "J3", j3),
    )
    .expect("scaled triple")
}

/// `F = P₁ - P₂ = diag(I, -I)` on an even-dimensional product chart.
pub fn split_product_matrix(dim: usize) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_fn(
        dim,
        |i, _| if i < dim / 2 { 1.0 } else { -1.0 },
    ))
}

pub fn split_product_structure(chart: &Arc<ManifoldSpec>) -> TensorField {
    TensorField::constant_matrix(chart, 1, 1, "P1-P2", split_product_matrix(chart.dim()))
}

/// `R(θ) (P₁ - P₂) R(θ)ᵀ`, where `R(θ)` rotates every plane `(xⁱ, x^{i+m})`
/// by `θ = rate · x^{coord+1}`. Commutes with product triples and preserves `η ⊕ η`.
pub fn rotating_product_structure(
    chart: &Arc<ManifoldSpec>,
    coord: usize,
    rate: f64,
) -> TensorField {
    let n = chart.dim();
    let m = n / 2;
    TensorField::from_matrix_fn(
        chart,
        1,
        1,
        format!("F[{rate}*{}]", chart.coord_names()[coord]),
        move |x| {
            let (s2, c2) = (2.0 * rate * x[coord]).sin_cos();
            let mut f = DMatrix::zeros(n, n);
            for i in 0..m {
                f[(i, i)] = c2;
                f[(i + m, i + m)] = -c2;
                f[(i, i + m)] = s2;
                f[(i + m, i)] = s2;
            }
            Ok(f)
        },
    )
}

pub fn product_structure(field: TensorField) -> ProductStructureField {
    ProductStructureField::new_unchecked(field)
}

/// The projection `(x¹..x^{2m}) ↦ (x¹..x^m)`.
pub fn product_projection(source: &Arc<ManifoldSpec>, target: &Arc<ManifoldSpec>) -> SubmersionMap {
    let m = target.dim();
    SubmersionMap::new(source, target, "pr1", move |x| Ok(x[..m].to_vec()))
}

/// Two overlapping boxes of ℝ⁴: the standard triple on `x¹ ≤ 0.5` and the
/// x¹-rotated triple on `x¹ ≥ -0.5`, glued by a (J₁,J₂)-plane rotation.
pub fn two_chart_atlas(chart: &Arc<ManifoldSpec>) -> StructureAtlas {
    let full = chart.domain().to_vec();
    let mut left = full.clone();
    left[0] = Interval::new(full[0].lo, 0.5);
    let mut right = full;
    right[0] = Interval::new(-0.5, right[0].hi);
    StructureAtlas {
        charts: vec![
            AtlasChart {
                domain: left,
                triple: standard_triple(chart),
            },
            AtlasChart {
                domain: right,
                triple: rotated_triple(chart, 0),
            },
        ],
        overlaps: vec![AtlasOverlap {
            from: 0,
            to: 1,
            transition: TransitionMap::plane_rotation("rot(x1)", |x| x[0]),
        }],
    }
}
