//! Paraquaternion algebra: local basis triples, transitions between them,
//! structure atlases and the abstract split-quaternion product.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3};
use serde::Serialize;

use crate::error::{GeometryError, Result};
use crate::tensor::{max_abs, sample_points, Interval, ManifoldSpec, Point, TensorField};

/// The signs `τ = (-1, -1, 1)`: `J_a² = -τ_a I` and `J_a J_b = τ_c J_c` for cyclic `(a,b,c)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TauSignature;

impl TauSignature {
    pub const TAU: [f64; 3] = [-1.0, -1.0, 1.0];

    pub fn tau(a: usize) -> f64 {
        Self::TAU[a]
    }
}

/// Cyclic permutations of `(0, 1, 2)`.
pub const CYCLIC: [(usize, usize, usize); 3] = [(0, 1, 2), (1, 2, 0), (2, 0, 1)];

/// Threshold on `|det Gram|` below which a triple is treated as dependent.
pub const INDEPENDENCE_TOL: f64 = 1e-6;

/// Three (1,1)-fields `(J₁, J₂, J₃)` on a shared chart.
#[derive(Debug, Clone)]
pub struct LocalBasisTriple {
    j: [TensorField; 3],
}

impl LocalBasisTriple {
    pub fn new(j1: TensorField, j2: TensorField, j3: TensorField) -> Result<Self> {
        for f in [&j1, &j2, &j3] {
            if f.rank() != (1, 1) {
                return Err(GeometryError::InvalidArgument(format!(
                    "triple member `{}` is not a (1,1)-field",
                    f.label()
                )));
            }
            if f.chart() != j1.chart() {
                return Err(GeometryError::InvalidArgument(
                    "triple members live on different charts".into(),
                ));
            }
        }
        Ok(Self { j: [j1, j2, j3] })
    }

    pub fn j(&self, a: usize) -> &TensorField {
        &self.j[a]
    }

    pub fn fields(&self) -> &[TensorField; 3] {
        &self.j
    }

    pub fn chart(&self) -> &Arc<ManifoldSpec> {
        self.j[0].chart()
    }

    pub fn at(&self, p: &Point) -> Result<[DMatrix<f64>; 3]> {
        Ok([
            self.j[0].eval_matrix(p)?,
            self.j[1].eval_matrix(p)?,
            self.j[2].eval_matrix(p)?,
        ])
    }

    /// Determinant of the Frobenius Gram matrix at `p`.
    pub fn gram_determinant(&self, p: &Point) -> Result<f64> {
        Ok(frobenius_gram(&self.at(p)?).determinant())
    }

    /// The triple `B_a = Σ_b s_a^b J_b` for a pointwise transition `s`.
    pub fn transformed(&self, s: &TransitionMap) -> LocalBasisTriple {
        let chart = Arc::clone(self.chart());
        let members: Vec<TensorField> = (0..3)
            .map(|a| {
                let src = self.clone();
                let s = s.clone();
                let chart2 = Arc::clone(&chart);
                TensorField::from_matrix_fn(&chart, 1, 1, format!("s·J{}", a + 1), move |x| {
                    let p = Point::new(&chart2, x.to_vec())?;
                    let js = src.at(&p)?;
                    let m = s.at(&p)?;
                    Ok(&js[0] * m[(a, 0)] + &js[1] * m[(a, 1)] + &js[2] * m[(a, 2)])
                })
            })
            .collect();
        let [a, b, c]: [TensorField; 3] = members.try_into().expect("three members");
        LocalBasisTriple { j: [a, b, c] }
    }
}

fn frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

fn frobenius_gram(js: &[DMatrix<f64>; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|a, b| frobenius(&js[a], &js[b]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlgebraReport {
    /// `max_a ‖J_a² + τ_a I‖`
    pub square: f64,
    /// `max ‖J_a J_b - τ_c J_c‖` over cyclic `(a,b,c)`
    pub product: f64,
    /// `max ‖J_a J_b + J_b J_a‖` over `a ≠ b`
    pub anticommutator: f64,
    pub pass: bool,
}

impl AlgebraReport {
    pub fn max_residual(&self) -> f64 {
        self.square.max(self.product).max(self.anticommutator)
    }
}

/// Residuals of the algebra table at one point of the matrices `js`.
pub fn algebra_residuals(js: &[DMatrix<f64>; 3], tol: f64) -> AlgebraReport {
    let n = js[0].nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut square = 0.0_f64;
    let mut product = 0.0_f64;
    let mut anticommutator = 0.0_f64;
    for (a, j) in js.iter().enumerate() {
        square = square.max(max_abs(&(j * j + &id * TauSignature::tau(a))));
    }
    for (a, b, c) in CYCLIC {
        product = product.max(max_abs(&(&js[a] * &js[b] - &js[c] * TauSignature::tau(c))));
        anticommutator = anticommutator.max(max_abs(&(&js[a] * &js[b] + &js[b] * &js[a])));
    }
    AlgebraReport {
        square,
        product,
        anticommutator,
        pass: square < tol && product < tol && anticommutator < tol,
    }
}

pub fn check_triple_algebra(t: &LocalBasisTriple, p: &Point, tol: f64) -> Result<AlgebraReport> {
    Ok(algebra_residuals(&t.at(p)?, tol))
}

type TransitionFn = dyn Fn(&[f64]) -> Matrix3<f64> + Send + Sync;

/// A smooth map into GL(3,ℝ) relating two local bases on an overlap.
#[derive(Clone)]
pub struct TransitionMap {
    label: String,
    s: Arc<TransitionFn>,
}

impl fmt::Debug for TransitionMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransitionMap")
            .field("label", &self.label)
            .finish()
    }
}

pub const SINGULAR_TRANSITION_TOL: f64 = 1e-9;

impl TransitionMap {
    pub fn new<F>(label: impl Into<String>, s: F) -> Self
    where
        F: Fn(&[f64]) -> Matrix3<f64> + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            s: Arc::new(s),
        }
    }

    pub fn identity() -> Self {
        Self::new("id", |_| Matrix3::identity())
    }

    pub fn constant(label: impl Into<String>, m: Matrix3<f64>) -> Self {
        Self::new(label, move |_| m)
    }

    /// Rotation by `angle(x)` in the (J₁, J₂)-plane, fixing J₃.
    pub fn plane_rotation<F>(label: impl Into<String>, angle: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(label, move |x| {
            let (s, c) = angle(x).sin_cos();
            Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0)
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `s(p)`, rejected when singular.
    pub fn at(&self, p: &Point) -> Result<Matrix3<f64>> {
        let m = (self.s)(p.coords());
        let det = m.determinant();
        if !det.is_finite() || det.abs() < SINGULAR_TRANSITION_TOL {
            return Err(GeometryError::SingularTransition { det });
        }
        Ok(m)
    }
}

/// `max_a ‖B_a(p) - Σ_b s(p)_a^b A_b(p)‖`.
pub fn check_transition(
    a: &LocalBasisTriple,
    b: &LocalBasisTriple,
    s: &TransitionMap,
    p: &Point,
) -> Result<f64> {
    let m = s.at(p)?;
    let ja = a.at(p)?;
    let jb = b.at(p)?;
    Ok((0..3).fold(0.0_f64, |acc, i| {
        let image = &ja[0] * m[(i, 0)] + &ja[1] * m[(i, 1)] + &ja[2] * m[(i, 2)];
        acc.max(max_abs(&(&jb[i] - image)))
    }))
}

/// Largest Frobenius distance from a member of `b` to `span(a)` at `p`.
pub fn span_gap(a: &LocalBasisTriple, b: &LocalBasisTriple, p: &Point) -> Result<f64> {
    let ja = a.at(p)?;
    let jb = b.at(p)?;
    let gram = frobenius_gram(&ja);
    let det = gram.determinant();
    if det.abs() < INDEPENDENCE_TOL {
        return Err(GeometryError::IllConditioned(format!(
            "Gram determinant of the reference triple is {det:e}"
        )));
    }
    let chol = gram.cholesky().ok_or_else(|| {
        GeometryError::IllConditioned("Gram matrix is not positive definite".into())
    })?;
    let mut gap = 0.0_f64;
    for target in &jb {
        let rhs = nalgebra::Vector3::from_fn(|i, _| frobenius(&ja[i], target));
        let c = chol.solve(&rhs);
        let resid = target - (&ja[0] * c[0] + &ja[1] * c[1] + &ja[2] * c[2]);
        gap = gap.max(resid.norm());
    }
    Ok(gap)
}

/// One chart's local basis together with the box it is defined on.
#[derive(Debug, Clone)]
pub struct AtlasChart {
    pub domain: Vec<Interval>,
    pub triple: LocalBasisTriple,
}

#[derive(Debug, Clone)]
pub struct AtlasOverlap {
    pub from: usize,
    pub to: usize,
    pub transition: TransitionMap,
}

/// Local bases over boxes of one coordinate chart, glued by transitions.
#[derive(Debug, Clone)]
pub struct StructureAtlas {
    pub charts: Vec<AtlasChart>,
    pub overlaps: Vec<AtlasOverlap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtlasReport {
    /// Largest transition residual over every overlap sample.
    pub transition: f64,
    /// Largest span gap between the two local bases on overlaps.
    pub span: f64,
    /// Largest algebra residual of any chart triple on its own box.
    pub algebra: f64,
}

impl StructureAtlas {
    /// Samples each declared overlap and checks gluing, span equality and the algebra table.
    pub fn verify(&self, count: usize, seed: u64) -> Result<AtlasReport> {
        let mut report = AtlasReport {
            transition: 0.0,
            span: 0.0,
            algebra: 0.0,
        };
        for (ci, chart) in self.charts.iter().enumerate() {
            let base = chart.triple.chart();
            let sub = ManifoldSpec::new(
                format!("{}#{ci}", base.name()),
                base.coord_names().to_vec(),
                chart.domain.clone(),
            )?;
            for q in sample_points(&sub, count, seed)? {
                let p = Point::new(base, q.coords().to_vec())?;
                let r = check_triple_algebra(&chart.triple, &p, f64::INFINITY)?;
                report.algebra = report.algebra.max(r.max_residual());
            }
        }
        for ov in &self.overlaps {
            let (from, to) = (&self.charts[ov.from], &self.charts[ov.to]);
            let base = from.triple.chart();
            let domain: Vec<Interval> = from
                .domain
                .iter()
                .zip(&to.domain)
                .map(|(a, b)| Interval::new(a.lo.max(b.lo), a.hi.min(b.hi)))
                .collect();
            let sub = ManifoldSpec::new(
                format!("{}#{}∩{}", base.name(), ov.from, ov.to),
                base.coord_names().to_vec(),
                domain,
            )?;
            for q in sample_points(&sub, count, seed)? {
                let p = Point::new(base, q.coords().to_vec())?;
                report.transition = report.transition.max(check_transition(
                    &from.triple,
                    &to.triple,
                    &ov.transition,
                    &p,
                )?);
                report.span = report.span.max(span_gap(&from.triple, &to.triple, &p)?);
            }
        }
        Ok(report)
    }
}

/// A split quaternion `w + a₁e₁ + a₂e₂ + a₃e₃` with `e₁² = e₂² = 1`, `e₃² = -1`, `e₁e₂ = e₃`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SplitQuaternion {
    pub w: f64,
    pub a: [f64; 3],
}

impl SplitQuaternion {
    pub const ONE: Self = Self {
        w: 1.0,
        a: [0.0; 3],
    };

    pub fn new(w: f64, a1: f64, a2: f64, a3: f64) -> Self {
        Self { w, a: [a1, a2, a3] }
    }

    /// Basis unit `e_{a+1}`.
    pub fn unit(a: usize) -> Self {
        let mut q = Self::default();
        q.a[a] = 1.0;
        q
    }

    /// Image under `e_a ↦ J_a`: `w I + Σ a_a J_a`.
    pub fn represent(&self, js: &[DMatrix<f64>; 3]) -> DMatrix<f64> {
        let n = js[0].nrows();
        DMatrix::<f64>::identity(n, n) * self.w
            + &js[0] * self.a[0]
            + &js[1] * self.a[1]
            + &js[2] * self.a[2]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d = (self.w - other.w).abs();
        for i in 0..3 {
            d = d.max((self.a[i] - other.a[i]).abs());
        }
        d
    }
}

/// Bilinear product from `e_a² = -τ_a` and `e_a e_b = τ_c e_c = -e_b e_a`.
pub fn splitq_mul(x: SplitQuaternion, y: SplitQuaternion) -> SplitQuaternion {
    let mut out = SplitQuaternion {
        w: x.w * y.w,
        a: [0.0; 3],
    };
    for a in 0..3 {
        out.a[a] += x.w * y.a[a] + x.a[a] * y.w;
        out.w += -TauSignature::tau(a) * x.a[a] * y.a[a];
    }
    for (a, b, c) in CYCLIC {
        let tc = TauSignature::tau(c);
        out.a[c] += tc * (x.a[a] * y.a[b] - x.a[b] * y.a[a]);
    }
    out
}

impl Mul for SplitQuaternion {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        splitq_mul(self, rhs)
    }
}

impl Add for SplitQuaternion {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            w: self.w + rhs.w,
            a: [
                self.a[0] + rhs.a[0],
                self.a[1] + rhs.a[1],
                self.a[2] + rhs.a[2],
            ],
        }
    }
}

impl Sub for SplitQuaternion {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for SplitQuaternion {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            w: -self.w,
            a: [-self.a[0], -self.a[1], -self.a[2]],
        }
    }
}
