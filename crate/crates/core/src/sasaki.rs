//! Tangent bundle with the Sasaki metric and the lifted triple, plus closed-form
//! oracles for the Levi-Civita connection of the lift and for `∇̃J̃`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ndarray::Array3;
use serde::Serialize;

use crate::algebra::{check_triple_algebra, LocalBasisTriple};
use crate::connection::{
    along, christoffel, covariant_derivative_11, riemann, ChristoffelData, CurvatureConvention,
    CurvatureData, MetricField,
};
use crate::error::{GeometryError, Result};
use crate::structure::{check_hermitian, fit_kahler_oneforms, kahler_model, KahlerFit};
use crate::submersion::SubmersionMap;
use crate::tensor::{max_abs, FdConfig, Interval, ManifoldSpec, Point, TensorField};

/// Tolerance of the base Hermitian/algebra checks run before lifting.
pub const BASE_CHECK_TOL: f64 = 1e-8;
pub const FRAME_DET_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TangentBundleSpec {
    pub base: Arc<ManifoldSpec>,
    /// Coordinates `(x¹..xⁿ, u¹..uⁿ)`.
    pub chart: Arc<ManifoldSpec>,
}

impl TangentBundleSpec {
    pub fn new(base: &Arc<ManifoldSpec>, u_box: Option<Vec<Interval>>) -> Result<Self> {
        let n = base.dim();
        let u_box = u_box.unwrap_or_else(|| vec![Interval::new(-1.0, 1.0); n]);
        if u_box.len() != n {
            return Err(GeometryError::ShapeError {
                label: "u-domain".into(),
                expected: n,
                got: u_box.len(),
            });
        }
        let mut names = base.coord_names().to_vec();
        for (i, b) in base.coord_names().iter().enumerate() {
            let plain = format!("u{}", i + 1);
            names.push(if base.coord_names().contains(&plain) {
                format!("u_{b}")
            } else {
                plain
            });
        }
        let mut domain = base.domain().to_vec();
        domain.extend(u_box);
        let chart = ManifoldSpec::new(format!("T{}", base.name()), names, domain)?;
        Ok(Self {
            base: Arc::clone(base),
            chart,
        })
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    /// Splits a bundle point into base point and fibre coordinates.
    pub fn split(&self, xi: &Point) -> Result<(Point, DVector<f64>)> {
        let n = self.base_dim();
        if xi.dim() != 2 * n {
            return Err(GeometryError::ShapeError {
                label: "bundle point".into(),
                expected: 2 * n,
                got: xi.dim(),
            });
        }
        let x = Point::new(&self.base, xi.coords()[..n].to_vec())?;
        Ok((x, DVector::from_column_slice(&xi.coords()[n..])))
    }
}

/// `(TM, G, T̃, π)` built from a base `(g, T)`.
#[derive(Debug, Clone)]
pub struct TangentBundle {
    pub spec: TangentBundleSpec,
    pub base_metric: MetricField,
    pub base_triple: LocalBasisTriple,
    pub metric: MetricField,
    pub triple: LocalBasisTriple,
    pub pi: SubmersionMap,
    pub cfg: FdConfig,
}

/// `E = [[I, 0], [-Γu, I]]` with `(Γu)^a_k = Γ^a_{jk} u^j`; its columns are
/// the horizontal then vertical lifts of the coordinate frame.
fn lift_matrix(gu: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = gu.nrows();
    let mut e = DMatrix::<f64>::identity(2 * n, 2 * n);
    let mut e_inv = DMatrix::<f64>::identity(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            e[(n + r, c)] = -gu[(r, c)];
            e_inv[(n + r, c)] = gu[(r, c)];
        }
    }
    (e, e_inv)
}

fn block_diag(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (n, n)).copy_from(a);
    out
}

/// Builds the Sasaki bundle after checking the base pair at a few sample points.
pub fn build_tangent_bundle(
    g: &MetricField,
    t: &LocalBasisTriple,
    u_box: Option<Vec<Interval>>,
    cfg: &FdConfig,
) -> Result<TangentBundle> {
    let base = Arc::clone(g.field().chart());
    if t.chart() != &base {
        return Err(GeometryError::InvalidArgument(
            "metric and triple live on different charts".into(),
        ));
    }
    let mut probes = vec![Point::new(
        &base,
        base.domain()
            .iter()
            .map(|iv| 0.5 * (iv.lo + iv.hi))
            .collect(),
    )?];
    if let Ok(extra) = crate::tensor::sample_points(&base, 4, 0) {
        probes.extend(extra);
    }
    for p in &probes {
        let herm = check_hermitian(g, t, p)?;
        if herm >= BASE_CHECK_TOL {
            return Err(GeometryError::PreconditionFailed(format!(
                "base metric is not Hermitian at {p} (residual {herm:e})"
            )));
        }
        let alg = check_triple_algebra(t, p, BASE_CHECK_TOL)?;
        if !alg.pass {
            return Err(GeometryError::PreconditionFailed(format!(
                "base triple violates the algebra at {p} (residual {:e})",
                alg.max_residual()
            )));
        }
    }
    let spec = TangentBundleSpec::new(&base, u_box)?;
    let n = base.dim();
    let chart = Arc::clone(&spec.chart);

    let frame = {
        let (base, g, cfg) = (Arc::clone(&base), g.clone(), *cfg);
        move |x: &[f64]| -> Result<(Point, DMatrix<f64>, DMatrix<f64>)> {
            let p = Point::new(&base, x[..n].to_vec())?;
            let u = DVector::from_column_slice(&x[n..]);
            let gamma = christoffel(&g, &p, &cfg)?;
            let (e, e_inv) = lift_matrix(&gamma.contract_first(&u));
            Ok((p, e, e_inv))
        }
    };

    let metric = {
        let (frame, gb) = (frame.clone(), g.clone());
        let field = TensorField::from_matrix_fn(
            &chart,
            0,
            2,
            format!("G[{}]", g.field().label()),
            move |x| {
                let (p, _, e_inv) = frame(x)?;
                let gg = e_inv.transpose() * block_diag(&gb.at(&p)?) * &e_inv;
                Ok((&gg + gg.transpose()) * 0.5)
            },
        );
        let m = MetricField::new(field)?;
        match g.signature_hint() {
            Some((p, q)) => m.with_signature_hint((2 * p, 2 * q)),
            None => m,
        }
    };

    let lifted: Vec<TensorField> = (0..3)
        .map(|a| {
            let (frame, jf) = (frame.clone(), t.j(a).clone());
            TensorField::from_matrix_fn(&chart, 1, 1, format!("~{}", jf.label()), move |x| {
                let (p, e, e_inv) = frame(x)?;
                Ok(&e * block_diag(&jf.eval_matrix(&p)?) * e_inv)
            })
        })
        .collect();
    let [a, b, c]: [TensorField; 3] = lifted.try_into().expect("three lifted fields");
    let triple = LocalBasisTriple::new(a, b, c)?;

    let pi = SubmersionMap::new(&chart, &base, "pi", move |x| Ok(x[..n].to_vec()));
    Ok(TangentBundle {
        spec,
        base_metric: g.clone(),
        base_triple: t.clone(),
        metric,
        triple,
        pi,
        cfg: *cfg,
    })
}

/// Which lift of a base vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LiftKind {
    #[serde(rename = "v")]
    Vertical,
    #[serde(rename = "h")]
    Horizontal,
}

impl LiftKind {
    pub const ALL: [LiftKind; 2] = [LiftKind::Vertical, LiftKind::Horizontal];

    pub fn as_str(&self) -> &'static str {
        match self {
            LiftKind::Vertical => "v",
            LiftKind::Horizontal => "h",
        }
    }
}

/// `X^v = (0, X)`.
pub fn vertical_lift(x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    let mut out = DVector::zeros(2 * n);
    out.rows_mut(n, n).copy_from(x);
    out
}

fn horizontal_with(gamma: &ChristoffelData, u: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    let mut out = DVector::zeros(2 * n);
    out.rows_mut(0, n).copy_from(x);
    out.rows_mut(n, n).copy_from(&(-gamma.contract(u, x)));
    out
}

/// `X^h = (X, -Γ(u, X))`.
pub fn horizontal_lift(
    bundle: &TangentBundle,
    x: &DVector<f64>,
    xi: &Point,
) -> Result<DVector<f64>> {
    let (p, u) = bundle.spec.split(xi)?;
    let gamma = christoffel(&bundle.base_metric, &p, &bundle.cfg)?;
    Ok(horizontal_with(&gamma, &u, x))
}

pub fn lift(
    bundle: &TangentBundle,
    kind: LiftKind,
    x: &DVector<f64>,
    xi: &Point,
) -> Result<DVector<f64>> {
    match kind {
        LiftKind::Vertical => Ok(vertical_lift(x)),
        LiftKind::Horizontal => horizontal_lift(bundle, x, xi),
    }
}

/// Lifts of the coordinate frame at a bundle point.
#[derive(Debug, Clone)]
pub struct LiftFrame {
    pub point: Point,
    /// Columns `∂_i^v`, `2n × n`.
    pub vertical: DMatrix<f64>,
    /// Columns `∂_i^h`, `2n × n`.
    pub horizontal: DMatrix<f64>,
}

impl LiftFrame {
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.vertical.ncols();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (2 * n, n)).copy_from(&self.horizontal);
        m.view_mut((0, n), (2 * n, n)).copy_from(&self.vertical);
        m
    }
}

pub fn lift_frame(bundle: &TangentBundle, xi: &Point) -> Result<LiftFrame> {
    let (p, u) = bundle.spec.split(xi)?;
    let n = p.dim();
    let gamma = christoffel(&bundle.base_metric, &p, &bundle.cfg)?;
    let mut vertical = DMatrix::zeros(2 * n, n);
    let mut horizontal = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        let e = DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
        vertical.set_column(i, &vertical_lift(&e));
        horizontal.set_column(i, &horizontal_with(&gamma, &u, &e));
    }
    let frame = LiftFrame {
        point: xi.clone(),
        vertical,
        horizontal,
    };
    let det = frame.matrix().determinant();
    if det.abs() < FRAME_DET_TOL {
        return Err(GeometryError::IllConditioned(format!(
            "lift frame is singular at {xi} (det {det:e})"
        )));
    }
    Ok(frame)
}

/// Extension of the fibre point `u` to a base vector field `Z` with `Z(x) = u`.
#[derive(Debug, Clone, PartialEq)]
pub enum ZExtension {
    Constant,
    /// `Z(y) = u + A (y - x)`.
    Linear(DMatrix<f64>),
}

impl ZExtension {
    fn value(&self, u: &DVector<f64>, x: &Point, y: &Point) -> DVector<f64> {
        match self {
            ZExtension::Constant => u.clone(),
            ZExtension::Linear(a) => {
                let d = DVector::from_iterator(
                    x.dim(),
                    y.coords().iter().zip(x.coords()).map(|(b, a)| b - a),
                );
                u + a * d
            }
        }
    }
}

struct BaseData {
    base: Point,
    u: DVector<f64>,
    z: DVector<f64>,
    gamma: ChristoffelData,
    curv: CurvatureData,
}

fn base_data(bundle: &TangentBundle, xi: &Point, z: &ZExtension) -> Result<BaseData> {
    let (base, u) = bundle.spec.split(xi)?;
    let gamma = christoffel(&bundle.base_metric, &base, &bundle.cfg)?;
    let curv = riemann(&bundle.base_metric, &base, &bundle.cfg)?;
    let z = z.value(&u, &base, &base);
    Ok(BaseData {
        base,
        u,
        z,
        gamma,
        curv,
    })
}

fn rhs_tilde_nabla(
    d: &BaseData,
    kx: LiftKind,
    x: &DVector<f64>,
    ky: LiftKind,
    y: &DVector<f64>,
) -> DVector<f64> {
    let h = |w: &DVector<f64>| horizontal_with(&d.gamma, &d.u, w);
    let nabla_xy = d.gamma.contract(x, y);
    match (kx, ky) {
        (LiftKind::Vertical, LiftKind::Vertical) => DVector::zeros(2 * x.len()),
        (LiftKind::Horizontal, LiftKind::Horizontal) => {
            vertical_lift(&d.curv.apply(x, y, &d.z)) * -0.5 + h(&nabla_xy)
        }
        (LiftKind::Horizontal, LiftKind::Vertical) => {
            vertical_lift(&nabla_xy) + h(&d.curv.apply(&d.z, y, x)) * 0.5
        }
        (LiftKind::Vertical, LiftKind::Horizontal) => h(&d.curv.apply(&d.z, x, y)) * 0.5,
    }
}

/// Closed-form `∇̃_{X^{kx}} Y^{ky}` at `ξ` for constant-coefficient base fields `X, Y`.
pub fn oracle_tilde_nabla(
    bundle: &TangentBundle,
    kx: LiftKind,
    x: &DVector<f64>,
    ky: LiftKind,
    y: &DVector<f64>,
    xi: &Point,
    z: &ZExtension,
) -> Result<DVector<f64>> {
    let d = base_data(bundle, xi, z)?;
    Ok(rhs_tilde_nabla(&d, kx, x, ky, y))
}

/// `∇̃_{X^{kx}} Y^{ky}` from the finite-difference Christoffel symbols of `G`,
/// differentiating the lift of `Y` as a field on the bundle chart.
pub fn fd_tilde_nabla(
    bundle: &TangentBundle,
    kx: LiftKind,
    x: &DVector<f64>,
    ky: LiftKind,
    y: &DVector<f64>,
    xi: &Point,
) -> Result<DVector<f64>> {
    let gamma = christoffel(&bundle.metric, xi, &bundle.cfg)?;
    let a = lift(bundle, kx, x, xi)?;
    let b = lift(bundle, ky, y, xi)?;
    let mut out = gamma.contract(&a, &b);
    if ky == LiftKind::Horizontal {
        for (alpha, w) in a.iter().enumerate() {
            if *w != 0.0 {
                let db = bundle
                    .cfg
                    .central(xi, alpha, |q| {
                        Ok(lift(bundle, ky, y, q)?.as_slice().to_vec())
                    })
                    .map_err(GeometryError::into_stencil)?;
                out += DVector::from_vec(db) * *w;
            }
        }
    }
    Ok(out)
}

/// Largest gap between the closed form and the finite-difference path over
/// all coordinate pairs and all four kind cases.
pub fn check_connection_consistency(bundle: &TangentBundle, xi: &Point) -> Result<f64> {
    let n = bundle.spec.base_dim();
    let d = base_data(bundle, xi, &ZExtension::Constant)?;
    let mut worst = 0.0_f64;
    for kx in LiftKind::ALL {
        for ky in LiftKind::ALL {
            for i in 0..n {
                for j in 0..n {
                    let x = unit(n, i);
                    let y = unit(n, j);
                    let fd = fd_tilde_nabla(bundle, kx, &x, ky, &y, xi)?;
                    worst = worst.max((fd - rhs_tilde_nabla(&d, kx, &x, ky, &y)).amax());
                }
            }
        }
    }
    Ok(worst)
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 })
}

/// `(∇̃_{∂_i^{kx}} J̃_a)(∂_j^{ky})` for every `a`, kind pair and coordinate pair.
#[derive(Debug, Clone)]
pub struct TildeNablaJ {
    pub point: Point,
    /// Indexed `[a][case]` with cases ordered `(v,v), (v,h), (h,h), (h,v)`;
    /// each array is `[[i, j, l]]` with `l` a bundle component.
    pub cases: [[Array3<f64>; 4]; 3],
}

pub const CASES: [(LiftKind, LiftKind); 4] = [
    (LiftKind::Vertical, LiftKind::Vertical),
    (LiftKind::Vertical, LiftKind::Horizontal),
    (LiftKind::Horizontal, LiftKind::Horizontal),
    (LiftKind::Horizontal, LiftKind::Vertical),
];

fn case_index(kx: LiftKind, ky: LiftKind) -> usize {
    CASES
        .iter()
        .position(|c| *c == (kx, ky))
        .expect("four cases")
}

impl TildeNablaJ {
    pub fn case(&self, a: usize, kx: LiftKind, ky: LiftKind) -> &Array3<f64> {
        &self.cases[a][case_index(kx, ky)]
    }

    pub fn max_abs(&self) -> f64 {
        self.cases
            .iter()
            .flatten()
            .flat_map(|c| c.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_diff(&self, other: &TildeNablaJ) -> f64 {
        let mut worst = 0.0_f64;
        for a in 0..3 {
            for c in 0..4 {
                for (x, y) in self.cases[a][c].iter().zip(other.cases[a][c].iter()) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    }
}

fn empty_cases(n: usize) -> [[Array3<f64>; 4]; 3] {
    std::array::from_fn(|_| std::array::from_fn(|_| Array3::zeros((n, n, 2 * n))))
}

fn store(arr: &mut Array3<f64>, i: usize, j: usize, v: &DVector<f64>) {
    for (l, x) in v.iter().enumerate() {
        arr[[i, j, l]] = *x;
    }
}

/// Closed-form `∇̃J̃` in the four kind cases:
/// `(v,v) = 0`,
/// `(v,h) = ½{R(Z,X,JY) - J R(Z,X,Y)}^h`,
/// `(h,h) = -½{R(X,JY,Z) - J R(X,Y,Z)}^v + ((∇_X J)Y)^h`,
/// `(h,v) = ((∇_X J)Y)^v + ½{R(Z,JY,X) - J R(Z,Y,X)}^h`.
pub fn oracle_tilde_nabla_j(
    bundle: &TangentBundle,
    xi: &Point,
    z: &ZExtension,
) -> Result<TildeNablaJ> {
    let d = base_data(bundle, xi, z)?;
    let n = d.base.dim();
    let js = bundle.base_triple.at(&d.base)?;
    let nabla_j: Vec<Array3<f64>> = bundle
        .base_triple
        .fields()
        .iter()
        .map(|j| covariant_derivative_11(&bundle.base_metric, j, &d.base, &bundle.cfg))
        .collect::<Result<_>>()?;
    let h = |w: &DVector<f64>| horizontal_with(&d.gamma, &d.u, w);
    let r = |a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>| d.curv.apply(a, b, c);
    let mut cases = empty_cases(n);
    for a in 0..3 {
        let j = &js[a];
        for i in 0..n {
            let x = unit(n, i);
            let dj = along(&nabla_j[a], &x);
            for jj in 0..n {
                let y = unit(n, jj);
                let jy = j * &y;
                let djy = &dj * &y;
                let vh = h(&((r(&d.z, &x, &jy) - j * r(&d.z, &x, &y)) * 0.5));
                let hh =
                    vertical_lift(&((r(&x, &jy, &d.z) - j * r(&x, &y, &d.z)) * -0.5)) + h(&djy);
                let hv = vertical_lift(&djy) + h(&((r(&d.z, &jy, &x) - j * r(&d.z, &y, &x)) * 0.5));
                store(
                    &mut cases[a][case_index(LiftKind::Vertical, LiftKind::Horizontal)],
                    i,
                    jj,
                    &vh,
                );
                store(
                    &mut cases[a][case_index(LiftKind::Horizontal, LiftKind::Horizontal)],
                    i,
                    jj,
                    &hh,
                );
                store(
                    &mut cases[a][case_index(LiftKind::Horizontal, LiftKind::Vertical)],
                    i,
                    jj,
                    &hv,
                );
            }
        }
    }
    Ok(TildeNablaJ {
        point: xi.clone(),
        cases,
    })
}

/// Flat paraquaternionic Kähler form of `∇̃J̃`: `(h,h)` and `(h,v)` equal
/// `-τ_c ω_c(X) J̃_b(Y^k) + ω_b(X) J̃_c(Y^k)`, the other cases vanish.
pub fn flat_pqk_tilde_nabla_j(
    bundle: &TangentBundle,
    xi: &Point,
    fit: &KahlerFit,
) -> Result<TildeNablaJ> {
    let (base, u) = bundle.spec.split(xi)?;
    let n = base.dim();
    let js = bundle.base_triple.at(&base)?;
    let gamma = christoffel(&bundle.base_metric, &base, &bundle.cfg)?;
    let mut cases = empty_cases(n);
    for i in 0..n {
        let w = fit.evaluate(&unit(n, i));
        let model = kahler_model(&js, &[w[0], w[1], w[2]]);
        for a in 0..3 {
            for jj in 0..n {
                let my = &model[a] * unit(n, jj);
                store(
                    &mut cases[a][case_index(LiftKind::Horizontal, LiftKind::Horizontal)],
                    i,
                    jj,
                    &horizontal_with(&gamma, &u, &my),
                );
                store(
                    &mut cases[a][case_index(LiftKind::Horizontal, LiftKind::Vertical)],
                    i,
                    jj,
                    &vertical_lift(&my),
                );
            }
        }
    }
    Ok(TildeNablaJ {
        point: xi.clone(),
        cases,
    })
}

/// `∇̃J̃` from the finite-difference covariant derivative of the lifted triple on `G`.
pub fn fd_tilde_nabla_j(bundle: &TangentBundle, xi: &Point) -> Result<TildeNablaJ> {
    let frame = lift_frame(bundle, xi)?;
    let n = bundle.spec.base_dim();
    let mut cases = empty_cases(n);
    for (a, case) in cases.iter_mut().enumerate() {
        let d = covariant_derivative_11(&bundle.metric, bundle.triple.j(a), xi, &bundle.cfg)?;
        for (kx, ky) in CASES {
            let cx = if kx == LiftKind::Vertical {
                &frame.vertical
            } else {
                &frame.horizontal
            };
            let cy = if ky == LiftKind::Vertical {
                &frame.vertical
            } else {
                &frame.horizontal
            };
            for i in 0..n {
                let m = along(&d, &cx.column(i).into_owned());
                for jj in 0..n {
                    let v = &m * cy.column(jj);
                    store(&mut case[case_index(kx, ky)], i, jj, &v);
                }
            }
        }
    }
    Ok(TildeNablaJ {
        point: xi.clone(),
        cases,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BracketResiduals {
    /// `‖[X^v, Y^v]‖`
    pub vv: f64,
    /// `‖[X^h, Y^v] - (∇_X Y)^v‖`
    pub hv: f64,
    /// `‖[X^h, Y^h] + R(X,Y,u)^v‖`
    pub hh: f64,
}

impl BracketResiduals {
    pub fn max(&self) -> f64 {
        self.vv.max(self.hv).max(self.hh)
    }
}

/// Finite-difference Lie brackets of lifted coordinate fields `∂_i`, `∂_j`
/// against the lift bracket identities, with `R` taken in `convention`.
pub fn check_bracket(
    bundle: &TangentBundle,
    i: usize,
    j: usize,
    xi: &Point,
    convention: CurvatureConvention,
) -> Result<BracketResiduals> {
    let n = bundle.spec.base_dim();
    if i >= n || j >= n {
        return Err(GeometryError::InvalidArgument(format!(
            "coordinate index out of range for dimension {n}"
        )));
    }
    let (x, y) = (unit(n, i), unit(n, j));
    let cfg = &bundle.cfg;
    // D(W)·A = Σ_α A^α ∂_α W for a lifted field W
    let derivative =
        |kind: LiftKind, w: &DVector<f64>, dir: &DVector<f64>| -> Result<DVector<f64>> {
            let mut out = DVector::zeros(2 * n);
            if kind == LiftKind::Vertical {
                return Ok(out);
            }
            for (alpha, c) in dir.iter().enumerate() {
                if *c != 0.0 {
                    let d = cfg
                        .central(xi, alpha, |q| {
                            Ok(lift(bundle, kind, w, q)?.as_slice().to_vec())
                        })
                        .map_err(GeometryError::into_stencil)?;
                    out += DVector::from_vec(d) * *c;
                }
            }
            Ok(out)
        };
    let bracket =
        |ka: LiftKind, a: &DVector<f64>, kb: LiftKind, b: &DVector<f64>| -> Result<DVector<f64>> {
            let la = lift(bundle, ka, a, xi)?;
            let lb = lift(bundle, kb, b, xi)?;
            Ok(derivative(kb, b, &la)? - derivative(ka, a, &lb)?)
        };
    let d = base_data(bundle, xi, &ZExtension::Constant)?;
    let curv = match convention {
        CurvatureConvention::BracketPinned => d.curv.clone(),
        CurvatureConvention::Negated => d.curv.negated(),
    };
    let vv = bracket(LiftKind::Vertical, &x, LiftKind::Vertical, &y)?.amax();
    let hv = (bracket(LiftKind::Horizontal, &x, LiftKind::Vertical, &y)?
        - vertical_lift(&d.gamma.contract(&x, &y)))
    .amax();
    let hh = (bracket(LiftKind::Horizontal, &x, LiftKind::Horizontal, &y)?
        + vertical_lift(&curv.apply(&x, &y, &d.u)))
    .amax();
    Ok(BracketResiduals { vv, hv, hh })
}

/// Lifted 1-forms: fit on `(G, T̃)` compared with the pull-back of the base fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiftedOmega {
    /// Largest `|ω̃_a(∂_{u^i})|`.
    pub fibre: f64,
    /// Largest `|ω̃_a(∂_{x^i}) - ω_a(∂_{x^i})|`.
    pub base: f64,
    /// Fit residual upstairs.
    pub residual: f64,
}

pub fn check_lifted_oneforms(bundle: &TangentBundle, xi: &Point) -> Result<LiftedOmega> {
    let (p, _) = bundle.spec.split(xi)?;
    let n = p.dim();
    let up = fit_kahler_oneforms(&bundle.metric, &bundle.triple, xi, &bundle.cfg)?;
    let down = fit_kahler_oneforms(&bundle.base_metric, &bundle.base_triple, &p, &bundle.cfg)?;
    Ok(LiftedOmega {
        fibre: max_abs(&up.omega.columns(n, n).into_owned()),
        base: max_abs(&(up.omega.columns(0, n).into_owned() - down.omega)),
        residual: up.residual,
    })
}

/// Largest change of the oracle values when `Z` is switched from the
/// constant to the given linear extension.
pub fn check_z_extension(bundle: &TangentBundle, xi: &Point, slope: &DMatrix<f64>) -> Result<f64> {
    let n = bundle.spec.base_dim();
    let lin = ZExtension::Linear(slope.clone());
    let a = oracle_tilde_nabla_j(bundle, xi, &ZExtension::Constant)?;
    let b = oracle_tilde_nabla_j(bundle, xi, &lin)?;
    let mut worst = a.max_diff(&b);
    for kx in LiftKind::ALL {
        for ky in LiftKind::ALL {
            for i in 0..n {
                for j in 0..n {
                    let (x, y) = (unit(n, i), unit(n, j));
                    let c = oracle_tilde_nabla(bundle, kx, &x, ky, &y, xi, &ZExtension::Constant)?;
                    let l = oracle_tilde_nabla(bundle, kx, &x, ky, &y, xi, &lin)?;
                    worst = worst.max((c - l).amax());
                }
            }
        }
    }
    Ok(worst)
}

/// Seeded bundle points; the sampling margin leaves room for the nested
/// stencils of curvature on `G`.
pub fn sample_bundle_points(bundle: &TangentBundle, count: usize, seed: u64) -> Result<Vec<Point>> {
    crate::tensor::sample_points(&bundle.spec.chart, count, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::connection::{is_flat, Flatness};
    use crate::structure::{classify_structure, StructureClass};

    fn bundle(g: MetricField, t: LocalBasisTriple) -> TangentBundle {
        let n = g.dim();
        build_tangent_bundle(
            &g,
            &t,
            Some(vec![Interval::new(-1.5, 1.5); n]),
            &FdConfig::default(),
        )
        .unwrap()
    }

    fn flat() -> TangentBundle {
        let c = catalog::r4_chart();
        bundle(catalog::neutral_metric(&c), catalog::standard_triple(&c))
    }

    fn conformal() -> TangentBundle {
        let c = catalog::r4_chart();
        bundle(catalog::conformal_metric(&c), catalog::standard_triple(&c))
    }

    fn xi(b: &TangentBundle, v: [f64; 8]) -> Point {
        Point::new(&b.spec.chart, v.to_vec()).unwrap()
    }

    #[test]
    fn bundle_chart_names_and_domain() {
        let b = flat();
        assert_eq!(b.spec.chart.coord_names()[4], "u1");
        assert_eq!(b.spec.chart.dim(), 8);
        let odd = ManifoldSpec::new(
            "odd",
            vec!["u1".into(), "y".into()],
            vec![Interval::new(-1.0, 1.0); 2],
        )
        .unwrap();
        let s = TangentBundleSpec::new(&odd, None).unwrap();
        assert_eq!(s.chart.coord_names(), ["u1", "y", "u_u1", "u2"]);
    }

    #[test]
    fn flat_bundle_is_block_diagonal() {
        let b = flat();
        let p = xi(&b, [0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8]);
        let g = b.metric.at(&p).unwrap();
        let eta = catalog::neutral_matrix(4);
        assert!(max_abs(&(g - block_diag(&eta))) < 1e-12);
        let js = b.triple.at(&p).unwrap();
        let base = catalog::standard_matrices(4);
        for a in 0..3 {
            assert!(max_abs(&(&js[a] - block_diag(&base[a]))) < 1e-12);
        }
        assert_eq!(crate::connection::signature(&b.metric, &p).unwrap(), (4, 4));
    }

    #[test]
    fn conformal_bundle_metric_and_lifts() {
        let b = conformal();
        let p = xi(&b, [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let h = horizontal_lift(&b, &unit(4, 0), &p).unwrap();
        // Γ^a_{11} at the origin is (1, 0, 0, 0)
        let expect = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0]);
        assert!((h - expect).amax() < 1e-6);
        assert_eq!(
            vertical_lift(&unit(4, 0)),
            DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
        );
        let q = xi(&b, [0.2, -0.1, 0.3, 0.1, 0.5, -0.4, 0.2, 0.9]);
        assert_eq!(crate::connection::signature(&b.metric, &q).unwrap(), (4, 4));
        // G restricted to the lift frame is diag(g, g)
        let f = lift_frame(&b, &q).unwrap().matrix();
        let (base, _) = b.spec.split(&q).unwrap();
        let g = b.base_metric.at(&base).unwrap();
        assert!(max_abs(&(f.transpose() * b.metric.at(&q).unwrap() * &f - block_diag(&g))) < 1e-9);
        // off-block entries depend on u
        let gq = b.metric.at(&q).unwrap();
        assert!(gq.view((0, 4), (4, 4)).amax() > 1e-2);
    }

    #[test]
    fn projection_jacobian_is_block_identity() {
        let b = conformal();
        let p = xi(&b, [0.1; 8]);
        let j = crate::submersion::jacobian(&b.pi, &p, &FdConfig::default()).unwrap();
        for r in 0..4 {
            for c in 0..8 {
                assert!((j[(r, c)] - if r == c { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vertical_vertical_case_is_exactly_zero() {
        let b = conformal();
        let p = xi(&b, [0.1, 0.2, 0.0, -0.1, 0.3, 0.4, -0.5, 0.6]);
        let v = oracle_tilde_nabla(
            &b,
            LiftKind::Vertical,
            &unit(4, 1),
            LiftKind::Vertical,
            &unit(4, 2),
            &p,
            &ZExtension::Constant,
        )
        .unwrap();
        assert!(v.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn connection_oracle_matches_fd_path() {
        for b in [flat(), conformal()] {
            let p = xi(&b, [0.1, -0.2, 0.15, 0.05, 0.6, -0.3, 0.4, 0.2]);
            let gap = check_connection_consistency(&b, &p).unwrap();
            assert!(gap < 1e-3, "{gap}");
        }
    }

    #[test]
    fn vh_case_on_conformal_base_is_half_curvature() {
        let b = conformal();
        // curvature of e^{2x¹}η at the origin has no component with an index along ∂₁
        let p = xi(&b, [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let (base, u) = b.spec.split(&p).unwrap();
        let curv = riemann(&b.base_metric, &base, &b.cfg).unwrap();
        let x = unit(4, 2);
        let y = unit(4, 2);
        let got = oracle_tilde_nabla(
            &b,
            LiftKind::Vertical,
            &x,
            LiftKind::Horizontal,
            &y,
            &p,
            &ZExtension::Constant,
        )
        .unwrap();
        let expect = horizontal_lift(&b, &(curv.apply(&u, &x, &y) * 0.5), &p).unwrap();
        assert!((got.clone() - expect).amax() < 1e-12);
        assert!(got.amax() > 1e-2);
        let fd = fd_tilde_nabla(&b, LiftKind::Vertical, &x, LiftKind::Horizontal, &y, &p).unwrap();
        assert!((fd - got).amax() < 1e-3);
    }

    #[test]
    fn tilde_nabla_j_flat_cases() {
        let b = flat();
        let p = xi(&b, [0.1, 0.2, 0.3, -0.4, 0.5, 0.6, -0.7, 0.1]);
        assert!(
            oracle_tilde_nabla_j(&b, &p, &ZExtension::Constant)
                .unwrap()
                .max_abs()
                < 1e-8
        );

        let c = catalog::r4_chart();
        let rot = bundle(catalog::neutral_metric(&c), catalog::rotated_triple(&c, 0));
        let p = xi(&rot, [0.1, 0.2, 0.3, -0.4, 0.5, 0.6, -0.7, 0.1]);
        let oracle = oracle_tilde_nabla_j(&rot, &p, &ZExtension::Constant).unwrap();
        let (base, _) = rot.spec.split(&p).unwrap();
        let fit = fit_kahler_oneforms(&rot.base_metric, &rot.base_triple, &base, &rot.cfg).unwrap();
        assert!((fit.omega[(2, 0)] + 1.0).abs() < 1e-6);
        let flat_form = flat_pqk_tilde_nabla_j(&rot, &p, &fit).unwrap();
        assert!(oracle.max_diff(&flat_form) < 1e-6);
        assert!(oracle.max_abs() > 0.5);
        let fd = fd_tilde_nabla_j(&rot, &p).unwrap();
        assert!(fd.max_diff(&oracle) < 1e-3);
    }

    #[test]
    fn tilde_nabla_j_conformal_vh_case() {
        let b = conformal();
        let p = xi(&b, [0.1, -0.2, 0.15, 0.05, 0.6, -0.3, 0.4, 0.2]);
        let oracle = oracle_tilde_nabla_j(&b, &p, &ZExtension::Constant).unwrap();
        let vh = oracle.case(0, LiftKind::Vertical, LiftKind::Horizontal);
        assert!(vh.iter().fold(0.0_f64, |m, v| m.max(v.abs())) > 1e-3);
        let fd = fd_tilde_nabla_j(&b, &p).unwrap();
        assert!(fd.max_diff(&oracle) < 1e-3, "{}", fd.max_diff(&oracle));
    }

    #[test]
    fn brackets_pin_the_curvature_sign() {
        let b = flat();
        let p = xi(&b, [0.1; 8]);
        assert!(
            check_bracket(&b, 0, 1, &p, CurvatureConvention::BracketPinned)
                .unwrap()
                .max()
                < 1e-8
        );

        let b = conformal();
        let p = xi(&b, [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let r = check_bracket(&b, 1, 2, &p, CurvatureConvention::BracketPinned).unwrap();
        assert!(r.max() < 1e-3, "{r:?}");
        let flipped = check_bracket(&b, 1, 2, &p, CurvatureConvention::Negated).unwrap();
        assert!(flipped.hh > 1e-2, "{flipped:?}");
        // along ∂₁ the flip is invisible at the origin
        let blind = check_bracket(
            &b,
            0,
            1,
            &xi(&b, [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            CurvatureConvention::Negated,
        )
        .unwrap();
        assert!(blind.hh < 1e-3);
        let same = check_bracket(&b, 2, 2, &p, CurvatureConvention::BracketPinned).unwrap();
        assert!(same.vv == 0.0 && same.hh < 1e-12);
    }

    #[test]
    fn kahler_iff_flat_on_the_bundle() {
        let cfg = FdConfig::default();
        let b = flat();
        let pts = sample_bundle_points(&b, 5, 3).unwrap();
        assert_eq!(
            classify_structure(&b.metric, &b.triple, &pts, 1e-5, &cfg)
                .unwrap()
                .class,
            StructureClass::LhpkBasis
        );

        let c = catalog::r4_chart();
        let rot = bundle(catalog::neutral_metric(&c), catalog::rotated_triple(&c, 0));
        let pts = sample_bundle_points(&rot, 5, 3).unwrap();
        assert_eq!(
            classify_structure(&rot.metric, &rot.triple, &pts, 1e-5, &cfg)
                .unwrap()
                .class,
            StructureClass::Pqk
        );
        let lifted = check_lifted_oneforms(&rot, &pts[0]).unwrap();
        assert!(lifted.fibre < 1e-5 && lifted.base < 1e-5, "{lifted:?}");

        let conf = conformal();
        let pts = sample_bundle_points(&conf, 5, 3).unwrap();
        let v = classify_structure(&conf.metric, &conf.triple, &pts, 1e-5, &cfg).unwrap();
        assert_eq!(v.class, StructureClass::HermitianOnly);
        assert!(v.residuals.kahler_fit > 1e-3);
    }

    #[test]
    fn flatness_transfers() {
        let cfg = FdConfig::default();
        let b = flat();
        let pts = sample_bundle_points(&b, 3, 4).unwrap();
        assert_eq!(
            is_flat(&b.metric, &pts, 1e-6, &cfg).unwrap().verdict,
            Flatness::Flat
        );
        let conf = conformal();
        let pts = sample_bundle_points(&conf, 3, 4).unwrap();
        let v = is_flat(&conf.metric, &pts, 1e-6, &cfg).unwrap();
        assert_eq!(v.verdict, Flatness::NotFlat);
        assert!(v.max_residual > 1e-2);
    }

    #[test]
    fn z_extension_does_not_matter() {
        let b = conformal();
        let p = xi(&b, [0.1, -0.2, 0.15, 0.05, 0.6, -0.3, 0.4, 0.2]);
        let slope = DMatrix::from_fn(4, 4, |r, c| 0.3 * (r as f64) - 0.2 * (c as f64));
        assert!(check_z_extension(&b, &p, &slope).unwrap() < 1e-6);
    }

    #[test]
    fn non_hermitian_base_is_rejected() {
        let c = catalog::r4_chart();
        assert!(matches!(
            build_tangent_bundle(
                &catalog::euclidean_metric(&c),
                &catalog::standard_triple(&c),
                None,
                &FdConfig::default()
            ),
            Err(GeometryError::PreconditionFailed(_))
        ));
    }
}
