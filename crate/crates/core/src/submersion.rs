//! Smooth maps between charts: Jacobians, vertical/horizontal splitting,
//! semi-Riemannian and paraholomorphy checks, O'Neill tensors and descent of
//! the Kähler 1-forms to the base.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::Array3;
use serde::Serialize;

use crate::algebra::LocalBasisTriple;
use crate::connection::{christoffel, MetricField};
use crate::error::{GeometryError, Result};
use crate::structure::fit_kahler_oneforms;
use crate::tensor::{max_abs, FdConfig, ManifoldSpec, Point};

pub const RANK_TOL: f64 = 1e-8;
pub const FIBER_DEGENERACY_TOL: f64 = 1e-9;
pub const FIBER_IMAGE_TOL: f64 = 1e-10;

type MapFn = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;

/// A smooth map `source → target` given by its coordinate expression.
#[derive(Clone)]
pub struct SubmersionMap {
    source: Arc<ManifoldSpec>,
    target: Arc<ManifoldSpec>,
    label: String,
    components: Arc<MapFn>,
}

impl fmt::Debug for SubmersionMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubmersionMap")
            .field("label", &self.label)
            .field("source", &self.source.name())
            .field("target", &self.target.name())
            .finish()
    }
}

impl SubmersionMap {
    pub fn new<F>(
        source: &Arc<ManifoldSpec>,
        target: &Arc<ManifoldSpec>,
        label: impl Into<String>,
        components: F,
    ) -> Self
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        Self {
            source: Arc::clone(source),
            target: Arc::clone(target),
            label: label.into(),
            components: Arc::new(components),
        }
    }

    pub fn source(&self) -> &Arc<ManifoldSpec> {
        &self.source
    }

    pub fn target(&self) -> &Arc<ManifoldSpec> {
        &self.target
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn raw(&self, p: &Point) -> Result<Vec<f64>> {
        p.check_domain()?;
        let y = (self.components)(p.coords())?;
        if y.len() != self.target.dim() {
            return Err(GeometryError::ShapeError {
                label: self.label.clone(),
                expected: self.target.dim(),
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite {
                label: self.label.clone(),
            });
        }
        Ok(y)
    }

    /// Image point on the target chart.
    pub fn apply(&self, p: &Point) -> Result<Point> {
        Point::new(&self.target, self.raw(p)?)
    }
}

/// Finite-difference Jacobian (`n′ × n`), required to have full rank.
pub fn jacobian(f: &SubmersionMap, p: &Point, cfg: &FdConfig) -> Result<DMatrix<f64>> {
    let n = f.source.dim();
    let m = f.target.dim();
    let mut jac = DMatrix::zeros(m, n);
    for k in 0..n {
        let col = cfg.central(p, k, |q| f.raw(q))?;
        for (r, v) in col.into_iter().enumerate() {
            jac[(r, k)] = v;
        }
    }
    let sigma_min = jac
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |a, v| a.min(*v));
    if m > n || sigma_min <= RANK_TOL {
        return Err(GeometryError::RankDeficient {
            sigma_min: if m > n { 0.0 } else { sigma_min },
        });
    }
    Ok(jac)
}

/// Vertical and horizontal bases and the g-orthogonal projections at a point.
#[derive(Debug, Clone)]
pub struct SplitFrame {
    pub point: Point,
    pub jacobian: DMatrix<f64>,
    /// Orthonormal basis of `ker dπ` (`n × (n - n′)`).
    pub vertical: DMatrix<f64>,
    /// Basic lifts of the target coordinate frame (`n × n′`).
    pub horizontal: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitResiduals {
    /// `‖dπ V‖`
    pub kernel: f64,
    /// `‖Vᵀ g H‖`
    pub orthogonality: f64,
    /// `‖v + h - I‖`
    pub completeness: f64,
    /// `max(‖v² - v‖, ‖h² - h‖)`
    pub idempotence: f64,
    /// `‖dπ H - I‖`
    pub lift: f64,
}

impl SplitResiduals {
    pub fn max(&self) -> f64 {
        self.kernel
            .max(self.orthogonality)
            .max(self.completeness)
            .max(self.idempotence)
            .max(self.lift)
    }
}

impl SplitFrame {
    pub fn residuals(&self, g: &DMatrix<f64>) -> SplitResiduals {
        let n = self.v.nrows();
        let id = DMatrix::<f64>::identity(n, n);
        let m = self.jacobian.nrows();
        SplitResiduals {
            kernel: max_abs(&(&self.jacobian * &self.vertical)),
            orthogonality: max_abs(&(self.vertical.transpose() * g * &self.horizontal)),
            completeness: max_abs(&(&self.v + &self.h - &id)),
            idempotence: max_abs(&(&self.v * &self.v - &self.v))
                .max(max_abs(&(&self.h * &self.h - &self.h))),
            lift: max_abs(&(&self.jacobian * &self.horizontal - DMatrix::<f64>::identity(m, m))),
        }
    }
}

pub fn vh_split(
    f: &SubmersionMap,
    g: &MetricField,
    p: &Point,
    cfg: &FdConfig,
) -> Result<SplitFrame> {
    let jac = jacobian(f, p, cfg)?;
    let gm = g.at(p)?;
    let (m, n) = jac.shape();
    let k = n - m;
    let eig = SymmetricEigen::new(jac.transpose() * &jac);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let vertical = DMatrix::from_fn(n, k, |r, c| eig.eigenvectors[(r, order[c])]);
    let gram = vertical.transpose() * &gm * &vertical;
    let det = if k == 0 { 1.0 } else { gram.determinant() };
    if det.abs() < FIBER_DEGENERACY_TOL {
        return Err(GeometryError::DegenerateFiberMetric { det });
    }
    let v = if k == 0 {
        DMatrix::zeros(n, n)
    } else {
        let gram_inv = gram
            .try_inverse()
            .ok_or(GeometryError::DegenerateFiberMetric { det })?;
        &vertical * gram_inv * vertical.transpose() * &gm
    };
    let h = DMatrix::<f64>::identity(n, n) - &v;
    let jjt_inv = (&jac * jac.transpose())
        .try_inverse()
        .ok_or(GeometryError::RankDeficient { sigma_min: 0.0 })?;
    let horizontal = &h * jac.transpose() * jjt_inv;
    let hgram = horizontal.transpose() * &gm * &horizontal;
    let hdet = hgram.determinant();
    if hdet.abs() < FIBER_DEGENERACY_TOL {
        return Err(GeometryError::DegenerateMetric { det: hdet });
    }
    Ok(SplitFrame {
        point: p.clone(),
        jacobian: jac,
        vertical,
        horizontal,
        v,
        h,
    })
}

/// `max |g(H_i, H_j) - g′(dπ H_i, dπ H_j)|` over the sample.
pub fn check_semi_riemannian(
    f: &SubmersionMap,
    g: &MetricField,
    g_target: &MetricField,
    pts: &[Point],
    cfg: &FdConfig,
) -> Result<f64> {
    crate::par_max(pts, |p| {
        let split = vh_split(f, g, p, cfg)?;
        let gm = g.at(p)?;
        let gt = g_target.at(&f.apply(p)?)?;
        let up = split.horizontal.transpose() * &gm * &split.horizontal;
        let pushed = &split.jacobian * &split.horizontal;
        let down = pushed.transpose() * gt * &pushed;
        Ok(max_abs(&(up - down)))
    })
}

/// `max_a ‖J′_a(π(p)) dπ(p) - dπ(p) J_a(p)‖` over the sample.
pub fn check_paraholomorphic(
    f: &SubmersionMap,
    t: &LocalBasisTriple,
    t_target: &LocalBasisTriple,
    pts: &[Point],
    cfg: &FdConfig,
) -> Result<f64> {
    crate::par_max(pts, |p| {
        let jac = jacobian(f, p, cfg)?;
        let up = t.at(p)?;
        let down = t_target.at(&f.apply(p)?)?;
        Ok((0..3).fold(0.0_f64, |acc, a| {
            acc.max(max_abs(&(&down[a] * &jac - &jac * &up[a])))
        }))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VhInvariance {
    /// `max ‖v J_a - J_a v‖`
    pub vertical: f64,
    /// `max ‖h J_a - J_a h‖`
    pub horizontal: f64,
}

/// Commutation of the projections with each `J_a`; requires paraholomorphy
/// (residual below `tol`) first.
pub fn check_vh_invariance(
    f: &SubmersionMap,
    g: &MetricField,
    t: &LocalBasisTriple,
    t_target: &LocalBasisTriple,
    pts: &[Point],
    cfg: &FdConfig,
    tol: f64,
) -> Result<VhInvariance> {
    let para = check_paraholomorphic(f, t, t_target, pts, cfg)?;
    if para >= tol {
        return Err(GeometryError::PreconditionFailed(format!(
            "map is not paraholomorphic (residual {para:e})"
        )));
    }
    let rows = crate::par_map(pts, |p| {
        let split = vh_split(f, g, p, cfg)?;
        let js = t.at(p)?;
        let mut vr = 0.0_f64;
        let mut hr = 0.0_f64;
        for j in &js {
            vr = vr.max(max_abs(&(&split.v * j - j * &split.v)));
            hr = hr.max(max_abs(&(&split.h * j - j * &split.h)));
        }
        Ok((vr, hr))
    })?;
    let (vertical, horizontal) = rows.iter().fold((0.0_f64, 0.0_f64), |acc, r| {
        (acc.0.max(r.0), acc.1.max(r.1))
    });
    Ok(VhInvariance {
        vertical,
        horizontal,
    })
}

/// O'Neill tensors on coordinate frames: `a[[i, j, k]] = (A_{∂_i} ∂_j)^k`, same for `t`.
#[derive(Debug, Clone)]
pub struct ONeillTensors {
    pub point: Point,
    pub a: Array3<f64>,
    pub t: Array3<f64>,
    pub split: SplitFrame,
}

fn bilinear(arr: &Array3<f64>, e: &DVector<f64>, f: &DVector<f64>) -> DVector<f64> {
    let n = arr.shape()[0];
    DVector::from_fn(n, |k, _| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += e[i] * f[j] * arr[[i, j, k]];
            }
        }
        s
    })
}

impl ONeillTensors {
    pub fn a_on(&self, e: &DVector<f64>, f: &DVector<f64>) -> DVector<f64> {
        bilinear(&self.a, e, f)
    }

    pub fn t_on(&self, e: &DVector<f64>, f: &DVector<f64>) -> DVector<f64> {
        bilinear(&self.t, e, f)
    }

    fn horizontal_pairs(&self) -> impl Iterator<Item = (DVector<f64>, DVector<f64>)> + '_ {
        let hz = &self.split.horizontal;
        let m = hz.ncols();
        (0..m).flat_map(move |i| {
            (0..m).map(move |j| (hz.column(i).into_owned(), hz.column(j).into_owned()))
        })
    }

    /// `max ‖A_E F‖` over pairs of horizontal basis vectors.
    pub fn horizontal_a_max(&self) -> f64 {
        self.horizontal_pairs()
            .map(|(e, f)| self.a_on(&e, &f).amax())
            .fold(0.0, f64::max)
    }

    /// `max ‖A_E F + A_F E‖` over pairs of horizontal basis vectors.
    pub fn horizontal_antisymmetry(&self) -> f64 {
        self.horizontal_pairs()
            .map(|(e, f)| (self.a_on(&e, &f) + self.a_on(&f, &e)).amax())
            .fold(0.0, f64::max)
    }

    pub fn t_max(&self) -> f64 {
        self.t.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

/// `A_E F = h∇_{hE}(vF) + v∇_{hE}(hF)` and `T_E F = h∇_{vE}(vF) + v∇_{vE}(hF)`,
/// with the projected coordinate frames as the vertical/horizontal fields.
pub fn oneill_tensors(
    f: &SubmersionMap,
    g: &MetricField,
    p: &Point,
    cfg: &FdConfig,
) -> Result<ONeillTensors> {
    let split = vh_split(f, g, p, cfg)?;
    let n = p.dim();
    let gamma = christoffel(g, p, cfg)?;
    let dv: Vec<DMatrix<f64>> = (0..n)
        .map(|alpha| {
            cfg.central_matrix(p, alpha, |q| Ok(vh_split(f, g, q, cfg)?.v))
                .map_err(GeometryError::into_stencil)
        })
        .collect::<Result<_>>()?;
    // ∇_W of the frame field x ↦ P(x) e_j, where dp[α] = ∂_α P
    let nabla_frame = |w: &DVector<f64>, pm: &DMatrix<f64>, sign: f64, j: usize| -> DVector<f64> {
        let mut out = gamma.contract(w, &pm.column(j).into_owned());
        for (alpha, d) in dv.iter().enumerate() {
            if w[alpha] != 0.0 {
                out += d.column(j) * (sign * w[alpha]);
            }
        }
        out
    };
    let mut a = Array3::zeros((n, n, n));
    let mut t = Array3::zeros((n, n, n));
    for i in 0..n {
        let wh = split.h.column(i).into_owned();
        let wv = split.v.column(i).into_owned();
        for j in 0..n {
            let av = &split.h * nabla_frame(&wh, &split.v, 1.0, j)
                + &split.v * nabla_frame(&wh, &split.h, -1.0, j);
            let tv = &split.h * nabla_frame(&wv, &split.v, 1.0, j)
                + &split.v * nabla_frame(&wv, &split.h, -1.0, j);
            for k in 0..n {
                a[[i, j, k]] = av[k];
                t[[i, j, k]] = tv[k];
            }
        }
    }
    Ok(ONeillTensors {
        point: p.clone(),
        a,
        t,
        split,
    })
}

/// Fitted 1-forms evaluated on basic lifts along one fibre.
#[derive(Debug, Clone)]
pub struct Descent {
    /// Fibre average of `ω_a(X_k)`, `3 × n′`.
    pub omega_base: DMatrix<f64>,
    /// Largest spread `max - min` of any entry across the fibre sample.
    pub constancy: f64,
    pub samples: Vec<DMatrix<f64>>,
}

pub fn descend_one_forms(
    f: &SubmersionMap,
    g: &MetricField,
    t: &LocalBasisTriple,
    fiber_pts: &[Point],
    cfg: &FdConfig,
    tol: f64,
) -> Result<Descent> {
    let first = fiber_pts
        .first()
        .ok_or_else(|| GeometryError::InvalidArgument("empty fibre sample".into()))?;
    let base = f.raw(first)?;
    let mut spread = 0.0_f64;
    for q in fiber_pts {
        let y = f.raw(q)?;
        for (a, b) in y.iter().zip(&base) {
            spread = spread.max((a - b).abs());
        }
    }
    if spread > FIBER_IMAGE_TOL {
        return Err(GeometryError::NotAFiber { spread });
    }
    let samples = crate::par_map(fiber_pts, |q| {
        let fit = fit_kahler_oneforms(g, t, q, cfg)?;
        if fit.residual >= tol {
            return Err(GeometryError::PreconditionFailed(format!(
                "upstairs pair is not paraquaternionic Kähler at {q} (fit residual {:e})",
                fit.residual
            )));
        }
        let split = vh_split(f, g, q, cfg)?;
        Ok(&fit.omega * &split.horizontal)
    })?;
    let m = f.target.dim();
    let mut constancy = 0.0_f64;
    let mut omega_base = DMatrix::zeros(3, m);
    for a in 0..3 {
        for k in 0..m {
            let vals: Vec<f64> = samples.iter().map(|s| s[(a, k)]).collect();
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            constancy = constancy.max(hi - lo);
            omega_base[(a, k)] = vals.iter().sum::<f64>() / vals.len() as f64;
        }
    }
    Ok(Descent {
        omega_base,
        constancy,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::tensor::sample_points;

    fn product_setup() -> (Arc<ManifoldSpec>, Arc<ManifoldSpec>, SubmersionMap) {
        let up = catalog::r8_chart();
        let down = catalog::r4_chart();
        let f = catalog::product_projection(&up, &down);
        (up, down, f)
    }

    #[test]
    fn product_projection_jacobian() {
        let (up, _, f) = product_setup();
        let p = Point::new(&up, vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.7, 0.0]).unwrap();
        let jac = jacobian(&f, &p, &FdConfig::default()).unwrap();
        let mut expect = DMatrix::zeros(4, 8);
        for i in 0..4 {
            expect[(i, i)] = 1.0;
        }
        assert!(max_abs(&(jac - expect)) < 1e-10);
    }

    #[test]
    fn folded_map_is_rank_deficient() {
        let c = catalog::r4_chart();
        let f = SubmersionMap::new(&c, &c, "fold", |x| Ok(vec![x[0] * x[0], x[1], x[2], x[3]]));
        let p = Point::new(&c, vec![0.0, 0.1, 0.2, 0.3]).unwrap();
        assert!(matches!(
            jacobian(&f, &p, &FdConfig::default()),
            Err(GeometryError::RankDeficient { .. })
        ));
    }

    #[test]
    fn product_split_is_block_diagonal() {
        let (up, _, f) = product_setup();
        let g = catalog::neutral_metric(&up);
        let p = Point::new(&up, vec![0.1; 8]).unwrap();
        let s = vh_split(&f, &g, &p, &FdConfig::default()).unwrap();
        let mut pv = DMatrix::zeros(8, 8);
        for i in 4..8 {
            pv[(i, i)] = 1.0;
        }
        assert!(max_abs(&(&s.v - &pv)) < 1e-10);
        assert!(s.residuals(&g.at(&p).unwrap()).max() < 1e-10);
        for c in 0..4 {
            for r in 0..8 {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!((s.horizontal[(r, c)] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn degenerate_fibre_metric_is_reported() {
        let (up, _, f) = product_setup();
        // null fibre: the metric pairs each vertical coordinate with a horizontal one
        let mut m = DMatrix::zeros(8, 8);
        for i in 0..4 {
            m[(i, i + 4)] = 1.0;
            m[(i + 4, i)] = 1.0;
        }
        let g =
            MetricField::new(crate::TensorField::constant_matrix(&up, 0, 2, "null", m)).unwrap();
        let p = Point::new(&up, vec![0.0; 8]).unwrap();
        assert!(matches!(
            vh_split(&f, &g, &p, &FdConfig::default()),
            Err(GeometryError::DegenerateFiberMetric { .. })
        ));
    }

    #[test]
    fn semi_riemannian_and_scale_mismatch() {
        let (up, down, f) = product_setup();
        let pts = sample_points(&up, 5, 1).unwrap();
        let cfg = FdConfig::default();
        let g = catalog::neutral_metric(&up);
        assert!(
            check_semi_riemannian(&f, &g, &catalog::neutral_metric(&down), &pts, &cfg).unwrap()
                < 1e-10
        );
        let r = check_semi_riemannian(
            &f,
            &g,
            &catalog::scaled_neutral_metric(&down, 2.0),
            &pts,
            &cfg,
        )
        .unwrap();
        assert!((r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn paraholomorphy_and_vh_invariance() {
        let (up, down, f) = product_setup();
        let pts = sample_points(&up, 5, 2).unwrap();
        let cfg = FdConfig::default();
        let g = catalog::neutral_metric(&up);
        let t_up = catalog::standard_triple(&up);
        let t_down = catalog::standard_triple(&down);
        assert!(check_paraholomorphic(&f, &t_up, &t_down, &pts, &cfg).unwrap() < 1e-10);
        let vh = check_vh_invariance(&f, &g, &t_up, &t_down, &pts, &cfg, 1e-8).unwrap();
        assert!(vh.vertical < 1e-10 && vh.horizontal < 1e-10);

        let rotated_down = catalog::rotated_triple(&down, 0);
        assert!(check_paraholomorphic(&f, &t_up, &rotated_down, &pts, &cfg).unwrap() > 0.1);

        // J₁ conjugated by a shear that mixes a vertical and a horizontal direction
        let mut q = DMatrix::<f64>::identity(8, 8);
        q[(0, 4)] = 0.5;
        let broken = catalog::conjugated_triple(&t_up, &q).unwrap();
        assert!(matches!(
            check_vh_invariance(&f, &g, &broken, &t_down, &pts, &cfg, 1e-8),
            Err(GeometryError::PreconditionFailed(_))
        ));
    }

    #[test]
    fn flat_product_has_vanishing_oneill_tensors() {
        let (up, _, f) = product_setup();
        let g = catalog::neutral_metric(&up);
        let p = Point::new(&up, vec![0.2, 0.1, -0.3, 0.4, 0.0, 0.3, 0.1, -0.2]).unwrap();
        let o = oneill_tensors(&f, &g, &p, &FdConfig::default()).unwrap();
        assert!(o.horizontal_a_max() < 1e-8);
        assert!(o.t_max() < 1e-8);
        assert!(o.a.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn descent_on_product_with_base_rotation() {
        let (up, down, f) = product_setup();
        let g = catalog::neutral_metric(&up);
        let t = catalog::rotated_triple(&up, 0);
        let cfg = FdConfig::default();
        let fiber: Vec<Point> = (0..5)
            .map(|s| {
                let s = s as f64 / 4.0;
                Point::new(
                    &up,
                    vec![0.3, -0.1, 0.2, 0.4, -0.5 + s, 0.2 * s, 0.1, -0.3 * s],
                )
                .unwrap()
            })
            .collect();
        let d = descend_one_forms(&f, &g, &t, &fiber, &cfg, 1e-5).unwrap();
        assert!(d.constancy < 1e-6);
        for a in 0..3 {
            for k in 0..4 {
                let expect = if (a, k) == (2, 0) { -1.0 } else { 0.0 };
                assert!((d.omega_base[(a, k)] - expect).abs() < 1e-5);
            }
        }
        // same value from the downstairs fit
        let down_fit = fit_kahler_oneforms(
            &catalog::neutral_metric(&down),
            &catalog::rotated_triple(&down, 0),
            &f.apply(&fiber[0]).unwrap(),
            &cfg,
        )
        .unwrap();
        assert!(max_abs(&(down_fit.omega - &d.omega_base)) < 1e-5);

        let lhpk =
            descend_one_forms(&f, &g, &catalog::standard_triple(&up), &fiber, &cfg, 1e-5).unwrap();
        assert!(lhpk.constancy < 1e-10 && max_abs(&lhpk.omega_base) < 1e-10);

        let mut off = fiber.clone();
        off.push(Point::new(&up, vec![0.31, -0.1, 0.2, 0.4, 0.0, 0.0, 0.0, 0.0]).unwrap());
        assert!(matches!(
            descend_one_forms(&f, &g, &t, &off, &cfg, 1e-5),
            Err(GeometryError::NotAFiber { .. })
        ));
        assert!(matches!(
            descend_one_forms(
                &f,
                &catalog::conformal_metric(&up),
                &catalog::standard_triple(&up),
                &fiber,
                &cfg,
                1e-5
            ),
            Err(GeometryError::PreconditionFailed(_))
        ));
    }

    #[test]
    fn fibre_rotation_breaks_paraholomorphy() {
        let (up, down, f) = product_setup();
        let pts = sample_points(&up, 10, 6).unwrap();
        let cfg = FdConfig::default();
        let t = catalog::rotated_triple(&up, 4);
        let v = crate::structure::classify_structure(
            &catalog::neutral_metric(&up),
            &t,
            &pts,
            1e-5,
            &cfg,
        )
        .unwrap();
        assert_eq!(v.class, crate::structure::StructureClass::Pqk);
        for t_down in [
            catalog::standard_triple(&down),
            catalog::rotated_triple(&down, 0),
        ] {
            assert!(check_paraholomorphic(&f, &t, &t_down, &pts, &cfg).unwrap() > 0.1);
        }
    }
}
