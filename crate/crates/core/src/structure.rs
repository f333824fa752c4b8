//! Classification of (metric, triple) pairs and product-structure checks.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::algebra::{LocalBasisTriple, TauSignature};
use crate::connection::{covariant_derivative_11, nijenhuis, slice, MetricField};
use crate::error::{GeometryError, Result};
use crate::tensor::{max_abs, FdConfig, Point, TensorField};

/// `max_a ‖J_aᵀ g + g J_a‖`, the matrix form of `g(X, J_a Y) + g(J_a X, Y) = 0`.
pub fn check_hermitian(g: &MetricField, t: &LocalBasisTriple, p: &Point) -> Result<f64> {
    let gm = g.at(p)?;
    let js = t.at(p)?;
    Ok(js.iter().fold(0.0_f64, |acc, j| {
        acc.max(max_abs(&(j.transpose() * &gm + &gm * j)))
    }))
}

/// Fitted connection 1-forms: `omega[(a, i)] = ω_{a+1}(∂_i)`.
#[derive(Debug, Clone)]
pub struct KahlerFit {
    pub point: Point,
    pub omega: DMatrix<f64>,
    pub residual: f64,
}

impl KahlerFit {
    /// `ω_a(X)` for a tangent vector `X`.
    pub fn evaluate(&self, x: &DVector<f64>) -> nalgebra::Vector3<f64> {
        let v = &self.omega * x;
        nalgebra::Vector3::new(v[0], v[1], v[2])
    }
}

/// Model right-hand side of `∇_X J_a` for cyclic `(a,b,c)`:
/// `-τ_c ω_c(X) J_b + ω_b(X) J_c`.
pub fn kahler_model(js: &[DMatrix<f64>; 3], w: &[f64; 3]) -> [DMatrix<f64>; 3] {
    let mut out: [DMatrix<f64>; 3] =
        std::array::from_fn(|_| DMatrix::zeros(js[0].nrows(), js[0].ncols()));
    for (a, b, c) in crate::algebra::CYCLIC {
        out[a] = &js[b] * (-TauSignature::tau(c) * w[c]) + &js[c] * w[b];
    }
    out
}

pub const TRACE_TOL: f64 = 1e-9;

/// Fits `∇_{∂_i} J_a = -τ_c ω_c(∂_i) J_b + ω_b(∂_i) J_c` at `p`.
///
/// Each `ω_a(∂_i)` enters two of the three equations; the coefficient of `J_b`
/// in a matrix `M` is read off as `tr(M J_b) / tr(J_b²)` and the two readings
/// are averaged. The residual is the largest entry of the unexplained part.
pub fn fit_kahler_oneforms(
    g: &MetricField,
    t: &LocalBasisTriple,
    p: &Point,
    cfg: &FdConfig,
) -> Result<KahlerFit> {
    let n = p.dim();
    let js = t.at(p)?;
    let norms: Vec<f64> = js.iter().map(|j| (j * j).trace()).collect();
    if let Some(b) = norms.iter().position(|v| v.abs() < TRACE_TOL) {
        return Err(GeometryError::IllConditioned(format!(
            "tr(J{}²) vanishes",
            b + 1
        )));
    }
    let coeff = |m: &DMatrix<f64>, b: usize| (m * &js[b]).trace() / norms[b];
    let derivs: Vec<_> = t
        .fields()
        .iter()
        .map(|j| covariant_derivative_11(g, j, p, cfg))
        .collect::<Result<_>>()?;
    let mut omega = DMatrix::zeros(3, n);
    let mut residual = 0.0_f64;
    for i in 0..n {
        let d: Vec<DMatrix<f64>> = derivs.iter().map(|dj| slice(dj, i)).collect();
        // ∇J₁ = -ω₃J₂ + ω₂J₃, ∇J₂ = ω₁J₃ + ω₃J₁, ∇J₃ = ω₂J₁ + ω₁J₂
        let w1 = 0.5 * (coeff(&d[1], 2) + coeff(&d[2], 1));
        let w2 = 0.5 * (coeff(&d[0], 2) + coeff(&d[2], 0));
        let w3 = 0.5 * (-coeff(&d[0], 1) + coeff(&d[1], 0));
        let w = [w1, w2, w3];
        for a in 0..3 {
            omega[(a, i)] = w[a];
        }
        let model = kahler_model(&js, &w);
        for a in 0..3 {
            residual = residual.max(max_abs(&(&d[a] - &model[a])));
        }
    }
    Ok(KahlerFit {
        point: p.clone(),
        omega,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StructureClass {
    NotHermitian,
    HermitianOnly,
    #[serde(rename = "PQK")]
    Pqk,
    #[serde(rename = "LhPK-basis")]
    LhpkBasis,
}

impl StructureClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NotHermitian => "NotHermitian",
            Self::HermitianOnly => "HermitianOnly",
            Self::Pqk => "PQK",
            Self::LhpkBasis => "LhPK-basis",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Self::NotHermitian,
            Self::HermitianOnly,
            Self::Pqk,
            Self::LhpkBasis,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureResiduals {
    pub hermitian: f64,
    pub nabla_j: f64,
    pub kahler_fit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureVerdict {
    pub class: StructureClass,
    pub residuals: StructureResiduals,
}

/// Classifies `(g, T)` over a point sample using one tolerance for every test.
pub fn classify_structure(
    g: &MetricField,
    t: &LocalBasisTriple,
    pts: &[Point],
    tol: f64,
    cfg: &FdConfig,
) -> Result<StructureVerdict> {
    if pts.is_empty() {
        return Err(GeometryError::InvalidArgument(
            "classification needs at least one point".into(),
        ));
    }
    let hermitian = crate::par_max(pts, |p| check_hermitian(g, t, p))?;
    let nabla_j = crate::par_max(pts, |p| {
        t.fields().iter().try_fold(0.0_f64, |acc, j| {
            let d = covariant_derivative_11(g, j, p, cfg)?;
            Ok(d.iter().fold(acc, |m, v| m.max(v.abs())))
        })
    })?;
    let kahler_fit = crate::par_max(pts, |p| Ok(fit_kahler_oneforms(g, t, p, cfg)?.residual))?;
    let class = if hermitian >= tol {
        StructureClass::NotHermitian
    } else if nabla_j < tol {
        StructureClass::LhpkBasis
    } else if kahler_fit < tol {
        StructureClass::Pqk
    } else {
        StructureClass::HermitianOnly
    };
    Ok(StructureVerdict {
        class,
        residuals: StructureResiduals {
            hermitian,
            nabla_j,
            kahler_fit,
        },
    })
}

pub const PRODUCT_TRIVIALITY_TOL: f64 = 1e-6;

/// An almost product structure `F² = I`, `F ≠ ±I`.
#[derive(Debug, Clone)]
pub struct ProductStructureField {
    f: TensorField,
}

impl ProductStructureField {
    /// Validates `F² = I` (within `tol`) and `F ≠ ±I` at each of `pts`.
    pub fn new(f: TensorField, pts: &[Point], tol: f64) -> Result<Self> {
        if f.rank() != (1, 1) {
            return Err(GeometryError::InvalidArgument(format!(
                "`{}` is not a (1,1)-field",
                f.label()
            )));
        }
        for p in pts {
            let m = f.eval_matrix(p)?;
            let n = m.nrows();
            let id = DMatrix::<f64>::identity(n, n);
            if max_abs(&(&m * &m - &id)) >= tol {
                return Err(GeometryError::PreconditionFailed(format!(
                    "`{}` is not an involution at {p}",
                    f.label()
                )));
            }
            if max_abs(&(&m - &id)) <= PRODUCT_TRIVIALITY_TOL
                || max_abs(&(&m + &id)) <= PRODUCT_TRIVIALITY_TOL
            {
                return Err(GeometryError::PreconditionFailed(format!(
                    "`{}` equals ±I at {p}",
                    f.label()
                )));
            }
        }
        Ok(Self { f })
    }

    /// Skips the involution and `F ≠ ±I` checks.
    pub fn new_unchecked(f: TensorField) -> Self {
        Self { f }
    }

    pub fn field(&self) -> &TensorField {
        &self.f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProductStructureReport {
    /// `‖F² - I‖`
    pub involution: f64,
    /// `‖Fᵀ g F - g‖`
    pub metric_compat: f64,
    /// `‖N_F‖`
    pub nijenhuis: f64,
    /// `‖∇F‖`
    pub parallel: f64,
}

impl ProductStructureReport {
    pub fn all_below(&self, tol: f64) -> bool {
        self.involution < tol
            && self.metric_compat < tol
            && self.nijenhuis < tol
            && self.parallel < tol
    }
}

pub fn check_product_structure(
    g: &MetricField,
    f: &ProductStructureField,
    p: &Point,
    cfg: &FdConfig,
) -> Result<ProductStructureReport> {
    let fm = f.field().eval_matrix(p)?;
    let gm = g.at(p)?;
    let n = fm.nrows();
    let involution = max_abs(&(&fm * &fm - DMatrix::<f64>::identity(n, n)));
    let metric_compat = max_abs(&(fm.transpose() * &gm * &fm - &gm));
    let nij = nijenhuis(f.field(), p, cfg)?;
    let nabla = covariant_derivative_11(g, f.field(), p, cfg)?;
    Ok(ProductStructureReport {
        involution,
        metric_compat,
        nijenhuis: nij.iter().fold(0.0_f64, |a, v| a.max(v.abs())),
        parallel: nabla.iter().fold(0.0_f64, |a, v| a.max(v.abs())),
    })
}

/// `max_a ‖J_a F - F J_a‖`.
pub fn check_sigma_invariant_operator(
    f: &ProductStructureField,
    t: &LocalBasisTriple,
    p: &Point,
) -> Result<f64> {
    let fm = f.field().eval_matrix(p)?;
    let js = t.at(p)?;
    Ok(js
        .iter()
        .fold(0.0_f64, |acc, j| acc.max(max_abs(&(j * &fm - &fm * j)))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceReport {
    /// `max ‖∇F‖`
    pub parallel: f64,
    /// `max ‖N_F‖`
    pub nijenhuis: f64,
    /// `max_a ‖(∇_{J_a ∂_i} F)(∂_j) - (∇_{∂_i} F)(J_a ∂_j)‖`
    pub mixed: f64,
    pub flags: [bool; 3],
    pub agree: bool,
}

/// Witnesses the equivalence `∇F = 0 ⇔ N_F = 0 ⇔ (∇_{J_a X} F)Y = (∇_X F)(J_a Y)`
/// for a σ-invariant product structure on a paraquaternionic Kähler pair:
/// the three pass flags must agree.
pub fn check_equivalence(
    g: &MetricField,
    f: &ProductStructureField,
    t: &LocalBasisTriple,
    pts: &[Point],
    cfg: &FdConfig,
    tol: f64,
) -> Result<EquivalenceReport> {
    if pts.is_empty() {
        return Err(GeometryError::InvalidArgument("no points".into()));
    }
    let sigma = crate::par_max(pts, |p| check_sigma_invariant_operator(f, t, p))?;
    if sigma >= tol {
        return Err(GeometryError::PreconditionFailed(format!(
            "product structure is not σ-invariant (residual {sigma:e})"
        )));
    }
    let fit = crate::par_max(pts, |p| Ok(fit_kahler_oneforms(g, t, p, cfg)?.residual))?;
    if fit >= tol {
        return Err(GeometryError::PreconditionFailed(format!(
            "pair is not paraquaternionic Kähler (fit residual {fit:e})"
        )));
    }
    let per_point: Vec<(f64, f64, f64)> = crate::par_map(pts, |p| {
        let n = p.dim();
        let d = covariant_derivative_11(g, f.field(), p, cfg)?;
        let parallel = d.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let nij = nijenhuis(f.field(), p, cfg)?;
        let nijenhuis = nij.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let js = t.at(p)?;
        let mut mixed = 0.0_f64;
        for j in &js {
            for i in 0..n {
                for jj in 0..n {
                    for k in 0..n {
                        let mut lhs = 0.0;
                        let mut rhs = 0.0;
                        for m in 0..n {
                            lhs += j[(m, i)] * d[[m, k, jj]];
                            rhs += d[[i, k, m]] * j[(m, jj)];
                        }
                        mixed = mixed.max((lhs - rhs).abs());
                    }
                }
            }
        }
        Ok((parallel, nijenhuis, mixed))
    })?;
    let (parallel, nijenhuis, mixed) = per_point
        .iter()
        .fold((0.0_f64, 0.0_f64, 0.0_f64), |acc, r| {
            (acc.0.max(r.0), acc.1.max(r.1), acc.2.max(r.2))
        });
    let flags = [parallel < tol, nijenhuis < tol, mixed < tol];
    Ok(EquivalenceReport {
        parallel,
        nijenhuis,
        mixed,
        flags,
        agree: flags[0] == flags[1] && flags[1] == flags[2],
    })
}
