//! Levi-Civita connection, curvature, Nijenhuis tensor and flatness.
//!
//! Index layouts:
//! - `ChristoffelData::gamma[[k, i, j]] = Γ^k_{ij}`
//! - `CurvatureData::riem[[l, k, i, j]] = R^l_{kij}`, so that
//!   `R(X,Y)Z^l = R^l_{kij} X^i Y^j Z^k` with `R(X,Y) = [∇_X,∇_Y] - ∇_[X,Y]`.
//! - covariant derivatives of (1,1)-fields: `d[[i, k, j]] = (∇_i T)^k_j`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array3, Array4};

use crate::error::{GeometryError, Result};
use crate::tensor::{FdConfig, Point, TensorField};

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const DEGENERACY_TOL: f64 = 1e-9;

/// A symmetric nondegenerate (0,2)-field.
#[derive(Debug, Clone)]
pub struct MetricField {
    field: TensorField,
    signature_hint: Option<(usize, usize)>,
}

impl MetricField {
    pub fn new(field: TensorField) -> Result<Self> {
        if field.rank() != (0, 2) {
            return Err(GeometryError::InvalidArgument(format!(
                "metric `{}` must be a (0,2)-field, got {:?}",
                field.label(),
                field.rank()
            )));
        }
        Ok(Self {
            field,
            signature_hint: None,
        })
    }

    pub fn with_signature_hint(mut self, sig: (usize, usize)) -> Self {
        self.signature_hint = Some(sig);
        self
    }

    pub fn signature_hint(&self) -> Option<(usize, usize)> {
        self.signature_hint
    }

    pub fn field(&self) -> &TensorField {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.field.chart().dim()
    }

    /// Metric matrix at `p`, validated for symmetry and nondegeneracy.
    pub fn at(&self, p: &Point) -> Result<DMatrix<f64>> {
        let g = self.field.eval_matrix(p)?;
        let asymmetry = crate::tensor::max_abs(&(&g - g.transpose()));
        if asymmetry >= SYMMETRY_TOL {
            return Err(GeometryError::AsymmetricMetric { asymmetry });
        }
        let det = g.determinant();
        if det.abs() <= DEGENERACY_TOL {
            return Err(GeometryError::DegenerateMetric { det });
        }
        Ok(g)
    }

    /// Inverse metric at `p` by a dense solve.
    pub fn inverse_at(&self, p: &Point) -> Result<DMatrix<f64>> {
        let g = self.at(p)?;
        let det = g.determinant();
        g.try_inverse()
            .ok_or(GeometryError::DegenerateMetric { det })
    }
}

#[derive(Debug, Clone)]
pub struct ChristoffelData {
    pub point: Point,
    pub gamma: Array3<f64>,
}

impl ChristoffelData {
    pub fn dim(&self) -> usize {
        self.gamma.shape()[0]
    }

    /// `Γ(X, Y)^k = Γ^k_{ij} X^i Y^j`.
    pub fn contract(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(n, |k, _| {
            let mut s = 0.0;
            for i in 0..n {
                if x[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    s += self.gamma[[k, i, j]] * x[i] * y[j];
                }
            }
            s
        })
    }

    /// Matrix `M^a_k = Γ^a_{jk} u^j`, the linear map `X ↦ Γ(u, X)`.
    pub fn contract_first(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |a, k| {
            (0..n).map(|j| self.gamma[[a, j, k]] * u[j]).sum()
        })
    }

    /// Largest `|Γ^k_{ij} - Γ^k_{ji}|`.
    pub fn torsion_residual(&self) -> f64 {
        let n = self.dim();
        let mut r = 0.0_f64;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    r = r.max((self.gamma[[k, i, j]] - self.gamma[[k, j, i]]).abs());
                }
            }
        }
        r
    }
}

/// Sign convention of stored curvature components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurvatureConvention {
    /// `R(X,Y) = [∇_X,∇_Y] - ∇_[X,Y]`, matching the lift bracket
    /// `[X^h, Y^h] = -R(X,Y,u)^v + [X,Y]^h`.
    #[default]
    BracketPinned,
    /// The opposite sign; only useful to show the bracket check is not vacuous.
    Negated,
}

#[derive(Debug, Clone)]
pub struct CurvatureData {
    pub point: Point,
    pub riem: Array4<f64>,
    pub convention: CurvatureConvention,
}

impl CurvatureData {
    pub fn dim(&self) -> usize {
        self.riem.shape()[0]
    }

    /// `R(X,Y,Z)^l = R^l_{kij} X^i Y^j Z^k`.
    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(n, |l, _| {
            let mut s = 0.0;
            for k in 0..n {
                if z[k] == 0.0 {
                    continue;
                }
                for i in 0..n {
                    if x[i] == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        s += self.riem[[l, k, i, j]] * x[i] * y[j] * z[k];
                    }
                }
            }
            s
        })
    }

    pub fn negated(&self) -> Self {
        Self {
            point: self.point.clone(),
            riem: -&self.riem,
            convention: match self.convention {
                CurvatureConvention::BracketPinned => CurvatureConvention::Negated,
                CurvatureConvention::Negated => CurvatureConvention::BracketPinned,
            },
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.riem.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// Largest `|R^l_{kij} + R^l_{kji}|`.
    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.dim();
        let mut r = 0.0_f64;
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        r = r.max((self.riem[[l, k, i, j]] + self.riem[[l, k, j, i]]).abs());
                    }
                }
            }
        }
        r
    }

    /// Largest first-Bianchi residual `|R^l_{kij} + R^l_{ijk} + R^l_{jki}|`.
    pub fn bianchi_residual(&self) -> f64 {
        let n = self.dim();
        let mut r = 0.0_f64;
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let s = self.riem[[l, k, i, j]]
                            + self.riem[[l, i, j, k]]
                            + self.riem[[l, j, k, i]];
                        r = r.max(s.abs());
                    }
                }
            }
        }
        r
    }
}

fn metric_partials(g: &MetricField, p: &Point, cfg: &FdConfig) -> Result<Vec<DMatrix<f64>>> {
    (0..p.dim())
        .map(|l| cfg.central_matrix(p, l, |q| g.at(q)))
        .collect()
}

/// Levi-Civita Christoffel symbols from finite-difference metric partials.
pub fn christoffel(g: &MetricField, p: &Point, cfg: &FdConfig) -> Result<ChristoffelData> {
    let n = p.dim();
    let ginv = g.inverse_at(p)?;
    let dg = metric_partials(g, p, cfg)?;
    // lowered[l][(i, j)] = ∂_i g_{lj} + ∂_j g_{li} - ∂_l g_{ij}
    let mut gamma = Array3::zeros((n, n, n));
    for i in 0..n {
        for j in i..n {
            let lowered: Vec<f64> = (0..n)
                .map(|l| dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)])
                .collect();
            for k in 0..n {
                let mut s = 0.0;
                for (l, low) in lowered.iter().enumerate() {
                    s += ginv[(k, l)] * low;
                }
                gamma[[k, i, j]] = 0.5 * s;
                gamma[[k, j, i]] = 0.5 * s;
            }
        }
    }
    Ok(ChristoffelData {
        point: p.clone(),
        gamma,
    })
}

/// `(∇_i T)^k_j = ∂_i T^k_j + Γ^k_{il} T^l_j - Γ^l_{ij} T^k_l`.
pub fn covariant_derivative_11(
    g: &MetricField,
    t: &TensorField,
    p: &Point,
    cfg: &FdConfig,
) -> Result<Array3<f64>> {
    if t.rank() != (1, 1) {
        return Err(GeometryError::InvalidArgument(format!(
            "`{}` is not a (1,1)-field",
            t.label()
        )));
    }
    let n = p.dim();
    let gamma = christoffel(g, p, cfg)?;
    let tm = t.eval_matrix(p)?;
    let mut out = Array3::zeros((n, n, n));
    for i in 0..n {
        let dt = cfg.central_matrix(p, i, |q| t.eval_matrix(q))?;
        for k in 0..n {
            for j in 0..n {
                let mut s = dt[(k, j)];
                for l in 0..n {
                    s += gamma.gamma[[k, i, l]] * tm[(l, j)] - gamma.gamma[[l, i, j]] * tm[(k, l)];
                }
                out[[i, k, j]] = s;
            }
        }
    }
    Ok(out)
}

/// `(∇_i g)_{jk} = ∂_i g_{jk} - Γ^l_{ij} g_{lk} - Γ^l_{ik} g_{jl}`, laid out `[[i, j, k]]`.
pub fn covariant_derivative_02(
    g: &MetricField,
    s: &TensorField,
    p: &Point,
    cfg: &FdConfig,
) -> Result<Array3<f64>> {
    if s.rank() != (0, 2) {
        return Err(GeometryError::InvalidArgument(format!(
            "`{}` is not a (0,2)-field",
            s.label()
        )));
    }
    let n = p.dim();
    let gamma = christoffel(g, p, cfg)?;
    let sm = s.eval_matrix(p)?;
    let mut out = Array3::zeros((n, n, n));
    for i in 0..n {
        let ds = cfg.central_matrix(p, i, |q| s.eval_matrix(q))?;
        for j in 0..n {
            for k in 0..n {
                let mut v = ds[(j, k)];
                for l in 0..n {
                    v -= gamma.gamma[[l, i, j]] * sm[(l, k)] + gamma.gamma[[l, i, k]] * sm[(j, l)];
                }
                out[[i, j, k]] = v;
            }
        }
    }
    Ok(out)
}

/// Directional slice `(∇_X T)` of a covariant-derivative array, as a matrix.
pub fn along(d: &Array3<f64>, x: &DVector<f64>) -> DMatrix<f64> {
    let n = d.shape()[0];
    DMatrix::from_fn(n, n, |k, j| (0..n).map(|i| x[i] * d[[i, k, j]]).sum())
}

/// Matrix `(∇_{∂_i} T)`.
pub fn slice(d: &Array3<f64>, i: usize) -> DMatrix<f64> {
    let n = d.shape()[0];
    DMatrix::from_fn(n, n, |k, j| d[[i, k, j]])
}

/// `R^l_{kij} = ∂_i Γ^l_{jk} - ∂_j Γ^l_{ik} + Γ^l_{im} Γ^m_{jk} - Γ^l_{jm} Γ^m_{ik}`.
pub fn riemann(g: &MetricField, p: &Point, cfg: &FdConfig) -> Result<CurvatureData> {
    p.check_domain()?;
    let n = p.dim();
    let gamma = christoffel(g, p, cfg).map_err(GeometryError::into_stencil)?;
    let h = cfg.step();
    // dgamma[i][[l, j, k]] = ∂_i Γ^l_{jk}
    let mut dgamma = Vec::with_capacity(n);
    for i in 0..n {
        let plus = christoffel(g, &p.shifted(i, h), cfg).map_err(GeometryError::into_stencil)?;
        let minus = christoffel(g, &p.shifted(i, -h), cfg).map_err(GeometryError::into_stencil)?;
        dgamma.push((plus.gamma - minus.gamma) / (2.0 * h));
    }
    let gm = &gamma.gamma;
    let mut riem = Array4::zeros((n, n, n, n));
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = dgamma[i][[l, j, k]] - dgamma[j][[l, i, k]];
                    for m in 0..n {
                        s += gm[[l, i, m]] * gm[[m, j, k]] - gm[[l, j, m]] * gm[[m, i, k]];
                    }
                    riem[[l, k, i, j]] = s;
                }
            }
        }
    }
    Ok(CurvatureData {
        point: p.clone(),
        riem,
        convention: CurvatureConvention::BracketPinned,
    })
}

/// Nijenhuis tensor of a (1,1)-field on coordinate frames, `[[k, i, j]] = N(∂_i, ∂_j)^k`
/// with `N(X,Y) = F²[X,Y] + [FX,FY] - F[FX,Y] - F[X,FY]`.
pub fn nijenhuis(f: &TensorField, p: &Point, cfg: &FdConfig) -> Result<Array3<f64>> {
    if f.rank() != (1, 1) {
        return Err(GeometryError::InvalidArgument(format!(
            "`{}` is not a (1,1)-field",
            f.label()
        )));
    }
    let n = p.dim();
    let fm = f.eval_matrix(p)?;
    let df: Vec<DMatrix<f64>> = (0..n)
        .map(|m| {
            cfg.central_matrix(p, m, |q| f.eval_matrix(q))
                .map_err(GeometryError::into_stencil)
        })
        .collect::<Result<_>>()?;
    let mut out = Array3::zeros((n, n, n));
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for m in 0..n {
                    s += fm[(m, i)] * df[m][(k, j)] - fm[(m, j)] * df[m][(k, i)];
                    s += fm[(k, m)] * (df[j][(m, i)] - df[i][(m, j)]);
                }
                out[[k, i, j]] = s;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flatness {
    Flat,
    NotFlat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatnessVerdict {
    pub verdict: Flatness,
    pub max_residual: f64,
}

/// Flat iff the largest curvature component over `pts` is below `tol`.
pub fn is_flat(
    g: &MetricField,
    pts: &[Point],
    tol: f64,
    cfg: &FdConfig,
) -> Result<FlatnessVerdict> {
    if pts.is_empty() {
        return Err(GeometryError::InvalidArgument(
            "flatness test needs at least one point".into(),
        ));
    }
    let max_residual = crate::par_max(pts, |p| Ok(riemann(g, p, cfg)?.max_abs()))?;
    Ok(FlatnessVerdict {
        verdict: if max_residual < tol {
            Flatness::Flat
        } else {
            Flatness::NotFlat
        },
        max_residual,
    })
}

/// Numbers of positive and negative eigenvalues of `g(p)`.
pub fn signature(g: &MetricField, p: &Point) -> Result<(usize, usize)> {
    let m = g.at(p)?;
    Ok(signature_of(&m))
}

pub(crate) fn signature_of(m: &DMatrix<f64>) -> (usize, usize) {
    let eig = SymmetricEigen::new(m.clone());
    let pos = eig.eigenvalues.iter().filter(|v| **v > 0.0).count();
    let neg = eig.eigenvalues.iter().filter(|v| **v < 0.0).count();
    (pos, neg)
}
