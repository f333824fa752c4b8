//! Named checks: anchors, formulas, default tolerances and their evaluation.

use nalgebra::DMatrix;
use serde_json::{json, Value};

use super::config::{BuiltSubmersion, CheckConfig, Geometry, ScenarioConfig};
use super::error::ScenarioError;
use crate::algebra::{check_triple_algebra, span_gap};
use crate::catalog;
use crate::connection::{
    covariant_derivative_11, is_flat, riemann, signature, CurvatureConvention, Flatness,
};
use crate::sasaki::{
    check_bracket, check_connection_consistency, check_lifted_oneforms, check_z_extension,
    fd_tilde_nabla_j, flat_pqk_tilde_nabla_j, oracle_tilde_nabla_j, TangentBundle, ZExtension,
};
use crate::structure::{
    check_equivalence, check_hermitian, check_product_structure, check_sigma_invariant_operator,
    classify_structure, fit_kahler_oneforms, ProductStructureField, StructureClass,
};
use crate::submersion::{
    check_paraholomorphic, check_semi_riemannian, check_vh_invariance, descend_one_forms,
    oneill_tensors, vh_split,
};
use crate::tensor::{max_abs, sample_points, Point};

/// Result of one evaluated check before the expectation is applied.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub residual: f64,
    pub ok: bool,
    pub details: Value,
}

impl Outcome {
    fn below(residual: f64, tol: f64, details: Value) -> Self {
        Self {
            residual,
            ok: residual < tol,
            details,
        }
    }
}

pub struct Ctx<'a> {
    pub cfg: &'a ScenarioConfig,
    pub check: &'a CheckConfig,
    pub tol: f64,
    pub pts: Vec<Point>,
}

type Runner = fn(&Ctx) -> Result<Outcome, ScenarioError>;

pub struct CheckDef {
    pub name: &'static str,
    pub anchor: &'static str,
    pub formula: &'static str,
    pub default_tol: f64,
    pub run: Runner,
}

impl std::fmt::Debug for CheckDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CheckDef")
            .field("name", &self.name)
            .finish()
    }
}

pub static CHECKS: &[CheckDef] = &[
    CheckDef {
        name: "algebra",
        anchor: "paraquaternionic relations of a local basis",
        formula: "J_a² = -τ_a I, J_aJ_b = τ_c J_c = -J_bJ_a with τ = (-1,-1,1)",
        default_tol: 1e-12,
        run: run_algebra,
    },
    CheckDef {
        name: "hermitian",
        anchor: "σ-Hermitian metric",
        formula: "max_a ‖J_aᵀ g + g J_a‖",
        default_tol: 1e-12,
        run: run_hermitian,
    },
    CheckDef {
        name: "classify",
        anchor: "NotHermitian / HermitianOnly / PQK / LhPK-basis ladder",
        formula: "Hermitian residual, then max ‖∇J_a‖, then Kähler fit residual, one tolerance",
        default_tol: 1e-6,
        run: run_classify,
    },
    CheckDef {
        name: "pqk-fit",
        anchor: "paraquaternionic Kähler condition",
        formula: "∇J_a = -τ_c ω_c ⊗ J_b + ω_b ⊗ J_c; residual of the fitted 1-forms",
        default_tol: 1e-6,
        run: run_pqk_fit,
    },
    CheckDef {
        name: "omega",
        anchor: "connection 1-forms of a paraquaternionic Kähler basis",
        formula: "max |ω_a(∂_i) - expected|",
        default_tol: 1e-5,
        run: run_omega,
    },
    CheckDef {
        name: "lhpk",
        anchor: "locally hyper paraKähler basis",
        formula: "max ‖∇J_a‖",
        default_tol: 1e-6,
        run: run_lhpk,
    },
    CheckDef {
        name: "lhpk-witness",
        anchor: "a parallel local basis of the same structure exists",
        formula: "max(span gap(T, T'), ‖∇T'‖) for the alternate basis T'",
        default_tol: 1e-6,
        run: run_lhpk_witness,
    },
    CheckDef {
        name: "flat",
        anchor: "flatness of the metric",
        formula: "max |R^l_{kij}|",
        default_tol: 1e-6,
        run: run_flat,
    },
    CheckDef {
        name: "bianchi",
        anchor: "first Bianchi identity",
        formula: "max |R^l_{kij} + R^l_{ijk} + R^l_{jki}|",
        default_tol: 1e-4,
        run: run_bianchi,
    },
    CheckDef {
        name: "signature",
        anchor: "neutral signature of a σ-Hermitian metric",
        formula: "eigenvalue signs of g equal the expected (p, q)",
        default_tol: 0.5,
        run: run_signature,
    },
    CheckDef {
        name: "involution",
        anchor: "almost product structure",
        formula: "max ‖F² - I‖",
        default_tol: 1e-10,
        run: run_involution,
    },
    CheckDef {
        name: "product-metric",
        anchor: "F is an isometry of g",
        formula: "max ‖Fᵀ g F - g‖",
        default_tol: 1e-10,
        run: run_product_metric,
    },
    CheckDef {
        name: "nijenhuis",
        anchor: "integrability of F",
        formula: "max |N_F(∂_i, ∂_j)^k|",
        default_tol: 1e-6,
        run: run_nijenhuis,
    },
    CheckDef {
        name: "parallel-f",
        anchor: "F is parallel",
        formula: "max |(∇_i F)^k_j|",
        default_tol: 1e-6,
        run: run_parallel_f,
    },
    CheckDef {
        name: "sigma-invariant",
        anchor: "σ-invariant product structure",
        formula: "max_a ‖J_a F - F J_a‖",
        default_tol: 1e-10,
        run: run_sigma_invariant,
    },
    CheckDef {
        name: "equivalence",
        anchor: "σ-invariant F on a paraquaternionic Kähler manifold: parallel ⇔ integrable ⇔ mixed condition",
        formula: "flags (‖∇F‖ < tol, ‖N_F‖ < tol, ‖(∇_{J_aX}F)Y - (∇_XF)(J_aY)‖ < tol) agree",
        default_tol: 1e-6,
        run: run_equivalence,
    },
    CheckDef {
        name: "semi-riemannian",
        anchor: "semi-Riemannian submersion",
        formula: "max |g(H_i, H_j) - g'(dπ H_i, dπ H_j)|",
        default_tol: 1e-8,
        run: run_semi_riemannian,
    },
    CheckDef {
        name: "paraholomorphic",
        anchor: "paraholomorphic map",
        formula: "max_a ‖J'_a dπ - dπ J_a‖",
        default_tol: 1e-8,
        run: run_paraholomorphic,
    },
    CheckDef {
        name: "vh-invariance",
        anchor: "vertical and horizontal distributions are σ-invariant",
        formula: "max_a (‖v J_a - J_a v‖, ‖h J_a - J_a h‖)",
        default_tol: 1e-8,
        run: run_vh_invariance,
    },
    CheckDef {
        name: "split",
        anchor: "vertical/horizontal decomposition",
        formula: "‖dπ V‖, ‖Vᵀ g H‖, ‖v + h - I‖, ‖v² - v‖, ‖dπ H - I‖",
        default_tol: 1e-8,
        run: run_split,
    },
    CheckDef {
        name: "oneill-a",
        anchor: "horizontal distribution is integrable: A vanishes on horizontal pairs",
        formula: "max ‖A_E F‖, E, F basic; A_E F = h∇_{hE}vF + v∇_{hE}hF",
        default_tol: 1e-5,
        run: run_oneill_a,
    },
    CheckDef {
        name: "a-antisymmetry",
        anchor: "A is alternating on horizontal pairs",
        formula: "max ‖A_E F + A_F E‖, E, F basic",
        default_tol: 1e-5,
        run: run_a_antisymmetry,
    },
    CheckDef {
        name: "oneill-t",
        anchor: "totally geodesic fibres",
        formula: "max |T|, T_E F = h∇_{vE}vF + v∇_{vE}hF",
        default_tol: 1e-6,
        run: run_oneill_t,
    },
    CheckDef {
        name: "descend",
        anchor: "the 1-forms on basic fields are constant along fibres",
        formula: "max spread of ω_a(X_k) over the fibre sample",
        default_tol: 1e-6,
        run: run_descend,
    },
    CheckDef {
        name: "descend-value",
        anchor: "descended 1-forms on the base",
        formula: "max |ω'_a(∂_k) - expected|",
        default_tol: 1e-5,
        run: run_descend_value,
    },
    CheckDef {
        name: "descend-refit",
        anchor: "descended 1-forms satisfy the Kähler equation downstairs",
        formula: "max |ω'(descended) - ω'(fitted on the base)|",
        default_tol: 1e-5,
        run: run_descend_refit,
    },
    CheckDef {
        name: "sasaki-consistency",
        anchor: "Levi-Civita connection of the Sasaki metric on lifts",
        formula: "∇̃_{X^v}Y^v = 0, ∇̃_{X^h}Y^h = (∇_XY)^h - ½R(X,Y,Z)^v, ∇̃_{X^h}Y^v = (∇_XY)^v + ½R(Z,Y,X)^h, ∇̃_{X^v}Y^h = ½R(Z,X,Y)^h vs Christoffel symbols of G",
        default_tol: 1e-3,
        run: run_sasaki_consistency,
    },
    CheckDef {
        name: "bracket",
        anchor: "brackets of vertical and horizontal lifts",
        formula: "[X^v,Y^v] = 0, [X^h,Y^v] = (∇_XY)^v, [X^h,Y^h] = -R(X,Y,Z)^v + [X,Y]^h",
        default_tol: 1e-3,
        run: run_bracket,
    },
    CheckDef {
        name: "tilde-nabla-j",
        anchor: "covariant derivative of the lifted structure",
        formula: "four lift cases of (∇̃J̃_a) in terms of R and ∇J_a vs finite differences on G",
        default_tol: 1e-3,
        run: run_tilde_nabla_j,
    },
    CheckDef {
        name: "flat-pqk-form",
        anchor: "flat paraquaternionic Kähler base: lifted structure is paraquaternionic Kähler",
        formula: "(∇̃_{X^h}J̃_a)Y^k = -τ_c ω_c(X) J̃_b Y^k + ω_b(X) J̃_c Y^k and the remaining cases vanish",
        default_tol: 1e-6,
        run: run_flat_pqk_form,
    },
    CheckDef {
        name: "lifted-omega",
        anchor: "lifted 1-forms are pull-backs",
        formula: "ω̃_a(∂_{u^i}) = 0 and ω̃_a(∂_{x^i}) = ω_a(∂_i)",
        default_tol: 1e-5,
        run: run_lifted_omega,
    },
    CheckDef {
        name: "z-extension",
        anchor: "lift formulas depend only on ξ, not on the extension Z",
        formula: "max difference between constant and linear extensions of Z",
        default_tol: 1e-6,
        run: run_z_extension,
    },
    CheckDef {
        name: "atlas",
        anchor: "structure atlas of local bases",
        formula: "B_a = Σ s_a^b A_b on overlaps, spans agree, algebra holds on each chart",
        default_tol: 1e-10,
        run: run_atlas,
    },
];

pub fn lookup(name: &str) -> Option<&'static CheckDef> {
    CHECKS.iter().find(|c| c.name == name)
}

pub fn points_for(cfg: &ScenarioConfig, check: &CheckConfig) -> Result<Vec<Point>, ScenarioError> {
    if let Some(at) = &check.at {
        return Ok(vec![Point::new(&cfg.geometry.chart, at.clone())?]);
    }
    let count = check.points.unwrap_or(cfg.sample.count);
    Ok(sample_points(&cfg.geometry.chart, count, cfg.sample.seed)?)
}

fn geo<'a>(c: &'a Ctx) -> &'a Geometry {
    &c.cfg.geometry
}

fn sub<'a>(c: &'a Ctx) -> Result<&'a BuiltSubmersion, ScenarioError> {
    c.cfg.submersion.as_ref().ok_or_else(|| {
        ScenarioError::validation(
            "submersion",
            format!("check `{}` needs a submersion", c.check.name),
        )
    })
}

fn bundle<'a>(c: &'a Ctx) -> Result<&'a TangentBundle, ScenarioError> {
    c.cfg.bundle.as_ref().ok_or_else(|| {
        ScenarioError::validation(
            "sasaki",
            format!("check `{}` needs sasaki: true", c.check.name),
        )
    })
}

fn product<'a>(c: &'a Ctx) -> Result<&'a ProductStructureField, ScenarioError> {
    geo(c).product.as_ref().ok_or_else(|| {
        ScenarioError::validation(
            "manifold.product_structure",
            format!("check `{}` needs a product structure", c.check.name),
        )
    })
}

fn max_over<F>(pts: &[Point], f: F) -> Result<f64, ScenarioError>
where
    F: Fn(&Point) -> crate::Result<f64> + Sync,
{
    Ok(crate::par_max(pts, f)?)
}

fn expected_omega(c: &Ctx, cols: usize) -> Result<DMatrix<f64>, ScenarioError> {
    let rows = c.check.omega.as_ref().ok_or_else(|| {
        ScenarioError::validation("checks.omega", "expected 1-form matrix missing")
    })?;
    if rows.len() != 3 || rows.iter().any(|r| r.len() != cols) {
        return Err(ScenarioError::validation(
            "checks.omega",
            format!("expected a 3 × {cols} matrix"),
        ));
    }
    Ok(DMatrix::from_fn(3, cols, |a, i| rows[a][i]))
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::from(
        (0..m.nrows())
            .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    )
}

fn run_algebra(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let t = geo(c).triple()?;
    let reports = crate::par_map(&c.pts, |p| check_triple_algebra(t, p, c.tol))?;
    let fold =
        |f: fn(&crate::algebra::AlgebraReport) -> f64| reports.iter().map(f).fold(0.0, f64::max);
    let (sq, pr, an) = (
        fold(|r| r.square),
        fold(|r| r.product),
        fold(|r| r.anticommutator),
    );
    Ok(Outcome::below(
        sq.max(pr).max(an),
        c.tol,
        json!({"square": sq, "product": pr, "anticommutator": an}),
    ))
}

fn run_hermitian(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let g = geo(c);
    let t = g.triple()?;
    let r = max_over(&c.pts, |p| check_hermitian(&g.metric, t, p))?;
    Ok(Outcome::below(r, c.tol, json!({})))
}

fn run_classify(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let g = geo(c);
    let v = classify_structure(&g.metric, g.triple()?, &c.pts, c.tol, &c.cfg.fd)?;
    let expected = match &c.check.class {
        Some(s) => Some(StructureClass::parse(s).ok_or_else(|| {
            ScenarioError::validation("checks.class", format!("unknown class `{s}`"))
        })?),
        None => None,
    };
    let r = v.residuals;
    let residual = match v.class {
        StructureClass::NotHermitian => r.hermitian,
        StructureClass::LhpkBasis => r.nabla_j,
        StructureClass::Pqk | StructureClass::HermitianOnly => r.kahler_fit,
    };
    Ok(Outcome {
        residual,
        ok: expected.is_none_or(|e| e == v.class),
        details: json!({
            "class": v.class.as_str(),
            "expected_class": expected.map(|e| e.as_str()),
            "hermitian": r.hermitian,
            "nabla_j": r.nabla_j,
            "kahler_fit": r.kahler_fit,
        }),
    })
}

fn run_pqk_fit(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let g = geo(c);
    let t = g.triple()?;
    let r = max_over(&c.pts, |p| {
        Ok(fit_kahler_oneforms(&g.metric, t, p, &c.cfg.fd)?.residual)
    })?;
    Ok(Outcome::below(r, c.tol, json!({})))
}

fn run_omega(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let g = geo(c);
    let t = g.triple()?;
    let expected = expected_omega(c, g.chart.dim())?;
    let fits = crate::par_map(&c.pts, |p| fit_kahler_oneforms(&g.metric, t, p, &c.cfg.fd))?;
    let residual = fits
        .iter()
        .map(|f| max_abs(&(&f.omega - &expected)))
        .fold(0.0, f64::max);
    let fit_residual = fits.iter().map(|f| f.residual).fold(0.0, f64::max);
    Ok(Outcome::below(
        residual,
        c.tol,
        json!({"omega": matrix_json(&fits[0].omega), "fit_residual": fit_residual}),
    ))
}

fn nabla_max(
    g: &Geometry,
    t: &crate::algebra::LocalBasisTriple,
    p: &Point,
    cfg: &crate::FdConfig,
) -> crate::Result<f64> {
    t.fields().iter().try_fold(0.0_f64, |acc, j| {
        let d = covariant_derivative_11(&g.metric, j, p, cfg)?;
        Ok(d.iter().fold(acc, |m, v| m.max(v.abs())))
    })
}

fn run_lhpk(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let g = geo(c);
    let t = g.triple()?;
    let r = max_over(&c.pts, |p| nabla_max(g, t, p, &c.cfg.fd))?;
    Ok(Outcome::below(r, c.tol, json!({})))
}

fn run_lhpk_witness(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let g = geo(c);
    let t = g.triple()?;
    let alt = g.alt_triple.as_ref().ok_or_else(|| {
        ScenarioError::validation(
            "manifold.alt_triple",
            "lhpk-witness needs an alternate basis",
        )
    })?;
    let gap = max_over(&c.pts, |p| span_gap(t, alt, p))?;
    let parallel = max_over(&c.pts, |p| nabla_max(g, alt, p, &c.cfg.fd))?;
    let original = max_over(&c.pts, |p| nabla_max(g, t, p, &c.cfg.fd))?;
    Ok(Outcome::below(
        gap.max(parallel),
        c.tol,
        json!({"span_gap": gap, "alt_nabla_j": parallel, "given_nabla_j": original}),
    ))
}

fn run_flat(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let v = is_flat(&geo(c).metric, &c.pts, c.tol, &c.cfg.fd)?;
    Ok(Outcome {
        residual: v.max_residual,
        ok: v.verdict == Flatness::Flat,
        details: json!({"verdict": if v.verdict == Flatness::Flat { "flat" } else { "not-flat" }}),
    })
}

fn run_bianchi(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let g = geo(c);
    let r = max_over(&c.pts, |p| {
        Ok(riemann(&g.metric, p, &c.cfg.fd)?.bianchi_residual())
    })?;
    Ok(Outcome::below(r, c.tol, json!({})))
}

fn run_signature(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let g = geo(c);
    let expected = c
        .check
        .signature
        .map(|[p, q]| (p, q))
        .or(g.metric.signature_hint())
        .ok_or_else(|| {
            ScenarioError::validation("checks.signature", "expected signature missing")
        })?;
    let sigs = crate::par_map(&c.pts, |p| signature(&g.metric, p))?;
    let mismatches = sigs.iter().filter(|s| **s != expected).count();
    Ok(Outcome::below(
        mismatches as f64,
        c.tol,
        json!({"expected": [expected.0, expected.1], "observed": [sigs[0].0, sigs[0].1]}),
    ))
}

fn product_reports(
    c: &Ctx,
) -> Result<Vec<crate::structure::ProductStructureReport>, ScenarioError> {
    let g = geo(c);
    let f = product(c)?;
    Ok(crate::par_map(&c.pts, |p| {
        check_product_structure(&g.metric, f, p, &c.cfg.fd)
    })?)
}

fn product_component(
    c: &Ctx,
    pick: fn(&crate::structure::ProductStructureReport) -> f64,
) -> Result<Outcome, ScenarioError> {
    let r = product_reports(c)?.iter().map(pick).fold(0.0, f64::max);
    Ok(Outcome::below(r, c.tol, json!({})))
}

fn run_involution(c: &Ctx) -> Result<Outcome, ScenarioError> {
    product_component(c, |r| r.involution)
}

fn run_product_metric(c: &Ctx) -> Result<Outcome, ScenarioError> {
    product_component(c, |r| r.metric_compat)
}

fn run_nijenhuis(c: &Ctx) -> Result<Outcome, ScenarioError> {
    product_component(c, |r| r.nijenhuis)
}

fn run_parallel_f(c: &Ctx) -> Result<Outcome, ScenarioError> {
    product_component(c, |r| r.parallel)
}

fn run_sigma_invariant(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let g = geo(c);
    let (f, t) = (product(c)?, g.triple()?);
    let r = max_over(&c.pts, |p| check_sigma_invariant_operator(f, t, p))?;
    Ok(Outcome::below(r, c.tol, json!({})))
}

fn run_equivalence(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let g = geo(c);
    let rep = check_equivalence(
        &g.metric,
        product(c)?,
        g.triple()?,
        &c.pts,
        &c.cfg.fd,
        c.tol,
    )?;
    let flags_ok = c.check.flags.is_none_or(|f| f == rep.flags);
    Ok(Outcome {
        residual: rep.parallel.max(rep.nijenhuis).max(rep.mixed),
        ok: rep.agree && flags_ok,
        details: json!({
            "parallel": rep.parallel,
            "nijenhuis": rep.nijenhuis,
            "mixed": rep.mixed,
            "flags": rep.flags,
            "agree": rep.agree,
        }),
    })
}

fn run_semi_riemannian(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let s = sub(c)?;
    let r = check_semi_riemannian(&s.map, &geo(c).metric, &s.target.metric, &c.pts, &c.cfg.fd)?;
    Ok(Outcome::below(r, c.tol, json!({})))
}

fn run_paraholomorphic(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let s = sub(c)?;
    let r = check_paraholomorphic(
        &s.map,
        geo(c).triple()?,
        s.target.triple()?,
        &c.pts,
        &c.cfg.fd,
    )?;
    Ok(Outcome::below(r, c.tol, json!({})))
}

fn run_vh_invariance(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let s = sub(c)?;
    let g = geo(c);
    let r = check_vh_invariance(
        &s.map,
        &g.metric,
        g.triple()?,
        s.target.triple()?,
        &c.pts,
        &c.cfg.fd,
        c.tol,
    )?;
    Ok(Outcome::below(
        r.vertical.max(r.horizontal),
        c.tol,
        json!({"vertical": r.vertical, "horizontal": r.horizontal}),
    ))
}

fn run_split(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let s = sub(c)?;
    let g = geo(c);
    let r = max_over(&c.pts, |p| {
        let split = vh_split(&s.map, &g.metric, p, &c.cfg.fd)?;
        Ok(split.residuals(&g.metric.at(p)?).max())
    })?;
    Ok(Outcome::below(r, c.tol, json!({})))
}

fn oneill(
    c: &Ctx,
    pick: fn(&crate::submersion::ONeillTensors) -> f64,
) -> Result<Outcome, ScenarioError> {
    let s = sub(c)?;
    let g = geo(c);
    let r = max_over(&c.pts, |p| {
        Ok(pick(&oneill_tensors(&s.map, &g.metric, p, &c.cfg.fd)?))
    })?;
    Ok(Outcome::below(r, c.tol, json!({})))
}

fn run_oneill_a(c: &Ctx) -> Result<Outcome, ScenarioError> {
    oneill(c, |o| o.horizontal_a_max())
}

fn run_a_antisymmetry(c: &Ctx) -> Result<Outcome, ScenarioError> {
    oneill(c, |o| o.horizontal_antisymmetry())
}

fn run_oneill_t(c: &Ctx) -> Result<Outcome, ScenarioError> {
    oneill(c, |o| o.t_max())
}

/// Fitting tolerance for the upstairs precondition of the descent checks.
const DESCENT_FIT_TOL: f64 = 1e-5;

fn descent(c: &Ctx) -> Result<crate::submersion::Descent, ScenarioError> {
    let s = sub(c)?;
    let g = geo(c);
    let fiber = s.fiber.as_ref().ok_or_else(|| {
        ScenarioError::validation("submersion.fiber", "descent checks need a fibre curve")
    })?;
    Ok(descend_one_forms(
        &s.map,
        &g.metric,
        g.triple()?,
        fiber,
        &c.cfg.fd,
        DESCENT_FIT_TOL,
    )?)
}

fn run_descend(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let d = descent(c)?;
    Ok(Outcome::below(
        d.constancy,
        c.tol,
        json!({"omega_base": matrix_json(&d.omega_base)}),
    ))
}

fn run_descend_value(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let d = descent(c)?;
    let expected = expected_omega(c, d.omega_base.ncols())?;
    Ok(Outcome::below(
        max_abs(&(&d.omega_base - expected)),
        c.tol,
        json!({"omega_base": matrix_json(&d.omega_base)}),
    ))
}

fn run_descend_refit(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let d = descent(c)?;
    let s = sub(c)?;
    let fiber = s.fiber.as_ref().expect("checked by descent");
    let base_point = s.map.apply(&fiber[0])?;
    let fit = fit_kahler_oneforms(&s.target.metric, s.target.triple()?, &base_point, &c.cfg.fd)?;
    Ok(Outcome::below(
        max_abs(&(&fit.omega - &d.omega_base)),
        c.tol,
        json!({"omega_base": matrix_json(&d.omega_base), "omega_refit": matrix_json(&fit.omega), "refit_residual": fit.residual}),
    ))
}

fn run_sasaki_consistency(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let b = bundle(c)?;
    let r = max_over(&c.pts, |p| check_connection_consistency(b, p))?;
    Ok(Outcome::below(r, c.tol, json!({})))
}

fn run_bracket(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let b = bundle(c)?;
    let convention = match c.check.convention.as_deref() {
        None | Some("pinned") => CurvatureConvention::BracketPinned,
        Some("negated") => CurvatureConvention::Negated,
        Some(other) => {
            return Err(ScenarioError::validation(
                "checks.convention",
                format!("unknown convention `{other}`"),
            ))
        }
    };
    let n = b.spec.base_dim();
    let rows = crate::par_map(&c.pts, |p| {
        let mut worst = [0.0_f64; 3];
        for i in 0..n {
            for j in 0..n {
                let r = check_bracket(b, i, j, p, convention)?;
                worst = [worst[0].max(r.vv), worst[1].max(r.hv), worst[2].max(r.hh)];
            }
        }
        Ok(worst)
    })?;
    let worst = rows.iter().fold([0.0_f64; 3], |a, r| {
        [a[0].max(r[0]), a[1].max(r[1]), a[2].max(r[2])]
    });
    Ok(Outcome::below(
        worst[0].max(worst[1]).max(worst[2]),
        c.tol,
        json!({"vv": worst[0], "hv": worst[1], "hh": worst[2]}),
    ))
}

fn run_tilde_nabla_j(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let b = bundle(c)?;
    let r = max_over(&c.pts, |p| {
        let oracle = oracle_tilde_nabla_j(b, p, &ZExtension::Constant)?;
        Ok(fd_tilde_nabla_j(b, p)?.max_diff(&oracle))
    })?;
    Ok(Outcome::below(r, c.tol, json!({})))
}

fn run_flat_pqk_form(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let b = bundle(c)?;
    let base_pts: Vec<Point> = c
        .pts
        .iter()
        .map(|p| b.spec.split(p).map(|(x, _)| x))
        .collect::<crate::Result<_>>()?;
    let flat = is_flat(&b.base_metric, &base_pts, c.tol, &c.cfg.fd)?;
    if flat.verdict != Flatness::Flat {
        return Err(crate::GeometryError::PreconditionFailed(format!(
            "base metric is not flat (curvature {:e})",
            flat.max_residual
        ))
        .into());
    }
    let r = max_over(&c.pts, |p| {
        let (x, _) = b.spec.split(p)?;
        let fit = fit_kahler_oneforms(&b.base_metric, &b.base_triple, &x, &c.cfg.fd)?;
        if fit.residual >= c.tol {
            return Err(crate::GeometryError::PreconditionFailed(format!(
                "base pair is not paraquaternionic Kähler at {x} (fit residual {:e})",
                fit.residual
            )));
        }
        let oracle = oracle_tilde_nabla_j(b, p, &ZExtension::Constant)?;
        Ok(flat_pqk_tilde_nabla_j(b, p, &fit)?.max_diff(&oracle))
    })?;
    Ok(Outcome::below(r, c.tol, json!({})))
}

fn run_lifted_omega(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let b = bundle(c)?;
    let rows = crate::par_map(&c.pts, |p| check_lifted_oneforms(b, p))?;
    let fibre = rows.iter().map(|r| r.fibre).fold(0.0, f64::max);
    let base = rows.iter().map(|r| r.base).fold(0.0, f64::max);
    let residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(Outcome::below(
        fibre.max(base),
        c.tol,
        json!({"fibre": fibre, "base": base, "fit_residual": residual}),
    ))
}

fn run_z_extension(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let b = bundle(c)?;
    let n = b.spec.base_dim();
    let slope = DMatrix::from_fn(n, n, |r, k| 0.25 * (r as f64 + 1.0) - 0.5 * k as f64);
    let r = max_over(&c.pts, |p| check_z_extension(b, p, &slope))?;
    Ok(Outcome::below(r, c.tol, json!({})))
}

fn run_atlas(c: &Ctx) -> Result<Outcome, ScenarioError> {
    let chart = &geo(c).chart;
    if !chart.dim().is_multiple_of(4) {
        return Err(ScenarioError::validation(
            "manifold",
            "the atlas check needs dimension 4m",
        ));
    }
    let atlas = catalog::two_chart_atlas(chart);
    let count = c.check.points.unwrap_or(c.cfg.sample.count);
    let r = atlas.verify(count, c.cfg.sample.seed)?;
    Ok(Outcome::below(
        r.transition.max(r.span).max(r.algebra),
        c.tol,
        json!({"transition": r.transition, "span": r.span, "algebra": r.algebra}),
    ))
}
