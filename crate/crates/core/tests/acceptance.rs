//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use paraquat_core::algebra::{check_triple_algebra, SplitQuaternion};
use paraquat_core::catalog::{
    euclidean_metric, neutral_metric, r4_chart, rotated_triple, standard_triple,
};
use paraquat_core::connection::{is_flat, CurvatureConvention, Flatness};
use paraquat_core::expr::parse_expr;
use paraquat_core::sasaki::{
    check_bracket, check_connection_consistency, check_lifted_oneforms, sample_bundle_points,
};
use paraquat_core::scenario::{
    fixture_names, load_fixture, run_scenario, Overrides, ScenarioConfig, Verdict,
};
use paraquat_core::structure::{
    check_equivalence, classify_structure, fit_kahler_oneforms, StructureClass,
};
use paraquat_core::submersion::{descend_one_forms, oneill_tensors};
use paraquat_core::tensor::{max_abs, sample_points};
use paraquat_core::FdConfig;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod support;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion = (&'static str, fn() -> Outcome);

fn fixture(name: &str) -> Result<ScenarioConfig, Box<dyn std::error::Error>> {
    Ok(load_fixture(name, &Overrides::default())?)
}

fn algebra_suite() -> Outcome {
    let c = r4_chart();
    let t = standard_triple(&c);
    let mut alg = 0.0_f64;
    let mut hom = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut q = || {
        SplitQuaternion::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        )
    };
    for p in sample_points(&c, 100, 1)? {
        alg = alg.max(check_triple_algebra(&t, &p, 1e-12)?.max_residual());
        let js = t.at(&p)?;
        let (x, y) = (q(), q());
        hom = hom.max(max_abs(
            &((x * y).represent(&js) - x.represent(&js) * y.represent(&js)),
        ));
    }
    Ok((
        alg < 1e-12 && hom < 1e-12,
        format!("algebra {alg:.1e}, homomorphism {hom:.1e}"),
    ))
}

fn classification_ladder() -> Outcome {
    let c = r4_chart();
    let cfg = FdConfig::default();
    let pts = sample_points(&c, 20, 2)?;
    let flat = classify_structure(&neutral_metric(&c), &standard_triple(&c), &pts, 1e-6, &cfg)?;
    let rotated = classify_structure(
        &neutral_metric(&c),
        &rotated_triple(&c, 0),
        &pts,
        1e-5,
        &cfg,
    )?;
    let mut expected = DMatrix::<f64>::zeros(3, 4);
    expected[(2, 0)] = -1.0;
    let mut omega_err = 0.0_f64;
    for p in &pts {
        let fit = fit_kahler_oneforms(&neutral_metric(&c), &rotated_triple(&c, 0), p, &cfg)?;
        omega_err = omega_err.max(max_abs(&(fit.omega - &expected)));
    }
    let euclid = classify_structure(
        &euclidean_metric(&c),
        &standard_triple(&c),
        &pts,
        1e-6,
        &cfg,
    )?;
    let ok = flat.class == StructureClass::LhpkBasis
        && rotated.class == StructureClass::Pqk
        && omega_err < 1e-5
        && euclid.class == StructureClass::NotHermitian;
    Ok((
        ok,
        format!(
            "flat {}, rotated {} (omega error {omega_err:.1e}), euclidean {}",
            flat.class.as_str(),
            rotated.class.as_str(),
            euclid.class.as_str()
        ),
    ))
}

fn integrability_witness() -> Outcome {
    let mut a_max = 0.0_f64;
    let mut anti = 0.0_f64;
    for name in fixture_names() {
        let cfg = fixture(name)?;
        let Some(s) = &cfg.submersion else { continue };
        for p in sample_points(&cfg.geometry.chart, 6, 3)? {
            let on = oneill_tensors(&s.map, &cfg.geometry.metric, &p, &cfg.fd)?;
            anti = anti.max(on.horizontal_antisymmetry());
            if name == "product-submersion-rotated" || name == "sasaki-over-flat" {
                a_max = a_max.max(on.horizontal_a_max());
            }
        }
    }
    Ok((
        a_max < 1e-5 && anti < 1e-5,
        format!("max |A| on horizontals {a_max:.1e}, antisymmetry {anti:.1e}"),
    ))
}

fn descent_witness() -> Outcome {
    let cfg = fixture("product-submersion-rotated")?;
    let s = cfg.submersion.as_ref().ok_or("no submersion")?;
    let fiber = s.fiber.as_ref().ok_or("no fibre")?;
    let t = cfg.geometry.triple()?;
    let d = descend_one_forms(&s.map, &cfg.geometry.metric, t, fiber, &cfg.fd, 1e-5)?;
    let base = s.map.apply(&fiber[0])?;
    let fit = fit_kahler_oneforms(&s.target.metric, s.target.triple()?, &base, &cfg.fd)?;
    let refit = max_abs(&(fit.omega - &d.omega_base));
    Ok((
        d.constancy < 1e-6 && refit < 1e-5,
        format!("constancy {:.1e}, refit {refit:.1e}", d.constancy),
    ))
}

fn equivalence_witness() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, want) in [("product-8d", true), ("product-8d-rotating-f", false)] {
        let cfg = fixture(name)?;
        let f = cfg
            .geometry
            .product
            .as_ref()
            .ok_or("no product structure")?;
        let pts = sample_points(&cfg.geometry.chart, 10, 5)?;
        let r = check_equivalence(
            &cfg.geometry.metric,
            f,
            cfg.geometry.triple()?,
            &pts,
            &cfg.fd,
            1e-6,
        )?;
        ok &= r.agree && r.flags == [want; 3];
        if !want {
            ok &= r.parallel > 1e-3 && r.nijenhuis > 1e-3 && r.mixed > 1e-3;
        }
        detail.push(format!(
            "{name} flags {:?} (|∇F| {:.1e}, |N_F| {:.1e}, mixed {:.1e})",
            r.flags, r.parallel, r.nijenhuis, r.mixed
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn sasaki_consistency() -> Outcome {
    let mut worst = 0.0_f64;
    let mut bracket = 0.0_f64;
    let mut flipped = f64::INFINITY;
    for name in ["sasaki-over-flat", "sasaki-over-conformal"] {
        let cfg = fixture(name)?;
        let b = cfg.bundle.as_ref().ok_or("no bundle")?;
        for xi in sample_bundle_points(b, 20, 6)? {
            worst = worst.max(check_connection_consistency(b, &xi)?);
        }
        let xi = sample_bundle_points(b, 1, 7)?.remove(0);
        for (i, j) in [(0, 1), (1, 2), (1, 3), (2, 3)] {
            bracket =
                bracket.max(check_bracket(b, i, j, &xi, CurvatureConvention::BracketPinned)?.max());
        }
        if name == "sasaki-over-conformal" {
            flipped = check_bracket(b, 1, 2, &xi, CurvatureConvention::Negated)?.max();
        }
    }
    Ok((
        worst < 1e-3 && bracket < 1e-3 && flipped > 1e-2,
        format!("consistency {worst:.1e}, bracket {bracket:.1e}, flipped sign {flipped:.1e}"),
    ))
}

fn kahler_iff_flat() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, want) in [
        ("sasaki-over-flat", StructureClass::LhpkBasis),
        ("sasaki-over-rotated", StructureClass::Pqk),
    ] {
        let cfg = fixture(name)?;
        let pts = sample_points(&cfg.geometry.chart, 6, 8)?;
        let v = classify_structure(
            &cfg.geometry.metric,
            cfg.geometry.triple()?,
            &pts,
            1e-5,
            &cfg.fd,
        )?;
        ok &= v.class == want;
        detail.push(format!("{name} {}", v.class.as_str()));
    }
    let cfg = fixture("sasaki-over-rotated")?;
    let b = cfg.bundle.as_ref().ok_or("no bundle")?;
    let mut lifted = 0.0_f64;
    for xi in sample_bundle_points(b, 6, 9)? {
        let l = check_lifted_oneforms(b, &xi)?;
        lifted = lifted.max(l.fibre).max(l.base);
    }
    ok &= lifted < 1e-5;
    detail.push(format!("lifted omega error {lifted:.1e}"));

    let cfg = fixture("sasaki-over-conformal")?;
    let mut fit = 0.0_f64;
    for xi in sample_points(&cfg.geometry.chart, 6, 10)? {
        fit = fit.max(
            fit_kahler_oneforms(&cfg.geometry.metric, cfg.geometry.triple()?, &xi, &cfg.fd)?
                .residual,
        );
    }
    let report = run_scenario(&cfg);
    let classify = report.record("classify").ok_or("no classify record")?;
    ok &= fit > 1e-3 && classify.outcome == Verdict::Fail && classify.verdict == Verdict::Pass;
    detail.push(format!("conformal fit residual {fit:.1e} (expected fail)"));
    Ok((ok, detail.join("; ")))
}

fn flatness_transfer() -> Outcome {
    let flat = fixture("sasaki-over-flat")?;
    let curved = fixture("sasaki-over-conformal")?;
    let f = is_flat(
        &flat.geometry.metric,
        &sample_points(&flat.geometry.chart, 6, 11)?,
        1e-6,
        &flat.fd,
    )?;
    let c = is_flat(
        &curved.geometry.metric,
        &sample_points(&curved.geometry.chart, 6, 12)?,
        1e-6,
        &curved.fd,
    )?;
    Ok((
        f.verdict == Flatness::Flat && c.verdict == Flatness::NotFlat && c.max_residual > 1e-2,
        format!(
            "flat base {:.1e}, conformal base {:.1e}",
            f.max_residual, c.max_residual
        ),
    ))
}

fn determinism_and_parser() -> Outcome {
    let overrides = Overrides {
        seed: Some(2024),
        points: Some(4),
        ..Overrides::default()
    };
    let mut identical = 0;
    let mut total = 0;
    for name in fixture_names() {
        let a = run_scenario(&load_fixture(name, &overrides)?).canonical_json();
        let b = run_scenario(&load_fixture(name, &overrides)?).canonical_json();
        total += 1;
        identical += usize::from(a == b);
    }
    let mut runner = TestRunner::new(Config {
        cases: 500,
        failure_persistence: None,
        ..Config::default()
    });
    let parser = runner.run(&support::tree(), |e| {
        if support::depth(&e) > 6 {
            return Err(TestCaseError::fail("tree too deep"));
        }
        let printed = e.to_string();
        match parse_expr(&printed) {
            Ok(back) if back == e => Ok(()),
            Ok(back) => Err(TestCaseError::fail(format!("{printed} reparsed as {back}"))),
            Err(err) => Err(TestCaseError::fail(format!("{printed}: {err}"))),
        }
    });
    let parser_msg = match &parser {
        Ok(()) => "500 round-trips".to_string(),
        Err(e) => format!("round-trip failed: {e}"),
    };
    Ok((
        identical == total && parser.is_ok(),
        format!("{identical}/{total} reports identical, {parser_msg}"),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("algebra suite", algebra_suite),
        ("classification ladder", classification_ladder),
        ("integrability tensor on horizontals", integrability_witness),
        ("descent of the 1-forms", descent_witness),
        ("product structure equivalence", equivalence_witness),
        ("lifted connection consistency", sasaki_consistency),
        ("Kähler iff flat on the tangent bundle", kahler_iff_flat),
        ("flatness transfer", flatness_transfer),
        ("determinism and parser round-trip", determinism_and_parser),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {}: {} {name}: {detail} [{:.1}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
