//! Scenario files: configuration, the check registry, the runner and reports.

pub mod checks;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod report;

use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde_json::json;

pub use checks::{lookup, CheckDef, CHECKS};
pub use config::{load_scenario, load_scenario_with, parse_scenario, Overrides, ScenarioConfig};
pub use error::ScenarioError;
pub use fixtures::{fixture, fixture_names};
pub use report::{CheckRecord, Environment, ErrorRecord, Verdict, VerificationReport};

use config::{CheckConfig, Expectation};

/// Loads a shipped fixture by name.
pub fn load_fixture(name: &str, overrides: &Overrides) -> Result<ScenarioConfig, ScenarioError> {
    let text = fixture(name).ok_or_else(|| {
        ScenarioError::validation("scenario", format!("no shipped fixture `{name}`"))
    })?;
    parse_scenario(text, overrides)
}

fn run_check(cfg: &ScenarioConfig, check: &CheckConfig) -> CheckRecord {
    let def = lookup(&check.name).expect("validated check name");
    let tol = check.tol.unwrap_or(def.default_tol);
    let anchor = check
        .anchor
        .clone()
        .unwrap_or_else(|| def.anchor.to_string());
    let evaluated = checks::points_for(cfg, check).and_then(|pts| {
        (def.run)(&checks::Ctx {
            cfg,
            check,
            tol,
            pts,
        })
    });
    let (residual, outcome, details, error) = match evaluated {
        Ok(o) => (
            Some(o.residual),
            if o.ok { Verdict::Pass } else { Verdict::Fail },
            o.details,
            None,
        ),
        Err(e) => (
            None,
            Verdict::Error,
            json!({}),
            Some(ErrorRecord {
                name: e.name().to_string(),
                message: e.to_string(),
            }),
        ),
    };
    let verdict = match (check.expect, outcome) {
        (Expectation::Pass, Verdict::Pass) | (Expectation::Fail, Verdict::Fail) => Verdict::Pass,
        (Expectation::Error, Verdict::Error) => {
            let matches = match (&check.error, &error) {
                (Some(want), Some(got)) => *want == got.name,
                _ => true,
            };
            if matches {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        }
        (Expectation::Error, _) => Verdict::Fail,
        (_, Verdict::Error) => Verdict::Error,
        _ => Verdict::Fail,
    };
    CheckRecord {
        name: check.name.clone(),
        anchor,
        residual,
        tolerance: tol,
        expect: check.expect,
        outcome,
        verdict,
        details,
        error,
    }
}

/// Runs every requested check; records follow the configured order.
pub fn run_scenario(cfg: &ScenarioConfig) -> VerificationReport {
    let records: Vec<CheckRecord> = cfg.checks.par_iter().map(|c| run_check(cfg, c)).collect();
    let overall = if records.iter().all(|r| r.verdict == Verdict::Pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    VerificationReport {
        scenario: cfg.name.clone(),
        anchor: cfg.anchor.clone(),
        environment: Environment {
            seed: cfg.sample.seed,
            step: cfg.fd.step(),
            points: cfg.sample.count,
            dim: cfg.dim(),
        },
        records,
        overall,
        generated_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    }
}

/// Anchor, formula and default tolerance of a named check.
pub fn explain(name: &str) -> Option<String> {
    lookup(name).map(|d| {
        format!(
            "{}\n  anchor:    {}\n  formula:   {}\n  tolerance: {:e}",
            d.name, d.anchor, d.formula, d.default_tol
        )
    })
}
