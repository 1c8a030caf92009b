use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::trial::{build_channels, pilot_for, INIT_PHASES};
use crate::airlink::{run_initialization, NoiseSource};
use crate::bisect::{run_bisection, run_three_phase, BisectionOutcome};
use crate::detect::{Case, CaseVerdict, Detector, Evidence, Hypothesis, ProbePhases};
use crate::error::Result;
use crate::model::{Axis, DefectRect, FailureScene, GridDims};
use crate::sortpm::{run_sortpm_generic, ScriptedResponder, SortPmOutcome, SortPmParams};

const EXAMPLE1_TOL: f64 = 1e-12;
/// Published posteriors carry four decimals.
const EXAMPLE3_TOL: f64 = 5e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReproReport {
    pub checks: Vec<Check>,
}

impl ReproReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    fn vector(&mut self, name: String, got: &[f64], want: &[f64], tol: f64) {
        let ok = got.len() == want.len() && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= tol);
        self.check(name, ok, format!("got {got:.4?}, expected {want:.4?}"));
    }
}

impl fmt::Display for ReproReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

fn sortpm_trace(report: &mut ReproReport, label: &str, out: &SortPmOutcome, queries: &[&[usize]], posts: &[&[f64]], tol: f64) {
    report.check(
        format!("{label} rounds"),
        out.rounds == queries.len(),
        format!("{} rounds", out.rounds),
    );
    for (k, rec) in out.trace.iter().enumerate() {
        if let Some(q) = queries.get(k) {
            report.check(
                format!("{label} round {} query", k + 1),
                rec.query.members() == *q,
                format!("got {:?}, expected {q:?}", rec.query.members()),
            );
        }
        if let Some(p) = posts.get(k) {
            report.vector(format!("{label} round {} posterior", k + 1), &rec.posterior, p, tol);
        }
    }
}

/// Two-number guessing game with one lie.
pub fn example_one(report: &mut ReproReport) -> Result<()> {
    let mut responder = ScriptedResponder::new(vec![false, false, true, true]);
    let params = SortPmParams {
        q: 0.1,
        epsilon: 0.05,
        k_max: 10,
    };
    let out = run_sortpm_generic(&mut responder, 2, params)?;
    sortpm_trace(
        report,
        "example 1",
        &out,
        &[&[1], &[2], &[1], &[1]],
        &[&[0.1, 0.9], &[0.5, 0.5], &[0.9, 0.1], &[81.0 / 82.0, 1.0 / 82.0]],
        EXAMPLE1_TOL,
    );
    report.check(
        "example 1 estimate",
        out.converged && out.estimate == 1,
        format!("estimate {} converged {}", out.estimate, out.converged),
    );
    Ok(())
}

/// Lower column boundary of a 4x4 surface found by sortPM after a false
/// first answer.
pub fn example_three(report: &mut ReproReport) -> Result<()> {
    let mut responder = ScriptedResponder::new(vec![false, false, false, true, false, true]);
    let params = SortPmParams {
        q: 0.1,
        epsilon: 0.1,
        k_max: 20,
    };
    let out = run_sortpm_generic(&mut responder, 4, params)?;
    let (a, b) = (1.0 / 12.0, 0.75);
    sortpm_trace(
        report,
        "example 3",
        &out,
        &[&[1, 2], &[3], &[4], &[1, 2], &[1], &[2]],
        &[
            &[0.05, 0.05, 0.45, 0.45],
            &[0.0833, 0.0833, 0.0833, 0.75],
            &[0.25; 4],
            &[0.45, 0.45, 0.05, 0.05],
            &[a, b, a, a],
            &[0.0119, 0.9643, 0.0119, 0.0119],
        ],
        EXAMPLE3_TOL,
    );
    report.check(
        "example 3 estimate",
        out.converged && out.estimate == 2,
        format!("n_h,min = {} converged {}", out.estimate, out.converged),
    );

    // Bisection cannot undo a false Case 2 at the first cut.
    let dims = GridDims::new(4, 4)?;
    let mut first = true;
    let out = run_bisection(dims, Axis::Horizontal, |bq, _| {
        if std::mem::take(&mut first) {
            Ok(scripted_verdict(Case::Two))
        } else {
            Ok(exact_verdict(2, 3, bq.cut))
        }
    })?;
    report.check(
        "example 3 bisection after false case 2",
        out.n_min != 2 && out.trace[0].cut == 2.5,
        format!("(n_min, n_max) = ({}, {})", out.n_min, out.n_max),
    );
    Ok(())
}

/// Three-phase bisection on a 4x4 surface with defect columns {2, 3}, probed
/// over the air without noise.
pub fn example_two(report: &mut ReproReport) -> Result<()> {
    let cfg = ExperimentConfig {
        n_h: 4,
        n_v: 4,
        defect_h: 2,
        defect_v: 2,
        noiseless: true,
        ..Default::default()
    };
    let dims = cfg.dims()?;
    let scene = FailureScene::sample(dims, DefectRect::new(dims, 2, 3, 2, 3)?, &mut ChaCha8Rng::seed_from_u64(2))?;
    let ch = build_channels(&cfg, 4)?;
    let pilot = pilot_for(16.0);
    let mut noise = NoiseSource::seeded(0);
    let init = run_initialization(&scene, &ch, (pilot, pilot), INIT_PHASES, &mut noise)?;
    let detector = Detector::new(cfg.alpha, 4, ProbePhases::default())?;
    for axis in Axis::BOTH {
        let out = run_three_phase(axis, &scene, &init, &ch, &detector, pilot, &mut noise)?;
        bisection_trace(report, axis, &out);
    }
    Ok(())
}

fn bisection_trace(report: &mut ReproReport, axis: Axis, out: &BisectionOutcome) {
    let label = match axis {
        Axis::Horizontal => "example 2 horizontal",
        Axis::Vertical => "example 2 vertical",
    };
    let expected = [
        (2.5, Case::Three, [1, 2, 3, 4]),
        (1.5, Case::Two, [2, 2, 3, 4]),
        (3.5, Case::One, [2, 2, 3, 3]),
    ];
    report.check(
        format!("{label} iterations"),
        out.slots == 3 && out.trace.len() == 3,
        format!("{} slots", out.slots),
    );
    for (t, (step, (cut, case, bounds))) in out.trace.iter().zip(expected).enumerate() {
        let s = step.after;
        let got = [s.lb_min, s.ub_min, s.lb_max, s.ub_max];
        report.check(
            format!("{label} slot {}", t + 1),
            step.cut == cut && step.case == case && got == bounds,
            format!("cut {} {:?} bounds {got:?}", step.cut, step.case),
        );
    }
    report.check(
        format!("{label} estimate"),
        (out.n_min, out.n_max) == (2, 3),
        format!("({}, {})", out.n_min, out.n_max),
    );
}

fn evidence(hypothesis: Hypothesis, accepted: bool) -> Evidence {
    Evidence {
        hypothesis,
        residual_energy: if accepted { 0.0 } else { 1.0 },
        threshold_energy: 0.5,
        loglik: f64::NAN,
        log_threshold: f64::NAN,
    }
}

/// Cut verdict carrying the given label with matching test outcomes.
pub fn scripted_verdict(case: Case) -> CaseVerdict {
    let (c1, c2) = match case {
        Case::One => (true, false),
        Case::Two => (false, true),
        _ => (false, false),
    };
    CaseVerdict {
        label: case,
        evidence: vec![evidence(Hypothesis::RightNormal, c1), evidence(Hypothesis::LeftNormal, c2)],
    }
}

/// Verdict an error-free detector returns for defects spanning `[lo, hi]`.
pub fn exact_verdict(lo: usize, hi: usize, cut: f64) -> CaseVerdict {
    if (hi as f64) < cut {
        scripted_verdict(Case::One)
    } else if (lo as f64) > cut {
        scripted_verdict(Case::Two)
    } else {
        scripted_verdict(Case::Three)
    }
}

/// Runs all worked examples and collects every intermediate check.
pub fn repro_examples() -> Result<ReproReport> {
    let mut report = ReproReport::default();
    example_one(&mut report)?;
    example_two(&mut report)?;
    example_three(&mut report)?;
    Ok(report)
}
