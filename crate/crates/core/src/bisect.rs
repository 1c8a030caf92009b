//! Three-phase bisection that locates both boundaries of the defect rectangle
//! along one axis with one cut probe per slot.
//!
//! Phase I narrows a shared interval until a cut splits the defects. Phase II
//! then bisects the lower boundary and Phase III the upper one.

use num_complex::Complex64;

use crate::airlink::{InitEstimates, NoiseSource};
use crate::channel::ChannelSet;
use crate::detect::{BoundaryQuery, Case, CaseVerdict, Detector, Hypothesis};
use crate::error::{Error, Result};
use crate::model::{Axis, FailureScene, GridDims};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    I,
    II,
    III,
    Done,
}

/// Bracket on `n_min ∈ [lb_min, ub_min]` and `n_max ∈ [lb_max, ub_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BisectionState {
    pub lb_min: usize,
    pub ub_min: usize,
    pub lb_max: usize,
    pub ub_max: usize,
    pub phase: Phase,
    pub slots_used: u32,
}

impl BisectionState {
    /// Fresh state over lines `1..=n`.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("empty axis".into()));
        }
        let mut s = Self {
            lb_min: 1,
            ub_min: n,
            lb_max: 1,
            ub_max: n,
            phase: Phase::I,
            slots_used: 0,
        };
        s.settle();
        Ok(s)
    }

    /// Half-integer cut for the current phase, `None` once done.
    pub fn cut(&self) -> Option<f64> {
        let (lb, ub) = match self.phase {
            Phase::I | Phase::II => (self.lb_min, self.ub_min),
            Phase::III => (self.lb_max, self.ub_max),
            Phase::Done => return None,
        };
        let md = (lb + ub) as f64 / 2.0;
        Some(if md.fract() == 0.0 { md + 0.5 } else { md })
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    /// `(n_min, n_max)` once both brackets have closed.
    pub fn estimate(&self) -> Option<(usize, usize)> {
        self.is_done().then_some((self.lb_min, self.lb_max))
    }

    // Skips phases whose bracket is already closed.
    fn settle(&mut self) {
        loop {
            let next = match self.phase {
                Phase::I if self.lb_min == self.ub_min => {
                    self.lb_max = self.lb_min;
                    self.ub_max = self.ub_min;
                    Phase::Done
                }
                Phase::II if self.lb_min == self.ub_min => Phase::III,
                Phase::III if self.lb_max == self.ub_max => Phase::Done,
                _ => return,
            };
            self.phase = next;
        }
    }
}

/// Maps a cut verdict onto the cases admissible in `phase`.
///
/// Phase II cannot see Case 1 (the defects reach right of the cut) and
/// Phase III cannot see Case 2. An inadmissible label is re-decided with the
/// remaining admissible test; Case 3 if that test also rejects.
pub fn admissible_case(phase: Phase, verdict: &CaseVerdict) -> Case {
    match (phase, verdict.label) {
        (Phase::II, Case::One) => {
            if verdict.accepts(Hypothesis::LeftNormal) {
                Case::Two
            } else {
                Case::Three
            }
        }
        (Phase::III, Case::Two) => {
            if verdict.accepts(Hypothesis::RightNormal) {
                Case::One
            } else {
                Case::Three
            }
        }
        (_, label) => label,
    }
}

/// Applies one verdict for the cut `state.cut()`.
pub fn bisection_step(state: &BisectionState, verdict: &CaseVerdict) -> Result<BisectionState> {
    let cut = state
        .cut()
        .ok_or_else(|| Error::Parameter("bisection already finished".into()))?;
    let (lo, hi) = (cut.floor() as usize, cut.ceil() as usize);
    let mut s = *state;
    s.slots_used += 1;
    match (s.phase, admissible_case(s.phase, verdict)) {
        (Phase::I, Case::One) => {
            s.ub_min = lo;
            s.ub_max = lo;
        }
        (Phase::I, Case::Two) => {
            s.lb_min = hi;
            s.lb_max = hi;
        }
        (Phase::I, Case::Three) => {
            s.ub_min = lo;
            s.lb_max = hi;
            s.phase = Phase::II;
        }
        (Phase::II, Case::Two) => s.lb_min = hi,
        (Phase::II, Case::Three) => s.ub_min = lo,
        (Phase::III, Case::One) => s.ub_max = lo,
        (Phase::III, Case::Three) => s.lb_max = hi,
        (_, label) => {
            return Err(Error::InvalidQuery(format!("{label:?} verdict for a cut probe")));
        }
    }
    s.settle();
    Ok(s)
}

/// One probe of the bisection and the state it produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionStep {
    pub cut: f64,
    pub case: Case,
    pub after: BisectionState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionOutcome {
    pub n_min: usize,
    pub n_max: usize,
    pub slots: u32,
    pub trace: Vec<BisectionStep>,
}

/// Drives the bisection with any cut oracle.
pub fn run_bisection<F>(dims: GridDims, axis: Axis, mut oracle: F) -> Result<BisectionOutcome>
where
    F: FnMut(&BoundaryQuery, usize) -> Result<CaseVerdict>,
{
    let mut state = BisectionState::new(dims.extent(axis))?;
    let mut trace = Vec::new();
    while let Some(cut) = state.cut() {
        let query = BoundaryQuery::new(dims, axis, cut)?;
        let verdict = oracle(&query, state.slots_used as usize + 1)?;
        let case = admissible_case(state.phase, &verdict);
        state = bisection_step(&state, &verdict)?;
        trace.push(BisectionStep { cut, case, after: state });
    }
    let (n_min, n_max) = state.estimate().expect("loop ends when done");
    Ok(BisectionOutcome {
        n_min,
        n_max,
        slots: state.slots_used,
        trace,
    })
}

/// Three-phase bisection with over-the-air cut probes.
#[allow(clippy::too_many_arguments)]
pub fn run_three_phase(
    axis: Axis,
    scene: &FailureScene,
    init: &InitEstimates,
    ch: &ChannelSet,
    detector: &Detector,
    pilot: Complex64,
    noise: &mut NoiseSource,
) -> Result<BisectionOutcome> {
    run_bisection(scene.dims(), axis, |bq, slot| {
        detector.probe_boundary(bq, scene, init, ch, pilot, slot, noise)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::Evidence;
    use proptest::prelude::*;

    fn ev(hypothesis: Hypothesis, accepted: bool) -> Evidence {
        Evidence {
            hypothesis,
            residual_energy: if accepted { 0.0 } else { 2.0 },
            threshold_energy: 1.0,
            loglik: f64::NAN,
            log_threshold: f64::NAN,
        }
    }

    // Verdict an exact detector would give for true bounds `[lo, hi]`.
    fn truth(lo: usize, hi: usize, cut: f64) -> CaseVerdict {
        let c1 = (hi as f64) < cut;
        let c2 = (lo as f64) > cut;
        let label = match (c1, c2) {
            (true, _) => Case::One,
            (_, true) => Case::Two,
            _ => Case::Three,
        };
        CaseVerdict {
            label,
            evidence: vec![ev(Hypothesis::RightNormal, c1), ev(Hypothesis::LeftNormal, c2)],
        }
    }

    fn exact(n: usize, lo: usize, hi: usize) -> BisectionOutcome {
        let dims = GridDims::new(n, 1).unwrap();
        run_bisection(dims, Axis::Horizontal, |bq, _| Ok(truth(lo, hi, bq.cut))).unwrap()
    }

    #[test]
    fn cut_is_shifted_half_integer_midpoint() {
        let mut s = BisectionState::new(4).unwrap();
        assert_eq!(s.cut(), Some(2.5));
        s.ub_min = 3;
        assert_eq!(s.cut(), Some(2.5));
        s.ub_min = 2;
        assert_eq!(s.cut(), Some(1.5));
    }

    #[test]
    fn example_two_trajectory() {
        let out = exact(4, 2, 3);
        assert_eq!((out.n_min, out.n_max, out.slots), (2, 3, 3));
        let steps: Vec<(f64, Case, [usize; 4])> = out
            .trace
            .iter()
            .map(|s| (s.cut, s.case, [s.after.lb_min, s.after.ub_min, s.after.lb_max, s.after.ub_max]))
            .collect();
        assert_eq!(
            steps,
            vec![
                (2.5, Case::Three, [1, 2, 3, 4]),
                (1.5, Case::Two, [2, 2, 3, 4]),
                (3.5, Case::One, [2, 2, 3, 3]),
            ]
        );
    }

    #[test]
    fn single_line_axis_needs_no_probe() {
        let out = exact(1, 1, 1);
        assert_eq!((out.n_min, out.n_max, out.slots), (1, 1, 0));
    }

    #[test]
    fn single_column_on_32() {
        for c in 1..=32 {
            let out = exact(32, c, c);
            assert_eq!((out.n_min, out.n_max), (c, c));
            assert!(out.slots <= 10);
            // Phase I alone resolves a single line.
            assert!(out.trace.iter().all(|s| s.case != Case::Three));
        }
    }

    #[test]
    fn full_axis() {
        let out = exact(32, 1, 32);
        assert_eq!((out.n_min, out.n_max), (1, 32));
        assert!(out.slots <= 10);
    }

    #[test]
    fn inadmissible_labels_are_coerced() {
        let both = CaseVerdict {
            label: Case::One,
            evidence: vec![ev(Hypothesis::RightNormal, true), ev(Hypothesis::LeftNormal, true)],
        };
        assert_eq!(admissible_case(Phase::II, &both), Case::Two);
        let only_c1 = CaseVerdict {
            label: Case::One,
            evidence: vec![ev(Hypothesis::RightNormal, true), ev(Hypothesis::LeftNormal, false)],
        };
        assert_eq!(admissible_case(Phase::II, &only_c1), Case::Three);
        assert_eq!(admissible_case(Phase::III, &only_c1), Case::One);
        let only_c2 = CaseVerdict {
            label: Case::Two,
            evidence: vec![ev(Hypothesis::RightNormal, false), ev(Hypothesis::LeftNormal, true)],
        };
        assert_eq!(admissible_case(Phase::III, &only_c2), Case::Three);
        assert_eq!(admissible_case(Phase::I, &only_c2), Case::Two);
    }

    #[test]
    fn region_labels_are_rejected() {
        let s = BisectionState::new(8).unwrap();
        let v = CaseVerdict {
            label: Case::A,
            evidence: vec![],
        };
        assert!(matches!(bisection_step(&s, &v), Err(Error::InvalidQuery(_))));
    }

    proptest! {
        #[test]
        fn exact_verdicts_recover_bounds(log_n in 0u32..=5, a in 1usize..=32, b in 1usize..=32) {
            let n = 1usize << log_n;
            let (lo, hi) = ((a.min(b) - 1) % n + 1, (a.max(b) - 1) % n + 1);
            let (lo, hi) = (lo.min(hi), lo.max(hi));
            let out = exact(n, lo, hi);
            prop_assert_eq!((out.n_min, out.n_max), (lo, hi));
            prop_assert!(out.slots <= 2 * log_n);
        }

        #[test]
        fn brackets_shrink_monotonically(
            log_n in 1u32..=5,
            labels in proptest::collection::vec((0u8..3, any::<bool>(), any::<bool>()), 40),
        ) {
            // Arbitrary, possibly inconsistent verdicts still terminate with
            // nested brackets.
            let n = 1usize << log_n;
            let mut s = BisectionState::new(n).unwrap();
            let mut steps = 0;
            for (l, c1, c2) in labels {
                if s.is_done() {
                    break;
                }
                let label = [Case::One, Case::Two, Case::Three][l as usize];
                let v = CaseVerdict {
                    label,
                    evidence: vec![ev(Hypothesis::RightNormal, c1), ev(Hypothesis::LeftNormal, c2)],
                };
                let next = bisection_step(&s, &v).unwrap();
                prop_assert!(next.lb_min >= s.lb_min && next.ub_min <= s.ub_min);
                prop_assert!(next.lb_max >= s.lb_max && next.ub_max <= s.ub_max);
                prop_assert!(next.lb_min <= next.ub_min && next.lb_max <= next.ub_max);
                s = next;
                steps += 1;
            }
            prop_assert!(s.is_done());
            prop_assert!(steps <= 2 * log_n as usize);
        }
    }
}
