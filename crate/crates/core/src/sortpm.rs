//! Sorted posterior matching for the noisy twenty-questions problem, and its
//! over-the-air specialization that estimates one defect-rectangle boundary.
//!
//! Candidates are 1-based integers `1..=D`. Each round asks whether the
//! hidden target lies in the top-posterior prefix whose mass is closest to
//! one half, then applies the Bayes update for a responder that lies with
//! probability `q`.

use num_complex::Complex64;

use crate::airlink::{InitEstimates, NoiseSource};
use crate::channel::ChannelSet;
use crate::detect::{answer_yk, Answer, Detector, OuterSide, RegionQuery};
use crate::error::{Error, Result};
use crate::model::{Boundary, FailureScene};

const NORMALIZATION_TOL: f64 = 1e-12;

/// Posterior over the candidates after `round` answers.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    probs: Vec<f64>,
    round: usize,
}

impl PosteriorState {
    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Parameter("no candidates".into()));
        }
        Ok(Self {
            probs: vec![1.0 / d as f64; d],
            round: 0,
        })
    }

    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Parameter("no candidates".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Parameter("negative or non-finite probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("probabilities sum to {total}")));
        }
        Ok(Self { probs, round: 0 })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn sorted(&self) -> SortedView {
        sorted_view(self)
    }
}

/// Candidates ordered by decreasing posterior, ties broken by ascending index.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedView {
    /// 1-based candidate at each rank.
    pub order: Vec<usize>,
    pub sorted_probs: Vec<f64>,
}

impl SortedView {
    /// Most likely candidate.
    pub fn top(&self) -> usize {
        self.order[0]
    }

    pub fn top_prob(&self) -> f64 {
        self.sorted_probs[0]
    }
}

pub fn sorted_view(state: &PosteriorState) -> SortedView {
    let mut idx: Vec<usize> = (0..state.probs.len()).collect();
    // Stable sort keeps ascending index order among equal probabilities.
    idx.sort_by(|&a, &b| state.probs[b].total_cmp(&state.probs[a]));
    SortedView {
        sorted_probs: idx.iter().map(|&i| state.probs[i]).collect(),
        order: idx.into_iter().map(|i| i + 1).collect(),
    }
}

/// A query set of 1-based candidates, stored in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySet {
    members: Vec<usize>,
}

impl QuerySet {
    pub fn new(d: usize, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(Error::InvalidQuery("empty query set".into()));
        }
        if members.iter().any(|&m| m == 0 || m > d) {
            return Err(Error::InvalidQuery(format!("query member outside 1..={d}")));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, candidate: usize) -> bool {
        self.members.binary_search(&candidate).is_ok()
    }

    /// Members form a run of consecutive integers.
    pub fn contiguous(&self) -> bool {
        self.members.windows(2).all(|w| w[1] == w[0] + 1)
    }
}

fn check_lie_probability(q: f64) -> Result<()> {
    if q > 0.0 && q < 0.5 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("lie probability {q} outside (0, 0.5)")))
    }
}

/// Bayes update after answer `answer` to `query` from a responder lying with
/// probability `q`.
pub fn posterior_update(state: &PosteriorState, query: &QuerySet, answer: bool, q: f64) -> Result<PosteriorState> {
    check_lie_probability(q)?;
    if query.members.last().is_some_and(|&m| m > state.len()) {
        return Err(Error::InvalidQuery("query member beyond candidate count".into()));
    }
    let (w_in, w_out) = if answer { (1.0 - q, q) } else { (q, 1.0 - q) };
    let mut probs: Vec<f64> = state
        .probs
        .iter()
        .enumerate()
        .map(|(i, p)| p * if query.contains(i + 1) { w_in } else { w_out })
        .collect();
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < NORMALIZATION_TOL);
    Ok(PosteriorState {
        probs,
        round: state.round + 1,
    })
}

/// Index `l*` (1-based) minimizing `|Σ_{d≤l} π↓_d − 1/2|`, smallest on ties.
pub fn half_mass_prefix(sorted_probs: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 1);
    let mut mass = 0.0;
    for (l, p) in sorted_probs.iter().enumerate() {
        mass += p;
        let gap = (mass - 0.5).abs();
        if gap < best.0 {
            best = (gap, l + 1);
        }
    }
    best.1
}

/// Top-posterior prefix whose mass is closest to one half.
pub fn design_query(state: &PosteriorState) -> QuerySet {
    let view = sorted_view(state);
    let l = half_mass_prefix(&view.sorted_probs);
    let mut members = view.order[..l].to_vec();
    members.sort_unstable();
    QuerySet { members }
}

/// Anything that answers membership questions about a hidden candidate.
pub trait Responder {
    fn respond(&mut self, query: &QuerySet) -> Result<Answer>;
}

impl<F: FnMut(&QuerySet) -> bool> Responder for F {
    fn respond(&mut self, query: &QuerySet) -> Result<Answer> {
        Ok(Answer {
            bit: self(query),
            slots: 1,
        })
    }
}

/// Replays a fixed answer sequence; errors once it runs out.
#[derive(Debug, Clone)]
pub struct ScriptedResponder {
    answers: Vec<bool>,
    next: usize,
}

impl ScriptedResponder {
    pub fn new(answers: Vec<bool>) -> Self {
        Self { answers, next: 0 }
    }
}

impl Responder for ScriptedResponder {
    fn respond(&mut self, _query: &QuerySet) -> Result<Answer> {
        let bit = *self
            .answers
            .get(self.next)
            .ok_or_else(|| Error::Parameter("scripted answers exhausted".into()))?;
        self.next += 1;
        Ok(Answer { bit, slots: 1 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SortPmParams {
    /// Lie probability assumed by the posterior update.
    pub q: f64,
    /// Stop once the top posterior reaches `1 - epsilon`.
    pub epsilon: f64,
    pub k_max: usize,
}

impl Default for SortPmParams {
    fn default() -> Self {
        Self {
            q: 0.1,
            epsilon: 0.1,
            k_max: 200,
        }
    }
}

impl SortPmParams {
    pub fn validate(&self) -> Result<()> {
        check_lie_probability(self.q)?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Parameter(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        if self.k_max == 0 {
            return Err(Error::Parameter("k_max must be positive".into()));
        }
        Ok(())
    }
}

/// How the designed query is shaped before it is asked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryPolicy {
    /// Ask the half-mass prefix as designed.
    HalfMass,
    /// Ask the half-mass prefix if it is a run of consecutive candidates,
    /// otherwise ask only the current top candidate.
    ContiguousOrTop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub query: QuerySet,
    pub answer: bool,
    pub slots: u32,
    pub posterior: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortPmOutcome {
    /// Final top candidate.
    pub estimate: usize,
    pub rounds: usize,
    /// Measurement slots consumed by the answers (initialization excluded).
    pub slots: u32,
    pub converged: bool,
    /// Rounds where a non-contiguous design fell back to the top candidate.
    pub fallbacks: usize,
    pub trace: Vec<RoundRecord>,
    pub final_state: PosteriorState,
}

/// Query for the next round under `policy`; the flag reports a fallback.
pub fn next_query(state: &PosteriorState, policy: QueryPolicy) -> (QuerySet, bool) {
    let query = design_query(state);
    if policy == QueryPolicy::ContiguousOrTop && !query.contiguous() {
        let top = QuerySet {
            members: vec![sorted_view(state).top()],
        };
        (top, true)
    } else {
        (query, false)
    }
}

/// Runs sorted posterior matching against `responder` over `d` candidates.
pub fn run_sortpm<R: Responder + ?Sized>(
    responder: &mut R,
    d: usize,
    params: SortPmParams,
    policy: QueryPolicy,
) -> Result<SortPmOutcome> {
    params.validate()?;
    let mut state = PosteriorState::uniform(d)?;
    let mut trace = Vec::new();
    let mut slots = 0;
    let mut fallbacks = 0;
    let mut converged = sorted_view(&state).top_prob() >= 1.0 - params.epsilon;
    while !converged && state.round < params.k_max {
        let (query, fell_back) = next_query(&state, policy);
        fallbacks += usize::from(fell_back);
        let answer = responder.respond(&query)?;
        slots += answer.slots;
        state = posterior_update(&state, &query, answer.bit, params.q)?;
        converged = sorted_view(&state).top_prob() >= 1.0 - params.epsilon;
        trace.push(RoundRecord {
            query,
            answer: answer.bit,
            slots: answer.slots,
            posterior: state.probs.clone(),
        });
    }
    Ok(SortPmOutcome {
        estimate: sorted_view(&state).top(),
        rounds: state.round,
        slots,
        converged,
        fallbacks,
        trace,
        final_state: state,
    })
}

/// Plain sorted posterior matching with unrestricted query sets.
pub fn run_sortpm_generic<R: Responder + ?Sized>(responder: &mut R, d: usize, params: SortPmParams) -> Result<SortPmOutcome> {
    run_sortpm(responder, d, params, QueryPolicy::HalfMass)
}

/// Maps candidate indices of one boundary onto grid lines.
///
/// Lower boundaries use candidate `d` ↔ line `d`. Upper boundaries are
/// mirrored, candidate `d` ↔ line `N + 1 - d`, so that the same
/// "lines before the query are clean" test applies from the far edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateMap {
    pub boundary: Boundary,
    pub extent: usize,
}

impl CandidateMap {
    pub fn line(&self, candidate: usize) -> usize {
        if self.boundary.is_upper() {
            self.extent + 1 - candidate
        } else {
            candidate
        }
    }

    pub fn outer_side(&self) -> OuterSide {
        if self.boundary.is_upper() {
            OuterSide::After
        } else {
            OuterSide::Before
        }
    }
}

/// Answers boundary-membership questions with over-the-air measurements.
pub struct AirResponder<'a> {
    pub map: CandidateMap,
    pub detector: &'a Detector,
    pub scene: &'a FailureScene,
    pub init: &'a InitEstimates,
    pub ch: &'a ChannelSet,
    pub pilot: Complex64,
    pub noise: &'a mut NoiseSource,
    slots_used: usize,
}

impl<'a> AirResponder<'a> {
    pub fn new(
        map: CandidateMap,
        detector: &'a Detector,
        scene: &'a FailureScene,
        init: &'a InitEstimates,
        ch: &'a ChannelSet,
        pilot: Complex64,
        noise: &'a mut NoiseSource,
    ) -> Self {
        Self {
            map,
            detector,
            scene,
            init,
            ch,
            pilot,
            noise,
            slots_used: 0,
        }
    }
}

impl Responder for AirResponder<'_> {
    fn respond(&mut self, query: &QuerySet) -> Result<Answer> {
        let lines = query.members().iter().map(|&c| self.map.line(c)).collect();
        let region = RegionQuery::new(self.scene.dims(), self.map.boundary.axis(), lines)?;
        let answer = answer_yk(
            self.detector,
            &region,
            self.map.outer_side(),
            self.scene,
            self.init,
            self.ch,
            self.pilot,
            self.slots_used + 1,
            self.noise,
        )?;
        self.slots_used += answer.slots as usize;
        Ok(answer)
    }
}

/// Estimates one rectangle boundary with sortPM driven by over-the-air answers.
/// The returned estimate is a grid line index.
#[allow(clippy::too_many_arguments)]
pub fn estimate_boundary_sortpm(
    target: Boundary,
    scene: &FailureScene,
    init: &InitEstimates,
    ch: &ChannelSet,
    detector: &Detector,
    params: SortPmParams,
    pilot: Complex64,
    noise: &mut NoiseSource,
) -> Result<SortPmOutcome> {
    let extent = scene.dims().extent(target.axis());
    let map = CandidateMap {
        boundary: target,
        extent,
    };
    let mut responder = AirResponder::new(map, detector, scene, init, ch, pilot, noise);
    let mut outcome = run_sortpm(&mut responder, extent, params, QueryPolicy::ContiguousOrTop)?;
    outcome.estimate = map.line(outcome.estimate);
    Ok(outcome)
}
