//! Hypothesis tests that turn one probing measurement into a region verdict.
//!
//! Every test compares the measurement against the noiseless model implied
//! by a hypothesis ("these elements are all normal") and the initialization
//! estimates. The hypothesis is accepted when the residual energy stays
//! below a chi-square quantile. Under a correct hypothesis the residual is
//! CN(0, σ_r² I) with σ_r² given by [`InitEstimates::residual_variance`],
//! so `2‖r‖²/σ_r²` is chi-square with `2M` degrees of freedom. Testing
//! `‖r‖² ≤ (σ_r²/2)·Q(2M, 1-α)` therefore fixes the false-reject rate at α,
//! and is equivalent to thresholding the Gaussian likelihood of the
//! measurement.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::airlink::{received_signal, InitEstimates, Measurement, NoiseSource, SlotTag};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::model::{Axis, FailureScene, GridDims, PhaseAssignment};

/// Relative amplitude below which a residual counts as exact model agreement.
/// Only matters when the noise power is zero.
const NUMERICAL_FLOOR: f64 = 1e-9;

/// Default false-reject probability of every hypothesis test.
pub const DEFAULT_ALPHA: f64 = 1e-3;

/// Common phases applied to the two element groups of a probing slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePhases {
    /// Phase of the queried region, or of the side left of a cut.
    pub inside: f64,
    /// Phase of everything else, or of the side right of a cut.
    pub outside: f64,
}

impl Default for ProbePhases {
    fn default() -> Self {
        Self {
            inside: 0.0,
            outside: PI,
        }
    }
}

impl ProbePhases {
    fn validate(&self) -> Result<()> {
        if (Complex64::cis(self.inside) - Complex64::cis(self.outside)).norm() < 1e-12 {
            return Err(Error::SingularDesign);
        }
        Ok(())
    }
}

/// A set of full lines of the IRS: columns for `Horizontal`, rows for `Vertical`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionQuery {
    pub axis: Axis,
    lines: Vec<usize>,
}

impl RegionQuery {
    pub fn new(dims: GridDims, axis: Axis, mut lines: Vec<usize>) -> Result<Self> {
        lines.sort_unstable();
        lines.dedup();
        if lines.is_empty() {
            return Err(Error::InvalidQuery("region has no lines".into()));
        }
        let n = dims.extent(axis);
        if let Some(&bad) = lines.iter().find(|&&l| l == 0 || l > n) {
            return Err(Error::InvalidQuery(format!("line {bad} outside 1..={n}")));
        }
        Ok(Self { axis, lines })
    }

    /// Consecutive lines `lo..=hi`.
    pub fn span(dims: GridDims, axis: Axis, lo: usize, hi: usize) -> Result<Self> {
        Self::new(dims, axis, (lo..=hi).collect())
    }

    pub fn lines(&self) -> &[usize] {
        &self.lines
    }

    pub fn contains(&self, line: usize) -> bool {
        self.lines.binary_search(&line).is_ok()
    }

    pub fn is_consecutive(&self) -> bool {
        self.lines.windows(2).all(|w| w[1] == w[0] + 1)
    }
}

/// A cut between two adjacent lines, e.g. `2.5` between columns 2 and 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryQuery {
    pub axis: Axis,
    pub cut: f64,
}

impl BoundaryQuery {
    pub fn new(dims: GridDims, axis: Axis, cut: f64) -> Result<Self> {
        let n = dims.extent(axis) as f64;
        if !(cut > 1.0 && cut < n) || (cut - cut.floor() - 0.5).abs() > 1e-9 {
            return Err(Error::InvalidQuery(format!("cut {cut} is not a half-integer inside (1, {n})")));
        }
        Ok(Self { axis, cut })
    }

    /// Last line on the left of the cut.
    pub fn left_end(&self) -> usize {
        self.cut.floor() as usize
    }

    /// First line on the right of the cut.
    pub fn right_start(&self) -> usize {
        self.cut.ceil() as usize
    }
}

/// Hypotheses evaluated by the detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// The queried region holds no defective element.
    RegionNormal,
    /// Everything right of the cut is normal (defects lie left).
    RightNormal,
    /// Everything left of the cut is normal (defects lie right).
    LeftNormal,
}

/// Outcome label. `A`/`B` for region tests, `One`/`Two`/`Three` for cuts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// Region is all normal.
    A,
    /// Region contains a defect.
    B,
    /// Defects entirely left of the cut.
    One,
    /// Defects entirely right of the cut.
    Two,
    /// Defects on both sides of the cut.
    Three,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evidence {
    pub hypothesis: Hypothesis,
    /// `‖y - model‖²`.
    pub residual_energy: f64,
    /// Acceptance threshold on the residual energy.
    pub threshold_energy: f64,
    /// Gaussian log-likelihood `-M ln(πσ²) - ‖r‖²/σ²`; infinite when σ² = 0.
    pub loglik: f64,
    /// Log-likelihood threshold equivalent to `threshold_energy`.
    pub log_threshold: f64,
}

impl Evidence {
    pub fn accepted(&self) -> bool {
        self.residual_energy <= self.threshold_energy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseVerdict {
    pub label: Case,
    pub evidence: Vec<Evidence>,
}

impl CaseVerdict {
    pub fn evidence_for(&self, hypothesis: Hypothesis) -> Option<&Evidence> {
        self.evidence.iter().find(|e| e.hypothesis == hypothesis)
    }

    pub fn accepts(&self, hypothesis: Hypothesis) -> bool {
        self.evidence_for(hypothesis).is_some_and(Evidence::accepted)
    }
}

/// Threshold configuration shared by all tests of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    alpha: f64,
    antennas: usize,
    /// `Q(2M, 1-α)`.
    quantile: f64,
    pub phases: ProbePhases,
}

impl Detector {
    pub fn new(alpha: f64, antennas: usize, phases: ProbePhases) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Parameter(format!("false-reject rate {alpha} outside (0, 1)")));
        }
        if antennas == 0 {
            return Err(Error::Parameter("no receive antennas".into()));
        }
        phases.validate()?;
        let dist = ChiSquared::new(2.0 * antennas as f64).map_err(|e| Error::Parameter(e.to_string()))?;
        Ok(Self {
            alpha,
            antennas,
            quantile: dist.inverse_cdf(1.0 - alpha),
            phases,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Upper `α` quantile of chi-square with `2M` degrees of freedom.
    pub fn chi_square_quantile(&self) -> f64 {
        self.quantile
    }

    fn evidence(
        &self,
        hypothesis: Hypothesis,
        residual_energy: f64,
        meas: &Measurement,
        init: &InitEstimates,
        ch: &ChannelSet,
        complement_phase: f64,
    ) -> Evidence {
        let sigma2 = ch.noise_power();
        let var = init.residual_variance(sigma2, meas.pilot, complement_phase);
        let floor = (NUMERICAL_FLOOR * meas.pilot.norm() * ch.amplitude_scale()).powi(2);
        let threshold_energy = 0.5 * var * self.quantile + floor;
        let m = self.antennas as f64;
        let (loglik, log_threshold) = if sigma2 > 0.0 {
            let norm = -m * (PI * sigma2).ln();
            (norm - residual_energy / sigma2, norm - threshold_energy / sigma2)
        } else if residual_energy <= threshold_energy {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        };
        Evidence {
            hypothesis,
            residual_energy,
            threshold_energy,
            loglik,
            log_threshold,
        }
    }

    /// Case A / Case B decision for a region probed with `self.phases`.
    pub fn classify_region(
        &self,
        meas: &Measurement,
        init: &InitEstimates,
        query: &RegionQuery,
        ch: &ChannelSet,
    ) -> Result<CaseVerdict> {
        let energy = region_residual_energy(meas, init, query, ch, self.phases)?;
        let ev = self.evidence(Hypothesis::RegionNormal, energy, meas, init, ch, self.phases.outside);
        let label = if ev.accepted() { Case::A } else { Case::B };
        Ok(CaseVerdict {
            label,
            evidence: vec![ev],
        })
    }

    /// Case 1 / 2 / 3 decision for a cut probed with `self.phases`
    /// (`inside` on the left, `outside` on the right).
    pub fn classify_boundary(
        &self,
        meas: &Measurement,
        init: &InitEstimates,
        bq: &BoundaryQuery,
        ch: &ChannelSet,
    ) -> Result<CaseVerdict> {
        let p = self.phases;
        let right_normal = boundary_residual_energy(meas, init, bq, ch, p, Hypothesis::RightNormal)?;
        let left_normal = boundary_residual_energy(meas, init, bq, ch, p, Hypothesis::LeftNormal)?;
        let c1 = self.evidence(Hypothesis::RightNormal, right_normal, meas, init, ch, p.inside);
        let c2 = self.evidence(Hypothesis::LeftNormal, left_normal, meas, init, ch, p.outside);
        let label = match (c1.accepted(), c2.accepted()) {
            (true, false) => Case::One,
            (false, true) => Case::Two,
            (false, false) => Case::Three,
            // Both accepted: keep the better-fitting hypothesis.
            (true, true) => {
                if prefer(&c1, &c2) {
                    Case::One
                } else {
                    Case::Two
                }
            }
        };
        Ok(CaseVerdict {
            label,
            evidence: vec![c1, c2],
        })
    }

    /// Probes the region and classifies it.
    #[allow(clippy::too_many_arguments)]
    pub fn probe_region(
        &self,
        query: &RegionQuery,
        scene: &FailureScene,
        init: &InitEstimates,
        ch: &ChannelSet,
        pilot: Complex64,
        slot: usize,
        noise: &mut NoiseSource,
    ) -> Result<CaseVerdict> {
        let meas = measure_region(query, scene, ch, self.phases, pilot, slot, noise)?;
        self.classify_region(&meas, init, query, ch)
    }

    /// Probes a cut and classifies it.
    #[allow(clippy::too_many_arguments)]
    pub fn probe_boundary(
        &self,
        bq: &BoundaryQuery,
        scene: &FailureScene,
        init: &InitEstimates,
        ch: &ChannelSet,
        pilot: Complex64,
        slot: usize,
        noise: &mut NoiseSource,
    ) -> Result<CaseVerdict> {
        let meas = measure_boundary(bq, scene, ch, self.phases, pilot, slot, noise)?;
        self.classify_boundary(&meas, init, bq, ch)
    }
}

fn prefer(a: &Evidence, b: &Evidence) -> bool {
    if a.loglik.is_finite() && b.loglik.is_finite() {
        a.loglik >= b.loglik
    } else {
        a.residual_energy <= b.residual_energy
    }
}

/// Which side of the queried lines the "outer" region lies on.
///
/// For a lower boundary (`n_min`) the outer region is every line before the
/// query; for an upper boundary (`n_max`) it is every line after it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterSide {
    Before,
    After,
}

/// One binary answer and the number of slots spent on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Answer {
    pub bit: bool,
    pub slots: u32,
}

/// Over-the-air answer to "is the boundary inside `query`?".
///
/// Slot 1 tests the query lines. If they look all-normal the answer is 0.
/// Otherwise slot 2 tests the outer lines; the answer is 1 iff those look
/// all-normal. An empty outer region is all-normal without spending a slot.
#[allow(clippy::too_many_arguments)]
pub fn answer_yk(
    detector: &Detector,
    query: &RegionQuery,
    side: OuterSide,
    scene: &FailureScene,
    init: &InitEstimates,
    ch: &ChannelSet,
    pilot: Complex64,
    first_slot: usize,
    noise: &mut NoiseSource,
) -> Result<Answer> {
    let inner = detector.probe_region(query, scene, init, ch, pilot, first_slot, noise)?;
    if inner.label == Case::A {
        return Ok(Answer { bit: false, slots: 1 });
    }
    let dims = scene.dims();
    let outer_lines: Vec<usize> = match side {
        OuterSide::Before => (1..query.lines()[0]).collect(),
        OuterSide::After => (query.lines()[query.lines().len() - 1] + 1..=dims.extent(query.axis)).collect(),
    };
    if outer_lines.is_empty() {
        return Ok(Answer { bit: true, slots: 1 });
    }
    let outer = RegionQuery::new(dims, query.axis, outer_lines)?;
    let verdict = detector.probe_region(&outer, scene, init, ch, pilot, first_slot + 1, noise)?;
    Ok(Answer {
        bit: verdict.label == Case::A,
        slots: 2,
    })
}

/// Phase pattern for a region probe.
pub fn region_assignment(dims: GridDims, query: &RegionQuery, phases: ProbePhases) -> PhaseAssignment {
    PhaseAssignment::split(dims, query.axis, |i| query.contains(i), phases.inside, phases.outside)
}

/// Phase pattern for a cut probe: `inside` left of the cut, `outside` right of it.
pub fn boundary_assignment(dims: GridDims, bq: &BoundaryQuery, phases: ProbePhases) -> PhaseAssignment {
    let left_end = bq.left_end();
    PhaseAssignment::split(dims, bq.axis, |i| i <= left_end, phases.inside, phases.outside)
}

pub fn measure_region(
    query: &RegionQuery,
    scene: &FailureScene,
    ch: &ChannelSet,
    phases: ProbePhases,
    pilot: Complex64,
    slot: usize,
    noise: &mut NoiseSource,
) -> Result<Measurement> {
    let assign = region_assignment(scene.dims(), query, phases);
    received_signal(scene, &assign, ch, pilot, SlotTag::Probe(slot), noise)
}

pub fn measure_boundary(
    bq: &BoundaryQuery,
    scene: &FailureScene,
    ch: &ChannelSet,
    phases: ProbePhases,
    pilot: Complex64,
    slot: usize,
    noise: &mut NoiseSource,
) -> Result<Measurement> {
    let assign = boundary_assignment(scene.dims(), bq, phases);
    received_signal(scene, &assign, ch, pilot, SlotTag::Probe(slot), noise)
}

/// `‖y - h x - ḡ_e x - K e^{jφ_k} x - (ḡ_w - K) e^{jφ_c} x‖²` where `K` is the
/// cascade sum of the group assumed normal and probed at `φ_k`.
fn residual_energy(
    meas: &Measurement,
    init: &InitEstimates,
    ch: &ChannelSet,
    known: &[Complex64],
    known_phase: f64,
    complement_phase: f64,
) -> Result<f64> {
    let m = ch.antennas();
    for len in [meas.y.len(), init.g_e_hat.len(), init.g_w_hat.len()] {
        if len != m {
            return Err(Error::Dimension { expected: m, got: len });
        }
    }
    let x = meas.pilot;
    let ek = Complex64::cis(known_phase);
    let ec = Complex64::cis(complement_phase);
    let mut energy = 0.0;
    for (k, kn) in known.iter().enumerate() {
        let model = (ch.h()[k] + init.g_e_hat[k] + kn * ek + (init.g_w_hat[k] - kn) * ec) * x;
        energy += (meas.y[k] - model).norm_sqr();
    }
    Ok(energy)
}

/// Residual energy of the Case-A model for `query`.
pub fn region_residual_energy(
    meas: &Measurement,
    init: &InitEstimates,
    query: &RegionQuery,
    ch: &ChannelSet,
    phases: ProbePhases,
) -> Result<f64> {
    phases.validate()?;
    let inside = ch.region_sum(query.axis, |i| query.contains(i));
    residual_energy(meas, init, ch, &inside, phases.inside, phases.outside)
}

/// Residual energy of the Case-1 (`RightNormal`) or Case-2 (`LeftNormal`) model.
pub fn boundary_residual_energy(
    meas: &Measurement,
    init: &InitEstimates,
    bq: &BoundaryQuery,
    ch: &ChannelSet,
    phases: ProbePhases,
    hypothesis: Hypothesis,
) -> Result<f64> {
    phases.validate()?;
    match hypothesis {
        Hypothesis::RightNormal => {
            let right = ch.region_sum(bq.axis, |i| i >= bq.right_start());
            residual_energy(meas, init, ch, &right, phases.outside, phases.inside)
        }
        Hypothesis::LeftNormal => {
            let left = ch.region_sum(bq.axis, |i| i <= bq.left_end());
            residual_energy(meas, init, ch, &left, phases.inside, phases.outside)
        }
        Hypothesis::RegionNormal => Err(Error::InvalidQuery("region hypothesis on a cut".into())),
    }
}

/// Gaussian log-likelihood of `meas` under Case A for `query`.
pub fn loglik_region_normal(
    meas: &Measurement,
    init: &InitEstimates,
    query: &RegionQuery,
    ch: &ChannelSet,
    phases: ProbePhases,
) -> Result<f64> {
    let energy = region_residual_energy(meas, init, query, ch, phases)?;
    let sigma2 = ch.noise_power();
    if sigma2 <= 0.0 {
        return Err(Error::Parameter("log-likelihood needs a positive noise power".into()));
    }
    Ok(-(ch.antennas() as f64) * (PI * sigma2).ln() - energy / sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airlink::run_initialization;
    use crate::channel::{synthesize_channels, Geometry, Layout, PathLoss};
    use crate::model::DefectRect;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

    fn channels(dims: GridDims, m: usize, noise: f64) -> ChannelSet {
        let geom = Geometry::from_layout(dims, m, &Layout::default()).unwrap();
        synthesize_channels(&geom, PathLoss::default(), 1.0)
            .unwrap()
            .with_noise_power(noise)
            .unwrap()
    }

    fn example_scene(rng: &mut ChaCha8Rng) -> (GridDims, FailureScene) {
        let dims = GridDims::new(4, 4).unwrap();
        let rect = DefectRect::new(dims, 2, 3, 2, 3).unwrap();
        (dims, FailureScene::sample(dims, rect, rng).unwrap())
    }

    fn init_for(scene: &FailureScene, ch: &ChannelSet, noise: &mut NoiseSource) -> InitEstimates {
        run_initialization(scene, ch, (ONE, ONE), (0.0, PI), noise).unwrap()
    }

    #[test]
    fn query_validation() {
        let dims = GridDims::new(4, 4).unwrap();
        assert!(RegionQuery::new(dims, Axis::Horizontal, vec![]).is_err());
        assert!(RegionQuery::new(dims, Axis::Horizontal, vec![5]).is_err());
        assert!(RegionQuery::new(dims, Axis::Vertical, vec![0]).is_err());
        assert!(RegionQuery::new(dims, Axis::Horizontal, vec![3, 1]).unwrap().lines() == [1, 3]);
        assert!(!RegionQuery::new(dims, Axis::Horizontal, vec![1, 3]).unwrap().is_consecutive());
        assert!(BoundaryQuery::new(dims, Axis::Horizontal, 2.5).is_ok());
        assert!(BoundaryQuery::new(dims, Axis::Horizontal, 2.0).is_err());
        assert!(BoundaryQuery::new(dims, Axis::Horizontal, 0.5).is_err());
        assert!(BoundaryQuery::new(dims, Axis::Horizontal, 4.5).is_err());
    }

    #[test]
    fn exact_model_has_zero_residual_and_maximal_loglik() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (dims, scene) = example_scene(&mut rng);
        let quiet = channels(dims, 4, 0.0);
        let init = init_for(&scene, &quiet, &mut NoiseSource::seeded(0));
        let query = RegionQuery::span(dims, Axis::Horizontal, 4, 4).unwrap();
        let meas = measure_region(&query, &scene, &quiet, ProbePhases::default(), ONE, 1, &mut NoiseSource::seeded(0)).unwrap();
        let energy = region_residual_energy(&meas, &init, &query, &quiet, ProbePhases::default()).unwrap();
        let scale = ch_scale(&quiet);
        assert!(energy <= (1e-12 * scale).powi(2));

        // Same exact init applied with a nominal σ² for the likelihood formula.
        let sigma2 = 1e-10;
        let nominal = quiet.clone().with_noise_power(sigma2).unwrap();
        let ll = loglik_region_normal(&meas, &init, &query, &nominal, ProbePhases::default()).unwrap();
        let max = -4.0 * (PI * sigma2).ln();
        assert!((ll - max).abs() < 1e-6);
    }

    fn ch_scale(ch: &ChannelSet) -> f64 {
        ch.amplitude_scale()
    }

    #[test]
    fn defect_residual_matches_direct_substitution() {
        // Substituting the true signal into the Case-A model, the β terms
        // cancel against ḡ_e and the remainder is Σ_{E∩U} g (e^{jφ_out} - e^{jφ_in}) x.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dims = GridDims::new(8, 8).unwrap();
        let quiet = channels(dims, 3, 0.0);
        for _ in 0..30 {
            let rect = DefectRect::new(dims, rng.random_range(1..=4), rng.random_range(5..=8), rng.random_range(1..=4), rng.random_range(5..=8)).unwrap();
            let scene = FailureScene::sample(dims, rect, &mut rng).unwrap();
            let init = init_for(&scene, &quiet, &mut NoiseSource::seeded(0));
            let lo = rng.random_range(1..=8);
            let hi = rng.random_range(lo..=8);
            let query = RegionQuery::span(dims, Axis::Horizontal, lo, hi).unwrap();
            let phases = ProbePhases { inside: rng.random_range(0.0..3.0), outside: rng.random_range(3.2..6.2) };
            let x = Complex64::new(rng.random_range(0.5..2.0), 0.3);
            let meas = measure_region(&query, &scene, &quiet, phases, x, 1, &mut NoiseSource::seeded(0)).unwrap();
            let energy = region_residual_energy(&meas, &init, &query, &quiet, phases).unwrap();

            let mut oracle = [Complex64::default(); 3];
            for (o, (c, r)) in dims.elements().enumerate() {
                if rect.contains(c, r) && query.contains(c) {
                    for (acc, g) in oracle.iter_mut().zip(quiet.g(o)) {
                        *acc += g * (Complex64::cis(phases.outside) - Complex64::cis(phases.inside)) * x;
                    }
                }
            }
            let expected: f64 = oracle.iter().map(|z| z.norm_sqr()).sum();
            let tol = (1e-12 * x.norm() * ch_scale(&quiet)).powi(2) + 1e-9 * expected;
            assert!((energy - expected).abs() <= tol, "{energy} vs {expected}");
        }
    }

    #[test]
    fn noiseless_region_verdicts_match_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (dims, scene) = example_scene(&mut rng);
        let quiet = channels(dims, 4, 0.0);
        let det = Detector::new(DEFAULT_ALPHA, 4, ProbePhases::default()).unwrap();
        let init = init_for(&scene, &quiet, &mut NoiseSource::seeded(0));
        let mut noise = NoiseSource::seeded(0);
        for lo in 1..=4 {
            for hi in lo..=4 {
                let q = RegionQuery::span(dims, Axis::Horizontal, lo, hi).unwrap();
                let v = det.probe_region(&q, &scene, &init, &quiet, ONE, 1, &mut noise).unwrap();
                let has_defect = (lo..=hi).any(|c| (2..=3).contains(&c));
                assert_eq!(v.label, if has_defect { Case::B } else { Case::A }, "{lo}..{hi}");
            }
        }
    }

    #[test]
    fn high_snr_column_two_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (dims, scene) = example_scene(&mut rng);
        let ch = channels(dims, 4, 1e-14);
        let det = Detector::new(DEFAULT_ALPHA, 4, ProbePhases::default()).unwrap();
        let mut noise = NoiseSource::seeded(4);
        let init = init_for(&scene, &ch, &mut noise);
        let q = RegionQuery::span(dims, Axis::Horizontal, 2, 2).unwrap();
        let v = det.probe_region(&q, &scene, &init, &ch, ONE, 1, &mut noise).unwrap();
        let ev = v.evidence_for(Hypothesis::RegionNormal).unwrap();
        assert_eq!(v.label, Case::B);
        assert!(ev.loglik < ev.log_threshold - 100.0);
    }

    #[test]
    fn example_three_answers() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (dims, scene) = example_scene(&mut rng);
        let ch = channels(dims, 4, 1e-14);
        let det = Detector::new(DEFAULT_ALPHA, 4, ProbePhases::default()).unwrap();
        let mut noise = NoiseSource::seeded(5);
        let init = init_for(&scene, &ch, &mut noise);

        // S = {3}: column 3 defective, columns {1, 2} defective too → Y = 0.
        let s3 = RegionQuery::span(dims, Axis::Horizontal, 3, 3).unwrap();
        let a = answer_yk(&det, &s3, OuterSide::Before, &scene, &init, &ch, ONE, 1, &mut noise).unwrap();
        assert_eq!(a, Answer { bit: false, slots: 2 });

        // S = {2}: column 2 defective, column 1 normal → Y = 1.
        let s2 = RegionQuery::span(dims, Axis::Horizontal, 2, 2).unwrap();
        let a = answer_yk(&det, &s2, OuterSide::Before, &scene, &init, &ch, ONE, 3, &mut noise).unwrap();
        assert_eq!(a, Answer { bit: true, slots: 2 });

        // S = {4}: normal column → Y = 0 in one slot.
        let s4 = RegionQuery::span(dims, Axis::Horizontal, 4, 4).unwrap();
        let a = answer_yk(&det, &s4, OuterSide::Before, &scene, &init, &ch, ONE, 5, &mut noise).unwrap();
        assert_eq!(a, Answer { bit: false, slots: 1 });

        // S = {1, 2} touches column 1: empty outer region counts as normal.
        let s12 = RegionQuery::span(dims, Axis::Horizontal, 1, 2).unwrap();
        let a = answer_yk(&det, &s12, OuterSide::Before, &scene, &init, &ch, ONE, 6, &mut noise).unwrap();
        assert_eq!(a, Answer { bit: true, slots: 1 });

        // Mirrored: S = {3} with the outer region after it → n_max = 3 is inside.
        let a = answer_yk(&det, &s3, OuterSide::After, &scene, &init, &ch, ONE, 7, &mut noise).unwrap();
        assert_eq!(a, Answer { bit: true, slots: 2 });
    }

    #[test]
    fn whole_grid_query_answers_one_iff_defective() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (dims, scene) = example_scene(&mut rng);
        let quiet = channels(dims, 2, 0.0);
        let det = Detector::new(DEFAULT_ALPHA, 2, ProbePhases::default()).unwrap();
        let all = RegionQuery::span(dims, Axis::Horizontal, 1, 4).unwrap();
        let mut noise = NoiseSource::seeded(0);
        let init = init_for(&scene, &quiet, &mut noise);
        let a = answer_yk(&det, &all, OuterSide::Before, &scene, &init, &quiet, ONE, 1, &mut noise).unwrap();
        assert_eq!(a, Answer { bit: true, slots: 1 });

        let healthy = FailureScene::healthy(dims);
        let init = init_for(&healthy, &quiet, &mut noise);
        let a = answer_yk(&det, &all, OuterSide::Before, &healthy, &init, &quiet, ONE, 1, &mut noise).unwrap();
        assert_eq!(a, Answer { bit: false, slots: 1 });
    }

    #[test]
    fn example_two_boundary_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (dims, scene) = example_scene(&mut rng);
        let ch = channels(dims, 4, 1e-14);
        let det = Detector::new(DEFAULT_ALPHA, 4, ProbePhases::default()).unwrap();
        let mut noise = NoiseSource::seeded(7);
        let init = init_for(&scene, &ch, &mut noise);
        for (cut, want) in [(2.5, Case::Three), (1.5, Case::Two), (3.5, Case::One)] {
            let bq = BoundaryQuery::new(dims, Axis::Horizontal, cut).unwrap();
            let v = det.probe_boundary(&bq, &scene, &init, &ch, ONE, 1, &mut noise).unwrap();
            assert_eq!(v.label, want, "cut {cut}");
        }
    }

    #[test]
    fn both_accepted_picks_better_fit() {
        // A healthy IRS satisfies both hypotheses; the verdict must still be 1 or 2.
        let dims = GridDims::new(4, 4).unwrap();
        let ch = channels(dims, 2, 1e-12);
        let det = Detector::new(DEFAULT_ALPHA, 2, ProbePhases::default()).unwrap();
        let healthy = FailureScene::healthy(dims);
        let mut noise = NoiseSource::seeded(8);
        let init = init_for(&healthy, &ch, &mut noise);
        let bq = BoundaryQuery::new(dims, Axis::Horizontal, 2.5).unwrap();
        let v = det.probe_boundary(&bq, &healthy, &init, &ch, ONE, 1, &mut noise).unwrap();
        let (c1, c2) = (v.evidence_for(Hypothesis::RightNormal).unwrap(), v.evidence_for(Hypothesis::LeftNormal).unwrap());
        if c1.accepted() && c2.accepted() {
            let want = if c1.loglik >= c2.loglik { Case::One } else { Case::Two };
            assert_eq!(v.label, want);
        }
    }

    #[test]
    fn chi_square_quantile_matches_closed_form() {
        // For even degrees of freedom 2M the survival function is
        // exp(-t/2) Σ_{k<M} (t/2)^k / k!.
        for m in [1usize, 2, 4, 8] {
            let det = Detector::new(1e-3, m, ProbePhases::default()).unwrap();
            let half = det.chi_square_quantile() / 2.0;
            let mut term = 1.0;
            let mut sum = 0.0;
            for k in 0..m {
                if k > 0 {
                    term *= half / k as f64;
                }
                sum += term;
            }
            let tail = (-half).exp() * sum;
            assert!((tail - 1e-3).abs() < 1e-8, "M={m}: tail {tail}");
        }
    }

    #[test]
    fn invalid_detector_parameters() {
        assert!(Detector::new(0.0, 4, ProbePhases::default()).is_err());
        assert!(Detector::new(1e-3, 0, ProbePhases::default()).is_err());
        assert!(Detector::new(1e-3, 4, ProbePhases { inside: 1.0, outside: 1.0 + TAU }).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let dims = GridDims::new(4, 4).unwrap();
        let ch = channels(dims, 2, 0.0);
        let q = RegionQuery::span(dims, Axis::Horizontal, 1, 1).unwrap();
        let init = InitEstimates {
            g_e_hat: vec![Complex64::default(); 3],
            g_w_hat: vec![Complex64::default(); 3],
            phases_used: (0.0, PI),
            pilots_used: (ONE, ONE),
        };
        let meas = Measurement { y: vec![Complex64::default(); 3], pilot: ONE, slot_tag: SlotTag::Probe(1) };
        assert!(matches!(
            region_residual_energy(&meas, &init, &q, &ch, ProbePhases::default()),
            Err(Error::Dimension { .. })
        ));
    }
}
