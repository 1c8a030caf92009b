use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Method, TrialPoint};
use crate::airlink::{run_initialization, NoiseSource};
use crate::bisect::{run_three_phase, BisectionOutcome};
use crate::channel::{dbm_to_watts, synthesize_channels, ChannelSet, Geometry};
use crate::detect::{Detector, ProbePhases};
use crate::error::Result;
use crate::model::{Axis, Boundary, DefectRect, FailureScene, GridDims};
use crate::sortpm::{estimate_boundary_sortpm, SortPmOutcome};

/// Initialization phases `(φ_0-, φ_0+)`.
pub const INIT_PHASES: (f64, f64) = (0.0, std::f64::consts::PI);

/// Initialization slots charged to every method.
pub const INIT_SLOTS: u32 = 2;

/// Boundary estimates in `Boundary::ALL` order.
pub type Bounds = [usize; 4];

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub method: Method,
    pub seed: u64,
    pub truth: DefectRect,
    pub estimate: Bounds,
    /// All four boundaries match the truth.
    pub correct: bool,
    pub slots_used: u32,
    pub converged: bool,
}

/// A trial with the per-boundary detail behind its results.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub scene: FailureScene,
    pub results: Vec<TrialResult>,
    pub sortpm: Vec<(Boundary, SortPmOutcome)>,
    pub bisect: Vec<(Axis, BisectionOutcome)>,
}

/// SplitMix64 finalizer over `a` combined with `b`.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial`. It does not depend on the sweep point, so every
/// point sees the same scenes.
pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    mix_seed(base_seed, trial as u64)
}

fn point_key(point: TrialPoint) -> u64 {
    mix_seed(point.power_dbm.to_bits(), point.antennas as u64)
}

#[derive(Clone, Copy)]
enum Stream {
    Init = 1,
    SortPm = 2,
    Bisect = 3,
}

fn noise_source(seed: u64, point: TrialPoint, stream: Stream) -> NoiseSource {
    NoiseSource::seeded(mix_seed(mix_seed(seed, point_key(point)), stream as u64))
}

/// Defect rectangle of the given size placed uniformly over valid positions.
pub fn sample_defect<R: Rng + ?Sized>(dims: GridDims, width: usize, height: usize, rng: &mut R) -> Result<DefectRect> {
    let h_min = rng.random_range(1..=dims.n_h() + 1 - width);
    let v_min = rng.random_range(1..=dims.n_v() + 1 - height);
    DefectRect::new(dims, h_min, h_min + width - 1, v_min, v_min + height - 1)
}

/// Scene of trial `seed`.
pub fn sample_scene(cfg: &ExperimentConfig, seed: u64) -> Result<FailureScene> {
    let dims = cfg.dims()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rect = sample_defect(dims, cfg.defect_h, cfg.defect_v, &mut rng)?;
    FailureScene::sample(dims, rect, &mut rng)
}

/// Channels for `antennas` receive antennas under the configured layout.
pub fn build_channels(cfg: &ExperimentConfig, antennas: usize) -> Result<ChannelSet> {
    let geom = Geometry::from_layout(cfg.dims()?, antennas, &cfg.layout)?;
    let noise = if cfg.noiseless { 0.0 } else { dbm_to_watts(cfg.noise_dbm) };
    synthesize_channels(&geom, cfg.path_loss, 1.0)?.with_noise_power(noise)
}

pub fn pilot_for(power_dbm: f64) -> Complex64 {
    Complex64::new(dbm_to_watts(power_dbm).sqrt(), 0.0)
}

/// Runs every configured method on `scene` with channels `ch`.
pub fn run_trial_on(
    cfg: &ExperimentConfig,
    point: TrialPoint,
    scene: FailureScene,
    ch: &ChannelSet,
    seed: u64,
) -> Result<TrialRun> {
    let truth = scene.defect().ok_or(crate::error::Error::NoDefect)?;
    let pilot = pilot_for(point.power_dbm);
    let detector = Detector::new(cfg.alpha, point.antennas, ProbePhases::default())?;
    let mut init_noise = noise_source(seed, point, Stream::Init);
    let init = run_initialization(&scene, ch, (pilot, pilot), INIT_PHASES, &mut init_noise)?;
    let truth_bounds: Bounds = Boundary::ALL.map(|b| b.of(&truth));

    let mut run = TrialRun {
        results: Vec::new(),
        sortpm: Vec::new(),
        bisect: Vec::new(),
        scene,
    };
    for &method in cfg.method.methods() {
        let (estimate, slots, converged) = match method {
            Method::SortPm => {
                let mut noise = noise_source(seed, point, Stream::SortPm);
                let mut estimate = [0; 4];
                let mut slots = INIT_SLOTS;
                let mut converged = true;
                for (i, b) in Boundary::ALL.into_iter().enumerate() {
                    let out = estimate_boundary_sortpm(
                        b,
                        &run.scene,
                        &init,
                        ch,
                        &detector,
                        cfg.sortpm_params(),
                        pilot,
                        &mut noise,
                    )?;
                    estimate[i] = out.estimate;
                    slots += out.slots;
                    converged &= out.converged;
                    run.sortpm.push((b, out));
                }
                (estimate, slots, converged)
            }
            Method::Bisect => {
                let mut noise = noise_source(seed, point, Stream::Bisect);
                let mut estimate = [0; 4];
                let mut slots = INIT_SLOTS;
                for (i, axis) in Axis::BOTH.into_iter().enumerate() {
                    let out = run_three_phase(axis, &run.scene, &init, ch, &detector, pilot, &mut noise)?;
                    estimate[2 * i] = out.n_min;
                    estimate[2 * i + 1] = out.n_max;
                    slots += out.slots;
                    run.bisect.push((axis, out));
                }
                (estimate, slots, true)
            }
        };
        run.results.push(TrialResult {
            method,
            seed,
            truth,
            estimate,
            correct: estimate == truth_bounds,
            slots_used: slots,
            converged,
        });
    }
    Ok(run)
}

/// Samples the scene of `seed` and runs every configured method on it.
pub fn simulate_trial(cfg: &ExperimentConfig, point: TrialPoint, seed: u64) -> Result<TrialRun> {
    let ch = build_channels(cfg, point.antennas)?;
    run_trial_on(cfg, point, sample_scene(cfg, seed)?, &ch, seed)
}

pub fn run_trial(cfg: &ExperimentConfig, point: TrialPoint, seed: u64) -> Result<Vec<TrialResult>> {
    Ok(simulate_trial(cfg, point, seed)?.results)
}
