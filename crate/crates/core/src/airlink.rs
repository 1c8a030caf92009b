//! Pilot measurements over the air and the two-slot initialization stage.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::model::{coefficient_at, FailureScene, PhaseAssignment};

/// Seeded source of circularly-symmetric complex Gaussian receiver noise.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn seeded(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// One draw of CN(0, `variance`).
    pub fn complex_gaussian(&mut self, variance: f64) -> Complex64 {
        let s = (variance / 2.0).sqrt();
        let re: f64 = StandardNormal.sample(&mut self.rng);
        let im: f64 = StandardNormal.sample(&mut self.rng);
        Complex64::new(s * re, s * im)
    }
}

/// Which slot a measurement was taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotTag {
    /// First initialization slot (`0-`).
    InitLow,
    /// Second initialization slot (`0+`).
    InitHigh,
    /// A probing slot, numbered from 1.
    Probe(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub y: Vec<Complex64>,
    pub pilot: Complex64,
    pub slot_tag: SlotTag,
}

/// Received samples for one slot: direct path plus every element's cascaded
/// channel weighted by its realized coefficient, plus receiver noise.
pub fn received_signal(
    scene: &FailureScene,
    assign: &PhaseAssignment,
    ch: &ChannelSet,
    pilot: Complex64,
    slot_tag: SlotTag,
    noise: &mut NoiseSource,
) -> Result<Measurement> {
    let dims = scene.dims();
    if ch.dims() != dims {
        return Err(Error::Dimension {
            expected: dims.len(),
            got: ch.dims().len(),
        });
    }
    if assign.len() != dims.len() {
        return Err(Error::AssignmentLength {
            expected: dims.len(),
            got: assign.len(),
        });
    }
    let mut y: Vec<Complex64> = ch.h().to_vec();
    for offset in 0..dims.len() {
        let theta = coefficient_at(scene, assign, offset);
        for (acc, g) in y.iter_mut().zip(ch.g(offset)) {
            *acc += theta * g;
        }
    }
    let sigma2 = ch.noise_power();
    for v in y.iter_mut() {
        *v *= pilot;
        if sigma2 > 0.0 {
            *v += noise.complex_gaussian(sigma2);
        }
    }
    Ok(Measurement { y, pilot, slot_tag })
}

/// ML estimates of the aggregate defective cascade `g_e = Σ_E e^{jβ} g` and
/// the aggregate normal cascade `g_w = Σ_W g`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitEstimates {
    pub g_e_hat: Vec<Complex64>,
    pub g_w_hat: Vec<Complex64>,
    /// `(φ_0-, φ_0+)`.
    pub phases_used: (f64, f64),
    /// `(x_0-, x_0+)`.
    pub pilots_used: (Complex64, Complex64),
}

impl InitEstimates {
    /// Closed-form ML solution from the two initialization measurements.
    pub fn from_measurements(
        h: &[Complex64],
        y_low: &[Complex64],
        y_high: &[Complex64],
        pilots: (Complex64, Complex64),
        phases: (f64, f64),
    ) -> Result<Self> {
        check_design(pilots, phases)?;
        let m = h.len();
        for v in [y_low.len(), y_high.len()] {
            if v != m {
                return Err(Error::Dimension { expected: m, got: v });
            }
        }
        let (x_lo, x_hi) = pilots;
        let (e_lo, e_hi) = (Complex64::cis(phases.0), Complex64::cis(phases.1));
        let denom = x_lo * x_hi * (e_hi - e_lo);
        let mut g_e_hat = Vec::with_capacity(m);
        let mut g_w_hat = Vec::with_capacity(m);
        for k in 0..m {
            let r_lo = y_low[k] - h[k] * x_lo;
            let r_hi = y_high[k] - h[k] * x_hi;
            g_e_hat.push((e_hi * x_hi * r_lo - e_lo * x_lo * r_hi) / denom);
            g_w_hat.push((x_lo * r_hi - x_hi * r_lo) / denom);
        }
        Ok(Self {
            g_e_hat,
            g_w_hat,
            phases_used: phases,
            pilots_used: pilots,
        })
    }

    /// Per-antenna variance of the model residual under a correct hypothesis.
    ///
    /// The residual of a probing slot with pilot `pilot` is
    /// `z - x (e_e + e_w e^{jφ_c})`, where `e_e`, `e_w` are the estimation
    /// errors of `ḡ_e`, `ḡ_w` and `φ_c` is the phase applied to the group
    /// whose cascade is inferred as `ḡ_w` minus a known sum. Expanding the
    /// errors in terms of the two initialization noises gives
    /// `σ² (1 + |x|² (|1-c|²/|x_0-|² + |c|²/|x_0+|²))` with
    /// `c = (e^{jφ_c} - e^{jφ_0-}) / (e^{jφ_0+} - e^{jφ_0-})`.
    pub fn residual_variance(&self, noise_power: f64, pilot: Complex64, complement_phase: f64) -> f64 {
        let (x_lo, x_hi) = self.pilots_used;
        let (e_lo, e_hi) = (Complex64::cis(self.phases_used.0), Complex64::cis(self.phases_used.1));
        let c = (Complex64::cis(complement_phase) - e_lo) / (e_hi - e_lo);
        let one_minus = Complex64::new(1.0, 0.0) - c;
        noise_power * (1.0 + pilot.norm_sqr() * (one_minus.norm_sqr() / x_lo.norm_sqr() + c.norm_sqr() / x_hi.norm_sqr()))
    }
}

fn check_design(pilots: (Complex64, Complex64), phases: (f64, f64)) -> Result<()> {
    if pilots.0 == Complex64::default() || pilots.1 == Complex64::default() {
        return Err(Error::InvalidPilot);
    }
    let (e_lo, e_hi) = (Complex64::cis(phases.0), Complex64::cis(phases.1));
    if (e_hi - e_lo).norm() < 1e-12 {
        return Err(Error::SingularDesign);
    }
    Ok(())
}

/// Runs the two uniform-phase initialization slots and returns the ML
/// estimates of the aggregate cascades.
pub fn run_initialization(
    scene: &FailureScene,
    ch: &ChannelSet,
    pilots: (Complex64, Complex64),
    phases: (f64, f64),
    noise: &mut NoiseSource,
) -> Result<InitEstimates> {
    check_design(pilots, phases)?;
    let dims = scene.dims();
    let low = received_signal(
        scene,
        &PhaseAssignment::uniform(dims, phases.0),
        ch,
        pilots.0,
        SlotTag::InitLow,
        noise,
    )?;
    let high = received_signal(
        scene,
        &PhaseAssignment::uniform(dims, phases.1),
        ch,
        pilots.1,
        SlotTag::InitHigh,
        noise,
    )?;
    InitEstimates::from_measurements(ch.h(), &low.y, &high.y, pilots, phases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{synthesize_channels, Geometry, Layout, PathLoss};
    use crate::model::{realized_coefficient, DefectRect, GridDims};
    use rand::Rng;
    use std::f64::consts::PI;

    fn setup(m: usize, noise: f64) -> (GridDims, ChannelSet) {
        let dims = GridDims::new(8, 4).unwrap();
        let geom = Geometry::from_layout(dims, m, &Layout::default()).unwrap();
        let ch = synthesize_channels(&geom, PathLoss::default(), 1.0).unwrap();
        (dims, ch.with_noise_power(noise).unwrap())
    }

    fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn uniform_phase_collapses_to_total_cascade() {
        let (dims, ch) = setup(3, 0.0);
        let phi = 0.9;
        let x = Complex64::new(0.3, 0.0);
        let total = ch.total_cascade();
        let healthy = FailureScene::healthy(dims);
        // Every element stuck at φ is indistinguishable from a healthy IRS at φ.
        let all_stuck = FailureScene::uniform_stuck(dims, DefectRect::new(dims, 1, 8, 1, 4).unwrap(), phi).unwrap();
        for scene in [healthy, all_stuck] {
            let y = received_signal(&scene, &PhaseAssignment::uniform(dims, phi), &ch, x, SlotTag::Probe(1), &mut NoiseSource::seeded(0))
                .unwrap();
            for (k, t) in total.iter().enumerate() {
                let expected = (ch.h()[k] + Complex64::cis(phi) * t) * x;
                assert!((y.y[k] - expected).norm() <= 1e-12 * expected.norm());
            }
        }
    }

    #[test]
    fn healthy_initialization_has_zero_defect_cascade() {
        let (dims, ch) = setup(2, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let init = run_initialization(&FailureScene::healthy(dims), &ch, (one, one), (0.0, PI), &mut NoiseSource::seeded(0)).unwrap();
        let total = ch.total_cascade();
        let scale = total.iter().map(|z| z.norm()).sum::<f64>();
        assert!(init.g_e_hat.iter().all(|z| z.norm() <= 1e-9 * scale));
        assert!(rel_err(&init.g_w_hat, &total) <= 1e-9);
    }

    #[test]
    fn zero_noise_matches_elementwise_oracle() {
        let (dims, ch) = setup(4, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let rect = DefectRect::new(dims, rng.random_range(1..=4), rng.random_range(5..=8), 2, 3).unwrap();
            let scene = FailureScene::sample(dims, rect, &mut rng).unwrap();
            let assign = PhaseAssignment::new(dims, (0..dims.len()).map(|_| rng.random_range(0.0..6.0)).collect()).unwrap();
            let x = Complex64::new(rng.random_range(0.1..2.0), rng.random_range(-1.0..1.0));
            let meas = received_signal(&scene, &assign, &ch, x, SlotTag::Probe(1), &mut NoiseSource::seeded(1)).unwrap();
            for k in 0..4 {
                let mut oracle = ch.h()[k] * x;
                for (c, r) in dims.elements() {
                    let theta = realized_coefficient(&scene, &assign, c, r).unwrap();
                    oracle += theta * ch.g(dims.offset(c, r).unwrap())[k] * x;
                }
                assert!((meas.y[k] - oracle).norm() <= 1e-12 * oracle.norm());
            }
        }
    }

    #[test]
    fn measurements_are_seed_deterministic_and_linear_in_pilot() {
        let (dims, ch) = setup(2, 1e-6);
        let scene = FailureScene::uniform_stuck(dims, DefectRect::new(dims, 2, 3, 1, 2).unwrap(), 1.0).unwrap();
        let assign = PhaseAssignment::uniform(dims, 0.4);
        let x = Complex64::new(0.5, 0.0);
        let a = received_signal(&scene, &assign, &ch, x, SlotTag::Probe(1), &mut NoiseSource::seeded(9)).unwrap();
        let b = received_signal(&scene, &assign, &ch, x, SlotTag::Probe(1), &mut NoiseSource::seeded(9)).unwrap();
        assert_eq!(a, b);

        let quiet = ch.clone().with_noise_power(0.0).unwrap();
        let mut n = NoiseSource::seeded(0);
        let y1 = received_signal(&scene, &assign, &quiet, x, SlotTag::Probe(1), &mut n).unwrap();
        let y3 = received_signal(&scene, &assign, &quiet, x * 3.0, SlotTag::Probe(1), &mut n).unwrap();
        for (p, q) in y1.y.iter().zip(&y3.y) {
            assert!((p * 3.0 - q).norm() <= 1e-12 * q.norm());
        }
    }

    #[test]
    fn noiseless_initialization_is_exact() {
        let (dims, ch) = setup(4, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let rect = DefectRect::new(dims, rng.random_range(1..=3), rng.random_range(4..=8), 1, rng.random_range(1..=4)).unwrap();
            let scene = FailureScene::sample(dims, rect, &mut rng).unwrap();
            let pilots = (Complex64::new(rng.random_range(0.1..1.0), 0.2), Complex64::new(0.7, rng.random_range(-1.0..1.0)));
            let phases = (rng.random_range(0.0..3.0), rng.random_range(3.2..6.0));
            let init = run_initialization(&scene, &ch, pilots, phases, &mut NoiseSource::seeded(0)).unwrap();

            let mut g_e = vec![Complex64::default(); 4];
            let mut g_w = vec![Complex64::default(); 4];
            for (o, (c, r)) in dims.elements().enumerate() {
                for k in 0..4 {
                    match scene.stuck_phase(c, r).unwrap() {
                        Some(beta) => g_e[k] += Complex64::cis(beta) * ch.g(o)[k],
                        None => g_w[k] += ch.g(o)[k],
                    }
                }
            }
            assert!(rel_err(&init.g_e_hat, &g_e) <= 1e-9);
            assert!(rel_err(&init.g_w_hat, &g_w) <= 1e-9);
        }
    }

    #[test]
    fn design_errors() {
        let (dims, ch) = setup(1, 0.0);
        let scene = FailureScene::uniform_stuck(dims, DefectRect::new(dims, 1, 1, 1, 1).unwrap(), 1.0).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let mut n = NoiseSource::seeded(0);
        assert_eq!(run_initialization(&scene, &ch, (one, one), (0.5, 0.5), &mut n), Err(Error::SingularDesign));
        assert_eq!(
            run_initialization(&scene, &ch, (Complex64::default(), one), (0.0, PI), &mut n),
            Err(Error::InvalidPilot)
        );
    }

    #[test]
    fn antipodal_phases_maximize_denominator() {
        let d = Complex64::cis(PI) - Complex64::cis(0.0);
        assert!((d - Complex64::new(-2.0, 0.0)).norm() < 1e-15);
        for i in 0..100 {
            let phi = i as f64 * 0.0628;
            assert!((Complex64::cis(phi) - Complex64::cis(0.0)).norm() <= 2.0 + 1e-15);
        }
    }

    #[test]
    fn residual_variance_default_design() {
        let one = Complex64::new(1.0, 0.0);
        let init = InitEstimates {
            g_e_hat: vec![],
            g_w_hat: vec![],
            phases_used: (0.0, PI),
            pilots_used: (one, one),
        };
        // Complement at π: c = 1, residual = z - z_0+.
        assert!((init.residual_variance(1.0, one, PI) - 2.0).abs() < 1e-12);
        // Complement at 0: c = 0, residual = z - z_0-.
        assert!((init.residual_variance(1.0, one, 0.0) - 2.0).abs() < 1e-12);
        // Complement at π/2: |c|² = |1-c|² = 1/2.
        assert!((init.residual_variance(1.0, one, PI / 2.0) - 2.0).abs() < 1e-12);
    }
}
