use super::config::{ExperimentConfig, Method};
use super::sweep::run_sweep;
use crate::error::{Error, Result};

/// Accuracy below this at the lowest power counts as "before the transition".
pub const LOW_ACCURACY_CEILING: f64 = 0.5;
/// Accuracy at or above this at the highest power counts as saturated.
pub const HIGH_ACCURACY_FLOOR: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationPoint {
    pub noise_dbm: f64,
    /// `(method, accuracy at lowest power, accuracy at highest power)`.
    pub accuracy: Vec<(Method, f64, f64)>,
}

impl CalibrationPoint {
    /// Every method is below the ceiling at low power and saturated at high power.
    pub fn in_regime(&self) -> bool {
        self.accuracy
            .iter()
            .all(|&(_, lo, hi)| lo < LOW_ACCURACY_CEILING && hi >= HIGH_ACCURACY_FLOOR)
    }

    /// Smallest high-power accuracy minus largest low-power accuracy.
    pub fn spread(&self) -> f64 {
        let hi = self.accuracy.iter().map(|a| a.2).fold(f64::INFINITY, f64::min);
        let lo = self.accuracy.iter().map(|a| a.1).fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub points: Vec<CalibrationPoint>,
    /// Candidate with the widest spread among those in the regime.
    pub chosen: Option<f64>,
}

/// Sweeps candidate noise powers at the extreme transmit powers of `cfg`
/// using its first antenna count.
pub fn calibrate(cfg: &ExperimentConfig, candidates_dbm: &[f64], trials: usize) -> Result<Calibration> {
    cfg.validate()?;
    if candidates_dbm.is_empty() {
        return Err(Error::Config("no candidate noise powers".into()));
    }
    let lo = cfg.power_dbm.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cfg.power_dbm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut points = Vec::with_capacity(candidates_dbm.len());
    for &noise_dbm in candidates_dbm {
        let probe = ExperimentConfig {
            power_dbm: vec![lo, hi],
            antennas: vec![cfg.antennas[0]],
            noise_dbm,
            noiseless: false,
            trials,
            ..cfg.clone()
        };
        let results = run_sweep(&probe)?;
        let low = results[0].aggregates(&probe);
        let high = results[results.len() - 1].aggregates(&probe);
        let accuracy = low.iter().zip(&high).map(|(l, h)| (l.method, l.accuracy, h.accuracy)).collect();
        points.push(CalibrationPoint { noise_dbm, accuracy });
    }
    let chosen = points
        .iter()
        .filter(|p| p.in_regime())
        .fold(None::<&CalibrationPoint>, |best, p| match best {
            Some(b) if b.spread() >= p.spread() => Some(b),
            _ => Some(p),
        })
        .map(|p| p.noise_dbm);
    Ok(Calibration { points, chosen })
}
