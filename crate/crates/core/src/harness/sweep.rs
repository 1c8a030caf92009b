use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Method, TrialPoint};
use super::trial::{build_channels, run_trial_on, sample_scene, trial_seed, TrialResult};
use crate::error::{Error, Result};

/// Version written in the first column of every row.
pub const CSV_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 17] = [
    "version",
    "method",
    "p_t_dbm",
    "m_antennas",
    "trial",
    "seed",
    "true_hmin",
    "true_hmax",
    "true_vmin",
    "true_vmax",
    "est_hmin",
    "est_hmax",
    "est_vmin",
    "est_vmax",
    "correct",
    "slots_used",
    "converged",
];

/// Value of the `trial` column on aggregate rows.
pub const AGGREGATE_TAG: &str = "aggregate";

/// All trials of one sweep point, ordered by method then trial index.
#[derive(Debug, Clone)]
pub struct PointResults {
    pub point: TrialPoint,
    pub trials: Vec<(usize, TrialResult)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: Method,
    pub point: TrialPoint,
    pub trials: usize,
    pub accuracy: f64,
    pub mean_slots: f64,
    pub converged_rate: f64,
}

impl PointResults {
    pub fn of_method(&self, method: Method) -> impl Iterator<Item = &TrialResult> {
        self.trials.iter().map(|(_, r)| r).filter(move |r| r.method == method)
    }

    /// Per-method means, in method order.
    pub fn aggregates(&self, cfg: &ExperimentConfig) -> Vec<Aggregate> {
        cfg.method
            .methods()
            .iter()
            .map(|&method| {
                let rs: Vec<&TrialResult> = self.of_method(method).collect();
                let n = rs.len() as f64;
                let mean = |f: &dyn Fn(&TrialResult) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
                Aggregate {
                    method,
                    point: self.point,
                    trials: rs.len(),
                    accuracy: mean(&|r| f64::from(u8::from(r.correct))),
                    mean_slots: mean(&|r| f64::from(r.slots_used)),
                    converged_rate: mean(&|r| f64::from(u8::from(r.converged))),
                }
            })
            .collect()
    }
}

/// Runs every (point, trial) of the sweep. Work is spread over the rayon pool;
/// the returned order does not depend on the pool size.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<PointResults>> {
    cfg.validate()?;
    let points = cfg.points();
    let mut out = Vec::with_capacity(points.len());
    for point in points {
        let ch = build_channels(cfg, point.antennas)?;
        let per_trial: Vec<Vec<TrialResult>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let seed = trial_seed(cfg.seed, t);
                Ok(run_trial_on(cfg, point, sample_scene(cfg, seed)?, &ch, seed)?.results)
            })
            .collect::<Result<_>>()?;
        let mut trials = Vec::with_capacity(cfg.trials * cfg.method.methods().len());
        for &method in cfg.method.methods() {
            for (t, results) in per_trial.iter().enumerate() {
                trials.extend(results.iter().filter(|r| r.method == method).map(|r| (t, r.clone())));
            }
        }
        out.push(PointResults { point, trials });
    }
    Ok(out)
}

/// Writes trial rows followed by the aggregate rows of each point.
pub fn write_csv<W: Write>(cfg: &ExperimentConfig, results: &[PointResults], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CSV_HEADER)?;
    let version = CSV_VERSION.to_string();
    for pr in results {
        let p_t = pr.point.power_dbm.to_string();
        let m = pr.point.antennas.to_string();
        for (t, r) in &pr.trials {
            let rect = r.truth;
            let mut row = vec![version.clone(), r.method.to_string(), p_t.clone(), m.clone(), t.to_string(), r.seed.to_string()];
            row.extend([rect.h_min, rect.h_max, rect.v_min, rect.v_max].map(|v| v.to_string()));
            row.extend(r.estimate.map(|v| v.to_string()));
            row.push(u8::from(r.correct).to_string());
            row.push(r.slots_used.to_string());
            row.push(u8::from(r.converged).to_string());
            w.write_record(&row)?;
        }
        for a in pr.aggregates(cfg) {
            let mut row = vec![
                version.clone(),
                a.method.to_string(),
                p_t.clone(),
                m.clone(),
                AGGREGATE_TAG.to_string(),
                cfg.seed.to_string(),
            ];
            row.extend(std::iter::repeat_n(String::new(), 8));
            row.push(a.accuracy.to_string());
            row.push(a.mean_slots.to_string());
            row.push(a.converged_rate.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Runs the sweep and writes its CSV to `path`.
pub fn sweep_to_path(cfg: &ExperimentConfig, path: &Path) -> Result<Vec<PointResults>> {
    cfg.validate()?;
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let results = run_sweep(cfg)?;
    write_csv(cfg, &results, std::io::BufWriter::new(file))?;
    Ok(results)
}
