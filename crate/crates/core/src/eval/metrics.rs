use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest source count for brute-force assignment.
pub const MAX_ASSIGNMENT: usize = 8;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

fn check_counts(truth: &[f64], est: &[f64]) -> Result<()> {
    if truth.len() != est.len() || truth.is_empty() {
        return Err(Error::shape(format!("{} true DOAs and {} estimates", truth.len(), est.len())));
    }
    if truth.len() > MAX_ASSIGNMENT {
        return Err(Error::Unsupported(format!("assignment over {} sources (at most {MAX_ASSIGNMENT})", truth.len())));
    }
    Ok(())
}

/// Per-speaker absolute errors under the minimum-sum pairing of estimates to
/// true DOAs. Among equal-cost pairings the first in enumeration order wins.
pub fn assigned_errors(truth: &[f64], est: &[f64]) -> Result<Vec<f64>> {
    check_counts(truth, est)?;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for perm in permutations(truth.len()) {
        let errs: Vec<f64> = truth.iter().zip(&perm).map(|(t, &j)| (t - est[j]).abs()).collect();
        let cost: f64 = errs.iter().sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, errs));
        }
    }
    Ok(best.expect("at least one permutation").1)
}

/// Mean absolute DOA error in degrees with optimal assignment.
pub fn mae(truth: &[f64], est: &[f64]) -> Result<f64> {
    let errs = assigned_errors(truth, est)?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Mean absolute error pairing `truth[i]` with `est[i]`.
pub fn mae_identity(truth: &[f64], est: &[f64]) -> Result<f64> {
    check_counts(truth, est)?;
    Ok(truth.iter().zip(est).map(|(t, e)| (t - e).abs()).sum::<f64>() / truth.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub room: String,
    pub rt60_s: f64,
    pub snr_db: f64,
    pub noise_type: String,
    pub distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub method: String,
    pub condition: Condition,
    pub true_doas: Vec<f64>,
    pub estimated_doas: Vec<f64>,
}

impl TrialResult {
    pub fn mae(&self) -> Result<f64> {
        mae(&self.true_doas, &self.estimated_doas)
    }

    /// Every speaker within `threshold` degrees under optimal assignment.
    pub fn is_accurate(&self, threshold: f64) -> Result<bool> {
        Ok(assigned_errors(&self.true_doas, &self.estimated_doas)?.iter().all(|&e| e <= threshold))
    }
}

/// Percentage of trials whose every speaker error is at most `threshold`.
pub fn accuracy(trials: &[TrialResult], threshold: f64) -> Result<f64> {
    if trials.is_empty() {
        return Err(Error::invalid("accuracy over zero trials"));
    }
    let mut hits = 0usize;
    for t in trials {
        hits += t.is_accurate(threshold)? as usize;
    }
    Ok(100.0 * hits as f64 / trials.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub condition: Condition,
    pub mae_deg: f64,
    pub acc_pct: f64,
    pub trials: usize,
}

pub const RESULTS_HEADER: &str = "method,room,rt60_s,snr_db,noise_type,distance_m,mae_deg,acc_pct,trials";

impl MetricsRow {
    pub fn from_trials(trials: &[TrialResult], threshold: f64) -> Result<Self> {
        let first = trials.first().ok_or_else(|| Error::invalid("metrics over zero trials"))?;
        let mut sum = 0.0;
        for t in trials {
            sum += t.mae()?;
        }
        Ok(Self {
            method: first.method.clone(),
            condition: first.condition.clone(),
            mae_deg: sum / trials.len() as f64,
            acc_pct: accuracy(trials, threshold)?,
            trials: trials.len(),
        })
    }

    pub fn csv_line(&self) -> String {
        let c = &self.condition;
        format!(
            "{},{},{},{},{},{},{:.4},{:.2},{}",
            self.method,
            c.room,
            c.rt60_s,
            c.snr_db,
            c.noise_type,
            c.distance_m,
            self.mae_deg,
            self.acc_pct,
            self.trials
        )
    }
}

pub fn results_csv(rows: &[MetricsRow]) -> String {
    let mut s = format!("{RESULTS_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_line());
    }
    s
}
