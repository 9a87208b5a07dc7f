//! Timeline, boundary and trial-level evaluation metrics.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::planner::likert_mean;
use crate::scenegraph::{graph_equal, GraphTimeline};

/// Fraction of frames whose predicted graph equals the reference graph.
pub fn gra(pred: &GraphTimeline, gt: &GraphTimeline, cfg: &AnalysisConfig) -> Result<f64> {
    if pred.graphs.len() != gt.graphs.len() {
        return Err(Error::LengthMismatch { left: pred.graphs.len(), right: gt.graphs.len() });
    }
    if gt.graphs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let equal = pred.graphs.iter().zip(&gt.graphs).filter(|(p, g)| graph_equal(p, g, cfg.pos_tol)).count();
    Ok(equal as f64 / gt.graphs.len() as f64)
}

/// Fraction of reference boundaries with any predicted boundary within `tol`.
/// A predicted boundary may serve several reference boundaries.
pub fn tsa(pred: &[f64], gt: &[f64], tol: f64) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = gt.iter().filter(|&&g| pred.iter().any(|&p| (p - g).abs() <= tol)).count();
    Ok(hits as f64 / gt.len() as f64)
}

/// Like [`tsa`] but each predicted boundary matches at most one reference
/// boundary, assigned greedily by smallest gap.
pub fn tsa_one_to_one(pred: &[f64], gt: &[f64], tol: f64) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &g) in gt.iter().enumerate() {
        for (j, &p) in pred.iter().enumerate() {
            let d = (p - g).abs();
            if d <= tol {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut hits = 0;
    for (_, i, j) in pairs {
        if !gt_used[i] && !pred_used[j] {
            gt_used[i] = true;
            pred_used[j] = true;
            hits += 1;
        }
    }
    Ok(hits as f64 / gt.len() as f64)
}

pub fn success_rate(successes: usize, attempts: usize) -> Result<f64> {
    if attempts == 0 {
        return Err(Error::ZeroAttempts);
    }
    Ok(successes as f64 / attempts as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    pub pos: f64,
    pub ang: f64,
    pub combined: f64,
}

pub fn pose_error_6d(p_est: [f64; 3], p_gt: [f64; 3], theta_err: f64, lambda: f64) -> PoseError {
    let pos = p_est.iter().zip(&p_gt).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let ang = theta_err.abs();
    PoseError { pos, ang, combined: pos + lambda * ang }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementRecord {
    pub p_est: [f64; 3],
    pub p_gt: [f64; 3],
    pub theta_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(default)]
    pub task: String,
    pub grasp_attempts: usize,
    pub grasp_successes: usize,
    pub place_attempts: usize,
    pub place_successes: usize,
    #[serde(default)]
    pub placements: Vec<PlacementRecord>,
    pub success: bool,
    /// The trial executed a policy carried over from another demonstration.
    #[serde(default)]
    pub reused_policy: bool,
    /// Instruction-compliance ratings, one per rater.
    #[serde(default)]
    pub compliance_ratings: Vec<f64>,
    /// Bimanual coordination ratings, one per rater.
    #[serde(default)]
    pub coordination_ratings: Vec<f64>,
}

impl TrialRecord {
    pub fn validate(&self) -> Result<()> {
        if self.grasp_successes > self.grasp_attempts || self.place_successes > self.place_attempts {
            return Err(Error::InvalidConfig(format!("trial '{}' has more successes than attempts", self.task)));
        }
        if self.placements.iter().any(|p| p.theta_err < 0.0 || !p.theta_err.is_finite()) {
            return Err(Error::InvalidConfig(format!("trial '{}' has a negative angular error", self.task)));
        }
        Ok(())
    }
}

/// Reads one trial record per non-blank line.
pub fn load_trials<R: BufRead>(reader: R) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrialRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub gsr: Option<f64>,
    pub psr: Option<f64>,
    pub pos_error_m: Option<f64>,
    pub ang_error_rad: Option<f64>,
    pub ang_error_deg: Option<f64>,
    pub combined_error: Option<f64>,
    pub ics: Option<f64>,
    pub tsr: Option<f64>,
    pub bcs: Option<f64>,
    /// Successes among trials that reused a policy, over those trials.
    pub ptr: Option<f64>,
}

fn nonempty_ratings(trials: &[&TrialRecord], pick: impl Fn(&TrialRecord) -> &Vec<f64>) -> Result<Option<f64>> {
    let rows: Vec<Vec<f64>> = trials.iter().map(|t| pick(t).clone()).filter(|r| !r.is_empty()).collect();
    if rows.is_empty() {
        return Ok(None);
    }
    likert_mean(&rows, 5.0).map(Some)
}

pub fn summarize_trials(trials: &[&TrialRecord], lambda: f64) -> Result<TrialSummary> {
    if trials.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum = |f: fn(&TrialRecord) -> usize| trials.iter().map(|t| f(t)).sum::<usize>();
    let ratio = |s: usize, a: usize| if a == 0 { None } else { success_rate(s, a).ok() };

    let errors: Vec<PoseError> = trials
        .iter()
        .flat_map(|t| &t.placements)
        .map(|p| pose_error_6d(p.p_est, p.p_gt, p.theta_err, lambda))
        .collect();
    let mean = |f: fn(&PoseError) -> f64| {
        (!errors.is_empty()).then(|| errors.iter().map(f).sum::<f64>() / errors.len() as f64)
    };
    let ang = mean(|e| e.ang);

    let reused: Vec<&&TrialRecord> = trials.iter().filter(|t| t.reused_policy).collect();
    Ok(TrialSummary {
        trials: trials.len(),
        gsr: ratio(sum(|t| t.grasp_successes), sum(|t| t.grasp_attempts)),
        psr: ratio(sum(|t| t.place_successes), sum(|t| t.place_attempts)),
        pos_error_m: mean(|e| e.pos),
        ang_error_rad: ang,
        ang_error_deg: ang.map(f64::to_degrees),
        combined_error: mean(|e| e.combined),
        ics: nonempty_ratings(trials, |t| &t.compliance_ratings)?,
        tsr: ratio(trials.iter().filter(|t| t.success).count(), trials.len()),
        bcs: nonempty_ratings(trials, |t| &t.coordination_ratings)?,
        ptr: ratio(reused.iter().filter(|t| t.success).count(), reused.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub per_task: Vec<(String, TrialSummary)>,
    /// Unweighted mean of the per-task values.
    pub overall: TrialSummary,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Per-task summaries, in order of first appearance, and their column means.
pub fn trial_report(trials: &[TrialRecord], lambda: f64) -> Result<TrialReport> {
    let mut tasks: Vec<&str> = Vec::new();
    for t in trials {
        if !tasks.contains(&t.task.as_str()) {
            tasks.push(&t.task);
        }
    }
    let mut per_task = Vec::new();
    for task in tasks {
        let rows: Vec<&TrialRecord> = trials.iter().filter(|t| t.task == task).collect();
        per_task.push((task.to_string(), summarize_trials(&rows, lambda)?));
    }
    if per_task.is_empty() {
        return Err(Error::EmptyInput);
    }
    let col = |f: fn(&TrialSummary) -> Option<f64>| mean_of(per_task.iter().map(|(_, s)| f(s)));
    let overall = TrialSummary {
        trials: trials.len(),
        gsr: col(|s| s.gsr),
        psr: col(|s| s.psr),
        pos_error_m: col(|s| s.pos_error_m),
        ang_error_rad: col(|s| s.ang_error_rad),
        ang_error_deg: col(|s| s.ang_error_deg),
        combined_error: col(|s| s.combined_error),
        ics: col(|s| s.ics),
        tsr: col(|s| s.tsr),
        bcs: col(|s| s.bcs),
        ptr: col(|s| s.ptr),
    };
    Ok(TrialReport { per_task, overall })
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, sd, n })
    }
}
