use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One executed foothold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub index: usize,
    pub leg: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub chunk: usize,
}

/// Outcome of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: Option<u64>,
    pub success: bool,
    /// Stage and message of the error that stopped the run, if any.
    pub failure: Option<String>,
    /// Straight-line start-to-goal distance over total trajectory duration (m/s).
    pub traversal_speed: f64,
    pub duration: f64,
    /// Distance between the final CoG and the goal (m).
    pub goal_error: f64,
    /// Smallest ZMP slack over all constraint samples (m).
    pub min_zmp_slack: f64,
    /// Constraint samples whose slack is below the tolerance.
    pub zmp_violations: usize,
    /// Smallest ZMP slack seen at the control ticks (m), between samples included.
    pub min_tick_zmp_slack: f64,
    pub max_junction_residual: f64,
    pub max_torque: f64,
    /// Largest virtual-model wrench norm.
    pub max_wrench: f64,
    /// Largest deviation of the reference acceleration from the planned one plus
    /// the composite-inertia response to the wrench.
    pub max_reference_error: f64,
    pub quad_phase_count: usize,
    pub replans: usize,
    pub chunks: usize,
    pub ticks: usize,
    pub steps: Vec<StepLog>,
}

impl RunReport {
    pub fn empty(scenario: &str, seed: Option<u64>) -> Self {
        Self {
            scenario: scenario.to_string(),
            seed,
            success: false,
            failure: None,
            traversal_speed: 0.0,
            duration: 0.0,
            goal_error: f64::INFINITY,
            min_zmp_slack: f64::INFINITY,
            zmp_violations: 0,
            min_tick_zmp_slack: f64::INFINITY,
            max_junction_residual: 0.0,
            max_torque: 0.0,
            max_wrench: 0.0,
            max_reference_error: 0.0,
            quad_phase_count: 0,
            replans: 0,
            chunks: 0,
            ticks: 0,
            steps: Vec::new(),
        }
    }

    /// JSON text; non-finite numbers are written as `null`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        // Infinite slacks and errors round-trip through null.
        let mut value = value;
        if let Some(obj) = value.as_object_mut() {
            for key in ["goal_error", "min_zmp_slack", "min_tick_zmp_slack"] {
                if obj.get(key).is_some_and(|v| v.is_null()) {
                    obj.insert(key.into(), serde_json::json!(f64::MAX));
                }
            }
        }
        let mut report: RunReport = serde_json::from_value(value)?;
        for v in [&mut report.goal_error, &mut report.min_zmp_slack, &mut report.min_tick_zmp_slack] {
            if *v == f64::MAX {
                *v = f64::INFINITY;
            }
        }
        Ok(report)
    }
}

/// Per-scenario aggregate of several runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub trials: usize,
    pub successes: usize,
    /// Percent of successful trials.
    pub success_rate: f64,
    /// Mean traversal speed of successful trials (cm/s).
    pub mean_speed_cm_s: f64,
    pub min_zmp_slack: f64,
    pub quad_phases: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    /// Fixed-width table: scenario, trials, success rate, speed, slack, quad phases.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<18} {:>6} {:>10} {:>12} {:>12} {:>8}\n",
            "scenario", "trials", "success%", "speed[cm/s]", "min_slack", "quads"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<18} {:>6} {:>10.1} {:>12.2} {:>12.4} {:>8.1}\n",
                r.scenario, r.trials, r.success_rate, r.mean_speed_cm_s, r.min_zmp_slack, r.quad_phases
            ));
        }
        out
    }
}

/// Group reports by scenario, in name order.
pub fn summarize(reports: &[RunReport]) -> Summary {
    let mut groups: BTreeMap<&str, Vec<&RunReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(r.scenario.as_str()).or_default().push(r);
    }
    let rows = groups
        .into_iter()
        .map(|(name, runs)| {
            let ok: Vec<&&RunReport> = runs.iter().filter(|r| r.success).collect();
            let mean_speed = if ok.is_empty() {
                0.0
            } else {
                100.0 * ok.iter().map(|r| r.traversal_speed).sum::<f64>() / ok.len() as f64
            };
            SummaryRow {
                scenario: name.to_string(),
                trials: runs.len(),
                successes: ok.len(),
                success_rate: 100.0 * ok.len() as f64 / runs.len() as f64,
                mean_speed_cm_s: mean_speed,
                min_zmp_slack: runs.iter().map(|r| r.min_zmp_slack).fold(f64::INFINITY, f64::min),
                quad_phases: runs.iter().map(|r| r.quad_phase_count as f64).sum::<f64>() / runs.len() as f64,
            }
        })
        .collect();
    Summary { rows }
}
