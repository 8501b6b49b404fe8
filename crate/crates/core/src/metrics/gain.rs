//! Analytical end-to-end latency of serving a request stream.
//!
//! Every request pays the mechanism overhead `t_mech`; every request that is
//! not a true positive also pays a full plan generation `t_plan`.

use serde::Serialize;

use crate::error::{Error, Result};

/// `n_requests · t_mech + n_non_tp · t_plan`, in the unit of the inputs.
pub fn gain_model(n_requests: u64, n_non_tp: u64, t_plan: f64, t_mech: f64) -> Result<f64> {
    if !(t_plan >= 0.0 && t_mech >= 0.0 && t_plan.is_finite() && t_mech.is_finite()) {
        return Err(Error::InvalidInput("latencies must be finite and non-negative".into()));
    }
    if n_non_tp > n_requests {
        return Err(Error::InvalidInput(format!(
            "{n_non_tp} non-TP requests exceed {n_requests} requests"
        )));
    }
    Ok(n_requests as f64 * t_mech + n_non_tp as f64 * t_plan)
}

/// Fractional saving of `total` against `baseline`.
pub fn reduction(total: f64, baseline: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        1.0 - total / baseline
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainReport {
    /// Seconds spent on the mechanism itself.
    pub mechanism: f64,
    /// Seconds spent generating plans.
    pub planning: f64,
    pub total: f64,
    /// Every request generates a plan, no mechanism.
    pub no_reuse: f64,
    pub reduction_vs_no_reuse: f64,
}

impl GainReport {
    pub fn compute(n_requests: u64, n_non_tp: u64, t_plan: f64, t_mech: f64) -> Result<Self> {
        let total = gain_model(n_requests, n_non_tp, t_plan, t_mech)?;
        let no_reuse = gain_model(n_requests, n_requests, t_plan, 0.0)?;
        Ok(Self {
            mechanism: n_requests as f64 * t_mech,
            planning: n_non_tp as f64 * t_plan,
            total,
            no_reuse,
            reduction_vs_no_reuse: reduction(total, no_reuse),
        })
    }
}
