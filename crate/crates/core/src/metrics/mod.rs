//! Evaluation: confusion counts, scores, latency, the gain model and the
//! reuse-equivalence check.

mod confusion;
mod eval;
mod gain;
mod latency;
mod reuse;

pub use confusion::{score, Cell, ConfusionCounts, Scores};
pub use eval::{
    gold_intent, mean_latency, nesting_violations, write_log_csv, write_summary_csv, Backends, EvalReport,
    Evaluator, LogRow, SummaryRow,
};
pub use gain::{gain_model, reduction, GainReport};
pub use latency::LatencyBreakdown;
pub use reuse::{measure_reuse_equivalence, reuse_pairs, ReusePair, ReuseReport, Trial};
