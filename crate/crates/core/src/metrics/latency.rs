use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Per-request overhead of the reuse mechanism, split by phase.
///
/// `other` covers vectorization, template extraction and cache admission; it
/// is derived as the remainder of the measured total, so the parts always sum
/// to `total`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    #[serde(with = "micros")]
    pub intent_classification: Duration,
    #[serde(with = "micros")]
    pub similarity_search: Duration,
    #[serde(with = "micros")]
    pub other: Duration,
    #[serde(with = "micros")]
    pub total: Duration,
}

impl LatencyBreakdown {
    pub fn from_measured(intent: Duration, search: Duration, total: Duration) -> Self {
        let total = total.max(intent + search);
        Self {
            intent_classification: intent,
            similarity_search: search,
            other: total - intent - search,
            total,
        }
    }

    /// Adds time spent outside `decide` (cache admission) to `other`.
    pub fn add_other(&mut self, extra: Duration) {
        self.other += extra;
        self.total += extra;
    }
}

mod micros {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_micros() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_micros(u64::deserialize(d)?))
    }
}
