use std::time::Duration;

use super::{GeneratedPlan, Planner, DEFAULT_PLAN_LATENCY};
use crate::error::Result;
use crate::intent::IntentResult;

/// Seven-step travel booking plan: date lookup, weather, flight and train
/// queries, price comparison, schedule lookup and a final recommendation.
pub const BOOKING_PLAN: &str = "\
1 | Date Query | query_date | role:time | No Dependency | Output: Date
2 | Weather Query | query_weather | role:destination, out:Date | Dep: 1 | Output: Weather
3 | Flight Query | query_flight | role:origin, role:destination, out:Date | Dep: 1 | Output: FlightInfo
4 | Train Query | query_train | role:origin, role:destination, out:Date | Dep: 1 | Output: TrainInfo
5 | Price Comparison | compare_price | out:FlightInfo, out:TrainInfo | Dep: 3, 4 | Output: Comparison
6 | Schedule Query | query_schedule | out:Date | Dep: 1 | Output: PersonalSchedule
7 | Preference Query (Recommend Travel Plan) | call_prefer | out:Weather, out:Comparison, out:PersonalSchedule, lit:Recommend a travel plan | Dep: 2, 5, 6 | Output: Recommendation
";

/// Deterministic planner keyed by (intent, slot roles).
#[derive(Debug, Clone)]
pub struct StubPlanner {
    latency: Duration,
}

impl Default for StubPlanner {
    fn default() -> Self {
        Self {
            latency: DEFAULT_PLAN_LATENCY,
        }
    }
}

fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if matches!(c, '\\' | '|' | ',') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

fn title_case(s: &str) -> String {
    let lower = s.to_ascii_lowercase();
    let mut chars = lower.chars();
    match chars.next() {
        Some(c) => c.to_ascii_uppercase().to_string() + chars.as_str(),
        None => String::new(),
    }
}

impl StubPlanner {
    pub fn new(latency: Duration) -> Self {
        Self { latency }
    }

    pub fn plan_text(&self, request: &str, intent: &IntentResult) -> String {
        if intent.category.is_undefined() {
            return format!(
                "1 | Echo request | echo | lit:{} | No Dependency | Output: Reply\n",
                escape_literal(&crate::text::canonicalize(request))
            );
        }
        let mut roles: Vec<&str> = intent.slots.iter().map(|s| s.role.as_str()).collect();
        roles.sort_unstable();
        roles.dedup();

        let is_travel = ["destination", "origin", "time"].iter().all(|r| roles.contains(r));
        if intent.category.as_str() == "BOOK" && is_travel {
            return BOOKING_PLAN.to_string();
        }

        let name = intent.category.as_str();
        let params = if roles.is_empty() {
            format!("lit:{name}")
        } else {
            roles.iter().map(|r| format!("role:{r}")).collect::<Vec<_>>().join(", ")
        };
        format!(
            "1 | Resolve parameters | resolve_params | {params} | No Dependency | Output: Params\n\
             2 | {title} service call | call_service | lit:{name}, out:Params | Dep: 1 | Output: ServiceResult\n\
             3 | Compose reply | compose_reply | out:ServiceResult, lit:Summarize the result for the user | Dep: 2 | Output: Reply\n",
            title = title_case(name),
        )
    }
}

impl Planner for StubPlanner {
    fn generate_plan(&self, request: &str, intent: &IntentResult) -> Result<GeneratedPlan> {
        Ok(GeneratedPlan {
            plan_text: self.plan_text(request, intent),
            latency: self.latency,
            accounted: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intent::{IntentCategory, Slot};
    use crate::plan::parse_plan;

    fn result(category: &str, roles: &[&str]) -> IntentResult {
        IntentResult {
            category: IntentCategory::new(category).unwrap(),
            slots: roles.iter().map(|r| Slot::new(*r, "x", 0, 1)).collect(),
            confidence: 1.0,
        }
    }

    #[test]
    fn booking_intent_gets_seven_steps() {
        let p = StubPlanner::default();
        let g = p
            .generate_plan("Book a ticket", &result("BOOK", &["origin", "destination", "time"]))
            .unwrap();
        assert_eq!(g.plan_text, BOOKING_PLAN);
        assert_eq!(g.latency, Duration::from_millis(31_800));
        assert!(g.accounted);
        assert_eq!(parse_plan(&g.plan_text).unwrap().steps().len(), 7);
    }

    #[test]
    fn undefined_gets_echo() {
        let p = StubPlanner::default();
        let g = p.generate_plan("tell me, a | joke", &IntentResult::undefined()).unwrap();
        let plan = parse_plan(&g.plan_text).unwrap();
        assert_eq!(plan.steps().len(), 1);
        assert!(plan.steps()[0].deps.is_empty());
        assert_eq!(
            plan.steps()[0].inputs,
            [crate::plan::InputBinding::Literal("tell me, a | joke".into())]
        );
    }

    #[test]
    fn deterministic_per_intent_and_roles() {
        let p = StubPlanner::default();
        let a = p.generate_plan("Call Alice", &result("CALL", &["contact"])).unwrap();
        let b = p.generate_plan("Call Bob now", &result("CALL", &["contact"])).unwrap();
        assert_eq!(a.plan_text, b.plan_text);
        let plan = parse_plan(&a.plan_text).unwrap();
        assert_eq!(plan.required_slots().iter().collect::<Vec<_>>(), ["contact"]);
        let none = p.generate_plan("Open it", &result("LAUNCH", &[])).unwrap();
        assert!(parse_plan(&none.plan_text).unwrap().required_slots().is_empty());
    }
}
