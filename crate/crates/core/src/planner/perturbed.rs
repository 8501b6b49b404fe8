use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GeneratedPlan, Planner};
use crate::error::Result;
use crate::intent::IntentResult;
use crate::plan::{parse_plan, serialize_plan, InputBinding, PlanStep, StructuredPlan};

const REWORDINGS: &[&str] = &[
    "in other words",
    "put differently",
    "with alternative phrasing",
    "restated",
];

/// Wraps a planner and, with probability `rate` per call, rewords the final
/// step's instruction literal. A reworded instruction reaches the terminal
/// tool, so the response changes, the way a re-generated LLM plan can drift
/// from the cached one.
pub struct PerturbedPlanner<P> {
    inner: P,
    rate: f64,
    rng: Mutex<ChaCha8Rng>,
}

impl<P: Planner> PerturbedPlanner<P> {
    pub fn new(inner: P, rate: f64, seed: u64) -> Self {
        Self {
            inner,
            rate: rate.clamp(0.0, 1.0),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    fn reword(plan: &StructuredPlan, variant: &str) -> Result<StructuredPlan> {
        let mut steps: Vec<PlanStep> = plan.steps().to_vec();
        let last = steps.last_mut().expect("validated plan is non-empty");
        last.description = format!("{} ({variant})", last.description);
        match last.inputs.iter_mut().rev().find_map(|i| match i {
            InputBinding::Literal(v) => Some(v),
            _ => None,
        }) {
            Some(lit) => *lit = format!("{lit}, {variant}"),
            None => last.inputs.push(InputBinding::Literal(variant.to_string())),
        }
        StructuredPlan::new(steps)
    }
}

impl<P: Planner> Planner for PerturbedPlanner<P> {
    fn generate_plan(&self, request: &str, intent: &IntentResult) -> Result<GeneratedPlan> {
        let mut generated = self.inner.generate_plan(request, intent)?;
        let draw = {
            let mut rng = self.rng.lock();
            let hit = rng.random::<f64>() < self.rate;
            hit.then(|| REWORDINGS[rng.random_range(0..REWORDINGS.len())])
        };
        if let Some(variant) = draw {
            let plan = parse_plan(&generated.plan_text)?;
            generated.plan_text = serialize_plan(&Self::reword(&plan, variant)?);
        }
        Ok(generated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::StubPlanner;

    #[test]
    fn rate_bounds() {
        let intent = IntentResult::undefined();
        let never = PerturbedPlanner::new(StubPlanner::default(), 0.0, 1);
        let always = PerturbedPlanner::new(StubPlanner::default(), 1.0, 1);
        let base = StubPlanner::default().plan_text("hello", &intent);
        for _ in 0..10 {
            assert_eq!(never.generate_plan("hello", &intent).unwrap().plan_text, base);
            let changed = always.generate_plan("hello", &intent).unwrap().plan_text;
            assert_ne!(changed, base);
            parse_plan(&changed).unwrap();
        }
    }

    #[test]
    fn seeded_sequence_is_reproducible() {
        let intent = IntentResult::undefined();
        let run = || {
            let p = PerturbedPlanner::new(StubPlanner::default(), 0.3, 9);
            (0..50)
                .map(|_| p.generate_plan("x", &intent).unwrap().plan_text)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
