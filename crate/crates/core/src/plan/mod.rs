//! Structured plans: a dependency DAG of tool invocations.
//!
//! Plans arrive as dependency-annotated text (see [`parse_plan`]), are
//! validated into a [`StructuredPlan`], get the current request's parameters
//! injected ([`inject_params`]) and are run by [`execute`] in an order
//! consistent with their dependencies.

mod exec;
pub mod tools;
mod text;

pub use exec::{execute, ExecutionTrace, StepTrace, Tool, ToolRegistry};
pub use text::{parse_plan, serialize_plan};

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intent::Slot;

/// Where a step input comes from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputBinding {
    /// A request parameter, filled in by [`inject_params`].
    Slot(String),
    /// The named output of a step this step depends on.
    Output(String),
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    /// 1-based.
    pub index: usize,
    pub description: String,
    /// Container image tag; selects the tool in the registry.
    pub image: String,
    pub inputs: Vec<InputBinding>,
    pub deps: BTreeSet<usize>,
    pub output: String,
}

/// A validated plan. Steps are numbered `1..=n` in a topological order, so
/// every dependency points to a lower index, and exactly one step (the
/// terminal step) has no dependents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PlanDocument")]
pub struct StructuredPlan {
    steps: Vec<PlanStep>,
    required_slots: BTreeSet<String>,
}

/// Unvalidated JSON form of a plan.
#[derive(Deserialize)]
struct PlanDocument {
    steps: Vec<PlanStep>,
    #[serde(default)]
    required_slots: Option<BTreeSet<String>>,
}

impl TryFrom<PlanDocument> for StructuredPlan {
    type Error = Error;

    fn try_from(doc: PlanDocument) -> Result<Self> {
        let plan = StructuredPlan::new(doc.steps)?;
        if let Some(declared) = doc.required_slots {
            if declared != plan.required_slots {
                return Err(Error::InvalidInput(format!(
                    "declared required_slots {declared:?} differ from plan inputs {:?}",
                    plan.required_slots
                )));
            }
        }
        Ok(plan)
    }
}

impl StructuredPlan {
    /// Validates `steps` and renumbers them topologically when a step depends
    /// on a later one.
    pub fn new(steps: Vec<PlanStep>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidInput("plan has no steps".into()));
        }
        let mut by_index: BTreeMap<usize, &PlanStep> = BTreeMap::new();
        let mut outputs: HashMap<&str, usize> = HashMap::new();
        for step in &steps {
            if step.index == 0 {
                return Err(Error::InvalidInput("step indices are 1-based".into()));
            }
            if by_index.insert(step.index, step).is_some() {
                return Err(Error::InvalidInput(format!("duplicate step index {}", step.index)));
            }
            if step.output.trim().is_empty() {
                return Err(Error::InvalidInput(format!("step {} has no output name", step.index)));
            }
            if outputs.insert(step.output.as_str(), step.index).is_some() {
                return Err(Error::InvalidInput(format!("duplicate output name {:?}", step.output)));
            }
            if step.image.trim().is_empty() {
                return Err(Error::InvalidInput(format!("step {} has no image tag", step.index)));
            }
        }
        for step in &steps {
            for d in &step.deps {
                if !by_index.contains_key(d) {
                    return Err(Error::UnresolvedReference(format!(
                        "step {} depends on missing step {d}",
                        step.index
                    )));
                }
            }
        }
        if let Some(path) = find_cycle(&by_index) {
            return Err(Error::CyclicPlan { path });
        }
        for step in &steps {
            for input in &step.inputs {
                if let InputBinding::Output(name) = input {
                    match outputs.get(name.as_str()) {
                        Some(producer) if step.deps.contains(producer) => {}
                        Some(producer) => {
                            return Err(Error::UnresolvedReference(format!(
                                "step {} reads {name:?} from step {producer} without depending on it",
                                step.index
                            )))
                        }
                        None => {
                            return Err(Error::UnresolvedReference(format!(
                                "step {} reads unknown output {name:?}",
                                step.index
                            )))
                        }
                    }
                }
            }
        }
        let depended: BTreeSet<usize> = steps.iter().flat_map(|s| s.deps.iter().copied()).collect();
        let sinks: Vec<usize> = by_index.keys().copied().filter(|i| !depended.contains(i)).collect();
        if sinks.len() != 1 {
            return Err(Error::AmbiguousTerminal(sinks));
        }

        let order = topological_order(&by_index);
        let renumber: HashMap<usize, usize> =
            order.iter().enumerate().map(|(pos, &old)| (old, pos + 1)).collect();
        let steps: Vec<PlanStep> = order
            .iter()
            .map(|old| {
                let s = by_index[old];
                PlanStep {
                    index: renumber[old],
                    deps: s.deps.iter().map(|d| renumber[d]).collect(),
                    ..s.clone()
                }
            })
            .collect();
        let required_slots = steps
            .iter()
            .flat_map(|s| s.inputs.iter())
            .filter_map(|i| match i {
                InputBinding::Slot(role) => Some(role.clone()),
                _ => None,
            })
            .collect();
        Ok(Self {
            steps,
            required_slots,
        })
    }

    pub fn steps(&self) -> &[PlanStep] {
        &self.steps
    }

    pub fn step(&self, index: usize) -> Option<&PlanStep> {
        index.checked_sub(1).and_then(|i| self.steps.get(i))
    }

    pub fn required_slots(&self) -> &BTreeSet<String> {
        &self.required_slots
    }

    /// The unique step no other step depends on.
    pub fn terminal(&self) -> &PlanStep {
        // after renumbering the sink is always last
        self.steps.last().expect("validated plan is non-empty")
    }

    /// Dependency edges as `(dependent, dependency)` pairs.
    pub fn edges(&self) -> BTreeSet<(usize, usize)> {
        self.steps
            .iter()
            .flat_map(|s| s.deps.iter().map(move |&d| (s.index, d)))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::InvalidInput(format!("plan JSON: {e}")))
    }
}

/// Returns a dependency cycle as a path that starts and ends at the same
/// step, if one exists.
fn find_cycle(steps: &BTreeMap<usize, &PlanStep>) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark: HashMap<usize, Mark> = steps.keys().map(|&k| (k, Mark::New)).collect();
    for &root in steps.keys() {
        if mark[&root] != Mark::New {
            continue;
        }
        // iterative DFS keeping the active path
        let mut path: Vec<usize> = vec![root];
        let mut iters: Vec<std::collections::btree_set::Iter<'_, usize>> = vec![steps[&root].deps.iter()];
        mark.insert(root, Mark::Active);
        while let Some(it) = iters.last_mut() {
            match it.next() {
                Some(&next) => match mark[&next] {
                    Mark::Active => {
                        let pos = path.iter().position(|&p| p == next).unwrap();
                        let mut cycle = path[pos..].to_vec();
                        cycle.push(next);
                        return Some(cycle);
                    }
                    Mark::New => {
                        mark.insert(next, Mark::Active);
                        path.push(next);
                        iters.push(steps[&next].deps.iter());
                    }
                    Mark::Done => {}
                },
                None => {
                    let done = path.pop().unwrap();
                    mark.insert(done, Mark::Done);
                    iters.pop();
                }
            }
        }
    }
    None
}

/// Kahn's algorithm, smallest ready index first. Identity for plans whose
/// dependencies already point backwards.
fn topological_order(steps: &BTreeMap<usize, &PlanStep>) -> Vec<usize> {
    let mut pending: HashMap<usize, usize> = steps.iter().map(|(&k, s)| (k, s.deps.len())).collect();
    let mut dependents: HashMap<usize, Vec<usize>> = HashMap::new();
    for (&k, s) in steps {
        for &d in &s.deps {
            dependents.entry(d).or_default().push(k);
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        pending.iter().filter(|(_, &n)| n == 0).map(|(&k, _)| Reverse(k)).collect();
    let mut order = Vec::with_capacity(steps.len());
    while let Some(Reverse(k)) = ready.pop() {
        order.push(k);
        for &dep in dependents.get(&k).map(Vec::as_slice).unwrap_or(&[]) {
            let n = pending.get_mut(&dep).unwrap();
            *n -= 1;
            if *n == 0 {
                ready.push(Reverse(dep));
            }
        }
    }
    order
}

/// Step input after parameter injection.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolvedInput {
    Value(String),
    Output(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstantiatedStep {
    pub index: usize,
    pub description: String,
    pub image: String,
    pub inputs: Vec<ResolvedInput>,
    pub deps: BTreeSet<usize>,
    pub output: String,
}

/// A plan with every slot reference replaced by a concrete value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstantiatedPlan {
    pub steps: Vec<InstantiatedStep>,
}

impl InstantiatedPlan {
    pub fn step(&self, index: usize) -> Option<&InstantiatedStep> {
        index.checked_sub(1).and_then(|i| self.steps.get(i))
    }

    pub fn terminal(&self) -> &InstantiatedStep {
        self.steps.last().expect("instantiated plan is non-empty")
    }
}

/// Binds slot values to the plan's slot references. The first slot with a
/// given role wins.
pub fn inject_params(plan: &StructuredPlan, slots: &[Slot]) -> Result<InstantiatedPlan> {
    let mut values: HashMap<&str, &str> = HashMap::new();
    for s in slots {
        values.entry(s.role.as_str()).or_insert(s.value.as_str());
    }
    if let Some(missing) = plan.required_slots.iter().find(|r| !values.contains_key(r.as_str())) {
        return Err(Error::MissingParameter(missing.clone()));
    }
    let steps = plan
        .steps
        .iter()
        .map(|s| InstantiatedStep {
            index: s.index,
            description: s.description.clone(),
            image: s.image.clone(),
            inputs: s
                .inputs
                .iter()
                .map(|i| match i {
                    InputBinding::Slot(role) => ResolvedInput::Value(values[role.as_str()].to_string()),
                    InputBinding::Literal(v) => ResolvedInput::Value(v.clone()),
                    InputBinding::Output(name) => ResolvedInput::Output(name.clone()),
                })
                .collect(),
            deps: s.deps.clone(),
            output: s.output.clone(),
        })
        .collect();
    Ok(InstantiatedPlan { steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(index: usize, deps: &[usize], inputs: Vec<InputBinding>, output: &str) -> PlanStep {
        PlanStep {
            index,
            description: format!("step {index}"),
            image: "tool".into(),
            inputs,
            deps: deps.iter().copied().collect(),
            output: output.into(),
        }
    }

    #[test]
    fn two_cycle_detected() {
        let err = StructuredPlan::new(vec![step(1, &[2], vec![], "a"), step(2, &[1], vec![], "b")]).unwrap_err();
        match err {
            Error::CyclicPlan { path } => {
                assert_eq!(path.first(), path.last());
                assert_eq!(path.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_dependency_is_a_cycle() {
        let err = StructuredPlan::new(vec![step(1, &[1], vec![], "a")]).unwrap_err();
        assert!(matches!(err, Error::CyclicPlan { path } if path == [1, 1]));
    }

    #[test]
    fn forward_dependencies_are_renumbered() {
        let plan = StructuredPlan::new(vec![
            step(1, &[2], vec![InputBinding::Output("b".into())], "a"),
            step(2, &[], vec![InputBinding::Slot("x".into())], "b"),
        ])
        .unwrap();
        assert_eq!(plan.steps()[0].output, "b");
        assert_eq!(plan.steps()[1].output, "a");
        assert_eq!(plan.edges(), BTreeSet::from([(2, 1)]));
        assert_eq!(plan.terminal().output, "a");
    }

    #[test]
    fn dangling_references() {
        let missing_dep = StructuredPlan::new(vec![step(1, &[4], vec![], "a")]);
        assert!(matches!(missing_dep, Err(Error::UnresolvedReference(_))));
        let missing_output =
            StructuredPlan::new(vec![step(1, &[], vec![InputBinding::Output("zzz".into())], "a")]);
        assert!(matches!(missing_output, Err(Error::UnresolvedReference(_))));
        // output exists but producer is not a dependency
        let not_a_dep = StructuredPlan::new(vec![
            step(1, &[], vec![], "a"),
            step(2, &[1], vec![], "b"),
            step(3, &[2], vec![InputBinding::Output("a".into())], "c"),
        ]);
        assert!(matches!(not_a_dep, Err(Error::UnresolvedReference(_))));
    }

    #[test]
    fn multiple_sinks_rejected() {
        let err = StructuredPlan::new(vec![step(1, &[], vec![], "a"), step(2, &[], vec![], "b")]);
        assert!(matches!(err, Err(Error::AmbiguousTerminal(s)) if s == [1, 2]));
    }

    #[test]
    fn duplicate_outputs_rejected() {
        let err = StructuredPlan::new(vec![step(1, &[], vec![], "a"), step(2, &[1], vec![], "a")]);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn injection() {
        let plan = StructuredPlan::new(vec![
            step(1, &[], vec![InputBinding::Slot("time".into())], "date"),
            step(
                2,
                &[1],
                vec![
                    InputBinding::Slot("origin".into()),
                    InputBinding::Output("date".into()),
                    InputBinding::Literal("x".into()),
                ],
                "out",
            ),
        ])
        .unwrap();
        let slots = [Slot::new("origin", "Changsha", 0, 8), Slot::new("time", "tomorrow", 9, 17)];
        let inst = inject_params(&plan, &slots).unwrap();
        assert_eq!(
            inst.step(2).unwrap().inputs,
            [
                ResolvedInput::Value("Changsha".into()),
                ResolvedInput::Output("date".into()),
                ResolvedInput::Value("x".into())
            ]
        );
        let err = inject_params(&plan, &slots[..1]).unwrap_err();
        assert!(matches!(err, Error::MissingParameter(r) if r == "time"));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let plan = StructuredPlan::new(vec![
            step(1, &[], vec![InputBinding::Slot("q".into())], "a"),
            step(2, &[1], vec![InputBinding::Output("a".into())], "b"),
        ])
        .unwrap();
        let back = StructuredPlan::from_json(&plan.to_json()).unwrap();
        assert_eq!(back, plan);
        let tampered = plan.to_json().replace(r#""required_slots":["q"]"#, r#""required_slots":["z"]"#);
        assert!(StructuredPlan::from_json(&tampered).is_err());
        let cyclic = r#"{"steps":[{"index":1,"description":"","image":"t","inputs":[],"deps":[1],"output":"a"}]}"#;
        assert!(StructuredPlan::from_json(cyclic).is_err());
    }
}
