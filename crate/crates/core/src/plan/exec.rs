use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use serde::Serialize;

use super::{InstantiatedPlan, ResolvedInput};
use crate::error::{Error, Result};

/// An in-process tool bound to a container image tag.
pub trait Tool: Send + Sync {
    fn call(&self, inputs: &[String]) -> std::result::Result<String, String>;
}

impl<F> Tool for F
where
    F: Fn(&[String]) -> std::result::Result<String, String> + Send + Sync,
{
    fn call(&self, inputs: &[String]) -> std::result::Result<String, String> {
        self(inputs)
    }
}

struct Registered {
    tool: Arc<dyn Tool>,
    /// Held while a serial tool runs.
    serial: Option<Arc<Mutex<()>>>,
}

/// Tools keyed by image tag.
#[derive(Default)]
pub struct ToolRegistry {
    tools: HashMap<String, Registered>,
}

impl std::fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut tags: Vec<&String> = self.tools.keys().collect();
        tags.sort();
        f.debug_struct("ToolRegistry").field("tags", &tags).finish()
    }
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tool that may run concurrently with itself.
    pub fn register(&mut self, tag: impl Into<String>, tool: impl Tool + 'static) -> &mut Self {
        self.tools.insert(
            tag.into(),
            Registered {
                tool: Arc::new(tool),
                serial: None,
            },
        );
        self
    }

    /// Registers a tool whose invocations must not overlap.
    pub fn register_serial(&mut self, tag: impl Into<String>, tool: impl Tool + 'static) -> &mut Self {
        self.tools.insert(
            tag.into(),
            Registered {
                tool: Arc::new(tool),
                serial: Some(Arc::new(Mutex::new(()))),
            },
        );
        self
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.tools.contains_key(tag)
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.tools.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepTrace {
    pub index: usize,
    pub image: String,
    pub inputs: Vec<String>,
    pub output: String,
    /// Offsets from the start of the run.
    pub start: Duration,
    pub end: Duration,
    /// Strictly increasing event counter across the run; a dependency's
    /// `end_seq` is always below its dependent's `start_seq`.
    pub start_seq: u64,
    pub end_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionTrace {
    /// In completion order.
    pub steps: Vec<StepTrace>,
    pub response: String,
}

impl ExecutionTrace {
    pub fn step(&self, index: usize) -> Option<&StepTrace> {
        self.steps.iter().find(|s| s.index == index)
    }

    /// True when every step started after all of its dependencies ended.
    pub fn respects(&self, plan: &InstantiatedPlan) -> bool {
        plan.steps.iter().all(|s| {
            let Some(t) = self.step(s.index) else { return false };
            s.deps.iter().all(|d| {
                self.step(*d)
                    .is_some_and(|dt| dt.end_seq < t.start_seq && dt.end <= t.start)
            })
        })
    }
}

struct Completion {
    position: usize,
    inputs: Vec<String>,
    result: std::result::Result<String, String>,
    start: Duration,
    end: Duration,
    start_seq: u64,
    end_seq: u64,
}

/// Runs the plan, launching each step on its own thread as soon as its
/// dependencies have finished. The terminal step's output is the response.
/// A failing step stops further scheduling; steps already running finish.
pub fn execute(plan: &InstantiatedPlan, tools: &ToolRegistry) -> Result<ExecutionTrace> {
    if let Some(step) = plan.steps.iter().find(|s| !tools.contains(&s.image)) {
        return Err(Error::UnknownTool(step.image.clone()));
    }
    let n = plan.steps.len();
    let position: HashMap<usize, usize> = plan.steps.iter().enumerate().map(|(p, s)| (s.index, p)).collect();
    let mut pending: Vec<usize> = plan.steps.iter().map(|s| s.deps.len()).collect();
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (p, s) in plan.steps.iter().enumerate() {
        for d in &s.deps {
            dependents[position[d]].push(p);
        }
    }

    let origin = Instant::now();
    let seq = AtomicU64::new(0);
    let mut outputs: HashMap<&str, String> = HashMap::new();
    let mut trace = Vec::with_capacity(n);
    let mut failure: Option<Error> = None;

    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<Completion>();
        let mut ready: Vec<usize> = (0..n).filter(|&p| pending[p] == 0).collect();
        let mut in_flight = 0usize;

        loop {
            if failure.is_none() {
                for p in ready.drain(..) {
                    let step = &plan.steps[p];
                    let inputs: Vec<String> = step
                        .inputs
                        .iter()
                        .map(|i| match i {
                            ResolvedInput::Value(v) => v.clone(),
                            ResolvedInput::Output(name) => outputs[name.as_str()].clone(),
                        })
                        .collect();
                    let registered = &tools.tools[&step.image];
                    let tool = Arc::clone(&registered.tool);
                    let serial = registered.serial.clone();
                    let tx = tx.clone();
                    let seq = &seq;
                    in_flight += 1;
                    scope.spawn(move || {
                        let _guard = serial.as_ref().map(|m| m.lock());
                        let start = origin.elapsed();
                        let start_seq = seq.fetch_add(1, Ordering::SeqCst);
                        let result = tool.call(&inputs);
                        let end_seq = seq.fetch_add(1, Ordering::SeqCst);
                        let end = origin.elapsed();
                        let _ = tx.send(Completion {
                            position: p,
                            inputs,
                            result,
                            start,
                            end,
                            start_seq,
                            end_seq,
                        });
                    });
                }
            }
            if in_flight == 0 {
                break;
            }
            let done = rx.recv().expect("worker threads hold a sender");
            in_flight -= 1;
            let step = &plan.steps[done.position];
            match done.result {
                Ok(output) => {
                    outputs.insert(step.output.as_str(), output.clone());
                    trace.push(StepTrace {
                        index: step.index,
                        image: step.image.clone(),
                        inputs: done.inputs,
                        output,
                        start: done.start,
                        end: done.end,
                        start_seq: done.start_seq,
                        end_seq: done.end_seq,
                    });
                    for &d in &dependents[done.position] {
                        pending[d] -= 1;
                        if pending[d] == 0 {
                            ready.push(d);
                        }
                    }
                }
                Err(cause) => {
                    if failure.is_none() {
                        failure = Some(Error::StepFailed {
                            index: step.index,
                            cause,
                        });
                    }
                }
            }
        }
    });

    if let Some(e) = failure {
        return Err(e);
    }
    let response = outputs
        .remove(plan.terminal().output.as_str())
        .expect("terminal step ran");
    Ok(ExecutionTrace { steps: trace, response })
}
