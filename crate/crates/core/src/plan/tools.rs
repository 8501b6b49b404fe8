//! Deterministic in-process tools for the image tags the stub planner emits.

use super::ToolRegistry;

/// Image tags used by the stub planner's plans.
pub const BUILTIN_TAGS: &[&str] = &[
    "query_date",
    "query_weather",
    "query_flight",
    "query_train",
    "compare_price",
    "query_schedule",
    "call_prefer",
    "resolve_params",
    "call_service",
    "compose_reply",
    "echo",
];

/// Named behaviours a config file can bind an image tag to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinTool {
    /// `tag(input1; input2; ...)`
    Format,
    /// First input unchanged.
    Echo,
    /// Inputs joined by a space.
    Concat,
}

impl BuiltinTool {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "format" => Some(Self::Format),
            "echo" => Some(Self::Echo),
            "concat" => Some(Self::Concat),
            _ => None,
        }
    }

    pub fn register(self, registry: &mut ToolRegistry, tag: &str) {
        let t = tag.to_string();
        match self {
            Self::Format => registry.register(tag, move |inputs: &[String]| {
                Ok(format!("{t}({})", inputs.join("; ")))
            }),
            Self::Echo => registry.register(tag, |inputs: &[String]| {
                Ok(inputs.first().cloned().unwrap_or_default())
            }),
            Self::Concat => registry.register(tag, |inputs: &[String]| Ok(inputs.join(" "))),
        };
    }
}

/// Registry with a deterministic tool for every builtin tag.
pub fn builtin_registry() -> ToolRegistry {
    let mut reg = ToolRegistry::new();
    for tag in BUILTIN_TAGS {
        let kind = if *tag == "echo" {
            BuiltinTool::Echo
        } else {
            BuiltinTool::Format
        };
        kind.register(&mut reg, tag);
    }
    reg
}
