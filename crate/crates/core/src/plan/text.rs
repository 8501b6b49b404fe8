//! Dependency-annotated plan text.
//!
//! One step per line, six `|`-separated fields:
//!
//! ```text
//! 1 | Date Query   | query_date   | role:time                          | No Dependency | Output: Date
//! 3 | Flight Query | query_flight | role:origin, role:destination, out:Date | Dep: 1   | Output: FlightInfo
//! ```
//!
//! Inputs are `role:NAME` (request parameter), `out:NAME` (output of a
//! dependency) or `lit:VALUE`, comma-separated; `-` or nothing means no
//! inputs. The dependency field is `No Dependency` or `Dep: i[, j...]`
//! (a `Step` prefix on indices is accepted). `\` escapes `|`, `,` and `\`.
//! Blank lines and lines starting with `#` are skipped.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{InputBinding, PlanStep, StructuredPlan};
use crate::error::{Error, Result};

fn parse_error(line: usize, column: usize, expected: &str) -> Error {
    Error::Parse {
        line,
        column,
        expected: expected.to_string(),
    }
}

/// A piece of a line with the 1-based column where it starts.
struct Field {
    text: String,
    column: usize,
}

/// Splits on unescaped `sep`, keeping escapes intact for the next level.
fn split_escaped(s: &str, sep: char, base_column: usize) -> Vec<Field> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut start = base_column;
    let mut escaped = false;
    for (i, c) in s.chars().enumerate() {
        if escaped {
            cur.push(c);
            escaped = false;
        } else if c == '\\' {
            cur.push(c);
            escaped = true;
        } else if c == sep {
            out.push(Field {
                text: std::mem::take(&mut cur),
                column: start,
            });
            start = base_column + i + 1;
        } else {
            cur.push(c);
        }
    }
    out.push(Field { text: cur, column: start });
    out
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(n) = chars.next() {
                out.push(n);
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn escape(s: &str, specials: &[char]) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c == '\\' || specials.contains(&c) {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

/// Column of the first non-space character of a field.
fn trimmed_column(f: &Field) -> usize {
    f.column + f.text.chars().take_while(|c| c.is_whitespace()).count()
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    let head = s.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &s[prefix.len()..])
}

fn parse_index(raw: &str, line: usize, column: usize) -> Result<usize> {
    let t = raw.trim();
    let t = strip_prefix_ci(t, "step").map(str::trim_start).unwrap_or(t);
    match t.parse::<usize>() {
        Ok(i) if i >= 1 => Ok(i),
        _ => Err(parse_error(line, column, "positive step index")),
    }
}

fn parse_inputs(field: &Field, line: usize) -> Result<Vec<InputBinding>> {
    let t = field.text.trim();
    if t.is_empty() || t == "-" {
        return Ok(Vec::new());
    }
    let mut inputs = Vec::new();
    for item in split_escaped(&field.text, ',', field.column) {
        let column = trimmed_column(&item);
        let raw = item.text.trim();
        let (kind, value) = raw
            .split_once(':')
            .ok_or_else(|| parse_error(line, column, "input of the form role:NAME, out:NAME or lit:VALUE"))?;
        let value = unescape(value.trim());
        let binding = match kind.trim() {
            "role" | "out" if value.is_empty() => {
                return Err(parse_error(line, column, "non-empty input name"));
            }
            "role" => InputBinding::Slot(value),
            "out" => InputBinding::Output(value),
            "lit" => InputBinding::Literal(value),
            _ => return Err(parse_error(line, column, "input kind role, out or lit")),
        };
        inputs.push(binding);
    }
    Ok(inputs)
}

fn parse_deps(field: &Field, line: usize) -> Result<BTreeSet<usize>> {
    let t = field.text.trim();
    let column = trimmed_column(field);
    if t.eq_ignore_ascii_case("no dependency") {
        return Ok(BTreeSet::new());
    }
    let list = strip_prefix_ci(t, "dep:")
        .ok_or_else(|| parse_error(line, column, "\"No Dependency\" or \"Dep: i[, j...]\""))?;
    let mut deps = BTreeSet::new();
    for part in list.split(',') {
        let idx = parse_index(part, line, column)?;
        deps.insert(idx);
    }
    Ok(deps)
}

/// Parses and validates annotated plan text.
pub fn parse_plan(text: &str) -> Result<StructuredPlan> {
    let mut steps = Vec::new();
    for (n, raw_line) in text.lines().enumerate() {
        let line = n + 1;
        if raw_line.trim().is_empty() || raw_line.trim_start().starts_with('#') {
            continue;
        }
        let fields = split_escaped(raw_line, '|', 1);
        if fields.len() != 6 {
            let column = fields.last().map_or(1, |f| f.column);
            return Err(parse_error(line, column, "6 fields separated by '|'"));
        }
        let index = parse_index(&fields[0].text, line, trimmed_column(&fields[0]))?;
        let description = unescape(fields[1].text.trim());
        let image = unescape(fields[2].text.trim());
        if image.is_empty() {
            return Err(parse_error(line, trimmed_column(&fields[2]), "container image tag"));
        }
        let inputs = parse_inputs(&fields[3], line)?;
        let deps = parse_deps(&fields[4], line)?;
        let out_raw = fields[5].text.trim();
        let output = unescape(strip_prefix_ci(out_raw, "output:").unwrap_or(out_raw).trim());
        if output.is_empty() {
            return Err(parse_error(line, trimmed_column(&fields[5]), "output name"));
        }
        steps.push(PlanStep {
            index,
            description,
            image,
            inputs,
            deps,
            output,
        });
    }
    if steps.is_empty() {
        return Err(parse_error(1, 1, "at least one step"));
    }
    StructuredPlan::new(steps)
}

/// Renders a plan in the annotated line format; [`parse_plan`] reads it back
/// to an equal plan.
pub fn serialize_plan(plan: &StructuredPlan) -> String {
    let mut out = String::new();
    for s in plan.steps() {
        let inputs: Vec<String> = s
            .inputs
            .iter()
            .map(|i| match i {
                InputBinding::Slot(r) => format!("role:{}", escape(r, &['|', ','])),
                InputBinding::Output(o) => format!("out:{}", escape(o, &['|', ','])),
                InputBinding::Literal(v) => format!("lit:{}", escape(v, &['|', ','])),
            })
            .collect();
        let inputs = if inputs.is_empty() { "-".to_string() } else { inputs.join(", ") };
        let deps = if s.deps.is_empty() {
            "No Dependency".to_string()
        } else {
            format!(
                "Dep: {}",
                s.deps.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
            )
        };
        let _ = writeln!(
            out,
            "{} | {} | {} | {} | {} | Output: {}",
            s.index,
            escape(&s.description, &['|']),
            escape(&s.image, &['|']),
            inputs,
            deps,
            escape(&s.output, &['|']),
        );
    }
    out
}
