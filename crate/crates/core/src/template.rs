//! Parameter-stripped request templates.
//!
//! "Book a ticket from Hefei to Beijing for the day after tomorrow" with its
//! three slots removed becomes "Book a ticket from to". Requests that differ
//! only in their key parameters therefore share one template string, and so
//! one embedding.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::intent::{validate_slots, Slot};
use crate::text::canonicalize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateMode {
    /// Delete slot spans.
    #[default]
    Delete,
    /// Replace each slot span with `⟨role⟩`.
    Placeholder,
}

/// Removes every slot span from `text` (spans index the canonical form of
/// `text`), then collapses whitespace.
pub fn extract_template(text: &str, slots: &[Slot]) -> Result<String> {
    extract_template_with(text, slots, TemplateMode::Delete)
}

pub fn extract_template_with(text: &str, slots: &[Slot], mode: TemplateMode) -> Result<String> {
    let canonical = canonicalize(text);
    validate_slots(&canonical, slots)?;
    if slots.is_empty() {
        return Ok(canonical);
    }
    let mut ordered: Vec<&Slot> = slots.iter().collect();
    ordered.sort_by_key(|s| s.start);

    let chars: Vec<char> = canonical.chars().collect();
    let mut out = String::with_capacity(canonical.len());
    let mut cursor = 0;
    for slot in ordered {
        out.extend(&chars[cursor..slot.start]);
        if mode == TemplateMode::Placeholder {
            out.push(' ');
            out.push('⟨');
            out.push_str(&slot.role);
            out.push('⟩');
            out.push(' ');
        }
        cursor = slot.end;
    }
    out.extend(&chars[cursor..]);
    Ok(canonicalize(&out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn booking_slots() -> Vec<Slot> {
        vec![
            Slot::new("origin", "Hefei", 19, 24),
            Slot::new("destination", "Beijing", 28, 35),
            Slot::new("time", "for the day after tomorrow", 36, 62),
        ]
    }

    #[test]
    fn worked_example() {
        let text = "Book a ticket from Hefei to Beijing for the day after tomorrow";
        assert_eq!(extract_template(text, &booking_slots()).unwrap(), "Book a ticket from to");
    }

    #[test]
    fn bare_time_slot_leaves_preposition() {
        let text = "Book a ticket from Hefei to Beijing for the day after tomorrow";
        let slots = vec![
            Slot::new("origin", "Hefei", 19, 24),
            Slot::new("destination", "Beijing", 28, 35),
            Slot::new("time", "the day after tomorrow", 40, 62),
        ];
        assert_eq!(extract_template(text, &slots).unwrap(), "Book a ticket from to for");
    }

    #[test]
    fn no_slots_is_canonical_identity() {
        assert_eq!(extract_template("  Open  WeChat ", &[]).unwrap(), "Open WeChat");
    }

    #[test]
    fn placeholders() {
        let text = "Book a ticket from Hefei to Beijing for the day after tomorrow";
        let t = extract_template_with(text, &booking_slots(), TemplateMode::Placeholder).unwrap();
        assert_eq!(t, "Book a ticket from ⟨origin⟩ to ⟨destination⟩ ⟨time⟩");
    }

    #[test]
    fn invalid_slots_rejected() {
        let text = "Call Alice";
        let out_of_bounds = [Slot::new("contact", "Alice", 5, 40)];
        assert!(matches!(extract_template(text, &out_of_bounds), Err(Error::InvalidSlots(_))));
        let overlap = [Slot::new("a", "Ali", 5, 8), Slot::new("b", "ice", 7, 10)];
        assert!(matches!(extract_template(text, &overlap), Err(Error::InvalidSlots(_))));
    }

    #[test]
    fn idempotent() {
        let text = "Book a ticket from Hefei to Beijing for the day after tomorrow";
        let once = extract_template(text, &booking_slots()).unwrap();
        assert_eq!(extract_template(&once, &[]).unwrap(), once);
    }
}
