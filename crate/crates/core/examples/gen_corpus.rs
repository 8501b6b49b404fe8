//! Generates a small labelled corpus from the bundled templates and prints
//! its shape.

use std::collections::BTreeMap;

use agentreuse::harness::corpus::{check_corpus, TemplateSet};

fn main() -> agentreuse::Result<()> {
    let set = TemplateSet::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/templates.json"))?;
    let corpus = set.generate(120, 42)?;
    check_corpus(&corpus)?;

    let mut per_intent: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &corpus {
        *per_intent.entry(r.intent.as_deref().unwrap_or("?")).or_default() += 1;
    }
    let reusable = corpus.iter().filter(|r| r.reusable == Some(true)).count();
    println!("{} requests from {} families, {reusable} reusable", corpus.len(), set.family_count()?);
    for (intent, n) in per_intent {
        println!("  {intent:<10} {n}");
    }
    for r in corpus.iter().take(5) {
        println!("{}", serde_json::to_string(r).expect("requests serialize"));
    }
    Ok(())
}
