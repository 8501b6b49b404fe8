//! Replays the bundled corpus through every strategy at γ = 0.75 and prints
//! precision, recall, F1, accuracy and search work side by side.
//!
//! cargo run --example evaluate_strategies [-- --gold-slots]

use std::sync::Arc;

use agentreuse::embedding::HashedNgramEmbedder;
use agentreuse::harness::corpus::load_corpus;
use agentreuse::intent::RuleClassifier;
use agentreuse::metrics::{Backends, Evaluator};
use agentreuse::plancache::{Strategy, StrategyKind};
use agentreuse::planner::StubPlanner;

fn main() -> agentreuse::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let corpus = load_corpus(format!("{data}/corpus.jsonl"))?;
    let gold = std::env::args().any(|a| a == "--gold-slots");

    let evaluator = Evaluator::new(Backends {
        embedder: Arc::new(HashedNgramEmbedder::default()),
        classifier: Arc::new(RuleClassifier::load(format!("{data}/rules.json"))?),
        planner: Arc::new(StubPlanner::default()),
    })
    .with_gold_slots(gold);

    let reusable = corpus.iter().filter(|r| r.reusable == Some(true)).count();
    println!("{} requests, {reusable} reusable, gold slots: {gold}", corpus.len());
    println!("{:<12} {:>9} {:>9} {:>9} {:>9} {:>12}", "strategy", "precision", "recall", "f1", "accuracy", "comparisons");
    for kind in StrategyKind::ALL {
        let report = evaluator.run(&corpus, Strategy::new(kind, 0.75)?)?;
        let s = report.scores;
        println!(
            "{:<12} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>12}",
            kind.as_str(),
            s.precision,
            s.recall,
            s.f_beta,
            s.accuracy,
            report.comparisons
        );
    }
    Ok(())
}
