//! Judges one replay of the bundled corpus at several thresholds and checks
//! that the hit sets shrink as the threshold rises.

use agentreuse::harness::config::Config;
use agentreuse::harness::corpus::load_corpus;
use agentreuse::metrics::{nesting_violations, Evaluator};
use agentreuse::plancache::StrategyKind;

fn main() -> agentreuse::Result<()> {
    let corpus = load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/data/corpus.jsonl"))?;
    let evaluator = Evaluator::new(Config::default().backends()?);
    let gammas = [0.75, 0.80, 0.85, 0.90, 0.95];

    for kind in [StrategyKind::AgentReuse, StrategyKind::WithArgs, StrategyKind::GptCache] {
        let reports = evaluator.sweep(&corpus, kind, &gammas, 0.75)?;
        println!("{kind}");
        for r in &reports {
            println!(
                "  gamma {:.2}: hits {:>3} precision {:.4} recall {:.4} accuracy {:.4}",
                r.gamma,
                r.hit_ids().len(),
                r.scores.precision,
                r.scores.recall,
                r.scores.accuracy
            );
        }
        println!("  nesting violations: {}", nesting_violations(&reports).len());
    }
    Ok(())
}
