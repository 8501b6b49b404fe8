//! Effective reuse rate: does a reused plan give the same response as a
//! freshly generated one? Run with a deterministic planner and with one that
//! rewords its plans 7% of the time.

use agentreuse::harness::config::Config;
use agentreuse::harness::corpus::load_corpus;
use agentreuse::metrics::{measure_reuse_equivalence, reuse_pairs};
use agentreuse::planner::PerturbedPlanner;

fn main() -> agentreuse::Result<()> {
    let corpus = load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/data/corpus.jsonl"))?;
    let config = Config::default();
    let b = config.backends()?;
    let tools = config.tools()?;
    let pairs = reuse_pairs(&corpus, 20);

    for rate in [0.0, 0.07] {
        let planner = PerturbedPlanner::new(b.planner.clone(), rate, 7);
        let report = measure_reuse_equivalence(
            &pairs,
            5,
            b.embedder.clone(),
            b.classifier.clone(),
            &b.planner,
            &planner,
            &tools,
        )?;
        println!(
            "rewording rate {rate:.2}: {}/{} identical, effective reuse rate {:.2}",
            report.identical, report.trials, report.rate
        );
    }
    Ok(())
}
