//! Warms a cache on half of the corpus, saves it, reloads it into a fresh
//! cache and checks that both decide the rest of the stream identically.

use agentreuse::harness::config::Config;
use agentreuse::harness::corpus::load_corpus;
use agentreuse::metrics::Evaluator;
use agentreuse::plancache::Strategy;

fn main() -> agentreuse::Result<()> {
    let corpus = load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/data/corpus.jsonl"))?;
    let (head, tail) = corpus.split_at(corpus.len() / 2);
    let evaluator = Evaluator::new(Config::default().backends()?);

    let live = evaluator.build_cache(&corpus, Strategy::default())?;
    evaluator.warm(&live, head)?;
    let path = std::env::temp_dir().join("agentreuse-snapshot.json");
    live.save_snapshot(&path)?;
    println!("saved {} entries to {}", live.len(), path.display());

    let mut restored = evaluator.build_cache(&corpus, Strategy::default())?;
    restored.load_snapshot(&path)?;

    let a = evaluator.warm(&live, tail)?;
    let b = evaluator.warm(&restored, tail)?;
    let same = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x.decision.label() == y.decision.label() && x.decision.similarity() == y.decision.similarity())
        .count();
    println!("{same}/{} decisions identical after reload", tail.len());
    Ok(())
}
