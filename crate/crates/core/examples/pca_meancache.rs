//! Fits a 64-component projection on the corpus embeddings and compares the
//! raw-text cache with and without it.

use agentreuse::harness::config::Config;
use agentreuse::harness::corpus::load_corpus;
use agentreuse::metrics::Evaluator;
use agentreuse::plancache::{Strategy, StrategyKind};

fn main() -> agentreuse::Result<()> {
    let corpus = load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/data/corpus.jsonl"))?;
    let evaluator = Evaluator::new(Config::default().backends()?);

    let model = evaluator.fit_pca(&corpus, 64)?;
    let kept: f64 = model.explained_variance().iter().sum();
    println!(
        "projection {} -> {}, variance kept {kept:.4}, orthonormality error {:.2e}",
        model.d_in(),
        model.d_out(),
        model.orthonormality_error()
    );

    for kind in [StrategyKind::GptCache, StrategyKind::MeanCache] {
        let r = evaluator.run(&corpus, Strategy::new(kind, 0.75)?)?;
        println!(
            "{kind:<10} precision {:.4} recall {:.4} f1 {:.4}",
            r.scores.precision, r.scores.recall, r.scores.f_beta
        );
    }
    Ok(())
}
