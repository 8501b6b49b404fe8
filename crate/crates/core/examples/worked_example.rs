//! Two booking requests that differ only in their parameters: the first
//! generates and caches the seven-step plan, the second reuses it with its
//! own origin, destination and date.

use std::sync::Arc;

use agentreuse::harness::config::Config;
use agentreuse::plancache::ReusePipeline;

fn main() -> agentreuse::Result<()> {
    let config = Config::default();
    let backends = config.backends()?;
    let cache = Arc::new(config.cache(&backends)?);
    let pipeline = ReusePipeline::new(cache.clone(), backends.planner).with_tools(Arc::new(config.tools()?));

    for (id, text) in [
        ("r1", "Book a ticket from Hefei to Beijing for the day after tomorrow"),
        ("r2", "Book a ticket from Changsha to Shanghai for tomorrow"),
    ] {
        let out = pipeline.process(id, text)?;
        let d = &out.decided;
        println!("{id}: {text}");
        println!("  intent {} slots {:?}", d.intent.category, d.intent.slots.iter().map(|s| (&s.role, &s.value)).collect::<Vec<_>>());
        if let Some(key) = &d.key {
            println!("  template {:?}", key.text);
        }
        println!("  decision {} similarity {:?}", d.decision.label(), d.decision.similarity());
        if let Some(trace) = &out.trace {
            if let Some(step) = trace.step(3) {
                println!("  step 3 inputs {:?}", step.inputs);
            }
            println!("  response {}", trace.response);
        }
    }

    let plan = &cache.entries()[0].plan;
    println!("cached plan edges:");
    for (from, to) in plan.edges() {
        println!("  {from} -> {to}");
    }
    Ok(())
}
