//! End-to-end latency of 2,644 requests with and without plan reuse, using
//! 31.8 s per generated plan.

use agentreuse::metrics::{gain_model, reduction};

fn main() -> agentreuse::Result<()> {
    let n = 2644;
    let t_plan = 31.8;
    let agent_reuse = gain_model(n, 180, t_plan, 0.023489)?;
    let gptcache = gain_model(n, 461, t_plan, 0.011528)?;
    let none = gain_model(n, n, t_plan, 0.0)?;

    println!("no reuse:    {none:>10.2} s");
    println!("GPTCache:    {gptcache:>10.2} s");
    println!("AgentReuse:  {agent_reuse:>10.2} s");
    println!("AgentReuse vs no reuse: {:.2}% less", reduction(agent_reuse, none) * 100.0);
    println!("AgentReuse vs GPTCache: {:.2}% less", reduction(agent_reuse, gptcache) * 100.0);
    Ok(())
}
