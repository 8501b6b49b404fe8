//! Parses an annotated plan, injects parameters and runs it with custom
//! tools, printing when each step ran.

use agentreuse::intent::Slot;
use agentreuse::plan::{execute, inject_params, parse_plan, serialize_plan, ToolRegistry};

const PLAN: &str = "\
1 | Look up the date | date | role:time | No Dependency | Output: Date
2 | Hotels | hotels | role:city, out:Date | Dep: 1 | Output: Hotels
3 | Restaurants | restaurants | role:city | No Dependency | Output: Restaurants
4 | Itinerary | itinerary | out:Hotels, out:Restaurants | Dep: 2, 3 | Output: Itinerary
";

fn main() -> agentreuse::Result<()> {
    let plan = parse_plan(PLAN)?;
    println!("required slots {:?}", plan.required_slots());
    print!("{}", serialize_plan(&plan));

    let mut tools = ToolRegistry::new();
    tools
        .register("date", |i: &[String]| Ok(format!("date<{}>", i[0])))
        .register("hotels", |i: &[String]| Ok(format!("3 hotels in {} on {}", i[0], i[1])))
        .register("restaurants", |i: &[String]| Ok(format!("5 restaurants in {}", i[0])))
        .register("itinerary", |i: &[String]| Ok(i.join(" + ")));

    let text = "Plan a trip to Lisbon next weekend";
    let slots = [Slot::new("city", "Lisbon", 17, 23), Slot::new("time", "next weekend", 24, 36)];
    let instantiated = inject_params(&plan, &slots)?;
    let trace = execute(&instantiated, &tools)?;
    println!("{text}");
    for s in &trace.steps {
        println!("  step {} [{:?} .. {:?}] {} -> {}", s.index, s.start, s.end, s.image, s.output);
    }
    println!("respects dependencies: {}", trace.respects(&instantiated));
    println!("response: {}", trace.response);

    let cyclic = "1 | a | t | - | Dep: 2 | Output: A\n2 | b | t | - | Dep: 1 | Output: B\n";
    println!("cyclic plan: {}", parse_plan(cyclic).unwrap_err());
    Ok(())
}
