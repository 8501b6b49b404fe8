fn main() {
    std::process::exit(agentreuse::harness::cli::main());
}
