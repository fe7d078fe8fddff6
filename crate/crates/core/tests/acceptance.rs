use oscillo::acceptance::run_all;

const SEED: u64 = 0x5eed;

fn main() {
    let report = run_all(SEED);
    for c in &report.criteria {
        println!("{}  ({} ms)", c.line(), c.elapsed_ms.unwrap_or(0));
        if !c.passed {
            println!("    {}", c.detail);
        }
    }
    if !report.passed {
        std::process::exit(1);
    }
}
