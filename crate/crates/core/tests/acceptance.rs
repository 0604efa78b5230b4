//! One line per acceptance criterion; exits nonzero when any criterion fails.

use maglab_core::checks::{run_all, DEFAULT_SEED};

fn main() {
    let outcomes = run_all(DEFAULT_SEED);
    for o in &outcomes {
        println!("{}", o.line());
        for m in o.measurements.iter().filter(|m| !m.passed) {
            println!("    {} = {:e} (needs {} {:e})", m.name, m.value, m.relation.symbol(), m.bound);
        }
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
