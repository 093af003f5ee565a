//! One line per acceptance criterion; exits nonzero if any criterion fails.

use singular_liouville::acceptance;

fn main() {
    let outcomes = acceptance::run_all(0);
    let mut failed = 0;
    for o in &outcomes {
        println!("{}", o.line());
        if !o.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
