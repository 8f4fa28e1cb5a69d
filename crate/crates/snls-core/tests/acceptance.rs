//! Acceptance suite: one PASS/FAIL line per criterion.

use snls::acceptance::run_all;
use snls::config::RunConfig;

fn main() {
    let cfg = RunConfig::default();
    let results = run_all(&cfg, |r| println!("{}", r.line()));
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
