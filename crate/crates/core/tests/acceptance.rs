//! Runs every acceptance criterion and prints one line per criterion.
//! Criterion 9 is a known failure on this discretization; any other
//! failure fails the target.

use sparsepdo::cli::{run_criterion, SuiteOptions, CRITERIA};

const KNOWN_RED: [usize; 1] = [9];

fn main() {
    let quick = std::env::args().any(|a| a == "--quick");
    let opts = SuiteOptions { quick, ..Default::default() };
    let mut unexpected = Vec::new();
    for id in 1..=CRITERIA {
        match run_criterion(id, &opts) {
            Ok(row) => {
                let note = if !row.pass && KNOWN_RED.contains(&id) { " [known red]" } else { "" };
                println!("{}{note}", row.line());
                if !row.pass && !KNOWN_RED.contains(&id) {
                    unexpected.push(id);
                }
            }
            Err(e) => {
                println!("criterion {id:>2} ERROR {e}");
                unexpected.push(id);
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
