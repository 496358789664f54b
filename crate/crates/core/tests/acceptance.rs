//! Acceptance battery. Runs every criterion (or those whose name or number
//! is given on the command line), prints one PASS/FAIL line each and exits
//! nonzero if any fails.

use std::process::ExitCode;

use plap_core::battery::{evaluate, CRITERIA};

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = CRITERIA.iter().filter(|(id, name)| {
        filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()) || id.to_string() == *f)
    });
    let mut failed = 0;
    let mut total = 0;
    for &(id, _) in selected {
        let report = evaluate(id);
        println!("{}", report.summary_line());
        total += 1;
        if !report.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {total} criteria passed", total - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
