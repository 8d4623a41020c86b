//! Runs every acceptance check and prints one pass/fail line per check.

use circkep::verification::{run_check, CHECKS};

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    for check in CHECKS {
        let r = run_check(check);
        println!("{} {:<28} {:>8.3} s  {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.elapsed_s, check.summary);
        for a in &r.assertions {
            println!("       {} {}: {}", if a.passed { "ok  " } else { "FAIL" }, a.label, a.detail);
        }
        if !r.passed {
            failed.push(r.name);
        }
    }
    assert!(failed.is_empty(), "failed checks: {failed:?}");
}
