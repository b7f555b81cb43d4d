//! Runs the acceptance suite at the fast level and prints one line per
//! criterion.

use martensim::verify::{run_suite, Faults, Level, ALL};

fn main() -> martensim::Result<()> {
    let report = run_suite(Level::Fast, &Faults::default(), &ALL)?;
    for c in &report.criteria {
        println!("{}", c.line());
    }
    println!("overall: {}", if report.passed { "pass" } else { "fail" });
    Ok(())
}
