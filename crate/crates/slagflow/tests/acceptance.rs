//! Runs the acceptance criteria and prints one line per criterion.
//! `SLAGFLOW_CRITERIA=A1,A9` restricts the run; `SLAGFLOW_ACCEPTANCE_OUT`
//! keeps the artifacts.

use slagflow::harness::{acceptance, Selection};
use std::path::PathBuf;
use std::process::ExitCode;

fn main() -> ExitCode {
    let sel: Selection = match std::env::var("SLAGFLOW_CRITERIA") {
        Ok(s) => s.parse().expect("criterion list"),
        Err(_) => Selection::All,
    };
    let out = std::env::var_os("SLAGFLOW_ACCEPTANCE_OUT").map(PathBuf::from);
    let summary = acceptance(&sel, 20261014, out.as_deref()).expect("acceptance run");
    for line in summary.lines() {
        println!("{line}");
    }
    let passed = summary.outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass", summary.outcomes.len());
    if summary.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
