//! The `verify` command: oracle suite plus report files.

use std::path::Path;

use anyhow::Result;
use hoc_oracle::{run_suite, SuiteOptions, VerificationReport};

use crate::experiment::AtomicDir;

/// Runs the suite and writes `report.txt` and `report.csv` into `out`.
pub fn run_verify(opts: &SuiteOptions, out: &Path) -> Result<VerificationReport> {
    let report = run_suite(opts);
    let mut dir = AtomicDir::new(out)?;
    dir.write("report.txt", report.to_text().as_bytes())?;
    dir.write("report.csv", report.to_csv().as_bytes())?;
    dir.commit();
    Ok(report)
}
