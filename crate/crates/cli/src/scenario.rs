use anyhow::Context;
use scimcp_workflow::Scenario;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::resolve_fixture;
use crate::{ExitCodeExt, Failure, EXIT_INPUT, EXIT_MISMATCH};

pub fn run(path: &Path, fixture: Option<&Path>, out: Option<&Path>) -> Result<(), Failure> {
    let scenario = Scenario::load(path).exit(EXIT_INPUT)?;
    let fixture = resolve_fixture(fixture, scenario.fixture.as_deref());
    let outcome = scenario.run(fixture.as_deref()).exit(EXIT_INPUT)?;

    let trace_path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(format!("{}.trace.json", scenario.name)));
    let doc = serde_json::to_string_pretty(&outcome.trace_document()).expect("trace documents serialize");
    std::fs::write(&trace_path, doc + "\n")
        .with_context(|| format!("cannot write trace {}", trace_path.display()))
        .exit(EXIT_INPUT)?;

    let mut stdout = std::io::stdout().lock();
    if outcome.passed() {
        let _ = writeln!(stdout, "PASS {} (trace: {})", outcome.name, trace_path.display());
        return Ok(());
    }
    let _ = writeln!(stdout, "FAIL {} (trace: {})", outcome.name, trace_path.display());
    for m in &outcome.mismatches {
        let _ = writeln!(stdout, "  {m}");
    }
    Err(Failure::new(
        EXIT_MISMATCH,
        anyhow::anyhow!(
            "{} differs from its expected outcome in {} place(s)",
            outcome.name,
            outcome.mismatches.len()
        ),
    ))
}
