//! Shared helpers of the acceptance suite in `tests/acceptance.rs`. The suite
//! sits in its own package so that its expected failures do not stop the
//! other test targets of a workspace run.

use tubeflow::artifacts::Artifacts;

/// Prints the one-line verdict of an acceptance criterion.
pub fn verdict(criterion: u32, ok: bool, summary: &str) {
    println!("criterion {criterion}: {} {summary}", if ok { "PASS" } else { "FAIL" });
}

/// `[a, b, ...]` in scientific notation.
pub fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Artifact sink in a fresh temporary directory, removed when the guard drops.
pub fn scratch() -> (tempfile::TempDir, Artifacts) {
    let dir = tempfile::tempdir().expect("temporary directory");
    let out = Artifacts::create(dir.path()).expect("artifact directory");
    (dir, out)
}
