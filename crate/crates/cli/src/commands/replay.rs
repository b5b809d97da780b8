//! `replay`: re-execute a recorded run into a fresh directory and verify
//! the outputs are byte-identical.

use std::path::Path;

use crate::error::{CliError, Result};
use crate::manifest::{hash_path, read_manifest, RunManifest};

/// Re-run the manifest's command with its recorded spec. Inputs are checked
/// against their recorded hashes first; outputs must match exactly.
pub fn run(manifest_path: &Path, out_dir: &Path) -> Result<RunManifest> {
    let recorded = read_manifest(manifest_path)?;

    for (input, expected) in &recorded.inputs {
        let actual = hash_path(Path::new(input))?;
        if actual != *expected {
            return Err(CliError::Invalid(format!(
                "input {input} changed since the recorded run (hash {actual} != {expected})"
            )));
        }
    }

    let replayed = dispatch(&recorded, out_dir)?;

    let mut mismatches = Vec::new();
    for (name, expected) in &recorded.outputs {
        match replayed.outputs.get(name) {
            Some(actual) if actual == expected => {}
            Some(_) => mismatches.push(format!("{name}: content differs")),
            None => mismatches.push(format!("{name}: missing from replay")),
        }
    }
    for name in replayed.outputs.keys() {
        if !recorded.outputs.contains_key(name) {
            mismatches.push(format!("{name}: extra output in replay"));
        }
    }
    if !mismatches.is_empty() {
        return Err(CliError::Invalid(format!(
            "replay diverged on {} output(s):\n  {}",
            mismatches.len(),
            mismatches.join("\n  ")
        )));
    }
    println!(
        "replay verified: {} outputs byte-identical",
        recorded.outputs.len()
    );
    Ok(replayed)
}

fn dispatch(recorded: &RunManifest, out_dir: &Path) -> Result<RunManifest> {
    macro_rules! run_as {
        ($spec_ty:ty, $module:ident) => {{
            let spec: $spec_ty = serde_json::from_value(recorded.spec.clone()).map_err(|e| {
                CliError::Invalid(format!("manifest spec does not parse: {e}"))
            })?;
            super::$module::run(&spec, out_dir)
        }};
    }
    match recorded.command.as_str() {
        "generate" => run_as!(super::generate::GenerateSpec, generate),
        "mask" => run_as!(super::mask::MaskSpec, mask),
        "train" => run_as!(super::train::TrainSpec, train),
        "search" => run_as!(super::search::SearchSpec, search),
        "eval" => run_as!(super::eval::EvalSpec, eval),
        "explain" => run_as!(super::explain::ExplainSpec, explain),
        other => Err(CliError::Invalid(format!(
            "manifest records unknown command {other}"
        ))),
    }
}
