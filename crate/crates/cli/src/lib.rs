//! Command-line front end: every run writes its outputs plus a manifest that
//! records the resolved configuration, seed and file digests, so `replay`
//! can repeat it and check the outputs byte for byte.

pub mod args;
mod commands;
mod error;
pub mod frames;
pub mod manifest;
pub mod report;

use std::path::PathBuf;

use argus_core::Execution;

pub use args::{Cli, Command};
pub use error::{CliError, Result};
pub use manifest::{FileDigest, Manifest, MANIFEST_FILE};
pub use report::{Table1, Table1Row, Table2};

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub outputs: Vec<FileDigest>,
    pub seed: Option<u64>,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn run(command: Command, exec: Execution) -> Result<RunSummary> {
    match command {
        Command::Replay(a) => replay(&a.manifest, a.out, exec),
        cmd => run_recorded(cmd, exec),
    }
}

fn digest_inputs(cmd: &Command) -> Result<Vec<FileDigest>> {
    cmd.input_files()?
        .iter()
        .map(|p| manifest::digest_file(p, p.display().to_string()))
        .collect()
}

fn run_recorded(cmd: Command, exec: Execution) -> Result<RunSummary> {
    let cmd = cmd.resolve_paths()?;
    let inputs = digest_inputs(&cmd)?;
    let done = commands::execute(&cmd, exec)?;
    let out_dir = cmd.out_dir().expect("recorded commands have an output directory").to_path_buf();
    let outputs = done
        .outputs
        .iter()
        .map(|name| manifest::digest_file(&out_dir.join(name), name.clone()))
        .collect::<Result<Vec<_>>>()?;
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: done.seed,
        config: cmd,
        inputs,
        outputs: outputs.clone(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, report::to_json(&m)).map_err(|e| CliError::io(&path, e))?;
    Ok(RunSummary {
        out_dir,
        outputs,
        seed: done.seed,
        notes: done.notes,
        warnings: done.warnings,
    })
}

fn replay(manifest_path: &std::path::Path, out: PathBuf, exec: Execution) -> Result<RunSummary> {
    let recorded = manifest::read_manifest(manifest_path)?;
    let mut cmd = recorded.config.clone();
    if matches!(cmd, Command::Replay(_)) {
        return Err(CliError::Input("manifest records a replay".into()));
    }
    let current = digest_inputs(&cmd)?;
    if current != recorded.inputs {
        let changed: Vec<&str> = recorded
            .inputs
            .iter()
            .filter(|r| !current.contains(r))
            .map(|r| r.path.as_str())
            .collect();
        return Err(CliError::Input(format!(
            "inputs changed since the recorded run: {}",
            if changed.is_empty() { "file set differs".to_string() } else { changed.join(", ") }
        )));
    }
    cmd.set_out_dir(out);
    let mut summary = run_recorded(cmd, exec)?;
    if summary.outputs != recorded.outputs {
        let differing: Vec<String> = recorded
            .outputs
            .iter()
            .filter(|r| !summary.outputs.contains(r))
            .map(|r| r.path.clone())
            .chain(
                summary
                    .outputs
                    .iter()
                    .filter(|o| !recorded.outputs.iter().any(|r| r.path == o.path))
                    .map(|o| o.path.clone()),
            )
            .collect();
        return Err(CliError::Mismatch(format!("outputs differ: {}", differing.join(", "))));
    }
    summary
        .notes
        .push(format!("replay matched {} output files", summary.outputs.len()));
    Ok(summary)
}
