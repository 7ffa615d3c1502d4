use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Command;
use crate::error::Failure;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to rerun an invocation. Paths in `inputs` are as given
/// on the command line; builtin documents are keyed `builtin:<name>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub verb: String,
    pub seed: u64,
    pub command: Command,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// The only field that differs between identical runs.
    pub wall_clock_s: f64,
}

/// Inputs read and outputs produced by one verb. Nothing touches the output
/// directory until [`Session::commit`].
#[derive(Debug, Default)]
pub struct Session {
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, Vec<u8>>,
    pub stdout: String,
}

impl Session {
    pub fn read_input(&mut self, path: &Path) -> Result<String, Failure> {
        let bytes = fs::read(path)
            .map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))?;
        self.inputs
            .insert(path.display().to_string(), sha256_hex(&bytes));
        String::from_utf8(bytes)
            .map_err(|_| Failure::parse(format!("{} is not UTF-8", path.display())))
    }

    pub fn builtin_input(&mut self, name: &str, text: &str) -> String {
        self.inputs
            .insert(format!("builtin:{name}"), sha256_hex(text.as_bytes()));
        text.to_string()
    }

    pub fn emit(&mut self, name: &str, content: impl Into<Vec<u8>>) {
        self.outputs.insert(name.to_string(), content.into());
    }

    pub fn say(&mut self, line: impl AsRef<str>) {
        self.stdout.push_str(line.as_ref());
        self.stdout.push('\n');
    }

    /// Writes every output and then the manifest, each through a temporary
    /// file renamed into place.
    pub fn commit(
        self,
        dir: &Path,
        verb: &str,
        seed: u64,
        command: Command,
        wall_clock_s: f64,
    ) -> Result<RunManifest, Failure> {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))?;
        let manifest = RunManifest {
            tool: "hetnas".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            verb: verb.into(),
            seed,
            command,
            inputs: self.inputs,
            outputs: self
                .outputs
                .iter()
                .map(|(k, v)| (k.clone(), sha256_hex(v)))
                .collect(),
            wall_clock_s,
        };
        for (name, bytes) in &self.outputs {
            write_atomic(dir, name, bytes)?;
        }
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(dir, MANIFEST_FILE, text.as_bytes())?;
        Ok(manifest)
    }
}

pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::io(format!("cannot write {name}: {e}"));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(dir.join(name)).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<RunManifest, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}
