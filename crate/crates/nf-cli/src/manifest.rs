use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::run::RunOutput;

#[derive(Debug, Serialize)]
pub struct Convention {
    pub fourier: String,
    pub sigmoid: String,
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_sha256: String,
    pub toolkit_version: String,
    pub experiment: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub certification: Vec<String>,
    pub convention: Convention,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn fourier_convention(cfg: &ExperimentConfig) -> String {
    match cfg.kind {
        ExperimentKind::Dispersion | ExperimentKind::TuringHopf => cfg.spectral.convention.describe().to_string(),
        ExperimentKind::Field => {
            "spectrum: forward DFT of mu over the grid (even extension on the interval), amplitude 2|c_k|/len for 0 < k < len/2, |c_k|/len otherwise".into()
        }
        _ => "none".into(),
    }
}

impl RunManifest {
    pub fn build(cfg: &ExperimentConfig, out: &RunOutput, wall_clock_seconds: f64) -> Self {
        let sigmoid = match &cfg.sigmoid.table {
            None => format!("probit: S(x) = Phi(g x + h), g = {}, h = {}", cfg.sigmoid.gain, cfg.sigmoid.offset),
            Some(_) => format!("table: piecewise linear in g x + h, g = {}, h = {}", cfg.sigmoid.gain, cfg.sigmoid.offset),
        };
        RunManifest {
            config_sha256: sha256_hex(cfg.canonical().as_bytes()),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: cfg.kind.name().to_string(),
            seed: cfg.seed,
            threads: rayon::current_num_threads(),
            wall_clock_seconds,
            certification: out.certification.clone(),
            convention: Convention { fourier: fourier_convention(cfg), sigmoid },
            files: out
                .files
                .iter()
                .map(|f| FileEntry { name: f.name.clone(), sha256: sha256_hex(&f.bytes), bytes: f.bytes.len() })
                .collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

/// Single writer for a run directory: data files first, manifest last.
pub fn write_run(dir: &Path, out: &RunOutput, manifest: &RunManifest) -> Result<(), CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for f in &out.files {
        let path = dir.join(&f.name);
        std::fs::write(&path, &f.bytes).map_err(io(&path))?;
    }
    let path = dir.join("manifest");
    std::fs::write(&path, manifest.to_toml()).map_err(io(&path))
}
