//! Experiment runner: validated configs, deterministic result files, a run
//! manifest and static plots.
//!
//! Result files are a pure function of the config (minus `workers` and
//! `out`) and the artifact version. Only `manifest.json` carries timestamps.

pub mod config;
pub mod error;
mod experiments;
pub mod output;
pub mod plot;

pub use config::{ExperimentConfig, Kind, Overrides};
pub use error::{RunError, RunResult};
pub use experiments::{identity_grid, solver_check, SolverCheck};
pub use output::{RunManifest, MANIFEST, RESOLVED_CONFIG};
pub use plot::emit_plots;

use experiments::Log;
use output::{now_ms, Outputs};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Validates `config`, runs the experiment it names, and writes the result
/// files, the resolved config and the manifest into `config.out`.
pub fn run(config: &ExperimentConfig) -> RunResult<RunManifest> {
    config.validate()?;
    let started = now_ms();
    let hash = config.hash();
    let mut out = Outputs::create(&config.out, config.seed, &hash)?;
    let resolved = format!(
        "# resolved config, artifact_version={ARTIFACT_VERSION} config_hash={hash}\n{}",
        config.resolved_toml()
    );
    out.write_raw(RESOLVED_CONFIG, resolved.as_bytes())?;
    let mut log = Log::default();
    match config.kind {
        Kind::Gs => experiments::gs(config, &mut out, &mut log)?,
        Kind::Droplet => experiments::droplet(config, &mut out, &mut log)?,
        Kind::Chaos => experiments::chaos(config, &mut out, &mut log)?,
        Kind::Variance => experiments::variance(config, &mut out, &mut log)?,
        Kind::Stiffness => experiments::stiffness(config, &mut out, &mut log)?,
        Kind::Window => experiments::window(config, &mut out, &mut log)?,
        Kind::Selftest => experiments::selftest(config, &mut out, &mut log)?,
    }
    let manifest = RunManifest {
        schema: "ealab.manifest/1".into(),
        kind: config.kind.to_string(),
        config_hash: hash,
        artifact_version: ARTIFACT_VERSION.into(),
        seed: config.seed,
        workers: config.workers,
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        discarded: log.discarded,
        outputs: out.files().to_vec(),
        violations: log.violations,
        notes: log.notes,
    };
    manifest.write(out.dir())?;
    Ok(manifest)
}
