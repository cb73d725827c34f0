//! CSV and metadata emission.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use helmfosls::RunConfig;

/// SHA-256 of the canonical configuration text, hex encoded.
pub fn config_hash(cfg: &RunConfig) -> String {
    Sha256::digest(cfg.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<(), Box<dyn std::error::Error>> {
    let mut w = csv::Writer::from_path(dir.join(name))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Conventions {
    dorfler: &'static str,
    stopping_residual_norm: &'static str,
    gamma_estimate: &'static str,
    trial_basis: &'static str,
    uniform_refinement: &'static str,
    condition_number: &'static str,
}

#[derive(Serialize)]
struct Metadata<'a> {
    program: &'static str,
    version: &'static str,
    experiment: &'a str,
    config_hash: &'a str,
    seed: u64,
    config: &'a RunConfig,
    warnings: &'a [String],
    conventions: Conventions,
    files: &'a [String],
}

pub fn write_metadata(dir: &Path, experiment: &str, cfg: &RunConfig, warnings: &[String], files: &[String]) -> Result<(), Box<dyn std::error::Error>> {
    let hash = config_hash(cfg);
    let meta = Metadata {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        experiment,
        config_hash: &hash,
        seed: cfg.seed,
        config: cfg,
        warnings,
        conventions: Conventions {
            dorfler: "smallest set with sum of marked eta_K^2 >= theta^2 * eta^2, ties by element id",
            stopping_residual_norm: "preconditioned residual norm minimized by MINRES",
            gamma_estimate: "gamma = lambda^2 / (1 + lambda) from the largest negative harmonic Ritz value, minimum carried across meshes",
            trial_basis: "Lagrange functions scaled by (sum over the support of 2 area)^(-1/2)",
            uniform_refinement: "one newest-vertex bisection of every triangle per level",
            condition_number: "lambda_max / lambda_min of the preconditioned matrix",
        },
        files,
    };
    std::fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_values_only() {
        let a = RunConfig::default();
        let (b, _) = RunConfig::from_toml("kappa = 10.0\np = 1").unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        let c = RunConfig { kappa: 11.0, ..RunConfig::default() };
        assert_ne!(config_hash(&a), config_hash(&c));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
