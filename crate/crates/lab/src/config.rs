//! Experiment configuration: defaults, key=value config files, CLI overrides,
//! and the content hash that guards merges.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::LabError;

/// Environment variable overriding the master seed, taking precedence over
/// both config file and command line.
pub const SEED_ENV: &str = "PERC_MASTER_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    /// Series as CSV plus a JSON summary (default).
    Csv,
    /// Series rows embedded in the JSON summary, no CSV.
    Json,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    /// Scales to run, strictly increasing.
    pub n_grid: Vec<i32>,
    /// Conditioning radius rule m = m_factor * n.
    pub m_factor: i32,
    /// Replicas per scale.
    pub replicas: u64,
    /// First replica index; partial runs over disjoint ranges merge into one.
    pub offset: u64,
    pub seed: u64,
    pub workers: usize,
    /// Tail/pivotal exponent slack ε.
    pub epsilon: f64,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_grid: vec![8, 16, 32, 64, 128],
            m_factor: 2,
            replicas: 10_000,
            offset: 0,
            seed: 0x7065_7263_6c61_6221,
            workers: 1,
            epsilon: 0.2,
            out_dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
        }
    }
}

fn parse_u64(s: &str) -> Result<u64, LabError> {
    let s = s.trim();
    let r = if let Some(hex) = s.strip_prefix("0x") {
        u64::from_str_radix(hex, 16)
    } else {
        s.parse()
    };
    r.map_err(|_| LabError::Usage(format!("not an unsigned integer: {s:?}")))
}

impl ExperimentConfig {
    /// Apply one `key=value` assignment (shared by config files and flags).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), LabError> {
        let value = value.trim();
        match key.trim() {
            "n" => {
                let mut grid = Vec::new();
                for part in value.split(',') {
                    let n: i32 = part
                        .trim()
                        .parse()
                        .map_err(|_| LabError::Usage(format!("bad scale: {part:?}")))?;
                    if n < 1 {
                        return Err(LabError::Usage(format!("scale must be >= 1: {n}")));
                    }
                    grid.push(n);
                }
                if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(LabError::Usage(
                        "scales must be non-empty and strictly increasing".into(),
                    ));
                }
                self.n_grid = grid;
            }
            "m_factor" => {
                self.m_factor = value
                    .parse()
                    .map_err(|_| LabError::Usage(format!("bad m_factor: {value:?}")))?;
                if self.m_factor < 1 {
                    return Err(LabError::Usage("m_factor must be >= 1".into()));
                }
            }
            "replicas" => self.replicas = parse_u64(value)?,
            "offset" => self.offset = parse_u64(value)?,
            "seed" => self.seed = parse_u64(value)?,
            "workers" => {
                self.workers = value
                    .parse()
                    .map_err(|_| LabError::Usage(format!("bad workers: {value:?}")))?;
                if self.workers == 0 {
                    return Err(LabError::Usage("workers must be >= 1".into()));
                }
            }
            "epsilon" => {
                self.epsilon = value
                    .parse()
                    .map_err(|_| LabError::Usage(format!("bad epsilon: {value:?}")))?;
                if !(0.0..2.0).contains(&self.epsilon) {
                    return Err(LabError::Usage("epsilon must be in [0, 2)".into()));
                }
            }
            "out" => self.out_dir = PathBuf::from(value),
            "format" => {
                self.format = match value {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    other => {
                        return Err(LabError::Usage(format!("unknown format: {other:?}")))
                    }
                }
            }
            other => return Err(LabError::Usage(format!("unknown config key: {other:?}"))),
        }
        Ok(())
    }

    /// Load `key=value` lines; `#` starts a comment, blank lines are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Usage(format!("cannot read {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                LabError::Usage(format!("{}:{}: expected key=value", path.display(), lineno + 1))
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_env(&mut self) -> Result<(), LabError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = parse_u64(&v)?;
        }
        Ok(())
    }

    /// Hash of the statistical identity of a run: command, scales, rules,
    /// seed and ε — but not replica range, workers or output plumbing, so
    /// that partial runs of one experiment share a hash and merge.
    pub fn identity_hash(&self, command: &str) -> String {
        let mut ident = format!(
            "{command};m={};seed={};eps={};n=",
            self.m_factor, self.seed, self.epsilon
        );
        for n in &self.n_grid {
            ident.push_str(&format!("{n},"));
        }
        format!("{:016x}", fnv1a(ident.as_bytes()))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("n", "4, 8,16").unwrap();
        cfg.set("seed", "0xdead").unwrap();
        cfg.set("replicas", "500").unwrap();
        assert_eq!(cfg.n_grid, vec![4, 8, 16]);
        assert_eq!(cfg.seed, 0xdead);
        assert_eq!(cfg.replicas, 500);
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.set("n", "8,4").is_err());
        assert!(cfg.set("flavor", "strange").is_err());
        assert!(cfg.set("workers", "0").is_err());
    }

    #[test]
    fn hash_ignores_replica_plumbing() {
        let mut a = ExperimentConfig::default();
        let mut b = ExperimentConfig::default();
        b.replicas = 1;
        b.offset = 99;
        b.workers = 7;
        assert_eq!(a.identity_hash("sn"), b.identity_hash("sn"));
        a.seed = 1;
        assert_ne!(a.identity_hash("sn"), b.identity_hash("sn"));
        assert_ne!(b.identity_hash("sn"), b.identity_hash("arms"));
    }
}
