use std::fmt::Write as _;

use lad_core::LadConfig;
use sha2::{Digest, Sha256};

/// Header block written at the top of every result file.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<LadConfig>,
    pub input_digest: Option<String>,
    pub seed: Option<u64>,
    pub tool_version: &'static str,
    /// Command-specific settings, in order.
    pub extra: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            config: None,
            input_digest: None,
            seed: None,
            tool_version: env!("CARGO_PKG_VERSION"),
            extra: Vec::new(),
        }
    }

    pub fn with_config(mut self, cfg: LadConfig) -> Self {
        self.config = Some(cfg);
        self
    }

    pub fn with_input(mut self, bytes: &[u8]) -> Self {
        self.input_digest = Some(digest(bytes));
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn set(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# command: {}", self.command);
        let _ = writeln!(out, "# tool_version: {}", self.tool_version);
        if let Some(d) = &self.input_digest {
            let _ = writeln!(out, "# input_digest: {d}");
        }
        match self.seed {
            Some(s) => {
                let _ = writeln!(out, "# seed: {s}");
            }
            None => out.push_str("# seed: none\n"),
        }
        if let Some(c) = &self.config {
            let _ = writeln!(
                out,
                "# config: initial-threshold={} quantile-level={} n-iter={} epsilon={:e} min-unflagged-fraction={}",
                c.initial_threshold, c.quantile_level, c.n_iter, c.epsilon, c.min_unflagged_fraction
            );
        }
        for (k, v) in &self.extra {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out
    }
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}
