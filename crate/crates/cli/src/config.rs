//! The pipeline configuration file.

use std::path::{Path, PathBuf};

use dialign::engagement::DEFAULT_MIN_VIDEOS;
use dialign::pipeline::AnalysisConfig;
use dialign::Period;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Inputs {
    pub comments: Option<PathBuf>,
    pub videos: Option<PathBuf>,
}

/// Time filter. `year` takes precedence over explicit bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeriodSpec {
    pub year: Option<i32>,
    pub start: Option<i64>,
    pub end: Option<i64>,
}

impl PeriodSpec {
    pub fn resolve(&self) -> CliResult<Period> {
        if let Some(y) = self.year {
            return Ok(Period::year(y));
        }
        Ok(Period::new(
            self.start.unwrap_or(i64::MIN),
            self.end.unwrap_or(i64::MAX),
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub inputs: Inputs,
    /// Channel ids in report order. Empty means every corpus in the output
    /// directory, sorted by id.
    pub channels: Vec<String>,
    pub period: PeriodSpec,
    pub include_replies: bool,
    pub user_filter: bool,
    /// Defaults to `seed`.
    pub balance_seed: Option<u64>,
    pub seed: u64,
    #[serde(flatten)]
    pub analysis: AnalysisConfig,
    pub runs: usize,
    pub sweep_sizes: Vec<usize>,
    pub min_videos: usize,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            inputs: Inputs::default(),
            channels: Vec::new(),
            period: PeriodSpec::default(),
            include_replies: false,
            user_filter: true,
            balance_seed: None,
            seed: 0,
            analysis: AnalysisConfig::default(),
            runs: 5,
            sweep_sizes: vec![1_000, 2_000, 3_000, 4_000, 5_000],
            min_videos: DEFAULT_MIN_VIDEOS,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config file {}: {e}", path.display())))
    }

    pub fn balance_seed(&self) -> u64 {
        self.balance_seed.unwrap_or(self.seed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, hex-encoded. The output
    /// directory is left out so relocated runs hash alike.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        digest_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }
}

pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
