//! Optional TOML configuration shared by the subcommands. Command-line
//! flags override anything set here.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vpdistill_core::augment::{DetachedMode, LinkMode};
use vpdistill_core::bench::BenchmarkConfig;
use vpdistill_core::exec::Limits;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub bench: BenchmarkConfig,
    pub annotate: AnnotateSection,
    pub augment: AugmentSection,
    pub eval: EvalSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotateSection {
    pub retrieval_k: usize,
    pub max_questions: Option<usize>,
    pub max_retries: usize,
    pub step_budget: u64,
    /// File holding a prompt template with an `{examples}` slot.
    pub prompt_template: Option<PathBuf>,
}

impl Default for AnnotateSection {
    fn default() -> Self {
        AnnotateSection {
            retrieval_k: 50,
            max_questions: None,
            max_retries: 2,
            step_budget: Limits::default().step_budget,
            prompt_template: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub k: usize,
    pub probability: f64,
    pub link_mode: LinkMode,
    pub question_detached_mode: DetachedMode,
    pub retries_per_pair: usize,
    pub lexicon: Option<PathBuf>,
}

impl Default for AugmentSection {
    fn default() -> Self {
        AugmentSection {
            k: 10,
            probability: 0.5,
            link_mode: LinkMode::Linked,
            question_detached_mode: DetachedMode::Skip,
            retries_per_pair: 8,
            lexicon: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub ngram_n: usize,
    pub throughput_warmup: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            ngram_n: 2,
            throughput_warmup: 10,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigFileError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text).map_err(|message| ConfigFileError::Parse {
            path: path.to_owned(),
            message,
        })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vpdistill_core::bench::Family;

    #[test]
    fn sections_override_defaults() {
        let c = FileConfig::parse(
            "seed = 7\n[bench]\nn_scenes = 3\n[bench.family_weights]\ncount = 1.0\n[augment]\nk = 2\nlink_mode = \"independent\"\n",
        )
        .unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.bench.n_scenes, 3);
        assert_eq!(c.bench.family_weights.get(&Family::Count), Some(&1.0));
        assert_eq!(c.bench.questions_per_scene, 10);
        assert_eq!(c.augment.k, 2);
        assert_eq!(c.augment.link_mode, LinkMode::Independent);
        assert_eq!(c.annotate.retrieval_k, 50);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(FileConfig::parse("[annotate]\nretrieval = 3\n").is_err());
    }
}
