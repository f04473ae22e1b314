use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use crossnli::eval::ParsingMode;
use crossnli::gateway::GatewayConfig;
use crossnli::lexicon::{LanguageCode, MtConfig};
use serde::Deserialize;

/// Contents of the `--config` JSON file. Every field is optional; flags
/// take precedence over whatever is set here.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Lexicon file; the bundled lexicon when absent.
    pub lexicon: Option<PathBuf>,
    /// Template file; the builtin templates when absent.
    pub templates: Option<PathBuf>,
    pub languages: Option<Vec<LanguageCode>>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub chat: Option<GatewayConfig>,
    pub embeddings: Option<GatewayConfig>,
    pub mt: Option<MtConfig>,
    pub parsing_mode: Option<ParsingMode>,
    pub output_dir: Option<PathBuf>,
}

impl Config {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's own directory.
    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: Config = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut config.lexicon,
            &mut config.templates,
            &mut config.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            rebase(p);
        }
        for gw in [&mut config.chat, &mut config.embeddings]
            .into_iter()
            .flatten()
        {
            if let Some(dir) = &mut gw.cache_dir {
                rebase(dir);
            }
        }
        for p in [&config.lexicon, &config.templates].into_iter().flatten() {
            anyhow::ensure!(p.exists(), "config references missing file {}", p.display());
        }
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("lex.json"), "{}").unwrap();
        let path = dir.path().join("c.json");
        fs::write(
            &path,
            r#"{"lexicon": "lex.json", "output_dir": "out",
                "chat": {"endpoint_url": "http://x", "model": "m", "cache_dir": "cache"}}"#,
        )
        .unwrap();
        let c = Config::load(&path).unwrap();
        assert_eq!(c.lexicon.unwrap(), dir.path().join("lex.json"));
        assert_eq!(c.output_dir.unwrap(), dir.path().join("out"));
        assert_eq!(c.chat.unwrap().cache_dir.unwrap(), dir.path().join("cache"));
    }

    #[test]
    fn missing_file_and_unknown_fields_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"lexicon": "nope.json"}"#).unwrap();
        assert!(Config::load(&path)
            .unwrap_err()
            .to_string()
            .contains("nope.json"));
        fs::write(&path, r#"{"colour": 1}"#).unwrap();
        assert!(Config::load(&path).is_err());
    }
}
