use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

use ratebench_core::analysis::{ReportFormat, DEFAULT_RATE_ALPHA, DEFAULT_RATIO_ALPHA};
use ratebench_core::validation::ValidationConfig;

pub const CONFIG_ENV: &str = "RATEBENCH_CONFIG";

/// Input and output locations. Relative paths in a config file resolve
/// against the file's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub sgo_csv: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub roster: Option<PathBuf>,
    pub columns: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub benchmarks: Option<PathBuf>,
    pub ledger: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.sgo_csv,
            &mut self.records,
            &mut self.events,
            &mut self.roster,
            &mut self.columns,
            &mut self.rules,
            &mut self.benchmarks,
            &mut self.ledger,
            &mut self.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub alpha: f64,
    pub ratio_alpha: f64,
    pub seed: u64,
    pub formats: Vec<ReportFormat>,
    /// Replaces the built-in list of superseded report IDs.
    pub duplicate_ids: Option<Vec<String>>,
    pub validation: ValidationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            alpha: DEFAULT_RATE_ALPHA,
            ratio_alpha: DEFAULT_RATIO_ALPHA,
            seed: ValidationConfig::default().seed,
            formats: vec![ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json],
            duplicate_ids: None,
            validation: ValidationConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads `explicit`, else the file named by `RATEBENCH_CONFIG`, else
    /// returns the defaults.
    pub fn discover(explicit: Option<&Path>) -> anyhow::Result<Self> {
        let from_env = std::env::var_os(CONFIG_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from);
        match explicit.map(Path::to_path_buf).or(from_env) {
            Some(path) => Self::load(&path),
            None => Ok(Self::default()),
        }
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ratebench_core::Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| ratebench_core::Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            config.paths.resolve(dir);
        }
        config.validate().with_context(|| format!("in {}", path.display()))?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        for (name, a) in [("alpha", self.alpha), ("ratio_alpha", self.ratio_alpha)] {
            if !(a > 0.0 && a < 1.0) {
                bail!(ratebench_core::Error::Config(format!(
                    "{name} = {a} must lie in (0, 1)"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "alpha = 0.1\nformats = [\"csv\"]\n[paths]\nledger = \"ledger.toml\"\n",
        )
        .unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.alpha, 0.1);
        assert_eq!(c.formats, [ReportFormat::Csv]);
        assert_eq!(c.paths.ledger.unwrap(), dir.path().join("ledger.toml"));
        assert_eq!(c.ratio_alpha, DEFAULT_RATIO_ALPHA);
    }

    #[test]
    fn rejects_bad_alpha_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "alpha = 1.5\n").unwrap();
        assert!(RunConfig::load(&path).is_err());
        std::fs::write(&path, "colour = 1\n").unwrap();
        assert!(RunConfig::load(&path).is_err());
    }
}
