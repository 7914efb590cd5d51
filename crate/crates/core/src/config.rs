//! Project configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! mode = "simulated"          # or "process"
//! workspace = "mutscope-out"
//!
//! [bench]
//! bundle = "bench"            # simulated mode only
//!
//! [sampling]
//! strategy = "fsci"
//! t_ci = 0.10
//!
//! [analysis]
//! metric = "cosine"
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::build::BuildProfile;
use crate::coverage::DistanceMetric;
use crate::error::{Error, Result};
use crate::mutator::MutationOperator;
use crate::sampler::SamplingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Tests answered from a bench bundle's kill matrix.
    Simulated,
    /// Real builds and test processes.
    Process,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    #[serde(default)]
    pub seed: u64,
    pub mode: Mode,
    /// Artifact store; one subdirectory per stage.
    pub workspace: PathBuf,
    #[serde(default)]
    pub sources: Option<SourcesConfig>,
    #[serde(default)]
    pub build: Option<BuildConfig>,
    #[serde(default)]
    pub tests: Option<TestsConfig>,
    #[serde(default)]
    pub coverage: Option<CoverageConfig>,
    #[serde(default)]
    pub bench: Option<BenchConfig>,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcesConfig {
    pub root: PathBuf,
    /// Files relative to `root`; every `*.c` below `root` when empty.
    #[serde(default)]
    pub files: Vec<PathBuf>,
    #[serde(default)]
    pub operators: Option<Vec<MutationOperator>>,
    /// Only mutate statements covered by at least one test.
    #[serde(default = "yes")]
    pub gate_on_coverage: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    pub command: String,
    pub artifact: PathBuf,
    pub levels: Vec<String>,
    /// Defaults to the sources root.
    #[serde(default)]
    pub workdir: Option<PathBuf>,
    #[serde(default = "one")]
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestsConfig {
    /// `id<TAB>duration<TAB>command` rows.
    pub manifest: PathBuf,
    #[serde(default = "default_env")]
    pub env_passthrough: Vec<String>,
    #[serde(default)]
    pub coverage_command: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageConfig {
    /// Original-program coverage matrix.
    pub matrix: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub bundle: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub metric: DistanceMetric,
    pub t_e: f64,
    pub t_d: f64,
    /// Score with duplicates removed instead of treating all as nonduplicate.
    pub discard_duplicates: bool,
    /// Order and reduce covering tests by coverage distance.
    pub prioritize: bool,
    /// Also run the covering tests in original order to measure savings.
    pub baseline: bool,
    pub jobs: usize,
    /// Coverage collections per test in process mode.
    pub coverage_repeats: usize,
    /// Differing collections of one test needed to call a mutant
    /// nonequivalent.
    pub coverage_votes: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            metric: DistanceMetric::Cosine,
            t_e: 0.0,
            t_d: 0.0,
            discard_duplicates: false,
            prioritize: true,
            baseline: true,
            jobs: 1,
            coverage_repeats: 1,
            coverage_votes: 1,
        }
    }
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

fn default_env() -> Vec<String> {
    vec!["PATH".into(), "HOME".into()]
}

impl ProjectConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: ProjectConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.workspace);
        if let Some(s) = &mut self.sources {
            fix(&mut s.root);
        }
        if let Some(b) = &mut self.build {
            if let Some(w) = &mut b.workdir {
                fix(w);
            }
        }
        if let Some(t) = &mut self.tests {
            fix(&mut t.manifest);
        }
        if let Some(c) = &mut self.coverage {
            fix(&mut c.matrix);
        }
        if let Some(b) = &mut self.bench {
            fix(&mut b.bundle);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        let a = &self.analysis;
        if !(a.t_e >= 0.0 && a.t_d >= 0.0) {
            return Err(Error::Config("thresholds must be non-negative".into()));
        }
        if a.coverage_votes == 0 || a.coverage_votes > a.coverage_repeats {
            return Err(Error::Config("coverage_votes must be between 1 and coverage_repeats".into()));
        }
        match self.mode {
            Mode::Simulated if self.bench.is_none() => {
                Err(Error::Config("simulated mode needs a [bench] bundle".into()))
            }
            Mode::Process
                if self.sources.is_none() || self.tests.is_none() || self.coverage.is_none() || self.build.is_none() =>
            {
                Err(Error::Config("process mode needs [sources], [build], [tests] and [coverage]".into()))
            }
            _ => {
                if let Some(p) = self.build_profile() {
                    p.validate().map_err(|e| Error::Config(e.to_string()))?;
                }
                Ok(())
            }
        }
    }

    pub fn build_profile(&self) -> Option<BuildProfile> {
        let b = self.build.as_ref()?;
        let workdir = b
            .workdir
            .clone()
            .or_else(|| self.sources.as_ref().map(|s| s.root.clone()))
            .unwrap_or_else(|| PathBuf::from("."));
        Some(BuildProfile {
            command: b.command.clone(),
            artifact: b.artifact.clone(),
            levels: b.levels.clone(),
            workdir,
        })
    }
}
