use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::asymptotics::default_mc_samples;
use crate::{Error, Result};

/// Regularization used by every train-validation run.
pub const SPLIT_LAMBDA: f64 = 1e4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    FigA,
    FigB,
    FigC,
    Counterexample,
    Rates,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::FigA,
        ExperimentKind::FigB,
        ExperimentKind::FigC,
        ExperimentKind::Counterexample,
        ExperimentKind::Rates,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::FigA => "fig_a",
            ExperimentKind::FigB => "fig_b",
            ExperimentKind::FigC => "fig_c",
            ExperimentKind::Counterexample => "counterexample",
            ExperimentKind::Rates => "rates",
        }
    }

    /// Key mixed into every random stream of this experiment.
    pub(crate) fn stream_tag(self) -> u64 {
        match self {
            ExperimentKind::FigA => 1,
            ExperimentKind::FigB => 2,
            ExperimentKind::FigC => 3,
            ExperimentKind::Counterexample => 4,
            ExperimentKind::Rates => 5,
        }
    }

    pub fn is_figure(self) -> bool {
        matches!(
            self,
            ExperimentKind::FigA | ExperimentKind::FigB | ExperimentKind::FigC
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Fully resolved experiment settings.
///
/// Fields that an experiment does not use are still present and echoed into
/// the metadata file. `lambda = None` means the train-train regularization is
/// tuned (see [`crate::asymptotics::tune_trtr_lambda`]).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub d: usize,
    pub n: usize,
    pub n1: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub t_grid: Vec<usize>,
    pub gamma_grid: Vec<f64>,
    pub replicates: usize,
    pub mc_samples: usize,
    pub r_sq: f64,
    pub output_dir: PathBuf,
    pub log_scale: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<String>,
    seed: Option<u64>,
    d: Option<usize>,
    n: Option<usize>,
    n1: Option<usize>,
    lambda: Option<f64>,
    t_grid: Option<Vec<usize>>,
    gamma_grid: Option<Vec<f64>>,
    replicates: Option<usize>,
    mc_samples: Option<usize>,
    r_sq: Option<f64>,
    output_dir: Option<PathBuf>,
    log_scale: Option<bool>,
}

fn default_gamma_grid() -> Vec<f64> {
    (1..=30).map(|k| k as f64 / 10.0).collect()
}

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentKind) -> Self {
        let base = Self {
            experiment,
            seed: 0,
            d: 60,
            n: 20,
            n1: 5,
            lambda: None,
            t_grid: vec![1000],
            gamma_grid: default_gamma_grid(),
            replicates: 50,
            mc_samples: default_mc_samples(60),
            r_sq: 1.0,
            output_dir: PathBuf::from("results").join(experiment.as_str()),
            log_scale: false,
        };
        match experiment {
            ExperimentKind::FigA => Self {
                replicates: 1,
                ..base
            },
            ExperimentKind::FigB => Self {
                t_grid: (1..=50).map(|k| 20 * k).collect(),
                log_scale: true,
                ..base
            },
            ExperimentKind::FigC => base,
            ExperimentKind::Counterexample => Self {
                d: 1,
                n: 5,
                n1: 0,
                lambda: Some(1.0),
                t_grid: vec![1_000, 10_000, 100_000],
                replicates: 20,
                ..base
            },
            ExperimentKind::Rates => Self {
                replicates: 1,
                ..base
            },
        }
    }

    /// Parses a flat TOML file. `expected` is the experiment implied by the
    /// caller (e.g. the CLI subcommand); a conflicting `experiment` key is an
    /// error.
    pub fn from_toml_str(text: &str, expected: Option<ExperimentKind>) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let declared = raw.experiment.as_deref().map(str::parse).transpose()?;
        let experiment = match (declared, expected) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!(
                    "config is for `{a}` but `{b}` was requested"
                )))
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(Error::Config("config does not name an experiment".into())),
        };
        let mut cfg = Self::defaults(experiment);
        if let Some(v) = raw.seed {
            cfg.seed = v;
        }
        if let Some(v) = raw.d {
            cfg.d = v;
            if raw.mc_samples.is_none() {
                cfg.mc_samples = default_mc_samples(v);
            }
        }
        if let Some(v) = raw.n {
            cfg.n = v;
        }
        if let Some(v) = raw.n1 {
            cfg.n1 = v;
        }
        if raw.lambda.is_some() {
            cfg.lambda = raw.lambda;
        }
        if let Some(v) = raw.t_grid {
            cfg.t_grid = v;
        }
        if let Some(v) = raw.gamma_grid {
            cfg.gamma_grid = v;
        }
        if let Some(v) = raw.replicates {
            cfg.replicates = v;
        }
        if let Some(v) = raw.mc_samples {
            cfg.mc_samples = v;
        }
        if let Some(v) = raw.r_sq {
            cfg.r_sq = v;
        }
        if let Some(v) = raw.output_dir {
            cfg.output_dir = v;
        }
        if let Some(v) = raw.log_scale {
            cfg.log_scale = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, expected: Option<ExperimentKind>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, expected)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.replicates == 0 {
            return fail("replicates must be >= 1".into());
        }
        if self.n == 0 {
            return fail("n must be >= 1".into());
        }
        if self.d == 0 {
            return fail("d must be >= 1".into());
        }
        if !(self.r_sq >= 0.0 && self.r_sq.is_finite()) {
            return fail(format!("r_sq must be finite and >= 0, got {}", self.r_sq));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return fail(format!("lambda must be finite and > 0, got {l}"));
            }
        }
        if self.mc_samples < 2 {
            return fail("mc_samples must be >= 2".into());
        }
        if self.t_grid.is_empty() || self.t_grid[0] == 0 {
            return fail("t_grid must be non-empty with positive entries".into());
        }
        if self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return fail("t_grid must be strictly increasing".into());
        }
        if self.gamma_grid.is_empty()
            || self.gamma_grid.iter().any(|g| !(*g > 0.0 && g.is_finite()))
        {
            return fail("gamma_grid must be non-empty with positive entries".into());
        }
        if self.gamma_grid.windows(2).any(|w| w[0] >= w[1]) {
            return fail("gamma_grid must be strictly increasing".into());
        }
        match self.experiment {
            ExperimentKind::Counterexample => {
                if self.n > 30 {
                    return fail(format!("counterexample needs n <= 30, got {}", self.n));
                }
                if self.t_grid[0] < 100 {
                    return fail("counterexample needs every T >= 100".into());
                }
                if self.lambda.is_none() {
                    return fail("counterexample needs an explicit lambda".into());
                }
            }
            _ => {
                if self.n1 == 0 || self.n1 >= self.n {
                    return fail(format!(
                        "n1 must satisfy 0 < n1 < n (got n1={}, n={})",
                        self.n1, self.n
                    ));
                }
            }
        }
        Ok(())
    }

    /// Dimension used at grid value `gamma`: `max(1, round(γ n))`.
    pub fn dim_for_gamma(&self, gamma: f64) -> usize {
        ((gamma * self.n as f64).round() as usize).max(1)
    }

    pub fn csv_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}.csv", self.experiment))
    }

    pub fn chart_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}.svg", self.experiment))
    }

    pub fn metadata_path(&self) -> PathBuf {
        self.output_dir.join("metadata.toml")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for k in ExperimentKind::ALL {
            ExperimentConfig::defaults(k).validate().unwrap();
            assert_eq!(k.as_str().parse::<ExperimentKind>().unwrap(), k);
        }
        let b = ExperimentConfig::defaults(ExperimentKind::FigB);
        assert_eq!((b.d, b.n, b.n1, b.replicates), (60, 20, 5, 50));
        assert_eq!((b.t_grid[0], *b.t_grid.last().unwrap()), (20, 1000));
    }

    #[test]
    fn parse_and_override() {
        let cfg = ExperimentConfig::from_toml_str(
            "experiment = \"fig_c\"\nseed = 9\nreplicates = 3\ngamma_grid = [0.5, 1.0]\n",
            None,
        )
        .unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::FigC);
        assert_eq!((cfg.seed, cfg.replicates), (9, 3));
        assert_eq!(cfg.gamma_grid, vec![0.5, 1.0]);
        assert_eq!(cfg.dim_for_gamma(0.01), 1);
        assert_eq!(cfg.dim_for_gamma(1.5), 30);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            "experiment = \"fig_b\"\nt_grid = []\n",
            "experiment = \"fig_b\"\nt_grid = [10, 10]\n",
            "experiment = \"fig_c\"\ngamma_grid = [2.0, 1.0]\n",
            "experiment = \"fig_b\"\nreplicates = 0\n",
            "experiment = \"fig_b\"\nbogus = 1\n",
            "experiment = \"nope\"\n",
            "seed = 1\n",
            "experiment = \"counterexample\"\nn = 40\n",
        ];
        for text in bad {
            let err = ExperimentConfig::from_toml_str(text, None).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}: {err}");
        }
        let err =
            ExperimentConfig::from_toml_str("experiment = \"fig_a\"\n", Some(ExperimentKind::FigB))
                .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn toml_echo_round_trips() {
        let cfg = ExperimentConfig::defaults(ExperimentKind::Counterexample);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text, None).unwrap(), cfg);
    }
}
