use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use qsl_core::models::{
    grover_problem_dim, perturbed_pspin_problem, pspin_problem, spin_network_problem,
    AnnealingProblem, SpinGraph,
};
use qsl_core::optimize::{Aggregation, OptimizerConfig, SearchGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Model selection. Spin graphs come from a file or inline JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Grover {
        /// Number of qubits; `d = 2^n` unless `d` is given.
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        d: Option<usize>,
        #[serde(default = "default_marked")]
        marked: Vec<usize>,
    },
    Pspin {
        n: usize,
        p: u32,
    },
    PerturbedPspin {
        n: usize,
        p: u32,
        #[serde(default = "one")]
        lambda: f64,
    },
    SpinGraph {
        #[serde(default)]
        path: Option<PathBuf>,
        #[serde(default)]
        graph: Option<SpinGraph>,
    },
}

fn default_marked() -> Vec<usize> {
    vec![0]
}

fn one() -> f64 {
    1.0
}

/// Values along either an explicit list or a geometric grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeAxis {
    List(Vec<f64>),
    Geometric { min: f64, max: f64, points: usize },
}

impl TimeAxis {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            TimeAxis::List(v) => v.clone(),
            TimeAxis::Geometric { min, max, points } => {
                if !(*min > 0.0 && max >= min && max.is_finite()) || *points == 0 {
                    bail!("geometric time axis needs 0 < min <= max < inf and points >= 1");
                }
                if *points == 1 {
                    vec![*min]
                } else {
                    let r = (max / min).ln();
                    (0..*points)
                        .map(|k| min * (r * k as f64 / (*points - 1) as f64).exp())
                        .collect()
                }
            }
        };
        if v.is_empty() {
            bail!("time axis is empty");
        }
        if let Some(t) = v.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            bail!("time axis values must be positive and finite, got {t}");
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub d: Option<Vec<usize>>,
    /// Total spin counts for the p-spin sweep.
    pub n: Option<Vec<usize>>,
    pub p: Option<Vec<u32>>,
    pub t: Option<TimeAxis>,
    pub g_max: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    /// Minimal-time search grid; defaults to `[0.5, 6] x bound`.
    pub search: Option<SearchGrid>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub problem: Option<ProblemSpec>,
    pub f_max: f64,
    pub g_max: f64,
    pub optimizer: OptimizerConfig,
    pub sweep: SweepSpec,
    pub aggregation: Option<Aggregation>,
    pub threshold: f64,
    pub output: OutputSpec,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            problem: None,
            f_max: 1.0,
            g_max: 1.0,
            optimizer: OptimizerConfig::default(),
            sweep: SweepSpec::default(),
            aggregation: None,
            threshold: 0.99,
            output: OutputSpec::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("f_max", self.f_max), ("g_max", self.g_max)] {
            if !(v > 0.0) {
                bail!("{name} must be positive, got {v}");
            }
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            bail!("threshold must lie in (0, 1), got {}", self.threshold);
        }
        self.optimizer.validate()?;
        Ok(())
    }

    pub fn problem_spec(&self) -> Result<&ProblemSpec> {
        self.problem
            .as_ref()
            .context("no problem given (use --model or a config file)")
    }
}

/// A built problem together with the model data needed for model-specific bounds.
pub struct Built {
    pub problem: AnnealingProblem,
    pub model: Model,
}

pub enum Model {
    Grover { d: usize, marked: usize },
    Pspin,
    PerturbedPspin { n: usize, p: u32, lambda: f64 },
    SpinGraph(SpinGraph),
}

pub fn load_graph(path: &Path) -> Result<SpinGraph> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading spin graph {}", path.display()))?;
    let g: SpinGraph = serde_json::from_str(&text)
        .with_context(|| format!("invalid spin graph file {}", path.display()))?;
    Ok(g)
}

impl ProblemSpec {
    pub fn build(&self, f_max: f64, g_max: f64) -> Result<Built> {
        Ok(match self {
            ProblemSpec::Grover { n, d, marked } => {
                let d = match (n, d) {
                    (_, Some(d)) => *d,
                    (Some(n), None) => 1usize
                        .checked_shl(*n as u32)
                        .filter(|_| *n < 63)
                        .context("n too large")?,
                    (None, None) => bail!("grover needs n or d"),
                };
                let problem = grover_problem_dim(d, marked, f_max, g_max)?;
                let mut distinct = marked.clone();
                distinct.sort_unstable();
                distinct.dedup();
                Built {
                    problem,
                    model: Model::Grover {
                        d,
                        marked: distinct.len(),
                    },
                }
            }
            ProblemSpec::Pspin { n, p } => Built {
                problem: pspin_problem(*n, *p, f_max, g_max)?,
                model: Model::Pspin,
            },
            ProblemSpec::PerturbedPspin { n, p, lambda } => Built {
                problem: perturbed_pspin_problem(*n, *p, *lambda, f_max, g_max)?,
                model: Model::PerturbedPspin {
                    n: *n,
                    p: *p,
                    lambda: *lambda,
                },
            },
            ProblemSpec::SpinGraph { path, graph } => {
                let g = match (path, graph) {
                    (Some(p), None) => load_graph(p)?,
                    (None, Some(g)) => g.clone(),
                    _ => bail!("spin_graph needs exactly one of path or graph"),
                };
                if g.n_edges() == 0 {
                    bail!("spin graph has no edges");
                }
                Built {
                    problem: spin_network_problem(&g, f_max, g_max)?,
                    model: Model::SpinGraph(g),
                }
            }
        })
    }
}
