//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tcdmrg::dmrg::DmrgConfig;
use tcdmrg::hamiltonian::{default_penalty, ModelParams};
use tcdmrg::lattice::{Lattice, OrderingKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: LatticeSection,
    pub model: ModelSection,
    #[serde(default)]
    pub dmrg: DmrgSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    Snake,
    RowMajor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub lx: usize,
    pub ly: usize,
    #[serde(default = "yes")]
    pub pbc: bool,
    #[serde(default = "snake")]
    pub ordering: Ordering,
}

fn yes() -> bool {
    true
}

fn snake() -> Ordering {
    Ordering::Snake
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub t: f64,
    pub u: f64,
    #[serde(default)]
    pub j: f64,
    pub n_alpha: usize,
    pub n_beta: usize,
    /// Defaults to `max(2U, 10|t|)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty_lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DmrgSection {
    pub m: usize,
    pub max_sweeps: usize,
    pub energy_tol: f64,
    pub davidson_tol: f64,
    pub davidson_max_subspace: usize,
    pub davidson_keep: usize,
    pub davidson_max_iter: usize,
    pub seed: u64,
}

impl Default for DmrgSection {
    fn default() -> Self {
        let d = DmrgConfig::default();
        Self {
            m: d.m,
            max_sweeps: d.max_sweeps,
            energy_tol: d.energy_tol,
            davidson_tol: d.davidson_tol,
            davidson_max_subspace: d.davidson_max_subspace,
            davidson_keep: d.davidson_keep,
            davidson_max_iter: d.davidson_max_iter,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            path: None,
            format: "csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub m: Vec<usize>,
    pub j: Vec<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text)?;
        // Make the defaulted penalty explicit so it shows up in the echo.
        if cfg.model.penalty_lambda.is_none() {
            cfg.model.penalty_lambda = Some(default_penalty(cfg.model.t, cfg.model.u));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every field the run will use before anything is computed.
    pub fn validate(&self) -> Result<()> {
        let lattice = self.lattice().context("lattice")?;
        self.params().validate(&lattice).context("model")?;
        self.dmrg_config().validate().context("dmrg")?;
        if self.output.format != "csv" {
            bail!("output.format: only \"csv\" is supported, got {:?}", self.output.format);
        }
        if let Some(scan) = &self.scan {
            check_scan_lists(&scan.m, &scan.j)?;
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<Lattice> {
        let kind = match self.lattice.ordering {
            Ordering::Snake => OrderingKind::Snake,
            Ordering::RowMajor => OrderingKind::RowMajor,
        };
        Ok(Lattice::new(self.lattice.lx, self.lattice.ly, self.lattice.pbc, kind)?)
    }

    pub fn params(&self) -> ModelParams {
        let m = &self.model;
        ModelParams {
            t: m.t,
            u: m.u,
            j: m.j,
            n_alpha: m.n_alpha,
            n_beta: m.n_beta,
            penalty_lambda: m.penalty_lambda.unwrap_or_else(|| default_penalty(m.t, m.u)),
        }
    }

    pub fn dmrg_config(&self) -> DmrgConfig {
        let d = &self.dmrg;
        DmrgConfig {
            m: d.m,
            max_sweeps: d.max_sweeps,
            energy_tol: d.energy_tol,
            davidson_tol: d.davidson_tol,
            davidson_max_subspace: d.davidson_max_subspace,
            davidson_keep: d.davidson_keep,
            davidson_max_iter: d.davidson_max_iter,
            seed: d.seed,
        }
    }

    /// The resolved config as `# `-prefixed TOML lines.
    pub fn echo(&self) -> String {
        let body = toml::to_string(self).expect("config serializes");
        body.lines().map(|l| format!("# {l}\n")).collect()
    }
}

pub fn check_scan_lists(m: &[usize], j: &[f64]) -> Result<()> {
    if m.is_empty() || j.is_empty() {
        bail!("scan: m and j lists must be nonempty");
    }
    if m.contains(&0) {
        bail!("scan.m: bond dimensions must be >= 1");
    }
    if j.iter().any(|x| !x.is_finite()) {
        bail!("scan.j: values must be finite");
    }
    Ok(())
}
