//! Run configuration: JSON file, command-line overrides, defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use oseen_core::analysis::{MeshHierarchy, ProblemKind, StudyConfig};
use oseen_core::forms::default_sigma;
use oseen_core::quadrature::{default_degree, MAX_DEGREE};
use oseen_core::{Convection, DiscretizationParams};

/// `"auto"` or an explicit positive penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Value(f64),
    Keyword(String),
}

/// Contents of a `--config` file. Every key is optional; unknown keys are
/// rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub nu: Option<f64>,
    pub k: Option<usize>,
    pub levels: Option<usize>,
    pub level: Option<usize>,
    pub n0: Option<usize>,
    pub perturb: Option<f64>,
    pub seed: Option<u64>,
    pub sigma: Option<SigmaSpec>,
    pub delta0: Option<f64>,
    pub delta0_sweep: Option<Vec<f64>>,
    pub convection: Option<String>,
    pub vorticity: Option<bool>,
    pub volume_degree: Option<usize>,
    pub facet_degree: Option<usize>,
    pub problem: Option<String>,
    pub hierarchy: Option<String>,
    pub tolerance: Option<f64>,
    pub drop_interior: Option<bool>,
    pub stats: Option<[usize; 3]>,
    pub out: Option<PathBuf>,
}

/// Flags shared by every command; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Viscosity.
    #[arg(long, global = true)]
    pub nu: Option<f64>,
    /// Velocity order (>= 2).
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Number of mesh levels.
    #[arg(long, global = true)]
    pub levels: Option<usize>,
    /// Mesh level for single solves.
    #[arg(long, global = true)]
    pub level: Option<usize>,
    /// Cells per side of the level-1 mesh.
    #[arg(long, global = true)]
    pub n0: Option<usize>,
    /// Vertex perturbation relative to the grid spacing, in [0, 0.3].
    #[arg(long, global = true)]
    pub perturb: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Interior penalty, or "auto".
    #[arg(long, global = true)]
    pub sigma: Option<String>,
    /// Vorticity stabilization weight.
    #[arg(long, global = true)]
    pub delta0: Option<f64>,
    /// Comma-separated delta0 values; `study` then runs once per value.
    #[arg(long, global = true, value_delimiter = ',')]
    pub delta0_sweep: Option<Vec<f64>>,
    /// upwind, central or none.
    #[arg(long, global = true)]
    pub convection: Option<String>,
    /// Turn off vorticity stabilization.
    #[arg(long, global = true)]
    pub no_vorticity: bool,
    #[arg(long, global = true)]
    pub volume_degree: Option<usize>,
    #[arg(long, global = true)]
    pub facet_degree: Option<usize>,
    /// Problem tag: paper-benchmark (the trigonometric benchmark) or polynomial-mms.
    #[arg(long, global = true)]
    pub problem: Option<String>,
    /// nested or reperturbed.
    #[arg(long, global = true)]
    pub hierarchy: Option<String>,
    /// Relative residual accepted from the linear solver.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Audit a velocity space without interior DOFs (negative control).
    #[arg(long, global = true)]
    pub drop_interior: bool,
    /// Mesh statistics nv,ne,nt for `dofs`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub stats: Option<Vec<usize>>,
    /// Output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// Fully resolved configuration; printed as a header by every command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub nu: f64,
    pub k: usize,
    pub levels: usize,
    pub level: usize,
    pub n0: usize,
    pub perturb: f64,
    pub seed: u64,
    pub sigma: f64,
    pub sigma_auto: bool,
    pub delta0: f64,
    pub delta0_sweep: Vec<f64>,
    pub convection: String,
    pub vorticity: bool,
    pub volume_degree: usize,
    pub facet_degree: usize,
    pub problem: String,
    pub hierarchy: String,
    pub tolerance: f64,
    pub drop_interior: bool,
    pub stats: Option<[usize; 3]>,
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

pub fn read_file(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| bad(format!("invalid config {}: {e}", path.display())))
}

fn default_levels(command: &str) -> usize {
    match command {
        "study" => 4,
        "audit" => 2,
        _ => 1,
    }
}

impl RunConfig {
    pub fn resolve(command: &str, flags: &Overrides) -> Result<Self, ConfigError> {
        let file = match &flags.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let k = flags.k.or(file.k).unwrap_or(2);
        if k < 2 {
            return Err(bad(format!("k must satisfy k >= 2, got {k}")));
        }
        let sigma_spec = match &flags.sigma {
            Some(s) => match s.parse::<f64>() {
                Ok(v) => SigmaSpec::Value(v),
                Err(_) => SigmaSpec::Keyword(s.clone()),
            },
            None => file.sigma.clone().unwrap_or(SigmaSpec::Keyword("auto".into())),
        };
        let (sigma, sigma_auto) = match sigma_spec {
            SigmaSpec::Value(v) => (v, false),
            SigmaSpec::Keyword(s) if s == "auto" => (default_sigma(k), true),
            SigmaSpec::Keyword(s) => return Err(bad(format!("sigma must be a number or \"auto\", got \"{s}\""))),
        };
        let stats = match (&flags.stats, file.stats) {
            (Some(v), _) if v.len() == 3 => Some([v[0], v[1], v[2]]),
            (Some(v), _) => return Err(bad(format!("stats needs nv,ne,nt, got {} values", v.len()))),
            (None, s) => s,
        };
        let cfg = RunConfig {
            command: command.to_string(),
            nu: flags.nu.or(file.nu).unwrap_or(1e-6),
            k,
            levels: flags.levels.or(file.levels).unwrap_or_else(|| default_levels(command)),
            level: flags.level.or(file.level).unwrap_or(1),
            n0: flags.n0.or(file.n0).unwrap_or(12),
            perturb: flags.perturb.or(file.perturb).unwrap_or(0.2),
            seed: flags.seed.or(file.seed).unwrap_or(42),
            sigma,
            sigma_auto,
            delta0: flags.delta0.or(file.delta0).unwrap_or(oseen_core::forms::DEFAULT_DELTA0),
            delta0_sweep: flags.delta0_sweep.clone().or(file.delta0_sweep).unwrap_or_default(),
            convection: flags.convection.clone().or(file.convection).unwrap_or_else(|| "upwind".into()),
            vorticity: !flags.no_vorticity && file.vorticity.unwrap_or(true),
            volume_degree: flags.volume_degree.or(file.volume_degree).unwrap_or(default_degree(k)),
            facet_degree: flags.facet_degree.or(file.facet_degree).unwrap_or(default_degree(k)),
            problem: flags.problem.clone().or(file.problem).unwrap_or_else(|| "paper-benchmark".into()),
            hierarchy: flags.hierarchy.clone().or(file.hierarchy).unwrap_or_else(|| "nested".into()),
            tolerance: flags.tolerance.or(file.tolerance).unwrap_or(oseen_core::solver::DEFAULT_TOLERANCE),
            drop_interior: flags.drop_interior || file.drop_interior.unwrap_or(false),
            stats,
            out: flags.out.clone().or(file.out),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(bad(format!("nu must be positive, got {}", self.nu)));
        }
        if self.levels == 0 || self.level == 0 {
            return Err(bad("levels and level must be >= 1"));
        }
        if self.command == "study" && self.levels < 2 {
            return Err(bad("study needs levels >= 2"));
        }
        if self.n0 == 0 {
            return Err(bad("n0 must be >= 1"));
        }
        if !(0.0..=0.3).contains(&self.perturb) {
            return Err(bad(format!("perturb must lie in [0, 0.3], got {}", self.perturb)));
        }
        if !(self.sigma > 0.0) {
            return Err(bad(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.delta0 >= 0.0) || self.delta0_sweep.iter().any(|d| !(*d >= 0.0)) {
            return Err(bad("delta0 must be >= 0"));
        }
        for d in [self.volume_degree, self.facet_degree] {
            if d == 0 || d > MAX_DEGREE {
                return Err(bad(format!("quadrature degree must lie in 1..={MAX_DEGREE}, got {d}")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(bad("tolerance must be positive"));
        }
        self.convection_scheme()?;
        self.problem_kind()?;
        self.mesh_hierarchy()?;
        self.params().validate().map_err(|e| bad(e.to_string()))?;
        Ok(())
    }

    pub fn convection_scheme(&self) -> Result<Convection, ConfigError> {
        self.convection.parse().map_err(|e: oseen_core::Error| bad(e.to_string()))
    }

    pub fn problem_kind(&self) -> Result<ProblemKind, ConfigError> {
        self.problem.parse().map_err(|e: oseen_core::Error| bad(e.to_string()))
    }

    pub fn mesh_hierarchy(&self) -> Result<MeshHierarchy, ConfigError> {
        self.hierarchy.parse().map_err(|e: oseen_core::Error| bad(e.to_string()))
    }

    pub fn params(&self) -> DiscretizationParams {
        let mut p = DiscretizationParams::new(self.k);
        p.sigma = self.sigma;
        p.delta0 = self.delta0;
        p.convection = self.convection_scheme().unwrap_or_default();
        p.vorticity = self.vorticity;
        p.volume_degree = self.volume_degree;
        p.facet_degree = self.facet_degree;
        p
    }

    pub fn study(&self) -> StudyConfig {
        let mut s = StudyConfig::new(self.nu, self.k);
        s.levels = self.levels;
        s.n0 = self.n0;
        s.perturb = self.perturb;
        s.seed = self.seed;
        s.hierarchy = self.mesh_hierarchy().unwrap_or_default();
        s.problem = self.problem_kind().unwrap_or_default();
        s.params = self.params();
        s.tolerance = self.tolerance;
        s
    }

    /// `# config: {...}` header line.
    pub fn header(&self) -> String {
        format!("# config: {}\n", serde_json::to_string(self).expect("config serializes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_materialize() {
        let c = RunConfig::resolve("study", &Overrides::default()).unwrap();
        assert_eq!((c.k, c.levels, c.n0, c.seed), (2, 4, 12, 42));
        assert_eq!(c.sigma, 36.0);
        assert!(c.sigma_auto && c.vorticity);
        assert!(c.header().starts_with("# config: {\"command\":\"study\""));
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = serde_json::from_str::<FileConfig>(r#"{"nu": 1.0, "viscosity": 2}"#).unwrap_err();
        assert!(e.to_string().contains("unknown field"));
        let f: FileConfig = serde_json::from_str(r#"{"sigma": "auto", "k": 3}"#).unwrap();
        assert_eq!(f.sigma, Some(SigmaSpec::Keyword("auto".into())));
    }

    #[test]
    fn k_below_two_rejected() {
        let flags = Overrides {
            k: Some(1),
            ..Default::default()
        };
        assert!(RunConfig::resolve("solve", &flags).unwrap_err().0.contains("k >= 2"));
    }
}
