//! Run configuration, read from a versioned TOML file.
//!
//! ```toml
//! version = 1
//!
//! [problem]
//! kind = "cluster"        # diag | cluster | laplace1d | laplace2d | slit2d | mtx
//! gap = 1e-6
//! top = 1000
//!
//! [preconditioner]
//! kind = "jacobi"         # identity | jacobi | ichol | shifted-inverse
//!
//! [run]
//! seeds = [0, 1, 2]
//! initial_guess = "random-normal"
//! oracle = true
//! workers = 4
//! out = "out"
//!
//! [[solvers]]
//! method = "lopcga"
//! tol = 1e-10
//! max_iters = 5000
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cgeig_core::solvers::{Method, ShiftRule, SolverConfig, TpcgFamily, TpcgVariant};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::guess::GuessStyle;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Diag {
        spectrum: Vec<f64>,
    },
    /// Spectrum `(1, 1+gap, 2, 3, …, top)`.
    Cluster {
        gap: f64,
        top: usize,
    },
    Laplace1d {
        n: usize,
    },
    Laplace2d {
        nx: usize,
        ny: usize,
    },
    Slit2d {
        nx: usize,
        ny: usize,
        #[serde(default = "default_slit")]
        slit: [f64; 2],
    },
    /// Matrix Market files; `m` defaults to the identity.
    Mtx {
        a: PathBuf,
        m: Option<PathBuf>,
    },
}

fn default_slit() -> [f64; 2] {
    [0.1, 0.9]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PrecondSpec {
    #[default]
    Identity,
    Jacobi,
    Ichol {
        #[serde(default = "default_droptol")]
        droptol: f64,
        #[serde(default)]
        sigma: f64,
    },
    ShiftedInverse {
        #[serde(default)]
        sigma: f64,
    },
}

fn default_droptol() -> f64 {
    0.1
}

/// One solver column of a grid. Absent fields take the solver defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub method: String,
    pub label: Option<String>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    /// bradbury-fletcher | polak-ribiere | jacobi | daniel | perdon-gambolati | conjugate
    pub family: Option<String>,
    /// For `family = "conjugate"`.
    pub alpha: Option<f64>,
    /// extrapolated | current | sigma
    pub shift_rule: Option<String>,
    /// standard | lagged-projector
    pub variant: Option<String>,
    pub tau_angle: Option<f64>,
    pub gamma_gram: Option<f64>,
    pub peak_factor: Option<f64>,
    pub peak_window: Option<usize>,
    pub activation: Option<f64>,
    pub sigma_guess: Option<f64>,
    pub normalize_every: Option<usize>,
    pub gd_max_dim: Option<usize>,
    /// `λ₁` for pcg-heuristic; the oracle value is used when absent.
    pub lambda1: Option<f64>,
    pub lambda1_update_below: Option<f64>,
}

impl SolverSpec {
    pub fn new(method: Method) -> Self {
        Self { method: method.name().to_string(), ..Self::default() }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.method.clone())
    }

    pub fn method(&self) -> Result<Method> {
        Method::from_str(&self.method).map_err(|e| HarnessError::Config(e.to_string()))
    }

    fn family(&self) -> Result<Option<TpcgFamily>> {
        let cfg = |e: cgeig_core::Error| HarnessError::Config(e.to_string());
        Ok(match self.family.as_deref() {
            None => None,
            Some("conjugate") => {
                let shift = match self.shift_rule.as_deref().unwrap_or("extrapolated") {
                    "extrapolated" => ShiftRule::Extrapolated,
                    "current" => ShiftRule::Current,
                    "sigma" => ShiftRule::Sigma,
                    s => return Err(HarnessError::Config(format!("unknown shift rule '{s}'"))),
                };
                Some(TpcgFamily::Conjugate { alpha: self.alpha.unwrap_or(1.0), shift })
            }
            Some(name) => Some(TpcgFamily::from_name(name).map_err(cfg)?),
        })
    }

    /// Core solver settings for one run.
    pub fn to_solver_config(&self, seed: u64, lambda1_reference: Option<f64>) -> Result<SolverConfig> {
        let mut c = SolverConfig::with_method(self.method()?);
        if let Some(f) = self.family()? {
            c.tpcg_family = f;
            // The lagged projector only exists for α = 1.
            if !matches!(f, TpcgFamily::Conjugate { alpha, .. } if alpha == 1.0) {
                c.tpcg_variant = TpcgVariant::Standard;
            }
        }
        match self.variant.as_deref() {
            None => {}
            Some("standard") => c.tpcg_variant = TpcgVariant::Standard,
            Some("lagged-projector") => c.tpcg_variant = TpcgVariant::LaggedProjector,
            Some(v) => return Err(HarnessError::Config(format!("unknown variant '{v}'"))),
        }
        macro_rules! set {
            ($($f:ident => $g:ident),*) => { $(if let Some(v) = self.$f { c.$g = v; })* };
        }
        set!(tol => tol_residual, max_iters => max_iters, tau_angle => tau_angle, gamma_gram => gamma_gram,
             peak_factor => peak_factor, peak_window => peak_decrease_window, activation => activation,
             normalize_every => normalize_every, gd_max_dim => gd_max_dim);
        c.sigma_guess = self.sigma_guess;
        c.lambda1_update_below = self.lambda1_update_below;
        c.lambda1_reference = lambda1_reference;
        c.lambda1_input = self.lambda1.or(if c.method == Method::PcgHeuristic { lambda1_reference } else { None });
        c.seed = seed;
        c.validate().map_err(|e| HarnessError::Config(format!("solver '{}': {e}", self.label())))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub initial_guess: GuessStyle,
    #[serde(default = "default_true")]
    pub oracle: bool,
    /// Worker threads for the grid; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seeds: default_seeds(), initial_guess: GuessStyle::Ones, oracle: true, workers: 0, out: default_out() }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_true() -> bool {
    true
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub preconditioner: PrecondSpec,
    #[serde(default)]
    pub run: RunSection,
    pub solvers: Vec<SolverSpec>,
}

/// Command-line overrides applied on top of a file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub method: Option<String>,
    pub oracle: Option<bool>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        if let ProblemSpec::Mtx { a, m } = &mut cfg.problem {
            for p in std::iter::once(a).chain(m.as_mut()) {
                if p.is_relative() {
                    *p = base_dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.solvers.is_empty() {
            return bad("at least one [[solvers]] entry is required".into());
        }
        if self.run.seeds.is_empty() {
            return bad("run.seeds is empty".into());
        }
        if let ProblemSpec::Mtx { a, m } = &self.problem {
            for p in std::iter::once(a).chain(m) {
                if !p.is_file() {
                    return bad(format!("matrix file {} does not exist", p.display()));
                }
            }
        }
        for s in &self.solvers {
            s.method()?;
            // Reference λ₁ is not known yet; validate with a placeholder where needed.
            s.to_solver_config(0, Some(0.0))?;
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.run.seeds = vec![s];
        }
        if let Some(m) = &o.method {
            self.solvers = vec![SolverSpec { method: m.clone(), ..self.solvers[0].clone() }];
            self.solvers[0].label = None;
        }
        for s in &mut self.solvers {
            if o.tol.is_some() {
                s.tol = o.tol;
            }
            if o.max_iters.is_some() {
                s.max_iters = o.max_iters;
            }
        }
        if let Some(b) = o.oracle {
            self.run.oracle = b;
        }
        if let Some(out) = &o.out {
            self.run.out = out.clone();
        }
        self.validate()
    }
}
