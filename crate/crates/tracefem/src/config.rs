//! Run configuration read from TOML.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracefem_core::assembly::{DiscreteSetup, FormParams, Method, Scaling};
use tracefem_core::deform::GeometrySource;
use tracefem_core::solver::{SolverKind, SolverOptions};
use tracefem_core::study::StudyConfig;

use crate::CliError;

const TOP_KEYS: &[&str] = &[
    "method",
    "k",
    "k_g",
    "k_p",
    "k_l",
    "eta",
    "rho",
    "rho_tilde",
    "levels",
    "geometry_source",
    "solver",
    "seed",
    "output_dir",
];
const SOLVER_KEYS: &[&str] = &["kind", "tol", "maxit"];
const SCALING_KEYS: &[&str] = &["c", "e"];

/// Finest level accepted from a configuration file.
pub const MAX_LEVEL: u32 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    P1,
    P2,
    Lagrange,
}

impl MethodName {
    pub fn method(self) -> Method {
        match self {
            MethodName::P1 => Method::P1,
            MethodName::P2 => Method::P2,
            MethodName::Lagrange => Method::Lagrange,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceName {
    Fe,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverName {
    Cg,
    Minres,
    Direct,
}

/// `c · h^{-e}`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub c: f64,
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    pub kind: SolverName,
    pub tol: f64,
    pub maxit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: MethodName,
    pub k: usize,
    pub k_g: usize,
    pub k_p: Option<usize>,
    pub k_l: Option<usize>,
    pub eta: Option<ScalingSpec>,
    pub rho: ScalingSpec,
    pub rho_tilde: Option<ScalingSpec>,
    pub levels: Vec<u32>,
    pub geometry_source: SourceName,
    pub solver: SolverSpec,
    pub seed: u64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
struct RawSolver {
    kind: Option<SolverName>,
    tol: Option<f64>,
    maxit: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct RawConfig {
    method: MethodName,
    k: usize,
    k_g: Option<usize>,
    k_p: Option<usize>,
    k_l: Option<usize>,
    eta: Option<ScalingSpec>,
    rho: Option<ScalingSpec>,
    rho_tilde: Option<ScalingSpec>,
    levels: Option<Vec<u32>>,
    geometry_source: Option<SourceName>,
    solver: Option<RawSolver>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
}

fn unknown_keys(table: &toml::Table) -> Vec<String> {
    let mut out = BTreeSet::new();
    for (key, value) in table {
        if !TOP_KEYS.contains(&key.as_str()) {
            out.insert(key.clone());
            continue;
        }
        let nested: Option<&[&str]> = match key.as_str() {
            "solver" => Some(SOLVER_KEYS),
            "eta" | "rho" | "rho_tilde" => Some(SCALING_KEYS),
            _ => None,
        };
        if let (Some(allowed), Some(t)) = (nested, value.as_table()) {
            for k in t.keys() {
                if !allowed.contains(&k.as_str()) {
                    out.insert(format!("{key}.{k}"));
                }
            }
        }
    }
    out.into_iter().collect()
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| invalid(e.message().to_string()))?;
        let unknown = unknown_keys(&table);
        if !unknown.is_empty() {
            return Err(invalid(format!("unknown keys: {}", unknown.join(", "))));
        }
        let raw: RawConfig = table.try_into().map_err(|e: toml::de::Error| invalid(e.message().to_string()))?;
        let k_g = raw.k_g.unwrap_or(raw.k);
        let default_kind = match raw.method {
            MethodName::Lagrange => SolverName::Direct,
            _ => SolverName::Cg,
        };
        let solver = match raw.solver {
            Some(s) => SolverSpec { kind: s.kind.unwrap_or(default_kind), tol: s.tol.unwrap_or(1e-10), maxit: s.maxit },
            None => SolverSpec { kind: default_kind, tol: 1e-10, maxit: None },
        };
        let cfg = RunConfig {
            method: raw.method,
            k: raw.k,
            k_g,
            k_p: raw.k_p,
            k_l: raw.k_l,
            eta: raw.eta,
            rho: raw.rho.ok_or_else(|| invalid("missing key rho"))?,
            rho_tilde: raw.rho_tilde,
            levels: raw.levels.unwrap_or_else(|| StudyConfig::default_levels(raw.method.method(), raw.k)),
            geometry_source: raw.geometry_source.unwrap_or(SourceName::Fe),
            solver,
            seed: raw.seed.unwrap_or(0),
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let check = |name: &str, v: usize, max: usize| {
            if v < 1 || v > max {
                Err(invalid(format!("{name} = {v} violates 1 <= {name} <= {max}")))
            } else {
                Ok(())
            }
        };
        check("k", self.k, 3)?;
        check("k_g", self.k_g, 3)?;
        match self.method {
            MethodName::P1 | MethodName::P2 => {
                let kp = self.k_p.ok_or_else(|| invalid("penalty methods need k_p"))?;
                check("k_p", kp, 4)?;
                if kp < self.k_g {
                    return Err(invalid(format!("k_p = {kp} violates k_p >= k_g = {}", self.k_g)));
                }
                if self.eta.is_none() {
                    return Err(invalid("penalty methods need eta"));
                }
                if self.k_l.is_some() || self.rho_tilde.is_some() {
                    return Err(invalid("k_l and rho_tilde apply to the lagrange method only"));
                }
            }
            MethodName::Lagrange => {
                let kl = self.k_l.ok_or_else(|| invalid("the lagrange method needs k_l"))?;
                if kl < 1 || kl > self.k {
                    return Err(invalid(format!("k_l = {kl} violates 1 <= k_l <= k = {}", self.k)));
                }
                if self.rho_tilde.is_none() {
                    return Err(invalid("the lagrange method needs rho_tilde"));
                }
                if self.k_p.is_some() || self.eta.is_some() {
                    return Err(invalid("k_p and eta apply to the penalty methods only"));
                }
                if self.solver.kind == SolverName::Cg {
                    return Err(invalid("the lagrange system is indefinite and needs solver.kind = \"minres\" or \"direct\""));
                }
            }
        }
        if self.levels.is_empty() {
            return Err(invalid("levels must not be empty"));
        }
        if let Some(l) = self.levels.iter().find(|&&l| l > MAX_LEVEL) {
            return Err(invalid(format!("level {l} violates level <= {MAX_LEVEL}")));
        }
        if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) {
            return Err(invalid(format!("solver.tol = {} violates 0 < tol < 1", self.solver.tol)));
        }
        if self.solver.maxit == Some(0) {
            return Err(invalid("solver.maxit must be positive"));
        }
        for (name, s) in [("eta", self.eta), ("rho", Some(self.rho)), ("rho_tilde", self.rho_tilde)] {
            if let Some(s) = s {
                if !(s.c > 0.0 && s.c.is_finite() && s.e.is_finite()) {
                    return Err(invalid(format!("{name} needs a positive finite c and a finite e")));
                }
            }
        }
        Ok(())
    }

    pub fn method(&self) -> Method {
        self.method.method()
    }

    pub fn study_config(&self) -> StudyConfig {
        let sc = |s: ScalingSpec| Scaling::new(s.c, s.e);
        StudyConfig {
            setup: DiscreteSetup {
                method: self.method(),
                k: self.k,
                kg: self.k_g,
                kp: self.k_p.unwrap_or(self.k_g),
                kl: self.k_l.unwrap_or(1),
                source: match self.geometry_source {
                    SourceName::Fe => GeometrySource::Discrete,
                    SourceName::Exact => GeometrySource::Exact,
                },
            },
            params: FormParams { eta: self.eta.map(sc), rho: sc(self.rho), rho_tilde: self.rho_tilde.map(sc) },
            levels: self.levels.clone(),
            solver: SolverOptions {
                kind: match self.solver.kind {
                    SolverName::Cg => SolverKind::Cg,
                    SolverName::Minres => SolverKind::Minres,
                    SolverName::Direct => SolverKind::Direct,
                },
                tol: self.solver.tol,
                maxit: self.solver.maxit,
            },
        }
    }
}
