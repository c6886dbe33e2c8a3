//! Experiment configuration files (TOML).
//!
//! ```toml
//! schema = 1
//! name = "free group"
//!
//! [[group.factors]]
//! kind = "free-abelian"
//! rank = 1
//!
//! [[group.factors]]
//! kind = "free-abelian"
//! rank = 1
//!
//! [measure]
//! kind = "simple"
//! ```
//!
//! Unknown keys are errors everywhere, so a misspelt knob cannot be silently ignored.

use std::path::Path;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::group::{FactorSpec, FiniteGroup, FreeProduct};
use crate::parabolic::DegeneracyOptions;
use crate::thermo::PressureOptions;
use crate::walk::{Method, StepMeasure};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FactorConfig {
    Cyclic {
        order: usize,
    },
    FreeAbelian {
        rank: usize,
    },
    /// Cayley table with element 0 the identity.
    Finite {
        table: Vec<Vec<usize>>,
        generators: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lengths: Option<Vec<u32>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub factors: Vec<FactorConfig>,
}

/// Elements are written as in [`FreeProduct::parse`], e.g. `"0:1 1:-1"`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureConfig {
    /// Uniform on the generators of every factor.
    #[default]
    Simple,
    Uniform { steps: Vec<String> },
    /// `[element, weight]` pairs with rational weights such as `"1/4"`.
    Weighted { steps: Vec<(String, String)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkConfig {
    pub horizon: usize,
    pub method: Method,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            horizon: 20,
            method: Method::Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenConfig {
    /// Points as fractions of R̂.
    pub grid: Vec<f64>,
    /// Replaces the extrapolated radius.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_hat: Option<f64>,
    pub estimate_horizon: usize,
    pub max_horizon: usize,
    /// Killing radius for measures without the radial fast path.
    pub ball_radius: u32,
    /// Convolution horizon used to estimate R̂ for those measures.
    pub ball_estimate_horizon: usize,
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig {
            grid: vec![0.5, 0.8, 0.9, 0.95, 0.98],
            r_hat: None,
            estimate_horizon: 20_000,
            max_horizon: 200_000,
            ball_radius: 16,
            ball_estimate_horizon: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PressureConfig {
    /// Points as fractions of R̂.
    pub grid: Vec<f64>,
    pub ladder: PressureOptions,
}

impl Default for PressureConfig {
    fn default() -> Self {
        PressureConfig {
            grid: vec![0.9, 0.95, 0.98, 1.0],
            ladder: PressureOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnconaConfig {
    /// `r` as a fraction of R̂.
    pub fraction: f64,
    pub triples: usize,
    pub max_rel_dist: usize,
    pub max_shared: usize,
    pub pairs_per_length: usize,
}

impl Default for AnconaConfig {
    fn default() -> Self {
        AnconaConfig {
            fraction: 0.9,
            triples: 200,
            max_rel_dist: 6,
            max_shared: 4,
            pairs_per_length: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LltConfig {
    pub horizon: usize,
    pub window: (usize, usize),
}

impl Default for LltConfig {
    fn default() -> Self {
        LltConfig {
            horizon: 5000,
            window: (500, 5000),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub group: GroupConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub walk: WalkConfig,
    #[serde(default)]
    pub green: GreenConfig,
    #[serde(default)]
    pub degeneracy: DegeneracyOptions,
    #[serde(default)]
    pub pressure: PressureConfig,
    #[serde(default)]
    pub ancona: AnconaConfig,
    #[serde(default)]
    pub llt: LltConfig,
}

fn default_seed() -> u64 {
    1
}

fn positive(what: &str, ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Parse(format!("{what} must be positive")))
    }
}

fn fractions(what: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Parse(format!("{what} is empty")));
    }
    match grid.iter().find(|&&q| !(q > 0.0 && q <= 1.0)) {
        Some(q) => Err(Error::Parse(format!("{what} entry {q} is not in (0, 1] (fractions of R̂)"))),
        None => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// SHA-256 of the canonical serialization, in hex.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        positive("walk.horizon", self.walk.horizon > 0)?;
        fractions("green.grid", &self.green.grid)?;
        fractions("pressure.grid", &self.pressure.grid)?;
        fractions("ancona.fraction", &[self.ancona.fraction])?;
        if let Some(r) = self.green.r_hat {
            positive("green.r_hat", r > 0.0 && r.is_finite())?;
        }
        positive("green.estimate_horizon", self.green.estimate_horizon > 0)?;
        positive("green.max_horizon", self.green.max_horizon > 0)?;
        positive("green.ball_radius", self.green.ball_radius > 0)?;
        positive("green.ball_estimate_horizon", self.green.ball_estimate_horizon > 0)?;
        let d = &self.degeneracy;
        positive("degeneracy.lengths", !d.lengths.is_empty() && d.lengths.iter().all(|&x| x > 0))?;
        positive("degeneracy.ball_radii", d.ball_radii.iter().all(|&x| x > 0))?;
        positive("degeneracy.box_radii", d.box_radii.iter().all(|&x| x > 0))?;
        positive("degeneracy.degenerate_tol", d.degenerate_tol > 0.0)?;
        positive("degeneracy.power_tol", d.power_tol > 0.0)?;
        let p = &self.pressure.ladder;
        positive("pressure.ladder.caps", !p.caps.is_empty() && p.caps.iter().all(|&x| x > 0))?;
        positive("pressure.ladder.depths", !p.depths.is_empty() && p.depths.iter().all(|&x| x > 0))?;
        positive("pressure.ladder.tol", p.tol > 0.0)?;
        let a = &self.ancona;
        positive("ancona.triples", a.triples > 0)?;
        positive("ancona.max_rel_dist", a.max_rel_dist > 0)?;
        positive("ancona.max_shared", a.max_shared > 0)?;
        positive("ancona.pairs_per_length", a.pairs_per_length > 0)?;
        positive("llt.horizon", self.llt.horizon > 0)?;
        if self.llt.window.0 == 0 || self.llt.window.0 >= self.llt.window.1 || self.llt.window.1 > self.llt.horizon {
            return Err(Error::Parse(format!(
                "llt.window {:?} must satisfy 0 < start < end <= horizon",
                self.llt.window
            )));
        }
        if self.group.factors.is_empty() {
            return Err(Error::Parse("group.factors is empty".into()));
        }
        Ok(())
    }

    pub fn build_group(&self) -> Result<FreeProduct> {
        let factors = self
            .group
            .factors
            .iter()
            .enumerate()
            .map(|(id, f)| match f {
                FactorConfig::Cyclic { order } => Ok(FactorSpec::finite(id, FiniteGroup::cyclic(*order)?)),
                FactorConfig::FreeAbelian { rank } => FactorSpec::free_abelian(id, *rank),
                FactorConfig::Finite {
                    table,
                    generators,
                    lengths,
                } => Ok(FactorSpec::finite(
                    id,
                    FiniteGroup::new(table.clone(), generators.clone(), lengths.clone())?,
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        FreeProduct::new(factors)
    }

    pub fn build_measure(&self, group: &FreeProduct) -> Result<StepMeasure> {
        match &self.measure {
            MeasureConfig::Simple => StepMeasure::simple_random_walk(group),
            MeasureConfig::Uniform { steps } => {
                let xs = steps.iter().map(|s| group.parse(s)).collect::<Result<Vec<_>>>()?;
                StepMeasure::uniform(group, &xs)
            }
            MeasureConfig::Weighted { steps } => {
                let ws = steps
                    .iter()
                    .map(|(s, w)| {
                        let w: BigRational = w
                            .trim()
                            .parse()
                            .map_err(|_| Error::Parse(format!("weight {w:?} is not a rational number")))?;
                        Ok((group.parse(s)?, w))
                    })
                    .collect::<Result<Vec<_>>>()?;
                StepMeasure::new(group, ws, false)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const F2: &str = r#"
schema = 1
[[group.factors]]
kind = "free-abelian"
rank = 1
[[group.factors]]
kind = "free-abelian"
rank = 1
"#;

    #[test]
    fn minimal_config_round_trips() {
        let c = ExperimentConfig::from_toml(F2).unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash().unwrap(), again.hash().unwrap());
        assert_eq!(c.hash().unwrap().len(), 64);
    }

    #[test]
    fn unknown_keys_and_versions_are_rejected() {
        assert!(ExperimentConfig::from_toml(&format!("{F2}\n[walk]\nhorizn = 3\n")).is_err());
        assert!(ExperimentConfig::from_toml(&F2.replace("schema = 1", "schema = 2")).is_err());
        assert!(ExperimentConfig::from_toml(&F2.replace("rank = 1\n[[", "rank = 1\nextra = 0\n[[")).is_err());
    }

    #[test]
    fn weighted_measure() {
        let text = format!("{F2}\n[measure]\nkind = \"weighted\"\nsteps = [[\"0:1\", \"1/4\"], [\"0:-1\", \"1/4\"], [\"1:1\", \"1/4\"], [\"1:-1\", \"1/4\"]]\n");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        let g = c.build_group().unwrap();
        let mu = c.build_measure(&g).unwrap();
        assert!(mu.is_symmetric());
    }
}
