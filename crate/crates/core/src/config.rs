//! Run specification files: a JSON object with the simulation parameters at
//! top level plus sections for outputs, ensembles, statistics, norms and
//! rendering. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragment::{Algorithm, DegenerateRule, SimConfig, StopRule};
use crate::sobolev::SobolevParams;
use crate::stats::{BinSpec, FitMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSpec {
    pub n_seeds: u64,
    pub base_seed: u64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec { n_seeds: 1, base_seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsSpec {
    pub bins_per_decade: u32,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub fit_lo: f64,
    pub fit_hi: f64,
    pub fit_mode: FitMode,
    pub bucket_lambda: f64,
    pub j1: i64,
}

impl Default for StatsSpec {
    fn default() -> Self {
        let b = BinSpec::default();
        StatsSpec {
            bins_per_decade: b.bins_per_decade,
            bin_lo: b.lo,
            bin_hi: b.hi,
            fit_lo: 1e-2,
            fit_hi: 1e-1,
            fit_mode: FitMode::RawCount,
            bucket_lambda: 1.1,
            j1: -98,
        }
    }
}

impl StatsSpec {
    pub fn bins(&self) -> BinSpec {
        BinSpec { lo: self.bin_lo, hi: self.bin_hi, bins_per_decade: self.bins_per_decade }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSpec {
    pub width: usize,
    pub height: usize,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec { width: 512, height: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    pub delta: f64,
    pub p: f64,
    pub gamma: f64,
    pub m: [f64; 4],
    pub seed: u64,
    pub stop: StopRule,
    pub degenerate_rule: DegenerateRule,
    pub block_depth: u32,
    pub argmin_literal: bool,
    pub output: OutputSpec,
    pub ensemble: EnsembleSpec,
    pub stats: StatsSpec,
    pub sobolev: SobolevParams,
    pub render: RenderSpec,
}

impl Default for RunSpec {
    fn default() -> Self {
        let c = SimConfig::default();
        RunSpec {
            algorithm: c.algorithm,
            delta: c.delta,
            p: c.p,
            gamma: c.gamma,
            m: c.m,
            seed: c.seed,
            stop: c.stop,
            degenerate_rule: c.degenerate_rule,
            block_depth: c.block_depth,
            argmin_literal: c.argmin_literal,
            output: OutputSpec::default(),
            ensemble: EnsembleSpec::default(),
            stats: StatsSpec::default(),
            sobolev: SobolevParams::default(),
            render: RenderSpec::default(),
        }
    }
}

impl RunSpec {
    pub fn from_json(text: &str) -> Result<RunSpec> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<RunSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        RunSpec::from_json(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
    }

    /// Simulation parameters for `seed`.
    pub fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            algorithm: self.algorithm,
            delta: self.delta,
            p: self.p,
            gamma: self.gamma,
            m: self.m,
            seed,
            stop: self.stop,
            degenerate_rule: self.degenerate_rule,
            block_depth: self.block_depth,
            bucket_lambda: self.stats.bucket_lambda,
            argmin_literal: self.argmin_literal,
        }
    }

    /// Seeds of the ensemble; a single run uses `seed`.
    pub fn seeds(&self) -> Vec<u64> {
        if self.ensemble.n_seeds <= 1 {
            vec![self.seed]
        } else {
            (0..self.ensemble.n_seeds).map(|i| self.ensemble.base_seed + i).collect()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for s in self.seeds() {
            self.sim_config(s).validate()?;
        }
        self.sobolev.validate()?;
        self.stats.bins().edges()?;
        if !(self.stats.fit_lo > 0.0 && self.stats.fit_lo < self.stats.fit_hi) {
            return Err(Error::InvalidParameter("need 0 < fit_lo < fit_hi".into()));
        }
        if self.render.width == 0 || self.render.height == 0 {
            return Err(Error::InvalidParameter("render size must be positive".into()));
        }
        if self.ensemble.n_seeds == 0 {
            return Err(Error::InvalidParameter("n_seeds must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunSpec::from_json(r#"{"delta": 0.2, "colour": 1}"#).unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
        let e = RunSpec::from_json(r#"{"stats": {"bins": 3}}"#).unwrap_err();
        assert!(e.to_string().contains("bins"), "{e}");
    }

    #[test]
    fn partial_files_use_defaults() {
        let s = RunSpec::from_json(r#"{"algorithm": "B", "stop": {"min_length": 0.01}, "sobolev": {"s": 0.2}}"#).unwrap();
        assert_eq!(s.algorithm, Algorithm::B);
        assert_eq!(s.stop, StopRule::MinLength(0.01));
        assert_eq!(s.sobolev.s, 0.2);
        assert_eq!(s.sobolev.p, SobolevParams::default().p);
        s.validate().unwrap();
    }
}
