//! JSON run configuration.
//!
//! One document drives every subcommand. Physical quantities that feed
//! the exact-arithmetic layer (γ, β, k) are decimal or fraction strings
//! parsed exactly; everything else is a 64-bit float. The canonical
//! serialization of the parsed document is hashed (FNV-1a 64) and the
//! hash is embedded in every output file.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::potential::{KernelBackend, OriginRule, PotentialSpec};
use crate::scattering::FinalStateSign;
use crate::spectral::SpectralGrid;
use crate::util::{fnv1a64_hex, parse_rational, rational_f64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Enforce the admissibility region, n ∈ {2,3}, horizons, and
    /// smallness guards.
    Theorem,
    /// Guards downgraded to flags where that is meaningful.
    #[default]
    Exploratory,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsConfig {
    pub n: u32,
    pub gamma: String,
    pub beta: String,
    #[serde(default = "default_weight")]
    pub k: String,
}

fn default_weight() -> String {
    "1".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub points: usize,
    pub box_length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialConfig {
    #[serde(default = "default_backend")]
    pub backend: KernelBackend,
    #[serde(default = "default_origin")]
    pub origin_rule: OriginRule,
    #[serde(default = "default_coupling")]
    pub coupling: f64,
}

fn default_backend() -> KernelBackend {
    KernelBackend::TruncatedKernel
}
fn default_origin() -> OriginRule {
    OriginRule::CellAverage
}
fn default_coupling() -> f64 {
    -1.0
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            backend: default_backend(),
            origin_rule: default_origin(),
            coupling: default_coupling(),
        }
    }
}

/// Modulated Gaussian family a·e^{−|x|²/(2σ²)}e^{ik₀·x} with ∂_t u = 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialDataConfig {
    pub amplitude: f64,
    pub sigma: f64,
    pub k0: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Record every k-th step (t = 0 is always recorded).
    pub sample_every: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicardConfig {
    pub dtau: f64,
    pub t_final: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScatterPipeline {
    Forward,
    FinalState,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatterConfig {
    pub pipeline: ScatterPipeline,
    /// Truncation point for the final-state problem.
    #[serde(default)]
    pub t_start: Option<f64>,
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
    /// "plus-f" (default) or "minus-f": the sign of the εf₋ term in the
    /// prescribed past profile.
    #[serde(default)]
    pub final_state_sign: Option<String>,
    #[serde(default)]
    pub smallness_guard: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SweepConfig {
    #[serde(default)]
    pub amplitude: Option<Vec<f64>>,
    #[serde(default)]
    pub gamma: Option<Vec<String>>,
    #[serde(default)]
    pub beta: Option<Vec<String>>,
    #[serde(default)]
    pub points: Option<Vec<usize>>,
    #[serde(default)]
    pub dt: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: ParamsConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub initial_data: Option<InitialDataConfig>,
    #[serde(default)]
    pub integrator: Option<IntegratorConfig>,
    #[serde(default)]
    pub picard: Option<PicardConfig>,
    #[serde(default)]
    pub scatter: Option<ScatterConfig>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    /// Default output directory; the CLI's --out overrides it.
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Content hash of the canonical (parsed, re-serialized) document.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        fnv1a64_hex(canonical.as_bytes())
    }

    pub fn theorem_mode(&self) -> bool {
        self.mode == Mode::Theorem
    }

    /// Exact parameter tuple.
    pub fn build_params(&self) -> Result<Params> {
        Params::new(
            self.params.n,
            parse_rational(&self.params.gamma)?,
            parse_rational(&self.params.beta)?,
            parse_rational(&self.params.k)?,
        )
    }

    pub fn build_grid(&self) -> Result<Arc<SpectralGrid>> {
        SpectralGrid::new(self.params.n as usize, self.grid.points, self.grid.box_length)
    }

    pub fn build_potential_spec(&self) -> Result<PotentialSpec> {
        Ok(PotentialSpec::new(parse_rational(&self.params.gamma)?)?
            .with_backend(self.potential.backend)
            .with_origin_rule(self.potential.origin_rule)
            .with_coupling(self.potential.coupling))
    }

    pub fn beta_f64(&self) -> Result<f64> {
        Ok(rational_f64(&parse_rational(&self.params.beta)?))
    }

    pub fn final_state_sign(&self) -> Result<FinalStateSign> {
        let name = self
            .scatter
            .as_ref()
            .and_then(|s| s.final_state_sign.as_deref())
            .unwrap_or("plus-f");
        match name {
            "plus-f" => Ok(FinalStateSign::PlusF),
            "minus-f" => Ok(FinalStateSign::MinusF),
            other => Err(Error::Config(format!(
                "final_state_sign must be \"plus-f\" or \"minus-f\", got {other:?}"
            ))),
        }
    }

    /// Theorem-mode admission: n ∈ {2,3} and the parameter region check.
    pub fn validate_mode(&self) -> Result<()> {
        if !self.theorem_mode() {
            return Ok(());
        }
        if !(2..=3).contains(&self.params.n) {
            return Err(Error::Infeasible(format!(
                "theorem mode requires n in {{2,3}}, got {}",
                self.params.n
            )));
        }
        let params = self.build_params()?;
        let report = crate::params::check_constraints(&params);
        if !report.feasible {
            let names: Vec<&str> = report.violations.iter().map(|v| v.name).collect();
            return Err(Error::Infeasible(names.join(", ")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "params": {"n": 2, "gamma": "13/10", "beta": "1.8"},
        "grid": {"points": 32, "box_length": 50.0}
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.mode, Mode::Exploratory);
        assert_eq!(cfg.potential.coupling, -1.0);
        assert_eq!(cfg.potential.backend, KernelBackend::TruncatedKernel);
        assert_eq!(cfg.params.k, "1");
        let params = cfg.build_params().unwrap();
        assert_eq!(params.gamma(), &crate::util::rat(13, 10));
        assert_eq!(params.beta(), &crate::util::rat(9, 5));
        let grid = cfg.build_grid().unwrap();
        assert_eq!(grid.dim(), 2);
        assert_eq!(grid.points(), 32);
    }

    #[test]
    fn hash_is_stable_and_order_insensitive_after_parse() {
        let cfg1 = RunConfig::from_json(MINIMAL).unwrap();
        let reordered = r#"{
            "grid": {"box_length": 50.0, "points": 32},
            "params": {"beta": "1.8", "gamma": "13/10", "n": 2}
        }"#;
        let cfg2 = RunConfig::from_json(reordered).unwrap();
        assert_eq!(cfg1.hash(), cfg2.hash());
        let different = RunConfig::from_json(
            r#"{"params": {"n": 2, "gamma": "13/10", "beta": "1.8"},
                "grid": {"points": 64, "box_length": 50.0}}"#,
        )
        .unwrap();
        assert_ne!(cfg1.hash(), different.hash());
    }

    #[test]
    fn malformed_config_is_a_config_error() {
        assert!(matches!(RunConfig::from_json("{"), Err(Error::Config(_))));
        assert!(matches!(
            RunConfig::from_json(r#"{"grid": {"points": 32, "box_length": 1.0}}"#),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn theorem_mode_gating() {
        let feasible = r#"{
            "params": {"n": 3, "gamma": "13/10", "beta": "9/5"},
            "grid": {"points": 16, "box_length": 30.0},
            "mode": "theorem"
        }"#;
        RunConfig::from_json(feasible).unwrap().validate_mode().unwrap();

        let infeasible = r#"{
            "params": {"n": 2, "gamma": "13/10", "beta": "9/5"},
            "grid": {"points": 16, "box_length": 30.0},
            "mode": "theorem"
        }"#;
        assert!(matches!(
            RunConfig::from_json(infeasible).unwrap().validate_mode(),
            Err(Error::Infeasible(_))
        ));

        let n1 = r#"{
            "params": {"n": 1, "gamma": "1/2", "beta": "1"},
            "grid": {"points": 16, "box_length": 30.0},
            "mode": "theorem"
        }"#;
        assert!(RunConfig::from_json(n1).unwrap().validate_mode().is_err());

        // exploratory n=1 is fine (solver-validation mode)
        let n1_ok = r#"{
            "params": {"n": 1, "gamma": "1/2", "beta": "1"},
            "grid": {"points": 16, "box_length": 30.0}
        }"#;
        RunConfig::from_json(n1_ok).unwrap().validate_mode().unwrap();
    }

    #[test]
    fn final_state_sign_parsing() {
        let mut cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.final_state_sign().unwrap(), FinalStateSign::PlusF);
        cfg.scatter = Some(ScatterConfig {
            pipeline: ScatterPipeline::FinalState,
            t_start: Some(2.0),
            fit_window: None,
            final_state_sign: Some("minus-f".into()),
            smallness_guard: None,
        });
        assert_eq!(cfg.final_state_sign().unwrap(), FinalStateSign::MinusF);
        cfg.scatter.as_mut().unwrap().final_state_sign = Some("bogus".into());
        assert!(cfg.final_state_sign().is_err());
    }
}
