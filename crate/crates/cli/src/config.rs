use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rsp_core::ensemble::{EdCompareConfig, RsrgEnsembleConfig, SweepEnsembleConfig};
use rsp_core::fidelity::FidelityParams;
use rsp_core::flow::FlowConfig;
use rsp_core::sweep::{FitRequirements, TwoAtomConfig};
use rsp_core::{Filling, LatticeParams};

use crate::error::CliError;

/// Everything a run depends on. Each command reads its own section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for ensembles; 0 uses every core.
    pub workers: usize,
    pub out: PathBuf,
    pub lattice: LatticeParams,
    pub rsrg: RsrgEnsembleConfig,
    pub flow: FlowSection,
    pub ed: EdCompareConfig,
    pub sweep: SweepSection,
    pub fidelity: FidelitySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 0,
            out: PathBuf::from("out"),
            lattice: LatticeParams::new(100, 5.0, Filling::Fixed(30)),
            rsrg: RsrgEnsembleConfig::default(),
            flow: FlowSection::default(),
            ed: EdCompareConfig::default(),
            sweep: SweepSection::default(),
            fidelity: FidelitySection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub p_fill: f64,
    pub solver: FlowConfig,
}

impl Default for FlowSection {
    fn default() -> Self {
        Self {
            p_fill: 0.3,
            solver: FlowConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    TwoAtom,
    #[default]
    Ensemble,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub mode: SweepMode,
    /// 1000 realizations of 12 atoms on 100 sites instead of the ensemble
    /// section's lattice and count.
    pub full_scale: bool,
    pub two_atom: TwoAtomConfig,
    pub ensemble: SweepEnsembleConfig,
    pub two_atom_fit: FitRequirements,
    pub ensemble_fit: FitRequirements,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            mode: SweepMode::default(),
            full_scale: false,
            two_atom: TwoAtomConfig::default(),
            ensemble: SweepEnsembleConfig::default(),
            two_atom_fit: FitRequirements {
                min_records: 5,
                min_decades: 0.5,
            },
            ensemble_fit: FitRequirements::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidelitySection {
    pub params: FidelityParams,
    pub solver: FlowConfig,
    /// Reuse the `flow_history.json` of an earlier `flow` run instead of
    /// solving again.
    pub curve: Option<PathBuf>,
    pub omega_min: f64,
    pub omega_max: f64,
    pub per_decade: usize,
}

impl Default for FidelitySection {
    fn default() -> Self {
        Self {
            params: FidelityParams::default(),
            solver: FlowConfig::default(),
            curve: None,
            omega_min: 1e-5,
            omega_max: 10.0,
            per_decade: 400,
        }
    }
}

impl RunConfig {
    /// Reads a config file. A manifest written by an earlier run is accepted
    /// too, in which case its recorded config is used.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        let value = match serde_json::from_str(text)? {
            serde_json::Value::Object(mut m)
                if m.get("command").is_some_and(|c| c.is_string()) && m.contains_key("config") =>
            {
                m.remove("config").unwrap_or_default()
            }
            v => v,
        };
        serde_json::from_value(value)
    }
}
