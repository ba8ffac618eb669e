//! Scenario configuration files.
//!
//! The format is TOML restricted to flat sections: `[section]` headers,
//! one `key = value` per line, arrays written comma-separated in brackets.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[serde(rename = "manipulator-3r")]
    Manipulator3R,
    DoubleIntegrator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// Link lengths (m), manipulator only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
    /// Point masses at the link tips (kg), manipulator only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    /// Link inertias about their centers of mass; defaults to slender rods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertias: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeckSection {
    /// Output names in deck order; all model outputs when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSection {
    /// `[k0, k1, …, k_{r-1}]` for every output without an override.
    pub default: Vec<f64>,
    /// Per-output overrides keyed by output name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Consistency {
    #[default]
    Consistent,
    Perturbed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    /// Configuration at rest before the first move.
    pub initial: Vec<f64>,
    /// Target configuration of the move that starts with interval `k`.
    pub poses: Vec<Vec<f64>>,
    pub move_duration: f64,
    #[serde(default)]
    pub consistency: Consistency,
    /// Per deck output amplitude of the added sinusoid (perturbed mode).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub perturb_amplitude: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb_omega: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeldSection {
    /// Bit strings over the deck; meld ids are 1-based positions here.
    pub list: Vec<String>,
    /// Operating point `x°` for the enumeration sweep and certification.
    pub operating_point: Vec<f64>,
    #[serde(default = "default_cond_max")]
    pub cond_max: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    #[default]
    Explicit,
    AutoCertified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(default)]
    pub mode: ScheduleMode,
    /// Interval start times; the first one is `t0`.
    pub starts: Vec<f64>,
    /// Meld id (1-based into `[melds] list`) per interval.
    pub sequence: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSection {
    pub epsilon: f64,
    pub box_lower: Vec<f64>,
    pub box_upper: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples_per_level: usize,
    #[serde(default = "default_min_half_width")]
    pub min_half_width: f64,
    #[serde(default = "default_time_step")]
    pub time_step: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HoldMode {
    #[default]
    PerStage,
    ZeroOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub x0: Vec<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// End time for the schedule as written; shifted along with the last
    /// interval start in auto-certified mode.
    pub t_end: f64,
    #[serde(default)]
    pub hold: HoldMode,
    #[serde(default = "default_true")]
    pub chi: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_out_dir() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub model: ModelSection,
    #[serde(default)]
    pub deck: DeckSection,
    pub gains: GainSection,
    pub reference: ReferenceSection,
    pub melds: MeldSection,
    pub schedule: ScheduleSection,
    pub certificate: CertificateSection,
    pub simulation: SimulationSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_cond_max() -> f64 {
    meld_core::meld::DEFAULT_COND_MAX
}
fn default_samples() -> usize {
    2500
}
fn default_min_half_width() -> f64 {
    0.05
}
fn default_time_step() -> f64 {
    0.01
}
fn default_dt() -> f64 {
    1e-3
}
fn default_true() -> bool {
    true
}
fn default_out_dir() -> String {
    "out".into()
}
fn default_name() -> String {
    "scenario".into()
}
fn default_seed() -> u64 {
    42
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical text: fixed section order, keys sorted within sections.
    pub fn to_text(&self) -> String {
        let value = toml::Value::try_from(self).expect("configuration serializes");
        toml::to_string(&value).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [model]
        kind = "double-integrator"

        [gains]
        default = [2.0, 3.0]
        overrides = { x2 = [1.0] }

        [reference]
        initial = [0.0]
        poses = [[1.0]]
        move_duration = 1.0

        [melds]
        operating_point = [0.0, 0.0]
        list = ["10"]

        [schedule]
        starts = [0.0]
        sequence = [1]

        [certificate]
        epsilon = 0.01
        box_lower = [-1.0, -1.0]
        box_upper = [1.0, 1.0]

        [simulation]
        x0 = [0.5, 0.0]
        t_end = 5.0
    "#;

    #[test]
    fn defaults_fill_in() {
        let c = ScenarioConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.simulation.dt, 1e-3);
        assert_eq!(c.simulation.hold, HoldMode::PerStage);
        assert_eq!(c.schedule.mode, ScheduleMode::Explicit);
        assert_eq!(c.gains.overrides["x2"], vec![1.0]);
        assert_eq!(c.model.kind, ModelKind::DoubleIntegrator);
    }

    #[test]
    fn canonical_text_round_trips() {
        let c = ScenarioConfig::parse(MINIMAL).unwrap();
        let text = c.to_text();
        let again = ScenarioConfig::parse(&text).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_text(), text);
    }

    #[test]
    fn malformed_input_is_a_config_error() {
        assert!(matches!(ScenarioConfig::parse("[model\nkind = 1"), Err(CliError::Config(_))));
        let unknown = MINIMAL.replace("t_end = 5.0", "t_end = 5.0\nbogus = 1");
        assert!(matches!(ScenarioConfig::parse(&unknown), Err(CliError::Config(_))));
    }
}
