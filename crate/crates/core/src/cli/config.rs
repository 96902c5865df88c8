//! Run configuration: one TOML tree with a section per command.
//!
//! Every key has a default, so an empty file is a valid config. Dotted
//! overrides (`scaling.shots=50`) are applied to the parsed tree before it
//! is deserialized, so they are type-checked like file entries.

use crate::circuit::{Design, TableTolerances};
use crate::drive::Branch;
use crate::error::{Error, Result};
use crate::hilbert::PhaseSpaceKind;
use crate::modular_measure::{AncillaPrep, InputState};
use crate::release::Filter;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// 0 lets rayon decide.
    pub threads: usize,
    pub target_dim: usize,
    pub ancilla_dim: usize,
    pub counter_displacement: bool,
    pub wigner: WignerConfig,
    pub scaling: ScalingConfig,
    pub cubic: CubicConfig,
    pub drive: DriveConfig,
    pub params: ParamsConfig,
    pub release: ReleaseRunConfig,
    pub appd: AppdConfig,
    pub noise: NoiseConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            threads: 0,
            target_dim: 500,
            ancilla_dim: 20,
            counter_displacement: true,
            wigner: WignerConfig::default(),
            scaling: ScalingConfig::default(),
            cubic: CubicConfig::default(),
            drive: DriveConfig::default(),
            params: ParamsConfig::default(),
            release: ReleaseRunConfig::default(),
            appd: AppdConfig::default(),
            noise: NoiseConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Wigner,
    Husimi,
}

impl From<FieldKind> for PhaseSpaceKind {
    fn from(k: FieldKind) -> Self {
        match k {
            FieldKind::Wigner => PhaseSpaceKind::Wigner,
            FieldKind::Husimi => PhaseSpaceKind::Husimi,
        }
    }
}

/// Square phase-space grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputConfig {
    Vacuum,
    Squeezed { delta_q: f64 },
    Coherent { re: f64, im: f64 },
    Fock { n: usize },
}

impl From<InputConfig> for InputState {
    fn from(c: InputConfig) -> Self {
        match c {
            InputConfig::Vacuum => InputState::Vacuum,
            InputConfig::Squeezed { delta_q } => InputState::Squeezed(delta_q),
            InputConfig::Coherent { re, im } => InputState::Coherent(crate::linalg::C64::new(re, im)),
            InputConfig::Fock { n } => InputState::Fock(n),
        }
    }
}

impl InputConfig {
    pub fn label(&self) -> String {
        match self {
            InputConfig::Vacuum => "vacuum".into(),
            InputConfig::Squeezed { .. } => "squeezed".into(),
            InputConfig::Coherent { .. } => "coherent".into(),
            InputConfig::Fock { n } => format!("fock{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerConfig {
    pub nbar: f64,
    pub inputs: Vec<InputConfig>,
    pub kind: FieldKind,
    pub grid: GridConfig,
    /// Outcome-density grid, centered on the origin of the β plane.
    pub outcome_grid: GridConfig,
}

impl Default for WignerConfig {
    fn default() -> Self {
        WignerConfig {
            nbar: 3.0,
            inputs: vec![InputConfig::Vacuum, InputConfig::Squeezed { delta_q: 3.0 }],
            kind: FieldKind::Wigner,
            grid: GridConfig { half_width: 6.0, points: 121 },
            outcome_grid: GridConfig { half_width: 4.0, points: 161 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    pub nbar: Vec<f64>,
    pub shots: usize,
    pub input: InputConfig,
    pub readout_efficiency: f64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            nbar: vec![1.0, 2.0, 3.0, 4.0],
            shots: 200,
            input: InputConfig::Vacuum,
            readout_efficiency: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CubicConfig {
    pub nbar: f64,
    pub strength_ratio: f64,
    pub input: InputConfig,
    /// Which drive variants to run: `false` uncorrected, `true` corrected.
    pub corrected: Vec<bool>,
    pub kind: FieldKind,
    pub grid: GridConfig,
}

impl Default for CubicConfig {
    fn default() -> Self {
        CubicConfig {
            nbar: 3.0,
            strength_ratio: 1e-3,
            input: InputConfig::Squeezed { delta_q: 3.0 },
            corrected: vec![false, true],
            kind: FieldKind::Wigner,
            grid: GridConfig { half_width: 6.0, points: 121 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    pub deltas: Vec<f64>,
    /// Target frequency ω_T/2π in Hz.
    pub f_t: f64,
    pub branch: Branch,
    /// Number of sine coefficients tabulated.
    pub coefficients: usize,
    /// Truncations whose waveforms and errors are emitted.
    pub harmonics: Vec<usize>,
    pub periods: usize,
    pub samples_per_period: usize,
    /// AWG sample rate in S/s for the zero-order-hold error.
    pub sample_rate: f64,
    pub flux_offset: f64,
    pub flux_intervals: usize,
}

impl Default for DriveConfig {
    fn default() -> Self {
        DriveConfig {
            deltas: vec![1.0, 0.5],
            f_t: 250e6,
            branch: Branch::Plus,
            coefficients: 8,
            harmonics: vec![1, 2, 4, 8],
            periods: 2,
            samples_per_period: 2000,
            sample_rate: 2.4e9,
            flux_offset: 0.01,
            flux_intervals: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub design: Design,
    pub tolerances: TableTolerances,
    /// Flux bias for the derived parameters and the potential minimum.
    pub x_ext: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig {
            design: Design::table_midpoint(),
            tolerances: TableTolerances::default(),
            x_ext: std::f64::consts::FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReleaseRunConfig {
    pub nbar: f64,
    pub kappa_open: f64,
    pub t_meas: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    pub filter: Filter,
    pub shots: usize,
    pub input: InputConfig,
    pub readout_efficiency: f64,
}

impl Default for ReleaseRunConfig {
    fn default() -> Self {
        ReleaseRunConfig {
            nbar: 3.0,
            kappa_open: 1e6,
            t_meas: 8e-6,
            steps: None,
            filter: Filter::Exponential,
            shots: 500,
            input: InputConfig::Vacuum,
            readout_efficiency: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppdConfig {
    pub nbar: Vec<f64>,
    pub shots: usize,
    /// Relative Δ_p deviation counted as negligible.
    pub tolerance: f64,
}

impl Default for AppdConfig {
    fn default() -> Self {
        AppdConfig { nbar: vec![1.0, 2.0, 3.0, 3.5, 4.0], shots: 200, tolerance: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub nbar: f64,
    /// Values of γ|α|².
    pub loss: Vec<f64>,
    /// Readout efficiencies η.
    pub efficiency: Vec<f64>,
    pub shots: usize,
    pub half_damping: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            nbar: 3.0,
            loss: vec![0.01, 0.05, 0.1, 0.2],
            efficiency: vec![1.0, 0.75, 0.5],
            shots: 100,
            half_damping: false,
        }
    }
}

impl RunConfig {
    /// Reads TOML, or a JSON run manifest whose `config` entry is reused.
    pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let tree = if is_json { manifest_tree(&text)? } else { parse_toml(&text)? };
        RunConfig::from_tree(tree, overrides)
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<RunConfig> {
        RunConfig::from_tree(parse_toml(text)?, overrides)
    }

    fn from_tree(mut tree: toml::Table, overrides: &[String]) -> Result<RunConfig> {
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(tree).try_into().map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.target_dim < 2 || self.ancilla_dim < 1 {
            return Err(Error::Config("target_dim must be ≥ 2 and ancilla_dim ≥ 1".into()));
        }
        let grids = [self.wigner.grid, self.wigner.outcome_grid, self.cubic.grid];
        if grids.iter().any(|g| g.points < 2 || !(g.half_width > 0.0)) {
            return Err(Error::Config("grids need ≥ 2 points and a positive half width".into()));
        }
        if self.scaling.nbar.iter().chain(&self.appd.nbar).any(|n| !(*n > 0.0)) {
            return Err(Error::Config("mean photon numbers must be positive".into()));
        }
        Ok(())
    }

    pub fn prep(&self, nbar: f64) -> AncillaPrep {
        let mut p = AncillaPrep::with_mean_photons(nbar);
        p.fock_cutoff = self.ancilla_dim;
        p.counter_displacement_on = self.counter_displacement;
        p
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

fn parse_toml(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| Error::Config(e.to_string()))
}

fn manifest_tree(text: &str) -> Result<toml::Table> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let cfg = v.get("config").ok_or_else(|| Error::Config("manifest has no config entry".into()))?;
    let t: toml::Value = serde_json::from_value(cfg.clone()).map_err(|e| Error::Config(e.to_string()))?;
    match t {
        toml::Value::Table(t) => Ok(t),
        _ => Err(Error::Config("manifest config is not a table".into())),
    }
}

/// `a.b.c=value`; the value is parsed as a TOML literal, falling back to a
/// bare string.
pub fn apply_override(tree: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| Error::Config(format!("override `{spec}` needs key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = tree;
    for p in parents {
        let entry = node.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        assert_eq!(RunConfig::from_toml_str("", &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides_are_typed() {
        let c = RunConfig::from_toml_str("[scaling]\nshots = 10\n", &["scaling.nbar=[2.0]".into(), "seed=9".into()])
            .unwrap();
        assert_eq!(c.scaling.shots, 10);
        assert_eq!(c.scaling.nbar, vec![2.0]);
        assert_eq!(c.seed, 9);
        assert!(matches!(RunConfig::from_toml_str("", &["seed=abc".into()]), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("bogus = 1", &[]), Err(Error::Config(_))));
    }

    #[test]
    fn round_trips() {
        let mut c = RunConfig::default();
        c.release.steps = Some(300);
        c.wigner.inputs = vec![InputConfig::Fock { n: 2 }];
        let back = RunConfig::from_toml_str(&c.to_toml(), &[]).unwrap();
        assert_eq!(back, c);
    }
}
