//! JSON scenario configuration.
//!
//! Every field except `power.P_T` and `array.kind` has a default taken from
//! the reference scenario (3.5 / 17.5 GHz carriers, 120 / 480 kHz subcarriers,
//! 2 W, 2.5 mm elements).

use anyhow::{anyhow, bail, Context, Result};
use mbmimo_core::alloc::{InnerConfig, PowerScheme};
use mbmimo_core::antenna::{ArrayKind, ChuParams, Coupling};
use mbmimo_core::channel::SubcarrierGrid;
use mbmimo_core::scenario::{ArraySpec, Capabilities, Scenario, Spacing};
use mbmimo_core::search::SearchConfig;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub array: ArrayConfig,
    #[serde(default)]
    pub bands: BandsConfig,
    #[serde(default)]
    pub users: UsersConfig,
    #[serde(default)]
    pub power: PowerConfig,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default)]
    pub inner: InnerConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub seeds: SeedsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentConfig>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_snr() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub kind: Option<ArrayKind>,
    /// Maximum dimension (linear) or horizontal extent (planar), m.
    #[serde(rename = "D", default = "default_aperture")]
    pub aperture: f64,
    /// Vertical extent of a planar array, m.
    #[serde(rename = "D2", default, skip_serializing_if = "Option::is_none")]
    pub aperture2: Option<f64>,
    #[serde(default = "default_radius")]
    pub a: f64,
    #[serde(rename = "R_a", default = "default_resistance")]
    pub r_a: f64,
    /// Source resistance; defaults to `R_a`.
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// User load resistance; defaults to `R_a`.
    #[serde(rename = "R_L", default, skip_serializing_if = "Option::is_none")]
    pub r_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_spacing: Option<f64>,
    #[serde(default)]
    pub coupling: Coupling,
    /// Spacing for fixed-geometry experiments: `[d]` or `[d1, d2]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Vec<f64>>,
}

fn default_aperture() -> f64 {
    0.2
}

fn default_radius() -> f64 {
    0.0025
}

fn default_resistance() -> f64 {
    50.0
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig {
            kind: None,
            aperture: default_aperture(),
            aperture2: None,
            a: default_radius(),
            r_a: default_resistance(),
            r: None,
            r_l: None,
            min_spacing: None,
            coupling: Coupling::Coupled,
            spacing: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandsConfig {
    #[serde(rename = "f_L")]
    pub f_l: f64,
    #[serde(rename = "f_H")]
    pub f_h: f64,
    #[serde(rename = "B_L")]
    pub b_l: f64,
    #[serde(rename = "B_H")]
    pub b_h: f64,
    #[serde(rename = "M_L")]
    pub m_l: usize,
    #[serde(rename = "M_H")]
    pub m_h: usize,
}

impl Default for BandsConfig {
    fn default() -> Self {
        BandsConfig {
            f_l: 3.5e9,
            f_h: 17.5e9,
            b_l: 120e3,
            b_h: 480e3,
            m_l: 4,
            m_h: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsersConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub distance_range: [f64; 2],
    pub gamma: f64,
    pub capability: Capabilities,
}

impl Default for UsersConfig {
    fn default() -> Self {
        UsersConfig {
            k: 4,
            distance_range: [50.0, 150.0],
            gamma: 2.7,
            capability: Capabilities::Case(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    #[default]
    Jpa,
    Bwpa,
    Cwpa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    #[serde(rename = "P_T", default, skip_serializing_if = "Option::is_none")]
    pub p_t: Option<f64>,
    #[serde(default)]
    pub scheme: SchemeName,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_beta() -> f64 {
    1.0
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            p_t: None,
            scheme: SchemeName::Jpa,
            beta: default_beta(),
        }
    }
}

pub fn power_scheme(name: SchemeName, beta: f64) -> PowerScheme {
    match name {
        SchemeName::Jpa => PowerScheme::Joint,
        SchemeName::Bwpa => PowerScheme::BandWise { beta },
        SchemeName::Cwpa => PowerScheme::CarrierWise,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsConfig {
    pub master: u64,
    /// Realizations per sweep point.
    pub repetitions: usize,
}

impl Default for SeedsConfig {
    fn default() -> Self {
        SeedsConfig {
            master: 1,
            repetitions: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SweepSpacing,
    SweepSubcarriers,
    SweepSnr,
    SweepBeta,
    Bode,
    Optimize,
    CompareModes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Offline,
    Online,
}

/// One curve of a scheme comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub scheme: SchemeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl Series {
    pub fn jpa(case: u8) -> Self {
        Series {
            scheme: SchemeName::Jpa,
            case: Some(case),
            beta: None,
        }
    }

    pub fn bwpa(beta: f64) -> Self {
        Series {
            scheme: SchemeName::Bwpa,
            case: None,
            beta: Some(beta),
        }
    }

    pub fn cwpa() -> Self {
        Series {
            scheme: SchemeName::Cwpa,
            case: None,
            beta: None,
        }
    }

    /// Band-wise and carrier-wise schemes run with case-1 capabilities.
    pub fn case(&self) -> u8 {
        self.case.unwrap_or(1)
    }

    pub fn label(&self) -> String {
        match self.scheme {
            SchemeName::Jpa => format!("jpa_case{}", self.case()),
            SchemeName::Bwpa => format!("bwpa_beta{}", self.beta.unwrap_or(1.0)),
            SchemeName::Cwpa => "cwpa".to_string(),
        }
    }

    pub fn scheme(&self) -> PowerScheme {
        power_scheme(self.scheme, self.beta.unwrap_or(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencySweep {
    pub f_min: f64,
    pub f_max: f64,
    pub points: usize,
}

impl Default for FrequencySweep {
    fn default() -> Self {
        FrequencySweep {
            f_min: 1e9,
            f_max: 20e9,
            points: 39,
        }
    }
}

impl FrequencySweep {
    pub fn values(&self) -> Vec<f64> {
        if self.points <= 1 {
            return vec![self.f_min];
        }
        (0..self.points)
            .map(|j| self.f_min + (self.f_max - self.f_min) * j as f64 / (self.points - 1) as f64)
            .collect()
    }
}

/// Experiment selection for `run` and overrides for the other commands.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    /// Swept values (spacing in m, subcarriers per band, SNR in dB or beta).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// Vertical spacings of a planar spacing sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values2: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinds: Option<Vec<ArrayKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Vec<Series>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<FrequencySweep>,
}

impl Config {
    /// Reference scenario with every field spelled out.
    pub fn preset() -> Self {
        Config {
            schema_version: SCHEMA_VERSION,
            array: ArrayConfig {
                kind: Some(ArrayKind::Colinear),
                spacing: Some(vec![0.01]),
                ..ArrayConfig::default()
            },
            bands: BandsConfig::default(),
            users: UsersConfig::default(),
            power: PowerConfig {
                p_t: Some(2.0),
                ..PowerConfig::default()
            },
            snr_db: default_snr(),
            inner: InnerConfig::default(),
            search: SearchConfig::default(),
            seeds: SeedsConfig::default(),
            experiment: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            anyhow!("invalid config at `{path}`: {inner}")
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            );
        }
        if self.array.kind.is_none() {
            bail!("missing required field `array.kind`");
        }
        if self.power.p_t.is_none() {
            bail!("missing required field `power.P_T`");
        }
        if self.seeds.repetitions == 0 {
            bail!("`seeds.repetitions` must be at least 1");
        }
        self.search.validate().map_err(|e| anyhow!("{e}"))?;
        self.scenario().map(|_| ())
    }

    pub fn kind(&self) -> ArrayKind {
        self.array.kind.unwrap_or(ArrayKind::Colinear)
    }

    pub fn total_power(&self) -> f64 {
        self.power.p_t.unwrap_or(f64::NAN)
    }

    pub fn grid(&self) -> Result<SubcarrierGrid> {
        let b = &self.bands;
        SubcarrierGrid::new(b.m_l, b.m_h, b.f_l, b.f_h, b.b_l, b.b_h).map_err(|e| anyhow!("bands: {e}"))
    }

    pub fn element(&self) -> Result<ChuParams> {
        ChuParams::new(self.array.a, self.array.r_a).map_err(|e| anyhow!("array: {e}"))
    }

    /// Core scenario with the configured scheme and capabilities.
    pub fn scenario(&self) -> Result<Scenario> {
        let element = self.element()?;
        let s = Scenario {
            array: ArraySpec {
                kind: self.kind(),
                aperture: self.array.aperture,
                aperture2: self.array.aperture2,
                min_spacing: self.array.min_spacing,
                coupling: self.array.coupling,
            },
            element,
            source_resistance: self.array.r.unwrap_or(self.array.r_a),
            load_resistance: self.array.r_l.unwrap_or(self.array.r_a),
            grid: self.grid()?,
            users: self.users.k,
            distance_range: (self.users.distance_range[0], self.users.distance_range[1]),
            path_loss_exponent: self.users.gamma,
            capabilities: self.users.capability.clone(),
            total_power: self.total_power(),
            scheme: power_scheme(self.power.scheme, self.power.beta),
            snr_db: self.snr_db,
            inner: self.inner,
        };
        s.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(s)
    }

    /// Spacing for fixed-geometry experiments; defaults to 1 cm (both axes for planar).
    pub fn spacing(&self) -> Result<Spacing> {
        let v = self.array.spacing.clone().unwrap_or_else(|| match self.kind() {
            ArrayKind::Planar => vec![0.01, 0.01],
            _ => vec![0.01],
        });
        Spacing::from_slice(&v).map_err(|e| anyhow!("array.spacing: {e}"))
    }

    pub fn experiment(&self) -> ExperimentConfig {
        self.experiment.clone().unwrap_or_default()
    }
}
