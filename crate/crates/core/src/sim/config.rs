//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constellation::LegacyConstellation;
use crate::power_alloc::{default_alpha_grid, snr_axis, GridSpec};
use crate::superposition::Category;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fairness,
    Mimo,
    Sched,
    Lut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Oma,
    MustCat1,
    MustCat2,
    MustCat3,
    SmustCat1,
    SmustCat2,
    SmustCat3,
    DynamicMa,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::Oma,
        Scheme::MustCat1,
        Scheme::MustCat2,
        Scheme::MustCat3,
        Scheme::SmustCat1,
        Scheme::SmustCat2,
        Scheme::SmustCat3,
        Scheme::DynamicMa,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Oma => "oma",
            Scheme::MustCat1 => "must_cat1",
            Scheme::MustCat2 => "must_cat2",
            Scheme::MustCat3 => "must_cat3",
            Scheme::SmustCat1 => "smust_cat1",
            Scheme::SmustCat2 => "smust_cat2",
            Scheme::SmustCat3 => "smust_cat3",
            Scheme::DynamicMa => "dynamic_ma",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::UnsupportedScheme(name.to_string()))
    }

    /// Superposition category, if the scheme transmits one alphabet.
    pub fn category(&self) -> Option<Category> {
        match self {
            Scheme::MustCat1 => Some(Category::MustCat1),
            Scheme::MustCat2 => Some(Category::MustCat2),
            Scheme::MustCat3 => Some(Category::MustCat3),
            Scheme::SmustCat1 => Some(Category::SmustCat1),
            Scheme::SmustCat2 => Some(Category::SmustCat2),
            Scheme::SmustCat3 => Some(Category::SmustCat3),
            Scheme::Oma | Scheme::DynamicMa => None,
        }
    }
}

/// OMA comparator: each user gets half the channel uses at full power,
/// either with a constellation of twice the order (`matched`, same peak
/// rate as the superposition) or with its own constellation (`legacy`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmaMode {
    #[default]
    Matched,
    Legacy,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutConfig {
    pub sites: usize,
    pub isd_m: f64,
    pub wrap: bool,
    pub ues_per_cell: usize,
    pub min_distance_m: f64,
    /// Count the other sites' full-power transmissions as interference.
    pub interference: bool,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig { sites: 7, isd_m: 500.0, wrap: true, ues_per_cell: 150, min_distance_m: 10.0, interference: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioConfig {
    pub tx_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig { tx_power_dbm: 46.0, bandwidth_hz: 10e6, noise_density_dbm_hz: -174.0, noise_figure_db: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub snr_db_start: f64,
    pub snr_db_stop: f64,
    pub snr_db_step: f64,
    pub oma: OmaMode,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { snr_db_start: 0.0, snr_db_stop: 30.0, snr_db_step: 5.0, oma: OmaMode::Matched }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MimoChannel {
    /// i.i.d. unit-variance Rayleigh vectors at a common mean SNR.
    #[default]
    Symmetric,
    /// UEs dropped in the center cell with link-budget mean SINR.
    Layout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MimoConfig {
    pub tx_antennas: usize,
    pub clusters: usize,
    pub members: usize,
    pub ues: usize,
    pub channel: MimoChannel,
    /// Mean per-UE SNR for the symmetric channel.
    pub snr_db: f64,
    pub percentiles: Vec<f64>,
    /// Per-beam receiver for Cat. 3 alphabets.
    pub cat3_decoder: Cat3Decoder,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cat3Decoder {
    #[default]
    Mpic,
    Sic,
}

impl Default for MimoConfig {
    fn default() -> Self {
        MimoConfig {
            tx_antennas: 2,
            clusters: 2,
            members: 2,
            ues: 4,
            channel: MimoChannel::Symmetric,
            snr_db: 10.0,
            percentiles: (0..=20).map(|k| f64::from(k) * 5.0).collect(),
            cat3_decoder: Cat3Decoder::Mpic,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LutLookup {
    #[default]
    Nearest,
    Interpolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LutConfig {
    pub snr_db_start: f64,
    pub snr_db_stop: f64,
    pub snr_db_step: f64,
    pub grid: GridSpec,
    /// How the multi-antenna experiment reads the table.
    pub lookup: LutLookup,
}

impl Default for LutConfig {
    fn default() -> Self {
        LutConfig {
            snr_db_start: -10.0,
            snr_db_stop: 40.0,
            snr_db_step: 5.0,
            grid: GridSpec::default(),
            lookup: LutLookup::Nearest,
        }
    }
}

impl LutConfig {
    pub fn axis(&self) -> Result<Vec<f64>> {
        snr_axis(self.snr_db_start, self.snr_db_stop, self.snr_db_step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedConfig {
    pub ues: usize,
    pub subbands: usize,
    pub pmis: u32,
    pub rounds: usize,
    pub t_c: f64,
    pub alpha_grid: Vec<f64>,
}

impl Default for SchedConfig {
    fn default() -> Self {
        SchedConfig { ues: 10, subbands: 8, pmis: 2, rounds: 50, t_c: 100.0, alpha_grid: default_alpha_grid() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_modulation")]
    pub modulation: String,
    #[serde(default = "default_power")]
    pub power: f64,
    #[serde(default)]
    pub schemes: Vec<String>,
    #[serde(default)]
    pub layout: LayoutConfig,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub mimo: MimoConfig,
    #[serde(default)]
    pub lut: LutConfig,
    #[serde(default)]
    pub sched: SchedConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_trials() -> usize {
    10_000
}

fn default_modulation() -> String {
    "qpsk".into()
}

fn default_power() -> f64 {
    1.0
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
    }
}

fn nonzero(name: &str, v: usize) -> Result<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be at least 1")))
    }
}

impl SimConfig {
    pub fn new(experiment: Experiment) -> Self {
        SimConfig {
            experiment,
            seed: 0,
            trials: default_trials(),
            modulation: default_modulation(),
            power: default_power(),
            schemes: Vec::new(),
            layout: LayoutConfig::default(),
            radio: RadioConfig::default(),
            sweep: SweepConfig::default(),
            mimo: MimoConfig::default(),
            lut: LutConfig::default(),
            sched: SchedConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidConfig(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn schemes(&self) -> Result<Vec<Scheme>> {
        self.schemes.iter().map(|s| Scheme::from_name(s)).collect()
    }

    pub fn constellation(&self) -> Result<LegacyConstellation> {
        LegacyConstellation::from_name(&self.modulation)
    }

    pub fn validate(&self) -> Result<()> {
        self.schemes()?;
        self.constellation()?;
        positive("power", self.power)?;
        nonzero("trials", self.trials)?;
        let l = &self.layout;
        positive("layout.isd_m", l.isd_m)?;
        positive("layout.min_distance_m", l.min_distance_m)?;
        nonzero("layout.ues_per_cell", l.ues_per_cell)?;
        if l.sites != 1 && l.sites != 7 {
            return Err(Error::UnsupportedGeometry(format!("{} sites; supported are 1 and 7", l.sites)));
        }
        let r = &self.radio;
        positive("radio.bandwidth_hz", r.bandwidth_hz)?;
        if !r.tx_power_dbm.is_finite() || !r.noise_density_dbm_hz.is_finite() || !r.noise_figure_db.is_finite() {
            return Err(Error::InvalidConfig("radio parameters must be finite".into()));
        }
        positive("sweep.snr_db_step", self.sweep.snr_db_step)?;
        if self.sweep.snr_db_stop < self.sweep.snr_db_start {
            return Err(Error::InvalidConfig("sweep.snr_db_stop is below sweep.snr_db_start".into()));
        }
        let m = &self.mimo;
        nonzero("mimo.tx_antennas", m.tx_antennas)?;
        nonzero("mimo.clusters", m.clusters)?;
        nonzero("mimo.members", m.members)?;
        nonzero("mimo.ues", m.ues)?;
        if m.clusters > m.tx_antennas || m.ues < m.clusters {
            return Err(Error::InvalidConfig(format!(
                "{} clusters need at most {} antennas and at least as many UEs ({})",
                m.clusters, m.tx_antennas, m.ues
            )));
        }
        if m.percentiles.iter().any(|p| !(0.0..=100.0).contains(p)) {
            return Err(Error::InvalidConfig("percentiles must lie in [0, 100]".into()));
        }
        self.lut.axis()?;
        let s = &self.sched;
        nonzero("sched.ues", s.ues)?;
        nonzero("sched.subbands", s.subbands)?;
        nonzero("sched.rounds", s.rounds)?;
        positive("sched.t_c", s.t_c)?;
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, hex encoded. The output path
    /// is left out so a rerun into another file hashes the same.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.path = None;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
