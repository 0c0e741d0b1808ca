//! Tissue inventory, the shipped default property table, and per-patient
//! parameter variability.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;
use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Raw text of the default property table shipped with the crate.
pub const DEFAULT_PROPERTY_TABLE: &str = include_str!("../data/tissue_properties.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TissueType {
    Skin,
    AdiposeTissue,
    MammaryGland,
    BreastLobule,
    Duct,
    ConnectiveTissue,
    Muscle,
    BloodVessel,
    Tumor,
    Nipple,
}

impl TissueType {
    pub const COUNT: usize = 10;

    pub const ALL: [TissueType; Self::COUNT] = [
        TissueType::Skin,
        TissueType::AdiposeTissue,
        TissueType::MammaryGland,
        TissueType::BreastLobule,
        TissueType::Duct,
        TissueType::ConnectiveTissue,
        TissueType::Muscle,
        TissueType::BloodVessel,
        TissueType::Tumor,
        TissueType::Nipple,
    ];

    /// Stable integer code, used for the VTK `tissue` cell array.
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn from_code(code: i32) -> Option<TissueType> {
        usize::try_from(code).ok().and_then(|i| Self::ALL.get(i).copied())
    }

    pub fn name(self) -> &'static str {
        match self {
            TissueType::Skin => "skin",
            TissueType::AdiposeTissue => "adipose_tissue",
            TissueType::MammaryGland => "mammary_gland",
            TissueType::BreastLobule => "breast_lobule",
            TissueType::Duct => "duct",
            TissueType::ConnectiveTissue => "connective_tissue",
            TissueType::Muscle => "muscle",
            TissueType::BloodVessel => "blood_vessel",
            TissueType::Tumor => "tumor",
            TissueType::Nipple => "nipple",
        }
    }
}

impl fmt::Display for TissueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TissueType {
    type Err = PropertyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TissueType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| PropertyError::UnknownTissue(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum PropertyError {
    #[error("unknown tissue type `{0}`")]
    UnknownTissue(String),
    #[error("property table is missing tissue `{0}`")]
    MissingTissue(TissueType),
    #[error("invalid property table: {0}")]
    Parse(String),
    #[error("tissue `{tissue}`: {what}")]
    Invalid { tissue: TissueType, what: String },
}

/// Physical parameters of one tissue at one frequency (SI units, sources in W/m³).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TissueProperties {
    pub density: f64,
    pub specific_heat: f64,
    pub conductivity: f64,
    pub q_met: f64,
    pub q_can: f64,
    pub q_rad: f64,
    /// Electrical conductivity (S/m) at the table's frequency.
    pub sigma: f64,
    /// Relative permittivity.
    pub eps: f64,
    /// Relative permeability.
    pub mu: f64,
}

impl TissueProperties {
    /// Net volumetric heat source Q_met + Q_can + Q_rad.
    pub fn heat_source(&self) -> f64 {
        self.q_met + self.q_can + self.q_rad
    }

    pub fn volumetric_heat_capacity(&self) -> f64 {
        self.density * self.specific_heat
    }

    pub fn validate(&self, tissue: TissueType) -> Result<(), PropertyError> {
        let fail = |what: &str| {
            Err(PropertyError::Invalid {
                tissue,
                what: what.to_string(),
            })
        };
        let finite = [
            self.density,
            self.specific_heat,
            self.conductivity,
            self.q_met,
            self.q_can,
            self.q_rad,
            self.sigma,
            self.eps,
            self.mu,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return fail("non-finite value");
        }
        if self.density <= 0.0 || self.specific_heat <= 0.0 || self.conductivity <= 0.0 {
            return fail("density, specific heat and conductivity must be > 0");
        }
        if self.sigma < 0.0 || self.eps < 1.0 || self.mu <= 0.0 {
            return fail("requires sigma >= 0, eps >= 1, mu > 0");
        }
        if self.q_rad > 0.0 || self.q_met < 0.0 || self.q_can < 0.0 {
            return fail("requires q_rad <= 0, q_met >= 0, q_can >= 0");
        }
        if self.q_can != 0.0 && tissue != TissueType::Tumor {
            return fail("q_can must be zero outside tumor tissue");
        }
        Ok(())
    }
}

/// Complete per-tissue property assignment for one patient.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyTable {
    entries: [TissueProperties; TissueType::COUNT],
}

impl PropertyTable {
    pub fn from_fn(mut f: impl FnMut(TissueType) -> TissueProperties) -> Self {
        Self {
            entries: TissueType::ALL.map(&mut f),
        }
    }

    /// Built-in defaults evaluated at `frequency_hz`.
    pub fn defaults(frequency_hz: f64) -> Self {
        Self::from_fn(|t| default_tissue_properties(t, frequency_hz))
    }

    /// Same properties for every tissue; handy for homogeneous phantoms.
    pub fn uniform(props: TissueProperties) -> Self {
        Self::from_fn(|_| props)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TissueType, &TissueProperties)> {
        TissueType::ALL.into_iter().zip(self.entries.iter())
    }

    pub fn validate(&self) -> Result<(), PropertyError> {
        self.iter().try_for_each(|(t, p)| p.validate(t))
    }
}

impl Index<TissueType> for PropertyTable {
    type Output = TissueProperties;
    fn index(&self, t: TissueType) -> &TissueProperties {
        &self.entries[t as usize]
    }
}

impl IndexMut<TissueType> for PropertyTable {
    fn index_mut(&mut self, t: TissueType) -> &mut TissueProperties {
        &mut self.entries[t as usize]
    }
}

#[derive(Debug, Clone, Deserialize)]
struct RawEntry {
    density: f64,
    specific_heat: f64,
    conductivity: f64,
    q_met: f64,
    q_can: f64,
    q_rad: f64,
    sigma_ref: f64,
    sigma_exponent: f64,
    eps_ref: f64,
    eps_exponent: f64,
    mu: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct RawTable {
    schema_version: u32,
    reference_frequency_hz: f64,
    tissue: BTreeMap<String, RawEntry>,
}

/// Parsed property table with frequency scaling laws.
#[derive(Debug, Clone)]
pub struct PropertyDatabase {
    reference_frequency_hz: f64,
    entries: Vec<(TissueType, RawEntry)>,
}

impl PropertyDatabase {
    pub const SCHEMA_VERSION: u32 = 1;

    pub fn parse(text: &str) -> Result<Self, PropertyError> {
        let raw: RawTable = toml::from_str(text).map_err(|e| PropertyError::Parse(e.to_string()))?;
        if raw.schema_version != Self::SCHEMA_VERSION {
            return Err(PropertyError::Parse(format!(
                "unsupported schema_version {}",
                raw.schema_version
            )));
        }
        if !(raw.reference_frequency_hz > 0.0) {
            return Err(PropertyError::Parse("reference_frequency_hz must be > 0".into()));
        }
        let mut entries = Vec::with_capacity(TissueType::COUNT);
        for (name, entry) in raw.tissue {
            entries.push((name.parse::<TissueType>()?, entry));
        }
        let db = Self {
            reference_frequency_hz: raw.reference_frequency_hz,
            entries,
        };
        for t in TissueType::ALL {
            db.at(t, db.reference_frequency_hz)?.validate(t)?;
        }
        Ok(db)
    }

    pub fn at(&self, tissue: TissueType, frequency_hz: f64) -> Result<TissueProperties, PropertyError> {
        let (_, e) = self
            .entries
            .iter()
            .find(|(t, _)| *t == tissue)
            .ok_or(PropertyError::MissingTissue(tissue))?;
        let ratio = frequency_hz / self.reference_frequency_hz;
        Ok(TissueProperties {
            density: e.density,
            specific_heat: e.specific_heat,
            conductivity: e.conductivity,
            q_met: e.q_met,
            q_can: e.q_can,
            q_rad: e.q_rad,
            sigma: e.sigma_ref * ratio.powf(e.sigma_exponent),
            eps: (e.eps_ref * ratio.powf(e.eps_exponent)).max(1.0),
            mu: e.mu,
        })
    }

    pub fn table(&self, frequency_hz: f64) -> Result<PropertyTable, PropertyError> {
        let mut entries = Vec::with_capacity(TissueType::COUNT);
        for t in TissueType::ALL {
            entries.push(self.at(t, frequency_hz)?);
        }
        let entries: [TissueProperties; TissueType::COUNT] =
            entries.try_into().expect("one entry per tissue");
        Ok(PropertyTable { entries })
    }
}

static DEFAULT_DB: LazyLock<PropertyDatabase> = LazyLock::new(|| {
    PropertyDatabase::parse(DEFAULT_PROPERTY_TABLE).expect("shipped property table is valid")
});

/// Built-in default property set for `tissue` at `frequency_hz` (> 0).
pub fn default_tissue_properties(tissue: TissueType, frequency_hz: f64) -> TissueProperties {
    assert!(frequency_hz > 0.0, "frequency must be positive");
    DEFAULT_DB
        .at(tissue, frequency_hz)
        .expect("shipped property table covers every tissue")
}

/// Relative spreads for per-patient sampling; each must lie in [0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariabilitySpec {
    pub density: f64,
    pub specific_heat: f64,
    pub conductivity: f64,
    pub q_met: f64,
    pub q_can: f64,
    pub q_rad: f64,
    pub sigma: f64,
    pub eps: f64,
}

impl Default for VariabilitySpec {
    fn default() -> Self {
        Self {
            density: 0.05,
            specific_heat: 0.05,
            conductivity: 0.15,
            q_met: 0.3,
            q_can: 0.3,
            q_rad: 0.2,
            sigma: 0.1,
            eps: 0.1,
        }
    }
}

impl VariabilitySpec {
    pub fn none() -> Self {
        Self::uniform(0.0)
    }

    pub fn uniform(spread: f64) -> Self {
        Self {
            density: spread,
            specific_heat: spread,
            conductivity: spread,
            q_met: spread,
            q_can: spread,
            q_rad: spread,
            sigma: spread,
            eps: spread,
        }
    }

    pub fn spreads(&self) -> [f64; 8] {
        [
            self.density,
            self.specific_heat,
            self.conductivity,
            self.q_met,
            self.q_can,
            self.q_rad,
            self.sigma,
            self.eps,
        ]
    }

    pub fn is_valid(&self) -> bool {
        self.spreads().iter().all(|s| (0.0..1.0).contains(s))
    }
}

fn perturb(rng: &mut ChaCha8Rng, value: f64, spread: f64) -> f64 {
    if spread == 0.0 {
        return value;
    }
    value * (1.0 + rng.random_range(-spread..=spread))
}

/// Draws one patient's property table: every parameter of every tissue is
/// `default * (1 + u)`, `u ~ U[-spread, spread]`, in a fixed draw order.
pub fn sample_properties(
    defaults: &PropertyTable,
    variability: &VariabilitySpec,
    seed: u64,
) -> PropertyTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = variability;
    PropertyTable::from_fn(|t| {
        let d = defaults[t];
        TissueProperties {
            density: perturb(&mut rng, d.density, v.density),
            specific_heat: perturb(&mut rng, d.specific_heat, v.specific_heat),
            conductivity: perturb(&mut rng, d.conductivity, v.conductivity),
            q_met: perturb(&mut rng, d.q_met, v.q_met),
            q_can: perturb(&mut rng, d.q_can, v.q_can),
            q_rad: perturb(&mut rng, d.q_rad, v.q_rad).min(0.0),
            sigma: perturb(&mut rng, d.sigma, v.sigma).max(0.0),
            eps: perturb(&mut rng, d.eps, v.eps).max(1.0),
            mu: d.mu,
        }
    })
}
