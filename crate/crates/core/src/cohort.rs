//! Synthetic patient cohorts, dataset CSV files and the four train/test
//! group splits.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bioheat::SolverConfig;
use crate::mesh::{tetrahedralize, MeshError};
use crate::phantom::{build_phantom, sample_patient_properties, PhantomError, PhantomSpec, MEASUREMENT_POINTS};
use crate::radiometry::{measure_phantom, Label, Measurement, Provenance, RadiometryConfig, RadiometryError, ThermoRecord};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("patient {id}: {source}")]
    Phantom { id: String, source: PhantomError },
    #[error("patient {id}: {source}")]
    Mesh { id: String, source: MeshError },
    #[error("patient {id}: {source}")]
    Simulation { id: String, source: RadiometryError },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("row {row}: {message}")]
    Validation { row: usize, message: String },
    #[error("duplicate patient id `{0}`")]
    DuplicateId(String),
    #[error("{0} dataset is empty")]
    EmptyDataset(&'static str),
    #[error("group `{0}` is not one of A, B, C, D")]
    GroupUndefined(String),
    #[error("invalid cohort config: {0}")]
    InvalidConfig(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Ordered records of one or more provenances.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema_version: u32,
    pub records: Vec<ThermoRecord>,
}

impl Dataset {
    pub fn new(records: Vec<ThermoRecord>) -> Result<Self, CohortError> {
        let d = Self {
            schema_version: SCHEMA_VERSION,
            records,
        };
        d.check_ids()?;
        Ok(d)
    }

    pub fn empty() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The common provenance, or `None` when empty or mixed.
    pub fn provenance(&self) -> Option<Provenance> {
        let first = self.records.first()?.provenance;
        self.records.iter().all(|r| r.provenance == first).then_some(first)
    }

    pub fn count(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.id.as_str()).collect()
    }

    fn check_ids(&self) -> Result<(), CohortError> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.id.as_str()) {
                return Err(CohortError::DuplicateId(r.id.clone()));
            }
        }
        Ok(())
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            schema_version: self.schema_version,
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }
}

/// Everything needed to turn a phantom spec into 18 features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSetup {
    pub phantom: PhantomSpec,
    pub mesh_edge_m: f64,
    pub solver: SolverConfig,
    pub radiometry: RadiometryConfig,
}

impl Default for SimulationSetup {
    fn default() -> Self {
        Self {
            phantom: PhantomSpec::default(),
            mesh_edge_m: 0.01,
            solver: SolverConfig::default(),
            radiometry: RadiometryConfig::default(),
        }
    }
}

impl SimulationSetup {
    /// Settings used for cohort generation: a long pseudo time step with a
    /// tight steady criterion.
    pub fn desk() -> Self {
        Self {
            solver: SolverConfig {
                tau_s: 600.0,
                steady_tol: 1e-7,
                ..SolverConfig::default()
            },
            ..Self::default()
        }
    }
}

/// Builds, meshes and measures one phantom with its own sampled properties.
pub fn simulate_patient(spec: &PhantomSpec, setup: &SimulationSetup, id: &str) -> Result<Measurement, CohortError> {
    let phantom = build_phantom(spec).map_err(|source| CohortError::Phantom { id: id.into(), source })?;
    let mesh = tetrahedralize(&phantom, setup.mesh_edge_m).map_err(|source| CohortError::Mesh { id: id.into(), source })?;
    let props = sample_patient_properties(spec, setup.radiometry.frequency_hz);
    measure_phantom(&phantom, &props, &mesh, &setup.solver, &setup.radiometry)
        .map_err(|source| CohortError::Simulation { id: id.into(), source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub n_healthy: usize,
    pub n_cancer: usize,
    pub tumor_radius_min_m: f64,
    pub tumor_radius_max_m: f64,
    /// Standard deviation of additive Gaussian noise on every feature (K).
    pub noise_k: f64,
    pub id_prefix: String,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_healthy: 159,
            n_cancer: 160,
            tumor_radius_min_m: 0.005,
            tumor_radius_max_m: 0.015,
            noise_k: 0.0,
            id_prefix: "M".into(),
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<(), CohortError> {
        let bad = |m: &str| Err(CohortError::InvalidConfig(m.into()));
        if !(self.tumor_radius_min_m > 0.0 && self.tumor_radius_min_m <= self.tumor_radius_max_m) {
            return bad("tumor radius range is empty");
        }
        if !(self.noise_k >= 0.0 && self.noise_k.is_finite()) {
            return bad("noise must be finite and nonnegative");
        }
        if self.id_prefix.is_empty() || self.id_prefix.contains([',', '"', '\n', '\r']) {
            return bad("id prefix must be non-empty and free of commas, quotes and newlines");
        }
        Ok(())
    }
}

/// Shift applied to the model configuration to stand in for clinical data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub n_healthy: usize,
    pub n_cancer: usize,
    pub noise_k: f64,
    /// Multiplies every property spread of the base spec (capped below 1).
    pub variability_scale: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            n_healthy: 109,
            n_cancer: 27,
            noise_k: 0.3,
            variability_scale: 1.5,
        }
    }
}

/// Per-patient draws, fixed by `(seed, index)` alone.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PatientDraw {
    phantom_seed: u64,
    tumor: Option<(usize, f64)>,
}

fn patient_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn draw_patient(rng: &mut ChaCha8Rng, cancer: bool, cfg: &CohortConfig) -> PatientDraw {
    let phantom_seed = rng.next_u64();
    let tumor = cancer.then(|| {
        let point = rng.random_range(0..MEASUREMENT_POINTS);
        let r = rng.random_range(cfg.tumor_radius_min_m..=cfg.tumor_radius_max_m);
        (point, r)
    });
    PatientDraw { phantom_seed, tumor }
}

fn add_noise(rng: &mut ChaCha8Rng, values: &mut [f64], sd: f64) {
    if sd == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sd).expect("validated noise");
    for v in values {
        *v += normal.sample(rng);
    }
}

fn generate(
    cfg: &CohortConfig,
    setup: &SimulationSetup,
    seed: u64,
    provenance: Provenance,
) -> Result<Dataset, CohortError> {
    cfg.validate()?;
    let n = cfg.n_healthy + cfg.n_cancer;
    let width = n.max(1).to_string().len().max(4);
    let records: Result<Vec<_>, _> = (0..n)
        .into_par_iter()
        .map(|i| {
            let cancer = i >= cfg.n_healthy;
            let id = format!("{}{:0width$}", cfg.id_prefix, i + 1);
            let mut rng = patient_rng(seed, i);
            let draw = draw_patient(&mut rng, cancer, cfg);
            let mut spec = setup.phantom.clone();
            spec.seed = draw.phantom_seed;
            spec.tumor.present = false;
            if let Some((point, radius)) = draw.tumor {
                spec = spec.with_tumor(point, radius);
            }
            let m = simulate_patient(&spec, setup, &id)?;
            let (mut t_mw, mut t_ir) = (m.t_mw, m.t_ir);
            add_noise(&mut rng, &mut t_mw, cfg.noise_k);
            add_noise(&mut rng, &mut t_ir, cfg.noise_k);
            Ok::<_, CohortError>(ThermoRecord {
                id,
                label: if cancer { Label::Cancer } else { Label::Healthy },
                provenance,
                t_mw,
                t_ir,
            })
        })
        .collect();
    Dataset::new(records?)
}

/// Healthy records first, then tumor-bearing ones, each simulated with its
/// own property draw; a tumor sits under a uniformly drawn point with a
/// uniformly drawn radius.
pub fn generate_cohort(cfg: &CohortConfig, setup: &SimulationSetup, seed: u64) -> Result<Dataset, CohortError> {
    generate(cfg, setup, seed, Provenance::Model)
}

/// Stand-in for the clinical database: the same pipeline with widened
/// property spreads and additive measurement noise.
pub fn generate_original_surrogate(
    sur: &SurrogateConfig,
    base: &CohortConfig,
    setup: &SimulationSetup,
    seed: u64,
) -> Result<Dataset, CohortError> {
    if !(sur.variability_scale >= 0.0 && sur.variability_scale.is_finite()) {
        return Err(CohortError::InvalidConfig("variability_scale must be finite and nonnegative".into()));
    }
    let mut shifted = setup.clone();
    let v = &mut shifted.phantom.variability;
    for s in [
        &mut v.density,
        &mut v.specific_heat,
        &mut v.conductivity,
        &mut v.q_met,
        &mut v.q_can,
        &mut v.q_rad,
        &mut v.sigma,
        &mut v.eps,
    ] {
        *s = (*s * sur.variability_scale).min(0.95);
    }
    let cfg = CohortConfig {
        n_healthy: sur.n_healthy,
        n_cancer: sur.n_cancer,
        noise_k: sur.noise_k,
        id_prefix: "O".into(),
        ..base.clone()
    };
    generate(&cfg, &shifted, seed, Provenance::OriginalSurrogate)
}

/// Independent Gaussian features, class means `separation` standard
/// deviations apart on every feature. No simulation involved.
pub fn gaussian_cohort(
    n_healthy: usize,
    n_cancer: usize,
    separation: f64,
    seed: u64,
    provenance: Provenance,
    id_prefix: &str,
) -> Dataset {
    const SD: f64 = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, SD).expect("positive sd");
    let records = (0..n_healthy + n_cancer)
        .map(|i| {
            let cancer = i >= n_healthy;
            let shift = if cancer { separation * SD } else { 0.0 };
            let mut t_mw = [0.0; MEASUREMENT_POINTS];
            let mut t_ir = [0.0; MEASUREMENT_POINTS];
            for v in &mut t_mw {
                *v = 34.0 + shift + noise.sample(&mut rng);
            }
            for v in &mut t_ir {
                *v = 31.0 + shift + noise.sample(&mut rng);
            }
            ThermoRecord {
                id: format!("{id_prefix}{:05}", i + 1),
                label: if cancer { Label::Cancer } else { Label::Healthy },
                provenance,
                t_mw,
                t_ir,
            }
        })
        .collect();
    Dataset::new(records).expect("generated ids are unique")
}

/// CSV header, in column order.
pub fn csv_header() -> Vec<String> {
    let mut h = vec!["id".to_string(), "label".into(), "provenance".into()];
    h.extend((0..MEASUREMENT_POINTS).map(|i| format!("t_mw_{i}")));
    h.extend((0..MEASUREMENT_POINTS).map(|i| format!("t_ir_{i}")));
    h
}

pub fn write_csv<W: Write>(dataset: &Dataset, w: W) -> Result<(), CohortError> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let io = |e: csv::Error| CohortError::Io(e.into());
    out.write_record(csv_header()).map_err(io)?;
    for r in &dataset.records {
        let mut row = vec![r.id.clone(), r.label.as_str().into(), r.provenance.as_str().into()];
        row.extend(r.features().iter().map(|v| v.to_string()));
        out.write_record(&row).map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Dataset, CohortError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(r);
    let header = rd
        .headers()
        .map_err(|e| CohortError::SchemaMismatch(format!("unreadable header: {e}")))?
        .clone();
    let expected = csv_header();
    for (i, name) in expected.iter().enumerate() {
        match header.get(i) {
            Some(h) if h == name => {}
            Some(h) if header.iter().any(|x| x == name) => {
                return Err(CohortError::SchemaMismatch(format!("column `{name}` expected at position {i}, found `{h}`")))
            }
            _ => return Err(CohortError::SchemaMismatch(format!("missing column `{name}`"))),
        }
    }
    if header.len() > expected.len() {
        return Err(CohortError::SchemaMismatch(format!("unexpected column `{}`", &header[expected.len()])));
    }
    let mut records = Vec::new();
    for (k, row) in rd.records().enumerate() {
        let row_no = k + 1;
        let bad = |message: String| CohortError::Validation { row: row_no, message };
        let row = row.map_err(|e| bad(e.to_string()))?;
        if row.len() != expected.len() {
            return Err(bad(format!("{} fields, expected {}", row.len(), expected.len())));
        }
        let label = Label::from_str(&row[1]).map_err(bad)?;
        let provenance = Provenance::from_str(&row[2]).map_err(bad)?;
        let mut f = [0.0; 2 * MEASUREMENT_POINTS];
        for (j, v) in f.iter_mut().enumerate() {
            let text = &row[3 + j];
            *v = text
                .parse()
                .map_err(|_| bad(format!("`{text}` in column `{}` is not a number", expected[3 + j])))?;
        }
        let rec = ThermoRecord {
            id: row[0].to_string(),
            label,
            provenance,
            t_mw: f[..MEASUREMENT_POINTS].try_into().unwrap(),
            t_ir: f[MEASUREMENT_POINTS..].try_into().unwrap(),
        };
        if rec.id.is_empty() {
            return Err(bad("empty patient id".into()));
        }
        rec.validate().map_err(|e| bad(e.to_string()))?;
        records.push(rec);
    }
    Dataset::new(records)
}

pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<(), CohortError> {
    write_csv(dataset, BufWriter::new(File::create(path)?))
}

pub fn load_csv(path: &Path) -> Result<Dataset, CohortError> {
    read_csv(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
    C,
    D,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::A, Group::B, Group::C, Group::D];
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Group::A => "A",
            Group::B => "B",
            Group::C => "C",
            Group::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for Group {
    type Err = CohortError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Group::A),
            "B" | "b" => Ok(Group::B),
            "C" | "c" => Ok(Group::C),
            "D" | "d" => Ok(Group::D),
            other => Err(CohortError::GroupUndefined(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSplit {
    pub group: Group,
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
}

/// Per class, a seeded random ⌊n/2⌋ of the indices; returns (half, rest),
/// both in dataset order.
pub fn stratified_half(d: &Dataset, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut half = Vec::new();
    for label in [Label::Healthy, Label::Cancer] {
        let mut idx: Vec<usize> = (0..d.len()).filter(|&i| d.records[i].label == label).collect();
        idx.shuffle(&mut rng);
        half.extend_from_slice(&idx[..idx.len() / 2]);
    }
    half.sort_unstable();
    let chosen: HashSet<usize> = half.iter().copied().collect();
    let rest = (0..d.len()).filter(|i| !chosen.contains(i)).collect();
    (half, rest)
}

/// A seeded random ⌊0.9 n⌋ of the indices, in dataset order.
pub fn random_ninety(d: &Dataset, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.shuffle(&mut rng);
    idx.truncate(d.len() * 9 / 10);
    idx.sort_unstable();
    idx
}

fn concat(a: Dataset, b: &Dataset) -> Result<Dataset, CohortError> {
    let mut records = a.records;
    records.extend(b.records.iter().cloned());
    Dataset::new(records)
}

pub fn make_split(original: &Dataset, model: &Dataset, group: Group, seed: u64) -> Result<GroupSplit, CohortError> {
    if original.is_empty() {
        return Err(CohortError::EmptyDataset("original"));
    }
    if model.is_empty() {
        return Err(CohortError::EmptyDataset("model"));
    }
    let (train, test) = match group {
        Group::A => {
            let (half, _) = stratified_half(original, seed);
            (original.subset(&half), model.clone())
        }
        Group::B => (model.subset(&random_ninety(model, seed)), original.clone()),
        Group::C => {
            let (half, rest) = stratified_half(original, seed);
            (original.subset(&half), original.subset(&rest))
        }
        Group::D => {
            let (half, rest) = stratified_half(original, seed);
            (concat(original.subset(&half), model)?, original.subset(&rest))
        }
    };
    let train_ids: HashSet<&str> = train.ids().into_iter().collect();
    if let Some(id) = test.ids().into_iter().find(|id| train_ids.contains(id)) {
        return Err(CohortError::DuplicateId(id.to_string()));
    }
    Ok(GroupSplit { group, train, test, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, label: Label, provenance: Provenance, base: f64) -> ThermoRecord {
        ThermoRecord {
            id: id.into(),
            label,
            provenance,
            t_mw: std::array::from_fn(|i| base + 0.1 * i as f64),
            t_ir: std::array::from_fn(|i| base - 2.0 + 0.01 * i as f64),
        }
    }

    fn counted(prefix: &str, healthy: usize, cancer: usize, provenance: Provenance) -> Dataset {
        let records = (0..healthy + cancer)
            .map(|i| {
                let label = if i < healthy { Label::Healthy } else { Label::Cancer };
                rec(&format!("{prefix}{i}"), label, provenance, 33.0 + (i % 7) as f64 * 0.3)
            })
            .collect();
        Dataset::new(records).unwrap()
    }

    fn original() -> Dataset {
        counted("O", 109, 27, Provenance::OriginalSurrogate)
    }

    fn model() -> Dataset {
        counted("M", 159, 160, Provenance::Model)
    }

    fn tiny_setup() -> SimulationSetup {
        let mut s = SimulationSetup::desk();
        s.mesh_edge_m = 0.02;
        s
    }

    #[test]
    fn header_matches_interchange_format() {
        let h = csv_header().join(",");
        assert!(h.starts_with("id,label,provenance,t_mw_0,"));
        assert!(h.ends_with(",t_mw_8,t_ir_0,t_ir_1,t_ir_2,t_ir_3,t_ir_4,t_ir_5,t_ir_6,t_ir_7,t_ir_8"));
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let mut d = original();
        d.records[3].t_mw[2] = 35.123456789012345;
        d.records[4].t_ir[8] = 1.0 / 3.0 + 30.0;
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 137);
        assert_eq!(read_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn save_and_load_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = model();
        save_csv(&d, &path).unwrap();
        assert_eq!(load_csv(&path).unwrap(), d);
    }

    #[test]
    fn empty_dataset_round_trips_as_header_only() {
        let mut buf = Vec::new();
        write_csv(&Dataset::empty(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 1);
        assert!(read_csv(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn missing_column_is_named() {
        let mut buf = Vec::new();
        write_csv(&counted("X", 2, 2, Provenance::Model), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let dropped: String = text
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(3 + MEASUREMENT_POINTS + 4);
                f.join(",") + "\n"
            })
            .collect();
        match read_csv(dropped.as_bytes()) {
            Err(CohortError::SchemaMismatch(m)) => assert!(m.contains("t_ir_4"), "{m}"),
            other => panic!("expected SchemaMismatch, got {other:?}"),
        }
    }

    #[test]
    fn bad_label_reports_row_number() {
        let mut buf = Vec::new();
        write_csv(&counted("X", 3, 1, Provenance::Model), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("X2,healthy", "X2,benign", 1);
        match read_csv(text.as_bytes()) {
            Err(CohortError::Validation { row, message }) => {
                assert_eq!(row, 3);
                assert!(message.contains("benign"));
            }
            other => panic!("expected Validation, got {other:?}"),
        }
    }

    #[test]
    fn out_of_band_value_is_rejected_on_load() {
        let mut d = counted("X", 1, 1, Provenance::Model);
        d.records[1].t_ir[0] = 50.0;
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        assert!(matches!(read_csv(buf.as_slice()), Err(CohortError::Validation { row: 2, .. })));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let r = rec("same", Label::Healthy, Provenance::Model, 33.0);
        assert!(matches!(Dataset::new(vec![r.clone(), r]), Err(CohortError::DuplicateId(_))));
    }

    #[test]
    fn provenance_is_common_or_none() {
        assert_eq!(original().provenance(), Some(Provenance::OriginalSurrogate));
        assert_eq!(Dataset::empty().provenance(), None);
        let mixed = concat(original(), &model()).unwrap();
        assert_eq!(mixed.provenance(), None);
    }

    #[test]
    fn group_a_counts_round_down_per_stratum() {
        let s = make_split(&original(), &model(), Group::A, 7).unwrap();
        assert_eq!(s.train.len(), 54 + 13);
        assert_eq!(s.train.count(Label::Healthy), 54);
        assert_eq!(s.train.count(Label::Cancer), 13);
        assert_eq!(s.test, model());
    }

    #[test]
    fn group_b_takes_ninety_percent_of_model() {
        let s = make_split(&original(), &model(), Group::B, 7).unwrap();
        assert_eq!(s.train.len(), 287);
        assert_eq!(s.train.provenance(), Some(Provenance::Model));
        assert_eq!(s.test, original());
    }

    #[test]
    fn groups_c_and_d_test_on_the_rest_of_original() {
        let (o, m) = (original(), model());
        let c = make_split(&o, &m, Group::C, 11).unwrap();
        let d = make_split(&o, &m, Group::D, 11).unwrap();
        assert_eq!(c.train.len() + c.test.len(), 136);
        assert_eq!(d.test, c.test);
        assert_eq!(d.test.provenance(), Some(Provenance::OriginalSurrogate));
        assert_eq!(d.train.len(), c.train.len() + 319);
        assert_eq!(d.train.count(Label::Cancer), c.train.count(Label::Cancer) + 160);
    }

    #[test]
    fn empty_inputs_and_unknown_groups_are_errors() {
        assert!(matches!(
            make_split(&Dataset::empty(), &model(), Group::A, 0),
            Err(CohortError::EmptyDataset("original"))
        ));
        assert!(matches!(
            make_split(&original(), &Dataset::empty(), Group::C, 0),
            Err(CohortError::EmptyDataset("model"))
        ));
        assert!(matches!("E".parse::<Group>(), Err(CohortError::GroupUndefined(_))));
        assert_eq!("c".parse::<Group>().unwrap(), Group::C);
    }

    #[test]
    fn colliding_ids_across_databases_are_rejected() {
        let o = counted("P", 4, 4, Provenance::OriginalSurrogate);
        let m = counted("P", 4, 4, Provenance::Model);
        assert!(matches!(make_split(&o, &m, Group::A, 0), Err(CohortError::DuplicateId(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn splits_are_disjoint_stratified_and_deterministic(
            oh in 1usize..60, oc in 1usize..30, mh in 1usize..40, mc in 1usize..40,
            seed in any::<u64>(), g in 0usize..4,
        ) {
            let o = counted("O", oh, oc, Provenance::OriginalSurrogate);
            let m = counted("M", mh, mc, Provenance::Model);
            let group = Group::ALL[g];
            let s = make_split(&o, &m, group, seed).unwrap();
            let train: HashSet<&str> = s.train.ids().into_iter().collect();
            prop_assert!(s.test.ids().iter().all(|id| !train.contains(id)));
            prop_assert_eq!(&make_split(&o, &m, group, seed).unwrap(), &s);

            if group != Group::B {
                let half = make_split(&o, &m, Group::C, seed).unwrap().train;
                prop_assert_eq!(half.count(Label::Healthy), oh / 2);
                prop_assert_eq!(half.count(Label::Cancer), oc / 2);
                if !half.is_empty() {
                    let frac = half.count(Label::Cancer) as f64 / half.len() as f64;
                    let source = oc as f64 / (oh + oc) as f64;
                    prop_assert!((frac - source).abs() <= 1.0 / half.len() as f64);
                }
            }
            // Every original record lands on exactly one side in C.
            let c = make_split(&o, &m, Group::C, seed).unwrap();
            prop_assert_eq!(c.train.len() + c.test.len(), o.len());
        }
    }

    #[test]
    fn gaussian_cohort_has_requested_shape_and_separation() {
        let d = gaussian_cohort(300, 200, 3.0, 5, Provenance::Model, "G");
        assert_eq!((d.count(Label::Healthy), d.count(Label::Cancer)), (300, 200));
        let mean = |label: Label, j: usize| {
            let v: Vec<f64> = d.records.iter().filter(|r| r.label == label).map(|r| r.features()[j]).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        for j in 0..2 * MEASUREMENT_POINTS {
            let gap = mean(Label::Cancer, j) - mean(Label::Healthy, j);
            assert!((gap - 1.5).abs() < 0.15, "feature {j}: gap {gap}");
        }
        for r in &d.records {
            r.validate().unwrap();
        }
    }

    #[test]
    fn empty_cohort() {
        let cfg = CohortConfig {
            n_healthy: 0,
            n_cancer: 0,
            ..CohortConfig::default()
        };
        assert!(generate_cohort(&cfg, &tiny_setup(), 1).unwrap().is_empty());
    }

    #[test]
    fn small_cohort_counts_labels_and_determinism() {
        let cfg = CohortConfig {
            n_healthy: 2,
            n_cancer: 3,
            ..CohortConfig::default()
        };
        let setup = tiny_setup();
        let a = generate_cohort(&cfg, &setup, 42).unwrap();
        assert_eq!((a.count(Label::Healthy), a.count(Label::Cancer)), (2, 3));
        assert_eq!(a.provenance(), Some(Provenance::Model));
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_csv(&a, &mut x).unwrap();
        write_csv(&generate_cohort(&cfg, &setup, 42).unwrap(), &mut y).unwrap();
        assert_eq!(x, y);
        let other = generate_cohort(&cfg, &setup, 43).unwrap();
        assert_ne!(other.records[0].t_mw, a.records[0].t_mw);
    }

    #[test]
    fn patient_draws_do_not_depend_on_cohort_size() {
        let cfg = CohortConfig::default();
        let a = draw_patient(&mut patient_rng(9, 3), true, &cfg);
        let b = draw_patient(&mut patient_rng(9, 3), true, &cfg);
        assert_eq!(a, b);
        let (point, r) = a.tumor.unwrap();
        assert!(point < MEASUREMENT_POINTS);
        assert!((0.005..=0.015).contains(&r));
        assert!(draw_patient(&mut patient_rng(9, 3), false, &cfg).tumor.is_none());
    }

    #[test]
    fn tumor_draws_cover_every_point_and_the_radius_range() {
        let cfg = CohortConfig::default();
        let mut seen = [0usize; MEASUREMENT_POINTS];
        let (mut lo, mut hi) = (f64::MAX, f64::MIN);
        for i in 0..900 {
            let (p, r) = draw_patient(&mut patient_rng(1, i), true, &cfg).tumor.unwrap();
            seen[p] += 1;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        assert!(seen.iter().all(|&c| (60..=140).contains(&c)), "{seen:?}");
        assert!(lo < 0.0055 && hi > 0.0145);
    }

    #[test]
    fn every_tumor_draw_is_a_valid_phantom() {
        for point in 0..MEASUREMENT_POINTS {
            for r in [0.005, 0.015] {
                PhantomSpec::default().with_tumor(point, r).validate().unwrap();
            }
        }
    }

    #[test]
    fn surrogate_tags_counts_and_noise() {
        let sur = SurrogateConfig {
            n_healthy: 3,
            n_cancer: 1,
            ..SurrogateConfig::default()
        };
        let setup = tiny_setup();
        let d = generate_original_surrogate(&sur, &CohortConfig::default(), &setup, 3).unwrap();
        assert_eq!((d.count(Label::Healthy), d.count(Label::Cancer)), (3, 1));
        assert!(d.records.iter().all(|r| r.provenance == Provenance::OriginalSurrogate));
        assert!(d.records.iter().all(|r| r.id.starts_with('O')));

        let quiet = SurrogateConfig {
            noise_k: 0.0,
            ..sur.clone()
        };
        let q = generate_original_surrogate(&quiet, &CohortConfig::default(), &setup, 3).unwrap();
        let gaps: Vec<f64> = d
            .records
            .iter()
            .zip(&q.records)
            .flat_map(|(a, b)| a.features().into_iter().zip(b.features()).map(|(x, y)| x - y))
            .collect();
        let sd = (gaps.iter().map(|g| g * g).sum::<f64>() / gaps.len() as f64).sqrt();
        assert!((0.15..0.5).contains(&sd), "noise sd {sd}");
    }
}
