use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use rtmsim_core::bioheat::write_temperature_csv;
use rtmsim_core::cohort::{
    gaussian_cohort, generate_cohort, generate_original_surrogate, read_csv, write_csv, Dataset,
};
use rtmsim_core::mesh::{BoundaryKind, Mesh};
use rtmsim_core::phantom::{sample_patient_properties, MEASUREMENT_POINTS};
use rtmsim_core::radiometry::{measure_phantom, Label, Provenance, ThermoRecord};
use rtmsim_core::vtk::write_vtk;
use rtmsim_core::{build_phantom, tetrahedralize, BreastPhantom, TissueType};
use rtmsim_learn::evaluation::{evaluate_all, render_table, results_csv, Protocol};

use crate::config::{GeneratorKind, RunConfig};
use crate::error::CliError;
use crate::output::{file_name, io_at, sha256_hex, Manifest, OutputSet};
use crate::{EvaluateArgs, GenerateArgs, MeshInfoArgs, SimulateArgs};

pub const FIELDS_VTK: &str = "fields.vtk";
pub const TEMPERATURE_CSV: &str = "temperature.csv";
pub const MEASUREMENTS_CSV: &str = "measurements.csv";
pub const MODEL_CSV: &str = "model.csv";
pub const ORIGINAL_CSV: &str = "original_surrogate.csv";
pub const REPORT_TXT: &str = "report.txt";
pub const RESULTS_CSV: &str = "results.csv";

pub fn manifest_name(command: &str) -> String {
    format!("{command}.manifest.json")
}

/// Stages `files` plus the command manifest and commits them together.
fn finish(command: &str, cfg: &RunConfig, inputs: BTreeMap<String, String>, mut files: OutputSet) -> Result<Vec<PathBuf>, CliError> {
    let mut manifest = Manifest::new(command, cfg);
    manifest.inputs = inputs;
    manifest.outputs = files.hashes();
    files.add(cfg.output_dir.join(manifest_name(command)), manifest.to_json());
    files.commit()
}

fn build_mesh(cfg: &RunConfig) -> Result<(BreastPhantom, Mesh), CliError> {
    let phantom = build_phantom(&cfg.phantom_spec()).map_err(|e| CliError::InvalidSpec(e.to_string()))?;
    let mesh = tetrahedralize(&phantom, cfg.mesh.target_edge_m).map_err(|e| CliError::Mesh(e.to_string()))?;
    Ok((phantom, mesh))
}

fn csv_bytes(d: &Dataset) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_csv(d, &mut buf)?;
    Ok(buf)
}

fn temps(v: &[f64]) -> String {
    v.iter().map(|t| format!("{t:.3}")).collect::<Vec<_>>().join(" ")
}

pub fn simulate(mut cfg: RunConfig, a: &SimulateArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let tumor = &mut cfg.phantom.tumor;
    if a.healthy {
        tumor.present = false;
    }
    if let Some(p) = a.tumor_point {
        tumor.present = true;
        tumor.point = p;
    }
    if let Some(r) = a.tumor_radius {
        tumor.present = true;
        tumor.radius_m = r;
    }
    if let Some(d) = a.tumor_depth {
        tumor.depth_m = d;
    }
    if let Some(b) = a.backend {
        cfg.radiometry.backend = b;
    }
    if let Some(e) = a.mesh_edge {
        cfg.mesh.target_edge_m = e;
    }
    cfg.validate()?;

    let spec = cfg.phantom_spec();
    let (phantom, mesh) = build_mesh(&cfg)?;
    let props = sample_patient_properties(&spec, cfg.radiometry.frequency_hz);
    let m = measure_phantom(&phantom, &props, &mesh, &cfg.solver, &cfg.radiometry)
        .map_err(|e| CliError::Simulation(e.to_string()))?;
    let record = ThermoRecord {
        id: "S0001".into(),
        label: if spec.tumor.present { Label::Cancer } else { Label::Healthy },
        provenance: Provenance::Model,
        t_mw: m.t_mw,
        t_ir: m.t_ir,
    };
    record.validate().map_err(|e| CliError::Simulation(e.to_string()))?;
    let dataset = Dataset::new(vec![record])?;

    let names: Vec<String> = (0..MEASUREMENT_POINTS).map(|i| format!("p_d_{i}")).collect();
    let mut fields: Vec<(&str, &[f64])> = vec![("temperature", &m.temperature.values)];
    fields.extend(names.iter().zip(&m.power).map(|(n, p)| (n.as_str(), p.values.as_slice())));
    let mut vtk = Vec::new();
    write_vtk(&mut vtk, &mesh, &fields).map_err(|e| CliError::Io(e.to_string()))?;
    let mut temperature = Vec::new();
    write_temperature_csv(&mut temperature, &mesh, &m.temperature)?;

    let dir = &cfg.output_dir;
    let mut files = OutputSet::default();
    files.add(dir.join(FIELDS_VTK), vtk);
    files.add(dir.join(TEMPERATURE_CSV), temperature);
    files.add(dir.join(MEASUREMENTS_CSV), csv_bytes(&dataset)?);
    let written = finish("simulate", &cfg, BTreeMap::new(), files)?;

    let hottest = m.temperature.argmax();
    let at = mesh.nodes[hottest];
    writeln!(out, "nodes {}  elements {}", mesh.node_count(), mesh.element_count())?;
    writeln!(
        out,
        "max temperature {:.3} °C at ({:.4}, {:.4}, {:.4}) m{}",
        m.temperature.values[hottest],
        at.x,
        at.y,
        at.z,
        if phantom.tissue_at(at) == Some(TissueType::Tumor) { " (tumor)" } else { "" }
    )?;
    writeln!(out, "t_mw  {}", temps(&m.t_mw))?;
    writeln!(out, "t_ir  {}", temps(&m.t_ir))?;
    for p in written {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}

pub fn generate(mut cfg: RunConfig, a: &GenerateArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    if let Some(n) = a.n_healthy {
        cfg.cohort.n_healthy = n;
    }
    if let Some(n) = a.n_cancer {
        cfg.cohort.n_cancer = n;
    }
    if let Some(n) = a.n_original_healthy {
        cfg.surrogate.n_healthy = n;
    }
    if let Some(n) = a.n_original_cancer {
        cfg.surrogate.n_cancer = n;
    }
    if let Some(g) = a.generator {
        cfg.generator.kind = g;
    }
    if let Some(e) = a.mesh_edge {
        cfg.mesh.target_edge_m = e;
    }
    cfg.validate()?;

    let original_seed = cfg.seed.wrapping_add(1);
    let (model, original) = match cfg.generator.kind {
        GeneratorKind::Simulation => {
            let setup = cfg.setup();
            let model = generate_cohort(&cfg.cohort, &setup, cfg.seed)?;
            let original = generate_original_surrogate(&cfg.surrogate, &cfg.cohort, &setup, original_seed)?;
            (model, original)
        }
        GeneratorKind::Gaussian => {
            let sep = cfg.generator.separation;
            let model = gaussian_cohort(
                cfg.cohort.n_healthy,
                cfg.cohort.n_cancer,
                sep,
                cfg.seed,
                Provenance::Model,
                &cfg.cohort.id_prefix,
            );
            let original = gaussian_cohort(
                cfg.surrogate.n_healthy,
                cfg.surrogate.n_cancer,
                sep,
                original_seed,
                Provenance::OriginalSurrogate,
                "O",
            );
            (model, original)
        }
    };

    let mut files = OutputSet::default();
    files.add(cfg.output_dir.join(MODEL_CSV), csv_bytes(&model)?);
    files.add(cfg.output_dir.join(ORIGINAL_CSV), csv_bytes(&original)?);
    let written = finish("generate", &cfg, BTreeMap::new(), files)?;
    for (name, d) in [("model", &model), ("original", &original)] {
        writeln!(
            out,
            "{name}: {} records ({} healthy, {} cancer)",
            d.len(),
            d.count(Label::Healthy),
            d.count(Label::Cancer)
        )?;
    }
    for p in written {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}

fn load_input(path: &PathBuf, inputs: &mut BTreeMap<String, String>) -> Result<Dataset, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_at(path, e))?;
    inputs.insert(file_name(path), sha256_hex(&bytes));
    read_csv(bytes.as_slice()).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn evaluate(mut cfg: RunConfig, a: &EvaluateArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    if let Some(r) = a.repeats {
        cfg.evaluation.repeats = r;
    }
    if let Some(c) = &a.classifiers {
        cfg.evaluation.classifiers = c.clone();
    }
    if let Some(g) = &a.groups {
        cfg.evaluation.groups = g.clone();
    }
    cfg.validate()?;
    if cfg.evaluation.classifiers.is_empty() || cfg.evaluation.groups.is_empty() {
        return Err(CliError::Config("at least one classifier and one group are required".into()));
    }

    let model_path = a.model.clone().unwrap_or_else(|| cfg.output_dir.join(MODEL_CSV));
    let original_path = a.original.clone().unwrap_or_else(|| cfg.output_dir.join(ORIGINAL_CSV));
    let mut inputs = BTreeMap::new();
    let model = load_input(&model_path, &mut inputs)?;
    let original = load_input(&original_path, &mut inputs)?;

    let protocol = Protocol::new(cfg.evaluation.repeats, cfg.seed);
    let cells = evaluate_all(
        &cfg.learners,
        &cfg.evaluation.classifiers,
        &cfg.evaluation.groups,
        &original,
        &model,
        &protocol,
    );
    let report = render_table(&cells);
    let mut files = OutputSet::default();
    files.add(cfg.output_dir.join(REPORT_TXT), report.clone().into_bytes());
    files.add(cfg.output_dir.join(RESULTS_CSV), results_csv(&cells).into_bytes());
    finish("evaluate", &cfg, inputs, files)?;

    write!(out, "{report}")?;
    let failed: Vec<_> = cells.iter().filter_map(|c| c.outcome.as_ref().err().map(|e| (c, e))).collect();
    for (c, e) in &failed {
        writeln!(out, "cell {} / {} failed: {e}", c.classifier, c.group)?;
    }
    if failed.len() == cells.len() {
        return Err(CliError::Evaluation("every cell failed".into()));
    }
    Ok(())
}

pub fn mesh_info(mut cfg: RunConfig, a: &MeshInfoArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    if let Some(e) = a.mesh_edge {
        cfg.mesh.target_edge_m = e;
    }
    cfg.validate()?;
    let (_, mesh) = build_mesh(&cfg)?;
    let q = mesh.quality();
    writeln!(out, "target edge      {} m", cfg.mesh.target_edge_m)?;
    writeln!(out, "nodes            {}", mesh.node_count())?;
    writeln!(out, "elements         {}", mesh.element_count())?;
    for (name, kind) in [("robin", BoundaryKind::Robin), ("dirichlet", BoundaryKind::Dirichlet)] {
        writeln!(out, "{name:<16} {} faces", mesh.faces_of(kind).count())?;
    }
    writeln!(out, "vessel nodes     {}", mesh.vessel_nodes.len())?;
    writeln!(out, "volume           {:.3} mL", q.total_volume * 1e6)?;
    writeln!(out, "min tet volume   {:.3e} m³", q.min_volume)?;
    writeln!(out, "dihedral range   {:.2}° .. {:.2}°", q.min_dihedral_deg, q.max_dihedral_deg)?;
    let mut by_tissue = BTreeMap::new();
    for (e, t) in mesh.tissue.iter().enumerate() {
        *by_tissue.entry(*t).or_insert(0.0) += mesh.volume(e);
    }
    for (t, v) in by_tissue {
        writeln!(out, "  {:<18} {:>10.3} mL", t.name(), v * 1e6)?;
    }
    if let Some(path) = &a.vtk {
        let mut vtk = Vec::new();
        write_vtk(&mut vtk, &mesh, &[]).map_err(|e| CliError::Io(e.to_string()))?;
        let mut files = OutputSet::default();
        files.add(path.clone(), vtk);
        files.commit()?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}
