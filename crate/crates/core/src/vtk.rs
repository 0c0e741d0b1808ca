//! Legacy ASCII VTK export of tetrahedral meshes with nodal fields.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::mesh::Mesh;

#[derive(Debug, Error)]
pub enum VtkError {
    #[error("field `{name}` has {len} values, mesh has {nodes} nodes")]
    FieldLength { name: String, len: usize, nodes: usize },
    #[error("field name `{0}` must be non-empty without whitespace")]
    FieldName(String),
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
}

const VTK_TETRA: u8 = 10;

/// Writes an unstructured grid with the integer cell array `tissue` and one
/// scalar point array per entry of `fields`.
pub fn write_vtk<W: Write>(mut w: W, mesh: &Mesh, fields: &[(&str, &[f64])]) -> Result<(), VtkError> {
    for (name, values) in fields {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(VtkError::FieldName(name.to_string()));
        }
        if values.len() != mesh.node_count() {
            return Err(VtkError::FieldLength {
                name: name.to_string(),
                len: values.len(),
                nodes: mesh.node_count(),
            });
        }
    }
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "rtmsim mesh")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.node_count())?;
    for p in &mesh.nodes {
        writeln!(w, "{:e} {:e} {:e}", p.x, p.y, p.z)?;
    }
    let ne = mesh.element_count();
    writeln!(w, "CELLS {} {}", ne, 5 * ne)?;
    for t in &mesh.tets {
        writeln!(w, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(w, "{VTK_TETRA}")?;
    }
    writeln!(w, "CELL_DATA {ne}")?;
    writeln!(w, "SCALARS tissue int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for t in &mesh.tissue {
        writeln!(w, "{}", t.code())?;
    }
    if !fields.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.node_count())?;
        for (name, values) in fields {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values.iter() {
                writeln!(w, "{v:e}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn export_vtk(path: &Path, mesh: &Mesh, fields: &[(&str, &[f64])]) -> Result<(), VtkError> {
    let file = File::create(path)?;
    write_vtk(BufWriter::new(file), mesh, fields)
}
