//! Tetrahedral meshes.
//!
//! Meshes are built from a structured reference lattice: every lattice cube is
//! split into six Kuhn tetrahedra sharing the cube diagonal, which makes the
//! decomposition conforming without any cross-cell bookkeeping. For the breast
//! phantom the lattice is mapped onto the hemisphere-plus-slab domain with an
//! inner-cube / outer-shell blending map, so surface nodes land exactly on the
//! dome and the element count scales by 8 per halving of the edge length.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{tet_signed_volume, triangle_area, Vec3};
use crate::phantom::BreastPhantom;
use crate::tissue::TissueType;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh generation failed: {0}")]
    MeshFailure(String),
    #[error("invalid mesh parameters: {0}")]
    InvalidParameters(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryKind {
    /// Convective exchange with the surrounding air.
    Robin,
    /// Imposed temperature (body core).
    Dirichlet,
    /// Zero flux; only used by benchmark geometries.
    Adiabatic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub nodes: [u32; 3],
    pub kind: BoundaryKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Vec3>,
    pub tets: Vec<[u32; 4]>,
    pub tissue: Vec<TissueType>,
    pub boundary: Vec<BoundaryFace>,
    /// Nodes held at arterial temperature.
    pub vessel_nodes: Vec<u32>,
}

/// Summary statistics of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    pub min_volume: f64,
    pub total_volume: f64,
    pub min_dihedral_deg: f64,
    pub max_dihedral_deg: f64,
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_points(&self, e: usize) -> [Vec3; 4] {
        self.tets[e].map(|i| self.nodes[i as usize])
    }

    pub fn volume(&self, e: usize) -> f64 {
        let [a, b, c, d] = self.tet_points(e);
        tet_signed_volume(a, b, c, d)
    }

    pub fn centroid(&self, e: usize) -> Vec3 {
        let [a, b, c, d] = self.tet_points(e);
        (a + b + c + d) * 0.25
    }

    pub fn face_area(&self, f: &BoundaryFace) -> f64 {
        let [a, b, c] = f.nodes.map(|i| self.nodes[i as usize]);
        triangle_area(a, b, c)
    }

    pub fn face_centroid(&self, f: &BoundaryFace) -> Vec3 {
        let [a, b, c] = f.nodes.map(|i| self.nodes[i as usize]);
        (a + b + c) / 3.0
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.tets.len()).map(|e| self.volume(e)).sum()
    }

    pub fn faces_of(&self, kind: BoundaryKind) -> impl Iterator<Item = &BoundaryFace> {
        self.boundary.iter().filter(move |f| f.kind == kind)
    }

    pub fn quality(&self) -> MeshQuality {
        let mut q = MeshQuality {
            min_volume: f64::INFINITY,
            total_volume: 0.0,
            min_dihedral_deg: 180.0,
            max_dihedral_deg: 0.0,
        };
        for e in 0..self.tets.len() {
            let v = self.volume(e);
            q.min_volume = q.min_volume.min(v);
            q.total_volume += v;
            for a in dihedral_angles(self.tet_points(e)) {
                q.min_dihedral_deg = q.min_dihedral_deg.min(a);
                q.max_dihedral_deg = q.max_dihedral_deg.max(a);
            }
        }
        q
    }

    /// Checks positive volumes and face conformity: every face is shared by
    /// one (boundary) or two (interior) elements, and the recorded boundary
    /// list is exactly the set of single-use faces.
    pub fn validate(&self) -> Result<(), MeshError> {
        for (e, t) in self.tets.iter().enumerate() {
            if t.iter().any(|&i| i as usize >= self.nodes.len()) {
                return Err(MeshError::MeshFailure(format!("element {e} references a missing node")));
            }
            let v = self.volume(e);
            if !(v > 0.0) {
                return Err(MeshError::MeshFailure(format!("element {e} has non-positive volume {v:e}")));
            }
        }
        if self.tissue.len() != self.tets.len() {
            return Err(MeshError::MeshFailure("tissue tag count differs from element count".into()));
        }
        let counts = face_counts(&self.tets);
        if let Some((k, n)) = counts.iter().find(|(_, &n)| n > 2) {
            return Err(MeshError::MeshFailure(format!("face {k:?} shared by {n} elements")));
        }
        let mut exterior: Vec<[u32; 3]> = counts.iter().filter(|(_, &n)| n == 1).map(|(k, _)| *k).collect();
        let mut listed: Vec<[u32; 3]> = self.boundary.iter().map(|f| sorted3(f.nodes)).collect();
        exterior.sort_unstable();
        listed.sort_unstable();
        if exterior != listed {
            return Err(MeshError::MeshFailure(format!(
                "boundary list ({}) does not match exterior faces ({})",
                listed.len(),
                exterior.len()
            )));
        }
        Ok(())
    }

    /// Axis-aligned box `[0, extent]` split into `cells` lattice cubes; every
    /// face gets the kind returned by `kind(axis, is_max)`.
    pub fn box_grid(
        extent: [f64; 3],
        cells: [usize; 3],
        tissue: TissueType,
        kind: impl Fn(usize, bool) -> BoundaryKind,
    ) -> Result<Mesh, MeshError> {
        if cells.iter().any(|&c| c == 0) || extent.iter().any(|&e| !(e > 0.0)) {
            return Err(MeshError::InvalidParameters("box needs positive extent and cell counts".into()));
        }
        let lattice = Lattice::new(cells);
        let mut mesh = lattice.build(|i, j, k| {
            Vec3::new(
                extent[0] * i as f64 / cells[0] as f64,
                extent[1] * j as f64 / cells[1] as f64,
                extent[2] * k as f64 / cells[2] as f64,
            )
        })?;
        mesh.tissue = vec![tissue; mesh.tets.len()];
        let tol = 1e-9 * extent.iter().cloned().fold(0.0, f64::max);
        for f in &mut mesh.boundary {
            let c = {
                let [a, b, d] = f.nodes.map(|i| mesh.nodes[i as usize]);
                (a + b + d) / 3.0
            };
            let mut assigned = None;
            for axis in 0..3 {
                if c[axis].abs() < tol {
                    assigned = Some(kind(axis, false));
                } else if (c[axis] - extent[axis]).abs() < tol {
                    assigned = Some(kind(axis, true));
                }
            }
            f.kind = assigned.ok_or_else(|| MeshError::MeshFailure("boundary face off the box surface".into()))?;
        }
        mesh.validate()?;
        Ok(mesh)
    }
}

/// The six dihedral angles of a tetrahedron, in degrees.
pub fn dihedral_angles(p: [Vec3; 4]) -> [f64; 6] {
    // Outward-agnostic face normals; face k is opposite vertex k.
    let normal = |k: usize| {
        let idx: Vec<usize> = (0..4).filter(|&i| i != k).collect();
        let n = (p[idx[1]] - p[idx[0]]).cross(p[idx[2]] - p[idx[0]]).normalized();
        // Orient away from the opposite vertex.
        if n.dot(p[k] - p[idx[0]]) > 0.0 {
            -n
        } else {
            n
        }
    };
    let n: [Vec3; 4] = [normal(0), normal(1), normal(2), normal(3)];
    let mut out = [0.0; 6];
    let mut m = 0;
    for a in 0..4 {
        for b in (a + 1)..4 {
            out[m] = (-n[a].dot(n[b])).clamp(-1.0, 1.0).acos().to_degrees();
            m += 1;
        }
    }
    out
}

fn sorted3(mut f: [u32; 3]) -> [u32; 3] {
    f.sort_unstable();
    f
}

const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

fn face_counts(tets: &[[u32; 4]]) -> HashMap<[u32; 3], u32> {
    let mut counts = HashMap::with_capacity(tets.len() * 2);
    for t in tets {
        for f in TET_FACES {
            *counts.entry(sorted3(f.map(|i| t[i]))).or_insert(0) += 1;
        }
    }
    counts
}

/// Structured lattice of `cells[0] x cells[1] x cells[2]` cubes.
struct Lattice {
    cells: [usize; 3],
    // Cells with index below `mirror[a]` along axis `a` use the reflected
    // Kuhn split. Reflection per axis keeps the triangulation conforming.
    mirror: [usize; 3],
}

impl Lattice {
    fn new(cells: [usize; 3]) -> Self {
        Self { cells, mirror: [0; 3] }
    }

    fn mirrored(cells: [usize; 3], mirror: [usize; 3]) -> Self {
        Self { cells, mirror }
    }

    fn node_index(&self, i: usize, j: usize, k: usize) -> u32 {
        let nx = self.cells[0] + 1;
        let ny = self.cells[1] + 1;
        (i + nx * (j + ny * k)) as u32
    }

    /// Nodes from `map(i, j, k)`, six Kuhn tetrahedra per cube, and the
    /// exterior faces (kind provisionally Robin, oriented outward).
    fn build(&self, map: impl Fn(usize, usize, usize) -> Vec3) -> Result<Mesh, MeshError> {
        let [cx, cy, cz] = self.cells;
        let mut nodes = Vec::with_capacity((cx + 1) * (cy + 1) * (cz + 1));
        for k in 0..=cz {
            for j in 0..=cy {
                for i in 0..=cx {
                    nodes.push(map(i, j, k));
                }
            }
        }
        // Kuhn paths 0 -> e_a -> e_a + e_b -> (1,1,1) for each axis permutation.
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut tets = Vec::with_capacity(6 * cx * cy * cz);
        for k in 0..cz {
            for j in 0..cy {
                for i in 0..cx {
                    let mask = (i < self.mirror[0]) as usize
                        | ((j < self.mirror[1]) as usize) << 1
                        | ((k < self.mirror[2]) as usize) << 2;
                    let corner = |bits: usize| {
                        let bits = bits ^ mask;
                        self.node_index(i + (bits & 1), j + ((bits >> 1) & 1), k + ((bits >> 2) & 1))
                    };
                    for perm in PERMS {
                        let b1 = 1 << perm[0];
                        let b2 = b1 | (1 << perm[1]);
                        let mut t = [corner(0), corner(b1), corner(b2), corner(7)];
                        // Odd permutations give left-handed tets in lattice space.
                        let odd = matches!(perm, [0, 2, 1] | [1, 0, 2] | [2, 1, 0]);
                        if odd != (mask.count_ones() % 2 == 1) {
                            t.swap(2, 3);
                        }
                        tets.push(t);
                    }
                }
            }
        }
        for (e, t) in tets.iter().enumerate() {
            let [a, b, c, d] = t.map(|i| nodes[i as usize]);
            let v = tet_signed_volume(a, b, c, d);
            if !(v > 0.0) {
                return Err(MeshError::MeshFailure(format!("element {e} has non-positive volume {v:e}")));
            }
        }
        let boundary = exterior_faces(&tets);
        Ok(Mesh {
            nodes,
            tissue: Vec::new(),
            tets,
            boundary,
            vessel_nodes: Vec::new(),
        })
    }
}

/// Faces used by exactly one element, wound so their normal points outward.
fn exterior_faces(tets: &[[u32; 4]]) -> Vec<BoundaryFace> {
    let counts = face_counts(tets);
    let mut out = Vec::new();
    for t in tets {
        for f in TET_FACES {
            let nodes = f.map(|i| t[i]);
            if counts[&sorted3(nodes)] == 1 {
                out.push(BoundaryFace {
                    nodes,
                    kind: BoundaryKind::Robin,
                });
            }
        }
    }
    out
}

/// Core half-size of the blending map, as a fraction of R.
const CORE_FRACTION: f64 = 0.4;

/// Maps the reference point `q` (|q|_inf <= 1) into the ball of radius `r`:
/// identity scaling inside the core cube, linear blend from the core cube
/// surface to the sphere in the shell. Works in 2-D by passing z = 0.
fn blend_to_ball(q: Vec3, r: f64) -> Vec3 {
    let s = q.x.abs().max(q.y.abs()).max(q.z.abs());
    if s <= CORE_FRACTION {
        return q * r;
    }
    let inner = q * (r * CORE_FRACTION / s);
    let outer = q * (r / q.norm());
    let t = (s - CORE_FRACTION) / (1.0 - CORE_FRACTION);
    inner.lerp(outer, t)
}

/// Lattice resolution used for a phantom of radius `r` at `target_edge`.
pub fn phantom_lattice(r: f64, slab: f64, target_edge: f64) -> [usize; 3] {
    let mut n = (2.0 * r / target_edge).ceil() as usize;
    if n % 2 == 1 {
        n += 1;
    }
    let ks = ((slab / target_edge).ceil() as usize).max(1);
    [n, n, ks + n / 2]
}

/// Conforming tetrahedral mesh of the phantom domain.
///
/// Element tissue comes from the phantom's region resolution at the element
/// centroid. Dome faces are Robin; slab bottom and side faces are Dirichlet
/// (body core). Nodes inside vessels, plus the node nearest to every
/// centerline sample, are recorded as vessel nodes.
pub fn tetrahedralize(phantom: &BreastPhantom, target_edge: f64) -> Result<Mesh, MeshError> {
    let r = phantom.radius();
    let slab = phantom.slab_thickness();
    if !(target_edge > 0.0 && target_edge < r / 4.0) {
        return Err(MeshError::InvalidParameters(format!(
            "target edge {target_edge} must lie in (0, R/4 = {})",
            r / 4.0
        )));
    }
    let cells = phantom_lattice(r, slab, target_edge);
    let [n, _, nz] = cells;
    let ks = nz - n / 2;
    // Main diagonals point away from the axis so no element has all four
    // vertices on the dome.
    let lattice = Lattice::mirrored(cells, [n / 2, n / 2, 0]);
    let mut mesh = lattice.build(|i, j, k| {
        let u = -1.0 + 2.0 * i as f64 / n as f64;
        let v = -1.0 + 2.0 * j as f64 / n as f64;
        if k >= ks {
            let w = (k - ks) as f64 / (n / 2) as f64;
            let mut p = blend_to_ball(Vec3::new(u, v, w), r);
            if k == ks {
                p.z = 0.0;
            }
            p
        } else {
            let mut p = blend_to_ball(Vec3::new(u, v, 0.0), r);
            p.z = -slab * (ks - k) as f64 / ks as f64;
            p
        }
    })?;

    mesh.tissue = (0..mesh.tets.len())
        .map(|e| {
            let c = mesh.centroid(e);
            phantom
                .tissue_at(c)
                .unwrap_or(if c.z >= 0.0 { TissueType::Skin } else { TissueType::Muscle })
        })
        .collect();

    let base_tol = 1e-9 * r;
    let nodes = &mesh.nodes;
    for f in &mut mesh.boundary {
        let [a, b, c] = f.nodes.map(|i| nodes[i as usize]);
        let on_dome = [a, b, c].iter().all(|p| p.z >= -base_tol) && (a.z + b.z + c.z) > base_tol;
        f.kind = if on_dome { BoundaryKind::Robin } else { BoundaryKind::Dirichlet };
    }

    mesh.vessel_nodes = vessel_nodes(phantom, &mesh.nodes, target_edge);

    let q = mesh.quality();
    if !(q.min_volume > 0.0) {
        return Err(MeshError::MeshFailure(format!("non-positive element volume {:e}", q.min_volume)));
    }
    Ok(mesh)
}

fn vessel_nodes(phantom: &BreastPhantom, nodes: &[Vec3], edge: f64) -> Vec<u32> {
    let mut flagged = vec![false; nodes.len()];
    if phantom.vessels().is_empty() {
        return Vec::new();
    }
    let blocked = |t: Option<TissueType>| matches!(t, Some(TissueType::Tumor | TissueType::Skin | TissueType::Nipple));
    for (i, p) in nodes.iter().enumerate() {
        if phantom.in_vessel(*p) {
            flagged[i] = true;
        }
    }
    // Keep thin vessels connected on coarse meshes.
    for seg in phantom.vessels() {
        let len = seg.a.distance(seg.b);
        let steps = ((len / (0.5 * edge)).ceil() as usize).max(1);
        for s in 0..=steps {
            let p = seg.a.lerp(seg.b, s as f64 / steps as f64);
            if !phantom.in_vessel(p) {
                continue;
            }
            let (best, _) = nodes
                .iter()
                .enumerate()
                .map(|(i, q)| (i, q.distance(p)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            if !blocked(phantom.tissue_at(nodes[best])) {
                flagged[best] = true;
            }
        }
    }
    flagged
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(i, _)| i as u32)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{build_phantom, AnatomySpec, PhantomSpec};
    use std::f64::consts::PI;

    fn minimal_phantom() -> BreastPhantom {
        build_phantom(&PhantomSpec {
            anatomy: AnatomySpec::minimal(),
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn unit_box_is_valid() {
        let m = Mesh::box_grid([1.0, 1.0, 1.0], [2, 3, 4], TissueType::Muscle, |_, _| BoundaryKind::Robin).unwrap();
        assert_eq!(m.element_count(), 6 * 24);
        assert!((m.total_volume() - 1.0).abs() < 1e-12);
        // 2 * (2*3 + 3*4 + 2*4) squares, two triangles each
        assert_eq!(m.boundary.len(), 2 * 2 * (6 + 12 + 8));
    }

    #[test]
    fn box_faces_take_requested_kinds() {
        let m = Mesh::box_grid([1.0, 1.0, 2.0], [1, 1, 4], TissueType::Muscle, |axis, hi| match (axis, hi) {
            (2, false) => BoundaryKind::Dirichlet,
            (2, true) => BoundaryKind::Robin,
            _ => BoundaryKind::Adiabatic,
        })
        .unwrap();
        let area = |k| m.faces_of(k).map(|f| m.face_area(f)).sum::<f64>();
        assert!((area(BoundaryKind::Robin) - 1.0).abs() < 1e-12);
        assert!((area(BoundaryKind::Dirichlet) - 1.0).abs() < 1e-12);
        assert!((area(BoundaryKind::Adiabatic) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_faces_point_outward() {
        let m = Mesh::box_grid([1.0, 2.0, 1.5], [3, 2, 2], TissueType::Muscle, |_, _| BoundaryKind::Robin).unwrap();
        let center = Vec3::new(0.5, 1.0, 0.75);
        for f in &m.boundary {
            let [a, b, c] = f.nodes.map(|i| m.nodes[i as usize]);
            let n = (b - a).cross(c - a);
            assert!(n.dot(m.face_centroid(f) - center) > 0.0);
        }
    }

    #[test]
    fn regular_tet_dihedrals() {
        let p = [
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.0, -1.0, -1.0),
            Vec3::new(-1.0, 1.0, -1.0),
            Vec3::new(-1.0, -1.0, 1.0),
        ];
        for a in dihedral_angles(p) {
            assert!((a - (1.0f64 / 3.0).acos().to_degrees()).abs() < 1e-9);
        }
    }

    #[test]
    fn phantom_mesh_is_valid_and_well_shaped() {
        let ph = minimal_phantom();
        let m = tetrahedralize(&ph, 0.012).unwrap();
        m.validate().unwrap();
        let q = m.quality();
        assert!(q.min_volume > 0.0);
        assert!(q.min_dihedral_deg > 10.0, "min dihedral {}", q.min_dihedral_deg);
    }

    #[test]
    fn phantom_volume_matches_geometry() {
        let ph = minimal_phantom();
        let r = ph.radius();
        let exact = 2.0 / 3.0 * PI * r.powi(3) + PI * r * r * ph.slab_thickness();
        let m = tetrahedralize(&ph, 0.01).unwrap();
        let rel = (m.total_volume() - exact).abs() / exact;
        assert!(rel < 0.02, "volume error {rel}");
    }

    #[test]
    fn halving_edge_scales_element_count() {
        let ph = minimal_phantom();
        let coarse = tetrahedralize(&ph, 0.015).unwrap().element_count() as f64;
        let fine = tetrahedralize(&ph, 0.0075).unwrap().element_count() as f64;
        let ratio = fine / coarse;
        assert!((6.0..=10.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn dome_nodes_lie_on_the_sphere() {
        let ph = minimal_phantom();
        let m = tetrahedralize(&ph, 0.015).unwrap();
        let r = ph.radius();
        for f in m.faces_of(BoundaryKind::Robin) {
            for i in f.nodes {
                let p = m.nodes[i as usize];
                assert!((p.norm() - r).abs() < 1e-12 * r);
            }
        }
        // Dirichlet faces are exactly the slab side and bottom.
        for f in m.faces_of(BoundaryKind::Dirichlet) {
            let c = m.face_centroid(f);
            assert!(c.z < 0.0);
        }
    }

    #[test]
    fn surface_elements_are_skin() {
        let ph = minimal_phantom();
        let m = tetrahedralize(&ph, 0.0045).unwrap();
        let skin = m.tissue.iter().filter(|&&t| t == TissueType::Skin).count();
        assert!(skin > 0);
    }

    #[test]
    fn rejects_oversized_edges() {
        let ph = minimal_phantom();
        assert!(matches!(tetrahedralize(&ph, 0.03), Err(MeshError::InvalidParameters(_))));
        assert!(tetrahedralize(&ph, 0.0).is_err());
    }

    #[test]
    fn vessel_nodes_present_on_coarse_mesh() {
        let ph = build_phantom(&PhantomSpec::default()).unwrap();
        let m = tetrahedralize(&ph, 0.015).unwrap();
        assert!(m.vessel_nodes.len() >= 10);
        for &i in &m.vessel_nodes {
            let t = ph.tissue_at(m.nodes[i as usize]);
            assert!(!matches!(t, Some(TissueType::Tumor | TissueType::Skin)));
        }
    }

    #[test]
    fn meshing_is_deterministic() {
        let ph = build_phantom(&PhantomSpec::default().with_tumor(3, 0.01)).unwrap();
        assert_eq!(tetrahedralize(&ph, 0.015).unwrap(), tetrahedralize(&ph, 0.015).unwrap());
    }
}
