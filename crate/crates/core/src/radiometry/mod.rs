//! Power density around each antenna position, brightness temperature and
//! the infrared surface channel.

pub mod analytic;
pub mod fdtd;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bioheat::{solve_steady, BioheatError, SolverConfig, TemperatureField};
use crate::geometry::Vec3;
use crate::mesh::{BoundaryKind, Mesh};
use crate::phantom::{BreastPhantom, MEASUREMENT_POINTS};
use crate::tissue::PropertyTable;

pub use analytic::power_density_analytic_nodes;
pub use fdtd::{attenuation_constant, fdtd_solve, AxisBoundary, EmGrid, FieldAmplitude, PointSource};

#[derive(Debug, Error)]
pub enum RadiometryError {
    #[error("power density integrates to zero")]
    ZeroWeight,
    #[error("grid spacing {spacing} m exceeds a tenth of the shortest wavelength ({limit} m)")]
    ResolutionGateFailed { spacing: f64, limit: f64 },
    #[error("field not stationary after {cycles} cycles (relative change {change:e})")]
    NotStationary { change: f64, cycles: usize },
    #[error("measurement point {0} out of range 0..9")]
    InvalidPoint(usize),
    #[error("invalid radiometry configuration: {0}")]
    InvalidConfig(String),
    #[error("field has {len} values, mesh has {nodes} nodes")]
    FieldLength { len: usize, nodes: usize },
    #[error("record value {value} outside the 20..45 °C sanity band")]
    OutOfBand { value: f64 },
    #[error(transparent)]
    Bioheat(#[from] BioheatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Analytic,
    Maxwell,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Analytic => "analytic",
            Backend::Maxwell => "maxwell",
        })
    }
}

impl FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "analytic" => Ok(Backend::Analytic),
            "maxwell" => Ok(Backend::Maxwell),
            _ => Err(format!("unknown backend `{s}` (expected analytic or maxwell)")),
        }
    }
}

/// FDTD antenna model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Antenna {
    /// Single current element along the surface normal.
    #[default]
    Dipole,
    /// In-phase tangential current sheet over a surface disc.
    Aperture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiometryConfig {
    pub frequency_hz: f64,
    pub backend: Backend,
    pub grid_spacing_m: f64,
    pub cycles: usize,
    pub ir_spot_radius_m: f64,
    /// Midpoint samples used to average the medium along each antenna path.
    pub path_samples: usize,
    /// Air cells kept around the phantom on the FDTD grid.
    pub grid_padding_cells: usize,
    pub antenna: Antenna,
    pub aperture_radius_m: f64,
}

impl Default for RadiometryConfig {
    fn default() -> Self {
        Self {
            frequency_hz: 1.5e9,
            backend: Backend::Analytic,
            grid_spacing_m: 0.0025,
            cycles: 20,
            ir_spot_radius_m: 0.005,
            path_samples: 16,
            grid_padding_cells: 3,
            antenna: Antenna::Dipole,
            aperture_radius_m: 0.015,
        }
    }
}

impl RadiometryConfig {
    pub fn validate(&self) -> Result<(), RadiometryError> {
        let bad = |m: &str| Err(RadiometryError::InvalidConfig(m.to_string()));
        if !(self.frequency_hz > 0.0) {
            return bad("frequency_hz must be positive");
        }
        if !(self.grid_spacing_m > 0.0) {
            return bad("grid_spacing_m must be positive");
        }
        if !(self.ir_spot_radius_m >= 0.0) {
            return bad("ir_spot_radius_m must be nonnegative");
        }
        if self.path_samples == 0 {
            return bad("path_samples must be positive");
        }
        Ok(())
    }
}

/// Nodal electromagnetic power density (W/m³) for one antenna position.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDensityField {
    pub values: Vec<f64>,
    pub point: usize,
    pub frequency_hz: f64,
    pub backend: Backend,
}

/// P1 integrals `∫ P dV` and `∫ T P dV` on one element.
fn element_moments(vol: f64, t: [f64; 4], p: [f64; 4]) -> (f64, f64) {
    let sp: f64 = p.iter().sum();
    let st: f64 = t.iter().sum();
    let tp: f64 = t.iter().zip(&p).map(|(a, b)| a * b).sum();
    (vol / 4.0 * sp, vol / 20.0 * (tp + st * sp))
}

/// Power-density-weighted volume average of `t`, with both fields linear on
/// each element and integrated exactly.
pub fn brightness_temperature(mesh: &Mesh, t: &[f64], p: &[f64]) -> Result<f64, RadiometryError> {
    let n = mesh.node_count();
    for len in [t.len(), p.len()] {
        if len != n {
            return Err(RadiometryError::FieldLength { len, nodes: n });
        }
    }
    let mut weight = 0.0;
    let mut acc = 0.0;
    for (e, tet) in mesh.tets.iter().enumerate() {
        let vol = mesh.volume(e);
        let (w, a) = element_moments(vol, tet.map(|i| t[i as usize]), tet.map(|i| p[i as usize]));
        weight += w;
        acc += a;
    }
    if !(weight > 0.0) {
        return Err(RadiometryError::ZeroWeight);
    }
    Ok(acc / weight)
}

/// Area-weighted mean surface temperature over Robin faces whose centroid
/// lies within `radius` of `point`; the nearest surface node if none do.
pub fn skin_temperature(mesh: &Mesh, t: &[f64], point: Vec3, radius: f64) -> f64 {
    let mut area = 0.0;
    let mut acc = 0.0;
    for f in mesh.faces_of(BoundaryKind::Robin) {
        if mesh.face_centroid(f).distance(point) <= radius {
            let a = mesh.face_area(f);
            area += a;
            acc += a * f.nodes.iter().map(|&i| t[i as usize]).sum::<f64>() / 3.0;
        }
    }
    if area > 0.0 {
        return acc / area;
    }
    let mut best = (f64::INFINITY, f64::NAN);
    for f in mesh.faces_of(BoundaryKind::Robin) {
        for &i in &f.nodes {
            let d = mesh.nodes[i as usize].distance(point);
            if d < best.0 {
                best = (d, t[i as usize]);
            }
        }
    }
    best.1
}

/// FDTD grid over the phantom's bounding box with a point dipole at
/// measurement point `point`, oriented along the surface normal.
pub fn em_grid_for_phantom(
    phantom: &BreastPhantom,
    props: &PropertyTable,
    point: usize,
    cfg: &RadiometryConfig,
) -> Result<EmGrid, RadiometryError> {
    if point >= MEASUREMENT_POINTS {
        return Err(RadiometryError::InvalidPoint(point));
    }
    let r = phantom.radius();
    let h = cfg.grid_spacing_m;
    let pad = cfg.grid_padding_cells as f64 * h;
    let lo = Vec3::new(-r - pad, -r - pad, -phantom.slab_thickness() - pad);
    let hi = Vec3::new(r + pad, r + pad, r + pad);
    let cells = [0, 1, 2].map(|a| ((hi[a] - lo[a]) / h).ceil() as usize);
    let mut grid = EmGrid::homogeneous(cells, h, 1.0, 1.0, 0.0);
    grid.origin = lo;
    for k in 0..cells[2] {
        for j in 0..cells[1] {
            for i in 0..cells[0] {
                let c = grid.cell_center(i, j, k);
                if let Some(t) = phantom.tissue_at(c) {
                    let idx = grid.cell_index(i, j, k);
                    grid.eps[idx] = props[t].eps;
                    grid.mu[idx] = props[t].mu;
                    grid.sigma[idx] = props[t].sigma;
                }
            }
        }
    }
    let p = phantom.measurement_points()[point];
    let n = phantom.measurement_normal(point);
    grid.sources = match cfg.antenna {
        Antenna::Dipole => vec![PointSource {
            node: grid.nearest_node(p),
            direction: n,
            frequency_hz: cfg.frequency_hz,
            amplitude: 1.0,
        }],
        Antenna::Aperture => {
            let reference = if n.z.abs() > 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 0.0, 1.0) };
            let tangent = (reference - n * reference.dot(n)).normalized();
            let mut nodes = Vec::new();
            for k in 0..=cells[2] {
                for j in 0..=cells[1] {
                    for i in 0..=cells[0] {
                        let q = grid.node_position([i, j, k]);
                        if q.z >= 0.0 && (q.norm() - r).abs() <= 0.5 * h && q.distance(p) <= cfg.aperture_radius_m {
                            nodes.push([i, j, k]);
                        }
                    }
                }
            }
            if nodes.is_empty() {
                nodes.push(grid.nearest_node(p));
            }
            nodes
                .into_iter()
                .map(|node| PointSource {
                    node,
                    direction: tangent,
                    frequency_hz: cfg.frequency_hz,
                    amplitude: 1.0,
                })
                .collect()
        }
    };
    Ok(grid)
}

/// `½ σ |E|²` per cell, trilinearly interpolated from cell centres to nodes.
pub fn power_density_from_field(amp: &FieldAmplitude, sigma: &[f64], nodes: &[Vec3]) -> Vec<f64> {
    let [cx, cy, cz] = amp.cells;
    let cell_p: Vec<f64> = amp.values.iter().zip(sigma).map(|(e, s)| 0.5 * s * e * e).collect();
    nodes
        .iter()
        .map(|&p| {
            let q = (p - amp.origin) / amp.spacing - Vec3::new(0.5, 0.5, 0.5);
            let split = |v: f64, n: usize| -> (usize, usize, f64) {
                if n == 1 {
                    return (0, 0, 0.0);
                }
                let v = v.clamp(0.0, (n - 1) as f64);
                let i0 = (v.floor() as usize).min(n - 2);
                (i0, i0 + 1, v - i0 as f64)
            };
            let (i0, i1, fx) = split(q.x, cx);
            let (j0, j1, fy) = split(q.y, cy);
            let (k0, k1, fz) = split(q.z, cz);
            let at = |i: usize, j: usize, k: usize| cell_p[i + cx * (j + cy * k)];
            let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
            let c00 = lerp(at(i0, j0, k0), at(i1, j0, k0), fx);
            let c10 = lerp(at(i0, j1, k0), at(i1, j1, k0), fx);
            let c01 = lerp(at(i0, j0, k1), at(i1, j0, k1), fx);
            let c11 = lerp(at(i0, j1, k1), at(i1, j1, k1), fx);
            lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz)
        })
        .collect()
}

/// Power density at the mesh nodes for antenna `point` with the configured
/// backend.
pub fn power_density(
    phantom: &BreastPhantom,
    props: &PropertyTable,
    mesh: &Mesh,
    point: usize,
    cfg: &RadiometryConfig,
) -> Result<PowerDensityField, RadiometryError> {
    if point >= MEASUREMENT_POINTS {
        return Err(RadiometryError::InvalidPoint(point));
    }
    let values = match cfg.backend {
        Backend::Analytic => power_density_analytic_nodes(
            phantom,
            props,
            &mesh.nodes,
            phantom.measurement_points()[point],
            cfg.frequency_hz,
            cfg.path_samples,
        ),
        Backend::Maxwell => {
            let grid = em_grid_for_phantom(phantom, props, point, cfg)?;
            let amp = fdtd_solve(&grid, cfg.cycles)?;
            power_density_from_field(&amp, &grid.sigma, &mesh.nodes)
        }
    };
    Ok(PowerDensityField {
        values,
        point,
        frequency_hz: cfg.frequency_hz,
        backend: cfg.backend,
    })
}

/// Result of simulating one phantom: fields plus the 18 features.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub temperature: TemperatureField,
    pub power: Vec<PowerDensityField>,
    pub t_mw: [f64; MEASUREMENT_POINTS],
    pub t_ir: [f64; MEASUREMENT_POINTS],
}

/// Steady temperature once, then power density, brightness temperature and
/// surface temperature at every measurement point.
pub fn measure_phantom(
    phantom: &BreastPhantom,
    props: &PropertyTable,
    mesh: &Mesh,
    solver: &SolverConfig,
    rad: &RadiometryConfig,
) -> Result<Measurement, RadiometryError> {
    rad.validate()?;
    let temperature = solve_steady(mesh, props, solver)?;
    let mut power = Vec::with_capacity(MEASUREMENT_POINTS);
    let mut t_mw = [0.0; MEASUREMENT_POINTS];
    let mut t_ir = [0.0; MEASUREMENT_POINTS];
    for i in 0..MEASUREMENT_POINTS {
        let pd = power_density(phantom, props, mesh, i, rad)?;
        t_mw[i] = brightness_temperature(mesh, &temperature.values, &pd.values)?;
        t_ir[i] = skin_temperature(mesh, &temperature.values, phantom.measurement_points()[i], rad.ir_spot_radius_m);
        power.push(pd);
    }
    Ok(Measurement { temperature, power, t_mw, t_ir })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Healthy,
    Cancer,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Healthy => "healthy",
            Label::Cancer => "cancer",
        }
    }

    /// 0 = healthy, 1 = cancer.
    pub fn class(self) -> u8 {
        self as u8
    }
}

impl FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "healthy" => Ok(Label::Healthy),
            "cancer" => Ok(Label::Cancer),
            _ => Err(format!("label `{s}` is not healthy or cancer")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "model")]
    Model,
    #[serde(rename = "original-surrogate")]
    OriginalSurrogate,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Model => "model",
            Provenance::OriginalSurrogate => "original-surrogate",
        }
    }
}

impl FromStr for Provenance {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model" => Ok(Provenance::Model),
            "original-surrogate" => Ok(Provenance::OriginalSurrogate),
            _ => Err(format!("provenance `{s}` is not model or original-surrogate")),
        }
    }
}

/// One patient's 9 microwave and 9 infrared temperatures (°C).
#[derive(Debug, Clone, PartialEq)]
pub struct ThermoRecord {
    pub id: String,
    pub label: Label,
    pub provenance: Provenance,
    pub t_mw: [f64; MEASUREMENT_POINTS],
    pub t_ir: [f64; MEASUREMENT_POINTS],
}

impl ThermoRecord {
    pub const BAND: (f64, f64) = (20.0, 45.0);

    /// Features in column order `t_mw_0..8, t_ir_0..8`.
    pub fn features(&self) -> [f64; 2 * MEASUREMENT_POINTS] {
        let mut f = [0.0; 2 * MEASUREMENT_POINTS];
        f[..MEASUREMENT_POINTS].copy_from_slice(&self.t_mw);
        f[MEASUREMENT_POINTS..].copy_from_slice(&self.t_ir);
        f
    }

    pub fn validate(&self) -> Result<(), RadiometryError> {
        for v in self.features() {
            if !(v.is_finite() && (Self::BAND.0..=Self::BAND.1).contains(&v)) {
                return Err(RadiometryError::OutOfBand { value: v });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use crate::phantom::{build_phantom, AnatomySpec, PhantomSpec};
    use crate::tissue::{TissueProperties, TissueType, VariabilitySpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Elements that share no nodes, so nodal fields can be element-constant.
    fn broken_mesh(count: usize) -> Mesh {
        let mut nodes = Vec::new();
        let mut tets = Vec::new();
        for e in 0..count {
            let o = Vec3::new(2.0 * e as f64, 0.0, 0.0);
            let base = nodes.len() as u32;
            nodes.extend([o, o + Vec3::new(1.0, 0.0, 0.0), o + Vec3::new(0.0, 1.0, 0.0), o + Vec3::new(0.0, 0.0, 1.0)]);
            tets.push([base, base + 1, base + 2, base + 3]);
        }
        Mesh {
            nodes,
            tets,
            tissue: vec![TissueType::Muscle; count],
            boundary: vec![],
            vessel_nodes: vec![],
        }
    }

    fn per_element(values: &[f64]) -> Vec<f64> {
        values.iter().flat_map(|&v| [v; 4]).collect()
    }

    #[test]
    fn uniform_field_is_returned_exactly() {
        let m = broken_mesh(3);
        let t = vec![37.0; 12];
        let p: Vec<f64> = (0..12).map(|i| 0.1 + i as f64).collect();
        assert_eq!(brightness_temperature(&m, &t, &p).unwrap(), 37.0);
    }

    #[test]
    fn two_element_hand_value() {
        let m = broken_mesh(2);
        let tb = brightness_temperature(&m, &per_element(&[30.0, 40.0]), &per_element(&[1.0, 3.0])).unwrap();
        assert_relative_eq!(tb, 37.5, epsilon = 1e-12);
    }

    #[test]
    fn concentrated_weight_gives_element_average() {
        let m = broken_mesh(2);
        let t = vec![30.0, 31.0, 32.0, 33.0, 40.0, 40.0, 40.0, 40.0];
        let p = vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        assert_relative_eq!(brightness_temperature(&m, &t, &p).unwrap(), 40.0, epsilon = 1e-12);
        let p = vec![2.0, 2.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0];
        assert_relative_eq!(brightness_temperature(&m, &t, &p).unwrap(), 31.5, epsilon = 1e-12);
    }

    #[test]
    fn linear_fields_integrate_exactly() {
        // ∫ x·x over the unit simplex is 1/60, ∫ x is 1/24.
        let m = broken_mesh(1);
        let x: Vec<f64> = m.nodes.iter().map(|p| p.x).collect();
        let tb = brightness_temperature(&m, &x, &x).unwrap();
        assert_relative_eq!(tb, (1.0 / 60.0) / (1.0 / 24.0), epsilon = 1e-14);
    }

    #[test]
    fn zero_weight_is_an_error() {
        let m = broken_mesh(1);
        assert!(matches!(brightness_temperature(&m, &[1.0; 4], &[0.0; 4]), Err(RadiometryError::ZeroWeight)));
    }

    proptest! {
        #[test]
        fn normalization_identity(c in 20.0f64..45.0, p in proptest::collection::vec(1e-3f64..1e3, 12)) {
            let m = broken_mesh(3);
            let tb = brightness_temperature(&m, &vec![c; 12], &p).unwrap();
            prop_assert!((tb - c).abs() <= 1e-10 * c);
        }

        #[test]
        fn convex_combination_bounds(t in proptest::collection::vec(20.0f64..45.0, 16), p in proptest::collection::vec(0.0f64..1.0, 16)) {
            let m = broken_mesh(4);
            prop_assume!(p.iter().sum::<f64>() > 1e-6);
            let tb = brightness_temperature(&m, &t, &p).unwrap();
            let lo = t.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(tb >= lo - 1e-9 && tb <= hi + 1e-9);
        }

        #[test]
        fn raising_weight_in_hottest_element_never_lowers(
            t in proptest::collection::vec(20.0f64..45.0, 16),
            p in proptest::collection::vec(0.01f64..1.0, 16),
            boost in 1.0f64..10.0,
        ) {
            let m = broken_mesh(4);
            let before = brightness_temperature(&m, &t, &p).unwrap();
            // Hottest element: largest P-weighted element temperature.
            let hot = (0..4).max_by(|&a, &b| {
                let mean = |e: usize| {
                    let (w, s) = element_moments(1.0, [0, 1, 2, 3].map(|k| t[4 * e + k]), [0, 1, 2, 3].map(|k| p[4 * e + k]));
                    s / w
                };
                mean(a).total_cmp(&mean(b))
            }).unwrap();
            let mut q = p.clone();
            for k in 0..4 {
                q[4 * hot + k] *= boost;
            }
            let after = brightness_temperature(&m, &t, &q).unwrap();
            prop_assert!(after >= before - 1e-12);
        }
    }

    #[test]
    fn skin_spot_average_and_nearest_node_limit() {
        let m = Mesh::box_grid([0.02, 0.02, 0.01], [4, 4, 2], TissueType::Skin, |axis, hi| {
            if axis == 2 && hi {
                BoundaryKind::Robin
            } else {
                BoundaryKind::Adiabatic
            }
        })
        .unwrap();
        let uniform = vec![33.0; m.node_count()];
        let centre = Vec3::new(0.01, 0.01, 0.01);
        assert_relative_eq!(skin_temperature(&m, &uniform, centre, 0.005), 33.0, epsilon = 1e-12);
        let t: Vec<f64> = m.nodes.iter().map(|p| 30.0 + 100.0 * p.x).collect();
        let (near, _) = m
            .nodes
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.distance(Vec3::new(0.0051, 0.0149, 0.01))))
            .fold((0, f64::INFINITY), |a, x| if x.1 < a.1 { x } else { a });
        assert_eq!(skin_temperature(&m, &t, Vec3::new(0.0051, 0.0149, 0.01), 0.0), t[near]);
    }

    fn homogeneous_phantom() -> (BreastPhantom, PropertyTable) {
        let spec = PhantomSpec {
            anatomy: AnatomySpec::minimal(),
            variability: VariabilitySpec::none(),
            ..PhantomSpec::default()
        };
        let props = PropertyTable::uniform(TissueProperties {
            density: 1000.0,
            specific_heat: 3500.0,
            conductivity: 0.5,
            q_met: 500.0,
            q_can: 0.0,
            q_rad: 0.0,
            sigma: 1.0,
            eps: 50.0,
            mu: 1.0,
        });
        (build_phantom(&spec).unwrap(), props)
    }

    #[test]
    fn analytic_decay_has_skin_depth_slope() {
        let (ph, props) = homogeneous_phantom();
        let p0 = ph.measurement_points()[0];
        let dir = -p0.normalized();
        let nodes: Vec<Vec3> = (1..6).map(|k| p0 + dir * (0.01 * k as f64)).collect();
        let f = 1.5e9;
        let pd = power_density_analytic_nodes(&ph, &props, &nodes, p0, f, 8);
        let alpha = attenuation_constant(1.0, 50.0, 1.0, f);
        for w in pd.windows(2) {
            assert_relative_eq!((w[1] / w[0]).ln() / 0.01, -2.0 * alpha, max_relative = 1e-12);
        }
    }

    #[test]
    fn analytic_field_rotates_with_the_antenna() {
        let (ph, props) = homogeneous_phantom();
        let pts = ph.measurement_points();
        // Points 1 and 3 are a quarter turn apart on the ring.
        let (a, b) = (pts[1], pts[3]);
        let angle = b.y.atan2(b.x) - a.y.atan2(a.x);
        let rot = |p: Vec3| Vec3::new(p.x * angle.cos() - p.y * angle.sin(), p.x * angle.sin() + p.y * angle.cos(), p.z);
        let probes: Vec<Vec3> = (0..40)
            .map(|k| {
                let t = k as f64 / 40.0;
                Vec3::new(0.05 * (6.0 * t).cos() * t, 0.05 * (6.0 * t).sin() * t, 0.07 * t)
            })
            .collect();
        let rotated: Vec<Vec3> = probes.iter().map(|&p| rot(p)).collect();
        let fa = power_density_analytic_nodes(&ph, &props, &probes, a, 1.5e9, 8);
        let fb = power_density_analytic_nodes(&ph, &props, &rotated, b, 1.5e9, 8);
        for (x, y) in fa.iter().zip(&fb) {
            assert!((x - y).abs() <= 0.01 * x.abs(), "{x} vs {y}");
        }
    }

    #[test]
    fn field_to_power_density_contracts() {
        let amp = FieldAmplitude {
            cells: [3, 3, 3],
            spacing: 0.01,
            origin: Vec3::ZERO,
            values: vec![2.0; 27],
            last_change: 0.0,
        };
        let nodes = vec![Vec3::new(0.012, 0.017, 0.021), Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.03, 0.03, 0.03)];
        let p = power_density_from_field(&amp, &vec![0.8; 27], &nodes);
        for v in &p {
            assert_relative_eq!(*v, 0.5 * 0.8 * 4.0, epsilon = 1e-12);
        }
        let doubled = FieldAmplitude { values: vec![4.0; 27], ..amp.clone() };
        let p2 = power_density_from_field(&doubled, &vec![0.8; 27], &nodes);
        for (a, b) in p.iter().zip(&p2) {
            assert_relative_eq!(*b, 4.0 * a, epsilon = 1e-12);
        }
        let p0 = power_density_from_field(&amp, &vec![0.0; 27], &nodes);
        assert!(p0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn record_band_and_feature_order() {
        let mut r = ThermoRecord {
            id: "M-000001".into(),
            label: Label::Cancer,
            provenance: Provenance::Model,
            t_mw: [31.0; 9],
            t_ir: [29.0; 9],
        };
        r.t_ir[8] = 28.5;
        assert_eq!(r.features()[0], 31.0);
        assert_eq!(r.features()[17], 28.5);
        r.validate().unwrap();
        r.t_mw[2] = 50.0;
        assert!(r.validate().is_err());
        r.t_mw[2] = f64::NAN;
        assert!(r.validate().is_err());
        assert_eq!("cancer".parse::<Label>().unwrap(), Label::Cancer);
        assert_eq!(Label::Healthy.class(), 0);
        assert_eq!("original-surrogate".parse::<Provenance>().unwrap(), Provenance::OriginalSurrogate);
        assert!("sick".parse::<Label>().is_err());
    }
}
