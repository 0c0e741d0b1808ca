//! Pennes bioheat problem on P1 tetrahedra: assembly, lumped implicit time
//! stepping and steady-state solution.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::mesh::{BoundaryKind, Mesh};
use crate::sparse::{conjugate_gradient, CsrMatrix, SolveError};
use crate::tissue::{PropertyError, PropertyTable, TissueType};

#[derive(Debug, Error)]
pub enum BioheatError {
    #[error("mesh has {elements} elements but {tags} tissue tags")]
    MissingProperties { elements: usize, tags: usize },
    #[error("invalid tissue properties: {0}")]
    InvalidProperties(#[from] PropertyError),
    #[error("element {0} has zero or negative volume")]
    SingularElement(usize),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("linear solve failed: {0}")]
    SolverDiverged(#[from] SolveError),
    #[error("no steady state after {steps} steps (last rate {rate:e} K/s)")]
    NotConverged { steps: usize, rate: f64 },
    #[error("field has {len} values, mesh has {nodes} nodes")]
    FieldLength { len: usize, nodes: usize },
}

/// How blood vessels enter the heat problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VesselModel {
    /// Vessel nodes held at the vessel temperature.
    #[default]
    Dirichlet,
    /// Vessel elements carry an extra volumetric source.
    Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tau_s: f64,
    /// Steady state is declared when `max |T̂ − T| / τ` drops below this (K/s).
    pub steady_tol: f64,
    /// Relative residual for each conjugate-gradient solve.
    pub linear_tol: f64,
    pub max_steps: usize,
    pub max_linear_iter: usize,
    pub t_air_c: f64,
    pub h_air: f64,
    /// Dirichlet value on the body-side boundary.
    pub t_core_c: f64,
    pub t_vessel_c: f64,
    pub t0_c: f64,
    /// Overrides the skin radiative sink from the property table (W/m³, ≤ 0).
    pub q_rad: Option<f64>,
    pub vessels: VesselModel,
    /// Source density in vessel elements when `vessels = "source"` (W/m³).
    pub vessel_source: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau_s: 1.0,
            steady_tol: 1e-4,
            linear_tol: 1e-8,
            max_steps: 2_000_000,
            max_linear_iter: 20_000,
            t_air_c: 22.0,
            h_air: 10.0,
            t_core_c: 37.0,
            t_vessel_c: 37.0,
            t0_c: 37.0,
            q_rad: None,
            vessels: VesselModel::Dirichlet,
            vessel_source: 2.0e4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), BioheatError> {
        let bad = |m: &str| Err(BioheatError::InvalidConfig(m.to_string()));
        if !(self.tau_s > 0.0 && self.tau_s.is_finite()) {
            return bad("tau_s must be positive");
        }
        if !(self.steady_tol > 0.0 && self.linear_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.h_air >= 0.0) {
            return bad("h_air must be nonnegative");
        }
        if let Some(q) = self.q_rad {
            if !(q <= 0.0) {
                return bad("q_rad must be nonpositive");
            }
        }
        if self.max_steps == 0 || self.max_linear_iter == 0 {
            return bad("iteration limits must be positive");
        }
        Ok(())
    }
}

/// Nodal temperatures (°C) at time `time_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureField {
    pub values: Vec<f64>,
    pub time_s: f64,
}

impl TemperatureField {
    pub fn uniform(n: usize, t: f64) -> Self {
        Self { values: vec![t; n], time_s: 0.0 }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub g: CsrMatrix,
    pub m: CsrMatrix,
    pub p: Vec<f64>,
    pub g_diag: Vec<f64>,
    /// Imposed temperature per node, `None` for free nodes.
    pub dirichlet: Vec<Option<f64>>,
}

impl SystemMatrices {
    pub fn node_count(&self) -> usize {
        self.p.len()
    }

    fn free_mask(&self) -> Vec<bool> {
        self.dirichlet.iter().map(Option::is_none).collect()
    }

    /// Copy of `t` with Dirichlet values imposed.
    pub fn impose(&self, t: &[f64]) -> Vec<f64> {
        t.iter().zip(&self.dirichlet).map(|(v, d)| d.unwrap_or(*v)).collect()
    }

    /// `M T − P`; zero on free rows at steady state.
    pub fn residual(&self, t: &[f64]) -> Vec<f64> {
        let mut r = self.m.mul_vec(t);
        for (ri, pi) in r.iter_mut().zip(&self.p) {
            *ri -= pi;
        }
        r
    }
}

/// Gradients of the four barycentric coordinates and the volume.
pub fn p1_gradients(p: [Vec3; 4]) -> Option<([Vec3; 4], f64)> {
    let e1 = p[1] - p[0];
    let e2 = p[2] - p[0];
    let e3 = p[3] - p[0];
    let det = e1.dot(e2.cross(e3));
    if !(det > 0.0) {
        return None;
    }
    let g1 = e2.cross(e3) / det;
    let g2 = e3.cross(e1) / det;
    let g3 = e1.cross(e2) / det;
    let g0 = -(g1 + g2 + g3);
    Some(([g0, g1, g2, g3], det / 6.0))
}

fn element_source(tissue: TissueType, props: &PropertyTable, cfg: &SolverConfig) -> f64 {
    let p = &props[tissue];
    let q_rad = match (tissue, cfg.q_rad) {
        (TissueType::Skin, Some(q)) => q,
        _ => p.q_rad,
    };
    let vessel = if tissue == TissueType::BloodVessel && cfg.vessels == VesselModel::Source {
        cfg.vessel_source
    } else {
        0.0
    };
    p.q_met + p.q_can + q_rad + vessel
}

/// Builds G, M, P and the Dirichlet set for the mesh.
pub fn assemble(mesh: &Mesh, props: &PropertyTable, cfg: &SolverConfig) -> Result<SystemMatrices, BioheatError> {
    cfg.validate()?;
    if mesh.tissue.len() != mesh.element_count() {
        return Err(BioheatError::MissingProperties {
            elements: mesh.element_count(),
            tags: mesh.tissue.len(),
        });
    }
    props.validate()?;
    let n = mesh.node_count();
    let ne = mesh.element_count();
    let mut g_trip = Vec::with_capacity(16 * ne);
    let mut m_trip = Vec::with_capacity(16 * ne + 9 * mesh.boundary.len());
    let mut p = vec![0.0; n];

    for (e, tet) in mesh.tets.iter().enumerate() {
        let (grads, vol) = p1_gradients(mesh.tet_points(e)).ok_or(BioheatError::SingularElement(e))?;
        let tissue = mesh.tissue[e];
        let pr = &props[tissue];
        let rc = pr.volumetric_heat_capacity();
        let q = element_source(tissue, props, cfg);
        for a in 0..4 {
            p[tet[a] as usize] += q * vol / 4.0;
            for b in 0..4 {
                let mass = if a == b { 2.0 } else { 1.0 } * vol / 20.0;
                g_trip.push((tet[a], tet[b], rc * mass));
                m_trip.push((tet[a], tet[b], pr.conductivity * vol * grads[a].dot(grads[b])));
            }
        }
    }
    for f in mesh.faces_of(BoundaryKind::Robin) {
        let area = mesh.face_area(f);
        for a in 0..3 {
            p[f.nodes[a] as usize] += cfg.h_air * cfg.t_air_c * area / 3.0;
            for b in 0..3 {
                let w = if a == b { 2.0 } else { 1.0 } * area / 12.0;
                m_trip.push((f.nodes[a], f.nodes[b], cfg.h_air * w));
            }
        }
    }
    let g = CsrMatrix::from_triplets(n, g_trip);
    let m = CsrMatrix::from_triplets(n, m_trip);
    let g_diag = lump(&g);

    let mut dirichlet = vec![None; n];
    if cfg.vessels == VesselModel::Dirichlet {
        for &v in &mesh.vessel_nodes {
            dirichlet[v as usize] = Some(cfg.t_vessel_c);
        }
    }
    for f in mesh.faces_of(BoundaryKind::Dirichlet) {
        for &v in &f.nodes {
            dirichlet[v as usize] = Some(cfg.t_core_c);
        }
    }
    Ok(SystemMatrices { g, m, p, g_diag, dirichlet })
}

/// Row-sum lumping of the mass matrix.
pub fn lump(g: &CsrMatrix) -> Vec<f64> {
    g.row_sums()
}

/// Reusable implicit stepper for a fixed τ.
pub struct Stepper<'a> {
    sys: &'a SystemMatrices,
    tau: f64,
    a_free: CsrMatrix,
    free: Vec<usize>,
    linear_tol: f64,
    max_iter: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(sys: &'a SystemMatrices, tau: f64, cfg: &SolverConfig) -> Result<Self, BioheatError> {
        if !(tau > 0.0) {
            return Err(BioheatError::InvalidConfig("time step must be positive".into()));
        }
        let a = sys.m.plus_scaled_diagonal(&sys.g_diag, 1.0 / tau);
        let (a_free, free) = a.principal_submatrix(&sys.free_mask());
        Ok(Self {
            sys,
            tau,
            a_free,
            free,
            linear_tol: cfg.linear_tol,
            max_iter: cfg.max_linear_iter,
        })
    }

    /// One step of `(G_diag/τ + M) T̂ = P + G_diag T / τ` with Dirichlet rows
    /// eliminated. Solved for the increment `T̂ − T`, which satisfies
    /// `(G_diag/τ + M)(T̂ − T) = P − M T` on the free rows.
    pub fn step(&self, t: &TemperatureField) -> Result<TemperatureField, BioheatError> {
        let n = self.sys.node_count();
        if t.values.len() != n {
            return Err(BioheatError::FieldLength { len: t.values.len(), nodes: n });
        }
        let mut values = self.sys.impose(&t.values);
        let r = self.sys.residual(&values);
        let rhs: Vec<f64> = self.free.iter().map(|&i| -r[i]).collect();
        let (dt, _) = conjugate_gradient(&self.a_free, &rhs, None, self.linear_tol, self.max_iter)?;
        for (k, &i) in self.free.iter().enumerate() {
            values[i] += dt[k];
        }
        Ok(TemperatureField { values, time_s: t.time_s + self.tau })
    }
}

pub fn step(t: &TemperatureField, sys: &SystemMatrices, tau: f64, cfg: &SolverConfig) -> Result<TemperatureField, BioheatError> {
    Stepper::new(sys, tau, cfg)?.step(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchReport {
    pub steps: usize,
    pub final_rate: f64,
}

/// Marches from `t0` until `max |T̂ − T| / τ < steady_tol`.
pub fn march_to_steady(
    sys: &SystemMatrices,
    t0: TemperatureField,
    cfg: &SolverConfig,
) -> Result<(TemperatureField, MarchReport), BioheatError> {
    let stepper = Stepper::new(sys, cfg.tau_s, cfg)?;
    let mut t = t0;
    let mut rate = f64::INFINITY;
    for steps in 1..=cfg.max_steps {
        let next = stepper.step(&t)?;
        rate = next
            .values
            .iter()
            .zip(&t.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / cfg.tau_s;
        t = next;
        if rate < cfg.steady_tol {
            return Ok((t, MarchReport { steps, final_rate: rate }));
        }
    }
    Err(BioheatError::NotConverged { steps: cfg.max_steps, rate })
}

/// Steady field by time marching from the uniform initial temperature.
pub fn solve_steady(mesh: &Mesh, props: &PropertyTable, cfg: &SolverConfig) -> Result<TemperatureField, BioheatError> {
    let sys = assemble(mesh, props, cfg)?;
    let t0 = TemperatureField::uniform(mesh.node_count(), cfg.t0_c);
    march_to_steady(&sys, t0, cfg).map(|(t, _)| t)
}

/// Steady field from `M T = P` directly (Dirichlet rows eliminated).
pub fn solve_direct(sys: &SystemMatrices, cfg: &SolverConfig) -> Result<TemperatureField, BioheatError> {
    let (m_free, free) = sys.m.principal_submatrix(&sys.free_mask());
    let base = sys.impose(&vec![0.0; sys.node_count()]);
    let r = sys.residual(&base);
    let rhs: Vec<f64> = free.iter().map(|&i| -r[i]).collect();
    let (x, _) = conjugate_gradient(&m_free, &rhs, None, cfg.linear_tol, cfg.max_linear_iter)?;
    let mut values = base;
    for (k, &i) in free.iter().enumerate() {
        values[i] = x[k];
    }
    Ok(TemperatureField { values, time_s: f64::INFINITY })
}

/// Power terms of the discrete energy balance (W).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxBalance {
    pub source_power: f64,
    /// Net heat entering through Dirichlet nodes.
    pub dirichlet_inflow: f64,
    /// `h_air ∮ (T − T_air) dS` over Robin faces.
    pub robin_outflow: f64,
}

impl FluxBalance {
    /// `|source + inflow − outflow|` relative to the outflow.
    pub fn relative_imbalance(&self) -> f64 {
        (self.source_power + self.dirichlet_inflow - self.robin_outflow).abs() / self.robin_outflow.abs()
    }
}

pub fn flux_balance(
    mesh: &Mesh,
    props: &PropertyTable,
    sys: &SystemMatrices,
    t: &TemperatureField,
    cfg: &SolverConfig,
) -> FluxBalance {
    let source_power = (0..mesh.element_count())
        .map(|e| element_source(mesh.tissue[e], props, cfg) * mesh.volume(e))
        .sum();
    let robin_outflow = mesh
        .faces_of(BoundaryKind::Robin)
        .map(|f| {
            let mean = f.nodes.iter().map(|&i| t.values[i as usize]).sum::<f64>() / 3.0;
            cfg.h_air * mesh.face_area(f) * (mean - cfg.t_air_c)
        })
        .sum();
    let r = sys.residual(&t.values);
    let dirichlet_inflow = r
        .iter()
        .zip(&sys.dirichlet)
        .filter(|(_, d)| d.is_some())
        .map(|(v, _)| v)
        .sum();
    FluxBalance { source_power, dirichlet_inflow, robin_outflow }
}

/// CSV with header `node_id,x,y,z,T`.
pub fn write_temperature_csv<W: Write>(mut w: W, mesh: &Mesh, t: &TemperatureField) -> io::Result<()> {
    writeln!(w, "node_id,x,y,z,T")?;
    for (i, (p, v)) in mesh.nodes.iter().zip(&t.values).enumerate() {
        writeln!(w, "{i},{},{},{},{}", p.x, p.y, p.z, v)?;
    }
    w.flush()
}
