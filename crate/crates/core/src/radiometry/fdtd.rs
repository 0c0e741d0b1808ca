//! Yee-grid FDTD for lossy, isotropic media with first-order Mur or periodic
//! boundaries.

use std::f64::consts::PI;

use super::RadiometryError;
use crate::geometry::Vec3;

pub const C0: f64 = 299_792_458.0;
pub const MU0: f64 = 1.256_637_062_12e-6;
pub const EPS0: f64 = 8.854_187_812_8e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisBoundary {
    /// First-order Mur absorbing walls at both ends.
    Mur,
    Periodic,
}

/// Sinusoidal point source: a current element at an E-grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSource {
    pub node: [usize; 3],
    /// Current direction; decomposed onto the three E components.
    pub direction: Vec3,
    pub frequency_hz: f64,
    pub amplitude: f64,
}

/// Structured grid with per-cell relative ε, μ and conductivity σ (S/m).
#[derive(Debug, Clone)]
pub struct EmGrid {
    pub cells: [usize; 3],
    pub spacing: f64,
    /// Position of node (0, 0, 0).
    pub origin: Vec3,
    pub boundary: [AxisBoundary; 3],
    pub eps: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Current elements driven in phase at a common frequency.
    pub sources: Vec<PointSource>,
    /// `c0 · dt · √3 / h`; stable below 1.
    pub courant: f64,
}

impl EmGrid {
    pub fn homogeneous(cells: [usize; 3], spacing: f64, eps: f64, mu: f64, sigma: f64) -> Self {
        let n = cells[0] * cells[1] * cells[2];
        Self {
            cells,
            spacing,
            origin: Vec3::ZERO,
            boundary: [AxisBoundary::Mur; 3],
            eps: vec![eps; n],
            mu: vec![mu; n],
            sigma: vec![sigma; n],
            sources: Vec::new(),
            courant: 0.5,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.cells[0] * (j + self.cells[1] * k)
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.spacing
    }

    pub fn node_position(&self, n: [usize; 3]) -> Vec3 {
        self.origin + Vec3::new(n[0] as f64, n[1] as f64, n[2] as f64) * self.spacing
    }

    /// Nearest grid node to `p`, clamped into the grid.
    pub fn nearest_node(&self, p: Vec3) -> [usize; 3] {
        let q = (p - self.origin) / self.spacing;
        [0, 1, 2].map(|a| (q[a].round().max(0.0) as usize).min(self.cells[a]))
    }

    pub fn time_step(&self) -> f64 {
        self.courant * self.spacing / (C0 * 3f64.sqrt())
    }

    /// Shortest wavelength in any cell at `frequency_hz`.
    pub fn min_wavelength(&self, frequency_hz: f64) -> f64 {
        let n_max = self
            .eps
            .iter()
            .zip(&self.mu)
            .map(|(e, m)| (e * m).sqrt())
            .fold(1.0f64, f64::max);
        C0 / (frequency_hz * n_max)
    }

    /// Resolution and stability gates.
    pub fn check(&self, frequency_hz: f64) -> Result<(), RadiometryError> {
        if self.cells.iter().any(|&c| c == 0) || self.eps.len() != self.cell_count() {
            return Err(RadiometryError::InvalidConfig("grid arrays do not match cell counts".into()));
        }
        let lambda = self.min_wavelength(frequency_hz);
        if self.spacing > lambda / 10.0 {
            return Err(RadiometryError::ResolutionGateFailed {
                spacing: self.spacing,
                limit: lambda / 10.0,
            });
        }
        if !(self.courant > 0.0 && self.courant <= 0.5) {
            return Err(RadiometryError::InvalidConfig(format!("courant number {} outside (0, 0.5]", self.courant)));
        }
        Ok(())
    }
}

/// Component amplitudes of the stationary field, one value per cell.
#[derive(Debug, Clone)]
pub struct FieldAmplitude {
    pub cells: [usize; 3],
    pub spacing: f64,
    pub origin: Vec3,
    /// Complex-amplitude magnitude `|E|` at each cell center (V/m).
    pub values: Vec<f64>,
    /// Relative change between the last two periods.
    pub last_change: f64,
}

/// Leapfrog state. Every component array has one slot per E-grid node;
/// slots outside a component's staggered range stay zero.
pub struct Fdtd {
    dims: [usize; 3],
    cells: [usize; 3],
    boundary: [AxisBoundary; 3],
    h: f64,
    dt: f64,
    e: [Vec<f64>; 3],
    hf: [Vec<f64>; 3],
    ca: [Vec<f64>; 3],
    cb: [Vec<f64>; 3],
    ch: [Vec<f64>; 3],
    // Mur coefficient at each boundary-tangential E slot (from the local medium).
    mur: [Vec<f64>; 3],
    sources: Vec<PointSource>,
    step: usize,
}

impl Fdtd {
    pub fn new(grid: &EmGrid) -> Self {
        let cells = grid.cells;
        let dims: [usize; 3] = [0, 1, 2].map(|a| match grid.boundary[a] {
            AxisBoundary::Mur => cells[a] + 1,
            AxisBoundary::Periodic => cells[a],
        });
        let n = dims[0] * dims[1] * dims[2];
        let dt = grid.time_step();
        let h = grid.spacing;
        let wrap = |a: usize, i: isize| -> Option<usize> {
            let c = cells[a] as isize;
            match grid.boundary[a] {
                AxisBoundary::Periodic => Some(i.rem_euclid(c) as usize),
                AxisBoundary::Mur => (0..c).contains(&i).then_some(i as usize),
            }
        };
        // Average material over the cells sharing an E edge (component a):
        // offsets {−1, 0} along the two transverse axes.
        let mut ca: [Vec<f64>; 3] = Default::default();
        let mut cb: [Vec<f64>; 3] = Default::default();
        let mut mur: [Vec<f64>; 3] = Default::default();
        for a in 0..3 {
            ca[a] = vec![0.0; n];
            cb[a] = vec![0.0; n];
            mur[a] = vec![0.0; n];
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            for k in 0..dims[2] {
                for j in 0..dims[1] {
                    for i in 0..dims[0] {
                        let idx = [i, j, k];
                        let mut eps = 0.0;
                        let mut sig = 0.0;
                        let mut cnt = 0.0;
                        for db in [-1isize, 0] {
                            for dc in [-1isize, 0] {
                                let mut cell = [0usize; 3];
                                let Some(ia) = wrap(a, idx[a] as isize) else { continue };
                                let Some(ib) = wrap(b, idx[b] as isize + db) else { continue };
                                let Some(ic) = wrap(c, idx[c] as isize + dc) else { continue };
                                cell[a] = ia;
                                cell[b] = ib;
                                cell[c] = ic;
                                let ci = grid.cell_index(cell[0], cell[1], cell[2]);
                                eps += grid.eps[ci];
                                sig += grid.sigma[ci];
                                cnt += 1.0;
                            }
                        }
                        if cnt == 0.0 {
                            continue;
                        }
                        let eps = EPS0 * eps / cnt;
                        let sig = sig / cnt;
                        let loss = sig * dt / (2.0 * eps);
                        let s = i + dims[0] * (j + dims[1] * k);
                        ca[a][s] = (1.0 - loss) / (1.0 + loss);
                        cb[a][s] = dt / eps / (1.0 + loss);
                        let v = C0 / (eps / EPS0).sqrt();
                        mur[a][s] = (v * dt - h) / (v * dt + h);
                    }
                }
            }
        }
        // H sits at face centers; use the mean permeability of the two cells
        // sharing the face.
        let mut ch: [Vec<f64>; 3] = Default::default();
        for a in 0..3 {
            ch[a] = vec![0.0; n];
            for k in 0..dims[2] {
                for j in 0..dims[1] {
                    for i in 0..dims[0] {
                        let idx = [i, j, k];
                        let mut mu = 0.0;
                        let mut cnt = 0.0;
                        for da in [-1isize, 0] {
                            let mut cell = [0usize; 3];
                            let mut ok = true;
                            for ax in 0..3 {
                                let off = if ax == a { da } else { 0 };
                                match wrap(ax, idx[ax] as isize + off) {
                                    Some(v) => cell[ax] = v,
                                    None => ok = false,
                                }
                            }
                            if ok {
                                mu += grid.mu[grid.cell_index(cell[0], cell[1], cell[2])];
                                cnt += 1.0;
                            }
                        }
                        if cnt > 0.0 {
                            ch[a][i + dims[0] * (j + dims[1] * k)] = dt / (MU0 * mu / cnt);
                        }
                    }
                }
            }
        }
        Self {
            dims,
            cells,
            boundary: grid.boundary,
            h,
            dt,
            e: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            hf: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            ca,
            cb,
            ch,
            mur,
            sources: grid.sources.clone(),
            step: 0,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    /// E component `a` at node slot `(i, j, k)`.
    pub fn e(&self, a: usize, n: [usize; 3]) -> f64 {
        self.e[a][self.idx(n[0], n[1], n[2])]
    }

    /// Number of node slots along each axis.
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    // Index of the +1 neighbour along `axis`, wrapping on periodic axes.
    #[inline]
    fn next(&self, axis: usize, i: usize) -> usize {
        if i + 1 == self.dims[axis] {
            0
        } else {
            i + 1
        }
    }

    #[inline]
    fn prev(&self, axis: usize, i: usize) -> usize {
        if i == 0 {
            self.dims[axis] - 1
        } else {
            i - 1
        }
    }

    // Valid index range of the staggered (half-integer) direction along `axis`.
    fn half_range(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    // Range of E-tangential slots updated from the curl (Mur faces excluded).
    fn interior(&self, axis: usize) -> std::ops::Range<usize> {
        match self.boundary[axis] {
            AxisBoundary::Periodic => 0..self.dims[axis],
            AxisBoundary::Mur => 1..self.cells[axis],
        }
    }

    fn full(&self, axis: usize) -> std::ops::Range<usize> {
        0..self.dims[axis]
    }

    fn update_h(&mut self) {
        let inv_h = 1.0 / self.h;
        let [nxh, nyh, nzh] = [0, 1, 2].map(|a| self.half_range(a));
        let [dx, dy, dz] = self.dims;
        // Hx at (i, j+½, k+½).
        for k in 0..nzh {
            let k1 = self.next(2, k);
            for j in 0..nyh {
                let j1 = self.next(1, j);
                for i in 0..dx {
                    let s = self.idx(i, j, k);
                    let curl = (self.e[2][self.idx(i, j1, k)] - self.e[2][s]) - (self.e[1][self.idx(i, j, k1)] - self.e[1][s]);
                    self.hf[0][s] -= self.ch[0][s] * curl * inv_h;
                }
            }
        }
        // Hy at (i+½, j, k+½).
        for k in 0..nzh {
            let k1 = self.next(2, k);
            for j in 0..dy {
                for i in 0..nxh {
                    let i1 = self.next(0, i);
                    let s = self.idx(i, j, k);
                    let curl = (self.e[0][self.idx(i, j, k1)] - self.e[0][s]) - (self.e[2][self.idx(i1, j, k)] - self.e[2][s]);
                    self.hf[1][s] -= self.ch[1][s] * curl * inv_h;
                }
            }
        }
        // Hz at (i+½, j+½, k).
        for k in 0..dz {
            for j in 0..nyh {
                let j1 = self.next(1, j);
                for i in 0..nxh {
                    let i1 = self.next(0, i);
                    let s = self.idx(i, j, k);
                    let curl = (self.e[1][self.idx(i1, j, k)] - self.e[1][s]) - (self.e[0][self.idx(i, j1, k)] - self.e[0][s]);
                    self.hf[2][s] -= self.ch[2][s] * curl * inv_h;
                }
            }
        }
    }

    fn update_e(&mut self) {
        let inv_h = 1.0 / self.h;
        // Ex at (i+½, j, k).
        for k in self.interior(2) {
            let k0 = self.prev(2, k);
            for j in self.interior(1) {
                let j0 = self.prev(1, j);
                for i in 0..self.half_range(0) {
                    let s = self.idx(i, j, k);
                    let curl = (self.hf[2][s] - self.hf[2][self.idx(i, j0, k)]) - (self.hf[1][s] - self.hf[1][self.idx(i, j, k0)]);
                    self.e[0][s] = self.ca[0][s] * self.e[0][s] + self.cb[0][s] * curl * inv_h;
                }
            }
        }
        // Ey at (i, j+½, k).
        for k in self.interior(2) {
            let k0 = self.prev(2, k);
            for j in 0..self.half_range(1) {
                for i in self.interior(0) {
                    let i0 = self.prev(0, i);
                    let s = self.idx(i, j, k);
                    let curl = (self.hf[0][s] - self.hf[0][self.idx(i, j, k0)]) - (self.hf[2][s] - self.hf[2][self.idx(i0, j, k)]);
                    self.e[1][s] = self.ca[1][s] * self.e[1][s] + self.cb[1][s] * curl * inv_h;
                }
            }
        }
        // Ez at (i, j, k+½).
        for k in 0..self.half_range(2) {
            for j in self.interior(1) {
                let j0 = self.prev(1, j);
                for i in self.interior(0) {
                    let i0 = self.prev(0, i);
                    let s = self.idx(i, j, k);
                    let curl = (self.hf[1][s] - self.hf[1][self.idx(i0, j, k)]) - (self.hf[0][s] - self.hf[0][self.idx(i, j0, k)]);
                    self.e[2][s] = self.ca[2][s] * self.e[2][s] + self.cb[2][s] * curl * inv_h;
                }
            }
        }
    }

    /// Tangential E slots on the Mur faces of `axis`, paired with their inward
    /// neighbours.
    fn mur_pairs(&self, axis: usize) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        if self.boundary[axis] != AxisBoundary::Mur {
            return out;
        }
        let n = self.cells[axis];
        for comp in 0..3 {
            if comp == axis {
                continue;
            }
            let ranges: [std::ops::Range<usize>; 3] = [0, 1, 2].map(|a| {
                if a == comp {
                    0..self.half_range(a)
                } else {
                    self.full(a)
                }
            });
            for (face, inner) in [(0usize, 1usize), (n, n - 1)] {
                for k in ranges[2].clone() {
                    for j in ranges[1].clone() {
                        for i in ranges[0].clone() {
                            let mut b = [i, j, k];
                            if b[axis] != 0 {
                                continue;
                            }
                            b[axis] = face;
                            let mut q = b;
                            q[axis] = inner;
                            out.push((comp, self.idx(b[0], b[1], b[2]), self.idx(q[0], q[1], q[2])));
                        }
                    }
                }
            }
        }
        out
    }

    fn source_current(src: &PointSource, t: f64) -> f64 {
        // Raised-cosine ramp over the first two periods.
        let period = 1.0 / src.frequency_hz;
        let ramp = if t < 2.0 * period { 0.5 * (1.0 - (PI * t / (2.0 * period)).cos()) } else { 1.0 };
        src.amplitude * ramp * (2.0 * PI * src.frequency_hz * t).sin()
    }

    /// Advances one time step; `soft` adds a current density (A/m²) to `Ez`
    /// at one node.
    pub fn advance(&mut self, mur_pairs: &[(usize, usize, usize)], soft: Option<([usize; 3], f64)>) {
        self.update_h();
        let old: Vec<(f64, f64)> = mur_pairs.iter().map(|&(c, b, q)| (self.e[c][b], self.e[c][q])).collect();
        let t_half = (self.step as f64 + 0.5) * self.dt;
        self.update_e();
        for src in &self.sources {
            let j = Self::source_current(src, t_half);
            let s = self.idx(src.node[0], src.node[1], src.node[2]);
            let d = src.direction.normalized();
            for a in 0..3 {
                self.e[a][s] -= self.cb[a][s] * j * d[a];
            }
        }
        if let Some((n, v)) = soft {
            let s = self.idx(n[0], n[1], n[2]);
            self.e[2][s] -= self.cb[2][s] * v;
        }
        for (&(c, b, q), (old_b, old_q)) in mur_pairs.iter().zip(old) {
            let coef = self.mur[c][b];
            self.e[c][b] = old_q + coef * (self.e[c][q] - old_b);
        }
        self.step += 1;
    }

    pub fn boundary_pairs(&self) -> Vec<(usize, usize, usize)> {
        (0..3).flat_map(|a| self.mur_pairs(a)).collect()
    }

    /// Cell-centred `|E|` from per-slot component amplitudes.
    fn cell_amplitude(&self, peak: &[Vec<f64>; 3]) -> Vec<f64> {
        let [cx, cy, cz] = self.cells;
        let mut out = vec![0.0; cx * cy * cz];
        for k in 0..cz {
            for j in 0..cy {
                for i in 0..cx {
                    let (i1, j1, k1) = (self.next(0, i), self.next(1, j), self.next(2, k));
                    // Average each component over the four edges parallel to it.
                    let ex = 0.25 * (peak[0][self.idx(i, j, k)] + peak[0][self.idx(i, j1, k)] + peak[0][self.idx(i, j, k1)] + peak[0][self.idx(i, j1, k1)]);
                    let ey = 0.25 * (peak[1][self.idx(i, j, k)] + peak[1][self.idx(i1, j, k)] + peak[1][self.idx(i, j, k1)] + peak[1][self.idx(i1, j, k1)]);
                    let ez = 0.25 * (peak[2][self.idx(i, j, k)] + peak[2][self.idx(i1, j, k)] + peak[2][self.idx(i, j1, k)] + peak[2][self.idx(i1, j1, k)]);
                    out[i + cx * (j + cy * k)] = (ex * ex + ey * ey + ez * ez).sqrt();
                }
            }
        }
        out
    }
}

/// Runs the grid's sinusoidal source for `cycles` periods and returns the
/// per-cell amplitude from the last period's component peaks.
pub fn fdtd_solve(grid: &EmGrid, cycles: usize) -> Result<FieldAmplitude, RadiometryError> {
    let src = *grid.sources.first().ok_or_else(|| RadiometryError::InvalidConfig("grid has no source".into()))?;
    if grid.sources.iter().any(|s| s.frequency_hz != src.frequency_hz) {
        return Err(RadiometryError::InvalidConfig("sources must share one frequency".into()));
    }
    grid.check(src.frequency_hz)?;
    if cycles < 2 {
        return Err(RadiometryError::InvalidConfig("need at least two cycles".into()));
    }
    let period = 1.0 / src.frequency_hz;
    let steps_per_period = (period / grid.time_step()).ceil() as usize;
    let mut g = grid.clone();
    // Shrink dt so one period is an integer number of steps.
    g.courant = grid.courant * (period / steps_per_period as f64) / grid.time_step();
    let mut sim = Fdtd::new(&g);
    let pairs = sim.boundary_pairs();
    let n = sim.e[0].len();
    let mut prev: Option<Vec<f64>> = None;
    let mut last_change = f64::INFINITY;
    let mut amp = Vec::new();
    for cycle in 0..cycles {
        let track = cycle + 2 >= cycles;
        let mut peak: [Vec<f64>; 3] = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for _ in 0..steps_per_period {
            sim.advance(&pairs, None);
            if track {
                for a in 0..3 {
                    for (p, e) in peak[a].iter_mut().zip(&sim.e[a]) {
                        *p = p.max(e.abs());
                    }
                }
            }
        }
        if track {
            let cur = sim.cell_amplitude(&peak);
            if let Some(p) = &prev {
                let num: f64 = cur.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
                let den: f64 = cur.iter().map(|a| a * a).sum();
                last_change = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
            }
            prev = Some(cur.clone());
            amp = cur;
        }
    }
    if !(last_change < 0.01) {
        return Err(RadiometryError::NotStationary { change: last_change, cycles });
    }
    Ok(FieldAmplitude {
        cells: grid.cells,
        spacing: grid.spacing,
        origin: grid.origin,
        values: amp,
        last_change,
    })
}

/// Plane-wave attenuation constant (1/m) of a lossy medium.
pub fn attenuation_constant(sigma: f64, eps_r: f64, mu_r: f64, frequency_hz: f64) -> f64 {
    let w = 2.0 * PI * frequency_hz;
    let eps = EPS0 * eps_r;
    let mu = MU0 * mu_r;
    let tan = sigma / (w * eps);
    w * (mu * eps / 2.0).sqrt() * ((1.0 + tan * tan).sqrt() - 1.0).sqrt()
}
