//! Procedural breast phantoms.
//!
//! The domain is a hemisphere of radius `R` (dome along +z, base in the plane
//! z = 0) sitting on a muscle slab `-slab_thickness <= z < 0` of the same
//! radius. Internal anatomy is a priority-ordered list of analytic regions;
//! the first region containing a point decides its tissue. The two lowest
//! priority regions (adipose half-ball, muscle slab) cover the whole domain,
//! so every interior point resolves to exactly one tissue.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{point_segment_distance, Vec3};
use crate::tissue::{sample_properties, PropertyTable, TissueType, VariabilitySpec};

/// Number of standard measurement points (apex plus an 8-point ring).
pub const MEASUREMENT_POINTS: usize = 9;

#[derive(Debug, Error, PartialEq)]
pub enum PhantomError {
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TumorSpec {
    pub present: bool,
    /// Measurement point (0..=8) the tumor sits beneath.
    pub point: usize,
    pub depth_m: f64,
    pub radius_m: f64,
}

impl Default for TumorSpec {
    fn default() -> Self {
        Self {
            present: false,
            point: 3,
            depth_m: 0.02,
            radius_m: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementLayout {
    /// Horizontal radius of the ring, as a fraction of R.
    pub ring_fraction: f64,
    /// Numbering direction of points 1..8 seen from outside (from +z).
    pub clockwise: bool,
    /// Azimuth of point 1 in degrees; 0 is the +x (medial) axis.
    pub first_point_azimuth_deg: f64,
}

impl Default for MeasurementLayout {
    fn default() -> Self {
        Self {
            ring_fraction: 0.5,
            clockwise: true,
            first_point_azimuth_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnatomySpec {
    /// Include the mammary gland body, lobules, ducts and connective strands.
    pub glandular: bool,
    pub lobule_count_min: usize,
    pub lobule_count_max: usize,
    pub lobule_semi_axis_min_m: f64,
    pub lobule_semi_axis_max_m: f64,
    pub duct_radius_m: f64,
    pub connective_strands: usize,
    pub connective_radius_m: f64,
    pub nipple_radius_m: f64,
    pub nipple_length_m: f64,
    pub vessels: bool,
    /// Trunk radius; each branching level scales it by `vessel_radius_ratio`.
    pub vessel_radius_m: f64,
    pub vessel_radius_ratio: f64,
    /// Minimum distance kept between vessel centerlines and the skin surface.
    pub vessel_skin_clearance_m: f64,
}

impl Default for AnatomySpec {
    fn default() -> Self {
        Self {
            glandular: true,
            lobule_count_min: 8,
            lobule_count_max: 16,
            lobule_semi_axis_min_m: 0.006,
            lobule_semi_axis_max_m: 0.012,
            duct_radius_m: 0.0015,
            connective_strands: 12,
            connective_radius_m: 0.001,
            nipple_radius_m: 0.006,
            nipple_length_m: 0.01,
            vessels: true,
            vessel_radius_m: 0.003,
            vessel_radius_ratio: 0.75,
            vessel_skin_clearance_m: 0.015,
        }
    }
}

impl AnatomySpec {
    /// Skin, fat and muscle only: no gland, nipple or vessels.
    pub fn minimal() -> Self {
        Self {
            glandular: false,
            vessels: false,
            ..Self::default()
        }
    }
}

/// Full parameter set of one phantom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub radius_m: f64,
    pub skin_thickness_m: f64,
    pub slab_thickness_m: f64,
    pub anatomy: AnatomySpec,
    pub tumor: TumorSpec,
    pub measurement: MeasurementLayout,
    pub seed: u64,
    pub variability: VariabilitySpec,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            radius_m: 0.09,
            skin_thickness_m: 0.002,
            slab_thickness_m: 0.02,
            anatomy: AnatomySpec::default(),
            tumor: TumorSpec::default(),
            measurement: MeasurementLayout::default(),
            seed: 0,
            variability: VariabilitySpec::default(),
        }
    }
}

impl PhantomSpec {
    pub fn with_tumor(mut self, point: usize, radius_m: f64) -> Self {
        self.tumor.present = true;
        self.tumor.point = point;
        self.tumor.radius_m = radius_m;
        self
    }

    pub fn validate(&self) -> Result<(), PhantomError> {
        let bad = |m: &str| Err(PhantomError::InvalidSpec(m.to_string()));
        let r = self.radius_m;
        if !(r > 0.0 && r.is_finite()) {
            return bad("radius must be positive");
        }
        if !(self.skin_thickness_m > 0.0 && self.skin_thickness_m < r / 4.0) {
            return bad("skin thickness must lie in (0, R/4)");
        }
        if !(self.slab_thickness_m > 0.0) {
            return bad("slab thickness must be positive");
        }
        if !self.variability.is_valid() {
            return bad("variability spreads must lie in [0, 1)");
        }
        let a = &self.anatomy;
        if a.lobule_count_min > a.lobule_count_max {
            return bad("lobule_count_min exceeds lobule_count_max");
        }
        if !(a.lobule_semi_axis_min_m > 0.0 && a.lobule_semi_axis_min_m <= a.lobule_semi_axis_max_m) {
            return bad("lobule semi-axis range is empty");
        }
        if !(0.0 < a.vessel_radius_ratio && a.vessel_radius_ratio <= 1.0) {
            return bad("vessel_radius_ratio must lie in (0, 1]");
        }
        let m = &self.measurement;
        if !(m.ring_fraction > 0.0 && m.ring_fraction < 1.0) {
            return bad("ring_fraction must lie in (0, 1)");
        }
        if self.tumor.present {
            let t = &self.tumor;
            if t.point >= MEASUREMENT_POINTS {
                return bad("tumor point must be in 0..=8");
            }
            if !(t.radius_m > 0.0 && t.radius_m < r) {
                return bad("tumor radius must lie in (0, R)");
            }
            if !(t.depth_m > 0.0) {
                return bad("tumor depth must be positive");
            }
            let (c, _) = tumor_center(self);
            if c.norm() + t.radius_m > r || c.z - t.radius_m < 0.0 {
                return bad("tumor protrudes outside the hemisphere");
            }
        }
        Ok(())
    }
}

fn tumor_center(spec: &PhantomSpec) -> (Vec3, Vec3) {
    let pts = measurement_points_with(spec.radius_m, &spec.measurement);
    let p = pts[spec.tumor.point];
    let n = p.normalized();
    (p - n * spec.tumor.depth_m, n)
}

/// Standard layout: point 0 at the apex, points 1..8 every 45° on the circle
/// of horizontal radius R/2, point 1 on the +x (medial) axis, clockwise seen
/// from outside.
pub fn measurement_points(radius_m: f64) -> [Vec3; MEASUREMENT_POINTS] {
    measurement_points_with(radius_m, &MeasurementLayout::default())
}

pub fn measurement_points_with(radius_m: f64, layout: &MeasurementLayout) -> [Vec3; MEASUREMENT_POINTS] {
    assert!(radius_m > 0.0, "radius must be positive");
    let rho = radius_m * layout.ring_fraction;
    let z = (radius_m * radius_m - rho * rho).sqrt();
    let sign = if layout.clockwise { -1.0 } else { 1.0 };
    let phi0 = layout.first_point_azimuth_deg.to_radians();
    let mut pts = [Vec3::new(0.0, 0.0, radius_m); MEASUREMENT_POINTS];
    for (k, p) in pts.iter_mut().enumerate().skip(1) {
        let phi = phi0 + sign * (k as f64 - 1.0) * PI / 4.0;
        *p = Vec3::new(rho * phi.cos(), rho * phi.sin(), z);
    }
    pts
}

/// Analytic region primitive.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// z >= 0, |p| <= radius.
    HalfBall { radius: f64 },
    /// -thickness <= z < 0, x² + y² <= radius².
    Slab { radius: f64, thickness: f64 },
    /// z >= 0, inner <= |p| <= outer.
    DomeShell { inner: f64, outer: f64 },
    Sphere { center: Vec3, radius: f64 },
    /// Ellipsoid with orthonormal `axes` and matching semi-axis lengths.
    Ellipsoid { center: Vec3, axes: [Vec3; 3], semi: [f64; 3] },
    /// Capped cylinder around the segment [a, b].
    Capsule { a: Vec3, b: Vec3, radius: f64 },
}

impl Shape {
    pub fn contains(&self, p: Vec3) -> bool {
        match *self {
            Shape::HalfBall { radius } => p.z >= 0.0 && p.norm_sq() <= radius * radius,
            Shape::Slab { radius, thickness } => {
                p.z < 0.0 && p.z >= -thickness && p.x * p.x + p.y * p.y <= radius * radius
            }
            Shape::DomeShell { inner, outer } => {
                let r2 = p.norm_sq();
                p.z >= 0.0 && r2 >= inner * inner && r2 <= outer * outer
            }
            Shape::Sphere { center, radius } => (p - center).norm_sq() <= radius * radius,
            Shape::Ellipsoid { center, axes, semi } => {
                let d = p - center;
                (0..3)
                    .map(|i| {
                        let t = d.dot(axes[i]) / semi[i];
                        t * t
                    })
                    .sum::<f64>()
                    <= 1.0
            }
            Shape::Capsule { a, b, radius } => point_segment_distance(p, a, b) <= radius,
        }
    }

    /// Conservative axis-aligned bounds, used to skip containment tests.
    fn bounds(&self) -> (Vec3, Vec3) {
        let cube = |c: Vec3, r: f64| (c - Vec3::new(r, r, r), c + Vec3::new(r, r, r));
        match *self {
            Shape::HalfBall { radius } => (Vec3::new(-radius, -radius, 0.0), Vec3::new(radius, radius, radius)),
            Shape::Slab { radius, thickness } => {
                (Vec3::new(-radius, -radius, -thickness), Vec3::new(radius, radius, 0.0))
            }
            Shape::DomeShell { outer, .. } => (Vec3::new(-outer, -outer, 0.0), Vec3::new(outer, outer, outer)),
            Shape::Sphere { center, radius } => cube(center, radius),
            Shape::Ellipsoid { center, semi, .. } => cube(center, semi[0].max(semi[1]).max(semi[2])),
            Shape::Capsule { a, b, radius } => {
                let lo = Vec3::new(a.x.min(b.x), a.y.min(b.y), a.z.min(b.z));
                let hi = Vec3::new(a.x.max(b.x), a.y.max(b.y), a.z.max(b.z));
                (lo - Vec3::new(radius, radius, radius), hi + Vec3::new(radius, radius, radius))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub tissue: TissueType,
    pub shape: Shape,
    lo: Vec3,
    hi: Vec3,
}

impl Region {
    pub fn new(tissue: TissueType, shape: Shape) -> Self {
        let (lo, hi) = shape.bounds();
        Self { tissue, shape, lo, hi }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.lo.x
            && p.y >= self.lo.y
            && p.z >= self.lo.z
            && p.x <= self.hi.x
            && p.y <= self.hi.y
            && p.z <= self.hi.z
            && self.shape.contains(p)
    }
}

/// A vessel centerline piece; vessels are held at arterial temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VesselSegment {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
    pub level: u8,
}

#[derive(Debug, Clone)]
pub struct BreastPhantom {
    spec: PhantomSpec,
    /// Regions in descending priority.
    regions: Vec<Region>,
    vessels: Vec<VesselSegment>,
    points: [Vec3; MEASUREMENT_POINTS],
    tumor_center: Option<Vec3>,
}

impl BreastPhantom {
    pub fn spec(&self) -> &PhantomSpec {
        &self.spec
    }

    pub fn radius(&self) -> f64 {
        self.spec.radius_m
    }

    pub fn slab_thickness(&self) -> f64 {
        self.spec.slab_thickness_m
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn vessels(&self) -> &[VesselSegment] {
        &self.vessels
    }

    pub fn measurement_points(&self) -> &[Vec3; MEASUREMENT_POINTS] {
        &self.points
    }

    /// Outward surface normal at measurement point `i`.
    pub fn measurement_normal(&self, i: usize) -> Vec3 {
        self.points[i].normalized()
    }

    pub fn tumor_center(&self) -> Option<Vec3> {
        self.tumor_center
    }

    pub fn has_tumor(&self) -> bool {
        self.tumor_center.is_some()
    }

    /// Whether `p` lies in the closed domain (hemisphere plus slab).
    pub fn contains(&self, p: Vec3) -> bool {
        let r = self.spec.radius_m;
        let tol = 1e-12 * r;
        if p.z >= 0.0 {
            p.norm() <= r + tol
        } else {
            p.z >= -self.spec.slab_thickness_m - tol && (p.x * p.x + p.y * p.y).sqrt() <= r + tol
        }
    }

    /// Tissue at `p`, `None` outside the domain.
    pub fn tissue_at(&self, p: Vec3) -> Option<TissueType> {
        if !self.contains(p) {
            return None;
        }
        let r = self.spec.radius_m;
        // Points on (or within rounding of) the dome surface belong to the skin.
        if p.z >= 0.0 && p.norm() >= r - self.spec.skin_thickness_m {
            return Some(TissueType::Skin);
        }
        self.regions.iter().find(|reg| reg.contains(p)).map(|reg| reg.tissue).or(Some(
            if p.z >= 0.0 {
                TissueType::AdiposeTissue
            } else {
                TissueType::Muscle
            },
        ))
    }

    /// All regions containing `p`, highest priority first.
    pub fn regions_at(&self, p: Vec3) -> Vec<&Region> {
        self.regions.iter().filter(|r| r.contains(p)).collect()
    }

    /// Whether `p` is inside a vessel that is not overridden by a higher
    /// priority region.
    pub fn in_vessel(&self, p: Vec3) -> bool {
        self.tissue_at(p) == Some(TissueType::BloodVessel)
    }
}

/// Per-patient property table: shipped defaults at `frequency_hz`, perturbed
/// with the spec's variability and seed.
pub fn sample_patient_properties(spec: &PhantomSpec, frequency_hz: f64) -> PropertyTable {
    sample_properties(&PropertyTable::defaults(frequency_hz), &spec.variability, spec.seed)
}

// Geometry draws use their own stream so that property sampling and anatomy
// do not perturb each other.
const GEOMETRY_STREAM: u64 = 0x6765_6f6d_6574_7279;

fn random_unit_upper(rng: &mut ChaCha8Rng, min_elevation: f64, max_elevation: f64) -> Vec3 {
    let phi = rng.random_range(0.0..2.0 * PI);
    let el = rng.random_range(min_elevation..=max_elevation);
    Vec3::new(el.cos() * phi.cos(), el.cos() * phi.sin(), el.sin())
}

/// Two unit vectors orthogonal to `d` and to each other.
fn orthonormal_frame(d: Vec3) -> [Vec3; 3] {
    let d = d.normalized();
    let helper = if d.z.abs() < 0.9 { Vec3::new(0.0, 0.0, 1.0) } else { Vec3::new(1.0, 0.0, 0.0) };
    let u = d.cross(helper).normalized();
    let v = d.cross(u);
    [d, u, v]
}

pub fn build_phantom(spec: &PhantomSpec) -> Result<BreastPhantom, PhantomError> {
    spec.validate()?;
    let r = spec.radius_m;
    let skin = spec.skin_thickness_m;
    let a = &spec.anatomy;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ GEOMETRY_STREAM);
    let mut regions = Vec::new();

    regions.push(Region::new(
        TissueType::Skin,
        Shape::DomeShell {
            inner: r - skin,
            outer: r,
        },
    ));

    if a.glandular {
        regions.push(Region::new(
            TissueType::Nipple,
            Shape::Capsule {
                a: Vec3::new(0.0, 0.0, r - skin - a.nipple_length_m),
                b: Vec3::new(0.0, 0.0, r),
                radius: a.nipple_radius_m,
            },
        ));
    }

    let tumor_center = if spec.tumor.present {
        let (c, _) = tumor_center(spec);
        regions.push(Region::new(
            TissueType::Tumor,
            Shape::Sphere {
                center: c,
                radius: spec.tumor.radius_m,
            },
        ));
        Some(c)
    } else {
        None
    };

    let vessels = if a.vessels { vessel_tree(spec, &mut rng) } else { Vec::new() };
    for v in &vessels {
        regions.push(Region::new(
            TissueType::BloodVessel,
            Shape::Capsule {
                a: v.a,
                b: v.b,
                radius: v.radius,
            },
        ));
    }

    if a.glandular {
        let gland_center = Vec3::new(0.0, 0.0, 0.35 * r);
        let gland_semi = [0.6 * r, 0.6 * r, 0.33 * r];
        let nipple_base = Vec3::new(0.0, 0.0, r - skin - a.nipple_length_m);
        let in_gland = |p: Vec3| {
            let d = p - gland_center;
            (d.x / gland_semi[0]).powi(2) + (d.y / gland_semi[1]).powi(2) + (d.z / gland_semi[2]).powi(2) <= 1.0
        };

        let n_lobules = rng.random_range(a.lobule_count_min..=a.lobule_count_max);
        let mut lobules = Vec::with_capacity(n_lobules);
        while lobules.len() < n_lobules {
            let p = Vec3::new(
                rng.random_range(-1.0..1.0) * gland_semi[0],
                rng.random_range(-1.0..1.0) * gland_semi[1],
                rng.random_range(-1.0..1.0) * gland_semi[2],
            ) + gland_center;
            if !in_gland(p) || p.norm() > r - 0.015 || p.z < 0.01 {
                continue;
            }
            let long = rng.random_range(a.lobule_semi_axis_min_m..=a.lobule_semi_axis_max_m);
            let short = long * rng.random_range(0.5..0.8);
            let axes = orthonormal_frame(p - Vec3::new(0.0, 0.0, 0.0));
            lobules.push((p, axes, [long, short, short]));
        }
        // Ducts drain every lobule into the nipple.
        for (c, _, _) in &lobules {
            regions.push(Region::new(
                TissueType::Duct,
                Shape::Capsule {
                    a: *c,
                    b: nipple_base,
                    radius: a.duct_radius_m,
                },
            ));
        }
        for (center, axes, semi) in lobules {
            regions.push(Region::new(TissueType::BreastLobule, Shape::Ellipsoid { center, axes, semi }));
        }
        for _ in 0..a.connective_strands {
            let dir = random_unit_upper(&mut rng, 0.15, 1.2);
            // Where the ray from the gland center leaves the gland ellipsoid.
            let inv = (dir.x / gland_semi[0]).powi(2) + (dir.y / gland_semi[1]).powi(2) + (dir.z / gland_semi[2]).powi(2);
            let start = gland_center + dir * (1.0 / inv.sqrt());
            // Straight out to just beneath the skin.
            let b_coef = start.dot(dir);
            let reach = r - skin;
            let t = -b_coef + (b_coef * b_coef - start.norm_sq() + reach * reach).sqrt();
            regions.push(Region::new(
                TissueType::ConnectiveTissue,
                Shape::Capsule {
                    a: start,
                    b: start + dir * t.max(0.0),
                    radius: a.connective_radius_m,
                },
            ));
        }
        regions.push(Region::new(
            TissueType::MammaryGland,
            Shape::Ellipsoid {
                center: gland_center,
                axes: [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)],
                semi: gland_semi,
            },
        ));
    }

    regions.push(Region::new(TissueType::AdiposeTissue, Shape::HalfBall { radius: r }));
    regions.push(Region::new(
        TissueType::Muscle,
        Shape::Slab {
            radius: r,
            thickness: spec.slab_thickness_m,
        },
    ));

    Ok(BreastPhantom {
        spec: spec.clone(),
        regions,
        vessels,
        points: measurement_points_with(r, &spec.measurement),
        tumor_center,
    })
}

/// Three-level branching tree rising from the chest wall.
fn vessel_tree(spec: &PhantomSpec, rng: &mut ChaCha8Rng) -> Vec<VesselSegment> {
    let r = spec.radius_m;
    let a = &spec.anatomy;
    let max_reach = r - a.vessel_skin_clearance_m;
    let clamp_inside = |from: Vec3, to: Vec3| -> Vec3 {
        let mut to = to;
        to.z = to.z.max(0.01 * r);
        if to.norm() > max_reach {
            // Pull the endpoint back along the segment until it clears the skin.
            let mut lo = 0.0;
            let mut hi = 1.0;
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if from.lerp(to, mid).norm() > max_reach {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            to = from.lerp(to, lo);
        }
        to
    };

    let mut segs = Vec::new();
    let rho = rng.random_range(0.0..0.25 * r);
    let phi = rng.random_range(0.0..2.0 * PI);
    let root = Vec3::new(rho * phi.cos(), rho * phi.sin(), 0.0);
    let trunk_top = clamp_inside(root, root + Vec3::new(0.0, 0.0, 0.35 * r));
    let r1 = a.vessel_radius_m;
    segs.push(VesselSegment {
        a: root,
        b: trunk_top,
        radius: r1,
        level: 1,
    });

    let r2 = r1 * a.vessel_radius_ratio;
    let r3 = r2 * a.vessel_radius_ratio;
    let phi0 = rng.random_range(0.0..2.0 * PI);
    for k in 0..3 {
        let az = phi0 + k as f64 * 2.0 * PI / 3.0 + rng.random_range(-0.3..0.3);
        let el: f64 = rng.random_range(0.35..0.9);
        let dir = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
        let mid = clamp_inside(trunk_top, trunk_top + dir * (0.3 * r));
        segs.push(VesselSegment {
            a: trunk_top,
            b: mid,
            radius: r2,
            level: 2,
        });
        for side in [-1.0, 1.0] {
            let az3: f64 = az + side * rng.random_range(0.3..0.7);
            let el3 = (el + rng.random_range(-0.2..0.3_f64)).clamp(0.1, 1.3);
            let dir3 = Vec3::new(el3.cos() * az3.cos(), el3.cos() * az3.sin(), el3.sin());
            let end = clamp_inside(mid, mid + dir3 * (0.25 * r));
            segs.push(VesselSegment {
                a: mid,
                b: end,
                radius: r3,
                level: 3,
            });
        }
    }
    segs
}
