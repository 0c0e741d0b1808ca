//! Closed-form power density: exponential decay from the antenna with the
//! attenuation of the straight-line-averaged medium.

use crate::geometry::Vec3;
use crate::phantom::BreastPhantom;
use crate::tissue::{PropertyTable, TissueProperties, TissueType};

use super::fdtd::attenuation_constant;

/// Properties at `p`; points that round outside the domain count as skin.
pub(crate) fn properties_at<'a>(phantom: &BreastPhantom, props: &'a PropertyTable, p: Vec3) -> &'a TissueProperties {
    &props[phantom.tissue_at(p).unwrap_or(TissueType::Skin)]
}

/// Mean σ, ε and μ over `samples` midpoints of the segment `a → b`.
pub fn path_average(phantom: &BreastPhantom, props: &PropertyTable, a: Vec3, b: Vec3, samples: usize) -> (f64, f64, f64) {
    let mut s = (0.0, 0.0, 0.0);
    for k in 0..samples {
        let p = a.lerp(b, (k as f64 + 0.5) / samples as f64);
        let pr = properties_at(phantom, props, p);
        s.0 += pr.sigma;
        s.1 += pr.eps;
        s.2 += pr.mu;
    }
    let n = samples as f64;
    (s.0 / n, s.1 / n, s.2 / n)
}

/// `P_d(r) = σ(r) exp(−2 |r − p| / δ)` at every node, `1/δ` being the
/// attenuation constant of the path-averaged medium.
pub fn power_density_analytic_nodes(
    phantom: &BreastPhantom,
    props: &PropertyTable,
    nodes: &[Vec3],
    antenna: Vec3,
    frequency_hz: f64,
    samples: usize,
) -> Vec<f64> {
    nodes
        .iter()
        .map(|&r| {
            let d = r.distance(antenna);
            let (sigma, eps, mu) = path_average(phantom, props, antenna, r, samples);
            let alpha = attenuation_constant(sigma, eps, mu, frequency_hz);
            properties_at(phantom, props, r).sigma * (-2.0 * alpha * d).exp()
        })
        .collect()
}
