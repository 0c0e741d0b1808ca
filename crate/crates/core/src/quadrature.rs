//! Grundmann–Möller cubature on tetrahedra.

use crate::geometry::{tet_signed_volume, Vec3};

/// Barycentric points and weights exact for polynomials of degree `2s + 1`.
/// Weights sum to one (multiply by the element volume).
#[derive(Debug, Clone)]
pub struct TetRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// All compositions of `total` into four nonnegative parts.
fn compositions4(total: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..=total {
        for b in 0..=total - a {
            for c in 0..=total - a - b {
                out.push([a, b, c, total - a - b - c]);
            }
        }
    }
    out
}

impl TetRule {
    pub fn grundmann_moeller(s: usize) -> Self {
        let n = 3usize;
        let d = 2 * s + 1;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for i in 0..=s {
            let denom = (d + n - 2 * i) as f64;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            // Reference simplex has volume 1/3!, so scale by 3! to normalise.
            let w = sign * 2f64.powi(-2 * s as i32) * denom.powi(d as i32) / (factorial(i) * factorial(d + n - i))
                * factorial(n);
            for beta in compositions4(s - i) {
                points.push(beta.map(|b| (2 * b + 1) as f64 / denom));
                weights.push(w);
            }
        }
        Self { points, weights }
    }

    /// Integral of `f` over the tetrahedron with vertices `p`.
    pub fn integrate(&self, p: [Vec3; 4], mut f: impl FnMut(Vec3, [f64; 4]) -> f64) -> f64 {
        let vol = tet_signed_volume(p[0], p[1], p[2], p[3]).abs();
        let mut acc = 0.0;
        for (lam, w) in self.points.iter().zip(&self.weights) {
            let x = p[0] * lam[0] + p[1] * lam[1] + p[2] * lam[2] + p[3] * lam[3];
            acc += w * f(x, *lam);
        }
        acc * vol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // ∫ λ0^a λ1^b λ2^c λ3^d dV = 6V a! b! c! d! / (a+b+c+d+3)!
    fn exact_monomial(e: [usize; 4], vol: f64) -> f64 {
        6.0 * vol * e.iter().map(|&k| factorial(k)).product::<f64>() / factorial(e.iter().sum::<usize>() + 3)
    }

    #[test]
    fn weights_sum_to_one() {
        for s in 0..5 {
            let r = TetRule::grundmann_moeller(s);
            let sum: f64 = r.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "s = {s}: {sum}");
        }
    }

    #[test]
    fn exact_for_monomials_up_to_degree() {
        let p = [
            Vec3::new(0.1, 0.0, 0.2),
            Vec3::new(1.3, 0.2, 0.0),
            Vec3::new(0.2, 0.9, 0.1),
            Vec3::new(0.3, 0.4, 1.1),
        ];
        let vol = tet_signed_volume(p[0], p[1], p[2], p[3]).abs();
        for s in 0..4 {
            let rule = TetRule::grundmann_moeller(s);
            let deg = 2 * s + 1;
            for total in 0..=deg {
                for e in compositions4(total) {
                    let q = rule.integrate(p, |_, l| (0..4).map(|k| l[k].powi(e[k] as i32)).product());
                    let exact = exact_monomial(e, vol);
                    assert!((q - exact).abs() < 1e-12 * exact.abs().max(1e-3), "s={s} e={e:?}: {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn low_degree_rule_misses_higher_monomials() {
        let p = [Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)];
        let rule = TetRule::grundmann_moeller(0);
        let q = rule.integrate(p, |_, l| l[0] * l[0]);
        assert!((q - exact_monomial([2, 0, 0, 0], 1.0 / 6.0)).abs() > 1e-6);
    }
}
