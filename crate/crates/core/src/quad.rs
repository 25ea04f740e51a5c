//! Quadrature rules used by the independent oracles: Gauss-Hermite for
//! normal expectations and adaptive Gauss-Kronrod (7/15) on intervals.

use std::f64::consts::PI;

/// Gauss-Hermite rule for integrals against `exp(-x^2)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes by Newton iteration on the orthonormal Hermite recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let pim4 = PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        GaussHermite { nodes: x, weights: w }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Points and probability weights approximating N(0, sigma^2). A zero
    /// sigma collapses to the single point 0.
    pub fn normal_points(&self, sigma: f64) -> Vec<(f64, f64)> {
        if sigma == 0.0 {
            return vec![(0.0, 1.0)];
        }
        let scale = std::f64::consts::SQRT_2 * sigma;
        let norm = 1.0 / PI.sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| (scale * x, w * norm))
            .collect()
    }

    /// E[f(eps)] for eps ~ N(0, sigma^2).
    pub fn normal_expectation<F: Fn(f64) -> f64>(&self, sigma: f64, f: F) -> f64 {
        self.normal_points(sigma).iter().map(|&(e, w)| w * f(e)).sum()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        resk += WGK[j] * s;
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    (resk * h, ((resk - resg) * h).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Globally adaptive Gauss-Kronrod on `[a, b]`: bisects the interval with
/// the largest error estimate until the summed estimate is below
/// `max(abs_tol, rel_tol * |value|)`.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Integral {
    let mut parts = vec![{
        let (v, e) = kronrod15(&f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..4000 {
        let value: f64 = parts.iter().map(|p| p.2).sum();
        let error: f64 = parts.iter().map(|p| p.3).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            break;
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = kronrod15(&f, lo, mid);
        let (v2, e2) = kronrod15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    // fixed summation order keeps the result independent of refinement history
    parts.sort_by(|x, y| x.0.total_cmp(&y.0));
    Integral {
        value: parts.iter().map(|p| p.2).sum(),
        error: parts.iter().map(|p| p.3).sum(),
    }
}

/// Integral over `[0, inf)` of a decaying integrand: adaptive pieces on
/// `[0, L]`, `[L, 2L]`, `[2L, 4L]`, ... until a piece is negligible.
/// Returns `None` if the tail never becomes negligible.
pub fn adaptive_half_line<F: Fn(f64) -> f64>(f: F, first_len: f64, rel_tol: f64) -> Option<Integral> {
    let mut lo = 0.0;
    let mut hi = first_len;
    let mut total = Integral { value: 0.0, error: 0.0 };
    for _ in 0..64 {
        let piece = adaptive(&f, lo, hi, 0.0, rel_tol);
        total.value += piece.value;
        total.error += piece.error;
        if piece.value.abs() <= 1e-17 * total.value.abs() && total.value != 0.0 {
            return Some(total);
        }
        lo = hi;
        hi *= 2.0;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        let gh = GaussHermite::new(64);
        assert_eq!(gh.len(), 64);
        let s: f64 = gh.weights.iter().sum();
        assert!((s - PI.sqrt()).abs() < 1e-13);
        // E[eps^2] and E[exp(c eps)] for eps ~ N(0, 0.3^2)
        let v = gh.normal_expectation(0.3, |e| e * e);
        assert!((v - 0.09).abs() < 1e-14);
        let m = gh.normal_expectation(0.3, |e| (2.5 * e).exp());
        assert!((m - (0.5 * 2.5f64.powi(2) * 0.09).exp()).abs() < 1e-13);
        let w = gh.normal_expectation(0.0, |e| e + 1.0);
        assert_eq!(w, 1.0);
    }

    #[test]
    fn hermite_small_orders() {
        let gh = GaussHermite::new(2);
        let expected = 0.5f64.sqrt();
        assert!((gh.nodes[0].abs() - expected).abs() < 1e-14);
        let gh3 = GaussHermite::new(3);
        assert!(gh3.nodes[1].abs() < 1e-15);
    }

    #[test]
    fn kronrod_is_exact_on_polynomials() {
        for k in 0..=22 {
            let r = adaptive(|x: f64| x.powi(k), 0.0, 1.0, 0.0, 1e-15);
            assert!((r.value - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "k = {k}");
        }
    }

    #[test]
    fn half_line_exponential() {
        let r = adaptive_half_line(|x: f64| 0.3 * (-0.3 * x).exp(), 40.0 / 0.3, 1e-13).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(adaptive_half_line(|x: f64| (0.01 * x).exp(), 1.0, 1e-10).is_none());
    }
}
