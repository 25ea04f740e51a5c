//! Counter-based random numbers.
//!
//! Every draw is a pure function of `(key, counter)`, so a stream can be
//! split into chunks and evaluated in any order or thread layout with the
//! same result. The construction, for anyone re-implementing it:
//!
//! * `mix64` is the SplitMix64 finalizer
//!   (`z ^= z >> 30; z *= 0xbf58476d1ce4e5b9; z ^= z >> 27; z *= 0x94d049bb133111eb; z ^= z >> 31`).
//! * A stream key is `mix64(seed ^ mix64(fnv1a64(label) ^ mix64(index + 1)))`.
//! * Word `i` of a stream is `mix64(key + (i + 1) * 0x9e3779b97f4a7c15)` (wrapping).
//! * Uniforms are `((word >> 11) + 0.5) * 2^-53`, always inside (0, 1).
//! * Standard normals use Acklam's rational approximation of the inverse
//!   normal CDF (relative error below 1.15e-9), without refinement, so the
//!   mapping needs only `sqrt` and `ln`.
//! * Exponentials are `-ln(u) / rate`.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a64(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Key of the stream identified by a user seed, a purpose label and a
/// replica index.
pub fn derive_key(seed: u64, label: &str, index: u64) -> u64 {
    mix64(seed ^ mix64(fnv1a64(label) ^ mix64(index.wrapping_add(1))))
}

/// A keyed stream of random words addressed by position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stream {
    key: u64,
}

impl Stream {
    pub fn new(seed: u64, label: &str, index: u64) -> Self {
        Stream {
            key: derive_key(seed, label, index),
        }
    }

    #[inline]
    pub fn word(&self, i: u64) -> u64 {
        mix64(self.key.wrapping_add(i.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    #[inline]
    pub fn uniform(&self, i: u64) -> f64 {
        ((self.word(i) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn normal(&self, i: u64) -> f64 {
        inverse_normal_cdf(self.uniform(i))
    }

    #[inline]
    pub fn exponential(&self, i: u64, rate: f64) -> f64 {
        -self.uniform(i).ln() / rate
    }

    /// Sequential cursor over this stream starting at position 0.
    pub fn cursor(self) -> Cursor {
        Cursor { stream: self, pos: 0 }
    }
}

/// Sequential reader over a [`Stream`].
#[derive(Debug, Clone)]
pub struct Cursor {
    stream: Stream,
    pos: u64,
}

impl Cursor {
    pub fn uniform(&mut self) -> f64 {
        let u = self.stream.uniform(self.pos);
        self.pos += 1;
        u
    }

    pub fn normal(&mut self) -> f64 {
        inverse_normal_cdf(self.uniform())
    }

    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform().ln() / rate
    }

    /// Uniform index in 0..n.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.38357751867269e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

/// Acklam's approximation to the standard normal quantile function.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const P_LOW: f64 = 0.02425;
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}
