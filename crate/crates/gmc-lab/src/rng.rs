//! Counter-based random numbers.
//!
//! All randomness in the crate is a pure function of (seed, counters): noise
//! cells hash their space-time index, path samplers walk a per-path stream
//! derived from the path index. Nothing is shared between workers, so results
//! are bit-identical for any worker count or scheduling order.
//!
//! Uniform-to-Gaussian conversion uses the Wichura AS241 inverse normal CDF,
//! which is a fixed rational approximation and therefore reproducible across
//! platforms (no ziggurat tables, no libm dispatch differences).

// AS241 coefficients are kept at their published precision.
#![allow(clippy::excessive_precision)]

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. Strong avalanche on a 64-bit state.
#[inline(always)]
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combine a seed with a sequence of words into one well-mixed 64-bit value.
#[inline]
pub fn mix_words(seed: u64, words: &[u64]) -> u64 {
    let mut h = mix(seed);
    for &w in words {
        h = mix(h ^ w.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    }
    h
}

/// Derive a child seed for a named subsystem. Domain tags keep the noise
/// grid, the eta copy, path streams and pair samplers on disjoint streams.
pub fn derive_seed(master: u64, domain: u64, index: u64) -> u64 {
    mix_words(master, &[domain, index])
}

pub mod domain {
    pub const NOISE: u64 = 0x4E_4F49_5345;
    pub const ETA: u64 = 0x45_5441;
    pub const PATHS: u64 = 0x5041_5448;
    pub const PAIRS: u64 = 0x5041_4952;
    pub const REALIZATION: u64 = 0x5245_414C;
}

/// Map a u64 to the open interval (0,1); 53-bit resolution, never 0 or 1.
#[inline(always)]
pub fn u64_to_unit_open(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Standard normal draw addressed by (seed, counter words).
#[inline]
pub fn gaussian_at(seed: u64, words: &[u64]) -> f64 {
    inverse_normal_cdf(u64_to_unit_open(mix_words(seed, words)))
}

/// Sequential stream with a SplitMix64 engine, used where draws are consumed
/// in order (Brownian increments). Streams from distinct ids are independent.
#[derive(Clone, Debug)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn new(seed: u64, id: u64) -> Self {
        Stream {
            state: mix_words(seed, &[id]),
        }
    }

    #[inline(always)]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    #[inline(always)]
    pub fn next_unit_open(&mut self) -> f64 {
        u64_to_unit_open(self.next_u64())
    }

    #[inline(always)]
    pub fn next_gaussian(&mut self) -> f64 {
        inverse_normal_cdf(self.next_unit_open())
    }

    /// Uniform index in [0, n). Modulo bias is < n/2^64, irrelevant here.
    #[inline(always)]
    pub fn next_index(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Wichura's AS241 (PPND16): inverse of the standard normal CDF, accurate to
/// about 1e-16 over (0,1).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly_a(r) / poly_b(r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly_c(r) / poly_d(r)
    } else {
        let r = r - 5.0;
        poly_e(r) / poly_f(r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

#[inline(always)]
fn horner(r: f64, c: &[f64]) -> f64 {
    let mut acc = c[c.len() - 1];
    for &k in c.iter().rev().skip(1) {
        acc = acc * r + k;
    }
    acc
}

fn poly_a(r: f64) -> f64 {
    horner(
        r,
        &[
            3.3871328727963666080,
            1.3314166789178437745e2,
            1.9715909503065514427e3,
            1.3731693765509461125e4,
            4.5921953931549871457e4,
            6.7265770927008700853e4,
            3.3430575583588128105e4,
            2.5090809287301226727e3,
        ],
    )
}

fn poly_b(r: f64) -> f64 {
    horner(
        r,
        &[
            1.0,
            4.2313330701600911252e1,
            6.8718700749205790830e2,
            5.3941960214247511077e3,
            2.1213794301586595867e4,
            3.9307895800092710610e4,
            2.8729085735721942674e4,
            5.2264952788528545610e3,
        ],
    )
}

fn poly_c(r: f64) -> f64 {
    horner(
        r,
        &[
            1.42343711074968357734,
            4.63033784615654529590,
            5.76949722146069140550,
            3.64784832476320460504,
            1.27045825245236838258,
            2.41780725177450611770e-1,
            2.27238449892691845833e-2,
            7.74545014278341407640e-4,
        ],
    )
}

fn poly_d(r: f64) -> f64 {
    horner(
        r,
        &[
            1.0,
            2.05319162663775882187,
            1.67638483018380384940,
            6.89767334985100004550e-1,
            1.48103976427480074590e-1,
            1.51986665636164571966e-2,
            5.47593808499534494600e-4,
            1.05075007164441684324e-9,
        ],
    )
}

fn poly_e(r: f64) -> f64 {
    horner(
        r,
        &[
            6.65790464350110377720,
            5.46378491116411436990,
            1.78482653991729133580,
            2.96560571828504891230e-1,
            2.65321895265761230930e-2,
            1.24266094738807843860e-3,
            2.71155556874348757815e-5,
            2.01033439929228813265e-7,
        ],
    )
}

fn poly_f(r: f64) -> f64 {
    horner(
        r,
        &[
            1.0,
            5.99832206555887937690e-1,
            1.36929880922735805310e-1,
            1.48753612908506148525e-2,
            7.86869131145613259100e-4,
            1.84631831751005468180e-5,
            1.42151175831644588870e-7,
            2.04426310338993978564e-15,
        ],
    )
}
