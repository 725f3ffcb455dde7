//! The spatial mollifier and its self-convolution.
//!
//! The mollifier is the standard bump `c_d * exp(-1/(1-(2|x|)^2))` supported
//! in the ball of radius 1/2, normalized to unit mass by quadrature. Its
//! self-convolution `V = kappa * kappa` (supported in the unit ball) is the
//! spatial covariance of the smoothed field; `V(0)` is the variance density
//! that enters every renormalization below. Both functions are tabulated on a
//! radial grid and evaluated by linear interpolation; the self-convolution of
//! a bump has no elementary closed form.

use crate::error::{Error, Result};
use crate::math::sphere_area;

pub const SUPPORT_RADIUS: f64 = 0.5;
const MAX_GRID_SPACING: f64 = 1.0 / 16.0;
pub const MASS_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct Kernel {
    dim: usize,
    h: f64,
    /// kappa at radii 0, h, 2h, ..., SUPPORT_RADIUS
    kappa_table: Vec<f64>,
    /// V at radii 0, h, 2h, ..., 2 * SUPPORT_RADIUS
    v_table: Vec<f64>,
    v0: f64,
    norm_const: f64,
}

#[inline(always)]
fn bump_profile(s: f64) -> f64 {
    if s >= SUPPORT_RADIUS {
        return 0.0;
    }
    let u = 2.0 * s;
    (-1.0 / (1.0 - u * u)).exp()
}

/// Build the mollifier tables for dimension `d` at radial grid spacing `h`.
pub fn build_mollifier(d: usize, h: f64) -> Result<Kernel> {
    if d == 0 {
        return Err(Error::invalid("mollifier dimension must be >= 1"));
    }
    if !(h > 0.0) || h > MAX_GRID_SPACING {
        return Err(Error::invalid(format!(
            "kernel grid spacing {h} too coarse: the bump needs h <= 1/16 to be resolved"
        )));
    }
    // Snap the spacing so the support boundary lands exactly on a grid node.
    let n_half = (SUPPORT_RADIUS / h).ceil() as usize;
    let h = SUPPORT_RADIUS / n_half as f64;

    // Unnormalized mass by composite trapezoid with the spherical volume
    // element; the bump is flat at both endpoints so the rule superconverges.
    let radial_weight = |s: f64| if d == 1 { 1.0 } else { s.powi(d as i32 - 1) };
    let mut mass = 0.0;
    for k in 0..=n_half {
        let s = k as f64 * h;
        let w = if k == 0 || k == n_half { 0.5 } else { 1.0 };
        mass += w * bump_profile(s) * radial_weight(s);
    }
    mass *= h * sphere_area(d);
    let c = 1.0 / mass;

    let kappa_table: Vec<f64> = (0..=n_half).map(|k| c * bump_profile(k as f64 * h)).collect();

    let v_table = convolve_radial(d, h, n_half, c);
    let v0 = v_table[0];

    Ok(Kernel {
        dim: d,
        h,
        kappa_table,
        v_table,
        v0,
        norm_const: c,
    })
}

/// Radial table of V = kappa * kappa at radii 0..=1 step h, by trapezoid
/// quadrature. In d = 1 this is a line integral; in d >= 2 the convolution at
/// distance z reduces to a 2-d integral over (axial offset, transverse
/// radius) with the S^{d-2} factor.
fn convolve_radial(d: usize, h: f64, n_half: usize, c: f64) -> Vec<f64> {
    let n_full = 2 * n_half;
    let kap = |s: f64| c * bump_profile(s);
    let mut table = Vec::with_capacity(n_full + 1);
    for zi in 0..=n_full {
        let z = zi as f64 * h;
        let mut acc = 0.0;
        if d == 1 {
            for k in -(n_half as i64)..=(n_half as i64) {
                let y = k as f64 * h;
                let w = if k.unsigned_abs() as usize == n_half { 0.5 } else { 1.0 };
                acc += w * kap(y.abs()) * kap((z - y).abs());
            }
            acc *= h;
        } else {
            let s_transverse = sphere_area(d - 1);
            for k in -(n_half as i64)..=(n_half as i64) {
                let y1 = k as f64 * h;
                let wy = if k.unsigned_abs() as usize == n_half { 0.5 } else { 1.0 };
                let mut inner = 0.0;
                for m in 0..=n_half {
                    let rho = m as f64 * h;
                    let wr = if m == 0 || m == n_half { 0.5 } else { 1.0 };
                    let rw = if d == 2 { 1.0 } else { rho.powi(d as i32 - 2) };
                    inner += wr
                        * rw
                        * kap((y1 * y1 + rho * rho).sqrt())
                        * kap(((z - y1) * (z - y1) + rho * rho).sqrt());
                }
                acc += wy * inner;
            }
            acc *= h * h * s_transverse;
        }
        table.push(acc);
    }
    table
}

#[inline(always)]
fn interp(table: &[f64], inv_h: f64, s: f64) -> f64 {
    let x = s * inv_h;
    let k = x as usize;
    if k + 1 >= table.len() {
        return 0.0;
    }
    let frac = x - k as f64;
    table[k] + frac * (table[k + 1] - table[k])
}

impl Kernel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid_spacing(&self) -> f64 {
        self.h
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    /// kappa as a function of the radius, by linear interpolation.
    #[inline(always)]
    pub fn kappa_radial(&self, s: f64) -> f64 {
        if s >= SUPPORT_RADIUS {
            return 0.0;
        }
        interp(&self.kappa_table, 1.0 / self.h, s)
    }

    /// V as a function of the radius; zero for s >= 1.
    #[inline(always)]
    pub fn v_radial(&self, s: f64) -> f64 {
        if s >= 2.0 * SUPPORT_RADIUS {
            return 0.0;
        }
        if s == 0.0 {
            return self.v0;
        }
        interp(&self.v_table, 1.0 / self.h, s)
    }

    pub fn eval_kappa(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.kappa_radial(norm(x))
    }

    pub fn eval_v(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.v_radial(norm(x))
    }

    /// kappa_eps(x) = eps^{-d} kappa(x/eps), the mollifier at scale eps.
    #[inline(always)]
    pub fn kappa_scaled_radial(&self, s: f64, eps: f64) -> f64 {
        self.kappa_radial(s / eps) * eps.powi(-(self.dim as i32))
    }

    /// (kappa_eps * kappa_eps)(0) = eps^{-d} V(0).
    pub fn v0_scaled(&self, eps: f64) -> f64 {
        self.v0 * eps.powi(-(self.dim as i32))
    }

    /// Total mass of the tabulated kappa by the same radial quadrature used
    /// during construction; equals 1 up to rounding.
    pub fn mass(&self) -> f64 {
        let n = self.kappa_table.len() - 1;
        let mut acc = 0.0;
        for (k, &v) in self.kappa_table.iter().enumerate() {
            let s = k as f64 * self.h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            let rw = if self.dim == 1 { 1.0 } else { s.powi(self.dim as i32 - 1) };
            acc += w * v * rw;
        }
        acc * self.h * sphere_area(self.dim)
    }

    /// (radius, V) rows for inspection.
    pub fn v_table_rows(&self) -> Vec<(f64, f64)> {
        self.v_table
            .iter()
            .enumerate()
            .map(|(k, &v)| (k as f64 * self.h, v))
            .collect()
    }
}

#[inline(always)]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent high-resolution trapezoid quadrature of int kappa^2 with
    /// its own normalization, used as the oracle for V(0).
    fn v0_oracle(d: usize, n: usize) -> f64 {
        let h = SUPPORT_RADIUS / n as f64;
        let rw = |s: f64| if d == 1 { 1.0 } else { s.powi(d as i32 - 1) };
        let mut mass = 0.0;
        let mut sq = 0.0;
        for k in 0..=n {
            let s = k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            mass += w * bump_profile(s) * rw(s);
        }
        mass *= h * sphere_area(d);
        let c = 1.0 / mass;
        for k in 0..=n {
            let s = k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            sq += w * (c * bump_profile(s)).powi(2) * rw(s);
        }
        sq * h * sphere_area(d)
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_mollifier(0, 1.0 / 64.0).is_err());
        assert!(build_mollifier(1, 0.25).is_err());
    }

    #[test]
    fn outside_support_is_zero() {
        let k = build_mollifier(1, 1.0 / 64.0).unwrap();
        assert_eq!(k.eval_kappa(&[0.6]), 0.0);
        assert_eq!(k.kappa_radial(0.5), 0.0);
        assert_eq!(k.eval_v(&[1.2]), 0.0);
    }

    #[test]
    fn unit_mass() {
        for d in 1..=4 {
            let k = build_mollifier(d, 1.0 / 64.0).unwrap();
            assert!((k.mass() - 1.0).abs() < MASS_TOLERANCE, "d={d} mass={}", k.mass());
        }
    }

    #[test]
    fn v0_matches_high_resolution_quadrature() {
        // oracle at h = 1/1024 per the stated tolerance of 3 significant digits
        for d in [1usize, 3] {
            let k = build_mollifier(d, 1.0 / 64.0).unwrap();
            let oracle = v0_oracle(d, 512); // 512 intervals over [0, 1/2] = h 1/1024
            assert_relative_eq!(k.v0(), oracle, max_relative = 1e-3);
        }
    }

    #[test]
    fn v_matches_direct_convolution_quadrature_d1() {
        let k = build_mollifier(1, 1.0 / 64.0).unwrap();
        // oracle: brute-force int kappa(0.25 - y) kappa(y) dy on a fine grid
        let n: i64 = 4096;
        let h = 1.0 / n as f64;
        let mut mass = 0.0;
        for i in -n / 2..=n / 2 {
            let w = if i.abs() == n / 2 { 0.5 } else { 1.0 };
            mass += w * bump_profile((i as f64 * h).abs()) * h;
        }
        let c = 1.0 / mass;
        let z = 0.25;
        let mut acc = 0.0;
        for i in -n / 2..=n / 2 {
            let y = i as f64 * h;
            acc += c * bump_profile(y.abs()) * c * bump_profile((z - y).abs()) * h;
        }
        assert_relative_eq!(k.eval_v(&[z]), acc, max_relative = 1e-3);
    }

    #[test]
    fn peak_at_origin_and_symmetry() {
        let k = build_mollifier(2, 1.0 / 64.0).unwrap();
        let peak = k.eval_kappa(&[0.0, 0.0]);
        assert!(peak > 0.0);
        for i in 1..32 {
            let s = i as f64 * 0.5 / 32.0;
            assert!(k.kappa_radial(s) <= peak);
        }
        assert_eq!(k.eval_kappa(&[0.3, 0.1]), k.eval_kappa(&[-0.3, -0.1]));
        assert_eq!(k.eval_v(&[0.7, 0.2]), k.eval_v(&[-0.7, -0.2]));
    }

    #[test]
    fn v_bounded_by_v0_on_random_points() {
        let k = build_mollifier(3, 1.0 / 32.0).unwrap();
        let mut stream = crate::rng::Stream::new(99, 0);
        for _ in 0..10_000 {
            let x = [
                3.0 * (stream.next_unit_open() - 0.5),
                3.0 * (stream.next_unit_open() - 0.5),
                3.0 * (stream.next_unit_open() - 0.5),
            ];
            let v = k.eval_v(&x);
            assert!(v >= 0.0 && v <= k.v0() + 1e-15, "V({x:?}) = {v}");
        }
        assert_eq!(k.v_radial(0.0), k.v0());
    }

    #[test]
    fn refinement_changes_v0_below_one_percent() {
        for d in [1usize, 3] {
            let coarse = build_mollifier(d, 1.0 / 32.0).unwrap();
            let fine = build_mollifier(d, 1.0 / 64.0).unwrap();
            let rel = (coarse.v0() - fine.v0()).abs() / fine.v0();
            assert!(rel < 0.01, "d={d} rel={rel}");
        }
    }

    #[test]
    fn scaled_kernel_v0() {
        let k = build_mollifier(3, 1.0 / 32.0).unwrap();
        assert_relative_eq!(k.v0_scaled(0.5), k.v0() * 8.0, epsilon = 1e-12);
        assert_relative_eq!(
            k.kappa_scaled_radial(0.1, 0.5),
            8.0 * k.kappa_radial(0.2),
            epsilon = 1e-12
        );
    }
}
