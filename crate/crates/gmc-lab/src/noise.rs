//! Discretized space-time white noise on an unbounded spatial domain.
//!
//! A cell at time index `i` and spatial multi-index `j` (cells of side `dx`,
//! centers at `(j + 1/2) dx`) carries an independent Gaussian of variance
//! `1/(dt dx^d)`, the white-noise density averaged over the cell. Cell values
//! are generated on demand by hashing `(seed, i, j)`, so no spatial box has to
//! be fixed in advance and escaping paths never hit a wall.
//!
//! `FlowedNoise` is the Ornstein-Uhlenbeck interpolation between the base
//! field and an independent copy `eta`: the time-rescaled copy that appears in
//! the flow definition is replaced by the distributionally equivalent
//! `sqrt(1 - e^{-2r}) eta`, which keeps both fields on one time grid.

use crate::error::{Error, Result};
use crate::kernel::{Kernel, SUPPORT_RADIUS};
use crate::rng;

#[derive(Clone, Debug)]
pub struct NoiseGrid {
    dim: usize,
    dt: f64,
    dx: f64,
    seed: u64,
    horizon_steps: usize,
    /// (dt * dx^d)^{-1/2}, the per-cell standard deviation.
    cell_sd: f64,
}

impl NoiseGrid {
    pub fn new(dim: usize, dt: f64, dx: f64, seed: u64, horizon_steps: usize) -> Result<Self> {
        if dim == 0 || dim > 4 {
            return Err(Error::invalid("noise dimension must be in 1..=4"));
        }
        if !(dt > 0.0) || !(dx > 0.0) {
            return Err(Error::invalid("noise grid steps must be positive"));
        }
        if dx > SUPPORT_RADIUS / 4.0 + 1e-12 {
            return Err(Error::invalid(format!(
                "spatial cell size {dx} too coarse: need dx <= {} so the mollifier spans >= 8 cells per axis",
                SUPPORT_RADIUS / 4.0
            )));
        }
        let cell_sd = 1.0 / (dt * dx.powi(dim as i32)).sqrt();
        Ok(NoiseGrid {
            dim,
            dt,
            dx,
            seed,
            horizon_steps,
            cell_sd,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn horizon_steps(&self) -> usize {
        self.horizon_steps
    }

    pub fn cell_variance(&self) -> f64 {
        self.cell_sd * self.cell_sd
    }

    fn check_step(&self, i: usize) -> Result<()> {
        if i >= self.horizon_steps {
            return Err(Error::TimeIndexOutOfHorizon {
                index: i,
                horizon: self.horizon_steps,
            });
        }
        Ok(())
    }

    /// The Gaussian value of cell (i, j), scaled by (dt dx^d)^{-1/2}.
    pub fn cell_gaussian(&self, i: usize, j: &[i64]) -> Result<f64> {
        self.check_step(i)?;
        debug_assert_eq!(j.len(), self.dim);
        Ok(self.cell_gaussian_unchecked(i, j))
    }

    #[inline(always)]
    pub(crate) fn cell_gaussian_unchecked(&self, i: usize, j: &[i64]) -> f64 {
        let mut words = [0u64; 5];
        words[0] = i as u64;
        for (k, &c) in j.iter().enumerate() {
            words[k + 1] = c as u64;
        }
        self.cell_sd * rng::gaussian_at(self.seed, &words[..=j.len()])
    }

    /// Center coordinate of cell index `c` along one axis.
    #[inline(always)]
    pub fn cell_center(&self, c: i64) -> f64 {
        (c as f64 + 0.5) * self.dx
    }

    /// Index of the cell containing coordinate `x` along one axis.
    #[inline(always)]
    pub fn cell_of(&self, x: f64) -> i64 {
        (x / self.dx).floor() as i64
    }
}

/// A field that can be contracted against the mollifier at a space-time
/// point. Implementations: the base grid, the OU-flowed grid, and an
/// identically-zero override used in tests.
pub trait NoiseField {
    fn dim(&self) -> usize;
    fn dt(&self) -> f64;
    fn horizon_steps(&self) -> usize;

    /// Mollified field: sum over cells intersecting the kernel support of
    /// `kappa(x - y_j) * cell(i, j) * dx^d`.
    fn smoothed(&self, kernel: &Kernel, i: usize, x: &[f64]) -> Result<f64>;

    /// Raw cell value at (i, j); the caller keeps i within the horizon.
    fn cell(&self, i: usize, j: &[i64]) -> f64;
}

impl NoiseField for NoiseGrid {
    fn dim(&self) -> usize {
        self.dim
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn horizon_steps(&self) -> usize {
        self.horizon_steps
    }

    fn smoothed(&self, kernel: &Kernel, i: usize, x: &[f64]) -> Result<f64> {
        self.check_step(i)?;
        Ok(smooth_with(self, kernel, i, x, 1.0))
    }

    fn cell(&self, i: usize, j: &[i64]) -> f64 {
        debug_assert!(i < self.horizon_steps);
        self.cell_gaussian_unchecked(i, j)
    }
}

/// Iterate cells within the kernel support around `x`, accumulating
/// `kappa(|x - center|) * value * dx^d`. `scale` rescales the kernel support
/// for the SHE solver (kappa_eps has support eps/2).
pub(crate) fn smooth_with(
    grid: &NoiseGrid,
    kernel: &Kernel,
    i: usize,
    x: &[f64],
    scale: f64,
) -> f64 {
    let d = grid.dim;
    let radius = SUPPORT_RADIUS * scale;
    let mut lo = [0i64; 4];
    let mut hi = [0i64; 4];
    for a in 0..d {
        lo[a] = grid.cell_of(x[a] - radius);
        hi[a] = grid.cell_of(x[a] + radius);
    }
    let vol = grid.dx.powi(d as i32);
    let inv_scale = 1.0 / scale;
    let amp = if scale == 1.0 {
        1.0
    } else {
        scale.powi(-(d as i32))
    };

    let mut acc = 0.0;
    let mut j = lo;
    loop {
        let mut r2 = 0.0;
        for a in 0..d {
            let delta = x[a] - grid.cell_center(j[a]);
            r2 += delta * delta;
        }
        let s = r2.sqrt() * inv_scale;
        if s < SUPPORT_RADIUS {
            let k = kernel.kappa_radial(s) * amp;
            acc += k * grid.cell_gaussian_unchecked(i, &j[..d]);
        }
        // advance the multi-index
        let mut axis = 0;
        loop {
            if axis == d {
                return acc * vol;
            }
            j[axis] += 1;
            if j[axis] <= hi[axis] {
                break;
            }
            j[axis] = lo[axis];
            axis += 1;
        }
    }
}

/// Parameters of the OU flow: flow time `r >= 0` and the seed of the
/// independent copy `eta`.
#[derive(Clone, Copy, Debug)]
pub struct FlowParams {
    pub r: f64,
    pub eta_seed: u64,
}

/// The independent copy eta on the same grid geometry, on a seed stream
/// disjoint from every base-noise stream.
pub fn eta_grid(base: &NoiseGrid, eta_seed: u64) -> Result<NoiseGrid> {
    NoiseGrid::new(
        base.dim,
        base.dt,
        base.dx,
        rng::derive_seed(eta_seed, rng::domain::ETA, 0),
        base.horizon_steps,
    )
}

pub struct FlowedNoise<'a> {
    base: &'a NoiseGrid,
    eta: NoiseGrid,
    /// e^{-r}
    base_amp: f64,
    /// sqrt(1 - e^{-2r})
    eta_amp: f64,
}

impl<'a> FlowedNoise<'a> {
    pub fn new(base: &'a NoiseGrid, params: FlowParams) -> Result<Self> {
        if params.r < 0.0 {
            return Err(Error::invalid("flow time must be nonnegative"));
        }
        let eta = eta_grid(base, params.eta_seed)?;
        let base_amp = (-params.r).exp();
        let eta_amp = (1.0 - (-2.0 * params.r).exp()).max(0.0).sqrt();
        Ok(FlowedNoise {
            base,
            eta,
            base_amp,
            eta_amp,
        })
    }

    pub fn amplitudes(&self) -> (f64, f64) {
        (self.base_amp, self.eta_amp)
    }

    pub fn eta(&self) -> &NoiseGrid {
        &self.eta
    }
}

impl NoiseField for FlowedNoise<'_> {
    fn dim(&self) -> usize {
        self.base.dim
    }

    fn dt(&self) -> f64 {
        self.base.dt
    }

    fn horizon_steps(&self) -> usize {
        self.base.horizon_steps
    }

    fn smoothed(&self, kernel: &Kernel, i: usize, x: &[f64]) -> Result<f64> {
        let b = self.base.smoothed(kernel, i, x)?;
        if self.eta_amp == 0.0 {
            return Ok(self.base_amp * b);
        }
        let e = self.eta.smoothed(kernel, i, x)?;
        Ok(self.base_amp * b + self.eta_amp * e)
    }

    fn cell(&self, i: usize, j: &[i64]) -> f64 {
        let b = self.base.cell_gaussian_unchecked(i, j);
        if self.eta_amp == 0.0 {
            return self.base_amp * b;
        }
        self.base_amp * b + self.eta_amp * self.eta.cell_gaussian_unchecked(i, j)
    }
}

/// Identically-zero field, for exercising code paths without noise.
pub struct ZeroNoise {
    pub dim: usize,
    pub dt: f64,
    pub horizon_steps: usize,
}

impl NoiseField for ZeroNoise {
    fn dim(&self) -> usize {
        self.dim
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn horizon_steps(&self) -> usize {
        self.horizon_steps
    }

    fn smoothed(&self, _kernel: &Kernel, i: usize, _x: &[f64]) -> Result<f64> {
        if i >= self.horizon_steps {
            return Err(Error::TimeIndexOutOfHorizon {
                index: i,
                horizon: self.horizon_steps,
            });
        }
        Ok(0.0)
    }

    fn cell(&self, _i: usize, _j: &[i64]) -> f64 {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::build_mollifier;

    fn grid(seed: u64) -> NoiseGrid {
        NoiseGrid::new(1, 0.01, 1.0 / 16.0, seed, 100_000).unwrap()
    }

    #[test]
    fn rejects_coarse_cells_and_bad_horizon() {
        assert!(NoiseGrid::new(1, 0.01, 0.25, 1, 10).is_err());
        let g = grid(1);
        assert!(g.cell_gaussian(100_000, &[0]).is_err());
        assert!(g.cell_gaussian(99_999, &[0]).is_ok());
    }

    #[test]
    fn cells_are_deterministic() {
        let g = grid(7);
        let a = g.cell_gaussian(3, &[-5]).unwrap();
        let b = g.cell_gaussian(3, &[-5]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let g2 = grid(8);
        assert_ne!(a.to_bits(), g2.cell_gaussian(3, &[-5]).unwrap().to_bits());
    }

    #[test]
    fn cell_moments_match_density() {
        let g = grid(21);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for k in 0..n {
            let v = g.cell_gaussian(k % 1000, &[(k / 1000) as i64 - 500]).unwrap();
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let target = g.cell_variance();
        assert!((var / target - 1.0).abs() < 0.01, "var ratio {}", var / target);
        // mean within 3 standard errors of zero
        let se = (target / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn stationarity_under_index_shift() {
        let g = grid(33);
        let n = 100_000usize;
        let stats = |offset: i64| {
            let mut sumsq = 0.0;
            for k in 0..n {
                let v = g.cell_gaussian(k % 200, &[(k / 200) as i64 + offset]).unwrap();
                sumsq += v * v;
            }
            sumsq / n as f64
        };
        let a = stats(0);
        let b = stats(7919);
        assert!((a / b - 1.0).abs() < 0.03, "{a} vs {b}");
    }

    #[test]
    fn smoothed_variance_matches_discrete_sum() {
        let kernel = build_mollifier(1, 1.0 / 64.0).unwrap();
        let g = grid(5);
        let x = [0.13];
        // oracle: (1/dt) * sum_j kappa(x - y_j)^2 dx^d over the support
        let mut oracle = 0.0;
        let lo = g.cell_of(x[0] - 0.5);
        let hi = g.cell_of(x[0] + 0.5);
        for j in lo..=hi {
            let k = kernel.kappa_radial((x[0] - g.cell_center(j)).abs());
            oracle += k * k * g.dx();
        }
        oracle /= g.dt();

        let n = 100_000usize;
        let mut sumsq = 0.0;
        for i in 0..n {
            let v = g.smoothed(&kernel, i, &x).unwrap();
            sumsq += v * v;
        }
        let var = sumsq / n as f64;
        assert!((var / oracle - 1.0).abs() < 0.02, "ratio {}", var / oracle);
        // and the discrete sum itself sits near V0
        assert!((oracle * g.dt() / kernel.v0() - 1.0).abs() < 0.01);
    }

    #[test]
    fn distant_points_are_uncorrelated() {
        let kernel = build_mollifier(1, 1.0 / 64.0).unwrap();
        let g = grid(11);
        let n = 50_000usize;
        let (mut sa, mut sb, mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let a = g.smoothed(&kernel, i, &[0.0]).unwrap();
            let b = g.smoothed(&kernel, i, &[1.5]).unwrap();
            sa += a;
            sb += b;
            sab += a * b;
            saa += a * a;
            sbb += b * b;
        }
        let nf = n as f64;
        let cov = sab / nf - (sa / nf) * (sb / nf);
        let corr = cov / ((saa / nf).sqrt() * (sbb / nf).sqrt());
        assert!(corr.abs() < 3.0 / nf.sqrt() + 0.005, "corr {corr}");
    }

    #[test]
    fn zero_field_override() {
        let kernel = build_mollifier(1, 1.0 / 64.0).unwrap();
        let z = ZeroNoise {
            dim: 1,
            dt: 0.01,
            horizon_steps: 10,
        };
        assert_eq!(z.smoothed(&kernel, 3, &[0.2]).unwrap(), 0.0);
        assert!(z.smoothed(&kernel, 10, &[0.2]).is_err());
    }

    #[test]
    fn flow_at_zero_reproduces_base_field() {
        let kernel = build_mollifier(1, 1.0 / 64.0).unwrap();
        let g = grid(17);
        let f = FlowedNoise::new(&g, FlowParams { r: 0.0, eta_seed: 555 }).unwrap();
        for i in 0..50 {
            let a = g.smoothed(&kernel, i, &[0.3]).unwrap();
            let b = f.smoothed(&kernel, i, &[0.3]).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(FlowedNoise::new(&g, FlowParams { r: -0.1, eta_seed: 555 }).is_err());
    }

    #[test]
    fn flow_correlation_and_marginal_variance() {
        let kernel = build_mollifier(1, 1.0 / 64.0).unwrap();
        let g = grid(29);
        let r = 0.5;
        let f = FlowedNoise::new(&g, FlowParams { r, eta_seed: 777 }).unwrap();
        let n = 100_000usize;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let a = g.smoothed(&kernel, i, &[0.0]).unwrap();
            let b = f.smoothed(&kernel, i, &[0.0]).unwrap();
            sab += a * b;
            saa += a * a;
            sbb += b * b;
        }
        let corr = sab / (saa.sqrt() * sbb.sqrt());
        let target = (-r).exp();
        assert!(
            (corr - target).abs() < 0.02 * target + 0.01,
            "corr {corr} vs {target}"
        );
        // marginal variance preserved: e^{-2r} + (1 - e^{-2r}) = 1
        assert!((sbb / saa - 1.0).abs() < 0.02, "ratio {}", sbb / saa);
    }
}
