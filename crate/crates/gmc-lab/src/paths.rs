//! Brownian paths, uniform-norm tubes and Cameron-Martin tube energies.

use crate::error::{Error, Result};
use crate::exec;
use crate::rng::{self, Stream};

/// A discretized trajectory on the shared time grid. Positions are stored
/// flat, `dim` coordinates per grid point.
#[derive(Clone, Debug)]
pub struct Path {
    dim: usize,
    dt: f64,
    pos: Vec<f64>,
}

impl Path {
    pub fn from_positions(dim: usize, dt: f64, pos: Vec<f64>) -> Path {
        assert!(dim >= 1 && pos.len().is_multiple_of(dim) && !pos.is_empty());
        Path { dim, dt, pos }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of time steps (grid points minus one).
    pub fn steps(&self) -> usize {
        self.pos.len() / self.dim - 1
    }

    #[inline(always)]
    pub fn position(&self, i: usize) -> &[f64] {
        &self.pos[i * self.dim..(i + 1) * self.dim]
    }

    pub fn same_grid(&self, other: &Path) -> bool {
        self.dim == other.dim && self.dt == other.dt && self.pos.len() == other.pos.len()
    }
}

/// Convert a horizon T to a step count, requiring T/dt to be an integer.
pub fn steps_for(t_horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || t_horizon < 0.0 {
        return Err(Error::invalid("need dt > 0 and T >= 0"));
    }
    let ratio = t_horizon / dt;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::invalid(format!(
            "horizon {t_horizon} is not an integer multiple of dt {dt}"
        )));
    }
    Ok(n as usize)
}

/// Sample a Brownian path of `steps` increments started at `x0`, reading
/// increments from the given stream.
pub fn sample_brownian_steps(
    dim: usize,
    steps: usize,
    dt: f64,
    x0: &[f64],
    stream: &mut Stream,
) -> Path {
    debug_assert_eq!(x0.len(), dim);
    let sd = dt.sqrt();
    let mut pos = Vec::with_capacity((steps + 1) * dim);
    pos.extend_from_slice(x0);
    for i in 0..steps {
        for a in 0..dim {
            let prev = pos[i * dim + a];
            pos.push(prev + sd * stream.next_gaussian());
        }
    }
    Path { dim, dt, pos }
}

/// Checked constructor: validates that T/dt is an integer.
pub fn sample_brownian(
    dim: usize,
    t_horizon: f64,
    dt: f64,
    x0: &[f64],
    stream: &mut Stream,
) -> Result<Path> {
    let steps = steps_for(t_horizon, dt)?;
    if steps == 0 && t_horizon > 0.0 {
        return Err(Error::invalid("horizon shorter than one step"));
    }
    Ok(sample_brownian_steps(dim, steps, dt, x0, stream))
}

/// Sup over grid points of the Euclidean distance between two paths.
pub fn uniform_distance(p: &Path, q: &Path) -> Result<f64> {
    if !p.same_grid(q) {
        return Err(Error::GridMismatch(
            "uniform distance needs identical grids".into(),
        ));
    }
    let mut sup: f64 = 0.0;
    for i in 0..=p.steps() {
        let a = p.position(i);
        let b = q.position(i);
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        sup = sup.max(d2);
    }
    Ok(sup.sqrt())
}

/// Membership in the radius-r tube around the zero path, evaluated on grid
/// points.
pub fn in_tube_of_origin(p: &Path, r: f64) -> bool {
    let r2 = r * r;
    for i in 0..=p.steps() {
        let d2: f64 = p.position(i).iter().map(|x| x * x).sum();
        if d2 >= r2 {
            return false;
        }
    }
    true
}

#[derive(Clone, Debug)]
pub struct TubeEstimate {
    pub n: usize,
    pub survivors: usize,
    pub prob: f64,
    pub stderr: f64,
    /// log of the survival probability; `None` when no path survived.
    pub log_prob: Option<f64>,
}

/// Fraction of `n` Brownian paths staying within the r-tube of the origin.
/// Paths are abandoned at the first exit, so the cost is governed by the
/// typical exit time rather than the horizon.
pub fn tube_survival(
    dim: usize,
    r: f64,
    t_horizon: f64,
    dt: f64,
    n: usize,
    seed: u64,
) -> Result<TubeEstimate> {
    if n < 1000 {
        return Err(Error::invalid("tube survival needs n >= 1000 samples"));
    }
    let steps = steps_for(t_horizon, dt)?;
    let r2 = r * r;
    let sd = dt.sqrt();
    let survived: Vec<u8> = exec::map_collect(n, |idx| {
        let mut stream = Stream::new(seed, rng::derive_seed(seed, rng::domain::PATHS, idx as u64));
        let mut x = [0.0f64; 4];
        for _ in 0..steps {
            let mut d2 = 0.0;
            for coord in x.iter_mut().take(dim) {
                *coord += sd * stream.next_gaussian();
                d2 += *coord * *coord;
            }
            if d2 >= r2 {
                return 0u8;
            }
        }
        1u8
    });
    let survivors = survived.iter().map(|&b| b as usize).sum::<usize>();
    let prob = survivors as f64 / n as f64;
    let stderr = (prob * (1.0 - prob) / n as f64).sqrt();
    let log_prob = if survivors > 0 { Some(prob.ln()) } else { None };
    Ok(TubeEstimate {
        n,
        survivors,
        prob,
        stderr,
        log_prob,
    })
}

/// Discrete Cameron-Martin tube energy: the infimum of `sum |df|^2 / dt` over
/// paths pinned to `phi` at both ends of `[s_idx, t_idx]` and constrained to
/// the r/2-tube around `phi` at every grid point. Solved by projected
/// gradient descent (step 1/L, ball projections); stops when the relative
/// energy decrease over a 50-iteration window falls below 1e-6, so the result
/// is an upper bound on the true infimum.
pub fn cameron_martin_energy(phi: &Path, r: f64, s_idx: usize, t_idx: usize) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid("tube radius must be positive"));
    }
    if s_idx >= t_idx || t_idx > phi.steps() {
        return Err(Error::invalid("need s < t within the path horizon"));
    }
    let d = phi.dim();
    let m = t_idx - s_idx; // number of increments
    let dt = phi.dt();
    let half_r = r / 2.0;

    // working copy of phi on the window; f = phi is feasible with energy = path energy
    let mut f: Vec<f64> = (s_idx..=t_idx)
        .flat_map(|i| phi.position(i).iter().copied())
        .collect();
    let phi_ref = f.clone();

    let energy = |f: &[f64]| -> f64 {
        let mut e = 0.0;
        for u in 0..m {
            for a in 0..d {
                let df = f[(u + 1) * d + a] - f[u * d + a];
                e += df * df;
            }
        }
        e / dt
    };

    let step = dt / 8.0; // 1/L with L = 8/dt the largest Hessian eigenvalue
    let mut e_now = energy(&f);
    let mut grad = vec![0.0; f.len()];
    let mut window = e_now;
    let max_iters = 500_000;
    for iter in 0..max_iters {
        if e_now <= 1e-14 {
            break;
        }
        for g in grad.iter_mut() {
            *g = 0.0;
        }
        for u in 1..m {
            for a in 0..d {
                let idx = u * d + a;
                grad[idx] = (2.0 / dt) * (2.0 * f[idx] - f[idx - d] - f[idx + d]);
            }
        }
        for u in 1..m {
            for a in 0..d {
                let idx = u * d + a;
                f[idx] -= step * grad[idx];
            }
            // project back into the ball of radius r/2 around phi
            let mut d2 = 0.0;
            for a in 0..d {
                let delta = f[u * d + a] - phi_ref[u * d + a];
                d2 += delta * delta;
            }
            if d2 > half_r * half_r {
                let scale = half_r / d2.sqrt();
                for a in 0..d {
                    let idx = u * d + a;
                    f[idx] = phi_ref[idx] + scale * (f[idx] - phi_ref[idx]);
                }
            }
        }
        e_now = energy(&f);
        if iter % 50 == 49 {
            if (window - e_now) < 1e-6 * e_now.max(1e-12) {
                break;
            }
            window = e_now;
        }
    }
    Ok(e_now)
}

#[derive(Clone, Debug)]
pub struct RhoEstimate {
    pub horizons: Vec<f64>,
    /// Monte Carlo mean of B_{0,T}/T at each horizon.
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Mean at the largest horizon, the empirical plateau.
    pub plateau: f64,
    /// Relative change between the last two horizons.
    pub trend: f64,
}

/// Estimate the subadditive limit of B_{0,T}/T over doubling horizons.
pub fn rho_estimate(
    dim: usize,
    r: f64,
    t_max: f64,
    dt: f64,
    n_samples: usize,
    seed: u64,
    doublings: usize,
) -> Result<RhoEstimate> {
    if doublings < 4 {
        return Err(Error::invalid("rho estimate needs >= 4 doublings"));
    }
    let mut horizons = Vec::new();
    for k in (0..=doublings).rev() {
        horizons.push(t_max / (1u64 << k) as f64);
    }
    let x0 = vec![0.0; dim];
    let mut means = Vec::new();
    let mut stderrs = Vec::new();
    for (hi, &t) in horizons.iter().enumerate() {
        let steps = steps_for(t, dt)?;
        let vals: Vec<f64> = exec::map_collect(n_samples, |idx| {
            let stream_id = rng::derive_seed(seed, rng::domain::PATHS, (hi * n_samples + idx) as u64);
            let mut stream = Stream::new(seed, stream_id);
            let phi = sample_brownian_steps(dim, steps, dt, &x0, &mut stream);
            cameron_martin_energy(&phi, r, 0, steps).unwrap() / t
        });
        let mean = exec::ordered_sum(&vals) / n_samples as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (n_samples.max(2) - 1) as f64;
        means.push(mean);
        stderrs.push((var / n_samples as f64).sqrt());
    }
    let plateau = *means.last().unwrap();
    let prev = means[means.len() - 2];
    let trend = if plateau.abs() > 1e-15 {
        (plateau - prev).abs() / plateau.abs()
    } else {
        0.0
    };
    Ok(RhoEstimate {
        horizons,
        means,
        stderrs,
        plateau,
        trend,
    })
}
