//! The GMC ensemble: Hamiltonians, self-normalized weights, partition
//! functions, endpoint measures and the Ito decomposition of the free energy.
//!
//! The ensemble is plain self-normalized importance sampling from Wiener
//! measure: path i carries log-weight `gamma H_T(w_i) - gamma^2 T V(0) / 2`.
//! All partition quantities live in log scale with max-shift normalization,
//! and the effective sample size is tracked so that strong-disorder
//! degradation is visible instead of silent.

use crate::error::{Error, Result};
use crate::exec;
use crate::kernel::Kernel;
use crate::noise::{NoiseField, NoiseGrid};
use crate::paths::{sample_brownian_steps, steps_for, Path};
use crate::rng::{self, Stream};

/// Ito-convention Hamiltonian: sum over steps of dt times the mollified
/// field read at the left-endpoint position.
pub fn hamiltonian<F: NoiseField>(
    path: &Path,
    field: &F,
    kernel: &Kernel,
    n_steps: usize,
) -> Result<f64> {
    if n_steps > path.steps() || n_steps > field.horizon_steps() {
        return Err(Error::GridMismatch(
            "hamiltonian horizon exceeds path or noise horizon".into(),
        ));
    }
    let dt = field.dt();
    let mut acc = 0.0;
    for i in 0..n_steps {
        acc += field.smoothed(kernel, i, path.position(i))?;
    }
    Ok(acc * dt)
}

/// Per-step Hamiltonian increments `dt * field(i, w_i)`, for prefix
/// reweighting.
pub fn hamiltonian_increments<F: NoiseField>(
    path: &Path,
    field: &F,
    kernel: &Kernel,
    n_steps: usize,
) -> Result<Vec<f64>> {
    if n_steps > path.steps() || n_steps > field.horizon_steps() {
        return Err(Error::GridMismatch(
            "hamiltonian horizon exceeds path or noise horizon".into(),
        ));
    }
    let dt = field.dt();
    (0..n_steps)
        .map(|i| Ok(dt * field.smoothed(kernel, i, path.position(i))?))
        .collect()
}

/// Normalized weights, log-sum-exp with max shift. Returns (weights, log of
/// the mean unnormalized weight, effective sample size).
pub fn normalize_log_weights(log_weights: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = log_weights.len();
    let m = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(m.is_finite(), "all log-weights underflowed");
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut shifted = Vec::with_capacity(n);
    for &lw in log_weights {
        let u = (lw - m).exp();
        shifted.push(u);
        sum += u;
        sumsq += u * u;
    }
    let ess = sum * sum / sumsq;
    let log_mean = m + (sum / n as f64).ln();
    for u in shifted.iter_mut() {
        *u /= sum;
    }
    (shifted, log_mean, ess)
}

#[derive(Clone, Debug)]
pub struct GmcEnsemble {
    pub gamma: f64,
    pub t_horizon: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub v0: f64,
    pub paths: Vec<Path>,
    /// Total Hamiltonians H_T(w_i) under the field the ensemble was built on.
    pub hamiltonians: Vec<f64>,
    pub log_weights: Vec<f64>,
    pub weights: Vec<f64>,
    pub ess: f64,
    /// log of the renormalized partition-function estimate (mean of
    /// exp(gamma H - gamma^2 T V0 / 2)); its expectation is 1.
    pub log_z_hat: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct EnsembleParams {
    pub gamma: f64,
    pub t_horizon: f64,
    pub n_paths: usize,
    pub path_seed: u64,
}

/// Sample paths and weight them against the given field realization.
pub fn build_ensemble<F: NoiseField + Sync>(
    params: EnsembleParams,
    field: &F,
    kernel: &Kernel,
    x0: &[f64],
) -> Result<GmcEnsemble> {
    if params.n_paths < 100 {
        return Err(Error::invalid("ensemble needs at least 100 paths"));
    }
    if params.gamma < 0.0 {
        return Err(Error::invalid("gamma must be nonnegative"));
    }
    if x0.len() != field.dim() {
        return Err(Error::invalid(format!(
            "start point has {} coordinates for a {}-dimensional field",
            x0.len(),
            field.dim()
        )));
    }
    let dt = field.dt();
    let n_steps = steps_for(params.t_horizon, dt)?;
    if n_steps > field.horizon_steps() {
        return Err(Error::GridMismatch(
            "ensemble horizon exceeds the noise horizon".into(),
        ));
    }
    let dim = field.dim();
    let x0 = x0.to_vec();

    let results: Vec<(Path, f64)> = exec::map_collect(params.n_paths, |idx| {
        let id = rng::derive_seed(params.path_seed, rng::domain::PATHS, idx as u64);
        let mut stream = Stream::new(params.path_seed, id);
        let path = sample_brownian_steps(dim, n_steps, dt, &x0, &mut stream);
        let h = hamiltonian(&path, field, kernel, n_steps).expect("horizon checked above");
        (path, h)
    });

    let mut paths = Vec::with_capacity(params.n_paths);
    let mut hamiltonians = Vec::with_capacity(params.n_paths);
    for (p, h) in results {
        paths.push(p);
        hamiltonians.push(h);
    }
    Ok(assemble(params, dt, n_steps, kernel.v0(), paths, hamiltonians))
}

fn assemble(
    params: EnsembleParams,
    dt: f64,
    n_steps: usize,
    v0: f64,
    paths: Vec<Path>,
    hamiltonians: Vec<f64>,
) -> GmcEnsemble {
    let renorm = 0.5 * params.gamma * params.gamma * params.t_horizon * v0;
    let log_weights: Vec<f64> = hamiltonians.iter().map(|h| params.gamma * h - renorm).collect();
    let (weights, log_z_hat, ess) = normalize_log_weights(&log_weights);
    GmcEnsemble {
        gamma: params.gamma,
        t_horizon: params.t_horizon,
        dt,
        n_steps,
        v0,
        paths,
        hamiltonians,
        log_weights,
        weights,
        ess,
        log_z_hat,
    }
}

impl GmcEnsemble {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    /// log Z_T = log E[e^{gamma H}] estimate (no renormalization).
    pub fn log_z(&self) -> f64 {
        self.log_z_hat + 0.5 * self.gamma * self.gamma * self.t_horizon * self.v0
    }

    /// Free energy (1/T) log Z_T.
    pub fn free_energy(&self) -> f64 {
        self.log_z() / self.t_horizon
    }

    /// Reweight the same Hamiltonian sample at a different coupling.
    /// log Z_T(gamma') on this realization; exactly convex in gamma'.
    pub fn log_z_at(&self, gamma: f64) -> f64 {
        let lws: Vec<f64> = self.hamiltonians.iter().map(|h| gamma * h).collect();
        let (_, log_mean, _) = normalize_log_weights(&lws);
        log_mean
    }

    /// GMC expectation of H_T / T (the thickness observable).
    pub fn thickness(&self) -> f64 {
        let num: f64 = self
            .weights
            .iter()
            .zip(&self.hamiltonians)
            .map(|(w, h)| w * h)
            .sum();
        num / self.t_horizon
    }

    /// Weights of the same paths under substitute log-weight offsets
    /// (used by flow reweighting). `extra[i]` is added to log-weight i.
    pub fn reweighted(&self, extra: &[f64]) -> (Vec<f64>, f64) {
        debug_assert_eq!(extra.len(), self.log_weights.len());
        let lws: Vec<f64> = self
            .log_weights
            .iter()
            .zip(extra)
            .map(|(a, b)| a + b)
            .collect();
        let (w, _, ess) = normalize_log_weights(&lws);
        (w, ess)
    }
}

#[derive(Clone, Debug)]
pub struct WeightedEstimate {
    pub value: f64,
    pub stderr: f64,
    pub ess: f64,
    /// true when no path satisfied the event or the ESS was below 30
    pub flagged: bool,
}

/// Self-normalized probability of a path event with a delta-method standard
/// error.
pub fn gmc_probability(
    ensemble: &GmcEnsemble,
    event: impl Fn(&Path) -> bool,
) -> WeightedEstimate {
    let mut p = 0.0;
    let mut hits = 0usize;
    let indicator: Vec<f64> = ensemble
        .paths
        .iter()
        .map(|path| if event(path) { 1.0 } else { 0.0 })
        .collect();
    for (w, x) in ensemble.weights.iter().zip(&indicator) {
        p += w * x;
        if *x > 0.0 {
            hits += 1;
        }
    }
    let var: f64 = ensemble
        .weights
        .iter()
        .zip(&indicator)
        .map(|(w, x)| (w * (x - p)).powi(2))
        .sum();
    WeightedEstimate {
        value: p,
        stderr: var.sqrt(),
        ess: ensemble.ess,
        flagged: hits == 0 || ensemble.ess < 30.0,
    }
}

/// Endpoint measure: weighted point set of ensemble positions at a grid time.
#[derive(Clone, Debug)]
pub struct EndpointMeasure {
    pub time_index: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub dim: usize,
}

pub fn endpoint_measure(ensemble: &GmcEnsemble, time_index: usize) -> Result<EndpointMeasure> {
    if time_index > ensemble.n_steps {
        return Err(Error::invalid("endpoint time outside the grid"));
    }
    let dim = ensemble.paths[0].dim();
    let mut points = Vec::with_capacity(ensemble.n_paths() * dim);
    for p in &ensemble.paths {
        points.extend_from_slice(p.position(time_index));
    }
    Ok(EndpointMeasure {
        time_index,
        points,
        weights: ensemble.weights.clone(),
        dim,
    })
}

/// Exact double-sum replica overlap sum_{ij} w_i w_j V(x_i - x_j) of a
/// weighted point set at one time.
pub fn overlap_exact(points: &[f64], weights: &[f64], dim: usize, kernel: &Kernel) -> f64 {
    let n = weights.len();
    let mut acc = 0.0;
    let mut delta = [0.0f64; 4];
    for i in 0..n {
        let xi = &points[i * dim..(i + 1) * dim];
        for j in 0..n {
            let xj = &points[j * dim..(j + 1) * dim];
            for a in 0..dim {
                delta[a] = xi[a] - xj[a];
            }
            acc += weights[i] * weights[j] * kernel.eval_v(&delta[..dim]);
        }
    }
    acc
}

/// Pair-sampled replica overlap: draws index pairs from the weight
/// distribution and averages V over them. Unbiased for the double sum.
pub fn overlap_sampled(
    points: &[f64],
    weights: &[f64],
    dim: usize,
    kernel: &Kernel,
    n_pairs: usize,
    seed: u64,
) -> f64 {
    let cum = cumulative(weights);
    let mut stream = Stream::new(seed, rng::derive_seed(seed, rng::domain::PAIRS, 1));
    let mut acc = 0.0;
    let mut delta = [0.0f64; 4];
    for _ in 0..n_pairs {
        let i = sample_cum(&cum, stream.next_unit_open());
        let j = sample_cum(&cum, stream.next_unit_open());
        let xi = &points[i * dim..(i + 1) * dim];
        let xj = &points[j * dim..(j + 1) * dim];
        for a in 0..dim {
            delta[a] = xi[a] - xj[a];
        }
        acc += kernel.eval_v(&delta[..dim]);
    }
    acc / n_pairs as f64
}

pub(crate) fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cum.push(acc);
    }
    cum
}

#[inline]
pub(crate) fn sample_cum(cum: &[f64], u: f64) -> usize {
    let target = u * cum[cum.len() - 1];
    match cum.binary_search_by(|c| c.partial_cmp(&target).unwrap()) {
        Ok(k) | Err(k) => k.min(cum.len() - 1),
    }
}

/// Replica overlap of the ensemble at one grid time: exact double sum for
/// small ensembles, pair sampling beyond 2000 paths.
pub fn endpoint_overlap(ensemble: &GmcEnsemble, time_index: usize, kernel: &Kernel) -> Result<f64> {
    let m = endpoint_measure(ensemble, time_index)?;
    if ensemble.n_paths() <= 2000 {
        Ok(overlap_exact(&m.points, &m.weights, m.dim, kernel))
    } else {
        Ok(overlap_sampled(
            &m.points,
            &m.weights,
            m.dim,
            kernel,
            100_000,
            rng::derive_seed(0xE0D0, rng::domain::PAIRS, time_index as u64),
        ))
    }
}

/// Replica energy F_gamma of an endpoint measure:
/// (gamma^2/2) sum_{ij} w_i w_j V(x_i - x_j).
pub fn energy_f(gamma: f64, measure: &EndpointMeasure, kernel: &Kernel) -> f64 {
    0.5 * gamma * gamma * overlap_exact(&measure.points, &measure.weights, measure.dim, kernel)
}

#[derive(Clone, Debug)]
pub struct ItoCheck {
    /// (1/T) log of the renormalized partition estimate.
    pub direct: f64,
    /// martingale part M_T^(1)/T minus the time-averaged replica energy.
    pub decomposed: f64,
    pub residual: f64,
    pub martingale_term: f64,
    pub energy_term: f64,
}

/// Check the Ito decomposition of the free energy on one realization:
/// A = (1/T) log Z_hat against B = M^(1)/T - (1/T) sum_t dt F_gamma(Q_t),
/// with prefix-weight ensembles at every grid time.
pub fn ito_decomposition_check(
    params: EnsembleParams,
    grid: &NoiseGrid,
    kernel: &Kernel,
    x0: &[f64],
) -> Result<ItoCheck> {
    let dt = grid.dt();
    let n_steps = steps_for(params.t_horizon, dt)?;
    if n_steps > grid.horizon_steps() {
        return Err(Error::GridMismatch("horizon exceeds noise horizon".into()));
    }
    let dim = grid.dim();
    let n = params.n_paths;
    let x0v = x0.to_vec();

    // per-path increments dH_{t,i}
    let sampled: Vec<(Path, Vec<f64>)> = exec::map_collect(n, |idx| {
        let id = rng::derive_seed(params.path_seed, rng::domain::PATHS, idx as u64);
        let mut stream = Stream::new(params.path_seed, id);
        let path = sample_brownian_steps(dim, n_steps, dt, &x0v, &mut stream);
        let incs = hamiltonian_increments(&path, grid, kernel, n_steps).unwrap();
        (path, incs)
    });

    let gamma = params.gamma;
    let t = params.t_horizon;
    let v0 = kernel.v0();

    // direct side from the total Hamiltonians
    let totals: Vec<f64> = sampled.iter().map(|(_, incs)| incs.iter().sum()).collect();
    let log_weights: Vec<f64> = totals
        .iter()
        .map(|h| gamma * h - 0.5 * gamma * gamma * t * v0)
        .collect();
    let (_, log_z_hat, _) = normalize_log_weights(&log_weights);
    let direct = log_z_hat / t;

    // decomposed side: walk the grid with prefix weights
    let mut prefix = vec![0.0f64; n]; // gamma * H_t(w_i)
    let mut martingale = 0.0;
    let mut energy_int = 0.0;
    let mut points = vec![0.0f64; n * dim];
    for step in 0..n_steps {
        let (prefix_w, _, _) = normalize_log_weights(&prefix);
        for (i, (path, _)) in sampled.iter().enumerate() {
            points[i * dim..(i + 1) * dim].copy_from_slice(path.position(step));
        }
        // martingale increment: gamma dt sum_cells E_t[kappa(y - w_t)] B(t,y) dx^d
        // computed in the algebraically identical per-path form
        // gamma sum_i w_i dH_{t,i}
        let mut dm = 0.0;
        for (i, (_, incs)) in sampled.iter().enumerate() {
            dm += prefix_w[i] * incs[step];
        }
        martingale += gamma * dm;
        // replica energy of the prefix endpoint measure
        let overlap = overlap_exact(&points, &prefix_w, dim, kernel);
        energy_int += dt * 0.5 * gamma * gamma * overlap;
        // advance prefix Hamiltonians
        for (i, (_, incs)) in sampled.iter().enumerate() {
            prefix[i] += gamma * incs[step];
        }
    }
    let decomposed = martingale / t - energy_int / t;
    Ok(ItoCheck {
        direct,
        decomposed,
        residual: (direct - decomposed).abs(),
        martingale_term: martingale / t,
        energy_term: energy_int / t,
    })
}
