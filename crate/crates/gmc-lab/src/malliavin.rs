//! Malliavin derivative of the free energy, the OU generator applied to it,
//! and the Poincare/Chebyshev bound along the noise flow.
//!
//! The gradient D_{t,x} f_T = (gamma/T) E_T[kappa(x - w_t)] is assembled per
//! time slice on the bounding box of the ensemble inflated by the kernel
//! radius (exact, since kappa is compactly supported). The OU generator
//! applied to f_T reduces to
//! `gamma^2 V0 - (gamma^2/T) int E^x2[V(w_s - w'_s)] ds - gamma f'_T`,
//! which has mean zero over noise realizations; along the flow its time
//! average satisfies a Poincare variance bound and a Chebyshev tail bound.

use crate::error::{Error, Result};
use crate::exec;
use crate::gmc::{self, GmcEnsemble};
use crate::kernel::{Kernel, SUPPORT_RADIUS};
use crate::noise::{NoiseField, NoiseGrid};
use crate::overlap;
use crate::rng;

/// One time slice of the gradient field on its own cell box.
#[derive(Clone, Debug)]
pub struct GradientSlice {
    pub lo: [i64; 4],
    pub extent: [usize; 4],
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct GradientField {
    pub gamma: f64,
    pub t_horizon: f64,
    pub dt: f64,
    pub dx: f64,
    pub dim: usize,
    pub slices: Vec<GradientSlice>,
}

fn slice_box(ensemble: &GmcEnsemble, step: usize, dx: f64) -> ([i64; 4], [usize; 4]) {
    let dim = ensemble.paths[0].dim();
    let mut lo = [i64::MAX; 4];
    let mut hi = [i64::MIN; 4];
    for p in &ensemble.paths {
        let x = p.position(step);
        for a in 0..dim {
            let c_lo = ((x[a] - SUPPORT_RADIUS) / dx).floor() as i64;
            let c_hi = ((x[a] + SUPPORT_RADIUS) / dx).floor() as i64;
            lo[a] = lo[a].min(c_lo);
            hi[a] = hi[a].max(c_hi);
        }
    }
    let mut extent = [1usize; 4];
    for a in 0..dim {
        extent[a] = (hi[a] - lo[a] + 1) as usize;
    }
    (lo, extent)
}

/// Slices of the weighted kernel expectation E_T[kappa(y - w_t)] on the
/// per-time bounding boxes, without any prefactor.
fn expected_kernel_slices(
    ensemble: &GmcEnsemble,
    kernel: &Kernel,
    dx: f64,
) -> Vec<GradientSlice> {
    let dim = ensemble.paths[0].dim();
    exec::map_collect(ensemble.n_steps, |step| {
        let (lo, extent) = slice_box(ensemble, step, dx);
        let mut values = vec![0.0f64; extent[..dim].iter().product()];
        let mut delta = [0.0f64; 4];
        for (w, p) in ensemble.weights.iter().zip(&ensemble.paths) {
            let x = p.position(step);
            // cells whose centers lie within the kernel support of x
            let mut c_lo = [0i64; 4];
            let mut c_hi = [0i64; 4];
            for a in 0..dim {
                c_lo[a] = ((x[a] - SUPPORT_RADIUS) / dx).floor() as i64;
                c_hi[a] = ((x[a] + SUPPORT_RADIUS) / dx).floor() as i64;
            }
            let mut j = c_lo;
            'cells: loop {
                let mut r2 = 0.0;
                for a in 0..dim {
                    delta[a] = x[a] - (j[a] as f64 + 0.5) * dx;
                    r2 += delta[a] * delta[a];
                }
                let s = r2.sqrt();
                if s < SUPPORT_RADIUS {
                    let mut idx = 0usize;
                    for a in (0..dim).rev() {
                        idx = idx * extent[a] + (j[a] - lo[a]) as usize;
                    }
                    values[idx] += w * kernel.kappa_radial(s);
                }
                let mut axis = 0;
                loop {
                    if axis == dim {
                        break 'cells;
                    }
                    j[axis] += 1;
                    if j[axis] <= c_hi[axis] {
                        break;
                    }
                    j[axis] = c_lo[axis];
                    axis += 1;
                }
            }
        }
        GradientSlice { lo, extent, values }
    })
}

/// D_{t,x} f_T = (gamma/T) sum_i w_i kappa(x - w_i(t)) per (time cell,
/// spatial cell). Paths scatter their kernel footprint; every value is
/// nonnegative and vanishes outside the inflated bounding box.
pub fn malliavin_gradient(ensemble: &GmcEnsemble, kernel: &Kernel, grid: &NoiseGrid) -> GradientField {
    let dim = ensemble.paths[0].dim();
    let dx = grid.dx();
    let pref = ensemble.gamma / ensemble.t_horizon;
    let mut slices = expected_kernel_slices(ensemble, kernel, dx);
    for s in slices.iter_mut() {
        for v in s.values.iter_mut() {
            *v *= pref;
        }
    }
    GradientField {
        gamma: ensemble.gamma,
        t_horizon: ensemble.t_horizon,
        dt: grid.dt(),
        dx,
        dim,
        slices,
    }
}

/// Squared L2 norm: sum over (time, cells) of value^2 dx^d dt.
pub fn gradient_norm_sq(field: &GradientField) -> f64 {
    let vol = field.dx.powi(field.dim as i32) * field.dt;
    field
        .slices
        .iter()
        .map(|s| s.values.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        * vol
}

/// Spatial mass of each time slice: int D_{t,x} f_T dx, which is gamma/T per
/// slice since kappa has unit mass and the weights sum to 1.
pub fn gradient_slice_masses(field: &GradientField) -> Vec<f64> {
    let vol = field.dx.powi(field.dim as i32);
    field
        .slices
        .iter()
        .map(|s| s.values.iter().sum::<f64>() * vol)
        .collect()
}

/// The coupling derivative f'_T of the free energy, assembled as the
/// expected-kernel slices contracted against the raw noise cells:
/// (1/T) sum_t dt sum_cells E_T[kappa(y - w_t)] B(t, y) dx^d.
pub fn fprime_estimate<F: NoiseField>(
    ensemble: &GmcEnsemble,
    field: &F,
    kernel: &Kernel,
    grid: &NoiseGrid,
) -> Result<f64> {
    if ensemble.n_steps > field.horizon_steps() {
        return Err(Error::GridMismatch(
            "ensemble horizon exceeds the noise horizon".into(),
        ));
    }
    let dim = ensemble.paths[0].dim();
    let dx = grid.dx();
    let vol = dx.powi(dim as i32);
    let slices = expected_kernel_slices(ensemble, kernel, dx);
    let mut acc = 0.0;
    let mut j = [0i64; 4];
    for (step, slice) in slices.iter().enumerate() {
        let mut slice_acc = 0.0;
        for (flat, &v) in slice.values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let mut rem = flat;
            for (a, coord) in j.iter_mut().enumerate().take(dim) {
                *coord = slice.lo[a] + (rem % slice.extent[a]) as i64;
                rem /= slice.extent[a];
            }
            slice_acc += v * field.cell(step, &j[..dim]);
        }
        acc += grid.dt() * slice_acc * vol;
    }
    Ok(acc / ensemble.t_horizon)
}

/// f'_T via the algebraically identical per-path form
/// (1/T) sum_i w_i H_T(w_i): the cell sums in `fprime_estimate` reorder to
/// exactly this expression.
pub fn fprime_from_hamiltonians(ensemble: &GmcEnsemble) -> f64 {
    ensemble
        .weights
        .iter()
        .zip(&ensemble.hamiltonians)
        .map(|(w, h)| w * h)
        .sum::<f64>()
        / ensemble.t_horizon
}

/// OU generator applied to f_T on the given ensemble/field realization:
/// gamma^2 V0 - gamma^2 (time-averaged replica overlap) - gamma f'_T.
pub fn ou_generator_estimate<F: NoiseField>(
    ensemble: &GmcEnsemble,
    field: &F,
    kernel: &Kernel,
    grid: &NoiseGrid,
    n_pairs: usize,
    pair_seed: u64,
) -> Result<f64> {
    let gamma = ensemble.gamma;
    if gamma == 0.0 {
        return Ok(0.0);
    }
    let fprime = fprime_estimate(ensemble, field, kernel, grid)?;
    let avg_overlap = overlap::time_avg_overlap(
        &ensemble.paths,
        &ensemble.weights,
        kernel,
        ensemble.n_steps,
        n_pairs,
        pair_seed,
    );
    Ok(gamma * gamma * kernel.v0() - gamma * gamma * avg_overlap - gamma * fprime)
}

#[derive(Clone, Copy, Debug)]
pub struct FlowCheckParams {
    pub dim: usize,
    pub gamma: f64,
    pub t_horizon: f64,
    pub dt: f64,
    pub dx: f64,
    pub n_paths: usize,
    /// flow horizon t
    pub t_flow: f64,
    pub flow_steps: usize,
    pub realizations: usize,
    pub eps: f64,
    pub n_pairs: usize,
    pub master_seed: u64,
}

#[derive(Clone, Debug)]
pub struct FlowCheckReport {
    /// empirical frequency of {(1/t) int L f_T(B_r) dr > gamma eps / 2}
    pub frequency: f64,
    /// Chebyshev bound 8 V0 / (t T eps^2)
    pub bound: f64,
    pub vacuous: bool,
    pub pass: bool,
    pub mean_flow_avg: f64,
    pub stderr_flow_avg: f64,
    pub var_flow_avg: f64,
    /// Poincare right-hand side (2/t) mean ||D f_T||^2
    pub variance_bound: f64,
    pub flow_averages: Vec<f64>,
}

/// Per-realization flow average of the OU generator. The flowed Hamiltonian
/// is linear in the base and eta Hamiltonians, so each flow time only
/// reweights the stored per-path values.
fn flow_average_one(
    params: &FlowCheckParams,
    kernel: &Kernel,
    realization: u64,
) -> (f64, f64) {
    let steps = crate::paths::steps_for(params.t_horizon, params.dt).expect("validated");
    let noise_seed = rng::derive_seed(params.master_seed, rng::domain::NOISE, realization);
    let eta_seed = rng::derive_seed(params.master_seed, rng::domain::ETA, realization);
    let path_seed = rng::derive_seed(params.master_seed, rng::domain::PATHS, realization);
    let grid = NoiseGrid::new(params.dim, params.dt, params.dx, noise_seed, steps).unwrap();
    let x0 = vec![0.0; params.dim];
    let ensemble = gmc::build_ensemble(
        gmc::EnsembleParams {
            gamma: params.gamma,
            t_horizon: params.t_horizon,
            n_paths: params.n_paths,
            path_seed,
        },
        &grid,
        kernel,
        &x0,
    )
    .unwrap();
    // gradient norm at the base field, for the Poincare bound
    let grad_sq = gradient_norm_sq(&malliavin_gradient(&ensemble, kernel, &grid));

    // eta Hamiltonians on the same paths
    let eta = crate::noise::eta_grid(&grid, eta_seed).unwrap();
    let h_eta: Vec<f64> = ensemble
        .paths
        .iter()
        .map(|p| gmc::hamiltonian(p, &eta, kernel, steps).unwrap())
        .collect();

    let gamma = params.gamma;
    let v0 = kernel.v0();
    let mut acc = 0.0;
    for m in 0..params.flow_steps {
        let r = (m as f64 + 0.5) * params.t_flow / params.flow_steps as f64;
        let decay = (-r).exp();
        let amp = (1.0 - (-2.0 * r).exp()).max(0.0).sqrt();
        // weights under the flowed field: log-weight change
        // gamma ((e^{-r} - 1) H_B + amp H_eta)
        let extra: Vec<f64> = ensemble
            .hamiltonians
            .iter()
            .zip(&h_eta)
            .map(|(hb, he)| gamma * ((decay - 1.0) * hb + amp * he))
            .collect();
        let (weights, _) = ensemble.reweighted(&extra);
        // f' under the flowed field: weighted flowed Hamiltonian over T
        let fprime = ensemble
            .hamiltonians
            .iter()
            .zip(&h_eta)
            .zip(&weights)
            .map(|((hb, he), w)| w * (decay * hb + amp * he))
            .sum::<f64>()
            / params.t_horizon;
        let pair_seed = rng::derive_seed(
            rng::derive_seed(params.master_seed, rng::domain::REALIZATION, realization),
            rng::domain::PAIRS,
            m as u64,
        );
        let avg_overlap = overlap::time_avg_overlap(
            &ensemble.paths,
            &weights,
            kernel,
            steps,
            params.n_pairs,
            pair_seed,
        );
        acc += gamma * gamma * v0 - gamma * gamma * avg_overlap - gamma * fprime;
    }
    (acc / params.flow_steps as f64, grad_sq)
}

/// Chebyshev tail check for the flow average of the OU generator across
/// noise realizations, with the Poincare variance bound alongside.
pub fn chebyshev_flow_check(params: FlowCheckParams, kernel: &Kernel) -> Result<FlowCheckReport> {
    if params.realizations < 200 {
        return Err(Error::invalid("flow check needs >= 200 realizations"));
    }
    if params.flow_steps < 20 {
        return Err(Error::invalid("flow integral needs >= 20 steps"));
    }
    crate::paths::steps_for(params.t_horizon, params.dt)?;
    let v0 = kernel.v0();
    let bound = 8.0 * v0 / (params.t_flow * params.t_horizon * params.eps * params.eps);
    let results: Vec<(f64, f64)> = exec::map_collect(params.realizations, |k| {
        flow_average_one(&params, kernel, k as u64)
    });
    let n = params.realizations as f64;
    let threshold = params.gamma * params.eps / 2.0;
    let hits = results.iter().filter(|(a, _)| *a > threshold).count();
    let frequency = hits as f64 / n;
    let mean = results.iter().map(|(a, _)| a).sum::<f64>() / n;
    let var = results
        .iter()
        .map(|(a, _)| (a - mean) * (a - mean))
        .sum::<f64>()
        / (n - 1.0);
    let mean_grad = results.iter().map(|(_, g)| g).sum::<f64>() / n;
    let vacuous = bound >= 1.0;
    let freq_se = (frequency * (1.0 - frequency) / n).sqrt();
    let pass = vacuous || frequency <= bound + 3.0 * freq_se;
    Ok(FlowCheckReport {
        frequency,
        bound,
        vacuous,
        pass,
        mean_flow_avg: mean,
        stderr_flow_avg: (var / n).sqrt(),
        var_flow_avg: var,
        variance_bound: (2.0 / params.t_flow) * mean_grad,
        flow_averages: results.iter().map(|(a, _)| *a).collect(),
    })
}
