//! Feynman-Kac solver for the mollified multiplicative-noise stochastic heat
//! equation in d >= 3 and the scaling identity tying it to the GMC partition
//! function.
//!
//! The solution at scale eps is the path average of
//! `exp(gamma_eps H~ - gamma_eps^2 t V_eps(0) / 2)` with
//! `gamma_eps = gamma eps^{(d-2)/2}`, `kappa_eps = eps^{-d} kappa(./eps)` and
//! the noise read backwards in time. The internal grid refines with eps
//! (dt ~ eps^2, dx ~ eps) so the scaled mollifier stays resolved; under
//! diffusive rescaling the discrete model maps exactly onto the base-scale
//! GMC with horizon t/eps^2 started at x/eps, which is what the identity
//! check exercises.

use crate::error::{Error, Result};
use crate::exec;
use crate::gmc;
use crate::kernel::Kernel;
use crate::noise::{smooth_with, NoiseGrid};
use crate::paths::{sample_brownian_steps, steps_for};
use crate::rng::{self, Stream};

#[derive(Clone, Copy, Debug)]
pub struct SheParams {
    pub dim: usize,
    pub eps: f64,
    /// physical horizon t of the SHE
    pub t_horizon: f64,
    pub gamma: f64,
    pub n_paths: usize,
    /// base time step; the solver uses dt = eps^2 * dtau
    pub dtau: f64,
    /// base cell size; the solver uses dx = eps * dx_base
    pub dx_base: f64,
    pub noise_seed: u64,
    pub path_seed: u64,
}

#[derive(Clone, Debug)]
pub struct SheEstimate {
    pub u: f64,
    pub stderr: f64,
    pub log_u: f64,
    pub ess: f64,
    pub flagged: bool,
}

fn validate(params: &SheParams) -> Result<usize> {
    if params.dim < 3 {
        return Err(Error::invalid(
            "the SHE renormalization gamma eps^{(d-2)/2} needs d >= 3",
        ));
    }
    if !(params.eps > 0.0 && params.eps <= 1.0) {
        return Err(Error::invalid("eps must lie in (0, 1]"));
    }
    let dt = params.eps * params.eps * params.dtau;
    steps_for(params.t_horizon, dt)
}

/// Monte Carlo Feynman-Kac estimate of u_eps(t, x).
pub fn fk_solution(params: SheParams, kernel: &Kernel, x: &[f64]) -> Result<SheEstimate> {
    let steps = validate(&params)?;
    let dt = params.eps * params.eps * params.dtau;
    let dx = params.eps * params.dx_base;
    let grid = NoiseGrid::new(params.dim, dt, dx, params.noise_seed, steps)?;
    let gamma_eps = params.gamma * params.eps.powf((params.dim as f64 - 2.0) / 2.0);
    let v0_eps = kernel.v0_scaled(params.eps);
    let renorm = 0.5 * gamma_eps * gamma_eps * params.t_horizon * v0_eps;
    let x0 = x.to_vec();
    let dim = params.dim;
    let eps = params.eps;

    let exponents: Vec<f64> = exec::map_collect(params.n_paths, |idx| {
        let id = rng::derive_seed(params.path_seed, rng::domain::PATHS, idx as u64);
        let mut stream = Stream::new(params.path_seed, id);
        let path = sample_brownian_steps(dim, steps, dt, &x0, &mut stream);
        // time-reversed noise: field cell index reflected across the horizon
        let mut h = 0.0;
        for i in 0..steps {
            h += smooth_with(&grid, kernel, steps - 1 - i, path.position(i), eps);
        }
        gamma_eps * (h * dt) - renorm
    });
    let (_, log_mean, ess) = gmc::normalize_log_weights(&exponents);
    let u = log_mean.exp();
    let n = params.n_paths as f64;
    let mean = exponents.iter().map(|e| e.exp()).sum::<f64>() / n;
    let var = exponents
        .iter()
        .map(|e| (e.exp() - mean) * (e.exp() - mean))
        .sum::<f64>()
        / (n - 1.0);
    Ok(SheEstimate {
        u,
        stderr: (var / n).sqrt(),
        log_u: log_mean,
        ess,
        flagged: ess < 30.0,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct IdentityParams {
    pub she: SheParams,
    pub realizations: usize,
    pub master_seed: u64,
}

#[derive(Clone, Debug)]
pub struct IdentityReport {
    pub mean_log_u: f64,
    pub var_log_u: f64,
    pub mean_log_z: f64,
    pub var_log_z: f64,
    pub z_mean: f64,
    pub z_var: f64,
    pub realizations: usize,
}

/// Compare log u_eps(t, x) against log Z_{gamma, t/eps^2}(x/eps) across
/// independent noise realizations: matching first and second moments of the
/// two pipelines (identical in law, including estimator noise).
pub fn scaling_identity_check(
    params: IdentityParams,
    kernel: &Kernel,
    x: &[f64],
) -> Result<IdentityReport> {
    validate(&params.she)?;
    let k_real = params.realizations;
    if k_real < 2 {
        return Err(Error::invalid("identity check needs >= 2 realizations"));
    }
    let she = params.she;

    let log_u: Vec<f64> = exec::map_collect(k_real, |k| {
        let mut p = she;
        p.noise_seed = rng::derive_seed(params.master_seed, rng::domain::NOISE, k as u64);
        p.path_seed = rng::derive_seed(params.master_seed, rng::domain::PATHS, k as u64);
        fk_solution(p, kernel, x).unwrap().log_u
    });

    // companion pipeline: base-scale GMC with horizon t/eps^2 from x/eps
    let t_base = she.t_horizon / (she.eps * she.eps);
    let steps = steps_for(t_base, she.dtau)?;
    let x_scaled: Vec<f64> = x.iter().map(|v| v / she.eps).collect();
    let log_z: Vec<f64> = exec::map_collect(k_real, |k| {
        let noise_seed =
            rng::derive_seed(params.master_seed, rng::domain::REALIZATION, k as u64);
        let path_seed = rng::derive_seed(params.master_seed, rng::domain::ETA, k as u64);
        let grid =
            NoiseGrid::new(she.dim, she.dtau, she.dx_base, noise_seed, steps).unwrap();
        let e = gmc::build_ensemble(
            gmc::EnsembleParams {
                gamma: she.gamma,
                t_horizon: t_base,
                n_paths: she.n_paths,
                path_seed,
            },
            &grid,
            kernel,
            &x_scaled,
        )
        .unwrap();
        e.log_z_hat
    });

    let stats = |v: &[f64]| -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (mean, var)
    };
    let (mu_u, var_u) = stats(&log_u);
    let (mu_z, var_z) = stats(&log_z);
    let n = k_real as f64;
    let se_mean = ((var_u + var_z) / n).sqrt();
    // variance of a sample variance ~ 2 var^2 / (n - 1)
    let se_var = ((2.0 * var_u * var_u + 2.0 * var_z * var_z) / (n - 1.0)).sqrt();
    Ok(IdentityReport {
        mean_log_u: mu_u,
        var_log_u: var_u,
        mean_log_z: mu_z,
        var_log_z: var_z,
        z_mean: (mu_u - mu_z).abs() / se_mean.max(1e-300),
        z_var: (var_u - var_z).abs() / se_var.max(1e-300),
        realizations: k_real,
    })
}

#[derive(Clone, Debug)]
pub struct RescaledTubePoint {
    pub eps: f64,
    /// mean over realizations of eps^2 log M[tube], unflagged ones only
    pub scaled_log_mass: f64,
    pub stderr: f64,
    pub flagged: usize,
    pub realizations: usize,
}

/// Rescaled GMC tube mass: per eps, the scaled
/// log-volume eps^2 log M_{gamma,eps,t}[N_{eps,t}(0)] across realizations,
/// measured through the diffusively rescaled base ensemble.
pub fn rescaled_tube_decay(
    params: SheParams,
    kernel: &Kernel,
    realizations: usize,
    master_seed: u64,
) -> Result<RescaledTubePoint> {
    validate(&params)?;
    let t_base = params.t_horizon / (params.eps * params.eps);
    let steps = steps_for(t_base, params.dtau)?;
    let x0 = vec![0.0; params.dim];
    let vals: Vec<Option<f64>> = exec::map_collect(realizations, |k| {
        let noise_seed = rng::derive_seed(master_seed, rng::domain::NOISE, k as u64);
        let path_seed = rng::derive_seed(master_seed, rng::domain::PATHS, k as u64);
        let grid =
            NoiseGrid::new(params.dim, params.dtau, params.dx_base, noise_seed, steps).unwrap();
        let e = gmc::build_ensemble(
            gmc::EnsembleParams {
                gamma: params.gamma,
                t_horizon: t_base,
                n_paths: params.n_paths,
                path_seed,
            },
            &grid,
            kernel,
            &x0,
        )
        .unwrap();
        // the rescaled tube of radius eps maps to the unit tube of the base walk
        let est = gmc::gmc_probability(&e, |p| crate::paths::in_tube_of_origin(p, 1.0));
        if est.value > 0.0 {
            Some(params.eps * params.eps * est.value.ln())
        } else {
            None
        }
    });
    let good: Vec<f64> = vals.iter().flatten().copied().collect();
    let flagged = realizations - good.len();
    if good.is_empty() {
        return Ok(RescaledTubePoint {
            eps: params.eps,
            scaled_log_mass: f64::NAN,
            stderr: f64::NAN,
            flagged,
            realizations,
        });
    }
    let n = good.len() as f64;
    let mean = good.iter().sum::<f64>() / n;
    let var = good.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(RescaledTubePoint {
        eps: params.eps,
        scaled_log_mass: mean,
        stderr: (var / n).sqrt(),
        flagged,
        realizations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::build_mollifier;

    fn kernel3d() -> Kernel {
        build_mollifier(3, 1.0 / 32.0).unwrap()
    }

    fn base_params(seed: u64) -> SheParams {
        SheParams {
            dim: 3,
            eps: 0.5,
            t_horizon: 0.25,
            gamma: 0.2,
            n_paths: 200,
            dtau: 0.05,
            dx_base: 1.0 / 8.0,
            noise_seed: seed,
            path_seed: seed + 1,
        }
    }

    #[test]
    fn rejects_low_dimension() {
        let kernel = build_mollifier(2, 1.0 / 32.0).unwrap();
        let mut p = base_params(1);
        p.dim = 2;
        assert!(fk_solution(p, &kernel, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn zero_coupling_gives_exactly_one() {
        let kernel = kernel3d();
        let mut p = base_params(3);
        p.gamma = 0.0;
        let est = fk_solution(p, &kernel, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(est.u, 1.0);
        assert!(est.u > 0.0);
    }

    #[test]
    fn estimator_mean_is_one_at_small_coupling() {
        let kernel = kernel3d();
        let k_real = 120;
        let vals: Vec<f64> = exec::map_collect(k_real, |k| {
            let mut p = base_params(0);
            p.noise_seed = 50_000 + k as u64;
            p.path_seed = 60_000 + k as u64;
            fk_solution(p, &kernel, &[0.0, 0.0, 0.0]).unwrap().u
        });
        let n = k_real as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn scaled_kernel_quadrature_matches_v0_scaling() {
        // (kappa_eps * kappa_eps)(0) = eps^{-d} V0: check the cell-sum
        // quadrature at two eps values against the table scaling
        let kernel = kernel3d();
        for eps in [1.0f64, 0.5] {
            let dx = eps * 0.125;
            // sum over cells of kappa_eps(y)^2 dx^d around the origin
            let range = (0.5 * eps / dx).ceil() as i64 + 1;
            let mut acc = 0.0;
            for ix in -range..=range {
                for iy in -range..=range {
                    for iz in -range..=range {
                        let y = [
                            (ix as f64 + 0.5) * dx,
                            (iy as f64 + 0.5) * dx,
                            (iz as f64 + 0.5) * dx,
                        ];
                        let s = (y[0].powi(2) + y[1].powi(2) + y[2].powi(2)).sqrt();
                        let k = kernel.kappa_scaled_radial(s, eps);
                        acc += k * k * dx.powi(3);
                    }
                }
            }
            let target = kernel.v0_scaled(eps);
            assert!(
                (acc / target - 1.0).abs() < 0.01,
                "eps {eps}: {acc} vs {target}"
            );
        }
    }

    #[test]
    fn positivity_of_samples() {
        let kernel = kernel3d();
        let p = base_params(11);
        let est = fk_solution(p, &kernel, &[0.1, -0.2, 0.0]).unwrap();
        assert!(est.u > 0.0 && est.log_u.is_finite());
    }
}
