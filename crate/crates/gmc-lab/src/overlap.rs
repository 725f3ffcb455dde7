//! Replica-overlap localization diagnostics.
//!
//! At large coupling the GMC measure concentrates on few path clusters; the
//! time-averaged replica overlap and the normalized path covariance detect
//! this. The flow-reweighted overlap `I` re-tilts the base ensemble by the
//! eta-Hamiltonian factor (the reweighting density has unit product-GMC mean
//! by construction), which is how the OU flow enters without rebuilding
//! ensembles per flow time.

use crate::error::{Error, Result};
use crate::gmc::{self, GmcEnsemble};
use crate::kernel::Kernel;
use crate::noise::NoiseGrid;
use crate::paths::Path;
use crate::rng::{self, Stream};

/// Normalized path covariance (1/(T V0)) sum_t dt V(p_t - q_t), valued in
/// [0, 1] with equality 1 on the diagonal.
pub fn normalized_cov(p: &Path, q: &Path, kernel: &Kernel, n_steps: usize) -> Result<f64> {
    if !p.same_grid(q) || n_steps > p.steps() {
        return Err(Error::GridMismatch(
            "normalized covariance needs one common grid".into(),
        ));
    }
    Ok(pair_time_avg_v(p, q, kernel, n_steps) / kernel.v0())
}

/// Time-averaged pair overlap of two stored paths, unnormalized:
/// (1/T) sum_t dt V(p_t - q_t).
fn pair_time_avg_v(p: &Path, q: &Path, kernel: &Kernel, n_steps: usize) -> f64 {
    let dim = p.dim();
    let mut delta = [0.0f64; 4];
    let mut acc = 0.0;
    for i in 0..n_steps {
        let a = p.position(i);
        let b = q.position(i);
        for c in 0..dim {
            delta[c] = a[c] - b[c];
        }
        acc += kernel.eval_v(&delta[..dim]);
    }
    acc / n_steps as f64
}

/// Time-averaged replica overlap (1/T) int E^x2[V(w_s - w'_s)] ds for a
/// weighted path family: exact double sum when it is cheaper than the pair
/// budget, weighted pair sampling beyond.
pub fn time_avg_overlap(
    paths: &[Path],
    weights: &[f64],
    kernel: &Kernel,
    n_steps: usize,
    n_pairs: usize,
    seed: u64,
) -> f64 {
    let n = paths.len();
    if n * n <= n_pairs {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += weights[i]
                    * weights[j]
                    * pair_time_avg_v(&paths[i], &paths[j], kernel, n_steps);
            }
        }
        return acc;
    }
    let cum = gmc::cumulative(weights);
    let mut stream = Stream::new(seed, rng::derive_seed(seed, rng::domain::PAIRS, 0));
    let mut acc = 0.0;
    for _ in 0..n_pairs {
        let i = gmc::sample_cum(&cum, stream.next_unit_open());
        let j = gmc::sample_cum(&cum, stream.next_unit_open());
        acc += pair_time_avg_v(&paths[i], &paths[j], kernel, n_steps);
    }
    acc / n_pairs as f64
}

#[derive(Clone, Debug)]
pub struct BDeltaReport {
    /// frequency of the event {normalized time-averaged overlap <= delta}
    pub frequency: f64,
    pub realizations: usize,
    pub low_ess_count: usize,
    /// per-realization (normalized overlap, ess)
    pub samples: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug)]
pub struct BDeltaParams {
    pub dim: usize,
    pub gamma: f64,
    pub t_horizon: f64,
    pub dt: f64,
    pub dx: f64,
    pub delta: f64,
    pub realizations: usize,
    pub n_paths: usize,
    pub n_pairs: usize,
    pub master_seed: u64,
}

/// Frequency of the low-overlap event B_delta across noise realizations.
/// `delta` is measured against the normalized overlap (divided by V0).
pub fn b_delta_probability(params: BDeltaParams, kernel: &Kernel) -> Result<BDeltaReport> {
    if params.realizations < 100 {
        return Err(Error::invalid("B_delta needs >= 100 realizations"));
    }
    let steps = crate::paths::steps_for(params.t_horizon, params.dt)?;
    let x0 = vec![0.0; params.dim];
    let samples: Vec<(f64, f64)> = crate::exec::map_collect(params.realizations, |k| {
        let noise_seed = rng::derive_seed(params.master_seed, rng::domain::NOISE, k as u64);
        let path_seed = rng::derive_seed(params.master_seed, rng::domain::PATHS, k as u64);
        let grid = NoiseGrid::new(params.dim, params.dt, params.dx, noise_seed, steps)
            .expect("validated grid");
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
        .expect("validated ensemble");
        let pair_seed = rng::derive_seed(params.master_seed, rng::domain::PAIRS, k as u64);
        let overlap = time_avg_overlap(
            &ensemble.paths,
            &ensemble.weights,
            kernel,
            steps,
            params.n_pairs,
            pair_seed,
        );
        (overlap / kernel.v0(), ensemble.ess)
    });
    let hits = samples.iter().filter(|(o, _)| *o <= params.delta).count();
    let low_ess = samples.iter().filter(|(_, ess)| *ess < 30.0).count();
    Ok(BDeltaReport {
        frequency: hits as f64 / params.realizations as f64,
        realizations: params.realizations,
        low_ess_count: low_ess,
        samples,
    })
}

#[derive(Clone, Debug)]
pub struct CoverReport {
    pub k: usize,
    pub reference_indices: Vec<usize>,
    pub covered_mass: f64,
    pub k_max: usize,
    /// true when covered mass reached 1 - epsilon within k_max picks
    pub reached_target: bool,
}

/// Greedy localization cover: repeatedly pick the path whose delta-ball (in
/// normalized covariance) holds the most uncovered GMC mass. `delta` is a
/// normalized-overlap threshold; the pick budget follows the Paley-Zygmund
/// count ceil(delta^{-2} V0 |log(eps/2)|) + 1. Ties break to the lowest path
/// index.
pub fn localization_cover(
    ensemble: &GmcEnsemble,
    delta: f64,
    eps: f64,
    kernel: &Kernel,
) -> Result<CoverReport> {
    if !(delta > 0.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("need delta > 0 and eps in (0,1)"));
    }
    let n = ensemble.n_paths();
    if n > 4000 {
        return Err(Error::invalid(
            "localization cover is quadratic in paths; use <= 4000",
        ));
    }
    let steps = ensemble.n_steps;
    let k_max = ((kernel.v0() * (eps / 2.0).ln().abs()) / (delta * delta)).ceil() as usize + 1;

    // pairwise normalized covariances, row-major
    let rows: Vec<Vec<f64>> = crate::exec::map_collect(n, |i| {
        (0..n)
            .map(|j| {
                normalized_cov(&ensemble.paths[i], &ensemble.paths[j], kernel, steps).unwrap()
            })
            .collect()
    });

    let mut covered = vec![false; n];
    let mut refs = Vec::new();
    let mut covered_mass = 0.0;
    let target = 1.0 - eps;
    while refs.len() < k_max && covered_mass < target {
        let mut best = usize::MAX;
        let mut best_mass = -1.0;
        for cand in 0..n {
            if covered[cand] {
                continue;
            }
            let mut mass = 0.0;
            for j in 0..n {
                if !covered[j] && rows[cand][j] >= delta {
                    mass += ensemble.weights[j];
                }
            }
            if mass > best_mass + 1e-15 {
                best_mass = mass;
                best = cand;
            }
        }
        if best == usize::MAX || best_mass <= 0.0 {
            break;
        }
        refs.push(best);
        for j in 0..n {
            if !covered[j] && rows[best][j] >= delta {
                covered[j] = true;
                covered_mass += ensemble.weights[j];
            }
        }
    }
    Ok(CoverReport {
        k: refs.len(),
        reference_indices: refs,
        covered_mass,
        k_max,
        reached_target: covered_mass >= target,
    })
}

/// Flow-reweighted overlap I_{T,t}: the base product ensemble retilted by the
/// eta_r factor exp(gamma sqrt(1 - e^{-2r}) H(w, eta)) and renormalized,
/// averaged over a midpoint grid of flow times in [0, t]. With a single flow
/// step at t = 0 the tilt is identically 1 and I reduces to the plain
/// time-averaged replica overlap.
pub fn flow_overlap_i(
    ensemble: &GmcEnsemble,
    h_eta: &[f64],
    kernel: &Kernel,
    t_flow: f64,
    flow_steps: usize,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    if t_flow < 0.0 || flow_steps == 0 {
        return Err(Error::invalid("need t >= 0 and >= 1 flow step"));
    }
    if t_flow > 0.0 && flow_steps < 20 {
        return Err(Error::invalid("flow integral needs >= 20 steps"));
    }
    let mut acc = 0.0;
    for m in 0..flow_steps {
        let r = if t_flow == 0.0 {
            0.0
        } else {
            (m as f64 + 0.5) * t_flow / flow_steps as f64
        };
        let amp = (1.0 - (-2.0 * r).exp()).max(0.0).sqrt();
        let extra: Vec<f64> = h_eta.iter().map(|h| ensemble.gamma * amp * h).collect();
        let (weights, _) = ensemble.reweighted(&extra);
        let pair_seed = rng::derive_seed(seed, rng::domain::PAIRS, m as u64);
        acc += time_avg_overlap(
            &ensemble.paths,
            &weights,
            kernel,
            ensemble.n_steps,
            n_pairs,
            pair_seed,
        );
    }
    Ok(acc / flow_steps as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmc::{build_ensemble, EnsembleParams};
    use crate::kernel::build_mollifier;
    use crate::paths::sample_brownian_steps;
    use approx::assert_relative_eq;

    fn kernel1d() -> Kernel {
        build_mollifier(1, 1.0 / 64.0).unwrap()
    }

    #[test]
    fn normalized_cov_diagonal_translation_and_oracle() {
        let kernel = kernel1d();
        let mut s = Stream::new(3, 0);
        let p = sample_brownian_steps(1, 40, 0.05, &[0.0], &mut s);
        assert_relative_eq!(
            normalized_cov(&p, &p, &kernel, 40).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        // paths >= 1 apart never overlap
        let far_pos: Vec<f64> = (0..=40).map(|i| p.position(i)[0] + 5.0).collect();
        let far = Path::from_positions(1, 0.05, far_pos);
        assert_eq!(normalized_cov(&p, &far, &kernel, 40).unwrap(), 0.0);
        // brute-force loop oracle
        let mut s2 = Stream::new(3, 1);
        let q = sample_brownian_steps(1, 40, 0.05, &[0.0], &mut s2);
        let mut brute = 0.0;
        for i in 0..40 {
            brute += kernel.eval_v(&[p.position(i)[0] - q.position(i)[0]]);
        }
        brute /= 40.0 * kernel.v0();
        assert_relative_eq!(
            normalized_cov(&p, &q, &kernel, 40).unwrap(),
            brute,
            epsilon = 1e-13
        );
        // symmetry
        assert_eq!(
            normalized_cov(&p, &q, &kernel, 40).unwrap(),
            normalized_cov(&q, &p, &kernel, 40).unwrap()
        );
    }

    #[test]
    fn time_avg_overlap_sampled_matches_exact() {
        let kernel = kernel1d();
        let grid = NoiseGrid::new(1, 0.05, 1.0 / 8.0, 5, 40).unwrap();
        let e = build_ensemble(
            EnsembleParams {
                gamma: 0.6,
                t_horizon: 2.0,
                n_paths: 120,
                path_seed: 8,
            },
            &grid,
            &kernel,
            &[0.0],
        )
        .unwrap();
        let exact = time_avg_overlap(&e.paths, &e.weights, &kernel, 40, 120 * 120, 1);
        let sampled = time_avg_overlap(&e.paths, &e.weights, &kernel, 40, 60_000, 99);
        let tol = 3.0 * kernel.v0() / (60_000f64).sqrt();
        assert!(
            (exact - sampled).abs() < tol,
            "exact {exact} vs sampled {sampled}"
        );
        // overlap bounded by V0
        assert!(exact >= 0.0 && exact <= kernel.v0());
    }

    #[test]
    fn cover_identical_paths_needs_one_reference() {
        let kernel = kernel1d();
        let grid = NoiseGrid::new(1, 0.05, 1.0 / 8.0, 7, 20).unwrap();
        let mut e = build_ensemble(
            EnsembleParams {
                gamma: 0.0,
                t_horizon: 1.0,
                n_paths: 100,
                path_seed: 11,
            },
            &grid,
            &kernel,
            &[0.0],
        )
        .unwrap();
        let template = e.paths[0].clone();
        for p in e.paths.iter_mut() {
            *p = template.clone();
        }
        let report = localization_cover(&e, 0.5, 0.1, &kernel).unwrap();
        assert_eq!(report.k, 1);
        assert_relative_eq!(report.covered_mass, 1.0, epsilon = 1e-12);
        assert!(report.reached_target);
    }

    #[test]
    fn cover_first_pick_matches_exhaustive_best_ball() {
        let kernel = kernel1d();
        let grid = NoiseGrid::new(1, 0.05, 1.0 / 8.0, 13, 20).unwrap();
        let e = build_ensemble(
            EnsembleParams {
                gamma: 0.8,
                t_horizon: 1.0,
                n_paths: 100,
                path_seed: 21,
            },
            &grid,
            &kernel,
            &[0.0],
        )
        .unwrap();
        let delta = 1e-9;
        let report = localization_cover(&e, delta, 0.05, &kernel).unwrap();
        let mut best_single = 0.0f64;
        for i in 0..e.n_paths() {
            let mut mass = 0.0;
            for j in 0..e.n_paths() {
                if normalized_cov(&e.paths[i], &e.paths[j], &kernel, 20).unwrap() >= delta {
                    mass += e.weights[j];
                }
            }
            best_single = best_single.max(mass);
        }
        let first = report.reference_indices[0];
        let mut first_mass = 0.0;
        for j in 0..e.n_paths() {
            if normalized_cov(&e.paths[first], &e.paths[j], &kernel, 20).unwrap() >= delta {
                first_mass += e.weights[j];
            }
        }
        assert_relative_eq!(first_mass, best_single, epsilon = 1e-12);
        assert!(report.covered_mass <= 1.0 + 1e-12);
    }

    #[test]
    fn cover_reports_failure_honestly_when_delocalized() {
        // uniform weights, strict threshold: each ball holds only its own
        // path, the pick budget runs out and the target is not reached
        let kernel = kernel1d();
        let grid = NoiseGrid::new(1, 0.05, 1.0 / 8.0, 19, 80).unwrap();
        let e = build_ensemble(
            EnsembleParams {
                gamma: 0.0,
                t_horizon: 4.0,
                n_paths: 400,
                path_seed: 20,
            },
            &grid,
            &kernel,
            &[0.0],
        )
        .unwrap();
        let report = localization_cover(&e, 0.9, 0.05, &kernel).unwrap();
        assert!(!report.reached_target, "covered {}", report.covered_mass);
        assert_eq!(report.k, report.k_max);
        assert!(report.covered_mass < 0.5);
    }

    #[test]
    fn cover_mass_monotone_in_delta_inverse() {
        let kernel = kernel1d();
        let grid = NoiseGrid::new(1, 0.05, 1.0 / 8.0, 17, 40).unwrap();
        let e = build_ensemble(
            EnsembleParams {
                gamma: 1.5,
                t_horizon: 2.0,
                n_paths: 150,
                path_seed: 23,
            },
            &grid,
            &kernel,
            &[0.0],
        )
        .unwrap();
        let loose = localization_cover(&e, 0.05, 0.2, &kernel).unwrap();
        let tight = localization_cover(&e, 0.4, 0.2, &kernel).unwrap();
        assert!(loose.covered_mass >= tight.covered_mass - 1e-12);
    }

    #[test]
    fn flow_overlap_at_zero_equals_plain_overlap() {
        let kernel = kernel1d();
        let grid = NoiseGrid::new(1, 0.05, 1.0 / 8.0, 31, 40).unwrap();
        let e = build_ensemble(
            EnsembleParams {
                gamma: 0.5,
                t_horizon: 2.0,
                n_paths: 200,
                path_seed: 37,
            },
            &grid,
            &kernel,
            &[0.0],
        )
        .unwrap();
        let eta = NoiseGrid::new(1, 0.05, 1.0 / 8.0, 999, 40).unwrap();
        let h_eta: Vec<f64> = e
            .paths
            .iter()
            .map(|p| gmc::hamiltonian(p, &eta, &kernel, 40).unwrap())
            .collect();
        let seed = 4242;
        let i0 = flow_overlap_i(&e, &h_eta, &kernel, 0.0, 1, 5000, seed).unwrap();
        let pair_seed = rng::derive_seed(seed, rng::domain::PAIRS, 0);
        let plain = time_avg_overlap(&e.paths, &e.weights, &kernel, 40, 5000, pair_seed);
        assert_eq!(i0.to_bits(), plain.to_bits());
        assert!(flow_overlap_i(&e, &h_eta, &kernel, 1.0, 5, 5000, seed).is_err());
    }

    #[test]
    fn reweighted_product_density_has_unit_mean() {
        // normalized reweighting makes the product density average to 1
        let kernel = kernel1d();
        let grid = NoiseGrid::new(1, 0.05, 1.0 / 8.0, 41, 40).unwrap();
        let e = build_ensemble(
            EnsembleParams {
                gamma: 0.5,
                t_horizon: 2.0,
                n_paths: 150,
                path_seed: 43,
            },
            &grid,
            &kernel,
            &[0.0],
        )
        .unwrap();
        let eta = NoiseGrid::new(1, 0.05, 1.0 / 8.0, 555, 40).unwrap();
        let h_eta: Vec<f64> = e
            .paths
            .iter()
            .map(|p| gmc::hamiltonian(p, &eta, &kernel, 40).unwrap())
            .collect();
        let amp = (1.0 - (-2.0f64 * 0.7).exp()).sqrt();
        let extra: Vec<f64> = h_eta.iter().map(|h| e.gamma * amp * h).collect();
        let (w, _) = e.reweighted(&extra);
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let prod_total: f64 = w.iter().flat_map(|a| w.iter().map(move |b| a * b)).sum();
        assert!((prod_total - 1.0).abs() < 1e-10);
    }
}
