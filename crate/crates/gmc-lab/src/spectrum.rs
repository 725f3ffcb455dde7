//! Dirichlet principal eigenvalues, Bessel zeros and decay-rate fits.
//!
//! The tube-decay rate of Wiener measure on a radius-r ball is the principal
//! eigenvalue of -1/2 Laplacian with Dirichlet boundary, which for a ball is
//! `j_{d/2-1,1}^2 / (2 r^2)` with `j_{nu,1}` the first positive zero of the
//! Bessel function J_nu. Zeros are found by bisection on an ascending-series
//! evaluation; a radial finite-volume eigensolver acts as the independent
//! cross-check.

use crate::error::{Error, Result};
use crate::math::ln_gamma;

/// J_nu(x) by the ascending power series. For the arguments needed here
/// (x <= ~16, nu in [-1/2, 10]) the series terms stay small enough that
/// cancellation costs at most a few digits.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let half = 0.5 * x;
    // m = 0 term: (x/2)^nu / Gamma(nu+1)
    let mut term = (nu * half.ln() - ln_gamma(nu + 1.0)).exp();
    let mut sum = term;
    let q = half * half;
    for m in 1..200 {
        let mf = m as f64;
        term *= -q / (mf * (mf + nu));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-30) {
            break;
        }
    }
    sum
}

/// First positive zero of J_nu, for nu in [-1/2, 10].
pub fn bessel_first_zero(nu: f64) -> Result<f64> {
    if !(-0.5..=10.0).contains(&nu) {
        return Err(Error::invalid("Bessel order must lie in [-1/2, 10]"));
    }
    // J_nu > 0 on (0, j_{nu,1}); scan for the sign change.
    let start = if nu <= 0.0 { 0.05 } else { nu.max(0.05) };
    let mut lo = start;
    let mut hi = start;
    let mut f_lo = bessel_j(nu, lo);
    let mut found = false;
    let step = 0.25;
    for _ in 0..400 {
        hi = lo + step;
        let f_hi = bessel_j(nu, hi);
        if f_lo > 0.0 && f_hi <= 0.0 {
            found = true;
            break;
        }
        lo = hi;
        f_lo = f_hi;
    }
    if !found {
        return Err(Error::Degenerate(format!(
            "failed to bracket the first zero of J_{nu}"
        )));
    }
    let mut a = lo;
    let mut b = hi;
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        if b - a < 1e-12 {
            break;
        }
        if bessel_j(nu, mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Principal Dirichlet eigenvalue of -1/2 Laplacian on the ball of radius r.
pub fn dirichlet_eigenvalue(d: usize, r: f64) -> Result<f64> {
    if d == 0 || !(r > 0.0) {
        return Err(Error::invalid("need d >= 1 and r > 0"));
    }
    let nu = d as f64 / 2.0 - 1.0;
    let j = bessel_first_zero(nu)?;
    Ok(j * j / (2.0 * r * r))
}

/// Radial finite-volume eigensolver for the same eigenvalue, used as an
/// independent oracle. Ground mode is radial, so the problem reduces to a
/// generalized symmetric tridiagonal eigenproblem K u = lambda M u with the
/// s^{d-1} volume weight; inverse iteration with Thomas solves converges in a
/// few dozen steps.
pub fn dirichlet_eigenvalue_fd(d: usize, r: f64, nodes: usize) -> Result<f64> {
    if d == 0 || !(r > 0.0) || nodes < 16 {
        return Err(Error::invalid("need d >= 1, r > 0 and >= 16 nodes"));
    }
    let n = nodes; // interior unknowns u_0..u_{n-1}; u at s=r is 0
    let h = r / n as f64;
    let dm1 = d as f64 - 1.0;
    let flux = |k: f64| -> f64 { (k * h).powf(dm1) }; // s^{d-1} at half-nodes
    let volume = |k: usize| -> f64 {
        // integral of s^{d-1} over the cell around node k
        let lo = if k == 0 { 0.0 } else { (k as f64 - 0.5) * h };
        let hi = (k as f64 + 0.5) * h;
        (hi.powi(d as i32) - lo.powi(d as i32)) / d as f64
    };

    // K tridiagonal: K[k][k] = (flux(k-1/2) + flux(k+1/2)) / (2 h),
    // off-diagonal -flux(k+1/2) / (2 h); factor 1/2 from the -1/2 Laplacian.
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1]; // off[k] couples k and k+1
    for k in 0..n {
        let fl = if k == 0 { 0.0 } else { flux(k as f64 - 0.5) };
        let fr = flux(k as f64 + 0.5);
        diag[k] = (fl + fr) / (2.0 * h);
        if k + 1 < n {
            off[k] = -fr / (2.0 * h);
        }
    }
    let mass: Vec<f64> = (0..n).map(volume).collect();

    // inverse iteration: solve K u = M u_prev
    let mut u = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let rhs: Vec<f64> = (0..n).map(|k| mass[k] * u[k]).collect();
        let v = thomas_solve(&diag, &off, &rhs);
        // Rayleigh quotient lambda = (v' K v) / (v' M v)
        let mut kvv = 0.0;
        for k in 0..n {
            kvv += diag[k] * v[k] * v[k];
            if k + 1 < n {
                kvv += 2.0 * off[k] * v[k] * v[k + 1];
            }
        }
        let mvv: f64 = (0..n).map(|k| mass[k] * v[k] * v[k]).sum();
        let new_lambda = kvv / mvv;
        let norm = mvv.sqrt();
        u = v.iter().map(|x| x / norm).collect();
        if (new_lambda - lambda).abs() < 1e-13 * new_lambda.abs().max(1.0) {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    Ok(lambda)
}

fn thomas_solve(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut dvec = vec![0.0; n];
    c[0] = off.first().copied().unwrap_or(0.0) / diag[0];
    dvec[0] = rhs[0] / diag[0];
    for k in 1..n {
        let m = diag[k] - off[k - 1] * c[k - 1];
        c[k] = if k < n - 1 { off[k] / m } else { 0.0 };
        dvec[k] = (rhs[k] - off[k - 1] * dvec[k - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dvec[n - 1];
    for k in (0..n - 1).rev() {
        x[k] = dvec[k] - c[k] * x[k + 1];
    }
    x
}

#[derive(Clone, Debug)]
pub struct ThetaRate {
    pub lambda1_sqrt2r: f64,
    pub theta: f64,
    /// The cruder bound lambda1/4 - gamma^2 V0 from the positivity argument.
    pub generic_lower_bound: f64,
}

/// Decay rate Theta = lambda1(sqrt(2) r)/4 - gamma^2 V0 / 2 for the GMC tube
/// volume in the small-coupling regime.
pub fn theta_rate(d: usize, r: f64, gamma: f64, v0: f64) -> Result<ThetaRate> {
    let lambda1 = dirichlet_eigenvalue(d, std::f64::consts::SQRT_2 * r)?;
    Ok(ThetaRate {
        lambda1_sqrt2r: lambda1,
        theta: 0.25 * lambda1 - 0.5 * gamma * gamma * v0,
        generic_lower_bound: 0.25 * lambda1 - gamma * gamma * v0,
    })
}

#[derive(Clone, Debug)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// half-width of the 95% confidence interval on the slope
    pub ci95: f64,
    pub points_used: usize,
}

/// Weighted least-squares slope of log-value against T. Weights are
/// 1/stderr^2; points with non-finite values (flagged estimates) are dropped.
pub fn decay_rate_fit(series: &[(f64, f64, f64)]) -> Result<RateFit> {
    let pts: Vec<(f64, f64, f64)> = series
        .iter()
        .copied()
        .filter(|(_, v, _)| v.is_finite())
        .collect();
    if pts.len() < 4 {
        return Err(Error::Degenerate(format!(
            "rate fit needs >= 4 usable points, got {}",
            pts.len()
        )));
    }
    let t0 = pts[0].0;
    if pts.iter().all(|(t, _, _)| (*t - t0).abs() < 1e-12) {
        return Err(Error::Degenerate("all horizons equal".into()));
    }
    let weights: Vec<f64> = pts
        .iter()
        .map(|(_, _, se)| if *se > 0.0 { 1.0 / (se * se) } else { 1.0 })
        .collect();
    let wsum: f64 = weights.iter().sum();
    let tbar: f64 = pts.iter().zip(&weights).map(|((t, _, _), w)| w * t).sum::<f64>() / wsum;
    let vbar: f64 = pts.iter().zip(&weights).map(|((_, v, _), w)| w * v).sum::<f64>() / wsum;
    let sxx: f64 = pts
        .iter()
        .zip(&weights)
        .map(|((t, _, _), w)| w * (t - tbar) * (t - tbar))
        .sum();
    let sxy: f64 = pts
        .iter()
        .zip(&weights)
        .map(|((t, v, _), w)| w * (t - tbar) * (v - vbar))
        .sum();
    let slope = sxy / sxx;
    let intercept = vbar - slope * tbar;
    // residual variance scaled to the weights
    let dof = (pts.len() - 2).max(1) as f64;
    let chi2: f64 = pts
        .iter()
        .zip(&weights)
        .map(|((t, v, _), w)| {
            let r = v - (intercept + slope * t);
            w * r * r
        })
        .sum();
    let scale = (chi2 / dof).max(1.0); // inflate when residuals exceed the stated errors
    let slope_stderr = (scale / sxx).sqrt();
    Ok(RateFit {
        slope,
        intercept,
        slope_stderr,
        ci95: 1.96 * slope_stderr,
        points_used: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn bessel_series_spot_values() {
        // J_0(1) and J_1(1) reference values
        assert_relative_eq!(bessel_j(0.0, 1.0), 0.7651976865579666, epsilon = 1e-12);
        assert_relative_eq!(bessel_j(1.0, 1.0), 0.4400505857449335, epsilon = 1e-12);
        // half-integer closed forms
        assert_relative_eq!(
            bessel_j(0.5, 2.0),
            (2.0 / (PI * 2.0)).sqrt() * (2.0f64).sin(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            bessel_j(-0.5, 2.0),
            (2.0 / (PI * 2.0)).sqrt() * (2.0f64).cos(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn first_zeros() {
        assert_relative_eq!(bessel_first_zero(0.5).unwrap(), PI, epsilon = 1e-10);
        assert_relative_eq!(bessel_first_zero(-0.5).unwrap(), PI / 2.0, epsilon = 1e-10);
        assert_relative_eq!(
            bessel_first_zero(0.0).unwrap(),
            2.404825557695773,
            epsilon = 1e-9
        );
        assert!(bessel_first_zero(11.0).is_err());
    }

    #[test]
    fn eigenvalue_closed_forms_and_scaling() {
        assert_relative_eq!(
            dirichlet_eigenvalue(1, 1.0).unwrap(),
            PI * PI / 8.0,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            dirichlet_eigenvalue(3, 1.0).unwrap(),
            PI * PI / 2.0,
            max_relative = 1e-9
        );
        let l1 = dirichlet_eigenvalue(2, 1.0).unwrap();
        let l2 = dirichlet_eigenvalue(2, 2.0).unwrap();
        assert_relative_eq!(l2, l1 / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn fd_solver_agrees_with_bessel_route() {
        for d in 1..=4 {
            for r in [0.5, 1.0, 2.0] {
                let a = dirichlet_eigenvalue(d, r).unwrap();
                let b = dirichlet_eigenvalue_fd(d, r, 501).unwrap();
                assert!(
                    (a - b).abs() / a < 1e-4,
                    "d={d} r={r}: bessel {a} vs fd {b}"
                );
            }
        }
    }

    #[test]
    fn theta_rate_behaviour() {
        let v0 = 1.35;
        let t0 = theta_rate(1, 1.0, 0.0, v0).unwrap();
        assert_relative_eq!(t0.theta, 0.25 * t0.lambda1_sqrt2r, epsilon = 1e-12);
        // decreasing in gamma
        let mut prev = t0.theta;
        for g in [0.2, 0.4, 0.8, 1.6] {
            let t = theta_rate(1, 1.0, g, v0).unwrap().theta;
            assert!(t < prev);
            prev = t;
        }
        // gamma_c where the generic bound changes sign brackets it exactly
        let r = 1.0;
        let lam = dirichlet_eigenvalue(1, std::f64::consts::SQRT_2 * r).unwrap();
        let gamma_c = (0.25 * lam / v0).sqrt();
        let below = theta_rate(1, r, gamma_c * 0.999, v0).unwrap();
        let above = theta_rate(1, r, gamma_c * 1.001, v0).unwrap();
        assert!(below.generic_lower_bound > 0.0 && above.generic_lower_bound < 0.0);
        // small radius at fixed gamma turns Theta positive
        let t = theta_rate(1, 0.05, 1.0, v0).unwrap();
        assert!(t.theta > 0.0);
    }

    #[test]
    fn rate_fit_exact_line_and_degenerate_inputs() {
        let series: Vec<(f64, f64, f64)> =
            (1..=6).map(|k| (k as f64, -2.0 * k as f64, 0.1)).collect();
        let fit = decay_rate_fit(&series).unwrap();
        assert_relative_eq!(fit.slope, -2.0, epsilon = 1e-12);

        let constant: Vec<(f64, f64, f64)> = (1..=5).map(|k| (k as f64, 3.0, 0.1)).collect();
        assert_relative_eq!(decay_rate_fit(&constant).unwrap().slope, 0.0, epsilon = 1e-12);

        assert!(decay_rate_fit(&[(1.0, 1.0, 0.1); 5]).is_err());
        assert!(decay_rate_fit(&series[..3]).is_err());
        // flagged points (NaN) are dropped
        let mut with_flag = series.clone();
        with_flag.push((7.0, f64::NAN, 0.0));
        assert_eq!(decay_rate_fit(&with_flag).unwrap().points_used, 6);
    }

    #[test]
    fn rate_fit_coverage_under_noise() {
        // synthetic line with known Gaussian noise: the 95% CI covers the
        // true slope in at least ~90 of 100 trials
        let mut covered = 0;
        let sd = 0.3;
        for trial in 0..100 {
            let mut stream = crate::rng::Stream::new(1000 + trial, 0);
            let series: Vec<(f64, f64, f64)> = (1..=8)
                .map(|k| {
                    let t = k as f64;
                    (t, -2.0 * t + sd * stream.next_gaussian(), sd)
                })
                .collect();
            let fit = decay_rate_fit(&series).unwrap();
            if (fit.slope + 2.0).abs() <= fit.ci95 {
                covered += 1;
            }
        }
        assert!(covered >= 90, "covered {covered}/100");
    }
}
