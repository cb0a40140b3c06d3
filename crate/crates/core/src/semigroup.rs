//! Evolution of the linearised semigroup on the truncated basis.
//!
//! With the generator assembled as `L + A`, the semigroup is the matrix
//! flow `c'(t) = (L + A) c(t)` on basis coefficients. Three independent
//! certificates tie the discretisation to the object it stands for: the
//! perturbation identity (the flow of `L + A` equals the flow of `L` plus
//! the interaction picked up along the way), invariance of the mean, and
//! the exponential decay rate read off the trajectory agreeing with the
//! spectral gap.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{expm, rk45_linear, Mat};

/// Relative tolerance of the adaptive integrator.
const ODE_REL_TOL: f64 = 1e-10;
const ODE_ABS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct SemigroupTrajectory {
    /// Increasing observation times starting at zero.
    pub times: Vec<f64>,
    /// Basis coefficients of the evolved function per time.
    pub coeffs: Vec<Vec<f64>>,
    /// L2 distance from the conserved mean per time.
    pub l2_norms: Vec<f64>,
}

fn mean_zero_norm(c: &[f64], mean: f64) -> f64 {
    let mut s = (c[0] - mean) * (c[0] - mean);
    for &v in &c[1..] {
        s += v * v;
    }
    s.sqrt()
}

/// Evolve coefficients through `exp(t (L + A))` at the given times.
///
/// Short schedules (at most 8 times) go through the scaling-and-squaring
/// matrix exponential step by step; longer ones integrate with adaptive
/// Runge-Kutta. Both routes agree to 1e-8 and the tests pin that.
pub fn evolve(l: &Mat, a: &Mat, f_coeffs: &[f64], times: &[f64]) -> Result<SemigroupTrajectory> {
    assert!(
        !times.is_empty() && times[0] == 0.0,
        "times must start at 0"
    );
    assert!(
        times.windows(2).all(|w| w[1] > w[0]),
        "times must be increasing"
    );
    assert_eq!(l.rows(), f_coeffs.len(), "coefficient length mismatch");

    let gen = l.add(a);
    let mean = f_coeffs[0];
    let mut coeffs = Vec::with_capacity(times.len());
    let mut l2_norms = Vec::with_capacity(times.len());
    coeffs.push(f_coeffs.to_vec());
    l2_norms.push(mean_zero_norm(f_coeffs, mean));

    let use_expm = times.len() <= 8;
    let mut current = f_coeffs.to_vec();
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        current = if use_expm {
            expm(&gen.scale(dt))?.matvec(&current)
        } else {
            rk45_linear(&gen, &current, dt, ODE_REL_TOL, ODE_ABS_TOL)?
        };
        coeffs.push(current.clone());
        l2_norms.push(mean_zero_norm(&current, mean));
    }
    Ok(SemigroupTrajectory {
        times: times.to_vec(),
        coeffs,
        l2_norms,
    })
}

/// L2 residual of the perturbation identity at time `t`:
/// flow(L+A) f - flow(L) f - integral of P_s A Q_{t-s} f ds,
/// the integral by composite Simpson on `substeps` intervals.
///
/// The propagators at the Simpson nodes are assembled by repeated products
/// of the single-substep exponentials, so the whole check costs O(substeps)
/// matrix products; the residual falls at fourth order in the step.
pub fn duhamel_residual(
    l: &Mat,
    a: &Mat,
    f_coeffs: &[f64],
    t: f64,
    substeps: usize,
) -> Result<f64> {
    assert!(t > 0.0, "time must be positive");
    assert!(
        substeps >= 8 && substeps.is_multiple_of(2),
        "substeps must be even and >= 8"
    );

    let n = substeps;
    let h = t / n as f64;
    let gen = l.add(a);
    let e_l = expm(&l.scale(h))?;
    let e_gen = expm(&gen.scale(h))?;

    // q[k] = Q_{t - kh} f, marched down from Q_t f by stepping f forward.
    let mut q = vec![Vec::new(); n + 1];
    q[n] = f_coeffs.to_vec();
    for k in (0..n).rev() {
        q[k] = e_gen.matvec(&q[k + 1]);
    }
    // integrand[k] = P_{kh} A q[k], with P_{kh} built incrementally from
    // the single-substep exponential.
    let mut integrand = Vec::with_capacity(n + 1);
    integrand.push(a.matvec(&q[0]));
    let mut power = Mat::identity(l.rows());
    for qk in q.iter().skip(1) {
        power = e_l.matmul(&power);
        integrand.push(power.matvec(&a.matvec(qk)));
    }

    // Composite Simpson.
    let dim = f_coeffs.len();
    let mut integral = vec![0.0; dim];
    for (k, vec) in integrand.iter().enumerate() {
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        for (acc, &v) in integral.iter_mut().zip(vec) {
            *acc += w * v;
        }
    }
    for v in integral.iter_mut() {
        *v *= h / 3.0;
    }

    let q_t = &q[0];
    let p_t = {
        let e_l_full = expm(&l.scale(t))?;
        e_l_full.matvec(f_coeffs)
    };
    let mut r2 = 0.0;
    for i in 0..dim {
        let r = q_t[i] - p_t[i] - integral[i];
        r2 += r * r;
    }
    Ok(r2.sqrt())
}

/// Maximum drift of the conserved mean along a trajectory: the zeroth basis
/// function is the constant one, so coefficient zero IS the mean.
pub fn invariance_check(trajectory: &SemigroupTrajectory, mu_f: f64) -> f64 {
    trajectory
        .coeffs
        .iter()
        .map(|c| (c[0] - mu_f).abs())
        .fold(0.0, f64::max)
}

/// Exponential decay rate fitted to a trajectory window.
#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    /// Decay rate (minus the slope of log-norm against time).
    pub rate: f64,
    /// Fitted log-prefactor (intercept at t = 0).
    pub log_prefactor: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    /// Standard error of the fitted rate.
    pub rate_stderr: f64,
}

/// Least squares of log l2_norms against time on the window.
pub fn decay_rate(trajectory: &SemigroupTrajectory, window: (f64, f64)) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = trajectory
        .times
        .iter()
        .zip(&trajectory.l2_norms)
        .filter(|(&t, &n)| t >= window.0 && t <= window.1 && n > 0.0)
        .map(|(&t, &n)| (t, n.ln()))
        .collect();
    fit_log_line(&pts, window)
}

/// Shared fitting helper for semigroup and particle trajectories.
pub fn fit_log_line(pts: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit> {
    let n = pts.len();
    if n < 4 {
        return Err(Error::InsufficientData {
            points: n,
            needed: 4,
        });
    }
    let nf = n as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = nf * sxx - sx * sx;
    if denom <= 0.0 {
        return Err(Error::InsufficientData {
            points: n,
            needed: 4,
        });
    }
    let slope = (nf * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / nf;

    let mean_y = sy / nf;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(x, y) in pts {
        let fit = slope * x + intercept;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    let rate_stderr = if n > 2 {
        (ss_res / (nf - 2.0) / (sxx - sx * sx / nf)).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(RateFit {
        rate: -slope,
        log_prefactor: intercept,
        r_squared,
        window,
        rate_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{
        assemble_generator, assemble_perturbation, build_basis, spectral_panels,
        spectral_truncation, spectrum, OrthoBasis,
    };
    use crate::measure::gibbs_measure;
    use crate::model::{make_model, ModelKind, ModelSpec};
    use crate::selfconsistency::find_roots;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn setup(
        kind: ModelKind,
        beta: f64,
        sigma: f64,
        size: usize,
    ) -> (ModelSpec, OrthoBasis, Mat, Mat) {
        let model = make_model(kind, beta, sigma).unwrap();
        let m = if beta == 0.0 {
            // Any frozen value works at zero interaction; use the fixed point.
            match kind {
                ModelKind::Dawson => 0.0,
                _ => (-sigma * sigma / 4.0f64).exp(),
            }
        } else {
            let scan = if kind == ModelKind::Dawson {
                (0.1, 2.0)
            } else {
                (-1.0, 1.0)
            };
            find_roots(&model, scan, 64)
                .unwrap()
                .roots
                .last()
                .unwrap()
                .m
        };
        let r = spectral_truncation(&model, size);
        let mu = gibbs_measure(&model, m, r, spectral_panels(&model, r, size)).unwrap();
        let basis = build_basis(mu, size).unwrap();
        let l = assemble_generator(&basis, &model, m).unwrap();
        let a = assemble_perturbation(&basis, &model, m).unwrap();
        (model, basis, l, a)
    }

    fn unit_p1(size: usize) -> Vec<f64> {
        let mut f = vec![0.0; size];
        f[1] = 1.0;
        f
    }

    #[test]
    fn constant_function_is_fixed() {
        let (_, _, l, a) = setup(ModelKind::GaussCos1d, 1.0, SQRT2, 25);
        let mut f = vec![0.0; 25];
        f[0] = 2.5;
        let times: Vec<f64> = vec![0.0, 0.5, 1.0, 2.0];
        let traj = evolve(&l, &a, &f, &times).unwrap();
        for (c, n) in traj.coeffs.iter().zip(&traj.l2_norms) {
            assert!((c[0] - 2.5).abs() < 1e-12);
            assert!(*n < 1e-12);
        }
    }

    #[test]
    fn ou_mode_decays_at_unit_rate() {
        let (_, _, l, a) = setup(ModelKind::OuBaseline, 0.0, SQRT2, 30);
        let times = vec![0.0, 0.25, 0.5, 1.0, 2.0];
        let traj = evolve(&l, &a, &unit_p1(30), &times).unwrap();
        for (t, c) in times.iter().zip(&traj.coeffs) {
            assert!(
                (c[1] - (-t).exp()).abs() < 1e-8,
                "t={t}: {} vs {}",
                c[1],
                (-t).exp()
            );
        }
    }

    #[test]
    fn expm_and_rk45_routes_agree() {
        let (_, _, l, a) = setup(ModelKind::GaussCos1d, 1.0, SQRT2, 30);
        let f = unit_p1(30);
        // Short schedule: matrix exponential.
        let short = evolve(&l, &a, &f, &[0.0, 0.7, 1.9]).unwrap();
        // Long schedule hits the same times with the ODE integrator.
        let long_times: Vec<f64> = (0..20).map(|i| 0.1 * i as f64).collect();
        let long = evolve(&l, &a, &f, &long_times).unwrap();
        let at = |traj: &SemigroupTrajectory, t: f64| -> Vec<f64> {
            let i = traj
                .times
                .iter()
                .position(|&u| (u - t).abs() < 1e-12)
                .unwrap();
            traj.coeffs[i].clone()
        };
        for t in [0.7, 1.9] {
            let a1 = at(&short, t);
            let b1 = at(&long, t);
            for (x, y) in a1.iter().zip(&b1) {
                assert!((x - y).abs() < 1e-8, "t={t}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn semigroup_property_composes() {
        let (_, _, l, a) = setup(ModelKind::GaussCos1d, 1.0, SQRT2, 30);
        let f = unit_p1(30);
        let one = evolve(&l, &a, &f, &[0.0, 0.6]).unwrap();
        let two = evolve(&l, &a, &one.coeffs[1], &[0.0, 0.9]).unwrap();
        let direct = evolve(&l, &a, &f, &[0.0, 1.5]).unwrap();
        for (x, y) in two.coeffs[1].iter().zip(&direct.coeffs[1]) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_perturbation_gives_zero_residual() {
        let (_, _, l, _) = setup(ModelKind::OuBaseline, 0.0, SQRT2, 25);
        let zero = Mat::zeros(25, 25);
        let r = duhamel_residual(&l, &zero, &unit_p1(25), 1.0, 16).unwrap();
        assert!(r < 1e-12, "residual {r}");
    }

    #[test]
    fn residual_falls_at_fourth_order() {
        // Doubling the substeps cuts the residual by 16 asymptotically; the
        // contract bound 1/15 + 1e-3 holds from 16 substeps on (the 8 -> 16
        // pair is still pre-asymptotic at t = 2).
        let (_, _, l, a) = setup(ModelKind::GaussCos1d, 1.0, SQRT2, 30);
        let f = unit_p1(30);
        for t in [1.0, 2.0] {
            let mut prev = duhamel_residual(&l, &a, &f, t, 16).unwrap();
            for n in [32usize, 64, 128] {
                let next = duhamel_residual(&l, &a, &f, t, n).unwrap();
                if prev > 1e-12 {
                    let ratio = next / prev;
                    assert!(
                        ratio <= 1.0 / 15.0 + 1e-3,
                        "t={t}, {n} substeps: ratio {ratio}"
                    );
                }
                prev = next;
            }
        }
        let r64 = duhamel_residual(&l, &a, &f, 1.0, 64).unwrap();
        assert!(r64 < 1e-8, "64-substep residual {r64}");
    }

    #[test]
    fn invariance_holds_and_detects_corruption() {
        let (_, _, l, a) = setup(ModelKind::GaussCos1d, 1.0, SQRT2, 30);
        let mut f = unit_p1(30);
        f[0] = 0.3;
        let times: Vec<f64> = (0..30).map(|i| 0.1 * i as f64).collect();
        let traj = evolve(&l, &a, &f, &times).unwrap();
        assert!(invariance_check(&traj, 0.3) < 1e-8);

        // Corrupt the first row of the perturbation: mass leaks.
        let mut bad = a.clone();
        for j in 0..30 {
            bad[(0, j)] = 0.05;
        }
        let traj_bad = evolve(&l, &bad, &f, &times).unwrap();
        assert!(invariance_check(&traj_bad, 0.3) > 1e-3);
    }

    #[test]
    fn fitted_rate_matches_spectral_gap() {
        let (_, _, l, a) = setup(ModelKind::GaussCos1d, 1.0, SQRT2, 40);
        let report = spectrum(&l, &a).unwrap();
        let times: Vec<f64> = (0..61).map(|i| 0.1 * i as f64).collect();

        // Dominant eigenmode: v_1 = 1, v_k = c_k / (k + lambda*) for k != 1,
        // where c is the profile column of the rank-one update. Pure decay,
        // so the fit pins the gap to high accuracy over [2, 6].
        let lambda_star = -report.lambda_q;
        let mut v = vec![0.0; 40];
        v[1] = 1.0;
        for k in 2..40 {
            v[k] = a[(k, 1)] / (k as f64 + lambda_star);
        }
        let traj = evolve(&l, &a, &v, &times).unwrap();
        let fit = decay_rate(&traj, (2.0, 6.0)).unwrap();
        assert!(
            (fit.rate - report.lambda_q).abs() < 1e-3,
            "fit {} vs gap {}",
            fit.rate,
            report.lambda_q
        );
        assert!(fit.r_squared > 1.0 - 1e-6);

        // A bare first mode carries slowly-fading contamination from the
        // driven faster modes; the fit still lands within a percent.
        let traj2 = evolve(&l, &a, &unit_p1(40), &times).unwrap();
        let fit2 = decay_rate(&traj2, (2.0, 6.0)).unwrap();
        assert!(
            (fit2.rate - report.lambda_q).abs() < 2e-2,
            "fit {} vs gap {}",
            fit2.rate,
            report.lambda_q
        );
    }

    #[test]
    fn ou_rate_fit_is_exact() {
        let (_, _, l, a) = setup(ModelKind::OuBaseline, 0.0, SQRT2, 30);
        let times: Vec<f64> = (0..51).map(|i| 0.1 * i as f64).collect();
        let traj = evolve(&l, &a, &unit_p1(30), &times).unwrap();
        let fit = decay_rate(&traj, (1.0, 5.0)).unwrap();
        assert!((fit.rate - 1.0).abs() < 1e-6);
        assert!(fit.r_squared > 1.0 - 1e-10);
    }

    #[test]
    fn decay_rate_needs_enough_points() {
        let traj = SemigroupTrajectory {
            times: vec![0.0, 1.0],
            coeffs: vec![vec![0.0, 1.0], vec![0.0, 0.3]],
            l2_norms: vec![1.0, 0.3],
        };
        assert!(matches!(
            decay_rate(&traj, (0.0, 1.0)),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn mixed_initial_condition_rate_after_burn_in() {
        // A mix of modes settles onto the slowest nonzero mode once the
        // faster ones have died; window start past the transient.
        let (_, _, l, a) = setup(ModelKind::GaussCos1d, 1.0, SQRT2, 40);
        let report = spectrum(&l, &a).unwrap();
        let mut f = vec![0.0; 40];
        for (k, v) in f.iter_mut().enumerate().skip(1) {
            *v = 1.0 / (1.0 + k as f64);
        }
        let times: Vec<f64> = (0..81).map(|i| 0.1 * i as f64).collect();
        let traj = evolve(&l, &a, &f, &times).unwrap();
        let fit = decay_rate(&traj, (4.0, 8.0)).unwrap();
        assert!(
            (fit.rate - report.lambda_q).abs() < 2e-2,
            "fit {} vs gap {}",
            fit.rate,
            report.lambda_q
        );
    }
}
