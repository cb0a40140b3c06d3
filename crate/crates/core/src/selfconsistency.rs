//! Fixed points of the interaction statistic and the phase diagram.
//!
//! A frozen statistic value `m` induces a Gibbs candidate measure `mu_m`;
//! stationary laws of the full nonlinear dynamics are exactly the solutions
//! of `psi(m) = mu_m(S) - m = 0`. The sign of `psi'` at a root separates
//! candidates for stable and unstable stationary laws; the spectral module
//! confirms the classification.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure;
use crate::model::{ModelKind, ModelSpec};

/// |psi| threshold below which a polished root is accepted.
pub const ROOT_TOL: f64 = 1e-12;
/// Roots closer than this are considered duplicates.
const DEDUP_TOL: f64 = 1e-8;
/// Central-difference step for psi'.
const PSI_PRIME_STEP: f64 = 1e-5;
/// Quadrature panels used for psi evaluations.
const PSI_PANELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootClass {
    StableCandidate,
    UnstableCandidate,
    Marginal,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Root {
    pub m: f64,
    pub psi_prime: f64,
    pub classification: RootClass,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfConsistencyResult {
    pub roots: Vec<Root>,
    pub scan_interval: (f64, f64),
    pub residuals: Vec<f64>,
}

fn classify(psi_prime: f64) -> RootClass {
    if psi_prime < -1e-8 {
        RootClass::StableCandidate
    } else if psi_prime > 1e-8 {
        RootClass::UnstableCandidate
    } else {
        RootClass::Marginal
    }
}

/// Statistic mismatch `psi(m) = mu_m(S) - m`.
pub fn psi(model: &ModelSpec, m: f64) -> Result<f64> {
    assert_eq!(model.dim, 1, "psi is defined for one-dimensional models");
    let mu = measure::gibbs_measure_auto(model, m, PSI_PANELS)?;
    Ok(mu.moment(|x| model.stat(x))? - m)
}

/// Closed form of psi for the Gaussian-cosine family: the frozen candidate
/// is N(beta m, sigma^2/2), so mu_m(cos) = exp(-sigma^2/4) cos(beta m).
pub fn psi_gausscos_analytic(model: &ModelSpec, m: f64) -> f64 {
    let var = model.sigma * model.sigma / 2.0;
    (-var / 2.0).exp() * (model.beta * m).cos() - m
}

/// psi' by central differences.
pub fn psi_prime(model: &ModelSpec, m: f64) -> Result<f64> {
    let h = PSI_PRIME_STEP;
    Ok((psi(model, m + h)? - psi(model, m - h)?) / (2.0 * h))
}

/// The derivative identity psi'(m) = -1 + (2 beta / sigma^2) Var_{mu_m}(S),
/// an algebraic route independent of finite differences.
pub fn psi_prime_variance_form(model: &ModelSpec, m: f64) -> Result<f64> {
    let mu = measure::gibbs_measure_auto(model, m, PSI_PANELS)?;
    let s_mean = mu.moment(|x| model.stat(x))?;
    let var = mu.moment(|x| {
        let d = model.stat(x) - s_mean;
        d * d
    })?;
    Ok(-1.0 + 2.0 * model.beta / (model.sigma * model.sigma) * var)
}

/// Scan `psi` on a uniform grid over `interval`, bracket sign changes,
/// polish each bracket by bisection to |psi| < 1e-12 plus one Newton step,
/// and classify by the sign of psi'.
pub fn find_roots(
    model: &ModelSpec,
    interval: (f64, f64),
    grid: usize,
) -> Result<SelfConsistencyResult> {
    assert!(interval.1 > interval.0, "empty scan interval");
    assert!(grid >= 32, "scan grid must have at least 32 points");

    let (lo, hi) = interval;
    let xs: Vec<f64> = (0..grid)
        .map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64)
        .collect();
    let vals: Vec<f64> = xs
        .par_iter()
        .map(|&m| psi(model, m))
        .collect::<Result<_>>()?;

    let mut raw_roots: Vec<f64> = Vec::new();
    for i in 0..grid {
        // Grid point dead on a root.
        if vals[i].abs() < ROOT_TOL {
            raw_roots.push(xs[i]);
            continue;
        }
        if i + 1 < grid && vals[i] * vals[i + 1] < 0.0 {
            raw_roots.push(polish(model, xs[i], xs[i + 1], vals[i])?);
        }
    }

    raw_roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    raw_roots.dedup_by(|a, b| (*a - *b).abs() < DEDUP_TOL);

    let mut roots = Vec::with_capacity(raw_roots.len());
    let mut residuals = Vec::with_capacity(raw_roots.len());
    for m in raw_roots {
        let residual = psi(model, m)?.abs();
        let dpsi = psi_prime(model, m)?;
        roots.push(Root {
            m,
            psi_prime: dpsi,
            classification: classify(dpsi),
            residual,
        });
        residuals.push(residual);
    }
    Ok(SelfConsistencyResult {
        roots,
        scan_interval: interval,
        residuals,
    })
}

/// Bisection to |psi| < tol, then a single finite-difference Newton step.
fn polish(model: &ModelSpec, mut a: f64, mut b: f64, mut fa: f64) -> Result<f64> {
    let mut mid = 0.5 * (a + b);
    for _ in 0..200 {
        mid = 0.5 * (a + b);
        let fm = psi(model, mid)?;
        if fm.abs() < ROOT_TOL || (b - a) < f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    // One Newton polish with a finite-difference slope.
    let f = psi(model, mid)?;
    let h = PSI_PRIME_STEP;
    let slope = (psi(model, mid + h)? - psi(model, mid - h)?) / (2.0 * h);
    if slope.abs() > 1e-12 {
        let next = mid - f / slope;
        if next.is_finite() && psi(model, next)?.abs() <= f.abs() {
            mid = next;
        }
    }
    Ok(mid)
}

/// One row of the noise-level sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub num_roots: usize,
    /// Largest positive root when the model is in the multi-root regime.
    pub m_plus: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Critical noise level separating the 3-root and 1-root regimes,
    /// when bracketed by the sweep range.
    pub sigma_critical: Option<f64>,
}

/// Sweep sigma over a log-uniform grid, recording the root count and the
/// positive root, and refine the regime boundary to 1e-4 in sigma.
///
/// The refinement bisects on the sign of psi'(0): the symmetric models lose
/// their outer roots exactly where the symmetric candidate turns marginal,
/// and that predicate stays sharp when the merging roots drop below the scan
/// grid's resolution.
pub fn sweep_sigma(
    kind: ModelKind,
    beta: f64,
    sigma_range: (f64, f64),
    steps: usize,
) -> Result<SweepResult> {
    assert!(sigma_range.0 > 0.0 && sigma_range.1 > sigma_range.0);
    assert!(steps >= 8, "sweep needs at least 8 steps");

    let (lo, hi) = sigma_range;
    let sigmas: Vec<f64> = (0..steps)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (steps - 1) as f64).exp())
        .collect();

    let rows: Vec<SweepRow> = sigmas
        .par_iter()
        .map(|&sigma| -> Result<SweepRow> {
            let model = crate::model::make_model(kind, beta, sigma)?;
            let res = find_roots(&model, (-3.0, 3.0), 257)?;
            let m_plus = res
                .roots
                .iter()
                .map(|r| r.m)
                .filter(|&m| m > DEDUP_TOL)
                .fold(None, |acc: Option<f64>, m| {
                    Some(acc.map_or(m, |a: f64| a.max(m)))
                });
            Ok(SweepRow {
                sigma,
                num_roots: res.roots.len(),
                m_plus,
            })
        })
        .collect::<Result<_>>()?;

    // Bracket the 3-root -> 1-root transition.
    let mut bracket: Option<(f64, f64)> = None;
    for w in rows.windows(2) {
        if w[0].num_roots >= 3 && w[1].num_roots == 1 {
            bracket = Some((w[0].sigma, w[1].sigma));
            break;
        }
    }
    let sigma_critical = match bracket {
        None => None,
        Some((mut a, mut b)) => {
            let marginal = |sigma: f64| -> Result<f64> {
                let model = crate::model::make_model(kind, beta, sigma)?;
                psi_prime_variance_form(&model, 0.0)
            };
            while b - a > 1e-4 {
                let mid = 0.5 * (a + b);
                if marginal(mid)? > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            Some(0.5 * (a + b))
        }
    };

    Ok(SweepResult {
        rows,
        sigma_critical,
    })
}

/// Fixed point of the coupled pair equations of the 2-d model:
/// m1 = E cos N(beta m2, 1), m2 = E cos N(beta m1, 1).
///
/// Damped fixed-point iteration (damping 0.5, tolerance 1e-12, at most
/// 10^4 iterations) with a 2-d Newton polish as the fallback.
pub fn solve_pair_fixed_point(model: &ModelSpec) -> Result<(f64, f64)> {
    assert_eq!(model.kind, ModelKind::GaussCos2d);
    let beta = model.beta;
    let var = model.sigma * model.sigma / 2.0;
    let e = (-var / 2.0).exp();
    let damp = 0.5;
    let map = |m: (f64, f64)| -> (f64, f64) { (e * (beta * m.1).cos(), e * (beta * m.0).cos()) };

    let mut m = (0.5, 0.5);
    for _ in 0..10_000 {
        let target = map(m);
        let next = (m.0 + damp * (target.0 - m.0), m.1 + damp * (target.1 - m.1));
        let delta = (next.0 - m.0).abs().max((next.1 - m.1).abs());
        m = next;
        if delta < 1e-12 {
            break;
        }
    }

    // Newton polish on F(m) = map(m) - m (also rescues a stalled iteration).
    for _ in 0..50 {
        let f = (map(m).0 - m.0, map(m).1 - m.1);
        if f.0.abs().max(f.1.abs()) < 1e-14 {
            break;
        }
        // Jacobian of F: [[-1, -e beta sin(beta m2)], [-e beta sin(beta m1), -1]].
        let a = -1.0;
        let b = -e * beta * (beta * m.1).sin();
        let c = -e * beta * (beta * m.0).sin();
        let det = a * a - b * c;
        if det.abs() < 1e-14 {
            break;
        }
        let dm0 = (a * f.0 - b * f.1) / det;
        let dm1 = (a * f.1 - c * f.0) / det;
        m = (m.0 - dm0, m.1 - dm1);
    }

    let f = (map(m).0 - m.0, map(m).1 - m.1);
    if f.0.abs().max(f.1.abs()) > 1e-10 {
        return Err(Error::FitWindow {
            detail: format!("pair fixed point did not converge: residual {f:?}"),
        });
    }
    Ok(m)
}
