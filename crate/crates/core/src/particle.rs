//! Interacting-particle simulation of the nonlinear dynamics.
//!
//! The ensemble replaces the law in the drift by the empirical statistic,
//! so one Euler-Maruyama step costs a single reduction plus an independent
//! update per particle. Noise is counter-based - the increment of particle
//! `i` at step `k` is a pure function of `(seed, i, k)` - which makes runs
//! bitwise reproducible on any thread count, and lets common-random-number
//! comparisons (finite-difference oracles, mirrored runs) share increments
//! exactly.
//!
//! Distances to a target law are tracked through the sorted/comonotone
//! pairing against the target's quantiles: exact for the 1-d Wasserstein
//! distance, an upper bound for the weighted modulus costs.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::measure::GridMeasure;
use crate::metrics::MetricSpec;
use crate::model::ModelSpec;
use crate::rng;

pub use crate::semigroup::RateFit;

/// Positions beyond this magnitude abort the run.
const BLOW_UP: f64 = 1e6;

/// Seed tags separating the draw streams of a run.
const TAG_INIT: u64 = 0x496e_6974;
const TAG_NOISE: u64 = 0x4e6f_6973;
const TAG_FLOOR_A: u64 = 0x466c_4f41;
const TAG_FLOOR_B: u64 = 0x466c_4f42;

#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    /// Flat positions, `dim` entries per particle.
    pub positions: Vec<f64>,
    pub dim: usize,
    pub time: f64,
    /// Counter-based RNG state: the derived noise key plus the step index.
    noise_key: u64,
    step_count: u64,
    /// Recorded (time, statistic) pairs, one per step; the second component
    /// is unused for one-dimensional models.
    pub stat_history: Vec<(f64, [f64; 2])>,
    /// Tamed Euler update (drift / (1 + dt |drift|)) for stiff stress runs.
    pub tamed: bool,
}

impl ParticleEnsemble {
    /// Ensemble of `n` particles drawn from `mu`.
    pub fn from_measure(mu: &GridMeasure, n: usize, seed: u64) -> Self {
        assert!(n >= 1);
        Self::from_positions(mu.sample(n, rng::derive_seed(seed, TAG_INIT)), 1, seed)
    }

    /// As `from_measure`, with every draw shifted by a constant.
    pub fn from_measure_shifted(mu: &GridMeasure, shift: f64, n: usize, seed: u64) -> Self {
        let mut positions = mu.sample(n, rng::derive_seed(seed, TAG_INIT));
        for p in positions.iter_mut() {
            *p += shift;
        }
        Self::from_positions(positions, 1, seed)
    }

    /// Product-law 2-d ensemble: coordinates drawn from two marginals.
    pub fn from_marginals_2d(mu_x: &GridMeasure, mu_y: &GridMeasure, n: usize, seed: u64) -> Self {
        let xs = mu_x.sample(n, rng::derive_seed(seed, TAG_INIT));
        let ys = mu_y.sample(n, rng::derive_seed(seed, TAG_INIT ^ 1));
        let mut positions = Vec::with_capacity(2 * n);
        for i in 0..n {
            positions.push(xs[i]);
            positions.push(ys[i]);
        }
        Self::from_positions(positions, 2, seed)
    }

    pub fn from_positions(positions: Vec<f64>, dim: usize, seed: u64) -> Self {
        assert!(dim == 1 || dim == 2);
        assert!(!positions.is_empty() && positions.len().is_multiple_of(dim));
        ParticleEnsemble {
            positions,
            dim,
            time: 0.0,
            noise_key: rng::derive_seed(seed, TAG_NOISE),
            step_count: 0,
            stat_history: Vec::new(),
            tamed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Empirical interaction statistic of the current state.
    pub fn statistic(&self, model: &ModelSpec) -> [f64; 2] {
        let n = self.len();
        if self.dim == 1 {
            let vals: Vec<f64> = self.positions.iter().map(|&x| model.stat(x)).collect();
            [pairwise_sum(&vals) / n as f64, 0.0]
        } else {
            let sx: Vec<f64> = (0..n).map(|i| self.positions[2 * i].cos()).collect();
            let sy: Vec<f64> = (0..n).map(|i| self.positions[2 * i + 1].cos()).collect();
            [pairwise_sum(&sx) / n as f64, pairwise_sum(&sy) / n as f64]
        }
    }

    /// One Euler-Maruyama step of size `dt` against the empirical statistic.
    pub fn step(&mut self, model: &ModelSpec, dt: f64) -> Result<()> {
        self.step_with_noise_sign(model, dt, 1.0)
    }

    /// Step with every Gaussian increment multiplied by `sign`; the mirror
    /// run used by the symmetry checks.
    pub(crate) fn step_with_noise_sign(
        &mut self,
        model: &ModelSpec,
        dt: f64,
        sign: f64,
    ) -> Result<()> {
        assert!(dt > 0.0 && dt <= 0.1, "step size must lie in (0, 0.1]");
        assert_eq!(model.dim, self.dim, "model/ensemble dimension mismatch");
        let s = self.statistic(model);
        let sqrt_dt = dt.sqrt();
        let sigma = model.sigma;
        let key = self.noise_key;
        let step = self.step_count;
        let tamed = self.tamed;
        let dim = self.dim;

        if dim == 1 {
            let s0 = s[0];
            self.positions
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, x)| {
                    let mut b = model.drift(*x, s0);
                    if tamed {
                        b /= 1.0 + dt * b.abs();
                    }
                    let xi = sign * rng::normal(key, i as u64, step);
                    *x += b * dt + sigma * sqrt_dt * xi;
                });
        } else {
            self.positions
                .par_chunks_mut(2)
                .enumerate()
                .for_each(|(i, xy)| {
                    let pos = [xy[0], xy[1]];
                    let mut b = model.drift_2d(pos, s);
                    if tamed {
                        b[0] /= 1.0 + dt * b[0].abs();
                        b[1] /= 1.0 + dt * b[1].abs();
                    }
                    let xi0 = sign * rng::normal(key, i as u64, 2 * step);
                    let xi1 = sign * rng::normal(key, i as u64, 2 * step + 1);
                    xy[0] += b[0] * dt + sigma * sqrt_dt * xi0;
                    xy[1] += b[1] * dt + sigma * sqrt_dt * xi1;
                });
        }

        let worst = self.positions.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        if worst.is_nan() || worst > BLOW_UP {
            return Err(Error::Divergence {
                time: self.time + dt,
                magnitude: worst,
            });
        }

        self.step_count += 1;
        self.time += dt;
        self.stat_history.push((self.time, s));
        Ok(())
    }

    /// Sorted positions of coordinate `coord`.
    fn sorted_coord(&self, coord: usize) -> Vec<f64> {
        let mut xs: Vec<f64> = self
            .positions
            .iter()
            .skip(coord)
            .step_by(self.dim)
            .copied()
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs
    }

    /// Exact empirical 1-d Wasserstein-1 distance to `mu` via the
    /// comonotone pairing with the target quantiles at levels (i - 1/2)/N.
    pub fn w1_to(&self, mu: &GridMeasure) -> f64 {
        assert_eq!(self.dim, 1, "w1_to needs a one-dimensional ensemble");
        let xs = self.sorted_coord(0);
        let n = xs.len();
        let diffs: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let q = mu
                    .quantile((i as f64 + 0.5) / n as f64)
                    .expect("levels lie inside (0,1)");
                (x - q).abs()
            })
            .collect();
        pairwise_sum(&diffs) / n as f64
    }

    /// Sum of the marginal W1 distances of a 2-d ensemble.
    pub fn w1_marginals_to(&self, mu_x: &GridMeasure, mu_y: &GridMeasure) -> f64 {
        assert_eq!(self.dim, 2);
        let w = |coord: usize, mu: &GridMeasure| {
            let xs = self.sorted_coord(coord);
            let n = xs.len();
            let diffs: Vec<f64> = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let q = mu.quantile((i as f64 + 0.5) / n as f64).unwrap();
                    (x - q).abs()
                })
                .collect();
            pairwise_sum(&diffs) / n as f64
        };
        w(0, mu_x) + w(1, mu_y)
    }

    /// Upper bound on the weighted-modulus transport cost to `mu` via the
    /// comonotone coupling: mean of phi(|x - q|) (V(x) + V(q)). The pairing
    /// is feasible but not proven optimal for this cost, hence an upper
    /// bound; with phi(r) = r and V = 1 it equals `w1_to` exactly.
    pub fn weighted_distance_to(&self, mu: &GridMeasure, metric: &MetricSpec) -> Result<f64> {
        assert_eq!(self.dim, 1);
        let xs = self.sorted_coord(0);
        let n = xs.len();
        let terms: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let q = mu.quantile((i as f64 + 0.5) / n as f64).unwrap();
                (metric.phi)((x - q).abs()) * ((metric.weight)(x) + (metric.weight)(q))
            })
            .collect();
        if terms.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite {
                context: "weighted transport cost",
            });
        }
        Ok(pairwise_sum(&terms) / n as f64)
    }
}

/// Exact W1 between two same-size empirical ensembles (sorted pairing).
pub fn w1_between(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let diffs: Vec<f64> = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).collect();
    pairwise_sum(&diffs) / a.len() as f64
}

/// Monte Carlo noise floor: the W1 distance between two independent
/// N-samples of the target, the honest resolution limit of the tracker.
/// One two-sample realization per run; note that it fluctuates on the same
/// N^(-1/2) scale as its own mean, which the fit window inherits.
pub fn noise_floor(target: &GridMeasure, n: usize, seed: u64) -> f64 {
    let a = target.sample(n, rng::derive_seed(seed, TAG_FLOOR_A));
    let b = target.sample(n, rng::derive_seed(seed, TAG_FLOOR_B));
    w1_between(&a, &b)
}

/// How a rate run initialises its ensemble.
pub enum InitialLaw<'a> {
    Draw(&'a GridMeasure),
    DrawShifted(&'a GridMeasure, f64),
}

/// One recorded point of a simulation trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub stat: f64,
    pub w1: f64,
    /// Comonotone upper bound of the weighted cost, when a metric is given.
    pub weighted_ub: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationRecord {
    pub points: Vec<TrajectoryPoint>,
    pub noise_floor: f64,
}

/// Simulate to time `T`, recording the W1 distance to `target` at intervals
/// max(10 dt, T/200), plus the weighted upper bound when `metric` is given.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    model: &ModelSpec,
    init: InitialLaw,
    target: &GridMeasure,
    metric: Option<&MetricSpec>,
    n: usize,
    dt: f64,
    t_final: f64,
    seed: u64,
) -> Result<(SimulationRecord, ParticleEnsemble)> {
    assert!(n >= 1);
    assert!(t_final >= 10.0 * dt, "horizon shorter than ten steps");
    let mut ens = match init {
        InitialLaw::Draw(mu) => ParticleEnsemble::from_measure(mu, n, seed),
        InitialLaw::DrawShifted(mu, c) => ParticleEnsemble::from_measure_shifted(mu, c, n, seed),
    };

    let steps = (t_final / dt).round() as usize;
    let record_every = ((t_final / 200.0) / dt).ceil().max(10.0) as usize;

    let record = |ens: &ParticleEnsemble, points: &mut Vec<TrajectoryPoint>| -> Result<()> {
        let w1 = ens.w1_to(target);
        let weighted_ub = match metric {
            Some(m) => Some(ens.weighted_distance_to(target, m)?),
            None => None,
        };
        points.push(TrajectoryPoint {
            t: ens.time,
            stat: ens.statistic(model)[0],
            w1,
            weighted_ub,
        });
        Ok(())
    };

    let mut points = Vec::new();
    record(&ens, &mut points)?;
    for k in 1..=steps {
        ens.step(model, dt)?;
        if k % record_every == 0 || k == steps {
            record(&ens, &mut points)?;
        }
    }

    Ok((
        SimulationRecord {
            points,
            noise_floor: noise_floor(target, n, seed),
        },
        ens,
    ))
}

/// Simulate and fit the exponential decay rate of the W1 distance on the
/// window where the trajectory is between 3 x noise floor and half the
/// initial distance (past the transient, above the Monte Carlo floor).
pub fn run_and_fit(
    model: &ModelSpec,
    init: InitialLaw,
    target: &GridMeasure,
    n: usize,
    dt: f64,
    t_final: f64,
    seed: u64,
) -> Result<(RateFit, SimulationRecord)> {
    assert!(n >= 1000, "rate fits need at least 10^3 particles");
    let (record, _) = simulate(model, init, target, None, n, dt, t_final, seed)?;
    let d0 = record.points[0].w1;
    let floor = record.noise_floor;
    let lo = 3.0 * floor;
    let hi = d0 / 2.0;
    if lo >= hi {
        return Err(Error::FitWindow {
            detail: format!(
                "noise floor {floor:.3e} too close to initial distance {d0:.3e} (window [{lo:.3e}, {hi:.3e}])"
            ),
        });
    }
    let pts: Vec<(f64, f64)> = record
        .points
        .iter()
        .filter(|p| p.w1 >= lo && p.w1 <= hi)
        .map(|p| (p.t, p.w1.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::FitWindow {
            detail: format!(
                "only {} trajectory points inside [{lo:.3e}, {hi:.3e}]; d0 = {d0:.3e}, floor = {floor:.3e}",
                pts.len()
            ),
        });
    }
    let window = (pts.first().unwrap().0, pts.last().unwrap().0);
    let fit = crate::semigroup::fit_log_line(&pts, window)?;
    Ok((fit, record))
}

/// Probabilistic gradient estimate of the frozen-statistic semigroup.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GradientEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// Directional derivative of `E f(Y_t)` in the initial condition for the
/// frozen (linear) dynamics, by the stochastic-integral representation:
/// jointly Euler-integrate the path and its tangent `V' = b_x(Y) V`, then
/// average `f(Y_t) / t` times the accumulated integral of `V / sigma`
/// against the Brownian increments.
#[allow(clippy::too_many_arguments)]
pub fn bismut_gradient(
    model: &ModelSpec,
    s_frozen: f64,
    f: impl Fn(f64) -> f64 + Sync,
    x0: f64,
    v: f64,
    t: f64,
    paths: usize,
    dt: f64,
    seed: u64,
) -> Result<GradientEstimate> {
    assert!(t > 0.0);
    assert!(paths >= 1000, "gradient estimates need at least 10^3 paths");
    assert!(dt > 0.0 && dt <= 0.1);
    assert_eq!(model.dim, 1);

    let steps = (t / dt).round().max(1.0) as usize;
    let h = t / steps as f64;
    let sqrt_h = h.sqrt();
    let key = rng::derive_seed(seed, TAG_NOISE);
    let inv_sigma = 1.0 / model.sigma;

    let g: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut y = x0;
            let mut tangent = v;
            let mut mart = 0.0;
            for k in 0..steps {
                let xi = rng::normal(key, p as u64, k as u64);
                mart += inv_sigma * tangent * sqrt_h * xi;
                let grad = model.drift_dx(y, s_frozen);
                y += model.drift(y, s_frozen) * h + model.sigma * sqrt_h * xi;
                tangent += grad * tangent * h;
                if y.abs() > BLOW_UP || tangent.abs() > BLOW_UP {
                    return f64::NAN;
                }
            }
            f(y) * mart / t
        })
        .collect();

    if g.iter().any(|x| x.is_nan()) {
        return Err(Error::Divergence {
            time: t,
            magnitude: f64::NAN,
        });
    }
    let n = paths as f64;
    let mean = pairwise_sum(&g) / n;
    let sq: Vec<f64> = g.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    Ok(GradientEstimate {
        estimate: mean,
        stderr: (var / n).sqrt(),
    })
}

/// Common-random-numbers central finite difference of the same quantity:
/// the oracle the stochastic-integral estimator must agree with.
#[allow(clippy::too_many_arguments)]
pub fn bismut_fd_oracle(
    model: &ModelSpec,
    s_frozen: f64,
    f: impl Fn(f64) -> f64 + Sync,
    x0: f64,
    v: f64,
    t: f64,
    paths: usize,
    dt: f64,
    seed: u64,
) -> Result<GradientEstimate> {
    assert!(t > 0.0);
    let fd_step = 1e-3;
    let steps = (t / dt).round().max(1.0) as usize;
    let h = t / steps as f64;
    let sqrt_h = h.sqrt();
    let key = rng::derive_seed(seed, TAG_NOISE);

    let g: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut y_plus = x0 + fd_step;
            let mut y_minus = x0 - fd_step;
            for k in 0..steps {
                let xi = rng::normal(key, p as u64, k as u64);
                y_plus += model.drift(y_plus, s_frozen) * h + model.sigma * sqrt_h * xi;
                y_minus += model.drift(y_minus, s_frozen) * h + model.sigma * sqrt_h * xi;
                if y_plus.abs() > BLOW_UP || y_minus.abs() > BLOW_UP {
                    return f64::NAN;
                }
            }
            (f(y_plus) - f(y_minus)) / (2.0 * fd_step) * v
        })
        .collect();

    if g.iter().any(|x| x.is_nan()) {
        return Err(Error::Divergence {
            time: t,
            magnitude: f64::NAN,
        });
    }
    let n = paths as f64;
    let mean = pairwise_sum(&g) / n;
    let sq: Vec<f64> = g.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    Ok(GradientEstimate {
        estimate: mean,
        stderr: (var / n).sqrt(),
    })
}
