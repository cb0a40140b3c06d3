//! The admissible class of distance moduli and weights.
//!
//! A modulus phi qualifies when phi(0) = 0, phi is nondecreasing,
//! phi^2(sqrt(.)) is concave, and the Dini integral of phi(s)/s over (0, 1]
//! converges; weights V must stay >= 1. Pairing a modulus with a weight
//! yields the test-function metric the convergence statements are phrased
//! in; phi(r) = r with V = 1 recovers the plain L1-Wasserstein distance.
//!
//! Functions arrive as opaque callables, so every property is checked on a
//! fixed grid: 10^3 log-spaced points on (1e-6, 1e2) plus zero.

use crate::error::{Error, Result};

/// A validated modulus/weight pair.
pub struct MetricSpec {
    pub phi: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub weight: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Dini integral of phi(s)/s over (0, 1].
    pub phi_integral: f64,
}

fn phi_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    let (lo, hi) = (1e-6f64.ln(), 1e2f64.ln());
    for i in 0..1000 {
        g.push((lo + (hi - lo) * i as f64 / 999.0).exp());
    }
    g
}

/// Run every class check on the pair, returning the validated spec.
pub fn validate_metric(
    phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    weight: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> Result<MetricSpec> {
    let grid = phi_grid();

    let phi0 = phi(0.0);
    if phi0.is_nan() || phi0.abs() > 1e-12 {
        return Err(Error::MetricViolation {
            property: "phi(0) = 0",
            witness: 0.0,
            detail: format!("phi(0) = {phi0}"),
        });
    }

    let vals: Vec<f64> = grid.iter().map(|&r| phi(r)).collect();
    for (v, &r) in vals.iter().zip(&grid) {
        if !v.is_finite() || *v < 0.0 {
            return Err(Error::MetricViolation {
                property: "phi finite and nonnegative",
                witness: r,
                detail: format!("phi({r}) = {v}"),
            });
        }
    }
    for (r, vpair) in grid.windows(2).zip(vals.windows(2)) {
        if vpair[1] < vpair[0] - 1e-12 {
            return Err(Error::MetricViolation {
                property: "phi nondecreasing",
                witness: r[1],
                detail: format!("phi drops from {} to {}", vpair[0], vpair[1]),
            });
        }
    }

    // Midpoint concavity of h(u) = phi(sqrt(u))^2 over all grid pairs.
    let h = |u: f64| {
        let p = phi(u.sqrt());
        p * p
    };
    for i in 0..grid.len() {
        for j in (i + 1)..grid.len() {
            let (u1, u2) = (grid[i], grid[j]);
            let mid = 0.5 * (u1 + u2);
            let gap = 0.5 * (h(u1) + h(u2)) - h(mid);
            let scale = h(u2).abs().max(1.0);
            if gap > 1e-12 * scale {
                return Err(Error::MetricViolation {
                    property: "phi^2(sqrt(.)) concave",
                    witness: mid.sqrt(),
                    detail: format!(
                        "midpoint defect {gap:.3e} between r = {} and r = {}",
                        u1.sqrt(),
                        u2.sqrt()
                    ),
                });
            }
        }
    }

    // Lower bound phi(r) >= phi(1) (r & 1), a consequence of concavity.
    let phi1 = phi(1.0);
    for (&r, &v) in grid.iter().zip(&vals) {
        let bound = phi1 * r.min(1.0);
        if v < bound - 1e-12 * bound.max(1.0) {
            return Err(Error::MetricViolation {
                property: "phi(r) >= phi(1) (r & 1)",
                witness: r,
                detail: format!("phi({r}) = {v} below {bound}"),
            });
        }
    }

    // Dini integral by composite Gauss on log-spaced panels of (0, 1].
    let phi_integral = dini_integral(&phi);
    if !phi_integral.is_finite() {
        return Err(Error::MetricViolation {
            property: "Dini integral finite",
            witness: 0.0,
            detail: format!("integral of phi(s)/s over (0,1] = {phi_integral}"),
        });
    }

    // Weight floor on a symmetric spatial grid.
    for i in 0..=400 {
        let x = -100.0 + 0.5 * i as f64;
        let v = weight(x);
        if !v.is_finite() || v < 1.0 - 1e-12 {
            return Err(Error::MetricViolation {
                property: "V >= 1",
                witness: x,
                detail: format!("V({x}) = {v}"),
            });
        }
    }

    Ok(MetricSpec {
        phi: Box::new(phi),
        weight: Box::new(weight),
        phi_integral,
    })
}

/// Integral of phi(s)/s over (0, 1]: 8-point Gauss-Legendre on dyadic
/// panels [2^-k, 2^-k+1] down to 2^-40, plus the monotone bound below.
fn dini_integral(phi: &impl Fn(f64) -> f64) -> f64 {
    const GL8_X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_2,
    ];
    const GL8_W: [f64; 4] = [
        0.362_683_783_378_362,
        0.313_706_645_877_887_1,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_26,
    ];
    let mut total = 0.0;
    let mut hi = 1.0f64;
    for _ in 0..40 {
        let lo = hi / 2.0;
        let center = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        for j in 0..4 {
            for sign in [-1.0, 1.0] {
                let s = center + sign * half * GL8_X[j];
                total += half * GL8_W[j] * phi(s) / s;
            }
        }
        hi = lo;
    }
    // The dropped remainder over (0, 2^-40) is below the last octave's
    // contribution for any admissible modulus (octave terms decrease), so
    // it cannot flip the finiteness verdict.
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_modulus_flat_weight() {
        let spec = validate_metric(|r| r, |_| 1.0).unwrap();
        assert!((spec.phi_integral - 1.0).abs() < 1e-9);
        assert_eq!((spec.phi)(0.5), 0.5);
    }

    #[test]
    fn capped_modulus_polynomial_weight() {
        for p in [1.0, 2.0, 4.0] {
            let spec = validate_metric(
                move |r: f64| r.min(1.0),
                move |x: f64| (1.0 + x * x).powf(p / 2.0),
            )
            .unwrap();
            // integral of (s & 1)/s over (0,1] is 1.
            assert!((spec.phi_integral - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn capped_modulus_stretched_exponential_weight() {
        let spec = validate_metric(
            |r: f64| r.min(1.0),
            |x: f64| (1.0 + x * x).powf(1.0 / 3.0).exp(),
        )
        .unwrap();
        assert!(spec.phi_integral.is_finite());
    }

    #[test]
    fn quadratic_modulus_rejected_with_witness() {
        // phi(r) = r^2 gives phi^2(sqrt(u)) = u^2, strictly convex.
        match validate_metric(|r| r * r, |_| 1.0) {
            Err(Error::MetricViolation {
                property: "phi^2(sqrt(.)) concave",
                witness,
                ..
            }) => {
                assert!(witness > 0.0);
            }
            other => panic!("expected concavity violation, got {:?}", other.err()),
        }
    }

    #[test]
    fn decreasing_modulus_rejected() {
        match validate_metric(|r| (-r).exp() - (-2.0 * r).exp(), |_| 1.0) {
            Err(Error::MetricViolation { .. }) => {}
            other => panic!("expected violation, got {:?}", other.err()),
        }
    }

    #[test]
    fn nonzero_origin_rejected() {
        assert!(matches!(
            validate_metric(|r| r + 0.1, |_| 1.0),
            Err(Error::MetricViolation {
                property: "phi(0) = 0",
                ..
            })
        ));
    }

    #[test]
    fn sub_unit_weight_rejected() {
        assert!(matches!(
            validate_metric(|r| r, |x: f64| 1.0 / (1.0 + x * x)),
            Err(Error::MetricViolation {
                property: "V >= 1",
                ..
            })
        ));
    }

    #[test]
    fn lower_bound_holds_for_accepted_moduli() {
        // phi(r) >= phi(1)(r & 1) on the grid for every accepted modulus.
        for phi in [|r: f64| r, |r: f64| r.min(1.0), |r: f64| r.sqrt().min(2.0)] {
            let spec = validate_metric(phi, |_| 1.0).unwrap();
            let p1 = (spec.phi)(1.0);
            for i in 0..200 {
                let r = 1e-4 + i as f64 * 0.05;
                assert!((spec.phi)(r) >= p1 * r.min(1.0) - 1e-12);
            }
        }
    }
}
