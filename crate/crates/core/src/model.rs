//! The model catalog: concrete distribution-dependent SDEs in which the
//! drift sees the law only through one scalar interaction statistic
//! (a pair of statistics for the 2-d model).
//!
//! Each model provides the drift `b(x, s)` evaluated against the frozen
//! statistic value `s`, the statistic itself, the mean-zero linearisation
//! kernel split into a separable gradient weight `w(x)` and profile
//! `g(z, s)` (so the nonlocal perturbation is exactly rank one per
//! statistic), and the log of the unnormalised stationary density for the
//! frozen dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Double-well confinement with quadratic mean-field attraction.
    Dawson,
    /// Linear confinement with a cosine statistic, sigma = sqrt(2) canonical.
    GaussCos1d,
    /// Two coupled components, each driven by the other's cosine statistic.
    GaussCos2d,
    /// Bounded statistic u0(x) = x / (1+x^2)^(1/3); stationary laws are only
    /// sub-Gaussian, not log-Sobolev.
    SubGaussian,
    /// GaussCos1d with the interaction switched off; exactly solvable
    /// Ornstein-Uhlenbeck reference.
    OuBaseline,
}

impl ModelKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "dawson" => Ok(ModelKind::Dawson),
            "gausscos1d" => Ok(ModelKind::GaussCos1d),
            "gausscos2d" => Ok(ModelKind::GaussCos2d),
            "subgaussian" => Ok(ModelKind::SubGaussian),
            "oubaseline" => Ok(ModelKind::OuBaseline),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Dawson => "dawson",
            ModelKind::GaussCos1d => "gausscos1d",
            ModelKind::GaussCos2d => "gausscos2d",
            ModelKind::SubGaussian => "subgaussian",
            ModelKind::OuBaseline => "oubaseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub dim: usize,
    pub beta: f64,
    pub sigma: f64,
}

/// u0 and its first two derivatives (SubGaussian statistic).
#[inline]
pub fn u0(x: f64) -> f64 {
    x / (1.0 + x * x).powf(1.0 / 3.0)
}

#[inline]
pub fn u0_prime(x: f64) -> f64 {
    let q = 1.0 + x * x;
    (1.0 + x * x / 3.0) / q.powf(4.0 / 3.0)
}

#[inline]
fn u0_second(x: f64) -> f64 {
    let q = 1.0 + x * x;
    -2.0 * x * (1.0 + x * x / 9.0) / q.powf(7.0 / 3.0)
}

pub fn make_model(kind: ModelKind, beta: f64, sigma: f64) -> Result<ModelSpec> {
    if sigma.is_nan() || sigma <= 0.0 || sigma.is_infinite() {
        return Err(Error::InvalidParameter {
            name: "sigma",
            value: sigma,
            reason: "diffusion coefficient must be positive and finite",
        });
    }
    if !beta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "beta",
            value: beta,
            reason: "interaction strength must be finite",
        });
    }
    let (beta, dim) = match kind {
        ModelKind::OuBaseline => (0.0, 1),
        ModelKind::GaussCos2d => (beta, 2),
        _ => (beta, 1),
    };
    Ok(ModelSpec {
        kind,
        dim,
        beta,
        sigma,
    })
}

impl ModelSpec {
    /// The interaction statistic S(x) (one-dimensional models).
    #[inline]
    pub fn stat(&self, x: f64) -> f64 {
        match self.kind {
            ModelKind::Dawson => x,
            ModelKind::GaussCos1d | ModelKind::OuBaseline => x.cos(),
            ModelKind::SubGaussian => u0(x),
            ModelKind::GaussCos2d => panic!("scalar statistic on a 2-d model"),
        }
    }

    /// Drift b(x, s) against the frozen statistic value s.
    #[inline]
    pub fn drift(&self, x: f64, s: f64) -> f64 {
        let beta = self.beta;
        match self.kind {
            ModelKind::Dawson => -(x * x * x - x) - beta * (x - s),
            ModelKind::GaussCos1d | ModelKind::OuBaseline => -x + beta * s,
            ModelKind::SubGaussian => {
                let q = 1.0 + x * x;
                let g = -x * x * x / q + (1.0 - beta) * x / q.powf(1.0 / 3.0) + beta * s;
                let h = x * (1.0 + x * x / 9.0) / ((1.0 + x * x / 3.0) * q);
                u0_prime(x) * g - self.sigma * self.sigma * h
            }
            ModelKind::GaussCos2d => panic!("scalar drift on a 2-d model"),
        }
    }

    /// Spatial derivative of the drift, d/dx b(x, s) (tangent flow).
    #[inline]
    pub fn drift_dx(&self, x: f64, s: f64) -> f64 {
        let beta = self.beta;
        match self.kind {
            ModelKind::Dawson => -3.0 * x * x + 1.0 - beta,
            ModelKind::GaussCos1d | ModelKind::OuBaseline => -1.0,
            ModelKind::SubGaussian => {
                let q = 1.0 + x * x;
                let g = -x * x * x / q + (1.0 - beta) * x / q.powf(1.0 / 3.0) + beta * s;
                let g_dx = -x * x * (3.0 + x * x) / (q * q) + (1.0 - beta) * u0_prime(x);
                // h = N / D with N = x + x^3/9, D = 1 + 4x^2/3 + x^4/3.
                let num = x + x * x * x / 9.0;
                let den = 1.0 + 4.0 * x * x / 3.0 + x * x * x * x / 3.0;
                let num_dx = 1.0 + x * x / 3.0;
                let den_dx = 8.0 * x / 3.0 + 4.0 * x * x * x / 3.0;
                let h_dx = (num_dx * den - num * den_dx) / (den * den);
                u0_second(x) * g + u0_prime(x) * g_dx - self.sigma * self.sigma * h_dx
            }
            ModelKind::GaussCos2d => panic!("scalar drift on a 2-d model"),
        }
    }

    /// Per-component drift of the 2-d model: each coordinate relaxes toward
    /// beta times the other coordinate's cosine statistic.
    #[inline]
    pub fn drift_2d(&self, pos: [f64; 2], s: [f64; 2]) -> [f64; 2] {
        assert_eq!(self.kind, ModelKind::GaussCos2d);
        [-pos[0] + self.beta * s[1], -pos[1] + self.beta * s[0]]
    }

    /// Statistic pair of the 2-d model.
    #[inline]
    pub fn stat_2d(&self, pos: [f64; 2]) -> [f64; 2] {
        assert_eq!(self.kind, ModelKind::GaussCos2d);
        [pos[0].cos(), pos[1].cos()]
    }

    /// Gradient weight w(x) of the separable linearisation kernel
    /// D b(x, z, s) = w(x) g(z, s).
    #[inline]
    pub fn gradient_weight(&self, x: f64) -> f64 {
        match self.kind {
            ModelKind::SubGaussian => u0_prime(x),
            _ => 1.0,
        }
    }

    /// Profile g(z, s) of the linearisation kernel; mean-zero under the
    /// self-consistent law (s = mu(S)).
    #[inline]
    pub fn kernel_profile(&self, z: f64, s: f64) -> f64 {
        let beta = self.beta;
        match self.kind {
            ModelKind::Dawson => beta * (z - s),
            ModelKind::GaussCos1d | ModelKind::OuBaseline => beta * (z.cos() - s),
            ModelKind::SubGaussian => beta * (u0(z) - s),
            ModelKind::GaussCos2d => panic!("scalar kernel on a 2-d model"),
        }
    }

    /// Linearisation kernel D b(x, z, s), normalised to mean zero in z.
    #[inline]
    pub fn dfkernel(&self, x: f64, z: f64, s: f64) -> f64 {
        self.gradient_weight(x) * self.kernel_profile(z, s)
    }

    /// Log of the unnormalised stationary density of the frozen dynamics.
    pub fn confinement_logdensity(&self, x: f64, s: f64) -> f64 {
        let beta = self.beta;
        let two_over_s2 = 2.0 / (self.sigma * self.sigma);
        match self.kind {
            ModelKind::Dawson => {
                let d = x - s;
                -two_over_s2 * (x * x * x * x / 4.0 - x * x / 2.0 + beta * d * d / 2.0)
            }
            ModelKind::GaussCos1d | ModelKind::OuBaseline => {
                -two_over_s2 * (x * x / 2.0 - beta * s * x)
            }
            ModelKind::SubGaussian => {
                let u = u0(x);
                let v = u * u - 1.0;
                -v * v * two_over_s2 / 4.0 - beta * two_over_s2 / 2.0 * (u * u - 2.0 * u * s)
                    + u0_prime(x).ln()
            }
            ModelKind::GaussCos2d => panic!("scalar log-density on a 2-d model"),
        }
    }

    /// Marginal log-density of one coordinate of the 2-d model frozen at the
    /// other coordinate's statistic value (the joint law is a product).
    pub fn confinement_logdensity_2d_marginal(&self, x: f64, other_stat: f64) -> f64 {
        assert_eq!(self.kind, ModelKind::GaussCos2d);
        let two_over_s2 = 2.0 / (self.sigma * self.sigma);
        -two_over_s2 * (x * x / 2.0 - self.beta * other_stat * x)
    }
}

/// Empirical one-sided Lipschitz audit of the drift.
#[derive(Debug, Clone, Serialize)]
pub struct DissipativityAudit {
    /// max over the sample grid of <grad b(x) v, v> / |v|^2.
    pub max_directional: f64,
    /// Location where the maximum was attained.
    pub argmax: f64,
    /// Whether the directional derivative is negative everywhere |x| > 1.
    pub dissipative_outside_unit: bool,
    pub samples: usize,
}

/// Sample the drift's directional derivative by central differences
/// (step 1e-6) on a uniform grid of |x| <= radius, at frozen statistic 0.
///
/// A sanity report, not a proof: it flags models whose drift fails the
/// one-sided Lipschitz pattern the solvers assume.
pub fn audit_dissipativity(model: &ModelSpec, radius: f64, samples: usize) -> DissipativityAudit {
    assert!(radius > 0.0, "audit radius must be positive");
    assert!(samples >= 10, "audit needs at least 10 samples");
    let h = 1e-6;
    let mut max_directional = f64::NEG_INFINITY;
    let mut argmax = 0.0;
    let mut dissipative_outside_unit = true;

    let eval = |x: f64| -> f64 {
        if model.dim == 1 {
            (model.drift(x + h, 0.0) - model.drift(x - h, 0.0)) / (2.0 * h)
        } else {
            // Diagonal 2-d drift: both coordinates share the same derivative.
            let s = [0.0, 0.0];
            (model.drift_2d([x + h, 0.0], s)[0] - model.drift_2d([x - h, 0.0], s)[0]) / (2.0 * h)
        }
    };

    for i in 0..samples {
        let x = -radius + 2.0 * radius * i as f64 / (samples - 1) as f64;
        let dv = eval(x);
        if dv > max_directional {
            max_directional = dv;
            argmax = x;
        }
        if x.abs() > 1.0 && dv >= 0.0 {
            dissipative_outside_unit = false;
        }
    }
    DissipativityAudit {
        max_directional,
        argmax,
        dissipative_outside_unit,
        samples,
    }
}
