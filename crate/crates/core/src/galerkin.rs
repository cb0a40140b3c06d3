//! Orthonormal-basis discretisation of the linearised generator.
//!
//! The generator splits as `L + A`: a symmetric diffusion part `L` (the
//! frozen-drift generator, negative semidefinite on L2 of the stationary
//! law) plus a nonlocal perturbation `A` that is exactly rank one per
//! interaction statistic. Representing both in orthonormal polynomials of
//! the stationary law keeps that structure: `L` becomes a symmetric matrix
//! via its Dirichlet form and `A` an outer product `c r^T`, where `c` holds
//! the basis coefficients of the kernel profile and `r` the gradient
//! moments `mu(w p_j')`.
//!
//! The spectrum of the assembled matrix then answers the stability
//! question: the constant function is always in the kernel, and the sign of
//! the largest remaining real part decides exponential decay or growth of
//! the linearised flow.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, pairwise_sum, Mat};
use crate::measure::{from_log_density, GridMeasure};
use crate::model::{ModelKind, ModelSpec};

/// Gram deviation beyond which the basis is rejected.
const GRAM_LIMIT: f64 = 1e-6;
/// Allowed disagreement between the Dirichlet-form and direct generator
/// assemblies; larger gaps mean the measure is not stationary for the drift.
const ASSEMBLY_LIMIT: f64 = 1e-8;
/// Eigenvalues with modulus below this count as the structural zero.
const ZERO_BAND: f64 = 1e-8;

/// Truncation radius wide enough to carry a basis of the given size: the
/// weighted mass of orthonormal-polynomial mode k reaches out to about
/// 2 sqrt(k) standard deviations for Gaussian-type weights (k^(3/4) scale
/// for the heavier sub-Gaussian family), and operator identities degrade
/// once that support touches the cutoff. The generator assembly check
/// catches any radius that is still too small.
pub fn spectral_truncation(model: &ModelSpec, size: usize) -> f64 {
    let k = size as f64;
    let base = crate::measure::default_truncation(model);
    let needed = match model.kind {
        ModelKind::GaussCos1d | ModelKind::OuBaseline | ModelKind::GaussCos2d => {
            model.beta.abs() + model.sigma / std::f64::consts::SQRT_2 * 2.0 * k.sqrt() + 6.0
        }
        ModelKind::Dawson => 1.5 + model.sigma * k.sqrt() + 4.0,
        // Mhaskar-Rakhmanov-Saff scale for the exp(-x^(4/3)/(2 sigma^2))
        // tails, with a safety factor pinned by the assembly check.
        ModelKind::SubGaussian => 2.5 * (2.0 * model.sigma * model.sigma * k).powf(0.75) + 6.0,
    };
    base.max(needed)
}

/// Panel count matched to the radius and basis size. The concentrated
/// double-well and sub-Gaussian densities make high modes oscillate on the
/// scale of the measure's core (width about 2) rather than the grid span,
/// so their node count additionally scales like 3 K R.
pub fn spectral_panels(model: &ModelSpec, truncation: f64, size: usize) -> usize {
    let base = match model.kind {
        ModelKind::Dawson | ModelKind::SubGaussian => 128usize,
        _ => 64,
    };
    let span_scaled = (truncation / 12.0 * 64.0).ceil() as usize;
    let core_scaled = match model.kind {
        ModelKind::SubGaussian => (3.0 * size as f64 * truncation / 16.0).ceil() as usize,
        _ => 0,
    };
    let p = base.max(span_scaled).max(core_scaled).min(384);
    p.div_ceil(16) * 16
}

/// Orthonormal polynomial basis of L2(mu) on the quadrature grid.
///
/// Built by the Stieltjes three-term recurrence on the discrete measure,
/// with one reorthogonalisation pass per degree to hold the Gram matrix at
/// identity; derivatives track the recurrence exactly.
pub struct OrthoBasis {
    mu: GridMeasure,
    size: usize,
    /// values[k][g] = p_k at node g; p_0 is identically one.
    values: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
    seconds: Vec<Vec<f64>>,
    /// Node masses weights[g] * density[g], cached.
    mass: Vec<f64>,
}

pub fn build_basis(mu: GridMeasure, size: usize) -> Result<OrthoBasis> {
    assert!(size >= 2, "basis needs at least two functions");
    let g = mu.len();
    assert!(
        g >= 4 * size,
        "quadrature grid too coarse for this basis size"
    );

    let mass: Vec<f64> = mu
        .weights
        .iter()
        .zip(&mu.density)
        .map(|(w, d)| w * d)
        .collect();
    let inner = |u: &[f64], v: &[f64]| -> f64 {
        let terms: Vec<f64> = mass
            .iter()
            .zip(u.iter().zip(v))
            .map(|(&m, (&a, &b))| m * a * b)
            .collect();
        pairwise_sum(&terms)
    };

    let mut values: Vec<Vec<f64>> = Vec::with_capacity(size);
    let mut derivs: Vec<Vec<f64>> = Vec::with_capacity(size);
    let mut seconds: Vec<Vec<f64>> = Vec::with_capacity(size);

    values.push(vec![1.0; g]);
    derivs.push(vec![0.0; g]);
    seconds.push(vec![0.0; g]);

    let mut beta_prev = 0.0;
    for k in 0..size - 1 {
        let pk = &values[k];
        let alpha = {
            let xpk: Vec<f64> = mu.nodes.iter().zip(pk).map(|(&x, &p)| x * p).collect();
            inner(&xpk, pk)
        };

        let mut t: Vec<f64> = (0..g).map(|i| (mu.nodes[i] - alpha) * pk[i]).collect();
        let mut t1: Vec<f64> = (0..g)
            .map(|i| pk[i] + (mu.nodes[i] - alpha) * derivs[k][i])
            .collect();
        let mut t2: Vec<f64> = (0..g)
            .map(|i| 2.0 * derivs[k][i] + (mu.nodes[i] - alpha) * seconds[k][i])
            .collect();
        if k > 0 {
            for i in 0..g {
                t[i] -= beta_prev * values[k - 1][i];
                t1[i] -= beta_prev * derivs[k - 1][i];
                t2[i] -= beta_prev * seconds[k - 1][i];
            }
        }
        // One reorthogonalisation sweep keeps the Gram matrix at identity
        // for basis sizes well beyond what the solvers use.
        for j in 0..=k {
            let c = inner(&t, &values[j]);
            for i in 0..g {
                t[i] -= c * values[j][i];
                t1[i] -= c * derivs[j][i];
                t2[i] -= c * seconds[j][i];
            }
        }
        let beta = inner(&t, &t).sqrt();
        if beta.is_nan() || beta <= 0.0 || beta.is_infinite() {
            return Err(Error::BasisDegradation {
                gram_error: f64::INFINITY,
                size: k + 1,
            });
        }
        let inv = 1.0 / beta;
        values.push(t.iter().map(|v| v * inv).collect());
        derivs.push(t1.iter().map(|v| v * inv).collect());
        seconds.push(t2.iter().map(|v| v * inv).collect());
        beta_prev = beta;
    }

    let basis = OrthoBasis {
        mu,
        size,
        values,
        derivs,
        seconds,
        mass,
    };
    let gram_error = basis.gram_deviation();
    if gram_error > GRAM_LIMIT {
        return Err(Error::BasisDegradation { gram_error, size });
    }
    Ok(basis)
}

impl OrthoBasis {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn measure(&self) -> &GridMeasure {
        &self.mu
    }

    pub fn values(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn derivs(&self, k: usize) -> &[f64] {
        &self.derivs[k]
    }

    fn inner_grids(&self, u: &[f64], v: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .mass
            .iter()
            .zip(u.iter().zip(v))
            .map(|(&m, (&a, &b))| m * a * b)
            .collect();
        pairwise_sum(&terms)
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn gram_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.size {
            for j in i..self.size {
                let g = self.inner_grids(&self.values[i], &self.values[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// Basis coefficients of a function given on the nodes by `f`.
    pub fn project(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let fv: Vec<f64> = self.mu.nodes.iter().map(|&x| f(x)).collect();
        (0..self.size)
            .map(|k| self.inner_grids(&fv, &self.values[k]))
            .collect()
    }

    /// L2(mu) norm of a coefficient vector (the basis is orthonormal).
    pub fn coeff_norm(coeffs: &[f64]) -> f64 {
        coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Assemble the frozen generator in the basis.
///
/// The returned matrix is the Dirichlet form `-(sigma^2/2) <p_i', p_j'>`,
/// which is exactly symmetric with a zero first row and column. It is
/// cross-checked entrywise against the direct route `<p_i, L p_j>` with the
/// drift evaluated at statistic `s`; disagreement means `mu` is not the
/// stationary law of that drift.
pub fn assemble_generator(basis: &OrthoBasis, model: &ModelSpec, s: f64) -> Result<Mat> {
    let k = basis.size;
    let half_s2 = model.sigma * model.sigma / 2.0;
    let mut dirichlet = Mat::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = -half_s2 * basis.inner_grids(&basis.derivs[i], &basis.derivs[j]);
            dirichlet[(i, j)] = v;
            dirichlet[(j, i)] = v;
        }
    }
    for j in 0..k {
        dirichlet[(0, j)] = 0.0;
        dirichlet[(j, 0)] = 0.0;
    }

    // Direct generator route for the consistency check.
    let drift: Vec<f64> = basis.mu.nodes.iter().map(|&x| model.drift(x, s)).collect();
    let mut mismatch = 0.0f64;
    for j in 0..k {
        let lj: Vec<f64> = (0..basis.mu.len())
            .map(|g| half_s2 * basis.seconds[j][g] + drift[g] * basis.derivs[j][g])
            .collect();
        for i in 0..k {
            let direct = basis.inner_grids(&basis.values[i], &lj);
            mismatch = mismatch.max((direct - dirichlet[(i, j)]).abs());
        }
    }
    if mismatch > ASSEMBLY_LIMIT {
        return Err(Error::AssemblyMismatch {
            mismatch,
            limit: ASSEMBLY_LIMIT,
        });
    }
    Ok(dirichlet)
}

/// Assemble the rank-one nonlocal perturbation `A = c r^T` at statistic `s`:
/// `c` holds the basis coefficients of the kernel profile and `r` the
/// gradient moments `mu(w p_j')`.
pub fn assemble_perturbation(basis: &OrthoBasis, model: &ModelSpec, s: f64) -> Result<Mat> {
    let k = basis.size;
    let profile: Vec<f64> = basis
        .mu
        .nodes
        .iter()
        .map(|&z| model.kernel_profile(z, s))
        .collect();
    let weight: Vec<f64> = basis
        .mu
        .nodes
        .iter()
        .map(|&x| model.gradient_weight(x))
        .collect();

    let c: Vec<f64> = (0..k)
        .map(|i| basis.inner_grids(&profile, &basis.values[i]))
        .collect();
    let r: Vec<f64> = (0..k)
        .map(|j| basis.inner_grids(&weight, &basis.derivs[j]))
        .collect();

    // c_0 is the mu-mean of the kernel profile; the normalisation demands
    // zero, which holds exactly when s is a fixed point of the statistic.
    if c[0].abs() > 1e-8 {
        return Err(Error::KernelNotCentered { mean: c[0].abs() });
    }

    Ok(Mat::from_fn(k, k, |i, j| c[i] * r[j]))
}

/// Spectral summary of the assembled linearised generator.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    /// Eigenvalues of L + A as (re, im) pairs, sorted by descending real part.
    pub eigenvalues: Vec<(f64, f64)>,
    /// Exponential decay rate of the perturbed flow on mean-zero functions:
    /// minus the largest nonzero real part. Negative when the input is
    /// linearly unstable.
    pub lambda_q: f64,
    /// Spectral gap of the frozen generator L alone, an L2-gap proxy for
    /// the reference contraction rate.
    pub lambda_p: f64,
    /// Distance of the eigenvalue nearest zero from zero.
    pub zero_residual: f64,
    /// Whether zero is a simple eigenvalue: the deflated block (constants
    /// removed) keeps all eigenvalues at modulus > 1e-6.
    pub zero_simple: bool,
    pub basis_size: usize,
}

impl SpectralReport {
    /// Largest real part among nonzero eigenvalues (= -lambda_q).
    pub fn max_re_nonzero(&self) -> f64 {
        -self.lambda_q
    }
}

fn modulus(e: (f64, f64)) -> f64 {
    e.0.hypot(e.1)
}

/// Eigen-analysis of `L + A`.
///
/// The constant function spans an exact kernel direction (column zero of
/// both matrices vanishes), so the spectrum splits as {0} plus the spectrum
/// of the deflated block; simplicity of the zero eigenvalue reduces to that
/// block staying away from zero.
pub fn spectrum(l: &Mat, a: &Mat) -> Result<SpectralReport> {
    assert!(l.is_square() && a.is_square());
    assert_eq!(l.rows(), a.rows(), "operator blocks of unequal size");
    let k = l.rows();
    let m = l.add(a);

    let mut eigs = linalg::eigenvalues(&m)?;
    eigs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());

    let zero_residual = eigs
        .iter()
        .map(|&e| modulus(e))
        .fold(f64::INFINITY, f64::min);
    let lambda_q = -eigs
        .iter()
        .filter(|&&e| modulus(e) > ZERO_BAND)
        .map(|&e| e.0)
        .fold(f64::NEG_INFINITY, f64::max);

    let eigs_l = linalg::eigenvalues(l)?;
    let lambda_p = -eigs_l
        .iter()
        .filter(|&&e| modulus(e) > ZERO_BAND)
        .map(|&e| e.0)
        .fold(f64::NEG_INFINITY, f64::max);

    // Deflate the constant direction and demand the rest stays off zero.
    let deflated = m.minor(0, 0);
    let eigs_deflated = linalg::eigenvalues(&deflated)?;
    let deflated_min = eigs_deflated
        .iter()
        .map(|&e| modulus(e))
        .fold(f64::INFINITY, f64::min);
    let zero_simple = zero_residual < ZERO_BAND && deflated_min > 1e-6;

    Ok(SpectralReport {
        eigenvalues: eigs,
        lambda_q,
        lambda_p,
        zero_residual,
        zero_simple,
        basis_size: k,
    })
}

/// Assemble the tensor-product discretisation for the 2-d model at a fixed
/// point `(m1, m2)` of the pair equations. The stationary law is a product
/// Gaussian, so the basis is a tensor of two one-dimensional bases and the
/// perturbation is rank two.
pub fn assemble_2d(
    model: &ModelSpec,
    pair: (f64, f64),
    size_per_dim: usize,
    truncation: f64,
    panels: usize,
) -> Result<(Mat, Mat)> {
    assert_eq!(model.kind, ModelKind::GaussCos2d);
    let (m1, m2) = pair;
    let beta = model.beta;

    // Marginals: x relaxes toward beta m2, y toward beta m1.
    let mu_x = from_log_density(
        |x| model.confinement_logdensity_2d_marginal(x, m2),
        truncation,
        panels,
    )?;
    let mu_y = from_log_density(
        |y| model.confinement_logdensity_2d_marginal(y, m1),
        truncation,
        panels,
    )?;
    let bx = build_basis(mu_x, size_per_dim)?;
    let by = build_basis(mu_y, size_per_dim)?;

    let half_s2 = model.sigma * model.sigma / 2.0;
    let lx = Mat::from_fn(size_per_dim, size_per_dim, |i, j| {
        -half_s2 * bx.inner_grids(&bx.derivs[i], &bx.derivs[j])
    });
    let ly = Mat::from_fn(size_per_dim, size_per_dim, |i, j| {
        -half_s2 * by.inner_grids(&by.derivs[i], &by.derivs[j])
    });

    let k = size_per_dim;
    let kk = k * k;
    let idx = |i: usize, j: usize| i * k + j;

    let mut l = Mat::zeros(kk, kk);
    for i1 in 0..k {
        for j1 in 0..k {
            for i2 in 0..k {
                l[(idx(i1, j1), idx(i2, j1))] += lx[(i1, i2)];
            }
            for j2 in 0..k {
                l[(idx(i1, j1), idx(i1, j2))] += ly[(j1, j2)];
            }
        }
    }
    // Constants are exactly harmonic.
    for t in 0..kk {
        l[(0, t)] = 0.0;
        l[(t, 0)] = 0.0;
    }

    // Cosine moments against each marginal basis.
    let cos_x: Vec<f64> = (0..k)
        .map(|i| {
            bx.inner_grids(
                &bx.values[i],
                &bx.mu.nodes.iter().map(|&x| x.cos()).collect::<Vec<_>>(),
            )
        })
        .collect();
    let cos_y: Vec<f64> = (0..k)
        .map(|j| {
            by.inner_grids(
                &by.values[j],
                &by.mu.nodes.iter().map(|&y| y.cos()).collect::<Vec<_>>(),
            )
        })
        .collect();
    // Gradient moments mu(p').
    let ones_x = vec![1.0; bx.mu.len()];
    let ones_y = vec![1.0; by.mu.len()];
    let dx: Vec<f64> = (0..k)
        .map(|i| bx.inner_grids(&ones_x, &bx.derivs[i]))
        .collect();
    let dy: Vec<f64> = (0..k)
        .map(|j| by.inner_grids(&ones_y, &by.derivs[j]))
        .collect();

    // Profile paired with mu(d/dx .): beta (cos y - m2); with mu(d/dy .):
    // beta (cos x - m1).
    let mut c1 = vec![0.0; kk];
    let mut c2 = vec![0.0; kk];
    let mut r1 = vec![0.0; kk];
    let mut r2 = vec![0.0; kk];
    for j in 0..k {
        c1[idx(0, j)] = beta * (cos_y[j] - if j == 0 { m2 } else { 0.0 });
    }
    for i in 0..k {
        c2[idx(i, 0)] = beta * (cos_x[i] - if i == 0 { m1 } else { 0.0 });
    }
    for i in 0..k {
        r1[idx(i, 0)] = dx[i];
    }
    for j in 0..k {
        r2[idx(0, j)] = dy[j];
    }
    if c1[0].abs() > 1e-8 || c2[0].abs() > 1e-8 {
        return Err(Error::KernelNotCentered {
            mean: c1[0].abs().max(c2[0].abs()),
        });
    }

    let a = Mat::from_fn(kk, kk, |p, q| c1[p] * r1[q] + c2[p] * r2[q]);
    Ok((l, a))
}
