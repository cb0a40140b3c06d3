//! Probability measures on a truncated line, represented on composite
//! Gauss-Legendre grids: Gibbs-type stationary densities, moments, CDFs,
//! quantiles, and reproducible inverse-CDF sampling.

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::model::{ModelKind, ModelSpec};
use crate::rng;

/// Positive abscissas of the 16-point Gauss-Legendre rule on [-1, 1].
#[allow(clippy::excessive_precision)]
const GL16_X: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_91,
    0.458_016_777_657_227_39,
    0.617_876_244_402_643_75,
    0.755_404_408_355_003_03,
    0.865_631_202_387_831_74,
    0.944_575_023_073_232_58,
    0.989_400_934_991_649_93,
];

#[allow(clippy::excessive_precision)]
const GL16_W: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_59,
    0.169_156_519_395_002_54,
    0.149_595_988_816_576_73,
    0.124_628_971_255_533_87,
    0.095_158_511_682_492_78,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_09,
];

/// Sum that is invariant under reversing the slice: mirror pairs are added
/// first, so symmetric data normalises bitwise-identically to its mirror.
fn symmetric_sum(xs: &[f64]) -> f64 {
    let n = xs.len();
    let mut folded = Vec::with_capacity(n / 2 + 1);
    for k in 0..n / 2 {
        folded.push(xs[k] + xs[n - 1 - k]);
    }
    if n % 2 == 1 {
        folded.push(xs[n / 2]);
    }
    pairwise_sum(&folded)
}

/// A probability measure on [-R, R] held as density values on a composite
/// 16-point Gauss-Legendre grid.
#[derive(Debug, Clone)]
pub struct GridMeasure {
    /// Strictly increasing quadrature nodes spanning [-R, R].
    pub nodes: Vec<f64>,
    /// Matching quadrature weights (all positive).
    pub weights: Vec<f64>,
    /// Probability density at the nodes.
    pub density: Vec<f64>,
    /// Log of the normalisation constant divided out of the raw density.
    pub log_norm: f64,
    /// Cumulative masses: `cdf[i]` is the sum of `weights[j] * density[j]`
    /// over `j <= i`.
    pub cdf: Vec<f64>,
    truncation: f64,
}

/// Default truncation radius for a model's stationary family.
pub fn default_truncation(model: &ModelSpec) -> f64 {
    match model.kind {
        ModelKind::Dawson => 8.0 * model.sigma.max(1.0),
        _ => 12.0,
    }
}

/// Build the frozen-statistic stationary candidate for `model` at statistic
/// value `s` on `panels` x 16 Gauss-Legendre nodes over [-truncation, truncation].
///
/// Fails with `TruncationTooSmall` when more than 1e-10 of the mass sits
/// within R/10 of either endpoint.
pub fn gibbs_measure(
    model: &ModelSpec,
    s: f64,
    truncation: f64,
    panels: usize,
) -> Result<GridMeasure> {
    assert!(truncation > 0.0, "truncation radius must be positive");
    assert!(panels >= 8, "need at least 8 quadrature panels");
    from_log_density(|x| model.confinement_logdensity(x, s), truncation, panels)
}

/// As `gibbs_measure`, doubling the radius (up to six times) until the
/// endpoint-mass check passes.
pub fn gibbs_measure_auto(model: &ModelSpec, s: f64, panels: usize) -> Result<GridMeasure> {
    let mut radius = default_truncation(model);
    let mut last = None;
    for _ in 0..=6 {
        match gibbs_measure(model, s, radius, panels) {
            Ok(m) => return Ok(m),
            Err(e @ Error::TruncationTooSmall { .. }) => {
                last = Some(e);
                radius *= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap())
}

/// Normalise an arbitrary log-unnormalised density on the standard grid.
pub fn from_log_density(
    log_density: impl Fn(f64) -> f64,
    truncation: f64,
    panels: usize,
) -> Result<GridMeasure> {
    let (nodes, weights) = composite_grid(truncation, panels);
    let logs: Vec<f64> = nodes.iter().map(|&x| log_density(x)).collect();
    let max_log = logs.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if !max_log.is_finite() {
        return Err(Error::NonFinite {
            context: "log-density on quadrature grid",
        });
    }
    let mut density: Vec<f64> = logs.iter().map(|&l| (l - max_log).exp()).collect();

    let masses: Vec<f64> = density.iter().zip(&weights).map(|(d, w)| d * w).collect();
    let raw_norm = symmetric_sum(&masses);
    for d in density.iter_mut() {
        *d /= raw_norm;
    }

    // Mass near the endpoints must be negligible or the truncation lies.
    let margin = truncation / 10.0;
    let mut edge_mass = 0.0;
    for ((&x, &w), &d) in nodes.iter().zip(&weights).zip(&density) {
        if x.abs() > truncation - margin {
            edge_mass += w * d;
        }
    }
    if edge_mass > 1e-10 {
        return Err(Error::TruncationTooSmall {
            radius: truncation,
            endpoint_mass: edge_mass,
        });
    }

    let mut cdf = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    for (&w, &d) in weights.iter().zip(&density) {
        acc += w * d;
        cdf.push(acc);
    }
    // Pin the final value; accumulated rounding is well under 1e-12.
    let last = cdf.len() - 1;
    cdf[last] = 1.0;

    Ok(GridMeasure {
        nodes,
        weights,
        density,
        log_norm: raw_norm.ln() + max_log,
        cdf,
        truncation,
    })
}

fn composite_grid(truncation: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let width = 2.0 * truncation / panels as f64;
    let half = width / 2.0;
    let mut nodes = Vec::with_capacity(panels * 16);
    let mut weights = Vec::with_capacity(panels * 16);
    for p in 0..panels {
        let center = -truncation + (p as f64 + 0.5) * width;
        for j in (0..8).rev() {
            nodes.push(center - half * GL16_X[j]);
            weights.push(half * GL16_W[j]);
        }
        for j in 0..8 {
            nodes.push(center + half * GL16_X[j]);
            weights.push(half * GL16_W[j]);
        }
    }
    (nodes, weights)
}

impl GridMeasure {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    /// Integral of `f` against the measure.
    pub fn moment(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(self.weights.iter().zip(&self.density))
            .map(|(&x, (&w, &d))| {
                let v = f(x);
                w * d * v
            })
            .collect();
        if terms.iter().any(|t| t.is_nan()) {
            return Err(Error::NonFinite {
                context: "integrand in moment",
            });
        }
        Ok(pairwise_sum(&terms))
    }

    pub fn mean(&self) -> f64 {
        self.moment(|x| x).expect("mean of grid measure")
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.moment(|x| (x - m) * (x - m))
            .expect("variance of grid measure")
    }

    /// Inverse CDF by piecewise-linear interpolation.
    ///
    /// Node masses are treated with the midpoint convention (half the node's
    /// mass before it, half after), which keeps the inverse exact at the
    /// median of symmetric densities.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                reason: "quantile level must lie strictly inside (0, 1)",
            });
        }
        let n = self.len();
        // Midpoint-corrected cumulative values per node.
        let ftilde = |i: usize| -> f64 {
            let below = if i == 0 { 0.0 } else { self.cdf[i - 1] };
            below + 0.5 * self.weights[i] * self.density[i]
        };
        if p <= ftilde(0) {
            return Ok(self.nodes[0]);
        }
        if p >= ftilde(n - 1) {
            return Ok(self.nodes[n - 1]);
        }
        // Binary search for the bracketing pair.
        let (mut lo, mut hi) = (0usize, n - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if ftilde(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (fl, fh) = (ftilde(lo), ftilde(hi));
        if fh <= fl {
            return Ok(self.nodes[lo]);
        }
        let t = (p - fl) / (fh - fl);
        Ok(self.nodes[lo] + t * (self.nodes[hi] - self.nodes[lo]))
    }

    /// `n` reproducible i.i.d. draws via inverse-CDF of counter-based
    /// uniforms; identical output for identical seeds on any thread count.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let key = rng::derive_seed(seed, 0x5a4d_504c); // sampling stream
        (0..n)
            .map(|i| {
                let u = rng::uniform(key, i as u64, 0);
                self.quantile(u).expect("uniform draw lies in (0,1)")
            })
            .collect()
    }

    /// Write `x,density,cdf` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "x,density,cdf")?;
        for i in 0..self.len() {
            writeln!(out, "{},{},{}", self.nodes[i], self.density[i], self.cdf[i])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_model;
    use proptest::prelude::*;

    fn std_gaussian() -> GridMeasure {
        let m = make_model(ModelKind::GaussCos1d, 0.0, std::f64::consts::SQRT_2).unwrap();
        gibbs_measure(&m, 0.0, 12.0, 64).unwrap()
    }

    #[test]
    fn gaussian_moments() {
        let mu = std_gaussian();
        assert!(mu.mean().abs() < 1e-10);
        assert!((mu.variance() - 1.0).abs() < 1e-8);
        assert!((mu.moment(|_| 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((mu.moment(|x| x * x).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn gaussian_shifted_by_interaction() {
        // Frozen statistic m: the stationary candidate is N(beta m, 1).
        let model = make_model(ModelKind::GaussCos1d, 1.0, std::f64::consts::SQRT_2).unwrap();
        let m = 0.37;
        let mu = gibbs_measure(&model, m, 12.0, 64).unwrap();
        assert!((mu.mean() - m).abs() < 1e-10);
        assert!((mu.variance() - 1.0).abs() < 1e-8);
        // cos moment in closed form: exp(-1/2) cos(beta m).
        let want = (-0.5f64).exp() * m.cos();
        assert!((mu.moment(|x| x.cos()).unwrap() - want).abs() < 1e-8);
    }

    #[test]
    fn dawson_symmetric_at_zero_statistic() {
        let model = make_model(ModelKind::Dawson, 1.0, 0.5).unwrap();
        let mu = gibbs_measure(&model, 0.0, 8.0, 64).unwrap();
        assert!(mu.mean().abs() < 1e-10);
        // Even density, node for node.
        let n = mu.len();
        for i in 0..n {
            assert_eq!(mu.density[i], mu.density[n - 1 - i]);
        }
        // Below beta = 1 the interaction no longer fills the double well:
        // the symmetric candidate is genuinely bimodal.
        let model2 = make_model(ModelKind::Dawson, 0.5, 0.4).unwrap();
        let mu2 = gibbs_measure(&model2, 0.0, 8.0, 64).unwrap();
        let at = |m: &GridMeasure, x: f64| {
            let i = m.nodes.iter().position(|&n| (n - x).abs() < 0.05).unwrap();
            m.density[i]
        };
        // Wells of x^4/4 - x^2/4 sit at x = +/- sqrt(1/2).
        let well = (0.5f64).sqrt();
        assert!(at(&mu2, well) > 2.0 * at(&mu2, 0.0));
    }

    #[test]
    fn dawson_mirror_symmetry_is_exact() {
        let model = make_model(ModelKind::Dawson, 1.0, 0.5).unwrap();
        let plus = gibbs_measure(&model, 0.4, 8.0, 64).unwrap();
        let minus = gibbs_measure(&model, -0.4, 8.0, 64).unwrap();
        let n = plus.len();
        for i in 0..n {
            assert_eq!(plus.nodes[i], -minus.nodes[n - 1 - i]);
            assert_eq!(plus.density[i], minus.density[n - 1 - i]);
        }
    }

    #[test]
    fn truncation_too_small_is_detected() {
        let model = make_model(ModelKind::GaussCos1d, 0.0, std::f64::consts::SQRT_2).unwrap();
        match gibbs_measure(&model, 0.0, 1.5, 16) {
            Err(Error::TruncationTooSmall { .. }) => {}
            other => panic!("expected truncation error, got {other:?}"),
        }
        // The auto wrapper recovers by enlarging the radius.
        let model2 = make_model(ModelKind::Dawson, 1.0, 0.5).unwrap();
        assert!(gibbs_measure_auto(&model2, 0.0, 64).is_ok());
    }

    #[test]
    fn quantile_matches_gaussian_table() {
        let mu = std_gaussian();
        assert!(mu.quantile(0.5).unwrap().abs() < 1e-8);
        // Phi(1) = 0.8413447461 from an independent erf series.
        assert!((mu.quantile(0.8413447460685429).unwrap() - 1.0).abs() < 1e-3);
        assert!((mu.quantile(0.15865525393145707).unwrap() + 1.0).abs() < 1e-3);
        assert!(mu.quantile(0.0).is_err());
        assert!(mu.quantile(1.0).is_err());
    }

    #[test]
    fn doubling_panels_leaves_moments_fixed() {
        for (kind, beta, sigma, s) in [
            (ModelKind::GaussCos1d, 1.0, std::f64::consts::SQRT_2, 0.4),
            (ModelKind::Dawson, 1.0, 0.5, 0.2),
            (ModelKind::SubGaussian, 1.0, 0.7, 0.3),
        ] {
            let model = make_model(kind, beta, sigma).unwrap();
            let r = default_truncation(&model);
            let a = gibbs_measure(&model, s, r, 64).unwrap();
            let b = gibbs_measure(&model, s, r, 128).unwrap();
            for f in [|x: f64| x, |x: f64| x * x, |x: f64| x.cos()] {
                let (ma, mb) = (a.moment(f).unwrap(), b.moment(f).unwrap());
                assert!((ma - mb).abs() < 1e-9, "{kind:?}: {ma} vs {mb}");
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_unbiased() {
        let mu = std_gaussian();
        let a = mu.sample(10_000, 7);
        let b = mu.sample(10_000, 7);
        assert_eq!(a, b);
        let c = mu.sample(10_000, 8);
        assert_ne!(a, c);

        let n = 1_000_000;
        let big = mu.sample(n, 42);
        let mean = pairwise_sum(&big) / n as f64;
        assert!(mean.abs() < 4e-3, "sample mean {mean}");
    }

    #[test]
    fn moment_rejects_nan() {
        let mu = std_gaussian();
        let res = mu.moment(|x| if x.abs() < 0.01 { f64::NAN } else { x });
        assert!(matches!(res, Err(Error::NonFinite { .. })));
    }

    proptest! {
        #[test]
        fn quantile_is_monotone(ps in proptest::collection::vec(0.001f64..0.999, 2..20)) {
            let mu = std_gaussian();
            let mut sorted = ps.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let qs: Vec<f64> = sorted.iter().map(|&p| mu.quantile(p).unwrap()).collect();
            for w in qs.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
        }

        #[test]
        fn cdf_nondecreasing_for_all_models(s in -0.8f64..0.8) {
            let model = make_model(ModelKind::Dawson, 1.0, 0.6).unwrap();
            let mu = gibbs_measure(&model, s, 8.0, 32).unwrap();
            for w in mu.cdf.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-15);
            }
            prop_assert!((mu.cdf.last().unwrap() - 1.0).abs() < 1e-12);
            prop_assert!(mu.density.iter().all(|&d| d >= 0.0));
        }
    }
}
