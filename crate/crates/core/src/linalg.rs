//! Dense linear algebra kernels: matrices, LU solves, the real nonsymmetric
//! eigenproblem (balance + Householder Hessenberg + Francis double-shift QR),
//! the scaling-and-squaring matrix exponential, and an adaptive Runge-Kutta
//! integrator for linear systems.
//!
//! Everything here operates on small dense matrices (basis sizes in the tens
//! to low hundreds), so plain row-major `Vec<f64>` storage is enough.

use crate::error::{Error, Result};

/// Deterministic pairwise summation. The result depends only on the slice
/// contents and order, never on chunking across worker threads.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(row) {
                    *o += aik * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for (i, slot) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(v) {
                acc += a * b;
            }
            *slot = acc;
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (o, &b) in out.data.iter_mut().zip(&other.data) {
            *o += b;
        }
        out
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (o, &b) in out.data.iter_mut().zip(&other.data) {
            *o -= b;
        }
        out
    }

    pub fn scale(&self, c: f64) -> Mat {
        let mut out = self.clone();
        for o in out.data.iter_mut() {
            *o *= c;
        }
        out
    }

    /// Maximum absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm_1(&self) -> f64 {
        let mut best = 0.0f64;
        for j in 0..self.cols {
            let mut s = 0.0;
            for i in 0..self.rows {
                s += self[(i, j)].abs();
            }
            best = best.max(s);
        }
        best
    }

    /// Maximum absolute asymmetry |a_ij - a_ji|.
    pub fn asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Submatrix dropping row `r` and column `c`.
    pub fn minor(&self, r: usize, c: usize) -> Mat {
        let mut out = Mat::zeros(self.rows - 1, self.cols - 1);
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            for j in 0..self.cols {
                if j == c {
                    continue;
                }
                let ii = if i > r { i - 1 } else { i };
                let jj = if j > c { j - 1 } else { j };
                out[(ii, jj)] = self[(i, j)];
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenvalue of a real matrix, stored as (re, im).
pub type Eig = (f64, f64);

/// All eigenvalues of a real square matrix.
///
/// Pipeline: Parlett-Reinsch balancing (similarity scaling), Householder
/// reduction to upper Hessenberg form, then the Francis implicit double-shift
/// QR iteration. Complex eigenvalues come out in exact conjugate pairs.
pub fn eigenvalues(a: &Mat) -> Result<Vec<Eig>> {
    assert!(a.is_square(), "eigenvalues of a non-square matrix");
    let n = a.rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    hqr_eigenvalues(&mut h)
}

/// Parlett-Reinsch balancing by radix-2 similarity scaling (no permutation).
/// Leaves the spectrum unchanged while equalising row and column norms.
fn balance(a: &mut Mat) {
    let n = a.rows;
    let radix: f64 = 2.0;
    let sq = radix * radix;
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= sq;
            }
            g = r * radix;
            while c >= g {
                f /= radix;
                c /= sq;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let ginv = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= ginv;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// Householder reduction to upper Hessenberg form, in place.
fn hessenberg(h: &mut Mat) {
    let n = h.rows;
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..=high - 1 {
        let mut scale = 0.0;
        for i in m..=high {
            scale += h[(i, m - 1)].abs();
        }
        if scale == 0.0 {
            continue;
        }
        let mut hsum = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hsum += ort[i] * ort[i];
        }
        let mut g = hsum.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hsum -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hsum;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hsum;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        h[(m, m - 1)] = scale * g;
        for i in m + 1..=high {
            h[(i, m - 1)] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix; eigenvalues only.
fn hqr_eigenvalues(h: &mut Mat) -> Result<Vec<Eig>> {
    let nn = h.rows;
    let mut d = vec![0.0f64; nn];
    let mut e = vec![0.0f64; nn];
    let eps = f64::EPSILON / 2.0; // 2^-53
    let mut exshift = 0.0;
    let max_total_iter = 100 * nn.max(4);
    let mut total_iter = 0usize;

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }
    if norm == 0.0 {
        return Ok(vec![(0.0, 0.0); nn]);
    }

    let mut n = nn as isize - 1;
    let mut iter = 0usize;
    while n >= 0 {
        let nu = n as usize;

        // Find a negligible subdiagonal element.
        let mut l = nu;
        while l > 0 {
            let mut s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            // One real root.
            d[nu] = h[(nu, nu)] + exshift;
            n -= 1;
            iter = 0;
        } else if l == nu - 1 {
            // A 2x2 block: real or complex pair.
            let w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            let p0 = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / 2.0;
            let q = p0 * p0 + w;
            let z = q.abs().sqrt();
            let x = h[(nu, nu)] + exshift;
            if q >= 0.0 {
                let z = if p0 >= 0.0 { p0 + z } else { p0 - z };
                d[nu - 1] = x + z;
                d[nu] = if z != 0.0 { x - w / z } else { d[nu - 1] };
            } else {
                d[nu - 1] = x + p0;
                d[nu] = x + p0;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // Form the shift.
            let mut x = h[(nu, nu)];
            let mut y = h[(nu - 1, nu - 1)];
            let mut w = h[(nu, nu - 1)] * h[(nu - 1, nu)];

            if iter == 10 || iter == 20 {
                // Wilkinson's exceptional shift; applied to the whole
                // leading block so deflated roots share the offset.
                exshift += x;
                for i in 0..=nu {
                    h[(i, i)] -= x;
                }
                let s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                let mut s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    let mut s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    let s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = 0.964;
                    w = 0.964;
                }
            }

            iter += 1;
            total_iter += 1;
            if total_iter > max_total_iter {
                return Err(Error::EigenNoConvergence {
                    iterations: total_iter,
                });
            }

            // Two consecutive small subdiagonals let the bulge start late.
            let mut m = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = h[(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - rr - ss;
                r = h[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // Double QR sweep on rows l..=n, columns m..=n.
            for k in m..nu {
                let notlast = k != nu - 1;
                let mut x_scale = 0.0;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x_scale = p.abs() + q.abs() + r.abs();
                    if x_scale == 0.0 {
                        continue;
                    }
                    p /= x_scale;
                    q /= x_scale;
                    r /= x_scale;
                }
                let mut s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s == 0.0 {
                    continue;
                }
                if k != m {
                    h[(k, k - 1)] = -s * x_scale;
                } else if l != m {
                    h[(k, k - 1)] = -h[(k, k - 1)];
                }
                p += s;
                let x = p / s;
                let y = q / s;
                let z = r / s;
                q /= p;
                r /= p;

                for j in k..nn {
                    let mut pp = h[(k, j)] + q * h[(k + 1, j)];
                    if notlast {
                        pp += r * h[(k + 2, j)];
                        h[(k + 2, j)] -= pp * z;
                    }
                    h[(k, j)] -= pp * x;
                    h[(k + 1, j)] -= pp * y;
                }
                let imax = nu.min(k + 3);
                for i in 0..=imax {
                    let mut pp = x * h[(i, k)] + y * h[(i, k + 1)];
                    if notlast {
                        pp += z * h[(i, k + 2)];
                        h[(i, k + 2)] -= pp * r;
                    }
                    h[(i, k)] -= pp;
                    h[(i, k + 1)] -= pp * q;
                }
            }
        }
    }

    Ok(d.into_iter().zip(e).collect())
}

/// LU factorisation with partial pivoting, solving A X = B in place of B.
pub fn lu_solve(a: &Mat, b: &Mat) -> Result<Mat> {
    assert!(a.is_square());
    assert_eq!(a.rows, b.rows);
    let n = a.rows;
    let mut lu = a.clone();
    let mut x = b.clone();
    let mut piv: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut pk = k;
        let mut max = lu[(k, k)].abs();
        for i in k + 1..n {
            let v = lu[(i, k)].abs();
            if v > max {
                max = v;
                pk = i;
            }
        }
        if max == 0.0 {
            return Err(Error::NonFinite {
                context: "singular matrix in LU solve",
            });
        }
        if pk != k {
            for j in 0..n {
                let (a1, a2) = (lu[(k, j)], lu[(pk, j)]);
                lu[(k, j)] = a2;
                lu[(pk, j)] = a1;
            }
            piv.swap(k, pk);
            for j in 0..x.cols {
                let (b1, b2) = (x[(k, j)], x[(pk, j)]);
                x[(k, j)] = b2;
                x[(pk, j)] = b1;
            }
        }
        let inv = 1.0 / lu[(k, k)];
        for i in k + 1..n {
            let m = lu[(i, k)] * inv;
            lu[(i, k)] = m;
            if m == 0.0 {
                continue;
            }
            for j in k + 1..n {
                lu[(i, j)] -= m * lu[(k, j)];
            }
            for j in 0..x.cols {
                x[(i, j)] -= m * x[(k, j)];
            }
        }
    }
    // Back substitution.
    for j in 0..x.cols {
        for i in (0..n).rev() {
            let mut s = x[(i, j)];
            for k in i + 1..n {
                s -= lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / lu[(i, i)];
        }
    }
    Ok(x)
}

// Pade approximant orders and their 1-norm thresholds for expm.
const EXPM_THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
    (13, 5.371_920_351_148_152),
];

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const PADE9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Matrix exponential by scaling and squaring with diagonal Pade
/// approximants (Higham's method).
pub fn expm(a: &Mat) -> Result<Mat> {
    assert!(a.is_square());
    let norm = a.norm_1();
    if !norm.is_finite() {
        return Err(Error::NonFinite {
            context: "matrix exponential input",
        });
    }

    for &(order, theta) in &EXPM_THETA[..4] {
        if norm <= theta {
            let (u, v) = pade_uv(a, order);
            return pade_ratio(&u, &v);
        }
    }

    // Pade-13 with scaling.
    let theta13 = EXPM_THETA[4].1;
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(s));
    let (u, v) = pade13_uv(&scaled);
    let mut r = pade_ratio(&u, &v)?;
    for _ in 0..s {
        r = r.matmul(&r);
    }
    Ok(r)
}

/// U and V for the low-order diagonal Pade approximants.
fn pade_uv(a: &Mat, order: usize) -> (Mat, Mat) {
    let coeffs: &[f64] = match order {
        3 => &PADE3,
        5 => &PADE5,
        7 => &PADE7,
        9 => &PADE9,
        _ => unreachable!(),
    };
    let n = a.rows;
    let a2 = a.matmul(a);
    // Even powers: I, A^2, A^4, ...
    let mut even_pows = vec![Mat::identity(n)];
    for k in 1..=order / 2 {
        even_pows.push(even_pows[k - 1].matmul(&a2));
    }
    let mut u_inner = Mat::zeros(n, n);
    let mut v = Mat::zeros(n, n);
    for k in 0..=order / 2 {
        u_inner = u_inner.add(&even_pows[k].scale(coeffs[2 * k + 1]));
        v = v.add(&even_pows[k].scale(coeffs[2 * k]));
    }
    (a.matmul(&u_inner), v)
}

fn pade13_uv(a: &Mat) -> (Mat, Mat) {
    let n = a.rows;
    let b = &PADE13;
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);
    let u_hi = a6.scale(b[13]).add(&a4.scale(b[11])).add(&a2.scale(b[9]));
    let u_inner = a6
        .matmul(&u_hi)
        .add(&a6.scale(b[7]))
        .add(&a4.scale(b[5]))
        .add(&a2.scale(b[3]))
        .add(&Mat::identity(n).scale(b[1]));
    let u = a.matmul(&u_inner);
    let v_hi = a6.scale(b[12]).add(&a4.scale(b[10])).add(&a2.scale(b[8]));
    let v = a6
        .matmul(&v_hi)
        .add(&a6.scale(b[6]))
        .add(&a4.scale(b[4]))
        .add(&a2.scale(b[2]))
        .add(&Mat::identity(n).scale(b[0]));
    (u, v)
}

/// (V - U)^{-1} (V + U).
fn pade_ratio(u: &Mat, v: &Mat) -> Result<Mat> {
    let num = v.add(u);
    let den = v.sub(u);
    lu_solve(&den, &num)
}

/// Integrate dy/dt = M y from `y0` over `[0, t]` with the Dormand-Prince
/// 5(4) embedded pair. Returns y(t).
pub fn rk45_linear(m: &Mat, y0: &[f64], t: f64, rel_tol: f64, abs_tol: f64) -> Result<Vec<f64>> {
    let mut y = y0.to_vec();
    if t == 0.0 {
        return Ok(y);
    }
    let f = |v: &[f64]| m.matvec(v);

    let mut tcur = 0.0f64;
    let mut h = (t / 16.0).clamp(1e-8, 0.1);
    let mut k1 = f(&y);
    let min_h = t * 1e-14;

    while tcur < t {
        if h > t - tcur {
            h = t - tcur;
        }
        // Dormand-Prince stages.
        let add = |a: &[f64], pairs: &[(f64, &Vec<f64>)]| -> Vec<f64> {
            let mut out = a.to_vec();
            for (c, k) in pairs {
                for (o, kv) in out.iter_mut().zip(k.iter()) {
                    *o += h * c * kv;
                }
            }
            out
        };
        let k2 = f(&add(&y, &[(1.0 / 5.0, &k1)]));
        let k3 = f(&add(&y, &[(3.0 / 40.0, &k1), (9.0 / 40.0, &k2)]));
        let k4 = f(&add(
            &y,
            &[(44.0 / 45.0, &k1), (-56.0 / 15.0, &k2), (32.0 / 9.0, &k3)],
        ));
        let k5 = f(&add(
            &y,
            &[
                (19372.0 / 6561.0, &k1),
                (-25360.0 / 2187.0, &k2),
                (64448.0 / 6561.0, &k3),
                (-212.0 / 729.0, &k4),
            ],
        ));
        let k6 = f(&add(
            &y,
            &[
                (9017.0 / 3168.0, &k1),
                (-355.0 / 33.0, &k2),
                (46732.0 / 5247.0, &k3),
                (49.0 / 176.0, &k4),
                (-5103.0 / 18656.0, &k5),
            ],
        ));
        let y5 = add(
            &y,
            &[
                (35.0 / 384.0, &k1),
                (500.0 / 1113.0, &k3),
                (125.0 / 192.0, &k4),
                (-2187.0 / 6784.0, &k5),
                (11.0 / 84.0, &k6),
            ],
        );
        let k7 = f(&y5);
        let y4 = add(
            &y,
            &[
                (5179.0 / 57600.0, &k1),
                (7571.0 / 16695.0, &k3),
                (393.0 / 640.0, &k4),
                (-92097.0 / 339200.0, &k5),
                (187.0 / 2100.0, &k6),
                (1.0 / 40.0, &k7),
            ],
        );

        // Scaled error norm.
        let mut err: f64 = 0.0;
        for i in 0..y.len() {
            let sc = abs_tol + rel_tol * y[i].abs().max(y5[i].abs());
            err = err.max(((y5[i] - y4[i]) / sc).abs());
        }

        if err <= 1.0 {
            tcur += h;
            y = y5;
            k1 = k7; // FSAL
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        if h < min_h && tcur < t {
            return Err(Error::StepSizeUnderflow { t: tcur, h });
        }
    }
    Ok(y)
}
