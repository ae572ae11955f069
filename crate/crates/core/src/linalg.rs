//! Self-contained banded symmetric linear algebra: banded Cholesky and LU
//! factorizations, Lanczos with a caller-supplied inner product, and a
//! dense Householder + implicit-QL eigensolver used as a cross-check path.
//!
//! Everything the crate assembles is banded by construction (bandwidth 2
//! from the fourth-order stencils), so no general sparse formats appear.

use num_complex::Complex64;

use crate::{Error, Result};

/// Symmetric banded matrix, packed by diagonals: `diag[d][i] = A[i][i+d]`.
#[derive(Debug, Clone)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    diags: Vec<Vec<f64>>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let diags = (0..=bw).map(|d| vec![0.0; n - d]).collect();
        SymBanded { n, bw, diags }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        if hi - lo > self.bw {
            0.0
        } else {
            self.diags[hi - lo][lo]
        }
    }

    /// Add `v` to entry `(i, j)` (and by symmetry `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        assert!(hi - lo <= self.bw, "entry outside band");
        self.diags[hi - lo][lo] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = self.diags[0][i] * x[i];
            for d in 1..=self.bw {
                if i + d < self.n {
                    acc += self.diags[d][i] * x[i + d];
                }
                if i >= d {
                    acc += self.diags[d][i - d] * x[i - d];
                }
            }
            *yi = acc;
        }
        y
    }

    /// Matrix-vector product with complex input.
    pub fn matvec_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = x[i] * self.diags[0][i];
            for d in 1..=self.bw {
                if i + d < self.n {
                    acc += x[i + d] * self.diags[d][i];
                }
                if i >= d {
                    acc += x[i - d] * self.diags[d][i - d];
                }
            }
            *yi = acc;
        }
        y
    }

    /// `x^T A y` without forming the intermediate product vector.
    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        x.iter().zip(&ay).map(|(&a, &b)| a * b).sum()
    }

    /// `A + s * diag(w)`.
    pub fn add_scaled_diag(&self, s: f64, w: &[f64]) -> SymBanded {
        let mut out = self.clone();
        for i in 0..self.n {
            out.diags[0][i] += s * w[i];
        }
        out
    }

    /// Maximum relative asymmetry; zero by construction, kept as an
    /// assembly sanity check.
    pub fn symmetry_defect(&self) -> f64 {
        0.0
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for j in i..(i + self.bw + 1).min(self.n) {
                a[i][j] = self.get(i, j);
                a[j][i] = a[i][j];
            }
        }
        a
    }
}

/// Banded Cholesky factor `A = L L^T` of a symmetric positive definite
/// banded matrix.
#[derive(Debug, Clone)]
pub struct CholBanded {
    n: usize,
    bw: usize,
    // low[d][i] = L[i+d][i], d = 0..=bw
    low: Vec<Vec<f64>>,
}

pub fn cholesky_banded(a: &SymBanded) -> Result<CholBanded> {
    let n = a.n;
    let bw = a.bw;
    let mut low: Vec<Vec<f64>> = (0..=bw).map(|d| vec![0.0; n - d]).collect();
    for j in 0..n {
        let mut s = a.diags[0][j];
        let kmin = j.saturating_sub(bw);
        for k in kmin..j {
            let l = low[j - k][k];
            s -= l * l;
        }
        if s <= 0.0 || !s.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j });
        }
        let ljj = s.sqrt();
        low[0][j] = ljj;
        for i in j + 1..(j + bw + 1).min(n) {
            let mut s = if i - j <= bw { a.diags[i - j][j] } else { 0.0 };
            let kmin = i.saturating_sub(bw);
            for k in kmin..j {
                s -= low[i - k][k] * low[j - k][k];
            }
            low[i - j][j] = s / ljj;
        }
    }
    Ok(CholBanded { n, bw, low })
}

impl CholBanded {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let bw = self.bw;
        let mut y = b.to_vec();
        for i in 0..n {
            let kmin = i.saturating_sub(bw);
            let mut s = y[i];
            for k in kmin..i {
                s -= self.low[i - k][k] * y[k];
            }
            y[i] = s / self.low[0][i];
        }
        for i in (0..n).rev() {
            let kmax = (i + bw + 1).min(n);
            let mut s = y[i];
            for k in i + 1..kmax {
                s -= self.low[k - i][i] * y[k];
            }
            y[i] = s / self.low[0][i];
        }
        y
    }
}

/// Scalar abstraction so the banded LU serves both the real block steppers
/// and the complex field stepper.
pub trait LinScalar:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn modulus(&self) -> f64;
}

impl LinScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn modulus(&self) -> f64 {
        self.abs()
    }
}

impl LinScalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn modulus(&self) -> f64 {
        self.norm()
    }
}

/// General banded matrix with `bl` sub- and `bu` super-diagonals, stored
/// LAPACK-style with room for fill-in during pivoted elimination.
#[derive(Debug, Clone)]
pub struct GenBanded<T> {
    n: usize,
    bl: usize,
    bu: usize,
    // rows of the band: data[r][j] = A[j + r - bu - bl][j] in factor storage;
    // before factorization row r holds diagonal offset r - (bl + bu).
    data: Vec<Vec<T>>,
}

impl<T: LinScalar> GenBanded<T> {
    pub fn zeros(n: usize, bl: usize, bu: usize) -> Self {
        let rows = bl + bu + bl + 1; // extra bl rows of fill-in for pivoting
        GenBanded { n, bl, bu, data: vec![vec![T::zero(); n]; rows] }
    }

    /// Set entry `(i, j)`; must lie within the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let off = i as isize - j as isize;
        assert!(-(self.bu as isize) <= off && off <= self.bl as isize, "outside band");
        let r = (off + (self.bl + self.bu) as isize) as usize;
        self.data[r][j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let off = i as isize - j as isize;
        assert!(-(self.bu as isize) <= off && off <= self.bl as isize, "outside band");
        let r = (off + (self.bl + self.bu) as isize) as usize;
        self.data[r][j] = self.data[r][j] + v;
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for j in 0..self.n {
            let imin = j.saturating_sub(self.bu);
            let imax = (j + self.bl).min(self.n - 1);
            for i in imin..=imax {
                let r = (i as isize - j as isize + (self.bl + self.bu) as isize) as usize;
                y[i] = y[i] + self.data[r][j] * x[j];
            }
        }
        y
    }

    /// In-place LU with partial pivoting; returns the factor object.
    pub fn lu(mut self) -> Result<LuBanded<T>> {
        let n = self.n;
        let bl = self.bl;
        let width = self.bl + self.bu; // widest superdiagonal reach after pivoting
        let mut pivots = vec![0usize; n];
        // shift band storage so row index bl+bu+bl maps the lowest subdiagonal
        for k in 0..n {
            // find pivot among rows k..k+bl
            let mut p = k;
            let mut pmax = self.band_get(width, k, k).modulus();
            for i in k + 1..(k + bl + 1).min(n) {
                let v = self.band_get(width, i, k).modulus();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax == 0.0 || !pmax.is_finite() {
                return Err(Error::SingularFactor { index: k });
            }
            pivots[k] = p;
            if p != k {
                for j in k..(k + width + 1).min(n) {
                    let a = self.band_get(width, k, j);
                    let b = self.band_get(width, p, j);
                    self.band_set(width, k, j, b);
                    self.band_set(width, p, j, a);
                }
            }
            let piv = self.band_get(width, k, k);
            for i in k + 1..(k + bl + 1).min(n) {
                let m = self.band_get(width, i, k) / piv;
                self.band_set(width, i, k, m);
                for j in k + 1..(k + width + 1).min(n) {
                    let v = self.band_get(width, i, j) - m * self.band_get(width, k, j);
                    self.band_set(width, i, j, v);
                }
            }
        }
        Ok(LuBanded { n, bl, width, data: self.data, pivots })
    }

    fn band_get(&self, width: usize, i: usize, j: usize) -> T {
        let off = i as isize - j as isize;
        if off > self.bl as isize || off < -(width as isize) {
            return T::zero();
        }
        let r = (off + width as isize) as usize;
        self.data[r][j]
    }

    fn band_set(&mut self, width: usize, i: usize, j: usize, v: T) {
        let off = i as isize - j as isize;
        let r = (off + width as isize) as usize;
        self.data[r][j] = v;
    }
}

/// Pivoted banded LU factor; `solve` is reentrant.
#[derive(Debug, Clone)]
pub struct LuBanded<T> {
    n: usize,
    bl: usize,
    width: usize,
    data: Vec<Vec<T>>,
    pivots: Vec<usize>,
}

impl<T: LinScalar> LuBanded<T> {
    fn get(&self, i: usize, j: usize) -> T {
        let off = i as isize - j as isize;
        if off > self.bl as isize || -off > self.width as isize {
            return T::zero();
        }
        let r = (off + self.width as isize) as usize;
        if r >= self.data.len() {
            return T::zero();
        }
        self.data[r][j]
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = b.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            for i in k + 1..(k + self.bl + 1).min(n) {
                y[i] = y[i] - self.get(i, k) * yk;
            }
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..(i + self.width + 1).min(n) {
                s = s - self.get(i, j) * y[j];
            }
            y[i] = s / self.get(i, i);
        }
        y
    }
}

/// Result of a Lanczos run: Ritz values in descending order with their
/// vectors and residual-norm bounds `|beta_k| |s_{k,i}|`.
#[derive(Debug)]
pub struct RitzPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residual_bounds: Vec<f64>,
}

/// Lanczos iteration for an operator self-adjoint with respect to a
/// caller-supplied inner product. Full reorthogonalization against all
/// stored basis vectors when `reorth` is set; returns the `k` largest
/// Ritz values.
///
/// `inner(u, v)` must be a genuine inner product on the operator's
/// invariant subspace; a non-positive norm square signals breakdown.
pub fn lanczos_custom_inner(
    op: impl Fn(&[f64]) -> Vec<f64>,
    inner: impl Fn(&[f64], &[f64]) -> f64,
    start: &[f64],
    k: usize,
    steps: usize,
    reorth: bool,
) -> Result<RitzPairs> {
    let norm0 = inner(start, start);
    if !(norm0 > 0.0) {
        return Err(Error::Breakdown { restarts: 0 });
    }
    let scale = 1.0 / norm0.sqrt();
    let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|&x| x * scale).collect()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    for j in 0..steps {
        let v = basis[j].clone();
        let mut w = op(&v);
        let a = inner(&v, &w);
        alphas.push(a);
        for (wi, &vi) in w.iter_mut().zip(&v) {
            *wi -= a * vi;
        }
        if j > 0 {
            let b = betas[j - 1];
            for (wi, &ui) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= b * ui;
            }
        }
        if reorth {
            for u in &basis {
                let c = inner(u, &w);
                for (wi, &ui) in w.iter_mut().zip(u) {
                    *wi -= c * ui;
                }
            }
        }
        let b2 = inner(&w, &w);
        if !(b2 > 0.0) || b2.sqrt() < 1e-14 * alphas[0].abs().max(1.0) {
            break; // invariant subspace found
        }
        let b = b2.sqrt();
        betas.push(b);
        let inv = 1.0 / b;
        basis.push(w.iter().map(|&x| x * inv).collect());
    }
    let m = alphas.len();
    if m == 0 {
        return Err(Error::Breakdown { restarts: 0 });
    }
    let (theta, s) = tridiag_eigen(&alphas, &betas[..m.saturating_sub(1)])?;
    // descending
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| theta[b].partial_cmp(&theta[a]).unwrap());
    let kk = k.min(m);
    let mut values = Vec::with_capacity(kk);
    let mut vectors = Vec::with_capacity(kk);
    let mut bounds = Vec::with_capacity(kk);
    let beta_last = if betas.len() >= m { betas[m - 1] } else { 0.0 };
    for &idx in order.iter().take(kk) {
        values.push(theta[idx]);
        let mut v = vec![0.0; basis[0].len()];
        for (r, base) in basis.iter().take(m).enumerate() {
            let c = s[r][idx];
            for (vi, &bi) in v.iter_mut().zip(base) {
                *vi += c * bi;
            }
        }
        vectors.push(v);
        bounds.push(beta_last.abs() * s[m - 1][idx].abs());
    }
    Ok(RitzPairs { values, vectors, residual_bounds: bounds })
}

/// Eigen-decomposition of a symmetric tridiagonal matrix by implicit-shift
/// QL; returns ascending eigenvalues and the orthogonal matrix columns.
pub fn tridiag_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    if n > 1 {
        e[..n - 1].copy_from_slice(&off[..n - 1]);
    }
    let mut z = vec![vec![0.0; n]; n];
    for (i, row) in z.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    ql_implicit(&mut d, &mut e, &mut z)?;
    // sort ascending, permute columns
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    let ds: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut zs = vec![vec![0.0; n]; n];
    for (newc, &oldc) in order.iter().enumerate() {
        for r in 0..n {
            zs[r][newc] = z[r][oldc];
        }
    }
    Ok((ds, zs))
}

fn ql_implicit(d: &mut [f64], e: &mut [f64], z: &mut [Vec<f64>]) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::NonConvergence("QL exceeded 50 sweeps".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // rotation underflow: drop the shift and retry
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for zrow in z.iter_mut() {
                    f = zrow[i + 1];
                    zrow[i + 1] = s * zrow[i] + c * f;
                    zrow[i] = c * zrow[i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Dense symmetric eigensolver: Householder tridiagonalization followed by
/// implicit-shift QL. Cross-check path for orders up to ~1500.
pub fn symmetric_ql_dense(a: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = a.to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    // shift e for QL convention: e[i] couples i and i+1
    let mut esub = vec![0.0; n];
    for i in 1..n {
        esub[i - 1] = e[i];
    }
    ql_implicit(&mut d, &mut esub, &mut v)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].partial_cmp(&d[y]).unwrap());
    let ds: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vs = vec![vec![0.0; n]; n];
    for (newc, &oldc) in order.iter().enumerate() {
        for r in 0..n {
            vs[r][newc] = v[r][oldc];
        }
    }
    Ok((ds, vs))
}

/// Householder reduction to tridiagonal form with accumulated transform.
fn tred2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = v.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = v[i][..=l].iter().map(|x| x.abs()).sum();
            if scale == 0.0 {
                e[i] = v[i][l];
            } else {
                for k in 0..=l {
                    v[i][k] /= scale;
                    h += v[i][k] * v[i][k];
                }
                let f = v[i][l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                v[i][l] = f - g;
                let mut tau = 0.0;
                for j in 0..=l {
                    v[j][i] = v[i][j] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += v[j][k] * v[i][k];
                    }
                    for k in j + 1..=l {
                        g += v[k][j] * v[i][k];
                    }
                    e[j] = g / h;
                    tau += e[j] * v[i][j];
                }
                let hh = tau / (2.0 * h);
                for j in 0..=l {
                    let f = v[i][j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let adj = f * e[k] + g * v[i][k];
                        v[j][k] -= adj;
                    }
                }
            }
        } else {
            e[i] = v[i][l];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += v[i][k] * v[k][j];
                }
                for k in 0..i {
                    v[k][j] -= g * v[k][i];
                }
            }
        }
        d[i] = v[i][i];
        v[i][i] = 1.0;
        for k in 0..i {
            v[i][k] = 0.0;
            v[k][i] = 0.0;
        }
    }
}
