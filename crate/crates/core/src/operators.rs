//! Discretized linearized operators as symmetric banded pencils
//! `A f = lambda W f` with the positive diagonal weight `1 - profile^2`,
//! plus the strictly positive smoothers whose banded Cholesky solves
//! realize the compact inverses.
//!
//! The second derivative uses the fourth-order five-point stencil folded
//! by even reflection at both ends; scaling the two boundary rows by 1/2
//! makes the folded matrix exactly symmetric. The fold encodes the
//! derivative-free far field of the bounded eigenfunctions; the decaying
//! family additionally carries the weak-form boundary term of the decay
//! condition `f' = -+2 f` as corner penalties (`robin2`).
//!
//! Matrices are never rescaled by `cosh^2`: at `L = 20` that factor
//! reaches 2.4e17 and would wipe out eigenvalue accuracy. The weighted
//! operators exist only through the pencil pair `(A, W)`.

use crate::grid::{weighted_inner_real, Grid, RealField};
use crate::kernels::{sample_closed_form, ClosedForm};
use crate::linalg::{cholesky_banded, CholBanded, SymBanded};
use crate::{Error, Result};

/// Operator selector for [`assemble`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `-d^2 + 6 p^2 - 2 (+ eps V)`, decaying far field.
    LPlus,
    /// `-d^2 + 2 p^2 - 2 (+ eps V)`, bounded far field.
    LMinus,
    /// `-d^2 + 4`, the strictly positive shift of `LPlus`.
    MPlus,
    /// `-d^2 + sech^2`, the strictly positive shift of `LMinus`.
    MMinus,
}

/// Boundary closure tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    /// Even-reflection fold; natural `f' = 0` far field.
    Neumann,
    /// Fold plus weak-form corner penalty for `f' = -+2 f`.
    Robin2,
}

/// Symmetric banded stiffness with positive diagonal weight; the discrete
/// generalized eigenproblem `A f = lambda W f`.
#[derive(Debug, Clone)]
pub struct WeightedPencil {
    grid: Grid,
    stiffness: SymBanded,
    /// combined weight diagonal, fold factors included
    weight: Vec<f64>,
    /// fold factors (1/2 at the two boundary rows)
    fold: Vec<f64>,
    bc: BoundaryTag,
}

impl WeightedPencil {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn stiffness(&self) -> &SymBanded {
        &self.stiffness
    }

    /// Weight diagonal of the generalized problem (fold included).
    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn fold(&self) -> &[f64] {
        &self.fold
    }

    pub fn bc(&self) -> BoundaryTag {
        self.bc
    }

    pub fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        self.stiffness.matvec(x)
    }

    pub fn apply_w(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.weight).map(|(&v, &w)| v * w).collect()
    }

    /// Discrete weighted inner product `sum_i W_i u_i v_i h`, the
    /// trapezoid-with-fold analogue of the weighted integral.
    pub fn winner(&self, u: &[f64], v: &[f64]) -> f64 {
        let h = self.grid.spacing();
        u.iter().zip(v).zip(&self.weight).map(|((&a, &b), &w)| a * b * w).sum::<f64>() * h
    }

    pub fn wnormalize(&self, v: &mut [f64]) {
        let n = self.winner(v, v).sqrt();
        for x in v.iter_mut() {
            *x /= n;
        }
    }

    /// Copy of the pencil with the weight replaced by the plain-L2 fold
    /// weights; turns the weighted problem into the unweighted one with
    /// the same stiffness.
    pub fn with_unit_weight(&self) -> WeightedPencil {
        WeightedPencil {
            grid: self.grid.clone(),
            stiffness: self.stiffness.clone(),
            weight: self.fold.clone(),
            fold: self.fold.clone(),
            bc: self.bc,
        }
    }

    /// Pencil residual `||A f - lambda W f||_2 / ||W f||_2`, measured
    /// modulo the span of `modulo` columns (Lagrange multipliers of
    /// constrained pairs).
    pub fn residual(&self, lambda: f64, f: &[f64], modulo: &[Vec<f64>]) -> f64 {
        let af = self.apply_a(f);
        let wf = self.apply_w(f);
        let mut r: Vec<f64> = af.iter().zip(&wf).map(|(&a, &w)| a - lambda * w).collect();
        for q in modulo {
            let qn: f64 = q.iter().map(|&x| x * x).sum();
            if qn == 0.0 {
                continue;
            }
            let c: f64 = q.iter().zip(&r).map(|(&a, &b)| a * b).sum::<f64>() / qn;
            for (ri, &qi) in r.iter_mut().zip(q) {
                *ri -= c * qi;
            }
        }
        let rn: f64 = r.iter().map(|&x| x * x).sum::<f64>().sqrt();
        let wn: f64 = wf.iter().map(|&x| x * x).sum::<f64>().sqrt();
        rn / wn.max(f64::MIN_POSITIVE)
    }
}

/// Folded pentadiagonal discretization of `-d^2/dx^2`, pre-multiplied by
/// the fold weights so the matrix is exactly symmetric. Row sums vanish,
/// keeping constants in the kernel.
fn folded_laplacian(grid: &Grid) -> (SymBanded, Vec<f64>) {
    let n = grid.len();
    let h = grid.spacing();
    let (a, b, d) = (1.0 / (12.0 * h * h), -4.0 / (3.0 * h * h), 5.0 / (2.0 * h * h));
    let mut fold = vec![1.0; n];
    fold[0] = 0.5;
    fold[n - 1] = 0.5;
    let mut m = SymBanded::zeros(n, 2);
    for i in 0..n {
        m.add(i, i, d * fold[i]);
    }
    // boundary rows after even reflection (upper triangle):
    //   row 0:  [d | 2b 2a] * 1/2     row 1:  [b | d+a  b  a]
    m.add(0, 1, b);
    m.add(0, 2, a);
    m.add(1, 1, a);
    m.add(1, 2, b);
    m.add(1, 3, a);
    for i in 2..n - 2 {
        m.add(i, i + 1, b);
        m.add(i, i + 2, a);
    }
    m.add(n - 2, n - 2, a);
    m.add(n - 2, n - 1, b);
    (m, fold)
}

/// Folded fourth-order `-d^2/dx^2` with its fold weights; shared with
/// the time steppers.
pub fn folded_laplacian_banded(grid: &Grid) -> (SymBanded, Vec<f64>) {
    folded_laplacian(grid)
}

fn sech2(x: f64) -> f64 {
    let s = 1.0 / x.cosh();
    s * s
}

/// Smallest admissible weight entry; pinned profiles round to `|p| = 1`
/// at the outermost nodes in double precision, where the true weight is
/// about `sech^2(20) = 1.7e-17`.
pub const WEIGHT_FLOOR: f64 = 1e-18;

/// Assemble a weighted pencil on the grid.
///
/// Without `profile` the coefficients use the black soliton `tanh` and
/// the weight is `sech^2` evaluated directly (never through `1 - tanh^2`,
/// which underflows at the ends). A `potential` term `eps V` requires the
/// associated stationary `profile`.
pub fn assemble(
    kind: OperatorKind,
    grid: &Grid,
    potential: Option<(f64, &RealField)>,
    profile: Option<&RealField>,
) -> Result<WeightedPencil> {
    if potential.is_some() && profile.is_none() {
        return Err(Error::InvalidArgument(
            "potential term requires the associated profile".into(),
        ));
    }
    let n = grid.len();
    let (mut m, fold) = folded_laplacian(grid);
    let mut wraw = vec![0.0; n];
    match profile {
        None => {
            for (wi, &x) in wraw.iter_mut().zip(grid.nodes()) {
                *wi = sech2(x);
            }
        }
        Some(p) => {
            if p.grid() != grid {
                return Err(Error::GridMismatch);
            }
            // a profile tending to unit modulus rounds to exactly 1 in the
            // far tail; only saturation in the core or a true excursion is
            // inadmissible, the tail weight is floored instead
            let core = grid.half_width() / 2.0;
            for (i, (wi, &pi)) in wraw.iter_mut().zip(p.values()).enumerate() {
                let w = 1.0 - pi * pi;
                let x = grid.node(i);
                if pi.abs() > 1.0 + 1e-12 || (w <= 0.0 && x.abs() <= core) {
                    return Err(Error::NotAdmissible(format!(
                        "profile modulus reaches 1 at node {i} (x = {x:.2})"
                    )));
                }
                *wi = w.max(WEIGHT_FLOOR);
            }
        }
    }
    let mut q = vec![0.0; n];
    match kind {
        OperatorKind::LPlus => {
            for (qi, &wi) in q.iter_mut().zip(&wraw) {
                *qi = 4.0 - 6.0 * wi;
            }
        }
        OperatorKind::LMinus => {
            for (qi, &wi) in q.iter_mut().zip(&wraw) {
                *qi = -2.0 * wi;
            }
        }
        OperatorKind::MPlus => {
            for qi in q.iter_mut() {
                *qi = 4.0;
            }
        }
        OperatorKind::MMinus => {
            for (qi, &x) in q.iter_mut().zip(grid.nodes()) {
                *qi = sech2(x);
            }
        }
    }
    if let Some((eps, v)) = potential {
        if v.grid() != grid {
            return Err(Error::GridMismatch);
        }
        for (qi, &vi) in q.iter_mut().zip(v.values()) {
            *qi += eps * vi;
        }
    }
    for i in 0..n {
        m.add(i, i, fold[i] * q[i]);
    }
    let bc = match kind {
        OperatorKind::LPlus | OperatorKind::MPlus => BoundaryTag::Robin2,
        OperatorKind::LMinus | OperatorKind::MMinus => BoundaryTag::Neumann,
    };
    if bc == BoundaryTag::Robin2 {
        let pen = 2.0 / grid.spacing();
        m.add(0, 0, pen);
        m.add(n - 1, n - 1, pen);
    }
    let weight: Vec<f64> = wraw.iter().zip(&fold).map(|(&w, &f)| w * f).collect();
    Ok(WeightedPencil { grid: grid.clone(), stiffness: m, weight, fold, bc })
}

/// Apply the inverse of the bounded-far-field smoother: solve
/// `-u'' + sech^2 u = sech^2 f` with the Neumann fold.
pub fn apply_kminus(f: &RealField, grid: &Grid) -> Result<RealField> {
    let pencil = assemble(OperatorKind::MMinus, grid, None, None)?;
    let chol = cholesky_banded(pencil.stiffness())?;
    let rhs = pencil.apply_w(f.values());
    RealField::from_values(grid, chol.solve(&rhs))
}

/// Apply the inverse of the decaying-far-field smoother: solve
/// `-u'' + 4 u = sech^2 f` with the robin2 closure.
pub fn apply_kplus(f: &RealField, grid: &Grid) -> Result<RealField> {
    let pencil = assemble(OperatorKind::MPlus, grid, None, None)?;
    let chol = cholesky_banded(pencil.stiffness())?;
    let rhs = pencil.apply_w(f.values());
    RealField::from_values(grid, chol.solve(&rhs))
}

/// Reusable smoother factorizations for hot loops.
pub struct Smoothers {
    grid: Grid,
    mminus: WeightedPencil,
    chol_minus: CholBanded,
    mplus: WeightedPencil,
    chol_plus: CholBanded,
}

impl Smoothers {
    pub fn new(grid: &Grid) -> Result<Self> {
        let mminus = assemble(OperatorKind::MMinus, grid, None, None)?;
        let chol_minus = cholesky_banded(mminus.stiffness())?;
        let mplus = assemble(OperatorKind::MPlus, grid, None, None)?;
        let chol_plus = cholesky_banded(mplus.stiffness())?;
        Ok(Smoothers { grid: grid.clone(), mminus, chol_minus, mplus, chol_plus })
    }

    pub fn kminus(&self, f: &[f64]) -> Vec<f64> {
        self.chol_minus.solve(&self.mminus.apply_w(f))
    }

    pub fn kplus(&self, f: &[f64]) -> Vec<f64> {
        self.chol_plus.solve(&self.mplus.apply_w(f))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

/// The two 2x2 pairing matrices whose invertibility pins the Jordan
/// structure of the zero eigenvalue, with their determinants.
#[derive(Debug, Clone)]
pub struct NondegeneracyMatrices {
    pub a_plus: [[f64; 2]; 2],
    pub a_minus: [[f64; 2]; 2],
    pub det_plus: f64,
    pub det_minus: f64,
}

/// Evaluate the pairing matrices built from smoother images of the
/// kernel and generalized-kernel fields.
pub fn nondegeneracy_matrices(grid: &Grid) -> Result<NondegeneracyMatrices> {
    let phi = sample_closed_form(ClosedForm::Phi, grid);
    let phip = sample_closed_form(ClosedForm::PhiPrime, grid);
    let vphi = sample_closed_form(ClosedForm::VPhi, grid);
    let uphi = sample_closed_form(ClosedForm::UPhi, grid);
    let sm = Smoothers::new(grid)?;
    let kp_phi = RealField::from_values(grid, sm.kplus(phi.values()))?;
    let kp_vphi = RealField::from_values(grid, sm.kplus(vphi.values()))?;
    let km_phip = RealField::from_values(grid, sm.kminus(phip.values()))?;
    let km_uphi = RealField::from_values(grid, sm.kminus(uphi.values()))?;
    let a_plus = [
        [weighted_inner_real(&phip, &kp_phi)?, weighted_inner_real(&phip, &kp_vphi)?],
        [weighted_inner_real(&uphi, &kp_phi)?, weighted_inner_real(&uphi, &kp_vphi)?],
    ];
    let a_minus = [
        [weighted_inner_real(&phi, &km_phip)?, weighted_inner_real(&phi, &km_uphi)?],
        [weighted_inner_real(&vphi, &km_phip)?, weighted_inner_real(&vphi, &km_uphi)?],
    ];
    let det_plus = a_plus[0][0] * a_plus[1][1] - a_plus[0][1] * a_plus[1][0];
    let det_minus = a_minus[0][0] * a_minus[1][1] - a_minus[0][1] * a_minus[1][0];
    Ok(NondegeneracyMatrices { a_plus, a_minus, det_plus, det_minus })
}

/// How a deflated pencil mode participates in a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeHandling {
    /// Constraint: component removed from domain and range, residual
    /// carries a Lagrange multiplier.
    Exclude,
    /// Analytic: component recovered by dividing by its eigenvalue.
    Divide,
}

/// Solve `A x = b` on the complement of a set of pencil modes.
///
/// The remainder runs as a projected preconditioned CG with an SPD base
/// matrix; search directions are re-projected every iteration and the
/// best iterate is returned if round-off drives the recursion off the
/// constraint plane.
pub struct DeflatedSolver {
    a: SymBanded,
    chol: CholBanded,
    h: f64,
    /// excluded modes (W-normalized) and their weight images
    cons_g: Vec<Vec<f64>>,
    /// all constraint columns W g (excluded + divided)
    cols_wg: Vec<Vec<f64>>,
    /// euclidean-orthonormal basis of span(W g)
    cols_orth: Vec<Vec<f64>>,
    bic: Vec<Vec<f64>>,
    sinv: Vec<Vec<f64>>,
    divide: Vec<(f64, Vec<f64>, Vec<f64>)>,
    pub tol: f64,
    pub itmax: usize,
}

impl DeflatedSolver {
    /// `base` must be SPD; `modes` are pencil eigenpairs `(nu, g)` of
    /// `(A, W)` with `g` W-normalized.
    pub fn new(
        pencil: &WeightedPencil,
        base: &SymBanded,
        modes: Vec<(f64, Vec<f64>, ModeHandling)>,
    ) -> Result<Self> {
        let chol = cholesky_banded(base)?;
        let h = pencil.grid().spacing();
        let mut cons_g = Vec::new();
        let mut cons_wg = Vec::new();
        let mut divide = Vec::new();
        for (nu, g, handling) in modes {
            let wg: Vec<f64> = g.iter().zip(pencil.weight()).map(|(&gi, &wi)| gi * wi).collect();
            match handling {
                ModeHandling::Exclude => {
                    cons_g.push(g);
                    cons_wg.push(wg);
                }
                ModeHandling::Divide => divide.push((nu, g, wg)),
            }
        }
        let mut cols_wg: Vec<Vec<f64>> = cons_wg;
        for (_, _, wg) in &divide {
            cols_wg.push(wg.clone());
        }
        let cols_orth = gram_schmidt(&cols_wg);
        let bic: Vec<Vec<f64>> = cols_wg.iter().map(|c| chol.solve(c)).collect();
        let k = cols_wg.len();
        let mut gram = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                gram[i][j] = cols_wg[i].iter().zip(&bic[j]).map(|(&a, &b)| a * b).sum();
            }
        }
        let sinv = if k > 0 { invert_small(&gram)? } else { Vec::new() };
        Ok(DeflatedSolver {
            a: pencil.stiffness().clone(),
            chol,
            h,
            cons_g,
            cols_wg,
            cols_orth,
            bic,
            sinv,
            divide,
            tol: 5e-13,
            itmax: 600,
        })
    }

    /// W-orthogonal projection onto the mode complement (domain side).
    pub fn project_domain(&self, v: &mut [f64]) {
        for (g, wg) in
            self.cons_g.iter().zip(&self.cols_wg).chain(self.divide.iter().map(|(_, g, wg)| (g, wg)))
        {
            let c: f64 =
                wg.iter().zip(v.iter()).map(|(&a, &b)| a * b).sum::<f64>() * self.h;
            for (vi, &gi) in v.iter_mut().zip(g) {
                *vi -= c * gi;
            }
        }
    }

    /// Remove euclidean components along span(W g); residuals of
    /// constrained eigenpairs live there.
    pub fn project_range(&self, r: &mut [f64]) {
        for q in &self.cols_orth {
            let c: f64 = q.iter().zip(r.iter()).map(|(&a, &b)| a * b).sum();
            for (ri, &qi) in r.iter_mut().zip(q) {
                *ri -= c * qi;
            }
        }
    }

    fn preconditioned_project(&self, r: &[f64]) -> Vec<f64> {
        let mut t = self.chol.solve(r);
        let k = self.cols_wg.len();
        if k > 0 {
            let mut ct = vec![0.0; k];
            for (i, c) in self.cols_wg.iter().enumerate() {
                ct[i] = c.iter().zip(&t).map(|(&a, &b)| a * b).sum();
            }
            let mut mu = vec![0.0; k];
            for i in 0..k {
                for j in 0..k {
                    mu[i] += self.sinv[i][j] * ct[j];
                }
            }
            for (i, b) in self.bic.iter().enumerate() {
                for (ti, &bi) in t.iter_mut().zip(b) {
                    *ti -= mu[i] * bi;
                }
            }
        }
        // round-off cleanup: keep the direction exactly on the
        // constraint plane
        self.project_range(&mut t);
        t
    }

    /// Solve `A x = b` modulo the handled modes; `b` need not be
    /// pre-projected.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_stats(b).0
    }

    /// Solve and report (iterations, final relative projected residual).
    pub fn solve_stats(&self, b: &[f64]) -> (Vec<f64>, usize, f64) {
        let n = b.len();
        let mut xdiv = vec![0.0; n];
        let mut bred = b.to_vec();
        for (nu, g, wg) in &self.divide {
            // gamma = h g^T b is the mode coordinate of b in the W-basis
            let gamma: f64 =
                g.iter().zip(bred.iter()).map(|(&a, &b)| a * b).sum::<f64>() * self.h;
            for (bi, &wgi) in bred.iter_mut().zip(wg) {
                *bi -= gamma * wgi;
            }
            for (xi, &gi) in xdiv.iter_mut().zip(g) {
                *xi += gamma / nu * gi;
            }
        }
        let mut x = vec![0.0; n];
        let mut r: Vec<f64> = bred.iter().map(|&v| -v).collect(); // r = A x - b
        let mut g = self.preconditioned_project(&r);
        let mut p: Vec<f64> = g.iter().map(|&v| -v).collect();
        let mut rg: f64 = r.iter().zip(&g).map(|(&a, &b)| a * b).sum();
        let rg0 = rg.abs().max(f64::MIN_POSITIVE);
        let mut best = x.clone();
        let mut best_rg = rg;
        let mut best_it = 0usize;
        let mut iters_used = 0;
        for it in 0..self.itmax {
            iters_used = it;
            if !(rg > 0.0) {
                break;
            }
            let ap = self.a.matvec(&p);
            let pap: f64 = p.iter().zip(&ap).map(|(&a, &b)| a * b).sum();
            if !(pap > 0.0) {
                break;
            }
            let alpha = rg / pap;
            for ((xi, &pi), (ri, &api)) in x.iter_mut().zip(&p).zip(r.iter_mut().zip(&ap)) {
                *xi += alpha * pi;
                *ri += alpha * api;
            }
            g = self.preconditioned_project(&r);
            let rg2: f64 = r.iter().zip(&g).map(|(&a, &b)| a * b).sum();
            if rg2 > 0.0 && rg2 < best_rg {
                best = x.clone();
                best_rg = rg2;
                best_it = it;
            }
            if rg2 <= self.tol * self.tol * rg0 {
                break;
            }
            // stop on a long stretch without progress or a true runaway
            if it > best_it + 60 || rg2 > 1e8 * best_rg.max(f64::MIN_POSITIVE) {
                break;
            }
            let beta = rg2 / rg;
            for (pi, &gi) in p.iter_mut().zip(&g) {
                *pi = -gi + beta * *pi;
            }
            self.project_range(&mut p);
            rg = rg2;
        }
        let mut out = best;
        let _ = x;
        self.project_domain(&mut out);
        for (oi, &di) in out.iter_mut().zip(&xdiv) {
            *oi += di;
        }
        (out, iters_used, (best_rg.min(rg).max(0.0) / rg0).sqrt())
    }
}

fn gram_schmidt(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for c in cols {
        let mut v = c.clone();
        for q in &out {
            let dot: f64 = q.iter().zip(&v).map(|(&a, &b)| a * b).sum();
            for (vi, &qi) in v.iter_mut().zip(q) {
                *vi -= dot * qi;
            }
        }
        let n: f64 = v.iter().map(|&x| x * x).sum::<f64>().sqrt();
        if n > 1e-300 {
            for vi in v.iter_mut() {
                *vi /= n;
            }
            out.push(v);
        }
    }
    out
}

fn invert_small(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv = vec![vec![0.0; k]; k];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for c in 0..k {
        let mut p = c;
        for r in c + 1..k {
            if a[r][c].abs() > a[p][c].abs() {
                p = r;
            }
        }
        if a[p][c].abs() < 1e-300 {
            return Err(Error::SingularFactor { index: c });
        }
        a.swap(c, p);
        inv.swap(c, p);
        let piv = a[c][c];
        for j in 0..k {
            a[c][j] /= piv;
            inv[c][j] /= piv;
        }
        for r in 0..k {
            if r != c {
                let f = a[r][c];
                for j in 0..k {
                    a[r][j] -= f * a[c][j];
                    inv[r][j] -= f * inv[c][j];
                }
            }
        }
    }
    Ok(inv)
}
