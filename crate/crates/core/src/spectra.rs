//! Weighted eigensolvers: shift-invert Lanczos for the banded pencils,
//! the constrained eigensolve behind the linear-stability problem, the
//! Jordan chain of the quadruple zero, and the Rayleigh quotient of the
//! reduced problem.
//!
//! Shift-invert keeps every factorization banded: `B = A - sigma W` is
//! positive definite for `sigma` below the spectrum bottom, and Lanczos
//! runs on `B^{-1} W` in the W-inner product. Constraints are imposed by
//! W-orthogonal projection of the start vector and of every new Krylov
//! vector; the constrained solve itself is exact, a Cholesky application
//! followed by a rank-k multiplier correction.

use crate::grid::{weighted_inner_real, Grid, RealField};
use crate::kernels::{sample_closed_form, ClosedForm};
use crate::linalg::{cholesky_banded, tridiag_eigen, SymBanded};
use crate::operators::{assemble, DeflatedSolver, ModeHandling, OperatorKind, WeightedPencil};
use crate::{Error, Result};

/// Default shift for the bounded-far-field pencil (spectrum starts at -2).
pub const SIGMA_LMINUS: f64 = -5.0;
/// Default shift for the decaying-far-field pencil (spectrum starts at 0).
pub const SIGMA_LPLUS: f64 = -1.0;
/// Kernel-counting tolerance at the default grid.
pub const ZERO_TOL: f64 = 1e-6;

/// Converged part of a weighted eigensolve.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// ascending eigenvalues
    pub eigenvalues: Vec<f64>,
    /// W-normalized eigenvectors, same order
    pub eigenvectors: Vec<Vec<f64>>,
    /// relative pencil residuals `||A f - lambda W f|| / ||W f||`
    pub residuals: Vec<f64>,
    /// number of eigenvalues with `|lambda| < zero_tol`
    pub near_zero: usize,
    pub zero_tol: f64,
}

/// deterministic pseudo-random start vector
fn start_vector(n: usize, salt: u64) -> Vec<f64> {
    let mut state = 0x853c49e6748fea9bu64 ^ salt.wrapping_mul(0x9e3779b97f4a7c15);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        out.push(((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5);
    }
    out
}

/// Exact constrained solve of an SPD matrix: `B x = b + C mu`, `C^T x = 0`,
/// realized as a Cholesky application plus a rank-k correction.
struct ConstrainedSpd {
    chol: crate::linalg::CholBanded,
    cols: Vec<Vec<f64>>,
    bic: Vec<Vec<f64>>,
    sinv: Vec<Vec<f64>>,
}

impl ConstrainedSpd {
    fn new(b: &SymBanded, cols: Vec<Vec<f64>>) -> Result<Self> {
        let chol = cholesky_banded(b)?;
        let bic: Vec<Vec<f64>> = cols.iter().map(|c| chol.solve(c)).collect();
        let k = cols.len();
        let mut gram = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                gram[i][j] = cols[i].iter().zip(&bic[j]).map(|(&a, &b)| a * b).sum();
            }
        }
        let sinv = if k > 0 { invert_small(&gram)? } else { Vec::new() };
        Ok(ConstrainedSpd { chol, cols, bic, sinv })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut t = self.chol.solve(b);
        let k = self.cols.len();
        if k == 0 {
            return t;
        }
        let mut ct = vec![0.0; k];
        for (i, c) in self.cols.iter().enumerate() {
            ct[i] = c.iter().zip(&t).map(|(&a, &b)| a * b).sum();
        }
        let mut mu = vec![0.0; k];
        for i in 0..k {
            for j in 0..k {
                mu[i] += self.sinv[i][j] * ct[j];
            }
        }
        for (i, bc) in self.bic.iter().enumerate() {
            for (ti, &bi) in t.iter_mut().zip(bc) {
                *ti -= mu[i] * bi;
            }
        }
        t
    }
}

fn invert_small(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = m.len();
    let mut a = m.to_vec();
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

/// Smallest `k` eigenvalues of a general symmetric-definite pencil
/// `A f = lambda N f` with banded `N`, restricted to
/// `{v : c^T v = 0}` for the supplied constraint columns. The shifted
/// matrix `A - sigma N` must be positive definite; the constrained solve
/// is exact (Cholesky plus multiplier correction), so the Lanczos
/// recursion in the N-inner product sees a genuinely self-adjoint
/// operator on the constraint plane.
pub(crate) fn shift_invert_general(
    a: &SymBanded,
    n_mat: &SymBanded,
    constraint_cols: &[Vec<f64>],
    sigma: f64,
    k: usize,
    steps: usize,
) -> Result<Vec<f64>> {
    let n = a.n();
    let mut b = a.clone();
    // b = a - sigma n
    for i in 0..n {
        for j in i..(i + n_mat.bandwidth() + 1).min(n) {
            let v = n_mat.get(i, j);
            if v != 0.0 {
                b.add(i, j, -sigma * v);
            }
        }
    }
    let solver = ConstrainedSpd::new(&b, constraint_cols.to_vec())?;
    // euclidean projector onto ker(C^T) for the start vector
    let mut orth: Vec<Vec<f64>> = Vec::new();
    for c in constraint_cols {
        let mut v = c.clone();
        for q in &orth {
            let d: f64 = q.iter().zip(&v).map(|(&x, &y)| x * y).sum();
            for (vi, &qi) in v.iter_mut().zip(q) {
                *vi -= d * qi;
            }
        }
        let nn: f64 = v.iter().map(|&x| x * x).sum::<f64>().sqrt();
        if nn > 1e-300 {
            v.iter_mut().for_each(|x| *x /= nn);
            orth.push(v);
        }
    }
    let mut start = start_vector(n, 31);
    for q in &orth {
        let d: f64 = q.iter().zip(&start).map(|(&x, &y)| x * y).sum();
        for (si, &qi) in start.iter_mut().zip(q) {
            *si -= d * qi;
        }
    }
    let op = |v: &[f64]| solver.solve(&n_mat.matvec(v));
    let inner = |u: &[f64], v: &[f64]| n_mat.quadratic_form(u, v);
    let ritz = crate::linalg::lanczos_custom_inner(op, inner, &start, k, steps, true)?;
    let mut lams: Vec<f64> = ritz
        .values
        .iter()
        .filter(|&&t| t > 0.0)
        .map(|&t| sigma + 1.0 / t)
        .collect();
    lams.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if lams.is_empty() {
        return Err(Error::NonConvergence("no converged constrained eigenvalues".into()));
    }
    Ok(lams)
}

/// Smallest `k` eigenvalues of the pencil, optionally restricted to the
/// W-orthogonal complement of `constraints` (raw mode vectors).
pub fn eig_weighted_constrained(
    pencil: &WeightedPencil,
    k: usize,
    sigma: f64,
    constraints: &[Vec<f64>],
    zero_tol: f64,
) -> Result<SpectrumResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("eigenvalue count must be positive".into()));
    }
    let n = pencil.grid().len();
    // W-orthonormalize constraint directions
    let mut qs: Vec<Vec<f64>> = Vec::new();
    for c in constraints {
        let mut v = c.clone();
        for q in &qs {
            let d = pencil.winner(q, &v);
            for (vi, &qi) in v.iter_mut().zip(q) {
                *vi -= d * qi;
            }
        }
        let nn = pencil.winner(&v, &v).sqrt();
        if nn > 1e-14 {
            for vi in v.iter_mut() {
                *vi /= nn;
            }
            qs.push(v);
        }
    }
    let project = |v: &mut Vec<f64>| {
        for q in &qs {
            let d = pencil.winner(q, v);
            for (vi, &qi) in v.iter_mut().zip(q) {
                *vi -= d * qi;
            }
        }
    };
    let b = pencil.stiffness().add_scaled_diag(-sigma, pencil.weight());
    let cols: Vec<Vec<f64>> = qs.iter().map(|q| pencil.apply_w(q)).collect();
    let solver = ConstrainedSpd::new(&b, cols.clone())?;
    let mult_cols = cols;

    let mut steps = (3 * k + 30).min(n);
    for attempt in 0..3 {
        // Lanczos on B^{-1} W in the W-inner product
        let mut start = start_vector(n, 11 + attempt as u64);
        project(&mut start);
        let op = |v: &[f64]| {
            let wv = pencil.apply_w(v);
            let mut out = solver.solve(&wv);
            project(&mut out);
            out
        };
        let ritz = match crate::linalg::lanczos_custom_inner(
            op,
            |u, v| pencil.winner(u, v),
            &start,
            k,
            steps,
            true,
        ) {
            Ok(r) => r,
            Err(Error::Breakdown { .. }) if attempt < 2 => continue,
            Err(e) => return Err(e),
        };
        // theta largest -> lambda = sigma + 1/theta smallest
        let mut pairs: Vec<(f64, Vec<f64>)> = ritz
            .values
            .iter()
            .zip(ritz.vectors)
            .filter(|(&t, _)| t > 0.0)
            .map(|(&t, v)| (sigma + 1.0 / t, v))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pairs.truncate(k);
        if pairs.len() < k {
            steps = (steps * 2).min(n);
            continue;
        }
        let mut eigenvalues = Vec::with_capacity(k);
        let mut eigenvectors = Vec::with_capacity(k);
        let mut residuals = Vec::with_capacity(k);
        for (lam, mut v) in pairs {
            pencil.wnormalize(&mut v);
            let r = pencil.residual(lam, &v, &mult_cols);
            eigenvalues.push(lam);
            eigenvectors.push(v);
            residuals.push(r);
        }
        if residuals.iter().any(|&r| r > 1e-8) && attempt < 2 {
            steps = (steps * 2).min(n);
            continue;
        }
        let near_zero = eigenvalues.iter().filter(|&&l| l.abs() < zero_tol).count();
        return Ok(SpectrumResult { eigenvalues, eigenvectors, residuals, near_zero, zero_tol });
    }
    Err(Error::NonConvergence("weighted eigensolve did not converge".into()))
}

/// Smallest `k` eigenvalues of `A f = lambda W f` by shift-invert Lanczos.
///
/// `sigma` must sit strictly below the bottom of the spectrum so that
/// `A - sigma W` admits a banded Cholesky factor.
pub fn eig_weighted(pencil: &WeightedPencil, k: usize, sigma: f64) -> Result<SpectrumResult> {
    eig_weighted_constrained(pencil, k, sigma, &[], ZERO_TOL)
}

/// Jordan chain of the quadruple zero: the two generalized-kernel solves
/// and the pairings that obstruct level three.
#[derive(Debug, Clone)]
pub struct JordanChain {
    /// solution of the weighted `L_- v = phi'`
    pub v_phi: RealField,
    /// solution of the weighted `L_+ u = -phi`
    pub u_phi: RealField,
    /// `(v_phi, phi')_H`, the first level-three obstruction (-2/5)
    pub pairing_v: f64,
    /// `(u_phi, phi)_H`, the second obstruction (-1/12)
    pub pairing_u: f64,
    /// sup distance of the solves from the closed forms
    pub v_sup_err: f64,
    pub u_sup_err: f64,
}

/// Solve the two generalized-eigenvector equations by deflated banded
/// solves and evaluate the obstruction pairings.
pub fn jordan_chain(grid: &Grid) -> Result<JordanChain> {
    let lm = assemble(OperatorKind::LMinus, grid, None, None)?;
    let lp = assemble(OperatorKind::LPlus, grid, None, None)?;
    // computed low modes for the deflations
    let sm = eig_weighted(&lm, 2, SIGMA_LMINUS)?;
    let sp = eig_weighted(&lp, 1, SIGMA_LPLUS)?;
    let base_m =
        lm.stiffness().add_scaled_diag(5.0, lm.weight()).add_scaled_diag(0.1, lm.fold());
    let solver_m = DeflatedSolver::new(
        &lm,
        &base_m,
        vec![
            (sm.eigenvalues[0], sm.eigenvectors[0].clone(), ModeHandling::Divide),
            (sm.eigenvalues[1], sm.eigenvectors[1].clone(), ModeHandling::Exclude),
        ],
    )?;
    let base_p = lp.stiffness().add_scaled_diag(6.0, lp.weight());
    let solver_p = DeflatedSolver::new(
        &lp,
        &base_p,
        vec![(sp.eigenvalues[0], sp.eigenvectors[0].clone(), ModeHandling::Exclude)],
    )?;
    let phip = sample_closed_form(ClosedForm::PhiPrime, grid);
    let phi = sample_closed_form(ClosedForm::Phi, grid);
    let v_sol = solver_m.solve(&lm.apply_w(phip.values()));
    let neg_wphi: Vec<f64> =
        lp.apply_w(phi.values()).iter().map(|&x| -x).collect();
    let u_sol = solver_p.solve(&neg_wphi);
    let v_field = RealField::from_values(grid, v_sol)?;
    let u_field = RealField::from_values(grid, u_sol)?;
    let pairing_v = weighted_inner_real(&v_field, &phip)?;
    let pairing_u = weighted_inner_real(&u_field, &phi)?;
    let vref = sample_closed_form(ClosedForm::VPhi, grid);
    let uref = sample_closed_form(ClosedForm::UPhi, grid);
    let v_sup_err = v_field.zip_map(&vref, |a, b| a - b).norm_inf();
    let u_sup_err = u_field.zip_map(&uref, |a, b| a - b).norm_inf();
    Ok(JordanChain {
        v_phi: v_field,
        u_phi: u_field,
        pairing_v,
        pairing_u,
        v_sup_err,
        u_sup_err,
    })
}

/// Result of the linear-stability eigensolve.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// `mu = -lambda^2` values, ascending (constrained mode)
    pub mus: Vec<f64>,
    /// reconstructed frequencies `omega = sqrt(mu)` for positive `mu`
    pub omegas: Vec<f64>,
    /// relative residuals modulo constraint multipliers
    pub residuals: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// number of discrete kernel vectors found (unconstrained mode)
    pub kernel_count: usize,
    pub kernel_residuals: Vec<f64>,
    /// Jordan-chain data (unconstrained mode)
    pub jordan: Option<JordanChain>,
}

/// The machinery of the reduced stability problem: the deflated inverse
/// of the decaying-family operator and the constrained solve of the
/// bounded-family operator.
pub struct StabilityOperator {
    pub lm: WeightedPencil,
    pub lp: WeightedPencil,
    tplus: DeflatedSolver,
    aminus: DeflatedSolver,
    pub constraints: Vec<Vec<f64>>,
    /// multiplier columns W q for residual measurement
    pub mult_cols: Vec<Vec<f64>>,
    /// weighted correction direction used by the reduced solve
    pub kernel_plus: Vec<f64>,
}

impl StabilityOperator {
    pub fn new(grid: &Grid) -> Result<Self> {
        let lm = assemble(OperatorKind::LMinus, grid, None, None)?;
        let lp = assemble(OperatorKind::LPlus, grid, None, None)?;
        let sp = eig_weighted(&lp, 1, SIGMA_LPLUS)?;
        let k0 = sp.eigenvectors[0].clone();
        // constraints: the translational direction and the generalized
        // kernel vector, W-orthonormalized
        let mut uphi: Vec<f64> = sample_closed_form(ClosedForm::UPhi, grid).values().to_vec();
        let d = lm.winner(&k0, &uphi);
        for (ui, &ki) in uphi.iter_mut().zip(&k0) {
            *ui -= d * ki;
        }
        let nn = lm.winner(&uphi, &uphi).sqrt();
        uphi.iter_mut().for_each(|v| *v /= nn);
        let constraints = vec![k0.clone(), uphi];
        let mult_cols: Vec<Vec<f64>> = constraints.iter().map(|q| lm.apply_w(q)).collect();
        let base_p = lp.stiffness().add_scaled_diag(6.0, lp.weight());
        let tplus = DeflatedSolver::new(
            &lp,
            &base_p,
            vec![(sp.eigenvalues[0], k0.clone(), ModeHandling::Exclude)],
        )?;
        let base_m = lm
            .stiffness()
            .add_scaled_diag(5.0, lm.weight())
            .add_scaled_diag(0.1, lm.fold());
        let aminus = DeflatedSolver::new(
            &lm,
            &base_m,
            constraints
                .iter()
                .map(|q| (0.0, q.clone(), ModeHandling::Exclude))
                .collect(),
        )?;
        Ok(StabilityOperator {
            lm,
            lp,
            tplus,
            aminus,
            constraints,
            mult_cols,
            kernel_plus: k0,
        })
    }

    /// Apply `W T_+^{-1} W`, the right-hand operator of the reduced
    /// pencil.
    pub fn apply_reduced_weight(&self, v: &[f64]) -> Vec<f64> {
        let wv = self.lm.apply_w(v);
        let z = self.tplus.solve(&wv);
        self.lm.apply_w(&z)
    }

    pub fn project(&self, v: &mut [f64]) {
        for q in &self.constraints {
            let d = self.lm.winner(q, v);
            for (vi, &qi) in v.iter_mut().zip(q) {
                *vi -= d * qi;
            }
        }
    }

    /// Constrained solve with the stiffness of the bounded family.
    pub fn solve_aminus(&self, b: &[f64]) -> Vec<f64> {
        self.aminus.solve(b)
    }

    pub fn aminus_solver(&self) -> &DeflatedSolver {
        &self.aminus
    }

    pub fn tplus_solver(&self) -> &DeflatedSolver {
        &self.tplus
    }

    /// Rayleigh quotient of the reduced problem at `v` (projected first).
    pub fn rayleigh(&self, v: &[f64]) -> Result<f64> {
        let mut vv = v.to_vec();
        self.project(&mut vv);
        let den = {
            let wv = self.lm.apply_w(&vv);
            let z = self.tplus.solve(&wv);
            self.lm.winner(&z, &vv)
        };
        if den.abs() < 1e-14 {
            return Err(Error::InvalidArgument("Rayleigh denominator vanished".into()));
        }
        let grid = self.lm.grid().clone();
        let vf = RealField::from_values(&grid, vv)?;
        let qm = crate::invariants::q_minus(&vf)?;
        Ok(qm / den)
    }
}

/// Solve the linear-stability eigenproblem around the black soliton.
///
/// Constrained mode restricts the reduced field to the W-orthogonal
/// complement of the translational mode and the real generalized-kernel
/// vector and returns the smallest `k` values of `mu = -lambda^2`;
/// negative values are reported, not raised. Unconstrained mode counts
/// the discrete kernel vectors of the two pencils and works out the
/// Jordan chain.
pub fn stability_spectrum(
    grid: &Grid,
    k: usize,
    constrained: bool,
    zero_tol: f64,
) -> Result<StabilityReport> {
    if constrained {
        let op = StabilityOperator::new(grid)?;
        let n = grid.len();
        let steps = (5 * k + 60).min(n);
        // Lanczos in the stiffness inner product on the constrained
        // subspace; the operator is solve(A_-) o (W T_+^{-1} W) with
        // eigenvalues 1/mu, so the smallest mu converge first.
        let mut v = start_vector(n, 23);
        op.project(&mut v);
        let av = op.lm.apply_a(&v);
        let nrm = v.iter().zip(&av).map(|(&a, &b)| a * b).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= nrm);
        let av: Vec<f64> = av.iter().map(|&x| x / nrm).collect();
        let mut basis = vec![v];
        let mut abasis = vec![av];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        for j in 0..steps {
            let y = op.apply_reduced_weight(&basis[j]);
            let mut w = op.solve_aminus(&y);
            let a = w.iter().zip(&abasis[j]).map(|(&p, &q)| p * q).sum::<f64>();
            alphas.push(a);
            for (wi, &vi) in w.iter_mut().zip(&basis[j]) {
                *wi -= a * vi;
            }
            if j > 0 {
                let b = betas[j - 1];
                for (wi, &ui) in w.iter_mut().zip(&basis[j - 1]) {
                    *wi -= b * ui;
                }
            }
            // full reorthogonalization in the stiffness inner product
            for (u, au) in basis.iter().zip(&abasis) {
                let c = w.iter().zip(au).map(|(&p, &q)| p * q).sum::<f64>();
                for (wi, &ui) in w.iter_mut().zip(u) {
                    *wi -= c * ui;
                }
            }
            op.project(&mut w);
            let aw = op.lm.apply_a(&w);
            let b2 = w.iter().zip(&aw).map(|(&p, &q)| p * q).sum::<f64>();
            if !(b2 > 1e-28) {
                break;
            }
            let b = b2.sqrt();
            betas.push(b);
            let inv = 1.0 / b;
            basis.push(w.iter().map(|&x| x * inv).collect());
            abasis.push(aw.iter().map(|&x| x * inv).collect());
        }
        let m = alphas.len();
        let (theta, s) = tridiag_eigen(&alphas, &betas[..m.saturating_sub(1)])?;
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| theta[b].abs().partial_cmp(&theta[a].abs()).unwrap());
        let mut entries: Vec<(f64, Vec<f64>, f64)> = Vec::new();
        for &i in idx.iter().take(k) {
            if theta[i].abs() < 1e-13 {
                continue;
            }
            let mu = 1.0 / theta[i];
            let mut vec = vec![0.0; n];
            for (r, base) in basis.iter().take(m).enumerate() {
                let c = s[r][i];
                for (vi, &bi) in vec.iter_mut().zip(base) {
                    *vi += c * bi;
                }
            }
            op.lm.wnormalize(&mut vec);
            // residual of A_- v = mu (W T_+^{-1} W) v modulo multipliers
            let av = op.lm.apply_a(&vec);
            let wv = op.apply_reduced_weight(&vec);
            let mut r: Vec<f64> = av.iter().zip(&wv).map(|(&a, &w)| a - mu * w).collect();
            for q in &op.mult_cols {
                let qn: f64 = q.iter().map(|&x| x * x).sum();
                let c: f64 = q.iter().zip(&r).map(|(&a, &b)| a * b).sum::<f64>() / qn;
                for (ri, &qi) in r.iter_mut().zip(q) {
                    *ri -= c * qi;
                }
            }
            let rn = r.iter().map(|&x| x * x).sum::<f64>().sqrt();
            let dn = wv.iter().map(|&x| (mu * x) * (mu * x)).sum::<f64>().sqrt();
            entries.push((mu, vec, rn / dn.max(f64::MIN_POSITIVE)));
        }
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mus: Vec<f64> = entries.iter().map(|e| e.0).collect();
        let omegas: Vec<f64> = mus.iter().filter(|&&m| m > 0.0).map(|&m| m.sqrt()).collect();
        let residuals: Vec<f64> = entries.iter().map(|e| e.2).collect();
        let vectors: Vec<Vec<f64>> = entries.into_iter().map(|e| e.1).collect();
        Ok(StabilityReport {
            mus,
            omegas,
            residuals,
            vectors,
            kernel_count: 0,
            kernel_residuals: Vec::new(),
            jordan: None,
        })
    } else {
        let lm = assemble(OperatorKind::LMinus, grid, None, None)?;
        let lp = assemble(OperatorKind::LPlus, grid, None, None)?;
        let sm = eig_weighted_constrained(&lm, 3, SIGMA_LMINUS, &[], zero_tol)?;
        let sp = eig_weighted_constrained(&lp, 3, SIGMA_LPLUS, &[], zero_tol)?;
        let mut kernel_count = 0;
        let mut kernel_residuals = Vec::new();
        for (lam, res) in sm.eigenvalues.iter().zip(&sm.residuals) {
            if lam.abs() < zero_tol {
                kernel_count += 1;
                kernel_residuals.push(*res);
            }
        }
        for (lam, res) in sp.eigenvalues.iter().zip(&sp.residuals) {
            if lam.abs() < zero_tol {
                kernel_count += 1;
                kernel_residuals.push(*res);
            }
        }
        let jordan = jordan_chain(grid)?;
        Ok(StabilityReport {
            mus: Vec::new(),
            omegas: Vec::new(),
            residuals: Vec::new(),
            vectors: Vec::new(),
            kernel_count,
            kernel_residuals,
            jordan: Some(jordan),
        })
    }
}

/// Count strict sign changes of a vector, ignoring entries below a
/// relative threshold (decaying eigenvector tails carry round-off noise).
pub fn sign_changes(v: &[f64], rel_tol: f64) -> usize {
    let scale = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let tol = rel_tol * scale;
    let mut last = 0.0f64;
    let mut count = 0;
    for &x in v {
        if x.abs() <= tol {
            continue;
        }
        if last != 0.0 && x.signum() != last.signum() {
            count += 1;
        }
        last = x;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_grid() -> Grid {
        Grid::new(20.0, 4001).unwrap()
    }

    #[test]
    fn lminus_ladder() {
        let g = default_grid();
        let p = assemble(OperatorKind::LMinus, &g, None, None).unwrap();
        let s = eig_weighted(&p, 5, SIGMA_LMINUS).unwrap();
        let exact = [-2.0, 0.0, 4.0, 10.0, 18.0];
        for (i, (&lam, &ex)) in s.eigenvalues.iter().zip(&exact).enumerate() {
            assert!((lam - ex).abs() < 1e-3, "eig {i}: {lam} vs {ex}");
        }
        for &r in &s.residuals {
            assert!(r < 1e-8, "residual {r}");
        }
    }

    #[test]
    fn lplus_ladder() {
        let g = default_grid();
        let p = assemble(OperatorKind::LPlus, &g, None, None).unwrap();
        let s = eig_weighted(&p, 5, SIGMA_LPLUS).unwrap();
        let exact = [0.0, 6.0, 14.0, 24.0, 36.0];
        for (i, (&lam, &ex)) in s.eigenvalues.iter().zip(&exact).enumerate() {
            assert!((lam - ex).abs() < 1e-3, "eig {i}: {lam} vs {ex}");
        }
    }

    #[test]
    fn lminus_ground_state_is_constant() {
        let g = default_grid();
        let p = assemble(OperatorKind::LMinus, &g, None, None).unwrap();
        let s = eig_weighted(&p, 1, SIGMA_LMINUS).unwrap();
        let v = &s.eigenvectors[0];
        let mid = v[g.center()];
        let mut sup: f64 = 0.0;
        for &x in v {
            sup = sup.max((x / mid - 1.0).abs());
        }
        assert!(sup < 1e-4, "{sup}");
    }

    #[test]
    fn eigenvectors_w_orthogonal() {
        let g = Grid::new(20.0, 2001).unwrap();
        let p = assemble(OperatorKind::LMinus, &g, None, None).unwrap();
        let s = eig_weighted(&p, 4, SIGMA_LMINUS).unwrap();
        for i in 0..4 {
            for j in 0..i {
                let d = p.winner(&s.eigenvectors[i], &s.eigenvectors[j]).abs();
                assert!(d < 1e-8, "({i},{j}): {d}");
            }
        }
    }

    #[test]
    fn sigma_above_bottom_is_rejected() {
        let g = Grid::new(20.0, 801).unwrap();
        let p = assemble(OperatorKind::LMinus, &g, None, None).unwrap();
        // sigma = -1 sits above the bottom eigenvalue -2
        assert!(matches!(
            eig_weighted(&p, 3, -1.0),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn zero_count_rejected() {
        let g = Grid::new(20.0, 801).unwrap();
        let p = assemble(OperatorKind::LMinus, &g, None, None).unwrap();
        assert!(eig_weighted(&p, 0, SIGMA_LMINUS).is_err());
    }

    #[test]
    fn fourth_order_eigenvalue_convergence() {
        // halving h cuts the nu = 4 error by at least 8x
        let coarse = Grid::new(20.0, 2001).unwrap();
        let fine = Grid::new(20.0, 4001).unwrap();
        let ec = {
            let p = assemble(OperatorKind::LMinus, &coarse, None, None).unwrap();
            (eig_weighted(&p, 3, SIGMA_LMINUS).unwrap().eigenvalues[2] - 4.0).abs()
        };
        let ef = {
            let p = assemble(OperatorKind::LMinus, &fine, None, None).unwrap();
            (eig_weighted(&p, 3, SIGMA_LMINUS).unwrap().eigenvalues[2] - 4.0).abs()
        };
        assert!(ec / ef >= 8.0, "coarse {ec}, fine {ef}");
    }

    #[test]
    fn sturm_oscillation_ordering() {
        let g = default_grid();
        for (kind, sigma) in
            [(OperatorKind::LMinus, SIGMA_LMINUS), (OperatorKind::LPlus, SIGMA_LPLUS)]
        {
            let p = assemble(kind, &g, None, None).unwrap();
            let s = eig_weighted(&p, 5, sigma).unwrap();
            for (j, v) in s.eigenvectors.iter().enumerate() {
                let changes = sign_changes(v, 1e-7);
                assert_eq!(changes, j, "{kind:?} mode {j} has {changes} sign changes");
            }
        }
    }

    #[test]
    fn jordan_chain_matches_closed_forms() {
        let g = default_grid();
        let jc = jordan_chain(&g).unwrap();
        assert!(jc.v_sup_err < 1e-6, "v err {}", jc.v_sup_err);
        assert!(jc.u_sup_err < 1e-6, "u err {}", jc.u_sup_err);
        assert!((jc.pairing_v + 0.4).abs() < 1e-6, "{}", jc.pairing_v);
        assert!((jc.pairing_u + 1.0 / 12.0).abs() < 1e-6, "{}", jc.pairing_u);
    }

    #[test]
    fn unconstrained_stability_kernel() {
        let g = default_grid();
        let rep = stability_spectrum(&g, 6, false, ZERO_TOL).unwrap();
        assert_eq!(rep.kernel_count, 2);
        for &r in &rep.kernel_residuals {
            assert!(r < 1e-6, "{r}");
        }
    }

    #[test]
    fn constrained_stability_gap_and_pairing() {
        let g = default_grid();
        let rep = stability_spectrum(&g, 10, true, ZERO_TOL).unwrap();
        assert!(rep.mus.len() >= 10, "got {} modes", rep.mus.len());
        for &mu in rep.mus.iter().take(10) {
            assert!(mu > 0.1, "spectral gap violated: {mu}");
        }
        for &r in rep.residuals.iter().take(10) {
            assert!(r < 1e-8, "residual {r}");
        }
        // every positive mu corresponds to the pair +- i omega
        for (&mu, &om) in rep.mus.iter().zip(&rep.omegas) {
            assert!((om * om - mu).abs() < 1e-12 * mu.max(1.0));
        }
    }

    #[test]
    fn rayleigh_quotient_matches_eigenvalue() {
        let g = Grid::new(20.0, 2001).unwrap();
        let rep = stability_spectrum(&g, 3, true, ZERO_TOL).unwrap();
        let op = StabilityOperator::new(&g).unwrap();
        let q = op.rayleigh(&rep.vectors[0]).unwrap();
        assert!((q - rep.mus[0]).abs() < 1e-6 * rep.mus[0], "{q} vs {}", rep.mus[0]);
        // variational bound for a generic constrained vector
        let mut v = start_vector(g.len(), 5);
        op.project(&mut v);
        let qv = op.rayleigh(&v).unwrap();
        assert!(qv >= rep.mus[0] - 1e-6, "{qv} vs {}", rep.mus[0]);
    }
}
