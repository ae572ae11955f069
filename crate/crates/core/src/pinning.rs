//! Pinning of the kink by a small decaying potential: the effective
//! potential and its extremal points, Newton continuation of the pinned
//! profile, and the stability/instability dichotomy of the eigenvalue
//! pair bifurcating from zero.
//!
//! The predictions follow from perturbation theory at the quadruple
//! zero: the decaying-family operator acquires the small eigenvalue
//! `mu(eps) = -(3/8) eps Veff''(s)` (through `||phi'||^2 = 4/3`) and the
//! stability pair obeys `lambda^2 = eps Veff''(s) / (2 (phi', v_phi)_H)
//! = -(5/4) eps Veff''(s)`, imaginary over minima and real over maxima.

use crate::grid::{diff, interp_cubic, quad, Grid, RealField};
use crate::linalg::GenBanded;
use crate::operators::{assemble, DeflatedSolver, ModeHandling, OperatorKind};
use crate::spectra::{eig_weighted, SIGMA_LMINUS, SIGMA_LPLUS};
use crate::{Error, Result};

/// Parse `sech2 | neg_sech2 | gauss:SIGMA | shifted:NAME:X0` and sample
/// it on the grid.
pub fn named_potential(name: &str, grid: &Grid) -> Result<RealField> {
    fn eval(name: &str, x: f64) -> Result<f64> {
        if let Some(rest) = name.strip_prefix("shifted:") {
            let (inner, x0) = rest.rsplit_once(':').ok_or_else(|| {
                Error::InvalidArgument("shifted potential needs shifted:NAME:X0".into())
            })?;
            let x0: f64 = x0
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad shift in {name}")))?;
            return eval(inner, x - x0);
        }
        match name {
            "sech2" => Ok((1.0 / x.cosh()).powi(2)),
            "neg_sech2" => Ok(-(1.0 / x.cosh()).powi(2)),
            _ => {
                if let Some(s) = name.strip_prefix("gauss:") {
                    let sig: f64 = s
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad width in {name}")))?;
                    if sig <= 0.0 {
                        return Err(Error::InvalidArgument("gauss width must be positive".into()));
                    }
                    Ok((-x * x / (sig * sig)).exp())
                } else {
                    Err(Error::InvalidArgument(format!("unknown potential {name}")))
                }
            }
        }
    }
    let mut vals = Vec::with_capacity(grid.len());
    for &x in grid.nodes() {
        vals.push(eval(name, x)?);
    }
    RealField::from_values(grid, vals)
}

/// Effective potential and its first two derivatives at shift `s`:
/// the sech^2-weighted averages of `V`, `V'`, `V''`.
pub fn effective_potential(v: &RealField, s: f64) -> Result<(f64, f64, f64)> {
    let grid = v.grid().clone();
    let half = grid.half_width();
    // support of the sampled potential
    let vmax = v.norm_inf();
    let mut support = 0.0f64;
    for (i, &x) in grid.nodes().iter().enumerate() {
        if v.values()[i].abs() > 1e-12 * vmax.max(1e-300) {
            support = support.max(x.abs());
        }
    }
    if support + s.abs() > half {
        return Err(Error::InvalidArgument(format!(
            "shift {s} moves the potential support (radius {support:.2}) outside the grid"
        )));
    }
    let vp = diff(v, 1)?;
    let vpp = diff(v, 2)?;
    let weigh = |f: &RealField| -> f64 {
        let vals: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&x| {
                let sech = 1.0 / x.cosh();
                interp_cubic(f, x + s) * sech * sech
            })
            .collect();
        quad(&RealField::from_values(&grid, vals).expect("same grid"))
    };
    Ok((weigh(v), weigh(&vp), weigh(&vpp)))
}

/// A root of the effective-potential slope.
#[derive(Debug, Clone, Copy)]
pub struct PinningSite {
    pub position: f64,
    pub curvature: f64,
    /// `|Veff''| > 1e-6`
    pub simple: bool,
}

/// Scan for sign changes of the slope at step 0.1, then bisect to
/// `|Veff'| < 1e-10`.
pub fn find_pinning_sites(v: &RealField, bracket: (f64, f64)) -> Result<Vec<PinningSite>> {
    let half = v.grid().half_width();
    if bracket.0 >= bracket.1 || bracket.0 < -half / 2.0 || bracket.1 > half / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "bracket must be increasing and inside [-L/2, L/2], got {bracket:?}"
        )));
    }
    let slope = |s: f64| -> Result<f64> { Ok(effective_potential(v, s)?.1) };
    let mut sites = Vec::new();
    let mut s0 = bracket.0;
    let mut f0 = slope(s0)?;
    let step = 0.1;
    let mut s1 = s0 + step;
    while s1 <= bracket.1 + 1e-12 {
        let f1 = slope(s1)?;
        if f0 == 0.0 && f1 != 0.0 {
            sites.push(s0);
        } else if f0 * f1 < 0.0 {
            // bisection to the slope tolerance
            let (mut a, mut b, mut fa) = (s0, s1, f0);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let fm = slope(m)?;
                if fm.abs() < 1e-10 || (b - a) < 1e-14 {
                    a = m;
                    break;
                }
                if fa * fm < 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            sites.push(a);
        }
        s0 = s1;
        f0 = f1;
        s1 += step;
    }
    if sites.is_empty() {
        return Err(Error::NonConvergence("no sign change of the slope in the bracket".into()));
    }
    sites
        .into_iter()
        .map(|s| {
            let (_, _, cur) = effective_potential(v, s)?;
            Ok(PinningSite { position: s, curvature: cur, simple: cur.abs() > 1e-6 })
        })
        .collect()
}

/// Pinned kink of the perturbed model.
#[derive(Debug, Clone)]
pub struct PinnedSoliton {
    pub eps: f64,
    pub potential: RealField,
    pub site: f64,
    /// fitted translation content of the correction
    pub a_eps: f64,
    pub profile: RealField,
    /// sup norm of the stationary-equation defect
    pub residual: f64,
    /// (Veff, Veff', Veff'') at the site
    pub veff: (f64, f64, f64),
    /// discrete H2 distance from the translated kink
    pub correction_h2: f64,
}

/// Stationary-equation residual with the affine far-field closure: the
/// profile approaches `+-1` at rate 2, so ghost values mirror the decay
/// of `phi -+ 1`.
fn pinned_residual(phi: &[f64], grid: &Grid, eps: f64, v: &[f64]) -> Vec<f64> {
    let n = phi.len();
    let h = grid.spacing();
    let (a, b, d) = (1.0 / (12.0 * h * h), -4.0 / (3.0 * h * h), 5.0 / (2.0 * h * h));
    let q1 = (-4.0 * h).exp();
    let q2 = (-8.0 * h).exp();
    let ghost = |j: isize| -> f64 {
        if j < 0 {
            let k = (-j) as usize;
            let f = if k == 1 { q1 } else { q2 };
            -1.0 + (phi[k] + 1.0) * f
        } else if j as usize >= n {
            let k = 2 * (n - 1) - j as usize;
            let f = if j as usize == n { q1 } else { q2 };
            1.0 + (phi[k] - 1.0) * f
        } else {
            phi[j as usize]
        }
    };
    let mut out = vec![0.0; n];
    for (i, oi) in out.iter_mut().enumerate() {
        let ii = i as isize;
        // second derivative (negated stencil is -d^2, so subtract)
        let lap = a * ghost(ii - 2) + b * ghost(ii - 1) + d * phi[i] + b * ghost(ii + 1)
            + a * ghost(ii + 2);
        let p = phi[i];
        *oi = -lap + 2.0 * (1.0 - p * p) * p - eps * v[i] * p;
    }
    out
}

fn pinned_jacobian(phi: &[f64], grid: &Grid, eps: f64, v: &[f64]) -> GenBanded<f64> {
    let n = phi.len();
    let h = grid.spacing();
    let (a, b, d) = (1.0 / (12.0 * h * h), -4.0 / (3.0 * h * h), 5.0 / (2.0 * h * h));
    let q1 = (-4.0 * h).exp();
    let q2 = (-8.0 * h).exp();
    let mut m = GenBanded::<f64>::zeros(n, 2, 2);
    for i in 0..n {
        let add = |m: &mut GenBanded<f64>, j: isize, w: f64| {
            if j >= 0 && (j as usize) < n {
                m.add(i, j as usize, w);
            } else if j < 0 {
                let k = (-j) as usize;
                let f = if k == 1 { q1 } else { q2 };
                m.add(i, k, w * f);
            } else {
                let jj = j as usize;
                let k = 2 * (n - 1) - jj;
                let f = if jj == n { q1 } else { q2 };
                m.add(i, k, w * f);
            }
        };
        let ii = i as isize;
        add(&mut m, ii - 2, -a);
        add(&mut m, ii - 1, -b);
        add(&mut m, ii, -d);
        add(&mut m, ii + 1, -b);
        add(&mut m, ii + 2, -a);
        let p = phi[i];
        m.add(i, i, 2.0 - 6.0 * p * p - eps * v[i]);
    }
    m
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// Newton continuation of the pinned kink at a simple site.
pub fn solve_pinned(eps: f64, v: &RealField, site: f64, grid: &Grid) -> Result<PinnedSoliton> {
    if !(eps > 0.0 && eps <= 0.05) {
        return Err(Error::InvalidArgument(format!(
            "perturbation strength {eps} outside (0, 0.05]"
        )));
    }
    let veff = effective_potential(v, site)?;
    let mut phi: Vec<f64> = grid.nodes().iter().map(|&x| (x - site).tanh()).collect();
    for &e in &[eps / 4.0, eps / 2.0, eps] {
        let mut converged = false;
        for _ in 0..40 {
            let r = pinned_residual(&phi, grid, e, v.values());
            let rn = sup(&r);
            if rn < 1e-9 {
                converged = true;
                break;
            }
            let jac = pinned_jacobian(&phi, grid, e, v.values());
            let neg_r: Vec<f64> = r.iter().map(|&x| -x).collect();
            let delta = match jac.lu() {
                Ok(lu) => lu.solve(&neg_r),
                Err(_) => {
                    // bordered fallback: ridge the Jacobian and remove the
                    // near-null translation content from the step
                    let mut jr = pinned_jacobian(&phi, grid, e, v.values());
                    for i in 0..grid.len() {
                        jr.add(i, i, 1e-6);
                    }
                    let lu = jr.lu()?;
                    let mut step = lu.solve(&neg_r);
                    let phip: Vec<f64> =
                        grid.nodes().iter().map(|&x| 1.0 / (x - site).cosh().powi(2)).collect();
                    let nn: f64 = phip.iter().map(|&x| x * x).sum();
                    let c: f64 =
                        phip.iter().zip(&step).map(|(&a, &b)| a * b).sum::<f64>() / nn;
                    for (si, &pi) in step.iter_mut().zip(&phip) {
                        *si -= c * pi;
                    }
                    step
                }
            };
            // damped update
            let mut lam = 1.0;
            loop {
                let trial: Vec<f64> =
                    phi.iter().zip(&delta).map(|(&p, &dp)| p + lam * dp).collect();
                let rt = sup(&pinned_residual(&trial, grid, e, v.values()));
                if rt < rn || lam < 1.0 / 64.0 {
                    phi = trial;
                    break;
                }
                lam *= 0.5;
            }
            // the far tail rounds to +-1 in double precision; flag true
            // excursions anywhere and saturation inside the core
            for (i, &x) in grid.nodes().iter().enumerate() {
                let a = phi[i].abs();
                if a > 1.0 + 1e-12 || (a >= 1.0 && x.abs() <= grid.half_width() / 2.0) {
                    return Err(Error::NotAdmissible(
                        "pinned profile modulus reached 1 during the solve".into(),
                    ));
                }
            }
        }
        if !converged {
            let rn = sup(&pinned_residual(&phi, grid, e, v.values()));
            if rn >= 1e-8 {
                return Err(Error::NonConvergence(format!(
                    "pinned solve stalled at residual {rn:.2e} (eps step {e})"
                )));
            }
        }
    }
    let residual = sup(&pinned_residual(&phi, grid, eps, v.values()));
    let profile = RealField::from_values(grid, phi)?;
    // translation content and H2 size of the correction
    let correction = grid.sample(|x| (x - site).tanh()).zip_map(&profile, |t, p| p - t);
    let phip = grid.sample(|x| 1.0 / (x - site).cosh().powi(2));
    let num = quad(&phip.zip_map(&correction, |a, b| a * b));
    let den = quad(&phip.zip_map(&phip, |a, b| a * b));
    let a_eps = -num / den;
    let c1 = diff(&correction, 1)?;
    let c2 = diff(&correction, 2)?;
    let correction_h2 = (quad(&correction.zip_map(&correction, |a, b| a * b))
        + quad(&c1.zip_map(&c1, |a, b| a * b))
        + quad(&c2.zip_map(&c2, |a, b| a * b)))
    .sqrt();
    Ok(PinnedSoliton {
        eps,
        potential: v.clone(),
        site,
        a_eps,
        profile,
        residual,
        veff,
        correction_h2,
    })
}

/// Nature of the bifurcating eigenvalue pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairKind {
    /// `mu > 0`: pair `+- i |lambda|` on the imaginary axis
    Imaginary,
    /// `mu < 0`: real pair `+- lambda_0`
    Real,
}

/// Spectral data of the pinned kink.
#[derive(Debug, Clone)]
pub struct PinnedSpectrum {
    /// smallest eigenvalue of the decaying-family operator in plain L2
    pub mu_small: f64,
    /// perturbative prediction `-(3/8) eps Veff''(s)`
    pub mu_small_pred: f64,
    /// `mu = -lambda^2` of the bifurcating pair in the weighted problem
    pub mu_pair: f64,
    pub pair_kind: PairKind,
    /// `|lambda|` of the pair
    pub lambda_abs: f64,
    /// prediction `lambda_1^2 = -(5/4) Veff''(s)`, so
    /// `|lambda| ~ sqrt(eps |lambda_1^2|)`
    pub lambda1_sq_pred: f64,
    pub lambda_abs_pred: f64,
    /// lowest eigenvalues of the bounded-family pencil (diagnostics)
    pub lminus_low: Vec<f64>,
    /// residual of the exact kernel relation `L_-(eps) phi_eps = 0`
    pub lminus_kernel_residual: f64,
}

/// Compute the small eigenvalue of the decaying family and the
/// bifurcating stability pair.
pub fn pinned_spectrum(p: &PinnedSoliton, grid: &Grid) -> Result<PinnedSpectrum> {
    let lp = assemble(OperatorKind::LPlus, grid, Some((p.eps, &p.potential)), Some(&p.profile))?;
    let lm = assemble(OperatorKind::LMinus, grid, Some((p.eps, &p.potential)), Some(&p.profile))?;
    // small eigenvalue of L+(eps) in plain L2: same stiffness, unit weight
    let lp_l2 = lp.with_unit_weight();
    let sp_l2 = eig_weighted(&lp_l2, 1, -1.0)?;
    let mu_small = sp_l2.eigenvalues[0];
    let mu_small_pred = -(3.0 / 8.0) * p.eps * p.veff.2;
    // kernel residual of the weighted bounded-family operator
    let kernel_res = {
        let aphi = lm.apply_a(p.profile.values());
        sup(&aphi[2..grid.len() - 2])
    };
    // low end of the weighted pencils for the deflated solves
    let sm = eig_weighted(&lm, 2, SIGMA_LMINUS)?;
    let spw = eig_weighted(&lp, 2, SIGMA_LPLUS)?;
    // exact kernel direction of the bounded family: the profile itself
    let mut kernel = p.profile.values().to_vec();
    lm.wnormalize(&mut kernel);
    let base_m = lm
        .stiffness()
        .add_scaled_diag(5.0, lm.weight())
        .add_scaled_diag(0.1, lm.fold());
    let tminus = DeflatedSolver::new(
        &lm,
        &base_m,
        vec![
            (sm.eigenvalues[0], sm.eigenvectors[0].clone(), ModeHandling::Divide),
            (0.0, kernel.clone(), ModeHandling::Exclude),
        ],
    )?;
    let base_p = lp.stiffness().add_scaled_diag(6.0, lp.weight());
    let tplus = DeflatedSolver::new(
        &lp,
        &base_p,
        vec![(spw.eigenvalues[0], spw.eigenvectors[0].clone(), ModeHandling::Divide)],
    )?;
    // power iteration on solve(L-) o (W T_+^{-1} W): dominant eigenvalue
    // 1/mu_pair, sign carried by the Rayleigh quotient
    let n = grid.len();
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let x = grid.node(i);
            (1.0 / x.cosh()).powi(2) * (1.0 + 0.3 * x.tanh())
        })
        .collect();
    let projk = |v: &mut Vec<f64>| {
        let d = lm.winner(&kernel, v);
        for (vi, &ki) in v.iter_mut().zip(&kernel) {
            *vi -= d * ki;
        }
    };
    projk(&mut v);
    let mut mu_pair = 0.0;
    for it in 0..200 {
        let wv = lm.apply_w(&v);
        let z = tplus.solve(&wv);
        let what = lm.apply_w(&z);
        let mut next = tminus.solve(&what);
        projk(&mut next);
        let nn = lm.winner(&next, &next).sqrt();
        for x in next.iter_mut() {
            *x /= nn;
        }
        // Rayleigh quotient of the reduced pencil
        let av = lm.apply_a(&next);
        let num: f64 = next.iter().zip(&av).map(|(&a, &b)| a * b).sum();
        let wv2 = lm.apply_w(&next);
        let z2 = tplus.solve(&wv2);
        let den: f64 = next.iter().zip(&lm.apply_w(&z2)).map(|(&a, &b)| a * b).sum();
        let mu = num / den;
        if it > 4 && (mu - mu_pair).abs() < 1e-10 * mu.abs().max(1e-12) {
            mu_pair = mu;
            break;
        }
        mu_pair = mu;
        v = next;
    }
    let pair_kind = if mu_pair >= 0.0 { PairKind::Imaginary } else { PairKind::Real };
    let lambda_abs = mu_pair.abs().sqrt();
    let lambda1_sq_pred = -(5.0 / 4.0) * p.veff.2;
    let lambda_abs_pred = (p.eps * lambda1_sq_pred.abs()).sqrt();
    Ok(PinnedSpectrum {
        mu_small,
        mu_small_pred,
        mu_pair,
        pair_kind,
        lambda_abs,
        lambda1_sq_pred,
        lambda_abs_pred,
        lminus_low: sm.eigenvalues.clone(),
        lminus_kernel_residual: kernel_res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_grid() -> Grid {
        Grid::new(20.0, 4001).unwrap()
    }

    #[test]
    fn effective_potential_of_sech2() {
        let g = default_grid();
        let v = named_potential("sech2", &g).unwrap();
        let (val, slope, _) = effective_potential(&v, 0.0).unwrap();
        assert!((val - 4.0 / 3.0).abs() < 1e-8, "{val}");
        assert!(slope.abs() < 1e-10, "{slope}");
        let vneg = named_potential("neg_sech2", &g).unwrap();
        let (_, _, cur) = effective_potential(&vneg, 0.0).unwrap();
        assert!(cur > 0.0, "minimum of the effective potential");
        // quadrature reference 16/15
        assert!((cur - 16.0 / 15.0).abs() < 1e-6, "{cur}");
    }

    #[test]
    fn effective_potential_shift_guard() {
        let g = default_grid();
        let v = named_potential("sech2", &g).unwrap();
        assert!(effective_potential(&v, 15.0).is_err());
    }

    #[test]
    fn pinning_sites() {
        let g = default_grid();
        let v = named_potential("neg_sech2", &g).unwrap();
        let sites = find_pinning_sites(&v, (-2.0, 2.0)).unwrap();
        assert_eq!(sites.len(), 1);
        assert!(sites[0].position.abs() < 1e-8, "{}", sites[0].position);
        assert!(sites[0].curvature > 0.0);
        assert!(sites[0].simple);

        let vs = named_potential("shifted:sech2:1", &g).unwrap();
        let sites = find_pinning_sites(&vs, (-2.0, 2.0)).unwrap();
        assert_eq!(sites.len(), 1);
        assert!((sites[0].position - 1.0).abs() < 1e-8, "{}", sites[0].position);

        let zero = g.sample(|_| 0.0);
        assert!(find_pinning_sites(&zero, (-2.0, 2.0)).is_err());
    }

    #[test]
    fn pinned_solve_basics() {
        let g = default_grid();
        let v = named_potential("neg_sech2", &g).unwrap();
        let p = solve_pinned(0.01, &v, 0.0, &g).unwrap();
        assert!(p.residual < 1e-8, "{}", p.residual);
        let dev = p
            .profile
            .zip_map(&g.sample(|x| x.tanh()), |a, b| a - b)
            .norm_inf();
        assert!(dev < 0.02, "{dev}");
        assert!(p.a_eps.abs() < 1e-6, "even potential has no site shift: {}", p.a_eps);
            // strictly below 1 in the core, no excursion past 1 anywhere
        for (i, &x) in g.nodes().iter().enumerate() {
            let a = p.profile.values()[i].abs();
            assert!(a <= 1.0 + 1e-12);
            if x.abs() <= 10.0 {
                assert!(a < 1.0);
            }
        }
    }

    #[test]
    fn pinned_correction_scales_linearly() {
        let g = default_grid();
        let v = named_potential("neg_sech2", &g).unwrap();
        let mut cs = Vec::new();
        for &e in &[0.02, 0.01, 0.005] {
            let p = solve_pinned(e, &v, 0.0, &g).unwrap();
            cs.push(p.correction_h2 / e);
        }
        let cmax = cs.iter().cloned().fold(0.0f64, f64::max);
        let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(cmax / cmin < 1.5, "H2/eps ratios {cs:?}");
    }

    #[test]
    fn rejects_bad_eps() {
        let g = Grid::new(20.0, 801).unwrap();
        let v = named_potential("neg_sech2", &g).unwrap();
        assert!(solve_pinned(0.0, &v, 0.0, &g).is_err());
        assert!(solve_pinned(0.2, &v, 0.0, &g).is_err());
    }

    #[test]
    fn stable_pinning_dichotomy() {
        let g = default_grid();
        let v = named_potential("neg_sech2", &g).unwrap();
        let p = solve_pinned(0.01, &v, 0.0, &g).unwrap();
        let s = pinned_spectrum(&p, &g).unwrap();
        assert_eq!(s.pair_kind, PairKind::Imaginary);
        // |lambda| within 15% of sqrt(eps (5/4) Veff'')
        let rel = (s.lambda_abs - s.lambda_abs_pred).abs() / s.lambda_abs_pred;
        assert!(rel < 0.15, "lambda {} vs pred {}", s.lambda_abs, s.lambda_abs_pred);
        // mu_small negative, within 10% of the prediction
        assert!(s.mu_small < 0.0);
        let rel = (s.mu_small - s.mu_small_pred).abs() / s.mu_small_pred.abs();
        assert!(rel < 0.10, "mu {} vs pred {}", s.mu_small, s.mu_small_pred);
        // kernel persists and exactly one negative bounded-family eigenvalue
        assert!(s.lminus_kernel_residual < 1e-8, "{}", s.lminus_kernel_residual);
        assert!(s.lminus_low[0] < 0.0);
        assert!(s.lminus_low[1].abs() < 1e-6);
    }

    #[test]
    fn unstable_pinning_dichotomy() {
        let g = default_grid();
        let v = named_potential("sech2", &g).unwrap();
        let p = solve_pinned(0.01, &v, 0.0, &g).unwrap();
        let s = pinned_spectrum(&p, &g).unwrap();
        assert_eq!(s.pair_kind, PairKind::Real);
        assert!(s.mu_small > 0.0, "maximum: no negative decay-family eigenvalue");
    }

    #[test]
    fn sqrt_eps_scaling() {
        let g = default_grid();
        let v = named_potential("neg_sech2", &g).unwrap();
        let mut lams = Vec::new();
        let eps_list = [0.005, 0.01, 0.02];
        for &e in &eps_list {
            let p = solve_pinned(e, &v, 0.0, &g).unwrap();
            let s = pinned_spectrum(&p, &g).unwrap();
            lams.push(s.lambda_abs);
        }
        // least-squares exponent of |lambda| = K eps^p
        let n = eps_list.len() as f64;
        let sx: f64 = eps_list.iter().map(|e| e.ln()).sum();
        let sy: f64 = lams.iter().map(|l| l.ln()).sum();
        let sxx: f64 = eps_list.iter().map(|e| e.ln() * e.ln()).sum();
        let sxy: f64 = eps_list.iter().zip(&lams).map(|(e, l)| e.ln() * l.ln()).sum();
        let p = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!((p - 0.5).abs() < 0.05, "exponent {p}");
    }
}
