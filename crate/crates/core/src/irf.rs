//! Moving-average coefficients, Cholesky-identified impulse responses with
//! delta-method covariances, and the long-run mean of a (locally) stable VAR.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    build_companion, cholesky_lower, clip_eigenvalues, commutation_matrix, elimination_matrix,
    inverse, kron, lu_solve, spectral_radius, symmetric_eigen, CompanionMatrix, Mat,
};
use crate::error::{Error, Result};
use crate::stats::two_sided_z;
use crate::tvvar::{split_coefficients, v_hat, TvVarFit};

/// Number of horizons reported by default, `j = 0..=20`.
pub const DEFAULT_MAX_HORIZON: usize = 20;

/// Eigenvalue floor below which `Omega` is jittered before factorization.
const OMEGA_JITTER_THRESHOLD: f64 = 1e-10;
/// Negative eigenvalues of a sandwich covariance above this are rounding.
const PSD_CLIP: f64 = -1e-10;

/// `Psi_0 = I`, `Psi_j = J Phi^j J'` for `j = 1..=j_max`.
pub fn psi_coeffs(phi: &CompanionMatrix, j_max: usize) -> Vec<Mat> {
    let d = phi.dim();
    let m = phi.matrix();
    let n = m.rows();
    let mut out = Vec::with_capacity(j_max + 1);
    out.push(Mat::identity(d));
    let mut power = Mat::identity(n);
    for _ in 0..j_max {
        power = power.matmul(m);
        out.push(power.block(0, 0, d, d));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Identification {
    #[default]
    CholeskyLowerTriangular,
}

/// `B_j = Psi_j omega` at one point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructuralIrf {
    pub responses: Vec<Mat>,
    pub omega_chol: Mat,
    pub spectral_radius: f64,
    /// Spectral radius of the companion matrix is at least one.
    pub unstable: bool,
    /// `Omega` was jittered before the Cholesky factorization.
    pub jittered: bool,
}

/// Lower Cholesky factor with a small ridge when `Omega` is nearly singular.
pub fn omega_factor(omega: &Mat) -> Result<(Mat, bool)> {
    let omega = omega.symmetrize();
    let (eigs, _) = symmetric_eigen(&omega)?;
    if eigs[0] >= OMEGA_JITTER_THRESHOLD {
        return Ok((cholesky_lower(&omega)?, false));
    }
    let d = omega.rows();
    let ridge = 1e-10 * omega.trace() / d as f64;
    let jittered = omega.add(&Mat::identity(d).scale(ridge));
    Ok((cholesky_lower(&jittered)?, true))
}

fn lag_companion(coef: &Mat, p: usize) -> Result<CompanionMatrix> {
    if p == 0 {
        return Err(Error::InvalidParameter(
            "impulse responses need at least one lag".into(),
        ));
    }
    let expected = 1 + coef.rows() * p;
    if coef.cols() != expected {
        return Err(Error::DimensionMismatch {
            context: "coefficient matrix",
            expected: format!("{} x {expected}", coef.rows()),
            got: format!("{} x {}", coef.rows(), coef.cols()),
        });
    }
    let (_, lags) = split_coefficients(coef, p);
    build_companion(&lags)
}

/// Structural responses from `[a, A_1, ..., A_p]` and `Omega`.
pub fn structural_irf_from(coef: &Mat, omega: &Mat, p: usize, j_max: usize) -> Result<StructuralIrf> {
    let phi = lag_companion(coef, p)?;
    let (omega_chol, jittered) = omega_factor(omega)?;
    let radius = spectral_radius(phi.matrix())?;
    let responses = psi_coeffs(&phi, j_max)
        .iter()
        .map(|psi| psi.matmul(&omega_chol))
        .collect();
    Ok(StructuralIrf {
        responses,
        omega_chol,
        spectral_radius: radius,
        unstable: radius >= 1.0,
        jittered,
    })
}

pub fn structural_irf(fit: &TvVarFit, tau: f64, j_max: usize) -> Result<StructuralIrf> {
    let (coef, omega) = fit.estimate_at(tau)?;
    structural_irf_from(&coef, &omega, fit.p, j_max)
}

/// `C_{0,2} = L_d' (L_d (I + K_dd)(omega kron I) L_d')^{-1}`, the derivative
/// of `vec(omega)` with respect to `vech(Omega)`.
pub fn chol_jacobian(omega_chol: &Mat) -> Result<Mat> {
    let d = omega_chol.rows();
    let l = elimination_matrix(d);
    let i_plus_k = Mat::identity(d * d).add(&commutation_matrix(d, d));
    let inner = l
        .matmul(&i_plus_k)
        .matmul(&kron(omega_chol, &Mat::identity(d)))
        .matmul(&l.transpose());
    let inv = inverse(&inner).map_err(|_| Error::Singular("Cholesky Jacobian"))?;
    Ok(l.transpose().matmul(&inv))
}

/// `[C_{j,1}, C_{j,2}]`: derivative of `vec(B_j)` with respect to
/// `(vec A, vech Omega)`, where `A = [a, A_1, ..., A_p]`.
pub fn irf_jacobian(coef: &Mat, omega_chol: &Mat, p: usize, j: usize) -> Result<Mat> {
    let phi = lag_companion(coef, p)?;
    let d = phi.dim();
    let k = 1 + d * p;
    let q = d * (d + 1) / 2;
    let c02 = chol_jacobian(omega_chol)?;

    let mut c = Mat::zeros(d * d, d * k + q);
    let m = phi.matrix();
    let sel = phi.selector();
    // powers[i] = Phi^i for i = 0..=j
    let mut powers = vec![Mat::identity(d * p)];
    for i in 1..=j {
        powers.push(powers[i - 1].matmul(m));
    }
    if j >= 1 {
        // (omega' kron I_d) sum_m (J Phi'^{j-1-m} kron J Phi^m J'), applied to
        // the lag block of vec A (columns d.. of the vec A coordinates).
        let mut acc = Mat::zeros(d * d, d * d * p);
        for mm in 0..j {
            let left = sel.matmul(&powers[j - 1 - mm].transpose());
            let right = powers[mm].block(0, 0, d, d);
            acc.add_assign_scaled(&kron(&left, &right), 1.0);
        }
        let c1 = kron(&omega_chol.transpose(), &Mat::identity(d)).matmul(&acc);
        c.set_block(0, d, &c1);
    }
    let psi_j = powers[j].block(0, 0, d, d);
    let c2 = kron(&Mat::identity(d), &psi_j).matmul(&c02);
    c.set_block(0, d * k, &c2);
    Ok(c)
}

/// Raw sandwich `[C1, C2] V [C1, C2]'` for the covariance `v` of
/// `(vec A, vech Omega)`.
pub fn irf_covariance_from(coef: &Mat, omega: &Mat, v: &Mat, p: usize, j: usize) -> Result<Mat> {
    let (omega_chol, _) = omega_factor(omega)?;
    let c = irf_jacobian(coef, &omega_chol, p, j)?;
    if v.rows() != c.cols() || v.cols() != c.cols() {
        return Err(Error::DimensionMismatch {
            context: "irf covariance",
            expected: format!("{0} x {0}", c.cols()),
            got: format!("{} x {}", v.rows(), v.cols()),
        });
    }
    Ok(c.matmul(v).matmul(&c.transpose()).symmetrize())
}

/// Delta-method covariance of `sqrt(Th) vec(B_j(tau))`, with eigenvalues
/// below `-1e-10` clipped to zero. The flag reports whether clipping fired.
pub fn irf_covariance(fit: &TvVarFit, v: &Mat, tau: f64, j: usize) -> Result<(Mat, bool)> {
    let (coef, omega) = fit.estimate_at(tau)?;
    let raw = irf_covariance_from(&coef, &omega, v, fit.p, j)?;
    clip_psd(&raw)
}

fn clip_psd(m: &Mat) -> Result<(Mat, bool)> {
    let (eigs, _) = symmetric_eigen(m)?;
    if eigs[0] >= PSD_CLIP {
        return Ok((m.clone(), false));
    }
    let (c, _) = clip_eigenvalues(m, 0.0)?;
    Ok((c.symmetrize(), true))
}

/// Responses, covariances and pointwise intervals on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IrfResult {
    pub grid: Vec<f64>,
    pub max_horizon: usize,
    pub alpha: f64,
    pub identification: Identification,
    /// `b_hat[g][j]`, `d x d`.
    pub b_hat: Vec<Vec<Mat>>,
    /// `sigma_bj[g][j]`, `d^2 x d^2`.
    pub sigma_bj: Vec<Vec<Mat>>,
    pub lower: Vec<Vec<Mat>>,
    pub upper: Vec<Vec<Mat>>,
    pub unstable: Vec<bool>,
    pub jittered: Vec<bool>,
    /// `(grid index, horizon)` pairs whose covariance needed PSD clipping.
    pub clipped: Vec<(usize, usize)>,
}

type IrfPoint = (StructuralIrf, Vec<Mat>, Vec<Mat>, Vec<Mat>, Vec<usize>);

pub fn irf_bands(fit: &TvVarFit, grid: &[f64], max_horizon: usize, alpha: f64) -> Result<IrfResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let z = two_sided_z(alpha);
    let scale = fit.t_len() as f64 * fit.bandwidth();
    let points: Vec<IrfPoint> = grid
        .par_iter()
        .map(|&tau| {
            let irf = structural_irf(fit, tau, max_horizon)?;
            let cov = v_hat(fit, tau)?;
            let mut sig = Vec::with_capacity(max_horizon + 1);
            let mut lo = Vec::with_capacity(max_horizon + 1);
            let mut hi = Vec::with_capacity(max_horizon + 1);
            let mut clipped = Vec::new();
            for (j, b) in irf.responses.iter().enumerate() {
                let (s, c) = irf_covariance(fit, &cov.v, tau, j)?;
                if c {
                    clipped.push(j);
                }
                let d = b.rows();
                // vec(B) is column-major: entry (r, c) sits at c * d + r.
                let half = Mat::from_fn(d, d, |r, cc| {
                    z * (s[(cc * d + r, cc * d + r)].max(0.0) / scale).sqrt()
                });
                lo.push(b.sub(&half));
                hi.push(b.add(&half));
                sig.push(s);
            }
            Ok((irf, sig, lo, hi, clipped))
        })
        .collect::<Result<_>>()?;

    let mut out = IrfResult {
        grid: grid.to_vec(),
        max_horizon,
        alpha,
        identification: Identification::CholeskyLowerTriangular,
        b_hat: Vec::new(),
        sigma_bj: Vec::new(),
        lower: Vec::new(),
        upper: Vec::new(),
        unstable: Vec::new(),
        jittered: Vec::new(),
        clipped: Vec::new(),
    };
    for (g, (irf, sig, lo, hi, clipped)) in points.into_iter().enumerate() {
        out.unstable.push(irf.unstable);
        out.jittered.push(irf.jittered);
        out.b_hat.push(irf.responses);
        out.sigma_bj.push(sig);
        out.lower.push(lo);
        out.upper.push(hi);
        out.clipped.extend(clipped.into_iter().map(|j| (g, j)));
    }
    Ok(out)
}

/// `mu = J (I - Phi)^{-1} J_a` for coefficients `[a, A_1, ..., A_p]`.
///
/// `tau` only labels the error when the companion matrix is not stable.
pub fn longrun_mean_from(coef: &Mat, p: usize, tau: f64) -> Result<Vec<f64>> {
    let (a, _) = split_coefficients(coef, p);
    if p == 0 {
        return Ok(a);
    }
    let phi = lag_companion(coef, p)?;
    let radius = spectral_radius(phi.matrix())?;
    if !(radius < 1.0) {
        return Err(Error::NonStationary { tau, radius });
    }
    let n = phi.matrix().rows();
    let d = phi.dim();
    let mut rhs = Mat::zeros(n, 1);
    for (i, v) in a.iter().enumerate() {
        rhs[(i, 0)] = *v;
    }
    let sol = lu_solve(&Mat::identity(n).sub(phi.matrix()), &rhs)?;
    Ok((0..d).map(|i| sol[(i, 0)]).collect())
}

pub fn longrun_mean(fit: &TvVarFit, tau: f64) -> Result<Vec<f64>> {
    let (coef, _) = fit.estimate_at(tau)?;
    longrun_mean_from(&coef, fit.p, tau)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrendPath {
    pub grid: Vec<f64>,
    pub mu_hat: Vec<Vec<f64>>,
}

pub fn longrun_path(fit: &TvVarFit, grid: &[f64]) -> Result<TrendPath> {
    let mu_hat = grid
        .par_iter()
        .map(|&tau| longrun_mean(fit, tau))
        .collect::<Result<_>>()?;
    Ok(TrendPath {
        grid: grid.to_vec(),
        mu_hat,
    })
}
