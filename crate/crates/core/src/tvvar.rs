//! Local-constant kernel estimation of the time-varying VAR
//!
//! ```text
//! x_t = a(tau_t) + A_1(tau_t) x_{t-1} + ... + A_p(tau_t) x_{t-p} + eta_t
//! ```
//!
//! `A(tau) = [a, A_1, ..., A_p]` is estimated by kernel-weighted least
//! squares of `x_t` on `z_{t-1} = (1, x_{t-1}', ..., x_{t-p}')'`, and the
//! innovation covariance by the kernel average of `eta_t eta_t'` where
//! `eta_t = x_t - A_hat(tau_t) z_{t-1}`. The module also provides the local
//! moment matrix `Sigma_hat(tau)`, the sandwich pieces of the joint
//! asymptotic covariance of `(vec A_hat, vech Omega_hat)` and pointwise
//! confidence intervals built from it.
//!
//! Observations arrive as a single block `x_1..x_T`; the first `p` rows
//! serve as presample, so sums run over `t = p+1..T` while `tau_t = t / T`
//! keeps referring to the original index.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    inverse, kron, qr_least_squares, symmetric_eigen, vec as vec_op, vech, Mat,
};
use crate::error::{Error, Result};
use crate::kernel::{rescaled_time, KernelMoments, KernelSpec};
use crate::series::SeriesMatrix;
use crate::stats::two_sided_z;

/// Gram condition numbers above this are treated as singular designs.
pub const SINGULAR_CONDITION: f64 = 1e12;
/// Above this (and below [`SINGULAR_CONDITION`]) a ridge of
/// `1e-10 * trace / k` is added to the local normal equations.
pub const RIDGE_CONDITION: f64 = 1e10;

/// Lagged design for a VAR(p).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorFrame {
    pub p: usize,
    /// Rows `z_{t-1}' = (1, x_{t-1}', ..., x_{t-p}')` for `t = p+1..T`.
    pub z: Mat,
    /// Rows `x_t'` for `t = p+1..T`.
    pub y: Mat,
    t_len: usize,
}

impl RegressorFrame {
    pub fn rows(&self) -> usize {
        self.z.rows()
    }

    /// Number of regressors `1 + dp`.
    pub fn k(&self) -> usize {
        self.z.cols()
    }

    pub fn dim(&self) -> usize {
        self.y.cols()
    }

    /// Full sample size `T`, including presample rows.
    pub fn t_len(&self) -> usize {
        self.t_len
    }

    /// 1-based time index of frame row `r`.
    pub fn time(&self, r: usize) -> usize {
        self.p + 1 + r
    }

    pub fn tau(&self, r: usize) -> f64 {
        rescaled_time(self.time(r), self.t_len)
    }
}

pub fn build_regressors(x: &SeriesMatrix, p: usize) -> Result<RegressorFrame> {
    let t_len = x.len();
    let d = x.dim();
    let k = 1 + d * p;
    // At least as many usable rows as regressors.
    if t_len < p + k {
        return Err(Error::InsufficientSample {
            needed: p + k,
            got: t_len,
        });
    }
    let n = t_len - p;
    let mut z = Mat::zeros(n, k);
    let mut y = Mat::zeros(n, d);
    for r in 0..n {
        let t = p + r; // 0-based row of x_t
        z[(r, 0)] = 1.0;
        for j in 1..=p {
            let lagged = x.obs(t - j);
            for i in 0..d {
                z[(r, 1 + (j - 1) * d + i)] = lagged[i];
            }
        }
        y.row_mut(r).copy_from_slice(x.obs(t));
    }
    Ok(RegressorFrame { p, z, y, t_len })
}

/// Splits `[a, A_1, ..., A_p]` (`d x (1+dp)`) into the intercept and the lag
/// matrices.
pub fn split_coefficients(coef: &Mat, p: usize) -> (Vec<f64>, Vec<Mat>) {
    let d = coef.rows();
    let intercept = coef.col(0);
    let lags = (0..p).map(|j| coef.block(0, 1 + j * d, d, d)).collect();
    (intercept, lags)
}

/// Local weighted least-squares solution at one `tau`.
#[derive(Debug, Clone)]
pub struct LocalCoefficients {
    /// `d x (1+dp)` matrix `[a, A_1, ..., A_p]`.
    pub coef: Mat,
    pub condition: f64,
    pub regularized: bool,
}

/// `A_hat(tau)` by QR on the square-root-weighted rows of the frame.
pub fn local_coefficients(
    frame: &RegressorFrame,
    tau: f64,
    kernel: &KernelSpec,
) -> Result<LocalCoefficients> {
    let k = frame.k();
    let d = frame.dim();
    let active: Vec<(usize, f64)> = (0..frame.rows())
        .map(|r| (r, kernel.kh(frame.tau(r) - tau)))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    if active.is_empty() {
        return Err(Error::BandwidthTooSmall {
            tau,
            bandwidth: kernel.bandwidth,
        });
    }
    if active.len() < k {
        return Err(Error::SingularDesign {
            tau,
            condition: f64::INFINITY,
        });
    }
    let m = active.len();
    let mut xs = Mat::zeros(m, k);
    let mut ys = Mat::zeros(m, d);
    let mut trace = 0.0;
    for (i, &(r, w)) in active.iter().enumerate() {
        let s = w.sqrt();
        for (dst, src) in xs.row_mut(i).iter_mut().zip(frame.z.row(r)) {
            *dst = s * src;
            trace += dst.powi(2);
        }
        for (dst, src) in ys.row_mut(i).iter_mut().zip(frame.y.row(r)) {
            *dst = s * src;
        }
    }
    let singular = |_| Error::SingularDesign {
        tau,
        condition: f64::INFINITY,
    };
    let ls = qr_least_squares(&xs, &ys).map_err(singular)?;
    if ls.gram_condition > SINGULAR_CONDITION {
        return Err(Error::SingularDesign {
            tau,
            condition: ls.gram_condition,
        });
    }
    if ls.gram_condition <= RIDGE_CONDITION {
        return Ok(LocalCoefficients {
            coef: ls.coef.transpose(),
            condition: ls.gram_condition,
            regularized: false,
        });
    }
    // Near-singular window: augment with ridge rows sqrt(lambda) I.
    let ridge = (1e-10 * trace / k as f64).sqrt();
    let mut xa = Mat::zeros(m + k, k);
    let mut ya = Mat::zeros(m + k, d);
    xa.set_block(0, 0, &xs);
    ya.set_block(0, 0, &ys);
    for i in 0..k {
        xa[(m + i, i)] = ridge;
    }
    let ls_ridge = qr_least_squares(&xa, &ya).map_err(singular)?;
    Ok(LocalCoefficients {
        coef: ls_ridge.coef.transpose(),
        condition: ls.gram_condition,
        regularized: true,
    })
}

/// Diagnostics attached to each grid point of a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointFlags {
    pub condition: f64,
    pub regularized: bool,
    /// `Omega_hat(tau)` has an eigenvalue `<= 0`.
    pub omega_not_pd: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TvVarFit {
    pub p: usize,
    pub kernel: KernelSpec,
    pub grid: Vec<f64>,
    /// `[a, A_1, ..., A_p]` at each grid point.
    pub coefs: Vec<Mat>,
    /// `Omega_hat` at each grid point.
    pub omegas: Vec<Mat>,
    pub flags: Vec<PointFlags>,
    /// `A_hat(tau_t)` at every sample row `t = p+1..T`.
    pub sample_coefs: Vec<Mat>,
    /// `(T-p) x d` residuals `eta_hat_t`.
    pub residuals: Mat,
    pub frame: RegressorFrame,
}

impl TvVarFit {
    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    pub fn bandwidth(&self) -> f64 {
        self.kernel.bandwidth
    }

    pub fn t_len(&self) -> usize {
        self.frame.t_len()
    }

    pub fn moments(&self) -> KernelMoments {
        self.kernel.moments()
    }

    pub fn grid_index(&self, tau: f64) -> Option<usize> {
        self.grid.iter().position(|&g| g == tau)
    }

    /// `(A_hat(tau), Omega_hat(tau))`, reusing grid results when `tau` is a
    /// grid point.
    pub fn estimate_at(&self, tau: f64) -> Result<(Mat, Mat)> {
        if let Some(i) = self.grid_index(tau) {
            return Ok((self.coefs[i].clone(), self.omegas[i].clone()));
        }
        let coef = local_coefficients(&self.frame, tau, &self.kernel)?.coef;
        let omega = kernel_covariance(&self.frame, &self.residuals, tau, &self.kernel)?;
        Ok((coef, omega))
    }

    /// Residual sum of squares `(1/T) sum_t eta_t' eta_t` over rows with
    /// `t > first_t`.
    pub fn rss_from(&self, first_t: usize) -> f64 {
        let total: f64 = (0..self.frame.rows())
            .filter(|&r| self.frame.time(r) > first_t)
            .map(|r| self.residuals.row(r).iter().map(|e| e * e).sum::<f64>())
            .sum();
        total / self.t_len() as f64
    }
}

/// `Omega_hat(tau) = sum K_h eta eta' / sum K_h`.
fn kernel_covariance(
    frame: &RegressorFrame,
    residuals: &Mat,
    tau: f64,
    kernel: &KernelSpec,
) -> Result<Mat> {
    let d = frame.dim();
    let mut acc = Mat::zeros(d, d);
    let mut total = 0.0;
    for r in 0..frame.rows() {
        let w = kernel.kh(frame.tau(r) - tau);
        if w <= 0.0 {
            continue;
        }
        total += w;
        let e = residuals.row(r);
        for i in 0..d {
            for j in 0..d {
                acc[(i, j)] += w * e[i] * e[j];
            }
        }
    }
    if !(total > 0.0) {
        return Err(Error::BandwidthTooSmall {
            tau,
            bandwidth: kernel.bandwidth,
        });
    }
    Ok(acc.scale(1.0 / total))
}

/// Default evaluation grid `{t / T : t = 1..T}`.
pub fn sample_grid(t_len: usize) -> Vec<f64> {
    (1..=t_len).map(|t| rescaled_time(t, t_len)).collect()
}

pub fn fit_tvvar(x: &SeriesMatrix, p: usize, h: f64, grid: &[f64]) -> Result<TvVarFit> {
    fit_tvvar_with(x, p, &KernelSpec::epanechnikov(h)?, grid)
}

pub fn fit_tvvar_with(
    x: &SeriesMatrix,
    p: usize,
    kernel: &KernelSpec,
    grid: &[f64],
) -> Result<TvVarFit> {
    let frame = build_regressors(x, p)?;
    let n = frame.rows();
    let d = frame.dim();

    let sample: Vec<LocalCoefficients> = (0..n)
        .into_par_iter()
        .map(|r| local_coefficients(&frame, frame.tau(r), kernel))
        .collect::<Result<_>>()?;

    let mut residuals = Mat::zeros(n, d);
    for r in 0..n {
        let fitted = sample[r].coef.matvec(frame.z.row(r));
        for (c, f) in fitted.iter().enumerate() {
            residuals[(r, c)] = frame.y[(r, c)] - f;
        }
    }

    // Grid points that coincide with a sample tau reuse its solve.
    let t_len = frame.t_len();
    let by_tau: HashMap<u64, usize> = (0..n).map(|r| (frame.tau(r).to_bits(), r)).collect();
    let per_grid: Vec<(LocalCoefficients, Mat)> = grid
        .par_iter()
        .map(|&tau| {
            let local = match by_tau.get(&tau.to_bits()) {
                Some(&r) => sample[r].clone(),
                None => local_coefficients(&frame, tau, kernel)?,
            };
            let omega = kernel_covariance(&frame, &residuals, tau, kernel)?;
            Ok((local, omega))
        })
        .collect::<Result<_>>()?;

    let mut coefs = Vec::with_capacity(grid.len());
    let mut omegas = Vec::with_capacity(grid.len());
    let mut flags = Vec::with_capacity(grid.len());
    for (local, omega) in per_grid {
        let (eigs, _) = symmetric_eigen(&omega)?;
        flags.push(PointFlags {
            condition: local.condition,
            regularized: local.regularized,
            omega_not_pd: eigs[0] <= 0.0,
        });
        coefs.push(local.coef);
        omegas.push(omega);
    }
    debug_assert_eq!(t_len, x.len());

    Ok(TvVarFit {
        p,
        kernel: *kernel,
        grid: grid.to_vec(),
        coefs,
        omegas,
        flags,
        sample_coefs: sample.into_iter().map(|s| s.coef).collect(),
        residuals,
        frame,
    })
}

/// `Sigma_hat(tau) = (1/T) sum_t z_{t-1} z_{t-1}' K_h(tau_t - tau)`.
pub fn sigma_hat(frame: &RegressorFrame, tau: f64, spec: &KernelSpec) -> Result<Mat> {
    let k = frame.k();
    let mut acc = Mat::zeros(k, k);
    let mut any = false;
    for r in 0..frame.rows() {
        let w = spec.kh(frame.tau(r) - tau);
        if w <= 0.0 {
            continue;
        }
        any = true;
        let z = frame.z.row(r);
        for i in 0..k {
            for j in 0..k {
                acc[(i, j)] += w * z[i] * z[j];
            }
        }
    }
    if !any {
        return Err(Error::BandwidthTooSmall {
            tau,
            bandwidth: spec.bandwidth,
        });
    }
    Ok(acc.scale(1.0 / frame.t_len() as f64))
}

/// Joint asymptotic covariance of `sqrt(Th) (vec A_hat, vech Omega_hat)` at
/// one `tau`, with its blocks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TvVarCovariance {
    pub tau: f64,
    pub sigma_hat: Mat,
    pub v11: Mat,
    pub v21: Mat,
    pub v22: Mat,
    /// `[[V11, V21'], [V21, V22]]`.
    pub v: Mat,
}

pub fn v_hat(fit: &TvVarFit, tau: f64) -> Result<TvVarCovariance> {
    let frame = &fit.frame;
    let d = frame.dim();
    let k = frame.k();
    let q = d * (d + 1) / 2;
    let h = fit.bandwidth();
    let t_len = frame.t_len() as f64;
    let v0 = fit.moments().v_tilde[0];

    let sigma = sigma_hat(frame, tau, &fit.kernel)?.symmetrize();
    let sigma_inv = inverse(&sigma)
        .map_err(|_| Error::SingularDesign {
            tau,
            condition: f64::INFINITY,
        })?
        .symmetrize();
    let (_, omega) = fit.estimate_at(tau)?;

    let v11 = kron(&sigma_inv, &omega).scale(v0).symmetrize();

    let mut s21 = Mat::zeros(q, d * k);
    let mut s22 = Mat::zeros(q, q);
    let mut zeta = vec![0.0; d * k];
    let mut outer = vec![0.0; q];
    for r in 0..frame.rows() {
        let w = fit.kernel.kh(frame.tau(r) - tau);
        if w <= 0.0 {
            continue;
        }
        let w2 = w * w;
        let e = fit.residuals.row(r);
        let z = frame.z.row(r);
        let mut pos = 0;
        for j in 0..d {
            for i in j..d {
                outer[pos] = e[i] * e[j];
                pos += 1;
            }
        }
        // (z kron eta)' equals eta' Z_{t-1}'.
        for (a, za) in z.iter().enumerate() {
            for (b, eb) in e.iter().enumerate() {
                zeta[a * d + b] = za * eb;
            }
        }
        for i in 0..q {
            let wi = w2 * outer[i];
            for (dst, src) in s21.row_mut(i).iter_mut().zip(&zeta) {
                *dst += wi * src;
            }
            for (dst, src) in s22.row_mut(i).iter_mut().zip(&outer) {
                *dst += wi * src;
            }
        }
    }
    let factor = h / t_len;
    let v21 = s21
        .scale(factor)
        .matmul(&kron(&sigma_inv, &Mat::identity(d)));
    let vo = vech(&omega)?;
    let v22 = Mat::from_fn(q, q, |i, j| factor * s22[(i, j)] - v0 * vo[i] * vo[j]).symmetrize();

    let dim_a = d * k;
    let mut v = Mat::zeros(dim_a + q, dim_a + q);
    v.set_block(0, 0, &v11);
    v.set_block(dim_a, 0, &v21);
    v.set_block(0, dim_a, &v21.transpose());
    v.set_block(dim_a, dim_a, &v22);

    Ok(TvVarCovariance {
        tau,
        sigma_hat: sigma,
        v11,
        v21,
        v22,
        v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub std_error: f64,
}

impl Interval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Pointwise intervals for `vec A_hat(tau)` and `vech Omega_hat(tau)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointwiseCi {
    pub tau: f64,
    pub alpha: f64,
    pub coef: Vec<Interval>,
    pub omega: Vec<Interval>,
    /// Indices into the stacked `(vec A, vech Omega)` vector whose variance
    /// estimate was negative and clipped to zero.
    pub clipped: Vec<usize>,
}

/// `estimate +- z_{1-alpha/2} sqrt(diag(V_hat) / (T h))`, without bias
/// correction.
pub fn pointwise_ci(
    fit: &TvVarFit,
    cov: &TvVarCovariance,
    tau: f64,
    alpha: f64,
) -> Result<PointwiseCi> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let (coef, omega) = fit.estimate_at(tau)?;
    let mut est = vec_op(&coef);
    let dim_a = est.len();
    est.extend(vech(&omega)?);
    if cov.v.rows() != est.len() {
        return Err(Error::DimensionMismatch {
            context: "pointwise_ci",
            expected: format!("{} x {}", est.len(), est.len()),
            got: format!("{} x {}", cov.v.rows(), cov.v.cols()),
        });
    }
    let z = two_sided_z(alpha);
    let scale = fit.t_len() as f64 * fit.bandwidth();
    let mut clipped = Vec::new();
    let intervals: Vec<Interval> = est
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let var = cov.v[(i, i)];
            if var < 0.0 {
                clipped.push(i);
            }
            let se = (var.max(0.0) / scale).sqrt();
            Interval {
                estimate: e,
                lower: e - z * se,
                upper: e + z * se,
                std_error: se,
            }
        })
        .collect();
    let (a, o) = intervals.split_at(dim_a);
    Ok(PointwiseCi {
        tau,
        alpha,
        coef: a.to_vec(),
        omega: o.to_vec(),
        clipped,
    })
}
