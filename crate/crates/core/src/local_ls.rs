//! Kernel-weighted least squares at every sample point in one pass.
//!
//! Cross-validation and lag selection need `A_hat(tau_t)` at all `T` sample
//! points for many `(p, h)` pairs. Both kernels are polynomials in the index
//! distance on their support, so every local Gram matrix is a combination of
//! three windowed sums of `z z^T`, `s z z^T` and `s^2 z z^T`, which prefix
//! sums deliver in `O(k^2)` per point. Leave-one-out residuals follow from
//! the full-window fit via the leverage `w_tt z_t^T G_t^{-1} z_t`.

use crate::kernel::KernelFamily;
use crate::tvvar::RegressorFrame;

/// Per-row residuals of the local fits.
#[derive(Debug, Clone)]
pub(crate) struct Sweep {
    /// Row-major `n x d` residuals `y_t - A_hat(tau_t) z_t`.
    pub residuals: Vec<f64>,
    /// Row-major `n x d` leave-one-out residuals.
    pub loo_residuals: Vec<f64>,
}

/// Why a bandwidth could not be used at some sample point.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SweepFailure {
    pub row: usize,
    pub reason: String,
}

pub(crate) struct MomentPrefix {
    n: usize,
    k: usize,
    d: usize,
    t_len: usize,
    packed: usize,
    center: f64,
    // Prefix sums over rows, (n + 1) blocks each: packed lower triangle of
    // z z^T followed by z y^T (k x d), weighted by u^0, u^1, u^2.
    prefix: [Vec<f64>; 3],
}

impl MomentPrefix {
    pub fn new(frame: &RegressorFrame) -> Self {
        let n = frame.rows();
        let k = frame.k();
        let d = frame.dim();
        let packed = k * (k + 1) / 2;
        let block = packed + k * d;
        let center = (n as f64 - 1.0) / 2.0;
        let mut prefix = [
            vec![0.0; (n + 1) * block],
            vec![0.0; (n + 1) * block],
            vec![0.0; (n + 1) * block],
        ];
        let mut term = vec![0.0; block];
        for r in 0..n {
            let z = frame.z.row(r);
            let y = frame.y.row(r);
            let mut pos = 0;
            for i in 0..k {
                for j in 0..=i {
                    term[pos] = z[i] * z[j];
                    pos += 1;
                }
            }
            for i in 0..k {
                for c in 0..d {
                    term[pos] = z[i] * y[c];
                    pos += 1;
                }
            }
            let u = r as f64 - center;
            let scale = [1.0, u, u * u];
            for (m, pre) in prefix.iter_mut().enumerate() {
                let (head, tail) = pre.split_at_mut((r + 1) * block);
                let prev = &head[r * block..];
                let next = &mut tail[..block];
                for ((nx, pv), tm) in next.iter_mut().zip(prev).zip(&term) {
                    *nx = pv + scale[m] * tm;
                }
            }
        }
        Self {
            n,
            k,
            d,
            t_len: frame.t_len(),
            packed,
            center,
            prefix,
        }
    }

    /// Local fits at every sample row for bandwidth `h`.
    pub fn sweep(
        &self,
        frame: &RegressorFrame,
        family: KernelFamily,
        h: f64,
    ) -> Result<Sweep, SweepFailure> {
        let (n, k, d) = (self.n, self.k, self.d);
        let block = self.packed + k * d;
        let span = self.t_len as f64 * h;
        // Rows strictly inside the support for Epanechnikov (weight 0 on the
        // boundary), inclusive for the uniform kernel.
        let reach = match family {
            KernelFamily::Epanechnikov => {
                let m = span.floor();
                if m >= span {
                    m as i64 - 1
                } else {
                    m as i64
                }
            }
            KernelFamily::Uniform => span.floor() as i64,
        };
        if reach < 0 {
            return Err(SweepFailure {
                row: 0,
                reason: "kernel window is empty".into(),
            });
        }
        let reach = reach as usize;
        let own_weight = family.eval(0.0);

        let mut residuals = vec![0.0; n * d];
        let mut loo = vec![0.0; n * d];
        let mut moments = vec![0.0; block];
        let mut gram = vec![0.0; k * k];
        let mut rhs = vec![0.0; k * (d + 1)];

        for r in 0..n {
            let lo = r.saturating_sub(reach);
            let hi = (r + reach).min(n - 1);
            let u = r as f64 - self.center;
            let coeff = match family {
                KernelFamily::Epanechnikov => {
                    let inv = 1.0 / (span * span);
                    [0.75 * (1.0 - u * u * inv), 0.75 * 2.0 * u * inv, -0.75 * inv]
                }
                KernelFamily::Uniform => [0.5, 0.0, 0.0],
            };
            for (i, m) in moments.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (c, pre) in coeff.iter().zip(&self.prefix) {
                    if *c != 0.0 {
                        acc += c * (pre[(hi + 1) * block + i] - pre[lo * block + i]);
                    }
                }
                *m = acc;
            }
            let mut pos = 0;
            for i in 0..k {
                for j in 0..=i {
                    gram[i * k + j] = moments[pos];
                    gram[j * k + i] = moments[pos];
                    pos += 1;
                }
            }
            if let Err(reason) = cholesky_in_place(&mut gram, k) {
                return Err(SweepFailure { row: r, reason });
            }
            let z = frame.z.row(r);
            // Right-hand sides: the d columns of sum w z y^T, then z_t itself.
            for i in 0..k {
                for c in 0..d {
                    rhs[i * (d + 1) + c] = moments[self.packed + i * d + c];
                }
                rhs[i * (d + 1) + d] = z[i];
            }
            cholesky_solve_in_place(&gram, k, &mut rhs, d + 1);
            let leverage = own_weight * (0..k).map(|i| z[i] * rhs[i * (d + 1) + d]).sum::<f64>();
            let denom = 1.0 - leverage;
            if !(denom > 1e-10) {
                return Err(SweepFailure {
                    row: r,
                    reason: format!("leave-one-out fit degenerate (leverage {leverage:.3e})"),
                });
            }
            let y = frame.y.row(r);
            for c in 0..d {
                let fitted: f64 = (0..k).map(|i| z[i] * rhs[i * (d + 1) + c]).sum();
                let e = y[c] - fitted;
                residuals[r * d + c] = e;
                loo[r * d + c] = e / denom;
            }
        }
        Ok(Sweep {
            residuals,
            loo_residuals: loo,
        })
    }
}

/// Lower Cholesky factor in place (row-major, full storage). Rejects
/// non-positive pivots and pivot spreads implying a Gram condition number
/// above 1e12.
fn cholesky_in_place(a: &mut [f64], k: usize) -> Result<(), String> {
    let mut dmin = f64::INFINITY;
    let mut dmax: f64 = 0.0;
    for j in 0..k {
        let mut diag = a[j * k + j];
        for l in 0..j {
            diag -= a[j * k + l] * a[j * k + l];
        }
        if !(diag > 0.0) {
            return Err(format!("weighted Gram matrix not positive definite at pivot {}", j + 1));
        }
        let ljj = diag.sqrt();
        dmin = dmin.min(ljj);
        dmax = dmax.max(ljj);
        a[j * k + j] = ljj;
        for i in (j + 1)..k {
            let mut s = a[i * k + j];
            for l in 0..j {
                s -= a[i * k + l] * a[j * k + l];
            }
            a[i * k + j] = s / ljj;
        }
    }
    let cond = (dmax / dmin).powi(2);
    if cond > 1e12 {
        return Err(format!("weighted Gram matrix ill-conditioned ({cond:.2e})"));
    }
    Ok(())
}

fn cholesky_solve_in_place(l: &[f64], k: usize, b: &mut [f64], m: usize) {
    for c in 0..m {
        for i in 0..k {
            let mut s = b[i * m + c];
            for j in 0..i {
                s -= l[i * k + j] * b[j * m + c];
            }
            b[i * m + c] = s / l[i * k + i];
        }
        for i in (0..k).rev() {
            let mut s = b[i * m + c];
            for j in (i + 1)..k {
                s -= l[j * k + i] * b[j * m + c];
            }
            b[i * m + c] = s / l[i * k + i];
        }
    }
}
