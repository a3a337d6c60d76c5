//! Smoothing kernels, rescaled-time weights and kernel moment constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel families with support `[-1, 1]`.
///
/// `Uniform` exists mainly so that a bandwidth `h >= 1` yields exactly equal
/// weights, which lets the local estimators be checked against global OLS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    #[default]
    Epanechnikov,
    Uniform,
}

impl KernelFamily {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            KernelFamily::Epanechnikov => kernel_eval(u),
            KernelFamily::Uniform => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self { family, bandwidth })
    }

    pub fn epanechnikov(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Epanechnikov, bandwidth)
    }

    /// `K_h(u) = K(u / h) / h`.
    #[inline]
    pub fn kh(&self, u: f64) -> f64 {
        self.family.eval(u / self.bandwidth) / self.bandwidth
    }

    pub fn moments(&self) -> KernelMoments {
        kernel_moments(self)
    }
}

/// Epanechnikov kernel `0.75 (1 - u^2)` on `[-1, 1]`.
#[inline]
pub fn kernel_eval(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// `c_tilde[k] = int u^k K(u) du` for `k = 0..4` and
/// `v_tilde[k] = int u^k K(u)^2 du` for `k = 0..2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelMoments {
    pub c_tilde: [f64; 5],
    pub v_tilde: [f64; 3],
}

pub fn kernel_moments(spec: &KernelSpec) -> KernelMoments {
    match spec.family {
        KernelFamily::Epanechnikov => KernelMoments {
            c_tilde: [1.0, 0.0, 1.0 / 5.0, 0.0, 3.0 / 35.0],
            v_tilde: [3.0 / 5.0, 0.0, 3.0 / 35.0],
        },
        KernelFamily::Uniform => KernelMoments {
            c_tilde: [1.0, 0.0, 1.0 / 3.0, 0.0, 1.0 / 5.0],
            v_tilde: [1.0 / 2.0, 0.0, 1.0 / 6.0],
        },
    }
}

/// Rescaled time `tau_t = t / T` for 1-based `t`.
#[inline]
pub fn rescaled_time(t: usize, t_len: usize) -> f64 {
    t as f64 / t_len as f64
}

/// Normalized weights `K_h(tau_t - tau) / sum_s K_h(tau_s - tau)` for
/// `t = 1..T`.
pub fn local_weights(t_len: usize, tau: f64, spec: &KernelSpec) -> Result<Vec<f64>> {
    if t_len < 2 {
        return Err(Error::InsufficientSample {
            needed: 2,
            got: t_len,
        });
    }
    let mut w: Vec<f64> = (1..=t_len)
        .map(|t| spec.kh(rescaled_time(t, t_len) - tau))
        .collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::BandwidthTooSmall {
            tau,
            bandwidth: spec.bandwidth,
        });
    }
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}
