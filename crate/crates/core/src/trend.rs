//! Nonparametric time-varying mean, its leave-(2k+1)-out bandwidth selector
//! and dependent wild bootstrap bands.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{symmetric_eigen, Mat};
use crate::error::{Error, Result};
use crate::kernel::{local_weights, rescaled_time, KernelSpec};
use crate::series::SeriesMatrix;
use crate::stats::{log_spaced, quantile_type7};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrendFit {
    pub grid: Vec<f64>,
    /// `mu_hat(tau)` for each grid point.
    pub mu_hat: Vec<Vec<f64>>,
    pub bandwidth: f64,
    /// `x_t - mu_hat(tau_t)` for `t = 1..T`.
    pub residuals: Mat,
}

/// Sparse normalized kernel weights: `(first row, weights)` per point.
#[derive(Debug, Clone)]
struct WeightTable {
    rows: Vec<(usize, Vec<f64>)>,
}

impl WeightTable {
    fn new(t_len: usize, taus: &[f64], spec: &KernelSpec) -> Result<Self> {
        let rows = taus
            .iter()
            .map(|&tau| {
                let w = local_weights(t_len, tau, spec)?;
                let first = w.iter().position(|&v| v != 0.0).unwrap_or(0);
                let last = w.iter().rposition(|&v| v != 0.0).unwrap_or(0);
                Ok((first, w[first..=last].to_vec()))
            })
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    fn apply(&self, values: &Mat) -> Vec<Vec<f64>> {
        let d = values.cols();
        self.rows
            .iter()
            .map(|(first, w)| {
                let mut acc = vec![0.0; d];
                for (i, wi) in w.iter().enumerate() {
                    for (a, v) in acc.iter_mut().zip(values.row(first + i)) {
                        *a += wi * v;
                    }
                }
                acc
            })
            .collect()
    }
}

/// Nadaraya-Watson mean `sum_t x_t K_h(tau_t - tau) / sum_t K_h(tau_t - tau)`.
pub fn estimate_trend(x: &SeriesMatrix, h: f64, grid: &[f64]) -> Result<TrendFit> {
    let spec = KernelSpec::epanechnikov(h)?;
    let t_len = x.len();
    let mu_hat = WeightTable::new(t_len, grid, &spec)?.apply(x.values());
    let taus: Vec<f64> = (1..=t_len).map(|t| rescaled_time(t, t_len)).collect();
    let fitted = WeightTable::new(t_len, &taus, &spec)?.apply(x.values());
    let residuals = Mat::from_fn(t_len, x.dim(), |t, j| x.values()[(t, j)] - fitted[t][j]);
    Ok(TrendFit {
        grid: grid.to_vec(),
        mu_hat,
        bandwidth: h,
        residuals,
    })
}

/// Default deletion half-width `k = ceil(0.1 T)`.
pub fn default_mcv_k(t_len: usize) -> usize {
    (0.1 * t_len as f64).ceil() as usize
}

/// Default MCV grid: 20 log-spaced points in `[5 T^{-0.9}, 0.5]`.
pub fn default_mcv_grid(t_len: usize) -> Vec<f64> {
    let lo = (5.0 * (t_len as f64).powf(-0.9)).min(0.5);
    log_spaced(lo, 0.5, 20)
}

/// Leave-(2k+1)-out objective `sum_t |x_t - mu_{k,h}(tau_t)|^2`, or `None`
/// if some deleted window is empty.
pub fn mcv_objective(x: &SeriesMatrix, k: usize, h: f64) -> Result<Option<f64>> {
    let spec = KernelSpec::epanechnikov(h)?;
    let t_len = x.len();
    let d = x.dim();
    let reach = (t_len as f64 * h).ceil() as usize;
    let mut total = 0.0;
    let mut acc = vec![0.0; d];
    for t in 0..t_len {
        let lo = t.saturating_sub(reach);
        let hi = (t + reach).min(t_len - 1);
        let tau = rescaled_time(t + 1, t_len);
        acc.iter_mut().for_each(|a| *a = 0.0);
        let mut wsum = 0.0;
        for s in lo..=hi {
            if s.abs_diff(t) <= k {
                continue;
            }
            let w = spec.kh(rescaled_time(s + 1, t_len) - tau);
            if w > 0.0 {
                wsum += w;
                for (a, v) in acc.iter_mut().zip(x.obs(s)) {
                    *a += w * v;
                }
            }
        }
        if !(wsum > 0.0) {
            return Ok(None);
        }
        total += x
            .obs(t)
            .iter()
            .zip(&acc)
            .map(|(v, a)| (v - a / wsum).powi(2))
            .sum::<f64>();
    }
    Ok(Some(total))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McvTrace {
    pub k: usize,
    pub candidates: Vec<f64>,
    /// Objective per candidate; `None` when infeasible.
    pub objective: Vec<Option<f64>>,
    pub chosen: f64,
}

/// Minimizer of [`mcv_objective`] over `h_grid`; ties go to the smaller `h`.
pub fn mcv_bandwidth(x: &SeriesMatrix, k: usize, h_grid: &[f64]) -> Result<McvTrace> {
    if h_grid.is_empty() {
        return Err(Error::InvalidParameter("empty bandwidth grid".into()));
    }
    let objective: Vec<Option<f64>> = h_grid
        .par_iter()
        .map(|&h| mcv_objective(x, k, h))
        .collect::<Result<_>>()?;
    let best = h_grid
        .iter()
        .zip(&objective)
        .filter_map(|(&h, o)| o.map(|v| (h, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    match best {
        Some((h, _)) => Ok(McvTrace {
            k,
            candidates: h_grid.to_vec(),
            objective,
            chosen: h,
        }),
        None => {
            // Every t keeps a neighbour at distance k+1 once T h > k+1.
            let smallest = ((k + 1) as f64 / x.len() as f64).next_up();
            Err(Error::NoFeasibleBandwidth {
                smallest_feasible: smallest,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DependenceKernel {
    #[default]
    Bartlett,
}

impl DependenceKernel {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            DependenceKernel::Bartlett => (1.0 - x.abs()).max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwbConfig {
    /// Dependence length `l`; `None` means `floor(T^{1/3})`.
    pub block_length: Option<usize>,
    pub replications: usize,
    pub kernel: DependenceKernel,
    /// Oversmoothing constant in `h_tilde = c0 h^{5/9}`.
    pub c0: f64,
    /// Explicit pilot bandwidth overriding `c0 h^{5/9}`.
    pub pilot_bandwidth: Option<f64>,
    pub seed: u64,
    /// Clip endpoints so the band always contains the point estimate.
    pub enforce_containment: bool,
}

impl Default for DwbConfig {
    fn default() -> Self {
        Self {
            block_length: None,
            replications: 499,
            kernel: DependenceKernel::Bartlett,
            c0: 2.0,
            pilot_bandwidth: None,
            seed: 0,
            enforce_containment: true,
        }
    }
}

impl DwbConfig {
    pub fn block_length_for(&self, t_len: usize) -> usize {
        self.block_length
            .unwrap_or_else(|| ((t_len as f64).cbrt() + 1e-9).floor().max(1.0) as usize)
    }

    pub fn pilot_for(&self, h: f64) -> f64 {
        self.pilot_bandwidth.unwrap_or(self.c0 * h.powf(5.0 / 9.0))
    }

    fn validate(&self, t_len: usize) -> Result<()> {
        let l = self.block_length_for(t_len);
        if l == 0 || l >= t_len {
            return Err(Error::InvalidParameter(format!(
                "block length must satisfy 1 <= l < T, got l = {l}, T = {t_len}"
            )));
        }
        if self.replications < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 bootstrap replications, got {}",
                self.replications
            )));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::InvalidParameter(format!("c0 must be positive, got {}", self.c0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapBand {
    pub grid: Vec<f64>,
    pub alpha: f64,
    pub bandwidth: f64,
    pub pilot_bandwidth: f64,
    pub block_length: usize,
    pub replications: usize,
    pub estimate: Vec<Vec<f64>>,
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    /// The banded correlation needed eigenvalue clipping.
    pub eigen_fallback: bool,
    /// `(grid index, component)` pairs whose endpoints were swapped.
    pub swapped: Vec<(usize, usize)>,
    /// `(grid index, component)` pairs clipped to contain the estimate.
    pub clipped: Vec<(usize, usize)>,
}

/// Factor of the `T x T` Toeplitz correlation `a((t - s) / l)`.
enum CorrelationFactor {
    /// Lower Cholesky factor with bandwidth `b`, rows stored as
    /// `band[t][0..=b]` for columns `t-b..=t`.
    Banded { band: Vec<Vec<f64>>, b: usize },
    /// Dense `T x T` square root from clipped eigenvalues.
    Dense(Mat),
}

impl CorrelationFactor {
    fn new(t_len: usize, l: usize, kernel: DependenceKernel) -> Result<Self> {
        let rho: Vec<f64> = (0..t_len).map(|k| kernel.eval(k as f64 / l as f64)).collect();
        let b = rho.iter().rposition(|&r| r != 0.0).unwrap_or(0);
        if let Some(band) = banded_cholesky(&rho, t_len, b) {
            return Ok(CorrelationFactor::Banded { band, b });
        }
        let c = Mat::from_fn(t_len, t_len, |i, j| rho[i.abs_diff(j)]);
        let (vals, vecs) = symmetric_eigen(&c)?;
        let root = Mat::from_fn(t_len, t_len, |i, j| vecs[(i, j)] * vals[j].max(0.0).sqrt());
        Ok(CorrelationFactor::Dense(root))
    }

    fn apply(&self, e: &[f64]) -> Vec<f64> {
        match self {
            CorrelationFactor::Banded { band, b } => (0..e.len())
                .map(|t| {
                    let first = t.saturating_sub(*b);
                    let off = *b - (t - first);
                    (first..=t).map(|s| band[t][off + s - first] * e[s]).sum()
                })
                .collect(),
            CorrelationFactor::Dense(root) => root.matvec(e),
        }
    }
}

fn banded_cholesky(rho: &[f64], n: usize, b: usize) -> Option<Vec<Vec<f64>>> {
    // band[i][b - (i - j)] = L[i][j] for i - b <= j <= i.
    let mut band = vec![vec![0.0; b + 1]; n];
    let at = |band: &Vec<Vec<f64>>, i: usize, j: usize| -> f64 {
        if j + b < i || j > i {
            0.0
        } else {
            band[i][b - (i - j)]
        }
    };
    for i in 0..n {
        let first = i.saturating_sub(b);
        for j in first..=i {
            let mut s = rho[i - j];
            let kfirst = first.max(j.saturating_sub(b));
            for k in kfirst..j {
                s -= at(&band, i, k) * at(&band, j, k);
            }
            if i == j {
                if !(s > 1e-12) {
                    return None;
                }
                band[i][b] = s.sqrt();
            } else {
                band[i][b - (i - j)] = s / band[j][b];
            }
        }
    }
    Some(band)
}

/// Dependent wild bootstrap `(1 - alpha)` bands for the trend at `grid`.
///
/// `h` is the bandwidth of the reported estimate, normally the MCV choice;
/// the pilot used to build bootstrap samples is `c0 h^{5/9}` unless
/// overridden in `cfg`.
pub fn dwb_bands(
    x: &SeriesMatrix,
    h: f64,
    cfg: &DwbConfig,
    alpha: f64,
    grid: &[f64],
) -> Result<BootstrapBand> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let t_len = x.len();
    let d = x.dim();
    cfg.validate(t_len)?;
    let l = cfg.block_length_for(t_len);
    let h_pilot = cfg.pilot_for(h);

    let pilot = estimate_trend(x, h_pilot, grid)?;
    let pilot_fitted = Mat::from_fn(t_len, d, |t, j| x.values()[(t, j)] - pilot.residuals[(t, j)]);
    let resid = &pilot.residuals;

    let spec = KernelSpec::epanechnikov(h)?;
    let weights = WeightTable::new(t_len, grid, &spec)?;
    let estimate = weights.apply(x.values());

    let factor = CorrelationFactor::new(t_len, l, cfg.kernel)?;
    let eigen_fallback = matches!(factor, CorrelationFactor::Dense(_));

    // draws[j][g][c] = mu_star(tau_g) - mu_tilde(tau_g)
    let draws: Vec<Vec<Vec<f64>>> = (0..cfg.replications)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(j as u64);
            let e: Vec<f64> = (0..t_len).map(|_| StandardNormal.sample(&mut rng)).collect();
            let xi = factor.apply(&e);
            let xstar = Mat::from_fn(t_len, d, |t, c| pilot_fitted[(t, c)] + xi[t] * resid[(t, c)]);
            let mut mu = weights.apply(&xstar);
            for (m, p) in mu.iter_mut().zip(&pilot.mu_hat) {
                for (a, b) in m.iter_mut().zip(p) {
                    *a -= b;
                }
            }
            mu
        })
        .collect();

    let mut lower = vec![vec![0.0; d]; grid.len()];
    let mut upper = vec![vec![0.0; d]; grid.len()];
    let mut swapped = Vec::new();
    let mut clipped = Vec::new();
    let mut sample = vec![0.0; cfg.replications];
    for g in 0..grid.len() {
        for c in 0..d {
            for (s, dr) in sample.iter_mut().zip(&draws) {
                *s = dr[g][c];
            }
            sample.sort_by(f64::total_cmp);
            let est = estimate[g][c];
            let mut lo = est - quantile_type7(&sample, 1.0 - alpha / 2.0);
            let mut hi = est - quantile_type7(&sample, alpha / 2.0);
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
                swapped.push((g, c));
            }
            if cfg.enforce_containment && (lo > est || hi < est) {
                lo = lo.min(est);
                hi = hi.max(est);
                clipped.push((g, c));
            }
            lower[g][c] = lo;
            upper[g][c] = hi;
        }
    }

    Ok(BootstrapBand {
        grid: grid.to_vec(),
        alpha,
        bandwidth: h,
        pilot_bandwidth: h_pilot,
        block_length: l,
        replications: cfg.replications,
        estimate,
        lower,
        upper,
        eigen_fallback,
        swapped,
        clipped,
    })
}

/// One draw of the auxiliary multiplier sequence, exposed for diagnostics.
pub fn dwb_multipliers(
    t_len: usize,
    l: usize,
    kernel: DependenceKernel,
    seed: u64,
    stream: u64,
) -> Result<Vec<f64>> {
    let factor = CorrelationFactor::new(t_len, l, kernel)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let e: Vec<f64> = (0..t_len).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(factor.apply(&e))
}
