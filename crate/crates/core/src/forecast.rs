//! Expanding-window forecast comparison of the time-varying VAR against a
//! constant-coefficient OLS VAR.
//!
//! At origin `t` both models are estimated on `x_1..x_t`. The target for
//! horizon `h` is the average `(x_{t+1} + ... + x_{t+h}) / h`, and by
//! default the forecast for every horizon is the one-step projection
//! `A_hat_t z_t` with `z_t = (1, x_t', ..., x_{t-p+1}')'`. The time-varying
//! model uses its coefficients at `tau = 1`, the most recent point.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{qr_least_squares, Mat};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::modelselect::{cv_bandwidth, BandwidthRule};
use crate::series::SeriesMatrix;
use crate::tvvar::{build_regressors, local_coefficients, SINGULAR_CONDITION};

/// OLS estimate of `[a, A_1, ..., A_p]` (`d x (1+dp)`).
pub fn fit_constant_var(x: &SeriesMatrix, p: usize) -> Result<Mat> {
    let frame = build_regressors(x, p)?;
    let ls = qr_least_squares(&frame.z, &frame.y).map_err(|_| Error::SingularDesign {
        tau: f64::NAN,
        condition: f64::INFINITY,
    })?;
    if ls.gram_condition > SINGULAR_CONDITION {
        return Err(Error::SingularDesign {
            tau: f64::NAN,
            condition: ls.gram_condition,
        });
    }
    Ok(ls.coef.transpose())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMethod {
    /// Constant-coefficient VAR by OLS.
    Constant,
    TimeVarying,
}

impl ForecastMethod {
    pub fn label(self) -> &'static str {
        match self {
            ForecastMethod::Constant => "CVAR",
            ForecastMethod::TimeVarying => "TV-VAR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastTask {
    pub horizons: Vec<usize>,
    /// First forecast origin, as a count of observations used (1-based `t`).
    pub first_origin: usize,
    pub p_constant: usize,
    pub p_tv: usize,
    pub bandwidth: BandwidthRule,
    /// Re-select the bandwidth every this many origins.
    pub reselect_every: usize,
    /// Iterate the one-step model and average the path instead of using the
    /// single projection for every horizon.
    pub iterated: bool,
    /// Methods compared; the first is the benchmark.
    pub methods: Vec<ForecastMethod>,
}

impl ForecastTask {
    pub fn new(first_origin: usize) -> Self {
        Self {
            horizons: vec![1, 2, 4, 8],
            first_origin,
            p_constant: 3,
            p_tv: 3,
            bandwidth: BandwidthRule::default(),
            reselect_every: 8,
            iterated: false,
            methods: vec![ForecastMethod::Constant, ForecastMethod::TimeVarying],
        }
    }

    fn validate(&self, t_len: usize) -> Result<()> {
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::InvalidParameter("horizons must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no forecast methods".into()));
        }
        if self.reselect_every == 0 {
            return Err(Error::InvalidParameter("reselect_every must be positive".into()));
        }
        let hmax = *self.horizons.iter().max().unwrap_or(&1);
        if self.first_origin < 2 || self.first_origin + hmax > t_len {
            return Err(Error::InvalidParameter(format!(
                "first origin {} leaves no evaluation window for horizon {hmax} with T = {t_len}",
                self.first_origin
            )));
        }
        Ok(())
    }

    fn lag_for(&self, m: ForecastMethod) -> usize {
        match m {
            ForecastMethod::Constant => self.p_constant,
            ForecastMethod::TimeVarying => self.p_tv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedOrigin {
    pub origin: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseTable {
    pub series: Vec<String>,
    pub horizons: Vec<usize>,
    pub methods: Vec<ForecastMethod>,
    /// `rmse[m][h][i]` for method `m`, horizon index `h`, series `i`.
    pub rmse: Vec<Vec<Vec<f64>>>,
    /// `rmse[m] / rmse[0]` elementwise; the benchmark row is exactly 1.
    pub ratio: Vec<Vec<Vec<f64>>>,
    /// RMSE pooled over series, `rmse_pooled[m][h]`.
    pub rmse_pooled: Vec<Vec<f64>>,
    pub ratio_pooled: Vec<Vec<f64>>,
    /// Forecasts scored per horizon.
    pub counts: Vec<usize>,
    pub skipped: Vec<SkippedOrigin>,
    /// `(origin, bandwidth)` for each bandwidth (re-)selection.
    pub bandwidths: Vec<(usize, f64)>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == den {
        1.0
    } else {
        num / den
    }
}

struct OriginForecast {
    origin: usize,
    /// `paths[m]` holds forecasts for each horizon index.
    paths: Vec<Vec<Vec<f64>>>,
}

/// Latest regressor `z_t = (1, x_t', ..., x_{t-p+1}')` for a prefix of
/// length `t`.
fn latest_regressor(x: &SeriesMatrix, t: usize, p: usize) -> Vec<f64> {
    let mut z = vec![1.0];
    for j in 0..p {
        z.extend_from_slice(x.obs(t - 1 - j));
    }
    z
}

fn horizon_forecasts(
    coef: &Mat,
    x: &SeriesMatrix,
    t: usize,
    p: usize,
    horizons: &[usize],
    iterated: bool,
) -> Vec<Vec<f64>> {
    let one_step = coef.matvec(&latest_regressor(x, t, p));
    if !iterated {
        return horizons.iter().map(|_| one_step.clone()).collect();
    }
    let d = x.dim();
    let hmax = *horizons.iter().max().unwrap_or(&1);
    // history holds the most recent p observations, newest first.
    let mut history: Vec<Vec<f64>> = (0..p).map(|j| x.obs(t - 1 - j).to_vec()).collect();
    let mut cumulative = vec![vec![0.0; d]];
    for step in 0..hmax {
        let mut z = vec![1.0];
        for h in &history {
            z.extend_from_slice(h);
        }
        let next = coef.matvec(&z);
        let prev = &cumulative[step];
        cumulative.push(prev.iter().zip(&next).map(|(a, b)| a + b).collect());
        history.insert(0, next);
        history.truncate(p);
    }
    horizons
        .iter()
        .map(|&h| cumulative[h].iter().map(|v| v / h as f64).collect())
        .collect()
}

fn select_bandwidth(x: &SeriesMatrix, t: usize, task: &ForecastTask) -> Result<f64> {
    match &task.bandwidth {
        BandwidthRule::Fixed(h) => Ok(*h),
        BandwidthRule::CrossValidation(grid) => Ok(cv_bandwidth(&x.prefix(t)?, task.p_tv, grid)?.chosen),
    }
}

fn forecast_origin(
    x: &SeriesMatrix,
    t: usize,
    h_tv: f64,
    task: &ForecastTask,
) -> Result<OriginForecast> {
    let prefix = x.prefix(t)?;
    let mut paths = Vec::with_capacity(task.methods.len());
    for &m in &task.methods {
        let p = task.lag_for(m);
        let coef = match m {
            ForecastMethod::Constant => fit_constant_var(&prefix, p)?,
            ForecastMethod::TimeVarying => {
                let frame = build_regressors(&prefix, p)?;
                local_coefficients(&frame, 1.0, &KernelSpec::epanechnikov(h_tv)?)?.coef
            }
        };
        paths.push(horizon_forecasts(&coef, x, t, p, &task.horizons, task.iterated));
    }
    Ok(OriginForecast { origin: t, paths })
}

pub fn expanding_forecast(x: &SeriesMatrix, task: &ForecastTask) -> Result<RmseTable> {
    let t_len = x.len();
    task.validate(t_len)?;
    let d = x.dim();
    let hmin = *task.horizons.iter().min().unwrap_or(&1);
    let origins: Vec<usize> = (task.first_origin..=t_len - hmin).collect();
    let needs_tv = task.methods.contains(&ForecastMethod::TimeVarying);

    // Blocks of origins sharing one bandwidth selection.
    let blocks: Vec<&[usize]> = origins.chunks(task.reselect_every).collect();
    type BlockOut = (Option<(usize, f64)>, Vec<std::result::Result<OriginForecast, SkippedOrigin>>);
    let per_block: Vec<BlockOut> = blocks
        .par_iter()
        .map(|block| {
            let start = block[0];
            let h_tv = if needs_tv {
                match select_bandwidth(x, start, task) {
                    Ok(h) => Some(h),
                    Err(e) => {
                        let skipped = block
                            .iter()
                            .map(|&t| {
                                Err(SkippedOrigin {
                                    origin: t,
                                    reason: format!("bandwidth selection failed: {e}"),
                                })
                            })
                            .collect();
                        return (None, skipped);
                    }
                }
            } else {
                None
            };
            let out = block
                .iter()
                .map(|&t| {
                    forecast_origin(x, t, h_tv.unwrap_or(f64::NAN), task).map_err(|e| SkippedOrigin {
                        origin: t,
                        reason: e.to_string(),
                    })
                })
                .collect();
            (h_tv.map(|h| (start, h)), out)
        })
        .collect();

    let nm = task.methods.len();
    let nh = task.horizons.len();
    let mut sse = vec![vec![vec![0.0; d]; nh]; nm];
    let mut counts = vec![0usize; nh];
    let mut skipped = Vec::new();
    let mut bandwidths = Vec::new();
    for (bw, outs) in per_block {
        bandwidths.extend(bw);
        for o in outs {
            let f = match o {
                Ok(f) => f,
                Err(s) => {
                    skipped.push(s);
                    continue;
                }
            };
            let t = f.origin;
            for (hi, &h) in task.horizons.iter().enumerate() {
                if t + h > t_len {
                    continue;
                }
                counts[hi] += 1;
                let target: Vec<f64> = (0..d)
                    .map(|i| (1..=h).map(|s| x.obs(t + s - 1)[i]).sum::<f64>() / h as f64)
                    .collect();
                for m in 0..nm {
                    for i in 0..d {
                        sse[m][hi][i] += (f.paths[m][hi][i] - target[i]).powi(2);
                    }
                }
            }
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::InvalidData(format!(
            "every forecast origin failed; first failure: {}",
            skipped.first().map_or("none".into(), |s| s.reason.clone())
        )));
    }
    let rmse: Vec<Vec<Vec<f64>>> = sse
        .iter()
        .map(|per_h| {
            per_h
                .iter()
                .zip(&counts)
                .map(|(v, &c)| v.iter().map(|s| (s / c as f64).sqrt()).collect())
                .collect()
        })
        .collect();
    let rmse_pooled: Vec<Vec<f64>> = sse
        .iter()
        .map(|per_h| {
            per_h
                .iter()
                .zip(&counts)
                .map(|(v, &c)| (v.iter().sum::<f64>() / (c * d) as f64).sqrt())
                .collect()
        })
        .collect();
    let ratio_table = rmse
        .iter()
        .map(|per_h| {
            per_h
                .iter()
                .zip(&rmse[0])
                .map(|(v, b)| v.iter().zip(b).map(|(n, d)| ratio(*n, *d)).collect())
                .collect()
        })
        .collect();
    let ratio_pooled = rmse_pooled
        .iter()
        .map(|per_h| per_h.iter().zip(&rmse_pooled[0]).map(|(n, d)| ratio(*n, *d)).collect())
        .collect();
    Ok(RmseTable {
        series: x.names().to_vec(),
        horizons: task.horizons.clone(),
        methods: task.methods.clone(),
        rmse,
        ratio: ratio_table,
        rmse_pooled,
        ratio_pooled,
        counts,
        skipped,
        bandwidths,
    })
}
