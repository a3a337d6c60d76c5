//! Lag-order selection by a penalized log-RSS criterion and bandwidth
//! selection by leave-one-out cross-validation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelFamily;
use crate::local_ls::MomentPrefix;
use crate::series::SeriesMatrix;
use crate::stats::log_spaced;
use crate::tvvar::{build_regressors, RegressorFrame};

/// Floor applied to RSS before taking logs (exact fits).
pub const RSS_FLOOR: f64 = 1e-300;

/// `chi_T = max{h^3, h sqrt(log T / (T h)), log T / (T h)} log(1/h)`.
pub fn ic_penalty(t_len: usize, h: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "penalty needs 0 < h < 1 so that log(1/h) > 0, got h = {h}"
        )));
    }
    let t = t_len as f64;
    if !(t * h > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "penalty needs T h > 1, got T = {t_len}, h = {h}"
        )));
    }
    let r = t.ln() / (t * h);
    Ok((h.powi(3)).max(h * r.sqrt()).max(r) * (1.0 / h).ln())
}

/// `floor(sqrt(0.3 T))`, at least 1.
pub fn default_max_lag(t_len: usize) -> usize {
    ((0.3 * t_len as f64).sqrt().floor() as usize).max(1)
}

/// 15 log-spaced bandwidths in `[0.06, 0.9]`.
pub fn default_bandwidth_grid() -> Vec<f64> {
    log_spaced(0.06, 0.9, 15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCandidate {
    pub bandwidth: f64,
    pub cv: Option<f64>,
    /// Why the candidate was excluded.
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTrace {
    pub p: usize,
    pub candidates: Vec<CvCandidate>,
    pub chosen: f64,
}

impl CvTrace {
    pub fn min_cv(&self) -> f64 {
        self.candidates
            .iter()
            .filter_map(|c| c.cv)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn cv_bandwidth(x: &SeriesMatrix, p: usize, h_grid: &[f64]) -> Result<CvTrace> {
    cv_bandwidth_with(x, p, h_grid, KernelFamily::Epanechnikov)
}

/// `CV(h) = sum_t |x_t - A_hat_{-t}(tau_t) z_{t-1}|^2`, with observation `t`
/// removed from every kernel sum. Ties go to the smaller `h`.
pub fn cv_bandwidth_with(
    x: &SeriesMatrix,
    p: usize,
    h_grid: &[f64],
    family: KernelFamily,
) -> Result<CvTrace> {
    if h_grid.is_empty() {
        return Err(Error::InvalidParameter("empty bandwidth grid".into()));
    }
    if let Some(h) = h_grid.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidParameter(format!("invalid bandwidth candidate {h}")));
    }
    let frame = build_regressors(x, p)?;
    let prefix = MomentPrefix::new(&frame);
    let candidates: Vec<CvCandidate> = h_grid
        .par_iter()
        .map(|&h| cv_candidate(&prefix, &frame, family, h))
        .collect();
    match pick_bandwidth(&candidates) {
        Some(h) => Ok(CvTrace {
            p,
            candidates,
            chosen: h,
        }),
        None => {
            let top = h_grid.iter().copied().fold(0.0, f64::max);
            let smallest = (1..=40)
                .map(|i| top * 1.25f64.powi(i))
                .find(|&h| cv_candidate(&prefix, &frame, family, h).cv.is_some())
                .unwrap_or(f64::INFINITY);
            Err(Error::NoFeasibleBandwidth {
                smallest_feasible: smallest,
            })
        }
    }
}

fn cv_candidate(
    prefix: &MomentPrefix,
    frame: &RegressorFrame,
    family: KernelFamily,
    h: f64,
) -> CvCandidate {
    match prefix.sweep(frame, family, h) {
        Ok(s) => CvCandidate {
            bandwidth: h,
            cv: Some(s.loo_residuals.iter().map(|e| e * e).sum()),
            reason: None,
        },
        Err(f) => CvCandidate {
            bandwidth: h,
            cv: None,
            reason: Some(format!("t = {}: {}", frame.time(f.row), f.reason)),
        },
    }
}

fn pick_bandwidth(candidates: &[CvCandidate]) -> Option<f64> {
    candidates
        .iter()
        .filter_map(|c| c.cv.map(|v| (c.bandwidth, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
        .map(|(h, _)| h)
}

/// How each candidate lag order gets its bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    Fixed(f64),
    CrossValidation(Vec<f64>),
}

impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule::CrossValidation(default_bandwidth_grid())
    }
}

/// Which bandwidth enters the penalty `chi_T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyBandwidth {
    /// One `chi_T` for all candidates, at the bandwidth of the largest
    /// feasible lag order (the model nesting every other candidate).
    #[default]
    LargestLag,
    /// Each candidate penalized at its own bandwidth.
    PerCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcCandidate {
    pub p: usize,
    pub bandwidth: Option<f64>,
    pub rss: Option<f64>,
    pub penalty: Option<f64>,
    pub ic: Option<f64>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcTrace {
    pub max_lag: usize,
    pub candidates: Vec<IcCandidate>,
    pub chosen_p: usize,
    pub chosen_bandwidth: f64,
    pub penalty_rule: PenaltyBandwidth,
    /// Bandwidth in the common penalty, under [`PenaltyBandwidth::LargestLag`].
    pub penalty_bandwidth: Option<f64>,
    /// CV traces for candidates whose bandwidth was cross-validated.
    pub cv: Vec<CvTrace>,
}

impl IcTrace {
    pub fn candidate(&self, p: usize) -> Option<&IcCandidate> {
        self.candidates.iter().find(|c| c.p == p)
    }
}

/// `IC(p) = log RSS(p) + p chi_T` over `p = 1..=max_lag`, each candidate
/// fitted at its own bandwidth `h_p`, with one penalty shared by all
/// candidates. See [`select_lag_with`].
pub fn select_lag(x: &SeriesMatrix, max_lag: usize, rule: &BandwidthRule) -> Result<IcTrace> {
    select_lag_with(x, max_lag, rule, PenaltyBandwidth::default())
}

/// RSS averages residuals over the common sample `t = max_lag+1..T`. Ties go
/// to the smaller `p`.
pub fn select_lag_with(
    x: &SeriesMatrix,
    max_lag: usize,
    rule: &BandwidthRule,
    penalty_rule: PenaltyBandwidth,
) -> Result<IcTrace> {
    if max_lag == 0 {
        return Err(Error::InvalidParameter("maximum lag must be at least 1".into()));
    }
    let t_len = x.len();
    let evaluated: Vec<(IcCandidate, Option<CvTrace>)> = (1..=max_lag)
        .into_par_iter()
        .map(|p| evaluate_lag(x, p, max_lag, rule, t_len))
        .collect();

    let mut candidates = Vec::with_capacity(max_lag);
    let mut cv = Vec::new();
    for (c, trace) in evaluated {
        candidates.push(c);
        cv.extend(trace);
    }
    let penalty_bandwidth = match penalty_rule {
        PenaltyBandwidth::PerCandidate => None,
        PenaltyBandwidth::LargestLag => candidates.iter().rev().find(|c| c.ic.is_some()).and_then(|c| c.bandwidth),
    };
    if let Some(h) = penalty_bandwidth {
        let common = ic_penalty(t_len, h)?;
        for c in candidates.iter_mut().filter(|c| c.ic.is_some()) {
            c.penalty = Some(common);
            c.ic = Some(c.rss.unwrap_or(RSS_FLOOR).max(RSS_FLOOR).ln() + c.p as f64 * common);
        }
    }
    let best = candidates
        .iter()
        .filter_map(|c| c.ic.map(|ic| (c.p, ic, c.bandwidth.unwrap_or(f64::NAN))))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    match best {
        Some((p, _, h)) => Ok(IcTrace {
            max_lag,
            candidates,
            chosen_p: p,
            chosen_bandwidth: h,
            penalty_rule,
            penalty_bandwidth,
            cv,
        }),
        None => Err(Error::NoFeasibleLag(
            candidates
                .iter()
                .map(|c| format!("p = {}: {}", c.p, c.reason.as_deref().unwrap_or("failed")))
                .collect::<Vec<_>>()
                .join("; "),
        )),
    }
}

fn evaluate_lag(
    x: &SeriesMatrix,
    p: usize,
    max_lag: usize,
    rule: &BandwidthRule,
    t_len: usize,
) -> (IcCandidate, Option<CvTrace>) {
    let failed = |reason: String, h: Option<f64>| IcCandidate {
        p,
        bandwidth: h,
        rss: None,
        penalty: None,
        ic: None,
        reason: Some(reason),
    };
    let frame = match build_regressors(x, p) {
        Ok(f) => f,
        Err(e) => return (failed(e.to_string(), None), None),
    };
    let prefix = MomentPrefix::new(&frame);
    let (h, trace) = match rule {
        BandwidthRule::Fixed(h) => (*h, None),
        BandwidthRule::CrossValidation(grid) => {
            let candidates: Vec<CvCandidate> = grid
                .iter()
                .map(|&h| cv_candidate(&prefix, &frame, KernelFamily::Epanechnikov, h))
                .collect();
            match pick_bandwidth(&candidates) {
                Some(h) => (
                    h,
                    Some(CvTrace {
                        p,
                        candidates,
                        chosen: h,
                    }),
                ),
                None => {
                    return (
                        failed("no feasible bandwidth".into(), None),
                        Some(CvTrace {
                            p,
                            candidates,
                            chosen: f64::NAN,
                        }),
                    )
                }
            }
        }
    };
    let penalty = match ic_penalty(t_len, h) {
        Ok(v) => v,
        Err(e) => return (failed(e.to_string(), Some(h)), trace),
    };
    let sweep = match prefix.sweep(&frame, KernelFamily::Epanechnikov, h) {
        Ok(s) => s,
        Err(f) => {
            return (
                failed(format!("t = {}: {}", frame.time(f.row), f.reason), Some(h)),
                trace,
            )
        }
    };
    let d = frame.dim();
    let rss = (0..frame.rows())
        .filter(|&r| frame.time(r) > max_lag)
        .map(|r| sweep.residuals[r * d..(r + 1) * d].iter().map(|e| e * e).sum::<f64>())
        .sum::<f64>()
        / t_len as f64;
    let ic = rss.max(RSS_FLOOR).ln() + p as f64 * penalty;
    (
        IcCandidate {
            p,
            bandwidth: Some(h),
            rss: Some(rss),
            penalty: Some(penalty),
            ic: Some(ic),
            reason: None,
        },
        trace,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_value() {
        let v = ic_penalty(400, 0.25).unwrap();
        // Direct evaluation of the three branches.
        let lt = 400f64.ln();
        let oracle = [0.25f64.powi(3), 0.25 * (lt / 100.0).sqrt(), lt / 100.0]
            .into_iter()
            .fold(f64::MIN, f64::max)
            * 4f64.ln();
        assert!((v - oracle).abs() < 1e-15);
        assert!((v - 0.084_832_440_7).abs() < 1e-9);
    }

    #[test]
    fn penalty_limits() {
        assert!(ic_penalty(400, 1.0).is_err());
        assert!(ic_penalty(400, 1.0 - 1e-9).unwrap() < 1e-8);
        let mut prev = f64::INFINITY;
        for t in [100, 200, 400, 800, 1600, 3200] {
            let v = ic_penalty(t, 0.3).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn default_caps() {
        assert_eq!(default_max_lag(200), 7);
        assert_eq!(default_max_lag(400), 10);
        assert_eq!(default_max_lag(800), 15);
    }

    #[test]
    fn single_candidate_returned() {
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|t| vec![((t * t) as f64 * 0.37).sin()])
            .collect();
        let x = SeriesMatrix::from_rows(&rows).unwrap();
        let cv = cv_bandwidth(&x, 1, &[0.4]).unwrap();
        assert_eq!(cv.chosen, 0.4);
    }
}
