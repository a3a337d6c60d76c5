//! Simulation of time-varying VARs, Beveridge-Nelson consistency checks and
//! the Monte Carlo harness for lag selection, RMSE and interval coverage.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{build_companion, spectral_radius, vec as vec_op, vech, Mat};
use crate::error::{Error, Result};
use crate::irf::longrun_mean_from;
use crate::kernel::rescaled_time;
use crate::modelselect::{default_bandwidth_grid, default_max_lag, select_lag, BandwidthRule};
use crate::series::SeriesMatrix;
use crate::tvvar::{fit_tvvar, pointwise_ci, sample_grid, v_hat};

/// Parameters of a VAR(p) at one point in rescaled time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarParams {
    pub intercept: Vec<f64>,
    pub lags: Vec<Mat>,
    /// Lower-triangular `omega` with `Omega = omega omega'`.
    pub omega_chol: Mat,
}

impl VarParams {
    pub fn dim(&self) -> usize {
        self.intercept.len()
    }

    pub fn lag_order(&self) -> usize {
        self.lags.len()
    }

    /// `[a, A_1, ..., A_p]`.
    pub fn coef(&self) -> Mat {
        let d = self.dim();
        let p = self.lag_order();
        let mut m = Mat::zeros(d, 1 + d * p);
        for (i, v) in self.intercept.iter().enumerate() {
            m[(i, 0)] = *v;
        }
        for (j, a) in self.lags.iter().enumerate() {
            m.set_block(0, 1 + j * d, a);
        }
        m
    }

    pub fn omega(&self) -> Mat {
        self.omega_chol.matmul(&self.omega_chol.transpose())
    }

    fn lerp(&self, other: &VarParams, w: f64) -> VarParams {
        let mix = |a: &Mat, b: &Mat| a.scale(1.0 - w).add(&b.scale(w));
        VarParams {
            intercept: self
                .intercept
                .iter()
                .zip(&other.intercept)
                .map(|(a, b)| (1.0 - w) * a + w * b)
                .collect(),
            lags: self.lags.iter().zip(&other.lags).map(|(a, b)| mix(a, b)).collect(),
            omega_chol: mix(&self.omega_chol, &other.omega_chol),
        }
    }
}

/// How a coefficient path is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathSpec {
    /// Bivariate VAR(2) benchmark design with smoothly varying intercept,
    /// lag matrices and innovation scale.
    Benchmark,
    Constant(VarParams),
    /// Parameters tabulated on an increasing grid, linearly interpolated and
    /// held constant outside it.
    Tabulated { grid: Vec<f64>, params: Vec<VarParams> },
}

/// A validated parameter path `tau -> (a, A_1..A_p, omega)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPath {
    spec: PathSpec,
    d: usize,
    p: usize,
    max_radius: f64,
}

/// Number of points on which stability and the shape of `omega` are checked.
pub const VALIDATION_POINTS: usize = 1000;

impl CoefficientPath {
    /// Validates shapes, the triangular `omega` and stability of the
    /// companion matrix on [`VALIDATION_POINTS`] points of `[0, 1]`.
    pub fn new(spec: PathSpec) -> Result<Self> {
        Self::build(spec, true)
    }

    fn build(spec: PathSpec, require_stable: bool) -> Result<Self> {
        let (d, p) = match &spec {
            PathSpec::Benchmark => (2, 2),
            PathSpec::Constant(v) => (v.dim(), v.lag_order()),
            PathSpec::Tabulated { grid, params } => {
                if grid.is_empty() || grid.len() != params.len() {
                    return Err(Error::InvalidParameter(
                        "tabulated path needs one parameter set per grid point".into(),
                    ));
                }
                if grid.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidParameter(
                        "tabulated path grid must be strictly increasing".into(),
                    ));
                }
                (params[0].dim(), params[0].lag_order())
            }
        };
        if d == 0 || p == 0 {
            return Err(Error::InvalidParameter(
                "path needs positive dimension and lag order".into(),
            ));
        }
        let mut path = Self {
            spec,
            d,
            p,
            max_radius: 0.0,
        };
        for i in 0..VALIDATION_POINTS {
            let tau = i as f64 / (VALIDATION_POINTS - 1) as f64;
            let radius = path.validate_point(&path.at(tau), tau)?;
            if require_stable && !(radius < 1.0) {
                return Err(Error::NonStationary { tau, radius });
            }
            path.max_radius = path.max_radius.max(radius);
        }
        Ok(path)
    }

    /// The bivariate VAR(2) benchmark design.
    ///
    /// Its companion matrix has spectral radius above one for
    /// `tau > 0.946` (about 1.105 at `tau = 1`), so it is exempt from the
    /// stability check; see [`CoefficientPath::max_spectral_radius`].
    pub fn benchmark() -> Self {
        Self::build(PathSpec::Benchmark, false).expect("benchmark path is well formed")
    }

    /// Largest companion spectral radius over the validation grid.
    pub fn max_spectral_radius(&self) -> f64 {
        self.max_radius
    }

    pub fn spec(&self) -> &PathSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn lag_order(&self) -> usize {
        self.p
    }

    fn validate_point(&self, v: &VarParams, tau: f64) -> Result<f64> {
        let (d, p) = (self.d, self.p);
        let shapes_ok = v.intercept.len() == d
            && v.lags.len() == p
            && v.lags.iter().all(|a| a.shape() == (d, d))
            && v.omega_chol.shape() == (d, d);
        if !shapes_ok {
            return Err(Error::DimensionMismatch {
                context: "coefficient path",
                expected: format!("d = {d}, p = {p}"),
                got: format!("d = {}, p = {}", v.dim(), v.lag_order()),
            });
        }
        // A zero diagonal is admitted so that noiseless skeletons can be generated.
        if !v.omega_chol.is_lower_triangular() || (0..d).any(|i| !(v.omega_chol[(i, i)] >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "omega must be lower triangular with nonnegative diagonal at tau = {tau}"
            )));
        }
        spectral_radius(build_companion(&v.lags)?.matrix())
    }

    /// Parameters at `tau`; values below 0 use `tau = 0`.
    pub fn at(&self, tau: f64) -> VarParams {
        let tau = tau.max(0.0);
        match &self.spec {
            PathSpec::Benchmark => benchmark_params(tau),
            PathSpec::Constant(v) => v.clone(),
            PathSpec::Tabulated { grid, params } => {
                if tau <= grid[0] {
                    return params[0].clone();
                }
                let last = grid.len() - 1;
                if tau >= grid[last] {
                    return params[last].clone();
                }
                let i = grid.partition_point(|&g| g <= tau) - 1;
                let w = (tau - grid[i]) / (grid[i + 1] - grid[i]);
                params[i].lerp(&params[i + 1], w)
            }
        }
    }
}

fn benchmark_params(tau: f64) -> VarParams {
    let c = tau - 0.5;
    let e = c.exp();
    let a1 = Mat::from_rows(&[
        &[0.8 * e, 0.8 * c.powi(3)],
        &[0.8 * c.powi(3), 0.8 + 0.3 * (PI * tau).sin()],
    ]);
    let a2 = Mat::from_rows(&[
        &[-0.2 * e, 0.8 * c * c],
        &[0.8 * c * c, -0.4 + 0.3 * (PI * tau).cos()],
    ]);
    let w11 = 1.5 + 0.2 * (-c).exp();
    let w22 = 1.5 + 0.5 * c * c;
    VarParams {
        intercept: vec![0.5 * (2.0 * PI * tau).sin(), 0.5 * (2.0 * PI * tau).cos()],
        lags: vec![a1, a2],
        omega_chol: Mat::from_rows(&[&[w11, 0.0], &[0.2 * w22 * w11, w22]]),
    }
}

/// Law of the standardized innovations `eps_t` (zero mean, identity
/// covariance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InnovationLaw {
    #[default]
    Gaussian,
    /// Student t with `df > 2` degrees of freedom, rescaled to unit variance.
    StudentT { df: f64 },
}

impl InnovationLaw {
    fn sampler(self) -> Result<Sampler> {
        match self {
            InnovationLaw::Gaussian => Ok(Sampler::Gaussian),
            InnovationLaw::StudentT { df } => {
                if !(df > 2.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Student t innovations need df > 2, got {df}"
                    )));
                }
                let dist = StudentT::new(df)
                    .map_err(|e| Error::InvalidParameter(format!("Student t: {e}")))?;
                Ok(Sampler::StudentT(dist, ((df - 2.0) / df).sqrt()))
            }
        }
    }
}

enum Sampler {
    Gaussian,
    StudentT(StudentT<f64>, f64),
}

impl Sampler {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Gaussian => StandardNormal.sample(rng),
            Sampler::StudentT(dist, scale) => scale * dist.sample(rng),
        }
    }
}

/// Standardized innovation draws, `n` rows of length `d`.
pub fn draw_innovations(
    law: InnovationLaw,
    n: usize,
    d: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<Vec<f64>>> {
    let sampler = law.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Ok((0..n)
        .map(|_| (0..d).map(|_| sampler.draw(&mut rng)).collect())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_len: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Independent stream of the seeded generator, e.g. a replication index.
    pub stream: u64,
    pub law: InnovationLaw,
}

impl SimConfig {
    pub fn new(t_len: usize, seed: u64) -> Self {
        Self {
            t_len,
            burn_in: 200,
            seed,
            stream: 0,
            law: InnovationLaw::Gaussian,
        }
    }
}

/// Draws `x_1..x_T` from `x_t = a(tau_t) + sum_j A_j(tau_t) x_{t-j} + omega(tau_t) eps_t`.
///
/// The presample starts at the long-run mean under the `tau = 0`
/// parameters, which also drive the `burn_in` discarded steps.
pub fn simulate_tvvar(path: &CoefficientPath, cfg: &SimConfig) -> Result<SeriesMatrix> {
    if cfg.burn_in < 100 {
        return Err(Error::InvalidParameter(format!(
            "burn-in must be at least 100, got {}",
            cfg.burn_in
        )));
    }
    if cfg.t_len == 0 {
        return Err(Error::InvalidParameter("sample size must be positive".into()));
    }
    let (d, p) = (path.dim(), path.lag_order());
    let sampler = cfg.law.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.stream);

    let start = path.at(0.0);
    let mu0 = longrun_mean_from(&start.coef(), p, 0.0)?;
    let total = p + cfg.burn_in + cfg.t_len;
    let mut x = vec![0.0; total * d];
    for t in 0..p {
        x[t * d..(t + 1) * d].copy_from_slice(&mu0);
    }
    let mut eps = vec![0.0; d];
    for t in p..total {
        let step = t - p;
        let params = if step < cfg.burn_in {
            start.clone()
        } else {
            path.at(rescaled_time(step - cfg.burn_in + 1, cfg.t_len))
        };
        for e in eps.iter_mut() {
            *e = sampler.draw(&mut rng);
        }
        let mut next = params.intercept.clone();
        for (j, a) in params.lags.iter().enumerate() {
            let lagged = &x[(t - j - 1) * d..(t - j) * d];
            for (i, n) in next.iter_mut().enumerate() {
                *n += (0..d).map(|c| a[(i, c)] * lagged[c]).sum::<f64>();
            }
        }
        for (i, n) in next.iter_mut().enumerate() {
            *n += (0..=i).map(|c| params.omega_chol[(i, c)] * eps[c]).sum::<f64>();
        }
        x[t * d..(t + 1) * d].copy_from_slice(&next);
    }
    let kept = x[(p + cfg.burn_in) * d..].to_vec();
    SeriesMatrix::from_values(Mat::from_row_major(cfg.t_len, d, kept)?)
}

/// Largest discrepancy between direct evaluation of a truncated VMA
/// `x_t = mu + sum_{j=0}^{L} B_j eps_{t-j}` and its Beveridge-Nelson form
/// `mu + B(1) eps_t + B~(L) eps_{t-1} - B~(L) eps_t`, with
/// `B~_j = sum_{k>j} B_k`. Evaluated at every `t` with a full history.
pub fn bn_check(b_coeffs: &[Mat], eps: &[Vec<f64>], mu: &[f64]) -> f64 {
    let l = b_coeffs.len().saturating_sub(1);
    if b_coeffs.is_empty() || eps.len() <= l {
        return 0.0;
    }
    let d = b_coeffs[0].rows();
    let mut long_run = Mat::zeros(d, b_coeffs[0].cols());
    for b in b_coeffs {
        long_run.add_assign_scaled(b, 1.0);
    }
    // tails[j] = B~_j for j = 0..L-1
    let mut tails = vec![Mat::zeros(d, b_coeffs[0].cols()); l];
    let mut acc = Mat::zeros(d, b_coeffs[0].cols());
    for j in (0..l).rev() {
        acc.add_assign_scaled(&b_coeffs[j + 1], 1.0);
        tails[j] = acc.clone();
    }
    let filter = |t: usize| -> Vec<f64> {
        let mut out = vec![0.0; d];
        for (j, bt) in tails.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(bt.matvec(&eps[t - j])) {
                *o += v;
            }
        }
        out
    };
    let mut worst: f64 = 0.0;
    for t in l..eps.len() {
        let mut direct = mu.to_vec();
        for (j, b) in b_coeffs.iter().enumerate() {
            for (o, v) in direct.iter_mut().zip(b.matvec(&eps[t - j])) {
                *o += v;
            }
        }
        let now = filter(t);
        let before = if l == 0 { vec![0.0; d] } else { filter(t - 1) };
        let perm = long_run.matvec(&eps[t]);
        for i in 0..d {
            let bn = mu[i] + perm[i] + before[i] - now[i];
            worst = worst.max((bn - direct[i]).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub t_list: Vec<usize>,
    pub n_reps: usize,
    pub seed: u64,
    /// Nominal non-coverage of the pointwise intervals.
    pub alpha: f64,
    pub burn_in: usize,
    pub law: InnovationLaw,
    /// Lag cap per `T`; `None` means `floor(sqrt(0.3 T))`.
    pub max_lag: Option<usize>,
    pub h_grid: Vec<f64>,
    /// Drop grid points within `h` of either end from RMSE and coverage.
    pub exclude_boundary: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            t_list: vec![200, 400, 800],
            n_reps: 200,
            seed: 20240601,
            alpha: 0.05,
            burn_in: 200,
            law: InnovationLaw::Gaussian,
            max_lag: None,
            h_grid: default_bandwidth_grid(),
            exclude_boundary: false,
        }
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub p_hat: usize,
    pub bandwidth: f64,
    /// Sums over grid points of squared Frobenius errors.
    pub sse_a: f64,
    pub sse_omega: f64,
    pub points: usize,
    pub coverage_a: f64,
    pub coverage_omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub t_len: usize,
    pub max_lag: usize,
    pub n_reps: usize,
    pub n_failed: usize,
    pub failures: Vec<String>,
    pub frac_below: f64,
    pub frac_equal: f64,
    pub frac_above: f64,
    pub rmse_a: f64,
    pub rmse_omega: f64,
    pub coverage_a: f64,
    pub coverage_omega: f64,
    pub mean_bandwidth: f64,
    pub seed: u64,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub true_p: usize,
    pub alpha: f64,
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn row(&self, t_len: usize) -> Option<&McRow> {
        self.rows.iter().find(|r| r.t_len == t_len)
    }

    /// Aligned text table: lag-selection frequencies, then RMSE and coverage.
    pub fn to_text(&self) -> String {
        let p = self.true_p;
        let level = (1.0 - self.alpha) * 100.0;
        let mut s = String::new();
        let _ = writeln!(s, "Lag selection frequencies (true p = {p})");
        let _ = writeln!(
            s,
            "{:>6} {:>10} {:>10} {:>10} {:>8} {:>8}",
            "T",
            format!("p<{p}"),
            format!("p={p}"),
            format!("p>{p}"),
            "reps",
            "failed"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>6} {:>10.3} {:>10.3} {:>10.3} {:>8} {:>8}",
                r.t_len, r.frac_below, r.frac_equal, r.frac_above, r.n_reps, r.n_failed
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "RMSE and coverage of {level:.0}% pointwise intervals");
        let _ = writeln!(
            s,
            "{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "T", "RMSE(A)", "cov(A)", "RMSE(Om)", "cov(Om)", "mean h"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>6} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                r.t_len, r.rmse_a, r.coverage_a, r.rmse_omega, r.coverage_omega, r.mean_bandwidth
            );
        }
        s
    }
}

/// Seed stream for replication `rep` at sample size `t_len`.
pub fn replication_stream(t_len: usize, rep: usize) -> u64 {
    ((t_len as u64) << 32) | rep as u64
}

/// Simulate, select `p`, cross-validate `h`, fit on `{tau_t}` and score one
/// replication against the true path.
pub fn run_replication(
    path: &CoefficientPath,
    cfg: &McConfig,
    t_len: usize,
    rep: usize,
) -> Result<ReplicationOutcome> {
    let sim = SimConfig {
        t_len,
        burn_in: cfg.burn_in,
        seed: cfg.seed,
        stream: replication_stream(t_len, rep),
        law: cfg.law,
    };
    let x = simulate_tvvar(path, &sim)?;
    let max_lag = cfg.max_lag.unwrap_or_else(|| default_max_lag(t_len));
    let ic = select_lag(&x, max_lag, &BandwidthRule::CrossValidation(cfg.h_grid.clone()))?;
    let p_hat = ic.chosen_p;
    let h = ic.chosen_bandwidth;
    let grid = sample_grid(t_len);
    let fit = fit_tvvar(&x, p_hat, h, &grid)?;

    let d = path.dim();
    let p = path.lag_order();
    let k_true = 1 + d * p;
    let k_hat = 1 + d * p_hat;
    let k_common = k_true.min(k_hat);

    let mut sse_a = 0.0;
    let mut sse_omega = 0.0;
    let mut points = 0;
    let mut covered_a = 0usize;
    let mut total_a = 0usize;
    let mut covered_o = 0usize;
    let mut total_o = 0usize;
    for (g, &tau) in grid.iter().enumerate() {
        if cfg.exclude_boundary && (tau < h || tau > 1.0 - h) {
            continue;
        }
        points += 1;
        let truth = path.at(tau);
        let a_true = truth.coef();
        let o_true = truth.omega();
        let a_hat = &fit.coefs[g];
        // Missing or extra lags count against the estimate as zeros.
        let kmax = k_true.max(k_hat);
        for i in 0..d {
            for c in 0..kmax {
                let t = if c < k_true { a_true[(i, c)] } else { 0.0 };
                let e = if c < k_hat { a_hat[(i, c)] } else { 0.0 };
                sse_a += (e - t).powi(2);
            }
        }
        sse_omega += fit.omegas[g].sub(&o_true).frobenius_norm().powi(2);

        let cov = v_hat(&fit, tau)?;
        let ci = pointwise_ci(&fit, &cov, tau, cfg.alpha)?;
        let truth_vec = vec_op(&a_true);
        // vec is column-major, so column c of A occupies entries c*d..(c+1)*d.
        for c in 0..k_true {
            for i in 0..d {
                total_a += 1;
                if c < k_common && ci.coef[c * d + i].contains(truth_vec[c * d + i]) {
                    covered_a += 1;
                }
            }
        }
        for (iv, t) in ci.omega.iter().zip(vech(&o_true)?) {
            total_o += 1;
            if iv.contains(t) {
                covered_o += 1;
            }
        }
    }
    Ok(ReplicationOutcome {
        p_hat,
        bandwidth: h,
        sse_a,
        sse_omega,
        points,
        coverage_a: covered_a as f64 / total_a.max(1) as f64,
        coverage_omega: covered_o as f64 / total_o.max(1) as f64,
    })
}

pub fn run_monte_carlo(path: &CoefficientPath, cfg: &McConfig) -> Result<McReport> {
    if cfg.n_reps == 0 {
        return Err(Error::InvalidParameter("need at least one replication".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {}",
            cfg.alpha
        )));
    }
    let p = path.lag_order();
    let mut rows = Vec::with_capacity(cfg.t_list.len());
    for &t_len in &cfg.t_list {
        let started = Instant::now();
        let outcomes: Vec<Result<ReplicationOutcome>> = (0..cfg.n_reps)
            .into_par_iter()
            .map(|rep| run_replication(path, cfg, t_len, rep))
            .collect();
        let mut ok = Vec::new();
        let mut failures = Vec::new();
        for (rep, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok(v) => ok.push(v),
                Err(e) => failures.push(format!("replication {rep}: {e}")),
            }
        }
        let n = ok.len() as f64;
        let frac = |f: &dyn Fn(&ReplicationOutcome) -> bool| {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().filter(|o| f(o)).count() as f64 / n
            }
        };
        let points: usize = ok.iter().map(|o| o.points).sum();
        let mean = |f: &dyn Fn(&ReplicationOutcome) -> f64| ok.iter().map(f).sum::<f64>() / n;
        rows.push(McRow {
            t_len,
            max_lag: cfg.max_lag.unwrap_or_else(|| default_max_lag(t_len)),
            n_reps: cfg.n_reps,
            n_failed: failures.len(),
            failures,
            frac_below: frac(&|o| o.p_hat < p),
            frac_equal: frac(&|o| o.p_hat == p),
            frac_above: frac(&|o| o.p_hat > p),
            rmse_a: (ok.iter().map(|o| o.sse_a).sum::<f64>() / points as f64).sqrt(),
            rmse_omega: (ok.iter().map(|o| o.sse_omega).sum::<f64>() / points as f64).sqrt(),
            coverage_a: mean(&|o| o.coverage_a),
            coverage_omega: mean(&|o| o.coverage_omega),
            mean_bandwidth: mean(&|o| o.bandwidth),
            seed: cfg.seed,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        });
    }
    Ok(McReport {
        true_p: p,
        alpha: cfg.alpha,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_path_is_valid() {
        let path = CoefficientPath::benchmark();
        let v = path.at(0.5);
        assert!((v.lags[0][(0, 0)] - 0.8).abs() < 1e-15);
        assert!((v.lags[1][(1, 1)] - (-0.4)).abs() < 1e-12);
        assert!((v.omega_chol[(0, 0)] - 1.7).abs() < 1e-15);
        assert!((v.omega_chol[(1, 0)] - 0.2 * 1.5 * 1.7).abs() < 1e-15);
        assert_eq!(path.at(-0.3), path.at(0.0));
        assert!(path.max_spectral_radius() > 1.1 && path.max_spectral_radius() < 1.11);
        assert!(matches!(
            CoefficientPath::new(PathSpec::Benchmark),
            Err(Error::NonStationary { tau, .. }) if tau > 0.94
        ));
    }

    #[test]
    fn unstable_path_rejected() {
        let v = VarParams {
            intercept: vec![0.0],
            lags: vec![Mat::from_rows(&[&[1.01]])],
            omega_chol: Mat::identity(1),
        };
        assert!(matches!(
            CoefficientPath::new(PathSpec::Constant(v)),
            Err(Error::NonStationary { .. })
        ));
    }

    #[test]
    fn tabulated_interpolates() {
        let mk = |a: f64| VarParams {
            intercept: vec![a],
            lags: vec![Mat::from_rows(&[&[a / 2.0]])],
            omega_chol: Mat::identity(1),
        };
        let path = CoefficientPath::new(PathSpec::Tabulated {
            grid: vec![0.0, 1.0],
            params: vec![mk(0.0), mk(1.0)],
        })
        .unwrap();
        assert!((path.at(0.25).intercept[0] - 0.25).abs() < 1e-15);
        assert!((path.at(0.25).lags[0][(0, 0)] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn ma1_bn_identity() {
        let theta = 0.7;
        let b = vec![Mat::identity(1), Mat::from_rows(&[&[theta]])];
        let eps: Vec<Vec<f64>> = (0..20).map(|t| vec![((t * 37 % 11) as f64) - 5.0]).collect();
        assert!(bn_check(&b, &eps, &[0.3]) < 1e-14);
    }

    #[test]
    fn simulation_is_reproducible() {
        let path = CoefficientPath::benchmark();
        let cfg = SimConfig::new(200, 7);
        let a = simulate_tvvar(&path, &cfg).unwrap();
        let b = simulate_tvvar(&path, &cfg).unwrap();
        assert_eq!(a, b);
        let other = simulate_tvvar(&path, &SimConfig { stream: 1, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn short_burn_in_rejected() {
        let path = CoefficientPath::benchmark();
        let cfg = SimConfig {
            burn_in: 50,
            ..SimConfig::new(100, 1)
        };
        assert!(simulate_tvvar(&path, &cfg).is_err());
    }
}
