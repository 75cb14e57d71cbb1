//! Priors, random-walk Metropolis with likelihood tempering and adaptive
//! proposal scaling, and the shared Gaussian log-density all likelihood
//! models evaluate through.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Prior-draw budget for finding an admissible, evaluable starting point.
const INIT_ATTEMPTS: usize = 10_000;

/// Log-density of the multivariate normal `N(mean, cov)` evaluated at `y`,
/// via Cholesky factorization of `cov`.
///
/// Every likelihood in the toolkit (plain FEM, BFEM, RM-FEM replicas,
/// statFEM) evaluates through this one function, so models that reduce to
/// one another on paper (e.g. BFEM with a zero discretization-error
/// covariance and plain FEM) produce bit-identical numbers.
///
/// # Errors
/// [`Error::ObservationMismatch`] on dimension mismatch;
/// [`Error::NotPositiveDefinite`] when `cov` has no Cholesky factorization.
pub fn mvn_logpdf(y: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let m = y.len();
    if mean.len() != m || cov.nrows() != m || cov.ncols() != m {
        return Err(Error::ObservationMismatch(format!(
            "mvn dimensions disagree: y is {m}, mean is {}, cov is {}x{}",
            mean.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let chol = cov.clone().cholesky().ok_or_else(|| {
        Error::NotPositiveDefinite("likelihood covariance has no Cholesky factor".into())
    })?;
    let diff = y - mean;
    let quad = diff.dot(&chol.solve(&diff));
    let ln_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    Ok(-0.5 * (m as f64 * ln_2pi + ln_det + quad))
}

/// A one-dimensional prior distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    /// `ln X ~ N(mu, sigma²)`, supported on `(0, ∞)`.
    LogNormal { mu: f64, sigma: f64 },
    /// Uniform on `[a, b]`.
    Uniform { a: f64, b: f64 },
}

impl Distribution {
    /// Checks the distribution parameters.
    ///
    /// # Errors
    /// [`Error::InvalidParameter`] for `sigma ≤ 0` or `b ≤ a`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::LogNormal { mu, sigma } => {
                if !mu.is_finite() || !(sigma > 0.0) || !sigma.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "log-normal needs finite mu and sigma > 0, got mu = {mu}, sigma = {sigma}"
                    )));
                }
            }
            Distribution::Uniform { a, b } => {
                if !a.is_finite() || !b.is_finite() || !(b > a) {
                    return Err(Error::InvalidParameter(format!(
                        "uniform needs finite a < b, got a = {a}, b = {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Log-density at `x` (`−∞` outside the support).
    pub fn log_pdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::LogNormal { mu, sigma } => {
                if x <= 0.0 || !x.is_finite() {
                    return f64::NEG_INFINITY;
                }
                let z = (x.ln() - mu) / sigma;
                -x.ln() - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z
            }
            Distribution::Uniform { a, b } => {
                if x < a || x > b {
                    f64::NEG_INFINITY
                } else {
                    -(b - a).ln()
                }
            }
        }
    }

    /// Draws one value.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Distribution::LogNormal { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                (mu + sigma * z).exp()
            }
            Distribution::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
        }
    }

    /// Distribution mean.
    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Distribution::Uniform { a, b } => 0.5 * (a + b),
        }
    }

    /// Distribution variance.
    pub fn variance(&self) -> f64 {
        match *self {
            Distribution::LogNormal { mu, sigma } => {
                let s2 = sigma * sigma;
                (s2.exp() - 1.0) * (2.0 * mu + s2).exp()
            }
            Distribution::Uniform { a, b } => (b - a) * (b - a) / 12.0,
        }
    }
}

/// Joint admissibility predicate over a full parameter vector.
pub type AdmissibilityFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Independent per-parameter priors with an optional joint admissibility
/// predicate (e.g. "the hole is fully enclosed by the beam").
#[derive(Clone)]
pub struct PriorSpec {
    names: Vec<String>,
    dists: Vec<Distribution>,
    admissible: Option<AdmissibilityFn>,
}

impl fmt::Debug for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PriorSpec")
            .field("names", &self.names)
            .field("dists", &self.dists)
            .field("admissible", &self.admissible.is_some())
            .finish()
    }
}

impl PriorSpec {
    /// Builds a prior from `(name, distribution)` pairs.
    ///
    /// # Errors
    /// [`Error::InvalidParameter`] for an empty list or invalid distribution.
    pub fn new<N: Into<String>>(params: Vec<(N, Distribution)>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidParameter(
                "prior needs at least one parameter".into(),
            ));
        }
        let mut names = Vec::with_capacity(params.len());
        let mut dists = Vec::with_capacity(params.len());
        for (name, dist) in params {
            dist.validate()?;
            names.push(name.into());
            dists.push(dist);
        }
        Ok(PriorSpec {
            names,
            dists,
            admissible: None,
        })
    }

    /// Conditions the prior on a joint admissibility predicate: the
    /// log-density is `−∞` where it fails, and sampling rejects against it.
    #[must_use]
    pub fn with_admissibility(mut self, predicate: AdmissibilityFn) -> Self {
        self.admissible = Some(predicate);
        self
    }

    /// Number of parameters.
    pub fn dim(&self) -> usize {
        self.dists.len()
    }

    /// Parameter names, in sampling order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Per-parameter distributions.
    pub fn distributions(&self) -> &[Distribution] {
        &self.dists
    }

    /// Joint log-density at `theta` (up to the admissibility normalization
    /// constant); `−∞` outside the support or where the predicate fails.
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        assert_eq!(theta.len(), self.dim(), "parameter dimension mismatch");
        let mut sum = 0.0;
        for (dist, &x) in self.dists.iter().zip(theta) {
            let lp = dist.log_pdf(x);
            if lp == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            sum += lp;
        }
        if let Some(pred) = &self.admissible {
            if !pred(theta) {
                return f64::NEG_INFINITY;
            }
        }
        sum
    }

    /// Draws an admissible parameter vector by rejection.
    ///
    /// # Errors
    /// [`Error::ChainInit`] when 10⁴ draws all fail the predicate.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        for _ in 0..INIT_ATTEMPTS {
            let draw: Vec<f64> = self.dists.iter().map(|d| d.sample(rng)).collect();
            match &self.admissible {
                Some(pred) if !pred(&draw) => continue,
                _ => return Ok(draw),
            }
        }
        Err(Error::ChainInit(format!(
            "no admissible prior draw in {INIT_ATTEMPTS} attempts"
        )))
    }

    /// Per-parameter proposal standard deviations: the prior's own stds
    /// (the proposal starts as a Gaussian matching the prior's moments).
    pub fn proposal_sigmas(&self) -> Vec<f64> {
        self.dists.iter().map(|d| d.variance().sqrt()).collect()
    }
}

/// A log-likelihood evaluator over parameter vectors.
pub trait LogLikelihood: Sync {
    /// Untempered log-likelihood at `theta`. Stochastic estimators draw
    /// their randomness from `rng`.
    ///
    /// # Errors
    /// Recoverable geometry/estimate failures ([`Error::InadmissibleHole`],
    /// [`Error::TriangulationFailed`], [`Error::PerturbationFailed`],
    /// [`Error::LikelihoodEvaluation`]) reject the proposal; anything else
    /// aborts the chain.
    fn log_likelihood(&self, theta: &[f64], rng: &mut ChaCha8Rng) -> Result<f64>;

    /// Whether evaluations are randomized (pseudomarginal estimates). The
    /// sampler re-estimates the current state's likelihood every step when
    /// true, alongside the proposal's.
    fn is_stochastic(&self) -> bool {
        false
    }
}

impl<F> LogLikelihood for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn log_likelihood(&self, theta: &[f64], _rng: &mut ChaCha8Rng) -> Result<f64> {
        Ok(self(theta))
    }
}

/// Whether a likelihood error rejects the proposal instead of aborting.
fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::InadmissibleHole(_)
            | Error::TriangulationFailed(_)
            | Error::PerturbationFailed { .. }
            | Error::LikelihoodEvaluation(_)
    )
}

/// Tempered log-target `log p(θ) + τ · log p(y|θ)`; `−∞` prior dominates
/// (at `τ = 0` the likelihood is ignored entirely, so a failed evaluation
/// cannot poison the target with `0 · −∞`).
pub fn tempered_log_target(log_prior: f64, log_likelihood: f64, tau: f64) -> f64 {
    if log_prior == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if tau == 0.0 {
        log_prior
    } else {
        log_prior + tau * log_likelihood
    }
}

/// Metropolis acceptance probability `min(1, exp(log_ratio))`.
pub fn acceptance_probability(log_ratio: f64) -> f64 {
    if log_ratio.is_nan() {
        return 0.0;
    }
    log_ratio.min(0.0).exp()
}

/// Symmetric-proposal Metropolis accept/reject decision. A uniform draw is
/// consumed unconditionally so the random stream advances deterministically.
pub fn metropolis_accept(log_ratio: f64, rng: &mut ChaCha8Rng) -> bool {
    rng.random::<f64>() < acceptance_probability(log_ratio)
}

/// Random-walk Metropolis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    /// Burn-in length (tempered, adaptive); discarded.
    pub n_burn: usize,
    /// Retained sample count.
    pub n: usize,
    /// RNG seed for the whole chain (proposals, acceptances, replicas).
    pub seed: u64,
    /// Adaptation target acceptance rate.
    pub target_acceptance: f64,
    /// Steps per acceptance-rate estimation window.
    pub adaptation_window: usize,
    /// Robbins–Monro decay exponent for the adaptation gain `w^{-decay}`.
    pub adaptation_decay: f64,
    /// Initial global proposal scale multiplying the prior stds.
    pub initial_scale: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_burn: 10_000,
            n: 10_000,
            seed: 0,
            target_acceptance: 0.234,
            adaptation_window: 100,
            adaptation_decay: 0.6,
            initial_scale: 1.0,
        }
    }
}

impl ChainConfig {
    /// Checks the sample counts and adaptation settings.
    ///
    /// # Errors
    /// [`Error::InvalidParameter`] describing the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.n_burn == 0 || self.n == 0 {
            return Err(Error::InvalidParameter(format!(
                "chain lengths must be at least 1, got n_burn = {}, n = {}",
                self.n_burn, self.n
            )));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "target acceptance must lie in (0, 1), got {}",
                self.target_acceptance
            )));
        }
        if self.adaptation_window == 0 {
            return Err(Error::InvalidParameter(
                "adaptation window must be at least 1".into(),
            ));
        }
        if !(self.initial_scale > 0.0) || !(self.adaptation_decay > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale and decay must be positive, got scale = {}, decay = {}",
                self.initial_scale, self.adaptation_decay
            )));
        }
        Ok(())
    }
}

/// The retained posterior sample with sampling diagnostics.
#[derive(Debug, Clone)]
pub struct Chain {
    /// Retained samples, one row per step.
    pub samples: DMatrix<f64>,
    /// Log-posterior kernel (`τ = 1`) of each retained sample.
    pub log_posterior: Vec<f64>,
    /// Accepted proposals during the retained phase.
    pub accepted: usize,
    /// Frozen global proposal scale used for the retained phase.
    pub final_scale: f64,
    /// Per-parameter proposal stds (the prior stds); the proposal
    /// covariance is `final_scale² · diag(proposal_sigmas)²`.
    pub proposal_sigmas: Vec<f64>,
    /// Temperature `τ_t` of every burn-in step.
    pub temperatures: Vec<f64>,
    /// Acceptance rate of each completed burn-in adaptation window.
    pub burnin_window_rates: Vec<f64>,
    /// Parameter names (column order of `samples`).
    pub names: Vec<String>,
    /// The configuration the chain ran with.
    pub config: ChainConfig,
}

impl Chain {
    /// Number of retained samples.
    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    /// Whether the chain holds no samples.
    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    /// Parameter dimension.
    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    /// Retained-phase acceptance rate.
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.len() as f64
    }

    /// Per-parameter sample means.
    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.samples.column(j).mean())
            .collect()
    }

    /// Per-parameter sample standard deviations (unbiased).
    pub fn std(&self) -> Vec<f64> {
        let means = self.mean();
        (0..self.dim())
            .map(|j| {
                let col = self.samples.column(j);
                let ss: f64 = col.iter().map(|v| (v - means[j]).powi(2)).sum();
                (ss / (self.len() as f64 - 1.0)).sqrt()
            })
            .collect()
    }

    /// Per-parameter quantile at level `q ∈ [0, 1]` (linear interpolation).
    pub fn quantile(&self, q: f64) -> Vec<f64> {
        assert!((0.0..=1.0).contains(&q), "quantile level out of range");
        (0..self.dim())
            .map(|j| {
                let mut col: Vec<f64> = self.samples.column(j).iter().copied().collect();
                col.sort_by(f64::total_cmp);
                let pos = q * (col.len() - 1) as f64;
                let lo = pos.floor() as usize;
                let frac = pos - lo as f64;
                if lo + 1 < col.len() {
                    col[lo] * (1.0 - frac) + col[lo + 1] * frac
                } else {
                    col[lo]
                }
            })
            .collect()
    }

    /// Sample Pearson correlation between parameters `i` and `j`.
    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        let means = self.mean();
        let (ci, cj) = (self.samples.column(i), self.samples.column(j));
        let mut num = 0.0;
        let mut di = 0.0;
        let mut dj = 0.0;
        for k in 0..self.len() {
            let (a, b) = (ci[k] - means[i], cj[k] - means[j]);
            num += a * b;
            di += a * a;
            dj += b * b;
        }
        num / (di * dj).sqrt()
    }

    /// Writes the chain as CSV: a header row with the parameter names plus
    /// `log_posterior`, then one sample per line.
    ///
    /// # Errors
    /// I/O errors from the writer.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},log_posterior", self.names.join(","))?;
        for row in 0..self.len() {
            for j in 0..self.dim() {
                write!(w, "{:.17e},", self.samples[(row, j)])?;
            }
            writeln!(w, "{:.17e}", self.log_posterior[row])?;
        }
        Ok(())
    }

    /// Posterior summary: means, stds, quantiles, acceptance rate, seed,
    /// and a config echo.
    pub fn summary_json(&self) -> serde_json::Value {
        let means = self.mean();
        let stds = self.std();
        let q025 = self.quantile(0.025);
        let q05 = self.quantile(0.05);
        let q25 = self.quantile(0.25);
        let q50 = self.quantile(0.5);
        let q75 = self.quantile(0.75);
        let q95 = self.quantile(0.95);
        let q975 = self.quantile(0.975);
        let per_param: serde_json::Map<String, serde_json::Value> = self
            .names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                (
                    name.clone(),
                    serde_json::json!({
                        "mean": means[j],
                        "std": stds[j],
                        "q025": q025[j],
                        "q05": q05[j],
                        "q25": q25[j],
                        "q50": q50[j],
                        "q75": q75[j],
                        "q95": q95[j],
                        "q975": q975[j],
                    }),
                )
            })
            .collect();
        serde_json::json!({
            "parameters": per_param,
            "names": self.names,
            "acceptance_rate": self.acceptance_rate(),
            "n_samples": self.len(),
            "seed": self.config.seed,
            "final_scale": self.final_scale,
            "config": self.config,
        })
    }
}

/// One Metropolis step: propose, evaluate, accept or reject in place.
/// Returns whether the proposal was accepted.
#[allow(clippy::too_many_arguments)]
fn mh_step<L: LogLikelihood + ?Sized>(
    likelihood: &L,
    prior: &PriorSpec,
    sigmas: &[f64],
    scale: f64,
    tau: f64,
    theta: &mut Vec<f64>,
    lp_cur: &mut f64,
    ll_cur: &mut f64,
    rng: &mut ChaCha8Rng,
) -> Result<bool> {
    let mut cand = theta.clone();
    for (c, s) in cand.iter_mut().zip(sigmas) {
        let z: f64 = rng.sample(StandardNormal);
        *c += scale * s * z;
    }
    let lp_new = prior.log_density(&cand);
    let mut ll_new = f64::NEG_INFINITY;
    let mut log_ratio = f64::NEG_INFINITY;
    if lp_new > f64::NEG_INFINITY {
        match likelihood.log_likelihood(&cand, rng) {
            Ok(v) => {
                ll_new = v;
                log_ratio = tempered_log_target(lp_new, ll_new, tau)
                    - tempered_log_target(*lp_cur, *ll_cur, tau);
            }
            Err(e) if recoverable(&e) => {}
            Err(e) => return Err(e),
        }
    }
    let accept = metropolis_accept(log_ratio, rng);
    if accept {
        *theta = cand;
        *lp_cur = lp_new;
        *ll_cur = ll_new;
    }
    Ok(accept)
}

/// Re-estimates the current state's stochastic likelihood; keeps the old
/// estimate when the refresh fails recoverably.
fn refresh_current<L: LogLikelihood + ?Sized>(
    likelihood: &L,
    theta: &[f64],
    ll_cur: &mut f64,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    match likelihood.log_likelihood(theta, rng) {
        Ok(v) => {
            *ll_cur = v;
            Ok(())
        }
        Err(e) if recoverable(&e) => Ok(()),
        Err(e) => Err(e),
    }
}

/// Runs a random-walk Metropolis chain: `n_burn` tempered steps with
/// `τ_t = t/(n_burn − 1)` and Robbins–Monro scale adaptation on windowed
/// acceptance rates, then `n` retained steps with the scale frozen and
/// `τ = 1`. Proposals are Gaussian with covariance
/// `scale² · diag(prior variances)`, initialized at `scale = 1` per the
/// "proposal matches the prior moments" convention.
///
/// For stochastic likelihoods (pseudomarginal RM-FEM) the current state's
/// estimate is refreshed with new randomness every step, alongside the
/// proposal's.
///
/// # Errors
/// [`Error::ChainInit`] when no evaluable starting point is found in 10⁴
/// prior draws; non-recoverable likelihood errors abort the chain.
pub fn run_chain<L: LogLikelihood + ?Sized>(
    likelihood: &L,
    prior: &PriorSpec,
    config: &ChainConfig,
) -> Result<Chain> {
    config.validate()?;
    let dim = prior.dim();
    let sigmas = prior.proposal_sigmas();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Find a start that is admissible *and* evaluable (a prior draw may be
    // unmeshable even when admissible).
    let mut start = None;
    for _ in 0..INIT_ATTEMPTS {
        let cand = prior.sample(&mut rng)?;
        match likelihood.log_likelihood(&cand, &mut rng) {
            Ok(v) => {
                start = Some((cand, v));
                break;
            }
            Err(e) if recoverable(&e) => continue,
            Err(e) => return Err(e),
        }
    }
    let (mut theta, mut ll_cur) = start.ok_or_else(|| {
        Error::ChainInit(format!(
            "no evaluable starting point in {INIT_ATTEMPTS} prior draws"
        ))
    })?;
    let mut lp_cur = prior.log_density(&theta);

    let mut scale = config.initial_scale;
    let mut temperatures = Vec::with_capacity(config.n_burn);
    let mut burnin_window_rates = Vec::new();
    let mut window_accepts = 0usize;
    let mut window_steps = 0usize;
    let mut windows_done = 0usize;

    for t in 0..config.n_burn {
        let tau = if config.n_burn > 1 {
            t as f64 / (config.n_burn - 1) as f64
        } else {
            1.0
        };
        temperatures.push(tau);
        if likelihood.is_stochastic() {
            refresh_current(likelihood, &theta, &mut ll_cur, &mut rng)?;
        }
        let accepted = mh_step(
            likelihood, prior, &sigmas, scale, tau, &mut theta, &mut lp_cur, &mut ll_cur, &mut rng,
        )?;
        window_accepts += usize::from(accepted);
        window_steps += 1;
        if window_steps == config.adaptation_window {
            windows_done += 1;
            let rate = window_accepts as f64 / window_steps as f64;
            burnin_window_rates.push(rate);
            let gain = (windows_done as f64).powf(-config.adaptation_decay);
            scale *= (gain * (rate - config.target_acceptance)).exp();
            window_accepts = 0;
            window_steps = 0;
        }
    }

    // Retained phase: frozen scale, full likelihood.
    let final_scale = scale;
    let mut samples = DMatrix::zeros(config.n, dim);
    let mut log_posterior = Vec::with_capacity(config.n);
    let mut accepted_count = 0usize;
    for row in 0..config.n {
        if likelihood.is_stochastic() {
            refresh_current(likelihood, &theta, &mut ll_cur, &mut rng)?;
        }
        let accepted = mh_step(
            likelihood,
            prior,
            &sigmas,
            final_scale,
            1.0,
            &mut theta,
            &mut lp_cur,
            &mut ll_cur,
            &mut rng,
        )?;
        accepted_count += usize::from(accepted);
        for (j, &v) in theta.iter().enumerate() {
            samples[(row, j)] = v;
        }
        log_posterior.push(tempered_log_target(lp_cur, ll_cur, 1.0));
    }

    Ok(Chain {
        samples,
        log_posterior,
        accepted: accepted_count,
        final_scale,
        proposal_sigmas: sigmas,
        temperatures,
        burnin_window_rates,
        names: prior.names().to_vec(),
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::distribution::ContinuousCDF;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn mvn_logpdf_standard_normal() {
        let y = DVector::from_element(1, 0.0);
        let mean = DVector::from_element(1, 0.0);
        let cov = DMatrix::from_element(1, 1, 1.0);
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert_relative_eq!(mvn_logpdf(&y, &mean, &cov).unwrap(), expected, epsilon = 1e-15);
    }

    #[test]
    fn mvn_logpdf_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let m = 5;
            let a = DMatrix::from_fn(m, m, |_, _| rng.random::<f64>() - 0.5);
            let cov = &a * a.transpose() + DMatrix::identity(m, m) * 0.1;
            let mean = DVector::from_fn(m, |_, _| rng.random::<f64>());
            let y = DVector::from_fn(m, |_, _| rng.random::<f64>());
            let inv = cov.clone().try_inverse().unwrap();
            let diff = &y - &mean;
            let expected = -0.5
                * (m as f64 * (2.0 * std::f64::consts::PI).ln()
                    + cov.determinant().ln()
                    + diff.dot(&(&inv * &diff)));
            assert_relative_eq!(
                mvn_logpdf(&y, &mean, &cov).unwrap(),
                expected,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn mvn_logpdf_rejects_bad_inputs() {
        let y = DVector::from_element(2, 0.0);
        let mean = DVector::from_element(3, 0.0);
        let cov = DMatrix::identity(2, 2);
        assert!(matches!(
            mvn_logpdf(&y, &mean, &cov),
            Err(Error::ObservationMismatch(_))
        ));
        let mean2 = DVector::from_element(2, 0.0);
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            mvn_logpdf(&y, &mean2, &indefinite),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn distribution_densities_match_statrs() {
        let ln = Distribution::LogNormal { mu: 0.3, sigma: 0.4 };
        let oracle = statrs::distribution::LogNormal::new(0.3, 0.4).unwrap();
        for x in [0.2, 0.9, 1.5, 3.0] {
            assert_relative_eq!(
                ln.log_pdf(x),
                statrs::distribution::Continuous::ln_pdf(&oracle, x),
                epsilon = 1e-12
            );
        }
        assert_eq!(ln.log_pdf(0.0), f64::NEG_INFINITY);
        assert_eq!(ln.log_pdf(-1.0), f64::NEG_INFINITY);

        let u = Distribution::Uniform { a: 0.0, b: 1.0 };
        assert_eq!(u.log_pdf(0.5), 0.0);
        assert_eq!(u.log_pdf(1.5), f64::NEG_INFINITY);
        assert_eq!(u.log_pdf(-0.1), f64::NEG_INFINITY);

        assert!(Distribution::LogNormal { mu: 0.0, sigma: 0.0 }.validate().is_err());
        assert!(Distribution::Uniform { a: 1.0, b: 1.0 }.validate().is_err());
    }

    #[test]
    fn lognormal_interval_mass_matches_paper_quote() {
        // LogNormal(log 1, 0.1): 95.3% of the mass lies in [0.8, 1.2].
        let oracle = statrs::distribution::LogNormal::new(0.0, 0.1).unwrap();
        let mass = oracle.cdf(1.2) - oracle.cdf(0.8);
        assert_relative_eq!(mass, 0.953038, epsilon = 1e-6);

        // Monte Carlo from our sampler agrees.
        let dist = Distribution::LogNormal { mu: 0.0, sigma: 0.1 };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| {
                let x = dist.sample(&mut rng);
                (0.8..=1.2).contains(&x)
            })
            .count();
        let frac = hits as f64 / n as f64;
        assert!((frac - mass).abs() < 3.0 * (mass * (1.0 - mass) / n as f64).sqrt() + 1e-4);
    }

    #[test]
    fn conditioned_prior_sampling_respects_predicate() {
        let prior = PriorSpec::new(vec![
            ("x", Distribution::Uniform { a: 0.0, b: 1.0 }),
            ("y", Distribution::Uniform { a: 0.0, b: 1.0 }),
        ])
        .unwrap()
        .with_admissibility(Arc::new(|t: &[f64]| t[0] + t[1] < 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let draw = prior.sample(&mut rng).unwrap();
            assert!(draw[0] + draw[1] < 1.0);
        }
        assert_eq!(prior.log_density(&[0.9, 0.9]), f64::NEG_INFINITY);
        assert!(prior.log_density(&[0.2, 0.3]).is_finite());

        let impossible = prior
            .clone()
            .with_admissibility(Arc::new(|_: &[f64]| false));
        assert!(matches!(
            impossible.sample(&mut rng),
            Err(Error::ChainInit(_))
        ));
    }

    #[test]
    fn tempered_target_identities() {
        assert_eq!(tempered_log_target(-1.0, -7.0, 0.0), -1.0);
        assert_eq!(tempered_log_target(-1.0, -7.0, 1.0), -8.0);
        assert_relative_eq!(
            tempered_log_target(-1.0, -7.0, 0.5),
            -4.5,
            epsilon = 1e-15
        );
        // −∞ prior dominates; τ = 0 must ignore a −∞ likelihood.
        assert_eq!(
            tempered_log_target(f64::NEG_INFINITY, -7.0, 0.5),
            f64::NEG_INFINITY
        );
        assert_eq!(tempered_log_target(-1.0, f64::NEG_INFINITY, 0.0), -1.0);
        assert_eq!(
            tempered_log_target(-1.0, f64::NEG_INFINITY, 0.5),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn acceptance_probability_limits() {
        assert_eq!(acceptance_probability(0.0), 1.0);
        assert_eq!(acceptance_probability(3.0), 1.0);
        assert_relative_eq!(acceptance_probability(-1.0), (-1.0f64).exp());
        assert_eq!(acceptance_probability(f64::NEG_INFINITY), 0.0);
        assert_eq!(acceptance_probability(f64::NAN), 0.0);
    }

    /// Flat likelihood: the chain must sample the prior itself.
    fn flat(_theta: &[f64]) -> f64 {
        0.0
    }

    fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        samples
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max((f - (i as f64 + 1.0) / n).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn prior_recovery_by_ks() {
        let prior = PriorSpec::new(vec![
            ("ea", Distribution::LogNormal { mu: 0.0, sigma: 0.1 }),
            ("r", Distribution::Uniform { a: 0.0, b: 0.5 }),
        ])
        .unwrap();
        let config = ChainConfig {
            n_burn: 2_000,
            n: 40_000,
            seed: 31,
            ..ChainConfig::default()
        };
        let chain = run_chain(&flat, &prior, &config).unwrap();

        let lognormal = statrs::distribution::LogNormal::new(0.0, 0.1).unwrap();
        let mut col0: Vec<f64> = chain.samples.column(0).iter().copied().collect();
        let d0 = ks_statistic(&mut col0, |x| lognormal.cdf(x));
        assert!(d0 < 0.02, "log-normal marginal KS = {d0}");

        let mut col1: Vec<f64> = chain.samples.column(1).iter().copied().collect();
        let d1 = ks_statistic(&mut col1, |x| (x / 0.5).clamp(0.0, 1.0));
        assert!(d1 < 0.02, "uniform marginal KS = {d1}");
    }

    /// Standard 2D Gaussian log-likelihood.
    fn standard_gaussian(theta: &[f64]) -> f64 {
        -0.5 * theta.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn gaussian_target_calibration_and_acceptance_window() {
        let prior = PriorSpec::new(vec![
            ("x", Distribution::Uniform { a: -10.0, b: 10.0 }),
            ("y", Distribution::Uniform { a: -10.0, b: 10.0 }),
        ])
        .unwrap();
        let config = ChainConfig {
            n_burn: 20_000,
            n: 40_000,
            seed: 5,
            ..ChainConfig::default()
        };
        let chain = run_chain(&standard_gaussian, &prior, &config).unwrap();

        let mean = chain.mean();
        assert!(mean[0].abs() < 0.05, "mean x = {}", mean[0]);
        assert!(mean[1].abs() < 0.05, "mean y = {}", mean[1]);
        let std = chain.std();
        for j in 0..2 {
            let var = std[j] * std[j];
            assert!((var - 1.0).abs() < 0.1, "variance[{j}] = {var}");
        }
        let cross = chain.correlation(0, 1) * std[0] * std[1];
        assert!(cross.abs() < 0.1, "covariance = {cross}");

        // Adaptation drives the late burn-in windows into a healthy range
        // (averaged over the last ten windows to damp binomial noise).
        let rates = &chain.burnin_window_rates;
        let tail = &rates[rates.len() - 10..];
        let late = tail.iter().sum::<f64>() / tail.len() as f64;
        assert!(
            (0.15..=0.40).contains(&late),
            "late burn-in acceptance {late}"
        );
    }

    #[test]
    fn three_state_stationarity_with_same_acceptance_rule() {
        // Discrete analogue: target π = (0.2, 0.3, 0.5), proposal = uniform
        // over the two other states (symmetric). Uses the exact same
        // `metropolis_accept` as the continuous sampler.
        let pi = [0.2f64, 0.3, 0.5];
        let ln_pi = [pi[0].ln(), pi[1].ln(), pi[2].ln()];
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut state = 0usize;
        let mut counts = [0usize; 3];
        let steps = 4_000_000usize;
        for _ in 0..steps {
            let offset = 1 + (rng.random::<f64>() * 2.0) as usize;
            let proposal = (state + offset) % 3;
            if metropolis_accept(ln_pi[proposal] - ln_pi[state], &mut rng) {
                state = proposal;
            }
            counts[state] += 1;
        }
        for s in 0..3 {
            let freq = counts[s] as f64 / steps as f64;
            assert!(
                (freq - pi[s]).abs() < 1.5e-3,
                "state {s}: frequency {freq} vs target {}",
                pi[s]
            );
        }
    }

    #[test]
    fn chains_are_reproducible_and_seed_sensitive() {
        let prior = PriorSpec::new(vec![(
            "x",
            Distribution::Uniform { a: -5.0, b: 5.0 },
        )])
        .unwrap();
        let config = ChainConfig {
            n_burn: 500,
            n: 500,
            seed: 12,
            ..ChainConfig::default()
        };
        let a = run_chain(&standard_gaussian, &prior, &config).unwrap();
        let b = run_chain(&standard_gaussian, &prior, &config).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.log_posterior, b.log_posterior);
        assert_eq!(a.final_scale, b.final_scale);

        let other = ChainConfig { seed: 13, ..config };
        let c = run_chain(&standard_gaussian, &prior, &other).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn adaptation_freezes_after_burnin() {
        // If the retained phase adapted, a longer retained run would end
        // with a different scale than a short one (same seed and burn-in).
        let prior = PriorSpec::new(vec![(
            "x",
            Distribution::Uniform { a: -5.0, b: 5.0 },
        )])
        .unwrap();
        let short = ChainConfig {
            n_burn: 600,
            n: 1,
            seed: 9,
            ..ChainConfig::default()
        };
        let long = ChainConfig { n: 400, ..short.clone() };
        let a = run_chain(&standard_gaussian, &prior, &short).unwrap();
        let b = run_chain(&standard_gaussian, &prior, &long).unwrap();
        assert_eq!(a.final_scale.to_bits(), b.final_scale.to_bits());
        assert_eq!(a.temperatures, b.temperatures);
    }

    /// Likelihood that fails recoverably for `x > 0` ("unmeshable").
    struct HalfMeshable;
    impl LogLikelihood for HalfMeshable {
        fn log_likelihood(&self, theta: &[f64], _rng: &mut ChaCha8Rng) -> Result<f64> {
            if theta[0] > 0.0 {
                Err(Error::TriangulationFailed("synthetic".into()))
            } else {
                Ok(0.0)
            }
        }
    }

    #[test]
    fn recoverable_errors_reject_proposals() {
        let prior = PriorSpec::new(vec![(
            "x",
            Distribution::Uniform { a: -5.0, b: 5.0 },
        )])
        .unwrap();
        let config = ChainConfig {
            n_burn: 300,
            n: 1_000,
            seed: 3,
            ..ChainConfig::default()
        };
        let chain = run_chain(&HalfMeshable, &prior, &config).unwrap();
        for row in 0..chain.len() {
            assert!(chain.samples[(row, 0)] <= 0.0);
        }
        assert!(chain.accepted > 0);
    }

    /// Likelihood that aborts with a non-recoverable error on one call.
    struct AbortsLater {
        calls: AtomicUsize,
    }
    impl LogLikelihood for AbortsLater {
        fn log_likelihood(&self, _theta: &[f64], _rng: &mut ChaCha8Rng) -> Result<f64> {
            if self.calls.fetch_add(1, Ordering::SeqCst) == 40 {
                Err(Error::SingularSystem("synthetic".into()))
            } else {
                Ok(0.0)
            }
        }
    }

    #[test]
    fn non_recoverable_errors_abort() {
        let prior = PriorSpec::new(vec![(
            "x",
            Distribution::Uniform { a: -5.0, b: 5.0 },
        )])
        .unwrap();
        let config = ChainConfig {
            n_burn: 300,
            n: 300,
            seed: 3,
            ..ChainConfig::default()
        };
        let likelihood = AbortsLater {
            calls: AtomicUsize::new(0),
        };
        assert!(matches!(
            run_chain(&likelihood, &prior, &config),
            Err(Error::SingularSystem(_))
        ));
    }

    /// Likelihood that never evaluates: initialization must fail.
    struct NeverWorks;
    impl LogLikelihood for NeverWorks {
        fn log_likelihood(&self, _theta: &[f64], _rng: &mut ChaCha8Rng) -> Result<f64> {
            Err(Error::InadmissibleHole("synthetic".into()))
        }
    }

    #[test]
    fn initialization_failure_reports_chain_init() {
        let prior = PriorSpec::new(vec![(
            "x",
            Distribution::Uniform { a: -5.0, b: 5.0 },
        )])
        .unwrap();
        let config = ChainConfig {
            n_burn: 10,
            n: 10,
            seed: 3,
            ..ChainConfig::default()
        };
        assert!(matches!(
            run_chain(&NeverWorks, &prior, &config),
            Err(Error::ChainInit(_))
        ));
    }

    #[test]
    fn csv_and_summary_exports() {
        let prior = PriorSpec::new(vec![
            ("alpha", Distribution::Uniform { a: -5.0, b: 5.0 }),
            ("beta", Distribution::Uniform { a: -5.0, b: 5.0 }),
        ])
        .unwrap();
        let config = ChainConfig {
            n_burn: 200,
            n: 50,
            seed: 77,
            ..ChainConfig::default()
        };
        let chain = run_chain(&standard_gaussian, &prior, &config).unwrap();

        let mut buf = Vec::new();
        chain.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "alpha,beta,log_posterior");
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 50);
        let first: Vec<f64> = rows[0]
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(first.len(), 3);
        assert_relative_eq!(first[0], chain.samples[(0, 0)], epsilon = 1e-15);

        let summary = chain.summary_json();
        assert_eq!(summary["seed"], 77);
        assert_eq!(summary["n_samples"], 50);
        assert!(summary["parameters"]["alpha"]["mean"].is_f64());
        assert!(summary["parameters"]["beta"]["q95"].is_f64());
        assert_eq!(summary["config"]["n_burn"], 200);
        let rate = summary["acceptance_rate"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&rate));
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let samples = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let chain = Chain {
            samples,
            log_posterior: vec![0.0; 5],
            accepted: 0,
            final_scale: 1.0,
            proposal_sigmas: vec![1.0],
            temperatures: vec![],
            burnin_window_rates: vec![],
            names: vec!["x".into()],
            config: ChainConfig::default(),
        };
        assert_relative_eq!(chain.quantile(0.0)[0], 1.0);
        assert_relative_eq!(chain.quantile(0.5)[0], 3.0);
        assert_relative_eq!(chain.quantile(1.0)[0], 5.0);
        assert_relative_eq!(chain.quantile(0.125)[0], 1.5);
    }
}
