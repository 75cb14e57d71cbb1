//! Drivers for the two benchmark inverse problems: configuration parsing,
//! synthetic-data generation, likelihood selection, chain execution, and
//! result-bundle export/comparison.

pub mod pullout;
pub mod three_point;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::inference::{run_chain, Chain, ChainConfig, Distribution, LogLikelihood, PriorSpec};
use crate::{Error, Result};

/// The benchmark problem to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// 1D bar pullout: infer `(EA, k)` from one displacement observation.
    Pullout,
    /// 2D three-point bending: infer the hole `(x, y, d, α, r)` from 48
    /// boundary displacement observations.
    ThreePoint,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Problem::Pullout => "pullout",
            Problem::ThreePoint => "three_point",
        })
    }
}

/// The likelihood model driving the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Plain FEM likelihood (no discretization-error model).
    Fem,
    /// Bayesian FEM: hierarchical-refinement error covariance.
    Bfem,
    /// Random-mesh FEM as a pseudomarginal likelihood.
    Rmfem,
    /// statFEM: scaling plus Gaussian-process misspecification, inferred.
    Statfem,
    /// Closed-form forward model (pullout only); the reference posterior.
    Exact,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Fem => "fem",
            Method::Bfem => "bfem",
            Method::Rmfem => "rmfem",
            Method::Statfem => "statfem",
            Method::Exact => "exact",
        })
    }
}

/// An experiment description as read from a JSON config file. Unknown keys
/// are rejected; omitted optional fields take problem-dependent defaults
/// (see [`ExperimentConfig::resolve`]).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Benchmark problem.
    pub problem: Problem,
    /// Likelihood model.
    pub method: Method,
    /// Target mesh size `h` (pullout meshes have `round(1/h)` elements).
    pub h: f64,
    /// Sampler settings; defaults to `N_burn = N = 10⁴` for pullout and
    /// `N_burn = N = 2 000` for the three-point problem.
    #[serde(default)]
    pub chain: Option<ChainConfig>,
    /// Observation noise; defaults to `10⁻³` (pullout) or `10⁻⁴ m`
    /// (three-point).
    #[serde(default)]
    pub sigma_e: Option<f64>,
    /// Seed for synthetic-data noise (independent of the chain seed).
    #[serde(default)]
    pub data_seed: u64,
    /// Ground-truth parameters in canonical order: `[EA, k]` for pullout,
    /// `[x, y, d, alpha, r]` for three-point. Defaults to the benchmark
    /// values `(0.8, 70)` and `(1.0, 0.4, 0.4, π/6, 0.25)`.
    #[serde(default)]
    pub ground_truth: Option<Vec<f64>>,
    /// RM-FEM replica count `M`; defaults to 100 (pullout) or 10
    /// (three-point).
    #[serde(default)]
    pub replicas: Option<usize>,
    /// Mesh size for three-point data synthesis; defaults to `0.02 m`
    /// (`0.005 m` at paper scale). Ignored for pullout (closed form).
    #[serde(default)]
    pub data_h: Option<f64>,
    /// Output bundle directory; defaults to `runs/<problem>_<method>_h<h>`.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses a config from JSON text, rejecting unknown keys.
    ///
    /// # Errors
    /// [`Error::Config`] describing the parse failure.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid experiment config: {e}")))
    }

    /// Fills problem-dependent defaults and applies command-line overrides,
    /// producing a fully concrete experiment. `paper_scale` switches the
    /// three-point problem to the full-scale setup (`h = 0.05 m`,
    /// `N_burn = N = 10⁴`, data mesh `h = 0.005 m`); the pullout problem
    /// is cheap enough that its defaults are already full-scale. `seed`
    /// overrides the chain seed only, so a seed sweep reuses identical data.
    ///
    /// # Errors
    /// [`Error::Config`] for invalid or inconsistent settings.
    pub fn resolve(
        &self,
        paper_scale: bool,
        seed: Option<u64>,
        out_dir: Option<PathBuf>,
    ) -> Result<ResolvedExperiment> {
        if self.method == Method::Exact && self.problem != Problem::Pullout {
            return Err(Error::Config(
                "the exact method requires a closed-form solution and is only \
                 available for the pullout problem"
                    .into(),
            ));
        }
        let mut h = self.h;
        let mut chain = self.chain.clone().unwrap_or_else(|| match self.problem {
            Problem::Pullout => ChainConfig::default(),
            Problem::ThreePoint => ChainConfig {
                n_burn: 2_000,
                n: 2_000,
                ..ChainConfig::default()
            },
        });
        let mut data_h = match self.problem {
            Problem::Pullout => None,
            Problem::ThreePoint => Some(self.data_h.unwrap_or(0.02)),
        };
        if paper_scale && self.problem == Problem::ThreePoint {
            h = 0.05;
            chain.n_burn = 10_000;
            chain.n = 10_000;
            data_h = Some(0.005);
        }
        if let Some(s) = seed {
            chain.seed = s;
        }
        chain.validate()?;
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Config(format!("mesh size h must be positive, got {h}")));
        }
        if self.problem == Problem::Pullout {
            let n = (1.0 / h).round();
            if n < 1.0 || (1.0 / h - n).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "pullout mesh size must divide the unit bar, got h = {h}"
                )));
            }
        }
        let sigma_e = self.sigma_e.unwrap_or(match self.problem {
            Problem::Pullout => 1e-3,
            Problem::ThreePoint => 1e-4,
        });
        if !(sigma_e > 0.0) || !sigma_e.is_finite() {
            return Err(Error::Config(format!(
                "observation noise must be positive, got {sigma_e}"
            )));
        }
        let ground_truth = self.ground_truth.clone().unwrap_or_else(|| match self.problem {
            Problem::Pullout => pullout::GROUND_TRUTH.to_vec(),
            Problem::ThreePoint => three_point::ground_truth_vector().to_vec(),
        });
        let expected = match self.problem {
            Problem::Pullout => 2,
            Problem::ThreePoint => 5,
        };
        if ground_truth.len() != expected || ground_truth.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "{} ground truth needs {expected} finite values, got {ground_truth:?}",
                self.problem
            )));
        }
        let replicas = self.replicas.unwrap_or(match self.problem {
            Problem::Pullout => 100,
            Problem::ThreePoint => 10,
        });
        if replicas == 0 {
            return Err(Error::Config("replica count must be at least 1".into()));
        }
        let out_dir = out_dir
            .or_else(|| self.out_dir.clone())
            .unwrap_or_else(|| default_out_dir(self.problem, self.method, h));
        Ok(ResolvedExperiment {
            problem: self.problem,
            method: self.method,
            h,
            chain,
            sigma_e,
            data_seed: self.data_seed,
            ground_truth,
            replicas,
            data_h,
            out_dir,
        })
    }
}

fn default_out_dir(problem: Problem, method: Method, h: f64) -> PathBuf {
    PathBuf::from(format!("runs/{problem}_{method}_h{}", format!("{h}").replace('.', "p")))
}

/// A fully concrete experiment: every default resolved, ready to run.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedExperiment {
    /// Benchmark problem.
    pub problem: Problem,
    /// Likelihood model.
    pub method: Method,
    /// Mesh size.
    pub h: f64,
    /// Sampler settings.
    pub chain: ChainConfig,
    /// Observation noise.
    pub sigma_e: f64,
    /// Data-synthesis seed.
    pub data_seed: u64,
    /// Ground-truth parameter vector (canonical order).
    pub ground_truth: Vec<f64>,
    /// RM-FEM replica count.
    pub replicas: usize,
    /// Data-synthesis mesh size (three-point only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_h: Option<f64>,
    /// Bundle directory (not part of the config hash).
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl ResolvedExperiment {
    /// SHA-256 of the canonical JSON form (excludes the output directory).
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("resolved config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// SHA-256 over the little-endian bytes of an observation vector.
pub fn data_hash(y: &DVector<f64>) -> String {
    let mut hasher = Sha256::new();
    for v in y.iter() {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Generates the synthetic observations for an experiment: the closed-form
/// pullout displacement at `x = 1`, or a fine-mesh (`data_h`) three-point
/// solve at the 24 sensors, plus i.i.d. `N(0, σ_e²)` noise drawn from
/// `data_seed`. A fixed seed yields a fixed `y`.
///
/// # Errors
/// Forward-model errors (inadmissible or unmeshable ground truth, solver
/// failures) propagate.
pub fn synthesize_observations(exp: &ResolvedExperiment) -> Result<DVector<f64>> {
    match exp.problem {
        Problem::Pullout => pullout::observations(&exp.ground_truth, exp.sigma_e, exp.data_seed),
        Problem::ThreePoint => three_point::observations(
            &exp.ground_truth,
            exp.sigma_e,
            exp.data_h.unwrap_or(0.02),
            exp.data_seed,
        ),
    }
}

/// Builds the prior and likelihood for an experiment over the given data.
///
/// # Errors
/// [`Error::Config`] for inconsistent settings.
pub fn build_model(
    exp: &ResolvedExperiment,
    y: &DVector<f64>,
) -> Result<(PriorSpec, Box<dyn LogLikelihood>)> {
    match exp.problem {
        Problem::Pullout => {
            let prior = pullout::prior(exp.method, exp.sigma_e)?;
            let like = pullout::PulloutLikelihood::new(exp.method, exp.h, y.clone(), exp.sigma_e, exp.replicas)?;
            Ok((prior, Box::new(like)))
        }
        Problem::ThreePoint => {
            let prior = three_point::prior(exp.method, exp.sigma_e)?;
            let like = three_point::ThreePointLikelihood::new(
                exp.method,
                exp.h,
                y.clone(),
                exp.sigma_e,
                exp.replicas,
            )?;
            Ok((prior, Box::new(like)))
        }
    }
}

/// Runs the full experiment — data synthesis, chain, bundle export — and
/// returns the chain together with the bundle directory.
///
/// # Errors
/// Any module error aborts with its structured diagnostic.
pub fn run_experiment(exp: &ResolvedExperiment) -> Result<(Chain, PathBuf)> {
    let y = synthesize_observations(exp)?;
    let (prior, likelihood) = build_model(exp, &y)?;
    let chain = run_chain(likelihood.as_ref(), &prior, &exp.chain)?;
    write_bundle(exp, &y, &prior, &chain)?;
    Ok((chain, exp.out_dir.clone()))
}

/// Per-parameter histogram range: the prior support for uniforms, the
/// central `±4σ` log-range for log-normals.
fn marginal_range(dist: &Distribution) -> (f64, f64) {
    match *dist {
        Distribution::Uniform { a, b } => (a, b),
        Distribution::LogNormal { mu, sigma } => ((mu - 4.0 * sigma).exp(), (mu + 4.0 * sigma).exp()),
    }
}

/// Writes one 50-bin histogram CSV: `bin_lo,bin_hi,count,density`.
fn write_marginal(path: &Path, samples: &[f64], range: (f64, f64)) -> Result<()> {
    const BINS: usize = 50;
    let (lo, hi) = range;
    let width = (hi - lo) / BINS as f64;
    let mut counts = [0usize; BINS];
    for &x in samples {
        if x >= lo && x <= hi {
            let b = (((x - lo) / width) as usize).min(BINS - 1);
            counts[b] += 1;
        }
    }
    let n = samples.len() as f64;
    let mut text = String::from("bin_lo,bin_hi,count,density\n");
    for (b, &c) in counts.iter().enumerate() {
        let left = lo + b as f64 * width;
        use std::fmt::Write;
        writeln!(
            text,
            "{:.12e},{:.12e},{},{:.12e}",
            left,
            left + width,
            c,
            c as f64 / (n * width)
        )
        .expect("string write");
    }
    fs::write(path, text)?;
    Ok(())
}

/// Writes the pullout `(EA, k)` kernel-density grid: a 50×50 Gaussian
/// product KDE with Silverman bandwidths over the prior ranges, as
/// `ea,k,density` rows.
fn write_kde(path: &Path, chain: &Chain, ranges: [(f64, f64); 2]) -> Result<()> {
    const GRID: usize = 50;
    let n = chain.len();
    let stds = chain.std();
    let bw: Vec<f64> = stds[..2]
        .iter()
        .map(|s| s * (n as f64).powf(-1.0 / 6.0))
        .collect();
    let xs: Vec<f64> = (0..GRID)
        .map(|i| ranges[0].0 + (ranges[0].1 - ranges[0].0) * (i as f64 + 0.5) / GRID as f64)
        .collect();
    let ys: Vec<f64> = (0..GRID)
        .map(|i| ranges[1].0 + (ranges[1].1 - ranges[1].0) * (i as f64 + 0.5) / GRID as f64)
        .collect();
    let norm = 1.0 / (n as f64 * 2.0 * std::f64::consts::PI * bw[0] * bw[1]);
    let mut text = String::from("ea,k,density\n");
    for &x in &xs {
        for &y in &ys {
            let mut density = 0.0;
            for row in 0..n {
                let dx = (x - chain.samples[(row, 0)]) / bw[0];
                let dy = (y - chain.samples[(row, 1)]) / bw[1];
                density += (-0.5 * (dx * dx + dy * dy)).exp();
            }
            use std::fmt::Write;
            writeln!(text, "{x:.12e},{y:.12e},{:.12e}", density * norm).expect("string write");
        }
    }
    fs::write(path, text)?;
    Ok(())
}

/// Writes the result bundle: `chain.csv`, `summary.json`,
/// `marginals/<param>.csv`, `meta.json`, and for pullout `kde.csv`.
///
/// # Errors
/// I/O errors; see [`run_experiment`].
pub fn write_bundle(
    exp: &ResolvedExperiment,
    y: &DVector<f64>,
    prior: &PriorSpec,
    chain: &Chain,
) -> Result<()> {
    let dir = &exp.out_dir;
    fs::create_dir_all(dir.join("marginals"))?;

    let mut csv = Vec::new();
    chain.write_csv(&mut csv)?;
    fs::write(dir.join("chain.csv"), csv)?;

    let mut summary = chain.summary_json();
    summary["problem"] = serde_json::json!(exp.problem);
    summary["method"] = serde_json::json!(exp.method);
    summary["h"] = serde_json::json!(exp.h);
    if exp.problem == Problem::ThreePoint {
        summary["sensors"] = serde_json::json!(three_point::sensors());
    }
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;

    let ranges: Vec<(f64, f64)> = prior.distributions().iter().map(marginal_range).collect();
    for (j, name) in chain.names.iter().enumerate() {
        let samples: Vec<f64> = chain.samples.column(j).iter().copied().collect();
        write_marginal(
            &dir.join("marginals").join(format!("{name}.csv")),
            &samples,
            ranges[j],
        )?;
    }
    if exp.problem == Problem::Pullout {
        write_kde(&dir.join("kde.csv"), chain, [ranges[0], ranges[1]])?;
    }

    let meta = serde_json::json!({
        "problem": exp.problem,
        "method": exp.method,
        "h": exp.h,
        "data_h": exp.data_h,
        "sigma_e": exp.sigma_e,
        "data_seed": exp.data_seed,
        "chain_seed": exp.chain.seed,
        "replicas": exp.replicas,
        "ground_truth": exp.ground_truth,
        "parameter_names": chain.names,
        "config": exp,
        "config_hash": exp.config_hash(),
        "data_hash": data_hash(y),
        "observations": y.iter().copied().collect::<Vec<f64>>(),
    });
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// A loaded result bundle (the parsed `meta.json` and `summary.json`).
#[derive(Debug, Clone)]
pub struct Bundle {
    /// Directory the bundle was loaded from.
    pub dir: PathBuf,
    /// Parsed `meta.json`.
    pub meta: serde_json::Value,
    /// Parsed `summary.json`.
    pub summary: serde_json::Value,
}

/// Loads a bundle directory written by [`write_bundle`].
///
/// # Errors
/// I/O and JSON errors; [`Error::Config`] when mandatory fields are missing.
pub fn load_bundle(dir: &Path) -> Result<Bundle> {
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("summary.json"))?)?;
    for key in ["data_hash", "ground_truth", "parameter_names", "method", "problem"] {
        if meta.get(key).is_none() {
            return Err(Error::Config(format!(
                "bundle {} is missing meta key {key}",
                dir.display()
            )));
        }
    }
    Ok(Bundle {
        dir: dir.to_path_buf(),
        meta,
        summary,
    })
}

fn f64_field(value: &serde_json::Value, key: &str) -> Result<f64> {
    value
        .get(key)
        .and_then(serde_json::Value::as_f64)
        .ok_or_else(|| Error::Config(format!("missing numeric field {key}")))
}

/// Per-bundle posterior metrics against the recorded ground truth.
fn bundle_metrics(bundle: &Bundle) -> Result<serde_json::Value> {
    let truth: Vec<f64> = serde_json::from_value(bundle.meta["ground_truth"].clone())?;
    let names: Vec<String> = serde_json::from_value(bundle.meta["parameter_names"].clone())?;
    let mut covered_all = true;
    let mut sq_error = 0.0;
    let mut per_param = serde_json::Map::new();
    for (j, name) in names.iter().enumerate().take(truth.len()) {
        let stats = &bundle.summary["parameters"][name];
        let mean = f64_field(stats, "mean")?;
        let lo = f64_field(stats, "q025")?;
        let hi = f64_field(stats, "q975")?;
        let covered = truth[j] >= lo && truth[j] <= hi;
        covered_all &= covered;
        let err = mean - truth[j];
        sq_error += err * err;
        per_param.insert(
            name.clone(),
            serde_json::json!({
                "mean": mean,
                "std": f64_field(stats, "std")?,
                "error": err,
                "covered": covered,
            }),
        );
    }
    Ok(serde_json::json!({
        "dir": bundle.dir.display().to_string(),
        "method": bundle.meta["method"],
        "h": bundle.meta["h"],
        "parameters": per_param,
        "mean_error": sq_error.sqrt(),
        "covered": covered_all,
        "overconfident": !covered_all,
    }))
}

/// Compares result bundles computed on identical data: per-bundle coverage
/// flags (`α = 0.05`, all marginals), posterior-mean errors, marginal std
/// ratios against the `exact` bundle when present, and per-method
/// error-monotonicity flags across mesh sizes.
///
/// # Errors
/// [`Error::Config`] for fewer than two bundles, mismatched problems, or
/// mismatched data (seeds/hashes).
pub fn compare_posteriors(bundles: &[Bundle]) -> Result<serde_json::Value> {
    if bundles.len() < 2 {
        return Err(Error::Config(format!(
            "comparison needs at least two bundles, got {}",
            bundles.len()
        )));
    }
    let reference = &bundles[0];
    for b in &bundles[1..] {
        if b.meta["problem"] != reference.meta["problem"] {
            return Err(Error::Config(format!(
                "bundle {} solves {} but the first bundle solves {}",
                b.dir.display(),
                b.meta["problem"],
                reference.meta["problem"]
            )));
        }
        if b.meta["data_hash"] != reference.meta["data_hash"]
            || b.meta["data_seed"] != reference.meta["data_seed"]
        {
            return Err(Error::Config(format!(
                "bundle {} was computed on different data than {}",
                b.dir.display(),
                reference.dir.display()
            )));
        }
    }

    let metrics: Vec<serde_json::Value> = bundles
        .iter()
        .map(bundle_metrics)
        .collect::<Result<_>>()?;

    // Marginal std ratios against the exact-method bundle, when present.
    let exact = bundles
        .iter()
        .zip(&metrics)
        .find(|(b, _)| b.meta["method"] == "exact");
    let mut std_ratios = serde_json::Map::new();
    if let Some((exact_bundle, _)) = exact {
        let names: Vec<String> =
            serde_json::from_value(exact_bundle.meta["parameter_names"].clone())?;
        for (bundle, metric) in bundles.iter().zip(&metrics) {
            let mut ratios = serde_json::Map::new();
            for name in &names {
                let s = f64_field(&bundle.summary["parameters"][name], "std");
                let s_exact = f64_field(&exact_bundle.summary["parameters"][name], "std");
                if let (Ok(s), Ok(s_exact)) = (s, s_exact) {
                    ratios.insert(name.clone(), serde_json::json!(s / s_exact));
                }
            }
            std_ratios.insert(
                metric["dir"].as_str().unwrap_or_default().to_string(),
                serde_json::Value::Object(ratios),
            );
        }
    }

    // Convergence with h: for each method seen at several mesh sizes, flag
    // whether the posterior-mean error is non-increasing under refinement.
    let mut by_method: std::collections::BTreeMap<String, Vec<(f64, f64)>> =
        std::collections::BTreeMap::new();
    for metric in &metrics {
        let method = metric["method"].as_str().unwrap_or_default().to_string();
        if let (Some(h), Some(err)) = (metric["h"].as_f64(), metric["mean_error"].as_f64()) {
            by_method.entry(method).or_default().push((h, err));
        }
    }
    let mut convergence = serde_json::Map::new();
    for (method, mut points) in by_method {
        if points.len() < 2 {
            continue;
        }
        points.sort_by(|a, b| b.0.total_cmp(&a.0));
        let monotone = points.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
        convergence.insert(
            method,
            serde_json::json!({
                "h": points.iter().map(|p| p.0).collect::<Vec<_>>(),
                "mean_error": points.iter().map(|p| p.1).collect::<Vec<_>>(),
                "error_monotone": monotone,
            }),
        );
    }

    Ok(serde_json::json!({
        "problem": reference.meta["problem"],
        "data_hash": reference.meta["data_hash"],
        "bundles": metrics,
        "std_ratio_vs_exact": std_ratios,
        "convergence": convergence,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base_config(problem: Problem, method: Method, h: f64) -> ExperimentConfig {
        ExperimentConfig {
            problem,
            method,
            h,
            chain: None,
            sigma_e: None,
            data_seed: 0,
            ground_truth: None,
            replicas: None,
            data_h: None,
            out_dir: None,
        }
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = ExperimentConfig::from_json(
            r#"{"problem": "pullout", "method": "fem", "h": 1.0, "banana": 3}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        assert!(err.to_string().contains("banana"));
    }

    #[test]
    fn config_parses_and_resolves_defaults() {
        let config = ExperimentConfig::from_json(
            r#"{"problem": "pullout", "method": "exact", "h": 1.0, "data_seed": 7}"#,
        )
        .unwrap();
        let exp = config.resolve(false, None, None).unwrap();
        assert_eq!(exp.sigma_e, 1e-3);
        assert_eq!(exp.chain.n, 10_000);
        assert_eq!(exp.replicas, 100);
        assert_eq!(exp.ground_truth, vec![0.8, 70.0]);
        assert_eq!(exp.data_h, None);
        assert_eq!(exp.data_seed, 7);

        let config = ExperimentConfig::from_json(
            r#"{"problem": "three_point", "method": "fem", "h": 0.2}"#,
        )
        .unwrap();
        let exp = config.resolve(false, None, None).unwrap();
        assert_eq!(exp.sigma_e, 1e-4);
        assert_eq!(exp.chain.n, 2_000);
        assert_eq!(exp.chain.n_burn, 2_000);
        assert_eq!(exp.replicas, 10);
        assert_eq!(exp.data_h, Some(0.02));
        assert_eq!(exp.ground_truth.len(), 5);
    }

    #[test]
    fn paper_scale_and_overrides() {
        let config = base_config(Problem::ThreePoint, Method::Bfem, 0.2);
        let exp = config
            .resolve(true, Some(42), Some(PathBuf::from("/tmp/somewhere")))
            .unwrap();
        assert_eq!(exp.h, 0.05);
        assert_eq!(exp.chain.n, 10_000);
        assert_eq!(exp.chain.n_burn, 10_000);
        assert_eq!(exp.data_h, Some(0.005));
        assert_eq!(exp.chain.seed, 42);
        assert_eq!(exp.out_dir, PathBuf::from("/tmp/somewhere"));

        // Paper scale leaves the pullout defaults untouched.
        let config = base_config(Problem::Pullout, Method::Fem, 0.25);
        let exp = config.resolve(true, None, None).unwrap();
        assert_eq!(exp.h, 0.25);
        assert_eq!(exp.chain.n, 10_000);
    }

    #[test]
    fn config_validation_errors() {
        let exact_2d = base_config(Problem::ThreePoint, Method::Exact, 0.2);
        assert!(matches!(
            exact_2d.resolve(false, None, None),
            Err(Error::Config(_))
        ));

        let bad_h = base_config(Problem::Pullout, Method::Fem, 0.3);
        assert!(matches!(bad_h.resolve(false, None, None), Err(Error::Config(_))));

        let mut bad_truth = base_config(Problem::Pullout, Method::Fem, 1.0);
        bad_truth.ground_truth = Some(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            bad_truth.resolve(false, None, None),
            Err(Error::Config(_))
        ));

        let mut bad_sigma = base_config(Problem::Pullout, Method::Fem, 1.0);
        bad_sigma.sigma_e = Some(0.0);
        assert!(matches!(
            bad_sigma.resolve(false, None, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn config_hash_ignores_out_dir_and_tracks_content() {
        let a = base_config(Problem::Pullout, Method::Fem, 1.0)
            .resolve(false, None, Some(PathBuf::from("a")))
            .unwrap();
        let b = base_config(Problem::Pullout, Method::Fem, 1.0)
            .resolve(false, None, Some(PathBuf::from("b")))
            .unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        let c = base_config(Problem::Pullout, Method::Fem, 0.5)
            .resolve(false, None, None)
            .unwrap();
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn data_hash_is_content_addressed() {
        let y1 = DVector::from_vec(vec![1.0, 2.0]);
        let y2 = DVector::from_vec(vec![1.0, 2.0]);
        let y3 = DVector::from_vec(vec![1.0, 2.0 + 1e-16]);
        assert_eq!(data_hash(&y1), data_hash(&y2));
        assert_eq!(data_hash(&y1), data_hash(&y3));
        let y4 = DVector::from_vec(vec![1.0, 2.5]);
        assert_ne!(data_hash(&y1), data_hash(&y4));
    }

    fn tiny_chain(seed: u64) -> ChainConfig {
        ChainConfig {
            n_burn: 60,
            n: 60,
            seed,
            ..ChainConfig::default()
        }
    }

    #[test]
    fn pullout_bundles_roundtrip_and_compare() {
        let tmp = tempfile::tempdir().unwrap();
        let mut bundles = Vec::new();
        for method in [Method::Fem, Method::Exact] {
            let mut config = base_config(Problem::Pullout, method, 0.5);
            config.chain = Some(tiny_chain(3));
            let exp = config
                .resolve(false, None, Some(tmp.path().join(method.to_string())))
                .unwrap();
            let (chain, dir) = run_experiment(&exp).unwrap();
            assert_eq!(chain.len(), 60);
            for file in ["chain.csv", "summary.json", "meta.json", "kde.csv"] {
                assert!(dir.join(file).is_file(), "missing {file}");
            }
            for name in ["EA", "k"] {
                assert!(dir.join("marginals").join(format!("{name}.csv")).is_file());
            }
            bundles.push(load_bundle(&dir).unwrap());
        }
        // Identical data across methods: same data_seed, same hash.
        assert_eq!(bundles[0].meta["data_hash"], bundles[1].meta["data_hash"]);

        let report = compare_posteriors(&bundles).unwrap();
        assert_eq!(report["problem"], "pullout");
        assert_eq!(report["bundles"].as_array().unwrap().len(), 2);
        let exact_dir = bundles[1].dir.display().to_string();
        let self_ratio = report["std_ratio_vs_exact"][&exact_dir]["EA"].as_f64().unwrap();
        assert_relative_eq!(self_ratio, 1.0, epsilon = 1e-12);

        // A bundle on different data is rejected.
        let mut other = base_config(Problem::Pullout, Method::Bfem, 0.5);
        other.chain = Some(tiny_chain(3));
        other.data_seed = 1;
        let exp = other
            .resolve(false, None, Some(tmp.path().join("other")))
            .unwrap();
        let (_, dir) = run_experiment(&exp).unwrap();
        bundles.push(load_bundle(&dir).unwrap());
        assert!(matches!(
            compare_posteriors(&bundles),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn three_point_bundle_has_sensor_metadata() {
        let tmp = tempfile::tempdir().unwrap();
        let mut config = base_config(Problem::ThreePoint, Method::Fem, 0.25);
        config.chain = Some(ChainConfig {
            n_burn: 15,
            n: 15,
            ..ChainConfig::default()
        });
        config.data_h = Some(0.1);
        let exp = config
            .resolve(false, Some(2), Some(tmp.path().join("tp")))
            .unwrap();
        let (chain, dir) = run_experiment(&exp).unwrap();
        assert_eq!(chain.len(), 15);
        assert_eq!(chain.dim(), 5);
        assert!(!dir.join("kde.csv").exists(), "kde is pullout-only");
        let bundle = load_bundle(&dir).unwrap();
        assert_eq!(bundle.summary["sensors"].as_array().unwrap().len(), 24);
        assert_eq!(bundle.meta["observations"].as_array().unwrap().len(), 48);
        assert_eq!(bundle.meta["chain_seed"], 2);
        for name in ["x", "y", "d", "alpha", "r"] {
            assert!(dir.join("marginals").join(format!("{name}.csv")).is_file());
        }
    }
}
