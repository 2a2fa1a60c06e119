//! Batch commands: load, preprocess, fit, evaluate and report.
//!
//! Every command writes into an [`OutputDir`] and finishes with a manifest.
//! On error the manifest is still written, with status `partial`.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::advantage::{
    find_crossover, measure_params, qram_estimate, quantum_terms, ClassicalVariant, CostModel, CostTerms,
    CostVariant, CrossoverReport, DatasetParams, GrowthModel, QramConfig, QuantumErrorParams, ResourceEstimate,
};
use crate::config::{DetectorVariant, MinorThresholdUnit, RunConfig, TomographySource};
use crate::data::{generate, load_dataset, preprocess, systematic_indices, Label, Preprocessed, RawTable};
use crate::detectors::{evaluate, tune_threshold, EnsembleModel, Metrics, PccModel, ReconModel};
use crate::linalg::{dot, median};
use crate::pca::{fit_exact_pca, select_by_threshold, select_for_variance, PcaModel, SelectionMode, VarianceSelection};
use crate::qmeans::{ch_index, kmeans_fit, kmeans_pp_init, qmeans_fit, QmeansParams, MAX_ITERATIONS};
use crate::qpca::{extract_least_q, extract_top_k, fit_quantum_pca, QpcaRequest, QuantumPca, ThetaSearch};
use crate::qsim::{budget_sweep, error_distribution, tomography_study, NoiseContext};
use crate::report::{fmt, FileEntry, OutputDir};
use crate::{Error, Result};

/// Batch commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fit,
    Crossover,
    TomographyStudy,
    Resources,
    QmeansStudy,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Crossover => "crossover",
            Command::TomographyStudy => "tomography-study",
            Command::Resources => "resources",
            Command::QmeansStudy => "qmeans-study",
        }
    }
}

/// Runs `command` into `out_root` and returns the manifest entries.
pub fn run(command: Command, cfg: &RunConfig, out_root: impl AsRef<Path>) -> Result<Vec<FileEntry>> {
    let mut out = OutputDir::create(out_root, command.name())?;
    let result = match command {
        Command::Fit => run_fit(cfg, &mut out).map(|_| ()),
        Command::Crossover => run_crossover(cfg, &mut out).map(|_| ()),
        Command::TomographyStudy => run_tomography_study(cfg, &mut out),
        Command::Resources => run_resources(cfg, &mut out).map(|_| ()),
        Command::QmeansStudy => run_qmeans_study(cfg, &mut out).map(|_| ()),
    };
    match result {
        Ok(()) => {
            out.finish("ok")?;
            Ok(out.files().to_vec())
        }
        Err(e) => {
            if let Err(m) = out.finish("partial") {
                log::error!("could not write manifest: {m}");
            }
            Err(e)
        }
    }
}

/// Raw table from the configured CSV or synthetic generator.
pub fn load_table(cfg: &RunConfig) -> Result<RawTable> {
    cfg.check_paths()?;
    match (&cfg.dataset.path, &cfg.dataset.synthetic) {
        (Some(path), _) => Ok(load_dataset(path, &cfg.dataset.schema())?),
        (None, Some(syn)) => Ok(generate(&syn.to_spec()?)?),
        (None, None) => Err(Error::Config("dataset needs `path` or `synthetic`".into())),
    }
}

/// Preprocessed splits, the exact model and the classical selections.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: Preprocessed,
    pub exact: PcaModel,
    pub major: VarianceSelection,
    pub minor: Option<VarianceSelection>,
}

impl Prepared {
    pub fn major_model(&self) -> PcaModel {
        self.exact.subset(&self.major.indices)
    }

    pub fn minor_model(&self) -> Option<PcaModel> {
        self.minor.as_ref().map(|m| self.exact.subset(&m.indices))
    }
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let table = load_table(cfg)?;
    let data = preprocess(&table, &cfg.split.to_spec())?;
    let exact = fit_exact_pca(&data.train)?;
    let major = major_selection(cfg, &exact)?;
    let minor = minor_selection(cfg, &exact)?;
    log::info!(
        "{}: {} training rows, {} features, k = {} ({:.4} explained)",
        table.name,
        data.train.nrows(),
        data.train.ncols(),
        major.count(),
        major.explained
    );
    Ok(Prepared {
        data,
        exact,
        major,
        minor,
    })
}

fn major_selection(cfg: &RunConfig, exact: &PcaModel) -> Result<VarianceSelection> {
    match cfg.detector.k {
        Some(k) => {
            if k == 0 || k > exact.len() {
                return Err(Error::Config(format!("k = {k} outside 1..={}", exact.len())));
            }
            let sv = &exact.singular_values;
            let threshold = match sv.get(k) {
                Some(next) => 0.5 * (sv[k - 1] + next),
                None => 0.5 * sv[k - 1],
            };
            let ratios = exact.ratios();
            Ok(VarianceSelection {
                mode: SelectionMode::Major,
                indices: (0..k).collect(),
                explained: ratios[..k].iter().sum(),
                threshold,
            })
        }
        None => Ok(select_for_variance(exact, cfg.detector.p_major, SelectionMode::Major)?),
    }
}

/// Explicit minor threshold converted to singular-value units.
pub fn theta_min_sigma(cfg: &RunConfig, n_samples: usize) -> Option<f64> {
    cfg.detector.theta_min.map(|t| match cfg.detector.theta_min_unit {
        MinorThresholdUnit::SingularValue => t,
        MinorThresholdUnit::VariancePerSample => (t * n_samples.saturating_sub(1) as f64).sqrt(),
    })
}

fn minor_selection(cfg: &RunConfig, exact: &PcaModel) -> Result<Option<VarianceSelection>> {
    if !cfg.detector.variant.uses_minors() {
        return Ok(None);
    }
    let sel = match (theta_min_sigma(cfg, exact.n_samples), cfg.detector.p_minor) {
        (Some(t), _) => select_by_threshold(exact, t, SelectionMode::Minor),
        (None, Some(p)) => select_for_variance(exact, p, SelectionMode::Minor)?,
        (None, None) => return Err(Error::Config("minor components need `theta_min` or `p_minor`".into())),
    };
    if sel.indices.is_empty() {
        return Err(Error::Config(format!("minor threshold {} selects no component", sel.threshold)));
    }
    Ok(Some(sel))
}

/// Quantum extraction request for one δ.
pub fn quantum_request(cfg: &RunConfig, prepared: &Prepared, delta: f64) -> QpcaRequest {
    let mut req = cfg.quantum.request(cfg.detector.p_major, delta, prepared.exact.dim);
    if cfg.detector.k.is_some() {
        req.p_major = prepared.major.explained;
    }
    if cfg.detector.variant.uses_minors() {
        req.theta_min = theta_min_sigma(cfg, prepared.exact.n_samples);
        req.p_minor = if req.theta_min.is_none() { cfg.detector.p_minor } else { None };
    }
    req
}

/// Noisy models for one `(seed, δ)`. With a fixed `k` the classical
/// threshold is reused instead of searching for one.
pub fn quantum_fit(cfg: &RunConfig, prepared: &Prepared, seed: u64, delta: f64) -> Result<QuantumPca> {
    let req = quantum_request(cfg, prepared, delta);
    let mut ctx = NoiseContext::new(seed).with_failure_prob(req.gamma);
    if cfg.detector.k.is_none() {
        return Ok(fit_quantum_pca(&prepared.exact, &req, &mut ctx)?);
    }
    let theta = prepared.major.threshold;
    let major = extract_top_k(&prepared.exact, theta, &req, &mut ctx)?;
    let theta_min = match (req.theta_min, &prepared.minor) {
        (Some(t), _) => Some(t),
        (None, Some(m)) => Some(m.threshold),
        (None, None) => None,
    };
    let minor = match theta_min {
        Some(t) => Some(extract_least_q(&prepared.exact, t, &req, &mut ctx)?),
        None => None,
    };
    Ok(QuantumPca {
        theta: ThetaSearch {
            mode: SelectionMode::Major,
            theta,
            selected: major.source_indices.clone(),
            explained: prepared.major.explained,
            gap: 0.0,
            iterations: 0,
        },
        major,
        theta_fallback: false,
        minor,
        theta_min,
    })
}

/// Evaluation rows shared by every model of a run.
pub struct EvalSet {
    pub validation_normal: Vec<Vec<f64>>,
    pub validation: Vec<Vec<f64>>,
    pub validation_labels: Vec<Label>,
    pub test: Vec<Vec<f64>>,
    pub test_labels: Vec<Label>,
}

impl EvalSet {
    pub fn new(data: &Preprocessed) -> Self {
        EvalSet {
            validation_normal: data.validation.normal_rows(),
            validation: data.validation.matrix.row_vecs(),
            validation_labels: data.validation.labels.clone(),
            test: data.test.matrix.row_vecs(),
            test_labels: data.test.labels.clone(),
        }
    }
}

fn to_labels(flags: Vec<bool>) -> Vec<Label> {
    flags
        .into_iter()
        .map(|f| if f { Label::Attack } else { Label::Normal })
        .collect()
}

/// Test metrics of a threshold detector at each false alarm rate, with
/// thresholds calibrated on the validation normals.
pub fn alpha_metrics(
    variant: DetectorVariant,
    major: &PcaModel,
    minor: Option<&PcaModel>,
    eval: &EvalSet,
    alphas: &[f64],
) -> Result<Vec<Metrics>> {
    let minor = if variant == DetectorVariant::PccMajorOnly { None } else { minor.cloned() };
    match variant {
        DetectorVariant::PccMajorOnly | DetectorVariant::PccMajorMinor => {
            let model = PccModel::new(major.clone(), minor)?;
            let val = model.batch_scores(&eval.validation_normal)?;
            let test = model.batch_scores(&eval.test)?;
            alphas
                .iter()
                .map(|&a| {
                    let m = model.calibrated(&val, a)?;
                    let flags = test.iter().map(|s| m.decide(*s)).collect::<Result<Vec<_>, _>>()?;
                    Ok(evaluate(&to_labels(flags), &eval.test_labels)?)
                })
                .collect()
        }
        DetectorVariant::Ensemble => {
            let model = EnsembleModel::new(major.clone(), minor)?;
            let val = model.batch_scores(&eval.validation_normal)?;
            let test = model.batch_scores(&eval.test)?;
            alphas
                .iter()
                .map(|&a| {
                    let m = model.calibrated(&val, a)?;
                    let flags = test.iter().map(|s| m.decide(s)).collect::<Result<Vec<_>, _>>()?;
                    Ok(evaluate(&to_labels(flags), &eval.test_labels)?)
                })
                .collect()
        }
        DetectorVariant::Recon => Err(Error::Config("reconstruction detector has no false alarm rate".into())),
    }
}

/// Reconstruction threshold tuned for F1 on the validation split.
pub fn tune_recon_threshold(model: &PcaModel, eval: &EvalSet) -> Result<f64> {
    let scores = ReconModel::new(model.clone())?.batch_scores(&eval.validation)?;
    Ok(tune_threshold(&scores, &eval.validation_labels)?)
}

/// Test metrics of the reconstruction detector at a fixed threshold.
pub fn recon_metrics(model: &PcaModel, threshold: f64, eval: &EvalSet) -> Result<Metrics> {
    let m = ReconModel::new(model.clone())?.with_threshold(threshold);
    let scores = m.batch_scores(&eval.test)?;
    let flags = scores.iter().map(|s| m.decide(*s)).collect::<Result<Vec<_>, _>>()?;
    Ok(evaluate(&to_labels(flags), &eval.test_labels)?)
}

/// One line of the long-format metrics table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub variant: String,
    pub model: String,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    pub k: usize,
    pub q: Option<usize>,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl MetricRow {
    fn new(variant: DetectorVariant, model: &str, k: usize, q: Option<usize>, m: &Metrics) -> Self {
        MetricRow {
            variant: variant.name().into(),
            model: model.into(),
            seed: None,
            alpha: None,
            delta: None,
            k,
            q,
            recall: m.recall,
            precision: m.precision,
            f1: m.f1,
            accuracy: m.accuracy,
        }
    }
}

/// Fitted quantum models of one `(seed, δ)`.
#[derive(Debug, Clone)]
pub struct QuantumRun {
    pub seed: u64,
    pub delta: f64,
    pub fit: QuantumPca,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub rows: Vec<MetricRow>,
    pub quantum: Vec<QuantumRun>,
    pub recon_threshold: Option<f64>,
}

impl FitOutcome {
    pub fn classical(&self) -> impl Iterator<Item = &MetricRow> {
        self.rows.iter().filter(|r| r.model == "classical")
    }

    pub fn quantum_rows(&self) -> impl Iterator<Item = &MetricRow> {
        self.rows.iter().filter(|r| r.model == "quantum")
    }
}

/// Classical and quantum metrics for every seed, δ and α.
pub fn evaluate_fit(cfg: &RunConfig, prepared: &Prepared) -> Result<FitOutcome> {
    let variant = cfg.detector.variant;
    let eval = EvalSet::new(&prepared.data);
    let major = prepared.major_model();
    let minor = prepared.minor_model();
    let k = major.len();
    let q = minor.as_ref().map(|m| m.len());

    let mut rows = Vec::new();
    let recon_threshold = if variant == DetectorVariant::Recon {
        let t = match cfg.detector.recon_threshold {
            Some(t) => t,
            None => tune_recon_threshold(&major, &eval)?,
        };
        let m = recon_metrics(&major, t, &eval)?;
        rows.push(MetricRow::new(variant, "classical", k, None, &m));
        Some(t)
    } else {
        for (a, m) in cfg
            .detector
            .alphas
            .iter()
            .zip(alpha_metrics(variant, &major, minor.as_ref(), &eval, &cfg.detector.alphas)?)
        {
            let mut r = MetricRow::new(variant, "classical", k, q, &m);
            r.alpha = Some(*a);
            rows.push(r);
        }
        None
    };

    let jobs: Vec<(u64, f64)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| cfg.quantum.deltas().into_iter().map(move |d| (s, d)))
        .collect();
    let results: Vec<(QuantumRun, Vec<MetricRow>)> = jobs
        .par_iter()
        .map(|&(seed, delta)| {
            let fit = quantum_fit(cfg, prepared, seed, delta)?;
            let qk = fit.major.len();
            let qq = fit.minor.as_ref().map(|m| m.len());
            let mut out = Vec::new();
            match recon_threshold {
                Some(t) => {
                    let m = recon_metrics(&fit.major, t, &eval)?;
                    out.push(MetricRow::new(variant, "quantum", qk, None, &m));
                }
                None => {
                    let ms = alpha_metrics(variant, &fit.major, fit.minor.as_ref(), &eval, &cfg.detector.alphas)?;
                    for (a, m) in cfg.detector.alphas.iter().zip(ms) {
                        let mut r = MetricRow::new(variant, "quantum", qk, qq, &m);
                        r.alpha = Some(*a);
                        out.push(r);
                    }
                }
            }
            for r in &mut out {
                r.seed = Some(seed);
                r.delta = Some(delta);
            }
            Ok((QuantumRun { seed, delta, fit }, out))
        })
        .collect::<Result<_>>()?;

    let mut quantum = Vec::with_capacity(results.len());
    for (run, r) in results {
        quantum.push(run);
        rows.extend(r);
    }
    Ok(FitOutcome {
        rows,
        quantum,
        recon_threshold,
    })
}

const METRICS: [&str; 4] = ["recall", "precision", "f1", "accuracy"];

fn metric_values(r: &MetricRow) -> [f64; 4] {
    [r.recall, r.precision, r.f1, r.accuracy]
}

fn median_metrics<'a>(rows: impl Iterator<Item = &'a MetricRow>) -> Option<[f64; 4]> {
    let rows: Vec<&MetricRow> = rows.collect();
    if rows.is_empty() {
        return None;
    }
    let mut out = [0.0; 4];
    for (j, o) in out.iter_mut().enumerate() {
        let v: Vec<f64> = rows.iter().map(|r| metric_values(r)[j]).collect();
        *o = median(&v);
    }
    Some(out)
}

/// Side-by-side classical/quantum table; quantum values are medians over
/// seeds. Threshold detectors get one row per `(δ, α)`, the
/// reconstruction detector one row per δ.
pub fn comparison_table(outcome: &FitOutcome, deltas: &[f64]) -> (Vec<String>, Vec<Vec<String>>) {
    let by_alpha = outcome.classical().any(|r| r.alpha.is_some());
    let mut header: Vec<String> = if by_alpha {
        vec!["delta".into(), "alpha".into()]
    } else {
        vec!["delta".into()]
    };
    for m in METRICS {
        header.push(format!("{m}_c"));
        header.push(format!("{m}_q"));
    }
    let mut rows = Vec::new();
    for &delta in deltas {
        for c in outcome.classical() {
            let q = median_metrics(
                outcome
                    .quantum_rows()
                    .filter(|r| r.delta == Some(delta) && r.alpha == c.alpha),
            );
            let mut line = vec![fmt(delta)];
            if let Some(a) = c.alpha {
                line.push(fmt(a));
            }
            let cv = metric_values(c);
            for j in 0..4 {
                line.push(fmt(cv[j]));
                line.push(q.map_or_else(|| "na".into(), |v| fmt(v[j])));
            }
            rows.push(line);
        }
    }
    (header, rows)
}

#[derive(Serialize)]
struct FitSummary<'a> {
    variant: &'a str,
    train_rows: usize,
    features: usize,
    k: usize,
    explained: f64,
    theta: f64,
    q: Option<usize>,
    theta_min: Option<f64>,
    recon_threshold: Option<f64>,
    quantum: Vec<QuantumSummary>,
}

#[derive(Serialize)]
struct QuantumSummary {
    seed: u64,
    delta: f64,
    k: usize,
    q: Option<usize>,
    theta: f64,
    theta_fallback: bool,
    explained: f64,
    theta_min: Option<f64>,
    failures: usize,
}

pub fn run_fit(cfg: &RunConfig, out: &mut OutputDir) -> Result<FitOutcome> {
    let prepared = prepare(cfg)?;
    out.write_text("split_manifest.json", &(prepared.data.manifest.to_json()? + "\n"))?;
    out.write_json("exact_model.json", &prepared.exact)?;
    let outcome = evaluate_fit(cfg, &prepared)?;
    for run in &outcome.quantum {
        out.write_json(
            &format!("quantum_model_seed{}_delta{}.json", run.seed, run.delta),
            &run.fit.major,
        )?;
        if let Some(minor) = &run.fit.minor {
            out.write_json(&format!("quantum_minor_seed{}_delta{}.json", run.seed, run.delta), minor)?;
        }
    }
    out.write_csv("metrics.csv", &outcome.rows)?;
    let (header, rows) = comparison_table(&outcome, &cfg.quantum.deltas());
    out.write_table("comparison.csv", &header, &rows)?;
    let summary = FitSummary {
        variant: cfg.detector.variant.name(),
        train_rows: prepared.data.train.nrows(),
        features: prepared.data.train.ncols(),
        k: prepared.major.count(),
        explained: prepared.major.explained,
        theta: prepared.major.threshold,
        q: prepared.minor.as_ref().map(|m| m.count()),
        theta_min: prepared.minor.as_ref().map(|m| m.threshold),
        recon_threshold: outcome.recon_threshold,
        quantum: outcome
            .quantum
            .iter()
            .map(|r| QuantumSummary {
                seed: r.seed,
                delta: r.delta,
                k: r.fit.major.len(),
                q: r.fit.minor.as_ref().map(|m| m.len()),
                theta: r.fit.theta.theta,
                theta_fallback: r.fit.theta_fallback,
                explained: r.fit.theta.explained,
                theta_min: r.fit.theta_min,
                failures: r.fit.major.certificate.as_ref().map_or(0, |c| c.failures()),
            })
            .collect(),
    };
    out.write_json("summary.json", &summary)?;
    Ok(outcome)
}

/// Classical baseline used when the configuration does not name one.
pub fn default_classical(variant: DetectorVariant) -> ClassicalVariant {
    if variant.uses_minors() {
        ClassicalVariant::FullSvd
    } else {
        ClassicalVariant::RandomizedPca
    }
}

/// Parameters measured on the standardized training matrix.
pub fn measured_params(prepared: &Prepared) -> Result<DatasetParams> {
    Ok(measure_params(
        &prepared.data.train.values,
        &prepared.exact,
        &prepared.major,
        prepared.minor.as_ref(),
    )?)
}

#[derive(Serialize)]
struct CrossoverSummary<'a> {
    variant: &'a str,
    classical: ClassicalVariant,
    growth: GrowthModel,
    any_advantage: bool,
    terms_at_measured_n: CostTerms,
    note: &'static str,
}

pub fn run_crossover(cfg: &RunConfig, out: &mut OutputDir) -> Result<CrossoverReport> {
    let prepared = prepare(cfg)?;
    let params = measured_params(&prepared)?;
    out.write_json("params.json", &params)?;
    let errors = cfg.quantum.error_params();
    let cost = CostModel::new(cfg.detector.variant.cost_variant());
    let classical = cfg
        .crossover
        .classical
        .unwrap_or_else(|| default_classical(cfg.detector.variant));
    let report = find_crossover(
        &params,
        &errors,
        &cost,
        classical,
        cfg.crossover.growth,
        &cfg.crossover.n_grid()?,
        &cfg.crossover.d_grid,
    )?;
    let header: Vec<String> = ["n", "d", "quantum", "classical", "advantage"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = report
        .cells
        .iter()
        .map(|c| {
            vec![
                format!("{:e}", c.n),
                c.d.to_string(),
                format!("{:.6e}", c.quantum),
                format!("{:.6e}", c.classical),
                c.advantage.to_string(),
            ]
        })
        .collect();
    out.write_table("crossover_grid.csv", &header, &rows)?;
    let header: Vec<String> = ["d", "grid_n", "analytic_n", "single_crossing"].map(String::from).to_vec();
    let none = || "no advantage".to_string();
    let rows: Vec<Vec<String>> = report
        .frontier
        .iter()
        .map(|f| {
            vec![
                f.d.to_string(),
                f.grid_n.map_or_else(none, |n| format!("{n:e}")),
                f.analytic_n.map_or_else(none, |n| format!("{n:.6e}")),
                f.single_crossing.to_string(),
            ]
        })
        .collect();
    out.write_table("crossover_frontier.csv", &header, &rows)?;
    out.write_json(
        "crossover_summary.json",
        &CrossoverSummary {
            variant: cfg.detector.variant.name(),
            classical,
            growth: cfg.crossover.growth,
            any_advantage: report.any_advantage(),
            terms_at_measured_n: quantum_terms(&params, &errors, &cost)?,
            note: "all constant factors are 1; absolute crossover points shift with the hidden constants",
        },
    )?;
    Ok(report)
}

/// Unit vector the tomography study reconstructs.
pub fn tomography_target(cfg: &RunConfig) -> Result<Vec<f64>> {
    match cfg.tomography.source {
        TomographySource::Uniform => {
            let d = cfg.tomography.dim;
            if d == 0 {
                return Err(Error::Config("tomography dim must be positive".into()));
            }
            Ok(vec![1.0 / (d as f64).sqrt(); d])
        }
        TomographySource::FirstComponent => {
            let table = load_table(cfg)?;
            let data = preprocess(&table, &cfg.split.to_spec())?;
            let exact = fit_exact_pca(&data.train)?;
            exact
                .components
                .first()
                .cloned()
                .ok_or_else(|| Error::Config("dataset has no principal component".into()))
        }
    }
}

pub fn run_tomography_study(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let t = &cfg.tomography;
    let x = tomography_target(cfg)?;
    let ctx = NoiseContext::new(cfg.seeds[0]);

    let study = tomography_study(&x, &t.deltas, t.repetitions, t.divisor, t.norm, &ctx)?;
    let header: Vec<String> = ["delta", "theoretical_samples", "samples", "median", "p05", "p95", "within_delta"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = study
        .iter()
        .map(|r| {
            vec![
                r.delta.to_string(),
                format!("{:.0}", r.theoretical_samples),
                r.summary.samples.to_string(),
                format!("{:.6}", r.summary.median),
                format!("{:.6}", r.summary.p05),
                format!("{:.6}", r.summary.p95),
                (r.summary.median <= r.delta).to_string(),
            ]
        })
        .collect();
    out.write_table("tomography_study.csv", &header, &rows)?;

    let sweep = budget_sweep(&x, &t.budgets, t.repetitions, t.norm, &ctx)?;
    out.write_csv("tomography_budgets.csv", &sweep)?;

    if t.histogram_repetitions > 0 {
        let errors = error_distribution(&x, t.histogram_samples, t.histogram_repetitions, t.norm, &ctx)?;
        let header = vec!["repetition".to_string(), "error".to_string()];
        let rows: Vec<Vec<String>> = errors
            .iter()
            .enumerate()
            .map(|(i, e)| vec![i.to_string(), format!("{e:.8}")])
            .collect();
        out.write_table("tomography_errors.csv", &header, &rows)?;
    }
    Ok(())
}

/// Estimates for every configured hardware preset.
pub fn resource_estimates(cfg: &RunConfig) -> Result<Vec<ResourceEstimate>> {
    cfg.qram
        .configs
        .iter()
        .map(|name| {
            let mut c = QramConfig::preset(name)?;
            c.word_size = cfg.qram.word_size;
            Ok(qram_estimate(cfg.qram.n, cfg.qram.d, &c, cfg.qram.allow_extrapolation)?)
        })
        .collect()
}

pub fn run_resources(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<ResourceEstimate>> {
    let est = resource_estimates(cfg)?;
    out.write_json("resources.json", &est)?;
    out.write_csv("resources.csv", &est)?;
    Ok(est)
}

/// CH indices of one `(k, seed)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChRow {
    pub k: usize,
    pub seed: u64,
    pub ch_classical: f64,
    pub ch_quantum: f64,
    pub iterations_classical: usize,
    pub iterations_quantum: usize,
}

/// Median CH over seeds for one `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChSummary {
    pub k: usize,
    pub classical: f64,
    pub quantum: f64,
    pub relative_difference: f64,
}

/// Rows projected on the first exact component, sampled systematically
/// from the train, validation and test splits.
pub fn projected_rows(prepared: &Prepared, n_rows: usize) -> Vec<Vec<f64>> {
    let e1 = &prepared.exact.components[0];
    let all: Vec<Vec<f64>> = prepared
        .data
        .train
        .row_vecs()
        .into_iter()
        .chain(prepared.data.validation.matrix.row_vecs())
        .chain(prepared.data.test.matrix.row_vecs())
        .collect();
    systematic_indices(all.len(), n_rows)
        .into_iter()
        .map(|i| vec![dot(&all[i], e1)])
        .collect()
}

/// Classical k-means and q-means from a shared k-means++ start for each
/// `(k, seed)`.
pub fn ch_study(rows: &[Vec<f64>], k_grid: &[usize], seeds: &[u64], params: &QmeansParams) -> Result<Vec<ChRow>> {
    let jobs: Vec<(usize, u64)> = k_grid
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    jobs.par_iter()
        .map(|&(k, seed)| {
            let init = kmeans_pp_init(rows, k, seed)?;
            let c = kmeans_fit(rows, &init, MAX_ITERATIONS)?;
            let q = qmeans_fit(rows, &init, params, seed)?;
            Ok(ChRow {
                k,
                seed,
                ch_classical: ch_index(rows, &c.assignments, k)?,
                ch_quantum: ch_index(rows, &q.assignments, k)?,
                iterations_classical: c.iterations,
                iterations_quantum: q.iterations,
            })
        })
        .collect()
}

pub fn summarize_ch(rows: &[ChRow]) -> Vec<ChSummary> {
    let mut ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
    ks.dedup();
    ks.into_iter()
        .map(|k| {
            let cell: Vec<&ChRow> = rows.iter().filter(|r| r.k == k).collect();
            let c = median(&cell.iter().map(|r| r.ch_classical).collect::<Vec<_>>());
            let q = median(&cell.iter().map(|r| r.ch_quantum).collect::<Vec<_>>());
            ChSummary {
                k,
                classical: c,
                quantum: q,
                relative_difference: (q - c).abs() / c.abs(),
            }
        })
        .collect()
}

pub fn run_qmeans_study(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<ChSummary>> {
    let prepared = prepare(cfg)?;
    let rows = projected_rows(&prepared, cfg.qmeans.n_rows);
    let mut params = QmeansParams::new(cfg.qmeans.delta, cfg.qmeans.eps_dist);
    params.delta_fail = cfg.qmeans.delta_fail;
    let cells = ch_study(&rows, &cfg.qmeans.k_grid, &cfg.qmeans.seeds, &params)?;
    out.write_csv("qmeans_ch.csv", &cells)?;
    let summary = summarize_ch(&cells);
    out.write_csv("qmeans_summary.csv", &summary)?;
    let iterations = cells.iter().map(|c| c.iterations_quantum as f64).collect::<Vec<_>>();
    let errors = qmeans_error_params(cfg, median(&iterations));
    let mut p = measured_params(&prepared)?;
    p.k = cfg.qmeans.k_grid.iter().copied().max().unwrap_or(1);
    let terms = quantum_terms(&p, &errors, &CostModel::new(CostVariant::Qmeans))?;
    out.write_json("qmeans_cost.json", &terms)?;
    Ok(summary)
}

fn qmeans_error_params(cfg: &RunConfig, iterations: f64) -> QuantumErrorParams {
    let mut e = QuantumErrorParams::new(cfg.qmeans.eps_dist, cfg.qmeans.eps_dist, cfg.quantum.eta, cfg.qmeans.delta);
    e.iterations = Some(iterations);
    e
}
