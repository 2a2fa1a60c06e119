//! Declarative run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::advantage::{ClassicalVariant, CostVariant, GrowthModel, QuantumErrorParams};
use crate::data::{LabelSchema, SamplingMode, SplitSpec, SyntheticSpec};
use crate::qpca::{QpcaRequest, VectorNoise};
use crate::qsim::TomographyNorm;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Only the commands that read data need one.
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub quantum: QuantumConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub crossover: CrossoverConfig,
    #[serde(default)]
    pub qram: QramSection,
    #[serde(default)]
    pub tomography: TomographyConfig,
    #[serde(default)]
    pub qmeans: QmeansConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Either a CSV file or a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    #[serde(default = "default_normal_labels")]
    pub normal_labels: Vec<String>,
    #[serde(default)]
    pub attack_labels: Option<Vec<String>>,
    #[serde(default = "yes")]
    pub drop_non_numeric: bool,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            path: None,
            label_column: default_label_column(),
            normal_labels: default_normal_labels(),
            attack_labels: None,
            drop_non_numeric: true,
            synthetic: None,
        }
    }
}

fn default_label_column() -> String {
    "label".into()
}

fn default_normal_labels() -> Vec<String> {
    vec!["normal".into(), "normal.".into(), "BENIGN".into()]
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    /// `kdd_like`, `small` or `custom` (then `spec` is required).
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default = "default_n_normal")]
    pub n_normal: usize,
    #[serde(default = "default_n_attack")]
    pub n_attack: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub spec: Option<SyntheticSpec>,
}

fn default_preset() -> String {
    "kdd_like".into()
}

fn default_n_normal() -> usize {
    12_000
}

fn default_n_attack() -> usize {
    4_000
}

impl SyntheticConfig {
    pub fn to_spec(&self) -> Result<SyntheticSpec> {
        match self.preset.as_str() {
            "kdd_like" => Ok(SyntheticSpec::kdd_like(self.n_normal, self.n_attack, self.seed)),
            "small" => Ok(SyntheticSpec::small(self.n_normal, self.n_attack, self.seed)),
            "custom" => self
                .spec
                .clone()
                .ok_or_else(|| Error::Config("custom synthetic preset needs a [dataset.synthetic.spec] table".into())),
            other => Err(Error::Config(format!("unknown synthetic preset `{other}`"))),
        }
    }
}

impl DatasetConfig {
    pub fn schema(&self) -> LabelSchema {
        LabelSchema {
            label_column: self.label_column.clone(),
            normal_labels: self.normal_labels.clone(),
            attack_labels: self.attack_labels.clone(),
            drop_non_numeric: self.drop_non_numeric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct SplitConfig {
    pub train: usize,
    /// `[normal, attack]`.
    pub validation: [usize; 2],
    /// `[normal, attack]`; omitted means every remaining row.
    #[serde(default)]
    pub test: Option<[usize; 2]>,
    #[serde(default = "default_sampling")]
    pub sampling: SamplingMode,
    #[serde(default = "default_trim")]
    pub trim_fraction: f64,
    #[serde(default)]
    pub quantiles: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_sampling() -> SamplingMode {
    SamplingMode::Systematic
}

fn default_trim() -> f64 {
    0.01
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train: 5000,
            validation: [1000, 500],
            test: None,
            sampling: SamplingMode::Systematic,
            trim_fraction: 0.01,
            quantiles: None,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn to_spec(&self) -> SplitSpec {
        let mut s = SplitSpec::new(self.train, (self.validation[0], self.validation[1]), (0, 0));
        s.test_normal = self.test.map(|t| t[0]);
        s.test_attack = self.test.map(|t| t[1]);
        s.sampling = self.sampling;
        s.trim_fraction = self.trim_fraction;
        s.quantiles = self.quantiles;
        s.seed = self.seed;
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorVariant {
    PccMajorOnly,
    PccMajorMinor,
    Ensemble,
    Recon,
}

impl DetectorVariant {
    pub fn name(self) -> &'static str {
        match self {
            DetectorVariant::PccMajorOnly => "pcc_major_only",
            DetectorVariant::PccMajorMinor => "pcc_major_minor",
            DetectorVariant::Ensemble => "ensemble",
            DetectorVariant::Recon => "recon",
        }
    }

    pub fn uses_minors(self) -> bool {
        matches!(self, DetectorVariant::PccMajorMinor | DetectorVariant::Ensemble)
    }

    pub fn cost_variant(self) -> CostVariant {
        match self {
            DetectorVariant::PccMajorOnly => CostVariant::PccMajorOnly,
            DetectorVariant::PccMajorMinor | DetectorVariant::Ensemble => CostVariant::PccMajorMinor,
            DetectorVariant::Recon => CostVariant::Recon,
        }
    }
}

/// Units of an explicit minor threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinorThresholdUnit {
    /// A singular value of the training matrix.
    #[default]
    SingularValue,
    /// A per-sample variance `v`; converted as `σ = √(v·(n−1))`.
    VariancePerSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    #[serde(default = "default_variant")]
    pub variant: DetectorVariant,
    #[serde(default = "default_p")]
    pub p_major: f64,
    /// Fixed number of major components instead of a variance target.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub p_minor: Option<f64>,
    #[serde(default)]
    pub theta_min: Option<f64>,
    #[serde(default)]
    pub theta_min_unit: MinorThresholdUnit,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    /// Fixed reconstruction threshold; tuned for F1 on validation when
    /// absent.
    #[serde(default)]
    pub recon_threshold: Option<f64>,
}

fn default_variant() -> DetectorVariant {
    DetectorVariant::PccMajorOnly
}

fn default_p() -> f64 {
    0.70
}

fn default_alphas() -> Vec<f64> {
    vec![0.01, 0.02, 0.04, 0.06, 0.08, 0.10]
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            variant: default_variant(),
            p_major: default_p(),
            k: None,
            p_minor: None,
            theta_min: None,
            theta_min_unit: MinorThresholdUnit::SingularValue,
            alphas: default_alphas(),
            recon_threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumConfig {
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub epsilon_theta: f64,
    #[serde(default = "tenth")]
    pub eta: f64,
    #[serde(default = "tenth")]
    pub delta: f64,
    /// Failure probability per estimate; `1/d` when absent.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "one")]
    pub divisor: f64,
    #[serde(default)]
    pub vector_noise: VectorNoise,
    /// δ values swept by the fit command (defaults to `[delta]`).
    #[serde(default)]
    pub delta_grid: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

fn tenth() -> f64 {
    0.1
}

impl Default for QuantumConfig {
    fn default() -> Self {
        QuantumConfig {
            epsilon: 1.0,
            epsilon_theta: 1.0,
            eta: 0.1,
            delta: 0.1,
            gamma: None,
            divisor: 1.0,
            vector_noise: VectorNoise::Bounded,
            delta_grid: None,
        }
    }
}

impl QuantumConfig {
    pub fn deltas(&self) -> Vec<f64> {
        self.delta_grid.clone().unwrap_or_else(|| vec![self.delta])
    }

    /// Configured failure probability, or `1/dim`.
    pub fn gamma_for(&self, dim: usize) -> f64 {
        self.gamma.unwrap_or(1.0 / dim.max(1) as f64)
    }

    pub fn request(&self, p_major: f64, delta: f64, dim: usize) -> QpcaRequest {
        let mut r = QpcaRequest::new(p_major, self.epsilon, self.epsilon_theta, self.eta, delta);
        r.gamma = self.gamma_for(dim);
        r.divisor = self.divisor;
        r.vector_noise = self.vector_noise;
        r
    }

    pub fn error_params(&self) -> QuantumErrorParams {
        let mut e = QuantumErrorParams::new(self.epsilon, self.epsilon_theta, self.eta, self.delta);
        e.divisor = self.divisor;
        e
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossoverConfig {
    #[serde(default = "default_n_range")]
    pub n_range: [f64; 2],
    #[serde(default = "default_per_decade")]
    pub points_per_decade: usize,
    #[serde(default = "default_d_grid")]
    pub d_grid: Vec<f64>,
    #[serde(default)]
    pub growth: GrowthModel,
    /// Defaults to randomized PCA for major-only variants and full SVD
    /// for major+minor ones.
    #[serde(default)]
    pub classical: Option<ClassicalVariant>,
}

fn default_n_range() -> [f64; 2] {
    [1e3, 1e12]
}

fn default_per_decade() -> usize {
    4
}

fn default_d_grid() -> Vec<f64> {
    vec![10.0, 20.0, 30.0, 44.0, 50.0, 75.0, 100.0]
}

impl Default for CrossoverConfig {
    fn default() -> Self {
        CrossoverConfig {
            n_range: default_n_range(),
            points_per_decade: default_per_decade(),
            d_grid: default_d_grid(),
            growth: GrowthModel::Fixed,
            classical: None,
        }
    }
}

impl CrossoverConfig {
    /// Log-spaced grid from `n_range[0]` to `n_range[1]`.
    pub fn n_grid(&self) -> Result<Vec<f64>> {
        let [lo, hi] = self.n_range;
        if !(lo >= 1.0 && hi >= lo) || self.points_per_decade == 0 {
            return Err(Error::Config(format!("bad crossover n_range {lo}..{hi}")));
        }
        let steps = ((hi / lo).log10() * self.points_per_decade as f64).round() as usize;
        Ok((0..=steps)
            .map(|i| {
                let v = lo * 10f64.powf(i as f64 / self.points_per_decade as f64);
                // tidy to 12 significant digits so grid values print cleanly
                format!("{v:.11e}").parse().unwrap_or(v)
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QramSection {
    #[serde(default = "default_qram_configs")]
    pub configs: Vec<String>,
    #[serde(default = "default_qram_n")]
    pub n: f64,
    #[serde(default = "default_qram_d")]
    pub d: f64,
    #[serde(default = "one_bit")]
    pub word_size: u32,
    #[serde(default)]
    pub allow_extrapolation: bool,
}

fn default_qram_configs() -> Vec<String> {
    vec!["optimistic".into(), "realistic".into()]
}

fn default_qram_n() -> f64 {
    1e7
}

fn default_qram_d() -> f64 {
    44.0
}

fn one_bit() -> u32 {
    1
}

impl Default for QramSection {
    fn default() -> Self {
        QramSection {
            configs: default_qram_configs(),
            n: default_qram_n(),
            d: default_qram_d(),
            word_size: 1,
            allow_extrapolation: false,
        }
    }
}

/// Which vector the tomography study reconstructs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TomographySource {
    /// First principal component of the configured dataset.
    #[default]
    FirstComponent,
    /// Uniform unit vector of dimension `dim`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographyConfig {
    #[serde(default)]
    pub source: TomographySource,
    #[serde(default = "default_tomo_dim")]
    pub dim: usize,
    #[serde(default = "default_tomo_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_budgets")]
    pub budgets: Vec<u64>,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default = "default_hist_samples")]
    pub histogram_samples: u64,
    #[serde(default = "default_hist_reps")]
    pub histogram_repetitions: usize,
    #[serde(default = "one")]
    pub divisor: f64,
    #[serde(default = "default_norm")]
    pub norm: TomographyNorm,
}

fn default_tomo_dim() -> usize {
    55
}

fn default_tomo_deltas() -> Vec<f64> {
    vec![0.1, 0.05, 0.03]
}

fn default_budgets() -> Vec<u64> {
    vec![1_000, 10_000, 100_000, 1_000_000]
}

fn default_reps() -> usize {
    100
}

fn default_hist_samples() -> u64 {
    20_861
}

fn default_hist_reps() -> usize {
    1000
}

fn default_norm() -> TomographyNorm {
    TomographyNorm::L2
}

impl Default for TomographyConfig {
    fn default() -> Self {
        TomographyConfig {
            source: TomographySource::FirstComponent,
            dim: default_tomo_dim(),
            deltas: default_tomo_deltas(),
            budgets: default_budgets(),
            repetitions: default_reps(),
            histogram_samples: default_hist_samples(),
            histogram_repetitions: default_hist_reps(),
            divisor: 1.0,
            norm: TomographyNorm::L2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QmeansConfig {
    #[serde(default = "default_qm_rows")]
    pub n_rows: usize,
    #[serde(default = "default_k_grid")]
    pub k_grid: Vec<usize>,
    #[serde(default = "default_qm_delta")]
    pub delta: f64,
    #[serde(default = "default_qm_delta")]
    pub eps_dist: f64,
    #[serde(default = "default_qm_fail")]
    pub delta_fail: f64,
    #[serde(default = "default_qm_seeds")]
    pub seeds: Vec<u64>,
}

fn default_qm_rows() -> usize {
    10_000
}

fn default_k_grid() -> Vec<usize> {
    (1..=10).map(|i| i * 10).collect()
}

fn default_qm_delta() -> f64 {
    0.0005
}

fn default_qm_fail() -> f64 {
    1e-3
}

fn default_qm_seeds() -> Vec<u64> {
    (0..5).collect()
}

impl Default for QmeansConfig {
    fn default() -> Self {
        QmeansConfig {
            n_rows: default_qm_rows(),
            k_grid: default_k_grid(),
            delta: default_qm_delta(),
            eps_dist: default_qm_delta(),
            delta_fail: default_qm_fail(),
            seeds: default_qm_seeds(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative dataset paths resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(p), Some(dir)) = (cfg.dataset.path.as_mut(), path.parent()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.path.is_some() && self.dataset.synthetic.is_some() {
            return Err(Error::Config("dataset needs either `path` or `synthetic`, not both".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must not be empty".into()));
        }
        if self.detector.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::Config("every alpha must lie in (0, 1)".into()));
        }
        if self.detector.variant.uses_minors()
            && self.detector.theta_min.is_none()
            && self.detector.p_minor.is_none()
        {
            return Err(Error::Config(format!(
                "variant {} needs `theta_min` or `p_minor`",
                self.detector.variant.name()
            )));
        }
        Ok(())
    }

    /// Checks that referenced files exist; called at run start.
    pub fn check_paths(&self) -> Result<()> {
        if let Some(p) = &self.dataset.path {
            if !p.exists() {
                return Err(Error::Data(crate::data::DataError::MissingFile(p.display().to_string())));
            }
        }
        Ok(())
    }
}
