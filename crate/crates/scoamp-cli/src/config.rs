//! Experiment configuration: TOML or JSON, unknown keys rejected, every
//! value validated before anything is allocated.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use scoamp::coupling::{Construction, Ensemble};
use scoamp::denoiser::Prior;
use scoamp::oamp::Filter;
use scoamp::spectra::{RLaw, Spectrum};

/// A problem with the configuration or the command line. Reported with exit
/// code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<SeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdSpec>,
}

impl ExperimentConfig {
    /// Reads a config, picking the format from the file extension.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text),
            Some("json") => Self::from_json(&text),
            _ => bad(format!("{}: config must end in .toml or .json", path.display())),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("invalid config: {}", e.message())))
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))
    }

    /// SHA-256 of the canonical JSON form. Covers everything that affects
    /// the data, including overrides from the command line.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canon).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn system(&self) -> Result<&SystemSpec, ConfigError> {
        self.system.as_ref().ok_or_else(|| missing("system"))
    }
}

pub fn missing(key: &str) -> ConfigError {
    ConfigError(format!("missing key `{key}`"))
}

/// Signal prior, written `{ prior = "bg", rho = 0.1 }` or
/// `{ prior = "gaussian" }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "prior", deny_unknown_fields)]
pub enum PriorSpec {
    #[serde(rename = "bg")]
    BernoulliGaussian { rho: f64 },
    #[serde(rename = "gaussian")]
    Gaussian,
}

impl PriorSpec {
    pub fn build(&self) -> Result<Prior, ConfigError> {
        match *self {
            PriorSpec::BernoulliGaussian { rho } => Prior::bernoulli_gaussian(rho).map_err(|e| ConfigError(e.to_string())),
            PriorSpec::Gaussian => Ok(Prior::Gaussian),
        }
    }

    /// Default lower end of threshold brackets.
    pub fn floor(&self) -> f64 {
        match *self {
            PriorSpec::BernoulliGaussian { rho } => rho,
            PriorSpec::Gaussian => 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    IidGaussian,
    RowOrthogonal,
    Geometric,
}

fn ensemble(kind: EnsembleKind, kappa: Option<f64>) -> Result<Ensemble, ConfigError> {
    match (kind, kappa) {
        (EnsembleKind::Geometric, Some(kappa)) if kappa.is_finite() && kappa >= 1.0 => Ok(Ensemble::Geometric { kappa }),
        (EnsembleKind::Geometric, Some(kappa)) => bad(format!("kappa must be at least 1, got {kappa}")),
        (EnsembleKind::Geometric, None) => Err(missing("kappa")),
        (_, Some(_)) => bad("kappa is only accepted with the geometric ensemble"),
        (EnsembleKind::IidGaussian, None) => Ok(Ensemble::IidGaussian),
        (EnsembleKind::RowOrthogonal, None) => Ok(Ensemble::RowOrthogonal),
    }
}

fn sigma2(snr_db: f64) -> Result<f64, ConfigError> {
    if !snr_db.is_finite() {
        return bad(format!("snr_db must be finite, got {snr_db}"));
    }
    Ok(10f64.powf(-snr_db / 10.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstructionSpec {
    #[default]
    Auto,
    Hadamard,
    Haar,
}

/// Coupled measurement system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(rename = "L")]
    pub sections: usize,
    #[serde(rename = "W")]
    pub width: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub ensemble: EnsembleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// `"bg"` (needs `rho`) or `"gaussian"`.
    #[serde(default = "default_prior_name")]
    pub prior: String,
    pub snr_db: f64,
    #[serde(default)]
    pub construction: ConstructionSpec,
}

fn default_prior_name() -> String {
    "bg".into()
}

impl SystemSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sections == 0 || self.n == 0 || self.m == 0 {
            return bad("L, N and M must be positive");
        }
        if self.width >= self.sections {
            return bad(format!("W = {} needs L > W, got L = {}", self.width, self.sections));
        }
        ensemble(self.ensemble, self.kappa)?;
        self.prior()?;
        sigma2(self.snr_db)?;
        Ok(())
    }

    pub fn prior_spec(&self) -> Result<PriorSpec, ConfigError> {
        match (self.prior.as_str(), self.rho) {
            ("bg", Some(rho)) => Ok(PriorSpec::BernoulliGaussian { rho }),
            ("bg", None) => Err(missing("rho")),
            ("gaussian", None) => Ok(PriorSpec::Gaussian),
            ("gaussian", Some(_)) => bad("rho is only accepted with the bg prior"),
            (other, _) => bad(format!("unknown prior `{other}`, expected bg or gaussian")),
        }
    }

    pub fn prior(&self) -> Result<Prior, ConfigError> {
        self.prior_spec()?.build()
    }

    pub fn ensemble(&self) -> Result<Ensemble, ConfigError> {
        ensemble(self.ensemble, self.kappa)
    }

    pub fn sigma2(&self) -> Result<f64, ConfigError> {
        sigma2(self.snr_db)
    }

    pub fn delta(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    pub fn construction(&self) -> Construction {
        match self.construction {
            ConstructionSpec::Auto => Construction::Auto,
            ConstructionSpec::Hadamard => Construction::Hadamard,
            ConstructionSpec::Haar => Construction::Haar,
        }
    }

    /// Uncoupled law of one row block at the configured `δ`.
    pub fn spectrum(&self) -> Result<Spectrum, ConfigError> {
        self.ensemble()?.spectrum(self.delta()).map_err(|e| ConfigError(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    #[default]
    Oamp,
    LmOamp,
    Amp,
}

impl std::str::FromStr for Algo {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "oamp" => Ok(Algo::Oamp),
            "lm-oamp" => Ok(Algo::LmOamp),
            "amp" => Ok(Algo::Amp),
            _ => bad(format!("unknown algo `{s}`, expected oamp, lm-oamp or amp")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterSpec {
    #[default]
    Lmmse,
    MatchedFilter,
    ZeroForcing,
}

impl FilterSpec {
    pub fn build(self) -> Filter {
        match self {
            FilterSpec::Lmmse => Filter::Lmmse,
            FilterSpec::MatchedFilter => Filter::MatchedFilter,
            FilterSpec::ZeroForcing => Filter::ZeroForcing,
        }
    }
}

impl std::str::FromStr for FilterSpec {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "lmmse" => Ok(FilterSpec::Lmmse),
            "matched-filter" => Ok(FilterSpec::MatchedFilter),
            "zero-forcing" => Ok(FilterSpec::ZeroForcing),
            _ => bad(format!("unknown filter `{s}`, expected lmmse, matched-filter or zero-forcing")),
        }
    }
}

/// One operating point of a simulation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    #[serde(default)]
    pub algo: Algo,
    #[serde(rename = "T", default = "default_t")]
    pub iterations: usize,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default = "unit")]
    pub zeta: f64,
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub early_stop: Option<f64>,
    /// Sweep over `(M, W, ζ)`; the system values are used when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Point>,
}

fn default_t() -> usize {
    200
}

impl Default for SimulateSpec {
    fn default() -> Self {
        SimulateSpec {
            algo: Algo::Oamp,
            iterations: default_t(),
            trials: 1,
            zeta: 1.0,
            filter: FilterSpec::Lmmse,
            early_stop: None,
            points: Vec::new(),
        }
    }
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

impl SimulateSpec {
    pub fn validate(&self, system: &SystemSpec) -> Result<(), ConfigError> {
        if self.iterations == 0 || self.trials == 0 {
            return bad("T and trials must be positive");
        }
        if self.algo == Algo::LmOamp && self.iterations > scoamp::lmoamp::MAX_ITERATIONS {
            return bad(format!("lm-oamp keeps at most {} iterations, got T = {}", scoamp::lmoamp::MAX_ITERATIONS, self.iterations));
        }
        if self.algo == Algo::Amp && system.ensemble != EnsembleKind::IidGaussian {
            return bad("amp requires the iid-gaussian ensemble");
        }
        if self.algo != Algo::Oamp && self.filter != FilterSpec::Lmmse {
            return bad("filter applies to oamp only");
        }
        for p in self.points() {
            let (_, zeta) = p.resolve(system, self)?;
            if self.algo == Algo::LmOamp && zeta != 1.0 {
                return bad("lm-oamp runs undamped; zeta must be 1");
            }
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<Point> {
        if self.points.is_empty() {
            vec![Point { m: 0, width: None, zeta: None }]
        } else {
            self.points.clone()
        }
    }
}

impl Point {
    /// The system and damping of this point, checked.
    pub fn resolve(&self, system: &SystemSpec, sim: &SimulateSpec) -> Result<(SystemSpec, f64), ConfigError> {
        let mut s = system.clone();
        if self.m > 0 {
            s.m = self.m;
        }
        if let Some(w) = self.width {
            s.width = w;
        }
        s.validate()?;
        let zeta = self.zeta.unwrap_or(sim.zeta);
        if !(zeta > 0.0 && zeta <= 1.0) {
            return bad(format!("zeta must lie in (0, 1], got {zeta}"));
        }
        Ok((s, zeta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeKindSpec {
    #[default]
    Bayes,
    Oamp,
    Lm,
    Approx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeSpec {
    #[serde(default)]
    pub kind: SeKindSpec,
    /// Filter of the `oamp` kind.
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(rename = "T", default = "default_se_t")]
    pub iterations: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Common initial `v_BA` of every row section; the prior energy when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artificial: Option<f64>,
    /// Second recursion run alongside, adding its column and the difference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<SeKindSpec>,
    /// Iterations written to the CSV; all when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<usize>,
    /// Also report the uncoupled fixed points from the standard and the
    /// artificial initialization.
    #[serde(default)]
    pub uncoupled_reference: bool,
}

impl Default for SeSpec {
    fn default() -> Self {
        SeSpec {
            kind: SeKindSpec::Bayes,
            filter: FilterSpec::Lmmse,
            iterations: default_se_t(),
            tol: default_tol(),
            artificial: None,
            compare: None,
            snapshots: Vec::new(),
            uncoupled_reference: false,
        }
    }
}

fn default_se_t() -> usize {
    scoamp::se::DEFAULT_ITERATIONS
}

fn default_tol() -> f64 {
    scoamp::se::DEFAULT_TOL
}

impl SeSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.iterations == 0 {
            return bad("T must be positive");
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return bad(format!("tol must be nonnegative, got {}", self.tol));
        }
        if let Some(v) = self.artificial {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("artificial must be positive, got {v}"));
            }
        }
        if self.snapshots.contains(&0) {
            return bad("snapshots count iterations from 1");
        }
        Ok(())
    }
}

/// A spectrum family, with `delta` fixed or left to a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    pub kind: EnsembleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

impl SpectrumSpec {
    pub fn ensemble(&self) -> Result<Ensemble, ConfigError> {
        ensemble(self.kind, self.kappa)
    }

    pub fn kappa(&self) -> f64 {
        match self.kind {
            EnsembleKind::Geometric => self.kappa.unwrap_or(f64::NAN),
            _ => 1.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            EnsembleKind::IidGaussian => "iid-gaussian",
            EnsembleKind::RowOrthogonal => "row-orthogonal",
            EnsembleKind::Geometric => "geometric",
        }
    }

    /// R function of the uncoupled law at `delta`; the closed form for
    /// i.i.d. Gaussian matrices.
    pub fn r_law(&self, delta: f64, law: LawSpec) -> scoamp::Result<RLaw> {
        let spec = self.ensemble().map_err(|e| scoamp::Error::Config(e.0))?.spectrum(delta)?;
        match (law, self.kind) {
            (LawSpec::CoupledLimit, _) => RLaw::coupled_limit(&spec),
            (LawSpec::Exact, EnsembleKind::IidGaussian) => Ok(RLaw::Rational { delta }),
            (LawSpec::Exact, _) => Ok(RLaw::Exact(spec)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawSpec {
    /// The uncoupled law itself.
    #[default]
    Exact,
    /// Limit of the row-section law as the coupling width grows.
    CoupledLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub spectrum: SpectrumSpec,
    #[serde(default)]
    pub law: LawSpec,
    pub prior: PriorSpec,
    pub snr_db: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Curves for several `δ`; `spectrum.delta` is used when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deltas: Vec<f64>,
}

fn default_grid() -> usize {
    512
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.spectrum.ensemble()?;
        self.prior.build()?;
        sigma2(self.snr_db)?;
        if self.grid < 32 {
            return bad(format!("grid needs at least 32 points, got {}", self.grid));
        }
        let deltas = self.deltas()?;
        if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return bad(format!("delta must be positive, got {d}"));
        }
        Ok(())
    }

    pub fn deltas(&self) -> Result<Vec<f64>, ConfigError> {
        if !self.deltas.is_empty() {
            return Ok(self.deltas.clone());
        }
        self.spectrum.delta.map(|d| vec![d]).ok_or_else(|| missing("spectrum.delta"))
    }

    pub fn sigma2(&self) -> Result<f64, ConfigError> {
        sigma2(self.snr_db)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSpec {
    /// Families to evaluate; `delta` entries are ignored.
    pub ensembles: Vec<SpectrumSpec>,
    /// Coupling widths; `0` is the uncoupled system.
    #[serde(rename = "W")]
    pub widths: Vec<usize>,
    #[serde(rename = "L", default = "default_l")]
    pub sections: usize,
    pub prior: PriorSpec,
    pub snr_db: f64,
    #[serde(rename = "T", default = "default_se_t")]
    pub iterations: usize,
    /// Bracket `[lo, hi]` of every scan; `lo` defaults to the prior's
    /// sparsity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default = "unit")]
    pub hi: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_threshold_tol")]
    pub tol: f64,
}

fn default_l() -> usize {
    50
}

fn default_step() -> f64 {
    0.01
}

fn default_threshold_tol() -> f64 {
    1e-4
}

impl ThresholdSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ensembles.is_empty() {
            return Err(missing("ensembles"));
        }
        if self.widths.is_empty() {
            return Err(missing("W"));
        }
        for e in &self.ensembles {
            e.ensemble()?;
        }
        if let Some(&w) = self.widths.iter().find(|&&w| w > 0 && w >= self.sections) {
            return bad(format!("W = {w} needs L > W, got L = {}", self.sections));
        }
        self.prior.build()?;
        sigma2(self.snr_db)?;
        let lo = self.lo();
        if !(lo > 0.0 && lo < self.hi && self.hi.is_finite()) {
            return bad(format!("threshold bracket must satisfy 0 < lo < hi, got [{lo}, {}]", self.hi));
        }
        if !(self.step > 0.0 && self.tol > 0.0) || self.iterations == 0 {
            return bad("step, tol and T must be positive");
        }
        Ok(())
    }

    pub fn lo(&self) -> f64 {
        self.lo.unwrap_or_else(|| self.prior.floor())
    }

    pub fn sigma2(&self) -> Result<f64, ConfigError> {
        sigma2(self.snr_db)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYSTEM: &str = r#"
        seed = 3
        [system]
        L = 4
        W = 1
        N = 64
        M = 20
        ensemble = "iid-gaussian"
        rho = 0.1
        snr_db = 30
    "#;

    #[test]
    fn parses_toml_and_json_alike() {
        let a = ExperimentConfig::from_toml(SYSTEM).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        let b = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        let s = a.system().unwrap();
        s.validate().unwrap();
        assert!((s.sigma2().unwrap() - 1e-3).abs() < 1e-15);
        assert_eq!(s.prior().unwrap(), Prior::BernoulliGaussian { rho: 0.1 });
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ExperimentConfig::from_toml(&format!("{SYSTEM}\nbogus = 1\n")).unwrap_err();
        assert!(err.0.contains("bogus"), "{err}");
    }

    #[test]
    fn missing_key_named() {
        let err = ExperimentConfig::from_toml(&SYSTEM.replace("M = 20", "")).unwrap_err();
        assert!(err.0.contains("`M`"), "{err}");
        let cfg = ExperimentConfig::from_toml(&SYSTEM.replace("rho = 0.1", "")).unwrap();
        assert!(cfg.system().unwrap().validate().unwrap_err().0.contains("`rho`"));
    }

    #[test]
    fn prior_and_spectrum_forms() {
        let p: PriorSpec = serde_json::from_str(r#"{"prior": "bg", "rho": 0.1}"#).unwrap();
        assert_eq!(p, PriorSpec::BernoulliGaussian { rho: 0.1 });
        let g: PriorSpec = serde_json::from_str(r#"{"prior": "gaussian"}"#).unwrap();
        assert_eq!(g, PriorSpec::Gaussian);
        assert!(serde_json::from_str::<PriorSpec>(r#"{"prior": "bg", "rho": 0.1, "x": 1}"#).is_err());
        let s: SpectrumSpec = serde_json::from_str(r#"{"kind": "geometric", "delta": 0.5, "kappa": 10}"#).unwrap();
        assert_eq!(s.ensemble().unwrap(), Ensemble::Geometric { kappa: 10.0 });
        let s: SpectrumSpec = serde_json::from_str(r#"{"kind": "row-orthogonal", "kappa": 10}"#).unwrap();
        assert!(s.ensemble().is_err());
    }

    #[test]
    fn hash_tracks_values() {
        let a = ExperimentConfig::from_toml(SYSTEM).unwrap();
        let mut b = a.clone();
        b.seed = Some(4);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn invalid_values_rejected() {
        let cfg = ExperimentConfig::from_toml(&SYSTEM.replace("W = 1", "W = 4")).unwrap();
        assert!(cfg.system().unwrap().validate().is_err());
        let cfg = ExperimentConfig::from_toml(&SYSTEM.replace("\"iid-gaussian\"", "\"geometric\"")).unwrap();
        assert!(cfg.system().unwrap().validate().unwrap_err().0.contains("`kappa`"));
    }
}
