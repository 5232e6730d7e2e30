//! Run configuration: JSON with dotted overrides.
//!
//! Every block rejects unknown keys. Ranges are checked in [`RunConfig::validate`],
//! before anything is computed or written.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::counterexample::{BoundaryLayerProfile, SweepSpec};
use crate::error::{Error, Result};
use crate::fields::Grid;
use crate::operators::{AdjustedIPParams, RandomFieldSpec};
use crate::spectrum::CoercivitySearch;
use crate::timestepping::SchemeConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Disk,
    Torus,
}

/// Grid block. On the torus `n_angular` and `n_radial` are the node counts
/// along `x` and `y`, and `size` is the period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub kind: DomainKind,
    pub size: f64,
    pub n_angular: usize,
    pub n_radial: usize,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self { kind: DomainKind::Disk, size: 1.0, n_angular: 128, n_radial: 64 }
    }
}

impl DomainConfig {
    pub fn build(&self) -> Result<Arc<Grid>> {
        match self.kind {
            DomainKind::Disk => Grid::disk(self.size, self.n_angular, self.n_radial),
            DomainKind::Torus => Grid::torus(self.size, self.n_angular, self.n_radial),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Project,
    StokesPressure,
    EvolveLinear,
    EvolveNonlinear,
    Counterexample,
    CoercivityScan,
    Spectrum,
    EnergyReport,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Project => "project",
            Experiment::StokesPressure => "stokes-pressure",
            Experiment::EvolveLinear => "evolve-linear",
            Experiment::EvolveNonlinear => "evolve-nonlinear",
            Experiment::Counterexample => "counterexample",
            Experiment::CoercivityScan => "coercivity-scan",
            Experiment::Spectrum => "spectrum",
            Experiment::EnergyReport => "energy-report",
        }
    }
}

/// A number, or the string `"fit"` to take the value from a coercivity fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Fitted {
    Value(f64),
    Fit(FitTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitTag {
    Fit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeBlock {
    pub dt: f64,
    pub steps: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub c_eps: Fitted,
    pub c1: Fitted,
    pub c2: Fitted,
    pub eps_e: f64,
    pub kappa0: f64,
    pub ineq_c: f64,
    pub decay_rate: Fitted,
    pub blowup: f64,
}

impl Default for SchemeBlock {
    fn default() -> Self {
        let s = SchemeConfig::default();
        Self {
            dt: s.dt,
            steps: s.n_steps,
            alpha: s.alpha,
            epsilon: s.adjusted.epsilon,
            c_eps: Fitted::Fit(FitTag::Fit),
            c1: Fitted::Fit(FitTag::Fit),
            c2: Fitted::Fit(FitTag::Fit),
            eps_e: s.eps_e,
            kappa0: s.kappa0,
            ineq_c: s.ineq_c,
            decay_rate: Fitted::Fit(FitTag::Fit),
            blowup: s.blowup,
        }
    }
}

impl SchemeBlock {
    /// Scheme with fitted values substituted: `(C_ε, c)` from the coercivity
    /// fit and `(c1, c2)` from the energy fit.
    pub fn scheme(&self, nonlinear: bool, fit: Option<(f64, f64)>, energy: Option<(f64, f64)>) -> Result<SchemeConfig> {
        let pick = |v: Fitted, fitted: Option<f64>, what: &str| match (v, fitted) {
            (Fitted::Value(x), _) => Ok(x),
            (Fitted::Fit(_), Some(x)) => Ok(x),
            (Fitted::Fit(_), None) => Err(Error::Config(format!("{what} = \"fit\" needs a coercivity fit"))),
        };
        let c = pick(self.c_eps, fit.map(|f| f.0), "scheme.c_eps")?;
        // The fitted c bounds the decay of the combined energy by 1 − δt/c.
        let rate = pick(self.decay_rate, fit.map(|f| 1.0 / f.1), "scheme.decay_rate")?;
        let c1 = pick(self.c1, energy.map(|e| e.0), "scheme.c1")?;
        let c2 = pick(self.c2, energy.map(|e| e.1), "scheme.c2")?;
        Ok(SchemeConfig {
            dt: self.dt,
            n_steps: self.steps,
            alpha: self.alpha,
            nonlinear,
            adjusted: AdjustedIPParams::new(self.epsilon, c)?,
            c1,
            c2,
            eps_e: self.eps_e,
            kappa0: self.kappa0,
            ineq_c: self.ineq_c,
            decay_rate: rate,
            blowup: self.blowup,
            ..SchemeConfig::default()
        })
    }

    pub fn needs_energy_fit(&self) -> bool {
        matches!(self.c1, Fitted::Fit(_)) || matches!(self.c2, Fitted::Fit(_))
    }

    pub fn needs_fit(&self) -> bool {
        matches!(self.c_eps, Fitted::Fit(_)) || matches!(self.decay_rate, Fitted::Fit(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Zero,
    Random,
    RandomSolenoidal,
    /// `(sin(2πy/L), 0)` on the torus.
    Shear,
    /// `(1 − r²)(−y, x)` on the disk.
    Swirl,
    /// Gradient of the first non-constant Neumann eigenfunction.
    DivergenceMode,
    Counterexample,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialBlock {
    pub field: FieldKind,
    pub amplitude: f64,
    pub max_mode: usize,
    pub max_degree: usize,
    pub gamma2: f64,
    pub path: Option<PathBuf>,
}

impl Default for InitialBlock {
    fn default() -> Self {
        let spec = RandomFieldSpec::default();
        Self {
            field: FieldKind::Random,
            amplitude: 1.0,
            max_mode: spec.max_mode,
            max_degree: spec.max_degree,
            gamma2: -64.0,
            path: None,
        }
    }
}

impl InitialBlock {
    pub fn spec(&self) -> RandomFieldSpec {
        RandomFieldSpec { max_mode: self.max_mode, max_degree: self.max_degree }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleBlock {
    pub epsilon: f64,
    pub c: f64,
    pub profile: BoundaryLayerProfile,
    pub sweep: SweepSpec,
    /// Steps of the linear scheme in the energy demonstration.
    pub energy_steps: usize,
}

impl Default for CounterexampleBlock {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            c: 5.0,
            profile: BoundaryLayerProfile::dipole(),
            sweep: SweepSpec::default(),
            energy_steps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumBlock {
    pub count: usize,
    pub max_mode: usize,
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        Self { count: 15, max_mode: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoercivityBlock {
    pub epsilons: Vec<f64>,
    pub search: CoercivitySearch,
    pub basis: RandomFieldSpec,
    pub alphas: Vec<f64>,
    /// Random fields checked against each fit.
    pub samples: usize,
}

impl Default for CoercivityBlock {
    fn default() -> Self {
        Self {
            epsilons: vec![0.01, 0.05, 0.1, 0.5],
            search: CoercivitySearch::default(),
            basis: RandomFieldSpec::default(),
            alphas: vec![0.0, 1.0, 10.0, 100.0],
            samples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub experiment: Experiment,
    pub scheme: SchemeBlock,
    pub initial: InitialBlock,
    pub counterexample: CounterexampleBlock,
    pub spectrum: SpectrumBlock,
    pub coercivity: CoercivityBlock,
    pub output: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: DomainConfig::default(),
            experiment: Experiment::Project,
            scheme: SchemeBlock::default(),
            initial: InitialBlock::default(),
            counterexample: CounterexampleBlock::default(),
            spectrum: SpectrumBlock::default(),
            coercivity: CoercivityBlock::default(),
            output: PathBuf::from("out"),
            seed: 0,
        }
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl RunConfig {
    pub fn from_value(v: Value) -> Result<Self> {
        serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Value> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Checks every range the experiments rely on.
    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        if !(d.size > 0.0 && d.size.is_finite()) {
            return bad(format!("domain.size must be positive, got {}", d.size));
        }
        if d.n_angular < 4 || d.n_radial < 3 {
            return bad(format!("grid {}x{} too small", d.n_angular, d.n_radial));
        }
        let s = &self.scheme;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return bad(format!("scheme.dt must be positive, got {}", s.dt));
        }
        if !(s.dt < s.kappa0) {
            return bad(format!("scheme.dt = {} must be below scheme.kappa0 = {}", s.dt, s.kappa0));
        }
        if !(s.alpha >= 0.0) {
            return bad(format!("scheme.alpha must be non-negative, got {}", s.alpha));
        }
        if !(s.epsilon > 0.0 && s.epsilon.is_finite()) {
            return bad(format!("scheme.epsilon must be positive, got {}", s.epsilon));
        }
        for (name, v) in [("c_eps", s.c_eps), ("decay_rate", s.decay_rate), ("c1", s.c1), ("c2", s.c2)] {
            if let Fitted::Value(x) = v {
                if !(x >= 0.0 && x.is_finite()) {
                    return bad(format!("scheme.{name} must be non-negative, got {x}"));
                }
            }
        }
        if !((0.0..2.0).contains(&s.eps_e) && s.ineq_c > 0.0 && s.blowup > 1.0) {
            return bad("scheme energy constants out of range");
        }
        let i = &self.initial;
        if !i.amplitude.is_finite() {
            return bad("initial.amplitude must be finite");
        }
        let disk = d.kind == DomainKind::Disk;
        match i.field {
            FieldKind::File if i.path.is_none() => return bad("initial.field = file needs initial.path"),
            FieldKind::Shear if disk => return bad("initial.field = shear is a torus field"),
            FieldKind::Swirl | FieldKind::DivergenceMode | FieldKind::Counterexample if !disk => {
                return bad(format!("initial.field = {:?} needs the disk", i.field))
            }
            _ => {}
        }
        if self.experiment == Experiment::Counterexample && !disk {
            return bad("experiment = counterexample needs the disk");
        }
        let c = &self.counterexample;
        if !(c.epsilon >= 0.0 && c.c >= 0.0) {
            return bad("counterexample.epsilon and counterexample.c must be non-negative");
        }
        if c.sweep.values().is_empty() || !(c.sweep.min_abs > 0.0 && c.sweep.max_abs >= c.sweep.min_abs) {
            return bad("counterexample.sweep needs 0 < min_abs <= max_abs and count >= 1");
        }
        if disk {
            c.profile.check(d.size).map_err(|e| Error::Config(format!("counterexample.profile: {e}")))?;
        }
        if self.spectrum.count == 0 {
            return bad("spectrum.count must be positive");
        }
        let co = &self.coercivity;
        if co.epsilons.iter().any(|e| !(*e > 0.0)) || co.epsilons.is_empty() {
            return bad("coercivity.epsilons must be positive and non-empty");
        }
        if co.alphas.iter().any(|a| !(*a >= 0.0)) {
            return bad("coercivity.alphas must be non-negative");
        }
        if !(co.search.c_min > 0.0 && co.search.c_max > 0.0) {
            return bad("coercivity.search needs positive c_min and c_max");
        }
        Ok(())
    }
}

/// Parses `key=value`. The value is read as JSON when it parses, otherwise
/// taken as a string.
pub fn parse_assignment(s: &str) -> Result<(String, Value)> {
    let (k, v) = s.split_once('=').ok_or_else(|| Error::Config(format!("expected key=value, got `{s}`")))?;
    let k = k.trim();
    if k.is_empty() {
        return bad(format!("empty key in `{s}`"));
    }
    Ok((k.to_string(), parse_scalar(v.trim())))
}

pub fn parse_scalar(v: &str) -> Value {
    serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()))
}

/// Sets `a.b.c` in a JSON object, creating intermediate objects.
pub fn set_dotted(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        let obj = match cur {
            Value::Object(m) => m,
            _ => return bad(format!("`{}` is not an object", parts[..i].join("."))),
        };
        if i + 1 == parts.len() {
            obj.insert(p.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(p.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one part")
}

/// `key=v1,v2,...` into the key and one JSON value per entry.
pub fn parse_sweep(s: &str) -> Result<(String, Vec<Value>)> {
    let (k, vs) = s.split_once('=').ok_or_else(|| Error::Config(format!("expected key=v1,v2,..., got `{s}`")))?;
    let vals: Vec<Value> = vs.split(',').map(|v| parse_scalar(v.trim())).collect();
    if k.trim().is_empty() || vals.is_empty() {
        return bad(format!("empty sweep `{s}`"));
    }
    Ok((k.trim().to_string(), vals))
}
