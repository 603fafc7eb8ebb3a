//! Problem configuration: the JSON schema, defaults, and validation.

use annular_core::{AnnulusPair, Weight};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    /// `(s, λ(s))` pairs of a tabulated weight.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<(f64, f64)>>,
    /// Interval of definition; defaults to the domain annulus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub r_star: f64,
    #[serde(rename = "R_star")]
    pub big_r_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSpec {
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative energy change that stops the 2-D descent.
    pub rel_energy: f64,
    /// Max-norm iterate change that stops the 2-D descent.
    pub step: f64,
    /// Largest relative residual accepted by `verify`.
    pub identity: f64,
    /// Most negative certificate margin accepted by `verify`.
    pub certificate: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rel_energy: 1e-8, step: 1e-5, identity: 1e-3, certificate: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Cells of the discrete 1-D minimizer.
    pub radial_grid: usize,
    /// Nodes per direction of the polar grid used by `energy` and `direct`.
    pub polar_grid: usize,
    /// Nodes per direction of the test maps of `verify`.
    pub verify_grid: usize,
    pub tolerances: Tolerances,
    pub seeds: Vec<u64>,
    pub max_iter: usize,
    /// Size of the random perturbation of 2-D starting maps.
    pub amplitude: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            radial_grid: 2048,
            polar_grid: 64,
            verify_grid: 256,
            tolerances: Tolerances::default(),
            seeds: vec![0],
            max_iter: 20_000,
            amplitude: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeSpec {
    pub fixed_outer_boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub directory: String,
    pub formats: Vec<Format>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { directory: "out".into(), formats: vec![Format::Csv, Format::Json] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "R_star")]
    TargetOuter,
    #[serde(rename = "R")]
    DomainOuter,
    #[serde(rename = "rho")]
    Rho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub weight: WeightSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<PairSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub mode: ModeSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

impl PairSpec {
    fn validate(&self) -> Result<(), CliError> {
        positive("pair.r", self.r)?;
        positive("pair.r_star", self.r_star)?;
        if !(self.big_r > self.r && self.big_r.is_finite()) {
            return Err(invalid("pair.R", format!("domain radii ordering: need r < R, got {} and {}", self.r, self.big_r)));
        }
        if !(self.big_r_star > self.r_star && self.big_r_star.is_finite()) {
            return Err(invalid(
                "pair.R_star",
                format!("target radii ordering: need r_star < R_star, got {} and {}", self.r_star, self.big_r_star),
            ));
        }
        Ok(())
    }

    pub fn annulus(&self) -> Result<AnnulusPair, CliError> {
        AnnulusPair::new(self.r, self.big_r, self.r_star, self.big_r_star).map_err(|e| invalid("pair", e))
    }
}

impl WeightSpec {
    fn field(&self, name: &str, v: Option<f64>) -> Result<f64, CliError> {
        v.ok_or_else(|| invalid(&format!("weight.{name}"), format!("required for weight kind `{}`", self.kind)))
    }

    /// Builds the weight on its configured domain, or on `fallback`.
    pub fn to_weight(&self, fallback: (f64, f64)) -> Result<Weight, CliError> {
        let (lo, hi) = self.domain.unwrap_or(fallback);
        let w = match self.kind.as_str() {
            "constant" => Weight::constant(self.field("value", self.value)?, lo, hi),
            "power" => Weight::power(self.field("coeff", self.coeff)?, self.field("exponent", self.exponent)?, lo, hi),
            "exponential" => Weight::exponential(self.field("coeff", self.coeff)?, self.field("rate", self.rate)?, lo, hi),
            "sinusoidal" => Weight::sinusoidal(
                self.field("offset", self.offset)?,
                self.field("amplitude", self.amplitude)?,
                self.field("frequency", self.frequency)?,
                lo,
                hi,
            ),
            "tabulated" => {
                let samples =
                    self.samples.as_ref().ok_or_else(|| invalid("weight.samples", "required for weight kind `tabulated`"))?;
                Weight::tabulated(samples)
            }
            other => return Err(invalid("weight.kind", format!("unknown weight kind `{other}`"))),
        };
        w.map_err(|e| invalid("weight", e))
    }
}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ProblemConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(p) = &self.pair {
            p.validate()?;
        }
        if let Some(t) = &self.threshold {
            if t.rho.is_empty() {
                return Err(invalid("threshold.rho", "empty ladder"));
            }
            for &rho in &t.rho {
                if !(rho > 1.0 && rho.is_finite()) {
                    return Err(invalid("threshold.rho", format!("ratios must exceed 1, got {rho}")));
                }
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(invalid("sweep.values", "empty ladder"));
            }
        }
        let n = &self.numerics;
        let t = &n.tolerances;
        positive("numerics.tolerances.rel_energy", t.rel_energy)?;
        positive("numerics.tolerances.step", t.step)?;
        positive("numerics.tolerances.identity", t.identity)?;
        positive("numerics.tolerances.certificate", t.certificate)?;
        positive("numerics.amplitude", n.amplitude)?;
        if n.radial_grid < 4 {
            return Err(invalid("numerics.radial_grid", format!("need at least 4 cells, got {}", n.radial_grid)));
        }
        for (key, g) in [("numerics.polar_grid", n.polar_grid), ("numerics.verify_grid", n.verify_grid)] {
            if g < 8 {
                return Err(invalid(key, format!("need at least 8 nodes, got {g}")));
            }
        }
        if n.seeds.is_empty() {
            return Err(invalid("numerics.seeds", "at least one seed is required"));
        }
        if n.max_iter == 0 {
            return Err(invalid("numerics.max_iter", "must be positive"));
        }
        // Weight errors surface here rather than halfway through a command.
        self.weight()?;
        if let Some(t) = &self.threshold {
            self.threshold_weight(&t.rho)?;
        }
        Ok(())
    }

    pub fn pair(&self) -> Result<PairSpec, CliError> {
        self.pair.ok_or_else(|| invalid("pair", "missing radii: this command needs {r, R, r_star, R_star}"))
    }

    pub fn rho_ladder(&self) -> Result<&[f64], CliError> {
        self.threshold.as_ref().map(|t| t.rho.as_slice()).ok_or_else(|| invalid("threshold.rho", "missing ratio ladder"))
    }

    fn lower_radius(&self) -> f64 {
        self.pair.map_or(1.0, |p| p.r)
    }

    /// The weight on its configured domain, else on `[r, R]`, else on
    /// `[1, 2]`.
    pub fn weight(&self) -> Result<Weight, CliError> {
        let fallback = self.pair.map_or((1.0, 2.0), |p| (p.r, p.big_r));
        self.weight.to_weight(fallback)
    }

    /// The weight for threshold queries over `ladder`: its configured
    /// domain, else `[r, r · max ρ]`.
    pub fn threshold_weight(&self, ladder: &[f64]) -> Result<Weight, CliError> {
        let lo = self.lower_radius();
        self.weight.to_weight((lo, lo * ladder.iter().copied().fold(2.0, f64::max)))
    }

    pub fn writes(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }

    /// SHA-256 of the canonical JSON form of the effective configuration,
    /// leaving out the output directory.
    pub fn hash(&self) -> String {
        let mut placed = self.clone();
        placed.output.directory.clear();
        let canonical = serde_json::to_string(&placed).expect("configuration serializes");
        format!("{:x}", Sha256::digest(canonical.as_bytes()))
    }
}
