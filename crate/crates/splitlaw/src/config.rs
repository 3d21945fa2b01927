//! TOML experiment configuration: ground space, process model, run
//! parameters, and tolerance settings.

use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::intensity::{Density, IntensityMeasure};
use crate::measure::{Location, PointMeasure, Space, Window};
use crate::process::ProcessModel;
use crate::thinning::RetentionVector;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: SpaceConfig,
    pub model: ModelConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    /// "discrete" or "window".
    pub kind: String,
    /// Number of atoms (discrete).
    pub atoms: Option<usize>,
    /// Window corners (window).
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// "poisson", "polya-difference", "mixed-poisson", or "doubled-poisson".
    pub kind: String,
    /// Per-atom intensity weights (discrete Poisson-family models).
    pub weights: Option<Vec<f64>>,
    /// Constant density value (window Poisson-family models).
    pub density: Option<f64>,
    /// Affine density `intercept + slope . x` (overrides `density`).
    pub intercept: Option<f64>,
    pub slope: Option<Vec<f64>>,
    /// Density bound for rejection sampling; inferred for constant densities.
    pub bound: Option<f64>,
    /// Pólya retention odds.
    pub z: Option<f64>,
    /// Pólya base configuration as `[[atom, multiplicity], ...]`.
    pub base: Option<Vec<(usize, u32)>>,
    /// Mixture components as `[[scale, probability], ...]`.
    pub scales: Option<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Two-way retention probability.
    pub q: Option<f64>,
    /// n-way landing probabilities (overrides `q` where a vector is needed).
    pub retention: Option<Vec<f64>>,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Per-atom multiplicity cap for exact enumeration.
    #[serde(default = "default_cap")]
    pub cap: u32,
    /// Output path for JSON-lines records; stdout when absent.
    pub out: Option<String>,
    /// Number of deterministic parallel RNG streams to pool.
    #[serde(default = "default_jobs")]
    pub jobs: u64,
}

fn default_n_samples() -> usize {
    100_000
}

fn default_cap() -> u32 {
    12
}

fn default_jobs() -> u64 {
    1
}

/// Pinned tolerances by provenance of the compared quantities.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Closed-form against closed-form.
    pub exact: f64,
    /// At least one side through quadrature on a discrete/atomic space.
    pub quadrature: f64,
    /// Quadrature over a continuous window.
    pub quadrature_continuous: f64,
    /// Monte Carlo comparisons, in standard errors.
    pub mc_sigma: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            exact: 1e-12,
            quadrature: 1e-10,
            quadrature_continuous: 1e-8,
            mc_sigma: 4.0,
        }
    }
}

/// Named tolerance profile selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ToleranceProfile {
    Exact,
    Quadrature,
    Mc,
}

impl ToleranceProfile {
    /// The tolerance (or sigma multiplier for `Mc`) under `t`.
    pub fn value(self, t: &Tolerances) -> f64 {
        match self {
            ToleranceProfile::Exact => t.exact,
            ToleranceProfile::Quadrature => t.quadrature,
            ToleranceProfile::Mc => t.mc_sigma,
        }
    }
}

impl FromStr for ToleranceProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ToleranceProfile::Exact),
            "quadrature" => Ok(ToleranceProfile::Quadrature),
            "mc" => Ok(ToleranceProfile::Mc),
            other => Err(Error::Config(format!(
                "unknown tolerance profile {other:?}; expected exact, quadrature, or mc"
            ))),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.space()?;
        self.model()?;
        if let Some(q) = self.run.q {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::Config(format!("run.q = {q} must lie in (0,1)")));
            }
        }
        if let Some(r) = &self.run.retention {
            RetentionVector::new(r.clone())
                .map_err(|e| Error::Config(format!("run.retention: {e}")))?;
        }
        if self.run.n_samples == 0 {
            return Err(Error::Config("run.n_samples must be positive".into()));
        }
        if self.run.jobs == 0 {
            return Err(Error::Config("run.jobs must be positive".into()));
        }
        Ok(())
    }

    pub fn space(&self) -> Result<Space> {
        match self.space.kind.as_str() {
            "discrete" => {
                let atoms = self
                    .space
                    .atoms
                    .ok_or_else(|| Error::Config("space.atoms required for discrete".into()))?;
                if atoms == 0 {
                    return Err(Error::Config("space.atoms must be positive".into()));
                }
                Ok(Space::Discrete { atoms })
            }
            "window" => {
                let lower = self
                    .space
                    .lower
                    .clone()
                    .ok_or_else(|| Error::Config("space.lower required for window".into()))?;
                let upper = self
                    .space
                    .upper
                    .clone()
                    .ok_or_else(|| Error::Config("space.upper required for window".into()))?;
                Ok(Space::Window(Window::new(lower, upper)?))
            }
            other => Err(Error::Config(format!(
                "space.kind = {other:?}; expected discrete or window"
            ))),
        }
    }

    /// Intensity of the underlying Poisson-family component.
    fn intensity(&self) -> Result<IntensityMeasure> {
        match self.space()? {
            Space::Discrete { atoms } => {
                let weights = self
                    .model
                    .weights
                    .clone()
                    .ok_or_else(|| Error::Config("model.weights required on a discrete space".into()))?;
                if weights.len() != atoms {
                    return Err(Error::Config(format!(
                        "model.weights has {} entries for {} atoms",
                        weights.len(),
                        atoms
                    )));
                }
                IntensityMeasure::discrete(weights)
            }
            Space::Window(win) => {
                if let Some(intercept) = self.model.intercept {
                    let slope = self.model.slope.clone().unwrap_or_else(|| vec![0.0; win.dim()]);
                    if slope.len() != win.dim() {
                        return Err(Error::Config(format!(
                            "model.slope has {} entries in dimension {}",
                            slope.len(),
                            win.dim()
                        )));
                    }
                    let bound = self.model.bound.ok_or_else(|| {
                        Error::Config("model.bound required for an affine density".into())
                    })?;
                    IntensityMeasure::continuous(win, Density::Affine { intercept, slope }, bound)
                } else {
                    let c = self.model.density.ok_or_else(|| {
                        Error::Config("model.density (or intercept/slope) required on a window".into())
                    })?;
                    if c < 0.0 {
                        return Err(Error::Config(format!("model.density = {c} must be >= 0")));
                    }
                    IntensityMeasure::continuous(win, Density::Constant(c), c)
                }
            }
        }
    }

    pub fn model(&self) -> Result<ProcessModel> {
        let model = match self.model.kind.as_str() {
            "poisson" => ProcessModel::Poisson(self.intensity()?),
            "doubled-poisson" => ProcessModel::DoubledPoisson(self.intensity()?),
            "mixed-poisson" => {
                let scales = self
                    .model
                    .scales
                    .clone()
                    .ok_or_else(|| Error::Config("model.scales required for mixed-poisson".into()))?;
                ProcessModel::MixedPoisson { rho: self.intensity()?, scales }
            }
            "polya-difference" => {
                let z = self
                    .model
                    .z
                    .ok_or_else(|| Error::Config("model.z required for polya-difference".into()))?;
                let base = self
                    .model
                    .base
                    .clone()
                    .ok_or_else(|| Error::Config("model.base required for polya-difference".into()))?;
                let space = self.space()?;
                if !matches!(space, Space::Discrete { .. }) {
                    return Err(Error::Config(
                        "polya-difference requires a discrete space".into(),
                    ));
                }
                let base = PointMeasure::from_atoms(
                    base.into_iter().map(|(i, m)| (Location::Atom(i), m)),
                );
                for (loc, _) in base.atoms() {
                    if !space.contains(loc) {
                        return Err(Error::Config(format!(
                            "model.base atom {loc} outside the space"
                        )));
                    }
                }
                ProcessModel::PolyaDifference { z, base }
            }
            other => {
                return Err(Error::Config(format!(
                    "model.kind = {other:?}; expected poisson, polya-difference, \
                     mixed-poisson, or doubled-poisson"
                )))
            }
        };
        model.validate()?;
        Ok(model)
    }

    /// The retention vector: `run.retention` if present, else `(q, 1-q)`.
    pub fn retention(&self) -> Result<RetentionVector> {
        if let Some(r) = &self.run.retention {
            return RetentionVector::new(r.clone());
        }
        let q = self.q()?;
        RetentionVector::new(vec![q, 1.0 - q])
    }

    pub fn q(&self) -> Result<f64> {
        self.run
            .q
            .ok_or_else(|| Error::Config("run.q required".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISCRETE: &str = r#"
        [space]
        kind = "discrete"
        atoms = 2

        [model]
        kind = "poisson"
        weights = [0.5, 1.0]

        [run]
        q = 0.5
        n_samples = 1000
        seed = 7
    "#;

    #[test]
    fn discrete_poisson_parses() {
        let cfg = ExperimentConfig::parse(DISCRETE).unwrap();
        assert_eq!(cfg.space().unwrap(), Space::Discrete { atoms: 2 });
        assert!(matches!(cfg.model().unwrap(), ProcessModel::Poisson(_)));
        assert_eq!(cfg.run.cap, 12);
        assert_eq!(cfg.retention().unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(cfg.tolerances.exact, 1e-12);
    }

    #[test]
    fn window_mixed_poisson_parses() {
        let text = r#"
            [space]
            kind = "window"
            lower = [0.0, 0.0]
            upper = [1.0, 1.0]

            [model]
            kind = "mixed-poisson"
            density = 2.0
            scales = [[0.5, 0.5], [1.5, 0.5]]

            [run]
            q = 0.5
            retention = [0.25, 0.5, 0.25]
        "#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert!(matches!(cfg.model().unwrap(), ProcessModel::MixedPoisson { .. }));
        assert_eq!(cfg.retention().unwrap().len(), 3);
    }

    #[test]
    fn errors_name_fields() {
        let bad = DISCRETE.replace("q = 0.5", "q = 1.5");
        let err = ExperimentConfig::parse(&bad).unwrap_err();
        assert!(err.to_string().contains("run.q"), "{err}");

        let bad = DISCRETE.replace("weights = [0.5, 1.0]", "weights = [0.5]");
        let err = ExperimentConfig::parse(&bad).unwrap_err();
        assert!(err.to_string().contains("model.weights"), "{err}");

        let bad = DISCRETE.replace("kind = \"poisson\"", "kind = \"posion\"");
        let err = ExperimentConfig::parse(&bad).unwrap_err();
        assert!(err.to_string().contains("model.kind"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = format!("{DISCRETE}\n[run2]\nx = 1\n");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }

    #[test]
    fn tolerance_profile_parsing() {
        assert_eq!("exact".parse::<ToleranceProfile>().unwrap(), ToleranceProfile::Exact);
        assert_eq!("mc".parse::<ToleranceProfile>().unwrap(), ToleranceProfile::Mc);
        assert!("loose".parse::<ToleranceProfile>().is_err());
        let t = Tolerances::default();
        assert_eq!(ToleranceProfile::Quadrature.value(&t), 1e-10);
    }
}
