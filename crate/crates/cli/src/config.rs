//! Experiment configuration: JSON schema, parsing, and validation.
//!
//! A config is a single JSON object tagged by `kind`. Validation builds
//! every domain object up front and reports the full list of violations,
//! so a bad config fails with one structured diagnostic instead of dying
//! on the first constructor error at run time.

use branchdim::alphabet::{MeasureVec, TVNeighborhood};
use branchdim::branching::ColorStructureLaw;
use branchdim::dimension::ThetaMetric;
use branchdim::galton_watson::OffspringCountLaw;
use serde::{Deserialize, Serialize};

/// One atom of a colored structure law: `counts[i]` children of color `i`
/// with probability `prob`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawAtom {
    pub counts: Vec<u64>,
    pub prob: f64,
}

/// A colored structure law over `colors` colors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSpec {
    pub colors: usize,
    pub atoms: Vec<LawAtom>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    /// Probability vector whose action against `mu` is measured.
    pub nu: Vec<f64>,
    /// Base measure; any positive weights, not necessarily normalized.
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdpConfig {
    pub mu: Vec<f64>,
    pub center: Vec<f64>,
    pub radius: f64,
    /// Depths at which the exact neighborhood mass is tabulated.
    pub depths: Vec<usize>,
    /// Extra radii for the shrinking-neighborhood certificate table.
    #[serde(default)]
    pub certificate_radii: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmillanConfig {
    pub law: LawSpec,
    pub center: Vec<f64>,
    pub radius: f64,
    pub depth: usize,
    pub trials: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionConfig {
    pub law: LawSpec,
    pub theta: Vec<f64>,
    pub depth: usize,
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// Optional color subset for the Moran root.
    #[serde(default)]
    pub moran_subset: Option<Vec<usize>>,
    /// Optional base measure for the Bowen root.
    #[serde(default)]
    pub bowen_mu: Option<Vec<f64>>,
}

fn default_trials() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub law: LawSpec,
    pub center: Vec<f64>,
    pub radius: f64,
    pub order: usize,
    pub levels: usize,
    pub epsilon: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GwConfig {
    /// Offspring law as `[count, probability]` pairs.
    pub atoms: Vec<(u64, f64)>,
    pub depth: usize,
    pub trials: u64,
}

/// The on-disk experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ExperimentConfig {
    Rate(RateConfig),
    Ldp(LdpConfig),
    Mcmillan(McmillanConfig),
    Dimension(DimensionConfig),
    Block(BlockConfig),
    Gw(GwConfig),
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Rate(_) => "rate",
            ExperimentConfig::Ldp(_) => "ldp",
            ExperimentConfig::Mcmillan(_) => "mcmillan",
            ExperimentConfig::Dimension(_) => "dimension",
            ExperimentConfig::Block(_) => "block",
            ExperimentConfig::Gw(_) => "gw",
        }
    }

    /// Override the trial count where the experiment has one.
    pub fn set_trials(&mut self, trials: u64) {
        match self {
            ExperimentConfig::Mcmillan(c) => c.trials = trials,
            ExperimentConfig::Dimension(c) => c.trials = trials,
            ExperimentConfig::Block(c) => c.trials = trials,
            ExperimentConfig::Gw(c) => c.trials = trials,
            ExperimentConfig::Rate(_) | ExperimentConfig::Ldp(_) => {}
        }
    }
}

/// Domain objects built from a validated config, ready to run.
#[derive(Debug)]
pub enum Experiment {
    Rate {
        nu: MeasureVec,
        mu: MeasureVec,
    },
    Ldp {
        mu: MeasureVec,
        nbhd: TVNeighborhood,
        depths: Vec<usize>,
        certificate_radii: Vec<f64>,
    },
    Mcmillan {
        law: ColorStructureLaw,
        nbhd: TVNeighborhood,
        depth: usize,
        trials: u64,
    },
    Dimension {
        law: ColorStructureLaw,
        theta: ThetaMetric,
        depth: usize,
        trials: u64,
        moran_subset: Option<Vec<usize>>,
        bowen_mu: Option<MeasureVec>,
    },
    Block {
        law: ColorStructureLaw,
        center: MeasureVec,
        radius: f64,
        order: usize,
        levels: usize,
        epsilon: f64,
        trials: u64,
    },
    Gw {
        law: OffspringCountLaw,
        depth: usize,
        trials: u64,
    },
}

/// Collects human-readable violations while building domain objects.
struct Check {
    violations: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check {
            violations: Vec::new(),
        }
    }

    fn fail(&mut self, message: String) {
        self.violations.push(message);
    }

    fn require(&mut self, ok: bool, message: impl FnOnce() -> String) {
        if !ok {
            self.fail(message());
        }
    }

    fn measure(&mut self, name: &str, weights: &[f64]) -> Option<MeasureVec> {
        match MeasureVec::new(weights.to_vec()) {
            Ok(m) => Some(m),
            Err(e) => {
                self.fail(format!("{name}: {e}"));
                None
            }
        }
    }

    fn probability(&mut self, name: &str, weights: &[f64]) -> Option<MeasureVec> {
        let m = self.measure(name, weights)?;
        if !m.is_probability_within(1e-9) {
            self.fail(format!(
                "{name} must be a probability vector, weights sum to {}",
                m.total_mass()
            ));
            return None;
        }
        Some(m)
    }

    fn law(&mut self, spec: &LawSpec) -> Option<ColorStructureLaw> {
        let before = self.violations.len();
        let prob_sum: f64 = spec.atoms.iter().map(|a| a.prob).sum();
        self.require((prob_sum - 1.0).abs() <= 1e-9, || {
            format!("law probabilities must sum to 1, got {prob_sum}")
        });
        for (i, atom) in spec.atoms.iter().enumerate() {
            self.require(atom.counts.len() == spec.colors, || {
                format!(
                    "law atom {i} has {} color counts, expected {}",
                    atom.counts.len(),
                    spec.colors
                )
            });
        }
        if self.violations.len() > before {
            return None;
        }
        match ColorStructureLaw::new(
            spec.colors,
            spec.atoms
                .iter()
                .map(|a| (a.counts.clone(), a.prob))
                .collect(),
        ) {
            Ok(law) => Some(law),
            Err(e) => {
                self.fail(format!("law: {e}"));
                None
            }
        }
    }

    fn theta(&mut self, values: &[f64]) -> Option<ThetaMetric> {
        let before = self.violations.len();
        for (i, &v) in values.iter().enumerate() {
            self.require(v > 0.0 && v < 1.0, || {
                format!("theta(i) in (0,1) required, got theta[{i}] = {v}")
            });
        }
        if self.violations.len() > before {
            return None;
        }
        let m = self.measure("theta", values)?;
        match ThetaMetric::new(m) {
            Ok(t) => Some(t),
            Err(e) => {
                self.fail(format!("theta: {e}"));
                None
            }
        }
    }

    fn neighborhood(
        &mut self,
        center_name: &str,
        center: &[f64],
        radius: f64,
    ) -> Option<TVNeighborhood> {
        let c = self.probability(center_name, center)?;
        match TVNeighborhood::new(c, radius) {
            Ok(n) => Some(n),
            Err(e) => {
                self.fail(format!("radius: {e}"));
                None
            }
        }
    }

    fn dims_match(&mut self, what: &str, expected: usize, actual: usize) {
        self.require(expected == actual, || {
            format!("{what}: dimension {actual} does not match {expected}")
        });
    }

    fn positive_count(&mut self, name: &str, value: usize) {
        self.require(value >= 1, || format!("{name} must be at least 1"));
    }
}

/// Build every domain object, returning either the runnable experiment or
/// the full list of violations.
pub fn validate(config: &ExperimentConfig) -> Result<Experiment, Vec<String>> {
    let mut check = Check::new();
    let experiment = match config {
        ExperimentConfig::Rate(c) => {
            check.dims_match("mu", c.nu.len(), c.mu.len());
            let nu = check.probability("nu", &c.nu);
            let mu = check.measure("mu", &c.mu);
            if let Some(mu) = &mu {
                check.require(mu.total_mass() > 0.0, || "mu must carry mass".into());
            }
            nu.zip(mu).map(|(nu, mu)| Experiment::Rate { nu, mu })
        }
        ExperimentConfig::Ldp(c) => {
            check.dims_match("center", c.mu.len(), c.center.len());
            check.positive_count("depths entries", c.depths.len());
            for (i, &d) in c.depths.iter().enumerate() {
                check.require(d >= 1, || format!("depths[{i}] must be at least 1"));
            }
            for (i, &r) in c.certificate_radii.iter().enumerate() {
                check.require(r > 0.0, || {
                    format!("certificate_radii[{i}] must be positive, got {r}")
                });
            }
            let mu = check.measure("mu", &c.mu);
            let nbhd = check.neighborhood("center", &c.center, c.radius);
            mu.zip(nbhd).map(|(mu, nbhd)| Experiment::Ldp {
                mu,
                nbhd,
                depths: c.depths.clone(),
                certificate_radii: c.certificate_radii.clone(),
            })
        }
        ExperimentConfig::Mcmillan(c) => {
            check.dims_match("center", c.law.colors, c.center.len());
            check.positive_count("depth", c.depth);
            check.positive_count("trials", c.trials as usize);
            let law = check.law(&c.law);
            let nbhd = check.neighborhood("center", &c.center, c.radius);
            law.zip(nbhd).map(|(law, nbhd)| Experiment::Mcmillan {
                law,
                nbhd,
                depth: c.depth,
                trials: c.trials,
            })
        }
        ExperimentConfig::Dimension(c) => {
            check.dims_match("theta", c.law.colors, c.theta.len());
            check.positive_count("depth", c.depth);
            check.positive_count("trials", c.trials as usize);
            if let Some(subset) = &c.moran_subset {
                for (i, &color) in subset.iter().enumerate() {
                    check.require(color < c.law.colors, || {
                        format!("moran_subset[{i}] = {color} is not a color index")
                    });
                }
            }
            let law = check.law(&c.law);
            let theta = check.theta(&c.theta);
            let bowen_mu = match &c.bowen_mu {
                None => None,
                Some(w) => {
                    check.dims_match("bowen_mu", c.law.colors, w.len());
                    check.measure("bowen_mu", w)
                }
            };
            law.zip(theta).map(|(law, theta)| Experiment::Dimension {
                law,
                theta,
                depth: c.depth,
                trials: c.trials,
                moran_subset: c.moran_subset.clone(),
                bowen_mu,
            })
        }
        ExperimentConfig::Block(c) => {
            check.dims_match("center", c.law.colors, c.center.len());
            check.positive_count("order", c.order);
            check.positive_count("levels", c.levels);
            check.positive_count("trials", c.trials as usize);
            check.require(c.epsilon > 0.0, || {
                format!("epsilon must be positive, got {}", c.epsilon)
            });
            check.require(c.radius > 0.0, || {
                format!("radius must be positive, got {}", c.radius)
            });
            let law = check.law(&c.law);
            let center = check.probability("center", &c.center);
            law.zip(center).map(|(law, center)| Experiment::Block {
                law,
                center,
                radius: c.radius,
                order: c.order,
                levels: c.levels,
                epsilon: c.epsilon,
                trials: c.trials,
            })
        }
        ExperimentConfig::Gw(c) => {
            check.positive_count("depth", c.depth);
            check.positive_count("trials", c.trials as usize);
            let prob_sum: f64 = c.atoms.iter().map(|&(_, p)| p).sum();
            check.require((prob_sum - 1.0).abs() <= 1e-9, || {
                format!("law probabilities must sum to 1, got {prob_sum}")
            });
            match OffspringCountLaw::new(c.atoms.clone()) {
                Ok(law) => Some(Experiment::Gw {
                    law,
                    depth: c.depth,
                    trials: c.trials,
                }),
                Err(e) => {
                    check.fail(format!("law: {e}"));
                    None
                }
            }
        }
    };
    match experiment {
        Some(exp) if check.violations.is_empty() => Ok(exp),
        _ => Err(check.violations),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ExperimentConfig {
        serde_json::from_str(text).expect("config parses")
    }

    #[test]
    fn minimal_two_color_config_is_accepted() {
        let config = parse(
            r#"{
                "kind": "mcmillan",
                "law": {"colors": 2, "atoms": [
                    {"counts": [0, 0], "prob": 0.25},
                    {"counts": [2, 2], "prob": 0.75}
                ]},
                "center": [0.5, 0.5],
                "radius": 0.1,
                "depth": 10,
                "trials": 4
            }"#,
        );
        assert!(validate(&config).is_ok());
        assert_eq!(config.kind(), "mcmillan");
    }

    #[test]
    fn theta_on_the_boundary_is_rejected() {
        let config = parse(
            r#"{
                "kind": "dimension",
                "law": {"colors": 2, "atoms": [{"counts": [1, 1], "prob": 1.0}]},
                "theta": [1.0, 0.5],
                "depth": 5
            }"#,
        );
        let violations = validate(&config).unwrap_err();
        assert!(
            violations
                .iter()
                .any(|v| v.contains("theta(i) in (0,1) required")),
            "violations: {violations:?}"
        );
    }

    #[test]
    fn unnormalized_law_is_rejected() {
        let config = parse(
            r#"{
                "kind": "mcmillan",
                "law": {"colors": 2, "atoms": [{"counts": [1, 1], "prob": 0.9}]},
                "center": [0.5, 0.5],
                "radius": 0.1,
                "depth": 10,
                "trials": 4
            }"#,
        );
        let violations = validate(&config).unwrap_err();
        assert!(
            violations.iter().any(|v| v.contains("sum to 1")),
            "violations: {violations:?}"
        );
    }

    #[test]
    fn violations_accumulate_rather_than_stop_at_the_first() {
        let config = parse(
            r#"{
                "kind": "block",
                "law": {"colors": 2, "atoms": [{"counts": [1, 1], "prob": 0.8}]},
                "center": [0.6, 0.6],
                "radius": -0.1,
                "order": 0,
                "levels": 2,
                "epsilon": 0.0,
                "trials": 1
            }"#,
        );
        let violations = validate(&config).unwrap_err();
        assert!(violations.len() >= 4, "violations: {violations:?}");
    }
}
