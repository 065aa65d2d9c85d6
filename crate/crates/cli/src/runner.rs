//! Experiment execution and artifact writing.
//!
//! Every run produces, inside the output directory, one CSV of plot-ready
//! rows, a `summary.json` with the aggregate figures, and an echo of the
//! effective config. All files start from the same provenance triple
//! (seed, version, config hash) and contain nothing volatile, so a rerun
//! with the same config and seed is byte-identical.

use std::fs;
use std::io;
use std::path::Path;

use branchdim::blocks::selection_rate_experiment;
use branchdim::branching::{evolve_histograms, StepOptions};
use branchdim::dimension::{bowen_root, covering_dimension_estimate, moran_root, DimensionReport};
use branchdim::galton_watson::{extinction_frequency, extinction_probability, simulate_gw};
use branchdim::mcmillan::{colored_mcmillan_experiment, epsilon_certificates, rate_table};
use branchdim::rate::{
    kullback_action, legendre_sup_estimate, shannon_entropy, young_gap, LegendreSearch,
};
use branchdim::rng::stream_rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::Experiment;

/// Why a run failed, separating artifact IO from the numeric core.
#[derive(Debug)]
pub enum RunError {
    Core(branchdim::Error),
    Io(io::Error),
}

impl From<branchdim::Error> for RunError {
    fn from(e: branchdim::Error) -> Self {
        RunError::Core(e)
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "io: {e}"),
        }
    }
}

/// Format one float at 12 significant digits, the reporting precision of
/// every CSV cell and summary entry.
fn sig12(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        format!("{x}")
    }
}

/// Round every float in a JSON tree to the 12-significant-digit reporting
/// precision (integers pass through untouched).
fn round_floats(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if n.is_f64() {
                let rounded: f64 = sig12(n.as_f64().unwrap()).parse().unwrap();
                if let Some(num) = serde_json::Number::from_f64(rounded) {
                    *value = Value::Number(num);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn median_of(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).expect("estimates are finite"));
    let mid = xs.len() / 2;
    Some(if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        0.5 * (xs[mid - 1] + xs[mid])
    })
}

/// Output-directory handle carrying the provenance triple.
pub struct Artifacts<'a> {
    dir: &'a Path,
    seed: u64,
    config_hash: &'a str,
}

impl<'a> Artifacts<'a> {
    pub fn new(dir: &'a Path, seed: u64, config_hash: &'a str) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir,
            seed,
            config_hash,
        })
    }

    fn header(&self) -> String {
        format!(
            "# seed = {}\n# version = {}\n# config_sha256 = {}\n",
            self.seed,
            env!("CARGO_PKG_VERSION"),
            self.config_hash
        )
    }

    fn write_csv(&self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
        let mut text = self.header();
        text.push_str(&columns.join(","));
        text.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), columns.len());
            text.push_str(&row.join(","));
            text.push('\n');
        }
        fs::write(self.dir.join(name), text)
    }

    fn write_summary(&self, kind: &str, mut summary: Value) -> io::Result<()> {
        round_floats(&mut summary);
        let wrapped = json!({
            "kind": kind,
            "seed": self.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "config_sha256": self.config_hash,
            "summary": summary,
        });
        let mut text = serde_json::to_string_pretty(&wrapped).expect("summary serializes");
        text.push('\n');
        fs::write(self.dir.join("summary.json"), text)
    }
}

/// Execute the experiment and write its artifacts; computation happens
/// before any file is touched, so a tripped guard leaves no partial run.
pub fn run(experiment: &Experiment, artifacts: &Artifacts) -> Result<(), RunError> {
    match experiment {
        Experiment::Rate { nu, mu } => {
            let rho = kullback_action(nu, mu)?;
            let legendre = legendre_sup_estimate(nu, mu, &LegendreSearch::default())?;
            let entropy = shannon_entropy(nu)?;
            let optimal_tilt = branchdim::alphabet::FuncVec::new(
                nu.weights()
                    .iter()
                    .zip(mu.weights())
                    .map(|(&a, &b)| (a / b).ln())
                    .collect(),
            )?;
            let gap_at_optimum = young_gap(nu, mu, &optimal_tilt)?;
            let rows = [
                ("kullback_action", rho),
                ("legendre_sup", legendre),
                ("duality_gap", (legendre - rho).abs()),
                ("shannon_entropy", entropy),
                ("young_gap_at_optimal_tilt", gap_at_optimum),
            ];
            let csv: Vec<Vec<String>> = rows
                .iter()
                .map(|(q, v)| vec![q.to_string(), sig12(*v)])
                .collect();
            artifacts.write_csv("rate.csv", &["quantity", "value"], &csv)?;
            let summary = json!({
                "kullback_action": rho,
                "legendre_sup": legendre,
                "duality_gap": (legendre - rho).abs(),
                "shannon_entropy": entropy,
                "young_gap_at_optimal_tilt": gap_at_optimum,
            });
            artifacts.write_summary("rate", summary)?;
        }
        Experiment::Ldp {
            mu,
            nbhd,
            depths,
            certificate_radii,
        } => {
            let table = rate_table(mu, nbhd, depths)?;
            let rows: Vec<Vec<String>> = table
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        sig12(r.log_mass),
                        sig12(r.log_rate),
                        sig12(r.predicted),
                        sig12(r.gap),
                    ]
                })
                .collect();
            artifacts.write_csv(
                "ldp.csv",
                &["n", "log_mass", "log_rate", "predicted", "gap"],
                &rows,
            )?;
            let certificates = if certificate_radii.is_empty() {
                Vec::new()
            } else {
                let certs = epsilon_certificates(mu, nbhd.center(), certificate_radii, depths)?;
                let rows: Vec<Vec<String>> = certs
                    .iter()
                    .map(|c| {
                        vec![
                            sig12(c.radius),
                            c.n_max.to_string(),
                            sig12(c.epsilon),
                            c.settle_n.to_string(),
                        ]
                    })
                    .collect();
                artifacts.write_csv(
                    "certificates.csv",
                    &["radius", "n_max", "epsilon", "settle_n"],
                    &rows,
                )?;
                certs
            };
            let summary = json!({
                "rows": table,
                "certificates": certificates,
            });
            artifacts.write_summary("ldp", summary)?;
        }
        Experiment::Mcmillan {
            law,
            nbhd,
            depth,
            trials,
        } => {
            let (rows, summary) =
                colored_mcmillan_experiment(law, nbhd, *depth, *trials, artifacts.seed)?;
            let csv: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.trial.to_string(),
                        r.survived.to_string(),
                        r.population.to_string(),
                        r.in_ball.to_string(),
                        sig12(r.log_rate),
                        sig12(r.gap),
                    ]
                })
                .collect();
            artifacts.write_csv(
                "mcmillan.csv",
                &[
                    "trial",
                    "survived",
                    "population",
                    "in_ball",
                    "log_rate",
                    "gap",
                ],
                &csv,
            )?;
            artifacts.write_summary("mcmillan", serde_json::to_value(&summary).unwrap())?;
        }
        Experiment::Dimension {
            law,
            theta,
            depth,
            trials,
            moran_subset,
            bowen_mu,
        } => {
            let reports: Vec<DimensionReport> = (0..*trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = stream_rng(artifacts.seed, 0, t);
                    let evo = evolve_histograms(law, *depth, &mut rng, &StepOptions::default())?;
                    covering_dimension_estimate(evo.last(), theta)
                })
                .collect::<branchdim::Result<_>>()?;
            let csv: Vec<Vec<String>> = reports
                .iter()
                .enumerate()
                .map(|(t, r)| {
                    vec![
                        t.to_string(),
                        r.depth.to_string(),
                        r.empty.to_string(),
                        sig12(r.estimate),
                    ]
                })
                .collect();
            artifacts.write_csv(
                "dimension.csv",
                &["trial", "depth", "empty", "estimate"],
                &csv,
            )?;
            let survivors: Vec<f64> = reports
                .iter()
                .filter(|r| !r.empty)
                .map(|r| r.estimate)
                .collect();
            let moran = moran_subset
                .as_ref()
                .map(|subset| moran_root(theta, subset))
                .transpose()?;
            let bowen = bowen_mu
                .as_ref()
                .map(|mu| bowen_root(mu, theta))
                .transpose()?;
            let summary = json!({
                "trials": trials,
                "depth": depth,
                "survivors": survivors.len(),
                "median_estimate": median_of(survivors),
                "moran_root": moran,
                "bowen_root": bowen,
                // A negative root certifies an almost surely empty
                // attractor.
                "attractor_empty": bowen.map(|b| b < 0.0),
            });
            artifacts.write_summary("dimension", summary)?;
        }
        Experiment::Block {
            law,
            center,
            radius,
            order,
            levels,
            epsilon,
            trials,
        } => {
            let (rows, summary) = selection_rate_experiment(
                law,
                center,
                *radius,
                *order,
                *levels,
                *epsilon,
                *trials,
                artifacts.seed,
            )?;
            let csv: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.trial.to_string(),
                        r.nonempty.to_string(),
                        r.refused.to_string(),
                    ]
                })
                .collect();
            artifacts.write_csv("block.csv", &["trial", "nonempty", "refused"], &csv)?;
            artifacts.write_summary("block", serde_json::to_value(&summary).unwrap())?;
        }
        Experiment::Gw { law, depth, trials } => {
            let exact = extinction_probability(law);
            let trajectory = simulate_gw(law, *depth, artifacts.seed)?;
            let frequency = extinction_frequency(law, *depth, *trials, artifacts.seed)?;
            let csv: Vec<Vec<String>> = trajectory
                .counts()
                .iter()
                .enumerate()
                .map(|(g, &z)| vec![g.to_string(), z.to_string()])
                .collect();
            artifacts.write_csv("gw.csv", &["generation", "population"], &csv)?;
            let summary = json!({
                "extinction_probability": exact.probability,
                "degenerate": exact.degenerate,
                "mean_offspring": law.mean_offspring(),
                "mc_extinction_frequency": frequency,
                "depth": depth,
                "trials": trials,
            });
            artifacts.write_summary("gw", summary)?;
        }
    }
    Ok(())
}
