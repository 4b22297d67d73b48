//! Flat `key=value` configuration for the tracking commands.
//!
//! Lines starting with `#` are comments; unknown keys are rejected by name.
//! Command-line flags override file values.

use std::path::Path;

use anyhow::{bail, Context, Result};
use igdts_core::tracker::{MotionModel, SolverSettings, TrackerConfig};

/// What to do when no particle scores finitely on a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LostPolicy {
    /// Keep the last state, keep propagating.
    Coast,
    /// Abort the run.
    Halt,
}

/// Tracker configuration plus solver controls and the lost-track policy.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    pub solver: SolverSettings,
    pub lost_policy: LostPolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tracker: TrackerConfig::default(),
            solver: SolverSettings::default(),
            lost_policy: LostPolicy::Coast,
        }
    }
}

/// Keys accepted in a config file, with the default value and a note.
/// Entries marked "heuristic default" are operating constants chosen for
/// this implementation rather than taken from a reference operating point.
pub const CONFIG_KEYS: &[(&str, &str, &str)] = &[
    ("n_particles", "600", "particle count"),
    ("patch_side", "32", "observation patch side in pixels"),
    ("k_basis", "16", "appearance-model basis size"),
    ("update_interval", "5", "frames between model updates"),
    ("lambda_max", "0.1", "largest outlier weight (heuristic default)"),
    ("lambda_min_ratio", "0.1", "smallest/largest weight ratio (heuristic default)"),
    ("kappa", "10", "likelihood sharpness (heuristic default)"),
    ("forgetting", "0.95", "model-update forgetting factor (heuristic default)"),
    ("seed", "0", "random stream seed"),
    ("sigma_tx", "4", "random-walk std, x translation px (heuristic default)"),
    ("sigma_ty", "4", "random-walk std, y translation px (heuristic default)"),
    ("sigma_theta", "0.01", "random-walk std, rotation rad (heuristic default)"),
    ("sigma_scale", "0.01", "random-walk std, scale (heuristic default)"),
    ("sigma_aspect", "0.002", "random-walk std, aspect (heuristic default)"),
    ("sigma_skew", "0.001", "random-walk std, skew (heuristic default)"),
    ("solver_eps", "0.0005", "distance-solve stall threshold (heuristic default)"),
    ("solver_max_iter", "10", "distance-solve iteration cap (heuristic default)"),
    ("lost_policy", "coast", "coast | halt (heuristic default)"),
];

/// Renders the config-key reference for `--help`.
pub fn config_help() -> String {
    let mut out = String::from("Config file keys (key=value, '#' comments):\n");
    for (key, default, note) in CONFIG_KEYS {
        out.push_str(&format!("  {key:<18} default {default:<8} {note}\n"));
    }
    out.push_str("Default config path comes from $IGDTS_CONFIG when --config is not given.\n");
    out
}

pub fn parse_config_file(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut cfg = RunConfig::default();
    let mut sigma = cfg.tracker.motion.sigma;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("{}:{}: expected key=value", path.display(), lineno + 1))?;
        let key = key.trim();
        let value = value.trim();
        let parse_f64 = || -> Result<f64> {
            value
                .parse()
                .with_context(|| format!("{}:{}: bad number `{value}`", path.display(), lineno + 1))
        };
        let parse_usize = || -> Result<usize> {
            value
                .parse()
                .with_context(|| format!("{}:{}: bad count `{value}`", path.display(), lineno + 1))
        };
        match key {
            "n_particles" => cfg.tracker.n_particles = parse_usize()?,
            "patch_side" => cfg.tracker.patch_side = parse_usize()?,
            "k_basis" => cfg.tracker.k_basis = parse_usize()?,
            "update_interval" => cfg.tracker.update_interval = parse_usize()?,
            "lambda_max" => cfg.tracker.lambda_max = parse_f64()?,
            "lambda_min_ratio" => cfg.tracker.lambda_min_ratio = parse_f64()?,
            "kappa" => cfg.tracker.kappa = parse_f64()?,
            "forgetting" => cfg.tracker.forgetting = parse_f64()?,
            "seed" => {
                cfg.tracker.seed = value.parse().with_context(|| {
                    format!("{}:{}: bad seed `{value}`", path.display(), lineno + 1)
                })?
            }
            "sigma_tx" => sigma[0] = parse_f64()?,
            "sigma_ty" => sigma[1] = parse_f64()?,
            "sigma_theta" => sigma[2] = parse_f64()?,
            "sigma_scale" => sigma[3] = parse_f64()?,
            "sigma_aspect" => sigma[4] = parse_f64()?,
            "sigma_skew" => sigma[5] = parse_f64()?,
            "solver_eps" => cfg.solver.eps = parse_f64()?,
            "solver_max_iter" => cfg.solver.max_iter = parse_usize()?,
            "lost_policy" => {
                cfg.lost_policy = match value {
                    "coast" => LostPolicy::Coast,
                    "halt" => LostPolicy::Halt,
                    other => bail!(
                        "{}:{}: lost_policy must be coast or halt, got `{other}`",
                        path.display(),
                        lineno + 1
                    ),
                }
            }
            unknown => bail!(
                "{}:{}: unknown config key `{unknown}`",
                path.display(),
                lineno + 1
            ),
        }
    }
    cfg.tracker.motion = MotionModel::new(sigma).map_err(|e| anyhow::anyhow!(e.to_string()))?;
    cfg.tracker.validate().map_err(|e| anyhow::anyhow!(e.to_string()))?;
    Ok(cfg)
}
