//! Flat TOML scenario configs. Parameter keys sit next to command options;
//! unknown keys are rejected.

use std::path::Path;

use sav_bottleneck::params::PARAM_KEYS;
use sav_bottleneck::stability::Protocol;
use sav_bottleneck::ModelParams;
use serde::Deserialize;

use crate::error::CliError;

const BUNDLED: [(&str, &str); 4] = [
    ("fig2", include_str!("../configs/fig2.toml")),
    ("fig3", include_str!("../configs/fig3.toml")),
    ("fig4", include_str!("../configs/fig4.toml")),
    ("fig6", include_str!("../configs/fig6.toml")),
];

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    /// Bundled scenario whose values fill keys not given here.
    preset: Option<String>,
    n_total: Option<f64>,
    mu: Option<f64>,
    kappa: Option<f64>,
    theta: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
    t_f: Option<f64>,
    f_n: Option<f64>,
    f_a: Option<f64>,
    m: Option<f64>,

    regimes: Option<Vec<String>>,
    n_a: Option<f64>,
    fare: Option<f64>,
    profile_points: Option<usize>,
    protocol: Option<String>,
    temperature: Option<f64>,
    fare_rule: Option<String>,
    initial_n_a: Option<Vec<f64>>,
    trajectory_rows: Option<usize>,
    grid_cells: Option<usize>,
    grid_margin: Option<f64>,
    lp_method: Option<String>,
    toll_points: Option<usize>,
    curve_points: Option<usize>,
    eta_min: Option<f64>,
    eta_max: Option<f64>,
    eta_steps: Option<usize>,
    contour_points: Option<usize>,
    sweep_axis: Option<String>,
    sweep_min: Option<f64>,
    sweep_max: Option<f64>,
    sweep_steps: Option<usize>,
    current_n_a: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleChoice {
    AverageCost,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpChoice {
    Greedy,
    Simplex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        let h = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.min + h * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Preset name or file path, echoed into the summary.
    pub source: String,
    pub params: ModelParams,
    pub regimes: Vec<String>,
    pub n_a: Option<f64>,
    pub fare: Option<f64>,
    pub profile_points: usize,
    pub protocols: Vec<Protocol>,
    pub fare_rule: RuleChoice,
    pub initial_n_a: Option<Vec<f64>>,
    pub trajectory_rows: usize,
    pub grid_cells: usize,
    pub grid_margin: f64,
    pub lp_method: LpChoice,
    pub toll_points: usize,
    pub curve_points: usize,
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_steps: usize,
    pub contour_points: usize,
    /// Unset when the config carries no sweep keys; the paradox command
    /// then sweeps `mu` over half to one and a half times its value.
    pub sweep: Option<Sweep>,
    pub current_n_a: Option<f64>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_raw(text: &str, origin: &str) -> Result<RawConfig, CliError> {
    toml::from_str(text).map_err(|e| bad(format!("{origin}: {}", e.message())))
}

fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Loads a bundled preset by name (`fig2`, ...) or a TOML file by path.
pub fn load(name: &str) -> Result<ScenarioConfig, CliError> {
    let (text, origin) = match bundled(name) {
        Some(t) => (t.to_string(), name.to_string()),
        None => {
            let path = Path::new(name);
            let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {name}: {e}")))?;
            (text, name.to_string())
        }
    };
    from_str(&text, &origin)
}

pub fn from_str(text: &str, origin: &str) -> Result<ScenarioConfig, CliError> {
    let raw = parse_raw(text, origin)?;
    let base = match &raw.preset {
        Some(name) => {
            let t = bundled(name).ok_or_else(|| bad(format!("unknown preset `{name}`")))?;
            Some(parse_raw(t, name)?)
        }
        None => None,
    };
    let pick = |own: Option<f64>, from_base: fn(&RawConfig) -> Option<f64>, key: &str| -> Result<f64, CliError> {
        own.or_else(|| base.as_ref().and_then(from_base))
            .ok_or_else(|| bad(format!("missing parameter `{key}`")))
    };
    let params = ModelParams {
        n_total: pick(raw.n_total, |b| b.n_total, PARAM_KEYS[0])?,
        mu: pick(raw.mu, |b| b.mu, PARAM_KEYS[1])?,
        kappa: pick(raw.kappa, |b| b.kappa, PARAM_KEYS[2])?,
        theta: pick(raw.theta, |b| b.theta, PARAM_KEYS[3])?,
        beta: pick(raw.beta, |b| b.beta, PARAM_KEYS[4])?,
        gamma: pick(raw.gamma, |b| b.gamma, PARAM_KEYS[5])?,
        t_f: pick(raw.t_f, |b| b.t_f, PARAM_KEYS[6])?,
        f_n: pick(raw.f_n, |b| b.f_n, PARAM_KEYS[7])?,
        f_a: pick(raw.f_a, |b| b.f_a, PARAM_KEYS[8])?,
        m: pick(raw.m, |b| b.m, PARAM_KEYS[9])?,
    };
    // command options come from the file itself, then the preset
    let b = base.unwrap_or_default();

    let regimes = raw
        .regimes
        .or(b.regimes)
        .unwrap_or_else(|| vec!["mc".into(), "ac".into(), "monopoly".into()]);
    for r in &regimes {
        if !matches!(r.as_str(), "mc" | "ac" | "monopoly") {
            return Err(bad(format!("unknown regime `{r}` (expected mc, ac, monopoly)")));
        }
    }
    if regimes.is_empty() {
        return Err(bad("`regimes` is empty"));
    }

    let temperature = raw.temperature.or(b.temperature).unwrap_or(1.0);
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(bad("`temperature` must be positive"));
    }
    let protocols = match raw.protocol.or(b.protocol).as_deref().unwrap_or("all") {
        "all" => vec![Protocol::Smith, Protocol::BestResponse { temperature }, Protocol::Bnn],
        "smith" => vec![Protocol::Smith],
        "best_response" => vec![Protocol::BestResponse { temperature }],
        "bnn" => vec![Protocol::Bnn],
        other => {
            return Err(bad(format!(
                "unknown protocol `{other}` (expected smith, best_response, bnn, all)"
            )))
        }
    };
    let fare_rule = match raw.fare_rule.or(b.fare_rule).as_deref().unwrap_or("ac") {
        "ac" => RuleChoice::AverageCost,
        "fixed" => RuleChoice::Fixed,
        other => return Err(bad(format!("unknown fare_rule `{other}` (expected ac, fixed)"))),
    };
    let lp_method = match raw.lp_method.or(b.lp_method).as_deref().unwrap_or("greedy") {
        "greedy" => LpChoice::Greedy,
        "simplex" => LpChoice::Simplex,
        other => return Err(bad(format!("unknown lp_method `{other}` (expected greedy, simplex)"))),
    };

    let sweep = match (
        raw.sweep_axis.or(b.sweep_axis),
        raw.sweep_min.or(b.sweep_min),
        raw.sweep_max.or(b.sweep_max),
        raw.sweep_steps.or(b.sweep_steps),
    ) {
        (None, None, None, None) => None,
        (axis, Some(min), Some(max), steps) => {
            let axis = axis.unwrap_or_else(|| "mu".into());
            if !PARAM_KEYS.contains(&axis.as_str()) {
                return Err(bad(format!("unknown sweep_axis `{axis}`")));
            }
            let steps = steps.unwrap_or(50);
            if steps < 2 {
                return Err(bad("`sweep_steps` must be at least 2"));
            }
            if !min.is_finite() || !max.is_finite() || min >= max {
                return Err(bad("sweep range must satisfy sweep_min < sweep_max"));
            }
            Some(Sweep { axis, min, max, steps })
        }
        _ => return Err(bad("a sweep needs both `sweep_min` and `sweep_max`")),
    };

    let eta_min = raw.eta_min.or(b.eta_min).unwrap_or(0.1);
    let eta_max = raw.eta_max.or(b.eta_max).unwrap_or(3.0);
    let eta_steps = raw.eta_steps.or(b.eta_steps).unwrap_or(30);
    if !(eta_min > 0.0 && eta_min < eta_max) || eta_steps < 2 {
        return Err(bad("eta range must satisfy 0 < eta_min < eta_max with eta_steps >= 2"));
    }

    let at_least_two = |v: usize, key: &str| {
        if v < 2 {
            Err(bad(format!("`{key}` must be at least 2")))
        } else {
            Ok(v)
        }
    };
    let grid_cells = raw.grid_cells.or(b.grid_cells).unwrap_or(2000);
    if grid_cells == 0 {
        return Err(bad("`grid_cells` must be positive"));
    }
    let grid_margin = raw.grid_margin.or(b.grid_margin).unwrap_or(0.05);
    if !(grid_margin >= 0.0 && grid_margin.is_finite()) {
        return Err(bad("`grid_margin` must be non-negative"));
    }

    Ok(ScenarioConfig {
        source: origin.to_string(),
        params,
        regimes,
        n_a: raw.n_a.or(b.n_a),
        fare: raw.fare.or(b.fare),
        profile_points: at_least_two(raw.profile_points.or(b.profile_points).unwrap_or(401), "profile_points")?,
        protocols,
        fare_rule,
        initial_n_a: raw.initial_n_a.or(b.initial_n_a),
        trajectory_rows: at_least_two(
            raw.trajectory_rows.or(b.trajectory_rows).unwrap_or(500),
            "trajectory_rows",
        )?,
        grid_cells,
        grid_margin,
        lp_method,
        toll_points: at_least_two(raw.toll_points.or(b.toll_points).unwrap_or(401), "toll_points")?,
        curve_points: at_least_two(raw.curve_points.or(b.curve_points).unwrap_or(201), "curve_points")?,
        eta_min,
        eta_max,
        eta_steps,
        contour_points: at_least_two(raw.contour_points.or(b.contour_points).unwrap_or(101), "contour_points")?,
        sweep,
        current_n_a: raw.current_n_a.or(b.current_n_a),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use sav_bottleneck::scenarios;

    #[test]
    fn bundled_configs_match_presets() {
        for name in scenarios::NAMES {
            let cfg = load(name).unwrap();
            assert_eq!(cfg.params, scenarios::by_name(name).unwrap(), "{name}");
        }
    }

    #[test]
    fn bundled_configs_flag_filled_values() {
        for (name, text) in BUNDLED {
            assert!(text.contains("# derived_choice=true"), "{name}");
        }
    }

    #[test]
    fn preset_with_override() {
        let cfg = from_str("preset = \"fig2\"\nkappa = 0.8\n", "inline").unwrap();
        assert_eq!(cfg.params.kappa, 0.8);
        assert_eq!(cfg.params.n_total, 1000.0);
    }

    #[test]
    fn integer_values_are_accepted() {
        let cfg = from_str("preset = \"fig2\"\nn_total = 500\n", "inline").unwrap();
        assert_eq!(cfg.params.n_total, 500.0);
    }

    #[test]
    fn rejects_unknown_keys_and_missing_params() {
        assert!(matches!(
            from_str("preset = \"fig2\"\nkapa = 0.8\n", "x"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(from_str("mu = 1.0\n", "x"), Err(CliError::Config(_))));
        assert!(matches!(from_str("preset = \"nope\"\n", "x"), Err(CliError::Config(_))));
    }

    #[test]
    fn sweep_checks() {
        let cfg = load("fig3").unwrap();
        let s = cfg.sweep.unwrap();
        assert_eq!(s.values().len(), 50);
        assert!(from_str("preset = \"fig2\"\nsweep_min = 1.0\nsweep_max = 0.5\n", "x").is_err());
        assert!(from_str(
            "preset = \"fig2\"\nsweep_min = 0.01\nsweep_max = 0.02\nsweep_steps = 1\n",
            "x"
        )
        .is_err());
        assert!(from_str("preset = \"fig2\"\nsweep_min = 0.01\n", "x").is_err());
        assert!(from_str(
            "preset = \"fig2\"\nsweep_axis = \"zeta\"\nsweep_min = 0.01\nsweep_max = 0.02\n",
            "x"
        )
        .is_err());
    }
}
