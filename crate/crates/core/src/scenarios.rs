//! Named parameter presets. Values not pinned by the source scenario
//! (`f_a` in `fig2`/`fig3`/`fig4`, `mu` in `fig3`, `kappa` in `fig4`/`fig6`)
//! are documented defaults chosen so that every regime is well defined.

use crate::params::ModelParams;

/// Low-population scenario where SAVs dominate capacity (`eta` ~ 3.3).
pub fn fig2() -> ModelParams {
    ModelParams {
        n_total: 1000.0,
        mu: 0.025,
        kappa: 0.01,
        theta: 0.7,
        beta: 0.4,
        gamma: 0.4,
        t_f: 10.0,
        f_n: 1.0,
        f_a: 129_600.0,
        m: 100.0,
    }
}

/// Capacity-expansion scenario in which the AC-pricing cost rises with `mu`.
pub fn fig3() -> ModelParams {
    ModelParams {
        n_total: 250.0,
        mu: 0.02,
        f_a: 30_000.0,
        ..fig2()
    }
}

/// First-best toll scenario.
pub fn fig4() -> ModelParams {
    ModelParams {
        n_total: 10_000.0,
        mu: 1.0,
        kappa: 0.4,
        theta: 0.5,
        beta: 0.3,
        gamma: 2.0,
        t_f: 2.0,
        f_n: 10_000.0,
        f_a: 1_000_000.0,
        m: 10_500.0,
    }
}

/// Social-cost contour scenario with a weak capacity effect (`eta` = 0.15).
pub fn fig6() -> ModelParams {
    ModelParams {
        kappa: 0.925,
        m: 10_197.0,
        ..fig4()
    }
}

/// Looks a preset up by name.
pub fn by_name(name: &str) -> Option<ModelParams> {
    match name {
        "fig2" => Some(fig2()),
        "fig3" => Some(fig3()),
        "fig4" => Some(fig4()),
        "fig6" => Some(fig6()),
        _ => None,
    }
}

pub const NAMES: [&str; 4] = ["fig2", "fig3", "fig4", "fig6"];
