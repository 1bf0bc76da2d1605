//! Canned sweeps for the figure families of the numerical study.
//!
//! Trial counts are not given for the published curves, so every preset
//! defaults to 200 trials (100 per relay cell) and the presets aim at trends
//! and orderings rather than the exact published numbers.

use super::config::{Axis, ExperimentConfig, Method, Mode, OutputSpec, SweepSpec, SweepVar, TopologySpec, CONFIG_VERSION};
use crate::conic::Tolerances;
use crate::error::{Error, Result};
use crate::sysmodel::SystemParams;

pub const PRESETS: [&str; 9] = [
    "wsr_vs_ps1",
    "wsr_vs_ps2",
    "wsr_vs_n",
    "wsr_vs_relay_grid_fixed",
    "wsr_vs_relay_grid_flexible",
    "power_vs_rs1",
    "power_vs_rs2",
    "power_vs_n",
    "power_vs_relay_grid",
];

const RATE_METHODS: [Method; 5] = [Method::JointFlexible, Method::JointFixed, Method::Rbot, Method::Obrt, Method::Rbrt];
const POWER_METHODS: [Method; 4] = [Method::Joint, Method::Rbot, Method::Obrt, Method::Rbrt];

fn range(start: f64, stop: f64, points: usize) -> Axis {
    Axis::Range { start, stop, points }
}

fn relay_grid() -> SweepSpec {
    SweepSpec { variable: SweepVar::RelayGrid, values: range(1.0, 19.0, 19), y_values: Some(range(0.0, 9.0, 10)) }
}

fn sweep(variable: SweepVar, values: Axis) -> SweepSpec {
    SweepSpec { variable, values, y_values: None }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (mode, methods, sweep, trials): (Mode, &[Method], SweepSpec, usize) = match name {
        "wsr_vs_ps1" => (Mode::WsrFixed, &RATE_METHODS, sweep(SweepVar::PS1, range(0.5, 4.0, 8)), 200),
        "wsr_vs_ps2" => (Mode::WsrFixed, &RATE_METHODS, sweep(SweepVar::PS2, range(0.1, 0.8, 8)), 200),
        "wsr_vs_n" => (
            Mode::WsrFixed,
            &[Method::JointFlexible, Method::JointFixed],
            sweep(SweepVar::Antennas, range(1.0, 8.0, 8)),
            200,
        ),
        "wsr_vs_relay_grid_fixed" => (Mode::WsrFixed, &[Method::Joint], relay_grid(), 100),
        "wsr_vs_relay_grid_flexible" => (Mode::WsrFlexible, &[Method::Joint], relay_grid(), 100),
        "power_vs_rs1" => (Mode::MinPower, &POWER_METHODS, sweep(SweepVar::RS1, range(0.1, 2.0, 8)), 200),
        "power_vs_rs2" => (Mode::MinPower, &POWER_METHODS, sweep(SweepVar::RS2, range(0.1, 2.0, 8)), 200),
        "power_vs_n" => (Mode::MinPower, &[Method::Joint], sweep(SweepVar::Antennas, range(1.0, 8.0, 8)), 200),
        "power_vs_relay_grid" => (Mode::MinPower, &[Method::Joint], relay_grid(), 100),
        other => {
            return Err(Error::Config(format!("unknown preset '{other}'; available: {}", PRESETS.join(", "))));
        }
    };
    let topology = if sweep.variable == SweepVar::RelayGrid {
        TopologySpec::Relay { relay_x: 10.0, relay_y: 5.0, path_loss_exponent: 4.0 }
    } else {
        TopologySpec::Standard
    };
    let cfg = ExperimentConfig {
        version: CONFIG_VERSION,
        name: name.to_string(),
        mode,
        trials,
        base_seed: 1,
        methods: methods.to_vec(),
        params: SystemParams::default(),
        topology,
        sweep,
        tolerances: Tolerances::default(),
        output: OutputSpec::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            assert_eq!(cfg.name, name);
            let n = cfg.points().unwrap().len();
            if name.contains("relay_grid") {
                // 19 x 10 cells minus the one on top of D2.
                assert_eq!(n, 189);
            } else {
                assert_eq!(n, 8);
            }
        }
    }

    #[test]
    fn unknown_preset_lists_the_choices() {
        let msg = preset("nope").unwrap_err().to_string();
        assert!(msg.contains("power_vs_relay_grid"), "{msg}");
    }
}
