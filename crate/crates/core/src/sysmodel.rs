//! Rates, harvested energy and QoS feasibility for a fully specified
//! allocation. Every optimizer output is checked against this module.
//!
//! The block length is normalized to one, so "bits per block" and
//! "bits/s/Hz averaged over the block" coincide, as do joules and watts.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{domain, Result};

/// `log2(1 + x)`.
pub fn rate_c(x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return domain(format!("SNR must be nonnegative, got {x}"));
    }
    Ok(capacity(x))
}

#[inline]
pub(crate) fn capacity(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// `tau * log2(1 + x / tau)`, closed to 0 at `tau = 0`.
#[inline]
pub fn perspective_rate(tau: f64, x: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else {
        tau * capacity(x / tau)
    }
}

/// Physical and QoS parameters shared by all problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Power budget at S1 (W).
    pub p_s1: f64,
    /// Power budget at S2 (W).
    pub p_s2: f64,
    /// Noise power (W).
    pub n0: f64,
    /// Energy conversion efficiency, in (0, 1].
    pub eta: f64,
    /// Minimum rate of group 1 (bits per block).
    pub r_s1: f64,
    /// Minimum rate of group 2 (bits per block).
    pub r_s2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Transmit antennas at S1.
    pub antennas: usize,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            p_s1: 2.0,
            p_s2: 0.2,
            n0: 1e-6,
            eta: 0.9,
            r_s1: 0.5,
            r_s2: 0.2,
            alpha1: 1.0,
            alpha2: 1.0,
            antennas: 4,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [("p_s1", self.p_s1), ("p_s2", self.p_s2), ("n0", self.n0)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return domain(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return domain(format!("eta must lie in (0, 1], got {}", self.eta));
        }
        let nonneg = [
            ("r_s1", self.r_s1),
            ("r_s2", self.r_s2),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return domain(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if self.antennas == 0 {
            return domain("antenna count must be at least 1");
        }
        Ok(())
    }
}

/// How the source powers are constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    /// S1 transmits at `p_s1` in phases 1 and 2, S2 at `p_s2` in phase 3.
    Fixed,
    /// Per-phase powers with block-average budgets `p_s1`, `p_s2`.
    Flexible,
    /// No budget; used by the power-minimization problem.
    Unconstrained,
}

/// Time split, beamformer and per-phase powers for one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceAllocation {
    pub tau: [f64; 4],
    pub omega: Vec<Complex64>,
    /// `[P_S1^(1), P_S1^(2), P_S2^(3)]`.
    pub p_phase: [f64; 3],
    pub p_relay: f64,
}

impl ResourceAllocation {
    pub fn beam_norm_sqr(&self) -> f64 {
        self.omega.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Link gains that the rate expressions depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    /// `||h_S1D1||^2`
    pub s1d1_norm_sqr: f64,
    /// `|h_S1R^H h_S1D1 / ||h_S1D1|| |^2`, the relay gain under MRT to D1.
    pub s1r_mrt: f64,
    pub s2r: f64,
    pub s2d2: f64,
    pub rd2: f64,
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

impl Gains {
    pub fn of(ch: &ChannelRealization) -> Self {
        let norm = ch.h_s1d1.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let s1r_mrt = if norm > 0.0 { inner(&ch.h_s1r, &ch.h_s1d1).norm_sqr() / norm } else { 0.0 };
        Gains {
            s1d1_norm_sqr: norm,
            s1r_mrt,
            s2r: ch.h_s2r.norm_sqr(),
            s2d2: ch.h_s2d2.norm_sqr(),
            rd2: ch.h_rd2.norm_sqr(),
        }
    }
}

/// Rates and energies achieved by an allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub r_s1_phase1: f64,
    pub r_s1_phase2: f64,
    pub r_s1: f64,
    pub r_s2: f64,
    pub e_r1: f64,
    pub e_r2: f64,
    /// `E_R1 + E_R2 - tau4 * P_R`; negative means the relay overspends.
    pub relay_energy_slack: f64,
    pub wsr: f64,
    pub total_power: f64,
}

/// Achievable rates (right-hand sides of the DF and two-phase rate bounds)
/// and harvested energies for `alloc`.
pub fn evaluate(params: &SystemParams, ch: &ChannelRealization, alloc: &ResourceAllocation) -> Evaluation {
    let g = Gains::of(ch);
    let [t1, t2, t3, t4] = alloc.tau;
    let [p1, p2, p3] = alloc.p_phase;
    let n0 = params.n0;
    let beam_d1 = inner(&ch.h_s1d1, &alloc.omega).norm_sqr();
    let beam_r = inner(&ch.h_s1r, &alloc.omega).norm_sqr();

    let on = |t: f64, v: f64| if t > 0.0 { v } else { 0.0 };
    let r_s1_phase1 = on(t1, t1 * capacity(p1 * beam_d1 / n0));
    let r_s1_phase2 = on(t2, t2 * capacity(p2 * g.s1d1_norm_sqr / n0));
    let e_r1 = on(t1, params.eta * t1 * p1 * beam_r);
    let e_r2 = on(t2, params.eta * t2 * p2 * g.s1r_mrt);

    let hop1 = on(t3, t3 * capacity(p3 * g.s2r / n0));
    let direct = on(t3, t3 * capacity(p3 * g.s2d2 / n0));
    let relay = on(t4, t4 * capacity(alloc.p_relay * g.rd2 / n0));
    let r_s2 = hop1.min(direct + relay);

    let r_s1 = r_s1_phase1 + r_s1_phase2;
    Evaluation {
        r_s1_phase1,
        r_s1_phase2,
        r_s1,
        r_s2,
        e_r1,
        e_r2,
        relay_energy_slack: e_r1 + e_r2 - on(t4, t4 * alloc.p_relay),
        wsr: params.alpha1 * r_s1 + params.alpha2 * r_s2,
        total_power: on(t3, t3 * p3) + on(t1, t1 * p1 * alloc.beam_norm_sqr()) + on(t2, t2 * p2),
    }
}

/// One checked constraint; `violation > 0` means the constraint is broken
/// by that amount.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub name: &'static str,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub checks: Vec<ConstraintCheck>,
    pub feasible: bool,
    pub tol: f64,
}

impl FeasibilityReport {
    pub fn worst(&self) -> Option<&ConstraintCheck> {
        self.checks.iter().max_by(|a, b| a.violation.total_cmp(&b.violation))
    }

    pub fn violation(&self, name: &str) -> Option<f64> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.violation)
    }
}

/// Checks the time simplex, beam norm, relay energy causality, QoS targets
/// and the power rules of `mode`.
pub fn check_feasibility(
    params: &SystemParams,
    ch: &ChannelRealization,
    alloc: &ResourceAllocation,
    mode: PowerMode,
    tol: f64,
) -> FeasibilityReport {
    let ev = evaluate(params, ch, alloc);
    let [t1, t2, t3, _] = alloc.tau;
    let [p1, p2, p3] = alloc.p_phase;
    let mut checks = vec![
        ConstraintCheck { name: "time_sum", violation: (alloc.tau.iter().sum::<f64>() - 1.0).abs() },
        ConstraintCheck {
            name: "time_nonneg",
            violation: alloc.tau.iter().map(|t| -t).fold(f64::NEG_INFINITY, f64::max),
        },
        ConstraintCheck { name: "beam_norm", violation: alloc.beam_norm_sqr() - 1.0 },
        ConstraintCheck { name: "relay_energy", violation: -ev.relay_energy_slack },
        ConstraintCheck { name: "qos_s1", violation: params.r_s1 - ev.r_s1 },
        ConstraintCheck { name: "qos_s2", violation: params.r_s2 - ev.r_s2 },
        ConstraintCheck {
            name: "power_nonneg",
            violation: [p1, p2, p3, alloc.p_relay].iter().map(|p| -p).fold(f64::NEG_INFINITY, f64::max),
        },
    ];
    match mode {
        PowerMode::Fixed => checks.push(ConstraintCheck {
            name: "fixed_power",
            violation: [(p1 - params.p_s1).abs(), (p2 - params.p_s1).abs(), (p3 - params.p_s2).abs()]
                .into_iter()
                .fold(0.0, f64::max),
        }),
        PowerMode::Flexible => {
            checks.push(ConstraintCheck { name: "budget_s1", violation: t1 * p1 + t2 * p2 - params.p_s1 });
            checks.push(ConstraintCheck { name: "budget_s2", violation: t3 * p3 - params.p_s2 });
        }
        PowerMode::Unconstrained => {}
    }
    let feasible = checks.iter().all(|c| c.violation <= tol);
    FeasibilityReport { checks, feasible, tol }
}
