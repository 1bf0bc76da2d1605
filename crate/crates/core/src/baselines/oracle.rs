//! Exhaustive grid oracle for `N <= 2`.
//!
//! Grid points are exact physical allocations, so the WSR oracle is a lower
//! bound and the power oracle an upper bound on the true optimum. The grid
//! covers the time simplex at step `1 / tau_div`, beams
//! `w = (cos t, e^{ip} sin t)` at angular step `pi / (2 theta_div)` and, in
//! the flexible mode, the split of S1's energy between phases 1 and 2 at
//! step `1 / power_div`. Beams enter every metric only through the gains
//! `|h_D^H w|^2` and `|h_R^H w|^2`, both of which help, so only the Pareto
//! front of the beam grid is scanned.
//!
//! For the minimum-power oracle S1's energy at each split is the root of
//! its rate requirement (monotone Newton on a concave function), and S2's
//! phase-3 energy has a closed form: it is the clamp of the stationary point
//! of `x3 + E_req(x3) / c` to the interval where the relay energy is the
//! binding requirement.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::sysmodel::{capacity, evaluate, inner, Gains, PowerMode, ResourceAllocation, SystemParams};

/// Slack allowed when comparing a grid point's rates with the targets.
const QOS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub tau_div: usize,
    pub theta_div: usize,
    pub power_div: usize,
}

impl GridSpec {
    /// Time step 1/48, beam step pi/64, power step 1/48.
    pub const STANDARD: GridSpec = GridSpec { tau_div: 48, theta_div: 32, power_div: 48 };

    /// Same grid with every step doubled.
    pub fn coarsened(self) -> Result<GridSpec> {
        if self.tau_div % 2 != 0 || self.theta_div % 2 != 0 || self.power_div % 2 != 0 {
            return Err(Error::Domain(format!("grid {self:?} cannot be coarsened")));
        }
        Ok(GridSpec { tau_div: self.tau_div / 2, theta_div: self.theta_div / 2, power_div: self.power_div / 2 })
    }

    fn validate(&self) -> Result<()> {
        if self.tau_div == 0 || self.theta_div == 0 || self.power_div == 0 {
            return Err(Error::Domain("grid divisions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    /// Best metric over feasible grid points; `None` if no point is feasible.
    pub value: Option<f64>,
    pub allocation: Option<ResourceAllocation>,
    pub grid: GridSpec,
}

/// Oracle values at `grid`, twice and four times coarser, with the
/// resolution bound `max(|o(d) - o(2d)|, |o(2d) - o(4d)| / 2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Refinement {
    pub values: [Option<f64>; 3],
    pub bound: Option<f64>,
    pub finest: OracleResult,
}

struct Beam {
    w: Vec<Complex64>,
    ga: f64,
    gb: f64,
}

fn beam_front(ch: &ChannelRealization, theta_div: usize) -> Result<Vec<Beam>> {
    let a = &ch.h_s1d1;
    let b = &ch.h_s1r;
    let mk = |w: Vec<Complex64>| Beam { ga: inner(a, &w).norm_sqr(), gb: inner(b, &w).norm_sqr(), w };
    let all: Vec<Beam> = match ch.antennas() {
        1 => vec![mk(vec![Complex64::new(1.0, 0.0)])],
        2 => {
            let step = std::f64::consts::FRAC_PI_2 / theta_div as f64;
            let mut v = Vec::new();
            for i in 0..=theta_div {
                let t = i as f64 * step;
                for j in 0..4 * theta_div {
                    let p = j as f64 * step;
                    v.push(mk(vec![Complex64::new(t.cos(), 0.0), Complex64::from_polar(t.sin(), p)]));
                    if i == 0 {
                        break;
                    }
                }
            }
            v
        }
        n => return Err(Error::Unsupported(format!("brute-force oracle needs N <= 2, got {n}"))),
    };
    let mut all = all;
    all.sort_by(|x, y| y.ga.total_cmp(&x.ga).then(y.gb.total_cmp(&x.gb)));
    let mut front: Vec<Beam> = Vec::new();
    for beam in all {
        if front.last().is_none_or(|f| beam.gb > f.gb) {
            front.push(beam);
        }
    }
    Ok(front)
}

/// Grid indices `(i, j)` of `(tau1, tau2)`; `tau3` and `tau4` split the rest.
fn s1_pairs(div: usize) -> Vec<(usize, usize)> {
    (0..=div).flat_map(|i| (0..=div - i).map(move |j| (i, j))).collect()
}

/// Fractions of S1's energy spent in phase 1 that are admissible.
fn splits(t1: f64, t2: f64, power_div: usize) -> Vec<f64> {
    match (t1 > 0.0, t2 > 0.0) {
        (true, true) => (0..=power_div).map(|i| i as f64 / power_div as f64).collect(),
        (true, false) => vec![1.0],
        (false, true) => vec![0.0],
        (false, false) => vec![],
    }
}

fn phase_rate(tau: f64, snr_energy: f64) -> f64 {
    if tau > 0.0 {
        tau * capacity(snr_energy / tau)
    } else {
        0.0
    }
}

fn per_time(x: f64, t: f64) -> f64 {
    if t > 0.0 {
        x / t
    } else {
        0.0
    }
}

/// S1-side outcome of one (beam, split) choice; larger `a` and `b` are
/// both better.
#[derive(Clone, Copy)]
struct Entry {
    beam: usize,
    share: f64,
    a: f64,
    b: f64,
}

fn pareto(mut v: Vec<Entry>) -> Vec<Entry> {
    v.sort_by(|x, y| y.a.total_cmp(&x.a).then(y.b.total_cmp(&x.b)));
    let mut front: Vec<Entry> = Vec::new();
    for e in v {
        if front.last().is_none_or(|f| e.b > f.b) {
            front.push(e);
        }
    }
    front
}

/// Best grid point found so far: metric, then `(i, j, k)` to break ties.
#[derive(Clone, Copy)]
struct Best {
    value: f64,
    key: (usize, usize, usize),
    entry: Entry,
    /// Mode-specific extra: S1 energy and phase-3 energy for the power oracle.
    s1: f64,
    x3: f64,
}

fn pick(x: Option<Best>, y: Option<Best>, maximize: bool) -> Option<Best> {
    match (x, y) {
        (Some(a), Some(b)) => {
            let better = if maximize { b.value > a.value } else { b.value < a.value };
            Some(if better || (b.value == a.value && b.key < a.key) { b } else { a })
        }
        (a, None) => a,
        (None, b) => b,
    }
}

/// Allocation with the relay spending everything it harvests.
fn assemble(params: &SystemParams, ch: &ChannelRealization, tau: [f64; 4], w: &[Complex64], p_phase: [f64; 3]) -> ResourceAllocation {
    let mut alloc = ResourceAllocation { tau, omega: w.to_vec(), p_phase, p_relay: 0.0 };
    if tau[3] > 0.0 {
        let ev = evaluate(params, ch, &alloc);
        alloc.p_relay = (ev.e_r1 + ev.e_r2) / tau[3];
    }
    alloc
}

fn tau_of(key: (usize, usize, usize), div: usize) -> [f64; 4] {
    let d = div as f64;
    let (i, j, k) = key;
    [i as f64 / d, j as f64 / d, k as f64 / d, (div - i - j - k) as f64 / d]
}

fn check_agreement(params: &SystemParams, ch: &ChannelRealization, alloc: &ResourceAllocation, value: f64, wsr: bool) {
    let ev = evaluate(params, ch, alloc);
    let m = if wsr { ev.wsr } else { ev.total_power };
    debug_assert!((m - value).abs() <= 1e-9 * value.abs().max(1e-12), "oracle {value} vs model {m}");
}

/// Maximum WSR over the grid, with the relay spending all harvested energy.
pub fn brute_force_wsr(params: &SystemParams, ch: &ChannelRealization, mode: PowerMode, grid: GridSpec) -> Result<OracleResult> {
    params.validate()?;
    grid.validate()?;
    if mode == PowerMode::Unconstrained {
        return Err(Error::Domain("the WSR oracle needs a fixed or flexible power mode".into()));
    }
    let g = Gains::of(ch);
    let n0 = params.n0;
    let div = grid.tau_div;
    let d = div as f64;
    let beams = beam_front(ch, grid.theta_div)?;

    let best = s1_pairs(div)
        .par_iter()
        .map(|&(i, j)| {
            let (t1, t2) = (i as f64 / d, j as f64 / d);
            // S1 energies per phase for each admissible split
            let energies: Vec<(f64, f64, f64)> = match mode {
                PowerMode::Fixed => vec![(f64::NAN, t1 * params.p_s1, t2 * params.p_s1)],
                _ => splits(t1, t2, grid.power_div).into_iter().map(|s| (s, s * params.p_s1, (1.0 - s) * params.p_s1)).collect(),
            };
            let mut entries = Vec::new();
            for (bi, beam) in beams.iter().enumerate() {
                for &(s, x1, x2) in &energies {
                    let r1 = phase_rate(t1, x1 * beam.ga / n0) + phase_rate(t2, x2 * g.s1d1_norm_sqr / n0);
                    if r1 < params.r_s1 - QOS_SLACK {
                        continue;
                    }
                    let harvest = params.eta * (if t1 > 0.0 { x1 * beam.gb } else { 0.0 } + if t2 > 0.0 { x2 * g.s1r_mrt } else { 0.0 });
                    entries.push(Entry { beam: bi, share: s, a: r1, b: harvest });
                }
            }
            let entries = pareto(entries);
            let rest = div - i - j;
            let mut local = None;
            for k in 0..=rest {
                let (t3, t4) = (k as f64 / d, (rest - k) as f64 / d);
                let p3 = match mode {
                    PowerMode::Fixed => params.p_s2,
                    _ => per_time(params.p_s2, t3),
                };
                let hop1 = phase_rate(t3, t3 * p3 * g.s2r / n0);
                let direct = phase_rate(t3, t3 * p3 * g.s2d2 / n0);
                for e in &entries {
                    let r2 = hop1.min(direct + phase_rate(t4, e.b * g.rd2 / n0));
                    if r2 < params.r_s2 - QOS_SLACK {
                        continue;
                    }
                    let value = params.alpha1 * e.a + params.alpha2 * r2;
                    local = pick(local, Some(Best { value, key: (i, j, k), entry: *e, s1: 0.0, x3: 0.0 }), true);
                }
            }
            local
        })
        .reduce(|| None, |x, y| pick(x, y, true));

    let Some(b) = best else {
        return Ok(OracleResult { value: None, allocation: None, grid });
    };
    let tau = tau_of(b.key, div);
    let s = b.entry.share;
    let p_phase = match mode {
        PowerMode::Fixed => [params.p_s1, params.p_s1, params.p_s2],
        _ => [per_time(s * params.p_s1, tau[0]), per_time((1.0 - s) * params.p_s1, tau[1]), per_time(params.p_s2, tau[2])],
    };
    let alloc = assemble(params, ch, tau, &beams[b.entry.beam].w, p_phase);
    check_agreement(params, ch, &alloc, b.value, true);
    Ok(OracleResult { value: Some(b.value), allocation: Some(alloc), grid })
}

/// Smallest S1 energy meeting `r1` at split `s` (`None` if unreachable).
fn s1_energy(r1: f64, t1: f64, t2: f64, s: f64, c1: f64, c2: f64) -> Option<f64> {
    if r1 <= 0.0 {
        return Some(0.0);
    }
    // R(S) = t1 log2(1 + s S c1 / t1) + t2 log2(1 + (1-s) S c2 / t2)
    let k1 = if t1 > 0.0 { s * c1 / t1 } else { 0.0 };
    let k2 = if t2 > 0.0 { (1.0 - s) * c2 / t2 } else { 0.0 };
    if k1 <= 0.0 && k2 <= 0.0 {
        return None;
    }
    let ln2 = std::f64::consts::LN_2;
    let f = |x: f64| t1 * (k1 * x).ln_1p() / ln2 + t2 * (k2 * x).ln_1p() / ln2;
    let df = |x: f64| (t1 * k1 / (1.0 + k1 * x) + t2 * k2 / (1.0 + k2 * x)) / ln2;
    // concave and increasing: Newton from the left stays left of the root
    let mut x = 0.0;
    for _ in 0..500 {
        let step = (r1 - f(x)) / df(x);
        if !step.is_finite() {
            return None;
        }
        x += step;
        if step <= 1e-15 * x {
            break;
        }
    }
    Some(x)
}

/// Minimum average power over the grid.
pub fn brute_force_min_power(params: &SystemParams, ch: &ChannelRealization, grid: GridSpec) -> Result<OracleResult> {
    params.validate()?;
    grid.validate()?;
    let g = Gains::of(ch);
    let n0 = params.n0;
    let (r1, r2, eta) = (params.r_s1, params.r_s2, params.eta);
    let div = grid.tau_div;
    let d = div as f64;
    let beams = beam_front(ch, grid.theta_div)?;

    let best = s1_pairs(div)
        .par_iter()
        .map(|&(i, j)| {
            let (t1, t2) = (i as f64 / d, j as f64 / d);
            let mut shares = splits(t1, t2, grid.power_div);
            if shares.is_empty() {
                shares.push(0.0);
            }
            // a = -(S1 energy for the rate target), b = harvest per unit S1 energy
            let mut entries = Vec::new();
            for (bi, beam) in beams.iter().enumerate() {
                for &s in &shares {
                    let Some(need) = s1_energy(r1, t1, t2, s, beam.ga / n0, g.s1d1_norm_sqr / n0) else {
                        continue;
                    };
                    let c = eta * (if t1 > 0.0 { s * beam.gb } else { 0.0 } + if t2 > 0.0 { (1.0 - s) * g.s1r_mrt } else { 0.0 });
                    entries.push(Entry { beam: bi, share: s, a: -need, b: c });
                }
            }
            let entries = pareto(entries);
            let rest = div - i - j;
            let mut local = None;
            for k in 0..=rest {
                let (t3, t4) = (k as f64 / d, (rest - k) as f64 / d);
                if r2 > 0.0 && t3 <= 0.0 {
                    continue;
                }
                // phase-3 energy for hop 1 alone and for the direct link alone
                let need = |gain: f64| if r2 > 0.0 { t3 * n0 / gain * (2f64.powf(r2 / t3) - 1.0) } else { 0.0 };
                let x3_hop = need(g.s2r);
                let x3_dir = need(g.s2d2);
                let relay_useful = r2 > 0.0 && t4 > 0.0 && x3_dir > x3_hop;
                // E_req(x3) = K (A u^-rho - 1), u = 1 + x3 s2d2 / (n0 t3)
                let (kk, aa, rho, lin) = (t4 * n0 / g.rd2, 2f64.powf(r2 / t4), t3 / t4, g.s2d2 / (n0 * t3));
                let e_req = |x3: f64| (kk * (aa * (1.0 + x3 * lin).powf(-rho) - 1.0)).max(0.0);
                let x3_for_energy = |e: f64| (((e / kk + 1.0) / aa).powf(-1.0 / rho) - 1.0) / lin;
                for e in &entries {
                    let (s_rate, c) = (-e.a, e.b);
                    let (x3, s1) = if r2 <= 0.0 {
                        (0.0, s_rate)
                    } else if !relay_useful || c <= 0.0 {
                        (x3_hop.max(x3_dir), s_rate)
                    } else {
                        // beyond x_a the rate target, not the relay, sets S1's energy
                        let x_a = if s_rate > 0.0 { x3_for_energy(c * s_rate).clamp(0.0, x3_dir) } else { x3_dir };
                        let x3 = if x_a <= x3_hop {
                            x3_hop
                        } else {
                            // stationary point of x3 + E_req(x3) / c
                            let u = (c / (kk * rho * aa * lin)).powf(-1.0 / (rho + 1.0));
                            ((u - 1.0) / lin).clamp(x3_hop, x_a)
                        };
                        (x3, s_rate.max(e_req(x3) / c))
                    };
                    let best = Best { value: x3 + s1, key: (i, j, k), entry: *e, s1, x3 };
                    local = pick(local, Some(best), false);
                }
            }
            local
        })
        .reduce(|| None, |x, y| pick(x, y, false));

    let Some(b) = best else {
        return Ok(OracleResult { value: None, allocation: None, grid });
    };
    let tau = tau_of(b.key, div);
    let s = b.entry.share;
    let p_phase = [per_time(s * b.s1, tau[0]), per_time((1.0 - s) * b.s1, tau[1]), per_time(b.x3, tau[2])];
    let alloc = assemble(params, ch, tau, &beams[b.entry.beam].w, p_phase);
    check_agreement(params, ch, &alloc, b.value, false);
    Ok(OracleResult { value: Some(b.value), allocation: Some(alloc), grid })
}

fn refine(finest: GridSpec, maximize: bool, solve: impl Fn(GridSpec) -> Result<OracleResult>) -> Result<Refinement> {
    let mid = finest.coarsened()?;
    let coarse = mid.coarsened()?;
    let top = solve(finest)?;
    let values = [top.value, solve(mid)?.value, solve(coarse)?.value];
    let bound = match values {
        [Some(a), Some(b), Some(c)] => {
            let sign = if maximize { 1.0 } else { -1.0 };
            Some((sign * (a - b)).max(sign * (b - c) / 2.0).max(0.0))
        }
        _ => None,
    };
    Ok(Refinement { values, bound, finest: top })
}

pub fn refine_wsr(params: &SystemParams, ch: &ChannelRealization, mode: PowerMode, finest: GridSpec) -> Result<Refinement> {
    refine(finest, true, |g| brute_force_wsr(params, ch, mode, g))
}

pub fn refine_min_power(params: &SystemParams, ch: &ChannelRealization, finest: GridSpec) -> Result<Refinement> {
    refine(finest, false, |g| brute_force_min_power(params, ch, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channels, Topology};
    use crate::sysmodel::check_feasibility;

    fn instance(n: usize, seed: u64) -> (SystemParams, ChannelRealization) {
        let params = SystemParams { antennas: n, ..SystemParams::default() };
        (params, sample_channels(&Topology::standard(), n, seed).unwrap())
    }

    const SMALL: GridSpec = GridSpec { tau_div: 12, theta_div: 8, power_div: 12 };

    #[test]
    fn grid_covers_the_simplex() {
        let n: usize = s1_pairs(12).iter().map(|&(i, j)| 12 - i - j + 1).sum();
        assert_eq!(n, 455); // C(15, 3)
        let t = tau_of((3, 4, 2), 12);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_large_arrays() {
        let (params, ch) = instance(3, 0);
        assert!(brute_force_wsr(&params, &ch, PowerMode::Fixed, SMALL).is_err());
        assert!(brute_force_min_power(&params, &ch, SMALL).is_err());
    }

    #[test]
    fn zero_targets_need_no_power() {
        let (mut params, ch) = instance(2, 1);
        params.r_s1 = 0.0;
        params.r_s2 = 0.0;
        assert_eq!(brute_force_min_power(&params, &ch, SMALL).unwrap().value, Some(0.0));
    }

    #[test]
    fn refinement_is_monotone_and_argmax_is_feasible() {
        let (params, ch) = instance(2, 4);
        for mode in [PowerMode::Fixed, PowerMode::Flexible] {
            let r = refine_wsr(&params, &ch, mode, GridSpec { tau_div: 24, theta_div: 16, power_div: 24 }).unwrap();
            let [a, b, c] = r.values.map(Option::unwrap);
            assert!(a >= b && b >= c, "{mode:?}: {a} {b} {c}");
            let alloc = r.finest.allocation.as_ref().unwrap();
            let rep = check_feasibility(&params, &ch, alloc, mode, 1e-9);
            assert!(rep.feasible, "{mode:?}: {:?} {alloc:?}", rep.worst());
        }
        let r = refine_min_power(&params, &ch, GridSpec { tau_div: 24, theta_div: 16, power_div: 24 }).unwrap();
        let [a, b, c] = r.values.map(Option::unwrap);
        assert!(a <= b && b <= c, "{a} {b} {c}");
        let alloc = r.finest.allocation.as_ref().unwrap();
        assert!(check_feasibility(&params, &ch, alloc, PowerMode::Unconstrained, 1e-9).feasible);
    }

    #[test]
    fn newton_root_meets_the_target() {
        let e = s1_energy(0.5, 0.3, 0.2, 0.6, 2e3, 5e2).unwrap();
        let r = 0.3 * capacity(0.6 * e * 2e3 / 0.3) + 0.2 * capacity(0.4 * e * 5e2 / 0.2);
        assert!((r - 0.5).abs() < 1e-12);
        assert_eq!(s1_energy(0.5, 0.0, 0.0, 0.0, 1.0, 1.0), None);
    }
}
