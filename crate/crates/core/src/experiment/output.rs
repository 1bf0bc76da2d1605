//! Artifacts of a sweep.
//!
//! The summary CSV is the contract; it holds no timing so that reruns are
//! byte-identical. Timings go to the `.meta.json` side file. Floats are
//! written with ten significant digits, missing values as `nan`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Method, SweepVar};
use super::run::{ResultRow, SweepOutput};
use crate::error::{Error, Result};

pub const CSV_COLUMNS: &str = "sweep_var,sweep_value,scheme,mean,stderr,n_ok,n_infeasible,n_failed";

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.9e}"))
}

pub fn summary_csv(cfg: &ExperimentConfig, out: &SweepOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# config_hash={} name={} trials={}", out.config_hash, cfg.name, cfg.trials);
    let _ = writeln!(s, "{CSV_COLUMNS}");
    for r in &out.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.sweep_var,
            r.sweep_value,
            r.method.name(),
            num(r.mean),
            num(r.stderr),
            r.n_ok,
            r.n_infeasible,
            r.n_failed
        );
    }
    s
}

/// Relay-grid table with the coordinates split into columns.
pub fn surface_csv(out: &SweepOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# config_hash={}", out.config_hash);
    let _ = writeln!(s, "relay_x,relay_y,scheme,mean,stderr,n_ok");
    for r in &out.rows {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.coords[0], r.coords[1], r.method.name(), num(r.mean), num(r.stderr), r.n_ok);
    }
    s
}

pub fn trial_csv(out: &SweepOutput, cfg: &ExperimentConfig) -> String {
    let points = cfg.points().unwrap_or_default();
    let mut s = String::new();
    let _ = writeln!(s, "# config_hash={}", out.config_hash);
    let _ = writeln!(s, "sweep_value,trial,seed,scheme,status,metric");
    for t in &out.trials {
        let label = points.get(t.point).map_or("?", |p| p.label.as_str());
        let status = serde_json::to_value(t.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let _ = writeln!(s, "{label},{},{},{},{status},{}", t.trial, t.seed, t.method.name(), num(t.metric));
    }
    s
}

#[derive(Serialize)]
struct Meta<'a> {
    config: &'a ExperimentConfig,
    config_hash: &'a str,
    failed_trials: usize,
    skipped_cells: Vec<(f64, f64)>,
    timings: Vec<Timing<'a>>,
    written_at_unix: u64,
}

#[derive(Serialize)]
struct Timing<'a> {
    sweep_value: &'a str,
    scheme: &'static str,
    wall_time_s: f64,
}

/// Files written by [`write_all`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Written {
    pub csv: PathBuf,
    pub meta: PathBuf,
    pub surface: Option<PathBuf>,
    pub trials: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

pub fn write_all(cfg: &ExperimentConfig, out: &SweepOutput, dir: &Path) -> Result<Written> {
    fs::create_dir_all(dir)?;
    let stem = cfg.stem();
    let mut w = Written { csv: dir.join(format!("{stem}.csv")), meta: dir.join(format!("{stem}.meta.json")), ..Written::default() };
    fs::write(&w.csv, summary_csv(cfg, out))?;

    let meta = Meta {
        config: cfg,
        config_hash: &out.config_hash,
        failed_trials: out.failures(),
        skipped_cells: cfg.skipped_cells(),
        timings: out
            .rows
            .iter()
            .map(|r| Timing { sweep_value: &r.sweep_value, scheme: r.method.name(), wall_time_s: r.wall_time_s })
            .collect(),
        written_at_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&w.meta, json)?;

    let grid = cfg.sweep.variable == SweepVar::RelayGrid;
    if grid {
        let p = dir.join(format!("{stem}_surface.csv"));
        fs::write(&p, surface_csv(out))?;
        w.surface = Some(p);
    }
    if cfg.output.trial_log {
        let p = dir.join(format!("{stem}_trials.csv"));
        fs::write(&p, trial_csv(out, cfg))?;
        w.trials = Some(p);
    }
    if cfg.output.plot {
        let p = dir.join(format!("{stem}.svg"));
        if grid {
            plot_grid(cfg, &out.rows, &p)?;
        } else {
            plot_curves(cfg, &out.rows, &p)?;
        }
        w.plot = Some(p);
    }
    Ok(w)
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Config(format!("plot: {e}"))
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    (lo - pad, hi + pad)
}

const PALETTE: [RGBColor; 6] = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];

/// Mean curve per method with a +-1 standard error band drawn as thin lines.
fn plot_curves(cfg: &ExperimentConfig, rows: &[ResultRow], path: &Path) -> Result<()> {
    let root = SVGBackend::new(path, (800, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let xr = bounds(rows.iter().map(|r| r.coords[0]));
    let yr = bounds(rows.iter().filter_map(|r| Some(r.mean? + r.stderr.unwrap_or(0.0))).chain(
        rows.iter().filter_map(|r| Some(r.mean? - r.stderr.unwrap_or(0.0))),
    ));
    let mut chart = ChartBuilder::on(&root)
        .caption(&cfg.name, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(xr.0..xr.1, yr.0..yr.1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(cfg.sweep.variable.name())
        .y_desc(cfg.mode.metric_name())
        .draw()
        .map_err(plot_err)?;
    for (i, &m) in cfg.methods.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<&ResultRow> = rows.iter().filter(|r| r.method == m && r.mean.is_some()).collect();
        let line = pts.iter().map(|r| (r.coords[0], r.mean.unwrap_or(0.0)));
        chart
            .draw_series(LineSeries::new(line, color.stroke_width(2)))
            .map_err(plot_err)?
            .label(m.name())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
        for sign in [-1.0, 1.0] {
            let band = pts.iter().map(|r| (r.coords[0], r.mean.unwrap_or(0.0) + sign * r.stderr.unwrap_or(0.0)));
            chart.draw_series(LineSeries::new(band, color.mix(0.35))).map_err(plot_err)?;
        }
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Heat map of the first method's mean over the relay grid.
fn plot_grid(cfg: &ExperimentConfig, rows: &[ResultRow], path: &Path) -> Result<()> {
    let method: Method = cfg.methods[0];
    let cells: Vec<&ResultRow> = rows.iter().filter(|r| r.method == method).collect();
    let root = SVGBackend::new(path, (860, 520)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let xr = bounds(cells.iter().map(|r| r.coords[0]));
    let yr = bounds(cells.iter().map(|r| r.coords[1]));
    let (lo, hi) = cells.iter().filter_map(|r| r.mean).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{} ({})", cfg.name, cfg.mode.metric_name()), ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(xr.0 - 0.5..xr.1 + 0.5, yr.0 - 0.5..yr.1 + 0.5)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("relay x (m)").y_desc("relay y (m)").draw().map_err(plot_err)?;
    let span = if hi > lo { hi - lo } else { 1.0 };
    chart
        .draw_series(cells.iter().filter_map(|r| {
            let v = r.mean?;
            let t = (v - lo) / span;
            let color = RGBColor((255.0 * t) as u8, 60, (255.0 * (1.0 - t)) as u8);
            let (x, y) = (r.coords[0], r.coords[1]);
            Some(Rectangle::new([(x - 0.5, y - 0.5), (x + 0.5, y + 0.5)], color.filled()))
        }))
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::Axis;
    use crate::experiment::presets::preset;
    use crate::experiment::run::run_sweep;

    #[test]
    fn writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = preset("wsr_vs_relay_grid_flexible").unwrap();
        cfg.trials = 1;
        cfg.output.trial_log = true;
        cfg.sweep.values = Axis::List(vec![9.0, 10.0]);
        cfg.sweep.y_values = Some(Axis::List(vec![0.0, 5.0]));
        let out = run_sweep(&cfg).unwrap();
        let w = write_all(&cfg, &out, dir.path()).unwrap();
        let csv = fs::read_to_string(&w.csv).unwrap();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# config_hash="));
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS);
        assert_eq!(lines.count(), 3);
        assert!(fs::read_to_string(w.surface.unwrap()).unwrap().contains("10,5,joint,"));
        assert!(fs::read_to_string(w.plot.unwrap()).unwrap().starts_with("<svg"));
        let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(w.meta).unwrap()).unwrap();
        assert_eq!(meta["skipped_cells"][0][0], 10.0);
        assert_eq!(fs::read_to_string(w.trials.unwrap()).unwrap().lines().count(), 5);
    }
}
