//! Figure rendering: self-contained SVG line plots from a trace.
//!
//! The renderer discovers the arm layout from the trace header, so a CSV
//! written by one process can be plotted by another without the scenario
//! file. Output is deterministic: the same trace yields byte-identical SVG.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::TraceError;
use crate::trace::SimTrace;

/// Distinct series colors, reused in order when a figure has many arms.
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const LEADER_COLOR: &str = "#000000";

/// Cap on points per polyline; longer series are strided down to keep files
/// small without visibly changing the curves.
const MAX_POINTS: usize = 500;

struct Series {
    label: String,
    color: String,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

struct Panel {
    title: String,
    x_label: String,
    y_label: String,
    equal_aspect: bool,
    series: Vec<Series>,
}

impl Panel {
    fn new(
        title: impl Into<String>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
    ) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            equal_aspect: false,
            series: Vec::new(),
        }
    }

    fn line(&mut self, label: impl Into<String>, color: &str, dashed: bool, x: &[f64], y: &[f64]) {
        let stride = x.len().div_ceil(MAX_POINTS).max(1);
        let mut points: Vec<(f64, f64)> = x
            .iter()
            .zip(y)
            .step_by(stride)
            .map(|(&a, &b)| (a, b))
            .collect();
        if stride > 1 {
            if let (Some(&lx), Some(&ly)) = (x.last(), y.last()) {
                if points.last() != Some(&(lx, ly)) {
                    points.push((lx, ly));
                }
            }
        }
        self.series.push(Series {
            label: label.into(),
            color: color.to_string(),
            dashed,
            points,
        });
    }
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.abs().log10().floor());
    for mult in [1.0, 2.0, 5.0, 10.0] {
        if mag * mult >= raw {
            return mag * mult;
        }
    }
    mag * 10.0
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let step = nice_step(hi - lo, 5);
    let first = (lo / step).ceil() * step;
    let mut out = Vec::new();
    let mut v = first;
    while v <= hi + step * 1e-9 {
        // snap tiny float residue so labels read 0 rather than 1.2e-16
        out.push(if v.abs() < step * 1e-9 { 0.0 } else { v });
        v += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if !(0.001..1000.0).contains(&a) {
        format!("{v:.1e}")
    } else if a >= 10.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 58.0;
const MARGIN_R: f64 = 12.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;

fn render_panel(out: &mut String, panel: &Panel, ox: f64, oy: f64) {
    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for s in &panel.series {
        for &(x, y) in &s.points {
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
    }
    if !x_lo.is_finite() {
        x_lo = 0.0;
        x_hi = 1.0;
        y_lo = 0.0;
        y_hi = 1.0;
    }
    if x_hi - x_lo < 1e-12 {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad_y = (y_hi - y_lo) * 0.05;
    y_lo -= pad_y;
    y_hi += pad_y;
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    if panel.equal_aspect {
        // widen the smaller span so one data unit is equal in x and y
        let sx = plot_w / (x_hi - x_lo);
        let sy = plot_h / (y_hi - y_lo);
        if sx > sy {
            let extra = (plot_w / sy - (x_hi - x_lo)) / 2.0;
            x_lo -= extra;
            x_hi += extra;
        } else {
            let extra = (plot_h / sx - (y_hi - y_lo)) / 2.0;
            y_lo -= extra;
            y_hi += extra;
        }
    }
    let px = |x: f64| ox + MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| oy + MARGIN_T + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

    let _ = writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="#888" stroke-width="1"/>"##,
        ox + MARGIN_L,
        oy + MARGIN_T
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle" font-weight="bold">{}</text>"#,
        ox + MARGIN_L + plot_w / 2.0,
        oy + 18.0,
        xml_escape(&panel.title)
    );
    for t in ticks(x_lo, x_hi) {
        let x = px(t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd" stroke-width="0.5"/>"##,
            oy + MARGIN_T,
            oy + MARGIN_T + plot_h
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#,
            oy + MARGIN_T + plot_h + 14.0,
            fmt_tick(t)
        );
    }
    for t in ticks(y_lo, y_hi) {
        let y = py(t);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd" stroke-width="0.5"/>"##,
            ox + MARGIN_L,
            ox + MARGIN_L + plot_w
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"#,
            ox + MARGIN_L - 4.0,
            y + 3.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
        ox + MARGIN_L + plot_w / 2.0,
        oy + PANEL_H - 8.0,
        xml_escape(&panel.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
        ox + 14.0,
        oy + MARGIN_T + plot_h / 2.0,
        ox + 14.0,
        oy + MARGIN_T + plot_h / 2.0,
        xml_escape(&panel.y_label)
    );
    for s in &panel.series {
        let mut d = String::new();
        for (k, &(x, y)) in s.points.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.2},{:.2} ",
                if k == 0 { "M" } else { "L" },
                px(x),
                py(y)
            );
        }
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.2"{dash}/>"#,
            d.trim_end(),
            s.color
        );
    }
    // legend in the top-right corner of the plot area
    for (k, s) in panel.series.iter().enumerate() {
        let y = oy + MARGIN_T + 12.0 + 12.0 * k as f64;
        let x = ox + MARGIN_L + plot_w - 70.0;
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="1.2"{dash}/>"#,
            x + 16.0,
            s.color
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="9">{}</text>"#,
            x + 20.0,
            y + 3.0,
            xml_escape(&s.label)
        );
    }
}

fn render_svg(title: &str, panels: &[Panel], columns: usize) -> String {
    let columns = columns.max(1);
    let rows = panels.len().div_ceil(columns);
    let width = PANEL_W * columns as f64;
    let height = PANEL_H * rows as f64 + 26.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="Helvetica, Arial, sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="18" font-size="15" text-anchor="middle" font-weight="bold">{}</text>"#,
        width / 2.0,
        xml_escape(title)
    );
    for (k, panel) in panels.iter().enumerate() {
        let ox = (k % columns) as f64 * PANEL_W;
        let oy = 26.0 + (k / columns) as f64 * PANEL_H;
        render_panel(&mut out, panel, ox, oy);
    }
    out.push_str("</svg>\n");
    out
}

/// Arm layout recovered from a trace header: one-based arm numbers with
/// their joint counts, in order. Arms announce themselves through their
/// `q{arm}_{joint}` columns.
fn arm_layout(trace: &SimTrace) -> Vec<(usize, usize)> {
    let mut arms: Vec<(usize, usize)> = Vec::new();
    for name in trace.columns() {
        let Some(rest) = name.strip_prefix('q') else {
            continue;
        };
        let Some((num, joint)) = rest.split_once('_') else {
            continue;
        };
        let (Ok(a), Ok(j)) = (num.parse::<usize>(), joint.parse::<usize>()) else {
            continue;
        };
        match arms.iter_mut().find(|(arm, _)| *arm == a) {
            Some((_, dof)) => *dof = (*dof).max(j),
            None => arms.push((a, j)),
        }
    }
    arms.sort_unstable();
    arms
}

fn has_column(trace: &SimTrace, name: &str) -> bool {
    trace.columns().iter().any(|c| c == name)
}

fn write_file(path: &Path, content: &str) -> Result<(), TraceError> {
    std::fs::write(path, content).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_nonempty(trace: &SimTrace) -> Result<(), TraceError> {
    if trace.n_rows() == 0 {
        return Err(TraceError::Empty);
    }
    Ok(())
}

/// Renders the three single-run figures into `out_dir`: estimator components
/// against time, task-space states against time, and end-effector paths in
/// the XY plane. Returns the written paths.
pub fn render_figures(trace: &SimTrace, out_dir: &Path) -> Result<Vec<PathBuf>, TraceError> {
    check_nonempty(trace)?;
    let times = trace.times()?;
    let arms = arm_layout(trace);
    let leader = has_column(trace, "x0_x");
    let mut written = Vec::new();

    // estimator components
    let mut panels = Vec::new();
    for (block, hat) in ["xhat", "vhat", "ahat"].iter().enumerate() {
        for c in ["x", "y"] {
            let unit = ["m", "m/s", "m/s^2"][block];
            let mut panel = Panel::new(
                format!("{hat} {c}"),
                "time (s)",
                format!("{hat} {c} ({unit})"),
            );
            for (k, (a, _)) in arms.iter().enumerate() {
                let y = trace.column(&format!("{hat}{a}_{c}"))?;
                panel.line(
                    format!("arm {a}"),
                    PALETTE[k % PALETTE.len()],
                    false,
                    &times,
                    &y,
                );
            }
            if leader {
                let name = ["x0", "v0", "a0"][block];
                let y = trace.column(&format!("{name}_{c}"))?;
                panel.line("reference", LEADER_COLOR, true, &times, &y);
            }
            panels.push(panel);
        }
    }
    let path = out_dir.join("estimates.svg");
    write_file(&path, &render_svg("Estimator components", &panels, 2))?;
    written.push(path);

    // task-space states
    let mut panels = Vec::new();
    for (kind, label, leader_name, unit) in [
        ("x", "position", "x0", "m"),
        ("xd", "velocity", "v0", "m/s"),
    ] {
        for c in ["x", "y"] {
            let mut panel = Panel::new(
                format!("task-space {label} {c}"),
                "time (s)",
                format!("{kind} {c} ({unit})"),
            );
            for (k, (a, _)) in arms.iter().enumerate() {
                let y = trace.column(&format!("{kind}{a}_{c}"))?;
                panel.line(
                    format!("arm {a}"),
                    PALETTE[k % PALETTE.len()],
                    false,
                    &times,
                    &y,
                );
            }
            if leader {
                let y = trace.column(&format!("{leader_name}_{c}"))?;
                panel.line("reference", LEADER_COLOR, true, &times, &y);
            }
            panels.push(panel);
        }
    }
    let path = out_dir.join("task_space.svg");
    write_file(&path, &render_svg("Task-space states", &panels, 2))?;
    written.push(path);

    // XY-plane paths
    let mut panel = Panel::new("end-effector paths", "x (m)", "y (m)");
    panel.equal_aspect = true;
    for (k, (a, _)) in arms.iter().enumerate() {
        let x = trace.column(&format!("x{a}_x"))?;
        let y = trace.column(&format!("x{a}_y"))?;
        panel.line(
            format!("arm {a}"),
            PALETTE[k % PALETTE.len()],
            false,
            &x,
            &y,
        );
    }
    if leader {
        let x = trace.column("x0_x")?;
        let y = trace.column("x0_y")?;
        panel.line("reference", LEADER_COLOR, true, &x, &y);
    }
    let path = out_dir.join("xy_plane.svg");
    write_file(
        &path,
        &render_svg("XY plane", std::slice::from_ref(&panel), 1),
    )?;
    written.push(path);

    Ok(written)
}

/// Renders the joint-position comparison for one arm across a subtask pair
/// run: left panel with the subtask, right panel without. An optional target
/// angle is drawn as a horizontal dashed line.
pub fn render_joint_comparison(
    with: &SimTrace,
    without: &SimTrace,
    arm: usize,
    target: Option<f64>,
    out_dir: &Path,
) -> Result<PathBuf, TraceError> {
    check_nonempty(with)?;
    check_nonempty(without)?;
    let dof = arm_layout(with)
        .iter()
        .find(|(a, _)| *a == arm)
        .map(|&(_, d)| d)
        .ok_or_else(|| TraceError::MissingColumn(format!("q{arm}_1")))?;
    let mut panels = Vec::new();
    for (trace, title) in [(with, "with subtask"), (without, "without subtask")] {
        let times = trace.times()?;
        let mut panel = Panel::new(
            format!("arm {arm} {title}"),
            "time (s)",
            "joint angle (rad)",
        );
        for j in 1..=dof {
            let y = trace.column(&format!("q{arm}_{j}"))?;
            panel.line(
                format!("q{j}"),
                PALETTE[(j - 1) % PALETTE.len()],
                false,
                &times,
                &y,
            );
        }
        if let Some(target) = target {
            let y = vec![target; times.len()];
            panel.line("target", LEADER_COLOR, true, &times, &y);
        }
        panels.push(panel);
    }
    let path = out_dir.join(format!("arm{arm}_joint_comparison.svg"));
    write_file(
        &path,
        &render_svg(&format!("Arm {arm} joint positions"), &panels, 2),
    )?;
    Ok(path)
}

/// Renders the manipulability comparison for one arm across a subtask pair.
pub fn render_manipulability_comparison(
    with: &SimTrace,
    without: &SimTrace,
    arm: usize,
    out_dir: &Path,
) -> Result<PathBuf, TraceError> {
    check_nonempty(with)?;
    check_nonempty(without)?;
    let mut panel = Panel::new(
        format!("arm {arm} manipulability"),
        "time (s)",
        "det(J J^T)",
    );
    let col = format!("manip{arm}");
    let times = with.times()?;
    panel.line(
        "with subtask",
        PALETTE[0],
        false,
        &times,
        &with.column(&col)?,
    );
    let times = without.times()?;
    panel.line("without", PALETTE[1], true, &times, &without.column(&col)?);
    let path = out_dir.join(format!("arm{arm}_manipulability.svg"));
    write_file(
        &path,
        &render_svg(
            &format!("Arm {arm} manipulability"),
            std::slice::from_ref(&panel),
            1,
        ),
    )?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_trace(rows: usize) -> SimTrace {
        let names = [
            "t", "segment", "x0_x", "x0_y", "v0_x", "v0_y", "a0_x", "a0_y", "q1_1", "q1_2", "x1_x",
            "x1_y", "xd1_x", "xd1_y", "xhat1_x", "xhat1_y", "vhat1_x", "vhat1_y", "ahat1_x",
            "ahat1_y", "manip1",
        ];
        let mut trace = SimTrace::new(names.iter().map(|s| s.to_string()).collect());
        for r in 0..rows {
            let t = r as f64 * 0.01;
            let mut row = vec![t, 0.0];
            row.extend([t.sin(), t.cos(), t.cos(), -t.sin(), -t.sin(), -t.cos()]);
            row.extend([0.3 + t, 1.0 - t]);
            row.extend([t.sin() + 0.1, t.cos() - 0.1, 0.0, 0.0]);
            row.extend([t.sin(), t.cos(), 0.0, 0.0, 0.0, 0.0]);
            row.push(1.0 + t);
            trace.push_row(row).unwrap();
        }
        trace
    }

    #[test]
    fn figures_are_written_and_deterministic() {
        let dir = std::env::temp_dir().join(format!("figtest_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let trace = synthetic_trace(300);
        let first = render_figures(&trace, &dir).unwrap();
        assert_eq!(first.len(), 3);
        let bytes: Vec<Vec<u8>> = first.iter().map(|p| std::fs::read(p).unwrap()).collect();
        for b in &bytes {
            let text = String::from_utf8(b.clone()).unwrap();
            assert!(text.starts_with("<svg"));
            assert!(text.trim_end().ends_with("</svg>"));
        }
        let again = render_figures(&trace, &dir).unwrap();
        for (path, old) in again.iter().zip(&bytes) {
            assert_eq!(&std::fs::read(path).unwrap(), old, "{path:?} changed");
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn empty_trace_writes_nothing() {
        let dir = std::env::temp_dir().join(format!("figtest_empty_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let trace = synthetic_trace(0);
        assert!(matches!(
            render_figures(&trace, &dir),
            Err(TraceError::Empty)
        ));
        assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 0);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn comparison_figures() {
        let dir = std::env::temp_dir().join(format!("figtest_cmp_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let with = synthetic_trace(100);
        let without = synthetic_trace(100);
        let joint = render_joint_comparison(&with, &without, 1, Some(1.0), &dir).unwrap();
        assert!(std::fs::read_to_string(&joint).unwrap().contains("target"));
        let manip = render_manipulability_comparison(&with, &without, 1, &dir).unwrap();
        assert!(std::fs::read_to_string(&manip)
            .unwrap()
            .contains("with subtask"));
        // unknown arm is a named failure
        assert!(matches!(
            render_joint_comparison(&with, &without, 9, None, &dir),
            Err(TraceError::MissingColumn(_))
        ));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn tick_generation_is_sane() {
        let t = ticks(0.0, 10.0);
        assert!(t.contains(&0.0) && t.contains(&10.0));
        assert!(t.len() >= 3 && t.len() <= 8);
        let t = ticks(-0.037, 0.041);
        assert!(t.len() >= 3);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }
}
