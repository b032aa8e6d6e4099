//! CSV tables, SVG line charts and run metadata.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bounds::{check_bounds, BoundReport};
use crate::config::{ExperimentConfig, Format};
use crate::error::Result;
use crate::run::AggregateResult;

/// Writes one row per (variant, step) under the header `step,variant,mean_reward,pct_optimal`.
pub fn emit_csv(result: &AggregateResult, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_io)?;
    w.write_record(["step", "variant", "mean_reward", "pct_optimal"]).map_err(csv_io)?;
    for v in &result.variants {
        for t in 0..result.steps {
            w.write_record([
                (t + 1).to_string(),
                v.name.clone(),
                fmt_sig(v.mean_reward[t], 9),
                fmt_sig(v.pct_optimal[t], 9),
            ])
            .map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

/// Shortest plain or exponent form of `v` rounded to `digits` significant digits.
pub fn fmt_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa.to_string()))
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Series<'a> {
    name: &'a str,
    points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Tick step of 1, 2 or 5 times a power of ten giving about `target` intervals.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn axis_range(lo: f64, hi: f64) -> (f64, f64, f64) {
    let (lo, hi) = if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    };
    let step = nice_step(hi - lo, 6.0);
    ((lo / step).floor() * step, (hi / step).ceil() * step, step)
}

const W: f64 = 820.0;
const H: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series], markers: Option<&Series>) -> String {
    let all = series
        .iter()
        .chain(markers)
        .flat_map(|s| s.points.iter().copied());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (xa, xb, xs) = axis_range(x0, x1);
    let (ya, yb, ys) = axis_range(y0, y1);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - xa) / (xb - xa) * pw;
    let py = |y: f64| TOP + ph - (y - ya) / (yb - ya) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(s, r##"<g class="axes" stroke="#333" fill="none">"##);
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/>"#);
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g class="ticks" fill="#333">"##);
    let mut k = 0;
    loop {
        let x = xa + k as f64 * xs;
        if x > xb + xs * 1e-9 {
            break;
        }
        let _ = writeln!(
            s,
            r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#333"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle">{4}</text>"##,
            px(x),
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            fmt_sig(x, 6)
        );
        k += 1;
    }
    let mut k = 0;
    loop {
        let y = ya + k as f64 * ys;
        if y > yb + ys * 1e-9 {
            break;
        }
        let _ = writeln!(
            s,
            r##"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="#333"/><text x="{3:.2}" y="{4:.2}" text-anchor="end">{5}</text>"##,
            LEFT - 5.0,
            py(y),
            LEFT,
            LEFT - 8.0,
            py(y) + 4.0,
            fmt_sig(y, 6)
        );
        k += 1;
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(ylabel)
    );

    for (i, ser) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" fill="none" stroke="{colour}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            pts.join(" "),
            escape(ser.name)
        );
    }
    if let Some(m) = markers {
        for &(x, y) in &m.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="none" stroke="black"/>"#,
                px(x),
                py(y)
            );
        }
    }

    let lx = W - RIGHT + 15.0;
    let _ = writeln!(s, r#"<g class="legend">"#);
    for (i, ser) in series.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            lx + 25.0,
            PALETTE[i % PALETTE.len()],
            lx + 32.0,
            y + 4.0,
            escape(ser.name)
        );
    }
    if let Some(m) = markers {
        let y = TOP + 10.0 + 20.0 * series.len() as f64;
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{y}" r="4" fill="none" stroke="black"/><text x="{}" y="{}">{}</text>"#,
            lx + 12.0,
            lx + 32.0,
            y + 4.0,
            escape(m.name)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

/// Writes `mean_reward.svg`, `pct_optimal.svg` and `learned_values.svg` into `dir`.
pub fn emit_svg(result: &AggregateResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let curve = |f: &dyn Fn(&crate::run::VariantResult) -> &Vec<f64>| -> Vec<Series> {
        result
            .variants
            .iter()
            .map(|v| Series {
                name: &v.name,
                points: f(v).iter().enumerate().map(|(t, y)| ((t + 1) as f64, *y)).collect(),
            })
            .collect()
    };
    let subtitle = format!("{} ({} runs)", result.name, result.replications);
    let charts = [
        (
            "mean_reward.svg",
            line_chart(
                &format!("Average reward: {subtitle}"),
                "step",
                "average reward",
                &curve(&|v| &v.mean_reward),
                None,
            ),
        ),
        (
            "pct_optimal.svg",
            line_chart(
                &format!("Optimal action: {subtitle}"),
                "step",
                "fraction optimal action",
                &curve(&|v| &v.pct_optimal),
                None,
            ),
        ),
        ("learned_values.svg", learned_chart(result, &subtitle)),
    ];
    let mut paths = Vec::new();
    for (file, body) in charts {
        let p = dir.join(file);
        fs::write(&p, body)?;
        paths.push(p);
    }
    Ok(paths)
}

fn learned_chart(result: &AggregateResult, subtitle: &str) -> String {
    let adversarial = result.env_means.is_none();
    let series: Vec<Series> = result
        .variants
        .iter()
        .map(|v| Series {
            name: &v.name,
            points: if adversarial {
                v.learned.values.iter().enumerate().map(|(i, y)| ((i + 1) as f64, *y)).collect()
            } else {
                v.learned
                    .arm_reward_means
                    .iter()
                    .enumerate()
                    .filter_map(|(i, m)| m.map(|y| ((i + 1) as f64, y)))
                    .collect()
            },
        })
        .collect();
    let truth = result.env_means.as_ref().map(|m| Series {
        name: "true mean",
        points: m.iter().enumerate().map(|(i, y)| ((i + 1) as f64, *y)).collect(),
    });
    let (title, ylabel) = if adversarial {
        ("Estimated cumulative reward", "estimated cumulative reward")
    } else {
        ("Learned average reward", "average observed reward")
    };
    line_chart(&format!("{title}: {subtitle}"), "arm", ylabel, &series, truth.as_ref())
}

#[derive(Serialize)]
struct Metadata<'a> {
    config: &'a ExperimentConfig,
    result: &'a AggregateResult,
    bounds: Vec<BoundReport>,
}

/// Writes the requested formats plus `metadata.json` into `cfg.out`.
pub fn emit_all(cfg: &ExperimentConfig, result: &AggregateResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.out)?;
    let mut written = Vec::new();
    if cfg.formats.contains(&Format::Csv) {
        let p = cfg.out.join("results.csv");
        emit_csv(result, &p)?;
        written.push(p);
    }
    if cfg.formats.contains(&Format::Svg) {
        written.extend(emit_svg(result, &cfg.out)?);
    }
    let meta = Metadata {
        config: cfg,
        result,
        bounds: check_bounds(result),
    };
    let p = cfg.out.join("metadata.json");
    fs::write(&p, serde_json::to_string_pretty(&meta)? + "\n")?;
    written.push(p);
    Ok(written)
}
