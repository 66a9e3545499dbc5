//! Static SVG figures drawn from sweep CSV rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::config::Architecture;
use crate::harness::SummaryRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// Delivery rate against m, one series per architecture and length.
    Rate,
    /// Router infidelity against m per length, with a plateau guide.
    Infidelity,
    /// Router over routerless infidelity against m per length.
    Ratio,
}

impl FromStr for PlotKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rate" => Ok(PlotKind::Rate),
            "infidelity" => Ok(PlotKind::Infidelity),
            "ratio" => Ok(PlotKind::Ratio),
            other => Err(format!(
                "unknown plot kind `{other}` (expected rate|infidelity|ratio)"
            )),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("no rows to plot")]
    Empty,
    #[error("no router rows to plot")]
    NoRouterRows,
    #[error("ratio needs both architectures at m = {m}, L = {length_km} km; missing {missing}")]
    MissingPair {
        m: u32,
        length_km: f64,
        missing: Architecture,
    },
    #[error("routerless infidelity is zero at m = {m}, L = {length_km} km")]
    ZeroDenominator { m: u32, length_km: f64 },
}

#[derive(Clone, Debug, PartialEq)]
struct Point {
    x: f64,
    y: f64,
    err: f64,
}

#[derive(Clone, Debug, PartialEq)]
struct Series {
    label: String,
    points: Vec<Point>,
    dashed: bool,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];
const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Length key that orders and compares lengths exactly.
fn lkey(l: f64) -> u64 {
    l.to_bits()
}

fn by_length(rows: &[SummaryRow], arch: Architecture) -> BTreeMap<(u64, u64), Vec<&SummaryRow>> {
    // Keyed by (ordered length, bits) so iteration follows numeric length.
    let mut out: BTreeMap<(u64, u64), Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.architecture == arch) {
        let ordered = (r.length_km * 1e6).round() as u64;
        out.entry((ordered, lkey(r.length_km))).or_default().push(r);
    }
    for v in out.values_mut() {
        v.sort_by_key(|r| r.m);
    }
    out
}

fn series_for(rows: &[SummaryRow], kind: PlotKind) -> Result<Vec<Series>, PlotError> {
    if rows.is_empty() {
        return Err(PlotError::Empty);
    }
    let mut out = Vec::new();
    match kind {
        PlotKind::Rate => {
            for arch in [Architecture::Router, Architecture::Routerless] {
                for group in by_length(rows, arch).values() {
                    out.push(Series {
                        label: format!("{} L={} km", arch, group[0].length_km),
                        points: group
                            .iter()
                            .map(|r| Point {
                                x: r.m as f64,
                                y: r.rate_hz_mean,
                                err: r.rate_hz_sem,
                            })
                            .collect(),
                        dashed: arch == Architecture::Routerless,
                    });
                }
            }
        }
        PlotKind::Infidelity => {
            let groups = by_length(rows, Architecture::Router);
            if groups.is_empty() {
                return Err(PlotError::NoRouterRows);
            }
            for group in groups.values() {
                let pts: Vec<Point> = group
                    .iter()
                    .map(|r| Point {
                        x: r.m as f64,
                        y: r.infidelity_mean,
                        err: r.fidelity_sem,
                    })
                    .collect();
                let last = pts.last().expect("groups are nonempty").y;
                let (x0, x1) = (pts[0].x, pts[pts.len() - 1].x);
                out.push(Series {
                    label: format!("router L={} km", group[0].length_km),
                    points: pts,
                    dashed: false,
                });
                out.push(Series {
                    label: format!("plateau L={} km", group[0].length_km),
                    points: vec![
                        Point {
                            x: x0,
                            y: last,
                            err: 0.0,
                        },
                        Point {
                            x: x1,
                            y: last,
                            err: 0.0,
                        },
                    ],
                    dashed: true,
                });
            }
        }
        PlotKind::Ratio => {
            let routers = by_length(rows, Architecture::Router);
            let plain = by_length(rows, Architecture::Routerless);
            for (key, group) in &routers {
                let others = plain.get(key);
                let mut pts = Vec::new();
                for r in group {
                    let o = others.and_then(|g| g.iter().find(|o| o.m == r.m)).ok_or(
                        PlotError::MissingPair {
                            m: r.m,
                            length_km: r.length_km,
                            missing: Architecture::Routerless,
                        },
                    )?;
                    if o.infidelity_mean == 0.0 {
                        return Err(PlotError::ZeroDenominator {
                            m: r.m,
                            length_km: r.length_km,
                        });
                    }
                    let y = r.infidelity_mean / o.infidelity_mean;
                    let rel = |sem: f64, v: f64| if v != 0.0 { sem / v } else { 0.0 };
                    let err = y.abs()
                        * rel(r.fidelity_sem, r.infidelity_mean)
                            .hypot(rel(o.fidelity_sem, o.infidelity_mean));
                    pts.push(Point {
                        x: r.m as f64,
                        y,
                        err,
                    });
                }
                out.push(Series {
                    label: format!("L={} km", group[0].length_km),
                    points: pts,
                    dashed: false,
                });
            }
            for (key, group) in &plain {
                if let Some(r) = group.iter().find(|o| {
                    routers
                        .get(key)
                        .is_none_or(|g| !g.iter().any(|r| r.m == o.m))
                }) {
                    return Err(PlotError::MissingPair {
                        m: r.m,
                        length_km: r.length_km,
                        missing: Architecture::Router,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Tick positions covering `[lo, hi]` at a 1-2-5 step.
fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|k| k * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|i| i as f64 * step).collect()
}

fn title(kind: PlotKind) -> (&'static str, &'static str) {
    match kind {
        PlotKind::Rate => ("Entanglement rate against m", "rate (Hz)"),
        PlotKind::Infidelity => ("Router infidelity against m", "infidelity"),
        PlotKind::Ratio => ("Infidelity ratio router / routerless", "infidelity ratio"),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders `rows` as an SVG document. Output depends only on the rows.
pub fn render_svg(rows: &[SummaryRow], kind: PlotKind) -> Result<String, PlotError> {
    let series = series_for(rows, kind)?;
    let all: Vec<&Point> = series.iter().flat_map(|s| &s.points).collect();
    let xs: Vec<f64> = all.iter().map(|p| p.x.max(1.0).log2()).collect();
    let (mut x_lo, mut x_hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    if x_hi - x_lo < 1e-9 {
        x_lo -= 1.0;
        x_hi += 1.0;
    }
    let mut y_lo = all
        .iter()
        .map(|p| p.y - p.err)
        .fold(f64::INFINITY, f64::min)
        .min(0.0);
    let mut y_hi = all
        .iter()
        .map(|p| p.y + p.err)
        .fold(f64::NEG_INFINITY, f64::max);
    if y_hi.is_nan() || y_lo.is_nan() || y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    y_hi += 0.05 * (y_hi - y_lo);
    if y_lo < 0.0 {
        y_lo -= 0.05 * (y_hi - y_lo);
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |m: f64| LEFT + (m.max(1.0).log2() - x_lo) / (x_hi - x_lo) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph;

    let (heading, ylabel) = title(kind);
    let mut svg = String::new();
    let w = &mut svg;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(
        w,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();
    writeln!(
        w,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{heading}</text>"#,
        LEFT + pw / 2.0
    )
    .unwrap();
    writeln!(
        w,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    )
    .unwrap();

    let mut ms: Vec<u64> = all.iter().map(|p| p.x as u64).collect();
    ms.sort_unstable();
    ms.dedup();
    for m in ms {
        let x = sx(m as f64);
        writeln!(
            w,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            TOP + ph,
            TOP + ph + 5.0
        )
        .unwrap();
        writeln!(
            w,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{m}</text>"#,
            TOP + ph + 20.0
        )
        .unwrap();
    }
    for t in nice_ticks(y_lo, y_hi) {
        let y = sy(t);
        writeln!(
            w,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + pw
        )
        .unwrap();
        writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            fmt_num(t)
        )
        .unwrap();
    }
    writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">m (registers)</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    )
    .unwrap();
    writeln!(
        w,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{ylabel}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    )
    .unwrap();

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let path: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y)))
            .collect();
        if path.len() > 1 {
            writeln!(
                w,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                path.join(" ")
            )
            .unwrap();
        }
        if !(s.dashed && kind == PlotKind::Infidelity) {
            for p in &s.points {
                let (x, y) = (sx(p.x), sy(p.y));
                if p.err > 0.0 {
                    let (y0, y1) = (sy(p.y - p.err), sy(p.y + p.err));
                    writeln!(w, r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="{color}"/>"#).unwrap();
                    for yy in [y0, y1] {
                        writeln!(
                            w,
                            r#"<line x1="{:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="{color}"/>"#,
                            x - 4.0,
                            x + 4.0
                        )
                        .unwrap();
                    }
                }
                writeln!(
                    w,
                    r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/>"#
                )
                .unwrap();
            }
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        writeln!(
            w,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            lx + 24.0
        )
        .unwrap();
        writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 30.0,
            ly + 4.0,
            escape(&s.label)
        )
        .unwrap();
    }
    writeln!(w, "</svg>").unwrap();
    Ok(svg)
}
