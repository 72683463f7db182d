//! Minimal SVG overlays: histograms and empirical distribution functions of
//! sample columns, with optional limit-law curves, and a log-log scatter for
//! survival curves.

use std::fmt::Write;

use conewalk::stats::experiments::ExperimentOutput;

const COLOURS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
const W: f64 = 380.0;
const H: f64 = 240.0;
const PAD: f64 = 44.0;
const BINS: usize = 40;

pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

pub struct Curve {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
    pub curves: Vec<Curve>,
}

/// Panels for every sample column, pairing `X` with `reference_X` and with
/// any curve tabulated for `X`.
pub fn panels(out: &ExperimentOutput) -> Vec<Panel> {
    let weights = out
        .columns
        .iter()
        .find(|c| c.name == "reference_weight")
        .map(|c| c.values.clone());
    let mut panels = Vec::new();
    for col in &out.columns {
        if col.name.starts_with("reference_") {
            continue;
        }
        let mut series = vec![Series {
            label: col.name.clone(),
            values: col.values.clone(),
            weights: None,
        }];
        let ref_name = format!("reference_{}", col.name);
        if let Some(r) = out.columns.iter().find(|c| c.name == ref_name) {
            let w = weights.clone().filter(|w| w.len() == r.values.len());
            series.push(Series {
                label: ref_name,
                values: r.values.clone(),
                weights: w,
            });
        }
        let curves = out
            .curves
            .iter()
            .filter(|c| c.column == col.name)
            .map(|c| Curve {
                label: c.label.clone(),
                x: c.x.clone(),
                y: c.cdf.clone(),
            })
            .collect();
        panels.push(Panel {
            title: col.name.clone(),
            series,
            curves,
        });
    }
    panels
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    y0: f64,
    lo: f64,
    hi: f64,
    top: f64,
}

impl Frame {
    fn px(&self, v: f64) -> f64 {
        self.x0 + PAD + (v - self.lo) / (self.hi - self.lo) * (W - 2.0 * PAD)
    }

    fn py(&self, v: f64) -> f64 {
        self.y0 + H - PAD + -(v / self.top) * (H - 2.0 * PAD)
    }

    fn axes(&self, s: &mut String, title: &str) {
        let (l, r) = (self.x0 + PAD, self.x0 + W - PAD);
        let (t, b) = (self.y0 + PAD, self.y0 + H - PAD);
        let _ = writeln!(
            s,
            r##"<rect x="{l:.1}" y="{t:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
            r - l,
            b - t
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
            (l + r) / 2.0,
            t - 8.0,
            esc(title)
        );
        for (v, anchor, x) in [(self.lo, "start", l), (self.hi, "end", r)] {
            let _ = writeln!(
                s,
                r#"<text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="{anchor}">{v:.3}</text>"#,
                b + 14.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{:.3}</text>"#,
            l - 4.0,
            t + 4.0,
            self.top
        );
    }
}

fn range(panel: &Panel) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in panel.series.iter().flat_map(|s| s.values.iter()) {
        if v.is_finite() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    (lo, hi)
}

fn histogram(s: &Series, lo: f64, hi: f64) -> Vec<f64> {
    let mut h = vec![0.0; BINS];
    let width = (hi - lo) / BINS as f64;
    let mut total = 0.0;
    for (i, &v) in s.values.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        let w = s.weights.as_ref().map_or(1.0, |w| w[i]);
        let b = (((v - lo) / width) as usize).min(BINS - 1);
        h[b] += w;
        total += w;
    }
    if total > 0.0 {
        for x in &mut h {
            *x /= total * width;
        }
    }
    h
}

fn ecdf(s: &Series) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = s
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(i, &v)| (v, s.weights.as_ref().map_or(1.0, |w| w[i])))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pts.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    // Thin to at most ~400 vertices; the plot cannot show more.
    let stride = (pts.len() / 400).max(1);
    let mut out = Vec::new();
    for (i, (v, w)) in pts.iter().enumerate() {
        acc += w;
        if i % stride == 0 || i + 1 == pts.len() {
            out.push((*v, acc / total));
        }
    }
    out
}

fn polyline(s: &mut String, pts: impl Iterator<Item = (f64, f64)>, colour: &str, dash: bool) {
    let coords: Vec<String> = pts.map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
    let extra = if dash {
        r#" stroke-dasharray="5,3""#
    } else {
        ""
    };
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="{colour}" stroke-width="1.4"{extra} points="{}"/>"#,
        coords.join(" ")
    );
}

fn legend(s: &mut String, x: f64, y: f64, items: &[(String, &str)]) {
    for (i, (label, colour)) in items.iter().enumerate() {
        let yy = y + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="3" fill="{colour}"/>"#,
            yy - 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{yy:.1}" font-size="10">{}</text>"#,
            x + 14.0,
            esc(label)
        );
    }
}

fn draw_panel(s: &mut String, panel: &Panel, y0: f64) {
    let (lo, hi) = range(panel);
    let hists: Vec<Vec<f64>> = panel.series.iter().map(|x| histogram(x, lo, hi)).collect();
    let top = hists
        .iter()
        .flatten()
        .copied()
        .fold(0.0, f64::max)
        .max(1e-12)
        * 1.05;
    let f = Frame {
        x0: 0.0,
        y0,
        lo,
        hi,
        top,
    };
    f.axes(s, &format!("{} histogram", panel.title));
    let width = (hi - lo) / BINS as f64;
    let mut items = Vec::new();
    for (k, h) in hists.iter().enumerate() {
        let c = COLOURS[k % COLOURS.len()];
        let pts = h.iter().enumerate().flat_map(|(b, &v)| {
            let a = lo + b as f64 * width;
            [(f.px(a), f.py(v)), (f.px(a + width), f.py(v))]
        });
        polyline(s, pts, c, false);
        items.push((panel.series[k].label.clone(), c));
    }
    legend(s, W - 150.0, y0 + PAD + 12.0, &items);

    let g = Frame {
        x0: W,
        y0,
        lo,
        hi,
        top: 1.0,
    };
    g.axes(s, &format!("{} distribution function", panel.title));
    let mut items = Vec::new();
    for (k, series) in panel.series.iter().enumerate() {
        let c = COLOURS[k % COLOURS.len()];
        polyline(
            s,
            ecdf(series).into_iter().map(|(x, y)| (g.px(x), g.py(y))),
            c,
            false,
        );
        items.push((series.label.clone(), c));
    }
    for (k, curve) in panel.curves.iter().enumerate() {
        let c = COLOURS[(panel.series.len() + k) % COLOURS.len()];
        let pts = curve
            .x
            .iter()
            .zip(&curve.y)
            .filter(|(x, _)| **x >= lo && **x <= hi)
            .map(|(&x, &y)| (g.px(x), g.py(y)));
        polyline(s, pts, c, true);
        items.push((curve.label.clone(), c));
    }
    legend(
        s,
        2.0 * W - 150.0,
        y0 + H - PAD - 14.0 * items.len() as f64,
        &items,
    );
}

fn document(height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{height:.0}\" font-family=\"sans-serif\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n",
        2.0 * W
    )
}

pub fn overlay(panels: &[Panel]) -> String {
    let mut body = String::new();
    for (i, p) in panels.iter().enumerate() {
        draw_panel(&mut body, p, i as f64 * H);
    }
    document(H * panels.len().max(1) as f64, &body)
}

/// Log-log scatter of `(n, P)` with the fitted line `log P = a + b log n`.
pub fn loglog(n: &[f64], p: &[f64], slope: f64, intercept: f64) -> String {
    let pts: Vec<(f64, f64)> = n
        .iter()
        .zip(p)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let mut body = String::new();
    if pts.is_empty() {
        return document(H, &body);
    }
    let (xlo, xhi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
            (l.min(p.0), h.max(p.0))
        });
    let (ylo, yhi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
            (l.min(p.1), h.max(p.1))
        });
    let xhi = if xhi > xlo { xhi } else { xlo + 1.0 };
    let span = (yhi - ylo).max(1e-9);
    let f = Frame {
        x0: 0.0,
        y0: 0.0,
        lo: xlo,
        hi: xhi,
        top: 1.0,
    };
    let py = |y: f64| f.py((y - ylo) / span);
    f.axes(
        &mut body,
        &format!("log survival vs log n (slope {slope:.4})"),
    );
    for &(x, y) in &pts {
        let _ = writeln!(
            body,
            r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{}"/>"#,
            f.px(x),
            py(y),
            COLOURS[0]
        );
    }
    polyline(
        &mut body,
        [xlo, xhi]
            .into_iter()
            .map(|x| (f.px(x), py(intercept + slope * x))),
        COLOURS[1],
        true,
    );
    document(H, &body)
}
