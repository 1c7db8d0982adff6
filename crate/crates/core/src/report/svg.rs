use std::fmt::Write;

use crate::error::{Error, Result};
use crate::po::{AceEstimate, BalanceRow, Comparison};

const WIDTH: f64 = 640.0;
const LEFT: f64 = 170.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 48.0;
const ROW: f64 = 24.0;
const AXIS_GAP: f64 = 16.0;
const BOTTOM: f64 = 56.0;

const STYLE: &str = "text{font-family:sans-serif;font-size:12px}\
.title{font-size:14px;font-weight:bold}\
.axis,.tick{stroke:#333;stroke-width:1}\
.guide{stroke:#ddd;stroke-width:1}\
.threshold{stroke:#c00;stroke-width:1}\
.reference{stroke:#c00;stroke-width:1}\
.marker.before,.legend-marker.before{fill:none;stroke:#1f77b4;stroke-width:1.5}\
.marker.after,.legend-marker.after{fill:#ff7f0e;stroke:#ff7f0e}\
.interval{stroke:#1f77b4;stroke-width:2}\
.interval.crosses-one{stroke:#999;stroke-width:2;stroke-opacity:0.8}\
.point{fill:#1f77b4}\
.point.crosses-one{fill:#999}\
.group-label{font-weight:bold}";

/// Formats `x` with at most six significant digits and no exponent, so the
/// same value always yields the same text.
pub fn fmt6(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = 5 - x.abs().log10().floor() as i32;
    let s = if digits > 0 {
        let s = format!("{:.*}", digits as usize, x);
        let s = s.trim_end_matches('0');
        s.trim_end_matches('.').to_string()
    } else {
        let scale = 10f64.powi(-digits);
        format!("{:.0}", (x / scale).round() * scale)
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn open(out: &mut String, height: f64) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<style>{STYLE}</style>\n",
        w = fmt6(WIDTH),
        h = fmt6(height)
    );
}

fn line(out: &mut String, class: &str, x1: f64, y1: f64, x2: f64, y2: f64, extra: &str) {
    let _ = writeln!(
        out,
        "<line class=\"{class}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"{extra}/>",
        fmt6(x1),
        fmt6(y1),
        fmt6(x2),
        fmt6(y2)
    );
}

fn text(out: &mut String, class: &str, x: f64, y: f64, anchor: &str, body: &str) {
    let _ = writeln!(
        out,
        "<text class=\"{class}\" x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\">{}</text>",
        fmt6(x),
        fmt6(y),
        escape(body)
    );
}

fn circle(out: &mut String, class: &str, cx: f64, cy: f64, r: f64, extra: &str) {
    let _ = writeln!(
        out,
        "<circle class=\"{class}\" cx=\"{}\" cy=\"{}\" r=\"{}\"{extra}/>",
        fmt6(cx),
        fmt6(cy),
        fmt6(r)
    );
}

/// Horizontal axis from `lo` to `hi` with `ticks` labelled marks.
fn axis(out: &mut String, y: f64, lo: f64, hi: f64, ticks: &[f64], label: &str) {
    let plot = WIDTH - LEFT - RIGHT;
    line(out, "axis", LEFT, y, WIDTH - RIGHT, y, "");
    for &t in ticks {
        let x = LEFT + (t - lo) / (hi - lo) * plot;
        line(out, "tick", x, y, x, y + 5.0, "");
        text(out, "tick-label", x, y + 18.0, "middle", &fmt6(t));
    }
    text(out, "axis-label", LEFT + plot / 2.0, y + 36.0, "middle", label);
}

/// Before/after permutation p-values per covariate on a `[0, 1]` axis, with
/// a dashed cutoff line at `threshold`.
pub fn render_balance_svg(rows: &[BalanceRow], title: &str, threshold: f64) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Invalid("balance table is empty".into()));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Invalid(format!("threshold {threshold} is not a p-value")));
    }
    let plot = WIDTH - LEFT - RIGHT;
    let x_of = |p: f64| LEFT + p.clamp(0.0, 1.0) * plot;
    let body = rows.len() as f64 * ROW;
    let y_axis = TOP + body + AXIS_GAP;
    let height = y_axis + BOTTOM;
    let mut out = String::new();
    open(&mut out, height);
    text(&mut out, "title", WIDTH / 2.0, 20.0, "middle", title);
    circle(&mut out, "legend-marker before", LEFT, 34.0, 4.0, "");
    text(&mut out, "legend", LEFT + 8.0, 38.0, "start", "unweighted");
    circle(&mut out, "legend-marker after", LEFT + 100.0, 34.0, 4.0, "");
    text(&mut out, "legend", LEFT + 108.0, 38.0, "start", "weighted");
    for (i, r) in rows.iter().enumerate() {
        let y = TOP + (i as f64 + 0.5) * ROW;
        line(&mut out, "guide", LEFT, y, WIDTH - RIGHT, y, "");
        text(&mut out, "row-label", LEFT - 8.0, y + 4.0, "end", &r.covariate);
        circle(&mut out, "marker before", x_of(r.p_before), y, 4.0, "");
        circle(&mut out, "marker after", x_of(r.p_after), y, 4.0, "");
    }
    let xt = x_of(threshold);
    line(&mut out, "threshold", xt, TOP, xt, TOP + body, " stroke-dasharray=\"4 3\"");
    let ticks = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    axis(&mut out, y_axis, 0.0, 1.0, &ticks, "permutation p-value of the KS statistic");
    out.push_str("</svg>\n");
    Ok(out)
}

/// Round tick positions covering `[lo, hi]`.
fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        // Snap to the step grid so formatting does not expose rounding noise.
        out.push((t / step).round() * step);
        t += step;
    }
    out
}

/// One interval and point per estimate, grouped by comparison, against a
/// reference line at a risk ratio of 1. Intervals that include 1 carry the
/// `crosses-one` class.
pub fn render_ci_overlap_svg(estimates: &[AceEstimate]) -> Result<String> {
    if estimates.is_empty() {
        return Err(Error::Invalid("no estimates to plot".into()));
    }
    let mut groups: Vec<(&Comparison, Vec<&AceEstimate>)> = Vec::new();
    for e in estimates {
        match groups.iter_mut().find(|(c, _)| **c == e.comparison) {
            Some((_, list)) => list.push(e),
            None => groups.push((&e.comparison, vec![e])),
        }
    }
    let finite = estimates
        .iter()
        .flat_map(|e| [e.lower, e.point, e.upper])
        .filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((1.0f64, 1.0f64), |(a, b), v| (a.min(v), b.max(v)));
    let pad = 0.05 * (hi - lo).max(1e-9);
    lo = (lo - pad).max(if lo >= 0.0 { 0.0 } else { f64::NEG_INFINITY });
    hi += pad;
    if hi - lo < 1e-9 {
        lo -= 0.5;
        hi += 0.5;
    }
    let plot = WIDTH - LEFT - RIGHT;
    let x_of = |v: f64| {
        let v = if v.is_nan() { 1.0 } else { v.clamp(lo, hi) };
        LEFT + (v - lo) / (hi - lo) * plot
    };
    let n_rows: usize = groups.iter().map(|(_, l)| l.len() + 1).sum();
    let body = n_rows as f64 * ROW;
    let y_axis = TOP + body + AXIS_GAP;
    let height = y_axis + BOTTOM;
    let mut out = String::new();
    open(&mut out, height);
    text(&mut out, "title", WIDTH / 2.0, 20.0, "middle", "Average causal effect (risk ratio) by method");
    let x1 = x_of(1.0);
    line(&mut out, "reference", x1, TOP, x1, TOP + body, "");
    let mut row = 0usize;
    for (comparison, list) in &groups {
        let y = TOP + (row as f64 + 0.5) * ROW;
        text(&mut out, "group-label", 8.0, y + 4.0, "start", &comparison.label());
        row += 1;
        for e in list {
            let y = TOP + (row as f64 + 0.5) * ROW;
            let class = if e.crosses_one() { " crosses-one" } else { "" };
            let data = format!(
                " data-comparison=\"{}\" data-method=\"{}\"",
                escape(&comparison.label()),
                e.method
            );
            text(&mut out, "method-label", LEFT - 8.0, y + 4.0, "end", e.method.as_str());
            line(&mut out, &format!("interval{class}"), x_of(e.lower), y, x_of(e.upper), y, &data);
            circle(&mut out, &format!("point{class}"), x_of(e.point), y, 4.0, &data);
            row += 1;
        }
    }
    axis(&mut out, y_axis, lo, hi, &nice_ticks(lo, hi), "risk ratio");
    out.push_str("</svg>\n");
    Ok(out)
}
