//! Minimal SVG line plot of an envelope.

use std::fmt::Write;

use enf_core::envelopes::Envelope;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 40.0;

fn polyline(out: &mut String, id: &str, style: &str, xs: &[f64], ys: &[f64], sx: impl Fn(f64) -> f64, sy: impl Fn(f64) -> f64) {
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| y.is_finite())
        .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
        .collect();
    let _ = writeln!(out, r#"<polyline id="{id}" fill="none" {style} points="{}"/>"#, pts.join(" "));
}

/// Band limits, observed curve and the zero line, in that order.
pub fn render(env: &Envelope, title: &str) -> String {
    let xs = &env.grid;
    let (x0, x1) = (xs[0], *xs.last().unwrap());
    let mut vals: Vec<f64> = env.lo.iter().chain(&env.hi).copied().collect();
    if let Some(o) = &env.observed {
        vals.extend(o);
    }
    vals.push(0.0);
    let y0 = vals.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    let y1 = vals.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let xspan = if x1 > x0 { x1 - x0 } else { 1.0 };
    let yspan = if y1 > y0 { y1 - y0 } else { 1.0 };
    let sx = |x: f64| PAD + (x - x0) / xspan * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / yspan * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<title>{title}</title>"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    polyline(&mut s, "lo", r#"stroke="gray" stroke-width="1.5""#, xs, &env.lo, sx, sy);
    polyline(&mut s, "hi", r#"stroke="gray" stroke-width="1.5""#, xs, &env.hi, sx, sy);
    let obs = env.observed.clone().unwrap_or_default();
    polyline(&mut s, "observed", r#"stroke="black" stroke-width="2""#, &xs[..obs.len()], &obs, sx, sy);
    polyline(
        &mut s,
        "zero",
        r#"stroke="black" stroke-dasharray="4 3""#,
        &[x0, x1],
        &[0.0, 0.0],
        sx,
        sy,
    );
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="20" font-family="sans-serif" font-size="13">{title} (alpha = {})</text>"#,
        env.alpha
    );
    s.push_str("</svg>\n");
    s
}
