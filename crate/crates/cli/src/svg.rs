//! Minimal SVG writers. Each plot is a pure function of the rows handed to it.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 640.0;
const MARGIN: f64 = 70.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub dashed: bool,
    pub points: &'a [[f64; 2]],
}

/// Round `x` to 1, 2 or 5 times a power of ten.
fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let n = if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    };
    n * mag
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Overlay of planar paths on equal axes, as used for `<m1>` versus `<m2>` plots.
pub fn trajectory_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let finite = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|p| p[0].is_finite() && p[1].is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in finite {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
    }
    // Equal scale on both axes so that drift directions read off correctly.
    let span = (x1 - x0).max(y1 - y0).max(1e-9) * 1.1;
    let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let (x0, x1, y0, y1) = (
        cx - 0.5 * span,
        cx + 0.5 * span,
        cy - 0.5 * span,
        cy + 0.5 * span,
    );
    let plot = WIDTH - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - x0) / span * plot;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / span * plot;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="30" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot}" height="{plot}" fill="none" stroke="black"/>"#
    );
    let step = nice_step(span, 6);
    let mut tick = (x0 / step).ceil() * step;
    while tick <= x1 {
        let x = sx(tick);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{MARGIN}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            HEIGHT - MARGIN,
            HEIGHT - MARGIN + 18.0,
            tick_label(tick, step)
        );
        tick += step;
    }
    let mut tick = (y0 / step).ceil() * step;
    while tick <= y1 {
        let y = sy(tick);
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            WIDTH - MARGIN,
            MARGIN - 6.0,
            y + 4.0,
            tick_label(tick, step)
        );
        tick += step;
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 25.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let mut path = String::new();
        let mut pen_down = false;
        for p in s.points {
            if !(p[0].is_finite() && p[1].is_finite()) {
                pen_down = false;
                continue;
            }
            let _ = write!(
                path,
                "{}{:.2},{:.2} ",
                if pen_down { "L" } else { "M" },
                sx(p[0]),
                sy(p[1])
            );
            pen_down = true;
        }
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
            path.trim_end(),
            s.color
        );
        let ly = MARGIN + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            MARGIN + 10.0,
            MARGIN + 34.0,
            s.color,
            MARGIN + 40.0,
            ly + 4.0,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn tick_label(v: f64, step: f64) -> String {
    let digits = (-step.log10().floor()).max(0.0) as usize;
    let v = if v.abs() < 0.5 * step { 0.0 } else { v };
    format!("{v:.digits$}")
}

/// Colour between dark blue (`t = 0`) and yellow (`t = 1`).
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(40.0, 250.0),
        lerp(30.0, 225.0),
        lerp(110.0, 40.0)
    )
}

/// Sites of the 120° lattice coloured by `value`; sites with `None` are left blank.
pub fn lattice_map(title: &str, cells: &[((i32, i32), Option<f64>)]) -> String {
    let values: Vec<f64> = cells
        .iter()
        .filter_map(|c| c.1)
        .filter(|v| v.is_finite())
        .collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = if hi > lo { hi - lo } else { 1.0 };
    let cart = |(m1, m2): (i32, i32)| {
        let (a, b) = (f64::from(m1), f64::from(m2));
        [a - 0.5 * b, 0.75f64.sqrt() * b]
    };
    let reach = cells
        .iter()
        .map(|c| {
            let p = cart(c.0);
            p[0].abs().max(p[1].abs())
        })
        .fold(1.0, f64::max)
        + 0.7;
    let plot = WIDTH - 2.0 * MARGIN;
    let scale = plot / (2.0 * reach);
    let (cx, cy) = (WIDTH / 2.0, HEIGHT / 2.0);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="30" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    for &(m, v) in cells {
        let p = cart(m);
        let (x, y) = (cx + p[0] * scale, cy - p[1] * scale);
        let fill = match v {
            Some(v) if v.is_finite() => ramp((v - lo) / range),
            _ => "none".to_string(),
        };
        let _ = writeln!(
            out,
            r##"<circle cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="{fill}" stroke="#888"/>"##,
            0.45 * scale
        );
        if let Some(v) = v.filter(|v| v.is_finite()) {
            let _ = writeln!(
                out,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v:.2}</text>"#,
                y + 3.0
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">colour: {lo:.2} (dark) to {hi:.2} (light)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 25.0
    );
    out.push_str("</svg>\n");
    out
}
