//! Minimal SVG charts written next to the CSV outputs.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

pub struct Series<'a> {
    pub label: String,
    pub points: &'a [(f64, f64)],
}

pub struct Bars<'a> {
    /// `(left edge, right edge, height)`.
    pub bins: &'a [(f64, f64, f64)],
}

struct Frame {
    x_max: f64,
    y_max: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + x / self.x_max * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - y / self.y_max * (HEIGHT - 2.0 * MARGIN)
    }
}

pub fn chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    bars: Option<Bars<'_>>,
    lines: &[Series<'_>],
) -> String {
    let mut x_max = f64::MIN_POSITIVE;
    let mut y_max = f64::MIN_POSITIVE;
    if let Some(b) = &bars {
        for &(_, hi, h) in b.bins {
            x_max = x_max.max(hi);
            y_max = y_max.max(h);
        }
    }
    for s in lines {
        for &(x, y) in s.points {
            if x.is_finite() && y.is_finite() {
                x_max = x_max.max(x);
                y_max = y_max.max(y);
            }
        }
    }
    let f = Frame {
        x_max,
        y_max: y_max * 1.05,
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, y0) = (f.px(0.0), f.py(0.0));
    let _ = writeln!(
        out,
        r#"<path d="M{x0:.1},{:.1} L{x0:.1},{y0:.1} L{:.1},{y0:.1}" stroke="black" fill="none"/>"#,
        MARGIN,
        WIDTH - MARGIN
    );
    for i in 0..=4 {
        let xv = x_max * i as f64 / 4.0;
        let yv = f.y_max * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            f.px(xv),
            y0 + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            f.py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    if let Some(b) = bars {
        for &(lo, hi, h) in b.bins {
            let _ = writeln!(
                out,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#aec7e8" stroke="#6b8fb5" stroke-width="0.5"/>"##,
                f.px(lo),
                f.py(h),
                (f.px(hi) - f.px(lo)).max(0.0),
                (y0 - f.py(h)).max(0.0)
            );
        }
    }
    for (i, s) in lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for (j, &(x, y)) in s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .enumerate()
        {
            let _ = write!(
                d,
                "{}{:.2},{:.2} ",
                if j == 0 { "M" } else { "L" },
                f.px(x),
                f.py(y)
            );
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#,
            d.trim_end()
        );
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{ly:.1}" fill="{color}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
