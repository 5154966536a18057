use std::fmt::Write;

pub struct Series {
    pub name: String,
    /// Values in [0, 1], drawn as percentages.
    pub values: Vec<f64>,
}

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f",
];
const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 90.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn plot_height() -> f64 {
    HEIGHT - TOP - BOTTOM
}

fn y_of(v: f64) -> f64 {
    TOP + plot_height() * (1.0 - v.clamp(0.0, 1.0))
}

fn frame(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    for tick in 0..=5 {
        let v = tick as f64 / 5.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            WIDTH - RIGHT,
            LEFT - 6.0,
            y + 4.0,
            tick * 20
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">accuracy (%)</text>"#,
        TOP + plot_height() / 2.0,
        TOP + plot_height() / 2.0
    );
    s
}

fn legend(s: &mut String, series: &[Series]) {
    for (i, ser) in series.iter().enumerate() {
        let y = TOP + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 14.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            y,
            PALETTE[i % PALETTE.len()],
            x + 18.0,
            y + 10.0,
            escape(&ser.name)
        );
    }
}

/// Grouped vertical bars: one group per label, one bar per series.
pub fn bar_chart(title: &str, groups: &[String], series: Vec<Series>) -> String {
    let mut s = frame(title);
    let plot_w = WIDTH - LEFT - RIGHT;
    let group_w = plot_w / groups.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    for (g, label) in groups.iter().enumerate() {
        let gx = LEFT + group_w * g as f64 + group_w * 0.1;
        for (k, ser) in series.iter().enumerate() {
            let v = ser.values.get(g).copied().unwrap_or(0.0);
            let y = y_of(v);
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{y:.1}" width="{bar_w:.1}" height="{:.1}" fill="{}"><title>{} {}: {:.2}%</title></rect>"#,
                gx + bar_w * k as f64,
                TOP + plot_height() - y,
                PALETTE[k % PALETTE.len()],
                escape(&ser.name),
                escape(label),
                v * 100.0
            );
        }
        let cx = LEFT + group_w * (g as f64 + 0.5);
        let ly = TOP + plot_height() + 14.0;
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{ly:.1}" text-anchor="end" transform="rotate(-30 {cx:.1} {ly:.1})">{}</text>"#,
            escape(label)
        );
    }
    legend(&mut s, &series);
    s.push_str("</svg>\n");
    s
}

/// One polyline per series over the given x positions.
pub fn line_chart(title: &str, xs: &[usize], series: Vec<Series>) -> String {
    let mut s = frame(title);
    let plot_w = WIDTH - LEFT - RIGHT;
    let (lo, hi) = (
        xs.first().copied().unwrap_or(0) as f64,
        xs.last().copied().unwrap_or(1) as f64,
    );
    let x_of = |x: usize| {
        if hi > lo {
            LEFT + plot_w * (x as f64 - lo) / (hi - lo)
        } else {
            LEFT + plot_w / 2.0
        }
    };
    for &x in xs {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x}</text>"#,
            x_of(x),
            TOP + plot_height() + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">samples per class</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 30.0
    );
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = xs
            .iter()
            .zip(&ser.values)
            .map(|(&x, &v)| format!("{:.1},{:.1}", x_of(x), y_of(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        for (&x, &v) in xs.iter().zip(&ser.values) {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                x_of(x),
                y_of(v)
            );
        }
    }
    legend(&mut s, &series);
    s.push_str("</svg>\n");
    s
}
