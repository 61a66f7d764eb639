//! Hand-emitted SVG 1.1 figures: condition number against ln(lambda), with
//! optional digits-lost and acceleration panels side by side. No plotting
//! framework, no timestamps, fixed coordinate formatting; the same inputs
//! produce the same bytes.

use std::fmt::Write as _;

use ridgecond::condpath::ConditionPath;

/// Vertical penalty marker. The knee is drawn green, user-supplied and
/// selected penalties red.
pub struct VLine {
    pub lambda: f64,
    pub color: &'static str,
}

pub const KNEE_COLOR: &str = "green";
pub const MARK_COLOR: &str = "red";
const CURVE_COLOR: &str = "#2166ac";
const CLIP_MARKER_COLOR: &str = "#d6604d";

pub struct PlotSpec<'a> {
    pub title: &'a str,
    pub width: u32,
    pub height: u32,
    pub y_clip: Option<f64>,
    pub aids: bool,
}

struct Rect {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

fn esc(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick label: plain decimal in a friendly range, scientific outside it.
fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:.1e}");
    }
    let text = format!("{v:.2}");
    let trimmed = text.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}

fn push_text(out: &mut String, x: f64, y: f64, anchor: &str, size: u32, extra: &str, text: &str) {
    let _ = writeln!(
        out,
        r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-family="sans-serif" font-size="{size}"{extra}>{}</text>"#,
        esc(text)
    );
}

/// One panel: axes, ticks, a polyline through the available points,
/// markers for clipped values, and the vertical penalty lines.
#[allow(clippy::too_many_arguments)]
fn draw_panel(
    out: &mut String,
    rect: &Rect,
    xs: &[f64],
    points: &[(f64, f64)],
    clipped: &[(f64, f64)],
    y_range: (f64, f64),
    y_label: &str,
    vlines: &[VLine],
) {
    let (x_min, x_max) = (xs[0], xs[xs.len() - 1]);
    let x_span = (x_max - x_min).max(f64::MIN_POSITIVE);
    let (y_min, y_max) = y_range;
    let y_span = (y_max - y_min).max(f64::MIN_POSITIVE);
    let to_px = |x: f64| rect.x + (x - x_min) / x_span * rect.w;
    let to_py = |y: f64| rect.y + rect.h - (y - y_min) / y_span * rect.h;

    // Frame.
    let _ = writeln!(
        out,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black" stroke-width="1"/>"#,
        rect.x, rect.y, rect.w, rect.h
    );

    // Ticks and labels.
    for i in 0..=4 {
        let fx = x_min + x_span * f64::from(i) / 4.0;
        let px = to_px(fx);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black" stroke-width="1"/>"#,
            rect.y + rect.h,
            rect.y + rect.h + 4.0
        );
        push_text(out, px, rect.y + rect.h + 16.0, "middle", 11, "", &fmt_tick(fx));

        let fy = y_min + y_span * f64::from(i) / 4.0;
        let py = to_py(fy);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="black" stroke-width="1"/>"#,
            rect.x - 4.0,
            rect.x
        );
        push_text(out, rect.x - 6.0, py + 3.5, "end", 11, "", &fmt_tick(fy));
    }
    push_text(
        out,
        rect.x + rect.w / 2.0,
        rect.y + rect.h + 30.0,
        "middle",
        11,
        "",
        "ln(lambda)",
    );
    let label_x = rect.x - 44.0;
    let label_y = rect.y + rect.h / 2.0;
    push_text(
        out,
        label_x,
        label_y,
        "middle",
        11,
        &format!(r#" transform="rotate(-90 {label_x:.2} {label_y:.2})""#),
        y_label,
    );

    // Penalty markers run the full panel height.
    for vline in vlines {
        let px = to_px(vline.lambda.ln());
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{}" stroke-width="1.5"/>"#,
            rect.y,
            rect.y + rect.h,
            vline.color
        );
    }

    if !points.is_empty() {
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", to_px(x), to_py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{CURVE_COLOR}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
    }
    for &(x, y) in clipped {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{CLIP_MARKER_COLOR}"/>"#,
            to_px(x),
            to_py(y)
        );
    }
}

/// Renders the figure: one condition panel, or three panels (condition,
/// digits lost, acceleration) side by side when `aids` is set.
pub fn render(path: &ConditionPath, spec: &PlotSpec, vlines: &[VLine]) -> String {
    let xs: Vec<f64> = path.grid.values().iter().map(|l| l.ln()).collect();

    // Condition panel data: finite values on the curve, infinities as
    // markers clipped at the ceiling.
    let finite_max = path
        .cond
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let fallback = if finite_max > 0.0 { 10.0 * finite_max } else { 1.0 };
    let clip_at = spec.y_clip.unwrap_or(fallback);
    let cond_points: Vec<(f64, f64)> = xs
        .iter()
        .zip(&path.cond)
        .filter(|(_, c)| c.is_finite())
        .map(|(&x, &c)| (x, c))
        .collect();
    let cond_clipped: Vec<(f64, f64)> = xs
        .iter()
        .zip(&path.cond)
        .filter(|(_, c)| c.is_infinite())
        .map(|(&x, _)| (x, clip_at))
        .collect();
    let cond_top = if cond_clipped.is_empty() {
        if finite_max > 0.0 { finite_max } else { 1.0 }
    } else {
        clip_at.max(finite_max)
    };

    let digits_points: Vec<(f64, f64)> = match &path.digits_lost {
        Some(digits) => xs
            .iter()
            .zip(digits)
            .filter_map(|(&x, d)| d.map(|d| (x, f64::from(d))))
            .collect(),
        None => Vec::new(),
    };
    let digits_top = digits_points.iter().map(|p| p.1).fold(1.0, f64::max);

    let accel_points: Vec<(f64, f64)> = match &path.acceleration {
        Some(acc) => acc
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.map(|a| (xs[i + 1], a)))
            .collect(),
        None => Vec::new(),
    };
    let accel_lo = accel_points.iter().map(|p| p.1).fold(0.0, f64::min);
    let accel_hi = accel_points.iter().map(|p| p.1).fold(0.0, f64::max);
    let accel_range = if accel_lo == accel_hi {
        (accel_lo - 1.0, accel_hi + 1.0)
    } else {
        (accel_lo, accel_hi)
    };

    let width = f64::from(spec.width);
    let height = f64::from(spec.height);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#,
        spec.width, spec.height
    );
    push_text(
        &mut out,
        width / 2.0,
        20.0,
        "middle",
        14,
        "",
        spec.title,
    );

    let panels: Vec<(&str, Vec<(f64, f64)>, Vec<(f64, f64)>, (f64, f64))> = if spec.aids {
        vec![
            ("condition number", cond_points, cond_clipped, (0.0, cond_top)),
            ("digits lost", digits_points, Vec::new(), (0.0, digits_top)),
            ("acceleration", accel_points, Vec::new(), accel_range),
        ]
    } else {
        vec![("condition number", cond_points, cond_clipped, (0.0, cond_top))]
    };

    let count = panels.len() as f64;
    let slot = width / count;
    for (i, (label, points, clipped, y_range)) in panels.into_iter().enumerate() {
        let rect = Rect {
            x: slot * i as f64 + 62.0,
            y: 38.0,
            w: slot - 78.0,
            h: height - 90.0,
        };
        draw_panel(&mut out, &rect, &xs, &points, &clipped, y_range, label, vlines);
    }
    out.push_str("</svg>\n");
    out
}
