//! Minimal SVG scatter of paired FIT scores with the bisector line.

use crate::experiments::ExperimentOutput;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 60.0;

/// Square FIT-vs-FIT scatter; one marker style per group, points clipped to
/// the plotting range, bisector drawn corner to corner.
pub fn scatter_svg(outputs: &[ExperimentOutput]) -> String {
    let lo = -100.0_f64;
    let hi = 100.0_f64;
    let to_px = |v: f64| {
        let clamped = v.clamp(lo, hi);
        MARGIN + (clamped - lo) / (hi - lo) * (SIZE - 2.0 * MARGIN)
    };
    let to_py = |v: f64| SIZE - to_px(v) + 0.0;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    ));
    s.push_str(&format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        SIZE - 2.0 * MARGIN,
        SIZE - 2.0 * MARGIN
    ));
    // bisector
    s.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        to_px(lo),
        to_py(lo),
        to_px(hi),
        to_py(hi)
    ));

    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];
    let mut legend_y = MARGIN + 14.0;
    for (gi, out) in outputs.iter().enumerate() {
        let (mx, my) = out.scatter;
        let color = colors[gi % colors.len()];
        for r in &out.records {
            let fx = r.outcomes.iter().find(|o| o.method == mx).and_then(|o| o.fit);
            let fy = r.outcomes.iter().find(|o| o.method == my).and_then(|o| o.fit);
            if let (Some(fx), Some(fy)) = (fx, fy) {
                s.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.6\"/>\n",
                    to_px(fx),
                    to_py(fy),
                    color
                ));
            }
        }
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{legend_y}\" font-size=\"13\" fill=\"{color}\">{} ({} vs {})</text>\n",
            MARGIN + 8.0,
            out.config_label,
            mx.label(),
            my.label()
        ));
        legend_y += 16.0;
    }

    let (x_label, y_label) = outputs
        .first()
        .map(|o| {
            let (mx, my) = o.scatter;
            (format!("FIT {}", mx.label()), format!("FIT {}", my.label()))
        })
        .unwrap_or_else(|| ("FIT".into(), "FIT".into()));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">{x_label}</text>\n",
        SIZE / 2.0,
        SIZE - 18.0
    ));
    s.push_str(&format!(
        "<text x=\"18\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{y_label}</text>\n",
        SIZE / 2.0,
        SIZE / 2.0
    ));
    for v in [-100.0, -50.0, 0.0, 50.0, 100.0] {
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{v}</text>\n",
            to_px(v),
            SIZE - MARGIN + 16.0
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{v}</text>\n",
            MARGIN - 6.0,
            to_py(v) + 4.0
        ));
    }
    s.push_str("</svg>\n");
    s
}
