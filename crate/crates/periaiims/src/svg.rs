//! Deterministic SVG renderers: attribution beeswarm summaries, correlation
//! heatmaps, and correlation network diagrams.
//!
//! Layout contract (kept stable for downstream diffing):
//! - beeswarm: one horizontal band per ranked feature, top rank first;
//!   x maps attribution values across the plot width with a vertical zero
//!   line; point fill interpolates blue (low feature value) to red (high);
//!   vertical jitter is a pure function of the sample index.
//! - heatmap: row-major cell grid in variable order, blue (-1) through
//!   white (0) to red (+1), the value printed in each cell.
//! - network: nodes equally spaced on a circle starting at 12 o'clock in
//!   variable order; solid edges for positive correlations, dotted for
//!   negative; stroke width scales with band strength.

use crate::explain::{FeatureImpact, ShapMatrix};
use crate::ingest::EncodedMatrix;
use crate::netcorr::{BandStrength, CorrMatrix, CorrelationNetwork};
use std::fmt::Write as _;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Blue -> white -> red map over t in [-1, 1].
fn diverging_color(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        let u = t;
        (255.0, 255.0 - 195.0 * u, 255.0 - 215.0 * u)
    } else {
        let u = -t;
        (255.0 - 195.0 * u, 255.0 - 135.0 * u, 255.0)
    };
    format!(
        "rgb({},{},{})",
        r.round() as u8,
        g.round() as u8,
        b.round() as u8
    )
}

/// Deterministic jitter in [-1, 1] from a sample index.
fn jitter(i: usize) -> f64 {
    let mut h = i as u64 ^ 0x9e37_79b9_7f4a_7c15;
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    (h % 2048) as f64 / 1023.5 - 1.0
}

/// Beeswarm-style attribution summary: one row per ranked feature, points
/// colored by the (per-feature min-max normalized) feature value.
pub fn beeswarm_svg(
    shap: &ShapMatrix,
    x: &EncodedMatrix,
    impacts: &[FeatureImpact],
    title: &str,
) -> String {
    let label_w = 220.0;
    let plot_w = 520.0;
    let row_h = 28.0;
    let top = 56.0;
    let height = top + row_h * impacts.len() as f64 + 40.0;
    let width = label_w + plot_w + 40.0;

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for imp in impacts {
        for row in &shap.phi {
            lo = lo.min(row[imp.column]);
            hi = hi.max(row[imp.column]);
        }
    }
    if !lo.is_finite() || lo == hi {
        lo = -1.0;
        hi = 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let x_of = |phi: f64| label_w + (phi - lo) / (hi - lo) * plot_w;

    let space = match shap.output_space {
        crate::explain::OutputSpace::Probability => "probability",
        crate::explain::OutputSpace::LogOdds => "log-odds",
    };

    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\">\n"
    );
    let _ = write!(
        s,
        "<text x=\"16\" y=\"24\" font-size=\"15\" font-weight=\"bold\">{}</text>\n\
         <text x=\"16\" y=\"42\" font-size=\"11\" fill=\"#555\">attribution ({space} space), \
         blue = low feature value, red = high</text>\n",
        esc(title)
    );
    // Zero line.
    let zero_x = x_of(0.0);
    let _ = write!(
        s,
        "<line x1=\"{zero_x:.2}\" y1=\"{top:.2}\" x2=\"{zero_x:.2}\" y2=\"{:.2}\" \
         stroke=\"#999\" stroke-width=\"1\"/>\n",
        top + row_h * impacts.len() as f64
    );

    for (rank, imp) in impacts.iter().enumerate() {
        let cy = top + row_h * (rank as f64 + 0.5);
        let _ = write!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            label_w - 8.0,
            cy + 4.0,
            esc(&imp.name)
        );
        let mut vlo = f64::INFINITY;
        let mut vhi = f64::NEG_INFINITY;
        for i in 0..shap.n_rows() {
            let v = x.get(i, imp.column);
            vlo = vlo.min(v);
            vhi = vhi.max(v);
        }
        for i in 0..shap.n_rows() {
            let phi = shap.phi[i][imp.column];
            let v = x.get(i, imp.column);
            let t = if vhi > vlo {
                2.0 * (v - vlo) / (vhi - vlo) - 1.0
            } else {
                0.0
            };
            let cx = x_of(phi);
            let cyj = cy + jitter(i) * (row_h * 0.34);
            let _ = write!(
                s,
                "<circle cx=\"{cx:.2}\" cy=\"{cyj:.2}\" r=\"2.2\" fill=\"{}\" \
                 fill-opacity=\"0.75\"/>\n",
                diverging_color(t)
            );
        }
    }

    let axis_y = top + row_h * impacts.len() as f64 + 18.0;
    let _ = write!(
        s,
        "<text x=\"{:.2}\" y=\"{axis_y:.2}\" font-size=\"10\" text-anchor=\"middle\">{lo:.3}</text>\n\
         <text x=\"{zero_x:.2}\" y=\"{axis_y:.2}\" font-size=\"10\" text-anchor=\"middle\">0</text>\n\
         <text x=\"{:.2}\" y=\"{axis_y:.2}\" font-size=\"10\" text-anchor=\"middle\">{hi:.3}</text>\n",
        x_of(lo),
        x_of(hi)
    );
    s.push_str("</svg>\n");
    s
}

/// Correlation heatmap with printed values.
pub fn heatmap_svg(m: &CorrMatrix, title: &str) -> String {
    let k = m.variables.len();
    let cell = 52.0;
    let left = 150.0;
    let top = 90.0;
    let width = left + cell * k as f64 + 30.0;
    let height = top + cell * k as f64 + 30.0;

    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\">\n"
    );
    let _ = write!(
        s,
        "<text x=\"16\" y=\"24\" font-size=\"15\" font-weight=\"bold\">{}</text>\n\
         <text x=\"16\" y=\"42\" font-size=\"11\" fill=\"#555\">Pearson r over {} rows</text>\n",
        esc(title),
        m.n_used
    );

    for (j, var) in m.variables.iter().enumerate() {
        let cx = left + cell * (j as f64 + 0.5);
        let _ = write!(
            s,
            "<text x=\"{cx:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"start\" \
             transform=\"rotate(-45 {cx:.2} {:.2})\">{}</text>\n",
            top - 8.0,
            top - 8.0,
            esc(var)
        );
    }
    for (i, var) in m.variables.iter().enumerate() {
        let cy = top + cell * (i as f64 + 0.5);
        let _ = write!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
            left - 8.0,
            cy + 4.0,
            esc(var)
        );
        for j in 0..k {
            let r = m.r[i][j];
            let x0 = left + cell * j as f64;
            let y0 = top + cell * i as f64;
            let _ = write!(
                s,
                "<rect x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" \
                 fill=\"{}\" stroke=\"#ccc\" stroke-width=\"0.5\"/>\n",
                diverging_color(r)
            );
            let _ = write!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">{r:.2}</text>\n",
                x0 + cell / 2.0,
                y0 + cell / 2.0 + 4.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn stroke_width(strength: BandStrength) -> f64 {
    match strength {
        BandStrength::High => 4.0,
        BandStrength::Moderate => 2.4,
        BandStrength::Low => 1.2,
        BandStrength::Negligible => 0.0,
    }
}

/// Circular-layout network diagram: solid positive edges, dotted negative.
pub fn network_svg(net: &CorrelationNetwork, title: &str) -> String {
    let size = 560.0;
    let cx = size / 2.0;
    let cy = size / 2.0 + 20.0;
    let radius = size / 2.0 - 110.0;
    let k = net.nodes.len().max(1);

    let pos = |i: usize| -> (f64, f64) {
        let angle =
            -std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * (i as f64) / (k as f64);
        (cx + radius * angle.cos(), cy + radius * angle.sin())
    };

    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size:.0}\" height=\"{size:.0}\" \
         viewBox=\"0 0 {size:.0} {size:.0}\" font-family=\"sans-serif\">\n"
    );
    let _ = write!(
        s,
        "<text x=\"16\" y=\"24\" font-size=\"15\" font-weight=\"bold\">{}</text>\n\
         <text x=\"16\" y=\"42\" font-size=\"11\" fill=\"#555\">solid = positive, dotted = negative; \
         width = band strength</text>\n",
        esc(title)
    );

    for edge in &net.edges {
        let ia = net.nodes.iter().position(|n| *n == edge.a).unwrap();
        let ib = net.nodes.iter().position(|n| *n == edge.b).unwrap();
        let (x1, y1) = pos(ia);
        let (x2, y2) = pos(ib);
        let dash = if edge.band.positive {
            String::new()
        } else {
            " stroke-dasharray=\"6,5\"".to_string()
        };
        let _ = write!(
            s,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" \
             stroke=\"#444\" stroke-width=\"{:.1}\"{dash}/>\n",
            stroke_width(edge.band.strength)
        );
    }

    for (i, node) in net.nodes.iter().enumerate() {
        let (x, y) = pos(i);
        let _ = write!(
            s,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"22\" fill=\"#e8eef7\" stroke=\"#33557f\" \
             stroke-width=\"1.5\"/>\n"
        );
        let outward = 36.0;
        let dx = (x - cx) / radius * outward;
        let dy = (y - cy) / radius * outward;
        let anchor = if x < cx - 1.0 {
            "end"
        } else if x > cx + 1.0 {
            "start"
        } else {
            "middle"
        };
        let _ = write!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"{anchor}\">{}</text>\n",
            x + dx,
            y + dy + 4.0,
            esc(node)
        );
    }
    s.push_str("</svg>\n");
    s
}
