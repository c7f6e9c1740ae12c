//! Minimal hand-rolled SVG log-log convergence plot: one polyline per `c`,
//! dashed reference guide lines of slope one and two.

use std::path::Path;

use crate::report::{atomic_write, ConvergenceReport, ConvergenceRow};
use crate::HarnessError;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;

const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#d4b106", "#9467bd", "#2ca02c", "#8c564b"];

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn x(&self, v: f64) -> f64 {
        MARGIN_L + (v.log10() - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        let frac = (v.log10() - self.y0) / (self.y1 - self.y0);
        HEIGHT - MARGIN_B - frac * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

pub fn render_svg(report: &ConvergenceReport) -> String {
    let usable: Vec<&ConvergenceRow> =
        report.rows.iter().filter(|r| !r.diverged && r.err_sum() > 0.0).collect();
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{} global error vs time step</text>\n",
        WIDTH / 2.0,
        report.meta.config.scheme.name()
    ));

    if usable.is_empty() {
        svg.push_str("<text x=\"60\" y=\"60\" font-size=\"13\">no convergent data</text>\n</svg>\n");
        return svg;
    }

    let (mut tmin, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut emin, mut emax) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &usable {
        tmin = tmin.min(r.tau);
        tmax = tmax.max(r.tau);
        emin = emin.min(r.err_sum());
        emax = emax.max(r.err_sum());
    }
    let axes = Axes {
        x0: tmin.log10() - 0.1,
        x1: tmax.log10() + 0.1,
        y0: emin.log10() - 0.3,
        y1: emax.log10() + 0.3,
    };

    // frame and decade ticks
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    ));
    let mut d = axes.y0.ceil() as i64;
    while (d as f64) <= axes.y1 {
        let y = axes.y(10f64.powi(d as i32));
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n",
            WIDTH - MARGIN_R
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">1e{d}</text>\n",
            MARGIN_L - 6.0,
            y + 4.0
        ));
        d += 1;
    }
    for j in (tmin.log2().round() as i64)..=(tmax.log2().round() as i64) {
        let tau = 2f64.powi(j as i32);
        if tau < tmin * 0.99 || tau > tmax * 1.01 {
            continue;
        }
        let x = axes.x(tau);
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">2^{j}</text>\n",
            HEIGHT - MARGIN_B + 18.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">tau</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 18.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" font-size=\"13\" transform=\"rotate(-90 18 {})\" text-anchor=\"middle\">H^r error</text>\n",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0
    ));

    // reference guide lines of slope one and two through the lower-right corner
    let anchor_e = emin;
    for (order, dash) in [(1.0, "6,4"), (2.0, "2,4")] {
        let e_at_tmin = anchor_e * (tmin / tmax).powf(order);
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\" \
             stroke-width=\"1.6\" stroke-dasharray=\"{dash}\"/>\n",
            axes.x(tmin),
            axes.y(e_at_tmin),
            axes.x(tmax),
            axes.y(anchor_e)
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">slope {order}</text>\n",
            axes.x(tmin) + 6.0,
            axes.y(e_at_tmin) + 12.0
        ));
    }

    // one polyline per c, in first-appearance order
    let mut cs: Vec<f64> = Vec::new();
    for r in &usable {
        if !cs.contains(&r.c) {
            cs.push(r.c);
        }
    }
    for (ci, &c) in cs.iter().enumerate() {
        let color = COLORS[ci % COLORS.len()];
        let mut pts: Vec<(f64, f64)> = usable
            .iter()
            .filter(|r| r.c == c)
            .map(|r| (r.tau, r.err_sum()))
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let path: Vec<String> = pts
            .iter()
            .map(|(t, e)| format!("{:.1},{:.1}", axes.x(*t), axes.y(*e)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        for (t, e) in &pts {
            svg.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2.6\" fill=\"{color}\"/>\n",
                axes.x(*t),
                axes.y(*e)
            ));
        }
        let ly = MARGIN_T + 16.0 + 18.0 * ci as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            WIDTH - MARGIN_R + 10.0,
            WIDTH - MARGIN_R + 34.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">c = {c}</text>\n",
            WIDTH - MARGIN_R + 40.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_svg(report: &ConvergenceReport, path: &Path) -> Result<(), HarnessError> {
    atomic_write(path, &render_svg(report))
}
