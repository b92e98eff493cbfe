//! Static SVG overlay of a scenario, its LOS masks and planned trajectories.

use std::fmt::Write;

use irsplan::radiomap::RadioMap;
use irsplan::scenario::{Point, Scenario};

const PX_PER_M: f64 = 16.0;
const MARGIN: f64 = 20.0;
const PALETTE: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Frame {
    height_m: f64,
}

impl Frame {
    fn x(&self, x: f64) -> f64 {
        MARGIN + x * PX_PER_M
    }

    // SVG y grows downward
    fn y(&self, y: f64) -> f64 {
        MARGIN + (self.height_m - y) * PX_PER_M
    }
}

fn los_fill(ap: bool, irs: bool) -> &'static str {
    match (ap, irs) {
        (true, true) => "#dcefd6",
        (true, false) => "#e3ecf7",
        (false, true) => "#fbefd2",
        (false, false) => "#dddddd",
    }
}

/// Renders the area, obstacles, LOS shading (when a map is given), the AP,
/// IRS, start and goal markers, and one polyline per named path.
pub fn render(s: &Scenario, map: Option<&RadioMap>, paths: &[(&str, &[Point])]) -> String {
    let f = Frame { height_m: s.area_height_m };
    let w = 2.0 * MARGIN + s.area_width_m * PX_PER_M;
    let h = 2.0 * MARGIN + s.area_height_m * PX_PER_M;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let _ = writeln!(
        out,
        r##"<rect class="area" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#ffffff" stroke="#000000"/>"##,
        f.x(0.0),
        f.y(s.area_height_m),
        s.area_width_m * PX_PER_M,
        s.area_height_m * PX_PER_M
    );

    if let Some(map) = map {
        out.push_str("<g class=\"los\">\n");
        for iy in 0..map.ny {
            for ix in 0..map.nx {
                let i = map.index(ix, iy);
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}" stroke="none"/>"#,
                    f.x(ix as f64 * map.dx),
                    f.y((iy + 1) as f64 * map.dy),
                    map.dx * PX_PER_M,
                    map.dy * PX_PER_M,
                    los_fill(map.los_ap[i], map.los_irs[i])
                );
            }
        }
        out.push_str("</g>\n");
    }

    out.push_str("<g class=\"obstacles\">\n");
    for o in &s.obstacles {
        let eig = o.shape().symmetric_eigen();
        let v = eig.eigenvectors.column(0);
        let angle = v[1].atan2(v[0]).to_degrees();
        let (cx, cy) = (f.x(o.center.x), f.y(o.center.y));
        let _ = writeln!(
            out,
            r##"<ellipse cx="{cx:.3}" cy="{cy:.3}" rx="{:.3}" ry="{:.3}" transform="rotate({:.3} {cx:.3} {cy:.3})" fill="#7f7f7f" stroke="#333333"/>"##,
            eig.eigenvalues[0].sqrt() * PX_PER_M,
            eig.eigenvalues[1].sqrt() * PX_PER_M,
            -angle
        );
    }
    out.push_str("</g>\n");

    for (i, (name, positions)) in paths.iter().enumerate() {
        let points: Vec<String> = positions.iter().map(|q| format!("{:.3},{:.3}", f.x(q.x), f.y(q.y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline class="trajectory" data-method="{name}" points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            points.join(" "),
            PALETTE[i % PALETTE.len()]
        );
    }

    for (label, q, color) in [
        ("AP", s.q_a, "#000000"),
        ("IRS", s.q_i, "#8c564b"),
        ("start", s.q_s, "#2ca02c"),
        ("goal", s.q_d, "#d62728"),
    ] {
        let _ = writeln!(
            out,
            r#"<circle class="marker" cx="{:.3}" cy="{:.3}" r="5" fill="{color}"><title>{label}</title></circle>"#,
            f.x(q.x),
            f.y(q.y)
        );
    }
    out.push_str("</svg>\n");
    out
}
