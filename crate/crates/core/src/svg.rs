//! SVG pictures of planar partitions and orbits on the unit square.

use std::fmt::Write as _;

use crate::symbolic::{Classification, Rectangle};

const SIZE: f64 = 600.0;
const PALETTE: [&str; 8] = ["#8dd3c7", "#ffffb3", "#bebada", "#80b1d3", "#fdb462", "#b3de69", "#fccde5", "#d9d9d9"];

#[derive(Clone, Debug, Default)]
pub struct SvgOptions<'a> {
    /// Colours `R₀` red and `R₁` grey instead of the palette.
    pub classification: Option<&'a Classification>,
    /// Orbit points in `[0, 1)²`, joined in order.
    pub orbit: Vec<Vec<f64>>,
    /// Extra marked points, e.g. the bad set.
    pub marks: Vec<Vec<f64>>,
    pub labels: bool,
}

fn px(p: [f64; 2]) -> (f64, f64) {
    (p[0] * SIZE, (1.0 - p[1]) * SIZE)
}

/// Integer translates of a polygon that meet the unit square.
fn lifts(poly: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in poly {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    let range = |c: usize| ((-hi[c]).floor() as i64)..=((1.0 - lo[c]).ceil() as i64);
    let mut out = Vec::new();
    for i in range(0) {
        for j in range(1) {
            let (x, y) = (i as f64, j as f64);
            if hi[0] + x > 0.0 && lo[0] + x < 1.0 && hi[1] + y > 0.0 && lo[1] + y < 1.0 {
                out.push([x, y]);
            }
        }
    }
    out
}

fn corners(r: &Rectangle) -> Vec<[f64; 2]> {
    let (a, e0, e1) = (&r.anchor, &r.edges[0], &r.edges[1]);
    vec![
        [a[0], a[1]],
        [a[0] + e0[0], a[1] + e0[1]],
        [a[0] + e0[0] + e1[0], a[1] + e0[1] + e1[1]],
        [a[0] + e1[0], a[1] + e1[1]],
    ]
}

/// Planar rectangles drawn with every lift clipped to the unit square.
/// Rectangles of other dimensions are skipped.
pub fn partition_svg(rectangles: &[Rectangle], options: &SvgOptions) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SIZE} {SIZE}" width="{SIZE}" height="{SIZE}">"#
    );
    let _ = write!(s, r#"<defs><clipPath id="torus"><rect x="0" y="0" width="{SIZE}" height="{SIZE}"/></clipPath></defs>"#);
    let _ = write!(s, r##"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="#ffffff"/><g clip-path="url(#torus)">"##);
    let mut label_spots = Vec::new();
    for r in rectangles.iter().filter(|r| r.dim() == 2 && r.edges.len() == 2) {
        let fill = match options.classification {
            Some(c) if c.r0.contains(&r.id) => "#e41a1c",
            Some(_) => "#cccccc",
            None => PALETTE[r.id % PALETTE.len()],
        };
        let poly = corners(r);
        for shift in lifts(&poly) {
            let pts: Vec<String> = poly
                .iter()
                .map(|p| {
                    let (x, y) = px([p[0] + shift[0], p[1] + shift[1]]);
                    format!("{x:.3},{y:.3}")
                })
                .collect();
            let _ = write!(
                s,
                r##"<polygon points="{}" fill="{fill}" fill-opacity="0.8" stroke="#333333" stroke-width="0.8"><title>R{}</title></polygon>"##,
                pts.join(" "),
                r.id
            );
            let cx = poly.iter().map(|p| p[0]).sum::<f64>() / 4.0 + shift[0];
            let cy = poly.iter().map(|p| p[1]).sum::<f64>() / 4.0 + shift[1];
            if (0.0..1.0).contains(&cx) && (0.0..1.0).contains(&cy) {
                label_spots.push((r.id, px([cx, cy])));
            }
        }
    }
    if options.labels {
        for (id, (x, y)) in label_spots {
            let _ = write!(s, r#"<text x="{x:.1}" y="{y:.1}" font-size="10" text-anchor="middle">{id}</text>"#);
        }
    }
    if options.orbit.len() > 1 {
        let pts: Vec<String> = options
            .orbit
            .iter()
            .map(|p| {
                let (x, y) = px([p[0], p[1]]);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = write!(s, r##"<polyline points="{}" fill="none" stroke="#1f78b4" stroke-width="0.6" stroke-opacity="0.6"/>"##, pts.join(" "));
    }
    for p in &options.orbit {
        let (x, y) = px([p[0], p[1]]);
        let _ = write!(s, r##"<circle cx="{x:.3}" cy="{y:.3}" r="2.5" fill="#1f78b4"/>"##);
    }
    for p in &options.marks {
        let (x, y) = px([p[0], p[1]]);
        let _ = write!(s, r##"<circle cx="{x:.3}" cy="{y:.3}" r="4" fill="none" stroke="#000000" stroke-width="1.5"/>"##);
    }
    s.push_str("</g></svg>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lifts_cover_wrapped_rectangles() {
        // straddles the corner, so all four translates show
        let r = Rectangle::parallelogram(0, [0.9, 0.9], [0.2, 0.0], [0.0, 0.2]);
        assert_eq!(lifts(&corners(&r)).len(), 4);
        let inner = Rectangle::parallelogram(1, [0.2, 0.2], [0.1, 0.0], [0.0, 0.1]);
        assert_eq!(lifts(&corners(&inner)), vec![[0.0, 0.0]]);
    }

    #[test]
    fn drawing_has_one_polygon_per_lift() {
        let rects = vec![
            Rectangle::parallelogram(0, [0.9, 0.9], [0.2, 0.0], [0.0, 0.2]),
            Rectangle::parallelogram(1, [0.2, 0.2], [0.1, 0.0], [0.0, 0.1]),
        ];
        let svg = partition_svg(&rects, &SvgOptions { orbit: vec![vec![0.1, 0.1], vec![0.5, 0.5]], labels: true, ..Default::default() });
        assert_eq!(svg.matches("<polygon").count(), 5);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>"));
    }
}
