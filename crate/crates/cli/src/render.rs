//! SVG rendering of aggregates.
//!
//! Lattice coordinates map to pixels by the affine map
//!
//! ```text
//! px = cell * (x - x_min + 1)
//! py = cell * (y_max - y + 1)
//! ```
//!
//! within each panel, where `[x_min, x_max] x [y_min, y_max]` is the bounding
//! box of the drawn points and overlay circles. Every settled vertex is a
//! `cell x cell` square centred on its pixel position. A panel is
//! `cell * (x_max - x_min + 2)` wide. Three-dimensional aggregates are drawn
//! as the three axis slices `x_2 = 0`, `x_1 = 0` and `x_0 = 0`, side by side
//! with a gap of `2 cell`.

use std::fmt::Write;

use idla_core::idla::AggregatePoints;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlay {
    pub radius: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderStyle {
    /// Pixels per lattice unit.
    pub cell: f64,
    pub color_by_order: bool,
    /// Circles at `eps R`, `(1 - eps) R` and `R` about the origin.
    pub overlay: Option<Overlay>,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            cell: 6.0,
            color_by_order: false,
            overlay: None,
        }
    }
}

const FILL: &str = "#3b6ea5";
const ORIGIN_FILL: &str = "#d62728";
const GAP_CELLS: f64 = 2.0;

/// Points of one planar panel, with their settlement ranks.
struct Panel {
    title: String,
    points: Vec<(i32, i32, usize)>,
}

/// The two in-plane axes of each panel.
fn panels(agg: &AggregatePoints) -> CliResult<Vec<Panel>> {
    match agg.d {
        1 => Ok(vec![Panel {
            title: "x0".into(),
            points: agg
                .points
                .iter()
                .enumerate()
                .map(|(k, c)| (c[0], 0, k))
                .collect(),
        }]),
        2 => Ok(vec![Panel {
            title: "x0, x1".into(),
            points: agg
                .points
                .iter()
                .enumerate()
                .map(|(k, c)| (c[0], c[1], k))
                .collect(),
        }]),
        3 => Ok([(2usize, 0usize, 1usize), (1, 0, 2), (0, 1, 2)]
            .iter()
            .map(|&(fixed, a, b)| Panel {
                title: format!("x{fixed} = 0"),
                points: agg
                    .points
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c[fixed] == 0)
                    .map(|(k, c)| (c[a], c[b], k))
                    .collect(),
            })
            .collect()),
        d => Err(CliError::Unsupported(format!(
            "cannot render a {d}-dimensional aggregate"
        ))),
    }
}

fn color(rank: usize, total: usize, by_order: bool) -> String {
    if !by_order {
        return FILL.to_string();
    }
    let t = if total > 1 {
        rank as f64 / (total - 1) as f64
    } else {
        0.0
    };
    format!("hsl({:.1},70%,45%)", 240.0 * (1.0 - t))
}

/// SVG document for an aggregate.
pub fn render_svg(agg: &AggregatePoints, style: &RenderStyle) -> CliResult<String> {
    if !(style.cell > 0.0 && style.cell.is_finite()) {
        return Err(CliError::Config("cell size must be positive".into()));
    }
    let panels = panels(agg)?;
    let reach = style.overlay.map_or(0, |o| o.radius.ceil() as i32);
    let cell = style.cell;
    let total = agg.points.len();
    let mut body = String::new();
    let mut offset = 0.0;
    let mut height: f64 = 0.0;
    for panel in &panels {
        let (mut x_min, mut x_max, mut y_min, mut y_max) = (-reach, reach, -reach, reach);
        for &(x, y, _) in &panel.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
        let px = |x: f64| offset + cell * (x - x_min as f64 + 1.0);
        let py = |y: f64| cell * (y_max as f64 - y + 1.0);
        let width = cell * (x_max - x_min + 2) as f64;
        height = height.max(cell * (y_max - y_min + 2) as f64);
        writeln!(body, "<g class=\"panel\"><title>{}</title>", panel.title).unwrap();
        for &(x, y, k) in &panel.points {
            let origin = k == 0;
            let fill = if origin {
                ORIGIN_FILL.to_string()
            } else {
                color(k, total, style.color_by_order)
            };
            writeln!(
                body,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" fill=\"{fill}\"{}/>",
                px(x as f64) - cell / 2.0,
                py(y as f64) - cell / 2.0,
                if origin { " stroke=\"black\" class=\"origin\"" } else { "" },
            )
            .unwrap();
        }
        if let Some(o) = style.overlay {
            for r in [o.epsilon * o.radius, (1.0 - o.epsilon) * o.radius, o.radius] {
                writeln!(
                    body,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"none\" stroke=\"black\" stroke-width=\"1\" class=\"overlay\"/>",
                    px(0.0),
                    py(0.0),
                    r * cell
                )
                .unwrap();
            }
        }
        writeln!(body, "</g>").unwrap();
        offset += width + GAP_CELLS * cell;
    }
    let width = offset - GAP_CELLS * cell;
    Ok(format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.2}\" height=\"{height:.2}\" viewBox=\"0 0 {width:.2} {height:.2}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agg(d: usize, points: Vec<Vec<i32>>) -> AggregatePoints {
        let steps = vec![0; points.len()];
        AggregatePoints {
            d,
            graph_hash: "h".into(),
            points,
            steps,
        }
    }

    #[test]
    fn single_particle_is_one_marked_square() {
        let svg = render_svg(&agg(2, vec![vec![0, 0]]), &RenderStyle::default()).unwrap();
        assert_eq!(svg.matches("<rect x=").count(), 1);
        assert_eq!(svg.matches("class=\"origin\"").count(), 1);
        // cell 6: panel is 12 px wide, origin square spans 3..9
        assert!(svg.contains("<rect x=\"3.00\" y=\"3.00\" width=\"6.00\""));
    }

    #[test]
    fn overlay_radii_follow_the_affine_map() {
        let style = RenderStyle {
            cell: 4.0,
            overlay: Some(Overlay {
                radius: 10.0,
                epsilon: 0.25,
            }),
            ..Default::default()
        };
        let svg = render_svg(&agg(2, vec![vec![0, 0], vec![1, 0]]), &style).unwrap();
        // x_min = -10, so the origin maps to 4 * (0 + 10 + 1) = 44
        for r in ["10.00", "30.00", "40.00"] {
            assert!(
                svg.contains(&format!("cx=\"44.00\" cy=\"44.00\" r=\"{r}\"")),
                "{r}"
            );
        }
    }

    #[test]
    fn three_dimensions_render_as_slices() {
        let pts = vec![vec![0, 0, 0], vec![1, 0, 0], vec![0, 0, 1], vec![1, 1, 1]];
        let svg = render_svg(&agg(3, pts), &RenderStyle::default()).unwrap();
        assert_eq!(svg.matches("class=\"panel\"").count(), 3);
        // slice x2 = 0 holds two points, x1 = 0 three, x0 = 0 two
        assert_eq!(svg.matches("<rect x=").count(), 7);
    }

    #[test]
    fn four_dimensions_unsupported() {
        let err = render_svg(&agg(4, vec![vec![0, 0, 0, 0]]), &RenderStyle::default()).unwrap_err();
        assert!(matches!(err, CliError::Unsupported(_)));
    }

    #[test]
    fn coloring_by_order_varies_the_fill() {
        let style = RenderStyle {
            color_by_order: true,
            ..Default::default()
        };
        let svg = render_svg(&agg(2, vec![vec![0, 0], vec![1, 0], vec![2, 0]]), &style).unwrap();
        assert!(svg.contains("hsl(120.0,70%,45%)"));
        assert!(svg.contains("hsl(0.0,70%,45%)"));
    }
}
