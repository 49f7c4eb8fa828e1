//! Static scatter plot of 2D samples over log-density contours.

use std::fmt::Write as _;
use std::path::Path;

use dftns::targets::Target;
use ndarray::{Array2, ArrayView2};

use crate::error::{CliError, Result};

pub const GRID: usize = 200;
const CANVAS: f64 = 400.0;
/// Contours sit this many nats below the grid maximum (k^2 / 2 for k = 1..5).
const LEVEL_DROPS: [f64; 5] = [0.5, 2.0, 4.5, 8.0, 12.5];
const MIN_HALF_WIDTH: f64 = 4.0;

/// Half-width of the square window centred on the origin.
fn half_width(samples: ArrayView2<'_, f64>) -> f64 {
    let extent = samples
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    MIN_HALF_WIDTH.max((extent * 1.05).ceil())
}

fn interp(a: f64, b: f64, level: f64) -> f64 {
    let t = (level - a) / (b - a);
    if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.5
    }
}

/// Marching squares over `values[i][j]` (i along x, j along y) on the unit
/// grid. Returns segments in grid coordinates.
pub fn contour_segments(values: &Array2<f64>, level: f64) -> Vec<[(f64, f64); 2]> {
    let (nx, ny) = values.dim();
    let mut segments = Vec::new();
    for i in 0..nx.saturating_sub(1) {
        for j in 0..ny.saturating_sub(1) {
            // corners counter-clockwise from (i, j)
            let v = [values[[i, j]], values[[i + 1, j]], values[[i + 1, j + 1]], values[[i, j + 1]]];
            let case = v
                .iter()
                .enumerate()
                .fold(0, |acc, (k, &c)| acc | (usize::from(c >= level) << k));
            if case == 0 || case == 15 {
                continue;
            }
            let (x, y) = (i as f64, j as f64);
            // edges: 0 bottom, 1 right, 2 top, 3 left
            let edge = |e: usize| match e {
                0 => (x + interp(v[0], v[1], level), y),
                1 => (x + 1.0, y + interp(v[1], v[2], level)),
                2 => (x + 1.0 - interp(v[2], v[3], level), y + 1.0),
                _ => (x, y + 1.0 - interp(v[3], v[0], level)),
            };
            let centre_high = (v[0] + v[1] + v[2] + v[3]) / 4.0 >= level;
            let pairs: &[(usize, usize)] = match case {
                1 | 14 => &[(3, 0)],
                2 | 13 => &[(0, 1)],
                3 | 12 => &[(3, 1)],
                4 | 11 => &[(1, 2)],
                6 | 9 => &[(0, 2)],
                7 | 8 => &[(3, 2)],
                5 if centre_high => &[(3, 2), (0, 1)],
                5 => &[(3, 0), (1, 2)],
                10 if centre_high => &[(3, 0), (1, 2)],
                _ => &[(3, 2), (0, 1)],
            };
            segments.extend(pairs.iter().map(|&(a, b)| [edge(a), edge(b)]));
        }
    }
    segments
}

/// Renders the plot. Output bytes depend only on the inputs.
pub fn scatter_svg(samples: ArrayView2<'_, f64>, target: &dyn Target) -> Result<String> {
    if target.dim() != 2 || samples.ncols() != 2 {
        return Err(dftns::Error::Unsupported(format!(
            "scatter plots need 2D samples and target, got {} columns and dimension {}",
            samples.ncols(),
            target.dim()
        ))
        .into());
    }
    let half = half_width(samples);
    let step = 2.0 * half / (GRID - 1) as f64;
    let grid = Array2::from_shape_fn((GRID, GRID), |(i, j)| {
        target.log_density(&[-half + i as f64 * step, -half + j as f64 * step])
    });
    let top = grid.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);

    let px = CANVAS / (GRID - 1) as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{c}" height="{c}" viewBox="0 0 {c} {c}">"#,
        c = CANVAS
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if top.is_finite() {
        for drop in LEVEL_DROPS {
            let segments = contour_segments(&grid, top - drop);
            if segments.is_empty() {
                continue;
            }
            let mut d = String::new();
            for [(x0, y0), (x1, y1)] in segments {
                let _ = write!(
                    d,
                    "M{:.2} {:.2}L{:.2} {:.2}",
                    x0 * px,
                    CANVAS - y0 * px,
                    x1 * px,
                    CANVAS - y1 * px
                );
            }
            let _ = writeln!(svg, r##"<path d="{d}" fill="none" stroke="#8888cc" stroke-width="0.8"/>"##);
        }
    }
    let scale = CANVAS / (2.0 * half);
    for row in samples.rows() {
        if !(row[0].is_finite() && row[1].is_finite()) {
            continue;
        }
        let _ = writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#cc3333" fill-opacity="0.6"/>"##,
            (row[0] + half) * scale,
            CANVAS - (row[1] + half) * scale
        );
    }
    let _ = writeln!(
        svg,
        r##"<text x="4" y="14" font-family="monospace" font-size="11" fill="#333">[-{h}, {h}]^2</text>"##,
        h = half
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_scatter_svg(samples: ArrayView2<'_, f64>, target: &dyn Target, path: &Path) -> Result<()> {
    let svg = scatter_svg(samples, target)?;
    std::fs::write(path, svg).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use dftns::targets::{make_target, GaussianTarget};
    use ndarray::array;

    fn circles(svg: &str) -> Vec<(f64, f64)> {
        svg.lines()
            .filter(|l| l.starts_with("<circle"))
            .map(|l| {
                let attr = |name: &str| -> f64 {
                    let start = l.find(&format!("{name}=\"")).unwrap() + name.len() + 2;
                    l[start..].split('"').next().unwrap().parse().unwrap()
                };
                (attr("cx"), attr("cy"))
            })
            .collect()
    }

    #[test]
    fn empty_samples_give_contours_only() {
        let t = make_target("donut").unwrap();
        let svg = scatter_svg(Array2::zeros((0, 2)).view(), &t).unwrap();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<path").count(), LEVEL_DROPS.len());
        assert!(circles(&svg).is_empty());
    }

    #[test]
    fn origin_is_plotted_at_the_centre() {
        for name in ["gaussian", "donut", "mog2"] {
            let t = make_target(name).unwrap();
            let svg = scatter_svg(array![[0.0, 0.0]].view(), &t).unwrap();
            assert_eq!(circles(&svg), vec![(CANVAS / 2.0, CANVAS / 2.0)]);
        }
    }

    #[test]
    fn output_is_deterministic() {
        let t = make_target("funnel").unwrap();
        let x = array![[0.3, -1.2], [2.0, 5.5]];
        assert_eq!(scatter_svg(x.view(), &t).unwrap(), scatter_svg(x.view(), &t).unwrap());
    }

    #[test]
    fn other_dimensions_are_unsupported() {
        let t = GaussianTarget::standard(3);
        let err = scatter_svg(Array2::zeros((1, 3)).view(), &t).unwrap_err();
        assert!(matches!(err, CliError::Core(dftns::Error::Unsupported(_))));
    }

    #[test]
    fn circle_contour_has_the_right_radius() {
        // -|x|^2 / 2 drops by 2 nats at radius 2
        let t = make_target("gaussian").unwrap();
        let half = MIN_HALF_WIDTH;
        let step = 2.0 * half / (GRID - 1) as f64;
        let grid = Array2::from_shape_fn((GRID, GRID), |(i, j)| {
            t.log_density(&[-half + i as f64 * step, -half + j as f64 * step])
        });
        let top = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let segments = contour_segments(&grid, top - 2.0);
        assert!(segments.len() > 100);
        for [(x, y), _] in segments {
            let r = ((-half + x * step).powi(2) + (-half + y * step).powi(2)).sqrt();
            // the grid maximum sits slightly off the origin
            assert!((r - 2.0).abs() < 0.05, "{r}");
        }
    }

    #[test]
    fn saddle_cells_produce_two_segments() {
        let grid = array![[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(contour_segments(&grid, 0.5).len(), 2);
        assert!(contour_segments(&grid, 2.0).is_empty());
    }
}
