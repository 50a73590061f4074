//! Self-contained SVG line charts for experiment results: one series per
//! sample size, x-axis the grid value (sparsity level or signal gap), y-axis
//! the replicate-averaged excess risk. The stability sweep is drawn with a
//! logarithmic y-axis. Output is generated purely from the result rows.

use crate::error::{IhtError, Result};
use crate::experiment::{ExperimentResult, GridMean, Protocol};
use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 44.0;
const MARGIN_BOTTOM: f64 = 60.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Render the replicate-averaged curves to an SVG file.
pub fn emit_plot(result: &ExperimentResult, path: &Path) -> Result<()> {
    let svg = render_svg(result)?;
    std::fs::write(path, svg).map_err(|source| IhtError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Build the SVG document in memory.
pub fn render_svg(result: &ExperimentResult) -> Result<String> {
    if result.rows.is_empty() {
        return Err(IhtError::InvalidConfig("cannot plot an empty result".into()));
    }
    let protocol = result.rows[0].protocol;
    let log_y = protocol == Protocol::StabilitySweep;
    let means = result.replicate_means();

    // one series per distinct n, in increasing order
    let mut ns: Vec<usize> = means.iter().map(|m| m.n).collect();
    ns.sort_unstable();
    ns.dedup();

    let usable = |m: &&GridMean| m.mean_excess.is_finite() && (!log_y || m.mean_excess > 0.0);
    let transform = |y: f64| if log_y { y.log10() } else { y };

    let mut series: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
    for &n in &ns {
        let mut pts: Vec<(f64, f64)> = means
            .iter()
            .filter(|m| m.n == n)
            .filter(usable)
            .map(|m| (m.grid_value, transform(m.mean_excess)))
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite grid"));
        series.push((n, pts));
    }

    let xs: Vec<f64> = series.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.0)).collect();
    let ys: Vec<f64> = series.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.1)).collect();
    if xs.is_empty() {
        return Err(IhtError::InvalidConfig(
            "no plottable points (all rows failed?)".into(),
        ));
    }
    let (x_lo, x_hi) = padded_range(&xs);
    let (y_lo, y_hi) = padded_range(&ys);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| MARGIN_TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" \
         width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );

    let title = match protocol {
        Protocol::SparsityScaling => "Mean excess risk vs sparsity level k",
        Protocol::StabilitySweep => "Mean excess risk vs signal gap (log scale)",
    };
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{title}</text>",
        MARGIN_LEFT + plot_w / 2.0
    );

    // axes
    let _ = writeln!(
        svg,
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        MARGIN_LEFT,
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        MARGIN_LEFT, MARGIN_TOP, MARGIN_LEFT, MARGIN_TOP + plot_h
    );

    // ticks
    for i in 0..=4 {
        let fx = x_lo + (x_hi - x_lo) * i as f64 / 4.0;
        let px = sx(fx);
        let py = MARGIN_TOP + plot_h;
        let _ = writeln!(
            svg,
            "<line x1=\"{px:.1}\" y1=\"{py:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
            py + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{px:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{fx:.3}</text>",
            py + 18.0
        );

        let fy = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
        let pyv = sy(fy);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{pyv:.1}\" x2=\"{:.1}\" y2=\"{pyv:.1}\" stroke=\"black\"/>",
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT
        );
        let label = if log_y {
            format!("1e{fy:.2}")
        } else {
            format!("{fy:.4}")
        };
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{label}</text>",
            MARGIN_LEFT - 8.0,
            pyv + 4.0
        );
    }

    // axis labels
    let x_label = match protocol {
        Protocol::SparsityScaling => "sparsity level k",
        Protocol::StabilitySweep => "signal gap",
    };
    let y_label = if log_y { "excess risk (log10)" } else { "excess risk" };
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">{x_label}</text>",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"20\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 20 {:.1})\">{y_label}</text>",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    // series curves, markers, legend
    for (si, (n, pts)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if !pts.is_empty() {
            let coords: Vec<String> = pts
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                svg,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>",
                coords.join(" ")
            );
            for &(x, y) in pts {
                let _ = writeln!(
                    svg,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                    sx(x),
                    sy(y)
                );
            }
        }
        let ly = MARGIN_TOP + 14.0 + 20.0 * si as f64;
        let lx = MARGIN_LEFT + plot_w + 14.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{lx:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
             stroke=\"{color}\" stroke-width=\"1.8\"/>",
            lx + 22.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">n = {n}</text>",
            lx + 28.0,
            ly + 4.0
        );
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

fn padded_range(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::ResultRow;

    fn row(protocol: Protocol, grid: f64, n: usize, rep: usize, excess: f64) -> ResultRow {
        ResultRow {
            protocol,
            grid_value: grid,
            n,
            replicate: rep,
            excess_risk: excess,
            stderr: 0.0,
            min_margin: 0.1,
            support_jaccard: 1.0,
            iterations_used: 5,
            wall_time: 0.0,
        }
    }

    /// Minimal well-formedness oracle: tags balance, attributes are quoted,
    /// exactly one root element.
    fn assert_well_formed(xml: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut roots = 0;
        let mut rest = xml;
        while let Some(open) = rest.find('<') {
            rest = &rest[open + 1..];
            let close = rest.find('>').expect("unclosed tag");
            let tag = &rest[..close];
            rest = &rest[close + 1..];
            if tag.starts_with('?') || tag.starts_with('!') {
                continue;
            }
            if let Some(name) = tag.strip_prefix('/') {
                let top = stack.pop().expect("closing tag without opener");
                assert_eq!(top, name.trim(), "mismatched closing tag");
                if stack.is_empty() {
                    roots += 1;
                }
                continue;
            }
            let self_closing = tag.ends_with('/');
            let body = if self_closing { &tag[..tag.len() - 1] } else { tag };
            let name = body.split_whitespace().next().expect("empty tag").to_string();
            // quoted attributes: even number of double quotes
            assert_eq!(
                body.matches('"').count() % 2,
                0,
                "unbalanced quotes in <{body}>"
            );
            if self_closing {
                if stack.is_empty() {
                    roots += 1;
                }
            } else {
                stack.push(name);
            }
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
        assert_eq!(roots, 1, "expected exactly one root element");
    }

    #[test]
    fn single_row_renders() {
        let result = ExperimentResult {
            rows: vec![row(Protocol::SparsityScaling, 10.0, 400, 0, 0.05)],
        };
        let svg = render_svg(&result).unwrap();
        assert_well_formed(&svg);
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn one_series_per_sample_size() {
        let mut rows = Vec::new();
        for (n_idx, n) in [200usize, 1000, 2000].iter().enumerate() {
            for g in 1..=5 {
                rows.push(row(
                    Protocol::StabilitySweep,
                    g as f64 / 10.0,
                    *n,
                    0,
                    0.5 / (g as f64 * (n_idx + 1) as f64),
                ));
            }
        }
        let result = ExperimentResult { rows };
        let svg = render_svg(&result).unwrap();
        assert_well_formed(&svg);
        assert_eq!(svg.matches("<polyline").count(), 3);
        // legend labels present
        for n in [200, 1000, 2000] {
            assert!(svg.contains(&format!("n = {n}")));
        }
    }

    #[test]
    fn empty_result_rejected() {
        assert!(render_svg(&ExperimentResult { rows: vec![] }).is_err());
    }
}
