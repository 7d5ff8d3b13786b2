//! Minimal static SVG line plots (no plotting dependency; the CSVs are
//! the contract, plots are diagnostics).

use std::fmt::Write as _;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Optional (lo, hi) confidence band per point.
    pub band: Option<Vec<(f64, f64)>>,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const W: f64 = 720.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

impl Plot {
    pub fn render(&self) -> String {
        let tx = |v: f64| if self.log_x { v.max(1e-300).log10() } else { v };
        let ty = |v: f64| if self.log_y { v.max(1e-300).log10() } else { v };

        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                xs.push(tx(x));
                ys.push(ty(y));
            }
            if let Some(band) = &s.band {
                for &(lo, hi) in band {
                    ys.push(ty(lo));
                    ys.push(ty(hi));
                }
            }
        }
        let (x_min, x_max) = bounds(&xs);
        let (y_min, y_max) = bounds(&ys);
        let px = |x: f64| MARGIN + (tx(x) - x_min) / (x_max - x_min) * (W - 2.0 * MARGIN);
        let py = |y: f64| H - MARGIN - (ty(y) - y_min) / (y_max - y_min) * (H - 2.0 * MARGIN);

        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
        );
        let _ = writeln!(out, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
            W / 2.0,
            escape(&self.title)
        );
        // Axes.
        let _ = writeln!(
            out,
            "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>",
            m = MARGIN,
            b = H - MARGIN,
            r = W - MARGIN
        );
        let _ = writeln!(
            out,
            "<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>",
            m = MARGIN,
            t = MARGIN,
            b = H - MARGIN
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{}</text>",
            W / 2.0,
            H - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{}</text>",
            H / 2.0,
            H / 2.0,
            escape(&self.y_label)
        );
        // Axis extremes.
        for (v, x, y, anchor) in [
            (x_min, MARGIN, H - MARGIN + 16.0, "middle"),
            (x_max, W - MARGIN, H - MARGIN + 16.0, "middle"),
            (y_min, MARGIN - 6.0, H - MARGIN, "end"),
            (y_max, MARGIN - 6.0, MARGIN, "end"),
        ] {
            let label = if (self.log_x && anchor == "middle") || (self.log_y && anchor == "end") {
                format!("1e{v:.2}")
            } else {
                format!("{v:.3}")
            };
            let _ = writeln!(
                out,
                "<text x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\" font-size=\"10\">{label}</text>"
            );
        }

        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            if let Some(band) = &s.band {
                let mut d = String::new();
                for (j, (&(x, _), &(lo, _))) in s.points.iter().zip(band).enumerate() {
                    let _ = write!(d, "{}{},{} ", if j == 0 { "M" } else { "L" }, px(x), py(lo));
                }
                for (&(x, _), &(_, hi)) in s.points.iter().zip(band).rev() {
                    let _ = write!(d, "L{},{} ", px(x), py(hi));
                }
                let _ = writeln!(
                    out,
                    "<path d=\"{d}Z\" fill=\"{color}\" opacity=\"0.15\" stroke=\"none\"/>"
                );
            }
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{},{}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                pts.join(" ")
            );
            for &(x, y) in &s.points {
                let _ = writeln!(
                    out,
                    "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{color}\"/>",
                    px(x),
                    py(y)
                );
            }
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{}</text>",
                W - MARGIN + 4.0,
                MARGIN + 14.0 * i as f64,
                escape(&s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_valid_svg() {
        let plot = Plot {
            title: "demo".into(),
            x_label: "n".into(),
            y_label: "p".into(),
            log_x: true,
            log_y: false,
            series: vec![Series {
                label: "s".into(),
                points: vec![(1.0, 0.5), (10.0, 0.7), (100.0, 0.6)],
                band: Some(vec![(0.4, 0.6), (0.6, 0.8), (0.5, 0.7)]),
            }],
        };
        let svg = plot.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("polyline"));
    }
}
