//! Minimal SVG line charts for CSV output (loss curves, probe timings).

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Renders a CSV with a header row. The first column is x; every other
/// column becomes a series. Non-numeric cells are skipped.
pub fn line_chart_svg(csv: &str, title: &str) -> Result<String, String> {
    let mut lines = csv.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or("empty CSV")?.split(',').map(str::trim).collect();
    if header.len() < 2 {
        return Err("need at least two columns".into());
    }
    let rows: Vec<Vec<Option<f64>>> = lines
        .map(|l| l.split(',').map(|c| c.trim().parse::<f64>().ok()).collect())
        .collect();
    let points = |col: usize| -> Vec<(f64, f64)> {
        rows.iter()
            .filter_map(|r| Some((r.first().copied()??, r.get(col).copied()??)))
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect()
    };
    let series: Vec<(&str, Vec<(f64, f64)>)> = (1..header.len()).map(|c| (header[c], points(c))).collect();
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
    if all.is_empty() {
        return Err("no numeric data".into());
    }
    let span = |vals: Vec<f64>| {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = span(all.iter().map(|p| p.0).collect());
    let (y0, y1) = span(all.iter().map(|p| p.1).collect());
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>",
        W / 2.0,
        escape(title)
    )
    .unwrap();
    writeln!(
        svg,
        "<polyline points=\"{PAD},{PAD} {PAD},{b} {r},{b}\" fill=\"none\" stroke=\"black\"/>",
        b = H - PAD,
        r = W - PAD
    )
    .unwrap();
    for (v, x, y, anchor) in [
        (x0, sx(x0), H - PAD + 16.0, "middle"),
        (x1, sx(x1), H - PAD + 16.0, "middle"),
        (y0, PAD - 6.0, sy(y0), "end"),
        (y1, PAD - 6.0, sy(y1) + 4.0, "end"),
    ] {
        writeln!(
            svg,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            tick(v)
        )
        .unwrap();
    }
    writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
        W / 2.0,
        H - 12.0,
        escape(header[0])
    )
    .unwrap();
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if !pts.is_empty() {
            let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                coords.join(" ")
            )
            .unwrap();
        }
        let ly = PAD + 14.0 * i as f64;
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{ly}\" fill=\"{color}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            W - PAD - 110.0,
            escape(name)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e5) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_series() {
        let svg = line_chart_svg("epoch,a,b\n1,2.0,3\n2,1.5,2\n3,1.0,nan\n", "loss <x>").unwrap();
        assert_eq!(svg.matches("stroke-width=\"1.5\"").count(), 2);
        assert!(svg.contains("loss &lt;x&gt;"));
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn rejects_unusable_input() {
        assert!(line_chart_svg("", "").is_err());
        assert!(line_chart_svg("x\n1\n", "").is_err());
        assert!(line_chart_svg("x,y\na,b\n", "").is_err());
        assert!(line_chart_svg("x,y\n1,1\n", "").is_ok());
    }
}
