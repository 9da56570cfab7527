//! Static plot emission: a TSV of actual/fitted/forecast columns and an SVG
//! with one polyline per column. Both are byte-deterministic for identical
//! inputs: fixed float formatting, no timestamps, stable ordering.

use crate::error::{Error, Result};
use crate::panel::{CandidateRecord, PanelReport};
use crate::series::EpidemicPanel;

fn winner_record<'a>(report: &'a PanelReport) -> Result<&'a CandidateRecord> {
    report
        .records
        .iter()
        .find(|r| r.id == report.winner_id)
        .ok_or_else(|| Error::InvalidParameter("report has no winner record".into()))
}

/// Tab-separated data behind the panel figure: one row per date, columns
/// `date, actual, fitted, forecast`, cells left empty where undefined.
pub fn forecast_tsv(panel: &EpidemicPanel, target: &str, report: &PanelReport) -> Result<String> {
    let series = panel.get(target)?;
    let winner = winner_record(report)?;
    let mut out = String::from("date\tactual\tfitted\tforecast\n");
    for (i, date) in series.dates().iter().enumerate() {
        let fitted = winner
            .fitted
            .get(i)
            .copied()
            .flatten()
            .map_or(String::new(), |v| format!("{v}"));
        out.push_str(&format!(
            "{date}\t{actual}\t{fitted}\t\n",
            actual = series.values()[i]
        ));
    }
    for point in &winner.horizon {
        out.push_str(&format!("{}\t\t\t{}\n", point.date, point.value));
    }
    Ok(out)
}

struct Frame {
    width: f64,
    height: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
    n_points: usize,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, i: usize) -> f64 {
        let span = self.width - self.left - self.right;
        if self.n_points <= 1 {
            self.left
        } else {
            self.left + i as f64 / (self.n_points - 1) as f64 * span
        }
    }

    fn y(&self, v: f64) -> f64 {
        let span = self.height - self.top - self.bottom;
        let range = (self.y_max - self.y_min).max(1e-12);
        self.height - self.bottom - (v - self.y_min) / range * span
    }
}

fn polylines(points: &[Option<(usize, f64)>], frame: &Frame, style: &str) -> String {
    // One polyline per contiguous defined run.
    let mut out = String::new();
    let mut run: Vec<(usize, f64)> = Vec::new();
    let flush = |run: &mut Vec<(usize, f64)>, out: &mut String| {
        if run.len() >= 2 {
            let pts: Vec<String> = run
                .iter()
                .map(|(i, v)| format!("{:.2},{:.2}", frame.x(*i), frame.y(*v)))
                .collect();
            out.push_str(&format!(
                "  <polyline fill=\"none\" {style} points=\"{}\"/>\n",
                pts.join(" ")
            ));
        } else if run.len() == 1 {
            let (i, v) = run[0];
            out.push_str(&format!(
                "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" {}/>\n",
                frame.x(i),
                frame.y(v),
                style.replace("stroke", "fill")
            ));
        }
        run.clear();
    };
    for p in points {
        match p {
            Some(pv) => run.push(*pv),
            None => flush(&mut run, &mut out),
        }
    }
    flush(&mut run, &mut out);
    out
}

/// Deterministic SVG of the target series with the winner's fitted values
/// and horizon forecast.
pub fn panel_svg(panel: &EpidemicPanel, target: &str, report: &PanelReport) -> Result<String> {
    let series = panel.get(target)?;
    let winner = winner_record(report)?;
    let n_obs = series.len();
    let n_total = n_obs + winner.horizon.len();

    let actual: Vec<Option<(usize, f64)>> = series
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| Some((i, *v)))
        .chain(winner.horizon.iter().map(|_| None))
        .collect();
    let fitted: Vec<Option<(usize, f64)>> = (0..n_obs)
        .map(|i| winner.fitted.get(i).copied().flatten().map(|v| (i, v)))
        .collect();
    // Anchor the forecast to the last actual so the line reads continuously.
    let forecast: Vec<Option<(usize, f64)>> =
        std::iter::once(Some((n_obs - 1, series.values()[n_obs - 1])))
            .chain(
                winner
                    .horizon
                    .iter()
                    .enumerate()
                    .map(|(k, p)| Some((n_obs + k, p.value))),
            )
            .collect();

    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for v in actual
        .iter()
        .chain(fitted.iter())
        .chain(forecast.iter())
        .flatten()
    {
        y_min = y_min.min(v.1);
        y_max = y_max.max(v.1);
    }
    let pad = (y_max - y_min).max(1.0) * 0.05;
    let frame = Frame {
        width: 860.0,
        height: 480.0,
        left: 70.0,
        right: 20.0,
        top: 30.0,
        bottom: 50.0,
        n_points: n_total,
        y_min: y_min - pad,
        y_max: y_max + pad,
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
        w = frame.width,
        h = frame.height
    ));
    svg.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{} — winner: {}</text>\n",
        frame.left, target, report.winner_id
    ));

    // Axes
    let x0 = frame.left;
    let x1 = frame.width - frame.right;
    let y0 = frame.height - frame.bottom;
    svg.push_str(&format!(
        "  <line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y0:.2}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "  <line x1=\"{x0:.2}\" y1=\"{:.2}\" x2=\"{x0:.2}\" y2=\"{y0:.2}\" stroke=\"black\"/>\n",
        frame.top
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{:.1}</text>\n",
        x0 - 6.0,
        frame.y(y_max) + 4.0,
        y_max
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{:.1}</text>\n",
        x0 - 6.0,
        frame.y(y_min) + 4.0,
        y_min
    ));
    let last_date = winner
        .horizon
        .last()
        .map_or(series.end(), |p| p.date);
    svg.push_str(&format!(
        "  <text x=\"{x0:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        y0 + 18.0,
        series.start()
    ));
    svg.push_str(&format!(
        "  <text x=\"{x1:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{last_date}</text>\n",
        y0 + 18.0
    ));

    svg.push_str(&polylines(
        &actual,
        &frame,
        "stroke=\"#1f77b4\" stroke-width=\"2\"",
    ));
    svg.push_str(&polylines(
        &fitted,
        &frame,
        "stroke=\"#ff7f0e\" stroke-width=\"1.5\"",
    ));
    svg.push_str(&polylines(
        &forecast,
        &frame,
        "stroke=\"#2ca02c\" stroke-width=\"2\" stroke-dasharray=\"6 3\"",
    ));

    // Legend
    for (i, (label, color)) in [
        ("actual", "#1f77b4"),
        ("fitted", "#ff7f0e"),
        ("forecast", "#2ca02c"),
    ]
    .iter()
    .enumerate()
    {
        let lx = x1 - 260.0 + i as f64 * 90.0;
        svg.push_str(&format!(
            "  <rect x=\"{lx:.2}\" y=\"10\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n"
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"20\" font-family=\"sans-serif\" font-size=\"11\">{label}</text>\n",
            lx + 14.0
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{default_roster, run_panel, PanelOptions, RosterOptions, SubsetMode};
    use crate::series::TimeSeries;
    use chrono::NaiveDate;

    fn fixture() -> EpidemicPanel {
        let start = NaiveDate::from_ymd_opt(2020, 1, 21).unwrap();
        let a: Vec<f64> = (0..14).map(|i| 100.0 + 10.0 * i as f64).collect();
        EpidemicPanel::new(vec![
            TimeSeries::from_start("suspected", start, a).unwrap()
        ])
        .unwrap()
    }

    fn quick_report(panel: &EpidemicPanel) -> PanelReport {
        let roster = default_roster(
            panel,
            "suspected",
            &RosterOptions {
                subset_mode: SubsetMode::PowerSet { cap: 4 },
                ..RosterOptions::default()
            },
        )
        .unwrap();
        run_panel(
            panel,
            "suspected",
            &roster,
            &PanelOptions {
                workers: 1,
                groups: vec![5],
                ..PanelOptions::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn tsv_has_expected_row_count() {
        let panel = fixture();
        let report = quick_report(&panel);
        let tsv = forecast_tsv(&panel, "suspected", &report).unwrap();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], "date\tactual\tfitted\tforecast");
        assert_eq!(lines.len(), 1 + 14 + 6);
    }

    #[test]
    fn tsv_leaves_warmup_fitted_cells_empty() {
        let panel = fixture();
        let report = quick_report(&panel);
        let tsv = forecast_tsv(&panel, "suspected", &report).unwrap();
        let first_data = tsv.lines().nth(1).unwrap();
        let cells: Vec<&str> = first_data.split('\t').collect();
        assert_eq!(cells.len(), 4);
        assert!(!cells[1].is_empty());
        assert!(cells[3].is_empty());
    }

    #[test]
    fn svg_is_byte_deterministic() {
        let panel = fixture();
        let report = quick_report(&panel);
        let a = panel_svg(&panel, "suspected", &report).unwrap();
        let b = panel_svg(&panel, "suspected", &report).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("<polyline"));
    }
}
