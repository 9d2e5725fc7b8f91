//! Cohen's d against RA as a hand-written, byte-deterministic SVG.

use std::fmt::Write;

use crate::skystats::RaBinStats;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 110.0;

/// Caption in the style of the figure captions this plot imitates, using
/// the strict tail `P(X > observed)` of the peak bin.
pub fn caption(peak: &RaBinStats) -> String {
    format!(
        "Binomial cumulative probability: e.g. ({} trials, {:.1} mean, count > mean, at {:.1} s.d.) = {:.1e}",
        peak.trials_n,
        peak.expected_mean,
        peak.cohens_d.unwrap_or(0.0),
        peak.tail_prob_gt
    )
}

fn peak_bin(stats: &[RaBinStats]) -> Option<&RaBinStats> {
    stats
        .iter()
        .filter(|s| s.cohens_d.is_some())
        .fold(None, |best: Option<&RaBinStats>, s| match best {
            Some(b) if b.cohens_d >= s.cohens_d => Some(b),
            _ => Some(s),
        })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter of Cohen's d at each bin centre with the antenna FWHM shaded.
pub fn plot_stats(stats: &[RaBinStats], fwhm_center_hr: f64, fwhm_width_hr: f64) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let points: Vec<(f64, f64)> = stats
        .iter()
        .filter_map(|s| s.cohens_d.map(|d| (0.5 * (s.ra_low_hr + s.ra_high_hr), d)))
        .collect();

    if stats.is_empty() || points.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" fill="firebrick">warning: no statistics to plot</text>"#,
            WIDTH / 2.0,
            HEIGHT / 2.0
        );
        svg.push_str("</svg>\n");
        return svg;
    }

    let x_lo = stats.iter().map(|s| s.ra_low_hr).fold(f64::INFINITY, f64::min);
    let x_hi = stats.iter().map(|s| s.ra_high_hr).fold(f64::NEG_INFINITY, f64::max);
    let d_min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let d_max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let y_lo = d_min.min(-3.0).floor();
    let y_hi = d_max.max(4.0).ceil();
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    // FWHM band, clipped to the axes.
    let f_lo = (fwhm_center_hr - 0.5 * fwhm_width_hr).max(x_lo);
    let f_hi = (fwhm_center_hr + 0.5 * fwhm_width_hr).min(x_hi);
    if f_hi > f_lo {
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="{TOP:.2}" width="{:.2}" height="{plot_h:.2}" fill="#c6dbef" fill-opacity="0.6"/>"##,
            sx(f_lo),
            sx(f_hi) - sx(f_lo)
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="#3a6ea5">FWHM</text>"##,
            0.5 * (sx(f_lo) + sx(f_hi)),
            TOP + 14.0
        );
    }

    // Horizontal grid and y labels at whole standard deviations.
    let mut y = y_lo;
    while y <= y_hi + 1e-9 {
        let py = sy(y);
        let stroke = if y == 0.0 { "#444" } else { "#ddd" };
        let _ = writeln!(
            svg,
            r#"<line x1="{LEFT:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="{stroke}"/>"#,
            LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{y:.0}</text>"#,
            LEFT - 6.0,
            py + 4.0
        );
        y += 1.0;
    }

    // X ticks every half hour.
    let mut t = (x_lo * 2.0).ceil() / 2.0;
    while t <= x_hi + 1e-9 {
        let px = sx(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#444"/>"##,
            TOP + plot_h,
            TOP + plot_h + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{t:.1}</text>"#,
            TOP + plot_h + 18.0
        );
        t += 0.5;
    }

    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">RA (hrs)</text>"#,
        LEFT + plot_w / 2.0,
        TOP + plot_h + 36.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">Cohen's d</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for &(x, d) in &points {
        let _ = writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="#1f4e79"/>"##,
            sx(x),
            sy(d)
        );
    }

    if let Some(peak) = peak_bin(stats) {
        let _ = writeln!(
            svg,
            r#"<text x="{LEFT:.2}" y="{:.2}">{}</text>"#,
            HEIGHT - 40.0,
            escape(&caption(peak))
        );
        let _ = writeln!(
            svg,
            r##"<text x="{LEFT:.2}" y="{:.2}" fill="#555">peak bin {:.2}-{:.2} h: {} observed, P(X &gt;= {}) = {:.1e}, P(X &gt; {}) = {:.1e}</text>"##,
            HEIGHT - 20.0,
            peak.ra_low_hr,
            peak.ra_high_hr,
            peak.observed_count,
            peak.observed_count,
            peak.tail_prob_ge,
            peak.observed_count,
            peak.tail_prob_gt
        );
    }
    svg.push_str("</svg>\n");
    svg
}
