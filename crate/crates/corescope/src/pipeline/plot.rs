//! Minimal SVG bar charts for analysis output. Charts are grouped bar
//! plots: one group per category (difficulty bin, scoper) with one bar per
//! series. Everything is rendered into a single self-contained SVG string.

const PALETTE: [&str; 8] = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
];

const WIDTH: f64 = 880.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 72.0;

pub struct BarGroup {
    pub label: String,
    /// One value per series; `None` leaves a gap.
    pub values: Vec<Option<f64>>,
}

pub fn grouped_bar_chart(
    title: &str,
    y_label: &str,
    series: &[String],
    groups: &[BarGroup],
) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let max_value = groups
        .iter()
        .flat_map(|g| g.values.iter().flatten())
        .fold(0.0_f64, |acc, &v| acc.max(v))
        .max(1e-9);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
    svg.push_str(&format!(
        "  <text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    ));

    for tick in 0..=4 {
        let value = max_value * tick as f64 / 4.0;
        let y = MARGIN_TOP + plot_h - plot_h * tick as f64 / 4.0;
        svg.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ddd\"/>\n",
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 6.0,
            y + 4.0,
            trim_number(value)
        ));
    }

    if !groups.is_empty() {
        let group_w = plot_w / groups.len() as f64;
        let series_count = series.len().max(1) as f64;
        let bar_w = (group_w * 0.8) / series_count;
        for (gi, group) in groups.iter().enumerate() {
            let group_x = MARGIN_LEFT + gi as f64 * group_w;
            for (si, value) in group.values.iter().enumerate() {
                let Some(v) = value else { continue };
                let h = (v / max_value).clamp(0.0, 1.0) * plot_h;
                let x = group_x + group_w * 0.1 + si as f64 * bar_w;
                let y = MARGIN_TOP + plot_h - h;
                svg.push_str(&format!(
                    "  <rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{h:.2}\" \
                     fill=\"{}\"><title>{}: {}</title></rect>\n",
                    bar_w.max(1.0) - 1.0,
                    PALETTE[si % PALETTE.len()],
                    escape(&group.label),
                    trim_number(*v)
                ));
            }
            svg.push_str(&format!(
                "  <text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                group_x + group_w / 2.0,
                MARGIN_TOP + plot_h + 18.0,
                escape(&group.label)
            ));
        }
    }

    svg.push_str(&format!(
        "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333\"/>\n",
        MARGIN_LEFT,
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    ));

    let legend_y = HEIGHT - 20.0;
    let mut legend_x = MARGIN_LEFT;
    for (si, name) in series.iter().enumerate() {
        svg.push_str(&format!(
            "  <rect x=\"{legend_x}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n",
            legend_y - 10.0,
            PALETTE[si % PALETTE.len()]
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{legend_y}\">{}</text>\n",
            legend_x + 16.0,
            escape(name)
        ));
        legend_x += 16.0 + 8.0 * name.len() as f64 + 24.0;
    }

    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn trim_number(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.4}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> String {
        grouped_bar_chart(
            "speed-up by bin",
            "speed-up",
            &["baseline".to_string(), "heuristic".to_string()],
            &[
                BarGroup {
                    label: "0".to_string(),
                    values: vec![Some(2.0), Some(1.1)],
                },
                BarGroup {
                    label: "1".to_string(),
                    values: vec![Some(3.5), None],
                },
            ],
        )
    }

    #[test]
    fn test_chart_contains_bars_labels_and_legend() {
        let svg = sample();
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<rect").count(), 1 + 3 + 2, "bg + bars + legend");
        assert!(svg.contains("speed-up by bin"));
        assert!(svg.contains("baseline"));
        assert!(svg.contains("heuristic"));
    }

    #[test]
    fn test_empty_chart_still_renders() {
        let svg = grouped_bar_chart("empty", "y", &[], &[]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("empty"));
    }

    #[test]
    fn test_escapes_markup_in_labels() {
        let svg = grouped_bar_chart(
            "a<b & c",
            "y",
            &["s".to_string()],
            &[BarGroup {
                label: "<g>".to_string(),
                values: vec![Some(1.0)],
            }],
        );
        assert!(svg.contains("a&lt;b &amp; c"));
        assert!(svg.contains("&lt;g&gt;"));
        assert!(!svg.contains("<g>"));
    }
}
