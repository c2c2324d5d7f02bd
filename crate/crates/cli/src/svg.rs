//! Minimal static SVG heatmaps of coefficient magnitudes.

use std::fmt::Write;

use ndarray::Array2;

const CELL: usize = 14;
const LABEL_WIDTH: usize = 130;
const GAP: usize = 30;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One panel per matrix, laid out left to right. Shade is proportional to the
/// magnitude relative to the largest entry across all panels.
pub fn heatmap(
    panels: &[(String, &Array2<f64>, &[String])],
    row_labels: &[String],
    comment: &str,
) -> String {
    let peak = panels
        .iter()
        .flat_map(|(_, m, _)| m.iter())
        .fold(0.0f64, |a, &v| a.max(v.abs()));
    let rows = row_labels.len();
    let top = 20 + LABEL_WIDTH;
    let width = LABEL_WIDTH
        + panels.iter().map(|(_, m, _)| m.ncols() * CELL + GAP).sum::<usize>();
    let height = top + rows * CELL + 10;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(svg, "<!-- {} -->", comment.replace("--", "- -"));
    for (i, label) in row_labels.iter().enumerate() {
        let y = top + i * CELL + CELL - 3;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#,
            LABEL_WIDTH - 4,
            escape(label)
        );
    }
    let mut x0 = LABEL_WIDTH;
    for (title, matrix, col_labels) in panels {
        let _ = writeln!(svg, r#"<text x="{x0}" y="12" font-weight="bold">{}</text>"#, escape(title));
        for (j, label) in col_labels.iter().enumerate() {
            let x = x0 + j * CELL + CELL - 4;
            let _ = writeln!(
                svg,
                r#"<text transform="translate({x},{}) rotate(-90)">{}</text>"#,
                top - 4,
                escape(label)
            );
        }
        for ((i, j), &v) in matrix.indexed_iter() {
            let shade = if peak > 0.0 { v.abs() / peak } else { 0.0 };
            let level = (255.0 * (1.0 - shade)).round() as u8;
            let _ = writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="rgb({level},{level},255)" stroke="white"/>"#,
                x0 + j * CELL,
                top + i * CELL
            );
        }
        x0 += matrix.ncols() * CELL + GAP;
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_rect_per_entry_and_escaped_labels() {
        let m = array![[0.0, 1.0], [0.5, 0.0]];
        let labels = vec!["a<b".to_string(), "c".to_string()];
        let svg = heatmap(&[("lag 1".into(), &m, &labels)], &labels, "cfg");
        assert_eq!(svg.matches("<rect").count(), 4);
        assert!(svg.contains("a&lt;b"));
        assert!(svg.contains("rgb(0,0,255)"));
        assert!(svg.contains("rgb(255,255,255)"));
    }
}
