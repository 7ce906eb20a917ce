//! Minimal static SVG rendering of a transmission profile: axes, tick
//! labels, and a single polyline. No external plotting dependency.

use std::io::Write;

use crate::error::Result;
use crate::spectral::TransmissionProfile;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;

/// Write an SVG line plot of intensity versus wavelength detuning (pm from
/// the grid center).
pub fn write_profile_svg<W: Write>(
    profile: &TransmissionProfile,
    title: &str,
    mut w: W,
) -> Result<()> {
    let center = profile.grid().center();
    let xs: Vec<f64> = profile
        .grid()
        .wavelengths()
        .iter()
        .map(|&l| (l - center) * 1e12)
        .collect();
    let ys = profile.intensity();
    let x_min = xs.first().copied().unwrap_or(0.0);
    let x_max = xs.last().copied().unwrap_or(1.0);
    let y_max = ys.iter().cloned().fold(0.0f64, f64::max).max(1e-300);

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min).max(1e-300) * plot_w;
    let py = |y: f64| MARGIN_T + (1.0 - y / y_max) * plot_h;

    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    )?;
    writeln!(w, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>")?;
    writeln!(
        w,
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"16\">{}</text>",
        WIDTH / 2.0,
        xml_escape(title)
    )?;
    // axes
    writeln!(
        w,
        "<line x1=\"{MARGIN_L}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    )?;
    writeln!(
        w,
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{:.1}\" stroke=\"black\"/>",
        HEIGHT - MARGIN_B
    )?;
    // tick labels
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let x = x_min + frac * (x_max - x_min);
        writeln!(
            w,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"12\">{:.3}</text>",
            px(x),
            HEIGHT - MARGIN_B + 20.0,
            x
        )?;
        let y = frac * y_max;
        writeln!(
            w,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"12\">{:.2}</text>",
            MARGIN_L - 8.0,
            py(y) + 4.0,
            y
        )?;
    }
    writeln!(
        w,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\">detuning (pm)</text>",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 15.0
    )?;
    writeln!(
        w,
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\" transform=\"rotate(-90 18 {:.1})\">intensity</text>",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    )?;
    // data polyline
    write!(w, "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1\" points=\"")?;
    for (x, y) in xs.iter().zip(ys) {
        write!(w, "{:.2},{:.2} ", px(*x), py(*y))?;
    }
    writeln!(w, "\"/>")?;
    writeln!(w, "</svg>")?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;

    #[test]
    fn svg_contains_polyline_and_title() {
        let grid = make_grid(1.55e-6, 10e-12, 32).unwrap();
        let y: Vec<f64> = (0..32).map(|i| i as f64 / 31.0).collect();
        let profile = TransmissionProfile::new(grid, y);
        let mut buf = Vec::new();
        write_profile_svg(&profile, "ramp <test>", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.contains("<polyline"));
        assert!(text.contains("ramp &lt;test&gt;"));
        assert!(text.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn svg_output_is_deterministic() {
        let grid = make_grid(1.55e-6, 10e-12, 64).unwrap();
        let y: Vec<f64> = (0..64).map(|i| ((i as f64) * 0.3).sin().abs()).collect();
        let profile = TransmissionProfile::new(grid, y);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_profile_svg(&profile, "p", &mut a).unwrap();
        write_profile_svg(&profile, "p", &mut b).unwrap();
        assert_eq!(a, b);
    }
}
