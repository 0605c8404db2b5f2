//! Headless line-plot renderer producing PNG bytes.
//!
//! Style is fixed so image-mode runs are reproducible:
//!
//! * each series gets an 800×400 panel; two series are stacked vertically
//!   and labeled "Time Series 1" and "Time Series 2"
//! * white background, plot area inset 80 px left, 20 px right, 30 px top
//!   and 40 px bottom, light grid at every tick, dark axes on the left and
//!   bottom edges
//! * ticks follow the 1-2-5 "nice number" policy (about five per axis);
//!   labels use a built-in 5×7 bitmap font drawn at 2× scale
//! * the series is a 2 px polyline in RGB (31, 119, 180); no title
//!
//! Only integer pixel arithmetic follows the float-to-pixel mapping, so
//! identical inputs give identical bytes.

use tsexam_core::synth::TimeSeries;

pub const PANEL_WIDTH: u32 = 800;
pub const PANEL_HEIGHT: u32 = 400;
const LEFT: i64 = 80;
const RIGHT: i64 = 20;
const TOP: i64 = 30;
const BOTTOM: i64 = 40;
const SCALE: i64 = 2;
const TARGET_TICKS: f64 = 5.0;

const WHITE: [u8; 3] = [255, 255, 255];
const GRID: [u8; 3] = [225, 225, 225];
const AXIS: [u8; 3] = [60, 60, 60];
const TEXT: [u8; 3] = [30, 30, 30];
const LINE: [u8; 3] = [31, 119, 180];

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("plot needs one or two nonempty series, got {0}")]
    SeriesCount(usize),
    #[error("series {0} is empty")]
    Empty(usize),
    #[error("series {0} has a non-finite value")]
    NonFinite(usize),
    #[error("png encoding failed: {0}")]
    Encode(String),
}

struct Canvas {
    width: i64,
    height: i64,
    data: Vec<u8>,
}

impl Canvas {
    fn new(width: u32, height: u32) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            data.extend_from_slice(&WHITE);
        }
        Canvas { width: width as i64, height: height as i64, data }
    }

    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x < 0 || y < 0 || x >= self.width || y >= self.height {
            return;
        }
        let i = ((y * self.width + x) * 3) as usize;
        self.data[i..i + 3].copy_from_slice(&c);
    }

    fn hline(&mut self, x0: i64, x1: i64, y: i64, c: [u8; 3]) {
        for x in x0.min(x1)..=x0.max(x1) {
            self.put(x, y, c);
        }
    }

    fn vline(&mut self, x: i64, y0: i64, y1: i64, c: [u8; 3]) {
        for y in y0.min(y1)..=y0.max(y1) {
            self.put(x, y, c);
        }
    }

    /// Bresenham with a 2×2 pen.
    fn line(&mut self, (mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64), c: [u8; 3]) {
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            for (ox, oy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                self.put(x0 + ox, y0 + oy, c);
            }
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }

    fn text(&mut self, x: i64, y: i64, s: &str, c: [u8; 3]) {
        for (k, ch) in s.chars().enumerate() {
            let rows = glyph(ch);
            let gx = x + k as i64 * 6 * SCALE;
            for (r, bits) in rows.iter().enumerate() {
                for col in 0..5 {
                    if bits & (0x10 >> col) != 0 {
                        for sy in 0..SCALE {
                            for sx in 0..SCALE {
                                self.put(gx + col * SCALE + sx, y + r as i64 * SCALE + sy, c);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn text_width(s: &str) -> i64 {
    let n = s.chars().count() as i64;
    if n == 0 { 0 } else { n * 6 * SCALE - SCALE }
}

const GLYPH_HEIGHT: i64 = 7 * SCALE;

fn glyph(c: char) -> [u8; 7] {
    match c {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'e' => [0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E],
        'i' => [0x04, 0x00, 0x0C, 0x04, 0x04, 0x04, 0x0E],
        'm' => [0x00, 0x00, 0x1A, 0x15, 0x15, 0x11, 0x11],
        'r' => [0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10],
        's' => [0x00, 0x00, 0x0E, 0x10, 0x0E, 0x01, 0x1E],
        _ => [0; 7],
    }
}

/// Rounds `x` to 1, 2, 5 or 10 times a power of ten.
fn nice_number(x: f64, round: bool) -> f64 {
    let exp = x.log10().floor();
    let f = x / 10f64.powf(exp);
    let nf = if round {
        if f < 1.5 {
            1.0
        } else if f < 3.0 {
            2.0
        } else if f < 7.0 {
            5.0
        } else {
            10.0
        }
    } else if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nf * 10f64.powf(exp)
}

/// Axis bounds, step, and label decimals covering `[lo, hi]`.
pub(crate) fn nice_axis(lo: f64, hi: f64) -> (f64, f64, f64, usize) {
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    };
    let range = nice_number(hi - lo, false);
    let step = nice_number(range / (TARGET_TICKS - 1.0), true);
    let start = (lo / step).floor() * step;
    let end = (hi / step).ceil() * step;
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    (start, end, step, decimals)
}

fn tick_values(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step).round() as i64;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

fn label(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn draw_panel(canvas: &mut Canvas, top: i64, values: &[f64], title: Option<&str>) {
    let x0 = LEFT;
    let x1 = PANEL_WIDTH as i64 - RIGHT;
    let y0 = top + TOP;
    let y1 = top + PANEL_HEIGHT as i64 - BOTTOM;
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (ys, ye, ystep, ydec) = nice_axis(lo, hi);
    let n = values.len();
    let (xs, xe, xstep, _) = nice_axis(0.0, (n.max(2) - 1) as f64);
    let xe = xe.max(xs + xstep);

    let px = |i: f64| x0 + ((i - xs) / (xe - xs) * (x1 - x0) as f64).round() as i64;
    let py = |v: f64| y1 - ((v - ys) / (ye - ys) * (y1 - y0) as f64).round() as i64;

    for t in tick_values(ys, ye, ystep) {
        let y = py(t);
        canvas.hline(x0, x1, y, GRID);
        canvas.hline(x0 - 5, x0, y, AXIS);
        let s = label(t, ydec);
        canvas.text(x0 - 10 - text_width(&s), y - GLYPH_HEIGHT / 2, &s, TEXT);
    }
    for t in tick_values(xs, xe, xstep) {
        let x = px(t);
        canvas.vline(x, y0, y1, GRID);
        canvas.vline(x, y1, y1 + 5, AXIS);
        let s = label(t, 0);
        canvas.text(x - text_width(&s) / 2, y1 + 12, &s, TEXT);
    }
    canvas.vline(x0, y0, y1, AXIS);
    canvas.hline(x0, x1, y1, AXIS);

    let points: Vec<(i64, i64)> = values.iter().enumerate().map(|(i, &v)| (px(i as f64), py(v))).collect();
    if let [only] = points[..] {
        canvas.line(only, only, LINE);
    }
    for w in points.windows(2) {
        canvas.line(w[0], w[1], LINE);
    }
    if let Some(t) = title {
        canvas.text(x0, top + (TOP - GLYPH_HEIGHT) / 2, t, TEXT);
    }
}

/// Renders one or two value sequences as stacked panels.
pub fn render_values(panels: &[&[f64]]) -> Result<Vec<u8>, PlotError> {
    if panels.is_empty() || panels.len() > 2 {
        return Err(PlotError::SeriesCount(panels.len()));
    }
    for (i, p) in panels.iter().enumerate() {
        if p.is_empty() {
            return Err(PlotError::Empty(i));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(PlotError::NonFinite(i));
        }
    }
    let height = PANEL_HEIGHT * panels.len() as u32;
    let mut canvas = Canvas::new(PANEL_WIDTH, height);
    let labeled = panels.len() > 1;
    for (i, p) in panels.iter().enumerate() {
        let title = labeled.then(|| format!("Time Series {}", i + 1));
        draw_panel(&mut canvas, i as i64 * PANEL_HEIGHT as i64, p, title.as_deref());
    }

    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, PANEL_WIDTH, height);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| PlotError::Encode(e.to_string()))?;
    writer.write_image_data(&canvas.data).map_err(|e| PlotError::Encode(e.to_string()))?;
    writer.finish().map_err(|e| PlotError::Encode(e.to_string()))?;
    Ok(out)
}

pub fn render_plot(series: &[TimeSeries]) -> Result<Vec<u8>, PlotError> {
    let panels: Vec<&[f64]> = series.iter().map(|s| s.values()).collect();
    render_values(&panels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nice_axis_covers_data() {
        let (s, e, step, dec) = nice_axis(-1.3, 2.7);
        assert_eq!((s, e, step, dec), (-2.0, 3.0, 1.0, 0));
        let (s, e, step, dec) = nice_axis(0.0, 127.0);
        assert_eq!((s, e, step, dec), (0.0, 150.0, 50.0, 0));
        let (s, e, _, dec) = nice_axis(0.12, 0.31);
        assert!(s <= 0.12 && e >= 0.31);
        assert_eq!(dec, 2);
    }

    #[test]
    fn constant_series_gets_a_range() {
        let (s, e, _, _) = nice_axis(3.0, 3.0);
        assert!(s < 3.0 && e > 3.0);
        assert!(render_values(&[&[0.0; 10]]).is_ok());
        assert!(render_values(&[&[5.0]]).is_ok());
    }

    #[test]
    fn labels_drop_negative_zero() {
        assert_eq!(label(-0.0, 1), "0.0");
        assert_eq!(label(-0.5, 1), "-0.5");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(render_values(&[]), Err(PlotError::SeriesCount(0))));
        assert!(matches!(render_values(&[&[]]), Err(PlotError::Empty(0))));
        assert!(matches!(render_values(&[&[1.0], &[f64::NAN]]), Err(PlotError::NonFinite(1))));
    }
}
