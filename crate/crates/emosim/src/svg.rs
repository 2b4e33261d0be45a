//! Small SVG writer for the analysis reports. Shape primitives plus a panel
//! abstraction that maps data coordinates onto a framed, ticked plot area.
//! Nothing here aims to be a plotting library; it renders exactly the line,
//! scatter and bar figures the reports need.

use std::fmt::Write;

pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

// Coordinates are rounded to 0.01 px to keep files compact.
fn px(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Svg {
        let mut body = String::new();
        let _ = write!(
            body,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
             viewBox=\"0 0 {width} {height}\">\n\
             <rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>\n"
        );
        Svg { width, height, body }
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\" stroke-width=\"{width}\"/>",
            px(x1),
            px(y1),
            px(x2),
            px(y2)
        );
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\"/>",
            px(x),
            px(y),
            px(w),
            px(h)
        );
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            "<circle cx=\"{}\" cy=\"{}\" r=\"{r}\" fill=\"{fill}\"/>",
            px(cx),
            px(cy)
        );
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64) {
        if pts.len() < 2 {
            return;
        }
        let mut points = String::new();
        for (x, y) in pts {
            let _ = write!(points, "{},{} ", px(*x), px(*y));
        }
        let _ = writeln!(
            self.body,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{width}\"/>",
            points.trim_end()
        );
    }

    /// `anchor` is an SVG text-anchor value: start, middle or end.
    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str) {
        let _ = writeln!(
            self.body,
            "<text x=\"{}\" y=\"{}\" font-size=\"{size}\" font-family=\"sans-serif\" \
             text-anchor=\"{anchor}\" fill=\"#222222\">{}</text>",
            px(x),
            px(y),
            esc(content)
        );
    }

    pub fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

/// A framed plot area at a fixed pixel rectangle with its own data ranges.
/// Several panels can share one canvas for multi-plot figures.
#[derive(Debug, Clone, Copy)]
pub struct Panel {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (0.01..10000.0).contains(&a) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.2e}")
    }
}

impl Panel {
    /// Degenerate ranges are widened so mapping stays finite.
    pub fn new(x: f64, y: f64, w: f64, h: f64, xr: (f64, f64), yr: (f64, f64)) -> Panel {
        let (x_min, mut x_max) = xr;
        let (mut y_min, mut y_max) = yr;
        if x_max <= x_min {
            x_max = x_min + 1.0;
        }
        if y_max <= y_min {
            let pad = if y_min == 0.0 { 1.0 } else { y_min.abs() * 0.1 };
            y_min -= pad;
            y_max = y_min + 2.0 * pad;
        }
        Panel { x, y, w, h, x_min, x_max, y_min, y_max }
    }

    pub fn map(&self, dx: f64, dy: f64) -> (f64, f64) {
        let fx = (dx - self.x_min) / (self.x_max - self.x_min);
        let fy = (dy - self.y_min) / (self.y_max - self.y_min);
        (self.x + fx * self.w, self.y + self.h - fy * self.h)
    }

    pub fn frame(&self, svg: &mut Svg, title: &str, x_label: &str, y_label: &str) {
        svg.text(self.x + self.w / 2.0, self.y - 8.0, 13.0, "middle", title);
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let dx = self.x_min + f * (self.x_max - self.x_min);
            let dy = self.y_min + f * (self.y_max - self.y_min);
            let (tx, _) = self.map(dx, self.y_min);
            let (_, ty) = self.map(self.x_min, dy);
            svg.line(tx, self.y + self.h, tx, self.y + self.h + 4.0, "#444444", 1.0);
            svg.text(tx, self.y + self.h + 16.0, 10.0, "middle", &tick_label(dx));
            svg.line(self.x - 4.0, ty, self.x, ty, "#444444", 1.0);
            svg.text(self.x - 6.0, ty + 3.5, 10.0, "end", &tick_label(dy));
            if k > 0 && k < 4 {
                svg.line(self.x, ty, self.x + self.w, ty, "#eeeeee", 0.5);
            }
        }
        svg.text(self.x + self.w / 2.0, self.y + self.h + 30.0, 11.0, "middle", x_label);
        svg.text(self.x - 48.0, self.y - 8.0, 11.0, "start", y_label);
        // Frame drawn last so it sits above the grid lines.
        svg.line(self.x, self.y, self.x, self.y + self.h, "#444444", 1.0);
        svg.line(self.x, self.y + self.h, self.x + self.w, self.y + self.h, "#444444", 1.0);
        svg.line(self.x + self.w, self.y, self.x + self.w, self.y + self.h, "#444444", 1.0);
        svg.line(self.x, self.y, self.x + self.w, self.y, "#444444", 1.0);
    }

    pub fn polyline(&self, svg: &mut Svg, pts: &[(f64, f64)], color: &str, width: f64) {
        let mapped: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| self.map(x, y)).collect();
        svg.polyline(&mapped, color, width);
    }

    pub fn scatter(&self, svg: &mut Svg, pts: &[(f64, f64)], color: &str, r: f64) {
        for &(x, y) in pts {
            let (cx, cy) = self.map(x, y);
            svg.circle(cx, cy, r, color);
        }
    }

    /// Vertical bar from the panel's y floor up to `top`, centered at `cx`.
    pub fn vbar(&self, svg: &mut Svg, cx: f64, width: f64, top: f64, color: &str) {
        let (px0, py_top) = self.map(cx, top);
        let (_, py_base) = self.map(cx, self.y_min);
        let px_l = px0 - self.map_width(width) / 2.0;
        svg.rect(px_l, py_top, self.map_width(width), py_base - py_top, color);
    }

    fn map_width(&self, data_w: f64) -> f64 {
        data_w / (self.x_max - self.x_min) * self.w
    }

    pub fn legend(&self, svg: &mut Svg, entries: &[(&str, &str)]) {
        let mut ly = self.y + 12.0;
        for (label, color) in entries {
            svg.rect(self.x + self.w - 86.0, ly - 8.0, 10.0, 10.0, color);
            svg.text(self.x + self.w - 72.0, ly, 10.0, "start", label);
            ly += 14.0;
        }
    }
}

/// Data range of one series with a small margin, for panel construction.
pub fn value_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        return (0.0, 1.0);
    }
    let pad = 0.05 * (hi - lo).max(1e-9);
    (lo - pad, hi + pad)
}
