use std::fmt::Write;

/// Pixel coordinate: fixed 10 decimals.
pub(crate) fn px(v: f64) -> String {
    let s = format!("{v:.10}");
    if s == "-0.0000000000" { "0.0000000000".into() } else { s }
}

pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Plot area with an affine data-to-pixel map `px = ox + sx·x`, `py = oy + sy·y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub sx: f64,
    pub ox: f64,
    pub sy: f64,
    pub oy: f64,
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi > lo {
        let pad = 0.04 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let d = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - d, hi + d)
    }
}

pub(crate) fn range_of<'a>(values: impl IntoIterator<Item = &'a f64>) -> (f64, f64) {
    values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

impl Frame {
    const MARGIN: (f64, f64, f64, f64) = (62.0, 16.0, 30.0, 44.0);

    /// Padded data ranges stretched over the whole plot area.
    pub fn new(width: f64, height: f64, x: (f64, f64), y: (f64, f64)) -> Frame {
        let (l, r, t, b) = Self::MARGIN;
        let (x, y) = (widen(x.0, x.1), widen(y.0, y.1));
        let (w, h) = (width - l - r, height - t - b);
        let sx = w / (x.1 - x.0);
        let sy = -h / (y.1 - y.0);
        Frame { left: l, top: t, width: w, height: h, x, y, sx, ox: l - sx * x.0, sy, oy: t + h - sy * y.0 }
    }

    /// Same scale on both axes, centred in the plot area.
    pub fn equal_aspect(width: f64, height: f64, x: (f64, f64), y: (f64, f64)) -> Frame {
        let (l, r, t, b) = Self::MARGIN;
        let (x, y) = (widen(x.0, x.1), widen(y.0, y.1));
        let (w, h) = (width - l - r, height - t - b);
        let s = (w / (x.1 - x.0)).min(h / (y.1 - y.0));
        let (cx, cy) = (0.5 * (x.0 + x.1), 0.5 * (y.0 + y.1));
        let x = (cx - 0.5 * w / s, cx + 0.5 * w / s);
        let y = (cy - 0.5 * h / s, cy + 0.5 * h / s);
        Frame { left: l, top: t, width: w, height: h, x, y, sx: s, ox: l - s * x.0, sy: -s, oy: t + h + s * y.0 }
    }

    pub fn px(&self, x: f64) -> f64 {
        self.ox + self.sx * x
    }

    pub fn py(&self, y: f64) -> f64 {
        self.oy + self.sy * y
    }
}

/// Roughly five round tick positions inside `[lo, hi]`, with the decimals needed to print them.
pub(crate) fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return (vec![lo], 2);
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), decimals)
}

pub(crate) struct Svg {
    buf: String,
}

impl Svg {
    pub fn new(width: f64, height: f64, title: &str) -> Svg {
        let mut buf = String::new();
        let _ = writeln!(
            buf,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">",
            w = px(width),
            h = px(height)
        );
        let _ = writeln!(buf, "<rect width=\"{}\" height=\"{}\" fill=\"white\"/>", px(width), px(height));
        let _ = writeln!(
            buf,
            "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
            px(width / 2.0),
            escape(title)
        );
        Svg { buf }
    }

    /// Axes, ticks and labels, then opens the data group carrying the affine map.
    pub fn begin_plot(&mut self, f: &Frame, xlabel: &str, ylabel: &str) {
        let b = &mut self.buf;
        let _ = writeln!(
            b,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444444\"/>",
            px(f.left),
            px(f.top),
            px(f.width),
            px(f.height)
        );
        let bottom = f.top + f.height;
        let (xt, xd) = ticks(f.x.0, f.x.1);
        for t in xt {
            let x = f.px(t);
            let _ = writeln!(b, "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#444444\"/>", px(x), px(bottom), px(bottom + 4.0));
            let _ = writeln!(b, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.*}</text>", px(x), px(bottom + 15.0), xd, t);
        }
        let (yt, yd) = ticks(f.y.0, f.y.1);
        for t in yt {
            let y = f.py(t);
            let _ = writeln!(b, "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#444444\"/>", px(f.left - 4.0), px(y), px(f.left));
            let _ = writeln!(b, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.*}</text>", px(f.left - 6.0), px(y + 4.0), yd, t);
        }
        let _ = writeln!(
            b,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            px(f.left + f.width / 2.0),
            px(bottom + 32.0),
            escape(xlabel)
        );
        let _ = writeln!(
            b,
            "<text transform=\"translate(14 {}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
            px(f.top + f.height / 2.0),
            escape(ylabel)
        );
        let _ = writeln!(
            b,
            "<clipPath id=\"plot-area\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/></clipPath>",
            px(f.left),
            px(f.top),
            px(f.width),
            px(f.height)
        );
        let _ = writeln!(
            b,
            "<g class=\"data\" clip-path=\"url(#plot-area)\" data-sx=\"{}\" data-ox=\"{}\" data-sy=\"{}\" data-oy=\"{}\">",
            f.sx, f.ox, f.sy, f.oy
        );
    }

    pub fn end_plot(&mut self) {
        self.buf.push_str("</g>\n");
    }

    pub fn polyline(&mut self, class: &str, points: &[(f64, f64)], stroke: &str, width: f64, dash: bool) {
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("{},{}", px(*x), px(*y))).collect();
        let _ = writeln!(
            self.buf,
            "<polyline class=\"{class}\" points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{}\"{}/>",
            pts.join(" "),
            px(width),
            if dash { " stroke-dasharray=\"4 3\"" } else { "" }
        );
    }

    pub fn line(&mut self, class: &str, a: (f64, f64), b: (f64, f64), stroke: &str, width: f64) {
        let _ = writeln!(
            self.buf,
            "<line class=\"{class}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\" stroke-width=\"{}\"/>",
            px(a.0),
            px(a.1),
            px(b.0),
            px(b.1),
            px(width)
        );
    }

    pub fn circle(&mut self, class: &str, c: (f64, f64), r: f64, fill: &str, stroke: &str) {
        let _ = writeln!(
            self.buf,
            "<circle class=\"{class}\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{fill}\" stroke=\"{stroke}\"/>",
            px(c.0),
            px(c.1),
            px(r)
        );
    }

    pub fn rect(&mut self, class: &str, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.buf,
            "<rect class=\"{class}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\" shape-rendering=\"crispEdges\"/>",
            px(x),
            px(y),
            px(w),
            px(h)
        );
    }

    /// Cross of half-size `r` centred on `c`.
    pub fn cross(&mut self, class: &str, c: (f64, f64), r: f64, stroke: &str) {
        let _ = writeln!(
            self.buf,
            "<path class=\"{class}\" d=\"M{} {}L{} {}M{} {}L{} {}\" stroke=\"{stroke}\"/>",
            px(c.0 - r),
            px(c.1 - r),
            px(c.0 + r),
            px(c.1 + r),
            px(c.0 - r),
            px(c.1 + r),
            px(c.0 + r),
            px(c.1 - r)
        );
    }

    pub fn path(&mut self, class: &str, rings: &[Vec<(f64, f64)>], stroke: &str, width: f64) {
        let mut d = String::new();
        for ring in rings {
            for (k, (x, y)) in ring.iter().enumerate() {
                let _ = write!(d, "{}{} {}", if k == 0 { "M" } else { "L" }, px(*x), px(*y));
            }
            d.push('Z');
        }
        let _ = writeln!(
            self.buf,
            "<path class=\"{class}\" d=\"{d}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{}\"/>",
            px(width)
        );
    }

    pub fn text(&mut self, x: f64, y: f64, anchor: &str, fill: &str, text: &str) {
        let _ = writeln!(
            self.buf,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\" fill=\"{fill}\">{}</text>",
            px(x),
            px(y),
            escape(text)
        );
    }

    pub fn finish(mut self) -> String {
        self.buf.push_str("</svg>\n");
        self.buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_maps_corners() {
        let f = Frame::new(400.0, 300.0, (0.0, 10.0), (-1.0, 1.0));
        assert!(f.px(f.x.0) - f.left < 1e-12);
        assert!((f.py(f.y.0) - (f.top + f.height)).abs() < 1e-9);
        let e = Frame::equal_aspect(400.0, 300.0, (0.0, 10.0), (0.0, 1.0));
        assert_eq!(e.sx, -e.sy);
    }

    #[test]
    fn tick_steps() {
        let (t, d) = ticks(0.0, 1.0);
        assert_eq!(t.len(), 6);
        assert_eq!(d, 1);
        assert_eq!(ticks(0.0, 1000.0).1, 0);
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }
}
