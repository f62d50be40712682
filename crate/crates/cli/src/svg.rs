//! Minimal deterministic SVG line charts on a daily date axis with a [0, 1]
//! value axis. Coordinates are printed with two decimals.

use std::fmt::Write as _;

use bsts_core::DateStamp;

pub const MARKET_COLOR: &str = "#1f5fbf";
pub const POLL_COLOR: &str = "#c0392b";
pub const FIT_COLOR: &str = "#2c7a3f";

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 40.0;
const MONTHS: [&str; 12] = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"];

/// One chart under construction. Layers are drawn in insertion order.
pub struct Chart {
    start: DateStamp,
    end: DateStamp,
    body: String,
    legend: Vec<(String, String, bool)>,
    title: String,
}

impl Chart {
    pub fn new(title: &str, start: DateStamp, end: DateStamp) -> Self {
        Chart { start, end, body: String::new(), legend: Vec::new(), title: title.to_string() }
    }

    fn x(&self, d: DateStamp) -> f64 {
        let span = self.start.days_until(self.end).max(1) as f64;
        LEFT + (WIDTH - LEFT - RIGHT) * self.start.days_until(d) as f64 / span
    }

    fn y(&self, v: f64) -> f64 {
        TOP + (HEIGHT - TOP - BOTTOM) * (1.0 - v.clamp(0.0, 1.0))
    }

    /// Polyline broken at missing values.
    pub fn line(&mut self, points: &[(DateStamp, Option<f64>)], color: &str, width: f64, label: Option<&str>) {
        let mut run: Vec<(f64, f64)> = Vec::new();
        let mut runs = Vec::new();
        for (d, v) in points {
            match v {
                Some(v) => run.push((self.x(*d), self.y(*v))),
                None if !run.is_empty() => runs.push(std::mem::take(&mut run)),
                None => {}
            }
        }
        if !run.is_empty() {
            runs.push(run);
        }
        for r in runs {
            if r.len() == 1 {
                let (x, y) = r[0];
                let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.6" fill="{color}"/>"#);
                continue;
            }
            let pts: Vec<String> = r.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                self.body,
                r#"<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{}"/>"#,
                pts.join(" ")
            );
        }
        if let Some(l) = label {
            self.legend.push((l.to_string(), color.to_string(), false));
        }
    }

    pub fn dots(&mut self, points: &[(DateStamp, f64)], color: &str, label: Option<&str>) {
        for (d, v) in points {
            let _ = writeln!(
                self.body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="{color}" fill-opacity="0.7"/>"#,
                self.x(*d),
                self.y(*v)
            );
        }
        if let Some(l) = label {
            self.legend.push((l.to_string(), color.to_string(), false));
        }
    }

    /// Filled band between `lower` and `upper`; `(date, lower, upper)`.
    pub fn band(&mut self, points: &[(DateStamp, f64, f64)], color: &str, opacity: f64, label: Option<&str>) {
        if points.is_empty() {
            return;
        }
        let mut pts: Vec<String> = points.iter().map(|(d, _, u)| format!("{:.2},{:.2}", self.x(*d), self.y(*u))).collect();
        pts.extend(points.iter().rev().map(|(d, l, _)| format!("{:.2},{:.2}", self.x(*d), self.y(*l))));
        let _ = writeln!(
            self.body,
            r#"<polygon fill="{color}" fill-opacity="{opacity}" stroke="none" points="{}"/>"#,
            pts.join(" ")
        );
        if let Some(l) = label {
            self.legend.push((l.to_string(), color.to_string(), true));
        }
    }

    pub fn vertical_marker(&mut self, d: DateStamp, color: &str) {
        let x = self.x(d);
        let _ = writeln!(
            self.body,
            r#"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}" stroke-width="0.6" stroke-dasharray="2,3"/>"#,
            HEIGHT - BOTTOM
        );
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{LEFT}" y="20" font-size="14">{}</text>"#, escape(&self.title));
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        for k in 0..=4 {
            let v = k as f64 * 0.25;
            let y = self.y(v);
            let _ = writeln!(s, r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#e4e4e4"/>"##);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#, x0 - 6.0, y + 4.0);
        }
        let mut d = self.start;
        while d <= self.end {
            if d.day() == 1 {
                let x = self.x(d);
                let _ = writeln!(
                    s,
                    r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#999"/>"##,
                    HEIGHT - BOTTOM,
                    HEIGHT - BOTTOM + 5.0
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                    HEIGHT - BOTTOM + 18.0,
                    MONTHS[d.month() as usize - 1]
                );
            }
            d = d.succ();
        }
        s.push_str(&self.body);
        let y = self.y(0.5);
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="black" stroke-width="1" stroke-dasharray="6,4"/>"#
        );
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#666"/>"##,
            x1 - x0,
            HEIGHT - TOP - BOTTOM
        );
        for (i, (label, color, filled)) in self.legend.iter().enumerate() {
            let ly = TOP + 10.0 + 18.0 * i as f64;
            let lx = WIDTH - RIGHT + 12.0;
            if *filled {
                let _ = writeln!(
                    s,
                    r#"<rect x="{lx:.2}" y="{:.2}" width="16" height="8" fill="{color}" fill-opacity="0.3"/>"#,
                    ly - 4.0
                );
            } else {
                let _ = writeln!(
                    s,
                    r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
                    lx + 16.0
                );
            }
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 22.0, ly + 4.0, escape(label));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
