use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    Checker,
    VerticalStripes,
    HorizontalStripes,
    Diagonal,
    Dots,
    Grid,
}

impl Pattern {
    pub const ALL: [Pattern; 6] = [
        Pattern::Checker,
        Pattern::VerticalStripes,
        Pattern::HorizontalStripes,
        Pattern::Diagonal,
        Pattern::Dots,
        Pattern::Grid,
    ];
}

/// Procedural two-color face texture in face-local metric coordinates
/// (`s` rightward from the left edge, `t` downward from the top edge).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Texture {
    pub pattern: Pattern,
    pub primary: [u8; 3],
    pub secondary: [u8; 3],
    /// Pattern period in world units.
    pub period: f64,
}

impl Texture {
    pub fn checker(primary: [u8; 3], secondary: [u8; 3], period: f64) -> Self {
        Self {
            pattern: Pattern::Checker,
            primary,
            secondary,
            period,
        }
    }

    pub fn sample(&self, s: f64, t: f64) -> [u8; 3] {
        let p = self.period;
        let cell = |v: f64| (v / p).floor() as i64;
        let frac = |v: f64| v / p - (v / p).floor();
        let first = match self.pattern {
            Pattern::Checker => (cell(s) + cell(t)).rem_euclid(2) == 0,
            Pattern::VerticalStripes => cell(s).rem_euclid(2) == 0,
            Pattern::HorizontalStripes => cell(t).rem_euclid(2) == 0,
            Pattern::Diagonal => cell(s + t).rem_euclid(2) == 0,
            Pattern::Dots => {
                let (du, dv) = (frac(s) - 0.5, frac(t) - 0.5);
                du * du + dv * dv > 0.09
            }
            Pattern::Grid => frac(s) > 0.15 && frac(t) > 0.15,
        };
        if first {
            self.primary
        } else {
            self.secondary
        }
    }
}

/// Two fully saturated-ish colors for a hue in degrees.
pub(crate) fn palette(hue_deg: f64, jitter: f64) -> ([u8; 3], [u8; 3]) {
    let primary = hsv(hue_deg + jitter, 0.75, 0.9);
    let secondary = hsv(hue_deg + 25.0 + jitter, 0.55, 0.45);
    (primary, secondary)
}

fn hsv(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|ch| ((ch + m) * 255.0).round().clamp(0.0, 255.0) as u8)
}
