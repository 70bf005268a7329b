//! Landolt rings and Sloan letters: the two stimulus alphabets of the matching task.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Gap direction of a Landolt ring, one of eight 45° steps counterclockwise
/// from "gap to the right".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct Orientation(u8);

impl Orientation {
    pub const COUNT: usize = 8;

    pub fn from_index(index: usize) -> Option<Self> {
        (index < Self::COUNT).then_some(Self(index as u8))
    }

    pub fn all() -> impl Iterator<Item = Orientation> {
        (0..Self::COUNT as u8).map(Orientation)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn degrees(self) -> u16 {
        self.0 as u16 * 45
    }
}

impl TryFrom<u16> for Orientation {
    type Error = String;
    fn try_from(deg: u16) -> Result<Self, Self::Error> {
        if deg % 45 == 0 && deg < 360 {
            Ok(Self((deg / 45) as u8))
        } else {
            Err(format!(
                "Landolt orientation must be a multiple of 45 below 360, got {deg}"
            ))
        }
    }
}

impl From<Orientation> for u16 {
    fn from(o: Orientation) -> u16 {
        o.degrees()
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.degrees())
    }
}

/// The eight Sloan letters used by the task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SloanLetter {
    C,
    D,
    H,
    K,
    N,
    O,
    R,
    S,
}

impl SloanLetter {
    pub const ALL: [SloanLetter; 8] = [
        SloanLetter::C,
        SloanLetter::D,
        SloanLetter::H,
        SloanLetter::K,
        SloanLetter::N,
        SloanLetter::O,
        SloanLetter::R,
        SloanLetter::S,
    ];

    pub fn as_char(self) -> char {
        match self {
            SloanLetter::C => 'C',
            SloanLetter::D => 'D',
            SloanLetter::H => 'H',
            SloanLetter::K => 'K',
            SloanLetter::N => 'N',
            SloanLetter::O => 'O',
            SloanLetter::R => 'R',
            SloanLetter::S => 'S',
        }
    }

    fn bitmap(self) -> [u8; 5] {
        // 5x5 design grid, top row first, MSB is the left column
        match self {
            SloanLetter::C => [0b01110, 0b10001, 0b10000, 0b10001, 0b01110],
            SloanLetter::D => [0b11110, 0b10001, 0b10001, 0b10001, 0b11110],
            SloanLetter::H => [0b10001, 0b10001, 0b11111, 0b10001, 0b10001],
            SloanLetter::K => [0b10001, 0b10010, 0b11100, 0b10010, 0b10001],
            SloanLetter::N => [0b10001, 0b11001, 0b10101, 0b10011, 0b10001],
            SloanLetter::O => [0b01110, 0b10001, 0b10001, 0b10001, 0b01110],
            SloanLetter::R => [0b11110, 0b10001, 0b11110, 0b10010, 0b10001],
            SloanLetter::S => [0b01111, 0b10000, 0b01110, 0b00001, 0b11110],
        }
    }
}

impl fmt::Display for SloanLetter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for SloanLetter {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SloanLetter::ALL
            .into_iter()
            .find(|l| s.len() == 1 && s.starts_with(l.as_char()))
            .ok_or_else(|| format!("not a task Sloan letter: {s:?}"))
    }
}

/// Whether the point `(u, v)` of a glyph box is ink for a Landolt ring.
///
/// The box spans [-0.5, 0.5] on both axes with `v` pointing up; the ring has
/// outer diameter 5 gap widths and stroke and gap of one width each.
pub fn landolt_covers(orientation: Orientation, u: f64, v: f64) -> bool {
    let r = u.hypot(v);
    if !(0.3..=0.5).contains(&r) {
        return false;
    }
    let theta = (orientation.degrees() as f64).to_radians();
    let (s, c) = theta.sin_cos();
    let along = u * c + v * s;
    let across = -u * s + v * c;
    !(along > 0.0 && across.abs() < 0.1)
}

/// Whether `(u, v)` is ink for a Sloan letter on its 5x5 design grid.
pub fn sloan_covers(letter: SloanLetter, u: f64, v: f64) -> bool {
    if !(-0.5..0.5).contains(&u) || !(-0.5..0.5).contains(&v) {
        return false;
    }
    let col = ((u + 0.5) * 5.0).floor() as usize;
    let row = ((0.5 - v) * 5.0).floor().min(4.0) as usize;
    letter.bitmap()[row] & (0b10000 >> col) != 0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_degrees_roundtrip() {
        let all: Vec<u16> = Orientation::all().map(u16::from).collect();
        assert_eq!(all, vec![0, 45, 90, 135, 180, 225, 270, 315]);
        assert!(Orientation::try_from(30).is_err());
        assert!(Orientation::try_from(360).is_err());
        assert_eq!(
            serde_json::to_string(&Orientation::try_from(90).unwrap()).unwrap(),
            "90"
        );
    }

    #[test]
    fn letters_parse() {
        for l in SloanLetter::ALL {
            assert_eq!(l.to_string().parse::<SloanLetter>(), Ok(l));
        }
        assert!("Z".parse::<SloanLetter>().is_err());
        assert!("CD".parse::<SloanLetter>().is_err());
    }

    #[test]
    fn landolt_gap_points_the_right_way() {
        let right = Orientation::from_index(0).unwrap();
        let up = Orientation::from_index(2).unwrap();
        assert!(!landolt_covers(right, 0.4, 0.0));
        assert!(landolt_covers(right, -0.4, 0.0));
        assert!(landolt_covers(right, 0.0, 0.4));
        assert!(!landolt_covers(up, 0.0, 0.4));
        assert!(landolt_covers(up, 0.4, 0.0));
        // hole in the middle
        assert!(!landolt_covers(up, 0.0, 0.0));
    }

    #[test]
    fn glyphs_are_distinct() {
        let sample = |l: SloanLetter| {
            let mut bits = Vec::new();
            for r in 0..5 {
                for c in 0..5 {
                    let u = (c as f64 + 0.5) / 5.0 - 0.5;
                    let v = 0.5 - (r as f64 + 0.5) / 5.0;
                    bits.push(sloan_covers(l, u, v));
                }
            }
            bits
        };
        for (i, a) in SloanLetter::ALL.iter().enumerate() {
            for b in &SloanLetter::ALL[i + 1..] {
                assert_ne!(sample(*a), sample(*b), "{a} vs {b}");
            }
        }
        assert!(!sloan_covers(SloanLetter::H, 0.7, 0.0));
    }
}
