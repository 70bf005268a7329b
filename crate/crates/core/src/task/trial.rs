use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{SceneLayout, TaskConfig, TaskError};
use crate::optotype::{Orientation, SloanLetter};

/// Pairing shown on the table screen: column `i` holds the Landolt ring with
/// orientation `i` above the Sloan letter at `self.0[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ColumnTable([SloanLetter; 8]);

impl ColumnTable {
    pub fn new(letters: [SloanLetter; 8]) -> Result<Self, TaskError> {
        let mut seen = letters;
        seen.sort();
        if seen != SloanLetter::ALL {
            return Err(TaskError::Validation(
                "table must use each letter exactly once".into(),
            ));
        }
        Ok(Self(letters))
    }

    pub fn letter_for(&self, orientation: Orientation) -> SloanLetter {
        self.0[orientation.index()]
    }

    pub fn orientation_of(&self, letter: SloanLetter) -> Orientation {
        let i = self.0.iter().position(|&l| l == letter).expect("bijection");
        Orientation::from_index(i).expect("eight columns")
    }

    pub fn letters(&self) -> [SloanLetter; 8] {
        self.0
    }
}

impl fmt::Display for ColumnTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|l| write!(f, "{l}"))
    }
}

impl FromStr for ColumnTable {
    type Err = TaskError;
    fn from_str(s: &str) -> Result<Self, TaskError> {
        let letters: Vec<SloanLetter> = s
            .chars()
            .map(|c| c.to_string().parse().map_err(TaskError::Validation))
            .collect::<Result<_, _>>()?;
        let letters: [SloanLetter; 8] = letters
            .try_into()
            .map_err(|_| TaskError::Validation(format!("table {s:?} must have 8 letters")))?;
        Self::new(letters)
    }
}

impl TryFrom<String> for ColumnTable {
    type Error = TaskError;
    fn try_from(s: String) -> Result<Self, TaskError> {
        s.parse()
    }
}

impl From<ColumnTable> for String {
    fn from(t: ColumnTable) -> String {
        t.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Center,
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl Anchor {
    pub const CORNERS: [Anchor; 4] = [
        Anchor::TopLeft,
        Anchor::TopRight,
        Anchor::BottomLeft,
        Anchor::BottomRight,
    ];

    /// Unit-square direction of the anchor from the screen center.
    fn signs(self) -> (f64, f64) {
        match self {
            Anchor::Center => (0.0, 0.0),
            Anchor::TopLeft => (-1.0, 1.0),
            Anchor::TopRight => (1.0, 1.0),
            Anchor::BottomLeft => (-1.0, -1.0),
            Anchor::BottomRight => (1.0, -1.0),
        }
    }
}

/// Where a stimulus sits on its screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub anchor: Anchor,
    /// Offset of the stimulus center from the screen center (azimuth,
    /// elevation), degrees, anchor and jitter included.
    pub offset: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: u64,
    pub table_screen: usize,
    pub landolt_screen: usize,
    pub sloan_screen: usize,
    pub landolt_orientation: Orientation,
    pub sloan_letter: SloanLetter,
    pub table: ColumnTable,
    pub is_match: bool,
    pub landolt_placement: Placement,
    pub sloan_placement: Placement,
    /// Arcminutes.
    pub optotype_gap: f64,
}

/// Whether the two single stimuli share a table column.
pub fn ground_truth(trial: &Trial) -> bool {
    trial.table.letter_for(trial.landolt_orientation) == trial.sloan_letter
}

const JITTER_RETRIES: usize = 32;

/// Draws one trial. The draw order is fixed, so a seeded rng reproduces it.
pub fn generate_trial<R: Rng + ?Sized>(
    rng: &mut R,
    id: u64,
    layout: &SceneLayout,
    config: &TaskConfig,
) -> Result<Trial, TaskError> {
    layout.validate()?;
    config.validate()?;
    let n = layout.screens.len();

    let table_screen = rng.random_range(0..n);
    let mut rest: Vec<usize> = (0..n).filter(|&i| i != table_screen).collect();
    let landolt_screen = rest.swap_remove(rng.random_range(0..rest.len()));
    let sloan_screen = *rest.choose(rng).expect("at least one screen left");

    let landolt_orientation =
        Orientation::from_index(rng.random_range(0..Orientation::COUNT)).expect("in range");
    let mut letters = SloanLetter::ALL;
    letters.shuffle(rng);
    let table = ColumnTable(letters);
    let paired = table.letter_for(landolt_orientation);
    let sloan_letter = if rng.random_bool(0.5) {
        paired
    } else {
        let others: Vec<SloanLetter> = SloanLetter::ALL
            .into_iter()
            .filter(|&l| l != paired)
            .collect();
        *others.choose(rng).expect("seven others")
    };

    let landolt_placement = place(rng, layout, landolt_screen, config);
    let sloan_placement = place(rng, layout, sloan_screen, config);
    let trial = Trial {
        id,
        table_screen,
        landolt_screen,
        sloan_screen,
        landolt_orientation,
        sloan_letter,
        table,
        is_match: sloan_letter == paired,
        landolt_placement,
        sloan_placement,
        optotype_gap: config.optotype_gap,
    };
    debug_assert_eq!(trial.is_match, ground_truth(&trial));
    Ok(trial)
}

fn place<R: Rng + ?Sized>(
    rng: &mut R,
    layout: &SceneLayout,
    screen: usize,
    config: &TaskConfig,
) -> Placement {
    let (hw, hh) = layout.screens[screen].half_extents();
    let margin = 0.5 * config.glyph_size();
    let (lim_x, lim_y) = ((hw - margin).max(0.0), (hh - margin).max(0.0));

    let anchor = if rng.random_bool(config.p_center) {
        Anchor::Center
    } else {
        *Anchor::CORNERS.choose(rng).expect("four corners")
    };
    let (sx, sy) = anchor.signs();
    let base = [
        sx * config.corner_fraction * lim_x,
        sy * config.corner_fraction * lim_y,
    ];

    let mut offset = base;
    if config.jitter_sigma > 0.0 {
        let normal = Normal::new(0.0, config.jitter_sigma).expect("sigma validated");
        let mut accepted = false;
        for _ in 0..JITTER_RETRIES {
            let candidate = [base[0] + normal.sample(rng), base[1] + normal.sample(rng)];
            if candidate[0].abs() <= lim_x && candidate[1].abs() <= lim_y {
                offset = candidate;
                accepted = true;
                break;
            }
        }
        if !accepted {
            offset = [
                (base[0] + normal.sample(rng)).clamp(-lim_x, lim_x),
                (base[1] + normal.sample(rng)).clamp(-lim_y, lim_y),
            ];
        }
    }
    Placement { anchor, offset }
}
