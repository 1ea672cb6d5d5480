//! Built-in models: decision strategies, source monitoring and
//! "Who said what?", each with its Table 1 proportion presets.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{MptModel, Rational};
use crate::nml::Allocation;
use crate::parse::parse_model;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// Obtained from the named entry by equality constraints.
    NestedIn(&'static str),
    /// Same data format as the named entry, but neither contains the other.
    NonNested(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZooEntry {
    pub id: &'static str,
    pub text: &'static str,
    pub expected_s: usize,
    pub relation: Option<Relation>,
    /// Tree whose share the Table 1 columns vary.
    pub focal_tree: &'static str,
}

const ENTRIES: &[ZooEntry] = &[
    ZooEntry {
        id: "bernoulli",
        text: include_str!("../zoo/bernoulli.mpt"),
        expected_s: 1,
        relation: None,
        focal_tree: "tree",
    },
    ZooEntry {
        id: "bernoulli-pair",
        text: include_str!("../zoo/bernoulli-pair.mpt"),
        expected_s: 2,
        relation: None,
        focal_tree: "second",
    },
    ZooEntry {
        id: "ttb",
        text: include_str!("../zoo/ttb.mpt"),
        expected_s: 1,
        relation: Some(Relation::NonNested("waddprob")),
        focal_tree: "type3",
    },
    ZooEntry {
        id: "waddprob",
        text: include_str!("../zoo/waddprob.mpt"),
        expected_s: 3,
        relation: Some(Relation::NonNested("ttb")),
        focal_tree: "type3",
    },
    ZooEntry {
        id: "sm-5b",
        text: include_str!("../zoo/sm-5b.mpt"),
        expected_s: 5,
        relation: None,
        focal_tree: "new",
    },
    ZooEntry {
        id: "sm-4",
        text: include_str!("../zoo/sm-4.mpt"),
        expected_s: 4,
        relation: Some(Relation::NestedIn("sm-5b")),
        focal_tree: "new",
    },
    ZooEntry {
        id: "wsw-full-D",
        text: include_str!("../zoo/wsw-full-D.mpt"),
        expected_s: 7,
        relation: None,
        focal_tree: "distractor",
    },
    ZooEntry {
        id: "wsw-eq-d",
        text: include_str!("../zoo/wsw-eq-d.mpt"),
        expected_s: 6,
        relation: Some(Relation::NestedIn("wsw-full-D")),
        focal_tree: "distractor",
    },
];

pub fn list() -> &'static [ZooEntry] {
    ENTRIES
}

pub fn get(id: &str) -> Result<&'static ZooEntry> {
    ENTRIES
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| Error::UnknownModel(id.to_string()))
}

/// Parse and validate a built-in model.
pub fn load(id: &str) -> Result<MptModel> {
    get(id)?.model()
}

impl ZooEntry {
    pub fn model(&self) -> Result<MptModel> {
        let m = parse_model(self.text)?;
        if m.free_count() != self.expected_s {
            return Err(Error::InvalidModel(format!(
                "{} has {} free parameters, expected {}",
                self.id,
                m.free_count(),
                self.expected_s
            )));
        }
        Ok(m)
    }

    /// The model with tree weights set by `preset`.
    pub fn model_with(&self, preset: Preset) -> Result<MptModel> {
        let m = self.model()?;
        let w = preset_weights(&m, self.focal_tree, preset)?;
        m.with_weights(&w)
    }
}

/// Share of the focal tree, or equal shares for every tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Percent(u32),
    Equal,
}

/// The five Table 1 columns.
pub const TABLE1_COLUMNS: [Preset; 5] = [
    Preset::Percent(10),
    Preset::Percent(30),
    Preset::Percent(50),
    Preset::Percent(70),
    Preset::Percent(90),
];

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("equal") {
            return Ok(Preset::Equal);
        }
        let pct = s
            .strip_suffix('%')
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| Error::InvalidArgument(format!("bad preset {s:?}; use e.g. 30% or equal")))?;
        if pct == 0 || pct >= 100 {
            return Err(Error::InvalidArgument(format!(
                "preset {pct}% leaves a tree without observations"
            )));
        }
        Ok(Preset::Percent(pct))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Percent(p) => write!(f, "{p}%"),
            Preset::Equal => f.write_str("equal"),
        }
    }
}

/// Exact tree weights: the focal tree gets the preset share, the others split
/// the remainder equally.
pub fn preset_weights(model: &MptModel, focal_tree: &str, preset: Preset) -> Result<Vec<Rational>> {
    let k = model.trees().len() as u64;
    match preset {
        Preset::Equal => Ok(vec![Rational::new(1, k); k as usize]),
        Preset::Percent(_) if k == 1 => Err(Error::InvalidArgument(
            "proportion presets need more than one tree".into(),
        )),
        Preset::Percent(p) => {
            let focal = model
                .trees()
                .iter()
                .position(|t| t.label == focal_tree)
                .ok_or_else(|| Error::InvalidArgument(format!("no tree named {focal_tree}")))?;
            let share = Rational::new(p as u64, 100);
            let rest = (Rational::from_integer(1) - share) / (k - 1);
            Ok((0..k as usize)
                .map(|t| if t == focal { share } else { rest })
                .collect())
        }
    }
}

pub fn preset_allocation(entry: &ZooEntry, preset: Preset, n: u64) -> Result<Allocation> {
    let m = entry.model()?;
    Allocation::from_weights(&preset_weights(&m, entry.focal_tree, preset)?, n)
}
