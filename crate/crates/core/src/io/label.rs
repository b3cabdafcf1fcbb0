use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Murmur class. The discriminant is the class index used by the models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Absent = 0,
    Present = 1,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Absent, Label::Present];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Label::Absent),
            1 => Ok(Label::Present),
            _ => Err(Error::LabelOutOfRange { label: i, classes: 2 }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Absent => "absent",
            Label::Present => "present",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Label as written in a manifest, before the Unknown class is dropped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RawLabel {
    Known(Label),
    Unknown,
}

impl FromStr for RawLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "present" => Ok(RawLabel::Known(Label::Present)),
            "absent" => Ok(RawLabel::Known(Label::Absent)),
            "unknown" => Ok(RawLabel::Unknown),
            other => Err(Error::Manifest(format!("unrecognised label {other:?}"))),
        }
    }
}
