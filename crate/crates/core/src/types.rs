//! Small domain enums shared across modules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Display background of a rendered spectrogram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Background {
    Black,
    White,
}

impl Background {
    pub const ALL: [Background; 2] = [Background::Black, Background::White];

    /// Pixel intensity of "no signal".
    pub fn intensity(self) -> f32 {
        match self {
            Background::Black => 0.0,
            Background::White => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Background::Black => "black",
            Background::White => "white",
        }
    }
}

impl fmt::Display for Background {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Background {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "black" => Ok(Background::Black),
            "white" => Ok(Background::White),
            other => Err(Error::InvalidArgument(format!("unknown background {other:?}"))),
        }
    }
}

/// Backgrounds a model is trained on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundSet {
    Black,
    White,
    /// Both renders of every song.
    Mixed,
}

impl BackgroundSet {
    pub const ALL: [BackgroundSet; 3] = [BackgroundSet::Black, BackgroundSet::White, BackgroundSet::Mixed];

    pub fn backgrounds(self) -> &'static [Background] {
        match self {
            BackgroundSet::Black => &[Background::Black],
            BackgroundSet::White => &[Background::White],
            BackgroundSet::Mixed => &Background::ALL,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BackgroundSet::Black => "black",
            BackgroundSet::White => "white",
            BackgroundSet::Mixed => "mixed",
        }
    }
}

impl fmt::Display for BackgroundSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackgroundSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        BackgroundSet::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown background set {s:?} (black, white or mixed)")))
    }
}

/// The two song variants. `Eastern` is class 0 and the positive class for
/// precision and recall.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SongClass {
    Eastern,
    Mexican,
}

impl SongClass {
    pub const ALL: [SongClass; 2] = [SongClass::Eastern, SongClass::Mexican];

    pub fn id(self) -> usize {
        match self {
            SongClass::Eastern => 0,
            SongClass::Mexican => 1,
        }
    }

    pub fn from_id(id: usize) -> Option<Self> {
        match id {
            0 => Some(SongClass::Eastern),
            1 => Some(SongClass::Mexican),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SongClass::Eastern => "eastern",
            SongClass::Mexican => "mexican",
        }
    }
}

impl fmt::Display for SongClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SongClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "eastern" => Ok(SongClass::Eastern),
            "mexican" => Ok(SongClass::Mexican),
            other => Err(Error::InvalidArgument(format!("unknown class {other:?}"))),
        }
    }
}
