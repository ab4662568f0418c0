use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Activity label attached to each trace minute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityMode {
    Home,
    Work,
    Walking,
    Cycling,
    Driving,
    Other,
}

impl ActivityMode {
    pub const ALL: [ActivityMode; 6] = [
        ActivityMode::Home,
        ActivityMode::Work,
        ActivityMode::Walking,
        ActivityMode::Cycling,
        ActivityMode::Driving,
        ActivityMode::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ActivityMode::Home => "home",
            ActivityMode::Work => "work",
            ActivityMode::Walking => "walking",
            ActivityMode::Cycling => "cycling",
            ActivityMode::Driving => "driving",
            ActivityMode::Other => "other",
        }
    }

    pub fn commute_mode(&self) -> Option<CommuteMode> {
        match self {
            ActivityMode::Walking => Some(CommuteMode::Walking),
            ActivityMode::Cycling => Some(CommuteMode::Cycling),
            ActivityMode::Driving => Some(CommuteMode::Driving),
            _ => None,
        }
    }
}

impl fmt::Display for ActivityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivityMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        ActivityMode::ALL
            .into_iter()
            .find(|m| m.as_str() == lower)
            .ok_or_else(|| format!("unknown activity mode {s:?}"))
    }
}

/// Travel mode of a commute leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommuteMode {
    Walking,
    Cycling,
    Driving,
}

impl CommuteMode {
    pub const ALL: [CommuteMode; 3] = [CommuteMode::Walking, CommuteMode::Cycling, CommuteMode::Driving];

    pub fn activity(&self) -> ActivityMode {
        match self {
            CommuteMode::Walking => ActivityMode::Walking,
            CommuteMode::Cycling => ActivityMode::Cycling,
            CommuteMode::Driving => ActivityMode::Driving,
        }
    }
}

impl fmt::Display for CommuteMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.activity().fmt(f)
    }
}

impl FromStr for CommuteMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActivityMode::from_str(s)?
            .commute_mode()
            .ok_or_else(|| format!("{s:?} is not a commute mode"))
    }
}
