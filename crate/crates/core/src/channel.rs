use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Vital-sign channels recorded on the 5-minute grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Hr,
    Rr,
    Sbp,
    Dbp,
    Spo2,
}

impl Channel {
    pub const ALL: [Channel; 5] = [Channel::Hr, Channel::Rr, Channel::Sbp, Channel::Dbp, Channel::Spo2];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Hr => "hr",
            Channel::Rr => "rr",
            Channel::Sbp => "sbp",
            Channel::Dbp => "dbp",
            Channel::Spo2 => "spo2",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownChannel(pub String);

impl FromStr for Channel {
    type Err = UnknownChannel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hr" => Ok(Channel::Hr),
            "rr" => Ok(Channel::Rr),
            "sbp" => Ok(Channel::Sbp),
            "dbp" => Ok(Channel::Dbp),
            "spo2" => Ok(Channel::Spo2),
            other => Err(UnknownChannel(other.to_string())),
        }
    }
}
