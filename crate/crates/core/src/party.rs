use std::fmt;

use serde::{Deserialize, Serialize};

/// The three protocol roles: two data owners and the key-holding coordinator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
    C,
}

impl Party {
    pub fn is_owner(self) -> bool {
        matches!(self, Party::A | Party::B)
    }

    /// The other data owner. The coordinator has no peer.
    pub fn peer(self) -> Option<Party> {
        match self {
            Party::A => Some(Party::B),
            Party::B => Some(Party::A),
            Party::C => None,
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Party::A => "A",
            Party::B => "B",
            Party::C => "C",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Party {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Party::A),
            "B" | "b" => Ok(Party::B),
            "C" | "c" => Ok(Party::C),
            other => Err(format!("unknown party `{other}`")),
        }
    }
}
