//! Judge verdicts and the program-quality order over them.
//!
//! The order is `AC > PE > WA = TLE = MLE > CE > RE`. It is non-strict: the
//! three "wrong result" verdicts share a level, so comparing two of them
//! yields [`Preference::Tie`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A judge verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "AC")]
    Accepted,
    #[serde(rename = "PE")]
    PresentationError,
    #[serde(rename = "WA")]
    WrongAnswer,
    #[serde(rename = "TLE")]
    TimeLimitExceeded,
    #[serde(rename = "MLE")]
    MemoryLimitExceeded,
    #[serde(rename = "CE")]
    CompileError,
    #[serde(rename = "RE")]
    RuntimeError,
}

/// Highest quality level; only [`Status::Accepted`] reaches it.
pub const MAX_RANK: u8 = 4;

impl Status {
    pub const ALL: [Status; 7] = [
        Status::Accepted,
        Status::PresentationError,
        Status::WrongAnswer,
        Status::TimeLimitExceeded,
        Status::MemoryLimitExceeded,
        Status::CompileError,
        Status::RuntimeError,
    ];

    /// Quality level: RE=0, CE=1, WA=TLE=MLE=2, PE=3, AC=4.
    pub const fn rank(self) -> u8 {
        match self {
            Status::RuntimeError => 0,
            Status::CompileError => 1,
            Status::WrongAnswer | Status::TimeLimitExceeded | Status::MemoryLimitExceeded => 2,
            Status::PresentationError => 3,
            Status::Accepted => 4,
        }
    }

    /// Precedence used to pick one verdict among several of the same rank
    /// when aggregating a test suite. Higher wins: RE > TLE > MLE > WA.
    pub(crate) const fn severity(self) -> u8 {
        match self {
            Status::RuntimeError => 3,
            Status::TimeLimitExceeded => 2,
            Status::MemoryLimitExceeded => 1,
            _ => 0,
        }
    }

    /// Canonical representative of a rank level (WA for level 2).
    pub fn from_rank(rank: u8) -> Option<Status> {
        match rank {
            0 => Some(Status::RuntimeError),
            1 => Some(Status::CompileError),
            2 => Some(Status::WrongAnswer),
            3 => Some(Status::PresentationError),
            4 => Some(Status::Accepted),
            _ => None,
        }
    }

    pub const fn code(self) -> &'static str {
        match self {
            Status::Accepted => "AC",
            Status::PresentationError => "PE",
            Status::WrongAnswer => "WA",
            Status::TimeLimitExceeded => "TLE",
            Status::MemoryLimitExceeded => "MLE",
            Status::CompileError => "CE",
            Status::RuntimeError => "RE",
        }
    }

    pub fn is_accepted(self) -> bool {
        self == Status::Accepted
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown status tag `{0}`")]
pub struct ParseStatusError(pub String);

impl FromStr for Status {
    type Err = ParseStatusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AC" => Ok(Status::Accepted),
            "PE" => Ok(Status::PresentationError),
            "WA" => Ok(Status::WrongAnswer),
            "TLE" => Ok(Status::TimeLimitExceeded),
            "MLE" => Ok(Status::MemoryLimitExceeded),
            "CE" => Ok(Status::CompileError),
            "RE" => Ok(Status::RuntimeError),
            _ => Err(ParseStatusError(s.to_string())),
        }
    }
}

/// Outcome of comparing two verdicts under the quality order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preference {
    First,
    Second,
    Tie,
}

pub fn status_rank(status: Status) -> u8 {
    status.rank()
}

pub fn prefer(a: Status, b: Status) -> Preference {
    match a.rank().cmp(&b.rank()) {
        std::cmp::Ordering::Greater => Preference::First,
        std::cmp::Ordering::Less => Preference::Second,
        std::cmp::Ordering::Equal => Preference::Tie,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_follow_quality_order() {
        assert_eq!(status_rank(Status::Accepted), 4);
        assert_eq!(status_rank(Status::WrongAnswer), 2);
        assert_eq!(status_rank(Status::TimeLimitExceeded), 2);
        assert_eq!(status_rank(Status::RuntimeError), 0);
        assert!(Status::Accepted.rank() > Status::PresentationError.rank());
        assert!(Status::PresentationError.rank() > Status::MemoryLimitExceeded.rank());
        assert!(Status::MemoryLimitExceeded.rank() > Status::CompileError.rank());
        assert!(Status::CompileError.rank() > Status::RuntimeError.rank());
    }

    #[test]
    fn accepted_is_unique_maximum() {
        let top: Vec<_> = Status::ALL.iter().filter(|s| s.rank() == MAX_RANK).collect();
        assert_eq!(top, vec![&Status::Accepted]);
    }

    #[test]
    fn prefer_examples() {
        assert_eq!(prefer(Status::Accepted, Status::WrongAnswer), Preference::First);
        assert_eq!(prefer(Status::WrongAnswer, Status::MemoryLimitExceeded), Preference::Tie);
        assert_eq!(prefer(Status::CompileError, Status::RuntimeError), Preference::First);
        assert_eq!(prefer(Status::RuntimeError, Status::PresentationError), Preference::Second);
    }

    #[test]
    fn prefer_is_antisymmetric_and_transitive() {
        for a in Status::ALL {
            for b in Status::ALL {
                let ab = prefer(a, b);
                let ba = prefer(b, a);
                match ab {
                    Preference::First => assert_eq!(ba, Preference::Second),
                    Preference::Second => assert_eq!(ba, Preference::First),
                    Preference::Tie => {
                        assert_eq!(ba, Preference::Tie);
                        assert_eq!(a.rank(), b.rank());
                    }
                }
                for c in Status::ALL {
                    if prefer(a, b) == Preference::First && prefer(b, c) == Preference::First {
                        assert_eq!(prefer(a, c), Preference::First);
                    }
                }
            }
        }
    }

    #[test]
    fn codes_round_trip() {
        for s in Status::ALL {
            assert_eq!(s.code().parse::<Status>().unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.code()));
        }
        assert!("XX".parse::<Status>().is_err());
    }
}
