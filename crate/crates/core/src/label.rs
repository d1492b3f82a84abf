//! Role vocabulary and BIO tags.

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

/// One of the seven event component roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum RoleLabel {
    Trigger,
    Participant,
    Place,
    Target,
    Organizer,
    Etime,
    Fname,
}

impl RoleLabel {
    /// All roles in declaration order. Index positions are used as class ids.
    pub const ALL: [RoleLabel; 7] = [
        RoleLabel::Trigger,
        RoleLabel::Participant,
        RoleLabel::Place,
        RoleLabel::Target,
        RoleLabel::Organizer,
        RoleLabel::Etime,
        RoleLabel::Fname,
    ];

    /// Column order of the per-role development tables.
    pub const REPORT_ORDER: [RoleLabel; 7] = [
        RoleLabel::Trigger,
        RoleLabel::Target,
        RoleLabel::Place,
        RoleLabel::Participant,
        RoleLabel::Organizer,
        RoleLabel::Fname,
        RoleLabel::Etime,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoleLabel::Trigger => "trigger",
            RoleLabel::Participant => "participant",
            RoleLabel::Place => "place",
            RoleLabel::Target => "target",
            RoleLabel::Organizer => "organizer",
            RoleLabel::Etime => "etime",
            RoleLabel::Fname => "fname",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<RoleLabel> {
        Self::ALL.get(index).copied()
    }

    pub fn is_trigger(self) -> bool {
        self == RoleLabel::Trigger
    }
}

impl fmt::Display for RoleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoleLabel {
    type Err = TagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RoleLabel::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| TagError::UnknownRole(String::from(s)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TagError {
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("malformed tag `{0}`")]
    Malformed(String),
}

/// A BIO tag. `O` carries no role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BioTag {
    O,
    B(RoleLabel),
    I(RoleLabel),
}

impl BioTag {
    pub fn role(self) -> Option<RoleLabel> {
        match self {
            BioTag::O => None,
            BioTag::B(r) | BioTag::I(r) => Some(r),
        }
    }

    /// Whether this tag opens a new chunk given its predecessor, using the
    /// lenient convention: an `I` tag after `O`, sentence start, or a
    /// different role opens a chunk.
    pub fn starts_chunk(self, prev: Option<BioTag>) -> bool {
        match self {
            BioTag::O => false,
            BioTag::B(_) => true,
            BioTag::I(r) => prev.and_then(BioTag::role) != Some(r),
        }
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioTag::O => f.write_str("O"),
            BioTag::B(r) => write!(f, "B-{r}"),
            BioTag::I(r) => write!(f, "I-{r}"),
        }
    }
}

impl FromStr for BioTag {
    type Err = TagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(BioTag::O);
        }
        match s.split_once('-') {
            Some(("B", role)) => Ok(BioTag::B(role.parse()?)),
            Some(("I", role)) => Ok(BioTag::I(role.parse()?)),
            _ => Err(TagError::Malformed(String::from(s))),
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for BioTag {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for BioTag {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn tag_strings() {
        for role in RoleLabel::ALL {
            for tag in [BioTag::B(role), BioTag::I(role)] {
                assert_eq!(tag.to_string().parse::<BioTag>().unwrap(), tag);
            }
        }
        assert_eq!("O".parse::<BioTag>().unwrap(), BioTag::O);
        assert_eq!(BioTag::B(RoleLabel::Etime).to_string(), "B-etime");
    }

    #[test]
    fn rejects_bad_tags() {
        assert_eq!(
            "B-weapon".parse::<BioTag>(),
            Err(TagError::UnknownRole("weapon".into()))
        );
        assert!(matches!("X-trigger".parse::<BioTag>(), Err(TagError::Malformed(_))));
        assert!(matches!("b-trigger".parse::<BioTag>(), Err(TagError::Malformed(_))));
        assert!("B-Trigger".parse::<BioTag>().is_err());
        assert!("".parse::<BioTag>().is_err());
    }

    #[test]
    fn exactly_seven_roles() {
        assert_eq!(RoleLabel::ALL.len(), 7);
        for (i, r) in RoleLabel::ALL.iter().enumerate() {
            assert_eq!(r.index(), i);
            assert_eq!(RoleLabel::from_index(i), Some(*r));
        }
        assert_eq!(RoleLabel::from_index(7), None);
    }
}
