use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

/// Longest identifier the `VLED` id block can carry (u16 length prefix).
pub const MAX_ID_BYTES: usize = u16::MAX as usize;

/// Reason an identifier string was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum IdError {
    #[error("identifier is empty")]
    Empty,
    #[error("identifier is {0} bytes, longer than {MAX_ID_BYTES}")]
    TooLong(usize),
}

fn check_id(s: &str) -> Result<(), IdError> {
    if s.is_empty() {
        Err(IdError::Empty)
    } else if s.len() > MAX_ID_BYTES {
        Err(IdError::TooLong(s.len()))
    } else {
        Ok(())
    }
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Result<Self, IdError> {
                let s = s.into();
                check_id(&s)?;
                Ok(Self(s))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }

            pub fn into_string(self) -> String {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                Self::new(s).map_err(serde::de::Error::custom)
            }
        }
    };
}

string_id!(
    /// Identifier of one embedded image.
    SampleId
);
string_id!(
    /// Identifier of a driving scene, the unit that gets annotated.
    SceneId
);
string_id!(
    /// Name of a closed-set class.
    ClassName
);

impl ClassName {
    /// Reserved bucket for samples whose best class score falls below the
    /// zero-shot threshold. Never mined.
    pub const UNASSIGNED: &'static str = "__unassigned__";

    pub fn unassigned() -> Self {
        Self(Self::UNASSIGNED.to_owned())
    }

    pub fn is_unassigned(&self) -> bool {
        self.0 == Self::UNASSIGNED
    }
}
