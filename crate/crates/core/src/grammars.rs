//! Grammars shipped with the crate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::grammar::Grammar;

/// Identifier of a bundled grammar.
///
/// `G10`..`G13` are the glucose-model grammars. `Example` is the small
/// symbolic-regression grammar used to illustrate the mapping process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GrammarId {
    Example,
    G10,
    G11,
    G12,
    G13,
}

impl GrammarId {
    pub const ALL: [GrammarId; 5] = [
        GrammarId::Example,
        GrammarId::G10,
        GrammarId::G11,
        GrammarId::G12,
        GrammarId::G13,
    ];
    pub const GLUCOSE: [GrammarId; 4] = [GrammarId::G10, GrammarId::G11, GrammarId::G12, GrammarId::G13];

    pub fn as_str(self) -> &'static str {
        match self {
            GrammarId::Example => "example",
            GrammarId::G10 => "G10",
            GrammarId::G11 => "G11",
            GrammarId::G12 => "G12",
            GrammarId::G13 => "G13",
        }
    }

    pub fn source(self) -> &'static str {
        match self {
            GrammarId::Example => include_str!("../assets/grammars/example.bnf"),
            GrammarId::G10 => include_str!("../assets/grammars/g10.bnf"),
            GrammarId::G11 => include_str!("../assets/grammars/g11.bnf"),
            GrammarId::G12 => include_str!("../assets/grammars/g12.bnf"),
            GrammarId::G13 => include_str!("../assets/grammars/g13.bnf"),
        }
    }
}

impl fmt::Display for GrammarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GrammarId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GrammarId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown grammar `{s}` (expected G10, G11, G12, G13 or example)"))
    }
}

/// Parse a bundled grammar. The assets are validated by the test suite.
pub fn load(id: GrammarId) -> Grammar {
    Grammar::parse(id.source()).expect("bundled grammar parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in GrammarId::ALL {
            assert_eq!(id.as_str().parse::<GrammarId>().unwrap(), id);
        }
        assert_eq!("g11".parse::<GrammarId>().unwrap(), GrammarId::G11);
        assert!("G14".parse::<GrammarId>().is_err());
    }
}
