use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Number of sentiment classes.
pub const NUM_CLASSES: usize = 3;

/// Three-way sentiment label. The integer encoding is part of the artifact
/// format and must never change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative = 0,
    Neutral = 1,
    Positive = 2,
}

impl Label {
    pub const ALL: [Label; NUM_CLASSES] = [Label::Negative, Label::Neutral, Label::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    /// Lowercase long name, as used in CSV input and NDJSON output.
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Negative => "negative",
            Label::Neutral => "neutral",
            Label::Positive => "positive",
        }
    }

    /// Three-letter abbreviation used in report column names.
    pub fn short(self) -> &'static str {
        match self {
            Label::Negative => "neg",
            Label::Neutral => "neu",
            Label::Positive => "pos",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown sentiment label {0:?}")]
pub struct UnknownLabel(pub String);

impl FromStr for Label {
    type Err = UnknownLabel;

    /// Case-insensitive; surrounding whitespace is ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        Label::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(trimmed))
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

/// Index of the maximal score; exact ties go to the lowest index.
pub(crate) fn argmax_lowest(scores: &[f64; NUM_CLASSES]) -> Label {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    Label::ALL[best]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_is_stable() {
        assert_eq!(Label::Negative.index(), 0);
        assert_eq!(Label::Neutral.index(), 1);
        assert_eq!(Label::Positive.index(), 2);
        for l in Label::ALL {
            assert_eq!(Label::from_index(l.index()), Some(l));
        }
        assert_eq!(Label::from_index(3), None);
    }

    #[test]
    fn parses_case_insensitively() {
        assert_eq!("NEGATIVE".parse::<Label>().unwrap(), Label::Negative);
        assert_eq!(" Neutral ".parse::<Label>().unwrap(), Label::Neutral);
        assert_eq!(
            "positiv".parse::<Label>().unwrap_err(),
            UnknownLabel("positiv".into())
        );
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax_lowest(&[0.0, 0.0, 0.0]), Label::Negative);
        assert_eq!(argmax_lowest(&[0.0, 1.0, 1.0]), Label::Neutral);
        assert_eq!(argmax_lowest(&[f64::NEG_INFINITY, -1.0, 2.0]), Label::Positive);
    }
}
