use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{position_kind, ActivityTuple, ElementKind, Token, POSITIONS};
use crate::error::{Error, Result};

/// Which tuple positions are observable.
///
/// Named configurations (`V`, `I`, `S`, `VI`, `VS`, `IS`, `VIS`) expose a
/// kind on both hands at once. A six-character bit string such as
/// `010010` addresses positions individually, in `lv li ls rv ri rs` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MaskConfig {
    visible: [bool; POSITIONS],
}

impl MaskConfig {
    pub const VIS: MaskConfig = MaskConfig { visible: [true; POSITIONS] };
    pub const HIDDEN: MaskConfig = MaskConfig { visible: [false; POSITIONS] };

    pub fn from_bits(visible: [bool; POSITIONS]) -> Self {
        MaskConfig { visible }
    }

    /// Mask exposing the given kinds on both hands.
    pub fn from_kinds(kinds: &[ElementKind]) -> Self {
        let mut visible = [false; POSITIONS];
        for (p, v) in visible.iter_mut().enumerate() {
            *v = kinds.contains(&position_kind(p));
        }
        MaskConfig { visible }
    }

    pub fn is_visible(&self, p: usize) -> bool {
        self.visible[p]
    }

    pub fn visible(&self) -> [bool; POSITIONS] {
        self.visible
    }

    /// Bit string such as `010010`.
    pub fn bits(&self) -> String {
        self.visible.iter().map(|&v| if v { '1' } else { '0' }).collect()
    }

    pub fn bits_u64(&self) -> u64 {
        self.visible.iter().enumerate().map(|(p, &v)| u64::from(v) << p).sum()
    }

    /// Kind-level name when both hands agree, e.g. `IS`.
    pub fn kind_name(&self) -> Option<String> {
        let mut name = String::new();
        for k in ElementKind::ALL {
            let (l, r) = (self.visible[k.index()], self.visible[k.index() + 3]);
            if l != r {
                return None;
            }
            if l {
                name.push(k.letter());
            }
        }
        (!name.is_empty()).then_some(name)
    }

    /// Number of visible element kinds, for kind-level masks.
    pub fn n_kinds(&self) -> usize {
        ElementKind::ALL
            .iter()
            .filter(|k| self.visible[k.index()] || self.visible[k.index() + 3])
            .count()
    }
}

impl fmt::Display for MaskConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind_name() {
            Some(n) => f.write_str(&n),
            None => f.write_str(&self.bits()),
        }
    }
}

impl FromStr for MaskConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() == POSITIONS && s.chars().all(|c| c == '0' || c == '1') {
            let mut visible = [false; POSITIONS];
            for (p, c) in s.chars().enumerate() {
                visible[p] = c == '1';
            }
            return Ok(MaskConfig { visible });
        }
        let mut kinds = Vec::new();
        for c in s.chars() {
            let k = match c.to_ascii_uppercase() {
                'V' => ElementKind::Verb,
                'I' => ElementKind::Instrument,
                'S' => ElementKind::Structure,
                _ => return Err(Error::InvalidArgument(format!("bad mask `{s}`"))),
            };
            if kinds.contains(&k) {
                return Err(Error::InvalidArgument(format!("bad mask `{s}`")));
            }
            kinds.push(k);
        }
        if kinds.is_empty() {
            return Err(Error::InvalidArgument("empty mask".into()));
        }
        Ok(MaskConfig::from_kinds(&kinds))
    }
}

impl TryFrom<String> for MaskConfig {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MaskConfig> for String {
    fn from(m: MaskConfig) -> Self {
        m.to_string()
    }
}

/// Replaces hidden positions with `unknown`; timestamps are untouched.
pub fn apply_mask(t: &ActivityTuple, m: &MaskConfig) -> ActivityTuple {
    let mut out = *t;
    for (p, item) in out.items.iter_mut().enumerate() {
        if !m.visible[p] {
            *item = Token::UNKNOWN;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for name in ["V", "I", "S", "VI", "VS", "IS", "VIS"] {
            let m: MaskConfig = name.parse().unwrap();
            assert_eq!(m.to_string(), name);
        }
        assert_eq!("I".parse::<MaskConfig>().unwrap().bits(), "010010");
        assert_eq!("010010".parse::<MaskConfig>().unwrap().to_string(), "I");
        assert_eq!("100000".parse::<MaskConfig>().unwrap().to_string(), "100000");
        assert!("X".parse::<MaskConfig>().is_err());
        assert!("VV".parse::<MaskConfig>().is_err());
    }

    #[test]
    fn instrument_mask_example() {
        let t = ActivityTuple::new([Token(2), Token(3), Token(4), Token(5), Token(6), Token(7)], 0.0, 1.0);
        let m: MaskConfig = "010010".parse().unwrap();
        let out = apply_mask(&t, &m);
        assert_eq!(
            out.items,
            [Token::UNKNOWN, Token(3), Token::UNKNOWN, Token::UNKNOWN, Token(6), Token::UNKNOWN]
        );
        assert_eq!(apply_mask(&t, &MaskConfig::VIS), t);
        assert_eq!(apply_mask(&t, &MaskConfig::HIDDEN).items, [Token::UNKNOWN; 6]);
    }
}
