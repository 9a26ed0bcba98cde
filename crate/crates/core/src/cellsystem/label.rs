use std::fmt;
use std::str::FromStr;

use serde::Serialize;

/// Ulam-Harris word; the root is the empty word.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CellLabel(Vec<u32>);

impl CellLabel {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    /// The `i`-th child (1-based).
    pub fn child(&self, i: u32) -> Self {
        assert!(i >= 1, "children are numbered from 1");
        let mut w = self.0.clone();
        w.push(i);
        Self(w)
    }

    pub fn parent(&self) -> Option<Self> {
        if self.0.is_empty() {
            None
        } else {
            Some(Self(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn generation(&self) -> usize {
        self.0.len()
    }

    pub fn letters(&self) -> &[u32] {
        &self.0
    }

    /// Stable 64-bit key for deriving per-subtree streams.
    pub fn key(&self) -> u64 {
        self.0.iter().fold(0x9e37_79b9_7f4a_7c15, |h, &l| crate::rng::splitmix64(h ^ u64::from(l)))
    }
}

impl fmt::Display for CellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("root");
        }
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for CellLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "root" {
            return Ok(Self::root());
        }
        s.split('.')
            .map(|p| match p.parse::<u32>() {
                Ok(l) if l >= 1 => Ok(l),
                _ => Err(format!("bad label letter {p:?}")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parent_drops_last_letter() {
        let l = CellLabel::root().child(2).child(5);
        assert_eq!(l.generation(), 2);
        assert_eq!(l.parent().unwrap(), CellLabel::root().child(2));
        assert_eq!(CellLabel::root().parent(), None);
    }

    #[test]
    fn text_roundtrip() {
        for l in [CellLabel::root(), CellLabel::root().child(1), CellLabel::root().child(3).child(12)] {
            assert_eq!(l.to_string().parse::<CellLabel>().unwrap(), l);
        }
        assert!("1.0".parse::<CellLabel>().is_err());
    }
}
