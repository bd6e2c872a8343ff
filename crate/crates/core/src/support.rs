//! Sets of dictionary column indices.
//!
//! Indices are stored 0-based. Everything that leaves the process (CSV, problem
//! dumps, `Display`) uses 1-based labels.

use std::fmt;

use crate::error::{Error, Result};

/// A strictly increasing set of column indices drawn from `0..universe`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportSet {
    indices: Vec<usize>,
    universe: usize,
}

impl SupportSet {
    /// Builds a set from 0-based indices in any order. Duplicates and
    /// out-of-range entries are rejected.
    pub fn new(mut indices: Vec<usize>, universe: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::BadSupport(format!("duplicate index {}", w[0] + 1)));
        }
        if let Some(&last) = indices.last() {
            if last >= universe {
                return Err(Error::BadSupport(format!(
                    "index {} exceeds universe size {}",
                    last + 1,
                    universe
                )));
            }
        }
        Ok(Self { indices, universe })
    }

    pub fn from_one_based(labels: &[usize], universe: usize) -> Result<Self> {
        if labels.contains(&0) {
            return Err(Error::BadSupport("1-based label 0".into()));
        }
        Self::new(labels.iter().map(|&i| i - 1).collect(), universe)
    }

    /// `{0, 1, .., k-1}`.
    pub fn first_k(k: usize, universe: usize) -> Self {
        assert!(k <= universe);
        Self {
            indices: (0..k).collect(),
            universe,
        }
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>, universe: usize) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(indices.last().is_none_or(|&i| i < universe));
        Self { indices, universe }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn union(&self, other: &SupportSet) -> SupportSet {
        let mut merged = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (self.indices.iter().peekable(), other.indices.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) => {
                    if x < y {
                        merged.push(x);
                        a.next();
                    } else if y < x {
                        merged.push(y);
                        b.next();
                    } else {
                        merged.push(x);
                        a.next();
                        b.next();
                    }
                }
                (Some(&&x), None) => {
                    merged.push(x);
                    a.next();
                }
                (None, Some(&&y)) => {
                    merged.push(y);
                    b.next();
                }
                (None, None) => break,
            }
        }
        SupportSet::from_sorted_unchecked(merged, self.universe.max(other.universe))
    }

    /// Indices of `self` that are not in `other`.
    pub fn difference(&self, other: &SupportSet) -> SupportSet {
        let rest = self
            .indices
            .iter()
            .copied()
            .filter(|&i| !other.contains(i))
            .collect();
        SupportSet::from_sorted_unchecked(rest, self.universe)
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|&i| i + 1).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }
}

impl fmt::Display for SupportSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (pos, idx) in self.indices.iter().enumerate() {
            if pos > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", idx + 1)?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        assert!(matches!(
            SupportSet::new(vec![3, 1, 3], 5),
            Err(Error::BadSupport(_))
        ));
        assert!(matches!(
            SupportSet::new(vec![5], 5),
            Err(Error::BadSupport(_))
        ));
        assert!(SupportSet::from_one_based(&[0, 1], 5).is_err());
    }

    #[test]
    fn sorts_and_displays_one_based() {
        let s = SupportSet::new(vec![4, 0, 2], 5).unwrap();
        assert_eq!(s.indices(), &[0, 2, 4]);
        assert_eq!(s.to_string(), "{1,3,5}");
        assert_eq!(s.to_one_based(), vec![1, 3, 5]);
    }

    #[test]
    fn union_and_difference() {
        let a = SupportSet::new(vec![0, 2, 4], 8).unwrap();
        let b = SupportSet::new(vec![1, 2, 7], 8).unwrap();
        assert_eq!(a.union(&b).indices(), &[0, 1, 2, 4, 7]);
        assert_eq!(a.difference(&b).indices(), &[0, 4]);
        assert!(a.union(&a) == a);
    }
}
