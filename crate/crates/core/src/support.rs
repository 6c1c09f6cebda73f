//! Lag index sets.
//!
//! Storage is 0-based: column `j` of a design matrix holds lag `k = j + 1`.
//! Everything user-facing (CSV output, summaries, error messages, the C ABI)
//! reports 1-based lags; [`Support::lags`] and [`Support::from_lags`] are the
//! only conversion points.

use std::collections::BTreeSet;
use std::fmt;

/// Sorted, duplicate-free set of 0-based lag columns.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Support(Vec<usize>);

impl Support {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Every column of an order-`d` model.
    pub fn full(order: usize) -> Self {
        Self((0..order).collect())
    }

    pub fn from_columns<I: IntoIterator<Item = usize>>(columns: I) -> Self {
        let set: BTreeSet<usize> = columns.into_iter().collect();
        Self(set.into_iter().collect())
    }

    /// Builds a support from 1-based lags. Lag 0 is ignored.
    pub fn from_lags<I: IntoIterator<Item = usize>>(lags: I) -> Self {
        Self::from_columns(lags.into_iter().filter(|&k| k > 0).map(|k| k - 1))
    }

    pub fn columns(&self) -> &[usize] {
        &self.0
    }

    pub fn lags(&self) -> Vec<usize> {
        self.0.iter().map(|j| j + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, column: usize) -> bool {
        self.0.binary_search(&column).is_ok()
    }

    pub fn position(&self, column: usize) -> Option<usize> {
        self.0.binary_search(&column).ok()
    }

    pub fn union(&self, other: &Support) -> Support {
        Self::from_columns(self.0.iter().chain(other.0.iter()).copied())
    }

    pub fn difference(&self, other: &Support) -> Support {
        Self(self.0.iter().copied().filter(|c| !other.contains(*c)).collect())
    }

    pub fn is_subset(&self, other: &Support) -> bool {
        self.0.iter().all(|c| other.contains(*c))
    }

    /// Largest column index plus one, or 0 for the empty set.
    pub fn span(&self) -> usize {
        self.0.last().map_or(0, |j| j + 1)
    }

    /// Columns where `w` is strictly positive.
    pub fn of_positive(w: &[f64]) -> Self {
        Self(w.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(j, _)| j).collect())
    }
}

impl fmt::Display for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, k) in self.lags().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, "}}")
    }
}
