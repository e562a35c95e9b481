//! Counted, sorted multisets.
//!
//! A [`Multiset`] keeps its distinct elements in ascending order, each paired
//! with a positive multiplicity. Two multisets holding the same elements are
//! therefore structurally equal regardless of insertion order, which is what
//! lets terms compare modulo reordering with plain `==`.

use std::cmp::Ordering;
use std::fmt;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Multiset<T: Ord> {
    entries: Vec<(T, usize)>,
}

impl<T: Ord> Default for Multiset<T> {
    fn default() -> Self {
        Multiset {
            entries: Vec::new(),
        }
    }
}

impl<T: Ord + fmt::Debug> fmt::Debug for Multiset<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.entries.iter().map(|(k, v)| (k, v)))
            .finish()
    }
}

impl<T: Ord> Multiset<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a multiset from `(element, count)` pairs in any order. Zero
    /// counts are dropped and duplicate elements merged.
    pub fn from_counts<I: IntoIterator<Item = (T, usize)>>(iter: I) -> Self {
        let mut entries: Vec<(T, usize)> = iter.into_iter().filter(|(_, c)| *c > 0).collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(T, usize)> = Vec::with_capacity(entries.len());
        for (item, count) in entries {
            match merged.last_mut() {
                Some((last, c)) if *last == item => *c += count,
                _ => merged.push((item, count)),
            }
        }
        Multiset { entries: merged }
    }

    pub fn singleton(item: T) -> Self {
        Multiset {
            entries: vec![(item, 1)],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of distinct elements.
    pub fn distinct_len(&self) -> usize {
        self.entries.len()
    }

    /// Total number of elements counting multiplicity.
    pub fn len(&self) -> usize {
        self.entries.iter().map(|(_, c)| c).sum()
    }

    pub fn entries(&self) -> &[(T, usize)] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<(T, usize)> {
        self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, usize)> {
        self.entries.iter().map(|(t, c)| (t, *c))
    }

    /// Every element, repeated by its multiplicity, in canonical order.
    pub fn iter_expanded(&self) -> impl Iterator<Item = &T> {
        self.entries
            .iter()
            .flat_map(|(t, c)| std::iter::repeat_n(t, *c))
    }

    fn position(&self, item: &T) -> Result<usize, usize> {
        self.entries.binary_search_by(|(t, _)| t.cmp(item))
    }

    pub fn count(&self, item: &T) -> usize {
        self.position(item).map_or(0, |i| self.entries[i].1)
    }

    pub fn insert(&mut self, item: T) {
        self.insert_n(item, 1);
    }

    pub fn insert_n(&mut self, item: T, n: usize) {
        if n == 0 {
            return;
        }
        match self.position(&item) {
            Ok(i) => self.entries[i].1 += n,
            Err(i) => self.entries.insert(i, (item, n)),
        }
    }

    /// Removes one copy; returns false when the element is absent.
    pub fn remove_one(&mut self, item: &T) -> bool {
        match self.position(item) {
            Ok(i) => {
                if self.entries[i].1 == 1 {
                    self.entries.remove(i);
                } else {
                    self.entries[i].1 -= 1;
                }
                true
            }
            Err(_) => false,
        }
    }

    /// Removes the entry at canonical position `index` entirely or one copy of it.
    pub(crate) fn remove_one_at(&mut self, index: usize) -> T
    where
        T: Clone,
    {
        if self.entries[index].1 == 1 {
            self.entries.remove(index).0
        } else {
            self.entries[index].1 -= 1;
            self.entries[index].0.clone()
        }
    }

    pub fn set_count(&mut self, item: T, n: usize) {
        match self.position(&item) {
            Ok(i) if n == 0 => {
                self.entries.remove(i);
            }
            Ok(i) => self.entries[i].1 = n,
            Err(i) if n > 0 => self.entries.insert(i, (item, n)),
            Err(_) => {}
        }
    }

    pub fn contains_all(&self, other: &Multiset<T>) -> bool {
        other.iter().all(|(t, c)| self.count(t) >= c)
    }
}

impl<T: Ord + Clone> Multiset<T> {
    /// Multiset union (sum of multiplicities), by sorted merge.
    pub fn union(&self, other: &Multiset<T>) -> Multiset<T> {
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            let (a, ca) = &self.entries[i];
            let (b, cb) = &other.entries[j];
            match a.cmp(b) {
                Ordering::Less => {
                    out.push((a.clone(), *ca));
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((b.clone(), *cb));
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a.clone(), ca + cb));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend(self.entries[i..].iter().cloned());
        out.extend(other.entries[j..].iter().cloned());
        Multiset { entries: out }
    }

    /// `self - other`, or `None` when `other` is not contained in `self`.
    pub fn difference(&self, other: &Multiset<T>) -> Option<Multiset<T>> {
        let mut out = Vec::with_capacity(self.entries.len());
        let mut j = 0;
        for (a, ca) in &self.entries {
            let mut remove = 0;
            if j < other.entries.len() && other.entries[j].0 < *a {
                return None;
            }
            if j < other.entries.len() && other.entries[j].0 == *a {
                remove = other.entries[j].1;
                j += 1;
            }
            if remove > *ca {
                return None;
            }
            if *ca > remove {
                out.push((a.clone(), ca - remove));
            }
        }
        if j < other.entries.len() {
            return None;
        }
        Some(Multiset { entries: out })
    }
}

impl<T: Ord> FromIterator<T> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Multiset::from_counts(iter.into_iter().map(|t| (t, 1)))
    }
}
