//! Length-`n` vectors with a subset of known entries, merged by flooding.

use crate::solvers::SolverError;

const MERGE_TOL: f64 = 1e-9;

/// A length-`n` vector where only some indices are known.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialVector {
    values: Vec<f64>,
    known: Vec<bool>,
    known_count: usize,
}

impl PartialVector {
    pub fn empty(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
            known: vec![false; len],
            known_count: 0,
        }
    }

    /// Vector with a single known entry.
    pub fn single(len: usize, index: usize, value: f64) -> Self {
        let mut pv = Self::empty(len);
        pv.set(index, value);
        pv
    }

    pub fn from_entries(len: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self, SolverError> {
        let mut pv = Self::empty(len);
        for (index, value) in entries {
            if index >= len {
                return Err(SolverError::IndexOutOfRange { index, len });
            }
            pv.set(index, value);
        }
        Ok(pv)
    }

    /// Fully known vector.
    pub fn complete(values: Vec<f64>) -> Self {
        let len = values.len();
        Self {
            values,
            known: vec![true; len],
            known_count: len,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn known_count(&self) -> usize {
        self.known_count
    }

    pub fn is_complete(&self) -> bool {
        self.known_count == self.values.len()
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.known.get(index).and_then(|&k| k.then(|| self.values[index]))
    }

    pub fn known_entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len()).filter(|&i| self.known[i]).map(|i| (i, self.values[i]))
    }

    fn set(&mut self, index: usize, value: f64) {
        if !self.known[index] {
            self.known[index] = true;
            self.known_count += 1;
        }
        self.values[index] = value;
    }

    /// Merges `other` into `self`, keeping `self`'s value on overlaps.
    pub fn merge_from(&mut self, other: &PartialVector) -> Result<(), SolverError> {
        if self.len() != other.len() {
            return Err(SolverError::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        if self.is_complete() && other.is_complete() {
            return check_agreement(self, other);
        }
        for i in 0..self.len() {
            if !other.known[i] {
                continue;
            }
            if self.known[i] {
                agree(i, self.values[i], other.values[i])?;
            } else {
                self.set(i, other.values[i]);
            }
        }
        Ok(())
    }

    /// Union of the known entries; the first operand wins on overlaps.
    pub fn merge(a: &PartialVector, b: &PartialVector) -> Result<PartialVector, SolverError> {
        let mut out = a.clone();
        out.merge_from(b)?;
        Ok(out)
    }

    /// First index still unknown.
    pub fn first_missing(&self) -> Option<usize> {
        self.known.iter().position(|k| !k)
    }

    /// Values of a complete vector.
    pub fn values(&self) -> Result<&[f64], SolverError> {
        match self.first_missing() {
            None => Ok(&self.values),
            Some(index) => Err(SolverError::Incomplete { index }),
        }
    }

    /// Sum of squares of a complete vector, in ascending index order.
    pub fn sum_sq(&self) -> Result<f64, SolverError> {
        Ok(self.values()?.iter().map(|v| v * v).sum())
    }

    /// Inner product of two complete vectors, in ascending index order.
    pub fn dot(&self, other: &PartialVector) -> Result<f64, SolverError> {
        let a = self.values()?;
        let b = other.values()?;
        if a.len() != b.len() {
            return Err(SolverError::LengthMismatch {
                expected: a.len(),
                actual: b.len(),
            });
        }
        Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
    }
}

fn agree(index: usize, kept: f64, incoming: f64) -> Result<(), SolverError> {
    let scale = 1.0f64.max(kept.abs()).max(incoming.abs());
    if (kept - incoming).abs() > MERGE_TOL * scale {
        return Err(SolverError::InconsistentShare { index, kept, incoming });
    }
    Ok(())
}

fn check_agreement(a: &PartialVector, b: &PartialVector) -> Result<(), SolverError> {
    a.values
        .iter()
        .zip(&b.values)
        .enumerate()
        .try_for_each(|(i, (&x, &y))| agree(i, x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_union() {
        let a = PartialVector::single(3, 0, 5.0);
        let b = PartialVector::single(3, 2, 7.0);
        let m = PartialVector::merge(&a, &b).unwrap();
        assert_eq!(m.known_entries().collect::<Vec<_>>(), vec![(0, 5.0), (2, 7.0)]);
        assert_eq!(m.first_missing(), Some(1));
    }

    #[test]
    fn idempotent_and_conflict() {
        let a = PartialVector::single(3, 1, 3.0);
        assert_eq!(PartialVector::merge(&a, &a).unwrap(), a);
        let b = PartialVector::single(3, 1, 4.0);
        assert!(matches!(
            PartialVector::merge(&a, &b),
            Err(SolverError::InconsistentShare { index: 1, .. })
        ));
    }

    #[test]
    fn first_operand_wins_within_tolerance() {
        let a = PartialVector::single(2, 0, 1.0);
        let b = PartialVector::single(2, 0, 1.0 + 1e-12);
        assert_eq!(PartialVector::merge(&a, &b).unwrap().get(0), Some(1.0));
    }

    #[test]
    fn incomplete_sums_fail() {
        let a = PartialVector::single(2, 0, 1.0);
        assert!(matches!(a.sum_sq(), Err(SolverError::Incomplete { index: 1 })));
        let c = PartialVector::complete(vec![3.0, 4.0]);
        assert_eq!(c.sum_sq().unwrap(), 25.0);
        assert_eq!(c.dot(&c).unwrap(), 25.0);
    }
}
