//! Exterior algebra over the span of `ω⁰ … ω^{2n−1}`.
//!
//! Multivectors are stored in canonical form: strictly increasing index
//! tuples, signs absorbed into the coefficients at insertion, zero
//! coefficients pruned. Equality and zero tests are therefore exact.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::scalar::CQ;
use crate::{QpotError, Result};

/// Coefficient ring contract for [`Multivector`]; implemented by exact
/// complex rationals and by polynomials.
pub trait Coeff: Clone + PartialEq {
    fn add_ref(&self, rhs: &Self) -> Self;
    fn mul_ref(&self, rhs: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    fn is_zero(&self) -> bool;
}

impl Coeff for CQ {
    fn add_ref(&self, rhs: &Self) -> Self {
        self.clone() + rhs.clone()
    }
    fn mul_ref(&self, rhs: &Self) -> Self {
        self.clone() * rhs.clone()
    }
    fn neg_ref(&self) -> Self {
        -self.clone()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
}

/// Strictly increasing tuple of basis indices; the empty tuple labels the
/// scalar component.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisIndex(Vec<u8>);

impl BasisIndex {
    pub fn new(indices: Vec<u8>) -> Result<Self> {
        if !indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(QpotError::Domain(format!(
                "basis indices must be strictly increasing, got {indices:?}"
            )));
        }
        Ok(BasisIndex(indices))
    }

    pub fn empty() -> Self {
        BasisIndex(Vec::new())
    }

    pub fn single(k: u8) -> Self {
        BasisIndex(vec![k])
    }

    /// The full tuple `(0, 1, …, 2n−1)` labelling the volume form `Ω_{2n}`.
    pub fn top(n: usize) -> Self {
        BasisIndex((0..2 * n as u8).collect())
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }
}

/// Sign of the permutation sorting `seq` into increasing order; `0` when an
/// entry repeats. Entries must lie in `[0, 2n−1]` for the caller's `n`; the
/// caller checks the range.
pub fn perm_sign(seq: &[u8]) -> i32 {
    let mut inversions = 0usize;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] == seq[j] {
                return 0;
            }
            if seq[i] > seq[j] {
                inversions += 1;
            }
        }
    }
    if inversions.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Merge two strictly increasing tuples; `None` when they share an index,
/// otherwise the sign of the shuffle and the merged tuple.
fn merge_indices(a: &[u8], b: &[u8]) -> Option<(i32, Vec<u8>)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut transpositions = 0usize;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        if a[i] == b[j] {
            return None;
        }
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            // b[j] jumps over the remaining entries of a
            transpositions += a.len() - i;
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    let sign = if transpositions.is_multiple_of(2) { 1 } else { -1 };
    Some((sign, out))
}

/// Homogeneous element of the exterior algebra: a map from canonical basis
/// tuples of one common degree to coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Multivector<C: Coeff> {
    n: usize,
    degree: usize,
    components: BTreeMap<BasisIndex, C>,
}

impl<C: Coeff> Multivector<C> {
    pub fn zero(n: usize, degree: usize) -> Self {
        assert!(degree <= 2 * n, "degree exceeds top degree");
        Multivector {
            n,
            degree,
            components: BTreeMap::new(),
        }
    }

    /// Degree-zero element with the given scalar part.
    pub fn scalar(n: usize, c: C) -> Self {
        let mut mv = Self::zero(n, 0);
        mv.insert_add(BasisIndex::empty(), c);
        mv
    }

    pub fn from_components(
        n: usize,
        degree: usize,
        parts: impl IntoIterator<Item = (BasisIndex, C)>,
    ) -> Result<Self> {
        let mut mv = Self::zero(n, degree);
        for (idx, c) in parts {
            if idx.degree() != degree {
                return Err(QpotError::Dimension(format!(
                    "component {:?} has degree {}, expected {}",
                    idx,
                    idx.degree(),
                    degree
                )));
            }
            if idx.as_slice().iter().any(|&k| k as usize >= 2 * n) {
                return Err(QpotError::Domain(format!(
                    "basis index {idx:?} out of range for 2n = {}",
                    2 * n
                )));
            }
            mv.insert_add(idx, c);
        }
        Ok(mv)
    }

    fn insert_add(&mut self, idx: BasisIndex, c: C) {
        if c.is_zero() {
            return;
        }
        match self.components.entry(idx) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().add_ref(&c);
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component(&self, idx: &BasisIndex) -> Option<&C> {
        self.components.get(idx)
    }

    pub fn components(&self) -> impl Iterator<Item = (&BasisIndex, &C)> {
        self.components.iter()
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        if self.n != rhs.n || self.degree != rhs.degree {
            return Err(QpotError::Dimension(format!(
                "cannot add degree-{} form over 2n={} to degree-{} form over 2n={}",
                self.degree,
                2 * self.n,
                rhs.degree,
                2 * rhs.n
            )));
        }
        let mut out = self.clone();
        for (idx, c) in &rhs.components {
            out.insert_add(idx.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.components.values_mut() {
            *c = c.neg_ref();
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.add(&rhs.neg())
    }

    pub fn scalar_mul(&self, c: &C) -> Self {
        let mut out = Self::zero(self.n, self.degree);
        for (idx, v) in &self.components {
            out.insert_add(idx.clone(), v.mul_ref(c));
        }
        out
    }

    /// Exterior product. Degrees add; shared indices annihilate; the result
    /// is re-canonicalized with shuffle signs absorbed into coefficients.
    pub fn wedge(&self, rhs: &Self) -> Result<Self> {
        if self.n != rhs.n {
            return Err(QpotError::Dimension(format!(
                "wedge of forms over 2n={} and 2n={}",
                2 * self.n,
                2 * rhs.n
            )));
        }
        let degree = self.degree + rhs.degree;
        if degree > 2 * self.n {
            // every merge would repeat an index
            return Ok(Self::zero(self.n, degree.min(2 * self.n)));
        }
        let mut out = Self::zero(self.n, degree);
        for (ia, ca) in &self.components {
            for (ib, cb) in &rhs.components {
                if let Some((sign, merged)) = merge_indices(ia.as_slice(), ib.as_slice()) {
                    let mut c = ca.mul_ref(cb);
                    if sign < 0 {
                        c = c.neg_ref();
                    }
                    out.insert_add(BasisIndex(merged), c);
                }
            }
        }
        Ok(out)
    }

    /// Coefficient of the volume form `Ω_{2n}`; `None` for the zero top form.
    pub fn top_coefficient(&self) -> Result<Option<&C>> {
        if self.degree != 2 * self.n {
            return Err(QpotError::Dimension(format!(
                "top_coefficient of a degree-{} form (top degree is {})",
                self.degree,
                2 * self.n
            )));
        }
        Ok(self.components.get(&BasisIndex::top(self.n)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{cq_i, cq_int, cq_one};

    fn omega(n: usize, k: u8) -> Multivector<CQ> {
        Multivector::from_components(n, 1, [(BasisIndex::single(k), cq_one())]).unwrap()
    }

    #[test]
    fn perm_sign_matches_examples() {
        assert_eq!(perm_sign(&[0, 1, 2, 3]), 1);
        assert_eq!(perm_sign(&[1, 0, 2, 3]), -1);
        assert_eq!(perm_sign(&[0, 0, 2, 3]), 0);
        assert_eq!(perm_sign(&[]), 1);
    }

    #[test]
    fn wedge_orders_and_signs() {
        let n = 1;
        let w01 = omega(n, 0).wedge(&omega(n, 1)).unwrap();
        assert_eq!(
            *w01.component(&BasisIndex::new(vec![0, 1]).unwrap()).unwrap(),
            cq_one()
        );
        let w10 = omega(n, 1).wedge(&omega(n, 0)).unwrap();
        assert_eq!(
            *w10.component(&BasisIndex::new(vec![0, 1]).unwrap()).unwrap(),
            cq_int(-1)
        );
        assert!(omega(n, 0).wedge(&omega(n, 0)).unwrap().is_zero());
    }

    #[test]
    fn top_coefficient_examples() {
        let n = 2;
        let mut top = omega(n, 0);
        for k in 1..4 {
            top = top.wedge(&omega(n, k)).unwrap();
        }
        let five = top.scalar_mul(&cq_int(5));
        assert_eq!(*five.top_coefficient().unwrap().unwrap(), cq_int(5));

        let w10 = omega(1, 1).wedge(&omega(1, 0)).unwrap();
        assert_eq!(*w10.top_coefficient().unwrap().unwrap(), cq_int(-1));

        let zero: Multivector<CQ> = Multivector::zero(1, 2);
        assert!(zero.top_coefficient().unwrap().is_none());

        assert!(omega(1, 0).top_coefficient().is_err());
    }

    #[test]
    fn volume_form_normalization() {
        for n in 1..=3 {
            let mut top = omega(n, 0);
            for k in 1..2 * n as u8 {
                top = top.wedge(&omega(n, k)).unwrap();
            }
            assert_eq!(*top.top_coefficient().unwrap().unwrap(), cq_one());
        }
    }

    #[test]
    fn complex_coefficients_multiply_through_wedge() {
        let n = 1;
        let a = omega(n, 0).scalar_mul(&cq_i());
        let b = omega(n, 1).scalar_mul(&cq_i());
        let ab = a.wedge(&b).unwrap();
        assert_eq!(
            *ab.component(&BasisIndex::new(vec![0, 1]).unwrap()).unwrap(),
            cq_int(-1)
        );
    }

    #[test]
    fn basis_index_rejects_unsorted() {
        assert!(BasisIndex::new(vec![1, 1]).is_err());
        assert!(BasisIndex::new(vec![2, 1]).is_err());
        assert!(BasisIndex::new(vec![0, 3, 5]).is_ok());
    }

    #[test]
    fn mismatched_dimension_errors() {
        let a = omega(1, 0);
        let b = omega(2, 0);
        assert!(a.wedge(&b).is_err());
        assert!(a.add(&b).is_err());
    }
}
