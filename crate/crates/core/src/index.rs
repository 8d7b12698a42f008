//! Multi-indices and the graded ordinal numbering of `S_M = {α : |α| ≤ M}`.
//!
//! The ordinal of `α = (α₁, α₂, α₃)` is
//! `𝒩(α) = α₃ + C(α₂+α₃+1, 2) + C(α₁+α₂+α₃+2, 3) + 1`, which enumerates
//! multi-indices degree by degree, and within one degree in decreasing `α₁`,
//! then decreasing `α₂`.

use std::fmt;

use crate::error::{Error, Result};

/// Largest truncation order accepted by the index machinery.
pub const MAX_ORDER: usize = 60;

/// A triple of non-negative integers indexing 3D Hermite functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub [usize; 3]);

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex([0, 0, 0]);

    pub fn new(a1: usize, a2: usize, a3: usize) -> Self {
        MultiIndex([a1, a2, a3])
    }

    /// Checked construction from possibly negative components.
    pub fn from_signed(components: [i64; 3]) -> Result<Self> {
        if components.iter().any(|&c| c < 0) {
            return Err(Error::InvalidArgument(format!(
                "multi-index components must be non-negative, got {components:?}"
            )));
        }
        Ok(MultiIndex(components.map(|c| c as usize)))
    }

    /// Unit vector `e_d`, `d ∈ {0, 1, 2}`.
    pub fn unit(d: usize) -> Self {
        let mut a = [0; 3];
        a[d] = 1;
        MultiIndex(a)
    }

    /// `n e_d`.
    pub fn axis(d: usize, n: usize) -> Self {
        let mut a = [0; 3];
        a[d] = n;
        MultiIndex(a)
    }

    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn component(&self, d: usize) -> usize {
        self.0[d]
    }

    pub fn plus(&self, other: MultiIndex) -> MultiIndex {
        MultiIndex([
            self.0[0] + other.0[0],
            self.0[1] + other.0[1],
            self.0[2] + other.0[2],
        ])
    }

    pub fn plus_unit(&self, d: usize) -> MultiIndex {
        let mut a = self.0;
        a[d] += 1;
        MultiIndex(a)
    }

    /// `self − other`, or `None` when a component would go negative.
    pub fn checked_sub(&self, other: MultiIndex) -> Option<MultiIndex> {
        Some(MultiIndex([
            self.0[0].checked_sub(other.0[0])?,
            self.0[1].checked_sub(other.0[1])?,
            self.0[2].checked_sub(other.0[2])?,
        ]))
    }

    pub fn minus_unit(&self, d: usize) -> Option<MultiIndex> {
        self.checked_sub(MultiIndex::unit(d))
    }

    /// `α! = α₁! α₂! α₃!`.
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&a| (1..=a).map(|k| k as f64).product::<f64>())
            .product()
    }

    /// Component-wise `self ≤ other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        (0..3).all(|d| self.0[d] <= other.0[d])
    }

    /// All multi-indices `λ ≤ self` component-wise.
    pub fn sub_indices(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        let [a, b, c] = self.0;
        (0..=a).flat_map(move |i| (0..=b).flat_map(move |j| (0..=c).map(move |k| MultiIndex([i, j, k]))))
    }

    /// 1-based ordinal number `𝒩(α)`.
    pub fn ordinal(&self) -> usize {
        let [a1, a2, a3] = self.0;
        a3 + binomial_small(a2 + a3 + 1, 2) + binomial_small(a1 + a2 + a3 + 2, 3) + 1
    }

    /// 0-based position in the unknown vector, `𝒩(α) − 1`.
    pub fn position(&self) -> usize {
        self.ordinal() - 1
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

fn binomial_small(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    match k {
        0 => 1,
        1 => n,
        2 => n * (n - 1) / 2,
        3 => n * (n - 1) * (n - 2) / 6,
        _ => binomial(n as u64, k as u64).expect("small binomial") as usize,
    }
}

/// `C(n, k)` in 64-bit arithmetic; `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Checked ordinal from signed components.
pub fn ordinal(components: [i64; 3]) -> Result<usize> {
    Ok(MultiIndex::from_signed(components)?.ordinal())
}

/// Number of moments `C(M+3, 3)` for truncation order `M`.
pub fn moment_count(order: usize) -> Result<usize> {
    check_order(order)?;
    binomial(order as u64 + 3, 3)
        .map(|n| n as usize)
        .ok_or_else(|| Error::InvalidArgument(format!("binomial overflow for order {order}")))
}

fn check_order(order: usize) -> Result<()> {
    if !(3..=MAX_ORDER).contains(&order) {
        return Err(Error::InvalidArgument(format!(
            "truncation order must lie in 3..={MAX_ORDER}, got {order}"
        )));
    }
    Ok(())
}

/// `S_M` listed in ordinal order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    order: usize,
    indices: Vec<MultiIndex>,
}

impl IndexSet {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.indices.iter()
    }

    /// The multi-index at 0-based `position`.
    pub fn get(&self, position: usize) -> Option<MultiIndex> {
        self.indices.get(position).copied()
    }
}

/// Enumerate `S_M` so that the k-th element (1-based) has ordinal k.
pub fn enumerate_index_set(order: usize) -> Result<IndexSet> {
    let n = moment_count(order)?;
    let mut indices = vec![MultiIndex::ZERO; n];
    for a1 in 0..=order {
        for a2 in 0..=order - a1 {
            for a3 in 0..=order - a1 - a2 {
                let alpha = MultiIndex([a1, a2, a3]);
                indices[alpha.position()] = alpha;
            }
        }
    }
    Ok(IndexSet { order, indices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    /// Degree by degree, decreasing α₁ then decreasing α₂.
    fn graded_enumeration(order: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for deg in 0..=order {
            for a1 in (0..=deg).rev() {
                for a2 in (0..=deg - a1).rev() {
                    out.push(MultiIndex([a1, a2, deg - a1 - a2]));
                }
            }
        }
        out
    }

    #[test]
    fn ordinal_examples() {
        assert_eq!(ordinal([0, 0, 0]).unwrap(), 1);
        assert_eq!(ordinal([1, 0, 0]).unwrap(), 2);
        assert_eq!(ordinal([0, 0, 1]).unwrap(), 4);
        for m in 3..=12usize {
            assert_eq!(
                MultiIndex::axis(2, m).ordinal() as u64,
                binomial(m as u64 + 3, 3).unwrap()
            );
        }
        assert!(matches!(ordinal([0, -1, 0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn closed_form_matches_enumeration_oracle() {
        for order in 0..=8 {
            for (k, alpha) in graded_enumeration(order).into_iter().enumerate() {
                assert_eq!(alpha.ordinal(), k + 1, "{alpha}");
            }
        }
    }

    #[test]
    fn index_set_sizes() {
        assert_eq!(enumerate_index_set(3).unwrap().len(), 20);
        assert_eq!(enumerate_index_set(4).unwrap().len(), 35);
        assert_eq!(enumerate_index_set(3).unwrap().get(0), Some(MultiIndex::ZERO));
        assert!(enumerate_index_set(2).is_err());
        assert!(enumerate_index_set(61).is_err());
        assert_eq!(enumerate_index_set(60).unwrap().len(), 39711);
    }

    #[test]
    fn ordinal_is_bijective_and_graded() {
        for order in 3..=8 {
            let set = enumerate_index_set(order).unwrap();
            let n = set.len();
            let ords: HashSet<usize> = set.iter().map(|a| a.ordinal()).collect();
            assert_eq!(ords.len(), n);
            assert!(ords.iter().all(|&k| (1..=n).contains(&k)));
            for (k, a) in set.iter().enumerate() {
                assert_eq!(a.ordinal(), k + 1);
                assert!(a.order() <= order);
            }
            for a in set.iter() {
                for b in set.iter() {
                    if a.order() < b.order() {
                        assert!(a.ordinal() < b.ordinal());
                    }
                }
            }
        }
    }

    #[test]
    fn binomial_overflow_detected() {
        assert_eq!(binomial(10, 3), Some(120));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(binomial(63, 3), Some(39711));
        assert!(binomial(200, 100).is_none());
    }

    #[test]
    fn index_arithmetic() {
        let a = MultiIndex::new(2, 0, 1);
        assert_eq!(a.minus_unit(1), None);
        assert_eq!(a.minus_unit(0), Some(MultiIndex::new(1, 0, 1)));
        assert_eq!(a.factorial(), 2.0);
        assert_eq!(a.sub_indices().count(), 6);
        assert!(MultiIndex::new(1, 0, 1).le(&a));
    }
}
