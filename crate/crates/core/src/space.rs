//! Coordinate chart model and l1 coefficient arithmetic.
//!
//! A [`ChartSpace`] stands for an open set of a Banach space: either R^n with
//! one of three norms, or the first `n` coordinates of l1(N). Every radius and
//! ball computation in the crate goes through the chart's [`NormKind`].

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Sup,
    Euclidean,
    L1,
}

impl NormKind {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            NormKind::Sup => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
            NormKind::Euclidean => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormKind::L1 => v.iter().map(|x| x.abs()).sum(),
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            NormKind::Sup => a
                .iter()
                .zip(b)
                .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())),
            NormKind::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            NormKind::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NormKind::Sup => "sup",
            NormKind::Euclidean => "euclidean",
            NormKind::L1 => "l1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartSpace {
    dimension: usize,
    norm_kind: NormKind,
    truncation_of_l1: bool,
}

impl ChartSpace {
    /// Chart with the default norm: l1 for truncations of l1(N), euclidean otherwise.
    pub fn new(dimension: usize, truncation_of_l1: bool) -> Result<Self> {
        let norm = if truncation_of_l1 {
            NormKind::L1
        } else {
            NormKind::Euclidean
        };
        Self::with_norm(dimension, norm, truncation_of_l1)
    }

    pub fn euclidean(dimension: usize) -> Self {
        Self::new(dimension, false).expect("dimension must be positive")
    }

    pub fn l1_truncation(dimension: usize) -> Self {
        Self::new(dimension, true).expect("dimension must be positive")
    }

    pub fn with_norm(dimension: usize, norm_kind: NormKind, truncation_of_l1: bool) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("chart dimension must be >= 1".into()));
        }
        Ok(Self {
            dimension,
            norm_kind,
            truncation_of_l1,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm_kind
    }

    pub fn truncation_of_l1(&self) -> bool {
        self.truncation_of_l1
    }

    pub fn norm(&self, v: &Point) -> f64 {
        self.norm_kind.norm(v.as_slice())
    }

    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        self.norm_kind.distance(a.as_slice(), b.as_slice())
    }

    pub fn origin(&self) -> Point {
        Point::zeros(self.dimension)
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        if p.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: p.len(),
            });
        }
        Ok(())
    }
}

/// Ball in a chart. An infinite radius stands for the whole chart (global fields).
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
    pub norm_kind: NormKind,
}

impl Ball {
    pub fn new(center: Point, radius: f64, norm_kind: NormKind) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            center,
            radius,
            norm_kind,
        })
    }

    pub fn whole(space: &ChartSpace) -> Self {
        Self {
            center: space.origin(),
            radius: f64::INFINITY,
            norm_kind: space.norm_kind(),
        }
    }

    pub fn in_space(space: &ChartSpace, center: Point, radius: f64) -> Result<Self> {
        space.check_point(&center)?;
        Self::new(center, radius, space.norm_kind())
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    pub fn is_global(&self) -> bool {
        self.radius.is_infinite()
    }

    pub fn distance_from_center(&self, p: &Point) -> f64 {
        self.norm_kind.distance(self.center.as_slice(), p.as_slice())
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.contains_with_slack(p, 0.0)
    }

    pub fn contains_with_slack(&self, p: &Point, slack: f64) -> bool {
        p.len() == self.center.len()
            && (self.is_global() || self.distance_from_center(p) <= self.radius + slack)
    }

    /// `self` ⊆ `other`, using the triangle inequality (exact for balls of one norm).
    pub fn is_inside(&self, other: &Ball) -> bool {
        if other.is_global() {
            return true;
        }
        if self.is_global() {
            return false;
        }
        other.distance_from_center(&self.center) + self.radius <= other.radius * (1.0 + 1e-12)
    }
}

/// A finitely supported element of R^A plus an explicit bound on the l1 mass
/// of whatever was left out.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Coefficients {
    entries: Vec<(usize, f64)>,
    tail_bound: f64,
    cached_norm1: f64,
}

impl Default for L1Coefficients {
    fn default() -> Self {
        Self::zero()
    }
}

impl L1Coefficients {
    pub fn zero() -> Self {
        Self {
            entries: Vec::new(),
            tail_bound: 0.0,
            cached_norm1: 0.0,
        }
    }

    /// Builds from arbitrary (index, value) pairs: zeros are dropped, entries are
    /// sorted by index, duplicate indices are rejected.
    pub fn new(entries: impl IntoIterator<Item = (usize, f64)>, tail_bound: f64) -> Result<Self> {
        if !(tail_bound >= 0.0) || !tail_bound.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "tail bound must be finite and non-negative, got {tail_bound}"
            )));
        }
        let mut entries: Vec<(usize, f64)> = entries.into_iter().filter(|&(_, v)| v != 0.0).collect();
        if entries.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidArgument("coefficients must be finite".into()));
        }
        entries.sort_by_key(|&(i, _)| i);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("duplicate coefficient index".into()));
        }
        let cached_norm1 = entries.iter().map(|(_, v)| v.abs()).sum::<f64>() + tail_bound;
        Ok(Self {
            entries,
            tail_bound,
            cached_norm1,
        })
    }

    pub fn finite(entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        Self::new(entries, 0.0)
    }

    /// Dense coefficients `values[i]` at index `i`.
    pub fn from_dense(values: &[f64]) -> Self {
        Self::finite(values.iter().copied().enumerate()).expect("dense values are finite")
    }

    pub fn unit(index: usize) -> Self {
        Self::finite([(index, 1.0)]).expect("unit vector")
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|&(i, _)| i)
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }

    pub fn cached_norm1(&self) -> f64 {
        self.cached_norm1
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.entries.iter().map(|&(i, v)| (i, v * factor)),
            self.tail_bound * factor.abs(),
        )
        .expect("scaling keeps coefficients finite")
    }

    /// Entry-wise sum of the finite parts; tail bounds add.
    pub fn add(&self, other: &Self) -> Self {
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&(i, x)), Some(&&(j, y))) => {
                    if i == j {
                        merged.push((i, x + y));
                        a.next();
                        b.next();
                    } else if i < j {
                        merged.push((i, x));
                        a.next();
                    } else {
                        merged.push((j, y));
                        b.next();
                    }
                }
                (Some(&&e), None) => {
                    merged.push(e);
                    a.next();
                }
                (None, Some(&&e)) => {
                    merged.push(e);
                    b.next();
                }
                (None, None) => break,
            }
        }
        Self::new(merged, self.tail_bound + other.tail_bound).expect("sum of finite coefficients")
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }
}

/// Σ|value| + tail_bound.
pub fn norm1(tau: &L1Coefficients) -> f64 {
    tau.entries.iter().map(|(_, v)| v.abs()).sum::<f64>() + tau.tail_bound
}

/// Keeps the first `n` entries in index order; everything dropped moves into
/// the returned tail (together with the incoming tail bound).
pub fn truncate(tau: &L1Coefficients, n: usize) -> (L1Coefficients, f64) {
    let keep = n.min(tau.entries.len());
    let dropped: f64 = tau.entries[keep..].iter().map(|(_, v)| v.abs()).sum();
    let kept = L1Coefficients::finite(tau.entries[..keep].iter().copied())
        .expect("subset of valid coefficients");
    (kept, dropped + tau.tail_bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn norm1_examples() {
        assert_eq!(norm1(&L1Coefficients::zero()), 0.0);
        let t = L1Coefficients::finite([(0, 1.0), (3, -2.0)]).unwrap();
        assert_eq!(norm1(&t), 3.0);
        let t = L1Coefficients::new([(0, 0.5)], 0.25).unwrap();
        assert_eq!(norm1(&t), 0.75);
    }

    #[test]
    fn truncate_examples() {
        let t = L1Coefficients::finite([(0, 1.0), (1, 1.0), (2, 1.0)]).unwrap();
        let (kept, tail) = truncate(&t, 2);
        assert_eq!(kept.entries(), &[(0, 1.0), (1, 1.0)]);
        assert_eq!(tail, 1.0);

        let t = L1Coefficients::finite([(5, -4.0)]).unwrap();
        let (kept, tail) = truncate(&t, 0);
        assert!(kept.is_empty());
        assert_eq!(tail, 4.0);

        let t = L1Coefficients::new([(0, 1.0)], 0.5).unwrap();
        let (kept, tail) = truncate(&t, 1);
        assert_eq!(kept.entries(), &[(0, 1.0)]);
        assert_eq!(tail, 0.5);
    }

    #[test]
    fn zeros_dropped_and_duplicates_rejected() {
        let t = L1Coefficients::finite([(2, 0.0), (1, 3.0)]).unwrap();
        assert_eq!(t.entries(), &[(1, 3.0)]);
        assert!(L1Coefficients::finite([(1, 1.0), (1, 2.0)]).is_err());
        assert!(L1Coefficients::new([(0, 1.0)], -1.0).is_err());
    }

    #[test]
    fn default_norm_follows_chart_kind() {
        assert_eq!(ChartSpace::new(4, true).unwrap().norm_kind(), NormKind::L1);
        assert_eq!(ChartSpace::new(4, false).unwrap().norm_kind(), NormKind::Euclidean);
        assert!(ChartSpace::new(0, false).is_err());
    }

    #[test]
    fn ball_containment() {
        let s = ChartSpace::euclidean(2);
        let big = Ball::in_space(&s, Point::zeros(2), 4.0).unwrap();
        let small = Ball::in_space(&s, Point::from_vec(vec![1.0, 0.0]), 2.0).unwrap();
        assert!(small.is_inside(&big));
        assert!(!big.is_inside(&small));
        assert!(small.is_inside(&Ball::whole(&s)));
        assert!(Ball::new(Point::zeros(2), 0.0, NormKind::Sup).is_err());
    }

    #[test]
    fn norm_axioms_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in [NormKind::Sup, NormKind::Euclidean, NormKind::L1] {
            for _ in 0..1000 {
                let n = rng.random_range(1..8);
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
                let b: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
                let s: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
                assert!(kind.norm(&s) <= kind.norm(&a) + kind.norm(&b) + 1e-12);
                let lambda: f64 = rng.random_range(-5.0..5.0);
                let scaled: Vec<f64> = a.iter().map(|x| lambda * x).collect();
                let lhs = kind.norm(&scaled);
                let rhs = lambda.abs() * kind.norm(&a);
                assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
            }
        }
    }

    fn coefficients() -> impl Strategy<Value = L1Coefficients> {
        (
            proptest::collection::btree_map(0usize..64, -10.0f64..10.0, 0..20),
            0.0f64..3.0,
        )
            .prop_map(|(m, tail)| L1Coefficients::new(m, tail).unwrap())
    }

    proptest! {
        #[test]
        fn truncation_conserves_norm(tau in coefficients(), n in 0usize..30) {
            let (kept, tail) = truncate(&tau, n);
            prop_assert!((norm1(&kept) + tail - norm1(&tau)).abs() <= 1e-12 * (1.0 + norm1(&tau)));
        }

        #[test]
        fn cached_norm_matches(tau in coefficients()) {
            prop_assert!((tau.cached_norm1() - norm1(&tau)).abs() <= 1e-12);
            prop_assert!(tau.entries().iter().all(|&(_, v)| v != 0.0));
            prop_assert!(tau.entries().windows(2).all(|w| w[0].0 < w[1].0));
        }
    }
}
