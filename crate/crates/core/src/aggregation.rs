//! Permutation-invariant neighbor aggregators and their split into a local
//! step (`f`, producing a [`Partial`]) and a global merge (`g`).
//!
//! For every kind, `global_aggregate(kind, [local_aggregate(B_1), ...,
//! local_aggregate(B_k)])` equals `aggregate_direct(B_1 ∪ ... ∪ B_k)`:
//! exactly for max/min, up to float reassociation for sum/mean. Sums
//! accumulate in `f64` and round to `f32` once per step. Every kind maps
//! the empty multiset to the zero vector.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for sum/mean comparisons; the scale floor is 1.
pub const SUM_MEAN_TOLERANCE: f32 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregatorKind {
    Sum,
    Mean,
    Max,
    Min,
}

impl AggregatorKind {
    pub const ALL: [AggregatorKind; 4] = [
        AggregatorKind::Sum,
        AggregatorKind::Mean,
        AggregatorKind::Max,
        AggregatorKind::Min,
    ];

    pub fn wire_code(self) -> u8 {
        match self {
            AggregatorKind::Sum => 0,
            AggregatorKind::Mean => 1,
            AggregatorKind::Max => 2,
            AggregatorKind::Min => 3,
        }
    }

    pub fn from_wire_code(code: u8) -> Option<Self> {
        Self::ALL.get(usize::from(code)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            AggregatorKind::Sum => "sum",
            AggregatorKind::Mean => "mean",
            AggregatorKind::Max => "max",
            AggregatorKind::Min => "min",
        }
    }

    /// Whether results are reproduced bit-for-bit regardless of grouping.
    pub fn is_exact(self) -> bool {
        matches!(self, AggregatorKind::Max | AggregatorKind::Min)
    }
}

impl std::str::FromStr for AggregatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown aggregator {s:?} (expected sum, mean, max or min)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregationError {
    #[error("vector has dim {found}, expected {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("partial of kind {found:?} given to a {expected:?} aggregator")]
    KindMismatch {
        expected: AggregatorKind,
        found: AggregatorKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregator {
    pub kind: AggregatorKind,
    pub dim: usize,
}

impl Aggregator {
    pub fn new(kind: AggregatorKind, dim: usize) -> Self {
        Aggregator { kind, dim }
    }

    fn check_dim(&self, len: usize) -> Result<(), AggregationError> {
        if len != self.dim {
            return Err(AggregationError::DimMismatch {
                expected: self.dim,
                found: len,
            });
        }
        Ok(())
    }
}

/// Output of the local step; the sufficient statistic shipped under ABC.
#[derive(Debug, Clone, PartialEq)]
pub enum Partial {
    Sum(Vec<f32>),
    Mean {
        sum: Vec<f32>,
        count: u32,
    },
    /// Running maximum; `values` hold `-inf` while `empty`.
    Max {
        values: Vec<f32>,
        empty: bool,
    },
    /// Running minimum; `values` hold `+inf` while `empty`.
    Min {
        values: Vec<f32>,
        empty: bool,
    },
}

impl Partial {
    /// Neutral element of `kind`.
    pub fn empty(kind: AggregatorKind, dim: usize) -> Self {
        match kind {
            AggregatorKind::Sum => Partial::Sum(vec![0.0; dim]),
            AggregatorKind::Mean => Partial::Mean {
                sum: vec![0.0; dim],
                count: 0,
            },
            AggregatorKind::Max => Partial::Max {
                values: vec![f32::NEG_INFINITY; dim],
                empty: true,
            },
            AggregatorKind::Min => Partial::Min {
                values: vec![f32::INFINITY; dim],
                empty: true,
            },
        }
    }

    /// Rebuilds a partial from its wire payload: the `d` floats plus the
    /// count (mean only). Max/min partials are empty exactly when every
    /// value is the neutral infinity.
    pub fn from_parts(kind: AggregatorKind, values: Vec<f32>, count: u32) -> Self {
        match kind {
            AggregatorKind::Sum => Partial::Sum(values),
            AggregatorKind::Mean => Partial::Mean { sum: values, count },
            AggregatorKind::Max => {
                let empty = values.iter().all(|&x| x == f32::NEG_INFINITY);
                Partial::Max { values, empty }
            }
            AggregatorKind::Min => {
                let empty = values.iter().all(|&x| x == f32::INFINITY);
                Partial::Min { values, empty }
            }
        }
    }

    pub fn kind(&self) -> AggregatorKind {
        match self {
            Partial::Sum(_) => AggregatorKind::Sum,
            Partial::Mean { .. } => AggregatorKind::Mean,
            Partial::Max { .. } => AggregatorKind::Max,
            Partial::Min { .. } => AggregatorKind::Min,
        }
    }

    /// The `d` floats carried on the wire.
    pub fn values(&self) -> &[f32] {
        match self {
            Partial::Sum(v)
            | Partial::Mean { sum: v, .. }
            | Partial::Max { values: v, .. }
            | Partial::Min { values: v, .. } => v,
        }
    }

    pub fn dim(&self) -> usize {
        self.values().len()
    }

    /// Input count for mean partials, `None` for the other kinds.
    pub fn count(&self) -> Option<u32> {
        match self {
            Partial::Mean { count, .. } => Some(*count),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Partial::Sum(_) => false,
            Partial::Mean { count, .. } => *count == 0,
            Partial::Max { empty, .. } | Partial::Min { empty, .. } => *empty,
        }
    }

    /// Combines two partials of the same kind and dim.
    pub fn merge(&self, other: &Partial) -> Result<Partial, AggregationError> {
        let agg = Aggregator::new(self.kind(), self.dim());
        let merged = merge_all(&agg, [self, other])?;
        Ok(merged)
    }

    /// The aggregate this partial stands for on its own.
    pub fn finalize(&self) -> Vec<f32> {
        match self {
            Partial::Sum(v) => v.clone(),
            Partial::Mean { sum, count } => {
                if *count == 0 {
                    vec![0.0; sum.len()]
                } else {
                    sum.iter()
                        .map(|&s| (f64::from(s) / f64::from(*count)) as f32)
                        .collect()
                }
            }
            Partial::Max { values, empty } | Partial::Min { values, empty } => {
                if *empty {
                    vec![0.0; values.len()]
                } else {
                    values.clone()
                }
            }
        }
    }
}

fn extremum(kind: AggregatorKind, acc: &mut [f32], x: &[f32]) {
    // total_cmp orders -0.0 below +0.0, so the result is independent of input order
    let wins = match kind {
        AggregatorKind::Max => Ordering::Greater,
        _ => Ordering::Less,
    };
    for (a, &b) in acc.iter_mut().zip(x) {
        if b.total_cmp(a) == wins {
            *a = b;
        }
    }
}

/// Merge of partials; the shared core of `g` and [`Partial::merge`].
fn merge_all<'a>(
    agg: &Aggregator,
    parts: impl IntoIterator<Item = &'a Partial>,
) -> Result<Partial, AggregationError> {
    let mut sum = vec![0f64; agg.dim];
    let mut count = 0u32;
    let mut out = Partial::empty(agg.kind, agg.dim);
    for part in parts {
        if part.kind() != agg.kind {
            return Err(AggregationError::KindMismatch {
                expected: agg.kind,
                found: part.kind(),
            });
        }
        agg.check_dim(part.dim())?;
        match (&mut out, part) {
            (Partial::Sum(_), Partial::Sum(v)) => {
                sum.iter_mut().zip(v).for_each(|(s, &x)| *s += f64::from(x))
            }
            (Partial::Mean { .. }, Partial::Mean { sum: v, count: c }) => {
                sum.iter_mut().zip(v).for_each(|(s, &x)| *s += f64::from(x));
                count += c;
            }
            (
                Partial::Max { values, empty },
                Partial::Max {
                    values: v,
                    empty: e,
                },
            )
            | (
                Partial::Min { values, empty },
                Partial::Min {
                    values: v,
                    empty: e,
                },
            ) => {
                if !*e {
                    extremum(agg.kind, values, v);
                    *empty = false;
                }
            }
            _ => unreachable!("kinds checked above"),
        }
    }
    let rounded = || sum.iter().map(|&s| s as f32).collect();
    Ok(match out {
        Partial::Sum(_) => Partial::Sum(rounded()),
        Partial::Mean { .. } => Partial::Mean {
            sum: rounded(),
            count,
        },
        other => other,
    })
}

/// `A`: aggregates a multiset of vectors directly, folding left in the
/// given order.
pub fn aggregate_direct<'a>(
    agg: &Aggregator,
    xs: impl IntoIterator<Item = &'a [f32]>,
) -> Result<Vec<f32>, AggregationError> {
    let mut sum = vec![0f64; agg.dim];
    let mut ext = Partial::empty(agg.kind, agg.dim);
    let mut n = 0u64;
    for x in xs {
        agg.check_dim(x.len())?;
        n += 1;
        match &mut ext {
            Partial::Max { values, .. } | Partial::Min { values, .. } => {
                extremum(agg.kind, values, x)
            }
            _ => sum.iter_mut().zip(x).for_each(|(s, &v)| *s += f64::from(v)),
        }
    }
    if n == 0 {
        return Ok(vec![0.0; agg.dim]);
    }
    Ok(match agg.kind {
        AggregatorKind::Sum => sum.iter().map(|&s| s as f32).collect(),
        AggregatorKind::Mean => sum.iter().map(|&s| (s / n as f64) as f32).collect(),
        AggregatorKind::Max | AggregatorKind::Min => ext.values().to_vec(),
    })
}

/// `f`: reduces one block of inputs to a partial.
pub fn local_aggregate<'a>(
    agg: &Aggregator,
    xs: impl IntoIterator<Item = &'a [f32]>,
) -> Result<Partial, AggregationError> {
    let mut sum = vec![0f64; agg.dim];
    let mut out = Partial::empty(agg.kind, agg.dim);
    let mut count = 0u32;
    for x in xs {
        agg.check_dim(x.len())?;
        count += 1;
        match &mut out {
            Partial::Max { values, empty } | Partial::Min { values, empty } => {
                extremum(agg.kind, values, x);
                *empty = false;
            }
            _ => sum.iter_mut().zip(x).for_each(|(s, &v)| *s += f64::from(v)),
        }
    }
    let rounded = || sum.iter().map(|&s| s as f32).collect();
    Ok(match out {
        Partial::Sum(_) => Partial::Sum(rounded()),
        Partial::Mean { .. } => Partial::Mean {
            sum: rounded(),
            count,
        },
        other => other,
    })
}

/// `g`: merges partials and finalizes the aggregate.
pub fn global_aggregate<'a>(
    agg: &Aggregator,
    parts: impl IntoIterator<Item = &'a Partial>,
) -> Result<Vec<f32>, AggregationError> {
    Ok(merge_all(agg, parts)?.finalize())
}

/// Compares two aggregation results under the kind's tolerance: bit-exact
/// for max/min, `|a - b| <= 1e-5 * max(1, |a|, |b|)` elementwise otherwise.
pub fn results_match(kind: AggregatorKind, got: &[f32], want: &[f32]) -> bool {
    results_match_scaled(kind, got, want, &[])
}

/// [`results_match`] with a per-coordinate magnitude joining the sum/mean
/// scale, typically [`input_magnitude`] of the aggregated inputs. Missing
/// coordinates count as 0.
pub fn results_match_scaled(
    kind: AggregatorKind,
    got: &[f32],
    want: &[f32],
    magnitude: &[f32],
) -> bool {
    got.len() == want.len()
        && got.iter().zip(want).enumerate().all(|(i, (&a, &b))| {
            if kind.is_exact() {
                a.to_bits() == b.to_bits()
            } else {
                let scale = 1f32
                    .max(a.abs())
                    .max(b.abs())
                    .max(magnitude.get(i).copied().unwrap_or(0.0));
                (a - b).abs() <= SUM_MEAN_TOLERANCE * scale
            }
        })
}

/// Elementwise sum (or mean) of absolute values. Rounding error of a
/// reassociated sum grows with it, not with the result. Zero for max/min.
pub fn input_magnitude<'a>(
    agg: &Aggregator,
    xs: impl IntoIterator<Item = &'a [f32]>,
) -> Result<Vec<f32>, AggregationError> {
    if agg.kind.is_exact() {
        return Ok(vec![0.0; agg.dim]);
    }
    let abs: Vec<Vec<f32>> = xs
        .into_iter()
        .map(|x| x.iter().map(|v| v.abs()).collect())
        .collect();
    aggregate_direct(agg, abs.iter().map(Vec::as_slice))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agg(kind: AggregatorKind) -> Aggregator {
        Aggregator::new(kind, 2)
    }

    fn rows(v: &[[f32; 2]]) -> Vec<&[f32]> {
        v.iter().map(|r| &r[..]).collect()
    }

    #[test]
    fn direct_examples() {
        let d = |k, xs: &[[f32; 2]]| aggregate_direct(&agg(k), rows(xs)).unwrap();
        assert_eq!(
            d(AggregatorKind::Sum, &[[1.0, 2.0], [3.0, 4.0]]),
            vec![4.0, 6.0]
        );
        assert_eq!(
            d(AggregatorKind::Mean, &[[2.0, 0.0], [4.0, 2.0], [0.0, 4.0]]),
            vec![2.0, 2.0]
        );
        assert_eq!(
            d(AggregatorKind::Max, &[[1.0, 5.0], [2.0, 0.0]]),
            vec![2.0, 5.0]
        );
        assert_eq!(
            d(AggregatorKind::Min, &[[1.0, 5.0], [2.0, 0.0]]),
            vec![1.0, 0.0]
        );
        for k in AggregatorKind::ALL {
            assert_eq!(d(k, &[]), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn local_examples() {
        let mean =
            local_aggregate(&agg(AggregatorKind::Mean), rows(&[[2.0, 0.0], [4.0, 2.0]])).unwrap();
        assert_eq!(
            mean,
            Partial::Mean {
                sum: vec![6.0, 2.0],
                count: 2
            }
        );
        let sum = local_aggregate(&agg(AggregatorKind::Sum), rows(&[])).unwrap();
        assert_eq!(sum, Partial::Sum(vec![0.0, 0.0]));
        let max = local_aggregate(&agg(AggregatorKind::Max), rows(&[[1.0, 5.0]])).unwrap();
        assert_eq!(
            max,
            Partial::Max {
                values: vec![1.0, 5.0],
                empty: false
            }
        );
        let none = local_aggregate(&agg(AggregatorKind::Min), rows(&[])).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn global_examples() {
        let a = agg(AggregatorKind::Mean);
        let parts = [
            Partial::Mean {
                sum: vec![6.0, 2.0],
                count: 2,
            },
            Partial::Mean {
                sum: vec![0.0, 4.0],
                count: 1,
            },
        ];
        assert_eq!(global_aggregate(&a, &parts).unwrap(), vec![2.0, 2.0]);

        // u with neighbors v, w, z: sum{x_v, x_w, x_z} = sum{sum{x_v, x_w}, x_z}
        let s = agg(AggregatorKind::Sum);
        let (xv, xw, xz) = ([0.5, -1.0], [0.25, 2.0], [-0.125, 3.5]);
        let left = local_aggregate(&s, rows(&[xv, xw])).unwrap();
        let right = local_aggregate(&s, rows(&[xz])).unwrap();
        assert_eq!(
            global_aggregate(&s, [&left, &right]).unwrap(),
            aggregate_direct(&s, rows(&[xv, xw, xz])).unwrap()
        );

        let m = agg(AggregatorKind::Max);
        let xs = [[1.0, -2.0], [0.5, 7.0], [3.0, 0.0]];
        let singles: Vec<_> = xs
            .iter()
            .map(|x| local_aggregate(&m, [&x[..]]).unwrap())
            .collect();
        assert_eq!(
            global_aggregate(&m, &singles).unwrap(),
            aggregate_direct(&m, rows(&xs)).unwrap()
        );
    }

    #[test]
    fn empty_partials_are_ignored_by_extrema() {
        let m = agg(AggregatorKind::Min);
        let parts = [
            Partial::empty(AggregatorKind::Min, 2),
            local_aggregate(&m, rows(&[[4.0, -4.0]])).unwrap(),
        ];
        assert_eq!(global_aggregate(&m, &parts).unwrap(), vec![4.0, -4.0]);
        assert_eq!(
            global_aggregate(&m, &[Partial::empty(AggregatorKind::Min, 2)]).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            global_aggregate(&agg(AggregatorKind::Mean), &[]).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn signed_zero_is_order_independent() {
        let m = agg(AggregatorKind::Max);
        let a = aggregate_direct(&m, rows(&[[-0.0, 0.0], [0.0, -0.0]])).unwrap();
        let b = aggregate_direct(&m, rows(&[[0.0, -0.0], [-0.0, 0.0]])).unwrap();
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn errors() {
        let s = agg(AggregatorKind::Sum);
        assert_eq!(
            aggregate_direct(&s, [&[1.0f32][..]]),
            Err(AggregationError::DimMismatch {
                expected: 2,
                found: 1
            })
        );
        assert_eq!(
            global_aggregate(&s, &[Partial::empty(AggregatorKind::Max, 2)]),
            Err(AggregationError::KindMismatch {
                expected: AggregatorKind::Sum,
                found: AggregatorKind::Max
            })
        );
        assert!(global_aggregate(&s, &[Partial::Sum(vec![1.0])]).is_err());
    }

    #[test]
    fn wire_codes_and_names() {
        for k in AggregatorKind::ALL {
            assert_eq!(AggregatorKind::from_wire_code(k.wire_code()), Some(k));
            assert_eq!(k.name().parse::<AggregatorKind>(), Ok(k));
        }
        assert_eq!(AggregatorKind::from_wire_code(255), None);
    }

    #[test]
    fn from_parts_detects_empty_extrema() {
        assert!(Partial::from_parts(AggregatorKind::Max, vec![f32::NEG_INFINITY; 3], 0).is_empty());
        assert!(
            !Partial::from_parts(AggregatorKind::Max, vec![f32::NEG_INFINITY, 1.0], 0).is_empty()
        );
        assert_eq!(
            Partial::from_parts(AggregatorKind::Mean, vec![1.0], 4).count(),
            Some(4)
        );
    }
}
