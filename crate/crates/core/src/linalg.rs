//! Small dense linear-algebra helpers shared by the jet, bracket and
//! distribution code.

use nalgebra::{DMatrix, DVector};

use crate::space::NormKind;

/// Singular values below this fraction of the largest one count as zero.
pub const RANK_RTOL: f64 = 1e-8;
/// Absolute floor so that an all-noise matrix does not report full rank.
pub const RANK_ATOL: f64 = 1e-12;

/// Operator norm of `m` for the given norm on both sides, together with a unit
/// vector attaining it.
pub fn operator_norm_with_argmax(m: &DMatrix<f64>, kind: NormKind) -> (f64, DVector<f64>) {
    let n = m.ncols();
    if n == 0 {
        return (0.0, DVector::zeros(0));
    }
    match kind {
        NormKind::L1 => {
            let mut best = (0.0, 0);
            for j in 0..n {
                let s: f64 = m.column(j).iter().map(|x| x.abs()).sum();
                if s > best.0 {
                    best = (s, j);
                }
            }
            let mut v = DVector::zeros(n);
            v[best.1] = 1.0;
            (best.0, v)
        }
        NormKind::Sup => {
            let mut best = (0.0, 0);
            for i in 0..m.nrows() {
                let s: f64 = m.row(i).iter().map(|x| x.abs()).sum();
                if s > best.0 {
                    best = (s, i);
                }
            }
            let v = DVector::from_iterator(
                n,
                m.row(best.1)
                    .iter()
                    .map(|&x| if x < 0.0 { -1.0 } else { 1.0 }),
            );
            (best.0, v)
        }
        NormKind::Euclidean => {
            let svd = m.clone().svd(false, true);
            let (idx, s) = svd
                .singular_values
                .iter()
                .copied()
                .enumerate()
                .fold((0, 0.0), |b, (i, s)| if s > b.1 { (i, s) } else { b });
            let v = match &svd.v_t {
                Some(vt) if s > 0.0 => vt.row(idx).transpose(),
                _ => {
                    let mut e = DVector::zeros(n);
                    e[0] = 1.0;
                    e
                }
            };
            (s, v)
        }
    }
}

pub fn operator_norm(m: &DMatrix<f64>, kind: NormKind) -> f64 {
    match kind {
        NormKind::Euclidean => m.singular_values().iter().copied().fold(0.0, f64::max),
        _ => operator_norm_with_argmax(m, kind).0,
    }
}

/// Columns of the returned matrix are the given vectors.
pub fn columns(vectors: &[DVector<f64>], dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

fn rank_threshold(singular: &DVector<f64>) -> f64 {
    let smax = singular.iter().copied().fold(0.0, f64::max);
    (RANK_RTOL * smax).max(RANK_ATOL)
}

pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let s = m.singular_values();
    let thr = rank_threshold(&s);
    s.iter().filter(|&&x| x > thr).count()
}

/// Ratio of largest to smallest singular value (infinite when rank deficient).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 {
        return 1.0;
    }
    let s = m.singular_values();
    let smax = s.iter().copied().fold(0.0, f64::max);
    let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
    if s.len() < m.ncols() || smin <= rank_threshold(&s) {
        f64::INFINITY
    } else {
        smax / smin
    }
}

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: DVector<f64>,
    pub residual: f64,
    pub rank: usize,
}

/// Minimum-norm least-squares solution of `a c ≈ b` by truncated SVD.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> LeastSquares {
    let ncols = a.ncols();
    if ncols == 0 {
        return LeastSquares {
            coefficients: DVector::zeros(0),
            residual: b.norm(),
            rank: 0,
        };
    }
    let svd = a.clone().svd(true, true);
    let thr = rank_threshold(&svd.singular_values);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut c = DVector::zeros(ncols);
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > thr {
            rank += 1;
            let proj = u.column(k).dot(b) / s;
            c += vt.row(k).transpose() * proj;
        }
    }
    let residual = (a * &c - b).norm();
    LeastSquares {
        coefficients: c,
        residual,
        rank,
    }
}
