//! Exact Gram–Schmidt over the rationals, shared by the oracle tests.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use spde_lab::{b_gram_schmidt, BForm, Mat};

pub type Q = BigRational;

pub fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

fn bilinear(b: &[Vec<Q>], x: &[Q], y: &[Q]) -> Q {
    let mut acc = Q::zero();
    for i in 0..x.len() {
        for j in 0..y.len() {
            acc += &b[i][j] * &x[i] * &y[j];
        }
    }
    acc
}

/// Exact Gram–Schmidt over the rationals. Returns the unnormalized
/// orthogonal vectors with their energies, and the dropped indices.
pub fn rational_gs(b: &[Vec<i64>], candidates: &[Vec<i64>]) -> (Vec<(Vec<Q>, Q)>, Vec<usize>) {
    let bq: Vec<Vec<Q>> = b.iter().map(|r| r.iter().map(|&v| q(v)).collect()).collect();
    let mut kept: Vec<(Vec<Q>, Q)> = Vec::new();
    let mut dropped = Vec::new();
    for (idx, c) in candidates.iter().enumerate() {
        let g: Vec<Q> = c.iter().map(|&v| q(v)).collect();
        let mut w = g.clone();
        for (wi, ei) in &kept {
            let coef = bilinear(&bq, &g, wi) / ei;
            for (a, b) in w.iter_mut().zip(wi) {
                *a -= &coef * b;
            }
        }
        let energy = bilinear(&bq, &w, &w);
        if energy.is_zero() {
            dropped.push(idx);
        } else {
            kept.push((w, energy));
        }
    }
    (kept, dropped)
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().expect("finite rational")
}

/// `(B, candidates)` pairs with small integer entries.
pub type Case = (Vec<Vec<i64>>, Vec<Vec<i64>>);

pub fn hand_fixed_cases() -> Vec<Case> {
    let e = |d: usize| -> Vec<Vec<i64>> { (0..d).map(|i| (0..d).map(|j| i64::from(i == j)).collect()).collect() };
    vec![
        (vec![vec![1, 0], vec![0, 1]], e(2)),
        (vec![vec![2, 1], vec![1, 1]], e(2)),
        (vec![vec![1, 0], vec![0, 0]], e(2)),
        (vec![vec![0, 0], vec![0, 0]], e(2)),
        (vec![vec![4, 2], vec![2, 1]], e(2)),
        (vec![vec![2, -1, 0], vec![-1, 2, -1], vec![0, -1, 2]], e(3)),
        (vec![vec![1, 1, 1], vec![1, 1, 1], vec![1, 1, 1]], e(3)),
        (vec![vec![3, 0, 1], vec![0, 0, 0], vec![1, 0, 3]], e(3)),
        (vec![vec![5, 2, 0], vec![2, 1, 0], vec![0, 0, 7]], vec![vec![1, 1, 1], vec![1, -1, 0], vec![0, 0, 1]]),
        (vec![vec![2, 1], vec![1, 1]], vec![vec![1, 2], vec![2, 4], vec![0, 1]]),
        (vec![vec![1, 0, 0, 0], vec![0, 2, 0, 0], vec![0, 0, 3, 0], vec![0, 0, 0, 4]], e(4)),
        (
            vec![vec![2, -1, 0, 0], vec![-1, 2, -1, 0], vec![0, -1, 2, -1], vec![0, 0, -1, 2]],
            vec![vec![1, 1, 1, 1], vec![1, 0, 0, -1], vec![0, 1, -1, 0], vec![1, 0, 0, 0]],
        ),
        (vec![vec![1, -1, 0, 0], vec![-1, 1, 0, 0], vec![0, 0, 1, -1], vec![0, 0, -1, 1]], e(4)),
        (vec![vec![4, 2, 2, 0], vec![2, 2, 1, 0], vec![2, 1, 2, 0], vec![0, 0, 0, 0]], e(4)),
        (
            vec![
                vec![6, 1, 0, 0, 1],
                vec![1, 5, 1, 0, 0],
                vec![0, 1, 4, 1, 0],
                vec![0, 0, 1, 3, 1],
                vec![1, 0, 0, 1, 2],
            ],
            e(5),
        ),
        (
            vec![
                vec![1, 1, 0, 0, 0],
                vec![1, 1, 0, 0, 0],
                vec![0, 0, 0, 0, 0],
                vec![0, 0, 0, 2, 1],
                vec![0, 0, 0, 1, 1],
            ],
            e(5),
        ),
        (
            vec![
                vec![9, 3, 0, 0, 0],
                vec![3, 2, 0, 0, 0],
                vec![0, 0, 1, 0, 0],
                vec![0, 0, 0, 1, 0],
                vec![0, 0, 0, 0, 1],
            ],
            vec![
                vec![1, 2, 3, 4, 5],
                vec![5, 4, 3, 2, 1],
                vec![1, 0, 1, 0, 1],
                vec![0, 1, 0, 1, 0],
                vec![2, 2, 4, 4, 6],
            ],
        ),
        (vec![vec![3]], vec![vec![2], vec![-5]]),
        (vec![vec![0]], vec![vec![1]]),
        (vec![vec![10, 3, 1], vec![3, 10, 3], vec![1, 3, 10]], vec![vec![1, 2, 3], vec![0, 1, 1], vec![1, 1, 0]]),
    ]
}

/// Largest entrywise gap between the float basis and the normalized exact
/// one over all hand-fixed cases, or an error naming the first case whose
/// kept/dropped pattern differs.
pub fn max_deviation_from_oracle() -> Result<f64, String> {
    let mut worst = 0.0f64;
    for (k, (b, cands)) in hand_fixed_cases().iter().enumerate() {
        let (exact, exact_dropped) = rational_gs(b, cands);
        let form = BForm::with_default_tol(Mat::from_rows(
            &b.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect::<Vec<_>>(),
        ))
        .map_err(|e| format!("case {k}: {e}"))?;
        let cf: Vec<Vec<f64>> = cands.iter().map(|c| c.iter().map(|&v| v as f64).collect()).collect();
        let basis = b_gram_schmidt(&form, &cf, form.default_zero_tol()).map_err(|e| format!("case {k}: {e}"))?;
        if basis.drop_log != exact_dropped || basis.len() != exact.len() {
            return Err(format!("case {k}: dropped {:?}, oracle dropped {exact_dropped:?}", basis.drop_log));
        }
        for (got, (w, energy)) in basis.vectors.iter().zip(&exact) {
            let norm = to_f64(energy).sqrt();
            for (g, wi) in got.iter().zip(w) {
                worst = worst.max((g - to_f64(wi) / norm).abs());
            }
        }
    }
    Ok(worst)
}
