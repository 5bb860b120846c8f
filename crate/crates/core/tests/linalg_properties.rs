use eraser_lab::linalg::{
    complement_projector, default_rank_tol, matrix_rank, mean_row_cosine, orthonormal_basis,
    psd_inv_sqrt, singular_values, sym_eig, Matrix,
};
use proptest::prelude::*;

/// Exact rank of an integer matrix by fraction-free Gaussian elimination.
fn bareiss_rank(rows: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| v as i128).collect())
        .collect();
    let (m, n) = (a.len(), a.first().map_or(0, |r| r.len()));
    let mut rank = 0;
    let mut prev = 1i128;
    for col in 0..n {
        let Some(p) = (rank..m).find(|&i| a[i][col] != 0) else {
            continue;
        };
        a.swap(rank, p);
        for i in rank + 1..m {
            for j in col + 1..n {
                a[i][j] = (a[rank][col] * a[i][j] - a[i][col] * a[rank][j]) / prev;
            }
            a[i][col] = 0;
        }
        prev = a[rank][col];
        rank += 1;
        if rank == m {
            break;
        }
    }
    rank
}

fn to_matrix(rows: &[Vec<i64>]) -> Matrix {
    let r: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    Matrix::from_rows(&r).unwrap()
}

#[test]
fn bareiss_oracle_sanity() {
    assert_eq!(bareiss_rank(&[vec![1, 2], vec![2, 4]]), 1);
    assert_eq!(bareiss_rank(&[vec![0, 0], vec![0, 0]]), 0);
    assert_eq!(bareiss_rank(&[vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 10]]), 3);
    assert_eq!(bareiss_rank(&[vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 9]]), 2);
}

/// Integer matrix with rank at most `r`: product of `rows×r` and `r×cols`.
fn low_rank_int() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1usize..=8, 1usize..=8, 1usize..=8).prop_flat_map(|(m, n, r)| {
        (
            prop::collection::vec(prop::collection::vec(-3i64..=3, r), m),
            prop::collection::vec(prop::collection::vec(-3i64..=3, n), r),
        )
            .prop_map(move |(a, b)| {
                (0..m)
                    .map(|i| (0..n).map(|j| (0..r).map(|t| a[i][t] * b[t][j]).sum()).collect())
                    .collect()
            })
    })
}

fn random_spd(n: usize, seed_vals: &[f64]) -> Matrix {
    let g = Matrix::new(n, n, seed_vals.to_vec()).unwrap();
    g.matmul(&g.transpose()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rank_matches_exact_elimination(rows in low_rank_int()) {
        let x = to_matrix(&rows);
        let tol = default_rank_tol(x.rows(), x.cols());
        prop_assert_eq!(matrix_rank(&x, tol).unwrap(), bareiss_rank(&rows));
    }

    #[test]
    fn psd_inv_sqrt_whitens(n in 1usize..=32, vals in prop::collection::vec(-2.0f64..2.0, 32 * 32)) {
        let s = random_spd(n, &vals[..n * n]);
        let (w, w_pinv) = psd_inv_sqrt(&s, 1e-10).unwrap();
        // W S W is the projector onto the range of S
        let p = w.matmul(&s).unwrap().matmul(&w).unwrap();
        let p2 = p.matmul(&p).unwrap();
        prop_assert!(p2.max_abs_diff(&p) < 1e-6, "{}", p2.max_abs_diff(&p));
        prop_assert!(w.max_abs_diff(&w.transpose()) < 1e-9);
        // W⁺ W W⁺ == W⁺
        let back = w_pinv.matmul(&w).unwrap().matmul(&w_pinv).unwrap();
        let scale = w_pinv.max_abs().max(1.0);
        prop_assert!(back.max_abs_diff(&w_pinv) < 1e-7 * scale);
    }

    #[test]
    fn complement_projector_rank(d in 1usize..=24, k_frac in 0.0f64..=1.0, vals in prop::collection::vec(-1.0f64..1.0, 24 * 24)) {
        let k = ((d as f64) * k_frac).floor() as usize;
        if k > 0 {
            let v = Matrix::new(k, d, vals[..k * d].to_vec()).unwrap();
            let b = orthonormal_basis(&v, 1e-8).unwrap();
            let p = complement_projector(&b);
            let tol = default_rank_tol(d, d);
            prop_assert_eq!(matrix_rank(&p, tol).unwrap(), d - b.len());
        }
    }

    #[test]
    fn eigen_reconstruction(n in 1usize..=16, vals in prop::collection::vec(-3.0f64..3.0, 16 * 16)) {
        let a = Matrix::new(n, n, vals[..n * n].to_vec()).unwrap();
        let s = Matrix::new(n, n, (0..n * n).map(|i| {
            let (r, c) = (i / n, i % n);
            a.get(r, c) + a.get(c, r)
        }).collect()).unwrap();
        let e = sym_eig(&s).unwrap();
        let rebuilt = e.spectral_map(Some);
        prop_assert!(rebuilt.max_abs_diff(&s) < 1e-10 * s.max_abs().max(1.0));
        for w in e.values.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn singular_values_match_gram_eigenvalues(m in 1usize..=10, n in 1usize..=10, vals in prop::collection::vec(-2.0f64..2.0, 100)) {
        let x = Matrix::new(m, n, vals[..m * n].to_vec()).unwrap();
        let sv = singular_values(&x).unwrap();
        let gram = if m >= n { x.transpose().matmul(&x).unwrap() } else { x.matmul(&x.transpose()).unwrap() };
        let ev = sym_eig(&gram).unwrap().values;
        for (s, l) in sv.iter().zip(&ev) {
            prop_assert!((s * s - l.max(0.0)).abs() < 1e-9 * (1.0 + l.abs()));
        }
    }

    #[test]
    fn cosine_bounded_and_self_one(rows in 1usize..20, cols in 1usize..10, vals in prop::collection::vec(-5.0f64..5.0, 200), other in prop::collection::vec(-5.0f64..5.0, 200)) {
        let x = Matrix::new(rows, cols, vals[..rows * cols].to_vec()).unwrap();
        let y = Matrix::new(rows, cols, other[..rows * cols].to_vec()).unwrap();
        let c = mean_row_cosine(&x, &y).unwrap();
        if let Some(m) = c.mean {
            prop_assert!((-1.0..=1.0).contains(&m));
        }
        let s = mean_row_cosine(&x, &x).unwrap();
        if let Some(m) = s.mean {
            prop_assert!((m - 1.0).abs() < 1e-12);
        }
        prop_assert_eq!(c.rows_used + c.rows_skipped, rows);
    }
}
