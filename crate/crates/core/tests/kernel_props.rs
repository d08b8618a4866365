//! Property suites for the dense kernels.

use proptest::prelude::*;
use tokreduce::numkern::{self, Mat, Matrix};

fn matrix_strategy(
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
) -> impl Strategy<Value = Matrix> {
    (rows, cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-5.0f64..5.0, r * c)
            .prop_map(move |data| Mat::from_vec(r, c, data).unwrap())
    })
}

fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Mat::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut acc = 0.0;
            for p in 0..a.cols() {
                acc += a.get(i, p) * b.get(p, j);
            }
            out.set(i, j, acc);
        }
    }
    out
}

proptest! {
    #[test]
    fn matmul_agrees_with_naive_oracle(
        (a, b) in (1usize..16, 1usize..16, 1usize..16).prop_flat_map(|(m, k, n)| {
            (
                prop::collection::vec(-5.0f64..5.0, m * k)
                    .prop_map(move |d| Mat::from_vec(m, k, d).unwrap()),
                prop::collection::vec(-5.0f64..5.0, k * n)
                    .prop_map(move |d| Mat::from_vec(k, n, d).unwrap()),
            )
        })
    ) {
        let fast = numkern::matmul(&a, &b).unwrap();
        let slow = naive_matmul(&a, &b);
        for (x, y) in fast.data().iter().zip(slow.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(z in matrix_strategy(1..10, 1..10), tau in 0.1f64..160.0) {
        let s = numkern::softmax_rows(&z, tau).unwrap();
        prop_assert!(s.is_finite());
        for i in 0..s.rows() {
            let sum: f64 = s.row(i).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12, "row {i} sums to {sum}");
        }
    }

    #[test]
    fn softmax_cols_sum_to_one(z in matrix_strategy(1..10, 1..10), tau in 0.1f64..160.0) {
        let s = numkern::softmax_cols(&z, tau).unwrap();
        prop_assert!(s.is_finite());
        for j in 0..s.cols() {
            let sum: f64 = (0..s.rows()).map(|i| s.get(i, j)).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12, "col {j} sums to {sum}");
        }
    }

    #[test]
    fn softmax_is_shift_invariant(z in matrix_strategy(1..8, 1..8), shift in -20.0f64..20.0) {
        let shifted = z.map(|v| v + shift);
        let a = numkern::softmax_rows(&z, 1.0).unwrap();
        let b = numkern::softmax_rows(&shifted, 1.0).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_diagonal_is_one_for_nonzero_rows(x in matrix_strategy(1..8, 1..8)) {
        prop_assume!((0..x.rows()).all(|i| x.row(i).iter().any(|v| v.abs() > 1e-6)));
        let s = numkern::cosine_sim(&x, &x).unwrap();
        for i in 0..x.rows() {
            prop_assert!((s.get(i, i) - 1.0).abs() < 1e-12);
            for j in 0..x.rows() {
                prop_assert!(s.get(i, j) <= 1.0 && s.get(i, j) >= -1.0);
            }
        }
    }

    #[test]
    fn topk_returns_the_k_largest(values in prop::collection::vec(-100.0f64..100.0, 1..20), frac in 0.0f64..1.0) {
        let k = ((values.len() as f64 * frac) as usize).min(values.len());
        let top = numkern::topk_indices(&values, k).unwrap();
        prop_assert_eq!(top.len(), k);
        prop_assert!(top.windows(2).all(|w| w[0] < w[1]));
        // every selected value >= every unselected value
        let selected: Vec<f64> = top.iter().map(|&i| values[i]).collect();
        let unselected: Vec<f64> = (0..values.len())
            .filter(|i| !top.contains(i))
            .map(|i| values[i])
            .collect();
        if let (Some(min_sel), Some(max_unsel)) = (
            selected.iter().cloned().reduce(f64::min),
            unselected.iter().cloned().reduce(f64::max),
        ) {
            prop_assert!(min_sel >= max_unsel);
        }
    }

    #[test]
    fn layernorm_output_is_standardized(x in matrix_strategy(1..8, 2..10)) {
        let gamma = vec![1.0; x.cols()];
        let beta = vec![0.0; x.cols()];
        let y = numkern::layernorm(&x, &gamma, &beta, 1e-12).unwrap();
        prop_assert!(y.is_finite());
        for i in 0..y.rows() {
            let d = y.cols() as f64;
            let mean: f64 = y.row(i).iter().sum::<f64>() / d;
            prop_assert!(mean.abs() < 1e-9);
        }
    }
}

#[test]
fn orthonormalize_produces_orthonormal_rows() {
    let mut rng = tokreduce_testkit::rng(99);
    let x = tokreduce_testkit::to_matrix(&tokreduce_testkit::random_rows(&mut rng, 6, 10, 1.0));
    let q = numkern::orthonormalize_rows(&x).unwrap();
    for i in 0..q.rows() {
        for j in 0..q.rows() {
            let dot: f64 = q.row(i).iter().zip(q.row(j)).map(|(a, b)| a * b).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((dot - want).abs() < 1e-10, "rows {i},{j}: {dot}");
        }
    }
}
