//! Dense numeric kernels shared by the reducer and the encoder.
//!
//! Everything here is a pure function of its inputs: no internal state, safe
//! to call concurrently on shared read-only data. Matrices are row-major.
//! The default element type is `f64`; every kernel is generic over [`Real`]
//! so throughput benchmarks can run the same code at `f32`. Invariant
//! tolerances quoted in the tests assume `f64`.

use num_traits::Float;
use rayon::prelude::*;

use crate::{Error, Result};

/// Element type for the kernels: `f64` (default, used by all tests) or `f32`
/// (selected at run time for throughput benchmarks).
pub trait Real:
    Float + num_traits::NumAssign + std::fmt::Debug + Default + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<R: Real = f64> {
    rows: usize,
    cols: usize,
    data: Vec<R>,
}

/// The default 64-bit matrix used everywhere outside bench mode.
pub type Matrix = Mat<f64>;

impl<R: Real> std::fmt::Debug for Mat<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Mat<{}x{}>", self.rows, self.cols)?;
        if self.rows * self.cols <= 36 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl<R: Real> Mat<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![R::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = R::one();
        }
        m
    }

    /// Builds a matrix from row-major data; errors if the length is off.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<R>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<R>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged row lengths".into()));
        }
        Ok(Mat {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> R {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: R) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[R] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [R] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// New matrix made of the given rows, in the given order.
    pub fn gather_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut out = Mat::zeros(indices.len(), self.cols);
        for (k, &i) in indices.iter().enumerate() {
            if i >= self.rows {
                return Err(Error::InvalidArgument(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        Ok(out)
    }

    /// Copy of columns `[lo, hi)`.
    pub fn slice_cols(&self, lo: usize, hi: usize) -> Self {
        debug_assert!(lo <= hi && hi <= self.cols);
        let w = hi - lo;
        let mut out = Mat::zeros(self.rows, w);
        for i in 0..self.rows {
            out.row_mut(i).copy_from_slice(&self.row(i)[lo..hi]);
        }
        out
    }

    pub fn map(&self, f: impl Fn(R) -> R) -> Self {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Elementwise sum; shapes must match.
pub fn add<R: Real>(a: &Mat<R>, b: &Mat<R>) -> Result<Mat<R>> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::Dimension(format!(
            "add: {}x{} vs {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let data = a.data.iter().zip(&b.data).map(|(&x, &y)| x + y).collect();
    Ok(Mat {
        rows: a.rows,
        cols: a.cols,
        data,
    })
}

/// Adds `bias` to every row in place.
pub fn add_bias_rows<R: Real>(x: &mut Mat<R>, bias: &[R]) -> Result<()> {
    if bias.len() != x.cols {
        return Err(Error::Dimension(format!(
            "bias length {} vs {} columns",
            bias.len(),
            x.cols
        )));
    }
    for i in 0..x.rows {
        for (v, &b) in x.row_mut(i).iter_mut().zip(bias) {
            *v += b;
        }
    }
    Ok(())
}

// Serial below this many MACs; above it rows are dispatched to rayon.
// Output rows are written independently, so the result does not depend on
// the split.
const PAR_MAC_THRESHOLD: usize = 1 << 20;

/// `a * b`.
pub fn matmul<R: Real>(a: &Mat<R>, b: &Mat<R>) -> Result<Mat<R>> {
    if a.cols != b.rows {
        return Err(Error::Dimension(format!(
            "matmul: {}x{} * {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = Mat::zeros(m, n);
    let work = |(i, out_row): (usize, &mut [R])| {
        let a_row = a.row(i);
        for (p, &av) in a_row.iter().enumerate() {
            let b_row = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    };
    if m * k * n >= PAR_MAC_THRESHOLD {
        out.data.par_chunks_mut(n).enumerate().for_each(work);
    } else {
        out.data.chunks_mut(n).enumerate().for_each(work);
    }
    Ok(out)
}

/// `a * b^T` without materializing the transpose. `a` is MxK, `b` is NxK.
pub fn matmul_nt<R: Real>(a: &Mat<R>, b: &Mat<R>) -> Result<Mat<R>> {
    if a.cols != b.cols {
        return Err(Error::Dimension(format!(
            "matmul_nt: {}x{} * ({}x{})^T",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let (m, k, n) = (a.rows, a.cols, b.rows);
    let mut out = Mat::zeros(m, n);
    let work = |(i, out_row): (usize, &mut [R])| {
        let a_row = a.row(i);
        for (j, o) in out_row.iter_mut().enumerate() {
            let b_row = &b.data[j * k..(j + 1) * k];
            let mut acc = R::zero();
            for (&x, &y) in a_row.iter().zip(b_row) {
                acc += x * y;
            }
            *o = acc;
        }
    };
    if m * k * n >= PAR_MAC_THRESHOLD {
        out.data.par_chunks_mut(n).enumerate().for_each(work);
    } else {
        out.data.chunks_mut(n).enumerate().for_each(work);
    }
    Ok(out)
}

/// `a * v` for a length-`a.cols` vector.
pub fn matvec<R: Real>(a: &Mat<R>, v: &[R]) -> Result<Vec<R>> {
    if v.len() != a.cols {
        return Err(Error::Dimension(format!(
            "matvec: {}x{} * len {}",
            a.rows,
            a.cols,
            v.len()
        )));
    }
    Ok((0..a.rows)
        .map(|i| {
            let mut acc = R::zero();
            for (&x, &y) in a.row(i).iter().zip(v) {
                acc += x * y;
            }
            acc
        })
        .collect())
}

fn check_softmax_args<R: Real>(z: &Mat<R>, temperature: R) -> Result<()> {
    if temperature.is_nan() || temperature <= R::zero() {
        return Err(Error::InvalidArgument(format!(
            "softmax temperature must be > 0, got {:?}",
            temperature
        )));
    }
    if !z.is_finite() {
        return Err(Error::Numeric("softmax input contains non-finite values".into()));
    }
    Ok(())
}

/// Row-wise `softmax(temperature * z)`, stabilized by per-row max subtraction
/// so large temperatures (e.g. 150) do not overflow `exp`.
pub fn softmax_rows<R: Real>(z: &Mat<R>, temperature: R) -> Result<Mat<R>> {
    check_softmax_args(z, temperature)?;
    let mut out = z.map(|v| v * temperature);
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(R::neg_infinity(), R::max);
        let mut sum = R::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(out)
}

/// Column-wise `softmax(temperature * z)`, stabilized like [`softmax_rows`].
pub fn softmax_cols<R: Real>(z: &Mat<R>, temperature: R) -> Result<Mat<R>> {
    check_softmax_args(z, temperature)?;
    let mut out = z.map(|v| v * temperature);
    let (rows, cols) = (out.rows, out.cols);
    for j in 0..cols {
        let mut max = R::neg_infinity();
        for i in 0..rows {
            max = max.max(out.data[i * cols + j]);
        }
        let mut sum = R::zero();
        for i in 0..rows {
            let v = (out.data[i * cols + j] - max).exp();
            out.data[i * cols + j] = v;
            sum += v;
        }
        for i in 0..rows {
            out.data[i * cols + j] /= sum;
        }
    }
    Ok(out)
}

/// Pairwise cosine similarity between the rows of `a` (MxD) and `b` (NxD),
/// clamped to `[-1, 1]`. Zero-norm rows compare as 0 against everything.
pub fn cosine_sim<R: Real>(a: &Mat<R>, b: &Mat<R>) -> Result<Mat<R>> {
    cosine_sim_counted(a, b).map(|(m, _)| m)
}

/// Like [`cosine_sim`], additionally reporting how many zero-norm rows were
/// seen across both operands (a diagnostic, not a failure).
pub fn cosine_sim_counted<R: Real>(a: &Mat<R>, b: &Mat<R>) -> Result<(Mat<R>, usize)> {
    if a.cols != b.cols {
        return Err(Error::Dimension(format!(
            "cosine_sim: row length {} vs {}",
            a.cols, b.cols
        )));
    }
    let norms = |m: &Mat<R>| -> (Vec<R>, usize) {
        let mut zero = 0;
        let v = (0..m.rows)
            .map(|i| {
                let n = m.row(i).iter().map(|&x| x * x).fold(R::zero(), |s, x| s + x).sqrt();
                if n == R::zero() {
                    zero += 1;
                }
                n
            })
            .collect();
        (v, zero)
    };
    let (a_norms, a_zero) = norms(a);
    let (b_norms, b_zero) = norms(b);
    let mut out = Mat::zeros(a.rows, b.rows);
    for (i, &a_norm) in a_norms.iter().enumerate() {
        for (j, &b_norm) in b_norms.iter().enumerate() {
            let denom = a_norm * b_norm;
            let sim = if denom == R::zero() {
                R::zero()
            } else {
                let mut dot = R::zero();
                for (&x, &y) in a.row(i).iter().zip(b.row(j)) {
                    dot += x * y;
                }
                (dot / denom).max(-R::one()).min(R::one())
            };
            out.set(i, j, sim);
        }
    }
    Ok((out, a_zero + b_zero))
}

/// Per-row layer normalization with affine parameters.
pub fn layernorm<R: Real>(x: &Mat<R>, gamma: &[R], beta: &[R], eps: R) -> Result<Mat<R>> {
    if gamma.len() != x.cols || beta.len() != x.cols {
        return Err(Error::Dimension(format!(
            "layernorm: params {}/{} vs {} columns",
            gamma.len(),
            beta.len(),
            x.cols
        )));
    }
    let d = R::from_f64(x.cols as f64);
    let mut out = x.clone();
    for i in 0..out.rows {
        let row = out.row_mut(i);
        let mut mean = R::zero();
        for &v in row.iter() {
            mean += v;
        }
        mean /= d;
        let mut var = R::zero();
        for &v in row.iter() {
            let c = v - mean;
            var += c * c;
        }
        var /= d;
        let inv = (var + eps).sqrt().recip();
        for (k, v) in row.iter_mut().enumerate() {
            *v = (*v - mean) * inv * gamma[k] + beta[k];
        }
    }
    Ok(out)
}

/// GELU, tanh approximation.
pub fn gelu<R: Real>(x: &Mat<R>) -> Mat<R> {
    let half = R::from_f64(0.5);
    let c = R::from_f64(0.797_884_560_802_865_4); // sqrt(2/pi)
    let k = R::from_f64(0.044_715);
    x.map(|v| half * v * (R::one() + (c * (v + k * v * v * v)).tanh()))
}

/// Modified Gram-Schmidt over the rows. Needs rows <= cols and linearly
/// independent rows; degenerate rows are a numeric error.
pub fn orthonormalize_rows<R: Real>(x: &Mat<R>) -> Result<Mat<R>> {
    if x.rows() > x.cols() {
        return Err(Error::Dimension(format!(
            "cannot orthonormalize {} rows in {} dimensions",
            x.rows(),
            x.cols()
        )));
    }
    let mut out = x.clone();
    for i in 0..out.rows() {
        for p in 0..i {
            let mut dot = R::zero();
            for (a, b) in out.row(i).iter().zip(out.row(p)) {
                dot += *a * *b;
            }
            let prev: Vec<R> = out.row(p).to_vec();
            for (a, b) in out.row_mut(i).iter_mut().zip(prev) {
                *a -= dot * b;
            }
        }
        let norm = out
            .row(i)
            .iter()
            .map(|&v| v * v)
            .fold(R::zero(), |s, v| s + v)
            .sqrt();
        if norm.as_f64() < 1e-12 {
            return Err(Error::Numeric(format!(
                "row {i} is (numerically) dependent on earlier rows"
            )));
        }
        for v in out.row_mut(i) {
            *v /= norm;
        }
    }
    Ok(out)
}

/// Indices of the `k` largest values, ties broken toward the lowest index,
/// returned sorted ascending by index.
pub fn topk_indices<R: Real>(values: &[R], k: usize) -> Result<Vec<usize>> {
    if k > values.len() {
        return Err(Error::InvalidArgument(format!(
            "topk: k={} exceeds length {}",
            k,
            values.len()
        )));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut top: Vec<usize> = order[..k].to_vec();
    top.sort_unstable();
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    // Independent oracle for matmul: the plain triple loop in ijk order.
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

    fn assert_mat_close(a: &Matrix, b: &Matrix, tol: f64) {
        assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_abs_diff_eq!(x, y, epsilon = tol);
        }
    }

    #[test]
    fn matmul_identity() {
        let b = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let i = Matrix::identity(2);
        assert_mat_close(&matmul(&i, &b).unwrap(), &b, 0.0);
    }

    #[test]
    fn matmul_hand_example() {
        let a = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = mat(&[&[1.0], &[1.0]]);
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_matches_naive_oracle() {
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a = Mat::from_vec(5, 7, (0..35).map(|_| next()).collect()).unwrap();
        let b = Mat::from_vec(7, 3, (0..21).map(|_| next()).collect()).unwrap();
        assert_mat_close(&matmul(&a, &b).unwrap(), &naive_matmul(&a, &b), 1e-12);
        // matmul_nt(a, b) == a * b^T
        let bt = Mat::from_vec(3, 7, (0..21).map(|_| next()).collect()).unwrap();
        let mut b2 = Mat::zeros(7, 3);
        for i in 0..7 {
            for j in 0..3 {
                b2.set(i, j, bt.get(j, i));
            }
        }
        assert_mat_close(&matmul_nt(&a, &bt).unwrap(), &naive_matmul(&a, &b2), 1e-12);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        assert!(matches!(matmul(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn softmax_uniform_row() {
        let z = mat(&[&[0.0, 0.0, 0.0]]);
        let s = softmax_rows(&z, 1.0).unwrap();
        for &v in s.data() {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn softmax_scalar_exp_oracle() {
        // exp(1)/(exp(1)+exp(0)) computed independently
        let e = 1.0f64.exp();
        let z = mat(&[&[1.0, 0.0]]);
        let s = softmax_rows(&z, 1.0).unwrap();
        assert_abs_diff_eq!(s.get(0, 0), e / (e + 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(s.get(0, 1), 1.0 / (e + 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(s.get(0, 0), 0.7311, epsilon = 1e-4);
        assert_abs_diff_eq!(s.get(0, 1), 0.2689, epsilon = 1e-4);
    }

    #[test]
    fn softmax_shift_invariance() {
        let z = mat(&[&[0.3, -1.2, 4.0, 0.0]]);
        let shifted = z.map(|v| v + 17.25);
        let a = softmax_rows(&z, 1.0).unwrap();
        let b = softmax_rows(&shifted, 1.0).unwrap();
        assert_mat_close(&a, &b, 1e-12);
    }

    #[test]
    fn softmax_large_temperature_stays_finite() {
        let z = mat(&[&[1.0, 0.9, 0.0]]);
        let s = softmax_rows(&z, 150.0).unwrap();
        assert!(s.is_finite());
        let sum: f64 = s.row(0).iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn softmax_rejects_non_finite() {
        let z = mat(&[&[f64::NAN, 0.0]]);
        assert!(matches!(softmax_rows(&z, 1.0), Err(Error::Numeric(_))));
        assert!(matches!(softmax_cols(&z, 1.0), Err(Error::Numeric(_))));
    }

    #[test]
    fn softmax_cols_single_row_is_ones() {
        let z = mat(&[&[3.0, -2.0, 0.5]]);
        let s = softmax_cols(&z, 1.0).unwrap();
        assert_eq!(s.data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn softmax_cols_scalar_exp_oracle() {
        let e = 1.0f64.exp();
        let z = mat(&[&[1.0], &[0.0]]);
        let s = softmax_cols(&z, 1.0).unwrap();
        assert_abs_diff_eq!(s.get(0, 0), e / (e + 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(s.get(1, 0), 1.0 / (e + 1.0), epsilon = 1e-15);
    }

    #[test]
    fn cosine_hand_arithmetic() {
        let a = mat(&[&[3.0, 4.0]]);
        let b = mat(&[&[4.0, 3.0]]);
        let s = cosine_sim(&a, &b).unwrap();
        assert_abs_diff_eq!(s.get(0, 0), 24.0 / 25.0, epsilon = 1e-15);
    }

    #[test]
    fn cosine_identical_and_orthogonal() {
        let a = mat(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let s = cosine_sim(&a, &a).unwrap();
        assert_abs_diff_eq!(s.get(0, 0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.get(1, 1), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.get(0, 1), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cosine_zero_norm_counts_and_zeros() {
        let a = mat(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let (s, zero_rows) = cosine_sim_counted(&a, &a).unwrap();
        assert_eq!(zero_rows, 2); // once per operand
        assert_eq!(s.get(0, 0), 0.0);
        assert_eq!(s.get(0, 1), 0.0);
        assert_abs_diff_eq!(s.get(1, 1), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn layernorm_normalizes_rows() {
        let x = mat(&[&[1.0, 2.0, 3.0, 4.0]]);
        let gamma = vec![1.0; 4];
        let beta = vec![0.0; 4];
        let y = layernorm(&x, &gamma, &beta, 0.0).unwrap();
        let mean: f64 = y.row(0).iter().sum::<f64>() / 4.0;
        let var: f64 = y.row(0).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(var, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gelu_fixed_points() {
        let x = mat(&[&[0.0, 10.0, -10.0]]);
        let y = gelu(&x);
        assert_eq!(y.get(0, 0), 0.0);
        assert_abs_diff_eq!(y.get(0, 1), 10.0, epsilon = 1e-6);
        assert_abs_diff_eq!(y.get(0, 2), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn topk_hand_sort_oracle() {
        assert_eq!(topk_indices(&[0.8, 1.3, 0.9], 2).unwrap(), vec![1, 2]);
    }

    #[test]
    fn topk_tie_break_lowest_index() {
        assert_eq!(topk_indices(&[1.0, 1.0, 1.0], 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn topk_full_and_overflow() {
        assert_eq!(topk_indices(&[2.0, 1.0, 3.0], 3).unwrap(), vec![0, 1, 2]);
        assert!(matches!(
            topk_indices(&[1.0], 2),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn f32_kernels_work() {
        let a: Mat<f32> = Mat::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let s = softmax_rows(&a, 1.0f32).unwrap();
        assert!((s.get(0, 0) - 0.7311).abs() < 1e-4);
    }
}
