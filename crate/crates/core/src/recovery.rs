//! Nearest-neighbor token recovery.
//!
//! Dense prediction heads want one token per spatial position, so after a
//! reduction the original resolution is reconstructed by gathering, for each
//! original token, the transformed token nearest to it in L2. The index is
//! computed once at reduction time; recovery itself is a pure gather and can
//! run on any later tensor with the reduced token count.

use crate::numkern::{Mat, Real};
use crate::{Error, Result};

/// For each of the N original tokens, the row of the M reduced tokens that
/// stands in for it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecoveryIndex {
    indices: Vec<usize>,
    reduced_len: usize,
}

impl RecoveryIndex {
    /// Entries are in `[0, reduced_len)`, one per original token.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn original_len(&self) -> usize {
        self.indices.len()
    }

    pub fn reduced_len(&self) -> usize {
        self.reduced_len
    }

    /// Collapses two chained stages into one index: recovering stage two and
    /// then stage one equals a single recovery with the composition.
    pub fn compose(first_stage: &RecoveryIndex, second_stage: &RecoveryIndex) -> Result<Self> {
        if first_stage.reduced_len != second_stage.original_len() {
            return Err(Error::Dimension(format!(
                "stage sizes do not chain: {} reduced vs {} original",
                first_stage.reduced_len,
                second_stage.original_len()
            )));
        }
        Ok(RecoveryIndex {
            indices: first_stage
                .indices
                .iter()
                .map(|&i| second_stage.indices[i])
                .collect(),
            reduced_len: second_stage.reduced_len,
        })
    }
}

/// Records, for every original token, the nearest reduced token by L2
/// distance; ties break toward the lowest reduced index.
pub fn build_index<R: Real>(original: &Mat<R>, reduced: &Mat<R>) -> Result<RecoveryIndex> {
    if original.cols() != reduced.cols() {
        return Err(Error::Dimension(format!(
            "token widths differ: {} vs {}",
            original.cols(),
            reduced.cols()
        )));
    }
    if reduced.rows() == 0 {
        return Err(Error::InvalidArgument(
            "cannot build a recovery index against zero reduced tokens".into(),
        ));
    }
    let indices = (0..original.rows())
        .map(|m| {
            let x = original.row(m);
            let mut best = 0;
            let mut best_d = R::infinity();
            for i in 0..reduced.rows() {
                let mut d = R::zero();
                for (&a, &b) in x.iter().zip(reduced.row(i)) {
                    let c = a - b;
                    d += c * c;
                }
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            best
        })
        .collect();
    Ok(RecoveryIndex {
        indices,
        reduced_len: reduced.rows(),
    })
}

/// Reconstructs N dense tokens from M reduced tokens by gathering the
/// recorded nearest-neighbor rows.
pub fn recover<R: Real>(reduced: &Mat<R>, index: &RecoveryIndex) -> Result<Mat<R>> {
    if reduced.rows() != index.reduced_len {
        return Err(Error::Contract(format!(
            "index was built against {} reduced tokens, got {}",
            index.reduced_len,
            reduced.rows()
        )));
    }
    reduced.gather_rows(&index.indices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkern::Matrix;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_reduction_round_trip_is_exact() {
        let x = mat(&[&[0.25, -1.5], &[2.0, 0.125], &[-3.0, 9.5]]);
        let idx = build_index(&x, &x).unwrap();
        assert_eq!(idx.indices(), &[0, 1, 2]);
        let back = recover(&x, &idx).unwrap();
        assert_eq!(back.data(), x.data());
    }

    #[test]
    fn pruned_subset_maps_to_exact_position() {
        let x = mat(&[&[1.0], &[6.0], &[9.0]]);
        let y = mat(&[&[1.0], &[9.0]]); // rows 0 and 2 survived
        let idx = build_index(&x, &y).unwrap();
        assert_eq!(idx.indices(), &[0, 1, 1]);
    }

    #[test]
    fn distance_tie_breaks_to_lowest_index() {
        let x = mat(&[&[5.0]]);
        let y = mat(&[&[1.0], &[9.0]]); // both at distance 4
        let idx = build_index(&x, &y).unwrap();
        assert_eq!(idx.indices(), &[0]);
    }

    #[test]
    fn hand_distance_oracle() {
        let x = mat(&[&[0.0], &[10.0]]);
        let y = mat(&[&[1.0], &[9.0]]);
        let idx = build_index(&x, &y).unwrap();
        assert_eq!(idx.indices(), &[0, 1]);
    }

    #[test]
    fn recover_all_zero_index_broadcasts_row_zero() {
        let y = mat(&[&[7.0, 8.0], &[1.0, 2.0]]);
        let idx = RecoveryIndex {
            indices: vec![0, 0, 0],
            reduced_len: 2,
        };
        let out = recover(&y, &idx).unwrap();
        for i in 0..3 {
            assert_eq!(out.row(i), &[7.0, 8.0]);
        }
    }

    #[test]
    fn recovered_rows_come_from_reduced_rows() {
        let y = mat(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let x = mat(&[&[0.9, 0.1], &[0.2, 0.8], &[0.5, 0.5]]);
        let idx = build_index(&x, &y).unwrap();
        let out = recover(&y, &idx).unwrap();
        for i in 0..out.rows() {
            let row = out.row(i);
            assert!(
                (0..y.rows()).any(|j| y.row(j) == row),
                "recovered row {i} is not a reduced row"
            );
        }
    }

    #[test]
    fn composition_matches_two_step_recovery() {
        let x0 = mat(&[&[0.0], &[1.0], &[4.0], &[9.0]]);
        let y1 = mat(&[&[0.5], &[4.2], &[8.5]]);
        let y2 = mat(&[&[1.0], &[8.0]]);
        let i1 = build_index(&x0, &y1).unwrap();
        let i2 = build_index(&y1, &y2).unwrap();
        let fused = RecoveryIndex::compose(&i1, &i2).unwrap();
        let final_tokens = mat(&[&[100.0], &[200.0]]);
        let two_step = recover(&recover(&final_tokens, &i2).unwrap(), &i1).unwrap();
        let one_step = recover(&final_tokens, &fused).unwrap();
        assert_eq!(two_step.data(), one_step.data());
    }

    #[test]
    fn out_of_range_index_is_contract_error() {
        let y = mat(&[&[1.0]]);
        let idx = RecoveryIndex {
            indices: vec![0],
            reduced_len: 2,
        };
        assert!(matches!(recover(&y, &idx), Err(Error::Contract(_))));
    }
}
