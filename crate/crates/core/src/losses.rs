//! Task losses.
//!
//! Nominal tasks use softmax cross-entropy. Ordinal tasks with `K` ranks are
//! split into `K - 1` binary "rank exceeds k" subproblems, each scored with
//! binary cross-entropy on its own logit, and decoded by counting the
//! subproblems that fire.
//!
//! Both losses take raw logits and return the batch-mean loss together with
//! its gradient with respect to the logits.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Binary rank code: bit `k-1` is set iff the rank exceeds `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrdinalCode {
    bits: Vec<u8>,
}

impl OrdinalCode {
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// `log(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_batch(rows: usize, labels: usize) -> Result<()> {
    if rows == 0 {
        return Err(Error::Dimension {
            layer: "loss batch".into(),
            expected: 1,
            got: 0,
        });
    }
    if rows != labels {
        return Err(Error::Dimension {
            layer: "loss labels".into(),
            expected: rows,
            got: labels,
        });
    }
    Ok(())
}

/// Softmax cross-entropy averaged over the batch.
///
/// Returns the loss and `(softmax - onehot) / B`.
pub fn nominal_loss(logits: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (rows, classes) = logits.dim();
    check_batch(rows, labels.len())?;
    let scale = 1.0 / rows as f64;
    let mut grad = Array2::zeros((rows, classes));
    let mut total = 0.0;
    for (i, (row, &label)) in logits.axis_iter(Axis(0)).zip(labels).enumerate() {
        if label >= classes {
            return Err(Error::LabelOutOfRange {
                row: i,
                label: label as i64,
            });
        }
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        total += log_z - row[label];
        let mut g = grad.row_mut(i);
        for (c, &v) in row.iter().enumerate() {
            g[c] = (v - log_z).exp() * scale;
        }
        g[label] -= scale;
    }
    Ok((total * scale, grad))
}

/// Encodes rank `y` in `1..=ranks` as `ranks - 1` threshold bits.
pub fn ordinal_encode(y: usize, ranks: usize) -> Result<OrdinalCode> {
    if ranks < 2 {
        return Err(Error::Config(format!(
            "ordinal task needs >= 2 ranks, got {ranks}"
        )));
    }
    if y < 1 || y > ranks {
        return Err(Error::LabelOutOfRange {
            row: 0,
            label: y as i64,
        });
    }
    let bits = (1..ranks).map(|k| u8::from(y > k)).collect();
    Ok(OrdinalCode { bits })
}

/// Rank = 1 + number of subproblems with a strictly positive logit.
///
/// Bit patterns are summed as-is; non-monotone codes are not repaired.
pub fn ordinal_decode(logits: ArrayView1<f64>) -> Result<usize> {
    let mut rank = 1;
    for (index, &v) in logits.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteLogit { index });
        }
        if v > 0.0 {
            rank += 1;
        }
    }
    Ok(rank)
}

/// Summed binary cross-entropy over the `K - 1` subproblems, averaged over
/// the batch. Labels are ranks in `1..=K` where `K = logits.ncols() + 1`.
pub fn ordinal_loss(logits: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (rows, subproblems) = logits.dim();
    check_batch(rows, labels.len())?;
    let ranks = subproblems + 1;
    let scale = 1.0 / rows as f64;
    let mut grad = Array2::zeros((rows, subproblems));
    let mut total = 0.0;
    for (i, (row, &y)) in logits.axis_iter(Axis(0)).zip(labels).enumerate() {
        if y < 1 || y > ranks {
            return Err(Error::LabelOutOfRange {
                row: i,
                label: y as i64,
            });
        }
        for (k, &x) in row.iter().enumerate() {
            // subproblem k+1 asks whether y > k+1
            let target = if y > k + 1 { 1.0 } else { 0.0 };
            // -[t log σ(x) + (1-t) log(1-σ(x))] = softplus(x) - t x
            total += softplus(x) - target * x;
            grad[[i, k]] = (sigmoid(x) - target) * scale;
        }
    }
    Ok((total * scale, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn nominal_uniform_logits() {
        let (loss, grad) = nominal_loss(arr2(&[[0.0, 0.0, 0.0]]).view(), &[1]).unwrap();
        assert!(close(loss, 3f64.ln(), 1e-12));
        assert!(close(loss, 1.098612, 1e-6));
        assert!(close(grad[[0, 0]], 1.0 / 3.0, 1e-12));
        assert!(close(grad[[0, 1]], 1.0 / 3.0 - 1.0, 1e-12));
    }

    #[test]
    fn nominal_saturated() {
        let (loss, _) = nominal_loss(arr2(&[[1000.0, 0.0, 0.0]]).view(), &[0]).unwrap();
        assert!(loss < 1e-6);
    }

    #[test]
    fn nominal_log_sum_exp_value() {
        let e = std::f64::consts::E;
        let oracle = (e + e * e + e * e * e).ln() - 3.0;
        assert!(close(oracle, 0.407606, 1e-6));
        let (loss, _) = nominal_loss(arr2(&[[1.0, 2.0, 3.0]]).view(), &[2]).unwrap();
        assert!(close(loss, oracle, 1e-12));
    }

    #[test]
    fn nominal_label_out_of_range_names_row() {
        let logits = arr2(&[[0.0, 1.0], [1.0, 0.0]]);
        match nominal_loss(logits.view(), &[1, 2]) {
            Err(Error::LabelOutOfRange { row: 1, label: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn encode_examples() {
        assert_eq!(ordinal_encode(1, 5).unwrap().bits(), &[0, 0, 0, 0]);
        assert_eq!(ordinal_encode(5, 5).unwrap().bits(), &[1, 1, 1, 1]);
        assert_eq!(ordinal_encode(3, 5).unwrap().bits(), &[1, 1, 0, 0]);
        assert!(ordinal_encode(0, 5).is_err());
        assert!(ordinal_encode(6, 5).is_err());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(ordinal_decode(arr1(&[-10.0; 4]).view()).unwrap(), 1);
        assert_eq!(
            ordinal_decode(arr1(&[3.0, 3.0, -3.0, -3.0]).view()).unwrap(),
            3
        );
        assert_eq!(
            ordinal_decode(arr1(&[3.0, -3.0, 3.0, -3.0]).view()).unwrap(),
            3
        );
        // ties at exactly zero do not fire
        assert_eq!(ordinal_decode(arr1(&[0.0, 0.0]).view()).unwrap(), 1);
        assert!(ordinal_decode(arr1(&[f64::NAN]).view()).is_err());
    }

    #[test]
    fn ordinal_loss_examples() {
        let (loss, _) = ordinal_loss(arr2(&[[0.0, 0.0]]).view(), &[3]).unwrap();
        assert!(close(loss, 2.0 * 2f64.ln(), 1e-12));
        assert!(close(loss, 1.386294, 1e-6));

        let (loss, _) = ordinal_loss(arr2(&[[1000.0, 1000.0, -1000.0]]).view(), &[3]).unwrap();
        assert!(loss < 1e-6);

        // two BCE terms evaluated directly from probabilities
        let p1 = 1.0 / (1.0 + (-1.0f64).exp());
        let p2 = 1.0 / (1.0 + (1.0f64).exp());
        let oracle = -(p1.ln() + (1.0 - p2).ln());
        assert!(close(oracle, 0.626523, 1e-6));
        let (loss, _) = ordinal_loss(arr2(&[[1.0, -1.0]]).view(), &[2]).unwrap();
        assert!(close(loss, oracle, 1e-12));
    }

    #[test]
    fn ordinal_label_out_of_range() {
        let logits = arr2(&[[0.0, 0.0], [0.0, 0.0]]);
        assert!(matches!(
            ordinal_loss(logits.view(), &[1, 4]),
            Err(Error::LabelOutOfRange { row: 1, label: 4 })
        ));
        assert!(matches!(
            ordinal_loss(logits.view(), &[0, 1]),
            Err(Error::LabelOutOfRange { row: 0, .. })
        ));
    }

    #[test]
    fn roundtrip_all_ranks() {
        for k in 2..=100 {
            for y in 1..=k {
                let code = ordinal_encode(y, k).unwrap();
                assert_eq!(code.len(), k - 1);
                let logits: Vec<f64> = code
                    .bits()
                    .iter()
                    .map(|&b| if b == 1 { 10.0 } else { -10.0 })
                    .collect();
                assert_eq!(ordinal_decode(arr1(&logits).view()).unwrap(), y);
            }
        }
    }

    proptest! {
        #[test]
        fn decode_stays_in_range(logits in prop::collection::vec(-50.0f64..50.0, 1..40)) {
            let k = logits.len() + 1;
            let r = ordinal_decode(arr1(&logits).view()).unwrap();
            prop_assert!((1..=k).contains(&r));
        }

        #[test]
        fn positive_shift_never_lowers_rank(
            logits in prop::collection::vec(-5.0f64..5.0, 1..20),
            shift in 0.0f64..5.0,
        ) {
            let base = ordinal_decode(arr1(&logits).view()).unwrap();
            let moved: Vec<f64> = logits.iter().map(|v| v + shift).collect();
            prop_assert!(ordinal_decode(arr1(&moved).view()).unwrap() >= base);
        }

        #[test]
        fn nominal_shift_invariance(
            row in prop::collection::vec(-20.0f64..20.0, 2..10),
            shift in -100.0f64..100.0,
            pick in 0usize..10,
        ) {
            let label = pick % row.len();
            let a = Array2::from_shape_vec((1, row.len()), row.clone()).unwrap();
            let b = a.mapv(|v| v + shift);
            let (la, _) = nominal_loss(a.view(), &[label]).unwrap();
            let (lb, _) = nominal_loss(b.view(), &[label]).unwrap();
            prop_assert!((la - lb).abs() < 1e-9);
        }

        #[test]
        fn losses_nonnegative(
            row in prop::collection::vec(-30.0f64..30.0, 2..10),
            pick in 0usize..10,
        ) {
            let c = row.len();
            let a = Array2::from_shape_vec((1, c), row).unwrap();
            let (ln, _) = nominal_loss(a.view(), &[pick % c]).unwrap();
            let (lo, _) = ordinal_loss(a.view(), &[pick % (c + 1) + 1]).unwrap();
            prop_assert!(ln >= 0.0);
            prop_assert!(lo >= 0.0);
        }
    }
}
