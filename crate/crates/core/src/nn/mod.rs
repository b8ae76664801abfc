//! Dense f64 matrices, a reverse-mode tape, Adam, and parameter checkpoints.

mod adam;
mod checkpoint;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint};
pub use tape::{Gradients, NodeId, SparseMatrix, Tape};
pub use tensor::Tensor2;

/// A fixed, ordered collection of named trainable tensors.
pub trait Parameters {
    fn named(&self) -> Vec<(String, &Tensor2)>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor2>;

    fn num_scalars(&self) -> usize {
        self.named().iter().map(|(_, t)| t.data().len()).sum()
    }
}

/// Plain named tensors, e.g. a decoded checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensors(pub Vec<(String, Tensor2)>);

impl Parameters for NamedTensors {
    fn named(&self) -> Vec<(String, &Tensor2)> {
        self.0.iter().map(|(n, t)| (n.clone(), t)).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        self.0.iter_mut().map(|(_, t)| t).collect()
    }
}


#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::gradcheck::check;
    use super::*;
    use crate::error::Error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor2 {
        Tensor2::new(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    const H: f64 = 1e-5;
    const TOL: f64 = 1e-4;

    #[test]
    fn singleton_softmax_is_one() {
        let mut t = Tape::new();
        let x = t.constant(Tensor2::scalar(-3.2));
        let y = t.row_softmax(x);
        assert_eq!(t.value(y).get(0, 0), 1.0);
    }

    #[test]
    fn uniform_logits_cross_entropy_is_ln_c() {
        let mut t = Tape::new();
        let x = t.constant(Tensor2::filled(1, 3, 0.7));
        let l = t.cross_entropy(x, &[2]).unwrap();
        assert!((t.value(l).get(0, 0) - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn softmax_rows_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut t = Tape::new();
        let x = t.constant(random(&mut rng, 5, 7).map(|v| v * 50.0));
        let y = t.row_softmax(x);
        for r in 0..5 {
            let row = t.value(y).row(r);
            assert!(row.iter().all(|&p| p >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sum_gradient_is_all_ones() {
        let mut t = Tape::new();
        let w = t.param(Tensor2::filled(2, 3, 0.5));
        let l = t.sum(w);
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(w).unwrap(), &Tensor2::filled(2, 3, 1.0));
    }

    #[test]
    fn zero_parameter_graph_has_no_gradients() {
        let mut t = Tape::new();
        let x = t.constant(Tensor2::filled(2, 2, 1.0));
        let l = t.sum(x);
        assert!(t.backward(l).unwrap().is_empty());
    }

    #[test]
    fn backward_twice_needs_reset() {
        let mut t = Tape::new();
        let w = t.param(Tensor2::scalar(1.0));
        let l = t.sum(w);
        t.backward(l).unwrap();
        assert!(matches!(t.backward(l), Err(Error::BackwardTwice)));
        t.reset();
        let w = t.param(Tensor2::scalar(1.0));
        let l = t.sum(w);
        assert!(t.backward(l).is_ok());
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut t = Tape::new();
        let w = t.param(Tensor2::filled(1, 2, 1.0));
        assert!(matches!(t.backward(w), Err(Error::NonScalarLoss((1, 2)))));
    }

    #[test]
    fn shape_errors_report_both_shapes() {
        let mut t = Tape::new();
        let a = t.constant(Tensor2::zeros(3, 4));
        let b = t.constant(Tensor2::zeros(3, 2));
        let err = t.matmul(a, b).unwrap_err();
        assert!(matches!(err, Error::Shape { left: (3, 4), right: (3, 2), .. }));
        assert!(t.add(a, b).is_err());
        assert!(t.concat_cols(&[a, b]).is_ok());
    }

    #[test]
    fn matmul_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ps = [random(&mut rng, 3, 4), random(&mut rng, 4, 2)];
        let err = check(&ps, H, |t, ids| {
            let y = t.matmul(ids[0], ids[1])?;
            let s = t.scale(y, 1.3);
            Ok(t.sum(s))
        });
        assert!(err < TOL, "{err}");
    }

    #[test]
    fn elementwise_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ps = [random(&mut rng, 4, 3), random(&mut rng, 4, 3), random(&mut rng, 1, 3)];
        let w = random(&mut rng, 3, 1);
        let err = check(&ps, H, |t, ids| {
            let a = t.add(ids[0], ids[1])?;
            let b = t.add_row(a, ids[2])?;
            let r = t.relu(b);
            let l = t.leaky_relu(a, 0.2);
            let c = t.concat_cols(&[r, l])?;
            let s = t.row_softmax(c);
            let m = t.row_mean(s)?;
            let sl = t.slice_rows(b, 1, 2)?;
            let wn = t.constant(w.clone());
            let proj = t.matmul(sl, wn)?;
            let s1 = t.sum(m);
            let s2 = t.sum(proj);
            let tot = t.add(s1, s2)?;
            let sq = t.matmul(sl, wn)?;
            let sq = t.relu(sq);
            let s3 = t.sum(sq);
            t.add(tot, s3)
        });
        assert!(err < TOL, "{err}");
    }

    #[test]
    fn cross_entropy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ps = [random(&mut rng, 5, 3)];
        let err = check(&ps, H, |t, ids| t.cross_entropy(ids[0], &[0, 2, 1, 1, 0]));
        assert!(err < TOL, "{err}");
    }

    #[test]
    fn graph_primitive_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ps = [random(&mut rng, 4, 3), random(&mut rng, 3, 1)];
        let sparse = Arc::new(SparseMatrix {
            rows: 4,
            cols: 4,
            entries: vec![(0, 0, 0.5), (0, 1, 0.7), (1, 1, 1.0), (2, 0, -0.3), (3, 3, 2.0), (3, 2, 0.1)],
        });
        let src = Arc::new(vec![0, 1, 0, 2, 3, 1]);
        let dst = Arc::new(vec![0, 0, 1, 1, 1, 3]);
        let seg = Arc::new(vec![0, 0, 1, 1]);
        let err = check(&ps, H, |t, ids| {
            let x = t.sparse_matmul(sparse.clone(), ids[0])?;
            let s = t.matmul(x, ids[1])?;
            let e = t.gather_rows(s, src.clone())?;
            let e = t.leaky_relu(e, 0.2);
            let a = t.segment_softmax(e, dst.clone(), 4)?;
            let z = t.gather_rows(x, src.clone())?;
            let m = t.mul_col(a, z)?;
            let out = t.scatter_add_rows(m, dst.clone(), 4)?;
            let out = t.relu(out);
            let pooled = t.segment_mean(out, seg.clone(), 2)?;
            t.cross_entropy(pooled, &[1, 2])
        });
        assert!(err < TOL, "{err}");
    }

    #[test]
    fn segment_softmax_normalizes_each_group() {
        let mut t = Tape::new();
        let x = t.constant(Tensor2::column_vector(vec![1.0, 2.0, -1.0, 0.5, 3.0]));
        let y = t.segment_softmax(x, Arc::new(vec![0, 0, 1, 0, 2]), 3).unwrap();
        let v = t.value(y).data().to_vec();
        assert!((v[0] + v[1] + v[3] - 1.0).abs() < 1e-12);
        assert_eq!(v[2], 1.0);
        assert_eq!(v[4], 1.0);
    }
}
