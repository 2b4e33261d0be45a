//! Central finite-difference gradient verification. This is the independent
//! oracle for every hand-written backward pass in the crate: it only ever
//! calls the model's forward path, never its backward.

use super::{build, Layer, LayerSpec, Mode, ParamBlock};
use crate::tensor::Tensor;
use rand::RngExt;

#[derive(Debug, Clone)]
pub struct FdReport {
    /// (block name, max elementwise error) per parameter block.
    pub per_block: Vec<(String, f64)>,
    pub max_rel_err: f64,
    pub worst_block: String,
}

impl FdReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Compares analytic gradients already stored in the model's grad buffers
/// against central differences of `eval_loss`.
///
/// Contract: `visit` enumerates the same blocks in the same order every call,
/// and `eval_loss` recomputes the full forward pass deterministically. The
/// error metric is |analytic - numeric| / max(|analytic|, |numeric|, 1), i.e.
/// absolute for small gradients and relative for large ones.
pub fn finite_difference_check<M>(
    model: &mut M,
    mut eval_loss: impl FnMut(&mut M) -> f64,
    visit: impl Fn(&mut M, &mut dyn FnMut(ParamBlock)),
    epsilon: f64,
) -> FdReport {
    // Snapshot block names, lengths and the analytic gradients.
    let mut names: Vec<String> = Vec::new();
    let mut analytic: Vec<Vec<f64>> = Vec::new();
    visit(model, &mut |b: ParamBlock| {
        names.push(b.name.clone());
        analytic.push(b.grads.to_vec());
    });

    let nudge = |model: &mut M, block: usize, idx: usize, delta: f64| {
        let mut k = 0usize;
        visit(model, &mut |b: ParamBlock| {
            if k == block {
                b.values[idx] += delta;
            }
            k += 1;
        });
    };

    let mut per_block = Vec::with_capacity(names.len());
    let mut max_rel_err = 0.0f64;
    let mut worst_block = String::new();
    for (bi, grads) in analytic.iter().enumerate() {
        let mut block_err = 0.0f64;
        for i in 0..grads.len() {
            nudge(model, bi, i, epsilon);
            let lp = eval_loss(model);
            nudge(model, bi, i, -2.0 * epsilon);
            let lm = eval_loss(model);
            nudge(model, bi, i, epsilon);
            let numeric = (lp - lm) / (2.0 * epsilon);
            let a = grads[i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            if err > block_err {
                block_err = err;
            }
        }
        if block_err > max_rel_err {
            max_rel_err = block_err;
            worst_block = names[bi].clone();
        }
        per_block.push((names[bi].clone(), block_err));
    }
    FdReport { per_block, max_rel_err, worst_block }
}

/// Builds one randomly initialized layer instance, pushes a random batch
/// through it against a fixed random projection loss, and gradient-checks it.
pub fn fd_check_random_layer(spec: &LayerSpec, rng: &mut impl rand::Rng) -> FdReport {
    let batch = rng.random_range(1..4usize);
    let input_shape: Vec<usize> = match *spec {
        LayerSpec::Dense { input, .. } => vec![batch, input],
        LayerSpec::Conv2d { in_ch, .. } => {
            let side = rng.random_range(3..6usize);
            vec![batch, in_ch, side, side]
        }
        LayerSpec::Sigmoid | LayerSpec::Tanh | LayerSpec::Relu => {
            vec![batch, rng.random_range(2..6usize)]
        }
        LayerSpec::BatchNorm { features } => vec![batch + 1, features],
    };
    let mut layer = build(spec);
    layer.init(rng);
    // Batch-norm gets non-unit scale/shift so its backward is fully exercised.
    if let Layer::BatchNorm(bn) = &mut layer {
        for v in bn.gamma.data_mut().iter_mut().chain(bn.beta.data_mut().iter_mut()) {
            *v = rng.random_range(0.5..1.5);
        }
    }
    let mut x = Tensor::zeros(&input_shape);
    for v in x.data_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    let probe = layer.forward(&x, Mode::Train).expect("forward");
    let mut coeffs = Tensor::zeros(probe.shape());
    for v in coeffs.data_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    // loss(theta) = sum(c . f(x; theta)); analytic grads via backward(c).
    layer.zero_grads();
    layer.backward(&coeffs).expect("backward");
    finite_difference_check(
        &mut layer,
        move |l| {
            let y = l.forward(&x, Mode::Train).expect("forward");
            y.data().iter().zip(coeffs.data().iter()).map(|(a, b)| a * b).sum()
        },
        |l, f| l.visit_params("layer", f),
        1e-5,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn every_layer_kind_passes_on_random_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let specs = [
            LayerSpec::Dense { input: 5, output: 3 },
            LayerSpec::Conv2d { in_ch: 2, out_ch: 3, kh: 3, kw: 3 },
            LayerSpec::Conv2d { in_ch: 1, out_ch: 2, kh: 5, kw: 5 },
            LayerSpec::Sigmoid,
            LayerSpec::Tanh,
            LayerSpec::BatchNorm { features: 4 },
        ];
        for spec in &specs {
            for _ in 0..5 {
                let report = fd_check_random_layer(spec, &mut rng);
                assert!(report.passes(1e-4), "{spec:?}: {report:?}");
            }
        }
    }

    #[test]
    fn corrupted_gradients_fail_the_check() {
        // Deliberately scale analytic gradients; the oracle must notice.
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut layer = build(&LayerSpec::Dense { input: 4, output: 2 });
        layer.init(&mut rng);
        let mut x = Tensor::zeros(&[2, 4]);
        for v in x.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let y = layer.forward(&x, Mode::Train).unwrap();
        let upstream = Tensor::full(y.shape(), 1.0);
        layer.zero_grads();
        layer.backward(&upstream).unwrap();
        layer.visit_params("layer", &mut |b| b.grads.iter_mut().for_each(|g| *g *= 2.0));
        let xc = x.clone();
        let report = finite_difference_check(
            &mut layer,
            move |l| l.forward(&xc, Mode::Train).unwrap().data().iter().sum(),
            |l, f| l.visit_params("layer", f),
            1e-5,
        );
        assert!(!report.passes(1e-4), "corruption went unnoticed: {report:?}");
    }

    #[test]
    fn relu_check_avoids_kink_noise() {
        // ReLU is non-differentiable at 0; random inputs away from 0 keep the
        // finite-difference estimate clean.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..5 {
            let report = fd_check_random_layer(&LayerSpec::Relu, &mut rng);
            assert!(report.passes(1e-4), "{report:?}");
        }
    }
}
