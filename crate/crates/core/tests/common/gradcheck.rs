//! Finite-difference checks of every layer's backward pass and of the whole
//! network. Each case builds a random instance from a seed and returns the
//! worst relative error over all gradients it checks.

use rand::Rng;
use specklenet::layers::*;
use specklenet::model::{Model, ModelSpec, ParamKey};
use specklenet::{init_model, Tensor};

use super::{away_from_zero, dot, max_rel_err, numeric_grad, rng, uniform};

pub type Case = fn(u64) -> f64;

pub const LAYER_CASES: [(&str, Case); 8] = [
    ("conv", conv_case),
    ("pointwise", pointwise_case),
    ("depthwise", depthwise_case),
    ("dense", dense_case),
    ("relu", relu_case),
    ("gap", gap_case),
    ("softmax", softmax_case),
    ("softmax+cross-entropy", cross_entropy_case),
];

fn random_padding(r: &mut impl Rng) -> Padding {
    if r.gen() {
        Padding::Same
    } else {
        Padding::Valid
    }
}

/// Checks input, kernel and bias gradients of a convolution.
pub fn check_conv(x: &Tensor<f64>, p: &ConvParams<f64>, seed: u64) -> f64 {
    let out = conv2d_forward(x, p).unwrap();
    let proj = uniform(&mut rng(seed ^ 0xabc), out.shape(), -1.0, 1.0);
    let (gx, gk, gb) = conv2d_backward(x, p, &proj).unwrap();
    let loss = |x: &Tensor<f64>, p: &ConvParams<f64>| dot(&proj, &conv2d_forward(x, p).unwrap());

    let nx = numeric_grad(x, |x| loss(x, p));
    let nk = numeric_grad(&p.kernel, |k| {
        loss(
            x,
            &ConvParams {
                kernel: k.clone(),
                ..p.clone()
            },
        )
    });
    let nb = numeric_grad(&p.bias, |b| {
        loss(
            x,
            &ConvParams {
                bias: b.clone(),
                ..p.clone()
            },
        )
    });
    max_rel_err(&gx, &nx)
        .max(max_rel_err(&gk, &nk))
        .max(max_rel_err(&gb, &nb))
}

pub fn conv_case(seed: u64) -> f64 {
    let r = &mut rng(seed);
    let padding = random_padding(r);
    let (h, w) = (r.gen_range(3..=7), r.gen_range(3..=7));
    let (c_in, c_out) = (r.gen_range(1..=3), r.gen_range(1..=3));
    let stride = r.gen_range(1..=2);
    let x = uniform(r, &[h, w, c_in], -1.0, 1.0);
    let p = ConvParams::new(
        uniform(r, &[3, 3, c_in, c_out], -1.0, 1.0),
        uniform(r, &[c_out], -1.0, 1.0),
        stride,
        padding,
    )
    .unwrap();
    check_conv(&x, &p, seed)
}

pub fn pointwise_case(seed: u64) -> f64 {
    let r = &mut rng(seed);
    let (h, w) = (r.gen_range(1..=6), r.gen_range(1..=6));
    let (c_in, c_out) = (r.gen_range(1..=4), r.gen_range(1..=4));
    let x = uniform(r, &[h, w, c_in], -1.0, 1.0);
    let p = ConvParams::new(
        uniform(r, &[1, 1, c_in, c_out], -1.0, 1.0),
        uniform(r, &[c_out], -1.0, 1.0),
        r.gen_range(1..=2),
        Padding::Same,
    )
    .unwrap();
    check_conv(&x, &p, seed)
}

pub fn check_depthwise(x: &Tensor<f64>, p: &DepthwiseParams<f64>, seed: u64) -> f64 {
    let out = depthwise_forward(x, p).unwrap();
    let proj = uniform(&mut rng(seed ^ 0xdef), out.shape(), -1.0, 1.0);
    let (gx, gk, gb) = depthwise_backward(x, p, &proj).unwrap();
    let loss = |x: &Tensor<f64>, p: &DepthwiseParams<f64>| dot(&proj, &depthwise_forward(x, p).unwrap());

    let nx = numeric_grad(x, |x| loss(x, p));
    let nk = numeric_grad(&p.kernel, |k| {
        loss(
            x,
            &DepthwiseParams {
                kernel: k.clone(),
                ..p.clone()
            },
        )
    });
    let nb = numeric_grad(&p.bias, |b| {
        loss(
            x,
            &DepthwiseParams {
                bias: b.clone(),
                ..p.clone()
            },
        )
    });
    max_rel_err(&gx, &nx)
        .max(max_rel_err(&gk, &nk))
        .max(max_rel_err(&gb, &nb))
}

pub fn depthwise_case(seed: u64) -> f64 {
    let r = &mut rng(seed);
    let padding = random_padding(r);
    let (h, w, c) = (r.gen_range(3..=7), r.gen_range(3..=7), r.gen_range(1..=4));
    let x = uniform(r, &[h, w, c], -1.0, 1.0);
    let p = DepthwiseParams::new(
        uniform(r, &[3, 3, c], -1.0, 1.0),
        uniform(r, &[c], -1.0, 1.0),
        r.gen_range(1..=2),
        padding,
    )
    .unwrap();
    check_depthwise(&x, &p, seed)
}

pub fn check_dense(x: &Tensor<f64>, p: &DenseParams<f64>, seed: u64) -> f64 {
    let out = dense_forward(x, p).unwrap();
    let proj = uniform(&mut rng(seed ^ 0x123), out.shape(), -1.0, 1.0);
    let (gx, gw, gb) = dense_backward(x, p, &proj).unwrap();
    let loss = |x: &Tensor<f64>, p: &DenseParams<f64>| dot(&proj, &dense_forward(x, p).unwrap());

    let nx = numeric_grad(x, |x| loss(x, p));
    let nw = numeric_grad(&p.weights, |w| {
        loss(
            x,
            &DenseParams {
                weights: w.clone(),
                ..p.clone()
            },
        )
    });
    let nb = numeric_grad(&p.bias, |b| {
        loss(
            x,
            &DenseParams {
                bias: b.clone(),
                ..p.clone()
            },
        )
    });
    max_rel_err(&gx, &nx)
        .max(max_rel_err(&gw, &nw))
        .max(max_rel_err(&gb, &nb))
}

pub fn dense_case(seed: u64) -> f64 {
    let r = &mut rng(seed);
    let (n_in, n_out) = (r.gen_range(1..=10), r.gen_range(1..=6));
    let x = uniform(r, &[n_in], -1.0, 1.0);
    let p = DenseParams::new(uniform(r, &[n_in, n_out], -1.0, 1.0), uniform(r, &[n_out], -1.0, 1.0)).unwrap();
    check_dense(&x, &p, seed)
}

pub fn relu_case(seed: u64) -> f64 {
    let r = &mut rng(seed);
    let shape = [r.gen_range(1..=5), r.gen_range(1..=5), r.gen_range(1..=3)];
    let x = away_from_zero(r, &shape);
    let proj = uniform(r, &shape, -1.0, 1.0);
    let g = relu_backward(&x, &proj).unwrap();
    max_rel_err(&g, &numeric_grad(&x, |x| dot(&proj, &relu(x))))
}

pub fn gap_case(seed: u64) -> f64 {
    let r = &mut rng(seed);
    let (h, w, c) = (r.gen_range(1..=6), r.gen_range(1..=6), r.gen_range(1..=4));
    let x = uniform(r, &[h, w, c], -1.0, 1.0);
    let proj = uniform(r, &[c], -1.0, 1.0);
    let g = gap_backward(h, w, &proj).unwrap();
    max_rel_err(&g, &numeric_grad(&x, |x| dot(&proj, &global_avg_pool(x).unwrap())))
}

pub fn softmax_case(seed: u64) -> f64 {
    let r = &mut rng(seed);
    let k = r.gen_range(1..=12);
    let z = uniform(r, &[k], -3.0, 3.0);
    let proj = uniform(r, &[k], -1.0, 1.0);
    let g = softmax_backward(&softmax(&z).unwrap(), &proj).unwrap();
    max_rel_err(&g, &numeric_grad(&z, |z| dot(&proj, &softmax(z).unwrap())))
}

pub fn cross_entropy_case(seed: u64) -> f64 {
    let r = &mut rng(seed);
    let k = r.gen_range(2..=12);
    let label = r.gen_range(0..k);
    let z = uniform(r, &[k], -3.0, 3.0);
    let g = softmax_cross_entropy_grad(&softmax(&z).unwrap(), label).unwrap();
    let n = numeric_grad(&z, |z| cross_entropy(&softmax(z).unwrap(), label).unwrap());
    max_rel_err(&g, &n)
}

/// The canonical layer sequence at reduced width.
pub fn reduced_spec() -> ModelSpec {
    ModelSpec::separable(1, 4, (6, 8), &[8, 6, 5], 5)
}

/// A reduced-width model with every parameter, biases included, drawn at random.
pub fn random_model(seed: u64) -> Model<f64> {
    let mut m: Model<f64> = init_model(&reduced_spec(), seed).unwrap();
    let r = &mut rng(seed ^ 0x5eed);
    for t in m.params_mut().tensors_mut() {
        t.data_mut().iter_mut().for_each(|v| *v = r.gen_range(-0.8..0.8));
    }
    m
}

/// Full Jacobian of the softmax output at 16×16 with respect to the input
/// image and every parameter, each output row obtained from `backward` with a
/// one-hot seed, against central differences.
pub fn end_to_end_case(seed: u64) -> f64 {
    let model = random_model(seed);
    let x = uniform(&mut rng(seed ^ 0x1a), &[16, 16, 1], 0.0, 1.0);
    let trace = model.forward_trace(&x).unwrap();
    let classes = model.num_classes();
    let keys: Vec<ParamKey> = model.params().iter().map(|(k, _)| k).collect();

    let mut worst: f64 = 0.0;
    for j in 0..classes {
        let mut onehot = Tensor::zeros(&[classes]);
        onehot.data_mut()[j] = 1.0;
        let (grads, gx) = model.backward(&trace, &onehot).unwrap();
        let out_j = |m: &Model<f64>, x: &Tensor<f64>| m.forward(x).unwrap().data()[j];

        worst = worst.max(max_rel_err(&gx, &numeric_grad(&x, |x| out_j(&model, x))));
        for &key in &keys {
            let mut probe = model.clone();
            let param = model.params().get(key).unwrap().clone();
            let n = numeric_grad(&param, |p| {
                *probe.params_mut().get_mut(key).unwrap() = p.clone();
                out_j(&probe, &x)
            });
            worst = worst.max(max_rel_err(grads.get(key).unwrap(), &n));
        }
    }
    worst
}

/// Gradient of the training loss (fused softmax/cross-entropy path) against
/// central differences of the loss, for every parameter.
pub fn loss_gradient_case(seed: u64) -> f64 {
    let model = random_model(seed);
    let x = uniform(&mut rng(seed ^ 0x2b), &[16, 16, 1], 0.0, 1.0);
    let label = (seed as usize) % model.num_classes();
    let (_, _, grads) = model.loss_and_grad(&x, label).unwrap();
    let mut worst: f64 = 0.0;
    for (key, param) in model.params().iter() {
        let mut probe = model.clone();
        let n = numeric_grad(param, |p| {
            *probe.params_mut().get_mut(key).unwrap() = p.clone();
            cross_entropy(&probe.forward(&x).unwrap(), label).unwrap()
        });
        worst = worst.max(max_rel_err(grads.get(key).unwrap(), &n));
    }
    worst
}
