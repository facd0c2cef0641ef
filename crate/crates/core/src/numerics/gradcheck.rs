//! Central finite-difference verification of reverse-mode gradients.
//!
//! Checks run at `f64` so that the difference quotient is limited by
//! truncation error rather than rounding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConvGeom, Graph, NumericsError, Tensor, Var};

/// Largest discrepancy found by one check.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: String,
    /// Max over inputs of ‖analytic − numeric‖∞ / max(‖analytic‖∞, ‖numeric‖∞).
    pub max_rel_error: f64,
    pub elements: usize,
}

/// Inf-norm relative discrepancy between two gradient vectors.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max);
    let scale = analytic.iter().chain(numeric).map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Central difference of `f` with respect to every element of `inputs[which]`.
pub fn central_difference(
    inputs: &[Tensor<f64>],
    which: usize,
    h: f64,
    f: &mut dyn FnMut(&[Tensor<f64>]) -> f64,
) -> Vec<f64> {
    let mut work = inputs.to_vec();
    (0..inputs[which].numel())
        .map(|i| {
            let orig = inputs[which].data()[i];
            work[which].data_mut()[i] = orig + h;
            let plus = f(&work);
            work[which].data_mut()[i] = orig - h;
            let minus = f(&work);
            work[which].data_mut()[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

type Builder = Box<dyn Fn(&mut Graph<f64>, &[Var]) -> Result<Var, NumericsError> + Send + Sync>;

/// One differentiable op applied to random inputs.
pub struct OpCase {
    pub name: &'static str,
    pub inputs: Vec<Tensor<f64>>,
    weights_seed: u64,
    build: Builder,
}

impl OpCase {
    /// Σ (op(inputs) ⊙ R) for a fixed random `R`, so every output element matters.
    fn loss(&self, inputs: &[Tensor<f64>]) -> Result<(Graph<f64>, Vec<Var>, Var), NumericsError> {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
        let out = (self.build)(&mut g, &vars)?;
        let shape = g.shape(out).to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(self.weights_seed);
        let n: usize = shape.iter().product();
        let r = Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let r = g.constant(r);
        let weighted = g.mul(out, r)?;
        let root = g.sum(weighted);
        Ok((g, vars, root))
    }

    pub fn check(&self, h: f64) -> Result<CheckOutcome, NumericsError> {
        let (g, vars, root) = self.loss(&self.inputs)?;
        let grads = g.backward(root)?;
        let mut worst: f64 = 0.0;
        let mut elements = 0;
        for (which, &var) in vars.iter().enumerate() {
            let analytic = grads.get(var).map(|t| t.data().to_vec()).unwrap_or_default();
            let mut f = |xs: &[Tensor<f64>]| {
                let (g, _, root) = self.loss(xs).expect("shapes validated by the first evaluation");
                g.value(root).item()
            };
            let numeric = central_difference(&self.inputs, which, h, &mut f);
            worst = worst.max(relative_error(&analytic, &numeric));
            elements += numeric.len();
        }
        Ok(CheckOutcome { name: self.name.to_string(), max_rel_error: worst, elements })
    }
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).expect("sized by shape")
}

/// Values bounded away from zero so kinks stay outside the difference stencil.
fn rand_away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v = rng.random_range(0.1..1.0);
            if rng.random::<bool>() { v } else { -v }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("sized by shape")
}

/// Every differentiable op with shapes drawn from `seed`.
pub fn random_op_cases(seed: u64) -> Vec<OpCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dim = |lo: usize, hi: usize| rng.random_range(lo..=hi);
    let (m, k, n) = (dim(1, 5), dim(1, 5), dim(1, 5));
    let (b, c) = (dim(1, 3), dim(1, 4));
    let (hgt, wid) = (dim(4, 7), dim(4, 7));
    let (cin, cout, kern) = (dim(1, 3), dim(1, 3), dim(1, 3));
    let stride = dim(1, 2);
    let pad = dim(0, 1);
    let split = dim(1, 3);

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut cases = Vec::new();
    let mut push = |name: &'static str,
                    inputs: Vec<Tensor<f64>>,
                    build: fn(&mut Graph<f64>, &[Var]) -> Result<Var, NumericsError>,
                    rng: &mut ChaCha8Rng| {
        cases.push(OpCase { name, inputs, weights_seed: rng.random(), build: Box::new(build) });
    };
    let r = &mut rng;

    push("matmul", vec![rand_tensor(r, &[m, k], -1., 1.), rand_tensor(r, &[k, n], -1., 1.)], |g, v| g.matmul(v[0], v[1]), r);
    push("add", vec![rand_tensor(r, &[m, n], -1., 1.), rand_tensor(r, &[m, n], -1., 1.)], |g, v| g.add(v[0], v[1]), r);
    push("add-broadcast", vec![rand_tensor(r, &[m, n], -1., 1.), rand_tensor(r, &[n], -1., 1.)], |g, v| g.add(v[0], v[1]), r);
    push("sub", vec![rand_tensor(r, &[b, c], -1., 1.), rand_tensor(r, &[c], -1., 1.)], |g, v| g.sub(v[0], v[1]), r);
    push("multiply", vec![rand_tensor(r, &[m, n], -1., 1.), rand_tensor(r, &[m, n], -1., 1.)], |g, v| g.mul(v[0], v[1]), r);
    push("multiply-broadcast", vec![rand_tensor(r, &[b, m, n], -1., 1.), rand_tensor(r, &[m, n], -1., 1.)], |g, v| g.mul(v[0], v[1]), r);
    push("scale", vec![rand_tensor(r, &[m, n], -1., 1.)], |g, v| Ok(g.scale(v[0], -1.7)), r);
    push("offset", vec![rand_tensor(r, &[m, n], -1., 1.)], |g, v| Ok(g.offset(v[0], 0.3)), r);
    push("relu", vec![rand_away_from_zero(r, &[m, n])], |g, v| Ok(g.relu(v[0])), r);
    push("tanh", vec![rand_tensor(r, &[m, n], -2., 2.)], |g, v| Ok(g.tanh(v[0])), r);
    push("softplus", vec![rand_tensor(r, &[m, n], -3., 3.)], |g, v| Ok(g.softplus(v[0])), r);
    push("exp", vec![rand_tensor(r, &[m, n], -1., 1.)], |g, v| Ok(g.exp(v[0])), r);
    push("log", vec![rand_tensor(r, &[m, n], 0.5, 2.)], |g, v| Ok(g.log(v[0])), r);
    push("sum", vec![rand_tensor(r, &[b, c, n], -1., 1.)], |g, v| Ok(g.sum(v[0])), r);
    push("mean", vec![rand_tensor(r, &[b, c, n], -1., 1.)], |g, v| Ok(g.mean(v[0])), r);
    push("squared-error", vec![rand_tensor(r, &[m, n], -1., 1.), rand_tensor(r, &[m, n], -1., 1.)], |g, v| g.squared_error(v[0], v[1]), r);
    push("reshape", vec![rand_tensor(r, &[m, k * n], -1., 1.)], |g, v| {
        let s = g.shape(v[0]).to_vec();
        let t = g.tanh(v[0]);
        g.reshape(t, &[s[0] * s[1]])
    }, r);
    push("concat", vec![rand_tensor(r, &[b, split], -1., 1.), rand_tensor(r, &[b, c], -1., 1.), rand_tensor(r, &[b, 2], -1., 1.)], |g, v| {
        let y = g.concat(v, 1)?;
        Ok(g.tanh(y))
    }, r);
    push("slice", vec![rand_tensor(r, &[b, c + 2, n], -1., 1.)], |g, v| g.slice(v[0], 1, 1, g.shape(v[0])[1] - 2), r);
    push("shared-node", vec![rand_tensor(r, &[m, n], -1., 1.)], |g, v| {
        let t = g.tanh(v[0]);
        let e = g.exp(t);
        g.mul(t, e)
    }, r);

    let geom = ConvGeom { stride, pad };
    if hgt + 2 * pad >= kern && wid + 2 * pad >= kern {
        cases.push(OpCase {
            name: "conv2d",
            inputs: vec![
                rand_tensor(r, &[b, cin, hgt, wid], -1., 1.),
                rand_tensor(r, &[cout, cin, kern, kern], -1., 1.),
                rand_tensor(r, &[cout], -1., 1.),
            ],
            weights_seed: r.random(),
            build: Box::new(move |g, v| g.conv2d(v[0], v[1], v[2], geom)),
        });
    }
    // kernel ≥ 2·pad + 1 keeps the transposed output non-empty
    let tk = kern.max(2 * pad + 1);
    cases.push(OpCase {
        name: "transposed-conv2d",
        inputs: vec![
            rand_tensor(r, &[b, cin, hgt - 2, wid - 2], -1., 1.),
            rand_tensor(r, &[cin, cout, tk, tk], -1., 1.),
            rand_tensor(r, &[cout], -1., 1.),
        ],
        weights_seed: r.random(),
        build: Box::new(move |g, v| g.conv_transpose2d(v[0], v[1], v[2], geom)),
    });
    cases
}
