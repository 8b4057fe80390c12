use serde::{Deserialize, Serialize};

use super::matrix::gemm;
use super::{orthogonal_init, xavier_uniform_init, Matrix, RngStream};
use crate::error::check_len;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Feed-forward network with activated hidden layers and a linear output.
///
/// Parameters are stored flat: for each layer the `out × in` weight block
/// (row-major) followed by the `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

/// Per-layer outputs of a batched forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    /// `layers[0]` is the input, `layers[l + 1]` the output of layer `l`.
    layers: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("cache holds at least the input")
    }
}

impl Mlp {
    /// Zero-initialized network. `sizes` lists every layer width including
    /// input and output; one activation per hidden layer.
    pub fn zeros(sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        check_len("Mlp activations", sizes.len() - 2, activations.len())?;
        let count = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            sizes: sizes.to_vec(),
            activations: activations.to_vec(),
            params: vec![0.0; count],
        })
    }

    /// Orthogonal weights (gain `hidden_gain` on hidden layers, `output_gain`
    /// on the last) and zero biases.
    pub fn orthogonal(
        sizes: &[usize],
        activations: &[Activation],
        hidden_gain: f64,
        output_gain: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let mut net = Self::zeros(sizes, activations)?;
        for l in 0..net.num_layers() {
            let gain = if l + 1 == net.num_layers() {
                output_gain
            } else {
                hidden_gain
            };
            let w = orthogonal_init(sizes[l + 1], sizes[l], gain, rng);
            net.set_weight(l, &w)?;
        }
        Ok(net)
    }

    /// Xavier-uniform weights and zero biases on every layer.
    pub fn xavier(sizes: &[usize], activations: &[Activation], rng: &mut RngStream) -> Result<Self> {
        let mut net = Self::zeros(sizes, activations)?;
        for l in 0..net.num_layers() {
            let w = xavier_uniform_init(sizes[l], sizes[l + 1], rng);
            net.set_weight(l, &w)?;
        }
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_len("Mlp::set_params", self.params.len(), params.len())?;
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.sizes[..=layer]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// `(weights, biases)` of one layer.
    pub fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let off = self.layer_offset(layer);
        let (w, rest) = self.params[off..].split_at(fan_in * fan_out);
        (w, &rest[..fan_out])
    }

    pub fn set_weight(&mut self, layer: usize, w: &Matrix) -> Result<()> {
        let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
        check_len("Mlp::set_weight rows", fan_out, w.rows())?;
        check_len("Mlp::set_weight cols", fan_in, w.cols())?;
        let off = self.layer_offset(layer);
        self.params[off..off + fan_in * fan_out].copy_from_slice(w.data());
        Ok(())
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("Mlp::forward input", self.input_dim(), input.len())?;
        let mut x = input.to_vec();
        for l in 0..self.num_layers() {
            let (w, b) = self.layer(l);
            let fan_in = self.sizes[l];
            let mut y: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(o, &bias)| {
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    bias + row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            if let Some(&act) = self.activations.get(l) {
                y.iter_mut().for_each(|v| *v = act.apply(*v));
            }
            x = y;
        }
        Ok(x)
    }

    /// Forward pass over `batch` row-major inputs.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<ForwardCache> {
        check_len("Mlp::forward_batch input", batch * self.input_dim(), inputs.len())?;
        let mut layers = Vec::with_capacity(self.sizes.len());
        layers.push(inputs.to_vec());
        for l in 0..self.num_layers() {
            let (w, b) = self.layer(l);
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut z = Vec::with_capacity(batch * fan_out);
            for _ in 0..batch {
                z.extend_from_slice(b);
            }
            let x = layers.last().unwrap();
            // z (batch × out) += x (batch × in) · wᵀ (in × out)
            gemm(batch, fan_in, fan_out, (x, fan_in, 1), (w, 1, fan_in), 1.0, &mut z);
            if let Some(&act) = self.activations.get(l) {
                z.iter_mut().for_each(|v| *v = act.apply(*v));
            }
            layers.push(z);
        }
        Ok(ForwardCache { batch, layers })
    }

    /// Reverse-mode pass for the scalar `sum(upstream ⊙ output)`.
    ///
    /// Parameter gradients are *added* into `grads`; the gradient with respect
    /// to the inputs (`batch × input_dim`) is returned.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        check_len("Mlp::backward grads", self.params.len(), grads.len())?;
        self.backward_impl(cache, upstream, Some(grads))
    }

    /// Gradient with respect to the inputs only.
    pub fn input_gradient(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<Vec<f64>> {
        self.backward_impl(cache, upstream, None)
    }

    fn backward_impl(&self, cache: &ForwardCache, upstream: &[f64], mut grads: Option<&mut [f64]>) -> Result<Vec<f64>> {
        let batch = cache.batch;
        check_len("Mlp::backward upstream", batch * self.output_dim(), upstream.len())?;
        let mut delta = upstream.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            if let Some(&act) = self.activations.get(l) {
                for (d, &y) in delta.iter_mut().zip(&cache.layers[l + 1]) {
                    *d *= act.derivative_from_output(y);
                }
            }
            let off = self.layer_offset(l);
            let x = &cache.layers[l];
            if let Some(grads) = grads.as_deref_mut() {
                let (gw, gb) = grads[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                // gw (out × in) += deltaᵀ (out × batch) · x (batch × in)
                gemm(fan_out, batch, fan_in, (&delta, 1, fan_out), (x, fan_in, 1), 1.0, gw);
                for row in delta.chunks_exact(fan_out) {
                    for (g, d) in gb.iter_mut().zip(row) {
                        *g += d;
                    }
                }
            }
            let (w, _) = self.layer(l);
            let mut dx = vec![0.0; batch * fan_in];
            // dx (batch × in) = delta (batch × out) · w (out × in)
            gemm(batch, fan_out, fan_in, (&delta, fan_out, 1), (w, fan_in, 1), 0.0, &mut dx);
            delta = dx;
        }
        Ok(delta)
    }

    /// Gradient of `upstream · mlp(input)` with respect to every parameter.
    pub fn gradient(&self, input: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        let cache = self.forward_batch(input, 1)?;
        let mut grads = vec![0.0; self.params.len()];
        self.backward(&cache, upstream, &mut grads)?;
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(net: &Mlp, input: &[f64], upstream: &[f64]) -> f64 {
        let analytic = net.gradient(input, upstream).unwrap();
        let objective = |n: &Mlp| -> f64 {
            n.forward(input).unwrap().iter().zip(upstream).map(|(a, b)| a * b).sum()
        };
        let h = 1e-6;
        let mut worst = 0.0f64;
        for i in 0..net.param_count() {
            let mut plus = net.clone();
            plus.params_mut()[i] += h;
            let mut minus = net.clone();
            minus.params_mut()[i] -= h;
            let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
            let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[i] - numeric).abs() / scale);
        }
        worst
    }

    #[test]
    fn zero_network_gives_zero_output() {
        let net = Mlp::zeros(&[3, 4, 4, 2], &[Activation::Tanh, Activation::Tanh]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer() {
        let mut net = Mlp::zeros(&[3, 3], &[]).unwrap();
        net.set_weight(0, &Matrix::identity(3)).unwrap();
        assert_eq!(net.forward(&[0.1, -0.2, 0.3]).unwrap(), vec![0.1, -0.2, 0.3]);
    }

    #[test]
    fn unit_chain_hand_value() {
        let mut net = Mlp::zeros(&[1, 1, 1, 1], &[Activation::Tanh, Activation::Tanh]).unwrap();
        for l in 0..3 {
            net.set_weight(l, &Matrix::from_vec(1, 1, vec![1.0]).unwrap()).unwrap();
        }
        let out = net.forward(&[0.5]).unwrap()[0];
        assert!((out - 0.5f64.tanh().tanh()).abs() < 1e-15);
        assert!((out - 0.431808).abs() < 1e-6);
    }

    #[test]
    fn batch_matches_single() {
        let mut rng = RngStream::new(1);
        let net = Mlp::orthogonal(&[5, 16, 16, 3], &[Activation::Tanh, Activation::Relu], 1.4, 1.0, &mut rng).unwrap();
        let inputs: Vec<f64> = (0..20).map(|_| rng.normal()).collect();
        let cache = net.forward_batch(&inputs, 4).unwrap();
        for (b, row) in inputs.chunks(5).enumerate() {
            let single = net.forward(row).unwrap();
            for (a, s) in cache.output()[b * 3..(b + 1) * 3].iter().zip(&single) {
                assert!((a - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut rng = RngStream::new(2);
        let net = Mlp::orthogonal(&[4, 8, 8, 2], &[Activation::Tanh; 2], 1.0, 1.0, &mut rng).unwrap();
        let g = net.gradient(&[0.1, 0.2, 0.3, 0.4], &[0.0, 0.0]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_weight_gradient_is_outer_product() {
        let net = Mlp::zeros(&[3, 2], &[]).unwrap();
        let x = [0.5, -1.0, 2.0];
        let u = [3.0, -0.25];
        let g = net.gradient(&x, &u).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                assert_eq!(g[o * 3 + i], u[o] * x[i]);
            }
            assert_eq!(g[6 + o], u[o]);
        }
    }

    #[test]
    fn random_net_matches_finite_differences() {
        let mut rng = RngStream::new(3);
        for act in [Activation::Tanh, Activation::Relu] {
            for _ in 0..5 {
                let mut net = Mlp::orthogonal(&[4, 8, 8, 2], &[act; 2], 1.0, 1.0, &mut rng).unwrap();
                for b in net.params_mut().iter_mut() {
                    *b += 0.1 * rng.normal();
                }
                let x: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
                let u: Vec<f64> = (0..2).map(|_| rng.normal()).collect();
                assert!(fd_check(&net, &x, &u) < 1e-6);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let net = Mlp::zeros(&[3, 2], &[]).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Shape { .. })));
        assert!(Mlp::zeros(&[3, 4, 2], &[]).is_err());
    }
}
