//! Fixed-family tanh multilayer perceptron over a flat parameter vector.
//!
//! Layer `l` maps `n_l -> n_{l+1}` and stores its weights row-major
//! (`n_{l+1} x n_l`) followed by its bias. Hidden layers use `tanh`; the output
//! layer is linear.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
}

/// Per-sample activations from a forward pass, reused by backprop and JVPs.
#[derive(Debug, Clone, Default)]
pub struct Cache {
    /// `acts[0]` is the input, `acts[l]` the output of layer `l`.
    pub acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    tangent: Vec<f64>,
    tangent_next: Vec<f64>,
}

impl Cache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map_or(&[], |v| v.as_slice())
    }
}

impl Mlp {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&n| n == 0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Orthogonal weight matrices (gain 1, output layer `out_gain`) and zero biases.
    pub fn init(&self, rng: &mut impl Rng, out_gain: f64) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.n_params());
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let gain = if l + 1 == self.n_layers() { out_gain } else { 1.0 };
            let (r, c) = (n_out.max(n_in), n_out.min(n_in));
            let a = DMatrix::<f64>::from_fn(r, c, |_, _| rng.sample(StandardNormal));
            let q = a.qr().q();
            let w = if n_out >= n_in { q } else { q.transpose() };
            for o in 0..n_out {
                for i in 0..n_in {
                    theta.push(gain * w[(o, i)]);
                }
            }
            theta.extend(std::iter::repeat(0.0).take(n_out));
        }
        theta
    }

    fn check(&self, theta: &[f64], x: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() || x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} params, input {}", self.n_params(), self.input_dim()),
                actual: format!("{} params, input {}", theta.len(), x.len()),
            });
        }
        Ok(())
    }

    /// Forward pass recording activations in `cache`.
    pub fn forward_cache(&self, theta: &[f64], x: &[f64], cache: &mut Cache) -> Result<()> {
        self.check(theta, x)?;
        cache.acts.resize(self.sizes.len(), Vec::new());
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        let mut off = 0;
        let last = self.n_layers() - 1;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w, rest) = theta[off..].split_at(n_out * n_in);
            let b = &rest[..n_out];
            let (head, tail) = cache.acts.split_at_mut(l + 1);
            let h = &head[l];
            let z = &mut tail[0];
            z.clear();
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let v = b[o] + row.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
                z.push(if l == last { v } else { v.tanh() });
            }
            off += n_out * (n_in + 1);
        }
        if cache.output().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mlp output"));
        }
        Ok(())
    }

    pub fn forward(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let mut cache = Cache::default();
        self.forward_cache(theta, x, &mut cache)?;
        Ok(cache.output().to_vec())
    }

    /// Accumulates `scale * J^T seed` into `grad`, where `J = d output / d theta`
    /// at the cached point.
    pub fn backward(&self, theta: &[f64], cache: &mut Cache, seed: &[f64], scale: f64, grad: &mut [f64]) {
        debug_assert_eq!(seed.len(), self.output_dim());
        let Cache { acts, delta, delta_prev, .. } = cache;
        delta.clear();
        delta.extend(seed.iter().map(|s| s * scale));
        let mut off = self.n_params();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            off -= n_out * (n_in + 1);
            let h = &acts[l];
            {
                let (gw, gb) = grad[off..off + n_out * (n_in + 1)].split_at_mut(n_out * n_in);
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (g, &hi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(h) {
                        *g += d * hi;
                    }
                    gb[o] += d;
                }
            }
            if l > 0 {
                let w = &theta[off..off + n_out * n_in];
                delta_prev.clear();
                delta_prev.resize(n_in, 0.0);
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (dp, &wi) in delta_prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *dp += d * wi;
                    }
                }
                for (dp, &a) in delta_prev.iter_mut().zip(h) {
                    *dp *= 1.0 - a * a;
                }
                std::mem::swap(delta, delta_prev);
            }
        }
    }

    /// Forward-mode product `J v` at the cached point, written to `out`.
    pub fn jvp(&self, theta: &[f64], cache: &mut Cache, v: &[f64], out: &mut Vec<f64>) {
        let Cache { acts, tangent, tangent_next, .. } = cache;
        tangent.clear();
        tangent.resize(self.input_dim(), 0.0);
        let mut off = 0;
        let last = self.n_layers() - 1;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &theta[off..off + n_out * n_in];
            let vw = &v[off..off + n_out * n_in];
            let vb = &v[off + n_out * n_in..off + n_out * (n_in + 1)];
            let h = &acts[l];
            tangent_next.clear();
            for o in 0..n_out {
                let r = o * n_in..(o + 1) * n_in;
                let mut dz = vb[o];
                for ((&vwi, &wi), (&hi, &ti)) in vw[r.clone()].iter().zip(&w[r]).zip(h.iter().zip(tangent.iter())) {
                    dz += vwi * hi + wi * ti;
                }
                if l < last {
                    let a = acts[l + 1][o];
                    dz *= 1.0 - a * a;
                }
                tangent_next.push(dz);
            }
            std::mem::swap(tangent, tangent_next);
            off += n_out * (n_in + 1);
        }
        out.clear();
        out.extend_from_slice(tangent);
    }
}

/// `f(theta, x)`.
pub fn mlp_forward(mlp: &Mlp, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    mlp.forward(theta, x)
}

/// `J^T seed` at `(theta, x)`.
pub fn mlp_param_grad(mlp: &Mlp, theta: &[f64], x: &[f64], seed: &[f64]) -> Result<Vec<f64>> {
    let mut cache = Cache::default();
    mlp.forward_cache(theta, x, &mut cache)?;
    if seed.len() != mlp.output_dim() {
        return Err(Error::ShapeMismatch {
            expected: mlp.output_dim().to_string(),
            actual: seed.len().to_string(),
        });
    }
    let mut grad = vec![0.0; mlp.n_params()];
    mlp.backward(theta, &mut cache, seed, 1.0, &mut grad);
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_net(seed: u64) -> (Mlp, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mlp = Mlp::new(vec![3, 5, 4, 2]).unwrap();
        let theta: Vec<f64> = (0..mlp.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        (mlp, theta, x)
    }

    #[test]
    fn parameter_count() {
        let mlp = Mlp::new(vec![4, 64, 64, 2]).unwrap();
        assert_eq!(mlp.n_params(), 4 * 64 + 64 + 64 * 64 + 64 + 64 * 2 + 2);
        assert!(Mlp::new(vec![3]).is_err());
    }

    #[test]
    fn zero_network_outputs_zero_and_only_output_bias_gradients() {
        let mlp = Mlp::new(vec![2, 3, 1]).unwrap();
        let theta = vec![0.0; mlp.n_params()];
        assert_eq!(mlp.forward(&theta, &[0.3, -0.7]).unwrap(), vec![0.0]);
        let g = mlp_param_grad(&mlp, &theta, &[0.3, -0.7], &[1.0]).unwrap();
        let nonzero: Vec<usize> = g.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect();
        assert_eq!(nonzero, vec![mlp.n_params() - 1]);
    }

    #[test]
    fn gradient_matches_central_differences() {
        for seed in 0..5 {
            let (mlp, theta, x) = random_net(seed);
            let seed_vec = [0.7, -1.3];
            let g = mlp_param_grad(&mlp, &theta, &x, &seed_vec).unwrap();
            let f = |t: &[f64]| -> f64 {
                let y = mlp.forward(t, &x).unwrap();
                y[0] * seed_vec[0] + y[1] * seed_vec[1]
            };
            let h = 1e-5;
            for i in 0..theta.len() {
                let mut tp = theta.clone();
                tp[i] += h;
                let mut tm = theta.clone();
                tm[i] -= h;
                let fd = (f(&tp) - f(&tm)) / (2.0 * h);
                let rel = (fd - g[i]).abs() / g[i].abs().max(1e-3);
                assert!(rel < 1e-6, "param {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn jvp_matches_gradient_contraction() {
        let (mlp, theta, x) = random_net(9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let v: Vec<f64> = (0..mlp.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut cache = Cache::default();
        mlp.forward_cache(&theta, &x, &mut cache).unwrap();
        let mut jv = Vec::new();
        mlp.jvp(&theta, &mut cache, &v, &mut jv);
        for k in 0..2 {
            let mut seed = [0.0; 2];
            seed[k] = 1.0;
            let g = mlp_param_grad(&mlp, &theta, &x, &seed).unwrap();
            let dot: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!((dot - jv[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_init_has_orthonormal_rows() {
        let mlp = Mlp::new(vec![8, 4, 1]).unwrap();
        let theta = mlp.init(&mut ChaCha8Rng::seed_from_u64(0), 1.0);
        for a in 0..4 {
            for b in 0..4 {
                let d: f64 = (0..8).map(|i| theta[a * 8 + i] * theta[b * 8 + i]).sum();
                assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let (mlp, theta, _) = random_net(0);
        assert!(mlp.forward(&theta, &[1.0]).is_err());
        assert!(mlp.forward(&theta[1..], &[1.0, 2.0, 3.0]).is_err());
    }
}
