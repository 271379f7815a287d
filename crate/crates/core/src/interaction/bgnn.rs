use rayon::prelude::*;

use super::{InteractionConfig, InteractionGraph, InteractionLabel};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Fully connected layer with a factorized Gaussian posterior per parameter.
///
/// Weights are row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesianLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight_means: Vec<f64>,
    pub weight_log_stds: Vec<f64>,
    pub bias_means: Vec<f64>,
    pub bias_log_stds: Vec<f64>,
}

impl BayesianLayer {
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let std = 1.0 / (in_dim as f64).sqrt();
        BayesianLayer {
            in_dim,
            out_dim,
            weight_means: (0..in_dim * out_dim).map(|_| std * rng::normal(rng)).collect(),
            weight_log_stds: vec![BgnnParams::INIT_LOG_STD; in_dim * out_dim],
            bias_means: vec![0.0; out_dim],
            bias_log_stds: vec![BgnnParams::INIT_LOG_STD; out_dim],
        }
    }

    pub fn param_count(&self) -> usize {
        2 * (self.in_dim * self.out_dim + self.out_dim)
    }

    fn validate(&self) -> Result<()> {
        let w = self.in_dim * self.out_dim;
        if self.in_dim == 0
            || self.out_dim == 0
            || self.weight_means.len() != w
            || self.weight_log_stds.len() != w
            || self.bias_means.len() != self.out_dim
            || self.bias_log_stds.len() != self.out_dim
        {
            return Err(Error::Config(format!(
                "layer {}x{} has inconsistent parameter lengths",
                self.out_dim, self.in_dim
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut Rng) -> DenseLayer {
        let draw = |means: &[f64], log_stds: &[f64], rng: &mut Rng| -> (Vec<f64>, Vec<f64>) {
            let eps: Vec<f64> = (0..means.len()).map(|_| rng::normal(rng)).collect();
            let vals = means
                .iter()
                .zip(log_stds)
                .zip(&eps)
                .map(|((m, s), e)| m + s.exp() * e)
                .collect();
            (vals, eps)
        };
        let (w, eps_w) = draw(&self.weight_means, &self.weight_log_stds, rng);
        let (b, eps_b) = draw(&self.bias_means, &self.bias_log_stds, rng);
        DenseLayer {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            w,
            b,
            eps_w,
            eps_b,
        }
    }
}

/// Message-passing layers followed by a linear interaction-label head.
#[derive(Debug, Clone, PartialEq)]
pub struct BgnnParams {
    pub layers: Vec<BayesianLayer>,
}

impl BgnnParams {
    pub const INIT_LOG_STD: f64 = -2.995_732_273_553_991; // ln 0.05

    pub fn init(feature_dim: usize, cfg: &InteractionConfig, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let mut layers = Vec::with_capacity(cfg.layers + 1);
        let mut width = feature_dim;
        for _ in 0..cfg.layers {
            layers.push(BayesianLayer::init(2 * width, cfg.embed_dim, &mut rng));
            width = cfg.embed_dim;
        }
        layers.push(BayesianLayer::init(width, InteractionLabel::COUNT, &mut rng));
        BgnnParams { layers }
    }

    pub fn message_layers(&self) -> &[BayesianLayer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn head(&self) -> &BayesianLayer {
        self.layers.last().expect("validated params have a head")
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() < 2 {
            return Err(Error::Config("need at least one message layer and a head".into()));
        }
        for l in &self.layers {
            l.validate()?;
        }
        for pair in self.message_layers().windows(2) {
            if pair[1].in_dim != 2 * pair[0].out_dim {
                return Err(Error::Config("message layer widths do not chain".into()));
            }
        }
        let last = &self.message_layers()[self.layers.len() - 2];
        if self.layers[0].in_dim % 2 != 0 || self.head().in_dim != last.out_dim {
            return Err(Error::Config("head width does not match the last message layer".into()));
        }
        if self.head().out_dim != InteractionLabel::COUNT {
            return Err(Error::Config(format!(
                "head must emit {} logits, has {}",
                InteractionLabel::COUNT,
                self.head().out_dim
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(BayesianLayer::param_count).sum()
    }

    /// Per layer: weight means, weight log-stds, bias means, bias log-stds.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weight_means);
            out.extend_from_slice(&l.weight_log_stds);
            out.extend_from_slice(&l.bias_means);
            out.extend_from_slice(&l.bias_log_stds);
        }
        out
    }

    pub fn assign(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Config(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut rest = flat;
        let mut take = |dst: &mut Vec<f64>| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        for l in &mut self.layers {
            take(&mut l.weight_means);
            take(&mut l.weight_log_stds);
            take(&mut l.bias_means);
            take(&mut l.bias_log_stds);
        }
        Ok(())
    }

    /// Closed-form `KL(q || N(0, prior_std^2))` summed over every parameter.
    pub fn kl_divergence(&self, prior_std: f64) -> f64 {
        let p2 = prior_std * prior_std;
        let term = |m: f64, r: f64| {
            let s2 = (2.0 * r).exp();
            prior_std.ln() - r + (s2 + m * m) / (2.0 * p2) - 0.5
        };
        self.layers
            .iter()
            .map(|l| {
                let w: f64 = l.weight_means.iter().zip(&l.weight_log_stds).map(|(&m, &r)| term(m, r)).sum();
                let b: f64 = l.bias_means.iter().zip(&l.bias_log_stds).map(|(&m, &r)| term(m, r)).sum();
                w + b
            })
            .sum()
    }

    /// Adds `scale * dKL/dparam` into `grad`, laid out as in [`flatten`](Self::flatten).
    pub(crate) fn add_kl_gradient(&self, prior_std: f64, scale: f64, grad: &mut [f64]) {
        let p2 = prior_std * prior_std;
        let mut k = 0;
        let block = |means: &[f64], log_stds: &[f64], grad: &mut [f64], k: &mut usize| {
            let n = means.len();
            for i in 0..n {
                grad[*k + i] += scale * means[i] / p2;
                grad[*k + n + i] += scale * ((2.0 * log_stds[i]).exp() / p2 - 1.0);
            }
            *k += 2 * n;
        };
        for l in &self.layers {
            // weight means then log-stds, then bias means then log-stds
            block(&l.weight_means, &l.weight_log_stds, grad, &mut k);
            block(&l.bias_means, &l.bias_log_stds, grad, &mut k);
        }
    }

    pub(crate) fn sample(&self, rng: &mut Rng) -> SampledNet {
        SampledNet {
            layers: self.layers.iter().map(|l| l.sample(rng)).collect(),
        }
    }
}

pub(crate) struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub eps_w: Vec<f64>,
    pub eps_b: Vec<f64>,
}

impl DenseLayer {
    fn affine(&self, x: &[f64], out: &mut [f64]) {
        for (o, slot) in out.iter_mut().enumerate() {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            *slot = self.b[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

pub(crate) struct SampledNet {
    pub layers: Vec<DenseLayer>,
}

/// Network input for one graph: scaled node features plus in-edge attention.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTensor {
    pub features: Vec<Vec<f64>>,
    /// Per node, `(source node, attention)` for each in-edge.
    pub in_edges: Vec<Vec<(usize, f64)>>,
}

impl GraphTensor {
    pub fn new(graph: &InteractionGraph, features: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_parts(features, graph.in_edges())
    }

    pub fn from_parts(features: Vec<Vec<f64>>, in_edges: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if features.len() != in_edges.len() {
            return Err(Error::Config(format!(
                "{} feature rows for {} nodes",
                features.len(),
                in_edges.len()
            )));
        }
        let width = features.first().map_or(0, Vec::len);
        if features.iter().any(|f| f.len() != width) {
            return Err(Error::Config("feature rows differ in length".into()));
        }
        if in_edges.iter().flatten().any(|&(j, _)| j >= features.len()) {
            return Err(Error::Config("edge source out of range".into()));
        }
        Ok(GraphTensor { features, in_edges })
    }

    pub fn node_count(&self) -> usize {
        self.features.len()
    }

    fn check(&self, params: &BgnnParams) -> Result<()> {
        params.validate()?;
        if let Some(f) = self.features.first() {
            if f.len() != params.input_dim() {
                return Err(Error::Config(format!(
                    "features have width {}, network expects {}",
                    f.len(),
                    params.input_dim()
                )));
            }
        }
        Ok(())
    }
}

/// Activations kept for the backward pass; all matrices row-major, one row per node.
pub(crate) struct ForwardTrace {
    /// Input `[h; sum_j a_ij h_j]` of each message layer.
    pub inputs: Vec<Vec<f64>>,
    /// Output `tanh(W x + b)` of each message layer.
    pub hidden: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

pub(crate) fn forward(net: &SampledNet, g: &GraphTensor) -> ForwardTrace {
    let n = g.node_count();
    let (message, head) = net.layers.split_at(net.layers.len() - 1);
    let mut h: Vec<f64> = g.features.iter().flatten().copied().collect();
    let mut width = g.features.first().map_or(0, Vec::len);
    let mut inputs = Vec::with_capacity(message.len());
    let mut hidden = Vec::with_capacity(message.len());
    for layer in message {
        let mut x = vec![0.0; n * 2 * width];
        for i in 0..n {
            let row = &mut x[i * 2 * width..(i + 1) * 2 * width];
            row[..width].copy_from_slice(&h[i * width..(i + 1) * width]);
            for &(j, a) in &g.in_edges[i] {
                for k in 0..width {
                    row[width + k] += a * h[j * width + k];
                }
            }
        }
        let mut out = vec![0.0; n * layer.out_dim];
        for i in 0..n {
            let dst = &mut out[i * layer.out_dim..(i + 1) * layer.out_dim];
            layer.affine(&x[i * 2 * width..(i + 1) * 2 * width], dst);
            dst.iter_mut().for_each(|v| *v = v.tanh());
        }
        width = layer.out_dim;
        inputs.push(x);
        hidden.push(out.clone());
        h = out;
    }
    let head = &head[0];
    let mut logits = vec![0.0; n * head.out_dim];
    for i in 0..n {
        head.affine(&h[i * width..(i + 1) * width], &mut logits[i * head.out_dim..(i + 1) * head.out_dim]);
    }
    ForwardTrace { inputs, hidden, logits }
}

/// Gradients of a scalar with respect to each sampled layer's weights and biases,
/// given its gradient with respect to the logits.
pub(crate) fn backward(net: &SampledNet, g: &GraphTensor, trace: &ForwardTrace, dlogits: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = g.node_count();
    let mut grads: Vec<(Vec<f64>, Vec<f64>)> = net
        .layers
        .iter()
        .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
        .collect();
    let last = net.layers.len() - 1;
    let head = &net.layers[last];
    let feature_width = g.features.first().map_or(0, Vec::len);
    let h_last: &[f64] = trace.hidden.last().expect("at least one message layer");
    let mut dh = vec![0.0; n * head.in_dim];
    {
        let (dw, db) = &mut grads[last];
        for i in 0..n {
            let hi = &h_last[i * head.in_dim..(i + 1) * head.in_dim];
            for o in 0..head.out_dim {
                let d = dlogits[i * head.out_dim + o];
                if d == 0.0 {
                    continue;
                }
                db[o] += d;
                let row = o * head.in_dim;
                for k in 0..head.in_dim {
                    dw[row + k] += d * hi[k];
                    dh[i * head.in_dim + k] += d * head.w[row + k];
                }
            }
        }
    }
    for l in (0..last).rev() {
        let layer = &net.layers[l];
        let width = if l == 0 { feature_width } else { net.layers[l - 1].out_dim };
        let h = &trace.hidden[l];
        let x = &trace.inputs[l];
        let (dw, db) = &mut grads[l];
        let mut dprev = vec![0.0; n * width];
        let mut dx = vec![0.0; 2 * width];
        for i in 0..n {
            dx.iter_mut().for_each(|v| *v = 0.0);
            let xi = &x[i * 2 * width..(i + 1) * 2 * width];
            for o in 0..layer.out_dim {
                let hv = h[i * layer.out_dim + o];
                let dz = dh[i * layer.out_dim + o] * (1.0 - hv * hv);
                if dz == 0.0 {
                    continue;
                }
                db[o] += dz;
                let row = o * layer.in_dim;
                for k in 0..layer.in_dim {
                    dw[row + k] += dz * xi[k];
                    dx[k] += dz * layer.w[row + k];
                }
            }
            for k in 0..width {
                dprev[i * width + k] += dx[k];
            }
            for &(j, a) in &g.in_edges[i] {
                for k in 0..width {
                    dprev[j * width + k] += a * dx[width + k];
                }
            }
        }
        dh = dprev;
    }
    grads
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Monte Carlo summary per node: mean and population std of logits and of
/// label probabilities across weight samples.
#[derive(Debug, Clone, PartialEq)]
pub struct McPrediction {
    pub logit_mean: Vec<Vec<f64>>,
    pub logit_std: Vec<Vec<f64>>,
    pub prob_mean: Vec<Vec<f64>>,
    pub prob_std: Vec<Vec<f64>>,
}

fn mean_std(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let s = rows.len() as f64;
    let width = rows[0].len();
    let mut mean = vec![0.0; width];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= s);
    let mut var = vec![0.0; width];
    for r in rows {
        for ((acc, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    (mean, var.into_iter().map(|v| (v / s).sqrt()).collect())
}

/// `samples` forward passes, sample `s` drawing its weights from stream `s` of
/// `seed`. Samples may run on any number of threads; the reduction is in sample
/// order, so the result is bit-identical regardless.
pub fn forward_mc(g: &GraphTensor, params: &BgnnParams, samples: usize, seed: u64) -> Result<McPrediction> {
    if samples == 0 {
        return Err(Error::Config("mc_samples must be >= 1".into()));
    }
    g.check(params)?;
    let n = g.node_count();
    let c = InteractionLabel::COUNT;
    let per_sample: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|s| forward(&params.sample(&mut rng::stream(seed, s)), g).logits)
        .collect();
    let mut out = McPrediction {
        logit_mean: Vec::with_capacity(n),
        logit_std: Vec::with_capacity(n),
        prob_mean: Vec::with_capacity(n),
        prob_std: Vec::with_capacity(n),
    };
    for i in 0..n {
        let logits: Vec<Vec<f64>> = per_sample.iter().map(|l| l[i * c..(i + 1) * c].to_vec()).collect();
        let probs: Vec<Vec<f64>> = logits.iter().map(|z| softmax(z)).collect();
        let (lm, ls) = mean_std(&logits);
        let (pm, ps) = mean_std(&probs);
        out.logit_mean.push(lm);
        out.logit_std.push(ls);
        out.prob_mean.push(pm);
        out.prob_std.push(ps);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::FEATURE_DIM;

    fn small_cfg() -> InteractionConfig {
        InteractionConfig {
            layers: 2,
            embed_dim: 8,
            ..InteractionConfig::default()
        }
    }

    fn random_graph(n: usize, seed: u64) -> GraphTensor {
        let mut r = rng::seeded(seed);
        let features = (0..n)
            .map(|_| (0..FEATURE_DIM).map(|_| rng::normal(&mut r)).collect())
            .collect();
        let in_edges = (0..n)
            .map(|i| {
                let src: Vec<usize> = (0..n).filter(|&j| j != i && (i + j) % 2 == 1).collect();
                let a = 1.0 / src.len().max(1) as f64;
                src.into_iter().map(|j| (j, a)).collect()
            })
            .collect();
        GraphTensor::from_parts(features, in_edges).unwrap()
    }

    #[test]
    fn zero_std_single_sample_is_deterministic_forward() {
        let mut params = BgnnParams::init(FEATURE_DIM, &small_cfg(), 3);
        for l in &mut params.layers {
            l.weight_log_stds.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
            l.bias_log_stds.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
        }
        let g = random_graph(4, 1);
        let a = forward_mc(&g, &params, 1, 10).unwrap();
        let b = forward_mc(&g, &params, 1, 99).unwrap();
        assert_eq!(a, b);
        assert!(a.logit_std.iter().flatten().all(|&s| s == 0.0));
        // hand-rolled dense pass with the means
        let mut h: Vec<Vec<f64>> = g.features.clone();
        for l in params.message_layers() {
            let next: Vec<Vec<f64>> = (0..h.len())
                .map(|i| {
                    let mut x = h[i].clone();
                    let mut m = vec![0.0; h[i].len()];
                    for &(j, a) in &g.in_edges[i] {
                        for k in 0..m.len() {
                            m[k] += a * h[j][k];
                        }
                    }
                    x.extend(m);
                    (0..l.out_dim)
                        .map(|o| {
                            let z: f64 = (0..l.in_dim).map(|k| l.weight_means[o * l.in_dim + k] * x[k]).sum();
                            (z + l.bias_means[o]).tanh()
                        })
                        .collect()
                })
                .collect();
            h = next;
        }
        let head = params.head();
        for i in 0..h.len() {
            for o in 0..head.out_dim {
                let z: f64 = (0..head.in_dim).map(|k| head.weight_means[o * head.in_dim + k] * h[i][k]).sum::<f64>()
                    + head.bias_means[o];
                assert!((z - a.logit_mean[i][o]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn isolated_node_ignores_others() {
        let params = BgnnParams::init(FEATURE_DIM, &small_cfg(), 5);
        let mut g = random_graph(3, 2);
        g.in_edges = vec![vec![], vec![(2, 1.0)], vec![(1, 1.0)]];
        let a = forward_mc(&g, &params, 5, 7).unwrap();
        g.features[1].iter_mut().for_each(|v| *v += 3.0);
        g.features[2].iter_mut().for_each(|v| *v -= 1.0);
        let b = forward_mc(&g, &params, 5, 7).unwrap();
        assert_eq!(a.logit_mean[0], b.logit_mean[0]);
        assert_ne!(a.logit_mean[1], b.logit_mean[1]);
    }

    #[test]
    fn reproducible_and_permutation_equivariant() {
        let params = BgnnParams::init(FEATURE_DIM, &small_cfg(), 8);
        let g = random_graph(5, 4);
        let a = forward_mc(&g, &params, 6, 21).unwrap();
        assert_eq!(a, forward_mc(&g, &params, 6, 21).unwrap());
        let perm = [3usize, 0, 4, 1, 2]; // new index k holds old node perm[k]
        let mut inv = [0usize; 5];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        let features = perm.iter().map(|&p| g.features[p].clone()).collect();
        let in_edges = perm
            .iter()
            .map(|&p| g.in_edges[p].iter().map(|&(j, w)| (inv[j], w)).collect())
            .collect();
        let gp = GraphTensor::from_parts(features, in_edges).unwrap();
        let b = forward_mc(&gp, &params, 6, 21).unwrap();
        for (k, &p) in perm.iter().enumerate() {
            for o in 0..InteractionLabel::COUNT {
                assert!((b.logit_mean[k][o] - a.logit_mean[p][o]).abs() < 1e-12);
                assert!((b.prob_std[k][o] - a.prob_std[p][o]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let params = BgnnParams::init(FEATURE_DIM + 1, &small_cfg(), 1);
        let g = random_graph(2, 1);
        assert!(matches!(forward_mc(&g, &params, 2, 0), Err(Error::Config(_))));
        assert!(matches!(forward_mc(&g, &BgnnParams::init(FEATURE_DIM, &small_cfg(), 1), 0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn kl_vanishes_at_prior_and_flatten_round_trips() {
        let mut params = BgnnParams::init(FEATURE_DIM, &small_cfg(), 1);
        let prior = 0.7f64;
        let mut flat = params.flatten();
        assert_eq!(flat.len(), params.param_count());
        let mut zeroed = params.clone();
        for l in &mut zeroed.layers {
            l.weight_means.iter_mut().for_each(|v| *v = 0.0);
            l.bias_means.iter_mut().for_each(|v| *v = 0.0);
            l.weight_log_stds.iter_mut().for_each(|v| *v = prior.ln());
            l.bias_log_stds.iter_mut().for_each(|v| *v = prior.ln());
        }
        assert!(zeroed.kl_divergence(prior).abs() < 1e-9);
        assert!(params.kl_divergence(prior) > 0.0);
        flat[3] = 42.0;
        params.assign(&flat).unwrap();
        assert_eq!(params.flatten(), flat);
        assert!(params.assign(&flat[1..]).is_err());
    }
}
