use serde::{Deserialize, Serialize};

use super::bgnn::{backward, forward, softmax};
use super::{
    build_graph, forward_mc, scaled_features, BgnnParams, GraphTensor, InteractionConfig, InteractionLabel,
};
use crate::error::{Error, Result};
use crate::rng;
use crate::scene::{ClassDistribution, EgoState, ObjectClass, ObjectId, OrientedBox, PointCloud, TrackedObject, Vec3};
use crate::uncertainty::{assess, RiskConfig, UncertaintyConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub graph: GraphTensor,
    /// One entry per node; `None` nodes do not contribute to the loss.
    pub labels: Vec<Option<InteractionLabel>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboConfig {
    pub mc_samples: usize,
    /// KL weight.
    pub beta: f64,
    pub prior_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElboOutput {
    pub loss: f64,
    /// Mean cross-entropy over samples and labeled nodes.
    pub nll: f64,
    pub kl: f64,
    /// `d loss / d param`, laid out as [`BgnnParams::flatten`].
    pub gradient: Vec<f64>,
}

/// Negative ELBO `nll + beta * KL` and its exact gradient.
///
/// Sample `s` draws `eps` from stream `s` of `seed`; weights are `mu + exp(rho) * eps`,
/// so the loss is a smooth deterministic function of the parameters for a fixed seed.
pub fn elbo_loss(params: &BgnnParams, batch: &[TrainingExample], cfg: &ElboConfig, seed: u64) -> Result<ElboOutput> {
    params.validate()?;
    if cfg.mc_samples == 0 {
        return Err(Error::Config("mc_samples must be >= 1".into()));
    }
    for ex in batch {
        if ex.labels.len() != ex.graph.node_count() {
            return Err(Error::Config("labels must cover every node".into()));
        }
        if ex.graph.features.first().is_some_and(|f| f.len() != params.input_dim()) {
            return Err(Error::Config("feature width does not match the network".into()));
        }
    }
    let labeled: usize = batch.iter().map(|ex| ex.labels.iter().flatten().count()).sum();
    let c = InteractionLabel::COUNT;
    let mut gradient = vec![0.0; params.param_count()];
    let mut nll = 0.0;
    if labeled > 0 {
        let scale = 1.0 / (cfg.mc_samples as f64 * labeled as f64);
        for s in 0..cfg.mc_samples as u64 {
            let net = params.sample(&mut rng::stream(seed, s));
            let mut acc: Vec<(Vec<f64>, Vec<f64>)> =
                net.layers.iter().map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()])).collect();
            for ex in batch {
                let trace = forward(&net, &ex.graph);
                let mut dlogits = vec![0.0; trace.logits.len()];
                let mut any = false;
                for (i, label) in ex.labels.iter().enumerate() {
                    let Some(label) = label else { continue };
                    let z = &trace.logits[i * c..(i + 1) * c];
                    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    debug_assert!(lse.is_finite());
                    nll += scale * (lse - z[label.index()]);
                    let p = softmax(z);
                    for o in 0..c {
                        let target = if o == label.index() { 1.0 } else { 0.0 };
                        dlogits[i * c + o] = scale * (p[o] - target);
                    }
                    any = true;
                }
                if !any {
                    continue;
                }
                for (a, (dw, db)) in acc.iter_mut().zip(backward(&net, &ex.graph, &trace, &dlogits)) {
                    a.0.iter_mut().zip(dw).for_each(|(x, y)| *x += y);
                    a.1.iter_mut().zip(db).for_each(|(x, y)| *x += y);
                }
            }
            // chain rule through w = mu + exp(rho) * eps
            let mut k = 0;
            for ((layer, sampled), (dw, db)) in params.layers.iter().zip(&net.layers).zip(&acc) {
                for (means_len, log_stds, eps, d) in [
                    (layer.weight_means.len(), &layer.weight_log_stds, &sampled.eps_w, dw),
                    (layer.bias_means.len(), &layer.bias_log_stds, &sampled.eps_b, db),
                ] {
                    for i in 0..means_len {
                        gradient[k + i] += d[i];
                        gradient[k + means_len + i] += d[i] * eps[i] * log_stds[i].exp();
                    }
                    k += 2 * means_len;
                }
            }
        }
    }
    let kl = params.kl_divergence(cfg.prior_std);
    // skipped at beta = 0 so a degenerate (zero-variance) posterior stays finite
    let penalty = if cfg.beta > 0.0 {
        params.add_kl_gradient(cfg.prior_std, cfg.beta, &mut gradient);
        cfg.beta * kl
    } else {
        0.0
    };
    Ok(ElboOutput {
        loss: nll + penalty,
        nll,
        kl,
        gradient,
    })
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.learning_rate * mh / (vh.sqrt() + self.epsilon);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    /// Weight samples per ELBO evaluation.
    pub mc_samples: usize,
    /// KL weight; `None` means `1 / |batch|`.
    pub beta: Option<f64>,
    /// Samples used when scoring accuracy.
    pub eval_samples: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 200,
            learning_rate: 0.01,
            mc_samples: 2,
            beta: None,
            eval_samples: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.mc_samples == 0 || self.eval_samples == 0 {
            return Err(Error::Config("sample counts must be >= 1".into()));
        }
        if self.beta.is_some_and(|b| !(b >= 0.0)) {
            return Err(Error::Config("beta must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub losses: Vec<f64>,
    pub accuracy: f64,
}

/// Full-batch Adam on the negative ELBO. Step `t` uses ELBO seed `seed + t`.
pub fn train(params: &mut BgnnParams, data: &[TrainingExample], cfg: &TrainConfig, prior_std: f64) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Precondition("training set is empty".into()));
    }
    let elbo = ElboConfig {
        mc_samples: cfg.mc_samples,
        beta: cfg.beta.unwrap_or(1.0 / data.len() as f64),
        prior_std,
    };
    let mut flat = params.flatten();
    let mut adam = Adam::new(flat.len(), cfg.learning_rate);
    let mut losses = Vec::with_capacity(cfg.steps);
    for t in 0..cfg.steps {
        let out = elbo_loss(params, data, &elbo, cfg.seed.wrapping_add(t as u64))?;
        losses.push(out.loss);
        adam.step(&mut flat, &out.gradient);
        params.assign(&flat)?;
    }
    let accuracy = accuracy(params, data, cfg.eval_samples, cfg.seed)?;
    Ok(TrainReport { losses, accuracy })
}

/// Fraction of labeled nodes whose Monte Carlo mean prediction equals the label.
pub fn accuracy(params: &BgnnParams, data: &[TrainingExample], samples: usize, seed: u64) -> Result<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for (k, ex) in data.iter().enumerate() {
        let pred = forward_mc(&ex.graph, params, samples, seed.wrapping_add(k as u64))?;
        for (i, label) in ex.labels.iter().enumerate() {
            let Some(label) = label else { continue };
            let p = &pred.prob_mean[i];
            let best = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).expect("non-empty head");
            hit += usize::from(best == label.index());
            total += 1;
        }
    }
    Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
}

/// Object label score: proximity risk plus closing speed; Yield above 0.7.
fn yield_score(risk: f64, closing_speed: f64) -> f64 {
    risk + 0.05 * closing_speed
}

const SCORE_THRESHOLD: f64 = 0.7;
const SCORE_MARGIN: f64 = 0.05;
const SYNTHETIC_EGO_SPEED: f64 = 10.0;

/// Graphs of ego plus 1-3 objects ahead, each object labeled Yield or Ignore by a
/// linear rule on its risk and closing speed. Objects within `SCORE_MARGIN` of
/// the decision boundary are redrawn, so the set is separable with a margin.
pub fn synthetic_interaction_set(n_graphs: usize, seed: u64) -> Vec<TrainingExample> {
    let mut r = rng::seeded(seed);
    let ego = EgoState::straight(SYNTHETIC_EGO_SPEED);
    let icfg = InteractionConfig::default();
    let (ucfg, rcfg) = (UncertaintyConfig::default(), RiskConfig::default());
    let cloud = PointCloud::default();
    let mut out = Vec::with_capacity(n_graphs);
    for _ in 0..n_graphs {
        let k = 1 + (rng::uniform(&mut r, 0.0, 3.0) as usize).min(2);
        let mut objects = Vec::with_capacity(k);
        let mut labels = Vec::with_capacity(k + 1);
        while objects.len() < k {
            let class = ObjectClass::from_index((rng::uniform(&mut r, 0.0, 4.0) as usize).min(3)).expect("index < 4");
            let (l, w, h) = match class {
                ObjectClass::Vehicle => (4.5, 1.8, 1.5),
                ObjectClass::Pedestrian => (0.6, 0.6, 1.75),
                ObjectClass::Cyclist => (1.8, 0.6, 1.7),
                ObjectClass::StaticObstacle => (1.0, 1.0, 1.0),
            };
            let x = rng::uniform(&mut r, 3.0, 40.0);
            let y = rng::uniform(&mut r, -4.0, 4.0);
            let vx = rng::uniform(&mut r, 0.0, 14.0);
            let obj = TrackedObject {
                id: ObjectId(objects.len() as u32 + 1),
                bbox: OrientedBox::new(Vec3::new(x, y, h / 2.0), l, w, h, 0.0).expect("positive dims"),
                velocity: Vec3::new(vx, 0.0, 0.0),
                class_dist: ClassDistribution::dominant(class, 0.7),
                support_points: vec![],
            };
            let a = &assess(std::slice::from_ref(&obj), &cloud, &ego, &ucfg, &rcfg)[0];
            let score = yield_score(a.risk, SYNTHETIC_EGO_SPEED - vx);
            if (score - SCORE_THRESHOLD).abs() < SCORE_MARGIN {
                continue;
            }
            labels.push(Some(if score > SCORE_THRESHOLD {
                InteractionLabel::Yield
            } else {
                InteractionLabel::Ignore
            }));
            objects.push(obj);
        }
        labels.push(None);
        let assessments = assess(&objects, &cloud, &ego, &ucfg, &rcfg);
        let graph = build_graph(&objects, &ego, &icfg);
        let features = scaled_features(&objects, &assessments, &ego).expect("matched assessments");
        out.push(TrainingExample {
            graph: GraphTensor::new(&graph, features).expect("consistent graph"),
            labels,
        });
    }
    out
}
