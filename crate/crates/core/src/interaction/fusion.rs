use crate::scene::{ClassDistribution, ObjectClass};
use crate::uncertainty::{combined_uncertainty, shannon_entropy, ObjectAssessment, UncertaintyConfig};

/// Probabilities are clamped to this before taking logs.
pub const FUSION_FLOOR: f64 = 1e-9;

/// Log-linear pooling: `log q = log raw + sum_j a_j log p_j + const`.
pub fn fuse_refine(raw: &ClassDistribution, evidence: &[(ClassDistribution, f64)]) -> ClassDistribution {
    if evidence.is_empty() {
        return *raw;
    }
    let mut logq = raw.probs().map(|p| p.max(FUSION_FLOOR).ln());
    for (p, a) in evidence {
        for (l, v) in logq.iter_mut().zip(p.probs()) {
            *l += a * v.max(FUSION_FLOOR).ln();
        }
    }
    let max = logq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w = [0.0; ObjectClass::COUNT];
    for (dst, l) in w.iter_mut().zip(logq) {
        *dst = (l - max).exp();
    }
    ClassDistribution::from_weights(w).expect("positive weights")
}

/// Uncertainty recomputed from the fused distribution; the orientation term is kept.
pub fn refine_uncertainty(raw: &ObjectAssessment, fused: &ClassDistribution, cfg: &UncertaintyConfig) -> f64 {
    combined_uncertainty(shannon_entropy(fused), raw.deviation, cfg)
}
