//! Suite evaluation: decision F1 and path accuracy against template-expected
//! decisions, detection quality, and uncertainty statistics.

mod report;

pub use report::{parse_csv, plot_json, scenes_csv, text_table, to_csv, write_reports, ReportFiles};

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{box_regression_error, greedy_match, MATCH_IOU_THRESHOLD};
use crate::error::{Error, Result};
use crate::pipeline::Pipeline;
use crate::reasoner::SpeedDecision;
use crate::scenario::{ExpectedDecision, Manifest, ManifestEntry, Template};
use crate::scene::io::read_scene;
use crate::scene::{box_iou, Maneuver, OrientedBox, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Ground-truth count.
    pub support: usize,
    pub predicted: usize,
}

/// One-vs-rest precision, recall and F1 for each of `classes`. A class with
/// neither ground truth nor predictions is absent from the result; otherwise
/// an undefined ratio (zero denominator) is reported as 0.
pub fn f1_per_class<T: Ord + Copy>(predictions: &[T], labels: &[T], classes: &[T]) -> Result<BTreeMap<T, ClassMetrics>> {
    if predictions.len() != labels.len() {
        return Err(Error::Domain(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut out = BTreeMap::new();
    for &c in classes {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (&p, &l) in predictions.iter().zip(labels) {
            match (p == c, l == c) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        if tp + fp + fn_ == 0 {
            continue;
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
        out.insert(
            c,
            ClassMetrics {
                precision,
                recall,
                f1,
                support: tp + fn_,
                predicted: tp + fp,
            },
        );
    }
    Ok(out)
}

/// Rows are expected decisions, columns predicted, both in [`SpeedDecision::ALL`] order.
pub type Confusion = [[usize; 6]; 6];

pub const RISK_BINS: usize = 10;

/// Per-scene outcome; `error` is set when the scene could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneOutcome {
    pub scene: String,
    pub template: Template,
    pub seed: u64,
    pub expected: ExpectedDecision,
    pub speed: Option<SpeedDecision>,
    pub path: Option<Maneuver>,
    pub explanation: String,
    pub error: Option<String>,
    #[serde(skip)]
    stats: SceneStats,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct SceneStats {
    gt: usize,
    predicted: usize,
    ious: Vec<f64>,
    regression_sum: f64,
    entropies: Vec<f64>,
    deviations: Vec<f64>,
    risks: Vec<f64>,
    raw_u: Vec<f64>,
    refined_u: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathMetrics {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub scenes: usize,
    pub errors: usize,
    pub confusion: Confusion,
    pub speed: BTreeMap<SpeedDecision, ClassMetrics>,
    /// Micro-averaged speed accuracy, `trace(confusion) / evaluated scenes`.
    pub speed_accuracy: f64,
    pub path: BTreeMap<Maneuver, PathMetrics>,
    pub path_accuracy: f64,
    pub gt_objects: usize,
    pub predicted_objects: usize,
    pub matched: usize,
    /// `None` when nothing matched.
    pub mean_iou: Option<f64>,
    /// Matched fraction of ground-truth objects.
    pub detection_accuracy: Option<f64>,
    pub l_reg: Option<f64>,
    pub mean_entropy: Option<f64>,
    pub mean_deviation_deg: Option<f64>,
    pub mean_raw_uncertainty: Option<f64>,
    pub mean_refined_uncertainty: Option<f64>,
    pub risk_histogram: [usize; RISK_BINS],
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Runs the pipeline on one loaded scene.
pub fn evaluate_scene(pipeline: &Pipeline, scene: &Scene, entry: &ManifestEntry) -> SceneOutcome {
    let mut out = SceneOutcome {
        scene: entry.scene.clone(),
        template: entry.template,
        seed: entry.seed,
        expected: entry.expected,
        speed: None,
        path: None,
        explanation: String::new(),
        error: None,
        stats: SceneStats::default(),
    };
    let (detected, analysis) = match pipeline.run(scene) {
        Ok(v) => v,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    out.speed = Some(analysis.trace.speed);
    out.path = Some(analysis.trace.path);
    out.explanation = analysis.trace.explanation.clone();
    let st = &mut out.stats;
    let pred: Vec<OrientedBox> = detected.objects.iter().map(|o| o.bbox).collect();
    if let Some(gt) = &scene.ground_truth {
        let gt: Vec<OrientedBox> = gt.iter().map(|g| g.bbox).collect();
        let m = greedy_match(&pred, &gt, MATCH_IOU_THRESHOLD);
        st.gt = gt.len();
        st.ious = m.iter().map(|&(i, j)| box_iou(&pred[i], &gt[j])).collect();
        st.regression_sum = box_regression_error(&pred, &gt, &m).map_or(0.0, |e| e * m.len() as f64);
    }
    st.predicted = pred.len();
    for a in &analysis.assessments {
        st.entropies.push(a.entropy);
        st.deviations.push(a.deviation.to_degrees());
        st.risks.push(a.risk);
        st.raw_u.push(a.uncertainty);
    }
    st.refined_u = analysis.refined.iter().map(|r| r.refined_uncertainty).collect();
    out
}

/// Aggregates outcomes. The outcomes are put in a canonical order first, so
/// the result does not depend on the order scenes were listed or finished in.
pub fn aggregate(outcomes: &[SceneOutcome]) -> SuiteResult {
    let mut sorted: Vec<&SceneOutcome> = outcomes.iter().collect();
    sorted.sort_by(|a, b| (a.template, a.seed, &a.scene).cmp(&(b.template, b.seed, &b.scene)));
    let ok: Vec<&SceneOutcome> = sorted.iter().copied().filter(|o| o.error.is_none()).collect();

    let mut confusion = [[0usize; 6]; 6];
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    let mut path: BTreeMap<Maneuver, PathMetrics> = BTreeMap::new();
    for o in &ok {
        let (s, p) = (o.speed.expect("evaluated"), o.path.expect("evaluated"));
        confusion[o.expected.speed.index()][s.index()] += 1;
        preds.push(s);
        labels.push(o.expected.speed);
        let m = path.entry(o.expected.path).or_insert(PathMetrics {
            correct: 0,
            total: 0,
            accuracy: 0.0,
        });
        m.total += 1;
        m.correct += usize::from(p == o.expected.path);
    }
    for m in path.values_mut() {
        m.accuracy = ratio(m.correct, m.total);
    }
    let speed = f1_per_class(&preds, &labels, &SpeedDecision::ALL).expect("equal lengths");
    let trace: usize = (0..6).map(|i| confusion[i][i]).sum();
    let path_correct: usize = path.values().map(|m| m.correct).sum();

    let stats = || ok.iter().map(|o| &o.stats);
    let gt_objects = stats().map(|s| s.gt).sum();
    let matched = stats().map(|s| s.ious.len()).sum();
    let regression: f64 = stats().map(|s| s.regression_sum).sum();
    let mut risk_histogram = [0usize; RISK_BINS];
    for r in stats().flat_map(|s| &s.risks) {
        let bin = ((r * RISK_BINS as f64) as usize).min(RISK_BINS - 1);
        risk_histogram[bin] += 1;
    }
    SuiteResult {
        scenes: sorted.len(),
        errors: sorted.len() - ok.len(),
        confusion,
        speed,
        speed_accuracy: ratio(trace, ok.len()),
        path,
        path_accuracy: ratio(path_correct, ok.len()),
        gt_objects,
        predicted_objects: stats().map(|s| s.predicted).sum(),
        matched,
        mean_iou: mean(stats().flat_map(|s| s.ious.iter().copied())),
        detection_accuracy: (gt_objects > 0).then(|| ratio(matched, gt_objects)),
        l_reg: (matched > 0).then(|| regression / matched as f64),
        mean_entropy: mean(stats().flat_map(|s| s.entropies.iter().copied())),
        mean_deviation_deg: mean(stats().flat_map(|s| s.deviations.iter().copied())),
        mean_raw_uncertainty: mean(stats().flat_map(|s| s.raw_u.iter().copied())),
        mean_refined_uncertainty: mean(stats().flat_map(|s| s.refined_u.iter().copied())),
        risk_histogram,
    }
}

/// Loads and evaluates every manifest scene on `jobs` threads (0 = all
/// cores). Unreadable scenes are recorded as errors and the suite continues.
pub fn evaluate_suite(
    manifest_path: &Path,
    manifest: &Manifest,
    pipeline: &Pipeline,
    jobs: usize,
) -> Result<(SuiteResult, Vec<SceneOutcome>)> {
    let run = || -> Vec<SceneOutcome> {
        manifest
            .scenes
            .par_iter()
            .map(|entry| match read_scene(&Manifest::resolve(manifest_path, entry)) {
                Ok(scene) => evaluate_scene(pipeline, &scene, entry),
                Err(e) => SceneOutcome {
                    scene: entry.scene.clone(),
                    template: entry.template,
                    seed: entry.seed,
                    expected: entry.expected,
                    speed: None,
                    path: None,
                    explanation: String::new(),
                    error: Some(e.to_string()),
                    stats: SceneStats::default(),
                },
            })
            .collect()
    };
    let outcomes = if jobs == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?
            .install(run)
    };
    Ok((aggregate(&outcomes), outcomes))
}

/// Relative drop of mean uncertainty after graph refinement,
/// `1 - refined / raw`. `None` without assessed objects or with zero raw uncertainty.
pub fn uncertainty_reduction(result: &SuiteResult) -> Option<f64> {
    match (result.mean_raw_uncertainty, result.mean_refined_uncertainty) {
        (Some(raw), Some(refined)) if raw > 0.0 => Some(1.0 - refined / raw),
        _ => None,
    }
}

/// Evaluates in-memory scenes (no files), in parallel.
pub fn evaluate_scenes(pipeline: &Pipeline, scenes: &[(ManifestEntry, Scene)]) -> (SuiteResult, Vec<SceneOutcome>) {
    let outcomes: Vec<SceneOutcome> = scenes.par_iter().map(|(e, s)| evaluate_scene(pipeline, s, e)).collect();
    (aggregate(&outcomes), outcomes)
}
