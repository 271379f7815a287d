//! Report writers: text table, long-format metrics CSV, plot JSON and
//! per-scene CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::{ClassMetrics, PathMetrics, SceneOutcome, SuiteResult, RISK_BINS};
use crate::error::{Error, Result};
use crate::reasoner::SpeedDecision;
use crate::scene::Maneuver;

fn path_label(m: Maneuver) -> &'static str {
    match m {
        Maneuver::LaneChange => "Lane Change",
        other => other.label(),
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{:.1}", 100.0 * v))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

/// Speed F1 and path accuracy (percent) in table column order, followed by
/// the confusion matrix and detection/uncertainty summary.
pub fn text_table(r: &SuiteResult) -> String {
    let mut headers: Vec<&str> = SpeedDecision::ALL.iter().map(|s| s.label()).collect();
    headers.extend(Maneuver::ALL.iter().map(|&m| path_label(m)));
    let mut cells: Vec<String> = SpeedDecision::ALL.iter().map(|s| pct(r.speed.get(s).map(|m| m.f1))).collect();
    cells.extend(Maneuver::ALL.iter().map(|m| pct(r.path.get(m).map(|m| m.accuracy))));
    let widths: Vec<usize> = headers.iter().zip(&cells).map(|(h, c)| h.len().max(c.len())).collect();
    let row = |items: &[String]| -> String {
        let mut line = String::new();
        for (i, (item, w)) in items.iter().zip(&widths).enumerate() {
            if i == SpeedDecision::ALL.len() {
                line.push_str(" |");
            }
            let _ = write!(line, " {item:>w$}");
        }
        line
    };
    let mut out = String::new();
    let h: Vec<String> = headers.iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "{:<8}{}", "", row(&h));
    let _ = writeln!(out, "{:<8}{}", "F1/Acc", row(&cells));
    let _ = writeln!(
        out,
        "\nscenes {} (errors {}), speed accuracy {:.1}%, path accuracy {:.1}%",
        r.scenes,
        r.errors,
        100.0 * r.speed_accuracy,
        100.0 * r.path_accuracy
    );
    let _ = writeln!(out, "\nconfusion (rows expected, columns predicted)");
    let short: Vec<String> = SpeedDecision::ALL.iter().map(|s| s.label().to_string()).collect();
    let w = short.iter().map(|s| s.len()).max().unwrap_or(0);
    let _ = write!(out, "{:<w$}", "");
    for s in &short {
        let _ = write!(out, " {s:>w$}");
    }
    out.push('\n');
    for (i, s) in short.iter().enumerate() {
        let _ = write!(out, "{s:<w$}");
        for c in r.confusion[i] {
            let _ = write!(out, " {c:>w$}");
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "\ndetection: {} ground truth, {} predicted, {} matched; accuracy {}%, mean IoU {}, L_reg {}",
        r.gt_objects,
        r.predicted_objects,
        r.matched,
        pct(r.detection_accuracy),
        opt(r.mean_iou),
        opt(r.l_reg)
    );
    let _ = writeln!(
        out,
        "uncertainty: entropy {}, deviation {} deg, raw U {}, refined U {}",
        opt(r.mean_entropy),
        opt(r.mean_deviation_deg),
        opt(r.mean_raw_uncertainty),
        opt(r.mean_refined_uncertainty)
    );
    let counts: Vec<String> = r.risk_histogram.iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "risk histogram (10 bins on [0, 1]): {}", counts.join(" "));
    out
}

fn name<T: std::fmt::Debug>(v: T) -> String {
    format!("{v:?}")
}

/// Long-format `metric,class,value` CSV. Floats are written in shortest
/// round-trip form, so [`parse_csv`] recovers the result exactly. Absent
/// optional metrics have no row.
pub fn to_csv(r: &SuiteResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut put = |metric: &str, class: &str, value: String| {
        w.write_record([metric, class, value.as_str()]).expect("in-memory write");
    };
    put("metric", "class", "value".into());
    put("scenes", "", r.scenes.to_string());
    put("errors", "", r.errors.to_string());
    put("speed_accuracy", "", r.speed_accuracy.to_string());
    put("path_accuracy", "", r.path_accuracy.to_string());
    for (s, m) in &r.speed {
        let c = name(s);
        put("speed_precision", &c, m.precision.to_string());
        put("speed_recall", &c, m.recall.to_string());
        put("speed_f1", &c, m.f1.to_string());
        put("speed_support", &c, m.support.to_string());
        put("speed_predicted", &c, m.predicted.to_string());
    }
    for (p, m) in &r.path {
        let c = name(p);
        put("path_correct", &c, m.correct.to_string());
        put("path_total", &c, m.total.to_string());
        put("path_accuracy", &c, m.accuracy.to_string());
    }
    for (i, row) in r.confusion.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            let c = format!("{}>{}", name(SpeedDecision::ALL[i]), name(SpeedDecision::ALL[j]));
            put("confusion", &c, n.to_string());
        }
    }
    put("gt_objects", "", r.gt_objects.to_string());
    put("predicted_objects", "", r.predicted_objects.to_string());
    put("matched", "", r.matched.to_string());
    let optional = [
        ("mean_iou", r.mean_iou),
        ("detection_accuracy", r.detection_accuracy),
        ("l_reg", r.l_reg),
        ("mean_entropy", r.mean_entropy),
        ("mean_deviation_deg", r.mean_deviation_deg),
        ("mean_raw_uncertainty", r.mean_raw_uncertainty),
        ("mean_refined_uncertainty", r.mean_refined_uncertainty),
    ];
    for (metric, v) in optional {
        if let Some(v) = v {
            put(metric, "", v.to_string());
        }
    }
    for (i, n) in r.risk_histogram.iter().enumerate() {
        put("risk_histogram", &i.to_string(), n.to_string());
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn speed_from(name: &str) -> Option<SpeedDecision> {
    SpeedDecision::ALL.into_iter().find(|s| format!("{s:?}") == name)
}

fn path_from(name: &str) -> Option<Maneuver> {
    Maneuver::ALL.into_iter().find(|m| format!("{m:?}") == name)
}

/// Inverse of [`to_csv`].
pub fn parse_csv(text: &str) -> Result<SuiteResult> {
    let bad = |line: u64, msg: String| Error::parse(format!("metrics csv line {line}"), msg);
    let mut r = SuiteResult {
        scenes: 0,
        errors: 0,
        confusion: [[0; 6]; 6],
        speed: BTreeMap::new(),
        speed_accuracy: 0.0,
        path: BTreeMap::new(),
        path_accuracy: 0.0,
        gt_objects: 0,
        predicted_objects: 0,
        matched: 0,
        mean_iou: None,
        detection_accuracy: None,
        l_reg: None,
        mean_entropy: None,
        mean_deviation_deg: None,
        mean_raw_uncertainty: None,
        mean_refined_uncertainty: None,
        risk_histogram: [0; RISK_BINS],
    };
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let headers = rd.headers().map_err(|e| bad(1, e.to_string()))?;
    if headers != vec!["metric", "class", "value"] {
        return Err(bad(1, format!("expected header metric,class,value, found {headers:?}")));
    }
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::parse("metrics csv", e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let (metric, class, value) = (&rec[0], &rec[1], &rec[2]);
        let float = || value.parse::<f64>().map_err(|e| bad(line, format!("{metric}: {e}")));
        let count = || value.parse::<usize>().map_err(|e| bad(line, format!("{metric}: {e}")));
        let speed = |r: &mut SuiteResult| -> Result<SpeedDecision> {
            let s = speed_from(class).ok_or_else(|| bad(line, format!("unknown speed class {class:?}")))?;
            r.speed.entry(s).or_insert(ClassMetrics {
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
                support: 0,
                predicted: 0,
            });
            Ok(s)
        };
        let path = |r: &mut SuiteResult| -> Result<Maneuver> {
            let p = path_from(class).ok_or_else(|| bad(line, format!("unknown path class {class:?}")))?;
            r.path.entry(p).or_insert(PathMetrics {
                correct: 0,
                total: 0,
                accuracy: 0.0,
            });
            Ok(p)
        };
        match (metric, class.is_empty()) {
            ("scenes", true) => r.scenes = count()?,
            ("errors", true) => r.errors = count()?,
            ("speed_accuracy", true) => r.speed_accuracy = float()?,
            ("path_accuracy", true) => r.path_accuracy = float()?,
            ("gt_objects", true) => r.gt_objects = count()?,
            ("predicted_objects", true) => r.predicted_objects = count()?,
            ("matched", true) => r.matched = count()?,
            ("mean_iou", true) => r.mean_iou = Some(float()?),
            ("detection_accuracy", true) => r.detection_accuracy = Some(float()?),
            ("l_reg", true) => r.l_reg = Some(float()?),
            ("mean_entropy", true) => r.mean_entropy = Some(float()?),
            ("mean_deviation_deg", true) => r.mean_deviation_deg = Some(float()?),
            ("mean_raw_uncertainty", true) => r.mean_raw_uncertainty = Some(float()?),
            ("mean_refined_uncertainty", true) => r.mean_refined_uncertainty = Some(float()?),
            ("speed_precision", false) => { let k = speed(&mut r)?; r.speed.get_mut(&k).expect("inserted").precision = float()? },
            ("speed_recall", false) => { let k = speed(&mut r)?; r.speed.get_mut(&k).expect("inserted").recall = float()? },
            ("speed_f1", false) => { let k = speed(&mut r)?; r.speed.get_mut(&k).expect("inserted").f1 = float()? },
            ("speed_support", false) => { let k = speed(&mut r)?; r.speed.get_mut(&k).expect("inserted").support = count()? },
            ("speed_predicted", false) => { let k = speed(&mut r)?; r.speed.get_mut(&k).expect("inserted").predicted = count()? },
            ("path_correct", false) => { let k = path(&mut r)?; r.path.get_mut(&k).expect("inserted").correct = count()? },
            ("path_total", false) => { let k = path(&mut r)?; r.path.get_mut(&k).expect("inserted").total = count()? },
            ("path_accuracy", false) => { let k = path(&mut r)?; r.path.get_mut(&k).expect("inserted").accuracy = float()? },
            ("confusion", false) => {
                let parsed = class
                    .split_once('>')
                    .and_then(|(a, b)| Some((speed_from(a)?, speed_from(b)?)));
                let (a, b) = parsed.ok_or_else(|| bad(line, format!("bad confusion cell {class:?}")))?;
                r.confusion[a.index()][b.index()] = count()?;
            }
            ("risk_histogram", false) => {
                let bin = class
                    .parse::<usize>()
                    .ok()
                    .filter(|&b| b < RISK_BINS)
                    .ok_or_else(|| bad(line, format!("bad histogram bin {class:?}")))?;
                r.risk_histogram[bin] = count()?;
            }
            _ => return Err(bad(line, format!("unknown metric {metric:?} with class {class:?}"))),
        }
    }
    Ok(r)
}

/// Plot-ready JSON: bar series for speed F1 and path accuracy, the confusion
/// matrix and the risk histogram with bin edges.
pub fn plot_json(r: &SuiteResult) -> serde_json::Value {
    let speed_labels: Vec<&str> = SpeedDecision::ALL.iter().map(|s| s.label()).collect();
    let path_labels: Vec<&str> = Maneuver::ALL.iter().map(|&m| path_label(m)).collect();
    let edges: Vec<f64> = (0..=RISK_BINS).map(|i| i as f64 / RISK_BINS as f64).collect();
    json!({
        "speed_f1": {
            "labels": speed_labels,
            "values": SpeedDecision::ALL.iter().map(|s| r.speed.get(s).map(|m| m.f1)).collect::<Vec<_>>(),
        },
        "path_accuracy": {
            "labels": path_labels,
            "values": Maneuver::ALL.iter().map(|m| r.path.get(m).map(|m| m.accuracy)).collect::<Vec<_>>(),
        },
        "confusion": {
            "labels": speed_labels,
            "matrix": r.confusion,
        },
        "risk_histogram": {
            "edges": edges,
            "counts": r.risk_histogram,
        },
    })
}

/// One row per scene, in canonical (template, seed, scene) order.
pub fn scenes_csv(outcomes: &[SceneOutcome]) -> String {
    let mut sorted: Vec<&SceneOutcome> = outcomes.iter().collect();
    sorted.sort_by(|a, b| (a.template, a.seed, &a.scene).cmp(&(b.template, b.seed, &b.scene)));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scene",
        "template",
        "seed",
        "expected_speed",
        "expected_path",
        "speed",
        "path",
        "correct",
        "explanation",
        "error",
    ])
    .expect("in-memory write");
    for o in sorted {
        let correct = o.speed == Some(o.expected.speed) && o.path == Some(o.expected.path);
        w.write_record([
            o.scene.clone(),
            o.template.name().to_string(),
            o.seed.to_string(),
            name(o.expected.speed),
            name(o.expected.path),
            o.speed.map(name).unwrap_or_default(),
            o.path.map(name).unwrap_or_default(),
            correct.to_string(),
            o.explanation.clone(),
            o.error.clone().unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub table: PathBuf,
    pub metrics_csv: PathBuf,
    pub plot_json: PathBuf,
    /// Written only when outcomes are supplied.
    pub scenes_csv: Option<PathBuf>,
}

/// Writes `table.txt`, `metrics.csv`, `plot.json` and, given outcomes,
/// `scenes.csv` into `dir`.
pub fn write_reports(dir: &Path, r: &SuiteResult, outcomes: Option<&[SceneOutcome]>) -> Result<ReportFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |file: &str, text: String| -> Result<PathBuf> {
        let p = dir.join(file);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    };
    let plot = serde_json::to_string_pretty(&plot_json(r)).expect("json serializes") + "\n";
    Ok(ReportFiles {
        table: write("table.txt", text_table(r))?,
        metrics_csv: write("metrics.csv", to_csv(r))?,
        plot_json: write("plot.json", plot)?,
        scenes_csv: outcomes.map(|o| write("scenes.csv", scenes_csv(o))).transpose()?,
    })
}
