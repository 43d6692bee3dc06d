//! Scoring: confusion counts, precision/recall/accuracy/f1 per scenario and
//! precision-recall sweeps over the threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attack is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(flags: &[bool], labels: &[bool]) -> Result<ConfusionMatrix> {
    if flags.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} flags scored against {} labels",
            flags.len(),
            labels.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&f, &l) in flags.iter().zip(labels) {
        match (f, l) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// Fractions in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision is 1 when nothing was flagged and f1 is 0 when precision and
/// recall are both 0. A series without attacks has no recall and is an
/// error.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricSet> {
    if cm.total() == 0 {
        return Err(Error::invalid("no scored steps"));
    }
    if cm.tp + cm.fn_ == 0 {
        return Err(Error::invalid(
            "recall is undefined: the series contains no attacks",
        ));
    }
    let accuracy = (cm.tp + cm.tn) as f64 / cm.total() as f64;
    let precision = if cm.tp + cm.fp == 0 {
        1.0
    } else {
        cm.tp as f64 / (cm.tp + cm.fp) as f64
    };
    let recall = cm.tp as f64 / (cm.tp + cm.fn_) as f64;
    Ok(MetricSet {
        accuracy,
        precision,
        recall,
        f1: f1_score(precision, recall),
    })
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Percentage with two decimals.
pub fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

/// Collapses runs of flags: after a kept flag, further flags within the
/// next `window - 1` steps are dropped as part of the same event. A window
/// of 0 or 1 leaves the flags unchanged.
pub fn merge_flags(flags: &[bool], window: usize) -> Vec<bool> {
    let mut out = flags.to_vec();
    if window <= 1 {
        return out;
    }
    let mut i = 0;
    while i < out.len() {
        if out[i] {
            for f in out.iter_mut().skip(i + 1).take(window - 1) {
                *f = false;
            }
            i += window;
        } else {
            i += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold_m: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold_m,precision,recall\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.threshold_m, p.precision, p.recall));
        }
        out
    }
}

/// Re-thresholds a DD series at every grid value.
pub fn pr_curve(dd: &[f64], labels: &[bool], grid: &[f64]) -> Result<PrCurve> {
    if grid.is_empty() {
        return Err(Error::invalid("threshold grid is empty"));
    }
    if !grid.is_sorted() {
        return Err(Error::invalid("threshold grid must be sorted ascending"));
    }
    if dd.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} DD values and {} labels",
            dd.len(),
            labels.len()
        )));
    }
    let points = grid
        .iter()
        .map(|&t| {
            let flags: Vec<bool> = dd.iter().map(|&d| d > t).collect();
            let m = metrics(&confusion(&flags, labels)?)?;
            Ok(PrPoint {
                threshold_m: t,
                precision: m.precision,
                recall: m.recall,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PrCurve { points })
}

/// `count` values spaced evenly in log scale from `min` to `max`.
pub fn log_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max > min && max.is_finite()) || count < 2 {
        return Err(Error::invalid(format!(
            "threshold grid needs 0 < min < max and at least 2 points (got {min}, {max}, {count})"
        )));
    }
    let (lo, hi) = (min.ln(), max.ln());
    Ok((0..count)
        .map(|i| {
            if i == count - 1 {
                max
            } else {
                (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScore {
    pub scenario: usize,
    pub threshold_m: f64,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
}

pub fn score_scenario(
    scenario: usize,
    threshold_m: f64,
    flags: &[bool],
    labels: &[bool],
) -> Result<ScenarioScore> {
    let confusion = confusion(flags, labels)?;
    Ok(ScenarioScore {
        scenario,
        threshold_m,
        confusion,
        metrics: metrics(&confusion)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub rows: Vec<ScenarioScore>,
}

pub const REPORT_HEADER: &str = "scenario,recall_pct,precision_pct,accuracy_pct,f1_pct";

impl ScenarioReport {
    pub fn new(rows: Vec<ScenarioScore>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("report needs at least one scored scenario"));
        }
        Ok(ScenarioReport { rows })
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for r in &self.rows {
            let m = &r.metrics;
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.scenario,
                pct(m.recall),
                pct(m.precision),
                pct(m.accuracy),
                pct(m.f1)
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matching_flags() {
        let x = [true, false, false, true];
        let cm = confusion(&x, &x).unwrap();
        assert_eq!((cm.tp, cm.tn, cm.fp, cm.fn_), (2, 2, 0, 0));
    }

    #[test]
    fn silent_detector_misses_everything() {
        let labels = [false, true, true, false, true];
        let cm = confusion(&[false; 5], &labels).unwrap();
        assert_eq!(cm.fn_, 3);
        let m = metrics(&cm).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 0.0, 0.0));
    }

    #[test]
    fn length_mismatch() {
        assert!(confusion(&[true], &[true, false]).is_err());
    }

    #[test]
    fn counts_match_loop_tally() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let flags: Vec<bool> = (0..1000).map(|_| rng.gen()).collect();
        let labels: Vec<bool> = (0..1000).map(|_| rng.gen_bool(0.1)).collect();
        let cm = confusion(&flags, &labels).unwrap();
        let mut tally = [0usize; 4];
        for i in 0..1000 {
            let k = usize::from(flags[i]) * 2 + usize::from(labels[i]);
            tally[k] += 1;
        }
        assert_eq!([cm.tn, cm.fn_, cm.fp, cm.tp], tally);
        assert_eq!(cm.total(), 1000);
    }

    #[test]
    fn perfect_detection() {
        let x = [true, false, false, false, true];
        let m = metrics(&confusion(&x, &x).unwrap()).unwrap();
        assert_eq!(
            (m.accuracy, m.precision, m.recall, m.f1),
            (1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn published_f1_pairs() {
        assert_eq!(pct(f1_score(0.9344, 1.0)), "96.61");
        assert_eq!(pct(f1_score(0.9857, 1.0)), "99.28");
    }

    #[test]
    fn degenerate_inputs() {
        assert!(metrics(&ConfusionMatrix::default()).is_err());
        let no_attacks = ConfusionMatrix {
            tn: 5,
            fp: 1,
            ..Default::default()
        };
        assert!(metrics(&no_attacks).is_err());
    }

    proptest! {
        #[test]
        fn self_agreement_scores_perfectly(mut labels in proptest::collection::vec(any::<bool>(), 2..200)) {
            labels[0] = true;
            labels[1] = false;
            let m = metrics(&confusion(&labels, &labels).unwrap()).unwrap();
            prop_assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
        }

        #[test]
        fn recall_never_rises_with_threshold(
            dd in proptest::collection::vec(0.0f64..100.0, 20..100),
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut labels: Vec<bool> = dd.iter().map(|_| rng.gen_bool(0.2)).collect();
            labels[0] = true;
            let grid = log_grid(0.01, 200.0, 50).unwrap();
            let curve = pr_curve(&dd, &labels, &grid).unwrap();
            for w in curve.points.windows(2) {
                prop_assert!(w[1].recall <= w[0].recall);
            }
        }
    }

    #[test]
    fn curve_edges() {
        let dd = [0.05, 0.08, 60.0, 0.02, 120.0];
        let labels = [false, false, true, false, true];
        let curve = pr_curve(&dd, &labels, &[0.0, 1.0, 500.0]).unwrap();
        let p = &curve.points;
        assert_eq!(p[0].recall, 1.0);
        assert_eq!((p[1].precision, p[1].recall), (1.0, 1.0));
        assert_eq!((p[2].precision, p[2].recall), (1.0, 0.0));
        assert!(pr_curve(&dd, &labels, &[]).is_err());
        assert!(pr_curve(&dd, &labels, &[2.0, 1.0]).is_err());
        assert!(curve
            .to_csv()
            .starts_with("threshold_m,precision,recall\n0,0.4,1\n"));
    }

    #[test]
    fn grid_shape() {
        let g = log_grid(0.01, 200.0, 5).unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[0] - 0.01).abs() < 1e-15);
        assert_eq!(g[4], 200.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(log_grid(0.0, 1.0, 5).is_err());
    }

    #[test]
    fn merging() {
        let f = [true, true, false, true, true, true, false];
        assert_eq!(merge_flags(&f, 0), f.to_vec());
        assert_eq!(
            merge_flags(&f, 2),
            vec![true, false, false, true, false, true, false]
        );
    }

    #[test]
    fn report_csv() {
        let x = [true, false, false, false];
        let flags = [true, true, false, false];
        let report = ScenarioReport::new(vec![
            score_scenario(1, 1.0, &x, &x).unwrap(),
            score_scenario(3, 1.0, &flags, &x).unwrap(),
        ])
        .unwrap();
        assert_eq!(
            report.to_csv(),
            "scenario,recall_pct,precision_pct,accuracy_pct,f1_pct\n1,100.00,100.00,100.00,100.00\n3,100.00,50.00,75.00,66.67\n"
        );
        assert!(ScenarioReport::new(vec![]).is_err());
    }
}
