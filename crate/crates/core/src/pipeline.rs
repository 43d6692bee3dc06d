//! File-level pipeline stages. Each stage reads its inputs from and writes
//! its outputs under one output root, so the stages compose and can be rerun
//! one at a time.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{generate_scenario_set, AttackSpec, LabelSeries, SpoofedSegment};
use crate::config::{RunConfig, Stage};
use crate::data::{generate_synthetic_trace, load_labeled_trace, load_trace, save_trace, Trace};
use crate::detector::{run_detection, run_detection_online, DetectionSeries};
use crate::error::{Error, Result};
use crate::eval::{merge_flags, pr_curve, score_scenario, ScenarioReport, ScenarioScore};
use crate::io::{read_json, write_atomic, write_json};
use crate::predictor::{step_rows, train_predictor, Predictor, ValidationReport};
use crate::rl::{train_agent, AgentFile, QLearningConfig};

/// Where every artifact lives.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub traces: PathBuf,
    pub models: PathBuf,
    pub reports: PathBuf,
}

impl Layout {
    pub fn new(out: &Path, cfg: &RunConfig) -> Self {
        Layout {
            traces: out.join(&cfg.paths.traces),
            models: out.join(&cfg.paths.models),
            reports: out.join(&cfg.paths.reports),
        }
    }

    pub fn clean_trace(&self) -> PathBuf {
        self.traces.join("clean.csv")
    }

    pub fn manifest(&self) -> PathBuf {
        self.traces.join("manifest.json")
    }

    pub fn scenario_file_name(id: usize) -> String {
        format!("scenario_{id:02}.csv")
    }

    pub fn predictor(&self) -> PathBuf {
        self.models.join("predictor.json")
    }

    pub fn validation(&self) -> PathBuf {
        self.models.join("validation.json")
    }

    pub fn agent(&self) -> PathBuf {
        self.models.join("agent.json")
    }

    pub fn detection(&self, id: usize) -> PathBuf {
        self.reports
            .join("detections")
            .join(Self::scenario_file_name(id))
    }

    pub fn pr_curve(&self, id: usize) -> PathBuf {
        self.reports
            .join("pr_curves")
            .join(Self::scenario_file_name(id))
    }

    pub fn report_csv(&self) -> PathBuf {
        self.reports.join("report.csv")
    }

    pub fn report_json(&self) -> PathBuf {
        self.reports.join("report.json")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: usize,
    /// Trace file, relative to the manifest; labels are its `label` column.
    pub trace_file: String,
    pub label_file: String,
    pub attacks: Vec<AttackSpec>,
    pub segments: Vec<SpoofedSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioManifest {
    pub rng_seed: u64,
    pub clean_trace: String,
    pub scenarios: Vec<ManifestEntry>,
}

impl ScenarioManifest {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn entry(&self, id: usize) -> Result<&ManifestEntry> {
        self.scenarios
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| Error::invalid(format!("manifest has no scenario {id}")))
    }
}

fn load_scenario(dir: &Path, entry: &ManifestEntry) -> Result<(Trace, LabelSeries)> {
    let path = dir.join(&entry.trace_file);
    let (trace, labels) = load_labeled_trace(&path)?;
    let labels = labels.ok_or_else(|| Error::Format {
        path: path.clone(),
        message: "scenario trace has no label column".into(),
    })?;
    Ok((trace, labels))
}

pub fn synth(cfg: &RunConfig, layout: &Layout) -> Result<PathBuf> {
    let cfg = cfg.clone().with_stage_seeds();
    let trace = generate_synthetic_trace(&cfg.synth)?;
    let path = layout.clean_trace();
    save_trace(&path, &trace, None)?;
    Ok(path)
}

pub fn inject(cfg: &RunConfig, layout: &Layout) -> Result<ScenarioManifest> {
    let clean = load_trace(&layout.clean_trace())?;
    let seed = cfg.stage_seed(Stage::Inject);
    let set = generate_scenario_set(&clean, &cfg.attacks, seed)?;
    let mut entries = Vec::with_capacity(set.scenarios.len());
    for s in &set.scenarios {
        let name = Layout::scenario_file_name(s.id);
        save_trace(&layout.traces.join(&name), &s.trace, Some(&s.labels))?;
        entries.push(ManifestEntry {
            id: s.id,
            trace_file: name.clone(),
            label_file: name,
            attacks: s.attacks.clone(),
            segments: s.segments.clone(),
        });
    }
    let manifest = ScenarioManifest {
        rng_seed: seed,
        clean_trace: "clean.csv".into(),
        scenarios: entries,
    };
    write_json(&layout.manifest(), &manifest)?;
    Ok(manifest)
}

pub fn train_predictor_stage(cfg: &RunConfig, layout: &Layout) -> Result<ValidationReport> {
    let cfg = cfg.clone().with_stage_seeds();
    let clean = load_trace(&layout.clean_trace())?;
    let rows = step_rows(&clean)?;
    let (predictor, report) = train_predictor(&rows, &cfg.predictor)?;
    predictor.save(&layout.predictor())?;
    write_json(&layout.validation(), &report)?;
    Ok(report)
}

/// Agent settings with the starting threshold filled in from the
/// predictor's held-out maximum error when the config leaves it open.
pub fn agent_config(cfg: &RunConfig, layout: &Layout) -> Result<QLearningConfig> {
    let mut agent = cfg.clone().with_stage_seeds().agent;
    if agent.initial_threshold_m.is_none() {
        let report: ValidationReport = read_json(&layout.validation())?;
        agent.initial_threshold_m = Some(report.max_abs_error_m.min(agent.threshold_max_m));
    }
    Ok(agent)
}

pub fn train_agent_stage(cfg: &RunConfig, layout: &Layout) -> Result<AgentFile> {
    let agent_cfg = agent_config(cfg, layout)?;
    let predictor = Predictor::load(&layout.predictor())?;
    let manifest = ScenarioManifest::load(&layout.manifest())?;
    let entry = manifest.entry(cfg.eval.train_scenario)?;
    let (trace, labels) = load_scenario(&layout.traces, entry)?;
    // DD does not depend on the threshold; any value gives the same series.
    let series = run_detection(&trace, &predictor, 0.0)?.dd_samples(&labels)?;
    let agent = train_agent(&series, &agent_cfg)?;
    let file = AgentFile::new(&agent, &agent_cfg);
    file.save(&layout.agent())?;
    Ok(file)
}

fn detect_with(
    cfg: &RunConfig,
    agent: &AgentFile,
    predictor: &Predictor,
    trace: &Trace,
) -> Result<DetectionSeries> {
    if cfg.eval.online_adaptation {
        run_detection_online(
            trace,
            predictor,
            &agent.clone().into_agent()?,
            &agent.config,
        )
    } else {
        run_detection(trace, predictor, agent.threshold_m)
    }
}

/// Runs the trained detector over one trace file and writes the detection
/// CSV.
pub fn detect(
    cfg: &RunConfig,
    layout: &Layout,
    trace_path: &Path,
    output: &Path,
) -> Result<DetectionSeries> {
    let predictor = Predictor::load(&layout.predictor())?;
    let agent = AgentFile::load(&layout.agent())?;
    let trace = load_trace(trace_path)?;
    let series = detect_with(cfg, &agent, &predictor, &trace)?;
    series.save_csv(output)?;
    Ok(series)
}

/// Scores every scenario except the training one, in manifest order.
pub fn evaluate(cfg: &RunConfig, layout: &Layout) -> Result<ScenarioReport> {
    let predictor = Predictor::load(&layout.predictor())?;
    let agent = AgentFile::load(&layout.agent())?;
    let manifest = ScenarioManifest::load(&layout.manifest())?;
    let grid = cfg.eval.grid()?;
    let held_out: Vec<&ManifestEntry> = manifest
        .scenarios
        .iter()
        .filter(|e| e.id != cfg.eval.train_scenario)
        .collect();

    let rows = held_out
        .par_iter()
        .map(|entry| -> Result<ScenarioScore> {
            let (trace, labels) = load_scenario(&layout.traces, entry)?;
            let series = detect_with(cfg, &agent, &predictor, &trace)?;
            series.save_csv(&layout.detection(entry.id))?;
            let truth = series.aligned_labels(&labels)?;
            let flags = merge_flags(&series.flags(), cfg.eval.merge_window);
            let curve = pr_curve(&series.dd(), &truth, &grid)?;
            write_atomic(&layout.pr_curve(entry.id), curve.to_csv().as_bytes())?;
            score_scenario(entry.id, agent.threshold_m, &flags, &truth)
        })
        .collect::<Result<Vec<_>>>()?;

    let report = ScenarioReport::new(rows)?;
    write_atomic(&layout.report_csv(), report.to_csv().as_bytes())?;
    write_json(&layout.report_json(), &report)?;
    Ok(report)
}

/// Outputs of a full run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub validation: ValidationReport,
    pub agent: AgentFile,
    pub report: ScenarioReport,
}

/// synth, inject, train predictor, train agent, evaluate.
pub fn run_all(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let layout = Layout::new(out, cfg);
    synth(cfg, &layout)?;
    inject(cfg, &layout)?;
    let validation = train_predictor_stage(cfg, &layout)?;
    let agent = train_agent_stage(cfg, &layout)?;
    let report = evaluate(cfg, &layout)?;
    Ok(RunSummary {
        validation,
        agent,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.synth.duration_s = 40.0;
        cfg.attacks.max_attacks = 12;
        cfg.attacks.min_attacks = 3;
        cfg.attacks.scenario_count = 4;
        cfg.predictor.epochs = 30;
        cfg.agent.total_steps = 500;
        cfg.eval.grid_points = 20;
        cfg
    }

    #[test]
    fn stages_compose_on_a_small_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config();
        let summary = run_all(&cfg, dir.path()).unwrap();
        let ids: Vec<usize> = summary.report.rows.iter().map(|r| r.scenario).collect();
        assert_eq!(ids, vec![1, 3, 4]);
        let layout = Layout::new(dir.path(), &cfg);
        for id in [1, 3, 4] {
            assert!(layout.detection(id).exists());
            assert!(layout.pr_curve(id).exists());
        }
        assert!(!layout.detection(2).exists());
        let manifest = ScenarioManifest::load(&layout.manifest()).unwrap();
        assert_eq!(manifest.scenarios.len(), 4);
    }

    #[test]
    fn missing_inputs_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config();
        let layout = Layout::new(dir.path(), &cfg);
        let err = inject(&cfg, &layout).unwrap_err();
        assert!(err.is_data_error(), "{err}");
        assert!(err.to_string().contains("clean.csv"), "{err}");
        assert!(evaluate(&cfg, &layout).is_err());
    }
}
