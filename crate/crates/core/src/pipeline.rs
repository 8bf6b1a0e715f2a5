//! End-to-end pipeline orchestration: ingest → (track) → dissimilarity →
//! constraints → clustering → metrics, with report and artifact emission.
//!
//! Runs are deterministic given config + dataset: pairwise work is assembled
//! by index regardless of the parallelism cap, and all output files are
//! written atomically with stable field ordering. On failure, outputs
//! already written by the failing run are removed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::calibration::{
    all_labeled_pairs, calibrate_threshold, calibrate_threshold_with, resolve_pairs,
    CalibrationResult,
};
use crate::clustering::{
    agglomerative_cluster, euclidean, mean_descriptor, mean_descriptor_matrix, ClusterAssignment,
    Dendrogram, Linkage,
};
use crate::dissimilarity::{
    apply_constraints, build_constraint_matrix, build_dissimilarity_matrix, ConstraintMode,
};
use crate::error::{Error, Result};
use crate::formats;
use crate::matching::{build_matcher, ExampleMatcher, MatcherConfig, MatcherKind, ScoreTable};
use crate::metrics::{ari, contingency_table, nmi, NmiNormalization};
use crate::model::{validate_dataset, Dataset, DatasetRole, FaceSet, SetId};
use crate::scalar::Real;
use crate::tracklets::{bag_and_prototype, link_detections, sequence_is_trackable, LinkConfig};

/// Threshold source: a fixed value or calibration on a training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSpec {
    Fixed(f64),
    Calibrate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dataset: PathBuf,
    pub output_dir: PathBuf,
    pub matcher: MatcherConfig,
    pub linkage: Linkage,
    pub theta: ThetaSpec,
    pub constraint_mode: ConstraintMode,
    /// Training dataset for `theta = calibrate`.
    pub calibration_dataset: Option<PathBuf>,
    /// Labeled pair list; defaults to all labeled pairs of the calibration
    /// dataset.
    pub calibration_pairs: Option<PathBuf>,
    /// Override the train/test separation guard.
    pub allow_same_dataset: bool,
    /// Ground-truth labels for evaluation; embedded labels are used when
    /// absent.
    pub truth: Option<PathBuf>,
    /// Also run the mean-descriptor Euclidean baseline.
    pub with_baseline: bool,
    /// Dump the dissimilarity and constraint matrices.
    pub dump_matrices: bool,
    /// Worker cap for pairwise evaluation; 0 = auto.
    pub parallelism: usize,
    pub nmi_normalization: NmiNormalization,
    pub tracklets: LinkConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            output_dir: PathBuf::new(),
            matcher: MatcherConfig::default(),
            linkage: Linkage::Average,
            theta: ThetaSpec::Calibrate,
            constraint_mode: ConstraintMode::Weight,
            calibration_dataset: None,
            calibration_pairs: None,
            allow_same_dataset: false,
            truth: None,
            with_baseline: false,
            dump_matrices: false,
            parallelism: 0,
            nmi_normalization: NmiNormalization::Arithmetic,
            tracklets: LinkConfig::default(),
        }
    }
}

/// Metrics for one method variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub name: String,
    pub theta: f64,
    pub num_clusters: usize,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub nmi_pct: Option<f64>,
    pub ari_pct: Option<f64>,
    pub dendrogram_merges: usize,
    pub dendrogram_max_height: Option<f64>,
}

/// Calibration evidence carried in the report for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEcho {
    pub theta: f64,
    pub median_d: Option<f64>,
    pub delta_s_values: Vec<f64>,
    pub delta_d_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub n_face_sets: usize,
    pub theta: f64,
    pub methods: Vec<MethodReport>,
    pub calibration: Option<CalibrationEcho>,
    pub constrained_pairs: usize,
    pub timings: Vec<StageTiming>,
}

/// Output formats for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Plotdata,
}

struct OutputTracker {
    written: Vec<PathBuf>,
}

impl OutputTracker {
    fn new() -> Self {
        Self { written: Vec::new() }
    }

    fn record(&mut self, path: &Path) {
        self.written.push(path.to_path_buf());
    }

    fn remove_all(&self) {
        for path in &self.written {
            let _ = std::fs::remove_file(path);
        }
    }
}

/// Load, validate, and (when raw detections are present without face-sets)
/// track a dataset into face-sets.
pub fn load_prepared_dataset(path: &Path, link: &LinkConfig) -> Result<Dataset<f64>> {
    let mut dataset = formats::read_manifest::<f64>(path).map_err(|e| e.in_stage("ingest"))?;
    if dataset.face_sets.is_empty() && !dataset.detections.is_empty() {
        track_dataset(&mut dataset, link).map_err(|e| e.in_stage("track"))?;
    }
    let report = validate_dataset(&dataset);
    if !report.is_valid() {
        return Err(Error::InvalidDataset(report.to_string()).in_stage("validate"));
    }
    Ok(dataset)
}

/// Run the tracklet stage over every sequence with detections, replacing the
/// dataset's face-sets.
pub fn track_dataset(dataset: &mut Dataset<f64>, link: &LinkConfig) -> Result<()> {
    let mut face_sets = Vec::new();
    for seq in &mut dataset.sequences {
        let Some(dets) = dataset.detections.get(&seq.sequence_id) else {
            continue;
        };
        let mut frames: Vec<Vec<crate::model::Detection<f64>>> = vec![Vec::new(); seq.frame_count];
        for det in dets {
            if det.frame_index < seq.frame_count {
                frames[det.frame_index].push(det.clone());
            }
        }
        if !sequence_is_trackable(&frames, link.min_face_frame_ratio) {
            seq.face_set_ids = Vec::new();
            continue;
        }
        let tracklets = link_detections(&frames, link)?;
        let sets = bag_and_prototype(&tracklets, link.overlap_min, &seq.sequence_id);
        seq.face_set_ids = sets.iter().map(|s| s.set_id.clone()).collect();
        face_sets.extend(sets);
    }
    dataset.face_sets = face_sets;
    Ok(())
}

/// Run `f` under a worker pool capped at `parallelism` threads (0 = the
/// global default pool).
pub fn with_parallelism<R: Send>(parallelism: usize, f: impl FnOnce() -> R + Send) -> R {
    if parallelism == 0 {
        f()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .expect("worker pool");
        pool.install(f)
    }
}

fn truth_for<T: Real>(
    dataset: &Dataset<T>,
    truth_path: Option<&Path>,
) -> Result<Option<BTreeMap<SetId, String>>> {
    match truth_path {
        Some(path) => Ok(Some(formats::read_truth(path)?)),
        None => {
            let embedded = dataset.truth_labels();
            if embedded.len() == dataset.face_sets.len() && !embedded.is_empty() {
                Ok(Some(embedded))
            } else {
                Ok(None)
            }
        }
    }
}

fn score_against_truth(
    assignment: &ClusterAssignment,
    truth: &BTreeMap<SetId, String>,
    set_ids: &[SetId],
    normalization: NmiNormalization,
) -> Result<(f64, f64)> {
    let mut classes: Vec<&String> = truth.values().collect();
    classes.sort();
    classes.dedup();
    let mut truth_labels = Vec::with_capacity(set_ids.len());
    let mut predicted = Vec::with_capacity(set_ids.len());
    for id in set_ids {
        let t = truth.get(id).ok_or_else(|| {
            Error::LabelUniverseMismatch(format!("face-set {id} has no truth label"))
        })?;
        let p = assignment
            .labels
            .get(id)
            .ok_or_else(|| Error::LabelUniverseMismatch(format!("face-set {id} not clustered")))?;
        truth_labels.push(classes.binary_search(&t).expect("label catalogued") as usize);
        predicted.push(*p);
    }
    let table = contingency_table(&truth_labels, &predicted)?;
    Ok((nmi(&table, normalization)?, ari(&table)?))
}

fn method_report(
    name: &str,
    theta: f64,
    dendrogram: &Dendrogram<f64>,
    assignment: &ClusterAssignment,
    scores: Option<(f64, f64)>,
) -> MethodReport {
    MethodReport {
        name: name.to_string(),
        theta,
        num_clusters: assignment.num_clusters,
        nmi: scores.map(|s| s.0),
        ari: scores.map(|s| s.1),
        nmi_pct: scores.map(|s| s.0 * 100.0),
        ari_pct: scores.map(|s| s.1 * 100.0),
        dendrogram_merges: dendrogram.steps.len(),
        dendrogram_max_height: dendrogram.max_height(),
    }
}

/// Calibrate θ for the face-set dissimilarity and, when requested, the
/// mean-descriptor baseline, from the configured training split.
pub struct CalibrationOutcome {
    pub eq_result: CalibrationResult<f64>,
    pub baseline_theta: Option<f64>,
}

pub fn run_calibration(
    config: &PipelineConfig,
    matcher: &dyn ExampleMatcher<f64>,
    need_baseline: bool,
) -> Result<CalibrationOutcome> {
    let cal_path = config.calibration_dataset.as_ref().ok_or_else(|| {
        Error::Config("theta = calibrate requires a calibration dataset path".into())
    })?;
    if cal_path == &config.dataset && !config.allow_same_dataset {
        return Err(Error::Config(
            "calibration and evaluation datasets are the same file; pass --allow-same-dataset to override"
                .into(),
        ));
    }
    let cal_ds = formats::read_manifest::<f64>(cal_path)?;
    if cal_ds.role != Some(DatasetRole::Training) && !config.allow_same_dataset {
        return Err(Error::Config(
            "calibration dataset is not flagged role=training; pass --allow-same-dataset to override"
                .into(),
        ));
    }
    let report = validate_dataset(&cal_ds);
    if !report.is_valid() {
        return Err(Error::InvalidDataset(report.to_string()));
    }
    let pairs = match &config.calibration_pairs {
        Some(path) => formats::read_calibration_pairs(path)?,
        None => all_labeled_pairs(&cal_ds),
    };
    let samples = resolve_pairs(&cal_ds, &pairs)?;
    let eq_result = calibrate_threshold(&samples, matcher)?;
    let baseline_theta = if need_baseline {
        let base = calibrate_threshold_with(&samples, |a: &FaceSet<f64>, b: &FaceSet<f64>| {
            Ok(euclidean(&mean_descriptor(a)?, &mean_descriptor(b)?))
        })?;
        Some(base.theta)
    } else {
        None
    };
    Ok(CalibrationOutcome {
        eq_result,
        baseline_theta,
    })
}

/// Execute the full pipeline and write all artifacts into
/// `config.output_dir`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport> {
    let mut outputs = OutputTracker::new();
    match run_pipeline_inner(config, &mut outputs) {
        Ok(report) => Ok(report),
        Err(e) => {
            outputs.remove_all();
            Err(e)
        }
    }
}

fn run_pipeline_inner(config: &PipelineConfig, outputs: &mut OutputTracker) -> Result<RunReport> {
    config.matcher.validate()?;
    if config.theta == ThetaSpec::Calibrate && config.calibration_dataset.is_none() {
        return Err(Error::Config(
            "theta = calibrate requires a calibration dataset path".into(),
        ));
    }
    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;

    let mut timings: Vec<StageTiming> = Vec::new();
    let timed = |stage: &str, timings: &mut Vec<StageTiming>, start: Instant| {
        timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
    };

    let t0 = Instant::now();
    let dataset = load_prepared_dataset(&config.dataset, &config.tracklets)?;
    timed("ingest", &mut timings, t0);

    let table = match (&config.matcher.kind, &config.matcher.score_table_path) {
        (MatcherKind::Precomputed, Some(path)) => {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
            Some(ScoreTable::load(std::io::BufReader::new(file)).map_err(|e| e.in_stage("ingest"))?)
        }
        (MatcherKind::Precomputed, None) => {
            return Err(Error::Config("precomputed matcher requires score_table_path".into()))
        }
        _ => None,
    };
    let matcher = build_matcher::<f64>(&config.matcher, table)?;

    // threshold
    let t0 = Instant::now();
    let mut calibration_echo = None;
    let mut baseline_theta = None;
    let theta = match config.theta {
        ThetaSpec::Fixed(v) => {
            if config.with_baseline {
                return Err(Error::Config(
                    "the baseline needs a calibrated threshold; use theta = calibrate".into(),
                ));
            }
            v
        }
        ThetaSpec::Calibrate => {
            let outcome = run_calibration(config, matcher.as_ref(), config.with_baseline)
                .map_err(|e| e.in_stage("calibrate"))?;
            baseline_theta = outcome.baseline_theta;
            let r = &outcome.eq_result;
            calibration_echo = Some(CalibrationEcho {
                theta: r.theta,
                median_d: r.median_d,
                delta_s_values: r.delta_s_values.clone(),
                delta_d_values: r.delta_d_values.clone(),
            });
            let plot = out.join("plotdata.csv");
            formats::write_plotdata(&plot, &r.delta_s_values, &r.delta_d_values, r.theta, r.median_d)
                .map_err(|e| e.in_stage("calibrate"))?;
            outputs.record(&plot);
            r.theta
        }
    };
    timed("calibrate", &mut timings, t0);

    // dissimilarity + constraints
    let t0 = Instant::now();
    let d = with_parallelism(config.parallelism, || {
        build_dissimilarity_matrix(&dataset, matcher.as_ref())
    })
    .map_err(|e| e.in_stage("dissimilarity"))?;
    timed("dissimilarity", &mut timings, t0);

    let t0 = Instant::now();
    let c = build_constraint_matrix(&dataset);
    let constrained = apply_constraints(&d, &c, config.constraint_mode)
        .map_err(|e| e.in_stage("constraints"))?;
    timed("constraints", &mut timings, t0);

    if config.dump_matrices {
        let dp = out.join("dissimilarity.txt");
        formats::write_matrix(&dp, d.order(), d.values(), Some(d.set_ids()))?;
        outputs.record(&dp);
        let cp = out.join("constraints.txt");
        let flags: Vec<f64> = (0..c.order() * c.order())
            .map(|k| if c.get(k / c.order(), k % c.order()) { 1.0 } else { 0.0 })
            .collect();
        formats::write_matrix(&cp, c.order(), &flags, Some(c.set_ids()))?;
        outputs.record(&cp);
    }

    // clustering
    let t0 = Instant::now();
    let (dendrogram, assignment) =
        agglomerative_cluster(&constrained, config.linkage, theta).map_err(|e| e.in_stage("cluster"))?;
    timed("cluster", &mut timings, t0);

    let assignment_path = out.join("assignment.csv");
    formats::write_assignment(&assignment_path, &assignment.labels)?;
    outputs.record(&assignment_path);

    // evaluation
    let t0 = Instant::now();
    let truth = truth_for(&dataset, config.truth.as_deref()).map_err(|e| e.in_stage("evaluate"))?;
    let set_ids: Vec<SetId> = dataset.face_sets.iter().map(|f| f.set_id.clone()).collect();
    let scores = match &truth {
        Some(t) => Some(
            score_against_truth(&assignment, t, &set_ids, config.nmi_normalization)
                .map_err(|e| e.in_stage("evaluate"))?,
        ),
        None => None,
    };
    let mut methods = vec![method_report(
        "median_face_set",
        theta,
        &dendrogram,
        &assignment,
        scores,
    )];

    if config.with_baseline {
        let base_theta = baseline_theta.expect("enforced above");
        let base_matrix =
            mean_descriptor_matrix(&dataset).map_err(|e| e.in_stage("baseline"))?;
        let (base_dendro, base_assign) =
            agglomerative_cluster(&base_matrix, config.linkage, base_theta)
                .map_err(|e| e.in_stage("baseline"))?;
        let base_scores = match &truth {
            Some(t) => Some(
                score_against_truth(&base_assign, t, &set_ids, config.nmi_normalization)
                    .map_err(|e| e.in_stage("baseline"))?,
            ),
            None => None,
        };
        let base_path = out.join("assignment_baseline.csv");
        formats::write_assignment(&base_path, &base_assign.labels)?;
        outputs.record(&base_path);
        methods.push(method_report(
            "mean_descriptor",
            base_theta,
            &base_dendro,
            &base_assign,
            base_scores,
        ));
    }
    timed("evaluate", &mut timings, t0);

    let metrics_path = out.join("metrics.json");
    formats::write_metrics_json(
        &metrics_path,
        &formats::MetricsJson::new(
            scores.map(|s| s.0),
            scores.map(|s| s.1),
            Some(theta),
            dataset.face_sets.len(),
        ),
    )?;
    outputs.record(&metrics_path);

    let config_path = out.join("config.json");
    formats::write_json_pretty(&config_path, config)?;
    outputs.record(&config_path);

    let report = RunReport {
        config: config.clone(),
        n_face_sets: dataset.face_sets.len(),
        theta,
        methods,
        calibration: calibration_echo,
        constrained_pairs: c.count_constrained_pairs(),
        timings,
    };
    let report_path = out.join("report.json");
    formats::write_json_pretty(&report_path, &report)?;
    outputs.record(&report_path);
    Ok(report)
}

/// Re-emit a run report in the requested formats.
pub fn emit_report(report: &RunReport, formats_wanted: &[ReportFormat], out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let mut written = Vec::new();
    for format in formats_wanted {
        match format {
            ReportFormat::Json => {
                let path = out_dir.join("report.json");
                formats::write_json_pretty(&path, report)?;
                written.push(path);
            }
            ReportFormat::Csv => {
                let path = out_dir.join("metrics.csv");
                let mut text =
                    String::from("method,theta,num_clusters,nmi,ari,nmi_pct,ari_pct\n");
                for m in &report.methods {
                    let field = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                    text.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        m.name,
                        m.theta,
                        m.num_clusters,
                        field(m.nmi),
                        field(m.ari),
                        field(m.nmi_pct),
                        field(m.ari_pct),
                    ));
                }
                formats::write_atomic(&path, text.as_bytes())?;
                written.push(path);
            }
            ReportFormat::Plotdata => {
                let cal = report.calibration.as_ref().ok_or_else(|| {
                    Error::Config("report has no calibration data for plotdata".into())
                })?;
                let path = out_dir.join("plotdata.csv");
                formats::write_plotdata(
                    &path,
                    &cal.delta_s_values,
                    &cal.delta_d_values,
                    cal.theta,
                    cal.median_d,
                )?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_dataset, SynthConfig};
    use tempfile::TempDir;

    fn write_corpora(dir: &Path) -> (PathBuf, PathBuf) {
        let (eval_ds, _) = generate_dataset::<f64>(&SynthConfig {
            num_identities: 4,
            sets_per_identity: 3,
            examples_per_set: (3, 6),
            seed: 7,
            ..SynthConfig::default()
        })
        .unwrap();
        let eval = dir.join("eval.json");
        formats::write_manifest(&eval_ds, &eval).unwrap();

        let (mut cal_ds, _) = generate_dataset::<f64>(&SynthConfig {
            num_identities: 6,
            sets_per_identity: 4,
            examples_per_set: (1, 4),
            intra_sigma: 0.07,
            placement_spread: 12.0 * 0.1 / 0.07,
            seed: 1007,
            ..SynthConfig::default()
        })
        .unwrap();
        cal_ds.role = Some(DatasetRole::Training);
        let cal = dir.join("cal.json");
        formats::write_manifest(&cal_ds, &cal).unwrap();
        (eval, cal)
    }

    fn base_config(dir: &Path, eval: PathBuf, cal: PathBuf) -> PipelineConfig {
        PipelineConfig {
            dataset: eval,
            output_dir: dir.join("out"),
            calibration_dataset: Some(cal),
            with_baseline: true,
            dump_matrices: true,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn full_run_produces_all_artifacts_and_recovers_identities() {
        let dir = TempDir::new().unwrap();
        let (eval, cal) = write_corpora(dir.path());
        let config = base_config(dir.path(), eval, cal);
        let report = run_pipeline(&config).unwrap();
        assert_eq!(report.n_face_sets, 12);
        assert_eq!(report.methods.len(), 2);
        let main = &report.methods[0];
        assert_eq!(main.name, "median_face_set");
        assert_eq!(main.nmi, Some(1.0));
        assert_eq!(main.ari, Some(1.0));
        assert_eq!(main.num_clusters, 4);
        for file in [
            "assignment.csv",
            "assignment_baseline.csv",
            "metrics.json",
            "config.json",
            "report.json",
            "plotdata.csv",
            "dissimilarity.txt",
            "constraints.txt",
        ] {
            assert!(dir.path().join("out").join(file).is_file(), "missing {file}");
        }
    }

    #[test]
    fn calibrate_without_dataset_fails_before_compute() {
        let dir = TempDir::new().unwrap();
        let (eval, _) = write_corpora(dir.path());
        let config = PipelineConfig {
            dataset: eval,
            output_dir: dir.path().join("out"),
            ..PipelineConfig::default()
        };
        assert!(matches!(run_pipeline(&config), Err(Error::Config(_))));
        assert!(!dir.path().join("out").join("assignment.csv").exists());
    }

    #[test]
    fn same_dataset_for_train_and_eval_is_refused() {
        let dir = TempDir::new().unwrap();
        let (eval, _) = write_corpora(dir.path());
        let config = PipelineConfig {
            dataset: eval.clone(),
            output_dir: dir.path().join("out"),
            calibration_dataset: Some(eval),
            ..PipelineConfig::default()
        };
        match run_pipeline(&config) {
            Err(Error::Stage { stage, source }) => {
                assert_eq!(stage, "calibrate");
                assert!(matches!(*source, Error::Config(_)));
            }
            other => panic!("expected stage error, got {other:?}"),
        }
    }

    #[test]
    fn non_training_calibration_dataset_is_refused_without_override() {
        let dir = TempDir::new().unwrap();
        let (eval, cal) = write_corpora(dir.path());
        // rewrite the calibration manifest without the training role
        let mut ds = formats::read_manifest::<f64>(&cal).unwrap();
        ds.role = None;
        formats::write_manifest(&ds, &cal).unwrap();
        let config = PipelineConfig {
            with_baseline: false,
            ..base_config(dir.path(), eval.clone(), cal.clone())
        };
        assert!(run_pipeline(&config).is_err());
        let config = PipelineConfig {
            allow_same_dataset: true,
            ..config
        };
        run_pipeline(&config).unwrap();
    }

    #[test]
    fn fixed_theta_skips_calibration() {
        let dir = TempDir::new().unwrap();
        let (eval, _) = write_corpora(dir.path());
        let config = PipelineConfig {
            dataset: eval,
            output_dir: dir.path().join("out"),
            theta: ThetaSpec::Fixed(0.05),
            with_baseline: false,
            ..PipelineConfig::default()
        };
        let report = run_pipeline(&config).unwrap();
        assert_eq!(report.theta, 0.05);
        assert!(report.calibration.is_none());
        assert!(!dir.path().join("out").join("plotdata.csv").exists());
    }

    #[test]
    fn reruns_are_byte_identical_across_parallelism() {
        let dir = TempDir::new().unwrap();
        let (eval, cal) = write_corpora(dir.path());
        let mut config = base_config(dir.path(), eval, cal);
        config.output_dir = dir.path().join("out1");
        config.parallelism = 1;
        run_pipeline(&config).unwrap();
        let mut config2 = config.clone();
        config2.output_dir = dir.path().join("out2");
        config2.parallelism = 4;
        run_pipeline(&config2).unwrap();
        for file in ["assignment.csv", "assignment_baseline.csv", "metrics.json", "plotdata.csv"] {
            let a = formats::read_bytes(&dir.path().join("out1").join(file)).unwrap();
            let b = formats::read_bytes(&dir.path().join("out2").join(file)).unwrap();
            assert_eq!(a, b, "{file} differs across parallelism settings");
        }
    }

    #[test]
    fn tracked_dataset_reaches_clustering() {
        let dir = TempDir::new().unwrap();
        // detections only: the pipeline must track first
        let (mut ds, _) = generate_dataset::<f64>(&SynthConfig {
            num_identities: 3,
            sets_per_identity: 2,
            examples_per_set: (4, 6),
            seed: 3,
            emit_detections: true,
            ..SynthConfig::default()
        })
        .unwrap();
        ds.face_sets.clear();
        for seq in &mut ds.sequences {
            seq.face_set_ids.clear();
        }
        let path = dir.path().join("dets.json");
        formats::write_manifest(&ds, &path).unwrap();
        let loaded = load_prepared_dataset(&path, &LinkConfig::default()).unwrap();
        assert!(!loaded.face_sets.is_empty());
        // one face-set per identity slot per sequence
        for seq in &loaded.sequences {
            assert!(!seq.face_set_ids.is_empty());
        }
    }

    #[test]
    fn emit_report_formats() {
        let dir = TempDir::new().unwrap();
        let (eval, cal) = write_corpora(dir.path());
        let config = base_config(dir.path(), eval, cal);
        let report = run_pipeline(&config).unwrap();
        let out = dir.path().join("reemit");
        let files = emit_report(
            &report,
            &[ReportFormat::Json, ReportFormat::Csv, ReportFormat::Plotdata],
            &out,
        )
        .unwrap();
        assert_eq!(files.len(), 3);
        let csv = String::from_utf8(formats::read_bytes(&out.join("metrics.csv")).unwrap()).unwrap();
        assert!(csv.starts_with("method,theta,num_clusters,nmi,ari,nmi_pct,ari_pct\n"));
        assert!(csv.contains("median_face_set"));
        assert!(csv.contains("mean_descriptor"));
    }
}
