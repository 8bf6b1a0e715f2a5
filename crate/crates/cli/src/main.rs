//! `egoface`: cluster face-sets from egocentric photo-streams into person
//! identities, with synthetic benchmarks and evaluation built in.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use egoface_core::calibration::{all_labeled_pairs, calibrate_threshold, resolve_pairs};
use egoface_core::clustering::{agglomerative_cluster, Linkage};
use egoface_core::dissimilarity::{
    apply_constraints, build_constraint_matrix, build_dissimilarity_matrix, ConstraintMode,
    DissimilarityMatrix,
};
use egoface_core::formats;
use egoface_core::matching::{
    build_matcher, DescriptorMetric, MatcherConfig, MatcherKind, ScoreTable,
};
use egoface_core::metrics::{ari, contingency_table, nmi, NmiNormalization};
use egoface_core::model::{validate_dataset, DatasetRole};
use egoface_core::pipeline::{
    emit_report, load_prepared_dataset, run_pipeline, track_dataset, with_parallelism,
    PipelineConfig, ReportFormat, RunReport, ThetaSpec,
};
use egoface_core::synth::{generate_dataset, SynthConfig, SynthMode};
use egoface_core::tracklets::LinkConfig;

#[derive(Parser)]
#[command(name = "egoface", version, about, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatcherKindArg {
    QuadPatch,
    Descriptor,
    Precomputed,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    CosineSim,
    InvEuclidean,
}

#[derive(Clone, Copy, ValueEnum)]
enum LinkageArg {
    Single,
    Complete,
    Average,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstraintArg {
    Weight,
    HardMax,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Descriptors,
    Patches,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Training,
    Evaluation,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Plotdata,
}

/// Matcher selection shared by several subcommands.
#[derive(Args)]
struct MatcherArgs {
    /// Similarity backend.
    #[arg(long, value_enum, default_value = "descriptor")]
    matcher: MatcherKindArg,
    /// Descriptor similarity metric.
    #[arg(long, value_enum, default_value = "inv-euclidean")]
    metric: MetricArg,
    /// Resize side length for the quadrant matcher.
    #[arg(long, default_value_t = 64)]
    patch_size: usize,
    /// Patches per image side.
    #[arg(long, default_value_t = 4)]
    grid: usize,
    /// Quadrant search radius in pixels.
    #[arg(long, default_value_t = 4)]
    search_radius: usize,
    /// Precomputed score table (TSV) for --matcher precomputed.
    #[arg(long)]
    score_table: Option<PathBuf>,
}

impl MatcherArgs {
    fn to_config(&self) -> MatcherConfig {
        MatcherConfig {
            kind: match self.matcher {
                MatcherKindArg::QuadPatch => MatcherKind::QuadPatch,
                MatcherKindArg::Descriptor => MatcherKind::Descriptor,
                MatcherKindArg::Precomputed => MatcherKind::Precomputed,
            },
            patch_size: self.patch_size,
            grid: self.grid,
            search_radius: self.search_radius,
            descriptor_metric: match self.metric {
                MetricArg::CosineSim => DescriptorMetric::CosineSim,
                MetricArg::InvEuclidean => DescriptorMetric::InvEuclidean,
            },
            score_table_path: self.score_table.clone(),
        }
    }
}

#[derive(Args)]
struct TrackingArgs {
    /// Maximum skipped frames inside one tracklet.
    #[arg(long, default_value_t = 2)]
    max_gap: usize,
    /// IoU gate for frame-to-frame linking.
    #[arg(long, default_value_t = 0.3)]
    iou_min: f64,
    /// Appearance-similarity gate for linking.
    #[arg(long, default_value_t = 0.7)]
    sim_min: f64,
    /// Mean shared-frame IoU for bagging tracklets.
    #[arg(long, default_value_t = 0.5)]
    overlap_min: f64,
    /// Minimum fraction of frames with detections for a trackable sequence.
    #[arg(long, default_value_t = 0.5)]
    min_face_frame_ratio: f64,
}

impl TrackingArgs {
    fn to_config(&self, matcher: MatcherConfig) -> LinkConfig {
        LinkConfig {
            max_gap: self.max_gap,
            iou_min: self.iou_min,
            sim_min: self.sim_min,
            overlap_min: self.overlap_min,
            min_face_frame_ratio: self.min_face_frame_ratio,
            matcher,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a dataset manifest against every invariant.
    Validate {
        /// Dataset manifest (JSON).
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Generate a synthetic ground-truthed dataset.
    Simulate {
        /// Output directory (manifest.json, truth.csv, patches/).
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 20)]
        identities: usize,
        #[arg(long, default_value_t = 5)]
        sets_per_identity: usize,
        #[arg(long, default_value_t = 5)]
        examples_min: usize,
        #[arg(long, default_value_t = 15)]
        examples_max: usize,
        #[arg(long, default_value_t = 4)]
        descriptor_dim: usize,
        #[arg(long, default_value_t = 0.1)]
        intra_sigma: f64,
        #[arg(long, default_value_t = 3.0)]
        inter_margin: f64,
        #[arg(long, default_value_t = 12.0)]
        placement_spread: f64,
        #[arg(long, default_value_t = 0.3)]
        cooccurrence_rate: f64,
        #[arg(long, default_value_t = 0)]
        confusable_pairs: usize,
        #[arg(long, default_value_t = 2.6)]
        confusable_margin: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "descriptors")]
        mode: ModeArg,
        /// Also emit raw per-frame detections for the track stage.
        #[arg(long)]
        emit_detections: bool,
        /// Mark the dataset role (training datasets feed calibration).
        #[arg(long, value_enum)]
        role: Option<RoleArg>,
    },
    /// Link raw detections into tracklets and face-sets.
    Track {
        #[arg(long)]
        dataset: PathBuf,
        /// Output manifest with the recovered face-sets.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        matcher: MatcherArgs,
        #[command(flatten)]
        tracking: TrackingArgs,
    },
    /// Compute and dump the dissimilarity (and constraint) matrices.
    Dissim {
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory for dissimilarity.txt / constraints.txt.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        matcher: MatcherArgs,
        /// Worker cap for pairwise evaluation; 0 = auto.
        #[arg(long, default_value_t = 0)]
        parallelism: usize,
    },
    /// Estimate the cut-off threshold from labeled pairs.
    Calibrate {
        /// Training dataset manifest.
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory (calibration.json, plotdata.csv).
        #[arg(long)]
        output: PathBuf,
        /// Labeled pairs CSV; defaults to all labeled pairs of the dataset.
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Accept a dataset not flagged role=training.
        #[arg(long)]
        allow_untagged: bool,
        #[command(flatten)]
        matcher: MatcherArgs,
    },
    /// Cluster face-sets with a fixed threshold.
    Cluster {
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory (assignment.csv, dendrogram.json).
        #[arg(long)]
        output: PathBuf,
        /// Reuse a dumped dissimilarity matrix instead of recomputing.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        theta: f64,
        #[arg(long, value_enum, default_value = "average")]
        linkage: LinkageArg,
        #[arg(long, value_enum, default_value = "weight")]
        constraints: ConstraintArg,
        #[command(flatten)]
        matcher: MatcherArgs,
        #[arg(long, default_value_t = 0)]
        parallelism: usize,
    },
    /// Score an assignment against ground truth.
    Evaluate {
        /// Assignment CSV (set_id,cluster_id).
        #[arg(long)]
        assignment: PathBuf,
        /// Truth CSV (set_id,identity).
        #[arg(long)]
        truth: PathBuf,
        /// Output metrics JSON path.
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the full pipeline: ingest, track, calibrate, cluster, evaluate.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Fixed threshold, or "calibrate" to estimate from the calibration
        /// dataset.
        #[arg(long, default_value = "calibrate")]
        theta: String,
        #[arg(long)]
        calibration_dataset: Option<PathBuf>,
        #[arg(long)]
        calibration_pairs: Option<PathBuf>,
        /// Allow calibration on the evaluation dataset or an untagged one.
        #[arg(long)]
        allow_same_dataset: bool,
        /// Truth CSV; embedded labels are used when omitted.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "average")]
        linkage: LinkageArg,
        #[arg(long, value_enum, default_value = "weight")]
        constraints: ConstraintArg,
        /// Also run the mean-descriptor Euclidean baseline.
        #[arg(long)]
        with_baseline: bool,
        /// Dump dissimilarity/constraint matrices next to the outputs.
        #[arg(long)]
        dump_matrices: bool,
        #[arg(long, default_value_t = 0)]
        parallelism: usize,
        #[command(flatten)]
        matcher: MatcherArgs,
        #[command(flatten)]
        tracking: TrackingArgs,
    },
    /// Re-emit a run report as JSON, CSV, or plot data.
    Report {
        /// report.json produced by `run`.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Formats to emit.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "csv")]
        formats: Vec<FormatArg>,
    },
}

fn linkage_of(arg: LinkageArg) -> Linkage {
    match arg {
        LinkageArg::Single => Linkage::Single,
        LinkageArg::Complete => Linkage::Complete,
        LinkageArg::Average => Linkage::Average,
    }
}

fn constraints_of(arg: ConstraintArg) -> ConstraintMode {
    match arg {
        ConstraintArg::Weight => ConstraintMode::Weight,
        ConstraintArg::HardMax => ConstraintMode::HardMax,
        ConstraintArg::Off => ConstraintMode::Off,
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { dataset } => {
            let ds = formats::read_manifest::<f64>(&dataset)?;
            let report = validate_dataset(&ds);
            if report.is_valid() {
                println!(
                    "dataset is valid: {} sequences, {} face-sets",
                    ds.sequences.len(),
                    ds.face_sets.len()
                );
            } else {
                print!("{report}");
                std::process::exit(1);
            }
        }
        Command::Simulate {
            output,
            identities,
            sets_per_identity,
            examples_min,
            examples_max,
            descriptor_dim,
            intra_sigma,
            inter_margin,
            placement_spread,
            cooccurrence_rate,
            confusable_pairs,
            confusable_margin,
            seed,
            mode,
            emit_detections,
            role,
        } => {
            let config = SynthConfig {
                num_identities: identities,
                sets_per_identity,
                examples_per_set: (examples_min, examples_max),
                descriptor_dim,
                intra_sigma,
                inter_margin,
                placement_spread,
                cooccurrence_rate,
                confusable_pairs,
                confusable_margin,
                seed,
                mode: match mode {
                    ModeArg::Descriptors => SynthMode::Descriptors,
                    ModeArg::Patches => SynthMode::Patches,
                },
                emit_detections,
            };
            let (mut ds, truth) = generate_dataset::<f64>(&config)?;
            ds.role = role.map(|r| match r {
                RoleArg::Training => DatasetRole::Training,
                RoleArg::Evaluation => DatasetRole::Evaluation,
            });
            std::fs::create_dir_all(&output)
                .with_context(|| format!("creating {}", output.display()))?;
            formats::write_manifest(&ds, &output.join("manifest.json"))?;
            formats::write_truth(&output.join("truth.csv"), &truth)?;
            formats::write_json_pretty(&output.join("synth_config.json"), &config)?;
            println!(
                "wrote {} face-sets across {} sequences to {}",
                ds.face_sets.len(),
                ds.sequences.len(),
                output.display()
            );
        }
        Command::Track {
            dataset,
            output,
            matcher,
            tracking,
        } => {
            let link = tracking.to_config(matcher.to_config());
            let mut ds = formats::read_manifest::<f64>(&dataset)?;
            if ds.detections.is_empty() {
                bail!("dataset has no detections section to track");
            }
            track_dataset(&mut ds, &link)?;
            let report = validate_dataset(&ds);
            if !report.is_valid() {
                bail!("tracked dataset failed validation:\n{report}");
            }
            formats::write_manifest(&ds, &output)?;
            println!(
                "tracked {} sequences into {} face-sets",
                ds.sequences.len(),
                ds.face_sets.len()
            );
        }
        Command::Dissim {
            dataset,
            output,
            matcher,
            parallelism,
        } => {
            let config = matcher.to_config();
            let ds = load_prepared_dataset(&dataset, &LinkConfig::default())?;
            let m = build_matcher_with_table(&config)?;
            let d = with_parallelism(parallelism, || build_dissimilarity_matrix(&ds, m.as_ref()))?;
            let c = build_constraint_matrix(&ds);
            std::fs::create_dir_all(&output)?;
            formats::write_matrix(
                &output.join("dissimilarity.txt"),
                d.order(),
                d.values(),
                Some(d.set_ids()),
            )?;
            let flags: Vec<f64> = (0..c.order() * c.order())
                .map(|k| if c.get(k / c.order(), k % c.order()) { 1.0 } else { 0.0 })
                .collect();
            formats::write_matrix(&output.join("constraints.txt"), c.order(), &flags, Some(c.set_ids()))?;
            println!("wrote {}x{} matrices to {}", d.order(), d.order(), output.display());
        }
        Command::Calibrate {
            dataset,
            output,
            pairs,
            allow_untagged,
            matcher,
        } => {
            let ds = formats::read_manifest::<f64>(&dataset)?;
            if ds.role != Some(DatasetRole::Training) && !allow_untagged {
                bail!("calibration dataset is not flagged role=training; pass --allow-untagged to override");
            }
            let report = validate_dataset(&ds);
            if !report.is_valid() {
                bail!("dataset failed validation:\n{report}");
            }
            let pair_list = match pairs {
                Some(path) => formats::read_calibration_pairs(&path)?,
                None => all_labeled_pairs(&ds),
            };
            let samples = resolve_pairs(&ds, &pair_list)?;
            let m = build_matcher_with_table(&matcher.to_config())?;
            let result = calibrate_threshold(&samples, m.as_ref())?;
            std::fs::create_dir_all(&output)?;
            formats::write_json_pretty(&output.join("calibration.json"), &result)?;
            formats::write_plotdata(
                &output.join("plotdata.csv"),
                &result.delta_s_values,
                &result.delta_d_values,
                result.theta,
                result.median_d,
            )?;
            println!(
                "theta = {:.6} from {} same-person pairs ({} different-person)",
                result.theta,
                result.delta_s_values.len(),
                result.delta_d_values.len()
            );
        }
        Command::Cluster {
            dataset,
            output,
            matrix,
            theta,
            linkage,
            constraints,
            matcher,
            parallelism,
        } => {
            let ds = load_prepared_dataset(&dataset, &LinkConfig::default())?;
            let d = match matrix {
                Some(path) => {
                    let (order, values) = formats::read_matrix(&path)?;
                    if order != ds.face_sets.len() {
                        bail!(
                            "matrix order {} does not match the dataset's {} face-sets",
                            order,
                            ds.face_sets.len()
                        );
                    }
                    let ids = ds.face_sets.iter().map(|f| f.set_id.clone()).collect();
                    DissimilarityMatrix::new(ids, values)?
                }
                None => {
                    let m = build_matcher_with_table(&matcher.to_config())?;
                    with_parallelism(parallelism, || build_dissimilarity_matrix(&ds, m.as_ref()))?
                }
            };
            let c = build_constraint_matrix(&ds);
            let constrained = apply_constraints(&d, &c, constraints_of(constraints))?;
            let (dendrogram, assignment) =
                agglomerative_cluster(&constrained, linkage_of(linkage), theta)?;
            std::fs::create_dir_all(&output)?;
            formats::write_assignment(&output.join("assignment.csv"), &assignment.labels)?;
            formats::write_json_pretty(&output.join("dendrogram.json"), &dendrogram)?;
            println!(
                "{} face-sets -> {} clusters at theta {}",
                ds.face_sets.len(),
                assignment.num_clusters,
                theta
            );
        }
        Command::Evaluate {
            assignment,
            truth,
            output,
        } => {
            let labels = formats::read_assignment(&assignment)?;
            let truth_map = formats::read_truth(&truth)?;
            if labels.len() != truth_map.len()
                || labels.keys().zip(truth_map.keys()).any(|(a, b)| a != b)
            {
                bail!("assignment and truth cover different face-sets");
            }
            let mut classes: Vec<&String> = truth_map.values().collect();
            classes.sort();
            classes.dedup();
            let truth_labels: Vec<usize> = truth_map
                .values()
                .map(|t| classes.binary_search(&t).expect("catalogued") as usize)
                .collect();
            let predicted: Vec<usize> = labels.values().copied().collect();
            let table = contingency_table(&truth_labels, &predicted)?;
            let nmi_v: f64 = nmi(&table, NmiNormalization::Arithmetic)?;
            let ari_v: f64 = ari(&table)?;
            let metrics = formats::MetricsJson::new(Some(nmi_v), Some(ari_v), None, labels.len());
            formats::write_metrics_json(&output, &metrics)?;
            println!("NMI = {nmi_v:.6} ({:.2}%), ARI = {ari_v:.6} ({:.2}%)", nmi_v * 100.0, ari_v * 100.0);
        }
        Command::Run {
            dataset,
            output,
            theta,
            calibration_dataset,
            calibration_pairs,
            allow_same_dataset,
            truth,
            linkage,
            constraints,
            with_baseline,
            dump_matrices,
            parallelism,
            matcher,
            tracking,
        } => {
            let theta_spec = if theta == "calibrate" {
                ThetaSpec::Calibrate
            } else {
                ThetaSpec::Fixed(
                    theta
                        .parse::<f64>()
                        .with_context(|| format!("--theta must be a number or `calibrate`, got `{theta}`"))?,
                )
            };
            let matcher_config = matcher.to_config();
            let config = PipelineConfig {
                dataset,
                output_dir: output,
                matcher: matcher_config.clone(),
                linkage: linkage_of(linkage),
                theta: theta_spec,
                constraint_mode: constraints_of(constraints),
                calibration_dataset,
                calibration_pairs,
                allow_same_dataset,
                truth,
                with_baseline,
                dump_matrices,
                parallelism,
                nmi_normalization: NmiNormalization::Arithmetic,
                tracklets: tracking.to_config(matcher_config),
            };
            let report = run_pipeline(&config)?;
            for m in &report.methods {
                match (m.nmi_pct, m.ari_pct) {
                    (Some(n), Some(a)) => println!(
                        "{:<18} theta={:.6} clusters={:<4} NMI={:6.2}% ARI={:6.2}%",
                        m.name, m.theta, m.num_clusters, n, a
                    ),
                    _ => println!(
                        "{:<18} theta={:.6} clusters={} (no ground truth)",
                        m.name, m.theta, m.num_clusters
                    ),
                }
            }
        }
        Command::Report {
            report,
            output,
            formats: wanted,
        } => {
            let text = std::fs::read_to_string(&report)
                .with_context(|| format!("reading {}", report.display()))?;
            let parsed: RunReport = serde_json::from_str(&text)?;
            let formats_wanted: Vec<ReportFormat> = wanted
                .iter()
                .map(|f| match f {
                    FormatArg::Json => ReportFormat::Json,
                    FormatArg::Csv => ReportFormat::Csv,
                    FormatArg::Plotdata => ReportFormat::Plotdata,
                })
                .collect();
            let files = emit_report(&parsed, &formats_wanted, &output)?;
            for f in files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn build_matcher_with_table(
    config: &MatcherConfig,
) -> anyhow::Result<Box<dyn egoface_core::matching::ExampleMatcher<f64>>> {
    let table = match (&config.kind, &config.score_table_path) {
        (MatcherKind::Precomputed, Some(path)) => {
            let file = std::fs::File::open(path)
                .with_context(|| format!("opening score table {}", path.display()))?;
            Some(ScoreTable::load(std::io::BufReader::new(file))?)
        }
        (MatcherKind::Precomputed, None) => bail!("--matcher precomputed requires --score-table"),
        _ => None,
    };
    Ok(build_matcher::<f64>(config, table)?)
}
