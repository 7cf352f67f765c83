use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use emgkit_core::dataset::{self, DATASET_CITATION};
use emgkit_core::evaluation::{self, EvaluationReport};
use emgkit_core::features::build_feature_matrix;
use emgkit_core::preprocess::{segment_stats, windows_from_recordings, SegmentStats};
use emgkit_core::selection::{project, rank_features, select_top_k, FeatureSubset, SelectionProvenance};
use emgkit_core::synth::{generate_synthetic, SynthParams};
use emgkit_core::{
    evaluate_pipeline, fit_model, FeatureMatrix, FeatureMode, LabelPolicy, ModelDump, Recording, Scalar, VERSION,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{
    EvaluateArgs, ExtractArgs, InspectArgs, Precision, ReportArgs, SegmentArgs, SelectArgs, SynthArgs, TrainArgs,
    UsageError,
};

/// Stamped into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    fn of(cfg: &RunConfig) -> Self {
        Provenance {
            tool_version: VERSION.to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed(),
        }
    }

    fn csv_comment(&self) -> String {
        format!(
            "# emgkit {} config_hash={} seed={}\n",
            self.tool_version, self.config_hash, self.seed
        )
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn policy(unmark: bool) -> LabelPolicy {
    if unmark {
        LabelPolicy::UnmarkUnknown
    } else {
        LabelPolicy::Strict
    }
}

fn missing_dataset() -> anyhow::Error {
    UsageError(format!(
        "no dataset given: pass --data DIR or --features CSV.\n\
         The recordings are not bundled; download them from the UCI repository:\n  {DATASET_CITATION}"
    ))
    .into()
}

fn load_recordings(root: &Path, unmark: bool) -> Result<Vec<Recording>> {
    if !root.is_dir() {
        anyhow::bail!(
            "dataset directory {} not found.\nDownload the recordings from:\n  {DATASET_CITATION}",
            root.display()
        );
    }
    let recs = dataset::load_dataset_with(root, policy(unmark))
        .with_context(|| format!("loading dataset {}", root.display()))?;
    log::info!("loaded {} recordings from {}", recs.len(), root.display());
    Ok(recs)
}

fn load_matrix<F: Scalar>(cfg: &RunConfig) -> Result<FeatureMatrix<F>> {
    if let Some(path) = &cfg.data.features {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        return FeatureMatrix::read_csv(std::io::BufReader::new(file))
            .with_context(|| format!("reading feature matrix {}", path.display()));
    }
    let root = cfg.data.root.as_deref().ok_or_else(missing_dataset)?;
    let recs = load_recordings(root, cfg.data.unmark_unknown_labels)?;
    let windows = windows_from_recordings(&recs, cfg.windowing.window_len, cfg.windowing.stride)?;
    log::info!("{} windows", windows.len());
    Ok(build_feature_matrix(&windows, &cfg.feature_config())?)
}

/// `"4"` -> `"Wrist flexion (4)"`.
fn label_display(code: &str) -> String {
    match code.parse::<usize>() {
        Ok(c) => format!("{} ({c})", dataset::class_name(c)),
        Err(_) => code.to_string(),
    }
}

macro_rules! with_precision {
    ($p:expr, $f:ident ( $($arg:expr),* )) => {
        match $p {
            Precision::F32 => $f::<f32>($($arg),*),
            Precision::F64 => $f::<f64>($($arg),*),
        }
    };
}

pub fn inspect(a: InspectArgs) -> Result<()> {
    let root = a.data.as_deref().ok_or_else(missing_dataset)?;
    let recs = load_recordings(root, a.unmark_unknown_labels)?;
    let summary = dataset::summarize(&recs);
    let digest = dataset::dataset_digest(root)?;
    if a.json {
        #[derive(Serialize)]
        struct Out<'a> {
            tool_version: &'a str,
            root: &'a Path,
            sha256: &'a str,
            summary: &'a dataset::DatasetSummary,
            citation: &'a str,
        }
        let out = Out {
            tool_version: VERSION,
            root,
            sha256: &digest,
            summary: &summary,
            citation: DATASET_CITATION,
        };
        return write_output(None, &json_bytes(&out)?);
    }
    let mut s = String::new();
    s += &format!("dataset:    {}\n", root.display());
    s += &format!("recordings: {}\n", summary.recordings);
    s += &format!("subjects:   {}\n", summary.subjects);
    s += "samples per gesture:\n";
    for (code, n) in &summary.samples_per_label {
        s += &format!("  {:<34} {n}\n", label_display(code));
    }
    s += &format!("sha256:     {digest}\n");
    s += &format!("citation:   {DATASET_CITATION}\n");
    write_output(None, s.as_bytes())
}

pub fn segment(a: SegmentArgs) -> Result<()> {
    let cfg = a.pipeline.resolve()?;
    let root = cfg.data.root.as_deref().ok_or_else(missing_dataset)?;
    let recs = load_recordings(root, cfg.data.unmark_unknown_labels)?;
    let stats = segment_stats(&recs, cfg.windowing.window_len, cfg.windowing.stride);
    if a.stats {
        #[derive(Serialize)]
        struct Out {
            provenance: Provenance,
            stats: SegmentStats,
        }
        let out = Out { provenance: Provenance::of(&cfg), stats };
        return write_output(a.out.as_deref(), &json_bytes(&out)?);
    }
    let mut s = format!(
        "window_len={} stride={}\n{:<30} {:>8} {:>8}\n",
        stats.window_len, stats.stride, "gesture", "segments", "windows"
    );
    let (mut segs, mut wins) = (0, 0);
    for (code, l) in &stats.per_label {
        s += &format!("{:<30} {:>8} {:>8}\n", label_display(code), l.segments, l.windows);
        segs += l.segments;
        wins += l.windows;
    }
    s += &format!("{:<30} {segs:>8} {wins:>8}\n", "total");
    write_output(a.out.as_deref(), s.as_bytes())
}

fn extract_as<F: Scalar>(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let m = load_matrix::<F>(cfg)?;
    let mut bytes = Provenance::of(cfg).csv_comment().into_bytes();
    m.write_csv(&mut bytes)?;
    write_output(out, &bytes)
}

pub fn extract(a: ExtractArgs) -> Result<()> {
    let cfg = a.pipeline.resolve()?;
    if cfg.data.root.is_none() {
        return Err(missing_dataset());
    }
    with_precision!(a.pipeline.precision, extract_as(&cfg, a.out.as_deref()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFeature {
    pub name: String,
    pub score: f64,
}

/// Written by `select`, read by `train --selection`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionArtifact {
    pub provenance: Provenance,
    pub k: usize,
    pub selected: Vec<String>,
    /// Every feature, highest importance first.
    pub ranking: Vec<ScoredFeature>,
    pub empty: bool,
}

fn select_as<F: Scalar>(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let m = load_matrix::<F>(cfg)?;
    m.check_trainable()?;
    let ranking = rank_features(&m, &cfg.selection_trees(), cfg.seed())?;
    let subset = select_top_k(&ranking, cfg.evaluation.top_k)?;
    let art = SelectionArtifact {
        provenance: Provenance::of(cfg),
        k: subset.k,
        selected: subset.names,
        ranking: ranking
            .ordering
            .iter()
            .map(|n| ScoredFeature {
                name: n.clone(),
                score: ranking.score(n).unwrap_or(0.0),
            })
            .collect(),
        empty: ranking.empty,
    };
    write_output(out, &json_bytes(&art)?)
}

pub fn select(a: SelectArgs) -> Result<()> {
    let cfg = a.pipeline.resolve()?;
    with_precision!(a.pipeline.precision, select_as(&cfg, a.out.as_deref()))
}

fn train_as<F: Scalar>(cfg: &RunConfig, selection: Option<&Path>, dump: Option<&Path>) -> Result<()> {
    let mut m = load_matrix::<F>(cfg)?;
    m.check_trainable()?;
    let subset = match selection {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let art: SelectionArtifact =
                serde_json::from_str(&text).with_context(|| format!("parsing selection {}", p.display()))?;
            Some(FeatureSubset { k: art.k, names: art.selected, provenance: None })
        }
        None => match cfg.eval_config().feature_mode {
            FeatureMode::Selected { k } => {
                let ranking = rank_features(&m, &cfg.selection_trees(), cfg.seed())?;
                let mut s = select_top_k(&ranking, k)?;
                s.provenance = Some(SelectionProvenance {
                    seed: cfg.seed(),
                    hyperparams: cfg.selection_trees(),
                    fold: None,
                });
                Some(s)
            }
            FeatureMode::All => None,
        },
    };
    if let Some(s) = &subset {
        m = project(&m, s)?;
    }
    let spec = cfg.model_spec();
    let model = fit_model(&spec, &m, cfg.seed())?;
    let pred = model.predict(&m)?;
    let correct = pred.iter().zip(m.labels()).filter(|(a, b)| a == b).count();
    let mut s = format!(
        "model: {}\nrows: {}\nfeatures: {}\n",
        spec.kind.display_name(),
        m.n_rows(),
        m.n_cols()
    );
    if subset.is_some() {
        s += &format!("selected: {}\n", m.names().join(", "));
    }
    s += &format!("training accuracy: {:.4}\n", correct as f64 / m.n_rows() as f64);
    write_output(None, s.as_bytes())?;
    if let Some(p) = dump {
        let d = ModelDump::new(spec.kind, model, cfg.seed(), cfg.hash());
        let mut text = d.to_json()?;
        text.push('\n');
        write_output(Some(p), text.as_bytes())?;
    }
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let cfg = a.pipeline.resolve()?;
    with_precision!(
        a.pipeline.precision,
        train_as(&cfg, a.selection.as_deref(), a.dump.as_deref())
    )
}

fn evaluate_as<F: Scalar>(cfg: &RunConfig) -> Result<EvaluationReport> {
    let m = load_matrix::<F>(cfg)?;
    let mut report = evaluate_pipeline(&m, &cfg.eval_config())?;
    report.config_hash = cfg.hash();
    Ok(report)
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let cfg = a.pipeline.resolve()?;
    let report = with_precision!(a.pipeline.precision, evaluate_as(&cfg))?;
    let out = a.out.as_deref().or(cfg.output.report.as_deref());
    let mut json = report.to_json()?;
    json.push('\n');
    write_output(out, json.as_bytes())?;
    if let Some(p) = a.confusion_csv.as_deref().or(cfg.output.confusion_csv.as_deref()) {
        let mut bytes = Provenance::of(&cfg).csv_comment().into_bytes();
        report.confusion.write_csv(&mut bytes)?;
        write_output(Some(p), &bytes)?;
    }
    if let Some(p) = a.markdown.as_deref().or(cfg.output.markdown.as_deref()) {
        write_output(Some(p), evaluation::markdown_report(&[report]).as_bytes())?;
    }
    Ok(())
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let params = SynthParams {
        classes: a.classes,
        per_class: a.per_class,
        separation: a.separation,
        n_features: a.n_features,
    };
    let m = generate_synthetic::<f64>(&params, a.seed).map_err(|e| UsageError(e.to_string()))?;
    let hash_input = serde_json::to_vec(&(&params, a.seed))?;
    let prov = Provenance {
        tool_version: VERSION.to_string(),
        config_hash: emgkit_core::sha256_hex(&hash_input),
        seed: a.seed,
    };
    let mut bytes = prov.csv_comment().into_bytes();
    m.write_csv(&mut bytes)?;
    write_output(a.out.as_deref(), &bytes)
}

pub fn report(a: ReportArgs) -> Result<()> {
    let reports = a
        .reports
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            EvaluationReport::from_json(&text).with_context(|| format!("parsing report {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    write_output(a.out.as_deref(), evaluation::markdown_report(&reports).as_bytes())
}
