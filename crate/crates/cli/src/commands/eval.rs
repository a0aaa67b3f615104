use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use eco_core::adaptation::{read_ecoa_file, to_columns, AdaptationModel};
use eco_core::descriptor::{scene_groups, SceneDescriptor, WeightScheme};
use eco_core::evaluation::{
    per_category_accuracy, recall_curve, train_classifier, write_accuracy_csv, write_recall_csv, ClassifierConfig,
    LabeledVector, Metric,
};
use eco_core::features::FeatureSidecar;
use eco_core::strips::StripRecord;
use serde::{Deserialize, Serialize};

use super::adapt::load_rows;
use super::{Command, Report};
use crate::config::required;
use crate::error::{CliError, CliResult};

#[derive(Subcommand, Debug)]
pub enum EvalCommand {
    /// Nearest-neighbor recall@k of query features against a database.
    Recall(RecallArgs),
    /// Softmax classifier trained on one feature set, scored on another.
    Classify(ClassifyArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct RecallArgs {
    /// Query (test-store) features.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query: Option<PathBuf>,
    /// Database (train-store) features.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub db: Option<PathBuf>,
    /// Adapter applied to the queries before matching.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adapter: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
    #[arg(long, value_parser = ["euclidean", "cosine"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    /// Match single strips, or scene descriptors built per (frame, box).
    #[arg(long, value_parser = ["strip", "scene"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// Strip weighting inside a scene descriptor.
    #[arg(long, value_parser = ["uniform", "proximity"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecallSettings {
    pub query: Option<PathBuf>,
    pub db: Option<PathBuf>,
    pub adapter: Option<PathBuf>,
    pub kmax: usize,
    pub metric: String,
    pub mode: String,
    pub weights: String,
    pub out: Option<PathBuf>,
}

impl Default for RecallSettings {
    fn default() -> Self {
        Self {
            query: None,
            db: None,
            adapter: None,
            kmax: 10,
            metric: "euclidean".into(),
            mode: "strip".into(),
            weights: "uniform".into(),
            out: None,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ClassifyArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    /// Adapter applied to the test features.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adapter: Option<PathBuf>,
    /// L2 penalty on the classifier parameters.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySettings {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub adapter: Option<PathBuf>,
    pub l2: f64,
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        let c = ClassifierConfig::default();
        Self {
            train: None,
            test: None,
            adapter: None,
            l2: c.l2,
            steps: c.steps,
            lr: c.learning_rate,
            seed: c.seed,
            out: None,
        }
    }
}

/// Features of one file joined with the strip records of its sidecar.
struct Labeled {
    ids: Vec<u64>,
    rows: Vec<Vec<f64>>,
    strips: Vec<StripRecord>,
}

fn load_labeled(path: &Path) -> CliResult<Labeled> {
    let (ids, rows) = load_rows(path)?;
    let sidecar_path = FeatureSidecar::path_for(path);
    let sidecar = FeatureSidecar::load(&sidecar_path).map_err(|e| CliError::from(e).context(sidecar_path.display()))?;
    let by_id: HashMap<u64, &StripRecord> = sidecar.strips.iter().map(|s| (s.id, s)).collect();
    let strips = ids
        .iter()
        .map(|id| {
            by_id
                .get(id)
                .map(|s| (*s).clone())
                .ok_or_else(|| CliError::input(format!("{}: feature {id} has no strip record", path.display())))
        })
        .collect::<CliResult<_>>()?;
    Ok(Labeled { ids, rows, strips })
}

fn load_adapter(path: &Option<PathBuf>) -> CliResult<Option<AdaptationModel>> {
    path.as_deref()
        .map(|p| read_ecoa_file(p).map_err(|e| CliError::from(e).context(p.display())))
        .transpose()
}

fn adapt_rows(rows: Vec<Vec<f64>>, adapter: Option<&AdaptationModel>) -> CliResult<Vec<Vec<f64>>> {
    let Some(model) = adapter else {
        return Ok(rows);
    };
    if rows.is_empty() {
        return Ok(rows);
    }
    let out = model.adapt_batch(&to_columns(&rows)?)?;
    Ok(out.column_iter().map(|c| c.iter().copied().collect()).collect())
}

fn strip_vectors(set: Labeled, adapter: Option<&AdaptationModel>) -> CliResult<Vec<LabeledVector>> {
    let rows = adapt_rows(set.rows, adapter)?;
    Ok(set
        .ids
        .into_iter()
        .zip(rows)
        .zip(set.strips)
        .map(|((id, values), s)| LabeledVector {
            id,
            values,
            category: s.category,
        })
        .collect())
}

fn scene_vectors(
    set: &Labeled,
    scheme: WeightScheme,
    adapter: Option<&AdaptationModel>,
) -> CliResult<Vec<LabeledVector>> {
    scene_groups(&set.strips)
        .into_iter()
        .enumerate()
        .map(|(i, g)| {
            let ids: Vec<u64> = g.members.iter().map(|&m| set.ids[m]).collect();
            let feats: Vec<&[f64]> = g.members.iter().map(|&m| set.rows[m].as_slice()).collect();
            let distances: Vec<f64> = g.members.iter().map(|&m| set.strips[m].distance).collect();
            let d = SceneDescriptor::build(&ids, &feats, scheme, Some(&distances), adapter)?;
            Ok(LabeledVector {
                id: i as u64,
                values: d.values,
                category: g.category,
            })
        })
        .collect()
}

fn csv_out(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

impl Command for RecallSettings {
    const NAME: &'static str = "eval-recall";

    fn run(&self) -> CliResult<Report> {
        let query_path = required(&self.query, "query")?;
        let db_path = required(&self.db, "db")?;
        let out = required(&self.out, "out")?;
        let metric: Metric = self.metric.parse()?;
        let scheme: WeightScheme = self.weights.parse()?;
        let adapter = load_adapter(&self.adapter)?;
        let query = load_labeled(query_path)?;
        let db = load_labeled(db_path)?;
        let (queries, corpus) = match self.mode.as_str() {
            "strip" => (strip_vectors(query, adapter.as_ref())?, strip_vectors(db, None)?),
            "scene" => (
                scene_vectors(&query, scheme, adapter.as_ref())?,
                scene_vectors(&db, scheme, None)?,
            ),
            other => return Err(CliError::usage(format!("unknown mode '{other}'"))),
        };
        let curve = recall_curve(&queries, &corpus, self.kmax, metric)?;
        write_recall_csv(csv_out(out)?, &curve)?;

        let mut report = Report::for_file(out);
        report.inputs = vec![
            query_path.to_path_buf(),
            FeatureSidecar::path_for(query_path),
            db_path.to_path_buf(),
            FeatureSidecar::path_for(db_path),
        ];
        report.inputs.extend(self.adapter.iter().cloned());
        report.outputs = vec![out.to_path_buf()];
        println!(
            "{} queries, {} items: recall@1 {:.4}, recall@{} {:.4} -> {}",
            queries.len(),
            corpus.len(),
            curve.at(1),
            self.kmax,
            curve.at(self.kmax),
            out.display()
        );
        Ok(report)
    }
}

impl Command for ClassifySettings {
    const NAME: &'static str = "eval-classify";

    fn run(&self) -> CliResult<Report> {
        let train_path = required(&self.train, "train")?;
        let test_path = required(&self.test, "test")?;
        let out = required(&self.out, "out")?;
        let adapter = load_adapter(&self.adapter)?;
        let train = load_labeled(train_path)?;
        let test = load_labeled(test_path)?;
        let train_labels: Vec<String> = train.strips.iter().map(|s| s.category.clone()).collect();
        let test_labels: Vec<String> = test.strips.iter().map(|s| s.category.clone()).collect();
        let config = ClassifierConfig {
            l2: self.l2,
            steps: self.steps,
            learning_rate: self.lr,
            seed: self.seed,
        };
        let classifier = train_classifier(&train.rows, &train_labels, &config)?;
        let test_rows = adapt_rows(test.rows, adapter.as_ref())?;
        let mut accuracy: BTreeMap<String, f64> = per_category_accuracy(&classifier, &test_rows, &test_labels)?;
        let correct = test_rows
            .iter()
            .zip(&test_labels)
            .filter(|(x, l)| classifier.predict(x) == l.as_str())
            .count();
        let overall = correct as f64 / test_rows.len().max(1) as f64;
        accuracy.insert("all".into(), overall);
        write_accuracy_csv(csv_out(out)?, &accuracy)?;

        let mut report = Report::for_file(out);
        report.seed = Some(self.seed);
        report.inputs = vec![
            train_path.to_path_buf(),
            FeatureSidecar::path_for(train_path),
            test_path.to_path_buf(),
            FeatureSidecar::path_for(test_path),
        ];
        report.inputs.extend(self.adapter.iter().cloned());
        report.outputs = vec![out.to_path_buf()];
        println!(
            "accuracy {overall:.4} on {} test vectors -> {}",
            test_rows.len(),
            out.display()
        );
        Ok(report)
    }
}
