use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::Command;

use chrono::{DateTime, Utc};
use pageclass::dataset::{
    cap_per_category, label_counts, parse_annotations, parse_page_ref_lenient, sort_annotated_files,
    stratified_split, CategoryTaxonomy, DatasetError, Labeled, PageResolver, SortMode,
};
use pageclass::features::{extract_features, FeatureVector};
use pageclass::forest::{
    load_model, save_model, train_forest, train_hierarchical, ForestError, HierarchicalModel, RandomForestModel,
};
use pageclass::pixelio::{load_image, PixelError};
use pageclass::report::{
    accuracy_summary, confusion_matrix, matrix_axis, output_name, raw_csv, render_confusion_svg, topn_csv,
    OutputKind, PredictionRow, Ranked, ReportError,
};
use pageclass::synth;
use rayon::prelude::*;
use thiserror::Error;
use walkdir::WalkDir;

use crate::config::AppConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FATAL: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("no images found under {0}")]
    NoImagesFound(PathBuf),
    #[error("no usable samples in {0}")]
    EmptyDataset(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Pixel(#[from] PixelError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_FATAL,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

/// A flat forest or a coarse/fine pair.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Flat(RandomForestModel),
    Hierarchical(HierarchicalModel),
}

impl Classifier {
    /// Directories hold hierarchical models, files flat ones.
    pub fn load(path: &Path) -> Result<Self, ForestError> {
        if path.is_dir() {
            HierarchicalModel::load(path).map(Classifier::Hierarchical)
        } else {
            load_model(path).map(Classifier::Flat)
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        match self {
            Classifier::Flat(m) => save_model(m, path)?,
            Classifier::Hierarchical(h) => h.save(path)?,
        }
        Ok(())
    }

    pub fn feature_count(&self) -> usize {
        match self {
            Classifier::Flat(m) => m.feature_count(),
            Classifier::Hierarchical(h) => h.coarse.feature_count(),
        }
    }

    /// Leaf categories the classifier can output.
    pub fn categories(&self) -> Vec<String> {
        match self {
            Classifier::Flat(m) => m.categories().to_vec(),
            Classifier::Hierarchical(h) => h.fine.values().flat_map(|m| m.categories().iter().cloned()).collect(),
        }
    }

    /// Identifier used in output names, e.g. `rfc283`.
    pub fn id(&self) -> String {
        match self {
            Classifier::Flat(_) => format!("rfc{}", self.feature_count()),
            Classifier::Hierarchical(_) => format!("rfc{}h", self.feature_count()),
        }
    }

    pub fn predict_ranked(&self, fv: &[f64]) -> Result<Ranked, ForestError> {
        match self {
            Classifier::Flat(m) => m.predict_ranked(fv),
            Classifier::Hierarchical(h) => h.predict_ranked(fv),
        }
    }
}

/// Per-run settings shared by the commands.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: AppConfig,
    pub recursive: bool,
    pub raw: bool,
    pub normalize: bool,
    pub timestamp: DateTime<Utc>,
}

impl Context {
    pub fn new(config: AppConfig) -> Self {
        Self {
            config,
            recursive: false,
            raw: false,
            normalize: false,
            timestamp: Utc::now(),
        }
    }

    fn model_path(&self) -> Result<PathBuf, CliError> {
        self.config
            .model_path
            .clone()
            .ok_or_else(|| CliError::Usage("no model given: use -m or [MODEL] model_path".into()))
    }

    fn effective_topn(&self, k: usize, out: &mut dyn Write) -> usize {
        let n = self.config.top_n.min(k);
        if n < self.config.top_n {
            let _ = writeln!(out, "top-N lowered to {n}: the model knows {k} categories");
        }
        n
    }
}

fn page_features(path: &Path) -> Result<FeatureVector, PixelError> {
    load_image(path).map(|img| extract_features(&img))
}

fn is_pdf(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pdf"))
}

/// Image (and PDF) files under `dir`, sorted by path.
pub fn list_images(dir: &Path, recursive: bool) -> Vec<PathBuf> {
    let walker = WalkDir::new(dir).max_depth(if recursive { usize::MAX } else { 1 });
    let mut paths: Vec<PathBuf> = walker
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| pageclass::dataset::pageref::is_image_path(p) || is_pdf(p))
        .collect();
    paths.sort();
    paths
}

/// Rasterizes a PDF with an external `pdftoppm` into `workdir`, one PNG per
/// page named `<stem>-<page>.png`.
fn rasterize_pdf(pdf: &Path, workdir: &Path) -> Result<Vec<PathBuf>, String> {
    let stem = pdf.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let target = workdir.join(&stem);
    fs::create_dir_all(&target).map_err(|e| e.to_string())?;
    let status = Command::new("pdftoppm")
        .arg("-png")
        .arg(pdf)
        .arg(target.join(&stem))
        .status()
        .map_err(|e| format!("cannot run pdftoppm: {e}"))?;
    if !status.success() {
        return Err(format!("pdftoppm exited with {status}"));
    }
    Ok(list_images(&target, false))
}

/// Replaces PDFs by their rasterized pages; conversion failures are returned
/// alongside.
fn expand_pdfs(paths: Vec<PathBuf>, workdir: &Path) -> (Vec<PathBuf>, Vec<(PathBuf, String)>) {
    let mut images = Vec::new();
    let mut failed = Vec::new();
    for p in paths {
        if !is_pdf(&p) {
            images.push(p);
            continue;
        }
        match rasterize_pdf(&p, workdir) {
            Ok(pages) => images.extend(pages),
            Err(e) => failed.push((p, e)),
        }
    }
    (images, failed)
}

fn classify_path(classifier: &Classifier, path: &Path) -> Result<PredictionRow, CliError> {
    let fv = page_features(path)?;
    let ranked = classifier.predict_ranked(fv.as_slice())?;
    let (page_ref, warning) = parse_page_ref_lenient(path);
    if let Some(w) = warning {
        log::warn!("{w}");
    }
    Ok(PredictionRow {
        file: page_ref.stem,
        page: page_ref.page,
        ranked,
    })
}

/// Prints the top-N predictions for one image (or each page of a PDF).
pub fn classify_file(
    ctx: &Context,
    classifier: &Classifier,
    path: &Path,
    out: &mut dyn Write,
) -> Result<Vec<PredictionRow>, CliError> {
    let n = ctx.effective_topn(classifier.categories().len(), out);
    let pages = if is_pdf(path) {
        let work = tempfile::tempdir().map_err(io_err(path))?;
        let pages = rasterize_pdf(path, work.path()).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: io::Error::other(e),
        })?;
        pages
            .iter()
            .map(|p| classify_path(classifier, p))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        vec![classify_path(classifier, path)?]
    };
    for row in &pages {
        if pages.len() > 1 {
            let _ = writeln!(out, "{} page {}", row.file, row.page);
        }
        for (i, (label, score)) in row.ranked.iter().take(n).enumerate() {
            let _ = writeln!(out, "{}. {label} {score:.4}", i + 1);
        }
    }
    Ok(pages)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectoryOutcome {
    pub rows: Vec<PredictionRow>,
    pub skipped: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl DirectoryOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.skipped.is_empty() {
            EXIT_OK
        } else {
            EXIT_PARTIAL
        }
    }
}

/// Batched inference over a directory. Files that fail to decode are logged
/// and skipped; the CSVs hold every page that succeeded.
pub fn classify_directory(
    ctx: &Context,
    classifier: &Classifier,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<DirectoryOutcome, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Io {
            path: dir.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotFound, "not a directory"),
        });
    }
    let work = tempfile::tempdir().map_err(io_err(dir))?;
    let (images, failed_pdfs) = expand_pdfs(list_images(dir, ctx.recursive), work.path());
    let mut skipped: Vec<PathBuf> = Vec::new();
    for (p, e) in failed_pdfs {
        log::warn!("skipping {}: {e}", p.display());
        skipped.push(p);
    }
    if images.is_empty() {
        return Err(CliError::NoImagesFound(dir.to_path_buf()));
    }

    let n = ctx.effective_topn(classifier.categories().len(), out);
    let batch_size = ctx.config.batch_size.max(1);
    let total = images.len().div_ceil(batch_size);
    let mut rows = Vec::with_capacity(images.len());
    for (i, batch) in images.chunks(batch_size).enumerate() {
        let results: Vec<Result<PredictionRow, CliError>> =
            batch.par_iter().map(|p| classify_path(classifier, p)).collect();
        for (path, r) in batch.iter().zip(results) {
            match r {
                Ok(row) => rows.push(row),
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    skipped.push(path.clone());
                }
            }
        }
        let _ = writeln!(out, "Processed batch {}/{total}", i + 1);
    }
    if rows.is_empty() {
        return Err(CliError::NoImagesFound(dir.to_path_buf()));
    }

    let id = classifier.id();
    let mut outputs = Vec::new();
    let topn_path = ctx
        .config
        .results_dir
        .join(output_name(OutputKind::TopN, &format!("{id}-top{n}"), ctx.timestamp));
    write_file(&topn_path, &topn_csv(&rows, n)?)?;
    outputs.push(topn_path);
    if ctx.raw {
        let path = ctx.config.results_dir.join(output_name(OutputKind::Raw, &id, ctx.timestamp));
        write_file(&path, &raw_csv(&rows, &raw_columns(classifier))?)?;
        outputs.push(path);
    }
    for p in &outputs {
        let _ = writeln!(out, "wrote {}", p.display());
    }
    Ok(DirectoryOutcome { rows, skipped, outputs })
}

/// Taxonomy labels in declaration order, then any model categories outside it.
fn raw_columns(classifier: &Classifier) -> Vec<String> {
    let tax = CategoryTaxonomy::standard();
    let mut cols = tax.label_list();
    let mut extra: Vec<String> = classifier
        .categories()
        .into_iter()
        .filter(|c| !tax.contains(c))
        .collect();
    extra.sort();
    cols.extend(extra);
    cols
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPage {
    pub path: PathBuf,
    pub label: String,
}

impl Labeled for LabeledPage {
    fn label(&self) -> &str {
        &self.label
    }
}

/// Pages of a per-category tree: `root/<CATEGORY>/**/<image>`.
pub fn collect_category_tree(root: &Path, taxonomy: &CategoryTaxonomy) -> Result<Vec<LabeledPage>, CliError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(io_err(root))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut pages = Vec::new();
    for dir in dirs {
        let label = dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        if !taxonomy.contains(&label) {
            return Err(DatasetError::UnknownCategory { row: None, label }.into());
        }
        pages.extend(
            list_images(&dir, true)
                .into_iter()
                .filter(|p| !is_pdf(p))
                .map(|path| LabeledPage {
                    path,
                    label: label.clone(),
                }),
        );
    }
    Ok(pages)
}

/// Pages named by an annotation CSV, resolved under `image_root`. Records
/// without an image are logged and counted.
fn collect_annotated(
    csv_path: &Path,
    image_root: &Path,
    taxonomy: &CategoryTaxonomy,
) -> Result<(Vec<LabeledPage>, usize), CliError> {
    let text = fs::read_to_string(csv_path).map_err(io_err(csv_path))?;
    let records = parse_annotations(&text, taxonomy)?;
    let mut resolver = PageResolver::new(image_root);
    let mut pages = Vec::new();
    let mut missing = 0;
    for rec in records {
        match resolver.resolve(&rec.file, rec.page) {
            Some(found) => pages.push(LabeledPage {
                path: found.path,
                label: rec.category,
            }),
            None => {
                log::warn!("no image for {} page {}", rec.file, rec.page);
                missing += 1;
            }
        }
    }
    Ok((pages, missing))
}

/// Features for every page in parallel, input order kept. Failures are logged
/// and returned separately.
fn featurize(pages: &[LabeledPage]) -> (Vec<(FeatureVector, String)>, Vec<PathBuf>) {
    let results: Vec<Result<FeatureVector, PixelError>> = pages.par_iter().map(|p| page_features(&p.path)).collect();
    let mut ok = Vec::with_capacity(pages.len());
    let mut failed = Vec::new();
    for (page, r) in pages.iter().zip(results) {
        match r {
            Ok(fv) => ok.push((fv, page.label.clone())),
            Err(e) => {
                log::warn!("skipping {}: {e}", page.path.display());
                failed.push(page.path.clone());
            }
        }
    }
    (ok, failed)
}

fn format_counts(counts: &BTreeMap<String, usize>) -> String {
    let parts: Vec<String> = counts.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    format!("{{{}}}", parts.join(", "))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub samples: usize,
    /// Entry `i` is top-(i+1) accuracy.
    pub topn: Vec<f64>,
    pub outputs: Vec<PathBuf>,
}

/// Accuracy summary plus top-1 and top-N confusion matrices (CSV and SVG).
fn evaluate(
    ctx: &Context,
    classifier: &Classifier,
    samples: &[(FeatureVector, String)],
    out: &mut dyn Write,
) -> Result<EvalOutcome, CliError> {
    let truths: Vec<&str> = samples.iter().map(|s| s.1.as_str()).collect();
    let preds: Vec<Ranked> = samples
        .par_iter()
        .map(|(fv, _)| classifier.predict_ranked(fv.as_slice()))
        .collect::<Result<_, _>>()?;
    let n = ctx.effective_topn(classifier.categories().len(), out);
    let taxonomy = CategoryTaxonomy::standard();
    let axis = matrix_axis(&taxonomy, &truths, &preds);
    let id = classifier.id();
    let mut outputs = Vec::new();

    let mut levels = vec![1];
    if n > 1 {
        levels.push(n);
    }
    for level in levels {
        let matrix = confusion_matrix(&truths, &preds, level, &axis)?;
        let tag = format!("{id}-top{level}");
        let csv_path = ctx.config.viz_dir.join(output_name(OutputKind::ConfusionCsv, &tag, ctx.timestamp));
        write_file(&csv_path, &matrix.to_csv()?)?;
        let title = format!(
            "{id} top-{level}{}",
            if ctx.normalize { " (row-normalized)" } else { "" }
        );
        let svg_path = ctx.config.viz_dir.join(output_name(OutputKind::ConfusionSvg, &tag, ctx.timestamp));
        write_file(&svg_path, render_confusion_svg(&matrix, &title, ctx.normalize).as_bytes())?;
        outputs.extend([csv_path, svg_path]);
    }

    let summary = accuracy_summary(&truths, &preds, n, &axis)?;
    let text = summary.render(&id);
    let path = ctx.config.results_dir.join(output_name(OutputKind::Summary, &id, ctx.timestamp));
    write_file(&path, text.as_bytes())?;
    outputs.push(path);
    let _ = write!(out, "{text}");
    for p in &outputs {
        let _ = writeln!(out, "wrote {}", p.display());
    }
    Ok(EvalOutcome {
        samples: samples.len(),
        topn: summary.topn,
        outputs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model_path: PathBuf,
    pub counts_after_cap: BTreeMap<String, usize>,
    pub eval: Option<EvalOutcome>,
    pub skipped: usize,
}

impl TrainOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.skipped == 0 {
            EXIT_OK
        } else {
            EXIT_PARTIAL
        }
    }
}

/// cap → split → features → forest → save → evaluate on the held-out split.
pub fn train_command(ctx: &Context, out: &mut dyn Write) -> Result<TrainOutcome, CliError> {
    let cfg = &ctx.config;
    let dataset = cfg
        .dataset_path
        .clone()
        .ok_or_else(|| CliError::Usage("training needs [TRAIN] dataset_path".into()))?;
    let taxonomy = CategoryTaxonomy::standard();
    let (pages, missing) = if dataset.is_file() {
        let root = cfg
            .image_root
            .clone()
            .or_else(|| cfg.input_dir.clone())
            .or_else(|| dataset.parent().map(Path::to_path_buf))
            .unwrap_or_default();
        collect_annotated(&dataset, &root, &taxonomy)?
    } else {
        (collect_category_tree(&dataset, &taxonomy)?, 0)
    };
    if pages.is_empty() {
        return Err(CliError::EmptyDataset(dataset));
    }
    let _ = writeln!(out, "category counts: {}", format_counts(&label_counts(&pages)));

    let seed = cfg.forest.seed;
    let pages = match cfg.max_categ {
        Some(cap) => cap_per_category(&pages, cap, seed),
        None => pages,
    };
    let counts_after_cap = label_counts(&pages);
    let _ = writeln!(out, "after capping: {}", format_counts(&counts_after_cap));

    let split = stratified_split(&pages, cfg.eval_ratio, seed)?;
    let _ = writeln!(out, "split: {} train, {} eval", split.train.len(), split.eval.len());
    let (train, train_failed) = featurize(&split.train);
    let (eval, eval_failed) = featurize(&split.eval);
    if train.is_empty() {
        return Err(CliError::EmptyDataset(dataset));
    }
    let xs: Vec<&[f64]> = train.iter().map(|s| s.0.as_slice()).collect();
    let ys: Vec<&str> = train.iter().map(|s| s.1.as_str()).collect();
    let classifier = if cfg.hierarchical {
        Classifier::Hierarchical(train_hierarchical(&xs, &ys, &taxonomy, &cfg.forest)?)
    } else {
        Classifier::Flat(train_forest(&xs, &ys, &cfg.forest)?)
    };
    let model_path = match &cfg.model_path {
        Some(p) => p.clone(),
        None if cfg.hierarchical => cfg.model_dir.join(classifier.id()),
        None => cfg.model_dir.join(format!("{}.apcf", classifier.id())),
    };
    classifier.save(&model_path)?;
    let _ = writeln!(
        out,
        "trained {} on {} pages, saved {}",
        classifier.id(),
        train.len(),
        model_path.display()
    );

    let eval = if eval.is_empty() {
        let _ = writeln!(out, "evaluation split is empty; no matrices written");
        None
    } else {
        Some(evaluate(ctx, &classifier, &eval, out)?)
    };
    Ok(TrainOutcome {
        model_path,
        counts_after_cap,
        eval,
        skipped: missing + train_failed.len() + eval_failed.len(),
    })
}

/// Scores a saved model on a per-category tree, capped by `max_categ_eval`.
pub fn eval_command(ctx: &Context, out: &mut dyn Write) -> Result<(EvalOutcome, usize), CliError> {
    let cfg = &ctx.config;
    let dir = cfg
        .eval_dir
        .clone()
        .ok_or_else(|| CliError::Usage("evaluation needs [EVAL] eval_dir or -d".into()))?;
    let classifier = Classifier::load(&ctx.model_path()?)?;
    let pages = collect_category_tree(&dir, &CategoryTaxonomy::standard())?;
    let pages = match cfg.max_categ_eval {
        Some(cap) => cap_per_category(&pages, cap, cfg.forest.seed),
        None => pages,
    };
    let (samples, failed) = featurize(&pages);
    if samples.is_empty() {
        return Err(CliError::EmptyDataset(dir));
    }
    Ok((evaluate(ctx, &classifier, &samples, out)?, failed.len()))
}

pub fn load_classifier(ctx: &Context) -> Result<Classifier, CliError> {
    Ok(Classifier::load(&ctx.model_path()?)?)
}

/// Copies (or verifies) annotated pages into `dest/CATEGORY/`. Returns the
/// exit code: partial when any record has no image.
pub fn sort_command(annotations: &Path, source: &Path, dest: &Path, verify: bool, out: &mut dyn Write) -> Result<i32, CliError> {
    let text = fs::read_to_string(annotations).map_err(io_err(annotations))?;
    let records = parse_annotations(&text, &CategoryTaxonomy::standard())?;
    let mode = if verify { SortMode::Verify } else { SortMode::Copy };
    let report = sort_annotated_files(&records, source, dest, mode)?;
    let _ = writeln!(
        out,
        "records {}, found {}, copied {}, missing {}, convention mismatches {}",
        records.len(),
        report.found,
        report.copied,
        report.missing.len(),
        report.mismatches.len()
    );
    for issue in report.missing.iter().chain(&report.mismatches) {
        let _ = writeln!(out, "row {}: {}", issue.row, issue.detail);
    }
    Ok(if report.missing.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}

pub fn synth_command(dir: &Path, per_class: usize, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let paths = synth::write_dataset(dir, per_class, seed)?;
    let _ = writeln!(out, "wrote {} pages under {}", paths.len(), dir.display());
    Ok(())
}
