use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use crate::config::AppConfig;

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("expected a positive integer, got {s:?}")),
    }
}

/// Classify scanned archive pages with a handcrafted-feature random forest.
#[derive(Debug, Clone, Parser)]
#[command(name = "pageclass", version, about)]
pub struct Cli {
    /// Classify a single image file.
    #[arg(short = 'f', long = "file", value_name = "IMAGE")]
    pub file: Option<PathBuf>,

    /// Classify every image in a directory.
    #[arg(short = 'd', long = "directory", value_name = "DIR")]
    pub directory: Option<PathBuf>,

    /// Classify the directory named by [INPUT] directory in the config.
    #[arg(long = "dir")]
    pub dir: bool,

    /// Descend into nested subdirectories.
    #[arg(long)]
    pub inner: bool,

    /// Number of ranked predictions per page (short form -tn).
    #[arg(long = "topn", value_name = "N", value_parser = positive)]
    pub topn: Option<usize>,

    /// Also write a CSV with every category's probability.
    #[arg(long)]
    pub raw: bool,

    #[arg(long = "batch_size", value_name = "N", value_parser = positive)]
    pub batch_size: Option<usize>,

    /// Train a model from [TRAIN] dataset_path.
    #[arg(long)]
    pub train: bool,

    /// Evaluate a model on [EVAL] eval_dir, or on -d when given.
    #[arg(long)]
    pub eval: bool,

    /// Model file (or hierarchical model directory).
    #[arg(short = 'm', long = "model", value_name = "PATH")]
    pub model: Option<PathBuf>,

    /// Cap on training samples per category (short form -mc).
    #[arg(long = "max_categ", value_name = "N", value_parser = positive)]
    pub max_categ: Option<usize>,

    /// Cap on evaluation samples per category (short form -mce).
    #[arg(long = "max_categ_eval", value_name = "N", value_parser = positive)]
    pub max_categ_eval: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Worker threads; defaults to the logical CPU count.
    #[arg(long, value_name = "N", value_parser = positive)]
    pub workers: Option<usize>,

    /// Train a coarse group model plus per-group subtype models.
    #[arg(long)]
    pub hierarchical: bool,

    /// Render confusion matrices with row-normalized colours.
    #[arg(long)]
    pub normalize: bool,

    /// Config file; `config.txt` is read when present.
    #[arg(short = 'c', long = "config", value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Sort page images into per-category folders from an annotation CSV.
    #[arg(long, value_name = "CSV", requires_all = ["source", "dest"])]
    pub sort: Option<PathBuf>,

    /// Root of the page images referenced by --sort.
    #[arg(long, value_name = "DIR")]
    pub source: Option<PathBuf>,

    /// Destination root for --sort.
    #[arg(long, value_name = "DIR")]
    pub dest: Option<PathBuf>,

    /// With --sort, report missing files without copying.
    #[arg(long)]
    pub verify: bool,

    /// Write a synthetic four-category dataset to DIR.
    #[arg(long, value_name = "DIR")]
    pub synth: Option<PathBuf>,

    /// Pages per category for --synth.
    #[arg(long = "synth_count", value_name = "N", default_value_t = 200, value_parser = positive)]
    pub synth_count: usize,
}

/// What the invocation asks for; exactly one per run.
#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    File(PathBuf),
    Directory(PathBuf),
    Train,
    Eval,
    Sort,
    Synth(PathBuf),
}

impl Cli {
    pub fn mode(&self, config: &AppConfig) -> Result<Mode, String> {
        let mut modes = Vec::new();
        if let Some(f) = &self.file {
            modes.push(Mode::File(f.clone()));
        }
        if self.train {
            modes.push(Mode::Train);
        }
        if self.eval {
            modes.push(Mode::Eval);
        }
        if let Some(d) = &self.directory {
            if !self.eval {
                modes.push(Mode::Directory(d.clone()));
            }
        } else if self.dir {
            let d = config
                .input_dir
                .clone()
                .ok_or("--dir needs [INPUT] directory in the config")?;
            modes.push(Mode::Directory(d));
        }
        if self.sort.is_some() {
            modes.push(Mode::Sort);
        }
        if let Some(s) = &self.synth {
            modes.push(Mode::Synth(s.clone()));
        }
        match modes.len() {
            0 => Err("nothing to do: give -f, -d, --dir, --train, --eval, --sort or --synth".into()),
            1 => Ok(modes.pop().unwrap()),
            _ => Err("choose a single action per run".into()),
        }
    }

    /// Flags win over config values.
    pub fn apply_overrides(&self, config: &mut AppConfig) {
        if let Some(n) = self.topn {
            config.top_n = n;
        }
        if let Some(n) = self.batch_size {
            config.batch_size = n;
        }
        if let Some(n) = self.max_categ {
            config.max_categ = Some(n);
        }
        if let Some(n) = self.max_categ_eval {
            config.max_categ_eval = Some(n);
        }
        if let Some(s) = self.seed {
            config.forest.seed = s;
        }
        if let Some(w) = self.workers {
            config.workers = Some(w);
        }
        if let Some(m) = &self.model {
            config.model_path = Some(m.clone());
        }
        if self.hierarchical {
            config.hierarchical = true;
        }
        if self.eval {
            if let Some(d) = &self.directory {
                config.eval_dir = Some(d.clone());
            }
        }
    }
}

/// Rewrites the multi-letter short flags (`-tn`, `-mc`, `-mce`) that clap
/// cannot express into their long forms.
pub fn normalize_args<I, T>(args: I) -> Vec<OsString>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    const ALIASES: [(&str, &str); 3] = [("-tn", "--topn"), ("-mce", "--max_categ_eval"), ("-mc", "--max_categ")];
    args.into_iter()
        .map(|a| {
            let a: OsString = a.into();
            let Some(s) = a.to_str() else { return a };
            for (short, long) in ALIASES {
                if s == short {
                    return long.into();
                }
                if let Some(rest) = s.strip_prefix(short).and_then(|r| r.strip_prefix('=')) {
                    return format!("{long}={rest}").into();
                }
            }
            a
        })
        .collect()
}
