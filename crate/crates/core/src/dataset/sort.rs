use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::pageref::{is_image_path, parse_page_ref};
use super::{AnnotationRecord, DatasetError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortMode {
    /// Copy each page image into `dest_root/CATEGORY/`.
    Copy,
    /// Resolve sources and report problems without writing anything.
    Verify,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortIssue {
    /// 1-based record position.
    pub row: usize,
    pub record: AnnotationRecord,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SortReport {
    pub found: usize,
    pub copied: usize,
    pub missing: Vec<SortIssue>,
    pub mismatches: Vec<SortIssue>,
}

/// Where a record's page image was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolved {
    pub path: PathBuf,
    /// Set when the match needed a non-standard rule.
    pub note: Option<String>,
}

/// Looks up page images under a source root laid out as `root/FILE/FILE-NN.ext`
/// (one directory per converted PDF) or flat as `root/FILE-NN.ext`.
#[derive(Debug, Default)]
pub struct PageResolver {
    root: PathBuf,
    listings: HashMap<PathBuf, Vec<PathBuf>>,
}

impl PageResolver {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            listings: HashMap::new(),
        }
    }

    fn listing(&mut self, dir: &Path) -> &[PathBuf] {
        self.listings.entry(dir.to_path_buf()).or_insert_with(|| {
            let mut files: Vec<PathBuf> = fs::read_dir(dir)
                .map(|rd| {
                    rd.filter_map(|e| e.ok().map(|e| e.path()))
                        .filter(|p| p.is_file() && is_image_path(p))
                        .collect()
                })
                .unwrap_or_default();
            files.sort();
            files
        })
    }

    pub fn resolve(&mut self, file: &str, page: u32) -> Option<Resolved> {
        let dirs = [self.root.join(file), self.root.clone()];
        for dir in dirs {
            let listing = self.listing(&dir).to_vec();
            let exact: Vec<&PathBuf> = listing
                .iter()
                .filter(|p| matches!(parse_page_ref(p), Ok(r) if r.stem == file && r.page == page))
                .collect();
            if let Some(first) = exact.first() {
                let note = (exact.len() > 1).then(|| {
                    format!(
                        "{} files match page {page}; using {}",
                        exact.len(),
                        first.display()
                    )
                });
                return Some(Resolved {
                    path: (*first).clone(),
                    note,
                });
            }
            if page == 1 {
                let single = listing.iter().find(
                    |p| matches!(parse_page_ref(p), Err(e) if e.fallback.stem == file),
                );
                if let Some(path) = single {
                    return Some(Resolved {
                        path: path.clone(),
                        note: Some(format!(
                            "{} has no page suffix; treated as a single-page scan",
                            path.display()
                        )),
                    });
                }
            }
        }
        None
    }
}

/// Resolves every record's page image and, in copy mode, copies it into a
/// per-category directory. Missing sources are collected, not fatal; the
/// report lists issues in record order.
pub fn sort_annotated_files(
    records: &[AnnotationRecord],
    source_root: &Path,
    dest_root: &Path,
    mode: SortMode,
) -> Result<SortReport, DatasetError> {
    let mut resolver = PageResolver::new(source_root);
    let mut report = SortReport::default();
    let mut jobs = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let row = i + 1;
        match resolver.resolve(&rec.file, rec.page) {
            Some(found) => {
                report.found += 1;
                if let Some(note) = found.note {
                    report.mismatches.push(SortIssue {
                        row,
                        record: rec.clone(),
                        detail: note,
                    });
                }
                jobs.push((row, rec, found.path));
            }
            None => report.missing.push(SortIssue {
                row,
                record: rec.clone(),
                detail: format!("no image for {} page {}", rec.file, rec.page),
            }),
        }
    }

    if mode == SortMode::Verify {
        return Ok(report);
    }

    let outcomes: Vec<Result<(), SortIssue>> = jobs
        .par_iter()
        .map(|&(row, rec, ref src)| {
            let dir = dest_root.join(&rec.category);
            let name = src.file_name().expect("resolved paths name a file");
            fs::create_dir_all(&dir)
                .and_then(|_| fs::copy(src, dir.join(name)))
                .map(|_| ())
                .map_err(|e| SortIssue {
                    row,
                    record: rec.clone(),
                    detail: format!("copy of {} failed: {e}", src.display()),
                })
        })
        .collect();
    for outcome in outcomes {
        match outcome {
            Ok(()) => report.copied += 1,
            Err(issue) => report.missing.push(issue),
        }
    }
    report.missing.sort_by_key(|issue| issue.row);
    Ok(report)
}
