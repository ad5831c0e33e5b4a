//! Page-image filename conventions.
//!
//! `pdftoppm` writes `<stem>-<zero padded page>.png`, ImageMagick writes
//! `<stem>-<page>.png`. Both parse to the same `(stem, page)`.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub const IMAGE_EXTENSIONS: [&str; 5] = ["png", "jpg", "jpeg", "tif", "tiff"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageRef {
    pub stem: String,
    pub page: u32,
    pub path: PathBuf,
}

/// Name does not follow `<stem>-<digits>.<ext>`; `fallback` treats the file as
/// a single-page scan.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot read a page number from {name:?}; treating it as page 1")]
pub struct UnparseableName {
    pub name: String,
    pub fallback: PageRef,
}

pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

pub fn parse_page_ref(path: &Path) -> Result<PageRef, UnparseableName> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();

    if let Some((base, digits)) = stem.rsplit_once('-') {
        let numeric = !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit());
        if numeric && !base.is_empty() {
            if let Ok(page @ 1..) = digits.parse::<u32>() {
                return Ok(PageRef {
                    stem: base.to_string(),
                    page,
                    path: path.to_path_buf(),
                });
            }
        }
    }
    Err(UnparseableName {
        name,
        fallback: PageRef {
            stem,
            page: 1,
            path: path.to_path_buf(),
        },
    })
}

/// Like [`parse_page_ref`] but always yields a reference, plus the warning if
/// the fallback was used.
pub fn parse_page_ref_lenient(path: &Path) -> (PageRef, Option<UnparseableName>) {
    match parse_page_ref(path) {
        Ok(r) => (r, None),
        Err(e) => (e.fallback.clone(), Some(e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_conventions() {
        let a = parse_page_ref(Path::new("doc-0012.png")).unwrap();
        assert_eq!((a.stem.as_str(), a.page), ("doc", 12));
        let b = parse_page_ref(Path::new("doc-12.png")).unwrap();
        assert_eq!((b.stem.as_str(), b.page), ("doc", 12));
        let c = parse_page_ref(Path::new("dir/report-0007.png")).unwrap();
        let d = parse_page_ref(Path::new("report-7.tif")).unwrap();
        assert_eq!((c.stem, c.page), (d.stem, d.page));
    }

    #[test]
    fn hyphenated_stems_keep_their_prefix() {
        let r = parse_page_ref(Path::new("CTX-1953-05-003.png")).unwrap();
        assert_eq!((r.stem.as_str(), r.page), ("CTX-1953-05", 3));
    }

    #[test]
    fn single_page_fallback() {
        let err = parse_page_ref(Path::new("scan.png")).unwrap_err();
        assert_eq!((err.fallback.stem.as_str(), err.fallback.page), ("scan", 1));
        let (r, warn) = parse_page_ref_lenient(Path::new("scan.png"));
        assert_eq!(r.page, 1);
        assert!(warn.is_some());
        assert!(parse_page_ref(Path::new("doc-0.png")).is_err());
        assert!(parse_page_ref(Path::new("doc-.png")).is_err());
        assert!(parse_page_ref(Path::new("-5.png")).is_err());
    }

    #[test]
    fn image_extensions() {
        assert!(is_image_path(Path::new("a.PNG")));
        assert!(is_image_path(Path::new("a.tiff")));
        assert!(!is_image_path(Path::new("a.pdf")));
        assert!(!is_image_path(Path::new("README")));
    }
}
