use super::{CategoryTaxonomy, DatasetError, Labeled};

/// One annotated page: `FILE,PAGE,CLASS`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnnotationRecord {
    pub file: String,
    pub page: u32,
    pub category: String,
}

impl Labeled for AnnotationRecord {
    fn label(&self) -> &str {
        &self.category
    }
}

/// Parses annotation CSV text. Columns are located by header name, so order
/// is free and extra columns are ignored. Rows are numbered from 1 (the first
/// data row).
pub fn parse_annotations(
    text: &str,
    taxonomy: &CategoryTaxonomy,
) -> Result<Vec<AnnotationRecord>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| DatasetError::Csv(e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    };
    let (file_col, page_col, class_col) = (column("FILE")?, column("PAGE")?, column("CLASS")?);

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| DatasetError::Csv(e.to_string()))?;
        if row.iter().all(str::is_empty) {
            continue;
        }
        let field = |col: usize| row.get(col).unwrap_or("");
        let page_text = field(page_col);
        let page = page_text
            .parse::<u32>()
            .ok()
            .filter(|&p| p >= 1)
            .ok_or_else(|| DatasetError::BadPageNumber {
                row: row_no,
                value: page_text.to_string(),
            })?;
        let category = field(class_col);
        if !taxonomy.contains(category) {
            return Err(DatasetError::UnknownCategory {
                row: Some(row_no),
                label: category.to_string(),
            });
        }
        records.push(AnnotationRecord {
            file: field(file_col).to_string(),
            page,
            category: category.to_string(),
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<AnnotationRecord>, DatasetError> {
        parse_annotations(text, &CategoryTaxonomy::standard())
    }

    #[test]
    fn parses_single_row() {
        let recs = parse("FILE,PAGE,CLASS\ndoc1,3,TEXT_T").unwrap();
        assert_eq!(
            recs,
            vec![AnnotationRecord {
                file: "doc1".into(),
                page: 3,
                category: "TEXT_T".into()
            }]
        );
    }

    #[test]
    fn unknown_category_reports_row() {
        assert_eq!(
            parse("FILE,PAGE,CLASS\ndoc1,3,TABLE"),
            Err(DatasetError::UnknownCategory {
                row: Some(1),
                label: "TABLE".into()
            })
        );
    }

    #[test]
    fn header_order_is_free() {
        let a = parse("FILE,PAGE,CLASS\nd,1,PHOTO\ne,2,DRAW\n").unwrap();
        let b = parse("CLASS,FILE,PAGE,NOTE\nPHOTO,d,1,x\nDRAW,e,2,y\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn column_and_page_errors() {
        assert_eq!(
            parse("FILE,CLASS\nd,PHOTO"),
            Err(DatasetError::MissingColumn("PAGE".into()))
        );
        assert_eq!(
            parse("FILE,PAGE,CLASS\nd,0,PHOTO"),
            Err(DatasetError::BadPageNumber { row: 1, value: "0".into() })
        );
        assert!(matches!(
            parse("FILE,PAGE,CLASS\nd,1,PHOTO\nd,x,PHOTO"),
            Err(DatasetError::BadPageNumber { row: 2, .. })
        ));
    }
}
