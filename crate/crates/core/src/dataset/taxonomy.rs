use std::cmp::Ordering;
use std::fmt;
use std::sync::OnceLock;

use super::DatasetError;

/// Coarse content groups, declared in priority order (photos win ties).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    Photo,
    Draw,
    Line,
    Text,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::Photo, Group::Draw, Group::Line, Group::Text];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Photo => "PHOTO",
            Group::Draw => "DRAW",
            Group::Line => "LINE",
            Group::Text => "TEXT",
        }
    }

    /// 0 is the highest priority.
    pub fn priority(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<Group> {
        Group::ALL.into_iter().find(|g| g.as_str() == s)
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const STANDARD: [(&str, Group); 11] = [
    ("DRAW", Group::Draw),
    ("DRAW_L", Group::Draw),
    ("LINE_HW", Group::Line),
    ("LINE_P", Group::Line),
    ("LINE_T", Group::Line),
    ("PHOTO", Group::Photo),
    ("PHOTO_L", Group::Photo),
    ("TEXT", Group::Text),
    ("TEXT_HW", Group::Text),
    ("TEXT_P", Group::Text),
    ("TEXT_T", Group::Text),
];

/// Ordered label set with a group per label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryTaxonomy {
    entries: Vec<(String, Group)>,
}

impl CategoryTaxonomy {
    /// The eleven page categories.
    pub fn standard() -> Self {
        Self::standard_ref().clone()
    }

    pub(crate) fn standard_ref() -> &'static Self {
        static TAXONOMY: OnceLock<CategoryTaxonomy> = OnceLock::new();
        TAXONOMY.get_or_init(|| CategoryTaxonomy {
            entries: STANDARD.iter().map(|&(l, g)| (l.to_string(), g)).collect(),
        })
    }

    pub fn new(entries: Vec<(String, Group)>) -> Result<Self, DatasetError> {
        if entries.is_empty() {
            return Err(DatasetError::InvalidArgument("empty taxonomy".into()));
        }
        for (i, (label, _)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(l, _)| l == label) {
                return Err(DatasetError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Labels in declaration order.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(l, _)| l.as_str())
    }

    pub fn label_list(&self) -> Vec<String> {
        self.labels().map(str::to_string).collect()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.entries.iter().position(|(l, _)| l == label)
    }

    pub fn group_of(&self, label: &str) -> Option<Group> {
        self.entries.iter().find(|(l, _)| l == label).map(|&(_, g)| g)
    }

    pub fn subtypes(&self, group: Group) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|&&(_, g)| g == group)
            .map(|(l, _)| l.as_str())
            .collect()
    }

    /// Priority of a label or a group name; unknown names rank last.
    pub fn priority_rank(&self, name: &str) -> usize {
        self.group_of(name)
            .or_else(|| Group::parse(name))
            .map_or(Group::ALL.len(), Group::priority)
    }

    /// Sorts by descending score; ties go to the higher-priority group, then
    /// to the lexicographically smaller label.
    pub fn rank(&self, mut scores: Vec<(String, f64)>) -> Vec<(String, f64)> {
        scores.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.priority_rank(&a.0).cmp(&self.priority_rank(&b.0)))
                .then_with(|| a.0.cmp(&b.0))
        });
        scores
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_taxonomy_shape() {
        let t = CategoryTaxonomy::standard();
        assert_eq!(t.len(), 11);
        assert_eq!(t.subtypes(Group::Photo), ["PHOTO", "PHOTO_L"]);
        assert_eq!(t.subtypes(Group::Draw), ["DRAW", "DRAW_L"]);
        assert_eq!(t.subtypes(Group::Line), ["LINE_HW", "LINE_P", "LINE_T"]);
        assert_eq!(t.subtypes(Group::Text), ["TEXT", "TEXT_HW", "TEXT_P", "TEXT_T"]);
        assert_eq!(t.group_of("TEXT"), Some(Group::Text));
        assert_eq!(t.group_of("TABLE"), None);
    }

    #[test]
    fn rejects_duplicates() {
        let err = CategoryTaxonomy::new(vec![("A".into(), Group::Text), ("A".into(), Group::Draw)]);
        assert_eq!(err, Err(DatasetError::DuplicateLabel("A".into())));
    }

    #[test]
    fn ranking_tie_breaks() {
        let t = CategoryTaxonomy::standard();
        let ranked = t.rank(vec![
            ("TEXT_T".into(), 0.4),
            ("PHOTO".into(), 0.4),
            ("DRAW".into(), 0.2),
        ]);
        assert_eq!(ranked[0].0, "PHOTO");
        assert_eq!(ranked[1].0, "TEXT_T");

        let ranked = t.rank(vec![("Z".into(), 0.5), ("TEXT_P".into(), 0.5), ("TEXT_HW".into(), 0.5)]);
        let names: Vec<_> = ranked.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["TEXT_HW", "TEXT_P", "Z"]);
    }

    #[test]
    fn group_names_rank_by_priority() {
        let t = CategoryTaxonomy::standard();
        assert_eq!(t.priority_rank("PHOTO_L"), 0);
        assert_eq!(t.priority_rank("LINE"), 2);
        assert_eq!(t.priority_rank("B"), 4);
    }
}
