use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{load_model, save_model, tree_seed, train_forest, ForestConfig, ForestError, RandomForestModel};
use crate::dataset::{CategoryTaxonomy, Group};

/// A coarse model over group names plus one model per group over its subtypes.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalModel {
    pub coarse: RandomForestModel,
    pub fine: BTreeMap<String, RandomForestModel>,
}

/// `score(c) = P_coarse(group(c)) · P_fine(c | group(c))`, ranked like
/// [`RandomForestModel::predict_ranked`]. Every group the coarse model knows
/// must have a fine model.
pub fn hierarchical_predict(
    coarse: &RandomForestModel,
    fine: &BTreeMap<String, RandomForestModel>,
    fv: &[f64],
) -> Result<Vec<(String, f64)>, ForestError> {
    let groups = coarse.predict_proba(fv)?;
    let mut scores = Vec::new();
    for (group, pg) in coarse.categories().iter().zip(groups) {
        let model = fine
            .get(group)
            .ok_or_else(|| ForestError::MissingFineModel(group.clone()))?;
        for (label, pf) in model.categories().iter().zip(model.predict_proba(fv)?) {
            scores.push((label.clone(), pg * pf));
        }
    }
    Ok(CategoryTaxonomy::standard_ref().rank(scores))
}

/// Trains the coarse model on group names and a fine model per present group.
pub fn train_hierarchical<X, S>(
    samples: &[X],
    labels: &[S],
    taxonomy: &CategoryTaxonomy,
    config: &ForestConfig,
) -> Result<HierarchicalModel, ForestError>
where
    X: AsRef<[f64]> + Sync,
    S: AsRef<str>,
{
    let groups: Vec<Group> = labels
        .iter()
        .map(|l| {
            taxonomy
                .group_of(l.as_ref())
                .ok_or_else(|| ForestError::UnknownCategory(l.as_ref().to_string()))
        })
        .collect::<Result<_, _>>()?;
    let group_names: Vec<&str> = groups.iter().map(|g| g.as_str()).collect();
    let coarse = train_forest(samples, &group_names, config)?;

    let mut fine = BTreeMap::new();
    for g in Group::ALL {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| groups[i] == g).collect();
        if idx.is_empty() {
            continue;
        }
        let xs: Vec<&[f64]> = idx.iter().map(|&i| samples[i].as_ref()).collect();
        let ys: Vec<&str> = idx.iter().map(|&i| labels[i].as_ref()).collect();
        let cfg = ForestConfig {
            seed: tree_seed(config.seed, u64::MAX - g.priority() as u64),
            ..config.clone()
        };
        fine.insert(g.as_str().to_string(), train_forest(&xs, &ys, &cfg)?);
    }
    Ok(HierarchicalModel { coarse, fine })
}

impl HierarchicalModel {
    pub fn predict_ranked(&self, fv: &[f64]) -> Result<Vec<(String, f64)>, ForestError> {
        hierarchical_predict(&self.coarse, &self.fine, fv)
    }

    /// Writes `coarse.apcf` and one `fine-<GROUP>.apcf` per group into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), ForestError> {
        fs::create_dir_all(dir).map_err(|source| ForestError::UnwritableFile {
            path: dir.to_path_buf(),
            source,
        })?;
        save_model(&self.coarse, &dir.join("coarse.apcf"))?;
        for (group, model) in &self.fine {
            save_model(model, &dir.join(format!("fine-{group}.apcf")))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, ForestError> {
        let coarse = load_model(&dir.join("coarse.apcf"))?;
        let mut fine = BTreeMap::new();
        for group in coarse.categories() {
            let path = dir.join(format!("fine-{group}.apcf"));
            if !path.exists() {
                return Err(ForestError::MissingFineModel(group.clone()));
            }
            fine.insert(group.clone(), load_model(&path)?);
        }
        Ok(Self { coarse, fine })
    }
}
