use super::{Node, RegressionForest, FEATURE_COUNT};
use crate::{Error, Result};

/// Mean decrease in impurity: every split credits its feature with its
/// squared-error reduction relative to the tree's root sample count; the
/// totals are normalized to sum to one.
pub fn mdi_importance(forest: &RegressionForest) -> Result<[f64; FEATURE_COUNT]> {
    let mut weights = [0.0; FEATURE_COUNT];
    for tree in forest.trees() {
        let root = tree.root_samples() as f64;
        for node in tree.nodes() {
            if let Node::Split { feature, gain, .. } = *node {
                weights[feature] += gain / root;
            }
        }
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NoSplits);
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{train_forest, Feature, FeatureVector, ForestParams, LabeledRow};
    use crate::rng::rng_from_seed;
    use alloc::vec::Vec;
    use rand::Rng;

    fn random_rows(n: usize, seed: u64, target: impl Fn(&FeatureVector) -> f64) -> Vec<LabeledRow> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| {
                let x = FeatureVector(core::array::from_fn(|_| rng.random::<f64>() * 10.0));
                let y = target(&x);
                LabeledRow::new(x, y)
            })
            .collect()
    }

    #[test]
    fn single_informative_feature() {
        let rows = random_rows(400, 1, |x| if x.get(Feature::Sinr) < 5.0 { 1.0 } else { 11.0 });
        let f = train_forest(&rows, &ForestParams { n_trees: 30, ..Default::default() }, 2).unwrap();
        let w = mdi_importance(&f).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(w[Feature::Sinr.index()] > 0.9, "{w:?}");
    }

    #[test]
    fn duplicate_features_share_weight() {
        let mut rows = random_rows(600, 3, |x| 2.0 * x.get(Feature::Sinr));
        for r in &mut rows {
            r.x.0[Feature::Rsrp.index()] = r.x.0[Feature::Sinr.index()];
        }
        let f = train_forest(&rows, &ForestParams { n_trees: 400, ..Default::default() }, 5).unwrap();
        let w = mdi_importance(&f).unwrap();
        assert!((w[Feature::Sinr.index()] - 0.5).abs() < 0.1, "{w:?}");
        assert!((w[Feature::Rsrp.index()] - 0.5).abs() < 0.1, "{w:?}");
    }

    #[test]
    fn pure_leaves_error() {
        let rows = random_rows(50, 4, |_| 1.0);
        let f = train_forest(&rows, &ForestParams { n_trees: 3, ..Default::default() }, 0).unwrap();
        assert_eq!(mdi_importance(&f), Err(Error::NoSplits));
    }
}
