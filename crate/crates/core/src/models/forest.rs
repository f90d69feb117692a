use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ModelError, Params, TrainingSet};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    Sqrt,
    All,
    Count(usize),
}

impl fmt::Display for FeatureSubsample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSubsample::Sqrt => f.write_str("sqrt"),
            FeatureSubsample::All => f.write_str("all"),
            FeatureSubsample::Count(n) => write!(f, "{n}"),
        }
    }
}

impl std::str::FromStr for FeatureSubsample {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sqrt" => Ok(FeatureSubsample::Sqrt),
            "all" => Ok(FeatureSubsample::All),
            n => n
                .parse()
                .map(FeatureSubsample::Count)
                .map_err(|_| format!("feature_subsample must be sqrt, all or a count, got {n:?}")),
        }
    }
}

impl FeatureSubsample {
    fn resolve(self, v: usize) -> usize {
        let m = match self {
            FeatureSubsample::Sqrt => (v as f64).sqrt().floor() as usize,
            FeatureSubsample::All => v,
            FeatureSubsample::Count(n) => n,
        };
        m.clamp(1, v.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub feature_subsample: FeatureSubsample,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for RfConfig {
    fn default() -> Self {
        RfConfig {
            n_trees: 100,
            max_depth: 16,
            min_leaf: 1,
            feature_subsample: FeatureSubsample::Sqrt,
            bootstrap: true,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        class: usize,
        /// Weighted training counts per class.
        counts: [u32; 2],
    },
    /// Rows with x[feature] <= threshold go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict_row(&self, x: &FeatureMatrix, i: usize) -> usize {
        let (s, e) = (x.indptr[i], x.indptr[i + 1]);
        let cols = &x.indices[s..e];
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let v = cols.binary_search(feature).map_or(0.0, |k| x.values[s + k]);
                    at = if v <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match &t.nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub(crate) fn max_feature(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match n {
                TreeNode::Split { feature, .. } => *feature,
                TreeNode::Leaf { .. } => 0,
            })
            .max()
            .unwrap_or(0)
    }
}

/// Column-major copy of the training matrix.
struct Columns {
    starts: Vec<usize>,
    rows: Vec<usize>,
    values: Vec<f64>,
}

impl Columns {
    fn new(x: &FeatureMatrix) -> Self {
        let mut counts = vec![0usize; x.n_cols + 1];
        for &j in &x.indices {
            counts[j + 1] += 1;
        }
        for j in 0..x.n_cols {
            counts[j + 1] += counts[j];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut rows = vec![0; x.nnz()];
        let mut values = vec![0.0; x.nnz()];
        for i in 0..x.n_rows() {
            for (j, v) in x.row(i) {
                rows[fill[j]] = i;
                values[fill[j]] = v;
                fill[j] += 1;
            }
        }
        Columns { starts, rows, values }
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.starts[j], self.starts[j + 1]);
        self.rows[s..e].iter().copied().zip(self.values[s..e].iter().copied())
    }
}

fn gini(c: [u32; 2]) -> f64 {
    let n = f64::from(c[0] + c[1]);
    if n == 0.0 {
        return 0.0;
    }
    let p = f64::from(c[0]) / n;
    2.0 * p * (1.0 - p)
}

fn leaf(counts: [u32; 2]) -> TreeNode {
    TreeNode::Leaf {
        class: usize::from(counts[1] > counts[0]),
        counts,
    }
}

struct Builder<'a> {
    cols: &'a Columns,
    y: &'a [usize],
    cfg: &'a RfConfig,
    m_try: usize,
    /// Bootstrap multiplicity of each row in the node being split.
    weight: Vec<u32>,
    /// Feature order, partially reshuffled at every node.
    perm: Vec<usize>,
    nodes: Vec<TreeNode>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn counts(&self, rows: &[(usize, u32)]) -> [u32; 2] {
        let mut c = [0; 2];
        for &(r, w) in rows {
            c[self.y[r]] += w;
        }
        c
    }

    /// Best threshold on one feature, or None if the feature is constant in the node.
    fn best_on(&self, j: usize, total: [u32; 2]) -> Option<Option<Candidate>> {
        let mut present: Vec<(f64, usize, u32)> = self
            .cols
            .column(j)
            .filter_map(|(r, v)| {
                let w = self.weight[r];
                (w > 0).then_some((v, self.y[r], w))
            })
            .collect();
        let mut nz = [0u32; 2];
        for &(_, c, w) in &present {
            nz[c] += w;
        }
        let zeros = [total[0] - nz[0], total[1] - nz[1]];
        if zeros[0] + zeros[1] > 0 {
            present.push((0.0, usize::MAX, 0));
        }
        present.sort_by(|a, b| a.0.total_cmp(&b.0));
        if present.first().map(|p| p.0) == present.last().map(|p| p.0) {
            return None;
        }
        let n = f64::from(total[0] + total[1]);
        let min_leaf = self.cfg.min_leaf as u32;
        let mut left = [0u32; 2];
        let mut best: Option<Candidate> = None;
        let mut k = 0;
        while k < present.len() {
            let v = present[k].0;
            while k < present.len() && present[k].0 == v {
                let (_, c, w) = present[k];
                if c == usize::MAX {
                    left[0] += zeros[0];
                    left[1] += zeros[1];
                } else {
                    left[c] += w;
                }
                k += 1;
            }
            if k == present.len() {
                break;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let (nl, nr) = (left[0] + left[1], right[0] + right[1]);
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let imp = (f64::from(nl) * gini(left) + f64::from(nr) * gini(right)) / n;
            if best.as_ref().is_none_or(|b| imp < b.impurity) {
                let next = present[k].0;
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                best = Some(Candidate {
                    feature: j,
                    threshold,
                    impurity: imp,
                });
            }
        }
        Some(best)
    }

    fn build(&mut self, rows: Vec<(usize, u32)>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.counts(&rows);
        let id = self.nodes.len();
        self.nodes.push(leaf(counts));
        let n = counts[0] + counts[1];
        if depth >= self.cfg.max_depth || counts[0] == 0 || counts[1] == 0 || n < 2 * self.cfg.min_leaf as u32 {
            return id;
        }
        for &(r, w) in &rows {
            self.weight[r] = w;
        }
        let v = self.perm.len();
        let mut best: Option<Candidate> = None;
        let mut informative = 0;
        let mut drawn = 0;
        while drawn < v && (informative < self.m_try || best.is_none()) {
            let k = rng.gen_range(drawn..v);
            self.perm.swap(drawn, k);
            let j = self.perm[drawn];
            drawn += 1;
            if let Some(cand) = self.best_on(j, counts) {
                informative += 1;
                if let Some(c) = cand {
                    if best.as_ref().is_none_or(|b| c.impurity < b.impurity) {
                        best = Some(c);
                    }
                }
            }
        }
        for &(r, _) in &rows {
            self.weight[r] = 0;
        }
        // Zero-gain splits are accepted so that interactions such as XOR can
        // still be separated further down.
        let Some(split) = best else {
            return id;
        };
        let mut left_rows = Vec::new();
        let mut right_rows = Vec::new();
        let col: std::collections::HashMap<usize, f64> = self.cols.column(split.feature).collect();
        for (r, w) in rows {
            if col.get(&r).copied().unwrap_or(0.0) <= split.threshold {
                left_rows.push((r, w));
            } else {
                right_rows.push((r, w));
            }
        }
        let left = self.build(left_rows, depth + 1, rng);
        let right = self.build(right_rows, depth + 1, rng);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

fn grow_tree(cols: &Columns, y: &[usize], n_cols: usize, cfg: &RfConfig, seed: u64) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = y.len();
    let mut mult = vec![0u32; n];
    if cfg.bootstrap {
        for _ in 0..n {
            mult[rng.gen_range(0..n)] += 1;
        }
    } else {
        mult.fill(1);
    }
    let rows: Vec<(usize, u32)> = mult.iter().enumerate().filter(|(_, &w)| w > 0).map(|(r, &w)| (r, w)).collect();
    let mut b = Builder {
        cols,
        y,
        cfg,
        m_try: cfg.feature_subsample.resolve(n_cols),
        weight: vec![0; n],
        perm: (0..n_cols).collect(),
        nodes: Vec::new(),
    };
    b.build(rows, 0, &mut rng);
    Tree { nodes: b.nodes }
}

/// Bagged CART trees with Gini impurity. Tree t is grown from the t-th seed
/// drawn from a ChaCha8 stream keyed by `cfg.seed`, so the forest does not
/// depend on thread scheduling.
pub fn train_rf(ts: &TrainingSet<'_>, cfg: &RfConfig) -> Result<Model, ModelError> {
    if cfg.n_trees == 0 {
        return Err(ModelError::InvalidConfig("n_trees must be at least 1".into()));
    }
    if cfg.min_leaf == 0 {
        return Err(ModelError::InvalidConfig("min_leaf must be at least 1".into()));
    }
    let cols = Columns::new(ts.x);
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<u64> = (0..cfg.n_trees).map(|_| master.gen()).collect();
    let trees: Vec<Tree> = seeds
        .par_iter()
        .map(|&s| grow_tree(&cols, ts.y, ts.x.n_cols, cfg, s))
        .collect();
    Ok(Model {
        config: ModelConfig::Rf(*cfg),
        vocab_fingerprint: ts.x.fingerprint.clone(),
        n_features: ts.x.n_cols,
        classes: ts.classes.clone(),
        params: Params::Forest { trees },
    })
}
