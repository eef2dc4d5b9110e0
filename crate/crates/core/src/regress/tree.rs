//! Depth-limited regression trees grown on binned features.
//!
//! One grower serves both ensembles. Each sample carries a gradient `g` and
//! a hessian `h`; a leaf predicts `sum(g) / max(sum(h), floor)` and a split
//! is scored by `G_L²/H_L + G_R²/H_R − G²/H`. With `g = y`, `h = 1` this is
//! an ordinary least-squares tree (forests); with `g = y − p`,
//! `h = p(1 − p)` it is a Newton step for the logistic loss (boosting).

use nalgebra::DMatrix;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::seed::Rng;

pub const MAX_BINS: usize = 256;

/// Features quantized once per dataset. `codes[j][i]` is the number of cut
/// points of feature `j` strictly below `x[i, j]`, so `x ≤ cuts[j][k]` holds
/// exactly when `code ≤ k`.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    n: usize,
    cuts: Vec<Vec<f64>>,
    codes: Vec<Vec<u8>>,
}

impl BinnedMatrix {
    pub fn new(x: &DMatrix<f64>) -> Self {
        let (n, p) = x.shape();
        let mut cuts = Vec::with_capacity(p);
        let mut codes = Vec::with_capacity(p);
        for j in 0..p {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let c = cut_points(&col);
            codes.push(
                col.iter()
                    .map(|v| c.partition_point(|e| e < v) as u8)
                    .collect(),
            );
            cuts.push(c);
        }
        BinnedMatrix { n, cuts, codes }
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn features(&self) -> usize {
        self.cuts.len()
    }

    fn bins(&self, j: usize) -> usize {
        self.cuts[j].len() + 1
    }
}

/// Midpoints between distinct values when there are few of them, otherwise
/// midpoints between evenly spaced order statistics.
fn cut_points(col: &[f64]) -> Vec<f64> {
    let mut sorted = col.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut uniq = sorted.clone();
    uniq.dedup();
    let anchors: Vec<f64> = if uniq.len() <= MAX_BINS {
        uniq
    } else {
        let mut a: Vec<f64> = (0..MAX_BINS)
            .map(|k| sorted[(k * (sorted.len() - 1)) / (MAX_BINS - 1)])
            .collect();
        a.dedup();
        a
    };
    anchors.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Candidate features drawn per split (all features when ≥ p).
    pub mtry: usize,
    /// Minimum sample count (with bootstrap multiplicity) in each child.
    pub min_samples_leaf: usize,
    /// Minimum hessian mass in each child.
    pub min_child_weight: f64,
    /// Floor on the leaf denominator.
    pub hessian_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: u32,
        /// Rows with `x ≤ threshold` go left.
        threshold: f64,
        #[serde(skip)]
        bin: u8,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn is_stump_free(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left as usize).max(go(nodes, *right as usize)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Prediction for a raw feature row.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if row[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    /// Prediction for row `r` of the matrix the tree was grown on.
    pub fn predict_binned(&self, data: &BinnedMatrix, r: usize) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    bin,
                    left,
                    right,
                    ..
                } => {
                    i = if data.codes[*feature as usize][r] <= *bin {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= factor;
            }
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Bin {
    g: f64,
    h: f64,
    n: u32,
}

struct Grower<'a> {
    data: &'a BinnedMatrix,
    grad: &'a [f64],
    hess: &'a [f64],
    params: TreeParams,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        g / h.max(self.params.hessian_floor)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / h.max(self.params.hessian_floor)
    }

    fn grow(&mut self, samples: &mut [u32], depth: usize, rng: &mut Rng) -> u32 {
        let (g, h) = samples.iter().fold((0.0, 0.0), |(g, h), &i| {
            (g + self.grad[i as usize], h + self.hess[i as usize])
        });
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(g, h),
        });
        if depth >= self.params.max_depth || samples.len() < 2 * self.params.min_samples_leaf {
            return id;
        }
        let Some((feature, bin)) = self.best_split(samples, g, h, rng) else {
            return id;
        };
        let codes = &self.data.codes[feature];
        let mut k = 0;
        for i in 0..samples.len() {
            if codes[samples[i] as usize] <= bin {
                samples.swap(i, k);
                k += 1;
            }
        }
        let (l, r) = samples.split_at_mut(k);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id as usize] = Node::Split {
            feature: feature as u32,
            threshold: self.data.cuts[feature][bin as usize],
            bin,
            left,
            right,
        };
        id
    }

    fn best_split(&self, samples: &[u32], g: f64, h: f64, rng: &mut Rng) -> Option<(usize, u8)> {
        let p = self.data.features();
        let parent = self.score(g, h);
        let candidates: Vec<usize> = if self.params.mtry >= p {
            (0..p).collect()
        } else {
            let mut c = sample(rng, p, self.params.mtry).into_vec();
            c.sort_unstable();
            c
        };
        let tol = 1e-12 * parent.abs().max(1e-12);
        let mut best: Option<(f64, usize, u8)> = None;
        let mut hist: Vec<Bin> = Vec::new();
        for &j in &candidates {
            let nb = self.data.bins(j);
            if nb < 2 {
                continue;
            }
            hist.clear();
            hist.resize(nb, Bin::default());
            let codes = &self.data.codes[j];
            for &i in samples {
                let b = &mut hist[codes[i as usize] as usize];
                b.g += self.grad[i as usize];
                b.h += self.hess[i as usize];
                b.n += 1;
            }
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
            let total = samples.len();
            for (k, bin) in hist.iter().enumerate().take(nb - 1) {
                gl += bin.g;
                hl += bin.h;
                nl += bin.n as usize;
                if bin.n == 0 {
                    continue;
                }
                let nr = total - nl;
                let (gr, hr) = (g - gl, h - hl);
                if nl < self.params.min_samples_leaf
                    || nr < self.params.min_samples_leaf
                    || hl < self.params.min_child_weight
                    || hr < self.params.min_child_weight
                {
                    continue;
                }
                let gain = self.score(gl, hl) + self.score(gr, hr) - parent;
                if gain > tol && best.map_or(true, |(bg, _, _)| gain > bg) {
                    best = Some((gain, j, k as u8));
                }
            }
        }
        best.map(|(_, j, k)| (j, k))
    }
}

/// Grows one tree on `samples` (row indices, repeated for bootstrap weight).
pub fn grow_tree(
    data: &BinnedMatrix,
    grad: &[f64],
    hess: &[f64],
    samples: &[u32],
    params: TreeParams,
    rng: &mut Rng,
) -> Tree {
    let mut grower = Grower {
        data,
        grad,
        hess,
        params,
        nodes: Vec::new(),
    };
    let mut s = samples.to_vec();
    grower.grow(&mut s, 0, rng);
    Tree { nodes: grower.nodes }
}
