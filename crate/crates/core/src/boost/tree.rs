use serde::{Deserialize, Serialize};

use crate::boost::features::{Binned, Feature, FeatureMatrix};

/// Level subsets are searched exhaustively up to this many present levels.
const MAX_SUBSET_LEVELS: usize = 12;

/// Which rows go left at a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `x <= threshold`
    Threshold(f64),
    /// level in the listed set
    Levels(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        rule: Rule,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn predict(&self, x: &FeatureMatrix, row: usize) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split { feature, rule, left, right } => {
                    let go_left = match (rule, x.feature(*feature)) {
                        (Rule::Threshold(t), Feature::Continuous(v)) => v[row] <= *t,
                        (Rule::Levels(set), Feature::Categorical { values, .. }) => set.contains(&values[row]),
                        // kind mismatch is rejected before prediction
                        _ => false,
                    };
                    node = if go_left { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub(crate) fn leaves_mut(&mut self) -> Vec<&mut f64> {
        match self {
            Node::Leaf { value } => vec![value],
            Node::Split { left, right, .. } => {
                let mut v = left.leaves_mut();
                v.extend(right.leaves_mut());
                v
            }
        }
    }

    /// Index of the leaf (in `leaves_mut` order) that `row` falls into.
    pub(crate) fn leaf_index(&self, x: &FeatureMatrix, row: usize) -> usize {
        fn walk(node: &Node, x: &FeatureMatrix, row: usize, offset: usize) -> usize {
            match node {
                Node::Leaf { .. } => offset,
                Node::Split { feature, rule, left, right } => {
                    let go_left = match (rule, x.feature(*feature)) {
                        (Rule::Threshold(t), Feature::Continuous(v)) => v[row] <= *t,
                        (Rule::Levels(set), Feature::Categorical { values, .. }) => set.contains(&values[row]),
                        _ => false,
                    };
                    if go_left {
                        walk(left, x, row, offset)
                    } else {
                        walk(right, x, row, offset + left.n_leaves())
                    }
                }
            }
        }
        walk(self, x, row, 0)
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_node: usize,
}

/// Per-unit inputs to tree growth: weights, residuals, Newton denominators
/// and the number of original rows each unit stands for.
pub(crate) struct Targets<'a> {
    pub count: &'a [usize],
    pub w: &'a [f64],
    pub resid: &'a [f64],
    pub hess: &'a [f64],
}

struct Best {
    gain: f64,
    feature: usize,
    /// Left bins (continuous: `0..=k` encoded as `[k]`; categorical: the set).
    left: Vec<u16>,
}

/// Grows a least-squares tree on the residuals of `rows` and sets each leaf
/// to the Newton step `Σ w r / Σ w p(1−p)`.
pub(crate) fn grow(bins: &[Binned], t: &Targets<'_>, rows: Vec<usize>, p: &GrowParams) -> Node {
    grow_node(bins, t, rows, p, 0)
}

fn grow_node(bins: &[Binned], t: &Targets<'_>, rows: Vec<usize>, p: &GrowParams, depth: usize) -> Node {
    let n_rows: usize = rows.iter().map(|&i| t.count[i]).sum();
    if depth >= p.max_depth || n_rows < 2 * p.min_node.max(1) {
        return leaf(t, &rows);
    }
    let Some(best) = best_split(bins, t, &rows, p.min_node) else {
        return leaf(t, &rows);
    };
    let b = &bins[best.feature];
    let goes_left = |code: u16| {
        if b.categorical {
            best.left.contains(&code)
        } else {
            code <= best.left[0]
        }
    };
    let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| goes_left(b.codes[i]));
    let rule = if b.categorical {
        let mut set: Vec<u32> = best.left.iter().map(|&c| u32::from(c)).collect();
        set.sort_unstable();
        Rule::Levels(set)
    } else {
        Rule::Threshold(b.cuts[best.left[0] as usize])
    };
    Node::Split {
        feature: best.feature,
        rule,
        left: Box::new(grow_node(bins, t, l, p, depth + 1)),
        right: Box::new(grow_node(bins, t, r, p, depth + 1)),
    }
}

fn leaf(t: &Targets<'_>, rows: &[usize]) -> Node {
    let (mut num, mut den) = (0.0, 0.0);
    for &i in rows {
        num += t.w[i] * t.resid[i];
        den += t.w[i] * t.hess[i];
    }
    let value = if den > 1e-300 { num / den } else { 0.0 };
    Node::Leaf { value }
}

#[derive(Clone, Copy, Default)]
struct Cell {
    s: f64,
    w: f64,
    n: usize,
}

fn best_split(bins: &[Binned], t: &Targets<'_>, rows: &[usize], min_node: usize) -> Option<Best> {
    let mut best: Option<Best> = None;
    let min_node = min_node.max(1);
    for (f, b) in bins.iter().enumerate() {
        let mut hist = vec![Cell::default(); b.n_bins];
        for &i in rows {
            let c = &mut hist[b.codes[i] as usize];
            c.s += t.w[i] * t.resid[i];
            c.w += t.w[i];
            c.n += t.count[i];
        }
        let tot = hist.iter().fold(Cell::default(), |a, c| Cell { s: a.s + c.s, w: a.w + c.w, n: a.n + c.n });
        if tot.w <= 0.0 {
            continue;
        }
        let parent = tot.s * tot.s / tot.w;
        let mut consider = |left: Cell, set: &dyn Fn() -> Vec<u16>| {
            let right = Cell { s: tot.s - left.s, w: tot.w - left.w, n: tot.n - left.n };
            if left.n < min_node || right.n < min_node || left.w <= 0.0 || right.w <= 0.0 {
                return;
            }
            let gain = left.s * left.s / left.w + right.s * right.s / right.w - parent;
            if gain > 1e-14 * tot.w && best.as_ref().is_none_or(|bb| gain > bb.gain) {
                best = Some(Best { gain, feature: f, left: set() });
            }
        };
        if !b.categorical {
            let mut acc = Cell::default();
            for k in 0..b.n_bins - 1 {
                acc = Cell { s: acc.s + hist[k].s, w: acc.w + hist[k].w, n: acc.n + hist[k].n };
                if hist[k].n == 0 {
                    continue;
                }
                consider(acc, &|| vec![k as u16]);
            }
        } else {
            let present: Vec<usize> = (0..b.n_bins).filter(|&k| hist[k].n > 0).collect();
            if present.len() < 2 {
                continue;
            }
            if present.len() <= MAX_SUBSET_LEVELS {
                // the last present level always goes right, so each split is seen once
                let m = present.len() - 1;
                for mask in 1u32..(1 << m) {
                    let mut acc = Cell::default();
                    for (bit, &k) in present[..m].iter().enumerate() {
                        if mask & (1 << bit) != 0 {
                            acc = Cell { s: acc.s + hist[k].s, w: acc.w + hist[k].w, n: acc.n + hist[k].n };
                        }
                    }
                    consider(acc, &|| {
                        (0..m).filter(|bit| mask & (1 << bit) != 0).map(|bit| present[bit] as u16).collect()
                    });
                }
            } else {
                let mut order = present.clone();
                let mean = |k: usize| if hist[k].w > 0.0 { hist[k].s / hist[k].w } else { 0.0 };
                order.sort_by(|&a, &b| mean(a).total_cmp(&mean(b)).then(a.cmp(&b)));
                let mut acc = Cell::default();
                for (pos, &k) in order[..order.len() - 1].iter().enumerate() {
                    acc = Cell { s: acc.s + hist[k].s, w: acc.w + hist[k].w, n: acc.n + hist[k].n };
                    consider(acc, &|| order[..=pos].iter().map(|&k| k as u16).collect());
                }
            }
        }
    }
    best
}
