use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structure::citest::g2_test;
use crate::structure::{DiscreteData, Pdag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcConfig {
    /// Significance level of the G² test.
    pub alpha: f64,
    /// Largest conditioning set tried; `None` means unbounded.
    pub max_cond: Option<usize>,
    /// A test is skipped (and dependence assumed) when there are fewer than
    /// this many rows per contingency cell.
    pub min_rows_per_cell: f64,
}

impl Default for PcConfig {
    fn default() -> Self {
        PcConfig {
            alpha: 0.01,
            max_cond: None,
            min_rows_per_cell: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PcOutput {
    pub pdag: Pdag,
    /// Separating set for each removed pair `(i, j)`, `i < j`.
    pub sepsets: BTreeMap<(usize, usize), Vec<usize>>,
    pub tests_run: usize,
    pub tests_skipped: usize,
    pub warnings: Vec<String>,
}

pub fn pc_learn(data: &DiscreteData, alpha: f64) -> Result<PcOutput> {
    pc_learn_with(
        data,
        &PcConfig {
            alpha,
            ..PcConfig::default()
        },
    )
}

/// PC search: order-independent ("stable") skeleton phase, then collider
/// orientation and Meek's rules 1-3.
pub fn pc_learn_with(data: &DiscreteData, cfg: &PcConfig) -> Result<PcOutput> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::Invalid(format!("alpha must lie in (0, 1), got {}", cfg.alpha)));
    }
    let n = data.n_vars();
    let mut adj = vec![vec![true; n]; n];
    for (i, row) in adj.iter_mut().enumerate() {
        row[i] = false;
    }
    let mut sepsets = BTreeMap::new();
    let (mut run, mut skipped) = (0usize, 0usize);
    let rows = data.n_rows() as f64;

    let mut level = 0usize;
    loop {
        if cfg.max_cond.is_some_and(|m| level > m) {
            break;
        }
        let snapshot = adj.clone();
        let neighbours = |x: usize, y: usize| -> Vec<usize> {
            (0..n).filter(|&k| k != y && snapshot[x][k]).collect()
        };
        let mut any_candidate = false;
        for x in 0..n {
            for y in x + 1..n {
                if !adj[x][y] {
                    continue;
                }
                let mut found = None;
                'sides: for side in [neighbours(x, y), neighbours(y, x)] {
                    if side.len() < level {
                        continue;
                    }
                    any_candidate = true;
                    for subset in Combinations::new(side.len(), level) {
                        let z: Vec<usize> = subset.iter().map(|&k| side[k]).collect();
                        let cells = (data.cards()[x] * data.cards()[y]) as f64
                            * z.iter().map(|&v| data.cards()[v] as f64).product::<f64>();
                        if rows < cfg.min_rows_per_cell * cells {
                            skipped += 1;
                            continue;
                        }
                        run += 1;
                        let r = g2_test(data, x, y, &z)?;
                        if r.p_value > cfg.alpha {
                            found = Some(z);
                            break 'sides;
                        }
                    }
                }
                if let Some(z) = found {
                    adj[x][y] = false;
                    adj[y][x] = false;
                    sepsets.insert((x, y), z);
                }
            }
        }
        if !any_candidate {
            break;
        }
        level += 1;
    }

    let mut warnings = Vec::new();
    if run == 0 && skipped > 0 {
        warnings.push(format!(
            "all {skipped} independence tests skipped for lack of data; returning the complete graph"
        ));
    } else if skipped > 0 {
        warnings.push(format!("{skipped} independence tests skipped for lack of data"));
    }

    let mut pdag = Pdag::empty(data.names().to_vec());
    for x in 0..n {
        for y in x + 1..n {
            if adj[x][y] {
                pdag.add_undirected(x, y)?;
            }
        }
    }
    orient_colliders(&mut pdag, &sepsets);
    apply_meek_rules(&mut pdag);
    Ok(PcOutput {
        pdag,
        sepsets,
        tests_run: run,
        tests_skipped: skipped,
        warnings,
    })
}

fn orient_colliders(p: &mut Pdag, sepsets: &BTreeMap<(usize, usize), Vec<usize>>) {
    let n = p.n();
    for a in 0..n {
        for b in a + 1..n {
            if p.is_adjacent(a, b) {
                continue;
            }
            let Some(sep) = sepsets.get(&(a, b)) else {
                continue;
            };
            for c in 0..n {
                if c == a || c == b || !p.is_adjacent(a, c) || !p.is_adjacent(b, c) || sep.contains(&c) {
                    continue;
                }
                // leave an edge alone if it was already oriented the other way
                let ok_a = p.is_undirected(a, c) || p.is_directed(a, c);
                let ok_b = p.is_undirected(b, c) || p.is_directed(b, c);
                if ok_a && ok_b {
                    p.orient(a, c);
                    p.orient(b, c);
                }
            }
        }
    }
}

/// Meek's orientation rules 1-3, applied to a fixed point.
pub fn apply_meek_rules(p: &mut Pdag) {
    let n = p.n();
    loop {
        let mut changed = false;
        for a in 0..n {
            for b in 0..n {
                if !p.is_undirected(a, b) {
                    continue;
                }
                // R1: c -> a - b, c and b non-adjacent  =>  a -> b
                let r1 = (0..n).any(|c| p.is_directed(c, a) && !p.is_adjacent(c, b) && c != b);
                // R2: a -> c -> b and a - b  =>  a -> b
                let r2 = (0..n).any(|c| p.is_directed(a, c) && p.is_directed(c, b));
                // R3: a - c -> b, a - d -> b, c and d non-adjacent  =>  a -> b
                let r3 = {
                    let cs: Vec<usize> = (0..n)
                        .filter(|&c| p.is_undirected(a, c) && p.is_directed(c, b))
                        .collect();
                    cs.iter().enumerate().any(|(i, &c)| {
                        cs[i + 1..].iter().any(|&d| !p.is_adjacent(c, d))
                    })
                };
                if r1 || r2 || r3 {
                    p.orient(a, b);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// Index subsets of size `k` from `0..n` in lexicographic order.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}
