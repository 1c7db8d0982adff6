use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structure::{BdeuScorer, Dag, DiscreteData};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub t0: f64,
    /// Geometric cooling factor applied after every step.
    pub cooling: f64,
    pub steps: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            t0: 1.0,
            cooling: 0.999,
            steps: 50_000,
        }
    }
}

/// Background knowledge for the search, as `(parent, child)` node indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeConstraints {
    pub forbidden: Vec<(usize, usize)>,
    pub required: Vec<(usize, usize)>,
}

impl EdgeConstraints {
    pub fn from_names(g: &Dag, forbidden: &[(String, String)], required: &[(String, String)]) -> Result<Self> {
        let map = |list: &[(String, String)]| -> Result<Vec<(usize, usize)>> {
            list.iter().map(|(a, b)| Ok((g.node(a)?, g.node(b)?))).collect()
        };
        Ok(EdgeConstraints {
            forbidden: map(forbidden)?,
            required: map(required)?,
        })
    }

    fn forbids(&self, u: usize, v: usize) -> bool {
        self.forbidden.contains(&(u, v))
    }

    fn requires(&self, u: usize, v: usize) -> bool {
        self.required.contains(&(u, v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredNetwork {
    pub dag: Dag,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutput {
    /// Distinct networks, best first.
    pub networks: Vec<ScoredNetwork>,
    /// Best score seen after each step; entry 0 is the initial graph.
    pub best_trace: Vec<f64>,
    pub accepted: usize,
}

/// Simulated annealing over DAGs scored by BDeu.
///
/// Proposals add, delete or reverse one edge; moves that would create a
/// cycle, break a constraint or exceed the parent-configuration cap are
/// rejected. The `k` best distinct edge sets visited are kept.
pub fn sa_search(
    data: &DiscreteData,
    init: &Dag,
    k: usize,
    schedule: &Schedule,
    seed: u64,
    ess: f64,
    constraints: &EdgeConstraints,
) -> Result<SearchOutput> {
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    if !(schedule.t0 > 0.0) || !(schedule.cooling > 0.0 && schedule.cooling < 1.0) {
        return Err(Error::Invalid(format!(
            "invalid schedule: t0 = {}, cooling = {}",
            schedule.t0, schedule.cooling
        )));
    }
    for &(u, v) in &constraints.required {
        if !init.has_edge(u, v) {
            return Err(Error::Invalid("initial graph lacks a required edge".into()));
        }
    }
    let data = data.aligned_to(init)?;
    let mut scorer = BdeuScorer::new(&data, ess)?;
    let n = init.n();
    let mut g = init.clone();
    let mut fam: Vec<f64> = (0..n)
        .map(|v| scorer.family(v, g.parents(v)))
        .collect::<Result<_>>()?;
    let total = |fam: &[f64]| fam.iter().sum::<f64>();

    let mut top = TopK::new(k);
    top.offer(&g, total(&fam));
    let mut best = total(&fam);
    let mut trace = Vec::with_capacity(schedule.steps + 1);
    trace.push(best);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut temp = schedule.t0;
    let mut accepted = 0;
    for _ in 0..schedule.steps {
        if let Some(mv) = propose(&g, &mut rng, constraints) {
            if let Some((delta, new_fams)) = evaluate(&g, mv, &mut scorer, &fam) {
                let u01: f64 = rng.random();
                if delta >= 0.0 || u01 < (delta / temp).exp() {
                    apply(&mut g, mv);
                    for (v, s) in new_fams {
                        fam[v] = s;
                    }
                    accepted += 1;
                    let s = total(&fam);
                    top.offer(&g, s);
                    if s > best {
                        best = s;
                    }
                }
            }
        }
        temp *= schedule.cooling;
        trace.push(best);
    }
    Ok(SearchOutput {
        networks: top.into_sorted(),
        best_trace: trace,
        accepted,
    })
}

#[derive(Debug, Clone, Copy)]
enum Move {
    Add(usize, usize),
    Delete(usize, usize),
    Reverse(usize, usize),
}

fn propose(g: &Dag, rng: &mut ChaCha8Rng, c: &EdgeConstraints) -> Option<Move> {
    let n = g.n();
    if n < 2 {
        return None;
    }
    match rng.random_range(0..3u8) {
        0 => {
            let u = rng.random_range(0..n);
            let mut v = rng.random_range(0..n - 1);
            if v >= u {
                v += 1;
            }
            if g.adjacent(u, v) || c.forbids(u, v) || g.creates_cycle(u, v) {
                return None;
            }
            Some(Move::Add(u, v))
        }
        kind => {
            let edges = g.edges();
            if edges.is_empty() {
                return None;
            }
            let (u, v) = edges[rng.random_range(0..edges.len())];
            if c.requires(u, v) {
                return None;
            }
            if kind == 1 {
                Some(Move::Delete(u, v))
            } else if !c.forbids(v, u) && g.can_reverse(u, v) {
                Some(Move::Reverse(u, v))
            } else {
                None
            }
        }
    }
}

fn with(parents: &[usize], add: usize) -> Vec<usize> {
    let mut p = parents.to_vec();
    if let Err(i) = p.binary_search(&add) {
        p.insert(i, add);
    }
    p
}

fn without(parents: &[usize], drop: usize) -> Vec<usize> {
    parents.iter().copied().filter(|&x| x != drop).collect()
}

/// Score change and the new family scores, or `None` if a family exceeds the cap.
fn evaluate(
    g: &Dag,
    mv: Move,
    scorer: &mut BdeuScorer<'_>,
    fam: &[f64],
) -> Option<(f64, Vec<(usize, f64)>)> {
    let mut changes = Vec::with_capacity(2);
    match mv {
        Move::Add(u, v) => changes.push((v, scorer.family(v, &with(g.parents(v), u)).ok()?)),
        Move::Delete(u, v) => changes.push((v, scorer.family(v, &without(g.parents(v), u)).ok()?)),
        Move::Reverse(u, v) => {
            changes.push((v, scorer.family(v, &without(g.parents(v), u)).ok()?));
            changes.push((u, scorer.family(u, &with(g.parents(u), v)).ok()?));
        }
    }
    let delta = changes.iter().map(|&(v, s)| s - fam[v]).sum();
    Some((delta, changes))
}

fn apply(g: &mut Dag, mv: Move) {
    match mv {
        Move::Add(u, v) => g.add_edge(u, v).expect("move was validated"),
        Move::Delete(u, v) => {
            g.remove_edge(u, v);
        }
        Move::Reverse(u, v) => g.reverse_edge(u, v).expect("move was validated"),
    }
}

struct TopK {
    k: usize,
    items: Vec<ScoredNetwork>,
    keys: HashSet<Vec<(usize, usize)>>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK {
            k,
            items: Vec::new(),
            keys: HashSet::new(),
        }
    }

    fn offer(&mut self, g: &Dag, score: f64) {
        if self.items.len() == self.k {
            let worst = self.items.last().expect("k >= 1").score;
            if score <= worst {
                return;
            }
        }
        let key = g.edges();
        if self.keys.contains(&key) {
            return;
        }
        let pos = self
            .items
            .iter()
            .position(|it| score > it.score || (score == it.score && key < it.dag.edges()))
            .unwrap_or(self.items.len());
        self.items.insert(pos, ScoredNetwork { dag: g.clone(), score });
        self.keys.insert(key);
        if self.items.len() > self.k {
            let dropped = self.items.pop().expect("non-empty");
            self.keys.remove(&dropped.dag.edges());
        }
    }

    fn into_sorted(self) -> Vec<ScoredNetwork> {
        self.items
    }
}
