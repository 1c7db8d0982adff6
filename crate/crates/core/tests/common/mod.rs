#![allow(dead_code)]

use causal_compare::inference::CptSet;
use causal_compare::structure::{Dag, DiscreteData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ancestral sample of `n` rows from a network.
pub fn sample_network(g: &Dag, cpts: &CptSet, n: usize, seed: u64) -> DiscreteData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = g.topological_order();
    let k = g.n();
    let mut cols = vec![Vec::with_capacity(n); k];
    let mut states = vec![0usize; k];
    for _ in 0..n {
        for &v in &order {
            let node = cpts.node(v);
            let row = node.row(cpts.parent_config(v, &states));
            let u: f64 = rng.random();
            let mut cum = 0.0;
            states[v] = row.len() - 1;
            for (s, &p) in row.iter().enumerate() {
                cum += p;
                if u < cum {
                    states[v] = s;
                    break;
                }
            }
        }
        for v in 0..k {
            cols[v].push(states[v] as u32);
        }
    }
    DiscreteData::from_columns(g.nodes().to_vec(), cpts.cards(), cols).unwrap()
}

/// Every subset of `items`, smallest first.
pub fn subsets(items: &[usize]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0u32..1 << items.len())
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect();
    out.sort_by_key(Vec::len);
    out
}

/// Skeleton and v-structures, which identify a Markov equivalence class.
pub fn equivalence_key(g: &Dag) -> (Vec<(usize, usize)>, Vec<(usize, usize, usize)>) {
    let mut skeleton: Vec<(usize, usize)> = g.edges().iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
    skeleton.sort_unstable();
    let mut vs = Vec::new();
    for c in 0..g.n() {
        let ps = g.parents(c);
        for (i, &a) in ps.iter().enumerate() {
            for &b in &ps[i + 1..] {
                if !g.adjacent(a, b) {
                    vs.push((a.min(b), c, a.max(b)));
                }
            }
        }
    }
    vs.sort_unstable();
    (skeleton, vs)
}

/// All DAGs on `n` labelled nodes (small `n` only).
pub fn all_dags(names: &[&str]) -> Vec<Dag> {
    let n = names.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut out = Vec::new();
    // Each unordered pair: absent, i -> j, or j -> i.
    let total = 3usize.pow(pairs.len() as u32);
    for mut code in 0..total {
        let mut edges = Vec::new();
        for &(i, j) in &pairs {
            match code % 3 {
                1 => edges.push((i, j)),
                2 => edges.push((j, i)),
                _ => {}
            }
            code /= 3;
        }
        let nodes: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        if let Ok(g) = Dag::new(nodes, &edges) {
            out.push(g);
        }
    }
    out
}
