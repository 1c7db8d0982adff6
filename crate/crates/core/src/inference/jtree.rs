use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::inference::factor::Factor;
use crate::inference::CptSet;
use crate::structure::Dag;

/// Default cap on the number of states of any clique.
pub const DEFAULT_CLIQUE_CAP: usize = 10_000_000;

/// Clique tree for exact inference.
///
/// Built by moralizing the DAG, triangulating with the min-fill heuristic
/// (ties to the lowest node index), keeping maximal elimination cliques and
/// joining them with a maximum-weight spanning tree on separator sizes.
/// Calibration is two-pass sum-product message passing.
#[derive(Debug, Clone)]
pub struct JunctionTree {
    names: Vec<String>,
    cards: Vec<usize>,
    cliques: Vec<Vec<usize>>,
    /// Tree edges `(a, b, separator)`.
    edges: Vec<(usize, usize, Vec<usize>)>,
    /// Adjacency: `(neighbour clique, edge index)`.
    adjacency: Vec<Vec<(usize, usize)>>,
    potentials: Vec<Factor>,
    calibrated: Option<Calibration>,
}

#[derive(Debug, Clone)]
struct Calibration {
    evidence: Vec<(usize, usize)>,
    beliefs: Vec<Factor>,
}

impl JunctionTree {
    pub fn build(g: &Dag, cpts: &CptSet) -> Result<Self> {
        Self::build_with_cap(g, cpts, DEFAULT_CLIQUE_CAP)
    }

    pub fn build_with_cap(g: &Dag, cpts: &CptSet, cap: usize) -> Result<Self> {
        let n = g.n();
        if cpts.len() != n {
            return Err(Error::Invalid("graph and tables disagree on node count".into()));
        }
        for v in 0..n {
            if cpts.node(v).parents.as_slice() != g.parents(v) {
                return Err(Error::Invalid(format!(
                    "parents of `{}` differ between graph and tables",
                    g.name(v)
                )));
            }
        }
        let cards = cpts.cards();

        let mut adj = vec![vec![false; n]; n];
        for v in 0..n {
            let pa = g.parents(v);
            for (i, &p) in pa.iter().enumerate() {
                adj[p][v] = true;
                adj[v][p] = true;
                for &q in &pa[i + 1..] {
                    adj[p][q] = true;
                    adj[q][p] = true;
                }
            }
        }

        let mut alive = vec![true; n];
        let mut elim_cliques: Vec<Vec<usize>> = Vec::with_capacity(n);
        for _ in 0..n {
            let mut best: Option<(usize, usize)> = None;
            for v in (0..n).filter(|&v| alive[v]) {
                let nb: Vec<usize> = (0..n).filter(|&u| alive[u] && adj[v][u]).collect();
                let mut fill = 0;
                for (i, &a) in nb.iter().enumerate() {
                    fill += nb[i + 1..].iter().filter(|&&b| !adj[a][b]).count();
                }
                if best.is_none_or(|(_, f)| fill < f) {
                    best = Some((v, fill));
                }
            }
            let (v, _) = best.expect("a live node remains");
            let nb: Vec<usize> = (0..n).filter(|&u| alive[u] && adj[v][u]).collect();
            let mut clique = nb.clone();
            clique.push(v);
            clique.sort_unstable();
            let size: u128 = clique.iter().map(|&u| cards[u] as u128).product();
            if size > cap as u128 {
                return Err(Error::StateSpace { size, cap: cap as u128 });
            }
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    adj[a][b] = true;
                    adj[b][a] = true;
                }
            }
            alive[v] = false;
            elim_cliques.push(clique);
        }

        let mut cliques: Vec<Vec<usize>> = Vec::new();
        for (i, c) in elim_cliques.iter().enumerate() {
            let dominated = elim_cliques.iter().enumerate().any(|(j, d)| {
                j != i && is_subset(c, d) && (c.len() < d.len() || j < i)
            });
            if !dominated {
                cliques.push(c.clone());
            }
        }

        let m = cliques.len();
        let mut candidates = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                let sep = intersect(&cliques[i], &cliques[j]);
                candidates.push((sep.len(), i, j, sep));
            }
        }
        candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut uf: Vec<usize> = (0..m).collect();
        let mut edges = Vec::new();
        for (_, i, j, sep) in candidates {
            let (ri, rj) = (find(&mut uf, i), find(&mut uf, j));
            if ri != rj {
                uf[ri] = rj;
                edges.push((i, j, sep));
            }
        }
        let mut adjacency = vec![Vec::new(); m];
        for (e, (a, b, _)) in edges.iter().enumerate() {
            adjacency[*a].push((*b, e));
            adjacency[*b].push((*a, e));
        }

        let mut potentials: Vec<Factor> = cliques.iter().map(|c| Factor::ones(c, &cards)).collect();
        for v in 0..n {
            let mut family = g.parents(v).to_vec();
            family.push(v);
            family.sort_unstable();
            let home = cliques
                .iter()
                .position(|c| is_subset(&family, c))
                .expect("every family lies inside a clique of the triangulated moral graph");
            potentials[home] = potentials[home].product(&Factor::from_cpt(cpts, v), n);
        }

        Ok(JunctionTree {
            names: g.nodes().to_vec(),
            cards,
            cliques,
            edges,
            adjacency,
            potentials,
            calibrated: None,
        })
    }

    pub fn cliques(&self) -> &[Vec<usize>] {
        &self.cliques
    }

    /// Tree edges as `(clique, clique, separator)`.
    pub fn separators(&self) -> &[(usize, usize, Vec<usize>)] {
        &self.edges
    }

    pub fn is_calibrated(&self) -> bool {
        self.calibrated.is_some()
    }

    /// Every variable's cliques form a connected subtree.
    pub fn running_intersection_holds(&self) -> bool {
        (0..self.names.len()).all(|v| {
            let holders: Vec<usize> = (0..self.cliques.len())
                .filter(|&c| self.cliques[c].contains(&v))
                .collect();
            let Some(&start) = holders.first() else {
                return true;
            };
            let mut seen = vec![false; self.cliques.len()];
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            let mut count = 1;
            while let Some(c) = queue.pop_front() {
                for &(d, _) in &self.adjacency[c] {
                    if !seen[d] && self.cliques[d].contains(&v) {
                        seen[d] = true;
                        count += 1;
                        queue.push_back(d);
                    }
                }
            }
            count == holders.len()
        })
    }

    /// Runs message passing with `evidence` (`(node, state)` pairs) and keeps
    /// the calibrated beliefs.
    pub fn calibrate(&mut self, evidence: &[(usize, usize)]) -> Result<()> {
        let beliefs = self.propagate(evidence)?;
        self.calibrated = Some(Calibration {
            evidence: evidence.to_vec(),
            beliefs,
        });
        Ok(())
    }

    /// Normalized marginal of the variables `onto` (sorted, inside one clique)
    /// as seen from clique `c`, after calibration.
    pub fn clique_marginal(&self, c: usize, onto: &[usize]) -> Option<Vec<f64>> {
        let cal = self.calibrated.as_ref()?;
        let mut f = cal.beliefs[c].marginalize_onto(onto, self.names.len());
        f.normalize();
        Some(f.values)
    }

    /// Exact `P(query | evidence)` as a distribution over the query's levels.
    pub fn marginal(&self, query: usize, evidence: &[(usize, usize)]) -> Result<Vec<f64>> {
        if query >= self.names.len() {
            return Err(Error::Invalid(format!("query node {query} out of range")));
        }
        if evidence.iter().any(|&(v, _)| v == query) {
            return Err(Error::Invalid(format!(
                "query `{}` is also in the evidence",
                self.names[query]
            )));
        }
        let owned;
        let beliefs = match &self.calibrated {
            Some(cal) if cal.evidence == evidence => &cal.beliefs,
            _ => {
                owned = self.propagate(evidence)?;
                &owned
            }
        };
        let c = (0..self.cliques.len())
            .filter(|&c| self.cliques[c].contains(&query))
            .min_by_key(|&c| self.cliques[c].len())
            .expect("every node sits in some clique");
        let mut f = beliefs[c].marginalize_onto(&[query], self.names.len());
        if f.normalize() <= 0.0 {
            return Err(Error::ZeroEvidence);
        }
        Ok(f.values)
    }

    fn propagate(&self, evidence: &[(usize, usize)]) -> Result<Vec<Factor>> {
        let n = self.names.len();
        let m = self.cliques.len();
        let mut pots = self.potentials.clone();
        for &(v, s) in evidence {
            if v >= n || s >= self.cards[v] {
                return Err(Error::Invalid(format!("evidence ({v}, {s}) out of range")));
            }
            let c = self
                .cliques
                .iter()
                .position(|c| c.contains(&v))
                .expect("every node sits in some clique");
            pots[c] = pots[c].product(&Factor::indicator(v, self.cards[v], s), n);
        }

        // BFS from clique 0 gives a parent for every other clique
        let mut order = Vec::with_capacity(m);
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; m];
        let mut seen = vec![false; m];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(c) = queue.pop_front() {
            order.push(c);
            for &(d, e) in &self.adjacency[c] {
                if !seen[d] {
                    seen[d] = true;
                    parent[d] = Some((c, e));
                    queue.push_back(d);
                }
            }
        }

        // messages[e][0]: from edges[e].0 to edges[e].1; [1]: the reverse
        let mut messages: Vec<[Option<Factor>; 2]> = vec![[None, None]; self.edges.len()];
        let slot = |e: usize, from: usize| usize::from(self.edges[e].0 != from);

        let send = |from: usize, to_edge: usize, messages: &Vec<[Option<Factor>; 2]>| -> Result<Factor> {
            let mut f = pots[from].clone();
            for &(d, e) in &self.adjacency[from] {
                if e == to_edge {
                    continue;
                }
                let msg = messages[e][slot(e, d)].as_ref().expect("inbound message ready");
                f = f.product(msg, n);
            }
            let mut out = f.marginalize_onto(&self.edges[to_edge].2, n);
            if out.normalize() <= 0.0 {
                return Err(Error::ZeroEvidence);
            }
            Ok(out)
        };

        for &c in order.iter().rev() {
            if let Some((_, e)) = parent[c] {
                let msg = send(c, e, &messages)?;
                messages[e][slot(e, c)] = Some(msg);
            }
        }
        for &c in &order {
            for &(d, e) in &self.adjacency[c] {
                if parent[d].is_some_and(|(p, _)| p == c) {
                    let msg = send(c, e, &messages)?;
                    messages[e][slot(e, c)] = Some(msg);
                }
            }
        }

        let mut beliefs = Vec::with_capacity(m);
        for (c, pot) in pots.iter().enumerate() {
            let mut b = pot.clone();
            for &(d, e) in &self.adjacency[c] {
                b = b.product(messages[e][slot(e, d)].as_ref().expect("all messages sent"), n);
            }
            if b.normalize() <= 0.0 {
                return Err(Error::ZeroEvidence);
            }
            beliefs.push(b);
        }
        Ok(beliefs)
    }
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.contains(x))
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|x| b.contains(x)).collect()
}

fn find(uf: &mut [usize], mut x: usize) -> usize {
    while uf[x] != x {
        uf[x] = uf[uf[x]];
        x = uf[x];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::NodeCpt;

    pub(crate) fn chain_ab(p_a: f64, p_b1_a1: f64, p_b1_a0: f64) -> (Dag, CptSet) {
        let g = Dag::from_names(&["A", "B"], &[("A", "B")]).unwrap();
        let lv = || vec!["0".to_string(), "1".to_string()];
        let cpts = CptSet::new(
            &g,
            vec![
                NodeCpt { name: "A".into(), levels: lv(), parents: vec![], probs: vec![1.0 - p_a, p_a], posterior: None },
                NodeCpt {
                    name: "B".into(),
                    levels: lv(),
                    parents: vec![0],
                    probs: vec![1.0 - p_b1_a0, p_b1_a0, 1.0 - p_b1_a1, p_b1_a1],
                    posterior: None,
                },
            ],
        )
        .unwrap();
        (g, cpts)
    }

    #[test]
    fn chain_marginals() {
        let (g, cpts) = chain_ab(0.3, 0.9, 0.2);
        let jt = JunctionTree::build(&g, &cpts).unwrap();
        let pb = jt.marginal(1, &[]).unwrap();
        assert!((pb[1] - 0.41).abs() < 1e-12);
        let pb_a1 = jt.marginal(1, &[(0, 1)]).unwrap();
        assert!((pb_a1[1] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn forced_child() {
        let (g, cpts) = chain_ab(0.3, 1.0, 1.0);
        let jt = JunctionTree::build(&g, &cpts).unwrap();
        assert!((jt.marginal(1, &[]).unwrap()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_chain_cliques() {
        let g = Dag::from_names(&["A", "B", "C"], &[("A", "B"), ("B", "C")]).unwrap();
        let lv = || vec!["0".to_string(), "1".to_string()];
        let cpts = CptSet::new(
            &g,
            vec![
                NodeCpt { name: "A".into(), levels: lv(), parents: vec![], probs: vec![0.4, 0.6], posterior: None },
                NodeCpt { name: "B".into(), levels: lv(), parents: vec![0], probs: vec![0.1, 0.9, 0.7, 0.3], posterior: None },
                NodeCpt { name: "C".into(), levels: lv(), parents: vec![1], probs: vec![0.5, 0.5, 0.2, 0.8], posterior: None },
            ],
        )
        .unwrap();
        let mut jt = JunctionTree::build(&g, &cpts).unwrap();
        let mut cl = jt.cliques().to_vec();
        cl.sort();
        assert_eq!(cl, vec![vec![0, 1], vec![1, 2]]);
        assert_eq!(jt.separators().len(), 1);
        assert_eq!(jt.separators()[0].2, vec![1]);
        assert!(jt.running_intersection_holds());
        jt.calibrate(&[(2, 1)]).unwrap();
        let (a, b, sep) = jt.separators()[0].clone();
        let (ma, mb) = (jt.clique_marginal(a, &sep).unwrap(), jt.clique_marginal(b, &sep).unwrap());
        for (x, y) in ma.iter().zip(&mb) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn single_node_tree() {
        let g = Dag::from_names(&["A"], &[]).unwrap();
        let cpts = CptSet::new(
            &g,
            vec![NodeCpt { name: "A".into(), levels: vec!["x".into(), "y".into(), "z".into()], parents: vec![], probs: vec![0.2, 0.3, 0.5], posterior: None }],
        )
        .unwrap();
        let jt = JunctionTree::build(&g, &cpts).unwrap();
        assert_eq!(jt.cliques(), &[vec![0]]);
        assert_eq!(jt.marginal(0, &[]).unwrap(), vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn zero_evidence_and_bad_queries() {
        let (g, cpts) = chain_ab(0.3, 1.0, 1.0);
        let jt = JunctionTree::build(&g, &cpts).unwrap();
        assert!(matches!(jt.marginal(0, &[(1, 0)]), Err(Error::ZeroEvidence)));
        assert!(jt.marginal(0, &[(0, 1)]).is_err());
    }

    #[test]
    fn clique_cap() {
        let (g, cpts) = chain_ab(0.3, 0.9, 0.2);
        assert!(matches!(JunctionTree::build_with_cap(&g, &cpts, 3), Err(Error::StateSpace { .. })));
    }
}
