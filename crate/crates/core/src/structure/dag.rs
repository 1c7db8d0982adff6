use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directed acyclic graph over named nodes. Every mutation keeps it acyclic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DagRecord", into = "DagRecord")]
pub struct Dag {
    nodes: Vec<String>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

/// JSON form: node list plus `[parent, child]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DagRecord {
    pub nodes: Vec<String>,
    pub edges: Vec<[String; 2]>,
}

impl TryFrom<DagRecord> for Dag {
    type Error = Error;

    fn try_from(rec: DagRecord) -> Result<Self> {
        let mut g = Dag::empty(rec.nodes)?;
        for [a, b] in &rec.edges {
            let (u, v) = (g.node(a)?, g.node(b)?);
            g.add_edge(u, v)?;
        }
        Ok(g)
    }
}

impl From<Dag> for DagRecord {
    fn from(g: Dag) -> Self {
        let edges = g
            .edges()
            .into_iter()
            .map(|(u, v)| [g.nodes[u].clone(), g.nodes[v].clone()])
            .collect();
        DagRecord {
            nodes: g.nodes,
            edges,
        }
    }
}

impl Dag {
    pub fn empty(nodes: Vec<String>) -> Result<Self> {
        for (i, n) in nodes.iter().enumerate() {
            if nodes[..i].contains(n) {
                return Err(Error::Graph(format!("duplicate node `{n}`")));
            }
        }
        let n = nodes.len();
        Ok(Dag {
            nodes,
            parents: vec![Vec::new(); n],
            children: vec![Vec::new(); n],
        })
    }

    pub fn new(nodes: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Dag::empty(nodes)?;
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn from_names(nodes: &[&str], edges: &[(&str, &str)]) -> Result<Self> {
        let mut g = Dag::empty(nodes.iter().map(|s| s.to_string()).collect())?;
        for (a, b) in edges {
            let (u, v) = (g.node(a)?, g.node(b)?);
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn name(&self, v: usize) -> &str {
        &self.nodes[v]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    pub fn node(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    /// Parents in ascending index order.
    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.parents[v].binary_search(&u).is_ok()
    }

    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.has_edge(u, v) || self.has_edge(v, u)
    }

    /// All edges sorted by (parent, child).
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = (0..self.n())
            .flat_map(|v| self.parents[v].iter().map(move |&u| (u, v)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn n_edges(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// True when a directed path leads from `from` to `to` (a node reaches itself).
    pub fn is_reachable(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.n()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(u) = stack.pop() {
            for &c in &self.children[u] {
                if c == to {
                    return true;
                }
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        false
    }

    fn check(&self, u: usize, v: usize) -> Result<()> {
        if u >= self.n() || v >= self.n() {
            return Err(Error::Graph(format!("edge ({u}, {v}) out of range")));
        }
        if u == v {
            return Err(Error::Graph(format!("self-loop on `{}`", self.nodes[u])));
        }
        Ok(())
    }

    /// Whether adding `u -> v` would close a directed cycle.
    pub fn creates_cycle(&self, u: usize, v: usize) -> bool {
        self.is_reachable(v, u)
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<()> {
        self.check(u, v)?;
        if self.has_edge(u, v) {
            return Err(Error::Graph(format!(
                "duplicate edge {} -> {}",
                self.nodes[u], self.nodes[v]
            )));
        }
        if self.creates_cycle(u, v) {
            return Err(Error::Graph(format!(
                "edge {} -> {} creates a cycle",
                self.nodes[u], self.nodes[v]
            )));
        }
        insert_sorted(&mut self.parents[v], u);
        insert_sorted(&mut self.children[u], v);
        Ok(())
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> bool {
        match self.parents[v].binary_search(&u) {
            Ok(i) => {
                self.parents[v].remove(i);
                let j = self.children[u].binary_search(&v).expect("child list in sync");
                self.children[u].remove(j);
                true
            }
            Err(_) => false,
        }
    }

    /// Whether `u -> v` can be turned into `v -> u` without a cycle.
    pub fn can_reverse(&self, u: usize, v: usize) -> bool {
        if !self.has_edge(u, v) {
            return false;
        }
        // a cycle appears iff another directed path u ~> v exists
        let mut seen = vec![false; self.n()];
        let mut stack: Vec<usize> = self.children[u].iter().copied().filter(|&c| c != v).collect();
        for &c in &stack {
            seen[c] = true;
        }
        while let Some(x) = stack.pop() {
            if x == v {
                return false;
            }
            for &c in &self.children[x] {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        true
    }

    pub fn reverse_edge(&mut self, u: usize, v: usize) -> Result<()> {
        if !self.has_edge(u, v) {
            return Err(Error::Graph(format!(
                "no edge {} -> {} to reverse",
                self.nodes[u], self.nodes[v]
            )));
        }
        if !self.can_reverse(u, v) {
            return Err(Error::Graph(format!(
                "reversing {} -> {} creates a cycle",
                self.nodes[u], self.nodes[v]
            )));
        }
        self.remove_edge(u, v);
        insert_sorted(&mut self.parents[u], v);
        insert_sorted(&mut self.children[v], u);
        Ok(())
    }

    /// Kahn's algorithm, smallest available index first.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: std::collections::BTreeSet<usize> =
            (0..self.n()).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.n());
        while let Some(&u) = ready.iter().next() {
            ready.remove(&u);
            order.push(u);
            for &c in &self.children[u] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        debug_assert_eq!(order.len(), self.n(), "graph is acyclic by construction");
        order
    }

    /// `mask[x]` is true for `v` and everything reachable from it.
    pub fn descendants(&self, v: usize) -> Vec<bool> {
        let mut mask = vec![false; self.n()];
        let mut queue = VecDeque::from([v]);
        mask[v] = true;
        while let Some(u) = queue.pop_front() {
            for &c in &self.children[u] {
                if !mask[c] {
                    mask[c] = true;
                    queue.push_back(c);
                }
            }
        }
        mask
    }

    /// `mask[x]` is true for every seed and every ancestor of a seed.
    pub fn ancestors_of(&self, seeds: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.n()];
        let mut stack: Vec<usize> = seeds.to_vec();
        for &s in seeds {
            mask[s] = true;
        }
        while let Some(u) = stack.pop() {
            for &p in &self.parents[u] {
                if !mask[p] {
                    mask[p] = true;
                    stack.push(p);
                }
            }
        }
        mask
    }

    /// Copy of the graph with every edge into `target` removed.
    pub fn mutilate(&self, target: usize) -> Dag {
        let mut g = self.clone();
        for p in self.parents[target].clone() {
            g.remove_edge(p, target);
        }
        g
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph G {\n");
        for n in &self.nodes {
            let _ = writeln!(s, "  \"{}\";", n.replace('"', "\\\""));
        }
        for (u, v) in self.edges() {
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\";",
                self.nodes[u].replace('"', "\\\""),
                self.nodes[v].replace('"', "\\\"")
            );
        }
        s.push_str("}\n");
        s
    }
}

fn insert_sorted(v: &mut Vec<usize>, x: usize) {
    if let Err(i) = v.binary_search(&x) {
        v.insert(i, x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_cycles_self_loops_and_duplicates() {
        let mut g = Dag::from_names(&["A", "B", "C"], &[("A", "B"), ("B", "C")]).unwrap();
        assert!(g.add_edge(2, 0).is_err());
        assert!(g.add_edge(1, 1).is_err());
        assert!(g.add_edge(0, 1).is_err());
        assert!(g.add_edge(0, 2).is_ok());
        // A->B->C plus A->C: reversing A->C would close A->B->C->A
        assert!(!g.can_reverse(0, 2));
        assert!(g.reverse_edge(0, 2).is_err());
        assert!(g.can_reverse(1, 2));
    }

    #[test]
    fn json_round_trip() {
        let g = Dag::from_names(&["A", "B", "C"], &[("A", "B"), ("C", "B")]).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"nodes":["A","B","C"],"edges":[["A","B"],["C","B"]]}"#);
        let back: Dag = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        let cyclic = r#"{"nodes":["A","B"],"edges":[["A","B"],["B","A"]]}"#;
        assert!(serde_json::from_str::<Dag>(cyclic).is_err());
    }

    #[test]
    fn topological_order_respects_edges() {
        let g = Dag::from_names(&["A", "B", "C", "D"], &[("D", "A"), ("A", "C"), ("B", "C")]).unwrap();
        let order = g.topological_order();
        let pos = |v: usize| order.iter().position(|&x| x == v).unwrap();
        for (u, v) in g.edges() {
            assert!(pos(u) < pos(v));
        }
    }

    #[test]
    fn mutilation_removes_only_inbound_edges() {
        let g = Dag::from_names(&["ADT", "PMR", "S"], &[("ADT", "PMR"), ("PMR", "S"), ("ADT", "S")]).unwrap();
        let m = g.mutilate(1);
        assert_eq!(m.edges(), vec![(0, 2), (1, 2)]);
        assert_eq!(m.mutilate(1), m);
        assert_eq!(g.mutilate(0), g);
    }

    #[test]
    fn dot_output() {
        let g = Dag::from_names(&["A", "B"], &[("A", "B")]).unwrap();
        assert_eq!(g.to_dot(), "digraph G {\n  \"A\";\n  \"B\";\n  \"A\" -> \"B\";\n}\n");
    }
}
