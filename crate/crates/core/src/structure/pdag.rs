use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structure::Dag;

/// Partially directed graph: the output of constraint-based search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pdag {
    nodes: Vec<String>,
    /// `dir[i][j]` means `i -> j`.
    dir: Vec<Vec<bool>>,
    /// Symmetric; `und[i][j]` means `i - j`.
    und: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PdagRecord {
    pub nodes: Vec<String>,
    pub directed: Vec<[String; 2]>,
    pub undirected: Vec<[String; 2]>,
}

impl Pdag {
    pub fn empty(nodes: Vec<String>) -> Self {
        let n = nodes.len();
        Pdag {
            nodes,
            dir: vec![vec![false; n]; n],
            und: vec![vec![false; n]; n],
        }
    }

    /// Complete undirected graph.
    pub fn complete(nodes: Vec<String>) -> Self {
        let mut p = Pdag::empty(nodes);
        let n = p.n();
        for i in 0..n {
            for j in 0..n {
                p.und[i][j] = i != j;
            }
        }
        p
    }

    pub fn from_dag(g: &Dag) -> Self {
        let mut p = Pdag::empty(g.nodes().to_vec());
        for (u, v) in g.edges() {
            p.dir[u][v] = true;
        }
        p
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.und[i][j] || self.dir[i][j] || self.dir[j][i]
    }

    pub fn is_undirected(&self, i: usize, j: usize) -> bool {
        self.und[i][j]
    }

    pub fn is_directed(&self, i: usize, j: usize) -> bool {
        self.dir[i][j]
    }

    pub fn adjacents(&self, i: usize) -> Vec<usize> {
        (0..self.n()).filter(|&j| self.is_adjacent(i, j)).collect()
    }

    pub fn add_undirected(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j || self.is_adjacent(i, j) {
            return Err(Error::Graph(format!("cannot add {} - {}", self.nodes[i], self.nodes[j])));
        }
        self.und[i][j] = true;
        self.und[j][i] = true;
        Ok(())
    }

    pub fn add_directed(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j || self.is_adjacent(i, j) {
            return Err(Error::Graph(format!("cannot add {} -> {}", self.nodes[i], self.nodes[j])));
        }
        self.dir[i][j] = true;
        Ok(())
    }

    pub fn remove_adjacency(&mut self, i: usize, j: usize) {
        self.und[i][j] = false;
        self.und[j][i] = false;
        self.dir[i][j] = false;
        self.dir[j][i] = false;
    }

    /// Turns `i - j` into `i -> j`; returns false if the edge was not undirected.
    pub fn orient(&mut self, i: usize, j: usize) -> bool {
        if !self.und[i][j] {
            return false;
        }
        self.und[i][j] = false;
        self.und[j][i] = false;
        self.dir[i][j] = true;
        true
    }

    /// Undirected skeleton as sorted `(i, j)` pairs with `i < j`.
    pub fn skeleton(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n() {
            for j in i + 1..self.n() {
                if self.is_adjacent(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n() {
            for j in 0..self.n() {
                if self.dir[i][j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        self.skeleton()
            .into_iter()
            .filter(|&(i, j)| self.und[i][j])
            .collect()
    }

    pub fn to_record(&self) -> PdagRecord {
        let name = |(i, j): (usize, usize)| [self.nodes[i].clone(), self.nodes[j].clone()];
        PdagRecord {
            nodes: self.nodes.clone(),
            directed: self.directed_edges().into_iter().map(name).collect(),
            undirected: self.undirected_edges().into_iter().map(name).collect(),
        }
    }
}

/// Consistent DAG extension (Dor & Tarsi): repeatedly pick a node with no
/// outgoing directed edge whose undirected neighbours are adjacent to all its
/// other neighbours, point its undirected edges at it and remove it.
///
/// Among eligible nodes the last in node order is taken first, so a lone
/// undirected edge `A - B` becomes `A -> B`.
pub fn pdag_to_dag(p: &Pdag) -> Result<Dag> {
    let n = p.n();
    let mut alive = vec![true; n];
    let mut work = p.clone();
    let mut edges: Vec<(usize, usize)> = p.directed_edges();
    for _ in 0..n {
        let pick = (0..n).rev().find(|&x| {
            if !alive[x] {
                return false;
            }
            if (0..n).any(|y| alive[y] && work.dir[x][y]) {
                return false;
            }
            let adj: Vec<usize> = (0..n).filter(|&y| alive[y] && work.is_adjacent(x, y)).collect();
            adj.iter().filter(|&&y| work.und[x][y]).all(|&y| {
                adj.iter()
                    .all(|&z| z == y || work.is_adjacent(y, z))
            })
        });
        let x = pick.ok_or_else(|| Error::Graph("PDAG admits no consistent extension".into()))?;
        for y in 0..n {
            if alive[y] && work.und[x][y] {
                edges.push((y, x));
                work.und[x][y] = false;
                work.und[y][x] = false;
            }
        }
        alive[x] = false;
    }
    edges.sort_unstable();
    Dag::new(p.nodes().to_vec(), &edges)
}

/// Like [`pdag_to_dag`], but falls back to a best-effort orientation when no
/// consistent extension exists: conflicting directed edges are dropped if
/// they close a cycle, and undirected edges point from lower to higher node
/// index unless that closes a cycle.
pub fn pdag_to_dag_or_fallback(p: &Pdag) -> Dag {
    if let Ok(g) = pdag_to_dag(p) {
        return g;
    }
    let mut g = Dag::empty(p.nodes().to_vec()).expect("distinct node names");
    for (u, v) in p.directed_edges() {
        let _ = g.add_edge(u, v);
    }
    for (u, v) in p.undirected_edges() {
        if g.add_edge(u, v).is_err() {
            let _ = g.add_edge(v, u);
        }
    }
    g
}
