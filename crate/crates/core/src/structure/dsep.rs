use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::structure::Dag;

/// d-separation of `a` and `b` given `z`, by the reachability ("Bayes ball")
/// traversal over (node, direction) states.
pub fn d_separated(g: &Dag, a: usize, b: usize, z: &[usize]) -> Result<bool> {
    let n = g.n();
    if a >= n || b >= n || z.iter().any(|&v| v >= n) {
        return Err(Error::Graph("node index out of range".into()));
    }
    if a == b {
        return Err(Error::Invalid("d-separation needs two distinct nodes".into()));
    }
    if z.contains(&a) || z.contains(&b) {
        return Err(Error::Invalid("conditioning set contains a queried node".into()));
    }
    Ok(!reachable(g, a, z)[b])
}

/// Name-based form of [`d_separated`].
pub fn d_separated_names(g: &Dag, a: &str, b: &str, z: &[&str]) -> Result<bool> {
    let zs = z.iter().map(|s| g.node(s)).collect::<Result<Vec<_>>>()?;
    d_separated(g, g.node(a)?, g.node(b)?, &zs)
}

/// Nodes d-connected to `source` given `z`.
fn reachable(g: &Dag, source: usize, z: &[usize]) -> Vec<bool> {
    let n = g.n();
    let mut in_z = vec![false; n];
    for &v in z {
        in_z[v] = true;
    }
    // colliders are open when they or a descendant are observed
    let anc_z = g.ancestors_of(z);

    // direction: 0 = arrived from a child (moving up), 1 = arrived from a parent
    let mut visited = vec![[false; 2]; n];
    let mut out = vec![false; n];
    let mut queue = VecDeque::from([(source, 0usize)]);
    while let Some((y, dir)) = queue.pop_front() {
        if visited[y][dir] {
            continue;
        }
        visited[y][dir] = true;
        if !in_z[y] {
            out[y] = true;
        }
        if dir == 0 {
            if !in_z[y] {
                queue.extend(g.parents(y).iter().map(|&p| (p, 0)));
                queue.extend(g.children(y).iter().map(|&c| (c, 1)));
            }
        } else {
            if !in_z[y] {
                queue.extend(g.children(y).iter().map(|&c| (c, 1)));
            }
            if anc_z[y] {
                queue.extend(g.parents(y).iter().map(|&p| (p, 0)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_blocked_by_middle() {
        let g = Dag::from_names(&["A", "B", "C"], &[("A", "B"), ("B", "C")]).unwrap();
        assert!(d_separated_names(&g, "A", "C", &["B"]).unwrap());
        assert!(!d_separated_names(&g, "A", "C", &[]).unwrap());
    }

    #[test]
    fn collider_opens_under_conditioning() {
        let g = Dag::from_names(&["A", "B", "C"], &[("A", "C"), ("B", "C")]).unwrap();
        assert!(d_separated_names(&g, "A", "B", &[]).unwrap());
        assert!(!d_separated_names(&g, "A", "B", &["C"]).unwrap());
    }

    #[test]
    fn descendant_of_collider_opens_it() {
        let g = Dag::from_names(&["A", "B", "C", "D"], &[("A", "C"), ("B", "C"), ("C", "D")]).unwrap();
        assert!(!d_separated_names(&g, "A", "B", &["D"]).unwrap());
    }

    #[test]
    fn preconditions() {
        let g = Dag::from_names(&["A", "B"], &[("A", "B")]).unwrap();
        assert!(d_separated_names(&g, "A", "A", &[]).is_err());
        assert!(d_separated_names(&g, "A", "B", &["A"]).is_err());
        assert!(matches!(d_separated_names(&g, "A", "X", &[]), Err(Error::UnknownNode(_))));
    }
}
