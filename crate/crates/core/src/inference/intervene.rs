use crate::error::{Error, Result};
use crate::inference::{CptSet, JunctionTree};
use crate::structure::Dag;

/// `g` with every edge into the named node removed.
pub fn mutilate(g: &Dag, target: &str) -> Result<Dag> {
    Ok(g.mutilate(g.node(target)?))
}

/// `P(query | do(node = level))`, computed on the mutilated graph with the
/// node's table replaced by a point mass.
pub fn do_marginal(g: &Dag, cpts: &CptSet, node: usize, level: usize, query: usize) -> Result<Vec<f64>> {
    if node == query {
        return Err(Error::Invalid("intervention node and query coincide".into()));
    }
    if node >= g.n() || query >= g.n() {
        return Err(Error::Invalid("node index out of range".into()));
    }
    let cut = g.mutilate(node);
    let forced = cpts.with_point_mass(node, level)?;
    JunctionTree::build(&cut, &forced)?.marginal(query, &[])
}

/// Risk ratio `P(outcome = "1" | do(treated)) / P(outcome = "1" | do(control))`.
pub fn ace_do(g: &Dag, cpts: &CptSet, treatment: &str, treated: &str, control: &str, outcome: &str) -> Result<f64> {
    let t = cpts.index_of(treatment)?;
    let s = cpts.index_of(outcome)?;
    let one = cpts.level_of(s, "1")?;
    let (lt, lc) = (cpts.level_of(t, treated)?, cpts.level_of(t, control)?);
    ace_do_idx(g, cpts, t, lt, lc, s, one)
}

pub(crate) fn ace_do_idx(g: &Dag, cpts: &CptSet, t: usize, lt: usize, lc: usize, s: usize, one: usize) -> Result<f64> {
    if lt == lc {
        return Ok(1.0);
    }
    let num = do_marginal(g, cpts, t, lt, s)?[one];
    let den = do_marginal(g, cpts, t, lc, s)?[one];
    if den <= 0.0 {
        return Err(Error::Invalid("interventional probability of the control arm is zero".into()));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::NodeCpt;

    fn lv() -> Vec<String> {
        vec!["0".into(), "1".into()]
    }

    fn node(name: &str, parents: Vec<usize>, probs: Vec<f64>) -> NodeCpt {
        NodeCpt { name: name.into(), levels: lv(), parents, probs, posterior: None }
    }

    fn triangle() -> (Dag, CptSet) {
        let g = Dag::from_names(&["X", "T", "S"], &[("X", "T"), ("X", "S"), ("T", "S")]).unwrap();
        let cpts = CptSet::new(
            &g,
            vec![
                node("X", vec![], vec![0.5, 0.5]),
                node("T", vec![0], vec![0.8, 0.2, 0.2, 0.8]),
                // rows (x, t): 00, 01, 10, 11
                node("S", vec![0, 1], vec![0.9, 0.1, 0.7, 0.3, 0.6, 0.4, 0.2, 0.8]),
            ],
        )
        .unwrap();
        (g, cpts)
    }

    #[test]
    fn mutilation() {
        let g = Dag::from_names(&["ADT", "PMR", "S"], &[("ADT", "PMR"), ("PMR", "S"), ("ADT", "S")]).unwrap();
        let m = mutilate(&g, "PMR").unwrap();
        assert_eq!(m.edges(), vec![(0, 2), (1, 2)]);
        assert_eq!(mutilate(&m, "PMR").unwrap(), m);
        assert_eq!(mutilate(&g, "ADT").unwrap(), g);
        assert!(mutilate(&g, "Nope").is_err());
    }

    #[test]
    fn confounder_triangle_matches_adjustment_formula() {
        let (g, cpts) = triangle();
        let p1 = do_marginal(&g, &cpts, 1, 1, 2).unwrap()[1];
        let p0 = do_marginal(&g, &cpts, 1, 0, 2).unwrap()[1];
        assert!((p1 - (0.5 * 0.3 + 0.5 * 0.8)).abs() < 1e-12);
        assert!((p0 - (0.5 * 0.1 + 0.5 * 0.4)).abs() < 1e-12);
        let r = ace_do(&g, &cpts, "T", "1", "0", "S").unwrap();
        assert!((r - 0.55 / 0.25).abs() < 1e-12);
        assert_eq!(ace_do(&g, &cpts, "T", "1", "1", "S").unwrap(), 1.0);
    }

    #[test]
    fn root_intervention_equals_conditioning() {
        let (g, cpts) = triangle();
        let jt = JunctionTree::build(&g, &cpts).unwrap();
        let see = jt.marginal(2, &[(0, 1)]).unwrap();
        let act = do_marginal(&g, &cpts, 0, 1, 2).unwrap();
        for (a, b) in see.iter().zip(&act) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_descendant_is_unchanged() {
        let (g, cpts) = triangle();
        let jt = JunctionTree::build(&g, &cpts).unwrap();
        let before = jt.marginal(0, &[]).unwrap();
        let after = do_marginal(&g, &cpts, 1, 1, 0).unwrap();
        assert!((before[1] - after[1]).abs() < 1e-12);
        let r = ace_do(&g, &cpts, "S", "1", "0", "X").unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }
}
