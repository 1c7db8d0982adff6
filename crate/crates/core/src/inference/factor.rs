use crate::inference::CptSet;

/// Dense table over a sorted set of discrete variables, last variable fastest.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Factor {
    pub vars: Vec<usize>,
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
}

impl Factor {
    /// Uniform-one factor over `vars` (sorted).
    pub fn ones(vars: &[usize], all_cards: &[usize]) -> Factor {
        let cards: Vec<usize> = vars.iter().map(|&v| all_cards[v]).collect();
        let size = cards.iter().product();
        Factor {
            vars: vars.to_vec(),
            cards,
            values: vec![1.0; size],
        }
    }

    pub fn from_cpt(cpts: &CptSet, v: usize) -> Factor {
        let node = cpts.node(v);
        let mut vars = node.parents.clone();
        vars.push(v);
        vars.sort_unstable();
        let all_cards = cpts.cards();
        let mut f = Factor::ones(&vars, &all_cards);
        let mut states = vec![0usize; all_cards.len()];
        for idx in 0..f.values.len() {
            f.decode_into(idx, &mut states);
            let j = cpts.parent_config(v, &states);
            f.values[idx] = node.probs[j * node.card() + states[v]];
        }
        f
    }

    /// 0/1 factor selecting `state` of `var`.
    pub fn indicator(var: usize, card: usize, state: usize) -> Factor {
        let mut values = vec![0.0; card];
        values[state] = 1.0;
        Factor {
            vars: vec![var],
            cards: vec![card],
            values,
        }
    }

    /// Writes this factor's assignment for flat index `idx` into `states`.
    fn decode_into(&self, mut idx: usize, states: &mut [usize]) {
        for (pos, &v) in self.vars.iter().enumerate().rev() {
            let c = self.cards[pos];
            states[v] = idx % c;
            idx /= c;
        }
    }

    fn index_of(&self, states: &[usize]) -> usize {
        let mut idx = 0;
        for (pos, &v) in self.vars.iter().enumerate() {
            idx = idx * self.cards[pos] + states[v];
        }
        idx
    }

    pub fn product(&self, other: &Factor, n_vars: usize) -> Factor {
        let mut vars = self.vars.clone();
        vars.extend_from_slice(&other.vars);
        vars.sort_unstable();
        vars.dedup();
        let mut cards = Vec::with_capacity(vars.len());
        for &v in &vars {
            let c = self
                .vars
                .iter()
                .position(|&x| x == v)
                .map(|p| self.cards[p])
                .or_else(|| other.vars.iter().position(|&x| x == v).map(|p| other.cards[p]))
                .expect("variable from one operand");
            cards.push(c);
        }
        let size: usize = cards.iter().product();
        let mut out = Factor {
            vars,
            cards,
            values: vec![0.0; size],
        };
        let mut states = vec![0usize; n_vars];
        for idx in 0..size {
            out.decode_into(idx, &mut states);
            out.values[idx] = self.values[self.index_of(&states)] * other.values[other.index_of(&states)];
        }
        out
    }

    /// Sums out everything not in `keep` (which must be a sorted subset).
    pub fn marginalize_onto(&self, keep: &[usize], n_vars: usize) -> Factor {
        let cards: Vec<usize> = keep
            .iter()
            .map(|v| self.cards[self.vars.iter().position(|x| x == v).expect("subset")])
            .collect();
        let mut out = Factor {
            vars: keep.to_vec(),
            cards,
            values: vec![0.0; 0],
        };
        out.values = vec![0.0; out.cards.iter().product()];
        let mut states = vec![0usize; n_vars];
        for (idx, &x) in self.values.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            self.decode_into(idx, &mut states);
            let j = out.index_of(&states);
            out.values[j] += x;
        }
        out
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn normalize(&mut self) -> f64 {
        let s = self.total();
        if s > 0.0 {
            self.values.iter_mut().for_each(|x| *x /= s);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_marginal_of_independent_tables() {
        let a = Factor { vars: vec![0], cards: vec![2], values: vec![0.3, 0.7] };
        let b = Factor { vars: vec![1], cards: vec![3], values: vec![0.2, 0.3, 0.5] };
        let ab = a.product(&b, 2);
        assert_eq!(ab.vars, vec![0, 1]);
        assert!((ab.values[1] - 0.3 * 0.3).abs() < 1e-15);
        assert!((ab.values[5] - 0.7 * 0.5).abs() < 1e-15);
        let back = ab.marginalize_onto(&[1], 2);
        for (x, y) in back.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-15);
        }
        let scalar = ab.marginalize_onto(&[], 2);
        assert!((scalar.values[0] - 1.0).abs() < 1e-15);
    }
}
