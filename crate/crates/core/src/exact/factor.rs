use alloc::vec;
use alloc::vec::Vec;

use crate::model::{BayesNet, Odometer, VarId};

/// Nonnegative table over a set of variables.
///
/// The scope is kept in ascending id order; values are row-major over the
/// scope with the last variable varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Vec<VarId>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert!(scope.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(cards.iter().product::<usize>(), values.len());
        Factor { scope, cards, values }
    }

    pub fn constant(value: f64) -> Self {
        Factor {
            scope: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    /// CPT of `v` with observed variables fixed to their values.
    pub fn from_cpt(net: &BayesNet, v: VarId, observed: &[Option<usize>]) -> Self {
        let mut scope: Vec<VarId> = net
            .parents(v)
            .iter()
            .copied()
            .chain(core::iter::once(v))
            .filter(|&u| observed[u].is_none())
            .collect();
        scope.sort_unstable();
        let cards: Vec<usize> = scope.iter().map(|&u| net.card(u)).collect();
        let mut full: Vec<usize> = vec![0; net.len()];
        for &u in net.parents(v).iter().chain(core::iter::once(&v)) {
            if let Some(x) = observed[u] {
                full[u] = x;
            }
        }
        let mut values = Vec::with_capacity(cards.iter().product());
        let mut odo = Odometer::new(cards.clone());
        while let Some(a) = odo.current() {
            for (k, &u) in scope.iter().enumerate() {
                full[u] = a[k];
            }
            values.push(net.prob(v, full[v], &full));
            odo.advance();
        }
        Factor { scope, cards, values }
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_constant(&self) -> bool {
        self.scope.is_empty()
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.scope.len()];
        for i in (0..self.scope.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.cards[i + 1];
        }
        s
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut scope = Vec::with_capacity(self.scope.len() + other.scope.len());
        let mut cards = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.scope.len() || j < other.scope.len() {
            let a = self.scope.get(i).copied().unwrap_or(usize::MAX);
            let b = other.scope.get(j).copied().unwrap_or(usize::MAX);
            if a <= b {
                scope.push(a);
                cards.push(self.cards[i]);
                i += 1;
                if a == b {
                    j += 1;
                }
            } else {
                scope.push(b);
                cards.push(other.cards[j]);
                j += 1;
            }
        }
        let map = |f: &Factor| -> Vec<usize> {
            let st = f.strides();
            scope
                .iter()
                .map(|u| f.scope.iter().position(|w| w == u).map_or(0, |k| st[k]))
                .collect()
        };
        let (sa, sb) = (map(self), map(other));
        let mut values = Vec::with_capacity(cards.iter().product());
        let mut odo = Odometer::new(cards.clone());
        while let Some(a) = odo.current() {
            let (mut ia, mut ib) = (0, 0);
            for (k, &x) in a.iter().enumerate() {
                ia += x * sa[k];
                ib += x * sb[k];
            }
            values.push(self.values[ia] * other.values[ib]);
            odo.advance();
        }
        Factor { scope, cards, values }
    }

    /// Sums `var` out; a factor without `var` is returned unchanged.
    pub fn sum_out(&self, var: VarId) -> Factor {
        let Some(k) = self.scope.iter().position(|&u| u == var) else {
            return self.clone();
        };
        let st = self.strides();
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(k);
        cards.remove(k);
        let card = self.cards[k];
        let outer: usize = self.cards[..k].iter().product();
        let inner = st[k];
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for x in 0..card {
                let base = o * card * inner + x * inner;
                for i in 0..inner {
                    values[o * inner + i] += self.values[base + i];
                }
            }
        }
        Factor { scope, cards, values }
    }

    /// Divides by the largest entry and returns it (0 leaves the factor as is).
    pub(crate) fn rescale(&mut self) -> f64 {
        let m = self.values.iter().copied().fold(0.0, f64::max);
        if m > 0.0 {
            for v in &mut self.values {
                *v /= m;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_sum_out() {
        // f(A) = (0.3, 0.7), g(A,B) row-major
        let f = Factor::new(vec![0], vec![2], vec![0.3, 0.7]);
        let g = Factor::new(vec![0, 1], vec![2, 2], vec![0.9, 0.1, 0.2, 0.8]);
        let h = f.product(&g);
        assert_eq!(h.scope(), &[0, 1]);
        let expect = [0.27, 0.03, 0.14, 0.56];
        for (a, b) in h.values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let m = h.sum_out(0);
        assert_eq!(m.scope(), &[1]);
        assert!((m.values()[0] - 0.41).abs() < 1e-15);
        assert!((m.values()[1] - 0.59).abs() < 1e-15);
        let z = m.sum_out(1);
        assert!(z.is_constant());
        assert!((z.values()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_with_disjoint_scopes() {
        let f = Factor::new(vec![2], vec![2], vec![1.0, 2.0]);
        let g = Factor::new(vec![0], vec![3], vec![1.0, 10.0, 100.0]);
        let h = f.product(&g);
        assert_eq!(h.scope(), &[0, 2]);
        assert_eq!(h.values(), &[1.0, 2.0, 10.0, 20.0, 100.0, 200.0]);
        assert_eq!(h.sum_out(0).values(), &[111.0, 222.0]);
    }
}
