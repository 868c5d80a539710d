//! Network representation: variables, CPTs, validation and evidence.

mod generate;

pub use generate::{generate_evidence, generate_random_network, generate_random_polytree, GeneratorConfig};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

/// Dense variable index, `0..n`.
pub type VarId = usize;

/// Tolerance on `|Σ row - 1|` accepted for a CPT row.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("variable `{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("variable `{var}` lists value `{label}` twice")]
    DuplicateLabel { var: String, label: String },
    #[error("variable name `{0}` is used twice")]
    DuplicateName(String),
    #[error("expected one CPT per variable ({expected}), found {found}")]
    CptCount { expected: usize, found: usize },
    #[error("CPT at position {position} is for variable {child}, expected {position}")]
    CptChild { position: usize, child: VarId },
    #[error("CPT of `{child}` names unknown parent id {parent}")]
    UnknownParent { child: String, parent: VarId },
    #[error("CPT of `{child}` lists parent `{parent}` twice")]
    DuplicateParent { child: String, parent: String },
    #[error("CPT of `{child}` has {found} rows, expected {expected}")]
    RowCount { child: String, expected: usize, found: usize },
    #[error("CPT of `{child}` row {row} has {found} entries, expected {expected}")]
    RowLength { child: String, row: usize, expected: usize, found: usize },
    #[error("CPT of `{child}` row {row} holds {value}, outside [0, 1]")]
    BadProbability { child: String, row: usize, value: f64 },
    #[error("CPT of `{child}` row {row} sums to {sum}")]
    RowSum { child: String, row: usize, sum: f64 },
    #[error("directed cycle through `{0}`")]
    Cycle(String),
    #[error("evidence names unknown variable id {0}")]
    UnknownEvidenceVariable(VarId),
    #[error("evidence value {value} out of range for `{var}`")]
    EvidenceValue { var: String, value: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub values: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, values: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Variable {
            name: name.into(),
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    /// Variable with values labelled `"0"`, `"1"`, ...
    pub fn with_card(name: impl Into<String>, card: usize) -> Self {
        use alloc::string::ToString;
        Variable {
            name: name.into(),
            values: (0..card).map(|v| v.to_string()).collect(),
        }
    }

    #[inline]
    pub fn card(&self) -> usize {
        self.values.len()
    }

    pub fn value_index(&self, label: &str) -> Option<usize> {
        self.values.iter().position(|v| v == label)
    }
}

/// Conditional probability table `P(child | parents)`.
///
/// Rows are laid out row-major over the parents in declared order, the last
/// parent varying fastest. Each row is a distribution over the child domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub child: VarId,
    pub parents: Vec<VarId>,
    /// `rows * card` probabilities, row after row.
    table: Vec<f64>,
    card: usize,
    /// First row whose length disagrees with row 0: (row, length).
    ragged: Option<(usize, usize)>,
}

impl Cpt {
    pub fn new(child: VarId, parents: Vec<VarId>, rows: Vec<Vec<f64>>) -> Self {
        let card = rows.first().map_or(0, Vec::len);
        let mut table = Vec::with_capacity(rows.len() * card);
        let mut ragged = None;
        for (i, r) in rows.iter().enumerate() {
            if r.len() != card && ragged.is_none() {
                ragged = Some((i, r.len()));
            }
            table.extend_from_slice(r);
        }
        Cpt {
            child,
            parents,
            table,
            card,
            ragged,
        }
    }

    pub(crate) fn from_flat(child: VarId, parents: Vec<VarId>, card: usize, table: Vec<f64>) -> Self {
        Cpt {
            child,
            parents,
            table,
            card,
            ragged: None,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.table.len().checked_div(self.card).unwrap_or(0)
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.table[r * self.card..(r + 1) * self.card]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.table.chunks(self.card.max(1))
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }
}

/// A validated, immutable discrete Bayesian network.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    variables: Vec<Variable>,
    cpts: Vec<Cpt>,
    children: Vec<Vec<VarId>>,
    topo: Vec<VarId>,
}

impl BayesNet {
    pub fn new(variables: Vec<Variable>, cpts: Vec<Cpt>) -> Result<Self, ModelError> {
        let n = variables.len();
        let mut names = BTreeSet::new();
        for v in &variables {
            if v.values.is_empty() {
                return Err(ModelError::EmptyDomain(v.name.clone()));
            }
            if !names.insert(v.name.as_str()) {
                return Err(ModelError::DuplicateName(v.name.clone()));
            }
            let mut labels = BTreeSet::new();
            for l in &v.values {
                if !labels.insert(l.as_str()) {
                    return Err(ModelError::DuplicateLabel {
                        var: v.name.clone(),
                        label: l.clone(),
                    });
                }
            }
        }
        if cpts.len() != n {
            return Err(ModelError::CptCount {
                expected: n,
                found: cpts.len(),
            });
        }
        let mut children = vec![Vec::new(); n];
        for (i, cpt) in cpts.iter().enumerate() {
            if cpt.child != i {
                return Err(ModelError::CptChild {
                    position: i,
                    child: cpt.child,
                });
            }
            let name = || variables[i].name.clone();
            let mut seen = BTreeSet::new();
            let mut rows = 1usize;
            for &p in &cpt.parents {
                if p >= n {
                    return Err(ModelError::UnknownParent { child: name(), parent: p });
                }
                if !seen.insert(p) {
                    return Err(ModelError::DuplicateParent {
                        child: name(),
                        parent: variables[p].name.clone(),
                    });
                }
                rows = rows.saturating_mul(variables[p].card());
                children[p].push(i);
            }
            let card = variables[i].card();
            if let Some((row, found)) = cpt.ragged {
                return Err(ModelError::RowLength {
                    child: name(),
                    row,
                    expected: card,
                    found,
                });
            }
            if cpt.card != card && !cpt.table.is_empty() {
                return Err(ModelError::RowLength {
                    child: name(),
                    row: 0,
                    expected: card,
                    found: cpt.card,
                });
            }
            let found = if cpt.table.is_empty() { 0 } else { cpt.table.len() / card };
            if found != rows {
                return Err(ModelError::RowCount {
                    child: name(),
                    expected: rows,
                    found,
                });
            }
            for (r, row) in cpt.table.chunks(card).enumerate() {
                let mut sum = 0.0;
                for &p in row {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(ModelError::BadProbability {
                            child: name(),
                            row: r,
                            value: p,
                        });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(ModelError::RowSum { child: name(), row: r, sum });
                }
            }
        }
        let mut cpts = cpts;
        for (i, c) in cpts.iter_mut().enumerate() {
            c.card = variables[i].card();
        }
        let topo = kahn_order(n, &cpts, &children)
            .map_err(|v| ModelError::Cycle(variables[v].name.clone()))?;
        Ok(BayesNet {
            variables,
            cpts,
            children,
            topo,
        })
    }

    pub fn empty() -> Self {
        BayesNet {
            variables: Vec::new(),
            cpts: Vec::new(),
            children: Vec::new(),
            topo: Vec::new(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, v: VarId) -> &Variable {
        &self.variables[v]
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn cpt(&self, v: VarId) -> &Cpt {
        &self.cpts[v]
    }

    #[inline]
    pub fn card(&self, v: VarId) -> usize {
        self.variables[v].card()
    }

    pub fn cards(&self) -> Vec<usize> {
        self.variables.iter().map(Variable::card).collect()
    }

    #[inline]
    pub fn parents(&self, v: VarId) -> &[VarId] {
        &self.cpts[v].parents
    }

    #[inline]
    pub fn children(&self, v: VarId) -> &[VarId] {
        &self.children[v]
    }

    /// Topological order, ties broken by ascending id.
    pub fn topological_order(&self) -> &[VarId] {
        &self.topo
    }

    pub fn num_edges(&self) -> usize {
        self.cpts.iter().map(|c| c.parents.len()).sum()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Row of `v`'s CPT selected by the parent values in `assignment`
    /// (indexed by variable id).
    #[inline]
    pub fn cpt_row_index(&self, v: VarId, assignment: &[usize]) -> usize {
        let mut idx = 0;
        for &p in &self.cpts[v].parents {
            idx = idx * self.variables[p].card() + assignment[p];
        }
        idx
    }

    /// `P(X_v = value | pa_v)` with parents read from `assignment`.
    #[inline]
    pub fn prob(&self, v: VarId, value: usize, assignment: &[usize]) -> f64 {
        let r = self.cpt_row_index(v, assignment);
        self.cpts[v].row(r)[value]
    }

    /// `Π_i P(x_i | pa_i)` for a full assignment.
    pub fn joint_probability(&self, assignment: &[usize]) -> f64 {
        (0..self.len()).map(|v| self.prob(v, assignment[v], assignment)).product()
    }

    /// Whether every CPT entry is strictly positive.
    pub fn is_positive(&self) -> bool {
        self.cpts.iter().all(|c| c.table.iter().all(|&p| p > 0.0))
    }

    /// Variables without children.
    pub fn leaves(&self) -> Vec<VarId> {
        (0..self.len()).filter(|&v| self.children[v].is_empty()).collect()
    }
}

fn kahn_order(n: usize, cpts: &[Cpt], children: &[Vec<VarId>]) -> Result<Vec<VarId>, VarId> {
    let mut indeg: Vec<usize> = cpts.iter().map(|c| c.parents.len()).collect();
    let mut ready: BTreeSet<VarId> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).find(|&v| indeg[v] > 0).unwrap_or(0))
    }
}

/// Observed values, keyed by variable id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Evidence {
    assignments: BTreeMap<VarId, usize>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (VarId, usize)>) -> Self {
        Evidence {
            assignments: pairs.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, var: VarId, value: usize) -> Option<usize> {
        self.assignments.insert(var, value)
    }

    pub fn get(&self, var: VarId) -> Option<usize> {
        self.assignments.get(&var).copied()
    }

    pub fn contains(&self, var: VarId) -> bool {
        self.assignments.contains_key(&var)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.assignments.iter().map(|(&k, &v)| (k, v))
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.assignments.keys().copied()
    }

    pub fn validate(&self, net: &BayesNet) -> Result<(), ModelError> {
        for (v, x) in self.iter() {
            if v >= net.len() {
                return Err(ModelError::UnknownEvidenceVariable(v));
            }
            if x >= net.card(v) {
                return Err(ModelError::EvidenceValue {
                    var: net.variable(v).name.clone(),
                    value: x,
                });
            }
        }
        Ok(())
    }

    /// Dense view of length `n`.
    pub fn to_dense(&self, n: usize) -> Vec<Option<usize>> {
        let mut d = vec![None; n];
        for (v, x) in self.iter() {
            if v < n {
                d[v] = Some(x);
            }
        }
        d
    }
}

/// Iterates all assignments of `cards` in row-major order, last index
/// fastest.
pub(crate) struct Odometer {
    cards: Vec<usize>,
    cur: Vec<usize>,
    done: bool,
}

impl Odometer {
    pub(crate) fn new(cards: Vec<usize>) -> Self {
        let done = cards.contains(&0);
        let cur = vec![0; cards.len()];
        Odometer { cards, cur, done }
    }

    pub(crate) fn current(&self) -> Option<&[usize]> {
        if self.done {
            None
        } else {
            Some(&self.cur)
        }
    }

    pub(crate) fn advance(&mut self) {
        for i in (0..self.cards.len()).rev() {
            self.cur[i] += 1;
            if self.cur[i] < self.cards[i] {
                return;
            }
            self.cur[i] = 0;
        }
        self.done = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn chain_ab() -> BayesNet {
        BayesNet::new(
            vec![Variable::with_card("A", 2), Variable::with_card("B", 2)],
            vec![
                Cpt::new(0, vec![], vec![vec![0.7, 0.3]]),
                Cpt::new(1, vec![0], vec![vec![0.9, 0.1], vec![0.2, 0.8]]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn two_node_chain() {
        let net = chain_ab();
        assert_eq!(net.len(), 2);
        assert_eq!(net.num_edges(), 1);
        assert_eq!(net.children(0), &[1]);
        assert_eq!(net.prob(1, 1, &[1, 0]), 0.8);
    }

    #[test]
    fn row_sum_error_names_row() {
        let err = BayesNet::new(
            vec![Variable::with_card("A", 2), Variable::with_card("B", 2)],
            vec![
                Cpt::new(0, vec![], vec![vec![0.7, 0.3]]),
                Cpt::new(1, vec![0], vec![vec![0.9, 0.1], vec![0.2, 0.7]]),
            ],
        )
        .unwrap_err();
        match err {
            ModelError::RowSum { child, row, .. } => {
                assert_eq!(child, "B");
                assert_eq!(row, 1);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn two_cycle_rejected() {
        let err = BayesNet::new(
            vec![Variable::with_card("A", 2), Variable::with_card("B", 2)],
            vec![
                Cpt::new(0, vec![1], vec![vec![0.5, 0.5], vec![0.5, 0.5]]),
                Cpt::new(1, vec![0], vec![vec![0.5, 0.5], vec![0.5, 0.5]]),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::Cycle(_)));
    }

    #[test]
    fn empty_domain_rejected() {
        let err = BayesNet::new(vec![Variable::new("A", Vec::<String>::new())], vec![Cpt::new(0, vec![], vec![])])
            .unwrap_err();
        assert_eq!(err, ModelError::EmptyDomain("A".into()));
    }

    #[test]
    fn wrong_row_count_and_unknown_parent() {
        let err = BayesNet::new(
            vec![Variable::with_card("A", 2), Variable::with_card("B", 2)],
            vec![
                Cpt::new(0, vec![], vec![vec![0.7, 0.3]]),
                Cpt::new(1, vec![0], vec![vec![0.9, 0.1]]),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::RowCount { expected: 2, found: 1, .. }));
        let err = BayesNet::new(
            vec![Variable::with_card("A", 2)],
            vec![Cpt::new(0, vec![3], vec![vec![0.7, 0.3]])],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::UnknownParent { parent: 3, .. }));
    }

    #[test]
    fn evidence_validation() {
        let net = chain_ab();
        assert!(Evidence::from_pairs([(1, 1)]).validate(&net).is_ok());
        assert!(Evidence::from_pairs([(1, 2)]).validate(&net).is_err());
        assert!(Evidence::from_pairs([(5, 0)]).validate(&net).is_err());
    }

    #[test]
    fn odometer_last_fastest() {
        let mut o = Odometer::new(vec![2, 3]);
        let mut seen = Vec::new();
        while let Some(c) = o.current() {
            seen.push((c[0], c[1]));
            o.advance();
        }
        assert_eq!(seen, vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]);
    }
}
