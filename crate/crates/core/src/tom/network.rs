//! Discrete Bayesian networks and exact inference by variable elimination.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CPT rows must sum to one within this tolerance.
pub const CPT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
}

impl Variable {
    pub fn new(name: &str, states: &[&str]) -> Self {
        Variable {
            name: name.into(),
            states: states.iter().map(|s| String::from(*s)).collect(),
        }
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }
}

/// One node of a network as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub variable: Variable,
    /// Parent node indices.
    pub parents: Vec<usize>,
    /// Conditional probability table, one row per parent assignment
    /// (first parent most significant), each row over this node's states.
    pub cpt: Vec<f64>,
}

/// A validated discrete Bayesian network (acyclic, normalized CPTs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkDef", into = "NetworkDef")]
pub struct BeliefNetwork {
    nodes: Vec<Node>,
}

#[derive(Serialize, Deserialize)]
struct NetworkDef {
    nodes: Vec<Node>,
}

impl TryFrom<NetworkDef> for BeliefNetwork {
    type Error = Error;
    fn try_from(def: NetworkDef) -> Result<Self> {
        BeliefNetwork::new(def.nodes)
    }
}

impl From<BeliefNetwork> for NetworkDef {
    fn from(bn: BeliefNetwork) -> Self {
        NetworkDef { nodes: bn.nodes }
    }
}

impl BeliefNetwork {
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        let n = nodes.len();
        for (idx, node) in nodes.iter().enumerate() {
            let name = &node.variable.name;
            if node.variable.cardinality() == 0 {
                return Err(Error::InvalidNetwork(alloc::format!("{name} has an empty domain")));
            }
            if nodes[..idx].iter().any(|o| &o.variable.name == name) {
                return Err(Error::InvalidNetwork(alloc::format!("duplicate variable {name}")));
            }
            let mut rows = 1usize;
            for &p in &node.parents {
                if p >= n || p == idx {
                    return Err(Error::InvalidNetwork(alloc::format!("{name} has invalid parent {p}")));
                }
                rows *= nodes[p].variable.cardinality();
            }
            let card = node.variable.cardinality();
            if node.cpt.len() != rows * card {
                return Err(Error::InvalidNetwork(alloc::format!(
                    "{name}: CPT has {} entries, expected {}",
                    node.cpt.len(),
                    rows * card
                )));
            }
            for (r, row) in node.cpt.chunks(card).enumerate() {
                if row.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                    return Err(Error::InvalidNetwork(alloc::format!("{name}: row {r} has an invalid probability")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > CPT_TOL {
                    return Err(Error::InvalidNetwork(alloc::format!("{name}: row {r} sums to {sum}")));
                }
            }
        }
        let bn = BeliefNetwork { nodes };
        bn.topological_order()?;
        Ok(bn)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.variable.name == name)
    }

    pub fn cardinality(&self, var: usize) -> usize {
        self.nodes[var].variable.cardinality()
    }

    /// Kahn ordering; fails on cycles.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.nodes.len();
        let mut indegree: Vec<usize> = self.nodes.iter().map(|node| node.parents.len()).collect();
        let mut order = Vec::with_capacity(n);
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        while let Some(v) = ready.pop() {
            order.push(v);
            for (c, node) in self.nodes.iter().enumerate() {
                let hits = node.parents.iter().filter(|&&p| p == v).count();
                if hits > 0 {
                    indegree[c] -= hits;
                    if indegree[c] == 0 {
                        ready.push(c);
                    }
                }
            }
        }
        if order.len() != n {
            return Err(Error::InvalidNetwork("graph contains a cycle".into()));
        }
        Ok(order)
    }

    /// Probability of one node's state given its parents' states.
    pub fn conditional(&self, var: usize, value: usize, parent_values: &[usize]) -> f64 {
        let node = &self.nodes[var];
        let mut row = 0;
        for (&p, &pv) in node.parents.iter().zip(parent_values) {
            row = row * self.cardinality(p) + pv;
        }
        node.cpt[row * node.variable.cardinality() + value]
    }

    fn cpt_factor(&self, var: usize) -> Factor {
        let node = &self.nodes[var];
        let mut vars = node.parents.clone();
        vars.push(var);
        let cards = vars.iter().map(|&v| self.cardinality(v)).collect();
        Factor {
            vars,
            cards,
            values: node.cpt.clone(),
        }
    }
}

/// Table over a set of variables, row-major with the first variable most
/// significant.
#[derive(Debug, Clone, PartialEq)]
struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    fn scalar(value: f64) -> Self {
        Factor {
            vars: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![0; self.vars.len()];
        let mut acc = 1;
        for k in (0..self.vars.len()).rev() {
            strides[k] = acc;
            acc *= self.cards[k];
        }
        strides
    }

    fn position(&self, var: usize) -> Option<usize> {
        self.vars.iter().position(|&v| v == var)
    }

    fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (&v, &c) in other.vars.iter().zip(&other.cards) {
            if !vars.contains(&v) {
                vars.push(v);
                cards.push(c);
            }
        }
        let size: usize = cards.iter().product();
        let map_self: Vec<usize> = self.vars.iter().map(|v| vars.iter().position(|w| w == v).unwrap_or(0)).collect();
        let map_other: Vec<usize> = other.vars.iter().map(|v| vars.iter().position(|w| w == v).unwrap_or(0)).collect();
        let ss = self.strides();
        let so = other.strides();
        let mut assignment = vec![0usize; vars.len()];
        let mut values = Vec::with_capacity(size);
        for _ in 0..size {
            let ia: usize = map_self.iter().zip(&ss).map(|(&k, &st)| assignment[k] * st).sum();
            let ib: usize = map_other.iter().zip(&so).map(|(&k, &st)| assignment[k] * st).sum();
            values.push(self.values[ia] * other.values[ib]);
            increment(&mut assignment, &cards);
        }
        Factor { vars, cards, values }
    }

    fn sum_out(&self, var: usize) -> Factor {
        let Some(k) = self.position(var) else {
            return self.clone();
        };
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(k);
        cards.remove(k);
        let out = Factor {
            values: vec![0.0; cards.iter().product()],
            vars,
            cards,
        };
        self.fold_into(out, |assignment| {
            let mut a = assignment.to_vec();
            a.remove(k);
            Some(a)
        })
    }

    fn reduce(&self, var: usize, value: usize) -> Factor {
        let Some(k) = self.position(var) else {
            return self.clone();
        };
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(k);
        cards.remove(k);
        let out = Factor {
            values: vec![0.0; cards.iter().product()],
            vars,
            cards,
        };
        self.fold_into(out, |assignment| {
            if assignment[k] != value {
                return None;
            }
            let mut a = assignment.to_vec();
            a.remove(k);
            Some(a)
        })
    }

    /// Adds every entry of `self` into `out` at the assignment returned by
    /// `project` (skipped when `None`).
    fn fold_into(&self, mut out: Factor, project: impl Fn(&[usize]) -> Option<Vec<usize>>) -> Factor {
        let out_strides = out.strides();
        let mut assignment = vec![0usize; self.vars.len()];
        for &v in &self.values {
            if let Some(a) = project(&assignment) {
                let idx: usize = a.iter().zip(&out_strides).map(|(x, s)| x * s).sum();
                out.values[idx] += v;
            }
            increment(&mut assignment, &self.cards);
        }
        out
    }
}

fn increment(assignment: &mut [usize], cards: &[usize]) {
    for k in (0..assignment.len()).rev() {
        assignment[k] += 1;
        if assignment[k] < cards[k] {
            return;
        }
        assignment[k] = 0;
    }
}

/// Exact posterior `P(query | evidence)` by variable elimination.
///
/// Evidence is a list of `(variable, state)` pairs. Hidden variables are
/// eliminated greedily, smallest intermediate factor first.
pub fn variable_elimination(bn: &BeliefNetwork, query: usize, evidence: &[(usize, usize)]) -> Result<Vec<f64>> {
    if query >= bn.len() {
        return Err(Error::InvalidParameter(alloc::format!("query variable {query} does not exist")));
    }
    for &(var, value) in evidence {
        if var >= bn.len() {
            return Err(Error::InvalidParameter(alloc::format!("evidence variable {var} does not exist")));
        }
        if var == query {
            return Err(Error::InvalidParameter("query variable is also observed".into()));
        }
        if value >= bn.cardinality(var) {
            return Err(Error::InvalidParameter(alloc::format!(
                "state {value} outside the domain of {}",
                bn.nodes[var].variable.name
            )));
        }
        if evidence.iter().any(|&(v2, x2)| v2 == var && x2 != value) {
            return Err(Error::InconsistentEvidence);
        }
    }

    let mut factors: Vec<Factor> = (0..bn.len())
        .map(|v| {
            let mut f = bn.cpt_factor(v);
            for &(var, value) in evidence {
                f = f.reduce(var, value);
            }
            f
        })
        .collect();

    let mut hidden: Vec<usize> = (0..bn.len())
        .filter(|&v| v != query && !evidence.iter().any(|&(e, _)| e == v))
        .collect();

    while !hidden.is_empty() {
        // Pick the variable whose elimination creates the smallest factor.
        let (pos, _) = hidden
            .iter()
            .enumerate()
            .map(|(pos, &v)| {
                let mut scope: Vec<usize> = Vec::new();
                for f in factors.iter().filter(|f| f.vars.contains(&v)) {
                    for &w in &f.vars {
                        if w != v && !scope.contains(&w) {
                            scope.push(w);
                        }
                    }
                }
                let size: usize = scope.iter().map(|&w| bn.cardinality(w)).product();
                (pos, size)
            })
            .min_by_key(|&(pos, size)| (size, pos))
            .unwrap_or((0, 0));
        let var = hidden.remove(pos);
        let (touching, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.vars.contains(&var));
        factors = rest;
        let merged = touching.iter().fold(Factor::scalar(1.0), |acc, f| acc.product(f));
        factors.push(merged.sum_out(var));
    }

    let joint = factors.iter().fold(Factor::scalar(1.0), |acc, f| acc.product(f));
    let card = bn.cardinality(query);
    let mut posterior = vec![0.0; card];
    if joint.vars.is_empty() {
        // Query unconnected to everything after reduction cannot happen: its
        // own CPT always mentions it.
        return Err(Error::InvalidNetwork("query vanished during elimination".into()));
    }
    posterior.copy_from_slice(&joint.values);
    let z: f64 = posterior.iter().sum();
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::InconsistentEvidence);
    }
    for p in &mut posterior {
        *p /= z;
    }
    Ok(posterior)
}
