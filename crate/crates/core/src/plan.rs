//! Message plan and message reduction.
//!
//! Messages are grouped by transmitter set `Δ` into plan nodes, with
//! superposition edges along strict inclusion. The reduction keeps one
//! message per `Δ` (the one whose largest receiver index is smallest) and
//! then discards messages dominated by a strictly larger transmitter set,
//! receiver by receiver from the weakest.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    check_permutation, ConnectivityReport, IndexSet, MessageLabel, NetworkTopology,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanNode {
    pub delta: IndexSet,
    pub messages: IndexSet,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaccmPlan {
    /// Nodes keyed by `|Δ|`, each column sorted by `Δ`.
    pub columns: BTreeMap<usize, Vec<PlanNode>>,
    /// Edges `(Δ2, Δ1)` with `Δ2 ⊊ Δ1` and `|Δ1| = |Δ2| + 1`.
    pub edges: Vec<(IndexSet, IndexSet)>,
}

impl MaccmPlan {
    pub fn node_count(&self) -> usize {
        self.columns.values().map(|c| c.len()).sum()
    }
}

fn groups(topology: &NetworkTopology) -> BTreeMap<IndexSet, IndexSet> {
    let mut by_delta: BTreeMap<IndexSet, IndexSet> = BTreeMap::new();
    for (m, msg) in topology.messages().iter().enumerate() {
        by_delta
            .entry(msg.label.delta.clone())
            .or_default()
            .insert(m);
    }
    by_delta
}

pub fn build_plan(topology: &NetworkTopology) -> MaccmPlan {
    let by_delta = groups(topology);
    let mut columns: BTreeMap<usize, Vec<PlanNode>> = BTreeMap::new();
    for (delta, messages) in &by_delta {
        columns.entry(delta.len()).or_default().push(PlanNode {
            delta: delta.clone(),
            messages: messages.clone(),
        });
    }
    let mut edges = Vec::new();
    for lower in by_delta.keys() {
        for upper in by_delta.keys() {
            if upper.len() == lower.len() + 1 && lower.is_subset(upper) {
                edges.push((lower.clone(), upper.clone()));
            }
        }
    }
    MaccmPlan { columns, edges }
}

/// Outcome of the reduction. Receiver indices are 0-based.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReductionResult {
    /// Smallest largest-receiver index per transmitter set.
    pub theta: BTreeMap<String, usize>,
    pub m_tilde: IndexSet,
    pub m_tilde_per_receiver: Vec<IndexSet>,
    pub m_star: IndexSet,
    pub m_star_per_receiver: Vec<IndexSet>,
    /// Demands of each receiver minus those of all weaker receivers.
    pub effective_demands: Vec<IndexSet>,
    #[serde(skip)]
    labels: Vec<MessageLabel>,
    #[serde(skip)]
    demands: Vec<IndexSet>,
}

impl ReductionResult {
    pub fn k2(&self) -> usize {
        self.demands.len()
    }

    pub fn demands(&self, j: usize) -> &IndexSet {
        &self.demands[j]
    }
}

fn delta_key(delta: &IndexSet) -> String {
    let parts: Vec<String> = delta.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

/// Keeps, per transmitter set, the message whose largest receiver index is
/// smallest; ties go to the lexicographically smallest receiver set.
pub fn reduce_messages(topology: &NetworkTopology) -> ReductionResult {
    let labels: Vec<MessageLabel> = topology
        .messages()
        .iter()
        .map(|m| m.label.clone())
        .collect();
    let mut theta = BTreeMap::new();
    let mut m_tilde = IndexSet::new();
    for (delta, members) in groups(topology) {
        let chosen = members
            .iter()
            .filter_map(|&m| {
                labels[m]
                    .max_nabla()
                    .map(|t| (t, labels[m].nabla.iter().copied().collect::<Vec<_>>(), m))
            })
            .min();
        if let Some((t, _, m)) = chosen {
            theta.insert(delta_key(&delta), t);
            m_tilde.insert(m);
        }
    }
    let k2 = topology.k2();
    let demands: Vec<IndexSet> = (0..k2).map(|j| topology.demands(j).clone()).collect();
    let m_tilde_per_receiver = demands
        .iter()
        .map(|d| d.intersection(&m_tilde).copied().collect())
        .collect();
    let effective_demands = (0..k2)
        .map(|j| {
            let later: IndexSet = demands[j + 1..].iter().flatten().copied().collect();
            demands[j].difference(&later).copied().collect()
        })
        .collect();
    ReductionResult {
        theta,
        m_tilde,
        m_tilde_per_receiver,
        m_star: IndexSet::new(),
        m_star_per_receiver: vec![IndexSet::new(); k2],
        effective_demands,
        labels,
        demands,
    }
}

/// Fills in the retained subsets, from the weakest receiver to the
/// strongest: a message survives unless a message with a strictly larger
/// transmitter set remains outside the weaker receivers' reduced demands.
pub fn star_messages(reduction: &ReductionResult) -> ReductionResult {
    let mut out = reduction.clone();
    let k2 = reduction.k2();
    let mut later = IndexSet::new();
    for j in (0..k2).rev() {
        let pool: IndexSet = reduction.m_tilde.difference(&later).copied().collect();
        let kept: IndexSet = reduction.m_tilde_per_receiver[j]
            .difference(&later)
            .copied()
            .filter(|&m| {
                let d = &reduction.labels[m].delta;
                !pool.iter().any(|&o| {
                    let od = &reduction.labels[o].delta;
                    d.len() < od.len() && d.is_subset(od)
                })
            })
            .collect();
        out.m_star_per_receiver[j] = kept;
        later.extend(reduction.m_tilde_per_receiver[j].iter().copied());
    }
    out.m_star = out.m_star_per_receiver.iter().flatten().copied().collect();
    out
}

/// Both reduction stages.
pub fn reduce(topology: &NetworkTopology) -> ReductionResult {
    star_messages(&reduce_messages(topology))
}

/// For each receiver `j ≥ 1` (0-based) an ordering `λ_j` of the stronger
/// receivers `0..j`, and the nested message sets it induces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PermutationPlan {
    pub lambdas: BTreeMap<usize, Vec<usize>>,
    /// `sets[j][θ]`: effective demands of `j` unconnected to all of
    /// `λ_j(0..=θ)`.
    pub sets: BTreeMap<usize, Vec<IndexSet>>,
}

impl PermutationPlan {
    pub fn identity(k2: usize) -> Self {
        PermutationPlan {
            lambdas: (1..k2).map(|j| (j, (0..j).collect())).collect(),
            sets: BTreeMap::new(),
        }
    }

    /// Unspecified receivers get the identity ordering.
    pub fn new(k2: usize, lambdas: BTreeMap<usize, Vec<usize>>) -> Result<Self> {
        let mut plan = PermutationPlan::identity(k2);
        for (j, l) in lambdas {
            if j == 0 || j >= k2 {
                return Err(Error::InvalidPermutation(format!(
                    "orderings exist only for receivers 2..{}; got receiver {}",
                    k2,
                    j + 1
                )));
            }
            check_permutation(&l, j)?;
            plan.lambdas.insert(j, l);
        }
        Ok(plan)
    }

    pub fn set(&self, j: usize, theta: usize) -> &IndexSet {
        &self.sets[&j][theta]
    }

    /// Position of receiver `l` in `λ_j`.
    pub fn position(&self, j: usize, l: usize) -> Option<usize> {
        self.lambdas.get(&j)?.iter().position(|&x| x == l)
    }

    /// Every assignment of orderings for a network with `k2` receivers.
    pub fn all(k2: usize) -> Vec<PermutationPlan> {
        let mut out = vec![BTreeMap::new()];
        for j in 1..k2 {
            let perms = permutations(j);
            out = out
                .into_iter()
                .flat_map(|m: BTreeMap<usize, Vec<usize>>| {
                    perms.iter().map(move |p| {
                        let mut n = m.clone();
                        n.insert(j, p.clone());
                        n
                    })
                })
                .collect();
        }
        out.into_iter()
            .map(|lambdas| PermutationPlan {
                lambdas,
                sets: BTreeMap::new(),
            })
            .collect()
    }
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(left: &mut Vec<usize>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left.is_empty() {
            out.push(cur.clone());
            return;
        }
        for k in 0..left.len() {
            let v = left.remove(k);
            cur.push(v);
            rec(left, cur, out);
            cur.pop();
            left.insert(k, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut (0..n).collect(), &mut Vec::new(), &mut out);
    out
}

/// Populates the nested sets of a permutation plan.
pub fn lambda_sets(
    reduction: &ReductionResult,
    connectivity: &ConnectivityReport,
    plan: &PermutationPlan,
) -> Result<PermutationPlan> {
    let k2 = reduction.k2();
    let mut out = PermutationPlan::new(k2, plan.lambdas.clone())?;
    for j in 1..k2 {
        let lambda = &out.lambdas[&j];
        let mut cur = reduction.effective_demands[j].clone();
        let mut chain = Vec::with_capacity(j);
        for &l in lambda {
            cur = cur
                .intersection(connectivity.unconnected_messages(l))
                .copied()
                .collect();
            chain.push(cur.clone());
        }
        out.sets.insert(j, chain);
    }
    Ok(out)
}
