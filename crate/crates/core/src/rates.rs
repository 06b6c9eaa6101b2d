//! Sum-rate expressions: construction of outer bounds and achievable rates,
//! evaluation on discrete joints or Gaussian inputs, grid maximization, and
//! the capacity report that ties them to the ordering checks.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::GaussianBackend;
use crate::info::{
    brute_force_max, induced_joint, msgs, outputs, Atom, AtomEval, EncoderSpec, Evaluator,
    JointPmf, SearchCaps, Var, VarSet,
};
use crate::model::{connectivity, Channel, ConnectivityReport, IndexSet, NetworkTopology};
use crate::ordering::{
    build_condition_set, check_argmax_conditions, check_query, combined_status, ArgmaxMember,
    ArgmaxVerdict, CmiComparison, ConditionVerdict, FalsifierConfig, Status, GAP_TOL,
};
use crate::plan::{lambda_sets, reduce, PermutationPlan, ReductionResult};
use crate::theorem::{AnalysisParams, ReceiverGrouping, SchemeId, TheoremId};

/// Default tolerance for declaring two maxima equal.
pub const CAPACITY_TOL: f64 = 1e-6;

/// Ties within this distance count as active in branch reports.
const TIE_TOL: f64 = 1e-12;

/// Largest receiver count for which every permutation plan is tried.
pub const SWEEP_MAX_RECEIVERS: usize = 4;

/// Sum/min tree of mutual-information atoms.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Atom(Atom),
    Sum(Vec<Expr>),
    Min(Vec<Expr>),
}

impl Expr {
    pub fn atom(a: VarSet, b: VarSet, c: VarSet) -> Expr {
        Expr::Atom(Atom::new(a, b, c))
    }

    /// Flattens nested sums and drops vanishing atoms.
    pub fn sum(children: Vec<Expr>) -> Expr {
        let mut out = Vec::new();
        for c in children {
            match c {
                Expr::Sum(inner) => out.extend(inner),
                Expr::Atom(a) if a.is_trivial() => {}
                other => out.push(other),
            }
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            Expr::Sum(out)
        }
    }

    /// Flattens nested minima; a single child stands for itself.
    pub fn min(children: Vec<Expr>) -> Expr {
        let mut out = Vec::new();
        for c in children {
            match c {
                Expr::Min(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            Expr::Min(out)
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        match self {
            Expr::Atom(a) => vec![a],
            Expr::Sum(c) | Expr::Min(c) => c.iter().flat_map(|e| e.atoms()).collect(),
        }
    }

    pub fn render(&self, name: &dyn Fn(Var) -> String) -> String {
        match self {
            Expr::Atom(a) if a.is_trivial() => "0".into(),
            Expr::Atom(a) => a.render(name),
            Expr::Sum(c) if c.is_empty() => "0".into(),
            Expr::Sum(c) => c
                .iter()
                .map(|e| match e {
                    Expr::Sum(_) => format!("({})", e.render(name)),
                    _ => e.render(name),
                })
                .collect::<Vec<_>>()
                .join(" + "),
            Expr::Min(c) => format!(
                "min{{{}}}",
                c.iter()
                    .map(|e| e.render(name))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        }
    }
}

/// Variable names using the topology's message ids.
pub fn var_namer(topology: &NetworkTopology) -> impl Fn(Var) -> String + '_ {
    move |v| match v {
        Var::Msg(m) => topology
            .messages()
            .get(m)
            .map(|x| x.id.clone())
            .unwrap_or_else(|| v.to_string()),
        other => other.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SumRateExpression {
    pub root: Expr,
    /// Bound or scheme the expression came from.
    pub source: String,
    /// Messages fixed to a single value during maximization.
    pub nullified: IndexSet,
}

impl SumRateExpression {
    pub fn render(&self, topology: &NetworkTopology) -> String {
        self.root.render(&var_namer(topology))
    }
}

/// Values of one min node at an evaluation point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinReport {
    /// Child indices from the root, dot separated.
    pub path: String,
    pub values: Vec<f64>,
    /// Smallest-index child attaining the minimum.
    pub active: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub value: f64,
    pub mins: Vec<MinReport>,
}

fn eval_node(
    e: &Expr,
    backend: &dyn AtomEval,
    path: &str,
    mins: &mut Vec<MinReport>,
) -> Result<f64> {
    let child_path = |k: usize| {
        if path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{}", path, k)
        }
    };
    match e {
        Expr::Atom(a) => backend.atom(a),
        Expr::Sum(c) => {
            let mut s = 0.0;
            for (k, x) in c.iter().enumerate() {
                s += eval_node(x, backend, &child_path(k), mins)?;
            }
            Ok(s)
        }
        Expr::Min(c) => {
            let slot = mins.len();
            mins.push(MinReport {
                path: path.to_string(),
                values: Vec::new(),
                active: 0,
            });
            let mut values = Vec::with_capacity(c.len());
            for (k, x) in c.iter().enumerate() {
                values.push(eval_node(x, backend, &child_path(k), mins)?);
            }
            let m = values.iter().copied().fold(f64::INFINITY, f64::min);
            mins[slot].active = values.iter().position(|&v| v <= m + TIE_TOL).unwrap_or(0);
            mins[slot].values = values;
            Ok(m)
        }
    }
}

/// Bottom-up evaluation with a report for every min node.
pub fn eval_expression(expr: &Expr, backend: &dyn AtomEval) -> Result<Evaluation> {
    let mut mins = Vec::new();
    let value = eval_node(expr, backend, "", &mut mins)?;
    Ok(Evaluation { value, mins })
}

/// Value only, skipping the branch report.
pub fn eval_value(expr: &Expr, backend: &dyn AtomEval) -> Result<f64> {
    match expr {
        Expr::Atom(a) => backend.atom(a),
        Expr::Sum(c) => c.iter().map(|x| eval_value(x, backend)).sum(),
        Expr::Min(c) => c
            .iter()
            .map(|x| eval_value(x, backend))
            .try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v))),
    }
}

/// Branches of the min-of-sums normal form, with chain-rule pairs merged and
/// vanishing atoms dropped. Atoms within a branch and the branches are
/// sorted, and duplicate branches removed.
pub fn canonical_branches(expr: &Expr) -> Vec<Vec<Atom>> {
    fn expand(e: &Expr) -> Vec<Vec<Atom>> {
        match e {
            Expr::Atom(a) => vec![vec![a.clone()]],
            Expr::Min(c) => c.iter().flat_map(expand).collect(),
            Expr::Sum(c) => c.iter().fold(vec![Vec::new()], |acc, x| {
                let parts = expand(x);
                acc.iter()
                    .flat_map(|l| {
                        parts.iter().map(move |r| {
                            let mut v = l.clone();
                            v.extend(r.iter().cloned());
                            v
                        })
                    })
                    .collect()
            }),
        }
    }
    let mut out: BTreeSet<Vec<Atom>> = BTreeSet::new();
    for b in expand(expr) {
        let mut atoms: Vec<Atom> = b.into_iter().filter(|a| !a.is_trivial()).collect();
        while let Some((i, j, merged)) = find_chain_pair(&atoms) {
            let (hi, lo) = if i > j { (i, j) } else { (j, i) };
            atoms.remove(hi);
            atoms.remove(lo);
            atoms.push(merged);
        }
        atoms.sort();
        out.insert(atoms);
    }
    out.into_iter().collect()
}

/// `I(A1;B|C1) + I(A2;B|C2)` with `C1 = C2 ∪ A2` equals `I(A1,A2;B|C2)`.
fn find_chain_pair(atoms: &[Atom]) -> Option<(usize, usize, Atom)> {
    for (i, x) in atoms.iter().enumerate() {
        for (j, y) in atoms.iter().enumerate() {
            if i == j || x.b != y.b || !x.a.is_disjoint(&y.a) {
                continue;
            }
            let c: VarSet = y.c.union(&y.a).copied().collect();
            if x.c == c {
                let a = x.a.union(&y.a).copied().collect();
                return Some((i, j, Atom::new(a, x.b.clone(), y.c.clone())));
            }
        }
    }
    None
}

fn with_q(mut set: VarSet) -> VarSet {
    set.insert(Var::Q);
    set
}

fn mi(a: &IndexSet, b: &IndexSet, c: &IndexSet) -> Expr {
    Expr::atom(msgs(a), outputs(b), with_q(msgs(c)))
}

fn union_all<'a>(sets: impl IntoIterator<Item = &'a IndexSet>) -> IndexSet {
    sets.into_iter().flat_map(|s| s.iter().copied()).collect()
}

/// Messages kept in expressions: the reduced set when requested.
fn kept_messages(
    topology: &NetworkTopology,
    reduction: &ReductionResult,
    params: &AnalysisParams,
) -> IndexSet {
    if params.m_star {
        reduction.m_star.clone()
    } else {
        topology.all_messages()
    }
}

/// Outer bound of a named result.
///
/// `T3` and `T7`-family results share the chain bound of `T5`;
/// the many-to-one results use the grouped bound with the last receiver
/// split off.
pub fn build_outer_expression(
    topology: &NetworkTopology,
    reduction: &ReductionResult,
    which: TheoremId,
    params: &AnalysisParams,
) -> Result<SumRateExpression> {
    let keep = kept_messages(topology, reduction, params);
    let nullified: IndexSet = topology.all_messages().difference(&keep).copied().collect();
    let d = |j: usize| -> IndexSet { topology.demands(j).intersection(&keep).copied().collect() };
    let k2 = topology.k2();
    let chain = |blocks: &[(IndexSet, IndexSet)]| -> Expr {
        // Each block: (messages, receivers); conditioned on later blocks.
        Expr::sum(
            (0..blocks.len())
                .map(|b| {
                    mi(
                        &blocks[b].0,
                        &blocks[b].1,
                        &union_all(blocks[b + 1..].iter().map(|x| &x.0)),
                    )
                })
                .collect(),
        )
    };
    let two = || -> Result<()> {
        if k2 != 2 {
            Err(Error::BadParams(format!(
                "{} bound applies to two-receiver networks",
                which
            )))
        } else {
            Ok(())
        }
    };
    let t2a = || chain(&[(d(0), IndexSet::from([0])), (d(1), IndexSet::from([1]))]);
    let t2b = || {
        mi(
            &d(0).union(&d(1)).copied().collect(),
            &IndexSet::from([0]),
            &IndexSet::new(),
        )
    };
    let singles =
        || -> Vec<(IndexSet, IndexSet)> { (0..k2).map(|j| (d(j), IndexSet::from([j]))).collect() };
    let grouped = |g: &ReceiverGrouping| -> Vec<(IndexSet, IndexSet)> {
        g.blocks
            .iter()
            .map(|b| {
                (
                    union_all(b.iter().map(|&j| topology.demands(j)))
                        .intersection(&keep)
                        .copied()
                        .collect(),
                    b.clone(),
                )
            })
            .collect()
    };
    let root = match which {
        TheoremId::T2A | TheoremId::T3 => {
            two()?;
            t2a()
        }
        TheoremId::T2B => {
            two()?;
            t2b()
        }
        TheoremId::T4 => {
            two()?;
            Expr::min(vec![t2a(), t2b()])
        }
        TheoremId::T5 | TheoremId::T6 | TheoremId::T7 | TheoremId::FullyConnected => {
            chain(&singles())
        }
        TheoremId::T8 => {
            let s = params
                .schedule
                .as_ref()
                .ok_or_else(|| Error::BadParams("T8 needs a schedule".into()))?;
            let blocks: Vec<(IndexSet, IndexSet)> = (0..s.cuts.len())
                .map(|b| {
                    (
                        s.block_messages(topology, b)
                            .intersection(&keep)
                            .copied()
                            .collect(),
                        IndexSet::from([s.block_receiver(b)]),
                    )
                })
                .collect();
            chain(&blocks)
        }
        TheoremId::T9 => {
            let g = params
                .grouping
                .as_ref()
                .ok_or_else(|| Error::BadParams("T9 needs a receiver grouping".into()))?;
            chain(&grouped(g))
        }
        TheoremId::ManyToOne | TheoremId::ManyToOneIndependent => {
            if k2 < 2 {
                return Err(Error::BadParams(format!(
                    "{} needs at least two receivers",
                    which
                )));
            }
            let g =
                ReceiverGrouping::new(k2, vec![(0..k2 - 1).collect(), IndexSet::from([k2 - 1])])?;
            chain(&grouped(&g))
        }
        TheoremId::Pairwise | TheoremId::Strong3 => {
            return Err(Error::BadParams(format!(
                "{} is a condition check without a bound of its own",
                which
            )))
        }
    };
    Ok(SumRateExpression {
        root,
        source: format!("outer bound {}", which),
        nullified,
    })
}

/// Decoding order of each receiver group's effective demands: messages
/// unconnected to the most receivers first, as layered by the permutation
/// plan. Explicit per-receiver orders take precedence.
fn group_orders(
    reduction: &ReductionResult,
    plan: &PermutationPlan,
    params: &AnalysisParams,
    keep: &IndexSet,
) -> Result<Vec<Vec<usize>>> {
    let k2 = reduction.k2();
    let mut out = Vec::with_capacity(k2);
    for j in 0..k2 {
        let eff: IndexSet = reduction.effective_demands[j]
            .intersection(keep)
            .copied()
            .collect();
        let order: Vec<usize> = if let Some(o) = params.decode_orders.get(&j) {
            let given: IndexSet = o.iter().copied().collect();
            if given.len() != o.len() || given != eff {
                return Err(Error::BadParams(format!(
                    "decode order for receiver {} must list each of its effective demands once",
                    j + 1
                )));
            }
            o.clone()
        } else {
            let mut order = Vec::new();
            let mut placed = IndexSet::new();
            let sets = plan.sets.get(&j).cloned().unwrap_or_default();
            for s in sets.iter().rev().chain(std::iter::once(&eff)) {
                for &m in s {
                    if eff.contains(&m) && placed.insert(m) {
                        order.push(m);
                    }
                }
            }
            order
        };
        out.push(order);
    }
    Ok(out)
}

/// Achievable sum-rate of a decoding scheme.
pub fn build_achievable_expression(
    topology: &NetworkTopology,
    connectivity: &ConnectivityReport,
    reduction: &ReductionResult,
    scheme: SchemeId,
    params: &AnalysisParams,
) -> Result<SumRateExpression> {
    let k2 = topology.k2();
    let keep = kept_messages(topology, reduction, params);
    let nullified: IndexSet = topology.all_messages().difference(&keep).copied().collect();
    let d = |j: usize| -> IndexSet { topology.demands(j).intersection(&keep).copied().collect() };
    let root = match scheme {
        SchemeId::Tin => {
            for a in 0..k2 {
                for b in a + 1..k2 {
                    if !topology.demands(a).is_disjoint(topology.demands(b)) {
                        return Err(Error::BadParams(
                            "interference-as-noise decoding needs disjoint demand sets".into(),
                        ));
                    }
                }
            }
            Expr::sum(
                (0..k2)
                    .map(|j| mi(&d(j), &IndexSet::from([j]), &IndexSet::new()))
                    .collect(),
            )
        }
        SchemeId::SuccessiveJoint => {
            if k2 != 2 {
                return Err(Error::BadParams(
                    "successive-joint decoding is defined for two receivers".into(),
                ));
            }
            let (d1, d2) = (d(0), d(1));
            let own = mi(&d1, &IndexSet::from([0]), &d2);
            let items: Vec<usize> = d2.iter().copied().collect();
            if items.len() > 16 {
                return Err(Error::CapExceeded {
                    what: "subsets of the weaker receiver's messages".into(),
                    estimate: 2f64.powi(items.len() as i32),
                    cap: 65536.0,
                });
            }
            let branches = (0..1usize << items.len())
                .map(|mask| {
                    let omega: IndexSet = (0..items.len())
                        .filter(|b| mask >> b & 1 == 1)
                        .map(|b| items[b])
                        .collect();
                    let rest: IndexSet = d2.difference(&omega).copied().collect();
                    Expr::sum(vec![
                        mi(&omega, &IndexSet::from([0]), &rest),
                        mi(&rest, &IndexSet::from([1]), &omega),
                    ])
                })
                .collect();
            Expr::sum(vec![own, Expr::min(branches)])
        }
        SchemeId::Successive => {
            let plan = lambda_sets(reduction, connectivity, &params.lambdas)?;
            let orders = group_orders(reduction, &plan, params, &keep)?;
            // decoded[d]: messages already decoded at receiver d.
            let mut decoded: Vec<IndexSet> = vec![IndexSet::new(); k2];
            let mut terms = Vec::new();
            for group in (0..k2).rev() {
                for &m in &orders[group] {
                    let decoders: Vec<usize> = (0..=group)
                        .rev()
                        .filter(|&r| {
                            r == group || !connectivity.unconnected_messages(r).contains(&m)
                        })
                        .collect();
                    let steps = decoders
                        .iter()
                        .map(|&r| mi(&IndexSet::from([m]), &IndexSet::from([r]), &decoded[r]))
                        .collect();
                    terms.push(Expr::min(steps));
                    for &r in &decoders {
                        decoded[r].insert(m);
                    }
                }
            }
            Expr::sum(terms)
        }
    };
    Ok(SumRateExpression {
        root,
        source: format!("achievable {}", scheme),
        nullified,
    })
}

/// Maximum of an expression over the supported input family.
#[derive(Clone, Debug, Serialize)]
pub struct SumRateResult {
    pub value: f64,
    /// Evaluated only at independent full-power Gaussian inputs.
    pub gaussian_restricted: bool,
    pub argmax: Vec<EncoderSpec>,
    pub argmax_count: u64,
    pub points: u64,
    /// Branch values at the first argmax member.
    pub breakdown: Evaluation,
}

pub fn maximize_expression(
    topology: &NetworkTopology,
    channel: &Channel,
    expr: &SumRateExpression,
    caps: &SearchCaps,
) -> Result<SumRateResult> {
    match channel {
        Channel::Gaussian(g) => {
            let backend = GaussianBackend::new(topology, g)?;
            let breakdown = eval_expression(&expr.root, &backend)?;
            Ok(SumRateResult {
                value: breakdown.value,
                gaussian_restricted: true,
                argmax: Vec::new(),
                argmax_count: 1,
                points: 1,
                breakdown,
            })
        }
        Channel::Discrete(c) => {
            let objective = |j: &JointPmf| eval_value(&expr.root, &Evaluator::new(j));
            let best = brute_force_max(topology, c, &objective, caps, &expr.nullified)?;
            let joint = induced_joint(topology, c, &best.argmax[0])?;
            let breakdown = eval_expression(&expr.root, &Evaluator::new(&joint))?;
            Ok(SumRateResult {
                value: best.value,
                gaussian_restricted: false,
                argmax: best.argmax,
                argmax_count: best.argmax_count,
                points: best.points,
                breakdown,
            })
        }
    }
}

/// Scheme used when none is requested.
pub fn default_scheme(theorem: TheoremId) -> SchemeId {
    match theorem {
        TheoremId::T4 => SchemeId::SuccessiveJoint,
        TheoremId::ManyToOne | TheoremId::ManyToOneIndependent => SchemeId::Tin,
        _ => SchemeId::Successive,
    }
}

/// Comparisons whose validity on the outer bound's argmax makes the
/// successive-joint rate meet the two-branch bound. For each nonempty
/// proper subset `Ω` of the weaker receiver's messages, the forward list
/// has `I(Ω;Y2|Q) ≤ I(Ω;Y1|rest,Q)` and the reversed list
/// `I(rest;Y1|Q) ≤ I(rest;Y2|Ω,Q)`.
pub fn joint_decoding_comparisons(
    topology: &NetworkTopology,
    weaker_messages: &IndexSet,
) -> (Vec<CmiComparison>, Vec<CmiComparison>) {
    let items: Vec<usize> = weaker_messages.iter().copied().collect();
    let name = var_namer(topology);
    let (mut fwd, mut rev) = (Vec::new(), Vec::new());
    let (y1, y2) = (IndexSet::from([0]), IndexSet::from([1]));
    for mask in 1..(1usize << items.len()).saturating_sub(1) {
        let omega: IndexSet = (0..items.len())
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| items[b])
            .collect();
        let rest: IndexSet = weaker_messages.difference(&omega).copied().collect();
        let atom = |a: &IndexSet, b: &IndexSet, c: &IndexSet| {
            Atom::new(msgs(a), outputs(b), with_q(msgs(c)))
        };
        let none = IndexSet::new();
        let f = (atom(&omega, &y2, &none), atom(&omega, &y1, &rest));
        let r = (atom(&rest, &y1, &none), atom(&rest, &y2, &omega));
        fwd.push(CmiComparison {
            label: format!("{} <= {}", f.0.render(&name), f.1.render(&name)),
            lhs: f.0,
            rhs: f.1,
        });
        rev.push(CmiComparison {
            label: format!("{} <= {}", r.0.render(&name), r.1.render(&name)),
            lhs: r.0,
            rhs: r.1,
        });
    }
    (fwd, rev)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CapacityStatus {
    /// Conditions certified and the bounds meet.
    Capacity,
    /// Conditions certified; the outer bound holds but is not met.
    Bounded,
    /// Some condition is violated or undecided; no bound is asserted.
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateSummary {
    pub expression: String,
    pub value: f64,
    pub gaussian_restricted: bool,
    pub argmax: Vec<EncoderSpec>,
    pub argmax_count: u64,
    pub active_branches: Vec<MinReport>,
}

impl RateSummary {
    fn new(topology: &NetworkTopology, expr: &SumRateExpression, r: SumRateResult) -> Self {
        RateSummary {
            expression: expr.render(topology),
            value: r.value,
            gaussian_restricted: r.gaussian_restricted,
            argmax: r.argmax,
            argmax_count: r.argmax_count,
            active_branches: r.breakdown.mins,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub capacity: f64,
    pub argmax: f64,
    pub violation_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CapacityReport {
    pub theorem: TheoremId,
    pub scheme: SchemeId,
    pub status: CapacityStatus,
    pub conditions_status: Status,
    pub conditions: Vec<ConditionVerdict>,
    /// Orderings used for the permutation-plan conditions, 1-based.
    pub lambdas: Option<Vec<(usize, Vec<usize>)>>,
    /// Whether the weaker receiver keeps a single reduced message.
    pub single_star_message: Option<bool>,
    pub argmax_check: Option<ArgmaxVerdict>,
    pub outer: Option<RateSummary>,
    pub achievable: RateSummary,
    pub gap: Option<f64>,
    pub tolerances: Tolerances,
    pub notes: Vec<String>,
}

/// Settings for a capacity analysis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisOptions {
    pub caps: SearchCaps,
    pub falsifier: FalsifierConfig,
    pub tolerance: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            caps: SearchCaps::default(),
            falsifier: FalsifierConfig::default(),
            tolerance: CAPACITY_TOL,
        }
    }
}

/// Condition verdicts for a result, trying every permutation plan when
/// asked to. Returns the verdicts and the parameters they were built with.
pub fn evaluate_conditions(
    topology: &NetworkTopology,
    channel: &Channel,
    conn: &ConnectivityReport,
    reduction: &ReductionResult,
    theorem: TheoremId,
    params: &AnalysisParams,
    falsifier: &FalsifierConfig,
) -> Result<(Vec<ConditionVerdict>, AnalysisParams)> {
    let run = |p: &AnalysisParams| -> Result<Vec<ConditionVerdict>> {
        build_condition_set(topology, conn, reduction, theorem, p)?
            .iter()
            .map(|q| check_query(channel, q, falsifier))
            .collect()
    };
    if theorem != TheoremId::T7 || !params.sweep_lambdas {
        return Ok((run(params)?, params.clone()));
    }
    if topology.k2() > SWEEP_MAX_RECEIVERS {
        return Err(Error::CapExceeded {
            what: "permutation plans".into(),
            estimate: (1..topology.k2())
                .map(|j| (1..=j).product::<usize>() as f64)
                .product(),
            cap: 12.0,
        });
    }
    let mut first: Option<(Vec<ConditionVerdict>, AnalysisParams)> = None;
    for plan in PermutationPlan::all(topology.k2()) {
        let mut p = params.clone();
        p.lambdas = plan;
        let v = run(&p)?;
        if combined_status(v.iter().map(|c| &c.status)) == Status::Holds {
            return Ok((v, p));
        }
        first.get_or_insert((v, p));
    }
    Ok(first.expect("at least one plan exists"))
}

/// Checks the conditions of a result, maximizes its outer bound and the
/// chosen scheme, and declares capacity only when both are certified and
/// meet.
pub fn capacity_report(
    topology: &NetworkTopology,
    channel: &Channel,
    theorem: TheoremId,
    scheme: Option<SchemeId>,
    params: &AnalysisParams,
    options: &AnalysisOptions,
) -> Result<CapacityReport> {
    let conn = connectivity(topology, channel)?;
    let reduction = reduce(topology);
    let scheme = scheme.unwrap_or_else(|| default_scheme(theorem));
    let mut notes = Vec::new();
    let (conditions, params) = evaluate_conditions(
        topology,
        channel,
        &conn,
        &reduction,
        theorem,
        params,
        &options.falsifier,
    )?;
    let conditions_status = combined_status(conditions.iter().map(|c| &c.status));
    let ach_expr = build_achievable_expression(topology, &conn, &reduction, scheme, &params)?;
    let ach = maximize_expression(topology, channel, &ach_expr, &options.caps)?;
    if ach.gaussian_restricted {
        notes.push(
            "Gaussian-restricted optimum: independent full-power Gaussian inputs, no time-sharing"
                .into(),
        );
    } else {
        notes.push(format!(
            "grid-certified only: grid {}, |Q| = {}",
            options.caps.grid, options.caps.q_card
        ));
    }
    let mut outer = None;
    let mut gap = None;
    let mut argmax_check = None;
    let mut single_star = None;
    let mut extra_ok = true;
    if conditions_status == Status::Holds {
        let outer_expr = build_outer_expression(topology, &reduction, theorem, &params)?;
        let o = maximize_expression(topology, channel, &outer_expr, &options.caps)?;
        gap = Some(o.value - ach.value);
        if theorem == TheoremId::T4 {
            let star_weak = &reduction.m_star_per_receiver[1];
            let single = star_weak.len() == 1;
            single_star = Some(single);
            if !single {
                let weaker: IndexSet = if params.m_star {
                    star_weak.clone()
                } else {
                    topology.demands(1).clone()
                };
                let (fwd, rev) = joint_decoding_comparisons(topology, &weaker);
                let verdict = match channel {
                    Channel::Gaussian(g) => {
                        let backend = GaussianBackend::new(topology, g)?;
                        check_argmax_conditions(
                            &fwd,
                            &rev,
                            &[ArgmaxMember::Gaussian(&backend)],
                            options.tolerance,
                        )?
                    }
                    Channel::Discrete(c) => {
                        let joints = o
                            .argmax
                            .iter()
                            .map(|s| induced_joint(topology, c, s))
                            .collect::<Result<Vec<_>>>()?;
                        let members: Vec<ArgmaxMember> =
                            joints.iter().map(ArgmaxMember::Discrete).collect();
                        check_argmax_conditions(&fwd, &rev, &members, options.tolerance)?
                    }
                };
                extra_ok = verdict.certificate.is_some();
                argmax_check = Some(verdict);
            }
        }
        outer = Some(RateSummary::new(topology, &outer_expr, o));
    }
    let status = match (conditions_status, gap) {
        (Status::Holds, Some(g)) if extra_ok && g.abs() <= options.tolerance => {
            CapacityStatus::Capacity
        }
        (Status::Holds, Some(_)) => CapacityStatus::Bounded,
        _ => CapacityStatus::Inconclusive,
    };
    if let Some(g) = gap {
        if g < -options.tolerance {
            notes.push("achievable rate exceeds the outer bound; check grid settings".into());
        }
    }
    let lambdas = (theorem == TheoremId::T7).then(|| {
        params
            .lambdas
            .lambdas
            .iter()
            .map(|(&j, l)| (j + 1, l.iter().map(|&x| x + 1).collect()))
            .collect()
    });
    Ok(CapacityReport {
        theorem,
        scheme,
        status,
        conditions_status,
        conditions,
        lambdas,
        single_star_message: single_star,
        argmax_check,
        outer,
        achievable: RateSummary::new(topology, &ach_expr, ach),
        gap,
        tolerances: Tolerances {
            capacity: options.tolerance,
            argmax: options.caps.argmax_tol,
            violation_gap: GAP_TOL,
        },
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::Var::*;
    use crate::model::GaussianChannel;

    fn set(v: &[Var]) -> VarSet {
        v.iter().copied().collect()
    }

    #[test]
    fn chain_pairs_merge() {
        let e = Expr::sum(vec![
            Expr::atom(set(&[Msg(0)]), set(&[Output(0)]), set(&[Msg(1), Q])),
            Expr::atom(set(&[Msg(1)]), set(&[Output(0)]), set(&[Q])),
        ]);
        let b = canonical_branches(&e);
        assert_eq!(
            b,
            vec![vec![Atom::new(
                set(&[Msg(0), Msg(1)]),
                set(&[Output(0)]),
                set(&[Q])
            )]]
        );
    }

    #[test]
    fn min_dominance() {
        struct Fixed;
        impl AtomEval for Fixed {
            fn atom(&self, a: &Atom) -> Result<f64> {
                Ok(if a.a.contains(&Msg(0)) { 0.4 } else { 0.3 })
            }
        }
        let a = Expr::atom(set(&[Msg(0)]), set(&[Output(0)]), VarSet::new());
        let b = Expr::atom(set(&[Msg(1)]), set(&[Output(0)]), VarSet::new());
        let e = Expr::min(vec![a.clone(), Expr::sum(vec![a, b])]);
        let r = eval_expression(&e, &Fixed).unwrap();
        assert!((r.value - 0.4).abs() < 1e-15);
        assert_eq!(r.mins[0].active, 0);
    }

    fn two_pair() -> NetworkTopology {
        NetworkTopology::from_sets(&[vec!["A"], vec!["B"]], &[vec!["A"], vec!["B"]]).unwrap()
    }

    #[test]
    fn successive_on_two_users() {
        let t = two_pair();
        let ch = Channel::Gaussian(
            GaussianChannel::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0; 2]).unwrap(),
        );
        let conn = connectivity(&t, &ch).unwrap();
        let e = build_achievable_expression(
            &t,
            &conn,
            &reduce(&t),
            SchemeId::Successive,
            &AnalysisParams::defaults(2),
        )
        .unwrap();
        assert_eq!(e.render(&t), "min{I(B;Y2|Q), I(B;Y1|Q)} + I(A;Y1|B,Q)");
    }

    #[test]
    fn unconnected_messages_are_skipped() {
        let t = two_pair();
        let ch = Channel::Gaussian(
            GaussianChannel::new(vec![vec![1.0, 0.0], vec![1.0, 1.0]], vec![1.0; 2]).unwrap(),
        );
        let conn = connectivity(&t, &ch).unwrap();
        let e = build_achievable_expression(
            &t,
            &conn,
            &reduce(&t),
            SchemeId::Successive,
            &AnalysisParams::defaults(2),
        )
        .unwrap();
        assert_eq!(e.render(&t), "I(B;Y2|Q) + I(A;Y1|Q)");
    }

    #[test]
    fn tin_needs_disjoint_demands() {
        let t = NetworkTopology::from_sets(&[vec!["A"]], &[vec!["A"], vec!["A"]]).unwrap();
        let ch =
            Channel::Gaussian(GaussianChannel::new(vec![vec![1.0], vec![1.0]], vec![1.0]).unwrap());
        let conn = connectivity(&t, &ch).unwrap();
        assert!(build_achievable_expression(
            &t,
            &conn,
            &reduce(&t),
            SchemeId::Tin,
            &AnalysisParams::defaults(2)
        )
        .is_err());
    }

    #[test]
    fn outer_bounds_render() {
        let t = two_pair();
        let r = reduce(&t);
        let p = AnalysisParams::defaults(2);
        let e = build_outer_expression(&t, &r, TheoremId::T2A, &p).unwrap();
        assert_eq!(e.render(&t), "I(A;Y1|B,Q) + I(B;Y2|Q)");
        let e = build_outer_expression(&t, &r, TheoremId::T4, &p).unwrap();
        assert_eq!(e.render(&t), "min{I(A;Y1|B,Q) + I(B;Y2|Q), I(A,B;Y1|Q)}");
        assert!(build_outer_expression(&t, &r, TheoremId::Strong3, &p).is_err());
    }
}
