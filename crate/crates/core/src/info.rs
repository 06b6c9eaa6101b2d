//! Finite-alphabet probability engine: dense joint pmfs, entropies and
//! conditional mutual information, the joint induced by an encoder
//! specification, and an exhaustive grid maximizer.
//!
//! All logarithms are base 2.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{decode_index, DiscreteChannel, IndexSet, NetworkTopology};

/// Default cap on dense joint size.
pub const MAX_CELLS: usize = 1 << 20;

const PMF_TOL: f64 = 1e-12;

/// A random variable in a joint pmf roster.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Var {
    /// Time-sharing variable.
    Q,
    /// Auxiliary or test-only variable.
    Aux(usize),
    Msg(usize),
    Input(usize),
    Output(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Q => write!(f, "Q"),
            Var::Msg(m) => write!(f, "M#{}", m + 1),
            Var::Input(i) => write!(f, "X{}", i + 1),
            Var::Output(j) => write!(f, "Y{}", j + 1),
            Var::Aux(0) => write!(f, "U"),
            Var::Aux(k) => write!(f, "U{}", k),
        }
    }
}

pub type VarSet = BTreeSet<Var>;

pub fn msgs(set: &IndexSet) -> VarSet {
    set.iter().map(|&m| Var::Msg(m)).collect()
}

pub fn inputs(set: &IndexSet) -> VarSet {
    set.iter().map(|&i| Var::Input(i)).collect()
}

pub fn outputs(set: &IndexSet) -> VarSet {
    set.iter().map(|&j| Var::Output(j)).collect()
}

/// Dense joint pmf over a roster of finite variables, row-major with the
/// first roster entry most significant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointPmf {
    roster: Vec<(Var, usize)>,
    probs: Vec<f64>,
}

impl JointPmf {
    pub fn new(roster: Vec<(Var, usize)>, probs: Vec<f64>) -> Result<Self> {
        let unique: BTreeSet<Var> = roster.iter().map(|r| r.0).collect();
        if unique.len() != roster.len() {
            return Err(Error::Overlap("roster lists a variable twice".into()));
        }
        if roster.len() > 64 {
            return Err(Error::Dimension(
                "at most 64 variables are supported".into(),
            ));
        }
        let cells = roster
            .iter()
            .try_fold(1usize, |acc, r| acc.checked_mul(r.1));
        if cells != Some(probs.len()) || roster.iter().any(|r| r.1 == 0) {
            return Err(Error::Dimension(format!(
                "pmf has {} cells but the roster implies {:?}",
                probs.len(),
                cells
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Dimension(
                "pmf has a negative or non-finite entry".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_TOL {
            return Err(Error::Dimension(format!("pmf sums to {}", total)));
        }
        Ok(JointPmf { roster, probs })
    }

    pub fn roster(&self) -> &[(Var, usize)] {
        &self.roster
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn position(&self, var: Var) -> Option<usize> {
        self.roster.iter().position(|r| r.0 == var)
    }

    pub fn card(&self, var: Var) -> Option<usize> {
        self.roster.iter().find(|r| r.0 == var).map(|r| r.1)
    }

    fn mask(&self, vars: &VarSet) -> Result<u64> {
        vars.iter().try_fold(0u64, |acc, v| {
            self.position(*v)
                .map(|k| acc | (1u64 << k))
                .ok_or_else(|| Error::UnknownVariable(v.to_string()))
        })
    }

    /// Marginal over `vars` in roster order.
    pub fn marginal(&self, vars: &VarSet) -> Result<Vec<f64>> {
        Ok(self.marginal_mask(self.mask(vars)?))
    }

    fn marginal_mask(&self, mask: u64) -> Vec<f64> {
        let n = self.roster.len();
        let mut mstride = vec![0usize; n];
        let mut size = 1usize;
        for k in (0..n).rev() {
            if mask & (1 << k) != 0 {
                mstride[k] = size;
                size *= self.roster[k].1;
            }
        }
        let mut out = vec![0.0; size];
        if size == 1 {
            out[0] = self.probs.iter().sum();
            return out;
        }
        let mut digits = vec![0usize; n];
        let mut idx = 0usize;
        for &p in &self.probs {
            out[idx] += p;
            for k in (0..n).rev() {
                digits[k] += 1;
                if digits[k] < self.roster[k].1 {
                    idx += mstride[k];
                    break;
                }
                idx -= (digits[k] - 1) * mstride[k];
                digits[k] = 0;
            }
        }
        out
    }

    fn entropy_mask(&self, mask: u64) -> f64 {
        if mask == 0 {
            return 0.0;
        }
        entropy_of(&self.marginal_mask(mask))
    }

    pub fn entropy(&self, vars: &VarSet) -> Result<f64> {
        Ok(self.entropy_mask(self.mask(vars)?))
    }
}

/// Shannon entropy in bits with `0 log 0 = 0`.
pub fn entropy_of(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.log2())
        .sum::<f64>()
}

fn check_disjoint(a: &VarSet, b: &VarSet, c: &VarSet) -> Result<()> {
    for (x, y) in [(a, b), (a, c), (b, c)] {
        if let Some(v) = x.intersection(y).next() {
            return Err(Error::Overlap(format!("{} appears in two arguments", v)));
        }
    }
    Ok(())
}

/// `I(A;B|C)` in bits.
pub fn cond_mutual_information(
    joint: &JointPmf,
    a: &VarSet,
    b: &VarSet,
    c: &VarSet,
) -> Result<f64> {
    Evaluator::new(joint).cmi(a, b, c)
}

/// Entropy evaluator that memoizes marginal entropies by variable subset.
pub struct Evaluator<'a> {
    joint: &'a JointPmf,
    cache: RefCell<HashMap<u64, f64>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(joint: &'a JointPmf) -> Self {
        Evaluator {
            joint,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn joint(&self) -> &JointPmf {
        self.joint
    }

    fn h(&self, mask: u64) -> f64 {
        if let Some(&v) = self.cache.borrow().get(&mask) {
            return v;
        }
        let v = self.joint.entropy_mask(mask);
        self.cache.borrow_mut().insert(mask, v);
        v
    }

    pub fn entropy(&self, vars: &VarSet) -> Result<f64> {
        Ok(self.h(self.joint.mask(vars)?))
    }

    pub fn cmi(&self, a: &VarSet, b: &VarSet, c: &VarSet) -> Result<f64> {
        check_disjoint(a, b, c)?;
        let (ma, mb, mc) = (
            self.joint.mask(a)?,
            self.joint.mask(b)?,
            self.joint.mask(c)?,
        );
        if ma == 0 || mb == 0 {
            return Ok(0.0);
        }
        let v = self.h(ma | mc) + self.h(mb | mc) - self.h(ma | mb | mc) - self.h(mc);
        Ok(v.max(0.0))
    }
}

/// Conditional mutual information term `I(A;B|C)`.
///
/// Construction removes `C` from `A` and `B`, which leaves the value
/// unchanged.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Atom {
    pub a: VarSet,
    pub b: VarSet,
    pub c: VarSet,
}

impl Atom {
    pub fn new(a: VarSet, b: VarSet, c: VarSet) -> Self {
        Atom {
            a: a.difference(&c).copied().collect(),
            b: b.difference(&c).copied().collect(),
            c,
        }
    }

    /// True when the term vanishes identically (an empty side).
    pub fn is_trivial(&self) -> bool {
        self.a.is_empty() || self.b.is_empty()
    }

    pub fn vars(&self) -> VarSet {
        self.a
            .iter()
            .chain(&self.b)
            .chain(&self.c)
            .copied()
            .collect()
    }

    pub fn render(&self, name: &dyn Fn(Var) -> String) -> String {
        // The time-sharing variable goes last, as it is usually written.
        let join = |s: &VarSet| {
            let q = s.iter().filter(|&&v| v == Var::Q);
            s.iter()
                .filter(|&&v| v != Var::Q)
                .chain(q)
                .map(|&v| name(v))
                .collect::<Vec<_>>()
                .join(",")
        };
        if self.c.is_empty() {
            format!("I({};{})", join(&self.a), join(&self.b))
        } else {
            format!("I({};{}|{})", join(&self.a), join(&self.b), join(&self.c))
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render(&|v| v.to_string()))
    }
}

/// Anything that can evaluate mutual-information atoms.
pub trait AtomEval {
    fn atom(&self, atom: &Atom) -> Result<f64>;
}

impl AtomEval for Evaluator<'_> {
    fn atom(&self, atom: &Atom) -> Result<f64> {
        self.cmi(&atom.a, &atom.b, &atom.c)
    }
}

/// Time-sharing pmf, independent message pmfs and deterministic encoders.
///
/// `encoders[i]` is a lookup table for transmitter `i` indexed row-major by
/// the values of its known messages (ascending message index) followed by
/// `q`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EncoderSpec {
    pub q_pmf: Vec<f64>,
    pub message_pmfs: Vec<Vec<f64>>,
    pub encoders: Vec<Vec<usize>>,
}

impl EncoderSpec {
    pub fn message_cards(&self) -> Vec<usize> {
        self.message_pmfs.iter().map(|p| p.len()).collect()
    }

    /// Number of arguments of transmitter `i`'s encoder.
    pub fn domain(&self, topology: &NetworkTopology, i: usize) -> usize {
        let cards = self.message_cards();
        topology
            .knowledge(i)
            .iter()
            .map(|&m| cards[m])
            .product::<usize>()
            * self.q_pmf.len()
    }

    pub fn validate(&self, topology: &NetworkTopology, channel: &DiscreteChannel) -> Result<()> {
        let bad = |s: String| Err(Error::Dimension(s));
        if self.message_pmfs.len() != topology.message_count() {
            return bad(format!(
                "{} message pmfs for {} messages",
                self.message_pmfs.len(),
                topology.message_count()
            ));
        }
        if self.encoders.len() != topology.k1() || channel.input_alphabets().len() != topology.k1()
        {
            return bad("encoder count does not match the transmitters".into());
        }
        for pmf in std::iter::once(&self.q_pmf).chain(&self.message_pmfs) {
            let s: f64 = pmf.iter().sum();
            if pmf.is_empty() || pmf.iter().any(|p| *p < 0.0) || (s - 1.0).abs() > PMF_TOL {
                return bad(format!("invalid pmf {:?}", pmf));
            }
        }
        for i in 0..topology.k1() {
            let dom = self.domain(topology, i);
            if self.encoders[i].len() != dom {
                return bad(format!(
                    "encoder for X{} has {} entries, expected {}",
                    i + 1,
                    self.encoders[i].len(),
                    dom
                ));
            }
            if self.encoders[i]
                .iter()
                .any(|&x| x >= channel.input_alphabets()[i])
            {
                return bad(format!("encoder for X{} leaves the input alphabet", i + 1));
            }
        }
        Ok(())
    }

    /// Input tuple produced by message values `m` at time-sharing value `q`.
    pub fn inputs_at(&self, topology: &NetworkTopology, m: &[usize], q: usize) -> Vec<usize> {
        let cards = self.message_cards();
        (0..topology.k1())
            .map(|i| {
                let mut idx = 0;
                for &k in topology.knowledge(i) {
                    idx = idx * cards[k] + m[k];
                }
                self.encoders[i][idx * self.q_pmf.len() + q]
            })
            .collect()
    }
}

/// Joint over `(Q, messages, inputs, outputs)` induced by an encoder spec.
pub fn induced_joint(
    topology: &NetworkTopology,
    channel: &DiscreteChannel,
    enc: &EncoderSpec,
) -> Result<JointPmf> {
    induced_joint_capped(topology, channel, enc, MAX_CELLS)
}

pub fn induced_joint_capped(
    topology: &NetworkTopology,
    channel: &DiscreteChannel,
    enc: &EncoderSpec,
    max_cells: usize,
) -> Result<JointPmf> {
    enc.validate(topology, channel)?;
    let cards = enc.message_cards();
    let nq = enc.q_pmf.len();
    let nm: usize = cards.iter().product();
    let nx = channel.input_count();
    let ny = channel.output_count();
    let cells = (nq as f64) * (nm as f64) * (nx as f64) * (ny as f64);
    if cells > max_cells as f64 {
        return Err(Error::CapExceeded {
            what: "joint cells".into(),
            estimate: cells,
            cap: max_cells as f64,
        });
    }
    let mut roster = vec![(Var::Q, nq)];
    roster.extend(cards.iter().enumerate().map(|(k, &c)| (Var::Msg(k), c)));
    roster.extend(
        channel
            .input_alphabets()
            .iter()
            .enumerate()
            .map(|(i, &c)| (Var::Input(i), c)),
    );
    roster.extend(
        channel
            .output_alphabets()
            .iter()
            .enumerate()
            .map(|(j, &c)| (Var::Output(j), c)),
    );
    let mut probs = vec![0.0; cells as usize];
    for q in 0..nq {
        for mi in 0..nm {
            let m = decode_index(mi, &cards);
            let p = enc.q_pmf[q]
                * m.iter()
                    .enumerate()
                    .map(|(k, &v)| enc.message_pmfs[k][v])
                    .product::<f64>();
            if p == 0.0 {
                continue;
            }
            let x = enc.inputs_at(topology, &m, q);
            let xi = crate::model::encode_index(&x, channel.input_alphabets());
            let base = ((q * nm + mi) * nx + xi) * ny;
            for (y, &w) in channel.row(xi).iter().enumerate() {
                probs[base + y] = p * w;
            }
        }
    }
    JointPmf::new(roster, probs)
}

/// Residual of the telescoping identity
/// `Σ_t I(B_{t+1..n}; A_t | A_{1..t-1}, S) = Σ_t I(A_{1..t-1}; B_t | B_{t+1..n}, S)`.
pub fn ck_identity_residual(
    joint: &JointPmf,
    seq_a: &[Var],
    seq_b: &[Var],
    side: &[Var],
) -> Result<f64> {
    if seq_a.len() != seq_b.len() || seq_a.is_empty() {
        return Err(Error::Dimension(
            "sequences must have equal positive length".into(),
        ));
    }
    let ev = Evaluator::new(joint);
    let s: VarSet = side.iter().copied().collect();
    let n = seq_a.len();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for t in 0..n {
        let b_future: VarSet = seq_b[t + 1..].iter().copied().collect();
        let a_past: VarSet = seq_a[..t].iter().copied().collect();
        let a_t = VarSet::from([seq_a[t]]);
        let b_t = VarSet::from([seq_b[t]]);
        let c1: VarSet = a_past.union(&s).copied().collect();
        lhs += ev.cmi(&b_future, &a_t, &c1)?;
        let c2: VarSet = b_future.union(&s).copied().collect();
        rhs += ev.cmi(&a_past, &b_t, &c2)?;
    }
    Ok((lhs - rhs).abs())
}

/// All pmfs on `k` points whose entries are multiples of `1/n`.
pub fn simplex_grid(k: usize, n: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if k == 1 {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / n as f64).collect());
            cur.pop();
            return;
        }
        for c in (0..=left).rev() {
            cur.push(c);
            rec(k - 1, left - c, n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    rec(k, n.max(1), n.max(1), &mut Vec::new(), &mut out);
    out
}

/// Limits on the exhaustive search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchCaps {
    /// Grid resolution: pmf entries are multiples of `1/grid`.
    pub grid: usize,
    pub q_card: usize,
    /// Uniform message alphabet size; `None` uses the largest input alphabet
    /// among the transmitters knowing the message.
    pub message_card: Option<usize>,
    pub max_points: u64,
    pub max_cells: usize,
    /// Grid points within this distance of the maximum form the argmax set.
    pub argmax_tol: f64,
    /// Number of argmax members kept in full.
    pub argmax_keep: usize,
    /// Worker threads; `None` uses the ambient rayon pool.
    pub jobs: Option<usize>,
}

impl Default for SearchCaps {
    fn default() -> Self {
        SearchCaps {
            grid: 16,
            q_card: 1,
            message_card: None,
            max_points: 20_000_000,
            max_cells: MAX_CELLS,
            argmax_tol: 1e-6,
            argmax_keep: 64,
            jobs: None,
        }
    }
}

/// Enumeration of encoder specs: a simplex grid over the time-sharing pmf
/// and each message pmf, times every deterministic encoder table.
#[derive(Clone, Debug)]
pub struct EncoderGrid {
    q_points: Vec<Vec<f64>>,
    msg_points: Vec<Vec<Vec<f64>>>,
    domains: Vec<usize>,
    input_alphabets: Vec<usize>,
    radices: Vec<u64>,
    total: u64,
}

impl EncoderGrid {
    /// Messages in `nullified` are given a single value.
    pub fn new(
        topology: &NetworkTopology,
        channel: &DiscreteChannel,
        caps: &SearchCaps,
        nullified: &IndexSet,
    ) -> Result<Self> {
        if caps.grid == 0 || caps.q_card == 0 || caps.message_card == Some(0) {
            return Err(Error::BadParams(
                "grid, |Q| and message cardinality must be positive".into(),
            ));
        }
        if channel.input_alphabets().len() != topology.k1()
            || channel.output_alphabets().len() != topology.k2()
        {
            return Err(Error::Dimension(
                "channel does not match the topology".into(),
            ));
        }
        let ins = channel.input_alphabets().to_vec();
        let cards: Vec<usize> = topology
            .messages()
            .iter()
            .enumerate()
            .map(|(k, msg)| {
                if nullified.contains(&k) {
                    1
                } else {
                    caps.message_card.unwrap_or_else(|| {
                        msg.label.delta.iter().map(|&i| ins[i]).max().unwrap_or(1)
                    })
                }
            })
            .collect();
        let q_points = simplex_grid(caps.q_card, caps.grid);
        let msg_points: Vec<Vec<Vec<f64>>> =
            cards.iter().map(|&c| simplex_grid(c, caps.grid)).collect();
        let domains: Vec<usize> = (0..topology.k1())
            .map(|i| {
                topology
                    .knowledge(i)
                    .iter()
                    .map(|&m| cards[m])
                    .product::<usize>()
                    * caps.q_card
            })
            .collect();
        let mut radices = vec![q_points.len() as f64];
        radices.extend(msg_points.iter().map(|p| p.len() as f64));
        radices.extend(
            domains
                .iter()
                .zip(&ins)
                .map(|(&d, &a)| (a as f64).powi(d as i32)),
        );
        let estimate: f64 = radices.iter().product();
        if estimate > caps.max_points as f64 {
            return Err(Error::CapExceeded {
                what: "grid points".into(),
                estimate,
                cap: caps.max_points as f64,
            });
        }
        let nq = caps.q_card as f64;
        let nm: f64 = cards.iter().map(|&c| c as f64).product();
        let cells = nq * nm * channel.input_count() as f64 * channel.output_count() as f64;
        if cells > caps.max_cells as f64 {
            return Err(Error::CapExceeded {
                what: "joint cells".into(),
                estimate: cells,
                cap: caps.max_cells as f64,
            });
        }
        Ok(EncoderGrid {
            q_points,
            msg_points,
            domains,
            input_alphabets: ins,
            radices: radices.iter().map(|&r| r as u64).collect(),
            total: estimate as u64,
        })
    }

    pub fn len(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Grid point `index` in mixed radix: time-sharing pmf most significant,
    /// then message pmfs, then encoder tables.
    pub fn spec(&self, index: u64) -> EncoderSpec {
        let mut digits = vec![0u64; self.radices.len()];
        let mut rest = index;
        for k in (0..self.radices.len()).rev() {
            digits[k] = rest % self.radices[k];
            rest /= self.radices[k];
        }
        let nmsg = self.msg_points.len();
        let encoders = (0..self.domains.len())
            .map(|i| {
                let mut code = digits[1 + nmsg + i];
                let a = self.input_alphabets[i] as u64;
                let mut table = vec![0usize; self.domains[i]];
                for slot in table.iter_mut().rev() {
                    *slot = (code % a) as usize;
                    code /= a;
                }
                table
            })
            .collect();
        EncoderSpec {
            q_pmf: self.q_points[digits[0] as usize].clone(),
            message_pmfs: (0..nmsg)
                .map(|k| self.msg_points[k][digits[1 + k] as usize].clone())
                .collect(),
            encoders,
        }
    }
}

/// Maximum of an objective over an encoder grid.
#[derive(Clone, Debug, Serialize)]
pub struct GridMax {
    pub value: f64,
    /// Grid indices within tolerance of the maximum, ascending (truncated to
    /// the cap's `argmax_keep`).
    pub argmax_indices: Vec<u64>,
    pub argmax: Vec<EncoderSpec>,
    pub argmax_count: u64,
    pub points: u64,
}

const CHUNK: u64 = 2048;

/// Exhaustively maximizes `objective` over the encoder grid. Results do not
/// depend on the number of worker threads.
pub fn brute_force_max<F>(
    topology: &NetworkTopology,
    channel: &DiscreteChannel,
    objective: &F,
    caps: &SearchCaps,
    nullified: &IndexSet,
) -> Result<GridMax>
where
    F: Fn(&JointPmf) -> Result<f64> + Sync,
{
    let grid = EncoderGrid::new(topology, channel, caps, nullified)?;
    let run = || search_grid(topology, channel, &grid, objective, caps);
    match caps.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::BadParams(e.to_string()))?
            .install(run),
        None => run(),
    }
}

fn search_grid<F>(
    topology: &NetworkTopology,
    channel: &DiscreteChannel,
    grid: &EncoderGrid,
    objective: &F,
    caps: &SearchCaps,
) -> Result<GridMax>
where
    F: Fn(&JointPmf) -> Result<f64> + Sync,
{
    let tol = caps.argmax_tol;
    let chunks = grid.len().div_ceil(CHUNK);
    let partial: Vec<Result<(f64, Vec<(u64, f64)>)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut best = f64::NEG_INFINITY;
            let mut cands: Vec<(u64, f64)> = Vec::new();
            for idx in c * CHUNK..((c + 1) * CHUNK).min(grid.len()) {
                let joint =
                    induced_joint_capped(topology, channel, &grid.spec(idx), caps.max_cells)?;
                let v = objective(&joint)?;
                if v > best {
                    best = v;
                    cands.retain(|&(_, w)| w >= best - tol);
                }
                if v >= best - tol {
                    cands.push((idx, v));
                }
            }
            Ok((best, cands))
        })
        .collect();
    let mut best = f64::NEG_INFINITY;
    let mut all = Vec::new();
    for p in partial {
        let (b, c) = p?;
        best = best.max(b);
        all.extend(c);
    }
    all.retain(|&(_, v)| v >= best - tol);
    let argmax_count = all.len() as u64;
    let argmax_indices: Vec<u64> = all
        .iter()
        .take(caps.argmax_keep.max(1))
        .map(|c| c.0)
        .collect();
    Ok(GridMax {
        value: best,
        argmax: argmax_indices.iter().map(|&i| grid.spec(i)).collect(),
        argmax_indices,
        argmax_count,
        points: grid.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkTopology;

    fn h2(p: f64) -> f64 {
        entropy_of(&[p, 1.0 - p])
    }

    fn link() -> NetworkTopology {
        NetworkTopology::from_sets(&[vec!["M1"]], &[vec!["M1"]]).unwrap()
    }

    fn bsc(p: f64) -> DiscreteChannel {
        DiscreteChannel::from_fn(
            vec![2],
            vec![2],
            |x, y| if x[0] == y[0] { 1.0 - p } else { p },
        )
        .unwrap()
    }

    fn identity_spec() -> EncoderSpec {
        EncoderSpec {
            q_pmf: vec![1.0],
            message_pmfs: vec![vec![0.5, 0.5]],
            encoders: vec![vec![0, 1]],
        }
    }

    fn set(v: &[Var]) -> VarSet {
        v.iter().copied().collect()
    }

    #[test]
    fn noiseless_link_carries_one_bit() {
        let j = induced_joint(&link(), &bsc(0.0), &identity_spec()).unwrap();
        let i = cond_mutual_information(
            &j,
            &set(&[Var::Msg(0)]),
            &set(&[Var::Output(0)]),
            &VarSet::new(),
        )
        .unwrap();
        assert!((i - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_encoder_carries_nothing() {
        let mut spec = identity_spec();
        spec.encoders = vec![vec![0, 0]];
        let j = induced_joint(&link(), &bsc(0.2), &spec).unwrap();
        let i = cond_mutual_information(
            &j,
            &set(&[Var::Msg(0)]),
            &set(&[Var::Output(0)]),
            &VarSet::new(),
        )
        .unwrap();
        assert_eq!(i, 0.0);
    }

    #[test]
    fn bsc_mutual_information_matches_binary_entropy() {
        let j = induced_joint(&link(), &bsc(0.11), &identity_spec()).unwrap();
        let i = cond_mutual_information(
            &j,
            &set(&[Var::Input(0)]),
            &set(&[Var::Output(0)]),
            &VarSet::new(),
        )
        .unwrap();
        // Direct four-entry sum.
        let p: [f64; 4] = [0.5 * 0.89, 0.5 * 0.11, 0.5 * 0.11, 0.5 * 0.89];
        let direct: f64 = p.iter().map(|&v| v * (v / 0.25).log2()).sum();
        assert!((i - direct).abs() < 1e-12);
        assert!((i - (1.0 - h2(0.11))).abs() < 1e-12);
    }

    #[test]
    fn overlapping_arguments_are_rejected() {
        let j = induced_joint(&link(), &bsc(0.1), &identity_spec()).unwrap();
        let a = set(&[Var::Input(0)]);
        assert!(matches!(
            cond_mutual_information(&j, &a, &a, &VarSet::new()),
            Err(Error::Overlap(_))
        ));
    }

    #[test]
    fn unknown_variable_is_rejected() {
        let j = induced_joint(&link(), &bsc(0.1), &identity_spec()).unwrap();
        let r = cond_mutual_information(
            &j,
            &set(&[Var::Aux(3)]),
            &set(&[Var::Output(0)]),
            &VarSet::new(),
        );
        assert!(matches!(r, Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn copy_of_uniform_quaternary_has_two_bits() {
        let mut p = vec![0.0; 16];
        for k in 0..4 {
            p[k * 4 + k] = 0.25;
        }
        let j = JointPmf::new(vec![(Var::Aux(0), 4), (Var::Aux(1), 4)], p).unwrap();
        let i = cond_mutual_information(
            &j,
            &set(&[Var::Aux(0)]),
            &set(&[Var::Aux(1)]),
            &VarSet::new(),
        )
        .unwrap();
        assert!((i - 2.0).abs() < 1e-15);
    }

    #[test]
    fn marginal_matches_direct_sum() {
        let probs: Vec<f64> = (1..=12).map(|v| v as f64 / 78.0).collect();
        let j = JointPmf::new(
            vec![(Var::Aux(0), 2), (Var::Aux(1), 3), (Var::Aux(2), 2)],
            probs.clone(),
        )
        .unwrap();
        let m = j.marginal(&set(&[Var::Aux(0), Var::Aux(2)])).unwrap();
        for a in 0..2 {
            for c in 0..2 {
                let direct: f64 = (0..3).map(|b| probs[a * 6 + b * 2 + c]).sum();
                assert!((m[a * 2 + c] - direct).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn induced_joint_marginalizes_to_channel_and_pmfs() {
        let t =
            NetworkTopology::from_sets(&[vec!["A"], vec!["B"]], &[vec!["A"], vec!["B"]]).unwrap();
        let ch = DiscreteChannel::from_fn(vec![2, 2], vec![2, 2], |x, y| {
            let a = if y[0] == (x[0] ^ x[1]) { 0.9 } else { 0.1 };
            let b = if y[1] == x[1] { 0.7 } else { 0.3 };
            a * b
        })
        .unwrap();
        let spec = EncoderSpec {
            q_pmf: vec![1.0],
            message_pmfs: vec![vec![0.25, 0.75], vec![0.6, 0.4]],
            encoders: vec![vec![0, 1], vec![0, 1]],
        };
        let j = induced_joint(&t, &ch, &spec).unwrap();
        let mm = j.marginal(&set(&[Var::Msg(0), Var::Msg(1)])).unwrap();
        assert!((mm[1] - 0.25 * 0.4).abs() < 1e-15);
        let xy = j
            .marginal(&set(&[
                Var::Input(0),
                Var::Input(1),
                Var::Output(0),
                Var::Output(1),
            ]))
            .unwrap();
        let px = [0.25 * 0.6, 0.25 * 0.4, 0.75 * 0.6, 0.75 * 0.4];
        for x in 0..4 {
            for y in 0..4 {
                assert!((xy[x * 4 + y] / px[x] - ch.row(x)[y]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn simplex_grid_counts_and_vertices() {
        let g = simplex_grid(3, 4);
        assert_eq!(g.len(), 15);
        assert!(g.contains(&vec![1.0, 0.0, 0.0]));
        assert!(g
            .iter()
            .all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-15));
        assert_eq!(simplex_grid(1, 16), vec![vec![1.0]]);
    }

    #[test]
    fn ck_residual_is_zero_for_single_letter() {
        let probs = vec![0.1, 0.2, 0.3, 0.4];
        let j = JointPmf::new(vec![(Var::Aux(0), 2), (Var::Aux(1), 2)], probs).unwrap();
        assert_eq!(
            ck_identity_residual(&j, &[Var::Aux(0)], &[Var::Aux(1)], &[]).unwrap(),
            0.0
        );
    }

    #[test]
    fn brute_force_finds_uniform_input_on_noiseless_link() {
        let t = link();
        let obj = |j: &JointPmf| {
            cond_mutual_information(
                j,
                &set(&[Var::Input(0)]),
                &set(&[Var::Output(0)]),
                &VarSet::new(),
            )
        };
        let r = brute_force_max(
            &t,
            &bsc(0.0),
            &obj,
            &SearchCaps::default(),
            &IndexSet::new(),
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        let best = &r.argmax[0];
        assert!((best.message_pmfs[0][0] - 0.5).abs() < 1e-12);
        assert!(r.argmax_count >= 2);
    }

    #[test]
    fn brute_force_is_independent_of_thread_count() {
        let t = link();
        let obj = |j: &JointPmf| {
            cond_mutual_information(
                j,
                &set(&[Var::Msg(0)]),
                &set(&[Var::Output(0)]),
                &VarSet::new(),
            )
        };
        let caps1 = SearchCaps {
            jobs: Some(1),
            grid: 8,
            q_card: 2,
            ..Default::default()
        };
        let caps4 = SearchCaps {
            jobs: Some(4),
            ..caps1.clone()
        };
        let a = brute_force_max(&t, &bsc(0.2), &obj, &caps1, &IndexSet::new()).unwrap();
        let b = brute_force_max(&t, &bsc(0.2), &obj, &caps4, &IndexSet::new()).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.argmax_indices, b.argmax_indices);
    }

    #[test]
    fn cap_exceeded_reports_estimate() {
        let t = link();
        let caps = SearchCaps {
            max_points: 10,
            ..Default::default()
        };
        let obj = |_: &JointPmf| Ok(0.0);
        match brute_force_max(&t, &bsc(0.0), &obj, &caps, &IndexSet::new()) {
            Err(Error::CapExceeded { estimate, .. }) => assert_eq!(estimate, 17.0 * 4.0),
            other => panic!("unexpected {:?}", other.map(|r| r.value)),
        }
    }
}
