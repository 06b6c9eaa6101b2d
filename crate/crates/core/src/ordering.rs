//! Less-noisy and degradedness orderings between receivers: construction of
//! the condition sets attached to each bound, and tri-state checks.
//!
//! A check only reports HOLDS with a proof object (a degrading matrix per
//! conditioned-input slice, or a Gaussian gain ratio). Random search can only
//! produce VIOLATED with a witness, or UNKNOWN with the best gap it saw.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{degrading_ratio, GaussianBackend};
use crate::info::{
    cond_mutual_information, inputs, outputs, Atom, AtomEval, Evaluator, JointPmf, Var, VarSet,
};
use crate::model::{
    decode_index, inputs_for, Channel, ConnectivityReport, DiscreteChannel, GaussianChannel,
    IndexSet, NetworkTopology,
};
use crate::nnls::nnls;
use crate::plan::{lambda_sets, PermutationPlan, ReductionResult};
use crate::theorem::{describe, AnalysisParams, TheoremId};

/// A positive gap above this is a violation.
pub const GAP_TOL: f64 = 1e-9;
/// Largest acceptable residual of a degrading-matrix fit.
pub const DEGRADING_TOL: f64 = 1e-9;

const BATCH: u64 = 256;

/// Distribution family over which an ordering must hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Family {
    /// `U` and the free inputs jointly distributed, independent of the
    /// conditioned inputs.
    Product,
    /// All inputs independent, `U` drawn conditionally on all of them.
    IndependentInputs,
}

impl Family {
    /// Whether a violation found in `other` also violates a condition posed
    /// over `self`. Conditions over the product family extend to arbitrary
    /// joints, so they are violated by any witness.
    pub fn accepts(self, other: Family) -> bool {
        self == other || self == Family::Product
    }
}

/// `I(L; Y_weaker | X_C) ≤ I(L; Y_stronger | X_C)` where `L` is `U` plus
/// `extra_left` when `with_u` is set, and all non-conditioned inputs
/// otherwise.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LessNoisyQuery {
    pub label: String,
    pub weaker: IndexSet,
    pub stronger: IndexSet,
    pub conditioned: IndexSet,
    pub extra_left: IndexSet,
    pub with_u: bool,
    pub family: Family,
}

impl LessNoisyQuery {
    /// Single-receiver query with `U`, product family.
    pub fn new(weaker: usize, stronger: usize, conditioned: IndexSet) -> Self {
        Self::groups(
            IndexSet::from([weaker]),
            IndexSet::from([stronger]),
            conditioned,
        )
    }

    pub fn groups(weaker: IndexSet, stronger: IndexSet, conditioned: IndexSet) -> Self {
        LessNoisyQuery {
            label: String::new(),
            weaker,
            stronger,
            conditioned,
            extra_left: IndexSet::new(),
            with_u: true,
            family: Family::Product,
        }
    }

    /// Replaces `U` by the non-conditioned inputs.
    pub fn without_u(mut self) -> Self {
        self.with_u = false;
        self.extra_left.clear();
        self
    }

    /// Inputs placed next to `U` on both sides. When they cover every input
    /// outside `X_C`, `U` is redundant and dropped.
    pub fn with_extra(mut self, extra: IndexSet, k1: usize) -> Self {
        let extra: IndexSet = extra.difference(&self.conditioned).copied().collect();
        if extra.len() + self.conditioned.len() == k1 {
            return self.without_u();
        }
        self.extra_left = extra;
        self
    }

    pub fn family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Inputs not conditioned on.
    pub fn free_inputs(&self, k1: usize) -> IndexSet {
        (0..k1).filter(|i| !self.conditioned.contains(i)).collect()
    }

    pub fn left_vars(&self, k1: usize) -> VarSet {
        if self.with_u {
            let mut v = inputs(&self.extra_left);
            v.insert(Var::Aux(0));
            v
        } else {
            inputs(&self.free_inputs(k1))
        }
    }

    pub fn validate(&self, k1: usize, k2: usize) -> Result<()> {
        if self.weaker.is_empty() || self.stronger.is_empty() {
            return Err(Error::BadParams(
                "ordering query needs receivers on both sides".into(),
            ));
        }
        if self.weaker.iter().chain(&self.stronger).any(|&j| j >= k2)
            || self
                .conditioned
                .iter()
                .chain(&self.extra_left)
                .any(|&i| i >= k1)
        {
            return Err(Error::Dimension(format!(
                "query `{}` does not fit the channel",
                self.render(k1)
            )));
        }
        if !self.weaker.is_disjoint(&self.stronger) {
            return Err(Error::Overlap(
                "a receiver is on both sides of the query".into(),
            ));
        }
        if !self.conditioned.is_disjoint(&self.extra_left) {
            return Err(Error::Overlap(
                "conditioned and extra inputs overlap".into(),
            ));
        }
        Ok(())
    }

    /// Both sides as mutual-information atoms.
    pub fn atoms(&self, k1: usize) -> (Atom, Atom) {
        let l = self.left_vars(k1);
        let c = inputs(&self.conditioned);
        (
            Atom::new(l.clone(), outputs(&self.weaker), c.clone()),
            Atom::new(l, outputs(&self.stronger), c),
        )
    }

    pub fn render(&self, k1: usize) -> String {
        let (a, b) = self.atoms(k1);
        format!("{} <= {}", a, b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Holds,
    Violated,
    Unknown,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Holds => "HOLDS",
            Status::Violated => "VIOLATED",
            Status::Unknown => "UNKNOWN",
        })
    }
}

/// Weakest of several statuses: any violation wins, then any unknown.
pub fn combined_status<'a>(statuses: impl IntoIterator<Item = &'a Status>) -> Status {
    let mut out = Status::Holds;
    for s in statuses {
        match s {
            Status::Violated => return Status::Violated,
            Status::Unknown => out = Status::Unknown,
            Status::Holds => {}
        }
    }
    out
}

/// Degrading channel for one value of the conditioned inputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegradingSlice {
    pub conditioned_values: Vec<usize>,
    /// `matrix[ys][yw] = T(yw | ys)`.
    pub matrix: Vec<Vec<f64>>,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    Degrading {
        slices: Vec<DegradingSlice>,
    },
    /// Weaker gains equal `alpha` times the stronger gains on free inputs.
    GainRatio {
        alpha: f64,
    },
    /// Inequalities verified on the argmax set, in the stated or the
    /// reversed direction.
    Argmax {
        reversed: bool,
    },
}

/// Joint of `U` and all inputs at which a query fails.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub family: Family,
    pub sample: u64,
    pub u_card: usize,
    pub input_alphabets: Vec<usize>,
    /// `pmf[u * n_x + x]` with `x` row-major over inputs.
    pub pmf: Vec<f64>,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionVerdict {
    pub query: LessNoisyQuery,
    pub rendered: String,
    pub status: Status,
    pub certificate: Option<Certificate>,
    pub witness: Option<Witness>,
    /// Largest left-minus-right gap seen by the random search.
    pub best_gap: Option<f64>,
    pub samples: u64,
}

/// Random search settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FalsifierConfig {
    pub seed: u64,
    pub budget: u64,
    /// Largest `|U|`; `None` uses the free-input alphabet product plus one.
    pub u_cap: Option<usize>,
    pub jobs: Option<usize>,
}

impl Default for FalsifierConfig {
    fn default() -> Self {
        FalsifierConfig {
            seed: 0,
            budget: 10_000,
            u_cap: None,
            jobs: None,
        }
    }
}

/// Index maps for one query over a discrete channel.
struct Layout {
    alph: Vec<usize>,
    nx: usize,
    nc: usize,
    nfree: usize,
    nextra: usize,
    c_idx: Vec<usize>,
    free_idx: Vec<usize>,
    extra_idx: Vec<usize>,
    cond: Vec<usize>,
    with_u: bool,
    family: Family,
    weak: Vec<f64>,
    nw: usize,
    strong: Vec<f64>,
    ns: usize,
}

fn sub_index(digits: &[usize], alph: &[usize], subset: &[usize]) -> usize {
    subset.iter().fold(0, |acc, &i| acc * alph[i] + digits[i])
}

impl Layout {
    fn new(channel: &DiscreteChannel, query: &LessNoisyQuery) -> Result<Self> {
        let k1 = channel.input_alphabets().len();
        query.validate(k1, channel.output_alphabets().len())?;
        let alph = channel.input_alphabets().to_vec();
        let nx = channel.input_count();
        let cond: Vec<usize> = query.conditioned.iter().copied().collect();
        let free: Vec<usize> = query.free_inputs(k1).into_iter().collect();
        let extra: Vec<usize> = query.extra_left.iter().copied().collect();
        let mut c_idx = Vec::with_capacity(nx);
        let mut free_idx = Vec::with_capacity(nx);
        let mut extra_idx = Vec::with_capacity(nx);
        for x in 0..nx {
            let d = decode_index(x, &alph);
            c_idx.push(sub_index(&d, &alph, &cond));
            free_idx.push(sub_index(&d, &alph, &free));
            extra_idx.push(sub_index(&d, &alph, &extra));
        }
        let prod = |s: &[usize]| s.iter().map(|&i| alph[i]).product::<usize>();
        let wv: Vec<usize> = query.weaker.iter().copied().collect();
        let sv: Vec<usize> = query.stronger.iter().copied().collect();
        let outs = channel.output_alphabets();
        Ok(Layout {
            nc: prod(&cond),
            nfree: prod(&free),
            nextra: prod(&extra),
            nx,
            c_idx,
            free_idx,
            extra_idx,
            with_u: query.with_u,
            family: query.family,
            weak: channel.output_marginal(&wv),
            nw: wv.iter().map(|&j| outs[j]).product(),
            strong: channel.output_marginal(&sv),
            ns: sv.iter().map(|&j| outs[j]).product(),
            cond,
            alph,
        })
    }

    fn left_count(&self, nu: usize) -> usize {
        if self.with_u {
            nu * self.nextra
        } else {
            self.nfree
        }
    }

    fn left_index(&self, u: usize, x: usize) -> usize {
        if self.with_u {
            u * self.nextra + self.extra_idx[x]
        } else {
            self.free_idx[x]
        }
    }

    /// `I(L; Y | X_C)` for the side with transition table `w`.
    fn cmi(&self, pux: &[f64], nu: usize, w: &[f64], ny: usize) -> f64 {
        let nl = self.left_count(nu);
        let mut acc = vec![0.0; self.nc * nl * ny];
        for u in 0..nu {
            for x in 0..self.nx {
                let p = pux[u * self.nx + x];
                if p == 0.0 {
                    continue;
                }
                let base = (self.c_idx[x] * nl + self.left_index(u, x)) * ny;
                for (slot, &t) in acc[base..base + ny]
                    .iter_mut()
                    .zip(&w[x * ny..(x + 1) * ny])
                {
                    *slot += p * t;
                }
            }
        }
        let h = |v: &mut dyn Iterator<Item = f64>| -> f64 {
            v.filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum()
        };
        let h_cly = h(&mut acc.iter().copied());
        let h_cl = h(&mut acc.chunks(ny).map(|c| c.iter().sum()));
        let mut cy = vec![0.0; self.nc * ny];
        let mut c = vec![0.0; self.nc];
        for ci in 0..self.nc {
            for l in 0..nl {
                for y in 0..ny {
                    let p = acc[(ci * nl + l) * ny + y];
                    cy[ci * ny + y] += p;
                    c[ci] += p;
                }
            }
        }
        h_cl + h(&mut cy.into_iter()) - h_cly - h(&mut c.into_iter())
    }

    fn gap(&self, pux: &[f64], nu: usize) -> f64 {
        self.cmi(pux, nu, &self.weak, self.nw) - self.cmi(pux, nu, &self.strong, self.ns)
    }

    /// Fits a degrading matrix per conditioned slice.
    fn degrading(&self) -> Option<Vec<DegradingSlice>> {
        let (nw, ns) = (self.nw, self.ns);
        let mut slices = Vec::with_capacity(self.nc);
        for c in 0..self.nc {
            let xs: Vec<usize> = (0..self.nx).filter(|&x| self.c_idx[x] == c).collect();
            let rows = xs.len() * nw + ns;
            let mut a = DMatrix::<f64>::zeros(rows, ns * nw);
            let mut b = DVector::<f64>::zeros(rows);
            for (r, &x) in xs.iter().enumerate() {
                for yw in 0..nw {
                    let row = r * nw + yw;
                    for ys in 0..ns {
                        a[(row, ys * nw + yw)] = self.strong[x * ns + ys];
                    }
                    b[row] = self.weak[x * nw + yw];
                }
            }
            for ys in 0..ns {
                let row = xs.len() * nw + ys;
                for yw in 0..nw {
                    a[(row, ys * nw + yw)] = 1.0;
                }
                b[row] = 1.0;
            }
            let (t, residual) = nnls(&a, &b);
            if residual > DEGRADING_TOL {
                return None;
            }
            let d = decode_index(xs[0], &self.alph);
            slices.push(DegradingSlice {
                conditioned_values: self.cond.iter().map(|&i| d[i]).collect(),
                matrix: (0..ns)
                    .map(|ys| (0..nw).map(|yw| t[ys * nw + yw]).collect())
                    .collect(),
                residual,
            });
        }
        Some(slices)
    }

    fn default_u_cap(&self) -> usize {
        self.nfree + 1
    }

    /// Sample `k` of the random search: `(|U|, pmf over (u, x))`.
    fn sample(&self, seed: u64, k: u64, u_cap: usize) -> (usize, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k);
        let style = (k % 3) as u8;
        let nu = if self.with_u {
            let cap = u_cap.max(2);
            2 + ((k / 3) as usize) % (cap - 1)
        } else {
            1
        };
        let mut pux = vec![0.0; nu * self.nx];
        match self.family {
            Family::Product => {
                let joint = random_pmf(&mut rng, style, nu * self.nfree);
                let pc = random_pmf(&mut rng, style, self.nc);
                for u in 0..nu {
                    for x in 0..self.nx {
                        pux[u * self.nx + x] =
                            joint[u * self.nfree + self.free_idx[x]] * pc[self.c_idx[x]];
                    }
                }
            }
            Family::IndependentInputs => {
                let marg: Vec<Vec<f64>> = self
                    .alph
                    .iter()
                    .map(|&a| random_pmf(&mut rng, style, a))
                    .collect();
                for x in 0..self.nx {
                    let d = decode_index(x, &self.alph);
                    let px: f64 = d.iter().enumerate().map(|(i, &v)| marg[i][v]).product();
                    let pu = random_pmf(&mut rng, style, nu);
                    for u in 0..nu {
                        pux[u * self.nx + x] = px * pu[u];
                    }
                }
            }
        }
        (nu, pux)
    }

    fn falsify(&self, cfg: &FalsifierConfig) -> (f64, Option<(u64, usize, Vec<f64>, f64)>, u64) {
        let cap = cfg.u_cap.unwrap_or_else(|| self.default_u_cap());
        let mut best = f64::NEG_INFINITY;
        let mut done = 0;
        let mut start = 0;
        while start < cfg.budget {
            let end = (start + BATCH).min(cfg.budget);
            let gaps: Vec<(u64, f64)> = (start..end)
                .into_par_iter()
                .map(|k| {
                    let (nu, pux) = self.sample(cfg.seed, k, cap);
                    (k, self.gap(&pux, nu))
                })
                .collect();
            done = end;
            // First maximum wins ties, keeping the lowest sample index.
            let (k, g) = gaps
                .iter()
                .copied()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (k, g)| if g > acc.1 { (k, g) } else { acc },
                );
            best = best.max(g);
            if g > GAP_TOL {
                let (nu, pux) = self.sample(cfg.seed, k, cap);
                return (best, Some((k, nu, pux, g)), done);
            }
            start = end;
        }
        (best, None, done)
    }
}

/// Random pmf of length `n`: Dirichlet(1), sparse-support, or peaked.
fn random_pmf(rng: &mut ChaCha8Rng, style: u8, n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    let exp = |rng: &mut ChaCha8Rng| -(1.0 - rng.gen::<f64>()).ln();
    match style {
        0 => w.iter_mut().for_each(|v| *v = exp(rng)),
        1 => {
            let support = rng.gen_range(1..=n.min(3));
            for _ in 0..support {
                let i = rng.gen_range(0..n);
                w[i] += exp(rng);
            }
        }
        _ => {
            w.iter_mut().for_each(|v| *v = 0.05 * rng.gen::<f64>());
            w[rng.gen_range(0..n)] += 1.0;
        }
    }
    let s: f64 = w.iter().sum();
    if s <= 0.0 {
        w[0] = 1.0;
        return w;
    }
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(j) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::BadParams(e.to_string()))?
            .install(f)),
        None => Ok(f()),
    }
}

/// Degradedness certificate, then random falsification.
pub fn check_query_discrete(
    channel: &DiscreteChannel,
    query: &LessNoisyQuery,
    cfg: &FalsifierConfig,
) -> Result<ConditionVerdict> {
    let layout = Layout::new(channel, query)?;
    let k1 = layout.alph.len();
    let certificate = layout
        .degrading()
        .map(|slices| Certificate::Degrading { slices });
    let (best, hit, samples) = in_pool(cfg.jobs, || layout.falsify(cfg))?;
    let witness = hit.map(|(sample, u_card, pmf, gap)| Witness {
        family: query.family,
        sample,
        u_card,
        input_alphabets: layout.alph.clone(),
        pmf,
        gap,
    });
    let status = if witness.is_some() {
        Status::Violated
    } else if certificate.is_some() {
        Status::Holds
    } else {
        Status::Unknown
    };
    Ok(ConditionVerdict {
        rendered: query.render(k1),
        query: query.clone(),
        status,
        certificate: if status == Status::Holds {
            certificate
        } else {
            None
        },
        witness,
        best_gap: if samples > 0 { Some(best) } else { None },
        samples,
    })
}

/// Gain-ratio certificate for single-receiver queries; anything else is
/// UNKNOWN since the ratio condition is only sufficient.
pub fn check_query_gaussian(
    channel: &GaussianChannel,
    query: &LessNoisyQuery,
) -> Result<ConditionVerdict> {
    let k1 = channel.k1();
    query.validate(k1, channel.k2())?;
    let mut status = Status::Unknown;
    let mut certificate = None;
    if query.weaker.len() == 1 && query.stronger.len() == 1 {
        let (w, s) = (
            *query.weaker.first().unwrap(),
            *query.stronger.first().unwrap(),
        );
        let free = query.free_inputs(k1);
        let wg: Vec<f64> = free.iter().map(|&i| channel.gain(w, i)).collect();
        let sg: Vec<f64> = free.iter().map(|&i| channel.gain(s, i)).collect();
        if let Some(alpha) = degrading_ratio(&wg, &sg) {
            status = Status::Holds;
            certificate = Some(Certificate::GainRatio { alpha });
        }
    }
    Ok(ConditionVerdict {
        rendered: query.render(k1),
        query: query.clone(),
        status,
        certificate,
        witness: None,
        best_gap: None,
        samples: 0,
    })
}

pub fn check_query(
    channel: &Channel,
    query: &LessNoisyQuery,
    cfg: &FalsifierConfig,
) -> Result<ConditionVerdict> {
    match channel {
        Channel::Discrete(c) => check_query_discrete(c, query, cfg),
        Channel::Gaussian(g) => check_query_gaussian(g, query),
    }
}

/// Recomputes a witness gap through the generic joint-pmf engine.
pub fn reevaluate_witness(
    channel: &DiscreteChannel,
    query: &LessNoisyQuery,
    witness: &Witness,
) -> Result<f64> {
    let k1 = channel.input_alphabets().len();
    let side = |group: &IndexSet| -> Result<f64> {
        let recv: Vec<usize> = group.iter().copied().collect();
        let table = channel.output_marginal(&recv);
        let ny = table.len() / channel.input_count();
        let mut roster = vec![(Var::Aux(0), witness.u_card)];
        roster.extend((0..k1).map(|i| (Var::Input(i), channel.input_alphabets()[i])));
        roster.extend(
            recv.iter()
                .map(|&j| (Var::Output(j), channel.output_alphabets()[j])),
        );
        let nx = channel.input_count();
        let mut probs = Vec::with_capacity(witness.u_card * nx * ny);
        for u in 0..witness.u_card {
            for x in 0..nx {
                let p = witness.pmf[u * nx + x];
                probs.extend(table[x * ny..(x + 1) * ny].iter().map(|t| p * t));
            }
        }
        let joint = JointPmf::new(roster, probs)?;
        cond_mutual_information(
            &joint,
            &query.left_vars(k1),
            &outputs(group),
            &inputs(&query.conditioned),
        )
    };
    Ok(side(&query.weaker)? - side(&query.stronger)?)
}

fn x_of(topology: &NetworkTopology, messages: &IndexSet) -> Result<IndexSet> {
    inputs_for(topology, messages)
}

fn need_receivers(theorem: TheoremId, topology: &NetworkTopology, k2: usize) -> Result<()> {
    if topology.k2() != k2 {
        return Err(Error::BadParams(format!(
            "{} applies to networks with {} receivers; this one has {}",
            theorem,
            k2,
            topology.k2()
        )));
    }
    Ok(())
}

/// Each receiver demands one private message held by its own transmitter.
fn check_cic(theorem: TheoremId, topology: &NetworkTopology) -> Result<()> {
    let k = topology.k2();
    let ok = topology.k1() == k
        && topology.message_count() == k
        && (0..k).all(|j| {
            topology.demands(j).len() == 1 && {
                let m = *topology.demands(j).first().unwrap();
                topology.messages()[m].label.delta == IndexSet::from([j])
                    && topology.messages()[m].label.nabla == IndexSet::from([j])
            }
        });
    if ok {
        Ok(())
    } else {
        Err(Error::BadParams(format!(
            "{} needs an interference channel where receiver j demands only the message of transmitter j",
            theorem
        )))
    }
}

fn chain_queries(topology: &NetworkTopology, family: Family) -> Result<Vec<LessNoisyQuery>> {
    (1..topology.k2())
        .map(|j| {
            let xc = x_of(topology, &topology.demand_union(j..topology.k2()))?;
            Ok(LessNoisyQuery::new(j, j - 1, xc)
                .family(family)
                .labeled(format!("j={}", j + 1)))
        })
        .collect()
}

fn plan_queries(
    topology: &NetworkTopology,
    reduction: &ReductionResult,
    plan: &PermutationPlan,
) -> Result<Vec<LessNoisyQuery>> {
    let k2 = topology.k2();
    let mut out = Vec::new();
    for j in 1..k2 {
        let eff = &reduction.effective_demands[j];
        let later = topology.demand_union(j + 1..k2);
        let lambda = &plan.lambdas[&j];
        for (theta, &l) in lambda.iter().enumerate() {
            let set = plan.set(j, theta);
            if set != eff {
                let xc = x_of(topology, &later.union(set).copied().collect())?;
                out.push(LessNoisyQuery::new(j, l, xc).labeled(format!(
                    "j={},theta={}",
                    j + 1,
                    theta + 1
                )));
            }
        }
        let pos = plan.position(j, j - 1).expect("orderings are permutations");
        if plan.set(j, pos) == eff {
            let xc = x_of(topology, &topology.demand_union(j..k2))?;
            out.push(LessNoisyQuery::new(j, j - 1, xc).labeled(format!("j={}", j + 1)));
        }
    }
    Ok(out)
}

/// The ordering conditions under which a named bound or capacity result
/// applies. Receiver indices are 0-based; receiver 0 is the strongest.
pub fn build_condition_set(
    topology: &NetworkTopology,
    connectivity: &ConnectivityReport,
    reduction: &ReductionResult,
    theorem: TheoremId,
    params: &AnalysisParams,
) -> Result<Vec<LessNoisyQuery>> {
    let k1 = topology.k1();
    let k2 = topology.k2();
    let all_inputs: IndexSet = (0..k1).collect();
    let t2a = || -> Result<LessNoisyQuery> {
        Ok(
            LessNoisyQuery::new(1, 0, x_of(topology, topology.demands(1))?)
                .labeled("weaker given its inputs"),
        )
    };
    let t2b = || -> Result<LessNoisyQuery> {
        Ok(
            LessNoisyQuery::new(1, 0, x_of(topology, topology.demands(0))?)
                .without_u()
                .labeled("given stronger inputs"),
        )
    };
    match theorem {
        TheoremId::T2A => {
            need_receivers(theorem, topology, 2)?;
            Ok(vec![t2a()?])
        }
        TheoremId::T2B => {
            need_receivers(theorem, topology, 2)?;
            Ok(vec![t2b()?])
        }
        TheoremId::T4 => {
            need_receivers(theorem, topology, 2)?;
            Ok(vec![t2a()?, t2b()?])
        }
        TheoremId::T3 => {
            need_receivers(theorem, topology, 2)?;
            let xc = x_of(topology, connectivity.unconnected_messages(0))?;
            Ok(vec![LessNoisyQuery::new(1, 0, xc).labeled(
                "given inputs unconnected to the stronger receiver",
            )])
        }
        TheoremId::T5 => chain_queries(topology, Family::Product),
        TheoremId::T6 => {
            check_cic(theorem, topology)?;
            chain_queries(topology, Family::IndependentInputs)
        }
        TheoremId::T7 => {
            let plan = lambda_sets(reduction, connectivity, &params.lambdas)?;
            plan_queries(topology, reduction, &plan)
        }
        TheoremId::FullyConnected => {
            if !connectivity.is_fully_connected() {
                return Err(Error::BadParams(format!(
                    "{} needs every transmitter connected to every receiver",
                    theorem
                )));
            }
            let plan = lambda_sets(reduction, connectivity, &PermutationPlan::identity(k2))?;
            plan_queries(topology, reduction, &plan)
        }
        TheoremId::T8 => {
            let s = params
                .schedule
                .as_ref()
                .ok_or_else(|| Error::BadParams(format!("{} needs a schedule", theorem)))?;
            let suffix = |p: usize| x_of(topology, &s.suffix_messages(topology, p));
            let mut out = Vec::new();
            for p in 0..s.cuts[0].saturating_sub(1) {
                out.push(
                    LessNoisyQuery::new(s.order[p], s.order[p + 1], suffix(p + 1)?)
                        .without_u()
                        .labeled(format!("first block, position {}", p + 1)),
                );
            }
            for b in 0..s.cuts.len() - 1 {
                let start = s.cuts[b];
                let extra = suffix(start)?;
                for p in start..s.cuts[b + 1] - 1 {
                    out.push(
                        LessNoisyQuery::new(s.order[p], s.order[p + 1], suffix(p + 1)?)
                            .with_extra(extra.clone(), k1)
                            .labeled(format!("block {}, position {}", b + 2, p + 1)),
                    );
                }
            }
            for b in 1..s.cuts.len() {
                out.push(
                    LessNoisyQuery::new(
                        s.block_receiver(b),
                        s.block_receiver(b - 1),
                        suffix(s.cuts[b - 1])?,
                    )
                    .labeled(format!("block {} against block {}", b + 1, b)),
                );
            }
            Ok(out)
        }
        TheoremId::T9 => {
            let g = params.grouping.as_ref().ok_or_else(|| {
                Error::BadParams(format!("{} needs a receiver grouping", theorem))
            })?;
            (1..g.blocks.len())
                .map(|j| {
                    let xc = x_of(topology, &g.messages_from(topology, j))?;
                    Ok(
                        LessNoisyQuery::groups(g.blocks[j].clone(), g.blocks[j - 1].clone(), xc)
                            .labeled(format!("group {}", j + 1)),
                    )
                })
                .collect()
        }
        TheoremId::ManyToOne | TheoremId::ManyToOneIndependent => {
            if k2 < 2 {
                return Err(Error::BadParams(format!(
                    "{} needs at least two receivers",
                    theorem
                )));
            }
            let family = if theorem == TheoremId::ManyToOne {
                Family::Product
            } else {
                Family::IndependentInputs
            };
            let xc = x_of(topology, topology.demands(k2 - 1))?;
            Ok(vec![LessNoisyQuery::groups(
                IndexSet::from([k2 - 1]),
                (0..k2 - 1).collect(),
                xc,
            )
            .family(family)
            .labeled("last receiver against the rest")])
        }
        TheoremId::Pairwise => {
            let p = params
                .pair
                .as_ref()
                .ok_or_else(|| Error::BadParams(format!("{} needs a receiver pair", theorem)))?;
            if p.weaker == p.stronger {
                return Err(Error::BadParams("pair needs two distinct receivers".into()));
            }
            let bc: IndexSet = topology
                .demands(p.stronger)
                .union(&p.messages)
                .copied()
                .collect();
            let abc: IndexSet = bc.union(topology.demands(p.weaker)).copied().collect();
            let total = x_of(topology, &abc)?;
            let q = LessNoisyQuery::new(p.weaker, p.stronger, x_of(topology, &bc)?)
                .labeled(format!("extra messages {}", describe(&p.messages, "#")));
            Ok(vec![if total == all_inputs {
                q.without_u()
            } else {
                q.with_extra(total, k1)
            }])
        }
        TheoremId::Strong3 => {
            need_receivers(theorem, topology, 3)?;
            check_cic(theorem, topology)?;
            Ok(vec![
                LessNoisyQuery::new(1, 0, IndexSet::from([0]))
                    .with_extra(IndexSet::from([1]), k1)
                    .labeled("second receiver"),
                LessNoisyQuery::new(2, 0, IndexSet::from([0, 1]))
                    .without_u()
                    .labeled("third receiver"),
            ])
        }
    }
}

/// `lhs ≤ rhs` to be checked on an argmax set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CmiComparison {
    pub label: String,
    pub lhs: Atom,
    pub rhs: Atom,
}

/// A maximizer at which comparisons are evaluated.
pub enum ArgmaxMember<'a> {
    Discrete(&'a JointPmf),
    Gaussian(&'a GaussianBackend),
}

impl ArgmaxMember<'_> {
    fn eval(&self, atom: &Atom) -> Result<f64> {
        match self {
            ArgmaxMember::Discrete(j) => Evaluator::new(j).atom(atom),
            ArgmaxMember::Gaussian(g) => g.atom(atom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArgmaxVerdict {
    pub status: Status,
    pub certificate: Option<Certificate>,
    /// Every reversed comparison holds at every member.
    pub reversed_holds: bool,
    /// Largest `lhs − rhs` over forward comparisons and members.
    pub worst_gap: f64,
    /// First member where a forward comparison fails.
    pub failing_member: Option<usize>,
    pub members: usize,
}

/// Checks comparisons at every member of an argmax set.
pub fn check_argmax_conditions(
    forward: &[CmiComparison],
    reversed: &[CmiComparison],
    members: &[ArgmaxMember<'_>],
    tolerance: f64,
) -> Result<ArgmaxVerdict> {
    if members.is_empty() {
        return Err(Error::EmptyArgmax);
    }
    let mut worst = f64::NEG_INFINITY;
    let mut failing = None;
    let mut reversed_holds = true;
    for (k, m) in members.iter().enumerate() {
        for c in forward {
            let g = m.eval(&c.lhs)? - m.eval(&c.rhs)?;
            worst = worst.max(g);
            if g > tolerance && failing.is_none() {
                failing = Some(k);
            }
        }
        for c in reversed {
            if m.eval(&c.lhs)? - m.eval(&c.rhs)? > tolerance {
                reversed_holds = false;
            }
        }
    }
    if forward.is_empty() {
        worst = 0.0;
    }
    let status = if failing.is_none() {
        Status::Holds
    } else {
        Status::Violated
    };
    let certificate = if status == Status::Holds {
        Some(Certificate::Argmax { reversed: false })
    } else if reversed_holds {
        Some(Certificate::Argmax { reversed: true })
    } else {
        None
    };
    Ok(ArgmaxVerdict {
        status,
        certificate,
        reversed_holds,
        worst_gap: worst,
        failing_member: failing,
        members: members.len(),
    })
}
