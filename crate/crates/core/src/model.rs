//! Network model: message topology, discrete and Gaussian channels, and
//! connectivity analysis.
//!
//! Indices are 0-based throughout the library. Configuration files and
//! rendered names (`X1`, `Y2`) are 1-based.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

pub type IndexSet = BTreeSet<usize>;

/// Total-variation threshold below which an output is treated as not
/// depending on an input.
pub const DEFAULT_DEPENDENCE_THRESHOLD: f64 = 1e-12;

/// Gains with magnitude at or below this are treated as absent links.
pub const GAIN_ZERO_THRESHOLD: f64 = 1e-12;

const ROW_SUM_TOL: f64 = 1e-12;

/// Transmitter set `delta` and receiver set `nabla` of a message.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MessageLabel {
    pub delta: IndexSet,
    pub nabla: IndexSet,
}

impl MessageLabel {
    pub fn new(
        delta: impl IntoIterator<Item = usize>,
        nabla: impl IntoIterator<Item = usize>,
    ) -> Self {
        MessageLabel {
            delta: delta.into_iter().collect(),
            nabla: nabla.into_iter().collect(),
        }
    }

    /// Largest receiver index in `nabla`.
    pub fn max_nabla(&self) -> Option<usize> {
        self.nabla.iter().next_back().copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Message {
    pub id: String,
    pub label: MessageLabel,
}

/// Transmitters, receivers and the messages between them.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkTopology {
    k1: usize,
    k2: usize,
    messages: Vec<Message>,
    knowledge: Vec<IndexSet>,
    demands: Vec<IndexSet>,
}

impl NetworkTopology {
    /// Builds a topology. Only index ranges are enforced here; the remaining
    /// invariants are reported by [`validate_topology`].
    pub fn new(k1: usize, k2: usize, messages: Vec<Message>) -> Result<Self> {
        let mut knowledge = vec![IndexSet::new(); k1];
        let mut demands = vec![IndexSet::new(); k2];
        for (m, msg) in messages.iter().enumerate() {
            for &i in &msg.label.delta {
                if i >= k1 {
                    return Err(Error::Dimension(format!(
                        "message `{}` names transmitter {} but there are {}",
                        msg.id,
                        i + 1,
                        k1
                    )));
                }
                knowledge[i].insert(m);
            }
            for &j in &msg.label.nabla {
                if j >= k2 {
                    return Err(Error::Dimension(format!(
                        "message `{}` names receiver {} but there are {}",
                        msg.id,
                        j + 1,
                        k2
                    )));
                }
                demands[j].insert(m);
            }
        }
        Ok(NetworkTopology {
            k1,
            k2,
            messages,
            knowledge,
            demands,
        })
    }

    /// Builds a topology from per-transmitter knowledge sets and per-receiver
    /// demand sets, reconstructing each message's label. Messages are ordered
    /// by first appearance.
    pub fn from_sets(knowledge: &[Vec<&str>], demands: &[Vec<&str>]) -> Result<Self> {
        let mut order: Vec<String> = Vec::new();
        let mut labels: BTreeMap<String, MessageLabel> = BTreeMap::new();
        for (i, set) in knowledge.iter().enumerate() {
            for id in set {
                if !labels.contains_key(*id) {
                    order.push(id.to_string());
                }
                labels
                    .entry(id.to_string())
                    .or_insert_with(|| MessageLabel::new([], []))
                    .delta
                    .insert(i);
            }
        }
        for (j, set) in demands.iter().enumerate() {
            for id in set {
                if !labels.contains_key(*id) {
                    order.push(id.to_string());
                }
                labels
                    .entry(id.to_string())
                    .or_insert_with(|| MessageLabel::new([], []))
                    .nabla
                    .insert(j);
            }
        }
        let messages = order
            .into_iter()
            .map(|id| {
                let label = labels.remove(&id).expect("label recorded");
                Message { id, label }
            })
            .collect();
        NetworkTopology::new(knowledge.len(), demands.len(), messages)
    }

    pub fn k1(&self) -> usize {
        self.k1
    }

    pub fn k2(&self) -> usize {
        self.k2
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn message_count(&self) -> usize {
        self.messages.len()
    }

    pub fn all_messages(&self) -> IndexSet {
        (0..self.messages.len()).collect()
    }

    /// Messages known at transmitter `i`.
    pub fn knowledge(&self, i: usize) -> &IndexSet {
        &self.knowledge[i]
    }

    /// Messages demanded by receiver `j`.
    pub fn demands(&self, j: usize) -> &IndexSet {
        &self.demands[j]
    }

    /// Union of the demand sets of the given receivers.
    pub fn demand_union(&self, receivers: impl IntoIterator<Item = usize>) -> IndexSet {
        let mut out = IndexSet::new();
        for j in receivers {
            out.extend(self.demands[j].iter().copied());
        }
        out
    }

    pub fn message_index(&self, id: &str) -> Result<usize> {
        self.messages
            .iter()
            .position(|m| m.id == id)
            .ok_or_else(|| Error::UnknownMessage(id.to_string()))
    }

    pub fn resolve_ids<S: AsRef<str>>(&self, ids: &[S]) -> Result<IndexSet> {
        ids.iter()
            .map(|id| self.message_index(id.as_ref()))
            .collect()
    }

    pub fn message_ids(&self, set: &IndexSet) -> Vec<String> {
        set.iter().map(|&m| self.messages[m].id.clone()).collect()
    }

    /// Reorders receivers so that new receiver `k` is old receiver `perm[k]`.
    pub fn permute_receivers(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.k2)?;
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let messages = self
            .messages
            .iter()
            .map(|m| Message {
                id: m.id.clone(),
                label: MessageLabel {
                    delta: m.label.delta.clone(),
                    nabla: m.label.nabla.iter().map(|&j| inverse[j]).collect(),
                },
            })
            .collect();
        NetworkTopology::new(self.k1, self.k2, messages)
    }
}

/// Checks that `perm` is a bijection on `0..n`.
pub fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidPermutation(format!(
            "expected {} entries, got {}",
            n,
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidPermutation(format!(
                "{:?} is not a bijection on 1..{}",
                perm, n
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Memoryless discrete channel `P(y_1..y_K2 | x_1..x_K1)`.
///
/// The transition table is row-major: rows are input tuples with `x_1`
/// most significant, columns are output tuples with `y_1` most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteChannel {
    input_alphabets: Vec<usize>,
    output_alphabets: Vec<usize>,
    transition: Vec<f64>,
}

impl DiscreteChannel {
    pub fn new(
        input_alphabets: Vec<usize>,
        output_alphabets: Vec<usize>,
        transition: Vec<f64>,
    ) -> Result<Self> {
        if input_alphabets
            .iter()
            .chain(&output_alphabets)
            .any(|&a| a == 0)
        {
            return Err(Error::InvalidChannel(
                "alphabet sizes must be positive".into(),
            ));
        }
        let nx: usize = input_alphabets.iter().product();
        let ny: usize = output_alphabets.iter().product();
        if transition.len() != nx * ny {
            return Err(Error::InvalidChannel(format!(
                "transition has {} entries, expected {} x {}",
                transition.len(),
                nx,
                ny
            )));
        }
        for x in 0..nx {
            let row = &transition[x * ny..(x + 1) * ny];
            if let Some(&p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
                return Err(Error::InvalidChannel(format!(
                    "transition row x={} has invalid entry {}",
                    format_tuple(&decode_index(x, &input_alphabets)),
                    p
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidChannel(format!(
                    "transition row x={} sums to {} (expected 1)",
                    format_tuple(&decode_index(x, &input_alphabets)),
                    s
                )));
            }
        }
        Ok(DiscreteChannel {
            input_alphabets,
            output_alphabets,
            transition,
        })
    }

    /// Builds a channel from a function giving `P(y | x)` for full tuples.
    pub fn from_fn(
        input_alphabets: Vec<usize>,
        output_alphabets: Vec<usize>,
        f: impl Fn(&[usize], &[usize]) -> f64,
    ) -> Result<Self> {
        let nx: usize = input_alphabets.iter().product();
        let ny: usize = output_alphabets.iter().product();
        let mut transition = Vec::with_capacity(nx * ny);
        for x in 0..nx {
            let xs = decode_index(x, &input_alphabets);
            for y in 0..ny {
                transition.push(f(&xs, &decode_index(y, &output_alphabets)));
            }
        }
        DiscreteChannel::new(input_alphabets, output_alphabets, transition)
    }

    pub fn input_alphabets(&self) -> &[usize] {
        &self.input_alphabets
    }

    pub fn output_alphabets(&self) -> &[usize] {
        &self.output_alphabets
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    pub fn input_count(&self) -> usize {
        self.input_alphabets.iter().product()
    }

    pub fn output_count(&self) -> usize {
        self.output_alphabets.iter().product()
    }

    pub fn row(&self, x: usize) -> &[f64] {
        let ny = self.output_count();
        &self.transition[x * ny..(x + 1) * ny]
    }

    /// `P(y_S | x)` for receivers `S` (in the given order), as an
    /// `input_count() x Π|Y_j|` row-major table.
    pub fn output_marginal(&self, receivers: &[usize]) -> Vec<f64> {
        let nx = self.input_count();
        let ny = self.output_count();
        let sub: Vec<usize> = receivers
            .iter()
            .map(|&j| self.output_alphabets[j])
            .collect();
        let nsub: usize = sub.iter().product();
        let strides = strides(&self.output_alphabets);
        let mut out = vec![0.0; nx * nsub];
        for y in 0..ny {
            let mut k = 0;
            for &j in receivers {
                k = k * self.output_alphabets[j] + (y / strides[j]) % self.output_alphabets[j];
            }
            for x in 0..nx {
                out[x * nsub + k] += self.transition[x * ny + y];
            }
        }
        out
    }

    fn permute_receivers(&self, perm: &[usize]) -> Result<Self> {
        let outputs: Vec<usize> = perm.iter().map(|&old| self.output_alphabets[old]).collect();
        let table = self.output_marginal(perm);
        DiscreteChannel::new(self.input_alphabets.clone(), outputs, table)
    }
}

/// Real Gaussian channel `Y_j = Σ_i a_ji X_i + Z_j` with unit noise variance.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianChannel {
    gains: Vec<Vec<f64>>,
    powers: Vec<f64>,
}

impl GaussianChannel {
    pub fn new(gains: Vec<Vec<f64>>, powers: Vec<f64>) -> Result<Self> {
        for (j, row) in gains.iter().enumerate() {
            if row.len() != powers.len() {
                return Err(Error::InvalidChannel(format!(
                    "gain row for Y{} has {} entries, expected {}",
                    j + 1,
                    row.len(),
                    powers.len()
                )));
            }
            if row.iter().any(|g| !g.is_finite()) {
                return Err(Error::InvalidChannel(format!(
                    "gain row for Y{} is not finite",
                    j + 1
                )));
            }
        }
        for (i, &p) in powers.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidChannel(format!(
                    "power of X{} is {} (must be finite and >= 0)",
                    i + 1,
                    p
                )));
            }
        }
        Ok(GaussianChannel { gains, powers })
    }

    pub fn gains(&self) -> &[Vec<f64>] {
        &self.gains
    }

    pub fn gain(&self, j: usize, i: usize) -> f64 {
        self.gains[j][i]
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn k1(&self) -> usize {
        self.powers.len()
    }

    pub fn k2(&self) -> usize {
        self.gains.len()
    }

    pub fn with_powers(&self, powers: Vec<f64>) -> Result<Self> {
        GaussianChannel::new(self.gains.clone(), powers)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Channel {
    Discrete(DiscreteChannel),
    Gaussian(GaussianChannel),
}

impl Channel {
    pub fn k1(&self) -> usize {
        match self {
            Channel::Discrete(c) => c.input_alphabets.len(),
            Channel::Gaussian(c) => c.k1(),
        }
    }

    pub fn k2(&self) -> usize {
        match self {
            Channel::Discrete(c) => c.output_alphabets.len(),
            Channel::Gaussian(c) => c.k2(),
        }
    }

    /// Reorders receivers so that new receiver `k` is old receiver `perm[k]`.
    pub fn permute_receivers(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.k2())?;
        Ok(match self {
            Channel::Discrete(c) => Channel::Discrete(c.permute_receivers(perm)?),
            Channel::Gaussian(c) => Channel::Gaussian(GaussianChannel::new(
                perm.iter().map(|&old| c.gains[old].clone()).collect(),
                c.powers.clone(),
            )?),
        })
    }

    fn check_dims(&self, topology: &NetworkTopology) -> Result<()> {
        if self.k1() != topology.k1() || self.k2() != topology.k2() {
            return Err(Error::Dimension(format!(
                "channel is {}x{} (transmitters x receivers) but the topology is {}x{}",
                self.k1(),
                self.k2(),
                topology.k1(),
                topology.k2()
            )));
        }
        Ok(())
    }
}

/// Connectivity of one receiver.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReceiverConnectivity {
    pub connected_transmitters: IndexSet,
    pub unconnected_transmitters: IndexSet,
    /// Messages known only at transmitters unconnected to this receiver.
    pub unconnected_messages: IndexSet,
    pub connected_messages: IndexSet,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConnectivityReport {
    pub receivers: Vec<ReceiverConnectivity>,
}

impl ConnectivityReport {
    pub fn unconnected_messages(&self, j: usize) -> &IndexSet {
        &self.receivers[j].unconnected_messages
    }

    pub fn is_connected(&self, j: usize, i: usize) -> bool {
        self.receivers[j].connected_transmitters.contains(&i)
    }

    pub fn is_fully_connected(&self) -> bool {
        self.receivers
            .iter()
            .all(|r| r.unconnected_transmitters.is_empty())
    }
}

pub fn connectivity(topology: &NetworkTopology, channel: &Channel) -> Result<ConnectivityReport> {
    connectivity_with_threshold(topology, channel, DEFAULT_DEPENDENCE_THRESHOLD)
}

pub fn connectivity_with_threshold(
    topology: &NetworkTopology,
    channel: &Channel,
    threshold: f64,
) -> Result<ConnectivityReport> {
    channel.check_dims(topology)?;
    let k1 = topology.k1();
    let links: Vec<Vec<bool>> = match channel {
        Channel::Gaussian(c) => c
            .gains
            .iter()
            .map(|row| row.iter().map(|g| g.abs() > GAIN_ZERO_THRESHOLD).collect())
            .collect(),
        Channel::Discrete(c) => (0..topology.k2())
            .map(|j| discrete_links(c, j, threshold))
            .collect(),
    };
    let receivers = links
        .iter()
        .map(|row| {
            let connected: IndexSet = (0..k1).filter(|&i| row[i]).collect();
            let unconnected: IndexSet = (0..k1).filter(|&i| !row[i]).collect();
            let reach = |set: &IndexSet| -> IndexSet {
                set.iter()
                    .flat_map(|&i| topology.knowledge(i).iter().copied())
                    .collect()
            };
            let known_connected = reach(&connected);
            let unconnected_messages: IndexSet = reach(&unconnected)
                .difference(&known_connected)
                .copied()
                .collect();
            let connected_messages = topology
                .all_messages()
                .difference(&unconnected_messages)
                .copied()
                .collect();
            ReceiverConnectivity {
                connected_transmitters: connected,
                unconnected_transmitters: unconnected,
                unconnected_messages,
                connected_messages,
            }
        })
        .collect();
    Ok(ConnectivityReport { receivers })
}

fn discrete_links(c: &DiscreteChannel, j: usize, threshold: f64) -> Vec<bool> {
    let table = c.output_marginal(&[j]);
    let ny = c.output_alphabets[j];
    let st = strides(&c.input_alphabets);
    (0..c.input_alphabets.len())
        .map(|i| {
            (0..c.input_count())
                .filter(|x| (x / st[i]) % c.input_alphabets[i] == 0)
                .any(|x| {
                    let base = &table[x * ny..(x + 1) * ny];
                    (1..c.input_alphabets[i]).any(|v| {
                        let other = &table[(x + v * st[i]) * ny..(x + v * st[i] + 1) * ny];
                        let tv: f64 = 0.5
                            * base
                                .iter()
                                .zip(other)
                                .map(|(a, b)| (a - b).abs())
                                .sum::<f64>();
                        tv > threshold
                    })
                })
        })
        .collect()
}

/// `X_Ω`: transmitters whose whole knowledge set lies inside `omega`.
pub fn inputs_for(topology: &NetworkTopology, omega: &IndexSet) -> Result<IndexSet> {
    if let Some(&m) = omega.iter().find(|&&m| m >= topology.message_count()) {
        return Err(Error::UnknownMessage(format!("#{}", m)));
    }
    Ok((0..topology.k1())
        .filter(|&i| topology.knowledge(i).is_subset(omega))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// A message is known by no transmitter.
    KnowledgeUnion,
    /// A message is demanded by no receiver.
    DemandUnion,
    DuplicateId,
    DuplicateLabel,
    ChannelShape,
    /// A receiver demands a message that no connected transmitter knows.
    UnconnectedDemand,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.detail)
    }
}

/// Reports every violated topology invariant. The connectivity check runs
/// only when a channel of matching shape is given.
pub fn validate_topology(topology: &NetworkTopology, channel: Option<&Channel>) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, detail: String| out.push(Violation { kind, detail });
    let mut ids = BTreeSet::new();
    let mut labels = BTreeMap::new();
    for msg in topology.messages() {
        if msg.label.delta.is_empty() {
            push(
                ViolationKind::KnowledgeUnion,
                format!(
                    "knowledge union: message `{}` is known by no transmitter",
                    msg.id
                ),
            );
        }
        if msg.label.nabla.is_empty() {
            push(
                ViolationKind::DemandUnion,
                format!(
                    "demand union: message `{}` is demanded by no receiver",
                    msg.id
                ),
            );
        }
        if !ids.insert(msg.id.clone()) {
            push(
                ViolationKind::DuplicateId,
                format!("duplicate message id `{}`", msg.id),
            );
        }
        if let Some(prev) = labels.insert(msg.label.clone(), msg.id.clone()) {
            push(
                ViolationKind::DuplicateLabel,
                format!(
                    "messages `{}` and `{}` share transmitter and receiver sets",
                    prev, msg.id
                ),
            );
        }
    }
    if let Some(channel) = channel {
        match connectivity(topology, channel) {
            Err(e) => push(ViolationKind::ChannelShape, e.to_string()),
            Ok(conn) => {
                for j in 0..topology.k2() {
                    for &m in topology.demands(j) {
                        let msg = &topology.messages()[m];
                        if !msg.label.delta.iter().any(|&i| conn.is_connected(j, i)) {
                            push(
                                ViolationKind::UnconnectedDemand,
                                format!(
                                    "unconnected demand: Y{} demands `{}` but no transmitter knowing it is connected to Y{}",
                                    j + 1,
                                    msg.id,
                                    j + 1
                                ),
                            );
                        }
                    }
                }
            }
        }
    }
    out
}

/// Row-major strides for a mixed-radix index.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Mixed-radix digits of `index`, most significant first.
pub fn decode_index(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
    out
}

pub fn encode_index(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
}

fn format_tuple(t: &[usize]) -> String {
    let parts: Vec<String> = t.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(","))
}
