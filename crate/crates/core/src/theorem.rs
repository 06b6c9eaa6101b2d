//! Identifiers for the supported bounds and schemes, and the free choices
//! (receiver orderings, schedules, groupings) that parameterize them.
//!
//! Parameter documents use 1-based receiver indices and message ids; the
//! parsed forms are 0-based.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_permutation, IndexSet, NetworkTopology};
use crate::plan::PermutationPlan;

/// Condition sets and bounds, by identifier.
///
/// | id | conditions | outer bound | default scheme |
/// |----|------------|-------------|----------------|
/// | `T2A` | weaker receiver less noisy given its own inputs | two-term chain | successive |
/// | `T2B` | inputs-only ordering given the stronger receiver's inputs | all messages at receiver 1 | successive |
/// | `T3` | ordering given inputs unconnected to receiver 1 | two-term chain | successive |
/// | `T4` | `T2A` and `T2B` together | min of both | successive-joint |
/// | `T5` | consecutive orderings along the receiver chain | chain sum | successive |
/// | `T6` | as `T5`, independent-input family | chain sum | successive |
/// | `T7` | orderings along permutation plans | chain sum | successive |
/// | `T8` | schedule of blocks | schedule sum | successive |
/// | `T9` | receiver grouping | grouped chain sum | successive |
/// | `FULLY_CONNECTED` | `T7` with identity plans, no unconnected links | chain sum | successive |
/// | `PAIRWISE` | one ordering with extra inputs on the left | none | none |
/// | `MANY_TO_ONE` | last receiver vs all others given its input | grouped sum | TIN |
/// | `MANY_TO_ONE_INDEP` | same, independent-input family | grouped sum | TIN |
/// | `STRONG3` | strong-interference style pair for three users | none | none |
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TheoremId {
    #[serde(rename = "T2A")]
    T2A,
    #[serde(rename = "T2B")]
    T2B,
    #[serde(rename = "T3")]
    T3,
    #[serde(rename = "T4")]
    T4,
    #[serde(rename = "T5")]
    T5,
    #[serde(rename = "T6")]
    T6,
    #[serde(rename = "T7")]
    T7,
    #[serde(rename = "T8")]
    T8,
    #[serde(rename = "T9")]
    T9,
    #[serde(rename = "FULLY_CONNECTED")]
    FullyConnected,
    #[serde(rename = "PAIRWISE")]
    Pairwise,
    #[serde(rename = "MANY_TO_ONE")]
    ManyToOne,
    #[serde(rename = "MANY_TO_ONE_INDEP")]
    ManyToOneIndependent,
    #[serde(rename = "STRONG3")]
    Strong3,
}

impl TheoremId {
    pub const ALL: [TheoremId; 14] = [
        TheoremId::T2A,
        TheoremId::T2B,
        TheoremId::T3,
        TheoremId::T4,
        TheoremId::T5,
        TheoremId::T6,
        TheoremId::T7,
        TheoremId::T8,
        TheoremId::T9,
        TheoremId::FullyConnected,
        TheoremId::Pairwise,
        TheoremId::ManyToOne,
        TheoremId::ManyToOneIndependent,
        TheoremId::Strong3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::T2A => "T2A",
            TheoremId::T2B => "T2B",
            TheoremId::T3 => "T3",
            TheoremId::T4 => "T4",
            TheoremId::T5 => "T5",
            TheoremId::T6 => "T6",
            TheoremId::T7 => "T7",
            TheoremId::T8 => "T8",
            TheoremId::T9 => "T9",
            TheoremId::FullyConnected => "FULLY_CONNECTED",
            TheoremId::Pairwise => "PAIRWISE",
            TheoremId::ManyToOne => "MANY_TO_ONE",
            TheoremId::ManyToOneIndependent => "MANY_TO_ONE_INDEP",
            TheoremId::Strong3 => "STRONG3",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .iter()
            .copied()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownTheorem(s.to_string()))
    }
}

/// Achievability schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeId {
    /// Each receiver decodes the connected messages of every weaker receiver,
    /// one message at a time, then its own.
    #[serde(rename = "SUCCESSIVE")]
    Successive,
    /// Two receivers: the second receiver's messages are decoded jointly at
    /// the first receiver together with its own.
    #[serde(rename = "SUCCESSIVE_JOINT")]
    SuccessiveJoint,
    /// Each receiver decodes only its own messages.
    #[serde(rename = "TIN")]
    Tin,
}

impl SchemeId {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::Successive => "SUCCESSIVE",
            SchemeId::SuccessiveJoint => "SUCCESSIVE_JOINT",
            SchemeId::Tin => "TIN",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SchemeId::Successive,
            SchemeId::SuccessiveJoint,
            SchemeId::Tin,
        ]
        .into_iter()
        .find(|t| t.as_str().eq_ignore_ascii_case(s))
        .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

/// Partition of the receivers into ordered blocks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReceiverGrouping {
    pub blocks: Vec<IndexSet>,
}

impl ReceiverGrouping {
    pub fn new(k2: usize, blocks: Vec<IndexSet>) -> Result<Self> {
        let mut seen = IndexSet::new();
        for b in &blocks {
            if b.is_empty() {
                return Err(Error::BadParams("grouping has an empty block".into()));
            }
            for &j in b {
                if j >= k2 || !seen.insert(j) {
                    return Err(Error::BadParams(format!(
                        "grouping repeats or misnames receiver {}",
                        j + 1
                    )));
                }
            }
        }
        if seen.len() != k2 {
            return Err(Error::BadParams(
                "grouping does not cover every receiver".into(),
            ));
        }
        Ok(ReceiverGrouping { blocks })
    }

    pub fn singletons(k2: usize) -> Self {
        ReceiverGrouping {
            blocks: (0..k2).map(|j| IndexSet::from([j])).collect(),
        }
    }

    /// Messages demanded by block `g`.
    pub fn messages(&self, topology: &NetworkTopology, g: usize) -> IndexSet {
        topology.demand_union(self.blocks[g].iter().copied())
    }

    /// Messages demanded by blocks `g..`.
    pub fn messages_from(&self, topology: &NetworkTopology, g: usize) -> IndexSet {
        (g..self.blocks.len())
            .flat_map(|h| self.messages(topology, h))
            .collect()
    }
}

/// Receiver ordering with cut points splitting it into blocks.
///
/// `order[p]` is the receiver at position `p`; `cuts` are block ends
/// (exclusive, strictly increasing, last equal to the receiver count).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderingSchedule {
    pub order: Vec<usize>,
    pub cuts: Vec<usize>,
}

impl OrderingSchedule {
    pub fn new(k2: usize, order: Vec<usize>, cuts: Vec<usize>) -> Result<Self> {
        check_permutation(&order, k2)?;
        if cuts.is_empty()
            || cuts[0] == 0
            || cuts.windows(2).any(|w| w[0] >= w[1])
            || *cuts.last().unwrap() != k2
        {
            return Err(Error::BadParams(format!(
                "cut points {:?} must be strictly increasing, start at 1 or more and end at {}",
                cuts, k2
            )));
        }
        Ok(OrderingSchedule { order, cuts })
    }

    /// Start position of block `b`.
    pub fn block_start(&self, b: usize) -> usize {
        if b == 0 {
            0
        } else {
            self.cuts[b - 1]
        }
    }

    /// Messages demanded by receivers at positions `p..`.
    pub fn suffix_messages(&self, topology: &NetworkTopology, p: usize) -> IndexSet {
        topology.demand_union(self.order[p.min(self.order.len())..].iter().copied())
    }

    /// Messages demanded by block `b`.
    pub fn block_messages(&self, topology: &NetworkTopology, b: usize) -> IndexSet {
        topology.demand_union(
            self.order[self.block_start(b)..self.cuts[b]]
                .iter()
                .copied(),
        )
    }

    /// Receiver at the last position of block `b`.
    pub fn block_receiver(&self, b: usize) -> usize {
        self.order[self.cuts[b] - 1]
    }
}

/// Receivers and extra messages of a single pairwise condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairSpec {
    pub weaker: usize,
    pub stronger: usize,
    pub messages: IndexSet,
}

/// Free choices for condition sets, bounds and schemes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisParams {
    pub lambdas: PermutationPlan,
    pub schedule: Option<OrderingSchedule>,
    pub grouping: Option<ReceiverGrouping>,
    /// Decoding order for a receiver's effective demands.
    pub decode_orders: BTreeMap<usize, Vec<usize>>,
    /// Restrict bounds and schemes to the reduced message set.
    pub m_star: bool,
    pub pair: Option<PairSpec>,
    /// Evaluate conditions under every permutation plan.
    pub sweep_lambdas: bool,
}

impl AnalysisParams {
    pub fn defaults(k2: usize) -> Self {
        AnalysisParams {
            lambdas: PermutationPlan::identity(k2),
            schedule: None,
            grouping: None,
            decode_orders: BTreeMap::new(),
            m_star: false,
            pair: None,
            sweep_lambdas: false,
        }
    }

    /// Parses a parameter document.
    ///
    /// ```json
    /// {"lambdas": {"3": [2, 1]},
    ///  "schedule": {"order": [2, 1, 3], "cuts": [2, 3]},
    ///  "grouping": [[1, 2], [3]],
    ///  "decode_orders": {"2": ["M3", "M2"]},
    ///  "m_star": true,
    ///  "pair": {"weaker": 2, "stronger": 1, "messages": ["M1"]},
    ///  "sweep_lambdas": false}
    /// ```
    pub fn from_json(value: &serde_json::Value, topology: &NetworkTopology) -> Result<Self> {
        let doc: ParamsDoc =
            serde_json::from_value(value.clone()).map_err(|e| Error::BadParams(e.to_string()))?;
        let k2 = topology.k2();
        let receiver = |r: usize| -> Result<usize> {
            if r == 0 || r > k2 {
                Err(Error::BadParams(format!(
                    "receiver {} out of range 1..{}",
                    r, k2
                )))
            } else {
                Ok(r - 1)
            }
        };
        let receivers =
            |v: &[usize]| -> Result<Vec<usize>> { v.iter().map(|&r| receiver(r)).collect() };
        let mut out = AnalysisParams::defaults(k2);
        if let Some(l) = doc.lambdas {
            let mut lambdas = BTreeMap::new();
            for (j, order) in l {
                let j: usize = j
                    .parse()
                    .map_err(|_| Error::BadParams(format!("bad receiver key `{}`", j)))?;
                lambdas.insert(receiver(j)?, receivers(&order)?);
            }
            out.lambdas = PermutationPlan::new(k2, lambdas)?;
        }
        if let Some(s) = doc.schedule {
            out.schedule = Some(OrderingSchedule::new(k2, receivers(&s.order)?, s.cuts)?);
        }
        if let Some(g) = doc.grouping {
            let blocks = g
                .iter()
                .map(|b| receivers(b).map(|v| v.into_iter().collect()))
                .collect::<Result<Vec<IndexSet>>>()?;
            out.grouping = Some(ReceiverGrouping::new(k2, blocks)?);
        }
        if let Some(d) = doc.decode_orders {
            for (j, ids) in d {
                let j: usize = j
                    .parse()
                    .map_err(|_| Error::BadParams(format!("bad receiver key `{}`", j)))?;
                let order = ids
                    .iter()
                    .map(|id| topology.message_index(id))
                    .collect::<Result<Vec<usize>>>()?;
                out.decode_orders.insert(receiver(j)?, order);
            }
        }
        out.m_star = doc.m_star.unwrap_or(false);
        out.sweep_lambdas = doc.sweep_lambdas.unwrap_or(false);
        if let Some(p) = doc.pair {
            out.pair = Some(PairSpec {
                weaker: receiver(p.weaker)?,
                stronger: receiver(p.stronger)?,
                messages: topology.resolve_ids(&p.messages.unwrap_or_default())?,
            });
        }
        Ok(out)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsDoc {
    lambdas: Option<BTreeMap<String, Vec<usize>>>,
    schedule: Option<ScheduleDoc>,
    grouping: Option<Vec<Vec<usize>>>,
    decode_orders: Option<BTreeMap<String, Vec<String>>>,
    m_star: Option<bool>,
    pair: Option<PairDoc>,
    sweep_lambdas: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleDoc {
    order: Vec<usize>,
    cuts: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairDoc {
    weaker: usize,
    stronger: usize,
    messages: Option<Vec<String>>,
}

/// Distinct elements of a set, for error messages.
pub(crate) fn describe(set: &BTreeSet<usize>, prefix: &str) -> String {
    let parts: Vec<String> = set.iter().map(|i| format!("{}{}", prefix, i + 1)).collect();
    parts.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn cic3() -> NetworkTopology {
        NetworkTopology::from_sets(
            &[vec!["M1"], vec!["M2"], vec!["M3"]],
            &[vec!["M1"], vec!["M2"], vec!["M3"]],
        )
        .unwrap()
    }

    #[test]
    fn ids_round_trip() {
        for t in TheoremId::ALL {
            assert_eq!(t.as_str().parse::<TheoremId>().unwrap(), t);
        }
        assert!("T10".parse::<TheoremId>().is_err());
        assert_eq!("tin".parse::<SchemeId>().unwrap(), SchemeId::Tin);
    }

    #[test]
    fn params_parse_to_zero_based() {
        let t = cic3();
        let p = AnalysisParams::from_json(
            &json!({
                "lambdas": {"3": [2, 1]},
                "schedule": {"order": [2, 1, 3], "cuts": [2, 3]},
                "grouping": [[1, 2], [3]],
                "decode_orders": {"1": ["M1"]},
                "m_star": true,
                "pair": {"weaker": 2, "stronger": 1, "messages": ["M3"]}
            }),
            &t,
        )
        .unwrap();
        assert_eq!(p.lambdas.lambdas[&2], vec![1, 0]);
        assert_eq!(p.lambdas.lambdas[&1], vec![0]);
        let s = p.schedule.unwrap();
        assert_eq!(s.order, vec![1, 0, 2]);
        assert_eq!(s.block_receiver(0), 0);
        assert_eq!(s.block_messages(&t, 0), IndexSet::from([0, 1]));
        assert_eq!(p.grouping.unwrap().blocks[1], IndexSet::from([2]));
        assert!(p.m_star);
        assert_eq!(p.pair.unwrap().messages, IndexSet::from([2]));
    }

    #[test]
    fn malformed_params_are_rejected() {
        let t = cic3();
        for bad in [
            json!({"lambdas": {"3": [1, 1]}}),
            json!({"schedule": {"order": [1, 2, 3], "cuts": [2, 2]}}),
            json!({"schedule": {"order": [1, 2, 3], "cuts": [2]}}),
            json!({"grouping": [[1], [3]]}),
            json!({"grouping": [[1, 2], [2, 3]]}),
            json!({"decode_orders": {"1": ["M9"]}}),
            json!({"unknown": 1}),
            json!({"pair": {"weaker": 4, "stronger": 1}}),
        ] {
            assert!(AnalysisParams::from_json(&bad, &t).is_err(), "{bad}");
        }
    }
}
