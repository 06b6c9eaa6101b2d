//! Network files: parsing, validation and emission.
//!
//! Transmitter and receiver indices in files are 1-based.

use std::path::Path;

use capnet::model::{
    validate_topology, Channel, DiscreteChannel, GaussianChannel, Message, MessageLabel,
    NetworkTopology,
};
use capnet::Error;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub transmitters: usize,
    pub receivers: usize,
    pub messages: Vec<MessageDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelDoc>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MessageDoc {
    pub id: String,
    pub delta: Vec<usize>,
    pub nabla: Vec<usize>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelDoc {
    Discrete {
        input_alphabets: Vec<usize>,
        output_alphabets: Vec<usize>,
        /// Nested arrays, flattened row-major over inputs then outputs.
        transition: Value,
    },
    Gaussian {
        gains: Vec<Vec<f64>>,
        powers: Vec<f64>,
    },
}

/// A parsed network. The channel is optional for commands that only look
/// at the message topology.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub topology: NetworkTopology,
    pub channel: Option<Channel>,
}

impl Network {
    pub fn channel(&self) -> Result<&Channel, CliError> {
        self.channel.as_ref().ok_or_else(|| {
            CliError::Config("this command needs a `channel` in the network file".into())
        })
    }
}

fn flatten(v: &Value, out: &mut Vec<f64>) -> Result<(), CliError> {
    match v {
        Value::Array(items) => items.iter().try_for_each(|x| flatten(x, out)),
        Value::Number(n) => {
            out.push(
                n.as_f64()
                    .ok_or_else(|| CliError::Config(format!("bad number {}", n)))?,
            );
            Ok(())
        }
        other => Err(CliError::Config(format!(
            "transition entries must be numbers, found {}",
            other
        ))),
    }
}

fn one_based(v: &[usize], n: usize, what: &str, id: &str) -> Result<Vec<usize>, CliError> {
    v.iter()
        .map(|&x| {
            if x == 0 || x > n {
                Err(CliError::Config(format!(
                    "message `{}` names {} {} outside 1..{}",
                    id, what, x, n
                )))
            } else {
                Ok(x - 1)
            }
        })
        .collect()
}

impl NetworkDoc {
    pub fn build(&self) -> Result<Network, CliError> {
        let messages = self
            .messages
            .iter()
            .map(|m| {
                Ok(Message {
                    id: m.id.clone(),
                    label: MessageLabel::new(
                        one_based(&m.delta, self.transmitters, "transmitter", &m.id)?,
                        one_based(&m.nabla, self.receivers, "receiver", &m.id)?,
                    ),
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let topology = NetworkTopology::new(self.transmitters, self.receivers, messages)?;
        let channel = match &self.channel {
            None => None,
            Some(ChannelDoc::Gaussian { gains, powers }) => Some(Channel::Gaussian(
                GaussianChannel::new(gains.clone(), powers.clone())?,
            )),
            Some(ChannelDoc::Discrete {
                input_alphabets,
                output_alphabets,
                transition,
            }) => {
                let mut flat = Vec::new();
                flatten(transition, &mut flat)?;
                Some(Channel::Discrete(DiscreteChannel::new(
                    input_alphabets.clone(),
                    output_alphabets.clone(),
                    flat,
                )?))
            }
        };
        Ok(Network { topology, channel })
    }

    pub fn from_network(net: &Network) -> NetworkDoc {
        let t = &net.topology;
        let messages = t
            .messages()
            .iter()
            .map(|m| MessageDoc {
                id: m.id.clone(),
                delta: m.label.delta.iter().map(|i| i + 1).collect(),
                nabla: m.label.nabla.iter().map(|j| j + 1).collect(),
            })
            .collect();
        let channel = net.channel.as_ref().map(|c| match c {
            Channel::Gaussian(g) => ChannelDoc::Gaussian {
                gains: g.gains().to_vec(),
                powers: g.powers().to_vec(),
            },
            Channel::Discrete(d) => {
                let ny = d.output_count();
                let rows: Vec<Value> = d
                    .transition()
                    .chunks(ny)
                    .map(|r| Value::from(r.to_vec()))
                    .collect();
                ChannelDoc::Discrete {
                    input_alphabets: d.input_alphabets().to_vec(),
                    output_alphabets: d.output_alphabets().to_vec(),
                    transition: Value::Array(rows),
                }
            }
        });
        NetworkDoc {
            transmitters: t.k1(),
            receivers: t.k2(),
            messages,
            channel,
        }
    }
}

/// Parses a network document without checking topology invariants.
pub fn parse_network_str(text: &str) -> Result<Network, CliError> {
    let doc: NetworkDoc =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("network file: {}", e)))?;
    doc.build()
}

/// Reads and validates a network file. Violations abort with every
/// diagnostic listed.
pub fn parse_config(path: &Path) -> Result<Network, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {}", path.display(), e)))?;
    let net = parse_network_str(&text)?;
    let violations = validate_topology(&net.topology, net.channel.as_ref());
    if !violations.is_empty() {
        return Err(
            Error::InvalidTopology(violations.iter().map(|v| v.to_string()).collect()).into(),
        );
    }
    Ok(net)
}

pub fn emit_network(net: &Network) -> Value {
    serde_json::to_value(NetworkDoc::from_network(net)).expect("network documents serialize")
}
