//! Small reference networks used by the tests, the acceptance suite and the
//! command-line self test.

use crate::error::Result;
use crate::model::{Channel, DiscreteChannel, GaussianChannel, NetworkTopology};

pub fn bsc(p: f64, x: usize, y: usize) -> f64 {
    if x == y {
        1.0 - p
    } else {
        p
    }
}

/// `k` transmitter-receiver pairs with one private message each.
pub fn cic_topology(k: usize) -> NetworkTopology {
    let ids: Vec<String> = (1..=k).map(|j| format!("M{}", j)).collect();
    let sets: Vec<Vec<&str>> = ids.iter().map(|s| vec![s.as_str()]).collect();
    NetworkTopology::from_sets(&sets, &sets).expect("valid interference channel")
}

/// Binary two-user network with `Y1 = BSC(p1)(X1 xor X2)` and
/// `Y2 = BSC(p2)(Y1)`, so the second output is physically degraded.
pub fn degraded_cascade(p1: f64, p2: f64) -> (NetworkTopology, Channel) {
    let ch = DiscreteChannel::from_fn(vec![2, 2], vec![2, 2], |x, y| {
        bsc(p1, x[0] ^ x[1], y[0]) * bsc(p2, y[0], y[1])
    })
    .expect("valid cascade");
    (cic_topology(2), Channel::Discrete(ch))
}

/// The cascade used throughout: crossovers 0.1 and 0.15.
pub fn standard_cascade() -> (NetworkTopology, Channel) {
    degraded_cascade(0.1, 0.15)
}

/// Four transmitters in two pairs, each pair serving one receiver with a
/// private message per transmitter. Transmitter order is
/// `X11, X12, X21, X22`.
pub fn main4_topology() -> NetworkTopology {
    NetworkTopology::from_sets(
        &[vec!["M1"], vec!["M2"], vec!["M3"], vec!["M4"]],
        &[vec!["M1", "M2"], vec!["M3", "M4"]],
    )
    .expect("valid four-transmitter network")
}

/// Gaussian version with gains `a` to the first receiver and `b` to the
/// second, both in transmitter order.
pub fn main4_gaussian(
    a: [f64; 4],
    b: [f64; 4],
    powers: [f64; 4],
) -> Result<(NetworkTopology, Channel)> {
    let g = GaussianChannel::new(vec![a.to_vec(), b.to_vec()], powers.to_vec())?;
    Ok((main4_topology(), Channel::Gaussian(g)))
}

/// Three receivers with one, two and three transmitters. Transmitter order
/// is `X11, X21, X22, X31, X32, X33` and messages `M1..M6` follow it.
pub fn three_receiver_topology() -> NetworkTopology {
    NetworkTopology::from_sets(
        &[
            vec!["M1"],
            vec!["M2"],
            vec!["M3"],
            vec!["M4"],
            vec!["M5"],
            vec!["M6"],
        ],
        &[vec!["M1"], vec!["M2", "M3"], vec!["M4", "M5", "M6"]],
    )
    .expect("valid three-receiver network")
}

/// Gaussian instance of the three-receiver network where the first output
/// does not see `X32, X33` and the second does not see `X33`.
pub fn three_receiver_gaussian() -> (NetworkTopology, Channel) {
    let g = GaussianChannel::new(
        vec![
            vec![1.0, 0.8, 0.7, 0.6, 0.0, 0.0],
            vec![0.5, 1.0, 1.0, 0.9, 0.6, 0.0],
            vec![0.4, 0.5, 0.3, 1.0, 1.0, 1.0],
        ],
        vec![1.0; 6],
    )
    .expect("valid gains");
    (three_receiver_topology(), Channel::Gaussian(g))
}

/// One receiver, two transmitters with a private message each and a
/// common message known to both.
pub fn mac_with_common() -> NetworkTopology {
    NetworkTopology::from_sets(&[vec!["A", "C"], vec!["B", "C"]], &[vec!["A", "B", "C"]])
        .expect("valid multiple-access channel")
}

/// Two-receiver network where both transmitters of the second receiver
/// share a common message next to a private one.
pub fn cooperative_main() -> NetworkTopology {
    NetworkTopology::from_sets(
        &[vec!["M1"], vec!["C", "M3"], vec!["C"]],
        &[vec!["M1"], vec!["C", "M3"]],
    )
    .expect("valid cooperative network")
}

/// Three-user Gaussian interference channel with unit direct gains.
/// `cross[j][i]` is the gain from transmitter `i` to receiver `j`; its
/// diagonal is ignored.
pub fn cic3_gaussian(cross: [[f64; 3]; 3], powers: [f64; 3]) -> Result<(NetworkTopology, Channel)> {
    let gains = (0..3)
        .map(|j| {
            (0..3)
                .map(|i| if i == j { 1.0 } else { cross[j][i] })
                .collect()
        })
        .collect();
    Ok((
        cic_topology(3),
        Channel::Gaussian(GaussianChannel::new(gains, powers.to_vec())?),
    ))
}
