//! Gaussian evaluators: the capacity function `psi`, a log-det backend for
//! conditional mutual information under independent full-power Gaussian
//! inputs, and closed forms for two canonical networks.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::info::{Atom, AtomEval, Var};
use crate::model::{GaussianChannel, NetworkTopology, GAIN_ZERO_THRESHOLD};

/// Absolute tolerance on gain-ratio equalities.
pub const GAIN_TOL: f64 = 1e-9;

/// `psi(x) = log2(1 + x) / 2`.
pub fn psi(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::NegativeInput(x));
    }
    Ok(0.5 * x.ln_1p() / std::f64::consts::LN_2)
}

/// Gaussian channel with independent inputs at full power and unit noise.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianEvalContext {
    pub channel: GaussianChannel,
}

impl GaussianEvalContext {
    pub fn new(channel: GaussianChannel) -> Self {
        GaussianEvalContext { channel }
    }

    /// Log-determinant (natural log) of the covariance of `Y_B` with only the
    /// inputs in `active` contributing.
    fn log_det(&self, b: &[usize], active: &BTreeSet<usize>) -> Result<f64> {
        let g = &self.channel;
        if b.len() == 1 {
            let s: f64 = active
                .iter()
                .map(|&i| g.gain(b[0], i).powi(2) * g.powers()[i])
                .sum();
            return Ok(s.ln_1p());
        }
        let n = b.len();
        let mut k = DMatrix::<f64>::identity(n, n);
        for &i in active {
            let p = g.powers()[i];
            for r in 0..n {
                for c in 0..n {
                    k[(r, c)] += p * g.gain(b[r], i) * g.gain(b[c], i);
                }
            }
        }
        let chol = k
            .cholesky()
            .ok_or_else(|| Error::SingularCovariance(format!("outputs {:?}", b)))?;
        Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }
}

/// `I(X_A; Y_B | X_C)` in bits. Inputs in `C` are removed; inputs outside
/// `A ∪ C` act as Gaussian noise.
pub fn gaussian_cmi(
    ctx: &GaussianEvalContext,
    a: &BTreeSet<usize>,
    b: &BTreeSet<usize>,
    c: &BTreeSet<usize>,
) -> Result<f64> {
    let k1 = ctx.channel.k1();
    let k2 = ctx.channel.k2();
    if let Some(i) = a.iter().chain(c).find(|&&i| i >= k1) {
        return Err(Error::UnknownVariable(format!("X{}", i + 1)));
    }
    if let Some(j) = b.iter().find(|&&j| j >= k2) {
        return Err(Error::UnknownVariable(format!("Y{}", j + 1)));
    }
    if let Some(i) = a.intersection(c).next() {
        return Err(Error::Overlap(format!(
            "X{} is both measured and conditioned",
            i + 1
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Ok(0.0);
    }
    let bs: Vec<usize> = b.iter().copied().collect();
    let free: BTreeSet<usize> = (0..k1).filter(|i| !c.contains(i)).collect();
    let noise: BTreeSet<usize> = free.difference(a).copied().collect();
    let v = (ctx.log_det(&bs, &free)? - ctx.log_det(&bs, &noise)?) / (2.0 * std::f64::consts::LN_2);
    Ok(v.max(0.0))
}

/// Atom evaluator for Gaussian networks. Messages map to the single
/// transmitter that knows them; the time-sharing variable is degenerate.
#[derive(Clone, Debug)]
pub struct GaussianBackend {
    pub ctx: GaussianEvalContext,
    message_inputs: Vec<usize>,
}

impl GaussianBackend {
    /// Requires each message to be known at exactly one transmitter and each
    /// transmitter to know at most one message.
    pub fn new(topology: &NetworkTopology, channel: &GaussianChannel) -> Result<Self> {
        if channel.k1() != topology.k1() || channel.k2() != topology.k2() {
            return Err(Error::Dimension(
                "channel does not match the topology".into(),
            ));
        }
        let mut message_inputs = Vec::new();
        for msg in topology.messages() {
            if msg.label.delta.len() != 1 {
                return Err(Error::BadParams(format!(
                    "Gaussian evaluation needs message `{}` to be known at exactly one transmitter",
                    msg.id
                )));
            }
            message_inputs.push(*msg.label.delta.iter().next().unwrap());
        }
        for i in 0..topology.k1() {
            if topology.knowledge(i).len() > 1 {
                return Err(Error::BadParams(format!(
                    "Gaussian evaluation needs X{} to carry at most one message",
                    i + 1
                )));
            }
        }
        Ok(GaussianBackend {
            ctx: GaussianEvalContext::new(channel.clone()),
            message_inputs,
        })
    }

    /// Backend over inputs and outputs only.
    pub fn inputs_only(channel: &GaussianChannel) -> Self {
        GaussianBackend {
            ctx: GaussianEvalContext::new(channel.clone()),
            message_inputs: Vec::new(),
        }
    }

    fn input_set(&self, vars: &BTreeSet<Var>) -> Result<BTreeSet<usize>> {
        let mut out = BTreeSet::new();
        for v in vars {
            match *v {
                Var::Q => {}
                Var::Input(i) => {
                    out.insert(i);
                }
                Var::Msg(m) => {
                    out.insert(
                        *self
                            .message_inputs
                            .get(m)
                            .ok_or_else(|| Error::UnknownVariable(v.to_string()))?,
                    );
                }
                _ => return Err(Error::UnknownVariable(v.to_string())),
            }
        }
        Ok(out)
    }
}

impl AtomEval for GaussianBackend {
    fn atom(&self, atom: &Atom) -> Result<f64> {
        let c = self.input_set(&atom.c)?;
        let a: BTreeSet<usize> = self.input_set(&atom.a)?.difference(&c).copied().collect();
        let mut b = BTreeSet::new();
        for v in &atom.b {
            match *v {
                Var::Output(j) => {
                    b.insert(j);
                }
                _ => return Err(Error::UnknownVariable(v.to_string())),
            }
        }
        gaussian_cmi(&self.ctx, &a, &b, &c)
    }
}

/// Common ratio `α` with `weaker_i = α·stronger_i` for every listed input,
/// if one exists. Inputs where both gains vanish are skipped; a vanishing
/// stronger gain against a nonzero weaker gain admits no ratio.
pub fn common_gain_ratio(weaker: &[f64], stronger: &[f64], tol: f64) -> Option<f64> {
    let mut alpha: Option<f64> = None;
    for (&w, &s) in weaker.iter().zip(stronger) {
        let w_zero = w.abs() <= GAIN_ZERO_THRESHOLD;
        if s.abs() <= GAIN_ZERO_THRESHOLD {
            if w_zero {
                continue;
            }
            return None;
        }
        let r = w / s;
        match alpha {
            None => alpha = Some(r),
            Some(a) if (a - r).abs() <= tol => {}
            Some(_) => return None,
        }
    }
    Some(alpha.unwrap_or(0.0))
}

/// Gain-ratio certificate that makes the weaker output a degraded version of
/// the stronger one: a common ratio with `|α| ≤ 1`.
pub fn degrading_ratio(weaker: &[f64], stronger: &[f64]) -> Option<f64> {
    common_gain_ratio(weaker, stronger, GAIN_TOL).filter(|a| a.abs() <= 1.0 + GAIN_TOL)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Main4Conditions {
    /// Common ratio of the second receiver's gains to the first receiver's
    /// on the first group.
    pub alpha: Option<f64>,
    /// Same on the second group.
    pub beta: Option<f64>,
    /// Both ratios exist with magnitude at most one.
    pub gains_hold: bool,
    /// Interference from each second-group input is weaker at the second
    /// receiver than at the first receiver given the other second-group input.
    pub forward_pair: bool,
    /// The reversed pair.
    pub reversed_pair: bool,
    /// `forward`, `reversed` or `none`.
    pub certificate: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Main4Report {
    pub conditions: Main4Conditions,
    pub branches: [f64; 2],
    pub value: f64,
    pub active_branch: usize,
    /// The value, when the gain conditions certify it as the sum-rate capacity.
    pub capacity: Option<f64>,
}

/// Closed form for the two-receiver network where receiver 1 is served by
/// inputs 1-2 and receiver 2 by inputs 3-4, all inputs reaching both
/// receivers.
pub fn closed_form_main4(channel: &GaussianChannel) -> Result<Main4Report> {
    if channel.k1() != 4 || channel.k2() != 2 {
        return Err(Error::Shape(format!(
            "expected 2 receivers and 4 transmitters, got {} and {}",
            channel.k2(),
            channel.k1()
        )));
    }
    let a = &channel.gains()[0];
    let b = &channel.gains()[1];
    let p = channel.powers();
    let alpha = common_gain_ratio(&b[0..2], &a[0..2], GAIN_TOL);
    let beta = common_gain_ratio(&b[2..4], &a[2..4], GAIN_TOL);
    let gains_hold = matches!((alpha, beta), (Some(x), Some(y)) if x.abs() <= 1.0 + GAIN_TOL && y.abs() <= 1.0 + GAIN_TOL);

    let ctx = GaussianEvalContext::new(channel.clone());
    let s = |v: &[usize]| v.iter().copied().collect::<BTreeSet<usize>>();
    let cmi = |x: &[usize], y: usize, c: &[usize]| gaussian_cmi(&ctx, &s(x), &s(&[y]), &s(c));
    let forward_pair = cmi(&[2], 1, &[])? <= cmi(&[2], 0, &[3])? + GAIN_TOL
        && cmi(&[3], 1, &[])? <= cmi(&[3], 0, &[2])? + GAIN_TOL;
    let reversed_pair = cmi(&[3], 1, &[])? + GAIN_TOL >= cmi(&[3], 0, &[2])?
        && cmi(&[2], 1, &[3])? + GAIN_TOL >= cmi(&[2], 0, &[])?;

    let sq = |g: f64, q: f64| g * g * q;
    let own = sq(a[0], p[0]) + sq(a[1], p[1]);
    let second = (sq(b[2], p[2]) + sq(b[3], p[3])) / (sq(b[0], p[0]) + sq(b[1], p[1]) + 1.0);
    let b1 = psi(own)? + psi(second)?;
    let b2 = psi(own + sq(a[2], p[2]) + sq(a[3], p[3]))?;
    let (value, active_branch) = if b1 <= b2 { (b1, 0) } else { (b2, 1) };
    let certificate = if forward_pair {
        "forward"
    } else if reversed_pair {
        "reversed"
    } else {
        "none"
    };
    Ok(Main4Report {
        conditions: Main4Conditions {
            alpha,
            beta,
            gains_hold,
            forward_pair,
            reversed_pair,
            certificate,
        },
        branches: [b1, b2],
        value,
        active_branch,
        capacity: gains_hold.then_some(value),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cic3Conditions {
    /// `|a12| ≥ 1`, `|a31| ≤ 1`, `|a23| ≥ 1`, `a31 = a32/a12`, `a12 = a13/a23`.
    pub gains_hold: bool,
    /// `P1 + 1 ≥ a12²(a21² P1 + 1)`.
    pub power_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cic3Report {
    pub conditions: Cic3Conditions,
    pub branches: [f64; 2],
    pub value: f64,
    pub active_branch: usize,
    /// Sum-rate outer bound, reported when the gain conditions hold.
    pub outer_bound: Option<f64>,
    /// Sum-rate capacity, reported when all conditions hold.
    pub capacity: Option<f64>,
}

/// Closed form for the three-user interference channel with unit direct
/// gains.
pub fn closed_form_cic3(channel: &GaussianChannel) -> Result<Cic3Report> {
    if channel.k1() != 3 || channel.k2() != 3 {
        return Err(Error::Shape(format!(
            "expected a 3x3 channel, got {}x{}",
            channel.k2(),
            channel.k1()
        )));
    }
    let g = |j: usize, i: usize| channel.gain(j - 1, i - 1);
    if (1..=3).any(|k| (g(k, k) - 1.0).abs() > GAIN_TOL) {
        return Err(Error::Shape("direct gains must be 1".into()));
    }
    let p = channel.powers();
    let (a12, a13, a21, a23, a31, a32) = (g(1, 2), g(1, 3), g(2, 1), g(2, 3), g(3, 1), g(3, 2));
    let gains_hold = a12.abs() >= 1.0 - GAIN_TOL
        && a31.abs() <= 1.0 + GAIN_TOL
        && a23.abs() >= 1.0 - GAIN_TOL
        && (a31 * a12 - a32).abs() <= GAIN_TOL * a12.abs().max(1.0)
        && (a12 * a23 - a13).abs() <= GAIN_TOL * a23.abs().max(1.0);
    let power_holds = p[0] + 1.0 >= a12 * a12 * (a21 * a21 * p[0] + 1.0) - GAIN_TOL;
    let first =
        psi(p[0] + a12 * a12 * p[1])? + psi(p[2] / (a31 * a31 * p[0] + a32 * a32 * p[1] + 1.0))?;
    let second = psi(p[0] + a12 * a12 * p[1] + a13 * a13 * p[2])?;
    let (value, active_branch) = if first <= second {
        (first, 0)
    } else {
        (second, 1)
    };
    Ok(Cic3Report {
        conditions: Cic3Conditions {
            gains_hold,
            power_holds,
        },
        branches: [first, second],
        value,
        active_branch,
        outer_bound: gains_hold.then_some(value),
        capacity: (gains_hold && power_holds).then_some(value),
    })
}
