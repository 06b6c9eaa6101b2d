use std::collections::BTreeSet;

use capnet::fixtures;
use capnet::gaussian::{gaussian_cmi, psi, GaussianEvalContext};
use capnet::info::{induced_joint, msgs, outputs, EncoderSpec, Evaluator};
use capnet::model::{connectivity, Channel, GaussianChannel, IndexSet};
use capnet::ordering::{check_query_discrete, FalsifierConfig, Status, GAP_TOL};
use capnet::plan::reduce;
use capnet::rates::{
    build_achievable_expression, build_outer_expression, eval_expression, eval_value,
};
use capnet::theorem::{AnalysisParams, SchemeId, TheoremId};
use proptest::prelude::*;

fn binary_spec(p: [f64; 2], enc: [[usize; 2]; 2]) -> EncoderSpec {
    EncoderSpec {
        q_pmf: vec![1.0],
        message_pmfs: p.iter().map(|&a| vec![a, 1.0 - a]).collect(),
        encoders: enc.iter().map(|e| e.to_vec()).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi_chain(a in 0.0f64..100.0, b in 0.0f64..100.0) {
        let r = psi(a).unwrap() + psi(b / (1.0 + a)).unwrap() - psi(a + b).unwrap();
        prop_assert!(r.abs() <= 1e-12);
    }

    #[test]
    fn gaussian_cmi_grows_with_power(
        gains in proptest::collection::vec(-2.0f64..2.0, 3),
        powers in proptest::collection::vec(0.0f64..5.0, 3),
        bump in 0.0f64..3.0,
        which in 0usize..3,
    ) {
        let ch = GaussianChannel::new(vec![gains], powers.clone()).unwrap();
        let mut more = powers;
        more[which] += bump;
        let ch2 = ch.with_powers(more).unwrap();
        let a: BTreeSet<usize> = [0].into();
        let b: BTreeSet<usize> = [0].into();
        let c: BTreeSet<usize> = [1, 2].into();
        let lo = gaussian_cmi(&GaussianEvalContext::new(ch), &a, &b, &c).unwrap();
        let hi = gaussian_cmi(&GaussianEvalContext::new(ch2), &a, &b, &c).unwrap();
        prop_assert!(hi + 1e-12 >= lo);
    }

    /// On degraded cascades the ordering is certified, the achievable rate
    /// never exceeds the bound, and every decoding step binds at the weaker
    /// receiver.
    #[test]
    fn degraded_cascades(
        p1 in 0.0f64..0.45,
        p2 in 0.01f64..0.45,
        q in proptest::array::uniform2(0.0f64..1.0),
        e1 in proptest::array::uniform2(0usize..2),
        e2 in proptest::array::uniform2(0usize..2),
    ) {
        let (t, ch) = fixtures::degraded_cascade(p1, p2);
        let Channel::Discrete(c) = &ch else { unreachable!() };
        let conn = connectivity(&t, &ch).unwrap();
        let r = reduce(&t);
        let params = AnalysisParams::defaults(2);
        let qs = capnet::ordering::build_condition_set(&t, &conn, &r, TheoremId::T3, &params).unwrap();
        let cfg = FalsifierConfig { budget: 512, ..FalsifierConfig::default() };
        let v = check_query_discrete(c, &qs[0], &cfg).unwrap();
        prop_assert_eq!(v.status, Status::Holds);
        prop_assert!(v.best_gap.unwrap_or(0.0) <= GAP_TOL);

        let j = induced_joint(&t, c, &binary_spec(q, [e1, e2])).unwrap();
        let ev = Evaluator::new(&j);
        let ach = build_achievable_expression(&t, &conn, &r, SchemeId::Successive, &params).unwrap();
        let outer = build_outer_expression(&t, &r, TheoremId::T2A, &params).unwrap();
        let a = eval_expression(&ach.root, &ev).unwrap();
        prop_assert!(a.value <= eval_value(&outer.root, &ev).unwrap() + 1e-9);
        for m in &a.mins {
            // Children run from the weakest decoder to the strongest.
            prop_assert!(m.values[0] <= m.values.iter().cloned().fold(f64::INFINITY, f64::min) + 1e-12);
        }
    }

    /// Messages known only at transmitters a receiver cannot hear carry no
    /// information to it.
    #[test]
    fn unconnected_messages_are_silent(
        q in proptest::array::uniform2(0.0f64..1.0),
        e1 in proptest::array::uniform2(0usize..2),
        e2 in proptest::array::uniform2(0usize..2),
        p in 0.0f64..0.5,
    ) {
        let t = fixtures::cic_topology(2);
        let c = capnet::model::DiscreteChannel::from_fn(vec![2, 2], vec![2, 2], |x, y| {
            fixtures::bsc(p, x[0], y[0]) * fixtures::bsc(p, x[0] ^ x[1], y[1])
        })
        .unwrap();
        let ch = Channel::Discrete(c.clone());
        let conn = connectivity(&t, &ch).unwrap();
        let j = induced_joint(&t, &c, &binary_spec(q, [e1, e2])).unwrap();
        let ev = Evaluator::new(&j);
        for y in 0..2 {
            let silent = conn.unconnected_messages(y);
            let v = ev.cmi(&msgs(silent), &outputs(&IndexSet::from([y])), &Default::default()).unwrap();
            prop_assert!(v.abs() <= 1e-12);
        }
    }
}
