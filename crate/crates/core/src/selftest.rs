//! Randomized identity checks bundled with the library so that a build can
//! be sanity-checked from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::gaussian::psi;
use crate::info::{ck_identity_residual, JointPmf, Var};
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Telescoping-sum identity on random joints of two sequences of length
/// 2 to 4 over alphabets of size 2 or 3, half of them with a side variable.
pub fn ck_identity_suite(cases: usize, seed: u64) -> Result<SuiteReport> {
    let tolerance = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..cases {
        let n = 2 + k % 3;
        let a: Vec<Var> = (0..n).map(Var::Aux).collect();
        let b: Vec<Var> = (n..2 * n).map(Var::Aux).collect();
        let side: Vec<Var> = if k % 2 == 1 {
            vec![Var::Aux(2 * n)]
        } else {
            Vec::new()
        };
        let roster: Vec<(Var, usize)> = a
            .iter()
            .chain(&b)
            .chain(&side)
            .map(|&v| (v, rng.gen_range(2..=3)))
            .collect();
        let cells: usize = roster.iter().map(|r| r.1).product();
        let raw: Vec<f64> = (0..cells).map(|_| rng.gen::<f64>().powi(3)).collect();
        let total: f64 = raw.iter().sum();
        let joint = JointPmf::new(roster, raw.iter().map(|p| p / total).collect())?;
        worst = worst.max(ck_identity_residual(&joint, &a, &b, &side)?);
    }
    Ok(SuiteReport {
        name: "telescoping identity",
        cases,
        max_residual: worst,
        tolerance,
        pass: worst <= tolerance,
    })
}

/// `psi(a) + psi(b/(1+a)) = psi(a+b)` on random pairs in `[0, 100]²`.
pub fn psi_chain_suite(cases: usize, seed: u64) -> Result<SuiteReport> {
    let tolerance = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let a = rng.gen_range(0.0..=100.0);
        let b = rng.gen_range(0.0..=100.0);
        worst = worst.max((psi(a)? + psi(b / (1.0 + a))? - psi(a + b)?).abs());
    }
    Ok(SuiteReport {
        name: "psi chain identity",
        cases,
        max_residual: worst,
        tolerance,
        pass: worst <= tolerance,
    })
}
