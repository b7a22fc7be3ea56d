#![allow(dead_code)]

use aoce_core::{AgeFunction, SignificanceProfile, SourceModel, TruncatedMdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ASYMMETRIC_Q: [[f64; 4]; 4] = [
    [0.7, 0.1, 0.1, 0.1],
    [0.05, 0.7, 0.15, 0.1],
    [0.1, 0.1, 0.6, 0.2],
    [0.05, 0.1, 0.05, 0.8],
];

/// Missed alarms `e^{0.3δ}`, false alarms `log10(δ) + 1`, other errors 1.
pub fn prioritized_profile() -> SignificanceProfile {
    SignificanceProfile::by_class(
        4,
        &[0],
        1.0,
        AgeFunction::exp_rate(0.3, 0.0),
        AgeFunction::log_base(10.0, 1.0, 1.0),
        AgeFunction::constant(1.0),
    )
    .unwrap()
}

pub fn symmetric_source() -> SourceModel {
    SourceModel::symmetric(4, 0.1).unwrap()
}

pub fn asymmetric_source() -> SourceModel {
    SourceModel::admissible(ASYMMETRIC_Q.iter().map(|r| r.to_vec()).collect()).unwrap()
}

pub fn behavioral(p_success: f64, lambda: f64, truncation: u32) -> TruncatedMdp {
    TruncatedMdp::build(symmetric_source(), prioritized_profile(), p_success, lambda, truncation).unwrap()
}

pub fn comparison(lambda: f64) -> TruncatedMdp {
    TruncatedMdp::build(asymmetric_source(), prioritized_profile(), 0.9, lambda, 20).unwrap()
}

/// Random irreducible source with at least one self-transition; about a
/// third of the other states get no self-transition.
pub fn random_source(rng: &mut ChaCha8Rng, m: usize) -> SourceModel {
    loop {
        let q: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut row: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
                if i > 0 && rng.random_bool(0.3) {
                    row[i] = 0.0;
                }
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
                row
            })
            .collect();
        if let Ok(src) = SourceModel::admissible(q) {
            return src;
        }
    }
}

/// Age function drawn from every kind, scaled so the existence condition
/// holds for `stay = max Q_ii · p_f`.
pub fn random_age_function(rng: &mut ChaCha8Rng, stay: f64) -> AgeFunction {
    match rng.random_range(0..6) {
        0 => AgeFunction::constant(rng.random_range(0.1..2.0)),
        1 => AgeFunction::linear(rng.random_range(0.0..1.5), rng.random_range(0.0..1.0)),
        2 => AgeFunction::logarithmic(rng.random_range(1.0..3.0), rng.random_range(0.0..1.0)),
        3 => {
            let limit = if stay > 0.0 { (1.0 / stay).ln() } else { 1.0 };
            AgeFunction::exp_rate(rng.random_range(0.0..limit.min(0.6) * 0.9), 0.0)
        }
        4 => AgeFunction::clipped(AgeFunction::linear(1.0, 0.0), rng.random_range(1..6)),
        _ => {
            let first = rng.random_range(0.1..1.0);
            let second = first + rng.random_range(0.0..1.0);
            // Final ratio at most 1.1 keeps the extrapolated tail summable.
            AgeFunction::table(vec![first, second, second * rng.random_range(1.0..1.1)])
        }
    }
}

pub struct Instance {
    pub seed: u64,
    pub mdp: TruncatedMdp,
}

/// Seeded random instance with `m` source states.
pub fn random_instance(seed: u64, m: usize, truncation: u32) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source = random_source(&mut rng, m);
    let p_success = rng.random_range(0.3..1.0);
    let stay = (0..m).map(|i| source.prob(i, i)).fold(0.0, f64::max) * (1.0 - p_success);
    let weights = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| if i == j { 0.0 } else { rng.random_range(0.5..2.0) })
                .collect()
        })
        .collect();
    let ages = (0..m)
        .map(|_| (0..m).map(|_| random_age_function(&mut rng, stay)).collect())
        .collect();
    let profile = SignificanceProfile::new(weights, ages).unwrap();
    let lambda = rng.random_range(0.0..4.0);
    let mdp = TruncatedMdp::build(source, profile, p_success, lambda, truncation).unwrap();
    Instance { seed, mdp }
}
