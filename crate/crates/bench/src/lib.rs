//! Models shared by the benchmarks.

use aoce_core::{AgeFunction, SignificanceProfile, SourceModel, TruncatedMdp};

/// Missed alarms grow as `e^{0.3δ}`, false alarms as `log10(δ) + 1`, other
/// errors cost 1; state 1 is the alarm.
pub fn prioritized_profile() -> SignificanceProfile {
    SignificanceProfile::by_class(
        4,
        &[0],
        1.0,
        AgeFunction::exp_rate(0.3, 0.0),
        AgeFunction::log_base(10.0, 1.0, 1.0),
        AgeFunction::constant(1.0),
    )
    .expect("valid profile")
}

/// Symmetric four-state source with switching probability 0.1.
pub fn symmetric(p_success: f64, lambda: f64, truncation: u32) -> TruncatedMdp {
    let source = SourceModel::symmetric(4, 0.1).expect("valid source");
    TruncatedMdp::build(source, prioritized_profile(), p_success, lambda, truncation).expect("valid model")
}

/// Asymmetric four-state source.
pub fn asymmetric(lambda: f64, truncation: u32) -> TruncatedMdp {
    let q = vec![
        vec![0.7, 0.1, 0.1, 0.1],
        vec![0.05, 0.7, 0.15, 0.1],
        vec![0.1, 0.1, 0.6, 0.2],
        vec![0.05, 0.1, 0.05, 0.8],
    ];
    let source = SourceModel::admissible(q).expect("valid source");
    TruncatedMdp::build(source, prioritized_profile(), 0.9, lambda, truncation).expect("valid model")
}
