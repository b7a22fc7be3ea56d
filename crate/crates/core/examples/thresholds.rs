//! Optimal switching thresholds on a symmetric four-state source whose
//! missed alarms grow exponentially and false alarms logarithmically.

use aoce_core::solvers::{structured_policy_iteration, SpiOptions};
use aoce_core::{AgeFunction, SignificanceProfile, SourceModel, SwitchingPolicy, TruncatedMdp};

fn main() -> aoce_core::Result<()> {
    let source = SourceModel::symmetric(4, 0.1)?;
    let profile = SignificanceProfile::by_class(
        4,
        &[0],
        1.0,
        AgeFunction::exp_rate(0.3, 0.0),
        AgeFunction::log_base(10.0, 1.0, 1.0),
        AgeFunction::constant(1.0),
    )?;
    println!("lambda  missed  false  normal  cost");
    for lambda in 0..=7 {
        let mdp = TruncatedMdp::build(source.clone(), profile.clone(), 0.9, f64::from(lambda), 20)?;
        let r = structured_policy_iteration(&mdp, mdp.default_reference(), SpiOptions::default())?;
        let sw = SwitchingPolicy::extract(&r.policy, &mdp).expect("solver output is a switching policy");
        println!(
            "{lambda:>6}  {:>6}  {:>5}  {:>6}  {:.4}",
            sw.get(0, 1),
            sw.get(1, 0),
            sw.get(1, 2),
            r.gain
        );
    }
    Ok(())
}
