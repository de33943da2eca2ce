//! The four synthetic presets: where the joint errors sit decides whether EC
//! and MA move together or apart.

use error_align::divergence::{cles_from_runs, LogBase, SmoothingPrior};
use error_align::domain::build_joint_view;
use error_align::kappa::{error_consistency, misclassification_agreement};
use error_align::synth::{classify, sample_scenario, scenario_presets};

fn main() -> error_align::Result<()> {
    println!(
        "{:<24} {:>8} {:>8} {:>8} {:>8}",
        "preset", "EC", "MA", "CLES", "joint err"
    );
    for scenario in scenario_presets() {
        let s = sample_scenario(&scenario)?;
        let view = build_joint_view(&s.truth, &s.run_a, &s.run_b)?;
        let prior = SmoothingPrior::uniform(3, 0.5)?;
        let fmt = |v: Option<f64>| v.map_or("undef".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:<24} {:>8} {:>8} {:>8} {:>8}",
            scenario.name,
            fmt(error_consistency(&view).value),
            fmt(misclassification_agreement(&view).value),
            fmt(cles_from_runs(&s.truth, &s.run_a, &s.run_b, &prior, LogBase::Two)?.value),
            view.jointly_incorrect()
        );
    }

    // the classifiers themselves are plain functions of the plane
    let s = &scenario_presets()[2];
    for p in [[-5.0, 0.0], [5.0, 2.0], [5.0, -2.0], [5.0, 10.0]] {
        println!(
            "{p:?}: truth {} A {} B {}",
            s.labels[classify(&s.truth, p)],
            s.labels[classify(&s.system_a, p)],
            s.labels[classify(&s.system_b, p)]
        );
    }
    Ok(())
}
