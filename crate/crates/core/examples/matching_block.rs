//! Simulated observer on 1000-trial blocks under different focus conditions.

use visionsim::optics::{AutofocalConfig, FocusAlgorithm};
use visionsim::task::{run_block, BlockConfig, FocusCondition};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = BlockConfig {
        n_trials: 1000,
        seed: 2024,
        ..BlockConfig::default()
    };
    let conditions = [
        (
            "autofocal instant",
            FocusCondition::Autofocal(AutofocalConfig::with_algorithm(FocusAlgorithm::Instant)),
        ),
        (
            "autofocal slew",
            FocusCondition::Autofocal(AutofocalConfig::with_algorithm(FocusAlgorithm::SlewLimited)),
        ),
        (
            "autofocal low-pass",
            FocusCondition::Autofocal(AutofocalConfig::with_algorithm(FocusAlgorithm::LowPass)),
        ),
        ("fixed at 1 m", FocusCondition::Fixed { power: 1.0 }),
        ("fixed at infinity", FocusCondition::Fixed { power: 0.0 }),
    ];
    for (label, focus) in conditions {
        let result = run_block(&BlockConfig {
            focus,
            ..base.clone()
        })?;
        let per_screen: Vec<String> = result
            .screens
            .iter()
            .map(|s| format!("{} {:.2}", s.name, s.proportion_correct))
            .collect();
        println!(
            "{label:>18}: {:.3} correct  [{}]",
            result.proportion_correct,
            per_screen.join(", ")
        );
    }
    Ok(())
}
