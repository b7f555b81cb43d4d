//! Ensemble length histogram of the placed inclusions with its power-law
//! fit and the aspect-ratio bucket volumes of the uncovered set.

use martensim::fragment::{run, Algorithm, DegenerateRule, SimConfig, StopRule};
use martensim::geometry::BucketParams;
use martensim::stats::{bucket_volumes, fit_power_law, inclusion_lengths, length_histogram, BinSpec, FitMode};
use rayon::prelude::*;

fn main() -> martensim::Result<()> {
    for algorithm in [Algorithm::A, Algorithm::B] {
        let cfg = SimConfig {
            algorithm,
            delta: 0.05,
            degenerate_rule: DegenerateRule::Change1,
            stop: StopRule::MinLength(0.01),
            ..SimConfig::default()
        };
        let runs: Vec<_> = (0..40u64).into_par_iter().map(|seed| run(&SimConfig { seed, ..cfg.clone() })).collect::<martensim::Result<_>>()?;
        let h = length_histogram(runs.iter().flat_map(inclusion_lengths), &BinSpec::default())?;
        let raw = fit_power_law(&h, 1e-2, 1e-1, FitMode::RawCount)?;
        let dens = fit_power_law(&h, 1e-2, 1e-1, FitMode::CountDensity)?;
        let covered = runs.iter().map(|r| 1.0 - r.state.volume).sum::<f64>() / runs.len() as f64;
        println!(
            "{algorithm:?}: {} lengths, count exponent {:.3} (R^2 {:.4}), density exponent {:.3}, covered {:.4}",
            h.total, raw.exponent, raw.r_squared, dens.exponent, covered
        );
        let bp = BucketParams::snapped(1.1, cfg.delta)?;
        let rects: Vec<_> = runs.iter().flat_map(|r| r.state.components().map(|c| c.rect)).collect();
        let b = bucket_volumes(rects.iter(), &bp);
        let top: Vec<_> = b.volumes.iter().rev().take(5).map(|(j, v)| format!("{j}: {v:.2e}")).collect();
        println!("  uncovered volume summed over runs {:.3e} in {} classes; least elongated: {}", b.total, b.volumes.len(), top.join(", "));
    }
    Ok(())
}
