//! Mean uncovered volume of Models A, B and the modified Model A against
//! their contraction bounds.

use martensim::fragment::{contraction_a, contraction_b, run, Algorithm, DegenerateRule, SimConfig, StopRule};
use rayon::prelude::*;

fn mean_volumes(cfg: &SimConfig, n_seeds: u64) -> martensim::Result<Vec<f64>> {
    let runs: Vec<Vec<f64>> =
        (0..n_seeds).into_par_iter().map(|seed| Ok(run(&SimConfig { seed, ..cfg.clone() })?.volumes())).collect::<martensim::Result<_>>()?;
    let len = runs.iter().map(Vec::len).max().unwrap_or(0);
    Ok((0..len)
        .map(|k| runs.iter().map(|v| *v.get(k).unwrap_or(v.last().unwrap())).sum::<f64>() / n_seeds as f64)
        .collect())
}

fn main() -> martensim::Result<()> {
    let base = SimConfig { delta: 0.4, p: 0.5, ..SimConfig::default() };
    let ca = contraction_a(base.p, base.delta);
    let a = mean_volumes(&SimConfig { algorithm: Algorithm::A, stop: StopRule::MaxSteps(10), ..base.clone() }, 100)?;
    println!("Model A (c = {ca}):");
    for (k, v) in a.iter().enumerate() {
        println!("  k = {k:>2}  E|V_k| = {v:.5}  c^k = {:.5}", ca.powi(k as i32));
    }
    let cb = contraction_b(ca);
    let cfg_b = SimConfig {
        algorithm: Algorithm::B,
        degenerate_rule: DegenerateRule::Change1,
        stop: StopRule::MaxSteps(255),
        ..base.clone()
    };
    let b = mean_volumes(&cfg_b, 100)?;
    println!("Model B (c = {cb:.5}) at the ends of the doubling blocks:");
    for j in 0..8u32 {
        let k = (1usize << j) - 1;
        println!("  k = {k:>3}  E|V_k| = {:.5}  c^j = {:.5}", b[k.min(b.len() - 1)], cb.powi(j as i32));
    }
    let m = mean_volumes(&SimConfig { algorithm: Algorithm::Amod, stop: StopRule::MaxSteps(8), ..base }, 20)?;
    println!("modified Model A: E|V_8| = {:.5}", m.last().unwrap());
    Ok(())
}
