//! Long runs of the modified Model A with the weighted-population
//! estimator: volume decay and the share of very elongated components.

use martensim::fragment::population::run_weighted;
use martensim::fragment::{Algorithm, SimConfig};
use martensim::geometry::BucketParams;

fn main() -> martensim::Result<()> {
    let cfg = SimConfig { algorithm: Algorithm::Amod, delta: 0.1, p: 0.5, ..SimConfig::default() };
    let bp = BucketParams::snapped(1.1, cfg.delta)?;
    let j1 = -98;
    let snaps = run_weighted(&cfg, 200, 256, &bp)?;
    println!("   k      volume   ratio   tail share (j <= {j1})");
    let mut prev = 1.0;
    for s in snaps.iter().filter(|s| s.k % 20 == 0) {
        println!("{:>4}  {:>10.4e}  {:.4}  {:.3e}", s.k, s.volume, (s.volume / prev).powf(1.0 / 20.0), s.tail(j1) / s.volume);
        prev = s.volume;
    }
    Ok(())
}
