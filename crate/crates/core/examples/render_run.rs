//! Runs Model B and writes the resulting microstructure as `run.ppm` and
//! `run.jsonl` to the output directory (first argument, default `out`).

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use martensim::blocks::BlockLibrary;
use martensim::fragment::{run, Algorithm, DegenerateRule, SimConfig, StopRule};
use martensim::render::{rasterize, write_ppm, ColorMap};
use martensim::wells::Family;

fn main() -> martensim::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out".into()));
    fs::create_dir_all(&dir)?;
    let cfg = SimConfig {
        algorithm: Algorithm::B,
        delta: 0.2,
        degenerate_rule: DegenerateRule::Change1,
        stop: StopRule::MaxSteps(60),
        block_depth: 2,
        seed: 5,
        ..SimConfig::default()
    };
    let res = run(&cfg)?;
    let ms = BlockLibrary::for_config(&cfg)?.simulation_microstructure(&res);
    let s = ms.summary();
    println!(
        "{} steps, {} leaves, resolved fraction {:.4}",
        res.state.k,
        ms.leaf_count(),
        (s.family_area(Family::Horizontal) + s.family_area(Family::Vertical)) / s.area
    );
    let img = rasterize(&ms, 768, 768, &ColorMap::default())?;
    write_ppm(BufWriter::new(File::create(dir.join("run.ppm"))?), &img)?;
    ms.write_jsonl(BufWriter::new(File::create(dir.join("run.jsonl"))?))?;
    println!("wrote run.ppm and run.jsonl to {}", dir.display());
    Ok(())
}
