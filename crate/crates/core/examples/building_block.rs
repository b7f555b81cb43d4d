//! Builds the horizontal and vertical model blocks, prints their label
//! budget and writes `block_*.jsonl` and `block_*.ppm` to the output
//! directory (first argument, default `out`).

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use martensim::blocks::{build_block, unresolved_fraction, Orientation};
use martensim::render::{rasterize, write_ppm, ColorMap};
use martensim::wells::{make_boundary_data, Family, Matrix2, WellSet};

fn main() -> martensim::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out".into()));
    fs::create_dir_all(&dir)?;
    let wells = WellSet::new(0.5)?;
    let m = make_boundary_data(Matrix2::diag(0.939, 1.064), &wells)?;
    let depth = 3;
    for (o, tag) in [(Orientation::Horizontal, "h"), (Orientation::Vertical, "v")] {
        let ms = build_block(o, &m, &wells, 0.25, depth)?;
        ms.check_partition()?;
        let s = ms.summary();
        println!(
            "{o:?}: {} leaves, horizontal {:.4}, vertical {:.4}, unresolved {:.6} (expected {:.6}), average {:?}",
            ms.leaf_count(),
            s.family_area(Family::Horizontal) / s.area,
            s.family_area(Family::Vertical) / s.area,
            s.family_area(Family::Unresolved) / s.area,
            unresolved_fraction(depth),
            s.average().to_array()
        );
        ms.write_jsonl(BufWriter::new(File::create(dir.join(format!("block_{tag}.jsonl")))?))?;
        let (w, h) = if o == Orientation::Horizontal { (1024, 256) } else { (256, 1024) };
        let img = rasterize(&ms, w, h, &ColorMap::default())?;
        write_ppm(BufWriter::new(File::create(dir.join(format!("block_{tag}.ppm")))?), &img)?;
    }
    println!("wrote block_h/v.jsonl and block_h/v.ppm to {}", dir.display());
    Ok(())
}
