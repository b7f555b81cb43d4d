//! Dyadic diamond packing of a rectangle: generation counts and coverage.

use martensim::geometry::{dyadic_diamond_packing, Rect};

fn main() -> martensim::Result<()> {
    let r = Rect::from_corners(0.0, 0.0, 1.0, 0.25);
    let pk = dyadic_diamond_packing(&r, 6)?;
    println!("generation  new diamonds  covered fraction");
    for (g, (n, c)) in pk.generation_counts.iter().zip(&pk.covered_after).enumerate() {
        println!("{g:>10}  {n:>12}  {c:.10}");
    }
    let area: f64 = pk.diamonds.iter().map(|d| d.area()).sum();
    println!("diamond area / rect area = {:.12}, gaps left: {}", area / r.area(), pk.gaps.len());
    Ok(())
}
