//! The two wells, the boundary datum and the rank-one splits that drive the
//! laminate construction.

use martensim::wells::{lamination_split, make_boundary_data, Matrix2, Normal, Well, WellSet};

fn main() -> martensim::Result<()> {
    let wells = WellSet::new(0.5)?;
    for w in [Well::Plus, Well::Minus] {
        println!("{w:?}: F = {:?}, C = {:?}", wells.well_matrix(w).to_array(), wells.well_cauchy_green(w).to_array());
    }
    let m = make_boundary_data(Matrix2::diag(0.939, 1.064), &wells)?;
    println!("boundary datum (det 1): {:?}", m.matrix().to_array());
    for normal in [Normal::E2, Normal::E1] {
        let s = lamination_split(m.matrix(), normal, &wells)?;
        println!(
            "split along {normal:?}: mu = {:.4}, plus = {:?}, minus = {:?}, rank(plus - minus) = 1: {}",
            s.mu,
            s.plus.to_array(),
            s.minus.to_array(),
            (s.plus - s.minus).det().abs() < 1e-12
        );
        // the second split of each side lands in the wells
        for g in [s.plus, s.minus] {
            let other = if normal == Normal::E2 { Normal::E1 } else { Normal::E2 };
            let t = martensim::wells::rank_one_split(g, other, &wells)?;
            println!("  -> {:?} / {:?}", wells.well_of(t.plus, 1e-9), wells.well_of(t.minus, 1e-9));
        }
    }
    match make_boundary_data(Matrix2::diag(1.2, 0.9), &wells) {
        Ok(_) => println!("unexpectedly inside the hull"),
        Err(e) => println!("outside the hull: {e}"),
    }
    Ok(())
}
