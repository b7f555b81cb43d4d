use std::sync::Arc;

use martensim::blocks::{build_block, BlockLibrary, Microstructure, Node, Orientation, Region};
use martensim::fragment::{run, SimConfig, StopRule};
use martensim::geometry::{Rect, Shape};
use martensim::render::{rasterize, ColorMap, Rgb};
use martensim::sobolev::{bv_norm, bv_norm_field, gagliardo_seminorm, interpolation_bound, FieldDiff, SobolevParams};
use martensim::wells::{make_boundary_data, Family, GradientLabel, Matrix2, Variant, Well, WellSet};

fn label_color(colors: &ColorMap, key: (Family, Variant)) -> Rgb {
    let well = if key.1 == Variant::Minus { Well::Minus } else { Well::Plus };
    match key.0 {
        Family::Unresolved => colors.color(&GradientLabel::unresolved(0)),
        f => colors.color(&GradientLabel::resolved(f, well, 0)),
    }
}

/// Upper bound on the misclassified pixel share of each label: a segment
/// meets at most `|dx|/px + |dy|/py + 2` pixels.
fn crossing_bound(ms: &Microstructure, w: usize, h: usize, key: (Family, Variant)) -> f64 {
    let d = *ms.domain();
    let (px, py) = (d.l1() / w as f64, d.l2() / h as f64);
    let mut pixels = 0.0;
    ms.for_each_region(&mut |r| {
        if (r.label.family, r.label.variant) != key {
            return;
        }
        let v = r.shape.vertices();
        for i in 0..v.len() {
            let (a, b) = (v[i], v[(i + 1) % v.len()]);
            pixels += (b.x - a.x).abs() / px + (b.y - a.y).abs() / py + 2.0;
        }
    });
    pixels / (w * h) as f64
}

/// Compares the pixel share of every label with its exact area share.
/// `coarse` also applies the flat `2 / min(w, h)` tolerance, which only
/// holds when every label has a short boundary.
fn audit(ms: &Microstructure, w: usize, h: usize, coarse: bool) {
    let colors = ColorMap { unresolved_step: 0, ..ColorMap::default() };
    let img = rasterize(ms, w, h, &colors).unwrap();
    let s = ms.summary();
    let flat = 2.0 / w.min(h) as f64;
    for &(key, area) in &s.by_label {
        let c = label_color(&colors, key);
        let share = img.pixels.iter().filter(|&&p| p == c).count() as f64 / (w * h) as f64;
        let exact = area / ms.domain().area();
        let err = (share - exact).abs();
        assert!(err <= crossing_bound(ms, w, h, key), "{key:?}: pixels {share}, exact {exact}");
        if coarse {
            assert!(err <= flat, "{key:?}: pixels {share}, exact {exact}, tolerance {flat}");
        }
    }
}

#[test]
fn model_blocks_render_with_exact_area_shares() {
    let wells = WellSet::new(0.5).unwrap();
    let m = make_boundary_data(Matrix2::diag(0.939, 1.064), &wells).unwrap();
    for o in [Orientation::Horizontal, Orientation::Vertical] {
        let ms = build_block(o, &m, &wells, 0.2, 2).unwrap();
        audit(&ms, 512, 512, false);
        let bare = build_block(o, &m, &wells, 0.2, 0).unwrap();
        audit(&bare, 512, 512, true);
        let img = rasterize(&bare, 40, 30, &ColorMap::default()).unwrap();
        assert!(img.pixels.iter().all(|&p| p == [0, 0, 0]));
    }
}

#[test]
fn simulation_renders_with_exact_area_shares() {
    let cfg = SimConfig { stop: StopRule::MaxSteps(4), block_depth: 1, ..SimConfig::default() };
    let res = run(&cfg).unwrap();
    let ms = BlockLibrary::for_config(&cfg).unwrap().simulation_microstructure(&res);
    ms.check_partition().unwrap();
    audit(&ms, 512, 512, false);
}

#[test]
fn two_band_render_colors_each_half() {
    let wells = WellSet::default();
    let leaf = |r: Rect, well: Well, g: Matrix2| {
        Node::Leaf(Region { shape: Shape::Rect(r), label: GradientLabel::resolved(Family::Vertical, well, 1), matrix: g })
    };
    let ms = Microstructure::new(
        Rect::unit(),
        1,
        vec![
            leaf(Rect::from_corners(0.0, 0.0, 0.5, 1.0), Well::Plus, wells.f0()),
            leaf(Rect::from_corners(0.5, 0.0, 1.0, 1.0), Well::Minus, wells.f0_inv()),
        ],
    );
    let colors = ColorMap::default();
    let img = rasterize(&ms, 64, 32, &colors).unwrap();
    for y in 0..32 {
        for x in 0..64 {
            let want = if x < 32 { colors.vertical_plus } else { colors.vertical_minus };
            assert_eq!(img.pixel(x, y), want, "pixel ({x}, {y})");
        }
    }
    // an instanced copy renders the same
    let nested = Microstructure::new(
        Rect::unit(),
        1,
        vec![Node::Instance { template: Arc::new(ms), map: martensim::geometry::AxisMap::IDENTITY }],
    );
    assert_eq!(rasterize(&nested, 64, 32, &colors).unwrap(), img);
    audit(&nested, 512, 512, true);
}

#[test]
fn two_band_interpolation_bound_in_closed_form() {
    let wells = WellSet::default();
    let v = FieldDiff::from_regions(
        Rect::unit(),
        &[
            (Shape::Rect(Rect::from_corners(0.0, 0.0, 0.5, 1.0)), wells.f0()),
            (Shape::Rect(Rect::from_corners(0.5, 0.0, 1.0, 1.0)), wells.f0_inv()),
        ],
    );
    // |F0| = |F0^-1| = 3/2 for gamma = 1/2; the jump F0 - F0^-1 has norm 1
    assert!((v.sup_norm() - 1.5).abs() < 1e-15);
    assert!((v.l1_norm() - 1.5).abs() < 1e-15);
    let bv = bv_norm_field(&v).unwrap();
    assert!((bv.interface - 1.0).abs() < 1e-12);
    assert!((bv.total() - 2.5).abs() < 1e-12);
    let (s, p) = (0.1, 1.0);
    let sigma = s * p;
    let c = 1.0 + 2f64.powf(p - 1.0) * 2.0 * std::f64::consts::PI * (1.0 / (1.0 - sigma) + 2.0 / sigma);
    let expected = c.powf(1.0 / p) * 1.5f64.powf(1.0 - 1.0 / p) * (1.5f64.powf(1.0 - sigma) * 2.5f64.powf(sigma)).powf(1.0 / p);
    let bound = interpolation_bound(&v, s, p).unwrap();
    assert!((bound / expected - 1.0).abs() < 1e-12, "{bound} vs {expected}");
    let sp = SobolevParams { s, p, n_samples: 50_000, ..SobolevParams::default() };
    let est = gagliardo_seminorm(&v, &sp, 3, 0).unwrap();
    assert!(est.interval().1 + est.cutoff_bound < bound);
}

#[test]
fn block_variation_grows_with_depth() {
    // each extra level refines the diamond fill, so the interface length
    // must grow while the average stays fixed
    let wells = WellSet::new(0.5).unwrap();
    let m = make_boundary_data(Matrix2::diag(0.939, 1.064), &wells).unwrap();
    let mut last = -1.0;
    for d in 0..4 {
        let ms = build_block(Orientation::Horizontal, &m, &wells, 0.2, d).unwrap();
        let bv = bv_norm(&ms).unwrap().interface;
        assert!(bv > last, "depth {d}: {bv} <= {last}");
        assert!((ms.summary().average() - m.matrix()).frobenius() < 1e-12);
        last = bv;
    }
}
