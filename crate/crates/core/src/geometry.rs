//! Axis-aligned rectangles, diamonds and right triangles, aspect-ratio
//! buckets and the dyadic diamond packing of a rectangle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for containment tests.
pub const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Axis-aligned rectangle stored by its corners so that neighbours share
/// coordinates exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn new(x0: f64, y0: f64, l1: f64, l2: f64) -> Self {
        Rect { x0, y0, x1: x0 + l1, y1: y0 + l2 }
    }

    pub fn unit() -> Self {
        Rect::from_corners(0.0, 0.0, 1.0, 1.0)
    }

    pub fn l1(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn l2(&self) -> f64 {
        self.y1 - self.y0
    }

    /// Side length along `e_d`, `d ∈ {1, 2}`.
    pub fn side(&self, d: Direction) -> f64 {
        match d {
            Direction::E1 => self.l1(),
            Direction::E2 => self.l2(),
        }
    }

    pub fn area(&self) -> f64 {
        self.l1() * self.l2()
    }

    pub fn is_valid(&self) -> bool {
        self.x0.is_finite() && self.y0.is_finite() && self.x1 > self.x0 && self.y1 > self.y0
    }

    pub fn long_side(&self) -> f64 {
        self.l1().max(self.l2())
    }

    /// Aspect ratio `max(l1, l2) / min(l1, l2)`.
    pub fn aspect(&self) -> f64 {
        let (a, b) = (self.l1(), self.l2());
        a.max(b) / a.min(b)
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    /// Closed containment with the absolute tolerance `GEOM_TOL`.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x0 - GEOM_TOL
            && p.x <= self.x1 + GEOM_TOL
            && p.y >= self.y0 - GEOM_TOL
            && p.y <= self.y1 + GEOM_TOL
    }

    pub fn strictly_contains(&self, p: Point) -> bool {
        p.x > self.x0 && p.x < self.x1 && p.y > self.y0 && p.y < self.y1
    }

    pub fn contains_rect(&self, r: &Rect) -> bool {
        r.x0 >= self.x0 - GEOM_TOL
            && r.x1 <= self.x1 + GEOM_TOL
            && r.y0 >= self.y0 - GEOM_TOL
            && r.y1 <= self.y1 + GEOM_TOL
    }

    /// Area of the intersection with `other`.
    pub fn overlap(&self, other: &Rect) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    /// Quadrants in the order lower-left, lower-right, upper-left, upper-right.
    pub fn quadrants(&self) -> [Rect; 4] {
        let xm = 0.5 * (self.x0 + self.x1);
        let ym = 0.5 * (self.y0 + self.y1);
        [
            Rect::from_corners(self.x0, self.y0, xm, ym),
            Rect::from_corners(xm, self.y0, self.x1, ym),
            Rect::from_corners(self.x0, ym, xm, self.y1),
            Rect::from_corners(xm, ym, self.x1, self.y1),
        ]
    }

    /// Index into [`Rect::quadrants`] of the quadrant holding `p`; points on
    /// a dividing line go to the lowest-index candidate.
    pub fn quadrant_of(&self, p: Point) -> usize {
        let xm = 0.5 * (self.x0 + self.x1);
        let ym = 0.5 * (self.y0 + self.y1);
        let ix = usize::from(p.x > xm);
        let iy = usize::from(p.y > ym);
        2 * iy + ix
    }

    pub fn vertices(&self) -> [Point; 4] {
        [
            Point::new(self.x0, self.y0),
            Point::new(self.x1, self.y0),
            Point::new(self.x1, self.y1),
            Point::new(self.x0, self.y1),
        ]
    }
}

/// Coordinate direction `e1` or `e2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    E1,
    E2,
}

impl Direction {
    pub fn other(self) -> Direction {
        match self {
            Direction::E1 => Direction::E2,
            Direction::E2 => Direction::E1,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Direction::E1 => 1,
            Direction::E2 => 2,
        }
    }
}

/// Rhombus with diagonals along the axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diamond {
    pub center: Point,
    pub d1: f64,
    pub d2: f64,
    pub scale_index: u32,
}

impl Diamond {
    pub fn area(&self) -> f64 {
        self.d1 * self.d2 / 2.0
    }

    pub fn long_axis(&self) -> f64 {
        self.d1.max(self.d2)
    }

    pub fn contains(&self, p: Point) -> bool {
        let u = (p.x - self.center.x).abs() / (0.5 * self.d1);
        let v = (p.y - self.center.y).abs() / (0.5 * self.d2);
        u + v <= 1.0 + GEOM_TOL
    }

    pub fn vertices(&self) -> [Point; 4] {
        let (c, h1, h2) = (self.center, 0.5 * self.d1, 0.5 * self.d2);
        [
            Point::new(c.x + h1, c.y),
            Point::new(c.x, c.y + h2),
            Point::new(c.x - h1, c.y),
            Point::new(c.x, c.y - h2),
        ]
    }

    pub fn bbox(&self) -> Rect {
        Rect::from_corners(
            self.center.x - 0.5 * self.d1,
            self.center.y - 0.5 * self.d2,
            self.center.x + 0.5 * self.d1,
            self.center.y + 0.5 * self.d2,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub v: [Point; 3],
}

impl Triangle {
    pub fn new(a: Point, b: Point, c: Point) -> Self {
        Triangle { v: [a, b, c] }
    }

    pub fn area(&self) -> f64 {
        let [a, b, c] = self.v;
        0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)).abs()
    }

    pub fn contains(&self, p: Point) -> bool {
        let [a, b, c] = self.v;
        let cross = |o: Point, q: Point| (q.x - o.x) * (p.y - o.y) - (q.y - o.y) * (p.x - o.x);
        let scale = self.bbox().long_side().max(f64::MIN_POSITIVE);
        let tol = GEOM_TOL * scale;
        let (d1, d2, d3) = (cross(a, b), cross(b, c), cross(c, a));
        let neg = d1 < -tol || d2 < -tol || d3 < -tol;
        let pos = d1 > tol || d2 > tol || d3 > tol;
        !(neg && pos)
    }

    pub fn bbox(&self) -> Rect {
        let xs = self.v.map(|p| p.x);
        let ys = self.v.map(|p| p.y);
        Rect::from_corners(
            xs.iter().cloned().fold(f64::INFINITY, f64::min),
            ys.iter().cloned().fold(f64::INFINITY, f64::min),
            xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    }
}

/// Shape of a region in a microstructure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Rect(Rect),
    Diamond(Diamond),
    Triangle(Triangle),
}

impl Shape {
    pub fn area(&self) -> f64 {
        match self {
            Shape::Rect(r) => r.area(),
            Shape::Diamond(d) => d.area(),
            Shape::Triangle(t) => t.area(),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        match self {
            Shape::Rect(r) => r.contains(p),
            Shape::Diamond(d) => d.contains(p),
            Shape::Triangle(t) => t.contains(p),
        }
    }

    pub fn bbox(&self) -> Rect {
        match self {
            Shape::Rect(r) => *r,
            Shape::Diamond(d) => d.bbox(),
            Shape::Triangle(t) => t.bbox(),
        }
    }

    /// Vertices in counter-clockwise order.
    pub fn vertices(&self) -> Vec<Point> {
        match self {
            Shape::Rect(r) => r.vertices().to_vec(),
            Shape::Diamond(d) => d.vertices().to_vec(),
            Shape::Triangle(t) => {
                let [a, b, c] = t.v;
                let orient = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
                if orient >= 0.0 {
                    vec![a, b, c]
                } else {
                    vec![a, c, b]
                }
            }
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Shape::Rect(_) => "rect",
            Shape::Diamond(_) => "diamond",
            Shape::Triangle(_) => "triangle",
        }
    }

    pub fn mapped(&self, m: &AxisMap) -> Shape {
        match self {
            Shape::Rect(r) => Shape::Rect(m.rect(r)),
            Shape::Diamond(d) => Shape::Diamond(Diamond {
                center: m.point(d.center),
                d1: d.d1 * m.sx,
                d2: d.d2 * m.sy,
                scale_index: d.scale_index,
            }),
            Shape::Triangle(t) => Shape::Triangle(Triangle { v: t.v.map(|p| m.point(p)) }),
        }
    }
}

/// Map `(x, y) ↦ (sx x + tx, sy y + ty)` with positive scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisMap {
    pub sx: f64,
    pub sy: f64,
    pub tx: f64,
    pub ty: f64,
}

impl AxisMap {
    pub const IDENTITY: AxisMap = AxisMap { sx: 1.0, sy: 1.0, tx: 0.0, ty: 0.0 };

    /// The map sending `from` onto `to`.
    pub fn between(from: &Rect, to: &Rect) -> AxisMap {
        let sx = to.l1() / from.l1();
        let sy = to.l2() / from.l2();
        AxisMap { sx, sy, tx: to.x0 - sx * from.x0, ty: to.y0 - sy * from.y0 }
    }

    pub fn point(&self, p: Point) -> Point {
        Point::new(self.sx * p.x + self.tx, self.sy * p.y + self.ty)
    }

    pub fn inverse_point(&self, p: Point) -> Point {
        Point::new((p.x - self.tx) / self.sx, (p.y - self.ty) / self.sy)
    }

    pub fn rect(&self, r: &Rect) -> Rect {
        Rect::from_corners(
            self.sx * r.x0 + self.tx,
            self.sy * r.y0 + self.ty,
            self.sx * r.x1 + self.tx,
            self.sy * r.y1 + self.ty,
        )
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AxisMap) -> AxisMap {
        AxisMap {
            sx: self.sx * inner.sx,
            sy: self.sy * inner.sy,
            tx: self.sx * inner.tx + self.tx,
            ty: self.sy * inner.ty + self.ty,
        }
    }

    pub fn jacobian(&self) -> f64 {
        self.sx * self.sy
    }
}

/// Aspect-ratio buckets with `δ = λ^{-J+1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketParams {
    pub lambda: f64,
    pub delta: f64,
    pub j_max: i64,
}

impl BucketParams {
    /// Requires `δ = λ^{-J+1/2}` for an integer `J ≥ 1` within `1e-12`.
    pub fn new(lambda: f64, delta: f64) -> Result<Self> {
        let bp = Self::snapped(lambda, delta)?;
        if (bp.delta - delta).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "delta {delta} is not of the form lambda^(-J+1/2) for lambda {lambda}"
            )));
        }
        Ok(bp)
    }

    /// Uses the integer `J` nearest to the one solving `δ = λ^{-J+1/2}`
    /// and replaces `δ` by `λ^{-J+1/2}`.
    pub fn snapped(lambda: f64, delta: f64) -> Result<Self> {
        if !(lambda > 1.0 && lambda.is_finite()) || !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need lambda > 1 and 0 < delta < 1, got {lambda}, {delta}"
            )));
        }
        let j = (0.5 - delta.ln() / lambda.ln()).round() as i64;
        if j < 1 {
            return Err(Error::InvalidParameter("J must be a positive integer".into()));
        }
        Ok(Self::with_j(lambda, j))
    }

    pub fn with_j(lambda: f64, j_max: i64) -> Self {
        BucketParams { lambda, delta: lambda.powf(0.5 - j_max as f64), j_max }
    }

    /// Lower end `λ^{-j-1/2} δ^{-1}` of class `j`.
    pub fn class_lower(&self, j: i64) -> f64 {
        self.lambda.powf(-(j as f64) - 0.5) / self.delta
    }

    /// Class index of an aspect ratio `L ≥ 1`.
    pub fn class_of_aspect(&self, aspect: f64) -> i64 {
        let u = (aspect * self.delta).ln() / self.lambda.ln();
        let mut j = (-u - 0.5).ceil() as i64;
        // The closed-form guess can be off by one at interval ends.
        while aspect < self.class_lower(j) {
            j += 1;
        }
        while j > i64::MIN && aspect >= self.class_lower(j - 1) {
            j -= 1;
        }
        j
    }
}

pub fn rect_class(r: &Rect, bp: &BucketParams) -> i64 {
    bp.class_of_aspect(r.aspect())
}

/// Diamonds of a dyadic packing together with bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Packing {
    pub diamonds: Vec<Diamond>,
    /// Number of diamonds created at each generation, starting with 1 at generation 0.
    pub generation_counts: Vec<usize>,
    /// Covered fraction of the rectangle after each generation, computed in
    /// normalized dyadic coordinates (exact in binary floating point).
    pub covered_after: Vec<f64>,
    /// Uncovered right triangles left after the last generation.
    pub gaps: Vec<Triangle>,
}

impl Packing {
    pub fn covered_fraction(&self) -> f64 {
        *self.covered_after.last().unwrap_or(&0.0)
    }
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    /// Right isosceles triangle with legs of length `a` from `v` along `(sx, 0)` and `(0, sy)`.
    Corner { v: (f64, f64), a: f64, sx: f64, sy: f64 },
    /// Right isosceles triangle with hypotenuse `m ± h t` and apex `m + h n`.
    Side { m: (f64, f64), h: f64, n: (f64, f64) },
}

impl Piece {
    fn children(self, out_diamonds: &mut Vec<((f64, f64), f64)>, out: &mut Vec<Piece>) {
        match self {
            Piece::Corner { v, a, sx, sy } => {
                let q = a / 4.0;
                out_diamonds.push(((v.0 + sx * q, v.1 + sy * 2.0 * q), q));
                out_diamonds.push(((v.0 + sx * 2.0 * q, v.1 + sy * q), q));
                out.push(Piece::Corner { v, a: a / 2.0, sx, sy });
                out.push(Piece::Side { m: (v.0, v.1 + sy * 3.0 * q), h: q, n: (sx, 0.0) });
                out.push(Piece::Side { m: (v.0 + sx * 3.0 * q, v.1), h: q, n: (0.0, sy) });
            }
            Piece::Side { m, h, n } => {
                let r = h / 2.0;
                out_diamonds.push(((m.0 + r * n.0, m.1 + r * n.1), r));
                let t = (n.1.abs(), n.0.abs());
                out.push(Piece::Side { m: (m.0 - r * t.0, m.1 - r * t.1), h: r, n });
                out.push(Piece::Side { m: (m.0 + r * t.0, m.1 + r * t.1), h: r, n });
            }
        }
    }

    fn triangle(self, map: &AxisMap) -> Triangle {
        let p = |x: f64, y: f64| map.point(Point::new(x, y));
        match self {
            Piece::Corner { v, a, sx, sy } => {
                Triangle::new(p(v.0, v.1), p(v.0 + sx * a, v.1), p(v.0, v.1 + sy * a))
            }
            Piece::Side { m, h, n } => {
                let t = (n.1.abs(), n.0.abs());
                Triangle::new(
                    p(m.0 - h * t.0, m.1 - h * t.1),
                    p(m.0 + h * t.0, m.1 + h * t.1),
                    p(m.0 + h * n.0, m.1 + h * n.1),
                )
            }
        }
    }
}

/// Packs `r` with diamonds down to generation `max_n`.
///
/// Generation 0 is the inscribed diamond (half of `|r|`); generation
/// `g ≥ 1` adds `8·2^{g-1}` diamonds with diagonals `2^{-g-1}` times the
/// sides of `r`, and the covered fraction after generation `g` is
/// `1 - 2^{-g-1}`.
pub fn dyadic_diamond_packing(r: &Rect, max_n: i64) -> Result<Packing> {
    if max_n < 0 {
        return Err(Error::InvalidParameter(format!("max_n must be non-negative, got {max_n}")));
    }
    if !r.is_valid() {
        return Err(Error::InvalidParameter("degenerate rectangle".into()));
    }
    let map = AxisMap::between(&Rect::unit(), r);
    let mut diamonds = Vec::new();
    let push = |c: (f64, f64), half: f64, g: u32, diamonds: &mut Vec<Diamond>| {
        diamonds.push(Diamond {
            center: map.point(Point::new(c.0, c.1)),
            d1: 2.0 * half * r.l1(),
            d2: 2.0 * half * r.l2(),
            scale_index: g,
        });
    };
    push((0.5, 0.5), 0.5, 0, &mut diamonds);
    let mut covered = 0.5;
    let mut covered_after = vec![covered];
    let mut generation_counts = vec![1];
    let mut pieces = vec![
        Piece::Corner { v: (0.0, 0.0), a: 0.5, sx: 1.0, sy: 1.0 },
        Piece::Corner { v: (1.0, 0.0), a: 0.5, sx: -1.0, sy: 1.0 },
        Piece::Corner { v: (0.0, 1.0), a: 0.5, sx: 1.0, sy: -1.0 },
        Piece::Corner { v: (1.0, 1.0), a: 0.5, sx: -1.0, sy: -1.0 },
    ];
    for g in 1..=max_n as u32 {
        let mut new = Vec::new();
        let mut next = Vec::with_capacity(pieces.len() * 2 + 8);
        for p in pieces {
            p.children(&mut new, &mut next);
        }
        for &(c, half) in &new {
            covered += 2.0 * half * half;
            push(c, half, g, &mut diamonds);
        }
        generation_counts.push(new.len());
        covered_after.push(covered);
        pieces = next;
    }
    let gaps = pieces.iter().map(|p| p.triangle(&map)).collect();
    Ok(Packing { diamonds, generation_counts, covered_after, gaps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_counts_and_coverage() {
        let p = dyadic_diamond_packing(&Rect::new(0.0, 0.0, 1.0, 0.05), 5).unwrap();
        assert_eq!(p.generation_counts, vec![1, 8, 16, 32, 64, 128]);
        for (g, f) in p.covered_after.iter().enumerate() {
            assert_eq!(*f, 1.0 - 0.5f64.powi(g as i32 + 1));
        }
        let gap_area: f64 = p.gaps.iter().map(|t| t.area()).sum();
        let diamond_area: f64 = p.diamonds.iter().map(|d| d.area()).sum();
        assert!((gap_area + diamond_area - 0.05).abs() < 1e-15);
    }

    #[test]
    fn quadrant_ties() {
        let r = Rect::unit();
        assert_eq!(r.quadrant_of(Point::new(0.5, 0.5)), 0);
        assert_eq!(r.quadrant_of(Point::new(0.5, 0.2)), 0);
        assert_eq!(r.quadrant_of(Point::new(0.7, 0.5)), 1);
        assert_eq!(r.quadrant_of(Point::new(0.5, 0.7)), 2);
        assert_eq!(r.quadrant_of(Point::new(0.7, 0.7)), 3);
    }

    #[test]
    fn class_examples() {
        let bp = BucketParams::with_j(1.1, 25);
        assert_eq!(bp.class_of_aspect(1.0), 24);
        assert_eq!(bp.class_of_aspect(1.0 / bp.delta), 0);
        assert_eq!(bp.class_of_aspect(1.1f64.powi(2) / bp.delta), -2);
    }
}
