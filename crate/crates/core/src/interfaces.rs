//! Jump set of a piecewise-constant matrix field given as polygons.
//!
//! Edges are grouped by supporting line and swept in one dimension, so
//! T-junctions and partially shared edges are handled exactly.

use crate::error::{Error, Result};
use crate::geometry::{AxisMap, Point, Rect, Shape};
use crate::wells::Matrix2;

/// Treatment of uncovered points inside the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fill {
    /// The regions must tile the domain.
    Error,
    /// Uncovered points carry the zero matrix.
    Zero,
}

/// Treatment of the outside of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outside {
    /// Jumps across the domain boundary are not counted.
    Ignore,
    /// The field is extended by zero.
    Zero,
}

/// `Σ length × |jump|` split by edge direction so that it can be
/// re-evaluated under an axis-aligned scaling.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeJumps {
    pub horizontal: f64,
    pub vertical: f64,
    /// `(dy/dx, Σ |dx| × |jump|)` for oblique edges.
    pub oblique: Vec<(f64, f64)>,
}

impl EdgeJumps {
    pub fn total(&self) -> f64 {
        self.mapped(&AxisMap::IDENTITY)
    }

    /// Total after mapping the geometry by `m`.
    pub fn mapped(&self, m: &AxisMap) -> f64 {
        let mut t = self.horizontal * m.sx + self.vertical * m.sy;
        for &(slope, dx) in &self.oblique {
            t += dx * (m.sx * m.sx + (m.sy * slope).powi(2)).sqrt();
        }
        t
    }

    pub fn scaled(&self, f: f64) -> EdgeJumps {
        EdgeJumps {
            horizontal: self.horizontal * f,
            vertical: self.vertical * f,
            oblique: self.oblique.iter().map(|&(s, d)| (s, d * f)).collect(),
        }
    }

    fn add_oblique(&mut self, slope: f64, dx: f64) {
        match self.oblique.iter_mut().find(|(s, _)| (s - slope).abs() <= 1e-9 * (1.0 + slope.abs())) {
            Some(e) => e.1 += dx,
            None => self.oblique.push((slope, dx)),
        }
    }
}

struct Edge {
    theta: f64,
    offset: f64,
    t0: f64,
    t1: f64,
    /// +1 when the region lies to the left of the canonical direction.
    side: i8,
    value: usize,
}

fn ccw_vertices(shape: &Shape) -> Vec<Point> {
    shape.vertices()
}

/// Sweeps all edges of `regions` and accumulates interface jumps.
pub fn interface_jumps(regions: &[(Shape, Matrix2)], domain: &Rect, fill: Fill, outside: Outside) -> Result<EdgeJumps> {
    let scale = domain.long_side();
    let ltol = 1e-9 * scale;
    let mut edges = Vec::new();
    for (vi, (shape, _)) in regions.iter().enumerate() {
        let vs = ccw_vertices(shape);
        for i in 0..vs.len() {
            let (mut a, mut b) = (vs[i], vs[(i + 1) % vs.len()]);
            let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
            if len <= 1e-15 * scale {
                continue;
            }
            let mut side = 1i8;
            if b.x < a.x || (b.x == a.x && b.y < a.y) {
                std::mem::swap(&mut a, &mut b);
                side = -1;
            }
            let (dx, dy) = ((b.x - a.x) / len, (b.y - a.y) / len);
            let theta = dy.atan2(dx);
            let offset = -dy * a.x + dx * a.y;
            let t0 = dx * a.x + dy * a.y;
            edges.push(Edge { theta, offset, t0, t1: t0 + len, side, value: vi });
        }
    }
    edges.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    let mut out = EdgeJumps::default();
    let mut i = 0;
    while i < edges.len() {
        let mut j = i + 1;
        while j < edges.len() && edges[j].theta - edges[j - 1].theta <= 1e-9 {
            j += 1;
        }
        let group = &mut edges[i..j];
        group.sort_by(|a, b| a.offset.total_cmp(&b.offset));
        let mut k = 0;
        while k < group.len() {
            let mut l = k + 1;
            while l < group.len() && group[l].offset - group[l - 1].offset <= ltol {
                l += 1;
            }
            sweep_line(&group[k..l], regions, domain, fill, outside, scale, &mut out)?;
            k = l;
        }
        i = j;
    }
    Ok(out)
}

fn sweep_line(
    line: &[Edge],
    regions: &[(Shape, Matrix2)],
    domain: &Rect,
    fill: Fill,
    outside: Outside,
    scale: f64,
    out: &mut EdgeJumps,
) -> Result<()> {
    let theta = line[0].theta;
    let offset = line[0].offset;
    let (dx, dy) = (theta.cos(), theta.sin());
    let mut cuts: Vec<f64> = line.iter().flat_map(|e| [e.t0, e.t1]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * scale);
    let eps = 1e-9 * scale;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 1e-12 * scale {
            continue;
        }
        let mid = 0.5 * (a + b);
        let mut sides: [Option<usize>; 2] = [None, None];
        for e in line {
            if e.t0 <= mid && mid <= e.t1 {
                let s = usize::from(e.side < 0);
                if let Some(prev) = sides[s] {
                    if prev != e.value {
                        return Err(Error::NonConforming(format!(
                            "regions {prev} and {} overlap along an edge near t = {mid}",
                            e.value
                        )));
                    }
                }
                sides[s] = Some(e.value);
            }
        }
        if sides == [None, None] {
            continue;
        }
        // point on the line at parameter `mid`
        let p = Point::new(dx * mid - dy * offset, dy * mid + dx * offset);
        let mut vals = [Matrix2::ZERO; 2];
        let mut skip = false;
        for s in 0..2 {
            match sides[s] {
                Some(v) => vals[s] = regions[v].1,
                None => {
                    let sign = if s == 0 { 1.0 } else { -1.0 };
                    let q = Point::new(p.x - sign * dy * eps, p.y + sign * dx * eps);
                    let inside = domain.strictly_contains(q);
                    if inside && fill == Fill::Error {
                        return Err(Error::NonConforming(format!(
                            "uncovered point next to ({}, {})",
                            p.x, p.y
                        )));
                    }
                    if !inside && outside == Outside::Ignore {
                        skip = true;
                    }
                }
            }
        }
        if skip {
            continue;
        }
        let jump = (vals[0] - vals[1]).frobenius() * (b - a);
        if jump == 0.0 {
            continue;
        }
        if dy.abs() <= 1e-12 {
            out.horizontal += jump;
        } else if dx.abs() <= 1e-12 {
            out.vertical += jump;
        } else {
            out.add_oblique(dy / dx, jump * dx.abs());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_band_jump() {
        let a = Matrix2::new(1.0, 0.5, 0.0, 1.0);
        let b = Matrix2::new(1.0, -0.5, 0.0, 1.0);
        let regions = vec![
            (Shape::Rect(Rect::from_corners(0.0, 0.0, 0.5, 1.0)), a),
            (Shape::Rect(Rect::from_corners(0.5, 0.0, 1.0, 1.0)), b),
        ];
        let j = interface_jumps(&regions, &Rect::unit(), Fill::Error, Outside::Ignore).unwrap();
        assert!((j.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn t_junction_and_gap() {
        let a = Matrix2::IDENTITY;
        let regions = vec![
            (Shape::Rect(Rect::from_corners(0.0, 0.0, 0.5, 1.0)), a),
            (Shape::Rect(Rect::from_corners(0.5, 0.0, 1.0, 0.5)), a.scale(2.0)),
            (Shape::Rect(Rect::from_corners(0.5, 0.5, 1.0, 1.0)), a.scale(3.0)),
        ];
        let j = interface_jumps(&regions, &Rect::unit(), Fill::Error, Outside::Ignore).unwrap();
        let s2 = 2f64.sqrt();
        assert!((j.total() - (0.5 * s2 + 0.5 * 2.0 * s2 + 0.5 * s2)).abs() < 1e-12);
        let gap = &regions[..2];
        assert!(interface_jumps(gap, &Rect::unit(), Fill::Error, Outside::Ignore).is_err());
    }
}
