//! Placement of one inclusion inside one rectangular component.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Direction, Point, Rect};

/// Rule used when the band of thickness `δ ℓ_d` does not fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DegenerateRule {
    /// Cover the whole component.
    Original,
    /// Insert the maximal number of stacked model blocks.
    Change1,
}

/// What was inserted into a component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub rect: Rect,
    /// Long axis of the model block filling the inclusion.
    pub orientation: Direction,
    pub n_copies: u32,
    /// The inclusion is the whole component and not a union of similar copies
    /// of the model domain; the block is stretched onto it.
    pub stretched: bool,
}

impl Inclusion {
    /// Long side of one building block.
    pub fn copy_length(&self) -> f64 {
        if self.stretched {
            self.rect.long_side()
        } else {
            self.rect.side(self.orientation) / self.n_copies as f64
        }
    }
}

/// Event-log view of a placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlacementKind {
    Band { rect: [f64; 4] },
    WholeComponent,
    NCopies { rect: [f64; 4], n: u32 },
    QuadrantBand { quadrant: u8, rect: [f64; 4] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub kind: PlacementKind,
    pub inclusion: Inclusion,
    /// Residual rectangles of the component, in a fixed order.
    pub remainder: Vec<Rect>,
}

fn corners(r: &Rect) -> [f64; 4] {
    [r.x0, r.y0, r.x1, r.y1]
}

fn interval(r: &Rect, axis: Direction) -> (f64, f64) {
    match axis {
        Direction::E1 => (r.x0, r.x1),
        Direction::E2 => (r.y0, r.y1),
    }
}

fn coord(p: Point, axis: Direction) -> f64 {
    match axis {
        Direction::E1 => p.x,
        Direction::E2 => p.y,
    }
}

fn with_interval(r: &Rect, axis: Direction, lo: f64, hi: f64) -> Rect {
    match axis {
        Direction::E1 => Rect::from_corners(lo, r.y0, hi, r.y1),
        Direction::E2 => Rect::from_corners(r.x0, lo, r.x1, hi),
    }
}

/// Cuts `d` across `axis` into a slab of length `extent` along `axis`
/// centered at `p` and shifted flush to the nearer side if it overflows.
fn slab(d: &Rect, p: Point, axis: Direction, extent: f64) -> (Rect, Vec<Rect>) {
    let (lo, hi) = interval(d, axis);
    let c = coord(p, axis);
    let (a, b) = if extent >= hi - lo {
        (lo, hi)
    } else if c - 0.5 * extent <= lo {
        (lo, lo + extent)
    } else if c + 0.5 * extent >= hi {
        (hi - extent, hi)
    } else {
        (c - 0.5 * extent, c + 0.5 * extent)
    };
    slab_between(d, axis, a, b)
}

/// Cuts within a few ulps of a side snap onto it, so that no remainder is
/// too thin to contain a floating-point interior point.
fn slab_between(d: &Rect, axis: Direction, a: f64, b: f64) -> (Rect, Vec<Rect>) {
    let (lo, hi) = interval(d, axis);
    let tol = 8.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(hi - lo);
    let a = if a - lo <= tol { lo } else { a };
    let b = if hi - b <= tol { hi } else { b };
    let mut rest = Vec::with_capacity(2);
    if a > lo {
        rest.push(with_interval(d, axis, lo, a));
    }
    if b < hi {
        rest.push(with_interval(d, axis, b, hi));
    }
    (with_interval(d, axis, a, b), rest)
}

/// The band of the literal argmin reading: `s` is constrained by the full
/// length `ℓ_d` while the band only has thickness `δ ℓ_d`. Returns `None`
/// when no admissible `s` exists.
fn literal_band(d: &Rect, p: Point, dir: Direction, delta: f64) -> Option<(Rect, Vec<Rect>)> {
    let perp = dir.other();
    let (lo, hi) = interval(d, perp);
    let c = coord(p, perp);
    let l = d.side(dir);
    // s ≤ (c - lo)/l and s ≥ 1 - (hi - c)/l
    let s_max = ((c - lo) / l).min(1.0);
    let s_min = (1.0 - (hi - c) / l).max(0.0);
    if s_min > s_max {
        return None;
    }
    let s = 0.5f64.clamp(s_min, s_max);
    let a = (c - delta * s * l).max(lo);
    let b = (c + delta * (1.0 - s) * l).min(hi);
    Some(slab_between(d, perp, a, b))
}

fn check_point(d: &Rect, p: Point) -> Result<()> {
    if d.strictly_contains(p) {
        Ok(())
    } else {
        Err(Error::InvalidPoint(format!("({}, {}) is not inside {:?}", p.x, p.y, d)))
    }
}

/// Band of thickness `δ ℓ_d` spanning `d` along `e_d`.
fn band(d: &Rect, p: Point, dir: Direction, delta: f64, literal: bool) -> Placement {
    let thickness = delta * d.side(dir);
    let (rect, remainder) = if literal {
        literal_band(d, p, dir, delta).unwrap_or_else(|| slab(d, p, dir.other(), thickness))
    } else {
        slab(d, p, dir.other(), thickness)
    };
    Placement {
        kind: PlacementKind::Band { rect: corners(&rect) },
        inclusion: Inclusion { rect, orientation: dir, n_copies: 1, stretched: false },
        remainder,
    }
}

/// Slab of length `δ⁻¹ ℓ_⊥ · n` along `e_d` filled by `n` model blocks.
fn blocks_along(d: &Rect, p: Point, dir: Direction, delta: f64, n: u32) -> (Rect, Vec<Rect>) {
    let extent = n as f64 * d.side(dir.other()) / delta;
    slab(d, p, dir, extent)
}

pub fn is_degenerate(d: &Rect, dir: Direction, delta: f64) -> bool {
    delta * d.side(dir) >= d.side(dir.other())
}

/// Band rule of Models A and B with the `Original` degenerate branch.
pub fn place_basic(d: &Rect, p: Point, dir: Direction, delta: f64, literal: bool) -> Result<Placement> {
    check_point(d, p)?;
    if is_degenerate(d, dir, delta) {
        return Ok(Placement {
            kind: PlacementKind::WholeComponent,
            inclusion: Inclusion { rect: *d, orientation: dir, n_copies: 1, stretched: true },
            remainder: Vec::new(),
        });
    }
    Ok(band(d, p, dir, delta, literal))
}

/// Copies count `⌊δ / α⌋` with `α = ℓ_⊥ / ℓ_d`.
pub fn change1_copies(d: &Rect, dir: Direction, delta: f64) -> u32 {
    let alpha = d.side(dir.other()) / d.side(dir);
    ((delta / alpha).floor() as u32).max(1)
}

/// Band rule of Models A and B with the `Change1` degenerate branch.
pub fn place_change1(d: &Rect, p: Point, dir: Direction, delta: f64, literal: bool) -> Result<Placement> {
    check_point(d, p)?;
    if !is_degenerate(d, dir, delta) {
        return Ok(band(d, p, dir, delta, literal));
    }
    let n = change1_copies(d, dir, delta);
    let (rect, remainder) = blocks_along(d, p, dir, delta, n);
    Ok(Placement {
        kind: PlacementKind::NCopies { rect: corners(&rect), n },
        inclusion: Inclusion { rect, orientation: dir, n_copies: n, stretched: false },
        remainder,
    })
}

/// Which branch of the modified rule applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmodBranch {
    Band,
    Replace,
    Quadrant,
}

pub fn amod_branch(d: &Rect, dir: Direction, delta: f64) -> AmodBranch {
    let ld = d.side(dir);
    let lp = d.side(dir.other());
    if ld < 0.5 * lp / delta {
        AmodBranch::Band
    } else if delta * ld > 2.0 * lp {
        AmodBranch::Replace
    } else {
        AmodBranch::Quadrant
    }
}

fn replace(d: &Rect, p: Point, dir: Direction, delta: f64) -> Placement {
    let (rect, remainder) = blocks_along(d, p, dir, delta, 1);
    Placement {
        kind: PlacementKind::Band { rect: corners(&rect) },
        inclusion: Inclusion { rect, orientation: dir, n_copies: 1, stretched: false },
        remainder,
    }
}

/// Rule of the modified Model A.
pub fn place_amod(d: &Rect, p: Point, dir: Direction, delta: f64, literal: bool) -> Result<Placement> {
    check_point(d, p)?;
    match amod_branch(d, dir, delta) {
        AmodBranch::Band => Ok(band(d, p, dir, delta, literal)),
        AmodBranch::Replace => Ok(replace(d, p, dir, delta)),
        AmodBranch::Quadrant => {
            let quads = d.quadrants();
            let qi = d.quadrant_of(p);
            let q = quads[qi];
            let inner = if delta * q.side(dir) <= q.side(dir.other()) {
                band(&q, p, dir, delta, literal)
            } else {
                replace(&q, p, dir, delta)
            };
            let mut remainder = Vec::with_capacity(5);
            for (i, r) in quads.iter().enumerate() {
                if i == qi {
                    remainder.extend(inner.remainder.iter().copied());
                } else {
                    remainder.push(*r);
                }
            }
            Ok(Placement {
                kind: PlacementKind::QuadrantBand { quadrant: qi as u8, rect: corners(&inner.inclusion.rect) },
                inclusion: inner.inclusion,
                remainder,
            })
        }
    }
}

/// Long side of the largest building block the rule could insert into `d`
/// for some point and direction.
pub fn max_block_length(d: &Rect, delta: f64, rule: DegenerateRule, amod: bool) -> f64 {
    [Direction::E1, Direction::E2]
        .into_iter()
        .map(|dir| {
            let ld = d.side(dir);
            let lp = d.side(dir.other());
            if amod {
                match amod_branch(d, dir, delta) {
                    AmodBranch::Band => ld,
                    AmodBranch::Replace => lp / delta,
                    AmodBranch::Quadrant => {
                        let (qd, qp) = (0.5 * ld, 0.5 * lp);
                        if delta * qd <= qp {
                            qd
                        } else {
                            qp / delta
                        }
                    }
                }
            } else if !is_degenerate(d, dir, delta) {
                ld
            } else {
                match rule {
                    DegenerateRule::Original => d.long_side(),
                    DegenerateRule::Change1 => lp / delta,
                }
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Rect, b: [f64; 4]) -> bool {
        [a.x0, a.y0, a.x1, a.y1].iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn centered_and_flush_bands() {
        let u = Rect::unit();
        let pl = place_basic(&u, Point::new(0.5, 0.5), Direction::E1, 0.4, false).unwrap();
        assert!(close(&pl.inclusion.rect, [0.0, 0.3, 1.0, 0.7]));
        assert_eq!(pl.remainder.len(), 2);
        let pl = place_basic(&u, Point::new(0.5, 0.05), Direction::E1, 0.4, false).unwrap();
        assert!(close(&pl.inclusion.rect, [0.0, 0.0, 1.0, 0.4]));
        assert_eq!(pl.remainder.len(), 1);
        assert!(close(&pl.remainder[0], [0.0, 0.4, 1.0, 1.0]));
    }

    #[test]
    fn degenerate_whole_component() {
        let d = Rect::new(0.0, 0.0, 1.0, 0.3);
        let pl = place_basic(&d, Point::new(0.5, 0.1), Direction::E1, 0.4, false).unwrap();
        assert_eq!(pl.kind, PlacementKind::WholeComponent);
        assert!(pl.remainder.is_empty());
    }

    #[test]
    fn boundary_point_rejected() {
        let u = Rect::unit();
        assert!(place_basic(&u, Point::new(0.0, 0.5), Direction::E1, 0.4, false).is_err());
    }
}
