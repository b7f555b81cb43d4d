//! Two-by-two gradients, the two-well set and rank-one splitting.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Tolerance used for hull membership and determinant checks.
pub const HULL_TOL: f64 = 1e-9;

/// Row-major 2x2 matrix, serialized as `[a11, a12, a21, a22]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Matrix2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl From<[f64; 4]> for Matrix2 {
    fn from(a: [f64; 4]) -> Self {
        Matrix2::new(a[0], a[1], a[2], a[3])
    }
}

impl From<Matrix2> for [f64; 4] {
    fn from(m: Matrix2) -> Self {
        m.to_array()
    }
}

impl Matrix2 {
    pub const ZERO: Matrix2 = Matrix2 { a11: 0.0, a12: 0.0, a21: 0.0, a22: 0.0 };
    pub const IDENTITY: Matrix2 = Matrix2 { a11: 1.0, a12: 0.0, a21: 0.0, a22: 1.0 };

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Matrix2 { a11, a12, a21, a22 }
    }

    pub const fn diag(d1: f64, d2: f64) -> Self {
        Matrix2::new(d1, 0.0, 0.0, d2)
    }

    /// Tensor product `a ⊗ n`.
    pub fn outer(a: [f64; 2], n: [f64; 2]) -> Self {
        Matrix2::new(a[0] * n[0], a[0] * n[1], a[1] * n[0], a[1] * n[1])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a11, self.a12, self.a21, self.a22]
    }

    pub fn det(self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn transpose(self) -> Self {
        Matrix2::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn scale(self, s: f64) -> Self {
        Matrix2::new(s * self.a11, s * self.a12, s * self.a21, s * self.a22)
    }

    pub fn frobenius(self) -> f64 {
        (self.a11 * self.a11 + self.a12 * self.a12 + self.a21 * self.a21 + self.a22 * self.a22)
            .sqrt()
    }

    pub fn column(self, j: usize) -> [f64; 2] {
        match j {
            0 => [self.a11, self.a21],
            _ => [self.a12, self.a22],
        }
    }

    pub fn apply(self, v: [f64; 2]) -> [f64; 2] {
        [self.a11 * v[0] + self.a12 * v[1], self.a21 * v[0] + self.a22 * v[1]]
    }

    /// Right Cauchy-Green tensor `GᵀG`.
    pub fn cauchy_green(self) -> Self {
        self.transpose() * self
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

impl Add for Matrix2 {
    type Output = Matrix2;
    fn add(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(self.a11 + o.a11, self.a12 + o.a12, self.a21 + o.a21, self.a22 + o.a22)
    }
}

impl Sub for Matrix2 {
    type Output = Matrix2;
    fn sub(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(self.a11 - o.a11, self.a12 - o.a12, self.a21 - o.a21, self.a22 - o.a22)
    }
}

impl Mul for Matrix2 {
    type Output = Matrix2;
    fn mul(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

/// Interface normal of a laminate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Normal {
    /// Normal `e2`: horizontal layers.
    E2,
    /// Normal `e1`: vertical layers.
    E1,
}

impl Normal {
    pub fn vector(self) -> [f64; 2] {
        match self {
            Normal::E2 => [0.0, 1.0],
            Normal::E1 => [1.0, 0.0],
        }
    }

    /// Unit vector along the layers.
    pub fn tangent(self) -> [f64; 2] {
        match self {
            Normal::E2 => [1.0, 0.0],
            Normal::E1 => [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Well {
    Plus,
    Minus,
}

/// `K = SO(2)F0 ∪ SO(2)F0⁻¹` with `F0 = [[1, γ], [0, 1]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellSet {
    gamma: f64,
}

impl WellSet {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        Ok(WellSet { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn f0(&self) -> Matrix2 {
        Matrix2::new(1.0, self.gamma, 0.0, 1.0)
    }

    pub fn f0_inv(&self) -> Matrix2 {
        Matrix2::new(1.0, -self.gamma, 0.0, 1.0)
    }

    pub fn well_matrix(&self, w: Well) -> Matrix2 {
        match w {
            Well::Plus => self.f0(),
            Well::Minus => self.f0_inv(),
        }
    }

    /// Cauchy-Green tensor shared by every element of the well.
    pub fn well_cauchy_green(&self, w: Well) -> Matrix2 {
        self.well_matrix(w).cauchy_green()
    }

    /// Distance from `g` to the wells measured on Cauchy-Green tensors.
    pub fn potential(&self, g: Matrix2) -> f64 {
        let c = g.cauchy_green();
        let dp = (c - self.well_cauchy_green(Well::Plus)).frobenius();
        let dm = (c - self.well_cauchy_green(Well::Minus)).frobenius();
        dp.min(dm)
    }

    /// The well whose Cauchy-Green tensor matches `g` within `tol`, if any.
    pub fn well_of(&self, g: Matrix2, tol: f64) -> Option<Well> {
        if (g.det() - 1.0).abs() > tol {
            return None;
        }
        let c = g.cauchy_green();
        [Well::Plus, Well::Minus]
            .into_iter()
            .find(|&w| (c - self.well_cauchy_green(w)).frobenius() <= tol)
    }

    /// Strict interior test for `det g = 1` matrices: `0 < C11 < 1`, `0 < C22 < 1 + γ²`.
    pub fn in_interior(&self, g: Matrix2) -> bool {
        let c = g.cauchy_green();
        let top = 1.0 + self.gamma * self.gamma;
        (g.det() - 1.0).abs() <= HULL_TOL
            && c.a11 > HULL_TOL
            && c.a11 < 1.0 - HULL_TOL
            && c.a22 > HULL_TOL
            && c.a22 < top - HULL_TOL
            && c.det() > 0.0
    }
}

impl Default for WellSet {
    fn default() -> Self {
        WellSet { gamma: 0.5 }
    }
}

/// Affine boundary datum, normalized to `det = 1` and strictly inside the hull.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    matrix: Matrix2,
}

impl BoundaryData {
    pub fn matrix(&self) -> Matrix2 {
        self.matrix
    }
}

/// Rescales the second row so that `det = 1` and checks strict hull membership.
///
/// Matrices already normalized to within `1e-14` are left untouched, which
/// makes the map idempotent bit for bit.
pub fn make_boundary_data(m: Matrix2, wells: &WellSet) -> Result<BoundaryData> {
    if !m.is_finite() {
        return Err(Error::InvalidParameter("non-finite boundary matrix".into()));
    }
    let det = m.det();
    if det <= 0.0 {
        return Err(Error::OutsideHull(format!("determinant {det} is not positive")));
    }
    let normalized = if (det - 1.0).abs() <= 1e-14 {
        m
    } else {
        Matrix2::new(m.a11, m.a12, m.a21 / det, m.a22 / det)
    };
    if !wells.in_interior(normalized) {
        let c = normalized.cauchy_green();
        return Err(Error::OutsideHull(format!(
            "C11 = {}, C22 = {} (need 0 < C11 < 1 and 0 < C22 < {})",
            c.a11,
            c.a22,
            1.0 + wells.gamma() * wells.gamma()
        )));
    }
    Ok(BoundaryData { matrix: normalized })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub plus: Matrix2,
    pub minus: Matrix2,
    /// Volume fraction of `plus`; `g = mu * plus + (1 - mu) * minus`.
    pub mu: f64,
}

/// Splits an interior gradient along `normal` into two gradients on the
/// first-order laminate curve, with strictly smaller potential.
pub fn lamination_split(g: Matrix2, normal: Normal, wells: &WellSet) -> Result<Split> {
    if !wells.in_interior(g) {
        return Err(Error::DegenerateSplit(
            "gradient is not in the open interior of the hull".into(),
        ));
    }
    rank_one_split(g, normal, wells)
}

/// Rank-one split of a `det = 1` gradient in the closed hull.
///
/// The shear `g(I + s t⊗n)` keeps the determinant and the Cauchy-Green
/// entry along the layers; the two shears are chosen so that the
/// complementary diagonal entry reaches its extreme value. Applied to a
/// point of a first-order laminate this lands exactly in the wells.
pub fn rank_one_split(g: Matrix2, normal: Normal, wells: &WellSet) -> Result<Split> {
    let c = g.cauchy_green();
    let g2 = wells.gamma() * wells.gamma();
    let (kept, target_sq) = match normal {
        Normal::E2 => (c.a11, c.a11 * (1.0 + g2) - 1.0),
        Normal::E1 => (c.a22, c.a22 - 1.0),
    };
    let limit = match normal {
        Normal::E2 => c.a11 <= 1.0 + HULL_TOL,
        Normal::E1 => c.a22 <= 1.0 + g2 + HULL_TOL,
    };
    if !limit || target_sq <= 0.0 {
        return Err(Error::DegenerateSplit(format!("no admissible split along {normal:?}")));
    }
    let z = target_sq.sqrt();
    if c.a12.abs() >= z - HULL_TOL {
        return Err(Error::DegenerateSplit(format!(
            "gradient already on the laminate curve for {normal:?}"
        )));
    }
    let s_plus = (z - c.a12) / kept;
    let s_minus = (-z - c.a12) / kept;
    let a = g.apply(normal.tangent());
    let n = normal.vector();
    let plus = g + Matrix2::outer(a, n).scale(s_plus);
    let minus = g + Matrix2::outer(a, n).scale(s_minus);
    let mu = -s_minus / (s_plus - s_minus);
    Ok(Split { plus, minus, mu })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Horizontal,
    Vertical,
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plus,
    Minus,
    None,
}

/// Tag attached to each region of a microstructure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GradientLabel {
    pub family: Family,
    pub variant: Variant,
    pub depth: u32,
}

impl GradientLabel {
    pub fn unresolved(depth: u32) -> Self {
        GradientLabel { family: Family::Unresolved, variant: Variant::None, depth }
    }

    pub fn resolved(family: Family, well: Well, depth: u32) -> Self {
        let variant = match well {
            Well::Plus => Variant::Plus,
            Well::Minus => Variant::Minus,
        };
        GradientLabel { family, variant, depth }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_m() -> BoundaryData {
        make_boundary_data(Matrix2::diag(0.939, 1.064), &WellSet::default()).unwrap()
    }

    #[test]
    fn wells_are_rank_one_connected() {
        let w = WellSet::default();
        let d = w.f0() - w.f0_inv();
        assert_eq!(d, Matrix2::outer([2.0 * 0.5, 0.0], [0.0, 1.0]));
        assert_eq!(w.potential(w.f0()), 0.0);
        assert_eq!(w.potential(w.f0_inv()), 0.0);
    }

    #[test]
    fn boundary_data_default() {
        let m = default_m().matrix();
        assert!((m.det() - 1.0).abs() < 1e-14);
        let c = m.cauchy_green();
        assert!((c.a11 - 0.8817).abs() < 1e-4);
        assert!((c.a22 - 1.1336).abs() < 1e-3);
        assert!((c.a22 - 1.0 / c.a11).abs() < 1e-9);
    }

    #[test]
    fn boundary_data_idempotent() {
        let w = WellSet::default();
        let once = default_m().matrix();
        let twice = make_boundary_data(once, &w).unwrap().matrix();
        assert_eq!(once.to_array().map(f64::to_bits), twice.to_array().map(f64::to_bits));
    }

    #[test]
    fn identity_is_outside_open_interior() {
        let w = WellSet::default();
        assert!(matches!(make_boundary_data(Matrix2::IDENTITY, &w), Err(Error::OutsideHull(_))));
        assert!(matches!(
            lamination_split(Matrix2::IDENTITY, Normal::E2, &w),
            Err(Error::DegenerateSplit(_))
        ));
        assert!(make_boundary_data(Matrix2::diag(-1.0, 1.0), &w).is_err());
    }

    #[test]
    fn two_level_split_reaches_wells() {
        let w = WellSet::default();
        let m = default_m().matrix();
        for first in [Normal::E2, Normal::E1] {
            let second = if first == Normal::E2 { Normal::E1 } else { Normal::E2 };
            let s = lamination_split(m, first, &w).unwrap();
            for g in [s.plus, s.minus] {
                assert!(w.potential(g) < w.potential(m));
                let t = rank_one_split(g, second, &w).unwrap();
                assert!(w.potential(t.plus) < 1e-12);
                assert!(w.potential(t.minus) < 1e-12);
                assert_eq!(w.well_of(t.plus, 1e-9), Some(Well::Plus));
                assert_eq!(w.well_of(t.minus, 1e-9), Some(Well::Minus));
            }
        }
    }
}
