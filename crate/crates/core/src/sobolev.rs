//! BV and fractional Sobolev norms of piecewise-constant matrix fields.
//!
//! The Gagliardo double integral is estimated by Monte Carlo. The first
//! point is drawn uniformly from the support `S` of the field and the second
//! one at distance `r ≥ r_min` with density `∝ r^{-1-sp}`. Pairs with both
//! points outside `S` contribute nothing and pairs with exactly one point in
//! `S` are reached from that point only, so they get weight two.

use std::io::Write;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{BlockLibrary, Microstructure, Node, Region};
use crate::error::{Error, Result};
use crate::fragment::{Algorithm, SimResult};
use crate::geometry::{Point, Rect, Shape};
use crate::interfaces::{Fill, Outside};
use crate::rng::{Purpose, Stream};
use crate::wells::{GradientLabel, Matrix2};

/// Samples per independently seeded chunk.
const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SobolevParams {
    pub s: f64,
    pub p: f64,
    pub r_min: f64,
    pub n_samples: u64,
}

impl Default for SobolevParams {
    fn default() -> Self {
        SobolevParams { s: 0.1, p: 1.0, r_min: 1e-4, n_samples: 200_000 }
    }
}

impl SobolevParams {
    pub fn sp(&self) -> f64 {
        self.s * self.p
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {}", self.s)));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must lie in [1, inf), got {}", self.p)));
        }
        if self.sp() >= 1.0 {
            return Err(Error::InvalidParameter(format!("s p = {} is not below 1", self.sp())));
        }
        if !(self.r_min > 0.0) {
            return Err(Error::InvalidParameter("r_min must be positive".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be positive".into()));
        }
        Ok(())
    }
}

/// Field `offset + scale × m(x)` on the support of a microstructure, zero
/// elsewhere in the support's domain.
#[derive(Debug, Clone)]
pub struct FieldDiff {
    support: Microstructure,
    offset: Matrix2,
    scale: f64,
    bv: OnceLock<f64>,
}

impl FieldDiff {
    pub fn new(support: Microstructure, offset: Matrix2, scale: f64) -> Self {
        FieldDiff { support, offset, scale, bv: OnceLock::new() }
    }

    /// Explicit regions with their matrices.
    pub fn from_regions(domain: Rect, regions: &[(Shape, Matrix2)]) -> Self {
        let nodes = regions
            .iter()
            .map(|&(shape, matrix)| Node::Leaf(Region { shape, label: GradientLabel::unresolved(0), matrix }))
            .collect();
        FieldDiff::new(Microstructure::new(domain, 0, nodes), Matrix2::ZERO, 1.0)
    }

    /// Replaces the exact interface term by a known upper bound.
    pub fn with_bv_bound(self, bv: f64) -> Self {
        let cell = OnceLock::new();
        let _ = cell.set(bv);
        FieldDiff { bv: cell, ..self }
    }

    /// The same field with geometry scaled by `lambda` about the origin.
    pub fn rescaled(&self, lambda: f64) -> FieldDiff {
        let map = crate::geometry::AxisMap { sx: lambda, sy: lambda, tx: 0.0, ty: 0.0 };
        let inner = std::sync::Arc::new(self.support.clone());
        let ms = Microstructure::new(map.rect(self.support.domain()), self.support.depth(), vec![Node::Instance { template: inner, map }]);
        let out = FieldDiff::new(ms, self.offset, self.scale);
        match self.bv.get() {
            Some(b) => out.with_bv_bound(b * lambda),
            None => out,
        }
    }

    pub fn domain(&self) -> &Rect {
        self.support.domain()
    }

    pub fn support(&self) -> &Microstructure {
        &self.support
    }

    fn value_of(&self, m: Matrix2) -> Matrix2 {
        self.offset + m.scale(self.scale)
    }

    /// Value at `p` and whether `p` lies in the support.
    pub fn value(&self, p: Point) -> (Matrix2, bool) {
        match self.support.locate(p) {
            Some((_, m)) => (self.value_of(m), true),
            None => (Matrix2::ZERO, false),
        }
    }

    pub fn support_area(&self) -> f64 {
        self.support.summary().area
    }

    pub fn sup_norm(&self) -> f64 {
        self.support.summary().by_matrix.iter().map(|&(m, _)| self.value_of(m).frobenius()).fold(0.0, f64::max)
    }

    /// `∫ |v|^p`.
    pub fn lp_power(&self, p: f64) -> f64 {
        self.support.summary().by_matrix.iter().map(|&(m, a)| a * self.value_of(m).frobenius().powf(p)).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.lp_power(1.0)
    }

    /// Total variation inside the domain, counting jumps to the zero
    /// extension across the boundary of the support.
    pub fn interface_term(&self) -> Result<f64> {
        if let Some(b) = self.bv.get() {
            return Ok(*b);
        }
        let j = self.support.interface_jumps(Fill::Zero, Outside::Ignore, &|m| self.value_of(m))?;
        Ok(*self.bv.get_or_init(|| j.total()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvNorm {
    /// `Σ length × |jump|` over internal interfaces.
    pub interface: f64,
    /// `∫ |v|`.
    pub l1: f64,
}

impl BvNorm {
    pub fn total(&self) -> f64 {
        self.interface + self.l1
    }
}

/// BV norm of a microstructure that tiles its domain.
pub fn bv_norm(ms: &Microstructure) -> Result<BvNorm> {
    let j = ms.interface_jumps(Fill::Error, Outside::Ignore, &|m| m)?;
    let l1 = ms.summary().by_matrix.iter().map(|&(m, a)| a * m.frobenius()).sum();
    Ok(BvNorm { interface: j.total(), l1 })
}

pub fn bv_norm_field(v: &FieldDiff) -> Result<BvNorm> {
    Ok(BvNorm { interface: v.interface_term()?, l1: v.l1_norm() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GagliardoEstimate {
    /// Estimate of the double integral over `|x - y| ≥ r_min`.
    pub estimate: f64,
    pub stderr: f64,
    /// Bound on the neglected part `|x - y| < r_min`.
    pub cutoff_bound: f64,
    pub n_samples: u64,
}

impl GagliardoEstimate {
    /// `estimate ± (3 stderr + cutoff_bound)`.
    pub fn interval(&self) -> (f64, f64) {
        let w = 3.0 * self.stderr + self.cutoff_bound;
        (self.estimate - w, self.estimate + w)
    }
}

/// Monte Carlo estimate of `∫∫_{Ω×Ω} |v(x) - v(y)|^p / |x - y|^{2+sp}`.
///
/// Samples come in chunks keyed by `(seed, tag, chunk)`, and chunk sums are
/// reduced in chunk order, so the result does not depend on the thread count.
pub fn gagliardo_seminorm(v: &FieldDiff, sp: &SobolevParams, seed: u64, tag: u64) -> Result<GagliardoEstimate> {
    sp.validate()?;
    let sigma = sp.sp();
    let domain = *v.domain();
    let diam = (domain.l1().powi(2) + domain.l2().powi(2)).sqrt();
    let cutoff_bound = cutoff_bound(v, sp)?;
    let area = v.support_area();
    if area <= 0.0 || v.sup_norm() == 0.0 || sp.r_min >= diam {
        return Ok(GagliardoEstimate { estimate: 0.0, stderr: 0.0, cutoff_bound, n_samples: sp.n_samples });
    }
    let a = sp.r_min.powf(-sigma);
    let b = diam.powf(-sigma);
    let z = (a - b) / sigma;
    let weight = area * z * std::f64::consts::TAU;
    let n_chunks = sp.n_samples.div_ceil(CHUNK);
    let sums: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut s = Stream::new(seed, Purpose::Sobolev, tag, c);
            let n = CHUNK.min(sp.n_samples - c * CHUNK);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let x = v.support.sample_point(&mut s);
                let r = (a - s.uniform() * (a - b)).powf(-1.0 / sigma);
                let th = std::f64::consts::TAU * s.uniform();
                let y = Point::new(x.x + r * th.cos(), x.y + r * th.sin());
                if !domain.contains(y) {
                    continue;
                }
                let (vx, _) = v.value(x);
                let (vy, in_s) = v.value(y);
                let d = (vx - vy).frobenius();
                if d == 0.0 {
                    continue;
                }
                let w = weight * d.powf(sp.p) * if in_s { 1.0 } else { 2.0 };
                s1 += w;
                s2 += w * w;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let n = sp.n_samples as f64;
    let mean = s1 / n;
    let var = ((s2 / n - mean * mean) * n / (n - 1.0).max(1.0)).max(0.0);
    Ok(GagliardoEstimate { estimate: mean, stderr: (var / n).sqrt(), cutoff_bound, n_samples: sp.n_samples })
}

/// `2π (2‖v‖_∞)^{p-1} |Dv| r_min^{1-sp} / (1 - sp)`, from
/// `∫ |v(x+h) - v(x)| dx ≤ |h| |Dv|` on a convex domain.
pub fn cutoff_bound(v: &FieldDiff, sp: &SobolevParams) -> Result<f64> {
    let sigma = sp.sp();
    let sup = v.sup_norm();
    if sup == 0.0 {
        return Ok(0.0);
    }
    let bv = v.interface_term()?;
    Ok(std::f64::consts::TAU * (2.0 * sup).powf(sp.p - 1.0) * bv * sp.r_min.powf(1.0 - sigma) / (1.0 - sigma))
}

/// Constant `C` with `‖v‖^p_{W^{s,p}} ≤ C ‖v‖_∞^{p-1} ‖v‖_1^{1-sp} ‖v‖_BV^{sp}`.
///
/// Splitting the double integral at `|x - y| = ρ` bounds the near part by
/// `2^{p-1} 2π |Dv| ρ^{1-sp}/(1-sp)` and the far part by
/// `2^p 2π ‖v‖_1 ρ^{-sp}/sp` (both times `‖v‖_∞^{p-1}`); the choice
/// `ρ = ‖v‖_1 / ‖v‖_BV` and `‖v‖_p^p ≤ ‖v‖_∞^{p-1}‖v‖_1` give the rest.
pub fn interpolation_constant(s: f64, p: f64) -> f64 {
    let sigma = s * p;
    1.0 + 2f64.powf(p - 1.0) * std::f64::consts::TAU * (1.0 / (1.0 - sigma) + 2.0 / sigma)
}

/// `‖v‖_∞^{1-1/p} (‖v‖_1^{1-sp} ‖v‖_BV^{sp})^{1/p}`, without the constant.
pub fn interpolation_rhs(v: &FieldDiff, s: f64, p: f64) -> Result<f64> {
    let sup = v.sup_norm();
    if sup == 0.0 {
        return Ok(0.0);
    }
    let bv = bv_norm_field(v)?;
    let sigma = s * p;
    Ok(sup.powf(1.0 - 1.0 / p) * (bv.l1.powf(1.0 - sigma) * bv.total().powf(sigma)).powf(1.0 / p))
}

/// Upper bound on `‖v‖_{W^{s,p}} = (‖v‖_p^p + [v]^p)^{1/p}`.
pub fn interpolation_bound(v: &FieldDiff, s: f64, p: f64) -> Result<f64> {
    if !(s > 0.0 && s * p < 1.0 && p >= 1.0) {
        return Err(Error::InvalidParameter(format!("need 0 < s p < 1 and p >= 1, got s = {s}, p = {p}")));
    }
    Ok(interpolation_constant(s, p).powf(1.0 / p) * interpolation_rhs(v, s, p)?)
}

/// One row of a step-difference series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub k: u64,
    /// `‖v_k‖_p^p`.
    pub lp_term: f64,
    pub gagliardo: GagliardoEstimate,
    /// `c 2^{k sp} (|V_k \ V_{k+1}|^{1-sp} + |V_k|^{1-sp})`.
    pub bound_rhs: f64,
    /// `|V_k|` and `|V_k \ V_{k+1}|`.
    pub volume: f64,
    pub removed: f64,
}

impl SeriesPoint {
    /// Estimate of `‖v_k‖^p_{W^{s,p}}`.
    pub fn norm_power(&self) -> f64 {
        self.lp_term + self.gagliardo.estimate
    }

    /// Upper end of the confidence interval of `‖v_k‖^p_{W^{s,p}}`.
    pub fn norm_power_upper(&self) -> f64 {
        self.lp_term + self.gagliardo.interval().1
    }

    pub fn norm(&self, p: f64) -> f64 {
        self.norm_power().max(0.0).powf(1.0 / p)
    }
}

/// Geometric fit `value ≈ amplitude × 2^{-alpha k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub alpha: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Least-squares fit of `log2 value` against `k`, ignoring non-positive values.
pub fn fit_decay(points: &[(f64, f64)]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(_, v)| *v > 0.0).map(|&(k, v)| (k, v.log2())).collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData(format!("{} positive points for a decay fit", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all points share one step index".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(DecayFit { alpha: -slope, amplitude: 2f64.powf(my - slope * mx), r_squared, n_points: pts.len() })
}

/// Step ranges `(first, last)` whose placements make up the `k`-th difference.
///
/// Model B uses the subsequence `y_{2^l - 1}`.
pub fn difference_steps(algorithm: Algorithm, n_steps: u64) -> Vec<(u64, u64)> {
    match algorithm {
        Algorithm::A | Algorithm::Amod => (1..=n_steps).map(|s| (s, s)).collect(),
        Algorithm::B => {
            let mut out = Vec::new();
            let mut lo = 1u64;
            while lo <= n_steps {
                out.push((lo, (2 * lo - 1).min(n_steps)));
                lo *= 2;
            }
            out
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSeries {
    pub params: SobolevParams,
    pub c: f64,
    pub rows: Vec<SeriesPoint>,
}

impl StepSeries {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,lp_term,gagliardo_estimate,stderr,cutoff_bound,bound_rhs")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.k, r.lp_term, r.gagliardo.estimate, r.gagliardo.stderr, r.gagliardo.cutoff_bound, r.bound_rhs
            )?;
        }
        Ok(())
    }

    /// Decay fit of the per-row norms for rows `k ≤ k_max`.
    pub fn decay(&self, k_max: u64) -> Result<DecayFit> {
        let pts: Vec<(f64, f64)> =
            self.rows.iter().filter(|r| r.k <= k_max).map(|r| (r.k as f64, r.norm(self.params.p))).collect();
        fit_decay(&pts)
    }
}

/// Field `M - ∇y` on the blocks placed during steps `first..=last`.
pub fn step_field(res: &SimResult, lib: &BlockLibrary, first: u64, last: u64) -> FieldDiff {
    let mut nodes = Vec::new();
    let mut bv = 0.0;
    for b in res.state.placed.iter().filter(|b| (first..=last).contains(&b.step)) {
        nodes.extend(lib.inclusion_nodes(&b.inclusion));
        bv += lib.inclusion_jumps(&b.inclusion);
    }
    let ms = Microstructure::new(Rect::unit(), lib.depth(), nodes);
    FieldDiff::new(ms, lib.boundary().matrix(), -1.0).with_bv_bound(bv)
}

/// `‖∇y_k - ∇y_{k+1}‖_{W^{s,p}}` estimates for every difference of a run.
///
/// Row `k` covers the placements turning `y_k` into `y_{k+1}` (for Model B
/// the subsequence `y_{2^k - 1}`). The interface term of each field is the
/// sum of the zero-extended block terms, an upper bound that is exact when
/// blocks do not touch.
pub fn step_difference_series(res: &SimResult, lib: &BlockLibrary, sp: &SobolevParams, c: f64, seed: u64) -> Result<StepSeries> {
    sp.validate()?;
    let sigma = sp.sp();
    let mut rows = Vec::new();
    for (k, (first, last)) in difference_steps(res.config.algorithm, res.state.k).into_iter().enumerate() {
        let v = step_field(res, lib, first, last);
        let volume = res.series[(first - 1) as usize].volume;
        let removed = volume - res.series[last as usize].volume;
        let gagliardo = gagliardo_seminorm(&v, sp, seed, k as u64)?;
        let k = k as u64;
        let bound_rhs = c * 2f64.powf(k as f64 * sigma) * (removed.max(0.0).powf(1.0 - sigma) + volume.powf(1.0 - sigma));
        rows.push(SeriesPoint { k, lp_term: v.lp_power(sp.p), gagliardo, bound_rhs, volume, removed });
    }
    Ok(StepSeries { params: *sp, c, rows })
}

/// Smallest `c` for which every row satisfies
/// `norm_power_upper ≤ c 2^{k sp}(|V_k \ V_{k+1}|^{1-sp} + |V_k|^{1-sp})`.
pub fn calibrate_bound_constant(series: &StepSeries) -> f64 {
    let sigma = series.params.sp();
    series
        .rows
        .iter()
        .map(|r| {
            let base = 2f64.powf(r.k as f64 * sigma) * (r.removed.max(0.0).powf(1.0 - sigma) + r.volume.powf(1.0 - sigma));
            if base > 0.0 {
                r.norm_power_upper() / base
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_band() -> FieldDiff {
        let f0 = Matrix2::new(1.0, 0.5, 0.0, 1.0);
        let f0_inv = Matrix2::new(1.0, -0.5, 0.0, 1.0);
        FieldDiff::from_regions(
            Rect::unit(),
            &[
                (Shape::Rect(Rect::from_corners(0.0, 0.0, 0.5, 1.0)), f0),
                (Shape::Rect(Rect::from_corners(0.5, 0.0, 1.0, 1.0)), f0_inv),
            ],
        )
    }

    #[test]
    fn two_band_interface_term_is_two_gamma() {
        let v = two_band();
        assert!((v.interface_term().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_field_has_zero_norms() {
        let v = FieldDiff::from_regions(Rect::unit(), &[(Shape::Rect(Rect::unit()), Matrix2::ZERO)]);
        let g = gagliardo_seminorm(&v, &SobolevParams::default(), 1, 0).unwrap();
        assert_eq!((g.estimate, g.stderr, g.cutoff_bound), (0.0, 0.0, 0.0));
        assert_eq!(interpolation_bound(&v, 0.1, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn sp_at_least_one_is_rejected() {
        let sp = SobolevParams { s: 0.6, p: 2.0, ..SobolevParams::default() };
        assert!(gagliardo_seminorm(&two_band(), &sp, 0, 0).is_err());
    }

    #[test]
    fn model_b_subsequence() {
        assert_eq!(difference_steps(Algorithm::B, 10), vec![(1, 1), (2, 3), (4, 7), (8, 10)]);
    }
}
