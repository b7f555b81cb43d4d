//! Length-scale statistics: aspect-ratio buckets, log-binned histograms,
//! power-law fits and the two-scale combination law.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fragment::SimResult;
use crate::geometry::{rect_class, BucketParams, Rect};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub params: BucketParams,
    pub volumes: BTreeMap<i64, f64>,
    pub total: f64,
}

pub fn bucket_volumes<'a>(rects: impl IntoIterator<Item = &'a Rect>, bp: &BucketParams) -> BucketStats {
    let mut volumes = BTreeMap::new();
    let mut total = 0.0;
    for r in rects {
        let a = r.area();
        *volumes.entry(rect_class(r, bp)).or_insert(0.0) += a;
        total += a;
    }
    BucketStats { params: *bp, volumes, total }
}

/// Share of the volume in classes `j ≤ j1`.
pub fn tail_fraction(bs: &BucketStats, j1: i64) -> f64 {
    if bs.total <= 0.0 {
        return 0.0;
    }
    let tail: f64 = bs.volumes.range(..=j1).fold(0.0, |acc, (_, v)| acc + v);
    (tail / bs.total).min(1.0)
}

/// Largest `J₁ < 0` with `C λ^{J₁} / (1 - λ⁻¹) ≤ target`.
pub fn tail_class_bound(c: f64, lambda: f64, target: f64) -> i64 {
    let mut j = -1i64;
    while c * lambda.powi(j as i32) / (1.0 - 1.0 / lambda) > target {
        j -= 1;
    }
    j
}

pub fn write_buckets<W: Write>(mut w: W, bs: &BucketStats) -> Result<()> {
    writeln!(w, "class,volume")?;
    for (j, v) in &bs.volumes {
        writeln!(w, "{j},{v}")?;
    }
    Ok(())
}

/// Log-spaced bin layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins_per_decade: u32,
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec { lo: 1e-4, hi: 1.0, bins_per_decade: 20 }
    }
}

impl BinSpec {
    pub fn edges(&self) -> Result<Vec<f64>> {
        if !(self.lo > 0.0 && self.hi > self.lo && self.bins_per_decade > 0) {
            return Err(Error::InvalidParameter(format!("bad bin layout {self:?}")));
        }
        let n = ((self.hi / self.lo).log10() * self.bins_per_decade as f64).round().max(1.0) as usize;
        let ratio = (self.hi / self.lo).ln() / n as f64;
        let mut edges: Vec<f64> = (0..n).map(|i| self.lo * (ratio * i as f64).exp()).collect();
        edges.push(self.hi);
        Ok(edges)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
    /// Values outside `[first edge, last edge)`.
    pub dropped: u64,
}

impl Histogram {
    pub fn new(bin_edges: Vec<f64>) -> Result<Self> {
        if bin_edges.len() < 2 || bin_edges.windows(2).any(|w| !(w[1] > w[0])) || !(bin_edges[0] > 0.0) {
            return Err(Error::InvalidParameter("bin edges must be positive and strictly increasing".into()));
        }
        let n = bin_edges.len() - 1;
        Ok(Histogram { bin_edges, counts: vec![0; n], total: 0, dropped: 0 })
    }

    pub fn from_spec(spec: &BinSpec) -> Result<Self> {
        Histogram::new(spec.edges()?)
    }

    pub fn add(&mut self, x: f64) {
        self.add_count(x, 1);
    }

    pub fn add_count(&mut self, x: f64, count: u64) {
        let e = &self.bin_edges;
        if !(x >= e[0] && x < e[e.len() - 1]) {
            self.dropped += count;
            return;
        }
        let i = e.partition_point(|&b| b <= x) - 1;
        self.counts[i] += count;
        self.total += count;
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.bin_edges[i + 1] - self.bin_edges[i]
    }

    /// Geometric bin center.
    pub fn center(&self, i: usize) -> f64 {
        (self.bin_edges[i] * self.bin_edges[i + 1]).sqrt()
    }

    pub fn density(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.width(i)
    }

    /// Adds another histogram on the same edges.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.bin_edges != other.bin_edges {
            return Err(Error::InvalidParameter("cannot merge histograms with different edges".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        self.dropped += other.dropped;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_lo,bin_hi,count,density")?;
        for i in 0..self.n_bins() {
            writeln!(w, "{},{},{},{}", self.bin_edges[i], self.bin_edges[i + 1], self.counts[i], self.density(i))?;
        }
        Ok(())
    }
}

pub fn length_histogram(lengths: impl IntoIterator<Item = f64>, spec: &BinSpec) -> Result<Histogram> {
    let mut h = Histogram::from_spec(spec)?;
    let mut any = false;
    for x in lengths {
        any = true;
        h.add(x);
    }
    if !any {
        return Err(Error::InsufficientData("no lengths to bin".into()));
    }
    Ok(h)
}

/// Long sides of all building blocks inserted during a run, one entry per copy.
pub fn inclusion_lengths(res: &SimResult) -> impl Iterator<Item = f64> + '_ {
    res.state
        .placed
        .iter()
        .flat_map(|b| std::iter::repeat(b.inclusion.copy_length()).take(b.inclusion.n_copies as usize))
}

/// Quantity regressed against the bin center.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Counts divided by bin width.
    CountDensity,
    /// Counts per log-spaced bin, i.e. the density in `log x`.
    #[default]
    RawCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub amplitude: f64,
    pub exponent: f64,
    pub fit_lo: f64,
    pub fit_hi: f64,
    pub r_squared: f64,
    pub n_bins: usize,
}

/// Least squares of `log y` against `log x` over bins with centers in
/// `[fit_lo, fit_hi]` and nonzero counts; `y ≈ C x^{-α}`.
pub fn fit_power_law(h: &Histogram, fit_lo: f64, fit_hi: f64, mode: FitMode) -> Result<PowerLawFit> {
    let pts: Vec<(f64, f64)> = (0..h.n_bins())
        .filter(|&i| h.counts[i] > 0 && h.center(i) >= fit_lo && h.center(i) <= fit_hi)
        .map(|i| {
            let y = match mode {
                FitMode::CountDensity => h.density(i),
                FitMode::RawCount => h.counts[i] as f64,
            };
            (h.center(i).ln(), y.ln())
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("{} usable bins in [{fit_lo}, {fit_hi}]", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    Ok(PowerLawFit { amplitude: intercept.exp(), exponent: -slope, fit_lo, fit_hi, r_squared, n_bins: pts.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Outer,
    Inner,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedExponent {
    pub exponent: f64,
    pub branch: Branch,
}

/// For `f(y) = y^α` and `g(x) = x^β` on `(0, 1]`, `∫ f(y) g(x/y) dy` behaves
/// like `max{x^{α+1}, x^β}` as `x → 0`; the smaller exponent dominates.
pub fn combine_distributions(alpha_outer: f64, beta_inner: f64) -> CombinedExponent {
    let a = alpha_outer + 1.0;
    if (a - beta_inner).abs() <= 1e-12 {
        CombinedExponent { exponent: beta_inner, branch: Branch::Tie }
    } else if a < beta_inner {
        CombinedExponent { exponent: a, branch: Branch::Outer }
    } else {
        CombinedExponent { exponent: beta_inner, branch: Branch::Inner }
    }
}

/// `x^β (1 - x^{α+1-β}) / (α + 1 - β)`, the exact convolution of pure powers.
pub fn convolution_closed_form(alpha: f64, beta: f64, x: f64) -> f64 {
    let e = alpha + 1.0 - beta;
    x.powf(beta) * (1.0 - x.powf(e)) / e
}

fn log_interp(h: &Histogram, x: f64) -> f64 {
    let n = h.n_bins();
    let centers: Vec<f64> = (0..n).map(|i| h.center(i)).collect();
    let idx = centers.partition_point(|&c| c <= x).clamp(1, n - 1);
    let (x0, x1) = (centers[idx - 1], centers[idx]);
    let (y0, y1) = (h.density(idx - 1), h.density(idx));
    if y0 <= 0.0 || y1 <= 0.0 {
        return if (x - x0).abs() < (x - x1).abs() { y0 } else { y1 };
    }
    let t = (x / x0).ln() / (x1 / x0).ln();
    (y0.ln() + t * (y1 / y0).ln()).exp()
}

/// Numerical `h(x) = ∫_x^1 f(y) g(x/y) dy` from two length histograms,
/// evaluated at the centers of `f`'s bins.
///
/// `f` is integrated bin by bin (clipped to `y ≥ x`) at geometric midpoints;
/// `g` is interpolated linearly in log-log coordinates.
pub fn convolve_lengths(f: &Histogram, g: &Histogram) -> Vec<(f64, f64)> {
    (0..f.n_bins())
        .map(|j| {
            let x = f.center(j);
            let mut sum = 0.0;
            for i in 0..f.n_bins() {
                let lo = f.bin_edges[i].max(x);
                let hi = f.bin_edges[i + 1].min(1.0);
                if hi <= lo {
                    continue;
                }
                let y = (lo * hi).sqrt();
                sum += f.density(i) * log_interp(g, x / y) * (hi - lo);
            }
            (x, sum)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning_and_drops() {
        let mut h = Histogram::new(vec![0.01, 0.1, 1.0]).unwrap();
        h.add(0.5);
        h.add(1.0);
        h.add(0.001);
        assert_eq!(h.counts, vec![0, 1]);
        assert_eq!(h.total, 1);
        assert_eq!(h.dropped, 2);
    }

    #[test]
    fn combination_branches() {
        let c = combine_distributions(-1.0, -2.107);
        assert_eq!(c.exponent, -2.107);
        assert_eq!(c.branch, Branch::Inner);
        let c = combine_distributions(-1.5, 0.0);
        assert_eq!(c.exponent, -0.5);
        assert_eq!(c.branch, Branch::Outer);
        assert_eq!(combine_distributions(-2.0, -1.0).branch, Branch::Tie);
    }

    #[test]
    fn tail_bound_matches_known_value() {
        assert_eq!(tail_class_bound(100.0, 1.1, 0.1), -98);
    }
}
