//! Acceptance suite shared by `martensim verify` and the test harness.
//!
//! Each criterion returns a [`CriterionReport`] holding the measured values;
//! the suite passes when every gated criterion passes.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::blocks::{inner_lengths, BlockLibrary, Microstructure, Orientation};
use crate::error::{Error, Result};
use crate::fragment::io::{events_to_string, series_to_string};
use crate::fragment::population::run_weighted;
use crate::fragment::{
    contraction_a, contraction_b, run, Algorithm, DegenerateRule, SimConfig, Simulation, StepOutcome, StopRule,
};
use crate::geometry::{dyadic_diamond_packing, BucketParams, Rect, Shape};
use crate::render::{rasterize, write_ppm, ColorMap};
use crate::rng::{Purpose, Stream};
use crate::sobolev::{
    calibrate_bound_constant, fit_decay, gagliardo_seminorm, interpolation_bound, step_difference_series, step_field,
    FieldDiff, SobolevParams,
};
use crate::stats::{
    combine_distributions, convolution_closed_form, convolve_lengths, fit_power_law, inclusion_lengths, length_histogram,
    tail_class_bound, BinSpec, FitMode, Histogram,
};
use crate::wells::{make_boundary_data, Matrix2, WellSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Fast,
    Full,
}

/// Deliberate checker faults used to confirm that the suite can fail.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Faults {
    /// Replaces the Model A contraction constant.
    pub c_tilde_a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: String,
    /// Informational criteria do not affect the outcome.
    pub gated: bool,
    pub passed: bool,
    pub measured: Value,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionReport {
    /// One human-readable status line.
    pub fn line(&self) -> String {
        let tag = match (self.gated, self.passed) {
            (true, true) => "PASS",
            (true, false) => "FAIL",
            (false, true) => "INFO pass",
            (false, false) => "INFO fail",
        };
        format!("{tag} [{}] {}: {} ({:.1} s)", self.id, self.name, self.detail, self.seconds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub level: Level,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
}

pub const ALL: [u32; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

/// Runs the selected criteria in order.
pub fn run_suite(level: Level, faults: &Faults, only: &[u32]) -> Result<Report> {
    let mut criteria = Vec::new();
    for &id in only {
        criteria.push(run_criterion(id, level, faults)?);
    }
    let passed = criteria.iter().all(|c| c.passed || !c.gated);
    Ok(Report { level, passed, criteria })
}

pub fn run_criterion(id: u32, level: Level, faults: &Faults) -> Result<CriterionReport> {
    let t = Instant::now();
    let mut r = match id {
        1 => packing_exactness()?,
        2 => model_a_decay(level, faults)?,
        3 => model_b_decay(level, faults)?,
        4 => amod_control(level)?,
        5 => length_exponents(level)?,
        6 => inner_exponent()?,
        7 => combination_law()?,
        8 => sobolev_suite(level)?,
        9 => determinism()?,
        10 => geometry_invariants(level)?,
        _ => return Err(Error::InvalidParameter(format!("unknown criterion {id}"))),
    };
    r.seconds = t.elapsed().as_secs_f64();
    Ok(r)
}

fn report(id: u32, name: &str, gated: bool, passed: bool, measured: Value, detail: String) -> CriterionReport {
    CriterionReport { id, name: name.into(), gated, passed, measured, detail, seconds: 0.0 }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn ensemble<T: Send>(seeds: std::ops::Range<u64>, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    seeds.into_par_iter().map(f).collect()
}

fn volumes(cfg: &SimConfig, n_seeds: u64) -> Result<Vec<Vec<f64>>> {
    ensemble(0..n_seeds, |seed| Ok(run(&SimConfig { seed, ..cfg.clone() })?.volumes()))
}

fn packing_exactness() -> Result<CriterionReport> {
    let mut rows = Vec::new();
    let mut ok = true;
    for n in 0..=8u32 {
        let g = i64::from(n) + 1;
        let p = dyadic_diamond_packing(&Rect::unit(), g)?;
        let count = p.generation_counts[g as usize];
        let covered = p.covered_fraction();
        let expected = 1.0 - 0.5f64.powi(n as i32 + 2);
        let area: f64 = p.diamonds.iter().map(|d| d.area()).sum();
        let good = count == 8 << n && covered == expected && area == expected;
        ok &= good;
        rows.push(json!({"n": n, "count": count, "covered": covered, "diamond_area": area, "expected": expected}));
    }
    Ok(report(1, "packing exactness", true, ok, Value::Array(rows), "generation counts 8*2^N and coverage 1-2^(-N-2), N = 0..8, exact".into()))
}

fn model_a_decay(level: Level, faults: &Faults) -> Result<CriterionReport> {
    let n = if level == Level::Full { 200 } else { 60 };
    let cfg = SimConfig { algorithm: Algorithm::A, delta: 0.4, p: 0.5, stop: StopRule::MaxSteps(12), ..SimConfig::default() };
    let c = faults.c_tilde_a.unwrap_or_else(|| contraction_a(cfg.p, cfg.delta));
    let vols = volumes(&cfg, n)?;
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    let mut rows = Vec::new();
    for k in 1..=12usize {
        let xs: Vec<f64> = vols.iter().map(|v| v.get(k).copied().unwrap_or(*v.last().unwrap())).collect();
        let (m, se) = mean_se(&xs);
        let bound = c.powi(k as i32);
        ok &= m <= bound + 3.0 * se;
        worst = worst.max(m - bound - 3.0 * se);
        rows.push(json!({"k": k, "mean": m, "stderr": se, "bound": bound}));
    }
    let detail = format!("{n} seeds, c_A = {c}, worst margin mean - c^k - 3se = {worst:.3e}");
    Ok(report(2, "Model A volume decay", true, ok, json!({"c_tilde_a": c, "rows": rows}), detail))
}

fn model_b_decay(level: Level, faults: &Faults) -> Result<CriterionReport> {
    let n = if level == Level::Full { 200 } else { 60 };
    let cfg = SimConfig { algorithm: Algorithm::B, delta: 0.4, p: 0.5, stop: StopRule::MaxSteps(31), ..SimConfig::default() };
    let c = contraction_b(faults.c_tilde_a.unwrap_or_else(|| contraction_a(cfg.p, cfg.delta)));
    let vols = volumes(&cfg, n)?;
    let at = |v: &Vec<f64>, k: usize| v.get(k).copied().unwrap_or(*v.last().unwrap());
    let mut ok = true;
    let mut rows = Vec::new();
    for k in [1usize, 3, 7, 15] {
        let diff: Vec<f64> = vols.iter().map(|v| at(v, 2 * k + 1) - c * at(v, k)).collect();
        let (md, se) = mean_se(&diff);
        let (mk, _) = mean_se(&vols.iter().map(|v| at(v, k)).collect::<Vec<_>>());
        let (m2, _) = mean_se(&vols.iter().map(|v| at(v, 2 * k + 1)).collect::<Vec<_>>());
        ok &= md <= 3.0 * se;
        rows.push(json!({"k": k, "mean_k": mk, "mean_2k1": m2, "paired_stderr": se, "ratio": m2 / mk}));
    }
    let detail = format!("{n} seeds, c_B = {c:.5}, paired differences within 3 se");
    Ok(report(3, "Model B paired decay", true, ok, json!({"c_tilde_b": c, "rows": rows}), detail))
}

/// Constant of the tail estimate for the modified Model A.
pub const TAIL_CONSTANT: f64 = 100.0;

fn amod_control(level: Level) -> Result<CriterionReport> {
    let (n, steps, cap) = if level == Level::Full { (200, 200, 256) } else { (60, 80, 128) };
    let lambda = 1.1;
    let cfg = SimConfig { algorithm: Algorithm::Amod, delta: 0.1, p: 0.5, ..SimConfig::default() };
    let bp = BucketParams::snapped(lambda, cfg.delta)?;
    let j1 = tail_class_bound(TAIL_CONSTANT, lambda, 0.1);
    let runs = ensemble(0..n, |seed| run_weighted(&SimConfig { seed, ..cfg.clone() }, steps, cap, &bp))?;
    let at = |r: &Vec<crate::fragment::population::PopulationSnapshot>, k: usize| r.get(k).map_or(0.0, |s| s.volume);
    let mut max_tail = 0.0f64;
    for r in &runs {
        for s in r {
            if s.volume > 0.0 {
                max_tail = max_tail.max(s.tail(j1) / s.volume);
            }
        }
    }
    let mut lower_ok = true;
    let mut c_max = 0.0f64;
    let mut worst_lower = f64::INFINITY;
    for k in 0..steps as usize {
        let cur: Vec<f64> = runs.iter().map(|r| at(r, k)).collect();
        let next: Vec<f64> = runs.iter().map(|r| at(r, k + 1)).collect();
        let (mc, _) = mean_se(&cur);
        let (mn, _) = mean_se(&next);
        if mc <= 0.0 {
            break;
        }
        let diff: Vec<f64> = cur.iter().zip(&next).map(|(a, b)| b - 0.7 * a).collect();
        let (md, se) = mean_se(&diff);
        lower_ok &= md >= -3.0 * se;
        worst_lower = worst_lower.min(mn / mc);
        c_max = c_max.max(mn / mc);
    }
    let tail_ok = max_tail <= 0.1;
    let ok = tail_ok && lower_ok && c_max < 1.0;
    let detail = format!(
        "{n} seeds, {steps} steps, J1 = {j1}: max tail fraction {max_tail:.3e}, min ratio {worst_lower:.4}, measured c = {c_max:.4}"
    );
    let measured = json!({
        "j1": j1, "bucket_delta": bp.delta, "population_cap": cap,
        "max_tail_fraction": max_tail, "lower_bound_ok": lower_ok, "min_ratio": worst_lower, "c": c_max,
        "final_mean_volume": mean_se(&runs.iter().map(|r| at(r, steps as usize)).collect::<Vec<_>>()).0,
    });
    Ok(report(4, "A-mod two-sided control", true, ok, measured, detail))
}

/// Pooled inclusion-length histogram and covered fractions of `n` seeds.
pub fn pooled_lengths(cfg: &SimConfig, n: u64, spec: &BinSpec) -> Result<(Histogram, Vec<f64>)> {
    let runs = ensemble(0..n, |seed| {
        let res = run(&SimConfig { seed, ..cfg.clone() })?;
        let h = length_histogram(inclusion_lengths(&res), spec)?;
        Ok((h, 1.0 - res.state.volume))
    })?;
    let mut h = Histogram::from_spec(spec)?;
    let mut covered = Vec::new();
    for (hi, c) in runs {
        h.merge(&hi)?;
        covered.push(c);
    }
    Ok((h, covered))
}

/// Configuration of the length-statistics runs.
pub fn histogram_config(algorithm: Algorithm) -> SimConfig {
    SimConfig {
        algorithm,
        delta: 0.05,
        p: 0.5,
        stop: StopRule::MinLength(1e-2),
        degenerate_rule: DegenerateRule::Change1,
        ..SimConfig::default()
    }
}

fn length_exponents(_level: Level) -> Result<CriterionReport> {
    let spec = BinSpec::default();
    let mut ok = true;
    let mut parts = Vec::new();
    let mut measured = serde_json::Map::new();
    for (alg, target_exp, target_cov) in [(Algorithm::A, 1.486, 0.914), (Algorithm::B, 1.470, 0.926)] {
        let (h, covered) = pooled_lengths(&histogram_config(alg), 10, &spec)?;
        let fit = fit_power_law(&h, 1e-2, 1e-1, FitMode::RawCount)?;
        let dens = fit_power_law(&h, 1e-2, 1e-1, FitMode::CountDensity)?;
        let (cov, cov_se) = mean_se(&covered);
        let good = (fit.exponent - target_exp).abs() <= 0.15 && (cov - target_cov).abs() <= 0.02;
        ok &= good;
        parts.push(format!("{alg:?}: exponent {:.3} (target {target_exp}), covered {cov:.4} (target {target_cov})", fit.exponent));
        measured.insert(
            format!("{alg:?}"),
            json!({"exponent": fit.exponent, "r_squared": fit.r_squared, "amplitude": fit.amplitude,
                   "density_exponent": dens.exponent, "covered": cov, "covered_stderr": cov_se, "n_lengths": h.total}),
        );
    }
    Ok(report(5, "length-scale exponents", true, ok, Value::Object(measured), parts.join("; ")))
}

fn inner_exponent() -> Result<CriterionReport> {
    let wells = WellSet::default();
    let m = make_boundary_data(Matrix2::diag(0.939, 1.064), &wells)?;
    let lengths = inner_lengths(Orientation::Horizontal, &m, &wells, 0.05, 12, 12)?;
    let mut h = Histogram::from_spec(&BinSpec { lo: 1e-5, hi: 1.0, bins_per_decade: 20 })?;
    for (x, c) in lengths {
        h.add_count(x, c);
    }
    let fit = fit_power_law(&h, 3.5e-4, 1e-2, FitMode::RawCount)?;
    let dens = fit_power_law(&h, 3.5e-4, 1e-2, FitMode::CountDensity)?;
    let ok = fit.r_squared >= 0.95 && (fit.exponent - 2.107).abs() <= 0.3;
    let detail = format!(
        "exponent {:.3} (R^2 {:.4}), count-density exponent {:.3} (R^2 {:.4}), target 2.107 +- 0.3",
        fit.exponent, fit.r_squared, dens.exponent, dens.r_squared
    );
    let measured = json!({"exponent": fit.exponent, "r_squared": fit.r_squared,
                          "density_exponent": dens.exponent, "density_r_squared": dens.r_squared});
    Ok(report(6, "inner-block exponent", false, ok, measured, detail))
}

/// Histogram with expected counts of the density `scale × x^e` on its bins.
fn synthetic_histogram(e: f64, scale: f64, spec: &BinSpec) -> Result<Histogram> {
    let edges = spec.edges()?;
    let mut h = Histogram::new(edges.clone())?;
    for w in edges.windows(2) {
        let mass = if (e + 1.0).abs() < 1e-12 { (w[1] / w[0]).ln() } else { (w[1].powf(e + 1.0) - w[0].powf(e + 1.0)) / (e + 1.0) };
        h.add_count((w[0] * w[1]).sqrt(), (scale * mass).round() as u64);
    }
    Ok(h)
}

fn combination_law() -> Result<CriterionReport> {
    let (alpha, beta) = (-1.0, -2.107);
    let spec = BinSpec { lo: 1e-4, hi: 1.0, bins_per_decade: 20 };
    let (sf, sg) = (1e9, 1e9);
    let f = synthetic_histogram(alpha, sf, &spec)?;
    let g = synthetic_histogram(beta, sg, &spec)?;
    let mut worst = 0.0f64;
    for (x, hx) in convolve_lengths(&f, &g) {
        if !(1e-3..=1e-1).contains(&x) {
            continue;
        }
        let exact = convolution_closed_form(alpha, beta, x);
        worst = worst.max((hx / (sf * sg) / exact - 1.0).abs());
    }
    let comb = combine_distributions(alpha, beta);
    let ok = worst <= 0.02 && comb.exponent == beta;
    let detail = format!("max interior relative error {worst:.2e} on [1e-3, 1e-1], combined exponent {}", comb.exponent);
    Ok(report(7, "combined-distribution law", true, ok, json!({"max_rel_error": worst, "combined": comb}), detail))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            loop {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    return (x, 2.0 / ((1.0 - x * x) * dp * dp));
                }
            }
        })
        .collect()
}

fn composite(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize, gl: &[(f64, f64)]) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for i in 0..panels {
        let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
        for &(x, w) in gl {
            s += w * 0.5 * (hi - lo) * f(0.5 * (lo + hi) + 0.5 * (hi - lo) * x);
        }
    }
    s
}

/// Deterministic quadrature of the truncated Gagliardo integral of the field
/// equal to a matrix of norm `jump` on `x > 1/2` and zero on `x < 1/2` in the
/// unit square, in polar offsets `y - x = r(cos θ, sin θ)`:
/// `2 jump^p ∫∫ w₁(r cos θ) w₂(r sin θ) r^{-1-sp} dr dθ` with overlap
/// widths `w₁(a) = min(a, 1 - a)` and `w₂(b) = 1 - |b|`.
pub fn half_plane_oracle(jump: f64, sp: &SobolevParams, panels: usize) -> f64 {
    let sigma = sp.sp();
    let gl = gauss_legendre(8);
    let w1 = |a: f64| if a <= 0.0 || a >= 1.0 { 0.0 } else { a.min(1.0 - a) };
    let w2 = |b: f64| (1.0 - b.abs()).max(0.0);
    let inner = |th: f64| {
        let (c, s) = (th.cos(), th.sin().abs());
        let r_max = (1.0 / c).min(if s > 0.0 { 1.0 / s } else { f64::INFINITY });
        if r_max <= sp.r_min {
            return 0.0;
        }
        let g = |u: f64| {
            let r = u.exp();
            w1(r * c) * w2(r * s) * r.powf(-sigma)
        };
        let (lo, hi) = (sp.r_min.ln(), r_max.ln());
        let kink = (0.5 / c).ln();
        if kink > lo && kink < hi {
            composite(&g, lo, kink, panels, &gl) + composite(&g, kink, hi, panels, &gl)
        } else {
            composite(&g, lo, hi, panels, &gl)
        }
    };
    let q = std::f64::consts::FRAC_PI_4;
    let t2 = 2f64.atan();
    let cuts = [0.0, q, t2, 0.5 * std::f64::consts::PI - 1e-12];
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += composite(&inner, w[0], w[1], panels, &gl);
    }
    // symmetric in θ ↦ -θ, and both orders of the pair
    2.0 * 2.0 * jump.powf(sp.p) * total
}

fn half_plane_field(jump: f64) -> FieldDiff {
    FieldDiff::from_regions(
        Rect::unit(),
        &[(Shape::Rect(Rect::from_corners(0.5, 0.0, 1.0, 1.0)), Matrix2::new(jump, 0.0, 0.0, 0.0))],
    )
}

fn two_band_field() -> FieldDiff {
    let w = WellSet::default();
    FieldDiff::from_regions(
        Rect::unit(),
        &[
            (Shape::Rect(Rect::from_corners(0.0, 0.0, 0.5, 1.0)), w.f0()),
            (Shape::Rect(Rect::from_corners(0.5, 0.0, 1.0, 1.0)), w.f0_inv()),
        ],
    )
}

/// Random axis-aligned partitions of the unit square with random matrices.
fn random_partition_field(seed: u64) -> FieldDiff {
    let mut s = Stream::new(seed, Purpose::Calibration, 8, 0);
    let mut rects = vec![Rect::unit()];
    for _ in 0..12 {
        let i = (s.uniform() * rects.len() as f64) as usize % rects.len();
        let r = rects.swap_remove(i);
        let t = 0.2 + 0.6 * s.uniform();
        if s.coin() {
            let x = r.x0 + t * r.l1();
            rects.push(Rect::from_corners(r.x0, r.y0, x, r.y1));
            rects.push(Rect::from_corners(x, r.y0, r.x1, r.y1));
        } else {
            let y = r.y0 + t * r.l2();
            rects.push(Rect::from_corners(r.x0, r.y0, r.x1, y));
            rects.push(Rect::from_corners(r.x0, y, r.x1, r.y1));
        }
    }
    let regions: Vec<(Shape, Matrix2)> = rects
        .into_iter()
        .map(|r| {
            let m = if s.uniform() < 0.3 {
                Matrix2::ZERO
            } else {
                Matrix2::new(s.uniform() - 0.5, s.uniform() - 0.5, s.uniform() - 0.5, s.uniform() - 0.5)
            };
            (Shape::Rect(r), m)
        })
        .collect();
    FieldDiff::from_regions(Rect::unit(), &regions)
}

fn block_field(lib: &BlockLibrary, o: Orientation) -> FieldDiff {
    let b: Microstructure = (**lib.block(o)).clone();
    let bv = lib.zero_extended_jumps(o).total();
    FieldDiff::new(b, lib.boundary().matrix(), -1.0).with_bv_bound(bv)
}

/// Configuration of the step-difference ensemble.
pub fn sobolev_config() -> SimConfig {
    SimConfig { algorithm: Algorithm::A, delta: 0.4, p: 0.5, stop: StopRule::MaxSteps(11), ..SimConfig::default() }
}

fn sobolev_suite(level: Level) -> Result<CriterionReport> {
    let full = level == Level::Full;
    let n_mc = if full { 400_000 } else { 100_000 };
    let mut checks = serde_json::Map::new();
    let mut failed = Vec::new();

    // (a) zero field
    let zero = FieldDiff::from_regions(Rect::unit(), &[(Shape::Rect(Rect::unit()), Matrix2::ZERO)]);
    let sp = SobolevParams { s: 0.1, p: 1.0, r_min: 1e-4, n_samples: 10_000 };
    let g0 = gagliardo_seminorm(&zero, &sp, 1, 0)?;
    let i0 = interpolation_bound(&zero, sp.s, sp.p)?;
    let a_ok = g0.estimate == 0.0 && g0.stderr == 0.0 && g0.cutoff_bound == 0.0 && i0 == 0.0 && zero.lp_power(1.0) == 0.0;
    checks.insert("a_zero".into(), json!({"passed": a_ok, "estimate": g0.estimate, "interpolation": i0}));
    if !a_ok {
        failed.push("a");
    }

    // (b) scaling law on the model blocks, independent seeds per scale
    let cfg = sobolev_config();
    let lib = BlockLibrary::for_config(&cfg)?;
    let sp = SobolevParams { s: 0.1, p: 1.0, r_min: 1e-4, n_samples: n_mc };
    let mut b_ok = true;
    let mut rows = Vec::new();
    for o in [Orientation::Horizontal, Orientation::Vertical] {
        let v = block_field(&lib, o);
        let base = gagliardo_seminorm(&v, &sp, 11, 0)?;
        for (i, lam) in [0.5f64, 0.25].into_iter().enumerate() {
            let spl = SobolevParams { r_min: sp.r_min * lam, ..sp };
            let g = gagliardo_seminorm(&v.rescaled(lam), &spl, 12 + i as u64, 0)?;
            let f = lam.powf(2.0 - sp.sp());
            let z = (g.estimate - f * base.estimate) / (g.stderr.powi(2) + (f * base.stderr).powi(2)).sqrt();
            b_ok &= z.abs() <= 3.0;
            rows.push(json!({"orientation": o, "lambda": lam, "ratio": g.estimate / base.estimate, "expected": f, "z": z}));
        }
    }
    checks.insert("b_scaling".into(), json!({"passed": b_ok, "rows": rows}));
    if !b_ok {
        failed.push("b");
    }

    // (c) half-plane jump field against quadrature
    let spc = SobolevParams { s: 0.5, p: 1.0, r_min: 1e-3, n_samples: if full { 2_000_000 } else { 500_000 } };
    let q1 = half_plane_oracle(1.0, &spc, 40);
    let q2 = half_plane_oracle(1.0, &spc, 80);
    let g = gagliardo_seminorm(&half_plane_field(1.0), &spc, 21, 0)?;
    let z = (g.estimate - q2) / g.stderr;
    let c_ok = z.abs() <= 3.0 && (q1 - q2).abs() <= 1e-3 * g.stderr;
    checks.insert("c_oracle".into(), json!({"passed": c_ok, "oracle": q2, "oracle_coarse": q1, "estimate": g.estimate, "stderr": g.stderr, "z": z}));
    if !c_ok {
        failed.push("c");
    }

    // (d) interpolation bound on the field corpus
    let res = run(&SimConfig { seed: 5, ..cfg.clone() })?;
    let mut corpus: Vec<(String, FieldDiff)> = vec![
        ("two_band".into(), two_band_field()),
        ("half_plane".into(), half_plane_field(1.0)),
        ("block_h".into(), block_field(&lib, Orientation::Horizontal)),
        ("block_v".into(), block_field(&lib, Orientation::Vertical)),
        ("block_h_half".into(), block_field(&lib, Orientation::Horizontal).rescaled(0.5)),
    ];
    for k in 1..=4 {
        corpus.push((format!("step_{k}"), step_field(&res, &lib, k, k)));
    }
    for seed in 0..6 {
        corpus.push((format!("random_{seed}"), random_partition_field(seed)));
    }
    let mut d_ok = true;
    let mut rows = Vec::new();
    for (s, p) in [(0.1, 1.0), (0.2, 2.0)] {
        let spd = SobolevParams { s, p, r_min: 1e-4, n_samples: n_mc / 4 };
        for (i, (name, v)) in corpus.iter().enumerate() {
            let g = gagliardo_seminorm(v, &spd, 31, i as u64)?;
            let total = v.lp_power(p) + g.estimate - 3.0 * g.stderr;
            let bound = interpolation_bound(v, s, p)?.powf(p);
            d_ok &= bound >= total;
            rows.push(json!({"field": name, "s": s, "p": p, "bound_p": bound, "mc_total_minus_3se": total}));
        }
    }
    checks.insert("d_interpolation".into(), json!({"passed": d_ok, "rows": rows}));
    if !d_ok {
        failed.push("d");
    }

    // (e) decay of the Model A step-difference series, and the per-step bound
    let n_seeds = if full { 40 } else { 12 };
    let spe = SobolevParams { s: 0.1, p: 1.0, r_min: 1e-4, n_samples: 20_000 };
    let held_out = run(&SimConfig { seed: 1_000_000, ..cfg.clone() })?;
    let c = calibrate_bound_constant(&step_difference_series(&held_out, &lib, &spe, 1.0, 1_000_000)?);
    let margin = 2.0;
    let series = ensemble(0..n_seeds, |seed| {
        let r = run(&SimConfig { seed, ..cfg.clone() })?;
        step_difference_series(&r, &lib, &spe, c, seed)
    })?;
    let mut means = [0.0f64; 11];
    let mut bound_ok = true;
    let mut worst = 0.0f64;
    for s in &series {
        for r in &s.rows {
            if (r.k as usize) < means.len() {
                means[r.k as usize] += r.norm(spe.p) / n_seeds as f64;
            }
            if r.bound_rhs > 0.0 {
                worst = worst.max(r.norm_power() / r.bound_rhs);
            }
            bound_ok &= r.norm_power() <= margin * r.bound_rhs;
        }
    }
    let pts: Vec<(f64, f64)> = means.iter().enumerate().map(|(k, m)| (k as f64, *m)).collect();
    let fit = fit_decay(&pts)?;
    let e_ok = fit.alpha > 0.0 && bound_ok;
    checks.insert(
        "e_decay".into(),
        json!({"passed": e_ok, "alpha": fit.alpha, "r_squared": fit.r_squared, "mean_norms": means,
               "bound_constant": c, "margin": margin, "worst_ratio": worst, "bound_ok": bound_ok}),
    );
    if !e_ok {
        failed.push("e");
    }

    let ok = failed.is_empty();
    let detail = if ok {
        format!("all five checks pass; decay rate {:.3}, bound constant {c:.3}", fit.alpha)
    } else {
        format!("failed checks: {}", failed.join(", "))
    };
    Ok(report(8, "Sobolev property suite", true, ok, Value::Object(checks), detail))
}

/// Byte outputs of one run used for determinism comparisons.
fn artifacts() -> Result<Vec<Vec<u8>>> {
    let mut out = Vec::new();
    for alg in [Algorithm::A, Algorithm::B, Algorithm::Amod] {
        let cfg = SimConfig { algorithm: alg, seed: 7, delta: 0.3, stop: StopRule::MaxSteps(if alg == Algorithm::B { 60 } else { 5 }), ..SimConfig::default() };
        let res = run(&cfg)?;
        out.push(events_to_string(&res.events).into_bytes());
        out.push(series_to_string(&res.series).into_bytes());
        if alg == Algorithm::A {
            let lib = BlockLibrary::for_config(&cfg)?;
            let img = rasterize(&lib.simulation_microstructure(&res), 96, 96, &ColorMap::default())?;
            let mut ppm = Vec::new();
            write_ppm(&mut ppm, &img)?;
            out.push(ppm);
            let sp = SobolevParams { n_samples: 50_000, ..SobolevParams::default() };
            let g = gagliardo_seminorm(&step_field(&res, &lib, 1, 2), &sp, 3, 0)?;
            out.push(serde_json::to_vec(&g)?);
        }
    }
    let (h, _) = pooled_lengths(&SimConfig { delta: 0.1, stop: StopRule::MinLength(0.05), ..histogram_config(Algorithm::A) }, 3, &BinSpec::default())?;
    let mut csv = Vec::new();
    h.write_csv(&mut csv)?;
    out.push(csv);
    Ok(out)
}

fn with_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(pool.install(f))
}

fn determinism() -> Result<CriterionReport> {
    let a = with_threads(1, artifacts)??;
    let b = with_threads(1, artifacts)??;
    let c = with_threads(4, artifacts)??;
    let same_runs = a == b;
    let same_threads = a == c;
    let bytes: usize = a.iter().map(Vec::len).sum();
    let ok = same_runs && same_threads;
    let detail = format!("{} artifacts ({bytes} bytes): repeat identical {same_runs}, 1 vs 4 threads identical {same_threads}", a.len());
    Ok(report(9, "determinism", true, ok, json!({"artifacts": a.len(), "bytes": bytes, "repeat": same_runs, "threads": same_threads}), detail))
}

/// Invariant violations found while stepping `cfg` to the end.
pub fn check_invariants(cfg: &SimConfig) -> Result<Vec<String>> {
    let mut sim = Simulation::new(cfg.clone())?;
    let mut errs = Vec::new();
    loop {
        if let StopRule::MaxSteps(n) = cfg.stop {
            if sim.state.k >= n {
                break;
            }
        }
        let n_events = sim.events.len();
        let n_placed = sim.state.placed.len();
        if sim.step()? == StepOutcome::Converged {
            break;
        }
        let k = sim.state.k;
        let st = &sim.state;
        let placed = st.placed_area();
        if (st.volume + placed - 1.0).abs() > 1e-9 {
            errs.push(format!("step {k}: volume {} + placed {placed} != 1", st.volume));
        }
        if (st.audited_volume() - st.volume).abs() > 1e-9 {
            errs.push(format!("step {k}: component areas {} != tracked volume {}", st.audited_volume(), st.volume));
        }
        for (e, b) in sim.events[n_events..].iter().zip(&st.placed[n_placed..]) {
            let parent = st.records[e.component_id as usize].rect;
            if !parent.strictly_contains(crate::geometry::Point::new(e.point[0], e.point[1])) {
                errs.push(format!("step {k}: point outside component {}", e.component_id));
            }
            if !parent.contains_rect(&b.inclusion.rect) {
                errs.push(format!("step {k}: block outside component {}", e.component_id));
            }
            let children: f64 = st.records.iter().filter(|r| r.parent == Some(e.component_id)).map(|r| r.rect.area()).sum();
            if (children + b.inclusion.rect.area() - parent.area()).abs() > 1e-12 * parent.area().max(1e-300) + 1e-15 {
                errs.push(format!("step {k}: split of component {} does not conserve area", e.component_id));
            }
        }
        let mut rects: Vec<Rect> = st.components().map(|c| c.rect).collect();
        for r in &rects {
            if !r.is_valid() || !Rect::unit().contains_rect(r) {
                errs.push(format!("step {k}: invalid component {r:?}"));
            } else if !r.strictly_contains(r.center()) {
                errs.push(format!("step {k}: component {r:?} has no interior sample point"));
            }
        }
        rects.sort_by(|a, b| a.x0.total_cmp(&b.x0));
        for i in 0..rects.len() {
            for j in i + 1..rects.len() {
                if rects[j].x0 >= rects[i].x1 {
                    break;
                }
                if rects[i].overlap(&rects[j]) > 1e-12 {
                    errs.push(format!("step {k}: components overlap"));
                }
            }
        }
        if errs.len() > 20 {
            break;
        }
    }
    Ok(errs)
}

/// Fuzzed configuration for seed `seed` and case `case` (algorithm × rule).
pub fn fuzz_config(seed: u64, case: usize) -> SimConfig {
    let mut s = Stream::new(seed, Purpose::Calibration, 10, case as u64);
    let algorithm = [Algorithm::A, Algorithm::B, Algorithm::Amod][case % 3];
    let degenerate_rule = [DegenerateRule::Original, DegenerateRule::Change1][case / 3];
    let delta = 0.05 + 0.45 * s.uniform();
    let p = if algorithm == Algorithm::Amod { 0.5 } else { 0.1 + 0.8 * s.uniform() };
    let stop = match (algorithm, seed % 2) {
        (Algorithm::B, 0) => StopRule::MaxSteps(150),
        (_, 0) => StopRule::MaxSteps(6),
        _ => StopRule::MinLength(0.15 + 0.2 * s.uniform()),
    };
    SimConfig { algorithm, delta, p, seed, stop, degenerate_rule, ..SimConfig::default() }
}

fn geometry_invariants(level: Level) -> Result<CriterionReport> {
    let n = if level == Level::Full { 50 } else { 15 };
    let cases: Vec<(u64, usize)> = (0..n).flat_map(|s| (0..6).map(move |c| (s, c))).collect();
    let errs: Vec<(SimConfig, Vec<String>)> = cases
        .par_iter()
        .map(|&(s, c)| {
            let cfg = fuzz_config(s, c);
            check_invariants(&cfg).map(|e| (cfg, e))
        })
        .collect::<Result<_>>()?;
    let bad: Vec<String> = errs
        .iter()
        .filter(|(_, e)| !e.is_empty())
        .map(|(c, e)| format!("{:?}/{:?} seed {}: {}", c.algorithm, c.degenerate_rule, c.seed, e[0]))
        .collect();
    let ok = bad.is_empty();
    let detail = format!("{} runs ({n} seeds x 3 algorithms x 2 rules), {} with violations", cases.len(), bad.len());
    Ok(report(10, "geometry invariants", true, ok, json!({"runs": cases.len(), "violations": bad}), detail))
}
