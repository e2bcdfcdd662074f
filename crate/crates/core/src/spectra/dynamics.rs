//! Extremal-value statistics of orbits: the sup and tail-sup functionals on
//! section orbits, the reduction of a flow observable to a section function
//! by maximizing along flow segments, sampled spectrum reports with gap
//! structure, and the membership test for the regular function class (unique
//! maximizer with transverse derivatives).

use crate::error::{Error, Result};
use crate::geo::{f_factor, flight_time, g_fiber, l_map, poincare, GeoParams};
use crate::spectra::{Obs3, SectionFn};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Orbits this close to the leaf x = 0 are treated as singular.
pub const SINGULAR_ORBIT_TOL: f64 = 1e-10;
/// Fraction of the orbit that feeds the tail-sup functional by default.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.25;
/// Time for the excursion outside the linearized region, section to section.
pub const EXTERIOR_TRANSIT: f64 = 1.0;
/// Iterates used when pushing tangent frames onto invariant directions.
const DIRECTION_STEPS: usize = 20;
/// Burn-in applied to sampled seeds before functionals are recorded.
const SAMPLE_BURN_IN: usize = 64;

fn orbit_step(p: &GeoParams, x: f64, y: f64) -> Result<(f64, f64)> {
    if x.abs() < SINGULAR_ORBIT_TOL {
        return Err(Error::SingularLeaf(format!(
            "orbit reached |x| = {:.3e} < {SINGULAR_ORBIT_TOL:.0e}",
            x.abs()
        )));
    }
    poincare(p, x, y)
}

/// Sup and tail-sup of an observable along one finite section orbit.
///
/// `tail_start` is the first index of the tail window; the tail always holds
/// at least two samples, so the two functionals are never trivially equal by
/// window collapse.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OrbitSpectrumSample {
    pub seed: (f64, f64),
    pub m_value: f64,
    pub l_value: f64,
    pub horizon: usize,
    pub tail_start: usize,
}

/// Evaluates the observable along the orbit of `seed` through `horizon`
/// returns. The sup functional maximizes over all `horizon + 1` points, the
/// tail functional over the final `tail_fraction` of them.
pub fn orbit_functionals(
    p: &GeoParams,
    f: &SectionFn,
    seed: (f64, f64),
    horizon: usize,
    tail_fraction: f64,
) -> Result<OrbitSpectrumSample> {
    if horizon < 100 {
        return Err(Error::domain(format!("horizon must be at least 100, got {horizon}")));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 0.5) {
        return Err(Error::domain(format!(
            "tail_fraction must lie in (0, 1/2], got {tail_fraction}"
        )));
    }
    let (x0, y0) = seed;
    if x0.abs() > 0.5 || y0.abs() > 0.5 {
        return Err(Error::domain(format!("seed ({x0}, {y0}) outside the section square")));
    }
    let count = horizon + 1;
    let tail_len = ((tail_fraction * count as f64).ceil() as usize).clamp(2, count);
    let tail_start = count - tail_len;

    let (mut x, mut y) = seed;
    let mut m_value = f64::NEG_INFINITY;
    let mut l_value = f64::NEG_INFINITY;
    for t in 0..count {
        if x.abs() < SINGULAR_ORBIT_TOL {
            return Err(Error::SingularLeaf(format!(
                "orbit hit |x| = {:.3e} at step {t}",
                x.abs()
            )));
        }
        let v = f.eval(x, y);
        m_value = m_value.max(v);
        if t >= tail_start {
            l_value = l_value.max(v);
        }
        if t + 1 < count {
            (x, y) = orbit_step(p, x, y)?;
        }
    }
    debug_assert!(l_value <= m_value);
    debug_assert!(tail_start < horizon);
    Ok(OrbitSpectrumSample { seed, m_value, l_value, horizon, tail_start })
}

/// Total time from a section point back to the section: the interior flight
/// plus the fixed exterior excursion.
pub fn return_time(p: &GeoParams, x: f64) -> Result<f64> {
    Ok(flight_time(p, x)? + EXTERIOR_TRANSIT)
}

fn golden_max<F: Fn(f64) -> f64>(g: &F, mut a: f64, mut b: f64) -> f64 {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let mut fc = g(c);
    let mut fd = g(d);
    for _ in 0..80 {
        if fc < fd {
            a = c;
            c = d;
            fc = fd;
            d = a + R * (b - a);
            fd = g(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - R * (b - a);
            fc = g(c);
        }
    }
    g(0.5 * (a + b)).max(fc).max(fd)
}

/// Dense sampling on [a, b] followed by a golden-section polish of the best
/// bracket. Never returns less than the best raw sample.
fn sample_and_refine<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64, n: usize) -> f64 {
    if !(b > a) {
        return g(a);
    }
    let h = (b - a) / n as f64;
    let mut best = g(a);
    let mut best_i = 0usize;
    for i in 1..=n {
        let v = g(a + h * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let lo = a + h * best_i.saturating_sub(1) as f64;
    let hi = a + h * (best_i + 1).min(n) as f64;
    best.max(golden_max(g, lo, hi))
}

/// Maximum of a flow observable along the full return segment of `(x, y)`:
/// the linearized interior phase (x e^{l1 t}, y e^{l2 t}, e^{l3 t}) for
/// t in [0, tau], then the exterior excursion interpolated as a straight
/// segment from the exit face to the landing point over one time unit.
pub fn max_f_reduction(
    p: &GeoParams,
    obs: &Obs3,
    x: f64,
    y: f64,
    quadrature_steps: usize,
) -> Result<f64> {
    if quadrature_steps < 16 {
        return Err(Error::domain(format!(
            "quadrature_steps must be at least 16, got {quadrature_steps}"
        )));
    }
    if x.abs() < SINGULAR_ORBIT_TOL {
        return Err(Error::SingularLeaf(format!("|x| = {:.3e} is on the singular leaf", x.abs())));
    }
    if y.abs() > 0.5 {
        return Err(Error::domain(format!("y = {y} outside the section square")));
    }
    let tau = flight_time(p, x)?;
    let interior = |t: f64| {
        obs.eval([
            x * (p.lambda1 * t).exp(),
            y * (p.lambda2 * t).exp(),
            (p.lambda3 * t).exp(),
        ])
    };
    let best_interior = sample_and_refine(&interior, 0.0, tau, quadrature_steps);

    let exit = l_map(p, x, y)?;
    let landing = [f_factor(p, x)?, g_fiber(p, x, y)?, 1.0];
    let exterior = |s: f64| {
        obs.eval([
            exit[0] + s * (landing[0] - exit[0]),
            exit[1] + s * (landing[1] - exit[1]),
            exit[2] + s * (landing[2] - exit[2]),
        ])
    };
    let best_exterior = sample_and_refine(&exterior, 0.0, 1.0, quadrature_steps);
    Ok(best_interior.max(best_exterior))
}

/// Max of the flow observable over the suspension orbit of `seed` through
/// `horizon` returns: walks the orbit segment by segment.
pub fn flow_max_sample(
    p: &GeoParams,
    obs: &Obs3,
    seed: (f64, f64),
    horizon: usize,
    quadrature_steps: usize,
) -> Result<f64> {
    let (mut x, mut y) = seed;
    let mut best = f64::NEG_INFINITY;
    for t in 0..=horizon {
        best = best.max(max_f_reduction(p, obs, x, y, quadrature_steps)?);
        if t < horizon {
            (x, y) = orbit_step(p, x, y)?;
        }
    }
    Ok(best)
}

/// Same quantity computed on the section side: collect the orbit first, then
/// maximize the reduced observable over its points. Equals
/// [`flow_max_sample`] on the same seed because both maximize the same
/// per-segment values.
pub fn discrete_max_sample(
    p: &GeoParams,
    obs: &Obs3,
    seed: (f64, f64),
    horizon: usize,
    quadrature_steps: usize,
) -> Result<f64> {
    let mut points = Vec::with_capacity(horizon + 1);
    let (mut x, mut y) = seed;
    for t in 0..=horizon {
        points.push((x, y));
        if t < horizon {
            (x, y) = orbit_step(p, x, y)?;
        }
    }
    let values = points
        .par_iter()
        .map(|&(px, py)| max_f_reduction(p, obs, px, py, quadrature_steps))
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Which orbit functional a spectrum report collects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Functional {
    /// Sup over the whole orbit segment.
    Sup,
    /// Sup over the trailing window only.
    TailSup,
}

/// Sampled spectrum: one functional value per surviving seed, sorted, with
/// the adjacent-gap structure and maximal runs of gaps below the threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub functional: Functional,
    pub seeds: usize,
    pub failures: usize,
    pub horizon: usize,
    pub values: Vec<f64>,
    /// gaps[0] = 0; gaps[i] = values[i] - values[i-1].
    pub gaps: Vec<f64>,
    /// Five times the median positive gap; 0 when every value coincides.
    pub gap_threshold: f64,
    /// Maximal runs of consecutive values with gaps at or below the
    /// threshold, as (run min, run max). Disjoint by construction.
    pub clusters: Vec<(f64, f64)>,
}

/// Samples the spectrum of the chosen orbit functional over random seeds.
/// Seed i draws from stream i of a ChaCha8 generator keyed by `rng_seed`, so
/// the report is reproducible bit for bit and independent of thread count.
pub fn spectrum_sample(
    p: &GeoParams,
    f: &SectionFn,
    functional: Functional,
    seeds: usize,
    horizon: usize,
    rng_seed: u64,
) -> Result<SpectrumReport> {
    if seeds < 100 {
        return Err(Error::domain(format!("seeds must be at least 100, got {seeds}")));
    }
    let results: Vec<Option<f64>> = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(i as u64);
            let mut x = 0.0f64;
            for _ in 0..64 {
                let c: f64 = rng.random_range(-0.5..0.5);
                if c.abs() >= 1e-6 {
                    x = c;
                    break;
                }
            }
            if x == 0.0 {
                return None;
            }
            let mut y: f64 = rng.random_range(-0.5..0.5);
            for _ in 0..SAMPLE_BURN_IN {
                match orbit_step(p, x, y) {
                    Ok(next) => (x, y) = next,
                    Err(_) => return None,
                }
            }
            match orbit_functionals(p, f, (x, y), horizon, DEFAULT_TAIL_FRACTION) {
                Ok(s) => Some(match functional {
                    Functional::Sup => s.m_value,
                    Functional::TailSup => s.l_value,
                }),
                Err(_) => None,
            }
        })
        .collect();

    let failures = results.iter().filter(|r| r.is_none()).count();
    if failures * 2 > seeds {
        return Err(Error::Sampling(format!(
            "{failures} of {seeds} seeds hit the singular leaf"
        )));
    }
    let mut values: Vec<f64> = results.into_iter().flatten().collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("functional values are finite"));

    let mut gaps = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        gaps.push(if i == 0 { 0.0 } else { v - values[i - 1] });
    }
    let mut positive: Vec<f64> = gaps.iter().copied().filter(|g| *g > 0.0).collect();
    positive.sort_by(|a, b| a.partial_cmp(b).expect("gaps are finite"));
    let gap_threshold = if positive.is_empty() {
        0.0
    } else {
        let n = positive.len();
        let median = if n % 2 == 1 {
            positive[n / 2]
        } else {
            0.5 * (positive[n / 2 - 1] + positive[n / 2])
        };
        5.0 * median
    };

    let mut clusters = Vec::new();
    if !values.is_empty() {
        let mut run_start = values[0];
        let mut prev = values[0];
        for i in 1..values.len() {
            if gaps[i] > gap_threshold {
                clusters.push((run_start, prev));
                run_start = values[i];
            }
            prev = values[i];
        }
        clusters.push((run_start, prev));
    }

    Ok(SpectrumReport {
        functional,
        seeds,
        failures,
        horizon,
        values,
        gaps,
        gap_threshold,
        clusters,
    })
}

impl SpectrumReport {
    /// CSV with header `value,gap`, one row per sorted sample.
    pub fn write_csv(&self, path: &Path, provenance: Option<&str>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        if let Some(line) = provenance {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "value,gap")?;
        for (v, g) in self.values.iter().zip(&self.gaps) {
            writeln!(w, "{v},{g}")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Derivative of the one-dimensional factor and the fiber partials, as the
/// tangent matrix of the return map at an off-leaf point.
fn tangent(p: &GeoParams, x: f64, y: f64) -> [[f64; 2]; 2] {
    let ax = x.abs();
    let fp = p.theta * p.alpha * ax.powf(p.alpha - 1.0);
    let gx = p.g_gain * y * p.beta * ax.powf(p.beta - 1.0) * x.signum();
    let gy = p.g_gain * ax.powf(p.beta);
    [[fp, 0.0], [gx, gy]]
}

fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn normalize(v: (f64, f64)) -> Option<(f64, f64)> {
    let n = (v.0 * v.0 + v.1 * v.1).sqrt();
    if n.is_finite() && n > 0.0 {
        Some((v.0 / n, v.1 / n))
    } else {
        None
    }
}

/// Top left-singular direction and minimal right-singular direction of a
/// 2x2 matrix, via the eigenstructure of M^T M.
fn svd2(m: [[f64; 2]; 2]) -> (Option<(f64, f64)>, Option<(f64, f64)>) {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let p11 = a * a + c * c;
    let p12 = a * b + c * d;
    let p22 = b * b + d * d;
    let tr = p11 + p22;
    let disc = ((p11 - p22).powi(2) + 4.0 * p12 * p12).sqrt();
    let l_max = 0.5 * (tr + disc);
    let v_max = if p12.abs() > f64::MIN_POSITIVE {
        normalize((p12, l_max - p11))
    } else if p11 >= p22 {
        Some((1.0, 0.0))
    } else {
        Some((0.0, 1.0))
    };
    let v_max = match v_max {
        Some(v) => v,
        None => return (None, None),
    };
    let v_min = (-v_max.1, v_max.0);
    let u_top = normalize((a * v_max.0 + b * v_max.1, c * v_max.0 + d * v_max.1));
    (u_top, Some(v_min))
}

/// Inverse of the one-dimensional factor on one branch, if `v` lies in that
/// branch's value range.
fn factor_inverse(p: &GeoParams, v: f64, positive: bool) -> Option<f64> {
    let half_pow = 0.5f64.powf(p.alpha);
    if positive {
        let (lo, hi) = (p.f_offset_pos, p.theta * half_pow + p.f_offset_pos);
        if v < lo - 1e-12 || v > hi + 1e-12 {
            return None;
        }
        let ax = (((v - p.f_offset_pos) / p.theta).max(0.0)).powf(1.0 / p.alpha);
        Some(ax.min(0.5))
    } else {
        let (lo, hi) = (-p.theta * half_pow + p.f_offset_neg, p.f_offset_neg);
        if v < lo - 1e-12 || v > hi + 1e-12 {
            return None;
        }
        let ax = (((p.f_offset_neg - v) / p.theta).max(0.0)).powf(1.0 / p.alpha);
        Some(-ax.min(0.5))
    }
}

/// Membership report for the regular function class: unique sampled
/// maximizer plus nonvanishing derivatives of the return-composed observable
/// along the estimated stable and unstable directions.
#[derive(Debug, Clone, Serialize)]
pub struct H1Report {
    pub member: bool,
    pub max_value: f64,
    pub maximizer: (f64, f64),
    pub maximizer_index: usize,
    /// Sample points whose value ties the max within the grid resolution but
    /// sit farther than the resolution away from the maximizer.
    pub tie_count: usize,
    pub stable_dir: (f64, f64),
    pub unstable_dir: (f64, f64),
    pub d_stable: Option<f64>,
    pub d_unstable: Option<f64>,
    pub reasons: Vec<String>,
}

const DERIV_FLOOR: f64 = 1e-8;

/// Tests whether `f` behaves like a regular observable on the sampled
/// invariant set: the sampled maximum must be attained at a single point up
/// to `grid_res`, and f composed with the return map must have derivatives
/// above 1e-8 in magnitude along both invariant directions there.
///
/// A tie at grid resolution is reported as non-membership with diagnostics,
/// not as an error.
pub fn h1_membership(
    p: &GeoParams,
    f: &SectionFn,
    sample: &[(f64, f64)],
    grid_res: f64,
) -> Result<H1Report> {
    if sample.len() < 1000 {
        return Err(Error::InsufficientData(format!(
            "need at least 1000 sample points, got {}",
            sample.len()
        )));
    }
    if !(grid_res > 0.0 && grid_res.is_finite()) {
        return Err(Error::domain(format!("grid_res must be positive, got {grid_res}")));
    }
    let mut best = 0usize;
    let mut max_value = f64::NEG_INFINITY;
    for (i, &(x, y)) in sample.iter().enumerate() {
        let v = f.eval(x, y);
        if v > max_value {
            max_value = v;
            best = i;
        }
    }
    let z = sample[best];
    let mut tie_count = 0usize;
    for (i, &(x, y)) in sample.iter().enumerate() {
        if i == best {
            continue;
        }
        let v = f.eval(x, y);
        let dist = ((x - z.0).powi(2) + (y - z.1).powi(2)).sqrt();
        if v >= max_value - grid_res && dist > grid_res {
            tie_count += 1;
        }
    }

    let mut reasons = Vec::new();
    let (stable_dir, unstable_dir) = invariant_directions(p, z, &mut reasons);
    let d_stable = directional_derivative(p, f, z, stable_dir, &mut reasons);
    let d_unstable = directional_derivative(p, f, z, unstable_dir, &mut reasons);

    if tie_count > 0 {
        reasons.push(format!(
            "{tie_count} sample points tie the maximum within grid_res = {grid_res}"
        ));
    }
    let derivs_ok = matches!(d_stable, Some(d) if d.abs() > DERIV_FLOOR)
        && matches!(d_unstable, Some(d) if d.abs() > DERIV_FLOOR);
    if !derivs_ok {
        reasons.push("a directional derivative is below 1e-8 or unavailable".to_string());
    }
    Ok(H1Report {
        member: tie_count == 0 && derivs_ok,
        max_value,
        maximizer: z,
        maximizer_index: best,
        tie_count,
        stable_dir,
        unstable_dir,
        d_stable,
        d_unstable,
        reasons,
    })
}

/// Stable direction from the forward tangent product at `z`, unstable from
/// the tangent product along a reconstructed backward chain. The backward
/// x-chain picks the larger-|x| preimage at each step (always defined); its
/// fiber coordinates are rebuilt by pushing an arbitrary fiber value forward
/// through the contracting fiber map, which converges geometrically.
fn invariant_directions(
    p: &GeoParams,
    z: (f64, f64),
    reasons: &mut Vec<String>,
) -> ((f64, f64), (f64, f64)) {
    // forward product for the stable direction
    let mut m_fwd = [[1.0, 0.0], [0.0, 1.0]];
    let (mut x, mut y) = z;
    let mut steps = 0;
    for _ in 0..DIRECTION_STEPS {
        if x.abs() < SINGULAR_ORBIT_TOL {
            break;
        }
        m_fwd = mat_mul(tangent(p, x, y), m_fwd);
        match poincare(p, x, y) {
            Ok(next) => (x, y) = next,
            Err(_) => break,
        }
        steps += 1;
    }
    let stable = if steps >= 5 {
        match svd2(m_fwd).1 {
            Some(v) => v,
            None => {
                reasons.push("degenerate forward tangent product; stable direction defaulted to the fiber".to_string());
                (0.0, 1.0)
            }
        }
    } else {
        reasons.push(format!(
            "forward orbit usable for only {steps} steps; stable direction defaulted to the fiber"
        ));
        (0.0, 1.0)
    };

    // backward chain for the unstable direction
    let chain_len = DIRECTION_STEPS + 30;
    let mut xs = Vec::with_capacity(chain_len);
    let mut cur = z.0;
    for _ in 0..chain_len {
        let candidates = [factor_inverse(p, cur, true), factor_inverse(p, cur, false)];
        let pick = candidates
            .into_iter()
            .flatten()
            .max_by(|a, b| a.abs().partial_cmp(&b.abs()).expect("finite preimages"));
        match pick {
            Some(px) if px.abs() >= SINGULAR_ORBIT_TOL => {
                xs.push(px);
                cur = px;
            }
            _ => break,
        }
    }
    let unstable = if xs.len() >= DIRECTION_STEPS {
        // xs[k] is the x-coordinate k+1 steps back; rebuild fibers forward
        let mut ys = vec![0.0; xs.len()];
        for j in (0..xs.len() - 1).rev() {
            ys[j] = match g_fiber(p, xs[j + 1], ys[j + 1]) {
                Ok(v) => v,
                Err(_) => 0.0,
            };
        }
        let mut m_back = [[1.0, 0.0], [0.0, 1.0]];
        for k in 0..DIRECTION_STEPS {
            m_back = mat_mul(m_back, tangent(p, xs[k], ys[k]));
        }
        match svd2(m_back).0 {
            Some(u) => u,
            None => {
                reasons.push("degenerate backward tangent product; unstable direction defaulted to the base".to_string());
                (1.0, 0.0)
            }
        }
    } else {
        reasons.push(format!(
            "backward chain terminated after {} steps; unstable direction defaulted to the base",
            xs.len()
        ));
        (1.0, 0.0)
    };
    (stable, unstable)
}

/// Central difference of f composed with the return map at `z` along `e`.
fn directional_derivative(
    p: &GeoParams,
    f: &SectionFn,
    z: (f64, f64),
    e: (f64, f64),
    reasons: &mut Vec<String>,
) -> Option<f64> {
    let mut h = 1e-6;
    for _ in 0..2 {
        let plus = (z.0 + h * e.0, z.1 + h * e.1);
        let minus = (z.0 - h * e.0, z.1 - h * e.1);
        let crosses = plus.0.signum() != minus.0.signum()
            || plus.0.abs() < SINGULAR_ORBIT_TOL
            || minus.0.abs() < SINGULAR_ORBIT_TOL;
        let outside = plus.0.abs() > 0.5
            || plus.1.abs() > 0.5
            || minus.0.abs() > 0.5
            || minus.1.abs() > 0.5;
        if crosses || outside {
            h *= 1e-3;
            continue;
        }
        let fp = poincare(p, plus.0, plus.1);
        let fm = poincare(p, minus.0, minus.1);
        match (fp, fm) {
            (Ok(a), Ok(b)) => return Some((f.eval(a.0, a.1) - f.eval(b.0, b.1)) / (2.0 * h)),
            _ => {
                h *= 1e-3;
                continue;
            }
        }
    }
    reasons.push(format!(
        "directional derivative at ({}, {}) along ({}, {}) could not be evaluated",
        z.0, z.1, e.0, e.1
    ));
    None
}
