//! Piecewise-constant approximation of the absolutely continuous invariant
//! measure of the factor map, built the classical way: partition I into
//! equal bins, estimate the transfer operator by pushing subdivided bins
//! forward, and power-iterate to its fixed vector.
//!
//! Two residuals are reported. The iteration residual measures convergence
//! of the power iteration on the discretized operator. The invariance
//! residual applies the exact bin-to-bin transfer matrix (computed from the
//! closed-form branch inverses) to the fixed vector and is the honest
//! discretization error; it shrinks as bins double. Neither makes the
//! output rigorous, and nothing here claims it is.

use crate::error::{Error, Result};
use crate::interval::{Interval, I_LO};
use crate::one_d::{MapModel, Side};
use serde::Serialize;
use std::io::Write;

pub const MIN_BINS: usize = 64;
pub const MAX_BINS: usize = 1 << 20;
/// Subdivisions per bin when estimating the operator.
pub const BUILD_SUBDIV: usize = 32;
/// Power iteration stops below this L1 step change.
pub const ITERATION_TARGET: f64 = 1e-12;
/// Sweep cap; reaching it is a numeric error.
pub const SWEEP_CAP: usize = 100_000;

/// Fixed vector of the discretized transfer operator plus diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct MeasureApprox {
    pub bins: usize,
    /// Mass per bin, summing to 1.
    pub masses: Vec<f64>,
    /// Final L1 step change of the power iteration.
    pub iteration_residual: f64,
    /// L1 defect under the exact bin transfer matrix.
    pub invariance_residual: f64,
    pub sweeps: usize,
    /// Peak density max(mass) / bin width.
    pub c_density: f64,
}

/// Sparse column-stochastic operator: cols[j] lists (row, weight).
struct Operator {
    cols: Vec<Vec<(u32, f64)>>,
}

impl Operator {
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (j, col) in self.cols.iter().enumerate() {
            let mass = v[j];
            if mass == 0.0 {
                continue;
            }
            for &(row, w) in col {
                out[row as usize] += w * mass;
            }
        }
    }

    fn normalize_columns(&mut self) {
        for col in &mut self.cols {
            let s: f64 = col.iter().map(|&(_, w)| w).sum();
            if s > 0.0 {
                for e in col.iter_mut() {
                    e.1 /= s;
                }
            }
        }
    }
}

fn bin_index(x: f64, bins: usize) -> usize {
    let w = 1.0 / bins as f64;
    (((x - I_LO) / w).floor() as isize).clamp(0, bins as isize - 1) as usize
}

/// Distributes the interval [a, b] (weight `w`) over the bin grid
/// proportionally to overlap.
fn deposit(a: f64, b: f64, w: f64, bins: usize, into: &mut [f64]) {
    let width = 1.0 / bins as f64;
    let a = a.max(I_LO);
    let b = b.min(-I_LO);
    if b - a <= 0.0 {
        into[bin_index(0.5 * (a + b), bins)] += w;
        return;
    }
    let len = b - a;
    let (i0, i1) = (bin_index(a, bins), bin_index(b, bins));
    for i in i0..=i1 {
        let lo = I_LO + i as f64 * width;
        let overlap = (b.min(lo + width) - a.max(lo)).max(0.0);
        if overlap > 0.0 {
            into[i] += w * overlap / len;
        }
    }
}

/// Operator estimate from pushing `subdiv` slices of each bin forward.
fn build_quadrature(m: &MapModel, bins: usize, subdiv: usize) -> Operator {
    let width = 1.0 / bins as f64;
    let mut cols = Vec::with_capacity(bins);
    let mut acc = vec![0.0f64; bins];
    for j in 0..bins {
        acc.iter_mut().for_each(|x| *x = 0.0);
        let lo = I_LO + j as f64 * width;
        for s in 0..subdiv {
            let u = lo + s as f64 * width / subdiv as f64;
            let v = u + width / subdiv as f64;
            let side = Side::of(0.5 * (u + v));
            let fu = m.eval_closure(u, side);
            let fv = m.eval_closure(v, side);
            deposit(fu.min(fv), fu.max(fv), 1.0 / subdiv as f64, bins, &mut acc);
        }
        cols.push(
            acc.iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(i, &w)| (i as u32, w))
                .collect(),
        );
    }
    let mut op = Operator { cols };
    op.normalize_columns();
    op
}

/// Exact bin transfer matrix: entry (i, j) is |f^{-1}(bin_i) n bin_j| / |bin_j|,
/// with preimages from the closed-form branch inverses.
fn build_exact(m: &MapModel, bins: usize) -> Operator {
    let width = 1.0 / bins as f64;
    let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); bins];
    for i in 0..bins {
        let lo = I_LO + i as f64 * width;
        let target = Interval::new(lo, lo + width).expect("grid bin");
        for side in [Side::Neg, Side::Pos] {
            let pre = match m.branch_inverse_interval(&target, side) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let (j0, j1) = (bin_index(pre.lo(), bins), bin_index(pre.hi(), bins));
            for j in j0..=j1 {
                let blo = I_LO + j as f64 * width;
                let overlap = (pre.hi().min(blo + width) - pre.lo().max(blo)).max(0.0);
                if overlap > 0.0 {
                    cols[j].push((i as u32, overlap / width));
                }
            }
        }
    }
    let mut op = Operator { cols };
    op.normalize_columns();
    op
}

/// Builds the measure approximation on `bins` equal cells (a power of two,
/// at least 64, so the singularity falls on a cell edge).
pub fn ulam_measure(m: &MapModel, bins: usize) -> Result<MeasureApprox> {
    if bins < MIN_BINS || bins > MAX_BINS || !bins.is_power_of_two() {
        return Err(Error::domain(format!(
            "bins must be a power of two in [{MIN_BINS}, {MAX_BINS}], got {bins}"
        )));
    }
    let op = build_quadrature(m, bins, BUILD_SUBDIV);
    let mut v = vec![1.0 / bins as f64; bins];
    let mut next = vec![0.0f64; bins];
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    while residual > ITERATION_TARGET {
        if sweeps >= SWEEP_CAP {
            return Err(Error::Numeric(format!(
                "power iteration stalled at residual {residual:.3e} after {sweeps} sweeps"
            )));
        }
        op.apply(&v, &mut next);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        residual = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut v, &mut next);
        sweeps += 1;
    }

    let exact = build_exact(m, bins);
    exact.apply(&v, &mut next);
    let invariance_residual: f64 = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();

    let c_density = v.iter().cloned().fold(0.0, f64::max) * bins as f64;
    Ok(MeasureApprox {
        bins,
        masses: v,
        iteration_residual: residual,
        invariance_residual,
        sweeps,
        c_density,
    })
}

impl MeasureApprox {
    pub fn bin_width(&self) -> f64 {
        1.0 / self.bins as f64
    }

    /// Mass of an interval under the piecewise-constant density.
    pub fn measure_of(&self, iv: &Interval) -> f64 {
        let w = self.bin_width();
        let (i0, i1) = (bin_index(iv.lo(), self.bins), bin_index(iv.hi(), self.bins));
        let mut total = 0.0;
        for i in i0..=i1 {
            let lo = I_LO + i as f64 * w;
            let overlap = (iv.hi().min(lo + w) - iv.lo().max(lo)).max(0.0);
            total += self.masses[i] * overlap / w;
        }
        total
    }

    /// Point p in `iv` with measure([iv.lo, p]) = frac * measure(iv), found
    /// by bisection to a relative mass tolerance of 1e-6.
    pub fn quantile_in(&self, iv: &Interval, frac: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&frac) {
            return Err(Error::domain(format!("fraction {frac} outside [0, 1]")));
        }
        let total = self.measure_of(iv);
        if total <= 0.0 {
            return Err(Error::InsufficientData(format!(
                "interval {iv} carries no mass at {} bins",
                self.bins
            )));
        }
        let target = frac * total;
        let (mut lo, mut hi) = (iv.lo(), iv.hi());
        for _ in 0..200 {
            if hi - lo < 1e-15 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let mass = self.measure_of(&Interval::new(iv.lo(), mid).unwrap_or(*iv));
            if (mass - target).abs() <= 1e-6 * total {
                return Ok(mid);
            }
            if mass < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Density rows as `bin_lo,bin_hi,mass` CSV.
    pub fn write_density_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_lo,bin_hi,mass")?;
        let width = self.bin_width();
        for (i, mass) in self.masses.iter().enumerate() {
            let lo = I_LO + i as f64 * width;
            writeln!(w, "{},{},{}", lo, lo + width, mass)?;
        }
        Ok(())
    }
}

/// L1 distance between the densities of two approximations (bins of one
/// must refine the other).
pub fn density_l1(a: &MeasureApprox, b: &MeasureApprox) -> Result<f64> {
    let (coarse, fine) = if a.bins <= b.bins { (a, b) } else { (b, a) };
    if fine.bins % coarse.bins != 0 {
        return Err(Error::domain(format!(
            "grids {} and {} do not nest",
            coarse.bins, fine.bins
        )));
    }
    let ratio = fine.bins / coarse.bins;
    let wf = fine.bin_width();
    let mut total = 0.0;
    for (i, mf) in fine.masses.iter().enumerate() {
        let dc = coarse.masses[i / ratio] * coarse.bins as f64;
        let df = mf * fine.bins as f64;
        total += (dc - df).abs() * wf;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measure(bins: usize) -> MeasureApprox {
        ulam_measure(&MapModel::default(), bins).unwrap()
    }

    #[test]
    fn rejects_bad_bin_counts() {
        let m = MapModel::default();
        assert!(matches!(ulam_measure(&m, 100), Err(Error::Domain(_))));
        assert!(matches!(ulam_measure(&m, 32), Err(Error::Domain(_))));
    }

    #[test]
    fn masses_form_a_probability_vector() {
        let mu = measure(256);
        let total: f64 = mu.masses.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(mu.masses.iter().all(|&m| m >= 0.0));
        assert!(mu.iteration_residual < 1e-8);
        assert!(mu.c_density > 1.0, "peak density above uniform");
    }

    #[test]
    fn iteration_is_deterministic() {
        let a = measure(128);
        let b = measure(128);
        assert_eq!(a.sweeps, b.sweeps);
        assert!(a.masses.iter().zip(&b.masses).all(|(x, y)| x == y));
    }

    #[test]
    fn invariance_residual_shrinks_with_refinement() {
        let coarse = measure(128);
        let fine = measure(512);
        assert!(fine.invariance_residual < coarse.invariance_residual);
        assert!(coarse.invariance_residual < 0.05);
    }

    #[test]
    fn interval_masses_are_additive() {
        let mu = measure(256);
        assert!((mu.measure_of(&Interval::full()) - 1.0).abs() < 1e-12);
        let left = mu.measure_of(&Interval::left_half());
        let right = mu.measure_of(&Interval::new(0.0, 0.5).unwrap());
        assert!((left + right - 1.0).abs() < 1e-12);
        // symmetric map, symmetric measure
        assert!((left - right).abs() < 1e-6);
    }

    #[test]
    fn quantile_splits_mass_as_requested() {
        let mu = measure(256);
        let iv = Interval::new(-0.4, -0.1).unwrap();
        let total = mu.measure_of(&iv);
        for frac in [0.25, 0.5, 0.75] {
            let p = mu.quantile_in(&iv, frac).unwrap();
            let got = mu.measure_of(&Interval::new(iv.lo(), p).unwrap());
            assert!(
                (got - frac * total).abs() <= 2e-6 * total,
                "frac {frac}: {got} vs {}",
                frac * total
            );
        }
    }

    #[test]
    fn density_l1_detects_convergence() {
        let a = measure(128);
        let b = measure(256);
        let c = measure(512);
        let d_ab = density_l1(&a, &b).unwrap();
        let d_bc = density_l1(&b, &c).unwrap();
        assert!(d_bc < d_ab, "L1 gaps {d_ab} then {d_bc} should shrink");
        assert!(density_l1(&a, &a).unwrap() == 0.0);
    }

    #[test]
    fn csv_roundtrip_shape() {
        let mu = measure(64);
        let mut buf = Vec::new();
        mu.write_density_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("bin_lo,bin_hi,mass"));
        assert_eq!(lines.count(), 64);
        assert!(text.contains("-0.5,"));
    }
}
