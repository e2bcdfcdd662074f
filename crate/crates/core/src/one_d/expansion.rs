//! Interval expansion runs for the factor map.
//!
//! Two related constructions live here. `leo_iterate` verifies the locally
//! eventually onto property: the forward images of any interval cover all of
//! I after finitely many steps. `almost_leo` is the refinement used by the
//! Cantor construction: inside any interval J it locates a subinterval J'
//! carried diffeomorphically onto a fixed target half interval, with every
//! intermediate image staying clear of the singularity.
//!
//! Both follow the same cut recursion. J_0 is J (its bigger half at 0 if J
//! straddles the singularity) shrunk by the cut parameter a; each step maps
//! forward and, when the image straddles 0, keeps the bigger half before
//! shrinking again. The recursion ends at the first double hit, two
//! consecutive images containing 0.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::one_d::{MapModel, Side};
use serde::Serialize;

/// Iteration cap for both runs; hitting it is reported, never looped past.
pub const RUN_CAP: usize = 10_000;

/// Two-sided tolerance for "covers I" and terminal interval identity.
pub const COVER_TOL: f64 = 1e-9;

/// Outcome of a locally-eventually-onto run.
#[derive(Debug, Clone, Serialize)]
pub struct LeoRun {
    /// First n with f^n(J) = I (as a union of branch images).
    pub n: usize,
    /// Steps the cut-free recursion took to its double hit.
    pub n_recursion: usize,
    /// A priori bound n_recursion + 3 implied by the double-hit analysis.
    pub bound: usize,
    /// |J_i| along the recursion, starting with the initial interval.
    pub lens: Vec<f64>,
    /// Which recursion images contained 0.
    pub hits: Vec<bool>,
}

/// Splits an interval at 0 when it straddles the singularity.
fn split_at_zero(iv: &Interval) -> Vec<Interval> {
    if iv.straddles_zero() {
        vec![
            Interval::new(iv.lo(), 0.0).expect("left part nonempty"),
            Interval::new(0.0, iv.hi()).expect("right part nonempty"),
        ]
    } else {
        vec![*iv]
    }
}

/// Sorts and merges touching pieces.
fn merge_pieces(mut pieces: Vec<Interval>) -> Vec<Interval> {
    pieces.sort_by(|a, b| a.lo().total_cmp(&b.lo()));
    let mut out: Vec<Interval> = Vec::with_capacity(pieces.len());
    for p in pieces {
        match out.last_mut() {
            Some(last) if p.lo() <= last.hi() + 1e-15 => {
                if p.hi() > last.hi() {
                    *last = Interval::new(last.lo(), p.hi()).expect("merge widens");
                }
            }
            _ => out.push(p),
        }
    }
    out
}

fn covers_i(pieces: &[Interval]) -> bool {
    pieces
        .iter()
        .any(|p| p.lo() <= -0.5 + COVER_TOL && p.hi() >= 0.5 - COVER_TOL)
}

/// Runs the covering iteration and the double-hit recursion for J.
///
/// The returned `n` counts actual applications of f until the union of
/// branch images covers I; `bound` comes from the recursion and dominates n.
pub fn leo_iterate(m: &MapModel, j: &Interval, cap: usize) -> Result<LeoRun> {
    let cap = cap.min(RUN_CAP).max(1);

    // cut-free recursion to the first double hit
    let mut cur = if j.straddles_zero() { j.bigger_half_at_zero() } else { *j };
    let mut lens = vec![cur.len()];
    let mut hits: Vec<bool> = Vec::new();
    let mut n_recursion = None;
    for i in 0..cap {
        let img = m.image_of(&cur)?;
        let hit = img.straddles_zero();
        hits.push(hit);
        if hit && i > 0 && hits[i - 1] {
            n_recursion = Some(i + 1);
            break;
        }
        cur = if hit { img.bigger_half_at_zero() } else { img };
        lens.push(cur.len());
    }
    let n_recursion = n_recursion.ok_or(Error::NonTermination {
        what: format!("no double hit for {j}"),
        cap,
    })?;

    // direct covering iteration on the full interval
    let mut pieces = split_at_zero(j);
    let mut n = None;
    if covers_i(&pieces) {
        n = Some(0);
    } else {
        for step in 1..=cap {
            let mut next = Vec::with_capacity(pieces.len() + 1);
            for p in &pieces {
                for half in split_at_zero(p) {
                    next.push(m.image_of(&half)?);
                }
            }
            pieces = merge_pieces(next);
            if pieces.len() > 4096 {
                return Err(Error::Budget(format!(
                    "piece count {} while iterating {j}",
                    pieces.len()
                )));
            }
            if covers_i(&pieces) {
                n = Some(step);
                break;
            }
        }
    }
    let n = n.ok_or(Error::NonTermination {
        what: format!("images of {j} never covered I"),
        cap,
    })?;

    Ok(LeoRun {
        n,
        n_recursion,
        bound: n_recursion + 3,
        lens,
        hits,
    })
}

/// Outcome of an almost-onto run: f^n maps `j_prime` diffeomorphically onto
/// the target half interval [f(1-a), 0], every earlier image staying a
/// positive distance from the singularity.
#[derive(Debug, Clone, Serialize)]
pub struct AleoRun {
    pub j_prime: Interval,
    /// Applications of f from j_prime to the target.
    pub n: usize,
    /// Terminal landed on the negative side and needed the extra step.
    pub case_two: bool,
    /// Step count bound 3 + ln(1/(2|J|)) / ln(a^2 eta^2 / 2); only
    /// meaningful for |J| <= 1/2.
    pub bound: f64,
    /// f^t(j_prime) for t = 0..=n; the last entry is the target.
    pub step_images: Vec<Interval>,
    /// Distance of f^t(j_prime) to 0 for t = 0..n (all strictly positive).
    pub step_gaps: Vec<f64>,
    /// |J_i| along the cut recursion.
    pub cut_lens: Vec<f64>,
    /// Asymmetry margin |f([z1, 0))| - |f([-1/2, z1])| of the model.
    pub psi: f64,
}

/// The target half interval [f(1-a), 0] of the almost-onto run.
pub fn aleo_target(m: &MapModel) -> Result<Interval> {
    let a = m.cut_a()?;
    Interval::new(m.f(1.0 - a)?, 0.0)
}

/// Proportional cut: keeps the a-fraction of K anchored at the end away
/// from 0.
fn cut_prop(k: &Interval, a: f64) -> Interval {
    let (lo, hi) = if k.hi() <= 0.0 {
        (k.lo(), a * k.hi() + (1.0 - a) * k.lo())
    } else {
        (a * k.lo() + (1.0 - a) * k.hi(), k.hi())
    };
    Interval::new(lo, hi).expect("proportional cut keeps positive length")
}

/// Absolute cut: removes length exactly 1-a at the 0-adjacent end of a half
/// interval touching 0.
fn cut_abs(k: &Interval, a: f64) -> Result<Interval> {
    if k.len() <= 1.0 - a {
        return Err(Error::ConstructionFailed {
            stage: "terminal-cut",
            detail: format!("half interval {k} shorter than 1-a = {}", 1.0 - a),
        });
    }
    if k.hi() <= 0.0 {
        Interval::new(k.lo(), -(1.0 - a))
    } else {
        Interval::new(1.0 - a, k.hi())
    }
}

/// Locates J' inside J with f^n : J' -> [f(1-a), 0] a diffeomorphism whose
/// intermediate images avoid the singularity.
///
/// Errors: `Infeasible` when the model admits no cut parameter;
/// `NonTermination` past the cap; `ConstructionFailed` when a terminal
/// containment check fails (not expected for feasible models, reported with
/// diagnostics rather than silently patched).
pub fn almost_leo(m: &MapModel, j: &Interval) -> Result<AleoRun> {
    let a = m.cut_a()?;
    let pre = m.preimages()?;
    let target = aleo_target(m)?;

    // cut recursion to the first double hit
    let start = if j.straddles_zero() { j.bigger_half_at_zero() } else { *j };
    let mut cur = cut_prop(&start, a);
    let mut track: Vec<(Interval, Side, Interval)> = Vec::new(); // (J_i, side, f(J_i))
    let mut cut_lens = vec![cur.len()];
    let mut terminal = None;
    let mut prev_hit = false;
    for i in 0..RUN_CAP {
        let side = Side::of_interval(&cur).expect("cut intervals avoid 0");
        let img = m.image_of(&cur)?;
        track.push((cur, side, img));
        let hit = img.straddles_zero();
        if hit && prev_hit {
            terminal = Some(i + 1);
            break;
        }
        prev_hit = hit;
        cur = if hit {
            cut_prop(&img.bigger_half_at_zero(), a)
        } else {
            cut_prop(&img, a)
        };
        cut_lens.push(cur.len());
    }
    let n_rec = terminal.ok_or(Error::NonTermination {
        what: format!("no double hit in the cut recursion for {j}"),
        cap: RUN_CAP,
    })?;

    // terminal: absolute cut of the bigger half of the second-to-last image
    let u_prev = track[n_rec - 2].2;
    let j_hat = cut_abs(&u_prev.bigger_half_at_zero(), a)?;
    let t_pos = Interval::new(1.0 - a, pre.z2)?;
    let case_two = j_hat.hi() <= 0.0;

    // pull the chain target back to j_prime
    let mut v;
    if case_two {
        // j_hat sits left of 0; one extra step through the left branch
        if !j_hat.contains(pre.z1) {
            return Err(Error::ConstructionFailed {
                stage: "terminal-case2",
                detail: format!("{j_hat} misses the left zero preimage {}", pre.z1),
            });
        }
        let reach = m.eval_closure(j_hat.hi(), Side::Neg);
        if reach < pre.z2 - 1e-12 {
            return Err(Error::ConstructionFailed {
                stage: "terminal-case2",
                detail: format!("f({}) = {reach} below z2 = {}", j_hat.hi(), pre.z2),
            });
        }
        v = m.branch_inverse_interval(&t_pos, Side::Neg)?;
        v = v.intersect(&j_hat).ok_or(Error::ConstructionFailed {
            stage: "terminal-case2",
            detail: format!("pullback of {t_pos} escapes {j_hat}"),
        })?;
    } else {
        if !j_hat.contains(pre.z2) {
            return Err(Error::ConstructionFailed {
                stage: "terminal-case1",
                detail: format!("{j_hat} misses the right zero preimage {}", pre.z2),
            });
        }
        v = t_pos;
    }
    for i in (0..=n_rec.saturating_sub(2)).rev() {
        let (dom, side, img) = track[i];
        if !img.contains_interval(&v, COVER_TOL) {
            return Err(Error::ConstructionFailed {
                stage: "pullback",
                detail: format!("step {i}: {v} not inside image {img}"),
            });
        }
        v = m.branch_inverse_interval(&v, side)?;
        v = v.intersect(&dom).ok_or(Error::ConstructionFailed {
            stage: "pullback",
            detail: format!("step {i}: preimage escapes {dom}"),
        })?;
    }
    let j_prime = v;
    if !j.contains_interval(&j_prime, COVER_TOL) {
        return Err(Error::ConstructionFailed {
            stage: "pullback",
            detail: format!("j' = {j_prime} escaped the original {j}"),
        });
    }

    // forward replay; total steps: recursion length plus the case-2 detour
    let n_total = if case_two { n_rec + 1 } else { n_rec };
    let mut step_images = vec![j_prime];
    let mut step_gaps = Vec::with_capacity(n_total);
    let mut cur = j_prime;
    for t in 0..n_total {
        let gap = cur.dist_to_zero();
        if t > 0 && gap <= 0.0 {
            return Err(Error::ConstructionFailed {
                stage: "replay",
                detail: format!("image {t} = {cur} touches the singularity"),
            });
        }
        step_gaps.push(gap);
        cur = m.image_of(&cur)?;
        step_images.push(cur);
    }
    if !cur.approx_eq(&target, COVER_TOL) {
        return Err(Error::ConstructionFailed {
            stage: "replay",
            detail: format!("terminal image {cur} differs from target {target}"),
        });
    }

    let growth = (a * a * m.eta() * m.eta() / 2.0).ln();
    let psi = m.f_limit(Side::Neg) + m.f(-0.5)?;
    Ok(AleoRun {
        j_prime,
        n: n_total,
        case_two,
        bound: 3.0 + (1.0 / (2.0 * j.len())).ln() / growth,
        step_images,
        step_gaps,
        cut_lens,
        psi,
    })
}

/// sup of f' over every interval the run differentiates through, i.e. the
/// step images 0..n-1. Exact because f' is monotone off 0.
pub fn derivative_sup_on_run(m: &MapModel, run: &AleoRun) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for iv in &run.step_images[..run.n] {
        sup = sup.max(m.deriv_sup(iv)?);
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> MapModel {
        MapModel::default()
    }

    #[test]
    fn left_half_covers_in_two_steps() {
        let m = model();
        let run = leo_iterate(&m, &Interval::left_half(), RUN_CAP).unwrap();
        assert_eq!(run.n, 2);
        assert_eq!(run.n_recursion, 2);
        assert_eq!(run.bound, 5);
        assert!(run.n <= run.bound);
    }

    #[test]
    fn full_interval_covers_in_one_step() {
        let m = model();
        let run = leo_iterate(&m, &Interval::full(), RUN_CAP).unwrap();
        assert_eq!(run.n, 1);
        assert!(run.n <= run.bound);
    }

    #[test]
    fn small_intervals_grow_at_the_guaranteed_rate() {
        let m = model();
        let rate = m.eta() * m.eta() / 2.0;
        for j in [
            Interval::new(0.001, 0.0012).unwrap(),
            Interval::new(-0.31, -0.3).unwrap(),
            Interval::new(0.2, 0.21).unwrap(),
        ] {
            let run = leo_iterate(&m, &j, RUN_CAP).unwrap();
            assert!(run.n <= run.bound, "{j}: n = {} > bound {}", run.n, run.bound);
            // pairs of steps before the double hit gain at least eta^2/2
            for i in 0..run.lens.len().saturating_sub(2) {
                assert!(
                    run.lens[i + 2] >= rate * run.lens[i] * (1.0 - 1e-12),
                    "{j}: |J_{}| = {} vs |J_{}| = {}",
                    i + 2, run.lens[i + 2], i, run.lens[i]
                );
            }
        }
    }

    #[test]
    fn aleo_reaches_the_target_half() {
        let m = model();
        let j = Interval::new(0.3, 0.4).unwrap();
        let run = almost_leo(&m, &j).unwrap();
        let target = aleo_target(&m).unwrap();
        assert!(j.contains_interval(&run.j_prime, 1e-12));
        assert!(run.step_images[run.n].approx_eq(&target, COVER_TOL));
        assert_eq!(run.step_images.len(), run.n + 1);
        assert_eq!(run.step_gaps.len(), run.n);
        assert!(run.step_gaps.iter().all(|&g| g > 0.0));
        assert!(run.n >= 2 && (run.n as f64) <= run.bound);
        assert!(run.psi > 0.0);
    }

    #[test]
    fn aleo_on_the_left_half_needs_three_steps() {
        let m = model();
        let run = almost_leo(&m, &Interval::left_half()).unwrap();
        assert_eq!(run.n, 3);
        assert!(run.case_two);
        // |J| = 1/2 makes the bound exactly 3
        assert!((run.bound - 3.0).abs() < 1e-12);
    }

    #[test]
    fn aleo_handles_intervals_near_the_singularity() {
        let m = model();
        let j = Interval::new(1e-4, 2e-4).unwrap();
        let run = almost_leo(&m, &j).unwrap();
        assert!((run.n as f64) <= run.bound);
        // first image is still tiny, so the run is long
        assert!(run.n > 10);
        let sup = derivative_sup_on_run(&m, &run).unwrap();
        assert!(sup.is_finite() && sup > m.eta());
    }

    #[test]
    fn aleo_needs_a_feasible_cut() {
        let alpha = 0.75f64;
        let theta = std::f64::consts::SQRT_2 / (alpha * 2f64.powf(1.0 - alpha));
        let m = MapModel::new(alpha, theta, -0.5, 0.5).unwrap();
        let j = Interval::new(0.3, 0.4).unwrap();
        assert!(matches!(almost_leo(&m, &j), Err(Error::Infeasible(_))));
    }

    #[test]
    fn replay_matches_direct_forward_iteration() {
        let m = model();
        let j = Interval::new(-0.27, -0.22).unwrap();
        let run = almost_leo(&m, &j).unwrap();
        // push both endpoints of j_prime forward by plain evaluation
        let (mut lo, mut hi) = (run.j_prime.lo(), run.j_prime.hi());
        for t in 0..run.n {
            lo = m.f(lo).unwrap_or_else(|_| m.f_limit(Side::of(lo)));
            hi = m.f(hi).unwrap_or_else(|_| m.f_limit(Side::of(hi)));
            let img = &run.step_images[t + 1];
            let (a, b) = (lo.min(hi), lo.max(hi));
            assert!((a - img.lo()).abs() < 1e-9 && (b - img.hi()).abs() < 1e-9);
        }
    }

    #[test]
    fn intermediate_gaps_respect_the_cut_geometry() {
        let m = model();
        let a = m.cut_a().unwrap();
        let j = Interval::new(0.05, 0.08).unwrap();
        let run = almost_leo(&m, &j).unwrap();
        // images two steps past a cut stay (1-a)/2 of that length from 0
        for t in 2..run.n {
            let floor = 0.5 * (1.0 - a) * run.cut_lens.get(t - 2).copied().unwrap_or(0.0);
            assert!(
                run.step_gaps[t] >= floor * (1.0 - 1e-9),
                "gap {} at step {t} below floor {floor}",
                run.step_gaps[t]
            );
        }
    }
}
