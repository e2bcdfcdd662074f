//! Cantor subsets of the section with certified expansion data.
//!
//! A [`CantorSpec`] is a finite branch system: disjoint interval domains,
//! each carried onto one common base interval by an iterate of the factor
//! map, together with certified bounds on the derivative of that iterate.
//! Dimension estimates consume only the spec, so the two construction
//! routes stay interchangeable.
//!
//! `build_theorem_cantor` follows the measure-driven route: refine gap
//! levels around covering cylinders, split each gap into equal-measure
//! pieces, filter the pieces through three orbit claims, and finish each
//! survivor with an almost-onto run. `build_direct_cantor` is the blunt
//! route: enumerate sign itineraries of a fixed depth and keep the branches
//! whose orbits stay a prescribed distance from the singularity.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::one_d::expansion::{almost_leo, aleo_target};
use crate::one_d::ulam::MeasureApprox;
use crate::one_d::{MapModel, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Matching tolerance for terminal images against the base.
pub const IMAGE_TOL: f64 = 1e-9;

/// Sample points per piece when hunting a claim-1 witness.
const WITNESS_SAMPLES: usize = 64;

/// Default per-gap piece budget.
pub const DEFAULT_BUDGET: usize = 256;

/// Base interval of the direct construction, fixed so branch systems built
/// at different exclusion radii are literally comparable.
pub const DIRECT_BASE: (f64, f64) = (-0.4, 0.4);

/// One branch: f^iterates maps `domain` diffeomorphically onto the base.
///
/// `lambda_min` and `lambda_max` bound |(f^iterates)'| on the domain from
/// below and above; they come from endpoint products over the orbit
/// intervals, which are monotone there, so the bounds are certified rather
/// than sampled. `pre_iterates` is present on branches built through an
/// almost-onto run and counts the leading steps before that run; the
/// distortion guarantee applies to exactly that prefix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CantorBranch {
    pub domain: Interval,
    pub iterates: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_iterates: Option<u32>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// A finite branch system over one base interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CantorSpec {
    pub base: Interval,
    pub branches: Vec<CantorBranch>,
}

impl CantorSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Leading `#` lines are skipped, so files carrying a provenance header
    /// comment parse the same as bare JSON.
    pub fn from_json(text: &str) -> Result<Self> {
        let body = text.trim_start_matches(|c| c == '\u{feff}');
        let mut rest = body;
        while rest.trim_start().starts_with('#') {
            rest = match rest.split_once('\n') {
                Some((_, tail)) => tail,
                None => "",
            };
        }
        serde_json::from_str(rest).map_err(|e| Error::Parse(format!("cantor spec: {e}")))
    }

    /// Structural checks: domains sorted, pairwise disjoint, clear of the
    /// singularity, expanding, and actually carried onto the base. Returns
    /// one message per violation.
    pub fn validate(&self, m: &MapModel) -> Vec<String> {
        let mut out = Vec::new();
        if self.branches.is_empty() {
            out.push("no branches".into());
        }
        for (i, b) in self.branches.iter().enumerate() {
            if b.domain.dist_to_zero() == 0.0 {
                out.push(format!("branch {i}: domain {} touches 0", b.domain));
            }
            if !(b.lambda_min > 1.0) {
                out.push(format!("branch {i}: lambda_min {} not above 1", b.lambda_min));
            }
            if b.lambda_min > b.lambda_max {
                out.push(format!(
                    "branch {i}: lambda_min {} above lambda_max {}",
                    b.lambda_min, b.lambda_max
                ));
            }
            if let Some(p) = b.pre_iterates {
                if p > b.iterates {
                    out.push(format!("branch {i}: pre_iterates {p} exceed iterates"));
                }
            }
            if i + 1 < self.branches.len() {
                let next = &self.branches[i + 1];
                if next.domain.lo() < b.domain.hi() - 1e-12 {
                    out.push(format!(
                        "branches {i} and {}: domains {} and {} overlap",
                        i + 1,
                        b.domain,
                        next.domain
                    ));
                }
            }
            match replay_image(m, &b.domain, b.iterates) {
                Ok(img) => {
                    if !img.approx_eq(&self.base, IMAGE_TOL) {
                        out.push(format!(
                            "branch {i}: f^{}({}) = {img} is not the base {}",
                            b.iterates, b.domain, self.base
                        ));
                    }
                }
                Err(e) => out.push(format!("branch {i}: image replay failed: {e}")),
            }
        }
        out
    }

    pub fn lambda_mins(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.lambda_min).collect()
    }

    pub fn lambda_maxs(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.lambda_max).collect()
    }

    /// Branches whose domain sits inside the base, the ones usable as a
    /// self-map system; entry-only branches are excluded.
    pub fn nested_branches(&self) -> Vec<&CantorBranch> {
        self.branches
            .iter()
            .filter(|b| self.base.contains_interval(&b.domain, 1e-12))
            .collect()
    }
}

/// Forward image of an interval under `steps` applications.
fn replay_image(m: &MapModel, iv: &Interval, steps: u32) -> Result<Interval> {
    let mut cur = *iv;
    for _ in 0..steps {
        cur = m.image_of(&cur)?;
    }
    Ok(cur)
}

/// Sign itinerary of a domain all of whose forward images are one-sided.
fn forward_itinerary(m: &MapModel, iv: &Interval, steps: u32) -> Result<Vec<Side>> {
    let mut its = Vec::with_capacity(steps as usize);
    let mut cur = *iv;
    for t in 0..steps {
        let side = Side::of_interval(&cur).ok_or_else(|| {
            Error::domain(format!("image {t} of {iv} straddles the singularity"))
        })?;
        its.push(side);
        cur = m.image_of(&cur)?;
    }
    Ok(its)
}

fn pullback_point(m: &MapModel, x: f64, its: &[Side]) -> Result<f64> {
    let mut x = x;
    for side in its.iter().rev() {
        x = m.branch_inverse(x, *side)?;
    }
    Ok(x)
}

/// Recovers the sign itinerary of a branch from its forward orbit. The
/// branch must replay cleanly: every image short of the last stays strictly
/// on one side of 0.
pub fn branch_itinerary(m: &MapModel, branch: &CantorBranch) -> Result<Vec<Side>> {
    forward_itinerary(m, &branch.domain, branch.iterates)
}

/// Pulls `target` back through a sign itinerary, last step first. The result
/// is the set of points whose orbit follows `its` and lands in `target`.
pub fn pullback_through(m: &MapModel, target: &Interval, its: &[Side]) -> Result<Interval> {
    let mut cur = *target;
    for side in its.iter().rev() {
        cur = m.branch_inverse_interval(&cur, *side)?;
    }
    Ok(cur)
}

/// Finds the first cylinder inside `region` that an iterate carries onto
/// the left half [-1/2, 0]: breadth-first over generations, splitting each
/// cylinder at the pullback of 0.
///
/// Returns the cylinder and the iterate count (at least 1). Deterministic:
/// cylinders are scanned left to right, generations in order.
pub fn covering_cylinder(m: &MapModel, region: &Interval, cap: usize) -> Result<(Interval, u32)> {
    let target = Interval::left_half();
    struct Node {
        domain: Interval,
        image: Interval,
        its: Vec<Side>,
    }
    let mut layer: Vec<Node> = Vec::new();
    let push_part = |parts: &mut Vec<Node>, iv: Interval| {
        parts.push(Node { domain: iv, image: iv, its: Vec::new() });
    };
    if region.straddles_zero() {
        push_part(&mut layer, Interval::new(region.lo(), 0.0).expect("left part"));
        push_part(&mut layer, Interval::new(0.0, region.hi()).expect("right part"));
    } else {
        push_part(&mut layer, *region);
    }

    for _gen in 1..=cap.min(500) {
        let mut next: Vec<Node> = Vec::with_capacity(layer.len() + 4);
        for node in &layer {
            let side = Side::of_interval(&node.image).expect("cylinder images are one-sided");
            let img = m.image_of(&node.image)?;
            let mut its = node.its.clone();
            its.push(side);
            if img.straddles_zero() {
                let zero_pre = match side {
                    Side::Neg => m.preimages()?.z1,
                    Side::Pos => m.preimages()?.z2,
                };
                // the cut lands strictly inside the current image
                let cut = pullback_point(m, zero_pre, &node.its)?
                    .clamp(node.domain.lo(), node.domain.hi());
                if cut > node.domain.lo() && cut < node.domain.hi() {
                    next.push(Node {
                        domain: Interval::new(node.domain.lo(), cut)?,
                        image: Interval::new(img.lo(), 0.0)?,
                        its: its.clone(),
                    });
                    next.push(Node {
                        domain: Interval::new(cut, node.domain.hi())?,
                        image: Interval::new(0.0, img.hi())?,
                        its,
                    });
                } else {
                    // float collapse of one side: keep the surviving half
                    let keep = if cut <= node.domain.lo() {
                        Interval::new(0.0, img.hi())?
                    } else {
                        Interval::new(img.lo(), 0.0)?
                    };
                    next.push(Node { domain: node.domain, image: keep, its });
                }
            } else {
                next.push(Node { domain: node.domain, image: img, its });
            }
        }
        if next.len() > (1 << 18) {
            return Err(Error::Budget(format!(
                "cylinder layer grew to {} while covering from {region}",
                next.len()
            )));
        }
        for node in &next {
            if node.image.contains_interval(&target, IMAGE_TOL) {
                let t_lo = target.lo().max(node.image.lo());
                let t_hi = target.hi().min(node.image.hi());
                let a = pullback_point(m, t_lo, &node.its)?;
                let b = pullback_point(m, t_hi, &node.its)?;
                let found = Interval::new(a.min(b), a.max(b))?;
                let found = found.intersect(&node.domain).ok_or(Error::ConstructionFailed {
                    stage: "covering-cylinder",
                    detail: format!("restriction escaped its cylinder {}", node.domain),
                })?;
                return Ok((found, node.its.len() as u32));
            }
        }
        layer = next;
    }
    Err(Error::NonTermination {
        what: format!("no cylinder from {region} covered the left half"),
        cap,
    })
}

/// One refinement level: the covering intervals found in the previous gaps
/// and the gaps they leave behind.
#[derive(Debug, Clone, Serialize)]
pub struct GapLevel {
    pub intervals: Vec<(Interval, u32)>,
    pub gaps: Vec<Interval>,
}

/// Monotone filter counters: each claim only removes pieces.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ClaimCounts {
    pub sampled: usize,
    pub claim1: usize,
    pub claim2: usize,
    pub claim3: usize,
    pub aleo: usize,
}

impl ClaimCounts {
    fn add(&mut self, o: &ClaimCounts) {
        self.sampled += o.sampled;
        self.claim1 += o.claim1;
        self.claim2 += o.claim2;
        self.claim3 += o.claim3;
        self.aleo += o.aleo;
    }
}

/// Full trace of a measure-driven construction run.
#[derive(Debug, Clone, Serialize)]
pub struct TheoremRunLog {
    pub k: u32,
    pub m_k: u32,
    pub m_k_capped: bool,
    pub epsilon_k: f64,
    pub c_density: f64,
    pub levels: Vec<GapLevel>,
    pub counts: ClaimCounts,
    pub per_gap_counts: Vec<ClaimCounts>,
    /// Fraction of sampled pieces with a claim-1 witness.
    pub claim1_fraction: f64,
    /// The one-half floor on that fraction only applies once m_k >= 40 c.
    pub claim1_threshold_applies: bool,
    pub claim1_fraction_ok: Option<bool>,
    /// Per gap, the overlong pieces stayed under a quarter of the total
    /// (scaled from the sample).
    pub claim2_sparse_ok: bool,
    /// Distortion ratios observed on finished branches.
    pub distortion_samples: Vec<f64>,
    pub budget: usize,
    pub seed: u64,
    /// log2 of the finite-stage envelope constant B(m_k); the per-piece
    /// derivative spread it tracks decays like B^(1/m) 2^(-1) as m grows.
    pub log2_envelope: f64,
    /// log2(B)/m_k - 1, the stage's distance from the asymptotic regime.
    pub envelope_slack: f64,
}

/// Lower distortion constant H: ratios of prefix derivatives on finished
/// branches stay inside [H, 1/H].
pub fn distortion_floor(m: &MapModel) -> f64 {
    let s = std::f64::consts::SQRT_2;
    (-(2.0 / 3.0) * m.c_dist() * m.c1_dist() * s * (s + 1.0)).exp()
}

/// Ratio (f^j)'(y) / (f^j)'(x) over the branch's distortion prefix.
pub fn distortion_ratio(m: &MapModel, branch: &CantorBranch, x: f64, y: f64) -> Result<f64> {
    if !branch.domain.contains(x) || !branch.domain.contains(y) {
        return Err(Error::domain(format!(
            "points {x}, {y} outside branch domain {}",
            branch.domain
        )));
    }
    let j = branch.pre_iterates.unwrap_or(branch.iterates);
    let (mut px, mut py) = (x, y);
    let mut ratio = 1.0;
    for _ in 0..j {
        ratio *= m.f_deriv(py)? / m.f_deriv(px)?;
        px = m.f(px)?;
        py = m.f(py)?;
    }
    Ok(ratio)
}

/// Certified derivative extrema over a chain of orbit intervals: f' is
/// monotone on each one-sided interval, so endpoint values bound it.
fn lambda_extrema(m: &MapModel, chain: &[Interval]) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    for iv in chain {
        let a = m.f_deriv(iv.lo())?;
        let b = m.f_deriv(iv.hi())?;
        lo *= a.min(b);
        hi *= a.max(b);
    }
    Ok((lo, hi))
}

struct PieceOutcome {
    counts: ClaimCounts,
    branches: Vec<CantorBranch>,
    long_pieces: usize,
    distortion: Vec<f64>,
}

/// Runs the three claims plus the almost-onto finish on the sampled pieces
/// of one gap.
fn process_gap(
    m: &MapModel,
    mu: &MeasureApprox,
    gap: &Interval,
    m_k: u32,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PieceOutcome> {
    let total: u64 = 1u64 << m_k.min(63);
    let mut picked: BTreeSet<u64> = BTreeSet::new();
    if total as usize <= budget {
        picked.extend(0..total);
    } else {
        while picked.len() < budget {
            picked.insert(rng.random_range(0..total));
        }
    }

    let m3 = (m_k as f64).powi(3);
    let len_cut = 1.0 / (3.0 * m3);
    let ball = 1.0 / m3;
    let horizon = 4 * m_k as usize;

    let mut counts = ClaimCounts::default();
    let mut branches = Vec::new();
    let mut long_pieces = 0usize;
    let mut distortion = Vec::new();

    for idx in picked {
        counts.sampled += 1;
        let lo = mu.quantile_in(gap, idx as f64 / total as f64)?;
        let hi = mu.quantile_in(gap, (idx + 1) as f64 / total as f64)?;
        let piece = match Interval::new(lo, hi) {
            Ok(p) => p,
            Err(_) => continue, // zero-mass stretch collapsed
        };
        if piece.len() >= len_cut {
            long_pieces += 1;
        }

        // claim 1: some point's whole window stays out of the shrinking ball
        let witness = piece.grid(WITNESS_SAMPLES - 1).any(|x0| {
            let mut x = x0;
            for _ in 0..=horizon {
                if x.abs() < ball || x == 0.0 {
                    return false;
                }
                x = m.eval_closure(x, Side::of(x));
            }
            true
        });
        if !witness {
            continue;
        }
        counts.claim1 += 1;

        // claim 2: the piece itself is short
        if piece.len() >= len_cut {
            continue;
        }
        counts.claim2 += 1;

        // claim 3: the piece grows past the cut length within the window
        let mut chain = vec![piece];
        let mut grown = None;
        for t in 1..=horizon {
            let prev = chain.last().expect("chain nonempty");
            if prev.straddles_zero() {
                break;
            }
            let img = match m.image_of(prev) {
                Ok(i) => i,
                Err(_) => break,
            };
            chain.push(img);
            if img.len() > len_cut {
                grown = Some(t);
                break;
            }
        }
        let Some(j) = grown else { continue };
        counts.claim3 += 1;

        // finish: almost-onto run from the grown image, pulled back
        let outcome = (|| -> Result<CantorBranch> {
            let run = almost_leo(m, &chain[j])?;
            let its = forward_itinerary(m, &piece, j as u32)?;
            let mut back = vec![run.j_prime];
            for t in (0..j).rev() {
                let prev = m
                    .branch_inverse_interval(back.last().expect("nonempty"), its[t])?
                    .intersect(&chain[t])
                    .ok_or(Error::ConstructionFailed {
                        stage: "piece-pullback",
                        detail: format!("step {t} escaped its orbit interval"),
                    })?;
                back.push(prev);
            }
            back.reverse(); // back[t] = f^t(branch domain), t = 0..=j
            let mut full_chain: Vec<Interval> = back[..j].to_vec();
            full_chain.extend_from_slice(&run.step_images[..run.n]);
            let (l_min, l_max) = lambda_extrema(m, &full_chain)?;
            Ok(CantorBranch {
                domain: back[0],
                iterates: j as u32 + run.n as u32,
                pre_iterates: Some(j as u32),
                lambda_min: l_min,
                lambda_max: l_max,
            })
        })();
        let Ok(branch) = outcome else { continue };
        counts.aleo += 1;

        if distortion.len() < 8 {
            let d = branch.domain;
            let x = d.lo() + 0.25 * d.len();
            let y = d.lo() + 0.75 * d.len();
            if let Ok(r) = distortion_ratio(m, &branch, x, y) {
                distortion.push(r);
            }
        }
        branches.push(branch);
    }

    Ok(PieceOutcome { counts, branches, long_pieces, distortion })
}

/// Measure-driven construction to gap depth k.
///
/// Needs a reference measure (missing one is a dependency error). `m_cap`
/// bounds the per-gap piece exponent m_k, `budget` the pieces actually
/// examined per gap (subsampled deterministically from `seed`).
pub fn build_theorem_cantor(
    m: &MapModel,
    mu: Option<&MeasureApprox>,
    k: u32,
    m_cap: u32,
    budget: usize,
    seed: u64,
) -> Result<(CantorSpec, TheoremRunLog)> {
    let mu = mu.ok_or_else(|| {
        Error::MissingDependency("theorem construction needs a reference measure".into())
    })?;
    if !(1..=6).contains(&k) {
        return Err(Error::domain(format!("gap depth k must lie in 1..=6, got {k}")));
    }
    if !(8..=24).contains(&m_cap) {
        return Err(Error::domain(format!("m_cap must lie in 8..=24, got {m_cap}")));
    }
    if budget < 16 {
        return Err(Error::domain(format!("budget must be at least 16, got {budget}")));
    }

    // gap refinement: replace each gap by the two flanks of its covering
    // cylinder; the search region is shaved at both ends because cylinders
    // tile, so an unshaved query can return a cylinder sharing a gap
    // endpoint and one flank would vanish
    let mut levels: Vec<GapLevel> = Vec::new();
    let mut gaps = vec![Interval::left_half()];
    for _level in 0..k {
        let mut intervals = Vec::new();
        let mut next_gaps = Vec::new();
        for gap in &gaps {
            let margin = gap.len() / 64.0;
            let query = Interval::new(gap.lo() + margin, gap.hi() - margin)?;
            let (found, n) = covering_cylinder(m, &query, 500)?;
            next_gaps.push(Interval::new(gap.lo(), found.lo())?);
            next_gaps.push(Interval::new(found.hi(), gap.hi())?);
            intervals.push((found, n));
        }
        debug_assert_eq!(next_gaps.len(), 2 * gaps.len());
        levels.push(GapLevel { intervals, gaps: next_gaps.clone() });
        gaps = next_gaps;
    }

    let min_gap_mass = gaps
        .iter()
        .map(|g| mu.measure_of(g))
        .fold(f64::INFINITY, f64::min);
    if !(min_gap_mass > 0.0) {
        return Err(Error::ConstructionFailed {
            stage: "gap-measure",
            detail: "a terminal gap carries no measure".into(),
        });
    }
    let epsilon_k = min_gap_mass / mu.c_density;
    let m_raw = (1.0 / epsilon_k).floor().max(1.0) as u32;
    let m_k = m_raw.min(m_cap);
    let m_k_capped = m_raw > m_cap;

    let mut counts = ClaimCounts::default();
    let mut per_gap_counts = Vec::with_capacity(gaps.len());
    let mut branches = Vec::new();
    let mut distortion_samples = Vec::new();
    let mut claim2_sparse_ok = true;
    for (gi, gap) in gaps.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (gi as u64).wrapping_mul(0x9E3779B97F4A7C15));
        let out = process_gap(m, mu, gap, m_k, budget, &mut rng)?;
        if out.counts.sampled > 0 && out.long_pieces * 4 >= out.counts.sampled {
            claim2_sparse_ok = false;
        }
        counts.add(&out.counts);
        per_gap_counts.push(out.counts);
        branches.extend(out.branches);
        distortion_samples.extend(out.distortion);
    }
    if branches.is_empty() {
        return Err(Error::EmptySpec(
            "no piece survived the claim filters and the almost-onto finish".into(),
        ));
    }
    branches.sort_by(|a, b| a.domain.lo().total_cmp(&b.domain.lo()));
    branches.dedup_by(|next, prev| next.domain.lo() < prev.domain.hi() - 1e-15);

    // finite-stage envelope bookkeeping in logs
    let a = m.cut_a()?;
    let growth = (a * a * m.eta() * m.eta() / 2.0).ln();
    let d_const = 5.0 / growth;
    let e_const = m.c_dist() * (1.0 - a).powf(m.alpha - 1.0) * 6f64.powf(1.0 - m.alpha);
    let xi = 3.0 * (1.0 - m.alpha);
    let h = distortion_floor(m);
    let mf = m_k as f64;
    let ln_b = -2.0 * h.ln()
        + d_const * mf.ln() * e_const.ln()
        + d_const * xi * mf.ln() * mf.ln()
        + mf * 2f64.ln()
        + (mf + 1.0).ln();
    let log2_envelope = ln_b / 2f64.ln();

    let claim1_fraction = if counts.sampled > 0 {
        counts.claim1 as f64 / counts.sampled as f64
    } else {
        0.0
    };
    let claim1_threshold_applies = mf >= 40.0 * mu.c_density;
    let log = TheoremRunLog {
        k,
        m_k,
        m_k_capped,
        epsilon_k,
        c_density: mu.c_density,
        levels,
        counts,
        per_gap_counts,
        claim1_fraction,
        claim1_threshold_applies,
        claim1_fraction_ok: claim1_threshold_applies.then_some(claim1_fraction >= 0.5),
        claim2_sparse_ok,
        distortion_samples,
        budget,
        seed,
        log2_envelope,
        envelope_slack: log2_envelope / mf - 1.0,
    };
    let spec = CantorSpec { base: aleo_target(m)?, branches };
    Ok((spec, log))
}

/// Counters of the direct construction.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DirectRunLog {
    pub delta: f64,
    pub depth: u32,
    pub base: Interval,
    pub words: u64,
    pub alive_pullback: u64,
    pub alive_delta: u64,
    pub alive_nested: u64,
}

/// Direct construction: every sign itinerary of length `depth` is pulled
/// back from the fixed base; a branch survives when the pullback never
/// clips a branch range, its whole orbit keeps distance at least `delta`
/// from 0, and its domain nests inside the base.
///
/// The survivor set only grows as `delta` shrinks, and identical itineraries
/// produce bitwise identical branches, so lower bounds derived from these
/// specs are monotone in `delta`.
pub fn build_direct_cantor(
    m: &MapModel,
    delta: f64,
    depth: u32,
) -> Result<(CantorSpec, DirectRunLog)> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::domain(format!(
            "exclusion radius must lie in (0, 0.5), got {delta}"
        )));
    }
    if !(1..=12).contains(&depth) {
        return Err(Error::domain(format!("depth must lie in 1..=12, got {depth}")));
    }
    let base = Interval::new(DIRECT_BASE.0, DIRECT_BASE.1)?;
    let words = 1u64 << depth;
    let mut log = DirectRunLog {
        delta,
        depth,
        base,
        words,
        alive_pullback: 0,
        alive_delta: 0,
        alive_nested: 0,
    };
    let mut branches = Vec::new();
    'words: for word in 0..words {
        // chain[t] = f^t(domain); built back to front
        let mut chain = vec![base; depth as usize + 1];
        for t in (0..depth).rev() {
            let side = if word >> t & 1 == 1 { Side::Pos } else { Side::Neg };
            let target = chain[t as usize + 1];
            if !m.branch_range(side).contains_interval(&target, 1e-12) {
                continue 'words; // clipped: not a full branch
            }
            chain[t as usize] = m.branch_inverse_interval(&target, side)?;
        }
        log.alive_pullback += 1;
        if chain[..depth as usize].iter().any(|iv| iv.dist_to_zero() < delta) {
            continue;
        }
        log.alive_delta += 1;
        if !base.contains_interval(&chain[0], 1e-12) {
            continue;
        }
        log.alive_nested += 1;
        let (l_min, l_max) = lambda_extrema(m, &chain[..depth as usize])?;
        branches.push(CantorBranch {
            domain: chain[0],
            iterates: depth,
            pre_iterates: None,
            lambda_min: l_min,
            lambda_max: l_max,
        });
    }
    if branches.is_empty() {
        return Err(Error::EmptySpec(format!(
            "no itinerary of depth {depth} avoids the {delta}-ball around 0"
        )));
    }
    branches.sort_by(|a, b| a.domain.lo().total_cmp(&b.domain.lo()));
    Ok((CantorSpec { base, branches }, log))
}
