//! One-dimensional factor map of the geometric model: the expanding interval
//! map f on I = [-1/2, 1/2] with a power-law singularity at 0, plus the
//! derived expansion constants used by the interval-growth lemmas and the
//! Cantor construction.
//!
//! Submodules: [`expansion`] holds the interval-expansion runs (locally
//! eventually onto and its almost-onto refinement), [`ulam`] the reference
//! measure approximation.

pub mod expansion;
pub mod ulam;

use crate::error::{Error, Result};
use crate::interval::{Interval, I_HI, I_LO};
use crate::ROOT_TOL;
use serde::{Deserialize, Serialize};

/// Default safety margin for the cut parameter a.
pub const DEFAULT_A_MARGIN: f64 = 0.005;

/// Evaluations this close to 0 count as hitting the singular leaf.
pub const SINGULAR_EPS: f64 = 1e-10;

/// Which side of the singularity a branch lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Neg,
    Pos,
}

impl Side {
    pub fn of(x: f64) -> Side {
        if x < 0.0 {
            Side::Neg
        } else {
            Side::Pos
        }
    }

    /// Side an interval lies on; intervals straddling 0 have no side.
    pub fn of_interval(iv: &Interval) -> Option<Side> {
        if iv.hi() <= 0.0 {
            Some(Side::Neg)
        } else if iv.lo() >= 0.0 {
            Some(Side::Pos)
        } else {
            None
        }
    }
}

/// The two zero preimages and their own preimages on each side.
///
/// `z1 < 0 < z2` with f(z1) = f(z2) = 0. `z1_pre_neg` is the point in
/// [-1/2, 0) mapped to z1, `z1_pre_pos` the one in (0, 1/2], and likewise
/// for z2.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ZeroPreimages {
    pub z1: f64,
    pub z2: f64,
    pub z1_pre_neg: f64,
    pub z1_pre_pos: f64,
    pub z2_pre_neg: f64,
    pub z2_pre_pos: f64,
}

/// kappa together with the four generating interval lengths
/// |[z1_pre_neg, z1]|, |[z1, z2_pre_neg]|, |[z1_pre_pos, z2]|, |[z2, z2_pre_pos]|.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KappaInfo {
    pub kappa: f64,
    pub lengths: [f64; 4],
}

/// Interval map f(x) = sgn(x) theta |x|^alpha + branch offset, expanding with
/// infinite one-sided derivatives at 0.
///
/// Construction validates ranges (both branches land inside [-1/2, 1/2]
/// without pinning an endpoint); the analytic invariants (boundary limits
/// -+1/2 at 0, derivative floor above sqrt 2, feasibility of the cut
/// parameter) are reported by [`MapModel::check_invariants`] and enforced by
/// the operations that rely on them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapModel {
    pub alpha: f64,
    pub theta: f64,
    pub offset_pos: f64,
    pub offset_neg: f64,
    eta: f64,
    c_dist: f64,
    c1_dist: f64,
    preimages: Option<ZeroPreimages>,
    kappa: Option<KappaInfo>,
    cut_a: Option<f64>,
}

impl Default for MapModel {
    fn default() -> Self {
        MapModel::new(0.75, 1.65, -0.5, 0.5).expect("default model is valid")
    }
}

impl MapModel {
    pub fn new(alpha: f64, theta: f64, offset_pos: f64, offset_neg: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("theta", theta),
                          ("offset_pos", offset_pos), ("offset_neg", offset_neg)] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} is not finite")));
            }
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParams(format!("alpha must lie in (0,1), got {alpha}")));
        }
        if !(theta > 0.0) {
            return Err(Error::InvalidParams(format!("theta must be positive, got {theta}")));
        }
        let half_pow = 0.5f64.powf(alpha);
        let right = (offset_pos, theta * half_pow + offset_pos);
        let left = (-theta * half_pow + offset_neg, offset_neg);
        let eps = 1e-12;
        if right.0 < I_LO - eps || right.1 > I_HI + eps || left.0 < I_LO - eps || left.1 > I_HI + eps {
            return Err(Error::InvalidParams(format!(
                "branch ranges [{:.6}, {:.6}] u [{:.6}, {:.6}] leave [-1/2, 1/2]",
                left.0, left.1, right.0, right.1
            )));
        }
        if (right.1 - I_HI).abs() < 1e-9 || (left.0 - I_LO).abs() < 1e-9 {
            return Err(Error::InvalidParams("f pins an interval endpoint".into()));
        }
        let eta = theta * alpha * 2f64.powf(1.0 - alpha);
        let ta = theta * alpha;
        let mut m = MapModel {
            alpha,
            theta,
            offset_pos,
            offset_neg,
            eta,
            c_dist: ta.max(1.0 / ta),
            c1_dist: ta * (1.0 - alpha),
            preimages: None,
            kappa: None,
            cut_a: None,
        };
        if let Ok(pre) = zero_preimages(&m) {
            m.preimages = Some(pre);
            let k = kappa_from_preimages(&pre);
            m.kappa = Some(k);
            m.cut_a = choose_a(&m, DEFAULT_A_MARGIN).ok();
        }
        Ok(m)
    }

    /// Derivative infimum eta = theta alpha 2^(1-alpha), attained at |x| = 1/2.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Envelope constant C with 1/C <= f'(x) / |x|^(alpha-1) <= C.
    pub fn c_dist(&self) -> f64 {
        self.c_dist
    }

    /// Envelope constant C1 with |f''(x)| / |x|^(alpha-2) <= C1.
    pub fn c1_dist(&self) -> f64 {
        self.c1_dist
    }

    pub fn preimages(&self) -> Result<ZeroPreimages> {
        self.preimages.ok_or_else(|| {
            Error::Degenerate("zero preimages do not exist for this model".into())
        })
    }

    pub fn kappa(&self) -> Result<KappaInfo> {
        self.kappa.ok_or_else(|| {
            Error::Degenerate("kappa undefined: zero preimages missing".into())
        })
    }

    /// The cut parameter chosen with the default margin at construction.
    pub fn cut_a(&self) -> Result<f64> {
        self.cut_a.ok_or_else(|| {
            Error::Infeasible("no admissible cut parameter for this model".into())
        })
    }

    /// Override the cut parameter (must stay admissible).
    pub fn set_cut_a(&mut self, a: f64) -> Result<()> {
        let k = self.kappa()?.kappa;
        if !(a > 0.0 && a < 1.0 && a * a * self.eta * self.eta > 2.0 && 1.0 - a < k) {
            return Err(Error::Infeasible(format!(
                "a={a} violates a^2 eta^2 > 2 or 1 - a < kappa={k}"
            )));
        }
        self.cut_a = Some(a);
        Ok(())
    }

    /// Soft invariant report: empty means the model satisfies every analytic
    /// requirement (boundary limits, expansion floor, cut feasibility).
    pub fn check_invariants(&self) -> Vec<String> {
        let mut v = Vec::new();
        if (self.offset_pos + 0.5).abs() > 1e-12 {
            v.push(format!("f(0+) = {} instead of -1/2", self.offset_pos));
        }
        if (self.offset_neg - 0.5).abs() > 1e-12 {
            v.push(format!("f(0-) = {} instead of 1/2", self.offset_neg));
        }
        if self.eta <= std::f64::consts::SQRT_2 {
            v.push(format!("eta = {} is not above sqrt(2)", self.eta));
        }
        if self.preimages.is_none() {
            v.push("zero preimages missing on at least one side".into());
        }
        match self.cut_a {
            None => v.push("no admissible cut parameter".into()),
            Some(a) => {
                let k = self.kappa.map(|k| k.kappa).unwrap_or(f64::NAN);
                if !(a * a * self.eta * self.eta > 2.0 && 1.0 - a < k) {
                    v.push(format!("cut parameter a={a} infeasible"));
                }
            }
        }
        v
    }

    #[inline]
    fn eval_raw(&self, x: f64) -> f64 {
        let ax = x.abs();
        if x > 0.0 {
            self.theta * ax.powf(self.alpha) + self.offset_pos
        } else {
            -self.theta * ax.powf(self.alpha) + self.offset_neg
        }
    }

    /// f(x); errors on the singular leaf and outside [-1/2, 1/2].
    pub fn f(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Err(Error::SingularLeaf("f undefined at x = 0".into()));
        }
        if x.abs() > 0.5 + 1e-12 {
            return Err(Error::domain(format!("x={x} outside [-1/2, 1/2]")));
        }
        Ok(self.eval_raw(x))
    }

    /// One-sided limit of f at 0.
    pub fn f_limit(&self, side: Side) -> f64 {
        match side {
            Side::Pos => self.offset_pos,
            Side::Neg => self.offset_neg,
        }
    }

    /// f'(x) = theta alpha |x|^(alpha-1), positive on both branches.
    pub fn f_deriv(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Err(Error::SingularLeaf("f' diverges at x = 0".into()));
        }
        if x.abs() > 0.5 + 1e-12 {
            return Err(Error::domain(format!("x={x} outside [-1/2, 1/2]")));
        }
        Ok(self.theta * self.alpha * x.abs().powf(self.alpha - 1.0))
    }

    /// |f''(x)| = theta alpha (1-alpha) |x|^(alpha-2).
    pub fn f_second_abs(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Err(Error::SingularLeaf("f'' diverges at x = 0".into()));
        }
        Ok(self.theta * self.alpha * (1.0 - self.alpha) * x.abs().powf(self.alpha - 2.0))
    }

    /// Endpoint evaluation treating x = 0 as the lateral limit on `side`.
    #[inline]
    pub fn eval_closure(&self, x: f64, side: Side) -> f64 {
        if x == 0.0 {
            self.f_limit(side)
        } else {
            self.eval_raw(x)
        }
    }

    /// Image of a one-sided interval under f (closure convention at 0).
    /// Both branches are increasing, so the image is endpoint to endpoint.
    pub fn image_of(&self, iv: &Interval) -> Result<Interval> {
        let side = Side::of_interval(iv).ok_or_else(|| {
            Error::domain(format!("interval {iv} straddles the singularity"))
        })?;
        let lo = self.eval_closure(iv.lo(), side);
        let hi = self.eval_closure(iv.hi(), side);
        Interval::new(lo, hi)
    }

    /// Range of one branch (closure at 0).
    pub fn branch_range(&self, side: Side) -> Interval {
        let half = self.theta * 0.5f64.powf(self.alpha);
        match side {
            Side::Pos => Interval::new(self.offset_pos, half + self.offset_pos),
            Side::Neg => Interval::new(-half + self.offset_neg, self.offset_neg),
        }
        .expect("branch ranges validated at construction")
    }

    /// Inverse of the branch on `side`: the unique x with sgn-side and
    /// f(x) = y. Closed form of the power law; errors when y is outside the
    /// branch range.
    pub fn branch_inverse(&self, y: f64, side: Side) -> Result<f64> {
        let r = self.branch_range(side);
        if y < r.lo() - 1e-12 || y > r.hi() + 1e-12 {
            return Err(Error::domain(format!(
                "{y} outside branch range {r} on {side:?}"
            )));
        }
        let y = y.clamp(r.lo(), r.hi());
        let mag = match side {
            Side::Pos => (y - self.offset_pos) / self.theta,
            Side::Neg => (self.offset_neg - y) / self.theta,
        };
        let mag = mag.max(0.0).powf(1.0 / self.alpha);
        Ok(match side {
            Side::Pos => mag.min(0.5),
            Side::Neg => -mag.min(0.5),
        })
    }

    /// Pull an interval back through the branch on `side`; the target is
    /// clipped to the branch range first and must overlap it.
    pub fn branch_inverse_interval(&self, target: &Interval, side: Side) -> Result<Interval> {
        let r = self.branch_range(side);
        let clipped = target.intersect(&r).ok_or_else(|| {
            Error::domain(format!("target {target} misses branch range {r}"))
        })?;
        let a = self.branch_inverse(clipped.lo(), side)?;
        let b = self.branch_inverse(clipped.hi(), side)?;
        Interval::new(a.min(b), a.max(b))
    }

    /// sup of f' over a one-sided interval: attained at the endpoint nearest 0.
    pub fn deriv_sup(&self, iv: &Interval) -> Result<f64> {
        let d = iv.dist_to_zero();
        if d == 0.0 {
            return Err(Error::SingularLeaf(format!(
                "derivative unbounded: {iv} touches 0"
            )));
        }
        Ok(self.theta * self.alpha * d.powf(self.alpha - 1.0))
    }

    /// Grid estimate of eta for cross-checking the closed form: min of f' over
    /// a log-spaced grid from each side.
    pub fn eta_grid_estimate(&self, points: usize) -> f64 {
        let n = points.max(8);
        let mut min = f64::INFINITY;
        for i in 0..n {
            // |x| from 1/2 down to 1e-9, log spaced
            let t = i as f64 / (n - 1) as f64;
            let ax = 0.5 * (1e-9f64 / 0.5).powf(t);
            let d = self.theta * self.alpha * ax.powf(self.alpha - 1.0);
            if d < min {
                min = d;
            }
        }
        min
    }
}

/// Bisection for g(x) = 0 on [lo, hi] where g is continuous and changes sign.
/// Runs to an interval of width `tol`.
pub fn bisect(mut lo: f64, mut hi: f64, tol: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    let mut glo = g(lo);
    let ghi = g(hi);
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    if glo.signum() == ghi.signum() {
        return Err(Error::Numeric(format!(
            "bisection bracket [{lo}, {hi}] has no sign change"
        )));
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Locate both zero preimages and their second preimages by bisection.
pub fn zero_preimages(m: &MapModel) -> Result<ZeroPreimages> {
    let z2 = preimage_on(m, 0.0, Side::Pos)?;
    let z1 = preimage_on(m, 0.0, Side::Neg)?;
    Ok(ZeroPreimages {
        z1,
        z2,
        z1_pre_neg: preimage_on(m, z1, Side::Neg)?,
        z1_pre_pos: preimage_on(m, z1, Side::Pos)?,
        z2_pre_neg: preimage_on(m, z2, Side::Neg)?,
        z2_pre_pos: preimage_on(m, z2, Side::Pos)?,
    })
}

/// Bisection solve of f(x) = target on one branch.
fn preimage_on(m: &MapModel, target: f64, side: Side) -> Result<f64> {
    let r = m.branch_range(side);
    if target < r.lo() - 1e-12 || target > r.hi() + 1e-12 {
        return Err(Error::Degenerate(format!(
            "no preimage of {target} on {side:?}: branch range is {r}"
        )));
    }
    // bracket excludes the singular endpoint by evaluating the limit there
    let (lo, hi) = match side {
        Side::Neg => (-0.5, 0.0),
        Side::Pos => (0.0, 0.5),
    };
    bisect(lo, hi, ROOT_TOL, |x| m.eval_closure(x, side) - target)
}

fn kappa_from_preimages(p: &ZeroPreimages) -> KappaInfo {
    let lengths = [
        p.z1 - p.z1_pre_neg,
        p.z2_pre_neg - p.z1,
        p.z2 - p.z1_pre_pos,
        p.z2_pre_pos - p.z2,
    ];
    let kappa = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
    KappaInfo { kappa, lengths }
}

/// kappa = min of the four interval lengths between the zero preimages and
/// their second preimages.
pub fn compute_kappa(m: &MapModel) -> Result<KappaInfo> {
    Ok(kappa_from_preimages(&zero_preimages(m)?))
}

/// Smallest admissible cut parameter plus a safety margin.
///
/// Feasibility needs a^2 eta^2 > 2 and 1 - a < kappa, so the infimum is
/// max(sqrt(2)/eta, 1 - kappa). The margin is added on top; should that push
/// a to 1 or beyond, the midpoint between the infimum and 1 is used instead.
pub fn choose_a(m: &MapModel, margin: f64) -> Result<f64> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::domain(format!("margin must lie in (0,1), got {margin}")));
    }
    let kappa = compute_kappa(m)?.kappa;
    let floor = (std::f64::consts::SQRT_2 / m.eta()).max(1.0 - kappa);
    if floor >= 1.0 {
        return Err(Error::Infeasible(format!(
            "no cut parameter below 1: needs a > {floor} (eta = {}, kappa = {kappa})",
            m.eta()
        )));
    }
    let mut a = floor + margin;
    if a >= 1.0 {
        a = 0.5 * (floor + 1.0);
    }
    if !(a * a * m.eta() * m.eta() > 2.0 && 1.0 - a < kappa) {
        return Err(Error::Infeasible(format!(
            "chosen a={a} fails a^2 eta^2 > 2 or 1 - a < kappa={kappa}"
        )));
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn default_model() -> MapModel {
        MapModel::default()
    }

    #[test]
    fn boundary_limits_and_halfpoint_values() {
        let m = default_model();
        assert!(m.check_invariants().is_empty());
        assert!((m.f_limit(Side::Pos) + 0.5).abs() < TOL);
        assert!((m.f_limit(Side::Neg) - 0.5).abs() < TOL);
        // oracle: 1.65 * 2^(-0.75) - 1/2 and theta alpha 2^0.25
        let f_half = m.f(0.5).unwrap();
        assert!((f_half - 0.48109586987724488).abs() < TOL);
        assert!((f_half - (1.65 * 2f64.powf(-0.75) - 0.5)).abs() < TOL);
        let d_half = m.f_deriv(0.5).unwrap();
        assert!((d_half - 1.4716438048158673).abs() < TOL);
        assert!((m.eta() - d_half).abs() < TOL);
        assert!(m.eta() > std::f64::consts::SQRT_2);
        // symmetry of the default model
        assert!((m.f(-0.5).unwrap() + f_half).abs() < TOL);
    }

    #[test]
    fn near_singularity_approaches_branch_limits() {
        let m = default_model();
        let v = m.f(1e-6).unwrap();
        assert!((v + 0.5).abs() < 1e-4, "f(1e-6) = {v}");
        let v = m.f(-1e-6).unwrap();
        assert!((v - 0.5).abs() < 1e-4);
        assert!(matches!(m.f(0.0), Err(Error::SingularLeaf(_))));
        assert!(matches!(m.f_deriv(0.0), Err(Error::SingularLeaf(_))));
    }

    #[test]
    fn one_sided_derivatives_blow_up_monotonically() {
        let m = default_model();
        let mut prev = 0.0;
        for k in 3..=10 {
            let x = 10f64.powi(-(k as i32));
            let d = m.f_deriv(x).unwrap();
            assert!(d > prev, "f'(10^-{k}) should increase as k grows");
            assert!((d - m.f_deriv(-x).unwrap()).abs() < 1e-9 * d);
            prev = d;
        }
        assert!(prev > 1e2);
    }

    #[test]
    fn derivative_envelope_constants_hold_on_log_grid() {
        let m = default_model();
        let (c, c1) = (m.c_dist(), m.c1_dist());
        assert!((c - 1.2375).abs() < TOL);
        assert!((c1 - 0.309375).abs() < TOL);
        for i in 0..2000 {
            let t = i as f64 / 1999.0;
            let ax = 0.5 * (1e-9f64 / 0.5).powf(t);
            for x in [ax, -ax] {
                let ratio = m.f_deriv(x).unwrap() / ax.powf(m.alpha - 1.0);
                assert!(ratio <= c + 1e-9 && ratio >= 1.0 / c - 1e-9);
                let r2 = m.f_second_abs(x).unwrap() / ax.powf(m.alpha - 2.0);
                assert!(r2 <= c1 + 1e-9);
                // consequence used by the distortion estimates
                let quot = m.f_second_abs(x).unwrap() / m.f_deriv(x).unwrap();
                assert!(quot <= c * c1 / ax + 1e-9);
            }
        }
    }

    #[test]
    fn eta_closed_form_matches_grid_estimate() {
        let m = default_model();
        let grid = m.eta_grid_estimate(4000);
        assert!((grid - m.eta()).abs() < 1e-6 * m.eta());
        assert!(grid >= m.eta() - 1e-12, "closed form is the true infimum");
    }

    #[test]
    fn zero_preimages_match_closed_forms() {
        let m = default_model();
        let p = m.preimages().unwrap();
        // oracle: closed forms of the power law
        let z2 = (0.5 / 1.65f64).powf(4.0 / 3.0);
        assert!((p.z2 - z2).abs() < 1e-10);
        assert!((p.z2 - 0.20353920794363195).abs() < 1e-9);
        assert!((p.z1 + p.z2).abs() < TOL, "symmetric model has z1 = -z2");
        let z22 = ((0.5 + z2) / 1.65f64).powf(4.0 / 3.0);
        assert!((p.z2_pre_pos - z22).abs() < 1e-10);
        assert!((p.z2_pre_pos - 0.3209266738634961).abs() < 1e-9);
        let z12 = ((0.5 - z2) / 1.65f64).powf(4.0 / 3.0);
        assert!((p.z1_pre_pos - z12).abs() < 1e-10);
        // cross symmetry
        assert!((p.z1_pre_neg + p.z2_pre_pos).abs() < 1e-10);
        assert!((p.z2_pre_neg + p.z1_pre_pos).abs() < 1e-10);
    }

    #[test]
    fn degenerate_model_reports_missing_preimages() {
        // both branches bounded away from 0
        let m = MapModel::new(0.75, 0.2, 0.3, -0.3).unwrap();
        assert!(matches!(zero_preimages(&m), Err(Error::Degenerate(_))));
        assert!(matches!(m.preimages(), Err(Error::Degenerate(_))));
        assert!(!m.check_invariants().is_empty());
    }

    #[test]
    fn kappa_value_and_symmetry() {
        let m = default_model();
        let k = m.kappa().unwrap();
        assert!((k.kappa - 0.10215326131112817).abs() < 1e-9);
        assert!((k.lengths[0] - k.lengths[3]).abs() < 1e-10);
        assert!((k.lengths[1] - k.lengths[2]).abs() < 1e-10);
        assert!((k.kappa - k.lengths[1]).abs() < TOL);
    }

    #[test]
    fn cut_parameter_default_and_margins() {
        let m = default_model();
        let a = choose_a(&m, 0.005).unwrap();
        assert!((a - 0.9659754464668453).abs() < 1e-9);
        assert!(a * a * m.eta() * m.eta() > 2.0);
        assert!(1.0 - a < m.kappa().unwrap().kappa);
        assert!((m.cut_a().unwrap() - a).abs() < TOL);
        assert!(matches!(choose_a(&m, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn cut_parameter_infeasible_at_eta_sqrt2() {
        // eta = sqrt(2) exactly: theta alpha 2^(1-alpha) = sqrt(2)
        let alpha = 0.75f64;
        let theta = std::f64::consts::SQRT_2 / (alpha * 2f64.powf(1.0 - alpha));
        let m = MapModel::new(alpha, theta, -0.5, 0.5).unwrap();
        assert!((m.eta() - std::f64::consts::SQRT_2).abs() < TOL);
        assert!(matches!(choose_a(&m, 0.005), Err(Error::Infeasible(_))));
    }

    #[test]
    fn branch_inverse_round_trips() {
        let m = default_model();
        for i in 1..100 {
            let x = -0.5 + i as f64 / 100.0;
            if x == 0.0 {
                continue;
            }
            let y = m.f(x).unwrap();
            let back = m.branch_inverse(y, Side::of(x)).unwrap();
            assert!((back - x).abs() < 1e-12, "inverse({y}) = {back} != {x}");
        }
        // bisection cross-check of the closed form
        let y = 0.1234;
        let closed = m.branch_inverse(y, Side::Pos).unwrap();
        let bis = bisect(0.0, 0.5, 1e-13, |x| m.eval_closure(x, Side::Pos) - y).unwrap();
        assert!((closed - bis).abs() < 1e-11);
    }

    #[test]
    fn image_uses_closure_limits_at_zero() {
        let m = default_model();
        let left = Interval::new(-0.5, 0.0).unwrap();
        let img = m.image_of(&left).unwrap();
        assert!((img.lo() - m.f(-0.5).unwrap()).abs() < TOL);
        assert!((img.hi() - 0.5).abs() < TOL);
        let mid = Interval::new(-0.3, 0.2).unwrap();
        assert!(m.image_of(&mid).is_err());
    }

    #[test]
    fn deriv_sup_is_sharp_on_one_sided_intervals() {
        let m = default_model();
        let iv = Interval::new(0.1, 0.3).unwrap();
        let sup = m.deriv_sup(&iv).unwrap();
        assert!((sup - m.f_deriv(0.1).unwrap()).abs() < TOL);
        assert!(sup <= m.theta * m.alpha * 0.1f64.powf(m.alpha - 1.0) + TOL);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn image_stays_in_the_section(x in 1e-6f64..=0.5, neg in proptest::bool::ANY) {
                let m = MapModel::default();
                let x = if neg { -x } else { x };
                let y = m.f(x).unwrap();
                prop_assert!((-0.5..=0.5).contains(&y));
            }

            #[test]
            fn branch_inverse_round_trips(x in 1e-4f64..=0.5, neg in proptest::bool::ANY) {
                let m = MapModel::default();
                let x = if neg { -x } else { x };
                let side = Side::of(x);
                let y = m.f(x).unwrap();
                let back = m.branch_inverse(y, side).unwrap();
                prop_assert!((back - x).abs() < 1e-9, "x {} came back as {}", x, back);
            }

            #[test]
            fn derivative_sup_dominates_interior_samples(
                lo in 0.01f64..0.4,
                len in 0.01f64..0.1,
            ) {
                let m = MapModel::default();
                let iv = Interval::new(lo, (lo + len).min(0.5)).unwrap();
                let sup = m.deriv_sup(&iv).unwrap();
                for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
                    let x = iv.lo() + t * iv.len();
                    prop_assert!(m.f_deriv(x).unwrap().abs() <= sup + 1e-9);
                }
            }
        }
    }
}
