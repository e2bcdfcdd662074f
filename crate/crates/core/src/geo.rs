//! Geometric Lorenz model: linearized flow near the origin, cross-section
//! exit map, Poincare return map, and the classical Lorenz ODE for point
//! clouds.
//!
//! The flow is linear in the unit cube with eigenvalues (l1, l2, l3) subject
//! to 0 < -l3 < l1 < -l2. Trajectories enter through the top section
//! S = [-1/2,1/2]^2 x {1} and exit through the lateral faces x = +-1; the
//! return to S composes that exit with an affine reinjection, which is where
//! the expanding one-dimensional factor f and the contracting fiber map g
//! come from.

use crate::error::{Error, Result};
use crate::interval::{I_HI, I_LO};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

/// Norm threshold treated as numerical blow-up during integration.
pub const BLOWUP_NORM: f64 = 1e3;

/// Model parameters for the linearized geometric flow and its section maps.
///
/// `alpha` and `beta` are the derived ratios -l3/l1 and -l2/l1; they are
/// stored explicitly so serialized params are self-describing, and
/// [`validate_params`] rejects any drift between the stored and derived
/// values beyond 1e-12.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct GeoParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Expansion scale of the one-dimensional factor map.
    pub theta: f64,
    /// Branch constant of f on x > 0.
    pub f_offset_pos: f64,
    /// Branch constant of f on x < 0.
    pub f_offset_neg: f64,
    /// Coefficient on the contracted fiber coordinate in g.
    pub g_gain: f64,
    /// Branch constant of g (applied with the sign of x).
    pub g_offset: f64,
}

impl GeoParams {
    /// Build params from eigenvalues, deriving alpha and beta. The branch
    /// constants come from the defaults except theta, which is rescaled so
    /// f(1/2) keeps the default image height; a fixed theta cannot serve
    /// every alpha because the branch image grows as theta * 2^-alpha.
    pub fn from_eigenvalues(l1: f64, l2: f64, l3: f64) -> Result<Self> {
        if l1 <= 0.0 {
            return Err(Error::InvalidParams(format!("lambda1 must be positive, got {l1}")));
        }
        let d = GeoParams::default();
        let alpha = -l3 / l1;
        let half_image = d.theta * 0.5f64.powf(d.alpha);
        let p = GeoParams {
            lambda1: l1,
            lambda2: l2,
            lambda3: l3,
            alpha,
            beta: -l2 / l1,
            theta: half_image * 2f64.powf(alpha),
            ..d
        };
        let violations = validate_params(&p);
        if violations.is_empty() {
            Ok(p)
        } else {
            Err(Error::InvalidParams(violations.join("; ")))
        }
    }
}

impl Default for GeoParams {
    /// Desk-scale default: alpha = 0.75, beta = 3.75, theta = 1.65, with the
    /// symmetric branch constants -1/2, +1/2 and fiber map
    /// g(x, y) = y |x|^beta + sgn(x)/4.
    fn default() -> Self {
        GeoParams {
            lambda1: 1.0,
            lambda2: -3.75,
            lambda3: -0.75,
            alpha: 0.75,
            beta: 3.75,
            theta: 1.65,
            f_offset_pos: -0.5,
            f_offset_neg: 0.5,
            g_gain: 1.0,
            g_offset: 0.25,
        }
    }
}

/// Check every structural invariant of a parameter set. Returns one message
/// per violated invariant; an empty list means the params are valid.
pub fn validate_params(p: &GeoParams) -> Vec<String> {
    let mut v = Vec::new();
    let (l1, l2, l3) = (p.lambda1, p.lambda2, p.lambda3);
    for (name, x) in [("lambda1", l1), ("lambda2", l2), ("lambda3", l3),
                      ("alpha", p.alpha), ("beta", p.beta), ("theta", p.theta)] {
        if !x.is_finite() {
            v.push(format!("{name} is not finite"));
        }
    }
    if !v.is_empty() {
        return v;
    }
    if !(0.0 < -l3 && -l3 < l1 && l1 < -l2) {
        v.push(format!(
            "eigenvalues must satisfy 0 < -lambda3 < lambda1 < -lambda2, got ({l1}, {l2}, {l3})"
        ));
    }
    if (p.alpha - (-l3 / l1)).abs() > 1e-12 {
        v.push(format!(
            "alpha={} disagrees with -lambda3/lambda1={} beyond 1e-12",
            p.alpha,
            -l3 / l1
        ));
    }
    if (p.beta - (-l2 / l1)).abs() > 1e-12 {
        v.push(format!(
            "beta={} disagrees with -lambda2/lambda1={} beyond 1e-12",
            p.beta,
            -l2 / l1
        ));
    }
    if !(p.alpha > 0.0 && p.alpha < 1.0) {
        v.push(format!("alpha must lie in (0, 1), got {}", p.alpha));
    }
    if !(p.beta > 1.0) {
        v.push(format!("beta must exceed 1, got {}", p.beta));
    }
    if !(p.theta > 0.0) {
        v.push(format!("theta must be positive, got {}", p.theta));
    }
    // range of the induced one-dimensional factor: both branches must land in
    // [-1/2, 1/2] without pinning the endpoints
    let half_pow = 0.5f64.powf(p.alpha);
    let f_right_lo = p.f_offset_pos; // limit at 0+
    let f_right_hi = p.theta * half_pow + p.f_offset_pos; // at x = 1/2
    let f_left_lo = -p.theta * half_pow + p.f_offset_neg; // at x = -1/2
    let f_left_hi = p.f_offset_neg; // limit at 0-
    let eps = 1e-12;
    if f_right_lo < I_LO - eps || f_right_hi > I_HI + eps
        || f_left_lo < I_LO - eps || f_left_hi > I_HI + eps
    {
        v.push(format!(
            "f range [{f_left_lo}, {f_left_hi}] u [{f_right_lo}, {f_right_hi}] leaves [-1/2, 1/2]"
        ));
    }
    if (f_right_hi - I_HI).abs() < 1e-9 || (f_left_lo - I_LO).abs() < 1e-9 {
        v.push("f pins an endpoint: f(1/2) = 1/2 or f(-1/2) = -1/2".to_string());
    }
    // fiber map must stay inside the section strip |y| <= 1/2
    let g_sup = p.g_gain.abs() * 0.5 * 0.5f64.powf(p.beta) + p.g_offset.abs();
    if g_sup > 0.5 + eps {
        v.push(format!("sup |g| = {g_sup} exceeds 1/2"));
    }
    v
}

/// Time a linear-flow trajectory starting at (x0, y0, 1) needs to reach the
/// lateral faces |x| = 1: tau(x0) = -ln|x0| / lambda1.
pub fn flight_time(p: &GeoParams, x0: f64) -> Result<f64> {
    if x0 == 0.0 {
        return Err(Error::SingularLeaf(
            "flight time diverges on the leaf x = 0".to_string(),
        ));
    }
    if !(x0.abs() <= 0.5) {
        return Err(Error::domain(format!("x0 must lie in [-1/2, 1/2], got {x0}")));
    }
    Ok(-x0.abs().ln() / p.lambda1)
}

/// Exit point of the linear flow on the lateral face: the trajectory from
/// (x, y, 1) leaves through x = sgn(x) at (sgn(x), y |x|^beta, |x|^alpha).
pub fn l_map(p: &GeoParams, x: f64, y: f64) -> Result<[f64; 3]> {
    if x == 0.0 {
        return Err(Error::SingularLeaf("exit map undefined on x = 0".to_string()));
    }
    if x.abs() > 0.5 || y.abs() > 0.5 {
        return Err(Error::domain(format!("({x}, {y}) outside the section square")));
    }
    let ax = x.abs();
    Ok([x.signum(), y * ax.powf(p.beta), ax.powf(p.alpha)])
}

/// One-dimensional factor of the return map.
pub fn f_factor(p: &GeoParams, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::SingularLeaf("f undefined at x = 0".to_string()));
    }
    if x.abs() > 0.5 + 1e-12 {
        return Err(Error::domain(format!("x={x} outside [-1/2, 1/2]")));
    }
    let ax = x.abs();
    Ok(if x > 0.0 {
        p.theta * ax.powf(p.alpha) + p.f_offset_pos
    } else {
        -p.theta * ax.powf(p.alpha) + p.f_offset_neg
    })
}

/// Contracting fiber coordinate of the return map:
/// g(x, y) = g_gain * y * |x|^beta + sgn(x) * g_offset.
pub fn g_fiber(p: &GeoParams, x: f64, y: f64) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::SingularLeaf("g undefined at x = 0".to_string()));
    }
    Ok(p.g_gain * y * x.abs().powf(p.beta) + x.signum() * p.g_offset)
}

/// First-return map on the section: P(x, y) = (f(x), g(x, y)). The first
/// coordinate never depends on y.
pub fn poincare(p: &GeoParams, x: f64, y: f64) -> Result<(f64, f64)> {
    Ok((f_factor(p, x)?, g_fiber(p, x, y)?))
}

/// Lorenz ODE coefficients.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct OdeParams {
    pub a: f64,
    pub r: f64,
    pub b: f64,
}

impl Default for OdeParams {
    fn default() -> Self {
        OdeParams { a: 10.0, r: 28.0, b: 8.0 / 3.0 }
    }
}

fn lorenz_rhs(p: &OdeParams, s: [f64; 3]) -> [f64; 3] {
    let [x, y, z] = s;
    [p.a * (y - x), p.r * x - y - x * z, x * y - p.b * z]
}

/// Integrate the Lorenz system with fixed-step fourth-order Runge-Kutta.
///
/// `transient` steps are discarded, then `n_steps` states are retained (one
/// per step). The integration aborts with a blow-up error as soon as the
/// Euclidean norm of the state exceeds [`BLOWUP_NORM`].
pub fn ode_orbit(
    p: &OdeParams,
    start: [f64; 3],
    dt: f64,
    n_steps: usize,
    transient: usize,
) -> Result<Vec<[f64; 3]>> {
    ode_orbit_strided(p, start, dt, n_steps, transient, 1)
}

/// Like [`ode_orbit`] but retains one state per `stride` integration steps,
/// so the same point budget covers `stride` times as much flow time. A low
/// natural-measure cell is visited in proportion to time, which makes the
/// covered-cell counts of a strided cloud far closer to their limits than a
/// contiguous orbit of equal length.
pub fn ode_orbit_strided(
    p: &OdeParams,
    start: [f64; 3],
    dt: f64,
    n_points: usize,
    transient: usize,
    stride: usize,
) -> Result<Vec<[f64; 3]>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::domain(format!("dt must be positive, got {dt}")));
    }
    if n_points == 0 {
        return Err(Error::domain("n_steps must be at least 1".to_string()));
    }
    if stride == 0 {
        return Err(Error::domain("stride must be at least 1".to_string()));
    }
    let mut s = start;
    let mut out = Vec::with_capacity(n_points);
    let total = transient + n_points * stride;
    for step in 0..total {
        let k1 = lorenz_rhs(p, s);
        let k2 = lorenz_rhs(p, add_scaled(s, k1, dt / 2.0));
        let k3 = lorenz_rhs(p, add_scaled(s, k2, dt / 2.0));
        let k4 = lorenz_rhs(p, add_scaled(s, k3, dt));
        for i in 0..3 {
            s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let norm = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
        if !norm.is_finite() || norm > BLOWUP_NORM {
            return Err(Error::BlowUp { step, limit: BLOWUP_NORM });
        }
        if step >= transient && (step - transient) % stride == stride - 1 {
            out.push(s);
        }
    }
    Ok(out)
}

fn add_scaled(s: [f64; 3], k: [f64; 3], h: f64) -> [f64; 3] {
    [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2]]
}

/// Write a 3D point cloud as CSV with header `x,y,z`. When `provenance` is
/// given it is emitted first as a `# ...` comment line.
pub fn write_cloud_csv(path: &Path, points: &[[f64; 3]], provenance: Option<&str>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    if let Some(line) = provenance {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "x,y,z")?;
    for p in points {
        writeln!(w, "{},{},{}", p[0], p[1], p[2])?;
    }
    w.flush()?;
    Ok(())
}

/// Read a point cloud written by [`write_cloud_csv`]; `#` comment lines and
/// the header are skipped. Rows with fewer than 3 columns are an error, so a
/// 2D section cloud must go through [`read_section_csv`] instead.
pub fn read_cloud_csv(path: &Path) -> Result<Vec<[f64; 3]>> {
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with('x') {
            continue;
        }
        let mut it = t.split(',');
        let mut p = [0.0; 3];
        for slot in p.iter_mut() {
            *slot = it
                .next()
                .ok_or_else(|| Error::Parse(format!("line {}: expected 3 columns", ln + 1)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
        }
        out.push(p);
    }
    Ok(out)
}

/// Write section points as CSV with header `x,y`.
pub fn write_section_csv(path: &Path, points: &[(f64, f64)], provenance: Option<&str>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    if let Some(line) = provenance {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "x,y")?;
    for (x, y) in points {
        writeln!(w, "{x},{y}")?;
    }
    w.flush()?;
    Ok(())
}

/// Read 2D section points (`x,y` CSV).
pub fn read_section_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with('x') {
            continue;
        }
        let mut it = t.split(',');
        let mut parse = |what: &str| -> Result<f64> {
            it.next()
                .ok_or_else(|| Error::Parse(format!("line {}: missing {what}", ln + 1)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))
        };
        out.push((parse("x")?, parse("y")?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn default_params_are_valid() {
        assert!(validate_params(&GeoParams::default()).is_empty());
    }

    #[test]
    fn eigenvalue_example_derives_published_ratios() {
        // oracle: the quadratic lambda^2 + 11 lambda - 270 = 0 gives the
        // x-y plane eigenvalues of the classical Lorenz linearization at the
        // origin for (a, r, b) = (10, 28, 8/3); lambda3 = -b
        let s = (121.0f64 + 1080.0).sqrt();
        let l1 = (-11.0 + s) / 2.0;
        let l2 = (-11.0 - s) / 2.0;
        let l3 = -8.0 / 3.0;
        assert!((l1 - 11.8277234511634563).abs() < 1e-12);
        let p = GeoParams::from_eigenvalues(l1, l2, l3).unwrap();
        assert!(validate_params(&p).is_empty());
        assert!((p.alpha - 0.22545899704852796).abs() < 1e-12);
        assert!((p.beta - 1.9300183628251778).abs() < 1e-12);
        // stored ratios reproduce the eigenvalue ratios exactly enough
        assert!((p.alpha - (-p.lambda3 / p.lambda1)).abs() < 1e-12);
        assert!((p.beta - (-p.lambda2 / p.lambda1)).abs() < 1e-12);
    }

    #[test]
    fn ordering_violations_are_reported() {
        let mut p = GeoParams::default();
        p.lambda3 = -2.0; // -l3 > l1 breaks 0 < -l3 < l1
        p.alpha = 2.0;
        let v = validate_params(&p);
        assert!(v.iter().any(|m| m.contains("eigenvalues")));
        assert!(v.iter().any(|m| m.contains("alpha")));
    }

    #[test]
    fn flight_time_matches_closed_form() {
        let p = GeoParams::default(); // lambda1 = 1
        let t = flight_time(&p, (-1.0f64).exp()).unwrap();
        assert!((t - 1.0).abs() < TOL);
        let t = flight_time(&p, 0.5).unwrap();
        assert!((t - std::f64::consts::LN_2).abs() < TOL);
        assert!(matches!(flight_time(&p, 0.0), Err(Error::SingularLeaf(_))));
    }

    #[test]
    fn flight_time_decreases_in_abs_x_and_is_affine_in_decades() {
        let p = GeoParams::default();
        let mut prev = f64::INFINITY;
        for i in 1..=100 {
            let x = 0.5 * i as f64 / 100.0;
            let t = flight_time(&p, x).unwrap();
            assert!(t < prev, "tau must strictly decrease in |x0|");
            prev = t;
        }
        // tau(10^-k) = k ln(10) / lambda1: successive differences constant
        let d1 = flight_time(&p, 1e-3).unwrap() - flight_time(&p, 1e-2).unwrap();
        let d2 = flight_time(&p, 1e-7).unwrap() - flight_time(&p, 1e-6).unwrap();
        assert!((d1 - d2).abs() < 1e-9);
        assert!((d1 - 10f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn l_map_frozen_example() {
        let mut p = GeoParams::default();
        // alpha = 0.5, beta = 2 needs eigenvalues (1, -2, -0.5)
        p.lambda2 = -2.0;
        p.lambda3 = -0.5;
        p.alpha = 0.5;
        p.beta = 2.0;
        let e = l_map(&p, 0.25, 0.5).unwrap();
        assert!((e[0] - 1.0).abs() < TOL);
        assert!((e[1] - 0.03125).abs() < TOL);
        assert!((e[2] - 0.5).abs() < TOL);
        assert!(matches!(l_map(&p, 0.0, 0.1), Err(Error::SingularLeaf(_))));
    }

    #[test]
    fn poincare_frozen_example_and_skew_structure() {
        let p = GeoParams::default();
        let (fx, gy) = poincare(&p, 0.25, 0.0).unwrap();
        // oracle: 1.65 * 0.25^0.75 - 0.5 = 1.65 * 2^(-1.5) - 1/2
        let expect = 1.65 * 2f64.powf(-1.5) - 0.5;
        assert!((fx - 0.0833630944789017).abs() < 1e-12);
        assert!((fx - expect).abs() < TOL);
        assert!((gy - 0.25).abs() < TOL); // y = 0 leaves only the offset
        // first coordinate is independent of y
        for i in 0..50 {
            let y = -0.5 + i as f64 / 49.0;
            let (fx2, _) = poincare(&p, 0.25, y).unwrap();
            assert_eq!(fx2, fx);
        }
    }

    #[test]
    fn fiber_contraction_is_exactly_x_pow_beta() {
        let p = GeoParams::default();
        for i in 1..40 {
            let x = -0.5 + i as f64 / 40.0;
            if x == 0.0 {
                continue;
            }
            let (y1, y2) = (0.3, -0.2);
            let g1 = g_fiber(&p, x, y1).unwrap();
            let g2 = g_fiber(&p, x, y2).unwrap();
            let lip = (g1 - g2).abs() / (y1 - y2).abs();
            assert!((lip - x.abs().powf(p.beta)).abs() < 1e-14);
            assert!(lip <= 0.5f64.powf(p.beta) + 1e-14);
        }
    }

    #[test]
    fn ode_standard_params_stay_bounded() {
        let p = OdeParams::default();
        let orbit = ode_orbit(&p, [1.0, 1.0, 1.0], 0.005, 100_000, 0).unwrap();
        let max_z = orbit.iter().map(|s| s[2].abs()).fold(0.0, f64::max);
        assert!(max_z < 60.0, "max |z| = {max_z}");
    }

    #[test]
    fn ode_subcritical_r_collapses_to_origin() {
        let p = OdeParams { r: 0.5, ..OdeParams::default() };
        let orbit = ode_orbit(&p, [1.0, 1.0, 1.0], 0.005, 100_000, 0).unwrap();
        let last = orbit.last().unwrap();
        let norm = (last[0] * last[0] + last[1] * last[1] + last[2] * last[2]).sqrt();
        assert!(norm < 1e-3, "norm = {norm}");
    }

    #[test]
    fn ode_coarse_step_blows_up() {
        let p = OdeParams::default();
        match ode_orbit(&p, [1.0, 1.0, 1.0], 1.0, 1000, 0) {
            Err(Error::BlowUp { .. }) => {}
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn cloud_csv_round_trip() {
        let dir = std::env::temp_dir().join("geolorenz-test-cloud");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cloud.csv");
        let pts = vec![[1.0, -2.5, 3.25], [0.1, 0.2, 0.3]];
        write_cloud_csv(&path, &pts, Some("cfg=deadbeef")).unwrap();
        let back = read_cloud_csv(&path).unwrap();
        assert_eq!(back, pts);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# cfg=deadbeef\nx,y,z\n"));
    }
}
