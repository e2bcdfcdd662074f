//! Dimension estimators: Moran equation solves, certified bounds from
//! branch systems, and box-counting fits for point clouds and realized
//! Cantor sets.
//!
//! Conventions: box counts use axis-aligned grids anchored at the data
//! minimum, counts are exact set cardinalities (no sampling), and slopes
//! come from least squares of ln N against ln(1/s) over a fit window that
//! defaults to the middle half of the scale ladder.

use crate::cantor::{branch_itinerary, pullback_through, CantorSpec};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::one_d::MapModel;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashSet;
use std::io::Write;

/// Which side of the Moran equation the ratios live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoranKind {
    /// Contraction ratios in (0, 1): solve sum r_i^d = 1.
    Contraction,
    /// Expansion factors above 1: solve sum lambda_i^(-d) = 1.
    Expansion,
}

/// Solves the Moran equation by bisection to 1e-12.
pub fn moran_solve(ratios: &[f64], kind: MoranKind) -> Result<f64> {
    if ratios.is_empty() {
        return Err(Error::domain("no ratios given"));
    }
    let mut rs = Vec::with_capacity(ratios.len());
    for &r in ratios {
        if !r.is_finite() {
            return Err(Error::domain(format!("ratio {r} is not finite")));
        }
        match kind {
            MoranKind::Contraction => {
                if !(r > 0.0 && r < 1.0) {
                    return Err(Error::domain(format!(
                        "contraction ratio {r} outside (0, 1)"
                    )));
                }
                rs.push(r);
            }
            MoranKind::Expansion => {
                if !(r > 1.0) {
                    return Err(Error::domain(format!(
                        "expansion factor {r} not above 1"
                    )));
                }
                rs.push(1.0 / r);
            }
        }
    }
    let phi = |d: f64| rs.iter().map(|r| r.powf(d)).sum::<f64>();
    if rs.len() == 1 {
        return Ok(0.0); // single ratio: phi(0) = 1 exactly
    }
    let mut hi = 1.0;
    while phi(hi) >= 1.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numeric("Moran equation has no root below 1e6".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        if hi - lo <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if phi(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Certified dimension bounds for the invariant set of a branch system.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DimBounds {
    pub d_low: f64,
    pub d_up: f64,
    /// Branches nested in the base and therefore used.
    pub branches_used: usize,
    /// Entry-only branches excluded from the bound.
    pub branches_excluded: usize,
}

/// Moran bounds from the certified derivative extrema of a spec.
///
/// Upper derivative bounds give the lower dimension bound and vice versa.
/// Only branches nested inside the base participate (the invariant set is
/// coded by those); both bounds are capped at 1 since the set lives on a
/// line. A branch with lambda_min at or below 1 defeats the method.
pub fn d1_bounds(spec: &CantorSpec) -> Result<DimBounds> {
    let nested = spec.nested_branches();
    if nested.is_empty() {
        return Err(Error::EmptySpec("no branch nests inside the base".into()));
    }
    if let Some(bad) = nested.iter().find(|b| !(b.lambda_min > 1.0)) {
        return Err(Error::NotExpanding(format!(
            "branch at {} has lambda_min = {}",
            bad.domain, bad.lambda_min
        )));
    }
    let maxs: Vec<f64> = nested.iter().map(|b| b.lambda_max).collect();
    let mins: Vec<f64> = nested.iter().map(|b| b.lambda_min).collect();
    let d_low = moran_solve(&maxs, MoranKind::Expansion)?.min(1.0);
    let d_up = moran_solve(&mins, MoranKind::Expansion)?.min(1.0);
    Ok(DimBounds {
        d_low,
        d_up,
        branches_used: nested.len(),
        branches_excluded: spec.branches.len() - nested.len(),
    })
}

/// Box-count ladder with its fitted slope.
#[derive(Debug, Clone, Serialize)]
pub struct BoxCountSeries {
    pub scales: Vec<f64>,
    pub counts: Vec<u64>,
    pub fit_lo: usize,
    pub fit_hi: usize,
    pub slope: f64,
}

impl BoxCountSeries {
    /// Rows as `scale,count` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "scale,count")?;
        for (s, c) in self.scales.iter().zip(&self.counts) {
            writeln!(w, "{s},{c}")?;
        }
        Ok(())
    }
}

/// Dyadic scale ladder extent/2, extent/4, ...
pub fn auto_scales(extent: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|j| extent / 2f64.powi(j as i32)).collect()
}

fn fit_slope(scales: &[f64], counts: &[u64], lo: usize, hi: usize) -> f64 {
    let xs: Vec<f64> = scales[lo..hi].iter().map(|s| (1.0 / s).ln()).collect();
    let ys: Vec<f64> = counts[lo..hi].iter().map(|&c| (c as f64).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

fn check_window(n: usize, window: Option<(usize, usize)>) -> Result<(usize, usize)> {
    let (lo, hi) = window.unwrap_or((n / 4, n - n / 4));
    if lo + 2 > hi || hi > n {
        return Err(Error::domain(format!(
            "fit window [{lo}, {hi}) needs at least 2 of the {n} scales"
        )));
    }
    Ok((lo, hi))
}

fn prepare_scales(scales: &[f64]) -> Result<Vec<f64>> {
    if scales.len() < 4 {
        return Err(Error::domain(format!(
            "need at least 4 scales, got {}",
            scales.len()
        )));
    }
    let mut s = scales.to_vec();
    if s.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::domain("scales must be positive and finite"));
    }
    s.sort_by(|a, b| b.total_cmp(a));
    s.dedup();
    let span = s[0] / s[s.len() - 1];
    if span < 10f64.powf(1.5) {
        return Err(Error::domain(format!(
            "scale ladder spans a factor {span:.2}, below 1.5 decades"
        )));
    }
    Ok(s)
}

/// Occupied-cell count of a 3D cloud at one scale, grid anchored at `min`.
fn count_cells_3d(points: &[[f64; 3]], min: [f64; 3], s: f64) -> u64 {
    let cells: HashSet<(i64, i64, i64)> = points
        .par_chunks(65_536)
        .map(|chunk| {
            chunk
                .iter()
                .map(|p| {
                    (
                        ((p[0] - min[0]) / s).floor() as i64,
                        ((p[1] - min[1]) / s).floor() as i64,
                        ((p[2] - min[2]) / s).floor() as i64,
                    )
                })
                .collect::<HashSet<_>>()
        })
        .reduce(HashSet::new, |mut a, b| {
            a.extend(b);
            a
        });
    cells.len() as u64
}

/// Box-count slope of a 3D point cloud.
///
/// Needs at least 1e4 points and a scale ladder spanning 1.5 decades; the
/// fit window defaults to the middle half of the ladder.
pub fn box_dimension(
    points: &[[f64; 3]],
    scales: &[f64],
    window: Option<(usize, usize)>,
) -> Result<BoxCountSeries> {
    if points.len() < 10_000 {
        return Err(Error::InsufficientData(format!(
            "box dimension needs 1e4 points, got {}",
            points.len()
        )));
    }
    let scales = prepare_scales(scales)?;
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a]);
        }
    }
    if !min.iter().chain(max.iter()).all(|v| v.is_finite()) {
        return Err(Error::domain("cloud contains non-finite coordinates"));
    }
    let extent = (0..3).map(|a| max[a] - min[a]).fold(0.0f64, f64::max);
    if extent == 0.0 {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let counts: Vec<u64> = scales
        .iter()
        .map(|&s| count_cells_3d(points, min, s))
        .collect();
    let (fit_lo, fit_hi) = check_window(scales.len(), window)?;
    let slope = fit_slope(&scales, &counts, fit_lo, fit_hi);
    Ok(BoxCountSeries { scales, counts, fit_lo, fit_hi, slope })
}

/// Box-count slope of a set on the line.
pub fn box_dimension_1d(
    values: &[f64],
    scales: &[f64],
    window: Option<(usize, usize)>,
) -> Result<BoxCountSeries> {
    if values.len() < 100 {
        return Err(Error::InsufficientData(format!(
            "1d box dimension needs 100 values, got {}",
            values.len()
        )));
    }
    let scales = prepare_scales(scales)?;
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(min.is_finite() && max.is_finite()) {
        return Err(Error::domain("values contain non-finite entries"));
    }
    if max - min == 0.0 {
        return Err(Error::Degenerate("all values coincide".into()));
    }
    let counts: Vec<u64> = scales
        .iter()
        .map(|&s| {
            values
                .iter()
                .map(|v| ((v - min) / s).floor() as i64)
                .collect::<HashSet<_>>()
                .len() as u64
        })
        .collect();
    let (fit_lo, fit_hi) = check_window(scales.len(), window)?;
    let slope = fit_slope(&scales, &counts, fit_lo, fit_hi);
    Ok(BoxCountSeries { scales, counts, fit_lo, fit_hi, slope })
}

/// Realizes a spec's invariant set as cylinder midpoints: depth-first over
/// branch words, descending until a cylinder is thinner than `min_width`
/// (or `max_depth` deep), then emitting its midpoint.
pub fn realize_spec_points(
    m: &MapModel,
    spec: &CantorSpec,
    min_width: f64,
    max_depth: u32,
) -> Result<Vec<f64>> {
    if !(min_width > 0.0 && min_width.is_finite()) {
        return Err(Error::domain(format!("min_width {min_width} invalid")));
    }
    if !(1..=8).contains(&max_depth) {
        return Err(Error::domain(format!("max_depth must lie in 1..=8, got {max_depth}")));
    }
    let mut nested = spec.nested_branches();
    if nested.len() < 2 {
        return Err(Error::EmptySpec(format!(
            "realization needs 2 nested branches, found {}",
            nested.len()
        )));
    }
    // spatial order; builders emit branches in generation order instead
    nested.sort_by(|a, b| a.domain.lo().total_cmp(&b.domain.lo()));
    let its: Vec<Vec<crate::one_d::Side>> = nested
        .iter()
        .map(|b| branch_itinerary(m, b))
        .collect::<Result<_>>()?;

    // each node carries the forward-time sign word of its cylinder; the
    // interval is the base pulled back through that whole word, so a child
    // refines its parent (appending a branch word acts innermost) and
    // lexicographic word order is spatial order
    let mut out = Vec::new();
    let mut stack: Vec<(Interval, u32, Vec<crate::one_d::Side>)> =
        vec![(spec.base, 0, Vec::new())];
    while let Some((cur, depth, word)) = stack.pop() {
        if out.len() > (1 << 22) {
            return Err(Error::Budget("realization exceeded 4M cylinders".into()));
        }
        if cur.len() < min_width || depth >= max_depth {
            out.push(cur.midpoint());
            continue;
        }
        // right to left so midpoints pop out sorted ascending
        for it in its.iter().rev() {
            let mut child = word.clone();
            child.extend_from_slice(it);
            let pulled = pullback_through(m, &spec.base, &child)?;
            let pulled = pulled.intersect(&cur).ok_or(Error::ConstructionFailed {
                stage: "realize",
                detail: format!("cylinder escaped its parent {cur}"),
            })?;
            stack.push((pulled, depth + 1, child));
        }
    }
    Ok(out)
}

/// Flow dimension bound assembled from the section pieces.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AttractorReport {
    /// Certified transverse lower bound from a branch system.
    pub transverse_d_low: f64,
    /// Stable-direction contribution supplied by the caller.
    pub stable_d_low: f64,
    /// Section bound: transverse plus stable.
    pub section_sum: f64,
    /// Flow bound: 1 + section.
    pub flow_bound: f64,
    /// Whether these numbers already push the flow bound past 2.
    pub certified_above_two: bool,
}

pub fn attractor_report(transverse_d_low: f64, stable_d_low: f64) -> Result<AttractorReport> {
    if !(0.0..=1.0).contains(&transverse_d_low) {
        return Err(Error::domain(format!(
            "transverse bound {transverse_d_low} outside [0, 1]"
        )));
    }
    if !(0.0..=1.0).contains(&stable_d_low) {
        return Err(Error::domain(format!(
            "stable bound {stable_d_low} outside [0, 1]"
        )));
    }
    let section_sum = transverse_d_low + stable_d_low;
    let flow_bound = 1.0 + section_sum;
    Ok(AttractorReport {
        transverse_d_low,
        stable_d_low,
        section_sum,
        flow_bound,
        certified_above_two: flow_bound > 2.0,
    })
}

/// Box-count estimate of the stable-direction thickness inside a thin slab
/// of section points.
#[derive(Debug, Clone, Serialize)]
pub struct SlabEstimate {
    pub center: f64,
    pub width: f64,
    pub used: usize,
    pub slope: f64,
}

/// Fixes a slab of relative width `width` around the median first
/// coordinate and box-counts the second coordinates inside it.
pub fn stable_slab_estimate(points: &[(f64, f64)], width: f64) -> Result<SlabEstimate> {
    if !(width > 0.0 && width <= 0.05) {
        return Err(Error::domain(format!("slab width must lie in (0, 0.05], got {width}")));
    }
    if points.len() < 1000 {
        return Err(Error::InsufficientData(format!(
            "slab estimate needs 1000 section points, got {}",
            points.len()
        )));
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    let center = xs[xs.len() / 2];
    let ys: Vec<f64> = points
        .iter()
        .filter(|p| (p.0 - center).abs() <= 0.5 * width)
        .map(|p| p.1)
        .collect();
    if ys.len() < 1000 {
        return Err(Error::InsufficientData(format!(
            "only {} points fall in the slab at {center}",
            ys.len()
        )));
    }
    let min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let extent = max - min;
    if extent < 1e-12 {
        // fibers collapsed to a point: zero-dimensional by inspection
        return Ok(SlabEstimate { center, width, used: ys.len(), slope: 0.0 });
    }
    let series = box_dimension_1d(&ys, &auto_scales(extent, 8), None)?;
    Ok(SlabEstimate { center, width, used: ys.len(), slope: series.slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::{build_direct_cantor, CantorBranch};

    #[test]
    fn moran_middle_thirds() {
        let d = moran_solve(&[1.0 / 3.0, 1.0 / 3.0], MoranKind::Contraction).unwrap();
        let exact = 2f64.ln() / 3f64.ln();
        assert!((d - exact).abs() < 1e-10, "{d} vs {exact}");
        // residual at the root
        let phi = (1.0f64 / 3.0).powf(d) * 2.0;
        assert!((phi - 1.0).abs() < 1e-10);
    }

    #[test]
    fn moran_expansion_examples() {
        let d = moran_solve(&[4.0, 4.0, 4.0], MoranKind::Expansion).unwrap();
        assert!((d - 3f64.ln() / 4f64.ln()).abs() < 1e-10);
        let d = moran_solve(&[3.0, 3.0], MoranKind::Expansion).unwrap();
        assert!((d - 2f64.ln() / 3f64.ln()).abs() < 1e-10);
        let d = moran_solve(&[2.0, 2.0], MoranKind::Expansion).unwrap();
        assert!((d - 1.0).abs() < 1e-10);
    }

    #[test]
    fn moran_rejects_wrong_side_ratios() {
        assert!(matches!(
            moran_solve(&[1.2, 0.3], MoranKind::Contraction),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            moran_solve(&[0.8], MoranKind::Expansion),
            Err(Error::Domain(_))
        ));
        assert!(matches!(moran_solve(&[], MoranKind::Contraction), Err(Error::Domain(_))));
        assert_eq!(moran_solve(&[0.5], MoranKind::Contraction).unwrap(), 0.0);
    }

    fn toy_spec(l_min: f64, l_max: f64) -> CantorSpec {
        let base = Interval::new(-0.4, 0.4).unwrap();
        CantorSpec {
            base,
            branches: vec![
                CantorBranch {
                    domain: Interval::new(-0.35, -0.2).unwrap(),
                    iterates: 2,
                    pre_iterates: None,
                    lambda_min: l_min,
                    lambda_max: l_max,
                },
                CantorBranch {
                    domain: Interval::new(0.1, 0.3).unwrap(),
                    iterates: 2,
                    pre_iterates: None,
                    lambda_min: l_min,
                    lambda_max: l_max,
                },
            ],
        }
    }

    #[test]
    fn d1_bounds_sandwich_the_moran_values() {
        let b = d1_bounds(&toy_spec(2.0, 4.0)).unwrap();
        assert!((b.d_low - 0.5).abs() < 1e-10);
        assert!((b.d_up - 1.0).abs() < 1e-10);
        assert!(b.d_low <= b.d_up);
        assert_eq!(b.branches_used, 2);
        assert!(matches!(d1_bounds(&toy_spec(0.9, 4.0)), Err(Error::NotExpanding(_))));
    }

    #[test]
    fn box_dimension_of_a_filled_square() {
        let n = 160usize;
        let mut pts = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                pts.push([i as f64 / n as f64, j as f64 / n as f64, 0.0]);
            }
        }
        let series = box_dimension(&pts, &auto_scales(1.0, 7), None).unwrap();
        assert!((series.slope - 2.0).abs() < 0.1, "slope {}", series.slope);
    }

    #[test]
    fn box_dimension_of_a_segment() {
        let pts: Vec<[f64; 3]> = (0..20_000)
            .map(|i| {
                let t = i as f64 / 20_000.0;
                [t, 0.5 * t, 0.25 * t]
            })
            .collect();
        let series = box_dimension(&pts, &auto_scales(1.0, 9), None).unwrap();
        assert!((series.slope - 1.0).abs() < 0.1, "slope {}", series.slope);
    }

    #[test]
    fn box_dimension_input_validation() {
        let pts = vec![[0.5, 0.5, 0.5]; 20_000];
        assert!(matches!(
            box_dimension(&pts, &auto_scales(1.0, 8), None),
            Err(Error::Degenerate(_))
        ));
        let few = vec![[0.0, 0.0, 0.0]; 100];
        assert!(matches!(
            box_dimension(&few, &auto_scales(1.0, 8), None),
            Err(Error::InsufficientData(_))
        ));
        let line: Vec<[f64; 3]> = (0..20_000).map(|i| [i as f64, 0.0, 0.0]).collect();
        assert!(matches!(
            box_dimension(&line, &[0.5, 0.4, 0.3], None),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn one_d_counts_match_middle_thirds() {
        // depth-10 middle-thirds endpoints
        let mut vals = vec![0.0f64];
        for t in 0..10 {
            let shift = 2.0 / 3f64.powi(t + 1);
            let mut next = vals.clone();
            next.extend(vals.iter().map(|v| v + shift));
            vals = next;
        }
        let series = box_dimension_1d(&vals, &auto_scales(1.0, 9), None).unwrap();
        let exact = 2f64.ln() / 3f64.ln();
        assert!((series.slope - exact).abs() < 0.08, "slope {}", series.slope);
    }

    #[test]
    fn realized_direct_spec_fits_between_its_moran_bounds() {
        let m = MapModel::default();
        let (spec, _) = build_direct_cantor(&m, 1e-2, 4).unwrap();
        let pts = realize_spec_points(&m, &spec, 1e-4, 7).unwrap();
        assert!(pts.len() > 200);
        if let Some(i) = (1..pts.len()).find(|&i| pts[i - 1] > pts[i]) {
            panic!(
                "inversion at {i}: {} > {} (of {})",
                pts[i - 1],
                pts[i],
                pts.len()
            );
        }
        for p in &pts {
            assert!(spec.base.contains(*p));
        }
        let series = box_dimension_1d(&pts, &auto_scales(spec.base.len(), 10), None).unwrap();
        let b = d1_bounds(&spec).unwrap();
        assert!(
            series.slope > b.d_low - 0.1 && series.slope < b.d_up + 0.1,
            "slope {} outside [{}, {}]",
            series.slope,
            b.d_low,
            b.d_up
        );
    }

    #[test]
    fn attractor_report_threshold() {
        let r = attractor_report(0.9, 0.2).unwrap();
        assert!((r.flow_bound - 2.1).abs() < 1e-12);
        assert!(r.certified_above_two);
        let r = attractor_report(0.6, 0.0).unwrap();
        assert!((r.flow_bound - 1.6).abs() < 1e-12);
        assert!(!r.certified_above_two);
        assert!(attractor_report(-0.1, 0.0).is_err());
        assert!(attractor_report(0.5, 1.5).is_err());
    }

    #[test]
    fn slab_estimate_reads_fiber_thickness() {
        // spread fibers: y fills an interval
        let pts: Vec<(f64, f64)> = (0..40_000)
            .map(|i| {
                let t = i as f64 / 40_000.0;
                (t - 0.5, 0.3 * ((i % 200) as f64 / 200.0))
            })
            .collect();
        let est = stable_slab_estimate(&pts, 0.05).unwrap();
        assert!((est.slope - 1.0).abs() < 0.15, "slope {}", est.slope);
        // collapsed fibers: a single y value
        let flat: Vec<(f64, f64)> = (0..40_000)
            .map(|i| (i as f64 / 40_000.0 - 0.5, 0.125))
            .collect();
        let est = stable_slab_estimate(&flat, 0.05).unwrap();
        assert!(est.slope.abs() < 0.05);
        assert!(matches!(
            stable_slab_estimate(&flat[..100], 0.05),
            Err(Error::InsufficientData(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn moran_root_zeroes_the_sum(
                ratios in proptest::collection::vec(0.05f64..0.45, 2..6),
            ) {
                let d = moran_solve(&ratios, MoranKind::Contraction).unwrap();
                let sum: f64 = ratios.iter().map(|r| r.powf(d)).sum();
                prop_assert!((sum - 1.0).abs() < 1e-9, "sum {} at d {}", sum, d);
            }

            #[test]
            fn moran_grows_with_an_extra_branch(
                ratios in proptest::collection::vec(0.05f64..0.45, 2..5),
                extra in 0.05f64..0.45,
            ) {
                let d = moran_solve(&ratios, MoranKind::Contraction).unwrap();
                let mut more = ratios.clone();
                more.push(extra);
                let d2 = moran_solve(&more, MoranKind::Contraction).unwrap();
                prop_assert!(d2 > d);
            }

            #[test]
            fn moran_modes_agree_on_reciprocals(
                ratios in proptest::collection::vec(0.05f64..0.45, 2..6),
            ) {
                let d = moran_solve(&ratios, MoranKind::Contraction).unwrap();
                let expansions: Vec<f64> = ratios.iter().map(|r| 1.0 / r).collect();
                let e = moran_solve(&expansions, MoranKind::Expansion).unwrap();
                prop_assert!((d - e).abs() < 1e-9);
            }
        }
    }
}
