//! Continued-fraction spectrum machinery: Perron values of periodic words,
//! enumeration of the discrete head below 3, Hall's interval as a verified
//! sum of digit-bounded Cantor cylinders, and Freiman's constant. Everything
//! here is arithmetic with no dynamics, which is what makes it a useful
//! cross-check for the sampled spectra.

use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::Path;

/// Internal unrolling depth for periodic evaluations: truncation error is
/// below 2^-60, far past f64 resolution.
const PERRON_TERMS: usize = 120;
/// Largest digit allowed in a word; continued-fraction digits in this
/// module's uses never exceed 4, the bound only rejects nonsense.
const MAX_ENTRY: u32 = 1_000_000;

/// An eventually periodic continued fraction [pre; (per repeated)]. Only
/// the leading entry may be zero; an empty period makes the word finite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CFWord {
    pub pre: Vec<u32>,
    pub per: Vec<u32>,
}

impl CFWord {
    pub fn new(pre: Vec<u32>, per: Vec<u32>) -> Result<CFWord> {
        let w = CFWord { pre, per };
        w.validate()?;
        Ok(w)
    }

    /// Purely periodic word with no preperiod.
    pub fn periodic(per: Vec<u32>) -> Result<CFWord> {
        CFWord::new(Vec::new(), per)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pre.is_empty() && self.per.is_empty() {
            return Err(Error::domain("a continued-fraction word needs at least one entry"));
        }
        for (i, &e) in self.pre.iter().enumerate() {
            if e == 0 && i > 0 {
                return Err(Error::domain(
                    "zero entry allowed only in the leading position",
                ));
            }
            if e > MAX_ENTRY {
                return Err(Error::domain(format!("entry {e} exceeds {MAX_ENTRY}")));
            }
        }
        for &e in &self.per {
            if e == 0 {
                return Err(Error::domain("period entries must be positive"));
            }
            if e > MAX_ENTRY {
                return Err(Error::domain(format!("entry {e} exceeds {MAX_ENTRY}")));
            }
        }
        Ok(())
    }

    /// Entry at unrolled position `i`; None past the end of a finite word.
    fn entry(&self, i: usize) -> Option<u32> {
        if i < self.pre.len() {
            Some(self.pre[i])
        } else if self.per.is_empty() {
            None
        } else {
            Some(self.per[(i - self.pre.len()) % self.per.len()])
        }
    }

    /// Parse the bracket form: `"[2;(2,1,1,2)]"`, `"[;(1)]"`, `"[0;(2)]"`,
    /// `"[1;2,3]"`, `"[2;3,(2,1)]"`. The integer part may be empty; a
    /// parenthesized tail group is the period.
    pub fn parse(s: &str) -> Result<CFWord> {
        let t = s.trim();
        let inner = t
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| Error::Parse(format!("word {t:?} must be bracketed")))?;
        let (head, tail) = match inner.split_once(';') {
            Some((h, rest)) => (h, Some(rest)),
            None => (inner, None),
        };
        let mut pre = Vec::new();
        let head = head.trim();
        if !head.is_empty() {
            pre.push(parse_entry(head)?);
        }
        let mut per = Vec::new();
        if let Some(tail) = tail {
            let tail = tail.trim();
            let (plain, group) = match tail.find('(') {
                Some(pos) => {
                    let g = tail[pos..]
                        .strip_prefix('(')
                        .and_then(|r| r.strip_suffix(')'))
                        .ok_or_else(|| {
                            Error::Parse("period group must close the word".to_string())
                        })?;
                    (tail[..pos].trim_end().trim_end_matches(','), Some(g))
                }
                None => (tail, None),
            };
            if !plain.is_empty() {
                for item in plain.split(',') {
                    pre.push(parse_entry(item.trim())?);
                }
            }
            if let Some(g) = group {
                for item in g.split(',') {
                    per.push(parse_entry(item.trim())?);
                }
            }
        }
        CFWord::new(pre, per)
    }
}

fn parse_entry(s: &str) -> Result<u32> {
    s.parse::<u32>()
        .map_err(|e| Error::Parse(format!("bad continued-fraction entry {s:?}: {e}")))
}

impl fmt::Display for CFWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        if let Some(first) = self.pre.first() {
            write!(f, "{first}")?;
        }
        let rest: &[u32] = self.pre.get(1..).unwrap_or(&[]);
        if !rest.is_empty() || !self.per.is_empty() {
            write!(f, ";")?;
        }
        for (i, e) in rest.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        if !self.per.is_empty() {
            if !rest.is_empty() {
                write!(f, ",")?;
            }
            write!(f, "(")?;
            for (i, e) in self.per.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{e}")?;
            }
            write!(f, ")")?;
        }
        write!(f, "]")
    }
}

/// Backward-recurrence evaluation over `terms` unrolled entries (fewer for a
/// finite word). Truncation error is below 2^(-terms/2).
pub fn cf_value(w: &CFWord, terms: usize) -> Result<f64> {
    if terms < 30 {
        return Err(Error::domain(format!("terms must be at least 30, got {terms}")));
    }
    w.validate()?;
    let finite_len = if w.per.is_empty() { w.pre.len() } else { usize::MAX };
    let n = terms.min(finite_len);
    let mut acc = w.entry(n - 1).expect("validated word is nonempty") as f64;
    for i in (0..n - 1).rev() {
        acc = w.entry(i).expect("index below unrolled length") as f64 + 1.0 / acc;
    }
    Ok(acc)
}

/// A spectrum value with the word and shift that achieve it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumValue {
    pub value: f64,
    pub witness: CFWord,
    /// Offset into the periodic part at which the maximum is attained.
    pub shift: usize,
}

/// The extremal value of a periodic word: the maximum over one period of
/// shifts of (forward periodic value) + (reversed-history periodic value).
/// Preperiod digits wash out of both terms, so they are burned through and
/// never enter the maximization.
pub fn perron_k(w: &CFWord) -> Result<SpectrumValue> {
    w.validate()?;
    if w.per.is_empty() {
        return Err(Error::Unsupported(
            "a finite word has no asymptotic spectrum value".to_string(),
        ));
    }
    let l = w.per.len();
    let mut best = f64::NEG_INFINITY;
    let mut best_shift = 0;
    for s in 0..l {
        let rot: Vec<u32> = (0..l).map(|i| w.per[(s + i) % l]).collect();
        let rev: Vec<u32> = (0..l).map(|i| w.per[(s + l - 1 - i) % l]).collect();
        let alpha = cf_value(&CFWord { pre: Vec::new(), per: rot }, PERRON_TERMS)?;
        let beta = cf_value(&CFWord { pre: vec![0], per: rev }, PERRON_TERMS)?;
        let k = alpha + beta;
        if k > best {
            best = k;
            best_shift = s;
        }
    }
    debug_assert!(best >= 5f64.sqrt() - 1e-12);
    Ok(SpectrumValue { value: best, witness: w.clone(), shift: best_shift })
}

/// True when `word` is the lexicographically smallest among its rotations;
/// one representative per cyclic class.
fn is_canonical(word: &[u32]) -> bool {
    let l = word.len();
    for s in 1..l {
        for i in 0..l {
            let a = word[(s + i) % l];
            let b = word[i];
            if a < b {
                return false;
            }
            if a > b {
                break;
            }
        }
    }
    true
}

fn word_from_index(mut idx: u64, len: usize, alphabet_max: u32) -> Vec<u32> {
    let mut w = vec![1u32; len];
    for slot in w.iter_mut() {
        *slot = (idx % alphabet_max as u64) as u32 + 1;
        idx /= alphabet_max as u64;
    }
    w
}

/// All extremal values below 3 from periodic words up to `max_period` over
/// digits 1..=alphabet_max, one canonical witness per cyclic class, sorted
/// and deduplicated at 1e-9.
pub fn enumerate_head(max_period: usize, alphabet_max: u32) -> Result<Vec<SpectrumValue>> {
    if !(1..=8).contains(&max_period) {
        return Err(Error::domain(format!("max_period must lie in 1..=8, got {max_period}")));
    }
    if !(1..=4).contains(&alphabet_max) {
        return Err(Error::domain(format!("alphabet_max must lie in 1..=4, got {alphabet_max}")));
    }
    let mut all: Vec<SpectrumValue> = Vec::new();
    for len in 1..=max_period {
        let count = (alphabet_max as u64).pow(len as u32);
        let mut chunk: Vec<SpectrumValue> = (0..count)
            .into_par_iter()
            .filter_map(|idx| {
                let w = word_from_index(idx, len, alphabet_max);
                if !is_canonical(&w) {
                    return None;
                }
                let sv = perron_k(&CFWord { pre: Vec::new(), per: w }).ok()?;
                (sv.value < 3.0).then_some(sv)
            })
            .collect();
        all.append(&mut chunk);
    }
    all.sort_by(|a, b| a.value.partial_cmp(&b.value).expect("finite spectrum values"));
    let mut out: Vec<SpectrumValue> = Vec::new();
    for sv in all {
        if out.last().is_none_or(|p| sv.value - p.value > 1e-9) {
            out.push(sv);
        }
    }
    Ok(out)
}

/// CSV with header `value,witness_word,shift`; the word is quoted because
/// its display form contains commas.
pub fn write_head_csv(path: &Path, values: &[SpectrumValue], provenance: Option<&str>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    if let Some(line) = provenance {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "value,witness_word,shift")?;
    for sv in values {
        writeln!(w, "{},\"{}\",{}", sv.value, sv.witness, sv.shift)?;
    }
    w.flush()?;
    Ok(())
}

type Mat = [[i64; 2]; 2];

const MAT_ID: Mat = [[1, 0], [0, 1]];

/// Append digit d: M * [[0,1],[1,d]].
fn mob_child(m: Mat, d: i64) -> Mat {
    [
        [m[0][1], m[0][0] + d * m[0][1]],
        [m[1][1], m[1][0] + d * m[1][1]],
    ]
}

fn mob_eval(m: Mat, t: f64) -> f64 {
    (m[0][0] as f64 * t + m[0][1] as f64) / (m[1][0] as f64 * t + m[1][1] as f64)
}

/// Smallest and largest tail values over digit-4-bounded continuations:
/// the purely periodic [0;(4,1)] and [0;(1,4)].
fn tail_bounds() -> (f64, f64) {
    let s = 2f64.sqrt();
    ((s - 1.0) / 2.0, 2.0 * (s - 1.0))
}

/// Value interval of the cylinder with the given leading digits, tails
/// ranging over all digit-bounded continuations.
#[cfg(test)]
fn cylinder_of_word(word: &[u32]) -> (f64, f64) {
    let (t_lo, t_hi) = tail_bounds();
    let mut m = MAT_ID;
    for &d in word {
        m = mob_child(m, d as i64);
    }
    let a = mob_eval(m, t_lo);
    let b = mob_eval(m, t_hi);
    (a.min(b), a.max(b))
}

/// Result of the verified covering of the sum interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HallReport {
    pub resolution: f64,
    /// Verified interval [target_lo, target_hi].
    pub target_lo: f64,
    pub target_hi: f64,
    /// Cylinder pieces covering the digit-bounded Cantor set.
    pub pieces: usize,
    /// Maximal disjoint blocks after merging touching pieces.
    pub blocks: usize,
    pub max_depth: u32,
    pub contains_one: bool,
    pub note: String,
}

const HALL_NODE_CAP: u64 = 5_000_000;
const HALL_STEP_CAP: u64 = 2_000_000;
const HALL_DEPTH_CAP: u32 = 32;

/// Covers the digit-bounded Cantor set by cylinders of width below
/// resolution/4, then sweeps the pairwise-sum intervals left to right to
/// verify they cover [sqrt(2)-1+resolution, 4(sqrt(2)-1)-resolution] with no
/// gap. The cylinders are supersets of the set, so their sums are supersets
/// of the true sum and a verified sweep certifies the covering.
pub fn hall_sum_check(resolution: f64) -> Result<HallReport> {
    if !(1e-5..=1e-2).contains(&resolution) {
        return Err(Error::domain(format!(
            "resolution must lie in [1e-5, 1e-2], got {resolution}"
        )));
    }
    let (t_lo, t_hi) = tail_bounds();
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    let mut stack: Vec<(Mat, u32)> =
        (1..=4).rev().map(|d| (mob_child(MAT_ID, d), 1)).collect();
    let mut nodes = 0u64;
    let mut max_depth = 0u32;
    while let Some((m, depth)) = stack.pop() {
        nodes += 1;
        if nodes > HALL_NODE_CAP {
            return Err(Error::Budget(format!(
                "cylinder count exceeded {HALL_NODE_CAP} at resolution {resolution}"
            )));
        }
        let a = mob_eval(m, t_lo);
        let b = mob_eval(m, t_hi);
        let (lo, hi) = (a.min(b), a.max(b));
        if hi - lo < 0.25 * resolution {
            pieces.push((lo, hi));
            max_depth = max_depth.max(depth);
            continue;
        }
        if depth >= HALL_DEPTH_CAP || m[1][0].max(m[1][1]) > (1 << 50) {
            return Err(Error::ConstructionFailed {
                stage: "hall-cylinder-refine",
                detail: format!("cylinder at depth {depth} still wider than {resolution}/4"),
            });
        }
        for d in (1..=4).rev() {
            stack.push((mob_child(m, d), depth + 1));
        }
    }

    pieces.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite cylinder endpoints"));
    let mut blocks: Vec<(f64, f64)> = Vec::new();
    for &(lo, hi) in &pieces {
        match blocks.last_mut() {
            Some(b) if lo <= b.1 + 1e-12 => b.1 = b.1.max(hi),
            _ => blocks.push((lo, hi)),
        }
    }

    let sqrt2 = 2f64.sqrt();
    let target_lo = sqrt2 - 1.0 + resolution;
    let target_hi = 4.0 * (sqrt2 - 1.0) - resolution;
    let los: Vec<f64> = blocks.iter().map(|b| b.0).collect();
    let mut prefix_hi = Vec::with_capacity(blocks.len());
    let mut run = f64::NEG_INFINITY;
    for b in &blocks {
        run = run.max(b.1);
        prefix_hi.push(run);
    }

    let mut frontier = target_lo;
    let mut steps = 0u64;
    while frontier < target_hi - 1e-12 {
        steps += 1;
        if steps > HALL_STEP_CAP {
            return Err(Error::Budget(format!(
                "sum sweep exceeded {HALL_STEP_CAP} steps at resolution {resolution}"
            )));
        }
        let mut best = f64::NEG_INFINITY;
        for &(bl, bh) in &blocks {
            let rem = frontier - bl;
            // blocks are sorted: once no partner exists, none will
            if rem < los[0] - 1e-12 {
                break;
            }
            let j = los.partition_point(|&l| l <= rem + 1e-12) - 1;
            best = best.max(bh + prefix_hi[j]);
        }
        if !(best > frontier + 1e-15) {
            return Err(Error::ConstructionFailed {
                stage: "hall-sum-sweep",
                detail: format!("no pair of cylinder sums reaches past {frontier}"),
            });
        }
        frontier = best.min(target_hi);
    }

    Ok(HallReport {
        resolution,
        target_lo,
        target_hi,
        pieces: pieces.len(),
        blocks: blocks.len(),
        max_depth,
        contains_one: target_lo <= 1.0 && 1.0 <= target_hi,
        note: "verified numerical covering, not a proof".to_string(),
    })
}

/// The right endpoint of the last gap of the Lagrange spectrum, in closed
/// form: (2221564096 + 283748 sqrt(462)) / 491993569.
pub fn freiman_constant() -> f64 {
    (2_221_564_096.0 + 283_748.0 * 462f64.sqrt()) / 491_993_569.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(s: &str) -> CFWord {
        CFWord::parse(s).unwrap()
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["[2;(2,1,1,2)]", "[;(1)]", "[0;(2)]", "[1;2,3]", "[2;3,(2,1)]", "[2]"] {
            let w = word(s);
            assert_eq!(w.to_string(), s);
            assert_eq!(CFWord::parse(&w.to_string()).unwrap(), w);
        }
        let w = word("[2;(2,1,1,2)]");
        assert_eq!(w.pre, vec![2]);
        assert_eq!(w.per, vec![2, 1, 1, 2]);
        assert!(word("[;(1)]").pre.is_empty());
    }

    #[test]
    fn parse_rejects_malformed_words() {
        for s in ["", "2;(1)", "[1;(2)", "[2;(2),3]", "[1;-2]", "[1;x]"] {
            assert!(
                matches!(CFWord::parse(s), Err(Error::Parse(_))),
                "expected parse error for {s:?}"
            );
        }
        for s in ["[2;(0)]", "[]", "[1;0,2]"] {
            assert!(
                matches!(CFWord::parse(s), Err(Error::Domain(_))),
                "expected domain error for {s:?}"
            );
        }
    }

    #[test]
    fn classic_quadratic_irrationals() {
        let golden = 0.5 * (1.0 + 5f64.sqrt());
        assert!((cf_value(&word("[;(1)]"), 80).unwrap() - golden).abs() < 1e-12);
        let silver = 1.0 + 2f64.sqrt();
        assert!((cf_value(&word("[;(2)]"), 80).unwrap() - silver).abs() < 1e-12);
        assert!((cf_value(&word("[0;(2)]"), 80).unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn finite_word_evaluates_exactly() {
        // 1 + 1/(2 + 1/3) = 10/7
        let v = cf_value(&word("[1;2,3]"), 30).unwrap();
        assert!((v - 10.0 / 7.0).abs() < 1e-15);
        assert_eq!(cf_value(&word("[2]"), 30).unwrap(), 2.0);
    }

    #[test]
    fn doubling_terms_is_stable() {
        for s in ["[;(1)]", "[;(2)]", "[0;(2)]", "[2;(2,1,1,2)]", "[;(4,1)]", "[;(1,4)]"] {
            let a = cf_value(&word(s), 40).unwrap();
            let b = cf_value(&word(s), 80).unwrap();
            assert!((a - b).abs() < 1e-10, "word {s}: {a} vs {b}");
        }
        assert!(matches!(cf_value(&word("[;(1)]"), 20), Err(Error::Domain(_))));
    }

    #[test]
    fn perron_reproduces_the_markov_head() {
        let k1 = perron_k(&word("[;(1)]")).unwrap();
        assert!((k1.value - 5f64.sqrt()).abs() < 1e-9);
        let k2 = perron_k(&word("[;(2)]")).unwrap();
        assert!((k2.value - 2.0 * 2f64.sqrt()).abs() < 1e-9);
        let k3 = perron_k(&word("[;(2,2,1,1)]")).unwrap();
        assert!((k3.value - 221f64.sqrt() / 5.0).abs() < 1e-9);
        assert!(k3.shift < 4);
    }

    #[test]
    fn preperiod_does_not_move_the_value() {
        let a = perron_k(&word("[7;(1)]")).unwrap();
        let b = perron_k(&word("[;(1)]")).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn rotations_share_the_value_exactly() {
        let base = perron_k(&word("[;(2,2,1,1)]")).unwrap().value;
        for s in ["[;(2,1,1,2)]", "[;(1,1,2,2)]", "[;(1,2,2,1)]"] {
            assert_eq!(perron_k(&word(s)).unwrap().value, base);
        }
    }

    #[test]
    fn finite_words_have_no_spectrum_value() {
        assert!(matches!(perron_k(&word("[1;2,3]")), Err(Error::Unsupported(_))));
    }

    #[test]
    fn head_below_three_is_the_markov_list() {
        let head = enumerate_head(4, 2).unwrap();
        assert_eq!(head.len(), 3);
        let expect = [5f64.sqrt(), 2.0 * 2f64.sqrt(), 221f64.sqrt() / 5.0];
        for (sv, e) in head.iter().zip(expect) {
            assert!((sv.value - e).abs() < 1e-9, "got {} want {e}", sv.value);
            assert!(sv.value < 3.0);
            assert!(sv.value >= 5f64.sqrt() - 1e-12);
        }
        assert!(head.windows(2).all(|w| w[0].value < w[1].value));
    }

    #[test]
    fn single_letter_heads() {
        let head = enumerate_head(1, 4).unwrap();
        assert_eq!(head.len(), 2);
        assert!((head[0].value - 5f64.sqrt()).abs() < 1e-9);
        assert!((head[1].value - 2.0 * 2f64.sqrt()).abs() < 1e-9);
        let ones = enumerate_head(3, 1).unwrap();
        assert_eq!(ones.len(), 1);
        assert!((ones[0].value - 5f64.sqrt()).abs() < 1e-9);
    }

    /// Best rational approximation with denominator at most `q_max`, via
    /// continued-fraction convergents.
    fn nearest_rational(x: f64, q_max: i64) -> (i64, i64) {
        let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0i64, x.floor() as i64, 1i64);
        let mut frac = x - x.floor();
        for _ in 0..64 {
            if frac.abs() < 1e-15 || q1 > q_max {
                break;
            }
            let inv = 1.0 / frac;
            let a = inv.floor() as i64;
            frac = inv - inv.floor();
            let p2 = a * p1 + p0;
            let q2 = a * q1 + q0;
            if q2 > q_max {
                break;
            }
            (p0, q0, p1, q1) = (p1, q1, p2, q2);
        }
        (p1, q1)
    }

    #[test]
    fn head_squares_are_rational() {
        for sv in enumerate_head(4, 2).unwrap() {
            let sq = sv.value * sv.value;
            let (p, q) = nearest_rational(sq, 10_000);
            assert!(
                (sq - p as f64 / q as f64).abs() < 1e-8,
                "square {sq} is not near {p}/{q}"
            );
        }
    }

    #[test]
    fn enumerate_head_rejects_bad_bounds() {
        assert!(matches!(enumerate_head(9, 2), Err(Error::Domain(_))));
        assert!(matches!(enumerate_head(0, 2), Err(Error::Domain(_))));
        assert!(matches!(enumerate_head(4, 5), Err(Error::Domain(_))));
        assert!(matches!(enumerate_head(4, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn head_csv_layout() {
        let head = enumerate_head(2, 2).unwrap();
        let dir = std::env::temp_dir().join("cf_head_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("head.csv");
        write_head_csv(&path, &head, None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "value,witness_word,shift");
        let first = lines.next().unwrap();
        assert!(first.contains("\"[;(1)]\""), "got {first}");
    }

    #[test]
    fn tail_bounds_are_the_periodic_extremes() {
        let (lo, hi) = tail_bounds();
        assert!((cf_value(&word("[0;(4,1)]"), 80).unwrap() - lo).abs() < 1e-12);
        assert!((cf_value(&word("[0;(1,4)]"), 80).unwrap() - hi).abs() < 1e-12);
    }

    #[test]
    fn cylinders_nest_and_shrink() {
        // every child cylinder sits inside its parent at under half the width
        let mut stack: Vec<Vec<u32>> = (1..=4).map(|d| vec![d]).collect();
        while let Some(w) = stack.pop() {
            let (plo, phi) = cylinder_of_word(&w);
            for d in 1..=4 {
                let mut c = w.clone();
                c.push(d);
                let (clo, chi) = cylinder_of_word(&c);
                assert!(clo >= plo - 1e-14 && chi <= phi + 1e-14);
                assert!(chi - clo < 0.5 * (phi - plo));
                if c.len() < 5 {
                    stack.push(c);
                }
            }
        }
    }

    #[test]
    fn hall_interval_is_covered() {
        let coarse = hall_sum_check(1e-2).unwrap();
        assert!(coarse.pieces > 10);
        assert!(coarse.contains_one);
        let fine = hall_sum_check(1e-3).unwrap();
        assert!(fine.pieces > coarse.pieces);
        let sqrt2 = 2f64.sqrt();
        assert!((fine.target_lo - (sqrt2 - 1.0 + 1e-3)).abs() < 1e-15);
        assert!((fine.target_hi - (4.0 * (sqrt2 - 1.0) - 1e-3)).abs() < 1e-15);
        let again = hall_sum_check(1e-3).unwrap();
        assert_eq!(fine, again);
    }

    #[test]
    fn hall_rejects_out_of_range_resolution() {
        assert!(matches!(hall_sum_check(1e-6), Err(Error::Domain(_))));
        assert!(matches!(hall_sum_check(0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn freiman_closed_form() {
        let v = freiman_constant();
        assert!((v - 4.527829566160879).abs() < 1e-12);
        assert!(v > 3.0 && v < 6.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn periodic_value_is_rotation_invariant(
                per in proptest::collection::vec(1u32..=4, 1..=6),
                shift in 0usize..6,
            ) {
                let base = perron_k(&CFWord::periodic(per.clone()).unwrap()).unwrap();
                let k = shift % per.len();
                let mut rotated = per.clone();
                rotated.rotate_left(k);
                let turned = perron_k(&CFWord::periodic(rotated).unwrap()).unwrap();
                prop_assert!((base.value - turned.value).abs() < 1e-9);
            }

            #[test]
            fn preperiod_washes_out(
                pre in proptest::collection::vec(1u32..=4, 0..=4),
                per in proptest::collection::vec(1u32..=4, 1..=5),
            ) {
                let bare = perron_k(&CFWord::periodic(per.clone()).unwrap()).unwrap();
                let dressed = perron_k(&CFWord::new(pre, per).unwrap()).unwrap();
                prop_assert!((bare.value - dressed.value).abs() < 1e-9);
            }

            #[test]
            fn truncation_depth_is_settled(
                pre in proptest::collection::vec(1u32..=4, 0..=3),
                per in proptest::collection::vec(1u32..=4, 1..=5),
            ) {
                let w = CFWord::new(pre, per).unwrap();
                let a = cf_value(&w, 50).unwrap();
                let b = cf_value(&w, 90).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!(a > 1.0 && a < 5.0);
            }
        }
    }
}
