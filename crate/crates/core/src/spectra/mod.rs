//! Extremal-value spectra seen two ways: sampled over the section dynamics
//! (`dynamics`) and through classical continued-fraction machinery (`cf`).
//! The second is fully independent of the first and serves as its oracle on
//! the arithmetic side.

pub mod cf;
pub mod dynamics;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Observable on the section square: evaluated at (x, y) points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SectionFn {
    /// First coordinate.
    X,
    /// Second coordinate.
    Y,
    Const(f64),
    /// axx x^2 + axy x y + ayy y^2 + bx x + by y + c.
    Quad {
        axx: f64,
        axy: f64,
        ayy: f64,
        bx: f64,
        by: f64,
        c: f64,
    },
}

impl SectionFn {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            SectionFn::X => x,
            SectionFn::Y => y,
            SectionFn::Const(c) => c,
            SectionFn::Quad { axx, axy, ayy, bx, by, c } => {
                axx * x * x + axy * x * y + ayy * y * y + bx * x + by * y + c
            }
        }
    }

    /// Parse `"x"`, `"y"`, `"const:V"`, or `"quad:axx,axy,ayy,bx,by,c"`.
    pub fn parse(s: &str) -> Result<SectionFn> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "x" => return Ok(SectionFn::X),
            "y" => return Ok(SectionFn::Y),
            _ => {}
        }
        if let Some(v) = t.strip_prefix("const:") {
            let c = parse_f64(v)?;
            return Ok(SectionFn::Const(c));
        }
        if let Some(v) = t.strip_prefix("quad:") {
            let k = parse_f64_list(v, 6)?;
            return Ok(SectionFn::Quad {
                axx: k[0],
                axy: k[1],
                ayy: k[2],
                bx: k[3],
                by: k[4],
                c: k[5],
            });
        }
        Err(Error::Parse(format!(
            "unknown section observable {t:?}; expected x, y, const:V, or quad:6 coefficients"
        )))
    }
}

/// Observable on the flow domain: evaluated at (x, y, z) points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Obs3 {
    X,
    Y,
    Z,
    Const(f64),
    /// Full quadratic in three coordinates.
    Quad {
        axx: f64,
        ayy: f64,
        azz: f64,
        axy: f64,
        axz: f64,
        ayz: f64,
        bx: f64,
        by: f64,
        bz: f64,
        c: f64,
    },
}

impl Obs3 {
    pub fn eval(&self, p: [f64; 3]) -> f64 {
        let [x, y, z] = p;
        match *self {
            Obs3::X => x,
            Obs3::Y => y,
            Obs3::Z => z,
            Obs3::Const(c) => c,
            Obs3::Quad { axx, ayy, azz, axy, axz, ayz, bx, by, bz, c } => {
                axx * x * x
                    + ayy * y * y
                    + azz * z * z
                    + axy * x * y
                    + axz * x * z
                    + ayz * y * z
                    + bx * x
                    + by * y
                    + bz * z
                    + c
            }
        }
    }

    /// Parse `"x"`, `"y"`, `"z"`, `"const:V"`, or
    /// `"quad:axx,ayy,azz,axy,axz,ayz,bx,by,bz,c"`.
    pub fn parse(s: &str) -> Result<Obs3> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "x" => return Ok(Obs3::X),
            "y" => return Ok(Obs3::Y),
            "z" => return Ok(Obs3::Z),
            _ => {}
        }
        if let Some(v) = t.strip_prefix("const:") {
            let c = parse_f64(v)?;
            return Ok(Obs3::Const(c));
        }
        if let Some(v) = t.strip_prefix("quad:") {
            let k = parse_f64_list(v, 10)?;
            return Ok(Obs3::Quad {
                axx: k[0],
                ayy: k[1],
                azz: k[2],
                axy: k[3],
                axz: k[4],
                ayz: k[5],
                bx: k[6],
                by: k[7],
                bz: k[8],
                c: k[9],
            });
        }
        Err(Error::Parse(format!(
            "unknown flow observable {t:?}; expected x, y, z, const:V, or quad:10 coefficients"
        )))
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    let v = s
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite number {s:?}")));
    }
    Ok(v)
}

fn parse_f64_list(s: &str, want: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != want {
        return Err(Error::Parse(format!(
            "expected {want} comma-separated coefficients, got {}",
            parts.len()
        )));
    }
    parts.iter().map(|p| parse_f64(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn section_fn_parses_and_evaluates() {
        assert_eq!(SectionFn::parse("x").unwrap().eval(0.3, -0.1), 0.3);
        assert_eq!(SectionFn::parse(" Y ").unwrap().eval(0.3, -0.1), -0.1);
        assert_eq!(SectionFn::parse("const:2.5").unwrap().eval(0.0, 0.0), 2.5);
        let q = SectionFn::parse("quad:1,0,1,0,0,-0.25").unwrap();
        assert!((q.eval(0.3, 0.4) - 0.0).abs() < 1e-15);
        assert!(SectionFn::parse("w").is_err());
        assert!(SectionFn::parse("quad:1,2").is_err());
        assert!(SectionFn::parse("const:oops").is_err());
    }

    #[test]
    fn obs3_parses_and_evaluates() {
        assert_eq!(Obs3::parse("z").unwrap().eval([0.1, 0.2, 0.9]), 0.9);
        let q = Obs3::parse("quad:1,1,1,0,0,0,0,0,0,0").unwrap();
        assert!((q.eval([1.0, 2.0, 3.0]) - 14.0).abs() < 1e-15);
        assert!(Obs3::parse("quad:1,2,3").is_err());
    }
}
