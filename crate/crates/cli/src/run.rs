//! Subcommand bodies. Every command prints exactly one summary line on
//! success; artifact files all start with the provenance header.

use crate::config::{provenance, ConfigError, Resolved};
use crate::{CantorMode, CfCmd, Cmd, DimCmd, FunctionalArg};
use geolorenz::cantor::{build_direct_cantor, build_theorem_cantor, CantorSpec};
use geolorenz::dim::{auto_scales, box_dimension, d1_bounds, stable_slab_estimate};
use geolorenz::geo::{
    ode_orbit_strided, poincare, read_cloud_csv, read_section_csv, validate_params, write_cloud_csv,
    write_section_csv, GeoParams, OdeParams,
};
use geolorenz::one_d::expansion::{aleo_target, almost_leo, leo_iterate};
use geolorenz::one_d::ulam::ulam_measure;
use geolorenz::one_d::MapModel;
use geolorenz::spectra::cf::{
    cf_value, enumerate_head, freiman_constant, hall_sum_check, perron_k, write_head_csv, CFWord,
};
use geolorenz::spectra::dynamics::{spectrum_sample, Functional};
use geolorenz::spectra::SectionFn;
use geolorenz::{Error, Interval};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

pub enum RunError {
    Config(ConfigError),
    Domain(Error),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Domain(e)
    }
}

/// Section-map parameters from the shared model knobs; beta keeps its
/// default offset from alpha so one flag moves the whole model coherently.
fn geo_params(r: &Resolved) -> Result<GeoParams, Error> {
    let alpha = r.model_alpha;
    let beta = alpha + 3.0;
    let p = GeoParams {
        lambda1: 1.0,
        lambda2: -beta,
        lambda3: -alpha,
        alpha,
        beta,
        theta: r.model_theta,
        ..GeoParams::default()
    };
    let violations = validate_params(&p);
    if violations.is_empty() {
        Ok(p)
    } else {
        Err(Error::InvalidParams(violations.join("; ")))
    }
}

fn map_model(r: &Resolved) -> Result<MapModel, Error> {
    MapModel::new(r.model_alpha, r.model_theta, -0.5, 0.5)
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

fn json_artifact<T: serde::Serialize>(path: &Path, prov: &str, value: &T) -> Result<(), Error> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("serializing artifact: {e}")))?;
    write_text(path, &format!("# {prov}\n{body}\n"))
}

pub fn execute(cmd: &Cmd, r: &Resolved) -> Result<(), RunError> {
    match cmd {
        Cmd::Ode { steps, dt, transient, stride, a, r: rr, b, x0, y0, z0 } => {
            let out = r.out_required()?;
            let mut pairs = r.pairs();
            for (k, v) in [
                ("steps", steps.to_string()),
                ("dt", format!("{dt:?}")),
                ("transient", transient.to_string()),
                ("stride", stride.to_string()),
                ("a", format!("{a:?}")),
                ("r", format!("{rr:?}")),
                ("b", format!("{b:?}")),
                ("x0", format!("{x0:?}")),
                ("y0", format!("{y0:?}")),
                ("z0", format!("{z0:?}")),
            ] {
                pairs.push((k.into(), v));
            }
            let prov = provenance("ode", &pairs);
            let p = OdeParams { a: *a, r: *rr, b: *b };
            let cloud = ode_orbit_strided(&p, [*x0, *y0, *z0], *dt, *steps, *transient, *stride)?;
            write_cloud_csv(out, &cloud, Some(&prov))?;
            println!("ode: {} points -> {}", cloud.len(), out.display());
            Ok(())
        }

        Cmd::Geo { x0, y0, steps } => {
            let out = r.out_required()?;
            let p = geo_params(r)?;
            let mut pairs = r.pairs();
            pairs.push(("x0".into(), format!("{x0:?}")));
            pairs.push(("y0".into(), format!("{y0:?}")));
            pairs.push(("steps".into(), steps.to_string()));
            let prov = provenance("geo", &pairs);
            let mut pts = Vec::with_capacity(steps + 1);
            let (mut x, mut y) = (*x0, *y0);
            pts.push((x, y));
            for _ in 0..*steps {
                (x, y) = poincare(&p, x, y)?;
                pts.push((x, y));
            }
            write_section_csv(out, &pts, Some(&prov))?;
            println!("geo: {} section points -> {}", pts.len(), out.display());
            Ok(())
        }

        Cmd::MapCheck { trials, min_len, bins } => {
            let m = map_model(r)?;
            if !(*min_len > 0.0 && *min_len < 0.5) {
                return Err(ConfigError(format!("min_len must lie in (0, 0.5), got {min_len}")).into());
            }
            let mut pairs = r.pairs();
            pairs.push(("trials".into(), trials.to_string()));
            pairs.push(("min_len".into(), format!("{min_len:?}")));
            pairs.push(("bins".into(), bins.to_string()));
            let prov = provenance("map-check", &pairs);

            let target = aleo_target(&m)?;
            let mut rng = ChaCha8Rng::seed_from_u64(r.rng_seed);
            let mut failures = 0usize;
            let mut max_n = 0usize;
            for t in 0..*trials {
                let lo = rng.random_range(-0.5..=0.5 - min_len);
                let hi = rng.random_range(lo + min_len..=0.5);
                let j = Interval::new(lo, hi)?;
                match almost_leo(&m, &j) {
                    Ok(run) => {
                        max_n = max_n.max(run.n);
                        let terminal = run.step_images.last().expect("run has images");
                        let mut bad = !terminal.approx_eq(&target, 1e-9);
                        bad |= run.step_gaps.iter().any(|g| !(*g > 0.0));
                        if j.len() <= 0.5 {
                            bad |= (run.n as f64) > run.bound + 1e-9;
                        }
                        if bad {
                            failures += 1;
                            eprintln!("map-check: trial {t} on {j} violated a guarantee");
                        }
                    }
                    Err(e) => {
                        failures += 1;
                        eprintln!("map-check: trial {t} on {j}: {e}");
                    }
                }
            }
            let onto = leo_iterate(&m, &Interval::new(0.1, 0.11)?, 64)?;
            let mu = ulam_measure(&m, *bins)?;
            if let Some(out) = &r.out {
                let mut body = format!("# {prov}\nbin_lo,bin_hi,mass\n");
                let w = 1.0 / *bins as f64;
                for (i, mass) in mu.masses.iter().enumerate() {
                    let lo = -0.5 + i as f64 * w;
                    let _ = writeln!(body, "{},{},{}", lo, lo + w, mass);
                }
                write_text(out, &body)?;
            }
            println!(
                "map-check: eta={:.6} onto in {} steps, aleo {}/{} ok (max n={}), \
                 density residual {:.3e} over {} bins",
                m.eta(),
                onto.n,
                trials - failures,
                trials,
                max_n,
                mu.invariance_residual,
                bins
            );
            if failures > 0 {
                return Err(Error::ConstructionFailed {
                    stage: "map-check",
                    detail: format!("{failures} of {trials} trials violated the guarantees"),
                }
                .into());
            }
            Ok(())
        }

        Cmd::Cantor { mode, bins, budget } => {
            let out = r.out_required()?;
            let m = map_model(r)?;
            let mut pairs = r.pairs();
            pairs.push(("bins".into(), bins.to_string()));
            pairs.push(("budget".into(), budget.to_string()));
            let (label, spec) = match mode {
                CantorMode::Direct => {
                    let prov_pairs = pairs.clone();
                    let (spec, _) = build_direct_cantor(&m, r.delta, r.depth)?;
                    let prov = provenance("cantor", &prov_pairs);
                    write_text(out, &format!("# {prov}\n{}\n", spec.to_json()))?;
                    ("direct", spec)
                }
                CantorMode::Theorem => {
                    let mu = ulam_measure(&m, *bins)?;
                    let (spec, _) =
                        build_theorem_cantor(&m, Some(&mu), r.k, r.m_cap, *budget, r.rng_seed)?;
                    let prov = provenance("cantor", &pairs);
                    write_text(out, &format!("# {prov}\n{}\n", spec.to_json()))?;
                    ("staged", spec)
                }
            };
            let bounds = d1_bounds(&spec)?;
            println!(
                "cantor: {label} spec, {} branches, d1 in [{:.4}, {:.4}] -> {}",
                spec.branches.len(),
                bounds.d_low,
                bounds.d_up,
                out.display()
            );
            Ok(())
        }

        Cmd::Dim(DimCmd::BoxCount { input, scales }) => {
            let cloud = read_cloud_csv(input)?;
            let mut pairs = r.pairs();
            pairs.push(("in".into(), input.display().to_string()));
            pairs.push(("scales".into(), scales.to_string()));
            let prov = provenance("dim box", &pairs);
            let mut min = [f64::INFINITY; 3];
            let mut max = [f64::NEG_INFINITY; 3];
            for p in &cloud {
                for a in 0..3 {
                    min[a] = min[a].min(p[a]);
                    max[a] = max[a].max(p[a]);
                }
            }
            let extent = (0..3).map(|a| max[a] - min[a]).fold(0.0f64, f64::max);
            let series = box_dimension(&cloud, &auto_scales(extent, *scales), None)?;
            if let Some(out) = &r.out {
                let mut buf = Vec::new();
                writeln!(buf, "# {prov}").map_err(Error::from)?;
                series.write_csv(&mut buf)?;
                write_text(out, std::str::from_utf8(&buf).expect("csv is utf8"))?;
            }
            println!(
                "dim box: slope {:.4} over {} scales ({} points)",
                series.slope,
                series.scales.len(),
                cloud.len()
            );
            Ok(())
        }

        Cmd::Dim(DimCmd::D1 { spec }) => {
            let text = std::fs::read_to_string(spec).map_err(Error::from)?;
            let parsed = CantorSpec::from_json(&text)?;
            let mut pairs = r.pairs();
            pairs.push(("spec".into(), spec.display().to_string()));
            let prov = provenance("dim d1", &pairs);
            let bounds = d1_bounds(&parsed)?;
            if let Some(out) = &r.out {
                json_artifact(out, &prov, &bounds)?;
            }
            println!(
                "dim d1: [{:.6}, {:.6}] from {} branches ({} excluded)",
                bounds.d_low, bounds.d_up, bounds.branches_used, bounds.branches_excluded
            );
            Ok(())
        }

        Cmd::Dim(DimCmd::Slab { input, width }) => {
            let pts = read_section_csv(input)?;
            let mut pairs = r.pairs();
            pairs.push(("in".into(), input.display().to_string()));
            pairs.push(("width".into(), format!("{width:?}")));
            let prov = provenance("dim slab", &pairs);
            let est = stable_slab_estimate(&pts, *width)?;
            if let Some(out) = &r.out {
                json_artifact(out, &prov, &est)?;
            }
            println!(
                "dim slab: slope {:.4} from {} points near x={:.4}",
                est.slope, est.used, est.center
            );
            Ok(())
        }

        Cmd::SpectraDyn { obs, functional } => {
            let p = geo_params(r)?;
            let f = SectionFn::parse(obs)?;
            let func = match functional {
                FunctionalArg::Sup => Functional::Sup,
                FunctionalArg::Tail => Functional::TailSup,
            };
            let mut pairs = r.pairs();
            pairs.push(("obs".into(), obs.clone()));
            pairs.push((
                "functional".into(),
                match func {
                    Functional::Sup => "sup".into(),
                    Functional::TailSup => "tail".into(),
                },
            ));
            let prov = provenance("spectra-dyn", &pairs);
            let report = spectrum_sample(&p, &f, func, r.seeds, r.horizon, r.rng_seed)?;
            if let Some(out) = &r.out {
                report.write_csv(out, Some(&prov))?;
            }
            let lo = report.values.first().expect("nonempty report");
            let hi = report.values.last().expect("nonempty report");
            println!(
                "spectra-dyn: {} seeds ({} failed), {} clusters, range [{:.6}, {:.6}]",
                report.seeds,
                report.failures,
                report.clusters.len(),
                lo,
                hi
            );
            Ok(())
        }

        Cmd::SpectraCf(CfCmd::Head { max_period, alphabet_max }) => {
            let mut pairs = r.pairs();
            pairs.push(("max_period".into(), max_period.to_string()));
            pairs.push(("alphabet_max".into(), alphabet_max.to_string()));
            let prov = provenance("spectra-cf head", &pairs);
            let values = enumerate_head(*max_period, *alphabet_max)?;
            if let Some(out) = &r.out {
                write_head_csv(out, &values, Some(&prov))?;
            }
            let mut shown = String::new();
            for v in values.iter().take(3) {
                let _ = write!(shown, " {}={:.12}", v.witness, v.value);
            }
            println!("spectra-cf head: {} values;{shown}", values.len());
            Ok(())
        }

        Cmd::SpectraCf(CfCmd::Hall { resolution }) => {
            let mut pairs = r.pairs();
            pairs.push(("resolution".into(), format!("{resolution:?}")));
            let prov = provenance("spectra-cf hall", &pairs);
            let report = hall_sum_check(*resolution)?;
            if let Some(out) = &r.out {
                json_artifact(out, &prov, &report)?;
            }
            println!(
                "spectra-cf hall: covered [{:.6}, {:.6}] by {} pieces in {} blocks, contains 1: {}",
                report.target_lo, report.target_hi, report.pieces, report.blocks, report.contains_one
            );
            Ok(())
        }

        Cmd::SpectraCf(CfCmd::Value { word, terms }) => {
            let w = CFWord::parse(word)?;
            let x = cf_value(&w, *terms)?;
            if w.per.is_empty() {
                println!("spectra-cf value: {w} = {x:.15} (finite word, no spectrum value)");
            } else {
                let k = perron_k(&w)?;
                println!(
                    "spectra-cf value: {w} = {x:.15}, spectrum value {:.15} at shift {}",
                    k.value, k.shift
                );
            }
            Ok(())
        }

        Cmd::SpectraCf(CfCmd::Freiman) => {
            println!("spectra-cf freiman: {:.15}", freiman_constant());
            Ok(())
        }

        Cmd::Report { dir } => {
            let mut pairs = r.pairs();
            pairs.push(("dir".into(), dir.display().to_string()));
            let prov = provenance("report", &pairs);
            let mut lines = Vec::new();

            let cloud = dir.join("cloud.csv");
            if cloud.is_file() {
                match read_cloud_csv(&cloud) {
                    Ok(c) => lines.push(format!("cloud.csv: {} points", c.len())),
                    Err(e) => lines.push(format!("cloud.csv: unreadable ({e})")),
                }
            }
            let section = dir.join("section.csv");
            if section.is_file() {
                match read_section_csv(&section) {
                    Ok(s) => lines.push(format!("section.csv: {} points", s.len())),
                    Err(e) => lines.push(format!("section.csv: unreadable ({e})")),
                }
            }
            let spec_path = dir.join("spec.json");
            if spec_path.is_file() {
                let described = std::fs::read_to_string(&spec_path)
                    .map_err(Error::from)
                    .and_then(|t| CantorSpec::from_json(&t))
                    .and_then(|s| d1_bounds(&s).map(|b| (s, b)));
                match described {
                    Ok((s, b)) => lines.push(format!(
                        "spec.json: {} branches, d1 in [{:.4}, {:.4}]",
                        s.branches.len(),
                        b.d_low,
                        b.d_up
                    )),
                    Err(e) => lines.push(format!("spec.json: unreadable ({e})")),
                }
            }
            for name in ["head.csv", "spectrum.csv"] {
                let p = dir.join(name);
                if p.is_file() {
                    let text = std::fs::read_to_string(&p).map_err(Error::from)?;
                    let rows = text
                        .lines()
                        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
                        .count()
                        .saturating_sub(1);
                    lines.push(format!("{name}: {rows} rows"));
                }
            }

            for l in &lines {
                println!("{l}");
            }
            if let Some(out) = &r.out {
                let mut body = format!("# {prov}\n");
                for l in &lines {
                    body.push_str(l);
                    body.push('\n');
                }
                write_text(out, &body)?;
            }
            println!("report: {} artifacts inspected in {}", lines.len(), dir.display());
            Ok(())
        }
    }
}
