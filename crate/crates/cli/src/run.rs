//! Command execution: load inputs, call the library, assemble documents and
//! check invariants.

use std::fs;
use std::path::Path;

use freeatoms::atoms::{self, AtomReport};
use freeatoms::linalg::{self, cx};
use freeatoms::linearize;
use freeatoms::rmt::{self, MassEstimate};
use freeatoms::subord;
use freeatoms::{CMat, EnsembleSpec, FreeSumModel, NCPoly, OracleReport, OracleTarget, SpectralMeasure};
use serde::Serialize;

use crate::config::{CommandKind, OutputFormat, RunConfig};
use crate::docs::*;
use crate::error::CliError;

/// Upper bounds on decomposition residuals, keyed as in [`AtomReport::residuals`].
pub const RESIDUAL_BOUNDS: [(&str, f64); 5] = [("i", 1e-6), ("iv_1", 1e-6), ("iv_2", 1e-6), ("v", 1e-6), ("vii", 1e-4)];
const MASS_SLACK: f64 = 1e-8;

/// A finished run: the rendered document plus what the exit code depends on.
pub struct Artifact {
    pub text: String,
    pub breaches: Vec<String>,
    /// First numerical failure recorded inside the document (scan entries,
    /// comparison rows); the document is still written.
    pub failure: Option<CliError>,
}

pub fn execute(cfg: &RunConfig) -> Result<Artifact, CliError> {
    cfg.validate()?;
    freeatoms::set_workers(cfg.workers)?;
    match cfg.command {
        CommandKind::Convolve => convolve(cfg),
        CommandKind::AtomScan => atom_scan(cfg),
        CommandKind::Decompose => decompose(cfg),
        CommandKind::Linearize => linearize_cmd(cfg),
        CommandKind::Eigtest => eigtest(cfg),
        CommandKind::Oracle => oracle(cfg),
        CommandKind::Compare => compare(cfg),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

fn measures(cfg: &RunConfig) -> Result<(SpectralMeasure, SpectralMeasure), CliError> {
    match (&cfg.inputs.mu1, &cfg.inputs.mu2) {
        (Some(a), Some(b)) => Ok((parse_json(a)?, parse_json(b)?)),
        _ => Err(CliError::Schema(format!("{} needs --mu1 and --mu2", cfg.command))),
    }
}

fn model(cfg: &RunConfig) -> Result<FreeSumModel, CliError> {
    if let Some(path) = &cfg.inputs.model {
        if cfg.inputs.mu1.is_some() || cfg.inputs.mu2.is_some() {
            return Err(CliError::Schema("give either --model or --mu1/--mu2, not both".into()));
        }
        return parse_json(path);
    }
    let (mu1, mu2) = measures(cfg)?;
    Ok(FreeSumModel::scalar(mu1, mu2))
}

/// Locations from `--at` (as multiples of the identity) and `--locations`.
fn locations(cfg: &RunConfig, n: usize) -> Result<Vec<CMat>, CliError> {
    let mut out: Vec<CMat> = cfg.at.iter().map(|&x| linalg::scaled_identity(n, cx(x, 0.0))).collect();
    if let Some(path) = &cfg.inputs.locations {
        let value: serde_json::Value = parse_json(path)?;
        let many: Result<Vec<Vec<Vec<[f64; 2]>>>, _> = serde_json::from_value(value.clone());
        let rows = match many {
            Ok(m) => m,
            Err(_) => vec![serde_json::from_value::<Vec<Vec<[f64; 2]>>>(value).map_err(|e| {
                CliError::Schema(format!("{}: expected a matrix or a list of matrices: {e}", path.display()))
            })?],
        };
        for r in rows {
            out.push(linalg::mat_serde::from_rows(&r).map_err(CliError::Schema)?);
        }
    }
    for b in &out {
        if b.nrows() != n || b.ncols() != n {
            return Err(CliError::Schema(format!("location is {}x{}, model has n = {n}", b.nrows(), b.ncols())));
        }
        if !linalg::is_hermitian(b.as_ref(), 1e-12) {
            return Err(CliError::Schema("locations must be Hermitian".into()));
        }
    }
    Ok(out)
}

fn single_location(cfg: &RunConfig, n: usize) -> Result<CMat, CliError> {
    let mut locs = locations(cfg, n)?;
    if locs.len() != 1 {
        return Err(CliError::Schema(format!("{} needs exactly one location, got {}", cfg.command, locs.len())));
    }
    Ok(locs.remove(0))
}

fn poly(cfg: &RunConfig) -> Result<NCPoly, CliError> {
    let text = cfg.poly.as_deref().ok_or_else(|| CliError::Schema(format!("{} needs --poly", cfg.command)))?;
    Ok(NCPoly::parse(text)?)
}

/// Invariant checks on one atom report.
pub fn atom_breaches(r: &AtomReport, label: &str, out: &mut Vec<String>) {
    if !(r.mass >= -MASS_SLACK && r.mass <= 1.0 + MASS_SLACK) {
        out.push(format!("{label}: mass {} outside [0, 1]", r.mass));
    }
    for (key, bound) in RESIDUAL_BOUNDS {
        if let Some(v) = r.residual(key) {
            if !(v <= bound) {
                out.push(format!("{label}: residual ({key}) = {v:e} exceeds {bound:e}"));
            }
        }
    }
    if let Some(v) = r.residual("ii_min_beta") {
        if !(v > 0.0) {
            out.push(format!("{label}: β is not positive definite (min eigenvalue {v:e})"));
        }
    }
    if let Some(v) = r.residual("iii_min_kernel_trace") {
        if !(v >= -MASS_SLACK) {
            out.push(format!("{label}: negative kernel trace {v:e}"));
        }
    }
    let t = &r.integer_test;
    if t.target.is_some() && !t.pass {
        out.push(format!("{label}: integer test failed ({} vs {:?})", t.value, t.target));
    }
}

fn render<T: Serialize>(cfg: &RunConfig, breaches: Vec<String>, result: T, csv: impl FnOnce(&T) -> Result<String, CliError>) -> Result<Artifact, CliError> {
    let text = match cfg.format {
        OutputFormat::Csv => csv(&result)?,
        OutputFormat::Json => {
            let doc = Document { config: cfg.clone(), breaches: breaches.clone(), result };
            crate::pretty::to_string(&doc).map_err(|e| CliError::Invariant(e.to_string()))?
        }
    };
    Ok(Artifact { text, breaches, failure: None })
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

fn key_values(pairs: Vec<(&str, String)>) -> Result<String, CliError> {
    csv_text(&["key", "value"], pairs.into_iter().map(|(k, v)| vec![k.to_string(), v]))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn location_label(b: &CMat) -> String {
    if b.nrows() == 1 {
        b[(0, 0)].re.to_string()
    } else {
        serde_json::to_string(&linalg::mat_serde::to_rows(b)).unwrap_or_default()
    }
}

fn convolve(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let m = model(cfg)?;
    let grid = cfg.grid.ok_or_else(|| CliError::Schema("convolve needs --grid min:max:points".into()))?;
    let xs = grid.points();
    let dens = subord::sum_density(&m, &xs, cfg.y_eval, cfg.tol)?;
    let points: Vec<DensityPoint> = dens.iter().map(|&(x, density)| DensityPoint { x, density }).collect();
    let grid_mass: f64 = points.windows(2).map(|w| 0.5 * (w[0].density + w[1].density) * (w[1].x - w[0].x)).sum();
    let mut breaches = Vec::new();
    for p in &points {
        if !(p.density >= -1e-9) {
            breaches.push(format!("density {} at x = {} is negative or not finite", p.density, p.x));
        }
    }
    let result = ConvolveResult { y: cfg.y_eval, grid_mass, points };
    render(cfg, breaches, result, |r| {
        csv_text(&["x", "density"], r.points.iter().map(|p| vec![p.x.to_string(), p.density.to_string()]))
    })
}

fn atom_scan(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let m = model(cfg)?;
    let mut locs = locations(cfg, m.n)?;
    if locs.is_empty() {
        if m.n != 1 {
            return Err(CliError::Schema("matrix models need --at or --locations".into()));
        }
        locs = atoms::sum_atom_candidates(&m.mu1, &m.mu2).iter().map(|c| linalg::scaled_identity(1, cx(c.0, 0.0))).collect();
    }
    let opts = cfg.ladder();
    let mut failure = None;
    let mut breaches = Vec::new();
    let mut entries = Vec::new();
    for (b, r) in locs.iter().zip(atoms::atom_scan(&m, &locs, &opts)) {
        let label = format!("location {}", location_label(b));
        match r {
            Ok(rep) => {
                atom_breaches(&rep, &label, &mut breaches);
                entries.push(ScanEntry { location: b.clone(), report: Some(rep), error: None });
            }
            Err(e) => {
                let msg = format!("{label}: {e}");
                failure.get_or_insert(CliError::from(e));
                entries.push(ScanEntry { location: b.clone(), report: None, error: Some(msg) });
            }
        }
    }
    let mut art = render(cfg, breaches, ScanResult { entries }, |r| {
        let rows = r.entries.iter().map(|e| {
            let rep = e.report.as_ref();
            vec![
                location_label(&e.location),
                opt(rep.map(|r| r.mass)),
                opt(rep.map(|r| r.integer_test.value)),
                opt(rep.and_then(|r| r.integer_test.target)),
                opt(rep.map(|r| r.integer_test.pass)),
                opt(rep.map(|r| r.decomposition.is_some())),
                e.error.clone().unwrap_or_default(),
            ]
        });
        csv_text(&["location", "mass", "integer_value", "integer_target", "integer_pass", "decomposed", "error"], rows)
    })?;
    art.failure = failure;
    Ok(art)
}

fn decompose(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let m = model(cfg)?;
    let b = single_location(cfg, m.n)?;
    let opts = cfg.ladder();
    let probe = atoms::atom_mass(&m, b.as_ref(), &opts)?;
    let invertible = probe.e_eigenvalues.first().is_some_and(|&v| v > probe.null_threshold);
    let mut breaches = Vec::new();
    let result = if invertible {
        let report = atoms::decompose_atom(&m, b.as_ref(), &opts)?;
        atom_breaches(&report, "atom", &mut breaches);
        DecomposeResult { report, regularization: None }
    } else {
        let (pair, y) = atoms::support_regularize(&m, b.as_ref(), &opts)?;
        atom_breaches(&probe, "atom", &mut breaches);
        regularization_breaches(&pair, opts.integer_tol, &mut breaches);
        DecomposeResult { report: probe, regularization: Some((pair, y)) }
    };
    render(cfg, breaches, result, |r| {
        let rep = &r.report;
        let mut kv = vec![
            ("mass", rep.mass.to_string()),
            ("spread", rep.spread.to_string()),
            ("integer_value", rep.integer_test.value.to_string()),
            ("integer_target", opt(rep.integer_test.target)),
            ("integer_pass", rep.integer_test.pass.to_string()),
        ];
        for (k, v) in &rep.residuals {
            kv.push((k.as_str(), v.to_string()));
        }
        if let Some((pair, _)) = &r.regularization {
            kv.push(("offset", pair.offset.to_string()));
            kv.push(("predicted_offset", pair.predicted_offset.to_string()));
            kv.push(("doubled_invertible", pair.doubled_invertible.to_string()));
        }
        key_values(kv)
    })
}

fn regularization_breaches(pair: &atoms::CompressionPair, tol: f64, out: &mut Vec<String>) {
    if !pair.doubled_invertible {
        out.push("E is not invertible after support compression".into());
    }
    let d = (pair.offset - pair.offset.round()).abs();
    if !(d <= tol) {
        out.push(format!("compression offset {} is {d:e} from an integer", pair.offset));
    }
}

fn linearize_cmd(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let p = poly(cfg)?;
    let (pencil, cert) = linearize::linearize(&p)?;
    let verified = linearize::verify_certificate(&p, &cert);
    let equivalence = if cfg.check_trials > 0 {
        Some(linearize::invertibility_equivalence_check(&p, &pencil, cfg.check_trials, cfg.check_dim, cfg.seed)?)
    } else {
        None
    };
    let mut breaches = Vec::new();
    if !verified {
        breaches.push("linearization certificate does not verify".into());
    }
    if !cert.is_selfadjoint_form() {
        breaches.push("certificate is not in selfadjoint form".into());
    }
    if let Some(eq) = &equivalence {
        if !eq.violations.is_empty() {
            breaches.push(format!("{} invertibility-equivalence violations", eq.violations.len()));
        }
    }
    let result = LinearizeResult {
        polynomial: p.to_string(),
        integer_coefficients: linearize::has_integer_coefficients(&pencil),
        pencil,
        certificate: cert.to_text(),
        certificate_verified: verified,
        equivalence,
    };
    render(cfg, breaches, result, |r| {
        let mut rows = Vec::new();
        for (name, a) in [("a0", &r.pencil.a0), ("a1", &r.pencil.a1), ("a2", &r.pencil.a2)] {
            for i in 0..a.nrows() {
                for j in 0..a.ncols() {
                    let v = a[(i, j)];
                    if v != cx(0.0, 0.0) {
                        rows.push(vec![name.to_string(), i.to_string(), j.to_string(), v.re.to_string(), v.im.to_string()]);
                    }
                }
            }
        }
        csv_text(&["matrix", "row", "col", "re", "im"], rows)
    })
}

fn single_lambda(cfg: &RunConfig) -> Result<f64, CliError> {
    match cfg.lambdas.as_slice() {
        [l] => Ok(*l),
        other => Err(CliError::Schema(format!("{} needs exactly one --lambda, got {}", cfg.command, other.len()))),
    }
}

fn eigtest(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let p = poly(cfg)?;
    let lambda = single_lambda(cfg)?;
    let (mu1, mu2) = measures(cfg)?;
    let opts = cfg.ladder();
    let r = atoms::eigenvalue_test(&p, lambda, &mu1, &mu2, &opts)?;
    let mut breaches = Vec::new();
    if !r.trichotomy_pass {
        breaches.push(format!("mass {} outside {{0, 1/2, 1}} with atomless inputs", r.mass));
    }
    atom_breaches(&r.atom, "pencil atom", &mut breaches);
    if let Some((pair, _)) = &r.regularization {
        regularization_breaches(pair, opts.integer_tol, &mut breaches);
    }
    render(cfg, breaches, r, |r| {
        key_values(vec![
            ("polynomial", r.polynomial.clone()),
            ("lambda", r.lambda.to_string()),
            ("mass", r.mass.to_string()),
            ("regularized_mass", opt(r.regularized_mass)),
            ("offset_distance", opt(r.offset_distance)),
            ("inputs_atomless", r.inputs_atomless.to_string()),
            ("trichotomy_pass", r.trichotomy_pass.to_string()),
            ("conclusion", r.conclusion.clone()),
        ])
    })
}

/// The oracle runs for a polynomial (all `λ` at once) or, for a model, one
/// run per location.
fn oracle_runs(cfg: &RunConfig) -> Result<(Vec<f64>, Vec<OracleReport>, Option<(FreeSumModel, Vec<CMat>)>), CliError> {
    let opts = cfg.oracle();
    if cfg.poly.is_some() {
        let p = poly(cfg)?;
        if cfg.lambdas.is_empty() {
            return Err(CliError::Schema("give at least one --lambda".into()));
        }
        let (mu1, mu2) = measures(cfg)?;
        let spec = EnsembleSpec::new(cfg.matrix_size, cfg.trials, cfg.seed, mu1, mu2)?;
        let target = OracleTarget::Polynomial { poly: p, lambdas: cfg.lambdas.clone() };
        Ok((cfg.lambdas.clone(), vec![rmt::oracle_report(&spec, &target, &opts)?], None))
    } else {
        let m = model(cfg)?;
        let locs = locations(cfg, m.n)?;
        if locs.is_empty() {
            return Err(CliError::Schema("give --poly with --lambda, or a model with --at/--locations".into()));
        }
        let spec = EnsembleSpec::new(cfg.matrix_size, cfg.trials, cfg.seed, m.mu1.clone(), m.mu2.clone())?;
        let mut reports = Vec::new();
        for b in &locs {
            let target = OracleTarget::Pencil { model: m.clone(), b: b.clone() };
            reports.push(rmt::oracle_report(&spec, &target, &opts)?);
        }
        let labels = locs.iter().map(|b| linalg::normalized_trace(b.as_ref()).re).collect();
        Ok((labels, reports, Some((m, locs))))
    }
}

fn oracle_breaches(r: &OracleReport, out: &mut Vec<String>) {
    let total: f64 = r.histogram.iter().map(|b| b.mass).sum();
    if !(total <= 1.0 + 1e-9) {
        out.push(format!("histogram mass {total} exceeds 1"));
    }
    for m in &r.masses {
        if !(m.mass >= 0.0 && m.mass <= 1.0 && m.std_error >= 0.0) {
            out.push(format!("mass estimate at {} is {} ± {}", m.lambda, m.mass, m.std_error));
        }
    }
}

fn oracle(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let (_, mut reports, _) = oracle_runs(cfg)?;
    if reports.len() != 1 {
        return Err(CliError::Schema("oracle takes a single model location; use compare for several".into()));
    }
    let r = reports.remove(0);
    let mut breaches = Vec::new();
    oracle_breaches(&r, &mut breaches);
    render(cfg, breaches, r, |r| {
        if r.histogram.is_empty() {
            csv_text(&["lambda", "mass", "std_error"], r.masses.iter().map(mass_row))
        } else {
            let rows = r.histogram.iter().map(|b| vec![b.lo.to_string(), b.hi.to_string(), b.density.to_string(), b.mass.to_string()]);
            csv_text(&["lo", "hi", "density", "mass"], rows)
        }
    })
}

fn mass_row(m: &MassEstimate) -> Vec<String> {
    vec![m.lambda.to_string(), m.mass.to_string(), m.std_error.to_string()]
}

fn compare(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let (labels, reports, model_target) = oracle_runs(cfg)?;
    let opts = cfg.ladder();
    let big = cfg.matrix_size as f64;
    let mut failure = None;
    let mut rows = Vec::new();
    for (k, &lambda) in labels.iter().enumerate() {
        let est = match &model_target {
            None => &reports[0].masses[k],
            Some(_) => &reports[k].masses[0],
        };
        let pipeline = match &model_target {
            None => {
                let (mu1, mu2) = measures(cfg)?;
                atoms::eigenvalue_test(&poly(cfg)?, lambda, &mu1, &mu2, &opts).map(|r| r.mass)
            }
            Some((m, locs)) => atoms::atom_mass(m, locs[k].as_ref(), &opts).map(|r| r.mass),
        };
        let tolerance = 2.0 / big + 3.0 * est.std_error;
        let row = match pipeline {
            Ok(mass) => {
                let d = (mass - est.mass).abs();
                CompareRow {
                    lambda,
                    pipeline_mass: Some(mass),
                    oracle_mass: est.mass,
                    std_error: est.std_error,
                    tolerance,
                    discrepancy: Some(d),
                    agree: d <= tolerance,
                    pipeline_error: None,
                }
            }
            Err(e) => {
                let msg = e.to_string();
                failure.get_or_insert(CliError::from(e));
                CompareRow {
                    lambda,
                    pipeline_mass: None,
                    oracle_mass: est.mass,
                    std_error: est.std_error,
                    tolerance,
                    discrepancy: None,
                    agree: false,
                    pipeline_error: Some(msg),
                }
            }
        };
        rows.push(row);
    }
    let mut breaches = Vec::new();
    for r in &reports {
        oracle_breaches(r, &mut breaches);
    }
    for r in rows.iter().filter(|r| !r.agree && r.pipeline_error.is_none()) {
        breaches.push(format!(
            "at {}: pipeline {:?} vs oracle {} exceeds {:e}",
            r.lambda, r.pipeline_mass, r.oracle_mass, r.tolerance
        ));
    }
    let mut art = render(cfg, breaches, CompareResult { rows, oracle: reports }, |r| {
        let rows = r.rows.iter().map(|x| {
            vec![
                x.lambda.to_string(),
                opt(x.pipeline_mass),
                x.oracle_mass.to_string(),
                x.std_error.to_string(),
                x.tolerance.to_string(),
                opt(x.discrepancy),
                x.agree.to_string(),
                x.pipeline_error.clone().unwrap_or_default(),
            ]
        });
        csv_text(&["lambda", "pipeline_mass", "oracle_mass", "std_error", "tolerance", "discrepancy", "agree", "pipeline_error"], rows)
    })?;
    art.failure = failure;
    Ok(art)
}
