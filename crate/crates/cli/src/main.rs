//! `cellwave`: thresholds, traveling waves, spectra and bifurcation data from
//! one JSON configuration file.
//!
//! Exit codes: 0 on success, 1 for a negative mathematical result (no wave,
//! failed diagnostics), 2 for usage or configuration errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use cellwave_core::bifurcation::classify_branch;
use cellwave_core::export::{boundary_csv, boundary_svg, pairs_csv, to_json};
use cellwave_core::model::{chi_star, nonexistence_certificate, stationary_state};
use cellwave_core::solver::{
    export_boundary, solve_traveling_wave_with, sweep_chi, DiagnosticTolerances, SolveMode, WaveOptions,
};
use cellwave_core::spectrum::{
    dispersion_trace, leading_eigenvalue_approx, spectrum_modes, DispersionParams, SpectrumResult, DEFAULT_WINDOW,
};
use cellwave_core::{Error, ModelParams};

#[derive(Parser)]
#[command(name = "cellwave", version, about = "Traveling waves and stability of an active Hele-Shaw cell")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Activity threshold, stationary state and nonexistence certificate.
    Threshold(Common),
    /// Solve for a traveling wave and export its boundary.
    Tw(Common),
    /// Real eigenvalues of the linearized problem per angular mode.
    Spectrum(Common),
    /// Bifurcation coefficient and branch direction at the threshold.
    Bifurcate(Common),
    /// Traveling waves over a list of activity values.
    Sweep(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration; the reference parameters are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for result files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the activity `chi`.
    #[arg(long)]
    chi: Option<f64>,
    /// Overrides the front pressure `p1`.
    #[arg(long)]
    p1: Option<f64>,
    /// Comma-separated angular modes for `spectrum`.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<u32>>,
    /// Print the result document as JSON on stdout.
    #[arg(long)]
    json: bool,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameters(_) | Error::Config(_) | Error::Io(_) | Error::DegenerateForce(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure {
            code: 2,
            message: format!("{e:#}"),
        }
    }
}

type Outcome = std::result::Result<u8, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Threshold(c) => threshold(c),
        Command::Tw(c) => tw(c),
        Command::Spectrum(c) => spectrum(c),
        Command::Bifurcate(c) => bifurcate(c),
        Command::Sweep(c) => sweep(c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Configuration document and the parameters resolved from it and the flags.
struct Setup {
    doc: Value,
    params: ModelParams,
}

fn reference_document() -> Value {
    ModelParams::reference().to_json()
}

fn load(c: &Common) -> std::result::Result<Setup, Failure> {
    let doc: Value = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))?
        }
        None => json!({ "params": reference_document() }),
    };
    let mut pdoc = doc.get("params").cloned().unwrap_or_else(|| doc.clone());
    if let Some(chi) = c.chi {
        pdoc["chi"] = json!(chi);
    }
    if let Some(p1) = c.p1 {
        pdoc["p1"] = json!(p1);
    }
    let params = ModelParams::from_json(&pdoc)?;
    Ok(Setup { doc, params })
}

fn section<'a>(doc: &'a Value, name: &str) -> Option<&'a Value> {
    doc.get(name).filter(|v| v.is_object())
}

fn read_usize(v: Option<&Value>, key: &str, default: usize) -> std::result::Result<usize, Failure> {
    match v.and_then(|s| s.get(key)) {
        None => Ok(default),
        Some(x) => x
            .as_u64()
            .map(|n| n as usize)
            .ok_or_else(|| Error::Config(format!("`{key}` must be a nonnegative integer")).into()),
    }
}

const DEFAULT_EXPORT_POINTS: usize = 512;

fn wave_options(doc: &Value) -> std::result::Result<WaveOptions, Failure> {
    let tw = section(doc, "tw");
    let defaults = WaveOptions::default();
    let mode = match tw.and_then(|s| s.get("mode")).map(|m| m.as_str()) {
        None => SolveMode::FixedP1,
        Some(Some("fixed_p1")) => SolveMode::FixedP1,
        Some(Some("fixed_area")) => SolveMode::FixedArea,
        Some(other) => return Err(Error::Config(format!("unknown tw.mode {other:?}")).into()),
    };
    Ok(WaveOptions {
        mode,
        resolution: read_usize(tw, "resolution", defaults.resolution)?.max(2),
        ..defaults
    })
}

fn write(out: &Path, name: &str, contents: &str) -> std::result::Result<(), Failure> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let path = out.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn emit<T: Serialize>(c: &Common, file: &str, doc: &T, summary: &str) -> std::result::Result<(), Failure> {
    let text = to_json(doc)?;
    write(&c.out, file, &text)?;
    if c.json {
        print!("{text}");
    } else {
        println!("{summary}");
    }
    Ok(())
}

fn threshold(c: &Common) -> Outcome {
    let Setup { params, .. } = load(c)?;
    let cs = chi_star(&params)?;
    let state = stationary_state(&params)?;
    let cert = nonexistence_certificate(&params, None, 2001)?;
    let doc = json!({
        "chi_star": cs,
        "kappa_act": params.kappa_act(),
        "stationary_state": state,
        "nonexistence_certificate": cert,
    });
    let summary = format!(
        "chi* = {cs}\nkappa_act = chi/chi* = {}\nstationary state: c = {}, P = {}\nnonexistence certificate: sup a chi s f'(s) = {} -> {}",
        params.kappa_act(),
        state.c_tilde,
        state.p_tilde,
        cert.sup_value,
        if cert.holds { "no traveling wave exists" } else { "inconclusive" }
    );
    emit(c, "threshold.json", &doc, &summary)?;
    Ok(0)
}

fn scan_table(scan: &[cellwave_core::GSample]) -> String {
    let mut s = String::from("V,G\n");
    for p in scan {
        match p.g {
            Some(g) => s.push_str(&format!("{},{}\n", p.v, g)),
            None => s.push_str(&format!("{},inf\n", p.v)),
        }
    }
    s
}

fn tw(c: &Common) -> Outcome {
    let Setup { doc, params } = load(c)?;
    let opts = wave_options(&doc)?;
    let wave = match solve_traveling_wave_with(&params, &opts) {
        Ok(w) => w,
        Err(Error::NoTravelingWave { scan }) => {
            let table = scan_table(&scan);
            write(&c.out, "scan.csv", &table)?;
            eprintln!("no traveling wave: G(V) has no sign change");
            if c.json {
                print!("{}", to_json(&json!({ "error": "no_traveling_wave", "scan": scan }))?);
            } else {
                print!("{table}");
            }
            return Ok(1);
        }
        Err(e) => return Err(e.into()),
    };
    // The exported polyline size is independent of the one used for the diagnostics.
    let points = read_usize(section(&doc, "tw"), "boundary_points", DEFAULT_EXPORT_POINTS)?.max(8);
    let boundary = export_boundary(&wave.profile, points);
    write(&c.out, "boundary.csv", &boundary_csv(&boundary))?;
    write(&c.out, "shape.svg", &boundary_svg(&boundary))?;
    let mut document = serde_json::to_value(&wave).map_err(|e| Error::Config(e.to_string()))?;
    document["params"] = params.to_json();
    let failures = wave.diagnostics.failures(&DiagnosticTolerances::default());
    document["diagnostics_passed"] = json!(failures.is_empty());
    let summary = format!(
        "V = {}\np1 = {}\nc1 = {}\nxL = {}, xR = {}\narea = {}\ndiagnostics: {}",
        wave.v,
        wave.p1,
        wave.c1,
        wave.x_left,
        wave.x_right,
        wave.area,
        if failures.is_empty() { "all passed".to_string() } else { failures.join("; ") }
    );
    emit(c, "wave.json", &document, &summary)?;
    Ok(if failures.is_empty() { 0 } else { 1 })
}

#[derive(Serialize)]
struct SpectrumReport {
    kappa_act: f64,
    window: [f64; 2],
    /// Small-`λ` expansion of the `m = 1` root, when valid.
    leading_approx: Option<f64>,
    modes: Vec<SpectrumResult>,
}

fn spectrum(c: &Common) -> Outcome {
    let Setup { doc, params } = load(c)?;
    let sec = section(&doc, "spectrum");
    let kappa = match sec.and_then(|s| s.get("kappa_act")) {
        None => params.kappa_act(),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::Config("`spectrum.kappa_act` must be a number".into()))?,
    };
    let window: [f64; 2] = match sec.and_then(|s| s.get("window")) {
        None => DEFAULT_WINDOW,
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| Error::Config(format!("`spectrum.window` must be [lo, hi]: {e}")))?,
    };
    let modes: Vec<u32> = match (&c.modes, sec.and_then(|s| s.get("modes"))) {
        (Some(m), _) => m.clone(),
        (None, Some(v)) => serde_json::from_value(v.clone())
            .map_err(|e| Error::Config(format!("`spectrum.modes` must be a list of integers: {e}")))?,
        (None, None) => vec![0, 1, 2, 3],
    };
    let max_count = read_usize(sec, "max_count", 100)?;
    let samples = read_usize(sec, "trace_samples", 2001)?;
    let results = spectrum_modes(params.gamma, params.r0, kappa, &modes, window, max_count)?;
    for &m in &modes {
        let dp = DispersionParams::new(m, params.gamma, params.r0, kappa)?;
        let trace = dispersion_trace(&dp, window, samples)?;
        write(&c.out, &format!("dispersion_m{m}.csv"), &pairs_csv(["lambda", "H"], &trace))?;
    }
    let leading_approx = DispersionParams::new(1, params.gamma, params.r0, kappa)
        .and_then(|dp| leading_eigenvalue_approx(&dp))
        .ok();
    let mut summary = format!("kappa_act = {kappa}\n");
    for r in &results {
        summary.push_str(&format!(
            "m = {}: leading = {:?}, zero multiplicity = {}, {} nonzero roots{}\n",
            r.m,
            r.leading,
            r.zero_multiplicity,
            r.eigenvalues.len(),
            if r.truncated { " (truncated)" } else { "" }
        ));
    }
    let report = SpectrumReport {
        kappa_act: kappa,
        window,
        leading_approx,
        modes: results,
    };
    emit(c, "spectrum.json", &report, summary.trim_end())?;
    Ok(0)
}

fn bifurcate(c: &Common) -> Outcome {
    let Setup { params, .. } = load(c)?;
    let report = classify_branch(&params)?;
    let summary = format!(
        "chi* = {}\nchi''(0) = {}\neta = {}\nbranch: {:?}",
        report.chi_star, report.chi_pp0, report.eta, report.classification
    );
    emit(c, "bifurcation.json", &report, &summary)?;
    Ok(0)
}

fn sweep(c: &Common) -> Outcome {
    let Setup { doc, params } = load(c)?;
    let opts = wave_options(&doc)?;
    let chis: Vec<f64> = match (c.chi, section(&doc, "sweep").and_then(|s| s.get("chi"))) {
        (Some(chi), _) => vec![chi],
        (None, Some(v)) => serde_json::from_value(v.clone())
            .map_err(|e| Error::Config(format!("`sweep.chi` must be a list of numbers: {e}")))?,
        (None, None) => return Err(Error::Config("missing key `sweep.chi`".into()).into()),
    };
    let points = sweep_chi(&params, &chis, &opts);
    let mut csv = String::from("chi,V,xL,xR,area,c1,error\n");
    let mut rows = Vec::new();
    let mut failed = 0;
    for p in &points {
        match &p.result {
            Ok(r) => {
                csv.push_str(&format!("{},{},{},{},{},{},\n", r.chi, r.v, r.x_left, r.x_right, r.area, r.c1));
                rows.push(json!({ "chi": p.chi, "row": r }));
            }
            Err(e) => {
                failed += 1;
                let msg = e.to_string().replace(['"', '\n'], " ");
                csv.push_str(&format!("{},,,,,,\"{msg}\"\n", p.chi));
                rows.push(json!({ "chi": p.chi, "error": msg }));
            }
        }
    }
    write(&c.out, "branch.csv", &csv)?;
    let summary = format!("{}{} of {} points failed", csv, failed, points.len());
    emit(c, "branch.json", &rows, &summary)?;
    Ok(if failed == 0 { 0 } else { 1 })
}
