//! Command-line scenario runner.
//!
//! Every scenario is a pure function of the resolved [`Config`], so equal
//! configs give byte-identical CSV, JSON and SVG output. Each file starts
//! with the config echo (CSV `#` lines, a JSON `config` field, an SVG
//! comment).
//!
//! Exit codes: 0 success, 1 runtime error, 2 parse error, 3 invalid config.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cloning::{universality_sweep_with, AncillaMode, Cloner, QubitSpec, SweepSummary, TABLE_ONE_STATES};
use crate::elements::{BsConvention, Handedness, QPlateSpec};
use crate::experiment::{predicted_fidelity, rate_budget, stokes_run, table_one_run, ImperfectionModel, LossBudget};
use crate::fock::{pol_h, ModeBasis, Path, PhotonState};
use crate::interference::{coherence_length, hom_curve_with, peak_half_width, SpectralProfile, SpectralShape};
use crate::qudit::{brute_force_oracle, qudit_clone, qudit_formula, QuditSpec, ORACLE_CAPACITY, QUDIT_CAPACITY};
use crate::sampling::seeded_rng;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Hom,
    Clone,
    Qudit,
    Experiment,
    Stokes,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Hom => "hom",
            Scenario::Clone => "clone",
            Scenario::Qudit => "qudit",
            Scenario::Experiment => "experiment",
            Scenario::Stokes => "stokes",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElementsConfig {
    pub qplate_charge: f64,
    pub qplate_efficiency: f64,
    pub handedness: Handedness,
    pub flip_oam_on_reflection: bool,
}

impl Default for ElementsConfig {
    fn default() -> Self {
        ElementsConfig {
            qplate_charge: 1.0,
            qplate_efficiency: 0.80,
            handedness: Handedness::LeftGains,
            flip_oam_on_reflection: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomConfig {
    pub input_a: String,
    pub input_b: String,
    pub delay_min_um: f64,
    pub delay_max_um: f64,
    pub steps: usize,
    pub center_wavelength_nm: f64,
    pub bandwidth_nm: f64,
}

impl Default for HomConfig {
    fn default() -> Self {
        HomConfig {
            input_a: "+2".into(),
            input_b: "-2".into(),
            delay_min_um: -300.0,
            delay_max_um: 300.0,
            steps: 121,
            center_wavelength_nm: 795.0,
            bandwidth_nm: 6.0,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AncillaKind {
    #[default]
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloneConfig {
    /// One of `h, v, a, d, +2, -2`; ignored when `theta` and `phi` are set.
    pub input: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    pub ancilla: AncillaKind,
    pub mc_samples: usize,
    pub sweep_random: usize,
}

impl Default for CloneConfig {
    fn default() -> Self {
        CloneConfig {
            input: "h".into(),
            theta: None,
            phi: None,
            ancilla: AncillaKind::Exact,
            mc_samples: 200,
            sweep_random: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuditConfig {
    pub d_min: usize,
    pub d_max: usize,
}

impl Default for QuditConfig {
    fn default() -> Self {
        QuditConfig { d_min: 1, d_max: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub duration_s: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig { duration_s: 600.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StokesConfig {
    pub n_random: usize,
    pub duration_s: f64,
}

impl Default for StokesConfig {
    fn default() -> Self {
        StokesConfig {
            n_random: 100,
            duration_s: 600.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub out_dir: PathBuf,
    pub format: Format,
    pub svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            out_dir: PathBuf::from("out"),
            format: Format::Both,
            svg: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub seed: u64,
    pub elements: ElementsConfig,
    pub hom: HomConfig,
    pub clone: CloneConfig,
    pub qudit: QuditConfig,
    pub experiment: ExperimentConfig,
    pub stokes: StokesConfig,
    pub imperfection: ImperfectionModel,
    pub budget: LossBudget,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Parse(String),
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Validation(m) => write!(f, "invalid config: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {msg}"))
}

fn check_finite(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, "must be finite"))
    }
}

fn check_unit(field: &str, v: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(field, format!("{v} is outside [0, 1]")))
    }
}

impl Config {
    pub fn qplate(&self) -> QPlateSpec {
        QPlateSpec {
            charge: self.elements.qplate_charge,
            efficiency: self.elements.qplate_efficiency,
            handedness: self.elements.handedness,
        }
    }

    pub fn convention(&self) -> BsConvention {
        BsConvention {
            flip_oam_on_reflection: self.elements.flip_oam_on_reflection,
        }
    }

    pub fn spectrum(&self) -> SpectralProfile {
        SpectralProfile {
            center_wavelength_nm: self.hom.center_wavelength_nm,
            bandwidth_nm: self.hom.bandwidth_nm,
            shape: SpectralShape::Gaussian,
        }
    }

    pub fn clone_input(&self) -> Result<QubitSpec, CliError> {
        match (self.clone.theta, self.clone.phi) {
            (Some(t), Some(p)) => Ok(QubitSpec::from_bloch(t, p)),
            (None, None) => QubitSpec::named(&self.clone.input).map_err(|e| invalid("clone.input", e)),
            _ => Err(invalid("clone.theta", "theta and phi must be given together")),
        }
    }

    pub fn delays(&self) -> Vec<f64> {
        let h = &self.hom;
        if h.steps == 1 {
            return vec![h.delay_min_um];
        }
        let step = (h.delay_max_um - h.delay_min_um) / (h.steps - 1) as f64;
        (0..h.steps).map(|k| h.delay_min_um + step * k as f64).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let e = &self.elements;
        check_unit("elements.qplate_efficiency", e.qplate_efficiency)?;
        let twice = 2.0 * e.qplate_charge;
        if !twice.is_finite() || (twice - twice.round()).abs() > 1e-12 || e.qplate_charge == 0.0 {
            return Err(invalid("elements.qplate_charge", "must be a nonzero multiple of 1/2"));
        }

        let h = &self.hom;
        for (f, v) in [("hom.input_a", &h.input_a), ("hom.input_b", &h.input_b)] {
            QubitSpec::named(v).map_err(|err| invalid(f, err))?;
        }
        check_finite("hom.delay_min_um", h.delay_min_um)?;
        check_finite("hom.delay_max_um", h.delay_max_um)?;
        if h.steps == 0 || h.steps > 100_000 {
            return Err(invalid("hom.steps", "must lie in 1..=100000"));
        }
        if h.delay_max_um < h.delay_min_um {
            return Err(invalid("hom.delay_max_um", "must not be below hom.delay_min_um"));
        }
        if !(h.center_wavelength_nm > 0.0 && h.center_wavelength_nm.is_finite()) {
            return Err(invalid("hom.center_wavelength_nm", "must be positive"));
        }
        if !(h.bandwidth_nm > 0.0 && h.bandwidth_nm.is_finite()) {
            return Err(invalid("hom.bandwidth_nm", "must be positive"));
        }

        let c = &self.clone;
        self.clone_input()?;
        for (f, v) in [("clone.theta", c.theta), ("clone.phi", c.phi)] {
            if let Some(v) = v {
                check_finite(f, v)?;
            }
        }
        if c.mc_samples == 0 {
            return Err(invalid("clone.mc_samples", "must be at least 1"));
        }
        if c.sweep_random == 0 || c.sweep_random > 100_000 {
            return Err(invalid("clone.sweep_random", "must lie in 1..=100000"));
        }

        let q = &self.qudit;
        if q.d_min < 1 {
            return Err(invalid("qudit.d_min", "must be at least 1"));
        }
        if q.d_max < q.d_min || q.d_max > QUDIT_CAPACITY {
            return Err(invalid("qudit.d_max", format!("must lie in d_min..={QUDIT_CAPACITY}")));
        }

        if !(self.experiment.duration_s > 0.0 && self.experiment.duration_s.is_finite()) {
            return Err(invalid("experiment.duration_s", "must be positive"));
        }
        if !(self.stokes.duration_s > 0.0 && self.stokes.duration_s.is_finite()) {
            return Err(invalid("stokes.duration_s", "must be positive"));
        }
        if self.stokes.n_random > 100_000 {
            return Err(invalid("stokes.n_random", "must not exceed 100000"));
        }

        let m = &self.imperfection;
        if !(0.5..=1.0).contains(&m.f_prep) {
            return Err(invalid(
                "imperfection.f_prep",
                format!("{} is outside [0.5, 1]", m.f_prep),
            ));
        }
        if !(1.0..=2.0).contains(&m.enhancement) {
            return Err(invalid(
                "imperfection.enhancement",
                format!("{} is outside [1, 2]", m.enhancement),
            ));
        }
        self.budget.validate().map_err(|err| match err {
            crate::Error::Config(msg) => CliError::Validation(msg),
            other => CliError::Validation(other.to_string()),
        })
    }

    /// TOML echo of the resolved config.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Strict parse plus validation; defaults fill missing keys.
pub fn validate_config(text: &str) -> Result<Config, CliError> {
    let cfg: Config = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string().trim_end().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Output of one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub scenario: Scenario,
    pub csv: String,
    pub json: String,
    pub svg: Option<String>,
}

/// Twelve significant digits, always with a decimal point or exponent.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    let s = format!("{rounded}");
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

struct Csv {
    text: String,
}

impl Csv {
    fn new(cfg: &Config, scenario: Scenario, header: &[&str]) -> Self {
        let mut text = String::new();
        let _ = writeln!(
            text,
            "# oamclone {VERSION} scenario={} seed={}",
            scenario.name(),
            cfg.seed
        );
        for line in cfg.echo().lines() {
            let _ = writeln!(text, "{}", format!("# {line}").trim_end());
        }
        text.push_str(&header.join(","));
        text.push('\n');
        Csv { text }
    }

    fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }
}

fn summary_json(cfg: &Config, scenario: Scenario, results: Value) -> String {
    let v = json!({
        "scenario": scenario.name(),
        "version": VERSION,
        "seed": cfg.seed,
        "config": cfg,
        "results": results,
    });
    let mut s = serde_json::to_string_pretty(&v).expect("summary serializes");
    s.push('\n');
    s
}

fn oam_photon(basis: &std::sync::Arc<ModeBasis>, path: Path, q: &QubitSpec) -> crate::Result<PhotonState> {
    PhotonState::product(basis, path, pol_h(), &[(2, q.alpha), (-2, q.beta)])
}

/// Runs a scenario without touching the file system.
pub fn run_scenario(scenario: Scenario, cfg: &Config) -> Result<Artifacts, CliError> {
    cfg.validate()?;
    let (csv, results, svg) = match scenario {
        Scenario::Hom => run_hom(cfg)?,
        Scenario::Clone => run_clone(cfg)?,
        Scenario::Qudit => run_qudit(cfg)?,
        Scenario::Experiment => run_experiment(cfg)?,
        Scenario::Stokes => run_stokes(cfg)?,
    };
    Ok(Artifacts {
        scenario,
        csv,
        json: summary_json(cfg, scenario, results),
        svg: if cfg.output.svg { svg } else { None },
    })
}

type Outputs = (String, Value, Option<String>);

fn run_hom(cfg: &Config) -> Result<Outputs, CliError> {
    let basis = ModeBasis::build(&Path::ALL, &[-2, 2])?;
    let a = oam_photon(&basis, Path::A, &QubitSpec::named(&cfg.hom.input_a)?)?;
    let b = oam_photon(&basis, Path::B, &QubitSpec::named(&cfg.hom.input_b)?)?;
    let profile = cfg.spectrum();
    let delays = cfg.delays();
    let scan = hom_curve_with(&a, &b, &delays, &profile, cfg.convention())?;
    let mut csv = Csv::new(
        cfg,
        Scenario::Hom,
        &["delay_um", "expected_coincidences", "enhancement"],
    );
    for ((d, c), r) in delays.iter().zip(&scan.coincidences).zip(&scan.enhancement) {
        csv.row(&[fmt_num(*d), fmt_num(*c), fmt_num(*r)]);
    }
    let results = json!({
        "peak_enhancement": scan.peak_enhancement,
        "baseline": scan.baseline,
        "coherence_length_um": coherence_length(&profile),
        "peak_half_width_um": peak_half_width(&profile),
    });
    let svg = hom_svg(cfg, &delays, &scan.enhancement);
    Ok((csv.text, results, Some(svg)))
}

fn run_clone(cfg: &Config) -> Result<Outputs, CliError> {
    if cfg.elements.qplate_charge != 1.0 {
        return Err(invalid("elements.qplate_charge", "the cloner needs q = 1"));
    }
    let cloner = Cloner::with_elements(&cfg.qplate(), cfg.convention())?;
    let mode = match cfg.clone.ancilla {
        AncillaKind::Exact => AncillaMode::Exact,
        AncillaKind::MonteCarlo => AncillaMode::MonteCarlo {
            samples: cfg.clone.mc_samples,
            seed: cfg.seed,
        },
    };
    let mut inputs = vec![("input".to_string(), cfg.clone_input()?)];
    for l in TABLE_ONE_STATES {
        inputs.push((l.to_string(), QubitSpec::named(l)?));
    }
    let mut csv = Csv::new(
        cfg,
        Scenario::Clone,
        &[
            "state_label",
            "in_s1",
            "in_s2",
            "in_s3",
            "fidelity",
            "success_prob",
            "s1",
            "s2",
            "s3",
        ],
    );
    let mut main = None;
    for (label, q) in &inputs {
        let r = cloner.run_full(q, mode)?;
        let mut cells = vec![label.clone()];
        cells.extend(r.input_bloch.iter().map(|x| fmt_num(*x)));
        cells.push(fmt_num(r.fidelity));
        cells.push(fmt_num(r.success_probability));
        cells.extend(r.stokes.iter().map(|x| fmt_num(*x)));
        csv.row(&cells);
        if main.is_none() {
            main = Some(r);
        }
    }
    let main = main.expect("configured input runs first");
    let other = cloner.run_full_on(&inputs[0].1, mode, Path::BPrime)?;
    let proj = cloner.run_projector(&inputs[0].1)?;
    let sweep: SweepSummary = universality_sweep_with(cfg.clone.sweep_random, cfg.seed, |q| {
        Ok(cloner.run_full(q, mode)?.fidelity)
    })?;
    let results = json!({
        "fidelity": main.fidelity,
        "projector_fidelity": proj.fidelity,
        "success_prob": main.success_probability,
        "success_prob_both_ports": main.success_probability + other.success_probability,
        "stokes": main.stokes,
        "input_bloch": main.input_bloch,
        "sweep": sweep,
    });
    Ok((csv.text, results, None))
}

fn run_qudit(cfg: &Config) -> Result<Outputs, CliError> {
    let mut rng = seeded_rng(cfg.seed);
    let mut csv = Csv::new(
        cfg,
        Scenario::Qudit,
        &["d", "F_channel", "F_formula", "p_channel", "p_formula"],
    );
    let mut rows = Vec::new();
    for d in cfg.qudit.d_min..=cfg.qudit.d_max {
        let amps = crate::sampling::haar_state(d, &mut rng);
        let spec = if cfg.elements.flip_oam_on_reflection {
            QuditSpec::new(amps)?
        } else {
            QuditSpec::abstract_mode(amps)?
        };
        let ch = qudit_clone(&spec)?;
        let (f, p) = qudit_formula(d)?;
        let oracle = if d <= ORACLE_CAPACITY {
            Some(brute_force_oracle(&spec)?)
        } else {
            None
        };
        csv.row(&[
            d.to_string(),
            fmt_num(ch.fidelity),
            fmt_num(f),
            fmt_num(ch.success_prob),
            fmt_num(p),
        ]);
        rows.push(json!({
            "d": d,
            "F_channel": ch.fidelity,
            "F_formula": f,
            "F_oracle": oracle.as_ref().map(|o| o.fidelity),
            "p_channel": ch.success_prob,
            "p_formula": p,
            "p_oracle": oracle.as_ref().map(|o| o.success_prob),
        }));
    }
    Ok((csv.text, json!({ "rows": rows }), None))
}

fn run_experiment(cfg: &Config) -> Result<Outputs, CliError> {
    let report = table_one_run(&cfg.imperfection, &cfg.budget, cfg.experiment.duration_s, cfg.seed)?;
    let mut csv = Csv::new(
        cfg,
        Scenario::Experiment,
        &["state_label", "C1", "C2", "F_exp", "sigma"],
    );
    for r in &report.rows {
        csv.row(&[
            r.state_label.clone(),
            r.c1.to_string(),
            r.c2.to_string(),
            fmt_num(r.f_exp),
            fmt_num(r.sigma),
        ]);
    }
    let rates = rate_budget(&cfg.budget)?;
    let results = json!({
        "predicted_fidelity": predicted_fidelity(&cfg.imperfection),
        "mean_fidelity": report.mean,
        "mean_sigma": report.mean_sigma,
        "p_prep": cfg.budget.p_prep(),
        "p_det": cfg.budget.p_det(),
        "rate_hz": rates,
        "point_rate_hz": cfg.budget.point_rate(),
    });
    Ok((csv.text, results, None))
}

fn run_stokes(cfg: &Config) -> Result<Outputs, CliError> {
    let rep = stokes_run(cfg.stokes.n_random, &cfg.budget, cfg.stokes.duration_s, cfg.seed)?;
    let mut csv = Csv::new(
        cfg,
        Scenario::Stokes,
        &[
            "index", "in_s1", "in_s2", "in_s3", "ideal_s1", "ideal_s2", "ideal_s3", "meas_s1", "meas_s2", "meas_s3",
        ],
    );
    for (k, s) in rep.samples.iter().enumerate() {
        let mut cells = vec![k.to_string()];
        for v in [&s.input, &s.ideal, &s.measured] {
            cells.extend(v.iter().map(|x| fmt_num(*x)));
        }
        csv.row(&cells);
    }
    let results = json!({
        "mean_length": rep.mean_length,
        "ideal_length": rep.ideal_length,
        "counts_per_axis": rep.counts_per_axis,
        "samples": rep.samples.len(),
    });
    let svg = bloch_svg(cfg, &rep.samples);
    Ok((csv.text, results, Some(svg)))
}

fn svg_header(cfg: &Config, scenario: Scenario, w: u32, h: u32) -> String {
    // "--" may not appear inside an XML comment.
    let echo = cfg.echo().replace("--", "- -");
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <!-- oamclone {VERSION} scenario={} seed={}\n{echo}-->\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
        scenario.name(),
        cfg.seed
    )
}

fn hom_svg(cfg: &Config, x: &[f64], y: &[f64]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 20.0, 20.0, 50.0);
    let (x0, x1) = (x[0], x[x.len() - 1]);
    let x1 = if x1 > x0 { x1 } else { x0 + 1.0 };
    let y1 = y.iter().copied().fold(2.0f64, f64::max) * 1.05;
    let px = |v: f64| left + (v - x0) / (x1 - x0) * (w - left - right);
    let py = |v: f64| h - bottom - v / y1 * (h - top - bottom);
    let mut s = svg_header(cfg, Scenario::Hom, w as u32, h as u32);
    let _ = writeln!(
        s,
        "<path d=\"M{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2}\" stroke=\"black\" fill=\"none\"/>",
        left,
        top,
        left,
        h - bottom,
        w - right,
        h - bottom
    );
    for tick in [0.0, 0.5, 1.0, 1.5, 2.0] {
        if tick <= y1 {
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{tick:.1}</text>",
                left - 6.0,
                py(tick) + 4.0
            );
        }
    }
    for k in 0..=4 {
        let v = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{v:.0}</text>",
            px(v),
            h - bottom + 18.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">delay (um)</text>",
        (left + w - right) / 2.0,
        h - 8.0
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{:.2}\" font-size=\"13\" transform=\"rotate(-90 16 {:.2})\" text-anchor=\"middle\">enhancement</text>",
        h / 2.0,
        h / 2.0
    );
    let mut d = String::new();
    for (k, (a, b)) in x.iter().zip(y).enumerate() {
        let _ = write!(d, "{}{:.2},{:.2} ", if k == 0 { "M" } else { "L" }, px(*a), py(*b));
    }
    let _ = writeln!(
        s,
        "<path d=\"{}\" stroke=\"#1f5fa8\" stroke-width=\"2\" fill=\"none\"/>",
        d.trim_end()
    );
    s.push_str("</svg>\n");
    s
}

fn bloch_svg(cfg: &Config, samples: &[crate::experiment::StokesSample]) -> String {
    let (w, h) = (720.0, 380.0);
    let r = 140.0;
    let mut s = svg_header(cfg, Scenario::Stokes, w as u32, h as u32);
    let panels = [(190.0, (0usize, 1usize), "S1", "S2"), (530.0, (0, 2), "S1", "S3")];
    for (cx, (i, j), xl, yl) in panels {
        let cy = 180.0;
        let _ = writeln!(
            s,
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{r:.2}\" stroke=\"black\" fill=\"none\"/>"
        );
        let _ = writeln!(
            s,
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{:.2}\" stroke=\"gray\" stroke-dasharray=\"4 3\" fill=\"none\"/>",
            r * 2.0 / 3.0
        );
        let _ = writeln!(
            s,
            "<path d=\"M{:.2},{cy:.2} L{:.2},{cy:.2} M{cx:.2},{:.2} L{cx:.2},{:.2}\" stroke=\"#bbbbbb\"/>",
            cx - r,
            cx + r,
            cy - r,
            cy + r
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\">{xl}</text>",
            cx + r + 6.0,
            cy + 4.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{cx:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">{yl}</text>",
            cy - r - 8.0
        );
        for p in samples {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" stroke=\"#999999\" fill=\"none\"/>",
                cx + r * p.input[i],
                cy - r * p.input[j]
            );
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"#c0392b\"/>",
                cx + r * p.measured[i],
                cy - r * p.measured[j]
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Parser, Debug)]
#[command(
    name = "oamclone",
    version,
    about = "HOM interference and optimal cloning of OAM photon qubits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML config file; defaults are used for missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `seed`
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `output.out_dir`
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Also write an SVG figure (hom, stokes).
    #[arg(long, global = true)]
    pub svg: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// HOM coincidence curve over a delay scan.
    Hom,
    /// Clone fidelity, success probability and universality sweep.
    Clone,
    /// d-level cloner against the closed form.
    Qudit,
    /// Counting simulation for the six standard states.
    Experiment,
    /// Stokes vectors of clones with shot noise.
    Stokes,
    /// Parse and validate the config, then print it with defaults applied.
    Validate,
}

impl Command {
    fn scenario(self) -> Option<Scenario> {
        match self {
            Command::Hom => Some(Scenario::Hom),
            Command::Clone => Some(Scenario::Clone),
            Command::Qudit => Some(Scenario::Qudit),
            Command::Experiment => Some(Scenario::Experiment),
            Command::Stokes => Some(Scenario::Stokes),
            Command::Validate => None,
        }
    }
}

/// Config file (or defaults) with command-line overrides applied.
pub fn resolve_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
            let cfg: Config =
                toml::from_str(&text).map_err(|e| CliError::Parse(e.to_string().trim_end().to_string()))?;
            cfg
        }
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.output.out_dir = dir.clone();
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if cli.svg {
        cfg.output.svg = true;
    }
    if let (Some(want), Some(run)) = (cfg.scenario, cli.command.scenario()) {
        if want != run {
            return Err(invalid(
                "scenario",
                format!("config is for '{}', not '{}'", want.name(), run.name()),
            ));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes artifacts into `dir`; returns the paths in writing order.
pub fn write_artifacts(a: &Artifacts, dir: &FsPath, format: Format) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    let name = a.scenario.name();
    let mut put = |ext: &str, body: &str| -> Result<(), CliError> {
        let p = dir.join(format!("{name}.{ext}"));
        fs::write(&p, body).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display())))?;
        files.push(p);
        Ok(())
    };
    if matches!(format, Format::Csv | Format::Both) {
        put("csv", &a.csv)?;
    }
    if matches!(format, Format::Json | Format::Both) {
        put("json", &a.json)?;
    }
    if let Some(svg) = &a.svg {
        put("svg", svg)?;
    }
    Ok(files)
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    let cfg = resolve_config(cli)?;
    match cli.command.scenario() {
        None => Ok(cfg.echo()),
        Some(scenario) => {
            let artifacts = run_scenario(scenario, &cfg)?;
            let files = write_artifacts(&artifacts, &cfg.output.out_dir, cfg.output.format)?;
            let mut out = String::new();
            for f in files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            Ok(out)
        }
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("oamclone: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(2.0), "2.0");
        assert_eq!(fmt_num(5.0 / 6.0), "0.833333333333");
        assert_eq!(fmt_num(-0.125), "-0.125");
        assert_eq!(fmt_num(1.0 / 3.0 * 1e-3), "0.000333333333333");
        assert_eq!(fmt_num(0.0), "0.0");
    }

    #[test]
    fn defaults_and_echo() {
        let cfg = validate_config("").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.seed, 0);
        assert!(cfg.echo().contains("seed = 0"));
        let back: Config = toml::from_str(&cfg.echo()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_name_fields() {
        let e = validate_config("[elements]\nqplate_efficiency = 1.2\n").unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("elements.qplate_efficiency"), "{e}");
        let e = validate_config("[budget]\nsplit_factor = -1.0\n").unwrap_err();
        assert!(e.to_string().contains("budget.split_factor"), "{e}");
        let e = validate_config("[hom]\nbogus = 1\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("bogus"), "{e}");
        let e = validate_config("seed = \"x\"\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = validate_config("[clone]\ntheta = 1.0\n").unwrap_err();
        assert!(e.to_string().contains("clone.theta"));
    }

    #[test]
    fn hom_peak_reads_two() {
        let a = run_scenario(Scenario::Hom, &Config::default()).unwrap();
        let row = a.csv.lines().find(|l| l.starts_with("0.0,")).expect("zero-delay row");
        assert!(row.ends_with(",2.0"), "{row}");
        assert!(a.csv.lines().any(|l| l == "delay_um,expected_coincidences,enhancement"));
    }

    #[test]
    fn clone_json_has_fidelity() {
        let mut cfg = Config::default();
        cfg.clone.sweep_random = 5;
        let a = run_scenario(Scenario::Clone, &cfg).unwrap();
        let v: Value = serde_json::from_str(&a.json).unwrap();
        let f = v["results"]["fidelity"].as_f64().unwrap();
        assert!((f - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(v["seed"], 0);
    }

    #[test]
    fn qudit_rows_match_formula() {
        let a = run_scenario(Scenario::Qudit, &Config::default()).unwrap();
        let rows: Vec<&str> = a.csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        assert_eq!(rows.len(), 8);
        for r in rows {
            let c: Vec<&str> = r.split(',').collect();
            assert_eq!(c[1], c[2], "{r}");
        }
    }

    #[test]
    fn scenario_mismatch_is_invalid() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        fs::write(&p, "scenario = \"qudit\"\n").unwrap();
        let cli = Cli::try_parse_from(["oamclone", "hom", "--config", p.to_str().unwrap()]).unwrap();
        assert_eq!(resolve_config(&cli).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn svg_only_on_request() {
        let mut cfg = Config::default();
        assert!(run_scenario(Scenario::Hom, &cfg).unwrap().svg.is_none());
        cfg.output.svg = true;
        let svg = run_scenario(Scenario::Hom, &cfg).unwrap().svg.unwrap();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("seed=0"));
    }
}
