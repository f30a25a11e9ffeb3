//! The four subcommands. Every parameter is validated before anything runs
//! or touches the file system.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::Serialize;

use spinecho_core::classical::{liouville_correction_ratio, FieldProfile};
use spinecho_core::echo::{
    entropy_vs_decay, run_classical_echo, run_quantum_echo, ClassicalEchoProtocol, DecayRow, EntropyTimeSeries,
    QuantumEchoSettings,
};
use spinecho_core::presets;
use spinecho_core::spin::{PhysicalParams, Refocusing};
use spinecho_core::validate::{run_validation, ValidationReport};

use crate::config::{CliError, CliResult, ConfigMap};
use crate::output::{render_csv, render_svg, write_file, Panel, Series};

pub const QUANTUM_HEADER: [&str; 8] = ["t", "S_W", "S_B", "H_bar", "S_tot", "M_x", "M_y", "M_z"];
pub const FIG2_HEADER: [&str; 4] = ["ratio", "tau", "D", "delta_S_tot"];
pub const CLASSICAL_HEADER: [&str; 6] = ["t", "M_x", "M_y", "M_z", "S_spin_only", "S_joint"];

/// Slack allowed on row-to-row entropy decreases before warning.
const MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out: PathBuf,
    pub preset: Option<String>,
    pub dry_run: bool,
    pub svg: bool,
    pub tolerance_scale: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: String,
    pub dry_run: bool,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ValidationReport>,
}

impl Summary {
    fn new(command: &str, dry_run: bool) -> Self {
        Summary { command: command.to_string(), dry_run, files: Vec::new(), warnings: Vec::new(), report: None }
    }

    fn warn(&mut self, msg: String) {
        warn!("{msg}");
        self.warnings.push(msg);
    }
}

fn beta_from(cfg: &ConfigMap, default: f64) -> CliResult<f64> {
    match (cfg.opt_f64("beta")?, cfg.opt_f64("temperature")?) {
        (Some(_), Some(_)) => Err(CliError::key("temperature", "give either beta or temperature, not both")),
        (Some(b), None) => Ok(b),
        (None, Some(t)) if t > 0.0 => Ok(1.0 / t),
        (None, Some(t)) => Err(CliError::key("temperature", format!("must be > 0, got {t}"))),
        (None, None) => Ok(default),
    }
}

fn parse_refocusing(cfg: &ConfigMap, default: Refocusing) -> CliResult<Refocusing> {
    match cfg.raw("refocusing").map(|s| s.to_ascii_lowercase().replace('_', "-")) {
        None => Ok(default),
        Some(s) if s == "phase-conjugate" => Ok(Refocusing::PhaseConjugate),
        Some(s) if s == "rotation-x" => Ok(Refocusing::RotationX),
        Some(s) => Err(CliError::key("refocusing", format!("expected phase-conjugate or rotation-x, got `{s}`"))),
    }
}

fn refocusing_name(r: Refocusing) -> &'static str {
    match r {
        Refocusing::PhaseConjugate => "phase-conjugate",
        Refocusing::RotationX => "rotation-x",
    }
}

/// Applies config keys on top of `base`.
pub fn quantum_settings(cfg: &ConfigMap, base: QuantumEchoSettings) -> CliResult<QuantumEchoSettings> {
    let s = QuantumEchoSettings {
        g: cfg.f64_or("g", base.g)?,
        mu: cfg.f64_or("mu", base.mu)?,
        beta: beta_from(cfg, base.beta)?,
        mean_b: cfg.f64_or("mean_b", base.mean_b)?,
        sigma_b: cfg.f64_or("sigma_b", base.sigma_b)?,
        cells: cfg.usize_or("cells", base.cells)?,
        seed: cfg.u64_or("seed", base.seed)?,
        gamma_t: cfg.f64_or("gamma_t", base.gamma_t)?,
        gamma_l: cfg.f64_or("gamma_l", base.gamma_l)?,
        tau: cfg.f64_or("tau", base.tau)?,
        t_end: cfg.opt_f64("t_end")?.or(base.t_end),
        dt_record: cfg.opt_f64("dt_record")?.or(base.dt_record),
        particles: cfg.u64_or("particles", base.particles)?,
        refocusing: parse_refocusing(cfg, base.refocusing)?,
    };
    Ok(QuantumEchoSettings { t_end: Some(s.t_end()), dt_record: Some(s.dt_record()), ..s })
}

fn describe_quantum(s: &QuantumEchoSettings) -> Vec<String> {
    vec![
        format!("g = {}", s.g),
        format!("mu = {}", s.mu),
        format!("beta = {}", s.beta),
        format!("mean_b = {}", s.mean_b),
        format!("sigma_b = {}", s.sigma_b),
        format!("cells = {}", s.cells),
        format!("seed = {}", s.seed),
        format!("gamma_t = {}", s.gamma_t),
        format!("gamma_l = {}", s.gamma_l),
        format!("tau = {}", s.tau),
        format!("t_end = {}", s.t_end()),
        format!("dt_record = {}", s.dt_record()),
        format!("particles = {}", s.particles),
        format!("refocusing = {}", refocusing_name(s.refocusing)),
    ]
}

fn unstated_note(s: &QuantumEchoSettings, extra: &str) -> String {
    let list: Vec<String> = presets::unstated_parameters(s).into_iter().map(|(k, v)| format!("{k} = {v}")).collect();
    format!("not fixed by the figure: {}{extra}", list.join(", "))
}

fn prepare_out(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.to_path_buf(), source })
}

fn emit(summary: &mut Summary, path: PathBuf, contents: &str) -> CliResult<()> {
    write_file(&path, contents)?;
    summary.files.push(path);
    Ok(())
}

fn quantum_rows(ts: &EntropyTimeSeries) -> Vec<Vec<f64>> {
    ts.rows.iter().map(|r| vec![r.t, r.s_w, r.s_b, r.h_bar, r.s_tot, r.m_x, r.m_y, r.m_z]).collect()
}

fn min_step(rows: &[Vec<f64>], col: usize) -> f64 {
    rows.windows(2).map(|w| w[1][col] - w[0][col]).fold(f64::INFINITY, f64::min)
}

pub fn quantum_echo(cfg: &ConfigMap, opts: &Options) -> CliResult<Summary> {
    let runs: Vec<(String, QuantumEchoSettings, Option<String>)> = match opts.preset.as_deref() {
        None | Some("default") => {
            vec![("quantum_echo.csv".into(), quantum_settings(cfg, QuantumEchoSettings::default())?, None)]
        }
        Some("fig1") => {
            if cfg.contains("beta") || cfg.contains("temperature") {
                return Err(CliError::key("temperature", "fixed by preset fig1"));
            }
            presets::FIG1_TEMPERATURES
                .iter()
                .map(|&temp| {
                    let s = quantum_settings(cfg, presets::fig1_settings(temp)?)?;
                    let note = unstated_note(&s, " (tau = T2, t_end = 4 tau)");
                    Ok((
                        format!("quantum_echo_T{temp}.csv"),
                        s,
                        Some(format!("preset = fig1, temperature = {temp}\n{note}")),
                    ))
                })
                .collect::<CliResult<_>>()?
        }
        Some(other) => return Err(CliError::key("preset", format!("`{other}` is not a quantum-echo preset (fig1)"))),
    };
    cfg.finish()?;
    let protocols = runs.iter().map(|(_, s, _)| s.build().map_err(CliError::from)).collect::<CliResult<Vec<_>>>()?;

    let mut summary = Summary::new("quantum-echo", opts.dry_run);
    if opts.dry_run {
        summary.files = runs.iter().map(|(name, _, _)| opts.out.join(name)).collect();
        return Ok(summary);
    }
    prepare_out(&opts.out)?;
    for ((name, settings, preset_note), proto) in runs.iter().zip(&protocols) {
        let ts = run_quantum_echo(proto)?;
        let rows = quantum_rows(&ts);
        let step = min_step(&rows, 4);
        if step < -MONOTONE_TOL {
            summary.warn(format!("{name}: S_tot decreases by {:e} between rows", -step));
        }
        let mut comments = vec!["spinecho quantum-echo".to_string()];
        comments.extend(preset_note.clone());
        comments.extend(describe_quantum(settings));
        if let Some(d) = ts.echo_row().and_then(|r| r.decay) {
            comments.push(format!("echo decay M_x(2 tau)/M_x(0) = {d}"));
        }
        comments.push("units: hbar = 1, energies and rates in units of g mu B_mean for g = mu = mean_b = 1".into());
        emit(&mut summary, opts.out.join(name), &render_csv(&comments, &QUANTUM_HEADER, &rows))?;
        if opts.svg {
            let col = |c: usize| rows.iter().map(|r| (r[0], r[c])).collect();
            let panels = [
                Panel { y_label: "S_tot".into(), series: vec![Series { name: "S_tot".into(), points: col(4) }] },
                Panel { y_label: "M_x".into(), series: vec![Series { name: "M_x".into(), points: col(5) }] },
            ];
            let svg = render_svg(&format!("quantum echo ({name})"), "t", &panels);
            emit(&mut summary, opts.out.join(name.replace(".csv", ".svg")), &svg)?;
        }
    }
    Ok(summary)
}

pub fn fig2(cfg: &ConfigMap, opts: &Options) -> CliResult<Summary> {
    let preset = match opts.preset.as_deref() {
        None | Some("default") => false,
        Some("fig2") => true,
        Some(other) => return Err(CliError::key("preset", format!("`{other}` is not a fig2 preset (fig2)"))),
    };
    let settings = quantum_settings(cfg, presets::fig2_settings())?;
    let ratios = cfg.opt_f64_list("ratios")?.unwrap_or_else(|| presets::FIG2_RATIOS.to_vec());
    if preset && cfg.contains("ratios") {
        return Err(CliError::key("ratios", "fixed by preset fig2"));
    }
    let points = cfg.usize_or("tau_points", presets::FIG2_TAU_POINTS)?;
    let explicit_taus = cfg.opt_f64_list("taus")?;
    cfg.finish()?;
    if ratios.is_empty() {
        return Err(CliError::key("ratios", "must be nonempty"));
    }
    if points == 0 {
        return Err(CliError::key("tau_points", "must be >= 1"));
    }
    let template = settings.build()?;
    let taus = explicit_taus
        .unwrap_or_else(|| presets::fig2_taus(settings.gamma_t, template.reservoir().alpha, &ratios, points));
    if let Some(bad) = taus.iter().find(|t| !(**t > 0.0)) {
        return Err(CliError::key("taus", format!("must be > 0, got {bad}")));
    }
    for &r in &ratios {
        spinecho_core::lindblad::gamma_l_for_ratio(r, settings.gamma_t, template.reservoir().alpha)
            .map_err(|e| CliError::key("ratios", e.to_string()))?;
    }

    let mut summary = Summary::new("fig2", opts.dry_run);
    let path = opts.out.join("entropy_vs_decay.csv");
    if opts.dry_run {
        summary.files.push(path);
        return Ok(summary);
    }
    prepare_out(&opts.out)?;
    let table = entropy_vs_decay(&taus, &template, &ratios)?;
    for curve in table.chunks(taus.len()) {
        if curve.windows(2).any(|w| w[1].delta_s_tot <= w[0].delta_s_tot) {
            summary.warn(format!("ratio {}: delta_S_tot is not strictly decreasing in D", curve[0].ratio));
        }
    }
    let mut comments = vec!["spinecho fig2".to_string()];
    if preset {
        comments.push("preset = fig2".into());
    }
    comments.extend(
        describe_quantum(&settings).into_iter().filter(|l| !l.starts_with("gamma_l") && !l.starts_with("tau ")),
    );
    comments.push(format!("ratios = {}", ratios.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",")));
    comments.push(format!(
        "tau grid: {} points from {} to {}{}",
        taus.len(),
        taus[0],
        taus[taus.len() - 1],
        if cfg.contains("taus") { "" } else { " (geometric, T2_min/100 to 4 T2_max)" }
    ));
    if preset {
        comments.push(format!(
            "not fixed by the figure: temperature = {}, cells = {}, sigma_b = {}, seed = {}, tau grid",
            presets::FIG2_TEMPERATURE,
            settings.cells,
            settings.sigma_b,
            settings.seed
        ));
    }
    comments.push("gamma_l solved per ratio; t_end and dt_record are multiples of tau".into());
    let rows: Vec<Vec<f64>> = table.iter().map(|r: &DecayRow| vec![r.ratio, r.tau, r.decay, r.delta_s_tot]).collect();
    emit(&mut summary, path, &render_csv(&comments, &FIG2_HEADER, &rows))?;
    if opts.svg {
        let series = table
            .chunks(taus.len())
            .map(|c| Series {
                name: format!("T1/T2 = {}", c[0].ratio),
                points: c.iter().map(|r| (r.decay, r.delta_s_tot)).collect(),
            })
            .collect();
        let svg = render_svg(
            "total entropy produced vs echo amplitude",
            "D",
            &[Panel { y_label: "delta S_tot".into(), series }],
        );
        emit(&mut summary, opts.out.join("entropy_vs_decay.svg"), &svg)?;
    }
    Ok(summary)
}

pub fn classical_echo(cfg: &ConfigMap, opts: &Options) -> CliResult<Summary> {
    match opts.preset.as_deref() {
        None | Some("default") => {}
        Some(other) => return Err(CliError::key("preset", format!("`{other}` is not a classical-echo preset"))),
    }
    let d = ClassicalEchoProtocol::default();
    let seed = cfg.u64_or("seed", d.seed)?;
    let mut proto = ClassicalEchoProtocol {
        particles: cfg.usize_or("particles", d.particles)?,
        tau: cfg.f64_or("tau", d.tau)?,
        t_end: cfg.opt_f64("t_end")?,
        dt_record: cfg.opt_f64("dt_record")?,
        phi_bins: cfg.usize_or("phi_bins", d.phi_bins)?,
        seed,
        moment: cfg.f64_or("moment", d.moment)?,
    };
    proto.t_end = Some(proto.t_end());
    proto.dt_record = Some(proto.dt_record());
    let beta = beta_from(cfg, 2.0)?;
    let params = PhysicalParams::new(
        cfg.f64_or("g", 1.0)?,
        cfg.f64_or("mu", 1.0)?,
        cfg.f64_or("mass", 1.0)?,
        beta,
        cfg.f64_or("field_length", 1000.0)?,
    )?;
    let cells = cfg.usize_or("cells", 100)?;
    let mean_b = cfg.f64_or("mean_b", 1.0)?;
    let extent = cfg.f64_or("extent", 1.0)?;
    let kind = cfg.string_or("field", "gaussian");
    let (field, field_desc) = match kind.as_str() {
        "gaussian" => {
            let sigma_b = cfg.f64_or("sigma_b", 0.1)?;
            let field_seed = cfg.u64_or("field_seed", seed)?;
            (
                FieldProfile::gaussian_random_cells(mean_b, sigma_b, cells, field_seed, extent)?,
                format!("field = gaussian, sigma_b = {sigma_b}, field_seed = {field_seed}"),
            )
        }
        "gradient" => {
            let slope = cfg.f64_or("slope", 0.0)?;
            (FieldProfile::linear_gradient(mean_b, slope, cells, extent)?, format!("field = gradient, slope = {slope}"))
        }
        other => return Err(CliError::key("field", format!("expected gaussian or gradient, got `{other}`"))),
    };
    cfg.finish()?;
    if proto.particles == 0 {
        return Err(CliError::key("particles", "must be >= 1"));
    }
    if proto.phi_bins == 0 {
        return Err(CliError::key("phi_bins", "must be >= 1"));
    }
    if !(proto.tau > 0.0) {
        return Err(CliError::key("tau", "must be > 0"));
    }
    if !(proto.dt_record() > 0.0) {
        return Err(CliError::key("dt_record", "must be > 0"));
    }
    if !(proto.t_end() >= proto.tau) {
        return Err(CliError::key("t_end", "must be >= tau"));
    }
    let liouville = liouville_correction_ratio(params.beta, params.mass, params.field_length)?;

    let mut summary = Summary::new("classical-echo", opts.dry_run);
    let path = opts.out.join("classical_echo.csv");
    if opts.dry_run {
        summary.files.push(path);
        return Ok(summary);
    }
    prepare_out(&opts.out)?;
    if !liouville.negligible {
        summary.warn(format!("field-gradient force not negligible: ratio {}", liouville.ratio));
    }
    let ts = run_classical_echo(&proto, &field, &params)?;
    let rows: Vec<Vec<f64>> =
        ts.rows.iter().map(|r| vec![r.t, r.m_x, r.m_y, r.m_z, r.s_spin_only, r.s_joint]).collect();
    let s0 = rows[0][5];
    if rows.iter().any(|r| (r[5] - s0).abs() > MONOTONE_TOL * s0.abs().max(1.0)) {
        summary.warn("S_joint is not constant across rows".into());
    }
    let mut comments = vec![
        "spinecho classical-echo".to_string(),
        format!("particles = {}", proto.particles),
        format!("cells = {cells}"),
        format!("mean_b = {mean_b}"),
        field_desc,
        format!("extent = {extent}"),
        format!("tau = {}", proto.tau),
        format!("t_end = {}", proto.t_end()),
        format!("dt_record = {}", proto.dt_record()),
        format!("phi_bins = {}", proto.phi_bins),
        format!("seed = {seed}"),
        format!("moment = {}", proto.moment),
        format!("g = {}", params.g),
        format!("mu = {}", params.mu),
        format!("mass = {}", params.mass),
        format!("beta = {}", params.beta),
        format!("field_length = {}", params.field_length),
        format!("liouville ratio = {} (negligible: {})", liouville.ratio, liouville.negligible),
    ];
    if let (Some(r0), Some(r2)) = (ts.row_at(0.0), ts.row_at(2.0 * proto.tau)) {
        comments.push(format!("M_x(2 tau)/M_x(0) = {}", r2.m_x / r0.m_x));
    }
    emit(&mut summary, path, &render_csv(&comments, &CLASSICAL_HEADER, &rows))?;
    if opts.svg {
        let col =
            |c: usize, name: &str| Series { name: name.into(), points: rows.iter().map(|r| (r[0], r[c])).collect() };
        let panels = [
            Panel { y_label: "M_x".into(), series: vec![col(1, "M_x")] },
            Panel { y_label: "entropy".into(), series: vec![col(4, "spin only"), col(5, "joint")] },
        ];
        emit(&mut summary, opts.out.join("classical_echo.svg"), &render_svg("classical echo", "t", &panels))?;
    }
    Ok(summary)
}

pub fn validate(cfg: &ConfigMap, opts: &Options) -> CliResult<Summary> {
    if let Some(p) = &opts.preset {
        return Err(CliError::key("preset", format!("validate takes no preset, got `{p}`")));
    }
    let seed = cfg.u64_or("seed", 0)?;
    cfg.finish()?;
    let mut summary = Summary::new("validate", opts.dry_run);
    if opts.dry_run {
        return Ok(summary);
    }
    summary.report = Some(run_validation(opts.tolerance_scale, seed)?);
    Ok(summary)
}

pub fn render_report(report: &ValidationReport) -> String {
    let mut out = String::new();
    for c in &report.checks {
        out.push_str(&format!(
            "{:<34} {:>12.3e} <= {:<10.1e} {}\n",
            c.name,
            c.value,
            c.tolerance,
            if c.passed { "PASS" } else { "FAIL" }
        ));
    }
    out
}
