//! Executes one experiment config and returns its output files; writing is left to the caller.

use std::fmt::Write as _;

use nf_core::dde::{default_dt, find_equilibria, integrate_moments, MomentTrajectory, StateBox};
use nf_core::export::{
    dispersion_csv, dispersion_report_text, field_binary, field_csv, field_metadata, hopf_curves_csv, trajectory_csv,
    turing_hopf_csv, FieldVariable,
};
use nf_core::field::{
    classify_regime, integrate_field_with, integrate_synchronized, mode_spectrum, pattern_diagnostics, FieldOptions,
    Profile, RegimeOptions, SpatialGrid,
};
use nf_core::network::{chaos_diagnostics, equal_sizes, log_log_slope, simulate_network_with, NetworkOptions};
use nf_core::spectral::{dde_linearize_and_roots, dispersion, hopf_curves, pitchfork, turing_hopf_curves, RootSearch};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{core_to_cli, ExperimentConfig, ExperimentKind};
use crate::error::CliError;

const FIELD_DT: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Files of all sweep points, the summary table and any certification problems.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<OutputFile>,
    pub certification: Vec<String>,
}

struct Piece {
    files: Vec<OutputFile>,
    summary_header: String,
    summary_row: String,
    certification: Vec<String>,
}

impl Piece {
    fn new(header: &str) -> Self {
        Self { files: Vec::new(), summary_header: header.to_string(), summary_row: String::new(), certification: Vec::new() }
    }

    fn file(&mut self, name: String, text: String) {
        self.files.push(OutputFile { name, bytes: text.into_bytes() });
    }
}

fn solver(e: nf_core::CoreError) -> CliError {
    core_to_cli(e, "solver")
}

/// Runs every sweep point (in parallel) and collects the results in sweep order.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let points: Vec<(Option<f64>, ExperimentConfig)> = match &cfg.sweep {
        None => vec![(None, cfg.clone())],
        Some(s) => s
            .values()
            .into_iter()
            .map(|v| cfg.with_parameter(&s.parameter, v).map(|c| (Some(v), c)))
            .collect::<Result<_, _>>()?,
    };
    let suffixed = points.len() > 1;
    let pieces: Vec<Piece> = points
        .par_iter()
        .enumerate()
        .map(|(i, (_, c))| run_point(c, if suffixed { format!("_{i:03}") } else { String::new() }))
        .collect::<Result<_, _>>()?;

    let mut out = RunOutput::default();
    let mut summary = String::new();
    for (i, ((value, _), piece)) in points.iter().zip(pieces).enumerate() {
        if i == 0 {
            summary.push_str(if value.is_some() { "value," } else { "" });
            summary.push_str(&piece.summary_header);
            summary.push('\n');
        }
        for line in piece.summary_row.lines() {
            if let Some(v) = value {
                write!(summary, "{v},").unwrap();
            }
            summary.push_str(line);
            summary.push('\n');
        }
        out.files.extend(piece.files);
        out.certification.extend(piece.certification.into_iter().map(|m| match value {
            Some(v) => format!("{} = {v}: {m}", cfg.sweep.as_ref().unwrap().parameter),
            None => m,
        }));
    }
    out.files.push(OutputFile { name: "summary.csv".into(), bytes: summary.into_bytes() });
    Ok(out)
}

fn run_point(cfg: &ExperimentConfig, suffix: String) -> Result<Piece, CliError> {
    match cfg.kind {
        ExperimentKind::FiniteDde => finite_dde(cfg, &suffix),
        ExperimentKind::Synchronized => synchronized(cfg, &suffix),
        ExperimentKind::Field => field(cfg, &suffix),
        ExperimentKind::HopfCurves => hopf(cfg, &suffix),
        ExperimentKind::Dispersion => dispersion_point(cfg, &suffix),
        ExperimentKind::TuringHopf => turing_hopf(cfg, &suffix),
        ExperimentKind::NetworkValidate => network(cfg, &suffix),
    }
}

fn tail_range(traj: &MomentTrajectory, component: usize) -> (f64, f64) {
    let from = 0.8 * traj.t_end();
    traj.times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= from)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, y)| (lo.min(y[component]), hi.max(y[component])))
}

fn finite_dde(cfg: &ExperimentConfig, suffix: &str) -> Result<Piece, CliError> {
    let model = cfg.finite_model()?;
    let p = model.populations();
    let specs = cfg.specs(p)?;
    let init = cfg.finite_init(&model)?;
    let dt = cfg.dt(default_dt(&model))?;
    let traj = integrate_moments(&model, &specs, &init, cfg.solver.t_end, dt).map_err(solver)?;
    let mut header = String::new();
    for a in 1..=p {
        write!(header, "final_mu_{a},").unwrap();
    }
    for a in 1..=p {
        write!(header, "final_v_{a},").unwrap();
    }
    header.push_str("tail_min_mu_1,tail_max_mu_1");
    if cfg.analysis.equilibria || cfg.analysis.roots {
        header.push_str(",equilibria,stable_equilibria,unstable_roots");
    }
    let mut piece = Piece::new(&header);
    let last = traj.states.last().expect("trajectory has the initial record");
    let (lo, hi) = tail_range(&traj, 0);
    let mut row: Vec<String> = last.iter().map(|x| x.to_string()).collect();
    row.push(lo.to_string());
    row.push(hi.to_string());

    if cfg.analysis.equilibria || cfg.analysis.roots {
        let vmax = init.last()[p..].iter().copied().fold(1.0, f64::max).max(
            (0..p).map(|a| model.theta[a] * model.noise[a].sup_abs().powi(2)).fold(0.0, f64::max),
        );
        let jmax = model.j.iter().flatten().map(|x| x.abs()).sum::<f64>() + model.input.iter().map(|d| d.sup_abs()).sum::<f64>();
        let bx = StateBox::uniform(p, (-jmax - 1.0, jmax + 1.0), (0.0, 4.0 * vmax));
        let set = find_equilibria(&model, &specs, &bx, 64).map_err(solver)?;
        let mut csv = String::from("index");
        for a in 1..=p {
            write!(csv, ",mu_{a}").unwrap();
        }
        for a in 1..=p {
            write!(csv, ",v_{a}").unwrap();
        }
        csv.push_str(",residual,stability,rightmost_re,rightmost_im");
        if cfg.analysis.roots {
            csv.push_str(",unstable_roots,count_verified");
        }
        csv.push('\n');
        let mut counts = Vec::new();
        for (i, e) in set.points.iter().enumerate() {
            write!(csv, "{i}").unwrap();
            for x in &e.state {
                write!(csv, ",{x}").unwrap();
            }
            let lead = e.rightmost.first().copied().unwrap_or(Complex64::new(f64::NAN, f64::NAN));
            write!(csv, ",{},{:?},{},{}", e.residual, e.stability, lead.re, lead.im).unwrap();
            if cfg.analysis.roots {
                let rep = dde_linearize_and_roots(&model, &specs, &e.state, &RootSearch::default()).map_err(solver)?;
                write!(csv, ",{},{}", rep.unstable_count(), rep.complete).unwrap();
                counts.push(rep.unstable_count().to_string());
                if !rep.complete {
                    piece.certification.push(format!("equilibrium {i}: root count not verified by the argument principle"));
                }
            }
            csv.push('\n');
        }
        let stable = set.points.iter().filter(|e| e.stability == nf_core::dde::Stability::Stable).count();
        row.push(set.points.len().to_string());
        row.push(stable.to_string());
        row.push(counts.join(";"));
        piece.file(format!("equilibria{suffix}.csv"), csv);
    }
    piece.summary_row = row.join(",");
    piece.file(format!("trajectory{suffix}.csv"), trajectory_csv(&traj));
    Ok(piece)
}

/// Constant layer means of a field init; synchronized runs cannot take spatial profiles.
fn constant_state(cfg: &ExperimentConfig, model: &nf_core::model::NeuralFieldModel) -> Result<Vec<f64>, CliError> {
    let init = cfg.field_init(model)?;
    let mut x = Vec::with_capacity(2 * init.mu.len());
    for p in &init.mu {
        match p {
            Profile::Constant { value } => x.push(*value),
            _ => return Err(CliError::validation("field.init.mu", "synchronized runs need constant profiles")),
        }
    }
    x.extend(&init.v);
    Ok(x)
}

fn synchronized(cfg: &ExperimentConfig, suffix: &str) -> Result<Piece, CliError> {
    let model = cfg.field_model()?;
    let l = model.layers();
    let specs = cfg.specs(l)?;
    let x0 = constant_state(cfg, &model)?;
    let dt = cfg.dt(FIELD_DT)?;
    let traj = integrate_synchronized(&model, &specs, &x0, cfg.solver.t_end, dt).map_err(solver)?;
    let mut header = String::from("tail_min_mu_1,tail_max_mu_1");
    if cfg.analysis.regimes {
        header.push_str(",regime,stable_equilibria,equilibria,cycle_amplitude");
    }
    let mut piece = Piece::new(&header);
    let (lo, hi) = tail_range(&traj, 0);
    piece.summary_row = format!("{lo},{hi}");
    if cfg.analysis.regimes {
        let rep = classify_regime(&model, &specs, &RegimeOptions::default()).map_err(solver)?;
        let name = serde_json::to_value(rep.regime).unwrap();
        write!(
            piece.summary_row,
            ",{},{},{},{}",
            name.as_str().unwrap_or("undetermined"),
            rep.stable_equilibria,
            rep.equilibria,
            rep.cycle_amplitude
        )
        .unwrap();
    }
    piece.file(format!("trajectory{suffix}.csv"), trajectory_csv(&traj));
    Ok(piece)
}

fn field(cfg: &ExperimentConfig, suffix: &str) -> Result<Piece, CliError> {
    let model = cfg.field_model()?;
    let l = model.layers();
    let specs = cfg.specs(l)?;
    let grid = SpatialGrid::new(model.boundary, cfg.solver.n).map_err(|e| core_to_cli(e, "solver"))?;
    let init = cfg.field_init(&model)?.history(&grid, model.max_delay());
    let dt = cfg.dt(FIELD_DT)?;
    let opts = FieldOptions { record_every: cfg.solver.record_every };
    let tr = integrate_field_with(&model, &specs, &grid, &init, cfg.solver.t_end, dt, opts).map_err(solver)?;
    let mut header = Vec::new();
    for a in 1..=l {
        header.extend([
            format!("max_spatial_deviation_{a}"),
            format!("tail_spatial_range_{a}"),
            format!("dominant_mode_{a}"),
            format!("dominance_ratio_{a}"),
            format!("bumps_{a}"),
            format!("pattern_present_{a}"),
        ]);
    }
    let mut piece = Piece::new(&header.join(","));
    let t_end = *tr.times.last().unwrap();
    let tail_from = (t_end - 0.2 * (t_end - tr.times[0])).max(tr.times[0]);
    let mut row = Vec::new();
    let mut spectra = String::from("layer,k,amplitude\n");
    for a in 0..l {
        let spec = mode_spectrum(&tr, a, t_end).map_err(solver)?;
        let pat = pattern_diagnostics(&tr, a, tail_from, 1e-3).map_err(solver)?;
        for (k, amp) in spec.wavenumbers.iter().zip(&spec.amplitudes) {
            writeln!(spectra, "{},{k},{amp}", a + 1).unwrap();
        }
        row.extend([
            tr.max_spatial_deviation[a].to_string(),
            pat.tail_spatial_range.to_string(),
            spec.dominant.to_string(),
            spec.dominance_ratio.to_string(),
            pat.bump_count.to_string(),
            pat.pattern_present.to_string(),
        ]);
        piece.file(format!("mu_{}{suffix}.csv", a + 1), field_csv(&tr, a, FieldVariable::Mu).map_err(solver)?);
        piece.file(format!("v_{}{suffix}.csv", a + 1), field_csv(&tr, a, FieldVariable::V).map_err(solver)?);
    }
    piece.summary_row = row.join(",");
    piece.file(format!("spectrum{suffix}.csv"), spectra);
    piece.file(format!("field_meta{suffix}.toml"), field_metadata(&tr));
    if cfg.solver.binary {
        piece.files.push(OutputFile { name: format!("field{suffix}.bin"), bytes: field_binary(&tr) });
    }
    Ok(piece)
}

fn hopf(cfg: &ExperimentConfig, suffix: &str) -> Result<Piece, CliError> {
    let s = &cfg.spectral;
    let set = hopf_curves(cfg.sigmoid.gain, s.m_min..=s.m_max, s.n_lambda).map_err(|e| core_to_cli(e, "sigmoid"))?;
    let mut piece = Piece::new("lambda_star,curves,points,status");
    let points: usize = set.curves.iter().map(|c| c.points.len()).sum();
    let ls = set.lambda_star.map_or("nan".to_string(), |x| x.to_string());
    piece.summary_row = format!("{ls},{},{points},\"{}\"", set.curves.len(), set.status);
    if set.lambda_star.is_some() && set.status != "ok" {
        piece.certification.push(set.status.clone());
    }
    piece.file(format!("hopf_curves{suffix}.csv"), hopf_curves_csv(&set));
    Ok(piece)
}

fn dispersion_point(cfg: &ExperimentConfig, suffix: &str) -> Result<Piece, CliError> {
    let model = cfg.field_model()?;
    let spec = cfg.sigmoid.spec()?;
    let v0 = cfg.v0(&model)?;
    let s = &cfg.spectral;
    let query: Vec<Complex64> = s.nu_query.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
    let rep = dispersion(&model, &spec, v0, s.n_modes, s.convention, &query).map_err(|e| core_to_cli(e, "field"))?;
    let pf = pitchfork(&model, &spec, s.convention).map_err(|e| core_to_cli(e, "field"))?;
    let mut piece = Piece::new(
        "v0,rightmost_re,rightmost_im,stable,unconverged_modes,pitchfork_v0,pitchfork_v0_closed_form,linear_coupling_form",
    );
    let bad: Vec<i64> = rep.modes.iter().filter(|m| !m.converged).map(|m| m.k).collect();
    let pv = pf.v0.map_or("nan".to_string(), |x| x.to_string());
    piece.summary_row = format!(
        "{v0},{},{},{},{},{pv},{},{}",
        rep.rightmost.re,
        rep.rightmost.im,
        rep.stable,
        bad.len(),
        pf.v0_closed_form,
        pf.linear_coupling_form
    );
    if !bad.is_empty() {
        piece.certification.push(format!("modes {bad:?} have no certified growth rate"));
    }
    piece.file(format!("dispersion{suffix}.csv"), dispersion_csv(&rep));
    piece.file(format!("dispersion{suffix}.txt"), dispersion_report_text(&rep));
    Ok(piece)
}

fn turing_hopf(cfg: &ExperimentConfig, suffix: &str) -> Result<Piece, CliError> {
    let model = cfg.field_model()?;
    let spec = cfg.sigmoid.spec()?;
    let v0 = cfg.v0(&model)?;
    let s = &cfg.spectral;
    let mut all = nf_core::spectral::TuringHopfSet { points: Vec::new(), status: "ok".into() };
    let mut statuses = Vec::new();
    let mut piece = Piece::new("v0,points,status");
    for &k in &s.k {
        let set = turing_hopf_curves(&model, &spec, v0, k, s.m_min..=s.m_max).map_err(|e| core_to_cli(e, "field"))?;
        if set.status != "ok" {
            if set.status.contains("failed") {
                piece.certification.push(format!("mode {k}: {}", set.status));
            }
            statuses.push(format!("k = {k}: {}", set.status));
        }
        all.points.extend(set.points);
    }
    let status = if statuses.is_empty() { "ok".to_string() } else { statuses.join("; ") };
    piece.summary_row = format!("{v0},{},\"{status}\"", all.points.len());
    piece.file(format!("turing_hopf{suffix}.csv"), turing_hopf_csv(&all));
    Ok(piece)
}

fn network(cfg: &ExperimentConfig, suffix: &str) -> Result<Piece, CliError> {
    let model = cfg.finite_model()?;
    let p = model.populations();
    let specs = cfg.specs(p)?;
    let init = cfg.finite_init(&model)?;
    let nb = cfg.network_block()?;
    let th = model.theta.iter().copied().fold(f64::INFINITY, f64::min);
    let dt = cfg.dt(default_dt(&model).min(th / 20.0))?;
    let t_end = cfg.solver.t_end;
    let reference = integrate_moments(&model, &specs, &init, t_end, dt).map_err(solver)?;
    let mut piece = Piece::new("n,mean_gap,max_pair_correlation,correlation_within_band,gaussian_within_band");
    let mut gaps = Vec::new();
    let mut rows = Vec::new();
    for &n in &nb.sizes {
        let trace: Vec<usize> = (0..nb.trace.min(n)).map(|i| i * n / nb.trace.min(n)).collect();
        let opts = NetworkOptions {
            record_every: nb.record_every,
            sample_times: nb.sample_times.clone(),
            trace,
            ..NetworkOptions::default()
        };
        let sizes = equal_sizes(n, p);
        let real = simulate_network_with(&model, &specs, &init, &sizes, cfg.seed, t_end, dt, &opts).map_err(solver)?;
        let diag = chaos_diagnostics(&real, &reference, nb.pairs, &nb.sample_times).map_err(solver)?;
        gaps.push(diag.mean_gap());
        rows.push(format!(
            "{n},{},{},{},{}",
            diag.mean_gap(),
            diag.max_pair_correlation,
            diag.correlation_within_bands(),
            diag.gaussian_within_bands()
        ));
        piece.file(format!("population_match_n{n}{suffix}.csv"), diag.to_csv());
        if !real.trace_ids.is_empty() {
            let mut csv = String::from("t");
            for id in &real.trace_ids {
                write!(csv, ",neuron_{id}_pop_{}", real.population_of(*id) + 1).unwrap();
            }
            csv.push('\n');
            for (k, t) in real.times.iter().enumerate() {
                write!(csv, "{t}").unwrap();
                for tr in &real.traces {
                    write!(csv, ",{}", tr[k]).unwrap();
                }
                csv.push('\n');
            }
            piece.file(format!("traces_n{n}{suffix}.csv"), csv);
        }
    }
    if nb.sizes.len() >= 2 {
        let ns: Vec<f64> = nb.sizes.iter().map(|&n| n as f64).collect();
        rows.push(format!("slope,{},,,", log_log_slope(&ns, &gaps)));
    }
    piece.summary_row = rows.join("\n");
    piece.file(format!("moment_reference{suffix}.csv"), trajectory_csv(&reference));
    Ok(piece)
}
