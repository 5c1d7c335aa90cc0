//! Subcommand implementations. Each writes a comment header followed by
//! CSV rows, except the scalar `theory` actions, which print plain text.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use cirbench::experiments::{
    fit_rate, moment_sweep, negativity_sweep, strong_error_proxy_multi,
    strong_error_vs_reference_multi,
};
use cirbench::schemes::simulate_path;
use cirbench::theory::{
    alpha_n, beta_feasible_interval, derived_constants, hurwitz_zeta_upper, negativity_bound,
    nu_bar, sequence_iter,
};
use cirbench::{ErrorEstimate, Grid, SchemeKind, StreamKey};

use crate::config::{presets, ExperimentConfig};
use crate::output::{fmt_f64, fmt_sig, header};
use crate::{Command, CommonArgs, TheoryAction};

/// Opens `--out` when given, otherwise borrows `stdout`.
fn sink<'a>(cfg: &ExperimentConfig, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    match &cfg.out {
        Some(path) => Ok(Box::new(BufWriter::new(create(path)?))),
        None => Ok(Box::new(BufWriter::new(stdout))),
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("cannot write output file {}", path.display()))
}

pub fn dispatch(
    command: &Command,
    mut cfg: ExperimentConfig,
    common: &CommonArgs,
    stdout: &mut dyn Write,
) -> Result<()> {
    match command {
        Command::Simulate { scheme, n } => {
            if let Some(s) = scheme {
                cfg.set("scheme", s)?;
            }
            if let Some(n) = n {
                cfg.steps = *n;
            }
            simulate(&cfg, stdout)
        }
        Command::StrongError(args) => {
            if args.reference.is_some() {
                cfg.reference = args.reference;
            }
            let mut out = sink(&cfg, stdout)?;
            out.write_all(header("strong-error", &cfg).as_bytes())?;
            error_table(&cfg, &mut out)?;
            out.flush()?;
            Ok(())
        }
        Command::Rate { error, plot } => {
            if error.reference.is_some() {
                cfg.reference = error.reference;
            }
            rate(&cfg, plot.as_deref(), stdout)
        }
        Command::Negativity => negativity(&cfg, stdout),
        Command::Moments { scheme } => {
            if let Some(s) = scheme {
                cfg.set("scheme", s)?;
            }
            moments(&cfg, stdout)
        }
        Command::Theory { action } => theory(action, &cfg, common, stdout),
        Command::Presets => {
            let mut out = sink(&cfg, stdout)?;
            out.write_all(header("presets", &cfg).as_bytes())?;
            writeln!(out, "name,v0,k,theta,xi,horizon,nu")?;
            for p in presets() {
                let q = p.params;
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    p.name,
                    fmt_f64(q.v0),
                    fmt_f64(q.k),
                    fmt_f64(q.theta),
                    fmt_f64(q.xi),
                    fmt_f64(q.horizon),
                    fmt_f64(q.feller_ratio())
                )?;
            }
            out.flush()?;
            Ok(())
        }
    }
}

fn simulate(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<()> {
    let params = cfg.validated_params()?;
    let grid = Grid::for_params(&params, cfg.steps)?;
    let mut out = sink(cfg, stdout)?;
    out.write_all(header("simulate", cfg).as_bytes())?;
    writeln!(out, "path,n,t,tilde_v,bar_v,nonpositive")?;
    for i in 0..cfg.paths {
        let path = simulate_path(cfg.scheme, &params, &grid, StreamKey::brownian(cfg.seed, i))?;
        for (state, &neg) in path.states.iter().zip(&path.nonpositive) {
            writeln!(
                out,
                "{i},{},{},{},{},{}",
                state.node_index,
                fmt_f64(grid.node(state.node_index)),
                fmt_f64(state.tilde_v),
                fmt_f64(state.bar_v),
                neg as u8
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

fn check_fte(cfg: &ExperimentConfig, command: &str) -> Result<()> {
    if cfg.scheme != SchemeKind::FullTruncation {
        bail!(
            "`{command}` measures the fte scheme only (got scheme={})",
            cfg.scheme
        );
    }
    Ok(())
}

/// Estimates for every `N` in the configured list, grouped by `N`.
fn estimates(cfg: &ExperimentConfig) -> Result<Vec<ErrorEstimate>> {
    check_fte(cfg, "strong-error")?;
    let params = cfg.validated_params()?;
    if cfg.n_list.is_empty() {
        bail!("empty --n-list");
    }
    let mut all = Vec::new();
    for &n in &cfg.n_list {
        let rows = match cfg.reference {
            None => strong_error_proxy_multi(&params, n, &cfg.p_list, cfg.paths, cfg.seed)?,
            Some(m) => {
                strong_error_vs_reference_multi(&params, n, m, &cfg.p_list, cfg.paths, cfg.seed)?
            }
        };
        all.extend(rows);
    }
    Ok(all)
}

fn write_estimates(out: &mut dyn Write, rows: &[ErrorEstimate]) -> Result<()> {
    writeln!(out, "N,p,value,std_err,n_paths")?;
    for e in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.steps,
            fmt_f64(e.p),
            fmt_f64(e.value),
            fmt_f64(e.value_std_err),
            e.n_paths
        )?;
    }
    Ok(())
}

fn error_table(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Vec<ErrorEstimate>> {
    let rows = estimates(cfg)?;
    write_estimates(out, &rows)?;
    Ok(rows)
}

fn rate(cfg: &ExperimentConfig, plot: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    // Open the plot file first so an unwritable path fails before any work.
    let mut plot_out = plot.map(create).transpose()?.map(BufWriter::new);
    let mut out = sink(cfg, stdout)?;
    out.write_all(header("rate", cfg).as_bytes())?;
    let rows = error_table(cfg, &mut out)?;
    let mut fits = Vec::new();
    for &p in &cfg.p_list {
        let series: Vec<ErrorEstimate> = rows.iter().copied().filter(|e| e.p == p).collect();
        let fit =
            fit_rate(&series).with_context(|| format!("cannot fit a rate for p={}", fmt_f64(p)))?;
        writeln!(
            out,
            "# fit p={} slope={} slope_std_err={} intercept={} r_squared={}",
            fmt_f64(p),
            fmt_f64(fit.slope),
            fmt_f64(fit.slope_std_err),
            fmt_f64(fit.intercept),
            fmt_f64(fit.r_squared)
        )?;
        fits.push((p, fit));
    }
    out.flush()?;
    if let Some(plot_out) = plot_out.as_mut() {
        plot_out.write_all(header("rate", cfg).as_bytes())?;
        for (i, (p, fit)) in fits.iter().enumerate() {
            if i > 0 {
                writeln!(plot_out)?;
                writeln!(plot_out)?;
            }
            writeln!(plot_out, "# p={} slope={}", fmt_f64(*p), fmt_f64(fit.slope))?;
            writeln!(plot_out, "x,y")?;
            for &(x, y) in &fit.points {
                writeln!(plot_out, "{},{}", fmt_f64(x), fmt_f64(y))?;
            }
        }
        plot_out.flush()?;
    }
    Ok(())
}

fn negativity(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<()> {
    check_fte(cfg, "negativity")?;
    let params = cfg.validated_params()?;
    let report = negativity_sweep(&params, &cfg.n_list, cfg.paths, cfg.seed)?;
    let mut out = sink(cfg, stdout)?;
    out.write_all(header("negativity", cfg).as_bytes())?;
    writeln!(
        out,
        "N,n_paths,max_node_frequency,max_node,std_err,upper_95,ever_fraction,bound"
    )?;
    for pt in &report.points {
        let bound = pt
            .bound
            .map(|b| fmt_f64(b.probability))
            .unwrap_or_else(|| "nan".to_string());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            pt.steps,
            pt.n_paths,
            fmt_f64(pt.max_node_frequency),
            pt.max_node,
            fmt_f64(pt.std_err),
            fmt_f64(pt.upper_95),
            fmt_f64(pt.ever_fraction),
            bound
        )?;
    }
    out.flush()?;
    Ok(())
}

fn moments(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<()> {
    let params = cfg.validated_params()?;
    let report = moment_sweep(
        &params,
        &cfg.p_list,
        &cfg.n_list,
        cfg.paths,
        cfg.seed,
        cfg.scheme,
    )?;
    let mut out = sink(cfg, stdout)?;
    out.write_all(header("moments", cfg).as_bytes())?;
    writeln!(out, "N,p,value,std_err,node,heavy_tail")?;
    for pt in &report.points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            pt.steps,
            fmt_f64(pt.p),
            fmt_f64(pt.value),
            fmt_f64(pt.std_err),
            pt.node,
            pt.heavy_tail as u8
        )?;
    }
    out.flush()?;
    Ok(())
}

/// `--nu` verbatim when given, so scalar queries are not perturbed by the
/// round trip through `k`; otherwise the configured Feller ratio.
fn feller_ratio(cfg: &ExperimentConfig, common: &CommonArgs) -> f64 {
    common.nu.unwrap_or_else(|| cfg.params.feller_ratio())
}

fn theory(
    action: &TheoryAction,
    cfg: &ExperimentConfig,
    common: &CommonArgs,
    stdout: &mut dyn Write,
) -> Result<()> {
    let mut out = sink(cfg, stdout)?;
    // Scalars go to the terminal bare; files still carry the header.
    let scalar_header = |out: &mut dyn Write, name: &str| -> Result<()> {
        if cfg.out.is_some() {
            out.write_all(header(name, cfg).as_bytes())?;
        }
        Ok(())
    };
    let nu = feller_ratio(cfg, common);
    match action {
        TheoryAction::NuBar => {
            scalar_header(&mut out, "theory nu-bar")?;
            writeln!(out, "{}", fmt_sig(nu_bar(nu)?, 6))?;
        }
        TheoryAction::Constants => {
            scalar_header(&mut out, "theory constants")?;
            let d = derived_constants(nu)?;
            writeln!(out, "nu={}", fmt_f64(d.nu))?;
            writeln!(out, "nu_bar={}", fmt_f64(d.nu_bar))?;
            writeln!(out, "phi_nu={}", fmt_f64(d.phi_nu))?;
            writeln!(out, "eta_nu={}", fmt_f64(d.eta_nu))?;
            writeln!(out, "epsilon={}", fmt_f64(d.epsilon))?;
        }
        TheoryAction::Sequences { n, alpha } => {
            let params = cfg.validated_params()?;
            let steps = n.or(cfg.n_list.first().copied()).context("no step count")?;
            let alpha = match alpha {
                Some(a) => *a,
                None => alpha_n(params.k, params.horizon, steps)?,
            };
            let dt = params.horizon / steps as f64;
            // The c_j bound is defined only in the ν > 2 regime.
            let constants = (nu > 2.0).then(|| derived_constants(nu)).transpose()?;
            out.write_all(header("theory sequences", cfg).as_bytes())?;
            writeln!(out, "# alpha={}", fmt_f64(alpha))?;
            writeln!(out, "j,c,a,a_transform,c_bound")?;
            for term in sequence_iter(alpha, params.xi, dt, steps)? {
                let bound = match constants {
                    Some(d) if term.j >= 1 => {
                        1.0 - alpha - d.phi_nu / (term.j as f64 - 1.0 + d.eta_nu)
                    }
                    _ => f64::NAN,
                };
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    term.j,
                    fmt_f64(term.c),
                    fmt_f64(term.a),
                    fmt_f64(term.a_transform),
                    fmt_f64(bound)
                )?;
            }
        }
        TheoryAction::Bound { n } => {
            scalar_header(&mut out, "theory bound")?;
            let params = cfg.validated_params()?;
            let steps = n.or(cfg.n_list.first().copied()).context("no step count")?;
            let b = negativity_bound(&params, steps)?;
            writeln!(out, "N={steps}")?;
            writeln!(out, "exponent={}", fmt_f64(b.exponent))?;
            writeln!(out, "prefactor={}", fmt_f64(b.prefactor))?;
            writeln!(out, "raw={}", fmt_f64(b.raw))?;
            writeln!(out, "probability={}", fmt_f64(b.probability))?;
        }
        TheoryAction::BetaInterval { q } => {
            scalar_header(&mut out, "theory beta-interval")?;
            let b = beta_feasible_interval(nu, *q)?;
            writeln!(out, "lower={}", fmt_f64(b.lower))?;
            writeln!(out, "upper={}", fmt_f64(b.upper))?;
            writeln!(out, "empty={}", b.is_empty())?;
        }
        TheoryAction::Zeta { s, q } => {
            scalar_header(&mut out, "theory zeta")?;
            let z = hurwitz_zeta_upper(*s, *q)?;
            writeln!(out, "bound={}", fmt_f64(z.bound))?;
            writeln!(out, "truncated_sum={}", fmt_f64(z.truncated_sum))?;
        }
    }
    out.flush()?;
    Ok(())
}
