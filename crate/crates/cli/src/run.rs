//! Command dispatch and report emission.
//!
//! Exit-code contract: 0 success, 1 parse/validation, 2 hypothesis
//! violation, 3 divergence / non-convergence, 4 IO.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;

use fracsup::analysis::{appendix_example_1, appendix_example_2, verify_reabsorption};
use fracsup::energy::{check_growth_conditions, energy_i, energy_j};
use fracsup::grid::{build_domain, DiscreteFunction, GridDomain, Shape};
use fracsup::measure::{critical_exponent, SignedSpectralMeasure};
use fracsup::probe::probe_family;
use fracsup::seminorm::{estimate_comparison_constant, estimate_embedding_constant, norm_mu};
use fracsup::solver::{
    minimize_j, mountain_pass, mp_geometry, ps_diagnostics, SolverTrace, Termination,
};
use fracsup::FracError;

use crate::config::{ConfigError, Problem, Scenario};

pub const EXIT_PARSE: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn io(e: std::io::Error, path: &Path) -> Self {
        CliError { code: EXIT_IO, message: format!("io error at {}: {e}", path.display()) }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError { code: EXIT_PARSE, message: e.to_string() }
    }
}

impl From<FracError> for CliError {
    fn from(e: FracError) -> Self {
        let code = match &e {
            FracError::HypothesisViolation(_) | FracError::NegativePartPresent => EXIT_HYPOTHESIS,
            FracError::CollapsedPath(_) => EXIT_DIVERGENCE,
            _ => EXIT_PARSE,
        };
        CliError { code, message: e.to_string() }
    }
}

/// Number formatting for all CSV output: 17 significant digits, always
/// round-trippable through a decimal parse.
fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(e, path))?;
    }
    let mut f = fs::File::create(path).map_err(|e| CliError::io(e, path))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(e, path))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError { code: EXIT_IO, message: format!("json encode: {e}") })?;
    write_text(path, &text)
}

fn write_solution_csv(path: &Path, u: &DiscreteFunction) -> Result<(), CliError> {
    let mut out = String::new();
    if u.dom.dim == 1 {
        out.push_str("x,value\n");
        for (node, v) in u.dom.nodes.iter().zip(&u.values) {
            out.push_str(&format!("{},{}\n", fmt17(node[0]), fmt17(*v)));
        }
    } else {
        out.push_str("x,y,value\n");
        for (node, v) in u.dom.nodes.iter().zip(&u.values) {
            out.push_str(&format!("{},{},{}\n", fmt17(node[0]), fmt17(node[1]), fmt17(*v)));
        }
    }
    write_text(path, &out)
}

fn write_trace_csv(path: &Path, trace: &SolverTrace) -> Result<(), CliError> {
    let mut out = String::from("iter,energy,residual_sup,step,norm_mu\n");
    for (k, it) in trace.iterations.iter().enumerate() {
        let nm = it.mp.as_ref().map(|m| m.norm_mu).unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{k},{},{},{},{}\n",
            fmt17(it.energy),
            fmt17(it.residual_sup),
            fmt17(it.step),
            fmt17(nm)
        ));
    }
    write_text(path, &out)
}

fn out_dir(scenario_out: &Option<String>, flag_out: &Option<PathBuf>) -> PathBuf {
    flag_out
        .clone()
        .or_else(|| scenario_out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Effective gamma bound for the hypothesis gate: an explicit override wins;
/// otherwise, when a negative part is present, calibrate the reabsorption
/// constant c1 on a probe family and keep a factor-2 safety margin
/// (gamma_max = 0.5 / c1). Purely positive measures are unconstrained.
fn effective_gamma_max(sc: &Scenario) -> Result<f64, CliError> {
    if let Some(g) = sc.gamma_max_override {
        if !(g > 0.0) {
            return Err(CliError {
                code: EXIT_PARSE,
                message: format!("gamma_max override {g} must be positive"),
            });
        }
        return Ok(g);
    }
    if sc.measure.negative.is_none() {
        return Ok(f64::INFINITY);
    }
    let rep = verify_reabsorption(&sc.measure, &sc.domain, 32, sc.solver.rng_seed ^ 0x5eed, None)?;
    if rep.c1_empirical <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(0.5 / rep.c1_empirical)
}

/// Guard shared by solve/mountainpass: turn a failed gamma check into a
/// hypothesis exit that cites the bound explicitly.
fn gamma_gate(m: &SignedSpectralMeasure, gamma_max: f64) -> Result<(), CliError> {
    let rep = m.check_hypotheses(gamma_max);
    if rep.all_pass {
        return Ok(());
    }
    let failed: Vec<String> = rep
        .items
        .iter()
        .filter(|i| !i.pass)
        .map(|i| format!("{} {}: {}", i.id, i.description, i.detail))
        .collect();
    let mut message = format!("hypothesis check failed:\n  {}", failed.join("\n  "));
    if rep.gamma > gamma_max {
        message.push_str(&format!(
            "\nnegative/positive mass ratio gamma = {} exceeds the reabsorption \
             gamma-bound gamma_max = {}; the negative part cannot be reabsorbed",
            rep.gamma, gamma_max
        ));
    }
    Err(CliError { code: EXIT_HYPOTHESIS, message })
}

fn termination_exit(trace: &SolverTrace, gamma: f64, gamma_max: f64) -> Result<(), CliError> {
    match trace.termination {
        Termination::Converged => Ok(()),
        Termination::Diverged => Err(CliError {
            code: EXIT_DIVERGENCE,
            message: format!(
                "energy diverged to -infinity: negative-part ratio gamma = {gamma} \
                 (gamma-bound in force: gamma_max = {gamma_max}); coercivity lost"
            ),
        }),
        Termination::MaxIter => Err(CliError {
            code: EXIT_DIVERGENCE,
            message: format!(
                "iteration budget exhausted before reaching the residual tolerance \
                 (last residual {})",
                trace
                    .iterations
                    .last()
                    .map(|i| i.residual_sup)
                    .unwrap_or(f64::NAN)
            ),
        }),
    }
}

pub fn run_solve(sc: &Scenario, flag_out: &Option<PathBuf>) -> Result<(), CliError> {
    let dir = out_dir(&sc.outputs, flag_out);
    let gamma_max = effective_gamma_max(sc)?;
    gamma_gate(&sc.measure, gamma_max)?;
    let mut cfg = sc.solver.clone();
    cfg.gamma_max = gamma_max;

    let (trace, breakdown, report_extra) = match &sc.problem {
        Problem::LinearSource(src) => {
            let trace = minimize_j(&sc.measure, src, &cfg, None)?;
            let b = energy_j(&trace.final_u, &sc.measure, src, gamma_max)?;
            (trace, b, json!({ "problem": "linear" }))
        }
        Problem::Nonlinear(_) => {
            return Err(CliError {
                code: EXIT_PARSE,
                message: "problem.kind = \"nonlinear\" requires the `mountainpass` command"
                    .into(),
            })
        }
    };

    write_solution_csv(&dir.join("solution.csv"), &trace.final_u)?;
    write_trace_csv(&dir.join("trace.csv"), &trace)?;
    let hyp = sc.measure.check_hypotheses(gamma_max);
    let report = json!({
        "scenario": sc.name,
        "command": "solve",
        "extra": report_extra,
        "termination": trace.termination,
        "iterations": trace.iterations.len(),
        "final_energy": breakdown.total,
        "energy_breakdown": breakdown,
        "hypotheses": hyp,
        "gamma_max": gamma_max,
        "grid": { "dim": sc.domain.dim, "h": sc.domain.h, "nodes": sc.domain.len() },
    });
    write_json(&dir.join("report.json"), &report)?;
    termination_exit(&trace, sc.measure.gamma_ratio(), gamma_max)
}

pub fn run_mountain_pass(sc: &Scenario, flag_out: &Option<PathBuf>) -> Result<(), CliError> {
    let dir = out_dir(&sc.outputs, flag_out);
    let nl = match &sc.problem {
        Problem::Nonlinear(nl) => nl,
        Problem::LinearSource(_) => {
            return Err(CliError {
                code: EXIT_PARSE,
                message: "problem.kind = \"linear\" requires the `solve` command".into(),
            })
        }
    };
    let gamma_max = effective_gamma_max(sc)?;
    gamma_gate(&sc.measure, gamma_max)?;
    let mut cfg = sc.solver.clone();
    cfg.gamma_max = gamma_max;

    let (geometry, _endpoint) = mp_geometry(&sc.measure, nl, &sc.domain, cfg.rng_seed)?;
    let trace = mountain_pass(&sc.measure, nl, &cfg, &sc.domain)?;
    let breakdown = energy_i(&trace.final_u, &sc.measure, nl)?;
    let ps = ps_diagnostics(&trace, &sc.measure, nl);

    write_solution_csv(&dir.join("solution.csv"), &trace.final_u)?;
    write_trace_csv(&dir.join("trace.csv"), &trace)?;
    let hyp = sc.measure.check_hypotheses(gamma_max);
    let (s_sharp, p_sharp, crit) = sc.measure.sharp_pair()?;
    let growth = check_growth_conditions(nl, sc.measure.p_hat(), crit, 64);
    let report = json!({
        "scenario": sc.name,
        "command": "mountainpass",
        "termination": trace.termination,
        "iterations": trace.iterations.len(),
        "critical_value": breakdown.total,
        "energy_breakdown": breakdown,
        "geometry": geometry,
        "palais_smale": ps,
        "growth_conditions": growth,
        "hypotheses": hyp,
        "sharp_pair": { "s": s_sharp, "p": p_sharp, "critical_exponent": crit },
        "grid": { "dim": sc.domain.dim, "h": sc.domain.h, "nodes": sc.domain.len() },
    });
    write_json(&dir.join("report.json"), &report)?;
    termination_exit(&trace, sc.measure.gamma_ratio(), gamma_max)
}

pub fn run_verify_reabsorption(
    sc: &Scenario,
    flag_out: &Option<PathBuf>,
    probes: usize,
) -> Result<(), CliError> {
    let dir = out_dir(&sc.outputs, flag_out);
    let rep = verify_reabsorption(&sc.measure, &sc.domain, probes, sc.solver.rng_seed, None)?;

    let mut csv = String::from("probe,lhs,rhs_raw,ratio\n");
    for (k, row) in rep.per_probe.iter().enumerate() {
        csv.push_str(&format!(
            "{k},{},{},{}\n",
            fmt17(row.lhs),
            fmt17(row.rhs_raw),
            fmt17(row.ratio)
        ));
    }
    write_text(&dir.join("reabsorption.csv"), &csv)?;
    write_json(
        &dir.join("report.json"),
        &json!({
            "scenario": sc.name,
            "command": "verify reabsorption",
            "report": rep,
            "gamma_max_implied": if rep.c1_empirical > 0.0 { 0.5 / rep.c1_empirical } else { f64::INFINITY },
        }),
    )?;
    if rep.gamma_used > 0.0 && rep.c1_empirical * rep.gamma_used >= 1.0 {
        return Err(CliError {
            code: EXIT_HYPOTHESIS,
            message: format!(
                "reabsorption fails empirically: c1 * gamma = {} >= 1 \
                 (gamma = {} above the gamma-bound {})",
                rep.c1_empirical * rep.gamma_used,
                rep.gamma_used,
                0.5 / rep.c1_empirical
            ),
        });
    }
    Ok(())
}

fn series_csv(report: &fracsup::analysis::AppendixSeriesReport) -> String {
    let mut csv = String::from("x,norm_value,energy_value\n");
    for p in &report.series {
        csv.push_str(&format!(
            "{},{},{}\n",
            fmt17(p.x),
            fmt17(p.norm_value),
            fmt17(p.energy_value)
        ));
    }
    csv
}

pub fn run_verify_appendix1(
    n: u32,
    eps: f64,
    k_max: usize,
    h: Option<f64>,
    out: &Option<PathBuf>,
) -> Result<(), CliError> {
    let dir = out_dir(&None, out);
    // Spot checks against grid quadrature need a matching grid dimension;
    // only N=2 is desk-scale, higher N keeps the closed-form series.
    let dom: Arc<GridDomain> = if n == 2 {
        build_domain(
            Shape::Ball { center: [0.0, 0.0], radius: 1.0, dim: 2 },
            h.unwrap_or(0.05),
        )?
    } else {
        build_domain(Shape::Interval { a: -1.0, b: 1.0 }, h.unwrap_or(0.05))?
    };
    let rep = appendix_example_1(n, eps, k_max, &dom)?;
    write_text(&dir.join("appendix1_series.csv"), &series_csv(&rep))?;
    let mut spot = String::from("k,analytic,numeric,rel_err\n");
    for s in &rep.spot_checks {
        spot.push_str(&format!(
            "{},{},{},{}\n",
            s.k,
            fmt17(s.analytic),
            fmt17(s.numeric),
            fmt17(s.rel_err)
        ));
    }
    write_text(&dir.join("appendix1_spot_checks.csv"), &spot)?;
    write_json(
        &dir.join("report.json"),
        &json!({
            "command": "verify appendix1",
            "n": n,
            "eps": eps,
            "k_max": k_max,
            "partial_norm": rep.partial_norm,
            "partial_energy": rep.partial_energy,
            "norm_tail_bound": rep.norm_tail_bound,
            "spot_checks": rep.spot_checks,
        }),
    )
}

pub fn run_verify_appendix2(
    n: u32,
    panels: usize,
    out: &Option<PathBuf>,
) -> Result<(), CliError> {
    let dir = out_dir(&None, out);
    let rep = appendix_example_2(n, panels)?;
    write_text(&dir.join("appendix2_series.csv"), &series_csv(&rep))?;
    write_json(
        &dir.join("report.json"),
        &json!({
            "command": "verify appendix2",
            "n": n,
            "norm_integral": rep.partial_norm,
            "energy_growth_exponent": rep.energy_growth_exponent,
        }),
    )
}

pub fn run_verify_norm_axioms(
    sc: &Scenario,
    flag_out: &Option<PathBuf>,
    probes: usize,
) -> Result<(), CliError> {
    let dir = out_dir(&sc.outputs, flag_out);
    let family = probe_family(&sc.domain, probes, sc.solver.rng_seed);
    let mut worst_hom: f64 = 0.0;
    let mut worst_tri: f64 = f64::INFINITY;
    for pair in family.chunks(2) {
        if pair.len() < 2 {
            continue;
        }
        let (u, v) = (&pair[0], &pair[1]);
        let nu = norm_mu(u, &sc.measure)?;
        let nv = norm_mu(v, &sc.measure)?;
        let lam = 1.75f64;
        let scaled = DiscreteFunction {
            dom: Arc::clone(&u.dom),
            values: u.values.iter().map(|x| lam * x).collect(),
        };
        let ns = norm_mu(&scaled, &sc.measure)?;
        if nu > 0.0 {
            worst_hom = worst_hom.max((ns - lam * nu).abs() / (lam * nu));
        }
        let sum = DiscreteFunction {
            dom: Arc::clone(&u.dom),
            values: u.values.iter().zip(&v.values).map(|(a, b)| a + b).collect(),
        };
        let nsum = norm_mu(&sum, &sc.measure)?;
        worst_tri = worst_tri.min(nu + nv - nsum);
    }
    let pass = worst_hom <= 1e-10 && worst_tri >= -1e-10;
    write_json(
        &dir.join("report.json"),
        &json!({
            "scenario": sc.name,
            "command": "verify norm-axioms",
            "probes": probes,
            "worst_homogeneity_rel_err": worst_hom,
            "worst_triangle_slack": worst_tri,
            "pass": pass,
        }),
    )?;
    if pass {
        Ok(())
    } else {
        Err(CliError {
            code: EXIT_HYPOTHESIS,
            message: format!(
                "norm axioms violated on probes: homogeneity error {worst_hom}, \
                 triangle slack {worst_tri}"
            ),
        })
    }
}

pub fn run_verify_hypotheses(sc: &Scenario, flag_out: &Option<PathBuf>) -> Result<(), CliError> {
    let dir = out_dir(&sc.outputs, flag_out);
    let gamma_max = effective_gamma_max(sc)?;
    let rep = sc.measure.check_hypotheses(gamma_max);
    write_json(
        &dir.join("report.json"),
        &json!({
            "scenario": sc.name,
            "command": "verify hypotheses",
            "hypotheses": rep,
        }),
    )?;
    gamma_gate(&sc.measure, gamma_max)
}

pub fn run_estimate_constants(
    sc: &Scenario,
    flag_out: &Option<PathBuf>,
    probes: usize,
) -> Result<(), CliError> {
    let dir = out_dir(&sc.outputs, flag_out);
    let family = probe_family(&sc.domain, probes, sc.solver.rng_seed);
    let (s_sharp, p_sharp, crit) = sc.measure.sharp_pair()?;
    let s_bar = sc.measure.s_bar();

    // embedding L^r -> X_mu at r = p_hat and at the sharp critical exponent
    let c_phat = estimate_embedding_constant(sc.measure.p_hat(), &sc.measure, &family)?;
    let c_crit = estimate_embedding_constant(crit, &sc.measure, &family)?;

    // seminorm comparison [.]_{s,p} <= C [.]_{s_bar,p} for each atom column
    let mut comparisons = Vec::new();
    for a in &sc.measure.positive_atoms {
        if a.s < s_bar {
            let c = estimate_comparison_constant(a.s, s_bar, a.p, &family)?;
            comparisons.push(json!({ "s": a.s, "p": a.p, "constant": c }));
        }
    }

    let reabsorption = if sc.measure.negative.is_some() {
        let rep = verify_reabsorption(&sc.measure, &sc.domain, probes, sc.solver.rng_seed, None)?;
        json!({
            "c0_empirical": rep.c0_empirical,
            "c1_empirical": rep.c1_empirical,
            "gamma": rep.gamma_used,
            "gamma_max_implied": if rep.c1_empirical > 0.0 { 0.5 / rep.c1_empirical } else { f64::INFINITY },
        })
    } else {
        serde_json::Value::Null
    };

    write_json(
        &dir.join("report.json"),
        &json!({
            "scenario": sc.name,
            "command": "estimate-constants",
            "probes": probes,
            "embedding": { "c_at_p_hat": c_phat, "c_at_critical": c_crit },
            "sharp_pair": { "s": s_sharp, "p": p_sharp, "critical_exponent": crit,
                            "check": critical_exponent(s_sharp, p_sharp, sc.measure.ambient_n)? },
            "seminorm_comparisons": comparisons,
            "reabsorption": reabsorption,
        }),
    )
}
