//! Descent and mountain-pass solvers with Palais-Smale-style diagnostics.
//!
//! `minimize_j` is plain gradient descent with Armijo backtracking (the
//! energy is C^1 but not C^2 at vanishing gradients for p < 2, so Newton is
//! deliberately avoided). `mountain_pass` is a path-deformation algorithm:
//! a discretized path from 0 to a low-energy endpoint e is deformed by
//! pushing its energy maximizer with descent steps orthogonal to the local
//! path tangent (plus a line maximization along the tangent to stay on the
//! ridge), re-tensioning the path periodically. This mirrors the deformation
//! structure of the Mountain Pass Theorem.

use crate::energy::{
    check_growth_conditions, energy_i, energy_j, weak_residual_i, weak_residual_j, Nonlinearity,
    SourceTerm,
};
use crate::error::{FracError, Result};
use crate::grid::{DiscreteFunction, GridDomain, Shape};
use crate::measure::SignedSpectralMeasure;
use crate::probe::probe_family;
use crate::seminorm::{estimate_embedding_constant, norm_mu, seminorm};
use std::sync::Arc;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Convergence threshold on the sup-norm of the weak residual.
    pub tol_residual: f64,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    pub initial_step: f64,
    /// Number of segments of the discretized mountain-pass path.
    pub path_points: usize,
    /// Re-tension the path every this many deformation steps.
    pub deform_steps: usize,
    pub rng_seed: u64,
    /// Gamma gate for the hypothesis check; callers wire the empirical bound
    /// (or an override) here.
    pub gamma_max: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 200_000,
            tol_residual: 1e-8,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            initial_step: 1.0,
            path_points: 30,
            deform_steps: 10,
            rng_seed: 0,
            gamma_max: f64::INFINITY,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.max_iter > 0
            && self.tol_residual > 0.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.armijo_shrink > 0.0
            && self.armijo_shrink < 1.0
            && self.initial_step > 0.0
            && self.path_points >= 2
            && self.deform_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(FracError::OutOfRange("invalid solver configuration".into()))
        }
    }
}

/// Extra per-iterate diagnostics recorded by the mountain-pass solver.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MpRecord {
    pub norm_mu: f64,
    /// Unweighted seminorm powers [u]^{p_k} per positive atom.
    pub atom_powers: Vec<f64>,
    /// <I'(u), u>.
    pub pairing: f64,
    /// ||u_{n+1} - u_n||_mu of the step taken from this iterate.
    pub delta_norm: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct IterationRecord {
    pub energy: f64,
    pub residual_sup: f64,
    pub step: f64,
    pub mp: Option<MpRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Termination {
    Converged,
    MaxIter,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    pub final_u: DiscreteFunction,
}

fn axpy(u: &DiscreteFunction, alpha: f64, d: &[f64]) -> DiscreteFunction {
    DiscreteFunction {
        dom: Arc::clone(&u.dom),
        values: u
            .values
            .iter()
            .zip(d)
            .map(|(a, b)| a + alpha * b)
            .collect(),
    }
}

/// Gradient descent on J with Armijo backtracking.
///
/// Returns a trace whose termination is `Diverged` when the energy falls
/// below -1/tol (coercivity lost, i.e. gamma too large); hypothesis failures
/// error out before the first iteration.
pub fn minimize_j(
    m: &SignedSpectralMeasure,
    src: &SourceTerm,
    cfg: &SolverConfig,
    u0: Option<&DiscreteFunction>,
) -> Result<SolverTrace> {
    cfg.validate()?;
    let report = m.check_hypotheses(cfg.gamma_max);
    if !report.all_pass {
        let failed: Vec<&str> = report
            .items
            .iter()
            .filter(|i| !i.pass)
            .map(|i| i.id.as_str())
            .collect();
        return Err(FracError::HypothesisViolation(failed.join(", ")));
    }

    let mut u = match u0 {
        Some(w) => w.clone(),
        None => DiscreteFunction::zero(&src.g.dom),
    };
    let mut iterations = Vec::new();
    let mut step = cfg.initial_step;
    let diverge_floor = -1.0 / cfg.tol_residual;
    let mut termination = Termination::MaxIter;

    for _ in 0..cfg.max_iter {
        let e = energy_j(&u, m, src, cfg.gamma_max)?.total;
        let r = weak_residual_j(&u, m, src)?;
        let rs = r.sup_norm();
        iterations.push(IterationRecord { energy: e, residual_sup: rs, step, mp: None });

        if e < diverge_floor {
            termination = Termination::Diverged;
            break;
        }
        if rs <= cfg.tol_residual {
            termination = Termination::Converged;
            break;
        }

        let g2: f64 = r.values.iter().map(|v| v * v).sum();
        let mut alpha = (step * 2.0).min(cfg.initial_step * 1e6);
        let mut accepted = false;
        for _ in 0..80 {
            let trial = axpy(&u, -alpha, &r.values);
            let et = energy_j(&trial, m, src, cfg.gamma_max)?.total;
            // strict decrease: a step whose gain rounds to zero is a stall,
            // not progress, and must fall through to the no-progress exit
            if (et < e && et <= e - cfg.armijo_c * alpha * g2) || et < diverge_floor {
                u = trial;
                step = alpha;
                accepted = true;
                break;
            }
            alpha *= cfg.armijo_shrink;
        }
        if !accepted {
            // cannot make progress at machine precision
            break;
        }
    }
    Ok(SolverTrace { iterations, termination, final_u: u })
}

/// Mountain-pass geometry constants per the explicit recipe of the geometry
/// propositions, instantiated with empirical embedding constants.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MpGeometry {
    pub rho: f64,
    pub beta: f64,
    /// Empirical constant C dominating both embedding terms.
    pub c_embed: f64,
    pub eps: f64,
    pub delta: f64,
    pub t_bar: f64,
    /// Times the endpoint scale was doubled beyond the formula value to make
    /// I(e) < 0 on the grid (0 when the formula value already works).
    pub endpoint_doublings: u32,
}

/// The centered polynomial bump used as the endpoint profile: a stand-in for
/// the smooth cutoff of the geometry proposition.
pub fn endpoint_bump(dom: &Arc<GridDomain>) -> DiscreteFunction {
    let (lo, hi) = match dom.shape {
        Shape::Interval { a, b } => ([a, 0.0], [b, 1.0]),
        Shape::Box2 { a, b } => (a, b),
        Shape::Ball { center, radius, dim } => {
            let mut l = [0.0, 0.0];
            let mut h = [1.0, 1.0];
            for d in 0..dim {
                l[d] = center[d] - radius;
                h[d] = center[d] + radius;
            }
            (l, h)
        }
    };
    DiscreteFunction::from_fn(dom, |x| {
        let mut v = 1.0;
        for d in 0..dom.dim {
            let c = (lo[d] + hi[d]) / 2.0;
            let w = 0.8 * (hi[d] - lo[d]);
            let t = 2.0 * (x[d] - c) / w;
            v *= (1.0 - t * t).max(0.0);
        }
        v * v
    })
}

/// Compute (rho, beta) and the endpoint scale t_bar for the measure and
/// nonlinearity on this grid.
pub fn mp_geometry(
    m: &SignedSpectralMeasure,
    nl: &Nonlinearity,
    dom: &Arc<GridDomain>,
    seed: u64,
) -> Result<(MpGeometry, DiscreteFunction)> {
    let p_hat = m.p_hat();
    let q = nl.params.q;
    let atoms = m.positive_atoms.len() as f64;
    let probes = probe_family(dom, 64, seed);

    let c_p = estimate_embedding_constant(p_hat, m, &probes)?;
    let c_q = estimate_embedding_constant(q, m, &probes)?;
    let c_embed = c_p.powf(p_hat).max(c_q.powf(q)).max(1e-12);

    let eps = 1.0 / (4.0 * c_embed * p_hat * atoms.powf(p_hat - 1.0));
    let delta = nl.delta_sv12(eps);
    // rho solves C delta rho^{q - p_hat} = 1/(8 p_hat m^{p_hat - 1}), capped at 1
    let x = 1.0 / (8.0 * c_embed * delta * p_hat * atoms.powf(p_hat - 1.0));
    let rho = x.powf(1.0 / (q - p_hat)).min(1.0);
    let beta = rho.powf(p_hat) / (8.0 * p_hat * atoms.powf(p_hat - 1.0));

    // endpoint e = t_bar * phi / ||phi||_mu with the explicit t_bar formula
    let phi = endpoint_bump(dom);
    let phi_norm = norm_mu(&phi, m)?;
    if phi_norm <= 0.0 {
        return Err(FracError::DegenerateProbe);
    }
    let gp = &nl.params;
    let mut sn_term = 0.0;
    for a in &m.positive_atoms {
        let sn = seminorm(&phi, a.s, a.p)?.value;
        sn_term += sn.powf(a.p) / a.p;
    }
    let omega_vol = dom.len() as f64 * dom.cell_volume;
    let denom = gp.a3 * phi.lp_norm(gp.theta_tilde).powf(gp.theta_tilde);
    let t1 = (sn_term / denom).powf(1.0 / (gp.theta_tilde - p_hat));
    let t2 = ((gp.a4 * omega_vol) / denom).powf(1.0 / gp.theta_tilde);
    let mut t_bar = rho.max(t1).max(t2) + 1.0;

    // the formula is asymptotic; on the grid, double until the endpoint is
    // strictly below the pass level (I(e) < 0 <= beta)
    let mut doublings = 0;
    let make_e = |t: f64| {
        DiscreteFunction {
            dom: Arc::clone(dom),
            values: phi.values.iter().map(|v| t * v / phi_norm).collect(),
        }
    };
    let mut e_fun = make_e(t_bar);
    while energy_i(&e_fun, m, nl)?.total >= 0.0 {
        t_bar *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(FracError::CollapsedPath(0.0));
        }
        e_fun = make_e(t_bar);
    }

    Ok((
        MpGeometry { rho, beta, c_embed, eps, delta, t_bar, endpoint_doublings: doublings },
        e_fun,
    ))
}

/// Dense Gaussian elimination with partial pivoting; `None` on a (numerically)
/// singular matrix. Problem sizes here are a few thousand unknowns at most,
/// so cubic cost is acceptable and avoids a linear-algebra dependency.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Damped Newton iteration on the full weak residual, used to polish the
/// saddle once the path deformation has localized it. The Jacobian is
/// assembled by forward differences of the residual; steps are accepted on
/// l2 residual decrease. Returns the converged point, or `None` when the
/// iteration cannot make progress (caller falls back to the path loop).
fn newton_saddle(
    start: &DiscreteFunction,
    m: &SignedSpectralMeasure,
    nl: &Nonlinearity,
    cfg: &SolverConfig,
    iterations: &mut Vec<IterationRecord>,
) -> Result<Option<DiscreteFunction>> {
    let n = start.dom.len();
    let mut u = start.clone();
    let mut r = weak_residual_i(&u, m, nl)?;
    for _ in 0..40 {
        let rs = r.sup_norm();
        let breakdown = energy_i(&u, m, nl)?;
        let pairing: f64 = r.values.iter().zip(&u.values).map(|(a, b)| a * b).sum();
        let nmu: f64 = breakdown.per_atom.iter().map(|a| a.weight * a.seminorm).sum();
        let atom_powers: Vec<f64> =
            breakdown.per_atom.iter().map(|a| a.seminorm.powf(a.p)).collect();
        let mut record = IterationRecord {
            energy: breakdown.total,
            residual_sup: rs,
            step: 0.0,
            mp: Some(MpRecord { norm_mu: nmu, atom_powers, pairing, delta_norm: 0.0 }),
        };
        if rs <= cfg.tol_residual {
            iterations.push(record);
            return Ok(Some(u));
        }

        let mut jac = vec![vec![0.0; n]; n];
        for j in 0..n {
            let eps = 1e-6 * (1.0 + u.values[j].abs());
            let mut up = u.clone();
            up.values[j] += eps;
            let rp = weak_residual_i(&up, m, nl)?;
            for i in 0..n {
                jac[i][j] = (rp.values[i] - r.values[i]) / eps;
            }
        }
        let d = match solve_dense(jac, r.values.clone()) {
            Some(d) => d,
            None => return Ok(None),
        };

        let r2: f64 = r.values.iter().map(|v| v * v).sum();
        let mut t = 1.0;
        let mut accepted = None;
        while t >= 1.0 / 1024.0 {
            let trial = axpy(&u, -t, &d);
            let rt = weak_residual_i(&trial, m, nl)?;
            let rt2: f64 = rt.values.iter().map(|v| v * v).sum();
            if rt2 < r2 * (1.0 - 0.25 * t) {
                accepted = Some((trial, rt, t));
                break;
            }
            t *= 0.5;
        }
        let (trial, rt, t) = match accepted {
            Some(a) => a,
            None => return Ok(None),
        };
        let diff = DiscreteFunction {
            dom: Arc::clone(&u.dom),
            values: trial.values.iter().zip(&u.values).map(|(a, b)| a - b).collect(),
        };
        record.step = t;
        if let Some(mp) = record.mp.as_mut() {
            mp.delta_norm = norm_mu(&diff, m)?;
        }
        iterations.push(record);
        u = trial;
        r = rt;
    }
    Ok(None)
}

/// Path-deformation numerical mountain pass for I.
pub fn mountain_pass(
    m: &SignedSpectralMeasure,
    nl: &Nonlinearity,
    cfg: &SolverConfig,
    dom: &Arc<GridDomain>,
) -> Result<SolverTrace> {
    cfg.validate()?;
    if m.negative.is_some() {
        return Err(FracError::NegativePartPresent);
    }
    let (_, _, crit) = m.sharp_pair()?;
    let growth = check_growth_conditions(nl, m.p_hat(), crit, 64);
    if !growth.all_pass {
        let failed: Vec<&str> = growth
            .conditions
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        return Err(FracError::HypothesisViolation(format!(
            "growth conditions failed: {}",
            failed.join(", ")
        )));
    }

    let (_geo, e_fun) = mp_geometry(m, nl, dom, cfg.rng_seed)?;
    let np = cfg.path_points;
    let mut states: Vec<DiscreteFunction> = (0..=np)
        .map(|k| {
            let t = k as f64 / np as f64;
            DiscreteFunction {
                dom: Arc::clone(dom),
                values: e_fun.values.iter().map(|v| t * v).collect(),
            }
        })
        .collect();
    let mut energies: Vec<f64> = states
        .iter()
        .map(|u| energy_i(u, m, nl).map(|b| b.total))
        .collect::<Result<_>>()?;

    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut termination = Termination::MaxIter;
    let mut step = cfg.initial_step;
    let mut final_u = states[np / 2].clone();
    let mut stall = 0usize;
    let mut newton_tries = 0usize;

    for iter in 0..cfg.max_iter {
        // path maximizer (ties resolved toward the smallest index)
        let mut kstar = 1;
        for k in 1..np {
            if energies[k] > energies[kstar] + 1e-12 {
                kstar = k;
            }
        }
        let peak = energies[kstar];
        if peak <= 0.0 {
            return Err(FracError::CollapsedPath(peak));
        }

        let u = states[kstar].clone();
        let breakdown = energy_i(&u, m, nl)?;
        let r = weak_residual_i(&u, m, nl)?;
        let rs = r.sup_norm();
        let pairing: f64 = r.values.iter().zip(&u.values).map(|(a, b)| a * b).sum();
        let nmu: f64 = breakdown
            .per_atom
            .iter()
            .map(|a| a.weight * a.seminorm)
            .sum();
        let atom_powers: Vec<f64> = breakdown
            .per_atom
            .iter()
            .map(|a| a.seminorm.powf(a.p))
            .collect();

        if rs <= cfg.tol_residual {
            iterations.push(IterationRecord {
                energy: breakdown.total,
                residual_sup: rs,
                step,
                mp: Some(MpRecord { norm_mu: nmu, atom_powers, pairing, delta_norm: 0.0 }),
            });
            termination = Termination::Converged;
            final_u = u;
            break;
        }

        // local path tangent at the maximizer
        let tau: Vec<f64> = states[kstar + 1]
            .values
            .iter()
            .zip(&states[kstar - 1].values)
            .map(|(a, b)| a - b)
            .collect();
        let tau_norm2: f64 = tau.iter().map(|t| t * t).sum();

        // ride the crest: parabolic line maximization of I along the tangent
        let mut u_cur = u.clone();
        let mut e_cur = breakdown.total;
        if tau_norm2 > 0.0 {
            let probe = 0.25;
            let em = energy_i(&axpy(&u_cur, -probe, &tau), m, nl)?.total;
            let ep = energy_i(&axpy(&u_cur, probe, &tau), m, nl)?.total;
            let denom = em - 2.0 * e_cur + ep;
            if denom < 0.0 {
                let c = (probe * 0.5 * (em - ep) / denom).clamp(-0.4, 0.4);
                if c != 0.0 {
                    let trial = axpy(&u_cur, c, &tau);
                    let et = energy_i(&trial, m, nl)?.total;
                    if et > e_cur {
                        u_cur = trial;
                        e_cur = et;
                    }
                }
            }
        }

        // descend orthogonally to the tangent
        let r_cur = weak_residual_i(&u_cur, m, nl)?;
        let mut dir: Vec<f64> = if tau_norm2 > 0.0 {
            let rt: f64 = r_cur.values.iter().zip(&tau).map(|(a, b)| a * b).sum();
            r_cur
                .values
                .iter()
                .zip(&tau)
                .map(|(ri, ti)| ri - rt / tau_norm2 * ti)
                .collect()
        } else {
            r_cur.values.clone()
        };
        let dir_norm2: f64 = dir.iter().map(|d| d * d).sum();
        if dir_norm2 < 1e-30 {
            dir = r_cur.values.clone();
        }
        let g2: f64 = dir.iter().map(|d| d * d).sum();
        let mut alpha = (step * 2.0).min(cfg.initial_step * 1e6);
        let mut moved = u_cur.clone();
        let mut e_new = e_cur;
        let mut made_step = false;
        for _ in 0..60 {
            let trial = axpy(&u_cur, -alpha, &dir);
            let et = energy_i(&trial, m, nl)?.total;
            if et < e_cur && et <= e_cur - cfg.armijo_c * alpha * g2 {
                moved = trial;
                e_new = et;
                step = alpha;
                made_step = true;
                break;
            }
            alpha *= cfg.armijo_shrink;
        }
        stall = if made_step { 0 } else { stall + 1 };

        let diff = DiscreteFunction {
            dom: Arc::clone(dom),
            values: moved
                .values
                .iter()
                .zip(&states[kstar].values)
                .map(|(a, b)| a - b)
                .collect(),
        };
        let delta_norm = norm_mu(&diff, m)?;
        iterations.push(IterationRecord {
            energy: e_cur,
            residual_sup: rs,
            step,
            mp: Some(MpRecord { norm_mu: nmu, atom_powers, pairing, delta_norm }),
        });

        states[kstar] = moved;
        energies[kstar] = e_new;
        final_u = states[kstar].clone();

        // the path deformation is first-order and stagnates once it has
        // localized the saddle to within the path resolution: hand the
        // iterate to a damped Newton polish on the full residual
        if stall >= 5 && newton_tries < 3 {
            newton_tries += 1;
            stall = 0;
            if let Some(u_star) = newton_saddle(&states[kstar], m, nl, cfg, &mut iterations)? {
                termination = Termination::Converged;
                final_u = u_star;
                break;
            }
            if newton_tries == 3 {
                // neither deformation nor Newton can move: report honestly
                break;
            }
        }

        // periodic re-tension: energy-monotone midpoint reparametrization
        if (iter + 1) % cfg.deform_steps == 0 {
            for k in 1..np {
                let mid = DiscreteFunction {
                    dom: Arc::clone(dom),
                    values: states[k - 1]
                        .values
                        .iter()
                        .zip(&states[k + 1].values)
                        .map(|(a, b)| 0.5 * (a + b))
                        .collect(),
                };
                let em = energy_i(&mid, m, nl)?.total;
                if em < energies[k] {
                    states[k] = mid;
                    energies[k] = em;
                }
            }
        }
    }

    Ok(SolverTrace { iterations, termination, final_u })
}

/// Palais-Smale diagnostics recomputed from a mountain-pass trace.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PsReport {
    /// False when the trace carries no mountain-pass records (e.g. a J-run).
    pub applicable: bool,
    pub m_bound: f64,
    pub c_r: f64,
    /// The boundedness inequality holds at every recorded iterate.
    pub bound_holds: bool,
    /// Smallest slack (rhs - lhs) seen along the trace.
    pub worst_slack: f64,
    pub sup_norm_mu: f64,
    /// ||u_{n+1} - u_n||_mu over the last (up to) 10 iterates.
    pub last_deltas: Vec<f64>,
    pub cauchy_decay: bool,
}

pub fn ps_diagnostics(
    trace: &SolverTrace,
    m: &SignedSpectralMeasure,
    nl: &Nonlinearity,
) -> PsReport {
    let records: Vec<(&IterationRecord, &MpRecord)> = trace
        .iterations
        .iter()
        .filter_map(|it| it.mp.as_ref().map(|mp| (it, mp)))
        .collect();
    if records.is_empty() {
        return PsReport {
            applicable: false,
            m_bound: 0.0,
            c_r: 0.0,
            bound_holds: true,
            worst_slack: 0.0,
            sup_norm_mu: 0.0,
            last_deltas: Vec::new(),
            cauchy_decay: true,
        };
    }

    let p_hat = m.p_hat();
    let gp = &nl.params;
    let theta = gp.theta;
    let dom = &trace.final_u.dom;
    let omega_vol = dom.len() as f64 * dom.cell_volume;
    let c_r = if gp.r > 0.0 {
        let d1 = nl.delta_sv12(1.0);
        (p_hat * gp.r.powf(p_hat)
            + gp.q * d1 * gp.r.powf(gp.q)
            + theta * gp.r.powf(p_hat)
            + theta * d1 * gp.r.powf(gp.q))
            * omega_vol
    } else {
        0.0
    };

    // M = observed sup of |I| and of the normalized derivative pairing
    let mut m_bound: f64 = 0.0;
    for (it, mp) in &records {
        m_bound = m_bound.max(it.energy.abs());
        if mp.norm_mu > 0.0 {
            m_bound = m_bound.max((mp.pairing / mp.norm_mu).abs());
        }
    }

    let mut bound_holds = true;
    let mut worst_slack = f64::INFINITY;
    let mut sup_norm_mu: f64 = 0.0;
    for (_, mp) in &records {
        sup_norm_mu = sup_norm_mu.max(mp.norm_mu);
        let lhs: f64 = mp.atom_powers.iter().sum();
        let rhs = (2.0 * p_hat * m_bound * (theta + mp.norm_mu) + 2.0 * p_hat * c_r)
            / (theta - p_hat);
        let slack = rhs - lhs;
        worst_slack = worst_slack.min(slack);
        if slack < -1e-9 * rhs.abs().max(1.0) {
            bound_holds = false;
        }
    }

    let last_deltas: Vec<f64> = records
        .iter()
        .rev()
        .take(10)
        .rev()
        .map(|(_, mp)| mp.delta_norm)
        .collect();
    // steps must be dying out: the final step sits well below the window
    // peak (stalled iterates contribute zero-length steps, which is fine)
    let cauchy_decay = {
        let peak = last_deltas.iter().fold(0.0f64, |a, b| a.max(*b));
        let last = last_deltas.last().copied().unwrap_or(0.0);
        last <= 0.1 * peak + 1e-12
    };

    PsReport {
        applicable: true,
        m_bound,
        c_r,
        bound_holds,
        worst_slack,
        sup_norm_mu,
        last_deltas,
        cauchy_decay,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_domain;
    use crate::measure::SpectralAtom;

    fn atom(s: f64, p: f64, w: f64) -> SpectralAtom {
        SpectralAtom::new(s, p, w).unwrap()
    }

    #[test]
    fn zero_source_minimizer_is_zero() {
        let dom = build_domain(Shape::Interval { a: -1.0, b: 1.0 }, 0.05).unwrap();
        let m = SignedSpectralMeasure::positive(vec![atom(1.0, 2.0, 1.0)], 3).unwrap();
        let src = SourceTerm::new(DiscreteFunction::zero(&dom));
        let cfg = SolverConfig { tol_residual: 1e-10, ..Default::default() };
        let trace = minimize_j(&m, &src, &cfg, None).unwrap();
        assert_eq!(trace.termination, Termination::Converged);
        assert!(trace.final_u.sup_norm() < 1e-9);
        assert!(trace.iterations.last().unwrap().energy.abs() < 1e-12);
    }

    #[test]
    fn descent_is_monotone() {
        let dom = build_domain(Shape::Interval { a: -1.0, b: 1.0 }, 0.05).unwrap();
        let m = SignedSpectralMeasure::positive(vec![atom(1.0, 2.0, 1.0)], 3).unwrap();
        let src = SourceTerm::new(DiscreteFunction::from_fn(&dom, |_| 1.0));
        let cfg = SolverConfig { max_iter: 2_000, tol_residual: 1e-9, ..Default::default() };
        let trace = minimize_j(&m, &src, &cfg, None).unwrap();
        for w in trace.iterations.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-14, "energy increased");
        }
    }

    #[test]
    fn identical_seeds_give_identical_traces() {
        let dom = build_domain(Shape::Interval { a: -1.0, b: 1.0 }, 0.1).unwrap();
        let m = SignedSpectralMeasure::positive(vec![atom(0.6, 1.8, 1.0)], 3).unwrap();
        let src = SourceTerm::new(DiscreteFunction::from_fn(&dom, |x| x[0].cos()));
        let cfg = SolverConfig { max_iter: 200, ..Default::default() };
        let t1 = minimize_j(&m, &src, &cfg, None).unwrap();
        let t2 = minimize_j(&m, &src, &cfg, None).unwrap();
        assert_eq!(t1.final_u.values, t2.final_u.values, "traces must be bit-identical");
        assert_eq!(t1.iterations.len(), t2.iterations.len());
        for (a, b) in t1.iterations.iter().zip(&t2.iterations) {
            assert_eq!(a.energy.to_bits(), b.energy.to_bits());
        }
    }

    #[test]
    fn hypothesis_gate_blocks_bad_measure() {
        let dom = build_domain(Shape::Interval { a: -1.0, b: 1.0 }, 0.1).unwrap();
        let m = SignedSpectralMeasure::positive(vec![atom(0.0, 2.0, 1.0)], 3).unwrap();
        let src = SourceTerm::new(DiscreteFunction::from_fn(&dom, |_| 1.0));
        assert!(matches!(
            minimize_j(&m, &src, &SolverConfig::default(), None),
            Err(FracError::HypothesisViolation(_))
        ));
    }

    #[test]
    fn mountain_pass_rejects_subcritical_violations() {
        let dom = build_domain(Shape::Interval { a: 0.0, b: 1.0 }, 0.05).unwrap();
        let m = SignedSpectralMeasure::positive(vec![atom(1.0, 2.0, 1.0)], 3).unwrap();
        // q = 8 exceeds the critical exponent 6 for (s,p) = (1,2), N = 3
        let nl = Nonlinearity::power_law(8.0).unwrap();
        assert!(matches!(
            mountain_pass(&m, &nl, &SolverConfig::default(), &dom),
            Err(FracError::HypothesisViolation(_))
        ));
    }

    #[test]
    fn mp_geometry_invariants() {
        let dom = build_domain(Shape::Interval { a: 0.0, b: 1.0 }, 0.02).unwrap();
        let m = SignedSpectralMeasure::positive(vec![atom(1.0, 2.0, 1.0)], 3).unwrap();
        let nl = Nonlinearity::power_law(4.0).unwrap();
        let (geo, e_fun) = mp_geometry(&m, &nl, &dom, 0).unwrap();
        assert!(geo.rho > 0.0 && geo.beta > 0.0);
        let e_norm = norm_mu(&e_fun, &m).unwrap();
        assert!(e_norm > geo.rho, "||e|| = {e_norm} <= rho = {}", geo.rho);
        let ie = energy_i(&e_fun, &m, &nl).unwrap().total;
        assert!(ie < geo.beta, "I(e) = {ie} >= beta = {}", geo.beta);

        // sphere of radius rho: I >= 0.9 beta on sampled directions
        let probes = probe_family(&dom, 16, 3);
        for u in &probes {
            let n = norm_mu(u, &m).unwrap();
            let scaled = DiscreteFunction {
                dom: Arc::clone(&dom),
                values: u.values.iter().map(|v| v * geo.rho / n).collect(),
            };
            let i_val = energy_i(&scaled, &m, &nl).unwrap().total;
            assert!(
                i_val >= geo.beta * 0.9,
                "I on the rho-sphere = {i_val} < 0.9 beta = {}",
                0.9 * geo.beta
            );
        }
    }

    #[test]
    fn mountain_pass_finds_positive_critical_value() {
        let dom = build_domain(Shape::Interval { a: 0.0, b: 1.0 }, 0.05).unwrap();
        let m = SignedSpectralMeasure::positive(vec![atom(1.0, 2.0, 1.0)], 3).unwrap();
        let nl = Nonlinearity::power_law(4.0).unwrap();
        let cfg = SolverConfig { max_iter: 50_000, tol_residual: 1e-7, ..Default::default() };
        let trace = mountain_pass(&m, &nl, &cfg, &dom).unwrap();
        assert_eq!(trace.termination, Termination::Converged);
        let i_star = energy_i(&trace.final_u, &m, &nl).unwrap().total;
        assert!(i_star > 0.0, "I(u*) = {i_star}");
        assert!(norm_mu(&trace.final_u, &m).unwrap() > 0.0);

        // level bracketing: the final value sits below the initial path peak
        let first_peak = trace.iterations.first().unwrap().energy;
        assert!(i_star <= first_peak + 1e-12);

        let ps = ps_diagnostics(&trace, &m, &nl);
        assert!(ps.applicable && ps.bound_holds, "{ps:?}");
        assert!(ps.cauchy_decay);
    }

    #[test]
    fn ps_diagnostics_on_trivial_and_wrong_traces() {
        let dom = build_domain(Shape::Interval { a: 0.0, b: 1.0 }, 0.1).unwrap();
        let m = SignedSpectralMeasure::positive(vec![atom(1.0, 2.0, 1.0)], 3).unwrap();
        let nl = Nonlinearity::power_law(4.0).unwrap();
        // J-trace has no MP records: flagged not applicable
        let src = SourceTerm::new(DiscreteFunction::zero(&dom));
        let jt = minimize_j(&m, &src, &SolverConfig::default(), None).unwrap();
        let rep = ps_diagnostics(&jt, &m, &nl);
        assert!(!rep.applicable);

        // single trivial MP record: vacuous pass
        let trivial = SolverTrace {
            iterations: vec![IterationRecord {
                energy: 0.0,
                residual_sup: 0.0,
                step: 0.0,
                mp: Some(MpRecord {
                    norm_mu: 0.0,
                    atom_powers: vec![0.0],
                    pairing: 0.0,
                    delta_norm: 0.0,
                }),
            }],
            termination: Termination::Converged,
            final_u: DiscreteFunction::zero(&dom),
        };
        let rep = ps_diagnostics(&trivial, &m, &nl);
        assert!(rep.applicable && rep.bound_holds && rep.cauchy_decay);
    }

    #[test]
    fn converged_minimizer_has_no_descent_directions() {
        use rand::{Rng, SeedableRng};
        let dom = build_domain(Shape::Interval { a: -1.0, b: 1.0 }, 0.05).unwrap();
        let m = SignedSpectralMeasure::positive(vec![atom(1.0, 2.0, 1.0)], 3).unwrap();
        let src = SourceTerm::new(DiscreteFunction::from_fn(&dom, |_| 1.0));
        let cfg = SolverConfig { tol_residual: 1e-7, ..Default::default() };
        let trace = minimize_j(&m, &src, &cfg, None).unwrap();
        assert_eq!(trace.termination, Termination::Converged);
        let e0 = energy_j(&trace.final_u, &m, &src, cfg.gamma_max).unwrap().total;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let d: Vec<f64> = (0..dom.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dn = d.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
            let probe = axpy(&trace.final_u, 1e-4, &d);
            let e1 = energy_j(&probe, &m, &src, cfg.gamma_max).unwrap().total;
            assert!(
                e1 >= e0 - cfg.tol_residual * dn,
                "found a descent direction at a converged point"
            );
        }
    }
}
