//! Scenario configuration: sectioned TOML with hard errors on unknown keys.
//!
//! Measure presets expand the corollary-style operator superpositions:
//! - `cor1`: (-D)^{s1}_p - alpha (-D)^{s2}_p, linear source
//! - `cor3`: -D_p - sum_k alpha_k (-D)^{s_k}_p, linear source
//! - `cor4`: -D_p - int omega(s) (-D)^s_p ds, linear source
//! - `cor5`: (-D)^{s1}_{p1} + (-D)^{s2}_{p2} (s1 < s2, p2 < p1), nonlinear
//! - `cor6`: atoms sharing one critical exponent (p_k on the hyperbola),
//!   nonlinear

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use fracsup::energy::{Nonlinearity, SourceTerm};
use fracsup::grid::{build_domain, DiscreteFunction, GridDomain, Shape};
use fracsup::measure::{
    hyperbola_p_of_s, NegativePart, SignedSpectralMeasure, SpectralAtom, TabulatedDensity,
};
use fracsup::solver::SolverConfig;

#[derive(Debug)]
pub enum ConfigError {
    Parse(String),
    Validation(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse(m) => write!(f, "parse error: {m}"),
            ConfigError::Validation(m) => write!(f, "validation error: {m}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub domain: DomainSection,
    pub measure: MeasureSection,
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// "interval" | "box" | "ball"
    pub shape: String,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AtomSection {
    pub s: f64,
    pub p: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    pub values: Vec<f64>,
    pub s_max: f64,
    /// (p, weight) columns.
    pub p_atoms: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    #[serde(default = "default_ambient")]
    pub ambient_n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomSection>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_atoms: Option<Vec<AtomSection>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_density: Option<DensitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    // preset parameters
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_const: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crit: Option<f64>,
    /// Override for the empirical gamma bound of the hypothesis gate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_max: Option<f64>,
}

fn default_ambient() -> u32 {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// "linear" | "nonlinear"
    pub kind: String,
    /// Source preset for the linear problem: "one" | "sin" | "const".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_const: Option<f64>,
    /// "powerlaw" | "powerlaw_plus_linear"
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub armijo_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub armijo_shrink: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deform_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
}

/// The fully validated, ready-to-run scenario.
pub struct Scenario {
    pub name: String,
    pub domain: Arc<GridDomain>,
    pub measure: SignedSpectralMeasure,
    pub problem: Problem,
    pub solver: SolverConfig,
    pub gamma_max_override: Option<f64>,
    pub outputs: Option<String>,
}

pub enum Problem {
    LinearSource(SourceTerm),
    Nonlinear(Nonlinearity),
}

pub fn parse_scenario_str(text: &str, h_override: Option<f64>) -> Result<Scenario, ConfigError> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    build_scenario(&file, h_override)
}

fn req<T: Copy>(v: Option<T>, what: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| ConfigError::Validation(format!("missing required field `{what}`")))
}

pub fn build_scenario(
    file: &ScenarioFile,
    h_override: Option<f64>,
) -> Result<Scenario, ConfigError> {
    let d = &file.domain;
    let h = h_override.unwrap_or(d.h);
    if !(h > 0.0) {
        return Err(ConfigError::Validation(format!("grid spacing h = {h} must be positive")));
    }
    let shape = match d.shape.as_str() {
        "interval" => Shape::Interval {
            a: req(d.a, "domain.a")?,
            b: req(d.b, "domain.b")?,
        },
        "box" => Shape::Box2 {
            a: req(d.lower, "domain.lower")?,
            b: req(d.upper, "domain.upper")?,
        },
        "ball" => Shape::Ball {
            center: d.center.unwrap_or([0.0, 0.0]),
            radius: req(d.radius, "domain.radius")?,
            dim: d.dim.unwrap_or(2),
        },
        other => {
            return Err(ConfigError::Validation(format!("unknown domain shape `{other}`")))
        }
    };
    let domain = build_domain(shape, h)
        .map_err(|e| ConfigError::Validation(format!("domain: {e}")))?;

    let measure = expand_measure(&file.measure)?;

    let problem = match file.problem.kind.as_str() {
        "linear" => {
            let g = source_term(&file.problem, &domain)?;
            Problem::LinearSource(g)
        }
        "nonlinear" => Problem::Nonlinear(nonlinearity(&file.problem)?),
        other => {
            return Err(ConfigError::Validation(format!("unknown problem kind `{other}`")))
        }
    };

    let s = &file.solver;
    let def = SolverConfig::default();
    let solver = SolverConfig {
        max_iter: s.max_iter.unwrap_or(def.max_iter),
        tol_residual: s.tol_residual.unwrap_or(def.tol_residual),
        armijo_c: s.armijo_c.unwrap_or(def.armijo_c),
        armijo_shrink: s.armijo_shrink.unwrap_or(def.armijo_shrink),
        initial_step: s.initial_step.unwrap_or(def.initial_step),
        path_points: s.path_points.unwrap_or(def.path_points),
        deform_steps: s.deform_steps.unwrap_or(def.deform_steps),
        rng_seed: s.rng_seed.unwrap_or(def.rng_seed),
        gamma_max: def.gamma_max,
    };

    Ok(Scenario {
        name: file.name.clone(),
        domain,
        measure,
        problem,
        solver,
        gamma_max_override: file.measure.gamma_max,
        outputs: file.outputs.clone(),
    })
}

fn atom(s: f64, p: f64, w: f64) -> Result<SpectralAtom, ConfigError> {
    SpectralAtom::new(s, p, w)
        .map_err(|e| ConfigError::Validation(format!("atom (s={s}, p={p}, weight={w}): {e}")))
}

fn expand_measure(m: &MeasureSection) -> Result<SignedSpectralMeasure, ConfigError> {
    let n = m.ambient_n;
    let (pos, neg): (Vec<SpectralAtom>, Option<NegativePart>) = match m.preset.as_deref() {
        None => {
            let pos = m
                .atoms
                .as_ref()
                .ok_or_else(|| {
                    ConfigError::Validation("measure needs `atoms` or a `preset`".into())
                })?
                .iter()
                .map(|a| atom(a.s, a.p, a.weight))
                .collect::<Result<Vec<_>, _>>()?;
            let neg = if let Some(dens) = &m.negative_density {
                if m.negative_atoms.is_some() {
                    return Err(ConfigError::Validation(
                        "give either `negative_atoms` or `negative_density`, not both".into(),
                    ));
                }
                let omega = TabulatedDensity::new(dens.values.clone(), dens.s_max)
                    .map_err(|e| ConfigError::Validation(format!("negative density: {e}")))?;
                Some(NegativePart::DensityTimesAtoms {
                    omega,
                    p_atoms: dens.p_atoms.iter().map(|pa| (pa[0], pa[1])).collect(),
                })
            } else {
                match &m.negative_atoms {
                    Some(list) => {
                        let atoms = list
                            .iter()
                            .map(|a| atom(a.s, a.p, a.weight))
                            .collect::<Result<Vec<_>, _>>()?;
                        Some(NegativePart::Atoms(atoms))
                    }
                    None => None,
                }
            };
            (pos, neg)
        }
        Some("cor1") => {
            let p = req(m.p, "measure.p")?;
            let s1 = req(m.s1, "measure.s1")?;
            let s2 = req(m.s2, "measure.s2")?;
            let alpha = req(m.alpha, "measure.alpha")?;
            if !(s2 < s1) {
                return Err(ConfigError::Validation(format!(
                    "cor1 needs s2 < s1, got s1 = {s1}, s2 = {s2}"
                )));
            }
            let neg = if alpha > 0.0 {
                Some(NegativePart::Atoms(vec![atom(s2, p, alpha)?]))
            } else {
                None
            };
            (vec![atom(s1, p, 1.0)?], neg)
        }
        Some("cor3") => {
            let p = req(m.p, "measure.p")?;
            let ss = m
                .s_list
                .clone()
                .ok_or_else(|| ConfigError::Validation("cor3 needs `s_list`".into()))?;
            let alphas = m
                .alpha_list
                .clone()
                .ok_or_else(|| ConfigError::Validation("cor3 needs `alpha_list`".into()))?;
            if ss.len() != alphas.len() {
                return Err(ConfigError::Validation(
                    "`s_list` and `alpha_list` must have matching lengths".into(),
                ));
            }
            let neg: Vec<SpectralAtom> = ss
                .iter()
                .zip(&alphas)
                .map(|(&s, &a)| atom(s, p, a))
                .collect::<Result<Vec<_>, _>>()?;
            (vec![atom(1.0, p, 1.0)?], Some(NegativePart::Atoms(neg)))
        }
        Some("cor4") => {
            let p = req(m.p, "measure.p")?;
            let omega = req(m.omega_const, "measure.omega_const")?;
            let s_max = m.s_max.unwrap_or(1.0);
            let dens = TabulatedDensity::new(vec![omega; 33], s_max)
                .map_err(|e| ConfigError::Validation(format!("cor4 density: {e}")))?;
            (
                vec![atom(1.0, p, 1.0)?],
                Some(NegativePart::DensityTimesAtoms { omega: dens, p_atoms: vec![(p, 1.0)] }),
            )
        }
        Some("cor5") => {
            let s1 = req(m.s1, "measure.s1")?;
            let s2 = req(m.s2, "measure.s2")?;
            let p1 = req(m.p1, "measure.p1")?;
            let p2 = req(m.p2, "measure.p2")?;
            if !(s1 < s2 && p2 < p1) {
                return Err(ConfigError::Validation(format!(
                    "cor5 needs s1 < s2 and p2 < p1, got ({s1}, {p1}) and ({s2}, {p2})"
                )));
            }
            (vec![atom(s1, p1, 1.0)?, atom(s2, p2, 1.0)?], None)
        }
        Some("cor6") => {
            let c = req(m.crit, "measure.crit")?;
            let ss = m
                .s_list
                .clone()
                .ok_or_else(|| ConfigError::Validation("cor6 needs `s_list`".into()))?;
            let pos: Vec<SpectralAtom> = ss
                .iter()
                .map(|&s| atom(s, hyperbola_p_of_s(c, n, s), 1.0))
                .collect::<Result<Vec<_>, _>>()?;
            (pos, None)
        }
        Some(other) => {
            return Err(ConfigError::Validation(format!("unknown measure preset `{other}`")))
        }
    };
    SignedSpectralMeasure::new(pos, neg, n)
        .map_err(|e| ConfigError::Validation(format!("measure: {e}")))
}

fn source_term(
    p: &ProblemSection,
    dom: &Arc<GridDomain>,
) -> Result<SourceTerm, ConfigError> {
    let kind = p.g.as_deref().unwrap_or("one");
    let g = match kind {
        "one" => DiscreteFunction::from_fn(dom, |_| 1.0),
        "const" => {
            let c = req(p.g_const, "problem.g_const")?;
            DiscreteFunction::from_fn(dom, |_| c)
        }
        "sin" => DiscreteFunction::from_fn(dom, |x| {
            (std::f64::consts::PI * x[0]).sin()
                * if dom.dim > 1 { (std::f64::consts::PI * x[1]).sin() } else { 1.0 }
        }),
        other => {
            return Err(ConfigError::Validation(format!("unknown source preset `{other}`")))
        }
    };
    Ok(SourceTerm::new(g))
}

fn nonlinearity(p: &ProblemSection) -> Result<Nonlinearity, ConfigError> {
    let kind = p.nonlinearity.as_deref().unwrap_or("powerlaw");
    let q = req(p.q, "problem.q")?;
    match kind {
        "powerlaw" => Nonlinearity::power_law(q)
            .map_err(|e| ConfigError::Validation(format!("nonlinearity: {e}"))),
        "powerlaw_plus_linear" => {
            let lambda = req(p.lambda, "problem.lambda")?;
            Nonlinearity::power_law_plus_linear(q, lambda)
                .map_err(|e| ConfigError::Validation(format!("nonlinearity: {e}")))
        }
        other => Err(ConfigError::Validation(format!("unknown nonlinearity `{other}`"))),
    }
}
