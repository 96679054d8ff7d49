//! The signed spectral measure mu = mu+ - mu- on the parameter strip
//! Sigma = [0,1] x (1,N), its structural hypotheses, and derived exponents.
//!
//! The ambient dimension N stored here is the dimension in which the
//! hypotheses (p < N, critical exponents) are read; it may exceed the grid
//! dimension used for quadrature, since the analytic theory is
//! dimension-generic while the O(M^2) kernel sums are only tractable for
//! 1-D/2-D grids.

use crate::error::{FracError, Result};

/// A weighted Dirac atom at (s, p).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpectralAtom {
    pub s: f64,
    pub p: f64,
    pub weight: f64,
}

impl SpectralAtom {
    pub fn new(s: f64, p: f64, weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) {
            return Err(FracError::OutOfRange(format!("atom s = {s} outside [0,1]")));
        }
        if !(p > 1.0) {
            return Err(FracError::OutOfRange(format!("atom p = {p} must exceed 1")));
        }
        if !(weight > 0.0) {
            return Err(FracError::OutOfRange(format!("atom weight = {weight} must be positive")));
        }
        Ok(Self { s, p, weight })
    }
}

/// A density in s, tabulated on a uniform grid over [0, s_max].
///
/// Trapezoid quadrature is used throughout; the paper allows any measurable
/// density, and tabulation is the minimal faithful representation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TabulatedDensity {
    /// omega sampled at s_k = k * s_max / (len-1), k = 0..len-1.
    pub values: Vec<f64>,
    pub s_max: f64,
}

impl TabulatedDensity {
    pub fn new(values: Vec<f64>, s_max: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(FracError::OutOfRange("density needs at least 2 samples".into()));
        }
        if !(s_max > 0.0 && s_max <= 1.0) {
            return Err(FracError::OutOfRange(format!("density s_max = {s_max} outside (0,1]")));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FracError::OutOfRange("density values must be finite and >= 0".into()));
        }
        Ok(Self { values, s_max })
    }

    pub fn grid_points(&self) -> Vec<f64> {
        let n = self.values.len();
        (0..n)
            .map(|k| self.s_max * k as f64 / (n - 1) as f64)
            .collect()
    }

    /// Trapezoid weights matching `grid_points`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.values.len();
        let ds = self.s_max / (n - 1) as f64;
        (0..n)
            .map(|k| if k == 0 || k == n - 1 { 0.5 * ds } else { ds })
            .collect()
    }

    /// int_0^{s_max} omega(s) ds by trapezoid rule.
    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .zip(self.trapezoid_weights())
            .map(|(v, w)| v * w)
            .sum()
    }
}

/// The negative part mu-: either explicit atoms or a product density x atoms
/// in p, mirroring the product structure mu_s- x mu_p of the hypotheses.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum NegativePart {
    Atoms(Vec<SpectralAtom>),
    DensityTimesAtoms {
        omega: TabulatedDensity,
        /// (p, weight) columns; p-support must match positive atoms.
        p_atoms: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SignedSpectralMeasure {
    pub positive_atoms: Vec<SpectralAtom>,
    pub negative: Option<NegativePart>,
    /// Ambient dimension N of the strip Sigma = [0,1] x (1,N).
    pub ambient_n: u32,
}

/// One line of the hypothesis report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HypothesisItem {
    pub id: String,
    pub description: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct HypothesisReport {
    pub items: Vec<HypothesisItem>,
    pub gamma: f64,
    pub gamma_max: f64,
    pub all_pass: bool,
}

impl SignedSpectralMeasure {
    /// Construct with only basic sanity validation. Structural hypotheses are
    /// deliberately *not* enforced here: `check_hypotheses` reports on them,
    /// and tests need to build violating measures.
    pub fn new(
        positive_atoms: Vec<SpectralAtom>,
        negative: Option<NegativePart>,
        ambient_n: u32,
    ) -> Result<Self> {
        if positive_atoms.is_empty() {
            return Err(FracError::OutOfRange("measure needs at least one positive atom".into()));
        }
        if ambient_n < 1 {
            return Err(FracError::OutOfRange("ambient dimension must be >= 1".into()));
        }
        Ok(Self { positive_atoms, negative, ambient_n })
    }

    /// Convenience: a purely positive measure.
    pub fn positive(atoms: Vec<SpectralAtom>, ambient_n: u32) -> Result<Self> {
        Self::new(atoms, None, ambient_n)
    }

    /// s_bar = max s over positive atoms.
    pub fn s_bar(&self) -> f64 {
        self.positive_atoms
            .iter()
            .map(|a| a.s)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// p_hat = max p over positive atoms.
    pub fn p_hat(&self) -> f64 {
        self.positive_atoms
            .iter()
            .map(|a| a.p)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Hoelder conjugate of p_hat.
    pub fn p_hat_conjugate(&self) -> f64 {
        let p = self.p_hat();
        p / (p - 1.0)
    }

    /// Negative (s, p, weight) triples after discretizing any density by
    /// trapezoid rule, ready for quadrature over mu-.
    pub fn negative_quadrature(&self) -> Vec<SpectralAtom> {
        match &self.negative {
            None => Vec::new(),
            Some(NegativePart::Atoms(atoms)) => atoms.clone(),
            Some(NegativePart::DensityTimesAtoms { omega, p_atoms }) => {
                let ss = omega.grid_points();
                let ws = omega.trapezoid_weights();
                let mut out = Vec::new();
                // the density lives on the half-open [0, s_max): the final
                // trapezoid node represents the limit from the left, so it
                // is nudged strictly inside the interval
                let last = ss.len() - 1;
                let ds = omega.s_max / last as f64;
                for &(p, pw) in p_atoms {
                    for (k, ((&s, &w), &ov)) in ss.iter().zip(&ws).zip(&omega.values).enumerate() {
                        let weight = pw * w * ov;
                        let s = if k == last { s - 1e-9 * ds } else { s };
                        if weight > 0.0 {
                            out.push(SpectralAtom { s, p, weight });
                        }
                    }
                }
                out
            }
        }
    }

    /// gamma = mu_s-([0, s_bar)) / mu_s+([s_bar, 1]), a ratio of s-marginal
    /// masses (degree-0 homogeneous under simultaneous weight scaling).
    /// Returns 0 when mu- is absent. Mass of mu- sitting at s >= s_bar is
    /// excluded here; hypothesis (1.7) separately flags it.
    pub fn gamma_ratio(&self) -> f64 {
        let neg = self.negative_quadrature();
        if neg.is_empty() {
            return 0.0;
        }
        let sbar = self.s_bar();
        let num: f64 = neg
            .iter()
            .filter(|a| a.s < sbar)
            .map(|a| a.weight)
            .sum();
        let den: f64 = self
            .positive_atoms
            .iter()
            .filter(|a| a.s >= sbar)
            .map(|a| a.weight)
            .sum();
        num / den
    }

    /// Structured pass/fail for each hypothesis on the measure, including the
    /// empirical gamma bound (gamma <= gamma_max).
    pub fn check_hypotheses(&self, gamma_max: f64) -> HypothesisReport {
        let n = self.ambient_n as f64;
        let sbar = self.s_bar();
        let gamma = self.gamma_ratio();
        let neg = self.negative_quadrature();
        let mut items = Vec::new();

        // positive mass at some s_bar in (0, 1]
        items.push(HypothesisItem {
            id: "(1.2)".into(),
            description: "mu+ charges [s_bar,1] x (1,N) for some s_bar in (0,1]".into(),
            pass: sbar > 0.0,
            detail: format!("s_bar = {sbar}"),
        });

        // negative s-support strictly below s_bar
        let bad_s: Vec<f64> = neg.iter().filter(|a| a.s >= sbar).map(|a| a.s).collect();
        items.push(HypothesisItem {
            id: "(1.7)".into(),
            description: "mu_s-([s_bar, 1]) = 0 (negative s-support below s_bar)".into(),
            pass: bad_s.is_empty(),
            detail: if bad_s.is_empty() {
                "ok".into()
            } else {
                format!("negative mass at s = {bad_s:?} >= s_bar = {sbar}")
            },
        });

        // product structure: negative p-support inside positive p-support
        let pos_ps: Vec<f64> = self.positive_atoms.iter().map(|a| a.p).collect();
        let orphan: Vec<f64> = neg
            .iter()
            .map(|a| a.p)
            .filter(|p| !pos_ps.iter().any(|q| (q - p).abs() < 1e-12))
            .collect();
        items.push(HypothesisItem {
            id: "(1.8)".into(),
            description: "product structure: negative p-support within positive p-support".into(),
            pass: orphan.is_empty(),
            detail: if orphan.is_empty() {
                "ok".into()
            } else {
                format!("negative mass at p = {orphan:?} with no positive column")
            },
        });

        // gamma against the configured bound
        items.push(HypothesisItem {
            id: "(1.10)".into(),
            description: "mu_s-([0,s_bar)) <= gamma * mu_s+([s_bar,1]) with gamma <= gamma_max".into(),
            pass: gamma <= gamma_max,
            detail: format!("gamma = {gamma}, gamma_max = {gamma_max} (empirical bound)"),
        });

        // p-support inside [1 + delta, N - eta]
        let mut all_ps = pos_ps.clone();
        all_ps.extend(neg.iter().map(|a| a.p));
        let pmin = all_ps.iter().copied().fold(f64::INFINITY, f64::min);
        let pmax = all_ps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pass_p = pmin > 1.0 && pmax < n;
        items.push(HypothesisItem {
            id: "(1.11)".into(),
            description: "supp(mu_p) inside [1+delta, N-eta] strictly".into(),
            pass: pass_p,
            detail: format!(
                "p in [{pmin}, {pmax}], N = {n}, delta = {}, eta = {}",
                pmin - 1.0,
                n - pmax
            ),
        });

        // s-range sanity on all atoms
        let pass_s = self
            .positive_atoms
            .iter()
            .chain(neg.iter())
            .all(|a| (0.0..=1.0).contains(&a.s));
        items.push(HypothesisItem {
            id: "(s-range)".into(),
            description: "all s-support within [0,1]".into(),
            pass: pass_s,
            detail: "support of mu must live on Sigma".into(),
        });

        let all_pass = items.iter().all(|i| i.pass);
        HypothesisReport { items, gamma, gamma_max, all_pass }
    }

    /// The atom maximizing the critical exponent; ties broken by larger s,
    /// then larger p.
    pub fn sharp_pair(&self) -> Result<(f64, f64, f64)> {
        let n = self.ambient_n;
        let mut best: Option<(f64, f64, f64)> = None;
        for a in &self.positive_atoms {
            let e = critical_exponent(a.s, a.p, n)?;
            let better = match best {
                None => true,
                Some((bs, bp, be)) => {
                    e > be + 1e-14
                        || ((e - be).abs() <= 1e-14
                            && (a.s > bs || (a.s == bs && a.p > bp)))
                }
            };
            if better {
                best = Some((a.s, a.p, e));
            }
        }
        Ok(best.expect("positive_atoms nonempty by construction"))
    }
}

/// Sobolev critical exponent N p / (N - s p).
pub fn critical_exponent(s: f64, p: f64, n: u32) -> Result<f64> {
    let nf = n as f64;
    let den = nf - s * p;
    if den <= 0.0 {
        return Err(FracError::DegenerateExponent(den));
    }
    Ok(nf * p / den)
}

/// The constant-critical-exponent hyperbola p(s) = C N / (N + C s).
///
/// Round trip: critical_exponent(s, hyperbola_p_of_s(C,N,s), N) = C.
pub fn hyperbola_p_of_s(c: f64, n: u32, s: f64) -> f64 {
    let nf = n as f64;
    c * nf / (nf + c * s)
}
