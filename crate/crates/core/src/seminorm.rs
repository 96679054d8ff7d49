//! The three-regime seminorm [u]_{s,p}, its kernel-normalizing constant
//! c_{N,s,p}, the superposition norm ||u||_mu, and empirical comparison
//! constants.
//!
//! Gagliardo quadrature (0 < s < 1) splits the double integral over R^{2N}
//! into three pieces, all assembled in *unordered* form (the ordered integral
//! divided by two, which is what makes the s -> 0 and s -> 1 limits land on
//! the Lp and gradient-Lp branches):
//!
//!   S = sum_{i<j} |u_i - u_j|^p |x_i - x_j|^{-N-sp} h^{2N}      (far field)
//!     + sum_i |u_i|^p K_tail(x_i) h^N                            (exterior)
//!     + (1/2) A(N,p) h^{p(1-s)}/(p(1-s)) sum_i |grad u_i|^p h^N  (near field)
//!
//! and [u]_{s,p}^p = c_{N,s,p} * S. The exterior kernel mass
//! K_tail(x) = int_{R^N \ Omega} |x-y|^{-N-sp} dy is exact in 1-D and an
//! adaptive angular quadrature of the star-shaped ray distance in 2-D. The
//! near-field term integrates the kernel against the first-order Taylor
//! expansion of u over |x-y| < h; without it the quadrature loses the
//! fraction h^{p(1-s)} of the energy concentrated near the diagonal, which is
//! catastrophic as s -> 1.

use rayon::prelude::*;

use crate::error::{FracError, Result};
use crate::grid::{DiscreteFunction, GridDomain, Shape};
use crate::measure::SignedSpectralMeasure;
use crate::special::{angular_moment, gamma};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SeminormRegime {
    Lp,
    Gagliardo,
    Gradient,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SeminormValue {
    pub s: f64,
    pub p: f64,
    pub value: f64,
    pub regime: SeminormRegime,
}

/// c_{N,s,p} = s 4^s Gamma((ps + p + N - 2)/2) / (pi^{N/2} Gamma(1-s)).
pub fn normalizing_constant(n: u32, s: f64, p: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(FracError::OutOfRange(format!(
            "normalizing constant defined for s in (0,1), got {s}"
        )));
    }
    if !(p > 1.0) || n < 1 {
        return Err(FracError::OutOfRange(format!("need p > 1 and N >= 1, got p={p}, N={n}")));
    }
    let nf = n as f64;
    Ok(s * (2.0f64).powf(2.0 * s) * gamma((p * s + p + nf - 2.0) / 2.0)
        / (std::f64::consts::PI.powf(nf / 2.0) * gamma(1.0 - s)))
}

/// Exterior kernel mass int_{R^N \ Omega} |x-y|^{-N-sp} dy for x in Omega.
///
/// 1-D: closed form from the two boundary distances. 2-D: Omega is
/// star-shaped with respect to any interior point, so in polar coordinates
/// the integral is (1/sp) int_0^{2pi} R(theta)^{-sp} d theta with R the ray
/// exit distance, integrated by panel-doubling Simpson (piecewise between
/// box corner directions where R has kinks).
pub fn tail_kernel(shape: &Shape, x: [f64; 2], sp: f64) -> f64 {
    assert!(sp > 0.0, "tail kernel needs s*p > 0");
    match *shape {
        Shape::Interval { a, b } => ((x[0] - a).powf(-sp) + (b - x[0]).powf(-sp)) / sp,
        Shape::Ball { center, radius, dim: 1 } => {
            let (a, b) = (center[0] - radius, center[0] + radius);
            ((x[0] - a).powf(-sp) + (b - x[0]).powf(-sp)) / sp
        }
        Shape::Ball { center, radius, dim: 2 } => {
            let d = [x[0] - center[0], x[1] - center[1]];
            let exit = |theta: f64| -> f64 {
                let u = [theta.cos(), theta.sin()];
                let du = d[0] * u[0] + d[1] * u[1];
                let dd = d[0] * d[0] + d[1] * d[1];
                -du + (du * du + radius * radius - dd).sqrt()
            };
            simpson_doubling(0.0, 2.0 * std::f64::consts::PI, &|t| exit(t).powf(-sp)) / sp
        }
        Shape::Box2 { a, b } => {
            let exit = |theta: f64| -> f64 {
                let (c, s) = (theta.cos(), theta.sin());
                let tx = if c > 1e-300 {
                    (b[0] - x[0]) / c
                } else if c < -1e-300 {
                    (a[0] - x[0]) / c
                } else {
                    f64::INFINITY
                };
                let ty = if s > 1e-300 {
                    (b[1] - x[1]) / s
                } else if s < -1e-300 {
                    (a[1] - x[1]) / s
                } else {
                    f64::INFINITY
                };
                tx.min(ty)
            };
            // split at the corner directions, where R(theta) has kinks
            let mut angles: Vec<f64> = [[a[0], a[1]], [a[0], b[1]], [b[0], a[1]], [b[0], b[1]]]
                .iter()
                .map(|c| (c[1] - x[1]).atan2(c[0] - x[0]))
                .collect();
            angles.sort_by(f64::total_cmp);
            let mut total = 0.0;
            for k in 0..4 {
                let t0 = angles[k];
                let t1 = if k == 3 {
                    angles[0] + 2.0 * std::f64::consts::PI
                } else {
                    angles[k + 1]
                };
                if t1 - t0 > 1e-14 {
                    total += simpson_doubling(t0, t1, &|t| exit(t).powf(-sp));
                }
            }
            total / sp
        }
        Shape::Ball { dim, .. } => panic!("tail kernel: unsupported ball dimension {dim}"),
    }
}

/// Composite Simpson with panel doubling until 1e-10 relative stability.
fn simpson_doubling(a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    let mut n = 32usize;
    let mut prev = simpson(a, b, n, f);
    loop {
        n *= 2;
        let cur = simpson(a, b, n, f);
        if (cur - prev).abs() <= 1e-10 * cur.abs().max(1e-300) || n >= 1 << 14 {
            return cur;
        }
        prev = cur;
    }
}

fn simpson(a: f64, b: f64, n: usize, f: &dyn Fn(f64) -> f64) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// |grad u|^2 at a node from forward differences (ghost value 0 outside the
/// node set), used by the near-field correction.
fn node_grad_sq(u: &DiscreteFunction, i: usize) -> f64 {
    let dom = &u.dom;
    let k = dom.lattice_index(i);
    let mut g2 = 0.0;
    for d in 0..dom.dim {
        let kn = if d == 0 { (k.0 + 1, k.1) } else { (k.0, k.1 + 1) };
        let f = dom.node_at_lattice(kn).map_or(0.0, |j| u.values[j]);
        let g = (f - u.values[i]) / dom.h;
        g2 += g * g;
    }
    g2
}

/// The three pieces of the Gagliardo sum S (before multiplying by c_{N,s,p}).
#[derive(Debug, Clone, Copy)]
pub struct GagliardoParts {
    pub pair: f64,
    pub tail: f64,
    pub near: f64,
}

impl GagliardoParts {
    pub fn total(&self) -> f64 {
        self.pair + self.tail + self.near
    }
}

/// Near-field coefficient A(N,p) h^{p(1-s)} / (p(1-s)), already halved for
/// the unordered convention.
pub fn near_field_coefficient(dom: &GridDomain, s: f64, p: f64) -> f64 {
    0.5 * angular_moment(dom.dim, p) * dom.h.powf(p * (1.0 - s)) / (p * (1.0 - s))
}

/// On 1-D grids the nodes are consecutive lattice points, so pair distances
/// take only O(M) distinct values (k*h). Precomputing the kernel values
/// turns the O(M^2) powf calls of the pair loop into table lookups, which
/// matters inside solver iterations. Returns None for 2-D grids or
/// non-contiguous lattices.
pub(crate) fn kernel_table_1d(dom: &GridDomain, sp: f64) -> Option<Vec<f64>> {
    if dom.dim != 1 {
        return None;
    }
    let m = dom.len();
    for i in 1..m {
        if dom.lattice_index(i).0 != dom.lattice_index(i - 1).0 + 1 {
            return None;
        }
    }
    let exp = -(1.0 + sp);
    Some(
        (0..m)
            .map(|k| if k == 0 { 0.0 } else { (k as f64 * dom.h).powf(exp) })
            .collect(),
    )
}

/// |t|^p with a fast path for p = 2.
#[inline]
pub(crate) fn abs_pow(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        t * t
    } else {
        t.abs().powf(p)
    }
}

/// Assemble the Gagliardo sum S for given (s, p). Deterministic regardless of
/// thread count: the parallel pass produces ordered per-row sums which are
/// reduced serially, so parallel and serial results are bit-identical.
pub fn gagliardo_sum(u: &DiscreteFunction, s: f64, p: f64, parallel: bool) -> Result<GagliardoParts> {
    let dom = &u.dom;
    let n = dom.dim;
    let sp = s * p;
    let hn = dom.cell_volume;
    let kernel_exp = -(n as f64 + sp);
    let min_dist = 1e-9 * dom.h;

    let table = kernel_table_1d(dom, sp);
    let row = |i: usize| -> Result<f64> {
        let xi = dom.nodes[i];
        let ui = u.values[i];
        let mut acc = 0.0;
        for j in (i + 1)..dom.len() {
            let du = ui - u.values[j];
            let k = match &table {
                Some(t) => t[j - i],
                None => {
                    let xj = dom.nodes[j];
                    let dx = xi[0] - xj[0];
                    let dy = xi[1] - xj[1];
                    let dist = (dx * dx + dy * dy).sqrt();
                    if dist < min_dist {
                        return Err(FracError::SingularPair(i, j));
                    }
                    dist.powf(kernel_exp)
                }
            };
            if du != 0.0 {
                acc += abs_pow(du, p) * k;
            }
        }
        Ok(acc * hn * hn)
    };

    let rows: Vec<Result<f64>> = if parallel {
        (0..dom.len()).into_par_iter().map(row).collect()
    } else {
        (0..dom.len()).map(row).collect()
    };
    let mut pair = 0.0;
    for r in rows {
        pair += r?;
    }

    let tails: Vec<f64> = if parallel {
        (0..dom.len())
            .into_par_iter()
            .map(|i| {
                let ui = u.values[i].abs();
                if ui == 0.0 {
                    0.0
                } else {
                    ui.powf(p) * tail_kernel(&dom.shape, dom.nodes[i], sp)
                }
            })
            .collect()
    } else {
        (0..dom.len())
            .map(|i| {
                let ui = u.values[i].abs();
                if ui == 0.0 {
                    0.0
                } else {
                    ui.powf(p) * tail_kernel(&dom.shape, dom.nodes[i], sp)
                }
            })
            .collect()
    };
    let tail: f64 = tails.iter().sum::<f64>() * hn;

    let ca = near_field_coefficient(dom, s, p);
    let mut near = 0.0;
    for i in 0..dom.len() {
        let g2 = node_grad_sq(u, i);
        if g2 > 0.0 {
            near += g2.powf(p / 2.0);
        }
    }
    near *= ca * hn;

    Ok(GagliardoParts { pair, tail, near })
}

/// The seminorm [u]_{s,p} in its three regimes.
pub fn seminorm(u: &DiscreteFunction, s: f64, p: f64) -> Result<SeminormValue> {
    seminorm_impl(u, s, p, true)
}

/// Serial evaluation, exposed so tests can compare against the parallel path.
pub fn seminorm_serial(u: &DiscreteFunction, s: f64, p: f64) -> Result<SeminormValue> {
    seminorm_impl(u, s, p, false)
}

fn seminorm_impl(u: &DiscreteFunction, s: f64, p: f64, parallel: bool) -> Result<SeminormValue> {
    if !(0.0..=1.0).contains(&s) {
        return Err(FracError::OutOfRange(format!("seminorm s = {s} outside [0,1]")));
    }
    if s == 0.0 {
        if !(p >= 1.0) {
            return Err(FracError::OutOfRange(format!("Lp regime needs p >= 1, got {p}")));
        }
        return Ok(SeminormValue { s, p, value: u.lp_norm(p), regime: SeminormRegime::Lp });
    }
    if !(p > 1.0) {
        return Err(FracError::OutOfRange(format!("seminorm needs p > 1 for s > 0, got {p}")));
    }
    if s == 1.0 {
        return Ok(SeminormValue {
            s,
            p,
            value: u.gradient_lp_norm(p),
            regime: SeminormRegime::Gradient,
        });
    }
    let c = normalizing_constant(u.dom.dim as u32, s, p)?;
    let parts = gagliardo_sum(u, s, p, parallel)?;
    Ok(SeminormValue {
        s,
        p,
        value: (c * parts.total()).powf(1.0 / p),
        regime: SeminormRegime::Gagliardo,
    })
}

/// ||u||_mu = sum over positive atoms of weight * [u]_{s,p}. The negative
/// part never enters the norm: the function space is defined by mu+ alone.
pub fn norm_mu(u: &DiscreteFunction, m: &SignedSpectralMeasure) -> Result<f64> {
    let mut acc = 0.0;
    for a in &m.positive_atoms {
        acc += a.weight * seminorm(u, a.s, a.p)?.value;
    }
    Ok(acc)
}

/// Empirical comparison constant sup [u]_{s,p} / [u]_{S,p} over a probe
/// family (a lower bound for the constant of the seminorm comparison
/// theorem; the true constant is non-constructive).
pub fn estimate_comparison_constant(
    s: f64,
    s_cap: f64,
    p: f64,
    probes: &[DiscreteFunction],
) -> Result<f64> {
    if !(0.0 <= s && s <= s_cap && s_cap <= 1.0) {
        return Err(FracError::OutOfRange(format!(
            "comparison constant needs 0 <= s <= S <= 1, got s={s}, S={s_cap}"
        )));
    }
    let mut best: f64 = 0.0;
    for u in probes {
        let hi = seminorm(u, s_cap, p)?.value;
        if hi <= 0.0 {
            return Err(FracError::DegenerateProbe);
        }
        best = best.max(seminorm(u, s, p)?.value / hi);
    }
    Ok(best)
}

/// Empirical embedding constant sup ||u||_{L^r} / ||u||_mu over a probe
/// family, used to instantiate the mountain-pass geometry constants.
pub fn estimate_embedding_constant(
    r: f64,
    m: &SignedSpectralMeasure,
    probes: &[DiscreteFunction],
) -> Result<f64> {
    let mut best: f64 = 0.0;
    for u in probes {
        let den = norm_mu(u, m)?;
        if den <= 0.0 {
            return Err(FracError::DegenerateProbe);
        }
        best = best.max(u.lp_norm(r) / den);
    }
    Ok(best)
}
