//! Seeded probe families used for every empirical constant in the crate.
//!
//! The family mixes four kinds of functions vanishing on the boundary:
//! deterministic fundamental modes (products of sines), random smooth bumps,
//! random tent functions, and random modulated oscillations. The first four
//! probes are always the first four modes, so eigenfunction-sensitive
//! estimates (e.g. the discrete Poincare constant) are covered regardless of
//! seed; the rest cycle through the random kinds from a ChaCha stream, making
//! every constant reproducible from (domain, count, seed).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use crate::grid::{DiscreteFunction, GridDomain, Shape};

/// Bounding box of the shape restricted to its own dimension.
fn extent(shape: &Shape) -> ([f64; 2], [f64; 2]) {
    match *shape {
        Shape::Interval { a, b } => ([a, 0.0], [b, 1.0]),
        Shape::Box2 { a, b } => (a, b),
        Shape::Ball { center, radius, dim } => {
            let mut lo = [0.0, 0.0];
            let mut hi = [1.0, 1.0];
            for d in 0..dim {
                lo[d] = center[d] - radius;
                hi[d] = center[d] + radius;
            }
            (lo, hi)
        }
    }
}

/// Distance-to-boundary based mode shape for balls, sine products for
/// intervals/boxes; vanishes on the boundary of Omega.
fn mode(dom: &GridDomain, k: usize, x: [f64; 2]) -> f64 {
    match dom.shape {
        Shape::Ball { center, radius, dim } => {
            let mut r2 = 0.0;
            for d in 0..dim {
                r2 += (x[d] - center[d]) * (x[d] - center[d]);
            }
            let t = 1.0 - r2.sqrt() / radius; // 1 at center, 0 on boundary
            (k as f64 * std::f64::consts::PI * t).sin()
        }
        _ => {
            let (lo, hi) = extent(&dom.shape);
            let mut v = 1.0;
            for d in 0..dom.dim {
                let t = (x[d] - lo[d]) / (hi[d] - lo[d]);
                let kd = if d == 0 { k } else { 1 };
                v *= (kd as f64 * std::f64::consts::PI * t).sin();
            }
            v
        }
    }
}

fn bump(center: [f64; 2], width: [f64; 2], power: i32, dim: usize, x: [f64; 2]) -> f64 {
    let mut v = 1.0;
    for d in 0..dim {
        let t = 2.0 * (x[d] - center[d]) / width[d];
        let b = (1.0 - t * t).max(0.0);
        v *= b;
    }
    v.powi(power)
}

fn tent(center: [f64; 2], width: [f64; 2], dim: usize, x: [f64; 2]) -> f64 {
    let mut v = f64::INFINITY;
    for d in 0..dim {
        let t = 1.0 - (2.0 * (x[d] - center[d]) / width[d]).abs();
        v = v.min(t);
    }
    v.max(0.0)
}

/// Generate `count` probes on the domain from the given seed.
pub fn probe_family(dom: &Arc<GridDomain>, count: usize, seed: u64) -> Vec<DiscreteFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = extent(&dom.shape);
    let dim = dom.dim;
    let mut out = Vec::with_capacity(count);

    for idx in 0..count {
        let u = if idx < 4 {
            DiscreteFunction::from_fn(dom, |x| mode(dom, idx + 1, x))
        } else {
            match idx % 3 {
                0 => {
                    // smooth polynomial bump, random center/width/power
                    let mut c = [0.0; 2];
                    let mut w = [1.0; 2];
                    for d in 0..dim {
                        let span = hi[d] - lo[d];
                        c[d] = rng.gen_range(lo[d] + 0.25 * span..hi[d] - 0.25 * span);
                        w[d] = rng.gen_range(0.3 * span..0.9 * span);
                    }
                    let pow = rng.gen_range(1..=3);
                    DiscreteFunction::from_fn(dom, |x| bump(c, w, pow, dim, x))
                }
                1 => {
                    // tent with random apex
                    let mut c = [0.0; 2];
                    let mut w = [1.0; 2];
                    for d in 0..dim {
                        let span = hi[d] - lo[d];
                        c[d] = rng.gen_range(lo[d] + 0.2 * span..hi[d] - 0.2 * span);
                        w[d] = rng.gen_range(0.3 * span..1.0 * span);
                    }
                    DiscreteFunction::from_fn(dom, |x| tent(c, w, dim, x))
                }
                _ => {
                    // oscillation under a bump envelope
                    let mut c = [0.0; 2];
                    let mut w = [1.0; 2];
                    let mut freq = [0.0; 2];
                    for d in 0..dim {
                        let span = hi[d] - lo[d];
                        c[d] = (lo[d] + hi[d]) / 2.0;
                        w[d] = rng.gen_range(0.6 * span..1.0 * span);
                        freq[d] = rng.gen_range(1.0..8.0) * std::f64::consts::PI / span;
                    }
                    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    DiscreteFunction::from_fn(dom, |x| {
                        let mut osc = phase;
                        for d in 0..dim {
                            osc += freq[d] * x[d];
                        }
                        bump(c, w, 1, dim, x) * osc.sin()
                    })
                }
            }
        };
        // guard against a probe that vanishes on every node (e.g. a narrow
        // tent falling between lattice points on a coarse grid)
        let u = if u.sup_norm() < 1e-14 {
            DiscreteFunction::from_fn(dom, |x| mode(dom, 1, x))
        } else {
            u
        };
        out.push(u);
    }
    out
}
