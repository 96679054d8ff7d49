//! Uniform lattice discretization of a bounded domain Omega in R^N (N = 1, 2)
//! and nodal functions extended by zero outside Omega.
//!
//! Nodes are the lattice points k*h strictly inside Omega, ordered
//! lexicographically by coordinates. A `DiscreteFunction` stores one value per
//! interior node; any point outside the node set is treated as 0, which is the
//! discrete form of the exterior Dirichlet condition u = 0 in R^N \ Omega.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{FracError, Result};

/// Shape of the continuous domain Omega.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Shape {
    /// Open interval (a, b) in R.
    Interval { a: f64, b: f64 },
    /// Open axis-aligned box (a1,b1) x (a2,b2) in R^2.
    Box2 { a: [f64; 2], b: [f64; 2] },
    /// Open ball of given center and radius; `dim` is 1 or 2.
    Ball {
        center: [f64; 2],
        radius: f64,
        dim: usize,
    },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Interval { .. } => 1,
            Shape::Box2 { .. } => 2,
            Shape::Ball { dim, .. } => *dim,
        }
    }

    /// Strict interior test with a small safety margin: points within `tol`
    /// of the boundary count as boundary and are excluded. This keeps node
    /// selection deterministic when k*h lands on the boundary up to float
    /// rounding.
    pub fn contains_strict(&self, x: [f64; 2], tol: f64) -> bool {
        match *self {
            Shape::Interval { a, b } => x[0] > a + tol && x[0] < b - tol,
            Shape::Box2 { a, b } => {
                (0..2).all(|d| x[d] > a[d] + tol && x[d] < b[d] - tol)
            }
            Shape::Ball { center, radius, dim } => {
                let mut r2 = 0.0;
                for d in 0..dim {
                    r2 += (x[d] - center[d]) * (x[d] - center[d]);
                }
                r2.sqrt() < radius - tol
            }
        }
    }

    /// Axis-aligned bounding box of the shape.
    fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            Shape::Interval { a, b } => ([a, 0.0], [b, 0.0]),
            Shape::Box2 { a, b } => (a, b),
            Shape::Ball { center, radius, dim } => {
                let mut lo = [0.0; 2];
                let mut hi = [0.0; 2];
                for d in 0..dim {
                    lo[d] = center[d] - radius;
                    hi[d] = center[d] + radius;
                }
                (lo, hi)
            }
        }
    }
}

/// Per-site stencil data for forward-difference gradients.
///
/// The gradient is sampled on the extended site set: every lattice site that
/// either is a node or has a node as forward neighbor in some axis. With the
/// zero extension this makes the discrete Dirichlet energy see every edge
/// touching the node set exactly once, so for p = 2, s = 1 the energy gradient
/// is the classical 3-point (5-point in 2-D) stiffness operator.
#[derive(Debug, Clone, Copy)]
pub struct GradSite {
    /// Node index of the site itself, if the site is a node.
    pub own: Option<usize>,
    /// Node index of site + h*e_d, if that lattice point is a node.
    pub fwd: [Option<usize>; 2],
}

#[derive(Debug)]
pub struct GridDomain {
    pub dim: usize,
    pub shape: Shape,
    pub h: f64,
    /// Interior nodes, lexicographic by coordinates; second coordinate is 0
    /// for 1-D domains.
    pub nodes: Vec<[f64; 2]>,
    pub cell_volume: f64,
    /// Lattice index (k1, k2) of each node: node = (k1*h, k2*h).
    lattice: Vec<(i64, i64)>,
    node_of_lattice: HashMap<(i64, i64), usize>,
    grad_sites: Vec<GradSite>,
}

impl GridDomain {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn lattice_index(&self, i: usize) -> (i64, i64) {
        self.lattice[i]
    }

    pub fn node_at_lattice(&self, k: (i64, i64)) -> Option<usize> {
        self.node_of_lattice.get(&k).copied()
    }

    /// Sites of the forward-difference gradient stencil.
    pub fn grad_sites(&self) -> &[GradSite] {
        &self.grad_sites
    }
}

/// Enumerate the interior lattice nodes of a shape at spacing h.
///
/// Fails with `EmptyDomain` when fewer than two interior lattice points fit.
pub fn build_domain(shape: Shape, h: f64) -> Result<Arc<GridDomain>> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(FracError::OutOfRange(format!("grid spacing h = {h} must be positive")));
    }
    let dim = shape.dim();
    let (lo, hi) = shape.bounding_box();
    let tol = 1e-9 * h;

    let range = |d: usize| -> std::ops::RangeInclusive<i64> {
        if d >= dim {
            0..=0
        } else {
            ((lo[d] / h).floor() as i64 - 1)..=((hi[d] / h).ceil() as i64 + 1)
        }
    };

    let mut nodes = Vec::new();
    let mut lattice = Vec::new();
    for k1 in range(0) {
        for k2 in range(1) {
            let x = [k1 as f64 * h, k2 as f64 * h];
            if shape.contains_strict(x, tol) {
                nodes.push(x);
                lattice.push((k1, k2));
            }
        }
    }
    if nodes.len() < 2 {
        return Err(FracError::EmptyDomain);
    }

    let node_of_lattice: HashMap<(i64, i64), usize> =
        lattice.iter().copied().enumerate().map(|(i, k)| (k, i)).collect();

    // Extended gradient site set: nodes plus backward ghost neighbors.
    let mut site_keys: Vec<(i64, i64)> = Vec::new();
    let mut seen: HashMap<(i64, i64), ()> = HashMap::new();
    for &k in &lattice {
        let mut candidates = vec![k];
        candidates.push((k.0 - 1, k.1));
        if dim == 2 {
            candidates.push((k.0, k.1 - 1));
        }
        for c in candidates {
            if seen.insert(c, ()).is_none() {
                site_keys.push(c);
            }
        }
    }
    site_keys.sort_unstable();
    let grad_sites = site_keys
        .iter()
        .map(|&k| {
            let mut fwd = [None, None];
            fwd[0] = node_of_lattice.get(&(k.0 + 1, k.1)).copied();
            if dim == 2 {
                fwd[1] = node_of_lattice.get(&(k.0, k.1 + 1)).copied();
            }
            GradSite {
                own: node_of_lattice.get(&k).copied(),
                fwd,
            }
        })
        .filter(|s| s.own.is_some() || s.fwd.iter().any(|f| f.is_some()))
        .collect();

    Ok(Arc::new(GridDomain {
        dim,
        shape,
        h,
        cell_volume: h.powi(dim as i32),
        nodes,
        lattice,
        node_of_lattice,
        grad_sites,
    }))
}

/// Nodal values of a function on a grid, zero outside the node set.
#[derive(Debug, Clone)]
pub struct DiscreteFunction {
    pub dom: Arc<GridDomain>,
    pub values: Vec<f64>,
}

impl DiscreteFunction {
    pub fn new(dom: &Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != dom.len() {
            return Err(FracError::DomainMismatch);
        }
        Ok(Self { dom: Arc::clone(dom), values })
    }

    pub fn zero(dom: &Arc<GridDomain>) -> Self {
        Self { dom: Arc::clone(dom), values: vec![0.0; dom.len()] }
    }

    pub fn from_fn(dom: &Arc<GridDomain>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = dom.nodes.iter().map(|&x| f(x)).collect();
        Self { dom: Arc::clone(dom), values }
    }

    pub fn same_domain(&self, other: &DiscreteFunction) -> bool {
        Arc::ptr_eq(&self.dom, &other.dom)
            || (self.dom.shape == other.dom.shape && self.dom.h == other.dom.h)
    }

    /// (sum_i |u_i|^p h^N)^(1/p), the s = 0 seminorm regime.
    pub fn lp_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "lp_norm requires p >= 1");
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.dom.cell_volume).powf(1.0 / p)
    }

    /// (sum_sites |grad u|^p h^N)^(1/p), the s = 1 seminorm regime, using
    /// forward differences on the extended site set with ghost value 0.
    pub fn gradient_lp_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "gradient_lp_norm requires p >= 1");
        let mut acc = 0.0;
        for site in self.dom.grad_sites() {
            let g2 = self.grad_sq_at(site);
            if g2 > 0.0 {
                acc += g2.powf(p / 2.0);
            }
        }
        (acc * self.dom.cell_volume).powf(1.0 / p)
    }

    /// |grad u|^2 at one stencil site.
    #[inline]
    pub fn grad_sq_at(&self, site: &GradSite) -> f64 {
        let own = site.own.map_or(0.0, |i| self.values[i]);
        let mut g2 = 0.0;
        for d in 0..self.dom.dim {
            let f = site.fwd[d].map_or(0.0, |i| self.values[i]);
            let g = (f - own) / self.dom.h;
            g2 += g * g;
        }
        g2
    }

    /// Quadrature of the product: sum_i u_i w_i h^N.
    pub fn integrate(&self, w: &DiscreteFunction) -> Result<f64> {
        if !self.same_domain(w) {
            return Err(FracError::DomainMismatch);
        }
        let s: f64 = self
            .values
            .iter()
            .zip(&w.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(s * self.dom.cell_volume)
    }

    /// Max of |u_i|.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
