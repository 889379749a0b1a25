//! Finite node sets standing in for a closed region: an interior part, a
//! nonempty boundary, weighted stencil edges, lumped node masses and a
//! surface weight per boundary node.
//!
//! Three constructors are provided: 1D interval grids, 2D rectangle grids
//! (five-point stencil) and arbitrary finite weighted graphs with a
//! designated boundary. Grid constructors use lumped-mass finite-element
//! scaling so that the generator converges to the continuum Laplacian with
//! the matching boundary condition at second order.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A weighted unordered edge, stored with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub conductance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    Interval { n: usize, length: f64 },
    Rectangle { nx: usize, ny: usize, lx: f64, ly: f64 },
    Graph,
}

/// Immutable discrete domain: node partition, stencil and measures.
///
/// Nodes are addressed by index `0..n`. `interior` and `boundary` partition
/// the index set and `boundary` is nonempty. Values are validated on
/// construction and never change afterwards, so a `Domain` can be shared
/// freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    coords: Vec<(f64, f64)>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    edges: Vec<Edge>,
    edge_set: BTreeSet<(usize, usize)>,
    mass: Vec<f64>,
    sigma: Vec<f64>,
}

impl Domain {
    fn assemble(
        kind: DomainKind,
        coords: Vec<(f64, f64)>,
        boundary: Vec<usize>,
        edges: Vec<Edge>,
        mass: Vec<f64>,
        sigma: Vec<f64>,
    ) -> Result<Domain> {
        let n = coords.len();
        if n < 2 {
            return Err(Error::InvalidDomain(format!(
                "need at least 2 nodes, got {n}"
            )));
        }
        let boundary_set: BTreeSet<usize> = boundary.iter().copied().collect();
        if boundary_set.len() != boundary.len() {
            return Err(Error::InvalidDomain(
                "boundary contains duplicate indices".into(),
            ));
        }
        if boundary.is_empty() {
            return Err(Error::InvalidDomain("boundary is empty".into()));
        }
        if let Some(&b) = boundary_set.iter().find(|&&b| b >= n) {
            return Err(Error::InvalidDomain(format!(
                "boundary index {b} out of range (n = {n})"
            )));
        }
        let mut edge_set = BTreeSet::new();
        for e in &edges {
            if e.i == e.j {
                return Err(Error::InvalidDomain(format!("self-loop at node {}", e.i)));
            }
            if e.i >= n || e.j >= n {
                return Err(Error::InvalidDomain(format!(
                    "edge ({}, {}) out of range (n = {n})",
                    e.i, e.j
                )));
            }
            if !(e.conductance > 0.0) || !e.conductance.is_finite() {
                return Err(Error::InvalidDomain(format!(
                    "edge ({}, {}) has nonpositive conductance {}",
                    e.i, e.j, e.conductance
                )));
            }
            if !edge_set.insert((e.i.min(e.j), e.i.max(e.j))) {
                return Err(Error::InvalidDomain(format!(
                    "duplicate edge ({}, {})",
                    e.i, e.j
                )));
            }
        }
        if mass.len() != n {
            return Err(Error::InvalidDomain(format!(
                "mass array has length {}, expected {n}",
                mass.len()
            )));
        }
        if sigma.len() != boundary.len() {
            return Err(Error::InvalidDomain(format!(
                "boundary weight array has length {}, expected {}",
                sigma.len(),
                boundary.len()
            )));
        }
        if let Some(m) = mass.iter().find(|m| !(**m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidDomain(format!("nonpositive node mass {m}")));
        }
        if let Some(s) = sigma.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "nonpositive boundary weight {s}"
            )));
        }
        let interior: Vec<usize> = (0..n).filter(|i| !boundary_set.contains(i)).collect();
        if interior.is_empty() && matches!(kind, DomainKind::Graph) && boundary.len() == n {
            return Err(Error::InvalidDomain(
                "boundary covers every node; interior is empty".into(),
            ));
        }
        let mut boundary = boundary;
        let mut sigma = sigma;
        // keep boundary sorted with sigma aligned
        let mut order: Vec<usize> = (0..boundary.len()).collect();
        order.sort_by_key(|&k| boundary[k]);
        boundary = order.iter().map(|&k| boundary[k]).collect();
        sigma = order.iter().map(|&k| sigma[k]).collect();
        Ok(Domain {
            kind,
            coords,
            interior,
            boundary,
            edges,
            edge_set,
            mass,
            sigma,
        })
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }

    /// Interior node indices, ascending.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Boundary node indices, ascending.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary.binary_search(&node).is_ok()
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        self.edge_set.contains(&(i.min(j), i.max(j)))
    }

    /// Lumped node masses, one per node.
    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// Surface weights aligned with [`Domain::boundary`].
    pub fn boundary_weights(&self) -> &[f64] {
        &self.sigma
    }

    /// Position of `node` in the sorted boundary list, if it is a boundary node.
    pub fn boundary_position(&self, node: usize) -> Option<usize> {
        self.boundary.binary_search(&node).ok()
    }

    /// Surface weight of a boundary node.
    pub fn boundary_weight_of(&self, node: usize) -> Option<f64> {
        self.boundary_position(node).map(|k| self.sigma[k])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Domain> {
        Ok(serde_json::from_str(text)?)
    }
}

/// 1D grid on an interval of the given length.
///
/// Path graph with spacing `h = length / (n - 1)`: conductance `1/h` on
/// every edge, lumped mass `h` at interior nodes and `h/2` at the two
/// endpoints, which form the boundary with unit surface weight.
pub fn build_interval(n: usize, length: f64) -> Result<Domain> {
    if n < 3 {
        return Err(Error::InvalidDomain(format!(
            "interval needs n >= 3 so the interior is nonempty, got {n}"
        )));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::InvalidDomain(format!(
            "interval length must be positive, got {length}"
        )));
    }
    let h = length / (n - 1) as f64;
    let w = 1.0 / h;
    let coords = (0..n).map(|i| (i as f64 * h, 0.0)).collect();
    let edges = (0..n - 1)
        .map(|i| Edge {
            i,
            j: i + 1,
            conductance: w,
        })
        .collect();
    let mut mass = vec![h; n];
    mass[0] = h / 2.0;
    mass[n - 1] = h / 2.0;
    Domain::assemble(
        DomainKind::Interval { n, length },
        coords,
        vec![0, n - 1],
        edges,
        mass,
        vec![1.0, 1.0],
    )
}

/// 2D grid on a rectangle, five-point stencil, perimeter boundary.
///
/// Node `(i, j)` has index `j * nx + i`. Horizontal edges carry conductance
/// `hy/hx`, vertical ones `hx/hy` (tensor-product lumped finite elements).
/// Masses are `hx*hy`, halved per touching side; surface weights are the
/// boundary segment length per node, `(hx+hy)/2` at corners.
pub fn build_rectangle(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Domain> {
    if nx < 3 || ny < 3 {
        return Err(Error::InvalidDomain(format!(
            "rectangle needs nx, ny >= 3, got {nx} x {ny}"
        )));
    }
    if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
        return Err(Error::InvalidDomain(format!(
            "rectangle side lengths must be positive, got {lx} x {ly}"
        )));
    }
    let hx = lx / (nx - 1) as f64;
    let hy = ly / (ny - 1) as f64;
    let idx = |i: usize, j: usize| j * nx + i;
    let n = nx * ny;
    let mut coords = Vec::with_capacity(n);
    let mut edges = Vec::new();
    let mut mass = Vec::with_capacity(n);
    let mut boundary = Vec::new();
    let mut sigma = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            coords.push((i as f64 * hx, j as f64 * hy));
            if i + 1 < nx {
                edges.push(Edge {
                    i: idx(i, j),
                    j: idx(i + 1, j),
                    conductance: hy / hx,
                });
            }
            if j + 1 < ny {
                edges.push(Edge {
                    i: idx(i, j),
                    j: idx(i, j + 1),
                    conductance: hx / hy,
                });
            }
            let mx = if i == 0 || i == nx - 1 { hx / 2.0 } else { hx };
            let my = if j == 0 || j == ny - 1 { hy / 2.0 } else { hy };
            mass.push(mx * my);
            let on_x = i == 0 || i == nx - 1;
            let on_y = j == 0 || j == ny - 1;
            if on_x || on_y {
                boundary.push(idx(i, j));
                sigma.push(match (on_x, on_y) {
                    (true, true) => (hx + hy) / 2.0,
                    (true, false) => hy,
                    (false, true) => hx,
                    (false, false) => unreachable!(),
                });
            }
        }
    }
    Domain::assemble(
        DomainKind::Rectangle { nx, ny, lx, ly },
        coords,
        boundary,
        edges,
        mass,
        sigma,
    )
}

/// Arbitrary finite weighted graph with a designated boundary.
///
/// Node count is inferred from the largest index appearing in `edges` or
/// `boundary`. Mass defaults to 1 per node and surface weight to 1 per
/// boundary node unless overridden.
pub fn build_graph(
    edges: &[(usize, usize, f64)],
    boundary: &[usize],
    mass: Option<Vec<f64>>,
    boundary_weight: Option<Vec<f64>>,
) -> Result<Domain> {
    let mut n = 0usize;
    for &(i, j, _) in edges {
        n = n.max(i + 1).max(j + 1);
    }
    for &b in boundary {
        n = n.max(b + 1);
    }
    if boundary.is_empty() {
        return Err(Error::InvalidDomain("boundary is empty".into()));
    }
    if boundary.len() >= n {
        return Err(Error::InvalidDomain(
            "boundary must be a proper subset of the nodes".into(),
        ));
    }
    let coords = (0..n).map(|i| (i as f64, 0.0)).collect();
    let edges: Vec<Edge> = edges
        .iter()
        .map(|&(i, j, w)| Edge {
            i: i.min(j),
            j: i.max(j),
            conductance: w,
        })
        .collect();
    let mass = mass.unwrap_or_else(|| vec![1.0; n]);
    let sigma = boundary_weight.unwrap_or_else(|| vec![1.0; boundary.len()]);
    Domain::assemble(
        DomainKind::Graph,
        coords,
        boundary.to_vec(),
        edges,
        mass,
        sigma,
    )
}

/// The 3-node path with unit conductances, masses and surface weights,
/// boundary at both ends. Used as the smallest nontrivial fixture.
pub fn unit_three_path() -> Domain {
    build_graph(&[(0, 1, 1.0), (1, 2, 1.0)], &[0, 2], None, None)
        .expect("unit 3-path is a valid domain")
}

// ---------------------------------------------------------------------------
// JSON schema: {kind, n|nx,ny|edges, length|lx,ly, boundary, mass, sigma,
// conductance}. The structural parameters are authoritative; the arrays are
// optional on input (defaults are rebuilt from the constructor) and always
// written on output.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum DomainJson {
    Interval {
        n: usize,
        length: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        boundary: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        conductance: Option<Vec<f64>>,
    },
    Rectangle {
        nx: usize,
        ny: usize,
        lx: f64,
        ly: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        boundary: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        conductance: Option<Vec<f64>>,
    },
    Graph {
        edges: Vec<(usize, usize)>,
        boundary: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        conductance: Option<Vec<f64>>,
    },
}

impl Serialize for Domain {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let conductance = Some(self.edges.iter().map(|e| e.conductance).collect());
        let json = match self.kind {
            DomainKind::Interval { n, length } => DomainJson::Interval {
                n,
                length,
                boundary: Some(self.boundary.clone()),
                mass: Some(self.mass.clone()),
                sigma: Some(self.sigma.clone()),
                conductance,
            },
            DomainKind::Rectangle { nx, ny, lx, ly } => DomainJson::Rectangle {
                nx,
                ny,
                lx,
                ly,
                boundary: Some(self.boundary.clone()),
                mass: Some(self.mass.clone()),
                sigma: Some(self.sigma.clone()),
                conductance,
            },
            DomainKind::Graph => DomainJson::Graph {
                edges: self.edges.iter().map(|e| (e.i, e.j)).collect(),
                boundary: self.boundary.clone(),
                mass: Some(self.mass.clone()),
                sigma: Some(self.sigma.clone()),
                conductance,
            },
        };
        json.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Domain {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let json = DomainJson::deserialize(deserializer)?;
        domain_from_json(json).map_err(D::Error::custom)
    }
}

fn domain_from_json(json: DomainJson) -> Result<Domain> {
    let (mut domain, boundary, mass, sigma, conductance) = match json {
        DomainJson::Interval {
            n,
            length,
            boundary,
            mass,
            sigma,
            conductance,
        } => (build_interval(n, length)?, boundary, mass, sigma, conductance),
        DomainJson::Rectangle {
            nx,
            ny,
            lx,
            ly,
            boundary,
            mass,
            sigma,
            conductance,
        } => (
            build_rectangle(nx, ny, lx, ly)?,
            boundary,
            mass,
            sigma,
            conductance,
        ),
        DomainJson::Graph {
            edges,
            boundary,
            mass,
            sigma,
            conductance,
        } => {
            let weights = match &conductance {
                Some(w) => {
                    if w.len() != edges.len() {
                        return Err(Error::InvalidDomain(format!(
                            "conductance array has length {}, expected {}",
                            w.len(),
                            edges.len()
                        )));
                    }
                    w.clone()
                }
                None => vec![1.0; edges.len()],
            };
            let weighted: Vec<(usize, usize, f64)> = edges
                .iter()
                .zip(&weights)
                .map(|(&(i, j), &w)| (i, j, w))
                .collect();
            let d = build_graph(&weighted, &boundary, mass, sigma)?;
            return Ok(d);
        }
    };
    if let Some(b) = boundary {
        let mut b = b;
        b.sort_unstable();
        if b != domain.boundary {
            return Err(Error::InvalidDomain(
                "boundary list does not match the grid perimeter".into(),
            ));
        }
    }
    if let Some(m) = mass {
        if m.len() != domain.mass.len() {
            return Err(Error::InvalidDomain(format!(
                "mass array has length {}, expected {}",
                m.len(),
                domain.mass.len()
            )));
        }
        if let Some(v) = m.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidDomain(format!("nonpositive node mass {v}")));
        }
        domain.mass = m;
    }
    if let Some(s) = sigma {
        if s.len() != domain.sigma.len() {
            return Err(Error::InvalidDomain(format!(
                "sigma array has length {}, expected {}",
                s.len(),
                domain.sigma.len()
            )));
        }
        if let Some(v) = s.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "nonpositive boundary weight {v}"
            )));
        }
        domain.sigma = s;
    }
    if let Some(c) = conductance {
        if c.len() != domain.edges.len() {
            return Err(Error::InvalidDomain(format!(
                "conductance array has length {}, expected {}",
                c.len(),
                domain.edges.len()
            )));
        }
        if let Some(v) = c.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "nonpositive conductance {v}"
            )));
        }
        for (e, w) in domain.edges.iter_mut().zip(&c) {
            e.conductance = *w;
        }
    }
    Ok(domain)
}
