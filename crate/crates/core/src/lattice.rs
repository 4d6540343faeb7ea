//! Finite boxes in Z^d: vertices, nearest-neighbour edges, vertex regions.
//!
//! Vertices are indexed row-major with axis 0 varying fastest, so the vertex at
//! coordinates `(x0, x1, x2)` has index `x0 + n0 * (x1 + n1 * x2)`. Edges are
//! numbered by scanning vertices in index order and, for each vertex, the axes
//! in increasing order, emitting the edge to the `+1` neighbour along that axis
//! when it exists (or wraps around on a periodic axis).

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groundstate::SpinConfig;

/// Per-axis boundary topology of a box.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    periodic: Vec<bool>,
}

impl Topology {
    pub fn open(d: usize) -> Self {
        Self { periodic: vec![false; d] }
    }

    pub fn periodic(d: usize) -> Self {
        Self { periodic: vec![true; d] }
    }

    pub fn from_flags(periodic: Vec<bool>) -> Self {
        Self { periodic }
    }

    /// Parses `open`, `periodic`, or a comma separated per-axis list such as
    /// `periodic,open`. A single keyword is broadcast to all `d` axes.
    pub fn parse(s: &str, d: usize) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let flag = |p: &str| match p {
            "open" | "o" => Ok(false),
            "periodic" | "p" => Ok(true),
            other => Err(Error::Invalid(format!("unknown topology `{other}`"))),
        };
        if parts.len() == 1 {
            Ok(Self { periodic: vec![flag(parts[0])?; d] })
        } else if parts.len() == d {
            Ok(Self { periodic: parts.into_iter().map(flag).collect::<Result<_>>()? })
        } else {
            Err(Error::Invalid(format!(
                "topology `{s}` has {} axes, lattice has {d}",
                parts.len()
            )))
        }
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.periodic.get(axis).copied().unwrap_or(false)
    }

    pub fn flags(&self) -> &[bool] {
        &self.periodic
    }

    pub fn dim(&self) -> usize {
        self.periodic.len()
    }

    pub fn is_fully_open(&self) -> bool {
        self.periodic.iter().all(|p| !p)
    }

    pub fn is_fully_periodic(&self) -> bool {
        self.periodic.iter().all(|p| *p)
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_fully_open() {
            return f.write_str("open");
        }
        if self.is_fully_periodic() {
            return f.write_str("periodic");
        }
        let names: Vec<&str> = self
            .periodic
            .iter()
            .map(|&p| if p { "periodic" } else { "open" })
            .collect();
        f.write_str(&names.join(","))
    }
}

/// Side lengths plus topology; identifies a lattice for compatibility checks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub dims: Vec<usize>,
    pub topology: Topology,
}

/// A nearest-neighbour edge with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub axis: usize,
    /// True for the edge closing a periodic axis.
    pub wraps: bool,
}

impl Edge {
    pub fn other(&self, v: usize) -> usize {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }

    pub fn touches(&self, v: usize) -> bool {
        self.a == v || self.b == v
    }
}

#[derive(Debug, Clone)]
pub struct BoxLattice {
    shape: Shape,
    strides: Vec<usize>,
    n_vertices: usize,
    edges: Vec<Edge>,
    /// `(neighbour, edge index)` per vertex, sorted by neighbour.
    adjacency: Vec<Vec<(usize, usize)>>,
    /// Edge leaving vertex `v` in the `+axis` direction, at `v * d + axis`.
    forward: Vec<Option<usize>>,
}

impl BoxLattice {
    /// Hypercubic box of side `l` in `d` dimensions.
    pub fn build(d: usize, l: usize, topology: Topology) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::Invalid(format!("dimension {d} outside 1..=3")));
        }
        Self::with_dims(&vec![l; d], topology)
    }

    /// Rectangular box with per-axis side lengths.
    pub fn with_dims(dims: &[usize], topology: Topology) -> Result<Self> {
        let d = dims.len();
        if !(1..=3).contains(&d) {
            return Err(Error::Invalid(format!("dimension {d} outside 1..=3")));
        }
        if topology.dim() != d {
            return Err(Error::Invalid(format!(
                "topology has {} axes, box has {d}",
                topology.dim()
            )));
        }
        for (axis, &n) in dims.iter().enumerate() {
            if n < 2 {
                return Err(Error::Invalid(format!("side {n} on axis {axis} is below 2")));
            }
            if topology.is_periodic(axis) && n < 3 {
                return Err(Error::Invalid(format!(
                    "periodic axis {axis} needs side >= 3, got {n}"
                )));
            }
        }

        let mut strides = Vec::with_capacity(d);
        let mut acc = 1usize;
        for &n in dims {
            strides.push(acc);
            acc *= n;
        }
        let n_vertices = acc;

        let mut edges = Vec::new();
        let mut forward = vec![None; n_vertices * d];
        let mut adjacency = vec![Vec::new(); n_vertices];
        for v in 0..n_vertices {
            for axis in 0..d {
                let x = (v / strides[axis]) % dims[axis];
                let (w, wraps) = if x + 1 < dims[axis] {
                    (v + strides[axis], false)
                } else if topology.is_periodic(axis) {
                    (v - x * strides[axis], true)
                } else {
                    continue;
                };
                let idx = edges.len();
                edges.push(Edge { a: v.min(w), b: v.max(w), axis, wraps });
                forward[v * d + axis] = Some(idx);
                adjacency[v].push((w, idx));
                adjacency[w].push((v, idx));
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }

        Ok(Self {
            shape: Shape { dims: dims.to_vec(), topology },
            strides,
            n_vertices,
            edges,
            adjacency,
            forward,
        })
    }

    pub fn dim(&self) -> usize {
        self.shape.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.shape.dims
    }

    /// Side length when the box is a cube; otherwise the largest side.
    pub fn side(&self) -> usize {
        self.shape.dims.iter().copied().max().unwrap_or(0)
    }

    pub fn topology(&self) -> &Topology {
        &self.shape.topology
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn coords(&self, v: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.shape.dims)
            .map(|(&s, &n)| (v / s) % n)
            .collect()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(&x, &s)| x * s).sum()
    }

    /// Edge from `v` to its `+1` neighbour along `axis`, if any.
    pub fn forward_edge(&self, v: usize, axis: usize) -> Option<usize> {
        self.forward[v * self.dim() + axis]
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        self.adjacency[u]
            .binary_search_by_key(&v, |&(w, _)| w)
            .ok()
            .map(|i| self.adjacency[u][i].1)
    }

    /// Outward boundary slots `(vertex, axis, upper side)` on open axes: the
    /// edges that lead to an enclosing one-vertex-thick layer.
    pub fn boundary_slots(&self) -> Vec<(usize, usize, bool)> {
        let mut slots = Vec::new();
        for v in 0..self.n_vertices {
            for axis in 0..self.dim() {
                if self.shape.topology.is_periodic(axis) {
                    continue;
                }
                let x = (v / self.strides[axis]) % self.shape.dims[axis];
                if x == 0 {
                    slots.push((v, axis, false));
                }
                if x + 1 == self.shape.dims[axis] {
                    slots.push((v, axis, true));
                }
            }
        }
        slots
    }

    pub fn check_region(&self, region: &Region) -> Result<()> {
        if region.shape != self.shape {
            return Err(Error::Mismatch("region belongs to a different lattice".into()));
        }
        Ok(())
    }

    /// Edges with exactly one endpoint in `region`, sorted by index.
    pub fn boundary_edges(&self, region: &Region) -> Result<Vec<usize>> {
        self.check_region(region)?;
        Ok(self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| region.contains(e.a) != region.contains(e.b))
            .map(|(i, _)| i)
            .collect())
    }

    /// Maximal nearest-neighbour connected pieces of `region`, ordered by their
    /// smallest vertex.
    pub fn connected_components(&self, region: &Region) -> Result<Vec<Region>> {
        self.check_region(region)?;
        let mut seen = vec![false; self.n_vertices];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for start in region.iter() {
            if seen[start] {
                continue;
            }
            let mut comp = Region::empty(self);
            seen[start] = true;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                comp.insert(v);
                for &(w, _) in &self.adjacency[v] {
                    if !seen[w] && region.contains(w) {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            out.push(comp);
        }
        Ok(out)
    }

    /// Vertices on which `a` and `b` differ.
    pub fn disagreement(&self, a: &SpinConfig, b: &SpinConfig) -> Result<Region> {
        a.check_len(self.n_vertices)?;
        b.check_len(self.n_vertices)?;
        let mut r = Region::empty(self);
        for v in 0..self.n_vertices {
            if a.spin(v) != b.spin(v) {
                r.insert(v);
            }
        }
        Ok(r)
    }
}

/// Returns `sigma2` or its global flip, whichever is within Hamming distance
/// `N/2` of `sigma1`. An exact tie keeps `sigma2`.
pub fn gauge_align(sigma1: &SpinConfig, sigma2: &SpinConfig) -> Result<SpinConfig> {
    if sigma1.len() != sigma2.len() {
        return Err(Error::Mismatch(format!(
            "spin configs of size {} and {}",
            sigma1.len(),
            sigma2.len()
        )));
    }
    let distance = sigma1
        .spins()
        .iter()
        .zip(sigma2.spins())
        .filter(|(a, b)| a != b)
        .count();
    if 2 * distance > sigma1.len() {
        Ok(sigma2.flipped())
    } else {
        Ok(sigma2.clone())
    }
}

/// Vertex subset of a lattice, stored as a bitset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    shape: Shape,
    n: usize,
    words: Vec<u64>,
}

impl Region {
    pub fn empty(lattice: &BoxLattice) -> Self {
        let n = lattice.n_vertices();
        Self { shape: lattice.shape.clone(), n, words: vec![0; n.div_ceil(64)] }
    }

    pub fn full(lattice: &BoxLattice) -> Self {
        let mut r = Self::empty(lattice);
        for v in 0..r.n {
            r.insert(v);
        }
        r
    }

    pub fn from_vertices(lattice: &BoxLattice, vertices: &[usize]) -> Result<Self> {
        let mut r = Self::empty(lattice);
        for &v in vertices {
            if v >= r.n {
                return Err(Error::Invalid(format!("vertex {v} outside lattice")));
            }
            r.insert(v);
        }
        Ok(r)
    }

    pub fn insert(&mut self, v: usize) {
        self.words[v / 64] |= 1 << (v % 64);
    }

    pub fn remove(&mut self, v: usize) {
        self.words[v / 64] &= !(1 << (v % 64));
    }

    pub fn contains(&self, v: usize) -> bool {
        v < self.n && self.words[v / 64] >> (v % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn complement(&self) -> Self {
        let mut r = self.clone();
        for v in 0..self.n {
            if self.contains(v) {
                r.remove(v);
            } else {
                r.insert(v);
            }
        }
        r
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&v| self.contains(v))
    }

    pub fn vertices(&self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Low 64 bits of the membership mask; exact for lattices up to 64 vertices.
    pub fn mask(&self) -> u64 {
        self.words.first().copied().unwrap_or(0)
    }
}
