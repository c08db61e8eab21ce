//! Periodic multi-lattices: node offsets, generating edges, interaction range
//! and box regions at scale ε = 1/m.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TOL: f64 = 1e-9;

/// One generating edge [x_b, y_b] as written in the JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeOffset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(default = "default_true")]
    pub nn: bool,
}

fn default_true() -> bool {
    true
}

impl EdgeOffset {
    pub fn new(x: Vec<f64>, y: Vec<f64>, nn: bool) -> Self {
        Self { x, y, nn }
    }

    pub fn length(&self) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn direction(&self) -> Vec<f64> {
        let l = self.length();
        self.x.iter().zip(&self.y).map(|(a, b)| (b - a) / l).collect()
    }
}

/// Raw, unvalidated lattice description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub d: usize,
    pub n: usize,
    pub offsets: Vec<Vec<f64>>,
    pub edges0: Vec<EdgeOffset>,
}

/// Edge resolved against the offset table: it joins node (0, from) to node
/// (to_cell, to).
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedEdge {
    pub from: usize,
    pub to_cell: Vec<i64>,
    pub to: usize,
    pub length: f64,
    pub direction: Vec<f64>,
    pub nn: bool,
}

/// A validated lattice. Edges are stored in canonical sorted order so that
/// every downstream sum is independent of the order the spec listed them in.
#[derive(Debug, Clone)]
pub struct Lattice {
    spec: LatticeSpec,
    edges: Vec<ResolvedEdge>,
    hypercubic: bool,
    range: f64,
}

impl LatticeSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("lattice spec serializes")
    }

    /// Built-in presets: `zd-nn`, `zd-range2`, `kagome`, `zd-diag`.
    pub fn preset(name: &str, d: usize, n: usize) -> Result<Self> {
        let unit = |i: usize, s: f64| {
            let mut v = vec![0.0; d];
            v[i] = s;
            v
        };
        let origin = vec![0.0; d];
        match name {
            "zd-nn" => Ok(Self {
                d,
                n,
                offsets: vec![origin.clone()],
                edges0: (0..d)
                    .map(|i| EdgeOffset::new(origin.clone(), unit(i, 1.0), true))
                    .collect(),
            }),
            "zd-range2" => {
                let mut edges0: Vec<_> = (0..d)
                    .map(|i| EdgeOffset::new(origin.clone(), unit(i, 1.0), true))
                    .collect();
                edges0.extend((0..d).map(|i| EdgeOffset::new(origin.clone(), unit(i, 2.0), false)));
                Ok(Self { d, n, offsets: vec![origin], edges0 })
            }
            "kagome" => {
                if d != 2 {
                    return Err(Error::InvalidSpec("kagome is two-dimensional".into()));
                }
                let p = |a: f64, b: f64| vec![a, b];
                Ok(Self {
                    d,
                    n,
                    offsets: vec![p(0.0, 0.0), p(0.5, 0.0), p(0.0, 0.5)],
                    edges0: vec![
                        EdgeOffset::new(p(0.0, 0.0), p(0.5, 0.0), true),
                        EdgeOffset::new(p(0.5, 0.0), p(1.0, 0.0), true),
                        EdgeOffset::new(p(0.0, 0.0), p(0.0, 0.5), true),
                        EdgeOffset::new(p(0.0, 0.5), p(0.0, 1.0), true),
                        EdgeOffset::new(p(0.5, 0.0), p(0.0, 0.5), true),
                        EdgeOffset::new(p(0.0, 0.5), p(-0.5, 1.0), true),
                    ],
                })
            }
            "zd-diag" => {
                if d != 2 {
                    return Err(Error::InvalidSpec("zd-diag is two-dimensional".into()));
                }
                let o = vec![0.0, 0.0];
                let ys = [
                    [1.0, 0.0],
                    [-1.0, 0.0],
                    [0.0, 1.0],
                    [0.0, -1.0],
                    [1.0, 1.0],
                    [-1.0, -1.0],
                    [1.0, -1.0],
                    [-1.0, 1.0],
                ];
                Ok(Self {
                    d,
                    n,
                    offsets: vec![o.clone()],
                    edges0: ys.iter().map(|y| EdgeOffset::new(o.clone(), y.to_vec(), true)).collect(),
                })
            }
            other => Err(Error::InvalidSpec(format!("unknown preset '{other}'"))),
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

fn locate(offsets: &[Vec<f64>], p: &[f64]) -> Option<(Vec<i64>, usize)> {
    for (j, q) in offsets.iter().enumerate() {
        let cell: Vec<f64> = p.iter().zip(q).map(|(a, b)| a - b).collect();
        if cell.iter().all(|c| close(*c, c.round())) {
            return Some((cell.iter().map(|c| c.round() as i64).collect(), j));
        }
    }
    None
}

/// Iterates over all integer points of the box [lo, hi) in lexicographic
/// order (first coordinate slowest).
pub fn box_cells(lo: &[i64], hi: &[i64]) -> impl Iterator<Item = Vec<i64>> {
    let lo = lo.to_vec();
    let hi = hi.to_vec();
    let empty = lo.iter().zip(&hi).any(|(a, b)| a >= b);
    let mut cur = if empty { None } else { Some(lo.clone()) };
    std::iter::from_fn(move || {
        let out = cur.clone()?;
        let mut next = out.clone();
        let mut i = next.len();
        loop {
            if i == 0 {
                cur = None;
                break;
            }
            i -= 1;
            next[i] += 1;
            if next[i] < hi[i] {
                cur = Some(next);
                break;
            }
            next[i] = lo[i];
        }
        Some(out)
    })
}

/// Checks that nodes `targets` are connected using the edges in `edges`
/// (pairs of node keys), ignoring orientation.
fn connected(targets: &[(Vec<i64>, usize)], edges: &[((Vec<i64>, usize), (Vec<i64>, usize))]) -> bool {
    if targets.is_empty() {
        return true;
    }
    let mut adj: HashMap<&(Vec<i64>, usize), Vec<&(Vec<i64>, usize)>> = HashMap::new();
    for (a, b) in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut seen: std::collections::HashSet<&(Vec<i64>, usize)> = std::collections::HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(&targets[0]);
    queue.push_back(&targets[0]);
    while let Some(v) = queue.pop_front() {
        if let Some(ns) = adj.get(v) {
            for w in ns {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
    }
    targets.iter().all(|t| seen.contains(t))
}

impl Lattice {
    /// Validates `spec`: offsets distinct with q₁ = 0, edge endpoints on the
    /// lattice, and the nearest-neighbour subgraph connected on the window
    /// [−2,3)ᵈ.
    pub fn new(spec: LatticeSpec) -> Result<Self> {
        let d = spec.d;
        if d < 2 {
            return Err(Error::InvalidSpec("dimension must be at least 2".into()));
        }
        if spec.n < 1 {
            return Err(Error::InvalidSpec("codomain dimension must be at least 1".into()));
        }
        if spec.offsets.is_empty() || spec.offsets[0].iter().any(|&c| c != 0.0) {
            return Err(Error::BadOffset("first offset must be the origin".into()));
        }
        for (i, q) in spec.offsets.iter().enumerate() {
            if q.len() != d || q.iter().any(|&c| !(0.0..1.0).contains(&c)) {
                return Err(Error::BadOffset(format!("offset {i} not in [0,1)^d")));
            }
            for q2 in &spec.offsets[..i] {
                if q.iter().zip(q2).all(|(a, b)| close(*a, *b)) {
                    return Err(Error::BadOffset(format!("offset {i} duplicates an earlier one")));
                }
            }
        }
        if spec.edges0.is_empty() {
            return Err(Error::InvalidSpec("no generating edges".into()));
        }
        let mut edges = Vec::with_capacity(spec.edges0.len());
        for (k, e) in spec.edges0.iter().enumerate() {
            if e.x.len() != d || e.y.len() != d {
                return Err(Error::InvalidSpec(format!("edge {k} has wrong dimension")));
            }
            let from = spec
                .offsets
                .iter()
                .position(|q| q.iter().zip(&e.x).all(|(a, b)| close(*a, *b)))
                .ok_or_else(|| Error::BadOffset(format!("edge {k}: x_b is not an offset")))?;
            let (to_cell, to) = locate(&spec.offsets, &e.y)
                .ok_or_else(|| Error::BadOffset(format!("edge {k}: y_b is not a lattice node")))?;
            if e.length() <= TOL {
                return Err(Error::InvalidSpec(format!("edge {k} has zero length")));
            }
            edges.push(ResolvedEdge {
                from,
                to_cell,
                to,
                length: e.length(),
                direction: e.direction(),
                nn: e.nn,
            });
        }
        if !edges.iter().any(|e| e.nn) {
            return Err(Error::InvalidSpec("nearest-neighbour mask is empty".into()));
        }
        // canonical order: source offset, target offset, length, then
        // decreasing cell shift (so e₁ precedes e₂ on ℤᵈ)
        let mut order: Vec<usize> = (0..edges.len()).collect();
        order.sort_by(|&a, &b| {
            let (ea, eb) = (&edges[a], &edges[b]);
            (ea.from, ea.to)
                .cmp(&(eb.from, eb.to))
                .then(ea.length.total_cmp(&eb.length))
                .then(eb.to_cell.cmp(&ea.to_cell))
                .then(ea.nn.cmp(&eb.nn))
        });
        let edges: Vec<ResolvedEdge> = order.iter().map(|&i| edges[i].clone()).collect();
        let edges0: Vec<EdgeOffset> = order.iter().map(|&i| spec.edges0[i].clone()).collect();
        let spec = LatticeSpec { edges0, ..spec };

        let hypercubic = spec.offsets.len() == 1
            && edges.len() == d
            && edges.iter().all(|e| e.nn)
            && (0..d).all(|i| {
                edges.iter().any(|e| {
                    e.to_cell.iter().enumerate().all(|(j, &c)| c == if i == j { 1 } else { 0 })
                })
            });

        let mut lat = Self { spec, edges, hypercubic, range: 0.0 };
        let window_lo = vec![-2i64; d];
        let window_hi = vec![3i64; d];
        let nodes: Vec<(Vec<i64>, usize)> = box_cells(&window_lo, &window_hi)
            .flat_map(|c| (0..lat.num_offsets()).map(move |i| (c.clone(), i)))
            .filter(|(c, i)| lat.in_window(c, *i, -2.0, 3.0))
            .collect();
        let window_edges = lat.nn_edges_where(&window_lo, &window_hi, |p| {
            p.iter().all(|&x| (-2.0..3.0).contains(&x))
        });
        if !connected(&nodes, &window_edges) {
            return Err(Error::DisconnectedNN);
        }
        lat.range = lat.compute_range();
        Ok(lat)
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn num_offsets(&self) -> usize {
        self.spec.offsets.len()
    }

    pub fn offset(&self, i: usize) -> &[f64] {
        &self.spec.offsets[i]
    }

    pub fn edges(&self) -> &[ResolvedEdge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// True for ℤᵈ with exactly the d unit edges.
    pub fn is_hypercubic(&self) -> bool {
        self.hypercubic
    }

    /// Unscaled position of node (cell, i).
    pub fn position(&self, cell: &[i64], i: usize) -> Vec<f64> {
        cell.iter().zip(self.offset(i)).map(|(&c, q)| c as f64 + q).collect()
    }

    fn in_window(&self, cell: &[i64], i: usize, lo: f64, hi: f64) -> bool {
        self.position(cell, i).iter().all(|&x| x >= lo && x < hi)
    }

    /// All integer shifts of 𝓝𝓝₀ anchored in [lo, hi) whose endpoints both
    /// satisfy `keep`.
    #[allow(clippy::type_complexity)]
    fn nn_edges_where(
        &self,
        lo: &[i64],
        hi: &[i64],
        keep: impl Fn(&[f64]) -> bool,
    ) -> Vec<((Vec<i64>, usize), (Vec<i64>, usize))> {
        let mut out = Vec::new();
        for c in box_cells(lo, hi) {
            for e in self.edges.iter().filter(|e| e.nn) {
                let tc: Vec<i64> = c.iter().zip(&e.to_cell).map(|(a, b)| a + b).collect();
                if keep(&self.position(&c, e.from)) && keep(&self.position(&tc, e.to)) {
                    out.push(((c.clone(), e.from), (tc, e.to)));
                }
            }
        }
        out
    }

    /// Whether the NN edges with both endpoints in the closed ball of radius
    /// `r` connect the nodes of [0,1]ᵈ.
    pub fn ball_connects_unit_cube(&self, r: f64) -> bool {
        let d = self.d();
        let reach = self.edges.iter().flat_map(|e| e.to_cell.iter()).map(|c| c.abs()).max().unwrap_or(0);
        let span = r.ceil() as i64 + reach + 1;
        let lo = vec![-span; d];
        let hi = vec![span + 1; d];
        let targets: Vec<(Vec<i64>, usize)> = box_cells(&vec![0; d], &vec![2; d])
            .flat_map(|c| (0..self.num_offsets()).map(move |i| (c.clone(), i)))
            .filter(|(c, i)| self.position(c, *i).iter().all(|&x| x >= -TOL && x <= 1.0 + TOL))
            .collect();
        let edges = self.nn_edges_where(&lo, &hi, |p| p.iter().map(|x| x * x).sum::<f64>().sqrt() <= r + TOL);
        connected(&targets, &edges)
    }

    /// Interaction range R, computed once at validation.
    pub fn range(&self) -> f64 {
        self.range
    }

    /// The least candidate satisfying both the ball-connectivity property
    /// (with a closed ball) and R ≥ max |y_b|.
    pub fn compute_range(&self) -> f64 {
        let d = self.d();
        let ymax = self
            .spec
            .edges0
            .iter()
            .map(|e| e.y.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let floor = (4.0 * (d as f64).sqrt()).max(ymax);
        let mut candidates: Vec<f64> = vec![4.0 * (d as f64).sqrt()];
        candidates.extend(self.spec.edges0.iter().map(|e| e.y.iter().map(|x| x * x).sum::<f64>().sqrt()));
        let mut span = 3i64;
        loop {
            let lo = vec![-span; d];
            let hi = vec![span + 1; d];
            for c in box_cells(&lo, &hi) {
                for i in 0..self.num_offsets() {
                    let p = self.position(&c, i);
                    candidates.push(4.0 * p.iter().map(|x| x * x).sum::<f64>().sqrt());
                }
            }
            candidates.retain(|&c| c >= floor - TOL);
            candidates.sort_by(|a, b| a.total_cmp(b));
            candidates.dedup_by(|a, b| (*a - *b).abs() <= TOL);
            for &c in &candidates {
                if c > 4.0 * span as f64 {
                    break;
                }
                if self.ball_connects_unit_cube(c / 4.0) {
                    return c;
                }
            }
            span *= 2;
        }
    }

    /// Enumerates (anchor cell, edge index) pairs at scale 1/m for `region`.
    pub fn edges_in_region(
        &self,
        m: u32,
        region: &Region,
        convention: Convention,
    ) -> Result<Vec<(Vec<i64>, usize)>> {
        let mut out = Vec::new();
        self.for_each_edge_in_region(m, region, convention, |z, b| out.push((z.to_vec(), b)))?;
        Ok(out)
    }

    /// Calls `f(anchor cell, edge index)` for every edge of `region` in the
    /// order of `edges_in_region`, without materializing the list.
    pub fn for_each_edge_in_region(
        &self,
        m: u32,
        region: &Region,
        convention: Convention,
        mut f: impl FnMut(&[i64], usize),
    ) -> Result<()> {
        let (lo, hi) = region.grid_bounds(m)?;
        match convention {
            Convention::ZAnchored => {
                for c in box_cells(&lo, &hi) {
                    for b in 0..self.num_edges() {
                        f(&c, b);
                    }
                }
            }
            Convention::EdgeContained => {
                let reach = self.reach();
                let alo: Vec<i64> = lo.iter().map(|x| x - reach).collect();
                let ahi: Vec<i64> = hi.iter().map(|x| x + reach).collect();
                let mut tc = vec![0i64; lo.len()];
                for c in box_cells(&alo, &ahi) {
                    for (b, e) in self.edges.iter().enumerate() {
                        for k in 0..c.len() {
                            tc[k] = c[k] + e.to_cell[k];
                        }
                        if self.node_in_grid_box(&c, e.from, &lo, &hi) && self.node_in_grid_box(&tc, e.to, &lo, &hi) {
                            f(&c, b);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest |cell shift| appearing in any generating edge, plus one.
    pub fn reach(&self) -> i64 {
        self.edges.iter().flat_map(|e| e.to_cell.iter()).map(|c| c.abs()).max().unwrap_or(0) + 1
    }

    /// Whether node (cell, i) lies in the half-open box [lo, hi) of cell
    /// coordinates.
    pub fn node_in_grid_box(&self, cell: &[i64], i: usize, lo: &[i64], hi: &[i64]) -> bool {
        let q = self.offset(i);
        (0..cell.len()).all(|k| {
            let x = cell[k] as f64 + q[k];
            x >= lo[k] as f64 && x < hi[k] as f64
        })
    }
}

/// Summation convention for energies on a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// All edges anchored at z ∈ εℤᵈ ∩ A.
    ZAnchored,
    /// Edges with both endpoints in A.
    EdgeContained,
}

/// Axis-aligned half-open box [lo, hi).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(Error::InvalidSpec("region needs lo < hi componentwise".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(d: usize, lo: f64, hi: f64) -> Self {
        Self { lo: vec![lo; d], hi: vec![hi; d] }
    }

    pub fn d(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// Corners in units of 1/m, or an error if they are not on that grid.
    pub fn grid_bounds(&self, m: u32) -> Result<(Vec<i64>, Vec<i64>)> {
        let conv = |x: f64| {
            let s = x * m as f64;
            if (s - s.round()).abs() <= 1e-9 * (1.0 + s.abs()) {
                Ok(s.round() as i64)
            } else {
                Err(Error::MisalignedRegion { m })
            }
        };
        let lo = self.lo.iter().map(|&x| conv(x)).collect::<Result<Vec<_>>>()?;
        let hi = self.hi.iter().map(|&x| conv(x)).collect::<Result<Vec<_>>>()?;
        Ok((lo, hi))
    }

    pub fn shrink(&self, delta: f64) -> Result<Self> {
        let min_side = self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
        if 2.0 * delta >= min_side {
            return Err(Error::EmptyShrink { delta });
        }
        Ok(Self {
            lo: self.lo.iter().map(|x| x + delta).collect(),
            hi: self.hi.iter().map(|x| x - delta).collect(),
        })
    }

    pub fn grow(&self, delta: f64) -> Self {
        Self {
            lo: self.lo.iter().map(|x| x - delta).collect(),
            hi: self.hi.iter().map(|x| x + delta).collect(),
        }
    }

    /// Sup-norm distance from x to the complement of the box (0 outside).
    pub fn dist_to_complement(&self, x: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for k in 0..x.len() {
            best = best.min(x[k] - self.lo[k]).min(self.hi[k] - x[k]);
        }
        best.max(0.0)
    }
}
