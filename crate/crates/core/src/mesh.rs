//! Tensor-product channel grids with Voronoi-box geometry.
//!
//! Unknowns live on the grid nodes. Each node owns the dual box bounded by
//! the perpendicular bisectors of its grid edges, so boundary nodes own half
//! boxes and corner nodes quarter boxes. Node coordinates and box measures
//! are closed-form in the node index and are not stored.

use std::fmt;

use crate::error::{Error, Result};

/// A point or vector in the plane.
pub type Point = [f64; 2];

/// Largest refinement level accepted by [`ChannelGrid::build`].
pub const MAX_LEVEL: u32 = 12;

/// Nodes per direction on the coarsest level.
pub const BASE_NODES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    pub fn outward_normal(self) -> Point {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }
}

/// Boundary condition region of a boundary face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    /// Dirichlet data.
    Inlet,
    /// Zero diffusive flux, convective outflow.
    Outlet,
    /// Homogeneous Neumann wall.
    Inert,
    /// Non-linear reactive boundary.
    Catalytic,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Region::Inlet => "inlet",
            Region::Outlet => "outlet",
            Region::Inert => "inert",
            Region::Catalytic => "catalytic",
        };
        f.write_str(name)
    }
}

/// One segment of the boundary between two neighbouring boundary nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFace {
    pub nodes: [usize; 2],
    pub length: f64,
    pub normal: Point,
    pub side: Side,
    pub region: Region,
}

/// Segment of one side, in the coordinate running along that side
/// (x for bottom/top, y for left/right).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatalyticSpan {
    pub side: Side,
    pub start: f64,
    pub end: f64,
}

impl CatalyticSpan {
    pub fn bottom(start: f64, end: f64) -> Self {
        Self {
            side: Side::Bottom,
            start,
            end,
        }
    }
}

/// Region assignment for the four sides plus an optional catalytic segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryLayout {
    pub bottom: Region,
    pub right: Region,
    pub top: Region,
    pub left: Region,
    pub catalytic: Option<CatalyticSpan>,
}

impl BoundaryLayout {
    /// Inlet on the left, outlet on the right, inert walls with a catalytic
    /// segment `(start, end)` on the bottom wall.
    pub fn channel(start: f64, end: f64) -> Self {
        Self {
            bottom: Region::Inert,
            right: Region::Outlet,
            top: Region::Inert,
            left: Region::Inlet,
            catalytic: Some(CatalyticSpan::bottom(start, end)),
        }
    }

    pub fn region(&self, side: Side) -> Region {
        match side {
            Side::Bottom => self.bottom,
            Side::Right => self.right,
            Side::Top => self.top,
            Side::Left => self.left,
        }
    }
}

/// An interior face of the Voronoi-box mesh, dual to the grid edge `from -> to`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteriorEdge {
    pub from: usize,
    pub to: usize,
    /// Length of the dual (box) face.
    pub face_measure: f64,
    /// Distance between the two nodes.
    pub distance: f64,
    /// Unit vector from `from` to `to`.
    pub normal: Point,
    /// Midpoint of the grid edge; lies on the dual face.
    pub midpoint: Point,
}

/// Uniform tensor-product grid on `(0, lx) x (0, ly)`.
#[derive(Clone, Debug)]
pub struct ChannelGrid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    level: Option<u32>,
    faces: Vec<BoundaryFace>,
    tagged: bool,
}

impl ChannelGrid {
    /// Grid with `10 * 2^level` nodes in each direction.
    pub fn build(level: u32, lx: f64, ly: f64) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::LevelTooLarge {
                level,
                max: MAX_LEVEL,
            });
        }
        let n = BASE_NODES << level;
        let mut grid = Self::new(n, n, lx, ly)?;
        grid.level = Some(level);
        Ok(grid)
    }

    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidDomain(format!(
                "need at least 2 nodes per direction, got {nx} x {ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "edge lengths must be positive, got {lx} x {ly}"
            )));
        }
        let mut grid = Self {
            nx,
            ny,
            lx,
            ly,
            level: None,
            faces: Vec::new(),
            tagged: false,
        };
        grid.faces = grid.boundary_faces_untagged();
        Ok(grid)
    }

    fn boundary_faces_untagged(&self) -> Vec<BoundaryFace> {
        let (nx, ny) = (self.nx, self.ny);
        let mut faces = Vec::with_capacity(2 * (nx - 1) + 2 * (ny - 1));
        for side in Side::ALL {
            let (count, length) = match side {
                Side::Bottom | Side::Top => (nx - 1, self.dx()),
                Side::Left | Side::Right => (ny - 1, self.dy()),
            };
            for k in 0..count {
                let nodes = match side {
                    Side::Bottom => [self.index(k, 0), self.index(k + 1, 0)],
                    Side::Top => [self.index(k, ny - 1), self.index(k + 1, ny - 1)],
                    Side::Left => [self.index(0, k), self.index(0, k + 1)],
                    Side::Right => [self.index(nx - 1, k), self.index(nx - 1, k + 1)],
                };
                faces.push(BoundaryFace {
                    nodes,
                    length,
                    normal: side.outward_normal(),
                    side,
                    region: Region::Inert,
                });
            }
        }
        faces
    }

    /// Assigns boundary regions according to `layout`.
    ///
    /// A face on the catalytic side is catalytic iff its overlap with the open
    /// span has positive length.
    pub fn tag_boundary(mut self, layout: &BoundaryLayout) -> Result<Self> {
        if let Some(span) = layout.catalytic {
            let side_len = self.side_length(span.side);
            if !(span.start < span.end && span.start >= 0.0 && span.end <= side_len) {
                return Err(Error::InvalidDomain(format!(
                    "catalytic span ({}, {}) is not inside (0, {side_len})",
                    span.start, span.end
                )));
            }
        }
        let tol = 1e-12 * self.lx.max(self.ly);
        let mut n_catalytic = 0;
        for f in 0..self.faces.len() {
            let side = self.faces[f].side;
            let mut region = layout.region(side);
            if let Some(span) = layout.catalytic {
                if span.side == side {
                    let (a, b) = self.face_interval(&self.faces[f]);
                    let overlap = b.min(span.end) - a.max(span.start);
                    if overlap > tol {
                        region = Region::Catalytic;
                    }
                }
            }
            if region == Region::Catalytic {
                n_catalytic += 1;
            }
            self.faces[f].region = region;
        }
        if let Some(span) = layout.catalytic {
            if n_catalytic == 0 {
                return Err(Error::EmptyCatalyticSet {
                    start: span.start,
                    end: span.end,
                });
            }
        }
        self.tagged = true;
        Ok(self)
    }

    fn face_interval(&self, face: &BoundaryFace) -> (f64, f64) {
        let axis = match face.side {
            Side::Bottom | Side::Top => 0,
            Side::Left | Side::Right => 1,
        };
        let a = self.coord(face.nodes[0])[axis];
        let b = self.coord(face.nodes[1])[axis];
        (a.min(b), a.max(b))
    }

    fn side_length(&self, side: Side) -> f64 {
        match side {
            Side::Bottom | Side::Top => self.lx,
            Side::Left | Side::Right => self.ly,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn level(&self) -> Option<u32> {
        self.level
    }

    pub fn is_tagged(&self) -> bool {
        self.tagged
    }

    pub fn dx(&self) -> f64 {
        self.lx / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / (self.ny - 1) as f64
    }

    /// Number of nodes, i.e. scalar unknowns per species.
    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    #[inline]
    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node % self.nx, node / self.nx)
    }

    /// Collocation point of the box owned by `node`.
    pub fn coord(&self, node: usize) -> Point {
        let (i, j) = self.ij(node);
        // The last node is pinned to the edge so corners are exact.
        let x = if i + 1 == self.nx { self.lx } else { i as f64 * self.dx() };
        let y = if j + 1 == self.ny { self.ly } else { j as f64 * self.dy() };
        [x, y]
    }

    fn box_width(n: usize, k: usize, h: f64) -> f64 {
        if k == 0 || k + 1 == n {
            0.5 * h
        } else {
            h
        }
    }

    /// Area of the Voronoi box of `node`.
    pub fn cell_measure(&self, node: usize) -> f64 {
        let (i, j) = self.ij(node);
        Self::box_width(self.nx, i, self.dx()) * Self::box_width(self.ny, j, self.dy())
    }

    pub fn node_coords(&self) -> Vec<Point> {
        (0..self.node_count()).map(|n| self.coord(n)).collect()
    }

    pub fn cell_measures(&self) -> Vec<f64> {
        (0..self.node_count()).map(|n| self.cell_measure(n)).collect()
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.faces
    }

    /// All interior dual faces, each listed once.
    pub fn interior_edges(&self) -> impl Iterator<Item = InteriorEdge> + '_ {
        let (dx, dy) = (self.dx(), self.dy());
        let horizontal = (0..self.ny).flat_map(move |j| {
            (0..self.nx - 1).map(move |i| {
                let (from, to) = (self.index(i, j), self.index(i + 1, j));
                let (a, b) = (self.coord(from), self.coord(to));
                InteriorEdge {
                    from,
                    to,
                    face_measure: Self::box_width(self.ny, j, dy),
                    distance: dx,
                    normal: [1.0, 0.0],
                    midpoint: [0.5 * (a[0] + b[0]), a[1]],
                }
            })
        });
        let vertical = (0..self.ny - 1).flat_map(move |j| {
            (0..self.nx).map(move |i| {
                let (from, to) = (self.index(i, j), self.index(i, j + 1));
                let (a, b) = (self.coord(from), self.coord(to));
                InteriorEdge {
                    from,
                    to,
                    face_measure: Self::box_width(self.nx, i, dx),
                    distance: dy,
                    normal: [0.0, 1.0],
                    midpoint: [a[0], 0.5 * (a[1] + b[1])],
                }
            })
        });
        horizontal.chain(vertical)
    }

    /// Half-faces of `region`: `(node, length, outward normal)` for each
    /// endpoint of each face in the region.
    pub fn boundary_portions(&self, region: Region) -> Vec<(usize, f64, Point)> {
        self.faces
            .iter()
            .filter(|f| f.region == region)
            .flat_map(|f| f.nodes.iter().map(move |&n| (n, 0.5 * f.length, f.normal)))
            .collect()
    }

    /// Nodes that are endpoints of inlet faces.
    pub fn dirichlet_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.node_count()];
        for f in self.faces.iter().filter(|f| f.region == Region::Inlet) {
            mask[f.nodes[0]] = true;
            mask[f.nodes[1]] = true;
        }
        mask
    }

    pub fn catalytic_index(&self) -> Result<CatalyticIndex> {
        if !self.tagged {
            return Err(Error::Untagged);
        }
        let mut sigma = std::collections::BTreeMap::new();
        for p in self.boundary_portions(Region::Catalytic) {
            *sigma.entry(p.0).or_insert(0.0) += p.1;
        }
        let mut nodes: Vec<usize> = sigma.keys().copied().collect();
        nodes.sort_by(|&a, &b| {
            let (pa, pb) = (self.coord(a), self.coord(b));
            pa[0].total_cmp(&pb[0]).then(pa[1].total_cmp(&pb[1]))
        });
        let sigma = nodes.iter().map(|n| sigma[n]).collect();
        Ok(CatalyticIndex { nodes, sigma })
    }

    pub fn summary(&self) -> Result<GridSummary> {
        Ok(GridSummary {
            level: self.level,
            nx: self.nx,
            ny: self.ny,
            dx: self.dx(),
            dy: self.dy(),
            catalytic_nodes: self.catalytic_index()?.len(),
        })
    }
}

/// The catalytic nodes `K_nl` and their boundary measures.
#[derive(Clone, Debug, PartialEq)]
pub struct CatalyticIndex {
    /// Node indices ordered along the boundary by (x, y).
    pub nodes: Vec<usize>,
    /// Half the total length of catalytic faces incident to each node.
    pub sigma: Vec<f64>,
}

impl CatalyticIndex {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_measure(&self) -> f64 {
        self.sigma.iter().sum()
    }
}

/// Compact description of a grid for the benchmark output.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSummary {
    pub level: Option<u32>,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub catalytic_nodes: usize,
}

impl GridSummary {
    pub const CSV_HEADER: &'static str = "level,nx,ny,dx,dy,catalytic_nodes";

    pub fn csv_row(&self) -> String {
        let level = self.level.map(|l| l.to_string()).unwrap_or_default();
        format!(
            "{level},{},{},{:e},{:e},{}",
            self.nx, self.ny, self.dx, self.dy, self.catalytic_nodes
        )
    }
}
