use crate::error::{Error, Result};
use crate::tensor::TensorShape;

pub type Point = [f64; 3];

/// Axis-aligned voxelization of the monitored region. `dims[2] == 1` is a
/// planar region.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    dims: [usize; 3],
    edge: f64,
    origin: Point,
}

impl VoxelGrid {
    pub fn new(dims: [usize; 3], edge: f64, origin: Point) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::invalid(format!("grid dims must be positive, got {dims:?}")));
        }
        if !(edge > 0.0) || !edge.is_finite() {
            return Err(Error::invalid(format!("voxel edge must be positive, got {edge}")));
        }
        if origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid origin must be finite"));
        }
        Ok(VoxelGrid { dims, edge, origin })
    }

    /// Unit voxels with the origin at zero.
    pub fn unit(dims: [usize; 3]) -> Result<Self> {
        VoxelGrid::new(dims, 1.0, [0.0; 3])
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn edge(&self) -> f64 {
        self.edge
    }

    #[inline]
    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn is_planar(&self) -> bool {
        self.dims[2] == 1
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn lower(&self) -> Point {
        self.origin
    }

    pub fn upper(&self) -> Point {
        [0, 1, 2].map(|a| self.origin[a] + self.dims[a] as f64 * self.edge)
    }

    /// Flat spatial index of voxel `(n1, n2, n3)`, last index fastest.
    #[inline]
    pub fn voxel_index(&self, v: [usize; 3]) -> usize {
        (v[0] * self.dims[1] + v[1]) * self.dims[2] + v[2]
    }

    pub fn voxel_coords(&self, index: usize) -> [usize; 3] {
        let n3 = index % self.dims[2];
        let rest = index / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], n3]
    }

    /// Shape of a loss field over this grid and `intervals` time steps.
    /// Spatial axes 1 and 2 are always kept; the vertical and time axes
    /// appear only when longer than one.
    pub fn field_shape(&self, intervals: usize) -> Result<TensorShape> {
        if intervals == 0 {
            return Err(Error::invalid("need at least one time interval"));
        }
        let mut dims = vec![self.dims[0], self.dims[1]];
        if self.dims[2] > 1 {
            dims.push(self.dims[2]);
        }
        if intervals > 1 {
            dims.push(intervals);
        }
        TensorShape::new(&dims)
    }

    /// Bitmask of the bounding-box faces a point lies on:
    /// bit 0/1 = low/high x, 2/3 = low/high y, 4/5 = low/high z.
    /// `None` if the point is outside the box.
    pub fn faces_of(&self, p: Point) -> Option<u8> {
        let lo = self.lower();
        let hi = self.upper();
        let tol = 1e-9 * self.edge;
        let mut mask = 0u8;
        for a in 0..3 {
            if p[a] < lo[a] - tol || p[a] > hi[a] + tol {
                return None;
            }
            if (p[a] - lo[a]).abs() <= tol {
                mask |= 1 << (2 * a);
            }
            if (p[a] - hi[a]).abs() <= tol {
                mask |= 1 << (2 * a + 1);
            }
        }
        Some(mask)
    }
}

/// Wireless nodes on the boundary of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSet {
    positions: Vec<Point>,
    faces: Vec<u8>,
}

impl NodeSet {
    /// Validates that every position lies on the grid boundary and that no
    /// two positions coincide.
    pub fn new(grid: &VoxelGrid, positions: Vec<Point>) -> Result<Self> {
        let mut faces = Vec::with_capacity(positions.len());
        for (i, &p) in positions.iter().enumerate() {
            match grid.faces_of(p) {
                Some(mask) if mask != 0 => faces.push(mask),
                _ => {
                    return Err(Error::invalid(format!(
                        "node {i} at {p:?} is not on the region boundary"
                    )))
                }
            }
        }
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                if positions[i] == positions[j] {
                    return Err(Error::invalid(format!("nodes {i} and {j} coincide")));
                }
            }
        }
        Ok(NodeSet { positions, faces })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> Point {
        self.positions[i]
    }

    pub fn faces(&self, i: usize) -> u8 {
        self.faces[i]
    }

    /// True when the two nodes share a boundary face. Links between such
    /// nodes run along the boundary.
    pub fn same_side(&self, i: usize, j: usize) -> bool {
        self.faces[i] & self.faces[j] != 0
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance(self.positions[i], self.positions[j])
    }
}

pub fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// One transmitter/receiver pair measured in a given time interval
/// (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Link {
    pub tx: usize,
    pub rx: usize,
    pub interval: usize,
}

/// Evenly spaced nodes on the four lateral faces.
///
/// Planar grids get `count / 4` nodes per side at mid-height, spaced evenly
/// along the side (for one node per voxel edge they sit at the edge
/// midpoints). Volumetric grids get `count / 4` nodes per lateral face on a
/// `rows x cols` lattice; when the count matches the face's voxel count the
/// nodes sit at voxel-face centers. Nodes are ordered counter-clockwise:
/// `y = lo`, `x = hi`, `y = hi`, `x = lo`.
pub fn place_nodes(grid: &VoxelGrid, count: usize) -> Result<NodeSet> {
    if count < 4 || !count.is_multiple_of(4) {
        return Err(Error::invalid(format!(
            "node count must be a positive multiple of 4 (one share per lateral face), got {count}"
        )));
    }
    let per_face = count / 4;
    let [n1, n2, n3] = grid.dims();
    let lo = grid.lower();
    let hi = grid.upper();
    let e = grid.edge();

    // (horizontal voxel count, fixed axis, fixed value, running axis, reversed)
    let faces = [
        (n1, 1, lo[1], 0, false),
        (n2, 0, hi[0], 1, false),
        (n1, 1, hi[1], 0, true),
        (n2, 0, lo[0], 1, true),
    ];
    let mut positions = Vec::with_capacity(count);
    for (along_vox, fixed_axis, fixed_value, run_axis, reversed) in faces {
        let (rows, cols) = if n3 == 1 {
            (1, per_face)
        } else {
            face_lattice(per_face, along_vox, n3)
        };
        let along = along_vox as f64 * e;
        let height = n3 as f64 * e;
        for r in 0..rows {
            for c in 0..cols {
                let c = if reversed { cols - 1 - c } else { c };
                let mut p = [0.0; 3];
                p[fixed_axis] = fixed_value;
                p[run_axis] = lo[run_axis] + (c as f64 + 0.5) * along / cols as f64;
                p[2] = lo[2] + (r as f64 + 0.5) * height / rows as f64;
                positions.push(p);
            }
        }
    }
    NodeSet::new(grid, positions)
}

// rows x cols = k, preferring the exact voxel lattice and otherwise the
// factorization whose aspect ratio best matches the face.
fn face_lattice(k: usize, along: usize, height: usize) -> (usize, usize) {
    if k == along * height {
        return (height, along);
    }
    let target = (along as f64 / height as f64).ln();
    (1..=k)
        .filter(|r| k.is_multiple_of(*r))
        .map(|r| (r, k / r))
        .min_by(|a, b| {
            let da = ((a.1 as f64 / a.0 as f64).ln() - target).abs();
            let db = ((b.1 as f64 / b.0 as f64).ln() - target).abs();
            da.total_cmp(&db)
        })
        .expect("k >= 1 has a factorization")
}
