use std::collections::{HashMap, HashSet};

use crate::{Error, Result, Vec3};

use super::{angle_between, check_unit, dot, normalize};

/// Subdivision level of the default grid: `10 * 4^4 + 2 = 2562` directions.
pub const DEFAULT_GRID_LEVEL: u32 = 4;

/// Deepest supported subdivision (`10 * 4^9 + 2` points, about 2.6 million).
pub const MAX_GRID_LEVEL: u32 = 9;

/// Candidate directions of arrival: `Q` distinct unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    points: Vec<Vec3>,
}

const PHI: f64 = 1.618_033_988_749_895;

const ICOSAHEDRON_VERTICES: [Vec3; 12] = [
    [-1.0, PHI, 0.0],
    [1.0, PHI, 0.0],
    [-1.0, -PHI, 0.0],
    [1.0, -PHI, 0.0],
    [0.0, -1.0, PHI],
    [0.0, 1.0, PHI],
    [0.0, -1.0, -PHI],
    [0.0, 1.0, -PHI],
    [PHI, 0.0, -1.0],
    [PHI, 0.0, 1.0],
    [-PHI, 0.0, -1.0],
    [-PHI, 0.0, 1.0],
];

const ICOSAHEDRON_FACES: [[u32; 3]; 20] = [
    [0, 11, 5],
    [0, 5, 1],
    [0, 1, 7],
    [0, 7, 10],
    [0, 10, 11],
    [1, 5, 9],
    [5, 11, 4],
    [11, 10, 2],
    [10, 7, 6],
    [7, 1, 8],
    [3, 9, 4],
    [3, 4, 2],
    [3, 2, 6],
    [3, 6, 8],
    [3, 8, 9],
    [4, 9, 5],
    [2, 4, 11],
    [6, 2, 10],
    [8, 6, 7],
    [9, 8, 1],
];

impl ScanGrid {
    /// Geodesic grid from a recursively subdivided icosahedron.
    ///
    /// Each level splits every triangle into four at its edge midpoints and
    /// pushes the new vertices onto the unit sphere, giving `10 * 4^levels + 2`
    /// points. Level 4 yields the 2562-point grid.
    pub fn icosphere(levels: u32) -> Result<Self> {
        if levels > MAX_GRID_LEVEL {
            return Err(Error::GridTooLarge {
                level: levels,
                max: MAX_GRID_LEVEL,
            });
        }
        let mut points: Vec<Vec3> = ICOSAHEDRON_VERTICES.iter().map(|&v| normalize(v)).collect();
        let mut faces: Vec<[u32; 3]> = ICOSAHEDRON_FACES.to_vec();

        for _ in 0..levels {
            // an edge's midpoint is created once, keyed by its sorted endpoints
            let mut midpoints: HashMap<(u32, u32), u32> = HashMap::with_capacity(faces.len() * 3 / 2);
            let mut next = Vec::with_capacity(faces.len() * 4);
            for &[a, b, c] in &faces {
                let ab = midpoint(&mut points, &mut midpoints, a, b);
                let bc = midpoint(&mut points, &mut midpoints, b, c);
                let ca = midpoint(&mut points, &mut midpoints, c, a);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        Ok(ScanGrid { points })
    }

    /// The default 2562-point grid.
    pub fn default_grid() -> Self {
        Self::icosphere(DEFAULT_GRID_LEVEL).expect("default level is supported")
    }

    /// Wraps arbitrary points after checking the grid invariants.
    pub fn from_points(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("scan grid needs at least one point".into()));
        }
        let mut seen = HashSet::with_capacity(points.len());
        for (q, p) in points.iter().enumerate() {
            check_unit(*p).map_err(|e| Error::InvalidArgument(format!("grid point {q}: {e}")))?;
            let key = p.map(|v| (v + 0.0).to_bits());
            if !seen.insert(key) {
                return Err(Error::InvalidArgument(format!("grid point {q} is a duplicate")));
            }
        }
        Ok(ScanGrid { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn point(&self, q: usize) -> Vec3 {
        self.points[q]
    }

    /// Index of the grid point closest in angle to `direction` (lowest index on ties).
    pub fn nearest(&self, direction: Vec3) -> usize {
        let mut best = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (q, &p) in self.points.iter().enumerate() {
            let d = dot(p, direction);
            if d > best_dot {
                best_dot = d;
                best = q;
            }
        }
        best
    }

    /// For every point, the angle in radians to its closest neighbor.
    ///
    /// Quadratic in the grid size.
    pub fn nearest_neighbor_angles(&self) -> Vec<f64> {
        self.points
            .iter()
            .enumerate()
            .map(|(q, &p)| {
                let mut closest: Option<(f64, Vec3)> = None;
                for (r, &o) in self.points.iter().enumerate() {
                    let d = dot(p, o);
                    if r != q && closest.map_or(true, |(best, _)| d > best) {
                        closest = Some((d, o));
                    }
                }
                closest.map_or(std::f64::consts::PI, |(_, o)| angle_between(p, o))
            })
            .collect()
    }

    /// Mean nearest-neighbor angle, in radians.
    pub fn mean_spacing(&self) -> f64 {
        let angles = self.nearest_neighbor_angles();
        angles.iter().sum::<f64>() / angles.len() as f64
    }
}

fn midpoint(
    points: &mut Vec<Vec3>,
    cache: &mut HashMap<(u32, u32), u32>,
    a: u32,
    b: u32,
) -> u32 {
    let key = (a.min(b), a.max(b));
    *cache.entry(key).or_insert_with(|| {
        let (pa, pb) = (points[key.0 as usize], points[key.1 as usize]);
        points.push(normalize([
            0.5 * (pa[0] + pb[0]),
            0.5 * (pa[1] + pb[1]),
            0.5 * (pa[2] + pb[2]),
        ]));
        (points.len() - 1) as u32
    })
}
