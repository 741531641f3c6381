//! Tetrahedral meshes, kinematic state, and the plain-text mesh format.
//!
//! Rest-state quantities (shape-matrix inverses, element volumes) are
//! precomputed once at construction; everything downstream treats the mesh
//! as immutable.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DVector, Matrix3, Vector3};

use crate::error::{Error, Result};

/// Tetrahedral mesh with precomputed rest-state quantities.
#[derive(Debug, Clone)]
pub struct TetMesh {
    /// Rest positions x_i.
    pub nodes: Vec<Vector3<f64>>,
    /// Four node indices per element.
    pub tets: Vec<[usize; 4]>,
    /// Per-element inverse of the rest shape matrix [x1-x0 | x2-x0 | x3-x0].
    pub rest_inverse: Vec<Matrix3<f64>>,
    /// Per-element rest volume, always positive.
    pub rest_volume: Vec<f64>,
}

impl TetMesh {
    /// Builds a mesh from raw nodes and connectivity, reorienting inverted
    /// tets (negative volume) by swapping two indices and precomputing
    /// rest-state quantities.
    ///
    /// Rejects out-of-range or repeated indices and tets whose volume is
    /// below `1e-14` times the bounding-box volume.
    pub fn new(nodes: Vec<Vector3<f64>>, mut tets: Vec<[usize; 4]>) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::Mesh("mesh has no nodes".into()));
        }
        let bbox_volume = {
            let mut lo = nodes[0];
            let mut hi = nodes[0];
            for p in &nodes {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
            let d = hi - lo;
            (d.x * d.y * d.z).abs()
        };
        let threshold = 1e-14 * bbox_volume.max(f64::MIN_POSITIVE);

        let mut rest_inverse = Vec::with_capacity(tets.len());
        let mut rest_volume = Vec::with_capacity(tets.len());
        for (e, tet) in tets.iter_mut().enumerate() {
            for &i in tet.iter() {
                if i >= n {
                    return Err(Error::Mesh(format!(
                        "tet {e} references node {i}, but mesh has {n} nodes"
                    )));
                }
            }
            for a in 0..4 {
                for b in (a + 1)..4 {
                    if tet[a] == tet[b] {
                        return Err(Error::Mesh(format!("tet {e} repeats node {}", tet[a])));
                    }
                }
            }
            let mut shape = shape_matrix(&nodes, tet);
            let mut vol = shape.determinant() / 6.0;
            if vol < 0.0 {
                tet.swap(2, 3);
                shape = shape_matrix(&nodes, tet);
                vol = shape.determinant() / 6.0;
            }
            if vol <= threshold {
                return Err(Error::DegenerateTet {
                    tet: e,
                    volume: vol,
                    threshold,
                });
            }
            let inv = shape
                .try_inverse()
                .ok_or_else(|| Error::Mesh(format!("tet {e} shape matrix is singular")))?;
            rest_inverse.push(inv);
            rest_volume.push(vol);
        }

        Ok(TetMesh {
            nodes,
            tets,
            rest_inverse,
            rest_volume,
        })
    }

    /// Node count.
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Degree-of-freedom count, 3 per node.
    pub fn num_dofs(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    /// Sum of element rest volumes.
    pub fn total_volume(&self) -> f64 {
        self.rest_volume.iter().sum()
    }

    /// Axis-aligned bounding box of the rest positions.
    pub fn bounding_box(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = self.nodes[0];
        let mut hi = self.nodes[0];
        for p in &self.nodes {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    /// Indices of nodes whose rest coordinate along `axis` is within `tol`
    /// of the mesh minimum (`min_side = true`) or maximum.
    pub fn face_nodes(&self, axis: usize, min_side: bool, tol: f64) -> Vec<usize> {
        let (lo, hi) = self.bounding_box();
        let target = if min_side { lo[axis] } else { hi[axis] };
        (0..self.num_nodes())
            .filter(|&i| (self.nodes[i][axis] - target).abs() <= tol)
            .collect()
    }
}

fn shape_matrix(nodes: &[Vector3<f64>], tet: &[usize; 4]) -> Matrix3<f64> {
    let p0 = nodes[tet[0]];
    Matrix3::from_columns(&[
        nodes[tet[1]] - p0,
        nodes[tet[2]] - p0,
        nodes[tet[3]] - p0,
    ])
}

/// Full-order kinematic state: displacement, velocity, step index.
#[derive(Debug, Clone)]
pub struct SimState {
    /// Nodal displacements, length 3n.
    pub u: DVector<f64>,
    /// Nodal velocities, length 3n.
    pub v: DVector<f64>,
    /// Time step index.
    pub step: usize,
    /// Step size h > 0.
    pub time_step_h: f64,
}

impl SimState {
    /// Rest state (zero displacement and velocity) for `mesh` at step 0.
    pub fn rest(mesh: &TetMesh, time_step_h: f64) -> Self {
        assert!(time_step_h > 0.0, "time step must be positive");
        SimState {
            u: DVector::zeros(mesh.num_dofs()),
            v: DVector::zeros(mesh.num_dofs()),
            step: 0,
            time_step_h,
        }
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.time_step_h
    }
}

/// Generates an axis-aligned bar of `(nx-1)(ny-1)(nz-1)` cubes of edge `dx`,
/// each cut into 6 tets (Kuhn split, uniform orientation). `nx`, `ny`, `nz`
/// are node counts per axis; node ordering is x-fastest lexicographic.
pub fn make_bar_mesh(nx: usize, ny: usize, nz: usize, dx: f64) -> Result<TetMesh> {
    if nx < 2 || ny < 2 || nz < 2 {
        return Err(Error::Mesh(format!(
            "bar needs at least 2 nodes per axis, got {nx}x{ny}x{nz}"
        )));
    }
    if dx <= 0.0 {
        return Err(Error::Mesh(format!("cell size must be positive, got {dx}")));
    }
    let idx = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    let mut nodes = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                nodes.push(Vector3::new(i as f64 * dx, j as f64 * dx, k as f64 * dx));
            }
        }
    }
    // Kuhn split: six tets around the main diagonal (c0, c7) of each cube.
    const KUHN: [[usize; 4]; 6] = [
        [0, 1, 3, 7],
        [0, 3, 2, 7],
        [0, 2, 6, 7],
        [0, 6, 4, 7],
        [0, 4, 5, 7],
        [0, 5, 1, 7],
    ];
    let mut tets = Vec::with_capacity((nx - 1) * (ny - 1) * (nz - 1) * 6);
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let c = [
                    idx(i, j, k),
                    idx(i + 1, j, k),
                    idx(i, j + 1, k),
                    idx(i + 1, j + 1, k),
                    idx(i, j, k + 1),
                    idx(i + 1, j, k + 1),
                    idx(i, j + 1, k + 1),
                    idx(i + 1, j + 1, k + 1),
                ];
                for t in &KUHN {
                    tets.push([c[t[0]], c[t[1]], c[t[2]], c[t[3]]]);
                }
            }
        }
    }
    TetMesh::new(nodes, tets)
}

/// Reads the plain-text mesh format (see [`save_mesh`]).
pub fn load_mesh(path: &Path) -> Result<TetMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text, path)
}

fn parse_mesh(text: &str, path: &Path) -> Result<TetMesh> {
    let mut lines = text.lines().enumerate();
    let perr = |line: usize, msg: &str| Error::parse(path, line + 1, msg);

    let (lno, header) = lines
        .next()
        .ok_or_else(|| perr(0, "empty file, expected `nodes <n>`"))?;
    let n: usize = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["nodes", count] => count
            .parse()
            .map_err(|_| perr(lno, "invalid node count"))?,
        _ => return Err(perr(lno, "expected `nodes <n>`")),
    };
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let (lno, line) = lines
            .next()
            .ok_or_else(|| perr(0, "unexpected end of file in node block"))?;
        let mut it = line.split_whitespace().map(str::parse::<f64>);
        let mut next = || -> Result<f64> {
            it.next()
                .ok_or_else(|| perr(lno, "expected 3 coordinates"))?
                .map_err(|_| perr(lno, "invalid coordinate"))
        };
        nodes.push(Vector3::new(next()?, next()?, next()?));
    }
    let (lno, header) = lines
        .next()
        .ok_or_else(|| perr(0, "missing `tets <m>` header"))?;
    let m: usize = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["tets", count] => count.parse().map_err(|_| perr(lno, "invalid tet count"))?,
        _ => return Err(perr(lno, "expected `tets <m>`")),
    };
    let mut tets = Vec::with_capacity(m);
    for _ in 0..m {
        let (lno, line) = lines
            .next()
            .ok_or_else(|| perr(0, "unexpected end of file in tet block"))?;
        let mut it = line.split_whitespace().map(str::parse::<usize>);
        let mut next = || -> Result<usize> {
            it.next()
                .ok_or_else(|| perr(lno, "expected 4 indices"))?
                .map_err(|_| perr(lno, "invalid node index"))
        };
        tets.push([next()?, next()?, next()?, next()?]);
    }
    TetMesh::new(nodes, tets)
}

/// Writes the plain-text mesh format: `nodes <n>` then one `x y z` per line,
/// `tets <m>` then one `i0 i1 i2 i3` per line. Floats carry 17 significant
/// digits so coordinates round-trip bit-exactly.
pub fn save_mesh(mesh: &TetMesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "nodes {}", mesh.num_nodes());
    for p in &mesh.nodes {
        let _ = writeln!(out, "{} {} {}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z));
    }
    let _ = writeln!(out, "tets {}", mesh.num_tets());
    for t in &mesh.tets {
        let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn regular_tet() -> TetMesh {
        // Unit-edge regular tetrahedron.
        let s3 = 3f64.sqrt();
        let nodes = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.5, s3 / 2.0, 0.0),
            Vector3::new(0.5, s3 / 6.0, (2f64 / 3.0).sqrt()),
        ];
        TetMesh::new(nodes, vec![[0, 1, 2, 3]]).unwrap()
    }

    #[test]
    fn regular_tet_volume() {
        let mesh = regular_tet();
        assert_eq!(mesh.num_nodes(), 4);
        assert_eq!(mesh.num_tets(), 1);
        // Analytic volume of a unit-edge regular tet is sqrt(2)/12; the
        // determinant oracle must agree.
        let analytic = 2f64.sqrt() / 12.0;
        assert_relative_eq!(mesh.rest_volume[0], analytic, max_relative = 1e-12);
        let det_oracle = shape_matrix(&mesh.nodes, &mesh.tets[0]).determinant() / 6.0;
        assert_relative_eq!(mesh.rest_volume[0], det_oracle, max_relative = 1e-15);
    }

    #[test]
    fn cube_five_tets_volume_partitions() {
        let nodes = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(1.0, 0.0, 1.0),
            Vector3::new(0.0, 1.0, 1.0),
            Vector3::new(1.0, 1.0, 1.0),
        ];
        // Classic 5-tet split: central tet plus four corners.
        let tets = vec![
            [0, 1, 2, 4],
            [1, 3, 2, 7],
            [1, 5, 4, 7],
            [2, 6, 4, 7],
            [1, 2, 4, 7],
        ];
        let mesh = TetMesh::new(nodes, tets).unwrap();
        assert_relative_eq!(mesh.total_volume(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn out_of_range_index_rejected() {
        let nodes = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
        ];
        let err = TetMesh::new(nodes, vec![[0, 1, 2, 4]]).unwrap_err();
        assert!(matches!(err, Error::Mesh(_)), "got {err:?}");
    }

    #[test]
    fn degenerate_tet_rejected() {
        let nodes = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.5, 0.5, 0.0), // coplanar
            Vector3::new(0.0, 0.0, 1.0),
        ];
        let err = TetMesh::new(nodes, vec![[0, 1, 2, 3]]).unwrap_err();
        assert!(matches!(err, Error::DegenerateTet { .. }), "got {err:?}");
    }

    #[test]
    fn inverted_tet_reoriented() {
        let nodes = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
        ];
        // [0,1,3,2] has negative orientation; loader must fix it.
        let mesh = TetMesh::new(nodes, vec![[0, 1, 3, 2]]).unwrap();
        assert!(mesh.rest_volume[0] > 0.0);
        assert_relative_eq!(mesh.rest_volume[0], 1.0 / 6.0, max_relative = 1e-12);
    }

    #[test]
    fn rest_inverse_is_inverse() {
        let mesh = make_bar_mesh(3, 2, 2, 0.5).unwrap();
        for e in 0..mesh.num_tets() {
            let prod = mesh.rest_inverse[e] * shape_matrix(&mesh.nodes, &mesh.tets[e]);
            assert!((prod - Matrix3::identity()).abs().max() < 1e-12);
        }
    }

    #[test]
    fn bar_mesh_counts_and_volume() {
        let m = make_bar_mesh(2, 2, 2, 1.0).unwrap();
        assert_eq!(m.num_nodes(), 8);
        assert_eq!(m.num_tets(), 6);
        assert_relative_eq!(m.total_volume(), 1.0, max_relative = 1e-10);

        let m = make_bar_mesh(3, 2, 2, 0.5).unwrap();
        assert_relative_eq!(m.total_volume(), 0.25, max_relative = 1e-10);

        let m = make_bar_mesh(4, 3, 3, 1.0).unwrap();
        assert_eq!(m.num_nodes(), 36);
        assert_relative_eq!(m.total_volume(), 12.0, max_relative = 1e-10);
    }

    #[test]
    fn mesh_roundtrip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bar.mesh");
        let mesh = make_bar_mesh(3, 3, 2, 0.1).unwrap(); // 0.1 is not exactly representable
        save_mesh(&mesh, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(mesh.num_nodes(), back.num_nodes());
        assert_eq!(mesh.tets, back.tets);
        for (a, b) in mesh.nodes.iter().zip(back.nodes.iter()) {
            for c in 0..3 {
                assert_eq!(a[c].to_bits(), b[c].to_bits());
            }
        }
    }
}
