//! Conforming triangulations of rectangles and uniform red refinement.

use std::collections::HashMap;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::Point;

/// Area and constant P1 basis gradients of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    pub grad_basis: [Point; 3],
    pub centroid: Point,
}

impl ElementGeometry {
    pub fn from_vertices(a: Point, b: Point, c: Point) -> Self {
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let inv = 1.0 / det;
        let grad_basis = [
            [(b[1] - c[1]) * inv, (c[0] - b[0]) * inv],
            [(c[1] - a[1]) * inv, (a[0] - c[0]) * inv],
            [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv],
        ];
        ElementGeometry {
            area: 0.5 * det,
            grad_basis,
            centroid: [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0],
        }
    }

    /// Gradient of the P1 function with the given nodal values on this element.
    #[inline]
    pub fn gradient(&self, values: [f64; 3]) -> Point {
        let g = &self.grad_basis;
        [
            values[0] * g[0][0] + values[1] * g[1][0] + values[2] * g[2][0],
            values[0] * g[0][1] + values[1] * g[1][1] + values[2] * g[2][1],
        ]
    }
}

/// Compressed-row sparsity of the interior-vertex coupling graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteriorPattern {
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
}

impl InteriorPattern {
    /// Position of entry `(row, col)` in `col_indices`.
    #[inline]
    pub fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let start = self.row_offsets[row];
        let cols = &self.col_indices[start..self.row_offsets[row + 1]];
        cols.binary_search(&col).ok().map(|k| start + k)
    }
}

/// A conforming triangulation. Immutable once built.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    generation: u32,
    geometry: Vec<ElementGeometry>,
    interior_index: Vec<Option<usize>>,
    interior_vertices: Vec<usize>,
    pattern: InteriorPattern,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TriMesh {
    /// Builds a mesh from raw vertex and triangle lists. Boundary vertices are
    /// the endpoints of edges that belong to exactly one triangle.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, generation: u32) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        let nv = vertices.len();
        let mut edge_count: HashMap<(usize, usize), u32> = HashMap::with_capacity(3 * triangles.len());
        let mut geometry = Vec::with_capacity(triangles.len());
        for (k, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {k} references a missing vertex")));
            }
            let g = ElementGeometry::from_vertices(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(g.area > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {k} has nonpositive signed area {}",
                    g.area
                )));
            }
            geometry.push(g);
            for e in 0..3 {
                *edge_count.entry(edge_key(tri[e], tri[(e + 1) % 3])).or_insert(0) += 1;
            }
        }
        let mut boundary = vec![false; nv];
        for (&(a, b), &count) in &edge_count {
            match count {
                1 => {
                    boundary[a] = true;
                    boundary[b] = true;
                }
                2 => {}
                _ => {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({a}, {b}) is shared by {count} triangles"
                    )))
                }
            }
        }

        let mut interior_index = vec![None; nv];
        let mut interior_vertices = Vec::new();
        for v in 0..nv {
            if !boundary[v] {
                interior_index[v] = Some(interior_vertices.len());
                interior_vertices.push(v);
            }
        }

        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); interior_vertices.len()];
        for tri in &triangles {
            for &a in tri {
                if let Some(i) = interior_index[a] {
                    for &b in tri {
                        if let Some(j) = interior_index[b] {
                            rows[i].push(j);
                        }
                    }
                }
            }
        }
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            col_indices.extend(row);
            row_offsets.push(col_indices.len());
        }

        Ok(TriMesh {
            vertices,
            triangles,
            boundary,
            generation,
            geometry,
            interior_index,
            interior_vertices,
            pattern: InteriorPattern {
                row_offsets,
                col_indices,
            },
        })
    }

    /// An `n × n` grid of cells, each split along its lower-left to
    /// upper-right diagonal.
    pub fn structured_rectangle(xmin: f64, ymin: f64, xmax: f64, ymax: f64, n: usize) -> Result<Self> {
        if !(xmin < xmax && ymin < ymax) || n == 0 {
            return Err(Error::InvalidMesh(format!(
                "degenerate rectangle ({xmin}, {ymin})-({xmax}, {ymax}) with n = {n}"
            )));
        }
        let hx = (xmax - xmin) / n as f64;
        let hy = (ymax - ymin) / n as f64;
        let coord = |i: usize, lo: f64, hi: f64, h: f64| if i == n { hi } else { lo + i as f64 * h };
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([coord(i, xmin, xmax, hx), coord(j, ymin, ymax, hy)]);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Self::new(vertices, triangles, 0)
    }

    /// Red refinement: every triangle is split into four by its edge
    /// midpoints. Parent vertices keep their indices.
    pub fn refine_uniform(&self) -> Result<Self> {
        let mut vertices = self.vertices.clone();
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * self.triangles.len() / 2 + 1);
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            *midpoints.entry(edge_key(a, b)).or_insert_with(|| {
                let (pa, pb) = (vertices[a], vertices[b]);
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        Self::new(vertices, triangles, self.generation + 1)
    }

    pub fn element_geometry(&self, element: usize) -> Result<&ElementGeometry> {
        self.geometry.get(element).ok_or(Error::ElementOutOfRange {
            index: element,
            count: self.triangles.len(),
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn geometry(&self) -> &[ElementGeometry] {
        &self.geometry
    }

    pub fn is_boundary(&self, vertex: usize) -> bool {
        self.boundary[vertex]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_interior(&self) -> usize {
        self.interior_vertices.len()
    }

    /// Interior (unknown) index of a vertex, `None` on the boundary.
    #[inline]
    pub fn interior_index(&self, vertex: usize) -> Option<usize> {
        self.interior_index[vertex]
    }

    pub fn interior_vertices(&self) -> &[usize] {
        &self.interior_vertices
    }

    pub fn interior_pattern(&self) -> &InteriorPattern {
        &self.pattern
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    /// Longest edge over all triangles.
    pub fn max_edge_length(&self) -> f64 {
        let len = |a: Point, b: Point| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |e| (t[e], t[(e + 1) % 3])))
            .map(|(a, b)| len(self.vertices[a], self.vertices[b]))
            .fold(0.0, f64::max)
    }

    /// Plain-text export: a `vertices triangles` count line, then one
    /// `x y boundary_flag` line per vertex and one `i j k` line per triangle.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{} {}", self.vertices.len(), self.triangles.len())?;
        for (v, b) in self.vertices.iter().zip(&self.boundary) {
            writeln!(out, "{:.16e} {:.16e} {}", v[0], v[1], u8::from(*b))?;
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}
