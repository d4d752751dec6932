//! Boundary-fitted triangulations built from nested boundary rings.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{BoundaryPoint, ExteriorBallDomain, Shape};
use crate::{norm, sub, wrap, Error, Point, Result};

/// A P1 element with its area and the gradients of its nodal basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub v: [usize; 3],
    pub area: f64,
    pub grad: [Point; 3],
}

impl Element {
    fn new(v: [usize; 3], p: [Point; 3]) -> Element {
        let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let g = |a: Point, b: Point| [(a[1] - b[1]) / area2, (b[0] - a[0]) / area2];
        Element {
            v,
            area: 0.5 * area2,
            grad: [g(p[1], p[2]), g(p[2], p[0]), g(p[0], p[1])],
        }
    }

    /// Constant gradient of the P1 interpolant of `u`.
    pub fn gradient(&self, u: &[f64]) -> Point {
        let mut g = [0.0, 0.0];
        for k in 0..3 {
            g[0] += u[self.v[k]] * self.grad[k][0];
            g[1] += u[self.v[k]] * self.grad[k][1];
        }
        g
    }
}

/// Conforming triangulation; boundary vertices carry their boundary location.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<Option<BoundaryPoint>>,
    pub elements: Vec<Element>,
    /// Longest edge.
    pub h: f64,
    buckets: Buckets,
}

#[derive(Debug, Clone)]
struct Buckets {
    lo: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl Buckets {
    fn new(vertices: &[Point], triangles: &[[usize; 3]], h: f64) -> Buckets {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let cell = h.max(1e-12);
        let nx = (((hi[0] - lo[0]) / cell).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / cell).ceil() as usize).max(1);
        let mut cells = vec![Vec::new(); nx * ny];
        for (t, tri) in triangles.iter().enumerate() {
            let mut a = [f64::INFINITY; 2];
            let mut b = [f64::NEG_INFINITY; 2];
            for &v in tri {
                for k in 0..2 {
                    a[k] = a[k].min(vertices[v][k]);
                    b[k] = b[k].max(vertices[v][k]);
                }
            }
            let (i0, j0) = Self::index(lo, cell, nx, ny, a);
            let (i1, j1) = Self::index(lo, cell, nx, ny, b);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    cells[j * nx + i].push(t);
                }
            }
        }
        Buckets { lo, cell, nx, ny, cells }
    }

    fn index(lo: Point, cell: f64, nx: usize, ny: usize, x: Point) -> (usize, usize) {
        let i = ((x[0] - lo[0]) / cell).floor().max(0.0) as usize;
        let j = ((x[1] - lo[1]) / cell).floor().max(0.0) as usize;
        (i.min(nx - 1), j.min(ny - 1))
    }
}

impl Mesh {
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, boundary: Vec<Option<BoundaryPoint>>) -> Result<Mesh> {
        if boundary.len() != vertices.len() {
            return Err(Error::Meshing("boundary flags do not match the vertex count".into()));
        }
        let mut elements = Vec::with_capacity(triangles.len());
        let mut h: f64 = 0.0;
        for tri in &triangles {
            let p = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let e = Element::new(*tri, p);
            if !(e.area > 0.0) {
                return Err(Error::Meshing(format!("inverted or degenerate triangle {:?}", tri)));
            }
            for k in 0..3 {
                h = h.max(norm(sub(p[k], p[(k + 1) % 3])));
            }
            elements.push(e);
        }
        let buckets = Buckets::new(&vertices, &triangles, h);
        Ok(Mesh {
            vertices,
            triangles,
            boundary,
            elements,
            h,
            buckets,
        })
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v].is_some()
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary.iter().filter(|b| b.is_some()).count()
    }

    pub fn area(&self) -> f64 {
        self.elements.iter().map(|e| e.area).sum()
    }

    /// Rigid rotation about the origin; boundary tags are kept.
    pub fn rotated(&self, angle: f64) -> Result<Mesh> {
        let (s, c) = angle.sin_cos();
        let vertices = self.vertices.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect();
        Mesh::new(vertices, self.triangles.clone(), self.boundary.clone())
    }

    /// Barycentric coordinates of `x` in triangle `t`.
    pub fn barycentric(&self, t: usize, x: Point) -> [f64; 3] {
        let e = &self.elements[t];
        let p0 = self.vertices[e.v[0]];
        let d = sub(x, p0);
        let l1 = e.grad[1][0] * d[0] + e.grad[1][1] * d[1];
        let l2 = e.grad[2][0] * d[0] + e.grad[2][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }

    /// Triangle containing `x` (within `1e-12` in barycentric terms).
    pub fn locate(&self, x: Point) -> Option<usize> {
        let (t, lam) = self.nearest_element(x)?;
        if lam >= -1e-12 {
            Some(t)
        } else {
            None
        }
    }

    /// The element maximizing the smallest barycentric coordinate of `x`
    /// among the buckets around `x`.
    pub fn nearest_element(&self, x: Point) -> Option<(usize, f64)> {
        let b = &self.buckets;
        let (i, j) = Buckets::index(b.lo, b.cell, b.nx, b.ny, x);
        let mut best: Option<(usize, f64)> = None;
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                let (ii, jj) = (i as i64 + di, j as i64 + dj);
                if ii < 0 || jj < 0 || ii >= b.nx as i64 || jj >= b.ny as i64 {
                    continue;
                }
                for &t in &b.cells[jj as usize * b.nx + ii as usize] {
                    let lam = self.barycentric(t, x);
                    let m = lam[0].min(lam[1]).min(lam[2]);
                    if best.map_or(true, |(_, bm)| m > bm) {
                        best = Some((t, m));
                    }
                }
            }
        }
        best
    }

    /// P1 evaluation; points slightly outside the polygonal hull use the
    /// linear extension of the nearest element.
    pub fn evaluate(&self, u: &[f64], x: Point) -> Option<f64> {
        let (t, _) = self.nearest_element(x)?;
        let lam = self.barycentric(t, x);
        let v = self.elements[t].v;
        Some(lam[0] * u[v[0]] + lam[1] * u[v[1]] + lam[2] * u[v[2]])
    }
}

/// Quasi-uniform triangulation of `dom` with longest edge at most `h_target`.
///
/// Rings are scaled copies of the boundary (radial interpolation between
/// the two circles for the annulus) with arc-length equispaced points,
/// zipped pairwise; star-shaped domains get a central fan.
pub fn triangulate(dom: &ExteriorBallDomain, h_target: f64) -> Result<Mesh> {
    if !(h_target > 0.0 && h_target.is_finite()) {
        return Err(Error::Meshing("h_target must be positive".into()));
    }
    let mut kappa = 0.7;
    let mut last_h = f64::NAN;
    for _ in 0..40 {
        let mesh = build_rings(dom, kappa * h_target)?;
        if mesh.h <= h_target {
            return Ok(mesh);
        }
        last_h = mesh.h;
        kappa *= 0.85;
    }
    let single = build_rings(dom, f64::INFINITY)?;
    if single.h <= h_target {
        return Ok(single);
    }
    Err(Error::Meshing(format!("could not reach h = {h_target} (last h = {last_h})")))
}

fn ring_points(count: usize) -> usize {
    count.max(6)
}

fn build_rings(dom: &ExteriorBallDomain, spacing: f64) -> Result<Mesh> {
    let mut vertices: Vec<Point> = Vec::new();
    let mut boundary: Vec<Option<BoundaryPoint>> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut rings: Vec<(usize, usize)> = Vec::new(); // (start, count)

    match dom.shape() {
        Shape::Annulus { inner, outer } => {
            let (ri, ro) = (*inner, *outer);
            let nr = (((ro - ri) / spacing).ceil() as usize).max(1);
            for j in 0..=nr {
                let r = ri + (ro - ri) * j as f64 / nr as f64;
                let m = ring_points((TAU * r / spacing).ceil() as usize);
                let start = vertices.len();
                for i in 0..m {
                    let phi = TAU * i as f64 / m as f64;
                    let (s, c) = phi.sin_cos();
                    let tag = if j == 0 {
                        Some(BoundaryPoint {
                            component: 1,
                            s: wrap(-phi * ri, TAU * ri),
                        })
                    } else if j == nr {
                        Some(BoundaryPoint { component: 0, s: phi * ro })
                    } else {
                        None
                    };
                    let p = match tag {
                        Some(at) => dom.point(at),
                        None => [r * c, r * s],
                    };
                    vertices.push(p);
                    boundary.push(tag);
                }
                rings.push((start, m));
            }
        }
        _ => {
            let len = dom.component_length(0);
            let reach = dom.samples().iter().map(|s| norm(s.point)).fold(0.0, f64::max);
            let nr = ((reach / spacing).ceil() as usize).max(1);
            vertices.push([0.0, 0.0]);
            boundary.push(None);
            for j in 1..=nr {
                let sigma = j as f64 / nr as f64;
                let m = ring_points((sigma * len / spacing).ceil() as usize);
                let start = vertices.len();
                for i in 0..m {
                    let at = BoundaryPoint {
                        component: 0,
                        s: len * i as f64 / m as f64,
                    };
                    let p = dom.point(at);
                    if j == nr {
                        vertices.push(p);
                        boundary.push(Some(at));
                    } else {
                        vertices.push([sigma * p[0], sigma * p[1]]);
                        boundary.push(None);
                    }
                }
                rings.push((start, m));
            }
            let (s1, m1) = rings[0];
            for i in 0..m1 {
                triangles.push([0, s1 + i, s1 + (i + 1) % m1]);
            }
        }
    }
    for w in rings.windows(2) {
        zip_rings(w[0], w[1], &mut triangles);
    }
    Mesh::new(vertices, triangles, boundary)
}

/// Triangulates the band between an inner and an outer closed ring,
/// both counterclockwise and starting at the same angle.
fn zip_rings(inner: (usize, usize), outer: (usize, usize), out: &mut Vec<[usize; 3]>) {
    let (sa, ma) = inner;
    let (sb, mb) = outer;
    let (mut i, mut j) = (0usize, 0usize);
    while i < ma || j < mb {
        let a = sa + i % ma;
        let b = sb + j % mb;
        let advance_inner = if i == ma {
            false
        } else if j == mb {
            true
        } else {
            ((i + 1) as f64 / ma as f64) < ((j + 1) as f64 / mb as f64)
        };
        if advance_inner {
            out.push([a, b, sa + (i + 1) % ma]);
            i += 1;
        } else {
            out.push([a, b, sb + (j + 1) % mb]);
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;

    fn check_invariants(dom: &ExteriorBallDomain, mesh: &Mesh, h: f64) {
        assert!(mesh.h <= h);
        assert!(mesh.elements.iter().all(|e| e.area > 0.0));
        for (v, tag) in mesh.boundary.iter().enumerate() {
            if let Some(at) = tag {
                assert!(norm(sub(dom.point(*at), mesh.vertices[v])) < 1e-10);
            }
        }
        // conforming: every interior edge is shared by exactly two triangles
        let mut edges = std::collections::BTreeMap::new();
        for t in &mesh.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0usize) += 1;
            }
        }
        for (&(a, b), &count) in &edges {
            if mesh.is_boundary(a) && mesh.is_boundary(b) && count == 1 {
                continue;
            }
            assert_eq!(count, 2, "edge ({a}, {b})");
        }
        let area = dom.shape().area();
        assert!((mesh.area() - area).abs() < 0.05 * area);
    }

    #[test]
    fn disk_mesh() {
        let dom = ExteriorBallDomain::new(Shape::Disk { radius: 1.0 }, None).unwrap();
        let m = triangulate(&dom, 0.1).unwrap();
        check_invariants(&dom, &m, 0.1);
    }

    #[test]
    fn annulus_mesh_splits_boundary() {
        let dom = ExteriorBallDomain::new(Shape::Annulus { inner: 1.0, outer: 2.0 }, None).unwrap();
        let m = triangulate(&dom, 0.05).unwrap();
        check_invariants(&dom, &m, 0.05);
        let inner = m.boundary.iter().flatten().filter(|b| b.component == 1).count();
        let outer = m.boundary.iter().flatten().filter(|b| b.component == 0).count();
        assert!(inner > 100 && outer > inner);
    }

    #[test]
    fn ellipse_and_polygon_meshes() {
        let e = ExteriorBallDomain::new(Shape::Ellipse { a: 2.0, b: 1.0 }, None).unwrap();
        check_invariants(&e, &triangulate(&e, 0.15).unwrap(), 0.15);
        let p = ExteriorBallDomain::new(
            Shape::SmoothedPolygon {
                vertices: vec![[-1.0, -0.5], [1.0, -0.5], [0.0, 1.0]],
                rounding: 0.2,
            },
            None,
        )
        .unwrap();
        check_invariants(&p, &triangulate(&p, 0.1).unwrap(), 0.1);
    }

    #[test]
    fn coarse_request_gives_single_ring() {
        let dom = ExteriorBallDomain::new(Shape::Disk { radius: 1.0 }, None).unwrap();
        let m = triangulate(&dom, 10.0).unwrap();
        assert_eq!(m.vertices.len(), 1 + m.boundary_count());
    }

    #[test]
    fn evaluation_reproduces_linear_functions() {
        let dom = ExteriorBallDomain::new(Shape::Disk { radius: 1.0 }, None).unwrap();
        let m = triangulate(&dom, 0.2).unwrap();
        let u: Vec<f64> = m.vertices.iter().map(|p| 2.0 * p[0] - p[1] + 0.5).collect();
        for x in [[0.1, 0.2], [-0.5, 0.3], [0.0, -0.99]] {
            let v = m.evaluate(&u, x).unwrap();
            assert!((v - (2.0 * x[0] - x[1] + 0.5)).abs() < 1e-12);
        }
        for e in &m.elements {
            let g = e.gradient(&u);
            assert!((g[0] - 2.0).abs() < 1e-10 && (g[1] + 1.0).abs() < 1e-10);
        }
    }
}
