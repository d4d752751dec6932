//! Planar domains satisfying a uniform exterior ball condition, their
//! boundary data and the local boundary-graph constants at a boundary point.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

#[allow(unused_imports)]
use num_traits::Float;

use crate::quadrature::gk15_value;
use crate::{add, dot, norm, scale, sub, wrap, Error, Point, Result};

/// Boundary samples per unit of arc length.
pub const SAMPLES_PER_UNIT: f64 = 2048.0;
/// Safety factor applied to the sampled distance constant `M*`.
pub const MSTAR_SAFETY: f64 = 1.1;

const ELLIPSE_TABLE: usize = 2048;

/// Supported shapes, all centred at the origin.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Disk { radius: f64 },
    Annulus { inner: f64, outer: f64 },
    Ellipse { a: f64, b: f64 },
    /// Minkowski sum of a convex polygon (vertices counterclockwise) and a
    /// disk of radius `rounding`.
    SmoothedPolygon { vertices: Vec<Point>, rounding: f64 },
}

impl Shape {
    pub fn is_convex(&self) -> bool {
        !matches!(self, Shape::Annulus { .. })
    }

    /// Largest admissible uniform exterior-ball radius suggested by curvature.
    pub fn default_r0(&self) -> f64 {
        match self {
            Shape::Disk { radius } => *radius,
            Shape::Annulus { inner, .. } => 0.5 * inner,
            Shape::Ellipse { a, b } => {
                let (big, small) = if a >= b { (*a, *b) } else { (*b, *a) };
                small * small / big
            }
            Shape::SmoothedPolygon { rounding, .. } => *rounding,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Shape::Disk { radius } => 2.0 * radius,
            Shape::Annulus { outer, .. } => 2.0 * outer,
            Shape::Ellipse { a, b } => 2.0 * a.max(*b),
            Shape::SmoothedPolygon { vertices, rounding } => {
                let mut d: f64 = 0.0;
                for p in vertices {
                    for q in vertices {
                        d = d.max(norm(sub(*p, *q)));
                    }
                }
                d + 2.0 * rounding
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Shape::Disk { radius } => PI * radius * radius,
            Shape::Annulus { inner, outer } => PI * (outer * outer - inner * inner),
            Shape::Ellipse { a, b } => PI * a * b,
            Shape::SmoothedPolygon { vertices, rounding } => {
                let n = vertices.len();
                let mut area2 = 0.0;
                let mut perimeter = 0.0;
                for i in 0..n {
                    let (p, q) = (vertices[i], vertices[(i + 1) % n]);
                    area2 += p[0] * q[1] - p[1] * q[0];
                    perimeter += norm(sub(q, p));
                }
                0.5 * area2 + perimeter * rounding + PI * rounding * rounding
            }
        }
    }

    /// Membership in the closed domain.
    pub fn contains(&self, x: Point) -> bool {
        match self {
            Shape::Disk { radius } => norm(x) <= *radius,
            Shape::Annulus { inner, outer } => {
                let r = norm(x);
                r >= *inner && r <= *outer
            }
            Shape::Ellipse { a, b } => (x[0] / a).powi(2) + (x[1] / b).powi(2) <= 1.0,
            Shape::SmoothedPolygon { vertices, rounding } => polygon_distance(vertices, x) <= *rounding,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, "must be positive and finite"))
            }
        };
        match self {
            Shape::Disk { radius } => positive("radius", *radius),
            Shape::Annulus { inner, outer } => {
                positive("inner", *inner)?;
                positive("outer", *outer)?;
                if inner >= outer {
                    return Err(Error::param("inner", "must be smaller than the outer radius"));
                }
                Ok(())
            }
            Shape::Ellipse { a, b } => {
                positive("a", *a)?;
                positive("b", *b)
            }
            Shape::SmoothedPolygon { vertices, rounding } => {
                positive("rounding", *rounding)?;
                if vertices.len() < 3 {
                    return Err(Error::param("vertices", "need at least three vertices"));
                }
                let n = vertices.len();
                for i in 0..n {
                    let (p, q, r) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
                    if cross(sub(q, p), sub(r, q)) <= 0.0 {
                        return Err(Error::param("vertices", "polygon must be strictly convex and counterclockwise"));
                    }
                }
                if polygon_distance(vertices, [0.0, 0.0]) > 0.0 {
                    return Err(Error::param("vertices", "polygon must contain the origin"));
                }
                Ok(())
            }
        }
    }
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn polygon_distance(vertices: &[Point], x: Point) -> f64 {
    let n = vertices.len();
    let inside = (0..n).all(|i| cross(sub(vertices[(i + 1) % n], vertices[i]), sub(x, vertices[i])) >= 0.0);
    if inside {
        return 0.0;
    }
    (0..n)
        .map(|i| segment_distance(vertices[i], vertices[(i + 1) % n], x))
        .fold(f64::INFINITY, f64::min)
}

fn segment_distance(p: Point, q: Point, x: Point) -> f64 {
    let e = sub(q, p);
    let t = (dot(sub(x, p), e) / dot(e, e)).clamp(0.0, 1.0);
    norm(sub(x, add(p, scale(e, t))))
}

#[derive(Debug, Clone)]
enum Curve {
    Circle { radius: f64, clockwise: bool },
    Ellipse { a: f64, b: f64, theta: Vec<f64>, arc: Vec<f64> },
    Rounded { pieces: Vec<Piece>, offsets: Vec<f64> },
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    Segment { start: Point, dir: Point, length: f64 },
    Arc { center: Point, radius: f64, phi0: f64, turn: f64 },
}

impl Piece {
    fn length(&self) -> f64 {
        match *self {
            Piece::Segment { length, .. } => length,
            Piece::Arc { radius, turn, .. } => radius * turn,
        }
    }

    fn eval(&self, s: f64) -> (Point, Point) {
        match *self {
            Piece::Segment { start, dir, .. } => (add(start, scale(dir, s)), dir),
            Piece::Arc { center, radius, phi0, .. } => {
                let phi = phi0 + s / radius;
                let (sn, cs) = phi.sin_cos();
                ([center[0] + radius * cs, center[1] + radius * sn], [-sn, cs])
            }
        }
    }
}

fn ellipse_speed(a: f64, b: f64, t: f64) -> f64 {
    let (sn, cs) = t.sin_cos();
    (a * sn).hypot(b * cs)
}

impl Curve {
    fn ellipse(a: f64, b: f64) -> Curve {
        let mut theta = Vec::with_capacity(ELLIPSE_TABLE + 1);
        let mut arc = Vec::with_capacity(ELLIPSE_TABLE + 1);
        let mut acc = 0.0;
        for i in 0..=ELLIPSE_TABLE {
            let t = TAU * i as f64 / ELLIPSE_TABLE as f64;
            if i > 0 {
                let t_prev = theta[i - 1];
                acc += gk15_value(&|u| ellipse_speed(a, b, u), t_prev, t);
            }
            theta.push(t);
            arc.push(acc);
        }
        Curve::Ellipse { a, b, theta, arc }
    }

    fn rounded(vertices: &[Point], rounding: f64) -> Curve {
        let n = vertices.len();
        let mut pieces = Vec::with_capacity(2 * n);
        let normal = |i: usize| {
            let e = sub(vertices[(i + 1) % n], vertices[i]);
            let l = norm(e);
            [e[1] / l, -e[0] / l]
        };
        for i in 0..n {
            let p = vertices[i];
            let q = vertices[(i + 1) % n];
            let e = sub(q, p);
            let length = norm(e);
            let ni = normal(i);
            pieces.push(Piece::Segment {
                start: add(p, scale(ni, rounding)),
                dir: scale(e, 1.0 / length),
                length,
            });
            let nj = normal((i + 1) % n);
            let phi0 = ni[1].atan2(ni[0]);
            let mut turn = nj[1].atan2(nj[0]) - phi0;
            while turn <= 0.0 {
                turn += TAU;
            }
            pieces.push(Piece::Arc {
                center: q,
                radius: rounding,
                phi0,
                turn,
            });
        }
        let mut offsets = Vec::with_capacity(pieces.len() + 1);
        let mut acc = 0.0;
        offsets.push(0.0);
        for p in &pieces {
            acc += p.length();
            offsets.push(acc);
        }
        Curve::Rounded { pieces, offsets }
    }

    fn length(&self) -> f64 {
        match self {
            Curve::Circle { radius, .. } => TAU * radius,
            Curve::Ellipse { arc, .. } => arc[arc.len() - 1],
            Curve::Rounded { offsets, .. } => offsets[offsets.len() - 1],
        }
    }

    /// Point and unit tangent (domain on the left) at arc length `s`.
    fn eval(&self, s: f64) -> (Point, Point) {
        let len = self.length();
        let s = wrap(s, len);
        match self {
            Curve::Circle { radius, clockwise } => {
                let phi = s / radius;
                let (sn, cs) = phi.sin_cos();
                if *clockwise {
                    ([radius * cs, -radius * sn], [-sn, -cs])
                } else {
                    ([radius * cs, radius * sn], [-sn, cs])
                }
            }
            Curve::Ellipse { a, b, theta, arc } => {
                let i = match arc.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
                    Ok(i) => i.min(ELLIPSE_TABLE - 1),
                    Err(i) => i.saturating_sub(1).min(ELLIPSE_TABLE - 1),
                };
                let (t_lo, t_hi) = (theta[i], theta[i + 1]);
                let target = s - arc[i];
                let mut t = t_lo + (t_hi - t_lo) * target / (arc[i + 1] - arc[i]);
                for _ in 0..8 {
                    let r = gk15_value(&|u| ellipse_speed(*a, *b, u), t_lo, t) - target;
                    let step = r / ellipse_speed(*a, *b, t);
                    t -= step;
                    if step.abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
                        break;
                    }
                }
                let (sn, cs) = t.sin_cos();
                let tangent = [-a * sn, b * cs];
                let l = norm(tangent);
                ([a * cs, b * sn], [tangent[0] / l, tangent[1] / l])
            }
            Curve::Rounded { pieces, offsets } => {
                let i = match offsets.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
                    Ok(i) => i.min(pieces.len() - 1),
                    Err(i) => i.saturating_sub(1).min(pieces.len() - 1),
                };
                pieces[i].eval(s - offsets[i])
            }
        }
    }
}

/// A boundary location: component index and arc length along it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub component: usize,
    pub s: f64,
}

/// A sampled boundary point with its outward unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub at: BoundaryPoint,
    pub point: Point,
    pub normal: Point,
}

/// A domain with a uniform exterior-ball radius `r0`.
#[derive(Debug, Clone)]
pub struct ExteriorBallDomain {
    shape: Shape,
    r0: f64,
    curves: Vec<Curve>,
    samples: Vec<BoundarySample>,
}

impl ExteriorBallDomain {
    /// Builds the domain; `r0 = None` selects [`Shape::default_r0`].
    pub fn new(shape: Shape, r0: Option<f64>) -> Result<Self> {
        shape.validate()?;
        let r0 = r0.unwrap_or_else(|| shape.default_r0());
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::param("r0", "must be positive and finite"));
        }
        let curves = match &shape {
            Shape::Disk { radius } => vec![Curve::Circle { radius: *radius, clockwise: false }],
            Shape::Annulus { inner, outer } => {
                if r0 >= *inner {
                    return Err(Error::param("r0", "must be smaller than the inner radius of the annulus"));
                }
                vec![
                    Curve::Circle { radius: *outer, clockwise: false },
                    Curve::Circle { radius: *inner, clockwise: true },
                ]
            }
            Shape::Ellipse { a, b } => vec![Curve::ellipse(*a, *b)],
            Shape::SmoothedPolygon { vertices, rounding } => vec![Curve::rounded(vertices, *rounding)],
        };
        let mut dom = ExteriorBallDomain {
            shape,
            r0,
            curves,
            samples: Vec::new(),
        };
        let mut samples = Vec::new();
        for (c, curve) in dom.curves.iter().enumerate() {
            let len = curve.length();
            let n = ((len * SAMPLES_PER_UNIT).ceil() as usize).max(256);
            for i in 0..n {
                let at = BoundaryPoint {
                    component: c,
                    s: len * i as f64 / n as f64,
                };
                let (point, t) = curve.eval(at.s);
                samples.push(BoundarySample {
                    at,
                    point,
                    normal: [t[1], -t[0]],
                });
            }
        }
        dom.samples = samples;
        Ok(dom)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// Spatial dimension; only planar domains are represented.
    pub fn dim(&self) -> usize {
        2
    }

    pub fn diameter(&self) -> f64 {
        self.shape.diameter()
    }

    pub fn components(&self) -> usize {
        self.curves.len()
    }

    pub fn component_length(&self, component: usize) -> f64 {
        self.curves[component].length()
    }

    pub fn total_length(&self) -> f64 {
        self.curves.iter().map(Curve::length).sum()
    }

    pub fn samples(&self) -> &[BoundarySample] {
        &self.samples
    }

    pub fn contains(&self, x: Point) -> bool {
        self.shape.contains(x)
    }

    /// Point and unit tangent (domain on the left).
    pub fn eval(&self, at: BoundaryPoint) -> (Point, Point) {
        self.curves[at.component].eval(at.s)
    }

    pub fn point(&self, at: BoundaryPoint) -> Point {
        self.eval(at).0
    }

    /// Outward unit normal.
    pub fn normal(&self, at: BoundaryPoint) -> Point {
        let t = self.eval(at).1;
        [t[1], -t[0]]
    }

    /// Boundary point at fraction `t ∈ [0, 1)` of the total boundary length,
    /// components taken in order (outer first).
    pub fn at_fraction(&self, t: f64) -> Result<BoundaryPoint> {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::param("t", "boundary parameter must lie in [0, 1)"));
        }
        let mut s = t * self.total_length();
        for (c, curve) in self.curves.iter().enumerate() {
            let len = curve.length();
            if s < len || c + 1 == self.curves.len() {
                return Ok(BoundaryPoint { component: c, s: s.min(len) });
            }
            s -= len;
        }
        unreachable!()
    }

    /// Boundary point closest to `x`; errors when `x` is farther than `tol` from the boundary.
    pub fn locate(&self, x: Point, tol: f64) -> Result<BoundaryPoint> {
        let nearest = self
            .samples
            .iter()
            .min_by(|p, q| norm(sub(p.point, x)).partial_cmp(&norm(sub(q.point, x))).unwrap())
            .expect("samples are nonempty");
        let curve = &self.curves[nearest.at.component];
        let h = 2.0 / SAMPLES_PER_UNIT;
        let (mut lo, mut hi) = (nearest.at.s - h, nearest.at.s + h);
        let dist = |s: f64| norm(sub(curve.eval(s).0, x));
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if dist(m1) <= dist(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let s = wrap(0.5 * (lo + hi), curve.length());
        let d = dist(s);
        if d > tol {
            return Err(Error::param("x0", format!("point is {d:.3e} away from the boundary")));
        }
        Ok(BoundaryPoint {
            component: nearest.at.component,
            s,
        })
    }

    /// Center of the exterior ball at `at`, with the rigid frame mapping the
    /// center to the origin and the boundary point to `(0, -r0)`.
    ///
    /// Every boundary sample other than the touching point must lie outside
    /// the open ball.
    pub fn exterior_ball_center(&self, at: BoundaryPoint) -> Result<LocalFrame> {
        let (x0, t) = self.eval(at);
        let normal = [t[1], -t[0]];
        let center = add(x0, scale(normal, self.r0));
        let tol = 1e-12 * (self.r0 + norm(center));
        if self.shape.contains(center) {
            return Err(Error::ExteriorBallViolation { x0, witness: center });
        }
        for smp in &self.samples {
            if norm(sub(smp.point, x0)) <= tol {
                continue;
            }
            if norm(sub(smp.point, center)) < self.r0 - tol {
                return Err(Error::ExteriorBallViolation { x0, witness: smp.point });
            }
        }
        Ok(LocalFrame {
            at,
            x0,
            center,
            normal,
            r0: self.r0,
        })
    }

    /// Runs [`Self::exterior_ball_center`] at `count` equispaced boundary points.
    pub fn verify_exterior_ball(&self, count: usize) -> Result<()> {
        for i in 0..count {
            let at = self.at_fraction(i as f64 / count as f64)?;
            self.exterior_ball_center(at)?;
        }
        Ok(())
    }

    /// Local graph representation of the boundary around `at`.
    pub fn local_graph(&self, at: BoundaryPoint) -> Result<LocalGraph> {
        let frame = self.exterior_ball_center(at)?;
        let curve = &self.curves[at.component];
        let len = curve.length();
        let step = (1.0 / SAMPLES_PER_UNIT).min(self.r0 / 64.0);
        let max_steps = ((0.5 * len) / step) as usize;

        // walk in both directions while the boundary stays a graph with slope at most one
        let walk = |dir: f64| -> (Vec<GraphSample>, f64) {
            let mut out = Vec::new();
            let mut last_x = 0.0;
            let mut reach = 0.0;
            for k in 1..=max_steps {
                let ds = dir * step * k as f64;
                let (p, t) = curve.eval(at.s + ds);
                let lp = frame.to_local(p);
                let lt = frame.vector_to_local(t);
                if lt[0].abs() < 1e-300 {
                    break;
                }
                let slope = lt[1] / lt[0];
                let monotone = (lp[0] - last_x) * (-dir) > 0.0;
                if !monotone || slope.abs() > 1.0 {
                    break;
                }
                if lp[0].abs() > self.r0 {
                    reach = self.r0;
                    out.push(GraphSample { ds, x: lp, slope });
                    break;
                }
                reach = lp[0].abs();
                last_x = lp[0];
                out.push(GraphSample { ds, x: lp, slope });
            }
            (out, reach)
        };
        let (fwd, reach_f) = walk(1.0);
        let (bwd, reach_b) = walk(-1.0);
        let l = reach_f.min(reach_b).min(self.r0);
        if !(l > 1e-6 * self.r0) {
            return Err(Error::PatchTooSmall { half_width: l });
        }
        let span = (
            fwd.last().map(|g| g.ds).unwrap_or(0.0),
            bwd.last().map(|g| g.ds).unwrap_or(0.0),
        );
        let mut graph: Vec<GraphSample> = bwd.into_iter().rev().collect();
        graph.push(GraphSample {
            ds: 0.0,
            x: frame.to_local(frame.x0),
            slope: 0.0,
        });
        graph.extend(fwd);
        // local x' decreases with arc length; store ascending in x'
        graph.reverse();
        let n_lip = graph
            .iter()
            .filter(|g| g.x[0].abs() <= l)
            .map(|g| g.slope.abs())
            .fold(0.0, f64::max);

        let mut lg = LocalGraph {
            frame,
            l,
            l_d: self.r0,
            n_lip,
            samples: graph,
            curve: curve.clone(),
        };

        // vertical clearance to every other part of the boundary
        let mut clearance = f64::INFINITY;
        for smp in &self.samples {
            if smp.at.component == at.component {
                let mut d = smp.at.s - at.s;
                if d > 0.5 * len {
                    d -= len;
                } else if d < -0.5 * len {
                    d += len;
                }
                if d >= span.1 - step && d <= span.0 + step {
                    continue;
                }
            }
            let p = lg.frame.to_local(smp.point);
            if p[0].abs() < l {
                clearance = clearance.min((p[1] - lg.f(p[0])).abs());
            }
        }
        lg.l_d = self.r0.min(0.5 * clearance);
        Ok(lg)
    }
}

/// Rigid frame at a boundary point: the exterior-ball center goes to the
/// origin and the outward normal to `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub at: BoundaryPoint,
    pub x0: Point,
    pub center: Point,
    pub normal: Point,
    pub r0: f64,
}

impl LocalFrame {
    pub fn vector_to_local(&self, v: Point) -> Point {
        let n = self.normal;
        [n[1] * v[0] - n[0] * v[1], n[0] * v[0] + n[1] * v[1]]
    }

    pub fn vector_to_global(&self, v: Point) -> Point {
        let n = self.normal;
        [n[1] * v[0] + n[0] * v[1], -n[0] * v[0] + n[1] * v[1]]
    }

    pub fn to_local(&self, x: Point) -> Point {
        self.vector_to_local(sub(x, self.center))
    }

    pub fn to_global(&self, p: Point) -> Point {
        add(self.vector_to_global(p), self.center)
    }

    /// The touching point in local coordinates, exactly.
    pub fn x0_local(&self) -> Point {
        [0.0, -self.r0]
    }
}

#[derive(Debug, Clone, Copy)]
struct GraphSample {
    ds: f64,
    x: Point,
    slope: f64,
}

/// The boundary near `x0` as a graph `x_d = f(x')` in the local frame.
///
/// `Γ = {|x'| < L, x_d = f(x')}`, `Ω₊` is the strip of depth `L_d` below it
/// and `N = sup |f'|` over `Γ`.
#[derive(Debug, Clone)]
pub struct LocalGraph {
    pub frame: LocalFrame,
    pub l: f64,
    pub l_d: f64,
    pub n_lip: f64,
    samples: Vec<GraphSample>,
    curve: Curve,
}

impl LocalGraph {
    /// `f(x')` for `|x'| ≤ L`, solved along the boundary parametrization.
    pub fn f(&self, xp: f64) -> f64 {
        let i = self.samples.partition_point(|g| g.x[0] < xp);
        if i < self.samples.len() && self.samples[i].x[0] == xp {
            return self.samples[i].x[1];
        }
        let i = i.clamp(1, self.samples.len() - 1);
        let (lo, hi) = (self.samples[i - 1], self.samples[i]);
        // x' decreases with arc length: hi.ds < lo.ds
        let (mut a, mut b) = (hi.ds, lo.ds);
        let s0 = self.frame.at.s;
        let local = |ds: f64| {
            let (p, t) = self.curve.eval(s0 + ds);
            (self.frame.to_local(p), self.frame.vector_to_local(t))
        };
        // safeguarded Newton on the arc length
        let w = if lo.x[0] > hi.x[0] { (lo.x[0] - xp) / (lo.x[0] - hi.x[0]) } else { 0.5 };
        let mut ds = b + w.clamp(0.0, 1.0) * (a - b);
        for _ in 0..100 {
            let (p, t) = local(ds);
            let r = p[0] - xp;
            if r == 0.0 {
                return p[1];
            }
            if r > 0.0 {
                a = a.max(ds);
            } else {
                b = b.min(ds);
            }
            let mut next = ds - r / t[0];
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - ds).abs() <= 1e-16 * (1.0 + ds.abs()) || b - a <= 1e-16 * (1.0 + a.abs()) {
                ds = next;
                break;
            }
            ds = next;
        }
        local(ds).0[1]
    }

    /// `f'(x')` from the boundary tangent.
    pub fn df(&self, xp: f64) -> f64 {
        let i = self.samples.partition_point(|g| g.x[0] < xp).clamp(1, self.samples.len() - 1);
        let (lo, hi) = (self.samples[i - 1], self.samples[i]);
        let w = if hi.x[0] > lo.x[0] { (xp - lo.x[0]) / (hi.x[0] - lo.x[0]) } else { 0.0 };
        lo.slope + w.clamp(0.0, 1.0) * (hi.slope - lo.slope)
    }

    /// Distance constant `M*` with `M*(|x| − r0) ≥ |x − x0|²` on the patch
    /// `|x'| ≤ patch`, inflated by [`MSTAR_SAFETY`]. The patch is halved
    /// while the ratio diverges.
    pub fn compute_mstar(&self, patch: f64) -> Result<f64> {
        let r0 = self.frame.r0;
        let mut patch = patch.min(self.l);
        for _ in 0..30 {
            let mut worst: f64 = 0.0;
            let mut finite = true;
            for j in 1..=256 {
                for sign in [-1.0, 1.0] {
                    let xp = sign * patch * j as f64 / 256.0;
                    let y = self.f(xp);
                    let dist2 = xp * xp + (y + r0) * (y + r0);
                    let excess = (xp * xp + (y + r0) * (y - r0)) / (xp.hypot(y) + r0);
                    if !(excess > 0.0) || dist2 / excess > 1e12 * r0 {
                        finite = false;
                    } else {
                        worst = worst.max(dist2 / excess);
                    }
                }
            }
            if finite {
                return Ok(MSTAR_SAFETY * worst);
            }
            patch *= 0.5;
        }
        Err(Error::GeometricDegeneracy(format!(
            "distance ratio diverges at x0 = ({:.6}, {:.6})",
            self.frame.x0[0], self.frame.x0[1]
        )))
    }

    /// The smaller neighbourhood `Ω₊*` contained in `B_{r_max} ∖ B_{r0}`.
    pub fn star_patch(&self, r_max: f64) -> Result<StarPatch> {
        let r0 = self.frame.r0;
        if !(r_max > r0) {
            return Err(Error::param("r_max", "must exceed r0"));
        }
        let l_d_star = self.l_d.min(0.5 * (r_max - r0));
        let fits = |l: f64| {
            (0..=128).all(|j| {
                let xp = -l + 2.0 * l * j as f64 / 128.0;
                let y = self.f(xp) - l_d_star;
                xp.hypot(y) <= r_max
            })
        };
        let l_star = if fits(self.l) {
            self.l
        } else {
            let (mut lo, mut hi) = (0.0, self.l);
            for _ in 0..60 {
                let m = 0.5 * (lo + hi);
                if fits(m) {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            lo
        };
        if !(l_star > 0.0) {
            return Err(Error::PatchTooSmall { half_width: l_star });
        }
        let mut eta = f64::INFINITY;
        for j in 0..=256 {
            let xp = -l_star + 2.0 * l_star * j as f64 / 256.0;
            let y = self.f(xp) - l_d_star;
            eta = eta.min(xp.hypot(y) - r0);
        }
        for sign in [-1.0, 1.0] {
            let xp = sign * l_star;
            eta = eta.min(xp.hypot(self.f(xp)) - r0);
        }
        if !(eta > 0.0) {
            return Err(Error::GeometricDegeneracy(format!("standoff {eta:.3e} is not positive")));
        }
        Ok(StarPatch {
            l_star,
            l_d_star,
            eta,
            r_max,
        })
    }

    /// Points of `Γ` with `|x'| ≤ half_width`, in local coordinates.
    pub fn gamma_points(&self, half_width: f64, count: usize) -> Vec<Point> {
        (0..count)
            .map(|j| {
                let xp = -half_width + 2.0 * half_width * j as f64 / (count - 1).max(1) as f64;
                [xp, self.f(xp)]
            })
            .collect()
    }
}

/// Constants of the neighbourhood `Ω₊*` and the standoff `η` of
/// `∂Ω₊* ∖ Γ*` from the exterior ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarPatch {
    pub l_star: f64,
    pub l_d_star: f64,
    pub eta: f64,
    pub r_max: f64,
}

impl StarPatch {
    /// Interior points `(x', f(x') − t·L*_d)` on an `nx × ny` lattice, local frame.
    pub fn interior_points(&self, graph: &LocalGraph, nx: usize, ny: usize) -> Vec<Point> {
        let mut out = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            let xp = -self.l_star + 2.0 * self.l_star * (i as f64 + 0.5) / nx as f64;
            let f = graph.f(xp);
            for j in 0..ny {
                let t = (j as f64 + 0.5) / ny as f64;
                out.push([xp, f - t * self.l_d_star]);
            }
        }
        out
    }

    /// Points on the sides and bottom of `Ω₊*`, local frame.
    pub fn outer_boundary_points(&self, graph: &LocalGraph, count: usize) -> Vec<Point> {
        let mut out = Vec::with_capacity(3 * count);
        for j in 0..count {
            let xp = -self.l_star + 2.0 * self.l_star * j as f64 / (count - 1).max(1) as f64;
            out.push([xp, graph.f(xp) - self.l_d_star]);
        }
        for sign in [-1.0, 1.0] {
            let xp = sign * self.l_star;
            let f = graph.f(xp);
            for j in 0..count {
                let t = j as f64 / (count - 1).max(1) as f64;
                out.push([xp, f - t * self.l_d_star]);
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Boundary data

/// Boundary datum `u₀`, defined on a neighbourhood of the closed domain.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    Constant { value: f64 },
    Affine { k: Point, c: f64 },
    /// `A · Im(e^{iφ} z^ν) / R^ν`, a harmonic polynomial.
    TrigTrace { amplitude: f64, mode: u32, phase: f64, radius: f64 },
    /// Harmonic radial profile from `inner_value` at `inner_radius` to `outer_value` at `outer_radius`.
    LogRadial { inner_radius: f64, outer_radius: f64, inner_value: f64, outer_value: f64 },
}

/// Sampled norms of a boundary datum on the closed domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataNorms {
    /// `‖u₀‖_∞`
    pub sup: f64,
    /// `K = ‖∇u₀‖_∞`
    pub grad_sup: f64,
    /// Lipschitz constant of `∇u₀`.
    pub hess_sup: f64,
    /// `‖u₀‖_{1,∞} = sup + K + Lip(∇u₀)`
    pub norm_1inf: f64,
}

impl BoundaryData {
    pub fn validate(&self) -> Result<()> {
        match self {
            BoundaryData::TrigTrace { mode, radius, amplitude, phase } => {
                if *mode == 0 {
                    return Err(Error::param("mode", "must be at least 1"));
                }
                if !(*radius > 0.0 && amplitude.is_finite() && phase.is_finite()) {
                    return Err(Error::param("radius", "must be positive"));
                }
            }
            BoundaryData::LogRadial { inner_radius, outer_radius, .. } => {
                if !(*inner_radius > 0.0 && outer_radius > inner_radius) {
                    return Err(Error::param("inner_radius", "need 0 < inner_radius < outer_radius"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `e^{iφ} z^ν / R^ν` and its complex derivatives of order one and two.
    fn trig_parts(mode: u32, phase: f64, radius: f64, x: Point) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let cmul = |a: [f64; 2], b: [f64; 2]| [a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0]];
        let z = [x[0] / radius, x[1] / radius];
        let mut pow = [[1.0, 0.0]; 3]; // z^ν, z^{ν-1}, z^{ν-2}
        let nu = mode as i64;
        let mut p = [1.0, 0.0];
        for k in 0..=nu {
            if k == nu - 2 {
                pow[2] = p;
            }
            if k == nu - 1 {
                pow[1] = p;
            }
            if k == nu {
                pow[0] = p;
            }
            p = cmul(p, z);
        }
        let rot = [phase.cos(), phase.sin()];
        let nuf = mode as f64;
        let g = cmul(rot, pow[0]);
        let dg = cmul(rot, scale(pow[1], nuf / radius));
        let ddg = if mode >= 2 {
            cmul(rot, scale(pow[2], nuf * (nuf - 1.0) / (radius * radius)))
        } else {
            [0.0, 0.0]
        };
        (g, dg, ddg)
    }

    pub fn value(&self, x: Point) -> f64 {
        match *self {
            BoundaryData::Constant { value } => value,
            BoundaryData::Affine { k, c } => dot(k, x) + c,
            BoundaryData::TrigTrace { amplitude, mode, phase, radius } => {
                amplitude * Self::trig_parts(mode, phase, radius, x).0[1]
            }
            BoundaryData::LogRadial { inner_radius, outer_radius, inner_value, outer_value } => {
                let t = (norm(x) / inner_radius).ln() / (outer_radius / inner_radius).ln();
                inner_value + (outer_value - inner_value) * t
            }
        }
    }

    pub fn gradient(&self, x: Point) -> Point {
        match *self {
            BoundaryData::Constant { .. } => [0.0, 0.0],
            BoundaryData::Affine { k, .. } => k,
            BoundaryData::TrigTrace { amplitude, mode, phase, radius } => {
                // ∇ Im g = (Im g', Re g')
                let dg = Self::trig_parts(mode, phase, radius, x).1;
                [amplitude * dg[1], amplitude * dg[0]]
            }
            BoundaryData::LogRadial { inner_radius, outer_radius, inner_value, outer_value } => {
                let c = (outer_value - inner_value) / (outer_radius / inner_radius).ln();
                let r2 = dot(x, x);
                [c * x[0] / r2, c * x[1] / r2]
            }
        }
    }

    /// Hessian `[[u_xx, u_xy], [u_xy, u_yy]]`.
    pub fn hessian(&self, x: Point) -> [[f64; 2]; 2] {
        match *self {
            BoundaryData::Constant { .. } | BoundaryData::Affine { .. } => [[0.0; 2]; 2],
            BoundaryData::TrigTrace { amplitude, mode, phase, radius } => {
                let ddg = Self::trig_parts(mode, phase, radius, x).2;
                let (re, im) = (amplitude * ddg[0], amplitude * ddg[1]);
                [[im, re], [re, -im]]
            }
            BoundaryData::LogRadial { inner_radius, outer_radius, inner_value, outer_value } => {
                let c = (outer_value - inner_value) / (outer_radius / inner_radius).ln();
                let r2 = dot(x, x);
                let r4 = r2 * r2;
                let xy = -2.0 * c * x[0] * x[1] / r4;
                [[c * (x[1] * x[1] - x[0] * x[0]) / r4, xy], [xy, c * (x[0] * x[0] - x[1] * x[1]) / r4]]
            }
        }
    }

    /// Norms sampled on the boundary of `dom` (every supported datum is
    /// harmonic, so the suprema are attained there), inflated by `1 + 1e-6`.
    pub fn norms(&self, dom: &ExteriorBallDomain) -> DataNorms {
        let mut sup: f64 = 0.0;
        let mut grad_sup: f64 = 0.0;
        let mut hess_sup: f64 = 0.0;
        for smp in dom.samples() {
            let x = smp.point;
            sup = sup.max(self.value(x).abs());
            grad_sup = grad_sup.max(norm(self.gradient(x)));
            let h = self.hessian(x);
            // symmetric 2×2 spectral norm
            let mean = 0.5 * (h[0][0] + h[1][1]);
            let rad = (0.5 * (h[0][0] - h[1][1])).hypot(h[0][1]);
            hess_sup = hess_sup.max(mean.abs() + rad);
        }
        let inflate = 1.0 + 1e-6;
        let (sup, grad_sup, hess_sup) = (sup * inflate, grad_sup * inflate, hess_sup * inflate);
        DataNorms {
            sup,
            grad_sup,
            hess_sup,
            norm_1inf: sup + grad_sup + hess_sup,
        }
    }
}

/// Report row for a boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryRow {
    pub x0: Point,
    pub r0: f64,
    pub mstar: f64,
    pub l: f64,
    pub l_d: f64,
    pub n: f64,
}

pub fn geometry_row(graph: &LocalGraph, mstar: f64) -> GeometryRow {
    GeometryRow {
        x0: graph.frame.x0,
        r0: graph.frame.r0,
        mstar,
        l: graph.l,
        l_d: graph.l_d,
        n: graph.n_lip,
    }
}
