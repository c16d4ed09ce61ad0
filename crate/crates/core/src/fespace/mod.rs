//! Continuous Lagrange spaces for the unknown `(E1, E2, H)`.
//!
//! All three components use the same nodal `P_r` space. The perfect
//! conductor condition `E . t = 0` is imposed strongly at every boundary
//! node: along a straight piece of boundary only the normal component of `E`
//! survives, and where two non-parallel boundary edges meet both components
//! are eliminated. `H` is never constrained.
//!
//! Global degrees of freedom are numbered node by node (the surviving `E`
//! unknowns of a node, then its `H` unknown), nodes in the order vertices,
//! edge nodes, interior nodes.

mod basis;
mod field;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

pub use basis::LagrangeBasis;
pub use field::{AnalyticField, ConstantField, FnField, SquareMode};

use crate::assembly::quadrature::{quadrature, MAX_DEGREE};
use crate::error::SpaceError;
use crate::mesh::{edge_key, validate, Mesh, Point};

pub const MAX_ORDER: usize = 5;

/// How the electric field at one node is parametrised.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EDofs {
    /// Interior node: `E = (x[0], x[1])`.
    Free([usize; 2]),
    /// Straight boundary: `E = x[dof] * dir` with `dir` the unit normal.
    Normal { dof: usize, dir: Point },
    /// Corner: `E = 0`.
    Fixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintRecord {
    pub node: usize,
    pub point: Point,
    /// `None` when both components were eliminated, otherwise the kept
    /// normal direction.
    pub kept_normal: Option<Point>,
}

/// One vector-valued global basis function restricted to an element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LocalBasis {
    /// `phi_k * dir` in the `E` slot.
    E { node: usize, dir: Point, dof: usize },
    /// `phi_k` in the `H` slot.
    H { node: usize, dof: usize },
}

impl LocalBasis {
    pub fn dof(&self) -> usize {
        match *self {
            LocalBasis::E { dof, .. } | LocalBasis::H { dof, .. } => dof,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    basis: LagrangeBasis,
    nodes: Vec<Point>,
    elem_nodes: Vec<usize>,
    e_dofs: Vec<EDofs>,
    h_dofs: Vec<usize>,
    n_dofs: usize,
    constraint_log: Vec<ConstraintRecord>,
}

/// Builds the `P_r` space of order `r` on `mesh`.
pub fn build_space(mesh: impl Into<Arc<Mesh>>, r: usize) -> Result<FeSpace, SpaceError> {
    let mesh = mesh.into();
    if !(1..=MAX_ORDER).contains(&r) {
        return Err(SpaceError::UnsupportedOrder(r));
    }
    let report = validate(&mesh);
    if !report.all_passed() {
        return Err(SpaceError::InvalidMesh(report.to_string()));
    }
    let basis = LagrangeBasis::new(r);
    let nloc = basis.len();
    let nv = mesh.n_vertices();

    let mut nodes: Vec<Point> = mesh.vertices().to_vec();
    let mut edge_base: HashMap<(usize, usize), usize> = HashMap::new();
    let edges = mesh.edges();
    for &[a, b] in &edges {
        edge_base.insert((a, b), nodes.len());
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        for s in 1..r {
            let f = s as f64 / r as f64;
            nodes.push([pa[0] + f * (pb[0] - pa[0]), pa[1] + f * (pb[1] - pa[1])]);
        }
    }
    let n_interior = nloc - 3 - 3 * (r - 1);
    let mut elem_nodes = Vec::with_capacity(mesh.n_triangles() * nloc);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        elem_nodes.extend_from_slice(tri);
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = edge_key(a, b);
            let base = edge_base[&key];
            for s in 1..r {
                let from_min = if a == key.0 { s } else { r - s };
                elem_nodes.push(base + from_min - 1);
            }
        }
        let pts = mesh.triangle_points(t);
        for k in 3 + 3 * (r - 1)..nloc {
            let [xi, eta] = basis.node(k);
            let l0 = 1.0 - xi - eta;
            nodes.push([
                l0 * pts[0][0] + xi * pts[1][0] + eta * pts[2][0],
                l0 * pts[0][1] + xi * pts[1][1] + eta * pts[2][1],
            ]);
            elem_nodes.push(nodes.len() - 1);
        }
        debug_assert_eq!(elem_nodes.len(), (t + 1) * nloc);
    }
    debug_assert_eq!(
        nodes.len(),
        nv + edges.len() * (r - 1) + mesh.n_triangles() * n_interior
    );

    // tangents of the boundary edges incident to each boundary node
    let mut tangents: HashMap<usize, Vec<Point>> = HashMap::new();
    for e in mesh.boundary_edges() {
        let key = edge_key(e.v[0], e.v[1]);
        for &v in &e.v {
            tangents.entry(v).or_default().push(e.tangent);
        }
        let base = edge_base[&key];
        for s in 1..r {
            tangents.entry(base + s - 1).or_default().push(e.tangent);
        }
    }

    let mut e_dofs = Vec::with_capacity(nodes.len());
    let mut h_dofs = Vec::with_capacity(nodes.len());
    let mut constraint_log = Vec::new();
    let mut next = 0;
    for (node, p) in nodes.iter().enumerate() {
        let kind = match tangents.get(&node) {
            None => {
                next += 2;
                EDofs::Free([next - 2, next - 1])
            }
            Some(ts) => {
                let t0 = ts[0];
                let parallel = ts
                    .iter()
                    .all(|t| (t0[0] * t[1] - t0[1] * t[0]).abs() < 1e-10);
                if parallel {
                    let dir = snap_normal([-t0[1], t0[0]]);
                    constraint_log.push(ConstraintRecord {
                        node,
                        point: *p,
                        kept_normal: Some(dir),
                    });
                    next += 1;
                    EDofs::Normal { dof: next - 1, dir }
                } else {
                    constraint_log.push(ConstraintRecord {
                        node,
                        point: *p,
                        kept_normal: None,
                    });
                    EDofs::Fixed
                }
            }
        };
        e_dofs.push(kind);
        h_dofs.push(next);
        next += 1;
    }

    Ok(FeSpace {
        mesh,
        basis,
        nodes,
        elem_nodes,
        e_dofs,
        h_dofs,
        n_dofs: next,
        constraint_log,
    })
}

/// Unit normal with a canonical sign, snapped to the axes when the boundary
/// is axis aligned.
fn snap_normal(n: Point) -> Point {
    let len = n[0].hypot(n[1]);
    let mut d = [n[0] / len, n[1] / len];
    if d[0].abs() < 1e-12 {
        d = [0.0, 1.0];
    } else if d[1].abs() < 1e-12 {
        d = [1.0, 0.0];
    } else if d[0] < 0.0 || (d[0] == 0.0 && d[1] < 0.0) {
        d = [-d[0], -d[1]];
    }
    d
}

/// Value, curl of `E` and gradient of `H` of a discrete field at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointEval {
    pub value: [f64; 3],
    pub curl_e: f64,
    pub grad_h: [f64; 2],
}

impl FeSpace {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    /// Scalar `P_r` nodes, crack twins counted separately.
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// `3 * n_nodes`, the count before the boundary condition.
    pub fn n_unconstrained(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn n_e_dofs(&self) -> usize {
        self.n_dofs - self.nodes.len()
    }

    pub fn n_h_dofs(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn e_dofs(&self) -> &[EDofs] {
        &self.e_dofs
    }

    pub fn h_dofs(&self) -> &[usize] {
        &self.h_dofs
    }

    pub fn constraint_log(&self) -> &[ConstraintRecord] {
        &self.constraint_log
    }

    /// Global node indices of triangle `t` in local order.
    pub fn element_nodes(&self, t: usize) -> &[usize] {
        let n = self.basis.len();
        &self.elem_nodes[t * n..(t + 1) * n]
    }

    /// Vector basis functions that live on triangle `t`.
    pub fn local_basis(&self, t: usize) -> Vec<LocalBasis> {
        let mut out = Vec::with_capacity(3 * self.basis.len());
        for (k, &g) in self.element_nodes(t).iter().enumerate() {
            match self.e_dofs[g] {
                EDofs::Free([a, b]) => {
                    out.push(LocalBasis::E {
                        node: k,
                        dir: [1.0, 0.0],
                        dof: a,
                    });
                    out.push(LocalBasis::E {
                        node: k,
                        dir: [0.0, 1.0],
                        dof: b,
                    });
                }
                EDofs::Normal { dof, dir } => out.push(LocalBasis::E { node: k, dir, dof }),
                EDofs::Fixed => {}
            }
            out.push(LocalBasis::H {
                node: k,
                dof: self.h_dofs[g],
            });
        }
        out
    }

    /// Affine map data of triangle `t`: origin, Jacobian columns and the
    /// inverse transpose used to map reference gradients.
    pub fn geometry(&self, t: usize) -> ElementGeometry {
        ElementGeometry::new(self.mesh.triangle_points(t))
    }

    pub fn coefficients(&self, values: Vec<f64>) -> Result<Coefficients<'_>, SpaceError> {
        if values.len() != self.n_dofs {
            return Err(SpaceError::LengthMismatch {
                expected: self.n_dofs,
                got: values.len(),
            });
        }
        Ok(Coefficients {
            space: self,
            values,
        })
    }

    pub fn zero(&self) -> Coefficients<'_> {
        Coefficients {
            space: self,
            values: vec![0.0; self.n_dofs],
        }
    }

    /// Nodal interpolant. At constrained nodes the tangential part of `E`
    /// is dropped.
    pub fn interpolate(&self, f: &dyn AnalyticField) -> Coefficients<'_> {
        let mut values = vec![0.0; self.n_dofs];
        for (node, p) in self.nodes.iter().enumerate() {
            let v = f.value(*p);
            match self.e_dofs[node] {
                EDofs::Free([a, b]) => {
                    values[a] = v[0];
                    values[b] = v[1];
                }
                EDofs::Normal { dof, dir } => values[dof] = v[0] * dir[0] + v[1] * dir[1],
                EDofs::Fixed => {}
            }
            values[self.h_dofs[node]] = v[2];
        }
        Coefficients {
            space: self,
            values,
        }
    }

    /// `(E1, E2, H)` at every node.
    pub fn node_values(&self, x: &[f64]) -> Vec<[f64; 3]> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(node, _)| {
                let e = match self.e_dofs[node] {
                    EDofs::Free([a, b]) => [x[a], x[b]],
                    EDofs::Normal { dof, dir } => [x[dof] * dir[0], x[dof] * dir[1]],
                    EDofs::Fixed => [0.0, 0.0],
                };
                [e[0], e[1], x[self.h_dofs[node]]]
            })
            .collect()
    }

    /// Evaluates a coefficient vector on triangle `t` at reference point
    /// `(xi, eta)`.
    pub fn eval_local(&self, t: usize, x: &[f64], xi: f64, eta: f64) -> PointEval {
        let g = self.geometry(t);
        let phi = self.basis.values(xi, eta);
        let dphi = self.basis.gradients(xi, eta);
        let mut out = PointEval::default();
        for (k, &node) in self.element_nodes(t).iter().enumerate() {
            let [gx, gy] = g.grad(dphi[k]);
            let e = match self.e_dofs[node] {
                EDofs::Free([a, b]) => [x[a], x[b]],
                EDofs::Normal { dof, dir } => [x[dof] * dir[0], x[dof] * dir[1]],
                EDofs::Fixed => [0.0, 0.0],
            };
            let h = x[self.h_dofs[node]];
            out.value[0] += e[0] * phi[k];
            out.value[1] += e[1] * phi[k];
            out.value[2] += h * phi[k];
            out.curl_e += e[1] * gx - e[0] * gy;
            out.grad_h[0] += h * gx;
            out.grad_h[1] += h * gy;
        }
        out
    }

    /// Triangle containing `p` and the reference coordinates of `p` in it.
    pub fn locate(&self, p: Point) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for t in 0..self.mesh.n_triangles() {
            let g = self.geometry(t);
            let [xi, eta] = g.to_reference(p);
            let outside = (-xi).max(-eta).max(xi + eta - 1.0);
            if best.is_none_or(|b| outside < b.3) {
                best = Some((t, xi, eta, outside));
            }
            if outside <= 0.0 {
                break;
            }
        }
        best.filter(|b| b.3 <= 1e-12).map(|b| (b.0, b.1, b.2))
    }

    /// Evaluates a coefficient vector at a physical point.
    pub fn evaluate(&self, x: &[f64], p: Point) -> Option<PointEval> {
        self.locate(p)
            .map(|(t, xi, eta)| self.eval_local(t, x, xi, eta))
    }

    /// Squared `H(curl)` norm `||E||^2 + ||H||^2 + ||curl E||^2 + ||grad H||^2`
    /// of `u - f` by quadrature of degree `2r + 6` (capped at the maximum).
    pub fn curl_norm_sq_diff(&self, x: &[f64], f: &dyn AnalyticField) -> f64 {
        self.curl_inner(
            |t, xi, eta| {
                let u = self.eval_local(t, x, xi, eta);
                [
                    u.value[0],
                    u.value[1],
                    u.value[2],
                    u.curl_e,
                    u.grad_h[1],
                    -u.grad_h[0],
                ]
            },
            |p| field_six(f, p),
            true,
        )
    }

    /// Quadrature of `sum_c (a_c - b_c)^2` (when `diff`) or `sum_c a_c b_c`
    /// over the six components `(E1, E2, H, curl E, curl H)`.
    fn curl_inner(
        &self,
        discrete: impl Fn(usize, f64, f64) -> [f64; 6],
        analytic: impl Fn(Point) -> [f64; 6],
        diff: bool,
    ) -> f64 {
        let q = quadrature((2 * self.order() + 6).min(MAX_DEGREE)).expect("degree within table");
        let mut total = 0.0;
        for t in 0..self.mesh.n_triangles() {
            let g = self.geometry(t);
            let mut local = 0.0;
            for (pt, w) in q.points.iter().zip(&q.weights) {
                let a = discrete(t, pt[0], pt[1]);
                let b = analytic(g.to_physical(*pt));
                let s: f64 = if diff {
                    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum()
                } else {
                    a.iter().zip(&b).map(|(x, y)| x * y).sum()
                };
                local += w * s;
            }
            total += local * g.det;
        }
        total
    }

    /// P1 subdivision of every element through its Lagrange nodes, for
    /// plotting. Returns triangles over global node indices.
    pub fn p1_triangles(&self) -> Vec<[usize; 3]> {
        let r = self.order();
        let mut out = Vec::with_capacity(self.mesh.n_triangles() * r * r);
        let idx: HashMap<[usize; 3], usize> = self
            .basis
            .alphas()
            .iter()
            .enumerate()
            .map(|(k, a)| (*a, k))
            .collect();
        for t in 0..self.mesh.n_triangles() {
            let en = self.element_nodes(t);
            let node = |a1: usize, a2: usize| en[idx[&[r - a1 - a2, a1, a2]]];
            for a2 in 0..r {
                for a1 in 0..r - a2 {
                    out.push([node(a1, a2), node(a1 + 1, a2), node(a1, a2 + 1)]);
                    if a1 + a2 + 2 <= r {
                        out.push([node(a1 + 1, a2), node(a1 + 1, a2 + 1), node(a1, a2 + 1)]);
                    }
                }
            }
        }
        out
    }

    /// CSV listing of a coefficient vector, one line per degree of freedom.
    pub fn coefficients_csv(&self, x: &[f64]) -> String {
        let mut rows: Vec<(usize, &str, Point, f64)> = Vec::with_capacity(self.n_dofs);
        for (node, p) in self.nodes.iter().enumerate() {
            match self.e_dofs[node] {
                EDofs::Free([a, b]) => {
                    rows.push((a, "E1", *p, x[a]));
                    rows.push((b, "E2", *p, x[b]));
                }
                EDofs::Normal { dof, dir } => {
                    let name = match dir {
                        [1.0, 0.0] => "E1",
                        [0.0, 1.0] => "E2",
                        _ => "En",
                    };
                    rows.push((dof, name, *p, x[dof]));
                }
                EDofs::Fixed => {}
            }
            rows.push((self.h_dofs[node], "H", *p, x[self.h_dofs[node]]));
        }
        rows.sort_by_key(|r| r.0);
        let mut s = String::from("dof_index,component,node_x,node_y,value\n");
        for (i, c, p, v) in rows {
            let _ = writeln!(s, "{i},{c},{:.16e},{:.16e},{:.16e}", p[0], p[1], v);
        }
        s
    }
}

fn field_six(f: &dyn AnalyticField, p: Point) -> [f64; 6] {
    let v = f.value(p);
    let c = f.curl(p);
    [v[0], v[1], v[2], c[0], c[1], c[2]]
}

/// Affine element map `x = x0 + J (xi, eta)`.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub origin: Point,
    pub jac: [[f64; 2]; 2],
    /// Rows map reference gradients to physical ones: `grad_x = G grad_xi`.
    pub inv_t: [[f64; 2]; 2],
    /// `|det J|`, twice the element area.
    pub det: f64,
}

impl ElementGeometry {
    pub fn new(p: [Point; 3]) -> Self {
        let jac = [
            [p[1][0] - p[0][0], p[2][0] - p[0][0]],
            [p[1][1] - p[0][1], p[2][1] - p[0][1]],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        // (J^{-1})^T
        let inv_t = [
            [jac[1][1] / det, -jac[1][0] / det],
            [-jac[0][1] / det, jac[0][0] / det],
        ];
        ElementGeometry {
            origin: p[0],
            jac,
            inv_t,
            det: det.abs(),
        }
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> Point {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, p: Point) -> [f64; 2] {
        let d = [p[0] - self.origin[0], p[1] - self.origin[1]];
        // J^{-1} = (inv_t)^T
        [
            self.inv_t[0][0] * d[0] + self.inv_t[1][0] * d[1],
            self.inv_t[0][1] * d[0] + self.inv_t[1][1] * d[1],
        ]
    }

    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }
}

/// Coefficient vector tied to its space.
#[derive(Clone, Debug)]
pub struct Coefficients<'a> {
    space: &'a FeSpace,
    values: Vec<f64>,
}

impl<'a> Coefficients<'a> {
    pub fn space(&self) -> &'a FeSpace {
        self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn evaluate(&self, p: Point) -> Option<[f64; 3]> {
        self.space.evaluate(&self.values, p).map(|e| e.value)
    }
}

/// Distance in the `H(curl)` norm from `u` to the span of `reference`.
///
/// The best approximation is found by least squares in the curl-norm inner
/// product; the distance itself is then evaluated directly by quadrature of
/// the residual, which avoids the cancellation of `||u||^2 - b^T G^{-1} b`.
pub fn hcurl_distance(
    space: &FeSpace,
    u: &[f64],
    reference: &[&dyn AnalyticField],
) -> Result<f64, SpaceError> {
    if reference.is_empty() {
        return Err(SpaceError::EmptyReference);
    }
    if u.len() != space.n_dofs() {
        return Err(SpaceError::LengthMismatch {
            expected: space.n_dofs(),
            got: u.len(),
        });
    }
    let k = reference.len();
    let mut gram = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut rhs = nalgebra::DVector::<f64>::zeros(k);
    let discrete = |t: usize, xi: f64, eta: f64| {
        let e = space.eval_local(t, u, xi, eta);
        [
            e.value[0],
            e.value[1],
            e.value[2],
            e.curl_e,
            e.grad_h[1],
            -e.grad_h[0],
        ]
    };
    for a in 0..k {
        rhs[a] = space.curl_inner(discrete, |p| field_six(reference[a], p), false);
        for b in a..k {
            let v = space.curl_inner(
                |t, xi, eta| field_six(reference[a], space.geometry(t).to_physical([xi, eta])),
                |p| field_six(reference[b], p),
                false,
            );
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let coef = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| gram.pseudo_inverse(1e-12).expect("pseudo inverse") * &rhs);
    let combo = FnField {
        value: |p: Point| {
            let mut s = [0.0; 3];
            for (c, f) in coef.iter().zip(reference) {
                let v = f.value(p);
                for i in 0..3 {
                    s[i] += c * v[i];
                }
            }
            s
        },
        curl: |p: Point| {
            let mut s = [0.0; 3];
            for (c, f) in coef.iter().zip(reference) {
                let v = f.curl(p);
                for i in 0..3 {
                    s[i] += c * v[i];
                }
            }
            s
        },
    };
    Ok(space.curl_norm_sq_diff(u, &combo).max(0.0).sqrt())
}
