#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use viscoduct::sparse::CsrMatrix;
use viscoduct::Triangulation;

/// Uniform `m x m` grid on the unit square, each cell cut along its main
/// diagonal. `wall` selects the Dirichlet nodes.
pub fn square_mesh(m: usize, wall: impl Fn([f64; 2]) -> bool) -> Triangulation {
    let h = 1.0 / m as f64;
    let id = |i: usize, j: usize| j * (m + 1) + i;
    let mut nodes = Vec::new();
    let mut dirichlet = Vec::new();
    for j in 0..=m {
        for i in 0..=m {
            let p = [i as f64 * h, j as f64 * h];
            nodes.push(p);
            dirichlet.push(wall(p));
        }
    }
    let mut triangles = Vec::new();
    for j in 0..m {
        for i in 0..m {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Triangulation::new(nodes, triangles, dirichlet).unwrap()
}

pub fn on_boundary(p: [f64; 2]) -> bool {
    let eps = 1e-12;
    p.iter().any(|&c| c < eps || c > 1.0 - eps)
}

pub fn on_left_side(p: [f64; 2]) -> bool {
    p[0] < 1e-12
}

pub fn dense(a: &CsrMatrix) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.rows(), a.cols());
    for (i, j, v) in a.triplets() {
        out[(i, j)] += v;
    }
    out
}

pub fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Stiffness matrix on free nodes from the cotangent formula: the entry for an
/// edge `ij` is `-(cot a + cot b) / 2` over the angles opposite that edge.
pub fn cotangent_stiffness(mesh: &Triangulation) -> DMatrix<f64> {
    let n = mesh.n_free();
    let mut k = DMatrix::zeros(n, n);
    let pts = mesh.nodes();
    for tri in mesh.triangles() {
        for c in 0..3 {
            let (a, b, o) = (tri[c], tri[(c + 1) % 3], tri[(c + 2) % 3]);
            let u = [pts[a][0] - pts[o][0], pts[a][1] - pts[o][1]];
            let v = [pts[b][0] - pts[o][0], pts[b][1] - pts[o][1]];
            let cross = (u[0] * v[1] - u[1] * v[0]).abs();
            let w = 0.5 * (u[0] * v[0] + u[1] * v[1]) / cross;
            let (fa, fb) = (mesh.free_index(a), mesh.free_index(b));
            if let Some(ia) = fa {
                k[(ia, ia)] += w;
            }
            if let Some(ib) = fb {
                k[(ib, ib)] += w;
            }
            if let (Some(ia), Some(ib)) = (fa, fb) {
                k[(ia, ib)] -= w;
                k[(ib, ia)] -= w;
            }
        }
    }
    k
}
