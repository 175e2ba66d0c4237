//! Uniform-weight Laplacian editing with hard handle constraints.

use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};

use super::mesh::TriMesh;
use crate::error::{Error, Result};

/// Relative residual at which conjugate gradients stops.
pub const CG_TOLERANCE: f64 = 1e-13;

/// Compressed sparse rows, square.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_start: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_start[i]..self.row_start[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_start[i]..self.row_start[i + 1])
                    .find(|&k| self.cols[k] == i)
                    .map_or(0.0, |k| self.vals[k])
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// definite `a`. Starts from `x`; returns the iteration count.
pub fn solve_cg(a: &Csr, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> usize {
    let n = a.n;
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = vec![0.0; n];
    a.mul(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let bnorm = dot(b, b).sqrt().max(1e-300);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        if dot(&r, &r).sqrt() <= tol * bnorm {
            return it;
        }
        a.mul(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return it;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    max_iter
}

/// Deforms `roi` so handles land on their targets while free vertices keep
/// their uniform differential coordinates. Vertices outside `roi` are fixed.
///
/// Each free vertex contributes the equation `deg·x_i − Σ_j x_j = δ_i`; the
/// resulting system over the free vertices is the graph Laplacian restricted
/// to them, symmetric positive definite when every free component touches a
/// constrained vertex.
pub fn laplacian_deform(mesh: &TriMesh, handles: &BTreeMap<usize, Point3<f64>>, roi: &[usize]) -> Result<TriMesh> {
    mesh.validate()?;
    let n = mesh.vertices.len();
    let mut in_roi = vec![false; n];
    for &v in roi {
        if v >= n {
            return Err(Error::InvalidInput(format!("roi vertex {v} out of range")));
        }
        in_roi[v] = true;
    }
    for &h in handles.keys() {
        if h >= n || !in_roi[h] {
            return Err(Error::InvalidInput(format!("handle {h} is not inside the roi")));
        }
    }
    let nbrs = mesh.vertex_neighbors();
    let mut out = mesh.vertices.clone();
    for (&h, &p) in handles {
        out[h] = p;
    }

    // Free unknowns, in ascending vertex order.
    let mut slot = vec![usize::MAX; n];
    let mut free = Vec::new();
    for v in 0..n {
        if in_roi[v] && !handles.contains_key(&v) {
            slot[v] = free.len();
            free.push(v);
        }
    }
    if free.is_empty() {
        return Ok(TriMesh::new(out, mesh.triangles.clone()));
    }
    check_anchored(&free, &slot, &nbrs)?;

    let mut row_start = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut rhs = vec![Vector3::zeros(); free.len()];
    for (row, &v) in free.iter().enumerate() {
        let p = mesh.vertices[v];
        let deg = nbrs[v].len() as f64;
        let mut delta = p.coords * deg;
        for &u in &nbrs[v] {
            delta -= mesh.vertices[u].coords;
        }
        let mut entries: Vec<(usize, f64)> = vec![(row, deg)];
        for &u in &nbrs[v] {
            if slot[u] != usize::MAX {
                entries.push((slot[u], -1.0));
            } else {
                delta += out[u].coords;
            }
        }
        entries.sort_unstable_by_key(|e| e.0);
        for (c, w) in entries {
            cols.push(c);
            vals.push(w);
        }
        row_start.push(cols.len());
        rhs[row] = delta;
    }
    let a = Csr {
        n: free.len(),
        row_start,
        cols,
        vals,
    };
    for axis in 0..3 {
        let b: Vec<f64> = rhs.iter().map(|r| r[axis]).collect();
        let mut x: Vec<f64> = free.iter().map(|&v| out[v][axis]).collect();
        solve_cg(&a, &b, &mut x, CG_TOLERANCE, 20 * free.len() + 100);
        for (k, &v) in free.iter().enumerate() {
            out[v][axis] = x[k];
        }
    }
    Ok(TriMesh::new(out, mesh.triangles.clone()))
}

fn check_anchored(free: &[usize], slot: &[usize], nbrs: &[Vec<usize>]) -> Result<()> {
    let mut seen = vec![false; free.len()];
    for start in 0..free.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut anchored = false;
        let mut size = 0;
        while let Some(k) = stack.pop() {
            size += 1;
            for &u in &nbrs[free[k]] {
                match slot[u] {
                    usize::MAX => anchored = true,
                    s if !seen[s] => {
                        seen[s] = true;
                        stack.push(s);
                    }
                    _ => {}
                }
            }
        }
        if !anchored {
            return Err(Error::Singular(format!(
                "{size} free vertices around vertex {} have no handle or fixed neighbor",
                free[start]
            )));
        }
    }
    Ok(())
}

/// Vertices within `rings` edge hops of any seed (seeds included), sorted.
pub fn k_ring(mesh: &TriMesh, seeds: &[usize], rings: usize) -> Vec<usize> {
    let nbrs = mesh.vertex_neighbors();
    k_ring_with(&nbrs, seeds, rings)
}

pub fn k_ring_with(nbrs: &[Vec<usize>], seeds: &[usize], rings: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; nbrs.len()];
    let mut frontier: Vec<usize> = Vec::new();
    for &s in seeds {
        if dist[s] != 0 {
            dist[s] = 0;
            frontier.push(s);
        }
    }
    for r in 1..=rings {
        let mut next = Vec::new();
        for v in frontier {
            for &u in &nbrs[v] {
                if dist[u] == usize::MAX {
                    dist[u] = r;
                    next.push(u);
                }
            }
        }
        frontier = next;
    }
    (0..nbrs.len()).filter(|&v| dist[v] != usize::MAX).collect()
}
