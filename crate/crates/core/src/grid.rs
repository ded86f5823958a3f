//! Structured tensor-product grids on a parameter rectangle, their
//! difference stencils and quadrature weights.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShellError};
use crate::scalar::Real;

/// Axis-aligned parameter rectangle `[x0, x0 + L1] x [y0, y0 + L2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub origin: [f64; 2],
    pub lengths: [f64; 2],
}

impl Rect {
    pub fn new(origin: [f64; 2], lengths: [f64; 2]) -> Self {
        Self { origin, lengths }
    }

    pub fn unit() -> Self {
        Self::new([0.0, 0.0], [1.0, 1.0])
    }

    pub fn area(&self) -> f64 {
        self.lengths[0] * self.lengths[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    pub nx: usize,
    pub ny: usize,
    pub h1: f64,
    pub h2: f64,
    pub x_origin: [f64; 2],
    pub periodic1: bool,
    pub periodic2: bool,
    pub boundary_mask: Vec<bool>,
}

/// One-dimensional first-derivative stencil: at most four taps.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub idx: [usize; 4],
    pub w: [f64; 4],
    pub len: usize,
}

impl Stencil {
    fn new(taps: &[(usize, f64)]) -> Self {
        let mut s = Stencil { idx: [0; 4], w: [0.0; 4], len: taps.len() };
        for (k, &(i, w)) in taps.iter().enumerate() {
            s.idx[k] = i;
            s.w[k] = w;
        }
        s
    }

    pub fn taps(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(move |k| (self.idx[k], self.w[k]))
    }
}

/// First-derivative stencil at index `i` of an `n`-point line.
///
/// Interior and periodic nodes use the two-point central difference. End
/// nodes use a four-point one-sided closure that is exact for quadratics and
/// whose leading truncation term, `h^2/6 f'''`, equals that of the central
/// difference, so the nodal error field stays smooth up to the boundary.
/// Three-node lines fall back to the three-point one-sided formula.
pub fn stencil_1d(i: usize, n: usize, periodic: bool, h: f64) -> Stencil {
    let c = 0.5 / h;
    if periodic {
        let prev = (i + n - 1) % n;
        let next = (i + 1) % n;
        return Stencil::new(&[(prev, -c), (next, c)]);
    }
    let inv = 1.0 / h;
    if i == 0 {
        if n >= 4 {
            Stencil::new(&[(0, -2.0 * inv), (1, 3.5 * inv), (2, -2.0 * inv), (3, 0.5 * inv)])
        } else {
            Stencil::new(&[(0, -1.5 * inv), (1, 2.0 * inv), (2, -0.5 * inv)])
        }
    } else if i == n - 1 {
        if n >= 4 {
            Stencil::new(&[(n - 1, 2.0 * inv), (n - 2, -3.5 * inv), (n - 3, 2.0 * inv), (n - 4, -0.5 * inv)])
        } else {
            Stencil::new(&[(n - 1, 1.5 * inv), (n - 2, -2.0 * inv), (n - 3, 0.5 * inv)])
        }
    } else {
        Stencil::new(&[(i - 1, -c), (i + 1, c)])
    }
}

/// Build a grid on `rect` with `nx x ny` nodes.
pub fn build_grid(rect: Rect, nx: usize, ny: usize, periodic: [bool; 2]) -> Result<ParamGrid> {
    if nx < 3 || ny < 3 {
        return Err(ShellError::InvalidGrid(format!("node counts must be >= 3 (got {nx} x {ny})")));
    }
    let [l1, l2] = rect.lengths;
    if !(l1.is_finite() && l2.is_finite() && l1 > 0.0 && l2 > 0.0) {
        return Err(ShellError::InvalidGrid(format!("rectangle side lengths must be positive (got {l1}, {l2})")));
    }
    let h1 = if periodic[0] { l1 / nx as f64 } else { l1 / (nx - 1) as f64 };
    let h2 = if periodic[1] { l2 / ny as f64 } else { l2 / (ny - 1) as f64 };
    let mut boundary_mask = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let on1 = !periodic[0] && (i == 0 || i == nx - 1);
            let on2 = !periodic[1] && (j == 0 || j == ny - 1);
            boundary_mask[i + nx * j] = on1 || on2;
        }
    }
    Ok(ParamGrid { nx, ny, h1, h2, x_origin: rect.origin, periodic1: periodic[0], periodic2: periodic[1], boundary_mask })
}

impl ParamGrid {
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    #[inline]
    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node % self.nx, node / self.nx)
    }

    pub fn coords(&self, node: usize) -> [f64; 2] {
        let (i, j) = self.ij(node);
        [self.x_origin[0] + i as f64 * self.h1, self.x_origin[1] + j as f64 * self.h2]
    }

    pub fn rect(&self) -> Rect {
        let l1 = if self.periodic1 { self.h1 * self.nx as f64 } else { self.h1 * (self.nx - 1) as f64 };
        let l2 = if self.periodic2 { self.h2 * self.ny as f64 } else { self.h2 * (self.ny - 1) as f64 };
        Rect::new(self.x_origin, [l1, l2])
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary_mask.iter().filter(|&&b| b).count()
    }

    /// Stencil of `d/dx_dir` at `node`, with taps given as global node indices.
    pub fn stencil(&self, node: usize, dir: usize) -> Stencil {
        let (i, j) = self.ij(node);
        if dir == 0 {
            let mut s = stencil_1d(i, self.nx, self.periodic1, self.h1);
            for k in 0..s.len {
                s.idx[k] = self.index(s.idx[k], j);
            }
            s
        } else {
            let mut s = stencil_1d(j, self.ny, self.periodic2, self.h2);
            for k in 0..s.len {
                s.idx[k] = self.index(i, s.idx[k]);
            }
            s
        }
    }

    /// Nodes read by either derivative stencil at `node`.
    pub fn support(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(8);
        for dir in 0..2 {
            let s = self.stencil(node, dir);
            for (n, _) in s.taps() {
                if !out.contains(&n) {
                    out.push(n);
                }
            }
        }
        out
    }

    /// Quadrature weight of `node`: trapezoidal in non-periodic directions,
    /// uniform (rectangle rule) in periodic ones.
    pub fn weight(&self, node: usize) -> f64 {
        let (i, j) = self.ij(node);
        let w1 = if !self.periodic1 && (i == 0 || i == self.nx - 1) { 0.5 * self.h1 } else { self.h1 };
        let w2 = if !self.periodic2 && (j == 0 || j == self.ny - 1) { 0.5 * self.h2 } else { self.h2 };
        w1 * w2
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.weight(n)).collect()
    }

    /// Quadrature of a nodal scalar field, summed in node order.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values.len())?;
        Ok(values.iter().enumerate().map(|(n, v)| self.weight(n) * v).sum())
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(ShellError::Shape(format!("field has {len} nodes, grid has {}", self.len())));
        }
        Ok(())
    }

    /// Apply the `dir` derivative stencil at `node` to a field accessor.
    #[inline]
    pub fn derivative_at<T: Real, F: Fn(usize) -> [T; 3]>(&self, node: usize, dir: usize, field: &F) -> [T; 3] {
        let s = self.stencil(node, dir);
        let mut out = [T::zero(); 3];
        for (n, w) in s.taps() {
            let v = field(n);
            for c in 0..3 {
                out[c] += v[c] * w;
            }
        }
        out
    }
}

/// Per-node gradients `[d1 f, d2 f]` of a 3-vector field.
pub fn differentiate(field: &[[f64; 3]], grid: &ParamGrid) -> Result<Vec<[[f64; 3]; 2]>> {
    grid.check_len(field.len())?;
    let get = |n: usize| field[n];
    Ok((0..grid.len()).map(|n| [grid.derivative_at(n, 0, &get), grid.derivative_at(n, 1, &get)]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_square_three_by_three() {
        let g = build_grid(Rect::unit(), 3, 3, [false, false]).unwrap();
        assert_eq!(g.h1, 0.5);
        assert_eq!(g.h2, 0.5);
        assert_eq!(g.boundary_count(), 8);
        assert!(!g.boundary_mask[g.index(1, 1)]);
    }

    #[test]
    fn doubly_periodic_has_no_boundary() {
        let g = build_grid(Rect::new([0.0, 0.0], [2.0 * PI, 2.0 * PI]), 4, 4, [true, true]).unwrap();
        assert!((g.h1 - PI / 2.0).abs() < 1e-15);
        assert!((g.h2 - PI / 2.0).abs() < 1e-15);
        assert_eq!(g.boundary_count(), 0);
    }

    #[test]
    fn degenerate_rect_rejected() {
        assert!(matches!(build_grid(Rect::new([0.0, 0.0], [0.0, 1.0]), 3, 3, [false, false]), Err(ShellError::InvalidGrid(_))));
        assert!(build_grid(Rect::unit(), 2, 5, [false, false]).is_err());
    }

    #[test]
    fn mixed_periodicity_marks_only_open_edges() {
        let g = build_grid(Rect::unit(), 5, 6, [true, false]).unwrap();
        assert_eq!(g.boundary_count(), 2 * 5);
    }

    #[test]
    fn linear_field_exact() {
        let g = build_grid(Rect::new([-0.3, 0.2], [1.7, 0.9]), 7, 5, [false, false]).unwrap();
        let f: Vec<[f64; 3]> = (0..g.len())
            .map(|n| {
                let x = g.coords(n);
                [x[0], x[1], 0.0]
            })
            .collect();
        for d in differentiate(&f, &g).unwrap() {
            for c in 0..3 {
                assert!((d[0][c] - [1.0, 0.0, 0.0][c]).abs() < 1e-13);
                assert!((d[1][c] - [0.0, 1.0, 0.0][c]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn quadratic_field_exact_everywhere() {
        for n in [3, 4, 9] {
            let g = build_grid(Rect::new([0.5, 0.0], [2.0, 1.0]), n, 4, [false, false]).unwrap();
            let f: Vec<[f64; 3]> = (0..g.len()).map(|k| [g.coords(k)[0].powi(2), 0.0, 0.0]).collect();
            let d = differentiate(&f, &g).unwrap();
            for k in 0..g.len() {
                assert!((d[k][0][0] - 2.0 * g.coords(k)[0]).abs() < 1e-12, "n={n} node={k}");
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let g = build_grid(Rect::unit(), 3, 3, [false, false]).unwrap();
        assert!(matches!(differentiate(&[[0.0; 3]; 4], &g), Err(ShellError::Shape(_))));
    }

    #[test]
    fn boundary_closure_has_matched_error() {
        // f = x^3: central error h^2/6 * 6 = h^2; closure must agree
        let h = 0.1;
        let s = stencil_1d(0, 10, false, h);
        let approx: f64 = s.taps().map(|(i, w)| w * (i as f64 * h).powi(3)).sum();
        assert!((approx - h * h).abs() < 1e-13);
    }

    #[test]
    fn periodic_sine_second_order() {
        let err = |n: usize| {
            let g = build_grid(Rect::new([0.0, 0.0], [2.0 * PI, 1.0]), n, 3, [true, false]).unwrap();
            let f: Vec<[f64; 3]> = (0..g.len()).map(|k| [g.coords(k)[0].sin(), 0.0, 0.0]).collect();
            let d = differentiate(&f, &g).unwrap();
            (0..g.len()).map(|k| (d[k][0][0] - g.coords(k)[0].cos()).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(32), err(64));
        let ratio = e1 / e2;
        assert!(ratio > 3.9 && ratio < 4.1, "ratio {ratio}");
    }

    #[test]
    fn trapezoid_weights_sum_to_area() {
        let g = build_grid(Rect::new([0.0, 0.0], [2.0, 3.0]), 5, 7, [false, true]).unwrap();
        let s: f64 = g.weights().iter().sum();
        assert!((s - 6.0).abs() < 1e-12);
    }
}
