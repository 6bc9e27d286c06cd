//! Domains, sampling grids and real scalar fields on C^2.

use crate::point::ComplexPoint2;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// An open ball { |z - P| < eps } in C^2.
#[derive(Debug, Clone, Copy)]
pub struct Domain {
    pub center: ComplexPoint2,
    pub radius: f64,
}

impl Domain {
    pub fn new(center: ComplexPoint2, radius: f64) -> Self {
        assert!(radius > 0.0, "domain radius must be positive");
        Self { center, radius }
    }

    pub fn unit_ball() -> Self {
        Self::new(ComplexPoint2::ORIGIN, 1.0)
    }

    pub fn contains(&self, z: &ComplexPoint2) -> bool {
        z.dist(self.center) < self.radius
    }

    /// Distance to the boundary; positive for members, negative outside.
    pub fn boundary_distance(&self, z: &ComplexPoint2) -> f64 {
        self.radius - z.dist(self.center)
    }

    /// The concentric ball scaled by `f`.
    pub fn scaled(&self, f: f64) -> Domain {
        Domain::new(self.center, self.radius * f)
    }
}

/// Axis-aligned lattice in the real coordinates (x1, y1, x2, y2).
///
/// An axis with a single node is collapsed, which yields 2D slices of C^2.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    pub center: [f64; 4],
    pub half_widths: [f64; 4],
    pub nodes: [usize; 4],
}

impl GridSpec {
    pub fn new(center: [f64; 4], half_widths: [f64; 4], nodes: [usize; 4]) -> Self {
        assert!(nodes.iter().all(|&n| n >= 1), "each axis needs >= 1 node");
        Self {
            center,
            half_widths,
            nodes,
        }
    }

    /// Cube grid centered at `p` with equal half-widths and node counts.
    pub fn cube(p: ComplexPoint2, half_width: f64, nodes_per_axis: usize) -> Self {
        Self::new(
            p.to_real(),
            [half_width; 4],
            [nodes_per_axis; 4],
        )
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node spacing along an axis (zero for collapsed axes).
    pub fn spacing(&self, axis: usize) -> f64 {
        if self.nodes[axis] <= 1 {
            0.0
        } else {
            2.0 * self.half_widths[axis] / (self.nodes[axis] - 1) as f64
        }
    }

    /// Largest spacing over non-collapsed axes.
    pub fn max_spacing(&self) -> f64 {
        (0..4).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        if self.nodes[axis] <= 1 {
            self.center[axis]
        } else {
            self.center[axis] - self.half_widths[axis] + self.spacing(axis) * i as f64
        }
    }

    /// Multi-index of a flat node index (row-major, axis 0 slowest).
    pub fn multi_index(&self, flat: usize) -> [usize; 4] {
        let mut rem = flat;
        let mut idx = [0usize; 4];
        for a in (0..4).rev() {
            idx[a] = rem % self.nodes[a];
            rem /= self.nodes[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: [usize; 4]) -> usize {
        let mut flat = 0usize;
        for a in 0..4 {
            flat = flat * self.nodes[a] + idx[a];
        }
        flat
    }

    pub fn point(&self, flat: usize) -> ComplexPoint2 {
        let idx = self.multi_index(flat);
        ComplexPoint2::from_real([
            self.axis_coord(0, idx[0]),
            self.axis_coord(1, idx[1]),
            self.axis_coord(2, idx[2]),
            self.axis_coord(3, idx[3]),
        ])
    }

    pub fn points(&self) -> impl Iterator<Item = ComplexPoint2> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Grid refined by doubling the resolution of non-collapsed axes.
    pub fn refined(&self) -> GridSpec {
        let mut nodes = self.nodes;
        for n in nodes.iter_mut() {
            if *n > 1 {
                *n = 2 * *n - 1;
            }
        }
        GridSpec::new(self.center, self.half_widths, nodes)
    }
}

/// Interpolation rule for grid-sampled fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interpolation {
    /// Tensor-product linear interpolation; monotone, no overshoot.
    Multilinear,
    /// Tensor-product Catmull-Rom; accurate on smooth data.
    Cubic,
    /// Max over the surrounding cell corners; compatible with upper
    /// semicontinuous inputs.
    UscMax,
}

/// Real values sampled on a [`GridSpec`], evaluable anywhere by interpolation.
///
/// Evaluation outside the grid box clamps to the box (constant extension).
#[derive(Debug, Clone)]
pub struct GridField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub interp: Interpolation,
}

impl GridField {
    pub fn new(spec: GridSpec, values: Vec<f64>, interp: Interpolation) -> Self {
        assert_eq!(spec.len(), values.len(), "value count must match grid");
        Self {
            spec,
            values,
            interp,
        }
    }

    pub fn from_fn(
        spec: GridSpec,
        interp: Interpolation,
        f: impl Fn(&ComplexPoint2) -> f64,
    ) -> Self {
        let values = (0..spec.len()).map(|i| f(&spec.point(i))).collect();
        Self::new(spec, values, interp)
    }

    pub fn value(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    fn axis_frac(&self, axis: usize, x: f64) -> (usize, f64) {
        let n = self.spec.nodes[axis];
        if n <= 1 {
            return (0, 0.0);
        }
        let h = self.spec.spacing(axis);
        let u = (x - (self.spec.center[axis] - self.spec.half_widths[axis])) / h;
        let u = u.clamp(0.0, (n - 1) as f64);
        let mut cell = u.floor() as usize;
        if cell >= n - 1 {
            cell = n - 2;
        }
        (cell, u - cell as f64)
    }

    pub fn eval(&self, z: &ComplexPoint2) -> f64 {
        let x = z.to_real();
        match self.interp {
            Interpolation::Multilinear => self.eval_multilinear(x),
            Interpolation::Cubic => self.eval_cubic(x),
            Interpolation::UscMax => self.eval_usc_max(x),
        }
    }

    fn eval_multilinear(&self, x: [f64; 4]) -> f64 {
        let mut cell = [0usize; 4];
        let mut t = [0.0f64; 4];
        for a in 0..4 {
            let (c, f) = self.axis_frac(a, x[a]);
            cell[a] = c;
            t[a] = f;
        }
        let mut acc = 0.0;
        for corner in 0..16usize {
            let mut idx = [0usize; 4];
            let mut w = 1.0;
            for a in 0..4 {
                let hi = (corner >> a) & 1 == 1;
                if self.spec.nodes[a] <= 1 {
                    if hi {
                        w = 0.0;
                    }
                    idx[a] = 0;
                } else {
                    idx[a] = cell[a] + hi as usize;
                    w *= if hi { t[a] } else { 1.0 - t[a] };
                }
            }
            if w != 0.0 {
                acc += w * self.values[self.spec.flat_index(idx)];
            }
        }
        acc
    }

    fn eval_usc_max(&self, x: [f64; 4]) -> f64 {
        let mut cell = [0usize; 4];
        for a in 0..4 {
            let (c, _) = self.axis_frac(a, x[a]);
            cell[a] = c;
        }
        let mut best = f64::NEG_INFINITY;
        for corner in 0..16usize {
            let mut idx = [0usize; 4];
            let mut live = true;
            for a in 0..4 {
                let hi = (corner >> a) & 1 == 1;
                if self.spec.nodes[a] <= 1 {
                    if hi {
                        live = false;
                        break;
                    }
                    idx[a] = 0;
                } else {
                    idx[a] = cell[a] + hi as usize;
                }
            }
            if live {
                best = best.max(self.values[self.spec.flat_index(idx)]);
            }
        }
        best
    }

    fn eval_cubic(&self, x: [f64; 4]) -> f64 {
        // Catmull-Rom weights per axis over a clamped 4-node stencil.
        let mut stencil = [[0usize; 4]; 4];
        let mut weights = [[0.0f64; 4]; 4];
        let mut width = [1usize; 4];
        for a in 0..4 {
            let n = self.spec.nodes[a];
            if n <= 1 {
                stencil[a][0] = 0;
                weights[a][0] = 1.0;
                width[a] = 1;
                continue;
            }
            let (cell, t) = self.axis_frac(a, x[a]);
            if n < 4 {
                // Not enough nodes for a cubic stencil; fall back to linear.
                stencil[a][0] = cell;
                stencil[a][1] = cell + 1;
                weights[a][0] = 1.0 - t;
                weights[a][1] = t;
                width[a] = 2;
                continue;
            }
            let t2 = t * t;
            let t3 = t2 * t;
            let w = [
                0.5 * (-t + 2.0 * t2 - t3),
                0.5 * (2.0 - 5.0 * t2 + 3.0 * t3),
                0.5 * (t + 4.0 * t2 - 3.0 * t3),
                0.5 * (-t2 + t3),
            ];
            for (j, wj) in w.iter().enumerate() {
                let raw = cell as isize + j as isize - 1;
                stencil[a][j] = raw.clamp(0, (n - 1) as isize) as usize;
                weights[a][j] = *wj;
            }
            width[a] = 4;
        }
        let mut acc = 0.0;
        for i0 in 0..width[0] {
            for i1 in 0..width[1] {
                for i2 in 0..width[2] {
                    for i3 in 0..width[3] {
                        let w = weights[0][i0] * weights[1][i1] * weights[2][i2] * weights[3][i3];
                        if w == 0.0 {
                            continue;
                        }
                        let idx = [stencil[0][i0], stencil[1][i1], stencil[2][i2], stencil[3][i3]];
                        acc += w * self.values[self.spec.flat_index(idx)];
                    }
                }
            }
        }
        acc
    }
}

/// Modulus of continuity: nondecreasing, vanishing at 0+.
#[derive(Clone)]
pub enum Modulus {
    Lipschitz(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Modulus {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Modulus::Lipschitz(l) => l * x,
            Modulus::Custom(f) => f(x),
        }
    }
}

impl std::fmt::Debug for Modulus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Modulus::Lipschitz(l) => write!(f, "Lipschitz({l})"),
            Modulus::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// A real-valued function on (a domain of) C^2, closed-form or grid-sampled.
#[derive(Clone)]
pub struct ScalarField {
    eval: Arc<dyn Fn(&ComplexPoint2) -> f64 + Send + Sync>,
    pub modulus: Option<Modulus>,
}

impl ScalarField {
    pub fn closed(f: impl Fn(&ComplexPoint2) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(f),
            modulus: None,
        }
    }

    pub fn from_grid(grid: GridField) -> Self {
        Self {
            eval: Arc::new(move |z| grid.eval(z)),
            modulus: None,
        }
    }

    pub fn with_modulus(mut self, m: Modulus) -> Self {
        self.modulus = Some(m);
        self
    }

    pub fn eval(&self, z: &ComplexPoint2) -> f64 {
        (self.eval)(z)
    }

    /// Sample onto a grid.
    pub fn sample(&self, spec: &GridSpec, interp: Interpolation) -> GridField {
        GridField::from_fn(spec.clone(), interp, |z| self.eval(z))
    }

    pub fn constant(c: f64) -> Self {
        Self::closed(move |_| c).with_modulus(Modulus::Lipschitz(0.0))
    }

    /// |z - P|^2, plurisubharmonic for the standard structure.
    pub fn sq_norm_about(p: ComplexPoint2) -> Self {
        Self::closed(move |z| (*z - p).norm_sqr())
    }

    /// -|z1|^2.
    pub fn neg_abs_z1_sq() -> Self {
        Self::closed(|z| -z.z1.norm_sqr())
    }

    /// Re z1, pluriharmonic.
    pub fn re_z1() -> Self {
        Self::closed(|z| z.z1.re).with_modulus(Modulus::Lipschitz(1.0))
    }
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ScalarField {{ modulus: {:?} }}", self.modulus)
    }
}
