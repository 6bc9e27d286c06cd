//! Spectral calculus for maps of the closed unit disc into C^2.
//!
//! Fields are stored as truncated bigraded monomial coefficients c_{m,n} on
//! z^m zbar^n, 0 <= m, n <= M, per component. In this basis d/dz, d/dzbar
//! and the Cauchy-Green transform T are exact sparse coefficient maps:
//!
//!   T(z^m zbar^n) = z^m zbar^{n+1}/(n+1) - [m >= n+1] z^{m-n-1}/(n+1)
//!
//! which satisfies dbar(T g) = g identically. The closed form is validated
//! against 2D quadrature of the defining integral in the test suite.
//!
//! Pointwise products (needed for the quasilinear PDE) are computed by
//! collocation on an (M+1) x N_theta polar grid followed by least-squares
//! re-projection onto the truncated basis; this keeps the degree closed at
//! the cost of dropping coefficients above M.

use crate::error::DiscError;
use crate::point::ComplexPoint2;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Default truncation degree.
pub const DEFAULT_DEGREE: usize = 24;
/// Default angular resolution (power of two, >= 4 * DEFAULT_DEGREE).
pub const DEFAULT_N_THETA: usize = 128;
/// Default Hoelder exponent.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// A C^2-valued field on the closed unit disc in bigraded coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscField {
    degree: usize,
    comps: [Vec<Complex64>; 2],
}

impl DiscField {
    pub fn zero(degree: usize) -> Self {
        assert!(degree >= 4, "truncation degree must be at least 4");
        let len = (degree + 1) * (degree + 1);
        Self {
            degree,
            comps: [vec![Complex64::default(); len], vec![Complex64::default(); len]],
        }
    }

    pub fn constant(p: ComplexPoint2, degree: usize) -> Self {
        let mut f = Self::zero(degree);
        f.comps[0][0] = p.z1;
        f.comps[1][0] = p.z2;
        f
    }

    /// Holomorphic polynomial target h(z) = center + sum_k a_k z^k,
    /// a_k given per component.
    pub fn holomorphic(center: ComplexPoint2, coeffs: &[[Complex64; 2]], degree: usize) -> Self {
        assert!(coeffs.len() <= degree, "polynomial degree exceeds truncation");
        let mut f = Self::constant(center, degree);
        for (k, a) in coeffs.iter().enumerate() {
            let idx = f.idx(k + 1, 0);
            f.comps[0][idx] = a[0];
            f.comps[1][idx] = a[1];
        }
        f
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    fn idx(&self, m: usize, n: usize) -> usize {
        m * (self.degree + 1) + n
    }

    pub fn coeff(&self, comp: usize, m: usize, n: usize) -> Complex64 {
        self.comps[comp][self.idx(m, n)]
    }

    pub fn set_coeff(&mut self, comp: usize, m: usize, n: usize, v: Complex64) {
        let i = self.idx(m, n);
        self.comps[comp][i] = v;
    }

    /// Largest n with a nonzero coefficient, or None for the zero field.
    pub fn max_n_degree(&self) -> Option<usize> {
        let mut best = None;
        for comp in &self.comps {
            for m in 0..=self.degree {
                for n in (0..=self.degree).rev() {
                    if comp[m * (self.degree + 1) + n] != Complex64::default() {
                        best = Some(best.map_or(n, |b: usize| b.max(n)));
                        break;
                    }
                }
            }
        }
        best
    }

    /// Value at the disc center (the (0,0) coefficient).
    pub fn center_value(&self) -> ComplexPoint2 {
        ComplexPoint2::new(self.comps[0][0], self.comps[1][0])
    }

    /// Bigraded Horner evaluation. Errors outside the closed disc.
    pub fn eval(&self, z: Complex64) -> Result<ComplexPoint2, DiscError> {
        if z.norm() > 1.0 + 1e-12 {
            return Err(DiscError::OutsideDisc(z.norm()));
        }
        Ok(self.eval_unchecked(z))
    }

    pub fn eval_unchecked(&self, z: Complex64) -> ComplexPoint2 {
        let zb = z.conj();
        let m1 = self.degree + 1;
        let mut out = [Complex64::default(); 2];
        for (c, o) in self.comps.iter().zip(out.iter_mut()) {
            let mut acc = Complex64::default();
            for m in (0..m1).rev() {
                let row = &c[m * m1..(m + 1) * m1];
                let mut inner = Complex64::default();
                for n in (0..m1).rev() {
                    inner = inner * zb + row[n];
                }
                acc = acc * z + inner;
            }
            *o = acc;
        }
        ComplexPoint2::new(out[0], out[1])
    }

    /// Coefficientwise linear combination self + s * other.
    pub fn axpy(&self, s: Complex64, other: &DiscField) -> DiscField {
        assert_eq!(self.degree, other.degree);
        let mut out = self.clone();
        for c in 0..2 {
            for (a, b) in out.comps[c].iter_mut().zip(other.comps[c].iter()) {
                *a += s * b;
            }
        }
        out
    }

    pub fn add(&self, other: &DiscField) -> DiscField {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &DiscField) -> DiscField {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    pub fn scale(&self, s: f64) -> DiscField {
        let mut out = self.clone();
        for c in 0..2 {
            for a in out.comps[c].iter_mut() {
                *a *= s;
            }
        }
        out
    }

    pub fn add_constant(&self, p: ComplexPoint2) -> DiscField {
        let mut out = self.clone();
        out.comps[0][0] += p.z1;
        out.comps[1][0] += p.z2;
        out
    }

    /// The precomposition z -> u(r z) for real 0 < r <= 1:
    /// coefficients scale by r^{m+n}.
    pub fn rescaled(&self, r: f64) -> DiscField {
        let mut out = self.clone();
        let m1 = self.degree + 1;
        for c in 0..2 {
            for m in 0..m1 {
                for n in 0..m1 {
                    out.comps[c][m * m1 + n] *= r.powi((m + n) as i32);
                }
            }
        }
        out
    }

    /// Shrink the nonconstant part by `s`, keeping the center fixed.
    pub fn shrunk_about_center(&self, s: f64) -> DiscField {
        let center = self.center_value();
        let mut out = self.scale(s);
        out.comps[0][0] = center.z1;
        out.comps[1][0] = center.z2;
        out
    }

    /// l1 norm of the coefficients; an upper bound for the sup norm.
    pub fn coeff_l1(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| c.iter().map(|x| x.norm()).sum::<f64>())
            .sum()
    }
}

/// d/dz: c_{m,n} -> m c_{m,n} at (m-1, n).
pub fn dz(u: &DiscField) -> DiscField {
    let m1 = u.degree + 1;
    let mut out = DiscField::zero(u.degree);
    for c in 0..2 {
        for m in 1..m1 {
            for n in 0..m1 {
                out.comps[c][(m - 1) * m1 + n] = u.comps[c][m * m1 + n] * m as f64;
            }
        }
    }
    out
}

/// d/dzbar: c_{m,n} -> n c_{m,n} at (m, n-1).
pub fn dbar(u: &DiscField) -> DiscField {
    let m1 = u.degree + 1;
    let mut out = DiscField::zero(u.degree);
    for c in 0..2 {
        for m in 0..m1 {
            for n in 1..m1 {
                out.comps[c][m * m1 + n - 1] = u.comps[c][m * m1 + n] * n as f64;
            }
        }
    }
    out
}

/// The Cauchy-Green transform, monomial-wise. Requires one degree of
/// headroom in n; errors with [`DiscError::TruncationOverflow`] otherwise.
pub fn cg_transform(g: &DiscField) -> Result<DiscField, DiscError> {
    let deg = g.degree;
    if let Some(have) = g.max_n_degree() {
        if have >= deg {
            return Err(DiscError::TruncationOverflow {
                op: "cg_transform",
                degree: deg,
                have,
            });
        }
    }
    let m1 = deg + 1;
    let mut out = DiscField::zero(deg);
    for c in 0..2 {
        for m in 0..m1 {
            for n in 0..m1 - 1 {
                let a = g.comps[c][m * m1 + n];
                if a == Complex64::default() {
                    continue;
                }
                let scale = 1.0 / (n as f64 + 1.0);
                out.comps[c][m * m1 + n + 1] += a * scale;
                if m >= n + 1 {
                    out.comps[c][(m - n - 1) * m1] -= a * scale;
                }
            }
        }
    }
    Ok(out)
}

/// Boundary values at the N_theta roots of unity.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    pub n_theta: usize,
    pub values: Vec<ComplexPoint2>,
}

impl BoundaryTrace {
    pub fn angle(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * j as f64 / self.n_theta as f64
    }
}

fn check_resolution(n_theta: usize, degree: usize) -> Result<(), DiscError> {
    if !n_theta.is_power_of_two() || n_theta < 4 * degree {
        return Err(DiscError::InvalidResolution {
            n_theta,
            min: 4 * degree,
        });
    }
    Ok(())
}

/// Evaluate on the circle of radius `r` at `n_theta` equispaced angles.
pub fn circle_trace(u: &DiscField, r: f64, n_theta: usize) -> Result<BoundaryTrace, DiscError> {
    check_resolution(n_theta, u.degree)?;
    if !(0.0..=1.0 + 1e-12).contains(&r) {
        return Err(DiscError::OutsideDisc(r));
    }
    let values = (0..n_theta)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / n_theta as f64;
            u.eval_unchecked(Complex64::from_polar(r, th))
        })
        .collect();
    Ok(BoundaryTrace { n_theta, values })
}

/// Trace on the unit circle.
pub fn boundary_trace(u: &DiscField, n_theta: usize) -> Result<BoundaryTrace, DiscError> {
    circle_trace(u, 1.0, n_theta)
}

/// Values of a C^2 field on the collocation grid (radius-major layout).
#[derive(Debug, Clone)]
pub struct GridValues {
    pub comps: [Vec<Complex64>; 2],
}

struct FreqBlock {
    /// (m, n) pairs of the unknowns for this frequency.
    monomials: Vec<(usize, usize)>,
    /// Pseudo-inverse of the radial Vandermonde, applied to FFT bins.
    pinv: DMatrix<f64>,
}

/// Shared collocation machinery for a fixed (degree, n_theta):
/// Chebyshev-in-r^2 radii, FFT plans, and per-frequency radial
/// least-squares factors.
pub struct DiscGrid {
    pub degree: usize,
    pub n_theta: usize,
    pub radii: Vec<f64>,
    /// powers[i][k] = radii[i]^k, k <= 2 degree.
    powers: Vec<Vec<f64>>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
    /// Projection blocks onto total degree M, frequency f = index - M.
    blocks_full: Vec<FreqBlock>,
    /// Projection blocks onto total degree M-1 (headroom for T).
    blocks_cg: Vec<FreqBlock>,
}

impl DiscGrid {
    pub fn new(degree: usize, n_theta: usize) -> Result<Arc<Self>, DiscError> {
        if degree < 4 {
            return Err(DiscError::DegreeTooSmall(degree));
        }
        check_resolution(n_theta, degree)?;
        static CACHE: OnceLock<Mutex<BTreeMap<(usize, usize), Arc<DiscGrid>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
        {
            let guard = cache.lock().unwrap();
            if let Some(g) = guard.get(&(degree, n_theta)) {
                return Ok(Arc::clone(g));
            }
        }
        let grid = Arc::new(Self::build(degree, n_theta));
        cache
            .lock()
            .unwrap()
            .insert((degree, n_theta), Arc::clone(&grid));
        Ok(grid)
    }

    fn build(degree: usize, n_theta: usize) -> Self {
        let nr = degree + 1;
        // Chebyshev nodes in s = r^2 keep the radial fits well conditioned.
        let radii: Vec<f64> = (0..nr)
            .map(|i| {
                let s = 0.5
                    * (1.0
                        + (std::f64::consts::PI * (2.0 * i as f64 + 1.0) / (2.0 * nr as f64)).cos());
                s.sqrt()
            })
            .collect();
        let powers: Vec<Vec<f64>> = radii
            .iter()
            .map(|&r| {
                let mut p = Vec::with_capacity(2 * degree + 1);
                let mut acc = 1.0;
                for _ in 0..=2 * degree {
                    p.push(acc);
                    acc *= r;
                }
                p
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(n_theta);
        let fft_inv = planner.plan_fft_inverse(n_theta);

        // Projection targets the total-degree space m + n <= max_total: per
        // frequency the radial fit then has polynomial degree <= max_total/2
        // in s = r^2, which keeps the monomial Vandermonde well conditioned.
        let build_blocks = |max_total: usize| -> Vec<FreqBlock> {
            let m = degree as isize;
            let mut blocks = Vec::new();
            for f in -m..=m {
                let mut monomials = Vec::new();
                let af = f.unsigned_abs();
                let mut n_lo = 0usize;
                while af + 2 * n_lo <= max_total {
                    let (mm, nn) = if f >= 0 {
                        (af + n_lo, n_lo)
                    } else {
                        (n_lo, af + n_lo)
                    };
                    monomials.push((mm, nn));
                    n_lo += 1;
                }
                let pinv = if monomials.is_empty() {
                    DMatrix::zeros(0, nr)
                } else {
                    let v = DMatrix::from_fn(nr, monomials.len(), |i, k| {
                        let (mm, nn) = monomials[k];
                        powers[i][mm + nn]
                    });
                    // Relative cutoff: the monomial radial basis is badly
                    // conditioned at high degree, and near-null directions
                    // only inject coefficient noise with negligible field
                    // values.
                    let sigma_max = v
                        .clone()
                        .svd(false, false)
                        .singular_values
                        .iter()
                        .cloned()
                        .fold(0.0f64, f64::max);
                    v.pseudo_inverse(sigma_max * 1e-12)
                        .expect("radial Vandermonde pinv")
                };
                blocks.push(FreqBlock { monomials, pinv });
            }
            blocks
        };

        let blocks_full = build_blocks(degree);
        let blocks_cg = build_blocks(degree - 1);
        Self {
            degree,
            n_theta,
            radii,
            powers,
            fft_fwd,
            fft_inv,
            blocks_full,
            blocks_cg,
        }
    }

    pub fn n_points(&self) -> usize {
        self.radii.len() * self.n_theta
    }

    /// The collocation point at (radius index, angle index).
    pub fn point(&self, i: usize, j: usize) -> Complex64 {
        let th = 2.0 * std::f64::consts::PI * j as f64 / self.n_theta as f64;
        Complex64::from_polar(self.radii[i], th)
    }

    /// Evaluate a field at all collocation points (frequency synthesis plus
    /// inverse FFT per radius).
    pub fn eval_on_grid(&self, u: &DiscField) -> GridValues {
        assert_eq!(u.degree, self.degree, "field degree mismatch");
        let m1 = self.degree + 1;
        let n = self.n_theta;
        let mut comps = [
            vec![Complex64::default(); self.n_points()],
            vec![Complex64::default(); self.n_points()],
        ];
        let mut spectrum = vec![Complex64::default(); n];
        for c in 0..2 {
            for (i, pw) in self.powers.iter().enumerate() {
                spectrum.iter_mut().for_each(|x| *x = Complex64::default());
                for m in 0..m1 {
                    for nn in 0..m1 {
                        let a = u.comps[c][m * m1 + nn];
                        if a == Complex64::default() {
                            continue;
                        }
                        let f = m as isize - nn as isize;
                        let bin = f.rem_euclid(n as isize) as usize;
                        spectrum[bin] += a * pw[m + nn];
                    }
                }
                self.fft_inv.process(&mut spectrum);
                comps[c][i * n..(i + 1) * n].copy_from_slice(&spectrum);
            }
        }
        GridValues { comps }
    }

    fn project_impl(&self, values: &GridValues, blocks: &[FreqBlock]) -> DiscField {
        let n = self.n_theta;
        let nr = self.radii.len();
        let m = self.degree as isize;
        let m1 = self.degree + 1;
        let mut out = DiscField::zero(self.degree);
        let mut buf = vec![Complex64::default(); n];
        // bins[f + M][i] after the forward FFT per radius
        let mut bins = vec![vec![Complex64::default(); nr]; (2 * self.degree + 1).max(1)];
        for c in 0..2 {
            for row in bins.iter_mut() {
                row.iter_mut().for_each(|x| *x = Complex64::default());
            }
            for i in 0..nr {
                buf.copy_from_slice(&values.comps[c][i * n..(i + 1) * n]);
                self.fft_fwd.process(&mut buf);
                for f in -m..=m {
                    let bin = f.rem_euclid(n as isize) as usize;
                    bins[(f + m) as usize][i] = buf[bin] / n as f64;
                }
            }
            for (bi, block) in blocks.iter().enumerate() {
                if block.monomials.is_empty() {
                    continue;
                }
                let b = &bins[bi];
                for (k, &(mm, nn)) in block.monomials.iter().enumerate() {
                    let mut acc = Complex64::default();
                    for i in 0..nr {
                        acc += b[i] * block.pinv[(k, i)];
                    }
                    out.comps[c][mm * m1 + nn] += acc;
                }
            }
        }
        out
    }

    /// Least-squares re-projection onto the total-degree-M basis.
    pub fn project(&self, values: &GridValues) -> DiscField {
        self.project_impl(values, &self.blocks_full)
    }

    /// Projection onto total degree M-1, which is safe as T input.
    pub fn project_cg_input(&self, values: &GridValues) -> DiscField {
        self.project_impl(values, &self.blocks_cg)
    }

    /// Sup of the pointwise Euclidean norm over the collocation radii plus
    /// the boundary ring.
    pub fn sup_norm(&self, u: &DiscField) -> f64 {
        let vals = self.eval_on_grid(u);
        let mut best = 0.0f64;
        for i in 0..self.n_points() {
            let s = vals.comps[0][i].norm_sqr() + vals.comps[1][i].norm_sqr();
            best = best.max(s);
        }
        for j in 0..self.n_theta {
            let th = 2.0 * std::f64::consts::PI * j as f64 / self.n_theta as f64;
            let v = u.eval_unchecked(Complex64::from_polar(1.0, th));
            best = best.max(v.norm_sqr());
        }
        best.sqrt()
    }

    /// Grid estimate of the C^{1,alpha} Hoelder seminorm of the derivative.
    ///
    /// Max over pairs of sample points with |x - y| at least the sample
    /// spacing; this is an approximation, not a certified bound.
    pub fn c1_alpha_seminorm(&self, u: &DiscField, alpha: f64) -> f64 {
        assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0,1)");
        self.c1_alpha_seminorm_sampled(u, alpha, 10, 24)
    }

    pub fn c1_alpha_seminorm_sampled(
        &self,
        u: &DiscField,
        alpha: f64,
        n_r: usize,
        n_th: usize,
    ) -> f64 {
        let du_z = dz(u);
        let du_zb = dbar(u);
        let mut pts = Vec::with_capacity(n_r * n_th);
        let mut jac = Vec::with_capacity(n_r * n_th);
        for ir in 0..n_r {
            let r = (ir as f64 + 1.0) / n_r as f64;
            for jt in 0..n_th {
                let th = 2.0 * std::f64::consts::PI * jt as f64 / n_th as f64;
                let z = Complex64::from_polar(r, th);
                let a = du_z.eval_unchecked(z);
                let b = du_zb.eval_unchecked(z);
                // u_x = dz + dbar, u_y = i (dz - dbar), per component
                let ux = a + b;
                let uy = ComplexPoint2::new(
                    Complex64::i() * (a.z1 - b.z1),
                    Complex64::i() * (a.z2 - b.z2),
                );
                pts.push(z);
                jac.push([ux.to_real(), uy.to_real()]);
            }
        }
        let min_sep = 1.0 / n_r as f64;
        let mut best = 0.0f64;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let d = (pts[i] - pts[j]).norm();
                if d < min_sep {
                    continue;
                }
                let mut diff = 0.0f64;
                for col in 0..2 {
                    for row in 0..4 {
                        diff = diff.max((jac[i][col][row] - jac[j][col][row]).abs());
                    }
                }
                best = best.max(diff / d.powf(alpha));
            }
        }
        best
    }
}

impl std::fmt::Debug for DiscGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "DiscGrid {{ degree: {}, n_theta: {} }}",
            self.degree, self.n_theta
        )
    }
}

/// JSON shape: {degree, components: [[re, im] ...] per component,
/// (m, n) row-major}.
#[derive(Serialize, Deserialize)]
struct DiscFieldJson {
    degree: usize,
    components: [Vec<[f64; 2]>; 2],
}

impl Serialize for DiscField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mk = |c: &Vec<Complex64>| c.iter().map(|x| [x.re, x.im]).collect::<Vec<_>>();
        DiscFieldJson {
            degree: self.degree,
            components: [mk(&self.comps[0]), mk(&self.comps[1])],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiscField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = DiscFieldJson::deserialize(d)?;
        let len = (raw.degree + 1) * (raw.degree + 1);
        if raw.components[0].len() != len || raw.components[1].len() != len {
            return Err(serde::de::Error::custom("coefficient count mismatch"));
        }
        let mk = |c: &Vec<[f64; 2]>| c.iter().map(|x| Complex64::new(x[0], x[1])).collect();
        Ok(DiscField {
            degree: raw.degree,
            comps: [mk(&raw.components[0]), mk(&raw.components[1])],
        })
    }
}
