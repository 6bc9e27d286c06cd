//! Seeded random generation of points, targets and solved discs.
//!
//! Every stochastic choice in the crate flows through [`rng_for`], so a
//! scenario seed pins all outputs byte-for-byte regardless of thread count.

use crate::disc::{DiscField, DiscGrid};
use crate::error::SolverError;
use crate::field::Domain;
use crate::point::ComplexPoint2;
use crate::solver::{solve_disc, SolvedDisc, SolverConfig};
use crate::structure::QTensor;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive an independent stream from a base seed and a context salt.
pub fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Uniform point in the ball of radius `r * domain.radius` about the center.
pub fn random_point_in_ball(rng: &mut ChaCha8Rng, domain: &Domain, r: f64) -> ComplexPoint2 {
    // Normal direction, radius by the 4-dimensional volume rule.
    loop {
        let x: [f64; 4] = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let n2 = x.iter().map(|v| v * v).sum::<f64>();
        if n2 <= 1.0 && n2 > 1e-12 {
            let scale = r * domain.radius;
            return domain.center
                + ComplexPoint2::from_real([x[0] * scale, x[1] * scale, x[2] * scale, x[3] * scale]);
        }
    }
}

fn random_unit_complex_pair(rng: &mut ChaCha8Rng) -> [Complex64; 2] {
    let raw = [
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
    ];
    let n = (raw[0].norm_sqr() + raw[1].norm_sqr()).sqrt().max(1e-9);
    [raw[0] / n, raw[1] / n]
}

/// Random holomorphic polynomial target centered at `p` whose coefficient
/// vector has Euclidean size `scale`.
pub fn random_holomorphic_target(
    rng: &mut ChaCha8Rng,
    p: ComplexPoint2,
    degree_poly: usize,
    scale: f64,
    degree: usize,
) -> DiscField {
    let mut coeffs = Vec::with_capacity(degree_poly);
    let mut total = 0.0f64;
    let mut raw = Vec::with_capacity(degree_poly);
    for _ in 0..degree_poly {
        let c = random_unit_complex_pair(rng);
        let w = rng.gen_range(0.2..1.0);
        total += w * w;
        raw.push([c[0] * w, c[1] * w]);
    }
    let norm = total.sqrt().max(1e-12);
    for c in raw {
        coeffs.push([c[0] * (scale / norm), c[1] * (scale / norm)]);
    }
    DiscField::holomorphic(p, &coeffs, degree)
}

/// A solved J-holomorphic disc with its image certificate.
pub struct SampledDisc {
    pub solved: SolvedDisc,
    /// sup |lambda - lambda(0)| over the collocation grid.
    pub scale: f64,
}

/// Options for random disc sampling.
#[derive(Debug, Clone)]
pub struct DiscSampler {
    /// Centers are drawn in the ball of this fraction of the domain radius.
    pub center_fraction: f64,
    /// Target coefficient size, as a fraction of distance to the boundary.
    pub scale_range: (f64, f64),
    /// Polynomial degree of targets.
    pub target_degree: usize,
    /// Images must stay within this fraction of the domain radius.
    pub image_fraction: f64,
    /// Shrink factor and retry count for infeasible candidates.
    pub shrink: f64,
    pub shrink_retries: usize,
}

impl Default for DiscSampler {
    fn default() -> Self {
        Self {
            center_fraction: 0.7,
            scale_range: (0.15, 0.5),
            target_degree: 2,
            image_fraction: 0.95,
            shrink: 0.9,
            shrink_retries: 5,
        }
    }
}

impl DiscSampler {
    /// Draw one solved disc whose image lies inside the scaled domain.
    /// Retries draws and shrinks targets until feasible.
    pub fn sample(
        &self,
        rng: &mut ChaCha8Rng,
        domain: &Domain,
        q: &QTensor,
        grid: &DiscGrid,
        cfg: &SolverConfig,
    ) -> Result<SampledDisc, SolverError> {
        let limit = domain.radius * self.image_fraction;
        let mut last_err = None;
        for _ in 0..24 {
            let p = random_point_in_ball(rng, domain, self.center_fraction);
            let bd = limit - p.dist(domain.center);
            if bd <= 0.0 {
                continue;
            }
            let s = rng.gen_range(self.scale_range.0..self.scale_range.1) * bd;
            let mut h =
                random_holomorphic_target(rng, p, self.target_degree, s, grid.degree);
            let mut attempt = 0;
            loop {
                match solve_disc(&h, q, grid, cfg) {
                    Ok(solved) => {
                        let (max_dist, scale) = image_extent(&solved.field, domain, grid);
                        if max_dist <= limit {
                            return Ok(SampledDisc { solved, scale });
                        }
                        attempt += 1;
                        if attempt > self.shrink_retries {
                            break;
                        }
                        h = h.shrunk_about_center(self.shrink);
                    }
                    Err(e @ SolverError::NoConvergence { .. }) => {
                        last_err = Some(e);
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Err(last_err.unwrap_or(SolverError::NoConvergence {
            residual: f64::NAN,
            iterations: 0,
            at_t: None,
        }))
    }
}

/// (max distance of the image from the domain center, disc oscillation).
pub fn image_extent(field: &DiscField, domain: &Domain, grid: &DiscGrid) -> (f64, f64) {
    let vals = grid.eval_on_grid(field);
    let center = field.center_value();
    let mut max_dist = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..grid.n_points() {
        let p = ComplexPoint2::new(vals.comps[0][i], vals.comps[1][i]);
        max_dist = max_dist.max(p.dist(domain.center));
        scale = scale.max(p.dist(center));
    }
    for j in 0..grid.n_theta {
        let th = 2.0 * std::f64::consts::PI * j as f64 / grid.n_theta as f64;
        let p = field.eval_unchecked(Complex64::from_polar(1.0, th));
        max_dist = max_dist.max(p.dist(domain.center));
        scale = scale.max(p.dist(center));
    }
    (max_dist, scale)
}
