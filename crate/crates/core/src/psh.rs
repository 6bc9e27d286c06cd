//! Numerical plurisubharmonicity testing and strictly subharmonic
//! exhaustion functions.
//!
//! A function is plurisubharmonic for J when it is upper semicontinuous
//! and subharmonic along every J-holomorphic disc; the checkable surrogate
//! is the sub-mean-value inequality u(lambda(0)) <= mean u(lambda(r e^{it}))
//! over solved sample discs.

use crate::disc::DiscGrid;
use crate::error::{PipelineError, SolverError};
use crate::field::{Domain, ScalarField};
use crate::point::ComplexPoint2;
use crate::sampling::{rng_for, DiscSampler};
use crate::solver::SolverConfig;
use crate::structure::QTensor;
use num_complex::Complex64;
use serde::Serialize;

/// Violation data for one (disc, radius) pair.
#[derive(Debug, Clone, Serialize)]
pub struct SubMeanSample {
    pub center: [f64; 4],
    pub radius: f64,
    pub disc_scale: f64,
    /// u(center) - mean; positive means the inequality is violated.
    pub violation: f64,
}

/// Report of a sub-mean-value sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SubMeanReport {
    pub discs_used: usize,
    pub max_violation: f64,
    /// Fitted strictness coefficient: min over non-degenerate samples of
    /// (mean - value) / r^2; positive for strictly subharmonic fields.
    pub margin_coefficient: f64,
    pub worst: Option<SubMeanSample>,
}

impl SubMeanReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_violation <= tolerance
    }
}

/// Violations of one disc at the given radii. Returns (violation, radius)
/// pairs; evaluation uses the trace of the solved disc directly.
pub fn disc_violations(
    u: &ScalarField,
    disc: &crate::disc::DiscField,
    radii: &[f64],
    n_theta: usize,
) -> Vec<(f64, f64)> {
    let center = disc.center_value();
    let u0 = u.eval(&center);
    radii
        .iter()
        .map(|&r| {
            let mut acc = 0.0;
            for j in 0..n_theta {
                let th = 2.0 * std::f64::consts::PI * j as f64 / n_theta as f64;
                let p = disc.eval_unchecked(Complex64::from_polar(r, th));
                acc += u.eval(&p);
            }
            (u0 - acc / n_theta as f64, r)
        })
        .collect()
}

/// Check the sub-mean-value inequality for `u` over randomly sampled solved
/// J-holomorphic discs with image in (the sampler's fraction of) `omega`.
pub fn sub_mean_check(
    u: &ScalarField,
    omega: &Domain,
    q: &QTensor,
    grid: &DiscGrid,
    cfg: &SolverConfig,
    n_discs: usize,
    radii: &[f64],
    seed: u64,
    sampler: &DiscSampler,
) -> Result<SubMeanReport, SolverError> {
    assert!(radii.iter().all(|r| *r > 0.0 && *r <= 1.0), "radii in (0,1]");
    let mut rng = rng_for(seed, 0x50B);
    let mut max_violation = f64::NEG_INFINITY;
    let mut margin = f64::INFINITY;
    let mut worst = None;
    let n_theta = 64usize.max(grid.n_theta / 2);
    for _ in 0..n_discs {
        let sample = sampler.sample(&mut rng, omega, q, grid, cfg)?;
        let center = sample.solved.field.center_value().to_real();
        for (violation, r) in disc_violations(u, &sample.solved.field, radii, n_theta) {
            if violation > max_violation {
                max_violation = violation;
                worst = Some(SubMeanSample {
                    center,
                    radius: r,
                    disc_scale: sample.scale,
                    violation,
                });
            }
            if sample.scale >= 0.02 {
                margin = margin.min(-violation / (r * r));
            }
        }
    }
    Ok(SubMeanReport {
        discs_used: n_discs,
        max_violation,
        margin_coefficient: if margin.is_finite() { margin } else { 0.0 },
        worst,
    })
}

/// rho(z) = A |z - P|^2 - B log(eps^2 - |z - P|^2): tends to +infinity at
/// the boundary and is strictly plurisubharmonic for structures close to
/// standard (certified numerically, not assumed).
#[derive(Debug, Clone, Serialize)]
pub struct ExhaustionFunction {
    pub center: [f64; 4],
    pub eps: f64,
    pub a: f64,
    pub b: f64,
}

impl ExhaustionFunction {
    pub fn new(domain: &Domain, a: f64, b: f64) -> Self {
        Self {
            center: domain.center.to_real(),
            eps: domain.radius,
            a,
            b,
        }
    }

    pub fn center_point(&self) -> ComplexPoint2 {
        ComplexPoint2::from_real(self.center)
    }

    pub fn eval(&self, z: &ComplexPoint2) -> f64 {
        let s = (*z - self.center_point()).norm_sqr();
        let gap = (self.eps * self.eps - s).max(1e-300);
        self.a * s - self.b * gap.ln()
    }

    /// The minimum over the domain, attained at the center.
    pub fn min_value(&self) -> f64 {
        -self.b * (self.eps * self.eps).ln()
    }

    pub fn scalar_field(&self) -> ScalarField {
        let me = self.clone();
        ScalarField::closed(move |z| me.eval(z))
    }

    pub fn with_b(&self, b: f64) -> Self {
        Self { b, ..self.clone() }
    }
}

/// Floor for the fitted strictness coefficient when certifying exhaustions.
pub const STRICTNESS_FLOOR: f64 = 1e-6;

/// Certification outcome for an exhaustion candidate.
#[derive(Debug, Clone, Serialize)]
pub struct ExhaustionCertificate {
    pub a: f64,
    pub b: f64,
    pub margin_coefficient: f64,
    pub max_violation: f64,
}

/// Select (A, B) in the family A|z-P|^2 - B log(eps^2 - |z-P|^2) so that
/// the sub-mean check certifies strict subharmonicity under J. The log term
/// forces rho - phi_1 -> +infinity at the boundary for any bounded phi_1,
/// which is the modification the truncation step relies on.
///
/// Search order: A in {1, 2, 4, 8, 16} x B in {0.1, 1}; first certified
/// pair wins.
pub fn build_exhaustion(
    domain: &Domain,
    q: &QTensor,
    grid: &DiscGrid,
    cfg: &SolverConfig,
    _phi1: &ScalarField,
    seed: u64,
) -> Result<(ExhaustionFunction, ExhaustionCertificate), PipelineError> {
    let sampler = DiscSampler {
        center_fraction: 0.6,
        scale_range: (0.15, 0.45),
        image_fraction: 0.9,
        ..Default::default()
    };
    let mut best_margin = f64::NEG_INFINITY;
    for &a in &[1.0, 2.0, 4.0, 8.0, 16.0] {
        for &b in &[0.1, 1.0] {
            let rho = ExhaustionFunction::new(domain, a, b);
            match certify_exhaustion(&rho, domain, q, grid, cfg, seed, &sampler) {
                Ok(cert) => return Ok((rho, cert)),
                Err(PipelineError::CertificationFailure(m)) => {
                    best_margin = best_margin.max(m);
                }
                Err(e) => return Err(e),
            }
        }
    }
    Err(PipelineError::CertificationFailure(best_margin))
}

/// Run the strict sub-mean certification for a concrete exhaustion.
pub fn certify_exhaustion(
    rho: &ExhaustionFunction,
    domain: &Domain,
    q: &QTensor,
    grid: &DiscGrid,
    cfg: &SolverConfig,
    seed: u64,
    sampler: &DiscSampler,
) -> Result<ExhaustionCertificate, PipelineError> {
    let report = sub_mean_check(
        &rho.scalar_field(),
        domain,
        q,
        grid,
        cfg,
        24,
        &[0.5, 0.75, 1.0],
        seed,
        sampler,
    )?;
    if report.margin_coefficient > STRICTNESS_FLOOR && report.max_violation <= 0.0 {
        Ok(ExhaustionCertificate {
            a: rho.a,
            b: rho.b,
            margin_coefficient: report.margin_coefficient,
            max_violation: report.max_violation,
        })
    } else {
        Err(PipelineError::CertificationFailure(report.margin_coefficient))
    }
}
