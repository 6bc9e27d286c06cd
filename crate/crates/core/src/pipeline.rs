//! The smooth plurisubharmonic approximation pipeline.
//!
//! Per stage k: a Lipschitz sup-convolution regularization phi_k, the
//! truncation max{phi_k, rho - k} against a strictly subharmonic
//! exhaustion rho, the disc envelope of the truncation, and a certified
//! mollification psi_k pinned by the sandwich
//!
//!   phi_hat_k + 2^{-k-1} rho  <=  psi_k  <=  phi_hat_k + 2^{-k} rho.
//!
//! The envelope of the truncation is computed through the identity
//! P(max{phi_k, rho - k}) = max{P phi_k, rho - k}: both sides are the
//! largest psh minorant of the truncation (max of psh is psh, the envelope
//! is monotone, and rho - k is its own envelope). Numerically this keeps
//! the only kink of the stage field in the analytic max, where it is
//! harmless for sub-mean checks, instead of in interpolated node data.

use crate::disc::{DiscField, DiscGrid};
use crate::envelope::{envelope_field, poletsky_envelope, EnvelopeField, SearchConfig};
use crate::error::PipelineError;
use crate::field::{Domain, GridField, GridSpec, Interpolation, ScalarField};
use crate::point::ComplexPoint2;
use crate::psh::{build_exhaustion, certify_exhaustion, sub_mean_check, ExhaustionFunction};
use crate::report::{Certification, CertificationSet};
use crate::sampling::DiscSampler;
use crate::solver::SolverConfig;
use crate::structure::QTensor;
use serde::Serialize;

/// Lipschitz constant of the k-th regularization.
pub fn regularization_slope(k: usize) -> f64 {
    (2.0f64).powi(k as i32)
}

/// The sup-convolution phi_k(z) = max(u(z), max over nodes w of
/// u(w) - L_k |z - w|).
///
/// The evaluation point joins the node set so the regularization stays
/// above u everywhere; a pure node-max would dip below u between nodes by
/// as much as L_k times the spacing.
#[derive(Clone)]
pub struct SupConvolution {
    u: ScalarField,
    nodes: Vec<([f64; 4], f64)>,
    pub slope: f64,
    u_max: f64,
}

impl SupConvolution {
    pub fn eval(&self, z: &ComplexPoint2) -> f64 {
        let x = z.to_real();
        let mut best = self.u.eval(z);
        // Nodes farther than (u_max - best) / L cannot win.
        let mut cut = {
            let r = (self.u_max - best) / self.slope;
            r * r
        };
        for (w, uw) in &self.nodes {
            let d2 = (x[0] - w[0]).powi(2)
                + (x[1] - w[1]).powi(2)
                + (x[2] - w[2]).powi(2)
                + (x[3] - w[3]).powi(2);
            if d2 > cut {
                continue;
            }
            let v = uw - self.slope * d2.sqrt();
            if v > best {
                best = v;
                let r = (self.u_max - best) / self.slope;
                cut = r * r;
            }
        }
        best
    }

    pub fn scalar_field(&self) -> ScalarField {
        let me = self.clone();
        ScalarField::closed(move |z| me.eval(z))
    }
}

impl std::fmt::Debug for SupConvolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "SupConvolution {{ slope: {}, nodes: {} }}",
            self.slope,
            self.nodes.len()
        )
    }
}

/// Build the k-th upper regularization of u from its samples on `spec`.
///
/// Decreasing in k, above u everywhere, and converging to u at continuity
/// points as k grows (grid-resolution limited).
pub fn upper_regularize(u: &ScalarField, spec: &GridSpec, k: usize) -> SupConvolution {
    let slope = regularization_slope(k);
    let nodes: Vec<([f64; 4], f64)> = (0..spec.len())
        .map(|i| (spec.point(i).to_real(), u.eval(&spec.point(i))))
        .collect();
    let u_max = nodes.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    SupConvolution {
        u: u.clone(),
        nodes,
        slope,
        u_max,
    }
}

/// Truncation of phi_k against rho - k, with the detected collar.
#[derive(Debug, Clone)]
pub struct TruncatedField {
    pub phi: SupConvolution,
    pub rho: ExhaustionFunction,
    pub k: usize,
    /// Nodes where rho - k >= phi_k + margin (the grid collar U_k).
    pub collar: Vec<usize>,
    /// Nodes where phi_k > rho - k + margin (the inner region D_k).
    pub inner: Vec<usize>,
}

impl TruncatedField {
    pub fn eval(&self, z: &ComplexPoint2) -> f64 {
        self.phi.eval(z).max(self.rho.eval(z) - self.k as f64)
    }

    pub fn scalar_field(&self) -> ScalarField {
        let me = self.clone();
        ScalarField::closed(move |z| me.eval(z))
    }
}

/// Margin used to detect the collar on the grid.
pub const COLLAR_MARGIN: f64 = 1e-6;

/// phi_tilde_k = max{phi_k, rho - k}. Errors with `EmptyCollar` when no
/// grid node is claimed by the exhaustion branch (k too large for the
/// grid's reach toward the boundary).
pub fn truncate_with_exhaustion(
    phi: &SupConvolution,
    rho: &ExhaustionFunction,
    k: usize,
    spec: &GridSpec,
) -> Result<TruncatedField, PipelineError> {
    let mut collar = Vec::new();
    let mut inner = Vec::new();
    let mut max_excess = f64::NEG_INFINITY;
    for i in 0..spec.len() {
        let z = spec.point(i);
        let p = phi.eval(&z);
        let r = rho.eval(&z) - k as f64;
        max_excess = max_excess.max(r - p);
        if r >= p + COLLAR_MARGIN {
            collar.push(i);
        } else if p > r + COLLAR_MARGIN {
            inner.push(i);
        }
    }
    if collar.is_empty() {
        return Err(PipelineError::EmptyCollar { k, max_excess });
    }
    Ok(TruncatedField {
        phi: phi.clone(),
        rho: rho.clone(),
        k,
        collar,
        inner,
    })
}

/// Gauss-Legendre 5-point rule on [-1, 1].
const GL5_NODES: [f64; 5] = [
    -0.906179845938664,
    -0.538469310105683,
    0.0,
    0.538469310105683,
    0.906179845938664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236926885056189,
    0.478628670499366,
    0.568888888888889,
    0.478628670499366,
    0.236926885056189,
];

/// Quadrature stencil of the radial bump kernel (1 - |x|^2)^4 on the unit
/// ball of R^4: offsets in kernel units with positive combined weights.
fn kernel_stencil() -> &'static Vec<([f64; 4], f64)> {
    use std::sync::OnceLock;
    static STENCIL: OnceLock<Vec<([f64; 4], f64)>> = OnceLock::new();
    STENCIL.get_or_init(|| {
        let mut pts = Vec::new();
        for i0 in 0..5 {
            for i1 in 0..5 {
                for i2 in 0..5 {
                    for i3 in 0..5 {
                        let x = [
                            GL5_NODES[i0],
                            GL5_NODES[i1],
                            GL5_NODES[i2],
                            GL5_NODES[i3],
                        ];
                        let r2 = x.iter().map(|v| v * v).sum::<f64>();
                        if r2 >= 1.0 {
                            continue;
                        }
                        let k = (1.0 - r2).powi(4);
                        let w = GL5_WEIGHTS[i0]
                            * GL5_WEIGHTS[i1]
                            * GL5_WEIGHTS[i2]
                            * GL5_WEIGHTS[i3]
                            * k;
                        pts.push((x, w));
                    }
                }
            }
        }
        pts
    })
}

/// Kernel widths tried per node, as fractions of the grid spacing.
const SIGMA_LADDER: [f64; 12] = [
    2.0, 1.5, 1.0, 0.7, 0.45, 0.3, 0.2, 0.12, 0.07, 0.04, 0.02, 0.0,
];

/// A mollified stage field, evaluable anywhere.
#[derive(Clone)]
pub struct SmoothedField {
    g: ScalarField,
    sigma: GridField,
    pub node_values: Vec<f64>,
    pub sigma_values: Vec<f64>,
    pub spec: GridSpec,
}

impl SmoothedField {
    pub fn eval(&self, z: &ComplexPoint2) -> f64 {
        let sigma = self.sigma.eval(z).max(0.0);
        mollify_at(&self.g, z, sigma)
    }

    pub fn scalar_field(&self) -> ScalarField {
        let me = self.clone();
        ScalarField::closed(move |z| me.eval(z))
    }
}

fn mollify_at(g: &ScalarField, z: &ComplexPoint2, sigma: f64) -> f64 {
    if sigma < 1e-12 {
        return g.eval(z);
    }
    let stencil = kernel_stencil();
    let x = z.to_real();
    let mut acc = 0.0;
    let mut total = 0.0;
    for (off, w) in stencil {
        let p = ComplexPoint2::from_real([
            x[0] - sigma * off[0],
            x[1] - sigma * off[1],
            x[2] - sigma * off[2],
            x[3] - sigma * off[3],
        ]);
        acc += w * g.eval(&p);
        total += w;
    }
    acc / total
}

/// Diagnostics from the smoothing step.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothingDiagnostics {
    pub max_sandwich_defect: f64,
    /// Relative change of finite-difference second derivatives when the
    /// probing step halves; a grid-scale smoothness indicator, not a
    /// certified bound.
    pub second_difference_drift: f64,
}

/// Mollify g = phi_hat + (3/4) 2^{-k} rho with a per-node kernel width
/// chosen so the sandwich holds at every node; near the exhaustion minimum
/// the width shrinks with the gap (to zero at the minimum itself, where the
/// bounds pinch).
pub fn richberg_smooth(
    phi_hat: &ScalarField,
    rho: &ExhaustionFunction,
    k: usize,
    spec: &GridSpec,
) -> Result<(SmoothedField, SmoothingDiagnostics), PipelineError> {
    let scale = (0.75) * (2.0f64).powi(-(k as i32));
    let gap_scale = (2.0f64).powi(-(k as i32) - 2);
    let ph = phi_hat.clone();
    let rr = rho.clone();
    let g = ScalarField::closed(move |z| ph.eval(z) + scale * rr.eval(z));
    let h = spec.max_spacing().max(1e-6);

    let n = spec.len();
    let mut sigma_values = vec![0.0f64; n];
    let mut node_values = vec![0.0f64; n];
    let mut max_defect = 0.0f64;
    for i in 0..n {
        let z = spec.point(i);
        let gz = g.eval(&z);
        let gap = gap_scale * rho.eval(&z);
        let budget = 0.9 * gap;
        let mut chosen = 0.0;
        let mut value = gz;
        for &frac in &SIGMA_LADDER {
            let sigma = frac * h;
            let v = mollify_at(&g, &z, sigma);
            if (v - gz).abs() <= budget {
                chosen = sigma;
                value = v;
                break;
            }
        }
        let defect = (value - gz).abs() - gap;
        if defect > 0.0 {
            return Err(PipelineError::SandwichFailure {
                k,
                node: i,
                defect,
            });
        }
        max_defect = max_defect.max((value - gz).abs() - gap);
        sigma_values[i] = chosen;
        node_values[i] = value;
    }

    let sigma = GridField::new(spec.clone(), sigma_values.clone(), Interpolation::Multilinear);
    let field = SmoothedField {
        g,
        sigma,
        node_values,
        sigma_values,
        spec: spec.clone(),
    };

    // Smoothness probe: second differences at h and h/2 along axis 0 at a
    // few interior nodes.
    let mut drift = 0.0f64;
    let probe = h * 0.5;
    for i in (0..n).step_by((n / 5).max(1)) {
        let z = spec.point(i);
        if (z - ComplexPoint2::from_real(spec.center)).norm() > 0.4 * spec.half_widths[0] {
            continue;
        }
        let d2 = |step: f64| {
            let zp = z + ComplexPoint2::from_real([step, 0.0, 0.0, 0.0]);
            let zm = z - ComplexPoint2::from_real([step, 0.0, 0.0, 0.0]);
            (field.eval(&zp) - 2.0 * field.eval(&z) + field.eval(&zm)) / (step * step)
        };
        let coarse = d2(probe);
        let fine = d2(probe * 0.5);
        if coarse.abs() > 1e-9 {
            drift = drift.max((fine - coarse).abs() / coarse.abs());
        }
    }

    Ok((
        field,
        SmoothingDiagnostics {
            max_sandwich_defect: max_defect,
            second_difference_drift: drift,
        },
    ))
}

/// One stage of the approximation sequence, sampled on the common grid.
#[derive(Clone)]
pub struct Stage {
    pub k: usize,
    pub phi: Vec<f64>,
    pub phi_tilde: Vec<f64>,
    /// Envelope of the untruncated regularization (smooth branch).
    pub chi: Vec<f64>,
    pub phi_hat: Vec<f64>,
    pub psi: Vec<f64>,
    pub sigma: Vec<f64>,
    pub collar: Vec<usize>,
    pub best_discs: Vec<Option<DiscField>>,
    pub smoothing: SmoothingDiagnostics,
    /// Evaluable stage fields.
    pub phi_hat_field: ScalarField,
    pub psi_field: SmoothedField,
}

/// The computed decreasing sequence with its certification set.
pub struct ApproximationSequence {
    pub spec: GridSpec,
    pub rho: ExhaustionFunction,
    pub stages: Vec<Stage>,
    pub certifications: CertificationSet,
    /// Indices of the interior sample (truncation never active there).
    pub interior: Vec<usize>,
}

/// Pipeline parameters.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub spec: GridSpec,
    pub search: SearchConfig,
    pub solver: SolverConfig,
    /// Sub-mean tolerance for envelope and smoothed stages.
    pub psh_tolerance: f64,
    /// Grid-pointwise monotonicity tolerance.
    pub monotone_tolerance: f64,
    pub sub_mean_discs: usize,
    pub sub_mean_radii: Vec<f64>,
    /// Fraction of the domain radius delimiting the interior sample.
    pub interior_fraction: f64,
    /// Run the inner-domain envelope spot check on a collar node per stage.
    pub collar_spot_check: bool,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(spec: GridSpec) -> Self {
        Self {
            spec,
            search: SearchConfig::budget(2, 50),
            solver: SolverConfig::default(),
            psh_tolerance: 5e-3,
            monotone_tolerance: 1e-9,
            sub_mean_discs: 50,
            sub_mean_radii: vec![0.25, 0.5, 0.75, 1.0],
            interior_fraction: 0.6,
            collar_spot_check: true,
            seed: 0,
        }
    }
}

/// Domain whose discs stay inside the grid box, where grid-backed stage
/// fields are trustworthy.
fn inner_sample_domain(spec: &GridSpec, domain: &Domain) -> Domain {
    let min_hw = spec
        .half_widths
        .iter()
        .zip(spec.nodes.iter())
        .filter(|(_, &n)| n > 1)
        .map(|(h, _)| *h)
        .fold(f64::INFINITY, f64::min);
    Domain::new(domain.center, (0.95 * min_hw).min(domain.radius * 0.95))
}

fn stage_err(k: usize, stage: &'static str, e: PipelineError) -> PipelineError {
    PipelineError::Stage {
        k,
        stage,
        source: Box::new(e),
    }
}

/// Run the full pipeline for k = 1..=K.
pub fn approximation_pipeline(
    u: &ScalarField,
    domain: &Domain,
    q: &QTensor,
    grid: &DiscGrid,
    big_k: usize,
    cfg: &PipelineConfig,
) -> Result<ApproximationSequence, PipelineError> {
    assert!(big_k >= 2, "pipeline needs K >= 2");
    let spec = &cfg.spec;
    let mut certs = CertificationSet::default();
    let inner_domain = inner_sample_domain(spec, domain);
    let sampler = DiscSampler {
        center_fraction: 0.6,
        scale_range: (0.1, 0.4),
        image_fraction: 0.95,
        ..Default::default()
    };

    // Precondition: u is psh at tolerance.
    let u_report = sub_mean_check(
        u,
        &inner_domain,
        q,
        grid,
        &cfg.solver,
        cfg.sub_mean_discs.min(20),
        &cfg.sub_mean_radii,
        cfg.seed ^ 0xF00D,
        &sampler,
    )?;
    if !u_report.passes(cfg.psh_tolerance) {
        return Err(PipelineError::InputNotPsh(u_report.max_violation));
    }

    // Exhaustion: certified pair, then boost B until the grid can see the
    // collar of every stage (the "modification" of rho).
    let phi1 = upper_regularize(u, spec, 1);
    let (mut rho, mut rho_cert) = build_exhaustion(
        domain,
        q,
        grid,
        &cfg.solver,
        &phi1.scalar_field(),
        cfg.seed ^ 0xE0,
    )?;
    let reach = |rho: &ExhaustionFunction| {
        (0..spec.len())
            .map(|i| {
                let z = spec.point(i);
                rho.eval(&z) - phi1.eval(&z)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut boosts = 0;
    while reach(&rho) < big_k as f64 + 1.0 {
        boosts += 1;
        if boosts > 12 {
            return Err(PipelineError::EmptyCollar {
                k: big_k,
                max_excess: reach(&rho) - big_k as f64,
            });
        }
        let candidate = rho.with_b(rho.b * 2.0);
        rho_cert = certify_exhaustion(
            &candidate,
            domain,
            q,
            grid,
            &cfg.solver,
            cfg.seed ^ 0xE1,
            &sampler,
        )?;
        rho = candidate;
    }
    certs.push(
        Certification::check("exhaustion_strict_margin", -rho_cert.margin_coefficient, 0.0)
            .with_note(format!("A = {}, B = {}", rho.a, rho.b)),
    );
    let min_rho = spec
        .points()
        .map(|z| rho.eval(&z))
        .fold(f64::INFINITY, f64::min);
    certs.push(
        Certification::check("exhaustion_nonnegative_on_grid", -min_rho, 0.0)
            .with_note("required for the monotonicity of psi_k"),
    );

    let interior: Vec<usize> = (0..spec.len())
        .filter(|&i| {
            spec.point(i).dist(domain.center) <= cfg.interior_fraction * domain.radius
        })
        .collect();
    let sup_rho_interior = interior
        .iter()
        .map(|&i| rho.eval(&spec.point(i)))
        .fold(0.0f64, f64::max);

    let mut stages: Vec<Stage> = Vec::with_capacity(big_k);
    let mut prev_discs: Option<Vec<Option<DiscField>>> = None;
    for k in 1..=big_k {
        let phi = upper_regularize(u, spec, k);
        let truncated = truncate_with_exhaustion(&phi, &rho, k, spec)
            .map_err(|e| stage_err(k, "truncate", e))?;

        // Envelope of the untruncated regularization; the truncation branch
        // is restored analytically below.
        let mut search = cfg.search.clone();
        search.seed = cfg.seed;
        let chi: EnvelopeField = envelope_field(
            &phi.scalar_field(),
            domain,
            q,
            grid,
            spec,
            &search,
            prev_discs.as_deref(),
        );

        let chi_interp = GridField::new(spec.clone(), chi.values.clone(), Interpolation::Cubic);
        let rho_k = rho.clone();
        let phi_hat_field = ScalarField::closed(move |z| {
            chi_interp.eval(z).max(rho_k.eval(z) - k as f64)
        });
        let phi_hat: Vec<f64> = (0..spec.len())
            .map(|i| chi.values[i].max(rho.eval(&spec.point(i)) - k as f64))
            .collect();

        // Collar certificate: the envelope branch must concede to rho - k on
        // the detected collar, which pins phi_hat there.
        let mut collar_defect = 0.0f64;
        for &i in &truncated.collar {
            collar_defect =
                collar_defect.max(chi.values[i] - (rho.eval(&spec.point(i)) - k as f64));
        }
        certs.push(
            Certification::check(
                format!("stage_{k}_collar_pinned"),
                collar_defect,
                cfg.psh_tolerance,
            )
            .with_note(format!("{} collar nodes", truncated.collar.len())),
        );

        if cfg.collar_spot_check {
            // Lemma-2 hypothesis at sample resolution: the envelope over the
            // inner domain D_k agrees with rho - k at a collar node of D_k.
            let min_collar_radius = truncated
                .collar
                .iter()
                .map(|&i| spec.point(i).dist(domain.center))
                .fold(f64::INFINITY, f64::min);
            let dk = Domain::new(
                domain.center,
                0.5 * (min_collar_radius + domain.radius),
            );
            if let Some(&node) = truncated.collar.iter().min_by(|&&a, &&b| {
                let da = spec.point(a).dist(domain.center);
                let db = spec.point(b).dist(domain.center);
                da.partial_cmp(&db).unwrap()
            }) {
                let p = spec.point(node);
                let res = poletsky_envelope(
                    &truncated.scalar_field(),
                    &dk,
                    p,
                    q,
                    grid,
                    &search,
                    0xD0 + k as u64,
                    &[],
                )
                .map_err(PipelineError::Envelope)
                .map_err(|e| stage_err(k, "collar_spot_check", e))?;
                let want = rho.eval(&p) - k as f64;
                certs.push(
                    Certification::check(
                        format!("stage_{k}_inner_envelope_matches_collar"),
                        (res.value - want).abs(),
                        cfg.psh_tolerance,
                    )
                    .with_witness(p.to_real()),
                );
            }
        }

        // Kuzman contract: the envelope stage output is psh at tolerance.
        let hat_report = sub_mean_check(
            &phi_hat_field,
            &inner_domain,
            q,
            grid,
            &cfg.solver,
            cfg.sub_mean_discs,
            &cfg.sub_mean_radii,
            cfg.seed ^ (0xA0 + k as u64),
            &sampler,
        )
        .map_err(PipelineError::Solver)
        .map_err(|e| stage_err(k, "envelope_sub_mean", e))?;
        certs.push(
            Certification::check(
                format!("stage_{k}_envelope_sub_mean"),
                hat_report.max_violation,
                cfg.psh_tolerance,
            )
            .with_note(format!("{} discs", hat_report.discs_used)),
        );

        // Richberg step.
        let (psi_field, smoothing) = richberg_smooth(&phi_hat_field, &rho, k, spec)
            .map_err(|e| stage_err(k, "richberg", e))?;
        let psi_report = sub_mean_check(
            &psi_field.scalar_field(),
            &inner_domain,
            q,
            grid,
            &cfg.solver,
            cfg.sub_mean_discs,
            &cfg.sub_mean_radii,
            cfg.seed ^ (0xB0 + k as u64),
            &sampler,
        )
        .map_err(PipelineError::Solver)
        .map_err(|e| stage_err(k, "psi_sub_mean", e))?;
        if !psi_report.passes(cfg.psh_tolerance) {
            return Err(stage_err(
                k,
                "psi_sub_mean",
                PipelineError::PshFailure {
                    k,
                    violation: psi_report.max_violation,
                    tolerance: cfg.psh_tolerance,
                },
            ));
        }
        certs.push(Certification::check(
            format!("stage_{k}_psi_sub_mean"),
            psi_report.max_violation,
            cfg.psh_tolerance,
        ));

        // Sandwich at every node.
        let mut sandwich_defect: f64 = f64::NEG_INFINITY;
        let pow_k = (2.0f64).powi(-(k as i32));
        for i in 0..spec.len() {
            let r = rho.eval(&spec.point(i));
            let lo = phi_hat[i] + 0.5 * pow_k * r;
            let hi = phi_hat[i] + pow_k * r;
            let v = psi_field.node_values[i];
            sandwich_defect = sandwich_defect.max((lo - v).max(v - hi));
        }
        certs.push(Certification::check(
            format!("stage_{k}_sandwich"),
            sandwich_defect,
            0.0,
        ));

        let phi_values: Vec<f64> = (0..spec.len()).map(|i| phi.eval(&spec.point(i))).collect();
        let phi_tilde_values: Vec<f64> = (0..spec.len())
            .map(|i| truncated.eval(&spec.point(i)))
            .collect();

        // Interior error bound: |psi_k - u| <= |phi_k - u| + 2^{-k} sup rho
        // + optimizer slack on the interior sample.
        let mut psi_err = 0.0f64;
        let mut phi_err = 0.0f64;
        let mut witness = [0.0; 4];
        for &i in &interior {
            let z = spec.point(i);
            let e = (psi_field.node_values[i] - u.eval(&z)).abs();
            if e > psi_err {
                psi_err = e;
                witness = z.to_real();
            }
            phi_err = phi_err.max((phi_values[i] - u.eval(&z)).abs());
        }
        certs.push(
            Certification::check(
                format!("stage_{k}_interior_error"),
                psi_err,
                phi_err + pow_k * sup_rho_interior + cfg.psh_tolerance,
            )
            .with_witness(witness)
            .with_note(format!(
                "sup rho interior = {sup_rho_interior:.6}, phi error = {phi_err:.3e}"
            )),
        );

        prev_discs = Some(chi.best_discs.clone());
        stages.push(Stage {
            k,
            phi: phi_values,
            phi_tilde: phi_tilde_values,
            chi: chi.values,
            phi_hat,
            psi: psi_field.node_values.clone(),
            sigma: psi_field.sigma_values.clone(),
            collar: truncated.collar,
            best_discs: chi.best_discs,
            smoothing,
            phi_hat_field,
            psi_field,
        });
    }

    // Cross-stage monotonicity, grid-pointwise.
    for pair in stages.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let mut worst_phi = f64::NEG_INFINITY;
        let mut worst_tilde = f64::NEG_INFINITY;
        let mut worst_hat = f64::NEG_INFINITY;
        let mut worst_psi = f64::NEG_INFINITY;
        for i in 0..spec.len() {
            worst_phi = worst_phi.max(b.phi[i] - a.phi[i]);
            worst_tilde = worst_tilde.max(b.phi_tilde[i] - a.phi_tilde[i]);
            worst_hat = worst_hat.max(b.phi_hat[i] - a.phi_hat[i]);
            worst_psi = worst_psi.max(b.psi[i] - a.psi[i]);
        }
        let t = cfg.monotone_tolerance;
        certs.push(Certification::check(
            format!("stage_{}_phi_decreasing", b.k),
            worst_phi,
            t,
        ));
        certs.push(Certification::check(
            format!("stage_{}_phi_tilde_decreasing", b.k),
            worst_tilde,
            t,
        ));
        certs.push(Certification::check(
            format!("stage_{}_phi_hat_decreasing", b.k),
            worst_hat,
            t,
        ));
        certs.push(Certification::check(
            format!("stage_{}_psi_decreasing", b.k),
            worst_psi,
            t,
        ));
    }

    Ok(ApproximationSequence {
        spec: spec.clone(),
        rho,
        stages,
        certifications: certs,
        interior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GridSpec {
        GridSpec::cube(ComplexPoint2::ORIGIN, 0.497, 3)
    }

    #[test]
    fn sup_convolution_basics() {
        let s = spec();
        let u = ScalarField::sq_norm_about(ComplexPoint2::ORIGIN);
        // constant input reproduces itself everywhere for any k
        let pc = upper_regularize(&ScalarField::constant(2.0), &s, 3);
        assert!((pc.eval(&ComplexPoint2::from_real([0.1, 0.2, 0.0, 0.0])) - 2.0).abs() < 1e-12);
        // decreasing in k, above u
        let p1 = upper_regularize(&u, &s, 1);
        let p2 = upper_regularize(&u, &s, 2);
        for z in s.points() {
            assert!(p2.eval(&z) <= p1.eval(&z) + 1e-12);
            assert!(p1.eval(&z) >= u.eval(&z) - 1e-12);
        }
        // Lipschitz u with L_k >= Lip(u): the regularization is u itself.
        for z in [
            ComplexPoint2::from_real([0.2, -0.3, 0.05, 0.11]),
            ComplexPoint2::from_real([-0.44, 0.2, 0.31, -0.08]),
        ] {
            assert!((p1.eval(&z) - u.eval(&z)).abs() < 1e-12);
        }
    }

    #[test]
    fn sup_convolution_modulus_bound_off_grid() {
        // A non-Lipschitz-dominated stage: L_k below the local slope keeps
        // phi_k above u by at most the modulus at the effective scale.
        let s = GridSpec::cube(ComplexPoint2::ORIGIN, 0.5, 5);
        let u = ScalarField::closed(|z| 3.0 * z.z1.re); // Lipschitz 3
        let p1 = upper_regularize(&u, &s, 1); // slope 2 < 3
        for z in [
            ComplexPoint2::from_real([0.07, -0.12, 0.21, 0.03]),
            ComplexPoint2::from_real([-0.33, 0.4, -0.1, 0.18]),
        ] {
            let v = p1.eval(&z);
            assert!(v >= u.eval(&z) - 1e-12);
            // sup over nodes of (3 w1 - 2|z - w|) <= u(z) + sup_r (3 - 2) r
            // over the reachable offsets: bounded by the grid diameter.
            let diam = 2.0 * (4.0f64).sqrt() * 0.5;
            assert!(v <= u.eval(&z) + (3.0 - 2.0) * diam + 1e-12);
        }
        // and at slope 16 >> 3 the regularization collapses onto u
        let p4 = upper_regularize(&u, &s, 4);
        let z = ComplexPoint2::from_real([0.07, -0.12, 0.21, 0.03]);
        assert!((p4.eval(&z) - u.eval(&z)).abs() < 1e-12);
    }

    #[test]
    fn truncation_reports_collar_and_max() {
        let s = spec();
        let d = Domain::unit_ball();
        let u = ScalarField::sq_norm_about(ComplexPoint2::ORIGIN);
        let phi = upper_regularize(&u, &s, 1);
        let rho = ExhaustionFunction::new(&d, 1.0, 2.0);
        let tr = truncate_with_exhaustion(&phi, &rho, 1, &s).unwrap();
        assert!(!tr.collar.is_empty());
        for z in s.points() {
            let v = tr.eval(&z);
            assert!(v >= phi.eval(&z) - 1e-12);
            assert!(v >= rho.eval(&z) - 1.0 - 1e-12);
        }
        // the collar value equals the exhaustion branch
        for &i in &tr.collar {
            let z = s.point(i);
            assert_eq!(tr.eval(&z), rho.eval(&z) - 1.0);
        }
    }

    #[test]
    fn truncation_empty_collar_surfaces_on_escalation() {
        let s = spec();
        let d = Domain::unit_ball();
        let u = ScalarField::sq_norm_about(ComplexPoint2::ORIGIN);
        let rho = ExhaustionFunction::new(&d, 1.0, 0.1);
        let mut failed = None;
        for k in 1..30 {
            let phi = upper_regularize(&u, &s, k);
            match truncate_with_exhaustion(&phi, &rho, k, &s) {
                Ok(_) => {}
                Err(PipelineError::EmptyCollar { k: kk, .. }) => {
                    failed = Some(kk);
                    break;
                }
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(failed.is_some(), "collar never emptied while escalating k");
    }

    #[test]
    fn richberg_constant_input_direct_sandwich() {
        let s = GridSpec::cube(ComplexPoint2::ORIGIN, 0.45, 5);
        let d = Domain::unit_ball();
        let rho = ExhaustionFunction::new(&d, 1.0, 1.0);
        let phi_hat = ScalarField::constant(1.0);
        let k = 2;
        let (psi, diag) = richberg_smooth(&phi_hat, &rho, k, &s).unwrap();
        let pow = (2.0f64).powi(-(k as i32));
        for (i, z) in s.points().enumerate() {
            let r = rho.eval(&z);
            let v = psi.node_values[i];
            assert!(v >= 1.0 + 0.5 * pow * r - 1e-12, "node {i}");
            assert!(v <= 1.0 + pow * r + 1e-12, "node {i}");
        }
        assert!(diag.max_sandwich_defect <= 0.0);
    }

    #[test]
    fn richberg_smoothness_probe_on_smooth_input() {
        let s = GridSpec::cube(ComplexPoint2::ORIGIN, 0.45, 5);
        let d = Domain::unit_ball();
        let rho = ExhaustionFunction::new(&d, 1.0, 1.0);
        let phi_hat = ScalarField::sq_norm_about(ComplexPoint2::ORIGIN);
        let (_, diag) = richberg_smooth(&phi_hat, &rho, 3, &s).unwrap();
        assert!(
            diag.second_difference_drift <= 0.10,
            "drift {}",
            diag.second_difference_drift
        );
    }
}
