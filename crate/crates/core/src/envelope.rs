//! Poletsky disc envelopes under an almost complex structure.
//!
//! The envelope at p is the infimum of boundary means of f over
//! J-holomorphic discs centered at p with image in Omega. The search
//! minimizes over holomorphic polynomial targets pushed through the disc
//! solver (centers are preserved automatically), scores the rescalings
//! z -> lambda(r z) of every candidate, and handles the image constraint
//! by shrink-retry rejection so the objective stays exactly the boundary
//! mean. The computed value is therefore a one-sided approximation from
//! above of the true envelope; the constant disc seeds the search, so the
//! value never exceeds f(p).

use crate::disc::{circle_trace, DiscField, DiscGrid};
use crate::error::{EnvelopeError, SolverError};
use crate::field::{Domain, GridField, GridSpec, Interpolation, Modulus, ScalarField};
use crate::optim::nelder_mead;
use crate::point::ComplexPoint2;
use crate::sampling::{image_extent, rng_for};
use crate::solver::{solve_disc, translate_disc, C0Estimate, SolverConfig};
use crate::structure::QTensor;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Mean of f over the circle of radius `r` in the disc parameter.
/// Errors if any sample leaves the domain.
pub fn mean_on_circle(
    f: &ScalarField,
    disc: &DiscField,
    r: f64,
    n_theta: usize,
    omega: &Domain,
) -> Result<f64, EnvelopeError> {
    let trace = circle_trace(disc, r, n_theta)
        .map_err(|e| EnvelopeError::SolverFailure(SolverError::Disc(e)))?;
    let mut acc = 0.0;
    for (j, p) in trace.values.iter().enumerate() {
        let overshoot = -omega.boundary_distance(p);
        if overshoot >= 0.0 {
            return Err(EnvelopeError::OutsideDomain(j, overshoot));
        }
        acc += f.eval(p);
    }
    Ok(acc / n_theta as f64)
}

/// The boundary mean (1/2pi) int f(lambda(e^{it})) dt by the rectangle rule,
/// which is the trapezoidal rule on the periodic circle.
pub fn boundary_mean(
    f: &ScalarField,
    disc: &DiscField,
    n_theta: usize,
    omega: &Domain,
) -> Result<f64, EnvelopeError> {
    mean_on_circle(f, disc, 1.0, n_theta, omega)
}

/// Search parameters for the envelope optimizer.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Polynomial degree of the holomorphic targets.
    pub degree: usize,
    /// Number of random multi-starts (the constant disc is always added).
    pub starts: usize,
    pub max_simplex_iterations: usize,
    /// Rescalings z -> lambda(r z) scored for every candidate.
    pub rescale_factors: Vec<f64>,
    pub shrink: f64,
    pub shrink_retries: usize,
    pub n_theta: usize,
    /// Random start coefficient size, as a fraction of boundary distance.
    pub start_scale: (f64, f64),
    /// Loose solver used inside the search loop.
    pub loose_solver: SolverConfig,
    /// Final solver used to certify the reported minimizer.
    pub final_solver: SolverConfig,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            starts: 8,
            max_simplex_iterations: 300,
            rescale_factors: vec![0.25, 0.5, 0.75, 1.0],
            shrink: 0.9,
            shrink_retries: 5,
            n_theta: crate::disc::DEFAULT_N_THETA,
            start_scale: (0.1, 0.7),
            loose_solver: SolverConfig::loose(1e-7, 60),
            final_solver: SolverConfig::default(),
            seed: 0,
        }
    }
}

impl SearchConfig {
    /// Trimmed budget for grid sweeps where neighbors provide warm starts.
    pub fn budget(starts: usize, iterations: usize) -> Self {
        Self {
            starts,
            max_simplex_iterations: iterations,
            ..Self::default()
        }
    }
}

/// Envelope value at a point with its certificates.
#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub value: f64,
    pub best_disc: DiscField,
    pub upper_bound_f_at_p: f64,
    /// Best value seen after each objective evaluation.
    pub trace: Vec<f64>,
    pub feasible: bool,
    pub evaluations: usize,
}

struct Candidate {
    value: f64,
    disc: DiscField,
}

struct Objective<'a> {
    f: &'a ScalarField,
    omega: &'a Domain,
    p: ComplexPoint2,
    q: &'a QTensor,
    grid: &'a DiscGrid,
    cfg: &'a SearchConfig,
    solver: &'a SolverConfig,
    best: Option<Candidate>,
    trace: Vec<f64>,
    evaluations: usize,
}

impl<'a> Objective<'a> {
    fn feasible(&self, disc: &DiscField) -> bool {
        let (max_dist, _) = image_extent(disc, self.omega, self.grid);
        max_dist <= self.omega.radius * (1.0 - 1e-12)
    }

    /// Score an already-solved J-holomorphic disc: min of the circle means
    /// over the configured rescalings.
    fn score_disc(&mut self, disc: &DiscField) -> Option<f64> {
        if !self.feasible(disc) {
            return None;
        }
        let mut best: Option<(f64, f64)> = None;
        for &r in &self.cfg.rescale_factors {
            if let Ok(mean) = mean_on_circle(self.f, disc, r, self.cfg.n_theta, self.omega) {
                if best.map_or(true, |(v, _)| mean < v) {
                    best = Some((mean, r));
                }
            }
        }
        let (value, r) = best?;
        self.evaluations += 1;
        let improved = self.best.as_ref().map_or(true, |b| value < b.value);
        if improved {
            self.best = Some(Candidate {
                value,
                disc: if r == 1.0 { disc.clone() } else { disc.rescaled(r) },
            });
        }
        self.trace
            .push(self.best.as_ref().map(|b| b.value).unwrap_or(f64::INFINITY));
        Some(value)
    }

    /// Solve the target for the given parameters and score it, shrinking on
    /// infeasibility or non-convergence.
    fn score_params(&mut self, params: &[f64]) -> f64 {
        let coeffs = params_to_coeffs(params, self.cfg.degree);
        let mut h = DiscField::holomorphic(self.p, &coeffs, self.grid.degree);
        for _ in 0..=self.cfg.shrink_retries {
            match solve_disc(&h, self.q, self.grid, self.solver) {
                Ok(sol) => {
                    if let Some(v) = self.score_disc(&sol.field) {
                        return v;
                    }
                    h = h.shrunk_about_center(self.cfg.shrink);
                }
                Err(SolverError::NoConvergence { .. }) => {
                    h = h.shrunk_about_center(self.cfg.shrink);
                }
                Err(_) => return f64::INFINITY,
            }
        }
        f64::INFINITY
    }
}

fn params_to_coeffs(params: &[f64], degree: usize) -> Vec<[Complex64; 2]> {
    (0..degree)
        .map(|k| {
            [
                Complex64::new(params[4 * k], params[4 * k + 1]),
                Complex64::new(params[4 * k + 2], params[4 * k + 3]),
            ]
        })
        .collect()
}

fn extract_params(disc: &DiscField, degree: usize) -> Vec<f64> {
    let mut params = Vec::with_capacity(4 * degree);
    for k in 1..=degree {
        let a = disc.coeff(0, k, 0);
        let b = disc.coeff(1, k, 0);
        params.extend_from_slice(&[a.re, a.im, b.re, b.im]);
    }
    params
}

/// Compute the disc envelope of f over Omega at p.
///
/// `seed_discs` are already-solved J-holomorphic discs centered at p that
/// are scored before the search starts; the reported value never exceeds
/// any of their means, which makes shared-seed comparisons exact.
pub fn poletsky_envelope(
    f: &ScalarField,
    omega: &Domain,
    p: ComplexPoint2,
    q: &QTensor,
    grid: &DiscGrid,
    cfg: &SearchConfig,
    seed_salt: u64,
    seed_discs: &[DiscField],
) -> Result<EnvelopeResult, EnvelopeError> {
    if !omega.contains(&p) {
        return Err(EnvelopeError::BasePointOutside(
            p.dist(omega.center),
            omega.radius,
        ));
    }
    let mut obj = Objective {
        f,
        omega,
        p,
        q,
        grid,
        cfg,
        solver: &cfg.loose_solver,
        best: None,
        trace: Vec::new(),
        evaluations: 0,
    };

    // The constant disc is always admissible and scores exactly f(p).
    let constant = DiscField::constant(p, grid.degree);
    let f_at_p = f.eval(&p);
    obj.score_disc(&constant)
        .ok_or_else(|| EnvelopeError::NoFeasibleDisc("constant disc rejected".into()))?;

    let mut nm_starts: Vec<Vec<f64>> = Vec::new();
    for s in seed_discs {
        if obj.score_disc(s).is_some() {
            nm_starts.push(extract_params(s, cfg.degree));
        }
    }

    let bd = omega.boundary_distance(&p);
    let mut rng = rng_for(cfg.seed, seed_salt);
    for _ in 0..cfg.starts {
        let scale = rng.gen_range(cfg.start_scale.0..cfg.start_scale.1) * bd;
        let params: Vec<f64> = (0..4 * cfg.degree)
            .map(|_| rng.gen_range(-1.0..1.0) * scale / (cfg.degree as f64).sqrt())
            .collect();
        nm_starts.push(params);
    }
    // Zero start probes the neighborhood of the constant disc; one-hot
    // starts cover single-coefficient minimizers, which concave objectives
    // favor.
    nm_starts.push(vec![0.0; 4 * cfg.degree]);
    for k in 0..cfg.degree.min(2) {
        for comp in 0..2 {
            let mut params = vec![0.0; 4 * cfg.degree];
            params[4 * k + 2 * comp] = 0.7 * bd;
            nm_starts.push(params);
        }
    }

    for start in nm_starts {
        let step = (0.2 * bd).max(1e-3);
        nelder_mead(
            |x| obj.score_params(x),
            &start,
            step,
            cfg.max_simplex_iterations,
            1e-12,
        );
    }

    // Boundary probes: minima of concave-type objectives sit against the
    // image constraint, where the simplex converges slowly. Bisect the
    // largest feasible scaling of the best candidate and score just inside
    // that boundary.
    for _ in 0..4 {
        let Some(best) = &obj.best else { break };
        let base = extract_params(&best.disc, cfg.degree);
        if base.iter().all(|x| x.abs() < 1e-12) {
            break;
        }
        let before = best.value;
        let feasible_scale = |obj: &mut Objective, s: f64| -> bool {
            let coeffs = params_to_coeffs(
                &base.iter().map(|x| x * s).collect::<Vec<_>>(),
                cfg.degree,
            );
            let h = DiscField::holomorphic(p, &coeffs, grid.degree);
            match solve_disc(&h, q, grid, &cfg.loose_solver) {
                Ok(sol) => obj.feasible(&sol.field),
                Err(_) => false,
            }
        };
        let mut lo = 1.0;
        let mut hi = 8.0;
        if feasible_scale(&mut obj, hi) {
            lo = hi;
        } else {
            for _ in 0..20 {
                let mid = 0.5 * (lo + hi);
                if feasible_scale(&mut obj, mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        for frac in [0.9, 0.97, 0.995, 1.0] {
            let scaled: Vec<f64> = base.iter().map(|x| x * lo * frac).collect();
            obj.score_params(&scaled);
        }
        if obj.best.as_ref().map(|b| b.value).unwrap_or(before) >= before - 1e-12 {
            break;
        }
    }

    let mut best = obj.best.take().expect("constant disc guarantees a candidate");
    let trace = obj.trace.clone();
    let evaluations = obj.evaluations;

    // Certify the minimizer at the final tolerance. The constant disc keeps
    // the f(p) upper bound no matter how the re-solve moves the candidate.
    if best.disc != constant {
        let recertified = solve_disc(
            &holomorphic_target_of(&best.disc, p, cfg.degree, grid.degree),
            q,
            grid,
            &cfg.final_solver,
        );
        if let Ok(sol) = recertified {
            let mut check = Objective {
                f,
                omega,
                p,
                q,
                grid,
                cfg,
                solver: &cfg.final_solver,
                best: None,
                trace: Vec::new(),
                evaluations: 0,
            };
            if let Some(v) = check.score_disc(&sol.field) {
                if v <= best.value + cfg.final_solver.residual_tolerance * 10.0 {
                    best = check.best.take().unwrap();
                }
            }
        }
    }
    if best.value > f_at_p {
        best = Candidate {
            value: f_at_p,
            disc: constant,
        };
    }

    Ok(EnvelopeResult {
        value: best.value,
        best_disc: best.disc,
        upper_bound_f_at_p: f_at_p,
        trace,
        feasible: true,
        evaluations,
    })
}

/// Rebuild the holomorphic target with the disc's low-order coefficients,
/// used to re-solve the reported minimizer at the final tolerance.
fn holomorphic_target_of(
    disc: &DiscField,
    p: ComplexPoint2,
    degree: usize,
    trunc: usize,
) -> DiscField {
    let coeffs = params_to_coeffs(&extract_params(disc, degree), degree);
    DiscField::holomorphic(p, &coeffs, trunc)
}

/// Per-node outcome of an envelope sweep.
#[derive(Debug, Clone, Serialize)]
pub struct NodeOutcome {
    pub value: f64,
    pub feasible: bool,
    pub evaluations: usize,
    pub warm_started: bool,
    pub error: Option<String>,
}

/// Envelope values over a grid, with per-node minimizing discs retained for
/// warm starts.
#[derive(Debug, Clone)]
pub struct EnvelopeField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub outcomes: Vec<NodeOutcome>,
    pub best_discs: Vec<Option<DiscField>>,
    pub partial: bool,
}

impl EnvelopeField {
    pub fn grid_field(&self, interp: Interpolation) -> GridField {
        GridField::new(self.spec.clone(), self.values.clone(), interp)
    }
}

/// Pointwise envelope over the nodes of `spec`.
///
/// Nodes are processed in lines along axis 3; within a line the previous
/// node's best disc is translated (Lemma-1 style) and injected as a warm
/// start. Lines run in parallel; all randomness derives from per-node
/// seeds, so results do not depend on scheduling. `stage_seeds`, when
/// given, injects one extra seed disc per node (used by the approximation
/// pipeline to keep stages monotone).
pub fn envelope_field(
    f: &ScalarField,
    omega: &Domain,
    q: &QTensor,
    grid: &DiscGrid,
    spec: &GridSpec,
    cfg: &SearchConfig,
    stage_seeds: Option<&[Option<DiscField>]>,
) -> EnvelopeField {
    let n = spec.len();
    let line_len = spec.nodes[3].max(1);
    let n_lines = n / line_len;
    let translate_cfg = SolverConfig {
        continuation_steps: 2,
        ..cfg.loose_solver.clone()
    };

    let line_results: Vec<Vec<(f64, NodeOutcome, Option<DiscField>)>> = (0..n_lines)
        .into_par_iter()
        .map(|line| {
            let mut out = Vec::with_capacity(line_len);
            let mut prev_best: Option<DiscField> = None;
            for k in 0..line_len {
                let flat = line * line_len + k;
                let p = spec.point(flat);
                let mut seeds: Vec<DiscField> = Vec::new();
                let mut warm = false;
                if let Some(prev) = &prev_best {
                    let shift = p - prev.center_value();
                    let translated = if q.is_zero() {
                        Ok(prev.add_constant(shift))
                    } else {
                        translate_disc(
                            prev,
                            shift,
                            q,
                            grid,
                            &translate_cfg,
                            &C0Estimate::identity(),
                        )
                        .map(|t| t.field)
                    };
                    if let Ok(t) = translated {
                        seeds.push(t);
                        warm = true;
                    }
                }
                if let Some(stage) = stage_seeds {
                    if let Some(s) = &stage[flat] {
                        seeds.push(s.clone());
                    }
                }
                match poletsky_envelope(f, omega, p, q, grid, cfg, flat as u64, &seeds) {
                    Ok(res) => {
                        prev_best = Some(res.best_disc.clone());
                        out.push((
                            res.value,
                            NodeOutcome {
                                value: res.value,
                                feasible: res.feasible,
                                evaluations: res.evaluations,
                                warm_started: warm,
                                error: None,
                            },
                            Some(res.best_disc),
                        ));
                    }
                    Err(e) => {
                        prev_best = None;
                        out.push((
                            f.eval(&p),
                            NodeOutcome {
                                value: f.eval(&p),
                                feasible: false,
                                evaluations: 0,
                                warm_started: warm,
                                error: Some(e.to_string()),
                            },
                            None,
                        ));
                    }
                }
            }
            out
        })
        .collect();

    let mut values = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    let mut best_discs = Vec::with_capacity(n);
    let mut partial = false;
    for line in line_results {
        for (v, o, d) in line {
            partial |= o.error.is_some();
            values.push(v);
            outcomes.push(o);
            best_discs.push(d);
        }
    }
    EnvelopeField {
        spec: spec.clone(),
        values,
        outcomes,
        best_discs,
        partial,
    }
}

/// Empirical-modulus report for an envelope field.
#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    pub pairs_checked: usize,
    /// max over pairs of |dv| / (omega(c0 * d) + tolerance).
    pub worst_ratio: f64,
    pub worst_distance: f64,
    pub passes: bool,
}

/// Check the transferred modulus bound: for all sampled pairs,
/// |env(x) - env(y)| <= omega(c0 |x - y|) + tolerance.
///
/// `c0` should carry any slack factor the caller wants (the Lemma-2 bound
/// itself uses the estimated C0).
pub fn continuity_report(
    env: &GridField,
    modulus: &Modulus,
    c0: f64,
    tolerance: f64,
) -> ContinuityReport {
    let n = env.spec.len();
    let mut worst_ratio = 0.0f64;
    let mut worst_distance = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        let pi = env.spec.point(i);
        for j in (i + 1)..n {
            let pj = env.spec.point(j);
            let d = pi.dist(pj);
            if d <= 0.0 {
                continue;
            }
            pairs += 1;
            let dv = (env.values[i] - env.values[j]).abs();
            let bound = modulus.eval(c0 * d) + tolerance;
            let ratio = dv / bound;
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst_distance = d;
            }
        }
    }
    ContinuityReport {
        pairs_checked: pairs,
        worst_ratio,
        worst_distance,
        passes: worst_ratio <= 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disc::DiscGrid;

    fn grid() -> std::sync::Arc<DiscGrid> {
        DiscGrid::new(12, 64).unwrap()
    }

    #[test]
    fn boundary_mean_trivial_cases() {
        let g = grid();
        let omega = Domain::unit_ball().scaled(2.0);
        let disc = DiscField::holomorphic(
            ComplexPoint2::ORIGIN,
            &[[Complex64::new(1.0, 0.0), Complex64::default()]],
            g.degree,
        );
        // f == c
        let f = ScalarField::constant(2.5);
        assert!((boundary_mean(&f, &disc, 64, &omega).unwrap() - 2.5).abs() < 1e-14);
        // f = Re z1 over the circle: symmetric, mean 0
        let f = ScalarField::re_z1();
        assert!(boundary_mean(&f, &disc, 64, &omega).unwrap().abs() < 1e-14);
        // f = |z1|^2 over the unit circle: 1
        let f = ScalarField::closed(|z| z.z1.norm_sqr());
        assert!((boundary_mean(&f, &disc, 64, &omega).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn boundary_mean_rejects_escaping_discs() {
        let g = grid();
        let omega = Domain::unit_ball().scaled(0.5);
        let disc = DiscField::holomorphic(
            ComplexPoint2::ORIGIN,
            &[[Complex64::new(1.0, 0.0), Complex64::default()]],
            g.degree,
        );
        match boundary_mean(&ScalarField::constant(0.0), &disc, 64, &omega) {
            Err(EnvelopeError::OutsideDomain(..)) => {}
            other => panic!("expected OutsideDomain, got {other:?}"),
        }
    }

    #[test]
    fn envelope_of_psh_function_is_the_function() {
        // f = |z1|^2 is psh for the standard structure: every mean is at
        // least f(p) and the constant disc attains it.
        let g = grid();
        let omega = Domain::unit_ball();
        let f = ScalarField::closed(|z| z.z1.norm_sqr());
        let cfg = SearchConfig {
            starts: 2,
            max_simplex_iterations: 30,
            ..Default::default()
        };
        let res = poletsky_envelope(
            &f,
            &omega,
            ComplexPoint2::ORIGIN,
            &QTensor::zero(),
            &g,
            &cfg,
            0,
            &[],
        )
        .unwrap();
        assert!(res.value <= res.upper_bound_f_at_p + 1e-15);
        assert!((res.value - 0.0).abs() <= 1e-3, "value {}", res.value);
    }

    #[test]
    fn envelope_of_neg_abs_z1_sq_reaches_large_discs() {
        let g = grid();
        let omega = Domain::unit_ball();
        let f = ScalarField::neg_abs_z1_sq();
        let cfg = SearchConfig::default();
        let res = poletsky_envelope(
            &f,
            &omega,
            ComplexPoint2::ORIGIN,
            &QTensor::zero(),
            &g,
            &cfg,
            1,
            &[],
        )
        .unwrap();
        assert!(res.value >= -1.0 - 1e-12, "below the analytic floor: {}", res.value);
        assert!(res.value <= -0.95, "optimizer too weak: {}", res.value);
    }

    #[test]
    fn monotone_in_f_with_shared_seed_discs() {
        let g = grid();
        let omega = Domain::unit_ball();
        let f = ScalarField::closed(|z| -z.z1.norm_sqr() - 0.2);
        let hmaj = ScalarField::neg_abs_z1_sq(); // f <= hmaj pointwise
        let cfg = SearchConfig::budget(3, 60);
        let p = ComplexPoint2::from_real([0.1, 0.0, 0.2, 0.0]);
        let res_g = poletsky_envelope(&hmaj, &omega, p, &QTensor::zero(), &g, &cfg, 5, &[])
            .unwrap();
        let res_f = poletsky_envelope(
            &f,
            &omega,
            p,
            &QTensor::zero(),
            &g,
            &cfg,
            5,
            &[res_g.best_disc.clone()],
        )
        .unwrap();
        assert!(
            res_f.value <= res_g.value + 1e-9,
            "envelope not monotone: {} vs {}",
            res_f.value,
            res_g.value
        );
    }

    #[test]
    fn translation_consistency_standard_structure() {
        let g = grid();
        let omega = Domain::unit_ball();
        let a = ComplexPoint2::from_real([0.15, -0.05, 0.0, 0.1]);
        let f = ScalarField::neg_abs_z1_sq();
        let fa = ScalarField::closed(move |z| -(z.z1 - a.z1).norm_sqr());
        let omega_a = Domain::new(omega.center + a, omega.radius);
        let cfg = SearchConfig::default();
        let p = ComplexPoint2::from_real([0.1, 0.05, -0.05, 0.0]);
        let r1 = poletsky_envelope(&f, &omega, p, &QTensor::zero(), &g, &cfg, 3, &[]).unwrap();
        let r2 = poletsky_envelope(&fa, &omega_a, p + a, &QTensor::zero(), &g, &cfg, 3, &[])
            .unwrap();
        // optimizer tolerance for this configuration
        assert!(
            (r1.value - r2.value).abs() < 1e-2,
            "{} vs {}",
            r1.value,
            r2.value
        );
    }

    #[test]
    fn continuity_report_constant_field() {
        let spec = GridSpec::cube(ComplexPoint2::ORIGIN, 0.3, 3);
        let env = GridField::from_fn(spec, Interpolation::Multilinear, |_| 1.0);
        let rep = continuity_report(&env, &Modulus::Lipschitz(1.0), 1.0, 1e-9);
        assert!(rep.passes);
        assert_eq!(rep.worst_ratio, 0.0);
    }
}
