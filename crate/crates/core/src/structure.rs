//! Almost complex structures J on subsets of C^2 and the deformation
//! tensor Q = (J - J_st)(J + J_st)^{-1}.
//!
//! Structures are evaluators z -> J(z), real 4x4 matrices acting on
//! R^4 = C^2 in the coordinates (x1, y1, x2, y2). When J^2 = -Id holds,
//! Q anticommutes with J_st and is therefore complex-antilinear; its
//! action is encoded by the complex 2x2 matrix `B` with `Q v = B conj(v)`.

use crate::error::StructureError;
use crate::field::Domain;
use crate::point::ComplexPoint2;
use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use serde::Serialize;
use std::sync::Arc;

/// Finite-difference step for derivative evaluators built from `matrix_at`.
pub const DERIVATIVE_FD_STEP: f64 = 1e-5;

/// Defect threshold above which a field is rejected as not almost complex.
pub const J_SQUARED_HARD_LIMIT: f64 = 1e-8;

/// Defect threshold for the `J^2 = -Id` invariant report.
pub const J_SQUARED_PASS_LEVEL: f64 = 1e-10;

/// The standard structure: multiplication by i on each factor of C^2.
pub fn j_standard() -> Matrix4<f64> {
    Matrix4::new(
        0.0, -1.0, 0.0, 0.0, //
        1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, -1.0, //
        0.0, 0.0, 1.0, 0.0,
    )
}

pub fn real_vec(p: &ComplexPoint2) -> Vector4<f64> {
    let x = p.to_real();
    Vector4::new(x[0], x[1], x[2], x[3])
}

pub fn complex_pair(v: &Vector4<f64>) -> [Complex64; 2] {
    [Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3])]
}

fn max_abs(m: &Matrix4<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

type MatrixEval = Arc<dyn Fn(&ComplexPoint2) -> Matrix4<f64> + Send + Sync>;
type DerivativeEval = Arc<dyn Fn(&ComplexPoint2) -> [Matrix4<f64>; 4] + Send + Sync>;

/// A field of linear maps J(z) with J^2 = -Id, C^1-close to the standard
/// structure. Immutable and shareable; evaluators must be pure.
#[derive(Clone)]
pub struct AlmostComplexStructure {
    matrix_at: MatrixEval,
    derivative_at: Option<DerivativeEval>,
    /// Certified (empirical) upper bound for the C^1 distance to J_st.
    pub closeness_delta: f64,
    standard: bool,
    label: String,
}

impl AlmostComplexStructure {
    pub fn standard() -> Self {
        Self {
            matrix_at: Arc::new(|_| j_standard()),
            derivative_at: Some(Arc::new(|_| [Matrix4::zeros(); 4])),
            closeness_delta: 0.0,
            standard: true,
            label: "standard".to_string(),
        }
    }

    /// Build from a raw evaluator. `closeness_delta` is taken on trust here;
    /// use [`validate_structure`] to check it against samples.
    pub fn from_evaluator(
        matrix_at: impl Fn(&ComplexPoint2) -> Matrix4<f64> + Send + Sync + 'static,
        derivative_at: Option<DerivativeEval>,
        closeness_delta: f64,
        label: impl Into<String>,
    ) -> Self {
        Self {
            matrix_at: Arc::new(matrix_at),
            derivative_at,
            closeness_delta,
            standard: false,
            label: label.into(),
        }
    }

    pub fn is_standard(&self) -> bool {
        self.standard
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn matrix(&self, z: &ComplexPoint2) -> Matrix4<f64> {
        (self.matrix_at)(z)
    }

    /// DJ(z) as four direction derivatives, one per real coordinate.
    /// Falls back to centered differences with step [`DERIVATIVE_FD_STEP`].
    pub fn derivative(&self, z: &ComplexPoint2) -> [Matrix4<f64>; 4] {
        if let Some(d) = &self.derivative_at {
            return d(z);
        }
        let x = z.to_real();
        let mut out = [Matrix4::zeros(); 4];
        for (a, da) in out.iter_mut().enumerate() {
            let mut hi = x;
            let mut lo = x;
            hi[a] += DERIVATIVE_FD_STEP;
            lo[a] -= DERIVATIVE_FD_STEP;
            let jp = self.matrix(&ComplexPoint2::from_real(hi));
            let jm = self.matrix(&ComplexPoint2::from_real(lo));
            *da = (jp - jm) / (2.0 * DERIVATIVE_FD_STEP);
        }
        out
    }

    /// max(||J(z) - J_st||, ||DJ(z)||) in the max-entry norm.
    pub fn c1_defect(&self, z: &ComplexPoint2) -> f64 {
        let dj = self.derivative(z);
        let d0 = max_abs(&(self.matrix(z) - j_standard()));
        dj.iter().fold(d0, |acc, m| acc.max(max_abs(m)))
    }
}

impl std::fmt::Debug for AlmostComplexStructure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "AlmostComplexStructure {{ label: {:?}, delta: {:.3e} }}",
            self.label, self.closeness_delta
        )
    }
}

/// An invertible frame field G(z) used to conjugate the standard structure.
#[derive(Clone)]
pub struct FrameField {
    eval: Arc<dyn Fn(&ComplexPoint2) -> Matrix4<f64> + Send + Sync>,
    label: String,
}

impl FrameField {
    pub fn new(
        eval: impl Fn(&ComplexPoint2) -> Matrix4<f64> + Send + Sync + 'static,
        label: impl Into<String>,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            label: label.into(),
        }
    }

    pub fn identity() -> Self {
        Self::new(|_| Matrix4::identity(), "identity")
    }

    /// G = Id + t * exp(-|z|^2) * K with a fixed mixing matrix K.
    /// The Gaussian profile keeps the field smooth and C^1-bounded.
    pub fn bump(t: f64) -> Self {
        let k = Matrix4::new(
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, -1.0, //
            0.0, 1.0, 0.0, 0.0, //
            1.0, 0.0, 0.0, 0.0,
        );
        Self::new(
            move |z| Matrix4::identity() + k * (t * (-z.norm_sqr()).exp()),
            format!("bump(t={t})"),
        )
    }

    /// Constant shear G = Id + t * e1 e2^T; yields a constant J != J_st.
    pub fn shear(t: f64) -> Self {
        let mut e = Matrix4::zeros();
        e[(0, 1)] = 1.0;
        Self::new(
            move |z| {
                let _ = z;
                Matrix4::identity() + e * t
            },
            format!("shear(t={t})"),
        )
    }

    pub fn by_name(name: &str, t: f64) -> Option<Self> {
        match name {
            "bump" => Some(Self::bump(t)),
            "shear" => Some(Self::shear(t)),
            _ => None,
        }
    }

    pub fn eval(&self, z: &ComplexPoint2) -> Matrix4<f64> {
        (self.eval)(z)
    }
}

/// Deterministic sample of the closed ball used for delta estimation and
/// frame invertibility checks: lattice nodes of a 7^4 bounding box plus the
/// domain center.
fn domain_samples(domain: &Domain) -> Vec<ComplexPoint2> {
    let mut pts = vec![domain.center];
    let n = 7;
    let step = 2.0 * domain.radius / (n - 1) as f64;
    let c = domain.center.to_real();
    for i0 in 0..n {
        for i1 in 0..n {
            for i2 in 0..n {
                for i3 in 0..n {
                    let p = ComplexPoint2::from_real([
                        c[0] - domain.radius + step * i0 as f64,
                        c[1] - domain.radius + step * i1 as f64,
                        c[2] - domain.radius + step * i2 as f64,
                        c[3] - domain.radius + step * i3 as f64,
                    ]);
                    if domain.contains(&p) || p.dist(domain.center) <= domain.radius {
                        pts.push(p);
                    }
                }
            }
        }
    }
    pts
}

/// Safety factor applied to the sampled C^1 distance when estimating
/// `closeness_delta` for conjugated structures.
const DELTA_SAFETY: f64 = 1.25;

/// Build J = G J_st G^{-1}. Satisfies J^2 = -Id to machine precision by
/// construction; `closeness_delta` is estimated by dense sampling of
/// `base_domain`.
pub fn conjugated_structure(
    frame: &FrameField,
    base_domain: &Domain,
) -> Result<AlmostComplexStructure, StructureError> {
    let samples = domain_samples(base_domain);
    let mut delta = 0.0f64;
    let frame_for_eval = frame.clone();
    let matrix_at = move |z: &ComplexPoint2| -> Matrix4<f64> {
        let g = frame_for_eval.eval(z);
        let g_inv = g
            .try_inverse()
            .expect("frame singularity must be caught at construction");
        g * j_standard() * g_inv
    };
    for z in &samples {
        let g = frame.eval(z);
        let det = g.determinant();
        if det.abs() < 1e-10 {
            let x = z.to_real();
            return Err(StructureError::SingularFrame(x[0], x[1], x[2], x[3], det.abs()));
        }
    }
    let probe = AlmostComplexStructure::from_evaluator(
        matrix_at.clone(),
        None,
        f64::INFINITY,
        format!("conjugated[{}]", frame.label),
    );
    for z in &samples {
        delta = delta.max(probe.c1_defect(z));
    }
    Ok(AlmostComplexStructure::from_evaluator(
        matrix_at,
        None,
        delta * DELTA_SAFETY,
        format!("conjugated[{}]", frame.label),
    ))
}

/// Which convention the PDE residual uses for the Q term.
///
/// The J-holomorphy equation pairs `du/dzbar` with a Q-term built from
/// `du/dz`; the literature splits on whether Q multiplies that derivative
/// complex-linearly or acts on its componentwise conjugate. Both are
/// implemented; the structural identity `du o i = J(u) o du` arbitrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QMode {
    Linear,
    Antilinear,
}

/// Extract the complex 2x2 block matrix of the real operator
/// (J(z) - J_st)(J(z) + J_st)^{-1}.
///
/// For an exact structure the operator anticommutes with J_st, so the block
/// reading `v -> B conj(v)` loses nothing; the leftover linear part is of
/// the order of the `J^2 + Id` defect.
pub fn compute_q(
    structure: &AlmostComplexStructure,
    z: &ComplexPoint2,
) -> Result<Matrix2<Complex64>, StructureError> {
    if structure.is_standard() {
        return Ok(Matrix2::zeros());
    }
    let j = structure.matrix(z);
    let jst = j_standard();
    let sum = j + jst;
    // Direct inverse; conditioning guard in place of a full SVD since this
    // runs once per collocation point inside the solver loop.
    let inv = sum.try_inverse().ok_or_else(|| {
        let x = z.to_real();
        StructureError::SingularStructure(x[0], x[1], x[2], x[3], 0.0)
    })?;
    if max_abs(&inv) > 1e10 {
        let x = z.to_real();
        return Err(StructureError::SingularStructure(
            x[0],
            x[1],
            x[2],
            x[3],
            1.0 / max_abs(&inv),
        ));
    }
    let q_real = (j - jst) * inv;
    // Column k of B is Q applied to the k-th complex basis vector.
    let c0 = complex_pair(&q_real.column(0).into_owned());
    let c1 = complex_pair(&q_real.column(2).into_owned());
    Ok(Matrix2::new(c0[0], c1[0], c0[1], c1[1]))
}

/// The deformation tensor of a structure together with the residual
/// convention selected for it.
#[derive(Clone, Debug)]
pub struct QTensor {
    structure: Arc<AlmostComplexStructure>,
    pub mode: QMode,
}

impl QTensor {
    pub fn new(structure: Arc<AlmostComplexStructure>, mode: QMode) -> Self {
        Self { structure, mode }
    }

    pub fn zero() -> Self {
        Self {
            structure: Arc::new(AlmostComplexStructure::standard()),
            mode: QMode::Antilinear,
        }
    }

    pub fn structure(&self) -> &AlmostComplexStructure {
        &self.structure
    }

    pub fn structure_arc(&self) -> Arc<AlmostComplexStructure> {
        Arc::clone(&self.structure)
    }

    pub fn is_zero(&self) -> bool {
        self.structure.is_standard()
    }

    pub fn with_mode(&self, mode: QMode) -> Self {
        Self {
            structure: Arc::clone(&self.structure),
            mode,
        }
    }

    pub fn q_at(&self, z: &ComplexPoint2) -> Result<Matrix2<Complex64>, StructureError> {
        compute_q(&self.structure, z)
    }

    /// The Q-term of the PDE residual: `dbar(u) + apply(q, dz(u)) = 0`.
    ///
    /// Linear mode multiplies the derivative directly; antilinear mode uses
    /// the conjugated derivative with the sign that makes the residual
    /// vanish exactly on J-holomorphic maps.
    pub fn apply(&self, q: &Matrix2<Complex64>, w: [Complex64; 2]) -> [Complex64; 2] {
        let v = match self.mode {
            QMode::Linear => q * Vector2::new(w[0], w[1]),
            QMode::Antilinear => -(q * Vector2::new(w[0].conj(), w[1].conj())),
        };
        [v[0], v[1]]
    }
}

/// Outcome of [`validate_structure`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub samples_checked: usize,
    pub max_j_squared_defect: f64,
    pub min_singular_value: f64,
    pub empirical_c1_distance: f64,
    pub closeness_delta: f64,
    pub passes: bool,
}

/// Check the standing hypotheses at the given samples: J^2 = -Id,
/// invertibility of (J + J_st), and the claimed C^1 bound.
pub fn validate_structure(
    structure: &AlmostComplexStructure,
    samples: &[ComplexPoint2],
) -> Result<ValidationReport, StructureError> {
    if samples.is_empty() {
        return Err(StructureError::NoSamples);
    }
    let jst = j_standard();
    let mut max_defect = 0.0f64;
    let mut min_sigma = f64::INFINITY;
    let mut c1 = 0.0f64;
    for z in samples {
        let j = structure.matrix(z);
        let defect = max_abs(&(j * j + Matrix4::identity()));
        max_defect = max_defect.max(defect);
        if defect > J_SQUARED_HARD_LIMIT {
            return Err(StructureError::NotAlmostComplex {
                defect,
                tolerance: J_SQUARED_HARD_LIMIT,
            });
        }
        let svd = (j + jst).svd(false, false);
        let sigma = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        if sigma < 1e-8 {
            let x = z.to_real();
            return Err(StructureError::SingularStructure(x[0], x[1], x[2], x[3], sigma));
        }
        min_sigma = min_sigma.min(sigma);
        c1 = c1.max(structure.c1_defect(z));
    }
    let passes = max_defect <= J_SQUARED_PASS_LEVEL && c1 <= structure.closeness_delta;
    Ok(ValidationReport {
        samples_checked: samples.len(),
        max_j_squared_defect: max_defect,
        min_singular_value: min_sigma,
        empirical_c1_distance: c1,
        closeness_delta: structure.closeness_delta,
        passes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_points() -> Vec<ComplexPoint2> {
        vec![
            ComplexPoint2::ORIGIN,
            ComplexPoint2::from_real([0.3, -0.1, 0.2, 0.4]),
            ComplexPoint2::from_real([-0.5, 0.2, 0.0, -0.3]),
            ComplexPoint2::from_real([0.1, 0.7, -0.2, 0.1]),
        ]
    }

    #[test]
    fn standard_structure_validates_with_zero_distance() {
        let j = AlmostComplexStructure::standard();
        let report = validate_structure(&j, &sample_points()).unwrap();
        assert!(report.passes);
        assert_eq!(report.empirical_c1_distance, 0.0);
        assert!(report.max_j_squared_defect < 1e-15);
    }

    #[test]
    fn j_with_wrong_square_is_rejected() {
        // A field with J^2 = +Id.
        let bad = AlmostComplexStructure::from_evaluator(
            |_| {
                Matrix4::new(
                    0.0, 1.0, 0.0, 0.0, //
                    1.0, 0.0, 0.0, 0.0, //
                    0.0, 0.0, 0.0, 1.0, //
                    0.0, 0.0, 1.0, 0.0,
                )
            },
            None,
            0.0,
            "involution",
        );
        match validate_structure(&bad, &sample_points()) {
            Err(StructureError::NotAlmostComplex { .. }) => {}
            other => panic!("expected NotAlmostComplex, got {other:?}"),
        }
    }

    #[test]
    fn conjugated_identity_reproduces_standard_bitwise() {
        let d = Domain::unit_ball();
        let j = conjugated_structure(&FrameField::identity(), &d).unwrap();
        for z in sample_points() {
            assert_eq!(j.matrix(&z), j_standard());
        }
    }

    #[test]
    fn conjugated_bump_validates_against_dense_grid_oracle() {
        let d = Domain::unit_ball();
        let j = conjugated_structure(&FrameField::bump(0.05), &d).unwrap();
        let report = validate_structure(&j, &sample_points()).unwrap();
        assert!(report.passes, "report: {report:?}");
        assert!(report.empirical_c1_distance > 0.0);

        // Brute-force oracle: dense grid of fresh points, distance must stay
        // under the certified delta.
        let mut brute = 0.0f64;
        for i in 0..9 {
            for jj in 0..9 {
                let z = ComplexPoint2::from_real([
                    -0.8 + 0.2 * i as f64,
                    0.13,
                    -0.8 + 0.2 * jj as f64,
                    -0.07,
                ]);
                brute = brute.max(j.c1_defect(&z));
            }
        }
        assert!(brute <= j.closeness_delta, "{brute} vs {}", j.closeness_delta);
    }

    #[test]
    fn conjugated_perturbation_scales_linearly() {
        // ||J - J_st|| <= c t for the shear family, against direct products.
        let d = Domain::unit_ball();
        for &t in &[0.01, 0.02, 0.05] {
            let j = conjugated_structure(&FrameField::shear(t), &d).unwrap();
            let m = j.matrix(&ComplexPoint2::ORIGIN);
            let dist = max_abs(&(m - j_standard()));
            assert!(dist <= 3.0 * t, "t = {t}, dist = {dist}");
            // direct product oracle
            let mut e = Matrix4::zeros();
            e[(0, 1)] = 1.0;
            let g = Matrix4::identity() + e * t;
            let oracle = g * j_standard() * g.try_inverse().unwrap();
            assert!(max_abs(&(m - oracle)) < 1e-14);
        }
    }

    #[test]
    fn singular_frame_is_reported() {
        let d = Domain::unit_ball();
        // Scalar frame vanishing near the origin.
        let f = FrameField::new(
            |z| Matrix4::identity() * (z.norm_sqr() - 1e-12),
            "vanishing",
        );
        match conjugated_structure(&f, &d) {
            Err(StructureError::SingularFrame(..)) => {}
            other => panic!("expected SingularFrame, got {other:?}"),
        }
    }

    #[test]
    fn q_vanishes_for_standard() {
        let j = AlmostComplexStructure::standard();
        let q = compute_q(&j, &ComplexPoint2::ORIGIN).unwrap();
        assert_eq!(q, Matrix2::zeros());
    }

    #[test]
    fn q_matches_real_block_oracle() {
        let d = Domain::unit_ball();
        let j = conjugated_structure(&FrameField::bump(0.05), &d).unwrap();
        let z = ComplexPoint2::from_real([0.2, -0.3, 0.1, 0.15]);
        let q = compute_q(&j, &z).unwrap();
        // Direct real-matrix evaluation, reinterpreted as complex blocks.
        let m = j.matrix(&z);
        let q_real = (m - j_standard()) * (m + j_standard()).try_inverse().unwrap();
        let c0 = complex_pair(&q_real.column(0).into_owned());
        let c1 = complex_pair(&q_real.column(2).into_owned());
        let oracle = Matrix2::new(c0[0], c1[0], c0[1], c1[1]);
        assert!((q - oracle).iter().all(|e| e.norm() < 1e-12));
        // Antilinearity of the real operator: Q (i e_k) = -i B e_k.
        let col = q_real.column(1).into_owned();
        let got = complex_pair(&col);
        let want = [-Complex64::i() * oracle[(0, 0)], -Complex64::i() * oracle[(1, 0)]];
        assert!((got[0] - want[0]).norm() < 1e-12 && (got[1] - want[1]).norm() < 1e-12);
    }

    #[test]
    fn q_norm_bounded_by_delta_on_grid() {
        let d = Domain::unit_ball();
        let j = conjugated_structure(&FrameField::bump(0.05), &d).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..7 {
            for k in 0..7 {
                let z = ComplexPoint2::from_real([
                    -0.75 + 0.25 * i as f64,
                    0.1,
                    -0.75 + 0.25 * k as f64,
                    -0.2,
                ]);
                let q = compute_q(&j, &z).unwrap();
                let norm = q.iter().fold(0.0f64, |a, e| a.max(e.norm()));
                worst = worst.max(norm);
            }
        }
        assert!(worst <= j.closeness_delta, "{worst} vs {}", j.closeness_delta);
    }

    #[test]
    fn q_depends_continuously_on_frame() {
        // Frozen regression constant for |dQ| <= c |dG| on a fixed grid.
        const C: f64 = 2.0;
        let d = Domain::unit_ball();
        let eta = 1e-3;
        let j0 = conjugated_structure(&FrameField::bump(0.05), &d).unwrap();
        let j1 = conjugated_structure(&FrameField::bump(0.05 + eta), &d).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..5 {
            let z = ComplexPoint2::from_real([-0.6 + 0.3 * i as f64, 0.2, 0.1, -0.1]);
            let dq = compute_q(&j1, &z).unwrap() - compute_q(&j0, &z).unwrap();
            worst = worst.max(dq.iter().fold(0.0f64, |a, e| a.max(e.norm())));
        }
        assert!(worst <= C * eta, "dQ = {worst}, c*eta = {}", C * eta);
    }
}
