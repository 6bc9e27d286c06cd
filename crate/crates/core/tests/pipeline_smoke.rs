//! End-to-end smoke run of the approximation pipeline at small scale.

use jpsh::pipeline::PipelineConfig;
use jpsh::{
    approximation_pipeline, ComplexPoint2, DiscGrid, Domain, GridSpec, QTensor, ScalarField,
    SearchConfig,
};

#[test]
fn pipeline_standard_structure_small_grid() {
    let domain = Domain::unit_ball();
    let grid = DiscGrid::new(8, 32).unwrap();
    let u = ScalarField::sq_norm_about(domain.center);
    let spec = GridSpec::cube(ComplexPoint2::ORIGIN, 0.497, 3);
    let mut cfg = PipelineConfig::new(spec);
    cfg.search = SearchConfig::budget(1, 25);
    cfg.sub_mean_discs = 10;
    cfg.seed = 3;
    let seq = approximation_pipeline(&u, &domain, &QTensor::zero(), &grid, 2, &cfg)
        .expect("pipeline should run");
    assert_eq!(seq.stages.len(), 2);
    for cert in &seq.certifications.entries {
        assert!(
            cert.passed,
            "certification {} failed: observed {:.6e} vs bound {:.6e} ({})",
            cert.name, cert.observed, cert.bound, cert.note
        );
    }
    // Smooth stages decrease toward u on the interior sample.
    let last = seq.stages.last().unwrap();
    for &i in &seq.interior {
        let z = seq.spec.point(i);
        assert!(last.psi[i] >= u.eval(&z) - 1e-6);
    }
}
