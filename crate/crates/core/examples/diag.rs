use jpsh::pipeline::PipelineConfig;
use jpsh::solver::q_tensor_for;
use jpsh::*;
use std::sync::Arc;
use std::time::Instant;

fn main() {
    let domain = Domain::unit_ball();
    let grid = DiscGrid::new(24, 128).unwrap();
    let u = ScalarField::sq_norm_about(domain.center);
    let s = Arc::new(
        conjugated_structure(&FrameField::bump(0.05), &Domain::unit_ball().scaled(2.0)).unwrap(),
    );
    let t0 = Instant::now();
    let q = q_tensor_for(&s, &grid, &SolverConfig::default()).unwrap();
    println!("mode selection: {:?} ({:.2?})", q.mode, t0.elapsed());

    // single envelope node cost at t=0.05
    let cfg = SearchConfig::budget(2, 50);
    let t0 = Instant::now();
    let res = poletsky_envelope(
        &u,
        &domain,
        ComplexPoint2::from_real([0.2, 0.0, 0.1, 0.0]),
        &q,
        &grid,
        &cfg,
        0,
        &[],
    )
    .unwrap();
    println!(
        "single envelope node: value {:.6} (f(p) {:.6}), {} evals, {:.2?}",
        res.value, res.upper_bound_f_at_p, res.evaluations, t0.elapsed()
    );

    // small pipeline at t = 0.05
    let spec = GridSpec::cube(ComplexPoint2::ORIGIN, 0.497, 3);
    let mut pcfg = PipelineConfig::new(spec);
    pcfg.search = SearchConfig::budget(1, 30);
    pcfg.sub_mean_discs = 10;
    pcfg.seed = 3;
    let t0 = Instant::now();
    match approximation_pipeline(&u, &domain, &q, &grid, 2, &pcfg) {
        Ok(seq) => {
            println!("pipeline 3^4 K=2 t=0.05: {:.2?}", t0.elapsed());
            for c in seq.certifications.entries.iter().filter(|c| !c.passed) {
                println!("  FAILED {}: {:.4e} vs {:.4e} ({})", c.name, c.observed, c.bound, c.note);
            }
        }
        Err(e) => println!("pipeline FAILED after {:.2?}: {e}", t0.elapsed()),
    }
}
