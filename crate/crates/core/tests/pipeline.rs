use earm::earm::{equilibrate, Recovery};
use earm::estimator::study::{run_levels, Discretization, RefinementMode};
use earm::estimator::{indicator, Effectivity};
use earm::fem::{solve_problem, Method};
use earm::mesh::{read_mesh, write_mesh};
use earm::problem::{BenchmarkCase, BenchmarkKind};
use earm::Error;

#[test]
fn adaptive_meshes_stay_equilibrated_and_round_trip() {
    let case = BenchmarkCase::new(BenchmarkKind::Mixed, 1.0);
    for (m, k, rec) in [(Method::Cg, 2, Recovery::CgPou), (Method::Nc, 1, Recovery::NcFacet), (Method::Dg, 1, Recovery::Dg)] {
        let disc = Discretization::new(m, k, rec);
        let mut meshes = Vec::new();
        let levels = run_levels(case.mesh(4).unwrap(), &case.problem, &disc, RefinementMode::Adaptive, 0.5, 5, |mesh, _| {
            meshes.push(mesh.clone());
            Ok::<_, Error>(())
        })
        .unwrap();
        assert!(meshes.windows(2).all(|w| w[1].n_elements() > w[0].n_elements()));
        for (mesh, level) in meshes.iter().zip(&levels) {
            let r = &level.report;
            assert!(r.max_div_residual < 1e-10, "{m:?}{k} level {}: {:e}", level.level, r.max_div_residual);
            assert!(r.max_trace_jump < 1e-11, "{m:?}{k} level {}: {:e}", level.level, r.max_trace_jump);
            let text = write_mesh(mesh);
            let back = read_mesh(&text).unwrap();
            assert_eq!(write_mesh(&back), text);
            assert_eq!(back.triangles(), mesh.triangles());
        }
        let eta: Vec<f64> = levels.iter().map(|l| l.report.eta).collect();
        assert!(eta.last().unwrap() < &(0.5 * eta[0]), "{m:?}{k}: {eta:?}");
    }
}

#[test]
fn reread_mesh_gives_the_same_estimate() {
    let case = BenchmarkCase::new(BenchmarkKind::Checkerboard, 1e3);
    let mesh = case.mesh(6).unwrap();
    let again = read_mesh(&write_mesh(&mesh)).unwrap();
    let eta = |mesh| {
        let sol = solve_problem(mesh, &case.problem, Method::Cg, 1, None).unwrap();
        let eq = equilibrate(&sol, Recovery::CgPou, None).unwrap();
        indicator(&sol, &eq.equilibrated, 1e3).unwrap()
    };
    let (a, b) = (eta(&mesh), eta(&again));
    assert_eq!(a.eta.to_bits(), b.eta.to_bits());
    assert!(matches!(a.effectivity, Effectivity::Ratio(_)));
}
