use hyperinv::config::RunConfig;
use hyperinv::elliptic::FourierField;
use hyperinv::forward::{make_phantom, solve_wave_observed, PhantomKind, Shape, WaveProblem};
use hyperinv::reconstruct::{compute_c, score};
use hyperinv::time_basis::build_basis;

/// `c_comp` from the projected exact forward solution on a smooth phantom:
/// only truncation and discretization error remain, and adding modes should
/// reduce it.
#[test]
fn smooth_phantom_error_falls_with_modes() {
    let config = RunConfig::default();
    let omega = config.omega().unwrap();
    let outer = config.outer().unwrap();
    let time = config.time_grid().unwrap();
    let f = config.nonlinearity().unwrap();
    let p = config.initial();
    let kind = PhantomKind::Custom(vec![Shape::Bump {
        center: [0.0, 0.1],
        radius: 0.5,
        value: 2.0,
    }]);
    let c_outer = make_phantom(&kind, &outer).unwrap();
    let truth = make_phantom(&kind, &omega).unwrap();
    let problem = WaveProblem {
        grid: &outer,
        time: &time,
        potential: &c_outer.values,
        nonlinearity: &f,
        initial: &p,
        start: config.start_rule().unwrap(),
    };
    let offset = outer.subgrid_offset(&omega).unwrap();
    let (n, big) = (omega.nodes(), outer.nodes());
    let mut series = vec![Vec::with_capacity(time.len()); omega.len()];
    solve_wave_observed(&problem, |_, u| {
        for iy in 0..n {
            for ix in 0..n {
                series[iy * n + ix].push(u[(iy + offset) * big + ix + offset]);
            }
        }
    })
    .unwrap();

    let errors: Vec<f64> = [5, 10, 20]
        .iter()
        .map(|&modes| {
            let basis = build_basis(modes, time.clone()).unwrap();
            let values: Vec<f64> = series.iter().flat_map(|s| basis.project(s).unwrap()).collect();
            let field = FourierField::from_values(omega.clone(), modes, values).unwrap();
            let c = compute_c(&field, &basis, &p, &f, false).unwrap();
            score(&c, &truth).unwrap().relative_l2
        })
        .collect();
    println!("relative L2 error at N = 5, 10, 20: {errors:.4?}");
    assert!(errors[1] < errors[0] && errors[2] < errors[1], "not decreasing: {errors:?}");
}
