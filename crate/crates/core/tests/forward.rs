use hyperinv::config::RunConfig;
use hyperinv::forward::{make_phantom, solve_wave_observed, PhantomKind, WaveProblem};

/// With `R₁ = 4` and `T = 2` no wave reaches the outer ring of `G`, so the
/// nodes within `h` of `∂G` keep the initial value bit for bit.
#[test]
fn outer_ring_never_moves() {
    for (phantom, nonlinearity) in [("two_disks", "sqrt-grad"), ("kite", "quadratic"), ("peanut", "sqrt-grad")] {
        let mut config = RunConfig::default();
        config.forward.nonlinearity = nonlinearity.into();
        let outer = config.outer().unwrap();
        let time = config.time_grid().unwrap();
        let f = config.nonlinearity().unwrap();
        let p = config.initial();
        let c = make_phantom(&PhantomKind::from_tag(phantom).unwrap(), &outer).unwrap();
        let problem = WaveProblem {
            grid: &outer,
            time: &time,
            potential: &c.values,
            nonlinearity: &f,
            initial: &p,
            start: config.start_rule().unwrap(),
        };
        let n = outer.nodes();
        let value = config.forward.initial_value;
        let mut moved_inside = false;
        let mut steps = 0;
        solve_wave_observed(&problem, |_, u| {
            steps += 1;
            for iy in 0..n {
                for ix in 0..n {
                    let ring = ix.min(iy).min(n - 1 - ix).min(n - 1 - iy) <= 1;
                    let v = u[iy * n + ix];
                    if ring {
                        assert_eq!(v, value, "{phantom}: node ({ix}, {iy}) moved");
                    } else if v != value {
                        moved_inside = true;
                    }
                }
            }
        })
        .unwrap();
        assert_eq!(steps, time.len());
        assert!(moved_inside, "{phantom}: the potential never acted");
    }
}
