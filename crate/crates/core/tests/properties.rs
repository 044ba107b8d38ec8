use oscillab::chain::{apply_swap, hamiltonian_flow, ChainParams, ChainState, ProductGaussian};
use oscillab::continuum::{self, FourierSeries, SpectralProfile};
use oscillab::lattice::{self, DiscreteField};
use oscillab::moments::{self, evolve, EvolveOptions, MomentState};
use oscillab::rw::{self, WalkDistribution2D, WalkRates};
use oscillab::sobolev;
use proptest::collection::vec;
use proptest::prelude::*;

fn field(min_len: usize, max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(-3.0f64..3.0, min_len..=max_len)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summation_by_parts(f in field(3, 40), seed in 0u64..1000) {
        let n = f.len();
        let g: Vec<f64> = (0..n).map(|x| ((x as u64 * 7 + seed) % 11) as f64 - 5.0).collect();
        let (f, g) = (DiscreteField::new(f).unwrap(), DiscreteField::new(g).unwrap());
        // <grad f, g> = -<f, N (g(x) - g(x-1))>
        let lhs = lattice::riemann_inner(lattice::grad_forward(&f).values(), g.values());
        let back: Vec<f64> = lattice::backward_difference(&g).values().iter().map(|d| n as f64 * d).collect();
        let rhs = -lattice::riemann_inner(f.values(), &back);
        prop_assert!(close(lhs, rhs, 1e-12));
    }

    #[test]
    fn laplacian_is_divergence_of_gradient(f in field(3, 40)) {
        let n = f.len() as f64;
        let f = DiscreteField::new(f).unwrap();
        let lap = lattice::laplacian_1d(&f);
        let composed = lattice::backward_difference(&lattice::grad_forward(&f));
        for (a, b) in lap.values().iter().zip(composed.values()) {
            prop_assert!(close(*a, n * b, 1e-12));
        }
    }

    #[test]
    fn fourier_round_trip(f in field(3, 64)) {
        let df = DiscreteField::new(f.clone()).unwrap();
        let back = lattice::idft(&lattice::dft(&df)).unwrap();
        for (a, b) in f.iter().zip(back.values()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn flow_and_swaps_conserve_volume_and_energy(f in field(5, 48), tau in 0.0f64..0.5, bonds in vec(0usize..1000, 0..20)) {
        let n = f.len();
        let p = ChainParams::new(n, 0.5, 1.0).unwrap();
        let mut st = ChainState::new(DiscreteField::new(f).unwrap(), 1.into());
        let (v0, e0) = (st.volume(), st.energy());
        hamiltonian_flow(&mut st, tau, &p);
        for b in bonds {
            apply_swap(&mut st, b % n);
        }
        prop_assert!(close(st.volume(), v0, 1e-11));
        prop_assert!(close(st.energy(), e0, 1e-11));
    }

    #[test]
    fn hminus1_norm_is_dominated_by_l2(f in field(2, 64)) {
        let k = sobolev::kernel_kn(f.len()).unwrap();
        let norm = sobolev::hminus1_norm_sq(&f, &k).unwrap();
        let l2 = lattice::riemann_inner(&f, &f);
        prop_assert!(norm >= 0.0);
        prop_assert!(norm <= l2 * (1.0 + 1e-12) + 1e-15);
        prop_assert!(close(norm, sobolev::hminus1_norm_sq_direct(&f, &k).unwrap(), 1e-10));
    }

    #[test]
    fn moment_system_conserves_totals(v in field(5, 24), scale in 0.5f64..2.0, a in 0.0f64..0.9) {
        let n = v.len();
        let p = ChainParams::new(n, a * n as f64, 1.0).unwrap();
        let law = ProductGaussian::from_profiles(n, |u| v[(u * n as f64).round() as usize % n], |_| 10.0 + 10.0 * scale).unwrap();
        let m = MomentState::from_product(&law);
        let dv = moments::volume_rhs(&m.v, &p);
        let ds = moments::second_moment_rhs(&m, &p).unwrap();
        prop_assert!(dv.sum().abs() < 1e-9 * (1.0 + p.n_sq()));
        let trace: f64 = (0..n).map(|x| ds[x * n + x]).sum();
        prop_assert!(trace.abs() < 1e-9 * p.n_sq() * 40.0);
        // symmetric derivative
        for x in 0..n {
            for y in 0..n {
                prop_assert!((ds[x * n + y] - ds[y * n + x]).abs() < 1e-9 * p.n_sq());
            }
        }
    }

    #[test]
    fn pair_walk_preserves_probability(n in 5usize..12, a in 0.0f64..0.95, x in 0usize..100, r in 1usize..100) {
        let x = x % n;
        let y = (x + 1 + r % (n - 1)) % n;
        let rates = WalkRates::new(n, a).unwrap();
        let p0 = WalkDistribution2D::point_mass(n, x, y).unwrap();
        for law in rw::forward_solve_2d(&p0, &rates, &[0.001, 0.01], rw::WALK_TOL).unwrap() {
            prop_assert!((law.p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            prop_assert!(law.p.iter().all(|&q| q > -1e-12));
        }
    }

    #[test]
    fn translation_of_spectral_profiles(s in -1.0f64..1.0, u in 0.0f64..1.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let series = FourierSeries { mean: 0.3, cos: vec![(1, a), (3, 0.1)], sin: vec![(2, b)] };
        let f = SpectralProfile::from_series(&series, 16).unwrap();
        prop_assert!((f.translated(s).eval(u) - series.eval(u + s)).abs() < 1e-12);
    }

    #[test]
    fn limit_volume_keeps_its_mean(c in -1.0f64..1.0, a in -1.0f64..1.0, alpha in 0.0f64..2.0, t in 0.0f64..0.2) {
        let series = FourierSeries { mean: c, cos: vec![(1, a)], sin: vec![(2, 0.5)] };
        let v0 = SpectralProfile::from_series(&series, 32).unwrap();
        let v = &continuum::solve_volume(&v0, alpha, &[t]).unwrap().profiles[0];
        prop_assert!((v.mean() - c).abs() < 1e-14);
    }
}

#[test]
fn gibbs_moments_are_stationary() {
    let (n, rho, beta) = (12, 0.4, 2.0);
    let p = ChainParams::new(n, 0.5, 1.0).unwrap();
    let m0 = MomentState::equilibrium(n, rho, beta).unwrap();
    let m = &evolve(&m0, &p, &[0.05], EvolveOptions::default()).unwrap()[0];
    for x in 0..n {
        assert!((m.v[x] - rho).abs() < 1e-12);
        for y in 0..n {
            assert!((m.second(x, y) - m0.second(x, y)).abs() < 1e-12);
        }
    }
    assert!(m.correlation_sup() < 1e-12);
}
