mod common;

use nalgebra::{DMatrix, DVector};
use oscillab::chain::{ChainParams, ProductGaussian, ReplicaSeed};
use oscillab::continuum::{self, FourierSeries, SpectralProfile};
use oscillab::moments::{evolve, evolve_correlation_form, EvolveOptions, MomentState};
use oscillab::rw::{self, WalkDistribution1D, WalkDistribution2D, WalkRates};
use rand::Rng;
use rand_distr::Exp1;
use std::f64::consts::PI;

fn standard_law(n: usize) -> ProductGaussian {
    ProductGaussian::from_profiles(n, |u| 0.5 * (2.0 * PI * u).cos() + 0.2 * (4.0 * PI * u).sin(), |u| 1.0 + 0.3 * (2.0 * PI * u).sin())
        .unwrap()
}

fn flatten(m: &MomentState) -> Vec<f64> {
    let n = m.n();
    let mut y = m.v.values().to_vec();
    for x in 0..n {
        for z in 0..n {
            y.push(m.second(x, z));
        }
    }
    y
}

#[test]
fn both_moment_formulations_match_dense_exponential() {
    let n = 6;
    let p = ChainParams::new(n, 0.5, 1.0).unwrap();
    let m0 = MomentState::from_product(&standard_law(n));
    let gen = common::dense(n + n * n, |y| common::brute_force_moment_derivative(n, p.alpha_n(), y));
    let y0 = DVector::from_vec(flatten(&m0));
    let times = [0.003, 0.01, 0.02];
    let a = evolve(&m0, &p, &times, EvolveOptions::default()).unwrap();
    let b = evolve_correlation_form(&m0, &p, &times, EvolveOptions::default()).unwrap();
    for (k, &t) in times.iter().enumerate() {
        let exact = common::expm(&(&gen * t)) * &y0;
        for (name, got) in [("second-moment", &a[k]), ("correlation", &b[k])] {
            let err = flatten(got).iter().zip(exact.iter()).map(|(g, e)| (g - e).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8, "{name} form at t={t}: {err:e}");
        }
    }
}

#[test]
fn covariance_stays_positive_semidefinite() {
    let n = 8;
    let p = ChainParams::new(n, 0.8, 1.0).unwrap();
    let m0 = MomentState::from_product(&standard_law(n));
    for m in evolve(&m0, &p, &[0.005, 0.02, 0.1], EvolveOptions::default()).unwrap() {
        let cov = DMatrix::from_fn(n, n, |x, y| m.second(x, y) - m.v[x] * m.v[y]);
        let min = cov.symmetric_eigen().eigenvalues.min();
        assert!(min > -1e-10, "t={} min eigenvalue {min}", m.t);
    }
}

#[test]
fn pair_walk_generator_is_irreducible_with_a_gap() {
    let n = 6;
    let rates = WalkRates::new(n, 0.4).unwrap();
    let dim = n * (n - 1);
    let gen = common::dense(dim, |p| {
        let d = WalkDistribution2D { n, p: p.to_vec(), t: 0.0 };
        rw::generator_2d(&d, &rates)
    });
    // columns of a forward generator sum to zero
    for j in 0..dim {
        assert!(gen.column(j).sum().abs() < 1e-9);
    }
    let eig = gen.complex_eigenvalues();
    let mut re: Vec<f64> = eig.iter().map(|z| z.re).collect();
    re.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert!(re[0].abs() < 1e-8, "top eigenvalue {}", re[0]);
    assert!(re[1] < -1.0, "spectral gap {}", re[1]);
}

#[test]
fn pair_walk_law_matches_simulated_walkers() {
    let (n, a, t) = (6, 0.3, 0.03);
    let rates = WalkRates::new(n, a).unwrap();
    let p0 = WalkDistribution2D::point_mass(n, 0, 2).unwrap();
    let law = rw::forward_solve_2d(&p0, &rates, &[t], rw::WALK_TOL).unwrap().pop().unwrap();
    let walkers = 200_000u64;
    let mut counts = vec![0u64; n * n];
    for w in 0..walkers {
        let mut rng = ReplicaSeed::new(11, w).rng();
        let (mut x, mut y) = (0usize, 2usize);
        let mut clock = 0.0;
        loop {
            let jumps = common::pair_jumps(n, a, x, y);
            let total: f64 = jumps.iter().map(|j| j.1).sum();
            clock += rng.sample::<f64, _>(Exp1) / total;
            if clock > t {
                break;
            }
            let mut u = rng.random::<f64>() * total;
            for ((nx, ny), r) in jumps {
                if u < r {
                    (x, y) = (nx, ny);
                    break;
                }
                u -= r;
            }
        }
        counts[x * n + y] += 1;
    }
    for x in 0..n {
        for y in (0..n).filter(|&y| y != x) {
            let freq = counts[x * n + y] as f64 / walkers as f64;
            let p = law.prob(x, y);
            let se = (p * (1.0 - p) / walkers as f64).sqrt().max(1e-6);
            assert!((freq - p).abs() < 4.5 * se, "({x},{y}): walkers {freq} law {p}");
        }
    }
}

#[test]
fn projected_pair_law_is_the_distance_walk() {
    let n = 9;
    let rates = WalkRates::new(n, 0.6).unwrap();
    let p0 = WalkDistribution2D::point_mass(n, 3, 5).unwrap();
    let times = [0.002, 0.01, 0.05];
    let laws = rw::forward_solve_2d(&p0, &rates, &times, rw::WALK_TOL).unwrap();
    let dist = rw::forward_solve_1d(&WalkDistribution1D::point_mass(n, 2).unwrap(), &times, rw::WALK_TOL).unwrap();
    for (l2, l1) in laws.iter().zip(&dist) {
        let proj = rw::project_to_1d(l2);
        let err = proj.q.iter().zip(&l1.q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err:e}");
    }
}

#[test]
fn local_time_matches_direct_quadrature_of_distance_law() {
    let (n, horizon) = (8, 0.2);
    let lt = rw::local_time(n, 1, horizon, 1e-8).unwrap();
    // Simpson on a fine grid of exact laws
    let k = 400;
    let grid: Vec<f64> = (1..=k).map(|j| horizon * j as f64 / k as f64).collect();
    let laws = rw::forward_solve_1d(&WalkDistribution1D::point_mass(n, 1).unwrap(), &grid, 1e-13).unwrap();
    let mut f = vec![1.0];
    f.extend(laws.iter().map(|q| q.boundary_mass()));
    let h = horizon / k as f64;
    let simpson: f64 = h / 3.0
        * (f[0] + f[k] + (1..k).map(|i| if i % 2 == 1 { 4.0 * f[i] } else { 2.0 * f[i] }).sum::<f64>());
    assert!((lt - simpson).abs() / simpson < 1e-6, "{lt} vs {simpson}");
}

#[test]
fn limit_equations_match_method_of_lines() {
    let m = continuum::DEFAULT_MODES;
    let v_series = FourierSeries {
        mean: 0.1,
        cos: vec![(1, 0.5)],
        sin: vec![(2, 0.2)],
    };
    let e_series = FourierSeries {
        mean: 1.0,
        cos: vec![],
        sin: vec![(1, 0.3)],
    };
    let v0 = SpectralProfile::from_series(&v_series, m).unwrap();
    let e0 = SpectralProfile::from_series(&e_series, m).unwrap();
    let chi0 = SpectralProfile::linear_combination(1.0, &e0, -1.0, &v0.product(&v0, m)).unwrap();
    let (alpha, t, points) = (0.7, 0.005, 2048);
    let (rv, re, rc) = common::method_of_lines(
        |u| v_series.eval(u),
        |u| e_series.eval(u),
        |u| e_series.eval(u) - v_series.eval(u).powi(2),
        alpha,
        t,
        points,
    );
    let v = &continuum::solve_volume(&v0, alpha, &[t]).unwrap().profiles[0];
    let e = &continuum::solve_energy(&e0, &v0, alpha, &[t]).unwrap().profiles[0];
    let chi = &continuum::solve_chi(&v0, alpha, &chi0, &[t]).unwrap().profiles[0];
    for (name, spectral, reference) in [("volume", v, &rv), ("energy", e, &re), ("chi", chi, &rc)] {
        let got = spectral.sample(points);
        let err = got.iter().zip(reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{name}: {err:e}");
    }
    // chi = e - v^2 along the solution
    let diff = SpectralProfile::linear_combination(1.0, e, -1.0, &v.product(v, m)).unwrap();
    let err = (0..64).map(|i| (diff.eval(i as f64 / 64.0) - chi.eval(i as f64 / 64.0)).abs()).fold(0.0, f64::max);
    assert!(err < 1e-12, "chi identity {err:e}");
}
