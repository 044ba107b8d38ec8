use oscillab_web::ops;

#[test]
fn profiles_have_four_blocks_and_track_the_limit() {
    let n = 32;
    let out = ops::profiles(n, 0.5, 1.0, 0.5, 0.01).unwrap();
    assert_eq!(out.len(), 4 * n);
    let (v, rest) = out.split_at(n);
    let (_, rest) = rest.split_at(n);
    let (vl, _) = rest.split_at(n);
    let err = v.iter().zip(vl).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-2, "{err}");
}

#[test]
fn correlations_are_symmetric_with_zero_diagonal() {
    let n = 12;
    let phi = ops::correlations(n, 0.5, 1.0, 0.5, 0.02).unwrap();
    for x in 0..n {
        assert_eq!(phi[x * n + x], 0.0);
        for y in 0..n {
            assert!((phi[x * n + y] - phi[y * n + x]).abs() < 1e-12);
        }
    }
    assert!(phi.iter().any(|&p| p.abs() > 1e-6));
}

#[test]
fn local_times_are_symmetric_in_the_start() {
    let lt = ops::local_times(8, 0.1).unwrap();
    assert_eq!(lt.len(), 7);
    for r in 0..7 {
        assert!((lt[r] - lt[6 - r]).abs() < 1e-6 * lt[r]);
    }
    assert!(lt[0] > lt[3]);
}

#[test]
fn rejects_oversized_tori() {
    assert!(ops::profiles(ops::MAX_N + 1, 0.5, 1.0, 0.5, 0.01).is_err());
    assert!(ops::local_times(2, 0.1).is_err());
}
