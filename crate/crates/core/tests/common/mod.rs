//! Independent reference computations shared by the integration tests.
//! Nothing here calls the crate's stencils or integrators.

#![allow(dead_code)]

use nalgebra::DMatrix;

/// Time derivative of `(v, S)` for the chain, written from the generator
/// acting on linear and quadratic functions: bond swaps at rate `N^2`
/// permute site labels, and the flow `d eta(x) = a N^2 (eta(x+1) - eta(x-1))`
/// acts on products by the Leibniz rule.
pub fn brute_force_moment_derivative(n: usize, a: f64, y: &[f64]) -> Vec<f64> {
    let n2 = (n * n) as f64;
    let (v, s) = y.split_at(n);
    let sw = |b: usize, x: usize| {
        if x == b {
            (b + 1) % n
        } else if x == (b + 1) % n {
            b
        } else {
            x
        }
    };
    let c = |f: &dyn Fn(usize) -> f64, x: usize| f((x + 1) % n) - f((x + n - 1) % n);
    let mut out = vec![0.0; n + n * n];
    for x in 0..n {
        let mut d = 0.0;
        for b in 0..n {
            d += v[sw(b, x)] - v[x];
        }
        out[x] = n2 * d + a * n2 * c(&|z| v[z], x);
    }
    for x in 0..n {
        for yy in 0..n {
            let mut d = 0.0;
            for b in 0..n {
                d += s[sw(b, x) * n + sw(b, yy)] - s[x * n + yy];
            }
            let flow = c(&|z| s[z * n + yy], x) + c(&|z| s[x * n + z], yy);
            out[n + x * n + yy] = n2 * d + a * n2 * flow;
        }
    }
    out
}

/// Dense matrix of a linear map given by its action.
pub fn dense(dim: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    for j in 0..dim {
        e[j] = 1.0;
        let col = f(&e);
        for i in 0..dim {
            m[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    m
}

/// `exp(m)` by scaling and squaring with a Taylor polynomial.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = m / 2f64.powi(s);
    let dim = m.nrows();
    let mut term = DMatrix::identity(dim, dim);
    let mut sum = DMatrix::identity(dim, dim);
    for k in 1..30 {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Method-of-lines reference for the limit equations on `points` sites:
/// `v_t = v'' + 2 alpha v'`, `e_t = e'' + 2 alpha (v^2)'`, `chi_t = chi'' + 2 (v')^2`,
/// with fourth-order central differences and classical RK4.
pub fn method_of_lines(
    v0: impl Fn(f64) -> f64,
    e0: impl Fn(f64) -> f64,
    chi0: impl Fn(f64) -> f64,
    alpha: f64,
    t: f64,
    points: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let h = 1.0 / points as f64;
    let grid = |f: &dyn Fn(f64) -> f64| (0..points).map(|i| f(i as f64 * h)).collect::<Vec<_>>();
    let mut y: Vec<f64> = [grid(&v0), grid(&e0), grid(&chi0)].concat();
    let d1 = |f: &[f64], i: usize| {
        let at = |k: i64| f[(i as i64 + k).rem_euclid(points as i64) as usize];
        (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h)
    };
    let d2 = |f: &[f64], i: usize| {
        let at = |k: i64| f[(i as i64 + k).rem_euclid(points as i64) as usize];
        (-at(2) + 16.0 * at(1) - 30.0 * at(0) + 16.0 * at(-1) - at(-2)) / (12.0 * h * h)
    };
    let rhs = |y: &[f64]| -> Vec<f64> {
        let (v, rest) = y.split_at(points);
        let (e, chi) = rest.split_at(points);
        let vsq: Vec<f64> = v.iter().map(|x| x * x).collect();
        let mut out = vec![0.0; 3 * points];
        for i in 0..points {
            let dv = d1(v, i);
            out[i] = d2(v, i) + 2.0 * alpha * dv;
            out[points + i] = d2(e, i) + 2.0 * alpha * d1(&vsq, i);
            out[2 * points + i] = d2(chi, i) + 2.0 * dv * dv;
        }
        out
    };
    let steps = (t / (0.2 * h * h)).ceil() as usize;
    let dt = t / steps as f64;
    for _ in 0..steps {
        let k1 = rhs(&y);
        let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + 0.5 * dt * k).collect();
        let k2 = rhs(&y2);
        let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + 0.5 * dt * k).collect();
        let k3 = rhs(&y3);
        let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + dt * k).collect();
        let k4 = rhs(&y4);
        for i in 0..y.len() {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let chi = y.split_off(2 * points);
    let e = y.split_off(points);
    (y, e, chi)
}

/// Jumps of the pair walk from `(x, y)`, `x != y`, with their rates:
/// each coordinate steps `+1` at `N^2 (1 + a)` and `-1` at `N^2 (1 - a)`,
/// except that a step onto the other coordinate is suppressed.
pub fn pair_jumps(n: usize, a: f64, x: usize, y: usize) -> Vec<((usize, usize), f64)> {
    let n2 = (n * n) as f64;
    let (up, down) = (n2 * (1.0 + a), n2 * (1.0 - a));
    let mut out = Vec::new();
    for (nx, ny, rate) in [
        ((x + 1) % n, y, up),
        (x, (y + 1) % n, up),
        ((x + n - 1) % n, y, down),
        (x, (y + n - 1) % n, down),
    ] {
        if nx != ny {
            out.push(((nx, ny), rate));
        }
    }
    out
}
