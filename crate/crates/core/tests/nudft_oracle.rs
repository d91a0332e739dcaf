mod common;

use std::f64::consts::PI;

use common::*;
use ndarray::Array2;
use num_complex::Complex64;
use relflex_core::nudft::*;
use relflex_core::{Error, PointCloud};

/// Independent double loop written against the defining formula, using `exp` of a
/// complex argument instead of the library's `sin_cos` fold.
fn oracle_forward(points: &Array2<f64>, u: &[f64], freqs: &Array2<f64>) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); freqs.nrows()];
    for s in 0..freqs.nrows() {
        for l in 0..points.nrows() {
            let mut dot = 0.0;
            for k in 0..points.ncols() {
                dot += freqs[[s, k]] * points[[l, k]];
            }
            out[s] += u[l] * Complex64::new(0.0, -2.0 * PI * dot).exp();
        }
    }
    out
}

/// Textbook recursive radix-2 DFT, `X_k = sum_j x_j exp(-2 pi i jk / N)`.
fn radix2(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    if n == 1 {
        return x.to_vec();
    }
    let even: Vec<_> = x.iter().step_by(2).copied().collect();
    let odd: Vec<_> = x.iter().skip(1).step_by(2).copied().collect();
    let (e, o) = (radix2(&even), radix2(&odd));
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n / 2 {
        let t = Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64) * o[k];
        out[k] = e[k] + t;
        out[k + n / 2] = e[k] - t;
    }
    out
}

fn dot_c(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

#[test]
fn forward_direct_matches_independent_loop() {
    let mut r = rng(11);
    let cloud = cloud(&mut r, 64, 3);
    let freqs = uniform(&mut r, 32, 3, -6.0, 6.0);
    let u = vector(&mut r, 64);
    let got = nudft_forward_direct(&cloud, &u, &freqs).unwrap();
    let want = oracle_forward(cloud.coords(), &u, &freqs);
    assert!(rel_err_c(&got, &want) <= 1e-13, "{}", rel_err_c(&got, &want));
}

#[test]
fn direct_transforms_are_adjoint() {
    for seed in 0..5 {
        let mut r = rng(100 + seed);
        let cloud = cloud(&mut r, 50, 2);
        let freqs = uniform(&mut r, 30, 2, -4.0, 4.0);
        let u = vector(&mut r, 50);
        let c = cvector(&mut r, 30);
        let uc: Vec<Complex64> = u.iter().map(|&v| v.into()).collect();
        let lhs = dot_c(&nudft_forward_direct(&cloud, &u, &freqs).unwrap(), &c);
        let rhs = dot_c(&uc, &nudft_adjoint_direct(&cloud, &c, &freqs).unwrap());
        assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm(), "{lhs} vs {rhs}");
    }
}

#[test]
fn direct_forward_is_linear() {
    let mut r = rng(7);
    let cloud = cloud(&mut r, 40, 1);
    let freqs = uniform(&mut r, 25, 1, -10.0, 10.0);
    let (u, v) = (vector(&mut r, 40), vector(&mut r, 40));
    let (alpha, beta) = (1.7, -0.3);
    let mix: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + beta * b).collect();
    let fu = nudft_forward_direct(&cloud, &u, &freqs).unwrap();
    let fv = nudft_forward_direct(&cloud, &v, &freqs).unwrap();
    let want: Vec<Complex64> = fu.iter().zip(&fv).map(|(a, b)| alpha * a + beta * b).collect();
    let got = nudft_forward_direct(&cloud, &mix, &freqs).unwrap();
    assert!(rel_err_c(&got, &want) <= 1e-12);
}

#[test]
fn fast_forward_1d_large() {
    let mut r = rng(3);
    let cloud = cloud(&mut r, 4096, 1);
    let freqs = uniform(&mut r, 4096, 1, -2048.0, 2048.0);
    let u = vector(&mut r, 4096);
    let acc = NufftAccuracy::new(1e-6).unwrap();
    let got = nudft_forward_fast(&cloud, &u, &freqs, &acc).unwrap();
    let want = nudft_forward_direct(&cloud, &u, &freqs).unwrap();
    let err = rel_err_c(&got, &want);
    assert!(err <= 1e-5, "{err}");
}

#[test]
fn fast_adjoint_3d_large() {
    let mut r = rng(4);
    let cloud = cloud(&mut r, 4096, 3);
    let freqs = uniform(&mut r, 4096, 3, -8.0, 8.0);
    let b = cvector(&mut r, 4096);
    let acc = NufftAccuracy::new(1e-6).unwrap();
    let got = nudft_adjoint_fast(&cloud, &b, &freqs, &acc).unwrap();
    let want = nudft_adjoint_direct(&cloud, &b, &freqs).unwrap();
    let err = rel_err_c(&got, &want);
    assert!(err <= 1e-5, "{err}");
}

#[test]
fn uniform_grid_reduces_to_dft() {
    let n = 256;
    let points = Array2::from_shape_fn((n, 1), |(j, _)| j as f64 / n as f64);
    let freqs = Array2::from_shape_fn((n, 1), |(k, _)| k as f64);
    let cloud = PointCloud::new(points).unwrap();
    let mut r = rng(21);
    let u = vector(&mut r, n);
    let want = radix2(&u.iter().map(|&v| v.into()).collect::<Vec<_>>());

    let tight = NufftAccuracy::new(1e-12).unwrap();
    let got = nudft_forward_fast(&cloud, &u, &freqs, &tight).unwrap();
    let scale = want.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let max_abs = got.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(max_abs <= 1e-10 * scale.max(1.0), "{max_abs}");

    for eps in [1e-4, 1e-6] {
        let acc = NufftAccuracy::new(eps).unwrap();
        let got = nudft_forward_fast(&cloud, &u, &freqs, &acc).unwrap();
        assert!(rel_err_c(&got, &want) <= 10.0 * eps);
    }
}

#[test]
fn adjoint_is_conjugate_of_negated_forward() {
    let mut r = rng(31);
    let cloud = cloud(&mut r, 300, 2);
    let freqs = uniform(&mut r, 200, 2, -5.0, 5.0);
    let b = cvector(&mut r, 200);
    let acc = NufftAccuracy::new(1e-8).unwrap().forced();
    let conj_b: Vec<Complex64> = b.iter().map(|v| v.conj()).collect();
    let lhs = nudft_adjoint_fast(&cloud, &conj_b, &freqs, &acc).unwrap();
    let swapped = type3_fast(freqs.view(), &b, cloud.coords().view(), Sign::Negative, &acc, 200).unwrap();
    let rhs: Vec<Complex64> = swapped.iter().map(|v| v.conj()).collect();
    assert!(rel_err_c(&lhs, &rhs) <= 1e-10);
}

#[test]
fn fast_path_is_linear_within_contract() {
    let mut r = rng(41);
    let cloud = cloud(&mut r, 500, 3);
    let freqs = uniform(&mut r, 400, 3, -3.0, 3.0);
    let (u, v) = (vector(&mut r, 500), vector(&mut r, 500));
    let acc = NufftAccuracy::new(1e-6).unwrap();
    let mix: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
    let fu = nudft_forward_fast(&cloud, &u, &freqs, &acc).unwrap();
    let fv = nudft_forward_fast(&cloud, &v, &freqs, &acc).unwrap();
    let want: Vec<Complex64> = fu.iter().zip(&fv).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
    let got = nudft_forward_fast(&cloud, &mix, &freqs, &acc).unwrap();
    assert!(rel_err_c(&got, &want) <= 10.0 * acc.epsilon());
}

#[test]
fn fast_path_is_deterministic() {
    let mut r = rng(51);
    let cloud = cloud(&mut r, 700, 2);
    let freqs = uniform(&mut r, 300, 2, -9.0, 9.0);
    let u = vector(&mut r, 700);
    let acc = NufftAccuracy::new(1e-5).unwrap();
    let a = nudft_forward_fast(&cloud, &u, &freqs, &acc).unwrap();
    let b = nudft_forward_fast(&cloud, &u, &freqs, &acc).unwrap();
    assert_eq!(a, b);
}

#[test]
fn oversized_grid_is_an_error() {
    let mut r = rng(61);
    let cloud = cloud(&mut r, 100, 3);
    let freqs = uniform(&mut r, 100, 3, -50.0, 50.0);
    let acc = NufftAccuracy::new(1e-6).unwrap().forced().with_max_grid_cells(1 << 16);
    let err = nudft_forward_fast(&cloud, &vector(&mut r, 100), &freqs, &acc).unwrap_err();
    assert!(matches!(err, Error::GridTooLarge { .. }));
    assert!(err.to_string().contains("grid too large"));
}

#[test]
fn few_frequencies_fall_back_to_direct_unless_forced() {
    let mut r = rng(71);
    let cloud = cloud(&mut r, 80, 3);
    let freqs = uniform(&mut r, 16, 3, -2.0, 2.0);
    let u = vector(&mut r, 80);
    let acc = NufftAccuracy::new(1e-3).unwrap();
    let direct = nudft_forward_direct(&cloud, &u, &freqs).unwrap();
    assert_eq!(nudft_forward_fast(&cloud, &u, &freqs, &acc).unwrap(), direct);
    let gridded = nudft_forward_fast(&cloud, &u, &freqs, &acc.forced()).unwrap();
    assert_ne!(gridded, direct);
    assert!(rel_err_c(&gridded, &direct) <= 1e-2);
}

#[test]
fn degenerate_axes_are_handled() {
    // All points share a coordinate, and all frequencies share another.
    let mut r = rng(81);
    let mut pts = uniform(&mut r, 200, 3, 0.0, 1.0);
    pts.column_mut(1).fill(0.4);
    let mut freqs = uniform(&mut r, 150, 3, -4.0, 4.0);
    freqs.column_mut(2).fill(1.25);
    let cloud = PointCloud::new(pts).unwrap();
    let u = vector(&mut r, 200);
    let acc = NufftAccuracy::new(1e-7).unwrap();
    let got = nudft_forward_fast(&cloud, &u, &freqs, &acc).unwrap();
    let want = nudft_forward_direct(&cloud, &u, &freqs).unwrap();
    assert!(rel_err_c(&got, &want) <= 1e-6);
}
