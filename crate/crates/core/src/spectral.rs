//! FFT helpers for periodic grids and fixed-order compensated sums.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Signed wavenumber of FFT bin `k` on `n` points; the Nyquist bin maps to `n/2`.
#[inline]
pub fn wavenumber(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// FFT bin holding wavenumber `m`.
#[inline]
pub fn bin(m: i64, n: usize) -> usize {
    m.rem_euclid(n as i64) as usize
}

/// Fourier coefficients `c_m = (1/n) Σ_j x_j e^{-i m θ_j}`, in FFT bin order.
pub fn forward(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let mut buf = x.to_vec();
    plan(n, false).process(&mut buf);
    let s = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= s);
    buf
}

/// Samples `x_j = Σ_m c_m e^{i m θ_j}` from coefficients in bin order.
pub fn inverse(c: &[Complex64]) -> Vec<Complex64> {
    let mut buf = c.to_vec();
    plan(c.len(), true).process(&mut buf);
    buf
}

/// Applies `c_m ↦ mult(m) c_m` along one periodic sequence. The Nyquist bin is
/// treated as the real cosine mode and only kept when `mult` is even in `m`.
pub fn apply_multiplier<F>(x: &[Complex64], mult: F) -> Vec<Complex64>
where
    F: Fn(i64) -> Complex64,
{
    let n = x.len();
    let mut c = forward(x);
    for (k, ck) in c.iter_mut().enumerate() {
        let m = wavenumber(k, n);
        if n.is_multiple_of(2) && k == n / 2 {
            let (a, b) = (mult(m), mult(-m));
            *ck *= if (a - b).norm() == 0.0 { a } else { Complex64::new(0.0, 0.0) };
        } else {
            *ck *= mult(m);
        }
    }
    inverse(&c)
}

/// Spectral derivative of complex periodic samples on `[0, 2π)`.
pub fn derivative(x: &[Complex64]) -> Vec<Complex64> {
    apply_multiplier(x, |m| Complex64::new(0.0, m as f64))
}

/// Spectral derivative of real periodic samples.
pub fn derivative_real(x: &[f64]) -> Vec<f64> {
    let z: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    derivative(&z).iter().map(|c| c.re).collect()
}

/// Spectral derivative along `axis` of a real row-major grid with `sizes`.
pub fn grid_derivative(data: &[f64], sizes: &[usize], axis: usize) -> Vec<f64> {
    match sizes.len() {
        1 => derivative_real(data),
        2 => {
            let (n1, n2) = (sizes[0], sizes[1]);
            let mut out = vec![0.0; data.len()];
            if axis == 0 {
                let mut col = vec![0.0; n1];
                for j in 0..n2 {
                    for i in 0..n1 {
                        col[i] = data[i * n2 + j];
                    }
                    let d = derivative_real(&col);
                    for i in 0..n1 {
                        out[i * n2 + j] = d[i];
                    }
                }
            } else {
                for i in 0..n1 {
                    let d = derivative_real(&data[i * n2..(i + 1) * n2]);
                    out[i * n2..(i + 1) * n2].copy_from_slice(&d);
                }
            }
            out
        }
        _ => panic!("grids are 1- or 2-dimensional"),
    }
}

/// Runs `f` on the coefficient vector (bin order) of every line along `axis`
/// of a complex row-major grid, transforming back afterwards.
pub fn grid_map_lines<F>(data: &[Complex64], sizes: &[usize], axis: usize, mut f: F) -> Vec<Complex64>
where
    F: FnMut(&mut [Complex64]),
{
    let mut run = |line: &[Complex64]| -> Vec<Complex64> {
        let mut c = forward(line);
        f(&mut c);
        inverse(&c)
    };
    match sizes.len() {
        1 => run(data),
        2 => {
            let (n1, n2) = (sizes[0], sizes[1]);
            let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
            if axis == 0 {
                let mut col = vec![Complex64::new(0.0, 0.0); n1];
                for j in 0..n2 {
                    for i in 0..n1 {
                        col[i] = data[i * n2 + j];
                    }
                    let d = run(&col);
                    for i in 0..n1 {
                        out[i * n2 + j] = d[i];
                    }
                }
            } else {
                for i in 0..n1 {
                    let d = run(&data[i * n2..(i + 1) * n2]);
                    out[i * n2..(i + 1) * n2].copy_from_slice(&d);
                }
            }
            out
        }
        _ => panic!("grids are 1- or 2-dimensional"),
    }
}

/// Applies a mode multiplier along `axis` of a complex row-major grid.
pub fn grid_multiplier<F>(data: &[Complex64], sizes: &[usize], axis: usize, mult: F) -> Vec<Complex64>
where
    F: Fn(i64) -> Complex64,
{
    grid_map_lines(data, sizes, axis, |c| {
        let n = c.len();
        for (k, ck) in c.iter_mut().enumerate() {
            let m = wavenumber(k, n);
            if n % 2 == 0 && k == n / 2 {
                let (a, b) = (mult(m), mult(-m));
                *ck *= if (a - b).norm() == 0.0 { a } else { Complex64::new(0.0, 0.0) };
            } else {
                *ck *= mult(m);
            }
        }
    })
}

/// Full `n`-dimensional coefficients of a complex row-major grid (bin order per axis).
pub fn forward_grid(data: &[Complex64], sizes: &[usize]) -> Vec<Complex64> {
    let mut out = data.to_vec();
    for axis in 0..sizes.len() {
        out = lines_forward(&out, sizes, axis);
    }
    out
}

/// Inverse of [`forward_grid`].
pub fn inverse_grid(coeffs: &[Complex64], sizes: &[usize]) -> Vec<Complex64> {
    let mut out = coeffs.to_vec();
    for axis in 0..sizes.len() {
        out = lines_apply(&out, sizes, axis, inverse);
    }
    out
}

fn lines_forward(data: &[Complex64], sizes: &[usize], axis: usize) -> Vec<Complex64> {
    lines_apply(data, sizes, axis, forward)
}

fn lines_apply(
    data: &[Complex64],
    sizes: &[usize],
    axis: usize,
    op: fn(&[Complex64]) -> Vec<Complex64>,
) -> Vec<Complex64> {
    match sizes.len() {
        1 => op(data),
        _ => {
            let (n1, n2) = (sizes[0], sizes[1]);
            let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
            if axis == 0 {
                let mut col = vec![Complex64::new(0.0, 0.0); n1];
                for j in 0..n2 {
                    for i in 0..n1 {
                        col[i] = data[i * n2 + j];
                    }
                    let d = op(&col);
                    for i in 0..n1 {
                        out[i * n2 + j] = d[i];
                    }
                }
            } else {
                for i in 0..n1 {
                    let d = op(&data[i * n2..(i + 1) * n2]);
                    out[i * n2..(i + 1) * n2].copy_from_slice(&d);
                }
            }
            out
        }
    }
}

/// Signed wavenumbers of a flat grid index.
pub fn grid_wavenumbers(index: usize, sizes: &[usize]) -> [i64; 2] {
    match sizes.len() {
        1 => [wavenumber(index, sizes[0]), 0],
        _ => [
            wavenumber(index / sizes[1], sizes[0]),
            wavenumber(index % sizes[1], sizes[1]),
        ],
    }
}

/// Evaluates the trigonometric interpolant of periodic samples at arbitrary angles.
pub fn interpolate(x: &[Complex64], thetas: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let c = forward(x);
    thetas
        .iter()
        .map(|&th| {
            let terms: Vec<Complex64> = c
                .iter()
                .enumerate()
                .map(|(k, ck)| {
                    let m = wavenumber(k, n);
                    if n.is_multiple_of(2) && k == n / 2 {
                        ck * (m as f64 * th).cos()
                    } else {
                        ck * Complex64::from_polar(1.0, m as f64 * th)
                    }
                })
                .collect();
            Complex64::new(
                neumaier_sum(terms.iter().map(|t| t.re)),
                neumaier_sum(terms.iter().map(|t| t.im)),
            )
        })
        .collect()
}

/// Trigonometric interpolant of a complex row-major grid at arbitrary angle
/// tuples (one entry per axis).
pub fn interpolate_grid(data: &[Complex64], sizes: &[usize], points: &[Vec<f64>]) -> Vec<Complex64> {
    if sizes.len() == 1 {
        let th: Vec<f64> = points.iter().map(|p| p[0]).collect();
        return interpolate(data, &th);
    }
    let (n1, n2) = (sizes[0], sizes[1]);
    let c = forward_grid(data, sizes);
    let basis = |n: usize, th: f64| -> Vec<Complex64> {
        (0..n)
            .map(|k| {
                let m = wavenumber(k, n);
                if n.is_multiple_of(2) && k == n / 2 {
                    Complex64::new((m as f64 * th).cos(), 0.0)
                } else {
                    Complex64::from_polar(1.0, m as f64 * th)
                }
            })
            .collect()
    };
    points
        .iter()
        .map(|p| {
            let (a, b) = (basis(n1, p[0]), basis(n2, p[1]));
            let mut re = Vec::with_capacity(n1);
            let mut im = Vec::with_capacity(n1);
            for i in 0..n1 {
                let row = &c[i * n2..(i + 1) * n2];
                let v: Complex64 = row.iter().zip(&b).map(|(x, y)| x * y).sum::<Complex64>() * a[i];
                re.push(v.re);
                im.push(v.im);
            }
            Complex64::new(neumaier_sum(re), neumaier_sum(im))
        })
        .collect()
}

/// Neumaier-compensated sum in iteration order.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in it {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}
