//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use cliffsurf::cft::{Grid2, MultivectorField2, MultivectorField3};
use cliffsurf::ga::{Multivector2, Multivector3};
use cliffsurf::molecule::Molecule;
use cliffsurf::{GridSpec, ScalarField3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mv3(rng: &mut impl Rng) -> Multivector3 {
    Multivector3(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
}

pub fn random_mv2(rng: &mut impl Rng) -> Multivector2 {
    Multivector2(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
}

pub fn random_field3(dims: [usize; 3], spacing: f64, seed: u64) -> MultivectorField3 {
    let grid = GridSpec::new([0.0; 3], spacing, dims).unwrap();
    let mut r = rng(seed);
    let data = (0..grid.len()).map(|_| random_mv3(&mut r)).collect();
    MultivectorField3::new(grid, data).unwrap()
}

pub fn random_field2(dims: [usize; 2], spacing: f64, seed: u64) -> MultivectorField2 {
    let grid = Grid2::new(dims, spacing).unwrap();
    let mut r = rng(seed);
    let data = (0..grid.len()).map(|_| random_mv2(&mut r)).collect();
    MultivectorField2::new(grid, data).unwrap()
}

pub fn random_scalar(dims: [usize; 3], spacing: f64, seed: u64) -> ScalarField3 {
    let grid = GridSpec::new([0.0; 3], spacing, dims).unwrap();
    let mut r = rng(seed);
    let values = (0..grid.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
    ScalarField3::new(grid, values).unwrap()
}

/// Fraction of a full turn for `k * x / n`, reduced exactly in integers.
fn turn(k: usize, x: usize, n: usize) -> f64 {
    ((k * x) % n) as f64 / n as f64
}

/// Direct-sum CFT3 with the kernel `exp(-2 pi i3 <x, u>)` built from the
/// geometric product, no channel split.
pub fn naive_cft3(field: &MultivectorField3) -> MultivectorField3 {
    let [nx, ny, nz] = field.grid.dims;
    let mut out = Vec::with_capacity(field.data.len());
    for a in 0..nx {
        for b in 0..ny {
            for c in 0..nz {
                let mut acc = Multivector3::ZERO;
                for i in 0..nx {
                    for j in 0..ny {
                        for k in 0..nz {
                            let phase = turn(a, i, nx) + turn(b, j, ny) + turn(c, k, nz);
                            let kernel = Multivector3::exp_pseudoscalar(-2.0 * PI * phase);
                            acc += field.data[(i * ny + j) * nz + k] * kernel;
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    MultivectorField3::new(field.grid, out).unwrap()
}

/// Direct-sum CFT2 with the kernel `exp(-2 pi i2 <x, u>)` on the right.
pub fn naive_cft2(field: &MultivectorField2) -> MultivectorField2 {
    let [nx, ny] = field.grid.dims;
    let mut out = Vec::with_capacity(field.data.len());
    for a in 0..nx {
        for b in 0..ny {
            let mut acc = Multivector2::ZERO;
            for i in 0..nx {
                for j in 0..ny {
                    let phase = turn(a, i, nx) + turn(b, j, ny);
                    acc += field.data[i * ny + j] * Multivector2::exp_pseudoscalar(-2.0 * PI * phase);
                }
            }
            out.push(acc);
        }
    }
    MultivectorField2::new(field.grid, out).unwrap()
}

pub fn max_abs_mv3(field: &MultivectorField3) -> f64 {
    field
        .data
        .iter()
        .flat_map(|m| m.0)
        .fold(0.0, |a: f64, b| a.max(b.abs()))
}

/// Fourth-order central difference along `axis` on a periodic grid.
pub fn fd4_derivative(field: &ScalarField3, axis: usize) -> ScalarField3 {
    let g = field.grid;
    let n = g.dims[axis];
    let h = g.spacing;
    let mut out = field.clone();
    for idx in 0..g.len() {
        let ijk = g.unravel(idx);
        let at = |off: isize| {
            let mut p = ijk;
            p[axis] = ((ijk[axis] as isize + off).rem_euclid(n as isize)) as usize;
            field.get(p[0], p[1], p[2])
        };
        out.values[idx] = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
    }
    out
}

/// Fourth-order periodic Laplacian.
pub fn fd4_laplacian(values: &[f64], g: &GridSpec) -> Vec<f64> {
    let h2 = g.spacing * g.spacing;
    let mut out = vec![0.0; values.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let ijk = g.unravel(idx);
        let mut acc = 0.0;
        for axis in 0..3 {
            let n = g.dims[axis] as isize;
            let at = |off: isize| {
                let mut p = ijk;
                p[axis] = ((ijk[axis] as isize + off).rem_euclid(n)) as usize;
                values[g.index(p[0], p[1], p[2])]
            };
            acc += (-at(2) + 16.0 * at(1) - 30.0 * at(0) + 16.0 * at(-1) - at(-2)) / (12.0 * h2);
        }
        *o = acc;
    }
    out
}

/// Classical RK4 for `du/dt = d1 * lap(u)` with a fourth-order stencil.
pub fn rk4_heat(field: &ScalarField3, d1: f64, t: f64, steps: usize) -> ScalarField3 {
    let g = field.grid;
    let dt = t / steps as f64;
    let rhs = |u: &[f64]| -> Vec<f64> { fd4_laplacian(u, &g).into_iter().map(|v| d1 * v).collect() };
    let axpy = |u: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        u.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    let mut u = field.values.clone();
    for _ in 0..steps {
        let k1 = rhs(&u);
        let k2 = rhs(&axpy(&u, &k1, dt / 2.0));
        let k3 = rhs(&axpy(&u, &k2, dt / 2.0));
        let k4 = rhs(&axpy(&u, &k3, dt));
        for i in 0..u.len() {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    ScalarField3::new(g, u).unwrap()
}

/// Atoms at (0, 0, ±1.8) and (0, 3.12, 0), radius 1.8.
pub fn three_atoms() -> Molecule {
    Molecule::from_spheres(&[
        ([0.0, 0.0, 1.8], 1.8),
        ([0.0, 0.0, -1.8], 1.8),
        ([0.0, 3.12, 0.0], 1.8),
    ])
    .unwrap()
}

pub const THREE_ATOMS_XYZR: &str = "0.0 0.0 1.8 1.8\n0.0 0.0 -1.8 1.8\n0.0 3.12 0.0 1.8\n";

/// `|x - c|` sampled on a cube of side `2 * half` centered at `c`.
pub fn distance_field(center: [f64; 3], half: f64, h: f64) -> ScalarField3 {
    let n = (2.0 * half / h).round() as usize + 1;
    let origin = center.map(|c| c - half);
    let grid = GridSpec::new(origin, h, [n; 3]).unwrap();
    ScalarField3::from_fn(grid, |p| {
        ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) + (p[2] - center[2]).powi(2)).sqrt()
    })
}
