//! Clifford algebras R_2 and R_3 over a Euclidean metric.
//!
//! Blades are stored in a fixed canonical order:
//!
//! * R_2: `{1, e1, e2, e12}`
//! * R_3: `{1, e1, e2, e3, e12, e23, e31, e123}`
//!
//! Internally every blade is a bitmask (`e1 = 0b001`, `e2 = 0b010`,
//! `e3 = 0b100`) whose natural form is the ascending product of its
//! vectors. The R_3 bivector `e31` is the one canonical blade that is not
//! ascending: `e31 = e3 e1 = -e1 e3`, so it carries a sign of `-1`
//! relative to its bitmask. The product tables below fold that sign in.

use std::ops::{Add, AddAssign, BitXor, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Number of transpositions needed to bring `a · b` into ascending order.
const fn reorder_sign(a: u8, b: u8) -> f64 {
    let mut swaps = 0u32;
    let mut shifted = a >> 1;
    while shifted != 0 {
        swaps += (shifted & b).count_ones();
        shifted >>= 1;
    }
    if swaps.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

struct Basis<const N: usize> {
    mask: [u8; N],
    sign: [f64; N],
}

const BASIS2: Basis<4> = Basis {
    mask: [0b00, 0b01, 0b10, 0b11],
    sign: [1.0; 4],
};

const BASIS3: Basis<8> = Basis {
    mask: [0b000, 0b001, 0b010, 0b100, 0b011, 0b110, 0b101, 0b111],
    sign: [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0, 1.0],
};

/// Entry `[i][j]` is `(k, s)` with `blade_i * blade_j = s * blade_k`.
type ProductTable<const N: usize> = [[(usize, f64); N]; N];

const fn product_table<const N: usize>(basis: &Basis<N>) -> ProductTable<N> {
    let mut table = [[(0usize, 0.0f64); N]; N];
    let mut i = 0;
    while i < N {
        let mut j = 0;
        while j < N {
            let mask = basis.mask[i] ^ basis.mask[j];
            let mut k = 0;
            while basis.mask[k] != mask {
                k += 1;
            }
            let s = basis.sign[i]
                * basis.sign[j]
                * basis.sign[k]
                * reorder_sign(basis.mask[i], basis.mask[j]);
            table[i][j] = (k, s);
            j += 1;
        }
        i += 1;
    }
    table
}

const fn disjoint_table<const N: usize>(basis: &Basis<N>) -> [[bool; N]; N] {
    let mut table = [[false; N]; N];
    let mut i = 0;
    while i < N {
        let mut j = 0;
        while j < N {
            table[i][j] = basis.mask[i] & basis.mask[j] == 0;
            j += 1;
        }
        i += 1;
    }
    table
}

static PRODUCT2: ProductTable<4> = product_table(&BASIS2);
static PRODUCT3: ProductTable<8> = product_table(&BASIS3);
static DISJOINT2: [[bool; 4]; 4] = disjoint_table(&BASIS2);
static DISJOINT3: [[bool; 8]; 8] = disjoint_table(&BASIS3);

macro_rules! multivector_common {
    ($ty:ident, $n:expr, $product:ident, $disjoint:ident, $grades:expr) => {
        impl $ty {
            pub const ZERO: Self = Self([0.0; $n]);

            pub const fn from_coefficients(coefficients: [f64; $n]) -> Self {
                Self(coefficients)
            }

            pub const fn scalar(value: f64) -> Self {
                let mut c = [0.0; $n];
                c[0] = value;
                Self(c)
            }

            /// Unit basis blade at canonical position `index`.
            pub fn blade(index: usize) -> Self {
                let mut c = [0.0; $n];
                c[index] = 1.0;
                Self(c)
            }

            pub fn coefficients(&self) -> &[f64; $n] {
                &self.0
            }

            pub fn geometric_product(&self, other: &Self) -> Self {
                let mut out = [0.0; $n];
                for (i, &a) in self.0.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    for (j, &b) in other.0.iter().enumerate() {
                        let (k, s) = $product[i][j];
                        out[k] += s * a * b;
                    }
                }
                Self(out)
            }

            /// Outer product. Blade pairs sharing a basis vector vanish.
            pub fn wedge(&self, other: &Self) -> Self {
                let mut out = [0.0; $n];
                for (i, &a) in self.0.iter().enumerate() {
                    for (j, &b) in other.0.iter().enumerate() {
                        if $disjoint[i][j] {
                            let (k, s) = $product[i][j];
                            out[k] += s * a * b;
                        }
                    }
                }
                Self(out)
            }

            /// Grade-0 part of the geometric product; the dot product on vectors.
            pub fn scalar_product(&self, other: &Self) -> f64 {
                self.geometric_product(other).0[0]
            }

            /// Keeps only the blades of grade `grade`.
            pub fn grade(&self, grade: usize) -> Self {
                let mut out = Self::ZERO;
                for (i, g) in $grades.iter().enumerate() {
                    if *g == grade {
                        out.0[i] = self.0[i];
                    }
                }
                out
            }

            pub fn norm_squared(&self) -> f64 {
                self.0.iter().map(|c| c * c).sum()
            }

            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                self.0
                    .iter()
                    .zip(other.0.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            }
        }

        impl Index<usize> for $ty {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl IndexMut<usize> for $ty {
            fn index_mut(&mut self, i: usize) -> &mut f64 {
                &mut self.0[i]
            }
        }

        impl Add for $ty {
            type Output = Self;
            fn add(mut self, rhs: Self) -> Self {
                self += rhs;
                self
            }
        }

        impl AddAssign for $ty {
            fn add_assign(&mut self, rhs: Self) {
                for (a, b) in self.0.iter_mut().zip(rhs.0) {
                    *a += b;
                }
            }
        }

        impl Sub for $ty {
            type Output = Self;
            fn sub(mut self, rhs: Self) -> Self {
                for (a, b) in self.0.iter_mut().zip(rhs.0) {
                    *a -= b;
                }
                self
            }
        }

        impl Neg for $ty {
            type Output = Self;
            fn neg(mut self) -> Self {
                for a in self.0.iter_mut() {
                    *a = -*a;
                }
                self
            }
        }

        impl Mul for $ty {
            type Output = Self;
            fn mul(self, rhs: Self) -> Self {
                self.geometric_product(&rhs)
            }
        }

        impl Mul<f64> for $ty {
            type Output = Self;
            fn mul(mut self, rhs: f64) -> Self {
                for a in self.0.iter_mut() {
                    *a *= rhs;
                }
                self
            }
        }

        impl Mul<$ty> for f64 {
            type Output = $ty;
            fn mul(self, rhs: $ty) -> $ty {
                rhs * self
            }
        }

        impl BitXor for $ty {
            type Output = Self;
            fn bitxor(self, rhs: Self) -> Self {
                self.wedge(&rhs)
            }
        }
    };
}

/// Element of R_2, coefficients on `{1, e1, e2, e12}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Multivector2(pub [f64; 4]);

/// Element of R_3, coefficients on `{1, e1, e2, e3, e12, e23, e31, e123}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Multivector3(pub [f64; 8]);

multivector_common!(Multivector2, 4, PRODUCT2, DISJOINT2, [0usize, 1, 1, 2]);
multivector_common!(
    Multivector3,
    8,
    PRODUCT3,
    DISJOINT3,
    [0usize, 1, 1, 1, 2, 2, 2, 3]
);

impl Multivector2 {
    pub const E1: usize = 1;
    pub const E2: usize = 2;
    pub const E12: usize = 3;

    /// The pseudoscalar `i_2 = e1 e2`.
    pub fn i2() -> Self {
        Self::blade(Self::E12)
    }

    pub fn vector(x: f64, y: f64) -> Self {
        Self([0.0, x, y, 0.0])
    }

    /// `cos(gamma) + i_2 sin(gamma)`.
    pub fn exp_pseudoscalar(gamma: f64) -> Self {
        let (s, c) = gamma.sin_cos();
        Self([c, 0.0, 0.0, s])
    }

    /// Splits into the part commuting with `i_2` (scalar + bivector) and the
    /// part anticommuting with it (vector).
    pub fn split_by_pseudoscalar(&self) -> (Self, Self) {
        let c = self.0;
        (Self([c[0], 0.0, 0.0, c[3]]), Self([0.0, c[1], c[2], 0.0]))
    }
}

impl Multivector3 {
    pub const E1: usize = 1;
    pub const E2: usize = 2;
    pub const E3: usize = 3;
    pub const E12: usize = 4;
    pub const E23: usize = 5;
    pub const E31: usize = 6;
    pub const E123: usize = 7;

    /// The pseudoscalar `i_3 = e1 e2 e3`.
    pub fn i3() -> Self {
        Self::blade(Self::E123)
    }

    pub fn vector(x: f64, y: f64, z: f64) -> Self {
        Self([0.0, x, y, z, 0.0, 0.0, 0.0, 0.0])
    }

    /// `cos(gamma) + i_3 sin(gamma)`.
    pub fn exp_pseudoscalar(gamma: f64) -> Self {
        let (s, c) = gamma.sin_cos();
        Self([c, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, s])
    }
}

/// Either algebra, for APIs parameterised by dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Multivector {
    Two(Multivector2),
    Three(Multivector3),
}

/// Square of the unit pseudoscalar, computed from the product table.
pub fn pseudoscalar_square(dim: usize) -> Result<f64> {
    match dim {
        2 => Ok((Multivector2::i2() * Multivector2::i2())[0]),
        3 => Ok((Multivector3::i3() * Multivector3::i3())[0]),
        _ => Err(Error::UnsupportedDimension(dim)),
    }
}

pub fn exp_pseudoscalar(gamma: f64, dim: usize) -> Result<Multivector> {
    match dim {
        2 => Ok(Multivector::Two(Multivector2::exp_pseudoscalar(gamma))),
        3 => Ok(Multivector::Three(Multivector3::exp_pseudoscalar(gamma))),
        _ => Err(Error::UnsupportedDimension(dim)),
    }
}
