//! Dense complex helpers on top of nalgebra.
//!
//! Complex products are split into four real products so the f64 path
//! (backed by matrixmultiply) does the heavy lifting.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Serializes a complex number as `[re, im]`.
pub fn ser_c64<S: serde::Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

pub fn split(a: &CMat) -> (RMat, RMat) {
    (a.map(|z| z.re), a.map(|z| z.im))
}

pub fn join(re: &RMat, im: &RMat) -> CMat {
    CMat::from_fn(re.nrows(), re.ncols(), |i, j| C64::new(re[(i, j)], im[(i, j)]))
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let mut re = &ar * &br;
    re.gemm(-1.0, &ai, &bi, 1.0);
    let mut im = &ar * &bi;
    im.gemm(1.0, &ai, &br, 1.0);
    join(&re, &im)
}

/// Real matrix times complex vector.
pub fn rmatvec(a: &RMat, v: &CVec) -> CVec {
    let re = a * v.map(|z| z.re);
    let im = a * v.map(|z| z.im);
    CVec::from_fn(v.len(), |i, _| C64::new(re[i], im[i]))
}

/// Transposed real matrix times complex vector.
pub fn rmatvec_t(a: &RMat, v: &CVec) -> CVec {
    let re = a.tr_mul(&v.map(|z| z.re));
    let im = a.tr_mul(&v.map(|z| z.im));
    CVec::from_fn(re.len(), |i, _| C64::new(re[i], im[i]))
}

/// `a · diag(d) · a^T` for real `a` and complex `d`.
pub fn rsandwich_diag(a: &RMat, d: &[C64]) -> CMat {
    let n = a.ncols();
    let scaled_re = RMat::from_fn(a.nrows(), n, |i, k| a[(i, k)] * d[k].re);
    let scaled_im = RMat::from_fn(a.nrows(), n, |i, k| a[(i, k)] * d[k].im);
    let re = &scaled_re * a.transpose();
    let im = &scaled_im * a.transpose();
    join(&re, &im)
}

/// `a · m · a^T` for real `a` and complex `m`.
pub fn rsandwich(a: &RMat, m: &CMat) -> CMat {
    let (mr, mi) = split(m);
    let at = a.transpose();
    let re = a * (&mr * &at);
    let im = a * (&mi * &at);
    join(&re, &im)
}

/// `a^T · m · a` for real `a` and complex `m`.
pub fn rsandwich_t(a: &RMat, m: &CMat) -> CMat {
    let (mr, mi) = split(m);
    let re = a.tr_mul(&(&mr * a));
    let im = a.tr_mul(&(&mi * a));
    join(&re, &im)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_block(a: &CMat, n: usize) -> f64 {
    let n = n.min(a.nrows()).min(a.ncols());
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

fn norm1(a: &CMat) -> f64 {
    (0..a.ncols()).map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn pade13<T>(a: &DMatrix<T>, nrm: f64, mul: impl Fn(&DMatrix<T>, &DMatrix<T>) -> DMatrix<T>) -> DMatrix<T>
where
    T: nalgebra::ComplexField<RealField = f64> + Copy,
{
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let s = if nrm > THETA13 { (nrm / THETA13).log2().ceil() as i32 } else { 0 };
    let scale = T::from_real(2f64.powi(-s));
    let a = a.map(|z| z * scale);
    let id = DMatrix::<T>::identity(n, n);
    let b = &PADE13;
    let a2 = mul(&a, &a);
    let a4 = mul(&a2, &a2);
    let a6 = mul(&a4, &a2);
    let lin = |c6: f64, c4: f64, c2: f64, c0: f64| -> DMatrix<T> {
        let mut m = a6.map(|z| z * T::from_real(c6));
        m += a4.map(|z| z * T::from_real(c4));
        m += a2.map(|z| z * T::from_real(c2));
        m += id.map(|z| z * T::from_real(c0));
        m
    };
    let inner_u = mul(&a6, &lin(b[13], b[11], b[9], 0.0));
    let u = mul(&a, &(inner_u + lin(b[7], b[5], b[3], b[1])));
    let inner_v = mul(&a6, &lin(b[12], b[10], b[8], 0.0));
    let v = inner_v + lin(b[6], b[4], b[2], b[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator singular");
    for _ in 0..s {
        r = mul(&r, &r);
    }
    r
}

/// Matrix exponential by scaling and squaring around a degree-13 Padé
/// approximant.
pub fn expm(a: &CMat) -> CMat {
    pade13(a, norm1(a), matmul)
}

pub fn expm_real(a: &RMat) -> RMat {
    let nrm = (0..a.ncols()).map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    pade13(a, nrm, |x, y| x * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_rotation_generator() {
        let t = 1.3;
        let a =
            CMat::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(-t, 0.0), C64::new(t, 0.0), C64::new(0.0, 0.0)]);
        let e = expm(&a);
        assert!((e[(0, 0)].re - t.cos()).abs() < 1e-14);
        assert!((e[(1, 0)].re - t.sin()).abs() < 1e-14);
    }

    #[test]
    fn expm_large_norm_diagonal() {
        let d = [C64::new(0.0, 40.0), C64::new(-3.0, 7.0), C64::new(1.5, 0.0)];
        let a = CMat::from_diagonal(&CVec::from_row_slice(&d));
        let e = expm(&a);
        for (k, z) in d.iter().enumerate() {
            assert!((e[(k, k)] - z.exp()).norm() < 1e-12 * z.exp().norm().max(1.0));
        }
    }

    #[test]
    fn split_product_matches_naive() {
        let a = CMat::from_fn(7, 5, |i, j| C64::new(i as f64 - 0.3 * j as f64, (i * j) as f64 * 0.1));
        let b = CMat::from_fn(5, 4, |i, j| C64::new(0.2 * j as f64, i as f64 - 1.0));
        let d = matmul(&a, &b) - &a * &b;
        assert!(max_abs(&d) < 1e-12);
    }
}
