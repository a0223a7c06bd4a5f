use crate::{Complex, Error, Result};

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    data: Vec<Complex>,
}

impl ComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        (0..n).for_each(|i| m.data[i * n + i] = Complex::new(1.0, 0.0));
        m
    }

    pub fn from_rows(n: usize, data: Vec<Complex>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::shape(format!("{} entries for a {n}x{n} matrix", data.len())));
        }
        Ok(Self { n, data })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[Complex] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> Complex {
        self.data[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex) {
        self.data[r * self.n + c] = v;
    }

    /// Adds `w · x xᴴ`.
    pub fn add_outer(&mut self, x: &[Complex], w: f64) {
        for r in 0..self.n {
            for c in 0..self.n {
                self.data[r * self.n + c] += x[r] * x[c].conj() * w;
            }
        }
    }

    pub fn trace(&self) -> Complex {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.n);
        for r in 0..self.n {
            for c in 0..self.n {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.get(r, k);
                for c in 0..n {
                    out.data[r * n + c] += a * other.get(k, c);
                }
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest |A − Aᴴ| entry.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for c in r..self.n {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }
}

/// Eigenvalues ascending; eigenvectors are the matching columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

const MAX_SWEEPS: usize = 64;

/// Cyclic complex Jacobi eigendecomposition of a Hermitian matrix.
pub fn hermitian_eig(matrix: &ComplexMatrix) -> Result<Eigen> {
    let n = matrix.size();
    let scale = matrix.frobenius().max(f64::MIN_POSITIVE);
    let dev = matrix.hermitian_deviation();
    if dev > 1e-8 * scale.max(1.0) || matrix.data().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NotHermitian(dev));
    }
    let mut a = matrix.clone();
    for r in 0..n {
        a.set(r, r, Complex::new(a.get(r, r).re, 0.0));
        for c in r + 1..n {
            let avg = (a.get(r, c) + a.get(c, r).conj()) * 0.5;
            a.set(r, c, avg);
            a.set(c, r, avg.conj());
        }
    }
    let mut v = ComplexMatrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| a.get(r, c).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                // D = diag(.., e^{-iφ} at q) makes the (p,q) entry real, then a real rotation zeroes it.
                let phase = apq / mag;
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let zeta = (aqq - app) / (2.0 * mag);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = D R: columns p and q of the rotation.
                let gpp = Complex::new(c, 0.0);
                let gpq = Complex::new(s, 0.0);
                let gqp = -phase.conj() * s;
                let gqq = phase.conj() * c;
                // A ← A G
                for r in 0..n {
                    let (xp, xq) = (a.get(r, p), a.get(r, q));
                    a.set(r, p, xp * gpp + xq * gqp);
                    a.set(r, q, xp * gpq + xq * gqq);
                    let (vp, vq) = (v.get(r, p), v.get(r, q));
                    v.set(r, p, vp * gpp + vq * gqp);
                    v.set(r, q, vp * gpq + vq * gqq);
                }
                // A ← Gᴴ A
                for col in 0..n {
                    let (xp, xq) = (a.get(p, col), a.get(q, col));
                    a.set(p, col, gpp.conj() * xp + gqp.conj() * xq);
                    a.set(q, col, gpq.conj() * xp + gqq.conj() * xq);
                }
                a.set(p, q, Complex::new(0.0, 0.0));
                a.set(q, p, Complex::new(0.0, 0.0));
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).re.total_cmp(&a.get(j, j).re));
    let values = order.iter().map(|&i| a.get(i, i).re).collect();
    let mut vectors = ComplexMatrix::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors.set(r, dst, v.get(r, src));
        }
    }
    Ok(Eigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = CounterRng::new(seed);
        let mut m = ComplexMatrix::zeros(n);
        for r in 0..n {
            m.set(r, r, c(rng.normal(), 0.0));
            for col in r + 1..n {
                let z = c(rng.normal(), rng.normal());
                m.set(r, col, z);
                m.set(col, r, z.conj());
            }
        }
        m
    }

    fn check_decomposition(m: &ComplexMatrix) {
        let e = hermitian_eig(m).unwrap();
        let n = m.size();
        let mut lambda = ComplexMatrix::zeros(n);
        (0..n).for_each(|i| lambda.set(i, i, c(e.values[i], 0.0)));
        let av = m.mul(&e.vectors);
        let vl = e.vectors.mul(&lambda);
        let diff: f64 = av.data().iter().zip(vl.data()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(diff <= 1e-9 * m.frobenius().max(1.0), "AV-VΛ {diff}");
        let vhv = e.vectors.adjoint().mul(&e.vectors);
        for r in 0..n {
            for col in 0..n {
                let want = if r == col { 1.0 } else { 0.0 };
                assert!((vhv.get(r, col) - c(want, 0.0)).norm() < 1e-10);
            }
        }
        let recon = e.vectors.mul(&lambda).mul(&e.vectors.adjoint());
        let err: f64 = recon.data().iter().zip(m.data()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 1e-8 * m.frobenius().max(1e-300));
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn identity_and_diagonal() {
        let e = hermitian_eig(&ComplexMatrix::identity(4)).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let mut d = ComplexMatrix::zeros(4);
        for (i, v) in [3.0, 1.0, 4.0, 2.0].iter().enumerate() {
            d.set(i, i, c(*v, 0.0));
        }
        let e = hermitian_eig(&d).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0, 4.0]);
        for (col, &src) in [1usize, 3, 0, 2].iter().enumerate() {
            assert_eq!(e.vectors.get(src, col).norm(), 1.0);
        }
    }

    #[test]
    fn random_matrices_decompose() {
        for seed in 0..50 {
            check_decomposition(&random_hermitian(2 + (seed as usize % 7), seed));
        }
    }

    #[test]
    fn degenerate_and_rank_one() {
        let mut m = ComplexMatrix::zeros(4);
        m.add_outer(&[c(1.0, 0.5), c(0.0, -1.0), c(2.0, 0.0), c(-0.3, 0.3)], 1.0);
        check_decomposition(&m);
        let e = hermitian_eig(&m).unwrap();
        assert!(e.values[..3].iter().all(|v| v.abs() < 1e-12));
        check_decomposition(&ComplexMatrix::zeros(3));
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = ComplexMatrix::identity(3);
        m.set(0, 1, c(1.0, 0.0));
        assert!(matches!(hermitian_eig(&m), Err(Error::NotHermitian(_))));
    }
}
