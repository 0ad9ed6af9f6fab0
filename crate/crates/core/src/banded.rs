//! Hermitian banded LDLᴴ factorization without pivoting.

use num_complex::Complex64;

/// Lower band of a Hermitian matrix: entry (r, c) with `r − bw ≤ c ≤ r`.
#[derive(Debug, Clone)]
pub struct HermitianBand {
    n: usize,
    bw: usize,
    data: Vec<Complex64>,
}

impl HermitianBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![Complex64::new(0.0, 0.0); n * (bw + 1)],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    fn index(&self, r: usize, c: usize) -> usize {
        debug_assert!(c <= r && r - c <= self.bw);
        r * (self.bw + 1) + c + self.bw - r
    }

    /// Adds `v` at (r, c); entries above the diagonal are stored as their conjugate mirror.
    pub fn add(&mut self, r: usize, c: usize, v: Complex64) {
        let (r, c, v) = if c <= r { (r, c, v) } else { (c, r, v.conj()) };
        assert!(
            r - c <= self.bw,
            "entry ({r}, {c}) outside bandwidth {}",
            self.bw
        );
        let i = self.index(r, c);
        self.data[i] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let (r, c, conj) = if c <= r { (r, c, false) } else { (c, r, true) };
        if r - c > self.bw {
            return Complex64::new(0.0, 0.0);
        }
        let v = self.data[self.index(r, c)];
        if conj {
            v.conj()
        } else {
            v
        }
    }

    /// y = A x.
    pub fn mul(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        for r in 0..self.n {
            let lo = r.saturating_sub(self.bw);
            let row = &self.data[self.index(r, lo)..=self.index(r, r)];
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, a) in row.iter().enumerate() {
                let c = lo + k;
                acc += a * x[c];
                if c != r {
                    y[c] += a.conj() * x[r];
                }
            }
            y[r] += acc;
        }
        y
    }

    /// Factors in place; fails on a pivot below `tiny` in magnitude.
    pub fn factor(mut self, tiny: f64) -> Result<BandLdl, usize> {
        let (n, bw) = (self.n, self.bw);
        let mut d = vec![0.0f64; n];
        let mut scaled = vec![Complex64::new(0.0, 0.0); bw + 1];
        let mut negative = 0;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..i {
                let klo = lo.max(j.saturating_sub(bw));
                let mut s = self.data[self.index(i, j)];
                let rj = self.index(j, klo);
                let len = j - klo;
                for k in 0..len {
                    s -= scaled[klo - lo + k] * self.data[rj + k].conj();
                }
                let l = s / d[j];
                let idx = self.index(i, j);
                self.data[idx] = l;
                scaled[j - lo] = l * d[j];
            }
            let mut di = self.data[self.index(i, i)].re;
            for j in lo..i {
                di -= (scaled[j - lo] * self.data[self.index(i, j)].conj()).re;
            }
            if !(di.abs() > tiny) {
                return Err(i);
            }
            if di < 0.0 {
                negative += 1;
            }
            d[i] = di;
        }
        Ok(BandLdl {
            band: self,
            d,
            negative,
        })
    }
}

/// `A = L D Lᴴ` with unit lower-triangular banded L and real diagonal D.
#[derive(Debug, Clone)]
pub struct BandLdl {
    band: HermitianBand,
    d: Vec<f64>,
    negative: usize,
}

impl BandLdl {
    /// Number of negative pivots, equal to the number of negative eigenvalues.
    pub fn negative_pivots(&self) -> usize {
        self.negative
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let (n, bw) = (self.band.n, self.band.bw);
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let start = self.band.index(i, lo);
            let mut s = x[i];
            for (k, l) in self.band.data[start..start + (i - lo)].iter().enumerate() {
                s -= l * x[lo + k];
            }
            x[i] = s;
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for i in (0..n).rev() {
            let lo = i.saturating_sub(bw);
            let start = self.band.index(i, lo);
            let xi = x[i];
            for (k, l) in self.band.data[start..start + (i - lo)].iter().enumerate() {
                x[lo + k] -= l.conj() * xi;
            }
        }
        x
    }
}
