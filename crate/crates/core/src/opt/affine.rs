//! Affine expressions over real decision variables and Hermitian matrix
//! variables built from them.
//!
//! An `n × n` Hermitian variable `X` uses `n²` real parameters: the diagonal,
//! then the real and imaginary parts of each strictly-upper entry. Any real
//! linear functional of `X` has the form `Tr(G X)` with `G` Hermitian, which is
//! how entries of congruences and matrix-vector products are expressed.

use std::f64::consts::SQRT_2;

use crate::linalg::{self, c, CMat, CVec};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl AffineExpr {
    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn var(index: usize) -> Self {
        Self {
            terms: vec![(index, 1.0)],
            constant: 0.0,
        }
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn plus_term(mut self, index: usize, coefficient: f64) -> Self {
        self.add_term(index, coefficient);
        self
    }

    pub fn plus_constant(mut self, value: f64) -> Self {
        self.constant += value;
        self
    }

    pub fn scaled(mut self, k: f64) -> Self {
        self.scale(k);
        self
    }

    pub fn add_term(&mut self, index: usize, coefficient: f64) {
        if coefficient != 0.0 {
            self.terms.push((index, coefficient));
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
    }

    /// `self += k·other`
    pub fn add_scaled(&mut self, other: &AffineExpr, k: f64) {
        if k == 0.0 {
            return;
        }
        self.terms.extend(other.terms.iter().map(|&(i, v)| (i, v * k)));
        self.constant += k * other.constant;
    }

    /// Merges repeated variables and drops zero coefficients.
    pub fn compact(mut self) -> Self {
        self.terms.sort_unstable_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (i, v) in self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => out.push((i, v)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        self.terms = out;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, v)| v * x[i]).sum::<f64>() + self.constant
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }
}

/// An `n × n` Hermitian matrix variable stored at `offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermVar {
    pub offset: usize,
    pub n: usize,
}

impl HermVar {
    pub fn len(n: usize) -> usize {
        n * n
    }

    /// Parameter indices of the real and imaginary parts of entry `(i, j)`,
    /// `i < j`.
    fn off_diagonal(&self, i: usize, j: usize) -> (usize, usize) {
        debug_assert!(i < j);
        // Pairs are enumerated row by row: (0,1), (0,2), …, (1,2), …
        let before = i * self.n - i * (i + 1) / 2;
        let pair = before + (j - i - 1);
        let base = self.offset + self.n + 2 * pair;
        (base, base + 1)
    }

    /// `Tr(G X)` for Hermitian `G`; the anti-Hermitian part of `G` is ignored.
    pub fn trace_form(&self, g: &CMat) -> AffineExpr {
        let mut e = AffineExpr::default();
        self.accumulate_trace_form(g, 1.0, &mut e);
        e
    }

    /// `acc += k·Re Tr(G X)`.
    pub fn accumulate_trace_form(&self, g: &CMat, k: f64, acc: &mut AffineExpr) {
        let n = self.n;
        for i in 0..n {
            acc.add_term(self.offset + i, k * g[(i, i)].re);
        }
        for i in 0..n {
            for j in i + 1..n {
                // G_ji X_ij + G_ij X_ji = 2 Re(h X_ij), h = (G_ji + conj G_ij)/2
                let h = (g[(j, i)] + g[(i, j)].conj()) * 0.5;
                let (re, im) = self.off_diagonal(i, j);
                acc.add_term(re, 2.0 * k * h.re);
                acc.add_term(im, -2.0 * k * h.im);
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> CMat {
        let n = self.n;
        let mut m = linalg::zeros(n);
        for i in 0..n {
            m[(i, i)] = c(x[self.offset + i], 0.0);
            for j in i + 1..n {
                let (re, im) = self.off_diagonal(i, j);
                m[(i, j)] = c(x[re], x[im]);
                m[(j, i)] = c(x[re], -x[im]);
            }
        }
        m
    }

    /// Packed real embedding of `X`, for a PSD constraint on `X` itself.
    pub fn packed_embedding(&self) -> Vec<AffineExpr> {
        let n = self.n;
        let entries = HermEntries::from_fn(n, |i, j| {
            if i == j {
                (AffineExpr::var(self.offset + i), AffineExpr::default())
            } else {
                let (re, im) = self.off_diagonal(i, j);
                (AffineExpr::var(re), AffineExpr::var(im))
            }
        });
        entries.packed_embedding()
    }
}

/// A real-weighted sum `Σ c_m X_m` of Hermitian variables.
#[derive(Debug, Clone)]
pub struct HermCombo {
    pub n: usize,
    pub parts: Vec<(HermVar, f64)>,
}

impl HermCombo {
    pub fn new(n: usize) -> Self {
        Self { n, parts: Vec::new() }
    }

    pub fn with(mut self, var: HermVar, coefficient: f64) -> Self {
        debug_assert_eq!(var.n, self.n);
        if coefficient != 0.0 {
            self.parts.push((var, coefficient));
        }
        self
    }

    /// `Re Tr(G Σ c_m X_m)`.
    pub fn trace_form(&self, g: &CMat) -> AffineExpr {
        let mut e = AffineExpr::default();
        for &(v, k) in &self.parts {
            v.accumulate_trace_form(g, k, &mut e);
        }
        e.compact()
    }

    /// Real and imaginary parts of `Tr(G X)` for a general complex `G`.
    fn complex_trace_form(&self, g: &CMat) -> (AffineExpr, AffineExpr) {
        let re = self.trace_form(&linalg::hermitian_part(g));
        let im = self.trace_form(&linalg::hermitian_part(&(g * c(0.0, -1.0))));
        (re, im)
    }

    /// Entries of `S X S` on and above the diagonal, for Hermitian `S`.
    pub fn congruence(&self, s: &CMat) -> HermEntries {
        let n = self.n;
        HermEntries::from_fn(n, |p, q| {
            // (S X S)_pq = Σ_ab S_pa X_ab S_bq = Tr(G X), G = S[:, q] S[p, :]
            let g = s.column(q) * s.row(p);
            let (re, im) = self.complex_trace_form(&g);
            if p == q {
                (re, AffineExpr::default())
            } else {
                (re, im)
            }
        })
    }

    /// `S X h` as pairs of real and imaginary parts.
    pub fn mul_vec(&self, s: &CMat, h: &CVec) -> Vec<(AffineExpr, AffineExpr)> {
        (0..self.n)
            .map(|p| {
                // (S X h)_p = Σ_ab S_pa X_ab h_b = Tr(G X), G = h S[p, :]
                let g = h * s.row(p);
                self.complex_trace_form(&g)
            })
            .collect()
    }

    /// `hᴴ X h`.
    pub fn quad_form(&self, h: &CVec) -> AffineExpr {
        self.trace_form(&linalg::outer(h))
    }

    pub fn value(&self, x: &[f64]) -> CMat {
        self.parts
            .iter()
            .fold(linalg::zeros(self.n), |acc, (v, k)| acc + v.value(x).scale(*k))
    }
}

/// Upper-triangle entries `(re, im)` of an affine Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEntries {
    pub n: usize,
    upper: Vec<(AffineExpr, AffineExpr)>,
}

impl HermEntries {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> (AffineExpr, AffineExpr)) -> Self {
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for j in 0..n {
            for i in 0..=j {
                upper.push(f(i, j));
            }
        }
        Self { n, upper }
    }

    /// Entry `(i, j)`, `i ≤ j`.
    pub fn get(&self, i: usize, j: usize) -> &(AffineExpr, AffineExpr) {
        &self.upper[j * (j + 1) / 2 + i]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut (AffineExpr, AffineExpr) {
        &mut self.upper[j * (j + 1) / 2 + i]
    }

    pub fn trace(&self) -> AffineExpr {
        let mut t = AffineExpr::default();
        for i in 0..self.n {
            t.add_scaled(&self.get(i, i).0, 1.0);
        }
        t.compact()
    }

    /// Adds `v` (an affine scalar) to every diagonal entry.
    pub fn add_to_diagonal(&mut self, v: &AffineExpr) {
        for i in 0..self.n {
            self.get_mut(i, i).0.add_scaled(v, 1.0);
        }
    }

    /// Entries in the order used for a Frobenius norm: the diagonal, then
    /// `√2·Re` and `√2·Im` of each strictly-upper entry.
    pub fn frobenius_rows(&self) -> Vec<AffineExpr> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            out.push(self.get(i, i).0.clone());
        }
        for j in 0..n {
            for i in 0..j {
                let (re, im) = self.get(i, j);
                out.push(re.clone().scaled(SQRT_2));
                out.push(im.clone().scaled(SQRT_2));
            }
        }
        out
    }

    /// Packed upper triangle of the real embedding `[[A, −B], [B, A]]` of
    /// `A + jB`.
    pub fn packed_embedding(&self) -> Vec<AffineExpr> {
        let n = self.n;
        let m = 2 * n;
        let entry = |r: usize, col: usize| -> AffineExpr {
            // (r, col) with r ≤ col in the 2n × 2n real matrix.
            let (ri, rb) = (r % n, r / n);
            let (ci, cb) = (col % n, col / n);
            let (lo, hi, flipped) = if ri <= ci { (ri, ci, false) } else { (ci, ri, true) };
            let (re, im) = self.get(lo, hi);
            match (rb, cb) {
                (0, 0) | (1, 1) => re.clone(),
                // top-right block is −B; B_{ri,ci} = Im X_{ri,ci}
                (0, 1) => {
                    let b = if flipped { im.clone().scaled(-1.0) } else { im.clone() };
                    b.scaled(-1.0)
                }
                _ => unreachable!("r ≤ col never lands in the lower-left block"),
            }
        };
        let mut out = Vec::with_capacity(m * (m + 1) / 2);
        for col in 0..m {
            for r in 0..=col {
                let e = entry(r, col);
                out.push(if r == col { e } else { e.scaled(SQRT_2) });
            }
        }
        out
    }

    pub fn value(&self, x: &[f64]) -> CMat {
        let n = self.n;
        let mut m = linalg::zeros(n);
        for j in 0..n {
            for i in 0..=j {
                let (re, im) = self.get(i, j);
                m[(i, j)] = c(re.eval(x), im.eval(x));
                m[(j, i)] = m[(i, j)].conj();
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opt::conic::unpack_symmetric;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_herm(n: usize, rng: &mut impl Rng) -> CMat {
        let a = CMat::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        linalg::hermitian_part(&a)
    }

    fn random_x(len: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..len).map(|_| rng.random::<f64>() - 0.5).collect()
    }

    #[test]
    fn compact_merges_terms() {
        let e = AffineExpr::var(2).plus_term(1, 3.0).plus_term(2, -1.0).plus_constant(4.0).compact();
        assert_eq!(e.terms(), &[(1, 3.0)]);
        assert_eq!(e.constant_term(), 4.0);
    }

    #[test]
    fn parameterization_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = HermVar { offset: 3, n: 4 };
        let x = random_x(3 + 16, &mut rng);
        let m = v.value(&x);
        assert!(linalg::is_hermitian(&m, 0.0));
        // every parameter appears exactly once
        let mut seen = vec![0; 19];
        for i in 0..4 {
            seen[3 + i] += 1;
            for j in i + 1..4 {
                let (re, im) = v.off_diagonal(i, j);
                seen[re] += 1;
                seen[im] += 1;
            }
        }
        assert_eq!(&seen[3..], &[1; 16]);
    }

    #[test]
    fn trace_form_matches_numeric_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = HermVar { offset: 0, n: 5 };
        for _ in 0..10 {
            let x = random_x(25, &mut rng);
            let g = random_herm(5, &mut rng);
            let expected = (&g * v.value(&x)).trace().re;
            assert!((v.trace_form(&g).eval(&x) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn combo_congruence_product_and_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4;
        let a = HermVar { offset: 0, n };
        let b = HermVar { offset: n * n, n };
        let combo = HermCombo::new(n).with(a, 2.5).with(b, -1.0);
        let x = random_x(2 * n * n, &mut rng);
        let xm = a.value(&x).scale(2.5) - b.value(&x);
        assert!((combo.value(&x) - &xm).camax() < 1e-14);

        let s = random_herm(n, &mut rng);
        let h = CVec::from_fn(n, |_, _| c(rng.random::<f64>(), rng.random::<f64>()));

        let cong = combo.congruence(&s).value(&x);
        assert!((cong - &s * &xm * &s).camax() < 1e-12);

        let mv: Vec<_> = combo.mul_vec(&s, &h).iter().map(|(r, i)| c(r.eval(&x), i.eval(&x))).collect();
        let expected = &s * &xm * &h;
        for p in 0..n {
            assert!((mv[p] - expected[p]).norm() < 1e-12);
        }

        let qf = combo.quad_form(&h).eval(&x);
        assert!((qf - linalg::quad_form(&xm, &h)).abs() < 1e-12);
    }

    #[test]
    fn frobenius_rows_give_frobenius_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = HermVar { offset: 0, n: 3 };
        let x = random_x(9, &mut rng);
        let entries = HermCombo::new(3).with(v, 1.0).congruence(&linalg::identity(3));
        let norm2: f64 = entries.frobenius_rows().iter().map(|r| r.eval(&x).powi(2)).sum();
        assert!((norm2 - v.value(&x).norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn embedding_spectrum_duplicates_hermitian_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = HermVar { offset: 0, n: 3 };
        let x = random_x(9, &mut rng);
        let packed: Vec<f64> = v.packed_embedding().iter().map(|e| e.eval(&x)).collect();
        let real = unpack_symmetric(&packed, 6);
        let mut re_eigs: Vec<f64> = real.symmetric_eigenvalues().iter().copied().collect();
        re_eigs.sort_by(f64::total_cmp);
        let (herm_eigs, _) = linalg::hermitian_eigen(&v.value(&x));
        for (k, e) in herm_eigs.iter().enumerate() {
            assert!((re_eigs[2 * k] - e).abs() < 1e-12);
            assert!((re_eigs[2 * k + 1] - e).abs() < 1e-12);
        }
    }
}
