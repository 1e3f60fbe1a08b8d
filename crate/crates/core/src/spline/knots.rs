//! Knot vectors, Cox-de Boor evaluation and knot insertion.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Highest polynomial degree accepted by [`KnotVector::new`].
pub const MAX_DEGREE: usize = 8;

/// Open (clamped) knot vector together with its polynomial degree.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::argument(format!(
                "degree {degree} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::argument("knot vector contains non-finite values"));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::argument("knot vector is not non-decreasing"));
        }
        let p = degree;
        if knots.len() < 2 * (p + 1) {
            return Err(Error::argument(format!(
                "knot vector of length {} too short for degree {p}",
                knots.len()
            )));
        }
        let first = knots[0];
        let last = knots[knots.len() - 1];
        if first >= last {
            return Err(Error::argument("knot vector has an empty parameter domain"));
        }
        let lead = knots.iter().take_while(|&&k| k == first).count();
        let trail = knots.iter().rev().take_while(|&&k| k == last).count();
        if lead != p + 1 || trail != p + 1 {
            return Err(Error::argument(format!(
                "knot vector is not clamped: end multiplicities ({lead}, {trail}), expected {}",
                p + 1
            )));
        }
        let max_interior = p.max(1);
        let mut i = lead;
        while i < knots.len() - trail {
            let m = knots[i..].iter().take_while(|&&k| k == knots[i]).count();
            if m > max_interior {
                return Err(Error::argument(format!(
                    "interior knot {} has multiplicity {m} > {max_interior}",
                    knots[i]
                )));
            }
            i += m;
        }
        Ok(Self { knots, degree })
    }

    /// Clamped knot vector on `[a, b]` with `elements` equal spans.
    pub fn open_uniform(degree: usize, elements: usize, a: f64, b: f64) -> Result<Self> {
        if elements == 0 {
            return Err(Error::argument("at least one element is required"));
        }
        let mut knots = vec![a; degree + 1];
        for e in 1..elements {
            knots.push(a + (b - a) * e as f64 / elements as f64);
        }
        knots.extend(std::iter::repeat(b).take(degree + 1));
        Self::new(knots, degree)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis functions `n = len - p - 1`.
    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn multiplicity(&self, value: f64) -> usize {
        self.knots.iter().filter(|&&k| k == value).count()
    }

    /// Distinct knot values in increasing order.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &k in &self.knots {
            if out.last() != Some(&k) {
                out.push(k);
            }
        }
        out
    }

    /// Knot span `i` with `knots[i] <= xi < knots[i+1]`; the right end of the
    /// domain maps to the last non-empty span.
    pub fn find_span(&self, xi: f64) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(xi >= lo && xi <= hi) {
            return Err(Error::Domain { value: xi, lo, hi });
        }
        let n = self.num_basis();
        if xi >= self.knots[n] {
            return Ok(n - 1);
        }
        // largest i in [p, n-1] with knots[i] <= xi
        let (mut low, mut high) = (self.degree, n);
        while high - low > 1 {
            let mid = (low + high) / 2;
            if self.knots[mid] <= xi {
                low = mid;
            } else {
                high = mid;
            }
        }
        Ok(low)
    }

    /// The `p+1` basis functions that may be nonzero at `xi`, i.e.
    /// `N_{span-p}, ..., N_{span}`.
    pub fn eval_basis(&self, xi: f64) -> Result<(usize, Vec<f64>)> {
        let span = self.find_span(xi)?;
        Ok((span, self.basis_in_span(span, xi)))
    }

    pub(crate) fn basis_in_span(&self, span: usize, xi: f64) -> Vec<f64> {
        let p = self.degree;
        let u = &self.knots;
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = xi - u[span + 1 - j];
            right[j] = u[span + j] - xi;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        n
    }

    /// Values and derivatives up to `order` of the `p+1` functions nonzero at
    /// `xi`. `result[k][j]` is the k-th derivative of `N_{span-p+j}`.
    pub fn eval_basis_derivs(&self, xi: f64, order: usize) -> Result<(usize, Vec<Vec<f64>>)> {
        if order > self.degree {
            return Err(Error::argument(format!(
                "derivative order {order} exceeds degree {}",
                self.degree
            )));
        }
        let span = self.find_span(xi)?;
        Ok((span, self.derivs_in_span(span, xi, order)))
    }

    pub(crate) fn derivs_in_span(&self, span: usize, xi: f64, order: usize) -> Vec<Vec<f64>> {
        let p = self.degree;
        let u = &self.knots;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = xi - u[span + 1 - j];
            right[j] = u[span + j] - xi;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = if ndu[j][r] == 0.0 {
                    0.0
                } else {
                    ndu[r][j - 1] / ndu[j][r]
                };
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0; p + 1]; order + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=order {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    let denom = ndu[pk + 1][rk as usize];
                    a[s2][0] = if denom == 0.0 { 0.0 } else { a[s1][0] / denom };
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize {
                    k - 1
                } else {
                    p - r
                };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    let denom = ndu[pk + 1][idx];
                    a[s2][j] = if denom == 0.0 {
                        0.0
                    } else {
                        (a[s1][j] - a[s1][j - 1]) / denom
                    };
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    let denom = ndu[pk + 1][r];
                    a[s2][k] = if denom == 0.0 {
                        0.0
                    } else {
                        -a[s1][k - 1] / denom
                    };
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for k in 1..=order {
            for v in ders[k].iter_mut() {
                *v *= factor;
            }
            factor *= (p - k) as f64;
        }
        ders
    }

    /// Inserts `new_knots` and returns the refined vector with the transfer
    /// matrix `S` (fine x coarse) such that `N_i = sum_j S[j][i] * N^_j`.
    pub fn insert_knots(&self, new_knots: &[f64]) -> Result<(KnotVector, DMatrix<f64>)> {
        let (lo, hi) = self.domain();
        let mut sorted = new_knots.to_vec();
        sorted.sort_by(f64::total_cmp);
        for &x in &sorted {
            if !(x > lo && x < hi) {
                return Err(Error::argument(format!(
                    "inserted knot {x} not strictly inside ({lo}, {hi})"
                )));
            }
        }
        let n0 = self.num_basis();
        let mut knots = self.knots.clone();
        // rows: fine functions, stored densely over the coarse columns
        let mut rows: Vec<Vec<f64>> = (0..n0)
            .map(|i| {
                let mut r = vec![0.0; n0];
                r[i] = 1.0;
                r
            })
            .collect();
        for &x in &sorted {
            let (refined, alphas) = insert_knot_raw(&knots, self.degree, x);
            let n = rows.len();
            let mut next = Vec::with_capacity(n + 1);
            for j in 0..=n {
                // fine_j row = alpha_j * row_j + (1 - alpha_j) * row_{j-1}
                let a = if j < n { alphas[j] } else { 0.0 };
                let mut r = vec![0.0; n0];
                if j < n && a != 0.0 {
                    for (dst, src) in r.iter_mut().zip(&rows[j]) {
                        *dst += a * src;
                    }
                }
                if j > 0 && a != 1.0 {
                    for (dst, src) in r.iter_mut().zip(&rows[j - 1]) {
                        *dst += (1.0 - a) * src;
                    }
                }
                next.push(r);
            }
            rows = next;
            knots = refined;
        }
        let kv = KnotVector::new(knots, self.degree)?;
        let m = rows.len();
        let s = DMatrix::from_fn(m, n0, |j, i| rows[j][i]);
        Ok((kv, s))
    }

    /// Knot vector with the midpoint of every non-empty span inserted.
    pub fn dyadic_midpoints(&self) -> Vec<f64> {
        self.breakpoints()
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }
}

/// Single knot insertion on an arbitrary (not necessarily clamped) knot
/// sequence. Returns the refined sequence and the coefficients `alpha_i`
/// with `N_i = alpha_i N^_i + (1 - alpha_{i+1}) N^_{i+1}`.
pub(crate) fn insert_knot_raw(knots: &[f64], p: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let n = knots.len() - p - 1;
    let alphas = (0..n)
        .map(|i| {
            let (a, b) = (knots[i], knots[i + p]);
            if b <= x {
                1.0
            } else if x <= a {
                0.0
            } else {
                (x - a) / (b - a)
            }
        })
        .collect();
    let pos = knots.partition_point(|&k| k <= x);
    let mut refined = Vec::with_capacity(knots.len() + 1);
    refined.extend_from_slice(&knots[..pos]);
    refined.push(x);
    refined.extend_from_slice(&knots[pos..]);
    (refined, alphas)
}

/// Transfer rows for a sequence of insertions on a raw knot sequence. Returns
/// the refined knots and the dense fine x coarse matrix.
pub(crate) fn insert_knots_raw(knots: &[f64], p: usize, xs: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let n0 = knots.len() - p - 1;
    let mut s = DMatrix::<f64>::identity(n0, n0);
    let mut cur = knots.to_vec();
    for &x in xs {
        let (refined, alphas) = insert_knot_raw(&cur, p, x);
        let n = s.nrows();
        let next = DMatrix::from_fn(n + 1, n0, |j, i| {
            let a = if j < n { alphas[j] } else { 0.0 };
            let mut v = 0.0;
            if j < n {
                v += a * s[(j, i)];
            }
            if j > 0 {
                v += (1.0 - a) * s[(j - 1, i)];
            }
            v
        });
        s = next;
        cur = refined;
    }
    (cur, s)
}
