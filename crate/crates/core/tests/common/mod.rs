//! Reference implementations used as test oracles. They share nothing with
//! the library beyond the public description of a hierarchy: base knot
//! vectors, degrees and the list of active cells.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thbez::hierarchy::HierarchicalSpace;
use thbez::spline::{KnotVector, TensorSpace2D};

/// `N_{i,p}(x)` straight from the recursion, 0/0 = 0, with the last
/// function closed at the right end.
pub fn cox_de_boor(knots: &[f64], p: usize, i: usize, x: f64) -> f64 {
    let last = *knots.last().unwrap();
    if p == 0 {
        let (a, b) = (knots[i], knots[i + 1]);
        if a <= x && x < b {
            return 1.0;
        }
        // right end belongs to the last non-empty span
        if x == last && b == last && a < b {
            return 1.0;
        }
        return 0.0;
    }
    let mut v = 0.0;
    let d1 = knots[i + p] - knots[i];
    if d1 > 0.0 {
        v += (x - knots[i]) / d1 * cox_de_boor(knots, p - 1, i, x);
    }
    let d2 = knots[i + p + 1] - knots[i + 1];
    if d2 > 0.0 {
        v += (knots[i + p + 1] - x) / d2 * cox_de_boor(knots, p - 1, i + 1, x);
    }
    v
}

pub fn all_basis(knots: &[f64], p: usize, x: f64) -> DVector<f64> {
    let n = knots.len() - p - 1;
    DVector::from_fn(n, |i, _| cox_de_boor(knots, p, i, x))
}

pub fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

pub fn greville(knots: &[f64], p: usize) -> Vec<f64> {
    let n = knots.len() - p - 1;
    (0..n)
        .map(|i| knots[i + 1..=i + p].iter().sum::<f64>() / p.max(1) as f64)
        .collect()
}

pub fn unique(knots: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = knots.to_vec();
    u.dedup();
    u
}

/// Knots with every non-empty span split at its midpoint.
pub fn bisect(knots: &[f64]) -> Vec<f64> {
    let br = unique(knots);
    let mut out = knots.to_vec();
    out.extend(br.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.sort_by(f64::total_cmp);
    out
}

/// Fine x coarse matrix `S` with `N_coarse_i = sum_j S[j, i] N_fine_j`,
/// by interpolation at the fine Greville points.
pub fn two_scale(coarse: &[f64], fine: &[f64], p: usize) -> DMatrix<f64> {
    let g = greville(fine, p);
    let nf = fine.len() - p - 1;
    let nc = coarse.len() - p - 1;
    let a = DMatrix::from_fn(nf, nf, |k, j| cox_de_boor(fine, p, j, g[k]));
    let rhs = DMatrix::from_fn(nf, nc, |k, i| cox_de_boor(coarse, p, i, g[k]));
    a.lu()
        .solve(&rhs)
        .expect("Greville collocation is nonsingular")
}

/// One level of the oracle hierarchy.
pub struct OracleLevel {
    pub ku: Vec<f64>,
    pub kv: Vec<f64>,
    pub bu: Vec<f64>,
    pub bv: Vec<f64>,
    /// Cells (u index, v index) inside this level's subdomain.
    pub omega: Vec<Vec<bool>>,
}

impl OracleLevel {
    fn nu(&self, p: usize) -> usize {
        self.ku.len() - p - 1
    }
    fn nv(&self, q: usize) -> usize {
        self.kv.len() - q - 1
    }
    fn cell_range(breaks: &[f64], a: f64, b: f64) -> std::ops::Range<usize> {
        let lo = breaks.iter().position(|&x| x == a).unwrap();
        let hi = breaks.iter().position(|&x| x == b).unwrap();
        lo..hi
    }
    /// Whether the support of tensor function `(i, j)` lies in the subdomain.
    pub fn support_inside(&self, p: usize, q: usize, i: usize, j: usize) -> bool {
        let ru = Self::cell_range(&self.bu, self.ku[i], self.ku[i + p + 1]);
        let rv = Self::cell_range(&self.bv, self.kv[j], self.kv[j + q + 1]);
        rv.clone().all(|b| ru.clone().all(|a| self.omega[b][a]))
    }
}

/// THB basis built from the definition.
pub struct ThbOracle {
    pub p: usize,
    pub q: usize,
    pub levels: Vec<OracleLevel>,
    /// `(level, i, j)` in library order: level, then `i + nu * j`.
    pub functions: Vec<(usize, usize, usize)>,
    /// Coefficients of every function in the finest tensor basis.
    pub fine_coeffs: Vec<DMatrix<f64>>,
}

impl ThbOracle {
    pub fn new(hs: &HierarchicalSpace, truncate: bool) -> Self {
        let base = hs.level(0).space();
        let (p, q) = base.degrees();
        let nlev = hs.max_levels();
        let mut levels = Vec::with_capacity(nlev);
        let mut ku = base.u.knot_vector().knots().to_vec();
        let mut kv = base.v.knot_vector().knots().to_vec();
        for _ in 0..nlev {
            let bu = unique(&ku);
            let bv = unique(&kv);
            let omega = vec![vec![false; bu.len() - 1]; bv.len() - 1];
            levels.push(OracleLevel {
                ku: ku.clone(),
                kv: kv.clone(),
                bu,
                bv,
                omega,
            });
            ku = bisect(&ku);
            kv = bisect(&kv);
        }
        // a level-l cell is in the subdomain when an active cell of level >= l lies in it
        for (la, e) in hs.active_element_list() {
            let a = &levels[la];
            let nu = a.bu.len() - 1;
            let (eu, ev) = (e % nu, e / nu);
            let (cx, cy) = (
                0.5 * (a.bu[eu] + a.bu[eu + 1]),
                0.5 * (a.bv[ev] + a.bv[ev + 1]),
            );
            for lev in levels.iter_mut().take(la + 1) {
                let iu = lev.bu.partition_point(|&b| b <= cx) - 1;
                let iv = lev.bv.partition_point(|&b| b <= cy) - 1;
                lev.omega[iv][iu] = true;
            }
        }
        let mut functions = Vec::new();
        for l in 0..nlev {
            let lev = &levels[l];
            for j in 0..lev.nv(q) {
                for i in 0..lev.nu(p) {
                    let inside = lev.support_inside(p, q, i, j);
                    // support of (i, j) inside the next level's subdomain
                    let deeper = l + 1 < nlev && {
                        let n = &levels[l + 1];
                        let ru = OracleLevel::cell_range(&n.bu, lev.ku[i], lev.ku[i + p + 1]);
                        let rv = OracleLevel::cell_range(&n.bv, lev.kv[j], lev.kv[j + q + 1]);
                        rv.clone().all(|b| ru.clone().all(|a| n.omega[b][a]))
                    };
                    if inside && !deeper {
                        functions.push((l, i, j));
                    }
                }
            }
        }
        let su: Vec<DMatrix<f64>> = (0..nlev - 1)
            .map(|l| two_scale(&levels[l].ku, &levels[l + 1].ku, p))
            .collect();
        let sv: Vec<DMatrix<f64>> = (0..nlev - 1)
            .map(|l| two_scale(&levels[l].kv, &levels[l + 1].kv, q))
            .collect();
        let fine_coeffs = functions
            .iter()
            .map(|&(l, i, j)| {
                let lev = &levels[l];
                let mut c = DMatrix::zeros(lev.nu(p), lev.nv(q));
                c[(i, j)] = 1.0;
                for k in l + 1..nlev {
                    c = &su[k - 1] * c * sv[k - 1].transpose();
                    if truncate {
                        let fine = &levels[k];
                        for jj in 0..fine.nv(q) {
                            for ii in 0..fine.nu(p) {
                                if fine.support_inside(p, q, ii, jj) {
                                    c[(ii, jj)] = 0.0;
                                }
                            }
                        }
                    }
                }
                c
            })
            .collect();
        Self {
            p,
            q,
            levels,
            functions,
            fine_coeffs,
        }
    }

    /// Values of all functions at a parametric point.
    pub fn eval(&self, xi: f64, eta: f64) -> Vec<f64> {
        let fine = self.levels.last().unwrap();
        let nu = all_basis(&fine.ku, self.p, xi);
        let nv = all_basis(&fine.kv, self.q, eta);
        self.fine_coeffs
            .iter()
            .map(|c| (nu.transpose() * c * &nv)[(0, 0)])
            .collect()
    }
}

/// Random biquadratic hierarchy on `[0, 1]^2`: each level refines a random
/// subset of the active cells of the level below.
pub fn random_space(seed: u64, levels: usize) -> HierarchicalSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=4);
    let kv = KnotVector::open_uniform(2, n, 0.0, 1.0).unwrap();
    let mut hs = HierarchicalSpace::new(TensorSpace2D::from_knots(kv.clone(), kv), levels).unwrap();
    for l in 0..levels - 1 {
        let marks: Vec<(usize, usize)> = hs
            .active_elements(l)
            .into_iter()
            .filter(|_| rng.gen_bool(0.4))
            .map(|e| (l, e))
            .collect();
        hs = hs.refine_elements(&marks).unwrap();
    }
    hs
}

/// Library basis values at a point as a dense vector over all function ids.
pub fn library_values(hs: &HierarchicalSpace, xi: f64, eta: f64) -> Vec<f64> {
    let b = hs.eval_hier_basis(xi, eta).unwrap();
    let mut out = vec![0.0; hs.num_functions()];
    for (f, v) in b.functions.iter().zip(&b.values) {
        out[*f] = *v;
    }
    out
}
