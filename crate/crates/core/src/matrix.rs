//! Nonnegative rational matrices with certified spectral-radius enclosures.
//!
//! All arithmetic is exact.  The spectral radius of a nonnegative matrix is
//! enclosed by splitting into strongly connected blocks and running
//! Collatz–Wielandt bounds on each: for any positive vector `v` and
//! irreducible nonnegative `A`,
//! `min_i (Av)_i / v_i  <=  λ(A)  <=  max_i (Av)_i / v_i`.
//! Iterating `v ← Av` tightens the bounds; the iteration vector may be
//! rounded (to keep denominators small) without invalidating them, since
//! they hold for every positive vector.  The reported enclosure is sound
//! unconditionally; only its width depends on the iteration.
//!
//! When the enclosure straddles a threshold, the comparison can still be
//! decided exactly: the spectral radius is itself an eigenvalue, so
//! `λ >= t` iff the characteristic polynomial vanishes at `t` or has a real
//! root beyond `t`, which a Sturm chain counts exactly.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatrixError {
    #[error("matrix rows have inconsistent lengths (row {row} has {found}, expected {expected})")]
    NotSquare { row: usize, expected: usize, found: usize },
    #[error("matrix entry ({row},{col}) is negative")]
    NegativeEntry { row: usize, col: usize },
    #[error("certification needs at least one iteration")]
    ZeroIterationBudget,
    #[error("cannot parse {text:?} as a rational number")]
    BadRational { text: String },
}

/// Square nonnegative matrix with exact rational entries, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionMatrix {
    n: usize,
    entries: Vec<Vec<BigRational>>,
}

impl TransitionMatrix {
    pub fn new(entries: Vec<Vec<BigRational>>) -> Result<Self, MatrixError> {
        let n = entries.len();
        for (i, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(MatrixError::NotSquare { row: i, expected: n, found: row.len() });
            }
            for (j, e) in row.iter().enumerate() {
                if e.is_negative() {
                    return Err(MatrixError::NegativeEntry { row: i, col: j });
                }
            }
        }
        Ok(TransitionMatrix { n, entries })
    }

    pub fn zero(n: usize) -> Self {
        TransitionMatrix { n, entries: vec![vec![BigRational::zero(); n]; n] }
    }

    /// Parses entries given as decimal integers or fractions like `"1/2"`.
    pub fn from_strings(rows: &[Vec<String>]) -> Result<Self, MatrixError> {
        let entries = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| {
                        BigRational::from_str(s.trim())
                            .map_err(|_| MatrixError::BadRational { text: s.clone() })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        TransitionMatrix::new(entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> &BigRational {
        &self.entries[i][j]
    }

    pub fn set_entry(&mut self, i: usize, j: usize, v: BigRational) {
        assert!(!v.is_negative(), "transition entries are nonnegative");
        self.entries[i][j] = v;
    }

    pub fn add_to_entry(&mut self, i: usize, j: usize, v: BigRational) {
        assert!(!v.is_negative(), "transition entries are nonnegative");
        self.entries[i][j] += v;
    }

    pub fn rows(&self) -> &[Vec<BigRational>] {
        &self.entries
    }

    /// Strongly connected components of the positivity digraph
    /// (edge `i → j` iff entry `(i,j) > 0`): classes of mutual
    /// reachability, computed from the transitive closure (the matrices
    /// here are small).  Components are listed by ascending least vertex.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.n;
        let mut reach = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                reach[i][j] = self.entries[i][j].is_positive();
            }
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        let mut assigned = vec![false; n];
        let mut components = Vec::new();
        for i in 0..n {
            if assigned[i] {
                continue;
            }
            let members: Vec<usize> = (i..n)
                .filter(|&j| j == i || (reach[i][j] && reach[j][i]))
                .collect();
            for &j in &members {
                assigned[j] = true;
            }
            components.push(members);
        }
        components
    }

    /// Certified enclosure of the spectral radius, with an exact comparison
    /// against 1 where the enclosure alone cannot decide it.
    pub fn certify_spectral_radius(
        &self,
        options: &CertifyOptions,
    ) -> Result<SpectralCertificate, MatrixError> {
        if options.max_power_iterations == 0 {
            return Err(MatrixError::ZeroIterationBudget);
        }
        if self.n == 0 {
            return Ok(SpectralCertificate {
                low: BigRational::zero(),
                high: BigRational::zero(),
                comparison_with_one: ThresholdComparison::Below,
                exact_comparison: true,
            });
        }

        let mut low = BigRational::zero() - BigRational::one(); // < any radius
        let mut high = BigRational::zero() - BigRational::one();
        for block in self.strongly_connected_components() {
            let (blo, bhi) = self.block_bounds(&block, options);
            if bhi > high {
                high = bhi;
            }
            if blo > low {
                low = blo;
            }
        }
        debug_assert!(low <= high);
        if low.is_negative() {
            low = BigRational::zero();
        }

        let one = BigRational::one();
        let comparison_with_one = if low >= one {
            ThresholdComparison::AtLeast
        } else if high < one {
            ThresholdComparison::Below
        } else if self.n <= options.max_exact_dimension {
            if self.radius_at_least_one_exact() {
                ThresholdComparison::AtLeast
            } else {
                ThresholdComparison::Below
            }
        } else {
            ThresholdComparison::Indeterminate
        };
        let exact_comparison = comparison_with_one != ThresholdComparison::Indeterminate;

        Ok(SpectralCertificate { low, high, comparison_with_one, exact_comparison })
    }

    /// Collatz–Wielandt enclosure of the Perron root of one strongly
    /// connected block.
    fn block_bounds(&self, block: &[usize], options: &CertifyOptions) -> (BigRational, BigRational) {
        let k = block.len();
        if k == 1 {
            let e = self.entries[block[0]][block[0]].clone();
            return (e.clone(), e);
        }
        let sub: Vec<Vec<BigRational>> = block
            .iter()
            .map(|&i| block.iter().map(|&j| self.entries[i][j].clone()).collect())
            .collect();
        // A = block + I is primitive for a strongly connected block, which
        // makes the bounds converge; the +I only shifts the root by 1.
        let mut v = vec![BigRational::one(); k];
        let mut best_low: Option<BigRational> = None;
        let mut best_high: Option<BigRational> = None;
        for _ in 0..options.max_power_iterations {
            let mut w = Vec::with_capacity(k);
            for i in 0..k {
                let mut acc = v[i].clone(); // the +I term
                for j in 0..k {
                    if sub[i][j].is_positive() {
                        acc += &sub[i][j] * &v[j];
                    }
                }
                w.push(acc);
            }
            let mut min_ratio: Option<BigRational> = None;
            let mut max_ratio: Option<BigRational> = None;
            for i in 0..k {
                let r = &w[i] / &v[i];
                if min_ratio.as_ref().map_or(true, |m| &r < m) {
                    min_ratio = Some(r.clone());
                }
                if max_ratio.as_ref().map_or(true, |m| &r > m) {
                    max_ratio = Some(r);
                }
            }
            let lo = min_ratio.unwrap() - BigRational::one();
            let hi = max_ratio.unwrap() - BigRational::one();
            if best_low.as_ref().map_or(true, |b| &lo > b) {
                best_low = Some(lo);
            }
            if best_high.as_ref().map_or(true, |b| &hi < b) {
                best_high = Some(hi);
            }
            let width = best_high.clone().unwrap() - best_low.clone().unwrap();
            if width <= options.tolerance {
                break;
            }
            // Normalize and round the vector: bounds stay valid for any
            // positive vector, so rounding only affects convergence speed.
            let max_w = w.iter().max().cloned().unwrap();
            v = w
                .into_iter()
                .map(|x| round_positive(x / &max_w, options.denominator_bits))
                .collect();
        }
        (best_low.unwrap(), best_high.unwrap())
    }

    /// Exact decision of `spectral radius >= 1` via the characteristic
    /// polynomial: the radius of a nonnegative matrix is an eigenvalue, so
    /// it is `>= 1` iff `p(1) = 0` or `p` has a real root in `(1, ∞)`.
    fn radius_at_least_one_exact(&self) -> bool {
        let p = self.characteristic_polynomial();
        let one = BigRational::one();
        if poly_eval(&p, &one).is_zero() {
            return true;
        }
        // Real eigenvalues lie within [-R, R] for R = max row sum.
        let mut bound = BigRational::zero();
        for row in &self.entries {
            let s: BigRational = row.iter().cloned().sum();
            if s > bound {
                bound = s;
            }
        }
        bound += BigRational::one();
        sturm_count_roots(&p, &one, &bound) > 0
    }

    /// Characteristic polynomial `det(xI - M)` by the Faddeev–LeVerrier
    /// recurrence, coefficients ascending.
    pub fn characteristic_polynomial(&self) -> Vec<BigRational> {
        let n = self.n;
        let mut coeffs = vec![BigRational::zero(); n + 1];
        coeffs[n] = BigRational::one();
        let mut m: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); n]; n];
        for k in 1..=n {
            // m ← A·(m + c_{n-k+1}·I)
            if k > 1 {
                let c = coeffs[n - k + 1].clone();
                for i in 0..n {
                    m[i][i] += &c;
                }
                m = self.multiply_left(&m);
            } else {
                m = self.entries.clone();
            }
            let trace: BigRational = (0..n).map(|i| m[i][i].clone()).sum();
            coeffs[n - k] = -(trace / BigRational::from_integer(BigInt::from(k)));
        }
        coeffs
    }

    fn multiply_left(&self, other: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
        let n = self.n;
        let mut out = vec![vec![BigRational::zero(); n]; n];
        for i in 0..n {
            for l in 0..n {
                if self.entries[i][l].is_zero() {
                    continue;
                }
                for j in 0..n {
                    if other[l][j].is_zero() {
                        continue;
                    }
                    out[i][j] += &self.entries[i][l] * &other[l][j];
                }
            }
        }
        out
    }
}

impl Serialize for TransitionMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = self
            .entries
            .iter()
            .map(|r| r.iter().map(|e| e.to_string()).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TransitionMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<String>>::deserialize(deserializer)?;
        TransitionMatrix::from_strings(&rows).map_err(serde::de::Error::custom)
    }
}

/// Outcome of comparing the spectral radius with 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdComparison {
    Below,
    AtLeast,
    Indeterminate,
}

/// Certified spectral data: `low <= λ <= high` always holds; the
/// comparison is proven (not merely read off a float).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectralCertificate {
    pub low: BigRational,
    pub high: BigRational,
    pub comparison_with_one: ThresholdComparison,
    /// Whether the comparison was settled exactly (tight enclosure or
    /// characteristic-polynomial root count) rather than left indeterminate.
    pub exact_comparison: bool,
}

impl Serialize for SpectralCertificate {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("SpectralCertificate", 5)?;
        st.serialize_field("low", &self.low.to_string())?;
        st.serialize_field("high", &self.high.to_string())?;
        st.serialize_field("low_approx", &rational_to_f64(&self.low))?;
        st.serialize_field("high_approx", &rational_to_f64(&self.high))?;
        st.serialize_field("comparison_with_one", &self.comparison_with_one)?;
        st.end()
    }
}

/// Best-effort conversion for display purposes only.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    let numer = r.numer();
    let denom = r.denom();
    // Scale into i128 range when possible, otherwise fall back to string parsing.
    if let (Some(n), Some(d)) = (to_i128(numer), to_i128(denom)) {
        return n as f64 / d as f64;
    }
    r.to_string()
        .split_once('/')
        .and_then(|(n, d)| {
            let n: f64 = n.parse().ok()?;
            let d: f64 = d.parse().ok()?;
            Some(n / d)
        })
        .unwrap_or(f64::NAN)
}

fn to_i128(b: &BigInt) -> Option<i128> {
    use num_traits::ToPrimitive;
    b.to_i128()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertifyOptions {
    /// Target enclosure width.
    pub tolerance: BigRational,
    /// Power-iteration budget per strongly connected block.
    pub max_power_iterations: usize,
    /// Largest dimension for which a straddling comparison is settled
    /// exactly via the characteristic polynomial.
    pub max_exact_dimension: usize,
    /// Denominator size cap (in bits) for the rounded iteration vector.
    pub denominator_bits: u32,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            tolerance: BigRational::new(BigInt::one(), BigInt::from(10u64).pow(9)),
            max_power_iterations: 256,
            max_exact_dimension: 8,
            denominator_bits: 64,
        }
    }
}

impl CertifyOptions {
    pub fn with_tolerance(mut self, tol: BigRational) -> Self {
        self.tolerance = tol;
        self
    }
}

/// Rounds a positive rational down onto the grid `k / 2^bits`, clamping
/// away from zero, leaving small denominators untouched.
fn round_positive(x: BigRational, bits: u32) -> BigRational {
    let scale = BigInt::one() << bits;
    if x.denom() <= &scale {
        return x;
    }
    let scaled = (&x * BigRational::from_integer(scale.clone())).floor();
    let mut k = scaled.to_integer();
    if k.is_zero() {
        k = BigInt::one();
    }
    BigRational::new(k, scale)
}

fn poly_eval(p: &[BigRational], x: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    for c in p.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

fn poly_derivative(p: &[BigRational]) -> Vec<BigRational> {
    if p.len() <= 1 {
        return vec![BigRational::zero()];
    }
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * BigRational::from_integer(BigInt::from(i)))
        .collect()
}

fn poly_trim(mut p: Vec<BigRational>) -> Vec<BigRational> {
    while p.len() > 1 && p.last().map_or(false, |c| c.is_zero()) {
        p.pop();
    }
    p
}

fn poly_is_zero(p: &[BigRational]) -> bool {
    p.iter().all(|c| c.is_zero())
}

/// Remainder of polynomial division, normalized to unit leading-coefficient
/// magnitude to keep numbers small (a positive rescale, sign-safe for
/// Sturm sequences).
fn poly_rem(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let b = poly_trim(b.to_vec());
    let mut r = poly_trim(a.to_vec());
    let db = b.len() - 1;
    let lead_b = b.last().unwrap().clone();
    while !poly_is_zero(&r) && r.len() - 1 >= db {
        let dr = r.len() - 1;
        let factor = r.last().unwrap() / &lead_b;
        let shift = dr - db;
        for i in 0..=db {
            let delta = &factor * &b[i];
            r[i + shift] -= delta;
        }
        r = poly_trim(r);
        if r.len() == 1 && r[0].is_zero() {
            break;
        }
        if r.len() - 1 < db {
            break;
        }
    }
    r
}

fn poly_scale_unit(p: Vec<BigRational>) -> Vec<BigRational> {
    if poly_is_zero(&p) {
        return p;
    }
    let lead = p.last().unwrap().clone();
    let mag = if lead.is_negative() { -lead } else { lead };
    p.into_iter().map(|c| c / &mag).collect()
}

/// Number of distinct real roots of `p` in the interval `(a, b]`,
/// assuming `p(a) != 0`.
fn sturm_count_roots(p: &[BigRational], a: &BigRational, b: &BigRational) -> usize {
    // Square-free part: p / gcd(p, p').
    let p = poly_trim(p.to_vec());
    let dp = poly_derivative(&p);
    let g = poly_gcd(&p, &dp);
    let p_sf = if g.len() > 1 { poly_div_exact(&p, &g) } else { p.clone() };

    let mut chain = vec![poly_scale_unit(p_sf.clone()), poly_scale_unit(poly_derivative(&p_sf))];
    loop {
        let k = chain.len();
        if poly_is_zero(&chain[k - 1]) || chain[k - 1].len() == 1 && chain[k - 1][0].is_zero() {
            chain.pop();
            break;
        }
        if chain[k - 1].len() == 1 {
            break; // nonzero constant ends the chain
        }
        let r = poly_rem(&chain[k - 2], &chain[k - 1]);
        if poly_is_zero(&r) {
            break;
        }
        let neg: Vec<BigRational> = r.into_iter().map(|c| -c).collect();
        chain.push(poly_scale_unit(neg));
    }

    let changes = |x: &BigRational| {
        let mut count = 0usize;
        let mut last: Option<bool> = None;
        for q in &chain {
            let v = poly_eval(q, x);
            if v.is_zero() {
                continue;
            }
            let sign = v.is_positive();
            if let Some(prev) = last {
                if prev != sign {
                    count += 1;
                }
            }
            last = Some(sign);
        }
        count
    };
    changes(a).saturating_sub(changes(b))
}

fn poly_gcd(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut x = poly_scale_unit(poly_trim(a.to_vec()));
    let mut y = poly_scale_unit(poly_trim(b.to_vec()));
    while !poly_is_zero(&y) && !(y.len() == 1 && y[0].is_zero()) {
        let r = poly_rem(&x, &y);
        x = y;
        y = poly_scale_unit(poly_trim(r));
        if y.len() == 1 && y[0].is_zero() {
            break;
        }
    }
    x
}

/// Exact polynomial quotient (used only when the division is known exact).
fn poly_div_exact(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let b = poly_trim(b.to_vec());
    let mut r = poly_trim(a.to_vec());
    let db = b.len() - 1;
    let lead_b = b.last().unwrap().clone();
    let mut q = vec![BigRational::zero(); r.len().saturating_sub(db)];
    while !poly_is_zero(&r) && r.len() - 1 >= db && !(r.len() == 1 && r[0].is_zero()) {
        let dr = r.len() - 1;
        let factor = r.last().unwrap() / &lead_b;
        let shift = dr - db;
        q[shift] = factor.clone();
        for i in 0..=db {
            let delta = &factor * &b[i];
            r[i + shift] -= delta;
        }
        r = poly_trim(r);
        if r.len() == 1 && r[0].is_zero() {
            break;
        }
        if r.len() - 1 < db {
            break;
        }
    }
    poly_trim(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[&str]]) -> TransitionMatrix {
        TransitionMatrix::from_strings(
            &rows
                .iter()
                .map(|r| r.iter().map(|s| s.to_string()).collect())
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    fn q(s: &str) -> BigRational {
        BigRational::from_str(s).unwrap()
    }

    #[test]
    fn constructor_checks_shape_and_sign() {
        assert!(TransitionMatrix::from_strings(&[vec!["0".into(), "1".into()]]).is_err());
        assert!(matches!(
            TransitionMatrix::from_strings(&[vec!["-1".into()]]),
            Err(MatrixError::NegativeEntry { .. })
        ));
        assert!(matches!(
            TransitionMatrix::from_strings(&[vec!["x".into()]]),
            Err(MatrixError::BadRational { .. })
        ));
    }

    #[test]
    fn scc_splits_block_triangular_structure() {
        let t = m(&[
            &["0", "1", "0"],
            &["1", "0", "0"],
            &["1", "0", "3"],
        ]);
        let sccs = t.strongly_connected_components();
        assert_eq!(sccs, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn single_entry_blocks_are_exact() {
        let t = m(&[&["1"]]);
        let cert = t.certify_spectral_radius(&CertifyOptions::default()).unwrap();
        assert_eq!(cert.low, q("1"));
        assert_eq!(cert.high, q("1"));
        assert_eq!(cert.comparison_with_one, ThresholdComparison::AtLeast);

        let t = m(&[&["1/2"]]);
        let cert = t.certify_spectral_radius(&CertifyOptions::default()).unwrap();
        assert_eq!(cert.comparison_with_one, ThresholdComparison::Below);
        assert!(cert.exact_comparison);
    }

    #[test]
    fn nilpotent_matrix_has_zero_radius() {
        let t = m(&[&["0", "1/2"], &["0", "0"]]);
        let cert = t.certify_spectral_radius(&CertifyOptions::default()).unwrap();
        assert!(cert.low.is_zero());
        assert!(cert.high.is_zero());
        assert_eq!(cert.comparison_with_one, ThresholdComparison::Below);
    }

    #[test]
    fn enclosure_brackets_sqrt_one_half() {
        // Radius of [[0,1],[1/2,0]] is sqrt(1/2) ≈ 0.7071.
        let t = m(&[&["0", "1"], &["1/2", "0"]]);
        let cert = t.certify_spectral_radius(&CertifyOptions::default()).unwrap();
        assert_eq!(cert.comparison_with_one, ThresholdComparison::Below);
        // Verify the bracket via squared comparisons: low² <= 1/2 <= high².
        assert!(&cert.low * &cert.low <= q("1/2"));
        assert!(&cert.high * &cert.high >= q("1/2"));
        assert!(&cert.high - &cert.low <= q("1/1000000000"));
    }

    #[test]
    fn reducible_radius_is_max_over_blocks() {
        let t = m(&[
            &["0", "1", "0"],
            &["1", "0", "0"],
            &["1", "0", "3"],
        ]);
        let cert = t.certify_spectral_radius(&CertifyOptions::default()).unwrap();
        assert_eq!(cert.low, q("3"));
        assert_eq!(cert.high, q("3"));
        assert_eq!(cert.comparison_with_one, ThresholdComparison::AtLeast);
    }

    #[test]
    fn straddling_enclosure_is_settled_by_the_polynomial() {
        // [[0,2],[1/4,1/2]] has eigenvalues 1 and -1/2: the bounds converge
        // toward 1 from both sides forever, so only the exact path decides.
        let t = m(&[&["0", "2"], &["1/4", "1/2"]]);
        let cert = t.certify_spectral_radius(&CertifyOptions::default()).unwrap();
        assert_eq!(cert.comparison_with_one, ThresholdComparison::AtLeast);
        assert!(cert.exact_comparison);
        assert!(cert.low <= q("1") && q("1") <= cert.high);

        // Same shape with radius just below 1 and a tiny iteration budget:
        // the wide enclosure straddles, the polynomial says "below".
        let t = m(&[&["0", "2"], &["1/4", "2/5"]]);
        let opts = CertifyOptions { max_power_iterations: 1, ..CertifyOptions::default() };
        let cert = t.certify_spectral_radius(&opts).unwrap();
        assert!(cert.low < q("1") && cert.high > q("1"));
        assert_eq!(cert.comparison_with_one, ThresholdComparison::Below);
    }

    #[test]
    fn indeterminate_when_too_large_for_exact_path() {
        let t = m(&[&["0", "2"], &["1/4", "1/2"]]);
        let opts = CertifyOptions {
            max_power_iterations: 3,
            max_exact_dimension: 1,
            ..CertifyOptions::default()
        };
        let cert = t.certify_spectral_radius(&opts).unwrap();
        assert_eq!(cert.comparison_with_one, ThresholdComparison::Indeterminate);
        assert!(!cert.exact_comparison);
    }

    #[test]
    fn characteristic_polynomial_is_exact() {
        let t = m(&[&["0", "2"], &["1/4", "1/2"]]);
        // det(xI - M) = x² - (1/2)x - 1/2 = (x - 1)(x + 1/2)
        let p = t.characteristic_polynomial();
        assert_eq!(p, vec![q("-1/2"), q("-1/2"), q("1")]);
    }

    #[test]
    fn sturm_counts_roots_in_interval() {
        // (x-2)(x-3) = x² -5x + 6: two roots beyond 1.
        let p = vec![q("6"), q("-5"), q("1")];
        assert_eq!(sturm_count_roots(&p, &q("1"), &q("10")), 2);
        assert_eq!(sturm_count_roots(&p, &q("5/2"), &q("10")), 1);
        assert_eq!(sturm_count_roots(&p, &q("4"), &q("10")), 0);
        // Repeated roots count once: (x-2)²
        let p = vec![q("4"), q("-4"), q("1")];
        assert_eq!(sturm_count_roots(&p, &q("1"), &q("10")), 1);
    }

    #[test]
    fn power_bounds_survive_rounding() {
        // Force aggressive rounding and verify soundness on a known radius.
        let t = m(&[&["0", "3"], &["1/3", "0"]]); // radius 1
        let opts = CertifyOptions { denominator_bits: 8, ..CertifyOptions::default() };
        let cert = t.certify_spectral_radius(&opts).unwrap();
        assert!(cert.low <= q("1") && q("1") <= cert.high);
        assert_eq!(cert.comparison_with_one, ThresholdComparison::AtLeast);
    }

    #[test]
    fn serde_uses_fraction_strings() {
        let t = m(&[&["0", "1"], &["1/2", "0"]]);
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"[["0","1"],["1/2","0"]]"#);
        let back: TransitionMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
