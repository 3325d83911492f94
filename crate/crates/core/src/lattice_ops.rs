//! Exact finite-difference calculus on one lattice and between nested lattices.
//!
//! Everything here works over arbitrary-precision rationals. The identities in
//! this module are exact on polynomial data and serve as the reference the
//! floating-point modules are checked against.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Shorthand for the rational `num / den`.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

fn factorial(k: usize) -> Rational {
    (1..=k as i64).fold(Rational::one(), |acc, v| acc * int(v))
}

fn binomial(n: usize, k: usize) -> Rational {
    let mut acc = Rational::one();
    for i in 0..k {
        acc = acc * int((n - i) as i64) / int((i + 1) as i64);
    }
    acc
}

/// Values `u_n` on a contiguous window `[start, start + len)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sequence1D {
    start: i64,
    values: Vec<Rational>,
}

impl Sequence1D {
    pub fn new(start: i64, values: Vec<Rational>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::domain(format!(
                "sequence window must hold at least 2 points, got {}",
                values.len()
            )));
        }
        Ok(Self { start, values })
    }

    /// Samples `f` at `start, start + 1, ..., start + len - 1`.
    pub fn from_fn(start: i64, len: usize, f: impl Fn(i64) -> Rational) -> Result<Self> {
        Self::new(start, (0..len as i64).map(|k| f(start + k)).collect())
    }

    // Derived windows may shrink to a single point.
    fn derived(start: i64, values: Vec<Rational>) -> Self {
        Self { start, values }
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn get(&self, n: i64) -> Option<&Rational> {
        usize::try_from(n - self.start)
            .ok()
            .and_then(|k| self.values.get(k))
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(Zero::is_zero)
    }
}

/// Order of slow variation: `Delta^(l+1) u == 0` on the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlownessOrder {
    Finite(usize),
    /// No finite order up to and including the tested bound.
    Beyond(usize),
}

/// Lattice dilation ratio `h = M / N` with `0 < h <= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScaleRatio {
    numerator: u64,
    denominator: u64,
}

impl ScaleRatio {
    pub fn new(numerator: u64, denominator: u64) -> Result<Self> {
        if numerator == 0 || denominator == 0 || numerator > denominator {
            return Err(Error::domain(format!(
                "scale ratio {numerator}/{denominator} must satisfy 0 < h <= 1"
            )));
        }
        Ok(Self {
            numerator,
            denominator,
        })
    }

    pub fn numerator(&self) -> u64 {
        self.numerator
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn value(&self) -> Rational {
        rat(self.numerator as i64, self.denominator as i64)
    }

    /// True when the coarse lattice is a sublattice of the fine one (`h = 1/M`).
    pub fn is_sublattice(&self) -> bool {
        self.value().numer().is_one()
    }
}

/// Signed Stirling numbers of the first kind and Stirling numbers of the
/// second kind, indexed `[i][k]` for `0 <= k <= i <= max_order`.
#[derive(Clone, Debug)]
pub struct StirlingTable {
    max_order: usize,
    first_kind: Vec<Vec<BigInt>>,
    second_kind: Vec<Vec<BigInt>>,
}

impl StirlingTable {
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Signed first kind `s(i, k)`; zero outside the triangle.
    pub fn first(&self, i: usize, k: usize) -> BigInt {
        self.first_kind
            .get(i)
            .and_then(|row| row.get(k))
            .cloned()
            .unwrap_or_else(BigInt::zero)
    }

    /// Second kind `S(k, j)`; zero outside the triangle.
    pub fn second(&self, k: usize, j: usize) -> BigInt {
        self.second_kind
            .get(k)
            .and_then(|row| row.get(j))
            .cloned()
            .unwrap_or_else(BigInt::zero)
    }
}

/// Applies `Delta^order` pointwise; the window shrinks by `order` on the right.
pub fn forward_difference(seq: &Sequence1D, order: usize) -> Result<Sequence1D> {
    if seq.len() <= order {
        return Err(Error::domain(format!(
            "difference of order {order} needs a window of at least {} points, got {}",
            order + 1,
            seq.len()
        )));
    }
    let mut values = seq.values.clone();
    for _ in 0..order {
        values = values.windows(2).map(|w| &w[1] - &w[0]).collect();
    }
    Ok(Sequence1D::derived(seq.start, values))
}

/// Smallest `l <= max_test` with `Delta^(l+1) seq == 0`.
pub fn slowness_order(seq: &Sequence1D, max_test: usize) -> Result<SlownessOrder> {
    if max_test + 1 >= seq.len() {
        return Err(Error::precondition(format!(
            "max_test = {max_test} needs max_test < window length - 1 = {}",
            seq.len() as i64 - 1
        )));
    }
    let mut diff = seq.clone();
    for order in 0..=max_test {
        diff = forward_difference(&diff, 1)?;
        if diff.is_identically_zero() {
            return Ok(SlownessOrder::Finite(order));
        }
    }
    Ok(SlownessOrder::Beyond(max_test))
}

/// `delta_n = ln(1 + Delta_n)` truncated at `Delta^l`, where `l` is the
/// slowness order of the operand.
pub fn formal_derivative(seq: &Sequence1D, order: SlownessOrder) -> Result<Sequence1D> {
    let l = match order {
        SlownessOrder::Finite(l) => l,
        SlownessOrder::Beyond(_) => {
            return Err(Error::domain(
                "truncation order required: formal derivative of a sequence with no finite slowness order",
            ))
        }
    };
    if seq.len() <= l {
        return Err(Error::domain(format!(
            "truncation at order {l} needs more than {l} points, got {}",
            seq.len()
        )));
    }
    let out_len = seq.len() - l;
    let mut acc = vec![Rational::zero(); out_len];
    let mut diff = seq.clone();
    for i in 1..=l {
        diff = forward_difference(&diff, 1)?;
        let weight = if i % 2 == 1 { rat(1, i as i64) } else { rat(-1, i as i64) };
        for (a, d) in acc.iter_mut().zip(diff.values.iter()) {
            *a += d * &weight;
        }
    }
    Ok(Sequence1D::derived(seq.start, acc))
}

/// Builds both Stirling tables up to `max_order` from their two-term recurrences.
pub fn stirling_tables(max_order: usize) -> Result<StirlingTable> {
    if max_order == 0 {
        return Err(Error::domain("Stirling tables need max_order >= 1"));
    }
    let mut first = vec![vec![BigInt::zero(); max_order + 1]; max_order + 1];
    let mut second = vec![vec![BigInt::zero(); max_order + 1]; max_order + 1];
    first[0][0] = BigInt::one();
    second[0][0] = BigInt::one();
    for i in 1..=max_order {
        for k in 1..=i {
            // s(i, k) = s(i-1, k-1) - (i-1) s(i-1, k)
            first[i][k] = &first[i - 1][k - 1] - BigInt::from(i - 1) * &first[i - 1][k];
            // S(i, k) = k S(i-1, k) + S(i-1, k-1)
            second[i][k] = BigInt::from(k) * &second[i - 1][k] + &second[i - 1][k - 1];
        }
    }
    Ok(StirlingTable {
        max_order,
        first_kind: first,
        second_kind: second,
    })
}

/// `P_{i,j} = sum_{k=j}^{i} h^k s(i, k) S(k, j)`.
pub fn p_coefficient(i: usize, j: usize, h: &ScaleRatio, tables: &StirlingTable) -> Result<Rational> {
    if j < 1 || j > i || i > tables.max_order {
        return Err(Error::domain(format!(
            "P_{{{i},{j}}} needs 1 <= j <= i <= {}",
            tables.max_order
        )));
    }
    let hv = h.value();
    let mut power = Rational::one();
    for _ in 0..j {
        power *= &hv;
    }
    let mut sum = Rational::zero();
    for k in j..=i {
        let coeff = tables.first(i, k) * tables.second(k, j);
        sum += &power * Rational::from_integer(coeff);
        power *= &hv;
    }
    Ok(sum)
}

/// Fine-lattice difference `Delta_n^j u` of a function sampled on the coarse
/// lattice `n1`, obtained from coarse differences truncated at order `l`:
/// `Delta_n^j u = j! sum_{i=j}^{l} P_{i,j} / i! Delta_{n1}^i u`.
///
/// The output is indexed by the coarse index and the window shrinks by `l`.
pub fn cross_lattice_difference(
    u_slow: &Sequence1D,
    h: &ScaleRatio,
    j: usize,
    l: usize,
) -> Result<Sequence1D> {
    if j == 0 {
        return Err(Error::domain("cross-lattice difference needs j >= 1"));
    }
    if l >= u_slow.len() {
        return Err(Error::domain(format!(
            "slowness order {l} exceeds the available window of {} points",
            u_slow.len()
        )));
    }
    let out_len = u_slow.len() - l;
    let mut acc = vec![Rational::zero(); out_len];
    if l >= j {
        let tables = stirling_tables(l.max(1))?;
        let j_fact = factorial(j);
        let mut diff = forward_difference(u_slow, j)?;
        for i in j..=l {
            if i > j {
                diff = forward_difference(&diff, 1)?;
            }
            let weight = &j_fact * p_coefficient(i, j, h, &tables)? / factorial(i);
            for (a, d) in acc.iter_mut().zip(diff.values.iter()) {
                *a += d * &weight;
            }
        }
    }
    Ok(Sequence1D::derived(u_slow.start, acc))
}

/// Polynomial `sum c[a][b] n^a n1^b` in a fast index `n` and a slow index
/// `n1`, with rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly2 {
    coeffs: Vec<Vec<Rational>>,
}

impl Poly2 {
    /// `coeffs[a][b]` multiplies `n^a n1^b`.
    pub fn new(coeffs: Vec<Vec<Rational>>) -> Self {
        Self { coeffs }.normalized()
    }

    pub fn from_terms(terms: &[(usize, usize, Rational)]) -> Self {
        let da = terms.iter().map(|t| t.0).max().unwrap_or(0);
        let db = terms.iter().map(|t| t.1).max().unwrap_or(0);
        let mut coeffs = vec![vec![Rational::zero(); db + 1]; da + 1];
        for (a, b, c) in terms {
            coeffs[*a][*b] += c;
        }
        Self::new(coeffs)
    }

    /// A dense test polynomial of total degree `degree` with fixed, nonzero
    /// rational coefficients.
    pub fn dense_test(degree: usize) -> Self {
        let mut terms = Vec::new();
        for a in 0..=degree {
            for b in 0..=(degree - a) {
                let sign = if (a + b) % 2 == 0 { 1 } else { -1 };
                terms.push((a, b, rat(sign * (a as i64 + 2 * b as i64 + 1), b as i64 + 1)));
            }
        }
        Self::from_terms(&terms)
    }

    fn normalized(mut self) -> Self {
        if self.coeffs.is_empty() {
            self.coeffs.push(vec![Rational::zero()]);
        }
        let width = self.coeffs.iter().map(Vec::len).max().unwrap_or(1).max(1);
        for row in &mut self.coeffs {
            row.resize(width, Rational::zero());
        }
        self
    }

    fn fast_len(&self) -> usize {
        self.coeffs.len()
    }

    fn slow_len(&self) -> usize {
        self.coeffs[0].len()
    }

    /// Degree in the slow variable.
    pub fn slow_degree(&self) -> usize {
        (0..self.slow_len())
            .rev()
            .find(|&b| self.coeffs.iter().any(|row| !row[b].is_zero()))
            .unwrap_or(0)
    }

    pub fn eval(&self, n: &Rational, n1: &Rational) -> Rational {
        let mut total = Rational::zero();
        let mut n_pow = Rational::one();
        for row in &self.coeffs {
            let mut inner = Rational::zero();
            for c in row.iter().rev() {
                inner = inner * n1 + c;
            }
            total += &n_pow * inner;
            n_pow *= n;
        }
        total
    }

    fn map_rows(&self, f: impl Fn(&[Rational]) -> Vec<Rational>) -> Self {
        Self::new(self.coeffs.iter().map(|row| f(row)).collect())
    }

    /// Partial shift in the slow variable: `u(n; n1 + 1)`.
    pub fn shift_slow(&self) -> Self {
        self.map_rows(shift_univariate)
    }

    /// Partial shift in the fast variable: `u(n + 1; n1)`.
    pub fn shift_fast(&self) -> Self {
        let da = self.fast_len();
        let db = self.slow_len();
        let mut out = vec![vec![Rational::zero(); db]; da];
        for a in 0..da {
            for k in 0..=a {
                let c = binomial(a, k);
                for b in 0..db {
                    out[k][b] += &c * &self.coeffs[a][b];
                }
            }
        }
        Self::new(out)
    }

    /// Partial difference in the slow variable.
    pub fn diff_slow(&self) -> Self {
        self.shift_slow().sub(self)
    }

    fn combine(&self, other: &Self, f: impl Fn(&Rational, &Rational) -> Rational) -> Self {
        let da = self.fast_len().max(other.fast_len());
        let db = self.slow_len().max(other.slow_len());
        let zero = Rational::zero();
        let get = |p: &Self, a: usize, b: usize| -> Rational {
            p.coeffs
                .get(a)
                .and_then(|row| row.get(b))
                .unwrap_or(&zero)
                .clone()
        };
        let coeffs = (0..da)
            .map(|a| (0..db).map(|b| f(&get(self, a, b), &get(other, a, b))).collect())
            .collect();
        Self::new(coeffs)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, |x, y| x - y)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        self.map_rows(|row| row.iter().map(|v| v * c).collect())
    }

    /// `delta_{n1} = ln(1 + Delta_{n1})`, truncated at the slow degree.
    pub fn formal_derivative_slow(&self) -> Self {
        let l = self.slow_degree();
        let mut acc = self.scale(&Rational::zero());
        let mut diff = self.clone();
        for i in 1..=l {
            diff = diff.diff_slow();
            let weight = if i % 2 == 1 { rat(1, i as i64) } else { rat(-1, i as i64) };
            acc = acc.add(&diff.scale(&weight));
        }
        acc
    }

    /// `T_{n1}^{(h)} = exp(h delta_{n1})` as a truncated series.
    pub fn fractional_shift_slow(&self, h: &Rational) -> Self {
        let l = self.slow_degree();
        let mut acc = self.clone();
        let mut term = self.clone();
        for i in 1..=l {
            term = term.formal_derivative_slow().scale(&(h / int(i as i64)));
            acc = acc.add(&term);
        }
        acc
    }
}

fn shift_univariate(coeffs: &[Rational]) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); coeffs.len()];
    for (b, c) in coeffs.iter().enumerate() {
        for (k, slot) in out.iter_mut().enumerate().take(b + 1) {
            *slot += binomial(b, k) * c;
        }
    }
    out
}

/// Checks `T_n u = T_n^{part} T_{n1}^{(h)} u` on `u_n = u(n; n h)` at a set of
/// integer points, in exact arithmetic.
pub fn verify_shift_decomposition(u: &Poly2, h: &ScaleRatio) -> bool {
    let hv = h.value();
    let rhs_poly = u.fractional_shift_slow(&hv).shift_fast();
    (-4i64..=6).all(|n| {
        let nr = int(n);
        let next = int(n + 1);
        let lhs = u.eval(&next, &(&next * &hv));
        let rhs = rhs_poly.eval(&nr, &(&nr * &hv));
        lhs == rhs
    })
}

/// [`verify_shift_decomposition`] on the dense test polynomial of the given
/// total degree.
pub fn verify_shift_decomposition_degree(degree: usize, h: &ScaleRatio) -> bool {
    verify_shift_decomposition(&Poly2::dense_test(degree), h)
}

/// `Delta^j` on the fine lattice evaluated directly from a polynomial in the
/// slow variable: `sum_k (-1)^(j-k) C(j,k) u(n1 + k h)`.
pub fn direct_fine_difference(coeffs: &[Rational], n1: &Rational, h: &Rational, j: usize) -> Rational {
    let eval = |x: &Rational| coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * x + c);
    (0..=j).fold(Rational::zero(), |acc, k| {
        let term = binomial(j, k) * eval(&(n1 + h * int(k as i64)));
        if (j - k).is_multiple_of(2) {
            acc + term
        } else {
            acc - term
        }
    })
}

/// Sum of absolute values of row `i` of the first-kind table; equals `i!`.
pub fn unsigned_first_kind_row_sum(tables: &StirlingTable, i: usize) -> BigInt {
    (0..=i).map(|k| tables.first(i, k).abs()).sum()
}

/// Outcome of [`exact_suite`].
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct SuiteReport {
    pub checks: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }
}

/// Scale ratios exercised by [`exact_suite`].
pub const SUITE_RATIOS: [(u64, u64); 4] = [(1, 1), (1, 2), (1, 3), (2, 5)];

fn suite_poly(degree: usize) -> Vec<Rational> {
    (0..=degree)
        .map(|k| rat(if k % 2 == 0 { 1 } else { -1 } * (k as i64 + 1), k as i64 + 2))
        .collect()
}

fn eval_poly(c: &[Rational], x: &Rational) -> Rational {
    c.iter().rev().fold(Rational::zero(), |acc, v| acc * x + v)
}

/// Exact checks of the difference calculus on polynomial data up to
/// `max_degree`: forward differences, formal derivatives, cross-lattice
/// differences and the shift decomposition for every ratio in [`SUITE_RATIOS`],
/// and the Stirling recurrences.
pub fn exact_suite(max_degree: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::default();
    let start = -3i64;
    let len = max_degree + 10;
    let tables = stirling_tables(max_degree.max(2) + 3)?;
    for i in 1..=tables.max_order() {
        for k in 1..=i {
            let first = tables.first(i, k) == tables.first(i - 1, k - 1) - BigInt::from(i - 1) * tables.first(i - 1, k);
            let second = tables.second(i, k) == BigInt::from(k) * tables.second(i - 1, k) + tables.second(i - 1, k - 1);
            rep.record(first && second, || format!("Stirling recurrence at ({i}, {k})"));
        }
        let mut fact = BigInt::one();
        for f in 2..=i {
            fact *= BigInt::from(f);
        }
        rep.record(unsigned_first_kind_row_sum(&tables, i) == fact, || format!("first-kind row sum {i}"));
    }
    for degree in 0..=max_degree {
        let c = suite_poly(degree);
        let seq = Sequence1D::from_fn(start, len, |n| eval_poly(&c, &int(n)))?;
        for j in 1..=degree + 1 {
            let d = forward_difference(&seq, j)?;
            let ok = (0..d.len()).all(|k| {
                let n = start + k as i64;
                d.values[k] == direct_fine_difference(&c, &int(n), &Rational::one(), j)
            });
            rep.record(ok, || format!("forward difference order {j} on degree {degree}"));
        }
        // derivative polynomial
        let dc: Vec<Rational> = (1..=degree).map(|k| &c[k] * int(k as i64)).collect();
        let fd = formal_derivative(&seq, SlownessOrder::Finite(degree))?;
        let ok = (0..fd.len()).all(|k| fd.values[k] == eval_poly(&dc, &int(start + k as i64)));
        rep.record(ok, || format!("formal derivative on degree {degree}"));
        for &(num, den) in &SUITE_RATIOS {
            let h = ScaleRatio::new(num, den)?;
            let hv = h.value();
            for j in 1..=degree + 1 {
                let cl = cross_lattice_difference(&seq, &h, j, degree)?;
                let ok = (0..cl.len()).all(|k| {
                    let n1 = int(start + k as i64);
                    cl.values[k] == direct_fine_difference(&c, &n1, &hv, j)
                });
                rep.record(ok, || format!("cross-lattice difference j={j}, degree {degree}, h={num}/{den}"));
            }
            rep.record(verify_shift_decomposition_degree(degree, &h), || {
                format!("shift decomposition degree {degree}, h={num}/{den}")
            });
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(start: i64, v: &[i64]) -> Sequence1D {
        Sequence1D::new(start, v.iter().map(|&x| int(x)).collect()).unwrap()
    }

    fn ints(s: &Sequence1D) -> Vec<Rational> {
        s.values().to_vec()
    }

    #[test]
    fn exact_suite_passes_to_degree_five() {
        let rep = exact_suite(5).unwrap();
        assert!(rep.pass(), "{:?}", rep.failures);
        assert!(rep.checks > 100);
    }

    #[test]
    fn forward_differences_of_simple_sequences() {
        assert_eq!(ints(&forward_difference(&seq(0, &[0, 1, 2, 3]), 1).unwrap()), vec![int(1); 3]);
        assert_eq!(ints(&forward_difference(&seq(0, &[0, 1, 4, 9]), 2).unwrap()), vec![int(2); 2]);
        // Delta^3 2^n = 2^n
        assert_eq!(
            ints(&forward_difference(&seq(0, &[1, 2, 4, 8, 16]), 3).unwrap()),
            vec![int(1), int(2)]
        );
    }

    #[test]
    fn forward_difference_rejects_short_window() {
        let err = forward_difference(&seq(0, &[1, 2, 3]), 3).unwrap_err();
        assert!(err.to_string().contains("at least 4 points"));
    }

    #[test]
    fn sequence_needs_two_points() {
        assert!(Sequence1D::new(0, vec![int(1)]).is_err());
    }

    #[test]
    fn slowness_orders() {
        assert_eq!(slowness_order(&seq(0, &[5, 5, 5, 5]), 2).unwrap(), SlownessOrder::Finite(0));
        assert_eq!(slowness_order(&seq(0, &[0, 1, 2, 3]), 2).unwrap(), SlownessOrder::Finite(1));
        let pow2 = Sequence1D::from_fn(0, 8, |n| int(1 << n)).unwrap();
        assert_eq!(slowness_order(&pow2, 5).unwrap(), SlownessOrder::Beyond(5));
        assert!(slowness_order(&pow2, 7).is_err());
    }

    #[test]
    fn formal_derivative_examples() {
        let lin = seq(0, &[0, 1, 2, 3]);
        let d = formal_derivative(&lin, SlownessOrder::Finite(1)).unwrap();
        assert!(d.values().iter().all(|v| *v == int(1)));

        let sq = Sequence1D::from_fn(0, 6, |n| int(n * n)).unwrap();
        let d = formal_derivative(&sq, SlownessOrder::Finite(2)).unwrap();
        assert_eq!(ints(&d), (0..4).map(|n| int(2 * n)).collect::<Vec<_>>());

        let c = seq(3, &[7, 7, 7]);
        let d = formal_derivative(&c, SlownessOrder::Finite(0)).unwrap();
        assert!(d.is_identically_zero());
        assert_eq!(d.len(), 3);

        let err = formal_derivative(&c, SlownessOrder::Beyond(1)).unwrap_err();
        assert!(err.to_string().contains("truncation order required"));
    }

    #[test]
    fn stirling_examples() {
        let t = stirling_tables(6).unwrap();
        assert_eq!(t.second(4, 2), BigInt::from(7));
        assert_eq!(t.first(2, 1), BigInt::from(-1));
        assert_eq!(t.first(2, 2), BigInt::from(1));
        assert_eq!(t.first(1, 1), BigInt::from(1));
        assert_eq!(t.second(1, 1), BigInt::from(1));
        assert!(stirling_tables(0).is_err());
    }

    #[test]
    fn stirling_invariants_hold_row_by_row() {
        let t = stirling_tables(10).unwrap();
        for i in 1..=10 {
            assert_eq!(t.first(i, i), BigInt::one());
            assert_eq!(t.second(i, i), BigInt::one());
            assert_eq!(t.second(i, 1), BigInt::one());
            assert_eq!(unsigned_first_kind_row_sum(&t, i), (1..=i).map(BigInt::from).product());
            for k in 1..=i {
                let s = t.first(i, k);
                let expected_sign = if (i - k) % 2 == 0 { 1 } else { -1 };
                assert_eq!(s.signum(), BigInt::from(expected_sign));
            }
        }
    }

    #[test]
    fn p_coefficient_examples() {
        let t = stirling_tables(6).unwrap();
        let h = ScaleRatio::new(1, 2).unwrap();
        let hv = h.value();
        assert_eq!(p_coefficient(1, 1, &h, &t).unwrap(), hv.clone());
        assert_eq!(p_coefficient(2, 1, &h, &t).unwrap(), &hv * &hv - &hv);
        for i in 1..=6 {
            let mut hp = Rational::one();
            for _ in 0..i {
                hp *= &hv;
            }
            assert_eq!(p_coefficient(i, i, &h, &t).unwrap(), hp);
        }
        assert!(p_coefficient(2, 3, &h, &t).is_err());
        assert!(p_coefficient(7, 1, &h, &t).is_err());
    }

    // With unsigned first-kind numbers P_{2,1} would be h^2 + h, which breaks
    // the two-lattice identity on u = n1^2.
    #[test]
    fn signed_convention_is_required() {
        let t = stirling_tables(4).unwrap();
        let h = ScaleRatio::new(1, 2).unwrap();
        let hv = h.value();
        let unsigned = &hv * &hv + &hv;
        assert_ne!(p_coefficient(2, 1, &h, &t).unwrap(), unsigned);
        let u = Sequence1D::from_fn(0, 6, |n| int(n * n)).unwrap();
        let d = cross_lattice_difference(&u, &h, 1, 2).unwrap();
        // Delta_n u at n1 = 2 n1 h + h^2 = n1 + 1/4
        for (k, v) in d.values().iter().enumerate() {
            assert_eq!(*v, int(k as i64) + rat(1, 4));
        }
    }

    #[test]
    fn cross_lattice_examples() {
        let h = ScaleRatio::new(1, 2).unwrap();
        let lin = Sequence1D::from_fn(0, 5, int).unwrap();
        let d = cross_lattice_difference(&lin, &h, 1, 1).unwrap();
        assert!(d.values().iter().all(|v| *v == rat(1, 2)));

        let c = seq(0, &[4, 4, 4, 4]);
        for j in 1..3 {
            let d = cross_lattice_difference(&c, &h, j, 0).unwrap();
            assert!(d.is_identically_zero());
        }
        assert!(cross_lattice_difference(&c, &h, 1, 4).is_err());
    }

    #[test]
    fn scale_ratio_validation() {
        assert!(ScaleRatio::new(3, 2).is_err());
        assert!(ScaleRatio::new(0, 2).is_err());
        assert!(ScaleRatio::new(2, 6).unwrap().is_sublattice());
        assert!(!ScaleRatio::new(2, 5).unwrap().is_sublattice());
    }

    #[test]
    fn shift_decomposition_examples() {
        let h3 = ScaleRatio::new(1, 3).unwrap();
        let h2 = ScaleRatio::new(1, 2).unwrap();
        let linear = Poly2::from_terms(&[(1, 0, int(1)), (0, 1, int(1))]);
        assert!(verify_shift_decomposition(&linear, &h3));
        let slow_sq = Poly2::from_terms(&[(0, 2, int(1))]);
        assert!(verify_shift_decomposition(&slow_sq, &h3));
        let mixed = Poly2::from_terms(&[(1, 1, int(1))]);
        assert!(verify_shift_decomposition(&mixed, &h2));
    }

    #[test]
    fn shift_decomposition_detects_wrong_ratio() {
        // Using the wrong ratio in the slow shift must break the identity.
        let u = Poly2::from_terms(&[(0, 2, int(1)), (1, 1, int(2))]);
        let h = ScaleRatio::new(1, 3).unwrap();
        let wrong = u.fractional_shift_slow(&rat(1, 2)).shift_fast();
        let hv = h.value();
        let n = int(2);
        let next = int(3);
        assert_ne!(u.eval(&next, &(&next * &hv)), wrong.eval(&n, &(&n * &hv)));
    }
}
