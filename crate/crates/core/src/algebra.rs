//! The *-algebra generated by `alpha, gamma` as normal-ordered polynomials,
//! and its left-regular (GNS) action on the truncated Peter-Weyl space.
//!
//! # Structure constants
//!
//! Left multiplication by a spin-1/2 basis element acts as
//!
//! ```text
//! t~^{1/2}_{r,s} t~^l_{i,j} = sum_{m = l +- 1/2} C^{1/2,l,m}_{r,i,i+r} C^{1/2,l,m}_{s,j,j+s}
//!                              * sqrt([2]_q [2l+1]_q / [2m+1]_q) * t~^m_{i+r,j+s}
//! ```
//!
//! with the coefficients of [`crate::qarith::cg_half`]. The rule admits a
//! monomial correction `q^{phi}` with `phi` affine in the labels
//! ([`QPowerCorrection`]); with the shipped coefficients the relation battery
//! passes at `phi = 0`, and a nonzero `phi` breaks it.
//!
//! # Generator identification
//!
//! The scalars are fitted from the relations when a [`GeneratorTable`] is
//! built (alpha and gamma scalars taken positive). The result is
//!
//! ```text
//! t~^{1/2}_{ 1/2, 1/2} =  [2]_q^{1/2} q^{-1/2} alpha
//! t~^{1/2}_{-1/2, 1/2} =  [2]_q^{1/2} q^{1/2}  gamma
//! t~^{1/2}_{ 1/2,-1/2} = -[2]_q^{1/2} q^{1/2}  gamma^*
//! t~^{1/2}_{-1/2,-1/2} =  [2]_q^{1/2} q^{1/2}  alpha^*
//! ```
//!
//! i.e. the unnormalized fundamental corepresentation is
//! `[[alpha, -q gamma^*], [gamma, alpha^*]]` (rows `i = 1/2, -1/2`).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::halfint::HalfInteger;
use crate::peterweyl::{HilbertVector, PWIndex, SparseOperator, Truncation};
use crate::qarith::{cg_half, Branch, DeformationParameter};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Absolute tolerance of the relation battery.
pub const BATTERY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Letter {
    Alpha,
    AlphaStar,
    Gamma,
    GammaStar,
}

impl Letter {
    pub const ALL: [Letter; 4] = [
        Letter::Alpha,
        Letter::AlphaStar,
        Letter::Gamma,
        Letter::GammaStar,
    ];

    pub fn star(self) -> Letter {
        match self {
            Letter::Alpha => Letter::AlphaStar,
            Letter::AlphaStar => Letter::Alpha,
            Letter::Gamma => Letter::GammaStar,
            Letter::GammaStar => Letter::Gamma,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Letter::Alpha => "a",
            Letter::AlphaStar => "a*",
            Letter::Gamma => "g",
            Letter::GammaStar => "g*",
        }
    }
}

/// A word in the generators, read left to right (the rightmost letter acts
/// first).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn adjoint(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.star()).collect())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<&str> = self.0.iter().map(|l| l.symbol()).collect();
        f.write_str(&parts.join(" "))
    }
}

impl FromStr for Word {
    type Err = Error;

    /// Parses letters `a`, `a*`, `g`, `g*` (or `α`, `γ`), optionally
    /// separated by whitespace; `1` is the empty word.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t == "1" || t.is_empty() {
            return Ok(Word::default());
        }
        let mut out = Vec::new();
        let mut chars = t.chars().filter(|c| !c.is_whitespace()).peekable();
        while let Some(c) = chars.next() {
            let base = match c {
                'a' | 'α' => Letter::Alpha,
                'g' | 'γ' => Letter::Gamma,
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "unexpected character {c:?} in word {s:?}"
                    )))
                }
            };
            if chars.peek() == Some(&'*') {
                chars.next();
                out.push(base.star());
            } else {
                out.push(base);
            }
        }
        Ok(Word(out))
    }
}

/// A normal-form monomial: `alpha^a gamma^b (gamma^*)^c` for `alpha_power = a >= 0`,
/// `(alpha^*)^{-a} gamma^b (gamma^*)^c` for `a < 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NormalWord {
    pub alpha_power: i32,
    pub gamma: u32,
    pub gamma_star: u32,
}

impl NormalWord {
    pub const UNIT: NormalWord = NormalWord {
        alpha_power: 0,
        gamma: 0,
        gamma_star: 0,
    };

    pub fn new(alpha_power: i32, gamma: u32, gamma_star: u32) -> Self {
        NormalWord {
            alpha_power,
            gamma,
            gamma_star,
        }
    }

    pub fn degree(&self) -> usize {
        self.alpha_power.unsigned_abs() as usize + self.gamma as usize + self.gamma_star as usize
    }

    pub fn word(&self) -> Word {
        let a = if self.alpha_power >= 0 {
            Letter::Alpha
        } else {
            Letter::AlphaStar
        };
        let mut w = vec![a; self.alpha_power.unsigned_abs() as usize];
        w.extend(std::iter::repeat_n(Letter::Gamma, self.gamma as usize));
        w.extend(std::iter::repeat_n(Letter::GammaStar, self.gamma_star as usize));
        Word(w)
    }

    /// All normal-form monomials of degree `<= max_degree`.
    pub fn all_up_to(max_degree: usize) -> Vec<NormalWord> {
        let d = max_degree as i32;
        let mut out = Vec::new();
        for a in -d..=d {
            let rest = d - a.abs();
            for b in 0..=rest {
                for c in 0..=(rest - b) {
                    out.push(NormalWord::new(a, b as u32, c as u32));
                }
            }
        }
        out.sort();
        out
    }
}

impl fmt::Display for NormalWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.word().fmt(f)
    }
}

/// A finite linear combination of normal-form monomials.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NCPolynomial {
    terms: BTreeMap<NormalWord, Complex64>,
}

impl NCPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial(NormalWord::UNIT, ONE)
    }

    pub fn monomial(w: NormalWord, c: Complex64) -> Self {
        let mut p = Self::zero();
        p.add_term(w, c);
        p
    }

    /// The normal form of a single word.
    pub fn from_word(w: &Word, q: &DeformationParameter) -> Self {
        normal_order(&[(ONE, w.clone())], q)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&NormalWord, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, w: &NormalWord) -> Complex64 {
        self.terms.get(w).copied().unwrap_or(ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(|w| w.degree()).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, w: NormalWord, c: Complex64) {
        let slot = self.terms.entry(w).or_insert(ZERO);
        *slot += c;
        if *slot == ZERO {
            self.terms.remove(&w);
        }
    }

    /// Drop coefficients with modulus `<= tol`.
    pub fn pruned(mut self, tol: f64) -> Self {
        self.terms.retain(|_, c| c.norm() > tol);
        self
    }

    pub fn add(&self, other: &NCPolynomial) -> NCPolynomial {
        let mut out = self.clone();
        for (w, c) in other.terms() {
            out.add_term(*w, *c);
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> NCPolynomial {
        let mut out = NCPolynomial::zero();
        for (w, c) in self.terms() {
            out.add_term(*w, c * s);
        }
        out
    }

    /// Normal-ordered product `self * other`.
    pub fn mul(&self, other: &NCPolynomial, q: &DeformationParameter) -> NCPolynomial {
        let mut expr = Vec::new();
        for (w1, c1) in self.terms() {
            for (w2, c2) in other.terms() {
                let mut letters = w1.word().0;
                letters.extend(w2.word().0);
                expr.push((c1 * c2, Word(letters)));
            }
        }
        normal_order(&expr, q)
    }

    /// Normal-ordered adjoint.
    pub fn adjoint(&self, q: &DeformationParameter) -> NCPolynomial {
        let expr: Vec<_> = self
            .terms()
            .map(|(w, c)| (c.conj(), w.word().adjoint()))
            .collect();
        normal_order(&expr, q)
    }

    /// Largest coefficient distance to `other`.
    pub fn max_abs_diff(&self, other: &NCPolynomial) -> f64 {
        let mut keys: Vec<_> = self.terms.keys().chain(other.terms.keys()).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|w| (self.coefficient(w) - other.coefficient(w)).norm())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for NCPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .terms()
            .map(|(w, c)| format!("({}) {}", c, w))
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

/// One rewrite step at position `pos`, if the pair there is a redex.
fn rewrite_pair(x: Letter, y: Letter, q: f64) -> Option<Vec<(f64, Vec<Letter>)>> {
    use Letter::*;
    let r = match (x, y) {
        (Gamma, Alpha) => vec![(q.recip(), vec![Alpha, Gamma])],
        (GammaStar, Alpha) => vec![(q.recip(), vec![Alpha, GammaStar])],
        (Gamma, AlphaStar) => vec![(q, vec![AlphaStar, Gamma])],
        (GammaStar, AlphaStar) => vec![(q, vec![AlphaStar, GammaStar])],
        (GammaStar, Gamma) => vec![(1.0, vec![Gamma, GammaStar])],
        (AlphaStar, Alpha) => vec![(1.0, vec![]), (-1.0, vec![Gamma, GammaStar])],
        (Alpha, AlphaStar) => vec![(1.0, vec![]), (-q * q, vec![Gamma, GammaStar])],
        _ => return None,
    };
    Some(r)
}

fn redexes(w: &[Letter]) -> Vec<usize> {
    (0..w.len().saturating_sub(1))
        .filter(|&k| rewrite_pair(w[k], w[k + 1], 2.0).is_some())
        .collect()
}

fn as_normal(w: &[Letter]) -> NormalWord {
    let mut nw = NormalWord::UNIT;
    for l in w {
        match l {
            Letter::Alpha => nw.alpha_power += 1,
            Letter::AlphaStar => nw.alpha_power -= 1,
            Letter::Gamma => nw.gamma += 1,
            Letter::GammaStar => nw.gamma_star += 1,
        }
    }
    nw
}

/// Rewrite to normal form, choosing among available redexes with `choose`
/// (given the redex positions, return an index into that list).
pub fn normal_order_with(
    expr: &[(Complex64, Word)],
    q: &DeformationParameter,
    mut choose: impl FnMut(&[usize]) -> usize,
) -> NCPolynomial {
    let qq = q.q();
    let mut out = NCPolynomial::zero();
    let mut stack: Vec<(Complex64, Vec<Letter>)> =
        expr.iter().map(|(c, w)| (*c, w.0.clone())).collect();
    while let Some((c, w)) = stack.pop() {
        if c == ZERO {
            continue;
        }
        let spots = redexes(&w);
        if spots.is_empty() {
            out.add_term(as_normal(&w), c);
            continue;
        }
        let k = spots[choose(&spots).min(spots.len() - 1)];
        for (coef, middle) in rewrite_pair(w[k], w[k + 1], qq).unwrap() {
            let mut next = Vec::with_capacity(w.len());
            next.extend_from_slice(&w[..k]);
            next.extend(middle);
            next.extend_from_slice(&w[k + 2..]);
            stack.push((c * coef, next));
        }
    }
    out
}

/// Normal form using the leftmost redex at every step.
pub fn normal_order(expr: &[(Complex64, Word)], q: &DeformationParameter) -> NCPolynomial {
    normal_order_with(expr, q, |_| 0)
}

/// An affine exponent `phi` multiplying each structure constant by `q^phi`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QPowerCorrection {
    pub constant: f64,
    pub l: f64,
    pub m: f64,
    pub r: f64,
    pub s: f64,
    pub i: f64,
    pub j: f64,
}

impl QPowerCorrection {
    fn exponent(&self, l: HalfInteger, m: HalfInteger, r: HalfInteger, s: HalfInteger, i: HalfInteger, j: HalfInteger) -> f64 {
        self.constant
            + self.l * l.to_f64()
            + self.m * m.to_f64()
            + self.r * r.to_f64()
            + self.s * s.to_f64()
            + self.i * i.to_f64()
            + self.j * j.to_f64()
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }
}

/// One of the four spin-1/2 Peter-Weyl elements `t~^{1/2}_{r,s}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinHalfElement {
    pub r: HalfInteger,
    pub s: HalfInteger,
}

impl SpinHalfElement {
    pub const ALL: [SpinHalfElement; 4] = [
        SpinHalfElement::new(1, 1),
        SpinHalfElement::new(-1, 1),
        SpinHalfElement::new(1, -1),
        SpinHalfElement::new(-1, -1),
    ];

    /// From doubled weights, each `+-1`.
    pub const fn new(r2: i64, s2: i64) -> Self {
        SpinHalfElement {
            r: HalfInteger::from_doubled(r2),
            s: HalfInteger::from_doubled(s2),
        }
    }

    /// The witness `t~^{1/2}_{1/2,1/2}`.
    pub const WITNESS: SpinHalfElement = SpinHalfElement::new(1, 1);

    pub fn index(&self) -> PWIndex {
        PWIndex {
            n: HalfInteger::HALF,
            i: self.r,
            j: self.s,
        }
    }

    /// The generator letter this element is proportional to.
    pub fn letter(&self) -> Letter {
        match (self.r.doubled(), self.s.doubled()) {
            (1, 1) => Letter::Alpha,
            (-1, 1) => Letter::Gamma,
            (1, -1) => Letter::GammaStar,
            _ => Letter::AlphaStar,
        }
    }
}

impl fmt::Display for SpinHalfElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t~^(1/2)_({},{})", self.r, self.s)
    }
}

/// Structure constant of `t~^{1/2}_{r,s} t~^l_{i,j}` onto `t~^m_{i+r,j+s}`.
pub fn structure_constant(
    el: SpinHalfElement,
    l: HalfInteger,
    i: HalfInteger,
    j: HalfInteger,
    branch: Branch,
    q: &DeformationParameter,
    correction: &QPowerCorrection,
) -> f64 {
    let m = branch.total(l);
    if m < HalfInteger::ZERO {
        return 0.0;
    }
    let (lf, mf) = (l.to_f64(), m.to_f64());
    let nu = (q.qn(2.0) * q.qn(2.0 * lf + 1.0) / q.qn(2.0 * mf + 1.0)).sqrt();
    let c = cg_half(el.r, branch, l, i, q) * cg_half(el.s, branch, l, j, q) * nu;
    if correction.is_zero() || c == 0.0 {
        c
    } else {
        c * q.q().powf(correction.exponent(l, m, el.r, el.s, i, j))
    }
}

/// Left multiplication by `t~^{1/2}_{r,s}` on the truncation (unvalidated).
pub fn raw_generator_operator(
    el: SpinHalfElement,
    trunc: Truncation,
    q: &DeformationParameter,
    correction: &QPowerCorrection,
) -> SparseOperator {
    let mut trip = Vec::with_capacity(2 * trunc.dim());
    for (col, idx) in trunc.enumerate().into_iter().enumerate() {
        for branch in [Branch::Plus, Branch::Minus] {
            let target = PWIndex {
                n: branch.total(idx.n),
                i: idx.i + el.r,
                j: idx.j + el.s,
            };
            let Some(row) = trunc.position(target) else {
                continue;
            };
            let c = structure_constant(el, idx.n, idx.i, idx.j, branch, q, correction);
            if c != 0.0 {
                trip.push((row, col, Complex64::new(c, 0.0)));
            }
        }
    }
    SparseOperator::from_triplets(trunc, HalfInteger::HALF, trip)
}

/// Named residuals of the relation battery.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub residuals: Vec<(String, f64)>,
}

impl ValidationReport {
    pub fn worst(&self) -> Option<(&str, f64)> {
        self.residuals
            .iter()
            .map(|(n, r)| (n.as_str(), *r))
            .max_by(|a, b| {
                let key = |r: f64| if r.is_nan() { f64::INFINITY } else { r };
                key(a.1).total_cmp(&key(b.1))
            })
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.residuals.iter().all(|(_, r)| *r < tol)
    }
}

/// The four generator operators for one `(q, truncation)`, with their fitted
/// identification against `alpha, gamma, alpha^*, gamma^*`.
#[derive(Clone, Debug)]
pub struct GeneratorTable {
    q: DeformationParameter,
    trunc: Truncation,
    correction: QPowerCorrection,
    /// `t~^{1/2}_{r,s} = scalar * letter`, in [`SpinHalfElement::ALL`] order.
    scalars: [f64; 4],
    elements: [SparseOperator; 4],
    letters: [SparseOperator; 4],
    report: ValidationReport,
}

// Slot of each letter; equals the position of its element in `SpinHalfElement::ALL`.
fn letter_slot(l: Letter) -> usize {
    match l {
        Letter::Alpha => 0,
        Letter::Gamma => 1,
        Letter::GammaStar => 2,
        Letter::AlphaStar => 3,
    }
}

fn element_slot(el: SpinHalfElement) -> usize {
    letter_slot(el.letter())
}

/// Smallest truncation on which the two-letter battery has a nonempty,
/// informative safe shell.
const MIN_VALIDATION_LMAX_DOUBLED: i64 = 6;

impl GeneratorTable {
    pub fn new(q: DeformationParameter, trunc: Truncation) -> Result<Self> {
        Self::with_correction(q, trunc, QPowerCorrection::default())
    }

    /// Build, fit scalars, and run the relation battery; fails with
    /// [`Error::ValidationFailure`] naming the worst identity.
    pub fn with_correction(
        q: DeformationParameter,
        trunc: Truncation,
        correction: QPowerCorrection,
    ) -> Result<Self> {
        let check = if trunc.lmax().doubled() < MIN_VALIDATION_LMAX_DOUBLED {
            Truncation::from_doubled(MIN_VALIDATION_LMAX_DOUBLED)?
        } else {
            trunc
        };
        let (scalars, report) = fit_and_validate(&q, check, &correction);
        if let Some((name, r)) = report.worst() {
            if !(r < BATTERY_TOLERANCE) {
                return Err(Error::ValidationFailure {
                    identity: name.to_string(),
                    residual: r,
                });
            }
        }
        let elements =
            SpinHalfElement::ALL.map(|el| raw_generator_operator(el, trunc, &q, &correction));
        let letters: [SparseOperator; 4] = std::array::from_fn(|k| {
            elements[k].scaled(Complex64::new(scalars[k].recip(), 0.0))
        });
        Ok(GeneratorTable {
            q,
            trunc,
            correction,
            scalars,
            elements,
            letters,
            report,
        })
    }

    pub fn q(&self) -> &DeformationParameter {
        &self.q
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn correction(&self) -> &QPowerCorrection {
        &self.correction
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    /// The scalar `c` with `t~^{1/2}_{r,s} = c * letter`.
    pub fn scalar(&self, el: SpinHalfElement) -> f64 {
        self.scalars[element_slot(el)]
    }

    pub fn element_operator(&self, el: SpinHalfElement) -> &SparseOperator {
        &self.elements[element_slot(el)]
    }

    pub fn letter_operator(&self, l: Letter) -> &SparseOperator {
        &self.letters[letter_slot(l)]
    }

    fn check_depth(&self, word_len: usize) -> Result<()> {
        let needed = HalfInteger::from_doubled(word_len as i64);
        if needed > self.trunc.lmax() {
            return Err(Error::EmptySafeShell {
                word_len,
                needed,
                lmax: self.trunc.lmax(),
            });
        }
        Ok(())
    }

    pub fn word_operator(&self, w: &Word) -> Result<SparseOperator> {
        self.check_depth(w.len())?;
        let mut op = SparseOperator::identity(self.trunc);
        for l in w.0.iter().rev() {
            op = self.letter_operator(*l).compose(&op);
        }
        Ok(op)
    }

    /// `mult_operator`: left multiplication by `p`, depth `max degree / 2`.
    pub fn mult_operator(&self, p: &NCPolynomial) -> Result<SparseOperator> {
        self.check_depth(p.max_degree())?;
        let mut acc = SparseOperator::zero(self.trunc);
        for (w, c) in p.terms() {
            let op = self.word_operator(&w.word())?;
            acc = acc.linear_combination(ONE, &op, *c);
        }
        Ok(acc)
    }

    /// Apply a word letter by letter (rightmost first).
    pub fn apply_word(&self, w: &Word, v: &HilbertVector) -> HilbertVector {
        let mut out = v.clone();
        for l in w.0.iter().rev() {
            out = self.letter_operator(*l).apply(&out);
        }
        out
    }

    /// `p * v`; exact when `v` is supported on spins `<= Lmax - deg(p)/2`.
    pub fn apply_polynomial(&self, p: &NCPolynomial, v: &HilbertVector) -> HilbertVector {
        let mut out = HilbertVector::zeros(self.trunc);
        for (w, c) in p.terms() {
            out.axpy(*c, &self.apply_word(&w.word(), v));
        }
        out
    }

    /// `psi(p) = <1, p 1>`.
    pub fn haar_state(&self, p: &NCPolynomial) -> Result<Complex64> {
        self.check_depth(p.max_degree())?;
        let vac = HilbertVector::basis(self.trunc, PWIndex::vacuum()).expect("vacuum");
        Ok(self.apply_polynomial(p, &vac).get(PWIndex::vacuum()))
    }
}

/// Fit the four scalars and evaluate every identity of the battery.
fn fit_and_validate(
    q: &DeformationParameter,
    trunc: Truncation,
    correction: &QPowerCorrection,
) -> ([f64; 4], ValidationReport) {
    let qq = q.q();
    let el = SpinHalfElement::ALL.map(|e| raw_generator_operator(e, trunc, q, correction));
    let (t_a, t_g, t_gs, t_as) = (&el[0], &el[1], &el[2], &el[3]);

    // alpha = t_a / s_a, gamma = t_g / s_g. With u = s_a^{-2}, w = s_g^{-2}:
    //   X u + Y w = 1,   Z u + q^2 Y w = 1   on the diagonal of the safe shell.
    let x = t_a.adjoint().compose(t_a);
    let y = t_g.adjoint().compose(t_g);
    let z = t_a.compose(&t_a.adjoint());
    let safe = trunc.shell_range(trunc.safe_shell(HalfInteger::ONE).unwrap_or(HalfInteger::ZERO));
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in safe {
        for (cu, cw) in [
            (x.entry(k, k).re, y.entry(k, k).re),
            (z.entry(k, k).re, qq * qq * y.entry(k, k).re),
        ] {
            a11 += cu * cu;
            a12 += cu * cw;
            a22 += cw * cw;
            b1 += cu;
            b2 += cw;
        }
    }
    let det = a11 * a22 - a12 * a12;
    let u = (b1 * a22 - b2 * a12) / det;
    let w = (a11 * b2 - a12 * b1) / det;
    let s_a = u.recip().sqrt();
    let s_g = w.recip().sqrt();

    let alpha = t_a.scaled(Complex64::new(s_a.recip(), 0.0));
    let gamma = t_g.scaled(Complex64::new(s_g.recip(), 0.0));
    let alpha_adj = alpha.adjoint();
    let gamma_adj = gamma.adjoint();
    let proj = |target: &SparseOperator, basis: &SparseOperator| -> f64 {
        let num: f64 = basis.entries().map(|(r, c, v)| (v.conj() * target.entry(r, c)).re).sum();
        let den: f64 = basis.entries().map(|(_, _, v)| v.norm_sqr()).sum();
        num / den
    };
    let s_gs = proj(t_gs, &gamma_adj);
    let s_as = proj(t_as, &alpha_adj);
    let gamma_star = t_gs.scaled(Complex64::new(s_gs.recip(), 0.0));
    let alpha_star = t_as.scaled(Complex64::new(s_as.recip(), 0.0));

    let id = SparseOperator::identity(trunc);
    let c = |x: f64| Complex64::new(x, 0.0);
    let res = |a: &SparseOperator, b: &SparseOperator| a.safe_residual(b).unwrap_or(f64::NAN);
    let sum = |a: &SparseOperator, ca: f64, b: &SparseOperator, cb: f64| a.linear_combination(c(ca), b, c(cb));

    let as_a = alpha_star.compose(&alpha);
    let a_as = alpha.compose(&alpha_star);
    let gs_g = gamma_star.compose(&gamma);
    let g_gs = gamma.compose(&gamma_star);
    let residuals = vec![
        ("a* a + g* g = 1".to_string(), res(&sum(&as_a, 1.0, &gs_g, 1.0), &id)),
        ("a a* + q^2 g* g = 1".to_string(), res(&sum(&a_as, 1.0, &gs_g, qq * qq), &id)),
        ("g* g = g g*".to_string(), res(&gs_g, &g_gs)),
        (
            "a g = q g a".to_string(),
            res(&alpha.compose(&gamma), &gamma.compose(&alpha).scaled(c(qq))),
        ),
        (
            "a g* = q g* a".to_string(),
            res(&alpha.compose(&gamma_star), &gamma_star.compose(&alpha).scaled(c(qq))),
        ),
        (
            "g* a* = q a* g*".to_string(),
            res(&gamma_star.compose(&alpha_star), &alpha_star.compose(&gamma_star).scaled(c(qq))),
        ),
        (
            "g a* = q a* g".to_string(),
            res(&gamma.compose(&alpha_star), &alpha_star.compose(&gamma).scaled(c(qq))),
        ),
        ("a* = (a)^*".to_string(), res(&alpha_star, &alpha_adj)),
        ("g* = (g)^*".to_string(), res(&gamma_star, &gamma_adj)),
    ];
    (
        [s_a, s_g, s_gs, s_as],
        ValidationReport { residuals },
    )
}

/// `generator_operator`: validated left multiplication by `t~^{1/2}_{r,s}`.
pub fn generator_operator(
    el: SpinHalfElement,
    trunc: Truncation,
    q: &DeformationParameter,
) -> Result<SparseOperator> {
    let table = GeneratorTable::new(*q, trunc)?;
    Ok(table.element_operator(el).clone())
}

/// `mult_operator` on a fresh table.
pub fn mult_operator(
    p: &NCPolynomial,
    trunc: Truncation,
    q: &DeformationParameter,
) -> Result<SparseOperator> {
    GeneratorTable::new(*q, trunc)?.mult_operator(p)
}

/// `haar_state` on a fresh table.
pub fn haar_state(p: &NCPolynomial, trunc: Truncation, q: &DeformationParameter) -> Result<Complex64> {
    GeneratorTable::new(*q, trunc)?.haar_state(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn d(q: f64) -> DeformationParameter {
        DeformationParameter::new(q).unwrap()
    }

    fn t(lmax2: i64) -> Truncation {
        Truncation::from_doubled(lmax2).unwrap()
    }

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn parse_words() {
        assert_eq!(w("a* a"), Word(vec![Letter::AlphaStar, Letter::Alpha]));
        assert_eq!(w("ag*g"), Word(vec![Letter::Alpha, Letter::GammaStar, Letter::Gamma]));
        assert_eq!(w("1"), Word::default());
        assert_eq!(w("α γ*").to_string(), "a g*");
        assert!("ab".parse::<Word>().is_err());
    }

    #[test]
    fn normal_order_examples() {
        let q = d(1.7);
        let ga = NCPolynomial::from_word(&w("g a"), &q);
        assert!(ga.max_abs_diff(&NCPolynomial::monomial(NormalWord::new(1, 1, 0), c(1.0 / 1.7))) < 1e-15);

        let asa = NCPolynomial::from_word(&w("a* a"), &q);
        let expect = NCPolynomial::one().add(&NCPolynomial::monomial(NormalWord::new(0, 1, 1), c(-1.0)));
        assert!(asa.max_abs_diff(&expect) < 1e-15);

        // a a* g - g + q^2 g* g g  ==  0
        let expr = vec![
            (c(1.0), w("a a* g")),
            (c(-1.0), w("g")),
            (c(1.7 * 1.7), w("g* g g")),
        ];
        assert!(normal_order(&expr, &q).pruned(1e-13).is_zero());
    }

    #[test]
    fn normal_forms_are_fixed_points() {
        let q = d(1.3);
        for nw in NormalWord::all_up_to(4) {
            let p = NCPolynomial::from_word(&nw.word(), &q);
            assert_eq!(p, NCPolynomial::monomial(nw, c(1.0)));
        }
        assert_eq!(NormalWord::all_up_to(1).len(), 5);
    }

    #[test]
    fn rewriting_is_confluent() {
        let q = d(1.2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..150 {
            let len = rng.gen_range(0..=6);
            let word = Word((0..len).map(|_| Letter::ALL[rng.gen_range(0..4)]).collect());
            let reference = NCPolynomial::from_word(&word, &q);
            let mut inner = ChaCha8Rng::seed_from_u64(rng.gen::<u64>());
            let other = normal_order_with(&[(c(1.0), word.clone())], &q, |s| inner.gen_range(0..s.len()));
            assert!(reference.max_abs_diff(&other) < 1e-12, "{word}");
        }
    }

    #[test]
    fn adjoint_is_an_involution() {
        let q = d(1.4);
        let p = NCPolynomial::from_word(&w("g a* g* a"), &q).add(&NCPolynomial::from_word(&w("a g"), &q).scale(Complex64::new(0.5, -2.0)));
        let back = p.adjoint(&q).adjoint(&q);
        assert!(back.max_abs_diff(&p) < 1e-12);
    }

    #[test]
    fn cyclic_vector_maps_to_spin_half_elements() {
        let q = d(1.2);
        let tr = t(4);
        let vac = HilbertVector::basis(tr, PWIndex::vacuum()).unwrap();
        for el in SpinHalfElement::ALL {
            let op = raw_generator_operator(el, tr, &q, &QPowerCorrection::default());
            assert_eq!(op.shell_depth(), HalfInteger::HALF);
            let out = op.apply(&vac);
            let expect = HilbertVector::basis(tr, el.index()).unwrap();
            for (a, b) in out.coeffs().iter().zip(expect.coeffs()) {
                assert!((a - b).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn generator_operators_shift_by_their_weights() {
        let q = d(2.0);
        let tr = t(6);
        for el in SpinHalfElement::ALL {
            let op = raw_generator_operator(el, tr, &q, &QPowerCorrection::default());
            for (r, col, _) in op.entries() {
                let (a, b) = (tr.index_at(col), tr.index_at(r));
                assert_eq!((b.n - a.n).abs(), HalfInteger::HALF);
                assert_eq!(b.i - a.i, el.r);
                assert_eq!(b.j - a.j, el.s);
            }
            // at most two outputs per input cell
            let mut per_col = vec![0; tr.dim()];
            op.entries().for_each(|(_, col, _)| per_col[col] += 1);
            assert!(per_col.into_iter().all(|k| k <= 2));
        }
    }

    #[test]
    fn fitted_scalars_match_closed_forms() {
        for q in [1.2, 2.0] {
            let dq = d(q);
            let table = GeneratorTable::new(dq, t(12)).unwrap();
            let r2 = dq.qn(2.0).sqrt();
            let expect = [
                (SpinHalfElement::new(1, 1), r2 / q.sqrt()),
                (SpinHalfElement::new(-1, 1), r2 * q.sqrt()),
                (SpinHalfElement::new(1, -1), -r2 * q.sqrt()),
                (SpinHalfElement::new(-1, -1), r2 * q.sqrt()),
            ];
            for (el, s) in expect {
                assert!((table.scalar(el) - s).abs() < 1e-12, "{el}: {} vs {s}", table.scalar(el));
            }
            assert!(table.report().passes(BATTERY_TOLERANCE));
        }
    }

    #[test]
    fn small_truncations_still_validate() {
        let table = GeneratorTable::new(d(1.2), t(1)).unwrap();
        assert_eq!(table.truncation().dim(), 5);
        assert!(table.haar_state(&NCPolynomial::one()).is_ok());
    }

    #[test]
    fn nonzero_q_power_correction_fails_battery() {
        let bad = QPowerCorrection { i: 0.5, ..Default::default() };
        match GeneratorTable::with_correction(d(1.2), t(8), bad) {
            Err(Error::ValidationFailure { identity, residual }) => {
                assert!(residual > 1e-3, "{identity}: {residual}");
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn mult_operator_examples() {
        let q = d(1.2);
        let table = GeneratorTable::new(q, t(8)).unwrap();
        let id = table.mult_operator(&NCPolynomial::one()).unwrap();
        assert_eq!(id.shell_depth(), HalfInteger::ZERO);
        assert_eq!(id.safe_residual(&SparseOperator::identity(t(8))), Some(0.0));

        let gsg = table.mult_operator(&NCPolynomial::from_word(&w("g* g"), &q)).unwrap();
        assert_eq!(gsg.shell_depth(), HalfInteger::ONE);
        let tr = table.truncation();
        for (r, col, v) in gsg.entries() {
            if v.norm() < 1e-14 {
                continue;
            }
            let (a, b) = (tr.index_at(col), tr.index_at(r));
            assert_eq!((a.i, a.j), (b.i, b.j));
        }
    }

    #[test]
    fn empty_safe_shell_is_an_error() {
        let q = d(1.2);
        let table = GeneratorTable::new(q, t(2)).unwrap();
        let p = NCPolynomial::from_word(&w("a a g"), &q);
        assert!(matches!(table.mult_operator(&p), Err(Error::EmptySafeShell { .. })));
        assert!(matches!(table.haar_state(&p), Err(Error::EmptySafeShell { .. })));
    }

    #[test]
    fn haar_state_examples() {
        let q = d(2.0);
        let table = GeneratorTable::new(q, t(8)).unwrap();
        let psi = |s: &str| table.haar_state(&NCPolynomial::from_word(&w(s), &q)).unwrap();
        assert!((psi("1") - c(1.0)).norm() < 1e-15);
        assert!(psi("a").norm() < 1e-15);
        assert!((psi("g* g") - c(0.2)).norm() < 1e-14);
        assert!((psi("a* a") - c(0.8)).norm() < 1e-14);
    }

    #[test]
    fn adjoint_compatibility_on_safe_shell() {
        let q = d(1.2);
        let table = GeneratorTable::new(q, t(10)).unwrap();
        let p = NCPolynomial::from_word(&w("a g*"), &q)
            .add(&NCPolynomial::from_word(&w("g a*"), &q).scale(Complex64::new(0.3, 1.1)));
        let lhs = table.mult_operator(&p.adjoint(&q)).unwrap();
        let rhs = table.mult_operator(&p).unwrap().adjoint();
        assert!(lhs.safe_residual(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn gns_injective_at_low_degree() {
        let q = d(1.2);
        let table = GeneratorTable::new(q, t(8)).unwrap();
        let vac = HilbertVector::basis(table.truncation(), PWIndex::vacuum()).unwrap();
        let vecs: Vec<HilbertVector> = NormalWord::all_up_to(4)
            .iter()
            .map(|nw| table.apply_word(&nw.word(), &vac))
            .collect();
        // rank via Gram-Schmidt
        let mut basis: Vec<HilbertVector> = Vec::new();
        for v in vecs.iter() {
            let mut u = v.clone();
            for b in &basis {
                let proj = b.inner(&u);
                u.axpy(-proj, b);
            }
            let n = u.norm();
            assert!(n > 1e-8, "dependent vector");
            u.scale(c(1.0 / n));
            basis.push(u);
        }
        assert_eq!(basis.len(), vecs.len());
    }

    #[test]
    fn haar_vanishes_off_spin_zero() {
        let q = d(1.2);
        let table = GeneratorTable::new(q, t(8)).unwrap();
        let vac = HilbertVector::basis(table.truncation(), PWIndex::vacuum()).unwrap();
        for nw in NormalWord::all_up_to(3) {
            let p = NCPolynomial::monomial(nw, c(1.0));
            let v = table.apply_polynomial(&p, &vac);
            assert_eq!(table.haar_state(&p).unwrap(), v.coeffs()[0]);
            if nw.alpha_power != 0 || nw.gamma != nw.gamma_star {
                assert!(v.coeffs()[0].norm() < 1e-14, "{nw}");
            }
        }
    }
}
