//! Spectral experiments: commutator norms with `|D|` and `D`, heat traces
//! weighted by the modular operator, recovery of the Haar state from trace
//! functionals, the modular property, and the small-`t` band of the heat
//! trace.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{GeneratorTable, Letter, NCPolynomial, NormalWord, SpinHalfElement};
use crate::dirac::{dirac_apply, eigenvalue, v_vector, DiracKind, SpinorVector, VIndex};
use crate::error::{Error, Result};
use crate::halfint::HalfInteger;
use crate::peterweyl::{rho_weight, HilbertVector, PWIndex, SparseOperator, Truncation};
use crate::qarith::{Branch, DeformationParameter};
use crate::summation::{CompensatedSum, LogSum};

/// Iteration cap for [`shell_norm`].
pub const POWER_ITERATION_CAP: usize = 200;
/// Default relative tolerance for [`shell_norm`].
pub const POWER_ITERATION_TOL: f64 = 1e-8;
/// Seed used by the series experiments.
pub const DEFAULT_SEED: u64 = 0x5155_3200;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Norms measured along a one-parameter family, with an affine least-squares fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthSeries {
    pub params: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square deviation from the fitted line.
    pub residual: f64,
}

impl GrowthSeries {
    pub fn fit(params: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if params.len() != values.len() || params.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "growth series needs >= 3 paired points (got {} params, {} values)",
                params.len(),
                values.len()
            )));
        }
        let n = params.len() as f64;
        let mx = params.iter().sum::<f64>() / n;
        let my = values.iter().sum::<f64>() / n;
        let sxx: f64 = params.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = params.iter().zip(&values).map(|(x, y)| (x - mx) * (y - my)).sum();
        if sxx == 0.0 {
            return Err(Error::InvalidParameter(
                "growth series parameters are all equal".into(),
            ));
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let residual = (params
            .iter()
            .zip(&values)
            .map(|(x, y)| (y - slope * x - intercept).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        Ok(GrowthSeries {
            params,
            values,
            slope,
            intercept,
            residual,
        })
    }

    /// Fit residual relative to the mean absolute value.
    pub fn relative_residual(&self) -> f64 {
        let mean = self.values.iter().map(|v| v.abs()).sum::<f64>() / self.values.len() as f64;
        if mean == 0.0 {
            if self.residual == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.residual / mean
        }
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("nonempty series")
    }

    /// `value(param) / param` at the first point whose parameter is `param`.
    pub fn value_over_param(&self, param: f64) -> Option<f64> {
        self.params
            .iter()
            .position(|&p| p == param)
            .map(|k| self.values[k] / param)
    }
}

fn random_start(support: &[usize], dim: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![ZERO; dim];
    for &c in support {
        x[c] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    x
}

fn l2(x: &[Complex64]) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest invariant block of `P op^* op P` that is solved densely.
pub const DENSE_BLOCK_LIMIT: usize = 500;

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Column sets of the connected components of `P op^* op P`, with `P` the
/// projection on positions `< end`. Columns sharing a row are coupled.
fn gram_components(op: &SparseOperator, end: usize) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..end).collect();
    for r in 0..op.dim() {
        let mut first = None;
        for (c, v) in op.row(r) {
            if c >= end || v == ZERO {
                continue;
            }
            match first {
                None => first = Some(c),
                Some(f) => {
                    let (a, b) = (find(&mut parent, f), find(&mut parent, c));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for c in 0..end {
        let root = find(&mut parent, c);
        groups.entry(root).or_default().push(c);
    }
    groups.into_values().collect()
}

/// Largest singular value of the columns `cols` of `op`, densely.
fn dense_block_norm(op: &SparseOperator, adj: &SparseOperator, cols: &[usize]) -> f64 {
    let pos: std::collections::HashMap<usize, usize> =
        cols.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let s = cols.len();
    let mut gram = nalgebra::DMatrix::<Complex64>::zeros(s, s);
    let mut touched = vec![false; op.dim()];
    // rows of op hit by the block
    let mut rows = Vec::new();
    for &c in cols {
        for (r, _) in adj.row(c) {
            if !touched[r] {
                touched[r] = true;
                rows.push(r);
            }
        }
    }
    for r in rows {
        let entries: Vec<(usize, Complex64)> = op
            .row(r)
            .filter_map(|(c, v)| pos.get(&c).map(|&k| (k, v)))
            .collect();
        for &(a, va) in &entries {
            for &(b, vb) in &entries {
                gram[(a, b)] += va.conj() * vb;
            }
        }
    }
    let top = nalgebra::SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    top.max(0.0).sqrt()
}

/// Operator norm of `op` restricted to vectors supported on spins `<= shell`.
///
/// `P op^* op P` is split into its invariant coordinate blocks; blocks up to
/// [`DENSE_BLOCK_LIMIT`] are diagonalized densely, larger ones by power
/// iteration from a seeded random start (relative tolerance `tol`, at most
/// [`POWER_ITERATION_CAP`] steps). Shift-type operators have tightly
/// clustered top singular values, which stall plain power iteration but
/// decouple into small blocks.
pub fn shell_norm(op: &SparseOperator, shell: HalfInteger, tol: f64, seed: u64) -> Result<f64> {
    check_shell(op, shell, tol)?;
    let end = op.truncation().shell_range(shell).end;
    let mut best = 0.0f64;
    let mut large: Vec<usize> = Vec::new();
    let adj = op.adjoint();
    for block in gram_components(op, end) {
        if block.len() <= DENSE_BLOCK_LIMIT {
            best = best.max(dense_block_norm(op, &adj, &block));
        } else {
            large.extend(block);
        }
    }
    if !large.is_empty() {
        large.sort_unstable();
        best = best.max(power_norm(op, &large, tol, seed)?);
    }
    Ok(best)
}

fn check_shell(op: &SparseOperator, shell: HalfInteger, tol: f64) -> Result<()> {
    let trunc = op.truncation();
    if shell < HalfInteger::ZERO || shell + op.shell_depth() > trunc.lmax() {
        return Err(Error::InvalidParameter(format!(
            "shell {shell} with operator depth {} exceeds Lmax = {}",
            op.shell_depth(),
            trunc.lmax()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive (got {tol})")));
    }
    Ok(())
}

/// Power iteration on `P op^* op P`, `P` the projection on `support`.
pub fn power_norm(op: &SparseOperator, support: &[usize], tol: f64, seed: u64) -> Result<f64> {
    let mut mask = vec![false; op.dim()];
    support.iter().for_each(|&c| mask[c] = true);
    let mut x = random_start(support, op.dim(), seed);
    let nx = l2(&x);
    if nx == 0.0 {
        return Ok(0.0);
    }
    x.iter_mut().for_each(|c| *c /= nx);
    let mut sigma = 0.0;
    for _ in 0..POWER_ITERATION_CAP {
        let y = op.apply_slice(&x);
        let next = l2(&y);
        if next == 0.0 {
            return Ok(0.0);
        }
        let mut z = op.apply_adjoint_slice(&y);
        z.iter_mut()
            .zip(&mask)
            .filter(|(_, &m)| !m)
            .for_each(|(c, _)| *c = ZERO);
        let nz = l2(&z);
        z.iter_mut().for_each(|c| *c /= nz);
        x = z;
        if (next - sigma).abs() <= tol * next {
            return Ok(next);
        }
        sigma = next;
    }
    Err(Error::NonConvergence {
        iterations: POWER_ITERATION_CAP,
        last_estimate: sigma,
    })
}

/// Spin label of every position of the truncation.
fn spins(trunc: &Truncation) -> Vec<f64> {
    trunc.enumerate().into_iter().map(|idx| idx.n.to_f64()).collect()
}

/// `[A, op]` where `A t~^n_{ij} = (n + 1/2) t~^n_{ij}`.
pub fn abs_commutator(op: &SparseOperator) -> SparseOperator {
    let n = spins(&op.truncation());
    let trip = op
        .entries()
        .map(|(r, c, v)| (r, c, v * (n[r] - n[c])))
        .collect();
    SparseOperator::from_triplets(op.truncation(), op.shell_depth(), trip)
}

/// The polynomial `c * letter` equal to `t~^{1/2}_{r,s}` under the fitted identification.
pub fn element_polynomial(table: &GeneratorTable, el: SpinHalfElement) -> NCPolynomial {
    let w = el.letter();
    let nw = match w {
        Letter::Alpha => NormalWord::new(1, 0, 0),
        Letter::AlphaStar => NormalWord::new(-1, 0, 0),
        Letter::Gamma => NormalWord::new(0, 1, 0),
        Letter::GammaStar => NormalWord::new(0, 0, 1),
    };
    NCPolynomial::monomial(nw, Complex64::new(table.scalar(el), 0.0))
}

/// Bounded commutator series, with the theoretical cap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorSeries {
    pub series: GrowthSeries,
    /// Norm of `a` measured on the largest shell.
    pub operator_norm: f64,
    pub cap: f64,
}

impl CommutatorSeries {
    /// Relative change between the last two shells.
    pub fn plateau_change(&self) -> f64 {
        let v = &self.series.values;
        let (a, b) = (v[v.len() - 2], v[v.len() - 1]);
        if b == 0.0 {
            0.0
        } else {
            (b - a).abs() / b
        }
    }

    pub fn nondecreasing(&self, slack: f64) -> bool {
        self.series.values.windows(2).all(|w| w[1] >= w[0] * (1.0 - slack))
    }
}

/// `absD_commutator_series`: `||[|D|, I_2 (x) a]||` restricted to each shell.
///
/// `[|D|, I_2 (x) a] = I_2 (x) [A, a]`, so the spinor factor does not change
/// the norm. For `a` of degree `2 n0` the commutator only connects spins
/// `n` and `p` with `|n - p| <= n0`, and at most `2 n0 + 1` such `p` occur, so
/// `||[A, a] x||^2 <= (2 n0 + 1) n0^2 C^2 ||x||^2` with `C = ||a||`.
/// The cap is therefore `sqrt(2 n0 + 1) n0 C`.
pub fn absd_commutator_series(
    a: &NCPolynomial,
    shells: &[HalfInteger],
    table: &GeneratorTable,
    tol: f64,
    seed: u64,
) -> Result<CommutatorSeries> {
    if shells.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("shells must be strictly increasing".into()));
    }
    let top = *shells
        .last()
        .ok_or_else(|| Error::InvalidParameter("empty shell list".into()))?;
    let m = table.mult_operator(a)?;
    let comm = abs_commutator(&m);
    let values = shells
        .iter()
        .map(|&s| shell_norm(&comm, s, tol, seed))
        .collect::<Result<Vec<_>>>()?;
    let operator_norm = shell_norm(&m, top, tol, seed)?;
    let n0 = a.max_degree() as f64 / 2.0;
    let cap = (2.0 * n0 + 1.0).sqrt() * n0 * operator_norm;
    let params = shells.iter().map(|s| s.to_f64()).collect();
    Ok(CommutatorSeries {
        series: GrowthSeries::fit(params, values)?,
        operator_norm,
        cap,
    })
}

/// The witness `v^{l,+}_{l,-l-1/2}`.
pub fn witness_index(l: HalfInteger) -> VIndex {
    VIndex::new(l, l, -(l + HalfInteger::HALF), Branch::Plus).expect("witness index is valid")
}

/// `||[kind, I_2 (x) a] v||` on the witness `v = v^{l,+}_{l,-l-1/2}`.
pub fn witness_norm(
    kind: DiracKind,
    a: &NCPolynomial,
    l: HalfInteger,
    table: &GeneratorTable,
) -> Result<f64> {
    let trunc = table.truncation();
    let reach = HalfInteger::from_doubled(a.max_degree() as i64);
    if l + reach > trunc.lmax() {
        return Err(Error::InvalidParameter(format!(
            "witness at l = {l} moved by degree {} leaves Lmax = {}",
            a.max_degree(),
            trunc.lmax()
        )));
    }
    let q = table.q();
    let idx = witness_index(l);
    let v = v_vector(idx, q, trunc);
    let av = SpinorVector {
        plus: table.apply_polynomial(a, &v.plus),
        minus: table.apply_polynomial(a, &v.minus),
    };
    // D v = lambda v, so [D, a] v = D(a v) - lambda (a v)
    let mut out = dirac_apply(kind, &av, q);
    out.axpy(Complex64::new(-eigenvalue(kind, idx, q), 0.0), &av);
    Ok(out.norm())
}

/// `trueD_growth`: witness norms of `[D, a]` for each `l`, with the affine fit.
pub fn trued_growth(a: &NCPolynomial, ls: &[HalfInteger], table: &GeneratorTable) -> Result<GrowthSeries> {
    witness_series(DiracKind::True, a, ls, table)
}

/// Witness norms for any of the Dirac-type operators.
pub fn witness_series(
    kind: DiracKind,
    a: &NCPolynomial,
    ls: &[HalfInteger],
    table: &GeneratorTable,
) -> Result<GrowthSeries> {
    let values = ls
        .iter()
        .map(|&l| witness_norm(kind, a, l, table))
        .collect::<Result<Vec<_>>>()?;
    GrowthSeries::fit(ls.iter().map(|l| l.to_f64()).collect(), values)
}

/// `Tr(R exp(-t D^2))` two ways, with the Laplace exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatTraceReport {
    pub t: f64,
    /// `2 sum_{m >= 1} [m]_q^2 exp(-t (m/2)^2)`, summed to convergence.
    pub closed_sum: f64,
    /// The same series in the shifted form `sum_m [m]_q^2 exp(-t ((m+1)/2)^2)`.
    pub shifted_sum: f64,
    /// Cell-by-cell trace over the truncation.
    pub operator_trace: f64,
    /// Bound on the part of `closed_sum` beyond the truncation.
    pub tail_bound: f64,
    pub k_exponent: f64,
}

/// Tolerance allowed for summation error between the two heat-trace routes.
pub const SUMMATION_TOLERANCE: f64 = 1e-12;

impl HeatTraceReport {
    pub fn consistent(&self) -> bool {
        (self.closed_sum - self.operator_trace).abs()
            <= self.tail_bound + SUMMATION_TOLERANCE * self.closed_sum
    }
}

/// `k = 4 (ln q)^2`: with `[m]_q^2 ~ q^{2m}`, the exponent `2 m ln q - t m^2 / 4`
/// peaks at `m* = 4 ln q / t` with value `k / t`.
pub fn k_exponent(q: &DeformationParameter) -> f64 {
    4.0 * q.q().ln().powi(2)
}

/// Numerical Laplace check: ternary search for the maximum of
/// `2 m ln q - t (m/2)^2` over `m > 0`, returning `(argmax, t * max)`.
pub fn laplace_exponent_numeric(q: &DeformationParameter, t: f64) -> (f64, f64) {
    let lq = q.q().ln().abs();
    let f = |m: f64| 2.0 * m * lq - t * (m / 2.0).powi(2);
    let (mut lo, mut hi) = (0.0, 16.0 * lq / t + 1.0);
    for _ in 0..200 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let m = (lo + hi) / 2.0;
    (m, t * f(m))
}

/// Location `m* = 4 |ln q| / t` of the Laplace peak.
pub fn laplace_peak(q: &DeformationParameter, t: f64) -> f64 {
    4.0 * q.q().ln().abs() / t
}

/// `2 ln [m]_q` without overflow.
fn log_qn_sq(m: f64, q: &DeformationParameter) -> f64 {
    if m == 0.0 {
        return f64::NEG_INFINITY;
    }
    let r = q.q().max(q.q().recip());
    let lr = r.ln();
    2.0 * (m * lr - (r - r.recip()).ln() + (-(-2.0 * m * lr).exp()).ln_1p())
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("t must be positive (got {t})")));
    }
    Ok(())
}

/// Sum `weight(m) [m]_q^2 exp(-t shift(m)^2)` over `m >= 1` until the terms
/// past the peak are negligible.
fn series_to_convergence(q: &DeformationParameter, t: f64, shift: f64) -> f64 {
    let peak = laplace_peak(q, t);
    let mut acc = LogSum::new();
    let mut m = 1.0f64;
    loop {
        let s = (m + shift) / 2.0;
        let term = log_qn_sq(m, q) - t * s * s;
        acc.add_log(term);
        if m > peak + 1.0 && term < acc.ln() - 45.0 {
            break;
        }
        m += 1.0;
    }
    acc.ln()
}

/// Upper bound on `2 sum_{m > m0} [m]_q^2 exp(-t m^2 / 4)`.
///
/// Uses `[x]_q^2 <= r^{2x} / (r - 1/r)^2` with `r = max(q, 1/q)`; the
/// dominating Gaussian `g` is decreasing past `x* = 4 ln r / t`, so the sum
/// is below the integral from `m0` when `m0 >= x*`, and below the full
/// integral plus the maximum otherwise.
pub fn heat_tail_bound(q: &DeformationParameter, t: f64, m0: f64) -> f64 {
    let r = q.q().max(q.q().recip());
    let k = k_exponent(q);
    let xs = laplace_peak(q, t);
    let log_peak = 2f64.ln() - 2.0 * (r - r.recip()).ln() + k / t;
    let a = m0 - xs;
    let gauss = if a > 0.0 {
        let half = (std::f64::consts::PI / t).sqrt();
        let mills = 2.0 / (t * a) * (-t * a * a / 4.0).exp();
        half.min(mills)
    } else {
        (4.0 * std::f64::consts::PI / t).sqrt() + 1.0
    };
    (log_peak + gauss.ln()).exp()
}

/// `heat_trace`: `Tr(R exp(-t D^2))` over the truncation and as a series.
pub fn heat_trace(t: f64, q: &DeformationParameter, trunc: &Truncation) -> Result<HeatTraceReport> {
    check_t(t)?;
    let lq = q.q().ln();
    let mut acc = LogSum::new();
    for n in trunc.lmax().spins_up_to() {
        let e = -t * (n.to_f64() + 0.5).powi(2) + 2f64.ln();
        for i in n.weights() {
            for j in n.weights() {
                acc.add_log(e - 2.0 * (i + j).to_f64() * lq);
            }
        }
    }
    let top = trunc.lmax().doubled() as f64 + 1.0;
    Ok(HeatTraceReport {
        t,
        closed_sum: (2f64.ln() + series_to_convergence(q, t, 0.0)).exp(),
        shifted_sum: series_to_convergence(q, t, 1.0).exp(),
        operator_trace: acc.value(),
        tail_bound: heat_tail_bound(q, t, top),
        k_exponent: k_exponent(q),
    })
}

/// `Tr(exp(-t D^2)) = 2 sum_l (2l+1)^2 exp(-t (l+1/2)^2)` over the truncation.
pub fn plain_heat_trace(t: f64, trunc: &Truncation) -> Result<f64> {
    check_t(t)?;
    let mut acc = LogSum::new();
    for n in trunc.lmax().spins_up_to() {
        let m = n.doubled() as f64 + 1.0;
        acc.add_log(2f64.ln() + 2.0 * m.ln() - t * (m / 2.0).powi(2));
    }
    Ok(acc.value())
}

/// Bound on `||a||`: every generator is a contraction.
fn norm_bound(a: &NCPolynomial) -> f64 {
    a.terms().map(|(_, c)| c.norm()).sum()
}

/// A trace-functional ratio with its truncation tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRatio {
    pub ratio_re: f64,
    pub ratio_im: f64,
    /// Bound on `|ratio - psi(a)|` from the omitted blocks.
    pub tail_bound: f64,
}

impl TraceRatio {
    pub fn ratio(&self) -> Complex64 {
        Complex64::new(self.ratio_re, self.ratio_im)
    }
}

/// `sum_c M_cc rho_c w(n_c)` and `sum_c rho_c w(n_c)` over spins `<= safe`,
/// with `w = exp(log_w)` taken relative to the largest weight.
fn diagonal_traces(
    m: &SparseOperator,
    safe: HalfInteger,
    q: &DeformationParameter,
    log_w: &dyn Fn(HalfInteger) -> f64,
) -> (Complex64, LogSum) {
    let trunc = m.truncation();
    let lq = q.q().ln();
    let cells: Vec<(usize, PWIndex, f64)> = safe
        .spins_up_to()
        .flat_map(|n| {
            let range = trunc.block_range(n);
            let lw = log_w(n);
            range.map(move |p| (p, n, lw))
        })
        .map(|(p, _, lw)| {
            let idx = trunc.index_at(p);
            (p, idx, lw - 2.0 * (idx.i + idx.j).to_f64() * lq)
        })
        .collect();
    let reference = cells.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    let mut den = LogSum::new();
    for (p, _, lw) in cells {
        let w = (lw - reference).exp();
        let d = m.entry(p, p);
        re.add(d.re * w);
        im.add(d.im * w);
        den.add_log(lw);
    }
    // numerator is returned in units of exp(reference)
    let scale = (reference - den.ln()).exp();
    (Complex64::new(re.value(), im.value()) * scale, den)
}

/// `haar_via_heat`: `Tr(a R e^{-tD^2}) / Tr(R e^{-tD^2})`.
///
/// Only spin blocks on which `a` acts exactly enter; the omitted mass `T`
/// (the rest of the truncation plus [`heat_tail_bound`] beyond it) moves the
/// ratio by at most `2 ||a|| T / S`, `S` the retained mass.
pub fn haar_via_heat(a: &NCPolynomial, t: f64, table: &GeneratorTable) -> Result<TraceRatio> {
    check_t(t)?;
    let q = *table.q();
    let trunc = table.truncation();
    let m = table.mult_operator(a)?;
    let safe = m.safe_shell().expect("mult_operator checks depth");
    let log_w = |n: HalfInteger| 2f64.ln() - t * (n.to_f64() + 0.5).powi(2);
    let (ratio, kept) = diagonal_traces(&m, safe, &q, &log_w);
    let mut omitted = LogSum::new();
    for n in trunc.lmax().spins_up_to().filter(|&n| n > safe) {
        omitted.add_log(log_w(n) + log_qn_sq(n.doubled() as f64 + 1.0, &q));
    }
    omitted.add_log(heat_tail_bound(&q, t, trunc.lmax().doubled() as f64 + 1.0).ln());
    Ok(TraceRatio {
        ratio_re: ratio.re,
        ratio_im: ratio.im,
        tail_bound: 2.0 * norm_bound(a) * (omitted.ln() - kept.ln()).exp(),
    })
}

/// Output of [`rho_trace_functional`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoTraceReport {
    pub value_re: f64,
    pub value_im: f64,
    /// `phi(1)` over the same blocks.
    pub unit_value: f64,
    pub ratio: TraceRatio,
}

impl RhoTraceReport {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.value_re, self.value_im)
    }
}

/// `rho_trace_functional`: `phi(a) = Tr(a rho B)` on `h` with `B t~^n = lambda_n t~^n`.
///
/// The tail proxy is `2 ||a|| (sum_{omitted n} |lambda_n| [2n+1]_q^2 + last
/// block) / phi(1)`; it must be below `tol`.
pub fn rho_trace_functional(
    a: &NCPolynomial,
    multiplier: &dyn Fn(HalfInteger) -> f64,
    table: &GeneratorTable,
    tol: f64,
) -> Result<RhoTraceReport> {
    let q = *table.q();
    let trunc = table.truncation();
    let lambda: Vec<f64> = trunc.lmax().spins_up_to().map(multiplier).collect();
    if lambda.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidParameter("multiplier must be positive and finite".into()));
    }
    let m = table.mult_operator(a)?;
    let safe = m.safe_shell().expect("mult_operator checks depth");
    let log_w = |n: HalfInteger| lambda[n.doubled() as usize].ln();
    let (ratio, kept) = diagonal_traces(&m, safe, &q, &log_w);
    let mut omitted = LogSum::new();
    for n in trunc.lmax().spins_up_to().filter(|&n| n > safe) {
        omitted.add_log(log_w(n) + log_qn_sq(n.doubled() as f64 + 1.0, &q));
    }
    let top = trunc.lmax();
    omitted.add_log(log_w(top) + log_qn_sq(top.doubled() as f64 + 1.0, &q));
    let tail = 2.0 * norm_bound(a) * (omitted.ln() - kept.ln()).exp();
    if !(tail <= tol) {
        return Err(Error::TailTooLarge { tail, tolerance: tol });
    }
    let unit = kept.value();
    Ok(RhoTraceReport {
        value_re: ratio.re * unit,
        value_im: ratio.im * unit,
        unit_value: unit,
        ratio: TraceRatio {
            ratio_re: ratio.re,
            ratio_im: ratio.im,
            tail_bound: tail,
        },
    })
}

/// `rho^power` on `h`.
fn rho_power(v: &HilbertVector, q: &DeformationParameter, power: f64) -> HilbertVector {
    let trunc = v.truncation();
    let mut out = v.clone();
    for (p, c) in out.coeffs_mut().iter_mut().enumerate() {
        *c *= rho_weight(trunc.index_at(p), q).powf(power);
    }
    out
}

/// `modular_check`: `|psi(ab) - psi(b Psi(a))|` with `Psi(a) = rho a rho^{-1}`.
pub fn modular_check(a: &NCPolynomial, b: &NCPolynomial, table: &GeneratorTable) -> Result<f64> {
    let trunc = table.truncation();
    let word_len = a.max_degree() + b.max_degree();
    let needed = HalfInteger::from_doubled(word_len as i64);
    if needed > trunc.lmax() {
        return Err(Error::EmptySafeShell {
            word_len,
            needed,
            lmax: trunc.lmax(),
        });
    }
    let q = table.q();
    let vac = HilbertVector::basis(trunc, PWIndex::vacuum()).expect("vacuum");
    let ab = table.apply_polynomial(a, &table.apply_polynomial(b, &vac));
    let psi_a = rho_power(&table.apply_polynomial(a, &rho_power(&vac, q, -1.0)), q, 1.0);
    let b_psi_a = table.apply_polynomial(b, &psi_a);
    Ok((ab.get(PWIndex::vacuum()) - b_psi_a.get(PWIndex::vacuum())).norm())
}

/// Max entry of `rho E rho^{-1} - q^{-2r-2s} E` for the generator `E = t~^{1/2}_{r,s}`.
pub fn generator_scaling_residual(el: SpinHalfElement, table: &GeneratorTable) -> f64 {
    let q = table.q();
    let e = table.element_operator(el);
    let conj = e.conjugate_by_diagonal(|idx| rho_weight(idx, q));
    let factor = q.q().powi(-((el.r + el.s).doubled()) as i32);
    conj.linear_combination(Complex64::new(1.0, 0.0), e, Complex64::new(-factor, 0.0))
        .entries()
        .map(|(_, _, v)| v.norm())
        .fold(0.0, f64::max)
}

/// One point of the small-`t` band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub t: f64,
    pub peak: f64,
    pub trace: f64,
    /// `t^{1/2} e^{-k/t} Tr(R e^{-tD^2})`
    pub s: f64,
    pub plain_trace: f64,
    /// `t^{3/2} Tr(e^{-tD^2})`, the classical three-dimensional scaling.
    pub plain_scaled: f64,
}

/// Number of Gaussian widths `sqrt(2/t)` the peak must clear inside the truncation.
const PEAK_MARGIN_WIDTHS: f64 = 6.0;

/// `asymptotic_band`: `s(t)` on each grid point, with the peak precondition.
pub fn asymptotic_band(
    q: &DeformationParameter,
    t_grid: &[f64],
    trunc: &Truncation,
) -> Result<Vec<BandPoint>> {
    let k = k_exponent(q);
    let top = trunc.lmax().doubled() as f64 + 1.0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        check_t(t)?;
        let peak = laplace_peak(q, t);
        if peak + PEAK_MARGIN_WIDTHS * (2.0 / t).sqrt() > top {
            return Err(Error::PeakOutsideTruncation {
                t,
                peak,
                lmax_doubled: trunc.lmax().doubled(),
            });
        }
        let trace = heat_trace(t, q, trunc)?.operator_trace;
        let plain = plain_heat_trace(t, trunc)?;
        out.push(BandPoint {
            t,
            peak,
            trace,
            s: t.sqrt() * (-k / t).exp() * trace,
            plain_trace: plain,
            plain_scaled: t.powf(1.5) * plain,
        });
    }
    Ok(out)
}

/// `count` log-spaced points from `start` to `stop` inclusive.
pub fn log_grid(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop >= start) || count == 0 {
        return Err(Error::InvalidParameter(format!(
            "log grid needs 0 < start <= stop and count >= 1 (got {start}:{stop}:{count})"
        )));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let (a, b) = (start.ln(), stop.ln());
    Ok((0..count)
        .map(|k| {
            if k == 0 {
                start
            } else if k == count - 1 {
                stop
            } else {
                (a + (b - a) * k as f64 / (count - 1) as f64).exp()
            }
        })
        .collect())
}

/// Smallest doubled truncation for which every `t` in the grid passes the
/// peak precondition of [`asymptotic_band`].
pub fn band_lmax_doubled(q: &DeformationParameter, t_grid: &[f64]) -> i64 {
    t_grid
        .iter()
        .map(|&t| {
            let need = laplace_peak(q, t) + PEAK_MARGIN_WIDTHS * (2.0 / t).sqrt() - 1.0;
            need.ceil().max(0.0) as i64
        })
        .max()
        .unwrap_or(0)
}
