//! The five experiments behind the subcommands.

use num_complex::Complex64;

use super::config::{Experiment, RunConfig};
use super::output::{status, Cell, Criterion, Report, Table, ERROR, OK};
use crate::algebra::{GeneratorTable, NCPolynomial, NormalWord, SpinHalfElement, Word, BATTERY_TOLERANCE};
use crate::dirac::{self, DiracKind};
use crate::error::{Error, Result};
use crate::halfint::HalfInteger;
use crate::oracle;
use crate::peterweyl::{rho_weight, Truncation};
use crate::qarith::{cg_half, Branch, DeformationParameter};
use crate::spectral;

pub fn run(cfg: &RunConfig) -> Report {
    match cfg.experiment {
        Experiment::Validate => validate(cfg),
        Experiment::Haar => haar(cfg),
        Experiment::Commutators => commutators(cfg),
        Experiment::Heat => heat(cfg),
        Experiment::Modular => modular(cfg),
    }
}

fn setup(cfg: &RunConfig) -> Result<(DeformationParameter, Truncation)> {
    Ok((cfg.deformation()?, Truncation::from_doubled(cfg.lmax_doubled)?))
}

fn table_for(cfg: &RunConfig) -> Result<GeneratorTable> {
    let (q, trunc) = setup(cfg)?;
    GeneratorTable::new(q, trunc)
}

fn h(doubled: i64) -> HalfInteger {
    HalfInteger::from_doubled(doubled)
}

/// Report with a single error row, for experiments that cannot start.
fn aborted(mut table: Table, name: &str, err: Error) -> Report {
    table.push(vec![], ERROR);
    Report {
        table,
        criteria: vec![Criterion::failed(name, err)],
    }
}

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    // NaN propagates as a failure
    it.into_iter()
        .fold(0.0, |a: f64, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) })
}

/// `[n]_q` against the geometric sum `sum_k q^{n-1-2k}`, relative, `n <= 20`.
fn q_number_defect(q: &DeformationParameter) -> f64 {
    max_abs((1..=20).map(|n| {
        let direct = q.qn(n as f64);
        let sum: f64 = (0..n).map(|k| q.q().powi(n - 1 - 2 * k)).sum();
        (direct - sum).abs() / sum
    }))
}

/// Orthonormality of the spin-1/2 coupling matrices for `l <= max_l`.
fn cg_defect(max_l: HalfInteger, q: &DeformationParameter) -> f64 {
    let half = HalfInteger::HALF;
    let mut worst = 0.0f64;
    for l in max_l.spins_up_to() {
        for j in (l + half).weights() {
            let rows: Vec<[f64; 2]> = [Branch::Plus, Branch::Minus]
                .into_iter()
                .filter(|b| b.total(l) >= j.abs() && b.total(l) >= HalfInteger::ZERO)
                .map(|b| [half, -half].map(|m1| cg_half(m1, b, l, j - m1, q)))
                .collect();
            for (a, ra) in rows.iter().enumerate() {
                for (b, rb) in rows.iter().enumerate() {
                    let dot = ra[0] * rb[0] + ra[1] * rb[1];
                    let want = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((dot - want).abs());
                }
            }
        }
    }
    worst
}

pub fn validate(cfg: &RunConfig) -> Report {
    let mut table = Table::new(&["module", "check", "residual", "threshold"]);
    let (q, trunc) = match setup(cfg) {
        Ok(x) => x,
        Err(e) => return aborted(table, "validate.setup", e),
    };
    let mut criteria = Vec::new();
    let mut add = |module: &str, check: &str, r: Result<f64>, threshold: f64| {
        let name = format!("validate.{module}.{check}");
        match r {
            Ok(v) => {
                let c = Criterion::below(&name, v, threshold);
                table.push(
                    vec![module.into(), check.into(), v.into(), threshold.into()],
                    status(c.pass),
                );
                criteria.push(c);
            }
            Err(e) => {
                table.push(vec![module.into(), check.into(), Cell::Empty, threshold.into()], ERROR);
                criteria.push(Criterion::failed(&name, e));
            }
        }
    };
    let lmax = trunc.lmax();

    add("qarith", "geometric_sum", Ok(q_number_defect(&q)), 1e-12);
    add("qarith", "cg_orthonormality", Ok(cg_defect(h(20), &q)), 1e-12);

    let mismatches = (0..trunc.dim())
        .filter(|&p| trunc.position(trunc.index_at(p)) != Some(p))
        .count();
    add("peterweyl", "index_roundtrip", Ok(mismatches as f64), 0.5);
    let rho_sum = max_abs(lmax.spins_up_to().map(|n| {
        let s: f64 = trunc.block_range(n).map(|p| rho_weight(trunc.index_at(p), &q)).sum();
        let want = q.qn(n.doubled() as f64 + 1.0).powi(2);
        (s - want).abs() / want
    }));
    add("peterweyl", "rho_block_sum", Ok(rho_sum), 1e-12);

    let gens = GeneratorTable::new(q, trunc);
    match &gens {
        Ok(t) => {
            for (name, r) in &t.report().residuals {
                add("algebra", name, Ok(*r), BATTERY_TOLERANCE);
            }
        }
        Err(e) => add("algebra", "battery", Err(Error::InvalidParameter(e.to_string())), BATTERY_TOLERANCE),
    }

    if let Ok(t) = &gens {
        if q.is_standard() {
            let deg = (cfg.lmax_doubled as usize).min(6);
            let cap = oracle::level_cap_for(1e-13, &q).max(60);
            let r = NormalWord::all_up_to(deg)
                .into_iter()
                .map(|w| {
                    let p = NCPolynomial::monomial(w, Complex64::new(1.0, 0.0));
                    Ok((t.haar_state(&p)? - oracle::oracle_haar(&p, cap, &q)?).norm())
                })
                .collect::<Result<Vec<f64>>>()
                .map(max_abs);
            add("gns_oracle", "haar_two_paths", r, 1e-9);
        }
    }

    add("dirac", "v_basis_gram", dirac::v_basis_gram_defect(lmax.min(h(10)), &q), 1e-12);
    add("dirac", "naive_true_relation", Ok(dirac::q_relation_check(&q, &trunc)), 1e-12);
    let bl = lmax.min(h(12));
    add("dirac", "b_sum_vs_closed", Ok(dirac::b_closed_defect(bl, &q)), 1e-10);
    if let Ok(t) = &gens {
        let bl = (lmax - HalfInteger::HALF).min(h(12));
        if bl >= HalfInteger::ZERO {
            add("dirac", "b_sum_vs_operator", dirac::b_operator_defect(bl, t), 1e-10);
        }
    }
    Report { table, criteria }
}

/// Observables of the Haar sweep, as words.
pub const HAAR_OBSERVABLES: [&str; 6] = ["1", "a", "g", "g* g", "a* a", "a g*"];

fn gaussian_multiplier(n: HalfInteger) -> f64 {
    let n = n.to_f64();
    (-n * (n + 1.0)).exp()
}

pub fn haar(cfg: &RunConfig) -> Report {
    let mut table = Table::new(&[
        "observable",
        "method",
        "t",
        "ratio",
        "ratio_im",
        "psi_reference",
        "oracle_reference",
        "abs_error",
        "tail_bound",
    ]);
    let gens = match table_for(cfg) {
        Ok(t) => t,
        Err(e) => return aborted(table, "haar.setup", e),
    };
    let q = *gens.q();
    let ts = cfg.t_grid.points().unwrap_or_default();
    let cap = oracle::level_cap_for(1e-13, &q).max(60);
    let (mut heat_err, mut tail_max, mut mult_err, mut oracle_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut failures: Vec<String> = Vec::new();
    for obs in HAAR_OBSERVABLES {
        let p = NCPolynomial::from_word(&obs.parse::<Word>().expect("observable word"), &q);
        let psi = match gens.haar_state(&p) {
            Ok(v) => v,
            Err(e) => {
                table.push(vec![obs.into()], ERROR);
                failures.push(format!("{obs}: {e}"));
                continue;
            }
        };
        let orc = if q.is_standard() {
            match oracle::oracle_haar(&p, cap, &q) {
                Ok(v) => {
                    oracle_err = oracle_err.max((v - psi).norm());
                    Cell::Float(v.re)
                }
                Err(e) => {
                    failures.push(format!("{obs}: {e}"));
                    Cell::Empty
                }
            }
        } else {
            Cell::Empty
        };
        for &t in &ts {
            match spectral::haar_via_heat(&p, t, &gens) {
                Ok(r) => {
                    let err = (r.ratio() - psi).norm();
                    heat_err = heat_err.max(err);
                    tail_max = tail_max.max(r.tail_bound);
                    table.push(
                        vec![
                            obs.into(),
                            "heat".into(),
                            t.into(),
                            r.ratio_re.into(),
                            r.ratio_im.into(),
                            psi.re.into(),
                            orc.clone(),
                            err.into(),
                            r.tail_bound.into(),
                        ],
                        status(err < 1e-8 && r.tail_bound < 1e-10),
                    );
                }
                Err(e) => {
                    table.push(vec![obs.into(), "heat".into(), t.into()], ERROR);
                    failures.push(format!("{obs} at t={t}: {e}"));
                }
            }
        }
        match spectral::rho_trace_functional(&p, &gaussian_multiplier, &gens, cfg.tolerance) {
            Ok(r) => {
                let err = (r.ratio.ratio() - psi).norm();
                mult_err = mult_err.max(err);
                table.push(
                    vec![
                        obs.into(),
                        "rho_trace:exp(-n(n+1))".into(),
                        Cell::Empty,
                        r.ratio.ratio_re.into(),
                        r.ratio.ratio_im.into(),
                        psi.re.into(),
                        orc.clone(),
                        err.into(),
                        r.ratio.tail_bound.into(),
                    ],
                    status(err < 1e-8),
                );
            }
            Err(e) => {
                table.push(vec![obs.into(), "rho_trace:exp(-n(n+1))".into()], ERROR);
                failures.push(format!("{obs} multiplier: {e}"));
            }
        }
    }
    let mut criteria = vec![
        Criterion::below("haar.theorem_haar_abs_error", heat_err, 1e-8),
        Criterion::below("haar.tail_bound", tail_max, 1e-10),
        Criterion::below("haar.multiplier_independence", mult_err, 1e-8),
    ];
    if q.is_standard() {
        criteria.push(Criterion::below("haar.oracle_agreement", oracle_err, 1e-9));
    }
    if ts.is_empty() {
        criteria.push(Criterion::failed("haar.t_grid", "empty t grid"));
    }
    for f in failures {
        criteria.push(Criterion::failed("haar.evaluation", f));
    }
    Report { table, criteria }
}

/// Shells `4, 5, ..., 20` and witness spins `5, 6, ..., 30`, clipped to the truncation.
pub const SHELL_RANGE: (i64, i64) = (4, 20);
pub const WITNESS_RANGE: (i64, i64) = (5, 30);

pub fn commutators(cfg: &RunConfig) -> Report {
    let mut table = Table::new(&[
        "series",
        "l",
        "norm_trueD",
        "norm_over_l",
        "norm_absD_witness",
        "shell",
        "norm_absD",
        "cap",
    ]);
    let gens = match table_for(cfg) {
        Ok(t) => t,
        Err(e) => return aborted(table, "commutators.setup", e),
    };
    let lmax = gens.truncation().lmax();
    let a = spectral::element_polynomial(&gens, SpinHalfElement::WITNESS);
    let reach = HalfInteger::HALF;
    let shells: Vec<_> = (SHELL_RANGE.0..=SHELL_RANGE.1)
        .map(HalfInteger::from_int)
        .filter(|&s| s + reach <= lmax)
        .collect();
    let ls: Vec<_> = (WITNESS_RANGE.0..=WITNESS_RANGE.1)
        .map(HalfInteger::from_int)
        .filter(|&l| l + reach <= lmax)
        .collect();
    let mut criteria = Vec::new();

    let abs_series = spectral::absd_commutator_series(&a, &shells, &gens, cfg.tolerance, cfg.seed);
    let cap = abs_series.as_ref().map(|s| s.cap).unwrap_or(f64::NAN);
    match &abs_series {
        Ok(s) => {
            for (shell, v) in s.series.params.iter().zip(&s.series.values) {
                table.push_named(
                    vec![
                        ("series", "absD".into()),
                        ("shell", (*shell).into()),
                        ("norm_absD", (*v).into()),
                        ("cap", s.cap.into()),
                    ],
                    status(*v <= s.cap),
                );
            }
            let full = shells.last() == Some(&HalfInteger::from_int(SHELL_RANGE.1));
            criteria.push(Criterion::check(
                "commutators.absD_plateau",
                s.plateau_change(),
                format!("last two shells differ < 1e-2, nondecreasing, shells up to {}", SHELL_RANGE.1),
                s.plateau_change() < 1e-2 && s.nondecreasing(1e-9) && full,
            ));
            let top = max_abs(s.series.values.iter().copied());
            criteria.push(Criterion::check(
                "commutators.absD_below_cap",
                top,
                format!("<= cap {:.6e}", s.cap),
                top <= s.cap,
            ));
        }
        Err(e) => {
            table.push_named(vec![("series", "absD".into())], ERROR);
            criteria.push(Criterion::failed("commutators.absD_plateau", e));
        }
    }

    let norms_abs = spectral::witness_series(DiracKind::Abs, &a, &ls, &gens);
    match spectral::trued_growth(&a, &ls, &gens) {
        Ok(g) => {
            for (k, (l, v)) in g.params.iter().zip(&g.values).enumerate() {
                let absd = norms_abs.as_ref().map(|s| Cell::Float(s.values[k])).unwrap_or(Cell::Empty);
                table.push_named(
                    vec![
                        ("series", "trueD".into()),
                        ("l", (*l).into()),
                        ("norm_trueD", (*v).into()),
                        ("norm_over_l", (v / l).into()),
                        ("norm_absD_witness", absd),
                    ],
                    OK,
                );
            }
            criteria.push(Criterion::check(
                "commutators.trueD_slope",
                g.slope,
                "> 0",
                g.slope > 0.0,
            ));
            criteria.push(Criterion::below(
                "commutators.trueD_relative_residual",
                g.relative_residual(),
                0.05,
            ));
            let lo = WITNESS_RANGE.0 as f64 + 15.0;
            let hi = WITNESS_RANGE.1 as f64;
            match (g.value_over_param(lo), g.value_over_param(hi)) {
                (Some(a20), Some(a30)) => {
                    let change = (a20 - a30).abs() / a30;
                    criteria.push(Criterion::below("commutators.trueD_value_over_l_change", change, 0.2));
                }
                _ => criteria.push(Criterion::failed(
                    "commutators.trueD_value_over_l_change",
                    format!("truncation does not reach l = {hi}"),
                )),
            }
        }
        Err(e) => {
            table.push_named(vec![("series", "trueD".into())], ERROR);
            criteria.push(Criterion::failed("commutators.trueD_slope", e));
        }
    }
    match norms_abs {
        Ok(s) => {
            let top = max_abs(s.values.iter().copied());
            criteria.push(Criterion::check(
                "commutators.absD_witness_below_cap",
                top,
                format!("<= cap {cap:.6e}"),
                top <= cap,
            ));
        }
        Err(e) => criteria.push(Criterion::failed("commutators.absD_witness_below_cap", e)),
    }
    Report { table, criteria }
}

pub fn heat(cfg: &RunConfig) -> Report {
    let mut table = Table::new(&[
        "t",
        "operator_trace",
        "closed_sum",
        "shifted_sum",
        "tail_bound",
        "k_exponent",
        "k_numeric",
        "peak",
        "s",
        "plain_trace",
        "plain_scaled",
    ]);
    let (q, trunc) = match setup(cfg) {
        Ok(x) => x,
        Err(e) => return aborted(table, "heat.setup", e),
    };
    let ts = cfg.t_grid.points().unwrap_or_default();
    let k = spectral::k_exponent(&q);
    let mut criteria = Vec::new();
    let (mut consistency, mut laplace) = (0.0f64, 0.0f64);
    let mut s_values = Vec::new();
    let mut band_error = None;
    for &t in &ts {
        let (_, k_num) = spectral::laplace_exponent_numeric(&q, t);
        laplace = laplace.max((k_num - k).abs());
        let report = match spectral::heat_trace(t, &q, &trunc) {
            Ok(r) => r,
            Err(e) => {
                table.push(vec![t.into()], ERROR);
                band_error.get_or_insert(e.to_string());
                continue;
            }
        };
        let slack = report.tail_bound + spectral::SUMMATION_TOLERANCE * report.closed_sum;
        consistency = consistency.max((report.closed_sum - report.operator_trace).abs() / slack);
        let mut cells = vec![
            t.into(),
            report.operator_trace.into(),
            report.closed_sum.into(),
            report.shifted_sum.into(),
            report.tail_bound.into(),
            k.into(),
            k_num.into(),
        ];
        match spectral::asymptotic_band(&q, &[t], &trunc) {
            Ok(band) => {
                let p = band[0];
                s_values.push(p.s);
                cells.extend([p.peak.into(), p.s.into(), p.plain_trace.into(), p.plain_scaled.into()]);
                table.push(cells, status(report.consistent()));
            }
            Err(e) => {
                cells.push(spectral::laplace_peak(&q, t).into());
                table.push(cells, ERROR);
                band_error.get_or_insert(e.to_string());
            }
        }
    }
    criteria.push(Criterion::check(
        "heat.trace_consistency",
        consistency,
        "|closed - operator| / (tail + summation tol) <= 1",
        consistency <= 1.0,
    ));
    criteria.push(Criterion::below("heat.laplace_exponent", laplace, 1e-10));
    match band_error {
        Some(e) => criteria.push(Criterion::failed("heat.band_ratio", e)),
        None if s_values.is_empty() => criteria.push(Criterion::failed("heat.band_ratio", "empty t grid")),
        None => {
            let lo = s_values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = s_values.iter().copied().fold(0.0, f64::max);
            let ratio = hi / lo;
            criteria.push(Criterion::check(
                "heat.band_ratio",
                ratio,
                "0 < min s and max s / min s < 5",
                lo > 0.0 && ratio < 5.0,
            ));
        }
    }
    Report { table, criteria }
}

pub fn modular(cfg: &RunConfig) -> Report {
    let mut table = Table::new(&["kind", "a", "b", "value"]);
    let gens = match table_for(cfg) {
        Ok(t) => t,
        Err(e) => return aborted(table, "modular.setup", e),
    };
    let words = NormalWord::all_up_to(2);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for a in &words {
        for b in &words {
            let pa = NCPolynomial::monomial(*a, Complex64::new(1.0, 0.0));
            let pb = NCPolynomial::monomial(*b, Complex64::new(1.0, 0.0));
            match spectral::modular_check(&pa, &pb, &gens) {
                Ok(d) => {
                    worst = max_abs([worst, d]);
                    table.push(
                        vec!["pair".into(), a.to_string().into(), b.to_string().into(), d.into()],
                        status(d < 1e-9),
                    );
                }
                Err(e) => {
                    table.push(vec!["pair".into(), a.to_string().into(), b.to_string().into()], ERROR);
                    failures.push(e.to_string());
                }
            }
        }
    }
    let mut scaling = 0.0f64;
    for el in SpinHalfElement::ALL {
        let r = spectral::generator_scaling_residual(el, &gens);
        scaling = max_abs([scaling, r]);
        table.push(
            vec!["generator_scaling".into(), el.to_string().into(), Cell::Empty, r.into()],
            status(r < 1e-12),
        );
    }
    let mut criteria = vec![
        Criterion::below("modular.pair_defect", worst, 1e-9),
        Criterion::below("modular.generator_scaling", scaling, 1e-12),
    ];
    if let Some(e) = failures.first() {
        criteria.push(Criterion::failed("modular.evaluation", format!("{} pairs failed: {e}", failures.len())));
    }
    Report { table, criteria }
}
