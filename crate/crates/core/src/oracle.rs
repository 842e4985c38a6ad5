//! Independent Haar-state oracle: the irreducible ladder representation of
//! the relations on `l^2(N)`, tensored with a circle variable `u`, and the
//! circle average taken symbolically.
//!
//! On level `k`:
//! `alpha e_k = sqrt(1 - q^{-2(k+1)}) e_{k+1}`, `alpha^* e_k = sqrt(1 - q^{-2k}) e_{k-1}`,
//! `gamma e_k = q^{-(k+1)} u e_k`, `gamma^* e_k = q^{-(k+1)} u^* e_k`.
//! The Haar state is `psi(p) = (1 - q^{-2}) sum_k q^{-2k} <e_k, p e_k>`
//! restricted to the winding-zero part. This path shares no code with the
//! Peter-Weyl construction in [`crate::algebra`].

use num_complex::Complex64;

use crate::algebra::{Letter, NCPolynomial, Word};
use crate::error::{Error, Result};
use crate::qarith::DeformationParameter;

/// Level `k` of the ladder together with the net power of `u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LadderState {
    pub k: i64,
    pub winding: i64,
}

/// Result of applying a word to `e_k`: `amplitude * u^winding e_{k'}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderImage {
    pub amplitude: f64,
    pub state: LadderState,
}

/// Apply `word` (rightmost letter first) to `e_k`, with levels capped at `cap`.
///
/// A lowering step from level 0 annihilates the vector (amplitude 0).
/// Raising past `cap` is a [`Error::LevelOverflow`].
pub fn rep_apply(word: &Word, k: i64, cap: i64, q: &DeformationParameter) -> Result<LadderImage> {
    if k < 0 || k > cap {
        return Err(Error::LevelOverflow { level: k, cap });
    }
    let qq = q.q();
    let mut amp = 1.0;
    let mut level = k;
    let mut winding = 0;
    for letter in word.0.iter().rev() {
        match letter {
            Letter::Alpha => {
                amp *= (1.0 - qq.powi(-2 * (level as i32 + 1))).sqrt();
                level += 1;
                if level > cap {
                    return Err(Error::LevelOverflow { level, cap });
                }
            }
            Letter::AlphaStar => {
                if level == 0 {
                    return Ok(LadderImage {
                        amplitude: 0.0,
                        state: LadderState { k: 0, winding },
                    });
                }
                amp *= (1.0 - qq.powi(-2 * level as i32)).sqrt();
                level -= 1;
            }
            Letter::Gamma => {
                amp *= qq.powi(-(level as i32 + 1));
                winding += 1;
            }
            Letter::GammaStar => {
                amp *= qq.powi(-(level as i32 + 1));
                winding -= 1;
            }
        }
    }
    Ok(LadderImage {
        amplitude: amp,
        state: LadderState { k: level, winding },
    })
}

fn level_shift(word: &Word) -> i64 {
    word.0
        .iter()
        .map(|l| match l {
            Letter::Alpha => 1,
            Letter::AlphaStar => -1,
            _ => 0,
        })
        .sum()
}

/// `psi(p)` from the ladder model, summing levels `0..=cap`.
///
/// The neglected tail is of relative size `q^{-2(cap+1)}`.
pub fn oracle_haar(p: &NCPolynomial, cap: i64, q: &DeformationParameter) -> Result<Complex64> {
    let qq = q.q();
    let weight0 = 1.0 - qq.powi(-2);
    let mut total = Complex64::new(0.0, 0.0);
    for (nw, c) in p.terms() {
        let word = nw.word();
        // off-diagonal in the level: contributes nothing
        if level_shift(&word) != 0 {
            continue;
        }
        let mut s = 0.0;
        for k in 0..=cap {
            let img = rep_apply(&word, k, cap, q)?;
            if img.state.winding == 0 && img.state.k == k {
                s += qq.powi(-2 * k as i32) * img.amplitude;
            }
        }
        total += c * (weight0 * s);
    }
    Ok(total)
}

/// Smallest level cap whose geometric tail `q^{-2(cap+1)}` is below `tol`.
pub fn level_cap_for(tol: f64, q: &DeformationParameter) -> i64 {
    let r = q.q().max(q.q().recip());
    ((tol.recip().ln() / (2.0 * r.ln())).ceil() as i64).max(1)
}
