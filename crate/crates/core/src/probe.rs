//! Probe states: the two-mode squeezed vacuum and its photon-added /
//! photon-subtracted descendants, stored as truncated coefficient lists on the
//! correlated ladder `|n + idler_offset, n + signal_offset>`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::{hyp2f1, log_binomial};

/// Largest squeezing parameter `x = tanh^2 r` accepted for a probe.
pub const MAX_SQUEEZING: f64 = 0.95;

/// Largest weight the dropped coefficient tail may carry.
pub const TAIL_TOLERANCE: f64 = 1e-8;

/// Photonic operation applied to the two-mode squeezed vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOp {
    Tmsv,
    AddBoth,
    SubBoth,
    AddIdler,
    AddSignal,
    SubIdler,
    SubSignal,
}

impl ProbeOp {
    pub fn is_subtraction(self) -> bool {
        matches!(
            self,
            ProbeOp::SubBoth | ProbeOp::SubIdler | ProbeOp::SubSignal
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ProbeOp::Tmsv => "tmsv",
            ProbeOp::AddBoth => "add_both",
            ProbeOp::SubBoth => "sub_both",
            ProbeOp::AddIdler => "add_idler",
            ProbeOp::AddSignal => "add_signal",
            ProbeOp::SubIdler => "sub_idler",
            ProbeOp::SubSignal => "sub_signal",
        }
    }

    /// Spec with `n` photons added/subtracted wherever this operation acts.
    pub fn with_photons<T: Real>(self, n: u32, x: T) -> ProbeSpec<T> {
        let (k, l) = match self {
            ProbeOp::Tmsv => (0, 0),
            ProbeOp::AddBoth | ProbeOp::SubBoth => (n, n),
            ProbeOp::AddIdler | ProbeOp::SubIdler => (n, 0),
            ProbeOp::AddSignal | ProbeOp::SubSignal => (0, n),
        };
        ProbeSpec { op: self, k, l, x }
    }
}

impl fmt::Display for ProbeOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Symbolic description of a probe: operation, idler count `k`, signal count
/// `l` and squeezing `x = tanh^2 r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSpec<T> {
    pub op: ProbeOp,
    pub k: u32,
    pub l: u32,
    pub x: T,
}

impl<T: Real> ProbeSpec<T> {
    pub fn tmsv(x: T) -> Self {
        ProbeSpec {
            op: ProbeOp::Tmsv,
            k: 0,
            l: 0,
            x,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x >= T::zero() && self.x <= T::lit(MAX_SQUEEZING)) {
            return Err(Error::Domain(format!(
                "squeezing x = {} outside [0, {MAX_SQUEEZING}]",
                self.x.as_f64()
            )));
        }
        let ok = match self.op {
            ProbeOp::Tmsv => self.k == 0 && self.l == 0,
            ProbeOp::AddBoth | ProbeOp::SubBoth => true,
            ProbeOp::AddIdler | ProbeOp::SubIdler => self.l == 0 && self.k > 0,
            ProbeOp::AddSignal | ProbeOp::SubSignal => self.k == 0 && self.l > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "photon counts (k = {}, l = {}) invalid for {}",
                self.k, self.l, self.op
            )))
        }
    }

    /// Total number of photons the operation adds or removes in its busiest mode.
    pub fn photons(&self) -> u32 {
        self.k.max(self.l)
    }

    pub fn with_x(self, x: T) -> Self {
        ProbeSpec { x, ..self }
    }

    pub fn descriptor(&self) -> String {
        format!("{}(k={},l={})", self.op, self.k, self.l)
    }
}

/// Truncated pure two-mode state `sum_n c_n |n + idler_offset, n + signal_offset>`
/// for ladder indices `n_start ..= truncation`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector<T> {
    pub coeffs: Vec<T>,
    pub n_start: usize,
    pub idler_offset: i64,
    pub signal_offset: i64,
    pub truncation: usize,
}

impl<T: Real> FockVector<T> {
    /// Ladder indices paired with their coefficients.
    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, &c)| (self.n_start + i, c))
    }

    pub fn idler_index(&self, n: usize) -> usize {
        (n as i64 + self.idler_offset) as usize
    }

    pub fn signal_index(&self, n: usize) -> usize {
        (n as i64 + self.signal_offset) as usize
    }

    /// Physical `(idler, signal)` Fock indices with coefficients.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.iter()
            .map(move |(n, c)| (self.idler_index(n), self.signal_index(n), c))
    }

    pub fn norm_sq(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |acc, &c| acc + c * c)
    }

    /// Weight missing from the truncated coefficient list.
    pub fn tail_weight(&self) -> T {
        (T::one() - self.norm_sq()).max(T::zero())
    }

    pub fn max_idler(&self) -> usize {
        self.idler_index(self.truncation)
    }

    pub fn max_signal(&self) -> usize {
        self.signal_index(self.truncation)
    }

    /// Mean photon number of the idler mode.
    pub fn idler_mean(&self) -> T {
        self.entries()
            .fold(T::zero(), |acc, (i, _, c)| acc + T::from_count(i) * c * c)
    }
}

/// Ladder coefficients and offsets, evaluated in log space.
fn ladder_layout<T: Real>(
    spec: &ProbeSpec<T>,
) -> Result<(usize, i64, i64, Box<dyn Fn(usize) -> Result<T>>)> {
    let x = spec.x;
    let ln_x = if x > T::zero() { x.ln() } else { T::zero() };
    let half = T::lit(0.5);
    // ln x^{e/2}; at x = 0 only the leading term survives and the caller zeroes the rest
    let power = move |e: usize| -> T { half * T::from_count(e) * ln_x };
    let one_minus = (T::one() - x).ln();
    let (k, l) = (spec.k as usize, spec.l as usize);
    match spec.op {
        ProbeOp::Tmsv | ProbeOp::AddBoth => {
            let norm = if spec.op == ProbeOp::Tmsv {
                -one_minus
            } else {
                hyp2f1(spec.k + 1, spec.l + 1, 1, x)?.value.ln()
            };
            let f = move |n: usize| -> Result<T> {
                let ln_c = power(n)
                    + half * (log_binomial::<T>(n + k, k)? + log_binomial::<T>(n + l, l)?)
                    - half * norm;
                Ok(ln_c)
            };
            Ok((0, k as i64, l as i64, Box::new(f)))
        }
        ProbeOp::SubBoth => {
            // the closed form assumes k >= l; otherwise interchange k and l
            let (big, small) = (k.max(l), k.min(l));
            let norm = hyp2f1(big as u32 + 1, big as u32 + 1, (1 + big - small) as u32, x)?
                .value
                .ln();
            let ln_denominator = log_binomial::<T>(big, small)?;
            let f = move |n: usize| -> Result<T> {
                Ok(power(n - big)
                    + half
                        * (log_binomial::<T>(n, big)? + log_binomial::<T>(n, small)?
                            - ln_denominator)
                    - half * norm)
            };
            Ok((big, -(k as i64), -(l as i64), Box::new(f)))
        }
        ProbeOp::AddIdler | ProbeOp::AddSignal => {
            let m = k.max(l);
            let scale = half * T::from_count(1 + m) * one_minus;
            let f = move |n: usize| -> Result<T> {
                Ok(power(n) + scale + half * log_binomial::<T>(n + m, m)?)
            };
            Ok((0, k as i64, l as i64, Box::new(f)))
        }
        ProbeOp::SubIdler | ProbeOp::SubSignal => {
            let m = k.max(l);
            let scale = half * T::from_count(1 + m) * one_minus;
            let f = move |n: usize| -> Result<T> {
                Ok(power(n - m) + scale + half * log_binomial::<T>(n, m)?)
            };
            Ok((m, -(k as i64), -(l as i64), Box::new(f)))
        }
    }
}

/// Builds the truncated coefficient vector on ladder indices `n_start ..= trunc`.
///
/// Fails with [`Error::Truncation`] when the dropped tail carries weight of
/// `1e-8` or more; the error names a sufficient truncation.
pub fn build_probe<T: Real>(spec: &ProbeSpec<T>, trunc: usize) -> Result<FockVector<T>> {
    spec.validate()?;
    let (n_start, idler_offset, signal_offset, ln_coeff) = ladder_layout(spec)?;
    if trunc < n_start {
        return Err(Error::Truncation {
            trunc,
            tail: 1.0,
            required: n_start + 1,
        });
    }
    let coeffs = (n_start..=trunc)
        .map(|n| {
            ln_coeff(n).map(|v| {
                if spec.x == T::zero() && n > n_start {
                    T::zero()
                } else {
                    v.exp()
                }
            })
        })
        .collect::<Result<Vec<T>>>()?;
    let v = FockVector {
        coeffs,
        n_start,
        idler_offset,
        signal_offset,
        truncation: trunc,
    };
    let tail = v.tail_weight();
    if tail >= T::lit(TAIL_TOLERANCE) {
        let mut acc = v.norm_sq();
        let mut required = trunc;
        while T::one() - acc >= T::lit(TAIL_TOLERANCE) && required < trunc + 100_000 {
            required += 1;
            let c = ln_coeff(required)?.exp();
            acc += c * c;
        }
        return Err(Error::Truncation {
            trunc,
            tail: tail.as_f64(),
            required,
        });
    }
    Ok(v)
}

/// Mean photon number of the signal mode.
pub fn signal_strength<T: Real>(v: &FockVector<T>) -> T {
    v.entries()
        .fold(T::zero(), |acc, (_, s, c)| acc + T::from_count(s) * c * c)
}

/// Starting ladder truncation: 35 for the squeezed vacuum and added states,
/// 45 for subtracted states.
pub fn choose_truncation<T: Real>(spec: &ProbeSpec<T>) -> usize {
    if spec.op.is_subtraction() {
        45
    } else {
        35
    }
}

/// Coherent amplitude `|omega|^2` carrying the same mean signal photon number.
pub fn coherent_signal_match<T: Real>(v: &FockVector<T>) -> T {
    signal_strength(v)
}
