//! Mutual information, logarithmic negativity and entanglement entropy, all in bits.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{eigenvalues, psd_eigenvalues};
use crate::state::DensityMatrix;

fn xlog2x<T: Real>(v: T) -> T {
    if v > T::zero() {
        v * v.log2()
    } else {
        T::zero()
    }
}

/// `-sum lambda log2 lambda` over the spectrum.
pub fn von_neumann_entropy<T: Real>(rho: &DensityMatrix<T>) -> Result<T> {
    Ok(-psd_eigenvalues(&rho.data)?
        .into_iter()
        .fold(T::zero(), |acc, l| acc + xlog2x(l)))
}

fn two_mode_dims<T: Real>(rho: &DensityMatrix<T>) -> Result<(usize, usize)> {
    match rho.dims.as_slice() {
        [di, ds] => Ok((*di, *ds)),
        other => Err(Error::DimensionMismatch(format!(
            "expected two modes, got dims {other:?}"
        ))),
    }
}

/// `S(rho_idler) + S(rho_signal) - S(rho)`.
pub fn mutual_information<T: Real>(rho: &DensityMatrix<T>) -> Result<T> {
    two_mode_dims(rho)?;
    let idler = rho.partial_trace(true)?;
    let signal = rho.partial_trace(false)?;
    Ok(von_neumann_entropy(&idler)? + von_neumann_entropy(&signal)? - von_neumann_entropy(rho)?)
}

/// Transpose on the idler factor of an idler-major two-mode matrix.
pub fn partial_transpose<T: Real>(rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
    let (di, ds) = two_mode_dims(rho)?;
    let data = DMatrix::from_fn(di * ds, di * ds, |r, c| {
        let (i, s) = (r / ds, r % ds);
        let (i2, s2) = (c / ds, c % ds);
        rho.data[(i2 * ds + s, i * ds + s2)]
    });
    Ok(DensityMatrix {
        data,
        ..rho.clone()
    })
}

/// Sum of the magnitudes of the negative eigenvalues of the partial transpose.
pub fn negativity<T: Real>(rho: &DensityMatrix<T>) -> Result<T> {
    let pt = partial_transpose(rho)?;
    Ok(eigenvalues(&pt.data)
        .into_iter()
        .filter(|&l| l < T::zero())
        .fold(T::zero(), |acc, l| acc - l))
}

/// `log2(2 N + 1)` with `N` the [`negativity`].
pub fn log_negativity<T: Real>(rho: &DensityMatrix<T>) -> Result<T> {
    Ok((T::lit(2.0) * negativity(rho)? + T::one()).log2())
}

/// Entanglement entropy of a two-mode squeezed vacuum with `n_s` signal photons,
/// `(N_S + 1) log2(N_S + 1) - N_S log2 N_S`.
pub fn tmsv_entanglement_closed_form<T: Real>(n_s: T) -> Result<T> {
    if !(n_s >= T::zero()) {
        return Err(Error::Domain(format!(
            "n_s = {} must be >= 0",
            n_s.as_f64()
        )));
    }
    Ok(xlog2x(n_s + T::one()) - xlog2x(n_s))
}

/// `(N_S, E / N_S)` along an increasing grid of signal strengths.
pub fn entanglement_per_photon_limit_check<T: Real>(grid: &[T]) -> Result<Vec<(T, T)>> {
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition(
            "signal-strength grid must be strictly increasing".into(),
        ));
    }
    grid.iter()
        .map(|&n| {
            if n <= T::zero() {
                return Err(Error::Domain("per-photon ratio needs n_s > 0".into()));
            }
            Ok((n, tmsv_entanglement_closed_form(n)? / n))
        })
        .collect()
}

/// Correlations of a two-mode probe, absolute and per signal photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport<T> {
    pub mutual_info: T,
    pub log_negativity: T,
    pub n_s: T,
    /// `None` when the probe carries no signal photons.
    pub mi_per_photon: Option<T>,
    pub ln_per_photon: Option<T>,
}

/// Correlations of `rho`, normalized by its own mean signal photon number.
pub fn correlation_report<T: Real>(rho: &DensityMatrix<T>) -> Result<CorrelationReport<T>> {
    correlation_report_per(rho, rho.mean_signal_photons())
}

/// Correlations of `rho` per `n_s` signal photons.
pub fn correlation_report_per<T: Real>(
    rho: &DensityMatrix<T>,
    n_s: T,
) -> Result<CorrelationReport<T>> {
    if !(n_s >= T::zero()) {
        return Err(Error::Domain(format!(
            "n_s = {} must be >= 0",
            n_s.as_f64()
        )));
    }
    let mutual_info = mutual_information(rho)?.max(T::zero());
    let log_negativity = log_negativity(rho)?;
    let per = |v: T| if n_s > T::zero() { Some(v / n_s) } else { None };
    Ok(CorrelationReport {
        mutual_info,
        log_negativity,
        n_s,
        mi_per_photon: per(mutual_info),
        ln_per_photon: per(log_negativity),
    })
}
