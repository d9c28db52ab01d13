//! Density matrices for the two hypotheses.
//!
//! The target is a beam splitter of reflectivity `kappa` that mixes the signal
//! mode with a thermal bath of mean photon number `n_bath`; the detector keeps
//! the output port carrying `sqrt(kappa)` of the signal. With the target
//! absent the detector sees the idler together with the bare bath.
//!
//! Two-mode matrices are stored idler-major: flat index
//! `idler * d_signal + signal`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe::{build_probe, choose_truncation, FockVector, ProbeSpec};
use crate::scalar::{pow0, Real};
use crate::special::{jacobi_theta3_zero, ln_factorial};
use crate::spectral::{self, clamp_spectrum};

/// Largest admissible trace deficit of an accepted matrix.
pub const TRACE_TOLERANCE: f64 = 1e-8;

/// Default cap on the total Hilbert-space dimension of an assembled matrix.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

/// Eigenvalues below this abort assembly.
pub const ASSEMBLY_NEGATIVITY_TOLERANCE: f64 = 1e-8;

const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Bath weight the starting thermal cutoff may drop.
const BATH_CUTOFF_TOLERANCE: f64 = 1e-10;

/// How the bath entering the target beam splitter is populated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BathModel {
    /// The bath mode mixed in at the target carries `n_bath` photons, the same
    /// occupation the detector sees when the target is absent.
    Bare,
    /// The bath mode carries `n_bath / (1 - kappa)`, so the detected
    /// background is `n_bath` under both hypotheses.
    #[default]
    Compensated,
}

/// Target reflectivity and bath occupation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams<T> {
    pub kappa: T,
    pub n_bath: T,
    pub bath: BathModel,
}

fn geometric_weight<T: Real>(nb: T, m: usize) -> T {
    pow0(nb / (T::one() + nb), T::from_count(m)) / (T::one() + nb)
}

fn geometric_tail<T: Real>(nb: T, m_trunc: usize) -> T {
    pow0(nb / (T::one() + nb), T::from_count(m_trunc + 1))
}

impl<T: Real> ChannelParams<T> {
    pub fn new(kappa: T, n_bath: T) -> Result<Self> {
        Self::with_bath(kappa, n_bath, BathModel::default())
    }

    pub fn with_bath(kappa: T, n_bath: T, bath: BathModel) -> Result<Self> {
        let ch = ChannelParams {
            kappa,
            n_bath,
            bath,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= T::zero() && self.kappa <= T::one()) {
            return Err(Error::Domain(format!(
                "kappa = {} outside [0, 1]",
                self.kappa.as_f64()
            )));
        }
        if !(self.n_bath >= T::zero() && self.n_bath.is_finite()) {
            return Err(Error::Domain(format!(
                "n_bath = {} must be >= 0",
                self.n_bath.as_f64()
            )));
        }
        if self.bath == BathModel::Compensated && self.kappa == T::one() && self.n_bath > T::zero()
        {
            return Err(Error::Domain("compensated bath needs kappa < 1".into()));
        }
        Ok(())
    }

    /// Occupation of the bath mode that enters the target beam splitter.
    pub fn channel_bath(&self) -> T {
        match self.bath {
            BathModel::Bare => self.n_bath,
            BathModel::Compensated if self.n_bath == T::zero() => T::zero(),
            BathModel::Compensated => self.n_bath / (T::one() - self.kappa),
        }
    }

    /// Probability of `m` photons in the detected background with the target absent.
    pub fn thermal_weight(&self, m: usize) -> T {
        geometric_weight(self.n_bath, m)
    }

    /// Background weight lost beyond `m_trunc`.
    pub fn thermal_tail(&self, m_trunc: usize) -> T {
        geometric_tail(self.n_bath, m_trunc)
    }

    /// Probability of `m` photons in the bath mode mixed in at the target.
    pub fn channel_weight(&self, m: usize) -> T {
        geometric_weight(self.channel_bath(), m)
    }

    pub fn channel_tail(&self, m_trunc: usize) -> T {
        geometric_tail(self.channel_bath(), m_trunc)
    }

    /// Smallest cutoff whose dropped bath weight (in either hypothesis) is below `tol`.
    pub fn thermal_cutoff(&self, tol: f64) -> usize {
        let nb = self.n_bath.max(self.channel_bath());
        let mut m = 0;
        while geometric_tail(nb, m) >= T::lit(tol) && m < 1_000_000 {
            m += 1;
        }
        m
    }
}

/// Amplitudes `<p, N - p| U |q, N - q>` of the beam splitter on the `N`-photon
/// sector, where the first mode of the input is the signal and the first mode
/// of the output is the detected port.
///
/// `U = exp(phi L)` with `cos(phi) = sqrt(kappa)` and `L` the real
/// antisymmetric generator with superdiagonal `sqrt((p + 1)(N - p))`.
/// Conjugating by `diag(i^p)` turns `L` into `-i H` with `H` real symmetric
/// tridiagonal, so `U = D^* V e^{-i phi Lambda} V^T D` is obtained from one
/// symmetric eigendecomposition and stays orthogonal to rounding.
fn sector_rotation<T: Real>(total: usize, phi: T) -> DMatrix<T> {
    let dim = total + 1;
    if dim == 1 {
        return DMatrix::identity(1, 1);
    }
    let h = DMatrix::from_fn(dim, dim, |p, q| {
        if q == p + 1 {
            T::from_count((p + 1) * (total - p)).sqrt()
        } else if p == q + 1 {
            T::from_count((q + 1) * (total - q)).sqrt()
        } else {
            T::zero()
        }
    });
    let eig = SymmetricEigen::new(h);
    let half_pi = T::frac_pi_2();
    // the spectrum of H is exactly {-N, -N + 2, ..., N}
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut lambda = vec![T::zero(); dim];
    for (rank, &col) in order.iter().enumerate() {
        lambda[col] = T::from_count(2 * rank) - T::from_count(total);
    }
    let v = &eig.eigenvectors;
    DMatrix::from_fn(dim, dim, |p, q| {
        let shift = half_pi * (T::from_count(q) - T::from_count(p));
        (0..dim).fold(T::zero(), |acc, c| {
            acc + v[(p, c)] * v[(q, c)] * (shift - phi * lambda[c]).cos()
        })
    })
}

/// Thermal-loss channel on the signal mode, tabulated for inputs up to
/// `max_input` photons and bath occupations up to `m_trunc`.
///
/// `amplitude(m, a)[t]` is the amplitude for `a` signal photons and `m` bath
/// photons to leave `t` photons in the discarded port and `a + m - t` in the
/// detected one.
#[derive(Debug, Clone)]
pub struct ThermalLossChannel<T: Real> {
    pub params: ChannelParams<T>,
    pub m_trunc: usize,
    pub max_input: usize,
    weights: Vec<T>,
    amps: Vec<Vec<Vec<T>>>,
}

impl<T: Real> ThermalLossChannel<T> {
    pub fn new(params: ChannelParams<T>, m_trunc: usize, max_input: usize) -> Result<Self> {
        params.validate()?;
        let weights: Vec<T> = (0..=m_trunc).map(|m| params.channel_weight(m)).collect();
        let phi = params.kappa.sqrt().acos();
        let mut amps = vec![vec![Vec::new(); max_input + 1]; m_trunc + 1];
        for total in 0..=(m_trunc + max_input) {
            let u = sector_rotation(total, phi);
            for a in total.saturating_sub(m_trunc)..=total.min(max_input) {
                let m = total - a;
                amps[m][a] = (0..=total).map(|t| u[(total - t, a)]).collect();
            }
        }
        Ok(ThermalLossChannel {
            params,
            m_trunc,
            max_input,
            weights,
            amps,
        })
    }

    pub fn weight(&self, m: usize) -> T {
        self.weights[m]
    }

    pub fn amplitude(&self, m: usize, a: usize) -> &[T] {
        &self.amps[m][a]
    }

    /// Largest detected photon number the channel can produce.
    pub fn max_output(&self) -> usize {
        self.max_input + self.m_trunc
    }

    /// Captured thermal weight.
    pub fn thermal_mass(&self) -> T {
        self.weights.iter().fold(T::zero(), |a, &w| a + w)
    }

    /// Diagonal of the channel output for a Fock-diagonal input.
    pub fn apply_diagonal(&self, input: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.max_output() + 1];
        for (a, &pa) in input.iter().enumerate() {
            if pa == T::zero() {
                continue;
            }
            for m in 0..=self.m_trunc {
                let w = self.weights[m] * pa;
                for (t, &amp) in self.amps[m][a].iter().enumerate() {
                    out[a + m - t] += w * amp * amp;
                }
            }
        }
        out
    }
}

/// Truncation bookkeeping attached to an assembled matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Truncation {
    /// Ladder (or single-mode Fock) cutoff of the probe.
    pub ladder: usize,
    /// Bath photon-number cutoff.
    pub thermal: usize,
}

/// Dense real symmetric density matrix with per-mode dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    pub data: DMatrix<T>,
    /// `[d_idler, d_signal]` for two modes, `[d_signal]` for one.
    pub dims: Vec<usize>,
    /// One minus the trace before renormalization.
    pub trace_deficit: T,
    pub truncation: Truncation,
}

impl<T: Real> DensityMatrix<T> {
    /// Wraps an already normalized matrix.
    pub fn from_matrix(data: DMatrix<T>, dims: Vec<usize>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if data.nrows() != total || data.ncols() != total {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, dims {:?} imply {total}",
                data.nrows(),
                data.ncols(),
                dims
            )));
        }
        Ok(DensityMatrix {
            data,
            dims,
            trace_deficit: T::zero(),
            truncation: Truncation::default(),
        })
    }

    pub fn diagonal(diag: &[T], dims: Vec<usize>) -> Result<Self> {
        let n = diag.len();
        Self::from_matrix(
            DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { T::zero() }),
            dims,
        )
    }

    /// Pure state `|psi><psi|`.
    pub fn pure(psi: &[T], dims: Vec<usize>) -> Result<Self> {
        let n = psi.len();
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| psi[i] * psi[j]), dims)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_two_mode(&self) -> bool {
        self.dims.len() == 2
    }

    pub fn trace(&self) -> T {
        self.data.trace()
    }

    pub fn get(&self, idler: usize, signal: usize, idler2: usize, signal2: usize) -> T {
        let ds = self.dims[self.dims.len() - 1];
        self.data[(idler * ds + signal, idler2 * ds + signal2)]
    }

    pub fn max_asymmetry(&self) -> T {
        let n = self.dim();
        let mut worst = T::zero();
        for j in 0..n {
            for i in (j + 1)..n {
                worst = worst.max((self.data[(i, j)] - self.data[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> T {
        spectral::eigenvalues(&self.data)
            .into_iter()
            .fold(T::max_value().unwrap_or(T::one()), |a, b| a.min(b))
    }

    pub fn purity(&self) -> T {
        self.data.component_mul(&self.data).sum()
    }

    /// Expectation of a function of the per-mode photon numbers (diagonal observable).
    pub fn expect_diagonal(&self, f: impl Fn(&[usize]) -> T) -> T {
        let mut acc = T::zero();
        match self.dims.as_slice() {
            [di, ds] => {
                for i in 0..*di {
                    for s in 0..*ds {
                        let k = i * ds + s;
                        acc += self.data[(k, k)] * f(&[i, s]);
                    }
                }
            }
            _ => {
                for s in 0..self.dim() {
                    acc += self.data[(s, s)] * f(&[s]);
                }
            }
        }
        acc
    }

    pub fn mean_signal_photons(&self) -> T {
        self.expect_diagonal(|ix| T::from_count(ix[ix.len() - 1]))
    }

    pub fn mean_idler_photons(&self) -> T {
        if self.is_two_mode() {
            self.expect_diagonal(|ix| T::from_count(ix[0]))
        } else {
            T::zero()
        }
    }

    /// Reduced state of the idler (`keep_idler`) or of the signal.
    pub fn partial_trace(&self, keep_idler: bool) -> Result<DensityMatrix<T>> {
        let (di, ds) = match self.dims.as_slice() {
            [di, ds] => (*di, *ds),
            _ => {
                return Err(Error::DimensionMismatch(
                    "partial trace needs two modes".into(),
                ))
            }
        };
        let data = if keep_idler {
            DMatrix::from_fn(di, di, |i, i2| {
                (0..ds).fold(T::zero(), |a, s| a + self.data[(i * ds + s, i2 * ds + s)])
            })
        } else {
            DMatrix::from_fn(ds, ds, |s, s2| {
                (0..di).fold(T::zero(), |a, i| a + self.data[(i * ds + s, i * ds + s2)])
            })
        };
        let dims = vec![if keep_idler { di } else { ds }];
        Ok(DensityMatrix {
            data,
            dims,
            trace_deficit: self.trace_deficit,
            truncation: self.truncation,
        })
    }

    /// Symmetry and positivity check on a freshly assembled matrix.
    pub fn check_integrity(&self) -> Result<()> {
        let asym = self.max_asymmetry();
        if asym > T::lit(SYMMETRY_TOLERANCE) {
            return Err(Error::NumericalIntegrity(format!(
                "asymmetry {:e}",
                asym.as_f64()
            )));
        }
        let mut values = nalgebra::DVector::from_vec(spectral::eigenvalues(&self.data));
        clamp_spectrum(&mut values, ASSEMBLY_NEGATIVITY_TOLERANCE)
    }

    fn normalized(mut self) -> Self {
        let tr = self.data.trace();
        self.trace_deficit = T::one() - tr;
        if tr > T::zero() {
            self.data /= tr;
        }
        self
    }

    /// Nonzero `(row, col, value)` triplets.
    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let n = self.dim();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = self.data[(i, j)];
                if v != T::zero() {
                    out.push((i, j, v));
                }
            }
        }
        out
    }
}

/// Member of a probe mixture.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeComponent<T: Real> {
    /// Pure ladder state.
    Pure(FockVector<T>),
    /// Fock-diagonal product state `sum mu_i |i><i| (x) sum nu_j |j><j|`.
    Product { idler: Vec<T>, signal: Vec<T> },
}

impl<T: Real> ProbeComponent<T> {
    fn max_idler(&self) -> usize {
        match self {
            ProbeComponent::Pure(v) => v.max_idler(),
            ProbeComponent::Product { idler, .. } => idler.len().saturating_sub(1),
        }
    }

    fn max_signal(&self) -> usize {
        match self {
            ProbeComponent::Pure(v) => v.max_signal(),
            ProbeComponent::Product { signal, .. } => signal.len().saturating_sub(1),
        }
    }

    fn signal_strength(&self) -> T {
        match self {
            ProbeComponent::Pure(v) => crate::probe::signal_strength(v),
            ProbeComponent::Product { signal, .. } => mean_of(signal),
        }
    }
}

fn mean_of<T: Real>(dist: &[T]) -> T {
    dist.iter()
        .enumerate()
        .fold(T::zero(), |a, (n, &p)| a + T::from_count(n) * p)
}

/// Convex mixture of probe states.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeEnsemble<T: Real> {
    pub members: Vec<(T, ProbeComponent<T>)>,
}

impl<T: Real> ProbeEnsemble<T> {
    pub fn pure(v: FockVector<T>) -> Self {
        ProbeEnsemble {
            members: vec![(T::one(), ProbeComponent::Pure(v))],
        }
    }

    pub fn total_weight(&self) -> T {
        self.members.iter().fold(T::zero(), |a, (w, _)| a + *w)
    }

    /// Mean signal photon number of the mixture.
    pub fn signal_strength(&self) -> T {
        self.members
            .iter()
            .fold(T::zero(), |a, (w, c)| a + *w * c.signal_strength())
    }

    pub fn ladder_truncation(&self) -> usize {
        self.members
            .iter()
            .map(|(_, c)| match c {
                ProbeComponent::Pure(v) => v.truncation,
                ProbeComponent::Product { idler, .. } => idler.len().saturating_sub(1),
            })
            .max()
            .unwrap_or(0)
    }

    fn idler_dim(&self) -> usize {
        self.members
            .iter()
            .map(|(_, c)| c.max_idler())
            .max()
            .unwrap_or(0)
            + 1
    }

    fn max_signal_input(&self) -> usize {
        self.members
            .iter()
            .map(|(_, c)| c.max_signal())
            .max()
            .unwrap_or(0)
    }

    /// Idler and signal dimensions of the assembled pair for a thermal cutoff.
    pub fn dims(&self, m_trunc: usize) -> (usize, usize) {
        (self.idler_dim(), self.max_signal_input() + m_trunc + 1)
    }

    /// The probe itself as a two-mode density matrix (no channel).
    pub fn probe_matrix(&self) -> Result<DensityMatrix<T>> {
        let di = self.idler_dim();
        let ds = self.max_signal_input() + 1;
        check_cap(di * ds, usize::MAX)?;
        let mut data = DMatrix::zeros(di * ds, di * ds);
        for (w, comp) in &self.members {
            match comp {
                ProbeComponent::Pure(v) => {
                    let e: Vec<_> = v.entries().collect();
                    for &(i, s, c) in &e {
                        for &(i2, s2, c2) in &e {
                            data[(i * ds + s, i2 * ds + s2)] += *w * c * c2;
                        }
                    }
                }
                ProbeComponent::Product { idler, signal } => {
                    for (i, &pi) in idler.iter().enumerate() {
                        for (s, &ps) in signal.iter().enumerate() {
                            data[(i * ds + s, i * ds + s)] += *w * pi * ps;
                        }
                    }
                }
            }
        }
        let tr = data.trace();
        let dm = DensityMatrix {
            data,
            dims: vec![di, ds],
            trace_deficit: T::zero(),
            truncation: Truncation {
                ladder: self.ladder_truncation(),
                thermal: 0,
            },
        };
        let mut dm = dm.normalized();
        dm.trace_deficit = T::one() - tr;
        Ok(dm)
    }
}

fn check_cap(dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        Err(Error::Resource { dim, cap })
    } else {
        Ok(())
    }
}

/// Target-present state `Tr_bath[U (rho_probe (x) rho_bath) U^dag]`.
pub fn assemble_rho1<T: Real>(
    probe: &ProbeEnsemble<T>,
    ch: &ChannelParams<T>,
    m_trunc: usize,
) -> Result<DensityMatrix<T>> {
    assemble_rho1_capped(probe, ch, m_trunc, DEFAULT_DIMENSION_CAP)
}

pub fn assemble_rho1_capped<T: Real>(
    probe: &ProbeEnsemble<T>,
    ch: &ChannelParams<T>,
    m_trunc: usize,
    cap: usize,
) -> Result<DensityMatrix<T>> {
    let (di, ds) = probe.dims(m_trunc);
    check_cap(di * ds, cap)?;
    let channel = ThermalLossChannel::new(*ch, m_trunc, probe.max_signal_input())?;
    let mut data = DMatrix::zeros(di * ds, di * ds);
    for (w, comp) in &probe.members {
        match comp {
            ProbeComponent::Pure(v) => add_pure_ladder(&mut data, ds, *w, v, &channel),
            ProbeComponent::Product { idler, signal } => {
                let out = channel.apply_diagonal(signal);
                for (i, &pi) in idler.iter().enumerate() {
                    for (s, &ps) in out.iter().enumerate() {
                        data[(i * ds + s, i * ds + s)] += *w * pi * ps;
                    }
                }
            }
        }
    }
    let dm = DensityMatrix {
        data,
        dims: vec![di, ds],
        trace_deficit: T::zero(),
        truncation: Truncation {
            ladder: probe.ladder_truncation(),
            thermal: m_trunc,
        },
    }
    .normalized();
    dm.check_integrity()?;
    Ok(dm)
}

fn add_pure_ladder<T: Real>(
    data: &mut DMatrix<T>,
    ds: usize,
    weight: T,
    v: &FockVector<T>,
    channel: &ThermalLossChannel<T>,
) {
    let entries: Vec<(usize, usize, T)> = v.entries().filter(|e| e.2 != T::zero()).collect();
    let max_total = channel.max_output();
    let mut amp = vec![T::zero(); entries.len()];
    for m in 0..=channel.m_trunc {
        let w = weight * channel.weight(m);
        if w == T::zero() {
            continue;
        }
        for t in 0..=max_total {
            let mut any = false;
            for (slot, &(_, s, c)) in amp.iter_mut().zip(&entries) {
                let a = channel.amplitude(m, s);
                *slot = if t < a.len() { c * a[t] } else { T::zero() };
                any |= *slot != T::zero();
            }
            if !any {
                continue;
            }
            for (p, &(i, s, _)) in entries.iter().enumerate() {
                if amp[p] == T::zero() {
                    continue;
                }
                let row = i * ds + s + m - t;
                let scaled = w * amp[p];
                for (q, &(i2, s2, _)) in entries.iter().enumerate() {
                    if amp[q] != T::zero() {
                        data[(row, i2 * ds + s2 + m - t)] += scaled * amp[q];
                    }
                }
            }
        }
    }
}

/// Target-absent state: idler marginal of the probe times the bare bath,
/// laid out like [`assemble_rho1`] with the same `m_trunc`.
pub fn assemble_rho0<T: Real>(
    probe: &ProbeEnsemble<T>,
    ch: &ChannelParams<T>,
    m_trunc: usize,
) -> Result<DensityMatrix<T>> {
    assemble_rho0_capped(probe, ch, m_trunc, DEFAULT_DIMENSION_CAP)
}

pub fn assemble_rho0_capped<T: Real>(
    probe: &ProbeEnsemble<T>,
    ch: &ChannelParams<T>,
    m_trunc: usize,
    cap: usize,
) -> Result<DensityMatrix<T>> {
    ch.validate()?;
    let (di, ds) = probe.dims(m_trunc);
    check_cap(di * ds, cap)?;
    let mut idler = vec![T::zero(); di];
    for (w, comp) in &probe.members {
        match comp {
            ProbeComponent::Pure(v) => {
                for (i, _, c) in v.entries() {
                    idler[i] += *w * c * c;
                }
            }
            ProbeComponent::Product { idler: mu, signal } => {
                let mass = signal.iter().fold(T::zero(), |a, &p| a + p);
                for (i, &p) in mu.iter().enumerate() {
                    idler[i] += *w * p * mass;
                }
            }
        }
    }
    let mut data = DMatrix::zeros(di * ds, di * ds);
    for (i, &pi) in idler.iter().enumerate() {
        for m in 0..ds {
            let k = i * ds + m;
            data[(k, k)] = pi * ch.thermal_weight(m);
        }
    }
    Ok(DensityMatrix {
        data,
        dims: vec![di, ds],
        trace_deficit: T::zero(),
        truncation: Truncation {
            ladder: probe.ladder_truncation(),
            thermal: m_trunc,
        },
    }
    .normalized())
}

/// Probe noise models.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel<T> {
    None,
    /// `(1 - p) |psi><psi| + p mu (x) nu` with Gaussian photon distributions of widths `sigma1`, `sigma2`.
    LocalGaussian {
        p: T,
        sigma1: T,
        sigma2: T,
    },
    /// The generator delivers squeezing `x_actual` instead of the designed value.
    FaultySqueezer {
        x_actual: T,
    },
    /// `(probability, photon discrepancy)` pairs of an imperfect photonic operation.
    ImperfectOperation {
        weights: Vec<(T, u32)>,
    },
}

impl<T: Real> NoiseModel<T> {
    pub fn local_gaussian(p: T) -> Self {
        NoiseModel::LocalGaussian {
            p,
            sigma1: T::one(),
            sigma2: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::None => Ok(()),
            NoiseModel::LocalGaussian { p, sigma1, sigma2 } => {
                if !(*p >= T::zero() && *p <= T::one()) {
                    return Err(Error::Domain(format!(
                        "mixing weight p = {} outside [0, 1]",
                        p.as_f64()
                    )));
                }
                if !(*sigma1 > T::zero() && *sigma2 > T::zero()) {
                    return Err(Error::Domain("noise widths must be positive".into()));
                }
                Ok(())
            }
            NoiseModel::FaultySqueezer { x_actual } => {
                if *x_actual < T::zero() {
                    return Err(Error::Domain("x_actual must be >= 0".into()));
                }
                Ok(())
            }
            NoiseModel::ImperfectOperation { weights } => {
                if weights.iter().any(|(p, _)| *p < T::zero()) {
                    return Err(Error::Normalization("negative mixture weight".into()));
                }
                let total = weights.iter().fold(T::zero(), |a, (p, _)| a + *p);
                if (total - T::one()).abs() > T::lit(1e-12) {
                    return Err(Error::Normalization(format!(
                        "mixture weights sum to {}",
                        total.as_f64()
                    )));
                }
                Ok(())
            }
        }
    }
}

/// `mu_n = 2 / (1 + theta3(0, e^{-1/sigma^2})) e^{-n^2/sigma^2}` for `n < len`.
pub fn gaussian_noise_weights<T: Real>(sigma: T, len: usize) -> Result<Vec<T>> {
    let inv = T::one() / (sigma * sigma);
    let theta = jacobi_theta3_zero((-inv).exp())?.value;
    let norm = T::lit(2.0) / (T::one() + theta);
    Ok((0..len)
        .map(|n| {
            let n = T::from_count(n);
            norm * (-(n * n) * inv).exp()
        })
        .collect())
}

/// Noise distribution length: extend until the weights fall below `1e-18` (at
/// least `min_len` entries).
fn noise_support<T: Real>(sigma: T, min_len: usize) -> usize {
    let mut n = min_len.max(1);
    loop {
        let nn = T::from_count(n);
        if (-(nn * nn) / (sigma * sigma)).exp() < T::lit(1e-18) || n > 100_000 {
            return n;
        }
        n += 1;
    }
}

/// Ensemble `(1 - p) |psi><psi| + p mu (x) nu`.
pub fn mix_local_gaussian<T: Real>(
    v: &FockVector<T>,
    noise: &NoiseModel<T>,
) -> Result<ProbeEnsemble<T>> {
    let (p, s1, s2) = match noise {
        NoiseModel::LocalGaussian { p, sigma1, sigma2 } => (*p, *sigma1, *sigma2),
        other => {
            return Err(Error::Precondition(format!(
                "expected local Gaussian noise, got {other:?}"
            )))
        }
    };
    noise.validate()?;
    let mut members = Vec::new();
    if p < T::one() {
        members.push((T::one() - p, ProbeComponent::Pure(v.clone())));
    }
    if p > T::zero() {
        let idler = gaussian_noise_weights(s1, noise_support(s1, 1))?;
        let signal = gaussian_noise_weights(s2, noise_support(s2, 1))?;
        members.push((p, ProbeComponent::Product { idler, signal }));
    }
    let ens = ProbeEnsemble { members };
    let total = ens.total_weight();
    if (total - T::one()).abs() > T::lit(1e-10) {
        return Err(Error::Normalization(format!(
            "ensemble weight {}",
            total.as_f64()
        )));
    }
    Ok(ens)
}

/// The probe as actually delivered by a generator producing squeezing
/// `x_actual` instead of the designed `spec.x`.
pub fn apply_faulty_squeezer<T: Real>(
    spec: &ProbeSpec<T>,
    noise: &NoiseModel<T>,
) -> Result<ProbeSpec<T>> {
    match noise {
        NoiseModel::FaultySqueezer { x_actual } => {
            if *x_actual > spec.x {
                return Err(Error::Precondition(format!(
                    "delivered squeezing {} exceeds designed {}",
                    x_actual.as_f64(),
                    spec.x.as_f64()
                )));
            }
            noise.validate()?;
            Ok(spec.with_x(*x_actual))
        }
        other => Err(Error::Precondition(format!(
            "expected faulty squeezer, got {other:?}"
        ))),
    }
}

/// Component specs of an imperfect operation: each discrepancy `i` lowers the
/// photon count of every acted-on mode by `i`.
pub fn imperfect_components<T: Real>(
    base: &ProbeSpec<T>,
    noise: &NoiseModel<T>,
) -> Result<Vec<(T, ProbeSpec<T>)>> {
    let weights = match noise {
        NoiseModel::ImperfectOperation { weights } => weights,
        other => {
            return Err(Error::Precondition(format!(
                "expected imperfect operation, got {other:?}"
            )))
        }
    };
    noise.validate()?;
    weights
        .iter()
        .map(|&(p, i)| {
            let reduce = |c: u32| if c == 0 { 0 } else { c.abs_diff(i) };
            let (k, l) = (reduce(base.k), reduce(base.l));
            let spec = if k == 0 && l == 0 {
                ProbeSpec::tmsv(base.x)
            } else {
                ProbeSpec { k, l, ..*base }
            };
            spec.validate()?;
            Ok((p, spec))
        })
        .collect()
}

/// Mixture of imperfectly prepared probes, each built at ladder truncation `trunc`.
pub fn mix_imperfect_operation<T: Real>(
    base: &ProbeSpec<T>,
    noise: &NoiseModel<T>,
    trunc: usize,
) -> Result<ProbeEnsemble<T>> {
    let members = imperfect_components(base, noise)?
        .into_iter()
        .filter(|(p, _)| *p > T::zero())
        .map(|(p, spec)| Ok((p, ProbeComponent::Pure(build_probe(&spec, trunc)?))))
        .collect::<Result<Vec<_>>>()?;
    let ens = ProbeEnsemble { members };
    if (ens.total_weight() - T::one()).abs() > T::lit(1e-10) {
        return Err(Error::Normalization(format!(
            "ensemble weight {}",
            ens.total_weight().as_f64()
        )));
    }
    Ok(ens)
}

/// Coherent amplitudes `e^{-|w|^2/2} w^n / sqrt(n!)` for `n <= a_max`.
pub fn coherent_amplitudes<T: Real>(omega_sq: T, a_max: usize) -> Vec<T> {
    let half = T::lit(0.5);
    let ln_w = if omega_sq > T::zero() {
        omega_sq.ln()
    } else {
        T::zero()
    };
    (0..=a_max)
        .map(|n| {
            if omega_sq == T::zero() {
                return if n == 0 { T::one() } else { T::zero() };
            }
            (-half * omega_sq + half * T::from_count(n) * ln_w - half * T::lit(ln_factorial(n)))
                .exp()
        })
        .collect()
}

/// Fock cutoff leaving less than `tol` of a Poisson(`mean`) distribution behind.
pub fn poisson_cutoff<T: Real>(mean: T, tol: f64) -> usize {
    let amps = |a_max: usize| coherent_amplitudes(mean, a_max);
    let mut a_max = 8;
    loop {
        let mass = amps(a_max).iter().fold(T::zero(), |acc, &c| acc + c * c);
        if T::one() - mass < T::lit(tol) || a_max > 4096 {
            return a_max;
        }
        a_max += 4;
    }
}

/// Single-mode target-present state for a coherent probe of intensity
/// `omega_sq`, optionally mixed (weight `p`) with the Fock-diagonal noise `mu`.
pub fn assemble_coherent_rho1<T: Real>(
    omega_sq: T,
    ch: &ChannelParams<T>,
    p: T,
    noise_weights: &[T],
    trunc: Truncation,
) -> Result<DensityMatrix<T>> {
    if omega_sq < T::zero() {
        return Err(Error::Domain("omega_sq must be >= 0".into()));
    }
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::Domain(format!(
            "mixing weight p = {} outside [0, 1]",
            p.as_f64()
        )));
    }
    let a_max = trunc.ladder.max(noise_weights.len().saturating_sub(1));
    let channel = ThermalLossChannel::new(*ch, trunc.thermal, a_max)?;
    let dim = channel.max_output() + 1;
    check_cap(dim, DEFAULT_DIMENSION_CAP)?;
    let mut data = DMatrix::zeros(dim, dim);
    if p < T::one() {
        let amps = coherent_amplitudes(omega_sq, trunc.ladder);
        let v = FockVector {
            coeffs: amps,
            n_start: 0,
            idler_offset: -0,
            signal_offset: 0,
            truncation: trunc.ladder,
        };
        // a single-mode vector is a ladder state whose idler index is pinned to zero
        let single = SingleModeView(&v);
        single.add_to(&mut data, T::one() - p, &channel);
    }
    if p > T::zero() {
        let out = channel.apply_diagonal(noise_weights);
        for (s, &ps) in out.iter().enumerate() {
            data[(s, s)] += p * ps;
        }
    }
    let dm = DensityMatrix {
        data,
        dims: vec![dim],
        trace_deficit: T::zero(),
        truncation: trunc,
    }
    .normalized();
    dm.check_integrity()?;
    Ok(dm)
}

struct SingleModeView<'a, T: Real>(&'a FockVector<T>);

impl<T: Real> SingleModeView<'_, T> {
    fn add_to(&self, data: &mut DMatrix<T>, weight: T, channel: &ThermalLossChannel<T>) {
        let coeffs: Vec<(usize, T)> = self.0.iter().collect();
        let mut amp = vec![T::zero(); coeffs.len()];
        for m in 0..=channel.m_trunc {
            let w = weight * channel.weight(m);
            if w == T::zero() {
                continue;
            }
            for t in 0..=channel.max_output() {
                for (slot, &(a, c)) in amp.iter_mut().zip(&coeffs) {
                    let col = channel.amplitude(m, a);
                    *slot = if t < col.len() { c * col[t] } else { T::zero() };
                }
                for (p, &(a, _)) in coeffs.iter().enumerate() {
                    if amp[p] == T::zero() {
                        continue;
                    }
                    for (q, &(b, _)) in coeffs.iter().enumerate() {
                        if amp[q] != T::zero() {
                            data[(a + m - t, b + m - t)] += w * amp[p] * amp[q];
                        }
                    }
                }
            }
        }
    }
}

/// Bare thermal state of dimension `dim`.
pub fn assemble_coherent_rho0<T: Real>(
    ch: &ChannelParams<T>,
    dim: usize,
) -> Result<DensityMatrix<T>> {
    ch.validate()?;
    let diag: Vec<T> = (0..dim).map(|m| ch.thermal_weight(m)).collect();
    let mut dm = DensityMatrix::diagonal(&diag, vec![dim])?;
    dm.truncation = Truncation {
        ladder: 0,
        thermal: dim.saturating_sub(1),
    };
    Ok(dm.normalized())
}

/// Options controlling truncation escalation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    pub dimension_cap: usize,
    /// Starting ladder cutoff; `None` selects the per-operation default.
    pub ladder: Option<usize>,
    /// Starting bath cutoff; `None` starts at the ladder cutoff.
    pub thermal: Option<usize>,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            dimension_cap: DEFAULT_DIMENSION_CAP,
            ladder: None,
            thermal: None,
        }
    }
}

fn grow(n: usize) -> usize {
    (n + n.div_ceil(4)).max(n + 1)
}

/// Builds the probe mixture at a given ladder cutoff.
pub trait ProbeSource<T: Real> {
    fn default_ladder(&self) -> usize;
    fn build(&self, ladder: usize) -> Result<ProbeEnsemble<T>>;
}

/// A probe spec with one of the noise models applied.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyProbe<T: Real> {
    pub spec: ProbeSpec<T>,
    pub noise: NoiseModel<T>,
}

impl<T: Real> NoisyProbe<T> {
    pub fn clean(spec: ProbeSpec<T>) -> Self {
        NoisyProbe {
            spec,
            noise: NoiseModel::None,
        }
    }

    pub fn new(spec: ProbeSpec<T>, noise: NoiseModel<T>) -> Self {
        NoisyProbe { spec, noise }
    }
}

impl<T: Real> ProbeSource<T> for NoisyProbe<T> {
    fn default_ladder(&self) -> usize {
        match &self.noise {
            NoiseModel::ImperfectOperation { .. } => imperfect_components(&self.spec, &self.noise)
                .map(|c| {
                    c.iter()
                        .map(|(_, s)| choose_truncation(s))
                        .max()
                        .unwrap_or(35)
                })
                .unwrap_or_else(|_| choose_truncation(&self.spec)),
            _ => choose_truncation(&self.spec),
        }
    }

    fn build(&self, ladder: usize) -> Result<ProbeEnsemble<T>> {
        match &self.noise {
            NoiseModel::None => Ok(ProbeEnsemble::pure(build_probe(&self.spec, ladder)?)),
            NoiseModel::LocalGaussian { .. } => {
                mix_local_gaussian(&build_probe(&self.spec, ladder)?, &self.noise)
            }
            NoiseModel::FaultySqueezer { .. } => {
                let actual = apply_faulty_squeezer(&self.spec, &self.noise)?;
                Ok(ProbeEnsemble::pure(build_probe(&actual, ladder)?))
            }
            NoiseModel::ImperfectOperation { .. } => {
                mix_imperfect_operation(&self.spec, &self.noise, ladder)
            }
        }
    }
}

/// Both hypotheses, assembled on a common layout.
#[derive(Debug, Clone)]
pub struct Hypotheses<T: Real> {
    pub rho0: DensityMatrix<T>,
    pub rho1: DensityMatrix<T>,
    pub probe: ProbeEnsemble<T>,
}

/// Assembles `rho0` and `rho1`, escalating the ladder and bath cutoffs by 25%
/// until both trace deficits fall below `1e-8`.
pub fn assemble_hypotheses<T: Real, P: ProbeSource<T>>(
    source: &P,
    ch: &ChannelParams<T>,
    opts: &AssemblyOptions,
) -> Result<Hypotheses<T>> {
    ch.validate()?;
    let mut ladder = opts.ladder.unwrap_or_else(|| source.default_ladder());
    let mut thermal = opts
        .thermal
        .unwrap_or_else(|| ch.thermal_cutoff(BATH_CUTOFF_TOLERANCE));
    let tol = T::lit(TRACE_TOLERANCE);
    loop {
        let probe = match source.build(ladder) {
            Ok(p) => p,
            Err(Error::Truncation { required, .. }) => {
                ladder = required.max(grow(ladder));
                continue;
            }
            Err(e) => return Err(e),
        };
        let (di, ds) = probe.dims(thermal);
        check_cap(di * ds, opts.dimension_cap)?;
        let rho1 = assemble_rho1_capped(&probe, ch, thermal, opts.dimension_cap)?;
        let rho0 = assemble_rho0_capped(&probe, ch, thermal, opts.dimension_cap)?;
        let deficit = rho1.trace_deficit.max(rho0.trace_deficit);
        if deficit < tol {
            return Ok(Hypotheses { rho0, rho1, probe });
        }
        let thermal_tail = ch.channel_tail(thermal).max(ch.thermal_tail(thermal));
        let probe_tail = T::one() - probe.total_weight() + deficit - thermal_tail;
        if thermal_tail >= probe_tail {
            thermal = grow(thermal);
        } else {
            ladder = grow(ladder);
        }
        log::debug!("escalating truncation to ladder {ladder}, thermal {thermal}");
    }
}

/// Coherent-probe hypotheses: thermal `rho0` and the (optionally noisy)
/// reflected coherent state, with cutoffs escalated until the trace deficit is
/// below `1e-8`.
pub fn assemble_coherent_hypotheses<T: Real>(
    omega_sq: T,
    ch: &ChannelParams<T>,
    p: T,
    sigma: T,
) -> Result<(DensityMatrix<T>, DensityMatrix<T>)> {
    ch.validate()?;
    let mean = omega_sq.max(T::one());
    let mut ladder = poisson_cutoff(mean, 1e-10).max(35);
    let mut thermal = ch.thermal_cutoff(BATH_CUTOFF_TOLERANCE);
    let noise = if p > T::zero() {
        gaussian_noise_weights(sigma, noise_support(sigma, 1))?
    } else {
        Vec::new()
    };
    loop {
        let rho1 = assemble_coherent_rho1(omega_sq, ch, p, &noise, Truncation { ladder, thermal })?;
        if rho1.trace_deficit < T::lit(TRACE_TOLERANCE) {
            let mut rho0 = assemble_coherent_rho0(ch, rho1.dim())?;
            rho0.truncation = rho1.truncation;
            return Ok((rho0, rho1));
        }
        if ch.channel_tail(thermal) * T::lit(2.0) >= rho1.trace_deficit {
            thermal = grow(thermal);
        } else {
            ladder = grow(ladder);
        }
        check_cap(ladder + thermal + 1, DEFAULT_DIMENSION_CAP)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::{signal_strength, ProbeOp};
    use crate::special::ln_binomial_or_neg_inf;

    fn ch(kappa: f64, nb: f64) -> ChannelParams<f64> {
        ChannelParams::with_bath(kappa, nb, BathModel::Bare).unwrap()
    }

    /// Beam-splitter amplitude from the explicit double sum over how many
    /// signal (`r`) and bath (`s`) photons reach the discarded port.
    fn amplitude_by_sum(kappa: f64, a: usize, m: usize, t: usize) -> f64 {
        let mut acc = 0.0;
        for r in 0..=a.min(t) {
            let s = t - r;
            if s > m {
                continue;
            }
            let ln = ln_binomial_or_neg_inf(a as i64, r as i64)
                + ln_binomial_or_neg_inf(m as i64, s as i64)
                + 0.5
                    * (ln_factorial(a + m - t) + ln_factorial(t)
                        - ln_factorial(a)
                        - ln_factorial(m));
            let kap = 0.5 * (a - r + s) as f64;
            let rest = 0.5 * (r + m - s) as f64;
            let mag = ln.exp() * pow0(kappa, kap) * pow0(1.0 - kappa, rest);
            let sign = if (m - s) % 2 == 1 { -1.0 } else { 1.0 };
            acc += sign * mag;
        }
        acc
    }

    #[test]
    fn rotation_matches_double_sum() {
        for &kappa in &[0.0, 0.01, 0.3, 0.5, 1.0] {
            let chan = ThermalLossChannel::new(ch(kappa, 1.0), 12, 12).unwrap();
            for m in 0..=12 {
                for a in 0..=12 {
                    for t in 0..=(a + m) {
                        let want = amplitude_by_sum(kappa, a, m, t);
                        let got = chan.amplitude(m, a)[t];
                        assert!(
                            (want - got).abs() < 1e-12,
                            "kappa {kappa} a {a} m {m} t {t}: {got} vs {want}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn amplitudes_are_normalized() {
        let chan = ThermalLossChannel::new(ch(0.37, 1.0), 40, 40).unwrap();
        for m in [0, 7, 40] {
            for a in [0, 5, 40] {
                let n: f64 = chan.amplitude(m, a).iter().map(|x| x * x).sum();
                assert!((n - 1.0).abs() < 1e-12, "m {m} a {a}: {n}");
            }
        }
    }

    fn pure(spec: ProbeSpec<f64>) -> ProbeEnsemble<f64> {
        ProbeEnsemble::pure(build_probe(&spec, choose_truncation(&spec)).unwrap())
    }

    #[test]
    fn zero_reflectivity_matches_rho0() {
        for spec in [
            ProbeSpec::tmsv(0.2),
            ProbeOp::AddIdler.with_photons(2, 0.2),
            ProbeOp::SubBoth.with_photons(2, 0.2),
        ] {
            let probe = pure(spec);
            let r1 = assemble_rho1(&probe, &ch(0.0, 1.0), 35).unwrap();
            let r0 = assemble_rho0(&probe, &ch(0.0, 1.0), 35).unwrap();
            let diff = (&r1.data - &r0.data).abs().max();
            assert!(diff < 1e-8, "{spec:?}: {diff}");
        }
    }

    #[test]
    fn full_reflectivity_no_bath_returns_probe() {
        let v = build_probe(&ProbeSpec::tmsv(0.2), 35).unwrap();
        let r1 = assemble_rho1(&ProbeEnsemble::pure(v.clone()), &ch(1.0, 0.0), 0).unwrap();
        assert!((r1.purity() - 1.0).abs() < 1e-8);
        let ds = r1.dims[1];
        let mut psi = vec![0.0; r1.dim()];
        for (i, s, c) in v.entries() {
            psi[i * ds + s] = c;
        }
        let norm: f64 = psi.iter().map(|c| c * c).sum();
        let fid: f64 = (0..psi.len())
            .flat_map(|a| (0..psi.len()).map(move |b| (a, b)))
            .map(|(a, b)| psi[a] * r1.data[(a, b)] * psi[b])
            .sum::<f64>()
            / norm;
        assert!((fid - 1.0).abs() < 1e-8);
    }

    #[test]
    fn default_truncation_trace() {
        let probe = pure(ProbeSpec::tmsv(0.2));
        let r1 = assemble_rho1(&probe, &ch(0.01, 1.0), 35).unwrap();
        assert!(r1.trace_deficit.abs() < 1e-8);
        assert!((r1.trace() - 1.0).abs() < 1e-12);
        assert_eq!(r1.dims, vec![36, 71]);
    }

    #[test]
    fn rho0_structure() {
        let probe = pure(ProbeSpec::tmsv(0.2));
        let r0 = assemble_rho0(&probe, &ch(0.01, 1.0), 35).unwrap();
        for i in 0..r0.dim() {
            for j in 0..r0.dim() {
                if i != j {
                    assert_eq!(r0.data[(i, j)], 0.0);
                }
            }
        }
        let idler = r0.partial_trace(true).unwrap();
        let mean: f64 = (0..idler.dim())
            .map(|i| i as f64 * idler.data[(i, i)])
            .sum();
        assert!((mean - 0.25).abs() < 1e-8);
        // vacuum bath leaves the detected mode empty
        let r0v = assemble_rho0(&probe, &ch(0.01, 0.0), 35).unwrap();
        let sig = r0v.partial_trace(false).unwrap();
        assert!((sig.data[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_bookkeeping() {
        for spec in [
            ProbeSpec::tmsv(0.2),
            ProbeOp::AddIdler.with_photons(3, 0.2),
            ProbeOp::AddSignal.with_photons(3, 0.2),
            ProbeOp::AddBoth.with_photons(2, 0.2),
            ProbeOp::SubBoth.with_photons(3, 0.2),
        ] {
            let v = build_probe(&spec, choose_truncation(&spec)).unwrap();
            let (ni, ns) = (v.idler_mean(), signal_strength(&v));
            for &kappa in &[0.0, 0.01, 0.5, 1.0] {
                for bath in [BathModel::Bare, BathModel::Compensated] {
                    let nb = if bath == BathModel::Compensated && kappa == 1.0 {
                        0.0
                    } else {
                        1.0
                    };
                    let c = ChannelParams::with_bath(kappa, nb, bath).unwrap();
                    let opts = AssemblyOptions {
                        dimension_cap: 8192,
                        ..Default::default()
                    };
                    let h = assemble_hypotheses(&NoisyProbe::clean(spec), &c, &opts).unwrap();
                    let total = h.rho1.expect_diagonal(|ix| (ix[0] + ix[1]) as f64);
                    let want = ni + kappa * ns + (1.0 - kappa) * c.channel_bath();
                    assert!(
                        (total - want).abs() < 1e-6,
                        "{spec:?} {bath:?} kappa {kappa}: {total} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn ladder_selection_rule() {
        let probe = mix_local_gaussian(
            &build_probe(&ProbeOp::AddBoth.with_photons(2, 0.2), 35).unwrap(),
            &NoiseModel::local_gaussian(0.3),
        )
        .unwrap();
        let r1 = assemble_rho1(&probe, &ch(0.3, 1.0), 35).unwrap();
        let (di, ds) = (r1.dims[0], r1.dims[1]);
        for i in 0..di {
            for j in 0..ds {
                for i2 in 0..di {
                    for j2 in 0..ds {
                        if (i as i64 - i2 as i64) != (j as i64 - j2 as i64) {
                            assert_eq!(r1.get(i, j, i2, j2), 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn mixture_linearity() {
        let a = build_probe(&ProbeOp::SubBoth.with_photons(2, 0.2), 45).unwrap();
        let b = build_probe(&ProbeOp::SubBoth.with_photons(1, 0.2), 45).unwrap();
        let c = ch(0.05, 1.0);
        let mix = ProbeEnsemble {
            members: vec![
                (0.7, ProbeComponent::Pure(a.clone())),
                (0.3, ProbeComponent::Pure(b.clone())),
            ],
        };
        let rm = assemble_rho1(&mix, &c, 45).unwrap();
        // embed each component in the mixture's layout
        let ra = assemble_rho1(
            &ProbeEnsemble {
                members: vec![(1.0, ProbeComponent::Pure(a))],
            },
            &c,
            45,
        )
        .unwrap();
        let rb = assemble_rho1(
            &ProbeEnsemble {
                members: vec![(1.0, ProbeComponent::Pure(b))],
            },
            &c,
            45,
        )
        .unwrap();
        let (di, ds) = (rm.dims[0], rm.dims[1]);
        let mut worst = 0.0f64;
        for i in 0..di {
            for j in 0..ds {
                for i2 in 0..di {
                    for j2 in 0..ds {
                        let pick = |r: &DensityMatrix<f64>| {
                            if i < r.dims[0] && i2 < r.dims[0] && j < r.dims[1] && j2 < r.dims[1] {
                                r.get(i, j, i2, j2) * (1.0 - r.trace_deficit)
                            } else {
                                0.0
                            }
                        };
                        let want = 0.7 * pick(&ra) + 0.3 * pick(&rb);
                        worst = worst
                            .max((rm.get(i, j, i2, j2) * (1.0 - rm.trace_deficit) - want).abs());
                    }
                }
            }
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn local_noise_ensembles() {
        let v = build_probe(&ProbeSpec::tmsv(0.2), 35).unwrap();
        let e0 = mix_local_gaussian(&v, &NoiseModel::local_gaussian(0.0)).unwrap();
        assert_eq!(e0, ProbeEnsemble::pure(v.clone()));
        let e3 = mix_local_gaussian(&v, &NoiseModel::local_gaussian(0.3)).unwrap();
        assert!((e3.total_weight() - 1.0f64).abs() < 1e-10);
        let mu = gaussian_noise_weights(1.0f64, 12).unwrap();
        assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(mix_local_gaussian(&v, &NoiseModel::FaultySqueezer { x_actual: 0.1 }).is_err());
    }

    #[test]
    fn faulty_squeezer_specs() {
        let spec = ProbeOp::AddIdler.with_photons(2, 0.05);
        let same =
            apply_faulty_squeezer(&spec, &NoiseModel::FaultySqueezer { x_actual: 0.05 }).unwrap();
        assert_eq!(same, spec);
        let low =
            apply_faulty_squeezer(&spec, &NoiseModel::FaultySqueezer { x_actual: 0.025 }).unwrap();
        assert_eq!(low.x, 0.025);
        assert!(matches!(
            apply_faulty_squeezer(&spec, &NoiseModel::FaultySqueezer { x_actual: 0.06 }),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn imperfect_subtraction_components() {
        let base = ProbeOp::SubBoth.with_photons(2, 0.2);
        let noise = NoiseModel::ImperfectOperation {
            weights: vec![(0.6, 0), (0.3, 1), (0.1, 2)],
        };
        let comps = imperfect_components(&base, &noise).unwrap();
        assert_eq!(comps[0].1, base);
        assert_eq!((comps[1].1.k, comps[1].1.l), (1, 1));
        assert_eq!(comps[2].1.op, ProbeOp::Tmsv);
        let ens = mix_imperfect_operation(&base, &noise, 45).unwrap();
        assert_eq!(ens.members.len(), 3);
        let r1 = assemble_rho1(&ens, &ch(0.01, 1.0), 35).unwrap();
        assert!(r1.trace_deficit.abs() < 1e-8);
        let perfect = NoiseModel::ImperfectOperation {
            weights: vec![(1.0, 0)],
        };
        let single = mix_imperfect_operation(&base, &perfect, 45).unwrap();
        assert_eq!(single, ProbeEnsemble::pure(build_probe(&base, 45).unwrap()));
        let bad = NoiseModel::ImperfectOperation {
            weights: vec![(0.6, 0), (0.3, 1)],
        };
        assert!(matches!(
            mix_imperfect_operation(&base, &bad, 45),
            Err(Error::Normalization(_))
        ));
    }

    #[test]
    fn coherent_states() {
        let c = ch(0.01, 1.0);
        let t = Truncation {
            ladder: 20,
            thermal: 35,
        };
        // vacuum through a bare bath: thermal light of mean (1 - kappa) n_bath
        let bare = ChannelParams::with_bath(0.01, 1.0, BathModel::Bare).unwrap();
        let vac = assemble_coherent_rho1(0.0, &bare, 0.0, &[], t).unwrap();
        let attenuated = assemble_coherent_rho0(&ch(0.0, 0.99), vac.dim()).unwrap();
        assert!((&vac.data - &attenuated.data).abs().max() < 1e-10);
        let comp = ChannelParams::with_bath(0.01, 1.0, BathModel::Compensated).unwrap();
        let vac = assemble_coherent_rho1(
            0.0,
            &comp,
            0.0,
            &[],
            Truncation {
                ladder: 20,
                thermal: 45,
            },
        )
        .unwrap();
        let thermal = assemble_coherent_rho0(&c, vac.dim()).unwrap();
        assert!((&vac.data - &thermal.data).abs().max() < 1e-10);
        let blind = assemble_coherent_rho1(0.7, &ch(0.0, 1.0), 0.0, &[], t).unwrap();
        let bare = assemble_coherent_rho0(&c, blind.dim()).unwrap();
        assert!((&blind.data - &bare.data).abs().max() < 1e-10);
        let r0 = assemble_coherent_rho0(&ch(0.0, 0.0), 3).unwrap();
        assert_eq!(r0.data[(0, 0)], 1.0);
        let half = assemble_coherent_rho0(&ch(0.0, 1.0), 60).unwrap();
        assert!((half.data[(3, 3)] - 0.0625).abs() < 1e-12);
        assert!(half.trace_deficit < 1e-8);
    }

    #[test]
    fn dimension_cap_enforced() {
        let probe = pure(ProbeSpec::tmsv(0.2));
        assert!(matches!(
            assemble_rho1_capped(&probe, &ch(0.01, 1.0), 35, 100),
            Err(Error::Resource { .. })
        ));
        let opts = AssemblyOptions {
            dimension_cap: 100,
            ..Default::default()
        };
        assert!(matches!(
            assemble_hypotheses(
                &NoisyProbe::clean(ProbeSpec::tmsv(0.2)),
                &ch(0.01, 1.0),
                &opts
            ),
            Err(Error::Resource { .. })
        ));
    }

    #[test]
    fn escalation_reaches_tolerance() {
        // a hot bath needs far more than the default thermal cutoff
        let h = assemble_hypotheses(
            &NoisyProbe::clean(ProbeSpec::tmsv(0.05)),
            &ch(0.01, 3.0),
            &AssemblyOptions {
                dimension_cap: 20_000,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(h.rho1.trace_deficit < 1e-8);
        assert!(h.rho1.truncation.thermal > 35);
    }
}
