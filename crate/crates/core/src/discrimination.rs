//! Chernoff bounds, the coherent-state baseline and derived figures of merit.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{clamp_spectrum, components, eigen_block, CLAMP_TOLERANCE};
use crate::state::{
    assemble_coherent_hypotheses, ChannelParams, DensityMatrix, NoiseModel, Truncation,
};

/// Bounds at or above this are reported as carrying no advantage.
pub const NO_ADVANTAGE_THRESHOLD: f64 = 0.9998;

/// Uniform samples of `alpha` taken before refinement.
pub const SCAN_POINTS: usize = 101;

/// Width of the final golden-section bracket.
pub const ALPHA_TOLERANCE: f64 = 1e-6;

/// Largest `q` accepted by [`min_efficiency`].
pub const EFFICIENCY_DEGENERACY: f64 = 1e-9;

struct KernelBlock<T: Real> {
    ln_p0: Vec<T>,
    ln_p1: Vec<T>,
    /// Squared overlaps between the retained eigenvectors.
    weights: DMatrix<T>,
}

/// Spectral data of a matrix pair from which `tr[rho0^a rho1^(1-a)]` is
/// evaluated for any `a` in `O(d^2)`.
///
/// Zero eigenvalues are dropped, so `0^a = 0` for every `a` including zero.
pub struct OverlapKernel<T: Real> {
    blocks: Vec<KernelBlock<T>>,
}

impl<T: Real> OverlapKernel<T> {
    pub fn new(rho0: &DensityMatrix<T>, rho1: &DensityMatrix<T>) -> Result<Self> {
        if rho0.dims != rho1.dims {
            return Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                rho0.dims, rho1.dims
            )));
        }
        Self::from_matrices(&rho0.data, &rho1.data)
    }

    pub fn from_matrices(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<Self> {
        if a.shape() != b.shape() || a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                a.shape(),
                b.shape()
            )));
        }
        let mut blocks = Vec::new();
        for idx in components(&[a, b]) {
            let (mut va, ua) = eigen_block(a, &idx);
            let (mut vb, ub) = eigen_block(b, &idx);
            clamp_spectrum(&mut va, CLAMP_TOLERANCE)?;
            clamp_spectrum(&mut vb, CLAMP_TOLERANCE)?;
            let keep_a: Vec<usize> = (0..va.len()).filter(|&i| va[i] > T::zero()).collect();
            let keep_b: Vec<usize> = (0..vb.len()).filter(|&j| vb[j] > T::zero()).collect();
            if keep_a.is_empty() || keep_b.is_empty() {
                continue;
            }
            let overlap = ua.transpose() * &ub;
            let weights = DMatrix::from_fn(keep_a.len(), keep_b.len(), |i, j| {
                let o = overlap[(keep_a[i], keep_b[j])];
                o * o
            });
            blocks.push(KernelBlock {
                ln_p0: keep_a.iter().map(|&i| va[i].ln()).collect(),
                ln_p1: keep_b.iter().map(|&j| vb[j].ln()).collect(),
                weights,
            });
        }
        Ok(OverlapKernel { blocks })
    }

    /// `tr[rho0^alpha rho1^(1 - alpha)]`.
    pub fn overlap(&self, alpha: T) -> T {
        let beta = T::one() - alpha;
        let mut total = T::zero();
        for block in &self.blocks {
            let right: Vec<T> = block.ln_p1.iter().map(|&l| (beta * l).exp()).collect();
            for (i, &l0) in block.ln_p0.iter().enumerate() {
                let left = (alpha * l0).exp();
                let row = block.weights.row(i);
                let mut acc = T::zero();
                for (w, r) in row.iter().zip(&right) {
                    acc += *w * *r;
                }
                total += left * acc;
            }
        }
        total
    }

    fn checked_overlap(&self, alpha: T) -> Result<T> {
        let q = self.overlap(alpha);
        if q.is_finite() {
            Ok(q)
        } else {
            Err(Error::NonFinite(format!("Q({})", alpha.as_f64())))
        }
    }

    /// Minimizes the overlap over `alpha in [0, 1]`.
    pub fn chernoff(&self) -> Result<ChernoffResult<T>> {
        let n = SCAN_POINTS - 1;
        let curve = (0..=n)
            .map(|i| {
                let alpha = T::from_count(i) / T::from_count(n);
                self.checked_overlap(alpha).map(|q| (alpha, q))
            })
            .collect::<Result<Vec<_>>>()?;
        let best = (0..curve.len())
            .min_by(|&a, &b| {
                curve[a]
                    .1
                    .partial_cmp(&curve[b].1)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(0);
        let lo = curve[best.saturating_sub(1)].0;
        let hi = curve[(best + 1).min(n)].0;
        let (mut alpha_star, mut q) = curve[best];
        let (a_ref, q_ref) = self.golden_section(lo, hi)?;
        if q_ref < q {
            alpha_star = a_ref;
            q = q_ref;
        }
        Ok(ChernoffResult::new(q, alpha_star, curve))
    }

    fn golden_section(&self, mut lo: T, mut hi: T) -> Result<(T, T)> {
        let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
        let tol = T::lit(ALPHA_TOLERANCE);
        let mut c = hi - inv_phi * (hi - lo);
        let mut d = lo + inv_phi * (hi - lo);
        let mut fc = self.checked_overlap(c)?;
        let mut fd = self.checked_overlap(d)?;
        while hi - lo > tol {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - inv_phi * (hi - lo);
                fc = self.checked_overlap(c)?;
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + inv_phi * (hi - lo);
                fd = self.checked_overlap(d)?;
            }
        }
        Ok(if fc < fd { (c, fc) } else { (d, fd) })
    }
}

/// Truncation and normalization diagnostics carried by a result.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub truncation: Truncation,
    pub trace_deficit_rho0: f64,
    pub trace_deficit_rho1: f64,
}

impl Diagnostics {
    pub fn of<T: Real>(rho0: &DensityMatrix<T>, rho1: &DensityMatrix<T>) -> Self {
        Diagnostics {
            truncation: rho1.truncation,
            trace_deficit_rho0: rho0.trace_deficit.as_f64(),
            trace_deficit_rho1: rho1.trace_deficit.as_f64(),
        }
    }
}

/// Outcome of a Chernoff-bound evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChernoffResult<T> {
    pub q_value: T,
    pub alpha_star: T,
    /// Sampled `(alpha, Q(alpha))` pairs.
    pub curve: Vec<(T, T)>,
    /// Upper bound `Q / 2` on the single-shot error probability.
    pub error_prob_single_shot: T,
    pub no_advantage: bool,
    pub diagnostics: Diagnostics,
}

impl<T: Real> ChernoffResult<T> {
    fn new(q_value: T, alpha_star: T, curve: Vec<(T, T)>) -> Self {
        ChernoffResult {
            q_value,
            alpha_star,
            curve,
            error_prob_single_shot: q_value / T::lit(2.0),
            no_advantage: q_value >= T::lit(NO_ADVANTAGE_THRESHOLD),
            diagnostics: Diagnostics::default(),
        }
    }

    fn with_diagnostics(mut self, d: Diagnostics) -> Self {
        self.diagnostics = d;
        self
    }
}

/// `tr[rho0^alpha rho1^(1 - alpha)]`.
pub fn s_overlap<T: Real>(rho0: &DensityMatrix<T>, rho1: &DensityMatrix<T>, alpha: T) -> Result<T> {
    check_alpha(alpha)?;
    OverlapKernel::new(rho0, rho1)?.checked_overlap(alpha)
}

fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if alpha >= T::zero() && alpha <= T::one() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "alpha = {} outside [0, 1]",
            alpha.as_f64()
        )))
    }
}

/// Quantum Chernoff bound `min_alpha tr[rho0^alpha rho1^(1 - alpha)]`.
pub fn chernoff_bound<T: Real>(
    rho0: &DensityMatrix<T>,
    rho1: &DensityMatrix<T>,
) -> Result<ChernoffResult<T>> {
    Ok(OverlapKernel::new(rho0, rho1)?
        .chernoff()?
        .with_diagnostics(Diagnostics::of(rho0, rho1)))
}

/// The overlap at a prescribed `alpha`, reported like a minimized bound.
pub fn chernoff_fixed_alpha<T: Real>(
    rho0: &DensityMatrix<T>,
    rho1: &DensityMatrix<T>,
    alpha_fixed: T,
) -> Result<ChernoffResult<T>> {
    check_alpha(alpha_fixed)?;
    let q = OverlapKernel::new(rho0, rho1)?.checked_overlap(alpha_fixed)?;
    Ok(ChernoffResult::new(q, alpha_fixed, vec![(alpha_fixed, q)])
        .with_diagnostics(Diagnostics::of(rho0, rho1)))
}

/// Chernoff bound of a coherent probe with `omega_sq` mean photons,
/// `exp(-kappa N_S (sqrt(N_B) - sqrt(N_B + 1))^2)`.
pub fn classical_bound<T: Real>(omega_sq: T, ch: &ChannelParams<T>) -> T {
    let gap = ch.n_bath.sqrt() - (ch.n_bath + T::one()).sqrt();
    (-ch.kappa * omega_sq * gap * gap).exp()
}

/// Bright-bath approximation `exp(-kappa N_S / 4 N_B)` of [`classical_bound`].
pub fn classical_bound_bright_bath<T: Real>(omega_sq: T, ch: &ChannelParams<T>) -> T {
    if ch.n_bath == T::zero() {
        return T::zero();
    }
    (-ch.kappa * omega_sq / (T::lit(4.0) * ch.n_bath)).exp()
}

/// Numerical Chernoff bound of a coherent probe sent through the channel,
/// optionally mixed with local Gaussian noise of weight `p` and width `sigma`.
pub fn coherent_chernoff<T: Real>(
    omega_sq: T,
    ch: &ChannelParams<T>,
    p: T,
    sigma: T,
) -> Result<ChernoffResult<T>> {
    let (rho0, rho1) = assemble_coherent_hypotheses(omega_sq, ch, p, sigma)?;
    chernoff_bound(&rho0, &rho1)
}

/// Quantum advantage over a coherent probe of matched intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvantageResult<T> {
    pub delta: T,
    pub q_quantum: T,
    pub q_classical: T,
    pub n_s_matched: T,
}

/// `Delta = Q_c - Q`. Without channel noise the baseline is the closed form;
/// with local Gaussian noise the coherent probe is assembled and bounded
/// numerically through the same noisy line.
pub fn quantum_advantage<T: Real>(
    probe_result: &ChernoffResult<T>,
    matched_ns: T,
    ch: &ChannelParams<T>,
    noisy_channel: Option<&NoiseModel<T>>,
) -> Result<AdvantageResult<T>> {
    let q_classical = match noisy_channel {
        None | Some(NoiseModel::None) => classical_bound(matched_ns, ch),
        Some(NoiseModel::LocalGaussian { p, sigma2, .. }) => {
            coherent_chernoff(matched_ns, ch, *p, *sigma2)?.q_value
        }
        Some(other) => {
            return Err(Error::Precondition(format!(
                "no coherent baseline for {other:?}"
            )));
        }
    };
    Ok(AdvantageResult {
        delta: q_classical - probe_result.q_value,
        q_quantum: probe_result.q_value,
        q_classical,
        n_s_matched: matched_ns,
    })
}

/// Bound `q^m / 2` on the error probability with `m` copies.
pub fn m_copy_error<T: Real>(q: T, m: u32) -> T {
    q.powi(m as i32) / T::lit(2.0)
}

/// Fraction of copies a non-Gaussian probe needs to match the squeezed vacuum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyResult<T> {
    pub eta: T,
    pub q_tmsv: T,
    pub q_ng: T,
}

/// `eta = ln(q_tmsv) / ln(q_ng)`, the solution of `q_tmsv^M = q_ng^(eta M)`.
pub fn min_efficiency<T: Real>(q_tmsv: T, q_ng: T) -> Result<EfficiencyResult<T>> {
    let top = T::one() - T::lit(EFFICIENCY_DEGENERACY);
    for (name, q) in [("q_tmsv", q_tmsv), ("q_ng", q_ng)] {
        if !(q > T::zero()) || q >= top {
            return Err(Error::Degenerate(format!(
                "{name} = {} must lie in (0, 1)",
                q.as_f64()
            )));
        }
    }
    Ok(EfficiencyResult {
        eta: q_tmsv.ln() / q_ng.ln(),
        q_tmsv,
        q_ng,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::{build_probe, ProbeOp, ProbeSpec};
    use crate::state::{assemble_hypotheses, AssemblyOptions, BathModel, NoisyProbe};

    fn diag(v: &[f64]) -> DensityMatrix<f64> {
        DensityMatrix::diagonal(v, vec![v.len()]).unwrap()
    }

    #[test]
    fn commuting_pair() {
        let a = diag(&[0.7, 0.3]);
        let b = diag(&[0.4, 0.6]);
        let want = (0.7f64 * 0.4).sqrt() + (0.3f64 * 0.6).sqrt();
        assert!((s_overlap(&a, &b, 0.5).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.953_414_330_9).abs() < 1e-9);
    }

    #[test]
    fn identical_and_orthogonal() {
        let a = diag(&[0.2, 0.5, 0.3]);
        let r = chernoff_bound(&a, &a).unwrap();
        assert!((r.q_value - 1.0).abs() < 1e-12);
        assert!((r.error_prob_single_shot - 0.5).abs() < 1e-12);
        assert!(r.no_advantage);
        let o = chernoff_bound(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0])).unwrap();
        assert_eq!(o.q_value, 0.0);
    }

    #[test]
    fn support_projector_at_endpoints() {
        let a = diag(&[0.5, 0.5, 0.0]);
        let b = diag(&[0.2, 0.3, 0.5]);
        // Q(0) = tr[P_supp(rho0) rho1], Q(1) = tr[rho0 P_supp(rho1)]
        assert!((s_overlap(&a, &b, 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((s_overlap(&a, &b, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_commuting_pure_states() {
        // pure states: Q(alpha) = |<a|b>|^2 for alpha in (0, 1)
        let th = 0.3f64;
        let a = DensityMatrix::pure(&[1.0, 0.0], vec![2]).unwrap();
        let b = DensityMatrix::pure(&[th.cos(), th.sin()], vec![2]).unwrap();
        let r = chernoff_bound(&a, &b).unwrap();
        assert!((r.q_value - th.cos().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = diag(&[0.5, 0.5]);
        let b = diag(&[0.2, 0.3, 0.5]);
        assert!(matches!(
            chernoff_bound(&a, &b),
            Err(Error::DimensionMismatch(_))
        ));
        let neg = DensityMatrix::from_matrix(
            DMatrix::from_row_slice(2, 2, &[1.1, 0.0, 0.0, -0.1]),
            vec![2],
        )
        .unwrap();
        assert!(matches!(
            chernoff_bound(&a, &neg),
            Err(Error::NumericalIntegrity(_))
        ));
        assert!(s_overlap(&a, &a, 1.5).is_err());
    }

    #[test]
    fn classical_closed_forms() {
        let c = ChannelParams::new(0.01f64, 1.0).unwrap();
        let want = (-0.0025f64 * (2f64.sqrt() - 1.0).powi(2)).exp();
        assert!((classical_bound(0.25, &c) - want).abs() < 1e-15);
        assert_eq!(classical_bound(0.0, &c), 1.0);
        assert_eq!(
            classical_bound(0.7, &ChannelParams::new(0.0, 1.0).unwrap()),
            1.0
        );
        let bright = ChannelParams::new(0.01f64, 100.0).unwrap();
        let rel = (classical_bound_bright_bath(1.0, &bright) - classical_bound(1.0, &bright)).abs();
        assert!(rel < 1e-6);
    }

    #[test]
    fn coherent_numerics_match_closed_form() {
        let c = ChannelParams::with_bath(0.01f64, 1.0, BathModel::Compensated).unwrap();
        let r = coherent_chernoff(0.25, &c, 0.0, 1.0).unwrap();
        assert!(
            (r.q_value - classical_bound(0.25, &c)).abs() < 1e-6,
            "{}",
            r.q_value
        );
    }

    #[test]
    fn copies_and_efficiency() {
        assert_eq!(m_copy_error(1.0f64, 7), 0.5);
        assert_eq!(m_copy_error(0.5f64, 2), 0.125);
        let q = 0.9f64;
        assert!((min_efficiency(q, q * q).unwrap().eta - 0.5).abs() < 1e-14);
        assert!((min_efficiency(q, q).unwrap().eta - 1.0).abs() < 1e-14);
        assert!(matches!(
            min_efficiency(1.0f64, 0.5),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            min_efficiency(0.5f64, 0.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn fixed_alpha_dominates() {
        let c = ChannelParams::new(0.01f64, 1.0).unwrap();
        let h = assemble_hypotheses(
            &NoisyProbe::clean(ProbeSpec::tmsv(0.2)),
            &c,
            &AssemblyOptions::default(),
        )
        .unwrap();
        let opt = chernoff_bound(&h.rho0, &h.rho1).unwrap();
        let same = chernoff_fixed_alpha(&h.rho0, &h.rho1, opt.alpha_star).unwrap();
        assert!((same.q_value - opt.q_value).abs() < 1e-15);
        for a in [0.0, 0.2, 0.5, 0.9, 1.0] {
            assert!(chernoff_fixed_alpha(&h.rho0, &h.rho1, a).unwrap().q_value >= opt.q_value);
        }
        assert!(opt.q_value <= s_overlap(&h.rho0, &h.rho1, 0.5).unwrap());
        let swapped = chernoff_bound(&h.rho1, &h.rho0).unwrap();
        assert!((swapped.q_value - opt.q_value).abs() < 1e-9);
        assert_eq!(opt.diagnostics.truncation.ladder, 35);
    }

    #[test]
    fn advantage_is_difference() {
        let c = ChannelParams::new(0.01f64, 1.0).unwrap();
        let spec = ProbeOp::SubBoth.with_photons(1, 0.2);
        let h =
            assemble_hypotheses(&NoisyProbe::clean(spec), &c, &AssemblyOptions::default()).unwrap();
        let r = chernoff_bound(&h.rho0, &h.rho1).unwrap();
        let ns = crate::probe::signal_strength(&build_probe(&spec, 45).unwrap());
        let adv = quantum_advantage(&r, ns, &c, None).unwrap();
        assert_eq!(adv.delta, adv.q_classical - adv.q_quantum);
        assert_eq!(adv.q_classical, classical_bound(ns, &c));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn dist(n: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.01f64..1.0, n).prop_map(|v| {
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn diagonal_pairs_match_brute_force(a in dist(4), b in dist(4)) {
                let r = chernoff_bound(&diag(&a), &diag(&b)).unwrap();
                let brute = (0..=100_000)
                    .map(|i| {
                        let al = i as f64 / 100_000.0;
                        a.iter().zip(&b).map(|(x, y)| x.powf(al) * y.powf(1.0 - al)).sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
                prop_assert!((r.q_value - brute).abs() < 1e-8, "{} vs {}", r.q_value, brute);
                prop_assert!(r.q_value <= s_overlap(&diag(&a), &diag(&b), 0.5).unwrap() + 1e-15);
            }
        }
    }
}
