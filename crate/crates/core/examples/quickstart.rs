use qillume::discrimination::{chernoff_bound, quantum_advantage};
use qillume::probe::{build_probe, choose_truncation, signal_strength};
use qillume::state::{assemble_hypotheses, AssemblyOptions, NoisyProbe};
use qillume::{ChannelParams, NoiseModel, ProbeOp};

fn main() -> qillume::Result<()> {
    let spec = ProbeOp::AddIdler.with_photons(2, 0.2);
    let ch = ChannelParams::new(0.01, 1.0)?;
    let h = assemble_hypotheses(
        &NoisyProbe::new(spec, NoiseModel::None),
        &ch,
        &AssemblyOptions::default(),
    )?;
    let q = chernoff_bound(&h.rho0, &h.rho1)?;
    let n_s = signal_strength(&build_probe(&spec, choose_truncation(&spec))?);
    let adv = quantum_advantage(&q, n_s, &ch, None)?;
    println!(
        "{}: Q = {:.8} at alpha = {:.4}, delta = {:.3e}",
        spec.descriptor(),
        q.q_value,
        q.alpha_star,
        adv.delta
    );
    Ok(())
}
