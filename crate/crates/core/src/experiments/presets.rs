use super::config::{grid, Experiment, NoiseConfig, ProbeEntry, SweepConfig};
use crate::probe::ProbeOp;

/// Built-in preset names with one-line descriptions.
pub const PRESETS: [(&str, &str); 13] = [
    ("fig2", "Chernoff bound vs photon number, x = 0.2 and 0.05"),
    (
        "fig3",
        "quantum advantage vs photon number, x = 0.2 and 0.05",
    ),
    (
        "fig4",
        "Chernoff bound vs photon number for kappa in {0.0009, 0.001, 0.003, 0.05}",
    ),
    ("fig5", "quantum advantage vs kappa at n = 5"),
    (
        "fig6",
        "quantum advantage vs local noise weight against a noisy coherent line, n = 5",
    ),
    (
        "fig7",
        "faulty generator: bound vs n at x = 0.05 for four delivered squeezings",
    ),
    ("fig8", "minimum efficiency vs n, noiseless and p = 0.3"),
    ("fig9", "imperfect two-photon subtraction mixtures vs p"),
    (
        "fig10",
        "faulty generator: quantum advantage vs x - x' at n = 5",
    ),
    (
        "fig11",
        "correlations per signal photon vs local noise weight, n = 5",
    ),
    (
        "sec5a-robustness",
        "bound vs noise weight and threshold weight p*",
    ),
    (
        "sec5a-activation",
        "bound vs n under heavy local noise, p = 0.9",
    ),
    (
        "sec6b-entanglement-limit",
        "squeezed-vacuum entanglement per signal photon",
    ),
];

const FAMILIES: [ProbeOp; 4] = [
    ProbeOp::AddIdler,
    ProbeOp::AddSignal,
    ProbeOp::AddBoth,
    ProbeOp::SubBoth,
];

fn families(x: f64) -> Vec<ProbeEntry> {
    FAMILIES.iter().map(|&op| ProbeEntry::new(op, x)).collect()
}

fn tmsv(x: f64) -> ProbeEntry {
    ProbeEntry {
        k: Some(0),
        l: Some(0),
        ..ProbeEntry::new(ProbeOp::Tmsv, x)
    }
}

fn with_tmsv(x: f64) -> Vec<ProbeEntry> {
    let mut v = vec![tmsv(x)];
    v.extend(families(x));
    v
}

/// The sweep behind a preset name.
pub fn preset(name: &str) -> Option<SweepConfig> {
    let base = SweepConfig::default();
    let both_x = || [with_tmsv(0.2), with_tmsv(0.05)].concat();
    let cfg = match name {
        "fig2" => SweepConfig {
            experiment: Experiment::CbVsN,
            probes: [families(0.2), families(0.05)].concat(),
            n_range: [0, 5],
            ..base
        },
        "fig3" => SweepConfig {
            experiment: Experiment::DeltaVsN,
            probes: [families(0.2), families(0.05)].concat(),
            n_range: [0, 5],
            ..base
        },
        "fig4" => SweepConfig {
            experiment: Experiment::CbVsKappaSet,
            probes: families(0.2),
            kappa: vec![0.0009, 0.001, 0.003, 0.05],
            n_range: [0, 5],
            ..base
        },
        "fig5" => SweepConfig {
            experiment: Experiment::DeltaVsKappa,
            probes: with_tmsv(0.2),
            kappa: vec![0.001, 0.003, 0.005, 0.01, 0.02, 0.03, 0.04, 0.05],
            n_range: [5, 5],
            ..base
        },
        "fig6" => SweepConfig {
            experiment: Experiment::DeltaVsPNoisyLine,
            probes: [families(0.2), families(0.05)].concat(),
            n_range: [5, 5],
            p_values: grid(0.0, 0.9, 0.1),
            ..base
        },
        "fig7" => SweepConfig {
            experiment: Experiment::FaultySqueezer,
            probes: families(0.05),
            x_actual: vec![0.005, 0.015, 0.025, 0.045],
            ..base
        },
        "fig8" => SweepConfig {
            experiment: Experiment::MinEfficiency,
            probes: families(0.2),
            p_values: vec![0.0, 0.3],
            ..base
        },
        "fig9" => SweepConfig {
            experiment: Experiment::ImperfectSubtraction,
            probes: vec![ProbeEntry {
                k: Some(2),
                l: Some(2),
                ..ProbeEntry::new(ProbeOp::SubBoth, 0.2)
            }],
            p_double_prime: vec![0.1, 0.2, 0.3, 0.4],
            ..base
        },
        "fig10" => SweepConfig {
            experiment: Experiment::FaultySqueezer,
            probes: families(0.05),
            n_range: [5, 5],
            x_actual: grid(0.0, 0.045, 0.005)
                .into_iter()
                .map(|d| ((0.05 - d) * 1e12).round() / 1e12)
                .collect(),
            ..base
        },
        "fig11" => SweepConfig {
            experiment: Experiment::CorrelationsVsP,
            probes: with_tmsv(0.2),
            n_range: [5, 5],
            p_values: grid(0.0, 0.5, 0.1),
            ..base
        },
        "sec5a-robustness" => SweepConfig {
            experiment: Experiment::RobustnessP,
            probes: both_x(),
            n_range: [1, 1],
            ..base
        },
        "sec5a-activation" => SweepConfig {
            experiment: Experiment::CbVsN,
            probes: families(0.2),
            noise: NoiseConfig {
                p: 0.9,
                ..NoiseConfig::default()
            },
            ..base
        },
        "sec6b-entanglement-limit" => SweepConfig {
            experiment: Experiment::EntanglementLimit,
            n_s_grid: vec![1.0, 10.0, 100.0, 1000.0],
            ..base
        },
        _ => return None,
    };
    Some(cfg)
}
