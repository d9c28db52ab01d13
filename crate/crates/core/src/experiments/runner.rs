use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Experiment, ProbeEntry, SweepConfig};
use super::emit::write_triplets;
use crate::correlations::{correlation_report_per, tmsv_entanglement_closed_form};
use crate::discrimination::{
    chernoff_bound, chernoff_fixed_alpha, classical_bound, min_efficiency, quantum_advantage,
    ChernoffResult, NO_ADVANTAGE_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::probe::{build_probe, signal_strength};
use crate::state::{
    assemble_hypotheses, AssemblyOptions, ChannelParams, Hypotheses, NoiseModel, NoisyProbe,
    ProbeSource,
};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "QILLUME_THREADS";

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub probe: String,
    pub n: Option<u32>,
    pub kappa: Option<f64>,
    pub p: Option<f64>,
    pub p_double_prime: Option<f64>,
    pub x: Option<f64>,
    pub x_prime: Option<f64>,
    pub q_value: Option<f64>,
    pub alpha_star: Option<f64>,
    pub delta: Option<f64>,
    pub eta: Option<f64>,
    pub mi: Option<f64>,
    pub ln: Option<f64>,
    pub mi_per_photon: Option<f64>,
    pub ln_per_photon: Option<f64>,
    pub entanglement: Option<f64>,
    pub n_s: Option<f64>,
    pub p_star: Option<f64>,
    pub truncation_n: Option<usize>,
    pub m_trunc: Option<usize>,
    pub trace_deficit: Option<f64>,
    pub status: String,
    pub wall_time: Option<f64>,
}

impl ResultRow {
    /// Row with status `ok` and no values filled in.
    pub fn new(experiment: Experiment, probe: impl Into<String>) -> Self {
        ResultRow {
            experiment: experiment.id().to_string(),
            probe: probe.into(),
            n: None,
            kappa: None,
            p: None,
            p_double_prime: None,
            x: None,
            x_prime: None,
            q_value: None,
            alpha_star: None,
            delta: None,
            eta: None,
            mi: None,
            ln: None,
            mi_per_photon: None,
            ln_per_photon: None,
            entanglement: None,
            n_s: None,
            p_star: None,
            truncation_n: None,
            m_trunc: None,
            trace_deficit: None,
            status: "ok".into(),
            wall_time: None,
        }
    }

    pub fn failed(&self) -> bool {
        self.status != "ok"
    }

    fn with_chernoff(mut self, r: &ChernoffResult<f64>) -> Self {
        self.q_value = Some(r.q_value);
        self.alpha_star = Some(r.alpha_star);
        self.truncation_n = Some(r.diagnostics.truncation.ladder);
        self.m_trunc = Some(r.diagnostics.truncation.thermal);
        self.trace_deficit = Some(
            r.diagnostics
                .trace_deficit_rho0
                .max(r.diagnostics.trace_deficit_rho1),
        );
        self
    }

    fn fail(mut self, e: &Error) -> Self {
        self.status = format!("failed: {e}");
        self
    }
}

/// Largest grid mixing weight below which the bound stays under the
/// no-advantage threshold, with the grid evaluations it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct PStar {
    /// `None` when even the noiseless probe shows no advantage.
    pub p_star: Option<f64>,
    pub grid: Vec<(f64, ChernoffResult<f64>)>,
}

/// Shared evaluation context of one sweep.
struct Ctx<'a> {
    cfg: &'a SweepConfig,
    opts: AssemblyOptions,
    dump_dir: Option<&'a Path>,
}

fn hypotheses(
    src: &NoisyProbe<f64>,
    ch: &ChannelParams<f64>,
    opts: &AssemblyOptions,
) -> Result<Hypotheses<f64>> {
    assemble_hypotheses(src, ch, opts)
}

fn bound(
    src: &NoisyProbe<f64>,
    ch: &ChannelParams<f64>,
    opts: &AssemblyOptions,
) -> Result<ChernoffResult<f64>> {
    let h = hypotheses(src, ch, opts)?;
    chernoff_bound(&h.rho0, &h.rho1)
}

/// Mean signal photon number of the noiseless probe behind `src`.
fn pure_signal_strength(src: &NoisyProbe<f64>) -> Result<f64> {
    let clean = NoisyProbe::clean(src.spec);
    let mut ladder = clean.default_ladder();
    loop {
        match build_probe(&src.spec, ladder) {
            Ok(v) => return Ok(signal_strength(&v)),
            Err(Error::Truncation { required, .. }) => ladder = required.max(ladder + 1),
            Err(e) => return Err(e),
        }
    }
}

/// Grid search for the threshold mixing weight of `spec` under local Gaussian
/// noise with widths taken from `cfg.noise`. With `refine`, the crossing
/// between `p*` and the next grid point is located by bisection to `1e-4`.
pub fn find_threshold_p_star(
    probe: &ProbeEntry,
    n: u32,
    ch: &ChannelParams<f64>,
    cfg: &SweepConfig,
    step: f64,
    refine: bool,
) -> Result<PStar> {
    let opts = AssemblyOptions {
        dimension_cap: cfg.dimension_cap,
        ..AssemblyOptions::default()
    };
    let spec = probe.spec(n);
    let eval = |p: f64| bound(&NoisyProbe::new(spec, cfg.noise.at(p)), ch, &opts);
    let mut grid = Vec::new();
    let mut p_star = None;
    for p in super::config::grid(0.0, 1.0, step) {
        let r = eval(p)?;
        let below = r.q_value < NO_ADVANTAGE_THRESHOLD;
        grid.push((p, r));
        if !below {
            break;
        }
        p_star = Some(p);
    }
    if let (true, Some(p0)) = (refine, p_star) {
        let (mut lo, mut hi) = (p0, (p0 + step).min(1.0));
        if lo < hi {
            while hi - lo > 1e-4 {
                let mid = 0.5 * (lo + hi);
                if eval(mid)?.q_value < NO_ADVANTAGE_THRESHOLD {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            p_star = Some(lo);
        }
    }
    Ok(PStar { p_star, grid })
}

/// A unit of parallel work producing one or more rows.
#[derive(Debug, Clone)]
enum Job {
    Point {
        probe: ProbeEntry,
        n: u32,
        kappa: f64,
        p: f64,
    },
    Series {
        probe: ProbeEntry,
        n: u32,
        kappa: f64,
    },
    Faulty {
        probe: ProbeEntry,
        n: u32,
        kappa: f64,
        x_actual: f64,
    },
    Imperfect {
        probe: ProbeEntry,
        n: u32,
        kappa: f64,
        p: f64,
        p2: f64,
    },
    Correlations {
        probe: ProbeEntry,
        n: u32,
        p: f64,
    },
    Entanglement {
        n_s: f64,
    },
}

fn n_values(cfg: &SweepConfig, probe: &ProbeEntry) -> Vec<u32> {
    if probe.is_pinned() {
        vec![probe.spec(0).photons()]
    } else {
        cfg.n_values()
    }
}

/// Work items in sorted grid order: probe, then `n`, then `kappa`, then the
/// experiment's own axis.
fn jobs(cfg: &SweepConfig) -> Vec<Job> {
    let mut out = Vec::new();
    if cfg.experiment == Experiment::EntanglementLimit {
        return cfg
            .n_s_grid
            .iter()
            .map(|&n_s| Job::Entanglement { n_s })
            .collect();
    }
    for probe in &cfg.probes {
        for n in n_values(cfg, probe) {
            if cfg.experiment == Experiment::CorrelationsVsP {
                out.extend(cfg.p_values.iter().map(|&p| Job::Correlations {
                    probe: *probe,
                    n,
                    p,
                }));
                continue;
            }
            for &kappa in &cfg.kappa {
                match cfg.experiment {
                    Experiment::CbVsN
                    | Experiment::DeltaVsN
                    | Experiment::CbVsKappaSet
                    | Experiment::DeltaVsKappa => out.push(Job::Point {
                        probe: *probe,
                        n,
                        kappa,
                        p: cfg.noise.p,
                    }),
                    Experiment::DeltaVsPNoisyLine | Experiment::MinEfficiency => {
                        out.extend(cfg.p_values.iter().map(|&p| Job::Point {
                            probe: *probe,
                            n,
                            kappa,
                            p,
                        }))
                    }
                    Experiment::RobustnessP => out.push(Job::Series {
                        probe: *probe,
                        n,
                        kappa,
                    }),
                    Experiment::FaultySqueezer => {
                        out.extend(cfg.x_actual.iter().map(|&x_actual| Job::Faulty {
                            probe: *probe,
                            n,
                            kappa,
                            x_actual,
                        }))
                    }
                    Experiment::ImperfectSubtraction => {
                        for &p2 in &cfg.p_double_prime {
                            for &p in cfg.p_values.iter().filter(|&&p| p + p2 <= 1.0 + 1e-12) {
                                out.push(Job::Imperfect {
                                    probe: *probe,
                                    n,
                                    kappa,
                                    p,
                                    p2,
                                });
                            }
                        }
                    }
                    Experiment::CorrelationsVsP | Experiment::EntanglementLimit => {}
                }
            }
        }
    }
    out
}

impl Ctx<'_> {
    fn dump(&self, tag: &str, h: &Hypotheses<f64>) -> Result<()> {
        if let Some(dir) = self.dump_dir {
            write_triplets(&dir.join(format!("{tag}_rho0.csv")), &h.rho0)?;
            write_triplets(&dir.join(format!("{tag}_rho1.csv")), &h.rho1)?;
        }
        Ok(())
    }

    fn evaluate(
        &self,
        src: &NoisyProbe<f64>,
        ch: &ChannelParams<f64>,
        tag: &str,
    ) -> Result<(ChernoffResult<f64>, f64)> {
        let h = hypotheses(src, ch, &self.opts)?;
        self.dump(tag, &h)?;
        Ok((chernoff_bound(&h.rho0, &h.rho1)?, h.probe.signal_strength()))
    }

    fn run_job(&self, job: &Job, tag: &str) -> Vec<ResultRow> {
        let cfg = self.cfg;
        let e = cfg.experiment;
        match job {
            Job::Point { probe, n, kappa, p } => {
                let mut row = ResultRow::new(e, probe.descriptor(*n));
                row.n = Some(*n);
                row.kappa = Some(*kappa);
                row.p = Some(*p);
                row.x = Some(probe.x);
                let base = row.clone();
                vec![self
                    .point(row, probe, *n, *kappa, *p, tag)
                    .unwrap_or_else(|err| base.fail(&err))]
            }
            Job::Series { probe, n, kappa } => self.series(probe, *n, *kappa),
            Job::Faulty {
                probe,
                n,
                kappa,
                x_actual,
            } => {
                let mut row = ResultRow::new(e, probe.descriptor(*n));
                row.n = Some(*n);
                row.kappa = Some(*kappa);
                row.x = Some(probe.x);
                row.x_prime = Some(*x_actual);
                let base = row.clone();
                vec![self
                    .faulty(row, probe, *n, *kappa, *x_actual, tag)
                    .unwrap_or_else(|err| base.fail(&err))]
            }
            Job::Imperfect {
                probe,
                n,
                kappa,
                p,
                p2,
            } => {
                let mut row = ResultRow::new(e, probe.descriptor(*n));
                row.n = Some(*n);
                row.kappa = Some(*kappa);
                row.x = Some(probe.x);
                row.p = Some(*p);
                row.p_double_prime = Some(*p2);
                let base = row.clone();
                vec![self
                    .imperfect(row, probe, *n, *kappa, *p, *p2, tag)
                    .unwrap_or_else(|err| base.fail(&err))]
            }
            Job::Correlations { probe, n, p } => {
                let mut row = ResultRow::new(e, probe.descriptor(*n));
                row.n = Some(*n);
                row.x = Some(probe.x);
                row.p = Some(*p);
                let base = row.clone();
                vec![self
                    .correlations(row, probe, *n, *p)
                    .unwrap_or_else(|err| base.fail(&err))]
            }
            Job::Entanglement { n_s } => {
                let mut row = ResultRow::new(e, "tmsv(k=0,l=0)");
                row.n_s = Some(*n_s);
                match tmsv_entanglement_closed_form(*n_s) {
                    Ok(ent) => {
                        row.entanglement = Some(ent);
                        vec![row]
                    }
                    Err(err) => vec![row.fail(&err)],
                }
            }
        }
    }

    fn point(
        &self,
        row: ResultRow,
        probe: &ProbeEntry,
        n: u32,
        kappa: f64,
        p: f64,
        tag: &str,
    ) -> Result<ResultRow> {
        let cfg = self.cfg;
        let ch = cfg.channel(kappa)?;
        let noise = cfg.noise.at(p);
        let src = NoisyProbe::new(probe.spec(n), noise.clone());
        let (r, n_s) = self.evaluate(&src, &ch, tag)?;
        let mut row = row.with_chernoff(&r);
        row.n_s = Some(n_s);
        match cfg.experiment {
            Experiment::DeltaVsN | Experiment::DeltaVsKappa | Experiment::DeltaVsPNoisyLine => {
                let adv = quantum_advantage(&r, pure_signal_strength(&src)?, &ch, Some(&noise))?;
                row.delta = Some(adv.delta);
            }
            Experiment::MinEfficiency => {
                let tmsv = NoisyProbe::new(crate::probe::ProbeSpec::tmsv(probe.x), noise);
                let q_tmsv = bound(&tmsv, &ch, &self.opts)?.q_value;
                row.eta = Some(min_efficiency(q_tmsv, r.q_value)?.eta);
            }
            _ => {}
        }
        Ok(row)
    }

    fn series(&self, probe: &ProbeEntry, n: u32, kappa: f64) -> Vec<ResultRow> {
        let cfg = self.cfg;
        let base = |p: Option<f64>| {
            let mut row = ResultRow::new(cfg.experiment, probe.descriptor(n));
            row.n = Some(n);
            row.kappa = Some(kappa);
            row.x = Some(probe.x);
            row.p = p;
            row
        };
        let ch = match cfg.channel(kappa) {
            Ok(ch) => ch,
            Err(err) => return vec![base(None).fail(&err)],
        };
        let ps = match find_threshold_p_star(probe, n, &ch, cfg, cfg.p_step, cfg.refine_p_star) {
            Ok(ps) => ps,
            Err(err) => return vec![base(None).fail(&err)],
        };
        let spec = probe.spec(n);
        cfg.p_values
            .iter()
            .map(|&p| {
                let known = ps
                    .grid
                    .iter()
                    .find(|(g, _)| (g - p).abs() < 1e-12)
                    .map(|(_, r)| r.clone());
                let r = match known {
                    Some(r) => Ok(r),
                    None => bound(&NoisyProbe::new(spec, cfg.noise.at(p)), &ch, &self.opts),
                };
                let mut row = match r {
                    Ok(r) => base(Some(p)).with_chernoff(&r),
                    Err(err) => base(Some(p)).fail(&err),
                };
                row.p_star = ps.p_star;
                row
            })
            .collect()
    }

    /// The bound is evaluated on the delivered probe at the optimizer of the
    /// designed one; the classical reference uses the designed signal strength.
    fn faulty(
        &self,
        row: ResultRow,
        probe: &ProbeEntry,
        n: u32,
        kappa: f64,
        x_actual: f64,
        tag: &str,
    ) -> Result<ResultRow> {
        let ch = self.cfg.channel(kappa)?;
        let designed = NoisyProbe::clean(probe.spec(n));
        let alpha = bound(&designed, &ch, &self.opts)?.alpha_star;
        let delivered = NoisyProbe::new(probe.spec(n), NoiseModel::FaultySqueezer { x_actual });
        let h = hypotheses(&delivered, &ch, &self.opts)?;
        self.dump(tag, &h)?;
        let r = chernoff_fixed_alpha(&h.rho0, &h.rho1, alpha)?;
        let n_s = pure_signal_strength(&designed)?;
        let mut row = row.with_chernoff(&r);
        row.n_s = Some(h.probe.signal_strength());
        row.delta = Some(classical_bound(n_s, &ch) - r.q_value);
        Ok(row)
    }

    /// Mixture `p rho_n + p' rho_(n-1) + p'' rho_(n-2)` with `p' = 1 - p - p''`.
    #[allow(clippy::too_many_arguments)]
    fn imperfect(
        &self,
        row: ResultRow,
        probe: &ProbeEntry,
        n: u32,
        kappa: f64,
        p: f64,
        p2: f64,
        tag: &str,
    ) -> Result<ResultRow> {
        let ch = self.cfg.channel(kappa)?;
        let p1 = (1.0 - p - p2).max(0.0);
        let spec = probe.spec(n);
        let top = spec.photons();
        let weights = [(p, 0u32), (p1, 1), (p2, 2)]
            .into_iter()
            .filter(|&(_, i)| i <= top)
            .collect::<Vec<_>>();
        let noise = NoiseModel::ImperfectOperation { weights };
        let src = NoisyProbe::new(spec, noise);
        let (r, n_s) = self.evaluate(&src, &ch, tag)?;
        let mut row = row.with_chernoff(&r);
        row.n_s = Some(n_s);
        row.delta = Some(quantum_advantage(&r, n_s, &ch, None)?.delta);
        Ok(row)
    }

    /// Correlations of the noisy probe per signal photon of the noiseless one,
    /// the same strength the coherent reference is matched to.
    fn correlations(
        &self,
        row: ResultRow,
        probe: &ProbeEntry,
        n: u32,
        p: f64,
    ) -> Result<ResultRow> {
        let src = NoisyProbe::new(probe.spec(n), self.cfg.noise.at(p));
        let ens = src.build(src.default_ladder())?;
        let rho = ens.probe_matrix()?;
        let rep = correlation_report_per(&rho, pure_signal_strength(&src)?)?;
        let mut row = row;
        row.mi = Some(rep.mutual_info);
        row.ln = Some(rep.log_negativity);
        row.mi_per_photon = rep.mi_per_photon;
        row.ln_per_photon = rep.ln_per_photon;
        row.n_s = Some(rep.n_s);
        row.truncation_n = Some(rho.truncation.ladder);
        row.trace_deficit = Some(rho.trace_deficit);
        Ok(row)
    }
}

/// Worker count: the environment override if set, else `requested`.
pub fn worker_count(requested: usize) -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(requested)
        .max(1)
}

/// Evaluates every grid point of `cfg`. Rows come back in grid order for any
/// worker count; points that fail carry a `failed: ...` status.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<ResultRow>> {
    run_sweep_with(cfg, None)
}

/// [`run_sweep`], additionally writing each assembled `rho0`/`rho1` pair as
/// sparse triplets into `dump_dir`.
pub fn run_sweep_with(cfg: &SweepConfig, dump_dir: Option<&Path>) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    if let Some(dir) = dump_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
    }
    let ctx = Ctx {
        cfg,
        opts: AssemblyOptions {
            dimension_cap: cfg.dimension_cap,
            ..AssemblyOptions::default()
        },
        dump_dir,
    };
    let work = jobs(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(cfg.parallelism))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let batches: Vec<Vec<ResultRow>> = pool.install(|| {
        work.par_iter()
            .enumerate()
            .map(|(i, job)| {
                let start = Instant::now();
                let mut rows = ctx.run_job(job, &format!("{}_{i:05}", cfg.experiment.id()));
                if cfg.timings {
                    let t = start.elapsed().as_secs_f64() / rows.len().max(1) as f64;
                    rows.iter_mut().for_each(|r| r.wall_time = Some(t));
                }
                for r in rows.iter().filter(|r| r.failed()) {
                    log::warn!("{} {}: {}", r.experiment, r.probe, r.status);
                }
                rows
            })
            .collect()
    });
    Ok(batches.into_iter().flatten().collect())
}

/// Resolves the output path: explicit override, then the config's own.
pub fn output_path(cfg: &SweepConfig, explicit: Option<PathBuf>) -> Option<PathBuf> {
    explicit.or_else(|| cfg.output_path.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::ProbeOp;

    fn cfg(experiment: Experiment) -> SweepConfig {
        SweepConfig {
            experiment,
            n_range: [1, 1],
            ..SweepConfig::default()
        }
    }

    #[test]
    fn empty_probe_list_gives_no_rows() {
        assert!(run_sweep(&cfg(Experiment::CbVsN)).unwrap().is_empty());
    }

    #[test]
    fn grid_order_and_fields() {
        let mut c = cfg(Experiment::DeltaVsN);
        c.n_range = [0, 1];
        c.probes = vec![
            ProbeEntry::new(ProbeOp::AddIdler, 0.05),
            ProbeEntry::new(ProbeOp::Tmsv, 0.05),
        ];
        let rows = run_sweep(&c).unwrap();
        let labels: Vec<_> = rows.iter().map(|r| (r.probe.as_str(), r.n)).collect();
        assert_eq!(
            labels,
            vec![
                ("add_idler(k=0,l=0)", Some(0)),
                ("add_idler(k=1,l=0)", Some(1)),
                ("tmsv(k=0,l=0)", Some(0)),
                ("tmsv(k=0,l=0)", Some(1)),
            ]
        );
        assert_eq!(rows[0].q_value, rows[2].q_value);
        assert!(rows
            .iter()
            .all(|r| !r.failed() && r.delta.is_some() && r.trace_deficit.unwrap() < 1e-8));
    }

    #[test]
    fn failures_are_flagged_not_fatal() {
        let mut c = cfg(Experiment::CbVsN);
        c.dimension_cap = 10;
        c.probes = vec![ProbeEntry::new(ProbeOp::Tmsv, 0.05)];
        let rows = run_sweep(&c).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].status.starts_with("failed"));
        assert_eq!(rows[0].q_value, None);
    }

    #[test]
    fn entanglement_rows() {
        let mut c = cfg(Experiment::EntanglementLimit);
        c.n_s_grid = vec![1.0, 10.0];
        let rows = run_sweep(&c).unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[0].entanglement.unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn worker_count_defaults_to_request() {
        if std::env::var(THREADS_ENV).is_err() {
            assert_eq!(worker_count(3), 3);
            assert_eq!(worker_count(0), 1);
        }
    }
}
