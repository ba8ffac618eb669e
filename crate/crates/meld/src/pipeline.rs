//! From a configuration to melds, certificates and traces.

use meld_core::control::{global_constants, meld_constants, GainProfile, MeldConstants};
use meld_core::coords::output_jets;
use meld_core::dwell::{dwell_from_constants, DwellCertificate};
use meld_core::estimate::{estimate_assumption_constants, EstimationOptions, EstimationReport};
use meld_core::lie::{self, LieOptions};
use meld_core::meld::{certify_meld, enumerate_melds, Choice, Meld, MeldCertificate};
use meld_core::models::{Arm3, Arm3Params, DoubleIntegrator, Model};
use meld_core::reference::{ConfigurationReference, PerturbedReference, QuinticPath, ReferenceBundle};
use meld_core::sampling::StateBox;
use meld_core::schedule::SwitchSchedule;
use meld_core::sim::{run_scenario, Hold, Scenario, SimOptions, SimTrace};
use meld_core::system::SubDeck;
use meld_core::ControlAffineSystem;

use crate::config::{Consistency, HoldMode, ModelKind, ScenarioConfig, ScheduleMode};
use crate::error::CliError;

pub type System = SubDeck<Model>;

/// Largest number of re-estimation rounds in auto-certified mode.
const MAX_CERTIFY_ROUNDS: usize = 6;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// A validated configuration with its model objects.
#[derive(Clone, Debug)]
pub struct Setup {
    pub cfg: ScenarioConfig,
    pub sys: System,
    pub names: Vec<String>,
    pub deck_degrees: Vec<usize>,
    pub melds: Vec<Meld>,
    pub gains: GainProfile,
    /// The schedule as written, with 0-based meld indices.
    pub requested: SwitchSchedule,
    pub sampling_box: StateBox,
}

fn model(cfg: &ScenarioConfig) -> Result<Model, CliError> {
    let m = &cfg.model;
    match m.kind {
        ModelKind::Manipulator3R => {
            let three = |v: &Option<Vec<f64>>, what: &str, default: [f64; 3]| -> Result<[f64; 3], CliError> {
                match v {
                    None => Ok(default),
                    Some(v) => v.as_slice().try_into().map_err(|_| config_err(format!("model.{what} needs 3 values"))),
                }
            };
            let base = Arm3Params::default();
            let mut p = Arm3Params::point_masses(three(&m.lengths, "lengths", base.l)?, three(&m.masses, "masses", base.m)?);
            if m.inertias.is_some() {
                p.inertia = three(&m.inertias, "inertias", p.inertia)?;
            }
            if !p.is_valid() {
                return Err(config_err("link lengths, masses and inertias must be positive"));
            }
            Ok(Model::Arm3(Arm3::new(p)))
        }
        ModelKind::DoubleIntegrator => {
            if m.lengths.is_some() || m.masses.is_some() || m.inertias.is_some() {
                return Err(config_err("the double integrator takes no parameters"));
            }
            Ok(Model::DoubleIntegrator(DoubleIntegrator))
        }
    }
}

fn check_len(v: &[f64], n: usize, what: &str) -> Result<(), CliError> {
    if v.len() != n || v.iter().any(|a| !a.is_finite()) {
        return Err(config_err(format!("{what} needs {n} finite values")));
    }
    Ok(())
}

impl Setup {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, CliError> {
        let inner = model(&cfg)?;
        let all: Vec<String> = (0..inner.deck_len()).map(|i| inner.output_name(i)).collect();
        let outputs: Vec<usize> = match &cfg.deck.outputs {
            None => (0..all.len()).collect(),
            Some(names) => names
                .iter()
                .map(|n| all.iter().position(|a| a == n).ok_or_else(|| config_err(format!("unknown output {n}"))))
                .collect::<Result<_, _>>()?,
        };
        if outputs.is_empty() || outputs.len() > meld_core::meld::MAX_DECK {
            return Err(config_err("deck size out of range"));
        }
        let sys = SubDeck { inner, outputs };
        let n = sys.state_dim();
        let names: Vec<String> = (0..sys.deck_len()).map(|i| sys.output_name(i)).collect();

        check_len(&cfg.melds.operating_point, n, "melds.operating_point")?;
        check_len(&cfg.simulation.x0, n, "simulation.x0")?;
        check_len(&cfg.certificate.box_lower, n, "certificate.box_lower")?;
        check_len(&cfg.certificate.box_upper, n, "certificate.box_upper")?;
        check_len(&cfg.reference.initial, n / 2, "reference.initial")?;
        for p in &cfg.reference.poses {
            check_len(p, n / 2, "reference.poses entries")?;
        }
        if !(cfg.simulation.dt > 0.0) || !(cfg.certificate.epsilon > 0.0) || !(cfg.reference.move_duration > 0.0) {
            return Err(config_err("dt, epsilon and move_duration must be positive"));
        }
        if !(cfg.melds.cond_max > 1.0) {
            return Err(config_err("melds.cond_max must exceed 1"));
        }
        if cfg.reference.poses.len() > cfg.schedule.starts.len() {
            return Err(config_err("one pose per schedule interval at most"));
        }
        let sampling_box = StateBox::new(cfg.certificate.box_lower.clone(), cfg.certificate.box_upper.clone())
            .map_err(|e| config_err(format!("sampling box: {e}")))?;

        let reps = lie::relative_degrees(&sys, &(0..names.len()).collect::<Vec<_>>(), &cfg.melds.operating_point, n, &LieOptions::default())?;
        let deck_degrees = reps
            .iter()
            .map(|r| r.r.ok_or(meld_core::Error::UndefinedRelativeDegree { output: r.output }))
            .collect::<Result<Vec<_>, _>>()?;

        let melds = cfg
            .melds
            .list
            .iter()
            .map(|b| {
                let c = Choice::parse_bits(b).map_err(|e| config_err(format!("meld {b}: {e}")))?;
                if c.deck_len() != names.len() {
                    return Err(config_err(format!("meld {b} does not span the {}-output deck", names.len())));
                }
                Meld::from_deck_degrees(c, &deck_degrees).map_err(|e| config_err(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if melds.is_empty() {
            return Err(config_err("melds.list is empty"));
        }

        let rows: Vec<Vec<f64>> = names
            .iter()
            .map(|n| cfg.gains.overrides.get(n).cloned().unwrap_or_else(|| cfg.gains.default.clone()))
            .collect();
        if let Some(k) = cfg.gains.overrides.keys().find(|k| !names.contains(k)) {
            return Err(config_err(format!("gain override for unknown output {k}")));
        }
        let gains = GainProfile::new(rows).map_err(|e| config_err(format!("gains: {e}")))?;
        gains.check_degrees(&deck_degrees).map_err(|e| config_err(format!("gains: {e}")))?;

        let sequence: Vec<usize> = cfg
            .schedule
            .sequence
            .iter()
            .map(|&id| {
                if id == 0 || id > melds.len() {
                    Err(config_err(format!("schedule refers to meld {id}, have {}", melds.len())))
                } else {
                    Ok(id - 1)
                }
            })
            .collect::<Result<_, _>>()?;
        let requested = SwitchSchedule::new(cfg.schedule.starts.clone(), sequence)
            .map_err(|e| config_err(format!("schedule: {e}")))?;
        if !(cfg.simulation.t_end >= requested.t0()) {
            return Err(config_err("simulation.t_end precedes the schedule"));
        }
        Ok(Self { cfg, sys, names, deck_degrees, melds, gains, requested, sampling_box })
    }

    /// References whose moves start at the intervals of `schedule`.
    pub fn references(&self, schedule: &SwitchSchedule) -> Result<Box<dyn ReferenceBundle>, CliError> {
        let r = &self.cfg.reference;
        let moves: Vec<(f64, f64, Vec<f64>)> =
            schedule.starts.iter().zip(&r.poses).map(|(s, p)| (*s, r.move_duration, p.clone())).collect();
        let path = QuinticPath::rest_to_rest(&r.initial, &moves).map_err(|e| config_err(format!("reference: {e}")))?;
        let base = ConfigurationReference::new(self.sys.clone(), path).map_err(|e| config_err(format!("reference: {e}")))?;
        Ok(match r.consistency {
            Consistency::Consistent => Box::new(base),
            Consistency::Perturbed => {
                if r.perturb_amplitude.len() != self.names.len() {
                    return Err(config_err("reference.perturb_amplitude needs one value per deck output"));
                }
                Box::new(PerturbedReference {
                    base,
                    amplitude: r.perturb_amplitude.clone(),
                    omega: r.perturb_omega.unwrap_or(1.0),
                })
            }
        })
    }

    /// End time belonging to `schedule`: the configured end, shifted by
    /// however much the last interval start moved.
    pub fn end_time(&self, schedule: &SwitchSchedule) -> f64 {
        let last = |s: &SwitchSchedule| *s.starts.last().unwrap();
        self.cfg.simulation.t_end + (last(schedule) - last(&self.requested))
    }

    pub fn sweep(&self) -> Result<Vec<MeldCertificate>, CliError> {
        Ok(enumerate_melds(&self.sys, &self.cfg.melds.operating_point, self.cfg.melds.cond_max, &LieOptions::default())?)
    }
}

/// A listed meld certified at some operating point.
#[derive(Clone, Debug)]
pub struct CertifiedMeld {
    pub certificate: MeldCertificate,
    /// `true` when `x°` itself did not work and the reference state at the
    /// start of the meld's first interval was used.
    pub own_point: bool,
}

#[derive(Clone, Debug)]
pub struct Certification {
    pub melds: Vec<CertifiedMeld>,
    pub per_meld: Vec<MeldConstants>,
    pub global: MeldConstants,
    pub estimation: EstimationReport,
    pub dwell: DwellCertificate,
    pub initial_error: f64,
    pub schedule: SwitchSchedule,
    pub certified: bool,
    pub t_end: f64,
}

fn certify_listed(setup: &Setup) -> Result<Vec<CertifiedMeld>, CliError> {
    let refs = setup.references(&setup.requested)?;
    let opts = LieOptions::default();
    let cond_max = setup.cfg.melds.cond_max;
    setup
        .melds
        .iter()
        .enumerate()
        .map(|(id, m)| {
            let at_op = certify_meld(&setup.sys, &m.choice, &setup.cfg.melds.operating_point, cond_max, &opts)?;
            if at_op.is_meld() {
                return Ok(CertifiedMeld { certificate: at_op, own_point: false });
            }
            let first = setup.requested.melds.iter().position(|&k| k == id);
            if let Some(x) = first.and_then(|k| refs.state(setup.requested.starts[k])) {
                let own = certify_meld(&setup.sys, &m.choice, &x, cond_max, &opts)?;
                if own.is_meld() {
                    return Ok(CertifiedMeld { certificate: own, own_point: true });
                }
            }
            Err(CliError::Evaluation(meld_core::Error::SingularInteraction { cond: at_op.cond_a }))
        })
        .collect()
}

/// `Σ_{i ∈ σ(t0)} ‖ȳ_i^d(t0) − ȳ_i(x0)‖`.
fn initial_error(setup: &Setup, refs: &dyn ReferenceBundle, schedule: &SwitchSchedule) -> Result<f64, CliError> {
    let t0 = schedule.t0();
    let meld = &setup.melds[schedule.melds[0]];
    let orders: Vec<usize> = setup.deck_degrees.iter().map(|r| r - 1).collect();
    let yd = refs.jets(t0, &orders);
    let mut total = 0.0;
    for (&i, &r) in meld.outputs.iter().zip(&meld.degrees) {
        let y = output_jets(&setup.sys, &[i], &[r], &setup.cfg.simulation.x0)?;
        total += y.iter().zip(&yd[i]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    }
    Ok(total)
}

pub fn certify(setup: &Setup) -> Result<Certification, CliError> {
    let melds = certify_listed(setup)?;
    let per_meld = setup.melds.iter().map(|m| meld_constants(m, &setup.gains)).collect::<Result<Vec<_>, _>>()?;
    let global = global_constants(&per_meld)?;
    let c = &setup.cfg.certificate;
    let p = setup.sys.input_dim();
    let mut schedule = setup.requested.clone();
    let mut rounds = 0;
    loop {
        rounds += 1;
        let refs = setup.references(&schedule)?;
        let t_end = setup.end_time(&schedule);
        let opts = EstimationOptions {
            samples_per_level: c.samples_per_level,
            min_half_width: c.min_half_width,
            seed: setup.cfg.seed,
            cond_max: setup.cfg.melds.cond_max,
            time_step: c.time_step,
            t_end,
            ..EstimationOptions::default()
        };
        let estimation = estimate_assumption_constants(
            &setup.sys,
            &setup.deck_degrees,
            &setup.melds,
            refs.as_ref(),
            &schedule,
            &setup.sampling_box,
            &opts,
        )?;
        let e0 = initial_error(setup, refs.as_ref(), &schedule)?;
        let dwell = dwell_from_constants(&estimation.constants, global.alpha, global.c, p, c.epsilon, e0)?;
        let certified = schedule.respects_dwell(dwell.tau0, dwell.tau_bar);
        let done = certified || setup.cfg.schedule.mode == ScheduleMode::Explicit || rounds == MAX_CERTIFY_ROUNDS;
        if done {
            return Ok(Certification {
                melds,
                per_meld,
                global,
                estimation,
                dwell,
                initial_error: e0,
                schedule,
                certified,
                t_end,
            });
        }
        schedule = setup.requested.certified(dwell.tau0, dwell.tau_bar);
    }
}

pub fn simulate(setup: &Setup, cert: &Certification) -> Result<SimTrace, CliError> {
    let refs = setup.references(&cert.schedule)?;
    let sc = Scenario {
        sys: &setup.sys,
        deck_degrees: &setup.deck_degrees,
        melds: &setup.melds,
        gains: &setup.gains,
        refs: refs.as_ref(),
        schedule: &cert.schedule,
        x0: &setup.cfg.simulation.x0,
    };
    let opts = SimOptions {
        dt: setup.cfg.simulation.dt,
        t_end: cert.t_end,
        hold: match setup.cfg.simulation.hold {
            HoldMode::PerStage => Hold::PerStage,
            HoldMode::ZeroOrder => Hold::ZeroOrder,
        },
        cond_max: setup.cfg.melds.cond_max,
        chi: setup.cfg.simulation.chi,
        ..SimOptions::default()
    };
    Ok(run_scenario(&sc, &opts)?)
}
