//! Fixed-step mission simulator.
//!
//! Row 0 of a [`Trace`] is the initial condition. Row `k >= 1` holds the
//! state at `t = k*dt` and the powers delivered during the step ending there.
//! Each step runs in this order:
//!
//! 1. evaluate demands at `t`
//! 2. supervisor decides `u_shed` from the previous row's measurements
//! 3. compute power flows
//! 4. step SOC, then bus voltage
//! 5. check abort (SOC first, then voltage)
//! 6. sample sensors and step the detector

use serde::{Deserialize, Serialize};

use crate::adversary::{SensorSample, Sensors};
use crate::config::{BenchmarkParams, CaseKind, ScenarioCase};
use crate::detector::DetectorState;
use crate::error::{Error, Result};
use crate::metrics::{self, MissionMetrics};
use crate::plant::{self, PlantState, PowerFlows};
use crate::supervisor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbortCause {
    Soc,
    Voltage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub plant: PlantState,
    pub detector: DetectorState,
    pub last_sample: SensorSample,
    pub aborted: bool,
    pub t_abort: Option<f64>,
    pub abort_cause: Option<AbortCause>,
}

/// Terminal summary attached to a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub case: ScenarioCase,
    pub final_state: SimState,
    /// Row index at which the abort was detected.
    pub abort_row: Option<usize>,
}

/// Column-oriented time series sampled at `dt` over `[0, T]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub dt: f64,
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub s_m: Vec<f64>,
    pub s_hat: Vec<f64>,
    pub residual: Vec<f64>,
    pub u_shed: Vec<f64>,
    pub pc_req: Vec<f64>,
    pub pc_srv: Vec<f64>,
    pub ph_req: Vec<f64>,
    pub ph_srv: Vec<f64>,
    pub p_bat: Vec<f64>,
    pub attack_active: Vec<bool>,
    pub alarm_latched: Vec<bool>,
    pub summary: Option<TraceSummary>,
}

impl Trace {
    fn with_capacity(n: usize, dt: f64) -> Self {
        Self {
            dt,
            t: Vec::with_capacity(n),
            s: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            s_m: Vec::with_capacity(n),
            s_hat: Vec::with_capacity(n),
            residual: Vec::with_capacity(n),
            u_shed: Vec::with_capacity(n),
            pc_req: Vec::with_capacity(n),
            pc_srv: Vec::with_capacity(n),
            ph_req: Vec::with_capacity(n),
            ph_srv: Vec::with_capacity(n),
            p_bat: Vec::with_capacity(n),
            attack_active: Vec::with_capacity(n),
            alarm_latched: Vec::with_capacity(n),
            summary: None,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn push(
        &mut self,
        plant: &PlantState,
        sample: &SensorSample,
        det: &DetectorState,
        u_shed: f64,
        f: &PowerFlows,
    ) {
        self.t.push(plant.t);
        self.s.push(plant.s);
        self.v.push(plant.v);
        self.s_m.push(sample.s_m);
        self.s_hat.push(det.s_hat);
        self.residual.push(det.residual);
        self.u_shed.push(u_shed);
        self.pc_req.push(f.pc_req);
        self.pc_srv.push(f.pc_srv);
        self.ph_req.push(f.ph_req);
        self.ph_srv.push(f.ph_srv);
        self.p_bat.push(f.p_bat);
        self.attack_active.push(sample.attack_active);
        self.alarm_latched.push(det.alarm_latched);
    }

    /// Last row whose step was part of the active mission.
    pub fn last_active_row(&self) -> usize {
        self.summary
            .as_ref()
            .and_then(|s| s.abort_row)
            .unwrap_or(self.len().saturating_sub(1))
    }

    pub fn t_abort(&self) -> Option<f64> {
        self.summary.as_ref().and_then(|s| s.final_state.t_abort)
    }

    pub fn t_alarm(&self) -> Option<f64> {
        self.summary
            .as_ref()
            .and_then(|s| s.final_state.detector.t_alarm)
    }
}

/// Running sums maintained while the trace is produced.
#[derive(Debug, Clone, Default)]
struct Accumulators {
    crit_req: f64,
    crit_srv: f64,
    lol_num: f64,
    lol_den: f64,
    unsafe_steps: usize,
}

impl Accumulators {
    fn add(&mut self, f: &PowerFlows, v: f64, active: bool, p: &BenchmarkParams) {
        self.crit_req += f.pc_req;
        self.crit_srv += f.pc_srv;
        self.lol_num +=
            p.w_crit * (f.pc_req - f.pc_srv).max(0.0) + p.w_shed * (f.ph_req - f.ph_srv).max(0.0);
        self.lol_den += p.w_crit * f.pc_req + p.w_shed * f.ph_req;
        if active && v < p.v_min {
            self.unsafe_steps += 1;
        }
    }
}

/// Trace plus the metrics accumulated while it was produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub streaming: MissionMetrics,
}

fn ensure_finite(x: f64, signal: &'static str, t: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { signal, t })
    }
}

/// Runs one case and returns its trace.
pub fn run(case: &ScenarioCase, p: &BenchmarkParams) -> Result<Trace> {
    Ok(simulate(case, p)?.trace)
}

/// Runs one case, producing both the trace and the streaming metrics.
pub fn simulate(case: &ScenarioCase, p: &BenchmarkParams) -> Result<RunOutput> {
    let mut violations = match p.validate() {
        Ok(()) => Vec::new(),
        Err(v) => v,
    };
    violations.extend(case.validate(p));
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }

    let n = p.steps();
    let mut trace = Trace::with_capacity(n + 1, p.dt);
    let mut sensors = Sensors::new(case.seed, case.attack.clone());
    let fallback_enabled = case.kind == CaseKind::Defended;

    // start on the voltage manifold with nothing shed
    let (pc0, ph0) = plant::demand(0.0, p);
    let flows0 = PowerFlows::serve(pc0, ph0, 0.0, p.p_source);
    let mut plant_state = PlantState {
        t: 0.0,
        s: p.soc_init,
        v: plant::v_equilibrium(flows0.p_net, p.soc_init, p),
    };
    let mut sample = sensors.sample(plant_state.s, flows0.p_bat, 0.0, p);
    let mut det = DetectorState::new(sample.s_m);
    trace.push(&plant_state, &sample, &det, 0.0, &flows0);

    let mut acc = Accumulators::default();
    let mut abort: Option<(usize, f64, AbortCause)> = None;

    for k in 1..=n {
        let t = k as f64 * p.dt;
        let (pc_req, ph_req) = plant::demand(t, p);

        if abort.is_some() {
            let flows = PowerFlows::unserved(pc_req, ph_req);
            plant_state.t = t;
            acc.add(&flows, plant_state.v, false, p);
            trace.push(&plant_state, &sample, &det, 0.0, &flows);
            continue;
        }

        let cmd = supervisor::decide(
            sample.s_m,
            plant_state.v,
            fallback_enabled && det.fallback_active(),
            case.fallback_fraction,
            p,
        );
        let flows = PowerFlows::serve(pc_req, ph_req, cmd.u_shed, p.p_source);

        let s = plant::step_soc(plant_state.s, flows.p_bat, p);
        let v_eq = plant::v_equilibrium(flows.p_net, s, p);
        let v = plant::step_voltage(plant_state.v, v_eq, p);
        ensure_finite(s, "soc", t)?;
        ensure_finite(v, "bus voltage", t)?;
        plant_state = PlantState { t, s, v };

        if s <= p.soc_crit {
            abort = Some((k, t, AbortCause::Soc));
        } else if v <= p.v_fail {
            abort = Some((k, t, AbortCause::Voltage));
        }

        if abort.is_none() {
            sample = sensors.sample(s, flows.p_bat, t, p);
            ensure_finite(sample.pbat_m, "measured power", t)?;
            det.step(sample.s_m, sample.pbat_m, t, p);
        }

        acc.add(&flows, v, true, p);
        trace.push(&plant_state, &sample, &det, cmd.u_shed, &flows);
    }

    let final_state = SimState {
        plant: plant_state,
        detector: det,
        last_sample: sample,
        aborted: abort.is_some(),
        t_abort: abort.map(|a| a.1),
        abort_cause: abort.map(|a| a.2),
    };

    let streaming = MissionMetrics {
        endurance_min: abort.map_or(p.horizon, |a| a.1) / 60.0,
        crit_served_ratio: metrics::ratio_or_one(acc.crit_srv, acc.crit_req),
        j_lol: metrics::ratio_or_zero(acc.lol_num, acc.lol_den),
        unsafe_duration_s: acc.unsafe_steps as f64 * p.dt,
        time_to_detection_s: metrics::reported_detection(&det, case),
    };

    trace.summary = Some(TraceSummary {
        case: case.clone(),
        final_state,
        abort_row: abort.map(|a| a.0),
    });

    Ok(RunOutput { trace, streaming })
}

/// Per-metric gap between the streaming and post-hoc computations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityReport {
    pub scenario: String,
    pub streaming: MissionMetrics,
    pub post_hoc: MissionMetrics,
    pub endurance_diff: f64,
    pub crit_ratio_diff: f64,
    pub j_lol_diff: f64,
    pub unsafe_diff: f64,
    /// 0 when both agree (including both undetected), infinite otherwise.
    pub detection_diff: f64,
}

impl ParityReport {
    pub fn max_diff(&self) -> f64 {
        [
            self.endurance_diff,
            self.crit_ratio_diff,
            self.j_lol_diff,
            self.unsafe_diff,
            self.detection_diff,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_diff() <= tol
    }

    pub fn new(scenario: String, streaming: MissionMetrics, post_hoc: MissionMetrics) -> Self {
        let s = &streaming;
        let detection_diff = match (s.time_to_detection_s, post_hoc.time_to_detection_s) {
            (None, None) => 0.0,
            (Some(a), Some(b)) => (a - b).abs(),
            _ => f64::INFINITY,
        };
        Self {
            scenario,
            endurance_diff: (s.endurance_min - post_hoc.endurance_min).abs(),
            crit_ratio_diff: (s.crit_served_ratio - post_hoc.crit_served_ratio).abs(),
            j_lol_diff: (s.j_lol - post_hoc.j_lol).abs(),
            unsafe_diff: (s.unsafe_duration_s - post_hoc.unsafe_duration_s).abs(),
            detection_diff,
            streaming,
            post_hoc,
        }
    }
}

/// Compares metrics accumulated during the run with metrics recomputed from
/// the stored trace.
pub fn run_pair_parity(case: &ScenarioCase, p: &BenchmarkParams) -> Result<ParityReport> {
    let out = simulate(case, p)?;
    let post_hoc = metrics::compute_all(&out.trace, case, p);
    Ok(ParityReport::new(case.name(), out.streaming, post_hoc))
}
