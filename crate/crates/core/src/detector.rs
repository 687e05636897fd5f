//! Residual detector with confirmation debounce and a permanent alarm latch.
//!
//! The predictor integrates the measured battery power (coulomb counting)
//! from the first measured SOC sample. The residual is the absolute gap
//! between the measured SOC and that prediction.

use serde::{Deserialize, Serialize};

use crate::config::{AttackSpec, BenchmarkParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    pub s_hat: f64,
    pub residual: f64,
    /// Start of the current uninterrupted exceedance.
    pub exceed_since: Option<f64>,
    pub alarm_latched: bool,
    pub t_alarm: Option<f64>,
}

impl DetectorState {
    pub fn new(s_m_initial: f64) -> Self {
        Self {
            s_hat: s_m_initial,
            residual: 0.0,
            exceed_since: None,
            alarm_latched: false,
            t_alarm: None,
        }
    }

    /// Processes the measurement pair sampled at `t`.
    pub fn step(&mut self, s_m: f64, pbat_m: f64, t: f64, p: &BenchmarkParams) {
        self.s_hat = (self.s_hat - pbat_m * p.soc_per_kw_step()).clamp(0.0, 1.0);
        self.residual = (s_m - self.s_hat).abs();
        if self.residual > p.tau_d {
            let since = *self.exceed_since.get_or_insert(t);
            // step times are k*dt, so allow rounding well below one step
            if !self.alarm_latched && t - since + 1e-6 * p.dt >= p.t_confirm {
                self.alarm_latched = true;
                self.t_alarm = Some(t);
            }
        } else {
            self.exceed_since = None;
        }
    }

    /// The fallback stays engaged from the alarm to the end of the mission.
    pub fn fallback_active(&self) -> bool {
        self.alarm_latched
    }
}

pub fn init_detector(s_m_initial: f64) -> DetectorState {
    DetectorState::new(s_m_initial)
}

pub fn detector_step(
    state: &DetectorState,
    s_m: f64,
    pbat_m: f64,
    t: f64,
    p: &BenchmarkParams,
) -> DetectorState {
    let mut next = *state;
    next.step(s_m, pbat_m, t, p);
    next
}

pub fn fallback_active(state: &DetectorState) -> bool {
    state.fallback_active()
}

/// Seconds from the earliest attack window start to the confirmed alarm;
/// `None` stands for "never detected" (reported as infinity).
pub fn time_to_detection(state: &DetectorState, attack: Option<&AttackSpec>) -> Option<f64> {
    let onset = attack?.onset()?;
    state.t_alarm.map(|t| t - onset)
}
