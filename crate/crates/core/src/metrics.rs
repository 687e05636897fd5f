//! The five mission-facing metrics, computed post hoc from a [`Trace`].
//!
//! Integrals use the rectangle rule at `dt` over step rows `1..=N`; row 0 is
//! the initial condition and carries no step.

use serde::{Deserialize, Serialize};

use crate::config::{BenchmarkParams, ScenarioCase};
use crate::detector::{time_to_detection, DetectorState};
use crate::engine::Trace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionMetrics {
    pub endurance_min: f64,
    pub crit_served_ratio: f64,
    pub j_lol: f64,
    pub unsafe_duration_s: f64,
    /// `None` means no alarm (infinite detection time).
    pub time_to_detection_s: Option<f64>,
}

impl MissionMetrics {
    pub fn completed(&self, p: &BenchmarkParams) -> bool {
        self.endurance_min >= p.horizon / 60.0
    }

    /// Detection time with `None` mapped to infinity.
    pub fn detection_or_inf(&self) -> f64 {
        self.time_to_detection_s.unwrap_or(f64::INFINITY)
    }

    /// One row in the column order End | Crit | J_LOL | Unsafe | Det.
    pub fn table_row(&self, label: &str) -> String {
        let det = match self.time_to_detection_s {
            Some(d) => format!("{d:.1}"),
            None => "inf".to_string(),
        };
        format!(
            "{label:<16} {:>9.2} {:>9.3} {:>8.3} {:>10.1} {:>8}",
            self.endurance_min, self.crit_served_ratio, self.j_lol, self.unsafe_duration_s, det
        )
    }

    pub fn table_header() -> String {
        format!(
            "{:<16} {:>9} {:>9} {:>8} {:>10} {:>8}",
            "case", "end(min)", "crit", "J_LOL", "unsafe(s)", "det(s)"
        )
    }
}

pub(crate) fn ratio_or_one(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        1.0
    }
}

pub(crate) fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Minutes to abort, or the horizon when the mission completes.
pub fn endurance(trace: &Trace, p: &BenchmarkParams) -> f64 {
    match trace.summary.as_ref().and_then(|s| s.abort_row) {
        Some(row) => trace.t[row] / 60.0,
        None => p.horizon / 60.0,
    }
}

/// Delivered over requested critical energy across the horizon.
pub fn critical_ratio(trace: &Trace) -> f64 {
    let (mut srv, mut req) = (0.0, 0.0);
    for k in 1..trace.len() {
        srv += trace.pc_srv[k];
        req += trace.pc_req[k];
    }
    ratio_or_one(srv, req)
}

/// Priority-weighted, normalized unserved load over the fixed horizon.
pub fn j_lol(trace: &Trace, p: &BenchmarkParams) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for k in 1..trace.len() {
        num += p.w_crit * (trace.pc_req[k] - trace.pc_srv[k]).max(0.0)
            + p.w_shed * (trace.ph_req[k] - trace.ph_srv[k]).max(0.0);
        den += p.w_crit * trace.pc_req[k] + p.w_shed * trace.ph_req[k];
    }
    ratio_or_zero(num, den)
}

/// Seconds with `v < V_min` while the mission is active.
pub fn unsafe_duration(trace: &Trace, p: &BenchmarkParams) -> f64 {
    let last = trace.last_active_row();
    let count = (1..=last.min(trace.len().saturating_sub(1)))
        .filter(|&k| trace.v[k] < p.v_min)
        .count();
    count as f64 * p.dt
}

/// Detection latency as reported in the metrics. The detector runs in every
/// case, but an alarm nobody acts on (Nominal, Attacked) is reported as
/// never detected.
pub fn reported_detection(det: &DetectorState, case: &ScenarioCase) -> Option<f64> {
    if !case.fallback_enabled() {
        return None;
    }
    time_to_detection(det, case.attack.as_ref())
}

pub fn compute_all(trace: &Trace, case: &ScenarioCase, p: &BenchmarkParams) -> MissionMetrics {
    let detection = trace
        .summary
        .as_ref()
        .and_then(|s| reported_detection(&s.final_state.detector, case));
    MissionMetrics {
        endurance_min: endurance(trace, p),
        crit_served_ratio: critical_ratio(trace),
        j_lol: j_lol(trace, p),
        unsafe_duration_s: unsafe_duration(trace, p),
        time_to_detection_s: detection,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::default_params;
    use crate::engine::{AbortCause, SimState, TraceSummary};
    use crate::plant::PlantState;
    use proptest::prelude::*;

    /// Synthetic trace with `n` step rows of constant demand.
    fn synthetic(n: usize, pc: f64, ph: f64) -> Trace {
        let rows = n + 1;
        let mut tr = Trace {
            dt: 0.1,
            t: (0..rows).map(|k| k as f64 * 0.1).collect(),
            s: vec![0.5; rows],
            v: vec![620.0; rows],
            s_m: vec![0.5; rows],
            s_hat: vec![0.5; rows],
            residual: vec![0.0; rows],
            u_shed: vec![0.0; rows],
            pc_req: vec![pc; rows],
            pc_srv: vec![pc; rows],
            ph_req: vec![ph; rows],
            ph_srv: vec![ph; rows],
            p_bat: vec![pc + ph; rows],
            attack_active: vec![false; rows],
            alarm_latched: vec![false; rows],
            summary: None,
        };
        tr.summary = Some(TraceSummary {
            case: ScenarioCase::nominal(0),
            final_state: SimState {
                plant: PlantState {
                    t: 0.0,
                    s: 0.5,
                    v: 620.0,
                },
                detector: crate::detector::DetectorState::new(0.5),
                last_sample: Default::default(),
                aborted: false,
                t_abort: None,
                abort_cause: None,
            },
            abort_row: None,
        });
        tr
    }

    fn set_abort(tr: &mut Trace, row: usize) {
        let s = tr.summary.as_mut().unwrap();
        s.abort_row = Some(row);
        s.final_state.aborted = true;
        s.final_state.t_abort = Some(tr.t[row]);
        s.final_state.abort_cause = Some(AbortCause::Soc);
        for k in row + 1..tr.len() {
            tr.pc_srv[k] = 0.0;
            tr.ph_srv[k] = 0.0;
        }
    }

    #[test]
    fn full_service_has_no_loss() {
        let p = default_params();
        let tr = synthetic(100, 10.0, 6.0);
        assert_eq!(j_lol(&tr, &p), 0.0);
        assert_eq!(critical_ratio(&tr), 1.0);
        assert_eq!(endurance(&tr, &p), 45.0);
    }

    #[test]
    fn nothing_served_is_total_loss() {
        let p = default_params();
        let mut tr = synthetic(100, 10.0, 6.0);
        tr.pc_srv.iter_mut().for_each(|x| *x = 0.0);
        tr.ph_srv.iter_mut().for_each(|x| *x = 0.0);
        assert_eq!(j_lol(&tr, &p), 1.0);
        assert_eq!(critical_ratio(&tr), 0.0);
    }

    #[test]
    fn zero_demand_conventions() {
        let p = default_params();
        let tr = synthetic(10, 0.0, 0.0);
        assert_eq!(j_lol(&tr, &p), 0.0);
        assert_eq!(critical_ratio(&tr), 1.0);
    }

    #[test]
    fn unsafe_counts_active_steps() {
        let p = default_params();
        let mut tr = synthetic(100, 10.0, 6.0);
        for k in 1..=30 {
            tr.v[k] = 580.0;
        }
        assert!((unsafe_duration(&tr, &p) - 3.0).abs() < 1e-12);
        // boundary value is safe
        tr.v[40] = p.v_min;
        assert!((unsafe_duration(&tr, &p) - 3.0).abs() < 1e-12);
        // low voltage after the abort is excluded
        set_abort(&mut tr, 50);
        for k in 51..=100 {
            tr.v[k] = 500.0;
        }
        assert!((unsafe_duration(&tr, &p) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn abort_at_last_row_keeps_full_ratio() {
        let p = default_params();
        let mut tr = synthetic(100, 10.0, 6.0);
        set_abort(&mut tr, 100);
        assert_eq!(critical_ratio(&tr), 1.0);
        assert!((endurance(&tr, &p) - 10.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn abort_counts_remaining_demand_unserved() {
        let p = default_params();
        let mut tr = synthetic(100, 10.0, 6.0);
        set_abort(&mut tr, 60);
        assert!((critical_ratio(&tr) - 0.6).abs() < 1e-12);
        assert!((j_lol(&tr, &p) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn critical_loss_weighs_ten_times() {
        let p = default_params();
        let mut a = synthetic(100, 10.0, 10.0);
        let mut b = a.clone();
        a.ph_srv[5] = 5.0;
        b.pc_srv[5] = 5.0;
        let ratio = j_lol(&b, &p) / j_lol(&a, &p);
        assert!((ratio - p.w_crit / p.w_shed).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn j_lol_bounded_and_monotone(
            served in proptest::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), 20),
            bump in 0.0..=1.0f64,
        ) {
            let p = default_params();
            let mut tr = synthetic(20, 12.0, 10.0);
            for (k, (c, h)) in served.iter().enumerate() {
                tr.pc_srv[k + 1] = 12.0 * c;
                tr.ph_srv[k + 1] = 10.0 * h;
            }
            let j = j_lol(&tr, &p);
            prop_assert!((0.0..=1.0).contains(&j));
            let cr = critical_ratio(&tr);
            prop_assert!((0.0..=1.0).contains(&cr));
            let mut more = tr.clone();
            for k in 1..more.len() {
                more.pc_srv[k] = (more.pc_srv[k] + bump).min(12.0);
                more.ph_srv[k] = (more.ph_srv[k] + bump).min(10.0);
            }
            prop_assert!(j_lol(&more, &p) <= j + 1e-15);
        }
    }
}
