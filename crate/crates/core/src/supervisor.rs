//! Two-path soft-shed supervisor.

use serde::{Deserialize, Serialize};

use crate::config::BenchmarkParams;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ShedCommand {
    pub u_shed: f64,
    pub u_soc: f64,
    pub u_volt: f64,
    pub u_fallback: f64,
}

/// 0 at or above `hi`, 1 at or below `lo`, linear in between.
fn ramp_down(x: f64, hi: f64, lo: f64) -> f64 {
    if x >= hi {
        0.0
    } else if x <= lo {
        1.0
    } else {
        (hi - x) / (hi - lo)
    }
}

/// SOC path: ramps from 0 at `s_warn` to 1 at `s_crit`.
pub fn soc_shed(s_m: f64, p: &BenchmarkParams) -> f64 {
    ramp_down(s_m, p.soc_warn, p.soc_crit)
}

/// Voltage path: ramps from 0 at `V_warn` to 1 at `V_fail`.
pub fn volt_shed(v: f64, p: &BenchmarkParams) -> f64 {
    ramp_down(v, p.v_warn, p.v_fail)
}

/// Combines both paths and any active fallback by taking the maximum.
pub fn decide(
    s_m: f64,
    v: f64,
    fallback_active: bool,
    fallback_fraction: f64,
    p: &BenchmarkParams,
) -> ShedCommand {
    let u_soc = soc_shed(s_m, p);
    let u_volt = volt_shed(v, p);
    let u_fallback = if fallback_active {
        fallback_fraction.clamp(0.0, 1.0)
    } else {
        0.0
    };
    ShedCommand {
        u_shed: u_soc.max(u_volt).max(u_fallback),
        u_soc,
        u_volt,
        u_fallback,
    }
}
