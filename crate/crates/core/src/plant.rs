//! Reduced-order physical truth: SOC integration, bus-voltage lag and the
//! load profiles.

use serde::{Deserialize, Serialize};

use crate::config::BenchmarkParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub t: f64,
    /// True SOC.
    pub s: f64,
    /// Bus voltage, V.
    pub v: f64,
}

/// Requested and served powers for one step, kW.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerFlows {
    pub pc_req: f64,
    pub ph_req: f64,
    pub pc_srv: f64,
    pub ph_srv: f64,
    pub p_net: f64,
    pub p_bat: f64,
}

impl PowerFlows {
    /// Critical load fully served, sheddable load curtailed by `u_shed`.
    pub fn serve(pc_req: f64, ph_req: f64, u_shed: f64, p_source: f64) -> Self {
        let pc_srv = pc_req;
        let ph_srv = (1.0 - u_shed) * ph_req;
        let p_net = pc_srv + ph_srv - p_source;
        Self {
            pc_req,
            ph_req,
            pc_srv,
            ph_srv,
            p_net,
            p_bat: p_net,
        }
    }

    /// Nothing served (post-abort).
    pub fn unserved(pc_req: f64, ph_req: f64) -> Self {
        Self {
            pc_req,
            ph_req,
            ..Self::default()
        }
    }
}

/// Requested (critical, sheddable) demand at time `t`.
pub fn demand(t: f64, p: &BenchmarkParams) -> (f64, f64) {
    let pc = p.pc_base + if t >= p.tc_step { p.pc_step } else { 0.0 };
    let ph = p.ph_base + if t >= p.th_step { p.ph_step } else { 0.0 };
    (pc, ph)
}

/// Droop equilibrium of the bus for net draw `p_net` and true SOC `s`.
pub fn v_equilibrium(p_net: f64, s: f64, p: &BenchmarkParams) -> f64 {
    p.v_nom - p.k_v * p_net.max(0.0) - p.k_s * (1.0 - s / p.soc_ref).max(0.0)
}

/// One explicit-Euler step of `tau_v * dv/dt = v_eq - v`.
pub fn step_voltage(v: f64, v_eq: f64, p: &BenchmarkParams) -> f64 {
    v + (p.dt / p.tau_v) * (v_eq - v)
}

/// One explicit-Euler step of the SOC balance, clamped to [0, 1].
pub fn step_soc(s: f64, p_bat: f64, p: &BenchmarkParams) -> f64 {
    (s - p_bat * p.soc_per_kw_step()).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::default_params;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn demand_profile() {
        let p = default_params();
        assert_eq!(demand(p.tc_step.max(p.th_step), &p), (12.0, 10.0));
        assert_eq!(demand(p.horizon, &p), (12.0, 10.0));
        let p = BenchmarkParams {
            th_step: 300.0,
            tc_step: 1200.0,
            ..p
        };
        assert_eq!(demand(0.0, &p), (10.0, 6.0));
        assert_eq!(demand(299.9, &p), (10.0, 6.0));
        assert_eq!(demand(300.0, &p), (10.0, 10.0));
    }

    #[test]
    fn equilibrium_values() {
        let p = default_params();
        assert_eq!(v_equilibrium(0.0, 1.0, &p), 650.0);
        assert_eq!(v_equilibrium(16.0, 1.0, &p), 618.0);
        assert_abs_diff_eq!(v_equilibrium(16.0, 0.30, &p), 593.5, epsilon = 1e-9);
        // negative net draw (charging) does not raise the bus
        assert_eq!(v_equilibrium(-5.0, 1.0, &p), 650.0);
    }

    #[test]
    fn voltage_step() {
        let p = default_params();
        assert_eq!(step_voltage(618.0, 618.0, &p), 618.0);
        assert_abs_diff_eq!(step_voltage(650.0, 618.0, &p), 634.0, epsilon = 1e-12);
        let mut v = 650.0;
        let mut gap = f64::INFINITY;
        for _ in 0..100 {
            v = step_voltage(v, 618.0, &p);
            assert!(v >= 618.0 && (v - 618.0 < gap || v == 618.0));
            gap = v - 618.0;
        }
        assert!(gap < 1e-9);
    }

    #[test]
    fn soc_step() {
        let p = default_params();
        assert_eq!(step_soc(0.55, 0.0, &p), 0.55);
        assert_eq!(step_soc(0.0, 5.0, &p), 0.0);
        assert_eq!(step_soc(1.0, -5.0, &p), 1.0);
    }

    #[test]
    fn sustained_draw_matches_closed_form() {
        // 16 kW for 2700 s removes 12 kWh, i.e. 0.5 of a 24 kWh pack
        let p = default_params();
        let mut s = 0.80;
        for _ in 0..p.steps() {
            s = step_soc(s, 16.0, &p);
        }
        assert_abs_diff_eq!(s, 0.30, epsilon = 1e-9);
    }

    #[test]
    fn serve_keeps_critical_whole() {
        let f = PowerFlows::serve(12.0, 10.0, 0.8, 0.0);
        assert_eq!(f.pc_srv, 12.0);
        assert_abs_diff_eq!(f.ph_srv, 2.0, epsilon = 1e-12);
        assert_eq!(f.p_net, f.pc_srv + f.ph_srv);
        assert_eq!(f.p_bat, f.p_net);
    }

    proptest! {
        #[test]
        fn voltage_step_contracts(v in 400.0..700.0f64, veq in 400.0..700.0f64, dt in 0.001..0.39f64) {
            let p = BenchmarkParams { dt, ..default_params() };
            let next = step_voltage(v, veq, &p);
            prop_assert!((next - veq).abs() <= (v - veq).abs() + 1e-12);
        }

        #[test]
        fn soc_stays_admissible(s in 0.0..=1.0f64, pb in -100.0..100.0f64) {
            let out = step_soc(s, pb, &default_params());
            prop_assert!((0.0..=1.0).contains(&out));
        }

        #[test]
        fn energy_accounting(draws in proptest::collection::vec(0.0..22.0f64, 1..2000)) {
            let p = default_params();
            let mut s = 0.8;
            let mut energy = 0.0;
            for &pb in &draws {
                s = step_soc(s, pb, &p);
                energy += pb * p.dt;
            }
            let expected = energy / (p.energy_kwh * 3600.0);
            prop_assert!(((0.8 - s) - expected).abs() <= 1e-12 * draws.len() as f64);
        }

        #[test]
        fn bounded_voltage_after_transients(pn in 0.0..22.0f64, s in 0.0..=1.0f64) {
            let p = default_params();
            let veq = v_equilibrium(pn, s, &p);
            let mut v = p.v_nom;
            for _ in 0..200 {
                v = step_voltage(v, veq, &p);
            }
            let lo = p.v_nom - p.k_v * 22.0 - p.k_s;
            prop_assert!(v >= lo - 1e-9 && v <= p.v_nom + 1e-9);
        }
    }
}
