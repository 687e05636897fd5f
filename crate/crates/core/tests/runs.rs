//! Whole-run properties over random scenarios.

use proptest::prelude::*;
use silentwatch::config::{
    default_params, AttackSpec, BenchmarkParams, CaseKind, ScenarioCase, Variant,
};
use silentwatch::io::trace_digest;
use silentwatch::{run, simulate, Trace};

fn any_case() -> impl Strategy<Value = ScenarioCase> {
    (
        0u8..3,
        any::<bool>(),
        0.0..=0.6f64,
        0.0..=1.0f64,
        any::<u64>(),
    )
        .prop_map(|(kind, multi, bias, fraction, seed)| {
            let variant = if multi {
                Variant::Multi
            } else {
                Variant::Single
            };
            match kind {
                0 => ScenarioCase::nominal(seed),
                1 => ScenarioCase::attacked(variant, bias, seed),
                _ => ScenarioCase::defended(variant, bias, fraction, seed),
            }
        })
}

fn check_trace(tr: &Trace, case: &ScenarioCase, p: &BenchmarkParams) -> Result<(), TestCaseError> {
    prop_assert_eq!(tr.len(), p.steps() + 1);
    let last = tr.last_active_row();
    for k in 1..tr.len() {
        prop_assert!((tr.t[k] - k as f64 * p.dt).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&tr.s[k]));
        prop_assert!((0.0..=1.0).contains(&tr.s_m[k]));
        prop_assert!((0.0..=1.0).contains(&tr.u_shed[k]));
        prop_assert!(tr.pc_srv[k] <= tr.pc_req[k] && tr.ph_srv[k] <= tr.ph_req[k]);
        // no source, so the pack only discharges
        prop_assert!(tr.s[k] <= tr.s[k - 1]);
        prop_assert!(!tr.alarm_latched[k - 1] || tr.alarm_latched[k]);
        if k > last {
            prop_assert_eq!(tr.s[k], tr.s[last]);
            prop_assert_eq!(tr.v[k], tr.v[last]);
            prop_assert_eq!(tr.pc_srv[k] + tr.ph_srv[k], 0.0);
        }
        let in_window = case.attack.as_ref().is_some_and(|a| {
            a.windows
                .iter()
                .any(|&(t0, t1)| tr.t[k] >= t0 && tr.t[k] < t1)
        });
        if k <= last {
            prop_assert_eq!(tr.attack_active[k], in_window);
        }
    }
    if let (Some(t_alarm), Some(onset)) = (
        tr.t_alarm(),
        case.attack.as_ref().and_then(AttackSpec::onset),
    ) {
        // a clean detector cannot confirm an attack before it has lasted t_confirm
        if p.sigma_soc == 0.0 {
            prop_assert!(t_alarm >= onset + p.t_confirm - 1e-9);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn run_invariants(case in any_case()) {
        let p = default_params();
        let out = simulate(&case, &p).unwrap();
        check_trace(&out.trace, &case, &p)?;
        let m = &out.streaming;
        prop_assert!((0.0..=1.0).contains(&m.j_lol));
        prop_assert!((0.0..=1.0).contains(&m.crit_served_ratio));
        prop_assert!(m.endurance_min <= p.horizon / 60.0);
        prop_assert!(m.unsafe_duration_s >= 0.0);
        if case.kind != CaseKind::Defended {
            prop_assert!(m.time_to_detection_s.is_none());
        }
    }

    #[test]
    fn noiseless_runs_ignore_seed(case in any_case(), other in any::<u64>()) {
        let p = BenchmarkParams { sigma_soc: 0.0, sigma_pbat_rel: 0.0, ..default_params() };
        let a = run(&case, &p).unwrap();
        let b = run(&ScenarioCase { seed: other, ..case.clone() }, &p).unwrap();
        check_trace(&a, &case, &p)?;
        prop_assert_eq!(trace_digest(&a), trace_digest(&b));
    }
}

#[test]
fn zero_bias_attack_equals_nominal() {
    let p = default_params();
    let nominal = run(&ScenarioCase::nominal(9), &p).unwrap();
    let attacked = run(&ScenarioCase::attacked(Variant::Single, 0.0, 9), &p).unwrap();
    assert_eq!(nominal.s, attacked.s);
    assert_eq!(nominal.s_m, attacked.s_m);
    assert_eq!(nominal.u_shed, attacked.u_shed);
}

#[test]
fn defended_tracks_attacked_until_alarm() {
    let p = default_params();
    let att = run(&ScenarioCase::attacked(Variant::Single, 0.5, 3), &p).unwrap();
    let def = run(&ScenarioCase::defended(Variant::Single, 0.5, 0.8, 3), &p).unwrap();
    let ka = def.alarm_latched.iter().position(|&a| a).unwrap();
    // the supervisor sees the alarm one step later
    assert_eq!(att.s[..=ka], def.s[..=ka]);
    assert_eq!(att.u_shed[..=ka], def.u_shed[..=ka]);
    assert!(def.u_shed[ka + 1] >= 0.8);
    assert!(def.s[ka + 1] > att.s[ka + 1]);
    assert_eq!(att.alarm_latched, def.alarm_latched[..att.len()]);
}

#[test]
fn seeds_change_noisy_runs() {
    let p = default_params();
    let a = run(&ScenarioCase::nominal(1), &p).unwrap();
    let b = run(&ScenarioCase::nominal(2), &p).unwrap();
    assert_ne!(a.s_m, b.s_m);
    assert_eq!(a.pc_req, b.pc_req);
}

#[test]
fn deeper_fallback_never_sheds_less() {
    let p = default_params();
    let mut prev = None;
    for f in [0.2, 0.4, 0.6, 0.8, 1.0] {
        let m = simulate(&ScenarioCase::defended(Variant::Single, 0.5, f, 42), &p)
            .unwrap()
            .streaming;
        if let Some((pf, pj)) = prev {
            if m.completed(&p) {
                assert!(m.j_lol >= pj, "J_LOL({f}) < J_LOL({pf})");
            }
        }
        if m.completed(&p) {
            prev = Some((f, m.j_lol));
        }
    }
}
