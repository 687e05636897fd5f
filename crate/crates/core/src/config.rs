//! Canonical benchmark parameters, attack windows and the reference scenarios.
//!
//! Units are fixed throughout the crate: energy in kWh, power in kW, time in
//! seconds, SOC as a fraction of usable capacity. The SOC rate conversion
//! uses `E * 3600` (kWh to kW·s).

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Master seed shared by every reference scenario.
pub const DEFAULT_SEED: u64 = 42;

/// Headline spoofing bias (SOC fraction).
pub const HEADLINE_BIAS: f64 = 0.50;

/// Nominal post-alarm shed fraction.
pub const HEADLINE_FALLBACK: f64 = 0.80;

/// Single attack window, seconds.
pub const SINGLE_WINDOW: [(f64, f64); 1] = [(600.0, 2400.0)];

/// Two disjoint attack windows, seconds.
pub const MULTI_WINDOWS: [(f64, f64); 2] = [(600.0, 1500.0), (2100.0, 2700.0)];

/// Full benchmark parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkParams {
    /// Usable battery energy `E`, kWh.
    pub energy_kwh: f64,
    /// Initial SOC.
    pub soc_init: f64,
    /// Supervisor SOC warning threshold.
    pub soc_warn: f64,
    /// Mission-fail SOC.
    pub soc_crit: f64,

    pub v_nom: f64,
    /// Soft-shed bus threshold.
    pub v_warn: f64,
    /// Unsafe-band entry.
    pub v_min: f64,
    /// Mission-fail voltage.
    pub v_fail: f64,
    /// Bus first-order time constant, s.
    pub tau_v: f64,
    /// Droop slope, V/kW.
    pub k_v: f64,
    /// Low-SOC droop weight, V.
    pub k_s: f64,
    /// SOC reference for the droop term.
    pub soc_ref: f64,

    pub pc_base: f64,
    pub pc_step: f64,
    pub ph_base: f64,
    pub ph_step: f64,
    /// Onset of the critical demand step, s.
    pub tc_step: f64,
    /// Onset of the sheddable demand step, s.
    pub th_step: f64,

    /// Detector residual threshold (SOC fraction).
    pub tau_d: f64,
    /// Detector confirmation window, s.
    pub t_confirm: f64,
    /// SOC sensor noise standard deviation.
    pub sigma_soc: f64,
    /// Relative battery-power measurement noise.
    pub sigma_pbat_rel: f64,

    /// Loss-of-load weight on critical demand.
    pub w_crit: f64,
    /// Loss-of-load weight on sheddable demand.
    pub w_shed: f64,

    /// Mission horizon `T`, s.
    pub horizon: f64,
    /// Integrator step, s.
    pub dt: f64,
    /// Auxiliary source power, kW.
    pub p_source: f64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        default_params()
    }
}

/// Published parameter set plus the calibrated load-step onsets.
pub fn default_params() -> BenchmarkParams {
    BenchmarkParams {
        energy_kwh: 24.0,
        soc_init: 0.80,
        soc_warn: 0.65,
        soc_crit: 0.20,
        v_nom: 650.0,
        v_warn: 590.0,
        v_min: 585.0,
        v_fail: 570.0,
        tau_v: 0.20,
        k_v: 2.0,
        k_s: 35.0,
        soc_ref: 1.0,
        pc_base: 10.0,
        pc_step: 2.0,
        ph_base: 6.0,
        ph_step: 4.0,
        tc_step: CALIBRATED_TC_STEP,
        th_step: CALIBRATED_TH_STEP,
        tau_d: 0.08,
        t_confirm: 5.0,
        sigma_soc: 0.015,
        sigma_pbat_rel: 0.02,
        w_crit: 10.0,
        w_shed: 1.0,
        horizon: 2700.0,
        dt: 0.10,
        p_source: 0.0,
    }
}

/// Critical step onset chosen by `analysis::calibrate_steps` (see README).
pub const CALIBRATED_TC_STEP: f64 = 0.0;
/// Sheddable step onset chosen by `analysis::calibrate_steps` (see README).
pub const CALIBRATED_TH_STEP: f64 = 250.0;

impl BenchmarkParams {
    /// Number of integrator steps over the horizon.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Confirmation window expressed in steps.
    pub fn confirm_steps(&self) -> usize {
        (self.t_confirm / self.dt).round() as usize
    }

    /// Converts kW drawn over one step to an SOC decrement.
    pub fn soc_per_kw_step(&self) -> f64 {
        self.dt / (self.energy_kwh * 3600.0)
    }

    /// Reads a JSON parameter file; absent fields take their defaults.
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        validate(self)
    }
}

/// A broken parameter invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn check(out: &mut Vec<Violation>, ok: bool, field: &str, rule: &str) {
    if !ok {
        out.push(Violation {
            field: field.to_string(),
            rule: rule.to_string(),
        });
    }
}

/// Returns every violated invariant; `Ok(())` iff there are none.
pub fn validate(p: &BenchmarkParams) -> std::result::Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    let named = [
        ("energy_kwh", p.energy_kwh),
        ("soc_init", p.soc_init),
        ("soc_warn", p.soc_warn),
        ("soc_crit", p.soc_crit),
        ("v_nom", p.v_nom),
        ("v_warn", p.v_warn),
        ("v_min", p.v_min),
        ("v_fail", p.v_fail),
        ("tau_v", p.tau_v),
        ("k_v", p.k_v),
        ("k_s", p.k_s),
        ("soc_ref", p.soc_ref),
        ("pc_base", p.pc_base),
        ("pc_step", p.pc_step),
        ("ph_base", p.ph_base),
        ("ph_step", p.ph_step),
        ("tc_step", p.tc_step),
        ("th_step", p.th_step),
        ("tau_d", p.tau_d),
        ("t_confirm", p.t_confirm),
        ("sigma_soc", p.sigma_soc),
        ("sigma_pbat_rel", p.sigma_pbat_rel),
        ("w_crit", p.w_crit),
        ("w_shed", p.w_shed),
        ("horizon", p.horizon),
        ("dt", p.dt),
        ("p_source", p.p_source),
    ];
    for (name, x) in named {
        check(&mut v, x.is_finite(), name, "finite");
    }

    check(&mut v, p.soc_crit > 0.0, "soc_crit", "0 < s_crit");
    check(
        &mut v,
        p.soc_crit < p.soc_warn,
        "soc_crit",
        "s_crit < s_warn",
    );
    check(&mut v, p.soc_warn < p.soc_init, "soc_warn", "s_warn < s0");
    check(&mut v, p.soc_init <= 1.0, "soc_init", "s0 <= 1");

    check(&mut v, p.v_fail < p.v_min, "v_fail", "V_fail < V_min");
    check(&mut v, p.v_min < p.v_warn, "v_min", "V_min < V_warn");
    check(&mut v, p.v_warn < p.v_nom, "v_warn", "V_warn < V_nom");

    check(&mut v, p.energy_kwh > 0.0, "energy_kwh", "E > 0");
    check(&mut v, p.tau_v > 0.0, "tau_v", "tau_v > 0");
    check(&mut v, p.dt > 0.0, "dt", "dt > 0");
    check(&mut v, p.horizon > 0.0, "horizon", "T > 0");
    check(&mut v, p.dt < p.tau_v, "dt", "dt < tau_v");
    check(&mut v, p.soc_ref > 0.0, "soc_ref", "s_ref > 0");
    for (name, x) in [
        ("pc_base", p.pc_base),
        ("pc_step", p.pc_step),
        ("ph_base", p.ph_base),
        ("ph_step", p.ph_step),
    ] {
        check(&mut v, x > 0.0, name, "power > 0");
    }
    check(&mut v, p.p_source >= 0.0, "p_source", "p_s >= 0");
    check(&mut v, p.k_v >= 0.0, "k_v", "k_v >= 0");
    check(&mut v, p.k_s >= 0.0, "k_s", "k_s >= 0");
    check(&mut v, p.tau_d > 0.0, "tau_d", "tau_d > 0");
    check(&mut v, p.t_confirm >= 0.0, "t_confirm", "t_confirm >= 0");
    check(&mut v, p.sigma_soc >= 0.0, "sigma_soc", "sigma_sm >= 0");
    check(
        &mut v,
        p.sigma_pbat_rel >= 0.0,
        "sigma_pbat_rel",
        "sigma_pbat_rel >= 0",
    );
    check(&mut v, p.w_shed > 0.0, "w_shed", "w_h > 0");
    check(&mut v, p.w_crit > p.w_shed, "w_crit", "w_c > w_h");
    if p.dt > 0.0 && p.horizon > 0.0 {
        let n = p.horizon / p.dt;
        check(
            &mut v,
            (n - n.round()).abs() < 1e-6,
            "horizon",
            "T is a whole number of steps",
        );
    }
    for (name, x) in [("tc_step", p.tc_step), ("th_step", p.th_step)] {
        check(&mut v, x >= 0.0, name, "step onset >= 0");
    }

    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Spoofing bias and the windows during which it is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub bias: f64,
    /// Half-open `[start, end)` windows in seconds, sorted and disjoint.
    pub windows: Vec<(f64, f64)>,
}

impl AttackSpec {
    pub fn single(bias: f64) -> Self {
        Self {
            bias,
            windows: SINGLE_WINDOW.to_vec(),
        }
    }

    pub fn multi(bias: f64) -> Self {
        Self {
            bias,
            windows: MULTI_WINDOWS.to_vec(),
        }
    }

    pub fn for_variant(variant: Variant, bias: f64) -> Self {
        match variant {
            Variant::Single => Self::single(bias),
            Variant::Multi => Self::multi(bias),
        }
    }

    /// Earliest window start.
    pub fn onset(&self) -> Option<f64> {
        self.windows.first().map(|w| w.0)
    }

    /// Sum of window lengths, s.
    pub fn total_duration(&self) -> f64 {
        self.windows.iter().map(|(a, b)| b - a).sum()
    }

    pub fn validate(&self, horizon: f64) -> Vec<Violation> {
        let mut v = Vec::new();
        check(
            &mut v,
            self.bias.is_finite() && self.bias >= 0.0,
            "attack.bias",
            "bias >= 0",
        );
        check(
            &mut v,
            !self.windows.is_empty(),
            "attack.windows",
            "at least one window",
        );
        let mut prev_end = f64::NEG_INFINITY;
        for &(a, b) in &self.windows {
            check(&mut v, a < b, "attack.windows", "start < end");
            check(
                &mut v,
                a >= 0.0 && b <= horizon,
                "attack.windows",
                "window within [0, T]",
            );
            check(
                &mut v,
                a >= prev_end,
                "attack.windows",
                "windows sorted and disjoint",
            );
            prev_end = b;
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Nominal,
    Attacked,
    Defended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Single,
    Multi,
}

/// One benchmark case: which paths are live, the attack, and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCase {
    pub kind: CaseKind,
    pub variant: Variant,
    pub attack: Option<AttackSpec>,
    /// Post-alarm shed fraction; consumed only by `Defended`.
    pub fallback_fraction: f64,
    pub seed: u64,
}

impl ScenarioCase {
    pub fn nominal(seed: u64) -> Self {
        Self {
            kind: CaseKind::Nominal,
            variant: Variant::Single,
            attack: None,
            fallback_fraction: 0.0,
            seed,
        }
    }

    pub fn attacked(variant: Variant, bias: f64, seed: u64) -> Self {
        Self {
            kind: CaseKind::Attacked,
            variant,
            attack: Some(AttackSpec::for_variant(variant, bias)),
            fallback_fraction: 0.0,
            seed,
        }
    }

    pub fn defended(variant: Variant, bias: f64, fallback_fraction: f64, seed: u64) -> Self {
        Self {
            kind: CaseKind::Defended,
            variant,
            attack: Some(AttackSpec::for_variant(variant, bias)),
            fallback_fraction,
            seed,
        }
    }

    /// Stable identifier, e.g. `attacked-multi`.
    pub fn name(&self) -> String {
        let kind = match self.kind {
            CaseKind::Nominal => "nominal",
            CaseKind::Attacked => "attacked",
            CaseKind::Defended => "defended",
        };
        match (self.kind, self.variant) {
            (CaseKind::Nominal, _) | (_, Variant::Single) => kind.to_string(),
            (_, Variant::Multi) => format!("{kind}-multi"),
        }
    }

    pub fn detector_enabled(&self) -> bool {
        // the detector runs in every case; only Defended consumes the alarm
        true
    }

    pub fn fallback_enabled(&self) -> bool {
        self.kind == CaseKind::Defended
    }

    pub fn validate(&self, params: &BenchmarkParams) -> Vec<Violation> {
        let mut v = Vec::new();
        match (&self.kind, &self.attack) {
            (CaseKind::Nominal, Some(_)) => check(&mut v, false, "attack", "Nominal has no attack"),
            (CaseKind::Attacked | CaseKind::Defended, None) => check(
                &mut v,
                false,
                "attack",
                "Attacked/Defended require an attack",
            ),
            _ => {}
        }
        if let Some(a) = &self.attack {
            v.extend(a.validate(params.horizon));
        }
        check(
            &mut v,
            (0.0..=1.0).contains(&self.fallback_fraction),
            "fallback_fraction",
            "fallback_fraction in [0, 1]",
        );
        v
    }
}

/// The five regression scenarios: nominal, attacked, defended,
/// attacked-multi, defended-multi.
pub fn reference_scenarios(_params: &BenchmarkParams) -> Vec<ScenarioCase> {
    let seed = DEFAULT_SEED;
    vec![
        ScenarioCase::nominal(seed),
        ScenarioCase::attacked(Variant::Single, HEADLINE_BIAS, seed),
        ScenarioCase::defended(Variant::Single, HEADLINE_BIAS, HEADLINE_FALLBACK, seed),
        ScenarioCase::attacked(Variant::Multi, HEADLINE_BIAS, seed),
        ScenarioCase::defended(Variant::Multi, HEADLINE_BIAS, HEADLINE_FALLBACK, seed),
    ]
}

/// Looks up a reference scenario by name (`nominal`, `defended-multi`, ...).
pub fn scenario_by_name(params: &BenchmarkParams, name: &str) -> Option<ScenarioCase> {
    reference_scenarios(params)
        .into_iter()
        .find(|c| c.name() == name)
}

/// Scenario section of a config file. Everything is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: CaseKind,
    pub variant: Variant,
    pub bias: f64,
    /// Overrides the variant's windows when present.
    pub windows: Option<Vec<(f64, f64)>>,
    pub fallback_fraction: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: CaseKind::Defended,
            variant: Variant::Single,
            bias: HEADLINE_BIAS,
            windows: None,
            fallback_fraction: HEADLINE_FALLBACK,
            seed: DEFAULT_SEED,
        }
    }
}

impl ScenarioConfig {
    pub fn to_case(&self) -> ScenarioCase {
        let attack = match self.kind {
            CaseKind::Nominal => None,
            _ => {
                let mut a = AttackSpec::for_variant(self.variant, self.bias);
                if let Some(w) = &self.windows {
                    a.windows = w.clone();
                }
                Some(a)
            }
        };
        ScenarioCase {
            kind: self.kind,
            variant: self.variant,
            attack,
            fallback_fraction: if self.kind == CaseKind::Defended {
                self.fallback_fraction
            } else {
                0.0
            },
            seed: self.seed,
        }
    }
}

/// Top-level config file: `{ "params": {...}, "scenario": {...} }`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub params: BenchmarkParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioConfig>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Validates params and, if present, the scenario.
    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let mut v = match validate(&self.params) {
            Ok(()) => Vec::new(),
            Err(v) => v,
        };
        if let Some(s) = &self.scenario {
            v.extend(s.to_case().validate(&self.params));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_benchmark_values() {
        let p = default_params();
        assert_eq!(p.energy_kwh, 24.0);
        assert_eq!(p.horizon, 2700.0);
        assert_eq!(p.dt, 0.1);
        assert_eq!(p.tau_d, 0.08);
        assert_eq!(p.t_confirm, 5.0);
        assert_eq!(p.soc_init, 0.80);
        assert_eq!((p.soc_warn, p.soc_crit), (0.65, 0.20));
        assert_eq!(
            (p.v_nom, p.v_warn, p.v_min, p.v_fail),
            (650.0, 590.0, 585.0, 570.0)
        );
        assert_eq!((p.tau_v, p.k_v, p.k_s, p.soc_ref), (0.2, 2.0, 35.0, 1.0));
        assert_eq!(
            (p.pc_base, p.pc_step, p.ph_base, p.ph_step),
            (10.0, 2.0, 6.0, 4.0)
        );
        assert_eq!((p.sigma_soc, p.sigma_pbat_rel), (0.015, 0.02));
        assert_eq!((p.w_crit, p.w_shed, p.p_source), (10.0, 1.0, 0.0));
        assert_eq!(p.steps(), 27_000);
        assert_eq!(p.confirm_steps(), 50);
    }

    #[test]
    fn defaults_valid_and_idempotent() {
        assert_eq!(validate(&default_params()), Ok(()));
        assert_eq!(default_params(), default_params());
    }

    #[test]
    fn voltage_ordering_violation_is_named() {
        let p = BenchmarkParams {
            v_fail: 600.0,
            ..default_params()
        };
        let errs = validate(&p).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| e.rule == "V_fail < V_min" && e.field == "v_fail"));
    }

    #[test]
    fn step_stability_violation_is_named() {
        let p = BenchmarkParams {
            dt: 0.5,
            tau_v: 0.2,
            ..default_params()
        };
        let errs = validate(&p).unwrap_err();
        assert!(errs.iter().any(|e| e.rule == "dt < tau_v"));
    }

    #[test]
    fn reports_every_violation() {
        let p = BenchmarkParams {
            soc_crit: 0.7,
            w_crit: 0.5,
            sigma_soc: -1.0,
            ..default_params()
        };
        let errs = validate(&p).unwrap_err();
        let rules: Vec<_> = errs.iter().map(|e| e.rule.as_str()).collect();
        assert!(rules.contains(&"s_crit < s_warn"));
        assert!(rules.contains(&"w_c > w_h"));
        assert!(rules.contains(&"sigma_sm >= 0"));
    }

    #[test]
    fn reference_scenarios_layout() {
        let p = default_params();
        let cases = reference_scenarios(&p);
        assert_eq!(cases.len(), 5);
        let names: Vec<_> = cases.iter().map(|c| c.name()).collect();
        assert_eq!(
            names,
            [
                "nominal",
                "attacked",
                "defended",
                "attacked-multi",
                "defended-multi"
            ]
        );
        assert!(cases[0].attack.is_none());
        assert_eq!(
            cases[1].attack.as_ref().unwrap().windows,
            vec![(600.0, 2400.0)]
        );
        assert_eq!(cases[1].attack.as_ref().unwrap().bias, 0.5);
        assert_eq!(cases[2].fallback_fraction, 0.8);
        assert_eq!(
            cases[4].attack.as_ref().unwrap().windows,
            vec![(600.0, 1500.0), (2100.0, 2700.0)]
        );
        for c in &cases {
            assert!(c.validate(&p).is_empty(), "{} invalid", c.name());
        }
    }

    #[test]
    fn window_totals() {
        assert_eq!(AttackSpec::single(0.5).total_duration(), 1800.0);
        assert_eq!(AttackSpec::multi(0.5).total_duration(), 1500.0);
    }

    #[test]
    fn overlapping_windows_rejected() {
        let a = AttackSpec {
            bias: 0.1,
            windows: vec![(600.0, 1600.0), (1500.0, 2000.0)],
        };
        assert!(!a.validate(2700.0).is_empty());
        let neg = AttackSpec {
            bias: -0.1,
            windows: vec![(600.0, 900.0)],
        };
        assert!(!neg.validate(2700.0).is_empty());
    }

    #[test]
    fn config_fields_optional() {
        let c: ConfigFile = serde_json::from_str("{}").unwrap();
        assert_eq!(c.params, default_params());
        assert!(c.scenario.is_none());
        let c: ConfigFile =
            serde_json::from_str(r#"{"params": {"tau_d": 0.1}, "scenario": {"kind": "nominal"}}"#)
                .unwrap();
        assert_eq!(c.params.tau_d, 0.1);
        assert_eq!(c.params.energy_kwh, 24.0);
        assert!(c.scenario.unwrap().to_case().attack.is_none());
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(BenchmarkParams::from_json_str(r#"{"tau_dd": 1}"#).is_err());
    }

    #[test]
    fn params_json_roundtrip() {
        let p = BenchmarkParams {
            tc_step: 1234.5,
            sigma_soc: 0.1 + 0.2,
            ..default_params()
        };
        let back = BenchmarkParams::from_json_str(&p.to_json_string()).unwrap();
        assert_eq!(back, p);
    }
}
