//! Experiment layer: bias sweeps with regime classification, the
//! first-order endurance-deficit model, fallback-depth sweeps, the joint
//! (bias, shed fraction) heatmap with its two contours, and the load-step
//! calibration.
//!
//! Grid points are evaluated in parallel and returned in grid order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BenchmarkParams, ScenarioCase, Variant, HEADLINE_BIAS, HEADLINE_FALLBACK};
use crate::engine::{self, simulate};
use crate::error::{Error, Result};
use crate::metrics::MissionMetrics;
use crate::supervisor::soc_shed;

/// Effective bias floor of the deficit model.
pub const BIAS_FLOOR: f64 = 0.04;

/// Upper end of the bias sweep range.
pub const MAX_SWEEP_BIAS: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Stealth,
    Delay,
    FullBlind,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Stealth => "stealth",
            Regime::Delay => "delay",
            Regime::FullBlind => "full_blind",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSweepPoint {
    pub bias: f64,
    pub nominal: MissionMetrics,
    pub attacked: MissionMetrics,
    pub defended: MissionMetrics,
    pub regime: Regime,
}

/// `0, 0.02, ..., 0.60`.
pub fn default_bias_grid() -> Vec<f64> {
    (0..=30).map(|i| i as f64 * 0.02).collect()
}

/// `0.20, 0.25, ..., 1.00`.
pub fn default_fraction_grid() -> Vec<f64> {
    (0..=16).map(|i| 0.2 + i as f64 * 0.05).collect()
}

/// `0.2, 0.4, ..., 1.0`.
pub fn table_fraction_grid() -> Vec<f64> {
    (1..=5).map(|i| i as f64 * 0.2).collect()
}

fn check_grid(name: &str, grid: &[f64], lo: f64, hi: f64) -> Result<()> {
    let sorted = grid.windows(2).all(|w| w[0] < w[1]);
    let inside = grid.iter().all(|x| x.is_finite() && (lo..=hi).contains(x));
    if grid.is_empty() || !sorted || !inside {
        return Err(Error::Invalid(vec![crate::config::Violation {
            field: name.to_string(),
            rule: format!("non-empty, strictly increasing, within [{lo}, {hi}]"),
        }]));
    }
    Ok(())
}

fn metrics_of(case: &ScenarioCase, p: &BenchmarkParams) -> Result<MissionMetrics> {
    Ok(simulate(case, p)?.streaming)
}

/// Bias at which the SOC guard is fully blinded: `s_warn - s_crit`.
pub fn full_blind_threshold(p: &BenchmarkParams) -> f64 {
    p.soc_warn - p.soc_crit
}

/// Stealth when the Defended alarm never fired, full-blind at or above
/// `s_warn - s_crit`, delay otherwise.
pub fn classify_regime(bias: f64, defended: &MissionMetrics, p: &BenchmarkParams) -> Regime {
    if defended.time_to_detection_s.is_none() {
        Regime::Stealth
    } else if bias >= full_blind_threshold(p) - 1e-12 {
        Regime::FullBlind
    } else {
        Regime::Delay
    }
}

/// Runs Nominal, Attacked and Defended (headline fallback) at each bias.
/// Every case uses `seed`, so the zero-bias Attacked run equals Nominal.
pub fn sweep_bias(grid: &[f64], p: &BenchmarkParams, seed: u64) -> Result<Vec<BiasSweepPoint>> {
    check_grid("bias_grid", grid, 0.0, MAX_SWEEP_BIAS)?;
    let nominal = metrics_of(&ScenarioCase::nominal(seed), p)?;
    grid.par_iter()
        .map(|&bias| {
            let attacked = metrics_of(&ScenarioCase::attacked(Variant::Single, bias, seed), p)?;
            let defended = metrics_of(
                &ScenarioCase::defended(Variant::Single, bias, HEADLINE_FALLBACK, seed),
                p,
            )?;
            Ok(BiasSweepPoint {
                bias,
                regime: classify_regime(bias, &defended, p),
                nominal: nominal.clone(),
                attacked,
                defended,
            })
        })
        .collect()
}

/// Regime boundaries observed in a sweep: first delay and first full-blind
/// bias, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub first_delay_bias: Option<f64>,
    pub first_full_blind_bias: Option<f64>,
    /// Stealth, delay, full-blind appear in that order without interleaving.
    pub contiguous: bool,
}

pub fn regime_report(sweep: &[BiasSweepPoint]) -> RegimeReport {
    let rank = |r: Regime| match r {
        Regime::Stealth => 0,
        Regime::Delay => 1,
        Regime::FullBlind => 2,
    };
    RegimeReport {
        first_delay_bias: sweep
            .iter()
            .find(|x| x.regime == Regime::Delay)
            .map(|x| x.bias),
        first_full_blind_bias: sweep
            .iter()
            .find(|x| x.regime == Regime::FullBlind)
            .map(|x| x.bias),
        contiguous: sweep
            .windows(2)
            .all(|w| rank(w[0].regime) <= rank(w[1].regime)),
    }
}

/// First-order endurance-deficit model for the delay regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeficitModel {
    pub b0: f64,
    /// Sheddable power at the nominal soft-shed onset, kW.
    pub p_shed: f64,
    /// Mean battery draw over the nominal active mission, kW.
    pub pbat_avg: f64,
    pub energy_kwh: f64,
}

impl DeficitModel {
    /// Predicted endurance deficit in minutes; zero below the bias floor.
    pub fn predict_minutes(&self, bias: f64) -> f64 {
        deficit_predict(bias, self)
    }
}

/// `(b - b0) * P_shed * E / Pbat_avg^2`, hours converted to minutes.
pub fn deficit_predict(bias: f64, m: &DeficitModel) -> f64 {
    if bias < m.b0 {
        return 0.0;
    }
    let hours = (bias - m.b0) * m.p_shed * m.energy_kwh / (m.pbat_avg * m.pbat_avg);
    hours * 60.0
}

/// Extracts the deficit model from the Nominal run. Requires at least one
/// delay-regime point in `sweep`.
pub fn fit_deficit_model(
    sweep: &[BiasSweepPoint],
    p: &BenchmarkParams,
    seed: u64,
) -> Result<DeficitModel> {
    if !sweep.iter().any(|x| x.regime == Regime::Delay) {
        return Err(Error::Unfittable(
            "sweep has no delay-regime points".to_string(),
        ));
    }
    let trace = engine::run(&ScenarioCase::nominal(seed), p)?;
    let last = trace.last_active_row();
    if last == 0 {
        return Err(Error::Unfittable(
            "nominal run has no active steps".to_string(),
        ));
    }
    let pbat_avg = trace.p_bat[1..=last].iter().sum::<f64>() / last as f64;
    let onset = (0..trace.len())
        .find(|&k| soc_shed(trace.s_m[k], p) > 0.0)
        .ok_or_else(|| Error::Unfittable("nominal run never reaches soft shed".to_string()))?;
    Ok(DeficitModel {
        b0: BIAS_FLOOR,
        p_shed: trace.ph_req[onset],
        pbat_avg,
        energy_kwh: p.energy_kwh,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeficitCheck {
    pub bias: f64,
    pub predicted_min: f64,
    pub simulated_min: f64,
    pub abs_error_min: f64,
}

/// Prediction against the simulated Attacked deficit for every delay point.
pub fn validate_deficit(sweep: &[BiasSweepPoint], model: &DeficitModel) -> Vec<DeficitCheck> {
    sweep
        .iter()
        .filter(|x| x.regime == Regime::Delay)
        .map(|x| {
            let predicted = model.predict_minutes(x.bias);
            let simulated = x.nominal.endurance_min - x.attacked.endurance_min;
            DeficitCheck {
                bias: x.bias,
                predicted_min: predicted,
                simulated_min: simulated,
                abs_error_min: (predicted - simulated).abs(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub fraction: f64,
    pub defended: MissionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSweep {
    pub bias: f64,
    pub attacked: MissionMetrics,
    pub rows: Vec<DepthRow>,
}

impl DepthSweep {
    /// Smallest swept fraction whose Defended run completes the horizon.
    pub fn first_completing(&self, p: &BenchmarkParams) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.defended.completed(p))
            .map(|r| r.fraction)
    }
}

/// Defended metrics per post-alarm shed fraction at the headline bias.
pub fn sweep_depth(fractions: &[f64], p: &BenchmarkParams, seed: u64) -> Result<DepthSweep> {
    check_grid("fraction_grid", fractions, 0.0, 1.0)?;
    let attacked = metrics_of(
        &ScenarioCase::attacked(Variant::Single, HEADLINE_BIAS, seed),
        p,
    )?;
    let rows = fractions
        .par_iter()
        .map(|&fraction| {
            let c = ScenarioCase::defended(Variant::Single, HEADLINE_BIAS, fraction, seed);
            Ok(DepthRow {
                fraction,
                defended: metrics_of(&c, p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DepthSweep {
        bias: HEADLINE_BIAS,
        attacked,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub bias: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapResult {
    pub biases: Vec<f64>,
    pub fractions: Vec<f64>,
    /// `cells[i][j]`: Defended metrics at `biases[i]`, `fractions[j]`.
    pub cells: Vec<Vec<MissionMetrics>>,
    /// Attacked metrics per bias.
    pub attacked: Vec<MissionMetrics>,
    /// Defended endurance reaches the horizon.
    pub completion_boundary: Vec<ContourPoint>,
    /// Defended J_LOL equals the Attacked J_LOL at the same bias.
    pub parity_boundary: Vec<ContourPoint>,
}

/// Level crossings of a gridded field by linear interpolation along both
/// axes. A node counts as "inside" when `inside(value)` holds; each edge
/// joining an outside node to an inside node contributes one point. When the
/// inside node sits exactly on the level the point lands on it, i.e. on the
/// larger-depth side for a completion contour.
fn level_crossings(
    xs: &[f64],
    ys: &[f64],
    field: &[Vec<f64>],
    level: f64,
    below_is_outside: bool,
) -> Vec<ContourPoint> {
    let outside = |z: f64| {
        if below_is_outside {
            z < level
        } else {
            z >= level
        }
    };
    let lerp = |a: f64, b: f64, za: f64, zb: f64| {
        if (zb - za).abs() < f64::EPSILON {
            b
        } else {
            a + (b - a) * ((level - za) / (zb - za)).clamp(0.0, 1.0)
        }
    };
    let mut pts = Vec::new();
    for i in 0..xs.len() {
        for j in 0..ys.len() {
            let z = field[i][j];
            if j + 1 < ys.len() {
                let zn = field[i][j + 1];
                if outside(z) != outside(zn) {
                    pts.push(ContourPoint {
                        bias: xs[i],
                        fraction: lerp(ys[j], ys[j + 1], z, zn),
                    });
                }
            }
            if i + 1 < xs.len() {
                let zn = field[i + 1][j];
                if outside(z) != outside(zn) {
                    pts.push(ContourPoint {
                        bias: lerp(xs[i], xs[i + 1], z, zn),
                        fraction: ys[j],
                    });
                }
            }
        }
    }
    pts.sort_by(|a, b| {
        a.bias
            .total_cmp(&b.bias)
            .then(a.fraction.total_cmp(&b.fraction))
    });
    pts.dedup();
    pts
}

impl HeatmapResult {
    fn column(&self, bias: f64) -> Option<usize> {
        self.biases.iter().position(|b| (b - bias).abs() < 1e-9)
    }

    /// Fraction at which the completion contour crosses the given bias
    /// column (first crossing from below).
    pub fn completion_fraction_at(&self, bias: f64) -> Option<f64> {
        let i = self.column(bias)?;
        self.completion_boundary
            .iter()
            .filter(|c| (c.bias - self.biases[i]).abs() < 1e-12)
            .map(|c| c.fraction)
            .reduce(f64::min)
    }

    /// Fraction at which the parity contour crosses the given bias column.
    pub fn parity_fraction_at(&self, bias: f64) -> Option<f64> {
        let i = self.column(bias)?;
        self.parity_boundary
            .iter()
            .filter(|c| (c.bias - self.biases[i]).abs() < 1e-12)
            .map(|c| c.fraction)
            .reduce(f64::min)
    }

    /// Grid cell completes the mission and undercuts the Attacked J_LOL.
    pub fn inside_both(&self, bias: f64, fraction: f64, p: &BenchmarkParams) -> Option<bool> {
        let i = self.column(bias)?;
        let j = self
            .fractions
            .iter()
            .position(|f| (f - fraction).abs() < 1e-9)?;
        let cell = &self.cells[i][j];
        Some(cell.completed(p) && cell.j_lol < self.attacked[i].j_lol)
    }
}

/// Defended run on every (bias, fraction) cell plus contour extraction.
pub fn heatmap(
    biases: &[f64],
    fractions: &[f64],
    p: &BenchmarkParams,
    seed: u64,
) -> Result<HeatmapResult> {
    check_grid("bias_grid", biases, 0.0, MAX_SWEEP_BIAS)?;
    check_grid("fraction_grid", fractions, 0.0, 1.0)?;
    let attacked = biases
        .par_iter()
        .map(|&b| metrics_of(&ScenarioCase::attacked(Variant::Single, b, seed), p))
        .collect::<Result<Vec<_>>>()?;
    let flat = biases
        .par_iter()
        .flat_map(|&b| fractions.par_iter().map(move |&f| (b, f)))
        .map(|(b, f)| metrics_of(&ScenarioCase::defended(Variant::Single, b, f, seed), p))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<Vec<MissionMetrics>> =
        flat.chunks(fractions.len()).map(|c| c.to_vec()).collect();

    let horizon_min = p.horizon / 60.0;
    let endurance: Vec<Vec<f64>> = cells
        .iter()
        .map(|row| row.iter().map(|m| m.endurance_min).collect())
        .collect();
    let gap: Vec<Vec<f64>> = cells
        .iter()
        .zip(&attacked)
        .map(|(row, a)| row.iter().map(|m| m.j_lol - a.j_lol).collect())
        .collect();

    Ok(HeatmapResult {
        completion_boundary: level_crossings(biases, fractions, &endurance, horizon_min, true),
        parity_boundary: level_crossings(biases, fractions, &gap, 0.0, false),
        biases: biases.to_vec(),
        fractions: fractions.to_vec(),
        cells,
        attacked,
    })
}

/// Reference values the calibration steers toward.
pub mod targets {
    pub const NOMINAL_J_LOL: f64 = 0.021;
    pub const ATTACKED_ENDURANCE_MIN: f64 = 42.90;
    pub const ATTACKED_J_LOL: f64 = 0.053;
    pub const DEFENDED_J_LOL: f64 = 0.045;
    pub const DEPTH_02_ENDURANCE_MIN: f64 = 44.54;
    pub const DEPTH_10_J_LOL: f64 = 0.056;
    /// Admissible band for Nominal J_LOL after calibration.
    pub const NOMINAL_J_LOL_BAND: (f64, f64) = (0.015, 0.030);
    /// Admissible band for Attacked endurance, minutes.
    pub const ATTACKED_ENDURANCE_BAND: (f64, f64) = (41.4, 44.4);
    /// Search range for both load-step onsets, seconds.
    pub const STEP_RANGE: (f64, f64) = (0.0, 1800.0);
}

/// Headline metrics for one (tc_step, th_step) candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCandidate {
    pub tc_step: f64,
    pub th_step: f64,
    pub nominal: MissionMetrics,
    pub attacked: MissionMetrics,
    pub defended: MissionMetrics,
    pub depth_02: MissionMetrics,
    pub depth_04: MissionMetrics,
    pub depth_10: MissionMetrics,
}

impl CalibrationCandidate {
    /// Nominal completes with J_LOL inside the admissible band.
    pub fn admissible(&self, p: &BenchmarkParams) -> bool {
        let (lo, hi) = targets::NOMINAL_J_LOL_BAND;
        self.nominal.completed(p) && (lo..=hi).contains(&self.nominal.j_lol)
    }

    /// Pass/fail of each headline check, in a fixed order.
    pub fn checks(&self, p: &BenchmarkParams) -> [bool; 5] {
        let (elo, ehi) = targets::ATTACKED_ENDURANCE_BAND;
        let a = &self.attacked;
        [
            !a.completed(p) && (elo..=ehi).contains(&a.endurance_min) && a.crit_served_ratio < 1.0,
            a.j_lol > self.defended.j_lol && self.defended.j_lol > self.nominal.j_lol,
            self.defended.completed(p) && self.defended.crit_served_ratio == 1.0,
            !self.depth_02.completed(p) && self.depth_04.completed(p),
            self.depth_10.j_lol > a.j_lol,
        ]
    }

    /// Weighted count of passed checks. The depth threshold counts twice:
    /// both the depth table and the heatmap completion contour rest on it.
    pub fn score(&self, p: &BenchmarkParams) -> usize {
        const WEIGHTS: [usize; 5] = [1, 1, 1, 2, 1];
        self.checks(p)
            .iter()
            .zip(WEIGHTS)
            .filter(|(&c, _)| c)
            .map(|(_, w)| w)
            .sum()
    }

    /// Normalized squared distance to the reference values.
    pub fn distance(&self) -> f64 {
        use targets::*;
        let terms = [
            (self.attacked.endurance_min - ATTACKED_ENDURANCE_MIN) / 1.5,
            (self.attacked.j_lol - ATTACKED_J_LOL) / 0.01,
            (self.nominal.j_lol - NOMINAL_J_LOL) / 0.01,
            (self.defended.j_lol - DEFENDED_J_LOL) / 0.01,
            (self.depth_02.endurance_min - DEPTH_02_ENDURANCE_MIN) / 1.5,
            (self.depth_10.j_lol - DEPTH_10_J_LOL) / 0.01,
        ];
        terms.iter().map(|x| x * x).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub resolution_s: f64,
    pub evaluated: usize,
    pub admissible: usize,
    pub best: Option<CalibrationCandidate>,
    pub best_score: usize,
}

pub fn evaluate_steps(
    tc_step: f64,
    th_step: f64,
    base: &BenchmarkParams,
    seed: u64,
) -> Result<CalibrationCandidate> {
    let p = BenchmarkParams {
        tc_step,
        th_step,
        ..*base
    };
    let defended = |f: f64| {
        metrics_of(
            &ScenarioCase::defended(Variant::Single, HEADLINE_BIAS, f, seed),
            &p,
        )
    };
    Ok(CalibrationCandidate {
        tc_step,
        th_step,
        nominal: metrics_of(&ScenarioCase::nominal(seed), &p)?,
        attacked: metrics_of(
            &ScenarioCase::attacked(Variant::Single, HEADLINE_BIAS, seed),
            &p,
        )?,
        defended: defended(HEADLINE_FALLBACK)?,
        depth_02: defended(0.2)?,
        depth_04: defended(0.4)?,
        depth_10: defended(1.0)?,
    })
}

/// Grid search over both load-step onsets. Only candidates whose Nominal run
/// completes inside the J_LOL band are admissible; among those the one
/// passing the most headline checks wins, ties going to the smallest
/// distance from the reference values, then to the earliest grid position.
pub fn calibrate_steps(
    base: &BenchmarkParams,
    resolution_s: f64,
    seed: u64,
) -> Result<CalibrationReport> {
    let (lo, hi) = targets::STEP_RANGE;
    let n = ((hi - lo) / resolution_s).floor() as usize;
    let axis: Vec<f64> = (0..=n).map(|i| lo + i as f64 * resolution_s).collect();
    let grid: Vec<(f64, f64)> = axis
        .iter()
        .flat_map(|&tc| axis.iter().map(move |&th| (tc, th)))
        .collect();
    let candidates = grid
        .par_iter()
        .map(|&(tc, th)| evaluate_steps(tc, th, base, seed))
        .collect::<Result<Vec<_>>>()?;

    let admissible: Vec<&CalibrationCandidate> =
        candidates.iter().filter(|c| c.admissible(base)).collect();
    let best = admissible.iter().copied().reduce(|best, c| {
        let (sb, sc) = (best.score(base), c.score(base));
        if sc > sb || (sc == sb && c.distance() < best.distance()) {
            c
        } else {
            best
        }
    });
    Ok(CalibrationReport {
        resolution_s,
        evaluated: candidates.len(),
        admissible: admissible.len(),
        best_score: best.map_or(0, |b| b.score(base)),
        best: best.cloned(),
    })
}
