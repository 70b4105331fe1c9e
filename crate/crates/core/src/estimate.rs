//! Conditional DiD by saturated stratification on binary covariates.
//!
//! The estimate for group g at period t is the treated-group mean of
//! ΔY = Y_t - Y_{g-1} minus the control mean of ΔY within each covariate
//! stratum, averaged over the treated strata distribution. Standard errors
//! come from the influence function of that estimator, or from a Poisson
//! bootstrap over units.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::adjust::{x_id, Control};
use crate::error::{Error, Result};
use crate::simulate::{Panel, NEVER};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Strategy {
    NoCovariates,
    /// X_0..X_g
    PreTreatment,
    /// X_0..X_{max(g-1, t)}
    PreOutcome,
    /// {X_{g-1}, X_t}
    TwoPoint,
    FullSequence,
    Custom(Vec<u32>),
}

impl Strategy {
    pub const NAMED: [Strategy; 5] = [
        Strategy::NoCovariates,
        Strategy::PreTreatment,
        Strategy::PreOutcome,
        Strategy::TwoPoint,
        Strategy::FullSequence,
    ];

    /// Covariate periods conditioned on for target (g, t).
    pub fn periods(&self, g: u32, t: u32, periods: u32) -> Vec<u32> {
        let mut v: Vec<u32> = match self {
            Strategy::NoCovariates => Vec::new(),
            Strategy::PreTreatment => (0..=g).collect(),
            Strategy::PreOutcome => (0..=(g - 1).max(t)).collect(),
            Strategy::TwoPoint => vec![g - 1, t],
            Strategy::FullSequence => (0..periods).collect(),
            Strategy::Custom(p) => p.clone(),
        };
        v.retain(|&s| s < periods);
        v.sort_unstable();
        v.dedup();
        v
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => Strategy::NoCovariates,
            "pre-treatment" => Strategy::PreTreatment,
            "pre-outcome" => Strategy::PreOutcome,
            "two-point" => Strategy::TwoPoint,
            "full" => Strategy::FullSequence,
            _ => {
                let list = s.strip_prefix("custom:").ok_or_else(|| {
                    Error::Config(format!(
                        "strategy must be none|pre-treatment|pre-outcome|two-point|full|custom:<t,...>, got `{s}`"
                    ))
                })?;
                let p = list
                    .split(',')
                    .filter(|v| !v.is_empty())
                    .map(|v| v.trim().parse::<u32>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Config(format!("bad period list `{list}`")))?;
                Strategy::Custom(p)
            }
        })
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::NoCovariates => write!(f, "none"),
            Strategy::PreTreatment => write!(f, "pre-treatment"),
            Strategy::PreOutcome => write!(f, "pre-outcome"),
            Strategy::TwoPoint => write!(f, "two-point"),
            Strategy::FullSequence => write!(f, "full"),
            Strategy::Custom(p) => {
                let v: Vec<String> = p.iter().map(u32::to_string).collect();
                write!(f, "custom:{}", v.join(","))
            }
        }
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeMethod {
    Influence,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimateOptions {
    /// Bootstrap replicates; 0 selects the influence-function SE.
    pub bootstrap: usize,
    pub seed: u64,
    /// Error on treated strata without controls instead of dropping them.
    pub strict: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions { bootstrap: 0, seed: 0, strict: false }
    }
}

/// Role of a unit in one contrast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Out,
    Treated,
    Control,
}

/// Stratified treated-minus-control contrast with its influence function.
#[derive(Debug, Clone, PartialEq)]
pub struct Contrast {
    pub estimate: f64,
    pub std_error: f64,
    pub n_treated: usize,
    pub n_control: usize,
    pub strata: usize,
    pub dropped_strata: usize,
    /// Per-unit influence, scaled so that the variance is its sum of squares.
    pub influence: Vec<f64>,
}

struct Cells {
    id: Vec<u32>,
    n1: Vec<f64>,
    s1: Vec<f64>,
    n0: Vec<f64>,
    s0: Vec<f64>,
}

fn dense_strata(key: &[u64], arm: &[Arm]) -> (Vec<u32>, usize) {
    let mut map: HashMap<u64, u32> = HashMap::new();
    let id = key
        .iter()
        .zip(arm)
        .map(|(&k, &a)| {
            if a == Arm::Out {
                return u32::MAX;
            }
            let next = map.len() as u32;
            *map.entry(k).or_insert(next)
        })
        .collect();
    (id, map.len())
}

fn accumulate(cells: &mut Cells, y: &[f64], arm: &[Arm], w: Option<&[f64]>) {
    cells.n1.iter_mut().chain(cells.s1.iter_mut()).chain(cells.n0.iter_mut()).chain(cells.s0.iter_mut()).for_each(|v| *v = 0.0);
    for i in 0..y.len() {
        let z = cells.id[i] as usize;
        let wi = w.map_or(1.0, |w| w[i]);
        match arm[i] {
            Arm::Treated => {
                cells.n1[z] += wi;
                cells.s1[z] += wi * y[i];
            }
            Arm::Control => {
                cells.n0[z] += wi;
                cells.s0[z] += wi * y[i];
            }
            Arm::Out => {}
        }
    }
}

/// Point estimate from cell sums, with dropped-stratum count.
fn point(c: &Cells) -> Option<(f64, usize)> {
    let (mut num, mut den, mut dropped) = (0.0, 0.0, 0);
    for z in 0..c.n1.len() {
        if c.n1[z] == 0.0 {
            continue;
        }
        if c.n0[z] == 0.0 {
            dropped += 1;
            continue;
        }
        num += c.s1[z] - c.n1[z] * c.s0[z] / c.n0[z];
        den += c.n1[z];
    }
    (den > 0.0).then(|| (num / den, dropped))
}

/// Σ_z P(z | treated) [mean(y | treated, z) - mean(y | control, z)].
pub fn stratified_contrast(
    y: &[f64],
    arm: &[Arm],
    key: &[u64],
    opts: &EstimateOptions,
) -> Result<Contrast> {
    let n = y.len();
    assert!(arm.len() == n && key.len() == n, "column lengths differ");
    let (id, k) = dense_strata(key, arm);
    let mut cells = Cells { id, n1: vec![0.0; k], s1: vec![0.0; k], n0: vec![0.0; k], s0: vec![0.0; k] };
    accumulate(&mut cells, y, arm, None);
    let n_treated = arm.iter().filter(|&&a| a == Arm::Treated).count();
    let n_control = arm.iter().filter(|&&a| a == Arm::Control).count();
    if n_treated == 0 {
        return Err(Error::Estimate("empty treated group".into()));
    }
    if n_control == 0 {
        return Err(Error::Estimate("empty control group".into()));
    }
    let (estimate, dropped) =
        point(&cells).ok_or_else(|| Error::Estimate("no treated stratum has control units".into()))?;
    if opts.strict && dropped > 0 {
        return Err(Error::Estimate(format!("{dropped} treated strata have no control units")));
    }
    let strata = (0..k).filter(|&z| cells.n1[z] > 0.0).count();
    let n1: f64 = (0..k).filter(|&z| cells.n0[z] > 0.0).map(|z| cells.n1[z]).sum();
    let mut influence = vec![0.0; n];
    for i in 0..n {
        let z = cells.id[i] as usize;
        if arm[i] == Arm::Out || cells.n0[z] == 0.0 || cells.n1[z] == 0.0 {
            continue;
        }
        let m = cells.s0[z] / cells.n0[z];
        influence[i] = match arm[i] {
            Arm::Treated => (y[i] - m - estimate) / n1,
            Arm::Control => -(cells.n1[z] / n1) * (y[i] - m) / cells.n0[z],
            Arm::Out => 0.0,
        };
    }
    let std_error = if opts.bootstrap > 0 {
        bootstrap(&mut cells, y, arm, opts)
    } else {
        influence.iter().map(|v| v * v).sum::<f64>().sqrt()
    };
    Ok(Contrast { estimate, std_error, n_treated, n_control, strata, dropped_strata: dropped, influence })
}

fn bootstrap(cells: &mut Cells, y: &[f64], arm: &[Arm], opts: &EstimateOptions) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xb007_5a3d);
    let pois = Poisson::new(1.0).expect("positive rate");
    let mut w = vec![0.0; y.len()];
    let mut reps = Vec::with_capacity(opts.bootstrap);
    for _ in 0..opts.bootstrap {
        for (wi, a) in w.iter_mut().zip(arm) {
            *wi = if *a == Arm::Out { 0.0 } else { rng.sample(pois) };
        }
        accumulate(cells, y, arm, Some(&w));
        if let Some((e, _)) = point(cells) {
            reps.push(e);
        }
    }
    let k = reps.len() as f64;
    if k < 2.0 {
        return f64::NAN;
    }
    let mean = reps.iter().sum::<f64>() / k;
    (reps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub g: u32,
    pub t: u32,
    pub strategy: Strategy,
    pub control: Control,
    pub covariates: Vec<String>,
    pub estimate: f64,
    pub std_error: f64,
    pub se_method: SeMethod,
    pub n_treated: usize,
    pub n_control: usize,
    pub strata: usize,
    pub dropped_strata: usize,
    /// Mean of y_t - y0_t over the group, when the panel has untreated outcomes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<f64>,
    #[serde(skip)]
    pub influence: Vec<f64>,
}

impl EstimateResult {
    pub fn t_stat(&self) -> f64 {
        self.estimate / self.std_error
    }
}

/// Influence-function SE of `a - b` on the same sample.
pub fn paired_se(a: &EstimateResult, b: &EstimateResult) -> f64 {
    a.influence.iter().zip(&b.influence).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn covariance(a: &EstimateResult, b: &EstimateResult) -> f64 {
    a.influence.iter().zip(&b.influence).map(|(x, y)| x * y).sum()
}

/// Stratum key: covariate bits at `periods`, unit-major.
fn strata_keys(p: &Panel, periods: &[u32]) -> Result<Vec<u64>> {
    if periods.len() > 64 {
        return Err(Error::Config("at most 64 covariate periods".into()));
    }
    Ok((0..p.n)
        .map(|i| periods.iter().enumerate().fold(0u64, |k, (b, &s)| k | ((p.x[p.at(i, s)] as u64) << b)))
        .collect())
}

fn check_target(p: &Panel, g: u32, t: u32, control: Control) -> Result<()> {
    let bad = |m: String| Err(Error::InvalidTarget(m));
    if g < 1 || g >= p.periods {
        return bad(format!("g={g} outside 1..{}", p.periods - 1));
    }
    if t >= p.periods {
        return bad(format!("t={t} outside 0..{}", p.periods - 1));
    }
    if t + 1 == g {
        return bad(format!("t={t} is the base period g-1"));
    }
    if let Control::NotYetTreated(s) = control {
        if s < (g - 1).max(t) || s >= p.periods {
            return bad(format!("not-yet-treated horizon s={s} must lie in [{}, {}]", (g - 1).max(t), p.periods - 1));
        }
    }
    Ok(())
}

/// Arms for group `g` against the control group. Not-yet-treated controls
/// are untreated through `s` and never include group `g` itself.
fn arms(p: &Panel, g: u32, control: Control) -> Vec<Arm> {
    p.group
        .iter()
        .map(|&gi| {
            if gi == g {
                Arm::Treated
            } else {
                let ctl = match control {
                    Control::NeverTreated => gi == NEVER,
                    Control::NotYetTreated(s) => gi > s,
                };
                if ctl {
                    Arm::Control
                } else {
                    Arm::Out
                }
            }
        })
        .collect()
}

pub fn did_gt(
    p: &Panel,
    g: u32,
    t: u32,
    strategy: &Strategy,
    control: Control,
    opts: &EstimateOptions,
) -> Result<EstimateResult> {
    check_target(p, g, t, control)?;
    let periods = strategy.periods(g, t, p.periods);
    let key = strata_keys(p, &periods)?;
    let dy: Vec<f64> = (0..p.n).map(|i| p.y[p.at(i, t)] - p.y[p.at(i, g - 1)]).collect();
    let arm = arms(p, g, control);
    let c = stratified_contrast(&dy, &arm, &key, opts)?;
    let oracle = match &p.y0 {
        Some(_) => Some(p.oracle_att(g, t)?),
        None => None,
    };
    Ok(EstimateResult {
        g,
        t,
        strategy: strategy.clone(),
        control,
        covariates: periods.into_iter().map(x_id).collect(),
        estimate: c.estimate,
        std_error: c.std_error,
        se_method: if opts.bootstrap > 0 { SeMethod::Bootstrap } else { SeMethod::Influence },
        n_treated: c.n_treated,
        n_control: c.n_control,
        strata: c.strata,
        dropped_strata: c.dropped_strata,
        oracle,
        influence: c.influence,
    })
}

/// One estimate per period other than the base period g - 1. A
/// not-yet-treated horizon is raised per period to max(s, g - 1, t).
pub fn event_study(
    p: &Panel,
    g: u32,
    strategy: &Strategy,
    control: Control,
    opts: &EstimateOptions,
) -> Result<Vec<EstimateResult>> {
    if g < 1 || g >= p.periods {
        return Err(Error::InvalidTarget(format!("g={g} outside 1..{}", p.periods - 1)));
    }
    (0..p.periods)
        .filter(|&t| t + 1 != g)
        .map(|t| {
            let c = match control {
                Control::NotYetTreated(s) => Control::NotYetTreated(s.max(g - 1).max(t)),
                c => c,
            };
            did_gt(p, g, t, strategy, c, opts)
        })
        .collect()
}

/// Pre-trend hypotheses, nested by the covariates they condition on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hypothesis {
    /// No covariates.
    #[serde(rename = "H0^0")]
    H0,
    /// {X_t, X_{g-1}}
    #[serde(rename = "H0^2")]
    H2,
    /// X_0..X_{g-1}
    #[serde(rename = "H0^g")]
    Hg,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 3] = [Hypothesis::H0, Hypothesis::H2, Hypothesis::Hg];

    pub fn strategy(&self, g: u32) -> Strategy {
        match self {
            Hypothesis::H0 => Strategy::NoCovariates,
            Hypothesis::H2 => Strategy::TwoPoint,
            Hypothesis::Hg => Strategy::Custom((0..g).collect()),
        }
    }

    /// Restrictions of which at least one fails when the hypothesis is rejected.
    pub fn implicates(&self) -> &'static [&'static str] {
        match self {
            Hypothesis::H0 => &["r-alpha", "r-y", "r-xy-t1", "r-xy-t"],
            Hypothesis::H2 => &["r-alpha", "r-y", "r-xy-t1"],
            Hypothesis::Hg => &["r-alpha", "r-y"],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Hypothesis::H0 => "H0^0",
            Hypothesis::H2 => "H0^2",
            Hypothesis::Hg => "H0^g",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisResult {
    pub hypothesis: Hypothesis,
    pub estimates: Vec<EstimateResult>,
    pub p_values: Vec<f64>,
    pub max_abs_t: f64,
    pub critical_value: f64,
    pub rejected: bool,
    /// Non-empty when rejected: at least one of these restrictions fails.
    pub implicated: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PretrendReport {
    pub g: u32,
    pub level: f64,
    pub hypotheses: Vec<HypothesisResult>,
    /// Restrictions singled out by comparing nested hypotheses.
    pub likely_violated: Vec<String>,
    pub conclusions: Vec<String>,
}

impl PretrendReport {
    pub fn get(&self, h: Hypothesis) -> &HypothesisResult {
        self.hypotheses.iter().find(|r| r.hypothesis == h).expect("all hypotheses present")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryOptions {
    pub level: f64,
    /// Gaussian draws for the sup-|t| critical value.
    pub draws: usize,
    pub seed: u64,
    pub control: Control,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        BatteryOptions { level: 0.05, draws: 20_000, seed: 0, control: Control::NeverTreated }
    }
}

/// Lower Cholesky factor of a symmetric positive semi-definite matrix, with
/// a small ridge added if needed.
pub(crate) fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    'ridge: for ridge in [0.0, 1e-10, 1e-8, 1e-6] {
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let dot: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
                if i == j {
                    let v = a[i][i] + ridge - dot;
                    if !(v > 0.0) {
                        continue 'ridge;
                    }
                    l[i][j] = v.sqrt();
                } else {
                    l[i][j] = (a[i][j] - dot) / l[j][j];
                }
            }
        }
        return Some(l);
    }
    None
}

/// 1 - level quantile of max_k |Z_k| with Z ~ N(0, corr).
pub fn sup_t_critical(corr: &[Vec<f64>], level: f64, draws: usize, seed: u64) -> f64 {
    let k = corr.len();
    if k == 0 {
        return f64::NAN;
    }
    let Some(l) = cholesky(corr) else {
        // fall back to Bonferroni
        return Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - level / (2.0 * k as f64));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut maxes: Vec<f64> = (0..draws.max(1))
        .map(|_| {
            let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            (0..k)
                .map(|i| (0..=i).map(|j| l[i][j] * z[j]).sum::<f64>().abs())
                .fold(0.0, f64::max)
        })
        .collect();
    maxes.sort_by(|a, b| a.total_cmp(b));
    let q = ((1.0 - level) * maxes.len() as f64).ceil() as usize;
    maxes[q.clamp(1, maxes.len()) - 1]
}

/// Joint pre-trend tests for group `g` over all t < g - 1.
pub fn pretrend_battery(p: &Panel, g: u32, opts: &BatteryOptions) -> Result<PretrendReport> {
    if g < 2 || g >= p.periods {
        return Err(Error::InvalidTarget(format!(
            "pre-trend tests need 2 <= g <= {}, got {g}",
            p.periods - 1
        )));
    }
    let est = EstimateOptions::default();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut hypotheses = Vec::new();
    for h in Hypothesis::ALL {
        let strategy = h.strategy(g);
        let estimates: Vec<EstimateResult> = (0..g - 1)
            .map(|t| {
                let c = match opts.control {
                    Control::NotYetTreated(s) => Control::NotYetTreated(s.max(g - 1)),
                    c => c,
                };
                did_gt(p, g, t, &strategy, c, &est)
            })
            .collect::<Result<_>>()?;
        let corr: Vec<Vec<f64>> = estimates
            .iter()
            .map(|a| estimates.iter().map(|b| covariance(a, b) / (a.std_error * b.std_error)).collect())
            .collect();
        let critical_value = sup_t_critical(&corr, opts.level, opts.draws, opts.seed);
        let max_abs_t = estimates.iter().map(|e| e.t_stat().abs()).fold(0.0, f64::max);
        let p_values = estimates.iter().map(|e| 2.0 * (1.0 - normal.cdf(e.t_stat().abs()))).collect();
        let rejected = max_abs_t > critical_value;
        hypotheses.push(HypothesisResult {
            hypothesis: h,
            estimates,
            p_values,
            max_abs_t,
            critical_value,
            rejected,
            implicated: if rejected { h.implicates().iter().map(|s| s.to_string()).collect() } else { Vec::new() },
        });
    }
    let rej = |h: Hypothesis| hypotheses.iter().any(|r| r.hypothesis == h && r.rejected);
    let mut likely_violated = Vec::new();
    let mut conclusions = Vec::new();
    if rej(Hypothesis::H0) && !rej(Hypothesis::H2) {
        likely_violated.push("r-xy-t".to_string());
        conclusions.push("H0^0 rejected and H0^2 not: no within-period covariate-outcome effect (r-xy-t) is likely violated".into());
    }
    if rej(Hypothesis::H2) && !rej(Hypothesis::Hg) {
        likely_violated.push("r-xy-t1".to_string());
        conclusions.push("H0^2 rejected and H0^g not: no covariate-outcome dynamics (r-xy-t1) is likely violated".into());
    }
    if rej(Hypothesis::Hg) {
        conclusions.push(
            "H0^g rejected: additive separability or no outcome dynamics fails; no adjustment set is justified".into(),
        );
    } else {
        conclusions.push(
            "treatment-covariate feedback (r-dx-t, r-dx-t1) cannot be tested with pre-treatment periods".into(),
        );
    }
    if !rej(Hypothesis::H0) && !rej(Hypothesis::H2) && !rej(Hypothesis::Hg) {
        conclusions.insert(0, "no pre-trend hypothesis rejected".into());
    }
    Ok(PretrendReport { g, level: opts.level, hypotheses, likely_violated, conclusions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate_panel, SimConfig};

    fn toy() -> (Vec<f64>, Vec<Arm>, Vec<u64>) {
        use Arm::*;
        // two strata; stratum 1 has treated 3, 5 and controls 1, 2
        let y = vec![3.0, 5.0, 1.0, 2.0, 10.0, 7.0, 9.0, 100.0];
        let a = vec![Treated, Treated, Control, Control, Treated, Control, Control, Out];
        let k = vec![1, 1, 1, 1, 0, 0, 0, 0];
        (y, a, k)
    }

    #[test]
    fn hand_computed_contrast() {
        let (y, a, k) = toy();
        let c = stratified_contrast(&y, &a, &k, &EstimateOptions::default()).unwrap();
        // stratum 1: 4 - 1.5 = 2.5 (weight 2/3); stratum 0: 10 - 8 = 2 (weight 1/3)
        assert!((c.estimate - (2.5 * 2.0 / 3.0 + 2.0 / 3.0)).abs() < 1e-12);
        assert_eq!((c.n_treated, c.n_control, c.strata, c.dropped_strata), (3, 4, 2, 0));
        assert_eq!(c.influence[7], 0.0);
        let s: f64 = c.influence.iter().sum();
        assert!(s.abs() < 1e-12, "influence sums to zero");
    }

    #[test]
    fn drops_strata_without_controls() {
        let (y, mut a, mut k) = toy();
        a.push(Arm::Treated);
        k.push(9);
        let mut y = y;
        y.push(50.0);
        let c = stratified_contrast(&y, &a, &k, &EstimateOptions::default()).unwrap();
        assert_eq!(c.dropped_strata, 1);
        assert!((c.estimate - (2.5 * 2.0 / 3.0 + 2.0 / 3.0)).abs() < 1e-12);
        let strict = EstimateOptions { strict: true, ..Default::default() };
        assert!(stratified_contrast(&y, &a, &k, &strict).is_err());
    }

    #[test]
    fn empty_groups_error() {
        let y = vec![1.0, 2.0];
        let k = vec![0, 0];
        let o = EstimateOptions::default();
        assert!(stratified_contrast(&y, &[Arm::Control, Arm::Control], &k, &o).is_err());
        assert!(stratified_contrast(&y, &[Arm::Treated, Arm::Out], &k, &o).is_err());
    }

    #[test]
    fn strategy_periods() {
        assert_eq!(Strategy::PreTreatment.periods(4, 5, 6), vec![0, 1, 2, 3, 4]);
        assert_eq!(Strategy::PreOutcome.periods(4, 1, 6), vec![0, 1, 2, 3]);
        assert_eq!(Strategy::PreOutcome.periods(4, 5, 6), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(Strategy::TwoPoint.periods(4, 1, 6), vec![1, 3]);
        assert_eq!(Strategy::FullSequence.periods(4, 1, 3), vec![0, 1, 2]);
        for s in ["none", "pre-treatment", "pre-outcome", "two-point", "full", "custom:0,2"] {
            assert_eq!(s.parse::<Strategy>().unwrap().to_string(), s);
        }
        assert!("custom:a".parse::<Strategy>().is_err());
    }

    #[test]
    fn bootstrap_matches_influence() {
        let p = simulate_panel(&SimConfig { n: 40_000, seed: 3, ..Default::default() }).unwrap();
        let a = did_gt(&p, 4, 4, &Strategy::PreOutcome, Control::NeverTreated, &EstimateOptions::default()).unwrap();
        let o = EstimateOptions { bootstrap: 200, seed: 1, strict: false };
        let b = did_gt(&p, 4, 4, &Strategy::PreOutcome, Control::NeverTreated, &o).unwrap();
        assert_eq!(a.estimate, b.estimate);
        let r = b.std_error / a.std_error;
        assert!((0.8..1.25).contains(&r), "bootstrap/IF ratio {r}");
    }

    #[test]
    fn zero_effect_is_centered() {
        let p = simulate_panel(&SimConfig { n: 50_000, seed: 11, zero_effect: true, ..Default::default() }).unwrap();
        for s in [Strategy::PreOutcome, Strategy::FullSequence] {
            for r in event_study(&p, 4, &s, Control::NeverTreated, &EstimateOptions::default()).unwrap() {
                assert!(r.estimate.abs() < 4.0 * r.std_error, "{s} t={} {} ({})", r.t, r.estimate, r.std_error);
            }
        }
    }

    #[test]
    fn event_study_skips_base() {
        let p = simulate_panel(&SimConfig { n: 5000, ..Default::default() }).unwrap();
        let es = event_study(&p, 4, &Strategy::NoCovariates, Control::NotYetTreated(3), &EstimateOptions::default()).unwrap();
        let ts: Vec<u32> = es.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0, 1, 2, 4, 5]);
        assert_eq!(es[4].control, Control::NotYetTreated(5));
        assert!(did_gt(&p, 4, 3, &Strategy::NoCovariates, Control::NeverTreated, &EstimateOptions::default()).is_err());
        assert!(did_gt(&p, 4, 5, &Strategy::NoCovariates, Control::NotYetTreated(4), &EstimateOptions::default()).is_err());
    }

    #[test]
    fn sup_t_reduces_to_normal_quantile() {
        let c = sup_t_critical(&[vec![1.0]], 0.05, 20_000, 1);
        assert!((c - 1.96).abs() < 0.05, "{c}");
        let c2 = sup_t_critical(&[vec![1.0, 0.0], vec![0.0, 1.0]], 0.05, 20_000, 1);
        assert!((c2 - 2.236).abs() < 0.06, "{c2}");
        let c3 = sup_t_critical(&[vec![1.0, 1.0], vec![1.0, 1.0]], 0.05, 20_000, 1);
        assert!((c3 - 1.96).abs() < 0.05, "{c3}");
    }

    #[test]
    fn battery_without_covariate_effects_is_quiet() {
        let cfg = SimConfig { n: 100_000, seed: 5, zero_effect: true, xy_effect: false, ..Default::default() };
        let p = simulate_panel(&cfg).unwrap();
        let r = pretrend_battery(&p, 4, &BatteryOptions::default()).unwrap();
        assert!(r.hypotheses.iter().all(|h| !h.rejected), "{:?}", r.conclusions);
        assert!(r.likely_violated.is_empty());
        assert!(pretrend_battery(&p, 1, &BatteryOptions::default()).is_err());
    }
}
