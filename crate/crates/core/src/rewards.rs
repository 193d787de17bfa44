//! Capacity, QoS and fairness rewards over per-user duplex rates.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Per-user downlink and uplink rates in bps/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub d: Vec<f64>,
    pub u: Vec<f64>,
}

impl RateReport {
    pub fn new(d: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        check_len("uplink rates", d.len(), u.len())?;
        if d.iter().chain(&u).any(|r| !(*r >= 0.0)) {
            return Err(Error::NonFinite("rate report (rates must be >= 0)".into()));
        }
        Ok(Self { d, u })
    }

    pub fn k(&self) -> usize {
        self.d.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub eps_d: Vec<f64>,
    pub eps_u: Vec<f64>,
    pub mu: f64,
    pub alpha: f64,
}

impl ThresholdConfig {
    /// Same thresholds for every user.
    pub fn uniform(k: usize, eps_d: f64, eps_u: f64, mu: f64, alpha: f64) -> Self {
        Self {
            eps_d: vec![eps_d; k],
            eps_u: vec![eps_u; k],
            mu,
            alpha,
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.eps_d.len() != k {
            return Err(Error::invalid(
                "thresholds.eps_d",
                format!("expected {k} entries, got {}", self.eps_d.len()),
            ));
        }
        if self.eps_u.len() != k {
            return Err(Error::invalid(
                "thresholds.eps_u",
                format!("expected {k} entries, got {}", self.eps_u.len()),
            ));
        }
        if self.eps_d.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::invalid("thresholds.eps_d", "thresholds must be >= 0"));
        }
        if self.eps_u.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::invalid("thresholds.eps_u", "thresholds must be >= 0"));
        }
        if !(self.mu >= 0.0) {
            return Err(Error::invalid("thresholds.mu", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid("thresholds.alpha", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self::uniform(2, 0.15, 2.0, 2.0, 2.0 / 3.0)
    }
}

/// `R_i = max(0, D_i + U_i)`.
pub fn secrecy_rate(report: &RateReport) -> Vec<f64> {
    report
        .d
        .iter()
        .zip(&report.u)
        .map(|(d, u)| (d + u).max(0.0))
        .collect()
}

/// Sum of [`secrecy_rate`], the baseline reward.
pub fn sum_secrecy_rate(report: &RateReport) -> f64 {
    secrecy_rate(report).iter().sum()
}

/// Penalty flags, set when a rate is strictly below its threshold.
pub fn qos_penalties(report: &RateReport, th: &ThresholdConfig) -> (Vec<u8>, Vec<u8>) {
    let flag = |rate: &f64, eps: &f64| u8::from(rate < eps);
    (
        report.d.iter().zip(&th.eps_d).map(|(r, e)| flag(r, e)).collect(),
        report.u.iter().zip(&th.eps_u).map(|(r, e)| flag(r, e)).collect(),
    )
}

pub fn reward_qos(report: &RateReport, th: &ThresholdConfig) -> f64 {
    let (p_d, p_u) = qos_penalties(report, th);
    let active: u32 = p_d.iter().chain(&p_u).map(|&p| u32::from(p)).sum();
    sum_secrecy_rate(report) - th.mu * f64::from(active)
}

/// Per-user term that keeps only the link directions meeting their threshold.
pub fn reward_q_per_user(d_i: f64, u_i: f64, eps_d_i: f64, eps_u_i: f64) -> f64 {
    match (d_i >= eps_d_i, u_i >= eps_u_i) {
        (true, true) => d_i + u_i,
        (false, true) => u_i,
        (true, false) => d_i,
        (false, false) => 0.0,
    }
}

/// Jain's index `(sum v)^2 / (k * sum v^2)`; an all-zero vector counts as
/// perfectly equal.
pub fn jain_fairness(values: &[f64]) -> f64 {
    let k = values.len() as f64;
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    if sum_sq == 0.0 {
        1.0
    } else {
        // clamp guards the last ulp of rounding at both ends
        (sum * sum / (k * sum_sq)).clamp(1.0 / k, 1.0)
    }
}

pub fn reward_fqos(report: &RateReport, th: &ThresholdConfig) -> f64 {
    let q: f64 = (0..report.k())
        .map(|i| reward_q_per_user(report.d[i], report.u[i], th.eps_d[i], th.eps_u[i]))
        .sum();
    let jfi = jain_fairness(&secrecy_rate(report));
    (1.0 - th.alpha) * q + th.alpha * report.k() as f64 * jfi
}

/// All three reward functions evaluated on one report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardSet {
    pub baseline: f64,
    pub qos: f64,
    pub fqos: f64,
}

impl RewardSet {
    pub fn evaluate(report: &RateReport, th: &ThresholdConfig) -> Self {
        Self {
            baseline: sum_secrecy_rate(report),
            qos: reward_qos(report, th),
            fqos: reward_fqos(report, th),
        }
    }

    pub fn get(&self, kind: RewardKind) -> f64 {
        match kind {
            RewardKind::Baseline => self.baseline,
            RewardKind::Qos => self.qos,
            RewardKind::Fqos => self.fqos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKind {
    Baseline,
    Qos,
    Fqos,
}

impl RewardKind {
    pub const ALL: [RewardKind; 3] = [RewardKind::Baseline, RewardKind::Qos, RewardKind::Fqos];

    pub fn name(&self) -> &'static str {
        match self {
            RewardKind::Baseline => "baseline",
            RewardKind::Qos => "qos",
            RewardKind::Fqos => "fqos",
        }
    }
}

impl std::str::FromStr for RewardKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "baseline" => Ok(RewardKind::Baseline),
            "qos" => Ok(RewardKind::Qos),
            "fqos" => Ok(RewardKind::Fqos),
            other => Err(format!("expected baseline, qos or fqos, got `{other}`")),
        }
    }
}

impl std::fmt::Display for RewardKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn report(d: &[f64], u: &[f64]) -> RateReport {
        RateReport::new(d.to_vec(), u.to_vec()).unwrap()
    }

    #[test]
    fn report_rejects_bad_input() {
        assert!(RateReport::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(RateReport::new(vec![-0.1], vec![1.0]).is_err());
        assert!(RateReport::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn threshold_validation() {
        let mut th = ThresholdConfig::default();
        th.validate(2).unwrap();
        assert!(th.validate(3).is_err());
        th.alpha = 1.5;
        assert!(matches!(th.validate(2), Err(Error::InvalidConfig { key, .. }) if key == "thresholds.alpha"));
    }

    #[test]
    fn reward_kind_parsing() {
        for kind in RewardKind::ALL {
            assert_eq!(kind.name().parse::<RewardKind>().unwrap(), kind);
        }
        assert!("ssr".parse::<RewardKind>().is_err());
    }

    fn uniform_reports(k: usize) -> impl Strategy<Value = RateReport> {
        (
            proptest::collection::vec(0.0f64..8.0, k),
            proptest::collection::vec(0.0f64..8.0, k),
        )
            .prop_map(|(d, u)| RateReport { d, u })
    }

    proptest! {
        #[test]
        fn qos_gap_is_integer_multiple_of_mu(r in (1usize..6).prop_flat_map(uniform_reports), mu in 0.0f64..5.0) {
            let th = ThresholdConfig::uniform(r.k(), 0.15, 2.0, mu, 0.5);
            let gap = sum_secrecy_rate(&r) - reward_qos(&r, &th);
            prop_assert!(gap >= 0.0);
            if mu > 0.0 {
                let m = gap / mu;
                prop_assert!((m - m.round()).abs() < 1e-9);
                prop_assert!(m.round() as usize <= 2 * r.k());
            }
        }

        #[test]
        fn per_user_terms_never_exceed_ssr(r in (1usize..6).prop_flat_map(uniform_reports)) {
            let q: f64 = (0..r.k()).map(|i| reward_q_per_user(r.d[i], r.u[i], 0.15, 2.0)).sum();
            prop_assert!(q <= sum_secrecy_rate(&r));
        }

        #[test]
        fn fqos_is_bounded(r in (1usize..6).prop_flat_map(uniform_reports), alpha in 0.0f64..=1.0) {
            let th = ThresholdConfig::uniform(r.k(), 0.15, 2.0, 2.0, alpha);
            let f = reward_fqos(&r, &th);
            let c = sum_secrecy_rate(&r);
            prop_assert!(f >= 0.0);
            prop_assert!(f <= (1.0 - alpha) * c + alpha * r.k() as f64 + 1e-12);
        }

        #[test]
        fn rewards_are_permutation_equivariant(r in (2usize..6).prop_flat_map(uniform_reports), shift in 1usize..5) {
            let k = r.k();
            let th = ThresholdConfig::uniform(k, 0.15, 2.0, 2.0, 2.0 / 3.0);
            let rot = |v: &Vec<f64>| { let mut v = v.clone(); v.rotate_left(shift % k); v };
            let p = RateReport { d: rot(&r.d), u: rot(&r.u) };
            let a = RewardSet::evaluate(&r, &th);
            let b = RewardSet::evaluate(&p, &th);
            prop_assert!((a.baseline - b.baseline).abs() < 1e-12);
            prop_assert!((a.qos - b.qos).abs() < 1e-12);
            prop_assert!((a.fqos - b.fqos).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_report() {
        let r = report(&[0.0], &[0.0]);
        assert_eq!(secrecy_rate(&r), vec![0.0]);
        assert_eq!(sum_secrecy_rate(&r), 0.0);
        assert_eq!(jain_fairness(&[0.0, 0.0]), 1.0);
    }
}
