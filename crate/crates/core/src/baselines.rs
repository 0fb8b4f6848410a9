//! Comparison coordinators: Naive, a discounted-UCB bandit, HPAC-style
//! threshold control, TLP-style prefetch filtering and StaticBest.

use crate::coordinator::{CoordinationAction, Decision, FeatureSnapshot};
use crate::error::{Error, Result};
use crate::mem::Level;

/// Everything on, full degree.
pub fn naive_policy(num_prefetchers: usize, d_max: u32) -> Decision {
    Decision { action: CoordinationAction::all(num_prefetchers), degree: d_max }
}

/// Discounted UCB over the coordination lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Mab {
    pub discount: f64,
    pub xi: f64,
    sums: Vec<f64>,
    counts: Vec<f64>,
    pulled: Vec<bool>,
}

impl Mab {
    pub fn new(arms: usize, discount: f64, xi: f64) -> Result<Self> {
        if arms == 0 {
            return Err(Error::config("mab_arms", "need at least one arm"));
        }
        if !(0.0..=1.0).contains(&discount) || discount == 0.0 {
            return Err(Error::config("mab_discount", "must lie in (0, 1]"));
        }
        if !(xi >= 0.0 && xi.is_finite()) {
            return Err(Error::config("mab_xi", "must be non-negative"));
        }
        Ok(Self { discount, xi, sums: vec![0.0; arms], counts: vec![0.0; arms], pulled: vec![false; arms] })
    }

    pub fn with_defaults(arms: usize) -> Self {
        Self::new(arms, 0.99, 2.0).expect("default bandit parameters are valid")
    }

    pub fn arms(&self) -> usize {
        self.sums.len()
    }

    pub fn mean(&self, arm: usize) -> f64 {
        if self.counts[arm] > 0.0 {
            self.sums[arm] / self.counts[arm]
        } else {
            0.0
        }
    }

    pub fn count(&self, arm: usize) -> f64 {
        self.counts[arm]
    }

    pub fn select(&self) -> usize {
        if let Some(a) = self.pulled.iter().position(|&p| !p) {
            return a;
        }
        let total: f64 = self.counts.iter().sum();
        let ln_total = total.max(1.0).ln();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for a in 0..self.arms() {
            let n = self.counts[a].max(f64::MIN_POSITIVE);
            let score = self.mean(a) + (self.xi * ln_total / n).sqrt();
            if score > best_score {
                best = a;
                best_score = score;
            }
        }
        best
    }

    pub fn update(&mut self, arm: usize, reward: f64) {
        for (s, c) in self.sums.iter_mut().zip(self.counts.iter_mut()) {
            *s *= self.discount;
            *c *= self.discount;
        }
        self.sums[arm] += reward;
        self.counts[arm] += 1.0;
        self.pulled[arm] = true;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpacThresholds {
    pub acc_pf_low: f64,
    pub acc_pf_high: f64,
    pub acc_ocp_low: f64,
    pub bw_high: f64,
}

impl Default for HpacThresholds {
    fn default() -> Self {
        Self { acc_pf_low: 0.4, acc_pf_high: 0.7, acc_ocp_low: 0.5, bw_high: 0.8 }
    }
}

impl HpacThresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hpac_acc_pf_low", self.acc_pf_low),
            ("hpac_acc_pf_high", self.acc_pf_high),
            ("hpac_acc_ocp_low", self.acc_ocp_low),
            ("hpac_bw_high", self.bw_high),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, "must lie in [0, 1]"));
            }
        }
        if self.acc_pf_low > self.acc_pf_high {
            return Err(Error::config("hpac_acc_pf_low", "must not exceed hpac_acc_pf_high"));
        }
        Ok(())
    }
}

/// Threshold ladder. All prefetchers move together.
pub fn hpac_policy(f: &FeatureSnapshot, th: &HpacThresholds, num_prefetchers: usize, d_max: u32) -> Decision {
    let degree = if f.pf_accuracy >= th.acc_pf_high {
        if f.bw_usage < th.bw_high {
            d_max
        } else {
            0
        }
    } else if f.pf_accuracy >= th.acc_pf_low {
        (d_max / 2).max(1)
    } else {
        0
    };
    let pfs = vec![degree > 0; num_prefetchers];
    let ocp = f.ocp_accuracy >= th.acc_ocp_low;
    Decision { action: CoordinationAction::from_parts(ocp, &pfs), degree }
}

/// Runs [`hpac_policy`] with memory: a disabled mechanism reports zero
/// accuracy, so its last measured accuracy stands in, and after
/// `reprobe_epochs` disabled epochs it is re-enabled once to re-measure.
#[derive(Debug, Clone, PartialEq)]
pub struct HpacController {
    pub thresholds: HpacThresholds,
    pub reprobe_epochs: u32,
    num_prefetchers: usize,
    d_max: u32,
    pf_acc: f64,
    ocp_acc: f64,
    pf_off: u32,
    ocp_off: u32,
    current: Option<Decision>,
}

impl HpacController {
    pub fn new(thresholds: HpacThresholds, num_prefetchers: usize, d_max: u32) -> Self {
        Self {
            thresholds,
            reprobe_epochs: 50,
            num_prefetchers,
            d_max,
            pf_acc: 1.0,
            ocp_acc: 1.0,
            pf_off: 0,
            ocp_off: 0,
            current: None,
        }
    }

    /// Everything starts enabled so both accuracies get measured.
    pub fn initial(&self) -> Decision {
        naive_policy(self.num_prefetchers, self.d_max)
    }

    pub fn step(&mut self, measured: &FeatureSnapshot) -> Decision {
        let cur = self.current.unwrap_or_else(|| self.initial());
        if cur.action.any_prefetcher() {
            self.pf_acc = measured.pf_accuracy;
            self.pf_off = 0;
        } else {
            self.pf_off += 1;
            if self.pf_off >= self.reprobe_epochs {
                self.pf_acc = 1.0;
                self.pf_off = 0;
            }
        }
        if cur.action.ocp_enabled() {
            self.ocp_acc = measured.ocp_accuracy;
            self.ocp_off = 0;
        } else {
            self.ocp_off += 1;
            if self.ocp_off >= self.reprobe_epochs {
                self.ocp_acc = 1.0;
                self.ocp_off = 0;
            }
        }
        let f = FeatureSnapshot { pf_accuracy: self.pf_acc, ocp_accuracy: self.ocp_acc, ..*measured };
        let d = hpac_policy(&f, &self.thresholds, self.num_prefetchers, self.d_max);
        self.current = Some(d);
        d
    }
}

/// Whether a prefetch should be dropped because the OCP expects its line
/// to come from off-chip. Only L1D-bound prefetches are filtered.
pub fn tlp_filter(fill_level: Level, ocp_predicts_offchip: bool) -> bool {
    fill_level == Level::L1D && ocp_predicts_offchip
}

/// Best static combination given one whole-trace IPC per lattice point.
/// Ties go to fewer enabled mechanisms, then the lower index.
pub fn static_best(ipcs: &[(CoordinationAction, f64)], action_count: usize) -> Result<CoordinationAction> {
    let mut by_index = vec![None; action_count];
    for &(a, ipc) in ipcs {
        if a.index < action_count {
            by_index[a.index] = Some(ipc);
        }
    }
    let mut best: Option<(CoordinationAction, f64)> = None;
    for (i, ipc) in by_index.into_iter().enumerate() {
        let ipc = ipc.ok_or(Error::MissingCombination(i))?;
        let a = CoordinationAction::new(i);
        let better = match best {
            None => true,
            Some((b, bi)) => ipc > bi || (ipc == bi && a.enabled_count() < b.enabled_count()),
        };
        if better {
            best = Some((a, ipc));
        }
    }
    Ok(best.expect("action_count > 0").0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_is_lattice_top() {
        assert_eq!(naive_policy(1, 4), Decision { action: CoordinationAction::BOTH, degree: 4 });
        assert_eq!(naive_policy(2, 4).action.index, 7);
    }

    #[test]
    fn mab_pulls_unpulled_first() {
        let mut m = Mab::with_defaults(4);
        assert_eq!(m.select(), 0);
        m.update(0, 5.0);
        assert_eq!(m.select(), 1);
        m.update(1, -1.0);
        m.update(2, -1.0);
        assert_eq!(m.select(), 3);
    }

    #[test]
    fn mab_equal_stats_pick_arm_zero() {
        let mut fresh = Mab::new(4, 1.0, 2.0).unwrap();
        for a in 0..4 {
            fresh.update(a, 1.0);
        }
        assert_eq!(fresh.select(), 0);
    }

    #[test]
    fn mab_undiscounted_is_ucb1() {
        let mut m = Mab::new(2, 1.0, 2.0).unwrap();
        m.update(0, 1.0);
        m.update(0, 0.0);
        m.update(1, 0.5);
        assert_eq!(m.count(0), 2.0);
        assert_eq!(m.mean(0), 0.5);
        assert_eq!(m.mean(1), 0.5);
        // equal means, arm 1 has the larger bonus
        assert_eq!(m.select(), 1);
    }

    #[test]
    fn mab_prefers_better_arm() {
        let mut m = Mab::with_defaults(2);
        let mut late_good = 0;
        for t in 0..1000 {
            let a = m.select();
            m.update(a, if a == 1 { 1.0 } else { 0.0 });
            if t >= 500 && a == 1 {
                late_good += 1;
            }
        }
        assert!(late_good >= 450, "{late_good}");
    }

    #[test]
    fn hpac_ladder() {
        let th = HpacThresholds::default();
        let f = FeatureSnapshot { pf_accuracy: 0.9, ocp_accuracy: 0.9, bw_usage: 0.1, ..Default::default() };
        assert_eq!(hpac_policy(&f, &th, 1, 4), Decision { action: CoordinationAction::BOTH, degree: 4 });
        let low = FeatureSnapshot { pf_accuracy: 0.1, bw_usage: 0.0, ..f };
        assert!(!hpac_policy(&low, &th, 1, 4).action.any_prefetcher());
        let busy = FeatureSnapshot { bw_usage: 0.95, ..f };
        assert!(!hpac_policy(&busy, &th, 1, 4).action.any_prefetcher());
        let mid = FeatureSnapshot { pf_accuracy: 0.5, ..f };
        assert_eq!(hpac_policy(&mid, &th, 1, 4).degree, 2);
        let no_ocp = FeatureSnapshot { ocp_accuracy: 0.2, ..f };
        assert_eq!(hpac_policy(&no_ocp, &th, 1, 4).action, CoordinationAction::PF_ONLY);
    }

    #[test]
    fn hpac_thresholds_validated() {
        assert!(HpacThresholds::default().validate().is_ok());
        let bad = HpacThresholds { acc_pf_low: 0.8, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn hpac_controller_remembers_and_reprobes() {
        let mut c = HpacController::new(HpacThresholds::default(), 1, 4);
        c.reprobe_epochs = 3;
        let bad = FeatureSnapshot { pf_accuracy: 0.1, ocp_accuracy: 0.9, ..Default::default() };
        assert_eq!(c.step(&bad).action, CoordinationAction::OCP_ONLY);
        let silent = FeatureSnapshot { pf_accuracy: 0.0, ocp_accuracy: 0.9, ..Default::default() };
        assert_eq!(c.step(&silent).action, CoordinationAction::OCP_ONLY);
        assert_eq!(c.step(&silent).action, CoordinationAction::OCP_ONLY);
        assert_eq!(c.step(&silent).action, CoordinationAction::BOTH);
    }

    #[test]
    fn tlp_only_filters_l1d() {
        assert!(!tlp_filter(Level::L1D, false));
        assert!(tlp_filter(Level::L1D, true));
        assert!(!tlp_filter(Level::L2C, true));
    }

    #[test]
    fn static_best_examples() {
        let a = |i| CoordinationAction::new(i);
        let ipcs = [(a(0), 1.0), (a(1), 1.1), (a(2), 0.9), (a(3), 1.05)];
        assert_eq!(static_best(&ipcs, 4).unwrap(), CoordinationAction::OCP_ONLY);
        let flat = [(a(3), 1.0), (a(2), 1.0), (a(1), 1.0), (a(0), 1.0)];
        assert_eq!(static_best(&flat, 4).unwrap(), CoordinationAction::NONE);
        let missing = [(a(0), 1.0), (a(1), 1.1), (a(2), 0.9)];
        assert!(matches!(static_best(&missing, 4), Err(Error::MissingCombination(3))));
    }

    #[test]
    fn static_best_prefers_fewer_enabled_on_ties() {
        let a = |i| CoordinationAction::new(i);
        let ipcs = [(a(0), 1.0), (a(1), 1.2), (a(2), 1.2), (a(3), 1.2)];
        assert_eq!(static_best(&ipcs, 4).unwrap(), CoordinationAction::OCP_ONLY);
    }
}
