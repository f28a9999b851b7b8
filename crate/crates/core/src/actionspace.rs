//! Discrete action catalogs over the three efficiency axes, budget targets
//! with hinge penalties, realized-budget accounting, and the net keep-rate
//! metric.

use crate::effknobs::ActionTuple;
use crate::rng::stream_rng;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// The three controllable efficiency axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Kappa,
    Rho,
    Eta,
}

pub const AXES: [Axis; 3] = [Axis::Kappa, Axis::Rho, Axis::Eta];

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Kappa => "kappa",
            Axis::Rho => "rho",
            Axis::Eta => "eta",
        }
    }
}

/// Per-axis level lists; the catalog is their Cartesian product.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Levels {
    pub kappa: Vec<f32>,
    pub rho: Vec<f32>,
    pub q_bits: Vec<u8>,
}

/// An immutable action catalog with stable ids in lexicographic
/// (kappa, rho, q) order.
#[derive(Debug, Clone)]
pub struct ActionSpace {
    levels: Levels,
    actions: Vec<ActionTuple>,
}

fn check_strictly_increasing<T: PartialOrd + std::fmt::Debug>(name: &str, xs: &[T]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Config(format!("{name} levels must be non-empty")));
    }
    for w in xs.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config(format!(
                "{name} levels must be strictly increasing, got {:?} then {:?}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

impl ActionSpace {
    pub fn from_levels(levels: Levels) -> Result<Self> {
        check_strictly_increasing("kappa", &levels.kappa)?;
        check_strictly_increasing("rho", &levels.rho)?;
        check_strictly_increasing("q_bits", &levels.q_bits)?;
        let mut actions = Vec::with_capacity(levels.kappa.len() * levels.rho.len() * levels.q_bits.len());
        for &k in &levels.kappa {
            for &r in &levels.rho {
                for &q in &levels.q_bits {
                    let a = ActionTuple::new(k, r, q);
                    a.validate()?;
                    actions.push(a);
                }
            }
        }
        Ok(ActionSpace { levels, actions })
    }

    /// Named presets. `2l`/`3l`/`fl` are the joint catalogs with 8/27/1560
    /// actions, `h336` the 336-action mid-size catalog used for horizon
    /// studies, and `c2l`/`p2l`/`q2l` the single-axis binary catalogs.
    pub fn preset(name: &str) -> Result<Self> {
        let levels = match name.to_ascii_lowercase().as_str() {
            "2l" => Levels {
                kappa: vec![0.1, 1.0],
                rho: vec![0.6, 1.0],
                q_bits: vec![5, 16],
            },
            "3l" => Levels {
                kappa: vec![0.1, 0.6, 1.0],
                rho: vec![0.4, 0.8, 1.0],
                q_bits: vec![5, 7, 16],
            },
            "fl" => Levels {
                kappa: (1..=10).map(|i| i as f32 / 10.0).collect(),
                rho: (8..=20).map(|i| i as f32 * 0.05).collect(),
                q_bits: (5..=16).collect(),
            },
            "h336" => Levels {
                kappa: vec![0.1, 0.4, 0.7, 1.0],
                rho: vec![0.45, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
                q_bits: (5..=16).collect(),
            },
            "c2l" => Levels {
                kappa: vec![0.1, 1.0],
                rho: vec![1.0],
                q_bits: vec![16],
            },
            "p2l" => Levels {
                kappa: vec![1.0],
                rho: vec![0.6, 1.0],
                q_bits: vec![16],
            },
            "q2l" => Levels {
                kappa: vec![1.0],
                rho: vec![1.0],
                q_bits: vec![5, 16],
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown action-space preset '{other}' (expected 2l, 3l, fl, h336, c2l, p2l, q2l)"
                )))
            }
        };
        Self::from_levels(levels)
    }

    pub fn levels(&self) -> &Levels {
        &self.levels
    }

    pub fn actions(&self) -> &[ActionTuple] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn action(&self, id: usize) -> ActionTuple {
        self.actions[id]
    }

    /// Id of the tuple at the given per-axis level indices.
    pub fn id_of(&self, k_idx: usize, r_idx: usize, q_idx: usize) -> usize {
        (k_idx * self.levels.rho.len() + r_idx) * self.levels.q_bits.len() + q_idx
    }

    /// An axis with a single level is disabled: constant, unpenalized, and
    /// excluded from the net keep-rate.
    pub fn axis_enabled(&self, axis: Axis) -> bool {
        match axis {
            Axis::Kappa => self.levels.kappa.len() > 1,
            Axis::Rho => self.levels.rho.len() > 1,
            Axis::Eta => self.levels.q_bits.len() > 1,
        }
    }

    pub fn enabled_axes(&self) -> Vec<Axis> {
        AXES.into_iter().filter(|&a| self.axis_enabled(a)).collect()
    }

    /// Level values of an axis as keep fractions (eta = q/16).
    pub fn axis_values(&self, axis: Axis) -> Vec<f64> {
        match axis {
            Axis::Kappa => self.levels.kappa.iter().map(|&v| v as f64).collect(),
            Axis::Rho => self.levels.rho.iter().map(|&v| v as f64).collect(),
            Axis::Eta => self.levels.q_bits.iter().map(|&q| q as f64 / 16.0).collect(),
        }
    }

    /// Indices of the adjacent levels bracketing `target` on an axis,
    /// clamped to the catalog hull. Returns (lo, hi, clamped).
    pub fn bracket(&self, axis: Axis, target: f64) -> (usize, usize, bool) {
        let vals = self.axis_values(axis);
        if target <= vals[0] {
            return (0, 0, target < vals[0]);
        }
        if target >= *vals.last().unwrap() {
            let last = vals.len() - 1;
            return (last, last, target > vals[last]);
        }
        let mut hi = 1;
        while vals[hi] < target {
            hi += 1;
        }
        if vals[hi] == target {
            (hi, hi, false)
        } else {
            (hi - 1, hi, false)
        }
    }
}

/// Requested episode-average budgets with tolerance band and penalty weights.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct BudgetTarget {
    pub c_kappa: f64,
    pub c_rho: f64,
    pub c_eta: f64,
    pub tau: f64,
    pub alpha_kappa: f64,
    pub alpha_rho: f64,
    pub alpha_eta: f64,
}

pub const DEFAULT_TAU: f64 = 0.02;
pub const DEFAULT_ALPHA_KAPPA: f64 = 100.0;
pub const DEFAULT_ALPHA_RHO: f64 = 100.0;
pub const DEFAULT_ALPHA_ETA: f64 = 200.0;

impl BudgetTarget {
    /// Target with default tolerance/weights; disabled axes are pinned to 1
    /// and carry weight 0.
    pub fn for_space(space: &ActionSpace, c_kappa: f64, c_rho: f64, c_eta: f64) -> Self {
        let en = |axis: Axis| space.axis_enabled(axis);
        BudgetTarget {
            c_kappa: if en(Axis::Kappa) { c_kappa } else { 1.0 },
            c_rho: if en(Axis::Rho) { c_rho } else { 1.0 },
            c_eta: if en(Axis::Eta) { c_eta } else { 1.0 },
            tau: DEFAULT_TAU,
            alpha_kappa: if en(Axis::Kappa) { DEFAULT_ALPHA_KAPPA } else { 0.0 },
            alpha_rho: if en(Axis::Rho) { DEFAULT_ALPHA_RHO } else { 0.0 },
            alpha_eta: if en(Axis::Eta) { DEFAULT_ALPHA_ETA } else { 0.0 },
        }
    }

    pub fn target(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Kappa => self.c_kappa,
            Axis::Rho => self.c_rho,
            Axis::Eta => self.c_eta,
        }
    }
}

/// Episode-average knob values over effective steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizedBudgets {
    pub kappa_bar: f64,
    pub rho_bar: f64,
    pub eta_bar: f64,
    pub effective_steps: usize,
}

impl RealizedBudgets {
    /// Averages the chosen knob values over steps flagged effective. With no
    /// effective steps the averages are defined as the targets, mirroring the
    /// policy-feature convention.
    pub fn from_actions(actions: &[ActionTuple], eff: &[bool], target: &BudgetTarget) -> Self {
        assert_eq!(actions.len(), eff.len());
        let mut n = 0usize;
        let (mut sk, mut sr, mut se) = (0.0f64, 0.0f64, 0.0f64);
        for (a, &e) in actions.iter().zip(eff) {
            if e {
                n += 1;
                sk += a.kappa as f64;
                sr += a.rho as f64;
                se += a.eta() as f64;
            }
        }
        if n == 0 {
            RealizedBudgets {
                kappa_bar: target.c_kappa,
                rho_bar: target.c_rho,
                eta_bar: target.c_eta,
                effective_steps: 0,
            }
        } else {
            RealizedBudgets {
                kappa_bar: sk / n as f64,
                rho_bar: sr / n as f64,
                eta_bar: se / n as f64,
                effective_steps: n,
            }
        }
    }

    pub fn value(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Kappa => self.kappa_bar,
            Axis::Rho => self.rho_bar,
            Axis::Eta => self.eta_bar,
        }
    }
}

/// Arithmetic mean of realized keep-rates over the enabled axes.
pub fn net_keep(realized: &RealizedBudgets, space: &ActionSpace) -> Result<f64> {
    let axes = space.enabled_axes();
    if axes.is_empty() {
        return Err(Error::Invalid("net keep-rate undefined with no enabled axis".into()));
    }
    Ok(axes.iter().map(|&a| realized.value(a)).sum::<f64>() / axes.len() as f64)
}

/// Squared hinge: zero inside the tolerance band, quadratic outside.
pub fn hinge_penalty(delta: f64, tau: f64) -> f64 {
    let excess = delta.abs() - tau;
    if excess > 0.0 {
        excess * excess
    } else {
        0.0
    }
}

/// Weighted sum of per-axis hinge penalties; disabled axes carry weight 0.
pub fn compute_penalty(realized: &RealizedBudgets, target: &BudgetTarget) -> f64 {
    target.alpha_kappa * hinge_penalty(realized.kappa_bar - target.c_kappa, target.tau)
        + target.alpha_rho * hinge_penalty(realized.rho_bar - target.c_rho, target.tau)
        + target.alpha_eta * hinge_penalty(realized.eta_bar - target.c_eta, target.tau)
}

/// Uniform sampling intervals for requested budgets, one per axis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct BudgetRanges {
    pub kappa: (f64, f64),
    pub rho: (f64, f64),
    pub eta: (f64, f64),
}

impl Default for BudgetRanges {
    fn default() -> Self {
        BudgetRanges {
            kappa: (0.1, 1.0),
            rho: (0.4, 1.0),
            eta: (0.3125, 1.0),
        }
    }
}

impl BudgetRanges {
    fn get(&self, axis: Axis) -> (f64, f64) {
        match axis {
            Axis::Kappa => self.kappa,
            Axis::Rho => self.rho,
            Axis::Eta => self.eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for axis in AXES {
            let (lo, hi) = self.get(axis);
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || hi < lo {
                return Err(Error::Config(format!(
                    "{} budget range [{lo}, {hi}] invalid",
                    axis.name()
                )));
            }
        }
        Ok(())
    }
}

/// Draws one requested target triple. Enabled axes sample uniformly from
/// their ranges; disabled axes are pinned to 1 with weight 0.
pub fn sample_targets(
    ranges: &BudgetRanges,
    space: &ActionSpace,
    tau: f64,
    alphas: (f64, f64, f64),
    seed: u64,
    draw_idx: u64,
) -> Result<BudgetTarget> {
    ranges.validate()?;
    let mut rng = stream_rng(seed, "budget-targets", draw_idx);
    let mut draw = |axis: Axis| -> f64 {
        let (lo, hi) = ranges.get(axis);
        if !space.axis_enabled(axis) {
            return 1.0;
        }
        if hi > lo {
            rng.gen_range(lo..=hi)
        } else {
            lo
        }
    };
    let c_kappa = draw(Axis::Kappa);
    let c_rho = draw(Axis::Rho);
    let c_eta = draw(Axis::Eta);
    Ok(BudgetTarget {
        c_kappa,
        c_rho,
        c_eta,
        tau,
        alpha_kappa: if space.axis_enabled(Axis::Kappa) { alphas.0 } else { 0.0 },
        alpha_rho: if space.axis_enabled(Axis::Rho) { alphas.1 } else { 0.0 },
        alpha_eta: if space.axis_enabled(Axis::Eta) { alphas.2 } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_catalog_sizes() {
        assert_eq!(ActionSpace::preset("2l").unwrap().len(), 8);
        assert_eq!(ActionSpace::preset("3l").unwrap().len(), 27);
        assert_eq!(ActionSpace::preset("fl").unwrap().len(), 1560);
        assert_eq!(ActionSpace::preset("h336").unwrap().len(), 336);
        assert!(ActionSpace::preset("nope").is_err());
    }

    #[test]
    fn ids_are_lexicographic() {
        let s = ActionSpace::preset("2l").unwrap();
        // (kappa, rho, q) ascending, q innermost.
        assert_eq!(s.action(0), crate::effknobs::ActionTuple::new(0.1, 0.6, 5));
        assert_eq!(s.action(1), crate::effknobs::ActionTuple::new(0.1, 0.6, 16));
        assert_eq!(s.action(2), crate::effknobs::ActionTuple::new(0.1, 1.0, 5));
        assert_eq!(s.action(7), crate::effknobs::ActionTuple::new(1.0, 1.0, 16));
        assert_eq!(s.id_of(1, 1, 1), 7);
        // Dense tuple present whenever each axis tops out dense.
        assert!(s.actions().iter().any(|a| a.is_dense()));
    }

    #[test]
    fn single_level_axes_are_disabled() {
        let s = ActionSpace::from_levels(Levels {
            kappa: vec![1.0],
            rho: vec![1.0],
            q_bits: vec![16],
        })
        .unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.enabled_axes().is_empty());
        let t = BudgetTarget::for_space(&s, 0.5, 0.5, 0.5);
        assert_eq!((t.c_kappa, t.c_rho, t.c_eta), (1.0, 1.0, 1.0));
        assert_eq!((t.alpha_kappa, t.alpha_rho, t.alpha_eta), (0.0, 0.0, 0.0));
        let r = RealizedBudgets {
            kappa_bar: 1.0,
            rho_bar: 1.0,
            eta_bar: 1.0,
            effective_steps: 4,
        };
        assert!(net_keep(&r, &s).is_err());
    }

    #[test]
    fn duplicate_levels_rejected() {
        let bad = ActionSpace::from_levels(Levels {
            kappa: vec![0.5, 0.5],
            rho: vec![1.0],
            q_bits: vec![16],
        });
        assert!(bad.is_err());
    }

    #[test]
    fn net_keep_examples() {
        let s = ActionSpace::preset("3l").unwrap();
        let dense = RealizedBudgets {
            kappa_bar: 1.0,
            rho_bar: 1.0,
            eta_bar: 1.0,
            effective_steps: 16,
        };
        assert_eq!(net_keep(&dense, &s).unwrap(), 1.0);
        let mixed = RealizedBudgets {
            kappa_bar: 0.4,
            rho_bar: 0.7,
            eta_bar: 0.5,
            effective_steps: 16,
        };
        let nk = net_keep(&mixed, &s).unwrap();
        assert!((nk - 1.6 / 3.0).abs() < 1e-12);

        let single = ActionSpace::preset("c2l").unwrap();
        let r = RealizedBudgets {
            kappa_bar: 0.3,
            rho_bar: 1.0,
            eta_bar: 1.0,
            effective_steps: 16,
        };
        assert_eq!(net_keep(&r, &single).unwrap(), 0.3);
    }

    #[test]
    fn hinge_hand_values() {
        assert_eq!(hinge_penalty(0.01, 0.02), 0.0);
        assert!((hinge_penalty(0.05, 0.02) - 0.0009).abs() < 1e-12);
        assert!((hinge_penalty(-0.05, 0.02) - 0.0009).abs() < 1e-12);
        assert_eq!(hinge_penalty(0.0, 0.0), 0.0);
    }

    #[test]
    fn hinge_shape_properties() {
        let tau = 0.02;
        let mut prev = 0.0;
        for i in 0..200 {
            let d = i as f64 * 0.005;
            let v = hinge_penalty(d, tau);
            assert_eq!(v, hinge_penalty(-d, tau), "even in delta");
            if d <= tau {
                assert_eq!(v, 0.0);
            } else {
                assert!(v > prev, "strictly increasing beyond tau");
            }
            prev = v;
        }
    }

    #[test]
    fn compute_penalty_examples() {
        let s = ActionSpace::preset("3l").unwrap();
        let t = BudgetTarget::for_space(&s, 0.5, 0.8, 0.75);
        let exact = RealizedBudgets {
            kappa_bar: 0.5,
            rho_bar: 0.8,
            eta_bar: 0.75,
            effective_steps: 16,
        };
        assert_eq!(compute_penalty(&exact, &t), 0.0);

        let off = RealizedBudgets {
            kappa_bar: 0.55,
            rho_bar: 0.8,
            eta_bar: 0.75,
            effective_steps: 16,
        };
        assert!((compute_penalty(&off, &t) - 0.09).abs() < 1e-10);

        // Disabled quant axis: weight 0 regardless of eta_bar.
        let c2l = ActionSpace::preset("c2l").unwrap();
        let t2 = BudgetTarget::for_space(&c2l, 0.5, 1.0, 1.0);
        let weird = RealizedBudgets {
            kappa_bar: 0.5,
            rho_bar: 1.0,
            eta_bar: 0.123,
            effective_steps: 16,
        };
        assert_eq!(compute_penalty(&weird, &t2), 0.0);
    }

    #[test]
    fn penalty_zero_iff_within_bands() {
        let s = ActionSpace::preset("3l").unwrap();
        let t = BudgetTarget::for_space(&s, 0.5, 0.7, 0.6);
        for dk in [-0.05, -0.02, 0.0, 0.02, 0.05] {
            for dr in [-0.03, 0.0, 0.01] {
                let r = RealizedBudgets {
                    kappa_bar: 0.5 + dk,
                    rho_bar: 0.7 + dr,
                    eta_bar: 0.6,
                    effective_steps: 8,
                };
                let inside = dk.abs() <= t.tau + 1e-12 && dr.abs() <= t.tau + 1e-12;
                assert_eq!(compute_penalty(&r, &t) == 0.0, inside, "dk={dk} dr={dr}");
            }
        }
    }

    #[test]
    fn realized_budgets_average_effective_steps_only() {
        use crate::effknobs::ActionTuple;
        let s = ActionSpace::preset("2l").unwrap();
        let t = BudgetTarget::for_space(&s, 0.4, 0.9, 0.6);
        let acts = vec![
            ActionTuple::new(0.1, 0.6, 5),
            ActionTuple::new(1.0, 1.0, 16),
            ActionTuple::new(0.1, 1.0, 16),
        ];
        let eff = vec![true, false, true];
        let r = RealizedBudgets::from_actions(&acts, &eff, &t);
        assert_eq!(r.effective_steps, 2);
        assert!((r.kappa_bar - 0.1).abs() < 1e-6);
        assert!((r.rho_bar - 0.8).abs() < 1e-6);
        assert!((r.eta_bar - (5.0 / 16.0 + 1.0) / 2.0).abs() < 1e-12);

        let none = RealizedBudgets::from_actions(&acts, &[false, false, false], &t);
        assert_eq!(none.effective_steps, 0);
        assert_eq!(none.kappa_bar, t.c_kappa);
        assert_eq!(none.rho_bar, t.c_rho);
        assert_eq!(none.eta_bar, t.c_eta);
    }

    #[test]
    fn sample_targets_within_ranges_and_deterministic() {
        let s = ActionSpace::preset("fl").unwrap();
        let ranges = BudgetRanges::default();
        for i in 0..50 {
            let t = sample_targets(&ranges, &s, 0.02, (100.0, 100.0, 200.0), 9, i).unwrap();
            assert!(t.c_kappa >= 0.1 && t.c_kappa <= 1.0);
            assert!(t.c_rho >= 0.4 && t.c_rho <= 1.0);
            assert!(t.c_eta >= 0.3125 && t.c_eta <= 1.0);
        }
        let a = sample_targets(&ranges, &s, 0.02, (100.0, 100.0, 200.0), 9, 7).unwrap();
        let b = sample_targets(&ranges, &s, 0.02, (100.0, 100.0, 200.0), 9, 7).unwrap();
        assert_eq!(a, b);

        let point = BudgetRanges {
            kappa: (0.5, 0.5),
            rho: (0.5, 0.5),
            eta: (0.5, 0.5),
        };
        let t = sample_targets(&point, &s, 0.02, (1.0, 1.0, 1.0), 1, 0).unwrap();
        assert_eq!((t.c_kappa, t.c_rho, t.c_eta), (0.5, 0.5, 0.5));

        let bad = BudgetRanges {
            kappa: (0.9, 0.1),
            ..BudgetRanges::default()
        };
        assert!(sample_targets(&bad, &s, 0.02, (1.0, 1.0, 1.0), 1, 0).is_err());
    }

    #[test]
    fn bracket_finds_adjacent_levels() {
        let s = ActionSpace::preset("2l").unwrap();
        // kappa levels {0.1, 1.0}
        assert_eq!(s.bracket(Axis::Kappa, 0.5), (0, 1, false));
        assert_eq!(s.bracket(Axis::Kappa, 0.1), (0, 0, false));
        assert_eq!(s.bracket(Axis::Kappa, 1.0), (1, 1, false));
        assert_eq!(s.bracket(Axis::Kappa, 0.05), (0, 0, true));
        assert_eq!(s.bracket(Axis::Kappa, 1.5), (1, 1, true));
    }
}
