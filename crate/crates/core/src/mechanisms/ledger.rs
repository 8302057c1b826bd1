use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::policy::{AccessPolicy, RejectReason};
use crate::query::LinearQuery;

/// Relative slack on cap comparisons, so that a cap split evenly over a quota
/// admits exactly `quota` charges despite rounding.
pub const CAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UnitSpend {
    pub epsilon: f64,
    pub delta: f64,
    pub charges: usize,
}

/// Per-unit `(epsilon, delta)` spending with basic composition inside each
/// unit. Different units never aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    epsilon_cap: f64,
    delta_cap: f64,
    spent: BTreeMap<usize, UnitSpend>,
}

impl BudgetLedger {
    pub fn new(epsilon_cap: f64, delta_cap: f64) -> Result<Self> {
        if !(epsilon_cap >= 0.0) || !(0.0..=1.0).contains(&delta_cap) {
            return Err(Error::Config(format!(
                "ledger caps must satisfy epsilon >= 0 and delta in [0, 1], got ({epsilon_cap}, {delta_cap})"
            )));
        }
        Ok(BudgetLedger {
            epsilon_cap,
            delta_cap,
            spent: BTreeMap::new(),
        })
    }

    pub fn epsilon_cap(&self) -> f64 {
        self.epsilon_cap
    }

    pub fn delta_cap(&self) -> f64 {
        self.delta_cap
    }

    fn fits(spent: f64, add: f64, cap: f64) -> bool {
        spent + add <= cap * (1.0 + CAP_TOLERANCE) + f64::MIN_POSITIVE
    }

    /// Charges `(epsilon, delta)` to every unit in `units`, all or nothing.
    pub fn charge_units(
        &mut self,
        units: &[usize],
        epsilon: f64,
        delta: f64,
    ) -> std::result::Result<(), RejectReason> {
        let ok = units.iter().all(|u| {
            let s = self.spent.get(u).cloned().unwrap_or_default();
            Self::fits(s.epsilon, epsilon, self.epsilon_cap)
                && Self::fits(s.delta, delta, self.delta_cap)
        });
        if !ok {
            return Err(RejectReason::Budget);
        }
        for u in units {
            let s = self.spent.entry(*u).or_default();
            s.epsilon += epsilon;
            s.delta += delta;
            s.charges += 1;
        }
        Ok(())
    }

    pub fn spent(&self, unit: usize) -> UnitSpend {
        self.spent.get(&unit).cloned().unwrap_or_default()
    }

    pub fn units(&self) -> &BTreeMap<usize, UnitSpend> {
        &self.spent
    }

    /// True when no unit exceeds its caps.
    pub fn within_caps(&self) -> bool {
        self.spent.values().all(|s| {
            Self::fits(0.0, s.epsilon, self.epsilon_cap) && Self::fits(0.0, s.delta, self.delta_cap)
        })
    }
}

/// Charges `q`'s units under `policy`. `q` must already be admitted.
pub fn charge(
    ledger: &mut BudgetLedger,
    policy: &AccessPolicy,
    q: &LinearQuery,
    epsilon: f64,
    delta: f64,
) -> std::result::Result<(), RejectReason> {
    ledger.charge_units(&policy.units(q), epsilon, delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_tenths_fill_a_unit_cap() {
        let mut l = BudgetLedger::new(1.0, 0.0).unwrap();
        for _ in 0..10 {
            assert_eq!(l.charge_units(&[3], 0.1, 0.0), Ok(()));
        }
        assert_eq!(l.charge_units(&[3], 0.1, 0.0), Err(RejectReason::Budget));
        assert_eq!(l.spent(3).charges, 10);
    }

    #[test]
    fn units_do_not_aggregate() {
        let m = 50;
        let mut l = BudgetLedger::new(1.0, 1e-5).unwrap();
        for b in 1..=m {
            assert_eq!(l.charge_units(&[b], 1.0, 1e-5), Ok(()));
        }
        assert!(l.within_caps());
        assert_eq!(l.units().len(), m);
    }

    #[test]
    fn delta_cap_is_enforced() {
        let mut l = BudgetLedger::new(10.0, 1e-6).unwrap();
        assert_eq!(l.charge_units(&[1], 0.1, 5e-7), Ok(()));
        assert_eq!(l.charge_units(&[1], 0.1, 5e-7), Ok(()));
        assert_eq!(l.charge_units(&[1], 0.1, 5e-7), Err(RejectReason::Budget));
    }

    #[test]
    fn multi_unit_charges_are_all_or_nothing() {
        let mut l = BudgetLedger::new(1.0, 0.0).unwrap();
        l.charge_units(&[2], 1.0, 0.0).unwrap();
        assert_eq!(
            l.charge_units(&[1, 2, 3], 0.5, 0.0),
            Err(RejectReason::Budget)
        );
        assert_eq!(l.spent(1), UnitSpend::default());
        assert_eq!(l.spent(3), UnitSpend::default());
    }

    #[test]
    fn quota_split_admits_exactly_quota() {
        let cap = 0.5;
        let quota = 20;
        let mut l = BudgetLedger::new(cap, 0.0).unwrap();
        let eps = cap / quota as f64;
        for _ in 0..quota {
            assert_eq!(l.charge_units(&[1], eps, 0.0), Ok(()));
        }
        assert_eq!(l.charge_units(&[1], eps, 0.0), Err(RejectReason::Budget));
    }
}
