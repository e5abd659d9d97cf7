//! dB / linear helpers.

/// Boltzmann thermal noise density at 290 K, dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Power sum of dBm terms in the linear domain, summed in iteration order.
pub fn power_sum_dbm<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    linear_to_db(terms.into_iter().map(db_to_linear).sum())
}

/// Thermal noise floor over `bandwidth_mhz` with receiver noise figure `nf_db`.
pub fn noise_floor_dbm(bandwidth_mhz: f64, nf_db: f64) -> f64 {
    THERMAL_NOISE_DBM_HZ + linear_to_db(bandwidth_mhz * 1e6) + nf_db
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn noise_floor_100mhz() {
        assert!((noise_floor_dbm(100.0, 7.0) - -87.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn combined_power_bounds(a in -140.0f64..20.0, b in -140.0f64..20.0) {
            let s = power_sum_dbm([a, b]);
            prop_assert!(s >= a.max(b) - 1e-9);
            prop_assert!(s <= a.max(b) + 3.0103 + 1e-9);
        }
    }

    #[test]
    fn equal_terms_add_three_db() {
        let s = power_sum_dbm([-95.0, -95.0]);
        assert!((s - (-95.0 + 3.0103)).abs() < 1e-3);
        assert!(s - -95.0 <= 3.02);
    }
}
