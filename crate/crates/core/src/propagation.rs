//! Large-scale propagation for urban macro (UMa) and urban micro street
//! canyon (UMi) deployments, following the closed forms of 3GPP TR 38.901
//! Tables 7.4.1-1 (pathloss), 7.4.2-1 (LOS probability) and the shadow
//! fading standard deviations listed alongside the pathloss models.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::keyed_rng;
use crate::scenario::Environment;

/// Propagation speed used by TR 38.901 for the breakpoint distance.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

pub const MIN_D2D_M: f64 = 1.0;
pub const MAX_D2D_M: f64 = 10_000.0;
pub const MIN_FC_GHZ: f64 = 0.5;
pub const MAX_FC_GHZ: f64 = 100.0;

/// Effective environment height used by the breakpoint distance.
const EFFECTIVE_ENV_HEIGHT_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "LOS")]
    Los,
    #[serde(rename = "NLOS")]
    Nlos,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathlossQuery {
    /// Ground distance between base station and terminal.
    pub d2d_m: f64,
    pub fc_ghz: f64,
    pub h_bs_m: f64,
    pub h_ut_m: f64,
    pub environment: Environment,
    pub condition: Condition,
}

impl PathlossQuery {
    pub fn d3d_m(&self) -> f64 {
        self.d2d_m.hypot(self.h_bs_m - self.h_ut_m)
    }

    /// Breakpoint distance d'_BP with 1 m effective-height offsets.
    pub fn breakpoint_m(&self) -> f64 {
        let h_bs = self.h_bs_m - EFFECTIVE_ENV_HEIGHT_M;
        let h_ut = self.h_ut_m - EFFECTIVE_ENV_HEIGHT_M;
        4.0 * h_bs * h_ut * self.fc_ghz * 1e9 / SPEED_OF_LIGHT
    }

    fn check(&self) -> Result<()> {
        if !(MIN_D2D_M..=MAX_D2D_M).contains(&self.d2d_m) {
            return Err(Error::Domain(format!(
                "d2d = {} m outside [{MIN_D2D_M}, {MAX_D2D_M}] m",
                self.d2d_m
            )));
        }
        if !(MIN_FC_GHZ..=MAX_FC_GHZ).contains(&self.fc_ghz) {
            return Err(Error::Domain(format!(
                "fc = {} GHz outside [{MIN_FC_GHZ}, {MAX_FC_GHZ}] GHz",
                self.fc_ghz
            )));
        }
        // the breakpoint model needs heights above the 1 m effective environment height
        let h_ok = self.h_bs_m > EFFECTIVE_ENV_HEIGHT_M
            && self.h_bs_m.is_finite()
            && self.h_ut_m >= EFFECTIVE_ENV_HEIGHT_M
            && self.h_ut_m.is_finite();
        if !h_ok {
            return Err(Error::Domain(format!(
                "antenna heights must be h_bs > 1 m and h_ut >= 1 m, got h_bs = {}, h_ut = {}",
                self.h_bs_m, self.h_ut_m
            )));
        }
        Ok(())
    }
}

/// Pathloss in dB. NLOS values are lower-bounded by the LOS value at the same
/// geometry.
pub fn pathloss_db(q: &PathlossQuery) -> Result<f64> {
    q.check()?;
    let los = los_pathloss(q);
    Ok(match q.condition {
        Condition::Los => los,
        Condition::Nlos => los.max(nlos_pathloss_raw(q)),
    })
}

fn los_pathloss(q: &PathlossQuery) -> f64 {
    let d3d = q.d3d_m();
    let lg_fc = 20.0 * q.fc_ghz.log10();
    let d_bp = q.breakpoint_m();
    let dh2 = (q.h_bs_m - q.h_ut_m).powi(2);
    match q.environment {
        Environment::UMa => {
            if q.d2d_m <= d_bp {
                28.0 + 22.0 * d3d.log10() + lg_fc
            } else {
                28.0 + 40.0 * d3d.log10() + lg_fc - 9.0 * (d_bp * d_bp + dh2).log10()
            }
        }
        Environment::UMi => {
            if q.d2d_m <= d_bp {
                32.4 + 21.0 * d3d.log10() + lg_fc
            } else {
                32.4 + 40.0 * d3d.log10() + lg_fc - 9.5 * (d_bp * d_bp + dh2).log10()
            }
        }
    }
}

fn nlos_pathloss_raw(q: &PathlossQuery) -> f64 {
    let d3d = q.d3d_m();
    match q.environment {
        Environment::UMa => {
            13.54 + 39.08 * d3d.log10() + 20.0 * q.fc_ghz.log10() - 0.6 * (q.h_ut_m - 1.5)
        }
        Environment::UMi => {
            35.3 * d3d.log10() + 22.4 + 21.3 * q.fc_ghz.log10() - 0.3 * (q.h_ut_m - 1.5)
        }
    }
}

/// Free-space pathloss, for sanity cross-checks.
pub fn free_space_pathloss_db(distance_m: f64, fc_ghz: f64) -> f64 {
    20.0 * distance_m.log10() + 20.0 * (fc_ghz * 1e9).log10() - 147.55
}

/// Probability that a link at ground distance `d2d_m` is in line of sight.
pub fn los_probability(d2d_m: f64, h_ut_m: f64, environment: Environment) -> f64 {
    if d2d_m <= 18.0 {
        return 1.0;
    }
    let p = match environment {
        Environment::UMi => 18.0 / d2d_m + (-d2d_m / 36.0).exp() * (1.0 - 18.0 / d2d_m),
        Environment::UMa => {
            let c = if h_ut_m <= 13.0 {
                0.0
            } else {
                ((h_ut_m - 13.0) / 10.0).powf(1.5)
            };
            (18.0 / d2d_m + (-d2d_m / 63.0).exp() * (1.0 - 18.0 / d2d_m))
                * (1.0 + c * 1.25 * (d2d_m / 100.0).powi(3) * (-d2d_m / 150.0).exp())
        }
    };
    p.clamp(0.0, 1.0)
}

/// Shadow fading standard deviation in dB.
pub fn shadow_sigma_db(environment: Environment, condition: Condition) -> f64 {
    match (environment, condition) {
        (Environment::UMa, Condition::Los) => 4.0,
        (Environment::UMa, Condition::Nlos) => 6.0,
        (Environment::UMi, Condition::Los) => 4.0,
        (Environment::UMi, Condition::Nlos) => 7.82,
    }
}

/// Seeded log-normal shadow fading, independent per pixel.
///
/// A sample is addressed by `(seed, transmitter id, pixel index)` and does not
/// depend on the order in which pixels are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowFadingField {
    pub seed: u64,
    pub sigma_los_db: f64,
    pub sigma_nlos_db: f64,
    /// Not used yet: samples are spatially uncorrelated.
    pub decorrelation_m: f64,
}

impl ShadowFadingField {
    pub fn for_environment(seed: u64, environment: Environment) -> Self {
        ShadowFadingField {
            seed,
            sigma_los_db: shadow_sigma_db(environment, Condition::Los),
            sigma_nlos_db: shadow_sigma_db(environment, Condition::Nlos),
            decorrelation_m: 50.0,
        }
    }

    pub fn uniform(seed: u64, sigma_db: f64) -> Self {
        ShadowFadingField {
            seed,
            sigma_los_db: sigma_db,
            sigma_nlos_db: sigma_db,
            decorrelation_m: 50.0,
        }
    }

    pub fn disabled() -> Self {
        Self::uniform(0, 0.0)
    }

    pub fn sigma_db(&self, condition: Condition) -> f64 {
        match condition {
            Condition::Los => self.sigma_los_db,
            Condition::Nlos => self.sigma_nlos_db,
        }
    }

    pub fn shadow_fading_db(&self, cell_id: &str, pixel: u64, condition: Condition) -> f64 {
        let sigma = self.sigma_db(condition);
        if sigma == 0.0 {
            return 0.0;
        }
        let z: f64 = StandardNormal.sample(&mut keyed_rng(self.seed, "shadow", cell_id, pixel));
        sigma * z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(env: Environment, cond: Condition, d2d: f64, fc: f64, h_bs: f64, h_ut: f64) -> PathlossQuery {
        PathlossQuery {
            d2d_m: d2d,
            fc_ghz: fc,
            h_bs_m: h_bs,
            h_ut_m: h_ut,
            environment: env,
            condition: cond,
        }
    }

    // Independent evaluation of the closed forms at the example geometries.
    fn hand_uma_los_100m() -> f64 {
        let d3d = (100.0f64 * 100.0 + 23.5 * 23.5).sqrt();
        28.0 + 22.0 * d3d.log10() + 20.0 * 3.5f64.log10()
    }

    fn hand_umi_los_100m() -> f64 {
        let d3d = (100.0f64 * 100.0 + 8.5 * 8.5).sqrt();
        32.4 + 21.0 * d3d.log10() + 20.0 * 3.5f64.log10()
    }

    #[test]
    fn uma_los_reference() {
        let pl = pathloss_db(&q(Environment::UMa, Condition::Los, 100.0, 3.5, 25.0, 1.5)).unwrap();
        assert!((pl - hand_uma_los_100m()).abs() < 1e-9);
        assert!((pl - 83.14).abs() < 0.01, "{pl}");
    }

    #[test]
    fn umi_los_reference() {
        let pl = pathloss_db(&q(Environment::UMi, Condition::Los, 100.0, 3.5, 10.0, 1.5)).unwrap();
        assert!((pl - hand_umi_los_100m()).abs() < 1e-9);
        assert!((pl - 85.31).abs() < 0.01, "{pl}");
    }

    #[test]
    fn uma_los_close_to_free_space() {
        let pl = pathloss_db(&q(Environment::UMa, Condition::Los, 100.0, 3.5, 25.0, 1.5)).unwrap();
        assert!((pl - free_space_pathloss_db(100.0, 3.5)).abs() < 2.0);
    }

    #[test]
    fn nlos_falls_back_to_los_when_lower() {
        // d3d ~ 4 m: the raw NLOS formula is below LOS here
        let mut query = q(Environment::UMa, Condition::Nlos, 2.0, 3.5, 5.0, 1.5);
        assert!(nlos_pathloss_raw(&query) < los_pathloss(&query));
        let nlos = pathloss_db(&query).unwrap();
        query.condition = Condition::Los;
        assert_eq!(nlos, pathloss_db(&query).unwrap());
    }

    #[test]
    fn breakpoint_is_continuous() {
        for env in [Environment::UMa, Environment::UMi] {
            let base = q(env, Condition::Los, 1.0, 3.5, 25.0, 1.5);
            let bp = base.breakpoint_m();
            let lo = los_pathloss(&PathlossQuery { d2d_m: bp, ..base });
            let hi = los_pathloss(&PathlossQuery { d2d_m: bp + 1e-6, ..base });
            assert!((hi - lo).abs() < 1e-4, "{env}: {lo} vs {hi}");
        }
    }

    #[test]
    fn out_of_envelope_is_an_error() {
        assert!(pathloss_db(&q(Environment::UMa, Condition::Los, 0.5, 3.5, 25.0, 1.5)).is_err());
        assert!(pathloss_db(&q(Environment::UMa, Condition::Los, 20_000.0, 3.5, 25.0, 1.5)).is_err());
        assert!(pathloss_db(&q(Environment::UMa, Condition::Los, 100.0, 0.4, 25.0, 1.5)).is_err());
        assert!(pathloss_db(&q(Environment::UMa, Condition::Los, 100.0, 101.0, 25.0, 1.5)).is_err());
    }

    #[test]
    fn los_probability_examples() {
        assert_eq!(los_probability(10.0, 1.5, Environment::UMa), 1.0);
        assert_eq!(los_probability(10.0, 1.5, Environment::UMi), 1.0);
        let hand = 18.0 / 36.0 + (-1.0f64).exp() * (1.0 - 18.0 / 36.0);
        let p = los_probability(36.0, 1.5, Environment::UMi);
        assert!((p - hand).abs() < 1e-12);
        assert!((p - 0.684).abs() < 5e-4);
        assert!(los_probability(10_000.0, 1.5, Environment::UMi) < 0.01);
    }

    #[test]
    fn shadow_fading_zero_sigma_and_determinism() {
        let off = ShadowFadingField::uniform(3, 0.0);
        assert_eq!(off.shadow_fading_db("S1", 17, Condition::Nlos), 0.0);
        let f = ShadowFadingField::uniform(3, 4.0);
        assert_eq!(
            f.shadow_fading_db("S1", 17, Condition::Nlos),
            f.shadow_fading_db("S1", 17, Condition::Nlos)
        );
    }

    #[test]
    fn shadow_fading_marginal_std() {
        let f = ShadowFadingField::uniform(11, 4.0);
        let xs: Vec<f64> = (0..10_000).map(|p| f.shadow_fading_db("S1-A", p, Condition::Los)).collect();
        let sd = crate::stats::std_dev(&xs);
        let m = crate::stats::mean(&xs);
        assert!((3.8..=4.2).contains(&sd), "std {sd}");
        assert!(m.abs() < 0.15, "mean {m}");
    }

    fn env_strategy() -> impl Strategy<Value = Environment> {
        prop_oneof![Just(Environment::UMa), Just(Environment::UMi)]
    }

    fn cond_strategy() -> impl Strategy<Value = Condition> {
        prop_oneof![Just(Condition::Los), Just(Condition::Nlos)]
    }

    proptest! {
        #[test]
        fn increases_with_distance(
            env in env_strategy(), cond in cond_strategy(),
            d in 1.0f64..9000.0, step in 0.5f64..1000.0,
            fc in 0.5f64..100.0, h_bs in 10.0f64..35.0, h_ut in 1.5f64..10.0,
        ) {
            let a = pathloss_db(&q(env, cond, d, fc, h_bs, h_ut)).unwrap();
            let b = pathloss_db(&q(env, cond, (d + step).min(MAX_D2D_M), fc, h_bs, h_ut)).unwrap();
            prop_assume!(d + step <= MAX_D2D_M);
            prop_assert!(b > a, "{a} !< {b}");
        }

        #[test]
        fn increases_with_frequency(
            env in env_strategy(), cond in cond_strategy(),
            d in 1.0f64..10000.0, fc in 0.5f64..90.0, step in 0.1f64..10.0,
            h_bs in 10.0f64..35.0, h_ut in 1.5f64..10.0,
        ) {
            let a = pathloss_db(&q(env, cond, d, fc, h_bs, h_ut)).unwrap();
            let b = pathloss_db(&q(env, cond, d, fc + step, h_bs, h_ut)).unwrap();
            prop_assert!(b > a, "{a} !< {b}");
        }

        #[test]
        fn nlos_never_below_los(
            env in env_strategy(), d in 1.0f64..10000.0, fc in 0.5f64..100.0,
            h_bs in 5.0f64..35.0, h_ut in 1.0f64..22.5,
        ) {
            let los = pathloss_db(&q(env, Condition::Los, d, fc, h_bs, h_ut)).unwrap();
            let nlos = pathloss_db(&q(env, Condition::Nlos, d, fc, h_bs, h_ut)).unwrap();
            prop_assert!(nlos >= los);
        }

        #[test]
        fn los_probability_bounded_and_monotone(
            env in env_strategy(), d in 0.0f64..5000.0, step in 0.0f64..500.0, h_ut in 1.0f64..13.0,
        ) {
            let a = los_probability(d, h_ut, env);
            let b = los_probability(d + step, h_ut, env);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b <= a + 1e-15);
        }
    }
}
