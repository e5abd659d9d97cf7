//! Link budget, maximum allowed pathloss (MAPL), cell radius and site count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::noise_floor_dbm;
use crate::propagation::{pathloss_db, Condition, PathlossQuery, MAX_D2D_M, MIN_D2D_M};
use crate::scenario::{Environment, Scenario};

/// Bisection stops once the bracket is narrower than this.
pub const RADIUS_TOLERANCE_M: f64 = 1e-4;

/// Resolution at which the reported radius is guaranteed maximal.
pub const RADIUS_RESOLUTION_M: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub tx_antenna_gain_dbi: f64,
    pub rx_antenna_gain_dbi: f64,
    pub cable_loss_db: f64,
    pub penetration_loss_db: f64,
    pub body_loss_db: f64,
    pub interference_margin_db: f64,
    pub shadow_margin_db: f64,
    pub noise_figure_db: f64,
    pub required_sinr_db: f64,
    pub bandwidth_mhz: f64,
}

/// A link budget without bandwidth; each band supplies its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetTemplate {
    pub tx_power_dbm: f64,
    pub tx_antenna_gain_dbi: f64,
    pub rx_antenna_gain_dbi: f64,
    pub cable_loss_db: f64,
    pub penetration_loss_db: f64,
    pub body_loss_db: f64,
    pub interference_margin_db: f64,
    pub shadow_margin_db: f64,
    pub noise_figure_db: f64,
    pub required_sinr_db: f64,
}

impl Default for BudgetTemplate {
    /// Illustrative macro downlink budget; not calibrated to a real network.
    fn default() -> Self {
        BudgetTemplate {
            tx_power_dbm: 43.0,
            tx_antenna_gain_dbi: 17.0,
            rx_antenna_gain_dbi: 0.0,
            cable_loss_db: 3.0,
            penetration_loss_db: 0.0,
            body_loss_db: 0.0,
            interference_margin_db: 4.0,
            shadow_margin_db: 6.0,
            noise_figure_db: 7.0,
            required_sinr_db: 0.0,
        }
    }
}

impl BudgetTemplate {
    pub fn with_bandwidth(&self, bandwidth_mhz: f64) -> LinkBudget {
        LinkBudget {
            tx_power_dbm: self.tx_power_dbm,
            tx_antenna_gain_dbi: self.tx_antenna_gain_dbi,
            rx_antenna_gain_dbi: self.rx_antenna_gain_dbi,
            cable_loss_db: self.cable_loss_db,
            penetration_loss_db: self.penetration_loss_db,
            body_loss_db: self.body_loss_db,
            interference_margin_db: self.interference_margin_db,
            shadow_margin_db: self.shadow_margin_db,
            noise_figure_db: self.noise_figure_db,
            required_sinr_db: self.required_sinr_db,
            bandwidth_mhz,
        }
    }

    pub(crate) fn problems(&self) -> Vec<String> {
        self.with_bandwidth(1.0).problems()
    }
}

impl LinkBudget {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let nonneg = [
            ("cable_loss_db", self.cable_loss_db),
            ("penetration_loss_db", self.penetration_loss_db),
            ("body_loss_db", self.body_loss_db),
            ("interference_margin_db", self.interference_margin_db),
            ("shadow_margin_db", self.shadow_margin_db),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(format!("{name} must be >= 0, got {v}"));
            }
        }
        let finite = [
            ("tx_power_dbm", self.tx_power_dbm),
            ("tx_antenna_gain_dbi", self.tx_antenna_gain_dbi),
            ("rx_antenna_gain_dbi", self.rx_antenna_gain_dbi),
            ("noise_figure_db", self.noise_figure_db),
            ("required_sinr_db", self.required_sinr_db),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                out.push(format!("{name} must be finite"));
            }
        }
        if !(self.bandwidth_mhz > 0.0 && self.bandwidth_mhz.is_finite()) {
            out.push(format!("bandwidth_mhz must be > 0, got {}", self.bandwidth_mhz));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.problems().into_iter().next() {
            Some(p) => Err(Error::InvalidArgument(format!("link budget: {p}"))),
            None => Ok(()),
        }
    }
}

/// Thermal floor over the budget bandwidth plus noise figure and required SINR.
pub fn receiver_sensitivity_dbm(budget: &LinkBudget) -> f64 {
    noise_floor_dbm(budget.bandwidth_mhz, budget.noise_figure_db) + budget.required_sinr_db
}

pub fn max_allowed_pathloss_db(budget: &LinkBudget) -> f64 {
    budget.tx_power_dbm + budget.tx_antenna_gain_dbi + budget.rx_antenna_gain_dbi
        - budget.cable_loss_db
        - budget.penetration_loss_db
        - budget.body_loss_db
        - budget.interference_margin_db
        - budget.shadow_margin_db
        - receiver_sensitivity_dbm(budget)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusQuery {
    pub environment: Environment,
    pub condition: Condition,
    pub fc_ghz: f64,
    pub h_bs_m: f64,
    pub h_ut_m: f64,
}

impl RadiusQuery {
    fn pathloss_at(&self, d2d_m: f64) -> Result<f64> {
        pathloss_db(&PathlossQuery {
            d2d_m,
            fc_ghz: self.fc_ghz,
            h_bs_m: self.h_bs_m,
            h_ut_m: self.h_ut_m,
            environment: self.environment,
            condition: self.condition,
        })
    }
}

/// Outcome of a radius inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radius {
    pub radius_m: f64,
    /// The budget reaches beyond the model envelope; the radius is the
    /// envelope limit.
    pub capped: bool,
}

/// Largest ground distance whose pathloss does not exceed `mapl_db`.
pub fn cell_radius(mapl_db: f64, q: &RadiusQuery) -> Result<Radius> {
    let pl_min = q.pathloss_at(MIN_D2D_M)?;
    if mapl_db < pl_min {
        return Err(Error::Infeasible(format!(
            "MAPL {mapl_db:.2} dB is below the pathloss at {MIN_D2D_M} m ({pl_min:.2} dB)"
        )));
    }
    if q.pathloss_at(MAX_D2D_M)? <= mapl_db {
        return Ok(Radius {
            radius_m: MAX_D2D_M,
            capped: true,
        });
    }
    let (mut lo, mut hi) = (MIN_D2D_M, MAX_D2D_M);
    while hi - lo > RADIUS_TOLERANCE_M {
        let mid = 0.5 * (lo + hi);
        if q.pathloss_at(mid)? <= mapl_db {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Radius {
        radius_m: lo,
        capped: false,
    })
}

pub fn cell_radius_m(
    mapl_db: f64,
    environment: Environment,
    condition: Condition,
    fc_ghz: f64,
    h_bs_m: f64,
    h_ut_m: f64,
) -> Result<f64> {
    cell_radius(
        mapl_db,
        &RadiusQuery {
            environment,
            condition,
            fc_ghz,
            h_bs_m,
            h_ut_m,
        },
    )
    .map(|r| r.radius_m)
}

/// Area of a regular hexagon with circumradius `radius_m`.
pub fn hexagon_area_m2(radius_m: f64) -> f64 {
    1.5 * 3f64.sqrt() * radius_m * radius_m
}

/// Hexagonal cells needed to tile `area_m2`; at least one.
pub fn required_site_count(area_m2: f64, radius_m: f64) -> Result<u64> {
    if !(area_m2 > 0.0 && radius_m > 0.0 && area_m2.is_finite() && radius_m.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "area and radius must be positive, got {area_m2} m² and {radius_m} m"
        )));
    }
    Ok(((area_m2 / hexagon_area_m2(radius_m)).ceil() as u64).max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPlan {
    pub band_id: String,
    pub center_freq_ghz: f64,
    pub bandwidth_mhz: f64,
    pub sensitivity_dbm: f64,
    pub mapl_db: f64,
    pub cell_radius_m: f64,
    pub radius_capped: bool,
    pub site_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub scenario: String,
    pub environment: Environment,
    pub condition: Condition,
    pub area_m2: f64,
    pub h_bs_m: f64,
    pub h_ut_m: f64,
    pub budget: BudgetTemplate,
    /// The budget is the built-in template rather than scenario input.
    pub budget_is_default: bool,
    pub bands: Vec<BandPlan>,
}

/// Dimensioning for every band accepted by `band_filter`.
pub fn plan(scenario: &Scenario, band_filter: impl Fn(&crate::scenario::Band) -> bool) -> Result<PlanResult> {
    let h_bs = scenario.planning_h_bs();
    let h_ut = scenario.ut.height_m;
    let area = scenario.area.area_m2();
    let template = scenario.planning.budget;
    let mut bands = Vec::new();
    for band in scenario.bands.iter().filter(|b| band_filter(b)) {
        let budget = template.with_bandwidth(band.bandwidth_mhz);
        budget.validate()?;
        let mapl = max_allowed_pathloss_db(&budget);
        let radius = cell_radius(
            mapl,
            &RadiusQuery {
                environment: scenario.environment,
                condition: scenario.planning.condition,
                fc_ghz: band.center_freq_ghz,
                h_bs_m: h_bs,
                h_ut_m: h_ut,
            },
        )?;
        bands.push(BandPlan {
            band_id: band.id.clone(),
            center_freq_ghz: band.center_freq_ghz,
            bandwidth_mhz: band.bandwidth_mhz,
            sensitivity_dbm: receiver_sensitivity_dbm(&budget),
            mapl_db: mapl,
            cell_radius_m: radius.radius_m,
            radius_capped: radius.capped,
            site_count: required_site_count(area, radius.radius_m)?,
        });
    }
    Ok(PlanResult {
        scenario: scenario.name.clone(),
        environment: scenario.environment,
        condition: scenario.planning.condition,
        area_m2: area,
        h_bs_m: h_bs,
        h_ut_m: h_ut,
        budget: template,
        budget_is_default: template == BudgetTemplate::default(),
        bands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plan_flags_the_built_in_budget() {
        let mut s = crate::fixtures::demo();
        s.planning.budget = BudgetTemplate::default();
        assert!(plan(&s, |_| true).unwrap().budget_is_default);
        s.planning.budget.tx_power_dbm = 40.0;
        let p = plan(&s, |b| b.id == "n78").unwrap();
        assert!(!p.budget_is_default);
        assert_eq!(p.bands.len(), 1);
    }

    fn zero_budget(bw: f64) -> LinkBudget {
        LinkBudget {
            tx_power_dbm: 30.0,
            tx_antenna_gain_dbi: 0.0,
            rx_antenna_gain_dbi: 0.0,
            cable_loss_db: 0.0,
            penetration_loss_db: 0.0,
            body_loss_db: 0.0,
            interference_margin_db: 0.0,
            shadow_margin_db: 0.0,
            noise_figure_db: 0.0,
            required_sinr_db: 0.0,
            bandwidth_mhz: bw,
        }
    }

    #[test]
    fn sensitivity_examples() {
        let mut b = zero_budget(100.0);
        b.noise_figure_db = 7.0;
        // -174 + 10 log10(1e8) + 7
        assert!((receiver_sensitivity_dbm(&b) - -87.0).abs() < 1e-9);
        let floor = zero_budget(1e-6);
        assert!((receiver_sensitivity_dbm(&floor) - -174.0).abs() < 1e-9);
        let mut nf = b;
        nf.noise_figure_db += 3.0;
        assert!((receiver_sensitivity_dbm(&nf) - receiver_sensitivity_dbm(&b) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn mapl_examples() {
        // sensitivity -100 dBm: 1 Hz at NF = 74 dB
        let mut b = zero_budget(1e-6);
        b.noise_figure_db = 74.0;
        assert!((max_allowed_pathloss_db(&b) - 130.0).abs() < 1e-9);

        let demo = BudgetTemplate::default().with_bandwidth(100.0);
        // 43 + 17 + 0 - 3 - (4 + 6) - (-87)
        assert!((max_allowed_pathloss_db(&demo) - 134.0).abs() < 1e-9);

        let mut more_im = demo;
        more_im.interference_margin_db += 2.0;
        assert!((max_allowed_pathloss_db(&demo) - max_allowed_pathloss_db(&more_im) - 2.0).abs() < 1e-12);
        let mut more_tx = demo;
        more_tx.tx_power_dbm += 1.0;
        assert!((max_allowed_pathloss_db(&more_tx) - max_allowed_pathloss_db(&demo) - 1.0).abs() < 1e-12);
    }

    fn uma_los(fc: f64) -> RadiusQuery {
        RadiusQuery {
            environment: Environment::UMa,
            condition: Condition::Los,
            fc_ghz: fc,
            h_bs_m: 25.0,
            h_ut_m: 1.5,
        }
    }

    #[test]
    fn radius_inverts_pathloss_example() {
        let mapl = 28.0 + 22.0 * (100.0f64.powi(2) + 23.5f64.powi(2)).sqrt().log10() + 20.0 * 3.5f64.log10();
        let r = cell_radius(mapl, &uma_los(3.5)).unwrap();
        assert!((r.radius_m - 100.0).abs() < 0.1, "{}", r.radius_m);
        // the rounded value lands within a few centimeters too
        let r = cell_radius_m(83.14, Environment::UMa, Condition::Los, 3.5, 25.0, 1.5).unwrap();
        assert!((r - 100.0).abs() < 0.1, "{r}");
    }

    #[test]
    fn radius_infeasible_below_minimum_distance() {
        let err = cell_radius(20.0, &uma_los(3.5)).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn radius_shrinks_with_frequency() {
        let b = BudgetTemplate::default().with_bandwidth(100.0);
        let mapl = max_allowed_pathloss_db(&b);
        let mut q = uma_los(3.5);
        q.condition = Condition::Nlos;
        let r35 = cell_radius(mapl, &q).unwrap().radius_m;
        q.fc_ghz = 28.0;
        let r28 = cell_radius(mapl, &q).unwrap().radius_m;
        assert!(r28 < r35);
    }

    #[test]
    fn radius_capped_at_envelope() {
        let r = cell_radius(400.0, &uma_los(3.5)).unwrap();
        assert!(r.capped);
        assert_eq!(r.radius_m, MAX_D2D_M);
    }

    #[test]
    fn site_count_examples() {
        // one hexagon of R = 1 km covers 2.598076 km²
        assert_eq!(required_site_count(2.598e6, 1000.0).unwrap(), 1);
        assert_eq!(required_site_count(2.599e6, 1000.0).unwrap(), 2);
        assert_eq!(required_site_count(1.0, 1000.0).unwrap(), 1);
        let big = required_site_count(1e9, 1000.0).unwrap() as f64;
        let half = required_site_count(1e9, 500.0).unwrap() as f64;
        assert!((half / big - 4.0).abs() < 0.01);
        assert!(required_site_count(0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn radius_round_trip(mapl in 60.0f64..170.0, fc in 0.5f64..100.0, nlos in any::<bool>(), uma in any::<bool>()) {
            let q = RadiusQuery {
                environment: if uma { Environment::UMa } else { Environment::UMi },
                condition: if nlos { Condition::Nlos } else { Condition::Los },
                fc_ghz: fc,
                h_bs_m: if uma { 25.0 } else { 10.0 },
                h_ut_m: 1.5,
            };
            match cell_radius(mapl, &q) {
                Ok(r) if !r.capped => {
                    let pl = q.pathloss_at(r.radius_m).unwrap();
                    prop_assert!(pl <= mapl && pl >= mapl - 0.05);
                    if r.radius_m + RADIUS_RESOLUTION_M <= MAX_D2D_M {
                        prop_assert!(q.pathloss_at(r.radius_m + RADIUS_RESOLUTION_M).unwrap() > mapl);
                    }
                }
                Ok(_) => {}
                Err(Error::Infeasible(_)) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }

        #[test]
        fn radius_monotone_in_mapl(a in 80.0f64..160.0, d in 0.0f64..20.0) {
            let q = uma_los(3.5);
            let r1 = cell_radius(a, &q).unwrap().radius_m;
            let r2 = cell_radius(a + d, &q).unwrap().radius_m;
            prop_assert!(r2 >= r1);
        }

        #[test]
        fn site_count_covers_area(area in 1.0f64..1e9, radius in 1.0f64..10_000.0) {
            let n = required_site_count(area, radius).unwrap();
            prop_assert!(n as f64 * hexagon_area_m2(radius) >= area);
        }
    }
}
