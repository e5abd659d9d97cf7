//! Horizontal sector antenna pattern.

use serde::{Deserialize, Serialize};

use crate::geometry::wrap_angle_deg;
use crate::scenario::Sector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaPattern {
    pub beamwidth_3db_deg: f64,
    /// Maximum attenuation, A_m.
    pub front_to_back_db: f64,
}

impl AntennaPattern {
    pub fn new(beamwidth_3db_deg: f64, front_to_back_db: f64) -> Self {
        AntennaPattern {
            beamwidth_3db_deg,
            front_to_back_db,
        }
    }

    pub fn for_sector(sector: &Sector) -> Self {
        Self::new(sector.beamwidth_3db_deg, sector.front_to_back_db)
    }

    /// `min(12 (θ/θ3dB)², A_m)` for an off-boresight angle θ in degrees.
    pub fn attenuation_db(&self, off_boresight_deg: f64) -> f64 {
        let theta = wrap_angle_deg(off_boresight_deg, 0.0);
        (12.0 * (theta / self.beamwidth_3db_deg).powi(2)).min(self.front_to_back_db)
    }

    /// Attenuation toward compass bearing `bearing_deg` for boresight `azimuth_deg`.
    pub fn attenuation_toward(&self, azimuth_deg: f64, bearing_deg: f64) -> f64 {
        self.attenuation_db(wrap_angle_deg(bearing_deg, azimuth_deg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_points() {
        let p = AntennaPattern::new(65.0, 20.0);
        assert_eq!(p.attenuation_db(0.0), 0.0);
        assert!((p.attenuation_db(32.5) - 3.0).abs() < 1e-12);
        assert!((p.attenuation_db(-32.5) - 3.0).abs() < 1e-12);
        assert_eq!(p.attenuation_db(180.0), 20.0);
        assert_eq!(p.attenuation_toward(90.0, 270.0), 20.0);
        assert_eq!(p.attenuation_toward(350.0, 10.0), p.attenuation_db(20.0));
    }

    proptest! {
        #[test]
        fn bounded_and_symmetric(theta in -720.0f64..720.0, bw in 10.0f64..120.0, am in 0.0f64..40.0) {
            let p = AntennaPattern::new(bw, am);
            let a = p.attenuation_db(theta);
            prop_assert!((0.0..=am).contains(&a));
            prop_assert!((a - p.attenuation_db(-theta)).abs() < 1e-9);
        }
    }
}
