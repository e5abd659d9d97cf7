//! Bundled example scenarios.

use crate::scenario::Scenario;

pub const DEMO_JSON: &str = include_str!("../fixtures/demo.json");
pub const DEMO_28GHZ_JSON: &str = include_str!("../fixtures/demo_28ghz.json");

/// Seven three-sector sites at 500 m spacing on n78 with one external
/// interferer north of the centre site. Two alternative bands are declared.
pub fn demo() -> Scenario {
    Scenario::from_json_str(DEMO_JSON).expect("bundled demo scenario is valid")
}

/// The demo layout on n257 with mmWave array gain.
pub fn demo_28ghz() -> Scenario {
    Scenario::from_json_str(DEMO_28GHZ_JSON).expect("bundled 28 GHz scenario is valid")
}
