//! The frozen scenario suite shipped with the crate.

use ancova_core::SimPlan;

use crate::error::{Error, Result};

pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    json: &'static str,
}

pub const SCENARIOS: &[Scenario] = &[
    Scenario {
        name: "S0",
        description: "pi = 0.5, unequal slopes: model-based inference valid",
        json: include_str!("../scenarios/S0.json"),
    },
    Scenario {
        name: "S1",
        description: "pi = 0.7, unequal slopes: model-based anticonservative",
        json: include_str!("../scenarios/S1.json"),
    },
    Scenario {
        name: "S1-swap",
        description: "pi = 0.3 with the S1 residual variances: model-based conservative",
        json: include_str!("../scenarios/S1-swap.json"),
    },
    Scenario {
        name: "S2",
        description: "pi = 0.7, equal slopes and noise: model-based exact",
        json: include_str!("../scenarios/S2.json"),
    },
    Scenario {
        name: "S3",
        description: "pi = 0.7, covariate prognostic to different extents, Var(Y|A) equal",
        json: include_str!("../scenarios/S3.json"),
    },
    Scenario {
        name: "W0",
        description: "pi = 0.7, no covariates: Welch case",
        json: include_str!("../scenarios/W0.json"),
    },
];

pub fn names() -> Vec<&'static str> {
    SCENARIOS.iter().map(|s| s.name).collect()
}

impl Scenario {
    pub fn plan(&self) -> SimPlan {
        crate::json::from_str(self.json, format!("scenarios/{}.json", self.name))
            .expect("bundled scenario files parse")
    }
}

pub fn find(name: &str) -> Result<&'static Scenario> {
    SCENARIOS
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownScenario {
            name: name.to_owned(),
            available: names().join(", "),
        })
}
