//! Bundled domains, problems and disturbance files.

use crate::hddl::{parse_disturbances, parse_domain, parse_problem, DisturbanceFile, ParseError};
use crate::model::{Domain, Problem};

pub struct Bundle {
    pub name: &'static str,
    pub domain: &'static str,
    pub problem: &'static str,
    pub disturbances: &'static [(&'static str, &'static str)],
}

pub const INCOMPARABLE: Bundle = Bundle {
    name: "incomparable",
    domain: include_str!("../data/incomparable/domain.hddl"),
    problem: include_str!("../data/incomparable/problem.hddl"),
    disturbances: &[
        (
            "anomaly",
            include_str!("../data/incomparable/anomaly.dist.hddl"),
        ),
        ("noop", include_str!("../data/incomparable/noop.dist.hddl")),
    ],
};

pub const SATELLITE: Bundle = Bundle {
    name: "satellite",
    domain: include_str!("../data/satellite/domain.hddl"),
    problem: include_str!("../data/satellite/problem.hddl"),
    disturbances: &[
        (
            "decalibrate",
            include_str!("../data/satellite/decalibrate.dist.hddl"),
        ),
        ("random", include_str!("../data/satellite/random.dist.hddl")),
    ],
};

pub const ROVERS: Bundle = Bundle {
    name: "rovers",
    domain: include_str!("../data/rovers/domain.hddl"),
    problem: include_str!("../data/rovers/problem.hddl"),
    disturbances: &[
        (
            "obstruct",
            include_str!("../data/rovers/obstruct.dist.hddl"),
        ),
        ("random", include_str!("../data/rovers/random.dist.hddl")),
    ],
};

pub const OPENSTACKS: Bundle = Bundle {
    name: "openstacks",
    domain: include_str!("../data/openstacks/domain.hddl"),
    problem: include_str!("../data/openstacks/problem.hddl"),
    disturbances: &[(
        "random",
        include_str!("../data/openstacks/random.dist.hddl"),
    )],
};

pub const TRAVEL: Bundle = Bundle {
    name: "travel",
    domain: include_str!("../data/travel/domain.hddl"),
    problem: include_str!("../data/travel/problem.hddl"),
    disturbances: &[
        ("cancel", include_str!("../data/travel/cancel.dist.hddl")),
        ("random", include_str!("../data/travel/random.dist.hddl")),
    ],
};

pub const ALL: &[&Bundle] = &[&INCOMPARABLE, &SATELLITE, &ROVERS, &OPENSTACKS, &TRAVEL];

pub fn find(name: &str) -> Option<&'static Bundle> {
    ALL.iter().copied().find(|b| b.name == name)
}

pub struct Loaded {
    pub domain: Domain,
    pub problem: Problem,
    pub disturbances: Vec<(&'static str, DisturbanceFile)>,
}

impl Bundle {
    pub fn load(&self) -> Result<Loaded, ParseError> {
        let domain = parse_domain(self.domain, &format!("{}/domain.hddl", self.name))?;
        let problem = parse_problem(
            self.problem,
            &format!("{}/problem.hddl", self.name),
            &domain,
        )?;
        let mut disturbances = Vec::new();
        for (n, text) in self.disturbances {
            let file = format!("{}/{n}.dist.hddl", self.name);
            disturbances.push((
                *n,
                parse_disturbances(text, &file, &domain, Some(&problem))?,
            ));
        }
        Ok(Loaded {
            domain,
            problem,
            disturbances,
        })
    }
}
