//! Scenario files compiled into the binary.

const BUNDLED: &[(&str, &str)] = &[
    ("born_two_state", include_str!("../scenarios/born_two_state.toml")),
    ("delta_limit", include_str!("../scenarios/delta_limit.toml")),
    ("exchange_symmetry", include_str!("../scenarios/exchange_symmetry.toml")),
    ("focusing_caustic", include_str!("../scenarios/focusing_caustic.toml")),
    ("free_gaussian", include_str!("../scenarios/free_gaussian.toml")),
    ("harmonic_excited", include_str!("../scenarios/harmonic_excited.toml")),
    ("harmonic_ground", include_str!("../scenarios/harmonic_ground.toml")),
    ("plane_wave", include_str!("../scenarios/plane_wave.toml")),
    ("soft_coulomb_lens", include_str!("../scenarios/soft_coulomb_lens.toml")),
    ("uncertainty_sweep", include_str!("../scenarios/uncertainty_sweep.toml")),
];

/// Bundled names in alphabetical order.
pub fn names() -> Vec<&'static str> {
    let mut names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
    names.sort_unstable();
    names
}

pub fn get(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config;

    #[test]
    fn list_is_sorted_and_complete() {
        let names = names();
        assert!(names.windows(2).all(|w| w[0] < w[1]));
        for required in [
            "free_gaussian",
            "plane_wave",
            "harmonic_ground",
            "harmonic_excited",
            "focusing_caustic",
            "soft_coulomb_lens",
            "born_two_state",
            "uncertainty_sweep",
            "delta_limit",
        ] {
            assert!(names.contains(&required), "{required}");
        }
    }

    #[test]
    fn every_bundled_scenario_validates_under_its_own_name() {
        for (name, text) in BUNDLED {
            let p = config::prepare(config::parse(text, &[]).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&p.scenario.name, name);
        }
    }
}
