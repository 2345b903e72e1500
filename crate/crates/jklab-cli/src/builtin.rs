//! Experiments shipped with the binary.

/// `(name, TOML text)` for every built-in experiment, sorted by name.
pub const BUILTINS: &[(&str, &str)] = &[
    ("example_1_1", include_str!("../experiments/example_1_1.toml")),
    ("example_5_2", include_str!("../experiments/example_5_2.toml")),
    ("example_5_3_ujs_phi", include_str!("../experiments/example_5_3_ujs_phi.toml")),
];

pub fn lookup(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// One line per experiment: `name<TAB>description`, sorted by name.
pub fn list_lines() -> Vec<String> {
    let mut lines: Vec<String> = BUILTINS
        .iter()
        .map(|(name, text)| {
            let description = crate::config::ExperimentConfig::parse(text)
                .map(|c| c.description)
                .unwrap_or_default();
            format!("{name}\t{description}")
        })
        .collect();
    lines.sort();
    lines
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    #[test]
    fn builtins_parse_and_match_their_names() {
        for (name, text) in BUILTINS {
            let c = ExperimentConfig::parse(text).unwrap();
            assert_eq!(&c.name, name);
            assert!(c.description.contains("Example"));
        }
    }

    #[test]
    fn builtins_are_sorted() {
        let names: Vec<&str> = BUILTINS.iter().map(|(n, _)| *n).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
    }
}
