use ealab_runner::{ExperimentConfig, Kind, Overrides, RunError};

fn parse(text: &str, kind: Kind) -> Result<ExperimentConfig, RunError> {
    ExperimentConfig::parse(text, kind, &Overrides::default())
}

fn field_of(e: RunError) -> (String, String) {
    match e {
        RunError::Config { field, reason } => (field, reason),
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn empty_file_gives_defaults() {
    let c = parse("", Kind::Gs).unwrap();
    assert_eq!(c, ExperimentConfig::new(Kind::Gs));
    assert_eq!(c.resolved_topology(), "open");
}

#[test]
fn unknown_top_level_key_is_rejected_by_name() {
    let (_, reason) = field_of(parse("n_reals = 3\n", Kind::Gs).unwrap_err());
    assert!(reason.contains("n_reals"), "{reason}");
}

#[test]
fn unknown_section_key_is_rejected_by_name() {
    let (_, reason) = field_of(parse("[chaos]\nepsilon = 0.1\n", Kind::Chaos).unwrap_err());
    assert!(reason.contains("epsilon"), "{reason}");
}

#[test]
fn declared_kind_must_match_the_command() {
    assert!(parse("kind = \"chaos\"\n", Kind::Chaos).is_ok());
    let (field, _) = field_of(parse("kind = \"chaos\"\n", Kind::Gs).unwrap_err());
    assert_eq!(field, "kind");
}

#[test]
fn flags_override_file_values() {
    let o = Overrides {
        seed: Some(9),
        sizes: Some(vec![3, 5]),
        n_real: Some(7),
        topology: Some("periodic".into()),
        ..Default::default()
    };
    let c = ExperimentConfig::parse("seed = 1\nL = [4]\nn_real = 2\n", Kind::Gs, &o).unwrap();
    assert_eq!((c.seed, c.sizes.clone(), c.n_real), (9, vec![3, 5], 7));
    assert_eq!(c.resolved_topology(), "periodic");
}

#[test]
fn invalid_values_name_their_field() {
    for (text, want) in [
        ("n_real = 0\n", "n_real"),
        ("L = []\n", "L"),
        ("L = [5, 4]\n", "L"),
        ("bc = \"mirror\"\n", "bc"),
        ("[gs]\ncriterion_k = 0\n", "gs.criterion_k"),
    ] {
        let (field, _) = field_of(parse(text, Kind::Gs).unwrap_err());
        assert_eq!(field, want, "{text}");
    }
}

#[test]
fn topology_defaults_follow_the_experiment() {
    assert_eq!(parse("", Kind::Stiffness).unwrap().resolved_topology(), "cylinder");
    assert_eq!(parse("[variance]\nensemble = \"pa\"\n", Kind::Variance).unwrap().resolved_topology(), "periodic");
    assert_eq!(parse("", Kind::Variance).unwrap().resolved_topology(), "open");
}

#[test]
fn hash_ignores_workers_and_out() {
    let a = parse("workers = 1\nout = \"a\"\n", Kind::Chaos).unwrap();
    let b = parse("workers = 8\nout = \"b\"\n", Kind::Chaos).unwrap();
    assert_eq!(a.hash(), b.hash());
    let c = parse("seed = 2\n", Kind::Chaos).unwrap();
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn hash_sees_resolved_defaults() {
    let implicit = parse("", Kind::Stiffness).unwrap();
    let explicit = parse("topology = \"cylinder\"\n", Kind::Stiffness).unwrap();
    assert_eq!(implicit.hash(), explicit.hash());
    let grid = parse("", Kind::Chaos).unwrap();
    let listed = format!("[chaos]\nt_grid = {:?}\n", ealab::chaos::default_t_grid());
    assert_eq!(grid.hash(), parse(&listed, Kind::Chaos).unwrap().hash());
}

#[test]
fn resolved_toml_reparses_to_the_same_hash() {
    for kind in [Kind::Gs, Kind::Chaos, Kind::Variance, Kind::Stiffness, Kind::Window, Kind::Selftest] {
        let c = parse("seed = 5\nL = [3, 4]\n", kind).unwrap();
        let again = parse(&c.resolved_toml(), kind).unwrap();
        assert_eq!(c.hash(), again.hash(), "{kind}");
    }
}
