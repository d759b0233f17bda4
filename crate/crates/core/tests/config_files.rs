use std::path::Path;

use jumpleg::config::load_config;
use jumpleg::Config;

fn configs_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

#[test]
fn shipped_default_file_matches_builtin_defaults() {
    let cfg = load_config(configs_dir().join("default.toml")).unwrap();
    assert_eq!(cfg, Config::default());
}

#[test]
fn half_width_file_only_changes_actor() {
    let cfg = load_config(configs_dir().join("half_width.toml")).unwrap();
    let mut expected = Config::default();
    expected.train.actor_hidden = vec![128, 256, 128];
    assert_eq!(cfg, expected);
}

#[test]
fn missing_file_names_path() {
    let err = load_config("/nonexistent/jumpleg.toml").unwrap_err();
    assert!(err.to_string().contains("/nonexistent/jumpleg.toml"));
}
