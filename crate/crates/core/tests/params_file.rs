use sslc_core::params::HashParams;

const PINNED: &str = include_str!("../../../params/hash-params-v1.txt");

#[test]
fn pinned_parameter_file_matches_the_build() {
    let parsed = HashParams::parse(PINNED).unwrap();
    parsed.check_matches_build().unwrap();
    assert_eq!(parsed, HashParams::current());
    assert_eq!(HashParams::current().to_text(), PINNED);
}
