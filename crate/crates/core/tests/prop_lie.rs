mod common;

#[test]
fn lie_bases_properties() {
    let cases = common::lie_bases(common::CASES).unwrap_or_else(|e| panic!("{e}"));
    assert_eq!(cases, common::CASES);
}
