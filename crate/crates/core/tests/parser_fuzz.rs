mod common;

use common::cql_fuzz::{fuzz_parser, structured};
use pathwise_core::cql::parse_library;
use proptest::prelude::*;

#[test]
fn survives_ten_thousand_fuzzed_inputs() {
    assert!(fuzz_parser(10_000) > 5_000);
}

#[test]
fn deep_nesting_is_rejected_not_overflowed() {
    for open in ["(", "not ", "if true then "] {
        let src = format!("library L version '1'\ndefine \"x\":\n  {}true", open.repeat(100_000));
        let err = parse_library(&src).unwrap_err();
        assert!(structured(&err));
    }
    let chain: String = (0..5_000).map(|i| format!("if \"J{i}\" then 'a' else ")).collect();
    let src = format!("library L version '1'\ndefine \"x\":\n  {chain}'none'");
    assert!(parse_library(&src).is_ok());
}

proptest! {
    #[test]
    fn arbitrary_strings_never_panic(s in "\\PC{0,200}") {
        if let Err(e) = parse_library(&s) {
            prop_assert!(structured(&e));
        }
    }
}
