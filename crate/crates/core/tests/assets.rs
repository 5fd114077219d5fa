use std::fs;
use std::path::PathBuf;

use hhfreak_core::raster::{decode_image, encode_pgm};
use hhfreak_core::synthetic::test_image;
use hhfreak_core::telemetry::{parse_trace, synthetic_traces, write_trace, Scenario, TRACE_SEED};

fn asset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../assets")
        .join(name)
}

#[test]
fn bundled_image_matches_generator() {
    let bytes = fs::read(asset("test_image.pgm")).unwrap();
    let mut regenerated = Vec::new();
    encode_pgm(&test_image(), &mut regenerated).unwrap();
    assert_eq!(bytes, regenerated);

    let img = decode_image(&bytes).unwrap();
    assert_eq!((img.width(), img.height(), img.channels()), (800, 600, 1));
}

#[test]
fn bundled_traces_match_generator() {
    for (name, scenario) in [
        ("trace_throttle.csv", Scenario::Throttle),
        ("trace_steady.csv", Scenario::Steady),
    ] {
        let bytes = fs::read(asset(name)).unwrap();
        let mut regenerated = Vec::new();
        write_trace(&synthetic_traces(scenario, TRACE_SEED), &mut regenerated).unwrap();
        assert_eq!(
            String::from_utf8(bytes.clone()).unwrap(),
            String::from_utf8(regenerated).unwrap(),
            "{name}"
        );
        assert!(!parse_trace(bytes.as_slice()).unwrap().is_empty());
    }
}
