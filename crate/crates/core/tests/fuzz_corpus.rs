//! Replays the checked-in fuzz corpus through the parser entry points with the
//! same assertions as the fuzz targets, so the seeds stay valid on stable.

use std::path::PathBuf;

use oumax::config::{parse_point_list, parse_theta_list, RunConfig};
use oumax::gaussian::OuParams;
use oumax::maximal::{CertificationReport, PolyRegion};

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| {
            let path = entry.unwrap().path();
            (path.display().to_string(), std::fs::read_to_string(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn params_seeds_parse_and_roundtrip() {
    for (name, text) in seeds("params_json") {
        let params = OuParams::from_json_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(params.spectral_abscissa() < 0.0);
        let back = OuParams::from_json_value(&params.to_json_value()).unwrap();
        assert_eq!(back, params, "{name}");
    }
}

#[test]
fn run_config_seeds_parse() {
    for (name, text) in seeds("run_config") {
        let config = RunConfig::from_json_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        config.ou_params().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn report_seeds_roundtrip() {
    for (name, text) in seeds("report_json") {
        let report = CertificationReport::from_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let back = CertificationReport::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report, "{name}");
    }
}

#[test]
fn list_seeds_parse() {
    for (name, text) in seeds("point_list") {
        let points = parse_point_list(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(points.iter().all(|p| p.len() == points[0].len()));
    }
    for (name, text) in seeds("theta_list") {
        let theta = parse_theta_list(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(theta.iter().all(|v| *v >= 0.0));
    }
    for (name, text) in seeds("poly_region") {
        let region: PolyRegion = text.parse().unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(region.as_str(), text);
    }
}
