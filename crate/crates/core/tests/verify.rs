use yamabe_glue::config::RunConfig;
use yamabe_glue::verify::*;

#[test]
fn log_slope_of_a_power_law() {
    let x = [1e-3, 3e-3, 1e-2, 3e-2];
    let y: Vec<f64> = x.iter().map(|v: &f64| 7.0 * v.powf(2.6)).collect();
    assert!((log_slope(&x, &y) - 2.6).abs() < 1e-12);
}

#[test]
fn measures_compare_as_labelled() {
    assert!(Measure::at_most("a", 1.0, 1.0).pass);
    assert!(!Measure::below("a", 1.0, 1.0).pass);
    assert!(!Measure::above("a", 0.0, 0.0).pass);
    assert!(Measure::at_least("a", 0.0, 0.0).pass);
    assert!(!Measure::at_most("a", f64::NAN, 1.0).pass);
}

#[test]
fn preset_symmetries_permute_the_points() {
    for name in ["triangle-N3", "square-N3", "tetrahedron-N3"] {
        let (q, perm) = preset_symmetry(name).unwrap();
        let c = RunConfig::preset(name).unwrap().configuration().unwrap();
        for (i, p) in c.points.iter().enumerate() {
            let img: Vec<f64> = (0..3).map(|r| (0..3).map(|k| q[r][k] * p[k]).sum()).collect();
            let d: f64 = img.iter().zip(&c.points[perm[i]]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(d < 1e-12, "{name} point {i}");
        }
    }
    assert!(preset_symmetry("pair-N3").is_none());
}

#[test]
fn cheap_criteria_pass_and_report_lines() {
    let mut s = Suite::from_preset("triangle-N3").unwrap();
    let checks = s.run(&[1, 2, 5, 8]);
    for c in &checks {
        assert_eq!(c.status, Status::Pass, "{}", c.line());
        assert!(c.line().starts_with("PASS"));
        assert!(!c.measures.is_empty());
    }
    let bad = s.check(99);
    assert_eq!(bad.status, Status::Fail);
}

#[test]
fn symmetry_is_skipped_without_a_group() {
    let mut rc = RunConfig::preset("triangle-N3").unwrap();
    rc.points[0][2] = 0.1;
    let mut s = Suite::new(rc, None);
    assert_eq!(s.check(12).status, Status::Skip);
}
