use std::collections::BTreeSet;
use std::f64::consts::PI;

use freesub::harness::*;
use freesub::measures::Measure;
use freesub::regvar::Verdict;

fn pareto(a: f64) -> Measure {
    Measure::pareto(a, 1.0).unwrap()
}

#[test]
fn traceability_covers_every_selector() {
    let covered: BTreeSet<String> = TRACEABILITY.iter().map(|(s, _, _)| s.name().to_string()).collect();
    for s in Selector::ALL {
        assert!(covered.contains(s.name()), "{s}");
        assert!(!s.anchor().is_empty());
    }
    assert_eq!(covered.len(), Selector::ALL.len());
}

#[test]
fn remainder_constant_values() {
    let (im, re) = remainder_constants(1.5, 1);
    assert!((im.unwrap() + 3.0 * PI / 4.0 / (PI / 4.0).cos()).abs() < 1e-12);
    assert!((re.unwrap() + 3.0 * PI / 4.0 / (PI / 4.0).sin()).abs() < 1e-12);
    let (im, re) = remainder_constants(0.5, 0);
    assert!((im.unwrap() + 1.110720734539592).abs() < 1e-12);
    assert!((re.unwrap() + 1.110720734539592).abs() < 1e-12);
    assert_eq!(remainder_constants(1.0, 0), (None, Some(-PI / 2.0)));
    assert_eq!(remainder_constants(2.0, 1), (None, Some(-PI)));
    assert_eq!(remainder_constants(1.0, 1), (Some(-PI / 2.0), None));
    let (im, re) = remainder_constants_printed(1.5, 1);
    assert!((im + 1.110720734539592).abs() < 1e-12 && (re + 3.332162203618776).abs() < 1e-12);
    let (im, re) = remainder_constants_printed(0.5, 0);
    assert!((im + 1.110720734539592).abs() < 1e-12 && (re + 3.332162203618776).abs() < 1e-12);
}

#[test]
fn case_compatibility() {
    assert_eq!(case_order(&pareto(1.5), RemainderCase::A).unwrap(), 1);
    assert_eq!(case_order(&pareto(0.5), RemainderCase::C).unwrap(), 0);
    assert_eq!(case_order(&pareto(1.0), RemainderCase::D).unwrap(), 0);
    assert_eq!(case_order(&pareto(2.0), RemainderCase::D).unwrap(), 1);
    let lp = Measure::log_perturbed_pareto(1.0, 2.0, 1.0).unwrap();
    assert_eq!(case_order(&lp, RemainderCase::B).unwrap(), 1);
    assert!(case_order(&pareto(1.5), RemainderCase::B).is_err());
    assert!(case_order(&pareto(0.5), RemainderCase::A).is_err());
    assert!(case_order(&Measure::semicircle(2.0, 2.0).unwrap(), RemainderCase::C).is_err());
    assert!("E".parse::<RemainderCase>().is_err());
}

#[test]
fn guards() {
    let cfg = RunConfig::default();
    let e = run_main_theorem(&pareto(1.5), 5, &cfg).unwrap_err();
    assert!(e.to_string().contains("n_max exceeded"));
    let e = run_main_theorem(&Measure::point_mass(1.0).unwrap(), 2, &cfg).unwrap_err();
    assert!(e.to_string().contains("inapplicable"));
    let r = run_one_large_jump(&pareto(1.5), 1, &cfg).unwrap();
    assert!(r.passed());
    assert!(r.claims[0].series.iter().all(|(_, v)| *v == 1.0));
}

#[test]
fn schedules() {
    assert_eq!(parse_schedule("1,10,100").unwrap(), vec![1.0, 10.0, 100.0]);
    let s = parse_schedule("10:1e4:4").unwrap();
    assert_eq!(s.len(), 4);
    assert!((s[3] - 1e4).abs() < 1e-9);
    for bad in ["", "10,1", "0:10:3", "1:10", "a,b", "10:1:3", "1,1"] {
        assert!(parse_schedule(bad).is_err(), "{bad}");
    }
    let y = default_tail_schedule(&pareto(1.5)).unwrap();
    assert!((pareto(1.5).tail(*y.last().unwrap()) - TAIL_LEVEL).abs() < 1e-10);
    // three decades unless the support start cuts in
    assert_eq!(y[0], 4.0);
    let y = default_tail_schedule(&Measure::pareto(0.5, 1.0).unwrap()).unwrap();
    assert!((y[y.len() - 1] / y[0] - 1e3).abs() < 1e-6);
}

#[test]
fn reports_are_deterministic() {
    let cfg = RunConfig { seed: 17, ..RunConfig::default() };
    let a = run_remainder_equiv(&pareto(0.5), RemainderCase::C, &cfg).unwrap().to_json().unwrap();
    let b = run_remainder_equiv(&pareto(0.5), RemainderCase::C, &cfg).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    let a = run_karamata(&pareto(1.5), None, &cfg).unwrap().to_json().unwrap();
    let b = run_karamata(&pareto(1.5), None, &cfg).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    assert!(a.contains("\"seed\": 17"));
}

#[test]
fn report_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = run_remainder_equiv(&pareto(0.5), RemainderCase::C, &RunConfig::default()).unwrap();
    let path = r.write(dir.path(), Format::Json).unwrap();
    let back: Report = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back.schema_version, SCHEMA_VERSION);
    assert_eq!(back.claims.len(), r.claims.len());
    for c in &back.claims {
        let p = c.series_csv_path.as_ref().unwrap();
        let text = std::fs::read_to_string(dir.path().join(p)).unwrap();
        assert!(text.lines().count() > 3, "{p}");
    }
    let path = r.write(dir.path(), Format::Csv).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("name,"));
}

#[test]
fn remainder_case_c_passes() {
    let r = run_remainder_equiv(&pareto(0.5), RemainderCase::C, &RunConfig::default()).unwrap();
    let names: Vec<&str> = r.claims.iter().map(|c| c.name.as_str()).collect();
    assert!(names.contains(&"im_r_G_constant") && names.contains(&"re_r_G_constant"));
    assert!(r.passed() && r.warnings.is_empty(), "{}", r.summary());
    assert_eq!(exit_code(&[r]), 0);
}

#[test]
fn inverse_remainder_semicircle() {
    let r = run_inverse_remainder(&Measure::semicircle(2.0, 2.0).unwrap(), Some(0), &RunConfig::default()).unwrap();
    assert_eq!(r.claims.len(), 4);
    assert!(r.claims.iter().all(|c| c.verdict == Verdict::Pass), "{}", r.summary());
}

#[test]
fn karamata_weights_bring_index_into_range() {
    for a in [0.3, 0.5, 1.0, 1.5, 2.5, 3.0] {
        let (wd, ad, tail) = karamata_weights(a);
        assert!((0.0..2.0).contains(&ad) && (wd as f64 - a - ad).abs() < 1e-12);
        let (wt, at) = tail.unwrap();
        assert!(at > 0.0 && at <= 1.0 && (a - wt as f64 - at).abs() < 1e-12);
    }
}
