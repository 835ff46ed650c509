use polyscatter::farfield::CrossSectionReport;
use polyscatter::sweep::{emit_report, fmt_sig, reports_to_csv, reports_to_json, Format, CSV_HEADER};
use proptest::prelude::*;

fn report(k: f64, surface: Option<f64>) -> CrossSectionReport {
    CrossSectionReport {
        k,
        lambda_re: 0.3,
        lambda_im: 0.2,
        sigma_grid: 0.389_719_750_123_456_7,
        sigma_surface: surface,
        sigma_asym: 0.463,
        sigma_transport: 6.911_88e-2,
        forward_re: -0.12,
        forward_im: 1.5e-7,
    }
}

#[test]
fn one_report_is_two_csv_lines() {
    let csv = reports_to_csv(&[report(50.0, Some(0.3897))]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines[1], "50,0.3,0.2,0.389719750123,0.3897,0.463,0.0691188,-0.12,1.5e-7");
}

#[test]
fn skipped_surface_route_leaves_an_empty_cell() {
    let csv = reports_to_csv(&[report(200.0, None)]);
    let cells: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(cells.len(), 9);
    assert_eq!(cells[4], "");
}

#[test]
fn emit_writes_files_and_reports_the_path() {
    let dir = std::env::temp_dir().join(format!("polyscatter-report-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("r.json");
    let reports = vec![report(50.0, Some(0.39)), report(200.0, None)];
    emit_report(&reports, Format::Json, Some(&path)).unwrap();
    let back: Vec<CrossSectionReport> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, reports);
    let missing = dir.join("no/such/dir/r.csv");
    let err = emit_report(&reports, Format::Csv, Some(&missing)).unwrap_err();
    assert!(err.to_string().contains("no/such/dir"), "{err}");
    assert!(emit_report(&[], Format::Csv, Some(&path)).is_err());
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, -1e-6..1e-6f64, any::<f64>().prop_filter("finite", |x| x.is_finite())]
}

proptest! {
    #[test]
    fn json_round_trips(k in 1.0..500.0f64, re in -5.0..5.0f64, im in 0.0..5.0f64, s in finite(),
                        surface in proptest::option::of(0.0..10.0f64), f in finite()) {
        let r = CrossSectionReport {
            k, lambda_re: re, lambda_im: im, sigma_grid: s.abs(), sigma_surface: surface,
            sigma_asym: 0.5, sigma_transport: s.abs() / 3.0, forward_re: f, forward_im: -f,
        };
        let text = reports_to_json(std::slice::from_ref(&r)).unwrap();
        let back: Vec<CrossSectionReport> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, vec![r]);
    }

    #[test]
    fn twelve_significant_digits(x in finite()) {
        let text = fmt_sig(x);
        let y: f64 = text.parse().unwrap();
        prop_assert!((x - y).abs() <= 5e-12 * x.abs());
        let digits: String = text.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).collect();
        prop_assert!(digits.trim_start_matches('0').len() <= 12, "{}", text);
    }
}
