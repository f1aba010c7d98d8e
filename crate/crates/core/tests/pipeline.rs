use tagnarx::data::{load_csv, split, write_csv, InputKind, InputSpec, Segment, SplitSpec, SyntheticSpec};
use tagnarx::evolution::{run, GpConfig};
use tagnarx::narx::{g_narx, restrict, ARX_SUBSET};
use tagnarx::report::{write_pareto_csv, FrontReport};
use tagnarx::{Dataset64, NarxExpression};

fn arx_records() -> Vec<Dataset64> {
    SyntheticSpec {
        model: "0.8*u[k-1] + 0.5*y[k-1] - 0.2*y[k-2] + xi[k]".into(),
        noise_std: 1e-3,
        noise_seed: 3,
        input: InputSpec { kind: InputKind::Gaussian, amplitude: 1.0, length: 600, seed: 4, bandwidth: 1.0 },
        records: 3,
    }
    .generate()
    .unwrap()
}

#[test]
fn arx_structure_is_found_with_the_arx_grammar() {
    let records = arx_records();
    let s = split(&records, &SplitSpec::leave_last_out(records.len())).unwrap();
    assert_eq!((s.estimation.len(), s.validation.len()), (2, 1));
    let g = restrict(&g_narx(), &ARX_SUBSET).unwrap();
    let cfg = GpConfig { population_size: 30, iterations: 15, max_adjunctions: 12, seed: 2, ..GpConfig::default() };
    let r = run(&cfg, &g, &s.estimation, &s.validation, |_| {}).unwrap();

    let truth: NarxExpression = "u[k-1] + y[k-1] + y[k-2] + xi[k]".parse().unwrap();
    let best = r.front.best(3).expect("a three-parameter model");
    assert_eq!(best.expression(), Some(&truth));
    let p = best.model.as_ref().unwrap().parameters();
    for (got, want) in p.iter().zip([0.8, 0.5, -0.2]) {
        assert!((got - want).abs() < 0.01, "{p:?}");
    }
    for m in r.front.members() {
        assert!(!m.expression().unwrap().terms().iter().any(|t| t.factors().len() > 1 || t.degree() > 1));
    }

    let report = FrontReport::new(&r.front).unwrap();
    let json = serde_json::to_string(&report).unwrap();
    assert_eq!(serde_json::from_str::<FrontReport>(&json).unwrap(), report);
    let mut csv = Vec::new();
    write_pareto_csv(&r.front, &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), r.front.len() + 1);
}

#[test]
fn csv_round_trip_and_segments() {
    let dir = tempfile::tempdir().unwrap();
    let records = arx_records();
    let path = dir.path().join("r.csv");
    write_csv(&records[0], &path).unwrap();
    let back: Dataset64 = load_csv(&path, ("u", "y")).unwrap();
    assert_eq!(back.u.samples(), records[0].u.samples());
    assert_eq!(back.y.samples(), records[0].y.samples());

    let spec = SplitSpec {
        estimation: vec![Segment::range(0, 0, 400)],
        validation: vec![Segment::range(0, 400, 600)],
        test: vec![Segment::whole(1)],
    };
    let s = split(&[back], &spec);
    assert!(s.is_err());
    let s = split(&records, &spec).unwrap();
    assert_eq!(s.estimation[0].len(), 400);
    assert_eq!(s.validation[0].y.start_index(), 400);
    assert_eq!(s.test[0].len(), 600);
}
