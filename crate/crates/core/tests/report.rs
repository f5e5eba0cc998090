use std::fs;

use stochslab::ensemble::StoppingRule;
use stochslab::report::{
    convergence_study, resolve_problem, run_models, write_table2, write_table4, Knobs, ProblemSet, SetParam,
};

fn round4(x: f64) -> f64 {
    (x * 1e4).round_ties_even() / 1e4
}

fn quick_knobs() -> Knobs {
    Knobs {
        stopping: StoppingRule {
            n_min: 10,
            n_max: 24,
            ..Default::default()
        },
        batch: 8,
        ..Default::default()
    }
}

#[test]
fn set_a_m40_deterministic_columns() {
    let cfg = resolve_problem(ProblemSet::A, SetParam::Layers(40)).unwrap();
    let row = run_models(&cfg, false).unwrap();
    assert_eq!(round4(row.lp.value_at_origin()), 0.0677);
    assert_eq!(round4(row.alp.value_at_origin()), 0.0777);
    assert!(row.benchmark.is_none() && row.err_lp().is_none());
}

#[test]
fn set_e_models_agree_near_point_four() {
    let cfg = resolve_problem(ProblemSet::E, SetParam::Choice(2)).unwrap();
    let row = run_models(&cfg, false).unwrap();
    for o in [&row.lp, &row.alp, &row.am] {
        let v = round4(o.value_at_origin());
        assert!((0.3999..=0.4000).contains(&v), "{v}");
    }
}

#[test]
fn set_d_atomic_mix() {
    let cfg = resolve_problem(ProblemSet::D, SetParam::Choice(1)).unwrap();
    let row = run_models(&cfg, false).unwrap();
    let am = row.am.value_at_origin();
    assert!((am - 13.847).abs() / 13.847 < 1e-3, "{am}");
}

#[test]
fn convergence_study_set_b() {
    let dir = tempfile::tempdir().unwrap();
    let pts = convergence_study(ProblemSet::B, &[20, 40, 60], &Knobs::default(), Some(dir.path())).unwrap();
    for w in pts.windows(2) {
        assert!(w[1].lp_gap() < w[0].lp_gap());
    }
    for (p, reference) in pts.iter().zip([0.0825, 0.0776, 0.0759]) {
        assert!((p.alp_transport - reference).abs() / reference < 0.005, "{}", p.alp_transport);
    }
    // diffusion limit of the adjusted model is the cosh formula with beta = 1
    for p in &pts {
        let x = f64::from(p.m);
        let (sa, q, d) = (0.1 / (x * x) / 2.0, 0.2 / (x * x) / 2.0, 1.0 / 1.5);
        let k = (sa / d).sqrt();
        let exact = q / sa * (1.0 - 1.0 / (k * (x + 2.0 * d)).cosh());
        assert!((p.alp_diffusion - exact).abs() <= 1e-12 * exact);
    }
    let csv = fs::read_to_string(dir.path().join("converge.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    for m in [20, 40, 60] {
        for name in ["lp", "alp", "diff_lp", "diff_alp"] {
            assert!(dir.path().join(format!("fig3_M{m}_{name}.csv")).exists());
        }
    }
}

#[test]
fn tables_regenerate_byte_for_byte() {
    let knobs = quick_knobs();
    let render = || {
        let dir = tempfile::tempdir().unwrap();
        let cfg2 = resolve_problem(ProblemSet::B, SetParam::Layers(20)).unwrap().with_knobs(knobs);
        let row2 = run_models(&cfg2, true).unwrap();
        write_table2(&[(cfg2, row2)], &knobs, dir.path()).unwrap();
        let cfg4 = resolve_problem(ProblemSet::F, SetParam::Choice(3)).unwrap().with_knobs(knobs);
        let row4 = run_models(&cfg4, true).unwrap();
        write_table4(&[(cfg4, row4)], &knobs, dir.path()).unwrap();
        let mut names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        let bytes: Vec<_> = names.iter().map(|n| fs::read(dir.path().join(n)).unwrap()).collect();
        (names, bytes)
    };
    let (names, first) = render();
    let (_, second) = render();
    assert_eq!(first, second);
    for n in [
        "table2.csv",
        "table2_rounded.csv",
        "table2_meta.json",
        "fig6_M20_benchmark.csv",
        "fig6_M20_lp.csv",
        "fig6_M20_alp.csv",
        "table4.csv",
        "table4_meta.json",
        "fig10_ss0_lp.csv",
        "fig10_ss0_am.csv",
    ] {
        assert!(names.iter().any(|x| x == n), "missing {n} in {names:?}");
    }
    for bytes in &first {
        assert!(!bytes.contains(&b'\r'));
    }
    let meta: serde_json::Value = serde_json::from_slice(&first[names.iter().position(|n| n == "table2_meta.json").unwrap()]).unwrap();
    assert_eq!(meta["entries"][0]["n_realizations"], 24);
    assert_eq!(meta["quad_order"], 16);
    let table = String::from_utf8(first[names.iter().position(|n| n == "table4_rounded.csv").unwrap()].clone()).unwrap();
    let row: Vec<&str> = table.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..6], &["F", "0", "0.2000", "0.2000", "0.2000", "0.2000"]);
}
