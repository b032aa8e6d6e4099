use std::fs;

use choicebandit::bounds::check_bounds;
use choicebandit::output::{emit_all, emit_csv, emit_svg};
use choicebandit::run::{run_experiment, run_replication};
use choicebandit::{ExperimentConfig, Format, Overrides};

const SMALL: &str = r#"{
    "name": "small",
    "env": {"family": "nl-env"},
    "variants": [
        {"name": "MNL", "algorithm": "classical-softmax", "model": {"mnl": {"n": 9, "mu": 1.0}}},
        {"name": "NL", "algorithm": "nested-logit-closed-form",
         "model": {"nl": {"mu_ell": [0.45, 0.45, 0.45], "partition": [[0,3,4],[1,5,6],[2,7,8]]}}},
        {"name": "GNL", "algorithm": "generalized-gnl", "alpha": 0.2,
         "model": {"nl": {"mu_ell": [0.7, 0.7, 0.7], "partition": [[0,3,4],[1,5,6],[2,7,8]]}}}
    ],
    "steps": 50,
    "replications": 70,
    "seed": 11
}"#;

fn small() -> ExperimentConfig {
    ExperimentConfig::from_json(SMALL).unwrap()
}

#[test]
fn csv_layout_and_round_trip() {
    let cfg = small();
    let res = run_experiment(&cfg, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    emit_csv(&res, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
    assert_eq!(text.lines().count(), cfg.steps * cfg.variants.len() + 1);
    assert_eq!(text.lines().next().unwrap(), "step,variant,mean_reward,pct_optimal");

    let mut reader = csv::Reader::from_path(&path).unwrap();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let step: usize = rec[0].parse().unwrap();
        let v = res.variant(&rec[1]).unwrap();
        let reward: f64 = rec[2].parse().unwrap();
        let pct: f64 = rec[3].parse().unwrap();
        assert!((1..=cfg.steps).contains(&step));
        assert!((reward - v.mean_reward[step - 1]).abs() <= 1e-8 * v.mean_reward[step - 1].abs().max(1.0));
        assert!((pct - v.pct_optimal[step - 1]).abs() <= 1e-8);
        rows += 1;
    }
    assert_eq!(rows, cfg.steps * cfg.variants.len());

    let again = dir.path().join("b.csv");
    emit_csv(&run_experiment(&cfg, Some(2)).unwrap(), &again).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn svg_files_parse_and_cover_the_data() {
    let cfg = small();
    let res = run_experiment(&cfg, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_svg(&res, dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    for f in &files {
        let text = fs::read_to_string(f).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        let root = doc.root_element();
        assert_eq!(root.tag_name().name(), "svg");
        let series: Vec<_> = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("series"))
            .collect();
        assert_eq!(series.len(), cfg.variants.len(), "{}", f.display());
        let titles: Vec<&str> = series
            .iter()
            .filter_map(|s| s.children().find(|c| c.has_tag_name("title")))
            .filter_map(|t| t.text())
            .collect();
        assert_eq!(titles, vec!["MNL", "NL", "GNL"]);
        for s in &series {
            let points = s.attribute("points").unwrap();
            for pair in points.split_whitespace() {
                let (x, y) = pair.split_once(',').unwrap();
                assert!(x.parse::<f64>().unwrap().is_finite());
                assert!(y.parse::<f64>().unwrap().is_finite());
            }
        }
        assert!(doc.descendants().any(|n| n.attribute("class") == Some("legend")));
    }
}

#[test]
fn emit_all_respects_formats() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.apply(&Overrides {
        out: Some(dir.path().join("csv-only")),
        formats: Some(vec![Format::Csv]),
        ..Overrides::default()
    });
    let res = run_experiment(&cfg, None).unwrap();
    let written = emit_all(&cfg, &res).unwrap();
    let names: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().any(|n| n.ends_with(".csv")));
    assert!(names.iter().all(|n| !n.ends_with(".svg")));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cfg.out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["name"], "small");
    assert_eq!(meta["result"]["variants"].as_array().unwrap().len(), 3);
}

#[test]
fn aggregate_matches_serial_reference() {
    let cfg = small();
    let res = run_experiment(&cfg, Some(3)).unwrap();
    let prep = cfg.prepare().unwrap();
    let b_count = cfg.replications as f64;
    for (k, v) in res.variants.iter().enumerate() {
        let mut reward = vec![0.0; cfg.steps];
        let mut pct = vec![0.0; cfg.steps];
        for b in 0..cfg.replications {
            let rep = run_replication(&prep, cfg.steps, cfg.seed, b).unwrap();
            for t in 0..cfg.steps {
                reward[t] += rep.traces[k].rewards[t] / b_count;
                pct[t] += rep.traces[k].optimal[t] / b_count;
            }
        }
        for t in 0..cfg.steps {
            assert!((reward[t] - v.mean_reward[t]).abs() < 1e-12);
            assert!((pct[t] - v.pct_optimal[t]).abs() < 1e-12);
        }
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = small();
    let one = run_experiment(&cfg, Some(1)).unwrap();
    for threads in [2, 5] {
        assert_eq!(run_experiment(&cfg, Some(threads)).unwrap(), one);
    }
}

#[test]
fn single_step_noiseless_custom_env() {
    let cfg = ExperimentConfig::from_json(
        r#"{
            "name": "tiny",
            "env": {"family": "custom", "means": [0.5, 2.0, -1.0], "noise_sd": 0.0},
            "variants": [{"name": "MNL", "algorithm": "classical-softmax", "model": {"mnl": {"n": 3, "mu": 1.0}}}],
            "steps": 1,
            "replications": 1
        }"#,
    )
    .unwrap();
    let res = run_experiment(&cfg, None).unwrap();
    let v = &res.variants[0];
    let r = v.mean_reward[0];
    assert!([0.5, 2.0, -1.0].contains(&r));
    assert_eq!(v.pct_optimal[0], if r == 2.0 { 1.0 } else { 0.0 });
    assert_eq!(v.reward_se[0], 0.0);
    assert_eq!(res.env_means.as_deref(), Some(&[0.5, 2.0, -1.0][..]));
}

#[test]
fn config_errors_are_reported() {
    let bad = [
        SMALL.replace("\"seed\": 11", "\"seed\": 11, \"extra\": 1"),
        SMALL.replace("\"n\": 9", "\"n\": 8"),
        SMALL.replace("\"steps\": 50", "\"steps\": 0"),
        SMALL.replace("\"replications\": 70", "\"replications\": 0"),
        SMALL.replace("\"name\": \"NL\"", "\"name\": \"MNL\""),
        SMALL.replace("\"alpha\": 0.2", "\"alpha\": -0.2"),
        SMALL.replace("generalized-gnl", "experts"),
        SMALL.replace("{\"family\": \"nl-env\"}", "{\"adversarial\": {\"kind\": \"uniform-random\"}, \"n\": 9}"),
    ];
    for text in &bad {
        let outcome = ExperimentConfig::from_json(text).and_then(|c| c.prepare().map(|_| ()));
        assert!(outcome.is_err(), "accepted: {text}");
    }
}

#[test]
fn fast_override_caps_replications() {
    let mut cfg = small();
    cfg.replications = 5000;
    cfg.apply(&Overrides {
        fast: true,
        seed: Some(3),
        ..Overrides::default()
    });
    assert_eq!(cfg.replications, 200);
    assert_eq!(cfg.seed, 3);
}

#[test]
fn bounds_hold_for_a_single_arm() {
    let cfg = ExperimentConfig::from_json(
        r#"{
            "name": "one-arm",
            "env": {"adversarial": {"kind": "uniform-random"}, "n": 1},
            "variants": [
                {"name": "E", "algorithm": "experts", "model": {"mnl": {"n": 1, "mu": 1.0}}},
                {"name": "B", "algorithm": "adv-bandit", "eta": 2.0, "model": {"mnl": {"n": 1, "mu": 1.0}}}
            ],
            "steps": 30,
            "replications": 4
        }"#,
    )
    .unwrap();
    let res = run_experiment(&cfg, None).unwrap();
    let reports = check_bounds(&res);
    assert_eq!(reports.len(), 2);
    for r in reports {
        assert!(r.holds);
        assert!(r.max_regret.abs() < 1e-12);
    }
}

#[test]
fn adversarial_bounds_hold_on_random_losses() {
    let cfg = ExperimentConfig::from_json(
        r#"{
            "name": "adv",
            "env": {"adversarial": {"kind": "switching-best", "period": 25}, "n": 4},
            "variants": [
                {"name": "E", "algorithm": "experts", "model": {"nl": {"mu_ell": [0.4, 0.9], "partition": [[0,1],[2,3]]}}},
                {"name": "B", "algorithm": "adv-bandit", "model": {"mnl": {"n": 4, "mu": 1.0}}}
            ],
            "steps": 200,
            "replications": 40
        }"#,
    )
    .unwrap();
    let res = run_experiment(&cfg, None).unwrap();
    for r in check_bounds(&res) {
        assert!(r.holds, "{r:?}");
        assert_eq!(r.runs_above_bound, 0);
    }
}
