use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smust::sim::{
    build_config_lut, drop_cells, read_jsonl, run_fairness_sweep, run_mimo_cdf, run_sched, write_csv, write_jsonl,
    Experiment, Layout, LayoutConfig, RadioConfig, SimConfig, FAIRNESS_COLUMNS,
};

#[test]
fn drops_stay_inside_their_hexagon() {
    let layout = LayoutConfig { ues_per_cell: 1500, ..LayoutConfig::default() };
    let radio = RadioConfig::default();
    let geo = Layout::new(&layout, &radio).unwrap();
    let ues = drop_cells(&layout, &radio, &mut ChaCha8Rng::seed_from_u64(61)).unwrap();
    assert_eq!(ues.len(), 7 * 1500);
    let limit = layout.isd_m / 3f64.sqrt() + 1e-9;
    for ue in &ues {
        let s = geo.sites()[ue.cell];
        let d = ((ue.position[0] - s[0]).powi(2) + (ue.position[1] - s[1]).powi(2)).sqrt();
        assert!(d <= limit, "UE {d} m from its site");
        assert!(ue.distance_m >= layout.min_distance_m);
        // with wrap-around the serving site is the closest one
        for other in 0..7 {
            assert!(geo.distance(ue.position, other) >= geo.distance(ue.position, ue.cell) - 1e-6);
        }
    }
}

#[test]
fn interference_lowers_sinr() {
    let radio = RadioConfig::default();
    let quiet = LayoutConfig { interference: false, ues_per_cell: 200, ..LayoutConfig::default() };
    let loud = LayoutConfig { interference: true, ..quiet.clone() };
    let a = drop_cells(&quiet, &radio, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let b = drop_cells(&loud, &radio, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.position, y.position);
        assert!(y.sinr_db < x.sinr_db);
        assert!((x.sinr_db - x.link.snr_db()).abs() < 1e-9);
    }
}

fn quick(experiment: Experiment) -> SimConfig {
    let mut cfg = SimConfig::new(experiment);
    cfg.seed = 99;
    cfg.trials = 10_000;
    cfg.lut.snr_db_start = -10.0;
    cfg.lut.snr_db_stop = 30.0;
    cfg.lut.snr_db_step = 10.0;
    cfg
}

#[test]
fn reruns_are_identical_and_seeds_matter() {
    let mut cfg = quick(Experiment::Fairness);
    cfg.schemes = vec!["oma".into(), "smust_cat1".into(), "must_cat1".into()];
    cfg.sweep.snr_db_stop = 10.0;
    let a = run_fairness_sweep(&cfg).unwrap();
    assert_eq!(a, run_fairness_sweep(&cfg).unwrap());
    cfg.seed = 100;
    assert_ne!(a, run_fairness_sweep(&cfg).unwrap());

    let mut cfg = quick(Experiment::Mimo);
    cfg.trials = 200;
    cfg.schemes = vec!["must_cat1".into(), "smust_cat1".into()];
    let lut = build_config_lut(&cfg).unwrap();
    assert_eq!(run_mimo_cdf(&cfg, &lut).unwrap(), run_mimo_cdf(&cfg, &lut).unwrap());

    let mut cfg = quick(Experiment::Sched);
    cfg.sched.rounds = 5;
    cfg.schemes = vec!["dynamic_ma".into(), "smust_cat1".into()];
    let lut = build_config_lut(&cfg).unwrap();
    let (x, y) = (run_sched(&cfg, &lut).unwrap(), run_sched(&cfg, &lut).unwrap());
    assert_eq!(x.records, y.records);
    assert_eq!(x.ops, y.ops);
}

#[test]
fn writers_carry_the_config_hash() {
    let mut cfg = quick(Experiment::Fairness);
    cfg.schemes = vec!["oma".into()];
    cfg.sweep.snr_db_stop = 5.0;
    let records = run_fairness_sweep(&cfg).unwrap();
    let hash = cfg.hash();
    assert_eq!(hash.len(), 64);

    let mut csv = Vec::new();
    write_csv(&records, FAIRNESS_COLUMNS, &hash, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "scheme,snr_db,min_bpcu,std_error,trials,seed,config_hash");
    for line in lines {
        assert!(line.starts_with("oma,") && line.ends_with(&hash));
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.jsonl");
    let mut file = std::fs::File::create(&path).unwrap();
    write_jsonl(&records, &hash, &mut file).unwrap();
    drop(file);
    let (back, h) = read_jsonl(&path).unwrap();
    assert_eq!(back, records);
    assert_eq!(h.as_deref(), Some(hash.as_str()));
}

#[test]
fn config_files_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = SimConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.schemes().unwrap();
            n += 1;
        }
    }
    assert!(n >= 5);
}
