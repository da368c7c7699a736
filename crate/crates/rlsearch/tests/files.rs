use rlsearch::checkpoint::{load_net, Checkpoint, Meta};
use rlsearch::config::{self, ExperimentConfig, SearchFile, TrainConfig};
use rlsearch::results::{read_jsonl_lenient, to_jsonl, trajectory_rows, EpisodeRow};
use rlsearch::Error;
use rlsearch_core::env::{self, EnvKind, Simulator};
use rlsearch_core::nn::{Arch, HeadKind, NetParams};
use rlsearch_core::rlsearch::Mode;
use rand::SeedableRng;

fn net(head: HeadKind, input: usize, output: usize) -> NetParams {
    let mut rng = rand_pcg::Pcg64Mcg::seed_from_u64(3);
    NetParams::init(Arch::default_for(head, input, output).with_hidden(vec![8]), 0.5, &mut rng)
}

#[test]
fn checkpoint_round_trips_bit_exact() {
    let n = net(HeadKind::QValues, 7, 2);
    let c = Checkpoint::new(&n, Meta { env: Some(EnvKind::CoordGame), ..Meta::default() });
    let json = c.to_json();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["version"], 1);
    assert!(v["arch"].is_object() && v["params"].is_array() && v["meta"].is_object());
    let back = Checkpoint::from_json(&json).unwrap().to_net().unwrap();
    assert_eq!(back.arch, n.arch);
    assert!(back.params.iter().zip(&n.params).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(Checkpoint::new(&back, c.meta.clone()).to_json(), json);
}

#[test]
fn checkpoint_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("q.json");
    Checkpoint::new(&net(HeadKind::QValues, 5, 2), Meta::default()).save(&p).unwrap();
    let spec = env::reset(EnvKind::CoordGame, 0).spec();
    let e = load_net(&p, &spec, None).unwrap_err();
    assert!(matches!(e, Error::Checkpoint(_)));
    assert_eq!(e.exit_code(), 3);

    Checkpoint::new(&net(HeadKind::QValues, spec.obs_len, 2), Meta::default()).save(&p).unwrap();
    assert!(load_net(&p, &spec, Some(HeadKind::QValues)).is_ok());
    assert_eq!(load_net(&p, &spec, Some(HeadKind::PolicyLogits)).unwrap_err().exit_code(), 3);

    std::fs::write(&p, "{\"version\":2,\"arch\":{}}").unwrap();
    assert_eq!(load_net(&p, &spec, None).unwrap_err().exit_code(), 3);
}

#[test]
fn configs_reject_unknown_keys_and_versions() {
    let e = config::parse::<TrainConfig>(r#"{"version":1,"budget":10,"lr":0.1}"#).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    let e = config::parse::<TrainConfig>(r#"{"version":1,"budget":10,"ppo":{"learning_rate":0.1}}"#).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    let t: TrainConfig = config::parse(r#"{"version":1,"budget":10,"ppo":{"lr":0.1}}"#).unwrap();
    assert_eq!((t.budget, t.ppo.lr), (10, 0.1));
    assert!(config::check_version(2).is_err());

    let s: SearchFile = config::parse(r#"{"version":1,"run":{"mode":"rl-multi","search":{"horizon":2}},"budget":{"max_samples_per_move":500}}"#).unwrap();
    assert_eq!(s.run.unwrap().search.horizon, 2);
    assert!(config::parse::<SearchFile>(r#"{"version":1,"run":{"search":{"horizn":2}}}"#).is_err());

    let good = r#"{"version":1,"env":"coordgame","modes":["blueprint","rl-multi"],"blueprint":"q.json","episodes":2,"seed":1,"out_dir":"out"}"#;
    let c: ExperimentConfig = config::parse(good).unwrap();
    c.validate().unwrap();
    assert_eq!(c.run_for(Mode::RlMulti).search.horizon, 1);
    let bad: ExperimentConfig = config::parse(&good.replace("\"version\":1", "\"version\":3")).unwrap();
    assert_eq!(bad.validate().unwrap_err().exit_code(), 2);
    assert!(config::parse::<ExperimentConfig>(&good.replace("\"seed\"", "\"sed\"")).is_err());
}

#[test]
fn lenient_reader_counts_corrupt_lines() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.jsonl");
    let row = EpisodeRow { seed: 1, mode: Mode::Sparta, ret: 1.5, steps: 2, samples: 10, wall_ms: 0, moves_searched: 1, gate_pass_rate: 0.0, empty_belief_fallbacks: 0 };
    let mut text = to_jsonl(std::slice::from_ref(&row));
    text.push_str("{not json\n\n{\"seed\":2}\n");
    text.push_str(&to_jsonl(std::slice::from_ref(&row)));
    std::fs::write(&p, text).unwrap();
    let (rows, skipped) = read_jsonl_lenient::<EpisodeRow>(&p).unwrap();
    assert_eq!((rows.len(), skipped), (2, 2));
    assert_eq!(rows[0], row);
}

#[test]
fn episode_row_field_names() {
    let row = EpisodeRow { seed: 1, mode: Mode::RlSingle, ret: 1.0, steps: 2, samples: 3, wall_ms: 4, moves_searched: 5, gate_pass_rate: 0.5, empty_belief_fallbacks: 6 };
    let v: serde_json::Value = serde_json::from_str(&serde_json::to_string(&row).unwrap()).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, ["empty_belief_fallbacks", "gate_pass_rate", "mode", "moves_searched", "return", "samples", "seed", "steps", "wall_ms"]);
    assert_eq!(v["mode"], "rl-single");
}

#[test]
fn trajectory_rows_replay_the_episode() {
    let start = env::reset(EnvKind::CoordGame, 0);
    let rows = trajectory_rows(&start, &[1, 1]).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].t, rows[0].agent, rows[1].t, rows[1].agent), (0, 0, 1, 1));
    assert_eq!((rows[0].reward, rows[1].reward), (0.0, 2.0));
    assert_eq!(rows[0].obs, start.observe(0).features);
    assert_eq!(rows[0].public_obs, start.public_observe().features);
    assert!(trajectory_rows(&start, &[1, 1, 0]).is_err());
}
