use std::fs;
use std::path::Path;

use grl_core::evolution::GeneEvent;
use grl_core::harness::{
    export_metrics, latest_checkpoint, list_checkpoints, read_events, read_generations, replay_verify, run_evolution,
    Checkpoint, FormOracle, PpoLearner, RunConfig, RunControl, CHECKPOINT_DIR, METRICS_DIR,
};
use grl_core::GrlError;

fn oracle_config(generations: u32) -> RunConfig {
    let mut c = RunConfig::desk();
    c.evolution.population = 9;
    c.evolution.lifetime = 2;
    c.evolution.generations = generations;
    c.evolution.master_seed = 17;
    c.hidden_width = 4;
    c.run.workers = 1;
    c
}

fn oracle(c: &RunConfig) -> FormOracle {
    FormOracle {
        favored: "a45".parse().unwrap(),
        bonus: 50.0,
        noise: 5.0,
        lifetime: c.evolution.lifetime,
        master_seed: c.evolution.master_seed,
    }
}

fn tiny_ppo_config(generations: u32) -> RunConfig {
    let mut c = RunConfig::desk();
    c.evolution.population = 6;
    c.evolution.lifetime = 2;
    c.evolution.generations = generations;
    c.hidden_width = 4;
    c.env.t_end = 40;
    c
}

fn checkpoint_bytes(dir: &Path, generation: u32) -> (Vec<u8>, Vec<u8>) {
    let name = format!("gen_{generation:04}");
    let ck = dir.join(CHECKPOINT_DIR);
    (
        fs::read(ck.join(format!("{name}.json"))).unwrap(),
        fs::read(ck.join(format!("{name}.bin"))).unwrap(),
    )
}

#[test]
fn single_generation_walkthrough() {
    let dir = tempfile::tempdir().unwrap();
    let c = tiny_ppo_config(1);
    let out = run_evolution(
        &c,
        &PpoLearner::from_config(&c),
        Some(dir.path()),
        RunControl::default(),
    )
    .unwrap();
    assert_eq!(out.records.len(), 1);
    assert_eq!(out.records[0].winners.len(), 2);
    for f in out.bank.pool.forms() {
        assert_eq!(out.bank.pool.residents(f).len(), c.evolution.rho_max);
    }
    assert_eq!(list_checkpoints(&dir.path().join(CHECKPOINT_DIR)).unwrap().len(), 1);
    assert_eq!(
        out.records[0].agents.iter().map(|a| a.episodes.len()).sum::<usize>(),
        12
    );
}

#[test]
fn zero_generations_only_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let c = oracle_config(0);
    let out = run_evolution(&c, &oracle(&c), Some(dir.path()), RunControl::default()).unwrap();
    assert!(out.records.is_empty());
    assert!(out.final_checkpoint.is_none());
    let echoed = RunConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(echoed, c);
    assert!(list_checkpoints(&dir.path().join(CHECKPOINT_DIR)).unwrap().is_empty());
}

#[test]
fn invalid_config_is_a_config_error() {
    let mut c = oracle_config(1);
    c.evolution.tournament_size = 1;
    let err = run_evolution(&c, &oracle(&c), None, RunControl::default()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let c = oracle_config(3);
    run_evolution(&c, &oracle(&c), Some(dir.path()), RunControl::default()).unwrap();
    let (json, bin) = checkpoint_bytes(dir.path(), 2);
    let ck = latest_checkpoint(dir.path(), Some(&c.hash())).unwrap().unwrap();
    let again = tempfile::tempdir().unwrap();
    ck.save(again.path()).unwrap();
    assert_eq!(fs::read(again.path().join("gen_0002.json")).unwrap(), json);
    assert_eq!(fs::read(again.path().join("gen_0002.bin")).unwrap(), bin);
    let reloaded = Checkpoint::load(&again.path().join("gen_0002.json"), None).unwrap();
    assert_eq!(reloaded, ck);
}

#[test]
fn checkpoint_rejects_other_config_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let c = oracle_config(1);
    run_evolution(&c, &oracle(&c), Some(dir.path()), RunControl::default()).unwrap();
    let path = dir.path().join(CHECKPOINT_DIR).join("gen_0000.json");
    let err = Checkpoint::load(&path, Some("not-the-hash")).unwrap_err();
    assert!(matches!(err, GrlError::CheckpointVersion(_)));
    assert_eq!(err.exit_code(), 4);

    let blob = path.with_extension("bin");
    let mut bytes = fs::read(&blob).unwrap();
    bytes[3] ^= 0x40;
    fs::write(&blob, bytes).unwrap();
    let err = Checkpoint::load(&path, None).unwrap_err();
    assert!(matches!(err, GrlError::CheckpointCorrupt { .. }));

    let missing = Checkpoint::load(&dir.path().join("nope.json"), None).unwrap_err();
    assert!(matches!(missing, GrlError::MissingCheckpoint(_)));
}

#[test]
fn resume_matches_uninterrupted_run() {
    let c = oracle_config(6);
    let full = tempfile::tempdir().unwrap();
    run_evolution(&c, &oracle(&c), Some(full.path()), RunControl::default()).unwrap();

    let split = tempfile::tempdir().unwrap();
    let first = RunControl {
        resume: false,
        until: Some(3),
    };
    run_evolution(&c, &oracle(&c), Some(split.path()), first).unwrap();
    // leftover log lines from a crashed generation must be discarded on resume
    let events = split.path().join("events.jsonl");
    let mut text = fs::read_to_string(&events).unwrap();
    text.push_str("{\"event\":\"decay\",\"generation\":3}\n");
    fs::write(&events, text).unwrap();
    let rest = RunControl {
        resume: true,
        until: None,
    };
    run_evolution(&c, &oracle(&c), Some(split.path()), rest).unwrap();

    assert_eq!(checkpoint_bytes(full.path(), 5), checkpoint_bytes(split.path(), 5));
    assert_eq!(
        fs::read(full.path().join("events.jsonl")).unwrap(),
        fs::read(split.path().join("events.jsonl")).unwrap()
    );
    assert_eq!(
        read_generations(full.path()).unwrap(),
        read_generations(split.path()).unwrap()
    );
}

#[test]
fn worker_count_does_not_change_results() {
    let mut c = tiny_ppo_config(2);
    c.run.workers = 1;
    let a = run_evolution(&c, &PpoLearner::from_config(&c), None, RunControl::default()).unwrap();
    c.run.workers = 4;
    let b = run_evolution(&c, &PpoLearner::from_config(&c), None, RunControl::default()).unwrap();
    assert_eq!(
        a.final_checkpoint.unwrap().digest().unwrap(),
        b.final_checkpoint.unwrap().digest().unwrap()
    );
    assert_eq!(a.records, b.records);
}

#[test]
fn export_accounting_and_idempotence() {
    let empty = tempfile::tempdir().unwrap();
    for p in export_metrics(empty.path()).unwrap() {
        assert_eq!(fs::read_to_string(p).unwrap().lines().count(), 1);
    }

    let dir = tempfile::tempdir().unwrap();
    let c = oracle_config(3);
    run_evolution(&c, &oracle(&c), Some(dir.path()), RunControl::default()).unwrap();
    let paths = export_metrics(dir.path()).unwrap();
    let episodes = fs::read_to_string(dir.path().join(METRICS_DIR).join("episodes.csv")).unwrap();
    assert_eq!(episodes.lines().count() - 1, 3 * 9 * 2);
    assert!(episodes.starts_with("generation,agent,task,episode,reward,forward_distance,control_cost,steps\n"));
    let before: Vec<Vec<u8>> = paths.iter().map(|p| fs::read(p).unwrap()).collect();
    export_metrics(dir.path()).unwrap();
    let after: Vec<Vec<u8>> = paths.iter().map(|p| fs::read(p).unwrap()).collect();
    assert_eq!(before, after);
}

#[test]
fn replay_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let c = oracle_config(5);
    run_evolution(&c, &oracle(&c), Some(dir.path()), RunControl::default()).unwrap();
    let events = read_events(dir.path()).unwrap();
    for (_, path) in list_checkpoints(&dir.path().join(CHECKPOINT_DIR)).unwrap() {
        let ck = Checkpoint::load(&path, Some(&c.hash())).unwrap();
        let report = replay_verify(&ck, &events, &c);
        assert!(report.passed(), "{report}");
    }
    let ck = latest_checkpoint(dir.path(), None).unwrap().unwrap();

    let (idx, ancestor) = events
        .iter()
        .enumerate()
        .find_map(|(i, e)| match e {
            GeneEvent::Increment { ancestor, .. } if ck.bank.pool.contains(*ancestor) => Some((i, *ancestor)),
            _ => None,
        })
        .expect("some surviving gene received an increment");
    let mut cut = events.clone();
    cut.remove(idx);
    let report = replay_verify(&ck, &cut, &c);
    assert!(!report.passed());
    assert!(report.offending_genes().contains(&ancestor));

    let mut edited = c.clone();
    edited.evolution.beta = 0.05;
    let report = replay_verify(&ck, &events, &edited);
    let offenders = report.offending_genes();
    for gene in ck.bank.pool.iter() {
        assert!(offenders.contains(&gene.id), "gene {} not flagged", gene.id);
    }
}
