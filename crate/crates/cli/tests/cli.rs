use std::path::Path;
use std::process::{Command, Output};

fn gaitprior(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaitprior"))
        .args(args)
        .current_dir(cwd)
        .env_remove("GAITPRIOR_OUT")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn end_to_end_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let stdout = ok(&gaitprior(&["gen-demo", "--env", "point_gait", "--out", "demo.toml"], dir));
    assert!(stdout.contains("25 frames"), "{stdout}");

    let stdout = ok(&gaitprior(&["analyze", "--demo", "demo.toml", "--out", "an"], dir));
    assert!(stdout.contains("suggested latent dim 2"), "{stdout}");
    assert!(dir.join("an/reports/pca.csv").is_file());

    ok(&gaitprior(
        &["train-prior", "--demo", "demo.toml", "--epochs", "100", "--out", "prior.toml"],
        dir,
    ));
    assert!(dir.join("prior.toml").is_file());

    std::fs::write(
        dir.join("exp.toml"),
        "mode = \"ppo_latent\"\nprior = \"prior.toml\"\ndemo = \"demo.toml\"\n\
         total_steps = 256\nrollout_length = 128\nn_epochs = 1\neval_episodes = 1\nout_dir = \"from_file\"\n",
    )
    .unwrap();
    let stdout = ok(&gaitprior(&["train", "--config", "exp.toml", "--seeds", "4"], dir));
    assert!(stdout.contains("seed 4"), "{stdout}");
    assert!(dir.join("from_file/logs/seed_4.csv").is_file());

    let stdout = ok(&gaitprior(
        &[
            "eval",
            "--checkpoint",
            "from_file/checkpoints/policy_seed_4.toml",
            "--episodes",
            "2",
            "--speed-multiplier",
            "2",
            "--out",
            "ev",
        ],
        dir,
    ));
    assert!(stdout.contains("point_gait x2"), "{stdout}");
    let summary = std::fs::read_to_string(dir.join("ev/reports/eval_summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("point_gait,2,false,true,2,"), "{summary}");
}

#[test]
fn env_var_overrides_config_but_not_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("exp.toml"),
        "mode = \"ppo\"\ntotal_steps = 64\nrollout_length = 64\nn_epochs = 1\neval_episodes = 1\nout_dir = \"from_file\"\n",
    )
    .unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["train", "--config", "exp.toml"];
        args.extend_from_slice(extra);
        Command::new(env!("CARGO_BIN_EXE_gaitprior"))
            .args(&args)
            .current_dir(dir)
            .env("GAITPRIOR_OUT", "from_env")
            .output()
            .unwrap()
    };
    ok(&run(&[]));
    assert!(dir.join("from_env/logs/seed_0.csv").is_file());
    assert!(!dir.join("from_file").exists());
    ok(&run(&["--out", "from_flag"]));
    assert!(dir.join("from_flag/logs/seed_0.csv").is_file());
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = gaitprior(&["gen-demo", "--env", "cheetah", "--out", "d.toml"], dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("point_gait"));

    std::fs::write(dir.join("bad.toml"), "learning_rate = 3\n").unwrap();
    assert_eq!(gaitprior(&["train", "--config", "bad.toml"], dir).status.code(), Some(2));

    std::fs::write(dir.join("ckpt.toml"), "magic = \"nope\"\nformat_version = 1\n").unwrap();
    assert_eq!(gaitprior(&["eval", "--checkpoint", "ckpt.toml"], dir).status.code(), Some(2));

    assert_eq!(gaitprior(&["train"], dir).status.code(), Some(2));
}

#[test]
fn missing_file_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gaitprior(&["analyze", "--demo", "absent.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
}
