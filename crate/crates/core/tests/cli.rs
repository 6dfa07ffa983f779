use std::process::Command;

fn sve() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sve"))
}

#[test]
fn mesh_dump_prints_nodes() {
    let out = sve()
        .args(["mesh", "dump", "--horizon", "10", "--n", "10", "--r", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let nodes: Vec<f64> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(nodes.len(), 11);
    for (k, node) in nodes.iter().enumerate() {
        let exact = 10.0 * (k as f64 / 10.0).powi(2);
        assert!(
            (node - exact).abs() <= 1e-15 * exact,
            "node {k}: {node} vs {exact}"
        );
    }
    assert_eq!(nodes[10], 10.0);
}

#[test]
fn soe_build_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("soe.csv");
    let status = sve()
        .args([
            "soe",
            "build",
            "--gamma",
            "0.5",
            "--delta",
            "1e-3",
            "--horizon",
            "1",
            "--eps",
            "1e-6",
            "--out",
        ])
        .arg(&file)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&file).unwrap();
    assert!(text.lines().any(|l| l == "tau,omega"));
    let out = sve()
        .args(["soe", "verify", "--grid", "20000", "--in"])
        .arg(&file)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("max_abs_err="));

    // Tampering with a weight breaks certification: exit code 3.
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // The slowest-decaying term, which matters on the whole interval.
    let first = lines.iter().position(|l| l == "tau,omega").unwrap() + 1;
    let (tau, _) = lines[first].split_once(',').unwrap();
    lines[first] = format!("{tau},1e3");
    std::fs::write(&file, lines.join("\n")).unwrap();
    let status = sve()
        .args(["soe", "verify", "--in"])
        .arg(&file)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn converge_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("em.csv");
    let status = sve()
        .args([
            "converge",
            "--scheme",
            "em",
            "--alpha",
            "0.9",
            "--beta",
            "0.1",
            "--r",
            "1",
            "--levels",
            "3:5",
            "--nref",
            "2^7",
            "--paths",
            "50",
            "--seed",
            "4",
            "--preset",
            "example41",
            "--out",
        ])
        .arg(&file)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&file).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "scheme,alpha,beta,r,N,err_end,err_max,paths,seed,wall_s"
    );
    assert!(lines.len() >= 6);
    for (line, n) in lines[1..4].iter().zip([8, 16, 32]) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 10);
        assert_eq!(cols[0], "em");
        assert_eq!(cols[4].parse::<usize>().unwrap(), n);
        assert_eq!(cols[7], "50");
        assert_eq!(cols[8], "4");
    }
    assert!(lines[4].starts_with("# order_end="));
    assert!(lines[5].starts_with("# order_max="));
}

#[test]
fn affine_preset_and_fast_em() {
    let out = sve()
        .args([
            "converge", "--scheme", "fast-em", "--alpha", "0.5", "--beta", "0.2", "--r", "2",
            "--levels", "3:4", "--nref", "64", "--paths", "20", "--preset", "affine", "--a1", "-1",
            "--b0", "0.5", "--eps", "1e-8",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("scheme,"));
}

#[test]
fn exit_codes() {
    // Level that does not divide the reference.
    let status = sve()
        .args([
            "converge", "--scheme", "em", "--alpha", "0.9", "--beta", "0.1", "--levels", "3:5",
            "--nref", "48",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    // Closed-form Milstein with beta > 0.
    let status = sve()
        .args([
            "converge", "--scheme", "milstein", "--alpha", "0.9", "--beta", "0.1", "--levels",
            "3:4", "--nref", "64",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    // Unknown scheme, unknown flag.
    assert_eq!(
        sve()
            .args(["converge", "--scheme", "rk4", "--alpha", "0.5", "--beta", "0"])
            .status()
            .unwrap()
            .code(),
        Some(1)
    );
    assert_eq!(
        sve()
            .args(["mesh", "dump", "--bogus"])
            .status()
            .unwrap()
            .code(),
        Some(1)
    );
    // Divergent paths: numerical failure.
    let status = sve()
        .args([
            "converge", "--scheme", "em", "--alpha", "0.5", "--beta", "0", "--levels", "2:3",
            "--nref", "16", "--paths", "5", "--preset", "affine", "--a1", "1e300",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    // An unreachable tolerance fails certification.
    let status = sve()
        .args([
            "soe", "build", "--gamma", "0.5", "--delta", "1e-3", "--eps", "1e-15",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    assert_eq!(sve().arg("--help").status().unwrap().code(), Some(0));
}

#[test]
fn bench_and_regularity_subcommands() {
    let out = sve()
        .args([
            "bench", "--alpha", "0.9", "--beta", "0.1", "--r", "2", "--levels", "4:5",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("N,em_s,fast_em_s"));
    assert!(text.contains("# em_slope="));

    let out = sve()
        .args([
            "regularity",
            "--alpha",
            "0.9",
            "--beta",
            "0.1",
            "--nref",
            "256",
            "--paths",
            "50",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# interior_exponent="));
    assert!(text.contains("# origin_exponent="));
}
