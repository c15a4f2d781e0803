use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SHELLS: &str = "hoppings.shells = 0.0765 -0.0149 -0.0078\n";

fn bloch2d(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_bloch2d"))
        .arg("--config")
        .arg(&cfg)
        .arg("--output")
        .arg(dir.join("out"))
        .args(args)
        .env_remove("BLOCH2D_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(name)).unwrap()
}

/// Data rows of a CSV with `#` provenance lines, parsed to numbers.
fn rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let data = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, data)
}

/// Small, fast evolution settings around a three-shell table.
fn small(force: &str, qr: Option<&str>) -> String {
    let mut s = format!(
        "{SHELLS}packet.L = 81\npacket.sigma = 10\nevolution.t_end = 20\nevolution.stride = 1\nforce.F = {force}\n"
    );
    if let Some(qr) = qr {
        s.push_str(&format!("force.qr = {qr}\n"));
    }
    s
}

#[test]
fn hoppings_from_the_potential_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let o = bloch2d(tmp.path(), "potential.V0 = -1.5\n", &["hoppings"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = read(tmp.path(), "hoppings.dat");
    assert!(first.contains("V0 = -1.5 E_r, N_c = 7, M = 32"), "{first}");
    assert!(first.contains("hoppings_sha256 = "));
    let j1: f64 = first
        .lines()
        .find(|l| l.starts_with("1 0 "))
        .and_then(|l| l.split_whitespace().nth(2))
        .unwrap()
        .parse()
        .unwrap();
    assert!((j1 - 0.0765).abs() < 0.02 * 0.0765, "J1 = {j1}");

    let log = read(tmp.path(), "log_abs_J.csv");
    let (header, data) = {
        let body: String = log
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| format!("{l}\n"))
            .collect();
        let mut lines = body.lines();
        let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
        (header, lines.map(String::from).collect::<Vec<_>>())
    };
    assert_eq!(header, ["m1", "m2", "log_abs_J"]);
    assert_eq!(data.len(), 81);
    assert!(data.contains(&"0,0,".to_string()));
    assert!(tmp.path().join("out/log_abs_J.svg").exists());

    let o = bloch2d(tmp.path(), "potential.V0 = -1.5\n", &["hoppings"]);
    assert!(o.status.success());
    assert_eq!(read(tmp.path(), "hoppings.dat"), first);
    assert_eq!(read(tmp.path(), "log_abs_J.csv"), log);
}

#[test]
fn table_written_by_hoppings_reads_back() {
    let tmp = TempDir::new().unwrap();
    let o = bloch2d(tmp.path(), "potential.V0 = -1.5\n", &["hoppings"]);
    assert!(o.status.success());
    let table = tmp.path().join("out/hoppings.dat");
    let cfg = format!(
        "hoppings.file = {}\nforce.F = 0.5 -0.5\nforce.qr = 1 -1\n",
        table.display()
    );
    let o = bloch2d(tmp.path(), &cfg, &["drift"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("drift line: (1, 1)"));
}

#[test]
fn zero_depth_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let o = bloch2d(tmp.path(), "potential.V0 = 0\n", &["hoppings"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("potential.V0"));
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let o = bloch2d(
        tmp.path(),
        "potential.V0 = -1.5\npacket.sigma = -3\n",
        &["drift"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("packet.sigma"), "{}", stderr(&o));

    let o = bloch2d(
        tmp.path(),
        "potential.V0 = -1.5\n\nforce.Q = 1 1\n",
        &["drift"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = bloch2d(tmp.path(), "hoppings.file = missing.dat\n", &["drift"]);
    assert_eq!(o.status.code(), Some(2));

    let o = bloch2d(tmp.path(), SHELLS, &["--set", "packet.L=4", "drift"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn drift_lines_of_the_paper_cases() {
    let tmp = TempDir::new().unwrap();
    let cfg = format!("{SHELLS}force.F = 0.5 -0.5; 0.7 -0.7; 0.4 -0.8\n");
    let o = bloch2d(tmp.path(), &cfg, &["drift"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.matches("drift line: (1, 1)").count(), 2, "{text}");
    assert_eq!(text.matches("drift line: (2, 1)").count(), 1, "{text}");
    assert!(
        text.contains("contributing offsets: (1,1) (-1,-1)") || text.contains("(-1,-1) (1,1)"),
        "{text}"
    );
}

#[test]
fn semiclassical_columns_and_units() {
    let tmp = TempDir::new().unwrap();
    let o = bloch2d(
        tmp.path(),
        &small("0.5 -0.5", Some("1 -1")),
        &["semiclassical"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, data) = rows(&read(tmp.path(), "semiclassical_case1.csv"));
    assert_eq!(header, ["t_Er", "t_J1", "x", "y"]);
    assert_eq!(data.len(), 21);
    for r in &data {
        assert!((r[1] - r[0] * 0.0765).abs() < 1e-9);
    }
}

fn slope_direction(data: &[Vec<f64>], cols: (usize, usize)) -> [f64; 2] {
    let (a, b) = (&data[0], &data[data.len() - 1]);
    [b[cols.0] - a[cols.0], b[cols.1] - a[cols.1]]
}

#[test]
fn compare_draws_the_predicted_lines() {
    let tmp = TempDir::new().unwrap();
    let o = bloch2d(
        tmp.path(),
        &small("0.5 -0.5; 0.4 -0.8", Some("1 -1; 1 -2")),
        &["compare"],
    );
    assert!(o.status.success(), "{}", stderr(&o));

    let (header, case1) = rows(&read(tmp.path(), "compare_case1.csv"));
    assert_eq!(
        header,
        [
            "t_Er",
            "t_J1",
            "exact_com1",
            "exact_com2",
            "semiclassical_com1",
            "semiclassical_com2",
            "line_com1",
            "line_com2"
        ]
    );
    let d = slope_direction(&case1, (6, 7));
    assert!((d[0] - d[1]).abs() < 1e-9 * d[0].abs(), "{d:?}");
    let (_, case2) = rows(&read(tmp.path(), "compare_case2.csv"));
    let d = slope_direction(&case2, (6, 7));
    assert!((d[0] - 2.0 * d[1]).abs() < 1e-9 * d[0].abs(), "{d:?}");

    // The exact centre of mass follows the semiclassical orbit closely for a wide packet.
    for r in &case1 {
        assert!((r[2] - r[4]).hypot(r[3] - r[5]) < 0.1, "{r:?}");
    }
    let svg = read(tmp.path(), "compare_case1.svg");
    assert!(svg.starts_with("<svg") && svg.contains("drift line"));
}

#[test]
fn zero_force_moves_along_the_group_velocity() {
    let tmp = TempDir::new().unwrap();
    // Near k = 0 the three shells almost cancel in grad E, so a larger k0 is used to make
    // the packet move several sites.
    let cfg = small("0 0", None) + "packet.k0 = 0.6 0.3\nevolution.t_end = 10\n";
    let o = bloch2d(
        tmp.path(),
        &cfg.replace("evolution.t_end = 20\n", ""),
        &["compare"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = read(tmp.path(), "compare_case1.csv");
    let (_, data) = rows(&text);
    let last = data.last().unwrap();
    let t = last[0];
    let (vx, vy) = (last[6] / t, last[7] / t);
    let k0 = (0.6f64, 0.3f64);
    let grad = [
        2.0 * (0.0765 * (k0.0.sin() + (k0.0 + k0.1).sin())
            - 0.0149
                * (2.0 * (2.0 * k0.0 + k0.1).sin() + (k0.0 + 2.0 * k0.1).sin()
                    - (k0.1 - k0.0).sin())
            - 0.0078 * (2.0 * (2.0 * k0.0).sin() + 2.0 * (2.0 * k0.0 + 2.0 * k0.1).sin())),
        2.0 * (0.0765 * (k0.1.sin() + (k0.0 + k0.1).sin())
            - 0.0149
                * ((2.0 * k0.0 + k0.1).sin()
                    + 2.0 * (k0.0 + 2.0 * k0.1).sin()
                    + (k0.1 - k0.0).sin())
            - 0.0078 * (2.0 * (2.0 * k0.1).sin() + 2.0 * (2.0 * k0.0 + 2.0 * k0.1).sin())),
    ];
    assert!(
        (vx - grad[0]).abs() < 1e-12 && (vy - grad[1]).abs() < 1e-12,
        "{vx} {vy} {grad:?}"
    );
    for r in &data {
        assert!((r[6] - vx * r[0]).abs() < 1e-9 && (r[7] - vy * r[0]).abs() < 1e-9);
    }
    // The exact centre of mass moves on a straight line; its speed differs from grad E(k0)
    // by a finite-width correction of order 1/sigma^2.
    let ex: Vec<f64> = data.iter().map(|r| r[2]).collect();
    let ey: Vec<f64> = data.iter().map(|r| r[3]).collect();
    let moved = ex.last().unwrap().hypot(*ey.last().unwrap());
    assert!(moved > 5.0, "{moved}");
    for r in &data {
        let s = r[0] / t;
        let off = (r[2] - s * ex.last().unwrap()).hypot(r[3] - s * ey.last().unwrap());
        assert!(off < 1e-3 * moved, "exact COM leaves its chord by {off}");
    }
    let off = (last[2] - last[6]).hypot(last[3] - last[7]);
    assert!(
        off < 0.08 * moved,
        "exact COM is {off} sites from the line after {moved} sites"
    );
}

#[test]
fn boundary_abort_is_recorded_with_exit_three() {
    let tmp = TempDir::new().unwrap();
    let cfg =
        format!("{SHELLS}packet.L = 21\npacket.sigma = 3\nforce.F = 0 0\nevolution.t_end = 100\n");
    let o = bloch2d(tmp.path(), &cfg, &["evolve"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let text = read(tmp.path(), "evolve_case1.csv");
    let footer = text.lines().last().unwrap();
    assert!(footer.starts_with("# aborted: boundary mass"), "{footer}");
    let (header, data) = rows(&text);
    assert_eq!(header[0], "t_Er");
    assert!(!data.is_empty());
}

#[test]
fn evolve_flags_and_determinism() {
    let tmp = TempDir::new().unwrap();
    let args = [
        "evolve", "--side", "61", "--sigma", "6", "--force", "0.7 -0.7", "--t-end", "10",
    ];
    let o = bloch2d(tmp.path(), SHELLS, &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = read(tmp.path(), "evolve_case1.csv");
    assert!(first.contains("# packet.L = 61"));
    assert!(first.contains("# force.F = 0.7 -0.7"));
    let (header, data) = rows(&first);
    assert_eq!(
        header,
        [
            "t_Er",
            "t_J1",
            "com1",
            "com2",
            "norm",
            "energy",
            "boundary_mass"
        ]
    );
    let t_end_j1 = data.last().unwrap()[1];
    assert!((t_end_j1 - 10.0).abs() < 1e-9, "{t_end_j1}");
    for r in &data {
        assert!((r[4] - 1.0).abs() < 1e-6);
    }
    let o = bloch2d(tmp.path(), SHELLS, &args);
    assert!(o.status.success());
    assert_eq!(read(tmp.path(), "evolve_case1.csv"), first);
}

#[test]
fn output_directory_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, format!("{SHELLS}output.dir = ignored\n")).unwrap();
    let target = tmp.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_bloch2d"))
        .current_dir(tmp.path())
        .arg("--config")
        .arg(&cfg)
        .arg("bands")
        .env("BLOCH2D_OUTPUT_DIR", &target)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let bands = std::fs::read_to_string(target.join("bands.csv")).unwrap();
    assert!(bands.contains("theta1,theta2,E"));
    assert!(!tmp.path().join("ignored").exists());
}

#[test]
fn help_lists_the_keys() {
    let o = Command::new(env!("CARGO_BIN_EXE_bloch2d"))
        .arg("--help")
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    for key in [
        "potential.V0",
        "packet.sigma",
        "force.qr",
        "evolution.stride",
        "output.plot",
    ] {
        assert!(text.contains(key), "{key} missing from --help");
    }
}
