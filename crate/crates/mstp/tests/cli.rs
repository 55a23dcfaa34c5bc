use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mstp::dataset::load_dataset;
use mstp::truth::TruthFile;

fn mstp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mstp")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

const CONFIG: &str = r#"
model = "mstp"

[zones]
west = ["s001", "s002", "s004", "s005"]
east = ["s003", "s006"]

[splines]
L = 4

[chain]
iters = 400
burn_in = 200
thin = 2
seed = 3

[output]
cell_px = 4

[simulate]
grid = [3, 2]
years = 20
indexes = 2
seed = 9
"#;

fn setup(dir: &Path) -> (PathBuf, PathBuf) {
    let config = dir.join("run.toml");
    fs::write(&config, CONFIG).unwrap();
    let sim = dir.join("sim");
    let out = mstp(&["simulate", "-c", config.to_str().unwrap(), "--output", sim.to_str().unwrap()]);
    ok(&out);
    (config, sim.join("dataset.csv"))
}

#[test]
fn simulate_writes_loadable_dataset_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let (_, data) = setup(dir.path());
    let loaded = load_dataset(&data).unwrap();
    assert_eq!((loaded.n_sites(), loaded.n_indexes(), loaded.n_times()), (6, 2, 20));
    let truth = TruthFile::from_json(&fs::read_to_string(data.with_file_name("truth.json")).unwrap()).unwrap();
    assert_eq!(truth.site_ids, loaded.site_ids());
    assert_eq!(truth.n_splines, 4);
    assert_eq!(truth.delta.len(), 12);
    truth.to_state().unwrap();
}

#[test]
fn fit_writes_every_artifact_per_zone() {
    let dir = tempfile::tempdir().unwrap();
    let (config, data) = setup(dir.path());
    let out_dir = dir.path().join("fit");
    let out = mstp(&[
        "fit",
        "-c",
        config.to_str().unwrap(),
        "--input",
        data.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    ok(&out);
    for zone in ["west", "east"] {
        let z = out_dir.join(zone);
        for f in ["trend_summary.csv", "posterior.bin", "ic_report.txt", "diagnostics.csv", "trace.csv"] {
            assert!(z.join(f).is_file(), "{zone}/{f} missing");
        }
        for index in ["index1", "index2"] {
            for kind in ["delta", "t"] {
                let png = z.join("maps").join(format!("{index}_{kind}.png"));
                assert!(png.is_file(), "{} missing", png.display());
            }
        }
        let trend = fs::read_to_string(z.join("trend_summary.csv")).unwrap();
        let mut lines = trend.lines();
        assert_eq!(lines.next().unwrap(), "site,lon,lat,index,delta_mean,delta_sd,t,significant");
        let sites = if zone == "west" { 4 } else { 2 };
        assert_eq!(lines.count(), sites * 2);
        let ic = fs::read_to_string(z.join("ic_report.txt")).unwrap();
        assert!(ic.contains("DIC") && ic.contains("WAIC"), "{ic}");
    }
}

#[test]
fn chi_tables_are_symmetric_with_unit_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let (config, data) = setup(dir.path());
    let out_dir = dir.path().join("chi");
    let out = mstp(&[
        "chi",
        "-c",
        config.to_str().unwrap(),
        "--input",
        data.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    ok(&out);
    let text = fs::read_to_string(out_dir.join("west").join("chi_cross.csv")).unwrap();
    let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 2);
    let v = |i: usize, j: usize| rows[i][j + 1].parse::<f64>().unwrap();
    assert_eq!(v(0, 0), 1.0);
    assert_eq!(v(1, 1), 1.0);
    assert_eq!(v(0, 1), v(1, 0));
    assert!(out_dir.join("west").join("chi_spatial_index1.csv").is_file());
}

#[test]
fn compare_tabulates_each_model() {
    let dir = tempfile::tempdir().unwrap();
    let (config, data) = setup(dir.path());
    let out_dir = dir.path().join("cmp");
    let out = mstp(&[
        "compare",
        "-c",
        config.to_str().unwrap(),
        "--input",
        data.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
        "--set",
        "zones={}",
    ]);
    ok(&out);
    let text = fs::read_to_string(out_dir.join("comparison.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "zone,model,dic,waic,mean_sd_delta,best_dic,best_waic,best_mean_sd_delta");
    let models: Vec<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(models, ["mgp", "mtp", "mstp"]);
}

#[test]
fn print_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (config, _) = setup(dir.path());
    let out = mstp(&["fit", "-c", config.to_str().unwrap(), "--seed", "17", "--print-config"]);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = mstp::RunConfig::from_toml(&text).unwrap();
    assert_eq!(cfg.chain.seed, 17);
    assert_eq!(cfg.zones.len(), 2);
    assert_eq!(cfg.splines.count, 4);
}

#[test]
fn exit_codes_classify_failures() {
    let dir = tempfile::tempdir().unwrap();
    let (config, data) = setup(dir.path());
    let c = config.to_str().unwrap();

    let bad = mstp(&["fit", "-c", c, "--set", "chain.thin=0"]);
    assert_eq!(bad.status.code(), Some(1));
    let bad = mstp(&["fit", "-c", c, "--set", "no_such_key=1"]);
    assert_eq!(bad.status.code(), Some(1));

    let missing = mstp(&["fit", "-c", c, "--input", dir.path().join("absent.csv").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));

    let text = fs::read_to_string(&data).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(5);
    let holey = dir.path().join("holey.csv");
    fs::write(&holey, lines.join("\n")).unwrap();
    let out = mstp(&["fit", "-c", c, "--input", holey.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));

    let ill = mstp(&["fit", "-c", c, "--input", data.to_str().unwrap(), "--set", "splines.L=30"]);
    assert_eq!(ill.status.code(), Some(1), "{}", String::from_utf8_lossy(&ill.stderr));
}
