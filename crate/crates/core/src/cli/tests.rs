use super::*;

fn tmp(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("microdarcy_cli_{tag}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    d
}

fn small(dir: &Path) -> Config {
    let mut c = Config::default();
    c.geometry.resolution = 4;
    c.darcy.resolution = 4;
    c.output.directory = dir.to_path_buf();
    c
}

const SAMPLE: &str = r#"
[geometry]
resolution = 6
obstacle_radius = 0.2
obstacle_center = [0.5, 0.5, 0.5]

[params]
N2 = 0.25
Rc = 2.0
beta = 1.0

[forcing]
f = "shear"
g = [0.0, 1.0, 0.0]

[sweep]
epsilons = ["1/2", 0.25]
per_cell_resolution = 4
darcy_resolution = 4

[output]
directory = "somewhere"
formats = ["json", "csv"]
"#;

#[test]
fn sample_config_parses() {
    let c = Config::from_toml(SAMPLE).unwrap();
    assert_eq!(c.forcing.f, Forcing::Named("shear".into()));
    assert_eq!(c.forcing.g, Forcing::Constant([0.0, 1.0, 0.0]));
    let p = c.dimensionless().unwrap();
    assert_eq!((p.n2, p.rc, p.beta), (0.25, 2.0, 1.0));
    assert_eq!(p.gamma(), 0.0);
    assert_eq!(c.darcy, default_darcy());
    let s = c.sweep_config(1.25).unwrap();
    assert_eq!(s.epsilons, vec![0.5, 0.25]);
    assert!(!c.wants(Format::Vtk));
}

#[test]
fn default_config_round_trips() {
    let c = Config::default();
    assert!(c.validate().is_ok());
    assert_eq!(Config::from_toml(&c.to_toml()).unwrap(), c);
}

#[test]
fn viscosity_quadruple() {
    let s = SAMPLE.replace("N2 = 0.25\nRc = 2.0", "nu = 3.0\nnu_r = 1.0\nca = 0.5\ncd = 0.5");
    let p = Config::from_toml(&s).unwrap().dimensionless().unwrap();
    assert_eq!((p.n2, p.rc), (0.25, 0.25));
}

#[test]
fn invalid_configs_rejected() {
    let bad = [
        SAMPLE.replace("N2 = 0.25", "N2 = 0.25\nnu = 1.0\nnu_r = 1.0\nca = 1.0\ncd = 1.0"),
        SAMPLE.replace("N2 = 0.25", "nu = 1.0"),
        SAMPLE.replace("\"1/2\", 0.25", "0.3"),
        SAMPLE.replace("\"1/2\", 0.25", "\"2/3\""),
        SAMPLE.replace("\"1/2\", 0.25", "1.0"),
        SAMPLE.replace("beta = 1.0", "beta = 1.0\nbogus = 3"),
        SAMPLE.replace("\"shear\"", "\"tornado\""),
        SAMPLE.replace("obstacle_radius = 0.2", "obstacle_radius = 0.6"),
        SAMPLE.replace("N2 = 0.25", "N2 = 1.5"),
        SAMPLE.replace("formats = [\"json\", \"csv\"]", "formats = []"),
        SAMPLE.replace("Rc = 2.0\n", ""),
    ];
    for s in bad {
        let e = Config::from_toml(&s).unwrap_err();
        assert!(matches!(e, Error::ConfigInvalid(_)), "{e}");
        assert_eq!(exit_code(&e), 2);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(exit_code(&Error::WellPosednessViolated { gamma_sq: 1.0, bound: 0.5 }), 3);
    assert_eq!(exit_code(&Error::SolverBreakdown(1.0)), 4);
    assert_eq!(exit_code(&Error::SingularSystem("x".into())), 4);
    assert_eq!(exit_code(&Error::NonIntegerTiling(0.3)), 2);
    assert_eq!(main_with_args(["microdarcy", "check", "--config", "/nonexistent/cfg.toml"].map(String::from)), 2);
    assert_eq!(main_with_args(["microdarcy", "frobnicate"].map(String::from)), 2);
}

#[test]
fn check_gamma_zero_passes() {
    let d = tmp("check0");
    let files = run(Command::Check, &small(&d), 1.25).unwrap();
    let r: CheckReport = serde_json::from_str(&fs::read_to_string(&files[0]).unwrap()).unwrap();
    assert!(r.satisfied && r.verdict.is_none());
    assert_eq!(r.gamma, 0.0);
    fs::remove_dir_all(&d).unwrap();
}

#[test]
fn check_violation_exits_three() {
    // γ = 0.1 − 0.5 − 5 = −5.4, γ² = 29.16
    let d = tmp("check3");
    let mut c = small(&d);
    c.params = Params { n2: Some(0.5), rc: Some(1.0), alpha: Some(10.0), beta: 10.0, ..Params::default() };
    let cfg = d.with_extension("toml");
    fs::write(&cfg, c.to_toml()).unwrap();
    let code = main_with_args(["microdarcy", "check", "--config", cfg.to_str().unwrap()].map(String::from));
    let r: CheckReport = serde_json::from_str(&fs::read_to_string(d.join("verdict.json")).unwrap()).unwrap();
    let v = r.verdict.unwrap();
    assert!((v.gamma * v.gamma - 29.16).abs() <= 1e-12);
    assert_eq!(code, if v.bound > 29.16 { 0 } else { 3 });
    assert_eq!(code, 3);
    assert!(!r.satisfied);
    fs::remove_dir_all(&d).unwrap();
    fs::remove_file(&cfg).unwrap();
}

#[test]
fn safety_factor_below_one_rejected() {
    let d = tmp("safety");
    assert!(matches!(run(Command::Check, &small(&d), 0.5), Err(Error::ConfigInvalid(_))));
    let _ = fs::remove_dir_all(&d);
}

#[test]
fn tensors_then_darcy_deterministic() {
    let d = tmp("pipeline");
    let c = small(&d);
    run(Command::Tensors, &c, 1.25).unwrap();
    let first = fs::read(d.join("tensors.json")).unwrap();
    let files = run(Command::Darcy, &c, 1.25).unwrap();
    assert!(files.iter().any(|f| f.ends_with("darcy.vtk")));
    let darcy1 = fs::read(d.join("darcy.json")).unwrap();
    run(Command::Tensors, &c, 1.25).unwrap();
    assert_eq!(fs::read(d.join("tensors.json")).unwrap(), first);
    // without the cached tensors the Darcy step recomputes them identically
    fs::remove_file(d.join("tensors.json")).unwrap();
    run(Command::Darcy, &c, 1.25).unwrap();
    assert_eq!(fs::read(d.join("darcy.json")).unwrap(), darcy1);
    let t = EffectiveTensors::from_json(std::str::from_utf8(&first).unwrap()).unwrap();
    assert_eq!(t.mesh.resolution, 4);
    fs::remove_dir_all(&d).unwrap();
}
