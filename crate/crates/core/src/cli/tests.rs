use super::*;
use crate::network::samples::{diffusive, example1, example2, swap_pair, theorem1_2x3};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn round_trip(spec: &NetworkSpec) -> NetworkSpec {
    let text = SpecDocument::from_spec(spec).to_json();
    SpecDocument::from_json(&text).unwrap().to_spec().unwrap()
}

fn temp(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cmn-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn cmd(args: &[&str]) -> (i32, String) {
    let cli = Cli::try_parse_from(std::iter::once("cmn").chain(args.iter().copied())).unwrap();
    let mut out = Vec::new();
    let code = run(&cli, &mut out);
    (code, String::from_utf8(out).unwrap())
}

#[test]
fn reals_and_rationals() {
    assert_eq!(parse_real("7/2").unwrap(), 3.5);
    assert_eq!(parse_real(" -1/3 ").unwrap(), -1.0 / 3.0);
    assert_eq!(parse_real("0.1").unwrap(), 0.1);
    assert_eq!(parse_real("inf").unwrap(), f64::INFINITY);
    assert!(parse_real("1/0").is_err());
    assert!(parse_real("1/-2").is_err());
    assert!(parse_real("x").is_err());
}

#[test]
fn round_trips_preserve_the_network() {
    for spec in [
        example1(DMatrix::identity(2, 2)),
        example2(diffusive(0.05)),
        swap_pair(1.0),
        theorem1_2x3(),
    ] {
        assert_eq!(round_trip(&spec), spec);
    }
}

#[test]
fn canonical_text_is_stable() {
    let spec = example2(diffusive(0.05));
    let a = SpecDocument::from_spec(&spec).to_json();
    let b = SpecDocument::from_spec(&round_trip(&spec)).to_json();
    assert_eq!(a, b);
    // keys are sorted
    let c = a.find("\"coupling\"").unwrap();
    let g = a.find("\"graph\"").unwrap();
    let n = a.find("\"nodes\"").unwrap();
    assert!(a.find("\"format_version\"").unwrap() < g && c < g && g < n);
}

#[test]
fn rational_text_loads_like_decimals() {
    let spec = example1(DMatrix::identity(2, 2));
    let text = SpecDocument::from_spec(&spec).to_json().replace("3.5", "\"7/2\"");
    assert!(text.contains("7/2"));
    let back = SpecDocument::from_json(&text).unwrap().to_spec().unwrap();
    assert_eq!(back, spec);
}

#[test]
fn diagnostics_name_their_location() {
    let e = SpecDocument::from_json("{\n  \"format_version\": \"1\",\n  \"graph\": 3\n}").unwrap_err();
    assert!(e.to_string().contains("line 3"), "{e}");
    let spec = example1(DMatrix::identity(2, 2));
    let text = SpecDocument::from_spec(&spec).to_json().replacen("[\n          1,\n          1\n        ]", "[1, 2]", 1);
    let e = SpecDocument::from_json(&text).unwrap().to_spec().unwrap_err();
    assert_eq!(e.location, "nodes[0].transition", "{e}");
    let e = SpecDocument::from_json(&SpecDocument::from_spec(&spec).to_json().replace("\"1\"", "\"2\"")).unwrap_err();
    assert_eq!(e.location, "format_version");
}

#[test]
fn tampering_changes_the_digest() {
    let spec = example1(DMatrix::identity(2, 2));
    let doc = SpecDocument::from_spec(&spec);
    assert_eq!(doc.digest(), spec_digest(&round_trip(&spec)));
    assert_eq!(doc.digest().len(), 64);
    let tampered = example1(diffusive(1e-6));
    assert_ne!(spec_digest(&spec), spec_digest(&tampered));
}

#[test]
fn loops_are_one_based() {
    assert_eq!(parse_loop("1", 1).unwrap(), vec![vec![0]]);
    assert_eq!(parse_loop("1,1", 1).unwrap(), vec![vec![0], vec![0]]);
    assert_eq!(parse_loop("1.2,2.1", 2).unwrap(), vec![vec![0, 1], vec![1, 0]]);
    assert!(parse_loop("0", 1).is_err());
    assert!(parse_loop("1.2", 1).is_err());
}

#[test]
fn verify_writes_a_reproducible_certificate() {
    let spec = example1(DMatrix::identity(2, 2));
    let p = temp("ex1.json", &SpecDocument::from_spec(&spec).to_json());
    let out1 = p.with_extension("cert1.json");
    let out2 = p.with_extension("cert2.json");
    let (code, text) = cmd(&["verify", p.to_str().unwrap(), "--out", out1.to_str().unwrap()]);
    assert_eq!(code, EXIT_PASS, "{text}");
    assert!(text.contains("entropy_bound 0.962424"), "{text}");
    cmd(&["verify", p.to_str().unwrap(), "--out", out2.to_str().unwrap()]);
    let (a, b) = (std::fs::read_to_string(&out1).unwrap(), std::fs::read_to_string(&out2).unwrap());
    assert_eq!(a, b);
    assert!(certificate_matches(&a, &spec));
    assert!(!certificate_matches(&a, &example1(diffusive(0.01))));
    // s = 0: infinite stable margins are written as strings
    assert!(a.contains("\"stable_margin\": \"inf\""));
}

#[test]
fn exit_codes() {
    let bad = example1(diffusive(0.2));
    let p = temp("bad.json", &SpecDocument::from_spec(&bad).to_json());
    let (code, text) = cmd(&["verify", p.to_str().unwrap()]);
    assert_eq!(code, EXIT_FAIL, "{text}");
    assert!(text.contains("binding entry"));
    assert_eq!(cmd(&["margin", p.to_str().unwrap()]).0, EXIT_FAIL);
    let m = temp("malformed.json", "{ \"format_version\": ");
    assert_eq!(cmd(&["verify", m.to_str().unwrap()]).0, EXIT_INVALID);
    assert_eq!(cmd(&["verify", "/nonexistent/spec.json"]).0, EXIT_INVALID);
}

#[test]
fn margin_and_entropy_commands() {
    let p = temp("m.json", &SpecDocument::from_spec(&example1(DMatrix::identity(2, 2))).to_json());
    let (code, text) = cmd(&["margin", p.to_str().unwrap()]);
    assert_eq!(code, EXIT_PASS);
    assert!(text.contains("eps* 0.5"), "{text}");
    let (code, text) = cmd(&["entropy", p.to_str().unwrap()]);
    assert_eq!(code, EXIT_PASS);
    assert!(text.starts_with("bound 0.962424"), "{text}");
    let q = temp("perm.json", &SpecDocument::from_spec(&swap_pair(1.0)).to_json());
    let (code, text) = cmd(&["entropy", q.to_str().unwrap()]);
    assert_eq!(code, EXIT_PASS, "{text}");
    assert!(text.starts_with("bound 0.000000"), "{text}");
}

#[test]
fn periodic_command() {
    let p = temp("t1.json", &SpecDocument::from_spec(&theorem1_2x3()).to_json());
    let out = p.with_extension("orbit.json");
    let (code, text) = cmd(&["periodic", p.to_str().unwrap(), "--auto", "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_PASS, "{text}");
    assert!(text.contains("period 6"));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["orbits"][0]["period"], 6);
    let q = temp("e1.json", &SpecDocument::from_spec(&example1(DMatrix::identity(2, 2))).to_json());
    let (code, text) = cmd(&["periodic", q.to_str().unwrap(), "--loop", "1.1"]);
    assert_eq!(code, EXIT_INVALID, "{text}");
    assert!(text.contains("inadmissible"));
    assert_eq!(cmd(&["periodic", q.to_str().unwrap(), "--auto"]).0, EXIT_INVALID);
}

#[test]
fn simulate_command() {
    let p = temp("s.json", &SpecDocument::from_spec(&example1(DMatrix::identity(2, 2))).to_json());
    let (code, text) = cmd(&["simulate", p.to_str().unwrap(), "--x0", "-0.6,3.6", "--steps", "3"]);
    assert_eq!(code, EXIT_PASS);
    assert!(text.contains("0 (1,2) [-0.6, 3.6]"), "{text}");
    assert!(text.contains("stayed 3 steps"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn diffusive_specs_round_trip(alpha in -0.5f64..0.5) {
        let spec = example1(diffusive(alpha));
        prop_assert_eq!(round_trip(&spec), spec);
    }

    #[test]
    fn rationals_round_to_the_quotient(p in -1_000_000i64..1_000_000, q in 1i64..1_000_000) {
        prop_assert_eq!(parse_real(&format!("{p}/{q}")).unwrap(), p as f64 / q as f64);
    }
}

fn fixture(name: &str) -> NetworkSpec {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    load_spec(&path).unwrap().1
}

#[test]
fn fixtures_encode_the_sample_networks() {
    assert_eq!(fixture("example1.json"), example1(DMatrix::identity(2, 2)));
    assert_eq!(fixture("example1_alpha_0.2.json"), example1(diffusive(0.2)));
    // the fixture states c - a·c exactly; the sample computes it in floating point
    let (f, mut s) = (fixture("example2.json"), example2(diffusive(0.05)));
    let (x, y) = (&f.coupling.ambient.cells()[0].piece, &s.coupling.ambient.cells()[0].piece);
    assert_eq!(x.linear, y.linear);
    assert!((&x.offset - &y.offset).amax() < 1e-15);
    s.coupling.ambient = f.coupling.ambient.clone();
    assert_eq!(f, s);
    assert_eq!(fixture("theorem1_2x3.json"), theorem1_2x3());
    assert_eq!(fixture("swap_pair.json"), swap_pair(1.0));
    for name in ["example1_node1.json", "example1_node2.json"] {
        let s = fixture(name);
        assert!(s.validate().is_valid(), "{name}: {}", s.validate());
    }
}
