use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use stoqlift::dynamics::{channel, ctmc_embedding};
use stoqlift::formats::{to_json, ComplexMatrixFile};
use stoqlift::kernels::RateMatrix;
use stoqlift::{RMatrix, Tolerances};
use tempfile::TempDir;

const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stoqlift"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

fn verdict<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|v| v["name"] == name)
        .unwrap_or_else(|| panic!("no verdict {name} in {r}"))
}

fn table(r: &Value, name: &str) -> Vec<Vec<f64>> {
    r["tables"][name]["rows"]
        .as_array()
        .unwrap_or_else(|| panic!("no table {name}"))
        .iter()
        .map(|row| row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect())
        .collect()
}

struct Files(TempDir);

impl Files {
    fn new() -> Self {
        Files(tempfile::tempdir().unwrap())
    }

    fn put(&self, name: &str, text: &str) -> PathBuf {
        let p = self.0.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FLIP: &str = r#"{"n":2,"rows":[[0,1],[1,0]]}"#;
const MIX: &str = r#"{"n":2,"rows":[[0.5,0.5],[0.5,0.5]]}"#;

fn hadamard_json() -> String {
    format!(r#"{{"n":2,"rows":[[{S},{S}],[{S},-{S}]]}}"#)
}

#[test]
fn validate_exit_codes() {
    let f = Files::new();
    let id = f.put("id.json", r#"{"n":2,"rows":[[1,0],[0,1]]}"#);
    let bad = f.put("bad.json", r#"{"n":2,"rows":[[1.2,0],[0,1]]}"#);
    let broken = f.put("broken.json", r#"{"n":2,"rows":[[1,0]"#);

    assert_eq!(code(&run(&["validate", s(&id)])), 0);

    let out = run(&["validate", s(&bad)]);
    assert_eq!(code(&out), 1);
    let r = report(&out);
    let v = verdict(&r, "unit_column_sums");
    assert_eq!(v["pass"], false);
    assert!((v["residual"].as_f64().unwrap() - 0.2).abs() < 1e-12);

    let out = run(&["validate", s(&broken)]);
    assert_eq!(code(&out), 2);
    assert!(out.stdout.is_empty());

    assert_eq!(code(&run(&["validate", s(&f.path("missing.json"))])), 2);
}

#[test]
fn validate_maps_vectors_and_generators() {
    let f = Files::new();
    let kraus = f.put("h.json", &format!(r#"{{"ops":[{}]}}"#, hadamard_json()));
    assert_eq!(code(&run(&["validate", s(&kraus)])), 0);

    let lossy = f.put("lossy.json", r#"{"ops":[{"n":2,"rows":[[0.5,0],[0,0.5]]}]}"#);
    let out = run(&["validate", s(&lossy)]);
    assert_eq!(code(&out), 1);
    assert_eq!(verdict(&report(&out), "trace_preserving")["pass"], false);

    let p = f.put("p.json", r#"{"n":3,"rows":[[0.2],[0.3],[0.5]]}"#);
    let out = run(&["validate", s(&p)]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&out)["artifacts"]["kind"], "vector");

    let gen = f.put("gen.json", r#"{"h":{"n":2,"rows":[[0,1],[1,0]]},"jumps":[{"n":2,"rows":[[0,1],[0,0]]}]}"#);
    assert_eq!(code(&run(&["validate", s(&gen)])), 0);
    let skew = f.put("skew.json", r#"{"h":{"n":2,"rows":[[0,1],[0,0]]},"jumps":[]}"#);
    assert_eq!(code(&run(&["validate", s(&skew)])), 1);

    // a transpose-like map is positive but not completely positive
    let mut rows = vec![vec!["[0,0]"; 4]; 4];
    for (r, c) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        rows[r][c] = "[1,0]";
    }
    let body = rows.iter().map(|r| format!("[{}]", r.join(","))).collect::<Vec<_>>().join(",");
    let transpose = f.put("t.json", &format!(r#"{{"n":4,"rows":[{body}]}}"#));
    let out = run(&["validate", s(&transpose)]);
    assert_eq!(code(&out), 1);
    let r = report(&out);
    assert_eq!(r["artifacts"]["kind"], "superoperator");
    assert_eq!(verdict(&r, "trace_preserving")["pass"], true);
    assert_eq!(verdict(&r, "completely_positive")["pass"], false);
}

#[test]
fn canonical_lift_of_flip() {
    let f = Files::new();
    let flip = f.put("flip.json", FLIP);
    let kraus_out = f.path("kraus.json");
    let out = run(&["lift", "--method", "canonical", "--kernel", s(&flip), "--kraus-out", s(&kraus_out)]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["artifacts"]["kraus_count"], 2);
    assert_eq!(verdict(&r, "compatibility")["pass"], true);

    let written: Value = serde_json::from_str(&std::fs::read_to_string(&kraus_out).unwrap()).unwrap();
    assert_eq!(written, r["artifacts"]["kraus"]);
    assert_eq!(written["ops"].as_array().unwrap().len(), 2);
    // the written file is itself a valid CPTP input
    assert_eq!(code(&run(&["validate", s(&kraus_out)])), 0);
}

#[test]
fn barandes_lift_of_hadamard_induces_mix() {
    let f = Files::new();
    let h = f.put("h.json", &hadamard_json());
    let out = run(&["lift", "--method", "barandes", "--theta", s(&h)]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["artifacts"]["kraus_count"], 2);
    for row in table(&r, "induced_kernel") {
        for x in row {
            assert!((x - 0.5).abs() < 1e-12);
        }
    }

    let mix = f.put("mix.json", MIX);
    let out = run(&["lift", "--method", "theta", "--theta", s(&h), "--kernel", s(&mix)]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&out)["artifacts"]["kraus_count"], 1);

    // [H]_⊙ is not the flip kernel
    let flip = f.put("flip.json", FLIP);
    let out = run(&["lift", "--method", "barandes", "--theta", s(&h), "--kernel", s(&flip)]);
    assert_eq!(code(&out), 1);
    assert_eq!(verdict(&report(&out), "compatibility")["pass"], false);
}

#[test]
fn lift_rejects_bad_inputs() {
    let f = Files::new();
    let bad_theta = f.put("bad.json", r#"{"n":2,"rows":[[1,1],[1,0]]}"#);
    let out = run(&["lift", "--method", "barandes", "--theta", s(&bad_theta)]);
    assert_eq!(code(&out), 1);
    assert_eq!(verdict(&report(&out), "theta_modulus_stochastic")["pass"], false);

    // stochastic modulus, not unitary: the conjugation lift loses trace
    let shear = f.put("shear.json", r#"{"n":2,"rows":[[1,1],[0,0]]}"#);
    let out = run(&["lift", "--method", "theta", "--theta", s(&shear)]);
    assert_eq!(code(&out), 1);
    assert_eq!(verdict(&report(&out), "theta_unitary")["pass"], false);

    assert_eq!(code(&run(&["lift", "--method", "canonical"])), 2);
    assert_eq!(code(&run(&["lift", "--method", "barandes"])), 2);
    assert_eq!(code(&run(&["lift", "--method", "sideways"])), 2);
}

#[test]
fn classical_divisibility() {
    let f = Files::new();
    let flip = f.put("flip.json", FLIP);
    let mix = f.put("mix.json", MIX);

    // Γ̃ Γ_mix has equal columns, so it can never be the flip
    let out = run(&["divisibility", "--mode", "classical", "--g10", s(&mix), "--g20", s(&flip)]);
    assert_eq!(code(&out), 1);
    let r = report(&out);
    assert_eq!(verdict(&r, "c_divisible")["pass"], false);
    assert!(!table(&r, "violated_constraints").is_empty());

    let out = run(&["divisibility", "--mode", "classical", "--g10", s(&flip), "--g20", s(&mix)]);
    assert_eq!(code(&out), 0);
    for row in table(&report(&out), "witness") {
        for x in row {
            assert!((x - 0.5).abs() < 1e-12);
        }
    }

    let three = f.put("three.json", r#"{"n":3,"rows":[[1,0,0],[0,1,0],[0,0,1]]}"#);
    let out = run(&["divisibility", "--mode", "classical", "--g10", s(&three), "--g20", s(&flip)]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&run(&["divisibility", "--mode", "classical", "--g10", s(&flip)])), 2);
}

fn dephasing_kraus() -> &'static str {
    r#"{"ops":[{"n":2,"rows":[[1,0],[0,0]]},{"n":2,"rows":[[0,0],[0,1]]}]}"#
}

#[test]
fn quantum_divisibility_rank_obstruction() {
    let f = Files::new();
    let deph = f.put("deph.json", dephasing_kraus());
    let had = f.put("had.json", &format!(r#"{{"ops":[{}]}}"#, hadamard_json()));
    let out = run(&["divisibility", "--mode", "quantum", "--e10", s(&deph), "--e20", s(&had)]);
    assert_eq!(code(&out), 1);
    let r = report(&out);
    let detail = verdict(&r, "q_divisible")["detail"].as_str().unwrap().to_string();
    assert!(detail.contains("rank 2 < 4"), "{detail}");

    let out = run(&["divisibility", "--mode", "quantum", "--e10", s(&had), "--e20", s(&deph)]);
    assert_eq!(code(&out), 0);
    assert!(report(&out)["artifacts"]["witness"].is_object());
}

fn ctmc_channel(t: f64) -> String {
    let tol = Tolerances::default();
    let rate = RateMatrix::new(RMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 1.0, -2.0]), &tol).unwrap();
    let gen = ctmc_embedding(&rate, None).unwrap();
    to_json(&ComplexMatrixFile::from_matrix(channel(&gen, t).unwrap().matrix()))
}

#[test]
fn theorem1_on_ctmc_semigroup() {
    let f = Files::new();
    let e10 = f.put("e10.json", &ctmc_channel(0.3));
    let e20 = f.put("e20.json", &ctmc_channel(0.8));
    let out = run(&["divisibility", "--mode", "theorem1", "--e10", s(&e10), "--e20", s(&e20)]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(verdict(&r, "theorem_applies")["pass"], true);
    assert_eq!(r["artifacts"]["c_divisible"], true);

    // oracle: the classical factor is exp(0.5 R) for R = [[-1, 2], [1, -2]];
    // eigenvalues 0 and -3 give exp(0.5R) = P + e^{-1.5}(I - P), P = stationary projector
    let e = (-1.5_f64).exp();
    let expected = [[2.0 / 3.0 + e / 3.0, 2.0 / 3.0 - 2.0 * e / 3.0], [1.0 / 3.0 - e / 3.0, 1.0 / 3.0 + 2.0 * e / 3.0]];
    let w = table(&r, "witness");
    for i in 0..2 {
        for j in 0..2 {
            assert!((w[i][j] - expected[i][j]).abs() < 1e-8, "{w:?}");
        }
    }

    let had = f.put("had.json", &format!(r#"{{"ops":[{}]}}"#, hadamard_json()));
    let out = run(&["divisibility", "--mode", "theorem1", "--e10", s(&had), "--e20", s(&had)]);
    assert_eq!(code(&out), 1);
    assert_eq!(verdict(&report(&out), "theorem_applies")["pass"], false);

    // a map that is not CPTP violates the preconditions
    let lossy = f.put("lossy.json", r#"{"ops":[{"n":2,"rows":[[0.5,0],[0,0.5]]}]}"#);
    let out = run(&["divisibility", "--mode", "theorem1", "--e10", s(&lossy), "--e20", s(&had)]);
    assert_eq!(code(&out), 1);
    assert_eq!(verdict(&report(&out), "preconditions")["pass"], false);
}

fn cnot_kraus() -> &'static str {
    r#"{"ops":[{"n":4,"rows":[[1,0,0,0],[0,1,0,0],[0,0,0,1],[0,0,1,0]]}]}"#
}

#[test]
fn environment_division() {
    let f = Files::new();
    let scenario = format!(
        r#"{{"n_sys":2,"n_env":2,"p_env":[1,0],"interaction":{},"post_sys":{{"ops":[{FLIP}]}},"post_env":{}}}"#,
        cnot_kraus(),
        r#"{"ops":[{"n":2,"rows":[[1,0],[0,1]]}]}"#
    );
    let path = f.put("scenario.json", &scenario);
    let out = run(&["divisibility", "--mode", "environment", "--scenario", s(&path)]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(verdict(&r, "record_form")["pass"], true);
    assert_eq!(verdict(&r, "c_divisible")["pass"], true);
    assert_eq!(table(&r, "witness"), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);

    // a Hadamard on the system before the record leaves coherences at t1
    let hi_rows = format!("[{S},0,{S},0],[0,{S},0,{S}],[{S},0,-{S},0],[0,{S},0,-{S}]");
    let coherent = scenario.replace(cnot_kraus(), &format!(r#"{{"ops":[{{"n":4,"rows":[{hi_rows}]}}]}}"#));
    let path = f.put("coherent.json", &coherent);
    let out = run(&["divisibility", "--mode", "environment", "--scenario", s(&path)]);
    assert_eq!(code(&out), 1);
    assert_eq!(verdict(&report(&out), "record_form")["pass"], false);

    let wrong_dims = scenario.replace(r#""n_env":2"#, r#""n_env":3"#);
    let path = f.put("dims.json", &wrong_dims);
    assert_eq!(code(&run(&["divisibility", "--mode", "environment", "--scenario", s(&path)])), 2);
}

#[test]
fn demo_scaling_ratio_near_four() {
    let out = run(&["demo", "scaling"]);
    assert_eq!(code(&out), 0);
    let rows = table(&report(&out), "scaling");
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r[1]).collect::<Vec<_>>(), vec![100.0, 400.0, 1600.0]);
    for r in &rows[1..] {
        assert!((r[3] - 4.0).abs() < 0.2, "ratio {}", r[3]);
    }
}

#[test]
fn demo_phase_memory_defaults() {
    let out = run(&["demo", "phase-memory"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    let close = |a: &[Vec<f64>], b: &[[f64; 2]; 2]| {
        a.iter().zip(b).all(|(x, y)| x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-12))
    };
    assert!(close(&table(&r, "two_step_x"), &[[1.0, 0.0], [0.0, 1.0]]));
    assert!(close(&table(&r, "two_step_y"), &[[0.5, 0.5], [0.5, 0.5]]));
    assert!(close(&table(&r, "one_step_x"), &[[0.5, 0.5], [0.5, 0.5]]));
    assert!(close(&table(&r, "one_step_y"), &[[0.5, 0.5], [0.5, 0.5]]));
    let diff = table(&r, "difference_column");
    assert!((diff[0][1] - 0.5).abs() < 1e-12 && (diff[1][1] + 0.5).abs() < 1e-12);
}

#[test]
fn demo_phase_memory_rejects_distinguishable_pair() {
    let f = Files::new();
    let id = r#"{"n":2,"rows":[[1,0],[0,1]]}"#;
    let path = f.put("pm.json", &format!(r#"{{"u_x":{id},"u_y":{},"v":{id}}}"#, hadamard_json()));
    let out = run(&["demo", "phase-memory", "--file", s(&path)]);
    assert_eq!(code(&out), 1);
    assert_eq!(verdict(&report(&out), "one_step_indistinguishable")["pass"], false);
}

#[test]
fn demo_theta_triviality_bound_decays_per_decade() {
    let out = run(&["demo", "theta-triviality"]);
    assert_eq!(code(&out), 0);
    let rows = table(&report(&out), "triviality");
    assert_eq!(rows.len(), 4);
    for r in &rows {
        // oracle for H = σx over unit time: α(h) = sin²h
        let n = r[0];
        assert!((r[3] - n * (1.0 / n).sin().powi(2)).abs() < 1e-12);
        assert!(r[4] <= r[3] + 1e-12);
    }
    for w in rows.windows(2) {
        let ratio = w[0][3] / w[1][3];
        assert!((ratio - 10.0).abs() < 0.5, "ratio {ratio}");
    }
}

#[test]
fn demo_ck_checklist_families() {
    assert_eq!(code(&run(&["demo", "ck-checklist"])), 0);

    let f = Files::new();
    let gen = f.put("gen.json", r#"{"h":{"n":2,"rows":[[1,0],[0,-1]]},"jumps":[{"n":2,"rows":[[0,1],[0,0]]}]}"#);
    let out = run(&["demo", "ck-checklist", "--family", "gksl", "--file", s(&gen), "--grid", "0,0.5,1.5"]);
    assert_eq!(code(&out), 0);
    assert_eq!(table(&report(&out), "check_a").len(), 3);

    let fam = f.put("fam.json", r#"{"kind":"theta","grid":[0,0.4,1],"h":{"n":2,"rows":[[0,1],[1,0]]}}"#);
    let out = run(&["demo", "ck-checklist", "--family", "pairwise-lift", "--file", s(&fam)]);
    assert_eq!(code(&out), 1);
    assert_eq!(verdict(&report(&out), "forward_equation")["pass"], false);

    assert_eq!(code(&run(&["demo", "ck-checklist", "--family", "gksl"])), 2);
}

#[test]
fn demo_ctmc_embedding_and_unknown_name() {
    let out = run(&["demo", "ctmc-embedding"]);
    assert_eq!(code(&out), 0);
    assert_eq!(table(&report(&out), "embedding").len(), 5);
    assert_eq!(code(&run(&["demo", "no-such-demo"])), 2);
    assert_eq!(code(&run(&[])), 2);
}

#[test]
fn global_flags() {
    assert_eq!(code(&run(&["--tol", "-1", "demo", "scaling"])), 2);
    assert_eq!(code(&run(&["--seed", "x", "demo", "scaling"])), 2);
    assert_eq!(code(&run(&["--help"])), 0);

    let f = Files::new();
    let dest = f.path("report.json");
    let out = run(&["demo", "scaling", "--out", s(&dest)]);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read(&dest).unwrap(), out.stdout);

    // an impossibly tight tolerance turns the checklist into a domain failure
    assert_eq!(code(&run(&["--tol", "1e-20", "demo", "ck-checklist"])), 1);
}

#[test]
fn reports_are_deterministic() {
    let f = Files::new();
    let flip = f.put("flip.json", FLIP);
    let mix = f.put("mix.json", MIX);
    let cases: Vec<Vec<&str>> = vec![
        vec!["--seed", "7", "demo", "ctmc-embedding"],
        vec!["demo", "theta-triviality"],
        vec!["demo", "ck-checklist"],
        vec!["divisibility", "--mode", "classical", "--g10", s(&mix), "--g20", s(&flip)],
        vec!["lift", "--method", "canonical", "--kernel", s(&flip)],
    ];
    for args in cases {
        let a = run(&args);
        let b = run(&args);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert!(!a.stdout.is_empty());
    }

    let a = run(&["--seed", "1", "demo", "ctmc-embedding"]);
    let b = run(&["--seed", "2", "demo", "ctmc-embedding"]);
    assert_ne!(a.stdout, b.stdout);
    assert_eq!(report(&a)["seed"], 1);
}

#[test]
fn inputs_are_digested() {
    let f = Files::new();
    let flip = f.put("flip.json", FLIP);
    let r = report(&run(&["validate", s(&flip)]));
    // SHA-256 of the file bytes, precomputed with sha256sum
    assert_eq!(
        r["inputs"]["file"],
        "c8d5bcb3f0260fd963d18867b93c5353ffb425f9fb8bdce3778fb9b41b92d10f"
    );
    assert_eq!(r["tool_version"], env!("CARGO_PKG_VERSION"));
}
